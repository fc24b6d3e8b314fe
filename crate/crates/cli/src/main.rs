use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use huepool::attention::{object_attention, MaskSource};
use huepool::baselines::{colorname_rgb_baseline, kmeans_palette};
use huepool::dataset::{read_annotations, synth_generate};
use huepool::evaluation::{run_benchmark, Method, DEFAULT_THRESHOLDS};
use huepool::palette::load_palette;
use huepool::pipeline::{extract_mono, extract_multi_traced};
use huepool::{ColorPrediction, Error, Image, KMeansConfig, KeyValueConfig, Palette, PipelineConfig, SynthSpec};

mod swatch;

const CONFIG_ENV: &str = "HUEPOOL_CONFIG";

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  1  extraction or evaluation failure
  2  usage error (unknown flag, missing argument)
  3  file not found or unreadable / unwritable
  4  malformed input file (image, mask, palette, annotations, config syntax)
  5  invalid configuration value

Environment:
  HUEPOOL_CONFIG  pipeline config file used when --config is not given";

#[derive(Parser)]
#[command(name = "huepool", version, about = "Garment color extraction and evaluation", after_help = EXIT_CODES)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Predict the colors of one image and print them as JSON.
    Extract(ExtractArgs),
    /// Score a method on an annotated dataset.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic dataset.
    Synth(SynthArgs),
    /// Run a reference method on one image and print its colors as JSON.
    Baseline(BaselineArgs),
    /// Write or validate palette files.
    #[command(subcommand)]
    Palette(PaletteCommand),
}

#[derive(Args)]
struct CommonConfig {
    /// Flat key = value config file; falls back to $HUEPOOL_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set temperature=adaptive:0.5 (repeatable; wins over the file).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Palette CSV (name,r,g,b); the built-in 72-name palette otherwise.
    #[arg(long)]
    palette: Option<PathBuf>,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    image: PathBuf,
    /// Grayscale object mask; a centered Gaussian prior otherwise.
    #[arg(long)]
    mask: Option<PathBuf>,
    #[command(flatten)]
    common: CommonConfig,
    /// Report only the main color.
    #[arg(long)]
    mono: bool,
    /// Write one combined-attention heatmap PNG per predicted color here.
    #[arg(long, value_name = "DIR")]
    heatmaps: Option<PathBuf>,
    /// Write a preview PNG with one bar per predicted color.
    #[arg(long, value_name = "PNG")]
    swatch: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum EvalMethod {
    Pipeline,
    Kmeans,
    Colorname,
}

#[derive(Clone, Copy, ValueEnum)]
enum BaselineMethod {
    Kmeans,
    Colorname,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Annotation file (JSONL); relative paths resolve against its directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "pipeline")]
    method: EvalMethod,
    #[command(flatten)]
    common: CommonConfig,
    /// Report JSON path; the per-item CSV goes next to it with a .csv extension.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated ΔE00 thresholds.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_THRESHOLDS)]
    thresholds: Vec<f64>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long)]
    jobs: Option<usize>,
    /// k-means seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed k-means k or colorname count; the ground-truth count otherwise.
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Args)]
struct SynthArgs {
    /// Synthetic dataset spec (flat key = value file).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Override one spec key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    mask: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: BaselineMethod,
    /// Number of colors.
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// k-means config file (k, max_iters, seed, tol, restarts).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    palette: Option<PathBuf>,
}

#[derive(Subcommand)]
enum PaletteCommand {
    /// Write the built-in palette as CSV.
    Dump {
        /// Output file; standard output otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a palette CSV.
    Check {
        #[arg(long)]
        palette: PathBuf,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } | Error::Encode { .. } => 3,
        Error::Decode { .. } | Error::Parse { .. } | Error::EmptyPalette => 4,
        Error::Config(_) | Error::Validation(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Extract(a) => extract(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Synth(a) => synth(a),
        Command::Baseline(a) => baseline(a),
        Command::Palette(c) => palette(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn load_config<C: KeyValueConfig>(mut cfg: C, file: Option<&Path>, overrides: &[String]) -> Result<C, Error> {
    if let Some(path) = file {
        cfg.apply_file(path)?;
    }
    cfg.apply_overrides(overrides.iter().map(String::as_str))?;
    cfg.validate()?;
    Ok(cfg)
}

fn pipeline_config(common: &CommonConfig) -> Result<PipelineConfig, Error> {
    let env = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    let file = common.config.clone().or(env);
    load_config(PipelineConfig::default(), file.as_deref(), &common.overrides)
}

fn palette_from(path: Option<&Path>) -> Result<Palette, Error> {
    match path {
        Some(p) => load_palette(p),
        None => Ok(Palette::default_palette()),
    }
}

fn mask_source(mask: Option<&Path>) -> MaskSource {
    match mask {
        Some(p) => MaskSource::File(p.to_path_buf()),
        None => MaskSource::CenterPrior,
    }
}

fn print_json(preds: &[ColorPrediction]) {
    println!("{}", serde_json::to_string_pretty(preds).expect("predictions serialize"));
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    std::fs::write(path, bytes).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn extract(a: ExtractArgs) -> Result<(), Error> {
    let cfg = pipeline_config(&a.common)?;
    let palette = palette_from(a.common.palette.as_deref())?;
    let img = Image::load(&a.image)?;
    let obj = object_attention(&img, &mask_source(a.mask.as_deref()))?;
    let (preds, maps) = if a.mono {
        (vec![extract_mono(&img, &obj, &cfg, &palette)?], Vec::new())
    } else {
        let traced = extract_multi_traced(&img, &obj, &cfg, &palette)?;
        traced.into_iter().map(|c| (c.prediction, c.attention)).unzip()
    };
    if let Some(dir) = &a.heatmaps {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        obj.save_heatmap(dir.join("object.png"))?;
        for (p, map) in preds.iter().zip(&maps) {
            map.save_heatmap(dir.join(format!("color{}.png", p.rank)))?;
        }
    }
    if let Some(path) = &a.swatch {
        swatch::render(&preds).save_png(path)?;
    }
    print_json(&preds);
    Ok(())
}

fn evaluate(a: EvaluateArgs) -> Result<(), Error> {
    let palette = palette_from(a.common.palette.as_deref())?;
    let method = match a.method {
        EvalMethod::Pipeline => Method::Pipeline(pipeline_config(&a.common)?),
        EvalMethod::Kmeans => {
            let mut cfg = load_config(KMeansConfig::default(), a.common.config.as_deref(), &a.common.overrides)?;
            if let Some(seed) = a.seed {
                cfg.seed = seed;
            }
            Method::KMeans { cfg, k: a.k }
        }
        EvalMethod::Colorname => Method::Colorname { n: a.k },
    };
    let annotations = read_annotations(&a.data)?;
    let base_dir = a.data.parent().unwrap_or(Path::new("."));
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = a.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(jobs);
    }
    let pool = pool.build().map_err(|e| Error::Config(e.to_string()))?;
    let outcome = pool.install(|| run_benchmark(&annotations, base_dir, &method, &palette, &a.thresholds))?;

    for f in &outcome.failures {
        eprintln!("warning: item {} failed: {}", f.item, f.message);
    }
    println!("{}", outcome.report);
    if let Some(out) = &a.out {
        write_file(out, format!("{}\n", outcome.report.to_json()).as_bytes())?;
        let mut csv = Vec::new();
        outcome.write_item_csv(&mut csv)?;
        write_file(&out.with_extension("csv"), &csv)?;
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<(), Error> {
    let mut spec = load_config(SynthSpec::default(), a.spec.as_deref(), &a.overrides)?;
    if let Some(seed) = a.seed {
        spec.seed = seed;
    }
    let anns = synth_generate(&spec, &a.out)?;
    println!("wrote {} items to {}", anns.len(), a.out.display());
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<(), Error> {
    let img = Image::load(&a.image)?;
    let obj = object_attention(&img, &mask_source(a.mask.as_deref()))?;
    let preds = match a.method {
        BaselineMethod::Kmeans => {
            let base = KMeansConfig {
                k: a.k,
                ..KMeansConfig::default()
            };
            let mut cfg = load_config(base, a.config.as_deref(), &a.overrides)?;
            if let Some(seed) = a.seed {
                cfg.seed = seed;
            }
            kmeans_palette(&img, &obj, &cfg)?
        }
        BaselineMethod::Colorname => {
            let palette = palette_from(a.palette.as_deref())?;
            colorname_rgb_baseline(&img, &obj, &palette, a.k)
        }
    };
    print_json(&preds);
    Ok(())
}

fn palette(c: PaletteCommand) -> Result<(), Error> {
    match c {
        PaletteCommand::Dump { out } => {
            let mut buf = Vec::new();
            Palette::default_palette().write_csv(&mut buf)?;
            match out {
                Some(path) => write_file(&path, &buf)?,
                None => print!("{}", String::from_utf8(buf).expect("CSV is UTF-8")),
            }
        }
        PaletteCommand::Check { palette } => {
            let p = load_palette(&palette)?;
            println!("{}: {} entries, names unique", palette.display(), p.len());
        }
    }
    Ok(())
}
