//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use huepool::attention::{colorname_attention, combined_colorname_attention};
use huepool::baselines::kmeans_lab;
use huepool::dataset::{render_item, synth_generate, Shape, SynthSpec};
use huepool::evaluation::{match_palettes, run_benchmark, threshold_score, Method, DEFAULT_THRESHOLDS};
use huepool::pipeline::{extract_mono, extract_multi, min_pairwise_delta};
use huepool::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_secs: f64) -> bool {
    elapsed.as_secs_f64() < limit_secs
}

fn mask_attention_of(item: &huepool::dataset::SynthItem) -> AttentionMap {
    let w = item.mask.iter().map(|&m| m as f64).collect();
    AttentionMap::from_weights(item.image.width(), item.image.height(), w).unwrap()
}

// (L1, a1, b1, L2, a2, b2, ΔE00) from the published CIEDE2000 test data.
const SHARMA: [[f64; 7]; 34] = [
    [50.0, 2.6772, -79.7751, 50.0, 0.0, -82.7485, 2.0425],
    [50.0, 3.1571, -77.2803, 50.0, 0.0, -82.7485, 2.8615],
    [50.0, 2.8361, -74.0200, 50.0, 0.0, -82.7485, 3.4412],
    [50.0, -1.3802, -84.2814, 50.0, 0.0, -82.7485, 1.0000],
    [50.0, -1.1848, -84.8006, 50.0, 0.0, -82.7485, 1.0000],
    [50.0, -0.9009, -85.5211, 50.0, 0.0, -82.7485, 1.0000],
    [50.0, 0.0, 0.0, 50.0, -1.0, 2.0, 2.3669],
    [50.0, -1.0, 2.0, 50.0, 0.0, 0.0, 2.3669],
    [50.0, 2.49, -0.001, 50.0, -2.49, 0.0009, 7.1792],
    [50.0, 2.49, -0.001, 50.0, -2.49, 0.0010, 7.1792],
    [50.0, 2.49, -0.001, 50.0, -2.49, 0.0011, 7.2195],
    [50.0, 2.49, -0.001, 50.0, -2.49, 0.0012, 7.2195],
    [50.0, -0.001, 2.49, 50.0, 0.0009, -2.49, 4.8045],
    [50.0, -0.001, 2.49, 50.0, 0.0010, -2.49, 4.8045],
    [50.0, -0.001, 2.49, 50.0, 0.0011, -2.49, 4.7461],
    [50.0, 2.5, 0.0, 50.0, 0.0, -2.5, 4.3065],
    [50.0, 2.5, 0.0, 73.0, 25.0, -18.0, 27.1492],
    [50.0, 2.5, 0.0, 61.0, -5.0, 29.0, 22.8977],
    [50.0, 2.5, 0.0, 56.0, -27.0, -3.0, 31.9030],
    [50.0, 2.5, 0.0, 58.0, 24.0, 15.0, 19.4535],
    [50.0, 2.5, 0.0, 50.0, 3.1736, 0.5854, 1.0000],
    [50.0, 2.5, 0.0, 50.0, 3.2972, 0.0, 1.0000],
    [50.0, 2.5, 0.0, 50.0, 1.8634, 0.5757, 1.0000],
    [50.0, 2.5, 0.0, 50.0, 3.2592, 0.3350, 1.0000],
    [60.2574, -34.0099, 36.2677, 60.4626, -34.1751, 39.4387, 1.2644],
    [63.0109, -31.0961, -5.8663, 62.8187, -29.7946, -4.0864, 1.2630],
    [61.2901, 3.7196, -5.3901, 61.4292, 2.2480, -4.9620, 1.8731],
    [35.0831, -44.1164, 3.7933, 35.0232, -40.0716, 1.5901, 1.8645],
    [22.7233, 20.0904, -46.6940, 23.0331, 14.9730, -42.5619, 2.0373],
    [36.4612, 47.8580, 18.3852, 36.2715, 50.5065, 21.2231, 1.4146],
    [90.8027, -2.0831, 1.4410, 91.1528, -1.6435, 0.0447, 1.4441],
    [90.9257, -0.5406, -0.9208, 88.6381, -0.8985, -0.7239, 1.5381],
    [6.7747, -0.2908, -2.4247, 5.8714, -0.0985, -2.2286, 0.6377],
    [2.0776, 0.0795, -1.1350, 0.9033, -0.0636, -0.5514, 0.9082],
];

fn delta_e_oracle() -> Outcome {
    let start = Instant::now();
    let worst = SHARMA
        .iter()
        .map(|r| {
            let d = ciede2000(Lab::new(r[0], r[1], r[2]), Lab::new(r[3], r[4], r[5]));
            let swapped = ciede2000(Lab::new(r[3], r[4], r[5]), Lab::new(r[0], r[1], r[2]));
            (d - r[6]).abs().max((swapped - r[6]).abs())
        })
        .fold(0.0f64, f64::max);
    let elapsed = start.elapsed();
    check(
        worst <= 1e-4 && within(elapsed, 1.0),
        format!("34 pairs, worst |error| {worst:.2e} (limit 1e-4), {elapsed:.2?}"),
    )
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let levels: Vec<u8> = (0..17u32).map(|i| ((i * 255 + 8) / 16) as u8).collect();
    let mut worst = 0i32;
    for &r in &levels {
        for &g in &levels {
            for &b in &levels {
                let c = RgbU8::new(r, g, b);
                let back = lab_to_rgb(rgb_to_lab(c));
                for (x, y) in c.channels().iter().zip(back.channels()) {
                    worst = worst.max((*x as i32 - y as i32).abs());
                }
            }
        }
    }
    let elapsed = start.elapsed();
    check(
        worst <= 1 && within(elapsed, 5.0),
        format!("17^3 lattice, worst channel error {worst} (limit 1), {elapsed:.2?}"),
    )
}

fn attention_behavior() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let random_image = |rng: &mut ChaCha8Rng| {
        let (w, h) = (rng.random_range(1..=16), rng.random_range(1..=16));
        Image::from_fn(w, h, |_, _| RgbU8::new(rng.random(), rng.random(), rng.random()))
    };
    let mut worst_sum = 0.0f64;
    for _ in 0..1000 {
        let img = random_image(&mut rng);
        let c = RgbU8::new(rng.random(), rng.random(), rng.random());
        let t = 10f64.powf(rng.random_range(-2.0..2.0));
        let ca = colorname_attention(&img, c, t);
        let obj = AttentionMap::uniform(img.width(), img.height());
        let combined = combined_colorname_attention(&img, c, t, &obj).unwrap();
        for map in [&ca, &combined] {
            worst_sum = worst_sum.max((map.weights().iter().sum::<f64>() - 1.0).abs());
        }
    }

    // The similarity kernel divides by t, so the exponent scale is 1/t: entropy must rise
    // strictly along the ladder whenever the image is not uniform.
    let ladder = [0.25, 0.5, 1.0, 2.0, 4.0];
    let mut monotone = 0;
    for _ in 0..100 {
        let img = Image::from_fn(16, 16, |_, _| RgbU8::new(rng.random(), rng.random(), rng.random()));
        let c = RgbU8::new(rng.random(), rng.random(), rng.random());
        let h: Vec<f64> = ladder.iter().map(|&t| colorname_attention(&img, c, t).entropy()).collect();
        if h.windows(2).all(|w| w[1] > w[0]) {
            monotone += 1;
        }
    }
    check(
        worst_sum <= 1e-6 && monotone == 100,
        format!(
            "1000 triples, worst |sum - 1| {worst_sum:.1e}; entropy strictly increasing in t on {monotone}/100 images"
        ),
    )
}

fn flat_cast_spec() -> SynthSpec {
    SynthSpec {
        seed: 4,
        count: 200,
        shape: Shape::Ellipse,
        noise_sigma: 4.0,
        illuminant_gains: Some([1.0, 0.5, 0.25]),
        ..SynthSpec::default()
    }
}

fn corrected_config() -> PipelineConfig {
    PipelineConfig {
        estimator: Some(IlluminantMethod::ShadesOfGray(6.0)),
        stretch: false,
        ..PipelineConfig::default()
    }
}

fn illumination_recovery() -> Outcome {
    let spec = flat_cast_spec();
    let palette = Palette::default_palette();
    let on = corrected_config();
    let off = PipelineConfig {
        estimator: None,
        ..on.clone()
    };
    let (mut hits_on, mut hits_off) = (0, 0);
    for i in 0..spec.count {
        let item = render_item(&spec, i).unwrap();
        let obj = mask_attention_of(&item);
        let gt = item.colors[0];
        if delta_e_rgb(extract_mono(&item.image, &obj, &on, &palette).unwrap().rgb, gt) <= 10.0 {
            hits_on += 1;
        }
        if delta_e_rgb(extract_mono(&item.image, &obj, &off, &palette).unwrap().rgb, gt) <= 10.0 {
            hits_off += 1;
        }
    }
    let rate_on = 100.0 * hits_on as f64 / spec.count as f64;
    let rate_off = 100.0 * hits_off as f64 / spec.count as f64;
    check(
        rate_on >= 95.0 && rate_on - rate_off >= 20.0,
        format!("within ΔE00 10: {rate_on:.1}% corrected, {rate_off:.1}% uncorrected (need ≥95 and a ≥20 point drop)"),
    )
}

fn striped_suites() -> Vec<SynthSpec> {
    [(5, 2), (6, 3)]
        .into_iter()
        .map(|(seed, n)| SynthSpec {
            seed,
            count: 100,
            shape: Shape::Stripes(n),
            noise_sigma: 4.0,
            illuminant_gains: Some([1.0, 0.8, 0.6]),
            ..SynthSpec::default()
        })
        .collect()
}

fn striped_pipeline_config() -> PipelineConfig {
    PipelineConfig {
        temperature: TemperatureSpec::Fixed(0.1),
        ..corrected_config()
    }
}

fn multi_color_ordering(run: &mut Option<Vec<Vec<ColorPrediction>>>) -> Outcome {
    let start = Instant::now();
    let palette = Palette::default_palette();
    let methods = [
        Method::Pipeline(striped_pipeline_config()),
        Method::KMeans {
            cfg: KMeansConfig::default(),
            k: None,
        },
        Method::Colorname { n: None },
    ];
    let mut preds: Vec<Vec<Vec<ColorPrediction>>> = vec![Vec::new(); methods.len()];
    let mut gts = Vec::new();
    for spec in striped_suites() {
        for i in 0..spec.count {
            let item = render_item(&spec, i).unwrap();
            let obj = mask_attention_of(&item);
            for (m, out) in methods.iter().zip(preds.iter_mut()) {
                out.push(m.predict(&item.image, &obj, item.colors.len(), &palette).unwrap());
            }
            gts.push(item.colors);
        }
    }
    let scores: Vec<f64> = preds
        .iter()
        .map(|p| threshold_score(&gts, p, &DEFAULT_THRESHOLDS).unwrap().multi_color[0])
        .collect();
    let elapsed = start.elapsed();
    *run = Some(preds.swap_remove(0));
    check(
        scores[0] > scores[1] && scores[0] > scores[2] && within(elapsed, 120.0),
        format!(
            "multi-color score at ΔE00 10 over 200 items: pipeline {:.1}, kmeans {:.1}, colorname {:.1}, {elapsed:.1?}",
            scores[0], scores[1], scores[2]
        ),
    )
}

fn nms_invariant(run: &Option<Vec<Vec<ColorPrediction>>>) -> Outcome {
    let Some(run) = run else {
        return check(false, "striped evaluation did not run");
    };
    let delta = striped_pipeline_config().nms_delta;
    // The zero-noise flat suite adds single-color items to the striped ones.
    let flat = SynthSpec {
        seed: 8,
        count: 50,
        ..SynthSpec::default()
    };
    let palette = Palette::default_palette();
    let mut all: Vec<Vec<ColorPrediction>> = run.clone();
    for i in 0..flat.count {
        let item = render_item(&flat, i).unwrap();
        all.push(extract_multi(&item.image, &mask_attention_of(&item), &striped_pipeline_config(), &palette).unwrap());
    }
    let bad_count = all.iter().filter(|p| !(1..=3).contains(&p.len())).count();
    let closest = all.iter().map(|p| min_pairwise_delta(p)).fold(f64::INFINITY, f64::min);
    check(
        bad_count == 0 && closest >= delta,
        format!(
            "{} predictions over {} items, closest pair ΔE00 {closest:.2} (nms_delta {delta}), {bad_count} counts outside [1, 3]",
            all.iter().map(Vec::len).sum::<usize>(),
            all.len()
        ),
    )
}

fn sse(points: &[Lab]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let n = points.len() as f64;
    let m = points.iter().fold([0.0; 3], |a, p| [a[0] + p.l / n, a[1] + p.a / n, a[2] + p.b / n]);
    points
        .iter()
        .map(|p| (p.l - m[0]).powi(2) + (p.a - m[1]).powi(2) + (p.b - m[2]).powi(2))
        .sum()
}

fn kmeans_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let points: Vec<Lab> = (0..12)
            .map(|_| {
                Lab::new(
                    rng.random_range(0.0..100.0),
                    rng.random_range(-80.0..80.0),
                    rng.random_range(-80.0..80.0),
                )
            })
            .collect();
        // Point 0 always sits in the first group; every nonempty second group is tried.
        let mut best = f64::INFINITY;
        for mask in 1u32..(1 << 11) {
            let (mut a, mut b) = (vec![points[0]], Vec::new());
            for (j, p) in points.iter().enumerate().skip(1) {
                if mask >> (j - 1) & 1 == 1 {
                    b.push(*p);
                } else {
                    a.push(*p);
                }
            }
            best = best.min(sse(&a) + sse(&b));
        }
        let cfg = KMeansConfig {
            k: 2,
            ..KMeansConfig::default()
        };
        let got = kmeans_lab(&points, &cfg).unwrap().objective;
        worst = worst.max((got - best).abs());
    }
    check(
        worst <= 1e-4,
        format!("20 instances, worst |objective - optimum| {worst:.2e} (limit 1e-4)"),
    )
}

const PERMUTATIONS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

fn matching_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut agree = 0;
    for _ in 0..1000 {
        let mut color = || RgbU8::new(rng.random(), rng.random(), rng.random());
        let gts = [color(), color(), color()];
        let preds: Vec<ColorPrediction> = (1..=3)
            .map(|rank| ColorPrediction {
                rgb: color(),
                name: String::new(),
                mass: 1.0 / 3.0,
                rank,
            })
            .collect();
        let (best_perm, best_total) = PERMUTATIONS
            .iter()
            .map(|perm| {
                let total: f64 = (0..3).map(|g| delta_e_rgb(gts[g], preds[perm[g]].rgb)).sum();
                (perm, total)
            })
            .fold((&PERMUTATIONS[0], f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
        let got = match_palettes(&preds, &gts);
        let total: f64 = got.iter().map(|m| m.delta).sum();
        let same = got.iter().all(|m| m.pred_index == Some(best_perm[m.gt_index]));
        if same && (total - best_total).abs() <= 1e-9 {
            agree += 1;
        }
    }
    check(agree == 1000, format!("{agree}/1000 random 3x3 cases equal the permutation enumerator"))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        seed: 9,
        count: 12,
        shape: Shape::Stripes(2),
        noise_sigma: 4.0,
        illuminant_gains: Some([1.0, 0.8, 0.6]),
        width: 64,
        height: 64,
        ..SynthSpec::default()
    };
    let annotations = synth_generate(&spec, dir.path()).unwrap();
    let palette = Palette::default_palette();
    let method = Method::Pipeline(striped_pipeline_config());
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| {
            let out = run_benchmark(&annotations, dir.path(), &method, &palette, &DEFAULT_THRESHOLDS).unwrap();
            let mut csv = Vec::new();
            out.write_item_csv(&mut csv).unwrap();
            (out.report.to_json(), csv)
        })
    };
    let (a, b) = (run(1), run(4));
    let regenerated = tempfile::tempdir().unwrap();
    synth_generate(&spec, regenerated.path()).unwrap();
    let same_files = (0..spec.count).all(|i| {
        let name = format!("item_{i:04}.png");
        std::fs::read(dir.path().join(&name)).unwrap() == std::fs::read(regenerated.path().join(&name)).unwrap()
    });
    check(
        a == b && same_files,
        format!(
            "reports identical across 1 and 4 workers: {}; regenerated images identical: {same_files}",
            a == b
        ),
    )
}

fn main() {
    let mut striped = None;
    let results = vec![
        ("1 ΔE00 oracle agreement", delta_e_oracle()),
        ("2 colorspace round trip", round_trip()),
        ("3 colorname attention behavior", attention_behavior()),
        ("4 illumination recovery", illumination_recovery()),
        ("5 multi-color ordering", multi_color_ordering(&mut striped)),
        ("6 NMS invariant", nms_invariant(&striped)),
        ("7 k-means oracle", kmeans_oracle()),
        ("8 matching oracle", matching_oracle()),
        ("9 determinism", determinism()),
    ];
    let mut failed = 0;
    for (name, outcome) in &results {
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        println!("{tag} criterion {name}: {}", outcome.detail);
        failed += usize::from(!outcome.pass);
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
