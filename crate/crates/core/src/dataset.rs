//! Annotation files and a synthetic garment generator.
//!
//! Annotations are JSONL, one item per line:
//!
//! ```text
//! {"image":"item_0000.png","mask":"item_0000_mask.png","category":"top","colors":[[134,71,71]],"illuminant":[1.0,0.5,0.25]}
//! ```
//!
//! `mask` and `illuminant` are optional. `colors` lists 1 to 3 colors in
//! decreasing order of importance, as they would appear under neutral light.
//! Relative paths resolve against the annotation file's directory.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::colorspace::{delta_e_rgb, RgbU8};
use crate::config::{parse_value, unknown_key, KeyValueConfig};
use crate::error::{Error, Result};
use crate::illumination::Illuminant;
use crate::image::{self, Image};

pub const MAX_COLORS: usize = 3;
pub const CATEGORIES: [&str; 5] = ["coat", "dress", "pants", "shoes", "top"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Annotation {
    #[serde(rename = "image")]
    pub image_path: String,
    #[serde(rename = "mask", default, skip_serializing_if = "Option::is_none")]
    pub mask_path: Option<String>,
    pub category: String,
    pub colors: Vec<RgbU8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub illuminant: Option<Illuminant>,
}

impl Annotation {
    pub fn validate(&self) -> Result<()> {
        if self.image_path.is_empty() {
            return Err(Error::Validation("empty image path".into()));
        }
        if self.mask_path.as_deref() == Some("") {
            return Err(Error::Validation("empty mask path".into()));
        }
        if !(1..=MAX_COLORS).contains(&self.colors.len()) {
            return Err(Error::Validation(format!(
                "expected 1 to {MAX_COLORS} colors, found {}",
                self.colors.len()
            )));
        }
        Ok(())
    }
}

pub fn parse_annotations(text: &str, source_name: &str) -> Result<Vec<Annotation>> {
    parse_annotation_lines(text.lines().map(|l| Ok(l.to_string())), source_name)
}

fn parse_annotation_lines(
    lines: impl Iterator<Item = std::io::Result<String>>,
    source_name: &str,
) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(source_name, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ann: Annotation =
            serde_json::from_str(&line).map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        ann.validate()
            .map_err(|e| Error::parse(source_name, line_no, e.to_string()))?;
        out.push(ann);
    }
    Ok(out)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_annotation_lines(BufReader::new(file).lines(), &path.display().to_string())
}

pub fn write_annotations_to<W: Write>(annotations: &[Annotation], mut w: W) -> Result<()> {
    for ann in annotations {
        ann.validate()?;
        let line = serde_json::to_string(ann).expect("annotation serializes");
        writeln!(w, "{line}").map_err(|e| Error::io("<annotations>", e))?;
    }
    Ok(())
}

pub fn write_annotations(annotations: &[Annotation], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    write_annotations_to(annotations, &mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Resolves an annotation path against the directory holding the annotation file.
pub fn resolve(base_dir: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base_dir.join(p)
    }
}

/// Garment silhouette and fill.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Ellipse,
    Rectangle,
    /// Rectangle filled with repeating vertical bands of 2 or 3 colors.
    Stripes(usize),
}

impl Shape {
    pub fn color_count(&self) -> usize {
        match self {
            Shape::Stripes(n) => *n,
            _ => 1,
        }
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Ellipse => f.write_str("ellipse"),
            Shape::Rectangle => f.write_str("rectangle"),
            Shape::Stripes(n) => write!(f, "stripes:{n}"),
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ellipse" => Ok(Shape::Ellipse),
            "rectangle" => Ok(Shape::Rectangle),
            _ => {
                let n = s
                    .strip_prefix("stripes:")
                    .and_then(|n| n.parse::<usize>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown shape {s:?}")))?;
                Ok(Shape::Stripes(n))
            }
        }
    }
}

/// Parameters of a synthetic dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub seed: u64,
    pub count: usize,
    pub shape: Shape,
    /// Per-channel Gaussian noise, in 8-bit units.
    pub noise_sigma: f64,
    /// Cast applied to the whole scene by channel multiplication.
    pub illuminant_gains: Option<[f64; 3]>,
    pub background: RgbU8,
    pub width: u32,
    pub height: u32,
    /// Use these garment colors for every item instead of random ones.
    pub colors: Option<Vec<RgbU8>>,
    /// Band width fractions for stripes; random when unset.
    pub stripe_fractions: Option<Vec<f64>>,
    /// Minimum ΔE00 between random colors of one garment.
    pub min_separation: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            count: 16,
            shape: Shape::Ellipse,
            noise_sigma: 0.0,
            illuminant_gains: None,
            background: RgbU8::new(235, 235, 235),
            width: 128,
            height: 128,
            colors: None,
            stripe_fractions: None,
            min_separation: 30.0,
        }
    }
}

fn parse_triple<T: FromStr>(key: &str, s: &str) -> Result<[T; 3]> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::Config(format!("{key}: expected three comma-separated values, got {s:?}")));
    }
    Ok([
        parse_value(key, parts[0])?,
        parse_value(key, parts[1])?,
        parse_value(key, parts[2])?,
    ])
}

impl KeyValueConfig for SynthSpec {
    const KEYS: &'static [&'static str] = &[
        "seed",
        "count",
        "shape",
        "noise_sigma",
        "illuminant_gains",
        "background",
        "width",
        "height",
        "colors",
        "stripe_fractions",
        "min_separation",
    ];

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_value(key, value)?,
            "count" => self.count = parse_value(key, value)?,
            "shape" => self.shape = value.parse()?,
            "noise_sigma" => self.noise_sigma = parse_value(key, value)?,
            "illuminant_gains" => {
                self.illuminant_gains = match value {
                    "none" | "" => None,
                    v => Some(parse_triple(key, v)?),
                }
            }
            "background" => self.background = RgbU8::from(parse_triple::<u8>(key, value)?),
            "width" => self.width = parse_value(key, value)?,
            "height" => self.height = parse_value(key, value)?,
            "colors" => {
                self.colors = match value {
                    "random" | "" => None,
                    v => Some(
                        v.split(';')
                            .map(|c| parse_triple::<u8>(key, c).map(RgbU8::from))
                            .collect::<Result<_>>()?,
                    ),
                }
            }
            "stripe_fractions" => {
                self.stripe_fractions = match value {
                    "random" | "" => None,
                    v => Some(v.split(',').map(|f| parse_value(key, f.trim())).collect::<Result<_>>()?),
                }
            }
            "min_separation" => self.min_separation = parse_value(key, value)?,
            _ => return Err(unknown_key(key, Self::KEYS)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.count == 0 {
            return fail("count must be positive".into());
        }
        if let Shape::Stripes(n) = self.shape {
            if !(2..=3).contains(&n) {
                return fail(format!("stripes need 2 or 3 colors, got {n}"));
            }
        }
        if !(0.0..=30.0).contains(&self.noise_sigma) {
            return fail(format!("noise_sigma must lie in [0, 30], got {}", self.noise_sigma));
        }
        if let Some(g) = self.illuminant_gains {
            Illuminant::new(g).map_err(|e| Error::Config(e.to_string()))?;
        }
        if self.width < 16 || self.height < 16 {
            return fail("images must be at least 16x16".into());
        }
        let n = self.shape.color_count();
        if let Some(c) = &self.colors {
            if c.len() != n {
                return fail(format!("shape {} needs {n} colors, got {}", self.shape, c.len()));
            }
        }
        if let Some(f) = &self.stripe_fractions {
            if f.len() != n || f.iter().any(|v| v.is_nan() || *v <= 0.0) {
                return fail(format!("stripe_fractions needs {n} positive values"));
            }
        }
        if !(self.min_separation >= 0.0 && self.min_separation < 60.0) {
            return fail("min_separation must lie in [0, 60)".into());
        }
        Ok(())
    }
}

/// One rendered item, before anything touches the disk.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub image: Image,
    /// 255 inside the garment, 0 elsewhere.
    pub mask: Vec<u8>,
    pub category: String,
    /// Ground truth in decreasing area order, before cast and noise.
    pub colors: Vec<RgbU8>,
    pub illuminant: Option<Illuminant>,
}

fn item_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer over the combined value
    let mut z = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn random_color(rng: &mut ChaCha8Rng) -> RgbU8 {
    RgbU8::new(rng.random(), rng.random(), rng.random())
}

fn random_colors(rng: &mut ChaCha8Rng, n: usize, min_sep: f64) -> Vec<RgbU8> {
    let mut colors: Vec<RgbU8> = Vec::with_capacity(n);
    while colors.len() < n {
        let c = random_color(rng);
        if colors.iter().all(|&o| delta_e_rgb(o, c) >= min_sep) {
            colors.push(c);
        }
    }
    colors
}

fn random_fractions(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    match n {
        2 => {
            let a = rng.random_range(0.55..0.7);
            vec![a, 1.0 - a]
        }
        _ => {
            let a = rng.random_range(0.45..0.55);
            let b = rng.random_range(0.27..0.33);
            vec![a, b, 1.0 - a - b]
        }
    }
}

/// Renders item `index` of `spec` in memory.
pub fn render_item(spec: &SynthSpec, index: usize) -> Result<SynthItem> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(item_seed(spec.seed, index));
    let (w, h) = (spec.width as f64, spec.height as f64);
    let n_colors = spec.shape.color_count();
    let colors = match &spec.colors {
        Some(c) => c.clone(),
        None if n_colors == 1 => vec![random_color(&mut rng)],
        None => random_colors(&mut rng, n_colors, spec.min_separation),
    };
    let fractions = match (&spec.stripe_fractions, spec.shape) {
        (Some(f), _) => {
            let total: f64 = f.iter().sum();
            f.iter().map(|v| v / total).collect()
        }
        (None, Shape::Stripes(n)) => random_fractions(&mut rng, n),
        (None, _) => vec![1.0],
    };
    let category = CATEGORIES[rng.random_range(0..CATEGORIES.len())].to_string();

    let cx = w / 2.0 + rng.random_range(-0.05..0.05) * w;
    let cy = h / 2.0 + rng.random_range(-0.05..0.05) * h;
    let (rx, ry) = match spec.shape {
        Shape::Ellipse => (rng.random_range(0.18..0.28) * w, rng.random_range(0.25..0.35) * h),
        _ => (rng.random_range(0.15..0.25) * w, rng.random_range(0.22..0.32) * h),
    };
    // A whole number of roughly 20 px periods keeps band areas near their fractions.
    let stripe_period = 2.0 * rx / (2.0 * rx / 20.0).round().max(1.0);
    let bounds: Vec<f64> = fractions
        .iter()
        .scan(0.0, |acc, f| {
            *acc += f;
            Some(*acc)
        })
        .collect();

    // Color index per pixel, or None for background.
    let region = |x: u32, y: u32| -> Option<usize> {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let inside = match spec.shape {
            Shape::Ellipse => ((px - cx) / rx).powi(2) + ((py - cy) / ry).powi(2) <= 1.0,
            _ => (px - cx).abs() <= rx && (py - cy).abs() <= ry,
        };
        if !inside {
            return None;
        }
        if n_colors == 1 {
            return Some(0);
        }
        let phase = ((px - (cx - rx)) / stripe_period).rem_euclid(1.0);
        Some(bounds.iter().position(|&b| phase < b).unwrap_or(n_colors - 1))
    };

    let gains = spec.illuminant_gains.unwrap_or([1.0; 3]);
    let noise = Normal::new(0.0, spec.noise_sigma.max(0.0)).expect("finite sigma");
    let mut mask = Vec::with_capacity((spec.width * spec.height) as usize);
    let mut area = vec![0usize; n_colors];
    let mut pixels = Vec::with_capacity(mask.capacity());
    for y in 0..spec.height {
        for x in 0..spec.width {
            let region = region(x, y);
            let base = match region {
                Some(i) => {
                    area[i] += 1;
                    colors[i]
                }
                None => spec.background,
            };
            mask.push(if region.is_some() { 255 } else { 0 });
            let mut c = base.to_f64();
            for (v, g) in c.iter_mut().zip(gains) {
                *v *= g;
                if spec.noise_sigma > 0.0 {
                    *v += noise.sample(&mut rng);
                }
            }
            pixels.push(RgbU8::from_f64_clamped(c));
        }
    }

    let mut order: Vec<usize> = (0..n_colors).collect();
    order.sort_by(|&a, &b| area[b].cmp(&area[a]).then(a.cmp(&b)));
    if area.contains(&0) {
        return Err(Error::Validation("a garment color covers no pixels".into()));
    }
    Ok(SynthItem {
        image: Image::new(spec.width, spec.height, pixels)?,
        mask,
        category,
        colors: order.iter().map(|&i| colors[i]).collect(),
        illuminant: spec.illuminant_gains.map(Illuminant::new).transpose()?,
    })
}

pub const ANNOTATIONS_FILE: &str = "annotations.jsonl";

/// Renders `spec.count` items into `out_dir` (PNG image, PNG mask and one
/// `annotations.jsonl`). Output is byte-identical for identical specs.
pub fn synth_generate(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<Vec<Annotation>> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut annotations = Vec::with_capacity(spec.count);
    for i in 0..spec.count {
        let item = render_item(spec, i)?;
        let image_name = format!("item_{i:04}.png");
        let mask_name = format!("item_{i:04}_mask.png");
        item.image.save_png(out_dir.join(&image_name))?;
        image::save_gray_png(out_dir.join(&mask_name), spec.width, spec.height, item.mask)?;
        annotations.push(Annotation {
            image_path: image_name,
            mask_path: Some(mask_name),
            category: item.category,
            colors: item.colors,
            illuminant: item.illuminant,
        });
    }
    write_annotations(&annotations, out_dir.join(ANNOTATIONS_FILE))?;
    Ok(annotations)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_line() {
        let anns = parse_annotations(r#"{"image":"a.png","category":"top","colors":[[134,71,71]]}"#, "t").unwrap();
        assert_eq!(anns.len(), 1);
        assert_eq!(anns[0].colors, vec![RgbU8::new(134, 71, 71)]);
        assert_eq!(anns[0].mask_path, None);
        assert_eq!(anns[0].illuminant, None);
    }

    #[test]
    fn rejects_bad_lines_with_line_numbers() {
        let four = r#"{"image":"a.png","category":"top","colors":[[1,2,3],[4,5,6],[7,8,9],[10,11,12]]}"#;
        let ok = r#"{"image":"a.png","category":"top","colors":[[1,2,3]]}"#;
        let err = parse_annotations(&format!("{ok}\n{four}\n"), "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");

        let err = parse_annotations(&format!("{ok}\n\n{{not json\n"), "t").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");

        let unknown = r#"{"image":"a.png","category":"top","colors":[[1,2,3]],"extra":1}"#;
        assert!(parse_annotations(unknown, "t").is_err());
        let empty = r#"{"image":"a.png","category":"top","colors":[]}"#;
        assert!(parse_annotations(empty, "t").is_err());
    }

    #[test]
    fn flat_render_is_exact() {
        let spec = SynthSpec {
            count: 1,
            colors: Some(vec![RgbU8::new(10, 200, 30)]),
            ..SynthSpec::default()
        };
        let item = render_item(&spec, 0).unwrap();
        let fg: Vec<_> = item
            .image
            .pixels()
            .iter()
            .zip(&item.mask)
            .filter(|(_, &m)| m > 0)
            .map(|(p, _)| *p)
            .collect();
        assert!(!fg.is_empty());
        assert!(fg.iter().all(|&p| p == RgbU8::new(10, 200, 30)));
        assert_eq!(item.colors, vec![RgbU8::new(10, 200, 30)]);
    }

    #[test]
    fn cast_multiplies_channels() {
        let spec = SynthSpec {
            count: 1,
            colors: Some(vec![RgbU8::new(200, 200, 200)]),
            illuminant_gains: Some([1.0, 0.5, 0.25]),
            ..SynthSpec::default()
        };
        let item = render_item(&spec, 0).unwrap();
        for (p, &m) in item.image.pixels().iter().zip(&item.mask) {
            if m > 0 {
                assert_eq!(*p, RgbU8::new(200, 100, 50));
            }
        }
        assert_eq!(item.colors, vec![RgbU8::new(200, 200, 200)]);
    }

    #[test]
    fn stripes_order_by_area() {
        let spec = SynthSpec {
            count: 1,
            shape: Shape::Stripes(3),
            stripe_fractions: Some(vec![0.2, 0.5, 0.3]),
            colors: Some(vec![RgbU8::new(255, 0, 0), RgbU8::WHITE, RgbU8::new(0, 0, 160)]),
            ..SynthSpec::default()
        };
        let item = render_item(&spec, 0).unwrap();
        assert_eq!(item.colors, vec![RgbU8::WHITE, RgbU8::new(0, 0, 160), RgbU8::new(255, 0, 0)]);
    }

    #[test]
    fn spec_validation() {
        let mut s = SynthSpec::default();
        s.apply_overrides(["shape=stripes:4"]).unwrap();
        assert!(s.validate().is_err());
        let mut s = SynthSpec::default();
        s.apply_overrides(["noise_sigma=31"]).unwrap();
        assert!(s.validate().is_err());
        let mut s = SynthSpec::default();
        s.apply_overrides(["illuminant_gains=1,0.5,0.25", "background=10,20,30", "colors=1,2,3"])
            .unwrap();
        assert_eq!(s.illuminant_gains, Some([1.0, 0.5, 0.25]));
        assert_eq!(s.background, RgbU8::new(10, 20, 30));
        s.validate().unwrap();
        assert!(s.apply_overrides(["colour=1,2,3"]).is_err());
    }
}
