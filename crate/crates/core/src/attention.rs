//! Per-pixel attention maps: object attention (where the garment is),
//! colorname attention (which pixels look like a given named color) and
//! their normalized product.
//!
//! Colorname attention for a reference color `c` and temperature `t` is
//!
//! ```text
//! w(p) ∝ exp(-|rgb(p) - c|² / (127.5² · t))
//! ```
//!
//! where `|·|²` sums squared differences over the three 8-bit channels.
//! A larger `t` flattens the map; a smaller one sharpens it.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::colorspace::RgbU8;
use crate::error::{Error, Result};
use crate::image::{self, Image};

/// Per-channel scale of the colorname-attention exponent.
pub const RGB_HALF_RANGE: f64 = 127.5;

/// Search interval and iteration budget for the adaptive temperature.
pub const TEMPERATURE_MIN: f64 = 1e-3;
pub const TEMPERATURE_MAX: f64 = 1e3;
pub const BISECTION_STEPS: usize = 60;

/// Nonnegative per-pixel weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    width: u32,
    height: u32,
    w: Vec<f64>,
}

impl AttentionMap {
    /// Normalizes raw nonnegative weights. An all-zero input is an
    /// [`Error::EmptyObjectRegion`].
    pub fn from_weights(width: u32, height: u32, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != width as usize * height as usize {
            return Err(Error::Validation(format!(
                "{} weights for a {width}x{height} map",
                raw.len()
            )));
        }
        if raw.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Validation("attention weights must be finite and nonnegative".into()));
        }
        let total: f64 = raw.iter().sum();
        if total <= 0.0 {
            return Err(Error::EmptyObjectRegion);
        }
        Ok(Self {
            width,
            height,
            w: raw.into_iter().map(|v| v / total).collect(),
        })
    }

    pub fn uniform(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        assert!(n > 0, "empty map");
        Self {
            width,
            height,
            w: vec![1.0 / n as f64; n],
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.w[(y * self.width + x) as usize]
    }

    /// Number of pixels with positive weight.
    pub fn support_len(&self) -> usize {
        self.w.iter().filter(|&&v| v > 0.0).count()
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .w
            .iter()
            .filter(|&&v| v > 0.0)
            .map(|&v| v * v.ln())
            .sum::<f64>()
    }

    /// `exp(entropy)`: the equivalent number of uniformly weighted pixels.
    pub fn effective_support(&self) -> f64 {
        self.entropy().exp()
    }

    /// Writes the map as a grayscale PNG scaled so the peak is white.
    pub fn save_heatmap(&self, path: impl AsRef<Path>) -> Result<()> {
        let peak = self.w.iter().copied().fold(0.0, f64::max);
        let values = self
            .w
            .iter()
            .map(|&v| (v / peak * 255.0).round() as u8)
            .collect();
        image::save_gray_png(path, self.width, self.height, values)
    }
}

/// Where object attention comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MaskSource {
    /// 8-bit grayscale PNG; nonzero is foreground, graded values are soft weights.
    File(std::path::PathBuf),
    /// Isotropic Gaussian centered on the image.
    CenterPrior,
}

pub fn object_attention(img: &Image, source: &MaskSource) -> Result<AttentionMap> {
    match source {
        MaskSource::File(path) => {
            let (w, h, values) = image::load_gray(path)?;
            mask_attention(img, w, h, &values)
        }
        MaskSource::CenterPrior => Ok(center_prior(img.width(), img.height())),
    }
}

/// Object attention from in-memory grayscale mask values.
pub fn mask_attention(img: &Image, width: u32, height: u32, values: &[u8]) -> Result<AttentionMap> {
    if (width, height) != img.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            actual: (width, height),
        });
    }
    AttentionMap::from_weights(width, height, values.iter().map(|&v| v as f64).collect())
}

/// Gaussian with σ = 0.25 · min(width, height), centered on the image.
pub fn center_prior(width: u32, height: u32) -> AttentionMap {
    let sigma = 0.25 * width.min(height) as f64;
    let cx = (width as f64 - 1.0) / 2.0;
    let cy = (height as f64 - 1.0) / 2.0;
    let mut raw = Vec::with_capacity(width as usize * height as usize);
    for y in 0..height {
        for x in 0..width {
            let r2 = (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2);
            raw.push((-r2 / (2.0 * sigma * sigma)).exp());
        }
    }
    AttentionMap::from_weights(width, height, raw).expect("gaussian prior is positive")
}

/// Unnormalized colorname weight for a squared RGB distance.
pub fn colorname_weight(dist2: f64, t: f64) -> f64 {
    (-dist2 / (RGB_HALF_RANGE * RGB_HALF_RANGE * t)).exp()
}

fn check_temperature(t: f64) {
    assert!(t.is_finite() && t > 0.0, "temperature must be positive, got {t}");
}

pub fn colorname_attention(img: &Image, c: RgbU8, t: f64) -> AttentionMap {
    check_temperature(t);
    let d2: Vec<f64> = img.pixels().iter().map(|p| p.dist2(c)).collect();
    // Shifting by the smallest distance keeps the peak at exp(0) and avoids
    // underflow at low temperature; normalization cancels the shift.
    let min = d2.iter().copied().fold(f64::INFINITY, f64::min);
    let raw = d2.into_iter().map(|d| colorname_weight(d - min, t)).collect();
    AttentionMap::from_weights(img.width(), img.height(), raw).expect("peak weight is one")
}

/// Normalized elementwise product.
pub fn combine(obj: &AttentionMap, ca: &AttentionMap) -> Result<AttentionMap> {
    if obj.dims() != ca.dims() {
        return Err(Error::DimensionMismatch {
            expected: obj.dims(),
            actual: ca.dims(),
        });
    }
    let raw = obj.w.iter().zip(&ca.w).map(|(a, b)| a * b).collect();
    AttentionMap::from_weights(obj.width, obj.height, raw).map_err(|e| match e {
        Error::EmptyObjectRegion => Error::DisjointAttentions,
        other => other,
    })
}

/// `combine(obj, colorname_attention(img, c, t))`, evaluated in a shifted
/// log domain so that pixels inside the object never all underflow.
pub fn combined_colorname_attention(
    img: &Image,
    c: RgbU8,
    t: f64,
    obj: &AttentionMap,
) -> Result<AttentionMap> {
    check_temperature(t);
    let field = DistanceField::new(img, c, obj)?;
    let raw = field.weights(t);
    AttentionMap::from_weights(obj.width, obj.height, raw).map_err(|_| Error::DisjointAttentions)
}

/// Squared distances to one reference color, restricted to the object support.
struct DistanceField<'a> {
    obj: &'a AttentionMap,
    d2: Vec<f64>,
    min: f64,
}

impl<'a> DistanceField<'a> {
    fn new(img: &Image, c: RgbU8, obj: &'a AttentionMap) -> Result<Self> {
        if obj.dims() != img.dims() {
            return Err(Error::DimensionMismatch {
                expected: img.dims(),
                actual: obj.dims(),
            });
        }
        let d2: Vec<f64> = img.pixels().iter().map(|p| p.dist2(c)).collect();
        let min = d2
            .iter()
            .zip(&obj.w)
            .filter(|(_, &o)| o > 0.0)
            .map(|(&d, _)| d)
            .fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return Err(Error::DisjointAttentions);
        }
        Ok(Self { obj, d2, min })
    }

    fn weights(&self, t: f64) -> Vec<f64> {
        self.d2
            .iter()
            .zip(&self.obj.w)
            .map(|(&d, &o)| if o > 0.0 { o * colorname_weight(d - self.min, t) } else { 0.0 })
            .collect()
    }

    /// Effective support of the combined map at temperature `t`.
    fn effective_support(&self, t: f64) -> f64 {
        let scale = 1.0 / (RGB_HALF_RANGE * RGB_HALF_RANGE * t);
        let mut total = 0.0;
        let mut weighted_log = 0.0;
        for (&d, &o) in self.d2.iter().zip(&self.obj.w) {
            if o <= 0.0 {
                continue;
            }
            let log_u = o.ln() - (d - self.min) * scale;
            let u = log_u.exp();
            if u > 0.0 {
                total += u;
                weighted_log += u * log_u;
            }
        }
        (total.ln() - weighted_log / total).exp()
    }
}

/// How the colorname-attention temperature is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TemperatureSpec {
    Fixed(f64),
    /// Pick `t` so the combined map's effective support is this fraction
    /// of the object attention's effective support.
    Adaptive { target_fraction: f64 },
}

impl TemperatureSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            TemperatureSpec::Fixed(t) if t.is_finite() && t > 0.0 => Ok(()),
            TemperatureSpec::Fixed(t) => Err(Error::Config(format!("temperature must be positive, got {t}"))),
            TemperatureSpec::Adaptive { target_fraction: f } if f > 0.0 && f < 1.0 => Ok(()),
            TemperatureSpec::Adaptive { target_fraction: f } => {
                Err(Error::Config(format!("target fraction must lie in (0, 1), got {f}")))
            }
        }
    }
}

impl fmt::Display for TemperatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TemperatureSpec::Fixed(t) => write!(f, "fixed:{t}"),
            TemperatureSpec::Adaptive { target_fraction } => write!(f, "adaptive:{target_fraction}"),
        }
    }
}

impl FromStr for TemperatureSpec {
    type Err = Error;

    /// `fixed:<t>` or `adaptive:<target_fraction>`.
    fn from_str(s: &str) -> Result<Self> {
        let (mode, value) = s
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("temperature must be fixed:<t> or adaptive:<f>, got {s:?}")))?;
        let v: f64 = value
            .parse()
            .map_err(|_| Error::Config(format!("bad temperature value {value:?}")))?;
        let spec = match mode {
            "fixed" => TemperatureSpec::Fixed(v),
            "adaptive" => TemperatureSpec::Adaptive { target_fraction: v },
            _ => return Err(Error::Config(format!("unknown temperature mode {mode:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperatureSolution {
    pub t: f64,
    /// Set when the effective support does not respond to `t`.
    pub degenerate: bool,
}

pub fn solve_temperature(
    img: &Image,
    c: RgbU8,
    obj: &AttentionMap,
    spec: TemperatureSpec,
) -> Result<TemperatureSolution> {
    spec.validate()?;
    let target_fraction = match spec {
        TemperatureSpec::Fixed(t) => return Ok(TemperatureSolution { t, degenerate: false }),
        TemperatureSpec::Adaptive { target_fraction } => target_fraction,
    };
    let field = DistanceField::new(img, c, obj)?;
    let target = target_fraction * obj.effective_support();

    let (mut lo, mut hi) = (TEMPERATURE_MIN.ln(), TEMPERATURE_MAX.ln());
    let support = |log_t: f64| field.effective_support(log_t.exp());
    let (s_lo, s_hi) = (support(lo), support(hi));
    if (s_hi - s_lo).abs() <= 1e-9 * obj.effective_support() {
        return Ok(TemperatureSolution {
            t: ((lo + hi) / 2.0).exp(),
            degenerate: true,
        });
    }
    if target <= s_lo {
        return Ok(TemperatureSolution { t: TEMPERATURE_MIN, degenerate: false });
    }
    if target >= s_hi {
        return Ok(TemperatureSolution { t: TEMPERATURE_MAX, degenerate: false });
    }
    let (mut f_lo, mut f_hi) = (s_lo, s_hi);
    for _ in 0..BISECTION_STEPS {
        let mid = (lo + hi) / 2.0;
        let f_mid = support(mid);
        if f_mid < target {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let log_t = if (f_lo - target).abs() <= (f_hi - target).abs() { lo } else { hi };
    Ok(TemperatureSolution {
        t: log_t.exp(),
        degenerate: false,
    })
}
