//! Contrast normalization and illuminant (color cast) removal.
//!
//! The cast is modeled as one multiplicative gain per channel. It is
//! estimated from image statistics and divided out (Von Kries).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::colorspace::RgbU8;
use crate::error::{Error, Result};
use crate::image::Image;

/// Smallest gain an estimate may produce. An image with no energy in one
/// channel would otherwise yield a zero gain.
pub const MIN_GAIN: f64 = 1.0 / 255.0;

/// Per-channel illuminant gains, normalized so the largest is exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 3]", into = "[f64; 3]")]
pub struct Illuminant {
    gains: [f64; 3],
}

impl Illuminant {
    pub const NEUTRAL: Illuminant = Illuminant {
        gains: [1.0, 1.0, 1.0],
    };

    /// Normalizes `gains` by their maximum. Every gain must be finite and positive.
    pub fn new(gains: [f64; 3]) -> Result<Self> {
        if gains.iter().any(|g| !g.is_finite() || *g <= 0.0) {
            return Err(Error::Validation(format!(
                "illuminant gains must be finite and positive, got {gains:?}"
            )));
        }
        let max = gains.iter().copied().fold(f64::MIN, f64::max);
        Ok(Self {
            gains: gains.map(|g| g / max),
        })
    }

    pub fn gains(&self) -> [f64; 3] {
        self.gains
    }
}

impl TryFrom<[f64; 3]> for Illuminant {
    type Error = Error;

    fn try_from(gains: [f64; 3]) -> Result<Self> {
        Illuminant::new(gains)
    }
}

impl From<Illuminant> for [f64; 3] {
    fn from(ill: Illuminant) -> Self {
        ill.gains
    }
}

/// Statistical illuminant estimators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IlluminantMethod {
    /// Per-channel means.
    GrayWorld,
    /// Per-channel maxima.
    MaxRgb,
    /// Per-channel Minkowski p-norms.
    ShadesOfGray(f64),
}

impl IlluminantMethod {
    pub const DEFAULT_MINKOWSKI_P: f64 = 6.0;
}

impl fmt::Display for IlluminantMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IlluminantMethod::GrayWorld => f.write_str("gray_world"),
            IlluminantMethod::MaxRgb => f.write_str("max_rgb"),
            IlluminantMethod::ShadesOfGray(p) => write!(f, "shades_of_gray:{p}"),
        }
    }
}

impl FromStr for IlluminantMethod {
    type Err = Error;

    /// Accepts `gray_world`, `max_rgb`, `shades_of_gray` or `shades_of_gray:<p>`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = match s.split_once(':') {
            Some((h, a)) => (h, Some(a)),
            None => (s, None),
        };
        match (head, arg) {
            ("gray_world", None) => Ok(IlluminantMethod::GrayWorld),
            ("max_rgb", None) => Ok(IlluminantMethod::MaxRgb),
            ("shades_of_gray", None) => Ok(IlluminantMethod::ShadesOfGray(Self::DEFAULT_MINKOWSKI_P)),
            ("shades_of_gray", Some(p)) => {
                let p: f64 = p
                    .parse()
                    .map_err(|_| Error::Config(format!("bad Minkowski exponent {p:?}")))?;
                if !(p.is_finite() && p >= 1.0) {
                    return Err(Error::Config(format!("Minkowski exponent must be >= 1, got {p}")));
                }
                Ok(IlluminantMethod::ShadesOfGray(p))
            }
            _ => Err(Error::Config(format!("unknown illuminant estimator {s:?}"))),
        }
    }
}

/// Brightness used to locate the stretch bounds: the largest channel value.
fn brightness(p: RgbU8) -> u8 {
    p.r.max(p.g).max(p.b)
}

/// Global contrast stretch with one affine map shared by all channels.
///
/// The `clip_percentile` and `100 - clip_percentile` percentiles of pixel
/// brightness go to 0 and 255. Degenerate ranges return the image unchanged.
pub fn histogram_stretch(img: &Image, clip_percentile: f64) -> Image {
    assert!(
        (0.0..50.0).contains(&clip_percentile),
        "clip_percentile must lie in [0, 50)"
    );
    let mut counts = [0usize; 256];
    for &p in img.pixels() {
        counts[brightness(p) as usize] += 1;
    }
    let n = img.len();
    let lo = percentile_from_counts(&counts, n, clip_percentile);
    let hi = percentile_from_counts(&counts, n, 100.0 - clip_percentile);
    if hi <= lo {
        return img.clone();
    }
    let (lo, hi) = (lo as f64, hi as f64);
    let scale = 255.0 / (hi - lo);
    let mut lut = [0u8; 256];
    for (v, slot) in lut.iter_mut().enumerate() {
        *slot = ((v as f64 - lo) * scale).round().clamp(0.0, 255.0) as u8;
    }
    img.map_pixels(|p| RgbU8::new(lut[p.r as usize], lut[p.g as usize], lut[p.b as usize]))
}

/// Nearest-rank percentile over a 256-bin histogram.
fn percentile_from_counts(counts: &[usize; 256], n: usize, pct: f64) -> u8 {
    let rank = ((pct / 100.0) * (n - 1) as f64).round() as usize;
    let mut seen = 0;
    for (v, &c) in counts.iter().enumerate() {
        seen += c;
        if seen > rank {
            return v as u8;
        }
    }
    255
}

pub fn estimate_illuminant(img: &Image, method: IlluminantMethod) -> Result<Illuminant> {
    let n = img.len() as f64;
    let raw: [f64; 3] = match method {
        IlluminantMethod::GrayWorld => {
            let mut sum = [0.0; 3];
            for p in img.pixels() {
                for (s, v) in sum.iter_mut().zip(p.to_f64()) {
                    *s += v;
                }
            }
            sum.map(|s| s / n)
        }
        IlluminantMethod::MaxRgb => {
            let mut max = [0.0f64; 3];
            for p in img.pixels() {
                for (m, v) in max.iter_mut().zip(p.to_f64()) {
                    *m = m.max(v);
                }
            }
            max
        }
        IlluminantMethod::ShadesOfGray(p) => {
            // Work in [0, 1] so large exponents stay finite.
            let mut sum = [0.0; 3];
            for px in img.pixels() {
                for (s, v) in sum.iter_mut().zip(px.to_f64()) {
                    *s += (v / 255.0).powf(p);
                }
            }
            sum.map(|s| (s / n).powf(1.0 / p))
        }
    };
    let max = raw.iter().copied().fold(0.0, f64::max);
    if max <= 0.0 {
        return Err(Error::NoIlluminantEvidence);
    }
    Illuminant::new(raw.map(|v| (v / max).max(MIN_GAIN)))
}

/// Divides every channel by its gain, clamping at 255.
pub fn von_kries_correct(img: &Image, ill: &Illuminant) -> Image {
    let luts = ill.gains().map(|g| {
        let mut lut = [0u8; 256];
        for (v, slot) in lut.iter_mut().enumerate() {
            *slot = (v as f64 / g).round().min(255.0) as u8;
        }
        lut
    });
    img.map_pixels(|p| {
        RgbU8::new(
            luts[0][p.r as usize],
            luts[1][p.g as usize],
            luts[2][p.b as usize],
        )
    })
}
