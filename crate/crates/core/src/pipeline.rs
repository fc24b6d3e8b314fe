//! Two-stage color extraction.
//!
//! 1. Correct the image (contrast stretch, then illuminant removal).
//! 2. Name the dominant colors with an attention-weighted vote over the palette.
//! 3. For each name, sharpen the object attention with colorname attention
//!    and pool the corrected pixel RGBs under the combined weights.
//!
//! The multi-color path pools several candidate names, suppresses
//! near-duplicate results and keeps as many colors as the mass rule allows.

use serde::{Deserialize, Serialize};

use crate::attention::{combined_colorname_attention, solve_temperature, AttentionMap, TemperatureSpec};
use crate::colorspace::{delta_e_rgb, rgb_to_lab, ciede2000, RgbU8};
use crate::config::{parse_value, unknown_key, KeyValueConfig};
use crate::error::{Error, Result};
use crate::illumination::{estimate_illuminant, histogram_stretch, von_kries_correct, IlluminantMethod};
use crate::image::Image;
use crate::palette::{name_histogram, Palette};

/// One extracted color.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColorPrediction {
    pub rgb: RgbU8,
    pub name: String,
    /// Share of attention mass behind this color, in (0, 1].
    pub mass: f64,
    /// 1-based rank in decreasing mass order.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// `None` disables illuminant correction.
    pub estimator: Option<IlluminantMethod>,
    pub stretch: bool,
    pub clip_percentile: f64,
    pub temperature: TemperatureSpec,
    pub max_colors: usize,
    pub mass_threshold: f64,
    pub nms_delta: f64,
    pub candidate_names: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            estimator: Some(IlluminantMethod::GrayWorld),
            stretch: true,
            clip_percentile: 1.0,
            temperature: TemperatureSpec::Fixed(1.0),
            max_colors: 3,
            mass_threshold: 0.15,
            nms_delta: 12.0,
            candidate_names: 6,
        }
    }
}

impl KeyValueConfig for PipelineConfig {
    const KEYS: &'static [&'static str] = &[
        "estimator",
        "stretch",
        "clip_percentile",
        "temperature",
        "max_colors",
        "mass_threshold",
        "nms_delta",
        "candidate_names",
    ];

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "estimator" => {
                self.estimator = match value {
                    "none" => None,
                    other => Some(other.parse()?),
                }
            }
            "stretch" => self.stretch = parse_value(key, value)?,
            "clip_percentile" => self.clip_percentile = parse_value(key, value)?,
            "temperature" => self.temperature = value.parse()?,
            "max_colors" => self.max_colors = parse_value(key, value)?,
            "mass_threshold" => self.mass_threshold = parse_value(key, value)?,
            "nms_delta" => self.nms_delta = parse_value(key, value)?,
            "candidate_names" => self.candidate_names = parse_value(key, value)?,
            _ => return Err(unknown_key(key, Self::KEYS)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(0.0..50.0).contains(&self.clip_percentile) {
            return fail(format!("clip_percentile must lie in [0, 50), got {}", self.clip_percentile));
        }
        self.temperature.validate()?;
        if self.max_colors < 1 {
            return fail("max_colors must be at least 1".into());
        }
        if !(self.mass_threshold > 0.0 && self.mass_threshold < 1.0) {
            return fail(format!("mass_threshold must lie in (0, 1), got {}", self.mass_threshold));
        }
        if !(self.nms_delta.is_finite() && self.nms_delta > 0.0) {
            return fail(format!("nms_delta must be positive, got {}", self.nms_delta));
        }
        if self.candidate_names < 1 {
            return fail("candidate_names must be at least 1".into());
        }
        Ok(())
    }
}

impl PipelineConfig {
    /// Renders the config in the file format accepted by [`KeyValueConfig::apply_file`].
    pub fn to_toml(&self) -> String {
        let estimator = self.estimator.map_or_else(|| "none".to_string(), |m| m.to_string());
        format!(
            "estimator = \"{estimator}\"\nstretch = {}\nclip_percentile = {:?}\ntemperature = \"{}\"\n\
             max_colors = {}\nmass_threshold = {:?}\nnms_delta = {:?}\ncandidate_names = {}\n",
            self.stretch,
            self.clip_percentile,
            self.temperature,
            self.max_colors,
            self.mass_threshold,
            self.nms_delta,
            self.candidate_names
        )
    }
}

/// Contrast stretch and illuminant removal as configured.
pub fn correct_image(img: &Image, cfg: &PipelineConfig) -> Result<Image> {
    let stretched = if cfg.stretch {
        histogram_stretch(img, cfg.clip_percentile)
    } else {
        img.clone()
    };
    match cfg.estimator {
        Some(method) => {
            let ill = estimate_illuminant(&stretched, method)?;
            Ok(von_kries_correct(&stretched, &ill))
        }
        None => Ok(stretched),
    }
}

/// Attention-weighted mean of pixel RGBs, rounded per channel.
pub fn weighted_pool(img: &Image, weights: &AttentionMap) -> RgbU8 {
    let mut acc = [0.0f64; 3];
    let mut total = 0.0;
    for (p, &w) in img.pixels().iter().zip(weights.weights()) {
        if w > 0.0 {
            for (a, v) in acc.iter_mut().zip(p.to_f64()) {
                *a += w * v;
            }
            total += w;
        }
    }
    RgbU8::from_f64_clamped(acc.map(|a| a / total))
}

/// A pooled candidate together with the attention that produced it.
#[derive(Debug, Clone)]
pub struct PooledCandidate {
    pub prediction: ColorPrediction,
    pub attention: AttentionMap,
    pub temperature: f64,
}

fn pool_candidate(
    corrected: &Image,
    obj: &AttentionMap,
    reference: RgbU8,
    cfg: &PipelineConfig,
) -> Result<(RgbU8, AttentionMap, f64)> {
    let t = solve_temperature(corrected, reference, obj, cfg.temperature)?.t;
    let attention = combined_colorname_attention(corrected, reference, t, obj)?;
    Ok((weighted_pool(corrected, &attention), attention, t))
}

pub fn extract_mono(img: &Image, obj: &AttentionMap, cfg: &PipelineConfig, palette: &Palette) -> Result<ColorPrediction> {
    cfg.validate()?;
    check_dims(img, obj)?;
    let corrected = correct_image(img, cfg)?;
    let hist = name_histogram(&corrected, obj, palette);
    let top = hist.first().ok_or(Error::EmptyObjectRegion)?;
    let (rgb, _, _) = pool_candidate(&corrected, obj, top.entry.rgb, cfg)?;
    Ok(ColorPrediction {
        rgb,
        name: top.entry.name.clone(),
        mass: 1.0,
        rank: 1,
    })
}

pub fn extract_multi(
    img: &Image,
    obj: &AttentionMap,
    cfg: &PipelineConfig,
    palette: &Palette,
) -> Result<Vec<ColorPrediction>> {
    Ok(extract_multi_traced(img, obj, cfg, palette)?
        .into_iter()
        .map(|c| c.prediction)
        .collect())
}

/// [`extract_multi`] that also returns each kept color's combined attention.
pub fn extract_multi_traced(
    img: &Image,
    obj: &AttentionMap,
    cfg: &PipelineConfig,
    palette: &Palette,
) -> Result<Vec<PooledCandidate>> {
    cfg.validate()?;
    check_dims(img, obj)?;
    let corrected = correct_image(img, cfg)?;
    let hist = name_histogram(&corrected, obj, palette);
    if hist.is_empty() {
        return Err(Error::EmptyObjectRegion);
    }

    let mut candidates = Vec::with_capacity(cfg.candidate_names);
    for (i, named) in hist.iter().take(cfg.candidate_names).enumerate() {
        let (rgb, attention, temperature) = pool_candidate(&corrected, obj, named.entry.rgb, cfg)?;
        candidates.push(PooledCandidate {
            prediction: ColorPrediction {
                rgb,
                name: named.entry.name.clone(),
                mass: named.mass,
                rank: i + 1,
            },
            attention,
            temperature,
        });
    }

    // Suppressed candidates hand their mass to the survivor that absorbed
    // them, so a color split across two names still counts once in full.
    let preds: Vec<ColorPrediction> = candidates.iter().map(|c| c.prediction.clone()).collect();
    let owner = nms_assign(&preds, cfg.nms_delta);
    let mut merged = vec![0.0; preds.len()];
    for (i, &o) in owner.iter().enumerate() {
        merged[o] += preds[i].mass;
    }
    let mut survivors: Vec<usize> = (0..preds.len()).filter(|&i| owner[i] == i).collect();
    survivors.sort_by(|&a, &b| merged[b].total_cmp(&merged[a]).then(a.cmp(&b)));

    let masses: Vec<f64> = survivors.iter().map(|&i| merged[i]).collect();
    let count = estimate_color_count(&masses, cfg.mass_threshold, cfg.max_colors);
    survivors.truncate(count);

    let kept_total: f64 = survivors.iter().map(|&i| merged[i]).sum();
    let mut slots: Vec<Option<PooledCandidate>> = candidates.into_iter().map(Some).collect();
    Ok(survivors
        .iter()
        .enumerate()
        .map(|(rank, &i)| {
            let mut c = slots[i].take().expect("survivor indices are unique");
            c.prediction.mass = merged[i] / kept_total;
            c.prediction.rank = rank + 1;
            c
        })
        .collect())
}

fn check_dims(img: &Image, obj: &AttentionMap) -> Result<()> {
    if img.dims() != obj.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            actual: obj.dims(),
        });
    }
    Ok(())
}

/// Number of candidates whose mass reaches `threshold`, clamped to `[1, max_colors]`.
pub fn estimate_color_count(masses: &[f64], threshold: f64, max_colors: usize) -> usize {
    let n = masses.iter().filter(|&&m| m >= threshold).count();
    n.clamp(1, max_colors.max(1))
}

/// Greedy suppression over predictions sorted by descending mass.
///
/// Returns, for each input, the index of the accepted prediction it was
/// absorbed by (itself when accepted).
pub fn nms_assign(preds: &[ColorPrediction], delta: f64) -> Vec<usize> {
    let labs: Vec<_> = preds.iter().map(|p| rgb_to_lab(p.rgb)).collect();
    let mut accepted: Vec<usize> = Vec::new();
    let mut owner = Vec::with_capacity(preds.len());
    for i in 0..preds.len() {
        match accepted.iter().find(|&&a| ciede2000(labs[a], labs[i]) < delta) {
            Some(&a) => owner.push(a),
            None => {
                accepted.push(i);
                owner.push(i);
            }
        }
    }
    owner
}

/// Keeps the highest-mass prediction, drops any later one within `delta`
/// ΔE00 of an accepted one, and re-ranks the survivors 1..n.
pub fn nms_colors(preds: &[ColorPrediction], delta: f64) -> Vec<ColorPrediction> {
    let owner = nms_assign(preds, delta);
    preds
        .iter()
        .enumerate()
        .filter(|&(i, _)| owner[i] == i)
        .enumerate()
        .map(|(rank, (_, p))| ColorPrediction {
            rank: rank + 1,
            ..p.clone()
        })
        .collect()
}

/// Smallest pairwise ΔE00 in a prediction set (infinite below two colors).
pub fn min_pairwise_delta(preds: &[ColorPrediction]) -> f64 {
    let mut best = f64::INFINITY;
    for (i, a) in preds.iter().enumerate() {
        for b in &preds[i + 1..] {
            best = best.min(delta_e_rgb(a.rgb, b.rgb));
        }
    }
    best
}
