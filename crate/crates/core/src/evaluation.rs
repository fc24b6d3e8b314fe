//! Threshold scoring of predicted palettes against annotated ground truth.
//!
//! The main-color score compares each item's rank-1 prediction with its
//! rank-1 ground truth. The multi-color score matches every ground-truth
//! color to a distinct prediction (optimal assignment) and counts each
//! ground-truth color once; a color left without a partner never scores.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::attention::{object_attention, MaskSource};
use crate::baselines::{colorname_rgb_baseline, kmeans_palette, KMeansConfig};
use crate::colorspace::{delta_e_rgb, RgbU8};
use crate::config::KeyValueConfig;
use crate::dataset::{resolve, Annotation};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::palette::Palette;
use crate::pipeline::{extract_multi, ColorPrediction, PipelineConfig};

pub const DEFAULT_THRESHOLDS: [f64; 4] = [10.0, 20.0, 30.0, 40.0];

/// One ground-truth color and the prediction it was paired with.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub gt_index: usize,
    pub pred_index: Option<usize>,
    /// ΔE00, infinite when unmatched.
    pub delta: f64,
}

/// Minimum-total-ΔE00 one-to-one assignment of ground truths to predictions,
/// by exhaustive search. When predictions are fewer, the surplus ground
/// truths stay unmatched. Ties keep the first assignment in lexicographic
/// order of prediction indices.
pub fn match_palettes(preds: &[ColorPrediction], gts: &[RgbU8]) -> Vec<Match> {
    let costs: Vec<Vec<f64>> = gts
        .iter()
        .map(|&g| preds.iter().map(|p| delta_e_rgb(p.rgb, g)).collect())
        .collect();
    let unmatched = gts.len().saturating_sub(preds.len());
    let mut current = Vec::with_capacity(gts.len());
    let mut used = vec![false; preds.len()];
    let mut best: Option<(f64, Vec<Option<usize>>)> = None;
    search(&costs, unmatched, &mut used, &mut current, 0.0, &mut best);
    let (_, assignment) = best.expect("some assignment exists");
    assignment
        .iter()
        .enumerate()
        .map(|(gt_index, &pred_index)| Match {
            gt_index,
            pred_index,
            delta: pred_index.map_or(f64::INFINITY, |p| costs[gt_index][p]),
        })
        .collect()
}

fn search(
    costs: &[Vec<f64>],
    unmatched_left: usize,
    used: &mut [bool],
    current: &mut Vec<Option<usize>>,
    total: f64,
    best: &mut Option<(f64, Vec<Option<usize>>)>,
) {
    let g = current.len();
    if g == costs.len() {
        if best.as_ref().is_none_or(|(b, _)| total < *b) {
            *best = Some((total, current.clone()));
        }
        return;
    }
    for p in 0..used.len() {
        if !used[p] {
            used[p] = true;
            current.push(Some(p));
            search(costs, unmatched_left, used, current, total + costs[g][p], best);
            current.pop();
            used[p] = false;
        }
    }
    if unmatched_left > 0 {
        current.push(None);
        search(costs, unmatched_left - 1, used, current, total, best);
        current.pop();
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreReport {
    pub method: String,
    pub thresholds: Vec<f64>,
    /// Percentage of items whose rank-1 prediction is within each threshold.
    pub main_color: Vec<f64>,
    /// Percentage of ground-truth colors whose matched prediction is within each threshold.
    pub multi_color: Vec<f64>,
    pub n_items: usize,
    pub n_gt_colors: usize,
    pub n_failed: usize,
}

impl ScoreReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<16}", "ΔE00 <")?;
        for t in &self.thresholds {
            write!(f, "{t:>6}")?;
        }
        writeln!(f)?;
        for (label, row) in [("main color", &self.main_color), ("multiple colors", &self.multi_color)] {
            write!(f, "{label:<16}")?;
            for v in row {
                write!(f, "{:>6}", v.round() as i64)?;
            }
            writeln!(f)?;
        }
        write!(
            f,
            "{} items, {} ground-truth colors, {} failed ({})",
            self.n_items, self.n_gt_colors, self.n_failed, self.method
        )
    }
}

/// Matched deltas of one scored item.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemScore {
    pub item: usize,
    /// ΔE00 between the rank-1 prediction and the rank-1 ground truth.
    pub main_delta: f64,
    pub matches: Vec<Match>,
}

pub fn score_item(item: usize, gts: &[RgbU8], preds: &[ColorPrediction]) -> ItemScore {
    let main_delta = match (preds.iter().min_by_key(|p| p.rank), gts.first()) {
        (Some(p), Some(&g)) => delta_e_rgb(p.rgb, g),
        _ => f64::INFINITY,
    };
    ItemScore {
        item,
        main_delta,
        matches: match_palettes(preds, gts),
    }
}

fn percentages(deltas: impl Iterator<Item = f64> + Clone, n: usize, thresholds: &[f64]) -> Vec<f64> {
    thresholds
        .iter()
        .map(|&t| {
            if n == 0 {
                0.0
            } else {
                100.0 * deltas.clone().filter(|&d| d <= t).count() as f64 / n as f64
            }
        })
        .collect()
}

fn check_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() || thresholds.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Validation("thresholds must be finite and nonnegative".into()));
    }
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Validation("thresholds must be strictly increasing".into()));
    }
    Ok(())
}

/// Aggregates already-scored items.
pub fn report_from_scores(method: &str, scores: &[ItemScore], thresholds: &[f64], n_failed: usize) -> Result<ScoreReport> {
    check_thresholds(thresholds)?;
    let n_gt_colors = scores.iter().map(|s| s.matches.len()).sum();
    Ok(ScoreReport {
        method: method.to_string(),
        thresholds: thresholds.to_vec(),
        main_color: percentages(scores.iter().map(|s| s.main_delta), scores.len(), thresholds),
        multi_color: percentages(
            scores.iter().flat_map(|s| s.matches.iter().map(|m| m.delta)),
            n_gt_colors,
            thresholds,
        ),
        n_items: scores.len(),
        n_gt_colors,
        n_failed,
    })
}

/// Scores aligned lists of ground-truth palettes and predicted palettes.
pub fn threshold_score(
    gts: &[Vec<RgbU8>],
    predictions: &[Vec<ColorPrediction>],
    thresholds: &[f64],
) -> Result<ScoreReport> {
    if gts.len() != predictions.len() {
        return Err(Error::Misaligned(format!(
            "{} ground-truth items but {} prediction lists",
            gts.len(),
            predictions.len()
        )));
    }
    let scores: Vec<ItemScore> = gts
        .iter()
        .zip(predictions)
        .enumerate()
        .map(|(i, (g, p))| score_item(i, g, p))
        .collect();
    report_from_scores("predictions", &scores, thresholds, 0)
}

/// How predictions are produced during a benchmark.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Pipeline(PipelineConfig),
    /// `k: None` uses each item's ground-truth color count.
    KMeans { cfg: KMeansConfig, k: Option<usize> },
    /// `n: None` uses each item's ground-truth color count.
    Colorname { n: Option<usize> },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Pipeline(_) => "pipeline",
            Method::KMeans { .. } => "kmeans",
            Method::Colorname { .. } => "colorname",
        }
    }

    /// Predictions for one image given its object attention.
    pub fn predict(
        &self,
        img: &Image,
        obj: &crate::attention::AttentionMap,
        gt_count: usize,
        palette: &Palette,
    ) -> Result<Vec<ColorPrediction>> {
        match self {
            Method::Pipeline(cfg) => extract_multi(img, obj, cfg, palette),
            Method::KMeans { cfg, k } => {
                let cfg = KMeansConfig {
                    k: k.unwrap_or(gt_count),
                    ..cfg.clone()
                };
                kmeans_palette(img, obj, &cfg)
            }
            Method::Colorname { n } => Ok(colorname_rgb_baseline(img, obj, palette, n.unwrap_or(gt_count))),
        }
    }
}

/// Known method names, for command-line parsing.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Pipeline,
    KMeans,
    Colorname,
}

impl FromStr for MethodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pipeline" => Ok(MethodKind::Pipeline),
            "kmeans" => Ok(MethodKind::KMeans),
            "colorname" => Ok(MethodKind::Colorname),
            _ => Err(Error::Config(format!(
                "unknown method {s:?} (expected pipeline, kmeans or colorname)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ItemFailure {
    pub item: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOutcome {
    pub report: ScoreReport,
    pub scores: Vec<ItemScore>,
    pub failures: Vec<ItemFailure>,
}

impl BenchmarkOutcome {
    /// Writes `item,gt_rank,delta` rows; unmatched colors get `inf`.
    pub fn write_item_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let wrap = |e: csv::Error| Error::Encode {
            path: "<item csv>".into(),
            message: e.to_string(),
        };
        out.write_record(["item", "gt_rank", "delta"]).map_err(wrap)?;
        for s in &self.scores {
            for m in &s.matches {
                let delta = if m.delta.is_finite() {
                    format!("{:.6}", m.delta)
                } else {
                    "inf".to_string()
                };
                out.write_record([s.item.to_string(), (m.gt_index + 1).to_string(), delta])
                    .map_err(wrap)?;
            }
        }
        out.flush().map_err(|e| Error::io("<item csv>", e))
    }
}

fn run_item(ann: &Annotation, base_dir: &Path, method: &Method, palette: &Palette) -> Result<Vec<ColorPrediction>> {
    let img = Image::load(resolve(base_dir, &ann.image_path))?;
    let source = match &ann.mask_path {
        Some(m) => MaskSource::File(resolve(base_dir, m)),
        None => MaskSource::CenterPrior,
    };
    let obj = object_attention(&img, &source)?;
    method.predict(&img, &obj, ann.colors.len(), palette)
}

/// Runs `method` on every annotated item and scores the results. Items are
/// processed on the current rayon pool; the outcome does not depend on the
/// pool size. Items that fail are counted and left out of the scores.
pub fn run_benchmark(
    annotations: &[Annotation],
    base_dir: &Path,
    method: &Method,
    palette: &Palette,
    thresholds: &[f64],
) -> Result<BenchmarkOutcome> {
    check_thresholds(thresholds)?;
    if let Method::Pipeline(cfg) = method {
        cfg.validate()?;
    }
    if let Method::KMeans { cfg, .. } = method {
        cfg.validate()?;
    }
    let results: Vec<Result<Vec<ColorPrediction>>> = annotations
        .par_iter()
        .map(|ann| run_item(ann, base_dir, method, palette))
        .collect();
    let mut scores = Vec::new();
    let mut failures = Vec::new();
    for (i, (ann, res)) in annotations.iter().zip(results).enumerate() {
        match res {
            Ok(preds) => scores.push(score_item(i, &ann.colors, &preds)),
            Err(e) => failures.push(ItemFailure {
                item: i,
                message: e.to_string(),
            }),
        }
    }
    let report = report_from_scores(method.name(), &scores, thresholds, failures.len())?;
    Ok(BenchmarkOutcome {
        report,
        scores,
        failures,
    })
}
