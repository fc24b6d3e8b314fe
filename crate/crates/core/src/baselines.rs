//! Reference methods the attention pipeline is compared against: pixel
//! clustering and plain color-name lookup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::attention::AttentionMap;
use crate::colorspace::{lab_to_rgb, rgb_to_lab, Lab};
use crate::config::{parse_value, unknown_key, KeyValueConfig};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::palette::{name_histogram, Palette};
use crate::pipeline::ColorPrediction;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Convergence threshold on the largest centroid move, in Lab units.
    pub tol: f64,
    /// Independent seedings; the lowest final objective wins.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 3,
            max_iters: 100,
            seed: 0,
            tol: 1e-4,
            restarts: 20,
        }
    }
}

impl KeyValueConfig for KMeansConfig {
    const KEYS: &'static [&'static str] = &["k", "max_iters", "seed", "tol", "restarts"];

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "k" => self.k = parse_value(key, value)?,
            "max_iters" => self.max_iters = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "tol" => self.tol = parse_value(key, value)?,
            "restarts" => self.restarts = parse_value(key, value)?,
            _ => return Err(unknown_key(key, Self::KEYS)),
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if self.max_iters < 1 || self.restarts < 1 {
            return Err(Error::Config("max_iters and restarts must be at least 1".into()));
        }
        if self.tol.is_nan() || self.tol < 0.0 {
            return Err(Error::Config(format!("tol must be nonnegative, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centroids: Vec<Lab>,
    pub assignments: Vec<usize>,
    pub counts: Vec<usize>,
    /// Sum of squared Lab distances to the assigned centroid.
    pub objective: f64,
    /// Objective after each assignment step of the winning run.
    pub history: Vec<f64>,
}

fn dist2(a: &Lab, b: &Lab) -> f64 {
    (a.l - b.l).powi(2) + (a.a - b.a).powi(2) + (a.b - b.b).powi(2)
}

fn nearest(p: &Lab, centroids: &[Lab]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn plus_plus_seed(points: &[Lab], k: usize, rng: &mut ChaCha8Rng) -> Vec<Lab> {
    let mut centroids = vec![points[rng.random_range(0..points.len())]];
    let mut d2: Vec<f64> = points.iter().map(|p| dist2(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let idx = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[idx];
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(dist2(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn lloyd(points: &[Lab], mut centroids: Vec<Lab>, cfg: &KMeansConfig) -> KMeansResult {
    let k = centroids.len();
    let mut assignments = vec![0; points.len()];
    let mut history = Vec::new();
    for _ in 0..cfg.max_iters {
        let mut objective = 0.0;
        for (slot, p) in assignments.iter_mut().zip(points) {
            let (i, d) = nearest(p, &centroids);
            *slot = i;
            objective += d;
        }
        history.push(objective);

        let (sums, counts) = means(points, &assignments, k);
        let mut shift = 0.0f64;
        for ((c, s), &n) in centroids.iter_mut().zip(&sums).zip(&counts) {
            if n == 0 {
                continue;
            }
            let next = Lab::new(s[0] / n as f64, s[1] / n as f64, s[2] / n as f64);
            shift = shift.max(dist2(c, &next).sqrt());
            *c = next;
        }
        if shift <= cfg.tol {
            break;
        }
    }
    for (slot, p) in assignments.iter_mut().zip(points) {
        *slot = nearest(p, &centroids).0;
    }
    hartigan_refine(points, &mut assignments, &mut centroids, cfg.max_iters);
    let mut objective = 0.0;
    let mut counts = vec![0usize; k];
    for (slot, p) in assignments.iter_mut().zip(points) {
        let (i, d) = nearest(p, &centroids);
        *slot = i;
        counts[i] += 1;
        objective += d;
    }
    history.push(objective);
    KMeansResult {
        centroids,
        assignments,
        counts,
        objective,
        history,
    }
}

fn means(points: &[Lab], assignments: &[usize], k: usize) -> (Vec<[f64; 3]>, Vec<usize>) {
    let mut sums = vec![[0.0f64; 3]; k];
    let mut counts = vec![0usize; k];
    for (&a, p) in assignments.iter().zip(points) {
        sums[a][0] += p.l;
        sums[a][1] += p.a;
        sums[a][2] += p.b;
        counts[a] += 1;
    }
    (sums, counts)
}

/// Single-point moves that lower the objective once centroid shifts are
/// accounted for. Lloyd stops at any partition where every point is nearest
/// its own centroid; this escapes many of those that are still not optimal.
fn hartigan_refine(points: &[Lab], assignments: &mut [usize], centroids: &mut [Lab], max_sweeps: usize) {
    let k = centroids.len();
    let (mut sums, mut counts) = means(points, assignments, k);
    let centroid = |s: &[f64; 3], n: usize| Lab::new(s[0] / n as f64, s[1] / n as f64, s[2] / n as f64);
    for (c, (s, &n)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
        if n > 0 {
            *c = centroid(s, n);
        }
    }
    for _ in 0..max_sweeps {
        let mut moved = false;
        for (i, p) in points.iter().enumerate() {
            let from = assignments[i];
            let n_from = counts[from];
            if n_from <= 1 {
                continue;
            }
            let leave = n_from as f64 / (n_from - 1) as f64 * dist2(p, &centroids[from]);
            let mut best = (from, 0.0);
            for to in (0..k).filter(|&to| to != from && counts[to] > 0) {
                let n_to = counts[to] as f64;
                let gain = n_to / (n_to + 1.0) * dist2(p, &centroids[to]) - leave;
                // Relative slack keeps rounding noise from cycling points.
                if gain < best.1 - 1e-12 * leave {
                    best = (to, gain);
                }
            }
            let to = best.0;
            if to != from {
                for (j, v) in [p.l, p.a, p.b].into_iter().enumerate() {
                    sums[from][j] -= v;
                    sums[to][j] += v;
                }
                counts[from] -= 1;
                counts[to] += 1;
                centroids[from] = centroid(&sums[from], counts[from]);
                centroids[to] = centroid(&sums[to], counts[to]);
                assignments[i] = to;
                moved = true;
            }
        }
        if !moved {
            break;
        }
    }
    // Exact means, free of incremental drift.
    let (sums, counts) = means(points, assignments, k);
    for (c, (s, &n)) in centroids.iter_mut().zip(sums.iter().zip(&counts)) {
        if n > 0 {
            *c = centroid(s, n);
        }
    }
}

/// Lloyd's algorithm with k-means++ seeding and a final single-point
/// refinement, best of `cfg.restarts` runs.
pub fn kmeans_lab(points: &[Lab], cfg: &KMeansConfig) -> Result<KMeansResult> {
    cfg.validate()?;
    if points.len() < cfg.k {
        return Err(Error::InsufficientPixels {
            support: points.len(),
            k: cfg.k,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best: Option<KMeansResult> = None;
    for _ in 0..cfg.restarts {
        let seeds = plus_plus_seed(points, cfg.k, &mut rng);
        let run = lloyd(points, seeds, cfg);
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Clusters the Lab values of every pixel with positive mask weight and
/// returns centroids ranked by member count.
pub fn kmeans_palette(img: &Image, mask: &AttentionMap, cfg: &KMeansConfig) -> Result<Vec<ColorPrediction>> {
    if img.dims() != mask.dims() {
        return Err(Error::DimensionMismatch {
            expected: img.dims(),
            actual: mask.dims(),
        });
    }
    let points: Vec<Lab> = img
        .pixels()
        .iter()
        .zip(mask.weights())
        .filter(|(_, &w)| w > 0.0)
        .map(|(&p, _)| rgb_to_lab(p))
        .collect();
    let result = kmeans_lab(&points, cfg)?;
    let mut order: Vec<usize> = (0..cfg.k).filter(|&i| result.counts[i] > 0).collect();
    order.sort_by(|&a, &b| result.counts[b].cmp(&result.counts[a]).then(a.cmp(&b)));
    let n = points.len() as f64;
    Ok(order
        .iter()
        .enumerate()
        .map(|(rank, &i)| ColorPrediction {
            rgb: lab_to_rgb(result.centroids[i]),
            name: format!("cluster{i}"),
            mass: result.counts[i] as f64 / n,
            rank: rank + 1,
        })
        .collect())
}

/// Top-`n` palette names under the object attention, reported at their
/// canonical RGB values.
pub fn colorname_rgb_baseline(img: &Image, obj: &AttentionMap, palette: &Palette, n: usize) -> Vec<ColorPrediction> {
    name_histogram(img, obj, palette)
        .into_iter()
        .take(n)
        .enumerate()
        .map(|(rank, named)| ColorPrediction {
            rgb: named.entry.rgb,
            name: named.entry.name,
            mass: named.mass,
            rank: rank + 1,
        })
        .collect()
}
