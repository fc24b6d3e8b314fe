//! Garment color extraction: discrete color naming refined by attention
//! weighted pooling, with illumination correction, reference baselines,
//! a synthetic dataset generator and ΔE00 threshold scoring.

pub mod attention;
pub mod baselines;
pub mod colorspace;
pub mod config;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod illumination;
pub mod image;
pub mod palette;
pub mod pipeline;

pub use attention::{AttentionMap, MaskSource, TemperatureSpec};
pub use baselines::{KMeansConfig, KMeansResult};
pub use colorspace::{ciede2000, delta_e_rgb, lab_to_rgb, rgb_to_lab, Lab, RgbU8};
pub use config::KeyValueConfig;
pub use dataset::{Annotation, Shape, SynthSpec};
pub use error::{Error, Result};
pub use evaluation::{Method, ScoreReport};
pub use illumination::{Illuminant, IlluminantMethod};
pub use image::Image;
pub use palette::{Palette, PaletteEntry};
pub use pipeline::{ColorPrediction, PipelineConfig};
