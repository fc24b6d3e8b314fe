//! Fixtures shared by the benchmarks.

use huepool::dataset::{render_item, Shape, SynthSpec};
use huepool::{AttentionMap, Image};

/// A striped garment on a light background with its exact object mask.
pub fn striped_fixture(size: u32, seed: u64) -> (Image, AttentionMap) {
    let spec = SynthSpec {
        seed,
        count: 1,
        shape: Shape::Stripes(3),
        noise_sigma: 4.0,
        width: size,
        height: size,
        ..SynthSpec::default()
    };
    let item = render_item(&spec, 0).expect("valid fixture spec");
    let weights = item.mask.iter().map(|&m| m as f64).collect();
    let obj = AttentionMap::from_weights(size, size, weights).expect("nonempty mask");
    (item.image, obj)
}
