//! Preview image: one horizontal bar per predicted color, in rank order,
//! with width proportional to mass.

use huepool::{ColorPrediction, Image, RgbU8};

const WIDTH: u32 = 256;
const BAR_HEIGHT: u32 = 32;

pub fn render(preds: &[ColorPrediction]) -> Image {
    let rows = preds.len().max(1) as u32;
    let max_mass = preds.iter().map(|p| p.mass).fold(0.0f64, f64::max);
    Image::from_fn(WIDTH, rows * BAR_HEIGHT, |x, y| {
        let Some(p) = preds.get((y / BAR_HEIGHT) as usize) else {
            return RgbU8::WHITE;
        };
        let len = if max_mass > 0.0 {
            (p.mass / max_mass * WIDTH as f64).round().max(1.0) as u32
        } else {
            WIDTH
        };
        if x < len {
            p.rgb
        } else {
            RgbU8::WHITE
        }
    })
}
