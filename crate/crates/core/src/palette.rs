//! Discrete color-name vocabulary and first-stage (rough) color naming.

use std::collections::{HashMap, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use crate::attention::AttentionMap;
use crate::colorspace::{ciede2000, rgb_to_lab, Lab, RgbU8};
use crate::error::{Error, Result};
use crate::image::Image;

#[derive(Debug, Clone, PartialEq)]
pub struct PaletteEntry {
    pub name: String,
    pub rgb: RgbU8,
    pub lab: Lab,
}

impl PaletteEntry {
    pub fn new(name: impl Into<String>, rgb: RgbU8) -> Self {
        Self {
            name: name.into(),
            rgb,
            lab: rgb_to_lab(rgb),
        }
    }
}

/// An ordered, non-empty list of uniquely named reference colors.
#[derive(Debug, Clone, PartialEq)]
pub struct Palette {
    entries: Vec<PaletteEntry>,
}

const HUE_STEPS: usize = 8;
const LIGHTNESS_LEVELS: [f64; 3] = [0.3, 0.5, 0.7];
const SATURATION_LEVELS: [f64; 3] = [0.4, 0.7, 1.0];
/// Neutrals that take the place of hue 0 at the lowest saturation, one per lightness level.
const NEUTRALS: [(&str, RgbU8); 3] = [
    ("black", RgbU8::BLACK),
    ("gray", RgbU8::new(128, 128, 128)),
    ("white", RgbU8::WHITE),
];

impl Palette {
    pub fn new(entries: Vec<PaletteEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyPalette);
        }
        let mut seen = HashSet::new();
        for e in &entries {
            if !seen.insert(e.name.as_str()) {
                return Err(Error::Validation(format!("duplicate palette name {:?}", e.name)));
            }
        }
        Ok(Self { entries })
    }

    /// The built-in 72-color vocabulary: 8 hues x 3 lightness x 3 saturation
    /// levels in HSL, with black, mid gray and white substituted for the
    /// least saturated hue-0 entry of each lightness level.
    pub fn default_palette() -> Self {
        let mut entries = Vec::with_capacity(HUE_STEPS * 9);
        for hue in 0..HUE_STEPS {
            for (li, &light) in LIGHTNESS_LEVELS.iter().enumerate() {
                for (si, &sat) in SATURATION_LEVELS.iter().enumerate() {
                    if hue == 0 && si == 0 {
                        let (name, rgb) = NEUTRALS[li];
                        entries.push(PaletteEntry::new(name, rgb));
                        continue;
                    }
                    let rgb = hsl_to_rgb(hue as f64 * 360.0 / HUE_STEPS as f64, sat, light);
                    entries.push(PaletteEntry::new(format!("hue{hue}-light{li}-sat{si}"), rgb));
                }
            }
        }
        Palette::new(entries).expect("built-in palette is valid")
    }

    pub fn entries(&self) -> &[PaletteEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&PaletteEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Reads `name,r,g,b` CSV with a header row.
    pub fn from_csv<R: Read>(reader: R, source_name: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                Error::parse(source_name, line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line() as usize);
            if record.len() != 4 {
                return Err(Error::parse(
                    source_name,
                    line,
                    format!("expected 4 fields (name,r,g,b), found {}", record.len()),
                ));
            }
            let name = &record[0];
            if name.is_empty() {
                return Err(Error::parse(source_name, line, "empty color name"));
            }
            let mut channels = [0u8; 3];
            for (slot, field) in channels.iter_mut().zip(record.iter().skip(1)) {
                let v: i64 = field
                    .parse()
                    .map_err(|_| Error::parse(source_name, line, format!("not an integer: {field:?}")))?;
                *slot = u8::try_from(v).map_err(|_| {
                    Error::parse(source_name, line, format!("channel {v} out of range 0..=255"))
                })?;
            }
            if !seen.insert(name.to_string()) {
                return Err(Error::parse(source_name, line, format!("duplicate name {name:?}")));
            }
            entries.push(PaletteEntry::new(name, RgbU8::from(channels)));
        }
        Palette::new(entries)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Validation(e.to_string());
        w.write_record(["name", "r", "g", "b"]).map_err(csv_err)?;
        for e in &self.entries {
            w.write_record([
                e.name.clone(),
                e.rgb.r.to_string(),
                e.rgb.g.to_string(),
                e.rgb.b.to_string(),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Validation(e.to_string()))
    }

    /// Index of the entry closest to `c` in ΔE00; ties go to the earlier entry.
    pub fn nearest_index(&self, c: RgbU8) -> usize {
        let lab = rgb_to_lab(c);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, e) in self.entries.iter().enumerate() {
            let d = ciede2000(lab, e.lab);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        best
    }

    pub fn nearest_name(&self, c: RgbU8) -> &PaletteEntry {
        &self.entries[self.nearest_index(c)]
    }
}

pub fn load_palette(path: impl AsRef<Path>) -> Result<Palette> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Palette::from_csv(file, &path.display().to_string())
}

/// HSL (hue in degrees, saturation and lightness in [0, 1]) to 8-bit sRGB.
fn hsl_to_rgb(h: f64, s: f64, l: f64) -> RgbU8 {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    RgbU8::from_f64_clamped([(r + m) * 255.0, (g + m) * 255.0, (b + m) * 255.0])
}

/// One color name with the attention mass that voted for it.
#[derive(Debug, Clone, PartialEq)]
pub struct NameMass {
    pub index: usize,
    pub entry: PaletteEntry,
    pub mass: f64,
}

/// Each pixel votes its attention weight for its nearest palette entry.
///
/// Only entries with positive mass are returned, sorted by descending mass
/// with ties in palette order. Masses sum to 1.
pub fn name_histogram(img: &Image, weights: &AttentionMap, palette: &Palette) -> Vec<NameMass> {
    assert_eq!(img.dims(), weights.dims(), "attention map does not match image");
    let mut mass = vec![0.0; palette.len()];
    let mut cache: HashMap<RgbU8, usize> = HashMap::new();
    for (&px, &w) in img.pixels().iter().zip(weights.weights()) {
        if w <= 0.0 {
            continue;
        }
        let idx = *cache.entry(px).or_insert_with(|| palette.nearest_index(px));
        mass[idx] += w;
    }
    let total: f64 = mass.iter().sum();
    let mut out: Vec<NameMass> = mass
        .into_iter()
        .enumerate()
        .filter(|&(_, m)| m > 0.0)
        .map(|(index, m)| NameMass {
            index,
            entry: palette.entries[index].clone(),
            mass: m / total,
        })
        .collect();
    out.sort_by(|a, b| b.mass.total_cmp(&a.mass).then(a.index.cmp(&b.index)));
    out
}
