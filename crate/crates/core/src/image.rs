//! In-memory RGB raster plus PNG / PPM ingestion and PNG output.

use std::path::Path;

use image::{ImageBuffer, ImageReader, Luma, Rgb};

use crate::colorspace::RgbU8;
use crate::error::{Error, Result};

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    width: u32,
    height: u32,
    pixels: Vec<RgbU8>,
}

impl Image {
    pub fn new(width: u32, height: u32, pixels: Vec<RgbU8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation("image dimensions must be positive".into()));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::Validation(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, color: RgbU8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> RgbU8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut pixels = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            pixels,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[RgbU8] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> RgbU8 {
        self.pixels[(y * self.width + x) as usize]
    }

    pub fn map_pixels(&self, f: impl FnMut(RgbU8) -> RgbU8) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().copied().map(f).collect(),
        }
    }

    /// Loads an 8-bit PNG (RGB or RGBA, alpha dropped) or a binary PPM.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decoded = open(path)?.to_rgb8();
        let (width, height) = decoded.dimensions();
        let pixels = decoded.pixels().map(|p| RgbU8::from(p.0)).collect();
        Image::new(width, height, pixels)
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let raw: Vec<u8> = self.pixels.iter().flat_map(|p| p.channels()).collect();
        let buf: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_raw(self.width, self.height, raw)
            .expect("buffer length matches dimensions");
        buf.save_with_format(path, image::ImageFormat::Png)
            .map_err(|e| encode_error(path, e))
    }
}

/// Loads a mask as 8-bit grayscale values in row-major order.
pub fn load_gray(path: impl AsRef<Path>) -> Result<(u32, u32, Vec<u8>)> {
    let path = path.as_ref();
    let decoded = open(path)?.to_luma8();
    let (w, h) = decoded.dimensions();
    Ok((w, h, decoded.into_raw()))
}

pub fn save_gray_png(path: impl AsRef<Path>, width: u32, height: u32, values: Vec<u8>) -> Result<()> {
    let path = path.as_ref();
    let buf: ImageBuffer<Luma<u8>, _> = ImageBuffer::from_raw(width, height, values)
        .ok_or_else(|| Error::Validation("gray buffer length does not match dimensions".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| encode_error(path, e))
}

fn open(path: &Path) -> Result<image::DynamicImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    reader.decode().map_err(|e| match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Decode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    })
}

fn encode_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::Encode {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}
