//! Image-to-sequence preprocessing for MNIST-style 28x28 digits.

use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("bad shape: expected {expected} pixels, got {got}")]
    BadShape { expected: usize, got: usize },
    #[error("pixel value {0} outside [0,255]")]
    BadPixel(i64),
    #[error("line {line}: {message}")]
    BadRow { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, ImageError>;

pub const SIDE: usize = 28;
pub const CROP: usize = 18;
pub const CROP_OFFSET: usize = (SIDE - CROP) / 2;

/// Row-major pixel grid, values in [0,255].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelSequence {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl PixelSequence {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(ImageError::BadShape { expected: width * height, got: pixels.len() });
        }
        Ok(PixelSequence { width, height, pixels })
    }

    pub fn from_ints(width: usize, height: usize, values: &[i64]) -> Result<Self> {
        let pixels = values
            .iter()
            .map(|&v| u8::try_from(v).map_err(|_| ImageError::BadPixel(v)))
            .collect::<Result<Vec<u8>>>()?;
        Self::new(width, height, pixels)
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.width + col]
    }

    pub fn as_ints(&self) -> Vec<i64> {
        self.pixels.iter().map(|&p| i64::from(p)).collect()
    }
}

/// Keeps the centred `target`x`target` window of a square image.
pub fn center_crop(img: &PixelSequence, target: usize) -> Result<PixelSequence> {
    if img.width != img.height || target > img.width {
        return Err(ImageError::BadShape { expected: target * target, got: img.pixels.len() });
    }
    let off = (img.width - target) / 2;
    let mut out = Vec::with_capacity(target * target);
    for r in off..off + target {
        let start = r * img.width + off;
        out.extend_from_slice(&img.pixels[start..start + target]);
    }
    PixelSequence::new(target, target, out)
}

/// Standard 28 to 18 crop yielding 324 values.
pub fn crop_mnist(img: &PixelSequence) -> Result<PixelSequence> {
    if img.width != SIDE || img.height != SIDE {
        return Err(ImageError::BadShape { expected: SIDE * SIDE, got: img.width * img.height });
    }
    center_crop(img, CROP)
}

/// Zero-pads a centred crop back to `side`x`side`.
pub fn pad_to(img: &PixelSequence, side: usize) -> Result<PixelSequence> {
    if img.width != img.height || img.width > side {
        return Err(ImageError::BadShape { expected: side * side, got: img.pixels.len() });
    }
    let off = (side - img.width) / 2;
    let mut out = vec![0u8; side * side];
    for r in 0..img.height {
        let dst = (r + off) * side + off;
        out[dst..dst + img.width].copy_from_slice(&img.pixels[r * img.width..(r + 1) * img.width]);
    }
    PixelSequence::new(side, side, out)
}

/// Left-to-right, top-to-bottom features; `scale` divides by 255.
pub fn flatten_to_features(seq: &PixelSequence, scale: bool) -> Vec<f64> {
    seq.pixels.iter().map(|&p| if scale { f64::from(p) / 255.0 } else { f64::from(p) }).collect()
}

/// Inverse of [`flatten_to_features`]; values are rounded and clamped.
pub fn unflatten(features: &[f64], width: usize, height: usize, scaled: bool) -> Result<PixelSequence> {
    let pixels = features
        .iter()
        .map(|&v| {
            let v = if scaled { v * 255.0 } else { v };
            v.round().clamp(0.0, 255.0) as u8
        })
        .collect();
    PixelSequence::new(width, height, pixels)
}

/// Reads images from CSV rows of 784 pixel columns followed by a label.
pub fn read_image_csv<R: Read>(reader: R, has_header: bool) -> Result<Vec<(PixelSequence, String)>> {
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(has_header).flexible(true).trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() != SIDE * SIDE + 1 {
            return Err(ImageError::BadRow {
                line,
                message: format!("expected {} columns, got {}", SIDE * SIDE + 1, rec.len()),
            });
        }
        let mut px = Vec::with_capacity(SIDE * SIDE);
        for f in rec.iter().take(SIDE * SIDE) {
            let v: i64 =
                f.parse().map_err(|_| ImageError::BadRow { line, message: format!("non-integer pixel {f:?}") })?;
            px.push(v);
        }
        out.push((PixelSequence::from_ints(SIDE, SIDE, &px)?, rec[SIDE * SIDE].to_string()));
    }
    Ok(out)
}

pub fn load_image_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Vec<(PixelSequence, String)>> {
    read_image_csv(std::fs::File::open(path)?, has_header)
}
