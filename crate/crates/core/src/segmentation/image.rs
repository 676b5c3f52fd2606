use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SegmentationError;

/// Single-channel image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, SegmentationError> {
        if width == 0 || height == 0 {
            return Err(SegmentationError::Shape(format!("empty image {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(SegmentationError::Shape(format!(
                "{} values for a {width}x{height} image",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(SegmentationError::Shape(format!("intensity {v} outside [0, 1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self, SegmentationError> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    /// Decodes any supported raster format; colour is reduced to luminance.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, SegmentationError> {
        let img = image::open(path.as_ref())?;
        Ok(Self::from_dynamic(&img))
    }

    pub fn from_dynamic(img: &image::DynamicImage) -> Self {
        let luma = img.to_luma32f();
        let data = luma
            .as_raw()
            .iter()
            .map(|&v| f64::from(v).clamp(0.0, 1.0))
            .collect();
        Self {
            width: luma.width() as usize,
            height: luma.height() as usize,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    /// Intensities mapped through `f`, clamped to `[0, 1]`.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v).clamp(0.0, 1.0)).collect(),
        }
    }

    /// Copies the rectangle `[x0, x1) x [y0, y1)`.
    pub fn crop(&self, bbox: &BoundingBox) -> Self {
        let mut data = Vec::with_capacity(bbox.width() * bbox.height());
        for y in bbox.y0..bbox.y1 {
            data.extend_from_slice(&self.data[y * self.width + bbox.x0..y * self.width + bbox.x1]);
        }
        Self {
            width: bbox.width(),
            height: bbox.height(),
            data,
        }
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([(self.get(x as usize, y as usize) * 255.0).round() as u8])
        })
    }

    /// Writes a lossless 8-bit PNG.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), SegmentationError> {
        self.to_luma8()
            .save_with_format(path.as_ref(), image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Half-open pixel rectangle `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BoundingBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }

    /// Grows the box by `pad` on every side without leaving a
    /// `width x height` image.
    pub fn padded(&self, pad: usize, width: usize, height: usize) -> Self {
        Self {
            x0: self.x0.saturating_sub(pad),
            y0: self.y0.saturating_sub(pad),
            x1: (self.x1 + pad).min(width),
            y1: (self.y1 + pad).min(height),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<bool>) -> Result<Self, SegmentationError> {
        if data.len() != width * height {
            return Err(SegmentationError::Shape(format!(
                "{} values for a {width}x{height} mask",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&v| v)
    }

    pub fn invert(&self) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| !v).collect(),
        }
    }

    /// Sørensen-Dice overlap; 1 for two empty masks.
    pub fn dice(&self, other: &BinaryMask) -> f64 {
        assert_eq!(
            (self.width, self.height),
            (other.width, other.height),
            "mask shapes differ"
        );
        let both = self
            .data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| **a && **b)
            .count();
        let sum = self.count() + other.count();
        if sum == 0 {
            1.0
        } else {
            2.0 * both as f64 / sum as f64
        }
    }

    pub fn crop(&self, bbox: &BoundingBox) -> Self {
        Self::from_fn(bbox.width(), bbox.height(), |x, y| {
            self.get(bbox.x0 + x, bbox.y0 + y)
        })
    }

    pub fn to_luma8(&self) -> image::GrayImage {
        image::GrayImage::from_fn(self.width as u32, self.height as u32, |x, y| {
            image::Luma([if self.get(x as usize, y as usize) { 255 } else { 0 }])
        })
    }
}
