use std::path::Path;

use crate::error::{invalid, Result};

/// Row-major interleaved float raster with values nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Raster {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

/// Three-channel RGB raster.
pub type ImageBuffer = Raster;
/// Single-channel raster.
pub type MaskBuffer = Raster;

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(invalid!("raster dims must be positive, got {width}x{height}x{channels}"));
        }
        if data.len() != width * height * channels {
            return Err(invalid!(
                "raster {width}x{height}x{channels} needs {} values, got {}",
                width * height * channels,
                data.len()
            ));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
    }

    pub fn rgb(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(width, height, 3, data)
    }

    pub fn mask(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    /// Builds a raster by evaluating `f(x, y, channel)` at every sample.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, c: usize) -> f32 {
        self.data[(y * self.width + x) * self.channels + c]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, c: usize, v: f32) {
        self.data[(y * self.width + x) * self.channels + c] = v;
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn same_size(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn require_size(&self, other: &Raster, what: &str) -> Result<()> {
        if self.same_size(other) {
            Ok(())
        } else {
            Err(invalid!(
                "{what}: {}x{} vs {}x{}",
                self.width,
                self.height,
                other.width,
                other.height
            ))
        }
    }

    pub fn clamped(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, 1.0);
        }
        self
    }

    /// Reads an 8-bit PNG as RGB (`channels == 3`) or luma (`channels == 1`).
    pub fn read_png(path: &Path, channels: usize) -> Result<Self> {
        let img = image::open(path)?;
        let (w, h) = (img.width() as usize, img.height() as usize);
        let bytes = match channels {
            1 => img.to_luma8().into_raw(),
            3 => img.to_rgb8().into_raw(),
            _ => return Err(invalid!("only 1 or 3 channels can be read, got {channels}")),
        };
        Self::new(w, h, channels, bytes.iter().map(|&b| b as f32 / 255.0).collect())
    }

    /// Writes an 8-bit PNG, clamping to `[0, 1]` and rounding.
    pub fn write_png(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        let (w, h) = (self.width as u32, self.height as u32);
        match self.channels {
            1 => image::GrayImage::from_raw(w, h, bytes).map(|i| i.save(path)),
            3 => image::RgbImage::from_raw(w, h, bytes).map(|i| i.save(path)),
            c => return Err(invalid!("only 1 or 3 channels can be written, got {c}")),
        }
        .expect("buffer length checked at construction")?;
        Ok(())
    }
}
