//! Float image buffers and PNG serialization.
//!
//! Images are row-major with pixel values in [0, 1]. PNG export quantizes
//! with half-away-from-zero rounding (`floor(v * 255 + 0.5)`); identical
//! buffers always encode to identical bytes.

use std::fs;
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageFormat};

use crate::error::{Error, Result};

/// Interleaved RGB, `3 * width * height` values.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbBuffer {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

/// Single channel, `width * height` values.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayBuffer {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

pub fn quantize_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

impl RgbBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        RgbBuffer {
            width,
            height,
            data: vec![0.0; 3 * width as usize * height as usize],
        }
    }

    pub fn from_data(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * width as usize * height as usize {
            return Err(Error::invalid(format!(
                "rgb buffer length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(RgbBuffer { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> [f32; 3] {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [f32; 3]) {
        let i = 3 * (y as usize * self.width as usize + x as usize);
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn to_u8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize_u8(v)).collect()
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        PngEncoder::new(&mut out)
            .write_image(&self.to_u8(), self.width, self.height, ExtendedColorType::Rgb8)
            .expect("png encoding to memory cannot fail");
        out
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode_png()).map_err(|e| Error::io(path, e))
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png)
            .map_err(|e| Error::Format {
                format: "png",
                reason: e.to_string(),
            })?
            .to_rgb8();
        let data = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
        RgbBuffer::from_data(img.width(), img.height(), data)
    }

    /// Bilinear resample to a new resolution.
    pub fn resize(&self, width: u32, height: u32) -> Result<RgbBuffer> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("resize target must be positive"));
        }
        let src: image::ImageBuffer<image::Rgb<f32>, Vec<f32>> =
            image::ImageBuffer::from_raw(self.width, self.height, self.data.clone())
                .expect("buffer length is validated at construction");
        let dst = image::imageops::resize(&src, width, height, image::imageops::FilterType::Triangle);
        RgbBuffer::from_data(width, height, dst.into_raw())
    }
}

impl GrayBuffer {
    pub fn new(width: u32, height: u32) -> Self {
        GrayBuffer {
            width,
            height,
            data: vec![0.0; width as usize * height as usize],
        }
    }

    pub fn from_data(width: u32, height: u32, data: Vec<f32>) -> Result<Self> {
        if data.len() != width as usize * height as usize {
            return Err(Error::invalid(format!(
                "gray buffer length {} does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(GrayBuffer { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn at(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, v: f32) {
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let quantized: Vec<u8> = self.data.iter().map(|&v| quantize_u8(v)).collect();
        let mut out = Vec::new();
        PngEncoder::new(&mut out)
            .write_image(&quantized, self.width, self.height, ExtendedColorType::L8)
            .expect("png encoding to memory cannot fail");
        out
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.encode_png()).map_err(|e| Error::io(path, e))
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let img = image::load_from_memory_with_format(&bytes, ImageFormat::Png)
            .map_err(|e| Error::Format {
                format: "png",
                reason: e.to_string(),
            })?
            .to_luma8();
        let data = img.as_raw().iter().map(|&v| v as f32 / 255.0).collect();
        GrayBuffer::from_data(img.width(), img.height(), data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantization_rounds_half_away_from_zero() {
        assert_eq!(quantize_u8(0.0), 0);
        assert_eq!(quantize_u8(1.0), 255);
        assert_eq!(quantize_u8(-0.5), 0);
        assert_eq!(quantize_u8(2.0), 255);
        // 0.5 / 255 * 255 = 127.5 exactly at a tie: rounds up.
        assert_eq!(quantize_u8(127.5 / 255.0), 128);
        assert_eq!(quantize_u8(127.4 / 255.0), 127);
    }

    #[test]
    fn png_roundtrip_preserves_quantized_values() {
        let dir = tempfile::tempdir().unwrap();
        let mut img = RgbBuffer::new(5, 3);
        for y in 0..3 {
            for x in 0..5 {
                img.set_pixel(x, y, [x as f32 / 4.0, y as f32 / 2.0, 0.25]);
            }
        }
        let path = dir.path().join("t.png");
        img.save_png(&path).unwrap();
        let back = RgbBuffer::load_png(&path).unwrap();
        assert_eq!(back.width(), 5);
        assert_eq!(back.height(), 3);
        for (a, b) in img.data().iter().zip(back.data()) {
            assert_eq!(quantize_u8(*a), quantize_u8(*b));
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-6);
        }
    }

    #[test]
    fn png_encoding_is_deterministic() {
        let mut img = GrayBuffer::new(16, 16);
        for y in 0..16 {
            for x in 0..16 {
                img.set(x, y, ((x * 16 + y) as f32) / 255.0);
            }
        }
        assert_eq!(img.encode_png(), img.encode_png());
    }

    #[test]
    fn buffer_length_validation() {
        assert!(RgbBuffer::from_data(2, 2, vec![0.0; 12]).is_ok());
        assert!(RgbBuffer::from_data(2, 2, vec![0.0; 11]).is_err());
        assert!(GrayBuffer::from_data(2, 2, vec![0.0; 4]).is_ok());
        assert!(GrayBuffer::from_data(2, 2, vec![0.0; 5]).is_err());
    }

    #[test]
    fn resize_constant_image_stays_constant() {
        let img = RgbBuffer::from_data(8, 8, vec![0.25; 192]).unwrap();
        let small = img.resize(4, 4).unwrap();
        for v in small.data() {
            assert!((v - 0.25).abs() < 1e-6);
        }
        assert!(img.resize(0, 4).is_err());
    }
}
