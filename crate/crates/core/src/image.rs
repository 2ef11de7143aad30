//! Grayscale raster, bilinear sampling and PNG I/O.

use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image {path}: {source}")]
    Codec {
        path: String,
        #[source]
        source: ::image::ImageError,
    },
    #[error("buffer of {len} values does not match {width}x{height}")]
    Shape { width: u32, height: u32, len: usize },
}

/// Row-major single-channel image with real-valued intensities (nominally 0..=255).
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: u32, height: u32) -> Self {
        Self::filled(width, height, 0.0)
    }

    pub fn filled(width: u32, height: u32, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width as usize * height as usize],
        }
    }

    pub fn from_vec(width: u32, height: u32, data: Vec<f32>) -> Result<Self, ImageError> {
        if data.len() != width as usize * height as usize {
            return Err(ImageError::Shape {
                width,
                height,
                len: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: u32, height: u32, f: impl Fn(u32, u32) -> f32) -> Self {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: f32) {
        let w = self.width as usize;
        self.data[y as usize * w + x as usize] = v;
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|v| f(*v)).collect(),
        }
    }

    /// Bilinear sample at a continuous coordinate. `None` when any of the four
    /// neighbours lies outside the image; coordinates are never clamped.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        let wmax = self.width as f64 - 1.0;
        let hmax = self.height as f64 - 1.0;
        if !(x >= 0.0 && y >= 0.0 && x <= wmax && y <= hmax) || self.width < 2 || self.height < 2 {
            return None;
        }
        let x0 = (x.floor() as usize).min(self.width as usize - 2);
        let y0 = (y.floor() as usize).min(self.height as usize - 2);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let w = self.width as usize;
        let i = y0 * w + x0;
        let p00 = self.data[i] as f64;
        let p10 = self.data[i + 1] as f64;
        let p01 = self.data[i + w] as f64;
        let p11 = self.data[i + w + 1] as f64;
        let top = p00 + fx * (p10 - p00);
        let bottom = p01 + fx * (p11 - p01);
        Some(top + fy * (bottom - top))
    }

    /// Bilinear sample with coordinates clamped to the image.
    #[inline]
    pub fn sample_bilinear_clamped(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, self.width as f64 - 1.0);
        let y = y.clamp(0.0, self.height as f64 - 1.0);
        self.sample_bilinear(x, y).unwrap_or(self.data[0] as f64)
    }

    /// Round and clamp every value to the 8-bit range, as a PNG round trip would.
    pub fn quantized(&self) -> GrayImage {
        self.map(|v| v.round().clamp(0.0, 255.0))
    }

    pub fn to_luma8(&self) -> ::image::GrayImage {
        let bytes = self
            .data
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect();
        ::image::GrayImage::from_raw(self.width, self.height, bytes).expect("buffer size matches")
    }

    pub fn from_luma8(img: &::image::GrayImage) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            data: img.as_raw().iter().map(|v| *v as f32).collect(),
        }
    }

    /// Loads any supported file; colour images are converted with the
    /// Rec. 601 luma weights.
    pub fn load(path: &Path) -> Result<Self, ImageError> {
        let dynimg = ::image::open(path).map_err(|source| ImageError::Codec {
            path: path.display().to_string(),
            source,
        })?;
        if let ::image::DynamicImage::ImageLuma8(gray) = &dynimg {
            return Ok(Self::from_luma8(gray));
        }
        let rgb = dynimg.to_rgb32f();
        let data = rgb
            .pixels()
            .map(|p| {
                (255.0 * (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)) as f32
            })
            .collect();
        Ok(Self {
            width: rgb.width(),
            height: rgb.height(),
            data,
        })
    }

    pub fn save_png(&self, path: &Path) -> Result<(), ImageError> {
        self.to_luma8()
            .save(path)
            .map_err(|source| ImageError::Codec {
                path: path.display().to_string(),
                source,
            })
    }
}

/// Saves a boolean mask as a black/white 8-bit PNG.
pub fn save_mask_png(
    width: u32,
    height: u32,
    mask: &[bool],
    path: &Path,
) -> Result<(), ImageError> {
    let bytes = mask.iter().map(|m| if *m { 255u8 } else { 0 }).collect();
    let img = ::image::GrayImage::from_raw(width, height, bytes).ok_or(ImageError::Shape {
        width,
        height,
        len: mask.len(),
    })?;
    img.save(path).map_err(|source| ImageError::Codec {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_interpolates_and_rejects_outside() {
        let img = GrayImage::from_vec(2, 2, vec![0.0, 10.0, 20.0, 30.0]).unwrap();
        assert_eq!(img.sample_bilinear(0.0, 0.0), Some(0.0));
        assert_eq!(img.sample_bilinear(1.0, 1.0), Some(30.0));
        assert_eq!(img.sample_bilinear(0.5, 0.5), Some(15.0));
        assert_eq!(img.sample_bilinear(0.25, 0.0), Some(2.5));
        assert_eq!(img.sample_bilinear(-0.01, 0.0), None);
        assert_eq!(img.sample_bilinear(0.0, 1.0001), None);
        assert_eq!(img.sample_bilinear(f64::NAN, 0.0), None);
    }

    #[test]
    fn png_round_trip_is_lossless_for_quantized() {
        let img = GrayImage::from_fn(7, 5, |x, y| ((x * 37 + y * 11) % 256) as f32);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.png");
        img.save_png(&path).unwrap();
        assert_eq!(GrayImage::load(&path).unwrap(), img);
    }
}
