use serde::{Deserialize, Serialize};

use crate::error::invalid;
use crate::{Error, Result};

/// Dense `(height, width, channels)` image, row-major with channels fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureImage {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f32>,
}

impl FeatureImage {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(invalid("feature image dimensions must be positive"));
        }
        let n = width * height * channels;
        if data.len() != n {
            return Err(Error::Shape { expected: n, actual: data.len() });
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(width, height, channels, vec![value; width * height * channels])
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

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Bilinear sample at node coordinates: node `(i, j)` sits at `(i, j)`.
    /// Coordinates are clamped to `[0, w-1] x [0, h-1]`.
    pub fn sample_into(&self, u: f64, v: f64, out: &mut [f64]) {
        let u = u.clamp(0.0, (self.width - 1) as f64);
        let v = v.clamp(0.0, (self.height - 1) as f64);
        let x0 = (u.floor() as usize).min(self.width.saturating_sub(2));
        let y0 = (v.floor() as usize).min(self.height.saturating_sub(2));
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let (tx, ty) = (u - x0 as f64, v - y0 as f64);
        let (a, b, c, d) = (self.pixel(x0, y0), self.pixel(x1, y0), self.pixel(x0, y1), self.pixel(x1, y1));
        for ch in 0..self.channels {
            let top = a[ch] as f64 * (1.0 - tx) + b[ch] as f64 * tx;
            let bottom = c[ch] as f64 * (1.0 - tx) + d[ch] as f64 * tx;
            out[ch] = top * (1.0 - ty) + bottom * ty;
        }
    }

    pub fn sample(&self, u: f64, v: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.sample_into(u, v, &mut out);
        out
    }

    /// Averages `factor x factor` blocks; partial blocks at the border
    /// average whatever pixels they cover.
    pub fn box_downsample(&self, factor: usize) -> Result<Self> {
        if factor == 0 {
            return Err(invalid("downsampling factor must be positive"));
        }
        let w = self.width.div_ceil(factor);
        let h = self.height.div_ceil(factor);
        let mut data = vec![0.0f32; w * h * self.channels];
        for y in 0..h {
            for x in 0..w {
                let mut acc = vec![0.0f64; self.channels];
                let mut count = 0usize;
                for sy in y * factor..((y + 1) * factor).min(self.height) {
                    for sx in x * factor..((x + 1) * factor).min(self.width) {
                        for (a, v) in acc.iter_mut().zip(self.pixel(sx, sy)) {
                            *a += *v as f64;
                        }
                        count += 1;
                    }
                }
                let o = (y * w + x) * self.channels;
                for (c, a) in acc.iter().enumerate() {
                    data[o + c] = (a / count as f64) as f32;
                }
            }
        }
        Self::new(w, h, self.channels, data)
    }

    pub fn channel_means(&self) -> Vec<f64> {
        let mut acc = vec![0.0f64; self.channels];
        for px in self.data.chunks_exact(self.channels) {
            for (a, v) in acc.iter_mut().zip(px) {
                *a += *v as f64;
            }
        }
        let n = (self.width * self.height) as f64;
        acc.iter().map(|a| a / n).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PyramidConfig {
    /// Box-filter factor of each level relative to the input image.
    pub factors: Vec<usize>,
    /// Width of the learned global feature.
    pub global_width: usize,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self { factors: vec![2, 4, 8], global_width: 16 }
    }
}

impl PyramidConfig {
    pub fn validate(&self) -> Result<()> {
        if self.factors.is_empty() || self.factors.contains(&0) {
            return Err(invalid("pyramid needs at least one positive factor"));
        }
        Ok(())
    }

    pub fn local_width(&self, channels: usize) -> usize {
        self.factors.len() * channels
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureLevel {
    pub factor: usize,
    pub image: FeatureImage,
}

/// Multi-resolution feature images plus a global feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FeaturePyramid {
    pub levels: Vec<FeatureLevel>,
    pub global_feature: Vec<f64>,
    full_size: [usize; 2],
}

impl FeaturePyramid {
    /// Box-filtered levels of `image`; the global feature is left as the
    /// per-channel mean of the full image.
    pub fn from_image(image: &FeatureImage, cfg: &PyramidConfig) -> Result<Self> {
        cfg.validate()?;
        let levels = cfg
            .factors
            .iter()
            .map(|&factor| Ok(FeatureLevel { factor, image: image.box_downsample(factor)? }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels, global_feature: image.channel_means(), full_size: [image.width(), image.height()] })
    }

    pub fn from_levels(levels: Vec<FeatureLevel>, global_feature: Vec<f64>, full_size: [usize; 2]) -> Result<Self> {
        if levels.is_empty() {
            return Err(invalid("pyramid needs at least one level"));
        }
        Ok(Self { levels, global_feature, full_size })
    }

    pub fn with_global(mut self, global_feature: Vec<f64>) -> Self {
        self.global_feature = global_feature;
        self
    }

    pub fn full_size(&self) -> [usize; 2] {
        self.full_size
    }

    pub fn local_width(&self) -> usize {
        self.levels.iter().map(|l| l.image.channels()).sum()
    }

    pub fn width(&self) -> usize {
        self.local_width() + self.global_feature.len()
    }

    /// Writes the local samples at full-resolution pixel `pixel` into `out`.
    pub fn sample_local_into(&self, pixel: [f64; 2], out: &mut [f64]) {
        let u = pixel[0].clamp(0.0, self.full_size[0] as f64);
        let v = pixel[1].clamp(0.0, self.full_size[1] as f64);
        let mut o = 0;
        for level in &self.levels {
            // Level node i is centered on full-resolution coordinate (i + 0.5) * factor.
            let k = level.factor as f64;
            let c = level.image.channels();
            level.image.sample_into(u / k - 0.5, v / k - 0.5, &mut out[o..o + c]);
            o += c;
        }
    }
}

/// Bilinear samples from every level followed by the global feature.
pub fn sample_pyramid(pyr: &FeaturePyramid, pixel: [f64; 2]) -> Vec<f64> {
    let mut out = vec![0.0; pyr.width()];
    let local = pyr.local_width();
    pyr.sample_local_into(pixel, &mut out[..local]);
    out[local..].copy_from_slice(&pyr.global_feature);
    out
}
