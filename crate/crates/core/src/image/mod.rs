//! Image grid representation and the basic pixel operations every probe builds on.

mod io;

pub use io::{load_image, save_image, save_image_bytes};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Luma weights used for RGB to gray conversion.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Row-major `height x width x channels` grid of intensities in [0,1].
#[derive(Debug, Clone, PartialEq)]
pub struct ImageTensor<T> {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<T>,
}

impl<T: Real> ImageTensor<T> {
    /// Build an image, validating the shape and the [0,1] range of every value.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<T>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::param("size", format!("image must be non-empty, got {height}x{width}")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::param("channels", format!("expected 1 or 3, got {channels}")));
        }
        if data.len() != height * width * channels {
            return Err(Error::param(
                "data",
                format!("length {} does not match {height}x{width}x{channels}", data.len()),
            ));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < T::zero() || **v > T::one()) {
            return Err(Error::param("data", format!("value {bad} outside [0,1]")));
        }
        Ok(Self { height, width, channels, data })
    }

    /// Build an image, clamping every value into [0,1] and mapping NaN to 0.
    pub fn from_clamped(height: usize, width: usize, channels: usize, mut data: Vec<T>) -> Result<Self> {
        for v in data.iter_mut() {
            *v = if v.is_nan() { T::zero() } else { v.max(T::zero()).min(T::one()) };
        }
        Self::new(height, width, channels, data)
    }

    pub fn filled(height: usize, width: usize, channels: usize, value: T) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Build from a function of (row, col, channel).
    pub fn from_fn(
        height: usize,
        width: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> T,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(y, x, c));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> T {
        self.data[(y * self.width + x) * self.channels + c]
    }

    /// Extract one channel as a row-major plane.
    pub fn plane(&self, c: usize) -> Vec<T> {
        self.data.iter().skip(c).step_by(self.channels).copied().collect()
    }

    /// Interleave planes back into an image.
    pub fn from_planes(height: usize, width: usize, planes: &[Vec<T>]) -> Result<Self> {
        let channels = planes.len();
        let mut data = vec![T::zero(); height * width * channels];
        for (c, plane) in planes.iter().enumerate() {
            for (i, &v) in plane.iter().enumerate() {
                data[i * channels + c] = v;
            }
        }
        Self::new(height, width, channels, data)
    }

    /// Convert between scalar types.
    pub fn cast<U: Real>(&self) -> ImageTensor<U> {
        ImageTensor {
            height: self.height,
            width: self.width,
            channels: self.channels,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }

    /// Quantize to 8 bits and back, as a save/load round trip would.
    pub fn quantized(&self) -> Self {
        let data = self.data.iter().map(|&v| T::of(to_byte(v) as f64 / 255.0)).collect();
        Self { data, ..*self }
    }
}

impl<T> ImageTensor<T> {
    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }
}

/// 8-bit storage value: round half away from zero of `v * 255`.
pub fn to_byte<T: Real>(v: T) -> u8 {
    (v.f64() * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Luma conversion; gray input is returned unchanged.
pub fn to_grayscale<T: Real>(img: &ImageTensor<T>) -> ImageTensor<T> {
    if img.channels == 1 {
        return img.clone();
    }
    let [wr, wg, wb] = LUMA.map(T::of);
    let data = img
        .data
        .chunks_exact(3)
        .map(|px| (wr * px[0] + wg * px[1] + wb * px[2]).max(T::zero()).min(T::one()))
        .collect();
    ImageTensor { height: img.height, width: img.width, channels: 1, data }
}

/// Bilinear resize with pixel-center alignment and edge clamping.
pub fn resize<T: Real>(img: &ImageTensor<T>, out_h: usize, out_w: usize) -> Result<ImageTensor<T>> {
    if out_h == 0 || out_w == 0 {
        return Err(Error::param("size", format!("resize target must be positive, got {out_h}x{out_w}")));
    }
    if out_h == img.height && out_w == img.width {
        return Ok(img.clone());
    }
    let ys = sample_axis(img.height, out_h);
    let xs = sample_axis(img.width, out_w);
    let c = img.channels;
    let mut data = Vec::with_capacity(out_h * out_w * c);
    for &(y0, y1, fy) in &ys {
        for &(x0, x1, fx) in &xs {
            for ch in 0..c {
                let top = lerp(img.get(y0, x0, ch), img.get(y0, x1, ch), fx);
                let bottom = lerp(img.get(y1, x0, ch), img.get(y1, x1, ch), fx);
                data.push(lerp(top, bottom, fy).max(T::zero()).min(T::one()));
            }
        }
    }
    ImageTensor::new(out_h, out_w, c, data)
}

#[inline]
fn lerp<T: Real>(a: T, b: T, t: T) -> T {
    a + (b - a) * t
}

/// For each output index, the two source indices and the blend weight of the second.
fn sample_axis<T: Real>(src: usize, dst: usize) -> Vec<(usize, usize, T)> {
    let scale = src as f64 / dst as f64;
    (0..dst)
        .map(|i| {
            let pos = ((i as f64 + 0.5) * scale - 0.5).clamp(0.0, (src - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(src - 1);
            (lo, hi, T::of(pos - lo as f64))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(h: usize, w: usize, c: usize, v: &[f64]) -> ImageTensor<f64> {
        ImageTensor::new(h, w, c, v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_out_of_range_and_bad_shape() {
        assert!(ImageTensor::new(1, 1, 1, vec![1.5f32]).is_err());
        assert!(ImageTensor::new(1, 1, 1, vec![f32::NAN]).is_err());
        assert!(ImageTensor::new(2, 2, 1, vec![0.0f32; 3]).is_err());
        assert!(ImageTensor::new(0, 2, 1, Vec::<f32>::new()).is_err());
        assert!(ImageTensor::new(1, 1, 2, vec![0.0f32; 2]).is_err());
    }

    #[test]
    fn grayscale_weights() {
        let white = img(1, 1, 3, &[1.0, 1.0, 1.0]);
        assert!((to_grayscale(&white).data()[0] - 1.0).abs() < 1e-12);
        let red = img(1, 1, 3, &[1.0, 0.0, 0.0]);
        assert!((to_grayscale(&red).data()[0] - 0.299).abs() < 1e-12);
        let gray = img(1, 2, 1, &[0.2, 0.9]);
        assert_eq!(to_grayscale(&gray), gray);
    }

    #[test]
    fn grayscale_idempotent() {
        let rgb = ImageTensor::from_fn(4, 4, 3, |y, x, c| ((y * 7 + x * 3 + c) % 10) as f64 / 10.0).unwrap();
        let g = to_grayscale(&rgb);
        assert_eq!(to_grayscale(&g), g);
    }

    #[test]
    fn resize_identity_and_constant() {
        let a = ImageTensor::from_fn(64, 64, 1, |y, x, _| ((y * 31 + x * 17) % 255) as f32 / 255.0).unwrap();
        assert_eq!(resize(&a, 64, 64).unwrap(), a);
        let k = ImageTensor::filled(5, 7, 1, 0.7f64).unwrap();
        for (h, w) in [(1, 1), (3, 11), (20, 20), (64, 13)] {
            let r = resize(&k, h, w).unwrap();
            assert!(r.data().iter().all(|v| (v - 0.7).abs() < 1e-12));
        }
    }

    #[test]
    fn resize_checkerboard_against_reference() {
        // Straight-line reference: output pixel i samples source coordinate (i + 0.5) / 2 - 0.5,
        // clamped to [0, 1]; for a 2x2 source the bilinear value at (sy, sx) is
        // f00 (1-sy)(1-sx) + f01 (1-sy) sx + f10 sy (1-sx) + f11 sy sx.
        let src = img(2, 2, 1, &[0.0, 1.0, 1.0, 0.0]);
        let out = resize(&src, 4, 4).unwrap();
        let coord = |i: usize| ((i as f64 + 0.5) / 2.0 - 0.5).clamp(0.0, 1.0);
        for y in 0..4 {
            for x in 0..4 {
                let (sy, sx) = (coord(y), coord(x));
                let expect = (1.0 - sy) * sx + sy * (1.0 - sx);
                assert!((out.get(y, x, 0) - expect).abs() < 1e-12, "({y},{x})");
            }
        }
        // Center block: coordinates 0.25 and 0.75.
        assert!((out.get(1, 1, 0) - 0.375).abs() < 1e-12);
        assert!((out.get(1, 2, 0) - 0.625).abs() < 1e-12);
        assert!((out.get(2, 2, 0) - 0.375).abs() < 1e-12);
    }

    #[test]
    fn resize_rejects_zero() {
        let a = ImageTensor::filled(2, 2, 1, 0.0f32).unwrap();
        assert!(resize(&a, 0, 3).is_err());
    }
}
