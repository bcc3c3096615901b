//! Separable orthonormal 2D DWT with periodic extension, laid out as a nested
//! quadrant pyramid `[LL LH; HL HH]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{to_grayscale, ImageTensor};
use crate::scalar::{rescale_unit, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletFamily {
    Haar,
    #[serde(alias = "daubechies4")]
    Db4,
}

impl WaveletFamily {
    /// Orthonormal analysis lowpass filter.
    pub fn lowpass(self) -> Vec<f64> {
        match self {
            WaveletFamily::Haar => vec![std::f64::consts::FRAC_1_SQRT_2; 2],
            WaveletFamily::Db4 => {
                let s3 = 3f64.sqrt();
                let norm = 4.0 * std::f64::consts::SQRT_2;
                vec![(1.0 + s3) / norm, (3.0 + s3) / norm, (3.0 - s3) / norm, (1.0 - s3) / norm]
            }
        }
    }

    /// Quadrature mirror highpass: `g[m] = (-1)^m h[L-1-m]`.
    pub fn highpass(self) -> Vec<f64> {
        let h = self.lowpass();
        let n = h.len();
        (0..n).map(|m| if m % 2 == 0 { h[n - 1 - m] } else { -h[n - 1 - m] }).collect()
    }

    pub fn taps(self) -> usize {
        match self {
            WaveletFamily::Haar => 2,
            WaveletFamily::Db4 => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Band {
    Approx,
    /// Lowpass vertically, highpass horizontally (top-right quadrant).
    Lh,
    /// Highpass vertically, lowpass horizontally (bottom-left quadrant).
    Hl,
    Hh,
}

/// Rectangle of one subband inside the pyramid buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Subband {
    pub level: usize,
    pub band: Band,
    pub y0: usize,
    pub x0: usize,
    pub height: usize,
    pub width: usize,
}

/// Raw coefficients of a multi-level decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletPyramid<T> {
    pub family: WaveletFamily,
    pub levels: usize,
    pub height: usize,
    pub width: usize,
    pub coeffs: Vec<T>,
}

struct Filters<T> {
    lo: Vec<T>,
    hi: Vec<T>,
}

impl<T: Real> Filters<T> {
    fn new(family: WaveletFamily) -> Self {
        Self {
            lo: family.lowpass().into_iter().map(T::of).collect(),
            hi: family.highpass().into_iter().map(T::of).collect(),
        }
    }

    fn analyze(&self, x: &[T], out: &mut [T]) {
        let n = x.len();
        let half = n / 2;
        for k in 0..half {
            let (mut a, mut d) = (T::zero(), T::zero());
            for (m, (&lo, &hi)) in self.lo.iter().zip(&self.hi).enumerate() {
                let v = x[(2 * k + m) % n];
                a += lo * v;
                d += hi * v;
            }
            out[k] = a;
            out[half + k] = d;
        }
    }

    fn synthesize(&self, c: &[T], out: &mut [T]) {
        let n = c.len();
        let half = n / 2;
        out.iter_mut().for_each(|v| *v = T::zero());
        for k in 0..half {
            let (a, d) = (c[k], c[half + k]);
            for (m, (&lo, &hi)) in self.lo.iter().zip(&self.hi).enumerate() {
                out[(2 * k + m) % n] += a * lo + d * hi;
            }
        }
    }
}

/// Apply `f` to each row of the `rh x rw` top-left region of `buf`.
fn each_row<T: Real>(buf: &mut [T], stride: usize, rh: usize, rw: usize, f: &impl Fn(&[T], &mut [T])) {
    let mut line = vec![T::zero(); rw];
    for y in 0..rh {
        let row = &mut buf[y * stride..y * stride + rw];
        line.copy_from_slice(row);
        f(&line, row);
    }
}

/// Apply `f` to each column of the `rh x rw` top-left region of `buf`.
fn each_col<T: Real>(buf: &mut [T], stride: usize, rh: usize, rw: usize, f: &impl Fn(&[T], &mut [T])) {
    let mut line = vec![T::zero(); rh];
    let mut out = vec![T::zero(); rh];
    for x in 0..rw {
        for y in 0..rh {
            line[y] = buf[y * stride + x];
        }
        f(&line, &mut out);
        for y in 0..rh {
            buf[y * stride + x] = out[y];
        }
    }
}

/// Largest size the decomposition can use: both sides cut down to multiples of `2^levels`.
pub fn usable_size(h: usize, w: usize, family: WaveletFamily, levels: usize) -> Result<(usize, usize)> {
    if levels == 0 {
        return Err(Error::param("levels", "at least one level is required"));
    }
    let block = 1usize.checked_shl(levels as u32).unwrap_or(usize::MAX);
    let (uh, uw) = (h / block * block, w / block * block);
    let coarsest = |n: usize| n >> (levels - 1);
    if uh == 0 || uw == 0 || coarsest(uh) < family.taps() || coarsest(uw) < family.taps() {
        return Err(Error::Degenerate(format!(
            "{h}x{w} image is too small for {levels} level(s) of {family:?}"
        )));
    }
    Ok((uh, uw))
}

/// Forward transform of a row-major plane. Sides are cropped to multiples of `2^levels`.
pub fn dwt2<T: Real>(plane: &[T], h: usize, w: usize, family: WaveletFamily, levels: usize) -> Result<WaveletPyramid<T>> {
    let (uh, uw) = usable_size(h, w, family, levels)?;
    let mut coeffs = Vec::with_capacity(uh * uw);
    for y in 0..uh {
        coeffs.extend_from_slice(&plane[y * w..y * w + uw]);
    }
    let filters = Filters::<T>::new(family);
    let (mut rh, mut rw) = (uh, uw);
    for _ in 0..levels {
        let analyze = |x: &[T], out: &mut [T]| filters.analyze(x, out);
        each_row(&mut coeffs, uw, rh, rw, &analyze);
        each_col(&mut coeffs, uw, rh, rw, &analyze);
        rh /= 2;
        rw /= 2;
    }
    Ok(WaveletPyramid { family, levels, height: uh, width: uw, coeffs })
}

impl<T: Real> WaveletPyramid<T> {
    /// Reconstruct the (cropped) plane from the coefficients.
    pub fn inverse(&self) -> Vec<T> {
        let filters = Filters::<T>::new(self.family);
        let mut buf = self.coeffs.clone();
        for level in (1..=self.levels).rev() {
            let (rh, rw) = (self.height >> (level - 1), self.width >> (level - 1));
            let synthesize = |c: &[T], out: &mut [T]| filters.synthesize(c, out);
            each_col(&mut buf, self.width, rh, rw, &synthesize);
            each_row(&mut buf, self.width, rh, rw, &synthesize);
        }
        buf
    }

    pub fn subbands(&self) -> Vec<Subband> {
        let mut bands = Vec::with_capacity(3 * self.levels + 1);
        for level in 1..=self.levels {
            let (bh, bw) = (self.height >> level, self.width >> level);
            for (band, y0, x0) in [(Band::Lh, 0, bw), (Band::Hl, bh, 0), (Band::Hh, bh, bw)] {
                bands.push(Subband { level, band, y0, x0, height: bh, width: bw });
            }
        }
        let (ah, aw) = (self.height >> self.levels, self.width >> self.levels);
        bands.push(Subband { level: self.levels, band: Band::Approx, y0: 0, x0: 0, height: ah, width: aw });
        bands
    }

    pub fn band_values(&self, band: &Subband) -> Vec<T> {
        let mut out = Vec::with_capacity(band.height * band.width);
        for y in band.y0..band.y0 + band.height {
            let start = y * self.width + band.x0;
            out.extend_from_slice(&self.coeffs[start..start + band.width]);
        }
        out
    }

    /// Sum of squared coefficients over all detail subbands.
    pub fn detail_energy(&self) -> T {
        self.subbands()
            .iter()
            .filter(|b| b.band != Band::Approx)
            .flat_map(|b| self.band_values(b))
            .map(|v| v * v)
            .sum()
    }

    /// Composite display image: every subband min-max rescaled independently.
    pub fn to_image(&self) -> ImageTensor<T> {
        let mut data = self.coeffs.clone();
        for band in self.subbands() {
            let mut vals = self.band_values(&band);
            rescale_unit(&mut vals);
            for (row, chunk) in vals.chunks(band.width).enumerate() {
                let start = (band.y0 + row) * self.width + band.x0;
                data[start..start + band.width].copy_from_slice(chunk);
            }
        }
        ImageTensor::new(self.height, self.width, 1, data).expect("rescaled bands are in range")
    }
}

/// Grayscale, decompose, and lay the rescaled subbands out as one image.
pub fn dwt_compose<T: Real>(img: &ImageTensor<T>, family: WaveletFamily, levels: usize) -> Result<ImageTensor<T>> {
    let gray = to_grayscale(img);
    Ok(dwt2(gray.data(), gray.height(), gray.width(), family, levels)?.to_image())
}
