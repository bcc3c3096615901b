//! Magnitude spectrum of the unnormalized 2D DFT.

use crate::image::{to_grayscale, ImageTensor};
use crate::scalar::{rescale_unit, Real};

/// Twiddle table `exp(-2*pi*i*k/n)` for `k` in `0..n`, evaluated in f64.
fn twiddles<T: Real>(n: usize) -> Vec<(T, T)> {
    (0..n)
        .map(|k| {
            let a = -std::f64::consts::TAU * k as f64 / n as f64;
            (T::of(a.cos()), T::of(a.sin()))
        })
        .collect()
}

/// 1D DFT of `n` complex values read with `stride`, written back in place.
fn dft_lines<T: Real>(re: &mut [T], im: &mut [T], n: usize, count: usize, line_step: usize, stride: usize) {
    let tw = twiddles::<T>(n);
    let mut out_re = vec![T::zero(); n];
    let mut out_im = vec![T::zero(); n];
    for line in 0..count {
        let base = line * line_step;
        for (k, (or, oi)) in out_re.iter_mut().zip(out_im.iter_mut()).enumerate() {
            let (mut sr, mut si) = (T::zero(), T::zero());
            for j in 0..n {
                let (c, s) = tw[(k * j) % n];
                let (xr, xi) = (re[base + j * stride], im[base + j * stride]);
                sr += xr * c - xi * s;
                si += xr * s + xi * c;
            }
            *or = sr;
            *oi = si;
        }
        for j in 0..n {
            re[base + j * stride] = out_re[j];
            im[base + j * stride] = out_im[j];
        }
    }
}

/// Complex spectrum `F(u,v)` of a row-major real plane, returned as (re, im) planes.
pub fn dft2<T: Real>(plane: &[T], h: usize, w: usize) -> (Vec<T>, Vec<T>) {
    let mut re = plane.to_vec();
    let mut im = vec![T::zero(); h * w];
    dft_lines(&mut re, &mut im, w, h, w, 1);
    dft_lines(&mut re, &mut im, h, w, 1, w);
    (re, im)
}

/// Raw `|F(u,v)|` of the grayscale image, DC at index 0, no scaling.
pub fn magnitude_spectrum<T: Real>(img: &ImageTensor<T>) -> Vec<T> {
    let gray = to_grayscale(img);
    let (re, im) = dft2(gray.data(), gray.height(), gray.width());
    re.iter().zip(&im).map(|(&r, &i)| r.hypot(i)).collect()
}

/// Swap quadrants so the zero frequency lands at `(h/2, w/2)`.
pub fn fftshift<T: Copy>(plane: &[T], h: usize, w: usize) -> Vec<T> {
    let mut out = plane.to_vec();
    for y in 0..h {
        for x in 0..w {
            out[((y + h / 2) % h) * w + (x + w / 2) % w] = plane[y * w + x];
        }
    }
    out
}

/// Magnitude spectrum as a displayable image: optional `log(1+|F|)`, optional centering,
/// then a per-image min-max rescale onto [0,1].
pub fn dft_magnitude<T: Real>(img: &ImageTensor<T>, log_scale: bool, center: bool) -> ImageTensor<T> {
    let (h, w) = (img.height(), img.width());
    let mut mag = magnitude_spectrum(img);
    if log_scale {
        mag.iter_mut().for_each(|m| *m = m.ln_1p());
    }
    if center {
        mag = fftshift(&mag, h, w);
    }
    rescale_unit(&mut mag);
    ImageTensor::new(h, w, 1, mag).expect("rescaled spectrum is in range")
}
