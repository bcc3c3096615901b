use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Real;

pub fn check_window(window: usize) -> Result<()> {
    if window < 3 || window % 2 == 0 {
        return Err(Error::param("window", format!("median window must be odd and >= 3, got {window}")));
    }
    Ok(())
}

/// Exact `window x window` median with replicate padding, each channel on its own.
pub fn median_filter<T: Real>(img: &ImageTensor<T>, window: usize) -> Result<ImageTensor<T>> {
    check_window(window)?;
    let (h, w, c) = img.shape();
    let r = (window / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut neighborhood = Vec::with_capacity(window * window);
    let mut data = Vec::with_capacity(h * w * c);
    let mid = window * window / 2;
    for y in 0..h {
        for x in 0..w {
            for ch in 0..c {
                neighborhood.clear();
                for dy in -r..=r {
                    let sy = clamp(y as isize + dy, h);
                    for dx in -r..=r {
                        neighborhood.push(img.get(sy, clamp(x as isize + dx, w), ch));
                    }
                }
                let (_, m, _) = neighborhood.select_nth_unstable_by(mid, |a, b| a.partial_cmp(b).expect("finite pixels"));
                data.push(*m);
            }
        }
    }
    ImageTensor::new(h, w, c, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_of_one_to_nine() {
        let img = ImageTensor::new(3, 3, 1, (1..=9).map(|v| v as f64 / 10.0).collect()).unwrap();
        let out = median_filter(&img, 3).unwrap();
        assert_eq!(out.get(1, 1, 0), 0.5);
    }

    #[test]
    fn constant_unchanged() {
        let img = ImageTensor::filled(7, 5, 3, 0.3f32).unwrap();
        assert_eq!(median_filter(&img, 5).unwrap(), img);
    }

    #[test]
    fn even_or_small_window_rejected() {
        let img = ImageTensor::filled(4, 4, 1, 0.3f32).unwrap();
        for w in [0, 1, 2, 4] {
            let err = median_filter(&img, w).unwrap_err();
            assert!(matches!(err, Error::Param { ref field, .. } if field == "window"));
        }
    }

    #[test]
    fn removes_salt_noise() {
        let mut v = vec![0.2f64; 25];
        v[12] = 1.0;
        let img = ImageTensor::new(5, 5, 1, v).unwrap();
        assert!(median_filter(&img, 3).unwrap().data().iter().all(|&p| p == 0.2));
    }
}
