use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::scalar::Real;

/// Side of the default background probe, anchored at the top-left corner.
pub const PROBE_SIZE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlipMode {
    Horizontal,
    Vertical,
}

/// Cut out the `w x h` rectangle whose top-left corner is `(x0, y0)`.
pub fn crop_background<T: Real>(
    img: &ImageTensor<T>,
    x0: usize,
    y0: usize,
    w: usize,
    h: usize,
) -> Result<ImageTensor<T>> {
    if w == 0 || h == 0 {
        return Err(Error::param("crop", format!("crop size must be positive, got {w}x{h}")));
    }
    if x0 + w > img.width() {
        return Err(Error::Bounds(format!(
            "right edge x0+w = {} exceeds width {}",
            x0 + w,
            img.width()
        )));
    }
    if y0 + h > img.height() {
        return Err(Error::Bounds(format!(
            "bottom edge y0+h = {} exceeds height {}",
            y0 + h,
            img.height()
        )));
    }
    let c = img.channels();
    let mut data = Vec::with_capacity(w * h * c);
    for y in y0..y0 + h {
        let start = (y * img.width() + x0) * c;
        data.extend_from_slice(&img.data()[start..start + w * c]);
    }
    ImageTensor::new(h, w, c, data)
}

pub fn flip_augment<T: Real>(img: &ImageTensor<T>, mode: FlipMode) -> ImageTensor<T> {
    let (h, w, c) = img.shape();
    ImageTensor::from_fn(h, w, c, |y, x, ch| match mode {
        FlipMode::Horizontal => img.get(y, w - 1 - x, ch),
        FlipMode::Vertical => img.get(h - 1 - y, x, ch),
    })
    .expect("flip preserves shape and range")
}
