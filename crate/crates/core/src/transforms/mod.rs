//! Dataset probes and preprocessing transforms, each described by a [`TransformSpec`].

mod dft;
mod dwt;
mod geometry;
mod median;
mod scramble;

pub use dft::{dft2, dft_magnitude, fftshift, magnitude_spectrum};
pub use dwt::{dwt2, dwt_compose, usable_size, Band, Subband, WaveletFamily, WaveletPyramid};
pub use geometry::{crop_background, flip_augment, FlipMode, PROBE_SIZE};
pub use median::median_filter;
pub use scramble::{scramble_permutation, tile_scramble};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledDataset;
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::rng::fnv1a64;
use crate::scalar::Real;

pub const MAX_COMPOSE_DEPTH: usize = 4;

fn probe() -> usize {
    PROBE_SIZE
}
fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn five() -> usize {
    5
}

/// Declarative description of one preprocessing condition.
///
/// Serialized as `{"kind": "...", ...params}`; a composition is
/// `{"kind": "compose", "steps": [...]}` and runs its steps left to right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    Identity,
    CropBackground {
        #[serde(default)]
        x0: usize,
        #[serde(default)]
        y0: usize,
        #[serde(default = "probe")]
        w: usize,
        #[serde(default = "probe")]
        h: usize,
    },
    FlipAugment {
        mode: FlipMode,
    },
    TileScramble {
        tile: usize,
        #[serde(default)]
        seed: u64,
        /// Reuse one permutation for every image instead of salting the seed with the image path.
        #[serde(default)]
        shared: bool,
    },
    DftMagnitude {
        #[serde(default = "yes")]
        log_scale: bool,
        #[serde(default = "yes")]
        center: bool,
    },
    DwtCompose {
        family: WaveletFamily,
        #[serde(default = "one")]
        levels: usize,
    },
    MedianFilter {
        #[serde(default = "five")]
        window: usize,
    },
    Compose {
        steps: Vec<TransformSpec>,
    },
}

/// Build a validated composition applied left to right.
pub fn compose(steps: Vec<TransformSpec>) -> Result<TransformSpec> {
    let spec = TransformSpec::Compose { steps };
    spec.validate()?;
    Ok(spec)
}

impl TransformSpec {
    pub fn crop20() -> Self {
        TransformSpec::CropBackground { x0: 0, y0: 0, w: PROBE_SIZE, h: PROBE_SIZE }
    }

    pub fn scramble(tile: usize) -> Self {
        TransformSpec::TileScramble { tile, seed: 0, shared: false }
    }

    pub fn fourier() -> Self {
        TransformSpec::DftMagnitude { log_scale: true, center: true }
    }

    pub fn wavelet(family: WaveletFamily) -> Self {
        TransformSpec::DwtCompose { family, levels: 1 }
    }

    pub fn median(window: usize) -> Self {
        TransformSpec::MedianFilter { window }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)
            .map_err(|source| Error::Json { context: "transform spec".into(), source })?;
        spec.validate()?;
        Ok(spec)
    }

    /// Nesting depth of compositions; a flat composition has depth 1.
    pub fn depth(&self) -> usize {
        match self {
            TransformSpec::Compose { steps } => 1 + steps.iter().map(Self::depth).max().unwrap_or(0),
            _ => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TransformSpec::CropBackground { w, h, .. } if *w == 0 || *h == 0 => {
                Err(Error::param("w/h", "crop size must be positive"))
            }
            TransformSpec::TileScramble { tile: 0, .. } => Err(Error::param("tile", "tile size must be at least 1")),
            TransformSpec::DwtCompose { levels: 0, .. } => Err(Error::param("levels", "at least one level is required")),
            TransformSpec::MedianFilter { window } => median::check_window(*window),
            TransformSpec::Compose { steps } => {
                if steps.is_empty() {
                    return Err(Error::param("steps", "composition must not be empty"));
                }
                if self.depth() > MAX_COMPOSE_DEPTH {
                    return Err(Error::param(
                        "steps",
                        format!("composition nesting depth {} exceeds {MAX_COMPOSE_DEPTH}", self.depth()),
                    ));
                }
                steps.iter().try_for_each(Self::validate)
            }
            _ => Ok(()),
        }
    }

    /// Flattened sequence of primitive steps.
    pub fn steps(&self) -> Vec<&TransformSpec> {
        match self {
            TransformSpec::Compose { steps } => steps.iter().flat_map(Self::steps).collect(),
            other => vec![other],
        }
    }

    /// True when the transform leaves no object information: a background crop,
    /// or a scramble down to single pixels.
    pub fn is_information_free(&self) -> bool {
        self.steps().iter().any(|s| {
            matches!(s, TransformSpec::CropBackground { .. } | TransformSpec::TileScramble { tile: 1, .. })
        })
    }

    pub fn apply<T: Real>(&self, img: &ImageTensor<T>) -> Result<ImageTensor<T>> {
        self.apply_salted(img, 0)
    }

    /// Apply with `salt` XOR-ed into every non-shared scramble seed.
    pub fn apply_salted<T: Real>(&self, img: &ImageTensor<T>, salt: u64) -> Result<ImageTensor<T>> {
        match self {
            TransformSpec::Identity => Ok(img.clone()),
            TransformSpec::CropBackground { x0, y0, w, h } => crop_background(img, *x0, *y0, *w, *h),
            TransformSpec::FlipAugment { mode } => Ok(flip_augment(img, *mode)),
            TransformSpec::TileScramble { tile, seed, shared } => {
                let seed = if *shared { *seed } else { seed ^ salt };
                tile_scramble(img, *tile, seed)
            }
            TransformSpec::DftMagnitude { log_scale, center } => Ok(dft_magnitude(img, *log_scale, *center)),
            TransformSpec::DwtCompose { family, levels } => dwt_compose(img, *family, *levels),
            TransformSpec::MedianFilter { window } => median_filter(img, *window),
            TransformSpec::Compose { steps } => {
                let mut cur = img.clone();
                for step in steps {
                    cur = step.apply_salted(&cur, salt)?;
                }
                Ok(cur)
            }
        }
    }
}

/// Stable per-image salt: FNV-1a of the `/`-separated relative path.
pub fn path_salt(rel_path: &str) -> u64 {
    fnv1a64(rel_path.as_bytes())
}

/// Transform every image, keeping labels, splits and order.
///
/// Scramble seeds are salted with [`path_salt`] of each image's relative path,
/// so every image gets its own reproducible permutation.
pub fn apply_to_dataset<T: Real>(ds: &LabeledDataset<T>, spec: &TransformSpec) -> Result<LabeledDataset<T>> {
    spec.validate()?;
    let images = ds
        .items
        .par_iter()
        .map(|item| {
            spec.apply_salted(&item.image, path_salt(&item.path))
                .map_err(|e| Error::Item { path: item.path.clone(), source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = ds.clone();
    for (item, image) in out.items.iter_mut().zip(images) {
        item.image = image;
    }
    Ok(out)
}
