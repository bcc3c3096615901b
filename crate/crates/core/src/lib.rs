//! Background-bias auditing for image classification datasets.
//!
//! A dataset is probed with information-free inputs (top-left background crops,
//! pixel-scrambled images) and with transform-domain views (Fourier magnitude,
//! wavelet subbands, median filtering). A small CNN is trained from scratch under
//! each condition; above-chance accuracy on an information-free condition means the
//! dataset carries hidden class signal outside the object.
//!
//! The numeric core is generic over [`Real`]; the aliases below fix the scalar type
//! used in production (`f32`) and in numerical checks (`f64`).

pub mod audit;
pub mod chart;
pub mod dataset;
pub mod error;
pub mod image;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod synth;
pub mod transforms;

pub use error::{Error, Result};
pub use scalar::Real;

/// Working image type.
pub type Image = image::ImageTensor<f32>;
/// Double-precision image, used by oracles and reconstruction checks.
pub type Image64 = image::ImageTensor<f64>;
pub type Dataset = dataset::LabeledDataset<f32>;
pub type TrainedModel = nn::Model<f32>;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
