//! Small VGG-style CNN trained from scratch with RMSprop.

mod arch;
mod checkpoint;
mod ensemble;
mod network;
mod optim;
mod train;

pub use arch::{ArchSpec, ConvBlock, Layer};
pub use checkpoint::{checkpoint_bytes, history_csv, load_checkpoint, model_from_bytes, save_checkpoint, FORMAT_VERSION, MAGIC};
pub use ensemble::{average_probabilities, ensemble_predict, ensemble_probabilities, model_input};
pub use network::{argmax, init_params, softmax, EpochStats, Model};
pub use optim::{rmsprop_step, RmsProp, RmsPropState};
pub use train::{evaluate, train, Metrics, TrainConfig};
