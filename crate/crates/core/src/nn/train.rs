use serde::{Deserialize, Serialize};

use super::arch::ArchSpec;
use super::network::{argmax, EpochStats, Model};
use super::optim::{rmsprop_step, RmsProp, RmsPropState};
use crate::dataset::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::rng::{derive_seed, shuffle, SplitMix64};
use crate::scalar::Real;

fn default_epochs() -> usize {
    10
}
fn default_batch() -> usize {
    32
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub optimizer: RmsProp,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "yes")]
    pub shuffle: bool,
    /// Return the weights of the epoch with the best validation accuracy
    /// (earliest on ties) instead of the last epoch's.
    #[serde(default = "yes")]
    pub keep_best: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { optimizer: RmsProp::default(), epochs: default_epochs(), batch_size: default_batch(), seed: 0, shuffle: true, keep_best: true }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.optimizer.validate()?;
        if self.epochs == 0 {
            return Err(Error::param("epochs", "must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::param("batch_size", "must be positive"));
        }
        Ok(())
    }
}

/// Accuracy and confusion counts (`confusion[true][predicted]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub correct: usize,
    pub n: usize,
    pub confusion: Vec<Vec<usize>>,
}

impl Metrics {
    pub fn from_predictions(num_classes: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut confusion = vec![vec![0; num_classes]; num_classes];
        let mut n = 0;
        for (truth, pred) in pairs {
            confusion[truth][pred] += 1;
            n += 1;
        }
        let correct = (0..num_classes).map(|k| confusion[k][k]).sum();
        let accuracy = if n == 0 { 0.0 } else { correct as f64 / n as f64 };
        Self { accuracy, correct, n, confusion }
    }
}

/// Argmax accuracy and confusion matrix on one split.
pub fn evaluate<T: Real>(model: &Model<T>, ds: &LabeledDataset<T>, split: Split) -> Result<Metrics> {
    let items: Vec<_> = ds.split(split).collect();
    if items.is_empty() {
        return Err(Error::Dataset(format!("split `{}` is empty", split.name())));
    }
    let images: Vec<&ImageTensor<T>> = items.iter().map(|it| &it.image).collect();
    let logits = model.forward(&images)?;
    Ok(Metrics::from_predictions(
        model.num_classes(),
        items.iter().zip(&logits).map(|(it, z)| (it.label, argmax(z))),
    ))
}

/// Train a freshly initialized network with RMSprop.
///
/// Fully determined by `(ds, arch, cfg)`: weights come from `cfg.seed`, and each
/// epoch's visiting order from a stream derived from `cfg.seed` and the epoch number.
pub fn train<T: Real>(ds: &LabeledDataset<T>, arch: &ArchSpec, cfg: &TrainConfig) -> Result<Model<T>> {
    cfg.validate()?;
    arch.validate()?;
    if ds.num_classes() != arch.num_classes {
        return Err(Error::Dataset(format!(
            "dataset has {} classes, architecture expects {}",
            ds.num_classes(),
            arch.num_classes
        )));
    }
    let train_idx: Vec<usize> = (0..ds.items.len()).filter(|&i| ds.items[i].split == Split::Train).collect();
    if train_idx.is_empty() || ds.count(Split::Val) == 0 {
        return Err(Error::Dataset("train and val splits must both be non-empty".into()));
    }
    for (k, name) in ds.class_names.iter().enumerate() {
        if !train_idx.iter().any(|&i| ds.items[i].label == k) {
            return Err(Error::Dataset(format!("class `{name}` has no training images")));
        }
    }
    let mut model = Model::init(arch.clone(), cfg.seed)?;
    let mut state = RmsPropState::zeros_like(&model.params);
    let mut order = train_idx;
    let mut best: Option<(f64, Vec<Vec<T>>)> = None;
    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            shuffle(&mut order, &mut SplitMix64::new(derive_seed(cfg.seed, &[epoch as u64 + 1])));
        }
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let images: Vec<&ImageTensor<T>> = batch.iter().map(|&i| &ds.items[i].image).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| ds.items[i].label).collect();
            let (loss, grads, logits) = model.loss_grads_logits(&images, &labels)?;
            let finite = loss.is_finite() && grads.iter().flatten().all(|g| g.is_finite());
            if !finite {
                return Err(Error::Numerical { epoch, batch: b });
            }
            loss_sum += loss * batch.len() as f64;
            correct += logits.iter().zip(&labels).filter(|(z, &l)| argmax(z) == l).count();
            rmsprop_step(&mut model.params, &grads, &mut state, &cfg.optimizer);
        }
        let val = evaluate(&model, ds, Split::Val)?;
        model.history.push(EpochStats {
            epoch: epoch + 1,
            train_loss: loss_sum / order.len() as f64,
            train_acc: correct as f64 / order.len() as f64,
            val_acc: val.accuracy,
        });
        if cfg.keep_best && best.as_ref().map_or(true, |(acc, _)| val.accuracy > *acc) {
            best = Some((val.accuracy, model.params.clone()));
        }
    }
    if let Some((_, params)) = best {
        model.params = params;
    }
    Ok(model)
}
