//! `BLNS` checkpoint files and history CSV.
//!
//! Layout (little-endian): magic `BLNS`, u32 version, u32 length of the
//! architecture JSON, the JSON bytes, then every parameter tensor as raw f32
//! in declaration order.

use std::fmt::Write;
use std::path::Path;

use super::arch::ArchSpec;
use super::network::{EpochStats, Model};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAGIC: &[u8; 4] = b"BLNS";
pub const FORMAT_VERSION: u32 = 1;

pub fn checkpoint_bytes<T: Real>(model: &Model<T>) -> Vec<u8> {
    let arch = serde_json::to_vec(&model.arch).expect("arch serializes");
    let mut out = Vec::with_capacity(12 + arch.len() + 4 * model.arch.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(arch.len() as u32).to_le_bytes());
    out.extend_from_slice(&arch);
    for v in model.params.iter().flatten() {
        out.extend_from_slice(&(v.f64() as f32).to_le_bytes());
    }
    out
}

pub fn model_from_bytes<T: Real>(bytes: &[u8], origin: &Path) -> Result<Model<T>> {
    let bad = |reason: &str| Error::Format { path: origin.to_path_buf(), reason: reason.into() };
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("missing BLNS magic"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    if word(4) != FORMAT_VERSION {
        return Err(bad(&format!("unsupported checkpoint version {}", word(4))));
    }
    let len = word(8) as usize;
    let json = bytes.get(12..12 + len).ok_or_else(|| bad("truncated architecture header"))?;
    let arch: ArchSpec = serde_json::from_slice(json)
        .map_err(|source| Error::Json { context: format!("{} architecture", origin.display()), source })?;
    arch.validate()?;
    let mut body = bytes[12 + len..].chunks_exact(4);
    let expected = arch.param_count();
    if bytes.len() - 12 - len != 4 * expected {
        return Err(bad(&format!("expected {expected} parameters")));
    }
    let params = arch
        .param_shapes()
        .iter()
        .map(|(shape, _)| {
            (0..shape.iter().product::<usize>())
                .map(|_| T::of(f32::from_le_bytes(body.next().expect("length checked").try_into().expect("4 bytes")) as f64))
                .collect()
        })
        .collect();
    Model::new(arch, params)
}

pub fn save_checkpoint<T: Real>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<Model<T>> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes, path)
}

/// `epoch,train_loss,train_acc,val_acc` rows.
pub fn history_csv(history: &[EpochStats]) -> String {
    let mut out = String::from("epoch,train_loss,train_acc,val_acc\n");
    for h in history {
        let _ = writeln!(out, "{},{:.6},{:.6},{:.6}", h.epoch, h.train_loss, h.train_acc, h.val_acc);
    }
    out
}
