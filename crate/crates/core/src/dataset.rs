//! Labeled image collections and the on-disk `root/<class>/<image>.png` layout.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::image::{load_image, resize, save_image, to_grayscale, ImageTensor};
use crate::rng::fnv1a64;
use crate::scalar::Real;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Item<T> {
    /// Relative path with `/` separators, e.g. `circle/circle_0003.png`.
    pub path: String,
    pub label: usize,
    pub split: Split,
    pub image: ImageTensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset<T> {
    pub id: String,
    pub class_names: Vec<String>,
    pub items: Vec<Item<T>>,
}

/// 70/15/15 split sizes for `n` items: `(round(0.7n), round(0.15n), rest)`.
pub fn split_counts(n: usize) -> (usize, usize, usize) {
    let train = (0.7 * n as f64).round() as usize;
    let val = ((0.15 * n as f64).round() as usize).min(n - train);
    (train, val, n - train - val)
}

/// Split for position `i` of an already shuffled run of `n` items.
pub fn split_for_rank(i: usize, n: usize) -> Split {
    let (train, val, _) = split_counts(n);
    if i < train {
        Split::Train
    } else if i < train + val {
        Split::Val
    } else {
        Split::Test
    }
}

impl<T: Real> LabeledDataset<T> {
    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &Item<T>> {
        self.items.iter().filter(move |it| it.split == split)
    }

    pub fn count(&self, split: Split) -> usize {
        self.split(split).count()
    }

    /// Grayscale and resize every image to `h x w`.
    pub fn prepared(&self, h: usize, w: usize) -> Result<Self> {
        let images = self
            .items
            .par_iter()
            .map(|it| resize(&to_grayscale(&it.image), h, w))
            .collect::<Result<Vec<_>>>()?;
        let mut out = self.clone();
        out.items.iter_mut().zip(images).for_each(|(it, img)| it.image = img);
        Ok(out)
    }

    /// Split assignment keyed by relative path.
    pub fn split_map(&self) -> BTreeMap<String, Split> {
        self.items.iter().map(|it| (it.path.clone(), it.split)).collect()
    }
}

fn is_image(path: &Path) -> bool {
    matches!(
        path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref(),
        Some("png" | "pgm" | "ppm")
    )
}

fn sorted_entries(dir: &Path) -> Result<Vec<std::fs::DirEntry>> {
    let mut entries = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .collect::<std::io::Result<Vec<_>>>()
        .map_err(|e| Error::io(dir, e))?;
    entries.sort_by_key(|e| e.file_name());
    Ok(entries)
}

/// Read `manifest.json` under `root`, if present.
pub fn read_manifest(root: &Path) -> Result<Option<Value>> {
    let path = root.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|source| Error::Json { context: path.display().to_string(), source })
}

/// Load `root/<class>/<image>` into memory.
///
/// Class ids follow the manifest's `classes` list when present, otherwise the
/// sorted directory names. Splits come from the manifest's `splits` map; images
/// it does not cover are split 70/15/15 per class in FNV-1a order of their paths.
pub fn load_dataset<T: Real>(root: impl AsRef<Path>) -> Result<LabeledDataset<T>> {
    let root = root.as_ref();
    let manifest = read_manifest(root)?;
    let mut class_names: Vec<String> = Vec::new();
    for entry in sorted_entries(root)? {
        if entry.path().is_dir() {
            class_names.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    if let Some(listed) = manifest.as_ref().and_then(|m| m.get("classes")).and_then(Value::as_array) {
        let listed: Vec<String> = listed.iter().filter_map(|v| v.as_str().map(String::from)).collect();
        if listed.iter().all(|c| class_names.contains(c)) && listed.len() == class_names.len() {
            class_names = listed;
        }
    }
    if class_names.is_empty() {
        return Err(Error::Dataset(format!("no class directories under {}", root.display())));
    }
    let manifest_splits: BTreeMap<String, Split> = manifest
        .as_ref()
        .and_then(|m| m.get("splits"))
        .map(|s| serde_json::from_value(s.clone()))
        .transpose()
        .map_err(|source| Error::Json { context: format!("{MANIFEST} splits"), source })?
        .unwrap_or_default();

    let mut files = Vec::new();
    for (label, class) in class_names.iter().enumerate() {
        for entry in sorted_entries(&root.join(class))? {
            let p = entry.path();
            if p.is_file() && is_image(&p) {
                files.push((label, format!("{class}/{}", entry.file_name().to_string_lossy())));
            }
        }
    }
    let images = files
        .par_iter()
        .map(|(_, rel)| {
            load_image::<T>(root.join(rel)).map_err(|e| Error::Item { path: rel.clone(), source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut items: Vec<Item<T>> = files
        .into_iter()
        .zip(images)
        .map(|((label, path), image)| Item { path, label, split: Split::Train, image })
        .collect();
    for label in 0..class_names.len() {
        let mut unassigned: Vec<usize> = Vec::new();
        for (i, it) in items.iter_mut().enumerate().filter(|(_, it)| it.label == label) {
            match manifest_splits.get(&it.path) {
                Some(&s) => it.split = s,
                None => unassigned.push(i),
            }
        }
        unassigned.sort_by_key(|&i| (fnv1a64(items[i].path.as_bytes()), items[i].path.clone()));
        let n = unassigned.len();
        for (rank, &i) in unassigned.iter().enumerate() {
            items[i].split = split_for_rank(rank, n);
        }
    }
    let id = root.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into());
    Ok(LabeledDataset { id, class_names, items })
}

/// Output path of an item: same relative path with a `.png` extension.
pub fn png_path(rel: &str) -> String {
    match rel.rsplit_once('.') {
        Some((stem, _)) if !stem.is_empty() && !stem.ends_with('/') => format!("{stem}.png"),
        _ => format!("{rel}.png"),
    }
}

/// Write every image as PNG plus a `manifest.json` with classes, splits and `extra` fields.
pub fn save_dataset<T: Real>(ds: &LabeledDataset<T>, root: impl AsRef<Path>, extra: Map<String, Value>) -> Result<()> {
    let root = root.as_ref();
    for class in &ds.class_names {
        let dir = root.join(class);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    ds.items
        .par_iter()
        .try_for_each(|it| save_image(&it.image, root.join(png_path(&it.path))))?;
    let splits: BTreeMap<String, Split> = ds.items.iter().map(|it| (png_path(&it.path), it.split)).collect();
    let mut manifest = extra;
    manifest.insert("classes".into(), serde_json::to_value(&ds.class_names).expect("strings serialize"));
    manifest.insert("splits".into(), serde_json::to_value(splits).expect("map serializes"));
    let path = root.join(MANIFEST);
    let text = serde_json::to_string_pretty(&Value::Object(manifest)).expect("json value serializes");
    std::fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
}
