//! Synthetic glyph datasets with injectable capture bias.
//!
//! Every image is a noisy background with one anti-aliased glyph whose shape
//! identifies the class. Glyphs are scaled to equal ink area and never touch the
//! top-left probe square, so the probe and the pixel histogram carry class
//! signal only when a bias channel puts it there.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::dataset::{split_for_rank, Item, LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::image::ImageTensor;
use crate::rng::{derive_seed, shuffle, SplitMix64};
use crate::transforms::PROBE_SIZE;
use crate::Dataset;

const SPLIT_TAG: u64 = 0x5350_4c49;
const TEXTURE_TAG: u64 = 0x5445_5854;
const IMAGE_TAG: u64 = 0x494d_4147;

/// Ink area every glyph is scaled to, in unit-radius coordinates.
const GLYPH_AREA: f64 = 1.2;
/// Supersampling factor per axis for anti-aliasing.
const AA: usize = 4;
const MAX_PLACEMENT_TRIES: usize = 10_000;

pub const WATERMARK_SIZE: usize = 6;
pub const WATERMARK_OFFSET: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Glyph {
    Disk,
    Square,
    Triangle,
    Cross,
    Ring,
    Diamond,
    Saltire,
    Hexagon,
    Star,
    Frame,
    Bar,
    Tee,
    Ell,
    Semicircle,
    Crescent,
    Hourglass,
    Chevron,
    Pentagon,
    Dots,
    Column,
}

impl Glyph {
    pub const ALL: [Glyph; 20] = [
        Glyph::Disk,
        Glyph::Square,
        Glyph::Triangle,
        Glyph::Cross,
        Glyph::Ring,
        Glyph::Diamond,
        Glyph::Saltire,
        Glyph::Hexagon,
        Glyph::Star,
        Glyph::Frame,
        Glyph::Bar,
        Glyph::Tee,
        Glyph::Ell,
        Glyph::Semicircle,
        Glyph::Crescent,
        Glyph::Hourglass,
        Glyph::Chevron,
        Glyph::Pentagon,
        Glyph::Dots,
        Glyph::Column,
    ];

    pub fn name(self) -> String {
        serde_json::to_value(self).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
    }

    /// Membership test in glyph coordinates (unit disk, y pointing down).
    pub fn contains(self, u: f64, v: f64) -> bool {
        let r = (u * u + v * v).sqrt();
        match self {
            Glyph::Disk => r <= 0.62,
            Glyph::Square => u.abs() <= 0.55 && v.abs() <= 0.55,
            Glyph::Triangle => in_polygon(&regular(3, 0.85, -90.0), u, v),
            Glyph::Cross => plus(u, v, 0.2, 0.85),
            Glyph::Ring => (0.5..=0.85).contains(&r),
            Glyph::Diamond => u.abs() + v.abs() <= 0.8,
            Glyph::Saltire => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                plus(s * (u + v), s * (v - u), 0.2, 0.85)
            }
            Glyph::Hexagon => in_polygon(&regular(6, 0.7, 0.0), u, v),
            Glyph::Star => in_polygon(&star(), u, v),
            Glyph::Frame => {
                let m = u.abs().max(v.abs());
                (0.4..=0.7).contains(&m)
            }
            Glyph::Bar => u.abs() <= 0.9 && v.abs() <= 0.3,
            Glyph::Tee => {
                (u.abs() <= 0.75 && (v + 0.55).abs() <= 0.2) || (u.abs() <= 0.2 && (-0.55..=0.8).contains(&v))
            }
            Glyph::Ell => {
                ((u + 0.45).abs() <= 0.2 && v.abs() <= 0.8) || ((v - 0.6).abs() <= 0.2 && (-0.65..=0.7).contains(&u))
            }
            Glyph::Semicircle => {
                let w = v - 0.3;
                w <= 0.0 && u * u + w * w <= 0.85 * 0.85
            }
            Glyph::Crescent => r <= 0.8 && (u - 0.35).powi(2) + v * v > 0.65 * 0.65,
            Glyph::Hourglass => v.abs() <= 0.8 && u.abs() <= 0.8 * v.abs(),
            Glyph::Chevron => in_polygon(&[(-0.8, -0.5), (0.0, 0.3), (0.8, -0.5), (0.8, 0.1), (0.0, 0.85), (-0.8, 0.1)], u, v),
            Glyph::Pentagon => in_polygon(&regular(5, 0.75, -90.0), u, v),
            Glyph::Dots => (u - 0.45).powi(2) + v * v <= 0.35 * 0.35 || (u + 0.45).powi(2) + v * v <= 0.35 * 0.35,
            Glyph::Column => u.abs() <= 0.22 && v.abs() <= 0.9,
        }
    }

    /// Ink area and bounding radius of the raw shape, by grid integration.
    fn geometry(self) -> (f64, f64) {
        let n = 400;
        let step = 2.4 / n as f64;
        let mut hits = 0usize;
        let mut radius: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let u = -1.2 + (j as f64 + 0.5) * step;
                let v = -1.2 + (i as f64 + 0.5) * step;
                if self.contains(u, v) {
                    hits += 1;
                    radius = radius.max((u * u + v * v).sqrt() + step);
                }
            }
        }
        (hits as f64 * step * step, radius)
    }
}

fn plus(u: f64, v: f64, half_width: f64, reach: f64) -> bool {
    (u.abs() <= half_width && v.abs() <= reach) || (v.abs() <= half_width && u.abs() <= reach)
}

fn regular(n: usize, radius: f64, start_deg: f64) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let a = (start_deg + 360.0 * k as f64 / n as f64).to_radians();
            (radius * a.cos(), radius * a.sin())
        })
        .collect()
}

fn star() -> Vec<(f64, f64)> {
    (0..10)
        .map(|k| {
            let a = (-90.0 + 36.0 * k as f64).to_radians();
            let r = if k % 2 == 0 { 0.95 } else { 0.42 };
            (r * a.cos(), r * a.sin())
        })
        .collect()
}

/// Even-odd crossing test.
fn in_polygon(poly: &[(f64, f64)], x: f64, y: f64) -> bool {
    let mut inside = false;
    let mut j = poly.len() - 1;
    for i in 0..poly.len() {
        let (xi, yi) = poly[i];
        let (xj, yj) = poly[j];
        if (yi > y) != (yj > y) && x < (xj - xi) * (y - yi) / (yj - yi) + xi {
            inside = !inside;
        }
        j = i;
    }
    inside
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Jitter {
    /// Largest offset of the glyph centre from the image centre, in pixels.
    #[serde(default = "default_shift")]
    pub max_shift: f64,
    #[serde(default = "default_scale")]
    pub scale: [f64; 2],
    /// Rotation range in degrees, symmetric around zero.
    #[serde(default = "default_rotation")]
    pub rotation: f64,
}

fn default_shift() -> f64 {
    12.0
}
fn default_scale() -> [f64; 2] {
    [0.85, 1.15]
}
fn default_rotation() -> f64 {
    15.0
}

impl Default for Jitter {
    fn default() -> Self {
        Self { max_shift: default_shift(), scale: default_scale(), rotation: default_rotation() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub num_classes: usize,
    #[serde(default = "default_per_class")]
    pub per_class: usize,
    #[serde(default = "default_size")]
    pub image_size: [usize; 2],
    /// Glyph per class; defaults to the first `num_classes` of [`Glyph::ALL`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shapes: Option<Vec<Glyph>>,
    /// Nominal glyph diameter in pixels before scale jitter.
    #[serde(default = "default_glyph_size")]
    pub glyph_size: f64,
    #[serde(default)]
    pub jitter: Jitter,
    #[serde(default = "default_background")]
    pub background_level: f64,
    #[serde(default = "default_glyph_level")]
    pub glyph_level: f64,
    /// Standard deviation of the i.i.d. Gaussian pixel noise.
    #[serde(default = "default_noise")]
    pub noise_std: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_per_class() -> usize {
    100
}
fn default_size() -> [usize; 2] {
    [64, 64]
}
fn default_glyph_size() -> f64 {
    28.0
}
fn default_background() -> f64 {
    0.5
}
fn default_glyph_level() -> f64 {
    0.15
}
fn default_noise() -> f64 {
    0.03
}

impl SynthSpec {
    pub fn new(num_classes: usize, per_class: usize, seed: u64) -> Self {
        Self {
            num_classes,
            per_class,
            image_size: default_size(),
            shapes: None,
            glyph_size: default_glyph_size(),
            jitter: Jitter::default(),
            background_level: default_background(),
            glyph_level: default_glyph_level(),
            noise_std: default_noise(),
            seed,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|source| Error::Json { context: "synth spec".into(), source })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn glyphs(&self) -> Vec<Glyph> {
        match &self.shapes {
            Some(s) => s[..self.num_classes.min(s.len())].to_vec(),
            None => Glyph::ALL[..self.num_classes.min(Glyph::ALL.len())].to_vec(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=20).contains(&self.num_classes) {
            return Err(Error::param("num_classes", format!("must be in 2..=20, got {}", self.num_classes)));
        }
        if let Some(shapes) = &self.shapes {
            if shapes.len() < self.num_classes {
                return Err(Error::param(
                    "shapes",
                    format!("{} shapes listed for {} classes", shapes.len(), self.num_classes),
                ));
            }
            let used = &shapes[..self.num_classes];
            if (1..used.len()).any(|i| used[..i].contains(&used[i])) {
                return Err(Error::param("shapes", "classes must use distinct shapes"));
            }
        }
        if self.per_class < 10 {
            return Err(Error::param("per_class", format!("must be at least 10, got {}", self.per_class)));
        }
        let [h, w] = self.image_size;
        if h <= PROBE_SIZE || w <= PROBE_SIZE {
            return Err(Error::param("image_size", format!("sides must exceed {PROBE_SIZE}, got {h}x{w}")));
        }
        for (field, v) in [("background_level", self.background_level), ("glyph_level", self.glyph_level)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(field, format!("must lie in [0,1], got {v}")));
            }
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::param("noise_std", format!("must be non-negative, got {}", self.noise_std)));
        }
        if !(self.glyph_size > 0.0 && self.glyph_size.is_finite()) {
            return Err(Error::param("glyph_size", format!("must be positive, got {}", self.glyph_size)));
        }
        let j = &self.jitter;
        if !(j.max_shift >= 0.0 && j.max_shift.is_finite()) {
            return Err(Error::param("jitter.max_shift", format!("must be non-negative, got {}", j.max_shift)));
        }
        if !(j.scale[0] > 0.0 && j.scale[0] <= j.scale[1] && j.scale[1].is_finite()) {
            return Err(Error::param("jitter.scale", format!("need 0 < lo <= hi, got {:?}", j.scale)));
        }
        if !(j.rotation >= 0.0 && j.rotation.is_finite()) {
            return Err(Error::param("jitter.rotation", format!("must be non-negative, got {}", j.rotation)));
        }
        let largest = self
            .glyphs()
            .iter()
            .map(|g| scaled_radius(*g) * self.glyph_size / 2.0 * j.scale[1])
            .fold(0.0, f64::max);
        if 2.0 * largest > h.min(w) as f64 {
            return Err(Error::param(
                "glyph_size",
                format!("glyph needs {:.1} px but the image is {h}x{w}", 2.0 * largest),
            ));
        }
        if largest > (h.max(w) - PROBE_SIZE) as f64 / 2.0 {
            return Err(Error::param("glyph_size", "glyph cannot be placed clear of the probe region"));
        }
        Ok(())
    }
}

/// Bounding radius of a glyph after area normalisation.
fn scaled_radius(g: Glyph) -> f64 {
    let (area, radius) = g.geometry();
    radius * (GLYPH_AREA / area).sqrt()
}

/// Capture bias added on top of the rendered glyph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BiasSpec {
    None {
        #[serde(default)]
        strength: f64,
    },
    /// `6 x 6` block at `(2,2)` shifted by `strength * delta * (2k/(C-1) - 1)` for class `k`,
    /// so class 0 is darkened and the last class brightened by `strength * delta`.
    CornerWatermark {
        strength: f64,
        #[serde(default = "default_delta")]
        delta: f64,
    },
    /// Fixed per-class Gaussian texture scaled by `strength * amplitude`.
    NoiseSignature {
        strength: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
    },
    /// Whole-image shift of `strength * offset * k / (C-1)` for class `k`.
    DcOffset {
        strength: f64,
        #[serde(default = "default_offset")]
        offset: f64,
    },
}

fn default_delta() -> f64 {
    0.35
}
fn default_amplitude() -> f64 {
    0.05
}
fn default_offset() -> f64 {
    0.2
}

impl Default for BiasSpec {
    fn default() -> Self {
        BiasSpec::None { strength: 0.0 }
    }
}

impl BiasSpec {
    pub fn watermark(strength: f64) -> Self {
        BiasSpec::CornerWatermark { strength, delta: default_delta() }
    }

    pub fn noise_signature(strength: f64) -> Self {
        BiasSpec::NoiseSignature { strength, amplitude: default_amplitude() }
    }

    pub fn dc_offset(strength: f64) -> Self {
        BiasSpec::DcOffset { strength, offset: default_offset() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self =
            serde_json::from_str(text).map_err(|source| Error::Json { context: "bias spec".into(), source })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn strength(&self) -> f64 {
        match *self {
            BiasSpec::None { strength }
            | BiasSpec::CornerWatermark { strength, .. }
            | BiasSpec::NoiseSignature { strength, .. }
            | BiasSpec::DcOffset { strength, .. } => strength,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.strength();
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::param("strength", format!("must lie in [0,1], got {s}")));
        }
        let (field, v) = match *self {
            BiasSpec::None { .. } => return Ok(()),
            BiasSpec::CornerWatermark { delta, .. } => ("delta", delta),
            BiasSpec::NoiseSignature { amplitude, .. } => ("amplitude", amplitude),
            BiasSpec::DcOffset { offset, .. } => ("offset", offset),
        };
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::param(field, format!("must lie in (0,1], got {v}")));
        }
        Ok(())
    }

    /// True when the bias changes at least one pixel.
    pub fn is_active(&self) -> bool {
        !matches!(self, BiasSpec::None { .. }) && self.strength() > 0.0
    }

    /// Additive per-pixel signal for class `k`, or `None` when inactive.
    fn signal(&self, spec: &SynthSpec, k: usize) -> Option<Vec<f64>> {
        if !self.is_active() {
            return None;
        }
        let [h, w] = spec.image_size;
        let c = spec.num_classes as f64;
        let s = self.strength();
        let mut out = vec![0.0; h * w];
        match *self {
            BiasSpec::None { .. } => unreachable!("inactive"),
            BiasSpec::CornerWatermark { delta, .. } => {
                let d = s * delta * (2.0 * k as f64 / (c - 1.0) - 1.0);
                for y in WATERMARK_OFFSET..(WATERMARK_OFFSET + WATERMARK_SIZE).min(h) {
                    for x in WATERMARK_OFFSET..(WATERMARK_OFFSET + WATERMARK_SIZE).min(w) {
                        out[y * w + x] = d;
                    }
                }
            }
            BiasSpec::NoiseSignature { amplitude, .. } => {
                let mut rng = SplitMix64::new(derive_seed(spec.seed, &[TEXTURE_TAG, k as u64]));
                out.iter_mut().for_each(|v| *v = s * amplitude * rng.normal());
            }
            BiasSpec::DcOffset { offset, .. } => {
                let d = s * offset * k as f64 / (c - 1.0);
                out.iter_mut().for_each(|v| *v = d);
            }
        }
        Some(out)
    }
}

/// Generated dataset plus clamping statistics.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub dataset: Dataset,
    pub spec: SynthSpec,
    pub bias: BiasSpec,
    /// Pixels whose value fell outside [0,1] before clamping.
    pub clamped: u64,
    pub pixels: u64,
}

impl Synthetic {
    pub fn clamp_fraction(&self) -> f64 {
        self.clamped as f64 / self.pixels.max(1) as f64
    }

    /// Manifest fields describing the generator.
    pub fn manifest_fields(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("generator".into(), Value::from("synthbias"));
        m.insert("seed".into(), Value::from(self.spec.seed));
        m.insert("synth_spec".into(), serde_json::to_value(&self.spec).expect("spec serializes"));
        m.insert("bias_spec".into(), serde_json::to_value(&self.bias).expect("bias serializes"));
        m.insert("clamped_pixels".into(), Value::from(self.clamped));
        m.insert("total_pixels".into(), Value::from(self.pixels));
        m
    }

    /// Write `root/<class>/<image>.png` and `manifest.json`.
    pub fn save(&self, root: impl AsRef<Path>) -> Result<()> {
        crate::dataset::save_dataset(&self.dataset, root, self.manifest_fields())
    }
}

struct Placement {
    cx: f64,
    cy: f64,
    radius: f64,
    cos: f64,
    sin: f64,
}

fn place(spec: &SynthSpec, bound: f64, rng: &mut SplitMix64) -> Result<Placement> {
    let [h, w] = spec.image_size;
    let j = &spec.jitter;
    let scale = rng.uniform(j.scale[0], j.scale[1]);
    let theta = rng.uniform(-j.rotation, j.rotation).to_radians();
    let radius = spec.glyph_size / 2.0 * scale;
    let reach = bound * radius;
    let probe = PROBE_SIZE as f64;
    for _ in 0..MAX_PLACEMENT_TRIES {
        let cx = (w as f64 / 2.0 + rng.uniform(-j.max_shift, j.max_shift)).clamp(reach, w as f64 - reach);
        let cy = (h as f64 / 2.0 + rng.uniform(-j.max_shift, j.max_shift)).clamp(reach, h as f64 - reach);
        if cx - reach >= probe || cy - reach >= probe {
            return Ok(Placement { cx, cy, radius, cos: theta.cos(), sin: theta.sin() });
        }
    }
    Err(Error::param("jitter.max_shift", "no glyph position clear of the probe region"))
}

fn render(
    spec: &SynthSpec,
    glyph: Glyph,
    norm: f64,
    bound: f64,
    bias: Option<&[f64]>,
    seed: u64,
) -> Result<(ImageTensor<f32>, u64)> {
    let [h, w] = spec.image_size;
    let mut rng = SplitMix64::new(seed);
    let p = place(spec, bound, &mut rng)?;
    let reach = bound * p.radius;
    let x_lo = (p.cx - reach).floor().max(0.0) as usize;
    let x_hi = ((p.cx + reach).ceil() as usize).min(w);
    let y_lo = (p.cy - reach).floor().max(0.0) as usize;
    let y_hi = ((p.cy + reach).ceil() as usize).min(h);
    let mut values = vec![spec.background_level; h * w];
    let ink = spec.glyph_level - spec.background_level;
    for y in y_lo..y_hi {
        for x in x_lo..x_hi {
            let mut hits = 0;
            for sy in 0..AA {
                for sx in 0..AA {
                    let dx = (x as f64 + (sx as f64 + 0.5) / AA as f64 - p.cx) / p.radius;
                    let dy = (y as f64 + (sy as f64 + 0.5) / AA as f64 - p.cy) / p.radius;
                    let u = p.cos * dx + p.sin * dy;
                    let v = -p.sin * dx + p.cos * dy;
                    if glyph.contains(u / norm, v / norm) {
                        hits += 1;
                    }
                }
            }
            values[y * w + x] += ink * hits as f64 / (AA * AA) as f64;
        }
    }
    if let Some(b) = bias {
        values.iter_mut().zip(b).for_each(|(v, d)| *v += d);
    }
    if spec.noise_std > 0.0 {
        values.iter_mut().for_each(|v| *v += spec.noise_std * rng.normal());
    }
    let clamped = values.iter().filter(|v| !(0.0..=1.0).contains(*v)).count() as u64;
    let data = values.into_iter().map(|v| v.clamp(0.0, 1.0) as f32).collect();
    Ok((ImageTensor::new(h, w, 1, data)?.quantized(), clamped))
}

/// Render `per_class` images per class with a seeded 70/15/15 split per class.
///
/// Images are quantized to 8 bits so the in-memory dataset equals what
/// [`Synthetic::save`] writes.
pub fn generate(spec: &SynthSpec, bias: &BiasSpec) -> Result<Synthetic> {
    spec.validate()?;
    bias.validate()?;
    let glyphs = spec.glyphs();
    let class_names: Vec<String> = glyphs.iter().map(|g| g.name()).collect();
    let geometry: Vec<(f64, f64)> = glyphs
        .iter()
        .map(|g| {
            let (area, radius) = g.geometry();
            let norm = (GLYPH_AREA / area).sqrt();
            (norm, radius * norm)
        })
        .collect();
    let signals: Vec<Option<Vec<f64>>> = (0..spec.num_classes).map(|k| bias.signal(spec, k)).collect();

    let jobs: Vec<(usize, usize)> =
        (0..spec.num_classes).flat_map(|k| (0..spec.per_class).map(move |i| (k, i))).collect();
    let rendered = jobs
        .par_iter()
        .map(|&(k, i)| {
            let (norm, bound) = geometry[k];
            let seed = derive_seed(spec.seed, &[IMAGE_TAG, k as u64, i as u64]);
            render(spec, glyphs[k], norm, bound, signals[k].as_deref(), seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut splits = vec![Split::Train; jobs.len()];
    for k in 0..spec.num_classes {
        let mut order: Vec<usize> = (0..spec.per_class).collect();
        shuffle(&mut order, &mut SplitMix64::new(derive_seed(spec.seed, &[SPLIT_TAG, k as u64])));
        for (rank, &i) in order.iter().enumerate() {
            splits[k * spec.per_class + i] = split_for_rank(rank, spec.per_class);
        }
    }

    let mut clamped = 0;
    let mut items = Vec::with_capacity(jobs.len());
    for ((&(k, i), (image, c)), split) in jobs.iter().zip(rendered).zip(splits) {
        clamped += c;
        items.push(Item { path: format!("{}/{}_{i:04}.png", class_names[k], class_names[k]), label: k, split, image });
    }
    let [h, w] = spec.image_size;
    Ok(Synthetic {
        dataset: LabeledDataset { id: format!("synth-{}", spec.seed), class_names, items },
        spec: spec.clone(),
        bias: bias.clone(),
        clamped,
        pixels: (jobs.len() * h * w) as u64,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub name: String,
    pub count: usize,
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeCount {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub id: String,
    pub total: usize,
    pub classes: Vec<ClassSummary>,
    pub splits: BTreeMap<Split, usize>,
    pub sizes: Vec<SizeCount>,
}

/// Per-class counts and pixel statistics, split counts and image sizes.
pub fn describe<T: crate::Real>(ds: &LabeledDataset<T>) -> DatasetSummary {
    let mut classes: Vec<ClassSummary> = ds
        .class_names
        .iter()
        .map(|name| ClassSummary { name: name.clone(), count: 0, mean: 0.0, std: 0.0 })
        .collect();
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); ds.num_classes()];
    let mut splits: BTreeMap<Split, usize> = Split::ALL.iter().map(|&s| (s, 0)).collect();
    let mut sizes: BTreeMap<(usize, usize, usize), usize> = BTreeMap::new();
    for it in &ds.items {
        classes[it.label].count += 1;
        *splits.entry(it.split).or_default() += 1;
        *sizes.entry(it.image.shape()).or_default() += 1;
        let s = &mut sums[it.label];
        for &v in it.image.data() {
            let v = v.f64();
            s.0 += v;
            s.1 += v * v;
        }
        s.2 += it.image.data().len();
    }
    for (c, (sum, sq, n)) in classes.iter_mut().zip(sums) {
        if n > 0 {
            c.mean = sum / n as f64;
            c.std = (sq / n as f64 - c.mean * c.mean).max(0.0).sqrt();
        }
    }
    DatasetSummary {
        id: ds.id.clone(),
        total: ds.items.len(),
        classes,
        splits,
        sizes: sizes
            .into_iter()
            .map(|((height, width, channels), count)| SizeCount { height, width, channels, count })
            .collect(),
    }
}
