//! Train-and-test audit over a catalogue of preprocessing conditions.
//!
//! Each condition trains a fresh network per seed and tests it against chance
//! with an exact binomial upper tail. Information-free conditions that beat
//! chance mean the dataset leaks class signal outside the object.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::dataset::{LabeledDataset, Split};
use crate::error::{Error, Result};
use crate::image::{resize, to_grayscale};
use crate::nn::{evaluate, train, ArchSpec, TrainConfig};
use crate::scalar::Real;
use crate::transforms::{apply_to_dataset, TransformSpec, WaveletFamily};

pub const REPORT_JSON: &str = "audit_report.json";
pub const REPORT_CSV: &str = "audit_report.csv";
pub const REPORT_SVG: &str = "audit_chart.svg";

/// Conditions run when a config does not list its own.
pub const DEFAULT_CONDITIONS: &[&str] = &[
    "raw",
    "cropped20",
    "scrambled@1",
    "scrambled@16",
    "scrambled@32",
    "fourier",
    "dwt_haar",
    "dwt_db4",
    "median5",
    "median5+fourier",
    "median5+dwt_haar",
    "cropped20+fourier",
    "cropped20+dwt_haar",
    "cropped20+dwt_db4",
    "cropped20+median5",
    "cropped20+median5+fourier",
    "cropped20+median5+dwt_haar",
];

/// Candidates for the wavelet side of the profile, in order of preference.
pub const WAVELET_CONDITIONS: [&str; 3] = ["dwt_haar", "dwt_db4", "median5+dwt_haar"];
pub const MEDIAN_CONDITION: &str = "median5";

/// Accuracy of uniform guessing.
pub fn chance_accuracy(num_classes: usize) -> Result<f64> {
    if num_classes < 2 {
        return Err(Error::param("num_classes", format!("need at least 2 classes, got {num_classes}")));
    }
    Ok(1.0 / num_classes as f64)
}

/// Exact upper tail `P(X >= k)` for `X ~ Binomial(n, p)`, summed in log space.
pub fn binomial_p_value(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if k > n {
        return 0.0;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    // ln C(n, k) built up as a sum of logs, then each later term from its predecessor.
    let mut term = (1..=k).map(|j| ((n - k + j) as f64 / j as f64).ln()).sum::<f64>() + k as f64 * lp + (n - k) as f64 * lq;
    let mut logs = Vec::with_capacity((n - k + 1) as usize);
    logs.push(term);
    for i in k..n {
        term += ((n - i) as f64 / (i + 1) as f64).ln() + lp - lq;
        logs.push(term);
    }
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|&l| (l - top).exp()).sum();
    (top + sum.ln()).exp().clamp(0.0, 1.0)
}

/// Resolve a condition name such as `cropped20+median5+fourier`.
///
/// Names are `+`-joined steps: `raw`, `cropped<N>`, `scrambled@<tile>`,
/// `fourier`, `dwt_haar`/`dwt_db4` (optionally `@<levels>`), `median<window>`.
pub fn parse_condition(name: &str) -> Result<TransformSpec> {
    let mut steps = Vec::new();
    for part in name.split('+') {
        let bad = || Error::param("conditions", format!("unknown condition `{part}` in `{name}`"));
        let number = |s: &str| s.parse::<usize>().map_err(|_| bad());
        let step = if part == "raw" {
            TransformSpec::Identity
        } else if part == "fourier" {
            TransformSpec::fourier()
        } else if let Some(n) = part.strip_prefix("cropped") {
            let n = number(n)?;
            TransformSpec::CropBackground { x0: 0, y0: 0, w: n, h: n }
        } else if let Some(t) = part.strip_prefix("scrambled@") {
            TransformSpec::scramble(number(t)?)
        } else if let Some(rest) = part.strip_prefix("dwt_") {
            let (fam, levels) = match rest.split_once('@') {
                Some((f, l)) => (f, number(l)?),
                None => (rest, 1),
            };
            let family: WaveletFamily = serde_json::from_value(Value::from(fam)).map_err(|_| bad())?;
            TransformSpec::DwtCompose { family, levels }
        } else if let Some(w) = part.strip_prefix("median") {
            TransformSpec::median(number(w)?)
        } else {
            return Err(bad());
        };
        steps.push(step);
    }
    let spec = if steps.len() == 1 { steps.pop().expect("one step") } else { TransformSpec::Compose { steps } };
    spec.validate()?;
    Ok(spec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub transform: TransformSpec,
}

impl Condition {
    pub fn named(name: &str) -> Result<Self> {
        Ok(Self { name: name.to_string(), transform: parse_condition(name)? })
    }
}

fn default_alpha() -> f64 {
    0.01
}
fn default_ratio() -> f64 {
    2.0
}
fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfig")]
pub struct AuditConfig {
    pub conditions: Vec<Condition>,
    /// Network layout; `None` means MiniVGG at 64x64 sized to the dataset's classes.
    pub arch: Option<ArchSpec>,
    pub train: TrainConfig,
    pub alpha: f64,
    pub ratio_threshold: f64,
    pub seeds: Vec<u64>,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            conditions: DEFAULT_CONDITIONS.iter().map(|n| Condition::named(n).expect("catalogue parses")).collect(),
            arch: None,
            train: TrainConfig::default(),
            alpha: default_alpha(),
            ratio_threshold: default_ratio(),
            seeds: default_seeds(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    conditions: Option<Vec<Value>>,
    #[serde(default)]
    arch: Option<ArchSpec>,
    #[serde(default)]
    train: TrainConfig,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_ratio")]
    ratio_threshold: f64,
    #[serde(default = "default_seeds")]
    seeds: Vec<u64>,
}

fn condition_from_value(i: usize, v: &Value) -> Result<Condition> {
    let field = format!("conditions[{i}]");
    match v {
        Value::String(name) => Condition::named(name),
        Value::Object(map) => {
            if let Some(extra) = map.keys().find(|k| *k != "name" && *k != "transform") {
                return Err(Error::param(field, format!("unknown field `{extra}`")));
            }
            let name = map
                .get("name")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::param(&field, "missing string field `name`"))?;
            match map.get("transform") {
                None => Condition::named(name),
                Some(t) => {
                    let transform: TransformSpec = serde_json::from_value(t.clone())
                        .map_err(|e| Error::param(format!("{field}.transform"), e.to_string()))?;
                    transform.validate()?;
                    Ok(Condition { name: name.to_string(), transform })
                }
            }
        }
        _ => Err(Error::param(field, "expected a condition name or {name, transform}")),
    }
}

impl TryFrom<RawConfig> for AuditConfig {
    type Error = Error;

    fn try_from(raw: RawConfig) -> Result<Self> {
        let conditions = match raw.conditions {
            None => AuditConfig::default().conditions,
            Some(list) => list.iter().enumerate().map(|(i, v)| condition_from_value(i, v)).collect::<Result<_>>()?,
        };
        let cfg = AuditConfig {
            conditions,
            arch: raw.arch,
            train: raw.train,
            alpha: raw.alpha,
            ratio_threshold: raw.ratio_threshold,
            seeds: raw.seeds,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl AuditConfig {
    /// Parse and validate. Conditions may be names or `{name, transform}` objects.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|source| Error::Json { context: "audit config".into(), source })?;
        Self::try_from(raw)
    }

    pub fn with_conditions(names: &[&str]) -> Result<Self> {
        let conditions = names.iter().map(|n| Condition::named(n)).collect::<Result<_>>()?;
        Ok(Self { conditions, ..Self::default() })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::param("alpha", format!("must lie in (0,1), got {}", self.alpha)));
        }
        if !(self.ratio_threshold > 1.0 && self.ratio_threshold.is_finite()) {
            return Err(Error::param("ratio_threshold", format!("must exceed 1, got {}", self.ratio_threshold)));
        }
        if self.seeds.is_empty() {
            return Err(Error::param("seeds", "at least one seed is required"));
        }
        if (1..self.seeds.len()).any(|i| self.seeds[..i].contains(&self.seeds[i])) {
            return Err(Error::param("seeds", "seeds must be distinct"));
        }
        if !self.conditions.iter().any(|c| c.name == "raw") {
            return Err(Error::param("conditions", "the `raw` condition is required"));
        }
        for (i, c) in self.conditions.iter().enumerate() {
            if self.conditions[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::param("conditions", format!("duplicate condition `{}`", c.name)));
            }
            c.transform.validate()?;
        }
        if let Some(arch) = &self.arch {
            arch.validate()?;
        }
        self.train.validate()
    }

    /// Architecture for a dataset with `num_classes` classes.
    pub fn resolved_arch(&self, num_classes: usize) -> Result<ArchSpec> {
        match &self.arch {
            None => Ok(ArchSpec::mini_vgg(num_classes, 64)),
            Some(a) if a.num_classes == num_classes => Ok(a.clone()),
            Some(a) => Err(Error::param(
                "arch.num_classes",
                format!("architecture has {} classes, dataset has {num_classes}", a.num_classes),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub accuracy: f64,
    pub correct: usize,
    pub n: usize,
    pub p_value: f64,
    pub ratio: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub error: String,
}

/// Whether one seed clears both gates.
pub fn is_flagged(p_value: f64, ratio: f64, alpha: f64, ratio_threshold: f64) -> bool {
    p_value < alpha && ratio >= ratio_threshold
}

impl SeedResult {
    pub fn new(seed: u64, correct: usize, n: usize, chance: f64, alpha: f64, ratio_threshold: f64) -> Self {
        let accuracy = if n == 0 { 0.0 } else { correct as f64 / n as f64 };
        let p_value = binomial_p_value(correct as u64, n as u64, chance);
        let ratio = accuracy / chance;
        Self { seed, accuracy, correct, n, p_value, ratio, flagged: is_flagged(p_value, ratio, alpha, ratio_threshold) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub name: String,
    pub transform: TransformSpec,
    pub status: ConditionStatus,
    pub information_free: bool,
    pub seeds: Vec<SeedResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<SeedFailure>,
    /// Mean accuracy over successful seeds.
    pub mean_accuracy: f64,
    /// Test items per seed.
    pub n: usize,
    pub chance: f64,
    pub ratio: f64,
    /// Upper tail of the correct count pooled over seeds.
    pub p_value: f64,
    /// More than half of all configured seeds flagged.
    pub flagged: bool,
}

impl ConditionResult {
    pub fn summarize(condition: &Condition, chance: f64, seeds: Vec<SeedResult>, failures: Vec<SeedFailure>) -> Self {
        let total = seeds.len() + failures.len();
        let ok = !seeds.is_empty();
        let mean_accuracy = if ok { seeds.iter().map(|s| s.accuracy).sum::<f64>() / seeds.len() as f64 } else { 0.0 };
        let correct: usize = seeds.iter().map(|s| s.correct).sum();
        let trials: usize = seeds.iter().map(|s| s.n).sum();
        let flagged_seeds = seeds.iter().filter(|s| s.flagged).count();
        Self {
            name: condition.name.clone(),
            transform: condition.transform.clone(),
            status: if ok { ConditionStatus::Ok } else { ConditionStatus::Failed },
            information_free: condition.transform.is_information_free(),
            n: seeds.first().map_or(0, |s| s.n),
            chance,
            ratio: mean_accuracy / chance,
            p_value: if ok { binomial_p_value(correct as u64, trials as u64, chance) } else { 1.0 },
            flagged: ok && 2 * flagged_seeds > total,
            mean_accuracy,
            seeds,
            failures,
        }
    }

    fn seed_accuracy(&self, seed: u64) -> Option<f64> {
        self.seeds.iter().find(|s| s.seed == seed).map(|s| s.accuracy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasVerdict {
    NoneDetected,
    BiasDetected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileVerdict {
    ContextualSignal,
    BackgroundNoise,
    Inconclusive,
}

impl BiasVerdict {
    pub fn name(self) -> &'static str {
        match self {
            BiasVerdict::NoneDetected => "none_detected",
            BiasVerdict::BiasDetected => "bias_detected",
        }
    }
}

impl ProfileVerdict {
    pub fn name(self) -> &'static str {
        match self {
            ProfileVerdict::ContextualSignal => "contextual_signal",
            ProfileVerdict::BackgroundNoise => "background_noise",
            ProfileVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Mean paired difference `cond - raw` over shared seeds, and its standard error.
pub fn paired_delta(cond: &ConditionResult, raw: &ConditionResult) -> Option<(f64, f64)> {
    let diffs: Vec<f64> =
        cond.seeds.iter().filter_map(|s| raw.seed_accuracy(s.seed).map(|r| s.accuracy - r)).collect();
    if diffs.is_empty() {
        return None;
    }
    let m = diffs.len() as f64;
    let mean = diffs.iter().sum::<f64>() / m;
    let se = if diffs.len() < 2 {
        0.0
    } else {
        let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (m - 1.0);
        (var / m).sqrt()
    };
    Some((mean, se))
}

/// Slack for comparisons of `Δ` against `ε`, so exact ties are not decided by rounding.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Separate contextual signal from background noise by how accuracy moves under
/// wavelet and median preprocessing relative to `raw`.
///
/// With `Δ` the mean paired change and `ε` its standard error across seeds:
/// background noise if `Δ_w >= -ε_w`; contextual signal if both `Δ_w < -ε_w`
/// and `Δ_m < -ε_m`; inconclusive otherwise, including when only the median
/// condition is available.
pub fn profile_rule(results: &[ConditionResult]) -> Result<ProfileVerdict> {
    let find = |name: &str| results.iter().find(|r| r.name == name && r.status == ConditionStatus::Ok);
    let raw = find("raw").ok_or_else(|| Error::param("conditions", "profile needs a successful `raw` condition"))?;
    let wavelet = WAVELET_CONDITIONS.iter().find_map(|n| find(n));
    let median = find(MEDIAN_CONDITION);
    if wavelet.is_none() && median.is_none() {
        return Err(Error::param(
            "conditions",
            format!("profile needs one of {:?} or `{MEDIAN_CONDITION}`", WAVELET_CONDITIONS),
        ));
    }
    let Some((dw, ew)) = wavelet.and_then(|w| paired_delta(w, raw)) else {
        return Ok(ProfileVerdict::Inconclusive);
    };
    if dw >= -ew - TIE_TOLERANCE {
        return Ok(ProfileVerdict::BackgroundNoise);
    }
    match median.and_then(|m| paired_delta(m, raw)) {
        Some((dm, em)) if dm < -em - TIE_TOLERANCE => Ok(ProfileVerdict::ContextualSignal),
        _ => Ok(ProfileVerdict::Inconclusive),
    }
}

/// `bias_detected` exactly when an information-free condition is flagged.
pub fn bias_verdict(results: &[ConditionResult]) -> BiasVerdict {
    if results.iter().any(|r| r.information_free && r.flagged) {
        BiasVerdict::BiasDetected
    } else {
        BiasVerdict::NoneDetected
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub toolkit: String,
    pub version: String,
    pub num_classes: usize,
    pub class_names: Vec<String>,
    pub split_counts: [usize; 3],
    pub arch: ArchSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub dataset: String,
    pub config: AuditConfig,
    pub conditions: Vec<ConditionResult>,
    pub bias_verdict: BiasVerdict,
    pub profile_verdict: ProfileVerdict,
    pub version: String,
    pub provenance: Provenance,
}

/// Progress event for one finished `(condition, seed)` job.
pub struct JobDone<'a> {
    pub condition: &'a str,
    pub seed: u64,
    pub outcome: std::result::Result<&'a SeedResult, &'a str>,
}

/// Grayscale, transform, then resize to the network input.
pub fn condition_dataset<T: Real>(ds: &LabeledDataset<T>, spec: &TransformSpec, h: usize, w: usize) -> Result<LabeledDataset<T>> {
    let mut gray = ds.clone();
    gray.items.par_iter_mut().for_each(|it| it.image = to_grayscale(&it.image));
    let mut out = apply_to_dataset(&gray, spec)?;
    out.items
        .par_iter_mut()
        .try_for_each(|it| resize(&it.image, h, w).map(|img| it.image = img))?;
    Ok(out)
}

pub fn run_audit<T: Real>(ds: &LabeledDataset<T>, cfg: &AuditConfig) -> Result<AuditReport> {
    run_audit_with(ds, cfg, &|_| {})
}

/// Run every `(condition, seed)` job and assemble the report.
///
/// Jobs run on the current rayon pool; results are ordered by the config's
/// condition and seed order, so the report does not depend on scheduling.
/// A job that fails marks its seed failed; the audit only errors when no
/// condition has a successful seed.
pub fn run_audit_with<T: Real>(
    ds: &LabeledDataset<T>,
    cfg: &AuditConfig,
    progress: &(dyn Fn(JobDone<'_>) + Sync),
) -> Result<AuditReport> {
    cfg.validate()?;
    let chance = chance_accuracy(ds.num_classes())?;
    let arch = cfg.resolved_arch(ds.num_classes())?;
    let [h, w] = arch.input_size;
    if ds.count(Split::Test) == 0 {
        return Err(Error::Dataset("test split is empty".into()));
    }

    let prepared: Vec<std::result::Result<LabeledDataset<T>, String>> = cfg
        .conditions
        .iter()
        .map(|c| condition_dataset(ds, &c.transform, h, w).map_err(|e| e.to_string()))
        .collect();
    let jobs: Vec<(usize, u64)> =
        (0..cfg.conditions.len()).flat_map(|c| cfg.seeds.iter().map(move |&s| (c, s))).collect();
    let outcomes: Vec<std::result::Result<SeedResult, String>> = jobs
        .par_iter()
        .map(|&(c, seed)| {
            let outcome = prepared[c].as_ref().map_err(Clone::clone).and_then(|data| {
                let train_cfg = TrainConfig { seed, ..cfg.train.clone() };
                let model = train(data, &arch, &train_cfg).map_err(|e| e.to_string())?;
                let m = evaluate(&model, data, Split::Test).map_err(|e| e.to_string())?;
                Ok(SeedResult::new(seed, m.correct, m.n, chance, cfg.alpha, cfg.ratio_threshold))
            });
            progress(JobDone {
                condition: &cfg.conditions[c].name,
                seed,
                outcome: outcome.as_ref().map_err(String::as_str),
            });
            outcome
        })
        .collect();

    let mut conditions = Vec::with_capacity(cfg.conditions.len());
    for (ci, condition) in cfg.conditions.iter().enumerate() {
        let (mut seeds, mut failures) = (Vec::new(), Vec::new());
        for ((c, seed), outcome) in jobs.iter().zip(&outcomes) {
            if *c != ci {
                continue;
            }
            match outcome {
                Ok(r) => seeds.push(r.clone()),
                Err(e) => failures.push(SeedFailure { seed: *seed, error: e.clone() }),
            }
        }
        conditions.push(ConditionResult::summarize(condition, chance, seeds, failures));
    }
    if conditions.iter().all(|c| c.status == ConditionStatus::Failed) {
        let first = conditions.iter().flat_map(|c| &c.failures).next().map(|f| f.error.clone()).unwrap_or_default();
        return Err(Error::Audit(format!("every condition failed; first error: {first}")));
    }
    Ok(AuditReport {
        dataset: ds.id.clone(),
        config: cfg.clone(),
        bias_verdict: bias_verdict(&conditions),
        profile_verdict: profile_rule(&conditions).unwrap_or(ProfileVerdict::Inconclusive),
        version: crate::VERSION.to_string(),
        provenance: Provenance {
            toolkit: "biasprobe".into(),
            version: crate::VERSION.to_string(),
            num_classes: ds.num_classes(),
            class_names: ds.class_names.clone(),
            split_counts: [ds.count(Split::Train), ds.count(Split::Val), ds.count(Split::Test)],
            arch,
        },
        conditions,
    })
}

impl AuditReport {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|source| Error::Json { context: "audit report".into(), source })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// One row per condition and seed; failed seeds carry their error.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("condition,seed,status,accuracy,correct,n,chance,ratio,p_value,flagged,error\n");
        for c in &self.conditions {
            for s in &c.seeds {
                let _ = writeln!(
                    out,
                    "{},{},ok,{},{},{},{},{},{},{},",
                    csv_field(&c.name),
                    s.seed,
                    s.accuracy,
                    s.correct,
                    s.n,
                    c.chance,
                    s.ratio,
                    s.p_value,
                    s.flagged
                );
            }
            for f in &c.failures {
                let _ = writeln!(out, "{},{},failed,,,,{},,,false,{}", csv_field(&c.name), f.seed, c.chance, csv_field(&f.error));
            }
        }
        out
    }

    /// Write the JSON report, CSV table and SVG chart into `dir`, each atomically.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_atomic(&dir.join(REPORT_JSON), self.to_json().as_bytes())?;
        write_atomic(&dir.join(REPORT_CSV), self.to_csv().as_bytes())?;
        write_atomic(&dir.join(REPORT_SVG), crate::chart::render_chart(self).as_bytes())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(name: &str, accs: &[(u64, f64)]) -> ConditionResult {
        let seeds = accs
            .iter()
            .map(|&(seed, a)| {
                let n = 100;
                SeedResult::new(seed, (a * n as f64).round() as usize, n, 0.25, 0.01, 2.0)
            })
            .collect();
        ConditionResult::summarize(&Condition::named(name).unwrap(), 0.25, seeds, Vec::new())
    }

    #[test]
    fn chance_values() {
        assert_eq!(chance_accuracy(20).unwrap(), 0.05);
        assert!((chance_accuracy(7).unwrap() - 0.142857).abs() < 1e-6);
        assert_eq!(chance_accuracy(2).unwrap(), 0.5);
        assert!(chance_accuracy(1).is_err());
    }

    #[test]
    fn binomial_edges() {
        assert_eq!(binomial_p_value(0, 10, 0.3), 1.0);
        assert!((binomial_p_value(10, 10, 0.3) - 0.3f64.powi(10)).abs() < 1e-18);
        assert_eq!(binomial_p_value(11, 10, 0.3), 0.0);
        assert!((binomial_p_value(15, 20, 0.5) - 21700.0 / 1048576.0).abs() < 1e-12);
        let tiny = binomial_p_value(1000, 1000, 0.05);
        assert!(tiny >= 0.0 && tiny < 1e-300);
    }

    #[test]
    fn condition_names_parse() {
        assert_eq!(parse_condition("raw").unwrap(), TransformSpec::Identity);
        assert_eq!(parse_condition("cropped20").unwrap(), TransformSpec::crop20());
        assert_eq!(parse_condition("scrambled@16").unwrap(), TransformSpec::scramble(16));
        assert_eq!(parse_condition("dwt_db4").unwrap(), TransformSpec::wavelet(WaveletFamily::Db4));
        assert_eq!(
            parse_condition("dwt_haar@2").unwrap(),
            TransformSpec::DwtCompose { family: WaveletFamily::Haar, levels: 2 }
        );
        let c = parse_condition("median5+dwt_haar").unwrap();
        assert_eq!(c.steps().len(), 2);
        assert!(parse_condition("cropped20+fourier").unwrap().is_information_free());
        assert!(!parse_condition("scrambled@16").unwrap().is_information_free());
        let err = parse_condition("sharpen").unwrap_err().to_string();
        assert!(err.contains("sharpen"), "{err}");
        assert!(parse_condition("median4").is_err());
        for name in DEFAULT_CONDITIONS.iter().copied() {
            parse_condition(name).unwrap();
        }
    }

    #[test]
    fn config_parsing() {
        let cfg = AuditConfig::from_json(r#"{"conditions": ["raw", {"name": "crop", "transform": {"kind": "crop_background"}}], "seeds": [4]}"#)
            .unwrap();
        assert_eq!(cfg.conditions[1].transform, TransformSpec::crop20());
        assert_eq!(cfg.alpha, 0.01);
        assert_eq!(AuditConfig::from_json("{}").unwrap(), AuditConfig::default());

        let err = AuditConfig::from_json(r#"{"conditions": ["raw", {"name": "x", "transform": {"kind": "blur"}}]}"#)
            .unwrap_err()
            .to_string();
        assert!(err.contains("blur"), "{err}");
        assert!(AuditConfig::from_json(r#"{"conditions": ["cropped20"]}"#).is_err());
        assert!(AuditConfig::from_json(r#"{"alpha": 1.5}"#).is_err());
        assert!(AuditConfig::from_json(r#"{"ratio_threshold": 1.0}"#).is_err());
        assert!(AuditConfig::from_json(r#"{"seeds": []}"#).is_err());
        assert!(AuditConfig::from_json(r#"{"sedes": [1]}"#).is_err());
    }

    #[test]
    fn profile_examples() {
        let coil = [result("raw", &[(1, 1.0)]), result("dwt_haar", &[(1, 1.0)])];
        assert_eq!(profile_rule(&coil).unwrap(), ProfileVerdict::BackgroundNoise);

        let imagenette =
            [result("raw", &[(1, 0.59)]), result("dwt_haar", &[(1, 0.50)]), result("median5", &[(1, 0.55)])];
        assert_eq!(profile_rule(&imagenette).unwrap(), ProfileVerdict::ContextualSignal);

        let flat = [result("raw", &[(1, 0.4)]), result("dwt_haar", &[(1, 0.4)]), result("median5", &[(1, 0.4)])];
        assert_eq!(profile_rule(&flat).unwrap(), ProfileVerdict::BackgroundNoise);
    }

    #[test]
    fn single_seed_dip_sits_on_the_boundary() {
        let raw = result("raw", &[(1, 1.0), (2, 1.0), (3, 1.0)]);
        let haar = result("dwt_haar", &[(1, 1.0), (2, 0.99), (3, 1.0)]);
        let (d, e) = paired_delta(&haar, &raw).unwrap();
        assert!((d + e).abs() < 1e-15, "{d} {e}");
        assert_eq!(profile_rule(&[raw.clone(), haar]).unwrap(), ProfileVerdict::BackgroundNoise);
        let two_dips = result("dwt_haar", &[(1, 1.0), (2, 0.99), (3, 0.99)]);
        let median = result("median5", &[(1, 0.98), (2, 0.97), (3, 0.98)]);
        assert_eq!(profile_rule(&[raw, two_dips, median]).unwrap(), ProfileVerdict::ContextualSignal);
    }

    #[test]
    fn profile_requirements() {
        assert!(profile_rule(&[result("raw", &[(1, 0.5)])]).is_err());
        assert!(profile_rule(&[result("dwt_haar", &[(1, 0.5)])]).is_err());
        let median_only = [result("raw", &[(1, 0.5)]), result("median5", &[(1, 0.3)])];
        assert_eq!(profile_rule(&median_only).unwrap(), ProfileVerdict::Inconclusive);
        let wavelet_drop_only =
            [result("raw", &[(1, 0.6)]), result("dwt_haar", &[(1, 0.4)]), result("median5", &[(1, 0.6)])];
        assert_eq!(profile_rule(&wavelet_drop_only).unwrap(), ProfileVerdict::Inconclusive);
    }

    #[test]
    fn profile_uses_seed_spread() {
        let raw = result("raw", &[(1, 0.60), (2, 0.70), (3, 0.80)]);
        // Paired changes -0.10, +0.02, +0.02: mean -0.02, standard error 0.04.
        let noisy = result("dwt_haar", &[(1, 0.50), (2, 0.72), (3, 0.82)]);
        let (d, e) = paired_delta(&noisy, &raw).unwrap();
        assert!((d + 0.02).abs() < 1e-9 && (e - 0.04).abs() < 1e-9, "{d} {e}");
        assert_eq!(profile_rule(&[raw.clone(), noisy]).unwrap(), ProfileVerdict::BackgroundNoise);
        let drop = result("dwt_haar", &[(1, 0.50), (2, 0.61), (3, 0.69)]);
        let med = result("median5", &[(1, 0.55), (2, 0.65), (3, 0.70)]);
        assert_eq!(profile_rule(&[raw, drop, med]).unwrap(), ProfileVerdict::ContextualSignal);
    }

    #[test]
    fn profile_ignores_unrelated_conditions() {
        let base = vec![result("raw", &[(1, 0.59)]), result("dwt_haar", &[(1, 0.50)]), result("median5", &[(1, 0.55)])];
        let mut more = base.clone();
        more.push(result("fourier", &[(1, 0.9)]));
        more.insert(0, result("cropped20", &[(1, 0.2)]));
        assert_eq!(profile_rule(&base).unwrap(), profile_rule(&more).unwrap());
    }

    #[test]
    fn flag_needs_majority_of_seeds() {
        let c = Condition::named("cropped20").unwrap();
        let hit = SeedResult::new(1, 60, 100, 0.25, 0.01, 2.0);
        let miss = SeedResult::new(2, 26, 100, 0.25, 0.01, 2.0);
        assert!(hit.flagged && !miss.flagged);
        let two = ConditionResult::summarize(&c, 0.25, vec![hit.clone(), hit.clone(), miss.clone()], vec![]);
        assert!(two.flagged);
        let one = ConditionResult::summarize(&c, 0.25, vec![hit.clone(), miss.clone(), miss.clone()], vec![]);
        assert!(!one.flagged);
        let failed = vec![SeedFailure { seed: 3, error: "x".into() }];
        let half = ConditionResult::summarize(&c, 0.25, vec![hit, miss], failed);
        assert!(!half.flagged);
        assert_eq!(bias_verdict(&[two]), BiasVerdict::BiasDetected);
        assert_eq!(bias_verdict(&[one]), BiasVerdict::NoneDetected);
    }

    #[test]
    fn ratio_gate_blocks_significant_small_gains() {
        let r = SeedResult::new(1, 3500, 10000, 0.25, 0.01, 2.0);
        assert!(r.p_value < 1e-10);
        assert!(!r.flagged);
    }
}
