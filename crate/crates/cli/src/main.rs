use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};

use anyhow::{Context, Result};
use biasprobe::audit::{condition_dataset, run_audit_with, AuditConfig, AuditReport, ConditionStatus, JobDone, REPORT_CSV, REPORT_JSON, REPORT_SVG};
use biasprobe::chart::render_chart;
use biasprobe::dataset::{load_dataset, save_dataset, Split};
use biasprobe::nn::{evaluate, history_csv, save_checkpoint, train, ArchSpec, TrainConfig};
use biasprobe::synth::{describe, generate, BiasSpec, DatasetSummary, SynthSpec};
use biasprobe::transforms::{apply_to_dataset, TransformSpec};
use biasprobe::Dataset;
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

/// Audit image classification datasets for background bias.
#[derive(Debug, Parser)]
#[command(name = "biasprobe", version)]
struct Cli {
    /// Worker threads (default: available cores).
    #[arg(long, global = true, value_name = "N")]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with an optional injected bias.
    Gen {
        /// Generator settings (JSON).
        #[arg(long, value_name = "FILE")]
        spec: PathBuf,
        /// Bias settings (JSON); no bias when omitted.
        #[arg(long, value_name = "FILE")]
        bias: Option<PathBuf>,
        /// Output dataset directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Replace files in a non-empty output directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Apply one transform to every image of a dataset.
    Transform {
        /// Input dataset directory.
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
        /// Output dataset directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Transform spec (JSON), e.g. {"kind":"tile_scramble","tile":16,"seed":7}.
        #[arg(long, value_name = "FILE")]
        transform: PathBuf,
        /// Replace files in a non-empty output directory.
        #[arg(long)]
        overwrite: bool,
    },
    /// Train one classifier and write the checkpoint, history and metrics.
    Train {
        /// Dataset directory.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Training settings (JSON); defaults when omitted.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Network layout (JSON); MiniVGG when omitted.
        #[arg(long, value_name = "FILE")]
        arch: Option<PathBuf>,
        /// Transform applied before training (JSON); none when omitted.
        #[arg(long, value_name = "FILE")]
        transform: Option<PathBuf>,
        /// MiniVGG input side when --arch is omitted.
        #[arg(long, default_value_t = 64, value_name = "PX")]
        input: usize,
        /// Replace existing outputs.
        #[arg(long)]
        overwrite: bool,
    },
    /// Train and test under every audit condition and write the report.
    Audit {
        /// Dataset directory.
        #[arg(long, value_name = "DIR")]
        data: PathBuf,
        /// Audit settings (JSON); the default condition catalogue when omitted.
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Report directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Replace an existing report.
        #[arg(long)]
        overwrite: bool,
    },
    /// Re-render the CSV table and SVG chart of a saved audit report.
    Report {
        /// Path to an audit_report.json.
        #[arg(long, value_name = "FILE")]
        report: PathBuf,
        /// Output directory.
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
        /// Replace existing outputs.
        #[arg(long)]
        overwrite: bool,
    },
}

/// Problem with the invocation or its configuration files (exit code 1).
#[derive(Debug)]
struct Usage(String);

impl fmt::Display for Usage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<Usage>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<biasprobe::Error>() {
            return if e.is_config_error() { 1 } else { 2 };
        }
    }
    2
}

/// Byte offset of a 1-based (line, column) position.
fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + column.saturating_sub(1)).min(text.len())
}

fn json_message(path: &Path, text: &str, e: &serde_json::Error) -> String {
    if e.line() == 0 {
        return format!("{}: {e}", path.display());
    }
    format!("{}: invalid JSON at byte {}: {e}", path.display(), byte_offset(text, e.line(), e.column()))
}

fn read_config(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

/// Parse a config file with a library parser, turning JSON errors into usage errors with a byte offset.
fn load_with<T>(path: &Path, parse: impl Fn(&str) -> biasprobe::Result<T>) -> Result<T> {
    let text = read_config(path)?;
    parse(&text).map_err(|e| match &e {
        biasprobe::Error::Json { source, .. } => usage(json_message(path, &text, source)),
        biasprobe::Error::Param { .. } => usage(format!("{}: {e}", path.display())),
        _ => anyhow::Error::new(e).context(format!("loading {}", path.display())),
    })
}

fn load_serde<T: for<'de> serde::Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = read_config(path)?;
    serde_json::from_str(&text).map_err(|e| usage(json_message(path, &text, &e)))
}

fn param_usage(path: &Path, r: biasprobe::Result<()>) -> Result<()> {
    r.map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// Refuse to write into a directory that already has content unless `overwrite` is set.
fn prepare_out(out: &Path, overwrite: bool) -> Result<()> {
    if out.is_file() {
        return Err(usage(format!("--out {} is a file", out.display())));
    }
    let occupied = out.read_dir().map(|mut d| d.next().is_some()).unwrap_or(false);
    if occupied && !overwrite {
        return Err(usage(format!("{} is not empty; pass --overwrite to replace its files", out.display())));
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))
}

fn print_config(value: &Value) {
    println!("resolved config:");
    println!("{}", serde_json::to_string_pretty(value).expect("json value serializes"));
}

fn print_summary(summary: &DatasetSummary) {
    println!("dataset {}: {} images", summary.id, summary.total);
    let splits: Vec<String> = summary.splits.iter().map(|(s, n)| format!("{} {n}", s.name())).collect();
    println!("splits: {}", splits.join(", "));
    for c in &summary.classes {
        println!("  {:<16} {:>6}  mean {:.4}  std {:.4}", c.name, c.count, c.mean, c.std);
    }
}

fn load_data(dir: &Path) -> Result<Dataset> {
    load_dataset(dir).with_context(|| format!("loading dataset {}", dir.display()))
}

fn cmd_gen(spec: &Path, bias: Option<&Path>, out: &Path, overwrite: bool) -> Result<()> {
    let spec = load_with(spec, SynthSpec::from_json)?;
    let bias = match bias {
        Some(p) => load_with(p, BiasSpec::from_json)?,
        None => BiasSpec::default(),
    };
    print_config(&json!({ "synth_spec": spec, "bias_spec": bias, "out": out }));
    prepare_out(out, overwrite)?;
    let syn = generate(&spec, &bias)?;
    syn.save(out).with_context(|| format!("writing {}", out.display()))?;
    print_summary(&describe(&syn.dataset));
    println!("clamped pixels: {} of {} ({:.5})", syn.clamped, syn.pixels, syn.clamp_fraction());
    Ok(())
}

fn cmd_transform(input: &Path, out: &Path, transform: &Path, overwrite: bool) -> Result<()> {
    let spec = load_with(transform, TransformSpec::from_json)?;
    print_config(&json!({ "in": input, "out": out, "transform": spec }));
    if input.canonicalize().ok().is_some_and(|a| out.canonicalize().ok() == Some(a)) {
        return Err(usage("--in and --out must differ"));
    }
    let ds = load_data(input)?;
    let transformed = apply_to_dataset(&ds, &spec)?;
    prepare_out(out, overwrite)?;
    let mut extra = serde_json::Map::new();
    extra.insert("transform".into(), serde_json::to_value(&spec)?);
    save_dataset(&transformed, out, extra).with_context(|| format!("writing {}", out.display()))?;
    println!("per-class counts:");
    for (k, name) in transformed.class_names.iter().enumerate() {
        let n = transformed.items.iter().filter(|it| it.label == k).count();
        println!("  {name}: {n}");
    }
    println!("wrote {} images to {}", transformed.items.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    data: &Path,
    out: &Path,
    config: Option<&Path>,
    arch: Option<&Path>,
    transform: Option<&Path>,
    input: usize,
    overwrite: bool,
) -> Result<()> {
    let cfg: TrainConfig = match config {
        Some(p) => {
            let cfg: TrainConfig = load_serde(p)?;
            param_usage(p, cfg.validate())?;
            cfg
        }
        None => TrainConfig::default(),
    };
    let spec = match transform {
        Some(p) => load_with(p, TransformSpec::from_json)?,
        None => TransformSpec::Identity,
    };
    let ds = load_data(data)?;
    let arch = match arch {
        Some(p) => {
            let a: ArchSpec = load_serde(p)?;
            param_usage(p, a.validate())?;
            a
        }
        None => ArchSpec::mini_vgg(ds.num_classes(), input),
    };
    print_config(&json!({ "data": data, "out": out, "train": cfg, "arch": arch, "transform": spec }));
    if arch.num_classes != ds.num_classes() {
        return Err(usage(format!("architecture has {} classes, dataset has {}", arch.num_classes, ds.num_classes())));
    }
    prepare_out(out, overwrite)?;
    let [h, w] = arch.input_size;
    let prepared = condition_dataset(&ds, &spec, h, w)?;
    let model = train(&prepared, &arch, &cfg)?;
    for e in &model.history {
        println!("epoch {:>3}  loss {:.4}  train {:.4}  val {:.4}", e.epoch, e.train_loss, e.train_acc, e.val_acc);
    }
    let mut metrics = serde_json::Map::new();
    for split in [Split::Val, Split::Test] {
        if prepared.count(split) > 0 {
            let m = evaluate(&model, &prepared, split)?;
            println!("{} accuracy: {:.4} ({}/{})", split.name(), m.accuracy, m.correct, m.n);
            metrics.insert(split.name().into(), serde_json::to_value(m)?);
        }
    }
    save_checkpoint(&model, out.join("model.bin"))?;
    write(&out.join("history.csv"), &history_csv(&model.history))?;
    write(&out.join("metrics.json"), &(serde_json::to_string_pretty(&metrics)? + "\n"))?;
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_conditions(report: &AuditReport) {
    println!("{:<28} {:>8} {:>8} {:>7} {:>10}  flagged", "condition", "accuracy", "chance", "ratio", "p_value");
    for c in &report.conditions {
        if c.status == ConditionStatus::Failed {
            println!("{:<28} failed", c.name);
            continue;
        }
        println!(
            "{:<28} {:>8.4} {:>8.4} {:>7.2} {:>10.3e}  {}",
            c.name, c.mean_accuracy, c.chance, c.ratio, c.p_value, c.flagged
        );
    }
}

fn print_verdicts(report: &AuditReport) {
    println!("bias_verdict: {}", report.bias_verdict.name());
    println!("profile_verdict: {}", report.profile_verdict.name());
}

fn cmd_audit(data: &Path, config: Option<&Path>, out: &Path, overwrite: bool) -> Result<()> {
    let cfg = match config {
        Some(p) => load_with(p, AuditConfig::from_json)?,
        None => AuditConfig::default(),
    };
    let ds = load_data(data)?;
    let arch = cfg.resolved_arch(ds.num_classes()).map_err(|e| usage(e.to_string()))?;
    let mut shown = serde_json::to_value(&cfg)?;
    shown["arch"] = serde_json::to_value(&arch)?;
    print_config(&json!({ "data": data, "out": out, "audit": shown }));
    if out.join(REPORT_JSON).exists() && !overwrite {
        return Err(usage(format!("{} already holds a report; pass --overwrite to replace it", out.display())));
    }
    let total = cfg.conditions.len() * cfg.seeds.len();
    let done = AtomicUsize::new(0);
    let progress = |job: JobDone<'_>| {
        let i = done.fetch_add(1, Ordering::SeqCst) + 1;
        match job.outcome {
            Ok(r) => eprintln!("[{i}/{total}] {} seed {}: accuracy {:.4} (p {:.2e})", job.condition, job.seed, r.accuracy, r.p_value),
            Err(e) => eprintln!("[{i}/{total}] {} seed {}: failed: {e}", job.condition, job.seed),
        }
    };
    let report = run_audit_with(&ds, &cfg, &progress)?;
    report.write(out).with_context(|| format!("writing report to {}", out.display()))?;
    print_conditions(&report);
    print_verdicts(&report);
    Ok(())
}

fn cmd_report(path: &Path, out: &Path, overwrite: bool) -> Result<()> {
    let report = load_with(path, AuditReport::from_json)?;
    print_config(&json!({ "report": path, "out": out }));
    if report.conditions.is_empty() {
        return Err(usage(format!("{} has no conditions", path.display())));
    }
    if !overwrite && (out.join(REPORT_CSV).exists() || out.join(REPORT_SVG).exists()) {
        return Err(usage(format!("{} already holds a chart; pass --overwrite to replace it", out.display())));
    }
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write(&out.join(REPORT_CSV), &report.to_csv())?;
    write(&out.join(REPORT_SVG), &render_chart(&report))?;
    print_conditions(&report);
    print_verdicts(&report);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("starting worker pool")?;
    }
    match &cli.command {
        Command::Gen { spec, bias, out, overwrite } => cmd_gen(spec, bias.as_deref(), out, *overwrite),
        Command::Transform { input, out, transform, overwrite } => cmd_transform(input, out, transform, *overwrite),
        Command::Train { data, out, config, arch, transform, input, overwrite } => {
            cmd_train(data, out, config.as_deref(), arch.as_deref(), transform.as_deref(), *input, *overwrite)
        }
        Command::Audit { data, config, out, overwrite } => cmd_audit(data, config.as_deref(), out, *overwrite),
        Command::Report { report, out, overwrite } => cmd_report(report, out, *overwrite),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
