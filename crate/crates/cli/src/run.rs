use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};
use unlearn_core::engine::{finetune_baseline, pretrain, retrain, unlearn, Checkpoint, TrainRun};
use unlearn_core::eval::{full_report, MetricsReport};
use unlearn_core::losses::Method;
use unlearn_core::verify::{run_all, VerifyConfig};

use crate::config::{self, Loaded, Prepared, RunConfig};
use crate::{Failure, Outcome, ResultExt};

pub const LOG_FILE: &str = "train_log.jsonl";

/// Shared setup for commands driven by a config file.
pub struct Job {
    pub config: RunConfig,
    pub prepared: Prepared,
    pub out: PathBuf,
}

pub fn setup(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Outcome<Job> {
    let Loaded { config, base } = config::load(config_path).usage()?;
    let config = config.with_seed(seed);
    let prepared = config::prepare(&Loaded { config: config.clone(), base: base.clone() }).usage()?;
    let out = config.out_dir(out, &base);
    fs::create_dir_all(&out)
        .with_context(|| format!("creating {}", out.display()))
        .runtime()?;
    Ok(Job { config, prepared, out })
}

#[derive(Serialize)]
struct LogLine<'a> {
    run: &'a str,
    #[serde(flatten)]
    body: Value,
}

/// Rewrites `train_log.jsonl`, replacing any earlier lines of the same run
/// so repeated commands leave identical files.
fn write_log(out: &Path, run_name: &str, run: &TrainRun) -> Result<()> {
    let path = out.join(LOG_FILE);
    let mut lines: Vec<String> = match fs::read_to_string(&path) {
        Ok(text) => text
            .lines()
            .filter(|l| {
                serde_json::from_str::<Value>(l)
                    .map(|v| v.get("run").and_then(Value::as_str) != Some(run_name))
                    .unwrap_or(true)
            })
            .map(str::to_owned)
            .collect(),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Vec::new(),
        Err(e) => return Err(e).with_context(|| format!("reading {}", path.display())),
    };
    for entry in &run.audit {
        let body = json!({ "event": "audit", "role": entry.role,
            "fingerprint": format!("{:016x}", entry.fingerprint), "samples": entry.samples });
        lines.push(serde_json::to_string(&LogLine { run: run_name, body })?);
    }
    for rec in &run.log {
        let mut body = serde_json::to_value(rec)?;
        body["event"] = json!("epoch");
        lines.push(serde_json::to_string(&LogLine { run: run_name, body })?);
    }
    let mut text = lines.join("\n");
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
}

fn save(ckpt: &Checkpoint, path: &Path) -> Outcome<()> {
    ckpt.save(path)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()
}

fn load_checkpoint(path: &Path) -> Outcome<Checkpoint> {
    Checkpoint::load(path)
        .with_context(|| format!("loading checkpoint {}", path.display()))
        .runtime()
}

fn summary(run: &TrainRun) -> String {
    match run.log.last() {
        Some(r) => format!("epoch {} loss {:.4} accuracy {:.2}%", r.epoch, r.loss, r.accuracy),
        None => "0 epochs".into(),
    }
}

pub fn cmd_pretrain(ctx: &Job) -> Outcome<()> {
    let run = pretrain(&ctx.prepared.arch, &ctx.prepared.train, &ctx.config.train).runtime()?;
    let path = ctx.out.join("original.ulck");
    save(&run.checkpoint, &path)?;
    write_log(&ctx.out, "pretrain", &run).runtime()?;
    println!("{}: {}", path.display(), summary(&run));
    Ok(())
}

pub fn cmd_retrain(ctx: &Job) -> Outcome<()> {
    let run = retrain(&ctx.prepared.arch, &ctx.prepared.split.d_r_train, &ctx.config.train).runtime()?;
    let path = ctx.out.join("retrain.ulck");
    save(&run.checkpoint, &path)?;
    write_log(&ctx.out, "retrain", &run).runtime()?;
    println!("{}: {}", path.display(), summary(&run));
    Ok(())
}

fn original_path(ctx: &Job, checkpoint: Option<&Path>) -> PathBuf {
    checkpoint.map_or_else(|| ctx.out.join("original.ulck"), Path::to_path_buf)
}

fn check_matches(ctx: &Job, ckpt: &Checkpoint, path: &Path) -> Outcome<()> {
    if ckpt.arch() != &ctx.prepared.arch {
        return Err(Failure::Usage(anyhow::anyhow!(
            "{} has layer sizes {:?}, the config describes {:?}",
            path.display(),
            ckpt.arch().dims(),
            ctx.prepared.arch.dims()
        )));
    }
    Ok(())
}

/// The original must have been trained on exactly the configured data.
fn check_trained_on(ctx: &Job, ckpt: &Checkpoint, path: &Path) -> Outcome<()> {
    let expected = ctx.prepared.train.fingerprint();
    if ckpt.meta.fingerprint != expected {
        return Err(Failure::Usage(anyhow::anyhow!(
            "{} was trained on data with fingerprint {:016x}, the config yields {:016x}",
            path.display(),
            ckpt.meta.fingerprint,
            expected
        )));
    }
    Ok(())
}

/// Report for `model` against the original, with the retrained reference
/// when `<out>/retrain.ulck` exists.
fn report(ctx: &Job, original: &Checkpoint, model: &Checkpoint) -> Outcome<MetricsReport> {
    let retrain_path = ctx.out.join("retrain.ulck");
    let retrained = if retrain_path.exists() { Some(load_checkpoint(&retrain_path)?) } else { None };
    let mut report = full_report(original, model, retrained.as_ref(), &ctx.prepared.split, &ctx.config.mia)
        .runtime()?;
    report.config = Some(serde_json::to_value(&ctx.config).runtime()?);
    Ok(report)
}

fn write_report(ctx: &Job, report: &MetricsReport) -> Outcome<PathBuf> {
    let path = ctx.out.join(format!("report_{}.json", report.method));
    let mut text = serde_json::to_string_pretty(report).runtime()?;
    text.push('\n');
    fs::write(&path, text)
        .with_context(|| format!("writing {}", path.display()))
        .runtime()?;
    Ok(path)
}

fn print_report(path: &Path, r: &MetricsReport) {
    println!(
        "{}: acc_f {:.2} acc_r {:.2} acc_ft {:.2} acc_rt {:.2} h_mean {:.2} mia {:.2}",
        path.display(),
        r.acc_f,
        r.acc_r,
        r.acc_ft,
        r.acc_rt,
        r.h_mean,
        r.mia
    );
}

pub fn cmd_unlearn(
    ctx: &Job,
    method: Option<Method>,
    checkpoint: Option<&Path>,
    remain_data_ack: bool,
) -> Outcome<()> {
    let mut cfg = ctx.config.unlearn.clone();
    if let Some(m) = method {
        cfg.loss.method = m;
    }
    let method = cfg.loss.method;
    if method.needs_remain_data() && !remain_data_ack {
        return Err(Failure::Usage(anyhow::anyhow!(
            "{method} trains on the remain data, which the unlearning setting forbids: only the \
             forget set may be used. Pass --remain-data-ack to run it as a comparison baseline."
        )));
    }
    let path = original_path(ctx, checkpoint);
    let original = load_checkpoint(&path)?;
    check_matches(ctx, &original, &path)?;
    check_trained_on(ctx, &original, &path)?;

    let run = if method.needs_remain_data() {
        let train = unlearn_core::engine::TrainConfig {
            lr: cfg.lr,
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            momentum: cfg.momentum,
            weight_decay: cfg.weight_decay,
            seed: cfg.seed,
        };
        finetune_baseline(&original, &ctx.prepared.split.d_r_train, &train).runtime()?
    } else {
        unlearn(&original, &ctx.prepared.split.d_f_train, &cfg).runtime()?
    };
    let ckpt_path = ctx.out.join(format!("unlearned_{method}.ulck"));
    save(&run.checkpoint, &ckpt_path)?;
    write_log(&ctx.out, &format!("unlearn:{method}"), &run).runtime()?;

    let report = report(ctx, &original, &run.checkpoint)?;
    let report_path = write_report(ctx, &report)?;
    print_report(&report_path, &report);
    Ok(())
}

pub fn cmd_evaluate(ctx: &Job, checkpoint: Option<&Path>) -> Outcome<()> {
    let original_path = ctx.out.join("original.ulck");
    let original = load_checkpoint(&original_path)?;
    check_matches(ctx, &original, &original_path)?;
    check_trained_on(ctx, &original, &original_path)?;
    let model = match checkpoint {
        Some(p) => {
            let m = load_checkpoint(p)?;
            check_matches(ctx, &m, p)?;
            m
        }
        None => original.clone(),
    };
    let report = report(ctx, &original, &model)?;
    let path = write_report(ctx, &report)?;
    print_report(&path, &report);
    Ok(())
}

pub fn cmd_verify(seed: Option<u64>) -> Outcome<()> {
    let cfg = VerifyConfig { seed: seed.unwrap_or(0), ..VerifyConfig::default() };
    let report = run_all(&cfg).runtime()?;
    for c in &report.checks {
        println!(
            "{} {:<20} cases {:>5}  max error {:.3e}  tolerance {:.0e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.cases,
            c.max_error,
            c.tolerance
        );
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err(Failure::Verify)
    }
}

/// Where `compare` writes its CSV when no directory is given.
pub fn compare_dir(out: Option<&Path>, first_report: &Path) -> PathBuf {
    if let Some(p) = out {
        return p.to_path_buf();
    }
    if let Some(p) = std::env::var_os(config::OUT_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(p);
    }
    first_report.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn read_report(path: &Path) -> Outcome<MetricsReport> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .runtime()?;
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de)
        .map_err(|e| anyhow::anyhow!("{}: at `{}`: {}", path.display(), e.path(), e.inner()))
        .usage()
}

pub fn ensure_nonempty<T>(items: &[T]) -> Result<()> {
    if items.is_empty() {
        bail!("compare needs at least one report");
    }
    Ok(())
}
