use std::path::{Path, PathBuf};

use clap::Args;
use comma_core::concept_kb::load_kb;
use comma_core::generation::{save_generator, train_generator, Arch, DecodeConfig, GenHyper, GenLossConfig, Strategy};
use comma_core::labels::Task;
use comma_core::understanding::{
    save_checkpoint, train_understanding, UnderstandingHyper, VotingConfig, VotingMode,
};
use comma_core::{ConceptKb, Generator, UnderstandingModel};

use super::{
    corpus_fingerprint, default_checkpoint, file_sha256, default_kb, guard_dir, load_splits, log_run, parse_task, require,
    space_of, write_json, RunRecord, RUN_FILE,
};
use crate::config::Settings;
use crate::error::{CliError, CliResult};

pub const REPORT_FILE: &str = "training_report.json";

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// eu, mu or cag.
    #[arg(long)]
    task: Option<String>,
    /// Corpus directory [default: <home>/corpus].
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Knowledge base for eu/mu [default: <home>/kb/<space>.json].
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Checkpoint directory [default: <home>/checkpoints/<task>].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Only `tiny` (bag-of-embeddings trained from scratch) is available.
    #[arg(long)]
    encoder: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Warm-up fraction of total steps.
    #[arg(long)]
    warmup: Option<f64>,
    #[arg(long)]
    grad_norm: Option<f64>,
    #[arg(long)]
    max_input_tokens: Option<usize>,
    #[arg(long)]
    max_output_tokens: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// AVER, MAX, SUM, MLP or GATE.
    #[arg(long)]
    voting: Option<String>,
    /// Mixing weight of the neural distribution (fixed modes) or gate start.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    mlp_hidden: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    /// Label smoothing of the emotion target.
    #[arg(long)]
    epsilon: Option<f64>,
    /// causal or enc-dec.
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    emb_dim: Option<usize>,
    #[arg(long)]
    emotion_seed: Option<u64>,
    /// Leave the motivation block out of the generation prompt.
    #[arg(long)]
    no_motivation: bool,
    /// greedy or beam.
    #[arg(long)]
    decode: Option<String>,
    #[arg(long)]
    beam_width: Option<usize>,
    /// Accept hyperparameters outside the documented ranges.
    #[arg(long)]
    allow_out_of_range: bool,
    #[arg(long)]
    force: bool,
}

/// Documented ranges; returns one message per violation.
pub fn range_violations(task: Task, lr: f64, batch: usize, epochs: usize, warmup: f64, grad_norm: f64, max_in: usize, max_out: usize) -> Vec<String> {
    let mut v = Vec::new();
    let understanding = task != Task::Cag;
    if understanding {
        if !(1e-5..=2e-5).contains(&lr) {
            v.push(format!("lr {lr} outside [1e-5, 2e-5]"));
        }
        if ![16, 32, 64].contains(&batch) {
            v.push(format!("batch size {batch} not in {{16, 32, 64}}"));
        }
        if ![3, 5, 10].contains(&epochs) {
            v.push(format!("epochs {epochs} not in {{3, 5, 10}}"));
        }
    } else {
        if lr != 1e-5 {
            v.push(format!("lr {lr} differs from 1e-5"));
        }
        if batch != 32 {
            v.push(format!("batch size {batch} differs from 32"));
        }
        if !(1..=30).contains(&epochs) {
            v.push(format!("epochs {epochs} outside 1..=30"));
        }
        if max_out != 60 {
            v.push(format!("max output tokens {max_out} differs from 60"));
        }
    }
    if warmup != 0.1 {
        v.push(format!("warm-up {warmup} differs from 0.1"));
    }
    if grad_norm != 1.0 {
        v.push(format!("gradient norm {grad_norm} differs from 1.0"));
    }
    if max_in != 200 {
        v.push(format!("max input tokens {max_in} differs from 200"));
    }
    v
}

pub fn parse_voting(raw: &str) -> CliResult<VotingMode> {
    raw.parse().map_err(|e| CliError::config(format!("--voting: {e}")))
}

pub fn parse_strategy(raw: &str) -> CliResult<Strategy> {
    raw.parse().map_err(|e| CliError::config(format!("--decode: {e}")))
}

pub fn train(a: TrainArgs, home: &Path, s: &mut Settings) -> CliResult<()> {
    let raw = s.opt::<String>("task", a.task.clone())?.ok_or_else(|| CliError::config("--task is required (eu, mu or cag)"))?;
    let task = parse_task(&raw)?;
    s.note("task", task.id());
    let encoder = s.get("encoder", a.encoder.clone(), "tiny".to_string())?;
    if encoder != "tiny" {
        return Err(CliError::config(format!("encoder {encoder:?} is not available; use tiny")));
    }
    let corpus = s.path("corpus", a.corpus.clone(), || home.join("corpus"))?;
    let out = s.path("out", a.out.clone(), || default_checkpoint(home, task))?;
    match task {
        Task::Cag => train_cag(a, &corpus, &out, s),
        Task::Eu | Task::Mu => train_understanding_task(a, task, home, &corpus, &out, s),
    }
}

fn finish_run(
    out: &Path,
    task: Task,
    seed: u64,
    s: &Settings,
    corpus_fp: String,
    kb: Option<(String, String)>,
) -> CliResult<()> {
    let run = RunRecord {
        task,
        seed,
        config_hash: s.config_hash(),
        settings: s.resolved().clone(),
        corpus_fingerprint: corpus_fp,
        kb_fingerprint: kb.as_ref().map(|k| k.0.clone()),
        kb_sha256: kb.map(|k| k.1),
    };
    write_json(&out.join(RUN_FILE), &run)
}

fn train_understanding_task(a: TrainArgs, task: Task, home: &Path, corpus: &Path, out: &Path, s: &mut Settings) -> CliResult<()> {
    let space = space_of(task)?;
    let kb_path = s.path("kb", a.kb, || default_kb(home, space))?;
    let d = UnderstandingHyper::default();
    let hyper = UnderstandingHyper {
        lr: s.get("lr", a.lr, d.lr)?,
        batch_size: s.get("batch-size", a.batch_size, d.batch_size)?,
        epochs: s.get("epochs", a.epochs, d.epochs)?,
        warmup: s.get("warmup", a.warmup, d.warmup)?,
        grad_norm: s.get("grad-norm", a.grad_norm, d.grad_norm)?,
        max_input_tokens: s.get("max-input-tokens", a.max_input_tokens, d.max_input_tokens)?,
        hidden: s.get("hidden", a.hidden, d.hidden)?,
        seed: s.get("seed", a.seed, d.seed)?,
        ..d
    };
    let vd = VotingConfig::default();
    let voting = VotingConfig {
        mode: parse_voting(&s.get("voting", a.voting, "GATE".to_string())?)?,
        alpha: s.get("alpha", a.alpha, vd.alpha)?,
        mlp_hidden: s.get("mlp-hidden", a.mlp_hidden, vd.mlp_hidden)?,
    };
    let allow = s.switch("allow-out-of-range", a.allow_out_of_range)?;
    let force = s.switch("force", a.force)?;
    let bad = range_violations(task, hyper.lr, hyper.batch_size, hyper.epochs, hyper.warmup, hyper.grad_norm, hyper.max_input_tokens, 60);
    check_ranges(bad, allow)?;
    require(&kb_path, "knowledge base")?;
    guard_dir(out, force)?;
    log_run("train", s, Some(hyper.seed));
    log::info!("train: CPU kernels are deterministic; no nondeterminism flags apply");

    let splits = load_splits(corpus)?;
    let corpus_fp = corpus_fingerprint(corpus)?;
    let kb: ConceptKb = load_kb(&kb_path, None)?;
    if kb.space() != space {
        return Err(CliError::config(format!(
            "knowledge base is over {} labels but task {} needs {}",
            kb.space().id(),
            task.id(),
            space.id()
        )));
    }
    let (model, report): (UnderstandingModel, _) = train_understanding(&splits, task, &hyper, voting, &kb)?;
    save_checkpoint(&model, out, &s.config_hash())?;
    write_json(&out.join(super::train::REPORT_FILE), &report)?;
    let kb_sha = file_sha256(&kb_path)?;
    finish_run(out, task, hyper.seed, s, corpus_fp, Some((kb.config_fingerprint().to_string(), kb_sha)))?;
    let f1 = model.dev_metrics.get("micro_f1").copied().unwrap_or(f64::NAN);
    println!(
        "{}: selected epoch {} of {}, dev micro-F1 {:.4}, threshold {:.2}; checkpoint in {}",
        task.id(),
        report.selected_epoch,
        report.curve.len(),
        f1,
        model.threshold,
        out.display()
    );
    Ok(())
}

fn check_ranges(bad: Vec<String>, allow: bool) -> CliResult<()> {
    if bad.is_empty() {
        return Ok(());
    }
    if allow {
        for b in &bad {
            log::warn!("hyperparameter outside documented range: {b}");
        }
        Ok(())
    } else {
        Err(CliError::config(format!(
            "{}; pass --allow-out-of-range to accept",
            bad.join("; ")
        )))
    }
}

fn train_cag(a: TrainArgs, corpus: &Path, out: &Path, s: &mut Settings) -> CliResult<()> {
    let d = GenHyper::default();
    let hyper = GenHyper {
        lr: s.get("lr", a.lr, d.lr)?,
        batch_size: s.get("batch-size", a.batch_size, d.batch_size)?,
        epochs: s.get("epochs", a.epochs, d.epochs)?,
        warmup: s.get("warmup", a.warmup, d.warmup)?,
        grad_norm: s.get("grad-norm", a.grad_norm, d.grad_norm)?,
        emb_dim: s.get("emb-dim", a.emb_dim, d.emb_dim)?,
        hidden: s.get("hidden", a.hidden, d.hidden)?,
        seed: s.get("seed", a.seed, d.seed)?,
        emotion_seed: s.get("emotion-seed", a.emotion_seed, d.emotion_seed)?,
        arch: s
            .get("arch", a.arch, "causal".to_string())?
            .parse::<Arch>()
            .map_err(|e| CliError::config(format!("--arch: {e}")))?,
        include_motivation: !s.switch("no-motivation", a.no_motivation)?,
        ..d.clone()
    };
    let ld = GenLossConfig::default();
    let loss = GenLossConfig {
        lambda1: s.get("lambda1", a.lambda1, ld.lambda1)?,
        lambda2: s.get("lambda2", a.lambda2, ld.lambda2)?,
        epsilon: s.get("epsilon", a.epsilon, ld.epsilon)?,
    };
    let dd = DecodeConfig::default();
    let decode = DecodeConfig {
        strategy: parse_strategy(&s.get("decode", a.decode, "beam".to_string())?)?,
        beam_width: s.get("beam-width", a.beam_width, dd.beam_width)?,
        max_output_tokens: s.get("max-output-tokens", a.max_output_tokens, dd.max_output_tokens)?,
    };
    let max_in = s.get("max-input-tokens", a.max_input_tokens, d.max_input_tokens)?;
    let allow = s.switch("allow-out-of-range", a.allow_out_of_range)?;
    let force = s.switch("force", a.force)?;
    let hyper = GenHyper { max_input_tokens: max_in, max_output_tokens: decode.max_output_tokens, ..hyper };
    let bad = range_violations(Task::Cag, hyper.lr, hyper.batch_size, hyper.epochs, hyper.warmup, hyper.grad_norm, max_in, decode.max_output_tokens);
    check_ranges(bad, allow)?;
    guard_dir(out, force)?;
    log_run("train", s, Some(hyper.seed));
    log::info!("train: emotion head seed {}; CPU kernels are deterministic", hyper.emotion_seed);

    let splits = load_splits(corpus)?;
    let corpus_fp = corpus_fingerprint(corpus)?;
    let (gen, report): (Generator, _) = train_generator(&splits, &hyper, loss, decode)?;
    save_generator(&gen, out, &s.config_hash())?;
    write_json(&out.join(REPORT_FILE), &report)?;
    finish_run(out, Task::Cag, hyper.seed, s, corpus_fp, None)?;
    if let Some(reason) = &report.aborted {
        log::warn!("training stopped early: {reason}; kept the last good checkpoint");
    }
    let best = report.curve.iter().find(|r| r.epoch == report.selected_epoch);
    println!(
        "cag: selected epoch {} of {}, dev total loss {:.4}; generator in {}",
        report.selected_epoch,
        report.curve.len(),
        best.map_or(f64::NAN, |r| r.dev_total),
        out.display()
    );
    Ok(())
}
