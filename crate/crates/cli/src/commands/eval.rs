use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::Args;
use comma_core::concept_kb::{labels_for, load_kb};
use comma_core::generation::{evaluate_generator, load_generator, DecodeConfig};
use comma_core::labels::{LabelSpace, Task};
use comma_core::metrics::{micro_prf, EvalReport};
use comma_core::parallel::par_map;
use comma_core::understanding::{load_checkpoint, predict};
use comma_core::{ConceptKb, Generator, UnderstandingModel};
use serde_json::json;

use super::train::parse_strategy;
use super::{
    corpus_fingerprint, default_checkpoint, file_sha256, default_kb, guard_file, jobs, log_run, parse_task, read_json, read_split,
    require, space_of, write_json, RunRecord, RUN_FILE,
};
use crate::config::Settings;
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// eu, mu or cag.
    #[arg(long)]
    task: Option<String>,
    /// Model directory [default: <home>/checkpoints/<task>].
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    kb: Option<PathBuf>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// train, dev, test or all.
    #[arg(long)]
    split: Option<String>,
    /// Report file [default: <home>/reports/<task>_<split>.json].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Decision threshold replacing the tuned one.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    decode: Option<String>,
    #[arg(long)]
    beam_width: Option<usize>,
    /// Evaluate even when corpus or knowledge-base lineage differs.
    #[arg(long)]
    allow_mismatch: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    force: bool,
}

/// Checks that a model directory was trained on this corpus (and this
/// knowledge-base file, when given). Returns the run record when present.
pub fn check_lineage(model_dir: &Path, corpus: Option<&Path>, kb: Option<&Path>, allow: bool) -> CliResult<Option<RunRecord>> {
    let run_path = model_dir.join(RUN_FILE);
    if !run_path.exists() {
        return if allow {
            log::warn!("{} missing; lineage not checked", run_path.display());
            Ok(None)
        } else {
            Err(CliError::data(format!("{} missing; pass --allow-mismatch to skip the lineage check", run_path.display())))
        };
    }
    let run: RunRecord = read_json(&run_path)?;
    let mut problems = Vec::new();
    if let Some(corpus) = corpus {
        let here = corpus_fingerprint(corpus)?;
        if here != run.corpus_fingerprint {
            problems.push(format!("model was trained on corpus {} but {} is {here}", run.corpus_fingerprint, corpus.display()));
        }
    }
    if let (Some(kb), Some(expected)) = (kb, &run.kb_sha256) {
        let here = file_sha256(kb)?;
        if &here != expected {
            problems.push(format!("model was trained with knowledge base file {expected} but {} is {here}", kb.display()));
        }
    }
    if !problems.is_empty() {
        let msg = problems.join("; ");
        if allow {
            log::warn!("{msg}");
        } else {
            return Err(CliError::data(format!("{msg}; pass --allow-mismatch to proceed anyway")));
        }
    }
    Ok(Some(run))
}

pub fn load_understanding(
    dir: &Path,
    kb_path: &Path,
    space: LabelSpace,
    allow: bool,
) -> CliResult<(UnderstandingModel, ConceptKb, String)> {
    require(dir, "checkpoint")?;
    require(kb_path, "knowledge base")?;
    let kb: ConceptKb = load_kb(kb_path, None)?;
    if kb.space() != space {
        return Err(CliError::config(format!("knowledge base is over {} labels, expected {}", kb.space().id(), space.id())));
    }
    let expected = if allow { None } else { Some(kb.config_fingerprint()) };
    let (model, sidecar) = load_checkpoint(dir, expected).map_err(|e| match e {
        comma_core::understanding::UnderstandingError::Incompatible(m) => {
            CliError::data(format!("{m}; pass --allow-mismatch to use it anyway"))
        }
        other => other.into(),
    })?;
    if model.space != space {
        return Err(CliError::config(format!("checkpoint predicts {} labels, expected {}", model.space.id(), space.id())));
    }
    Ok((model, kb, sidecar.config_hash))
}

pub fn eval(a: EvalArgs, home: &Path, s: &mut Settings) -> CliResult<()> {
    let raw = s.opt::<String>("task", a.task)?.ok_or_else(|| CliError::config("--task is required (eu, mu or cag)"))?;
    let task = parse_task(&raw)?;
    s.note("task", task.id());
    let split = s.get("split", a.split, "test".to_string())?;
    let dir = s.path("checkpoint", a.checkpoint, || default_checkpoint(home, task))?;
    let corpus = s.path("corpus", a.corpus, || home.join("corpus"))?;
    let out = s.path("out", a.out, || home.join("reports").join(format!("{}_{split}.json", task.id())))?;
    let allow = s.switch("allow-mismatch", a.allow_mismatch)?;
    let force = s.switch("force", a.force)?;
    let jobs = jobs(s, a.jobs)?;
    guard_file(&out, force)?;

    let report = match task {
        Task::Cag => {
            require(&dir, "generator")?;
            let decode_flag = s.opt::<String>("decode", a.decode)?;
            let beam_flag = s.opt::<usize>("beam-width", a.beam_width)?;
            let (gen, sidecar): (Generator, _) = load_generator(&dir)?;
            check_lineage(&dir, Some(&corpus), None, allow)?;
            let mut decode: DecodeConfig = sidecar.decode_defaults;
            if let Some(d) = decode_flag {
                decode.strategy = parse_strategy(&d)?;
            }
            if let Some(w) = beam_flag {
                decode.beam_width = w;
            }
            s.note("model-config-hash", &sidecar.config_hash);
            log_run("eval", s, None);
            let instances = read_split(&corpus, &split)?;
            let mut report = evaluate_generator(&gen, &instances, &decode, jobs)?;
            report.config_fingerprint = s.config_hash();
            report
        }
        Task::Eu | Task::Mu => {
            let space = space_of(task)?;
            let kb_path = s.path("kb", a.kb, || default_kb(home, space))?;
            let (mut model, kb, model_hash) = load_understanding(&dir, &kb_path, space, allow)?;
            check_lineage(&dir, Some(&corpus), Some(&kb_path), allow)?;
            if let Some(t) = s.opt::<f64>("threshold", a.threshold)? {
                if !(t > 0.0 && t < 1.0) {
                    return Err(CliError::config("--threshold must lie in (0, 1)"));
                }
                model.threshold = t;
            }
            s.note("model-config-hash", &model_hash);
            log_run("eval", s, None);
            let instances = read_split(&corpus, &split)?;
            understanding_report(&model, &kb, task, &instances, jobs, s.config_hash())?
        }
    };
    write_json(&out, &report)?;
    for (k, v) in &report.metrics {
        println!("{k}\t{v:.6}");
    }
    Ok(())
}

pub fn understanding_report(
    model: &UnderstandingModel,
    kb: &ConceptKb,
    task: Task,
    instances: &[comma_core::corpus::Instance],
    jobs: usize,
    fingerprint: String,
) -> CliResult<EvalReport> {
    if instances.is_empty() {
        return Err(CliError::data("split is empty"));
    }
    let space = model.space;
    let preds = par_map(instances, jobs, |inst| predict(inst, model, kb));
    let mut gold = Vec::with_capacity(instances.len());
    let mut pred = Vec::with_capacity(instances.len());
    let mut records = Vec::with_capacity(instances.len());
    for (inst, p) in instances.iter().zip(preds) {
        let p = p?;
        let g: std::collections::BTreeSet<usize> = labels_for(inst, space).into_iter().collect();
        let ids = |set: &std::collections::BTreeSet<usize>| set.iter().map(|&i| space.id_at(i)).collect::<Vec<_>>();
        records.push(json!({ "instance_id": inst.id(), "gold": ids(&g), "pred": ids(&p.decision) }));
        gold.push(g);
        pred.push(p.decision);
    }
    let prf = micro_prf(&gold, &pred)?;
    let metrics = BTreeMap::from([
        ("micro_p".to_string(), prf.precision),
        ("micro_r".to_string(), prf.recall),
        ("micro_f1".to_string(), prf.f1),
        ("tp".to_string(), prf.tp as f64),
        ("fp".to_string(), prf.fp as f64),
        ("fn".to_string(), prf.fn_ as f64),
    ]);
    Ok(EvalReport {
        task: task.id().to_string(),
        metrics,
        smoothing: "none".into(),
        n_instances: instances.len(),
        config_fingerprint: fingerprint,
        records,
    })
}
