use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::Args;
use comma_core::corpus::{read_instances_jsonl, Instance};
use comma_core::generation::{generate_action, load_generator, DecodeConfig, GenerationError};
use comma_core::labels::{EmotionLabel, Task};
use comma_core::parallel::par_map;
use comma_core::prompting::render_generation_prompt;
use comma_core::understanding::predict as predict_one;
use comma_core::Generator;
use serde_json::json;

use super::eval::{check_lineage, load_understanding};
use super::train::parse_strategy;
use super::{create_parent, default_checkpoint, default_kb, guard_file, jobs, log_run, parse_task, read_split, require, space_of};
use crate::config::Settings;
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// eu, mu or cag.
    #[arg(long)]
    task: Option<String>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    kb: Option<PathBuf>,
    /// Corpus directory used with --split [default: <home>/corpus].
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// train, dev, test or all; ignored with --input.
    #[arg(long)]
    split: Option<String>,
    /// JSON lines of instances to predict instead of a corpus split.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Include per-concept label distributions.
    #[arg(long)]
    explain: bool,
    /// Rerank generated candidates toward this emotion (cag).
    #[arg(long)]
    desired_emotion: Option<String>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    decode: Option<String>,
    #[arg(long)]
    beam_width: Option<usize>,
    /// Only the first N instances.
    #[arg(long)]
    limit: Option<usize>,
    #[arg(long)]
    allow_mismatch: bool,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    force: bool,
}

pub fn predict(a: PredictArgs, home: &Path, s: &mut Settings) -> CliResult<()> {
    let raw = s.opt::<String>("task", a.task)?.ok_or_else(|| CliError::config("--task is required (eu, mu or cag)"))?;
    let task = parse_task(&raw)?;
    s.note("task", task.id());
    let dir = s.path("checkpoint", a.checkpoint, || default_checkpoint(home, task))?;
    let corpus = s.path("corpus", a.corpus, || home.join("corpus"))?;
    let input: Option<PathBuf> = a.input;
    let split = s.get("split", a.split, "test".to_string())?;
    let explain = s.switch("explain", a.explain)?;
    let limit = s.opt::<usize>("limit", a.limit)?;
    let allow = s.switch("allow-mismatch", a.allow_mismatch)?;
    let force = s.switch("force", a.force)?;
    let jobs = jobs(s, a.jobs)?;
    if let Some(out) = &a.out {
        guard_file(out, force)?;
    }

    let mut instances: Vec<Instance> = match &input {
        Some(p) => {
            require(p, "input")?;
            read_instances_jsonl(p)?
        }
        None => read_split(&corpus, &split)?,
    };
    if let Some(n) = limit {
        instances.truncate(n);
    }

    let lines: Vec<String> = match task {
        Task::Eu | Task::Mu => {
            let space = space_of(task)?;
            let kb_path = s.path("kb", a.kb, || default_kb(home, space))?;
            let (mut model, kb, hash) = load_understanding(&dir, &kb_path, space, allow)?;
            check_lineage(&dir, input.is_none().then_some(corpus.as_path()), Some(&kb_path), allow)?;
            if let Some(t) = s.opt::<f64>("threshold", a.threshold)? {
                if !(t > 0.0 && t < 1.0) {
                    return Err(CliError::config("--threshold must lie in (0, 1)"));
                }
                model.threshold = t;
            }
            s.note("model-config-hash", hash);
            log_run("predict", s, None);
            par_map(&instances, jobs, |inst| {
                predict_one(inst, &model, &kb).map(|p| serde_json::to_string(&p.to_record(space, explain)).expect("record serializes"))
            })
            .into_iter()
            .collect::<Result<_, _>>()?
        }
        Task::Cag => {
            require(&dir, "generator")?;
            let desired = s
                .opt::<String>("desired-emotion", a.desired_emotion)?
                .map(|e| EmotionLabel::parse(&e).map_err(|err| CliError::config(err.to_string())))
                .transpose()?;
            let decode_flag = s.opt::<String>("decode", a.decode)?;
            let beam_flag = s.opt::<usize>("beam-width", a.beam_width)?;
            let (gen, sidecar): (Generator, _) = load_generator(&dir)?;
            check_lineage(&dir, input.is_none().then_some(corpus.as_path()), None, allow)?;
            let mut decode: DecodeConfig = sidecar.decode_defaults;
            if let Some(d) = decode_flag {
                decode.strategy = parse_strategy(&d)?;
            }
            if let Some(w) = beam_flag {
                decode.beam_width = w;
            }
            s.note("model-config-hash", &sidecar.config_hash);
            log_run("predict", s, None);
            par_map(&instances, jobs, |inst| cag_line(inst, &gen, &decode, desired))
                .into_iter()
                .collect::<CliResult<_>>()?
        }
    };

    match &a.out {
        Some(path) => {
            create_parent(path)?;
            write_lines(BufWriter::new(File::create(path)?), &lines)?;
        }
        None => write_lines(io::stdout().lock(), &lines)?,
    }
    Ok(())
}

fn write_lines(mut w: impl Write, lines: &[String]) -> io::Result<()> {
    for l in lines {
        writeln!(w, "{l}")?;
    }
    w.flush()
}

fn cag_line(inst: &Instance, gen: &Generator, decode: &DecodeConfig, desired: Option<EmotionLabel>) -> CliResult<String> {
    let prompt = render_generation_prompt(inst)?;
    let out = match generate_action(&inst.history, &inst.character, &inst.motivations, gen, decode, desired) {
        Ok(g) => json!({
            "instance_id": inst.id(),
            "input": prompt.input,
            "action": g.action,
            "tagged": g.tagged,
            "p_e": g.p_e.to_f64(),
            "log_prob": g.log_prob,
        }),
        Err(GenerationError::EmptyGeneration) => json!({
            "instance_id": inst.id(),
            "input": prompt.input,
            "action": "",
            "tagged": false,
            "error": "empty generation",
        }),
        Err(e) => return Err(e.into()),
    };
    Ok(out.to_string())
}
