use std::path::{Path, PathBuf};

use clap::Args;
use comma_core::concept_kb::{build_kb as build, save_kb, ExtractionConfig};
use comma_core::labels::LabelSpace;
use comma_core::ConceptKb;

use super::{create_parent, default_kb, guard_file, log_run, read_split};
use crate::config::Settings;
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct BuildKbArgs {
    /// Corpus directory [default: <home>/corpus].
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// motivation or emotion (mu and eu are accepted).
    #[arg(long)]
    task: Option<String>,
    /// Output file [default: <home>/kb/<task>.json].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Document-frequency fraction above which a lemma is dropped.
    #[arg(long)]
    hf_threshold: Option<f64>,
    /// Floor applied to scores at query time.
    #[arg(long)]
    score_floor: Option<f64>,
    #[arg(long)]
    force: bool,
}

pub fn build_kb(a: BuildKbArgs, home: &Path, s: &mut Settings) -> CliResult<()> {
    let raw = s
        .opt::<String>("task", a.task)?
        .ok_or_else(|| CliError::config("--task is required (motivation or emotion)"))?;
    let space: LabelSpace = raw.parse().map_err(|e| CliError::config(format!("{e}")))?;
    s.note("task", space.id());
    let corpus = s.path("corpus", a.corpus, || home.join("corpus"))?;
    let out = s.path("out", a.out, || default_kb(home, space))?;
    let mut config = ExtractionConfig {
        high_frequency_threshold: s.get("hf-threshold", a.hf_threshold, ExtractionConfig::default().high_frequency_threshold)?,
        score_floor: s.opt("score-floor", a.score_floor)?,
        ..ExtractionConfig::default()
    };
    let force = s.switch("force", a.force)?;
    if !(config.high_frequency_threshold > 0.0 && config.high_frequency_threshold <= 1.0) {
        return Err(CliError::config("--hf-threshold must lie in (0, 1]"));
    }
    if config.score_floor.is_some_and(|f| !(f >= 0.0 && f.is_finite())) {
        return Err(CliError::config("--score-floor must be nonnegative"));
    }
    guard_file(&out, force)?;
    log_run("build-kb", s, None);

    let train = read_split(&corpus, "train")?;
    config.fit_high_frequency(train.iter().map(|i| i.action.as_str()));
    let kb: ConceptKb = build(&train, space, &config)?;
    create_parent(&out)?;
    save_kb(&kb, &out)?;

    println!("{} knowledge base: {} concepts, fingerprint {}", space.id(), kb.n_concepts(), kb.config_fingerprint());
    println!("label\tV\tN");
    for (i, id) in space.ids().into_iter().enumerate() {
        println!("{id}\t{}\t{}", kb.vocab_sizes()[i], kb.totals()[i]);
    }
    Ok(())
}
