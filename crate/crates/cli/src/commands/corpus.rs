use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use comma_core::corpus::synth::{synth_release as synth, SynthConfig};
use comma_core::corpus::{
    corpus_stats, instances_from_records, read_release, split_corpus, write_instances_jsonl, Instance,
    ParseConfig, Partition, REFERENCE_INSTANCE_COUNT,
};
use comma_core::fingerprint::fingerprint_bytes;
use serde_json::json;

use super::{guard_dir, guard_file, log_run, to_pretty, write_json, CORPUS_FILE, MANIFEST_FILE, STATS_FILE};
use crate::config::Settings;
use crate::error::{CliError, CliResult};

/// Marker file written by `synth-release`.
pub const RELEASE_INFO: &str = "release_info.json";
const NOMINAL_SPLIT: [f64; 3] = [9.0, 2.0, 2.0];
const SPLIT_TOLERANCE: f64 = 0.05;

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory [default: <home>/release].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    stories: Option<usize>,
    #[arg(long)]
    lines: Option<usize>,
    #[arg(long)]
    annotators: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    force: bool,
}

pub fn synth_release(a: SynthArgs, home: &Path, s: &mut Settings) -> CliResult<()> {
    let out = s.path("out", a.out, || home.join("release"))?;
    let config = SynthConfig {
        n_stories: s.get("stories", a.stories, 3400)?,
        lines_per_story: s.get("lines", a.lines, 5)?,
        annotators: s.get("annotators", a.annotators, 3)?,
        seed: s.get("seed", a.seed, 0)?,
        ..SynthConfig::default()
    };
    let force = s.switch("force", a.force)?;
    if config.n_stories == 0 || config.lines_per_story == 0 || config.annotators == 0 {
        return Err(CliError::config("--stories, --lines and --annotators must be positive"));
    }
    let file = out.join("annotations.json");
    guard_file(&file, force)?;
    log_run("synth-release", s, Some(config.seed));
    fs::create_dir_all(&out)?;
    fs::write(&file, serde_json::to_string(&synth(&config))? + "\n")?;
    write_json(
        &out.join(RELEASE_INFO),
        &json!({
            "synthetic": true,
            "stories": config.n_stories,
            "lines_per_story": config.lines_per_story,
            "annotators": config.annotators,
            "seed": config.seed,
        }),
    )?;
    println!("wrote {} synthetic stories to {}", config.n_stories, out.display());
    Ok(())
}

#[derive(Debug, Args)]
pub struct BuildCorpusArgs {
    /// Release directory or file [default: <home>/release].
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output directory [default: <home>/corpus].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Train/dev/test weights, comma separated [default: 9,2,2].
    #[arg(long)]
    ratios: Option<String>,
    /// Annotators that must select a label for it to count.
    #[arg(long)]
    agreement_min: Option<usize>,
    /// Lowest Plutchik intensity counted as a selection.
    #[arg(long)]
    min_emotion_intensity: Option<u32>,
    #[arg(long)]
    force: bool,
}

fn parse_ratios(raw: &str) -> CliResult<[f64; 3]> {
    let parts: Vec<f64> = raw
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::config(format!("--ratios {raw:?}: {e}")))?;
    let [a, b, c]: [f64; 3] = parts
        .try_into()
        .map_err(|_| CliError::config(format!("--ratios {raw:?}: expected three values")))?;
    let sum = a + b + c;
    if [a, b, c].iter().any(|r| !r.is_finite() || *r < 0.0) || sum <= 0.0 {
        return Err(CliError::config(format!("--ratios {raw:?}: weights must be nonnegative with a positive sum")));
    }
    Ok([a / sum, b / sum, c / sum])
}

fn stories_of(instances: &[Instance]) -> BTreeSet<&str> {
    instances.iter().map(|i| i.story_id.as_str()).collect()
}

pub fn build_corpus(a: BuildCorpusArgs, home: &Path, s: &mut Settings) -> CliResult<()> {
    let input = s.path("input", a.input, || home.join("release"))?;
    let out = s.path("out", a.out, || home.join("corpus"))?;
    let seed = s.get("seed", a.seed, 0)?;
    let ratios_raw = s.get("ratios", a.ratios, "9,2,2".to_string())?;
    let ratios = parse_ratios(&ratios_raw)?;
    let agreement_min = s.get("agreement-min", a.agreement_min, comma_core::corpus::DEFAULT_AGREEMENT_MIN)?;
    let parse = ParseConfig {
        min_emotion_intensity: s.get("min-emotion-intensity", a.min_emotion_intensity, ParseConfig::default().min_emotion_intensity)?,
    };
    let force = s.switch("force", a.force)?;
    if agreement_min == 0 {
        return Err(CliError::config("--agreement-min must be at least 1"));
    }
    if !input.exists() {
        return Err(CliError::data(format!("release not found at {}", input.display())));
    }
    guard_dir(&out, force)?;
    log_run("build-corpus", s, Some(seed));

    let aligned = instances_from_records(read_release(&input)?, &parse, agreement_min)?;
    if aligned.instances.is_empty() {
        return Err(CliError::data("no instance survived alignment"));
    }
    let splits = split_corpus(&aligned.instances, ratios, seed)?;

    fs::create_dir_all(&out)?;
    let corpus_path = out.join(CORPUS_FILE);
    write_instances_jsonl(&corpus_path, &aligned.instances)?;
    for p in Partition::ALL {
        write_instances_jsonl(&out.join(format!("{p}.jsonl")), splits.get(p))?;
    }
    let manifest_text = to_pretty(&splits.manifest);
    fs::write(out.join(MANIFEST_FILE), &manifest_text)?;

    let mut content = fs::read(&corpus_path)?;
    content.extend_from_slice(manifest_text.as_bytes());
    let corpus_fp = fingerprint_bytes(&content);

    let n = aligned.instances.len();
    let nominal_sum: f64 = NOMINAL_SPLIT.iter().sum();
    let mut split_report = serde_json::Map::new();
    let mut within_all = true;
    for (i, p) in Partition::ALL.into_iter().enumerate() {
        let part = splits.get(p);
        let share = part.len() as f64 / n as f64;
        let nominal = NOMINAL_SPLIT[i] / nominal_sum;
        let rel = (share - nominal) / nominal;
        let within = rel.abs() <= SPLIT_TOLERANCE;
        within_all &= within;
        split_report.insert(
            p.to_string(),
            json!({
                "instances": part.len(),
                "stories": stories_of(part).len(),
                "share": share,
                "nominal_share": nominal,
                "relative_error": rel,
                "within_tolerance": within,
            }),
        );
    }
    let (tr, dv, te) = (stories_of(&splits.train), stories_of(&splits.dev), stories_of(&splits.test));
    let disjoint = tr.is_disjoint(&dv) && tr.is_disjoint(&te) && dv.is_disjoint(&te);
    let synthetic = synthetic_release(&input);
    let labels = corpus_stats(&aligned.instances)?;
    let r = aligned.rejected;
    let stats = json!({
        "n_instances": n,
        "reference_instances": REFERENCE_INSTANCE_COUNT,
        "deviation": n as i64 - REFERENCE_INSTANCE_COUNT as i64,
        "deviation_breakdown": {
            "candidates": r.candidates,
            "emitted": r.emitted,
            "unannotated": r.unannotated,
            "missing_motivation": r.missing_motivation,
            "missing_emotion": r.missing_emotion,
            "missing_both": r.missing_both,
            "note": if synthetic {
                "synthetic release: the story count differs from the upstream release, so the total is not comparable"
            } else {
                "upstream release under the configured agreement rule"
            },
        },
        "synthetic": synthetic,
        "n_stories": tr.len() + dv.len() + te.len(),
        "splits": split_report,
        "split_tolerance": SPLIT_TOLERANCE,
        "splits_within_tolerance": within_all,
        "story_disjoint": disjoint,
        "labels": labels,
        "settings": s.resolved(),
        "config_hash": s.config_hash(),
        "corpus_fingerprint": corpus_fp,
    });
    write_json(&out.join(STATS_FILE), &stats)?;
    if !disjoint {
        return Err(CliError::runtime("split is not story-disjoint"));
    }
    println!(
        "{n} instances (reference {REFERENCE_INSTANCE_COUNT}, deviation {:+}); train {} / dev {} / test {}{}",
        n as i64 - REFERENCE_INSTANCE_COUNT as i64,
        splits.train.len(),
        splits.dev.len(),
        splits.test.len(),
        if synthetic { " [synthetic release]" } else { "" }
    );
    Ok(())
}

fn synthetic_release(input: &Path) -> bool {
    let dir = if input.is_file() { input.parent().unwrap_or(input) } else { input };
    let info = dir.join(RELEASE_INFO);
    fs::read_to_string(info)
        .ok()
        .and_then(|t| serde_json::from_str::<BTreeMap<String, serde_json::Value>>(&t).ok())
        .and_then(|m| m.get("synthetic").and_then(|v| v.as_bool()))
        .unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratios_normalize() {
        let r = parse_ratios("9,2,2").unwrap();
        assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(r[1], 2.0 / 13.0);
        assert!(parse_ratios("1,2").is_err());
        assert!(parse_ratios("1,-1,2").is_err());
        assert!(parse_ratios("0,0,0").is_err());
    }
}
