pub mod corpus;
pub mod eval;
pub mod human;
pub mod kb;
pub mod matrix;
pub mod predict;
pub mod train;

use std::fs;
use std::path::{Path, PathBuf};

use comma_core::corpus::{read_instances_jsonl, CorpusSplits, Instance, SplitManifest};
use comma_core::labels::{LabelSpace, Task};
use serde::{Deserialize, Serialize};

use crate::config::Settings;
use crate::error::{CliError, CliResult};

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const MANIFEST_FILE: &str = "split_manifest.json";
pub const STATS_FILE: &str = "stats.json";
pub const RUN_FILE: &str = "run.json";

/// Refuses to replace an existing file unless forced.
pub fn guard_file(path: &Path, force: bool) -> CliResult<()> {
    if path.exists() && !force {
        return Err(CliError::config(format!("{} exists; pass --force to overwrite", path.display())));
    }
    Ok(())
}

/// Same for a nonempty directory.
pub fn guard_dir(path: &Path, force: bool) -> CliResult<()> {
    if path.is_dir() && fs::read_dir(path)?.next().is_some() && !force {
        return Err(CliError::config(format!("{} is not empty; pass --force to overwrite", path.display())));
    }
    if path.is_file() {
        return Err(CliError::config(format!("{} is a file, expected a directory", path.display())));
    }
    Ok(())
}

pub fn create_parent(path: &Path) -> CliResult<()> {
    if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    Ok(())
}

pub fn to_pretty<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact serializes") + "\n"
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    create_parent(path)?;
    fs::write(path, to_pretty(value))?;
    Ok(())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn require(path: &Path, what: &str) -> CliResult<()> {
    if !path.exists() {
        return Err(CliError::data(format!("{what} not found at {}", path.display())));
    }
    Ok(())
}

pub fn read_split(corpus: &Path, split: &str) -> CliResult<Vec<Instance>> {
    let file = match split {
        "train" | "dev" | "test" => corpus.join(format!("{split}.jsonl")),
        "all" => corpus.join(CORPUS_FILE),
        other => return Err(CliError::config(format!("unknown split {other:?} (train, dev, test or all)"))),
    };
    require(&file, "corpus split")?;
    Ok(read_instances_jsonl(&file)?)
}

pub fn load_splits(corpus: &Path) -> CliResult<CorpusSplits> {
    let manifest: SplitManifest = read_json(&corpus.join(MANIFEST_FILE))?;
    Ok(CorpusSplits {
        train: read_split(corpus, "train")?,
        dev: read_split(corpus, "dev")?,
        test: read_split(corpus, "test")?,
        manifest,
    })
}

/// Content hash recorded by `build-corpus`.
pub fn corpus_fingerprint(corpus: &Path) -> CliResult<String> {
    let stats: serde_json::Value = read_json(&corpus.join(STATS_FILE))?;
    stats
        .get("corpus_fingerprint")
        .and_then(|v| v.as_str())
        .map(str::to_string)
        .ok_or_else(|| CliError::data(format!("{} lacks corpus_fingerprint", corpus.join(STATS_FILE).display())))
}

pub fn parse_task(raw: &str) -> CliResult<Task> {
    raw.parse().map_err(|e| CliError::config(format!("{e}")))
}

pub fn space_of(task: Task) -> CliResult<LabelSpace> {
    task.target_space()
        .ok_or_else(|| CliError::config(format!("task {} has no label space", task.id())))
}

pub fn default_kb(home: &Path, space: LabelSpace) -> PathBuf {
    home.join("kb").join(format!("{}.json", space.id()))
}

pub fn default_checkpoint(home: &Path, task: Task) -> PathBuf {
    home.join("checkpoints").join(task.id())
}

/// Lineage written next to every trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub task: Task,
    pub seed: u64,
    pub config_hash: String,
    pub settings: std::collections::BTreeMap<String, String>,
    pub corpus_fingerprint: String,
    pub kb_fingerprint: Option<String>,
    /// Hash of the knowledge-base file bytes.
    pub kb_sha256: Option<String>,
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    Ok(comma_core::fingerprint::fingerprint_bytes(&fs::read(path)?))
}

pub fn log_run(command: &str, settings: &Settings, seed: Option<u64>) {
    match seed {
        Some(s) => log::info!("{command}: seed {s}, config hash {}", settings.config_hash()),
        None => log::info!("{command}: config hash {}", settings.config_hash()),
    }
}

pub fn jobs(settings: &mut Settings, flag: Option<usize>) -> CliResult<usize> {
    let j = settings.get_unhashed("jobs", flag, 1usize)?;
    if j == 0 {
        return Err(CliError::config("--jobs must be at least 1"));
    }
    Ok(j)
}
