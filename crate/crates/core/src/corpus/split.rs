use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{CorpusError, Instance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Partition {
    Train,
    Dev,
    Test,
}

impl Partition {
    pub const ALL: [Partition; 3] = [Partition::Train, Partition::Dev, Partition::Test];
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Partition::Train => "train",
            Partition::Dev => "dev",
            Partition::Test => "test",
        })
    }
}

/// Serialized split manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub partitions: BTreeMap<String, Partition>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplits {
    pub train: Vec<Instance>,
    pub dev: Vec<Instance>,
    pub test: Vec<Instance>,
    pub manifest: SplitManifest,
}

impl CorpusSplits {
    pub fn get(&self, p: Partition) -> &[Instance] {
        match p {
            Partition::Train => &self.train,
            Partition::Dev => &self.dev,
            Partition::Test => &self.test,
        }
    }
}

/// Story-level split. Stories are shuffled with a seeded ChaCha8 stream and
/// cut where the cumulative instance count crosses each ratio boundary, so
/// the manifest depends only on the story set, ratios and seed.
pub fn split_corpus(
    instances: &[Instance],
    ratios: [f64; 3],
    seed: u64,
) -> Result<CorpusSplits, CorpusError> {
    if ratios.iter().any(|r| !r.is_finite() || *r < 0.0) {
        return Err(CorpusError::Config(format!("ratios must be nonnegative: {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(CorpusError::Config(format!("ratios sum to {sum}, expected 1")));
    }
    let active: Vec<Partition> = Partition::ALL
        .into_iter()
        .zip(ratios)
        .filter(|(_, r)| *r > 0.0)
        .map(|(p, _)| p)
        .collect();

    let mut per_story: BTreeMap<&str, usize> = BTreeMap::new();
    for inst in instances {
        *per_story.entry(inst.story_id.as_str()).or_default() += 1;
    }
    if per_story.len() < active.len() {
        return Err(CorpusError::Config(format!(
            "{} stories cannot fill {} partitions",
            per_story.len(),
            active.len()
        )));
    }

    let mut stories: Vec<(&str, usize)> = per_story.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    stories.shuffle(&mut rng);

    let total = instances.len() as f64;
    let mut boundaries = Vec::with_capacity(active.len());
    let mut acc = 0.0;
    for p in &active {
        acc += ratios[*p as usize];
        boundaries.push(acc * total);
    }

    let mut partitions = BTreeMap::new();
    let mut current = 0usize;
    let mut filled = 0usize;
    let mut running = 0usize;
    let n = stories.len();
    for (k, (story, count)) in stories.into_iter().enumerate() {
        let partitions_after = active.len() - current - 1;
        if filled > 0 && n - k == partitions_after {
            current += 1;
            filled = 0;
        }
        partitions.insert(story.to_string(), active[current]);
        filled += 1;
        running += count;
        if current + 1 < active.len() && running as f64 >= boundaries[current] {
            current += 1;
            filled = 0;
        }
    }

    let mut splits = CorpusSplits {
        train: Vec::new(),
        dev: Vec::new(),
        test: Vec::new(),
        manifest: SplitManifest {
            seed,
            ratios,
            partitions,
        },
    };
    for inst in instances {
        match splits.manifest.partitions[inst.story_id.as_str()] {
            Partition::Train => splits.train.push(inst.clone()),
            Partition::Dev => splits.dev.push(inst.clone()),
            Partition::Test => splits.test.push(inst.clone()),
        }
    }
    Ok(splits)
}
