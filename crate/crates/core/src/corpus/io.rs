use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{CorpusError, Instance};

/// One JSON object per line, keys in declaration order.
pub fn write_instances_jsonl(path: &Path, instances: &[Instance]) -> Result<(), CorpusError> {
    let mut w = BufWriter::new(File::create(path)?);
    for inst in instances {
        serde_json::to_writer(&mut w, inst)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_instances_jsonl(path: &Path) -> Result<Vec<Instance>, CorpusError> {
    let r = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let inst: Instance = serde_json::from_str(&line).map_err(|e| {
            CorpusError::Format(format!("{}:{}: {e}", path.display(), i + 1))
        })?;
        out.push(inst);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labels::{EmotionLabel, MotivationLabel};
    use std::collections::BTreeSet;

    #[test]
    fn keys_are_exact() {
        let inst = Instance {
            story_id: "s".into(),
            line_idx: 2,
            character: "Kim".into(),
            history: vec!["Kim went out.".into()],
            action: "Kim enjoyed the sea.".into(),
            motivations: BTreeSet::from([MotivationLabel::SpiritualGrowth]),
            emotions: BTreeSet::from([EmotionLabel::Joy, EmotionLabel::Trust]),
        };
        assert_eq!(
            serde_json::to_string(&inst).unwrap(),
            r#"{"story_id":"s","line_idx":2,"character":"Kim","history":["Kim went out."],"action":"Kim enjoyed the sea.","motivations":["spiritual_growth"],"emotions":["joy","trust"]}"#
        );
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        write_instances_jsonl(&p, std::slice::from_ref(&inst)).unwrap();
        assert_eq!(read_instances_jsonl(&p).unwrap(), vec![inst]);
    }
}
