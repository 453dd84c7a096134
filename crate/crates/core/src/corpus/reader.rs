use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;

use super::{AnnotatedLine, CorpusError};
use crate::labels::{EmotionLabel, MotivationLabel};

/// Reader options for raw annotator selections.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParseConfig {
    /// Plutchik selections carry an intensity suffix (`joy:3`); selections
    /// below this intensity are not counted as a vote.
    pub min_emotion_intensity: u32,
}

impl Default for ParseConfig {
    fn default() -> Self {
        Self {
            min_emotion_intensity: 2,
        }
    }
}

/// One record of the upstream stream, before validation. Each inner vector
/// is one annotator's selection.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawRecord {
    pub story_id: Option<String>,
    pub line_idx: Option<usize>,
    pub character: Option<String>,
    pub sentence: Option<String>,
    pub motivation: Vec<Vec<String>>,
    pub emotion: Vec<Vec<String>>,
}

/// Validates records and merges them into one [`AnnotatedLine`] per
/// (story, line, character), sorted by that key.
pub fn parse_story_annotations<I>(
    records: I,
    config: ParseConfig,
) -> Result<Vec<AnnotatedLine>, CorpusError>
where
    I: IntoIterator<Item = RawRecord>,
{
    let mut merged: BTreeMap<(String, usize, String), AnnotatedLine> = BTreeMap::new();
    for (i, rec) in records.into_iter().enumerate() {
        let record = i + 1;
        let story_id = rec
            .story_id
            .filter(|s| !s.trim().is_empty())
            .ok_or(CorpusError::MissingField {
                record,
                field: "story_id",
            })?;
        let line_idx = rec.line_idx.ok_or(CorpusError::MissingField {
            record,
            field: "line_idx",
        })?;
        if line_idx == 0 {
            return Err(CorpusError::InvalidField {
                record,
                field: "line_idx",
                value: "0".into(),
            });
        }
        let character = rec
            .character
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty())
            .ok_or(CorpusError::MissingField {
                record,
                field: "character",
            })?;
        let sentence = rec.sentence.unwrap_or_default().trim().to_string();

        let mut motivation_votes = Vec::with_capacity(rec.motivation.len());
        for selection in &rec.motivation {
            let mut set = BTreeSet::new();
            for raw in selection.iter().filter(|s| !is_blank(s)) {
                let label = MotivationLabel::parse(raw)
                    .map_err(|source| CorpusError::Label { record, source })?;
                set.insert(label);
            }
            motivation_votes.push(set);
        }
        let mut emotion_votes = Vec::with_capacity(rec.emotion.len());
        for selection in &rec.emotion {
            let mut set = BTreeSet::new();
            for raw in selection.iter().filter(|s| !is_blank(s)) {
                let (name, intensity) = split_intensity(raw, record)?;
                let label = EmotionLabel::parse(name)
                    .map_err(|source| CorpusError::Label { record, source })?;
                if intensity.is_none_or(|v| v >= config.min_emotion_intensity) {
                    set.insert(label);
                }
            }
            emotion_votes.push(set);
        }

        let key = (story_id.clone(), line_idx, character.clone());
        let entry = merged.entry(key).or_insert_with(|| AnnotatedLine {
            story_id,
            line_idx,
            character,
            sentence: sentence.clone(),
            motivation_votes: Vec::new(),
            emotion_votes: Vec::new(),
        });
        if entry.sentence.is_empty() {
            entry.sentence = sentence;
        }
        entry.motivation_votes.extend(motivation_votes);
        entry.emotion_votes.extend(emotion_votes);
    }
    Ok(merged.into_values().collect())
}

fn is_blank(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("none")
}

fn split_intensity(raw: &str, record: usize) -> Result<(&str, Option<u32>), CorpusError> {
    match raw.rsplit_once(':') {
        Some((name, level)) => {
            let level = level
                .trim()
                .parse::<u32>()
                .map_err(|_| CorpusError::InvalidField {
                    record,
                    field: "emotion",
                    value: raw.to_string(),
                })?;
            Ok((name, Some(level)))
        }
        None => Ok((raw, None)),
    }
}

/// Reads a release directory (or a single file): `annotations.json` when
/// present, otherwise every `*.csv` below the path.
pub fn read_release(path: &Path) -> Result<Vec<RawRecord>, CorpusError> {
    if path.is_file() {
        return match path.extension().and_then(|e| e.to_str()) {
            Some("csv") => read_release_csv(&[path.to_path_buf()]),
            _ => read_release_json(path),
        };
    }
    let json = path.join("annotations.json");
    if json.is_file() {
        return read_release_json(&json);
    }
    let nested = path.join("json_version").join("annotations.json");
    if nested.is_file() {
        return read_release_json(&nested);
    }
    let mut csvs = Vec::new();
    collect_csv(path, &mut csvs)?;
    if csvs.is_empty() {
        return Err(CorpusError::Format(format!(
            "no annotations.json or *.csv under {}",
            path.display()
        )));
    }
    csvs.sort();
    read_release_csv(&csvs)
}

fn collect_csv(dir: &Path, out: &mut Vec<PathBuf>) -> Result<(), CorpusError> {
    for entry in fs::read_dir(dir)? {
        let p = entry?.path();
        if p.is_dir() {
            collect_csv(&p, out)?;
        } else if p.extension().and_then(|e| e.to_str()) == Some("csv") {
            out.push(p);
        }
    }
    Ok(())
}

/// JSON release layout: `{story_id: {"lines": {"1": {"text", "characters":
/// {name: {"app", "motiv": {ann: {"maslow": [..]}}, "emotion": {ann:
/// {"plutchik": [..]}}}}}}}}`.
pub fn read_release_json(path: &Path) -> Result<Vec<RawRecord>, CorpusError> {
    let text = fs::read_to_string(path)?;
    records_from_json(&serde_json::from_str(&text)?)
}

/// Same as [`read_release_json`] on an already parsed document.
pub fn records_from_json(root: &Value) -> Result<Vec<RawRecord>, CorpusError> {
    let stories = root
        .as_object()
        .ok_or_else(|| CorpusError::Format("top level must be an object keyed by story id".into()))?;
    let mut out = Vec::new();
    for (story_id, story) in stories {
        let lines = story
            .get("lines")
            .and_then(Value::as_object)
            .ok_or_else(|| CorpusError::Format(format!("story {story_id}: missing `lines`")))?;
        for (line_key, line) in lines {
            let line_idx = line_key.trim().parse::<usize>().ok();
            let text = line.get("text").and_then(Value::as_str).map(str::to_string);
            let Some(chars) = line.get("characters").and_then(Value::as_object) else {
                continue;
            };
            for (name, ch) in chars {
                out.push(RawRecord {
                    story_id: Some(story_id.clone()),
                    line_idx,
                    character: Some(name.clone()),
                    sentence: text.clone(),
                    motivation: annotator_lists(ch.get("motiv"), "maslow"),
                    emotion: annotator_lists(ch.get("emotion"), "plutchik"),
                });
            }
        }
    }
    Ok(out)
}

fn annotator_lists(section: Option<&Value>, key: &str) -> Vec<Vec<String>> {
    let Some(anns) = section.and_then(Value::as_object) else {
        return Vec::new();
    };
    anns.values()
        .map(|ann| {
            ann.get(key)
                .and_then(Value::as_array)
                .map(|xs| {
                    xs.iter()
                        .filter_map(Value::as_str)
                        .map(str::to_string)
                        .collect()
                })
                .unwrap_or_default()
        })
        .collect()
}

/// CSV release layout: one row per annotator with columns `storyid`,
/// `linenum`, `char`, `sentence` and a `maslow` and/or `plutchik` column
/// holding a JSON list.
pub fn read_release_csv(paths: &[PathBuf]) -> Result<Vec<RawRecord>, CorpusError> {
    let mut out = Vec::new();
    for path in paths {
        let mut rdr = csv::Reader::from_path(path)?;
        let headers = rdr.headers()?.clone();
        let col = |name: &str| headers.iter().position(|h| h.trim() == name);
        let (story, line, chr, sent) = (col("storyid"), col("linenum"), col("char"), col("sentence"));
        let (maslow, plutchik) = (col("maslow"), col("plutchik"));
        if maslow.is_none() && plutchik.is_none() {
            continue;
        }
        for (row_no, row) in rdr.records().enumerate() {
            let row = row?;
            let get = |c: Option<usize>| c.and_then(|i| row.get(i)).map(str::to_string);
            let line_idx = match get(line) {
                Some(v) if !v.trim().is_empty() => {
                    Some(v.trim().parse::<usize>().map_err(|_| CorpusError::InvalidField {
                        record: row_no + 2,
                        field: "linenum",
                        value: v.clone(),
                    })?)
                }
                _ => None,
            };
            let list = |c: Option<usize>| -> Result<Vec<Vec<String>>, CorpusError> {
                match get(c) {
                    None => Ok(Vec::new()),
                    Some(cell) => Ok(vec![parse_list_cell(&cell).map_err(|_| {
                        CorpusError::InvalidField {
                            record: row_no + 2,
                            field: "labels",
                            value: cell.clone(),
                        }
                    })?]),
                }
            };
            out.push(RawRecord {
                story_id: get(story),
                line_idx,
                character: get(chr),
                sentence: get(sent),
                motivation: list(maslow)?,
                emotion: list(plutchik)?,
            });
        }
    }
    Ok(out)
}

fn parse_list_cell(cell: &str) -> Result<Vec<String>, serde_json::Error> {
    let t = cell.trim();
    if t.is_empty() {
        return Ok(Vec::new());
    }
    if t.starts_with('[') {
        serde_json::from_str(t)
    } else {
        Ok(t.split(',').map(|s| s.trim().to_string()).collect())
    }
}
