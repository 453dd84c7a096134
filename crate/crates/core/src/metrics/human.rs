//! Blinded A/B sheets for human evaluation of generated actions, and the
//! aggregate read back from completed sheets.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{fleiss_kappa, sign_test, MetricsError};
use crate::fingerprint::fingerprint_bytes;

/// Two systems' outputs for the same context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedOutput {
    pub id: String,
    pub context: String,
    pub first: String,
    pub second: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetRow {
    pub id: String,
    pub context: String,
    pub action_a: String,
    pub action_b: String,
    pub choice: String,
    pub quality_0_3: String,
    pub rationality_0_3: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub first_is_a: bool,
    pub digest: String,
}

/// Hidden unblinding key, kept apart from the sheets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlindingKey {
    pub seed: u64,
    pub systems: [String; 2],
    pub items: BTreeMap<String, KeyEntry>,
}

fn digest(id: &str, a: &str, b: &str) -> String {
    let mut bytes = Vec::new();
    for part in [id, a, b] {
        bytes.extend_from_slice(part.as_bytes());
        bytes.push(0);
    }
    fingerprint_bytes(&bytes)[..16].to_string()
}

/// Randomizes the A/B order per row. Choice and score columns are left
/// blank for annotators.
pub fn export_human_eval(
    items: &[PairedOutput],
    systems: [&str; 2],
    seed: u64,
) -> (Vec<SheetRow>, BlindingKey) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(items.len());
    let mut key = BTreeMap::new();
    for it in items {
        let first_is_a: bool = rng.gen();
        let (a, b) = if first_is_a { (&it.first, &it.second) } else { (&it.second, &it.first) };
        key.insert(it.id.clone(), KeyEntry { first_is_a, digest: digest(&it.id, a, b) });
        rows.push(SheetRow {
            id: it.id.clone(),
            context: it.context.clone(),
            action_a: a.clone(),
            action_b: b.clone(),
            choice: String::new(),
            quality_0_3: String::new(),
            rationality_0_3: String::new(),
        });
    }
    let key = BlindingKey { seed, systems: [systems[0].into(), systems[1].into()], items: key };
    (rows, key)
}

pub fn write_sheet(path: &Path, rows: &[SheetRow]) -> Result<(), MetricsError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| MetricsError::Io(e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| MetricsError::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| MetricsError::Io(e.to_string()))
}

pub fn read_sheet(path: &Path) -> Result<Vec<SheetRow>, MetricsError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))?;
    r.deserialize()
        .collect::<Result<Vec<SheetRow>, _>>()
        .map_err(|e| MetricsError::Io(format!("{}: {e}", path.display())))
}

/// Outcome counts use judgments from the first system's point of view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbSummary {
    pub systems: [String; 2],
    pub n_items: usize,
    pub n_annotators: usize,
    pub win: f64,
    pub loss: f64,
    pub tie: f64,
    pub item_wins: u64,
    pub item_losses: u64,
    pub item_ties: u64,
    /// Fleiss' kappa over win/loss/tie judgments.
    pub kappa: f64,
    /// Set when every judgment falls in one category; kappa is then
    /// reported as 1.
    pub kappa_degenerate: bool,
    /// Sign test on per-item majority outcomes.
    pub p_value: f64,
    pub mean_quality: Option<f64>,
    pub mean_rationality: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Win,
    Loss,
    Tie,
}

fn score(row: &SheetRow, field: &str, value: &str) -> Result<Option<u8>, MetricsError> {
    let v = value.trim();
    if v.is_empty() {
        return Ok(None);
    }
    match v.parse::<u8>() {
        Ok(s) if s <= 3 => Ok(Some(s)),
        _ => Err(MetricsError::Validation {
            row: row.id.clone(),
            message: format!("{field} must be 0-3, got {v:?}"),
        }),
    }
}

/// Unblinds and aggregates at least three completed sheets over the same ids.
pub fn import_human_eval(sheets: &[Vec<SheetRow>], key: &BlindingKey) -> Result<AbSummary, MetricsError> {
    if sheets.len() < 3 {
        return Err(MetricsError::Validation {
            row: "-".into(),
            message: format!("need completed sheets from at least 3 annotators, got {}", sheets.len()),
        });
    }
    let ids: BTreeSet<&str> = key.items.keys().map(String::as_str).collect();
    let mut per_item: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    let (mut q_sum, mut q_n, mut r_sum, mut r_n) = (0.0, 0usize, 0.0, 0usize);
    for sheet in sheets {
        let seen: BTreeSet<&str> = sheet.iter().map(|r| r.id.as_str()).collect();
        if seen != ids || sheet.len() != ids.len() {
            return Err(MetricsError::Validation {
                row: "-".into(),
                message: "sheet ids do not match the blinding key".into(),
            });
        }
        for row in sheet {
            let entry = &key.items[&row.id];
            if digest(&row.id, &row.action_a, &row.action_b) != entry.digest {
                return Err(MetricsError::Integrity(row.id.clone()));
            }
            let picked_a = match row.choice.trim().to_ascii_lowercase().as_str() {
                "a" => Some(true),
                "b" => Some(false),
                "tie" => None,
                other => {
                    return Err(MetricsError::Validation {
                        row: row.id.clone(),
                        message: format!("choice must be A, B or tie, got {other:?}"),
                    })
                }
            };
            let outcome = match picked_a {
                None => Outcome::Tie,
                Some(a) if a == entry.first_is_a => Outcome::Win,
                Some(_) => Outcome::Loss,
            };
            per_item.entry(row.id.as_str()).or_insert([0; 3])[outcome as usize] += 1;
            if let Some(q) = score(row, "quality_0_3", &row.quality_0_3)? {
                q_sum += f64::from(q);
                q_n += 1;
            }
            if let Some(r) = score(row, "rationality_0_3", &row.rationality_0_3)? {
                r_sum += f64::from(r);
                r_n += 1;
            }
        }
    }
    let m = sheets.len();
    let judgments = (per_item.len() * m) as f64;
    let mut totals = [0usize; 3];
    let (mut iw, mut il, mut it) = (0, 0, 0);
    for c in per_item.values() {
        for k in 0..3 {
            totals[k] += c[k];
        }
        match c[0].cmp(&c[1]) {
            std::cmp::Ordering::Greater => iw += 1,
            std::cmp::Ordering::Less => il += 1,
            std::cmp::Ordering::Equal => it += 1,
        }
    }
    let matrix: Vec<Vec<usize>> = per_item.values().map(|c| c.to_vec()).collect();
    let (kappa, kappa_degenerate) = match fleiss_kappa(&matrix, m) {
        Ok(k) => (k, false),
        Err(MetricsError::Undefined(_)) => (1.0, true),
        Err(e) => return Err(e),
    };
    let mean = |s: f64, n: usize| (n > 0).then(|| s / n as f64);
    Ok(AbSummary {
        systems: key.systems.clone(),
        n_items: per_item.len(),
        n_annotators: m,
        win: totals[0] as f64 / judgments,
        loss: totals[1] as f64 / judgments,
        tie: totals[2] as f64 / judgments,
        item_wins: iw,
        item_losses: il,
        item_ties: it,
        kappa,
        kappa_degenerate,
        p_value: sign_test(iw, il),
        mean_quality: mean(q_sum, q_n),
        mean_rationality: mean(r_sum, r_n),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn items(n: usize) -> Vec<PairedOutput> {
        (0..n)
            .map(|i| PairedOutput {
                id: format!("s{i}:1:Kim"),
                context: format!("Kim has love motivation {i}"),
                first: format!("Kim called her mom {i}."),
                second: format!("Kim went to bed {i}."),
            })
            .collect()
    }

    fn complete(rows: &[SheetRow], key: &BlindingKey, pick_first: bool) -> Vec<SheetRow> {
        rows.iter()
            .map(|r| {
                let first_is_a = key.items[&r.id].first_is_a;
                let choose_a = first_is_a == pick_first;
                SheetRow {
                    choice: if choose_a { "A" } else { "B" }.into(),
                    quality_0_3: "3".into(),
                    rationality_0_3: "2".into(),
                    ..r.clone()
                }
            })
            .collect()
    }

    #[test]
    fn unanimous_first_system() {
        let (rows, key) = export_human_eval(&items(100), ["ours", "base"], 5);
        assert!(rows.iter().any(|r| key.items[&r.id].first_is_a));
        assert!(rows.iter().any(|r| !key.items[&r.id].first_is_a));
        let sheets: Vec<_> = (0..3).map(|_| complete(&rows, &key, true)).collect();
        let s = import_human_eval(&sheets, &key).unwrap();
        assert_eq!((s.win, s.loss, s.tie), (1.0, 0.0, 0.0));
        assert_eq!(s.kappa, 1.0);
        assert!(s.kappa_degenerate);
        assert!(s.p_value < 1e-20);
        assert_eq!(s.mean_quality, Some(3.0));
    }

    #[test]
    fn csv_round_trip_keeps_blinding() {
        let dir = tempfile::tempdir().unwrap();
        let (rows, _) = export_human_eval(&items(7), ["ours", "base"], 1);
        let p = dir.path().join("sheet.csv");
        write_sheet(&p, &rows).unwrap();
        let back = read_sheet(&p).unwrap();
        assert_eq!(back, rows);
        let text = std::fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("id,context,action_a,action_b,choice,quality_0_3,rationality_0_3"));
        assert!(!text.contains("first_is_a"));
    }

    #[test]
    fn validation_errors() {
        let (rows, key) = export_human_eval(&items(3), ["ours", "base"], 2);
        let good = complete(&rows, &key, true);
        let mut bad = good.clone();
        bad[1].quality_0_3 = "4".into();
        let err = import_human_eval(&[good.clone(), good.clone(), bad], &key).unwrap_err();
        assert_eq!(
            err,
            MetricsError::Validation { row: rows[1].id.clone(), message: "quality_0_3 must be 0-3, got \"4\"".into() }
        );
        let mut swapped = good.clone();
        let row = &mut swapped[0];
        std::mem::swap(&mut row.action_a, &mut row.action_b);
        assert_eq!(
            import_human_eval(&[good.clone(), good.clone(), swapped], &key).unwrap_err(),
            MetricsError::Integrity(rows[0].id.clone())
        );
        assert!(import_human_eval(&[good.clone(), good], &key).is_err());
    }

    #[test]
    fn mixed_judgments() {
        let (rows, key) = export_human_eval(&items(10), ["ours", "base"], 9);
        let a = complete(&rows, &key, true);
        let b = complete(&rows, &key, false);
        let mut c = a.clone();
        c[0].choice = "tie".into();
        let s = import_human_eval(&[a, b, c], &key).unwrap();
        assert_eq!(s.item_wins + s.item_losses + s.item_ties, 10);
        assert!((s.win + s.loss + s.tie - 1.0).abs() < 1e-12);
        assert!(!s.kappa_degenerate);
    }
}
