use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use comma_core::labels::{EmotionLabel, MotivationLabel};
use comma_core::understanding::{joint_matrix, PredictionRecord};
use serde_json::json;

use super::{guard_dir, log_run, read_split, require, write_json};
use crate::config::Settings;
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct MatrixArgs {
    /// EU predictions (JSON lines from `predict --task eu`).
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Corpus directory holding the gold motivations [default: <home>/corpus].
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output directory [default: <home>/reports/matrix].
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also render an SVG heatmap.
    #[arg(long)]
    svg: bool,
    #[arg(long)]
    force: bool,
}

pub fn visualize(a: MatrixArgs, home: &Path, s: &mut Settings) -> CliResult<()> {
    let preds_path = s
        .path("predictions", a.predictions, PathBuf::new)?;
    if preds_path.as_os_str().is_empty() {
        return Err(CliError::config("--predictions is required"));
    }
    let corpus = s.path("corpus", a.corpus, || home.join("corpus"))?;
    let out = s.path("out", a.out, || home.join("reports").join("matrix"))?;
    let svg = s.switch("svg", a.svg)?;
    let force = s.switch("force", a.force)?;
    require(&preds_path, "predictions")?;
    guard_dir(&out, force)?;
    log_run("visualize-matrix", s, None);

    let gold: BTreeMap<String, BTreeSet<MotivationLabel>> =
        read_split(&corpus, "all")?.into_iter().map(|i| (i.id(), i.motivations)).collect();
    let text = fs::read_to_string(&preds_path)?;
    let mut rows = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: PredictionRecord = serde_json::from_str(line)
            .map_err(|e| CliError::data(format!("{} line {}: {e}", preds_path.display(), n + 1)))?;
        if rec.p_f.len() != EmotionLabel::ALL.len() {
            return Err(CliError::data(format!(
                "{} line {}: {} probabilities; emotion predictions have {}",
                preds_path.display(),
                n + 1,
                rec.p_f.len(),
                EmotionLabel::ALL.len()
            )));
        }
        let ms = gold
            .get(&rec.instance_id)
            .ok_or_else(|| CliError::data(format!("instance {} is not in the corpus", rec.instance_id)))?;
        rows.push((ms.clone(), rec.p_f));
    }
    if rows.is_empty() {
        return Err(CliError::data(format!("{} holds no predictions", preds_path.display())));
    }
    let m = joint_matrix(&rows).map_err(CliError::data)?;
    fs::create_dir_all(&out)?;
    fs::write(out.join("matrix.csv"), m.to_csv(1.0))?;
    fs::write(out.join("matrix_e-3.csv"), m.to_csv(1e3))?;
    write_json(
        &out.join("matrix.json"),
        &json!({
            "rows": MotivationLabel::ALL.iter().map(|l| l.id()).collect::<Vec<_>>(),
            "columns": EmotionLabel::ALL.iter().map(|l| l.id()).collect::<Vec<_>>(),
            "values": m.values.iter().map(|r| r.iter().map(|v| if v.is_nan() { None } else { Some(*v) }).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "counts": m.counts,
            "empty_rows": m.empty_rows,
            "n_predictions": rows.len(),
            "scaled_file_unit": "1e-3",
        }),
    )?;
    if svg {
        fs::write(out.join("matrix.svg"), m.to_svg())?;
    }
    println!("{}", m.to_csv(1e3).trim_end());
    Ok(())
}
