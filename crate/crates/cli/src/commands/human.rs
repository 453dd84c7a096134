use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use comma_core::metrics::human::{export_human_eval, import_human_eval, read_sheet, write_sheet, BlindingKey, PairedOutput};
use serde_json::Value;

use super::{guard_dir, guard_file, log_run, read_json, require, to_pretty, write_json};
use crate::config::Settings;
use crate::error::{CliError, CliResult};

pub const SHEET_FILE: &str = "sheet.csv";
pub const KEY_FILE: &str = "key.json";

#[derive(Debug, Args)]
pub struct ExportArgs {
    /// Generated actions of the first system (`predict --task cag` output).
    #[arg(long)]
    first: Option<PathBuf>,
    /// Generated actions of the second system.
    #[arg(long)]
    second: Option<PathBuf>,
    /// Names of the two systems, comma separated [default: file stems].
    #[arg(long)]
    systems: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory [default: <home>/human_eval].
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn read_actions(path: &Path) -> CliResult<BTreeMap<String, (String, String)>> {
    require(path, "generated actions")?;
    let mut out = BTreeMap::new();
    for (n, line) in fs::read_to_string(path)?.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).map_err(|e| CliError::data(format!("{} line {}: {e}", path.display(), n + 1)))?;
        let field = |k: &str| {
            v.get(k)
                .and_then(Value::as_str)
                .map(str::to_string)
                .ok_or_else(|| CliError::data(format!("{} line {}: missing `{k}`", path.display(), n + 1)))
        };
        let id = field("instance_id")?;
        if out.insert(id.clone(), (field("input")?, field("action")?)).is_some() {
            return Err(CliError::data(format!("{}: duplicate instance {id}", path.display())));
        }
    }
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or_else(|| "system".into(), |s| s.to_string_lossy().into_owned())
}

pub fn export(a: ExportArgs, home: &Path, s: &mut Settings) -> CliResult<()> {
    let first = s.path("first", a.first, PathBuf::new)?;
    let second = s.path("second", a.second, PathBuf::new)?;
    if first.as_os_str().is_empty() || second.as_os_str().is_empty() {
        return Err(CliError::config("--first and --second are required"));
    }
    let names = s.get("systems", a.systems, format!("{},{}", stem(&first), stem(&second)))?;
    let names: Vec<&str> = names.split(',').map(str::trim).collect();
    let [n1, n2]: [&str; 2] = names
        .try_into()
        .map_err(|_| CliError::config("--systems takes exactly two comma-separated names"))?;
    if n1 == n2 {
        return Err(CliError::config("--systems names must differ"));
    }
    let seed = s.get("seed", a.seed, 0)?;
    let out = s.path("out", a.out, || home.join("human_eval"))?;
    let force = s.switch("force", a.force)?;
    guard_dir(&out, force)?;
    log_run("export-human-eval", s, Some(seed));

    let xs = read_actions(&first)?;
    let ys = read_actions(&second)?;
    if xs.keys().ne(ys.keys()) {
        return Err(CliError::data("the two prediction files cover different instances"));
    }
    let items: Vec<PairedOutput> = xs
        .into_iter()
        .zip(ys)
        .map(|((id, (context, x)), (_, (_, y)))| PairedOutput { id, context, first: x, second: y })
        .collect();
    if items.is_empty() {
        return Err(CliError::data("no generated actions to compare"));
    }
    let (rows, key) = export_human_eval(&items, [n1, n2], seed);
    fs::create_dir_all(&out)?;
    write_sheet(&out.join(SHEET_FILE), &rows)?;
    write_json(&out.join(KEY_FILE), &key)?;
    println!(
        "{} items; hand {} to annotators and keep {} hidden",
        rows.len(),
        out.join(SHEET_FILE).display(),
        out.join(KEY_FILE).display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// Blinding key written by export-human-eval.
    #[arg(long)]
    key: Option<PathBuf>,
    /// Completed sheets, one per annotator (at least three).
    #[arg(long, num_args = 1..)]
    sheets: Vec<PathBuf>,
    /// Summary file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

pub fn import(a: ImportArgs, home: &Path, s: &mut Settings) -> CliResult<()> {
    let key_path = s.path("key", a.key, || home.join("human_eval").join(KEY_FILE))?;
    let force = s.switch("force", a.force)?;
    if let Some(out) = &a.out {
        guard_file(out, force)?;
    }
    require(&key_path, "blinding key")?;
    log_run("import-human-eval", s, None);
    let key: BlindingKey = read_json(&key_path)?;
    let sheets = a
        .sheets
        .iter()
        .map(|p| {
            require(p, "sheet")?;
            read_sheet(p).map_err(CliError::from)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let summary = import_human_eval(&sheets, &key)?;
    match &a.out {
        Some(p) => write_json(p, &summary)?,
        None => print!("{}", to_pretty(&summary)),
    }
    Ok(())
}
