//! Consolidation of JSON outputs.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

/// Consolidated view of every JSON file under a directory.
#[derive(Debug, Clone, PartialEq)]
pub struct Consolidated {
    pub json: Value,
    pub table: String,
    pub pass: bool,
}

fn collect(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            collect(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "json") && p.file_name().is_some_and(|n| n != "report.json") {
            out.push(p);
        }
    }
    Ok(())
}

/// Verdict of one file: its `pass` field, else `holds`, else none.
fn verdict(v: &Value) -> Option<bool> {
    v.get("pass").or_else(|| v.get("holds")).and_then(Value::as_bool)
}

fn headline(v: &Value) -> String {
    let keys = ["model", "epsilon", "slope", "r2", "sup_value", "worst_ratio"];
    keys.iter()
        .filter_map(|k| v.get(*k).filter(|x| !x.is_null()).map(|x| format!("{k}={x}")))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Reads every `*.json` under `dir` (recursively), writes `dir/report.json` and
/// returns the consolidated JSON with a table.
pub fn report(dir: &Path) -> Result<Consolidated> {
    if !dir.is_dir() {
        return Err(Error::Config(format!("{} is not a directory", dir.display())));
    }
    let mut files = Vec::new();
    collect(dir, &mut files)?;
    if files.is_empty() {
        return Err(Error::NoSamples(format!("no JSON outputs under {}", dir.display())));
    }
    let mut entries = Map::new();
    let mut table = format!("{:<40} {:<6} summary\n", "file", "pass");
    let mut pass = true;
    for f in &files {
        let text = fs::read_to_string(f)?;
        let v: Value = serde_json::from_str(&text)?;
        let rel = f.strip_prefix(dir).unwrap_or(f).display().to_string();
        let verdict = verdict(&v);
        if verdict == Some(false) {
            pass = false;
        }
        let mark = match verdict {
            Some(true) => "yes",
            Some(false) => "no",
            None => "-",
        };
        table.push_str(&format!("{rel:<40} {mark:<6} {}\n", headline(&v)));
        entries.insert(rel, v);
    }
    let json = json!({ "pass": pass, "files": Value::Object(entries) });
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(&json)?)?;
    Ok(Consolidated { json, table, pass })
}
