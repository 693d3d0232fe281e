//! `report`: merges JSON reports and CSV traces into one summary plus a
//! long-format CSV for plotting.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::json;
use crate::Status;

#[derive(Serialize)]
struct Section {
    source: String,
    format: &'static str,
    content: Value,
}

/// One long-format row: source file, key (JSON pointer or column), row index.
struct LongRow {
    source: String,
    key: String,
    index: Option<usize>,
    value: f64,
}

fn collect_inputs(paths: &[PathBuf]) -> anyhow::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(p)
                .with_context(|| format!("listing {}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| matches!(ext(f).as_deref(), Some("json" | "csv")))
                .collect();
            entries.sort();
            out.extend(entries);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            bail!("input {} does not exist", p.display());
        }
    }
    if out.is_empty() {
        bail!("no JSON or CSV reports found in the inputs");
    }
    Ok(out)
}

fn ext(p: &Path) -> Option<String> {
    p.extension().map(|e| e.to_string_lossy().to_ascii_lowercase())
}

fn flatten(source: &str, pointer: String, v: &Value, rows: &mut Vec<LongRow>) {
    match v {
        Value::Number(n) => rows.push(LongRow {
            source: source.to_string(),
            key: pointer,
            index: None,
            value: n.as_f64().unwrap_or(f64::NAN),
        }),
        Value::Bool(b) => rows.push(LongRow {
            source: source.to_string(),
            key: pointer,
            index: None,
            value: f64::from(u8::from(*b)),
        }),
        Value::Array(items) => {
            for (i, x) in items.iter().enumerate() {
                flatten(source, format!("{pointer}/{i}"), x, rows);
            }
        }
        Value::Object(map) => {
            for (k, x) in map {
                flatten(source, format!("{pointer}/{k}"), x, rows);
            }
        }
        _ => {}
    }
}

fn read_csv(path: &Path, source: &str, rows: &mut Vec<LongRow>) -> anyhow::Result<Value> {
    let mut rdr = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let mut count = 0;
    let mut last = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        last.clear();
        for (h, field) in headers.iter().zip(rec.iter()) {
            let value = field.trim().parse::<f64>().unwrap_or(f64::NAN);
            last.push(value);
            rows.push(LongRow {
                source: source.to_string(),
                key: h.clone(),
                index: Some(i),
                value,
            });
        }
        count += 1;
    }
    let final_row: serde_json::Map<String, Value> = headers
        .iter()
        .zip(&last)
        .map(|(h, &v)| (h.clone(), serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)))
        .collect();
    Ok(serde_json::json!({
        "columns": headers,
        "rows": count,
        "last_row": final_row,
    }))
}

pub fn run(cfg: RunConfig) -> anyhow::Result<Status> {
    let inputs = collect_inputs(cfg.inputs.as_deref().unwrap_or(&[]))?;
    let mut sections = Vec::new();
    let mut rows = Vec::new();
    for path in &inputs {
        let source = path.display().to_string();
        match ext(path).as_deref() {
            Some("csv") => {
                let content = read_csv(path, &source, &mut rows)?;
                sections.push(Section {
                    source,
                    format: "csv",
                    content,
                });
            }
            _ => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                let content: Value = serde_json::from_str(&text)
                    .with_context(|| format!("parsing {}", path.display()))?;
                flatten(&source, String::new(), &content, &mut rows);
                sections.push(Section {
                    source,
                    format: "json",
                    content,
                });
            }
        }
    }
    if let Some(p) = &cfg.long_csv {
        let mut w = csv::Writer::from_path(p).with_context(|| format!("creating {}", p.display()))?;
        w.write_record(["source", "key", "index", "value"])?;
        for r in &rows {
            let idx = r.index.map(|i| i.to_string()).unwrap_or_default();
            w.write_record([r.source.as_str(), r.key.as_str(), idx.as_str(), json::fmt17(r.value).as_str()])?;
        }
        w.flush()?;
    }

    #[derive(Serialize)]
    struct Summary {
        tool: &'static str,
        version: &'static str,
        inputs: usize,
        sections: Vec<Section>,
    }
    let summary = Summary {
        tool: "mvlab",
        version: env!("CARGO_PKG_VERSION"),
        inputs: inputs.len(),
        sections,
    };
    json::emit(&summary, cfg.out.as_deref())?;
    Ok(Status::Pass)
}
