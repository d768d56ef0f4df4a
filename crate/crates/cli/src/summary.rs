//! `report DIR`: verdict aggregation over the `.ndjson` report files of a run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::CliError;

#[derive(Debug, Default)]
pub struct SuiteSummary {
    pub reports: usize,
    pub violated: Vec<String>,
    pub inconclusive: usize,
    /// Smallest finite margin and the bound that attains it.
    pub worst: Option<(f64, String)>,
}

fn num(v: &Value, key: &str) -> f64 {
    v.get(key).and_then(Value::as_f64).unwrap_or(f64::NAN)
}

/// Reads every `<suite>.ndjson` in `dir`; fails when there is none.
pub fn summarize(dir: &Path) -> Result<BTreeMap<String, SuiteSummary>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Config(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".ndjson") && !name.ends_with(".records.ndjson")
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CliError::Config(format!("{}: no report artifacts (*.ndjson)", dir.display())));
    }
    let mut out = BTreeMap::new();
    for path in files {
        let suite = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_suffix(".ndjson"))
            .unwrap_or("")
            .to_string();
        let text = fs::read_to_string(&path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let mut s = SuiteSummary::default();
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let v: Value = serde_json::from_str(line)
                .map_err(|e| CliError::Config(format!("{}:{}:{}: {e}", path.display(), i + 1, e.column())))?;
            let name = v.get("bound_name").and_then(Value::as_str).unwrap_or("?").to_string();
            s.reports += 1;
            match v.get("verdict").and_then(Value::as_str) {
                Some("holds") => {}
                Some("violated") => s.violated.push(name.clone()),
                _ => s.inconclusive += 1,
            }
            let margin = num(&v, "theoretical") + 3.0 * num(&v, "stderr") + num(&v, "tolerance") - num(&v, "empirical");
            if margin.is_finite() && s.worst.as_ref().is_none_or(|(m, _)| margin < *m) {
                s.worst = Some((margin, name));
            }
        }
        out.insert(suite, s);
    }
    Ok(out)
}

/// Prints the summary; returns whether every report holds.
pub fn print(summaries: &BTreeMap<String, SuiteSummary>) -> bool {
    let mut pass = true;
    for (suite, s) in summaries {
        let worst = match &s.worst {
            Some((m, name)) => format!("worst={name} margin={m:.6e}"),
            None => "worst=none".to_string(),
        };
        println!(
            "{suite}: reports={} violated={} inconclusive={} {worst}",
            s.reports,
            s.violated.len(),
            s.inconclusive
        );
        for name in &s.violated {
            println!("  VIOLATED {suite}/{name}");
        }
        pass &= s.violated.is_empty() && s.inconclusive == 0 && s.reports > 0;
    }
    println!("{}", if pass { "PASS" } else { "FAIL" });
    pass
}
