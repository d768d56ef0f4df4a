#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

pub fn kato(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kato"))
        .args(args)
        .output()
        .expect("kato binary runs")
}

pub fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

pub fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// Runs a suite into `dir`, panicking with its output on an unexpected exit code.
pub fn run_suite(suite: &str, dir: &Path, seed: u64, extra: &[&str], expect: i32) -> Output {
    let d = dir.to_str().unwrap().to_string();
    let s = seed.to_string();
    let mut args = vec![suite, "--seed", &s, "--out", &d];
    args.extend_from_slice(extra);
    let o = kato(&args);
    assert_eq!(code(&o), expect, "{suite}: stdout {} stderr {}", stdout(&o), stderr(&o));
    o
}

pub fn ndjson(path: &Path) -> Vec<Value> {
    std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("{}: {e}", path.display()))
        .lines()
        .map(|l| serde_json::from_str(l).expect("valid JSON line"))
        .collect()
}

pub fn reports(dir: &Path, suite: &str) -> Vec<Value> {
    ndjson(&dir.join(format!("{suite}.ndjson")))
}

pub fn named<'a>(reports: &'a [Value], name: &str) -> Vec<&'a Value> {
    reports.iter().filter(|r| r["bound_name"] == name).collect()
}

pub fn f(v: &Value, key: &str) -> f64 {
    v[key].as_f64().unwrap_or(f64::NAN)
}

pub fn param(v: &Value, key: &str) -> f64 {
    v["parameters"][key].as_f64().unwrap_or(f64::NAN)
}

/// CSV rows as `header -> cell` maps; cells are unquoted but not split on `;`.
pub fn csv(path: &Path) -> Vec<std::collections::HashMap<String, String>> {
    let text = std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().expect("header").split(',').map(str::to_string).collect();
    lines
        .map(|l| {
            let mut cells = Vec::new();
            let mut cur = String::new();
            let mut quoted = false;
            for ch in l.chars() {
                match ch {
                    '"' => quoted = !quoted,
                    ',' if !quoted => cells.push(std::mem::take(&mut cur)),
                    c => cur.push(c),
                }
            }
            cells.push(cur);
            header.iter().cloned().zip(cells).collect()
        })
        .collect()
}

pub fn num(row: &std::collections::HashMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or(f64::NAN)
}
