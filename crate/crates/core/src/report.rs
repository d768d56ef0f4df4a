//! Uniform verdict records for every checked inequality.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::space::Point;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::Holds => "holds",
            Verdict::Violated => "violated",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    /// Worst of two verdicts: violated beats inconclusive beats holds.
    pub fn and(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Violated, _) | (_, Violated) => Violated,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => Holds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub x: Point,
    pub y: Point,
}

/// One checked inequality `empirical ≤ theoretical`.
///
/// `theoretical` is the side expected to dominate. `stderr` is the Monte Carlo
/// error of whichever side is random, `tolerance` any declared deterministic
/// allowance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub parameters: BTreeMap<String, Value>,
    pub theoretical: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl BoundReport {
    /// Builds a report and decides its verdict.
    pub fn check(
        bound_name: impl Into<String>,
        theoretical: f64,
        empirical: f64,
        stderr: f64,
        tolerance: f64,
    ) -> Self {
        let verdict = if theoretical.is_nan() || empirical.is_nan() || stderr.is_nan() {
            Verdict::Inconclusive
        } else if empirical <= theoretical + 3.0 * stderr + tolerance {
            Verdict::Holds
        } else {
            Verdict::Violated
        };
        Self {
            bound_name: bound_name.into(),
            parameters: BTreeMap::new(),
            theoretical,
            empirical,
            stderr,
            tolerance,
            verdict,
            witness: None,
        }
    }

    pub fn inconclusive(bound_name: impl Into<String>, reason: &str) -> Self {
        let mut r = Self::check(bound_name, f64::NAN, f64::NAN, 0.0, 0.0);
        r.parameters.insert("reason".into(), Value::from(reason));
        r
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn with_witness(mut self, x: Point, y: Point) -> Self {
        self.witness = Some(Witness { x, y });
        self
    }

    pub fn holds(&self) -> bool {
        self.verdict == Verdict::Holds
    }

    /// `theoretical + 3 stderr + tolerance - empirical`; negative when violated.
    pub fn margin(&self) -> f64 {
        self.theoretical + 3.0 * self.stderr + self.tolerance - self.empirical
    }

    /// Single-line JSON.
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report is serializable")
    }
}

pub fn write_ndjson<W: Write>(reports: &[BoundReport], out: &mut W) -> io::Result<()> {
    for r in reports {
        writeln!(out, "{}", r.to_json_line())?;
    }
    Ok(())
}

pub const REPORT_CSV_HEADER: &str = "bound_name,parameters,theoretical,empirical,stderr,tolerance,verdict";

/// CSV row; parameters are flattened as `key=value` pairs joined by `;`.
pub fn csv_row(r: &BoundReport) -> String {
    let params: Vec<String> = r
        .parameters
        .iter()
        .map(|(k, v)| match v {
            Value::String(s) => format!("{k}={s}"),
            other => format!("{k}={other}"),
        })
        .collect();
    format!(
        "{},\"{}\",{},{},{},{},{}",
        r.bound_name,
        params.join(";").replace('"', "'"),
        r.theoretical,
        r.empirical,
        r.stderr,
        r.tolerance,
        r.verdict.as_str()
    )
}

/// Combined verdict of a set of reports; inconclusive when empty.
pub fn overall(reports: &[BoundReport]) -> Verdict {
    if reports.is_empty() {
        return Verdict::Inconclusive;
    }
    reports.iter().fold(Verdict::Holds, |v, r| v.and(r.verdict))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_rule() {
        assert!(BoundReport::check("b", 1.0, 1.0, 0.0, 0.0).holds());
        assert!(BoundReport::check("b", 1.0, 1.2, 0.1, 0.0).holds());
        assert!(!BoundReport::check("b", 1.0, 1.4, 0.1, 0.0).holds());
        assert!(BoundReport::check("b", 1.0, 1.4, 0.1, 0.11).holds());
        assert!(BoundReport::check("b", f64::INFINITY, 5.0, 0.0, 0.0).holds());
        assert_eq!(BoundReport::check("b", f64::NAN, 0.0, 0.0, 0.0).verdict, Verdict::Inconclusive);
    }

    #[test]
    fn json_round_trip_keeps_parameters_sorted() {
        let r = BoundReport::check("f_k", 0.5, 0.4, 0.0, 0.0)
            .param("t", 2.0)
            .param("K", 0.0)
            .with_witness(Point::new(vec![0.0]), Point::new(vec![1.0]));
        let line = r.to_json_line();
        assert!(line.find("\"K\"").unwrap() < line.find("\"t\"").unwrap());
        let back: BoundReport = serde_json::from_str(&line).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn overall_verdict() {
        let ok = BoundReport::check("a", 1.0, 0.0, 0.0, 0.0);
        let bad = BoundReport::check("b", 0.0, 1.0, 0.0, 0.0);
        assert_eq!(overall(&[ok.clone()]), Verdict::Holds);
        assert_eq!(overall(&[ok, bad]), Verdict::Violated);
        assert_eq!(overall(&[]), Verdict::Inconclusive);
    }
}
