//! Report files, accuracy-versus-shift curves and comparison tables.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::protocol::{EvaluationReport, Leaderboard, Metric, FORMAT_VERSION};

pub fn write_report<W: Write>(report: &EvaluationReport, mut writer: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut writer, report)?;
    writeln!(writer)?;
    Ok(())
}

pub fn report_to_string(report: &EvaluationReport) -> String {
    let mut buf = Vec::new();
    write_report(report, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

pub fn read_report<R: Read>(reader: R) -> Result<EvaluationReport> {
    let report: EvaluationReport = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        source_name: "report".into(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if report.format_version != FORMAT_VERSION {
        return Err(Error::Validation(format!(
            "unsupported report format version {}",
            report.format_version
        )));
    }
    Ok(report)
}

/// One plotted point of the accuracy-versus-shift curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub alpha: f64,
    pub delta: f64,
    pub acc_mean: f64,
    pub acc_spread: f64,
}

/// Curve points sorted by ascending shift, ties by ascending peak.
pub fn curve(report: &EvaluationReport) -> Vec<CurvePoint> {
    let mut points: Vec<CurvePoint> = report
        .rows
        .iter()
        .map(|r| CurvePoint {
            alpha: r.alpha,
            delta: r.delta,
            acc_mean: r.accuracy,
            acc_spread: r.spread,
        })
        .collect();
    points.sort_by(|a, b| {
        a.delta
            .total_cmp(&b.delta)
            .then(a.alpha.total_cmp(&b.alpha))
    });
    points
}

/// `alpha,delta,acc_mean,acc_spread` rows with shortest round-trip floats.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("alpha,delta,acc_mean,acc_spread\n");
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            p.alpha, p.delta, p.acc_mean, p.acc_spread
        );
    }
    out
}

fn percent(metric: Metric, value: f64) -> String {
    match metric {
        Metric::Dr => format!("{:.1}%", value * 100.0),
        _ => format!("{:.2}", value * 100.0),
    }
}

/// Delimited table: values in percent plus one rank column per metric.
pub fn leaderboard_csv(board: &Leaderboard) -> String {
    let mut out = String::from("method");
    for m in &board.metrics {
        let _ = write!(out, ",{0},{0}_rank", m.label());
    }
    out.push('\n');
    for row in &board.rows {
        out.push_str(&csv_field(&row.method));
        for (col, m) in board.metrics.iter().enumerate() {
            let _ = write!(out, ",{},{}", percent(*m, row.values[col]), row.ranks[col]);
        }
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Markdown table; ranks 1, 2 and 3 are marked `¹`, `²` and `³`.
pub fn leaderboard_markdown(board: &Leaderboard) -> String {
    let mut out = String::from("| Method |");
    for m in &board.metrics {
        let arrow = if m.higher_is_better() { "↑" } else { "↓" };
        let _ = write!(out, " {}{arrow} |", m.label());
    }
    out.push_str("\n|---|");
    for _ in &board.metrics {
        out.push_str("---:|");
    }
    out.push('\n');
    for row in &board.rows {
        let _ = write!(out, "| {} |", row.method.replace('|', "\\|"));
        for (col, m) in board.metrics.iter().enumerate() {
            let marker = match row.ranks[col] {
                1 => "¹",
                2 => "²",
                3 => "³",
                _ => "",
            };
            let _ = write!(out, " {}{marker} |", percent(*m, row.values[col]));
        }
        out.push('\n');
    }
    out
}
