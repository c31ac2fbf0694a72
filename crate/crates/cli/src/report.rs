//! Merged CSV tables and SVG bar charts over eval, analysis and dataset
//! statistics outputs.

use std::fmt::Write as _;

use navhint::analysis::{Bucket, HintQualityReport};
use navhint::hints::DatasetStats;
use navhint::metrics::MetricReport;
use serde::{Deserialize, Serialize};

pub const EVAL_SCHEMA_VERSION: u32 = 1;

/// What `navhint eval` writes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    pub label: String,
    pub split: Option<String>,
    pub mode: String,
    pub metrics: MetricReport,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

/// One row per eval report; hint-quality columns are filled from the
/// analysis report at the same position, when there is one.
pub fn metrics_csv(evals: &[EvalReport], analyses: &[HintQualityReport]) -> String {
    let mut out = String::from("label,episodes,ne,sr,spl,ndtw,sdtw,cls,bleu1,bleu4\n");
    for (i, e) in evals.iter().enumerate() {
        let m = &e.metrics;
        let a = analyses.get(i);
        writeln!(
            out,
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{},{}",
            e.label,
            m.count,
            m.ne,
            m.sr,
            m.spl,
            m.ndtw,
            m.sdtw,
            m.cls,
            opt(a.and_then(|a| a.bleu1)),
            opt(a.and_then(|a| a.bleu4)),
        )
        .unwrap();
    }
    out
}

fn bucket_rows(label: &str, a: &HintQualityReport) -> Vec<(String, Bucket)> {
    let mut rows: Vec<(String, Bucket)> =
        a.ambiguity.iter().map(|(c, b)| (format!("{label},ambiguity,{}", c.short_name()), *b)).collect();
    let d = &a.distinctive;
    for (name, b) in [
        ("exact-right", d.exact_right),
        ("exact-wrong", d.exact_wrong),
        ("object-right", d.object_right),
        ("object-wrong", d.object_wrong),
    ] {
        rows.push((format!("{label},distinctive,{name}"), b));
    }
    rows
}

pub fn accuracy_csv(labels: &[String], analyses: &[HintQualityReport]) -> String {
    let mut out = String::from("label,table,bucket,total,correct,accuracy\n");
    for (label, a) in labels.iter().zip(analyses) {
        for (key, b) in bucket_rows(label, a) {
            writeln!(out, "{key},{},{},{}", b.total, b.correct, opt(b.accuracy)).unwrap();
        }
    }
    out
}

pub fn categories_csv(stats: &DatasetStats) -> String {
    let mut out = String::from("category,count,share\n");
    for (c, n) in stats.ranking() {
        writeln!(out, "{},{n},{:.4}", c.short_name(), n as f64 / stats.total as f64).unwrap();
    }
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Horizontal bar chart; `None` values are drawn as an empty bar marked
/// n/a. Bars are scaled against `max`.
pub fn bar_chart(title: &str, bars: &[(String, Option<f64>)], max: f64) -> String {
    let (label_w, bar_w, row_h) = (220.0, 360.0, 22.0);
    let height = 40.0 + row_h * bars.len() as f64 + 10.0;
    let width = label_w + bar_w + 80.0;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<text x="10" y="20" font-size="14">{}</text>"#, escape(title)).unwrap();
    for (i, (label, value)) in bars.iter().enumerate() {
        let y = 34.0 + row_h * i as f64;
        writeln!(s, r#"<text x="10" y="{:.1}">{}</text>"#, y + 14.0, escape(label)).unwrap();
        let (w, text) = match value {
            Some(v) => ((v / max).clamp(0.0, 1.0) * bar_w, format!("{v:.3}")),
            None => (0.0, "n/a".to_string()),
        };
        writeln!(s, r##"<rect x="{label_w}" y="{y:.1}" width="{w:.1}" height="16" fill="#4a78b0"/>"##).unwrap();
        writeln!(s, r#"<text x="{:.1}" y="{:.1}">{text}</text>"#, label_w + w + 6.0, y + 13.0).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

pub fn ambiguity_svg(label: &str, a: &HintQualityReport) -> String {
    let bars: Vec<(String, Option<f64>)> =
        a.ambiguity.iter().map(|(c, b)| (format!("{} (n={})", c.short_name(), b.total), b.accuracy)).collect();
    bar_chart(&format!("Ambiguity clause accuracy: {label}"), &bars, 1.0)
}

pub fn distinctive_svg(label: &str, a: &HintQualityReport) -> String {
    let d = &a.distinctive;
    let bars: Vec<(String, Option<f64>)> = [
        ("exact, right view", d.exact_right),
        ("object, right view", d.object_right),
        ("exact, wrong view", d.exact_wrong),
        ("object, wrong view", d.object_wrong),
    ]
    .into_iter()
    .map(|(n, b)| (format!("{n} (n={})", b.total), b.accuracy))
    .collect();
    bar_chart(&format!("Distinctive object accuracy: {label}"), &bars, 1.0)
}

pub fn categories_svg(stats: &DatasetStats) -> String {
    let bars: Vec<(String, Option<f64>)> =
        stats.ranking().into_iter().map(|(c, n)| (c.short_name().to_string(), Some(n as f64))).collect();
    let max = bars.iter().filter_map(|b| b.1).fold(1.0, f64::max);
    bar_chart("Ambiguity categories", &bars, max)
}
