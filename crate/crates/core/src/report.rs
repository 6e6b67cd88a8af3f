//! CSV and SVG emission for sweeps, benchmarks, attack runs and training logs.
//!
//! CSVs are comma separated with a header row, `.` decimals and LF line
//! endings. Floats use Rust's shortest round-trip formatting, so identical
//! inputs give identical bytes.

use std::fmt::Write;

use crate::eval::{BenchRow, ExampleResult, SweepTable};

pub const SWEEP_HEADER: &str = "x_db,attack,snr_db,accuracy_all,accuracy_clean_correct,fooling_rate,n";
pub const BENCH_HEADER: &str = "psr_db,seconds_pca,seconds_iterative,ratio";
pub const ATTACK_HEADER: &str =
    "index,true_label,clean_prediction,adversarial_prediction,epsilon_star,p_max,target_class,fooled";
pub const TRAIN_LOG_HEADER: &str = "epoch,train_loss,test_accuracy";

fn num(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else if v == f64::INFINITY {
        "inf".into()
    } else {
        format!("{v}")
    }
}

pub fn sweep_csv(table: &SweepTable) -> String {
    let mut s = format!("{SWEEP_HEADER}\n");
    for r in table.rows() {
        let snr = r.snr_db.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{},{}",
            num(r.x_db),
            r.attack,
            snr,
            num(r.accuracy_all),
            num(r.accuracy_clean_correct),
            num(r.fooling_rate),
            r.n
        )
        .unwrap();
    }
    s
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = format!("{BENCH_HEADER}\n");
    for r in rows {
        writeln!(
            s,
            "{},{},{},{}",
            num(r.psr_db),
            num(r.seconds_pca),
            num(r.seconds_iterative),
            num(r.ratio())
        )
        .unwrap();
    }
    s
}

/// Per-example rows; `epsilon_star` is the applied perturbation norm, and
/// `p_max` and `target_class` are empty when not applicable.
pub fn attack_csv(results: &[ExampleResult]) -> String {
    let mut s = format!("{ATTACK_HEADER}\n");
    for r in results {
        let target = r.target_class.map(|t| t.to_string()).unwrap_or_default();
        let budget = r.budget.map(num).unwrap_or_default();
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.index,
            r.true_label,
            r.clean_prediction,
            r.adversarial_prediction,
            num(r.perturbation_norm),
            budget,
            target,
            r.fooled()
        )
        .unwrap();
    }
    s
}

/// One epoch of a training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
}

pub fn train_log_csv(rows: &[TrainLogRow]) -> String {
    let mut s = format!("{TRAIN_LOG_HEADER}\n");
    for r in rows {
        writeln!(s, "{},{},{}", r.epoch, num(r.train_loss), num(r.test_accuracy)).unwrap();
    }
    s
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Line plot of `accuracy_all` against `x_db`: one polyline per attack and a
/// dashed horizontal line at the unattacked accuracy.
pub fn sweep_svg(table: &SweepTable, x_label: &str, title: &str) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (64.0, 150.0, 40.0, 56.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let xs: Vec<f64> = table.rows().iter().map(|r| r.x_db).filter(|x| x.is_finite()).collect();
    let (mut x0, mut x1) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    if !x0.is_finite() {
        (x0, x1) = (0.0, 1.0);
    }
    if x1 - x0 < 1e-9 {
        x0 -= 1.0;
        x1 += 1.0;
    }
    let px = |x: f64| left + (x - x0) / (x1 - x0) * pw;
    let py = |y: f64| top + (1.0 - y.clamp(0.0, 1.0)) * ph;

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, left + pw / 2.0, escape(title)).unwrap();
    writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    )
    .unwrap();
    for k in 0..=5 {
        let y = k as f64 / 5.0;
        writeln!(
            s,
            r#"<line x1="{}" y1="{:.2}" x2="{left}" y2="{:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{:.1}</text>"#,
            left - 4.0,
            py(y),
            py(y),
            left - 6.0,
            py(y) + 4.0,
            y
        )
        .unwrap();
    }
    for k in 0..=5 {
        let x = x0 + (x1 - x0) * k as f64 / 5.0;
        writeln!(
            s,
            r#"<line x1="{:.2}" y1="{}" x2="{:.2}" y2="{}" stroke="black"/><text x="{:.2}" y="{}" text-anchor="middle">{:.1}</text>"#,
            px(x),
            top + ph,
            px(x),
            top + ph + 4.0,
            px(x),
            top + ph + 18.0,
            x
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        left + pw / 2.0,
        h - 12.0,
        escape(x_label)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">accuracy</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    )
    .unwrap();

    let mut legend = 0;
    let mut legend_item = |s: &mut String, label: &str, color: &str, dashed: bool| {
        let y = top + 10.0 + 18.0 * legend as f64;
        let dash = if dashed { r#" stroke-dasharray="6,4""# } else { "" };
        writeln!(
            s,
            r#"<line x1="{}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/><text x="{}" y="{}">{}</text>"#,
            left + pw + 10.0,
            left + pw + 34.0,
            left + pw + 40.0,
            y + 4.0,
            escape(label)
        )
        .unwrap();
        legend += 1;
    };

    let multi_snr = table.references().len() > 1;
    let label = |attack: &str, snr: Option<i32>| match snr {
        Some(v) if multi_snr => format!("{attack} ({v} dB)"),
        _ => attack.to_string(),
    };
    for r in table.references() {
        writeln!(
            s,
            r##"<line class="reference" x1="{left}" y1="{:.2}" x2="{}" y2="{:.2}" stroke="#444444" stroke-width="1.5" stroke-dasharray="6,4"/>"##,
            py(r.accuracy_all),
            left + pw,
            py(r.accuracy_all)
        )
        .unwrap();
        legend_item(&mut s, &label("no attack", r.snr_db), "#444444", true);
    }
    for (i, (attack, snr)) in table.curves().into_iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = table
            .curve(attack, snr)
            .iter()
            .map(|r| format!("{:.2},{:.2}", px(r.x_db), py(r.accuracy_all)))
            .collect();
        writeln!(
            s,
            r#"<polyline data-attack="{}" points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            escape(attack),
            pts.join(" ")
        )
        .unwrap();
        legend_item(&mut s, &label(attack, snr), color, false);
    }
    s.push_str("</svg>\n");
    s
}
