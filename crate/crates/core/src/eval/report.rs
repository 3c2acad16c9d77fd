use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{EvalReport, MetricSet, Ratio, RocCurve};
use crate::error::{Error, Result};

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Write `report.json`, `metrics.csv`, `roc.csv` and `roc.svg` into `dir`.
pub fn emit_report(report: &EvalReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_file(&dir.join("report.json"), &report.to_json_string())?;
    write_file(&dir.join("metrics.csv"), &metrics_csv(report))?;
    write_file(&dir.join("roc.csv"), &roc_csv(&report.roc))?;
    write_file(&dir.join("roc.svg"), &roc_svg(&report.roc))?;
    Ok(())
}

fn ratio_cell(r: Ratio) -> String {
    format!("{:.5}", r.value())
}

/// One row per fold followed by the mean row labelled with the preset.
/// Columns carry the catalog mode as a suffix (`ACC-M`, ...). The AUC cell
/// of the mean row is the pooled-curve AUC.
pub fn metrics_csv(report: &EvalReport) -> String {
    let mode = report.config.catalog_mode;
    let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
    let mut header = vec!["setting".to_string()];
    header.extend(["ERR", "ACC", "TPR", "FNR", "TNR", "FPR", "Pre", "AUC"].map(|m| format!("{m}-{mode}")));
    w.write_record(&header).expect("in-memory write");
    let fold_row = |name: String, m: &MetricSet, auc: f64| {
        vec![
            name,
            ratio_cell(m.err),
            ratio_cell(m.acc),
            ratio_cell(m.tpr),
            ratio_cell(m.fnr),
            ratio_cell(m.tnr),
            ratio_cell(m.fpr),
            m.precision.map(ratio_cell).unwrap_or_default(),
            format!("{auc:.5}"),
        ]
    };
    for f in &report.folds {
        w.write_record(fold_row(format!("fold-{}", f.fold + 1), &f.metrics, f.auc))
            .expect("in-memory write");
    }
    let a = &report.average;
    let cell = |v: f64| format!("{v:.5}");
    w.write_record([
        report.config.preset.to_string(),
        cell(a.err),
        cell(a.acc),
        cell(a.tpr),
        cell(a.fnr),
        cell(a.tnr),
        cell(a.fpr),
        a.precision.map(cell).unwrap_or_default(),
        cell(report.roc.auc),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn threshold_cell(t: f64) -> String {
    if t == f64::INFINITY {
        "inf".into()
    } else if t == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{t:.5}")
    }
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        let _ = writeln!(out, "{},{:.5},{:.5}", threshold_cell(p.threshold), p.fpr, p.tpr);
    }
    out
}

const SIZE: f64 = 400.0;
const MARGIN: f64 = 50.0;

fn plot_xy(fpr: f64, tpr: f64) -> (f64, f64) {
    (MARGIN + fpr * SIZE, MARGIN + (1.0 - tpr) * SIZE)
}

/// TPR against FPR on unit axes, chance diagonal dashed.
pub fn roc_svg(curve: &RocCurve) -> String {
    let full = SIZE + 2.0 * MARGIN;
    let (x0, y0) = plot_xy(0.0, 0.0);
    let (x1, y1) = plot_xy(1.0, 1.0);
    let points: Vec<String> = curve
        .points
        .iter()
        .map(|p| {
            let (x, y) = plot_xy(p.fpr, p.tpr);
            format!("{x:.2},{y:.2}")
        })
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{full}" height="{full}" viewBox="0 0 {full} {full}">"#
    );
    let _ = writeln!(
        s,
        r#"<rect x="{x0}" y="{y1}" width="{SIZE}" height="{SIZE}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y1}" stroke="#999" stroke-dasharray="4 4"/>"##
    );
    let _ = writeln!(
        s,
        r##"<polyline fill="none" stroke="#c0392b" stroke-width="2" points="{}"/>"##,
        points.join(" ")
    );
    let text = |s: &mut String, x: f64, y: f64, anchor: &str, body: &str| {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="12" text-anchor="{anchor}">{body}</text>"#
        );
    };
    text(&mut s, x0, y0 + 16.0, "middle", "0");
    text(&mut s, x1, y0 + 16.0, "middle", "1");
    text(&mut s, x0 - 8.0, y0 + 4.0, "end", "0");
    text(&mut s, x0 - 8.0, y1 + 4.0, "end", "1");
    text(&mut s, (x0 + x1) / 2.0, y0 + 36.0, "middle", "FPR");
    text(&mut s, x0 - 30.0, (y0 + y1) / 2.0, "middle", "TPR");
    text(
        &mut s,
        (x0 + x1) / 2.0,
        y1 - 16.0,
        "middle",
        &format!("AUC = {:.5}", curve.auc),
    );
    s.push_str("</svg>\n");
    s
}
