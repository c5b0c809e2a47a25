//! CSV, JSON and SVG output of a [`StudyReport`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::study::{ArmStats, StudyReport};
use crate::doa::Estimator;
use crate::{Error, Result};

/// Leading column of every CSV written here.
pub const REPORT_CSV_VERSION: u32 = 1;

/// `(pi / 180)^2`.
const DEG2_TO_RAD2: f64 = (std::f64::consts::PI / 180.0) * (std::f64::consts::PI / 180.0);

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.9e}")).unwrap_or_default()
}

pub fn roc_csv(report: &StudyReport) -> String {
    let mut s = String::from("version,estimator,aperture,threshold,pfa,pd\n");
    for arm in &report.arms {
        for p in &arm.roc {
            let _ = writeln!(
                s,
                "{REPORT_CSV_VERSION},{},{},{},{:.9e},{:.9e}",
                arm.estimator, arm.aperture, p.threshold, p.pfa, p.pd
            );
        }
    }
    s
}

pub fn histogram_csv(report: &StudyReport) -> String {
    let mut s = String::from("version,estimator,aperture,bin_start_deg,bin_end_deg,count\n");
    for arm in &report.arms {
        let w = arm.histogram.bin_width;
        for (i, c) in arm.histogram.counts.iter().enumerate() {
            let _ = writeln!(
                s,
                "{REPORT_CSV_VERSION},{},{},{},{},{c}",
                arm.estimator,
                arm.aperture,
                i as f64 * w,
                (i + 1) as f64 * w
            );
        }
    }
    s
}

pub fn mse_csv(report: &StudyReport) -> String {
    let mut s = String::from("version,estimator,aperture,snr_db,count,mse_deg2,crb_deg2,mse_rad2,crb_rad2\n");
    for arm in &report.arms {
        for (b, crb) in arm.mse.iter().zip(&arm.crb_deg2) {
            let _ = writeln!(
                s,
                "{REPORT_CSV_VERSION},{},{},{},{},{},{},{},{}",
                arm.estimator,
                arm.aperture,
                b.snr_db,
                b.count,
                opt(b.mse_deg2),
                opt(*crb),
                opt(b.mse_deg2.map(|v| v * DEG2_TO_RAD2)),
                opt(crb.map(|v| v * DEG2_TO_RAD2))
            );
        }
    }
    s
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Minimal line chart. With `log_y`, non-positive values are dropped.
fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series], log_y: bool) -> String {
    let (w, h, ml, mr, mt, mb) = (640.0, 420.0, 70.0, 150.0, 40.0, 50.0);
    let ty = |y: f64| if log_y { y.log10() } else { y };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
        .map(|(x, y)| (x, ty(y)))
        .collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let lo = pts.iter().map(f).fold(f64::INFINITY, f64::min);
        let hi = pts.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
        match (lo.is_finite(), hi > lo) {
            (true, true) => (lo, hi),
            (true, false) => (lo - 0.5, lo + 0.5),
            _ => (0.0, 1.0),
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let px = |x: f64| ml + (x - x0) / (x1 - x0) * (w - ml - mr);
    let py = |y: f64| h - mb - (y - y0) / (y1 - y0) * (h - mt - mb);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{title}</text>"#, w / 2.0);
    let _ = writeln!(
        s,
        r#"<rect x="{ml}" y="{mt}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - ml - mr,
        h - mt - mb
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
        let ylab = if log_y { format!("1e{yv:.1}") } else { format!("{yv:.3}") };
        let _ = writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{xv:.3}</text>"#, px(xv), h - mb + 16.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.1}" text-anchor="end">{ylab}</text>"#, ml - 4.0, py(yv) + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{x_label}</text>"#, (ml + w - mr) / 2.0, h - 12.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        (mt + h - mb) / 2.0,
        (mt + h - mb) / 2.0
    );
    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && (!log_y || *y > 0.0))
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(ty(*y))))
            .collect();
        let dash = if ser.dashed { r#" stroke-dasharray="5,4""# } else { "" };
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            path.join(" ")
        );
        let ly = mt + 16.0 * (i as f64 + 1.0);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"{dash}/>"#,
            w - mr + 8.0,
            w - mr + 28.0
        );
        let _ = writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, w - mr + 32.0, ly + 4.0, ser.name);
    }
    s.push_str("</svg>\n");
    s
}

fn arms_for(report: &StudyReport, est: Estimator) -> impl Iterator<Item = &ArmStats> {
    report.arms.iter().filter(move |a| a.estimator == est)
}

fn estimators(report: &StudyReport) -> Vec<Estimator> {
    let mut v: Vec<Estimator> = Vec::new();
    for a in &report.arms {
        if !v.contains(&a.estimator) {
            v.push(a.estimator);
        }
    }
    v
}

pub fn roc_svg(report: &StudyReport, est: Estimator) -> String {
    let series: Vec<Series> = arms_for(report, est)
        .map(|a| Series {
            name: a.aperture.to_string(),
            points: a.roc.iter().map(|p| (p.pfa, p.pd)).collect(),
            dashed: false,
        })
        .collect();
    line_chart(&format!("ROC ({est})"), "Pfa", "Pd", &series, false)
}

pub fn histogram_svg(report: &StudyReport, est: Estimator) -> String {
    let series: Vec<Series> = arms_for(report, est)
        .map(|a| Series {
            name: a.aperture.to_string(),
            points: a
                .histogram
                .counts
                .iter()
                .enumerate()
                .flat_map(|(i, c)| {
                    let w = a.histogram.bin_width;
                    [(i as f64 * w, *c as f64), ((i + 1) as f64 * w, *c as f64)]
                })
                .collect(),
            dashed: false,
        })
        .collect();
    line_chart(
        &format!("Minimum detected separation ({est})"),
        "separation (deg)",
        "scenes",
        &series,
        false,
    )
}

pub fn mse_svg(report: &StudyReport, est: Estimator) -> String {
    let mut series = Vec::new();
    for a in arms_for(report, est) {
        series.push(Series {
            name: a.aperture.to_string(),
            points: a.mse.iter().filter_map(|b| Some((b.snr_db, b.mse_deg2?))).collect(),
            dashed: false,
        });
        series.push(Series {
            name: format!("CRB {}", a.aperture),
            points: a
                .mse
                .iter()
                .zip(&a.crb_deg2)
                .filter_map(|(b, c)| Some((b.snr_db, (*c)?)))
                .collect(),
            dashed: true,
        });
    }
    line_chart(&format!("DoA MSE ({est})"), "SNR (dB)", "MSE (deg^2)", &series, true)
}

fn write(dir: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Write `summary.json`, the three CSVs and one SVG per figure and
/// estimator into `dir`. Returns the written paths.
pub fn write_report(report: &StudyReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let json = serde_json::to_string_pretty(report).map_err(|e| Error::Numeric(format!("summary: {e}")))?;
    write(dir, "summary.json", &json, &mut written)?;
    write(dir, "roc.csv", &roc_csv(report), &mut written)?;
    write(dir, "minsep_hist.csv", &histogram_csv(report), &mut written)?;
    write(dir, "mse_vs_snr.csv", &mse_csv(report), &mut written)?;
    for est in estimators(report) {
        write(dir, &format!("roc_{est}.svg"), &roc_svg(report, est), &mut written)?;
        write(dir, &format!("minsep_hist_{est}.svg"), &histogram_svg(report, est), &mut written)?;
        write(dir, &format!("mse_vs_snr_{est}.svg"), &mse_svg(report, est), &mut written)?;
    }
    Ok(written)
}

/// Read back a `summary.json` written by [`write_report`].
pub fn read_summary(path: &Path) -> Result<StudyReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
