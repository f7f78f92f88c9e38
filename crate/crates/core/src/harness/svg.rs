//! Static SVG charts. Each chart carries the hash of the configuration that
//! produced it in its `<desc>` element.

use std::fmt::Write;

use crate::harness::audit::{AuditReport, Verdict};
use crate::harness::regret::RegretCurve;

const W: f64 = 640.0;
const H: f64 = 400.0;
const PAD: f64 = 56.0;

fn header(out: &mut String, width: f64, height: f64, title: &str, hash: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, "<title>{}</title>", escape(title));
    let _ = writeln!(out, "<desc>config-sha256 {hash}</desc>");
    let _ = writeln!(out, r#"<rect width="{width}" height="{height}" fill="white"/>"#);
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Mean cumulative regret with a shaded confidence band.
pub fn regret_chart(curve: &RegretCurve, confidence: f64, title: &str, hash: &str) -> String {
    let mut out = String::new();
    header(&mut out, W, H, title, hash);
    let n = curve.mean.len();
    let bands: Vec<(f64, f64)> = (1..=n as u64).map(|t| curve.interval(t, confidence)).collect();
    let ymax = bands.iter().map(|b| b.1).fold(0.0_f64, f64::max).max(1e-9);
    let ymin = bands.iter().map(|b| b.0).fold(0.0_f64, f64::min);
    let sx = |t: usize| PAD + (W - 2.0 * PAD) * t as f64 / n.max(1) as f64;
    let sy = |v: f64| H - PAD - (H - 2.0 * PAD) * (v - ymin) / (ymax - ymin);
    // Thin the polyline to at most ~1000 vertices.
    let step = n.div_ceil(1000).max(1);
    let idx: Vec<usize> = (0..n).step_by(step).chain(n.checked_sub(1)).collect();

    let mut band = String::new();
    for &i in &idx {
        let _ = write!(band, "{:.2},{:.2} ", sx(i + 1), sy(bands[i].1));
    }
    for &i in idx.iter().rev() {
        let _ = write!(band, "{:.2},{:.2} ", sx(i + 1), sy(bands[i].0));
    }
    let _ = writeln!(out, r##"<polygon points="{}" fill="#9ecae1" fill-opacity="0.5"/>"##, band.trim_end());
    let mut line = String::new();
    for &i in &idx {
        let _ = write!(line, "{:.2},{:.2} ", sx(i + 1), sy(curve.mean[i]));
    }
    let _ = writeln!(
        out,
        r##"<polyline points="{}" fill="none" stroke="#08519c" stroke-width="1.5"/>"##,
        line.trim_end()
    );
    let _ = writeln!(
        out,
        r#"<line x1="{PAD}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/><line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{0}" stroke="black"/>"#,
        H - PAD,
        W - PAD
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">round t (1..{n})</text>"#,
        W / 2.0,
        H - 16.0
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" transform="rotate(-90 16 {})" text-anchor="middle">cumulative regret</text>"#,
        H / 2.0,
        H / 2.0
    );
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{ymax:.3}</text>"#, PAD - 4.0, PAD + 4.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="end">{ymin:.3}</text>"#, PAD - 4.0, H - PAD);
    let _ = writeln!(out, r#"<text x="{}" y="24" text-anchor="middle">{}</text>"#, W / 2.0, escape(title));
    out.push_str("</svg>\n");
    out
}

/// Cells as rows of (stage, phase, context) and columns of (arm, competitor),
/// red for negative slack and blue for positive; inconclusive cells are grey.
pub fn audit_heatmap(report: &AuditReport, title: &str, hash: &str) -> String {
    let mut rows: Vec<_> = report.cells.iter().map(|c| (c.key.stage, c.key.phase, c.key.context)).collect();
    rows.dedup();
    let mut cols: Vec<_> = report.cells.iter().map(|c| (c.key.arm, c.key.competitor)).collect();
    cols.sort_unstable();
    cols.dedup();
    let cell = 18.0;
    let left = 150.0;
    let top = 70.0;
    let width = left + cell * cols.len() as f64 + 20.0;
    let height = top + cell * rows.len() as f64 + 40.0;
    let mut out = String::new();
    header(&mut out, width.max(320.0), height, title, hash);
    let scale = report
        .cells
        .iter()
        .map(|c| c.slack.abs())
        .filter(|v| v.is_finite())
        .fold(1e-9_f64, f64::max);
    for (ci, (a, j)) in cols.iter().enumerate() {
        let x = left + cell * ci as f64 + cell / 2.0;
        let _ = writeln!(
            out,
            r#"<text x="{x}" y="{}" text-anchor="start" transform="rotate(-60 {x} {})" font-size="9">{a}v{j}</text>"#,
            top - 4.0,
            top - 4.0
        );
    }
    for (ri, (stage, phase, ctx)) in rows.iter().enumerate() {
        let y = top + cell * ri as f64;
        let label = match ctx {
            Some(x) => format!("{stage:?} {phase} x={x}"),
            None => format!("{stage:?} {phase}"),
        };
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="9">{}</text>"#,
            left - 4.0,
            y + cell * 0.7,
            escape(&label.to_lowercase())
        );
    }
    for c in &report.cells {
        let ri = rows.iter().position(|r| *r == (c.key.stage, c.key.phase, c.key.context)).unwrap_or(0);
        let ci = cols.iter().position(|k| *k == (c.key.arm, c.key.competitor)).unwrap_or(0);
        let fill = if c.verdict == Verdict::Inconclusive {
            "#d9d9d9".to_string()
        } else {
            let v = (c.slack / scale).clamp(-1.0, 1.0);
            let fade = (255.0 * (1.0 - v.abs())) as u8;
            if v < 0.0 {
                format!("#ff{fade:02x}{fade:02x}")
            } else {
                format!("#{fade:02x}{fade:02x}ff")
            }
        };
        let _ = writeln!(
            out,
            r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{fill}" stroke="white"><title>slack {:.4} n={}</title></rect>"#,
            left + cell * ci as f64,
            top + cell * ri as f64,
            c.slack,
            c.count
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="8" y="20">{} (verdict {:?}, |slack| scale {scale:.3})</text>"#,
        escape(title),
        report.verdict
    );
    out.push_str("</svg>\n");
    out
}
