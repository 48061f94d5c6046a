//! CSV tables, SVG line charts and the certificate document.

use std::fmt::Write as _;
use std::io;
use std::path::Path;

use crate::boundary::AttractorItem;
use crate::persist::{combined_verdict, PersistenceCertificate, SweepRow, SweepTable, Verdict};

pub const CERTIFICATE_HEADER: &str = "# persistlab-certificate v1";

/// Round-trip formatting with 17 significant digits.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_csv<P: AsRef<Path>>(path: P, header: &[String], rows: &[Vec<String>]) -> io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()
}

/// One CSV record as a line without the trailing newline.
pub fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("write to memory");
    let bytes = w.into_inner().expect("flush to memory");
    String::from_utf8(bytes).expect("utf-8 record").trim_end_matches('\n').to_string()
}

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// A plain polyline chart.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (720.0, 420.0, 60.0);
    let finite = series.iter().flat_map(|s| s.points.iter()).filter(|(x, y)| x.is_finite() && y.is_finite());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for (x, y) in finite {
        x0 = x0.min(*x);
        x1 = x1.max(*x);
        y0 = y0.min(*y);
        y1 = y1.max(*y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 == x0 {
        x1 = x0 + 1.0;
    }
    if y1 == y0 {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| m + (x - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y - y0) / (y1 - y0) * (h - 2.0 * m);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#, w / 2.0, esc(title));
    let _ = writeln!(
        s,
        r#"<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/><line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>"#,
        h - m,
        w - m,
        h - m,
        h - m
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 15.0,
        esc(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="15" y="{}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        esc(y_label)
    );
    for (v, anchor, x, y) in [
        (x0, "start", m, h - m + 16.0),
        (x1, "end", w - m, h - m + 16.0),
        (y0, "end", m - 4.0, h - m),
        (y1, "end", m - 4.0, m + 4.0),
    ] {
        let _ = writeln!(s, r#"<text x="{x}" y="{y}" font-size="10" text-anchor="{anchor}">{v:.4}</text>"#);
    }
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", sx(*x), sy(*y)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - m + 4.0,
            m + 14.0 * k as f64,
            esc(ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Cells of a two-parameter sweep coloured by verdict.
pub fn verdict_map(title: &str, table: &SweepTable) -> String {
    let (w, h, m) = (600.0, 600.0, 60.0);
    let xs: Vec<f64> = table.rows.iter().map(|r| r.values[0]).collect();
    let ys: Vec<f64> = table.rows.iter().map(|r| r.values.get(1).copied().unwrap_or(0.0)).collect();
    let distinct = |v: &[f64]| {
        let mut d = v.to_vec();
        d.sort_by(f64::total_cmp);
        d.dedup();
        d
    };
    let (dx, dy) = (distinct(&xs), distinct(&ys));
    let cw = (w - 2.0 * m) / dx.len().max(1) as f64;
    let ch = (h - 2.0 * m) / dy.len().max(1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="16" text-anchor="middle">{}</text>"#, w / 2.0, esc(title));
    for r in &table.rows {
        let i = dx.iter().position(|v| *v == r.values[0]).unwrap_or(0);
        let j = dy.iter().position(|v| *v == r.values.get(1).copied().unwrap_or(0.0)).unwrap_or(0);
        let color = match r.verdict {
            Verdict::CertifiedPersistent => "#2ca02c",
            Verdict::EvidenceIncomplete => "#bbbbbb",
            Verdict::ExtinctionDetected => "#d62728",
        };
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{color}"/>"#,
            m + i as f64 * cw,
            h - m - (j + 1) as f64 * ch,
            cw,
            ch
        );
    }
    let names = &table.axes;
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="12" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 20.0,
        esc(&names[0])
    );
    if let Some(y) = names.get(1) {
        let _ = writeln!(
            s,
            r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})">{}</text>"#,
            h / 2.0,
            h / 2.0,
            esc(y)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn vector(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| num(*x)).collect();
    format!("[{}]", parts.join(", "))
}

fn item_lines(out: &mut String, prefix: &str, item: &AttractorItem) {
    let _ = writeln!(out, "{prefix}.kind = {}", item.kind_name());
    match item {
        AttractorItem::Equilibrium { point, residual } => {
            let _ = writeln!(out, "{prefix}.point = {}", vector(point));
            let _ = writeln!(out, "{prefix}.residual = {}", num(*residual));
        }
        AttractorItem::PeriodicOrbit { points, period } => {
            let _ = writeln!(out, "{prefix}.period = {period}");
            for (k, p) in points.iter().enumerate() {
                let _ = writeln!(out, "{prefix}.point.{} = {}", k + 1, vector(p));
            }
        }
        AttractorItem::CompactBox { lower, upper, samples } => {
            let _ = writeln!(out, "{prefix}.lower = {}", vector(lower));
            let _ = writeln!(out, "{prefix}.upper = {}", vector(upper));
            let _ = writeln!(out, "{prefix}.samples = {}", samples.len());
        }
    }
}

fn opt(v: &Option<String>) -> &str {
    v.as_deref().unwrap_or("none")
}

/// Key–value certificate covering every focal block of one run.
pub fn certificate_text(certs: &[PersistenceCertificate]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{CERTIFICATE_HEADER}");
    if let Some(first) = certs.first() {
        let _ = writeln!(s, "model = {}", first.model);
        for (name, v) in &first.params {
            let _ = writeln!(s, "param.{name} = {}", num(*v));
        }
        for c in &first.analytic_conditions {
            let _ = writeln!(s, "condition.{}.holds = {}", c.name, c.holds);
            let _ = writeln!(s, "condition.{}.margin = {}", c.name, num(c.margin));
        }
    }
    let _ = writeln!(s, "blocks = {}", certs.len());
    let _ = writeln!(s, "verdict = {}", combined_verdict(certs).name());
    for (b, c) in certs.iter().enumerate() {
        let _ = writeln!(s);
        let _ = writeln!(s, "[block.{}]", b + 1);
        let _ = writeln!(s, "focal = {}", c.focal_names.join("+"));
        let _ = writeln!(s, "rho = {}", c.rho.name());
        let _ = writeln!(s, "assume_persistent = {:?}", c.assume_persistent);
        let _ = writeln!(s, "omega_seeds = {}", c.omega_seeds);
        let _ = writeln!(s, "boundary_error = {}", opt(&c.boundary_error));
        let _ = writeln!(s, "excluded = {}", c.excluded.len());
        for (k, item) in c.excluded.iter().enumerate() {
            item_lines(&mut s, &format!("excluded.{}", k + 1), item);
        }
        let _ = writeln!(s, "evidence = {}", c.evidence.len());
        for (k, e) in c.evidence.iter().enumerate() {
            let p = format!("evidence.{}", k + 1);
            item_lines(&mut s, &p, &e.attractor);
            let _ = writeln!(s, "{p}.method = {}", e.method.name());
            let _ = writeln!(s, "{p}.value = {}", num(e.value));
            let _ = writeln!(s, "{p}.threshold = {}", num(e.threshold));
            let _ = writeln!(s, "{p}.passes = {}", e.passes);
            if let Some(x) = e.cross_check {
                let _ = writeln!(s, "{p}.lyapunov_cross_check = {}", num(x));
            }
            let _ = writeln!(s, "{p}.diagnostics = {}", e.diagnostics);
        }
        match &c.empirical {
            Some(em) => {
                let _ = writeln!(s, "empirical.ic_grid_size = {}", em.ic_grid_size);
                let _ = writeln!(s, "empirical.burn_in = {}", num(em.burn_in));
                let _ = writeln!(s, "empirical.window = {}", num(em.window));
                let _ = writeln!(s, "empirical.epsilon_hat = {}", num(em.epsilon_hat));
                let _ = writeln!(s, "empirical.epsilon_hat_doubled_window = {}", num(em.epsilon_hat_doubled));
                let _ = writeln!(s, "empirical.window_stable = {}", em.window_stable);
                let _ = writeln!(s, "empirical.worst_ic = {}", vector(&em.worst_ic));
                let _ = writeln!(
                    s,
                    "empirical.extinction_witness = {}",
                    em.extinction_witness.as_deref().map_or("none".to_string(), vector)
                );
            }
            None => {
                let _ = writeln!(s, "empirical.error = {}", opt(&c.empirical_error));
            }
        }
        let _ = writeln!(s, "verdict = {}", c.verdict.name());
    }
    s
}

pub fn sweep_header(table: &SweepTable) -> Vec<String> {
    let mut h: Vec<String> = table.axes.clone();
    for c in &table.condition_names {
        h.push(format!("margin[{c}]"));
    }
    for b in &table.focal_blocks {
        h.push(format!("epsilon_hat[{b}]"));
        h.push(format!("verdict[{b}]"));
    }
    h.push("verdict".into());
    h.push("error".into());
    h
}

pub fn sweep_record(table: &SweepTable, row: &SweepRow) -> Vec<String> {
    let mut r: Vec<String> = row.values.iter().map(|v| num(*v)).collect();
    for (i, _) in table.condition_names.iter().enumerate() {
        r.push(row.conditions.get(i).map_or("NaN".into(), |c| num(c.margin)));
    }
    for b in &row.blocks {
        r.push(num(b.epsilon_hat));
        r.push(b.verdict.name().into());
    }
    r.push(row.verdict.name().into());
    r.push(row.error.clone().unwrap_or_default());
    r
}
