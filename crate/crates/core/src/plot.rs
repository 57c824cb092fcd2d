//! Static SVG scatter plots of labeled points. Inputs with more than two
//! features are projected on their first two principal components.

use std::fmt::Write;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::spectral::fix_sign;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 520.0;
const MARGIN: f64 = 60.0;
const LEGEND: f64 = 110.0;

/// First two principal-component scores of the centered data, with
/// eigenvector signs fixed so the projection is deterministic.
pub fn pca2(points: &[Vec<f64>]) -> Result<Vec<[f64; 2]>> {
    let n = points.len();
    let d = points.first().map(Vec::len).unwrap_or(0);
    if n == 0 || d < 2 {
        return Err(Error::invalid("PCA needs at least one point with two or more features"));
    }
    let mean: Vec<f64> = (0..d).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64).collect();
    let x = DMatrix::from_fn(n, d, |i, j| points[i][j] - mean[j]);
    let cov = x.transpose() * &x;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut basis = DMatrix::zeros(d, 2);
    for (c, &i) in order[..2].iter().enumerate() {
        basis.set_column(c, &eig.eigenvectors.column(i));
        fix_sign(basis.column_mut(c));
    }
    let scores = x * basis;
    Ok((0..n).map(|i| [scores[(i, 0)], scores[(i, 1)]]).collect())
}

fn nice_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = (hi - lo).max(1e-12);
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| span / s <= 6.0).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Renders the scatter plot. `title` is extended with a note when PCA was used.
pub fn scatter_svg(points: &[Vec<f64>], labels: &[usize], title: &str) -> Result<String> {
    if points.len() != labels.len() {
        return Err(Error::invalid(format!("{} points but {} labels", points.len(), labels.len())));
    }
    if points.is_empty() {
        return Err(Error::invalid("nothing to plot"));
    }
    let d = points[0].len();
    if d == 0 || points.iter().any(|p| p.len() != d || p.iter().any(|v| !v.is_finite())) {
        return Err(Error::invalid("points must share a positive dimension and be finite"));
    }
    let (xy, title) = match d {
        1 => (points.iter().map(|p| [p[0], 0.0]).collect::<Vec<_>>(), title.to_string()),
        2 => (points.iter().map(|p| [p[0], p[1]]).collect(), title.to_string()),
        _ => (pca2(points)?, format!("{title} (PCA-reduced from {d}-D)")),
    };
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in &xy {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let pad = |lo: f64, hi: f64| {
        let s = (hi - lo).max(1e-9) * 0.05;
        (lo - s, hi + s)
    };
    let (x0, x1) = pad(x0, x1);
    let (y0, y1) = pad(y0, y1);
    let plot_w = WIDTH - 2.0 * MARGIN - LEGEND;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * plot_h;

    let mut groups: Vec<usize> = labels.to_vec();
    groups.sort_unstable();
    groups.dedup();

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="30" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(&title));
    // axes
    let (ax, ay) = (MARGIN, HEIGHT - MARGIN);
    let _ = writeln!(s, r#"<line x1="{ax}" y1="{ay}" x2="{:.2}" y2="{ay}" stroke="black"/>"#, MARGIN + plot_w);
    let _ = writeln!(s, r#"<line x1="{ax}" y1="{ay}" x2="{ax}" y2="{MARGIN}" stroke="black"/>"#);
    for t in nice_ticks(x0, x1) {
        let x = sx(t);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{ay}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, ay + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{}</text>"#, ay + 18.0, fmt_tick(t));
    }
    for t in nice_ticks(y0, y1) {
        let y = sy(t);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{ax}" y2="{y:.2}" stroke="black"/>"#, ax - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#, ax - 8.0, y + 4.0, fmt_tick(t));
    }
    let (xl, yl) = if d > 2 { ("PC1", "PC2") } else { ("x1", "x2") };
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle">{xl}</text>"#, MARGIN + plot_w / 2.0, HEIGHT - 15.0);
    let _ = writeln!(s, r#"<text x="15" y="{:.2}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 15 {:.2})">{yl}</text>"#, MARGIN + plot_h / 2.0, MARGIN + plot_h / 2.0);
    // points, one group per label
    for (gi, g) in groups.iter().enumerate() {
        let color = PALETTE[gi % PALETTE.len()];
        let _ = writeln!(s, r#"<g class="cluster" data-label="{g}" fill="{color}">"#);
        for (p, l) in xy.iter().zip(labels) {
            if l == g {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, sx(p[0]), sy(p[1]));
            }
        }
        let _ = writeln!(s, "</g>");
    }
    // legend
    let lx = WIDTH - LEGEND - 10.0;
    for (gi, g) in groups.iter().enumerate() {
        let y = MARGIN + 18.0 * gi as f64;
        let color = PALETTE[gi % PALETTE.len()];
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{y:.2}" r="5" fill="{color}"/>"#, lx + 10.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="12">cluster {g}</text>"#, lx + 22.0, y + 4.0);
    }
    s.push_str("</svg>\n");
    Ok(s)
}
