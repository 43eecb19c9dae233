//! Static SVG heatmap with dendrogram margins.

use std::fmt::Write;

use super::bicluster::{Bicluster, Dendrogram};
use crate::error::{Error, Result};

/// CSS class carried by every heatmap cell `<rect>`; no other element is a rect.
pub const HEATMAP_CELL_CLASS: &str = "cell";

const CELL: f64 = 18.0;
const DENDRO: f64 = 90.0;
const LABEL: f64 = 130.0;
const PAD: f64 = 10.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Two-stop color ramp from pale yellow (low) to dark blue (high).
fn color(t: f64) -> String {
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let lo = (255.0, 247.0, 188.0);
    let hi = (8.0, 48.0, 107.0);
    let mix = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(lo.0, hi.0), mix(lo.1, hi.1), mix(lo.2, hi.2))
}

/// Leaf positions (in display order) and node coordinates for a dendrogram,
/// as polyline segments in (position, height) space.
fn dendrogram_segments(d: &Dendrogram) -> Vec<[(f64, f64); 4]> {
    let n = d.n_leaves;
    let mut pos = vec![0.0; n + d.merges.len()];
    let mut height = vec![0.0; n + d.merges.len()];
    for (rank, &leaf) in d.leaf_order.iter().enumerate() {
        pos[leaf] = rank as f64 + 0.5;
    }
    let mut segs = Vec::with_capacity(d.merges.len());
    for (k, m) in d.merges.iter().enumerate() {
        let id = n + k;
        pos[id] = (pos[m.left] + pos[m.right]) / 2.0;
        height[id] = m.distance;
        segs.push([
            (pos[m.left], height[m.left]),
            (pos[m.left], m.distance),
            (pos[m.right], m.distance),
            (pos[m.right], height[m.right]),
        ]);
    }
    segs
}

/// Renders `matrix` (rows x cols, original order) permuted into bicluster order.
pub fn render_heatmap_svg(matrix: &[Vec<f64>], clusters: &Bicluster) -> Result<String> {
    let (nr, nc) = (clusters.row_order.len(), clusters.col_order.len());
    if matrix.len() != nr || matrix.iter().any(|r| r.len() != nc) {
        return Err(Error::validation("heatmap matrix does not match the bicluster shape"));
    }
    let lo = matrix.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let hi = matrix.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };

    let x0 = PAD + DENDRO;
    let y0 = PAD + DENDRO;
    let width = x0 + nc as f64 * CELL + LABEL + PAD;
    let height = y0 + nr as f64 * CELL + LABEL + PAD;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(svg, "<g id=\"cells\">");
    for (ri, &r) in clusters.row_order.iter().enumerate() {
        for (ci, &c) in clusters.col_order.iter().enumerate() {
            let v = matrix[r][c];
            let _ = writeln!(
                svg,
                r#"<rect class="{HEATMAP_CELL_CLASS}" x="{}" y="{}" width="{CELL}" height="{CELL}" fill="{}"><title>{} / {}: {v:.4}</title></rect>"#,
                x0 + ci as f64 * CELL,
                y0 + ri as f64 * CELL,
                color((v - lo) / span),
                escape(&clusters.row_labels[r]),
                escape(&clusters.col_labels[c]),
            );
        }
    }
    let _ = writeln!(svg, "</g>");

    let _ = writeln!(svg, "<g id=\"row-labels\">");
    for (ri, &r) in clusters.row_order.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" dominant-baseline="middle">{}</text>"#,
            x0 + nc as f64 * CELL + 4.0,
            y0 + (ri as f64 + 0.5) * CELL,
            escape(&clusters.row_labels[r])
        );
    }
    let _ = writeln!(svg, "</g>\n<g id=\"col-labels\">");
    for (ci, &c) in clusters.col_order.iter().enumerate() {
        let x = x0 + (ci as f64 + 0.5) * CELL;
        let y = y0 + nr as f64 * CELL + 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{x}" y="{y}" transform="rotate(90 {x} {y})" dominant-baseline="middle">{}</text>"#,
            escape(&clusters.col_labels[c])
        );
    }
    let _ = writeln!(svg, "</g>");

    let max_h = |d: &Dendrogram| d.merges.iter().map(|m| m.distance).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    // rows: dendrogram grows leftwards from the cell block
    let rh = max_h(&clusters.row_dendrogram);
    let _ = writeln!(svg, "<g id=\"row-dendrogram\" fill=\"none\" stroke=\"#333\">");
    for seg in dendrogram_segments(&clusters.row_dendrogram) {
        let pts: Vec<String> = seg
            .iter()
            .map(|&(p, h)| format!("{:.2},{:.2}", x0 - 2.0 - h / rh * (DENDRO - 4.0), y0 + p * CELL))
            .collect();
        let _ = writeln!(svg, r#"<polyline points="{}"/>"#, pts.join(" "));
    }
    let ch = max_h(&clusters.col_dendrogram);
    let _ = writeln!(svg, "</g>\n<g id=\"col-dendrogram\" fill=\"none\" stroke=\"#333\">");
    for seg in dendrogram_segments(&clusters.col_dendrogram) {
        let pts: Vec<String> = seg
            .iter()
            .map(|&(p, h)| format!("{:.2},{:.2}", x0 + p * CELL, y0 - 2.0 - h / ch * (DENDRO - 4.0)))
            .collect();
        let _ = writeln!(svg, r#"<polyline points="{}"/>"#, pts.join(" "));
    }
    let _ = writeln!(svg, "</g>\n</svg>");
    Ok(svg)
}
