//! Neuron-wise diagnostics for one pair: an SVG with a contrastive vs
//! independence scatter and one histogram per score, plus a CSV sidecar.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::scoring::{argmax, PairNeuronScores};

const BINS: usize = 20;
const PANEL: f64 = 280.0;
const MARGIN: f64 = 40.0;
const HIGHLIGHT_C: &str = "#00bcd4";
const HIGHLIGHT_D: &str = "#f4c20d";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDiagnostics {
    pub pair_id: u32,
    pub plot: PathBuf,
    pub sidecar: PathBuf,
    pub argmax_contrastive: u32,
    pub argmax_independence: u32,
    pub latent_dim: usize,
}

/// Sidecar path for a plot: same stem, `.csv` extension.
pub fn sidecar_path(plot: &Path) -> PathBuf {
    plot.with_extension("csv")
}

pub fn sidecar_csv(scores: &PairNeuronScores) -> String {
    let mut out = String::from("neuron,contrastive,independence\n");
    for (j, (c, d)) in scores
        .contrastive
        .values
        .iter()
        .zip(&scores.independence.values)
        .enumerate()
    {
        let _ = writeln!(out, "{j},{c:.16e},{d:.16e}");
    }
    out
}

pub fn emit_pair_diagnostics(scores: &PairNeuronScores, plot: &Path) -> std::io::Result<PairDiagnostics> {
    let c = &scores.contrastive.values;
    let d = &scores.independence.values;
    let top_c = argmax(c).unwrap_or(0);
    let top_d = argmax(d).unwrap_or(0);
    let sidecar = sidecar_path(plot);
    fs::write(plot, render_svg(scores.contrastive.pair_id, c, d, top_c, top_d))?;
    fs::write(&sidecar, sidecar_csv(scores))?;
    Ok(PairDiagnostics {
        pair_id: scores.contrastive.pair_id,
        plot: plot.to_path_buf(),
        sidecar,
        argmax_contrastive: top_c as u32,
        argmax_independence: top_d as u32,
        latent_dim: c.len(),
    })
}

fn upper(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(0.0, f64::max);
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

fn render_svg(pair_id: u32, c: &[f64], d: &[f64], top_c: usize, top_d: usize) -> String {
    let width = 3.0 * (PANEL + 2.0 * MARGIN);
    let height = PANEL + 2.0 * MARGIN;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // scatter
    let (cx_max, dy_max) = (upper(c), upper(d));
    panel_frame(&mut s, 0.0, &format!("pair {pair_id}: neuron scores"), "contrastive", "independence");
    for (j, (&x, &y)) in c.iter().zip(d).enumerate() {
        let px = MARGIN + x / cx_max * PANEL;
        let py = MARGIN + PANEL - y / dy_max * PANEL;
        let (fill, r) = match (j == top_c, j == top_d) {
            (true, _) => (HIGHLIGHT_C, 5.0),
            (false, true) => (HIGHLIGHT_D, 5.0),
            _ => ("#555555", 2.0),
        };
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="{r}" fill="{fill}" fill-opacity="0.8"><title>neuron {j}</title></circle>"#
        );
    }

    histogram(&mut s, 1, c, "contrastive", HIGHLIGHT_C);
    histogram(&mut s, 2, d, "independence", HIGHLIGHT_D);
    s.push_str("</svg>\n");
    s
}

fn panel_frame(s: &mut String, x0: f64, title: &str, xlabel: &str, ylabel: &str) {
    let _ = writeln!(
        s,
        r#"<g transform="translate({x0},0)"><rect x="{MARGIN}" y="{MARGIN}" width="{PANEL}" height="{PANEL}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{title}</text>"#,
        MARGIN + PANEL / 2.0,
        MARGIN - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#,
        MARGIN + PANEL / 2.0,
        MARGIN + PANEL + 25.0
    );
    let _ = writeln!(
        s,
        r#"<text x="12" y="{}" text-anchor="middle" transform="rotate(-90 12 {})">{ylabel}</text></g>"#,
        MARGIN + PANEL / 2.0,
        MARGIN + PANEL / 2.0
    );
}

fn histogram(s: &mut String, slot: usize, values: &[f64], name: &str, color: &str) {
    let x0 = slot as f64 * (PANEL + 2.0 * MARGIN);
    panel_frame(s, x0, &format!("{name} distribution"), name, "neurons");
    let top = upper(values);
    let mut counts = [0usize; BINS];
    for &v in values {
        let bin = ((v / top) * BINS as f64) as usize;
        counts[bin.min(BINS - 1)] += 1;
    }
    let peak = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    let bar_w = PANEL / BINS as f64;
    for (i, &n) in counts.iter().enumerate() {
        let h = n as f64 / peak * PANEL;
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{h:.2}" fill="{color}"><title>{n}</title></rect>"#,
            x0 + MARGIN + i as f64 * bar_w,
            MARGIN + PANEL - h,
            bar_w - 1.0
        );
    }
}
