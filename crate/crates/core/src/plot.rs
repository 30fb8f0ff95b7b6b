//! Hand-written SVG rendering of experiment CSV.
//!
//! One panel per `(size, permutation kind)`: p-value against the signal
//! multiplier, with the per-multiplier median as a polyline over a min-max
//! band, a dashed line at the simulation floor and a dotted reference at
//! multiplier 1.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::experiment::{read_csv, summarize, GroupSummary, ResultRow};
use crate::perm::PermutationKind;

const WIDTH: f64 = 1600.0;
const HEIGHT: f64 = 900.0;
const MARGIN: f64 = 40.0;
const PAD_LEFT: f64 = 70.0;
const PAD_RIGHT: f64 = 20.0;
const PAD_TOP: f64 = 40.0;
const PAD_BOTTOM: f64 = 60.0;

struct Panel {
    title: String,
    groups: Vec<GroupSummary>,
}

/// Maps data coordinates into one panel's plotting area.
struct Frame {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x_min: f64,
    x_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.left + (v - self.x_min) / (self.x_max - self.x_min) * self.width
    }

    fn y(&self, p: f64) -> f64 {
        self.top + (1.0 - p.clamp(0.0, 1.0)) * self.height
    }
}

fn panels(rows: &[ResultRow]) -> Vec<Panel> {
    let mut out: Vec<(usize, usize, PermutationKind, Vec<GroupSummary>)> = Vec::new();
    for g in summarize(rows) {
        match out
            .iter_mut()
            .find(|(m, n, k, _)| (*m, *n, *k) == (g.m, g.n, g.perm_kind))
        {
            Some((.., groups)) => groups.push(g),
            None => out.push((g.m, g.n, g.perm_kind, vec![g])),
        }
    }
    out.into_iter()
        .map(|(m, n, kind, mut groups)| {
            groups.sort_by(|a, b| a.multiplier.total_cmp(&b.multiplier));
            Panel {
                title: format!("m = {m}, n = {n}, {kind}"),
                groups,
            }
        })
        .collect()
}

/// X range covering the data and the reference at 1, padded by 5%.
fn x_range(rows: &[ResultRow]) -> (f64, f64) {
    let (lo, hi) = rows
        .iter()
        .map(|r| r.multiplier)
        .fold((1.0f64, 1.0f64), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let (lo, hi) = if hi - lo < 1e-9 { (lo - 0.5, hi + 0.5) } else { (lo, hi) };
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|s| s * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn draw_panel(svg: &mut String, frame: &Frame, panel: Option<&Panel>) {
    let Frame {
        left,
        top,
        width,
        height,
        ..
    } = *frame;
    let bottom = top + height;
    let _ = writeln!(svg, r#"<g class="panel">"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{left:.1}" y="{top:.1}" width="{width:.1}" height="{height:.1}" fill="#fff" stroke="#333"/>"##
    );
    for p in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let y = frame.y(p);
        let _ = writeln!(
            svg,
            r##"<line x1="{:.1}" y1="{y:.1}" x2="{left:.1}" y2="{y:.1}" stroke="#333"/><text x="{:.1}" y="{:.1}" font-size="14" text-anchor="end">{p}</text>"##,
            left - 6.0,
            left - 10.0,
            y + 5.0
        );
    }
    for t in ticks(frame.x_min, frame.x_max) {
        let x = frame.x(t);
        let _ = writeln!(
            svg,
            r##"<line x1="{x:.1}" y1="{bottom:.1}" x2="{x:.1}" y2="{:.1}" stroke="#333"/><text x="{x:.1}" y="{:.1}" font-size="14" text-anchor="middle">{}</text>"##,
            bottom + 6.0,
            bottom + 22.0,
            trim(t)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="15" text-anchor="middle">theta / theta_crit</text>"#,
        left + width / 2.0,
        bottom + 45.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="15" text-anchor="middle" transform="rotate(-90 {:.1} {:.1})">p-value</text>"#,
        left - 50.0,
        top + height / 2.0,
        left - 50.0,
        top + height / 2.0
    );
    let x1 = frame.x(1.0);
    let _ = writeln!(
        svg,
        r##"<line class="reference" x1="{x1:.1}" y1="{top:.1}" x2="{x1:.1}" y2="{bottom:.1}" stroke="#888" stroke-dasharray="2 4"/>"##
    );

    let Some(panel) = panel else {
        let _ = writeln!(svg, "</g>");
        return;
    };
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="16" text-anchor="middle">{}</text>"#,
        left + width / 2.0,
        top - 12.0,
        panel.title
    );
    let floor = panel.groups.iter().map(|g| g.floor).fold(1.0, f64::min);
    let yf = frame.y(floor);
    let _ = writeln!(
        svg,
        r##"<line class="floor" x1="{left:.1}" y1="{yf:.1}" x2="{:.1}" y2="{yf:.1}" stroke="#c33" stroke-dasharray="8 5"/>"##,
        left + width
    );
    let upper = panel.groups.iter().map(|g| (frame.x(g.multiplier), frame.y(g.max)));
    let lower = panel.groups.iter().rev().map(|g| (frame.x(g.multiplier), frame.y(g.min)));
    let _ = writeln!(
        svg,
        r##"<polygon class="band" points="{}" fill="#37c" fill-opacity="0.2" stroke="#37c" stroke-opacity="0.4"/>"##,
        points(upper.chain(lower))
    );
    let medians: Vec<(f64, f64)> = panel
        .groups
        .iter()
        .map(|g| (frame.x(g.multiplier), frame.y(g.median)))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline class="median" points="{}" fill="none" stroke="#137" stroke-width="2.5"/>"##,
        points(medians.iter().copied())
    );
    for (x, y) in medians {
        let _ = writeln!(svg, r##"<circle cx="{x:.1}" cy="{y:.1}" r="4" fill="#137"/>"##);
    }
    let _ = writeln!(svg, "</g>");
}

fn points(it: impl Iterator<Item = (f64, f64)>) -> String {
    it.map(|(x, y)| format!("{x:.1},{y:.1}")).collect::<Vec<_>>().join(" ")
}

fn trim(v: f64) -> String {
    let s = format!("{v:.3}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// SVG document for the given rows. No rows still yields a valid document
/// with one empty set of axes.
pub fn render_svg(rows: &[ResultRow]) -> String {
    let panels = panels(rows);
    let count = panels.len().max(1);
    let grid_cols = (count as f64).sqrt().ceil() as usize;
    let grid_rows = count.div_ceil(grid_cols);
    let cell_w = (WIDTH - 2.0 * MARGIN) / grid_cols as f64;
    let cell_h = (HEIGHT - 2.0 * MARGIN) / grid_rows as f64;
    let (x_min, x_max) = x_range(rows);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#fafafa"/>"##);
    for i in 0..count {
        let (r, c) = (i / grid_cols, i % grid_cols);
        let frame = Frame {
            left: MARGIN + c as f64 * cell_w + PAD_LEFT,
            top: MARGIN + r as f64 * cell_h + PAD_TOP,
            width: cell_w - PAD_LEFT - PAD_RIGHT,
            height: cell_h - PAD_TOP - PAD_BOTTOM,
            x_min,
            x_max,
        };
        draw_panel(&mut svg, &frame, panels.get(i));
    }
    svg.push_str("</svg>\n");
    svg
}

/// Reads experiment CSV from `csv_path` and writes the SVG to `out_path`.
pub fn emit_plot(csv_path: impl AsRef<Path>, out_path: impl AsRef<Path>) -> Result<()> {
    let rows = read_csv(csv_path)?;
    let out = out_path.as_ref();
    std::fs::write(out, render_svg(&rows)).map_err(|e| Error::io(out, e))
}
