//! SVG drawing of a gap table, one bar per level, with optional graph panels.

use std::fmt::Write;

use pseudo_affine::{GapTable, IfsBranchPair, Word};

use crate::error::Result;

const WIDTH: f64 = 800.0;
const MARGIN: f64 = 20.0;
const BAR: f64 = 14.0;
const PITCH: f64 = 22.0;
const PANEL: f64 = 240.0;
const SAMPLES: usize = 600;

fn x(t: f64) -> f64 {
    MARGIN + t * (WIDTH - 2.0 * MARGIN)
}

fn is_spine(w: &Word) -> bool {
    w.len() % 2 == 0 && *w == Word::alternating(w.len() / 2)
}

/// Levels `0..levels` of `table`; gaps of `(01)^k` get the `highlight` class
/// when `highlight` is set.
pub fn svg(
    table: &GapTable<f64>,
    levels: usize,
    highlight: bool,
    branches: Option<&IfsBranchPair<f64>>,
) -> Result<String> {
    let bars = MARGIN + levels as f64 * PITCH;
    let height = bars + if branches.is_some() { 2.0 * (PANEL + MARGIN) } else { 0.0 } + MARGIN;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0}" height="{height:.0}" viewBox="0 0 {WIDTH:.0} {height:.0}">"#
    );
    out.push_str(
        "<style>.cyl{fill:#222}.gap{fill:#9ab}.highlight{fill:#d62}.f0{stroke:#26a;fill:none}.f1{stroke:#c42;fill:none}.axis{stroke:#999;fill:none}</style>\n",
    );
    let rows = table.rows();
    for n in 0..levels {
        let y = MARGIN + n as f64 * PITCH;
        let _ = writeln!(out, r#"<g id="level-{n}">"#);
        for (w, _) in rows.iter().filter(|(w, _)| w.len() == n) {
            let k = table.cylinder(w)?;
            let _ = writeln!(
                out,
                r#"<rect class="cyl" x="{:.4}" y="{y:.1}" width="{:.4}" height="{BAR:.1}"/>"#,
                x(k.left),
                x(k.right) - x(k.left)
            );
        }
        for (w, g) in rows.iter().filter(|(w, _)| w.len() == n) {
            let class = if highlight && is_spine(w) { "gap highlight" } else { "gap" };
            let _ = writeln!(
                out,
                r#"<rect class="{class}" data-word="{w}" x="{:.4}" y="{y:.1}" width="{:.4}" height="{BAR:.1}"/>"#,
                x(g.a),
                x(g.b) - x(g.a)
            );
        }
        out.push_str("</g>\n");
    }
    if let Some(br) = branches {
        let top = bars + MARGIN;
        panel(&mut out, "graphs", top, |i, t| br.eval(i, t, br.tol()), 1.0)?;
        let bound = br.derivative_bound()?.max(1.0);
        panel(&mut out, "derivatives", top + PANEL + MARGIN, |i, t| br.eval_derivative(i, t, br.tol()), bound)?;
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn panel(
    out: &mut String,
    id: &str,
    top: f64,
    f: impl Fn(u8, f64) -> pseudo_affine::Result<f64>,
    ymax: f64,
) -> Result<()> {
    let _ = writeln!(out, r#"<g id="{id}">"#);
    let _ = writeln!(
        out,
        r#"<rect class="axis" x="{:.4}" y="{top:.1}" width="{:.4}" height="{PANEL:.1}"/>"#,
        x(0.0),
        x(1.0) - x(0.0)
    );
    for i in 0..2u8 {
        let mut pts = String::new();
        for k in 0..=SAMPLES {
            let t = k as f64 / SAMPLES as f64;
            let v = f(i, t)?;
            let _ = write!(pts, "{:.4},{:.4} ", x(t), top + PANEL * (1.0 - v / ymax));
        }
        let _ = writeln!(out, r#"<polyline class="f{i}" points="{}"/>"#, pts.trim_end());
    }
    out.push_str("</g>\n");
    Ok(())
}
