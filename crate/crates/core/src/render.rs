//! Static SVG output.
//!
//! All coordinates are written with a fixed number of decimals so that equal
//! inputs give byte-identical files. The first coordinate runs left to
//! right and the second bottom to top.

use std::fmt::Write;

use crate::bet::{walsh, PatternSelection};
use crate::dependence::QSurface;
use crate::diagram::{CellClass, CellIndex, DependenceDiagram, CELLS};
use crate::error::{QdepError, Result};
use crate::ranks::PseudoSample;

pub const WHITE: &str = "#ffffff";
pub const BLUE: &str = "#4a7fd4";
pub const PINK: &str = "#f2a9c4";

const MARGIN: f64 = 40.0;
const SIDE: f64 = 400.0;

fn header(out: &mut String, title: &str) {
    let total = SIDE + 2.0 * MARGIN;
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total:.0}" height="{total:.0}" viewBox="0 0 {total:.0} {total:.0}">"#
    );
    let _ = writeln!(out, "<title>{title}</title>");
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="{WHITE}"/>"#);
}

/// Unit-square point to canvas coordinates.
fn to_canvas(u: f64, v: f64) -> (f64, f64) {
    (MARGIN + u * SIDE, MARGIN + (1.0 - v) * SIDE)
}

fn rect(out: &mut String, u0: f64, v0: f64, u1: f64, v1: f64, fill: &str) {
    let (x, y) = to_canvas(u0, v1);
    let _ = writeln!(
        out,
        r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
        (u1 - u0) * SIDE,
        (v1 - v0) * SIDE
    );
}

fn frame(out: &mut String, ticks: usize) {
    let _ = writeln!(
        out,
        r##"<rect x="{MARGIN:.3}" y="{MARGIN:.3}" width="{SIDE:.3}" height="{SIDE:.3}" fill="none" stroke="#000000" stroke-width="1"/>"##
    );
    for t in 0..=ticks {
        let p = t as f64 / ticks as f64;
        let (x, y0) = to_canvas(p, 0.0);
        let _ = writeln!(
            out,
            r#"<text x="{x:.3}" y="{:.3}" font-size="10" text-anchor="middle">{p:.1}</text>"#,
            y0 + 14.0
        );
        let (x0, y) = to_canvas(0.0, p);
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{:.3}" font-size="10" text-anchor="end">{p:.1}</text>"#,
            x0 - 4.0,
            y + 3.0
        );
    }
    let (cx, by) = to_canvas(0.5, 0.0);
    let _ = writeln!(out, r#"<text x="{cx:.3}" y="{:.3}" font-size="12" text-anchor="middle">u</text>"#, by + 30.0);
    let (lx, cy) = to_canvas(0.0, 0.5);
    let _ = writeln!(out, r#"<text x="{:.3}" y="{cy:.3}" font-size="12" text-anchor="middle">v</text>"#, lx - 28.0);
}

pub fn class_color(class: CellClass) -> &'static str {
    match class {
        CellClass::White => WHITE,
        CellClass::Blue => BLUE,
        CellClass::Pink => PINK,
        CellClass::Mixed => "url(#mixed)",
    }
}

/// 10×10 diagram; cells crossing both barriers are striped blue and pink.
pub fn diagram_svg(diagram: &DependenceDiagram) -> String {
    let mut out = String::new();
    let m = &diagram.meta;
    header(
        &mut out,
        &format!("dependence diagram n={} d={} alpha_side={}", m.n, m.d, m.alpha_side),
    );
    let _ = writeln!(
        out,
        r#"<defs><pattern id="mixed" width="8" height="8" patternUnits="userSpaceOnUse" patternTransform="rotate(45)"><rect width="4" height="8" fill="{BLUE}"/><rect x="4" width="4" height="8" fill="{PINK}"/></pattern></defs>"#
    );
    let w = 1.0 / CELLS as f64;
    for c in CellIndex::all() {
        let (u0, v0) = ((c.k - 1) as f64 * w, (c.l - 1) as f64 * w);
        rect(&mut out, u0, v0, u0 + w, v0 + w, class_color(diagram.class(c)));
    }
    for t in 1..CELLS {
        let p = t as f64 * w;
        let (x, y0) = to_canvas(p, 0.0);
        let (_, y1) = to_canvas(p, 1.0);
        let _ = writeln!(
            out,
            r##"<line x1="{x:.3}" y1="{y0:.3}" x2="{x:.3}" y2="{y1:.3}" stroke="#bbbbbb" stroke-width="0.5"/>"##
        );
        let (x0, y) = to_canvas(0.0, p);
        let (x1, _) = to_canvas(1.0, p);
        let _ = writeln!(
            out,
            r##"<line x1="{x0:.3}" y1="{y:.3}" x2="{x1:.3}" y2="{y:.3}" stroke="#bbbbbb" stroke-width="0.5"/>"##
        );
    }
    frame(&mut out, CELLS);
    out.push_str("</svg>\n");
    out
}

/// Diverging scale: −1 blue, 0 white, +1 red.
fn heat_color(q: f64) -> String {
    let t = q.clamp(-1.0, 1.0).abs();
    let (r, g, b) = if q < 0.0 { (33.0, 102.0, 172.0) } else { (178.0, 24.0, 43.0) };
    let mix = |c: f64| (255.0 + (c - 255.0) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(r), mix(g), mix(b))
}

/// Heatmap of `q̄ₙ`, one square per grid point.
pub fn qsurface_svg(surface: &QSurface) -> String {
    let mut out = String::new();
    header(
        &mut out,
        &format!("quantile dependence n={} d={}", surface.n(), surface.size()),
    );
    let d = surface.size();
    let big_d = surface.grid().denominator() as f64;
    for j in 0..d {
        for k in 0..d {
            // square centred on ((j+1)/D, (k+1)/D)
            let (u0, v0) = ((j as f64 + 0.5) / big_d, (k as f64 + 0.5) / big_d);
            let (u1, v1) = ((j as f64 + 1.5) / big_d, (k as f64 + 1.5) / big_d);
            rect(&mut out, u0, v0, u1, v1, &heat_color(surface.q(j, k)));
        }
    }
    frame(&mut out, CELLS);
    out.push_str("</svg>\n");
    out
}

/// Selected Walsh template (blue where `sign·wᵢ(u)·wⱼ(v) = +1`) under the
/// scatter of rank midpoints.
pub fn bet_overlay_svg(pseudo: &PseudoSample, selection: &PatternSelection) -> Result<String> {
    if pseudo.dim() != 2 {
        return Err(QdepError::InvalidSample("overlay needs 2 columns".into()));
    }
    let (i, j) = selection.index;
    let mut out = String::new();
    header(
        &mut out,
        &format!("{} sign {} n={}", selection.zhang_label, selection.sign, pseudo.n()),
    );
    for a in 0..4 {
        for b in 0..4 {
            let (u, v) = ((a as f64 + 0.5) / 4.0, (b as f64 + 0.5) / 4.0);
            let s = selection.sign * walsh(i, u)? * walsh(j, v)?;
            let fill = if s > 0 { BLUE } else { WHITE };
            rect(&mut out, a as f64 / 4.0, b as f64 / 4.0, (a + 1) as f64 / 4.0, (b + 1) as f64 / 4.0, fill);
        }
    }
    let n = pseudo.n() as f64;
    for (&r, &s) in pseudo.rank_column(0).iter().zip(pseudo.rank_column(1)) {
        let (x, y) = to_canvas((r as f64 - 0.5) / n, (s as f64 - 0.5) / n);
        let _ = writeln!(out, r##"<circle cx="{x:.3}" cy="{y:.3}" r="1.5" fill="#000000"/>"##);
    }
    frame(&mut out, 4);
    out.push_str("</svg>\n");
    Ok(out)
}
