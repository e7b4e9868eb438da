//! SVG renderings: unrolled cylinders and the planar input with level curves.

use std::fmt::Write;

use crate::geometry::Point;
use crate::level::{self, LevelOptions};
use crate::network::PlanarComplex;
use crate::solver::HarmonicField;
use crate::tiler::Cylinder;

const WIDTH: f64 = 900.0;
const MARGIN: f64 = 20.0;

fn hue(i: usize) -> f64 {
    (i as f64 * 137.508) % 360.0
}

/// `#rrggbb` for an HSL colour; not every SVG renderer understands `hsl()`.
fn hsl(h: f64, s: f64, l: f64) -> String {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let byte = |v: f64| ((v + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    format!("#{:02x}{:02x}{:02x}", byte(r), byte(g), byte(b))
}

/// The band [0, C) x [0, H] with one box per rectangle. Rectangles crossing
/// the seam are drawn twice and clipped.
pub fn cylinder_svg(cyl: &Cylinder) -> String {
    let c = cyl.circumference;
    let h = cyl.height;
    let scale = (WIDTH - 2.0 * MARGIN) / c;
    let band_h = (h * scale).clamp(80.0, 4.0 * WIDTH);
    let sy = band_h / h;
    let total_h = band_h + 2.0 * MARGIN;
    let x = |s: f64| MARGIN + s * scale;
    let y = |v: f64| MARGIN + (h - v) * sy;

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{total_h:.1}" viewBox="0 0 {WIDTH} {total_h:.1}">"#
    );
    let _ = writeln!(out, "<title>cylinder {} C={} H={}</title>", cyl.id, c, h);
    let _ = writeln!(
        out,
        r#"<defs><clipPath id="band"><rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}"/></clipPath></defs>"#,
        x(0.0),
        y(h),
        c * scale,
        band_h
    );
    let _ = writeln!(out, r##"<g clip-path="url(#band)" stroke="#222" stroke-width="0.5">"##);
    for r in cyl.rects.iter().filter(|r| r.width > 0.0 && r.height > 0.0) {
        for shift in [0.0, -c] {
            let s = r.s + shift;
            if s + r.width <= 1e-9 * c {
                continue;
            }
            let fill = if r.non_embedded { "#f4c2c2".to_string() } else { hsl(hue(r.edge), 0.55, 0.78) };
            let _ = writeln!(
                out,
                r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="{fill}"/>"#,
                x(s),
                y(r.y),
                r.width * scale,
                r.height * sy
            );
        }
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r##"<g stroke="#036" stroke-width="1">"##);
    for m in &cyl.markers {
        let _ = writeln!(out, r#"<line x1="{0:.3}" y1="{1:.3}" x2="{0:.3}" y2="{2:.3}"/>"#, x(m.s), y(m.b), y(m.a));
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(
        out,
        r##"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="#000"/>"##,
        x(0.0),
        y(h),
        c * scale,
        band_h
    );
    let _ = writeln!(
        out,
        r##"<line x1="{0:.3}" y1="{1:.3}" x2="{0:.3}" y2="{2:.3}" stroke="#000" stroke-dasharray="4 3"/>"##,
        x(0.0),
        y(h),
        y(0.0)
    );
    for grp in &cyl.bottom_quotient {
        for &p in grp {
            let _ = writeln!(out, r##"<circle cx="{:.3}" cy="{:.3}" r="4" fill="#c00"/>"##, x(p), y(0.0));
        }
    }
    if cyl.glue.is_some() {
        let _ = writeln!(out, r##"<circle cx="{:.3}" cy="{:.3}" r="4" fill="#c00"/>"##, x(0.0), y(h));
    }
    out.push_str("</svg>\n");
    out
}

/// The input mesh with the level curves at `values` overlaid. Levels that
/// cannot be traced are skipped.
pub fn input_svg(complex: &PlanarComplex, field: &HarmonicField, values: &[f64], singular: &[usize]) -> String {
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &complex.coords {
        for i in 0..2 {
            lo[i] = lo[i].min(p[i]);
            hi[i] = hi[i].max(p[i]);
        }
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let scale = (WIDTH - 2.0 * MARGIN) / span;
    let height = (hi[1] - lo[1]) * scale + 2.0 * MARGIN;
    let map = |p: Point| (MARGIN + (p[0] - lo[0]) * scale, height - MARGIN - (p[1] - lo[1]) * scale);

    let mut out = String::new();
    let _ =
        writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height:.1}" viewBox="0 0 {WIDTH} {height:.1}">"#);
    let _ = writeln!(out, r##"<g stroke="#bbb" stroke-width="0.6">"##);
    for &[a, b] in complex.edges() {
        let (p, q) = (map(complex.coords[a]), map(complex.coords[b]));
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#, p.0, p.1, q.0, q.1);
    }
    let _ = writeln!(out, "</g>");
    for cyc in complex.boundary_cycles() {
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="none" stroke="#000" stroke-width="2"/>"##,
            points(cyc.iter().map(|&v| map(complex.coords[v])))
        );
    }
    let (bottom, top) = (field.bottom.min(field.top), field.bottom.max(field.top));
    for &h in values {
        let Ok(curve) = level::extract_level(field, complex, h, LevelOptions { allow_flat_edges: true }) else { continue };
        let t = (h - bottom) / (top - bottom);
        let color = hsl(240.0 * (1.0 - t), 0.8, 0.4);
        for c in curve.cycles() {
            let _ = writeln!(
                out,
                r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="1.5"><title>g = {h}</title></polygon>"#,
                points(c.path.iter().map(|&p| map(p)))
            );
        }
    }
    for &v in singular {
        let p = map(complex.coords[v]);
        let _ = writeln!(out, r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="#c00"><title>vertex {v}</title></circle>"##, p.0, p.1);
    }
    out.push_str("</svg>\n");
    out
}

fn points(it: impl Iterator<Item = (f64, f64)>) -> String {
    it.map(|(x, y)| format!("{x:.2},{y:.2}")).collect::<Vec<_>>().join(" ")
}

/// `count` regular values spread over (bottom, top), nudged off the given
/// critical values.
pub fn regular_sample(field: &HarmonicField, critical: &[f64], count: usize) -> Vec<f64> {
    let (lo, hi) = (field.bottom.min(field.top), field.bottom.max(field.top));
    let span = hi - lo;
    (0..count)
        .map(|i| {
            let mut v = lo + span * (i as f64 + 0.5) / count as f64;
            while critical.iter().any(|&c| (c - v).abs() < 1e-6 * span) {
                v += 1e-5 * span;
            }
            v
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{fixtures, solver, tiler};

    #[test]
    fn colours() {
        assert_eq!(hsl(0.0, 1.0, 0.5), "#ff0000");
        assert_eq!(hsl(120.0, 1.0, 0.5), "#00ff00");
        assert_eq!(hsl(240.0, 1.0, 0.25), "#000080");
        assert_eq!(hsl(77.0, 0.0, 1.0), "#ffffff");
    }

    #[test]
    fn two_rows_of_squares() {
        let a = fixtures::annulus(8);
        let f = solver::solve(&a, 1.0).unwrap();
        let cyl = tiler::tile_annulus_with(&a, &f, tiler::TileOptions { allow_flat_edges: true }).unwrap();
        let svg = cylinder_svg(&cyl);
        // no rectangle of A(8) crosses the seam
        assert_eq!(svg.matches("<rect").count(), 16 + 2);
        assert!(svg.contains("stroke-dasharray"));
        let svg = input_svg(&a, &f, &[0.25, 0.75], &[]);
        assert_eq!(svg.matches("<polygon").count(), 2 + 2);
    }
}
