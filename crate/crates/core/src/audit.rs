//! Re-checks every geometric identity of a tiled surface against the input.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::level;
use crate::network::PlanarComplex;
use crate::solver::{self, HarmonicField};
use crate::tiler::{self, CurveLabel, FlatSurface, Rect};

pub const ENERGY_AREA: &str = "energy = area";
pub const NO_GAPS: &str = "tiling: no gaps";
pub const NO_OVERLAPS: &str = "tiling: no overlaps";
pub const CYLINDER_AREA: &str = "cylinder area = C*H";
pub const CONE_ANGLE: &str = "cone angle 2(n+1)π";
pub const CONSISTENT_GLUING: &str = "consistent gluing";
pub const RECT_WIDTHS: &str = "rect width = edge flux";
pub const BOUNDARY_LENGTHS: &str = "boundary lengths";
pub const PATH_HEIGHTS: &str = "path heights";
pub const BOUNDARY_RECTS: &str = "boundary rects";
pub const QUOTIENT_LENGTHS: &str = "quotient lengths";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub detail: String,
}

impl IdentityCheck {
    fn new(name: &str, residual: f64, tolerance: f64, detail: String) -> Self {
        // NaN residuals fail
        let passed = residual <= tolerance;
        IdentityCheck { name: name.to_string(), residual, tolerance, passed, detail }
    }
}

/// Absolute g-values of a rectangle's top and bottom.
fn levels(surface: &FlatSurface, r: &Rect) -> (f64, f64) {
    let base = surface.cylinders[r.cylinder].bottom_value;
    (base + r.y, base + r.bottom())
}

/// Runs every identity with relative tolerance `tol` (the default is 1e-9).
/// Gluing positions use `tol / 10` and path heights `tol / 1000`.
pub fn audit_surface(complex: &PlanarComplex, field: &HarmonicField, surface: &FlatSurface, tol: f64) -> Result<Vec<IdentityCheck>> {
    let g = &field.values;
    let span = field.span();
    let mut out = Vec::new();

    let energy = solver::energy(g, complex);
    let area: f64 = surface.cylinders.iter().map(|c| c.area()).sum();
    out.push(IdentityCheck::new(
        ENERGY_AREA,
        (area - energy).abs() / energy.max(f64::MIN_POSITIVE),
        tol,
        format!("area {area}, energy {energy}"),
    ));

    let (mut gap, mut overlap, mut cyl_area) = (0.0f64, 0.0f64, 0.0f64);
    let mut gap_detail = String::new();
    let mut overlap_detail = String::new();
    for cyl in &surface.cylinders {
        let rep = tiler::verify_tiling(cyl);
        let c = cyl.circumference;
        let missing = (c - rep.min_covered).max(0.0) / c;
        if !rep.gap_heights.is_empty() && gap_detail.is_empty() {
            gap_detail = format!("cylinder {} uncovered at height {}", cyl.id, rep.gap_heights[0]);
        }
        gap = gap.max(missing);
        let ov = rep.max_overlap / rep.expected_area;
        if ov > overlap {
            overlap = ov;
            overlap_detail = match rep.overlap_pair {
                Some((a, b)) => format!("cylinder {}: rects {a} and {b}", cyl.id),
                None => String::new(),
            };
        }
        cyl_area = cyl_area.max(rep.area_residual / rep.expected_area);
    }
    out.push(IdentityCheck::new(NO_GAPS, gap, 1e-8, gap_detail));
    out.push(IdentityCheck::new(NO_OVERLAPS, overlap, tol, overlap_detail));
    out.push(IdentityCheck::new(CYLINDER_AREA, cyl_area, tol, String::new()));

    // cone angles against the index scan of the input
    // annuli tiled through flat edges have no singular vertices to scan
    let singular: HashMap<usize, i64> = if surface.m == 2 && !level::flat_edges(field, complex).is_empty() {
        HashMap::new()
    } else {
        let report = level::index_formula_check(field, complex)?;
        report.singular().map(|e| (e.vertex, e.index)).collect()
    };
    let mut cone = 0.0f64;
    let mut cone_detail = String::new();
    for p in &surface.singular_points {
        let n = match singular.get(&p.vertex) {
            Some(&i) => -i,
            None => {
                cone = f64::INFINITY;
                cone_detail = format!("vertex {} is not singular", p.vertex);
                continue;
            }
        };
        let expect = 2.0 * (n as f64 + 1.0) * PI;
        let r = (p.cone_angle - expect).abs() / expect;
        if r > cone {
            cone = r;
            cone_detail = format!("vertex {}: angle {} expected {}", p.vertex, p.cone_angle, expect);
        }
        if p.children.len() as i64 != n + 1 {
            cone = f64::INFINITY;
            cone_detail = format!("vertex {}: {} children for n = {n}", p.vertex, p.children.len());
        }
    }
    for &v in singular.keys() {
        if !surface.singular_points.iter().any(|p| p.vertex == v) {
            cone = f64::INFINITY;
            cone_detail = format!("singular vertex {v} has no cone point");
        }
    }
    let n_sum: i64 = surface.singular_points.iter().map(|p| (p.cone_angle / (2.0 * PI)).round() as i64 - 1).sum();
    if n_sum != surface.m as i64 - 2 {
        cone = f64::INFINITY;
        cone_detail = format!("cone excess sums to {n_sum}, expected {}", surface.m as i64 - 2);
    }
    out.push(IdentityCheck::new(CONE_ANGLE, cone, tol, cone_detail));

    // rectangles grouped by input edge
    let mut parts: HashMap<usize, Vec<&Rect>> = HashMap::new();
    for cyl in &surface.cylinders {
        for r in &cyl.rects {
            parts.entry(r.edge).or_default().push(r);
        }
    }
    let mut edge_ids: Vec<usize> = parts.keys().copied().collect();
    edge_ids.sort_unstable();
    let (mut glue, mut widths) = (0.0f64, 0.0f64);
    let (mut glue_detail, mut width_detail) = (String::new(), String::new());
    let gtol = 0.1 * tol;
    for &e in &edge_ids {
        let list = parts.get_mut(&e).unwrap();
        if e >= complex.edges().len() {
            glue = f64::INFINITY;
            glue_detail = format!("rectangle from unknown edge {e}");
            continue;
        }
        let [a, b] = complex.edges()[e];
        let flux = complex.conductance[e] * (g[a] - g[b]).abs();
        for r in list.iter() {
            let w = (r.width - flux).abs() / flux.max(f64::MIN_POSITIVE);
            if w > widths {
                widths = w;
                width_detail = format!("edge {e}: width {} flux {flux}", r.width);
            }
        }
        list.sort_by(|x, y| levels(surface, y).0.total_cmp(&levels(surface, x).0));
        let total: f64 = list.iter().map(|r| r.height).sum();
        let mut worst = (total - (g[a] - g[b]).abs()).abs() / span;
        for pair in list.windows(2) {
            let (p, q) = (pair[0], pair[1]);
            worst = worst.max((levels(surface, p).1 - levels(surface, q).0).abs() / span);
            let cp = &surface.cylinders[p.cylinder];
            let cq = &surface.cylinders[q.cylinder];
            let off = if p.cylinder == q.cylinder {
                circ(p.s, q.s, cp.circumference)
            } else {
                match &cq.glue {
                    Some(gl) if gl.parent == p.cylinder => circ(p.s, gl.arc_start + q.s, cp.circumference),
                    _ => f64::INFINITY,
                }
            };
            worst = worst.max(off / cp.circumference);
        }
        if worst > glue {
            glue = worst;
            glue_detail = format!("edge {e}");
        }
    }
    if surface.gluing_residual > 0.0 {
        let r = surface.gluing_residual / surface.cylinders[0].circumference;
        if r > glue {
            glue = r;
            glue_detail = format!("pinch offsets out of range by {}", surface.gluing_residual);
        }
    }
    out.push(IdentityCheck::new(CONSISTENT_GLUING, glue, gtol, glue_detail));
    out.push(IdentityCheck::new(RECT_WIDTHS, widths, tol, width_detail));

    // boundary lengths against boundary fluxes
    let fluxes = solver::boundary_fluxes(g, complex);
    let scale = fluxes[0].abs().max(f64::MIN_POSITIVE);
    let mut bl = 0.0f64;
    let mut bl_detail = String::new();
    for (i, f) in fluxes.iter().enumerate() {
        let label = if i == 0 { CurveLabel::Outer } else { CurveLabel::Inner(i - 1) };
        let want = if i == 0 { *f } else { -*f };
        let got = surface.boundaries.iter().find(|b| b.label == label).map(|b| b.length);
        let measured = tiler::boundary_lengths(&surface.cylinders).into_iter().find(|b| b.label == label).map(|b| b.length);
        let r = match (got, measured) {
            (Some(x), Some(y)) => ((x - want).abs().max((y - want).abs())) / scale,
            _ => f64::INFINITY,
        };
        if r > bl {
            bl = r;
            let show = |x: Option<f64>| x.map_or("missing".to_string(), |v| v.to_string());
            let name = match label {
                CurveLabel::Inner(j) => format!("inner boundary {j}"),
                _ => "outer boundary".to_string(),
            };
            bl_detail = format!("{name}: stored {}, measured {}, flux {want}", show(got), show(measured));
        }
    }
    out.push(IdentityCheck::new(BOUNDARY_LENGTHS, bl, tol, bl_detail));

    // heights along every root-to-leaf path
    let mut ph = 0.0f64;
    let mut ph_detail = String::new();
    let has_child: Vec<bool> =
        (0..surface.cylinders.len()).map(|i| surface.cylinders.iter().any(|c| c.glue.as_ref().is_some_and(|gl| gl.parent == i))).collect();
    for leaf in surface.cylinders.iter().filter(|c| !has_child[c.id]) {
        let mut sum = 0.0;
        let mut cur = leaf;
        let mut steps = 0;
        loop {
            sum += cur.height;
            steps += 1;
            match &cur.glue {
                Some(gl) if steps <= surface.cylinders.len() => cur = &surface.cylinders[gl.parent],
                Some(_) => {
                    sum = f64::INFINITY;
                    break;
                }
                None => break,
            }
        }
        let r = (sum - span).abs() / span;
        if r > ph {
            ph = r;
            ph_detail = format!("leaf cylinder {}: {sum}", leaf.id);
        }
    }
    out.push(IdentityCheck::new(PATH_HEIGHTS, ph, 1e-3 * tol, ph_detail));

    // rectangles of edges at the boundary reach the right boundary curve
    let mut label_of = vec![None; complex.num_vertices()];
    for (i, cyc) in complex.boundary_cycles().enumerate() {
        for &v in cyc {
            label_of[v] = Some(if i == 0 { CurveLabel::Outer } else { CurveLabel::Inner(i - 1) });
        }
    }
    let mut br = 0.0f64;
    let mut br_detail = String::new();
    for &e in &edge_ids {
        let [a, b] = complex.edges()[e];
        let list = &parts[&e];
        let (hi, lo) = if g[a] > g[b] { (a, b) } else { (b, a) };
        let ends = [(hi, list.first(), true), (lo, list.last(), false)];
        for (v, r, at_top) in ends {
            let (Some(label), Some(r)) = (label_of[v], r) else { continue };
            let cyl = &surface.cylinders[r.cylinder];
            let ok = if at_top {
                cyl.top == label && (r.y - cyl.height).abs() <= tol * span
            } else {
                cyl.bottom == label && r.bottom().abs() <= tol * span
            };
            if !ok {
                br = f64::INFINITY;
                br_detail = format!("edge {e} at vertex {v}");
            }
        }
    }
    out.push(IdentityCheck::new(BOUNDARY_RECTS, br, tol, br_detail));

    // bottoms split exactly into the tops of the glued children
    let mut ql = 0.0f64;
    let mut ql_detail = String::new();
    for cyl in &surface.cylinders {
        let kids: Vec<&tiler::Cylinder> =
            surface.cylinders.iter().filter(|c| c.glue.as_ref().is_some_and(|gl| gl.parent == cyl.id)).collect();
        if kids.is_empty() {
            continue;
        }
        let total: f64 = kids.iter().map(|k| k.circumference).sum();
        let mut r = (total - cyl.circumference).abs() / cyl.circumference;
        for k in &kids {
            let gl = k.glue.as_ref().unwrap();
            r = r.max((gl.arc_length - k.circumference).abs() / cyl.circumference);
        }
        if r > ql {
            ql = r;
            ql_detail = format!("cylinder {}: children sum to {total}", cyl.id);
        }
    }
    out.push(IdentityCheck::new(QUOTIENT_LENGTHS, ql, tol, ql_detail));
    Ok(out)
}

fn circ(a: f64, b: f64, c: f64) -> f64 {
    let d = (a - b).rem_euclid(c);
    d.min(c - d)
}
