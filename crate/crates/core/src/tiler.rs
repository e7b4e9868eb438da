//! Rectangle tilings of the flat surfaces induced by a harmonic field.

use std::collections::HashMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::level;
use crate::network::PlanarComplex;
use crate::solver::{self, HarmonicField};
use crate::surgery::{self, BoundaryLabel, CutPiece, EdgeOrigin, VertexOrigin};

/// Image of one descending edge (or part of one): width c(u,v)(g(u)-g(v)),
/// height g(u)-g(v).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    /// Edge of the input complex.
    pub edge: usize,
    pub cylinder: usize,
    /// Left side, in [0, C).
    pub s: f64,
    /// Top side, measured up from the cylinder's bottom.
    pub y: f64,
    pub width: f64,
    pub height: f64,
    /// Bottom side runs across a pinch point of the bottom quotient.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub non_embedded: bool,
}

impl Rect {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }

    pub fn bottom(&self) -> f64 {
        self.y - self.height
    }
}

/// Vertical segment at the left side of a rectangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marker {
    pub cylinder: usize,
    pub s: f64,
    pub a: f64,
    pub b: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveLabel {
    /// Outer boundary cycle of the input.
    Outer,
    /// Inner boundary cycle of the input with this index.
    Inner(usize),
    /// Singular level curve at this value.
    Level(f64),
}

/// The top circle of a cylinder is glued onto `[arc_start, arc_start + arc_length)`
/// of its parent's bottom (mod the parent's circumference).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Glue {
    pub parent: usize,
    pub arc_start: f64,
    pub arc_length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub id: usize,
    pub circumference: f64,
    pub height: f64,
    pub top_value: f64,
    pub bottom_value: f64,
    pub top: CurveLabel,
    pub bottom: CurveLabel,
    pub glue: Option<Glue>,
    /// Groups of bottom arc positions identified to one point.
    pub bottom_quotient: Vec<Vec<f64>>,
    pub rects: Vec<Rect>,
    /// Zero-size rectangles of flat edges.
    #[serde(default)]
    pub flat_rects: Vec<Rect>,
    pub markers: Vec<Marker>,
}

impl Cylinder {
    pub fn area(&self) -> f64 {
        self.rects.iter().map(Rect::area).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingularPoint {
    /// Vertex of the input complex.
    pub vertex: usize,
    pub index: i64,
    pub cone_angle: f64,
    /// Cylinder whose bottom carries the pinch.
    pub cylinder: usize,
    /// Number of bottom positions identified to this point.
    pub pinches: usize,
    /// Cylinders glued at this point.
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryLength {
    pub label: CurveLabel,
    pub cylinder: usize,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatSurface {
    pub m: usize,
    pub top: f64,
    pub bottom: f64,
    /// Root first; every other cylinder is glued under its parent.
    pub cylinders: Vec<Cylinder>,
    pub singular_points: Vec<SingularPoint>,
    pub boundaries: Vec<BoundaryLength>,
    pub area: f64,
    pub energy: f64,
    /// Largest amount by which a pinch position had to leave its feasible range.
    pub gluing_residual: f64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct TileOptions {
    /// Tile through edges whose ends share a value, as zero-size rectangles.
    pub allow_flat_edges: bool,
}

/// Relative tolerance for the per-vertex balance of placed rectangles.
const BALANCE_TOL: f64 = 1e-9;

fn wrap(s: f64, c: f64) -> f64 {
    let r = s.rem_euclid(c);
    if r >= c {
        r - c
    } else {
        r
    }
}

fn circ_dist(a: f64, b: f64, c: f64) -> f64 {
    let d = (a - b).rem_euclid(c);
    d.min(c - d)
}

fn snap(field: &HarmonicField) -> f64 {
    level::SNAP * field.span()
}

/// Sum of c(v,w)(g(v)-g(w)) over conducting edges to lower neighbors.
fn down_flux(complex: &PlanarComplex, g: &[f64], v: usize, eps: f64) -> f64 {
    complex
        .neighbors(v)
        .iter()
        .filter(|&&(w, e)| complex.conductance[e] > 0.0 && g[w] < g[v] - eps)
        .map(|&(w, e)| complex.conductance[e] * (g[v] - g[w]))
        .sum()
}

/// Arc positions of the outer cycle: counterclockwise from its smallest id,
/// each vertex taking up its downward flux.
fn top_positions(complex: &PlanarComplex, field: &HarmonicField) -> (Vec<usize>, Vec<f64>, f64) {
    let eps = snap(field);
    let outer = complex.outer();
    let start = (0..outer.len()).min_by_key(|&i| outer[i]).unwrap_or(0);
    let order: Vec<usize> = (0..outer.len()).map(|i| outer[(start + i) % outer.len()]).collect();
    let mut s = 0.0;
    let mut pos = Vec::with_capacity(order.len());
    for &x in &order {
        pos.push(s);
        s += down_flux(complex, &field.values, x, eps);
    }
    (order, pos, s)
}

struct BandRect {
    edge: usize,
    upper: usize,
    s: f64,
    width: f64,
    height: f64,
}

struct Band {
    c: f64,
    rects: Vec<BandRect>,
    flat: Vec<BandRect>,
    rect_of_edge: Vec<usize>,
}

/// Left-to-right placement of all descending edges of a band whose top is the
/// outer cycle and whose bottom is every inner cycle.
fn sweep(complex: &PlanarComplex, field: &HarmonicField, allow_flat: bool) -> Result<Band> {
    let g = &field.values;
    let eps = snap(field);
    let flat_edges = level::flat_edges(field, complex);
    if !flat_edges.is_empty() && !allow_flat {
        return Err(Error::degenerate_edges(complex, flat_edges));
    }
    let (order, pos, c) = top_positions(complex, field);
    if c <= 0.0 {
        return Err(Error::NotApplicable("band carries no flux".into()));
    }
    let mut band = Band { c, rects: Vec::new(), flat: Vec::new(), rect_of_edge: vec![usize::MAX; complex.edges().len()] };
    let mut vertex_s: HashMap<usize, f64> = HashMap::new();

    let place = |band: &mut Band, e: usize, upper: usize, lower: usize, s: f64| -> f64 {
        let height = g[upper] - g[lower];
        let width = complex.conductance[e] * height;
        band.rect_of_edge[e] = band.rects.len();
        band.rects.push(BandRect { edge: e, upper, s: wrap(s, c), width, height });
        s + width
    };

    for (&x, &s0) in order.iter().zip(&pos) {
        vertex_s.insert(x, s0);
        let fan = complex.fan(x);
        if fan.chains.len() != 1 {
            return Err(Error::Unsupported(format!("top vertex {x} has {} sectors", fan.chains.len())));
        }
        let mut s = s0;
        for &w in fan.chains[0].iter().rev() {
            let e = complex.edge_id(x, w).expect("fan neighbor is adjacent");
            if complex.conductance[e] > 0.0 && g[w] < g[x] - eps {
                s = place(&mut band, e, x, w, s);
            }
        }
    }

    let mut inner: Vec<usize> = complex.interior_vertices();
    inner.sort_by(|&a, &b| g[b].total_cmp(&g[a]).then(a.cmp(&b)));
    for v in inner {
        // neighbors clockwise, tagged up (true) or down (false)
        let fan = complex.fan(v);
        let cw: Vec<(usize, usize, bool)> = fan.chains[0]
            .iter()
            .rev()
            .filter_map(|&w| {
                let e = complex.edge_id(v, w).expect("fan neighbor is adjacent");
                if complex.conductance[e] <= 0.0 || (g[w] - g[v]).abs() <= eps {
                    None
                } else {
                    Some((w, e, g[w] > g[v]))
                }
            })
            .collect();
        let k = cw.len();
        let starts: Vec<usize> = (0..k).filter(|&i| !cw[i].2 && cw[(i + k - 1) % k].2).collect();
        if starts.len() != 1 {
            return Err(Error::Consistency(format!("vertex {v} is not regular inside a band")));
        }
        let d1 = starts[0];
        let seq: Vec<(usize, usize, bool)> = (0..k).map(|i| cw[(d1 + i) % k]).collect();
        let n_down = seq.iter().take_while(|x| !x.2).count();
        let (downs, ups) = seq.split_at(n_down);
        let u1 = ups.last().expect("regular vertex has an upper neighbor");
        let r1 = band.rect_of_edge[u1.1];
        if r1 == usize::MAX {
            return Err(Error::Consistency(format!("edge {} reached before its upper end", u1.1)));
        }
        let s_v = band.rects[r1].s;
        let mut expect = s_v;
        for u in ups.iter().rev() {
            let r = band.rect_of_edge[u.1];
            if r == usize::MAX {
                return Err(Error::Consistency(format!("edge {} reached before its upper end", u.1)));
            }
            let rect = &band.rects[r];
            if circ_dist(rect.s, expect, c) > BALANCE_TOL * c {
                return Err(Error::Consistency(format!("rectangles above vertex {v} are not contiguous ({} vs {expect})", rect.s)));
            }
            expect = rect.s + rect.width;
        }
        vertex_s.insert(v, s_v);
        let mut s = s_v;
        for d in downs {
            s = place(&mut band, d.1, v, d.0, s);
        }
    }

    if allow_flat {
        for e in flat_edges {
            let [a, b] = complex.edges()[e];
            let s = vertex_s.get(&a).or(vertex_s.get(&b)).copied().unwrap_or(0.0);
            band.flat.push(BandRect { edge: e, upper: a, s: wrap(s, c), width: 0.0, height: 0.0 });
        }
    }
    Ok(band)
}

/// Start and length of each run of upward rectangles arriving at a bottom
/// vertex, one per sector.
fn arrival_blocks(complex: &PlanarComplex, field: &HarmonicField, band: &Band, v: usize) -> Result<Vec<(f64, f64)>> {
    let g = &field.values;
    let eps = snap(field);
    let mut out = Vec::new();
    for chain in &complex.fan(v).chains {
        let mut start = None;
        let mut expect = 0.0;
        let mut len = 0.0;
        for &w in chain {
            let e = complex.edge_id(v, w).expect("fan neighbor is adjacent");
            if complex.conductance[e] <= 0.0 || g[w] <= g[v] + eps {
                continue;
            }
            let r = band.rect_of_edge[e];
            if r == usize::MAX {
                return Err(Error::Consistency(format!("edge {e} above bottom vertex {v} was not placed")));
            }
            let rect = &band.rects[r];
            if start.is_none() {
                start = Some(rect.s);
                expect = rect.s;
            }
            if circ_dist(rect.s, expect, band.c) > BALANCE_TOL * band.c {
                return Err(Error::Consistency(format!("rectangles above bottom vertex {v} are not contiguous")));
            }
            expect = rect.s + rect.width;
            len += rect.width;
        }
        if let Some(s) = start {
            out.push((s, len));
        }
    }
    Ok(out)
}

/// A piece of the input being tiled, with maps back to input ids.
struct Region {
    complex: PlanarComplex,
    field: HarmonicField,
    vmap: Vec<Option<usize>>,
    emap: Vec<Option<usize>>,
    labels: Vec<CurveLabel>,
}

impl Region {
    fn root(complex: &PlanarComplex, field: &HarmonicField) -> Region {
        Region {
            complex: complex.clone(),
            field: field.clone(),
            vmap: (0..complex.num_vertices()).map(Some).collect(),
            emap: (0..complex.edges().len()).map(Some).collect(),
            labels: std::iter::once(CurveLabel::Outer).chain((0..complex.inner().len()).map(CurveLabel::Inner)).collect(),
        }
    }

    fn child(&self, piece: &CutPiece, level: f64) -> Region {
        let vmap = piece
            .vertex_origin
            .iter()
            .map(|o| match *o {
                VertexOrigin::Parent(v) => self.vmap[v],
                _ => None,
            })
            .collect();
        let emap = piece
            .edge_origin
            .iter()
            .map(|o| match *o {
                EdgeOrigin::Parent(e) | EdgeOrigin::Split { edge: e, .. } => self.emap[e],
                EdgeOrigin::Arc => None,
            })
            .collect();
        let labels = piece
            .boundary
            .iter()
            .map(|b| match *b {
                BoundaryLabel::Outer => self.labels[0],
                BoundaryLabel::Inner(i) => self.labels[1 + i],
                BoundaryLabel::Level(_) => CurveLabel::Level(level),
            })
            .collect();
        Region { complex: piece.complex.clone(), field: piece.field.clone(), vmap, emap, labels }
    }
}

fn make_cylinder(id: usize, region: &Region, band: &Band, bottom: CurveLabel) -> Result<Cylinder> {
    let f = &region.field;
    let root_edge = |e: usize| region.emap[e].ok_or_else(|| Error::Consistency(format!("rectangle from cut arc {e}")));
    let g = &f.values;
    let mut rects = Vec::with_capacity(band.rects.len());
    let mut markers = Vec::with_capacity(band.rects.len());
    for r in &band.rects {
        let y = g[r.upper] - f.bottom;
        rects.push(Rect { edge: root_edge(r.edge)?, cylinder: id, s: r.s, y, width: r.width, height: r.height, non_embedded: false });
        if r.width > 0.0 && r.height > 0.0 {
            markers.push(Marker { cylinder: id, s: r.s, a: y - r.height, b: y });
        }
    }
    let flat_rects = band
        .flat
        .iter()
        .map(|r| {
            Ok(Rect {
                edge: root_edge(r.edge)?,
                cylinder: id,
                s: r.s,
                y: g[r.upper] - f.bottom,
                width: 0.0,
                height: 0.0,
                non_embedded: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Cylinder {
        id,
        circumference: band.c,
        height: f.top - f.bottom,
        top_value: f.top,
        bottom_value: f.bottom,
        top: region.labels[0],
        bottom,
        glue: None,
        bottom_quotient: Vec::new(),
        rects,
        flat_rects,
        markers,
    })
}

struct Builder {
    cylinders: Vec<Cylinder>,
    singular: Vec<SingularPoint>,
    gluing_residual: f64,
    opts: TileOptions,
}

/// Moves the arc origin of a cylinder forward by `delta`.
fn shift_cylinder(b: &mut Builder, id: usize, delta: f64) {
    let cyl = &mut b.cylinders[id];
    let c = cyl.circumference;
    for r in cyl.rects.iter_mut().chain(cyl.flat_rects.iter_mut()) {
        r.s = wrap(r.s - delta, c);
    }
    for m in cyl.markers.iter_mut() {
        m.s = wrap(m.s - delta, c);
    }
    for grp in cyl.bottom_quotient.iter_mut() {
        for p in grp.iter_mut() {
            *p = wrap(*p - delta, c);
        }
    }
    for other in b.cylinders.iter_mut() {
        if let Some(gl) = other.glue.as_mut() {
            if gl.parent == id {
                gl.arc_start = wrap(gl.arc_start - delta, c);
            }
        }
    }
}

fn tile_region(b: &mut Builder, region: Region) -> Result<usize> {
    let m = region.complex.m();
    if m == 2 {
        let band = sweep(&region.complex, &region.field, b.opts.allow_flat_edges)?;
        let id = b.cylinders.len();
        let cyl = make_cylinder(id, &region, &band, region.labels[1])?;
        b.cylinders.push(cyl);
        return Ok(id);
    }
    if m < 2 {
        return Err(Error::NotApplicable(format!("cannot tile a region with m = {m}")));
    }

    let curve = level::enclosing_singular_curve(&region.field, &region.complex)?;
    if curve.components.len() != 1 {
        return Err(Error::Consistency(format!("singular level {} has {} components", curve.value, curve.components.len())));
    }
    let tang = &curve.components[0].tangencies;
    if tang.len() != 1 {
        return Err(Error::Unsupported(format!("singular level curve with {} tangency vertices", tang.len())));
    }
    let u = tang[0];
    let h = curve.value;
    let index = level::index(&region.field, &region.complex, u)?;
    let lobes = curve.num_cycles();
    if lobes as i64 != 1 - index {
        return Err(Error::Consistency(format!("vertex {u} has index {index} but {lobes} lobes")));
    }
    let cut = surgery::cut_along(&region.complex, &region.field, &curve)?;

    let ext_region = region.child(&cut.exterior, h);
    if ext_region.labels[1..].iter().any(|l| !matches!(l, CurveLabel::Level(_))) {
        return Err(Error::Consistency("an inner boundary lies outside the enclosing level curve".into()));
    }
    let band = sweep(&ext_region.complex, &ext_region.field, false)?;
    let id = b.cylinders.len();
    let cyl = make_cylinder(id, &ext_region, &band, CurveLabel::Level(h))?;
    b.cylinders.push(cyl);
    let c = band.c;

    // bottom circle: runs of u's arrivals (None) and lobe arrivals (Some(ci))
    let ext = &cut.exterior;
    let find = |piece: &CutPiece| {
        piece
            .vertex_origin
            .iter()
            .position(|o| *o == VertexOrigin::Parent(u))
            .ok_or_else(|| Error::Consistency(format!("singular vertex {u} missing from a piece")))
    };
    let u_ext = find(ext)?;
    let mut blocks: Vec<(f64, f64, Option<usize>)> =
        arrival_blocks(&ext.complex, &ext.field, &band, u_ext)?.into_iter().map(|(s, l)| (s, l, None)).collect();
    for (label, cyc) in ext.boundary.iter().zip(ext.complex.boundary_cycles()).skip(1) {
        let BoundaryLabel::Level(ci) = *label else { continue };
        for &x in cyc.iter().filter(|&&x| x != u_ext) {
            for (s, l) in arrival_blocks(&ext.complex, &ext.field, &band, x)? {
                blocks.push((s, l, Some(ci)));
            }
        }
    }
    blocks.sort_by(|a, b| a.0.total_cmp(&b.0));
    let first_u =
        blocks.iter().position(|x| x.2.is_none()).ok_or_else(|| Error::Consistency(format!("no arrivals at singular vertex {u}")))?;
    blocks.rotate_left(first_u);
    // (start of U_j, |U_j|, lobe, |A_j|)
    let mut runs: Vec<(f64, f64, Option<usize>, f64)> = Vec::new();
    let mut expect = blocks[0].0;
    for &(s, l, lobe) in &blocks {
        if circ_dist(s, expect, c) > BALANCE_TOL * c {
            return Err(Error::Consistency(format!("bottom of cylinder {id} has a gap at {expect}")));
        }
        expect = s + l;
        match lobe {
            None => runs.push((s, l, None, 0.0)),
            Some(ci) => {
                let run = runs.last_mut().expect("rotation starts at a U block");
                match run.2 {
                    None => run.2 = Some(ci),
                    Some(cj) if cj != ci => return Err(Error::Consistency(format!("lobes {cj} and {ci} are not separated by vertex {u}"))),
                    _ => {}
                }
                run.3 += l;
            }
        }
    }
    let mut seen = vec![false; lobes];
    for r in &runs {
        match r.2 {
            Some(ci) if !seen[ci] => seen[ci] = true,
            _ => return Err(Error::Consistency(format!("bottom of cylinder {id} does not alternate at vertex {u}"))),
        }
    }
    if runs.len() != lobes {
        return Err(Error::Consistency(format!("{} arrival runs for {lobes} lobes", runs.len())));
    }

    // u's share of each child's top circle
    let mut d = Vec::with_capacity(lobes);
    for r in &runs {
        let piece = &cut.interiors[r.2.unwrap()];
        let uc = find(piece)?;
        d.push(down_flux(&piece.complex, &piece.field.values, uc, snap(&piece.field)));
    }
    // pinch offsets: lambda_j = t + o_j must lie in [0, U_j]
    let mut o = vec![0.0; lobes];
    for j in 1..lobes {
        o[j] = o[j - 1] + d[j - 1] - runs[j - 1].1;
    }
    let lo = (0..lobes).map(|j| -o[j]).fold(f64::NEG_INFINITY, f64::max);
    let hi = (0..lobes).map(|j| runs[j].1 - o[j]).fold(f64::INFINITY, f64::min);
    let t = 0.5 * (lo + hi);
    b.gluing_residual = b.gluing_residual.max(lo - hi);
    let lambda: Vec<f64> = o.iter().map(|oj| t + oj).collect();
    let pinches: Vec<f64> = (0..lobes).map(|j| wrap(runs[j].0 + lambda[j], c)).collect();

    let mut children = Vec::with_capacity(lobes);
    for j in 0..lobes {
        let ci = runs[j].2.unwrap();
        let piece = &cut.interiors[ci];
        let (order, pos, l) = top_positions(&piece.complex, &piece.field);
        let uc = find(piece)?;
        let k =
            order.iter().position(|&x| x == uc).ok_or_else(|| Error::Consistency(format!("vertex {u} is not on the top of lobe {ci}")))?;
        let a_start = pos[(k + 1) % order.len()];
        let r_j = runs[j].1 - lambda[j];
        let child = tile_region(b, region.child(piece, h))?;
        shift_cylinder(b, child, a_start - r_j);
        b.cylinders[child].glue = Some(Glue { parent: id, arc_start: pinches[j], arc_length: l });
        children.push(child);
    }

    let cyl = &mut b.cylinders[id];
    for r in cyl.rects.iter_mut() {
        if r.bottom().abs() <= 1e-9 * cyl.height {
            r.non_embedded = pinches.iter().any(|&p| {
                let off = (p - r.s).rem_euclid(c);
                off > 1e-12 * c && off < r.width - 1e-12 * c
            });
        }
    }
    cyl.bottom_quotient = vec![pinches.clone()];
    let vertex = region.vmap[u].ok_or_else(|| Error::Consistency("singular vertex is not an input vertex".into()))?;
    b.singular.push(SingularPoint {
        vertex,
        index,
        cone_angle: PI * pinches.len() as f64 + PI * children.len() as f64,
        cylinder: id,
        pinches: pinches.len(),
        children,
    });
    Ok(id)
}

fn check_field(complex: &PlanarComplex, field: &HarmonicField) -> Result<()> {
    if field.values.len() != complex.num_vertices() {
        return Err(Error::FieldSize { expected: complex.num_vertices(), got: field.values.len() });
    }
    Ok(())
}

/// Tiles an annulus (m = 2) as one cylinder.
pub fn tile_annulus(complex: &PlanarComplex, field: &HarmonicField) -> Result<Cylinder> {
    tile_annulus_with(complex, field, TileOptions::default())
}

pub fn tile_annulus_with(complex: &PlanarComplex, field: &HarmonicField, opts: TileOptions) -> Result<Cylinder> {
    check_field(complex, field)?;
    if complex.m() != 2 {
        return Err(Error::ModeMismatch { mode: "annulus".into(), needs: "m = 2".into(), m: complex.m() });
    }
    let region = Region::root(complex, field);
    let band = sweep(complex, field, opts.allow_flat_edges)?;
    make_cylinder(0, &region, &band, region.labels[1])
}

pub fn tile_pair_of_pants(complex: &PlanarComplex, field: &HarmonicField) -> Result<FlatSurface> {
    if complex.m() != 3 {
        return Err(Error::ModeMismatch { mode: "pants".into(), needs: "m = 3".into(), m: complex.m() });
    }
    tile_surface(complex, field, TileOptions::default())
}

pub fn tile_ladder(complex: &PlanarComplex, field: &HarmonicField) -> Result<FlatSurface> {
    if complex.m() < 3 {
        return Err(Error::ModeMismatch { mode: "ladder".into(), needs: "m >= 3".into(), m: complex.m() });
    }
    tile_surface(complex, field, TileOptions::default())
}

/// Tiles any input with m >= 2: a single cylinder for annuli, the recursive
/// decomposition along enclosing singular curves otherwise.
pub fn tile_surface(complex: &PlanarComplex, field: &HarmonicField, opts: TileOptions) -> Result<FlatSurface> {
    check_field(complex, field)?;
    let m = complex.m();
    if m < 2 {
        return Err(Error::NotApplicable(format!("cannot tile an input with m = {m}")));
    }
    if m > 2 || !opts.allow_flat_edges {
        level::check_generic(field, complex)?;
    }
    let mut b = Builder { cylinders: Vec::new(), singular: Vec::new(), gluing_residual: 0.0, opts };
    tile_region(&mut b, Region::root(complex, field))?;
    b.singular.sort_by_key(|p| p.vertex);
    let boundaries = boundary_lengths(&b.cylinders);
    let area = b.cylinders.iter().map(Cylinder::area).sum();
    Ok(FlatSurface {
        m,
        top: field.top,
        bottom: field.bottom,
        cylinders: b.cylinders,
        singular_points: b.singular,
        boundaries,
        area,
        energy: solver::energy(&field.values, complex),
        gluing_residual: b.gluing_residual.max(0.0),
    })
}

/// Length of each input boundary cycle on the surface, from the rectangles
/// touching it.
pub fn boundary_lengths(cylinders: &[Cylinder]) -> Vec<BoundaryLength> {
    let mut out = Vec::new();
    for cyl in cylinders {
        let tol = 1e-9 * cyl.height;
        if cyl.top == CurveLabel::Outer {
            let length = cyl.rects.iter().filter(|r| (r.y - cyl.height).abs() <= tol).map(|r| r.width).sum();
            out.push(BoundaryLength { label: CurveLabel::Outer, cylinder: cyl.id, length });
        }
        if let CurveLabel::Inner(i) = cyl.bottom {
            let length = cyl.rects.iter().filter(|r| r.bottom().abs() <= tol).map(|r| r.width).sum();
            out.push(BoundaryLength { label: CurveLabel::Inner(i), cylinder: cyl.id, length });
        }
    }
    out.sort_by_key(|b| match b.label {
        CurveLabel::Outer => 0,
        CurveLabel::Inner(i) => 1 + i,
        CurveLabel::Level(_) => usize::MAX,
    });
    out
}

/// Area, overlap and gap checks of one cylinder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TilingReport {
    pub area: f64,
    pub expected_area: f64,
    pub area_residual: f64,
    /// Largest overlap area of any two rectangles.
    pub max_overlap: f64,
    pub overlap_pair: Option<(usize, usize)>,
    pub heights_sampled: usize,
    /// Smallest covered width over the sampled heights.
    pub min_covered: f64,
    /// Sampled heights where the covered width falls short of C.
    pub gap_heights: Vec<f64>,
}

impl TilingReport {
    /// All three certificates at relative tolerance `tol`; gaps at 1e-8 C.
    pub fn passes(&self, tol: f64) -> bool {
        self.area_residual <= tol * self.expected_area.max(f64::MIN_POSITIVE)
            && self.max_overlap <= tol * self.expected_area
            && self.gap_heights.is_empty()
    }
}

/// Sub-intervals of [0, C) covered by a rectangle's base.
fn base_intervals(r: &Rect, c: f64) -> Vec<(f64, f64)> {
    let s = wrap(r.s, c);
    let w = r.width.min(c);
    if s + w <= c {
        vec![(s, s + w)]
    } else {
        vec![(s, c), (0.0, s + w - c)]
    }
}

pub fn verify_tiling(cyl: &Cylinder) -> TilingReport {
    let c = cyl.circumference;
    let hgt = cyl.height;
    let rects: Vec<&Rect> = cyl.rects.iter().filter(|r| r.width > 0.0 && r.height > 0.0).collect();
    let area: f64 = cyl.rects.iter().map(Rect::area).sum();
    let expected = c * hgt;

    // overlaps: sweep in s with an active list
    let mut pieces: Vec<(f64, f64, usize)> = Vec::new();
    for (i, r) in rects.iter().enumerate() {
        for (a, b) in base_intervals(r, c) {
            pieces.push((a, b, i));
        }
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut pair_overlap: HashMap<(usize, usize), f64> = HashMap::new();
    let mut active: Vec<(f64, f64, usize)> = Vec::new();
    for &(a, b, i) in &pieces {
        active.retain(|p| p.1 > a);
        for &(pa, pb, j) in &active {
            let ds = pb.min(b) - pa.max(a);
            let (ri, rj) = (rects[i], rects[j]);
            let dy = ri.y.min(rj.y) - ri.bottom().max(rj.bottom());
            if ds > 0.0 && dy > 0.0 {
                *pair_overlap.entry((i.min(j), i.max(j))).or_insert(0.0) += ds * dy;
            }
        }
        active.push((a, b, i));
    }
    let (overlap_pair, max_overlap) =
        pair_overlap.iter().max_by(|x, y| x.1.total_cmp(y.1)).map(|(&k, &v)| (Some(k), v)).unwrap_or((None, 0.0));

    // gaps: covered width at heights just above and below every rectangle side
    let eps = 1e-7 * hgt;
    let mut heights: Vec<f64> =
        rects.iter().flat_map(|r| [r.y - eps, r.y + eps, r.bottom() - eps, r.bottom() + eps]).filter(|&y| y > 0.0 && y < hgt).collect();
    if heights.is_empty() && hgt > 0.0 {
        heights.push(0.5 * hgt);
    }
    heights.sort_by(f64::total_cmp);
    heights.dedup();
    let mut xs: Vec<f64> = vec![0.0, c];
    for r in &rects {
        for (a, b) in base_intervals(r, c) {
            xs.push(a);
            xs.push(b);
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut tree = CoverTree::new(&xs);
    let mut by_bottom: Vec<usize> = (0..rects.len()).collect();
    by_bottom.sort_by(|&i, &j| rects[i].bottom().total_cmp(&rects[j].bottom()));
    let mut by_top: Vec<usize> = (0..rects.len()).collect();
    by_top.sort_by(|&i, &j| rects[i].y.total_cmp(&rects[j].y));
    let (mut ib, mut it) = (0, 0);
    let mut min_covered = if rects.is_empty() { 0.0 } else { f64::INFINITY };
    let mut gap_heights = Vec::new();
    for &y in &heights {
        while ib < by_bottom.len() && rects[by_bottom[ib]].bottom() < y {
            for (a, b) in base_intervals(rects[by_bottom[ib]], c) {
                tree.update(a, b, 1);
            }
            ib += 1;
        }
        while it < by_top.len() && rects[by_top[it]].y < y {
            for (a, b) in base_intervals(rects[by_top[it]], c) {
                tree.update(a, b, -1);
            }
            it += 1;
        }
        let covered = tree.covered();
        min_covered = min_covered.min(covered);
        if covered < c - 1e-8 * c {
            gap_heights.push(y);
        }
    }
    if rects.is_empty() && c > 0.0 {
        gap_heights.push(0.5 * hgt);
    }
    TilingReport {
        area,
        expected_area: expected,
        area_residual: (area - expected).abs(),
        max_overlap,
        overlap_pair,
        heights_sampled: heights.len(),
        min_covered,
        gap_heights,
    }
}

/// Segment tree over compressed coordinates giving the covered length.
struct CoverTree {
    xs: Vec<f64>,
    count: Vec<i32>,
    len: Vec<f64>,
}

impl CoverTree {
    fn new(xs: &[f64]) -> Self {
        let n = xs.len().saturating_sub(1).max(1);
        CoverTree { xs: xs.to_vec(), count: vec![0; 4 * n], len: vec![0.0; 4 * n] }
    }

    fn covered(&self) -> f64 {
        self.len[1]
    }

    fn update(&mut self, a: f64, b: f64, delta: i32) {
        let lo = self.xs.partition_point(|&x| x < a);
        let hi = self.xs.partition_point(|&x| x < b);
        if lo < hi {
            let n = self.xs.len() - 1;
            self.apply(1, 0, n, lo, hi, delta);
        }
    }

    // node covers elementary intervals [l, r)
    fn apply(&mut self, node: usize, l: usize, r: usize, lo: usize, hi: usize, delta: i32) {
        if hi <= l || r <= lo {
            return;
        }
        if lo <= l && r <= hi {
            self.count[node] += delta;
        } else {
            let mid = (l + r) / 2;
            self.apply(2 * node, l, mid, lo, hi, delta);
            self.apply(2 * node + 1, mid, r, lo, hi, delta);
        }
        self.len[node] = if self.count[node] > 0 {
            self.xs[r] - self.xs[l]
        } else if r - l == 1 {
            0.0
        } else {
            self.len[2 * node] + self.len[2 * node + 1]
        };
    }
}

/// Two copies of a surface glued along their boundaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DoubledSurfaceDescriptor {
    /// From the cone angles through Gauss-Bonnet.
    pub genus: usize,
    /// Number of boundary curves minus one.
    pub genus_from_boundaries: usize,
    pub area: f64,
    pub singular_points: Vec<SingularPoint>,
}

pub fn double(surface: &FlatSurface) -> DoubledSurfaceDescriptor {
    // closed flat surface: sum of (2 pi - angle) = 2 pi chi
    let excess: f64 = surface.singular_points.iter().map(|p| 2.0 * (p.cone_angle - 2.0 * PI)).sum();
    let chi = (-excess / (2.0 * PI)).round() as i64;
    let genus = ((2 - chi) / 2).max(0) as usize;
    let singular_points = surface.singular_points.iter().flat_map(|p| [p.clone(), p.clone()]).collect();
    DoubledSurfaceDescriptor { genus, genus_from_boundaries: surface.m.saturating_sub(1), area: 2.0 * surface.area, singular_points }
}
