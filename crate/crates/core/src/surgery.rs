use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::level::{self, LevelCurve, LevelPoint};
use crate::network::PlanarComplex;
use crate::solver::HarmonicField;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VertexOrigin {
    Parent(usize),
    /// Where a cut curve crosses a parent edge; `t` from its smaller endpoint.
    TypeI {
        edge: usize,
        t: f64,
    },
    /// Midpoint inserted between two on-level points of one parent edge.
    TypeII {
        edge: usize,
        t: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeOrigin {
    Parent(usize),
    /// Part of a parent edge; `upper` is true for the part at higher values.
    Split {
        edge: usize,
        upper: bool,
    },
    /// Segment of the cut curve, conductance zero.
    Arc,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryLabel {
    /// The parent's outer cycle.
    Outer,
    /// The parent's inner cycle with this index.
    Inner(usize),
    /// Cycle of the cut curve with this index in `LevelCurve::cycles()` order.
    Level(usize),
}

/// One side of a cut: a sub-complex with modified conductances, provenance
/// into the parent, and the restricted field.
#[derive(Clone, Debug)]
pub struct CutPiece {
    pub complex: PlanarComplex,
    pub field: HarmonicField,
    pub vertex_origin: Vec<VertexOrigin>,
    pub edge_origin: Vec<EdgeOrigin>,
    /// Label of each boundary cycle, outer first.
    pub boundary: Vec<BoundaryLabel>,
}

#[derive(Clone, Debug)]
pub struct CutResult {
    pub level: f64,
    /// Everything above the curve.
    pub exterior: CutPiece,
    /// One piece per cycle of the curve, in `LevelCurve::cycles()` order.
    pub interiors: Vec<CutPiece>,
}

/// Conductance of the part (p, q) of a parent edge with flux `flux`.
fn split_conductance(flux: f64, gp: f64, gq: f64) -> f64 {
    flux / (gp - gq).abs()
}

struct Ext<'a> {
    parent: &'a PlanarComplex,
    coords: Vec<Point>,
    values: Vec<f64>,
    origin: Vec<VertexOrigin>,
}

pub fn cut_along(complex: &PlanarComplex, field: &HarmonicField, curve: &LevelCurve) -> Result<CutResult> {
    let h = curve.value;
    let n = complex.num_vertices();
    let g = &field.values;
    let eps = level::SNAP * field.span();

    for (e, &[a, b]) in complex.edges().iter().enumerate() {
        if complex.conductance[e] > 0.0 && (g[a] - h).abs() <= eps && (g[b] - h).abs() <= eps {
            return Err(Error::degenerate_edges(complex, vec![e]));
        }
    }

    // type I vertices, ordered by (edge, t)
    let mut crossings: Vec<(usize, f64)> = curve
        .cycles()
        .flat_map(|c| c.points.iter())
        .filter_map(|p| match *p {
            LevelPoint::Edge { edge, t } => Some((edge, t)),
            LevelPoint::Vertex(_) => None,
        })
        .collect();
    crossings.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    crossings.dedup_by_key(|c| c.0);
    let mut ext =
        Ext { parent: complex, coords: complex.coords.clone(), values: g.clone(), origin: (0..n).map(VertexOrigin::Parent).collect() };
    let mut type_i: HashMap<usize, usize> = HashMap::new();
    for &(edge, t) in &crossings {
        type_i.insert(edge, ext.coords.len());
        ext.coords.push(LevelPoint::Edge { edge, t }.coords(complex));
        ext.values.push(h);
        ext.origin.push(VertexOrigin::TypeI { edge, t });
    }
    let ext_id = |p: &LevelPoint| match *p {
        LevelPoint::Vertex(v) => v,
        LevelPoint::Edge { edge, .. } => type_i[&edge],
    };

    // arcs of the curve, per face, and which cycle each arc belongs to
    let cycles: Vec<Vec<usize>> = curve.cycles().map(|c| c.points.iter().map(ext_id).collect()).collect();
    let mut chords: HashMap<usize, Vec<[usize; 2]>> = HashMap::new();
    let mut arc_cycle: HashMap<(usize, usize), usize> = HashMap::new();
    for (ci, c) in curve.cycles().enumerate() {
        let ids = &cycles[ci];
        if ids.len() < 3 {
            return Err(Error::Unsupported(format!("level cycle with {} points", ids.len())));
        }
        for i in 0..ids.len() {
            let (p, q) = (ids[i], ids[(i + 1) % ids.len()]);
            if arc_cycle.insert(key(p, q), ci).is_some() {
                return Err(Error::Unsupported(format!("two arcs join vertices {p} and {q}")));
            }
            chords.entry(c.faces[i]).or_default().push([p, q]);
        }
    }

    // split faces and sort the parts by side
    let mut above: Vec<Vec<usize>> = Vec::new();
    let mut below: Vec<Vec<usize>> = Vec::new();
    for (fi, face) in complex.faces().iter().enumerate() {
        let k = face.len();
        let mut ring = Vec::with_capacity(2 * k);
        let mut crossed = false;
        for i in 0..k {
            ring.push(face[i]);
            if let Some(e) = complex.edge_id(face[i], face[(i + 1) % k]) {
                if let Some(&x) = type_i.get(&e) {
                    ring.push(x);
                    crossed = true;
                }
            }
        }
        let parts = match chords.get(&fi) {
            Some(ch) => split_polygon(&ring, ch, &ext.coords)?,
            None if crossed => return Err(Error::Consistency(format!("face {fi} is crossed but carries no arc"))),
            None => vec![ring],
        };
        for part in parts {
            let hi = part.iter().any(|&v| ext.values[v] > h + eps);
            let lo = part.iter().any(|&v| ext.values[v] < h - eps);
            match (hi, lo) {
                (true, false) => above.push(part),
                (false, true) => below.push(part),
                _ => return Err(Error::Consistency(format!("part of face {fi} is on both sides of level {h}"))),
            }
        }
    }

    // group the lower parts by cycle
    let groups = connected_parts(&below, &arc_cycle);
    let mut by_cycle: Vec<Option<Vec<Vec<usize>>>> = vec![None; cycles.len()];
    for grp in groups {
        let parts: Vec<Vec<usize>> = grp.into_iter().map(|i| below[i].clone()).collect();
        let ci = parts
            .iter()
            .flat_map(|p| (0..p.len()).map(move |i| key(p[i], p[(i + 1) % p.len()])))
            .find_map(|k| arc_cycle.get(&k).copied())
            .ok_or_else(|| Error::Consistency("a region below the level touches no arc".into()))?;
        if by_cycle[ci].is_some() {
            return Err(Error::Consistency(format!("cycle {ci} bounds two regions below the level")));
        }
        by_cycle[ci] = Some(parts);
    }

    // parent boundary cycles go with the side that holds their edges
    let mut side_of_edge: HashMap<(usize, usize), Option<usize>> = HashMap::new();
    for p in &above {
        for i in 0..p.len() {
            side_of_edge.insert(key(p[i], p[(i + 1) % p.len()]), None);
        }
    }
    for (ci, parts) in by_cycle.iter().enumerate() {
        for p in parts.iter().flatten() {
            for i in 0..p.len() {
                side_of_edge.insert(key(p[i], p[(i + 1) % p.len()]), Some(ci));
            }
        }
    }
    let parent_cycles: Vec<(BoundaryLabel, &Vec<usize>)> =
        complex.inner().iter().enumerate().map(|(i, c)| (BoundaryLabel::Inner(i), c)).collect();
    let mut ext_bounds: Vec<(BoundaryLabel, Vec<usize>)> = Vec::new();
    let mut int_bounds: Vec<Vec<(BoundaryLabel, Vec<usize>)>> = vec![Vec::new(); cycles.len()];
    for (ci, c) in cycles.iter().enumerate() {
        let mut rev = c.clone();
        rev.reverse();
        ext_bounds.push((BoundaryLabel::Level(ci), rev));
        int_bounds[ci].push((BoundaryLabel::Level(ci), c.clone()));
    }
    let side_of = |cyc: &[usize]| {
        side_of_edge.get(&key(cyc[0], cyc[1])).copied().ok_or_else(|| Error::Consistency("parent boundary edge lost in cut".into()))
    };
    if side_of(complex.outer())?.is_some() {
        return Err(Error::Consistency("outer boundary lies below the cut level".into()));
    }
    for (label, cyc) in parent_cycles {
        match side_of(cyc)? {
            None => ext_bounds.push((label, cyc.clone())),
            Some(ci) => int_bounds[ci].push((label, cyc.clone())),
        }
    }
    let mut ext_all = vec![(BoundaryLabel::Outer, complex.outer().to_vec())];
    ext_all.extend(ext_bounds);

    let exterior = build_piece(&ext, &above, &ext_all, &arc_cycle, &type_i, field.top, h)?;
    let mut interiors = Vec::with_capacity(cycles.len());
    for (ci, parts) in by_cycle.into_iter().enumerate() {
        let parts = parts.ok_or_else(|| Error::Consistency(format!("no region below cycle {ci}")))?;
        interiors.push(build_piece(&ext, &parts, &int_bounds[ci], &arc_cycle, &type_i, h, field.bottom)?);
    }
    Ok(CutResult { level: h, exterior, interiors })
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Faces of the planar graph made of a polygon and non-crossing chords.
fn split_polygon(ring: &[usize], chords: &[[usize; 2]], coords: &[Point]) -> Result<Vec<Vec<usize>>> {
    let k = ring.len();
    let mut out_edges: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut add = |a: usize, b: usize| {
        out_edges.entry(a).or_default().push(b);
        out_edges.entry(b).or_default().push(a);
    };
    for i in 0..k {
        add(ring[i], ring[(i + 1) % k]);
    }
    for &[a, b] in chords {
        if !ring.contains(&a) || !ring.contains(&b) {
            return Err(Error::Consistency(format!("arc ({a},{b}) leaves its face")));
        }
        add(a, b);
    }
    let ang = |from: usize, to: usize| {
        let d = geometry::sub(coords[to], coords[from]);
        d[1].atan2(d[0])
    };
    for (&v, list) in out_edges.iter_mut() {
        list.sort_by(|&a, &b| ang(v, a).total_cmp(&ang(v, b)));
        list.dedup();
    }
    let mut used: HashSet<(usize, usize)> = HashSet::new();
    let mut faces = Vec::new();
    let mut starts: Vec<(usize, usize)> = out_edges.iter().flat_map(|(&a, l)| l.iter().map(move |&b| (a, b))).collect();
    starts.sort_unstable();
    for (a0, b0) in starts {
        if used.contains(&(a0, b0)) {
            continue;
        }
        let mut poly = Vec::new();
        let (mut a, mut b) = (a0, b0);
        loop {
            if !used.insert((a, b)) {
                return Err(Error::Consistency("face walk did not close".into()));
            }
            poly.push(a);
            // next edge: clockwise neighbor of the reverse edge at b
            let list = &out_edges[&b];
            let i = list.iter().position(|&x| x == a).unwrap();
            let c = list[(i + list.len() - 1) % list.len()];
            a = b;
            b = c;
            if (a, b) == (a0, b0) {
                break;
            }
        }
        let pts: Vec<Point> = poly.iter().map(|&v| coords[v]).collect();
        if geometry::signed_area(&pts) > 0.0 {
            faces.push(poly);
        }
    }
    Ok(faces)
}

/// Groups of parts connected through shared sides other than arcs.
fn connected_parts(parts: &[Vec<usize>], arcs: &HashMap<(usize, usize), usize>) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..parts.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut y = x;
        while p[y] != r {
            let nx = p[y];
            p[y] = r;
            y = nx;
        }
        r
    }
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (pi, p) in parts.iter().enumerate() {
        for i in 0..p.len() {
            let kk = key(p[i], p[(i + 1) % p.len()]);
            if arcs.contains_key(&kk) {
                continue;
            }
            if let Some(&o) = owner.get(&kk) {
                let (ra, rb) = (find(&mut parent, o), find(&mut parent, pi));
                parent[ra.max(rb)] = ra.min(rb);
            } else {
                owner.insert(kk, pi);
            }
        }
    }
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut idx: HashMap<usize, usize> = HashMap::new();
    for pi in 0..parts.len() {
        let r = find(&mut parent, pi);
        let gi = *idx.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[gi].push(pi);
    }
    groups
}

fn build_piece(
    ext: &Ext,
    faces: &[Vec<usize>],
    bounds: &[(BoundaryLabel, Vec<usize>)],
    arcs: &HashMap<(usize, usize), usize>,
    type_i: &HashMap<usize, usize>,
    top: f64,
    bottom: f64,
) -> Result<CutPiece> {
    let parent = ext.parent;
    let mut verts: Vec<usize> = faces.iter().flatten().copied().collect();
    verts.sort_unstable();
    verts.dedup();
    let mut new_id: HashMap<usize, usize> = HashMap::with_capacity(verts.len());
    for (i, &v) in verts.iter().enumerate() {
        new_id.insert(v, i);
    }
    let map = |v: usize| new_id[&v];

    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for f in faces {
        for i in 0..f.len() {
            pairs.push(key(f[i], f[(i + 1) % f.len()]));
        }
    }
    pairs.sort_unstable_by_key(|&(a, b)| key(map(a), map(b)));
    pairs.dedup();

    let edge_of_type_i: HashMap<usize, usize> = type_i.iter().map(|(&e, &x)| (x, e)).collect();
    let mut edges = Vec::with_capacity(pairs.len());
    let mut cond = Vec::with_capacity(pairs.len());
    let mut origin = Vec::with_capacity(pairs.len());
    for &(a, b) in &pairs {
        let (c, o) = if arcs.contains_key(&(a, b)) {
            (0.0, EdgeOrigin::Arc)
        } else if let Some((x, other)) = edge_of_type_i.get(&a).map(|_| (a, b)).or(edge_of_type_i.get(&b).map(|_| (b, a))) {
            let e = edge_of_type_i[&x];
            let [p, q] = parent.edges()[e];
            if other != p && other != q {
                return Err(Error::Consistency(format!("side ({a},{b}) is not part of edge {e}")));
            }
            let flux = parent.conductance[e] * (ext.values[p] - ext.values[q]).abs();
            let upper = ext.values[other] > ext.values[x];
            (split_conductance(flux, ext.values[other], ext.values[x]), EdgeOrigin::Split { edge: e, upper })
        } else {
            let e = parent.edge_id(a, b).ok_or_else(|| Error::Consistency(format!("side ({a},{b}) is not a parent edge")))?;
            (parent.conductance[e], EdgeOrigin::Parent(e))
        };
        edges.push([map(a), map(b)]);
        cond.push(c);
        origin.push(o);
    }

    let new_faces: Vec<Vec<usize>> = faces.iter().map(|f| f.iter().map(|&v| map(v)).collect()).collect();
    let cyc = |c: &Vec<usize>| -> Result<Vec<usize>> {
        c.iter().map(|v| new_id.get(v).copied().ok_or_else(|| Error::Consistency(format!("boundary vertex {v} not in piece")))).collect()
    };
    let outer = cyc(&bounds[0].1)?;
    let inner = bounds[1..].iter().map(|b| cyc(&b.1)).collect::<Result<Vec<_>>>()?;
    let coords = verts.iter().map(|&v| ext.coords[v]).collect();
    let values = verts.iter().map(|&v| ext.values[v]).collect();
    let vertex_origin = verts.iter().map(|&v| ext.origin[v]).collect();
    let complex = PlanarComplex::new(coords, edges, new_faces, outer, inner, cond)?;
    Ok(CutPiece {
        complex,
        field: HarmonicField::from_values(values, top, bottom),
        vertex_origin,
        edge_origin: origin,
        boundary: bounds.iter().map(|b| b.0).collect(),
    })
}

/// Flux-gradient lengths of a level curve measured from the region below it
/// and from the region above it, each through the cut pieces.
pub fn two_sided_length(complex: &PlanarComplex, field: &HarmonicField, curve: &LevelCurve) -> Result<(f64, f64)> {
    if curve.num_cycles() == 0 {
        return Ok((0.0, 0.0));
    }
    let cut = cut_along(complex, field, curve)?;
    Ok((interior_length(&cut), exterior_length(&cut)))
}

fn piece_level_flux(piece: &CutPiece, vertices: &[usize]) -> f64 {
    let c = &piece.complex;
    let g = &piece.field.values;
    let mut vs = vertices.to_vec();
    vs.sort_unstable();
    vs.dedup();
    vs.iter().map(|&x| c.neighbors(x).iter().map(|&(y, e)| c.conductance[e] * (g[x] - g[y])).sum::<f64>()).sum()
}

/// Sum over the cut cycles of the flux leaving each one into its interior piece.
pub fn interior_length(cut: &CutResult) -> f64 {
    cut.interiors.iter().map(|p| piece_level_flux(p, p.complex.outer()).abs()).sum()
}

/// Flux arriving at the cut curve from the exterior piece.
pub fn exterior_length(cut: &CutResult) -> f64 {
    let p = &cut.exterior;
    let on_level: Vec<usize> = p
        .boundary
        .iter()
        .zip(p.complex.boundary_cycles())
        .filter(|(l, _)| matches!(l, BoundaryLabel::Level(_)))
        .flat_map(|(_, c)| c.iter().copied())
        .collect();
    piece_level_flux(p, &on_level).abs()
}

/// A complex refined along a set of levels.
#[derive(Clone, Debug)]
pub struct Refined {
    pub complex: PlanarComplex,
    pub field: HarmonicField,
    pub vertex_origin: Vec<VertexOrigin>,
    pub edge_origin: Vec<EdgeOrigin>,
}

/// Subdivides edges where the given levels cross them, and puts a midpoint
/// between any two consecutive on-level points of one edge, so distinct
/// level curves never share an edge.
pub fn ensure_separation(complex: &PlanarComplex, field: &HarmonicField, levels: &[f64]) -> Result<Refined> {
    let g = &field.values;
    let eps = level::SNAP * field.span();
    let on_level = |x: f64| levels.iter().any(|&h| (x - h).abs() <= eps);
    let n = complex.num_vertices();

    let mut coords = complex.coords.clone();
    let mut values = g.clone();
    let mut vorigin: Vec<VertexOrigin> = (0..n).map(VertexOrigin::Parent).collect();
    // per edge: inserted vertices in order from the smaller endpoint
    let mut inserted: Vec<Vec<usize>> = vec![Vec::new(); complex.edges().len()];
    let mut flat = Vec::new();

    for (e, &edge) in complex.edges().iter().enumerate() {
        let [a, b] = level::ordered(edge);
        let (ga, gb) = (g[a], g[b]);
        if complex.conductance[e] > 0.0 && on_level(ga) && on_level(gb) && !(complex.is_boundary(a) && complex.is_boundary(b)) {
            flat.push(e);
            continue;
        }
        // (t, is level crossing)
        let mut marks: Vec<(f64, bool)> = Vec::new();
        if on_level(ga) {
            marks.push((0.0, false));
        }
        if on_level(gb) {
            marks.push((1.0, false));
        }
        for &h in levels {
            if (ga - h).abs() > eps && (gb - h).abs() > eps && (ga - h) * (gb - h) < 0.0 {
                marks.push(((h - ga) / (gb - ga), true));
            }
        }
        marks.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut pts: Vec<(f64, bool)> = Vec::new();
        for (i, &(t, crossing)) in marks.iter().enumerate() {
            if i > 0 {
                let tm = 0.5 * (marks[i - 1].0 + t);
                pts.push((tm, false));
                push_vertex(&mut coords, &mut values, &mut vorigin, complex, e, tm, VertexKind::II, &mut inserted, ga, gb, a, b);
            }
            if crossing {
                pts.push((t, true));
                push_vertex(&mut coords, &mut values, &mut vorigin, complex, e, t, VertexKind::I, &mut inserted, ga, gb, a, b);
            }
        }
    }
    if !flat.is_empty() {
        return Err(Error::degenerate_edges(complex, flat));
    }
    if inserted.iter().all(|v| v.is_empty()) {
        return Ok(Refined {
            complex: complex.clone(),
            field: field.clone(),
            vertex_origin: vorigin,
            edge_origin: (0..complex.edges().len()).map(EdgeOrigin::Parent).collect(),
        });
    }

    let mut edges = Vec::new();
    let mut cond = Vec::new();
    let mut eorigin = Vec::new();
    for (e, &edge) in complex.edges().iter().enumerate() {
        let [a, b] = level::ordered(edge);
        if inserted[e].is_empty() {
            edges.push(edge);
            cond.push(complex.conductance[e]);
            eorigin.push(EdgeOrigin::Parent(e));
            continue;
        }
        let chain: Vec<usize> = std::iter::once(a).chain(inserted[e].iter().copied()).chain(std::iter::once(b)).collect();
        let flux = complex.conductance[e] * (g[a] - g[b]).abs();
        for w in chain.windows(2) {
            edges.push([w[0], w[1]]);
            cond.push(split_conductance(flux, values[w[0]], values[w[1]]));
            // upper: the part touching the higher parent endpoint
            let hi_end = if g[a] > g[b] { a } else { b };
            eorigin.push(EdgeOrigin::Split { edge: e, upper: w.contains(&hi_end) });
        }
    }
    let faces: Vec<Vec<usize>> = complex
        .faces()
        .iter()
        .map(|f| {
            let k = f.len();
            let mut out = Vec::new();
            for i in 0..k {
                let (p, q) = (f[i], f[(i + 1) % k]);
                out.push(p);
                if let Some(e) = complex.edge_id(p, q) {
                    let mids = &inserted[e];
                    if p < q {
                        out.extend(mids.iter().copied());
                    } else {
                        out.extend(mids.iter().rev().copied());
                    }
                }
            }
            out
        })
        .collect();
    let refined = PlanarComplex::new(coords, edges, faces, complex.outer().to_vec(), complex.inner().to_vec(), cond)?;
    Ok(Refined { complex: refined, field: HarmonicField { values, ..field.clone() }, vertex_origin: vorigin, edge_origin: eorigin })
}

#[derive(Clone, Copy)]
enum VertexKind {
    I,
    II,
}

#[allow(clippy::too_many_arguments)]
fn push_vertex(
    coords: &mut Vec<Point>,
    values: &mut Vec<f64>,
    origin: &mut Vec<VertexOrigin>,
    complex: &PlanarComplex,
    e: usize,
    t: f64,
    kind: VertexKind,
    inserted: &mut [Vec<usize>],
    ga: f64,
    gb: f64,
    a: usize,
    b: usize,
) {
    let id = coords.len();
    coords.push(geometry::lerp(complex.coords[a], complex.coords[b], t));
    values.push(ga + t * (gb - ga));
    origin.push(match kind {
        VertexKind::I => VertexOrigin::TypeI { edge: e, t },
        VertexKind::II => VertexOrigin::TypeII { edge: e, t },
    });
    inserted[e].push(id);
}
