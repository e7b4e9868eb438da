use std::collections::HashMap;
use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::network::PlanarComplex;
use crate::solver::HarmonicField;

/// Vertices within this fraction of the boundary span from a level are on it.
pub const SNAP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelPoint {
    Vertex(usize),
    /// `t` is measured from the endpoint with the smaller id.
    Edge {
        edge: usize,
        t: f64,
    },
}

impl LevelPoint {
    pub fn coords(&self, complex: &PlanarComplex) -> Point {
        match *self {
            LevelPoint::Vertex(v) => complex.coords[v],
            LevelPoint::Edge { edge, t } => {
                let [a, b] = ordered(complex.edges()[edge]);
                geometry::lerp(complex.coords[a], complex.coords[b], t)
            }
        }
    }

    pub fn vertex(&self) -> Option<usize> {
        match *self {
            LevelPoint::Vertex(v) => Some(v),
            LevelPoint::Edge { .. } => None,
        }
    }

    fn sort_key(&self) -> (u8, usize, f64) {
        match *self {
            LevelPoint::Vertex(v) => (0, v, 0.0),
            LevelPoint::Edge { edge, t } => (1, edge, t),
        }
    }
}

pub(crate) fn ordered([a, b]: [usize; 2]) -> [usize; 2] {
    if a < b {
        [a, b]
    } else {
        [b, a]
    }
}

/// One closed simple polyline of a level set, counterclockwise, so values
/// below the level are on its left.
#[derive(Clone, Debug)]
pub struct LevelCycle {
    pub points: Vec<LevelPoint>,
    /// `faces[i]` contains the piece of the curve from `points[i]` to `points[i + 1]`.
    pub faces: Vec<usize>,
    /// Full polyline including bends where the curve crosses face diagonals.
    pub path: Vec<Point>,
    /// Index into `path` of each entry of `points`.
    pub path_index: Vec<usize>,
}

impl LevelCycle {
    pub fn contains(&self, p: Point) -> bool {
        geometry::point_in_polygon(p, &self.path)
    }

    pub fn signed_area(&self) -> f64 {
        geometry::signed_area(&self.path)
    }
}

/// A generalized bouquet: simple cycles meeting pairwise in at most one vertex.
#[derive(Clone, Debug)]
pub struct Component {
    pub cycles: Vec<LevelCycle>,
    pub tangencies: Vec<usize>,
}

impl Component {
    pub fn encloses(&self, p: Point) -> bool {
        self.cycles.iter().any(|c| c.contains(p))
    }
}

#[derive(Clone, Debug)]
pub struct LevelCurve {
    pub value: f64,
    pub components: Vec<Component>,
    pub singular_vertices: Vec<(usize, i64)>,
}

impl LevelCurve {
    pub fn cycles(&self) -> impl Iterator<Item = &LevelCycle> {
        self.components.iter().flat_map(|c| c.cycles.iter())
    }

    pub fn num_cycles(&self) -> usize {
        self.components.iter().map(|c| c.cycles.len()).sum()
    }

    pub fn is_simple(&self) -> bool {
        self.components.iter().all(|c| c.cycles.len() == 1) && self.singular_vertices.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LevelOptions {
    /// Admit edges whose endpoints both lie on the level.
    pub allow_flat_edges: bool,
}

fn tol(field: &HarmonicField) -> f64 {
    SNAP * field.span()
}

/// Number of sign alternations in a cyclic sequence of nonzero numbers.
pub fn cyclic_sign_changes(diffs: &[f64]) -> usize {
    let n = diffs.len();
    (0..n).filter(|&i| (diffs[i] > 0.0) != (diffs[(i + 1) % n] > 0.0)).count()
}

fn rotation(complex: &PlanarComplex, v: usize) -> Result<&[usize]> {
    let fan = complex.fan(v);
    if !fan.closed || fan.chains.len() != 1 {
        return Err(Error::NotApplicable(format!("vertex {v} is not an interior vertex")));
    }
    Ok(&fan.chains[0])
}

/// Sign changes of g(w) - g(v) around an interior vertex, neighbors taken in
/// rotational order.
pub fn sign_changes(field: &HarmonicField, complex: &PlanarComplex, v: usize) -> Result<usize> {
    if v >= complex.num_vertices() {
        return Err(Error::UnknownVertex(v));
    }
    let rot = rotation(complex, v)?;
    let eps = tol(field);
    let mut diffs = Vec::with_capacity(rot.len());
    let mut flat = Vec::new();
    for &w in rot {
        let d = field.values[w] - field.values[v];
        if d.abs() <= eps {
            flat.extend(complex.edge_id(v, w));
        }
        diffs.push(d);
    }
    if !flat.is_empty() {
        return Err(Error::degenerate_edges(complex, flat));
    }
    Ok(cyclic_sign_changes(&diffs))
}

pub fn index_from_sgc(sgc: usize) -> i64 {
    1 - (sgc / 2) as i64
}

pub fn index(field: &HarmonicField, complex: &PlanarComplex, v: usize) -> Result<i64> {
    sign_changes(field, complex, v).map(index_from_sgc)
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexEntry {
    pub vertex: usize,
    pub sgc: usize,
    pub index: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexReport {
    /// Every interior vertex.
    pub entries: Vec<IndexEntry>,
    pub sum: i64,
    pub chi: i64,
    pub holds: bool,
}

impl IndexReport {
    pub fn singular(&self) -> impl Iterator<Item = &IndexEntry> {
        self.entries.iter().filter(|e| e.index != 0)
    }
}

/// Edges with a conducting edge whose endpoints share a value, ignoring edges
/// between two boundary vertices.
pub fn flat_edges(field: &HarmonicField, complex: &PlanarComplex) -> Vec<usize> {
    let eps = tol(field);
    complex
        .edges()
        .iter()
        .enumerate()
        .filter(|&(e, &[a, b])| {
            complex.conductance[e] > 0.0
                && !(complex.is_boundary(a) && complex.is_boundary(b))
                && (field.values[a] - field.values[b]).abs() <= eps
        })
        .map(|(e, _)| e)
        .collect()
}

pub fn check_generic(field: &HarmonicField, complex: &PlanarComplex) -> Result<()> {
    let flat = flat_edges(field, complex);
    if flat.is_empty() {
        Ok(())
    } else {
        Err(Error::degenerate_edges(complex, flat))
    }
}

/// Index of every interior vertex and the comparison of their sum with the
/// Euler characteristic.
pub fn index_formula_check(field: &HarmonicField, complex: &PlanarComplex) -> Result<IndexReport> {
    check_generic(field, complex)?;
    let mut entries = Vec::new();
    for v in complex.interior_vertices() {
        let sgc = sign_changes(field, complex, v)?;
        entries.push(IndexEntry { vertex: v, sgc, index: index_from_sgc(sgc) });
    }
    let sum = entries.iter().map(|e| e.index).sum();
    let chi = complex.euler_characteristic();
    Ok(IndexReport { entries, sum, chi, holds: sum == chi && chi == 2 - complex.m() as i64 })
}

/// Boundary values and the values of interior singular vertices, in
/// decreasing order.
pub fn critical_values(field: &HarmonicField, complex: &PlanarComplex) -> Result<Vec<f64>> {
    let report = index_formula_check(field, complex)?;
    let mut vals: Vec<f64> = report.singular().map(|e| field.values[e.vertex]).collect();
    vals.push(field.top);
    vals.push(field.bottom);
    vals.sort_by(|a, b| b.total_cmp(a));
    let eps = tol(field);
    vals.dedup_by(|a, b| (*a - *b).abs() <= eps);
    Ok(vals)
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Node {
    V(usize),
    E(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum FacePt {
    Real(Node),
    Diag(usize),
}

struct Seg {
    a: FacePt,
    b: FacePt,
    tri: usize,
}

/// Level curve piece inside one face between two real points.
struct Link {
    ends: [Node; 2],
    face: usize,
    shape: Vec<Point>,
    /// For vertex ends: (sign on the clockwise side, sign on the counterclockwise side).
    sides: [(i8, i8); 2],
    flat: bool,
}

struct Tracer<'a> {
    complex: &'a PlanarComplex,
    values: &'a [f64],
    h: f64,
    sign: Vec<i8>,
}

impl<'a> Tracer<'a> {
    fn crossing(&self, a: usize, b: usize) -> Point {
        let [lo, hi] = ordered([a, b]);
        let t = (self.h - self.values[lo]) / (self.values[hi] - self.values[lo]);
        geometry::lerp(self.complex.coords[lo], self.complex.coords[hi], t)
    }

    fn node_point(&self, n: Node) -> Point {
        match n {
            Node::V(v) => self.complex.coords[v],
            Node::E(e) => {
                let [a, b] = self.complex.edges()[e];
                self.crossing(a, b)
            }
        }
    }

    fn level_point(&self, n: Node) -> LevelPoint {
        match n {
            Node::V(v) => LevelPoint::Vertex(v),
            Node::E(e) => {
                let [a, b] = ordered(self.complex.edges()[e]);
                LevelPoint::Edge { edge: e, t: (self.h - self.values[a]) / (self.values[b] - self.values[a]) }
            }
        }
    }
}

/// Fan triangles of a face from its smallest vertex: (corner vertices, side kinds)
/// where a side is `Ok(edge id)` for a real edge or `Err(j)` for the diagonal to v_j.
fn fan_triangles(complex: &PlanarComplex, face: &[usize]) -> Result<(Vec<usize>, Vec<[usize; 3]>)> {
    let n = face.len();
    let start = (0..n).min_by_key(|&i| face[i]).unwrap_or(0);
    let vs: Vec<usize> = (0..n).map(|i| face[(start + i) % n]).collect();
    for i in 0..n {
        if complex.edge_id(vs[i], vs[(i + 1) % n]).is_none() {
            return Err(Error::Invalid(format!("face side ({},{}) is not an edge", vs[i], vs[(i + 1) % n])));
        }
    }
    Ok((vs, (1..n - 1).map(|i| [0, i, i + 1]).collect()))
}

pub fn extract_level(field: &HarmonicField, complex: &PlanarComplex, h: f64, opts: LevelOptions) -> Result<LevelCurve> {
    let (lo, hi) = (field.top.min(field.bottom), field.top.max(field.bottom));
    if !(h > lo && h < hi) {
        return Err(Error::NotApplicable(format!("level {h} is not strictly between the boundary values")));
    }
    let eps = tol(field);
    let values = &field.values;
    let sign: Vec<i8> = values
        .iter()
        .map(|&g| {
            if (g - h).abs() <= eps {
                0
            } else if g > h {
                1
            } else {
                -1
            }
        })
        .collect();
    let tr = Tracer { complex, values, h, sign };

    let mut links: Vec<Link> = Vec::new();
    let mut flat_edge_links: HashMap<usize, usize> = HashMap::new();
    let mut flat_real = Vec::new();

    for (fi, face) in complex.faces().iter().enumerate() {
        if face.iter().all(|&v| tr.sign[v] > 0) || face.iter().all(|&v| tr.sign[v] < 0) {
            continue;
        }
        let (vs, tris) = fan_triangles(complex, face)?;
        let n = vs.len();
        let side_edge = |i: usize, j: usize| -> Option<usize> {
            // real edge between fan corners i and j, or None for a diagonal
            let adjacent = (i + 1) % n == j || (j + 1) % n == i;
            if adjacent {
                complex.edge_id(vs[i], vs[j])
            } else {
                None
            }
        };
        let mut segs: Vec<Seg> = Vec::new();
        let mut flat_diags: Vec<usize> = Vec::new();
        for (ti, tri) in tris.iter().enumerate() {
            let s: Vec<i8> = tri.iter().map(|&c| tr.sign[vs[c]]).collect();
            let zeros = s.iter().filter(|&&x| x == 0).count();
            if zeros == 3 {
                return Err(Error::degenerate_edges(complex, (0..3).filter_map(|k| side_edge(tri[k], tri[(k + 1) % 3])).collect()));
            }
            let mut pts: Vec<FacePt> = Vec::new();
            for k in 0..3 {
                if s[k] == 0 {
                    pts.push(FacePt::Real(Node::V(vs[tri[k]])));
                }
            }
            for k in 0..3 {
                let (i, j) = (tri[k], tri[(k + 1) % 3]);
                if s[k] * s[(k + 1) % 3] < 0 {
                    match side_edge(i, j) {
                        Some(e) => pts.push(FacePt::Real(Node::E(e))),
                        None => pts.push(FacePt::Diag(i.max(j))),
                    }
                }
            }
            if pts.len() != 2 {
                continue;
            }
            if zeros == 2 {
                let zs: Vec<usize> = (0..3).filter(|&k| s[k] == 0).collect();
                let (i, j) = (tri[zs[0]], tri[zs[1]]);
                let third = s.iter().copied().find(|&x| x != 0).unwrap_or(0);
                match side_edge(i, j) {
                    Some(e) => {
                        if !opts.allow_flat_edges {
                            flat_real.push(e);
                            continue;
                        }
                        let (a, b) = orient_flat(vs[i], vs[j], third);
                        let link = Link { ends: [Node::V(a), Node::V(b)], face: fi, shape: Vec::new(), sides: [(0, 0); 2], flat: true };
                        match flat_edge_links.get(&e) {
                            Some(&li) => {
                                if third < 0 {
                                    links[li] = link;
                                }
                            }
                            None => {
                                flat_edge_links.insert(e, links.len());
                                links.push(link);
                            }
                        }
                    }
                    None => {
                        let j = i.max(j);
                        if !flat_diags.contains(&j) {
                            flat_diags.push(j);
                            let (a, b) = orient_flat(vs[0], vs[j], third);
                            links.push(Link {
                                ends: [Node::V(a), Node::V(b)],
                                face: fi,
                                shape: Vec::new(),
                                sides: [(0, 0); 2],
                                flat: true,
                            });
                        }
                    }
                }
                continue;
            }
            segs.push(Seg { a: pts[0], b: pts[1], tri: ti });
        }

        // chain triangle segments through diagonal crossings
        let mut used = vec![false; segs.len()];
        let diag_point = |j: usize| tr.crossing(vs[0], vs[j]);
        for si in 0..segs.len() {
            if used[si] {
                continue;
            }
            let (start, mut cur_end) = match (segs[si].a, segs[si].b) {
                (FacePt::Real(x), other) => (x, other),
                (other, FacePt::Real(x)) => (x, other),
                _ => continue,
            };
            used[si] = true;
            let first_tri = segs[si].tri;
            let mut last_tri = first_tri;
            let mut shape = Vec::new();
            let end = loop {
                match cur_end {
                    FacePt::Real(x) => break x,
                    FacePt::Diag(j) => {
                        shape.push(diag_point(j));
                        let nxt = (0..segs.len()).find(|&k| !used[k] && (segs[k].a == cur_end || segs[k].b == cur_end));
                        let Some(k) = nxt else {
                            return Err(Error::Consistency(format!("level {h} stops on a diagonal of face {fi}")));
                        };
                        used[k] = true;
                        last_tri = segs[k].tri;
                        cur_end = if segs[k].a == cur_end { segs[k].b } else { segs[k].a };
                    }
                }
            };
            let sides_at = |node: Node, ti: usize| -> (i8, i8) {
                let Node::V(v) = node else { return (0, 0) };
                let tri = tris[ti];
                let k = (0..3).find(|&k| vs[tri[k]] == v).unwrap_or(0);
                let b = vs[tri[(k + 1) % 3]];
                let c = vs[tri[(k + 2) % 3]];
                (tr.sign[b], tr.sign[c])
            };
            links.push(Link {
                ends: [start, end],
                face: fi,
                sides: [sides_at(start, first_tri), sides_at(end, last_tri)],
                shape,
                flat: false,
            });
        }
    }
    if !flat_real.is_empty() {
        return Err(Error::degenerate_edges(complex, flat_real));
    }
    assemble(&tr, field, complex, links, opts)
}

/// Orders the ends of a flat link so that the lower side is on the left.
fn orient_flat(a: usize, b: usize, third_sign: i8) -> (usize, usize) {
    if third_sign < 0 {
        (a, b)
    } else {
        (b, a)
    }
}

fn angle(from: Point, to: Point) -> f64 {
    let d = geometry::sub(to, from);
    d[1].atan2(d[0])
}

fn assemble(tr: &Tracer, field: &HarmonicField, complex: &PlanarComplex, links: Vec<Link>, opts: LevelOptions) -> Result<LevelCurve> {
    let h = tr.h;
    // every link end at each node
    let mut at: HashMap<(u8, usize), Vec<(usize, usize)>> = HashMap::new();
    let node_key = |n: Node| match n {
        Node::V(v) => (0u8, v),
        Node::E(e) => (1u8, e),
    };
    for (li, l) in links.iter().enumerate() {
        for end in 0..2 {
            at.entry(node_key(l.ends[end])).or_default().push((li, end));
        }
    }
    let first_step = |li: usize, end: usize| -> Point {
        let l = &links[li];
        if l.shape.is_empty() {
            tr.node_point(l.ends[1 - end])
        } else if end == 0 {
            l.shape[0]
        } else {
            l.shape[l.shape.len() - 1]
        }
    };

    // partner[(link, end)] = (link, end) through which the curve continues
    let mut partner: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    let mut keys: Vec<&(u8, usize)> = at.keys().collect();
    keys.sort_unstable();
    for key in keys {
        let ends = &at[key];
        match key.0 {
            1 => {
                if ends.len() != 2 {
                    return Err(Error::Consistency(format!("level {h} meets edge {} from {} faces", key.1, ends.len())));
                }
                partner.insert(ends[0], ends[1]);
                partner.insert(ends[1], ends[0]);
            }
            _ => {
                let v = key.1;
                if ends.len() == 2 {
                    partner.insert(ends[0], ends[1]);
                    partner.insert(ends[1], ends[0]);
                    continue;
                }
                if ends.len() % 2 == 1 || ends.iter().any(|&(li, _)| links[li].flat) {
                    return Err(Error::Unsupported(format!("level {h} has {} branches at vertex {v}", ends.len())));
                }
                let origin = complex.coords[v];
                let mut sorted: Vec<(f64, (usize, usize))> =
                    ends.iter().map(|&(li, end)| (angle(origin, first_step(li, end)), (li, end))).collect();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                let k = sorted.len();
                let side = |i: usize| {
                    let (li, end) = sorted[i % k].1;
                    links[li].sides[end]
                };
                let first_below = (0..k).find(|&i| side(i).1 < 0);
                let Some(fb) = first_below else {
                    return Err(Error::Consistency(format!("no region below level {h} at vertex {v}")));
                };
                for j in 0..k / 2 {
                    let i = fb + 2 * j;
                    if side(i).1 >= 0 || side(i + 1).0 >= 0 {
                        return Err(Error::Consistency(format!("level {h} sectors at vertex {v} do not alternate")));
                    }
                    partner.insert(sorted[i % k].1, sorted[(i + 1) % k].1);
                    partner.insert(sorted[(i + 1) % k].1, sorted[i % k].1);
                }
            }
        }
    }

    // trace cycles
    let mut visited = vec![false; links.len()];
    let mut cycles: Vec<LevelCycle> = Vec::new();
    for start in 0..links.len() {
        if visited[start] {
            continue;
        }
        let mut steps: Vec<(usize, bool)> = Vec::new();
        let (mut li, mut fwd) = (start, true);
        loop {
            if visited[li] {
                if li == start {
                    break;
                }
                return Err(Error::Consistency(format!("level {h}: tracing revisited a link")));
            }
            visited[li] = true;
            steps.push((li, fwd));
            let arrive_end = if fwd { 1 } else { 0 };
            let &(nl, nend) = partner.get(&(li, arrive_end)).ok_or_else(|| Error::Consistency(format!("level {h}: open curve")))?;
            li = nl;
            fwd = nend == 0;
        }
        let mut cyc = build_cycle(tr, &links, &steps);
        if cyc.signed_area() < 0.0 {
            steps.reverse();
            for s in steps.iter_mut() {
                s.1 = !s.1;
            }
            cyc = build_cycle(tr, &links, &steps);
        }
        let mut seen = std::collections::HashSet::new();
        for p in &cyc.points {
            if let LevelPoint::Vertex(v) = p {
                if !seen.insert(*v) {
                    return Err(Error::Unsupported(format!("level {h} cycle passes vertex {v} twice")));
                }
            }
        }
        cycles.push(normalize(cyc));
    }

    // components: cycles sharing a vertex
    let nc = cycles.len();
    let mut parent: Vec<usize> = (0..nc).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        p[x] = r;
        r
    }
    let mut owner: HashMap<usize, usize> = HashMap::new();
    let mut shared: Vec<usize> = Vec::new();
    for (ci, c) in cycles.iter().enumerate() {
        for p in &c.points {
            if let LevelPoint::Vertex(v) = *p {
                if let Some(&o) = owner.get(&v) {
                    let (ra, rb) = (find(&mut parent, o), find(&mut parent, ci));
                    parent[ra] = rb;
                    shared.push(v);
                } else {
                    owner.insert(v, ci);
                }
            }
        }
    }
    shared.sort_unstable();
    shared.dedup();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut group_of: HashMap<usize, usize> = HashMap::new();
    for ci in 0..nc {
        let r = find(&mut parent, ci);
        let g = *group_of.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(ci);
    }
    let mut slots: Vec<Option<LevelCycle>> = cycles.into_iter().map(Some).collect();
    let mut components: Vec<Component> = groups
        .into_iter()
        .map(|g| {
            let mut cs: Vec<LevelCycle> = g.into_iter().map(|i| slots[i].take().unwrap()).collect();
            cs.sort_by(|a, b| cmp_key(a.points[0].sort_key(), b.points[0].sort_key()));
            let tangencies: Vec<usize> =
                shared.iter().copied().filter(|v| cs.iter().any(|c| c.points.contains(&LevelPoint::Vertex(*v)))).collect();
            Component { cycles: cs, tangencies }
        })
        .collect();
    components.sort_by(|a, b| cmp_key(a.cycles[0].points[0].sort_key(), b.cycles[0].points[0].sort_key()));

    let mut singular_vertices = Vec::new();
    let mut on_level: Vec<usize> =
        components.iter().flat_map(|c| c.cycles.iter()).flat_map(|c| c.points.iter().filter_map(|p| p.vertex())).collect();
    on_level.sort_unstable();
    on_level.dedup();
    for v in on_level {
        if complex.is_boundary(v) {
            continue;
        }
        match index(field, complex, v) {
            Ok(0) => {}
            Ok(i) => singular_vertices.push((v, i)),
            Err(Error::Degenerate { .. }) if opts.allow_flat_edges => {}
            Err(e) => return Err(e),
        }
    }
    Ok(LevelCurve { value: h, components, singular_vertices })
}

fn cmp_key(a: (u8, usize, f64), b: (u8, usize, f64)) -> std::cmp::Ordering {
    a.0.cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.total_cmp(&b.2))
}

fn build_cycle(tr: &Tracer, links: &[Link], steps: &[(usize, bool)]) -> LevelCycle {
    let mut points = Vec::with_capacity(steps.len());
    let mut faces = Vec::with_capacity(steps.len());
    let mut path = Vec::new();
    let mut path_index = Vec::with_capacity(steps.len());
    for &(li, fwd) in steps {
        let l = &links[li];
        let from = if fwd { l.ends[0] } else { l.ends[1] };
        points.push(tr.level_point(from));
        faces.push(l.face);
        path_index.push(path.len());
        path.push(tr.node_point(from));
        if fwd {
            path.extend(l.shape.iter().copied());
        } else {
            path.extend(l.shape.iter().rev().copied());
        }
    }
    LevelCycle { points, faces, path, path_index }
}

/// Rotates a cycle to start at its smallest point.
fn normalize(c: LevelCycle) -> LevelCycle {
    let n = c.points.len();
    let s = (0..n).min_by(|&i, &j| cmp_key(c.points[i].sort_key(), c.points[j].sort_key())).unwrap_or(0);
    let points = (0..n).map(|i| c.points[(s + i) % n]).collect();
    let faces = (0..n).map(|i| c.faces[(s + i) % n]).collect();
    let off = c.path_index[s];
    let m = c.path.len();
    let path = (0..m).map(|i| c.path[(off + i) % m]).collect();
    let path_index = (0..n).map(|i| (c.path_index[(s + i) % n] + m - off) % m).collect();
    LevelCycle { points, faces, path, path_index }
}

/// Flux-gradient length of one cycle seen from its lower side: crossing
/// edges contribute their flux, vertices on the cycle the flux of their
/// downward edges inside the cycle.
pub fn cycle_length(field: &HarmonicField, complex: &PlanarComplex, cycle: &LevelCycle) -> f64 {
    let g = &field.values;
    let m = cycle.path.len();
    let mut total = 0.0;
    for (i, p) in cycle.points.iter().enumerate() {
        match *p {
            LevelPoint::Edge { edge, .. } => {
                let [a, b] = complex.edges()[edge];
                total += complex.conductance[edge] * (g[a] - g[b]).abs();
            }
            LevelPoint::Vertex(v) => {
                let at = cycle.path[cycle.path_index[i]];
                let next = cycle.path[(cycle.path_index[i] + 1) % m];
                let prev = cycle.path[(cycle.path_index[i] + m - 1) % m];
                let a_out = angle(at, next);
                let width = (angle(at, prev) - a_out).rem_euclid(TAU);
                for &(w, e) in complex.neighbors(v) {
                    if g[w] < g[v] && complex.conductance[e] > 0.0 {
                        let rel = (angle(at, complex.coords[w]) - a_out).rem_euclid(TAU);
                        if rel < width {
                            total += complex.conductance[e] * (g[v] - g[w]);
                        }
                    }
                }
            }
        }
    }
    total
}

/// Total length of a level curve seen from below.
pub fn level_length(field: &HarmonicField, complex: &PlanarComplex, curve: &LevelCurve) -> f64 {
    curve.cycles().map(|c| cycle_length(field, complex, c)).sum()
}

/// Total length of a level curve seen from above: crossing edges plus the
/// upward flux of every vertex on the curve.
pub fn level_length_above(field: &HarmonicField, complex: &PlanarComplex, curve: &LevelCurve) -> f64 {
    let g = &field.values;
    let mut verts = Vec::new();
    let mut total = 0.0;
    for c in curve.cycles() {
        for p in &c.points {
            match *p {
                LevelPoint::Edge { edge, .. } => {
                    let [a, b] = complex.edges()[edge];
                    total += complex.conductance[edge] * (g[a] - g[b]).abs();
                }
                LevelPoint::Vertex(v) => verts.push(v),
            }
        }
    }
    verts.sort_unstable();
    verts.dedup();
    for v in verts {
        for &(w, e) in complex.neighbors(v) {
            if g[w] > g[v] {
                total += complex.conductance[e] * (g[w] - g[v]);
            }
        }
    }
    total
}

/// The singular level curve with a component whose cycles jointly enclose
/// every inner boundary cycle. The whole level set at that value is returned.
pub fn enclosing_singular_curve(field: &HarmonicField, complex: &PlanarComplex) -> Result<LevelCurve> {
    if complex.m() < 3 {
        return Err(Error::NotApplicable(format!("no singular level curves when m = {}", complex.m())));
    }
    let ks = critical_values(field, complex)?;
    let probes: Vec<Point> = complex.inner().iter().map(|c| complex.coords[c[0]]).collect();
    let mut found: Vec<LevelCurve> = Vec::new();
    for &h in &ks[1..ks.len() - 1] {
        let curve = extract_level(field, complex, h, LevelOptions::default())?;
        let encloses = curve.components.iter().any(|comp| !comp.tangencies.is_empty() && probes.iter().all(|&p| comp.encloses(p)));
        if encloses {
            found.push(curve);
        }
    }
    match found.len() {
        1 => Ok(found.pop().unwrap()),
        0 => Err(Error::NotFound("no singular level curve encloses every inner boundary".into())),
        n => Err(Error::NotFound(format!("{n} singular level curves enclose every inner boundary"))),
    }
}
