use std::collections::{HashMap, HashSet};
use std::fmt;
use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// Planar cellular decomposition with boundary cycles and edge conductances.
///
/// Faces are counterclockwise, the outer cycle is counterclockwise and the
/// inner cycles clockwise, so the domain is always on the left.
#[derive(Debug)]
pub struct PlanarComplex {
    pub coords: Vec<Point>,
    pub conductance: Vec<f64>,
    edges: Vec<[usize; 2]>,
    faces: Vec<Vec<usize>>,
    outer: Vec<usize>,
    inner: Vec<Vec<usize>>,
    topo: OnceLock<Topology>,
}

impl Clone for PlanarComplex {
    fn clone(&self) -> Self {
        PlanarComplex {
            coords: self.coords.clone(),
            conductance: self.conductance.clone(),
            edges: self.edges.clone(),
            faces: self.faces.clone(),
            outer: self.outer.clone(),
            inner: self.inner.clone(),
            topo: OnceLock::new(),
        }
    }
}

impl PartialEq for PlanarComplex {
    fn eq(&self, other: &Self) -> bool {
        self.coords == other.coords
            && self.conductance == other.conductance
            && self.edges == other.edges
            && self.faces == other.faces
            && self.outer == other.outer
            && self.inner == other.inner
    }
}

/// Rotation system at a vertex: maximal runs of neighbors in counterclockwise
/// order. Interior vertices have one closed run; a vertex where several
/// boundary cycles touch has one run per sector.
#[derive(Clone, Debug, Default)]
pub struct Fan {
    pub chains: Vec<Vec<usize>>,
    pub closed: bool,
}

#[derive(Debug)]
pub struct Topology {
    edge_map: HashMap<(usize, usize), usize>,
    adj: Vec<Vec<(usize, usize)>>,
    fans: Vec<Fan>,
    on_boundary: Vec<bool>,
}

fn key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Topology {
    fn build(c: &PlanarComplex) -> Topology {
        let n = c.coords.len();
        let mut edge_map = HashMap::with_capacity(c.edges.len());
        let mut adj = vec![Vec::new(); n];
        for (i, &[a, b]) in c.edges.iter().enumerate() {
            if a == b || edge_map.contains_key(&key(a, b)) {
                continue;
            }
            edge_map.insert(key(a, b), i);
            adj[a].push((b, i));
            adj[b].push((a, i));
        }
        for list in adj.iter_mut() {
            list.sort_unstable();
        }

        // corner (a, v, b) of a ccw face: going ccw around v, b is followed by a
        let mut succ: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
        for f in &c.faces {
            let k = f.len();
            for i in 0..k {
                let a = f[(i + k - 1) % k];
                let v = f[i];
                let b = f[(i + 1) % k];
                succ[v].push((b, a));
            }
        }
        let fans = succ
            .into_iter()
            .map(|mut s| {
                s.sort_unstable();
                build_fan(&s)
            })
            .collect();

        let mut on_boundary = vec![false; n];
        for cyc in c.boundary_cycles() {
            for &v in cyc {
                on_boundary[v] = true;
            }
        }
        Topology { edge_map, adj, fans, on_boundary }
    }
}

fn build_fan(succ: &[(usize, usize)]) -> Fan {
    if succ.is_empty() {
        return Fan::default();
    }
    let next = |x: usize| succ.binary_search_by_key(&x, |p| p.0).ok().map(|i| succ[i].1);
    let targets: HashSet<usize> = succ.iter().map(|p| p.1).collect();
    let mut starts: Vec<usize> = succ.iter().map(|p| p.0).filter(|b| !targets.contains(b)).collect();
    starts.dedup();
    let limit = succ.len() + 1;
    if starts.is_empty() {
        let first = succ[0].0;
        let mut chain = vec![first];
        let mut cur = first;
        while let Some(nx) = next(cur) {
            if nx == first || chain.len() > limit {
                break;
            }
            chain.push(nx);
            cur = nx;
        }
        return Fan { chains: vec![chain], closed: true };
    }
    let mut chains = Vec::new();
    for s in starts {
        let mut chain = vec![s];
        let mut cur = s;
        while let Some(nx) = next(cur) {
            chain.push(nx);
            cur = nx;
            if chain.len() > limit {
                break;
            }
        }
        chains.push(chain);
    }
    Fan { chains, closed: false }
}

impl PlanarComplex {
    /// Builds a complex from raw parts. Only index ranges and array lengths
    /// are checked here; everything else is left to [`PlanarComplex::validate`].
    pub fn new(
        coords: Vec<Point>,
        edges: Vec<[usize; 2]>,
        faces: Vec<Vec<usize>>,
        outer: Vec<usize>,
        inner: Vec<Vec<usize>>,
        conductance: Vec<f64>,
    ) -> Result<Self> {
        let n = coords.len();
        if conductance.len() != edges.len() {
            return Err(Error::Malformed(format!("{} conductances for {} edges", conductance.len(), edges.len())));
        }
        let check = |v: usize, what: &str| {
            if v >= n {
                Err(Error::Malformed(format!("{what} references vertex {v}, but there are only {n} vertices")))
            } else {
                Ok(())
            }
        };
        for e in &edges {
            check(e[0], "edge")?;
            check(e[1], "edge")?;
        }
        for f in &faces {
            if f.len() < 3 {
                return Err(Error::Malformed(format!("face {f:?} has fewer than 3 vertices")));
            }
            for &v in f {
                check(v, "face")?;
            }
        }
        for &v in outer.iter().chain(inner.iter().flatten()) {
            check(v, "boundary cycle")?;
        }
        Ok(PlanarComplex { coords, conductance, edges, faces, outer, inner, topo: OnceLock::new() })
    }

    /// Builds edges and boundary cycles from counterclockwise faces.
    /// The counterclockwise boundary cycle of largest area is the outer one.
    pub fn from_faces(coords: Vec<Point>, faces: Vec<Vec<usize>>, conductance: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut directed = HashSet::new();
        for f in &faces {
            for i in 0..f.len() {
                directed.insert((f[i], f[(i + 1) % f.len()]));
            }
        }
        let mut edges: Vec<[usize; 2]> = directed.iter().map(|&(a, b)| key(a, b)).map(|(a, b)| [a, b]).collect();
        edges.sort_unstable();
        edges.dedup();
        let cond = edges.iter().map(|e| conductance(e[0], e[1])).collect();

        let mut out: HashMap<usize, usize> = HashMap::new();
        for &(a, b) in &directed {
            if !directed.contains(&(b, a)) && out.insert(a, b).is_some() {
                return Err(Error::Malformed(format!("boundary is pinched at vertex {a}")));
            }
        }
        let mut starts: Vec<usize> = out.keys().copied().collect();
        starts.sort_unstable();
        let mut seen = HashSet::new();
        let mut cycles = Vec::new();
        for s in starts {
            if seen.contains(&s) {
                continue;
            }
            let mut cyc = vec![s];
            seen.insert(s);
            let mut cur = out[&s];
            while cur != s {
                if !seen.insert(cur) {
                    return Err(Error::Malformed("boundary half-edges do not close up".into()));
                }
                cyc.push(cur);
                cur = *out.get(&cur).ok_or_else(|| Error::Malformed("open boundary chain".into()))?;
            }
            cycles.push(cyc);
        }
        let area = |c: &Vec<usize>| geometry::signed_area(&c.iter().map(|&v| coords[v]).collect::<Vec<_>>());
        let oi = (0..cycles.len())
            .max_by(|&i, &j| area(&cycles[i]).total_cmp(&area(&cycles[j])))
            .ok_or_else(|| Error::Malformed("no boundary".into()))?;
        let outer = rotate_to_min(cycles.remove(oi));
        let inner = cycles.into_iter().map(rotate_to_min).collect();
        PlanarComplex::new(coords, edges, faces, outer, inner, cond)
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn faces(&self) -> &[Vec<usize>] {
        &self.faces
    }

    pub fn outer(&self) -> &[usize] {
        &self.outer
    }

    pub fn inner(&self) -> &[Vec<usize>] {
        &self.inner
    }

    pub fn num_vertices(&self) -> usize {
        self.coords.len()
    }

    /// Number of boundary cycles.
    pub fn m(&self) -> usize {
        1 + self.inner.len()
    }

    pub fn boundary_cycles(&self) -> impl Iterator<Item = &Vec<usize>> {
        std::iter::once(&self.outer).chain(self.inner.iter())
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.coords.len() as i64 - self.edges.len() as i64 + self.faces.len() as i64
    }

    pub fn topology(&self) -> &Topology {
        self.topo.get_or_init(|| Topology::build(self))
    }

    pub fn edge_id(&self, a: usize, b: usize) -> Option<usize> {
        self.topology().edge_map.get(&key(a, b)).copied()
    }

    /// Neighbors as (vertex, edge) pairs sorted by vertex id.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.topology().adj[v]
    }

    pub fn fan(&self, v: usize) -> &Fan {
        &self.topology().fans[v]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.topology().on_boundary[v]
    }

    pub fn interior_vertices(&self) -> Vec<usize> {
        (0..self.coords.len()).filter(|&v| !self.is_boundary(v)).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.topology().adj.iter().map(|a| a.len()).max().unwrap_or(0)
    }

    pub fn face_area(&self, f: usize) -> f64 {
        let poly: Vec<Point> = self.faces[f].iter().map(|&v| self.coords[v]).collect();
        geometry::signed_area(&poly)
    }

    pub fn validate(&self) -> ValidationReport {
        self.validate_with(Rules::Input)
    }

    pub fn validate_with(&self, rules: Rules) -> ValidationReport {
        validate(self, rules)
    }
}

fn rotate_to_min(mut c: Vec<usize>) -> Vec<usize> {
    if let Some(i) = (0..c.len()).min_by_key(|&i| c[i]) {
        c.rotate_left(i);
    }
    c
}

/// Which invariants `validate` enforces. `Input` is the full set for user
/// inputs; `Piece` admits what cutting along a level curve produces:
/// polygonal faces, zero-conductance arcs and boundary cycles that touch at
/// isolated vertices.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rules {
    Input,
    Piece,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    CoordinateNotFinite { vertex: usize },
    IsolatedVertex { vertex: usize },
    SelfLoop { edge: usize },
    DuplicateEdge { a: usize, b: usize },
    FaceSize { face: usize, len: usize },
    FaceMissingEdge { face: usize, a: usize, b: usize },
    FaceOrientation { face: usize, area: f64 },
    RepeatedHalfEdge { a: usize, b: usize },
    EdgeFaceCount { edge: usize, count: usize },
    BoundaryEdgeNotListed { edge: usize },
    ListedEdgeNotBoundary { a: usize, b: usize },
    CycleTooShort { cycle: usize },
    CycleNotSimple { cycle: usize, vertex: usize },
    CyclesShareVertex { first: usize, second: usize, vertex: usize },
    CycleOrientation { cycle: usize, area: f64 },
    NotEnclosed { cycle: usize },
    Euler { v: usize, e: usize, f: usize, m: usize },
    Conductance { edge: usize, value: f64 },
    EdgesCross { first: usize, second: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match *self {
            CoordinateNotFinite { vertex } => write!(f, "vertex {vertex} has a non-finite coordinate"),
            IsolatedVertex { vertex } => write!(f, "vertex {vertex} has no incident edge"),
            SelfLoop { edge } => write!(f, "edge {edge} is a loop"),
            DuplicateEdge { a, b } => write!(f, "edge ({a},{b}) is listed twice"),
            FaceSize { face, len } => write!(f, "face {face} has {len} vertices (expected 3 or 4)"),
            FaceMissingEdge { face, a, b } => write!(f, "face {face} references missing edge ({a},{b})"),
            FaceOrientation { face, area } => write!(f, "face {face} has non-positive signed area {area}"),
            RepeatedHalfEdge { a, b } => write!(f, "two faces traverse ({a},{b}) in the same direction"),
            EdgeFaceCount { edge, count } => write!(f, "edge {edge} lies on {count} faces"),
            BoundaryEdgeNotListed { edge } => write!(f, "edge {edge} lies on one face but on no boundary cycle"),
            ListedEdgeNotBoundary { a, b } => write!(f, "boundary cycle step ({a},{b}) is not a boundary edge"),
            CycleTooShort { cycle } => write!(f, "boundary cycle {cycle} has fewer than 3 vertices"),
            CycleNotSimple { cycle, vertex } => write!(f, "boundary cycle {cycle} visits vertex {vertex} twice"),
            CyclesShareVertex { first, second, vertex } => {
                write!(f, "boundary cycles {first} and {second} share vertex {vertex}")
            }
            CycleOrientation { cycle, area } => write!(f, "boundary cycle {cycle} has the wrong orientation (signed area {area})"),
            NotEnclosed { cycle } => write!(f, "inner cycle {cycle} is not enclosed by the outer cycle"),
            Euler { v, e, f: nf, m } => write!(
                f,
                "edge count vs. Euler characteristic: V - E + F = {} - {} + {} = {}, expected 2 - m = {}",
                v,
                e,
                nf,
                v as i64 - e as i64 + nf as i64,
                2 - m as i64
            ),
            Conductance { edge, value } => write!(f, "edge {edge} has invalid conductance {value}"),
            EdgesCross { first, second } => write!(f, "edges {first} and {second} intersect away from a shared vertex"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Invalid(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for v in &self.violations {
            writeln!(f, "  - {v}")?;
        }
        Ok(())
    }
}

// `!(x > 0.0)` on purpose: NaN areas must fail too
#[allow(clippy::neg_cmp_op_on_partial_ord)]
fn validate(c: &PlanarComplex, rules: Rules) -> ValidationReport {
    let mut out = Vec::new();
    let n = c.coords.len();

    for (v, p) in c.coords.iter().enumerate() {
        if !p[0].is_finite() || !p[1].is_finite() {
            out.push(Violation::CoordinateNotFinite { vertex: v });
        }
    }

    let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
    let mut touched = vec![false; n];
    for (i, &[a, b]) in c.edges.iter().enumerate() {
        if a == b {
            out.push(Violation::SelfLoop { edge: i });
            continue;
        }
        if edge_map.insert(key(a, b), i).is_some() {
            out.push(Violation::DuplicateEdge { a, b });
        }
        touched[a] = true;
        touched[b] = true;
    }
    for (v, t) in touched.iter().enumerate() {
        if !t {
            out.push(Violation::IsolatedVertex { vertex: v });
        }
    }

    for (i, &w) in c.conductance.iter().enumerate() {
        let ok = match rules {
            Rules::Input => w.is_finite() && w > 0.0,
            Rules::Piece => w.is_finite() && w >= 0.0,
        };
        if !ok {
            out.push(Violation::Conductance { edge: i, value: w });
        }
    }

    let mut face_count = vec![0usize; c.edges.len()];
    let mut half: HashSet<(usize, usize)> = HashSet::new();
    for (fi, f) in c.faces.iter().enumerate() {
        if rules == Rules::Input && !(3..=4).contains(&f.len()) {
            out.push(Violation::FaceSize { face: fi, len: f.len() });
        }
        for i in 0..f.len() {
            let (a, b) = (f[i], f[(i + 1) % f.len()]);
            match edge_map.get(&key(a, b)) {
                Some(&e) => face_count[e] += 1,
                None => out.push(Violation::FaceMissingEdge { face: fi, a, b }),
            }
            if !half.insert((a, b)) {
                out.push(Violation::RepeatedHalfEdge { a, b });
            }
        }
        let area = c.face_area(fi);
        if !(area > 0.0) {
            out.push(Violation::FaceOrientation { face: fi, area });
        }
    }

    let cycles: Vec<&Vec<usize>> = c.boundary_cycles().collect();
    let mut listed: HashSet<usize> = HashSet::new();
    let mut owner: HashMap<usize, usize> = HashMap::new();
    for (ci, cyc) in cycles.iter().enumerate() {
        if cyc.len() < 3 {
            out.push(Violation::CycleTooShort { cycle: ci });
            continue;
        }
        let mut seen = HashSet::new();
        for i in 0..cyc.len() {
            let (a, b) = (cyc[i], cyc[(i + 1) % cyc.len()]);
            if !seen.insert(a) {
                out.push(Violation::CycleNotSimple { cycle: ci, vertex: a });
            }
            match edge_map.get(&key(a, b)) {
                Some(&e) if face_count[e] == 1 => {
                    listed.insert(e);
                }
                _ => out.push(Violation::ListedEdgeNotBoundary { a, b }),
            }
        }
        let mut shared: Vec<(usize, usize)> = Vec::new();
        for &v in seen.iter() {
            if let Some(&other) = owner.get(&v) {
                shared.push((other, v));
            } else {
                owner.insert(v, ci);
            }
        }
        shared.sort_unstable();
        let mut prev_other = None;
        for (other, v) in shared {
            // pieces may have cycles touching at single vertices
            let allowed = rules == Rules::Piece && prev_other != Some(other) && other != 0 && ci != 0;
            if !allowed {
                out.push(Violation::CyclesShareVertex { first: other, second: ci, vertex: v });
            }
            prev_other = Some(other);
        }
    }
    for (e, &cnt) in face_count.iter().enumerate() {
        if cnt == 0 || cnt > 2 {
            out.push(Violation::EdgeFaceCount { edge: e, count: cnt });
        } else if cnt == 1 && !listed.contains(&e) {
            out.push(Violation::BoundaryEdgeNotListed { edge: e });
        }
    }

    let poly = |cyc: &Vec<usize>| cyc.iter().map(|&v| c.coords[v]).collect::<Vec<Point>>();
    if c.outer.len() >= 3 {
        let outer_poly = poly(&c.outer);
        let a = geometry::signed_area(&outer_poly);
        if !(a > 0.0) {
            out.push(Violation::CycleOrientation { cycle: 0, area: a });
        }
        let outer_set: HashSet<usize> = c.outer.iter().copied().collect();
        for (i, cyc) in c.inner.iter().enumerate() {
            if cyc.len() < 3 {
                continue;
            }
            let a = geometry::signed_area(&poly(cyc));
            if !(a < 0.0) {
                out.push(Violation::CycleOrientation { cycle: i + 1, area: a });
            }
            let probe = cyc.iter().find(|v| !outer_set.contains(v));
            let inside = probe.map(|&v| geometry::point_in_polygon(c.coords[v], &outer_poly)).unwrap_or(false);
            if !inside {
                out.push(Violation::NotEnclosed { cycle: i + 1 });
            }
        }
    }

    if c.euler_characteristic() != 2 - c.m() as i64 {
        out.push(Violation::Euler { v: n, e: c.edges.len(), f: c.faces.len(), m: c.m() });
    }

    if out.iter().all(|v| !matches!(v, Violation::CoordinateNotFinite { .. })) {
        for (a, b) in crossing_edges(c) {
            out.push(Violation::EdgesCross { first: a, second: b });
        }
    }

    ValidationReport { violations: out }
}

/// Pairs of edges meeting anywhere other than a shared endpoint, found by
/// bucketing edges into a uniform grid.
fn crossing_edges(c: &PlanarComplex) -> Vec<(usize, usize)> {
    let edges: Vec<[usize; 2]> = c.edges.iter().copied().filter(|e| e[0] != e[1]).collect();
    if edges.len() < 2 {
        return Vec::new();
    }
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    let mut total = 0.0;
    for e in &edges {
        for &v in e {
            for d in 0..2 {
                lo[d] = lo[d].min(c.coords[v][d]);
                hi[d] = hi[d].max(c.coords[v][d]);
            }
        }
        let d = geometry::sub(c.coords[e[1]], c.coords[e[0]]);
        total += d[0].hypot(d[1]);
    }
    let mean = (total / edges.len() as f64).max(1e-300);
    let nx = (((hi[0] - lo[0]) / mean).ceil() as usize).clamp(1, 4096);
    let ny = (((hi[1] - lo[1]) / mean).ceil() as usize).clamp(1, 4096);
    let cell = |p: f64, d: usize, count: usize| -> usize {
        let span = hi[d] - lo[d];
        if span <= 0.0 {
            return 0;
        }
        (((p - lo[d]) / span * count as f64) as usize).min(count - 1)
    };
    let mut grid: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, e) in c.edges.iter().enumerate() {
        if e[0] == e[1] {
            continue;
        }
        let (p, q) = (c.coords[e[0]], c.coords[e[1]]);
        let (x0, x1) = (cell(p[0].min(q[0]), 0, nx), cell(p[0].max(q[0]), 0, nx));
        let (y0, y1) = (cell(p[1].min(q[1]), 1, ny), cell(p[1].max(q[1]), 1, ny));
        for x in x0..=x1 {
            for y in y0..=y1 {
                grid.entry((x, y)).or_default().push(i);
            }
        }
    }
    let mut found = HashSet::new();
    for bucket in grid.values() {
        for (ii, &i) in bucket.iter().enumerate() {
            for &j in &bucket[ii + 1..] {
                let (a, b) = (c.edges[i], c.edges[j]);
                if edges_conflict(c, a, b) {
                    found.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    let mut v: Vec<_> = found.into_iter().collect();
    v.sort_unstable();
    v
}

fn edges_conflict(c: &PlanarComplex, a: [usize; 2], b: [usize; 2]) -> bool {
    let p = |v: usize| c.coords[v];
    let shared: Vec<usize> = a.iter().copied().filter(|v| b.contains(v)).collect();
    match shared.len() {
        0 => geometry::segments_intersect(p(a[0]), p(a[1]), p(b[0]), p(b[1])),
        1 => {
            // collinear overlap beyond the shared endpoint
            let s = shared[0];
            let oa = if a[0] == s { a[1] } else { a[0] };
            let ob = if b[0] == s { b[1] } else { b[0] };
            let (da, db) = (geometry::sub(p(oa), p(s)), geometry::sub(p(ob), p(s)));
            geometry::cross(da, db) == 0.0 && da[0] * db[0] + da[1] * db[1] > 0.0
        }
        _ => false,
    }
}
