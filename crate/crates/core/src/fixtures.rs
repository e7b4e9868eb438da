//! Reproducible test complexes.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::PlanarComplex;

/// A(n): three concentric rings of n vertices at radii 3, 2, 1 joined by
/// radial edges into 2n quadrilaterals. Ids run outer ring, middle ring,
/// inner ring, each counterclockwise from angle 0.
pub fn annulus(n: usize) -> PlanarComplex {
    annulus_with(n, 1.0, 1.0)
}

/// A(n) with separate conductances on radial and ring edges.
pub fn annulus_with(n: usize, radial: f64, ring: f64) -> PlanarComplex {
    assert!(n >= 3);
    let mut coords = Vec::with_capacity(3 * n);
    for r in [3.0, 2.0, 1.0] {
        for i in 0..n {
            let a = 2.0 * PI * i as f64 / n as f64;
            coords.push([r * a.cos(), r * a.sin()]);
        }
    }
    let id = |ring: usize, i: usize| ring * n + i % n;
    let mut edges = Vec::new();
    let mut cond = Vec::new();
    for ring_i in 0..3 {
        for i in 0..n {
            edges.push([id(ring_i, i), id(ring_i, i + 1)]);
            cond.push(ring);
        }
    }
    for ring_i in 0..2 {
        for i in 0..n {
            edges.push([id(ring_i, i), id(ring_i + 1, i)]);
            cond.push(radial);
        }
    }
    let mut faces = Vec::new();
    for ring_i in 0..2 {
        for i in 0..n {
            faces.push(vec![id(ring_i, i), id(ring_i, i + 1), id(ring_i + 1, i + 1), id(ring_i + 1, i)]);
        }
    }
    let outer: Vec<usize> = (0..n).map(|i| id(0, i)).collect();
    let inner: Vec<usize> = std::iter::once(id(2, 0)).chain((1..n).rev().map(|i| id(2, i))).collect();
    PlanarComplex::new(coords, edges, faces, outer, vec![inner], cond).expect("annulus fixture is well formed")
}

/// Parameters of a jittered, randomly triangulated grid with rectangular holes.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub holes: usize,
    pub seed: u64,
    /// Conductances are drawn uniformly from this range.
    pub conductance: (f64, f64),
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, holes: usize, seed: u64) -> Self {
        GridSpec { nx, ny, holes, seed, conductance: (0.1, 10.0) }
    }
}

/// Cell block [i0, i1) x [j0, j1) removed from the grid.
#[derive(Clone, Copy, Debug)]
struct Hole {
    i0: usize,
    j0: usize,
    i1: usize,
    j1: usize,
}

impl Hole {
    // Vertex ranges must leave a full row or column of free vertices
    // between holes, so no face or edge joins two boundary cycles.
    fn separated(&self, o: &Hole) -> bool {
        self.i1 + 2 <= o.i0 || o.i1 + 2 <= self.i0 || self.j1 + 2 <= o.j0 || o.j1 + 2 <= self.j0
    }

    fn contains_cell(&self, i: usize, j: usize) -> bool {
        i >= self.i0 && i < self.i1 && j >= self.j0 && j < self.j1
    }

    fn strictly_contains_vertex(&self, i: usize, j: usize) -> bool {
        i > self.i0 && i < self.i1 && j > self.j0 && j < self.j1
    }
}

fn place_holes(spec: &GridSpec, rng: &mut ChaCha8Rng) -> Vec<Hole> {
    let mut holes: Vec<Hole> = Vec::new();
    let mut attempts = 0;
    while holes.len() < spec.holes {
        attempts += 1;
        assert!(attempts < 100_000, "cannot place {} holes in a {}x{} grid", spec.holes, spec.nx, spec.ny);
        // early holes can block every remaining spot
        if attempts % 500 == 0 {
            holes.clear();
        }
        let max_w = ((spec.nx - 4) / 3).clamp(1, 4);
        let max_h = ((spec.ny - 4) / 3).clamp(1, 4);
        let w = rng.gen_range(1..=max_w);
        let h = rng.gen_range(1..=max_h);
        if spec.nx < w + 4 || spec.ny < h + 4 {
            continue;
        }
        let i0 = rng.gen_range(2..=spec.nx - 2 - w);
        let j0 = rng.gen_range(2..=spec.ny - 2 - h);
        let cand = Hole { i0, j0, i1: i0 + w, j1: j0 + h };
        if holes.iter().all(|o| o.separated(&cand)) {
            holes.push(cand);
        }
    }
    holes
}

/// Generic-position triangulated domain with `spec.holes` holes.
pub fn random_grid(spec: &GridSpec) -> PlanarComplex {
    assert!(spec.nx >= 5 && spec.ny >= 5);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let holes = place_holes(spec, &mut rng);

    let mut index = vec![usize::MAX; (spec.nx + 1) * (spec.ny + 1)];
    let mut coords = Vec::new();
    for j in 0..=spec.ny {
        for i in 0..=spec.nx {
            if holes.iter().any(|h| h.strictly_contains_vertex(i, j)) {
                continue;
            }
            index[j * (spec.nx + 1) + i] = coords.len();
            let jx: f64 = rng.gen_range(-0.2..0.2);
            let jy: f64 = rng.gen_range(-0.2..0.2);
            coords.push([i as f64 + jx, j as f64 + jy]);
        }
    }
    let vid = |i: usize, j: usize| index[j * (spec.nx + 1) + i];

    let mut faces = Vec::new();
    for j in 0..spec.ny {
        for i in 0..spec.nx {
            if holes.iter().any(|h| h.contains_cell(i, j)) {
                continue;
            }
            let (p00, p10, p11, p01) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
            // corner cells would otherwise get a chord of the outer cycle
            let corner_00 = (i == 0 && j == 0) || (i == spec.nx - 1 && j == spec.ny - 1);
            let corner_10 = (i == spec.nx - 1 && j == 0) || (i == 0 && j == spec.ny - 1);
            let main_diag = if corner_00 {
                true
            } else if corner_10 {
                false
            } else {
                rng.gen_bool(0.5)
            };
            if main_diag {
                faces.push(vec![p00, p10, p11]);
                faces.push(vec![p00, p11, p01]);
            } else {
                faces.push(vec![p00, p10, p01]);
                faces.push(vec![p10, p11, p01]);
            }
        }
    }
    let (lo, hi) = spec.conductance;
    let mut crng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    let complex = PlanarComplex::from_faces(coords, faces, |_, _| 0.0).expect("grid fixture is well formed");
    let cond: Vec<f64> = (0..complex.edges().len()).map(|_| crng.gen_range(lo..=hi)).collect();
    let mut complex = complex;
    complex.conductance = cond;
    complex
}

/// The pair-of-pants fixture P: a 13 x 11 grid with two holes.
pub fn pants() -> PlanarComplex {
    random_grid(&GridSpec::new(13, 11, 2, 7))
}

/// Generic domain with three holes.
pub fn ladder4() -> PlanarComplex {
    random_grid(&GridSpec::new(18, 15, 3, 11))
}

/// Generic domain with four holes.
pub fn ladder5() -> PlanarComplex {
    random_grid(&GridSpec::new(22, 18, 4, 5))
}

/// Triangular-lattice hexagon of radius 8 with three single-vertex holes at
/// distance 3 from the center in directions 0, 120 and 240 degrees. Unit
/// conductance. The threefold symmetry makes the center a saddle with six
/// sign changes, index -2.
pub fn triple_saddle() -> PlanarComplex {
    const R: i64 = 8;
    const D: i64 = 3;
    let hole_centers = [(D, 0), (-D, D), (0, -D)];
    let hex = |a: i64, b: i64| a.abs().max(b.abs()).max((a + b).abs());
    let removed = |a: i64, b: i64| hole_centers.contains(&(a, b));
    let mut ids = std::collections::HashMap::new();
    let mut coords = Vec::new();
    for b in -R..=R {
        for a in -R..=R {
            if hex(a, b) > R || removed(a, b) {
                continue;
            }
            ids.insert((a, b), coords.len());
            let (x, y) = (a as f64 + 0.5 * b as f64, b as f64 * 3f64.sqrt() / 2.0);
            coords.push([x, y]);
        }
    }
    let mut faces = Vec::new();
    for b in -R..=R {
        for a in -R..=R {
            // up triangle (a,b),(a+1,b),(a,b+1) and down triangle (a+1,b),(a+1,b+1),(a,b+1)
            for tri in [[(a, b), (a + 1, b), (a, b + 1)], [(a + 1, b), (a + 1, b + 1), (a, b + 1)]] {
                if tri.iter().all(|&(x, y)| ids.contains_key(&(x, y))) {
                    faces.push(tri.iter().map(|p| ids[p]).collect());
                }
            }
        }
    }
    PlanarComplex::from_faces(coords, faces, |_, _| 1.0).expect("lattice fixture is well formed")
}

/// One entry of the randomized corpus.
#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub complex: PlanarComplex,
    pub k: f64,
    pub m: usize,
}

/// `count` random generic-position complexes cycling through m = 2..=5,
/// sizes from about 60 up to 1936 vertices.
pub fn corpus(count: usize, seed: u64) -> Vec<CorpusEntry> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let m = 2 + i % 4;
            let min_side = 6 + 3 * (m - 1);
            let nx = rng.gen_range(min_side..=43);
            let ny = rng.gen_range(min_side..=43);
            let k = rng.gen_range(0.5..4.0);
            let s: u64 = rng.gen();
            let complex = random_grid(&GridSpec::new(nx, ny, m - 1, s));
            CorpusEntry { name: format!("grid-{i}-m{m}-{nx}x{ny}"), complex, k, m }
        })
        .collect()
}
