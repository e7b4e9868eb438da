use std::time::Instant;

use serde::{Deserialize, Serialize};
use sprs::{FillInReduction, SymmetryCheck, TriMat};
use sprs_ldl::Ldl;

use crate::error::{Error, Result};
use crate::network::PlanarComplex;

/// Above this many unknowns the direct factorization is skipped.
const DIRECT_LIMIT: usize = 400_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    pub method: String,
    pub unknowns: usize,
    pub iterations: usize,
    pub factor_nnz: usize,
    pub wall_seconds: f64,
}

/// Solution of the Dirichlet problem: `top` on the outer cycle, `bottom` on
/// every inner cycle, harmonic elsewhere.
#[derive(Clone, Debug)]
pub struct HarmonicField {
    pub values: Vec<f64>,
    pub top: f64,
    pub bottom: f64,
    pub residual: f64,
    pub stats: SolveStats,
}

impl HarmonicField {
    /// Boundary constant on the outer cycle.
    pub fn k(&self) -> f64 {
        self.top
    }

    /// Range of boundary values, used to scale tolerances.
    pub fn span(&self) -> f64 {
        (self.top - self.bottom).abs()
    }

    /// Wraps given values without solving. Used for restrictions and tests.
    pub fn from_values(values: Vec<f64>, top: f64, bottom: f64) -> Self {
        HarmonicField {
            values,
            top,
            bottom,
            residual: 0.0,
            stats: SolveStats { method: "given".into(), unknowns: 0, iterations: 0, factor_nnz: 0, wall_seconds: 0.0 },
        }
    }
}

pub fn solve(complex: &PlanarComplex, k: f64) -> Result<HarmonicField> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::Malformed(format!("boundary value k = {k} must be positive and finite")));
    }
    solve_with(complex, k, 0.0)
}

pub fn residual_tolerance(complex: &PlanarComplex, span: f64) -> f64 {
    let maxc = complex.conductance.iter().copied().fold(0.0, f64::max);
    1e-10 * span * complex.max_degree() as f64 * maxc
}

pub fn solve_with(complex: &PlanarComplex, top: f64, bottom: f64) -> Result<HarmonicField> {
    let start = Instant::now();
    let n = complex.num_vertices();
    let mut values = vec![f64::NAN; n];
    for &v in complex.outer() {
        values[v] = top;
    }
    for cyc in complex.inner() {
        for &v in cyc {
            values[v] = bottom;
        }
    }
    let interior = complex.interior_vertices();
    let mut slot = vec![usize::MAX; n];
    for (i, &v) in interior.iter().enumerate() {
        slot[v] = i;
    }
    let nu = interior.len();

    let mut tri = TriMat::new((nu, nu));
    let mut rhs = vec![0.0; nu];
    for (i, &v) in interior.iter().enumerate() {
        let mut diag = 0.0;
        for &(w, e) in complex.neighbors(v) {
            let c = complex.conductance[e];
            if c == 0.0 {
                continue;
            }
            diag += c;
            if slot[w] == usize::MAX {
                rhs[i] += c * values[w];
            } else {
                tri.add_triplet(i, slot[w], -c);
            }
        }
        if diag == 0.0 {
            return Err(Error::Solver(format!("interior vertex {v} has no conducting edge")));
        }
        tri.add_triplet(i, i, diag);
    }
    let mat = tri.to_csc::<usize>();

    let mut stats = SolveStats { method: String::new(), unknowns: nu, iterations: 0, factor_nnz: 0, wall_seconds: 0.0 };
    let tol = residual_tolerance(complex, (top - bottom).abs());
    let mut x = vec![0.0; nu];
    let mut direct_ok = false;
    if nu == 1 {
        // the factorization needs at least two unknowns
        stats.method = "scalar".into();
        x[0] = rhs[0] / mat.get(0, 0).copied().unwrap_or(f64::NAN);
        direct_ok = x[0].is_finite();
    } else if nu > 1 && nu <= DIRECT_LIMIT {
        if let Ok(ldl) = Ldl::new()
            .fill_in_reduction(FillInReduction::ReverseCuthillMcKee)
            .check_symmetry(SymmetryCheck::DontCheckSymmetry)
            .numeric(mat.view())
        {
            stats.method = "ldl-rcm".into();
            stats.factor_nnz = ldl.nnz();
            x = ldl.solve(&rhs);
            // a couple of refinement sweeps remove the last ulps of error
            for _ in 0..2 {
                let r = residual_vec(&mat, &x, &rhs);
                if r.iter().all(|v| v.abs() <= 0.01 * tol) {
                    break;
                }
                let dx = ldl.solve(&r);
                for (xi, d) in x.iter_mut().zip(dx) {
                    *xi += d;
                }
                stats.iterations += 1;
            }
            direct_ok = x.iter().all(|v| v.is_finite());
        }
    }
    if nu > 0 && !direct_ok {
        stats.method = "cg".into();
        let (sol, iters) = conjugate_gradient(&mat, &rhs, 1e-12, 100 * n.max(1))?;
        x = sol;
        stats.iterations = iters;
    }
    if nu == 0 {
        stats.method = "none".into();
    }
    for (i, &v) in interior.iter().enumerate() {
        values[v] = x[i];
    }
    for (v, val) in values.iter().enumerate() {
        if val.is_nan() {
            return Err(Error::Solver(format!("vertex {v} received no value")));
        }
    }
    let residual = interior.iter().map(|&v| laplacian_unchecked(&values, complex, v).abs()).fold(0.0, f64::max);
    if residual > tol {
        return Err(Error::Solver(format!("harmonicity residual {residual:e} exceeds tolerance {tol:e}")));
    }
    stats.wall_seconds = start.elapsed().as_secs_f64();
    Ok(HarmonicField { values, top, bottom, residual, stats })
}

fn residual_vec(mat: &sprs::CsMat<f64>, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = b.to_vec();
    for (col, col_vec) in mat.outer_iterator().enumerate() {
        for (row, &a) in col_vec.iter() {
            r[row] -= a * x[col];
        }
    }
    r
}

fn matvec(mat: &sprs::CsMat<f64>, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (col, col_vec) in mat.outer_iterator().enumerate() {
        let xc = x[col];
        for (row, &a) in col_vec.iter() {
            out[row] += a * xc;
        }
    }
}

/// Jacobi-preconditioned conjugate gradient.
fn conjugate_gradient(mat: &sprs::CsMat<f64>, b: &[f64], rel_tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let mut diag = vec![1.0; n];
    for (col, col_vec) in mat.outer_iterator().enumerate() {
        for (row, &a) in col_vec.iter() {
            if row == col {
                diag[col] = a;
            }
        }
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok((x, 0));
    }
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        matvec(mat, &p, &mut ap);
        let alpha = rz / p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if rnorm <= rel_tol * bnorm {
            return Ok((x, it + 1));
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::Solver(format!("conjugate gradient did not converge in {max_iter} iterations")))
}

fn check_len(values: &[f64], complex: &PlanarComplex) -> Result<()> {
    if values.len() != complex.num_vertices() {
        return Err(Error::FieldSize { expected: complex.num_vertices(), got: values.len() });
    }
    Ok(())
}

fn laplacian_unchecked(values: &[f64], complex: &PlanarComplex, x: usize) -> f64 {
    complex.neighbors(x).iter().map(|&(y, e)| complex.conductance[e] * (values[x] - values[y])).sum()
}

/// Sum of c(x,y)(u(x) - u(y)) over all neighbors y of x.
pub fn laplacian(values: &[f64], complex: &PlanarComplex, x: usize) -> Result<f64> {
    check_len(values, complex)?;
    if x >= complex.num_vertices() {
        return Err(Error::UnknownVertex(x));
    }
    Ok(laplacian_unchecked(values, complex, x))
}

/// Dirichlet energy: sum over edges of c (u(x) - u(y))^2.
pub fn energy(values: &[f64], complex: &PlanarComplex) -> f64 {
    complex
        .edges()
        .iter()
        .zip(&complex.conductance)
        .map(|(&[a, b], &c)| {
            let d = values[a] - values[b];
            c * d * d
        })
        .sum()
}

/// Sorted, deduplicated set of vertex ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VertexSet(Vec<usize>);

impl VertexSet {
    pub fn new(mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        VertexSet(ids)
    }

    pub fn contains(&self, v: usize) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    pub fn ids(&self) -> &[usize] {
        &self.0
    }

    pub fn interior_of(complex: &PlanarComplex) -> Self {
        VertexSet(complex.interior_vertices())
    }

    /// Vertices outside the set adjacent to it.
    pub fn vertex_boundary(&self, complex: &PlanarComplex) -> VertexSet {
        let mut out = Vec::new();
        for &x in &self.0 {
            for &(y, _) in complex.neighbors(x) {
                if !self.contains(y) {
                    out.push(y);
                }
            }
        }
        VertexSet::new(out)
    }
}

fn normal_derivative_unchecked(values: &[f64], complex: &PlanarComplex, f: &VertexSet, x: usize) -> Option<f64> {
    let mut sum = 0.0;
    let mut adjacent = false;
    for &(y, e) in complex.neighbors(x) {
        if f.contains(y) {
            adjacent = true;
            sum += complex.conductance[e] * (values[x] - values[y]);
        }
    }
    adjacent.then_some(sum)
}

/// Flux of u from x into F; x must lie outside F and be adjacent to it.
pub fn normal_derivative(values: &[f64], complex: &PlanarComplex, f: &VertexSet, x: usize) -> Result<f64> {
    check_len(values, complex)?;
    if x >= complex.num_vertices() {
        return Err(Error::UnknownVertex(x));
    }
    if f.contains(x) {
        return Err(Error::NotInVertexBoundary(x));
    }
    normal_derivative_unchecked(values, complex, f, x).ok_or(Error::NotInVertexBoundary(x))
}

/// LHS minus RHS of the first Green identity over F. The edge sum runs over
/// edges with at least one endpoint in F.
pub fn green_identity_residual(u: &[f64], v: &[f64], complex: &PlanarComplex, f: &VertexSet) -> Result<f64> {
    check_len(u, complex)?;
    check_len(v, complex)?;
    let mut lhs = 0.0;
    for (&[a, b], &c) in complex.edges().iter().zip(&complex.conductance) {
        if f.contains(a) || f.contains(b) {
            lhs += c * (u[a] - u[b]) * (v[a] - v[b]);
        }
    }
    let mut rhs = 0.0;
    for &x in f.ids() {
        rhs += laplacian_unchecked(u, complex, x) * v[x];
    }
    for &x in f.vertex_boundary(complex).ids() {
        rhs += normal_derivative_unchecked(u, complex, f, x).unwrap_or(0.0) * v[x];
    }
    Ok(lhs - rhs)
}

/// |sum over S of the normal derivative into F|.
pub fn flux_length(values: &[f64], complex: &PlanarComplex, f: &VertexSet, s: &[usize]) -> Result<f64> {
    let mut sum = 0.0;
    for &x in s {
        sum += normal_derivative(values, complex, f, x)?;
    }
    Ok(sum.abs())
}

/// Signed outflux through the distinct vertices of a boundary cycle, using
/// every incident edge.
pub fn cycle_flux(values: &[f64], complex: &PlanarComplex, cycle: &[usize]) -> f64 {
    let mut vs = cycle.to_vec();
    vs.sort_unstable();
    vs.dedup();
    vs.iter().map(|&x| laplacian_unchecked(values, complex, x)).sum()
}

/// Signed fluxes of the outer cycle followed by each inner cycle.
pub fn boundary_fluxes(values: &[f64], complex: &PlanarComplex) -> Vec<f64> {
    complex.boundary_cycles().map(|c| cycle_flux(values, complex, c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn closed_form_annulus() {
        let a = fixtures::annulus(8);
        let g = solve(&a, 1.0).unwrap();
        for v in 8..16 {
            assert!((g.values[v] - 0.5).abs() < 1e-12);
        }
        assert!((energy(&g.values, &a) - 4.0).abs() < 1e-12);
    }

    // Brute-force oracle: dense Gaussian elimination on the same reduced system.
    fn dense_solve(complex: &PlanarComplex, k: f64) -> Vec<f64> {
        let interior = complex.interior_vertices();
        let n = interior.len();
        let pos = |v: usize| interior.iter().position(|&w| w == v);
        let mut vals = vec![0.0; complex.num_vertices()];
        for &v in complex.outer() {
            vals[v] = k;
        }
        let mut a = vec![vec![0.0; n + 1]; n];
        for (i, &v) in interior.iter().enumerate() {
            for &(w, e) in complex.neighbors(v) {
                let c = complex.conductance[e];
                a[i][i] += c;
                match pos(w) {
                    Some(j) => a[i][j] -= c,
                    None => a[i][n] += c * vals[w],
                }
            }
        }
        for col in 0..n {
            let piv = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
            a.swap(col, piv);
            for row in 0..n {
                if row != col {
                    let f = a[row][col] / a[col][col];
                    let pivot_row = a[col].clone();
                    for (x, p) in a[row].iter_mut().zip(pivot_row).skip(col) {
                        *x -= f * p;
                    }
                }
            }
        }
        for (i, &v) in interior.iter().enumerate() {
            vals[v] = a[i][n] / a[i][i];
        }
        vals
    }

    #[test]
    fn doubled_radial_conductance_matches_dense_solve() {
        let a = fixtures::annulus_with(8, 2.0, 1.0);
        let g = solve(&a, 1.0).unwrap();
        let oracle = dense_solve(&a, 1.0);
        for (x, y) in g.values.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-12);
        }
        // both radial edges doubled: the symmetric middle ring still sits halfway
        assert!((g.values[8] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sparse_matches_dense_on_grid() {
        let c = fixtures::random_grid(&fixtures::GridSpec::new(9, 8, 2, 1));
        let g = solve(&c, 2.0).unwrap();
        let oracle = dense_solve(&c, 2.0);
        for (x, y) in g.values.iter().zip(&oracle) {
            assert!((x - y).abs() < 1e-11);
        }
    }

    #[test]
    fn cg_agrees_with_direct() {
        let c = fixtures::random_grid(&fixtures::GridSpec::new(12, 10, 1, 4));
        let g = solve(&c, 1.0).unwrap();
        let interior = c.interior_vertices();
        let mut slot = vec![usize::MAX; c.num_vertices()];
        for (i, &v) in interior.iter().enumerate() {
            slot[v] = i;
        }
        let mut tri = TriMat::new((interior.len(), interior.len()));
        let mut rhs = vec![0.0; interior.len()];
        for (i, &v) in interior.iter().enumerate() {
            for &(w, e) in c.neighbors(v) {
                let cc = c.conductance[e];
                tri.add_triplet(i, i, cc);
                if slot[w] == usize::MAX {
                    rhs[i] += cc * g.values[w];
                } else {
                    tri.add_triplet(i, slot[w], -cc);
                }
            }
        }
        let (x, _) = conjugate_gradient(&tri.to_csc(), &rhs, 1e-13, 10_000).unwrap();
        for (i, &v) in interior.iter().enumerate() {
            assert!((x[i] - g.values[v]).abs() < 1e-9);
        }
    }
}
