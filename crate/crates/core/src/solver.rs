//! Static solve with Dirichlet elimination, and the classical local path.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Mat, Par};

use crate::assembly::{assemble, dof, AssemblyOptions, GlobalSystem, Loads, Material, Problem};
use crate::error::{Error, Result};
use crate::mesh::ParentMesh;
use crate::shape::Vec2;

/// Largest accepted 1-norm condition estimate of the reduced matrix.
pub const MAX_CONDITION: f64 = 1e14;
/// Largest accepted relative residual.
pub const MAX_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMethod {
    #[default]
    Direct,
    /// Jacobi-preconditioned BiCGSTAB.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub method: SolveMethod,
    /// Relative tolerance of the iterative method.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { method: SolveMethod::Direct, tolerance: 1e-10, max_iterations: 20_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SolveStats {
    pub free_dofs: usize,
    pub factorized: bool,
    pub iterations: usize,
    /// 1-norm condition estimate (direct solves only).
    pub condition_estimate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub displacements: Vec<Vec2>,
    /// ‖K u − F‖₂ / ‖F‖₂ over the free rows.
    pub residual_norm: f64,
    pub stats: SolveStats,
}

impl SolveResult {
    pub fn flat(&self) -> Vec<f64> {
        self.displacements.iter().flat_map(|u| [u[0], u[1]]).collect()
    }
}

struct Reduced {
    a: SparseColMat<usize, f64>,
    rhs: Vec<f64>,
    free: Vec<usize>,
    norm1: f64,
    diag: Vec<f64>,
}

fn reduce(sys: &GlobalSystem) -> Result<(Reduced, Vec<f64>)> {
    let n = sys.n_dofs();
    let mut u = vec![0.0; n];
    let mut map = vec![usize::MAX; n];
    let mut prescribed = vec![false; n];
    for &(d, v) in &sys.dirichlet {
        if d >= n {
            return Err(Error::invalid(format!("prescribed dof {d} is out of range")));
        }
        prescribed[d] = true;
        u[d] = v;
    }
    let free: Vec<usize> = (0..n).filter(|&d| !prescribed[d]).collect();
    for (i, &d) in free.iter().enumerate() {
        map[d] = i;
    }
    let mut trips = Vec::with_capacity(sys.k.nnz());
    let mut rhs = vec![0.0; free.len()];
    let mut col_sums = vec![0.0; free.len()];
    for (i, &d) in free.iter().enumerate() {
        rhs[i] = sys.f[d];
        for (c, v) in sys.k.row(d) {
            if prescribed[c] {
                rhs[i] -= v * u[c];
            } else {
                trips.push(Triplet::new(i, map[c], v));
                col_sums[map[c]] += v.abs();
            }
        }
    }
    let a = SparseColMat::try_new_from_triplets(free.len(), free.len(), &trips)
        .map_err(|e| Error::Numeric(format!("cannot build reduced matrix: {e:?}")))?;
    let norm1 = col_sums.iter().fold(0.0f64, |m, &v| m.max(v));
    let diag = (0..n).map(|d| sys.k.get(d, d)).collect();
    Ok((Reduced { a, rhs, free, norm1, diag }, u))
}

fn col_from(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Hager's estimate of ‖A⁻¹‖₁ from a handful of solves with A and Aᵀ.
fn inverse_norm1_estimate(lu: &faer::sparse::linalg::solvers::Lu<usize, f64>, n: usize) -> f64 {
    let mut x = Col::<f64>::from_fn(n, |_| 1.0 / n as f64);
    let mut est = 0.0;
    for _ in 0..5 {
        let y = lu.solve(&x);
        let new_est: f64 = (0..n).map(|i| y[i].abs()).sum();
        if !new_est.is_finite() {
            return f64::INFINITY;
        }
        let xi = Col::<f64>::from_fn(n, |i| if y[i] >= 0.0 { 1.0 } else { -1.0 });
        let z = lu.solve_transpose(&xi);
        let (jmax, zmax) = (0..n).map(|i| (i, z[i].abs())).fold((0, -1.0), |a, b| if b.1 > a.1 { b } else { a });
        let ztx: f64 = (0..n).map(|i| z[i] * x[i]).sum();
        if new_est <= est || zmax <= ztx {
            est = est.max(new_est);
            break;
        }
        est = new_est;
        x = Col::<f64>::from_fn(n, |i| if i == jmax { 1.0 } else { 0.0 });
    }
    est
}

/// Solve K u = F with Dirichlet rows and columns eliminated.
pub fn solve_static(sys: &GlobalSystem, opts: &SolverOptions) -> Result<SolveResult> {
    let (red, mut u) = reduce(sys)?;
    let nf = red.free.len();
    let mut stats = SolveStats { free_dofs: nf, ..Default::default() };
    if nf > 0 {
        let b = col_from(&red.rhs);
        let x: Vec<f64> = match opts.method {
            SolveMethod::Direct => {
                let lu = red
                    .a
                    .sp_lu()
                    .map_err(|e| Error::Numeric(format!("factorization failed ({e:?}); check the boundary conditions")))?;
                stats.factorized = true;
                let cond = red.norm1 * inverse_norm1_estimate(&lu, nf);
                stats.condition_estimate = cond;
                if !(cond <= MAX_CONDITION) {
                    return Err(Error::Numeric(format!(
                        "stiffness matrix is singular or ill-conditioned (condition estimate {cond:e}); check the boundary conditions"
                    )));
                }
                let x = lu.solve(&b);
                (0..nf).map(|i| x[i]).collect()
            }
            SolveMethod::Iterative => iterative(&red, &b, opts, &mut stats)?,
        };
        for (i, &d) in red.free.iter().enumerate() {
            u[d] = x[i];
        }
    }
    // residual over the free rows of the full system
    let ku = sys.k.matvec(&u);
    let r: Vec<f64> = red.free.iter().map(|&d| ku[d] - sys.f[d]).collect();
    let fnorm = norm2(&red.free.iter().map(|&d| sys.f[d]).collect::<Vec<_>>());
    let rnorm = norm2(&r);
    let residual_norm = if fnorm > 0.0 { rnorm / fnorm } else { rnorm };
    if !(residual_norm < MAX_RESIDUAL) {
        return Err(Error::Numeric(format!("residual {residual_norm:e} exceeds {MAX_RESIDUAL:e}")));
    }
    let displacements = (0..sys.n_dofs() / 2).map(|n| [u[dof(n, 0)], u[dof(n, 1)]]).collect();
    Ok(SolveResult { displacements, residual_norm, stats })
}

fn iterative(red: &Reduced, b: &Col<f64>, opts: &SolverOptions, stats: &mut SolveStats) -> Result<Vec<f64>> {
    use faer::dyn_stack::{MemBuffer, MemStack};
    use faer::matrix_free::bicgstab::{bicgstab, bicgstab_scratch, BicgParams};
    use faer::matrix_free::{IdentityPrecond, InitialGuessStatus};

    let n = red.free.len();
    let mut diag = vec![0.0f64; n];
    for (i, &d) in red.free.iter().enumerate() {
        diag[i] = red.diag[d];
    }
    if diag.iter().any(|d: &f64| *d == 0.0 || !d.is_finite()) {
        return Err(Error::Numeric("zero diagonal entry; check the boundary conditions".into()));
    }
    let trips: Vec<Triplet<usize, usize, f64>> = (0..n).map(|i| Triplet::new(i, i, 1.0 / diag[i])).collect();
    let precond = SparseColMat::try_new_from_triplets(n, n, &trips).map_err(|e| Error::Numeric(format!("{e:?}")))?;
    let mut x = Mat::<f64>::zeros(n, 1);
    let params = BicgParams {
        initial_guess: InitialGuessStatus::MaybeNonZero,
        abs_tolerance: 0.0,
        rel_tolerance: opts.tolerance,
        max_iters: opts.max_iterations,
        ..Default::default()
    };
    let left = IdentityPrecond { dim: n };
    let mut mem = MemBuffer::new(bicgstab_scratch(left, precond.as_ref(), red.a.as_ref(), 1, Par::Seq));
    let info = bicgstab(
        x.as_mut(),
        left,
        precond.as_ref(),
        red.a.as_ref(),
        b.as_mat(),
        params,
        |_| {},
        Par::Seq,
        MemStack::new(&mut mem),
    )
    .map_err(|e| Error::Numeric(format!("iterative solve did not converge: {e:?}")))?;
    stats.iterations = info.iter_count;
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

/// Classical local plane-strain solve on the same mesh.
pub fn solve_local_reference(mesh: &ParentMesh, material: Material, loads: &Loads, opts: &SolverOptions) -> Result<SolveResult> {
    let problem = Problem { mesh, material, nonlocal: None, options: AssemblyOptions::default() };
    solve_static(&assemble(&problem, loads)?, opts)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldMetrics {
    /// ‖u_a − u_b‖₂ / ‖u_b‖₂ in percent.
    pub delta_percent: f64,
    pub max_ux: f64,
    pub max_ux_node: usize,
    pub max_abs_ux: f64,
    pub max_norm: f64,
    pub max_norm_node: usize,
}

/// Peak values of a single field.
pub fn field_peaks(u: &[Vec2]) -> (f64, usize, f64, f64, usize) {
    let mut max_ux = (f64::NEG_INFINITY, 0);
    let mut max_abs: f64 = 0.0;
    let mut max_norm = (0.0, 0);
    for (i, v) in u.iter().enumerate() {
        if v[0] > max_ux.0 {
            max_ux = (v[0], i);
        }
        max_abs = max_abs.max(v[0].abs());
        let n = v[0].hypot(v[1]);
        if n > max_norm.0 {
            max_norm = (n, i);
        }
    }
    (max_ux.0, max_ux.1, max_abs, max_norm.0, max_norm.1)
}

/// Compare field `a` against reference `b` on the same dof layout.
pub fn field_metrics(a: &SolveResult, b: &SolveResult) -> Result<FieldMetrics> {
    if a.displacements.len() != b.displacements.len() {
        return Err(Error::invalid(format!(
            "fields have {} and {} nodes",
            a.displacements.len(),
            b.displacements.len()
        )));
    }
    let mut diff = 0.0;
    let mut base = 0.0;
    for (u, v) in a.displacements.iter().zip(&b.displacements) {
        diff += (u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2);
        base += v[0] * v[0] + v[1] * v[1];
    }
    let delta_percent = if base > 0.0 { 100.0 * (diff / base).sqrt() } else if diff == 0.0 { 0.0 } else { f64::INFINITY };
    let (max_ux, max_ux_node, max_abs_ux, max_norm, max_norm_node) = field_peaks(&a.displacements);
    Ok(FieldMetrics { delta_percent, max_ux, max_ux_node, max_abs_ux, max_norm, max_norm_node })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::CsrMatrix;

    fn one_dof(k: f64, f: f64) -> GlobalSystem {
        let k = CsrMatrix::from_triplet_blocks(2, 2, &[vec![(0, 0, k), (1, 1, 1.0)]]);
        GlobalSystem { m: k.clone(), k, f: vec![f, 0.0], dirichlet: vec![(1, 0.0)] }
    }

    #[test]
    fn single_free_dof() {
        let r = solve_static(&one_dof(4.0, 2.0), &SolverOptions::default()).unwrap();
        assert_eq!(r.displacements[0][0], 0.5);
        let it = SolverOptions { method: SolveMethod::Iterative, ..Default::default() };
        let r = solve_static(&one_dof(4.0, 2.0), &it).unwrap();
        assert!((r.displacements[0][0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn fully_constrained() {
        let mut sys = one_dof(4.0, 2.0);
        sys.dirichlet = vec![(0, 0.25), (1, -1.0)];
        let r = solve_static(&sys, &SolverOptions::default()).unwrap();
        assert_eq!(r.displacements[0], [0.25, -1.0]);
        assert_eq!(r.stats.free_dofs, 0);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let k = CsrMatrix::from_triplet_blocks(2, 2, &[vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)]]);
        let sys = GlobalSystem { m: k.clone(), k, f: vec![1.0, 1.0], dirichlet: vec![] };
        assert!(matches!(solve_static(&sys, &SolverOptions::default()), Err(Error::Numeric(_))));
    }

    #[test]
    fn metrics_examples() {
        let a = SolveResult { displacements: vec![[1.0, 0.0], [0.0, 2.0]], residual_norm: 0.0, stats: SolveStats::default() };
        let b = SolveResult { displacements: vec![[2.0, 0.0], [0.0, 4.0]], ..a.clone() };
        assert_eq!(field_metrics(&a, &a).unwrap().delta_percent, 0.0);
        assert!((field_metrics(&a, &b).unwrap().delta_percent - 50.0).abs() < 1e-12);
    }
}
