//! Lattice magnetic Laplacian, its lowest eigenvalues, the closed-form model
//! spectrum and the least-squares fit comparing the two.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::constants::ModelConstants;
use crate::field::{FieldError, Potential, Vec3};
use crate::quad::gauss_legendre;

type C = Complex64;

/// Largest accepted matrix dimension `(n-1)^3`.
pub const MAX_DIM: usize = 500_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("grid size n = {0} is below 8")]
    GridTooSmall(usize),
    #[error("hbar must be positive, got {0}")]
    BadHbar(f64),
    #[error("matrix dimension {dim} exceeds the memory guard {MAX_DIM}")]
    MemoryBound { dim: usize },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("requested {k} eigenvalues of a {dim}-dimensional operator")]
    TooManyEigenvalues { k: usize, dim: usize },
    #[error("Lanczos did not converge after {restarts} restarts (worst residual {residual:e})")]
    NoConvergence { restarts: usize, residual: f64 },
    #[error("reported pair {index} has residual {residual:e} above the bound {bound:e}")]
    ResidualCheck { index: usize, residual: f64, bound: f64 },
    #[error("fit needs at least 3 distinct hbar values with 2 eigenvalues each, got {0}")]
    TooFewPoints(usize),
    #[error("design matrix condition number {0:e} is too large")]
    IllConditioned(f64),
}

// ---------------------------------------------------------------- box

/// Axis-aligned box `center +- lengths/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridBox {
    pub center: Vec3,
    pub lengths: Vec3,
}

impl GridBox {
    pub fn cube(center: Vec3, side: f64) -> Self {
        GridBox { center, lengths: [side; 3] }
    }

    pub fn longest_side(&self) -> f64 {
        self.lengths.iter().cloned().fold(0.0, f64::max)
    }
}

/// Box sizing rules around the minimum of `b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BoxRule {
    /// Cube of half-width `c (hbar / nu2_0)^{1/4}`.
    Cube { c: f64 },
    /// Half-width `ct sqrt(hbar / b0)` across the field and `cz (hbar / sigma)^{1/4}`
    /// along the coordinate axis closest to `B(q0)`.
    Spheroid { ct: f64, cz: f64 },
}

impl Default for BoxRule {
    fn default() -> Self {
        BoxRule::Cube { c: 6.0 }
    }
}

impl BoxRule {
    pub const SPHEROID: BoxRule = BoxRule::Spheroid { ct: 6.0, cz: 3.5 };

    pub fn grid_box(&self, c: &ModelConstants<f64>, field_dir: &Vec3, hbar: f64) -> GridBox {
        match *self {
            BoxRule::Cube { c: k } => GridBox::cube(c.q0, 2.0 * k * (hbar / c.nu2_0).powf(0.25)),
            BoxRule::Spheroid { ct, cz } => {
                let along = (0..3).max_by(|&i, &j| field_dir[i].abs().total_cmp(&field_dir[j].abs())).unwrap_or(2);
                let mut lengths = [2.0 * ct * (hbar / c.b0).sqrt(); 3];
                lengths[along] = 2.0 * cz * (hbar / c.sigma).powf(0.25);
                GridBox { center: c.q0, lengths }
            }
        }
    }
}

// ---------------------------------------------------------------- operator

/// Hermitian operator acting on complex vectors.
pub trait HermitianOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C], y: &mut [C]);
}

/// `sum_j D_j^* D_j` on the interior nodes of a box with Dirichlet walls, where
/// `D_j` is the forward difference along axis `j` carrying the link phase
/// `exp(-(i/hbar) int A_j ds)`, scaled by `hbar / h_j`.
#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    pub n: usize,
    pub grid: GridBox,
    pub hbar: f64,
    spacing: Vec3,
    coef: Vec3,
    diag: f64,
    /// `links[j][idx]` joins node `idx` to its neighbor along axis `j`.
    links: [Vec<C>; 3],
}

/// Gauss-Legendre points per link integral; exact for `A` of degree 7 along the link.
const LINK_POINTS: usize = 4;

pub fn assemble_magnetic_laplacian(a: &dyn Potential, hbar: f64, grid: GridBox, n: usize) -> Result<DiscreteOperator, SpectralError> {
    if n < 8 {
        return Err(SpectralError::GridTooSmall(n));
    }
    if !(hbar > 0.0) {
        return Err(SpectralError::BadHbar(hbar));
    }
    let m = n - 1;
    let dim = m * m * m;
    if dim > MAX_DIM {
        return Err(SpectralError::MemoryBound { dim });
    }
    let spacing: Vec3 = std::array::from_fn(|j| grid.lengths[j] / n as f64);
    let coef: Vec3 = std::array::from_fn(|j| hbar * hbar / (spacing[j] * spacing[j]));
    let lo: Vec3 = std::array::from_fn(|j| grid.center[j] - grid.lengths[j] / 2.0);
    let (gx, gw) = gauss_legendre(LINK_POINTS);
    let mut links: [Vec<C>; 3] = std::array::from_fn(|_| vec![C::new(0.0, 0.0); dim]);
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                let idx = (i * m + j) * m + k;
                let ijk = [i, j, k];
                let node: Vec3 = std::array::from_fn(|d| lo[d] + spacing[d] * (ijk[d] + 1) as f64);
                for ax in 0..3 {
                    if ijk[ax] + 1 >= m {
                        continue;
                    }
                    let h = spacing[ax];
                    let mut integral = 0.0;
                    for (x, w) in gx.iter().zip(&gw) {
                        let mut p = node;
                        p[ax] += 0.5 * h * (1.0 + x);
                        integral += 0.5 * h * w * a.value(&p)?[ax];
                    }
                    links[ax][idx] = C::from_polar(1.0, -integral / hbar);
                }
            }
        }
    }
    let diag = 2.0 * coef.iter().sum::<f64>();
    Ok(DiscreteOperator { n, grid, hbar, spacing, coef, diag, links })
}

impl DiscreteOperator {
    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    fn side(&self) -> usize {
        self.n - 1
    }

    /// Coordinates of the interior node with linear index `idx`.
    pub fn node(&self, idx: usize) -> Vec3 {
        let m = self.side();
        let ijk = [idx / (m * m), (idx / m) % m, idx % m];
        std::array::from_fn(|d| self.grid.center[d] - self.grid.lengths[d] / 2.0 + self.spacing[d] * (ijk[d] + 1) as f64)
    }

    /// Off-diagonal entry `H[idx, idx + e_ax]`, or `None` at the wall.
    pub fn link_entry(&self, ax: usize, idx: usize) -> Option<C> {
        let m = self.side();
        let pos = [idx / (m * m), (idx / m) % m, idx % m][ax];
        (pos + 1 < m).then(|| -self.coef[ax] * self.links[ax][idx])
    }

    pub fn diagonal(&self) -> f64 {
        self.diag
    }

    /// `max |<x, H y> - conj <y, H x>|` over a few random pairs, relative to `|H| |x| |y|`.
    pub fn hermiticity_defect(&self, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dim = self.dim();
        let scale = self.diag * 2.0;
        let mut worst: f64 = 0.0;
        for _ in 0..3 {
            let x = random_vector(&mut rng, dim);
            let y = random_vector(&mut rng, dim);
            let (mut hx, mut hy) = (vec![C::new(0.0, 0.0); dim], vec![C::new(0.0, 0.0); dim]);
            self.apply(&x, &mut hx);
            self.apply(&y, &mut hy);
            let d = (dot(&x, &hy) - dot(&y, &hx).conj()).norm();
            worst = worst.max(d / (scale * norm(&x) * norm(&y)));
        }
        worst
    }
}

impl HermitianOperator for DiscreteOperator {
    fn dim(&self) -> usize {
        let m = self.side();
        m * m * m
    }

    fn apply(&self, x: &[C], y: &mut [C]) {
        let m = self.side();
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi = xi * self.diag;
        }
        let strides = [m * m, m, 1];
        for ax in 0..3 {
            let s = strides[ax];
            let c = self.coef[ax];
            let link = &self.links[ax];
            for idx in 0..x.len() {
                let pos = match ax {
                    0 => idx / (m * m),
                    1 => (idx / m) % m,
                    _ => idx % m,
                };
                if pos + 1 >= m {
                    continue;
                }
                let t = link[idx] * c;
                y[idx] -= t * x[idx + s];
                y[idx + s] -= t.conj() * x[idx];
            }
        }
    }
}

fn dot(a: &[C], b: &[C]) -> C {
    a.iter().zip(b).fold(C::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

fn norm(a: &[C]) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(alpha: C, x: &[C], y: &mut [C]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn random_vector(rng: &mut ChaCha8Rng, dim: usize) -> Vec<C> {
    (0..dim).map(|_| C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
}

// ---------------------------------------------------------------- Lanczos

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LanczosOptions {
    /// Residual bound relative to the largest Ritz value seen.
    pub tol: f64,
    /// Krylov basis size per cycle; 0 picks `max(2k + 20, 40)`.
    pub basis: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { tol: 1e-9, basis: 0, max_restarts: 2000, seed: 1 }
    }
}

#[derive(Clone, Debug)]
pub struct Eigenpairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<C>>,
    /// `|H v - lambda v|` for unit `v`.
    pub residuals: Vec<f64>,
    pub matvecs: usize,
    pub norm_estimate: f64,
}

struct Cycle {
    values: Vec<f64>,
    vectors: Vec<Vec<C>>,
    matvecs: usize,
    norm_estimate: f64,
}

/// Thick-restart Lanczos for the `nev` lowest eigenpairs of `op` restricted to
/// the orthogonal complement of `locked`. Full reorthogonalization with the
/// DGKS correction keeps the basis orthonormal to rounding.
fn thick_restart(op: &dyn HermitianOperator, nev: usize, locked: &[Vec<C>], opts: &LanczosOptions, rng: &mut ChaCha8Rng) -> Result<Cycle, SpectralError> {
    let dim = op.dim();
    let free = dim - locked.len();
    let mut m = if opts.basis == 0 { (2 * nev + 20).max(40) } else { opts.basis };
    m = m.min(free);
    let keep = (nev + (m - nev) / 2).min(m.saturating_sub(1)).max(nev.min(m));
    let mut basis: Vec<Vec<C>> = Vec::with_capacity(m + 1);
    let mut v = random_vector(rng, dim);
    orthogonalize(&mut v, locked, &[]);
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    basis.push(v);
    let mut t = DMatrix::<f64>::zeros(m, m);
    let mut start = 0;
    let mut matvecs = 0;
    let mut norm_estimate: f64 = 0.0;
    let mut worst = f64::INFINITY;
    let mut w = vec![C::new(0.0, 0.0); dim];
    for _ in 0..opts.max_restarts {
        let mut beta = 0.0;
        let mut j = start;
        while j < m {
            op.apply(&basis[j], &mut w);
            matvecs += 1;
            let coeffs = orthogonalize(&mut w, locked, &basis[..=j]);
            for (i, c) in coeffs.iter().enumerate() {
                t[(i, j)] = c.re;
                t[(j, i)] = c.re;
            }
            beta = norm(&w);
            if beta <= f64::EPSILON * norm_estimate.max(t[(j, j)].abs()) {
                // invariant subspace: continue with a fresh direction
                let mut r = random_vector(rng, dim);
                orthogonalize(&mut r, locked, &basis[..=j]);
                let nr = norm(&r);
                w = r.into_iter().map(|x| x / nr).collect();
                beta = 0.0;
            } else {
                w.iter_mut().for_each(|x| *x /= beta);
            }
            if j + 1 < m {
                t[(j + 1, j)] = beta;
                t[(j, j + 1)] = beta;
                basis.push(w.clone());
            }
            j += 1;
        }
        let eig = SymmetricEigen::new(t.clone());
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        norm_estimate = norm_estimate.max(eig.eigenvalues.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())));
        let bound = opts.tol * norm_estimate;
        let res: Vec<f64> = order.iter().map(|&c| (beta * eig.eigenvectors[(m - 1, c)]).abs()).collect();
        worst = res[..nev].iter().cloned().fold(0.0, f64::max);
        let done = worst <= bound || m == free;
        let kept = if done { nev } else { keep };
        let ritz: Vec<Vec<C>> = order[..kept]
            .iter()
            .map(|&c| {
                let mut y = vec![C::new(0.0, 0.0); dim];
                for (i, b) in basis.iter().enumerate().take(m) {
                    axpy(C::new(eig.eigenvectors[(i, c)], 0.0), b, &mut y);
                }
                y
            })
            .collect();
        if done {
            return Ok(Cycle { values: order[..nev].iter().map(|&c| eig.eigenvalues[c]).collect(), vectors: ritz, matvecs, norm_estimate });
        }
        // restart with the kept Ritz vectors plus the last residual direction
        t.fill(0.0);
        for (i, &c) in order[..kept].iter().enumerate() {
            t[(i, i)] = eig.eigenvalues[c];
            let s = beta * eig.eigenvectors[(m - 1, c)];
            t[(i, kept)] = s;
            t[(kept, i)] = s;
        }
        basis = ritz;
        basis.push(w.clone());
        start = kept;
    }
    Err(SpectralError::NoConvergence { restarts: opts.max_restarts, residual: worst })
}

/// Removes the components along `locked` and `basis` (two passes at most,
/// DGKS criterion) and returns the accumulated `basis` coefficients.
fn orthogonalize(w: &mut [C], locked: &[Vec<C>], basis: &[Vec<C>]) -> Vec<C> {
    let mut coeffs = vec![C::new(0.0, 0.0); basis.len()];
    for pass in 0..2 {
        let before = norm(w);
        for u in locked {
            let c = dot(u, w);
            axpy(-c, u, w);
        }
        for (i, u) in basis.iter().enumerate() {
            let c = dot(u, w);
            coeffs[i] += c;
            axpy(-c, u, w);
        }
        if pass == 0 && norm(w) > 0.717 * before {
            break;
        }
    }
    coeffs
}

/// The `k` lowest eigenpairs. After the first thick-restart run, converged
/// pairs are locked and a deflated run checks that no eigenvalue was missed
/// below the `k`-th (degenerate levels are only reached this way).
pub fn lowest_eigenvalues(op: &dyn HermitianOperator, k: usize, opts: &LanczosOptions) -> Result<Eigenpairs, SpectralError> {
    let dim = op.dim();
    if k == 0 || k >= dim {
        return Err(SpectralError::TooManyEigenvalues { k, dim });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut pairs: Vec<(f64, Vec<C>)> = Vec::new();
    let mut matvecs = 0;
    let mut norm_estimate: f64 = 0.0;
    loop {
        let locked: Vec<Vec<C>> = pairs.iter().map(|p| p.1.clone()).collect();
        if locked.len() + 1 >= dim {
            break;
        }
        let nev = if pairs.is_empty() { k } else { 1 };
        let cycle = thick_restart(op, nev, &locked, opts, &mut rng)?;
        matvecs += cycle.matvecs;
        norm_estimate = norm_estimate.max(cycle.norm_estimate);
        let slack = opts.tol * norm_estimate;
        let kth = pairs.get(k.saturating_sub(1)).map(|p| p.0);
        let found_lower = match kth {
            Some(l) => cycle.values[0] < l - slack,
            None => true,
        };
        if !found_lower {
            break;
        }
        pairs.extend(cycle.values.into_iter().zip(cycle.vectors));
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.len() > k + 16 {
            break;
        }
    }
    pairs.truncate(k);
    let bound = 10.0 * opts.tol * norm_estimate;
    let mut residuals = Vec::with_capacity(k);
    let mut hv = vec![C::new(0.0, 0.0); dim];
    for (index, (lambda, v)) in pairs.iter().enumerate() {
        op.apply(v, &mut hv);
        matvecs += 1;
        axpy(C::new(-lambda, 0.0), v, &mut hv);
        let r = norm(&hv) / norm(v);
        if r > bound {
            return Err(SpectralError::ResidualCheck { index, residual: r, bound });
        }
        residuals.push(r);
    }
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(Eigenpairs { values, vectors, residuals, matvecs, norm_estimate })
}

// ---------------------------------------------------------------- results

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralResult {
    pub hbar: f64,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub n: usize,
    pub grid: GridBox,
}

impl SpectralResult {
    pub fn from_pairs(op: &DiscreteOperator, pairs: &Eigenpairs) -> Self {
        SpectralResult { hbar: op.hbar, eigenvalues: pairs.values.clone(), residuals: pairs.residuals.clone(), n: op.n, grid: op.grid }
    }
}

/// Assembles and solves in one step.
pub fn solve(a: &dyn Potential, hbar: f64, grid: GridBox, n: usize, k: usize, opts: &LanczosOptions) -> Result<SpectralResult, SpectralError> {
    let op = assemble_magnetic_laplacian(a, hbar, grid, n)?;
    let pairs = lowest_eigenvalues(&op, k, opts)?;
    Ok(SpectralResult::from_pairs(&op, &pairs))
}

/// Removes the `O(h^2)` discretization error from two solves on the same box.
/// The residual column keeps the larger of the two residuals.
pub fn richardson(coarse: &SpectralResult, fine: &SpectralResult) -> SpectralResult {
    let (nc, nf) = (coarse.n as f64, fine.n as f64);
    let w = nc * nc / (nf * nf - nc * nc);
    SpectralResult {
        hbar: fine.hbar,
        eigenvalues: fine.eigenvalues.iter().zip(&coarse.eigenvalues).map(|(f, c)| f + (f - c) * w).collect(),
        residuals: fine.residuals.iter().zip(&coarse.residuals).map(|(a, b)| a.max(*b)).collect(),
        n: fine.n,
        grid: fine.grid,
    }
}

/// CSV with header `hbar,m,lambda,residual,n,L`; `L` is the longest box side.
pub fn results_to_csv(results: &[SpectralResult]) -> String {
    let mut s = String::from("hbar,m,lambda,residual,n,L\n");
    for r in results {
        for (m, (l, res)) in r.eigenvalues.iter().zip(&r.residuals).enumerate() {
            let _ = writeln!(s, "{},{},{:.15e},{:.3e},{},{}", r.hbar, m + 1, l, res, r.n, r.grid.longest_side());
        }
    }
    s
}

// ---------------------------------------------------------------- model and fit

/// `lambda_m = hbar b0 + sigma^{1/2} hbar^{3/2} + (theta (m - 1/2) - zeta / (2 theta)) hbar^2`, `m = 1..=m_max`.
pub fn model_spectrum<T: Float>(c: &ModelConstants<T>, hbar: T, m_max: usize) -> Vec<T> {
    let half = T::from(0.5).unwrap();
    let two = T::from(2.0).unwrap();
    let base = hbar * c.b0 + c.sigma.sqrt() * hbar * hbar.sqrt() - c.zeta / (two * c.theta) * hbar * hbar;
    (1..=m_max).map(|m| base + c.theta * (T::from(m).unwrap() - half) * hbar * hbar).collect()
}

/// Least-squares fit of `lambda_1` on `(hbar, hbar^{3/2}, hbar^2)` and the mean
/// of `(lambda_2 - lambda_1) / hbar^2`.
#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub b0: f64,
    pub sigma_sqrt: f64,
    /// Coefficient of `hbar^2` in `lambda_1`, the model's `theta/2 - zeta/(2 theta)`.
    pub c2: f64,
    /// Standard errors of `(b0, sigma_sqrt, c2)`; NaN without spare degrees of freedom.
    pub std_errors: [f64; 3],
    pub residuals: Vec<f64>,
    pub condition: f64,
    pub theta: f64,
    pub gaps: Vec<f64>,
}

/// Condition numbers above this are rejected.
pub const MAX_CONDITION: f64 = 1e6;

pub fn fit_asymptotics(results: &[SpectralResult]) -> Result<FitReport, SpectralError> {
    let pts: Vec<&SpectralResult> = results.iter().filter(|r| r.eigenvalues.len() >= 2).collect();
    let mut hs: Vec<f64> = pts.iter().map(|r| r.hbar).collect();
    hs.sort_by(f64::total_cmp);
    hs.dedup();
    if hs.len() < 3 {
        return Err(SpectralError::TooFewPoints(hs.len()));
    }
    let n = pts.len();
    let a = DMatrix::from_fn(n, 3, |i, j| pts[i].hbar.powf(1.0 + 0.5 * j as f64));
    let y = DVector::from_fn(n, |i, _| pts[i].eigenvalues[0]);
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(SpectralError::IllConditioned(condition));
    }
    let coef = svd.solve(&y, 0.0).map_err(|_| SpectralError::IllConditioned(condition))?;
    let fitted = &a * &coef;
    let residuals: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    let std_errors = if n > 3 {
        let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / (n - 3) as f64;
        let cov = (a.transpose() * &a).try_inverse().ok_or(SpectralError::IllConditioned(condition))?;
        std::array::from_fn(|j| (s2 * cov[(j, j)]).sqrt())
    } else {
        [f64::NAN; 3]
    };
    let gaps: Vec<f64> = pts.iter().map(|r| (r.eigenvalues[1] - r.eigenvalues[0]) / (r.hbar * r.hbar)).collect();
    let theta = gaps.iter().sum::<f64>() / gaps.len() as f64;
    Ok(FitReport { b0: coef[0], sigma_sqrt: coef[1], c2: coef[2], std_errors, residuals, condition, theta, gaps })
}

impl FitReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "b0 {:.10} +- {:.2e}", self.b0, self.std_errors[0]);
        let _ = writeln!(s, "sigma_sqrt {:.10} +- {:.2e}", self.sigma_sqrt, self.std_errors[1]);
        let _ = writeln!(s, "c2 {:.10} +- {:.2e}", self.c2, self.std_errors[2]);
        let _ = writeln!(s, "theta_gap {:.10}", self.theta);
        let _ = writeln!(s, "condition {:.4e}", self.condition);
        for (i, (r, g)) in self.residuals.iter().zip(&self.gaps).enumerate() {
            let _ = writeln!(s, "point {i} residual {r:.3e} gap {g:.10}");
        }
        s
    }
}
