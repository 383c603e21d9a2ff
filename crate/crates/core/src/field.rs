//! Magnetic fields and potentials: curl, Poincare gauge, the minimum of
//! `b = |B|`, the invariant constants and the pointwise symplectic frame.

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{diff_expr, EvalError, Expr};
use crate::quad::gauss_legendre_unit;

pub type Vec3 = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("field is not divergence free: |div B| = {max_div:e} at {at:?}")]
    NonSolenoidal { max_div: f64, at: Vec3 },
    #[error("Gauss-Legendre quadrature did not reach {tol:e} (last difference {diff:e})")]
    Quadrature { tol: f64, diff: f64 },
    #[error("minimize_b: Newton did not converge in {iterations} iterations (|grad b| = {grad:e})")]
    NonConvergence { iterations: usize, grad: f64 },
    #[error("minimize_b: degenerate minimum, smallest Hessian eigenvalue {min_eig:e} at {q0:?}")]
    DegenerateMinimum { q0: Vec3, min_eig: f64 },
    #[error("field vanishes at {0:?}")]
    ZeroField(Vec3),
    #[error("Hess b(B, B) = {0:e} is not positive")]
    NonPositiveCurvature(f64),
    #[error("Hess b has non-positive determinant {0:e}")]
    NonPositiveDeterminant(f64),
}

pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

fn mat_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [dot(&m[0], v), dot(&m[1], v), dot(&m[2], v)]
}

fn mat_t_vec(m: &Mat3, v: &Vec3) -> Vec3 {
    [
        m[0][0] * v[0] + m[1][0] * v[1] + m[2][0] * v[2],
        m[0][1] * v[0] + m[1][1] * v[1] + m[2][1] * v[2],
        m[0][2] * v[0] + m[1][2] * v[1] + m[2][2] * v[2],
    ]
}

/// Curl of a potential from its Jacobian `J[i][k] = d_k A_i`.
pub fn curl_of_jacobian(j: &Mat3) -> Vec3 {
    [j[2][1] - j[1][2], j[0][2] - j[2][0], j[1][0] - j[0][1]]
}

/// Rotation `R` with `R bhat = e3`: Rodrigues about `bhat x e3`; a half turn
/// about `e1` when `bhat = -e3`.
pub fn rotation_to_e3(bhat: &Vec3) -> Mat3 {
    let e3 = [0.0, 0.0, 1.0];
    let axis = cross(bhat, &e3);
    let s = norm(&axis);
    let c = bhat[2];
    if s < 1e-15 {
        return if c > 0.0 {
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        } else {
            [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]
        };
    }
    let k = [axis[0] / s, axis[1] / s, axis[2] / s];
    let mut r = [[0.0; 3]; 3];
    let kx = [[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]];
    for i in 0..3 {
        for j in 0..3 {
            let kk = k[i] * k[j];
            r[i][j] = c * (i == j) as u8 as f64 + s * kx[i][j] + (1.0 - c) * kk;
        }
    }
    r
}

// ---------------------------------------------------------------- field

#[derive(Clone, Debug)]
pub struct MagneticField {
    b: [Expr; 3],
    jac: [[Expr; 3]; 3],
    strength: Expr,
    grad: [Expr; 3],
    hess: [[Expr; 3]; 3],
    div: Expr,
}

impl MagneticField {
    pub fn new(b: [Expr; 3]) -> Self {
        let jac: [[Expr; 3]; 3] = std::array::from_fn(|i| std::array::from_fn(|k| diff_expr(&b[i], k)));
        let sq = Expr::add(
            Expr::add(Expr::pow(b[0].clone(), 2), Expr::pow(b[1].clone(), 2)),
            Expr::pow(b[2].clone(), 2),
        );
        let strength = Expr::sqrt(sq);
        let grad: [Expr; 3] = std::array::from_fn(|k| diff_expr(&strength, k));
        let hess = std::array::from_fn(|i| std::array::from_fn(|k| diff_expr(&grad[i], k)));
        let div = Expr::add(Expr::add(jac[0][0].clone(), jac[1][1].clone()), jac[2][2].clone());
        MagneticField { b, jac, strength, grad, hess, div }
    }

    pub fn components(&self) -> &[Expr; 3] {
        &self.b
    }

    pub fn strength_expr(&self) -> &Expr {
        &self.strength
    }

    pub fn divergence_expr(&self) -> &Expr {
        &self.div
    }

    pub fn value(&self, q: &Vec3) -> Result<Vec3, EvalError> {
        Ok([self.b[0].eval(q)?, self.b[1].eval(q)?, self.b[2].eval(q)?])
    }

    /// `J[i][k] = d_k B_i`.
    pub fn jacobian(&self, q: &Vec3) -> Result<Mat3, EvalError> {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                m[i][k] = self.jac[i][k].eval(q)?;
            }
        }
        Ok(m)
    }

    pub fn strength(&self, q: &Vec3) -> Result<f64, EvalError> {
        Ok(norm(&self.value(q)?))
    }

    pub fn gradient(&self, q: &Vec3) -> Result<Vec3, EvalError> {
        Ok([self.grad[0].eval(q)?, self.grad[1].eval(q)?, self.grad[2].eval(q)?])
    }

    pub fn hessian(&self, q: &Vec3) -> Result<Mat3, EvalError> {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                m[i][k] = self.hess[i][k].eval(q)?;
            }
        }
        Ok(m)
    }

    pub fn divergence(&self, q: &Vec3) -> Result<f64, EvalError> {
        self.div.eval(q)
    }

    /// Largest `|div B|` over `samples` deterministic points of the cube `center +- half_width`.
    pub fn max_divergence(&self, center: &Vec3, half_width: f64, samples: usize) -> Result<(f64, Vec3), EvalError> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6469_76);
        let mut worst = (0.0, *center);
        for _ in 0..samples {
            let q: Vec3 = std::array::from_fn(|k| center[k] + half_width * rng.random_range(-1.0..1.0));
            let d = self.divergence(&q)?.abs();
            if d > worst.0 {
                worst = (d, q);
            }
        }
        Ok(worst)
    }
}

// ---------------------------------------------------------------- potentials

/// Anything that can report `A(q)` and its Jacobian `J[i][k] = d_k A_i`.
pub trait Potential: Sync {
    fn value(&self, q: &Vec3) -> Result<Vec3, FieldError>;
    fn jacobian(&self, q: &Vec3) -> Result<Mat3, FieldError>;

    fn field(&self, q: &Vec3) -> Result<Vec3, FieldError> {
        Ok(curl_of_jacobian(&self.jacobian(q)?))
    }
}

/// Symbolic potential with an optional constant gauge offset subtracted.
#[derive(Clone, Debug)]
pub struct VectorPotential {
    a: [Expr; 3],
    jac: [[Expr; 3]; 3],
    offset: Vec3,
}

impl VectorPotential {
    pub fn new(a: [Expr; 3]) -> Self {
        let jac = std::array::from_fn(|i| std::array::from_fn(|k| diff_expr(&a[i], k)));
        VectorPotential { a, jac, offset: [0.0; 3] }
    }

    pub fn components(&self) -> &[Expr; 3] {
        &self.a
    }

    pub fn offset(&self) -> Vec3 {
        self.offset
    }

    /// Same potential shifted by a constant so that `A(q0) = 0`.
    pub fn normalized_at(&self, q0: &Vec3) -> Result<Self, EvalError> {
        let mut out = self.clone();
        out.offset = [0.0; 3];
        for k in 0..3 {
            out.offset[k] = self.a[k].eval(q0)?;
        }
        Ok(out)
    }

    pub fn curl(&self) -> MagneticField {
        curl(self)
    }
}

impl Potential for VectorPotential {
    fn value(&self, q: &Vec3) -> Result<Vec3, FieldError> {
        let mut v = [0.0; 3];
        for k in 0..3 {
            v[k] = self.a[k].eval(q)? - self.offset[k];
        }
        Ok(v)
    }

    fn jacobian(&self, q: &Vec3) -> Result<Mat3, FieldError> {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for k in 0..3 {
                m[i][k] = self.jac[i][k].eval(q)?;
            }
        }
        Ok(m)
    }
}

pub fn curl(a: &VectorPotential) -> MagneticField {
    let d = |i: usize, k: usize| diff_expr(&a.a[i], k);
    MagneticField::new([
        Expr::sub(d(2, 1), d(1, 2)),
        Expr::sub(d(0, 2), d(2, 0)),
        Expr::sub(d(1, 0), d(0, 1)),
    ])
}

/// Homotopy potential `A(q) = int_0^1 t B(c + t(q - c)) x (q - c) dt`, with
/// `A(c) = 0` and `curl A = B` whenever `div B = 0`.
#[derive(Clone, Debug)]
pub struct PoincarePotential {
    field: MagneticField,
    center: Vec3,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

pub const POINCARE_TOL: f64 = 1e-10;
const POINCARE_ORDERS: [usize; 9] = [4, 6, 8, 12, 16, 24, 32, 48, 64];

/// Builds the Poincare potential centered at `center`. The quadrature order
/// is the smallest one whose value agrees with the next order to
/// `POINCARE_TOL` on sample points of the cube `center +- half_width`.
pub fn poincare_potential(b: &MagneticField, center: Vec3, half_width: f64) -> Result<PoincarePotential, FieldError> {
    let (max_div, at) = b.max_divergence(&center, half_width, 100)?;
    if max_div > 1e-8 {
        return Err(FieldError::NonSolenoidal { max_div, at });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x706f_696e);
    let mut probes: Vec<Vec3> = Vec::new();
    for corner in 0..8 {
        probes.push(std::array::from_fn(|k| center[k] + if corner >> k & 1 == 1 { half_width } else { -half_width }));
    }
    for _ in 0..24 {
        probes.push(std::array::from_fn(|k| center[k] + half_width * rng.random_range(-1.0..1.0)));
    }
    let mut last_diff = f64::INFINITY;
    for w in POINCARE_ORDERS.windows(2) {
        let lo = PoincarePotential::with_order(b.clone(), center, w[0]);
        let hi = PoincarePotential::with_order(b.clone(), center, w[1]);
        let mut diff: f64 = 0.0;
        for q in &probes {
            let (a, c) = (lo.value(q)?, hi.value(q)?);
            let (ja, jc) = (lo.jacobian(q)?, hi.jacobian(q)?);
            for k in 0..3 {
                diff = diff.max((a[k] - c[k]).abs());
                for l in 0..3 {
                    diff = diff.max((ja[k][l] - jc[k][l]).abs());
                }
            }
        }
        if diff < POINCARE_TOL {
            return Ok(hi);
        }
        last_diff = diff;
    }
    Err(FieldError::Quadrature { tol: POINCARE_TOL, diff: last_diff })
}

impl PoincarePotential {
    pub fn with_order(field: MagneticField, center: Vec3, order: usize) -> Self {
        let (nodes, weights) = gauss_legendre_unit(order);
        PoincarePotential { field, center, nodes, weights }
    }

    pub fn order(&self) -> usize {
        self.nodes.len()
    }

    pub fn center(&self) -> Vec3 {
        self.center
    }

    pub fn magnetic_field(&self) -> &MagneticField {
        &self.field
    }
}

impl Potential for PoincarePotential {
    fn value(&self, q: &Vec3) -> Result<Vec3, FieldError> {
        let r: Vec3 = std::array::from_fn(|k| q[k] - self.center[k]);
        let mut a = [0.0; 3];
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let p: Vec3 = std::array::from_fn(|k| self.center[k] + t * r[k]);
            let bxr = cross(&self.field.value(&p)?, &r);
            for k in 0..3 {
                a[k] += w * t * bxr[k];
            }
        }
        Ok(a)
    }

    fn jacobian(&self, q: &Vec3) -> Result<Mat3, FieldError> {
        let r: Vec3 = std::array::from_fn(|k| q[k] - self.center[k]);
        let mut j = [[0.0; 3]; 3];
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            let p: Vec3 = std::array::from_fn(|k| self.center[k] + t * r[k]);
            let bv = self.field.value(&p)?;
            let db = self.field.jacobian(&p)?;
            for k in 0..3 {
                let dbk = [db[0][k], db[1][k], db[2][k]];
                let mut ek = [0.0; 3];
                ek[k] = 1.0;
                let t1 = cross(&dbk, &r);
                let t2 = cross(&bv, &ek);
                for i in 0..3 {
                    j[i][k] += w * t * (t * t1[i] + t2[i]);
                }
            }
        }
        Ok(j)
    }
}

// ---------------------------------------------------------------- minimum of b

#[derive(Clone, Debug)]
pub struct GridSearch {
    pub half_width: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Optional brute-force search around the seed used when Newton fails.
    pub grid_fallback: Option<GridSearch>,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions { max_iter: 100, grad_tol: 1e-12, grid_fallback: None }
    }
}

#[derive(Clone, Debug)]
pub struct Minimum {
    pub q0: Vec3,
    pub b0: f64,
    pub hessian: Mat3,
    pub iterations: usize,
}

fn to_na(m: &Mat3) -> Matrix3<f64> {
    Matrix3::from_fn(|i, j| m[i][j])
}

pub fn minimize_b(b: &MagneticField, seed: Vec3) -> Result<Minimum, FieldError> {
    minimize_b_with(b, seed, &MinimizeOptions::default())
}

pub fn minimize_b_with(b: &MagneticField, seed: Vec3, opts: &MinimizeOptions) -> Result<Minimum, FieldError> {
    match newton_min(b, seed, opts) {
        Err(FieldError::NonConvergence { .. }) if opts.grid_fallback.is_some() => {
            let g = opts.grid_fallback.as_ref().expect("checked");
            let (start, _) = grid_minimum(b, seed, g.half_width, g.step)?;
            newton_min(b, start, opts)
        }
        r => r,
    }
}

fn newton_min(b: &MagneticField, seed: Vec3, opts: &MinimizeOptions) -> Result<Minimum, FieldError> {
    let mut q = seed;
    let mut grad_norm = f64::INFINITY;
    for it in 0..=opts.max_iter {
        let g = b.gradient(&q)?;
        grad_norm = norm(&g);
        let h = b.hessian(&q)?;
        if grad_norm < opts.grad_tol {
            let b0 = b.strength(&q)?;
            let eig = SymmetricEigen::new(to_na(&h)).eigenvalues;
            let min_eig = eig.min();
            if !(min_eig > 1e-10 * b0) {
                return Err(FieldError::DegenerateMinimum { q0: q, min_eig });
            }
            return Ok(Minimum { q0: q, b0, hessian: h, iterations: it });
        }
        if it == opts.max_iter {
            break;
        }
        let hn = to_na(&h);
        let gv = Vector3::from(g);
        let step = match hn.cholesky() {
            Some(ch) => -ch.solve(&gv),
            None => -gv,
        };
        let f0 = b.strength(&q)?;
        let slope = gv.dot(&step);
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec3 = std::array::from_fn(|k| q[k] + alpha * step[k]);
            match b.strength(&trial) {
                Ok(f) if f <= f0 + 1e-4 * alpha * slope || grad_norm < 1e-6 => {
                    q = trial;
                    accepted = true;
                    break;
                }
                _ => alpha *= 0.5,
            }
        }
        if !accepted {
            break;
        }
    }
    Err(FieldError::NonConvergence { iterations: opts.max_iter, grad: grad_norm })
}

/// Brute-force minimum of `b` on the grid `center + step * Z^3` inside the cube.
pub fn grid_minimum(b: &MagneticField, center: Vec3, half_width: f64, step: f64) -> Result<(Vec3, f64), FieldError> {
    let m = (half_width / step).round() as i64;
    let mut best = (center, f64::INFINITY);
    for i in -m..=m {
        for j in -m..=m {
            for k in -m..=m {
                let q = [center[0] + i as f64 * step, center[1] + j as f64 * step, center[2] + k as f64 * step];
                if let Ok(v) = b.strength(&q) {
                    if v < best.1 {
                        best = (q, v);
                    }
                }
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------- invariant constants

/// `sigma = Hess b(B,B) / (2 b0^2)` and `theta = sqrt(det Hess b / Hess b(B,B))`.
pub fn invariant_constants_from(hess: &Mat3, bvec: &Vec3) -> Result<(f64, f64), FieldError> {
    let b0 = norm(bvec);
    if b0 == 0.0 {
        return Err(FieldError::ZeroField(*bvec));
    }
    let hbb = dot(bvec, &mat_vec(hess, bvec));
    if !(hbb > 0.0) {
        return Err(FieldError::NonPositiveCurvature(hbb));
    }
    let det = to_na(hess).determinant();
    if !(det > 0.0) {
        return Err(FieldError::NonPositiveDeterminant(det));
    }
    Ok((hbb / (2.0 * b0 * b0), (det / hbb).sqrt()))
}

pub fn invariant_constants(b: &MagneticField, q0: &Vec3) -> Result<(f64, f64), FieldError> {
    invariant_constants_from(&b.hessian(q0)?, &b.value(q0)?)
}

// ---------------------------------------------------------------- frame

/// Phase-space vector `(u, v)` with `u` in q-space and `v` in p-space.
pub type Vec6 = [f64; 6];

#[derive(Clone, Debug)]
pub struct Frame {
    pub q: Vec3,
    pub field: Vec3,
    /// `d_k A_i` at `q`.
    pub jac_a: Mat3,
    pub b: Vec3,
    pub c: Vec3,
    pub d: Vec3,
    /// `f[0..6]` are f1..f6.
    pub f: [Vec6; 6],
}

/// `omega0((u1,u2),(v1,v2)) = <v1,u2> - <v2,u1>`.
pub fn omega0(u: &Vec6, v: &Vec6) -> f64 {
    let (u1, u2) = ([u[0], u[1], u[2]], [u[3], u[4], u[5]]);
    let (v1, v2) = ([v[0], v[1], v[2]], [v[3], v[4], v[5]]);
    dot(&v1, &u2) - dot(&v2, &u1)
}

fn pair(u: &Vec3, v: &Vec3) -> Vec6 {
    [u[0], u[1], u[2], v[0], v[1], v[2]]
}

/// Orthonormal completion of `bhat`: `c` from the coordinate axis least
/// aligned with `bhat` (lowest index on ties), `d = bhat x c`.
pub fn complete_basis(bhat: &Vec3) -> (Vec3, Vec3) {
    let mut k = 0;
    for i in 1..3 {
        if bhat[i].abs() < bhat[k].abs() {
            k = i;
        }
    }
    let mut e = [0.0; 3];
    e[k] = 1.0;
    let proj = dot(&e, bhat);
    let raw: Vec3 = std::array::from_fn(|i| e[i] - proj * bhat[i]);
    let n = norm(&raw);
    let c = [raw[0] / n, raw[1] / n, raw[2] / n];
    (c, cross(bhat, &c))
}

pub fn frame_at(a: &dyn Potential, q: Vec3) -> Result<Frame, FieldError> {
    let jac_a = a.jacobian(&q)?;
    let field = curl_of_jacobian(&jac_a);
    let bn = norm(&field);
    if bn == 0.0 {
        return Err(FieldError::ZeroField(q));
    }
    let b = [field[0] / bn, field[1] / bn, field[2] / bn];
    let (c, d) = complete_basis(&b);
    // Tangent vectors to Sigma: the linearized adapted chart R^T diag(1, 1/|B|, 1).
    let r = rotation_to_e3(&b);
    let col = |j: usize| [r[j][0], r[j][1], r[j][2]];
    let t1 = col(0);
    let t2: Vec3 = col(1).map(|x| x / bn);
    let t3 = b;
    let lift = |u: &Vec3| pair(u, &mat_vec(&jac_a, u));
    let f1 = lift(&t1);
    let f2 = lift(&t2);
    let f3 = lift(&t3);
    let s = bn.powf(-0.5);
    let f4 = pair(&c.map(|x| x * s), &mat_t_vec(&jac_a, &c).map(|x| x * s));
    let f5 = pair(&d.map(|x| x * s), &mat_t_vec(&jac_a, &d).map(|x| x * s));
    let g = pair(&[0.0; 3], &b);
    // Solve omega0(f_j, g + r1 f1 + r2 f2) = 0 for j = 1, 2.
    let w12 = omega0(&f1, &f2);
    let (w1g, w2g) = (omega0(&f1, &g), omega0(&f2, &g));
    let rho1 = w2g / w12;
    let rho2 = -w1g / w12;
    let f6: Vec6 = std::array::from_fn(|i| g[i] + rho1 * f1[i] + rho2 * f2[i]);
    Ok(Frame { q, field, jac_a, b, c, d, f: [f1, f2, f3, f4, f5, f6] })
}

impl Frame {
    /// `T^2 H((U1,V1),(U2,V2)) = 2 <V1 - J U1, V2 - J U2>`.
    pub fn t2h(&self, u: &Vec6, v: &Vec6) -> f64 {
        let ju = mat_vec(&self.jac_a, &[u[0], u[1], u[2]]);
        let jv = mat_vec(&self.jac_a, &[v[0], v[1], v[2]]);
        let du = [u[3] - ju[0], u[4] - ju[1], u[5] - ju[2]];
        let dv = [v[3] - jv[0], v[4] - jv[1], v[5] - jv[2]];
        2.0 * dot(&du, &dv)
    }

    pub fn omega_matrix(&self) -> [[f64; 6]; 6] {
        std::array::from_fn(|i| std::array::from_fn(|j| omega0(&self.f[i], &self.f[j])))
    }

    pub fn t2h_matrix(&self) -> [[f64; 6]; 6] {
        std::array::from_fn(|i| std::array::from_fn(|j| self.t2h(&self.f[i], &self.f[j])))
    }

    /// Largest deviation from the orthonormality, omega0 and T^2 H identities.
    pub fn max_identity_error(&self) -> f64 {
        let bn = norm(&self.field);
        let mut err: f64 = 0.0;
        for (u, v, want) in [
            (&self.b, &self.c, 0.0),
            (&self.b, &self.d, 0.0),
            (&self.c, &self.d, 0.0),
            (&self.b, &self.b, 1.0),
            (&self.c, &self.c, 1.0),
            (&self.d, &self.d, 1.0),
        ] {
            err = err.max((dot(u, v) - want).abs());
        }
        let om = self.omega_matrix();
        let th = self.t2h_matrix();
        for i in 0..6 {
            for j in 0..6 {
                let (a, b) = (i.min(j), i.max(j));
                let sign = if i <= j { 1.0 } else { -1.0 };
                let want_om = match (a, b) {
                    (0, 1) => sign,
                    (3, 4) | (2, 5) => -sign,
                    _ => 0.0,
                };
                err = err.max((om[i][j] - want_om).abs());
                let want_th = match (i, j) {
                    (3, 3) | (4, 4) => 2.0 * bn,
                    (5, 5) => 2.0,
                    _ => 0.0,
                };
                err = err.max((th[i][j] - want_th).abs() / if want_th > 0.0 { want_th } else { 1.0 });
            }
        }
        err
    }
}
