//! Adapted coordinates on the characteristic manifold, as jets at the
//! minimum of `b`: field-line straightening `phi`, area flattening `psi`,
//! the chart `chi = phi o psi^{-1}`, the critical section `s` and the
//! reduced constants `theta`, `zeta`, `sigma = nu^4(0,0)`.
//!
//! Coordinates: `x2 = q^1`, `xi2 = q^2`, `x3 = q^3`. Before straightening the
//! field is rotated so that `B(q0)` points along `e3`.

use thiserror::Error;

use crate::expr::EvalError;
use crate::field::{norm, rotation_to_e3, FieldError, MagneticField, Mat3, Vec3};
use crate::jet::{invert_map, Jet, JetError};

pub type J = Jet<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdaptedError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Jet(#[from] JetError),
    #[error("field vanishes at the base point")]
    ZeroField,
    #[error("d3 b(0) = {0:e}: the base point is not critical along the field")]
    NotCritical(f64),
    #[error("d3^2 b(0) = {0:e} is not positive (degenerate transverse minimum)")]
    NonPositiveCurvature(f64),
    #[error("reduced Hessian is not positive definite (det = {0:e})")]
    ReducedHessian(f64),
    #[error("area density f has zero constant term")]
    SingularArea,
}

#[derive(Clone, Debug)]
pub struct AdaptedOptions {
    /// Working degree cap `D`.
    pub degree: i32,
    /// Extra rotation (radians) of the transverse plane about `B(q0)`.
    pub twist: f64,
}

impl Default for AdaptedOptions {
    fn default() -> Self {
        AdaptedOptions { degree: 4, twist: 0.0 }
    }
}

fn var(n: usize, cap: i32, i: usize) -> J {
    Jet::variable(n, cap, i, 0.0)
}

/// Field jets in rotated coordinates: `B'(y) = R B(q0 + R^T y)`.
pub fn rotated_field_jets(b: &MagneticField, q0: &Vec3, r: &Mat3, cap: i32) -> Result<[J; 3], AdaptedError> {
    let raw: Vec<J> = b.components().iter().map(|e| e.jet(q0, cap)).collect::<Result<_, _>>()?;
    // q - q0 = R^T y
    let lin: Vec<J> = (0..3)
        .map(|i| {
            let mut acc = J::zero(3, cap);
            for k in 0..3 {
                acc += &var(3, cap, k).scale(&r[k][i]);
            }
            acc
        })
        .collect();
    let comp: Vec<J> = raw.iter().map(|j| j.compose(&lin)).collect::<Result<_, _>>()?;
    Ok(std::array::from_fn(|i| {
        let mut acc = J::zero(3, cap);
        for k in 0..3 {
            acc += &comp[k].scale(&r[i][k]);
        }
        acc
    }))
}

fn strength(bj: &[J; 3]) -> Result<J, AdaptedError> {
    let sq = &(&bj[0].mul_jet(&bj[0]) + &bj[1].mul_jet(&bj[1])) + &bj[2].mul_jet(&bj[2]);
    Ok(sq.sqrt()?)
}

fn cross_jets(a: &[J; 3], b: &[J; 3]) -> [J; 3] {
    [
        &a[1].mul_jet(&b[2]) - &a[2].mul_jet(&b[1]),
        &a[2].mul_jet(&b[0]) - &a[0].mul_jet(&b[2]),
        &a[0].mul_jet(&b[1]) - &a[1].mul_jet(&b[0]),
    ]
}

fn dot_jets(a: &[J; 3], b: &[J; 3]) -> J {
    &(&a[0].mul_jet(&b[0]) + &a[1].mul_jet(&b[1])) + &a[2].mul_jet(&b[2])
}

fn compose3(f: &[J; 3], g: &[J; 3]) -> Result<[J; 3], JetError> {
    Ok([f[0].compose(g)?, f[1].compose(g)?, f[2].compose(g)?])
}

/// Rotation taking `B(q0)` to `e3`, followed by a turn of `twist` about `e3`.
pub fn pre_rotation(bvec: &Vec3, twist: f64) -> Mat3 {
    let n = norm(bvec);
    let r = rotation_to_e3(&[bvec[0] / n, bvec[1] / n, bvec[2] / n]);
    let (s, c) = twist.sin_cos();
    let rz = [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]];
    std::array::from_fn(|i| std::array::from_fn(|j| (0..3).map(|k| rz[i][k] * r[k][j]).sum()))
}

#[derive(Clone, Debug)]
pub struct Straightening {
    pub rotation: Mat3,
    /// Field jets in rotated coordinates.
    pub field: [J; 3],
    pub phi: [J; 3],
}

/// Solves `d3 phi = b(phi)`, `phi(q1, q2, 0) = (q1, q2, 0)` by Picard sweeps
/// in `q3`; each sweep fixes one more order.
pub fn straighten_field(b: &MagneticField, q0: &Vec3, degree: i32) -> Result<Straightening, AdaptedError> {
    straighten_field_twisted(b, q0, degree, 0.0)
}

pub fn straighten_field_twisted(b: &MagneticField, q0: &Vec3, degree: i32, twist: f64) -> Result<Straightening, AdaptedError> {
    let bvec = b.value(q0)?;
    if norm(&bvec) == 0.0 {
        return Err(AdaptedError::ZeroField);
    }
    let rotation = pre_rotation(&bvec, twist);
    let field = rotated_field_jets(b, q0, &rotation, degree)?;
    let inv = strength(&field)?.reciprocal()?;
    let unit: [J; 3] = std::array::from_fn(|i| field[i].mul_jet(&inv));
    let mut phi = [var(3, degree, 0), var(3, degree, 1), var(3, degree, 2)];
    for _ in 0..=degree {
        let u = compose3(&unit, &phi)?;
        phi = [
            &var(3, degree, 0) + &u[0].integrate(2).truncate(degree),
            &var(3, degree, 1) + &u[1].integrate(2).truncate(degree),
            u[2].integrate(2).truncate(degree),
        ];
    }
    Ok(Straightening { rotation, field, phi })
}

impl Straightening {
    /// Largest coefficient of `d3 phi - b(phi)`, trustworthy to degree `D - 1`.
    pub fn residual(&self) -> Result<f64, AdaptedError> {
        let inv = strength(&self.field)?.reciprocal()?;
        let unit: [J; 3] = std::array::from_fn(|i| self.field[i].mul_jet(&inv));
        let u = compose3(&unit, &self.phi)?;
        Ok((0..3).map(|i| (&self.phi[i].partial(2) - &u[i]).max_abs()).fold(0.0, f64::max))
    }
}

#[derive(Clone, Debug)]
pub struct Flattening {
    /// `phi^*(d alpha) = f dq1 ^ dq2`, restricted to `q3 = 0` (two variables).
    pub f: J,
    /// Largest coefficient of `d3 f` before restriction.
    pub f_q3_dependence: f64,
    pub psi: [J; 3],
    pub chi: [J; 3],
}

pub fn flatten_area(st: &Straightening) -> Result<Flattening, AdaptedError> {
    let phi = &st.phi;
    let degree = phi[0].cap();
    let bphi = compose3(&st.field, phi)?;
    let d1: [J; 3] = std::array::from_fn(|i| phi[i].partial(0));
    let d2: [J; 3] = std::array::from_fn(|i| phi[i].partial(1));
    let f3 = dot_jets(&bphi, &cross_jets(&d1, &d2));
    let f_q3_dependence = f3.partial(2).max_abs();
    let cap = f3.cap();
    let f = f3.compose(&[var(2, cap, 0), var(2, cap, 1), J::zero(2, cap)])?;
    if f.constant_term() == 0.0 {
        return Err(AdaptedError::SingularArea);
    }
    // psi = (q1, int_0^{q2} f(q1, t) dt, q3)
    let psi2_2d = f.integrate(1);
    let psi2 = psi2_2d.compose(&[var(3, degree, 0), var(3, degree, 1)])?;
    let psi = [var(3, degree, 0), psi2, var(3, degree, 2)];
    let psi_inv = invert_map(&psi)?;
    let psi_inv: [J; 3] = std::array::from_fn(|i| psi_inv[i].clone());
    let chi = compose3(phi, &psi_inv)?;
    Ok(Flattening { f, f_q3_dependence, psi, chi })
}

/// Jacobian determinant of a map given by three jets.
pub fn jacobian_det(m: &[J; 3]) -> J {
    let d: Vec<Vec<J>> = (0..3).map(|i| (0..3).map(|k| m[i].partial(k)).collect()).collect();
    let minor = |a: usize, b: usize, c: usize, e: usize| &d[1][a].mul_jet(&d[2][b]) - &d[1][c].mul_jet(&d[2][e]);
    &(&d[0][0].mul_jet(&minor(1, 2, 2, 1)) - &d[0][1].mul_jet(&minor(0, 2, 2, 0))) + &d[0][2].mul_jet(&minor(0, 1, 1, 0))
}

/// Solves `d3 b(x2, xi2, s(x2, xi2)) = 0` with `s(0,0) = 0` by Newton on jets.
pub fn critical_jet(b_adapted: &J) -> Result<J, AdaptedError> {
    let g = b_adapted.partial(2);
    let gs = g.partial(2);
    let g0 = g.constant_term();
    let curv = gs.constant_term();
    if !(curv > 0.0) {
        return Err(AdaptedError::NonPositiveCurvature(curv));
    }
    if g0.abs() > 1e-8 * curv.max(1.0) {
        return Err(AdaptedError::NotCritical(g0));
    }
    let cap = g.cap();
    let (x2, xi2) = (var(2, cap, 0), var(2, cap, 1));
    let mut s = J::zero(2, cap);
    for _ in 0..=cap.max(0) + 2 {
        let val = g.compose(&[x2.clone(), xi2.clone(), s.clone()])?;
        let slope = gs.compose(&[x2.clone(), xi2.clone(), s.clone()])?;
        let mut next = &s - &val.mul_jet(&slope.reciprocal()?);
        next.set_coeff(&[0, 0], 0.0);
        let done = (&next - &s).max_abs() == 0.0;
        s = next;
        if done {
            break;
        }
    }
    Ok(s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReducedConstants {
    pub theta: f64,
    /// Invariant form `theta * g^T H^{-1} g` with `g = grad nu^2(0)`, `H = Hess b_reduced(0)`.
    pub zeta: f64,
    /// `|grad nu^2(0)|^2` in the chart as built.
    pub zeta_literal: f64,
    pub sigma_jet: f64,
    pub nu2_0: f64,
    /// `d^2 b / dx2 dx3` and `d^2 b / dxi2 dx3` at 0 (diagnostic).
    pub cross_hessian: [f64; 2],
    pub hessian_reduced: [[f64; 2]; 2],
    pub grad_nu2: [f64; 2],
}

#[derive(Clone, Debug)]
pub struct Reduction {
    pub s: J,
    pub b_reduced: J,
    pub nu2: J,
    pub constants: ReducedConstants,
}

/// Reduced quantities of an adapted `b(x2, xi2, x3)`.
pub fn reduce(b_adapted: &J) -> Result<Reduction, AdaptedError> {
    let s = critical_jet(b_adapted)?;
    let cap = s.cap();
    let (x2, xi2) = (var(2, cap, 0), var(2, cap, 1));
    let at_s = |j: &J| j.compose(&[x2.clone(), xi2.clone(), s.clone()]);
    let b_reduced = at_s(b_adapted)?;
    let half_curv = at_s(&b_adapted.partial(2).partial(2))?.scale(&0.5);
    let nu2 = half_curv.sqrt()?;
    let h = [
        [b_reduced.derivative_at_base(&[2, 0]), b_reduced.derivative_at_base(&[1, 1])],
        [b_reduced.derivative_at_base(&[1, 1]), b_reduced.derivative_at_base(&[0, 2])],
    ];
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    if !(det > 0.0 && h[0][0] > 0.0) {
        return Err(AdaptedError::ReducedHessian(det));
    }
    let theta = det.sqrt();
    let g = [nu2.coeff(&[1, 0]), nu2.coeff(&[0, 1])];
    let hinv_g = [(h[1][1] * g[0] - h[0][1] * g[1]) / det, (h[0][0] * g[1] - h[1][0] * g[0]) / det];
    let zeta = theta * (g[0] * hinv_g[0] + g[1] * hinv_g[1]);
    let nu2_0 = nu2.constant_term();
    let constants = ReducedConstants {
        theta,
        zeta,
        zeta_literal: g[0] * g[0] + g[1] * g[1],
        sigma_jet: nu2_0 * nu2_0,
        nu2_0,
        cross_hessian: [b_adapted.derivative_at_base(&[1, 0, 1]), b_adapted.derivative_at_base(&[0, 1, 1])],
        hessian_reduced: h,
        grad_nu2: g,
    };
    Ok(Reduction { s, b_reduced, nu2, constants })
}

#[derive(Clone, Debug)]
pub struct AdaptedChart {
    pub q0: Vec3,
    pub rotation: Mat3,
    pub phi: [J; 3],
    pub f: J,
    pub psi: [J; 3],
    /// Chart in rotated coordinates; the physical point is `q0 + R^T chi`.
    pub chi: [J; 3],
    pub b_adapted: J,
    pub s: J,
    pub nu2: J,
    pub b_reduced: J,
    pub straightening_residual: f64,
    pub f_q3_dependence: f64,
}

impl AdaptedChart {
    pub fn build(b: &MagneticField, q0: Vec3, opts: &AdaptedOptions) -> Result<AdaptedChart, AdaptedError> {
        let st = straighten_field_twisted(b, &q0, opts.degree, opts.twist)?;
        let straightening_residual = st.residual()?;
        let fl = flatten_area(&st)?;
        let b_adapted = strength(&st.field)?.compose(&fl.chi)?;
        let red = reduce(&b_adapted)?;
        Ok(AdaptedChart {
            q0,
            rotation: st.rotation,
            phi: st.phi,
            f: fl.f,
            psi: fl.psi,
            chi: fl.chi,
            b_adapted,
            s: red.s,
            nu2: red.nu2,
            b_reduced: red.b_reduced,
            straightening_residual,
            f_q3_dependence: fl.f_q3_dependence,
        })
    }

    pub fn reduced_constants(&self) -> Result<ReducedConstants, AdaptedError> {
        Ok(reduce(&self.b_adapted)?.constants)
    }

    /// Largest coefficient of `det T chi * |B o chi| - 1`.
    pub fn volume_defect(&self) -> f64 {
        jacobian_det(&self.chi).mul_jet(&self.b_adapted).add_scalar(&-1.0).max_abs()
    }

    /// Largest coefficient of `d3 b_adapted(x2, xi2, s)`.
    pub fn critical_defect(&self) -> Result<f64, AdaptedError> {
        let cap = self.s.cap();
        let inner = [var(2, cap, 0), var(2, cap, 1), self.s.clone()];
        Ok(self.b_adapted.partial(2).compose(&inner)?.max_abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b3(terms: &[(Vec<u8>, f64)], cap: i32) -> J {
        Jet::from_coeffs(3, cap, terms)
    }

    #[test]
    fn perfect_square_section() {
        // 1 + x2^2 + xi2^2 + (x3 - x2)^2
        let b = b3(
            &[(vec![0, 0, 0], 1.0), (vec![2, 0, 0], 2.0), (vec![0, 2, 0], 1.0), (vec![0, 0, 2], 1.0), (vec![1, 0, 1], -2.0)],
            5,
        );
        let r = reduce(&b).unwrap();
        assert_eq!(r.s.coeff(&[1, 0]), 1.0);
        assert!((&r.s - &var(2, r.s.cap(), 0)).max_abs() < 1e-15);
        let c = r.constants;
        assert!((c.theta - 2.0).abs() < 1e-14 && c.zeta.abs() < 1e-14 && (c.sigma_jet - 1.0).abs() < 1e-14);
        assert!((r.nu2.constant_term() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn centered_section_is_zero() {
        let b = b3(&[(vec![0, 0, 0], 1.0), (vec![0, 0, 2], 1.0)], 4);
        assert!(critical_jet(&b).unwrap().is_zero());
    }

    #[test]
    fn twisted_section() {
        // 1 + (x3 + x2 xi2)^2 + x2^2
        let b = b3(
            &[
                (vec![0, 0, 0], 1.0),
                (vec![0, 0, 2], 1.0),
                (vec![1, 1, 1], 2.0),
                (vec![2, 2, 0], 1.0),
                (vec![2, 0, 0], 1.0),
            ],
            6,
        );
        let s = critical_jet(&b).unwrap();
        let want = Jet::from_coeffs(2, s.cap(), &[(vec![1, 1], -1.0)]);
        assert!((&s - &want).max_abs() < 1e-15, "{s}");
    }

    #[test]
    fn zeta_from_varying_curvature() {
        // 1 + x2^2 + xi2^2 + (1 + x2) x3^2
        let b = b3(
            &[(vec![0, 0, 0], 1.0), (vec![2, 0, 0], 1.0), (vec![0, 2, 0], 1.0), (vec![0, 0, 2], 1.0), (vec![1, 0, 2], 1.0)],
            5,
        );
        let c = reduce(&b).unwrap().constants;
        assert!((c.zeta - 0.25).abs() < 1e-14 && (c.zeta_literal - 0.25).abs() < 1e-14, "{c:?}");
        assert!((c.theta - 2.0).abs() < 1e-14);
    }

    use crate::field::{invariant_constants, minimize_b};
    use crate::presets::{figure1_field, generic_field, quadratic_potential};

    fn field(src: [&str; 3]) -> MagneticField {
        MagneticField::new(src.map(|t| t.parse().unwrap()))
    }

    #[test]
    fn straight_fields_need_no_straightening() {
        for src in [["0", "0", "1"], ["0", "0", "1 + q1"]] {
            let st = straighten_field(&field(src), &[0.0; 3], 4).unwrap();
            for i in 0..3 {
                assert!((&st.phi[i] - &var(3, 4, i)).max_abs() < 1e-15);
            }
        }
        let st = straighten_field(&field(["0", "0", "1 + q1"]), &[0.0; 3], 4).unwrap();
        let fl = flatten_area(&st).unwrap();
        let want = Jet::from_coeffs(2, fl.f.cap(), &[(vec![0, 0], 1.0), (vec![1, 0], 1.0)]);
        assert!((&fl.f - &want).max_abs() < 1e-15);
    }

    #[test]
    fn chart_identities_on_generic_field() {
        let b = generic_field();
        let m = minimize_b(&b, [0.0; 3]).unwrap();
        let chart = AdaptedChart::build(&b, m.q0, &AdaptedOptions { degree: 5, twist: 0.0 }).unwrap();
        assert!(chart.straightening_residual < 1e-12);
        assert!(chart.f_q3_dependence < 1e-12);
        assert!(chart.volume_defect() < 1e-12);
        assert!(chart.critical_defect().unwrap() < 1e-12);
        assert!((chart.b_adapted.constant_term() - m.b0).abs() < 1e-14);
    }

    #[test]
    fn jet_route_matches_invariant_route() {
        let fields = [figure1_field(), quadratic_potential().curl(), generic_field()];
        for b in &fields {
            let m = minimize_b(b, [0.0; 3]).unwrap();
            let (sigma, theta) = invariant_constants(b, &m.q0).unwrap();
            let c = AdaptedChart::build(b, m.q0, &AdaptedOptions::default()).unwrap().reduced_constants().unwrap();
            assert!((c.sigma_jet / sigma - 1.0).abs() < 1e-9, "{} vs {sigma}", c.sigma_jet);
            assert!((c.theta / theta - 1.0).abs() < 1e-9, "{} vs {theta}", c.theta);
        }
    }

    #[test]
    fn figure1_and_mirror_constants() {
        let c = AdaptedChart::build(&figure1_field(), [0.0; 3], &AdaptedOptions::default())
            .unwrap()
            .reduced_constants()
            .unwrap();
        assert!((c.sigma_jet - 0.125).abs() < 1e-13 && (c.theta - 0.5).abs() < 1e-13, "{c:?}");
        let c = AdaptedChart::build(&quadratic_potential().curl(), [0.0; 3], &AdaptedOptions::default())
            .unwrap()
            .reduced_constants()
            .unwrap();
        assert!((c.sigma_jet - 1.0 / 9.0).abs() < 1e-13 && (c.theta - 1.0 / 9.0).abs() < 1e-13, "{c:?}");
        assert!(c.zeta.abs() < 1e-13);
    }

    #[test]
    fn zeta_does_not_depend_on_transverse_twist() {
        let b = generic_field();
        let m = minimize_b(&b, [0.0; 3]).unwrap();
        let zs: Vec<(f64, f64)> = [0.0, 0.7, 2.1]
            .iter()
            .map(|&twist| {
                let c = AdaptedChart::build(&b, m.q0, &AdaptedOptions { degree: 4, twist })
                    .unwrap()
                    .reduced_constants()
                    .unwrap();
                (c.zeta, c.zeta_literal)
            })
            .collect();
        for z in &zs[1..] {
            assert!((z.0 - zs[0].0).abs() < 1e-10 * zs[0].0.abs().max(1.0), "{zs:?}");
        }
        eprintln!("zeta under twist: {zs:?}");
    }
}
