//! Named test fields shared by the CLI, the acceptance suite and examples.

use crate::expr::{parse_expr, Expr};
use crate::field::{MagneticField, Vec3, VectorPotential};
use crate::scalar::Rational;

fn parse3(src: [&str; 3]) -> [Expr; 3] {
    src.map(|s| parse_expr(s).expect("preset expression"))
}

/// `B = (q2/2, q3/2, sqrt(1 + q1^2))`, minimum of `|B|` at the origin.
pub fn figure1_field() -> MagneticField {
    MagneticField::new(parse3(FIGURE1_B))
}

pub const FIGURE1_B: [&str; 3] = ["q2/2", "q3/2", "sqrt(1 + q1^2)"];
pub const FIGURE1_Q0: Vec3 = [0.5, 0.6, 0.7];
pub const FIGURE1_P0: Vec3 = [-0.6, 0.01, 0.2];

/// Symmetric gauge of the unit field along `e3`.
pub fn circle_potential() -> VectorPotential {
    VectorPotential::new(parse3(CIRCLE_A))
}

pub const CIRCLE_A: [&str; 3] = ["-q2/2", "q1/2", "0"];
pub const CIRCLE_Q0: Vec3 = [1.0, 0.0, 0.0];
/// `A(q0) + (0, 1/2, 0)`: a circle of radius 1/2 with angular frequency 2.
pub const CIRCLE_P0: Vec3 = [0.0, 1.0, 0.0];

/// Axisymmetric mirror `A = b0 (1/2 + kappa (q1^2+q2^2)/4 + q3^2/(2 L^2)) (-q2, q1, 0)`.
///
/// At the origin `b0` is the minimum, `sigma = b0 / L^2`, `theta = 2 kappa b0`
/// and `zeta = 0`.
pub fn mirror_potential(b0: Rational, l: Rational, kappa: Rational) -> VectorPotential {
    let c = |r: Rational| Expr::rational(*r.numer(), *r.denom());
    let q = Expr::var;
    let f = c(Rational::new(1, 2))
        + c(kappa / 4) * (Expr::pow(q(0), 2) + Expr::pow(q(1), 2))
        + c(Rational::new(1, 2) / (l * l)) * Expr::pow(q(2), 2);
    let g = c(b0) * f;
    VectorPotential::new([-(q(1) * g.clone()), q(0) * g, Expr::int(0)])
}

/// Mirror with `b0 = 1`, `L = 3`, `kappa = 1/18`: `sigma = theta = 1/9`.
pub fn quadratic_potential() -> VectorPotential {
    mirror_potential(Rational::from_integer(1), Rational::from_integer(3), Rational::new(1, 18))
}

/// A solenoidal field with no symmetry; its minimum sits near
/// `(-0.064, 0.045, 0.493)` with `B(q0)` tilted away from every axis.
pub fn generic_field() -> MagneticField {
    MagneticField::new(parse3(GENERIC_B))
}

pub const GENERIC_B: [&str; 3] = [
    "0.3 + q1*(12*q2 - 1)/20",
    "-0.2 - q1*q2/10 - q1*q3/2 - 3*q2^2/10 + q2/20 + 2*q3/5",
    "3*q1^2/10 + q1*q3/10 + q2^2/8 + 1",
];
