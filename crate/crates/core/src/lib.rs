//! Semiclassical asymptotics of the 3D magnetic Laplacian.
//!
//! The crate computes the model constants `b0, sigma, theta, zeta` of a
//! confining magnetic field through two independent routes (invariant
//! Hessian formulas and an adapted-coordinate jet pipeline), runs a formal
//! Birkhoff normalization over a Moyal algebra, and checks the resulting
//! eigenvalue model against a lattice discretization and classical orbits.

pub mod adapted;
pub mod constants;
pub mod dynamics;
pub mod expr;
pub mod field;
pub mod jet;
pub mod normal_form;
pub mod presets;
pub mod quad;
pub mod scalar;
pub mod spectral;

pub use expr::{diff_expr, eval_expr, jet_from_expr, parse_expr, Expr, Func};
pub use jet::Jet;
pub use normal_form::{FormalSeries, Series64};
pub use constants::ModelConstants;
pub use scalar::{ComplexScalar, Rational, Scalar};

/// Double-precision jet, the workhorse of the adapted-chart pipeline.
pub type Jet64 = Jet<f64>;
/// Exact rational jet.
pub type ExactJet = Jet<num_rational::Ratio<i64>>;
