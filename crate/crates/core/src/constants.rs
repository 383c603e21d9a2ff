//! Model constants of a confining field, computed along both routes.

use num_traits::Float;
use thiserror::Error;

use crate::adapted::{AdaptedChart, AdaptedError, AdaptedOptions};
use crate::field::{invariant_constants_from, minimize_b, FieldError, MagneticField, Vec3};

/// Constants entering the eigenvalue model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConstants<T> {
    pub q0: [T; 3],
    pub b0: T,
    pub sigma: T,
    pub theta: T,
    pub zeta: T,
    pub nu2_0: T,
}

impl<T: Float> ModelConstants<T> {
    /// Constants with `q0 = 0` and `nu2_0 = sqrt(sigma)`.
    pub fn new(b0: T, sigma: T, theta: T, zeta: T) -> Self {
        ModelConstants { q0: [T::zero(); 3], b0, sigma, theta, zeta, nu2_0: sigma.sqrt() }
    }

    /// `|sigma - nu2_0^2| / sigma`.
    pub fn sigma_consistency(&self) -> T {
        (self.sigma - self.nu2_0 * self.nu2_0).abs() / self.sigma
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstantsError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Adapted(#[from] AdaptedError),
}

/// Both routes side by side, with the chart diagnostics.
#[derive(Clone, Debug)]
pub struct ConstantsReport {
    /// `sigma` and `theta` from the invariant route, the rest from the jet route.
    pub constants: ModelConstants<f64>,
    pub sigma_invariant: f64,
    pub theta_invariant: f64,
    pub sigma_jet: f64,
    pub theta_jet: f64,
    pub zeta_literal: f64,
    pub cross_hessian: [f64; 2],
    pub newton_iterations: usize,
    pub straightening_residual: f64,
    pub volume_defect: f64,
    pub critical_defect: f64,
}

impl ConstantsReport {
    /// Largest relative difference between the routes for `sigma` and `theta`.
    pub fn route_disagreement(&self) -> f64 {
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs());
        rel(self.sigma_invariant, self.sigma_jet).max(rel(self.theta_invariant, self.theta_jet))
    }
}

/// Locates the minimum of `|B|` from `seed` and evaluates both routes there.
pub fn compute_constants(b: &MagneticField, seed: Vec3, opts: &AdaptedOptions) -> Result<ConstantsReport, ConstantsError> {
    let min = minimize_b(b, seed)?;
    let bvec = b.value(&min.q0).map_err(FieldError::from)?;
    let (sigma, theta) = invariant_constants_from(&min.hessian, &bvec)?;
    let chart = AdaptedChart::build(b, min.q0, opts)?;
    let red = chart.reduced_constants()?;
    Ok(ConstantsReport {
        constants: ModelConstants { q0: min.q0, b0: min.b0, sigma, theta, zeta: red.zeta, nu2_0: red.nu2_0 },
        sigma_invariant: sigma,
        theta_invariant: theta,
        sigma_jet: red.sigma_jet,
        theta_jet: red.theta,
        zeta_literal: red.zeta_literal,
        cross_hessian: red.cross_hessian,
        newton_iterations: min.iterations,
        straightening_residual: chart.straightening_residual,
        volume_defect: chart.volume_defect(),
        critical_defect: chart.critical_defect()?,
    })
}
