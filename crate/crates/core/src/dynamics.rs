//! Classical motion in `H(q, p) = |p - A(q)|^2`: implicit-midpoint
//! trajectories, field lines and adiabatic diagnostics.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::field::{cross, dot, norm, FieldError, MagneticField, Potential, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error("cyclotron resolution guard: dt * 2|B| = {value} >= 0.5 at t = {t}")]
    Guard { t: f64, value: f64 },
    #[error("implicit midpoint iteration did not converge at t = {t} (last update {update:e})")]
    NoConvergence { t: f64, update: f64 },
    #[error("time step must be finite and nonzero, got {0}")]
    BadStep(f64),
    #[error("field vanishes at {0:?}")]
    ZeroField(Vec3),
}

/// Fixed-point tolerance of the midpoint equation.
pub const MIDPOINT_TOL: f64 = 1e-13;
const MAX_ITERATIONS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct State {
    pub t: f64,
    pub q: Vec3,
    pub p: Vec3,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Diagnostic {
    pub t: f64,
    pub h: f64,
    pub mu: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub dt: f64,
    pub states: Vec<State>,
    pub diagnostics: Vec<Diagnostic>,
}

/// `H = |p - A(q)|^2`.
pub fn hamiltonian(a: &dyn Potential, q: &Vec3, p: &Vec3) -> Result<f64, FieldError> {
    let w = sub(p, &a.value(q)?);
    Ok(dot(&w, &w))
}

/// `mu = |v_perp|^2 / (2 b)` with `v = 2 (p - A(q))`.
pub fn magnetic_moment(a: &dyn Potential, q: &Vec3, p: &Vec3) -> Result<f64, DynamicsError> {
    let v = velocity(a, q, p)?;
    let b = a.field(q)?;
    let bn = norm(&b);
    if bn == 0.0 {
        return Err(DynamicsError::ZeroField(*q));
    }
    let vpar = dot(&v, &b) / bn;
    Ok((dot(&v, &v) - vpar * vpar).max(0.0) / (2.0 * bn))
}

pub fn velocity(a: &dyn Potential, q: &Vec3, p: &Vec3) -> Result<Vec3, FieldError> {
    let w = sub(p, &a.value(q)?);
    Ok(w.map(|x| 2.0 * x))
}

/// `q + v x B / (2 |B|^2)`, the center of the instantaneous cyclotron circle.
pub fn guiding_center(a: &dyn Potential, q: &Vec3, p: &Vec3) -> Result<Vec3, DynamicsError> {
    let v = velocity(a, q, p)?;
    let b = a.field(q)?;
    let b2 = dot(&b, &b);
    if b2 == 0.0 {
        return Err(DynamicsError::ZeroField(*q));
    }
    let d = cross(&v, &b);
    Ok(std::array::from_fn(|k| q[k] + d[k] / (2.0 * b2)))
}

/// `|v_perp| / (2 |B|)`.
pub fn cyclotron_radius(a: &dyn Potential, q: &Vec3, p: &Vec3) -> Result<f64, DynamicsError> {
    let b = norm(&a.field(q)?);
    Ok((2.0 * magnetic_moment(a, q, p)? * b).sqrt() / (2.0 * b))
}

fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `(dq/dt, dp/dt) = (2 (p - A), 2 (T_q A)^T (p - A))`.
fn vector_field(a: &dyn Potential, q: &Vec3, p: &Vec3) -> Result<(Vec3, Vec3), FieldError> {
    let w = sub(p, &a.value(q)?);
    let j = a.jacobian(q)?;
    let qd = w.map(|x| 2.0 * x);
    let pd = std::array::from_fn(|k| 2.0 * (j[0][k] * w[0] + j[1][k] * w[1] + j[2][k] * w[2]));
    Ok((qd, pd))
}

/// One implicit-midpoint step from `(q, p)`.
fn midpoint_step(a: &dyn Potential, t: f64, q: &Vec3, p: &Vec3, dt: f64) -> Result<(Vec3, Vec3), DynamicsError> {
    let (qd, pd) = vector_field(a, q, p)?;
    let mut qn: Vec3 = std::array::from_fn(|k| q[k] + dt * qd[k]);
    let mut pn: Vec3 = std::array::from_fn(|k| p[k] + dt * pd[k]);
    let mut update = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let qm: Vec3 = std::array::from_fn(|k| 0.5 * (q[k] + qn[k]));
        let pm: Vec3 = std::array::from_fn(|k| 0.5 * (p[k] + pn[k]));
        let (qd, pd) = vector_field(a, &qm, &pm)?;
        let q2: Vec3 = std::array::from_fn(|k| q[k] + dt * qd[k]);
        let p2: Vec3 = std::array::from_fn(|k| p[k] + dt * pd[k]);
        let scale = 1.0 + norm(&q2).max(norm(&p2));
        update = (0..3).map(|k| (q2[k] - qn[k]).abs().max((p2[k] - pn[k]).abs())).fold(0.0, f64::max) / scale;
        qn = q2;
        pn = p2;
        if update < MIDPOINT_TOL {
            return Ok((qn, pn));
        }
    }
    Err(DynamicsError::NoConvergence { t, update })
}

/// Integrates Hamilton's equations over `[0, t_end]` (backwards when `dt < 0`),
/// recording every `record_every`-th state.
pub fn integrate_hamiltonian_sampled(a: &dyn Potential, q0: Vec3, p0: Vec3, t_end: f64, dt: f64, record_every: usize) -> Result<Trajectory, DynamicsError> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(DynamicsError::BadStep(dt));
    }
    let steps = (t_end / dt).abs().round().max(1.0) as usize;
    // land exactly on t_end
    let dt = t_end.abs() / steps as f64 * dt.signum();
    let every = record_every.max(1);
    let mut states = Vec::with_capacity(steps / every + 2);
    let mut diagnostics = Vec::with_capacity(steps / every + 2);
    let (mut q, mut p) = (q0, p0);
    let record = |t: f64, q: &Vec3, p: &Vec3, states: &mut Vec<State>, diagnostics: &mut Vec<Diagnostic>| -> Result<(), DynamicsError> {
        states.push(State { t, q: *q, p: *p });
        diagnostics.push(Diagnostic { t, h: hamiltonian(a, q, p)?, mu: magnetic_moment(a, q, p)? });
        Ok(())
    };
    record(0.0, &q, &p, &mut states, &mut diagnostics)?;
    for step in 1..=steps {
        let t = (step - 1) as f64 * dt;
        let guard = dt.abs() * 2.0 * norm(&a.field(&q)?);
        if guard >= 0.5 {
            return Err(DynamicsError::Guard { t, value: guard });
        }
        let (qn, pn) = midpoint_step(a, t, &q, &p, dt)?;
        q = qn;
        p = pn;
        if step % every == 0 || step == steps {
            record(step as f64 * dt, &q, &p, &mut states, &mut diagnostics)?;
        }
    }
    Ok(Trajectory { dt, states, diagnostics })
}

pub fn integrate_hamiltonian(a: &dyn Potential, q0: Vec3, p0: Vec3, t_end: f64, dt: f64) -> Result<Trajectory, DynamicsError> {
    integrate_hamiltonian_sampled(a, q0, p0, t_end, dt, 1)
}

impl Trajectory {
    pub fn last(&self) -> &State {
        self.states.last().expect("trajectory has the initial state")
    }

    /// CSV with header `t,q1,q2,q3,p1,p2,p3,H,mu`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,q1,q2,q3,p1,p2,p3,H,mu\n");
        for (st, d) in self.states.iter().zip(&self.diagnostics) {
            let _ = writeln!(
                s,
                "{},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e}",
                st.t, st.q[0], st.q[1], st.q[2], st.p[0], st.p[1], st.p[2], d.h, d.mu
            );
        }
        s
    }
}

// ---------------------------------------------------------------- field lines

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinePoint {
    pub s: f64,
    pub q: Vec3,
}

fn unit_field(b: &MagneticField, q: &Vec3) -> Result<Vec3, DynamicsError> {
    let v = b.value(q).map_err(FieldError::from)?;
    let n = norm(&v);
    if !(n > 0.0) {
        return Err(DynamicsError::ZeroField(*q));
    }
    Ok(v.map(|x| x / n))
}

/// RK4 on `dq/ds = B / |B|` from `q0` over arclength `length` (negative runs
/// against the field) with step `|ds|`.
pub fn integrate_field_line(b: &MagneticField, q0: Vec3, length: f64, ds: f64) -> Result<Vec<LinePoint>, DynamicsError> {
    if !(ds.is_finite() && ds != 0.0) {
        return Err(DynamicsError::BadStep(ds));
    }
    let steps = (length / ds).abs().ceil().max(1.0) as usize;
    let h = length / steps as f64;
    let mut out = Vec::with_capacity(steps + 1);
    let mut q = q0;
    out.push(LinePoint { s: 0.0, q });
    for i in 0..steps {
        let k1 = unit_field(b, &q)?;
        let k2 = unit_field(b, &std::array::from_fn(|k| q[k] + 0.5 * h * k1[k]))?;
        let k3 = unit_field(b, &std::array::from_fn(|k| q[k] + 0.5 * h * k2[k]))?;
        let k4 = unit_field(b, &std::array::from_fn(|k| q[k] + h * k3[k]))?;
        q = std::array::from_fn(|k| q[k] + h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]));
        out.push(LinePoint { s: (i + 1) as f64 * h, q });
    }
    Ok(out)
}

/// Field line through `q0` in both directions, ordered by arclength.
pub fn field_line_through(b: &MagneticField, q0: Vec3, half_length: f64, ds: f64) -> Result<Vec<LinePoint>, DynamicsError> {
    let mut back = integrate_field_line(b, q0, -half_length, ds)?;
    back.reverse();
    back.pop();
    back.extend(integrate_field_line(b, q0, half_length, ds)?);
    Ok(back)
}

pub fn polyline_to_csv(line: &[LinePoint]) -> String {
    let mut s = String::from("s,q1,q2,q3\n");
    for p in line {
        let _ = writeln!(s, "{},{:.15e},{:.15e},{:.15e}", p.s, p.q[0], p.q[1], p.q[2]);
    }
    s
}

/// Distance from `x` to the polyline.
pub fn distance_to_polyline(line: &[LinePoint], x: &Vec3) -> f64 {
    let mut best = f64::INFINITY;
    for w in line.windows(2) {
        let (a, b) = (w[0].q, w[1].q);
        let ab = sub(&b, &a);
        let ax = sub(x, &a);
        let l2 = dot(&ab, &ab);
        let t = if l2 > 0.0 { (dot(&ax, &ab) / l2).clamp(0.0, 1.0) } else { 0.0 };
        let d: Vec3 = std::array::from_fn(|k| ax[k] - t * ab[k]);
        best = best.min(norm(&d));
    }
    if line.len() == 1 {
        best = norm(&sub(x, &line[0].q));
    }
    best
}

// ---------------------------------------------------------------- diagnostics

#[derive(Clone, Debug, PartialEq)]
pub struct AdiabaticReport {
    /// `max |mu - mu(0)| / mu(0)`; 0 when `mu(0) = 0` and `mu` stays 0.
    pub mu_variation: f64,
    /// `max |H - H(0)| / H(0)` (absolute when `H(0) = 0`).
    pub h_variation: f64,
    pub mu_range: (f64, f64),
    /// Dominant angular frequencies of `q1, q2, q3`, strongest first.
    pub frequencies: [Vec<f64>; 3],
}

/// Peaks of the DFT of each `q` component after removing its mean.
pub fn adiabatic_diagnostics(traj: &Trajectory, peaks: usize) -> AdiabaticReport {
    let d = &traj.diagnostics;
    let (mu0, h0) = (d[0].mu, d[0].h);
    let rel = |x: f64, x0: f64| if x0 != 0.0 { (x - x0).abs() / x0.abs() } else { x.abs() };
    let mu_variation = d.iter().map(|x| rel(x.mu, mu0)).fold(0.0, f64::max);
    let h_variation = d.iter().map(|x| rel(x.h, h0)).fold(0.0, f64::max);
    let mu_range = d.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x.mu), hi.max(x.mu)));
    let frequencies = std::array::from_fn(|k| {
        let ts: Vec<f64> = traj.states.iter().map(|s| s.t).collect();
        let xs: Vec<f64> = traj.states.iter().map(|s| s.q[k]).collect();
        dominant_frequencies(&ts, &xs, peaks)
    });
    AdiabaticReport { mu_variation, h_variation, mu_range, frequencies }
}

/// Local maxima of the periodogram on a uniform sample, resampled to at most
/// 4096 points, as angular frequencies. Peaks below `1e-12` of the strongest
/// one are rounding noise and are dropped.
pub fn dominant_frequencies(t: &[f64], x: &[f64], peaks: usize) -> Vec<f64> {
    let n_all = x.len();
    if n_all < 4 {
        return Vec::new();
    }
    let stride = n_all.div_ceil(4096);
    let xs: Vec<f64> = x.iter().step_by(stride).cloned().collect();
    let n = xs.len();
    let span = (t[(n - 1) * stride] - t[0]) * n as f64 / (n - 1) as f64;
    let mean = xs.iter().sum::<f64>() / n as f64;
    let power: Vec<f64> = (0..=n / 2)
        .map(|f| {
            let (mut re, mut im) = (0.0, 0.0);
            for (j, v) in xs.iter().enumerate() {
                let ang = -2.0 * PI * (f * j) as f64 / n as f64;
                re += (v - mean) * ang.cos();
                im += (v - mean) * ang.sin();
            }
            re * re + im * im
        })
        .collect();
    let mut local: Vec<(usize, f64)> = (1..power.len().saturating_sub(1))
        .filter(|&f| power[f] > power[f - 1] && power[f] >= power[f + 1])
        .map(|f| (f, power[f]))
        .collect();
    local.sort_by(|a, b| b.1.total_cmp(&a.1));
    let floor = local.first().map_or(0.0, |p| p.1 * 1e-12);
    local.into_iter().take_while(|p| p.1 > floor).take(peaks).map(|(f, _)| 2.0 * PI * f as f64 / span).collect()
}
