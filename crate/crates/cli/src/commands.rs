//! Subcommand bodies. Every file the tool writes is produced here.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use magwell::adapted::AdaptedOptions;
use magwell::constants::{compute_constants, ConstantsReport};
use magwell::dynamics::{
    adiabatic_diagnostics, cyclotron_radius, distance_to_polyline, field_line_through, guiding_center, integrate_hamiltonian_sampled,
    polyline_to_csv,
};
use magwell::field::{frame_at, norm, poincare_potential, MagneticField, Potential, Vec3, VectorPotential};
use magwell::normal_form::{birkhoff_normalize, cstar_to_text, parse_birkhoff_input, NormalFormError};
use magwell::spectral::{fit_asymptotics, model_spectrum, richardson, solve, BoxRule, GridBox, LanczosOptions, SpectralResult};
use magwell::{parse_expr, Expr, ModelConstants, Series64};

use crate::config::{BoxShape, Components, ConfigError, RunConfig};

/// Config problems exit with 2, everything downstream with 3.
#[derive(Debug)]
pub enum Failure {
    Config(anyhow::Error),
    Numerical(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.into())
    }
}

type Outcome<T> = Result<T, Failure>;

fn config_err(msg: impl Into<String>) -> Failure {
    Failure::Config(anyhow!(msg.into()))
}

trait Numerical<T> {
    fn stage(self, stage: &'static str) -> Outcome<T>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> Numerical<T> for Result<T, E> {
    fn stage(self, stage: &'static str) -> Outcome<T> {
        self.map_err(|e| Failure::Numerical(anyhow::Error::new(e).context(stage)))
    }
}

/// Where results go; without a directory only stdout is used.
pub struct Sink {
    dir: Option<PathBuf>,
}

impl Sink {
    pub fn new(dir: Option<PathBuf>) -> Outcome<Sink> {
        if let Some(d) = &dir {
            fs::create_dir_all(d).with_context(|| format!("creating {}", d.display())).map_err(Failure::Numerical)?;
        }
        Ok(Sink { dir })
    }

    fn has_dir(&self) -> bool {
        self.dir.is_some()
    }

    fn write(&self, name: &str, body: &str) -> Outcome<()> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            fs::write(&path, body).with_context(|| format!("writing {}", path.display())).map_err(Failure::Numerical)?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------- field setup

fn exprs(c: &Components) -> Outcome<[Expr; 3]> {
    let v = c.0.iter().map(|s| parse_expr(s).map_err(|e| config_err(format!("{s:?}: {e}")))).collect::<Outcome<Vec<_>>>()?;
    Ok(v.try_into().expect("three components"))
}

enum Source {
    Potential(VectorPotential),
    Field(MagneticField),
}

impl Source {
    fn from_config(c: &RunConfig) -> Outcome<Source> {
        match (&c.potential, &c.field) {
            (Some(a), None) => Ok(Source::Potential(VectorPotential::new(exprs(a)?))),
            (None, Some(b)) => Ok(Source::Field(MagneticField::new(exprs(b)?))),
            _ => Err(config_err("no field given: set `potential`, `field` or a preset")),
        }
    }

    fn field(&self) -> MagneticField {
        match self {
            Source::Potential(a) => a.curl(),
            Source::Field(b) => b.clone(),
        }
    }

    /// The configured potential, or a Poincare gauge of the field.
    fn potential(&self, center: Vec3, half_width: f64) -> Outcome<Box<dyn Potential>> {
        match self {
            Source::Potential(a) => Ok(Box::new(a.clone())),
            Source::Field(b) => Ok(Box::new(poincare_potential(b, center, half_width).stage("poincare_potential")?)),
        }
    }
}

fn adapted_options(c: &RunConfig) -> AdaptedOptions {
    let d = AdaptedOptions::default();
    AdaptedOptions { degree: c.degree.unwrap_or(d.degree), twist: c.twist.unwrap_or(d.twist) }
}

fn constants(c: &RunConfig, src: &Source) -> Outcome<ConstantsReport> {
    compute_constants(&src.field(), c.seed_point.unwrap_or([0.0; 3]), &adapted_options(c)).stage("model constants")
}

fn e(x: f64) -> String {
    format!("{x:.15e}")
}

fn vec3(v: &Vec3) -> String {
    format!("{}, {}, {}", e(v[0]), e(v[1]), e(v[2]))
}

// ---------------------------------------------------------------- constants

pub fn cmd_constants(c: &RunConfig, sink: &Sink) -> Outcome<String> {
    let src = Source::from_config(c)?;
    let r = constants(c, &src)?;
    let q0 = r.constants.q0;
    let a = src.potential(q0, 1.0)?;
    let frame = frame_at(a.as_ref(), q0).stage("frame_at")?;
    let k = &r.constants;
    let mut s = String::new();
    let _ = writeln!(s, "q0 = {}", vec3(&q0));
    let _ = writeln!(s, "b0 = {}", e(k.b0));
    let _ = writeln!(s, "nu2_0 = {}", e(k.nu2_0));
    let _ = writeln!(s, "sigma_invariant = {}", e(r.sigma_invariant));
    let _ = writeln!(s, "sigma_jet = {}", e(r.sigma_jet));
    let _ = writeln!(s, "theta_invariant = {}", e(r.theta_invariant));
    let _ = writeln!(s, "theta_jet = {}", e(r.theta_jet));
    let _ = writeln!(s, "zeta = {}", e(k.zeta));
    let _ = writeln!(s, "zeta_literal = {}", e(r.zeta_literal));
    let _ = writeln!(s, "route_discrepancy = {:.3e}", r.route_disagreement());
    let _ = writeln!(s, "sigma_consistency = {:.3e}", k.sigma_consistency());
    let _ = writeln!(s, "frame_identity_error = {:.3e}", frame.max_identity_error());
    let _ = writeln!(s, "newton_iterations = {}", r.newton_iterations);
    let _ = writeln!(s, "straightening_residual = {:.3e}", r.straightening_residual);
    let _ = writeln!(s, "volume_defect = {:.3e}", r.volume_defect);
    let _ = writeln!(s, "critical_defect = {:.3e}", r.critical_defect);
    sink.write("constants.txt", &s)?;
    Ok(s)
}

// ---------------------------------------------------------------- spectra

struct SpectralSetup {
    hbars: Vec<f64>,
    n: usize,
    coarse: Option<usize>,
    k: usize,
    opts: LanczosOptions,
}

impl SpectralSetup {
    fn from_config(c: &RunConfig) -> Outcome<SpectralSetup> {
        let hbars = c.hbar.clone().ok_or_else(|| config_err("missing hbar list (`hbar = ...` or --hbar)"))?;
        Ok(SpectralSetup {
            hbars,
            n: c.grid.unwrap_or(32),
            coarse: c.grid_coarse,
            k: c.eigenvalues.unwrap_or(4),
            opts: LanczosOptions { seed: c.seed.unwrap_or(LanczosOptions::default().seed), ..LanczosOptions::default() },
        })
    }
}

fn box_rule(c: &RunConfig) -> BoxRule {
    match c.box_shape.unwrap_or(BoxShape::Cube) {
        BoxShape::Cube => BoxRule::Cube { c: c.box_c.unwrap_or(6.0) },
        BoxShape::Spheroid => {
            let BoxRule::Spheroid { ct, cz } = BoxRule::SPHEROID else { unreachable!() };
            BoxRule::Spheroid { ct: c.box_ct.unwrap_or(ct), cz: c.box_cz.unwrap_or(cz) }
        }
    }
}

/// One box per `hbar`: the explicit override, or the rule around `q0`.
fn boxes(c: &RunConfig, hbars: &[f64], k: Option<&ModelConstants<f64>>, dir: &Vec3) -> Vec<GridBox> {
    match (c.box_center, c.box_lengths, k) {
        (Some(center), Some(lengths), _) => vec![GridBox { center, lengths }; hbars.len()],
        (_, _, Some(k)) => hbars.iter().map(|&h| box_rule(c).grid_box(k, dir, h)).collect(),
        _ => unreachable!("constants are computed when no box is given"),
    }
}

fn oracle_runs(c: &RunConfig, src: &Source, setup: &SpectralSetup, k: Option<&ModelConstants<f64>>) -> Outcome<Vec<SpectralResult>> {
    let dir = match k {
        Some(k) => {
            let b = src.field().value(&k.q0).map_err(|e| Failure::Numerical(anyhow!("field at q0: {e}")))?;
            let n = norm(&b);
            b.map(|x| x / n)
        }
        None => [0.0, 0.0, 1.0],
    };
    let grids = boxes(c, &setup.hbars, k, &dir);
    let center = c.gauge_center.unwrap_or(grids[0].center);
    let reach = grids
        .iter()
        .map(|g| (0..3).map(|i| (g.center[i] - center[i]).abs() + 0.5 * g.lengths[i]).fold(0.0, f64::max))
        .fold(0.0, f64::max);
    let a = src.potential(center, c.gauge_half_width.unwrap_or(reach))?;
    let mut out = Vec::new();
    for (&h, g) in setup.hbars.iter().zip(&grids) {
        let fine = solve(a.as_ref(), h, *g, setup.n, setup.k, &setup.opts).stage("spectral oracle")?;
        out.push(match setup.coarse {
            Some(nc) => richardson(&solve(a.as_ref(), h, *g, nc, setup.k, &setup.opts).stage("spectral oracle")?, &fine),
            None => fine,
        });
    }
    Ok(out)
}

pub fn cmd_oracle(c: &RunConfig, sink: &Sink) -> Outcome<String> {
    let setup = SpectralSetup::from_config(c)?;
    let src = Source::from_config(c)?;
    let k = if c.box_lengths.is_some() { None } else { Some(constants(c, &src)?.constants) };
    let runs = oracle_runs(c, &src, &setup, k.as_ref())?;
    let csv = magwell::spectral::results_to_csv(&runs);
    sink.write("spectrum.csv", &csv)?;
    Ok(csv)
}

pub fn cmd_compare(c: &RunConfig, sink: &Sink) -> Outcome<String> {
    let setup = SpectralSetup::from_config(c)?;
    let src = Source::from_config(c)?;
    let k = constants(c, &src)?.constants;
    let runs = if c.oracle.unwrap_or(true) {
        let runs = oracle_runs(c, &src, &setup, Some(&k))?;
        sink.write("spectrum.csv", &magwell::spectral::results_to_csv(&runs))?;
        runs
    } else {
        let grids = boxes(c, &setup.hbars, Some(&k), &[0.0, 0.0, 1.0]);
        setup
            .hbars
            .iter()
            .zip(grids)
            .map(|(&h, grid)| SpectralResult { hbar: h, eigenvalues: model_spectrum(&k, h, setup.k), residuals: vec![0.0; setup.k], n: 0, grid })
            .collect()
    };
    let mut csv = String::from("hbar,m,oracle,model,difference\n");
    let mut table = String::from("    hbar   m            oracle             model    difference\n");
    for r in &runs {
        let model = model_spectrum(&k, r.hbar, r.eigenvalues.len());
        for (m, (o, l)) in r.eigenvalues.iter().zip(&model).enumerate() {
            let _ = writeln!(csv, "{},{},{},{},{:.6e}", r.hbar, m + 1, e(*o), e(*l), o - l);
            let _ = writeln!(table, "{:8} {:3} {:17.10} {:17.10} {:13.4e}", r.hbar, m + 1, o, l, o - l);
        }
    }
    sink.write("compare.csv", &csv)?;
    let mut s = format!("b0 = {}\nsigma_sqrt = {}\ntheta = {}\nzeta = {}\n\n{table}\n", e(k.b0), e(k.sigma.sqrt()), e(k.theta), e(k.zeta));
    match fit_asymptotics(&runs) {
        Ok(fit) => {
            let rel = |a: f64, b: f64| (a - b) / b;
            let summary = format!(
                "{}b0 relative error {:.3e}\nsigma_sqrt relative error {:.3e}\ntheta relative error {:.3e}\n",
                fit.to_text(),
                rel(fit.b0, k.b0),
                rel(fit.sigma_sqrt, k.sigma.sqrt()),
                rel(fit.theta, k.theta)
            );
            sink.write("fit.txt", &summary)?;
            s.push_str(&summary);
        }
        Err(err) if runs.len() < 3 => {
            let _ = writeln!(s, "fit skipped: {err}");
        }
        Err(err) => return Err(Failure::Numerical(anyhow::Error::new(err).context("fit_asymptotics"))),
    }
    Ok(s)
}

// ---------------------------------------------------------------- birkhoff

pub fn cmd_birkhoff(c: &RunConfig, series: Option<&Path>, sink: &Sink) -> Outcome<String> {
    let path = series
        .map(Path::to_path_buf)
        .or_else(|| c.series.as_ref().map(PathBuf::from))
        .ok_or_else(|| config_err("missing series file (argument or `series = ...`)"))?;
    let mut text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display())).map_err(Failure::Config)?;
    // caps given on the command line or in the config win over the file's
    if let Some(n) = c.order {
        let _ = write!(text, "\norder {n}");
    }
    if let Some(d) = c.degree {
        let _ = write!(text, "\ndegree {d}");
    }
    let input = parse_birkhoff_input(&text).map_err(|e| Failure::Config(anyhow::Error::new(e).context(path.display().to_string())))?;
    let h0 = Series64::h0(&input.space, &input.b);
    let r = birkhoff_normalize(&input.gamma, &h0).map_err(|e| match e {
        NormalFormError::NotInO3(_) | NormalFormError::NonPositiveB => Failure::Config(anyhow::Error::new(e).context("birkhoff_normalize")),
        e => Failure::Numerical(anyhow::Error::new(e).context("birkhoff_normalize")),
    })?;
    let tau = r.tau.to_text();
    let kappa = r.kappa.to_text();
    let cstar = cstar_to_text(&r.cstar);
    sink.write("tau.txt", &tau)?;
    sink.write("kappa.txt", &kappa)?;
    sink.write("cstar.txt", &cstar)?;
    let report = format!(
        "order = {}\ndegree = {}\nkappa_terms = {}\ncstar_entries = {}\nnonresonant_residual = {:.3e}\ncommutator_residual = {:.3e}\n",
        input.space.order,
        input.space.jet_cap,
        kappa.lines().count() - 1,
        r.cstar.len(),
        r.nonresonant_residual,
        r.commutator_residual
    );
    sink.write("birkhoff_report.txt", &report)?;
    if sink.has_dir() {
        Ok(report)
    } else {
        Ok(format!("{report}\n# kappa\n{kappa}\n# c* table\n{cstar}"))
    }
}

// ---------------------------------------------------------------- trajectory

pub fn cmd_trajectory(c: &RunConfig, sink: &Sink) -> Outcome<String> {
    let src = Source::from_config(c)?;
    let need = |v: Option<Vec3>, key: &str| v.ok_or_else(|| config_err(format!("missing `{key}`")));
    let (q0, p0) = (need(c.q0, "q0")?, need(c.p0, "p0")?);
    let t_end = c.t_end.ok_or_else(|| config_err("missing `t_end`"))?;
    let dt = c.dt.ok_or_else(|| config_err("missing `dt`"))?;
    let a = src.potential(c.gauge_center.unwrap_or([0.0; 3]), c.gauge_half_width.unwrap_or(2.0))?;
    let a = a.as_ref();
    let traj = integrate_hamiltonian_sampled(a, q0, p0, t_end, dt, c.record_every.unwrap_or(1)).stage("dynamics")?;
    let gc0 = guiding_center(a, &q0, &p0).stage("dynamics")?;
    let r_l = cyclotron_radius(a, &q0, &p0).stage("dynamics")?;
    let line = field_line_through(&src.field(), gc0, c.line_half_length.unwrap_or(3.0), c.line_step.unwrap_or(0.01)).stage("field line")?;
    let mut line_dist: f64 = 0.0;
    let (mut rmin, mut rmax) = (f64::INFINITY, 0.0f64);
    for s in &traj.states {
        line_dist = line_dist.max(distance_to_polyline(&line, &guiding_center(a, &s.q, &s.p).stage("dynamics")?));
        let r = norm(&std::array::from_fn(|k| s.q[k] - gc0[k]));
        rmin = rmin.min(r);
        rmax = rmax.max(r);
    }
    let rep = adiabatic_diagnostics(&traj, 3);
    let freqs = |v: &[f64]| v.iter().map(|f| format!("{f:.6}")).collect::<Vec<_>>().join(", ");
    let mut s = String::new();
    let _ = writeln!(s, "steps = {}", (t_end / traj.dt).round());
    let _ = writeln!(s, "dt = {}", e(traj.dt));
    let _ = writeln!(s, "h0 = {}", e(traj.diagnostics[0].h));
    let _ = writeln!(s, "h_variation = {:.3e}", rep.h_variation);
    let _ = writeln!(s, "mu0 = {}", e(traj.diagnostics[0].mu));
    let _ = writeln!(s, "mu_variation = {:.3e}", rep.mu_variation);
    let _ = writeln!(s, "mu_range = {}, {}", e(rep.mu_range.0), e(rep.mu_range.1));
    let _ = writeln!(s, "cyclotron_radius0 = {}", e(r_l));
    let _ = writeln!(s, "guiding_center0 = {}", vec3(&gc0));
    let _ = writeln!(s, "distance_to_gc0 = {}, {}", e(rmin), e(rmax));
    let _ = writeln!(s, "gc_line_distance_max = {}", e(line_dist));
    for (k, f) in rep.frequencies.iter().enumerate() {
        let _ = writeln!(s, "frequencies_q{} = {}", k + 1, freqs(f));
    }
    sink.write("trajectory.csv", &traj.to_csv())?;
    sink.write("field_line.csv", &polyline_to_csv(&line))?;
    sink.write("diagnostics.txt", &s)?;
    Ok(s)
}
