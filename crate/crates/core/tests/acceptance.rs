//! One line per acceptance criterion; exits non-zero when any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use common::dense::{self, Poly};
use magwell::adapted::AdaptedOptions;
use magwell::constants::compute_constants;
use magwell::dynamics::{adiabatic_diagnostics, cyclotron_radius, distance_to_polyline, field_line_through, guiding_center, integrate_hamiltonian_sampled};
use magwell::field::{frame_at, norm, poincare_potential, MagneticField, VectorPotential};
use magwell::normal_form::{birkhoff_normalize, Monomial, Space};
use magwell::spectral::{fit_asymptotics, richardson, solve, BoxRule, GridBox, LanczosOptions};
use magwell::{diff_expr, parse_expr, presets, Expr, Jet, Series64};
use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type C = Complex<f64>;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

// ---------------------------------------------------------------- 1

/// Random analytic potential: a cubic polynomial plus a trigonometric term per component.
fn random_potential(rng: &mut ChaCha8Rng) -> VectorPotential {
    let comp = |rng: &mut ChaCha8Rng| {
        let mut e = Expr::int(0);
        for d in 0..=3u32 {
            for i in 0..=d {
                for j in 0..=d - i {
                    let c = Expr::rational(rng.random_range(-16..=16), 16);
                    e = e + c * Expr::pow(Expr::var(0), i) * Expr::pow(Expr::var(1), j) * Expr::pow(Expr::var(2), d - i - j);
                }
            }
        }
        let k = rng.random_range(0..3);
        let c = Expr::rational(rng.random_range(-8..=8), 8);
        e + c * parse_expr(&format!("sin(q{} - 2*q{})", k + 1, (k + 1) % 3 + 1)).unwrap()
    };
    VectorPotential::new([comp(rng), comp(rng), comp(rng)])
}

fn frame_identities() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let (mut worst, mut count, mut skipped) = (0.0f64, 0, 0);
    while count < 100 {
        let a = random_potential(&mut rng);
        let q: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        let f = frame_at(&a, q).unwrap();
        if norm(&f.field) <= 0.1 {
            skipped += 1;
            continue;
        }
        worst = worst.max(f.max_identity_error());
        count += 1;
    }
    verdict(worst < 1e-12, format!("max identity error {worst:.2e} over {count} fields ({skipped} with |B| <= 0.1 redrawn)"))
}

// ---------------------------------------------------------------- 2

fn random_series(space: &Arc<Space>, rng: &mut ChaCha8Rng) -> Series64 {
    let mut s = Series64::zero(space);
    for k in (1..=4).flat_map(dense::basis) {
        if rng.random_range(0..3) != 0 {
            continue;
        }
        let coeffs: Vec<(Vec<u8>, C)> = [vec![0, 0, 0], vec![1, 0, 0], vec![0, 1, 0], vec![0, 0, 1]]
            .into_iter()
            .map(|a| (a, C::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
            .collect();
        s = &s + &Series64::term(space, Monomial::new(k[0], k[1], k[2], k[3]), Jet::from_coeffs(3, space.jet_cap, &coeffs));
    }
    s
}

fn poly_series(space: &Arc<Space>, p: &Poly) -> Series64 {
    p.iter().fold(Series64::zero(space), |s, (k, c)| &s + &Series64::monomial(space, Monomial::new(k[0], k[1], k[2], k[3]), dense::to_f64(c)))
}

fn constant_part(s: &Series64) -> BTreeMap<[u8; 4], C> {
    s.terms().iter().map(|(m, c)| ([m.exps[0], m.exps[1], m.exps[2], m.hbar], c.constant_term())).collect()
}

fn poly_diff(a: &BTreeMap<[u8; 4], C>, b: &Poly) -> f64 {
    let zero = C::new(0.0, 0.0);
    a.keys()
        .chain(b.keys())
        .map(|k| (a.get(k).copied().unwrap_or(zero) - b.get(k).map(dense::to_f64).unwrap_or(zero)).norm())
        .fold(0.0, f64::max)
}

fn moyal_birkhoff() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let sp = Space::standard(5, 3);
    let mut assoc: f64 = 0.0;
    for _ in 0..10 {
        let (a, b, c) = (random_series(&sp, &mut rng), random_series(&sp, &mut rng), random_series(&sp, &mut rng));
        let l = a.star(&b).unwrap().star(&c).unwrap();
        let r = a.star(&b.star(&c).unwrap()).unwrap();
        assoc = assoc.max((&l - &r).max_abs());
    }
    let sp4 = Space::standard(4, 2);
    let one = C::new(1.0, 0.0);
    let x = Series64::monomial(&sp4, Monomial::new(1, 0, 0, 0), one);
    let xi = Series64::monomial(&sp4, Monomial::new(0, 1, 0, 0), one);
    let ihbar = Series64::monomial(&sp4, Monomial::new(0, 0, 0, 1), C::new(0.0, 1.0));
    let canonical = (&x.commutator(&xi).unwrap() - &ihbar).max_abs();

    let space = Space::standard(6, 2);
    let h0 = Series64::h0(&space, &Jet::constant(3, 2, one));
    let z2 = Series64::oscillator_energy(&space);
    let (mut oracle_diff, mut comm, mut dense_comm) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let g: Poly = dense::basis(3).into_iter().map(|k| (k, dense::q(rng.random_range(-64..=64), 64))).collect();
        let engine = birkhoff_normalize(&poly_series(&space, &g), &h0).unwrap();
        let oracle = dense::normalize(&g, 6);
        oracle_diff = oracle_diff.max(poly_diff(&constant_part(&engine.kappa), &oracle.kappa));
        oracle_diff = oracle_diff.max(poly_diff(&constant_part(&engine.tau), &oracle.tau));
        comm = comm.max(engine.kappa.commutator(&z2).unwrap().max_abs());
        let dz = dense::add(&dense::star(&oracle.kappa, &dense::z2(), 6), &dense::star(&dense::z2(), &oracle.kappa, 6), -1);
        dense_comm = dense_comm.max(dz.values().map(|c| dense::to_f64(c).norm()).fold(0.0, f64::max));
    }
    let pass = assoc < 1e-12 && canonical == 0.0 && oracle_diff < 1e-12 && comm < 1e-12 && dense_comm == 0.0;
    verdict(
        pass,
        format!(
            "associativity {assoc:.1e}, [x1, xi1] - i hbar {canonical:.1e}, engine vs dense oracle {oracle_diff:.1e} over 20 gammas, [kappa, |z1|^2] {comm:.1e} (oracle {dense_comm:.1e})"
        ),
    )
}

// ---------------------------------------------------------------- 3

fn constant_routes() -> Verdict {
    let opts = AdaptedOptions::default();
    let mirror = presets::mirror_potential(2.into(), 5.into(), magwell::Rational::new(1, 40)).curl();
    let fields: [(&str, MagneticField, [f64; 3]); 4] = [
        ("figure1", presets::figure1_field(), [0.0; 3]),
        ("quadratic", presets::quadratic_potential().curl(), [0.1, -0.1, 0.1]),
        ("mirror", mirror, [0.2, 0.1, -0.3]),
        ("generic", presets::generic_field(), [0.0, 0.0, 0.5]),
    ];
    let mut worst = 0.0f64;
    let mut parts = Vec::new();
    for (name, b, seed) in fields {
        let r = compute_constants(&b, seed, &opts).unwrap();
        worst = worst.max(r.route_disagreement());
        parts.push(format!("{name} {:.1e}", r.route_disagreement()));
    }
    verdict(worst < 1e-6, format!("relative route disagreement: {}", parts.join(", ")))
}

// ---------------------------------------------------------------- 4

fn spectral_comparison() -> Verdict {
    let a = presets::quadratic_potential();
    let k = compute_constants(&a.curl(), [0.1, 0.1, 0.1], &AdaptedOptions::default()).unwrap().constants;
    let dir = a.curl().value(&k.q0).unwrap();
    let opts = LanczosOptions::default();
    let mut runs = Vec::new();
    for h in [0.5, 0.35, 0.25, 0.18] {
        let g = BoxRule::SPHEROID.grid_box(&k, &dir, h);
        let coarse = solve(&a, h, g, 36, 4, &opts).unwrap();
        let fine = solve(&a, h, g, 48, 4, &opts).unwrap();
        runs.push(richardson(&coarse, &fine));
    }
    let fit = fit_asymptotics(&runs).unwrap();
    let rel = |x: f64, y: f64| (x - y).abs() / y.abs();
    let (eb, es, et) = (rel(fit.b0, k.b0), rel(fit.sigma_sqrt, k.sigma.sqrt()), rel(fit.theta, k.theta));
    verdict(
        eb < 0.02 && es < 0.15 && et < 0.25,
        format!(
            "b0 {:.5} vs {:.5} ({:.2}%), sigma^1/2 {:.5} vs {:.5} ({:.1}%), gap {:.5} vs theta {:.5} ({:.1}%)",
            fit.b0,
            k.b0,
            100.0 * eb,
            fit.sigma_sqrt,
            k.sigma.sqrt(),
            100.0 * es,
            fit.theta,
            k.theta,
            100.0 * et
        ),
    )
}

// ---------------------------------------------------------------- 5

fn oracle_self_check() -> Verdict {
    let zero = VectorPotential::new([Expr::int(0), Expr::int(0), Expr::int(0)]);
    let opts = LanczosOptions::default();
    let exact = 3.0 * PI * PI;
    let errs: Vec<f64> =
        [8, 16, 32].iter().map(|&n| (solve(&zero, 1.0, GridBox::cube([0.5; 3], 1.0), n, 1, &opts).unwrap().eigenvalues[0] - exact).abs()).collect();
    let orders: Vec<f64> = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let a = presets::quadratic_potential();
    let phi = parse_expr("q1*q2*q3/3 + q1^3/5 - q2^2*q3/4 + 2*q3").unwrap();
    let shifted = VectorPotential::new(std::array::from_fn(|k| a.components()[k].clone() + diff_expr(&phi, k)));
    let k = magwell::ModelConstants::new(1.0, 1.0 / 9.0, 1.0 / 9.0, 0.0);
    let g = BoxRule::SPHEROID.grid_box(&k, &[0.0, 0.0, 1.0], 0.5);
    let r1 = solve(&a, 0.5, g, 16, 4, &opts).unwrap();
    let r2 = solve(&shifted, 0.5, g, 16, 4, &opts).unwrap();
    let gauge = r1.eigenvalues.iter().zip(&r2.eigenvalues).map(|(x, y)| (x - y).abs() / x.abs()).fold(0.0, f64::max);
    verdict(
        orders.iter().all(|o| (1.7..=2.3).contains(o)) && gauge < 1e-8,
        format!("Dirichlet orders {:.3}, {:.3}; gauge shift {gauge:.1e}", orders[0], orders[1]),
    )
}

// ---------------------------------------------------------------- 6

fn dynamics() -> Verdict {
    let b = presets::figure1_field();
    let a = poincare_potential(&b, [0.0; 3], 2.0).unwrap();
    let (q0, p0) = (presets::FIGURE1_Q0, presets::FIGURE1_P0);
    let tr = integrate_hamiltonian_sampled(&a, q0, p0, 50.0, 2e-4, 1).unwrap();
    let rep = adiabatic_diagnostics(&tr, 1);
    let line = field_line_through(&b, guiding_center(&a, &q0, &p0).unwrap(), 6.0, 0.01).unwrap();
    let mut track: f64 = 0.0;
    for s in tr.states.iter().step_by(50) {
        let g = guiding_center(&a, &s.q, &s.p).unwrap();
        track = track.max(distance_to_polyline(&line, &g) / cyclotron_radius(&a, &s.q, &s.p).unwrap());
    }
    let circle = presets::circle_potential();
    let ct = integrate_hamiltonian_sampled(&circle, presets::CIRCLE_Q0, presets::CIRCLE_P0, PI, 5e-4, 1).unwrap();
    let circle_err = ct
        .states
        .iter()
        .map(|s| {
            let want = [1.5 - 0.5 * (2.0 * s.t).cos(), 0.5 * (2.0 * s.t).sin(), 0.0];
            norm(&std::array::from_fn(|k| s.q[k] - want[k]))
        })
        .fold(0.0, f64::max);
    let parts = [
        (rep.h_variation < 1e-8, format!("H drift {:.2e}", rep.h_variation)),
        (rep.mu_variation < 0.05, format!("mu variation {:.1}%", 100.0 * rep.mu_variation)),
        (track < 1.0, format!("guiding center distance {track:.2} cyclotron radii")),
        (circle_err < 1e-6, format!("circle error {circle_err:.1e}")),
    ];
    let detail = parts.iter().map(|(ok, d)| format!("{d} [{}]", if *ok { "ok" } else { "FAIL" })).collect::<Vec<_>>().join(", ");
    verdict(parts.iter().all(|p| p.0), detail)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict, f64); 6] = [
        ("frame identities", frame_identities, 5.0),
        ("Moyal/Birkhoff suite", moyal_birkhoff, 30.0),
        ("constant cross-validation", constant_routes, 10.0),
        ("spectral comparison", spectral_comparison, 900.0),
        ("oracle self-check", oracle_self_check, 120.0),
        ("dynamics", dynamics, 60.0),
    ];
    let mut failed = 0;
    for (i, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let v = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let pass = v.pass && secs < limit;
        failed += usize::from(!pass);
        println!("criterion {} {name}: {} - {}; {secs:.1} s of {limit} s", i + 1, if pass { "PASS" } else { "FAIL" }, v.detail);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of 6 criteria failed");
        ExitCode::FAILURE
    }
}
