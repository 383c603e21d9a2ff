use std::f64::consts::PI;

use magwell::field::{Potential, VectorPotential};
use magwell::spectral::{
    assemble_magnetic_laplacian, lowest_eigenvalues, richardson, solve, BoxRule, GridBox, HermitianOperator, LanczosOptions,
};
use magwell::{diff_expr, parse_expr, presets, Expr, ModelConstants};
use proptest::prelude::*;

fn zero_potential() -> VectorPotential {
    VectorPotential::new([Expr::int(0), Expr::int(0), Expr::int(0)])
}

fn regauge(a: &VectorPotential, phi: &Expr) -> VectorPotential {
    let c = a.components();
    VectorPotential::new(std::array::from_fn(|k| c[k].clone() + diff_expr(phi, k)))
}

fn quadratic_constants() -> ModelConstants<f64> {
    ModelConstants::new(1.0, 1.0 / 9.0, 1.0 / 9.0, 0.0)
}

#[test]
fn dirichlet_box_second_order() {
    let exact = 3.0 * PI * PI;
    let opts = LanczosOptions::default();
    let errs: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let r = solve(&zero_potential(), 1.0, GridBox::cube([0.5; 3], 1.0), n, 1, &opts).unwrap();
            (r.eigenvalues[0] - exact).abs()
        })
        .collect();
    for w in errs.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((1.7..=2.3).contains(&order), "observed order {order}");
    }
}

#[test]
fn richardson_removes_second_order_error() {
    let exact = 3.0 * PI * PI;
    let opts = LanczosOptions::default();
    let g = GridBox::cube([0.5; 3], 1.0);
    let c = solve(&zero_potential(), 1.0, g, 18, 1, &opts).unwrap();
    let f = solve(&zero_potential(), 1.0, g, 24, 1, &opts).unwrap();
    let e = richardson(&c, &f);
    assert!((e.eigenvalues[0] - exact).abs() < 0.05 * (f.eigenvalues[0] - exact).abs());
}

#[test]
fn hbar_scaling_without_field() {
    // A = 0: the spectrum is hbar^2 times the hbar = 1 spectrum
    let opts = LanczosOptions::default();
    let g = GridBox::cube([0.0; 3], 2.0);
    let one = solve(&zero_potential(), 1.0, g, 12, 3, &opts).unwrap();
    let small = solve(&zero_potential(), 0.3, g, 12, 3, &opts).unwrap();
    for (a, b) in one.eigenvalues.iter().zip(&small.eigenvalues) {
        assert!((b - 0.09 * a).abs() < 1e-10 * a);
    }
}

#[test]
fn gauge_shift_leaves_spectrum_unchanged() {
    let a = presets::quadratic_potential();
    let phi = parse_expr("q1*q2*q3/3 + q1^3/5 - q2^2*q3/4 + 2*q3").unwrap();
    let b = regauge(&a, &phi);
    let g = BoxRule::SPHEROID.grid_box(&quadratic_constants(), &[0.0, 0.0, 1.0], 0.5);
    let opts = LanczosOptions::default();
    let r1 = solve(&a, 0.5, g, 16, 4, &opts).unwrap();
    let r2 = solve(&b, 0.5, g, 16, 4, &opts).unwrap();
    for (x, y) in r1.eigenvalues.iter().zip(&r2.eigenvalues) {
        assert!((x - y).abs() < 1e-8 * x.abs(), "{x} {y}");
    }
    assert!(r1.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn magnetic_operator_is_hermitian() {
    let a = presets::quadratic_potential();
    let g = GridBox { center: [0.1, -0.2, 0.3], lengths: [3.0, 2.0, 4.0] };
    let op = assemble_magnetic_laplacian(&a, 0.35, g, 14).unwrap();
    assert!(op.hermiticity_defect(11) < 1e-14);
    // every link entry has modulus hbar^2 / h^2
    let h = op.spacing();
    for ax in 0..3 {
        let e = op.link_entry(ax, 0).unwrap();
        assert!((e.norm() - 0.35f64.powi(2) / (h[ax] * h[ax])).abs() < 1e-12);
    }
}

#[test]
fn confinement_window() {
    // lambda_1 / hbar lies between b0 and the smallest |B| on the box walls
    let a = presets::quadratic_potential();
    let b = a.curl();
    let hbar = 0.2;
    let g = BoxRule::SPHEROID.grid_box(&quadratic_constants(), &[0.0, 0.0, 1.0], hbar);
    let r = solve(&a, hbar, g, 24, 1, &LanczosOptions::default()).unwrap();
    let mut beta0 = f64::INFINITY;
    for ax in 0..3 {
        for s in [-0.5, 0.5] {
            let mut q = g.center;
            q[ax] += s * g.lengths[ax];
            beta0 = beta0.min(b.strength(&q).unwrap());
        }
    }
    let ratio = r.eigenvalues[0] / hbar;
    assert!(1.0 < ratio && ratio < beta0, "{ratio} not in (1, {beta0})");
}

#[test]
fn seeded_runs_are_reproducible() {
    let a = presets::quadratic_potential();
    let g = GridBox::cube([0.0; 3], 6.0);
    let op = assemble_magnetic_laplacian(&a, 0.5, g, 12).unwrap();
    let opts = LanczosOptions { seed: 42, ..LanczosOptions::default() };
    let r1 = lowest_eigenvalues(&op, 3, &opts).unwrap();
    let r2 = lowest_eigenvalues(&op, 3, &opts).unwrap();
    assert_eq!(r1.values, r2.values);
    assert_eq!(op.dim(), 11 * 11 * 11);
    let field = a.field(&[0.0; 3]).unwrap();
    assert_eq!(field, [0.0, 0.0, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn cubic_gauge_changes_are_exact(c in proptest::collection::vec(-1.0f64..1.0, 4)) {
        let phi = parse_expr(&format!(
            "({:.6})*q1*q2*q3 + ({:.6})*q1^2*q2 + ({:.6})*q3^3 + ({:.6})*q2", c[0], c[1], c[2], c[3]
        )).unwrap();
        let a = presets::quadratic_potential();
        let g = GridBox { center: [0.2, 0.0, -0.1], lengths: [4.0, 4.0, 6.0] };
        let opts = LanczosOptions::default();
        let r1 = solve(&a, 0.5, g, 10, 2, &opts).unwrap();
        let r2 = solve(&regauge(&a, &phi), 0.5, g, 10, 2, &opts).unwrap();
        for (x, y) in r1.eigenvalues.iter().zip(&r2.eigenvalues) {
            prop_assert!((x - y).abs() < 1e-8 * x.abs());
        }
    }
}
