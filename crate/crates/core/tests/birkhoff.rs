mod common;

use std::sync::Arc;

use std::collections::BTreeMap;

use common::dense::{self, Poly};
use num_complex::Complex;
use magwell::normal_form::{birkhoff_normalize, from_cstar, FormalSeries, Monomial, Space};
use magwell::{Jet, Series64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cubic_keys() -> Vec<[u8; 4]> {
    dense::basis(3)
}

type C = Complex<f64>;
type Approx = BTreeMap<[u8; 4], C>;

fn engine_series(space: &Arc<Space>, p: &Poly) -> Series64 {
    let mut s = Series64::zero(space);
    for (k, c) in p {
        s = &s + &Series64::monomial(space, Monomial::new(k[0], k[1], k[2], k[3]), dense::to_f64(c));
    }
    s
}

fn to_approx(s: &Series64) -> Approx {
    let mut out = Approx::new();
    for (m, c) in s.terms() {
        assert!(c.cap() >= 0, "coefficient of {m:?} unknown at the working cap");
        for (alpha, v) in c.terms() {
            if alpha.iter().any(|&e| e > 0) {
                assert_eq!(v.norm(), 0.0, "slow-variable dependence in a constant problem");
            }
        }
        out.insert([m.exps[0], m.exps[1], m.exps[2], m.hbar], c.constant_term());
    }
    out
}

/// Largest coefficient difference, plus the largest exact coefficient.
fn max_diff(a: &Approx, exact: &Poly) -> (f64, f64) {
    let mut keys: Vec<[u8; 4]> = a.keys().chain(exact.keys()).cloned().collect();
    keys.sort();
    keys.dedup();
    let zero = C::new(0.0, 0.0);
    let d = keys
        .iter()
        .map(|k| (a.get(k).copied().unwrap_or(zero) - exact.get(k).map(dense::to_f64).unwrap_or(zero)).norm())
        .fold(0.0, f64::max);
    let size = exact.values().map(|c| dense::to_f64(c).norm()).fold(0.0, f64::max);
    (d, size)
}

/// Cubic `gamma` with coefficients `n/64`, `|n| <= 64`, on all 13 cubic monomials.
fn random_gamma(rng: &mut ChaCha8Rng) -> Poly {
    cubic_keys().into_iter().map(|k| (k, dense::q(rng.random_range(-64..=64), 64))).collect()
}

#[test]
fn cubic_gammas_match_dense_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let space = Space::standard(6, 2);
    let b = Jet::constant(3, 2, C::new(1.0, 0.0));
    let h0 = Series64::h0(&space, &b);
    assert_eq!(cubic_keys().len(), 13);
    for _ in 0..20 {
        let g = random_gamma(&mut rng);
        let engine = birkhoff_normalize(&engine_series(&space, &g), &h0).unwrap();
        let oracle = dense::normalize(&g, 6);
        let (dk, size) = max_diff(&to_approx(&engine.kappa), &oracle.kappa);
        let (dt, _) = max_diff(&to_approx(&engine.tau), &oracle.tau);
        assert!(dk < 1e-12 && dt < 1e-12, "kappa {dk:e} (size {size:e}) tau {dt:e}");
        assert!(engine.nonresonant_residual < 1e-12);
        assert!(engine.commutator_residual < 1e-12);
    }
}

#[test]
fn x1_cubed_golden() {
    let space = Space::standard(6, 2);
    let b = Jet::constant(3, 2, C::new(1.0, 0.0));
    let h0 = Series64::h0(&space, &b);
    let g = Series64::monomial(&space, Monomial::new(3, 0, 0, 0), C::new(1.0, 0.0));
    let r = birkhoff_normalize(&g, &h0).unwrap();
    let oracle = dense::normalize(&[([3, 0, 0, 0], dense::q(1, 1))].into_iter().collect(), 6);
    assert!(max_diff(&to_approx(&r.kappa), &oracle.kappa).0 < 1e-13);
    let text = magwell::normal_form::cstar_to_text(&r.cstar);
    let golden = include_str!("golden/x1_cubed_cstar.txt");
    if std::env::var("MAGWELL_BLESS").is_ok() {
        std::fs::write(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/x1_cubed_cstar.txt"), &text).unwrap();
    } else {
        assert_eq!(text, golden);
    }
}

#[test]
fn slow_dependence_is_normalized() {
    // b = 1 + x2/4 + x3^2/8 and gamma = x1^3 + x3 x1 xi1 xi3 + hbar xi1
    let space = Space::standard(6, 3);
    let one = C::new(1.0, 0.0);
    let b = Jet::from_coeffs(3, 3, &[(vec![0, 0, 0], one), (vec![1, 0, 0], one * 0.25), (vec![0, 0, 2], one * 0.125)]);
    let h0 = Series64::h0(&space, &b);
    let g = &(&Series64::monomial(&space, Monomial::new(3, 0, 0, 0), one)
        + &Series64::term(&space, Monomial::new(1, 1, 1, 0), Jet::variable(3, 3, 2, C::new(0.0, 0.0))))
        + &Series64::monomial(&space, Monomial::new(0, 1, 0, 1), one);
    let r = birkhoff_normalize(&g, &h0).unwrap();
    assert!(r.nonresonant_residual < 1e-12, "{}", r.nonresonant_residual);
    assert!(r.commutator_residual < 1e-12, "{}", r.commutator_residual);
    let back = &from_cstar(&space, &r.cstar) - &r.kappa;
    assert!(back.max_abs() < 1e-12);
    assert!(r.cstar.keys().all(|&(l, m, beta)| 2 * l + 2 * m + beta >= 3));
}

#[test]
fn longitudinal_oscillator_structure() {
    // oscillator (x3, xi3~) over jets in (x2, xi2)
    let space = Space::longitudinal(6, 3);
    let one = C::new(1.0, 0.0);
    let nu = Jet::from_coeffs(2, 3, &[(vec![0, 0], one), (vec![1, 0], one * 0.3), (vec![0, 1], one * -0.2)]);
    let h0 = Series64::h0(&space, &nu);
    let x = |a: u8, b: u8, l: u8| Monomial { exps: [a, b, 0], hbar: l };
    let mut g = Series64::zero(&space);
    for (i, m) in [x(3, 0, 0), x(1, 2, 0), x(2, 1, 0), x(0, 1, 1), x(4, 0, 0)].into_iter().enumerate() {
        let c = Jet::from_coeffs(2, 3, &[(vec![0, 0], one * (0.5 - 0.1 * i as f64)), (vec![1, 1], one * 0.2)]);
        g = &g + &Series64::term(&space, m, c);
    }
    let r = birkhoff_normalize(&g, &h0).unwrap();
    assert!(r.nonresonant_residual < 1e-12 && r.commutator_residual < 1e-12);
    // table indexed by (l, m) only, with 2m + 2l >= 3
    assert!(r.cstar.keys().all(|&(l, m, beta)| beta == 0 && 2 * m + 2 * l >= 3));
    assert!(!r.cstar.is_empty());
}

fn series_strategy(space: Arc<Space>, min_deg: u32) -> impl Strategy<Value = Series64> {
    let keys: Vec<Monomial> = (min_deg..=space.order.min(4))
        .flat_map(dense::basis)
        .map(|k| Monomial::new(k[0], k[1], k[2], k[3]))
        .collect();
    let n = keys.len();
    (proptest::collection::vec(-1.0f64..1.0, n), proptest::collection::vec(-1.0f64..1.0, 3)).prop_map(move |(cs, slow)| {
        let mut s = Series64::zero(&space);
        for (k, (m, c)) in keys.iter().zip(cs).enumerate().filter(|(k, _)| k % 3 == 0) {
            // coefficient c (1 + s0 x2 + s1 xi2 + s2 x3) on a sparse subset
            let one = C::new(1.0, 0.0);
            let coeffs = [
                (vec![0, 0, 0], one * c),
                (vec![1, 0, 0], one * slow[0] * c),
                (vec![0, 1, 0], one * slow[1]),
                (vec![0, 0, 1], one * slow[2] * (k as f64 % 2.0)),
            ];
            s = &s + &Series64::term(&space, *m, Jet::from_coeffs(3, space.jet_cap, &coeffs));
        }
        s
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn star_is_associative(
        (a, b, c) in {
            let s = Space::standard(5, 3);
            (series_strategy(s.clone(), 1), series_strategy(s.clone(), 1), series_strategy(s, 1))
        }
    ) {
        let l = a.star(&b).unwrap().star(&c).unwrap();
        let r = a.star(&b.star(&c).unwrap()).unwrap();
        prop_assert!((&l - &r).max_abs() < 1e-12);
    }

    #[test]
    fn lie_bracket_starts_with_poisson(
        (a, b) in {
            let s = Space::standard(6, 3);
            (series_strategy(s.clone(), 2), series_strategy(s, 2))
        }
    ) {
        // i hbar^{-1}[f, g] - {f, g} only has terms with at least one more hbar
        let d = &a.lie(&b).unwrap() - &a.poisson_bracket(&b).unwrap();
        for (m, c) in d.terms() {
            let from_hbar_free = m.hbar == 0 && c.max_abs() > 1e-12;
            prop_assert!(!from_hbar_free, "hbar-free discrepancy at {:?}", m);
        }
    }

    #[test]
    fn exp_ad_inverts(
        (tau, s) in {
            let sp = Space::standard(6, 3);
            (series_strategy(sp.clone(), 3), series_strategy(sp, 2))
        }
    ) {
        let back = FormalSeries::exp_ad(&(-&tau), &FormalSeries::exp_ad(&tau, &s).unwrap()).unwrap();
        prop_assert!((&back - &s).max_abs() < 1e-11);
    }

    #[test]
    fn single_step_error_order(
        tau in series_strategy(Space::standard(7, 3), 3)
    ) {
        let sp = tau.space().clone();
        let b = Jet::constant(3, 3, C::new(1.5, 0.0));
        let h0 = Series64::h0(&sp, &b);
        let t3 = tau.homogeneous(3);
        let e = &(&FormalSeries::exp_ad(&t3, &h0).unwrap() - &h0) - &t3.lie(&h0).unwrap();
        if let Some(v) = e.valuation() {
            prop_assert!(v >= 2 * 3 - 2);
        }
    }

    #[test]
    fn commuting_generator_is_identity(c in -1.0f64..1.0) {
        let sp = Space::standard(6, 2);
        let one = C::new(1.0, 0.0);
        let z2 = Series64::oscillator_energy(&sp);
        let tau = z2.mul(&Series64::monomial(&sp, Monomial::new(0, 0, 1, 0), one * c));
        let s = z2.mul(&z2);
        prop_assert!((&FormalSeries::exp_ad(&tau, &s).unwrap() - &s).max_abs() < 1e-14);
    }
}

#[test]
fn canonical_commutator() {
    let sp = Space::standard(4, 2);
    let one = C::new(1.0, 0.0);
    let x = Series64::monomial(&sp, Monomial::new(1, 0, 0, 0), one);
    let xi = Series64::monomial(&sp, Monomial::new(0, 1, 0, 0), one);
    let c = x.commutator(&xi).unwrap();
    let want = Series64::monomial(&sp, Monomial::new(0, 0, 0, 1), C::new(0.0, 1.0));
    assert_eq!((&c - &want).max_abs(), 0.0);
    assert!(c.min_cap().unwrap() >= 0);
}
