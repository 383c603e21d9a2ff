//! Exact dense reference normalizer for constant-coefficient series in
//! `(x, xi, xi3, hbar)` with `H0 = xi3^2 + x^2 + xi^2`.
//!
//! Works on coefficient vectors of each homogeneous slice over complex
//! rationals. The homological step builds the matrix of
//! `tau -> i hbar^{-1} [tau, |z|^2]` and splits the remainder with spectral
//! projectors applied as matrix polynomials, so it shares no code path with
//! the complex-coordinate solver of the library.

use std::collections::BTreeMap;

use num_complex::Complex;
use num_rational::Ratio;
use num_traits::{One, Zero};

/// Exact complex rationals; every operation is overflow-checked in test builds.
pub type R = Ratio<i128>;
pub type Q = Complex<R>;
/// Exponents of `x, xi, xi3, hbar`.
pub type Key = [u8; 4];
pub type Poly = BTreeMap<Key, Q>;

pub fn q(n: i64, d: i64) -> Q {
    Complex::new(R::new(n as i128, d as i128), R::zero())
}

fn i_unit() -> Q {
    Complex::new(R::zero(), R::one())
}

pub fn to_f64(c: &Q) -> Complex<f64> {
    let f = |r: &R| *r.numer() as f64 / *r.denom() as f64;
    Complex::new(f(&c.re), f(&c.im))
}

pub fn degree(k: &Key) -> u32 {
    k[0] as u32 + k[1] as u32 + k[2] as u32 + 2 * k[3] as u32
}

fn add_to(p: &mut Poly, k: Key, c: Q) {
    let e = p.entry(k).or_insert_with(Q::zero);
    *e = &*e + c;
}

fn clean(mut p: Poly) -> Poly {
    p.retain(|_, c| !c.is_zero());
    p
}

pub fn add(a: &Poly, b: &Poly, s: i64) -> Poly {
    let mut out = a.clone();
    for (k, c) in b {
        add_to(&mut out, *k, c * q(s, 1));
    }
    clean(out)
}

fn fact(n: u32) -> i64 {
    (1..=n as i64).product()
}

fn falling(n: u8, k: u32) -> i64 {
    (0..k as i64).map(|j| n as i64 - j).product()
}

/// Moyal product in the single pair `(x, xi)`; `xi3` is central here.
pub fn star(f: &Poly, g: &Poly, order: u32) -> Poly {
    let mut out = Poly::new();
    for (kf, cf) in f {
        for (kg, cg) in g {
            if degree(kf) + degree(kg) > order {
                continue;
            }
            // d_x^a d_xi^b f * d_xi^a d_x^b g
            for a in 0..=kf[0].min(kg[1]) as u32 {
                for b in 0..=kf[1].min(kg[0]) as u32 {
                    let k = a + b;
                    let sign = if b % 2 == 1 { -1 } else { 1 };
                    let num = falling(kf[0], a) * falling(kf[1], b) * falling(kg[1], a) * falling(kg[0], b) * sign;
                    let mut w = q(num, fact(a) * fact(b) * (1 << k));
                    for _ in 0..k {
                        w = w * i_unit();
                    }
                    let key = [
                        kf[0] + kg[0] - (a + b) as u8,
                        kf[1] + kg[1] - (a + b) as u8,
                        kf[2] + kg[2],
                        kf[3] + kg[3] + k as u8,
                    ];
                    if degree(&key) <= order {
                        add_to(&mut out, key, cf * cg * w);
                    }
                }
            }
        }
    }
    clean(out)
}

/// `i hbar^{-1} [f, g]` modulo degree `> order`.
pub fn lie(f: &Poly, g: &Poly, order: u32) -> Poly {
    let c = add(&star(f, g, order + 2), &star(g, f, order + 2), -1);
    let mut out = Poly::new();
    for (k, v) in c {
        assert!(k[3] > 0, "commutator term without hbar");
        let key = [k[0], k[1], k[2], k[3] - 1];
        if degree(&key) <= order {
            add_to(&mut out, key, v * i_unit());
        }
    }
    clean(out)
}

pub fn exp_ad(tau: &Poly, s: &Poly, order: u32) -> Poly {
    let mut sum = s.clone();
    let mut term = s.clone();
    for j in 1..=order as i64 {
        term = lie(tau, &term, order).into_iter().map(|(k, v)| (k, v * q(1, j))).collect();
        if term.is_empty() {
            break;
        }
        sum = add(&sum, &term, 1);
    }
    sum
}

pub fn z2() -> Poly {
    [([2, 0, 0, 0], q(1, 1)), ([0, 2, 0, 0], q(1, 1))].into_iter().collect()
}

pub fn h0() -> Poly {
    let mut p = z2();
    p.insert([0, 0, 2, 0], q(1, 1));
    p
}

/// Basis of the degree-`k` slice.
pub fn basis(k: u32) -> Vec<Key> {
    let mut out = Vec::new();
    for l in 0..=k / 2 {
        let r = k - 2 * l;
        for a in 0..=r {
            for b in 0..=r - a {
                out.push([a as u8, b as u8, (r - a - b) as u8, l as u8]);
            }
        }
    }
    out
}

type Mat = Vec<Vec<Q>>;

fn matvec(m: &Mat, v: &[Q]) -> Vec<Q> {
    m.iter().map(|row| row.iter().zip(v).fold(Q::zero(), |acc, (a, b)| acc + a * b)).collect()
}

/// Matrix of `tau -> i hbar^{-1} [tau, |z|^2]` on the degree-`k` slice.
pub fn ad_matrix(k: u32) -> (Vec<Key>, Mat) {
    let basis = basis(k);
    let n = basis.len();
    let z = z2();
    let mut m = vec![vec![Q::zero(); n]; n];
    for (j, key) in basis.iter().enumerate() {
        let e: Poly = [(*key, q(1, 1))].into_iter().collect();
        let img = lie(&e, &z, k);
        for kk in img.keys() {
            assert_eq!(degree(kk), k, "ad_|z|^2 must preserve degree");
        }
        for (i, bk) in basis.iter().enumerate() {
            m[i][j] = img.get(bk).cloned().unwrap_or_else(Q::zero);
        }
    }
    (basis, m)
}

/// `P_mu v` with the spectrum of `m` inside `{2 i j : |j| <= k}`.
fn project(m: &Mat, k: u32, mu_j: i32, v: &[Q]) -> Vec<Q> {
    let mut out = v.to_vec();
    let mu = i_unit() * q(2 * mu_j as i64, 1);
    for j in -(k as i32)..=(k as i32) {
        if j == mu_j {
            continue;
        }
        let lam = i_unit() * q(2 * j as i64, 1);
        let mv = matvec(m, &out);
        let inv = Q::one() / (&mu - &lam);
        out = mv.iter().zip(&out).map(|(a, b)| (a - b * &lam) * &inv).collect();
    }
    out
}

pub struct DenseResult {
    pub tau: Poly,
    pub kappa: Poly,
}

pub fn normalize(gamma: &Poly, order: u32) -> DenseResult {
    let full = add(&h0(), gamma, 1);
    let mut tau = Poly::new();
    for k in 3..=order {
        let cur = exp_ad(&tau, &full, order);
        let (basis, m) = ad_matrix(k);
        let rv: Vec<Q> = basis.iter().map(|b| cur.get(b).cloned().unwrap_or_else(Q::zero)).collect();
        let mut tv = vec![Q::zero(); basis.len()];
        for j in -(k as i32)..=(k as i32) {
            if j == 0 {
                continue;
            }
            let inv_mu = Q::one() / (i_unit() * q(2 * j as i64, 1));
            for (t, p) in tv.iter_mut().zip(project(&m, k, j, &rv)) {
                *t = &*t - p * &inv_mu;
            }
        }
        let step: Poly = clean(basis.iter().cloned().zip(tv).collect());
        tau = add(&tau, &step, 1);
    }
    let kappa = add(&exp_ad(&tau, &full, order), &h0(), -1);
    DenseResult { tau, kappa }
}
