//! Graded formal series over jet coefficients, the Weyl-Moyal product and
//! the Birkhoff normalization around `H0 = xi3^2 + b (x1^2 + xi1^2)`.
//!
//! A series lives in a [`Space`]: a few polynomial variables graded by degree
//! (with `hbar` of degree 2) and coefficients that are jets in the remaining
//! slow variables. Canonical pairs may mix the two kinds, e.g. `(x3, xi3)` has
//! its position in the jet and its momentum in the polynomial part.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Zero;
use thiserror::Error;

use crate::jet::{Jet, JetError};
use crate::scalar::{ComplexScalar, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NormalFormError {
    #[error("series live in different spaces")]
    Incompatible,
    #[error("generator must have valuation >= 3, found {0}")]
    GeneratorValuation(u32),
    #[error("gamma must lie in O_3 (valuation >= 3), found valuation {0}")]
    NotInO3(u32),
    #[error("b must have a positive real constant term")]
    NonPositiveB,
    #[error("H0 is not of the form free + b |z|^2: {0}")]
    BadH0(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Jet(#[from] JetError),
}

/// Exponents of the polynomial variables and of `hbar`.
///
/// In the standard space `exps = [alpha1, alpha2, beta]` are the powers of
/// `x1, xi1, xi3` and `hbar` is `l`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    pub exps: [u8; 3],
    pub hbar: u8,
}

impl Monomial {
    pub const ONE: Monomial = Monomial { exps: [0; 3], hbar: 0 };

    pub fn new(alpha1: u8, alpha2: u8, beta: u8, l: u8) -> Self {
        Monomial { exps: [alpha1, alpha2, beta], hbar: l }
    }

    pub fn degree(&self) -> u32 {
        self.exps.iter().map(|&e| e as u32).sum::<u32>() + 2 * self.hbar as u32
    }

    fn times(&self, o: &Monomial) -> Monomial {
        Monomial { exps: std::array::from_fn(|i| self.exps[i] + o.exps[i]), hbar: self.hbar + o.hbar }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Slot {
    Poly(usize),
    Jet(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Space {
    pub poly_names: Vec<&'static str>,
    pub jet_names: Vec<&'static str>,
    /// Canonical pairs `(position, momentum)`.
    pub pairs: Vec<(Slot, Slot)>,
    /// Polynomial indices of the oscillator `(x, xi)` used for resonance.
    pub oscillator: (usize, usize),
    /// Truncation degree `N`.
    pub order: u32,
    /// Jet cap `D` of freshly built coefficients.
    pub jet_cap: i32,
}

impl Space {
    /// `(x1, xi1, xi3, hbar)` over jets in `(x2, xi2, x3)`.
    pub fn standard(order: u32, jet_cap: i32) -> Arc<Space> {
        Arc::new(Space {
            poly_names: vec!["x1", "xi1", "xi3"],
            jet_names: vec!["x2", "xi2", "x3"],
            pairs: vec![(Slot::Poly(0), Slot::Poly(1)), (Slot::Jet(0), Slot::Jet(1)), (Slot::Jet(2), Slot::Poly(2))],
            oscillator: (0, 1),
            order,
            jet_cap,
        })
    }

    /// `(x3, xi3~, hbar)` over jets in `(x2, xi2)`: the oscillator of the
    /// second normalization.
    pub fn longitudinal(order: u32, jet_cap: i32) -> Arc<Space> {
        Arc::new(Space {
            poly_names: vec!["x3", "xi3"],
            jet_names: vec!["x2", "xi2"],
            pairs: vec![(Slot::Poly(0), Slot::Poly(1)), (Slot::Jet(0), Slot::Jet(1))],
            oscillator: (0, 1),
            order,
            jet_cap,
        })
    }

    pub fn njet(&self) -> usize {
        self.jet_names.len()
    }
}

fn falling(n: u8, k: u8) -> i64 {
    (0..k as i64).map(|j| n as i64 - j).product()
}

fn factorial(n: u32) -> i64 {
    (1..=n as i64).product()
}

fn binomial(n: u32, k: u32) -> i64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

#[derive(Clone, Debug)]
pub struct FormalSeries<C> {
    space: Arc<Space>,
    terms: BTreeMap<Monomial, Jet<C>>,
}

impl<C: Scalar> PartialEq for FormalSeries<C> {
    fn eq(&self, o: &Self) -> bool {
        self.space == o.space && self.terms == o.terms
    }
}

fn accumulate<C: Scalar>(map: &mut BTreeMap<Monomial, Jet<C>>, m: Monomial, c: Jet<C>) {
    match map.get_mut(&m) {
        Some(e) => *e += &c,
        None => {
            map.insert(m, c);
        }
    }
}

impl<C: ComplexScalar> FormalSeries<C> {
    pub fn zero(space: &Arc<Space>) -> Self {
        FormalSeries { space: space.clone(), terms: BTreeMap::new() }
    }

    /// Builds a series from `(monomial, coefficient)` pairs, dropping terms above the order.
    pub fn from_terms(space: &Arc<Space>, terms: impl IntoIterator<Item = (Monomial, Jet<C>)>) -> Self {
        let mut map = BTreeMap::new();
        for (m, c) in terms {
            if m.degree() <= space.order {
                accumulate(&mut map, m, c);
            }
        }
        Self::from_map(space, map)
    }

    fn from_map(space: &Arc<Space>, mut terms: BTreeMap<Monomial, Jet<C>>) -> Self {
        // An absent monomial is an exact zero. A zero jet below the full cap
        // still records that the coefficient is only known to that order.
        terms.retain(|m, c| m.degree() <= space.order && (!c.is_zero() || c.cap() < space.jet_cap));
        FormalSeries { space: space.clone(), terms }
    }

    /// `c * m` with a constant coefficient.
    pub fn monomial(space: &Arc<Space>, m: Monomial, c: C) -> Self {
        Self::from_terms(space, [(m, Jet::constant(space.njet(), space.jet_cap, c))])
    }

    /// `c(slow) * m`.
    pub fn term(space: &Arc<Space>, m: Monomial, c: Jet<C>) -> Self {
        Self::from_terms(space, [(m, c)])
    }

    /// `x^2 + xi^2` of the oscillator.
    pub fn oscillator_energy(space: &Arc<Space>) -> Self {
        let (a, b) = space.oscillator;
        let mut mx = Monomial::ONE;
        mx.exps[a] = 2;
        let mut mxi = Monomial::ONE;
        mxi.exps[b] = 2;
        &Self::monomial(space, mx, C::one()) + &Self::monomial(space, mxi, C::one())
    }

    /// `free + b (x^2 + xi^2)`; in the standard space `free` is `xi3^2`.
    pub fn h0(space: &Arc<Space>, b: &Jet<C>) -> Self {
        let osc = Self::oscillator_energy(space).mul_jet(b);
        if space.poly_names.len() > 2 {
            &osc + &Self::monomial(space, Monomial { exps: [0, 0, 2], hbar: 0 }, C::one())
        } else {
            osc
        }
    }

    pub fn space(&self) -> &Arc<Space> {
        &self.space
    }

    pub fn order(&self) -> u32 {
        self.space.order
    }

    pub fn terms(&self) -> &BTreeMap<Monomial, Jet<C>> {
        &self.terms
    }

    pub fn coeff(&self, m: &Monomial) -> Option<&Jet<C>> {
        self.terms.get(m)
    }

    /// True when every stored coefficient vanishes (to its cap).
    pub fn is_zero(&self) -> bool {
        self.terms.values().all(|c| c.is_zero())
    }

    /// Equality of all coefficients, each up to the smaller of the two caps.
    pub fn agrees_with(&self, o: &Self) -> bool {
        (self - o).is_zero()
    }

    /// Smallest jet cap over stored coefficients.
    pub fn min_cap(&self) -> Option<i32> {
        self.terms.values().map(|c| c.cap()).min()
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.max_abs()).fold(0.0, f64::max)
    }

    /// Smallest degree of a stored monomial; `None` for the zero series.
    pub fn valuation(&self) -> Option<u32> {
        self.terms.iter().filter(|(_, c)| !c.is_zero()).map(|(m, _)| m.degree()).min()
    }

    pub fn homogeneous(&self, k: u32) -> Self {
        Self::from_map(&self.space, self.terms.iter().filter(|(m, _)| m.degree() == k).map(|(m, c)| (*m, c.clone())).collect())
    }

    /// Homogeneous parts in increasing degree; they sum back to `self`.
    pub fn grade_decompose(&self) -> Vec<(u32, Self)> {
        let mut degs: Vec<u32> = self.terms.keys().map(|m| m.degree()).collect();
        degs.sort_unstable();
        degs.dedup();
        degs.into_iter().map(|k| (k, self.homogeneous(k))).collect()
    }

    /// Drops monomials of degree above `order`.
    pub fn truncate(&self, order: u32) -> Self {
        Self::from_map(&self.space, self.terms.iter().filter(|(m, _)| m.degree() <= order).map(|(m, c)| (*m, c.clone())).collect())
    }

    pub fn scale(&self, s: &C) -> Self {
        Self::from_map(&self.space, self.terms.iter().map(|(m, c)| (*m, c.scale(s))).collect())
    }

    pub fn mul_jet(&self, j: &Jet<C>) -> Self {
        Self::from_map(&self.space, self.terms.iter().map(|(m, c)| (*m, c.mul_jet(j))).collect())
    }

    pub fn map_coeffs(&self, f: impl Fn(&Jet<C>) -> Jet<C>) -> Self {
        Self::from_map(&self.space, self.terms.iter().map(|(m, c)| (*m, f(c))).collect())
    }

    fn check(&self, o: &Self) -> Result<(), NormalFormError> {
        if Arc::ptr_eq(&self.space, &o.space) || self.space == o.space {
            Ok(())
        } else {
            Err(NormalFormError::Incompatible)
        }
    }

    fn compatible(&self, o: &Self) {
        self.check(o).expect("formal series from different spaces");
    }

    /// Commutative (pointwise) product.
    pub fn mul(&self, o: &Self) -> Self {
        self.compatible(o);
        let mut map = BTreeMap::new();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let m = ma.times(mb);
                if m.degree() <= self.space.order {
                    accumulate(&mut map, m, ca.mul_jet(cb));
                }
            }
        }
        Self::from_map(&self.space, map)
    }

    /// Partial derivative in a slot.
    pub fn partial(&self, slot: Slot) -> Self {
        let mut map = BTreeMap::new();
        for (m, c) in &self.terms {
            match slot {
                Slot::Poly(i) => {
                    if m.exps[i] > 0 {
                        let mut d = *m;
                        d.exps[i] -= 1;
                        accumulate(&mut map, d, c.scale(&C::from_int(m.exps[i] as i64)));
                    }
                }
                Slot::Jet(j) => accumulate(&mut map, *m, c.partial(j)),
            }
        }
        Self::from_map(&self.space, map)
    }

    /// Weyl-Moyal product truncated at the space order.
    pub fn star(&self, o: &Self) -> Result<Self, NormalFormError> {
        self.check(o)?;
        Ok(Self::from_map(&self.space, self.star_map(o, self.space.order)))
    }

    fn star_map(&self, o: &Self, order: u32) -> BTreeMap<Monomial, Jet<C>> {
        self.star_map_parity(o, order, false)
    }

    fn star_map_parity(&self, o: &Self, order: u32, odd_only: bool) -> BTreeMap<Monomial, Jet<C>> {
        let mut out = BTreeMap::new();
        let half_i = C::i() * C::from_ratio(1, 2);
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let base = ma.degree() + mb.degree();
                if base > order {
                    continue;
                }
                let mut job = StarJob {
                    space: &self.space,
                    budget: order - base,
                    ca,
                    cb,
                    out: &mut out,
                    half_i: &half_i,
                    odd_only,
                };
                let nj = self.space.njet();
                job.recurse(0, *ma, *mb, C::one(), vec![0; nj], vec![0; nj], 0, 0);
            }
        }
        out
    }

    pub fn star_with_order(&self, o: &Self, order: u32) -> Result<Self, NormalFormError> {
        self.check(o)?;
        let space = Arc::new(Space { order, ..(*self.space).clone() });
        let a = FormalSeries { space: space.clone(), terms: self.terms.clone() };
        let b = FormalSeries { space: space.clone(), terms: o.terms.clone() };
        Ok(Self::from_map(&space, a.star_map(&b, order)))
    }

    /// `f * g - g * f`.
    pub fn commutator(&self, o: &Self) -> Result<Self, NormalFormError> {
        Ok(&self.star(o)? - &o.star(self)?)
    }

    /// `i hbar^{-1} [self, s]`, truncated at the space order.
    ///
    /// Swapping the factors flips the sign of the odd-order Moyal terms and
    /// keeps the even ones, so the commutator is twice the odd part.
    pub fn lie(&self, s: &Self) -> Result<Self, NormalFormError> {
        self.check(s)?;
        let odd = self.star_map_parity(s, self.space.order + 2, true);
        let w = C::i() * C::from_int(2);
        let map = odd.into_iter().map(|(m, c)| (Monomial { hbar: m.hbar - 1, ..m }, c.scale(&w))).collect();
        Ok(Self::from_map(&self.space, map))
    }

    /// `{f, g} = sum_j d_xi f d_x g - d_x f d_xi g`.
    pub fn poisson_bracket(&self, o: &Self) -> Result<Self, NormalFormError> {
        self.check(o)?;
        let mut acc = Self::zero(&self.space);
        for &(x, xi) in &self.space.pairs {
            acc = &acc + &self.partial(xi).mul(&o.partial(x));
            acc = &acc - &self.partial(x).mul(&o.partial(xi));
        }
        Ok(acc)
    }

    /// `sum_j (i hbar^{-1} ad_tau)^j s / j!` modulo degree `> N`.
    pub fn exp_ad(tau: &Self, s: &Self) -> Result<Self, NormalFormError> {
        tau.check(s)?;
        let Some(vt) = tau.valuation() else {
            return Ok(s.clone());
        };
        if vt < 3 {
            return Err(NormalFormError::GeneratorValuation(vt));
        }
        let Some(vs) = s.valuation() else {
            return Ok(s.clone());
        };
        let n = tau.space.order;
        let jmax = if n > vs { (n - vs).div_ceil(vt - 2) } else { 0 };
        let mut sum = s.clone();
        let mut term = s.clone();
        for j in 1..=jmax {
            term = tau.lie(&term)?.scale(&(C::one() / C::from_int(j as i64)));
            sum = &sum + &term;
        }
        Ok(sum)
    }

    fn to_z(&self) -> BTreeMap<Monomial, Jet<C>> {
        let (ix, ixi) = self.space.oscillator;
        let two = C::from_int(2);
        let minus_half_i = -(C::i() / two.clone());
        let mut map = BTreeMap::new();
        for (m, c) in &self.terms {
            let (p, q) = (m.exps[ix] as u32, m.exps[ixi] as u32);
            // x^p xi^q = 2^{-p} (z + zb)^p (-i/2)^q (z - zb)^q
            let mut pre = C::one();
            for _ in 0..p {
                pre = pre / two.clone();
            }
            for _ in 0..q {
                pre = pre * minus_half_i.clone();
            }
            for r in 0..=p {
                for s in 0..=q {
                    let sign = if (q - s) % 2 == 1 { -1 } else { 1 };
                    let w = pre.clone() * C::from_int(sign * binomial(p, r) * binomial(q, s));
                    let mut z = *m;
                    z.exps[ix] = (r + s) as u8;
                    z.exps[ixi] = (p - r + q - s) as u8;
                    accumulate(&mut map, z, c.scale(&w));
                }
            }
        }
        map
    }

    fn from_z(space: &Arc<Space>, zmap: &BTreeMap<Monomial, Jet<C>>) -> Self {
        let (ix, ixi) = space.oscillator;
        let i = C::i();
        let mut map = BTreeMap::new();
        for (m, c) in zmap {
            let (a, b) = (m.exps[ix] as u32, m.exps[ixi] as u32);
            // z^a zb^b = (x + i xi)^a (x - i xi)^b
            for r in 0..=a {
                for s in 0..=b {
                    let mut w = C::from_int(binomial(a, r) * binomial(b, s));
                    for _ in 0..(a - r) {
                        w = w * i.clone();
                    }
                    for _ in 0..(b - s) {
                        w = w * -i.clone();
                    }
                    let mut x = *m;
                    x.exps[ix] = (r + s) as u8;
                    x.exps[ixi] = (a - r + b - s) as u8;
                    accumulate(&mut map, x, c.scale(&w));
                }
            }
        }
        Self::from_map(space, map)
    }

    /// Splits into functions of `|z|^2` and the rest.
    pub fn resonant_split(&self) -> (Self, Self) {
        let (ix, ixi) = self.space.oscillator;
        let (res, non): (BTreeMap<_, _>, BTreeMap<_, _>) = self.to_z().into_iter().partition(|(m, _)| m.exps[ix] == m.exps[ixi]);
        (Self::from_z(&self.space, &res), Self::from_z(&self.space, &non))
    }

    /// `tau'` with `b {|z|^2, tau'} + nonresonant(R) = 0`.
    pub fn homological_solve(r: &Self, b: &Jet<C>) -> Result<Self, NormalFormError> {
        let b0 = b.constant_term();
        if !(b0.im().is_zero() && b0.re() > C::Real::zero()) {
            return Err(NormalFormError::NonPositiveB);
        }
        let inv = b.reciprocal()?;
        let (ix, ixi) = r.space.oscillator;
        let mut out = BTreeMap::new();
        for (m, c) in r.to_z() {
            let (a, bb) = (m.exps[ix] as i64, m.exps[ixi] as i64);
            if a == bb {
                continue;
            }
            let lam = C::i() * C::from_int(2 * (bb - a));
            out.insert(m, c.mul_jet(&inv).scale(&(-(C::one() / lam))));
        }
        Ok(Self::from_z(&r.space, &out))
    }
}

struct StarJob<'a, C> {
    space: &'a Space,
    budget: u32,
    ca: &'a Jet<C>,
    cb: &'a Jet<C>,
    out: &'a mut BTreeMap<Monomial, Jet<C>>,
    half_i: &'a C,
    odd_only: bool,
}

impl<C: ComplexScalar> StarJob<'_, C> {
    /// Chooses `(a, b)` for pair `p` onward; `used` is the degree spent so far.
    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, p: usize, ma: Monomial, mb: Monomial, w: C, da: Vec<u8>, db: Vec<u8>, k: u32, used: u32) {
        if p == self.space.pairs.len() {
            if self.odd_only && k % 2 == 0 {
                return;
            }
            let fa = self.ca.partial_multi(&da);
            let fb = self.cb.partial_multi(&db);
            if fa.cap() < 0 || fb.cap() < 0 {
                return;
            }
            let mut m = ma.times(&mb);
            m.hbar += k as u8;
            let mut w = w;
            for _ in 0..k {
                w = w * self.half_i.clone();
            }
            let c = fa.mul_jet(&fb).scale(&w);
            accumulate(self.out, m, c);
            return;
        }
        let (xs, xis) = self.space.pairs[p];
        // per-unit degree cost of the order (a + b) in this pair
        let cost = match (xs, xis) {
            (Slot::Poly(_), Slot::Poly(_)) => 0,
            (Slot::Jet(_), Slot::Jet(_)) => 2,
            _ => 1,
        };
        let remaining = self.budget - used;
        let max_total = if cost == 0 { u32::MAX } else { remaining / cost };
        let mut a = 0u32;
        loop {
            if a > max_total {
                break;
            }
            let mut b = 0u32;
            loop {
                if a + b > max_total {
                    break;
                }
                // d_x^a d_xi^b on f, d_xi^a d_x^b on g
                let mut na = ma;
                let mut nb = mb;
                let mut ww = w.clone();
                let mut dda = da.clone();
                let mut ddb = db.clone();
                let mut ok = true;
                for (slot, on_f, on_g) in [(xs, a, b), (xis, b, a)] {
                    match slot {
                        Slot::Poly(i) => {
                            if on_f > na.exps[i] as u32 || on_g > nb.exps[i] as u32 {
                                ok = false;
                                break;
                            }
                            ww = ww * C::from_int(falling(na.exps[i], on_f as u8) * falling(nb.exps[i], on_g as u8));
                            na.exps[i] -= on_f as u8;
                            nb.exps[i] -= on_g as u8;
                        }
                        Slot::Jet(j) => {
                            dda[j] += on_f as u8;
                            ddb[j] += on_g as u8;
                        }
                    }
                }
                if !ok {
                    if b == 0 {
                        // larger a fails too
                        return;
                    }
                    break;
                }
                let sign = if b % 2 == 1 { -1 } else { 1 };
                ww = ww * C::from_ratio(sign, factorial(a) * factorial(b));
                self.recurse(p + 1, na, nb, ww, dda, ddb, k + a + b, used + cost * (a + b));
                b += 1;
            }
            a += 1;
        }
    }
}

impl<C: ComplexScalar> std::ops::Add for &FormalSeries<C> {
    type Output = FormalSeries<C>;
    fn add(self, o: &FormalSeries<C>) -> FormalSeries<C> {
        self.compatible(o);
        let mut map = self.terms.clone();
        for (m, c) in &o.terms {
            accumulate(&mut map, *m, c.clone());
        }
        FormalSeries::from_map(&self.space, map)
    }
}

impl<C: ComplexScalar> std::ops::Sub for &FormalSeries<C> {
    type Output = FormalSeries<C>;
    fn sub(self, o: &FormalSeries<C>) -> FormalSeries<C> {
        self + &(-o)
    }
}

impl<C: ComplexScalar> std::ops::Neg for &FormalSeries<C> {
    type Output = FormalSeries<C>;
    fn neg(self) -> FormalSeries<C> {
        self.map_coeffs(|c| -c)
    }
}

/// Key `(l, m, beta)` of the coefficient of `hbar^l (|z|^2)^{*m} xi3^beta`.
pub type CstarKey = (u32, u32, u32);

#[derive(Clone, Debug)]
pub struct NormalFormResult<C> {
    pub tau: FormalSeries<C>,
    pub kappa: FormalSeries<C>,
    pub cstar: BTreeMap<CstarKey, Jet<C>>,
    /// Largest nonresonant coefficient left in `kappa`.
    pub nonresonant_residual: f64,
    /// Largest coefficient of `[kappa, |z|^2]`.
    pub commutator_residual: f64,
}

fn extract_b<C: ComplexScalar>(h0: &FormalSeries<C>) -> Result<Jet<C>, NormalFormError> {
    let (ix, ixi) = h0.space.oscillator;
    let mut mx = Monomial::ONE;
    mx.exps[ix] = 2;
    let mut mxi = Monomial::ONE;
    mxi.exps[ixi] = 2;
    let b = h0.coeff(&mx).ok_or_else(|| NormalFormError::BadH0("missing oscillator term".into()))?;
    let b2 = h0.coeff(&mxi).ok_or_else(|| NormalFormError::BadH0("missing oscillator term".into()))?;
    if (b - b2).max_abs() != 0.0 {
        return Err(NormalFormError::BadH0("x^2 and xi^2 coefficients differ".into()));
    }
    for (m, _) in h0.terms() {
        if *m == mx || *m == mxi {
            continue;
        }
        if m.exps[ix] != 0 || m.exps[ixi] != 0 {
            return Err(NormalFormError::BadH0(format!("oscillator enters through {m:?}")));
        }
        if m.degree() != 2 {
            return Err(NormalFormError::BadH0(format!("term of degree {}", m.degree())));
        }
    }
    Ok(b.clone())
}

/// Finds `tau, kappa in O_3` with `exp(i hbar^{-1} ad_tau)(H0 + gamma) = H0 + kappa`
/// and `[kappa, |z|^2] = 0` modulo degree `> N`.
pub fn birkhoff_normalize<C: ComplexScalar>(gamma: &FormalSeries<C>, h0: &FormalSeries<C>) -> Result<NormalFormResult<C>, NormalFormError> {
    gamma.check(h0)?;
    if let Some(v) = gamma.valuation() {
        if v < 3 {
            return Err(NormalFormError::NotInO3(v));
        }
    }
    let b = extract_b(h0)?;
    let space = gamma.space.clone();
    let full = h0 + gamma;
    let mut tau = FormalSeries::zero(&space);
    for k in 3..=space.order {
        let cur = FormalSeries::exp_ad(&tau, &full)?;
        let r = cur.homogeneous(k);
        let tp = FormalSeries::homological_solve(&r, &b)?;
        // i hbar^{-1} [tau', H0] = -b {|z|^2, tau'} at leading order
        tau = &tau - &tp;
    }
    let kappa = &FormalSeries::exp_ad(&tau, &full)? - h0;
    let (_, non) = kappa.resonant_split();
    let z2 = FormalSeries::oscillator_energy(&space);
    let commutator_residual = kappa.commutator(&z2)?.max_abs();
    let cstar = cstar_table(&kappa);
    Ok(NormalFormResult { tau, kappa, cstar, nonresonant_residual: non.max_abs(), commutator_residual })
}

/// `(|z|^2)^{*m}` for `m = 0..=N/2`.
pub fn star_powers<C: ComplexScalar>(space: &Arc<Space>) -> Vec<FormalSeries<C>> {
    let z2 = FormalSeries::oscillator_energy(space);
    let mut out = vec![FormalSeries::monomial(space, Monomial::ONE, C::one())];
    for m in 1..=(space.order / 2) as usize {
        let next = out[m - 1].star(&z2).expect("same space");
        out.push(next);
    }
    out
}

fn other_power(space: &Space, m: &Monomial) -> u32 {
    let (ix, ixi) = space.oscillator;
    (0..space.poly_names.len()).filter(|&i| i != ix && i != ixi).map(|i| m.exps[i] as u32).sum()
}

/// Rewrites the resonant part of `kappa` as `sum hbar^l c*_{l,m,beta} (|z|^2)^{*m} xi3^beta`.
pub fn cstar_table<C: ComplexScalar>(kappa: &FormalSeries<C>) -> BTreeMap<CstarKey, Jet<C>> {
    let space = kappa.space.clone();
    let (ix, ixi) = space.oscillator;
    let powers: Vec<BTreeMap<Monomial, Jet<C>>> = star_powers::<C>(&space).iter().map(|p| p.to_z()).collect();
    let mut rest = kappa.to_z();
    rest.retain(|m, c| m.exps[ix] == m.exps[ixi] && !c.is_zero());
    let mut table = BTreeMap::new();
    while let Some((&m, _)) = rest.iter().filter(|(_, c)| !c.is_zero()).max_by_key(|(m, _)| (m.exps[ix], *m)) {
        let c = rest.remove(&m).expect("present");
        let pm = m.exps[ix] as usize;
        let key = (m.hbar as u32, pm as u32, other_power(&space, &m));
        let mut shift = m;
        shift.exps[ix] = 0;
        shift.exps[ixi] = 0;
        for (pz, pc) in &powers[pm] {
            if pz.exps[ix] as usize == pm && pz.hbar == 0 {
                continue;
            }
            let t = pz.times(&shift);
            if t.degree() <= space.order {
                accumulate(&mut rest, t, -pc.mul_jet(&c));
            }
        }
        rest.retain(|_, c| !c.is_zero());
        table.insert(key, c);
    }
    table
}

/// Inverse of [`cstar_table`].
pub fn from_cstar<C: ComplexScalar>(space: &Arc<Space>, table: &BTreeMap<CstarKey, Jet<C>>) -> FormalSeries<C> {
    let powers = star_powers::<C>(space);
    let other = (0..space.poly_names.len()).find(|&i| i != space.oscillator.0 && i != space.oscillator.1);
    let mut acc = FormalSeries::zero(space);
    for (&(l, m, beta), c) in table {
        let mut mono = Monomial { exps: [0; 3], hbar: l as u8 };
        if let Some(o) = other {
            mono.exps[o] = beta as u8;
        }
        let t = FormalSeries::term(space, mono, c.clone());
        acc = &acc + &t.mul(&powers[m as usize]);
    }
    acc
}

/// Complex double-precision series.
pub type Series64 = FormalSeries<Complex<f64>>;

fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else {
        format!("{x:e}")
    }
}

impl<T> FormalSeries<Complex<T>>
where
    T: Scalar + PartialOrd + Display,
{
    /// Lines `a1 a2 beta l e1 .. en re im` after an `order N degree D` header.
    pub fn to_text(&self) -> String {
        let mut s = format!("order {} degree {}\n", self.space.order, self.space.jet_cap);
        for (m, c) in &self.terms {
            for (alpha, v) in c.terms() {
                if v.is_zero() {
                    continue;
                }
                let e: Vec<String> = alpha.iter().map(|x| x.to_string()).collect();
                s.push_str(&format!("{} {} {} {} {} {} {}\n", m.exps[0], m.exps[1], m.exps[2], m.hbar, e.join(" "), v.re, v.im));
            }
        }
        s
    }
}

/// Text form of a c*-table: `l m beta e1 .. en re im`.
pub fn cstar_to_text(table: &BTreeMap<CstarKey, Jet<Complex<f64>>>) -> String {
    let mut s = String::from("# l m beta e1 e2 e3 re im\n");
    for (&(l, m, beta), c) in table {
        for (alpha, v) in c.terms() {
            if v.norm() == 0.0 {
                continue;
            }
            let e: Vec<String> = alpha.iter().map(|x| x.to_string()).collect();
            s.push_str(&format!("{l} {m} {beta} {} {} {}\n", e.join(" "), fmt_f64(v.re), fmt_f64(v.im)));
        }
    }
    s
}

/// Input of a standalone normalization run.
#[derive(Clone, Debug)]
pub struct BirkhoffInput {
    pub space: Arc<Space>,
    pub b: Jet<Complex<f64>>,
    pub gamma: Series64,
}

fn parse_num<T: FromStr>(tok: &str, line: usize) -> Result<T, NormalFormError> {
    tok.parse().map_err(|_| NormalFormError::Parse { line, message: format!("bad number {tok:?}") })
}

/// Parses
///
/// ```text
/// order 6
/// degree 4
/// b 0 0 0 1          # e1 e2 e3 value
/// gamma 3 0 0 0 0 0 0 1 0   # a1 a2 beta l e1 e2 e3 re im
/// ```
///
/// `b` defaults to 1. Blank lines and `#` comments are ignored.
pub fn parse_birkhoff_input(text: &str) -> Result<BirkhoffInput, NormalFormError> {
    let mut order = 8u32;
    let mut degree = 4i32;
    let mut b_terms: Vec<(Vec<u8>, f64)> = Vec::new();
    let mut g_terms: Vec<(Monomial, Vec<u8>, Complex<f64>, usize)> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let want = |k: usize| {
            if toks.len() == k {
                Ok(())
            } else {
                Err(NormalFormError::Parse { line, message: format!("{} expects {} fields, got {}", toks[0], k - 1, toks.len() - 1) })
            }
        };
        match toks[0] {
            "order" => {
                want(2)?;
                order = parse_num(toks[1], line)?;
            }
            "degree" => {
                want(2)?;
                degree = parse_num(toks[1], line)?;
            }
            "b" => {
                want(5)?;
                let e = (1..4).map(|i| parse_num(toks[i], line)).collect::<Result<Vec<u8>, _>>()?;
                b_terms.push((e, parse_num(toks[4], line)?));
            }
            "gamma" => {
                want(10)?;
                let v = (1..8).map(|i| parse_num(toks[i], line)).collect::<Result<Vec<u8>, _>>()?;
                let c = Complex::new(parse_num(toks[8], line)?, parse_num(toks[9], line)?);
                g_terms.push((Monomial::new(v[0], v[1], v[2], v[3]), v[4..7].to_vec(), c, line));
            }
            other => return Err(NormalFormError::Parse { line, message: format!("unknown key {other:?}") }),
        }
    }
    let space = Space::standard(order, degree);
    if b_terms.is_empty() {
        b_terms.push((vec![0, 0, 0], 1.0));
    }
    let b_terms: Vec<(Vec<u8>, Complex<f64>)> = b_terms.into_iter().map(|(e, v)| (e, Complex::new(v, 0.0))).collect();
    let b = Jet::from_coeffs(3, degree, &b_terms);
    let mut gamma = Series64::zero(&space);
    for (m, e, c, line) in g_terms {
        if m.degree() > order {
            return Err(NormalFormError::Parse { line, message: format!("monomial degree {} exceeds order {order}", m.degree()) });
        }
        gamma = &gamma + &Series64::term(&space, m, Jet::from_coeffs(3, degree, &[(e, c)]));
    }
    Ok(BirkhoffInput { space, b, gamma })
}
