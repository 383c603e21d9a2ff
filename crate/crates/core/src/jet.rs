//! Truncated multivariate Taylor jets.
//!
//! A `Jet` stores the coefficients of a polynomial in `n` displacement
//! variables up to total degree `cap`. The cap is the degree up to which the
//! coefficients are trustworthy: differentiation lowers it by one, products
//! and compositions take the minimum of their inputs. A negative cap means no
//! coefficient is known. The base point is not stored; owners keep it.

use std::collections::HashMap;
use std::fmt::{self, Display};
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::Float;
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum JetError {
    #[error("jets live in different variable counts ({0} vs {1})")]
    VariableMismatch(usize, usize),
    #[error("composition slot {0} has a nonzero constant term")]
    NonzeroConstant(usize),
    #[error("reciprocal of a jet with zero constant term")]
    ZeroConstant,
    #[error("square root of a jet whose constant term has no square root")]
    NoSquareRoot,
    #[error("logarithm of a jet with non-positive constant term")]
    NonPositiveLog,
    #[error("linear part is singular")]
    SingularLinearPart,
    #[error("malformed jet table: {0}")]
    Table(String),
}

/// Monomial enumeration for a fixed variable count and cap, graded by total
/// degree so that a lower cap is a prefix of a higher one.
#[derive(Debug)]
pub struct Layout {
    nvars: usize,
    cap: i32,
    monos: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    degree_of: Vec<u32>,
    mul_table: OnceLock<Vec<(u32, u32, u32)>>,
}

fn monomials_of_degree(n: usize, d: u32, out: &mut Vec<Vec<u8>>) {
    fn rec(n: usize, d: u32, prefix: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if prefix.len() + 1 == n {
            prefix.push(d as u8);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=d).rev() {
            prefix.push(k as u8);
            rec(n, d - k, prefix, out);
            prefix.pop();
        }
    }
    if n == 0 {
        if d == 0 {
            out.push(Vec::new());
        }
        return;
    }
    rec(n, d, &mut Vec::with_capacity(n), out);
}

impl Layout {
    fn build(nvars: usize, cap: i32) -> Layout {
        let mut monos = Vec::new();
        if cap >= 0 {
            for d in 0..=cap as u32 {
                monomials_of_degree(nvars, d, &mut monos);
            }
        }
        let index = monos.iter().enumerate().map(|(k, m)| (m.clone(), k)).collect();
        let degree_of = monos.iter().map(|m| m.iter().map(|&e| e as u32).sum()).collect();
        Layout { nvars, cap, monos, index, degree_of, mul_table: OnceLock::new() }
    }

    pub fn get(nvars: usize, cap: i32) -> Arc<Layout> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, i32), Arc<Layout>>>> = OnceLock::new();
        let cap = cap.max(-1);
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard.entry((nvars, cap)).or_insert_with(|| Arc::new(Layout::build(nvars, cap))).clone()
    }

    pub fn len(&self) -> usize {
        self.monos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monos.is_empty()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn cap(&self) -> i32 {
        self.cap
    }

    pub fn monomials(&self) -> &[Vec<u8>] {
        &self.monos
    }

    pub fn degree(&self, k: usize) -> u32 {
        self.degree_of[k]
    }

    pub fn index_of(&self, alpha: &[u8]) -> Option<usize> {
        self.index.get(alpha).copied()
    }

    fn mul_table(&self) -> &[(u32, u32, u32)] {
        self.mul_table.get_or_init(|| {
            let mut t = Vec::new();
            let mut key = vec![0u8; self.nvars];
            for (i, a) in self.monos.iter().enumerate() {
                for (j, b) in self.monos.iter().enumerate() {
                    if self.degree_of[i] + self.degree_of[j] > self.cap as u32 {
                        continue;
                    }
                    for v in 0..self.nvars {
                        key[v] = a[v] + b[v];
                    }
                    t.push((i as u32, j as u32, self.index[&key] as u32));
                }
            }
            t
        })
    }
}

#[derive(Clone, Debug)]
pub struct Jet<T> {
    layout: Arc<Layout>,
    coeffs: Vec<T>,
}

impl<T: Scalar> PartialEq for Jet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.layout.nvars == other.layout.nvars && self.layout.cap == other.layout.cap && self.coeffs == other.coeffs
    }
}

impl<T: Scalar> Jet<T> {
    pub fn zero(nvars: usize, cap: i32) -> Self {
        let layout = Layout::get(nvars, cap);
        let coeffs = vec![T::zero(); layout.len()];
        Jet { layout, coeffs }
    }

    pub fn constant(nvars: usize, cap: i32, c: T) -> Self {
        let mut j = Self::zero(nvars, cap);
        if !j.coeffs.is_empty() {
            j.coeffs[0] = c;
        }
        j
    }

    /// `c + x_i`.
    pub fn variable(nvars: usize, cap: i32, i: usize, c: T) -> Self {
        let mut j = Self::constant(nvars, cap, c);
        if cap >= 1 {
            let mut alpha = vec![0u8; nvars];
            alpha[i] = 1;
            j.set_coeff(&alpha, T::one());
        }
        j
    }

    pub fn from_coeffs(nvars: usize, cap: i32, terms: &[(Vec<u8>, T)]) -> Self {
        let mut j = Self::zero(nvars, cap);
        for (alpha, c) in terms {
            if let Some(k) = j.layout.index_of(alpha) {
                j.coeffs[k] = j.coeffs[k].clone() + c.clone();
            }
        }
        j
    }

    pub fn nvars(&self) -> usize {
        self.layout.nvars
    }

    pub fn cap(&self) -> i32 {
        self.layout.cap
    }

    pub fn layout(&self) -> &Arc<Layout> {
        &self.layout
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeff(&self, alpha: &[u8]) -> T {
        self.layout.index_of(alpha).map(|k| self.coeffs[k].clone()).unwrap_or_else(T::zero)
    }

    /// Sets a coefficient; silently ignored above the cap.
    pub fn set_coeff(&mut self, alpha: &[u8], c: T) {
        if let Some(k) = self.layout.index_of(alpha) {
            self.coeffs[k] = c;
        }
    }

    pub fn constant_term(&self) -> T {
        self.coeffs.first().cloned().unwrap_or_else(T::zero)
    }

    /// Partial derivative value at the base point: `alpha! * c_alpha`.
    pub fn derivative_at_base(&self, alpha: &[u8]) -> T {
        let mut f = T::one();
        for &a in alpha {
            for k in 1..=a as i64 {
                f = f * T::from_int(k);
            }
        }
        f * self.coeff(alpha)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u8], &T)> {
        self.layout.monos.iter().map(|m| m.as_slice()).zip(self.coeffs.iter())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.magnitude()).fold(0.0, f64::max)
    }

    /// Lowers the cap, dropping coefficients above it.
    pub fn truncate(&self, cap: i32) -> Self {
        if cap >= self.cap() {
            return self.clone();
        }
        let layout = Layout::get(self.nvars(), cap);
        let coeffs = self.coeffs[..layout.len()].to_vec();
        Jet { layout, coeffs }
    }

    /// Raises the cap, padding with zeros. Only meaningful for exact polynomials.
    pub fn extend(&self, cap: i32) -> Self {
        if cap <= self.cap() {
            return self.clone();
        }
        let layout = Layout::get(self.nvars(), cap);
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(layout.len(), T::zero());
        Jet { layout, coeffs }
    }

    fn common(a: &Self, b: &Self) -> (Self, Self) {
        assert_eq!(a.nvars(), b.nvars(), "jet variable count mismatch");
        let cap = a.cap().min(b.cap());
        (a.truncate(cap), b.truncate(cap))
    }

    pub fn scale(&self, s: &T) -> Self {
        Jet { layout: self.layout.clone(), coeffs: self.coeffs.iter().map(|c| c.clone() * s.clone()).collect() }
    }

    pub fn add_scalar(&self, s: &T) -> Self {
        let mut out = self.clone();
        if !out.coeffs.is_empty() {
            out.coeffs[0] = out.coeffs[0].clone() + s.clone();
        }
        out
    }

    pub fn mul_jet(&self, other: &Self) -> Self {
        let (a, b) = Self::common(self, other);
        let mut out = vec![T::zero(); a.layout.len()];
        for &(i, j, k) in a.layout.mul_table() {
            let (ai, bj) = (&a.coeffs[i as usize], &b.coeffs[j as usize]);
            if ai.is_zero() || bj.is_zero() {
                continue;
            }
            out[k as usize] = out[k as usize].clone() + ai.clone() * bj.clone();
        }
        Jet { layout: a.layout, coeffs: out }
    }

    pub fn powi(&self, mut n: u32) -> Self {
        let mut result = Self::constant(self.nvars(), self.cap(), T::one());
        let mut base = self.clone();
        while n > 0 {
            if n & 1 == 1 {
                result = result.mul_jet(&base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul_jet(&base);
            }
        }
        result
    }

    /// `sum_k c_k (a - a0)^k` for a univariate Taylor series `c` at the constant term.
    pub fn apply_series(&self, c: &[T]) -> Self {
        let mut u = self.clone();
        if !u.coeffs.is_empty() {
            u.coeffs[0] = T::zero();
        }
        let mut acc = Self::zero(self.nvars(), self.cap());
        for ck in c.iter().rev() {
            acc = acc.mul_jet(&u).add_scalar(ck);
        }
        acc
    }

    pub fn reciprocal(&self) -> Result<Self, JetError> {
        let a0 = self.constant_term();
        if a0.is_zero() {
            return Err(JetError::ZeroConstant);
        }
        let inv = T::one() / a0;
        let n = self.cap().max(0) as usize;
        let mut c = Vec::with_capacity(n + 1);
        let mut term = inv.clone();
        for _ in 0..=n {
            c.push(term.clone());
            term = -(term * inv.clone());
        }
        Ok(self.apply_series(&c))
    }

    pub fn div_jet(&self, other: &Self) -> Result<Self, JetError> {
        Ok(self.mul_jet(&other.reciprocal()?))
    }

    pub fn sqrt(&self) -> Result<Self, JetError> {
        let a0 = self.constant_term();
        if a0.is_zero() {
            return Err(JetError::NoSquareRoot);
        }
        let r0 = a0.try_sqrt().ok_or(JetError::NoSquareRoot)?;
        let inv = T::one() / a0;
        let n = self.cap().max(0) as usize;
        // binom(1/2, k) a0^{1/2-k}
        let mut c = Vec::with_capacity(n + 1);
        let mut term = r0;
        for k in 0..=n as i64 {
            c.push(term.clone());
            term = term * T::from_ratio(1 - 2 * k, 2 * (k + 1)) * inv.clone();
        }
        Ok(self.apply_series(&c))
    }

    pub fn partial(&self, i: usize) -> Self {
        let layout = Layout::get(self.nvars(), self.cap() - 1);
        let mut coeffs = vec![T::zero(); layout.len()];
        let mut key = vec![0u8; self.nvars()];
        for (k, beta) in layout.monos.iter().enumerate() {
            key.copy_from_slice(beta);
            key[i] += 1;
            if let Some(src) = self.layout.index_of(&key) {
                coeffs[k] = self.coeffs[src].clone() * T::from_int(key[i] as i64);
            }
        }
        Jet { layout, coeffs }
    }

    /// Repeated partial derivative `d^alpha`.
    pub fn partial_multi(&self, alpha: &[u8]) -> Self {
        let mut out = self.clone();
        for (i, &a) in alpha.iter().enumerate() {
            for _ in 0..a {
                out = out.partial(i);
            }
        }
        out
    }

    /// Antiderivative in `x_i` vanishing on `x_i = 0`; the cap rises by one.
    pub fn integrate(&self, i: usize) -> Self {
        let layout = Layout::get(self.nvars(), self.cap() + 1);
        let mut coeffs = vec![T::zero(); layout.len()];
        let mut key = vec![0u8; self.nvars()];
        for (k, beta) in layout.monos.iter().enumerate() {
            if beta[i] == 0 {
                continue;
            }
            key.copy_from_slice(beta);
            key[i] -= 1;
            if let Some(src) = self.layout.index_of(&key) {
                coeffs[k] = self.coeffs[src].clone() / T::from_int(beta[i] as i64);
            }
        }
        Jet { layout, coeffs }
    }

    /// `self(inner_1, ..., inner_n)`; every inner jet must have zero constant term.
    pub fn compose(&self, inner: &[Jet<T>]) -> Result<Self, JetError> {
        if inner.len() != self.nvars() {
            return Err(JetError::VariableMismatch(self.nvars(), inner.len()));
        }
        let m = inner.first().map(|j| j.nvars()).unwrap_or(0);
        let mut cap = self.cap();
        for (s, g) in inner.iter().enumerate() {
            if g.nvars() != m {
                return Err(JetError::VariableMismatch(m, g.nvars()));
            }
            if !g.constant_term().is_zero() {
                return Err(JetError::NonzeroConstant(s));
            }
            cap = cap.min(g.cap());
        }
        if inner.is_empty() {
            return Ok(Jet::constant(0, cap, self.constant_term()));
        }
        let inner: Vec<Jet<T>> = inner.iter().map(|g| g.truncate(cap)).collect();
        let dmax = cap.max(0) as usize;
        let powers: Vec<Vec<Jet<T>>> = inner
            .iter()
            .map(|g| {
                let mut p = vec![Jet::constant(m, cap, T::one())];
                for k in 1..=dmax {
                    let next = p[k - 1].mul_jet(g);
                    p.push(next);
                }
                p
            })
            .collect();
        let mut out = Jet::zero(m, cap);
        for (alpha, c) in self.layout.monos.iter().zip(self.coeffs.iter()) {
            if c.is_zero() || alpha.iter().map(|&a| a as i32).sum::<i32>() > cap {
                continue;
            }
            let mut term = Jet::constant(m, cap, c.clone());
            for (v, &a) in alpha.iter().enumerate() {
                if a > 0 {
                    term = term.mul_jet(&powers[v][a as usize]);
                }
            }
            out += &term;
        }
        Ok(out)
    }

    /// Polynomial value at a displacement.
    pub fn eval(&self, x: &[T]) -> T {
        let mut acc = T::zero();
        for (alpha, c) in self.layout.monos.iter().zip(self.coeffs.iter()) {
            if c.is_zero() {
                continue;
            }
            let mut t = c.clone();
            for (v, &a) in alpha.iter().enumerate() {
                for _ in 0..a {
                    t = t * x[v].clone();
                }
            }
            acc = acc + t;
        }
        acc
    }

    /// Homogeneous part of total degree `d`, in the same layout.
    pub fn homogeneous(&self, d: u32) -> Self {
        let mut out = Self::zero(self.nvars(), self.cap());
        for k in 0..self.coeffs.len() {
            if self.layout.degree_of[k] == d {
                out.coeffs[k] = self.coeffs[k].clone();
            }
        }
        out
    }

    pub fn map<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Jet<U> {
        Jet { layout: self.layout.clone(), coeffs: self.coeffs.iter().map(f).collect() }
    }
}

/// Inverse of a map with zero constant term and invertible linear part, by
/// series reversion: `G <- G + L^{-1}(x - F(G))`, one order per sweep.
pub fn invert_map<T: Scalar>(f: &[Jet<T>]) -> Result<Vec<Jet<T>>, JetError> {
    let n = f.len();
    let cap = f.iter().map(|j| j.cap()).min().unwrap_or(0);
    for (s, g) in f.iter().enumerate() {
        if g.nvars() != n {
            return Err(JetError::VariableMismatch(n, g.nvars()));
        }
        if !g.constant_term().is_zero() {
            return Err(JetError::NonzeroConstant(s));
        }
    }
    let mut lin = vec![vec![T::zero(); n]; n];
    for (i, g) in f.iter().enumerate() {
        for (j, row) in lin[i].iter_mut().enumerate() {
            let mut e = vec![0u8; n];
            e[j] = 1;
            *row = g.coeff(&e);
        }
    }
    let linv = invert_matrix(&lin).ok_or(JetError::SingularLinearPart)?;
    let ids: Vec<Jet<T>> = (0..n).map(|i| Jet::variable(n, cap, i, T::zero())).collect();
    let apply = |v: &[Jet<T>]| -> Vec<Jet<T>> {
        (0..n)
            .map(|i| {
                let mut acc = Jet::zero(n, cap);
                for (j, vj) in v.iter().enumerate() {
                    acc += &vj.scale(&linv[i][j]);
                }
                acc
            })
            .collect()
    };
    let mut g = apply(&ids);
    for _ in 0..cap.max(0) {
        let fg: Vec<Jet<T>> = f.iter().map(|fi| fi.compose(&g)).collect::<Result<_, _>>()?;
        let defect: Vec<Jet<T>> = ids.iter().zip(fg.iter()).map(|(x, y)| x - y).collect();
        let corr = apply(&defect);
        for (gi, ci) in g.iter_mut().zip(corr.iter()) {
            *gi += ci;
        }
    }
    Ok(g)
}

/// Gauss-Jordan inverse over any scalar field; `None` when singular.
pub fn invert_matrix<T: Scalar>(m: &[Vec<T>]) -> Option<Vec<Vec<T>>> {
    let n = m.len();
    let mut a: Vec<Vec<T>> = m.to_vec();
    let mut inv: Vec<Vec<T>> =
        (0..n).map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| a[x][col].magnitude().total_cmp(&a[y][col].magnitude()))?;
        if a[piv][col].is_zero() {
            return None;
        }
        a.swap(col, piv);
        inv.swap(col, piv);
        let p = a[col][col].clone();
        for j in 0..n {
            a[col][j] = a[col][j].clone() / p.clone();
            inv[col][j] = inv[col][j].clone() / p.clone();
        }
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for j in 0..n {
                a[r][j] = a[r][j].clone() - f.clone() * a[col][j].clone();
                inv[r][j] = inv[r][j].clone() - f.clone() * inv[col][j].clone();
            }
        }
    }
    Some(inv)
}

impl<T: Scalar + Float> Jet<T> {
    pub fn exp(&self) -> Self {
        let a0 = self.constant_term();
        let e = a0.exp();
        let n = self.cap().max(0) as usize;
        let mut c = Vec::with_capacity(n + 1);
        let mut f = e;
        for k in 0..=n {
            c.push(f);
            f = f / T::from_int(k as i64 + 1);
        }
        self.apply_series(&c)
    }

    pub fn ln(&self) -> Result<Self, JetError> {
        let a0 = self.constant_term();
        if a0 <= T::zero() {
            return Err(JetError::NonPositiveLog);
        }
        let n = self.cap().max(0) as usize;
        let mut c = vec![a0.ln()];
        let mut p = T::one();
        for k in 1..=n {
            p = p / a0;
            let sign = if k % 2 == 1 { T::one() } else { -T::one() };
            c.push(sign * p / T::from_int(k as i64));
        }
        Ok(self.apply_series(&c))
    }

    fn trig_series(&self, phase: usize) -> Self {
        let a0 = self.constant_term();
        let (s, co) = a0.sin_cos();
        let cyc = [s, co, -s, -co];
        let n = self.cap().max(0) as usize;
        let mut c = Vec::with_capacity(n + 1);
        let mut fact = T::one();
        for k in 0..=n {
            if k > 0 {
                fact = fact * T::from_int(k as i64);
            }
            c.push(cyc[(k + phase) % 4] / fact);
        }
        self.apply_series(&c)
    }

    pub fn sin(&self) -> Self {
        self.trig_series(0)
    }

    pub fn cos(&self) -> Self {
        self.trig_series(1)
    }
}

impl<T: Scalar + Display> Jet<T> {
    /// Text table: a header `nvars cap`, then `e_1 .. e_n coefficient` per nonzero term.
    pub fn to_table(&self) -> String {
        let mut s = format!("{} {}\n", self.nvars(), self.cap());
        for (alpha, c) in self.terms() {
            if c.is_zero() {
                continue;
            }
            for e in alpha {
                s.push_str(&format!("{e} "));
            }
            s.push_str(&format!("{c}\n"));
        }
        s
    }
}

impl<T: Scalar + FromStr> Jet<T> {
    pub fn from_table(text: &str) -> Result<Self, JetError> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| JetError::Table("empty".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        let bad = |m: &str| JetError::Table(m.to_string());
        if h.len() != 2 {
            return Err(bad("header must be `nvars cap`"));
        }
        let n: usize = h[0].parse().map_err(|_| bad("nvars"))?;
        let cap: i32 = h[1].parse().map_err(|_| bad("cap"))?;
        let mut jet = Jet::zero(n, cap);
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != n + 1 {
                return Err(bad(&format!("expected {} fields in `{line}`", n + 1)));
            }
            let alpha: Vec<u8> =
                f[..n].iter().map(|e| e.parse::<u8>()).collect::<Result<_, _>>().map_err(|_| bad("exponent"))?;
            let c: T = f[n].parse().map_err(|_| bad("coefficient"))?;
            let k = jet.layout.index_of(&alpha).ok_or_else(|| bad("term above cap"))?;
            jet.coeffs[k] = c;
        }
        Ok(jet)
    }
}

impl<T: Scalar + Display> Display for Jet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (alpha, c) in self.terms() {
            if c.is_zero() {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (v, &e) in alpha.iter().enumerate() {
                match e {
                    0 => {}
                    1 => write!(f, "*x{}", v + 1)?,
                    _ => write!(f, "*x{}^{e}", v + 1)?,
                }
            }
        }
        if first {
            write!(f, "0")?;
        }
        write!(f, " + O({})", self.cap() + 1)
    }
}

impl<'a, T: Scalar> Add<&'a Jet<T>> for &'a Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: &Jet<T>) -> Jet<T> {
        let (mut a, b) = Jet::common(self, rhs);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs) {
            *x = x.clone() + y;
        }
        a
    }
}

impl<'a, T: Scalar> Sub<&'a Jet<T>> for &'a Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: &Jet<T>) -> Jet<T> {
        let (mut a, b) = Jet::common(self, rhs);
        for (x, y) in a.coeffs.iter_mut().zip(b.coeffs) {
            *x = x.clone() - y;
        }
        a
    }
}

impl<'a, T: Scalar> Mul<&'a Jet<T>> for &'a Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: &Jet<T>) -> Jet<T> {
        self.mul_jet(rhs)
    }
}

impl<T: Scalar> Neg for &Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        Jet { layout: self.layout.clone(), coeffs: self.coeffs.iter().map(|c| -c.clone()).collect() }
    }
}

impl<T: Scalar> Neg for Jet<T> {
    type Output = Jet<T>;
    fn neg(self) -> Jet<T> {
        -&self
    }
}

impl<T: Scalar> Add for Jet<T> {
    type Output = Jet<T>;
    fn add(self, rhs: Jet<T>) -> Jet<T> {
        &self + &rhs
    }
}

impl<T: Scalar> Sub for Jet<T> {
    type Output = Jet<T>;
    fn sub(self, rhs: Jet<T>) -> Jet<T> {
        &self - &rhs
    }
}

impl<T: Scalar> Mul for Jet<T> {
    type Output = Jet<T>;
    fn mul(self, rhs: Jet<T>) -> Jet<T> {
        self.mul_jet(&rhs)
    }
}

impl<T: Scalar> AddAssign<&Jet<T>> for Jet<T> {
    fn add_assign(&mut self, rhs: &Jet<T>) {
        if rhs.cap() < self.cap() {
            *self = self.truncate(rhs.cap());
        }
        for (x, y) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *x = x.clone() + y.clone();
        }
    }
}

impl<T: Scalar> SubAssign<&Jet<T>> for Jet<T> {
    fn sub_assign(&mut self, rhs: &Jet<T>) {
        if rhs.cap() < self.cap() {
            *self = self.truncate(rhs.cap());
        }
        for (x, y) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *x = x.clone() - y.clone();
        }
    }
}
