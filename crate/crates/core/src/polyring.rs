//! The graded polynomial ring R = S(V*) over Z, the W-action on it,
//! Demazure operators, and fractions with root-product denominators.
//!
//! Variables are the dual-basis coordinates `x_0, .., x_{r-1}` of the
//! realization lattice. Linear forms live in degree 2.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::coxeter::{CoxeterSystem, Gen, WElem};

/// Packed exponent vector: 8 bits per variable, variable 0 in the most
/// significant byte, so integer order is lexicographic order.
pub type Mono = u64;

const MAX_VARS: usize = 8;

fn mono_var(j: usize) -> Mono {
    1u64 << (8 * (MAX_VARS - 1 - j))
}

fn mono_exp(m: Mono, j: usize) -> u32 {
    ((m >> (8 * (MAX_VARS - 1 - j))) & 0xff) as u32
}

fn mono_deg(m: Mono) -> u32 {
    (0..MAX_VARS).map(|j| mono_exp(m, j)).sum()
}

fn mono_mul(a: Mono, b: Mono) -> Mono {
    let c = a + b;
    debug_assert!((0..MAX_VARS).all(|j| mono_exp(a, j) + mono_exp(b, j) < 256), "exponent overflow");
    c
}

/// Sparse polynomial; terms sorted by increasing monomial, no zeros.
#[derive(Clone, Default, PartialEq, Eq, Hash)]
pub struct Poly {
    terms: Vec<(Mono, i128)>,
}

fn normalize(mut terms: Vec<(Mono, i128)>) -> Vec<(Mono, i128)> {
    terms.sort_unstable_by_key(|t| t.0);
    let mut out: Vec<(Mono, i128)> = Vec::with_capacity(terms.len());
    for (m, c) in terms {
        match out.last_mut() {
            Some(last) if last.0 == m => {
                last.1 = last.1.checked_add(c).expect("coefficient overflow")
            }
            _ => out.push((m, c)),
        }
    }
    out.retain(|t| t.1 != 0);
    out
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }
    pub fn one() -> Self {
        Self::constant(1)
    }
    pub fn constant(c: i128) -> Self {
        if c == 0 {
            Self::zero()
        } else {
            Self { terms: vec![(0, c)] }
        }
    }
    pub fn var(j: usize) -> Self {
        assert!(j < MAX_VARS);
        Self {
            terms: vec![(mono_var(j), 1)],
        }
    }
    /// `sum_j coeffs[j] x_j`.
    pub fn linear(coeffs: &[i64]) -> Self {
        Self {
            terms: normalize(
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(j, &c)| (mono_var(j), c as i128))
                    .collect(),
            ),
        }
    }
    /// Builds from `(exponent vector, coefficient)` pairs.
    pub fn from_terms(terms: impl IntoIterator<Item = (Vec<u32>, i128)>) -> Self {
        Self {
            terms: normalize(
                terms
                    .into_iter()
                    .map(|(e, c)| {
                        let m = e
                            .iter()
                            .enumerate()
                            .map(|(j, &k)| {
                                assert!(k < 256);
                                mono_var(j) * k as u64
                            })
                            .sum();
                        (m, c)
                    })
                    .collect(),
            ),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }
    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|t| t.0 == 0)
    }
    pub fn constant_term(&self) -> i128 {
        match self.terms.first() {
            Some(&(0, c)) => c,
            _ => 0,
        }
    }
    /// Terms as `(exponents, coefficient)`, exponents of length `nvars`.
    pub fn terms(&self, nvars: usize) -> Vec<(Vec<u32>, i128)> {
        self.terms
            .iter()
            .map(|&(m, c)| ((0..nvars).map(|j| mono_exp(m, j)).collect(), c))
            .collect()
    }

    /// Polynomial degree if homogeneous (the zero polynomial has none).
    pub fn degree(&self) -> Option<u32> {
        let d = mono_deg(self.terms.first()?.0);
        self.terms.iter().all(|t| mono_deg(t.0) == d).then_some(d)
    }
    /// Degree in the grading where linear forms have degree 2.
    pub fn grade(&self) -> Option<i32> {
        self.degree().map(|d| 2 * d as i32)
    }
    pub fn is_homogeneous(&self) -> bool {
        self.is_zero() || self.degree().is_some()
    }

    pub fn scale(&self, c: i128) -> Self {
        if c == 0 {
            return Self::zero();
        }
        Self {
            terms: self
                .terms
                .iter()
                .map(|&(m, x)| (m, x.checked_mul(c).expect("coefficient overflow")))
                .collect(),
        }
    }

    fn combine(&self, other: &Self, sign: i128) -> Self {
        let (a, b) = (&self.terms, &other.terms);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            let ord = match (a.get(i), b.get(j)) {
                (Some(x), Some(y)) => x.0.cmp(&y.0),
                (Some(_), None) => Ordering::Less,
                _ => Ordering::Greater,
            };
            match ord {
                Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push((b[j].0, b[j].1 * sign));
                    j += 1;
                }
                Ordering::Equal => {
                    let c = a[i].1.checked_add(b[j].1 * sign).expect("coefficient overflow");
                    if c != 0 {
                        out.push((a[i].0, c));
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        Self { terms: out }
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut out = Self::one();
        for _ in 0..k {
            out = &out * self;
        }
        out
    }

    /// Substitutes `x_j -> images[j]`.
    pub fn substitute(&self, images: &[Poly]) -> Self {
        let mut powers: Vec<Vec<Poly>> = images.iter().map(|p| vec![Poly::one(), p.clone()]).collect();
        let mut acc: Vec<(Mono, i128)> = Vec::new();
        for &(m, c) in &self.terms {
            let mut t = Poly::constant(c);
            for (j, pw) in powers.iter_mut().enumerate() {
                let k = mono_exp(m, j) as usize;
                if k == 0 {
                    continue;
                }
                while pw.len() <= k {
                    let next = &pw[pw.len() - 1] * &pw[1];
                    pw.push(next);
                }
                t = &t * &pw[k];
            }
            acc.extend(t.terms);
        }
        Self { terms: normalize(acc) }
    }

    /// Exact quotient by a nonzero linear form, or `None`.
    pub fn div_linear(&self, l: &LinearForm) -> Option<Self> {
        let k = l.leading_var()?;
        let lk = l.0[k] as i128;
        let xk = mono_var(k);
        let mut rest: BTreeMap<Mono, i128> = self.terms.iter().copied().collect();
        let mut quot = Vec::new();
        while let Some((&m, &c)) = rest.iter().next_back() {
            if mono_exp(m, k) == 0 || c % lk != 0 {
                return None;
            }
            let qm = m - xk;
            let qc = c / lk;
            quot.push((qm, qc));
            for (j, &a) in l.0.iter().enumerate() {
                if a == 0 {
                    continue;
                }
                let tm = qm + mono_var(j);
                let e = rest.entry(tm).or_insert(0);
                *e -= qc * a as i128;
                if *e == 0 {
                    rest.remove(&tm);
                }
            }
        }
        Some(Self { terms: normalize(quot) })
    }

    /// Value with `x_j = point[j]`.
    pub fn eval(&self, point: &[i128]) -> i128 {
        self.terms
            .iter()
            .map(|&(m, c)| {
                (0..point.len()).fold(c, |acc, j| acc * point[j].pow(mono_exp(m, j)))
            })
            .sum()
    }

    /// Value modulo `p` at an integer point.
    pub fn eval_mod(&self, point: &[i128], p: i128) -> i128 {
        let mut acc = 0;
        for &(m, c) in &self.terms {
            let mut t = c.rem_euclid(p);
            for (j, &x) in point.iter().enumerate() {
                for _ in 0..mono_exp(m, j) {
                    t = mul_mod(t, x.rem_euclid(p), p);
                }
            }
            acc = (acc + t) % p;
        }
        acc
    }

    /// Content (gcd of coefficients), zero for the zero polynomial.
    pub fn content(&self) -> i128 {
        self.terms.iter().fold(0i128, |g, &(_, c)| gcd128(g, c))
    }

    pub fn leading_coeff(&self) -> i128 {
        self.terms.last().map_or(0, |t| t.1)
    }
}

pub(crate) fn mul_mod(a: i128, b: i128, p: i128) -> i128 {
    // Operands are below 2^62, so the product fits.
    (a * b).rem_euclid(p)
}

pub(crate) fn inv_mod(a: i128, p: i128) -> i128 {
    let (mut r0, mut r1, mut t0, mut t1) = (p, a.rem_euclid(p), 0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    assert_eq!(r0, 1, "not invertible");
    t0.rem_euclid(p)
}

pub(crate) fn gcd128(a: i128, b: i128) -> i128 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

impl Add for &Poly {
    type Output = Poly;
    fn add(self, rhs: &Poly) -> Poly {
        self.combine(rhs, 1)
    }
}
impl Sub for &Poly {
    type Output = Poly;
    fn sub(self, rhs: &Poly) -> Poly {
        self.combine(rhs, -1)
    }
}
impl Neg for &Poly {
    type Output = Poly;
    fn neg(self) -> Poly {
        self.scale(-1)
    }
}
impl Mul for &Poly {
    type Output = Poly;
    fn mul(self, rhs: &Poly) -> Poly {
        if self.is_zero() || rhs.is_zero() {
            return Poly::zero();
        }
        let mut acc = Vec::with_capacity(self.terms.len() * rhs.terms.len());
        for &(a, x) in &self.terms {
            for &(b, y) in &rhs.terms {
                acc.push((mono_mul(a, b), x.checked_mul(y).expect("coefficient overflow")));
            }
        }
        Poly { terms: normalize(acc) }
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, &(m, c)) in self.terms.iter().rev().enumerate() {
            if i > 0 {
                write!(f, " {} ", if c < 0 { "-" } else { "+" })?;
            } else if c < 0 {
                write!(f, "-")?;
            }
            let mut vars = Vec::new();
            for j in 0..MAX_VARS {
                match mono_exp(m, j) {
                    0 => {}
                    1 => vars.push(format!("x{j}")),
                    k => vars.push(format!("x{j}^{k}")),
                }
            }
            if vars.is_empty() {
                write!(f, "{}", c.abs())?;
            } else {
                if c.abs() != 1 {
                    write!(f, "{}*", c.abs())?;
                }
                write!(f, "{}", vars.join("*"))?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// Linear form `sum_j c_j x_j` on the realization lattice.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinearForm(pub Vec<i64>);

impl LinearForm {
    pub fn leading_var(&self) -> Option<usize> {
        self.0.iter().position(|&c| c != 0)
    }
    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
    pub fn to_poly(&self) -> Poly {
        Poly::linear(&self.0)
    }
    /// Splits into `sign * content * primitive` with the primitive form's
    /// leading coefficient positive.
    pub fn normalized(&self) -> (i128, LinearForm) {
        let g = self.0.iter().fold(0i64, |g, &c| gcd128(g as i128, c as i128) as i64);
        let lead = self.0[self.leading_var().expect("zero linear form")];
        let f = if lead < 0 { -g } else { g };
        (f as i128, LinearForm(self.0.iter().map(|&c| c / f).collect()))
    }
}

/// Matrix of `s` on V* in dual coordinates: column j is `s(x_j)`.
pub fn vstar_reflection(sys: &CoxeterSystem, s: Gen) -> Vec<Vec<i64>> {
    let r = sys.rank();
    let (root, coroot) = (sys.root(s), sys.coroot(s));
    (0..r)
        .map(|i| (0..r).map(|j| i64::from(i == j) - root[i] * coroot[j]).collect())
        .collect()
}

/// Matrix of `w` on V*; column j is `w(x_j)`.
pub fn vstar_matrix(sys: &CoxeterSystem, w: &WElem) -> Vec<Vec<i64>> {
    let r = sys.rank();
    let mut a: Vec<Vec<i64>> = (0..r).map(|i| (0..r).map(|j| i64::from(i == j)).collect()).collect();
    for &s in w.word() {
        let m = vstar_reflection(sys, s);
        a = (0..r)
            .map(|i| (0..r).map(|j| (0..r).map(|k| a[i][k] * m[k][j]).sum()).collect())
            .collect();
    }
    a
}

/// Applies a V* matrix (columns are images of the coordinates) to a
/// linear form.
pub fn apply_linear(a: &[Vec<i64>], l: &[i64]) -> Vec<i64> {
    (0..a.len())
        .map(|i| (0..l.len()).map(|j| a[i][j] * l[j]).sum())
        .collect()
}

pub fn act_matrix(a: &[Vec<i64>], f: &Poly) -> Poly {
    let r = a.len();
    let images: Vec<Poly> = (0..r)
        .map(|j| Poly::linear(&(0..r).map(|i| a[i][j]).collect::<Vec<_>>()))
        .collect();
    f.substitute(&images)
}

/// `w(f)`.
pub fn act(sys: &CoxeterSystem, w: &WElem, f: &Poly) -> Poly {
    act_matrix(&vstar_matrix(sys, w), f)
}

/// `s(f)` for a simple reflection.
pub fn act_gen(sys: &CoxeterSystem, s: Gen, f: &Poly) -> Poly {
    act_matrix(&vstar_reflection(sys, s), f)
}

pub fn root_poly(sys: &CoxeterSystem, s: Gen) -> Poly {
    Poly::linear(sys.root(s))
}

/// `(f - s f) / alpha_s`.
pub fn demazure(sys: &CoxeterSystem, s: Gen, f: &Poly) -> Poly {
    let diff = f - &act_gen(sys, s, f);
    diff.div_linear(&LinearForm(sys.root(s).to_vec()))
        .expect("Demazure quotient not exact; realization is inconsistent")
}

/// Fraction `num / (cden * prod(den))` with `num` in R, a positive integer
/// `cden` coprime to the content of `num`, and `den` a sorted multiset of
/// primitive linear forms with positive leading coefficient.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RatFn {
    num: Poly,
    cden: i128,
    den: Vec<LinearForm>,
}

impl Default for RatFn {
    fn default() -> Self {
        Self::zero()
    }
}

impl RatFn {
    pub fn zero() -> Self {
        Self { num: Poly::zero(), cden: 1, den: Vec::new() }
    }
    pub fn one() -> Self {
        Self::from_poly(Poly::one())
    }
    pub fn from_poly(p: Poly) -> Self {
        Self { num: p, cden: 1, den: Vec::new() }
    }
    pub fn constant(c: i128) -> Self {
        Self::from_poly(Poly::constant(c))
    }
    pub fn num(&self) -> &Poly {
        &self.num
    }
    pub fn den(&self) -> &[LinearForm] {
        &self.den
    }
    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }
    pub fn is_poly(&self) -> bool {
        self.den.is_empty() && self.cden == 1
    }
    pub fn to_poly(&self) -> Option<Poly> {
        self.is_poly().then(|| self.num.clone())
    }
    /// Grade with linear forms in degree 2; `None` if not homogeneous.
    pub fn grade(&self) -> Option<i32> {
        Some(self.num.grade()? - 2 * self.den.len() as i32)
    }

    /// Divides by a nonzero linear form.
    pub fn div_linear(&self, l: &LinearForm) -> Self {
        let (c, prim) = l.normalized();
        let mut den = self.den.clone();
        den.push(prim);
        den.sort();
        Self { num: self.num.scale(c.signum()), cden: self.cden * c.abs(), den }.reduced()
    }

    /// Cancels common factors between numerator and denominator.
    fn reduced(mut self) -> Self {
        if self.num.is_zero() {
            return Self::zero();
        }
        let mut i = 0;
        while i < self.den.len() {
            if let Some(q) = self.num.div_linear(&self.den[i]) {
                self.num = q;
                self.den.remove(i);
            } else {
                i += 1;
            }
        }
        if self.cden != 1 {
            let g = gcd128(self.num.content(), self.cden);
            if g > 1 {
                self.num = self.num.div_const(g);
                self.cden /= g;
            }
        }
        self
    }

    pub fn mul_poly(&self, p: &Poly) -> Self {
        Self { num: &self.num * p, cden: self.cden, den: self.den.clone() }.reduced()
    }

    /// Divides by a nonzero integer.
    pub fn div_int(&self, c: i128) -> Self {
        assert!(c != 0);
        Self { num: self.num.scale(c.signum()), cden: self.cden * c.abs(), den: self.den.clone() }.reduced()
    }

    /// Applies a V* matrix (see [`vstar_matrix`]) to numerator and denominator.
    pub fn act_matrix(&self, a: &[Vec<i64>]) -> Self {
        let mut out = RatFn::from_poly(act_matrix(a, &self.num)).div_int(self.cden);
        for l in &self.den {
            out = out.div_linear(&LinearForm(apply_linear(a, &l.0)));
        }
        out
    }

    /// Value modulo the prime `p` at an integer point, or `None` if the
    /// denominator vanishes there.
    pub fn eval_mod(&self, point: &[i128], p: i128) -> Option<i128> {
        let num = self.num.eval_mod(point, p);
        let mut den = self.cden.rem_euclid(p);
        for l in &self.den {
            let v: i128 = l.0.iter().zip(point).map(|(&c, &x)| c as i128 * x).sum();
            den = mul_mod(den, v.rem_euclid(p), p);
        }
        (den != 0).then(|| mul_mod(num, inv_mod(den, p), p))
    }

    pub fn scale(&self, c: i128) -> Self {
        if c == 0 {
            return Self::zero();
        }
        Self { num: self.num.scale(c), cden: self.cden, den: self.den.clone() }.reduced()
    }
}

impl Poly {
    /// Exact division by an integer; panics if inexact.
    pub fn div_const(&self, c: i128) -> Poly {
        assert!(c != 0);
        Poly {
            terms: self
                .terms
                .iter()
                .map(|&(m, x)| {
                    assert!(x % c == 0, "inexact integer division");
                    (m, x / c)
                })
                .collect(),
        }
    }
}

/// Multiset difference `a - b` assuming `b` is contained in `a` (both sorted).
fn multiset_minus(a: &[LinearForm], b: &[LinearForm]) -> Vec<LinearForm> {
    let mut out = Vec::new();
    let mut j = 0;
    for x in a {
        if j < b.len() && b[j] == *x {
            j += 1;
        } else {
            out.push(x.clone());
        }
    }
    debug_assert_eq!(j, b.len());
    out
}

fn multiset_lcm(a: &[LinearForm], b: &[LinearForm]) -> Vec<LinearForm> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) if x == y => {
                out.push(x.clone());
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => {
                out.push(x.clone());
                i += 1;
            }
            (Some(x), None) => {
                out.push(x.clone());
                i += 1;
            }
            (_, Some(y)) => {
                out.push(y.clone());
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

fn product(ls: &[LinearForm]) -> Poly {
    ls.iter().fold(Poly::one(), |acc, l| &acc * &l.to_poly())
}

impl Add for &RatFn {
    type Output = RatFn;
    fn add(self, rhs: &RatFn) -> RatFn {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let cden = self.cden / gcd128(self.cden, rhs.cden) * rhs.cden;
        let (ka, kb) = (cden / self.cden, cden / rhs.cden);
        if self.den == rhs.den {
            let num = &self.num.scale(ka) + &rhs.num.scale(kb);
            return RatFn { num, cden, den: self.den.clone() }.reduced();
        }
        let den = multiset_lcm(&self.den, &rhs.den);
        let a = &self.num.scale(ka) * &product(&multiset_minus(&den, &self.den));
        let b = &rhs.num.scale(kb) * &product(&multiset_minus(&den, &rhs.den));
        RatFn { num: &a + &b, cden, den }.reduced()
    }
}
impl Sub for &RatFn {
    type Output = RatFn;
    fn sub(self, rhs: &RatFn) -> RatFn {
        self + &-rhs
    }
}
impl Neg for &RatFn {
    type Output = RatFn;
    fn neg(self) -> RatFn {
        self.scale(-1)
    }
}
impl Mul for &RatFn {
    type Output = RatFn;
    fn mul(self, rhs: &RatFn) -> RatFn {
        if self.is_zero() || rhs.is_zero() {
            return RatFn::zero();
        }
        let mut den: Vec<LinearForm> = self.den.iter().chain(&rhs.den).cloned().collect();
        den.sort();
        RatFn { num: &self.num * &rhs.num, cden: self.cden * rhs.cden, den }.reduced()
    }
}

impl fmt::Display for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_poly() {
            return write!(f, "{}", self.num);
        }
        write!(f, "({})/", self.num)?;
        let mut parts: Vec<String> = self.den.iter().map(|l| format!("({})", l.to_poly())).collect();
        if self.cden != 1 {
            parts.insert(0, self.cden.to_string());
        }
        write!(f, "{}", parts.join(""))
    }
}

impl fmt::Debug for RatFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sys(name: &str) -> CoxeterSystem {
        CoxeterSystem::named(name).unwrap()
    }

    #[test]
    fn action_examples() {
        let b = sys("B2");
        let (at, as_) = (root_poly(&b, 1), root_poly(&b, 0));
        assert_eq!(act_gen(&b, 0, &at), &at + &as_.scale(2));
        assert_eq!(act_gen(&b, 0, &as_), -&as_);
        let f = &(&at * &as_) + &Poly::var(0);
        assert_eq!(act(&b, &b.identity(), &f), f);
    }

    #[test]
    fn demazure_examples() {
        let b = sys("B2");
        assert_eq!(demazure(&b, 0, &root_poly(&b, 0)), Poly::constant(2));
        assert_eq!(demazure(&b, 0, &Poly::one()), Poly::zero());
        let g = sys("G2");
        assert_eq!(demazure(&g, 0, &root_poly(&g, 1)), Poly::constant(-3));
        assert_eq!(demazure(&g, 1, &root_poly(&g, 0)), Poly::constant(-1));
    }

    #[test]
    fn division() {
        let l = LinearForm(vec![2, -1, 0]);
        let q = &Poly::linear(&[1, 1, 3]) * &Poly::linear(&[0, 2, -1]);
        let f = &q * &l.to_poly();
        assert_eq!(f.div_linear(&l), Some(q));
        assert_eq!(Poly::linear(&[1, 0, 0]).div_linear(&l), None);
    }

    #[test]
    fn ratfn_arith() {
        let a = LinearForm(vec![1, 0]);
        let b = LinearForm(vec![1, 1]);
        let x = RatFn::one().div_linear(&a);
        let y = RatFn::one().div_linear(&b);
        // 1/a - 1/b = (b - a) / ab = x1 / ab
        let d = &x - &y;
        assert_eq!(d.grade(), Some(-2));
        let back = d.mul_poly(&a.to_poly()).mul_poly(&b.to_poly());
        assert_eq!(back.to_poly(), Some(Poly::var(1)));
        assert!((&x - &x).is_zero());
        let neg = RatFn::one().div_linear(&LinearForm(vec![-1, 0]));
        assert_eq!(neg, -&x);
        assert_eq!(RatFn::from_poly(Poly::linear(&[2, 0])).div_linear(&LinearForm(vec![2, 0])), RatFn::one());
    }

    #[test]
    fn vstar_matrices_compose() {
        let g = sys("G2");
        let x = g.from_word(&[0, 1, 0]);
        let y = g.from_word(&[1, 0]);
        let f = &(&Poly::var(0) * &Poly::var(1)) + &Poly::var(1).pow(2);
        assert_eq!(act(&g, &g.mult(&x, &y), &f), act(&g, &x, &act(&g, &y, &f)));
        let w0 = g.from_word(&[0, 1, 0, 1, 0, 1]);
        for s in g.gens() {
            assert_eq!(act(&g, &w0, &root_poly(&g, s)).num_terms() > 0, true);
        }
    }

    const NAMES: [&str; 5] = ["A2", "B2", "G2", "A1~", "C3"];

    fn arb_poly(nvars: usize, deg: u32) -> impl Strategy<Value = Poly> {
        prop::collection::vec((prop::collection::vec(0u32..=deg, nvars - 1), -4i128..=4), 1..6).prop_map(
            move |ts| {
                // Pad the last variable so every term has degree `deg`.
                Poly::from_terms(ts.into_iter().filter_map(|(mut e, c)| {
                    let d: u32 = e.iter().sum();
                    (d <= deg).then(|| {
                        e.push(deg - d);
                        (e, c)
                    })
                }))
            },
        )
    }

    fn sys_and_polys() -> impl Strategy<Value = (usize, Poly, Poly)> {
        (0..NAMES.len(), 0u32..4, 0u32..3).prop_flat_map(|(i, d1, d2)| {
            let r = sys(NAMES[i]).rank();
            (Just(i), arb_poly(r, d1), arb_poly(r, d2))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn demazure_laws((i, f, g) in sys_and_polys()) {
            let w = sys(NAMES[i]);
            for s in w.gens() {
                let lhs = demazure(&w, s, &(&f * &g));
                let rhs = &(&demazure(&w, s, &f) * &g) + &(&act_gen(&w, s, &f) * &demazure(&w, s, &g));
                prop_assert_eq!(&lhs, &rhs);
                prop_assert!(demazure(&w, s, &demazure(&w, s, &f)).is_zero());
                prop_assert_eq!(act_gen(&w, s, &f) == f, demazure(&w, s, &f).is_zero());
                let d = demazure(&w, s, &f);
                if !d.is_zero() {
                    prop_assert_eq!(d.degree().unwrap() + 1, f.degree().unwrap());
                }
                prop_assert_eq!(act_gen(&w, s, &act_gen(&w, s, &f)), f.clone());
            }
        }

        #[test]
        fn demazure_braid((i, f, _g) in sys_and_polys()) {
            let w = sys(NAMES[i]);
            for s in w.gens() {
                for t in w.gens() {
                    let Some(m) = w.m(s, t) else { continue };
                    if s >= t {
                        continue;
                    }
                    // D_a D_b D_a ... (m factors) applied to f.
                    let apply = |a: Gen, b: Gen| {
                        let ops: Vec<Gen> = (0..m).map(|k| if k % 2 == 0 { a } else { b }).collect();
                        ops.iter().rev().fold(f.clone(), |acc, &x| demazure(&w, x, &acc))
                    };
                    prop_assert_eq!(apply(s, t), apply(t, s));
                }
            }
        }

        #[test]
        fn ratfn_field_ops(a in -5i64..5, b in 1i64..5, c in -3i128..3) {
            let l1 = LinearForm(vec![1, a, 0]);
            let l2 = LinearForm(vec![0, b, 1]);
            let x = RatFn::constant(c).div_linear(&l1);
            let y = RatFn::one().div_linear(&l2);
            let s = &x + &y;
            let back = &(&s - &y) - &x;
            prop_assert!(back.is_zero());
            let p = (&s * &RatFn::from_poly(&l1.to_poly() * &l2.to_poly())).to_poly().unwrap();
            prop_assert_eq!(p, &l2.to_poly().scale(c) + &l1.to_poly());
        }
    }
}
