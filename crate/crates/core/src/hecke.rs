//! Hecke algebra over Z[v, v^{-1}]: standard basis arithmetic, the bar
//! involution and the Kazhdan-Lusztig basis.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::coxeter::{CoxeterSystem, Gen, Side, WElem};

/// Laurent polynomial in `v` with integer coefficients.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LaurentPoly {
    terms: BTreeMap<i32, i64>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }
    pub fn one() -> Self {
        Self::monomial(0, 1)
    }
    pub fn v() -> Self {
        Self::monomial(1, 1)
    }
    pub fn monomial(exp: i32, coef: i64) -> Self {
        let mut p = Self::zero();
        p.add_term(exp, coef);
        p
    }
    /// `v + v^{-1}`.
    pub fn quantum_two() -> Self {
        Self::from_terms([(-1, 1), (1, 1)])
    }
    pub fn from_terms(terms: impl IntoIterator<Item = (i32, i64)>) -> Self {
        let mut p = Self::zero();
        for (e, c) in terms {
            p.add_term(e, c);
        }
        p
    }

    pub fn add_term(&mut self, exp: i32, coef: i64) {
        if coef == 0 {
            return;
        }
        let e = self.terms.entry(exp).or_insert(0);
        *e += coef;
        if *e == 0 {
            self.terms.remove(&exp);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn coeff(&self, exp: i32) -> i64 {
        self.terms.get(&exp).copied().unwrap_or(0)
    }
    pub fn terms(&self) -> impl Iterator<Item = (i32, i64)> + '_ {
        self.terms.iter().map(|(&e, &c)| (e, c))
    }
    pub fn min_exp(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }
    pub fn max_exp(&self) -> Option<i32> {
        self.terms.keys().next_back().copied()
    }

    /// `v -> v^{-1}`.
    pub fn bar(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(&e, &c)| (-e, c)).collect(),
        }
    }
    pub fn is_self_dual(&self) -> bool {
        *self == self.bar()
    }
    pub fn is_nonnegative(&self) -> bool {
        self.terms.values().all(|&c| c >= 0)
    }
    pub fn scale(&self, c: i64) -> Self {
        if c == 0 {
            return Self::zero();
        }
        Self {
            terms: self.terms.iter().map(|(&e, &x)| (e, x * c)).collect(),
        }
    }
    pub fn shift(&self, by: i32) -> Self {
        Self {
            terms: self.terms.iter().map(|(&e, &x)| (e + by, x)).collect(),
        }
    }
    pub fn eval_at_one(&self) -> i64 {
        self.terms.values().sum()
    }
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}
impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}
impl AddAssign<&LaurentPoly> for LaurentPoly {
    fn add_assign(&mut self, rhs: &LaurentPoly) {
        for (e, c) in rhs.terms() {
            self.add_term(e, c);
        }
    }
}
impl SubAssign<&LaurentPoly> for LaurentPoly {
    fn sub_assign(&mut self, rhs: &LaurentPoly) {
        for (e, c) in rhs.terms() {
            self.add_term(e, -c);
        }
    }
}
impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        self.scale(-1)
    }
}
impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = LaurentPoly::zero();
        for (a, x) in self.terms() {
            for (b, y) in rhs.terms() {
                out.add_term(a + b, x * y);
            }
        }
        out
    }
}

impl fmt::Display for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in self.terms() {
            let sign = if c < 0 { "-" } else { "+" };
            if first {
                if c < 0 {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {sign} ")?;
            }
            first = false;
            let a = c.abs();
            match e {
                0 => write!(f, "{a}")?,
                _ => {
                    if a != 1 {
                        write!(f, "{a}")?;
                    }
                    match e {
                        1 => write!(f, "v")?,
                        _ => write!(f, "v^{e}")?,
                    }
                }
            }
        }
        Ok(())
    }
}

impl fmt::Debug for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl Serialize for LaurentPoly {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let v: Vec<(i32, i64)> = self.terms().collect();
        v.serialize(ser)
    }
}

impl<'de> Deserialize<'de> for LaurentPoly {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let v: Vec<(i32, i64)> = Vec::deserialize(de)?;
        Ok(Self::from_terms(v))
    }
}

/// Element of the Hecke algebra as a sparse map `x -> coefficient`. The
/// same container holds expansions in the standard basis `{H_x}` and in
/// the KL basis `{b_x}`; the caller tracks which.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct HeckeElt {
    terms: BTreeMap<WElem, LaurentPoly>,
}

/// Expansion in the Kazhdan-Lusztig basis.
pub type KLExpansion = HeckeElt;

impl HeckeElt {
    pub fn zero() -> Self {
        Self::default()
    }
    pub fn basis(x: WElem) -> Self {
        Self::term(x, LaurentPoly::one())
    }
    pub fn term(x: WElem, c: LaurentPoly) -> Self {
        let mut h = Self::zero();
        h.add_term(x, &c);
        h
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn len(&self) -> usize {
        self.terms.len()
    }
    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn coeff(&self, x: &WElem) -> LaurentPoly {
        self.terms.get(x).cloned().unwrap_or_default()
    }
    pub fn get(&self, x: &WElem) -> Option<&LaurentPoly> {
        self.terms.get(x)
    }
    /// Terms in ShortLex order of the basis elements.
    pub fn iter(&self) -> impl DoubleEndedIterator<Item = (&WElem, &LaurentPoly)> {
        self.terms.iter()
    }
    pub fn support(&self) -> impl Iterator<Item = &WElem> {
        self.terms.keys()
    }

    pub fn add_term(&mut self, x: WElem, c: &LaurentPoly) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(x) {
            Entry::Vacant(v) => {
                v.insert(c.clone());
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn add_scaled(&mut self, other: &HeckeElt, c: &LaurentPoly) {
        for (x, p) in other.iter() {
            self.add_term(x.clone(), &(p * c));
        }
    }

    pub fn scale(&self, c: &LaurentPoly) -> Self {
        let mut out = Self::zero();
        out.add_scaled(self, c);
        out
    }

    /// Applies `v -> v^{-1}` coefficientwise (not the bar involution).
    pub fn bar_coefficients(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(x, p)| (x.clone(), p.bar())).collect(),
        }
    }
}

impl Add for &HeckeElt {
    type Output = HeckeElt;
    fn add(self, rhs: &HeckeElt) -> HeckeElt {
        let mut out = self.clone();
        out.add_scaled(rhs, &LaurentPoly::one());
        out
    }
}
impl Sub for &HeckeElt {
    type Output = HeckeElt;
    fn sub(self, rhs: &HeckeElt) -> HeckeElt {
        let mut out = self.clone();
        out.add_scaled(rhs, &LaurentPoly::monomial(0, -1));
        out
    }
}

impl fmt::Debug for HeckeElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

/// Hecke algebra of a Coxeter system with memoized bar images and KL
/// basis elements.
pub struct Hecke {
    sys: Arc<CoxeterSystem>,
    kl_cache: DashMap<WElem, Arc<HeckeElt>>,
    bar_cache: DashMap<WElem, Arc<HeckeElt>>,
}

impl Hecke {
    pub fn new(sys: Arc<CoxeterSystem>) -> Self {
        Self {
            sys,
            kl_cache: DashMap::new(),
            bar_cache: DashMap::new(),
        }
    }

    pub fn system(&self) -> &Arc<CoxeterSystem> {
        &self.sys
    }

    /// `a * H_s`.
    pub fn rmul_h(&self, a: &HeckeElt, s: Gen) -> HeckeElt {
        let mut out = HeckeElt::zero();
        let q = LaurentPoly::from_terms([(-1, 1), (1, -1)]);
        for (x, c) in a.iter() {
            let xs = self.sys.rmul(x, s);
            if self.sys.descent(x, s, Side::Right) {
                out.add_term(xs, c);
                out.add_term(x.clone(), &(c * &q));
            } else {
                out.add_term(xs, c);
            }
        }
        out
    }

    /// `H_s * a`.
    pub fn lmul_h(&self, s: Gen, a: &HeckeElt) -> HeckeElt {
        let mut out = HeckeElt::zero();
        let q = LaurentPoly::from_terms([(-1, 1), (1, -1)]);
        for (x, c) in a.iter() {
            let sx = self.sys.lmul(s, x);
            out.add_term(sx, c);
            if self.sys.descent(x, s, Side::Left) {
                out.add_term(x.clone(), &(c * &q));
            }
        }
        out
    }

    /// `a * b_s` with `b_s = H_s + v`.
    pub fn rmul_kl_s(&self, a: &HeckeElt, s: Gen) -> HeckeElt {
        let mut out = self.rmul_h(a, s);
        out.add_scaled(a, &LaurentPoly::v());
        out
    }

    /// `b_s * a`.
    pub fn lmul_kl_s(&self, s: Gen, a: &HeckeElt) -> HeckeElt {
        let mut out = self.lmul_h(s, a);
        out.add_scaled(a, &LaurentPoly::v());
        out
    }

    pub fn std_mult(&self, a: &HeckeElt, b: &HeckeElt) -> HeckeElt {
        let mut out = HeckeElt::zero();
        for (y, c) in b.iter() {
            let mut t = a.clone();
            for &s in y.word() {
                t = self.rmul_h(&t, s);
            }
            out.add_scaled(&t, c);
        }
        out
    }

    /// `b_{s_1} ... b_{s_n}` in the standard basis.
    pub fn bott_samelson(&self, word: &[Gen]) -> HeckeElt {
        let mut h = HeckeElt::basis(self.sys.identity());
        for &s in word {
            h = self.rmul_kl_s(&h, s);
        }
        h
    }

    /// Bar image of `H_x`.
    fn bar_std(&self, x: &WElem) -> Arc<HeckeElt> {
        if let Some(h) = self.bar_cache.get(x) {
            return h.clone();
        }
        let h = if x.is_identity() {
            HeckeElt::basis(x.clone())
        } else {
            // bar(H_x) = bar(H_{x'}) (H_s + v - v^{-1}) for x = x's.
            let s = *x.word().last().unwrap();
            let prev = self.bar_std(&self.sys.rmul(x, s));
            let mut out = self.rmul_h(&prev, s);
            out.add_scaled(&prev, &LaurentPoly::from_terms([(1, 1), (-1, -1)]));
            out
        };
        let h = Arc::new(h);
        self.bar_cache.insert(x.clone(), h.clone());
        h
    }

    pub fn bar(&self, a: &HeckeElt) -> HeckeElt {
        let mut out = HeckeElt::zero();
        for (x, c) in a.iter() {
            out.add_scaled(&self.bar_std(x), &c.bar());
        }
        out
    }

    /// The Kazhdan-Lusztig element `b_x` in the standard basis.
    pub fn kl_basis(&self, x: &WElem) -> Arc<HeckeElt> {
        if let Some(h) = self.kl_cache.get(x) {
            return h.clone();
        }
        let h = if x.is_identity() {
            HeckeElt::basis(x.clone())
        } else {
            let s = x.word()[0];
            let sx = self.sys.lmul(s, x);
            let prev = self.kl_basis(&sx);
            let mut out = self.lmul_kl_s(s, &prev);
            for (z, h) in prev.iter() {
                if *z == sx || !self.sys.descent(z, s, Side::Left) {
                    continue;
                }
                let mu = h.coeff(1);
                if mu != 0 {
                    out.add_scaled(&self.kl_basis(z), &LaurentPoly::monomial(0, -mu));
                }
            }
            out
        };
        let h = Arc::new(h);
        self.kl_cache.insert(x.clone(), h.clone());
        h
    }

    /// Coefficient of `v` in `h_{y,x}`.
    pub fn mu(&self, y: &WElem, x: &WElem) -> i64 {
        self.kl_basis(x).coeff(y).coeff(1)
    }

    /// Rewrites a standard-basis element in the KL basis.
    pub fn to_kl(&self, a: &HeckeElt) -> KLExpansion {
        let mut rest = a.clone();
        let mut out = HeckeElt::zero();
        // The ShortLex-largest term has maximal length, hence is maximal in
        // the Bruhat order among the support.
        loop {
            let Some((x, c)) = rest.iter().next_back().map(|(x, c)| (x.clone(), c.clone())) else {
                break;
            };
            rest.add_scaled(&self.kl_basis(&x), &-&c);
            out.add_term(x, &c);
        }
        out
    }

    /// Rewrites a KL-basis expansion in the standard basis.
    pub fn from_kl(&self, a: &KLExpansion) -> HeckeElt {
        let mut out = HeckeElt::zero();
        for (x, c) in a.iter() {
            out.add_scaled(&self.kl_basis(x), c);
        }
        out
    }

    /// Human-readable sum like `kl_{sts} + (v + v^-1) kl_{s}`.
    pub fn format(&self, a: &HeckeElt, symbol: &str) -> String {
        if a.is_zero() {
            return "0".into();
        }
        let parts: Vec<String> = a
            .iter()
            .rev()
            .map(|(x, c)| {
                let name = format!("{symbol}_{{{}}}", self.sys.format_word(x.word()));
                if *c == LaurentPoly::one() {
                    name
                } else if c.terms().count() == 1 && c.min_exp() == Some(0) {
                    format!("{}{name}", c.coeff(0))
                } else {
                    format!("({c}){name}")
                }
            })
            .collect();
        parts.join(" + ")
    }
}
