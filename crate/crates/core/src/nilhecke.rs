//! The R-span of the Demazure elements `D_y` inside the nil Hecke ring,
//! and the closed formula for intersection-form entries on pairs of
//! subexpressions without D1 decorations.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;

use crate::coxeter::{CoxeterSystem, DecoratedSubexpr, Decoration, Gen, Side, WElem};
use crate::error::{Error, Result};
use crate::polyring::{act_gen, demazure, root_poly, Poly};

/// `sum_y c_y D_y` with coefficients on the left.
#[derive(Clone, Default, PartialEq, Eq)]
pub struct NilHeckeElt {
    terms: BTreeMap<WElem, Poly>,
}

impl NilHeckeElt {
    pub fn zero() -> Self {
        Self::default()
    }
    pub fn d(y: WElem) -> Self {
        Self::term(y, Poly::one())
    }
    pub fn term(y: WElem, c: Poly) -> Self {
        let mut out = Self::zero();
        out.add_term(y, c);
        out
    }
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
    pub fn coeff(&self, y: &WElem) -> Poly {
        self.terms.get(y).cloned().unwrap_or_default()
    }
    pub fn iter(&self) -> impl Iterator<Item = (&WElem, &Poly)> {
        self.terms.iter()
    }

    pub fn add_term(&mut self, y: WElem, c: Poly) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(y) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                let sum = o.get() + &c;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }
}

impl fmt::Debug for NilHeckeElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.terms.iter()).finish()
    }
}

pub struct NilHecke<'a> {
    sys: &'a CoxeterSystem,
}

impl<'a> NilHecke<'a> {
    pub fn new(sys: &'a CoxeterSystem) -> Self {
        Self { sys }
    }

    /// `X D_s`: `D_y D_s = D_{ys}` if `ys > y`, else 0.
    pub fn rmul_d(&self, x: &NilHeckeElt, s: Gen) -> NilHeckeElt {
        let mut out = NilHeckeElt::zero();
        for (y, c) in x.iter() {
            if !self.sys.descent(y, s, Side::Right) {
                out.add_term(self.sys.rmul(y, s), c.clone());
            }
        }
        out
    }

    /// `D_y f` written as `sum_z g_z D_z`.
    pub fn d_times_poly(&self, y: &WElem, f: &Poly) -> NilHeckeElt {
        if y.is_identity() {
            return NilHeckeElt::term(y.clone(), f.clone());
        }
        // D_y f = D_{y'} (s(f) D_s + d_s f) for y = y's.
        let s = *y.word().last().unwrap();
        let yp = self.sys.rmul(y, s);
        let mut out = self.rmul_d(&self.d_times_poly(&yp, &act_gen(self.sys, s, f)), s);
        let df = demazure(self.sys, s, f);
        if !df.is_zero() {
            for (z, c) in self.d_times_poly(&yp, &df).terms {
                out.add_term(z, c);
            }
        }
        out
    }

    /// `X f`.
    pub fn rmul_poly(&self, x: &NilHeckeElt, f: &Poly) -> NilHeckeElt {
        let mut out = NilHeckeElt::zero();
        for (y, c) in x.iter() {
            for (z, g) in self.d_times_poly(y, f).terms {
                out.add_term(z, c * &g);
            }
        }
        out
    }

    /// Coefficient of `D_x` in `f_1 ... f_m`, where `f_i` is `alpha_{s_i}`
    /// if both entries are U0, 1 if exactly one is, and `D_{s_i}` otherwise.
    pub fn d_pair(&self, word: &[Gen], e1: &DecoratedSubexpr, e2: &DecoratedSubexpr) -> Result<Poly> {
        if e1.word != word || e2.word != word {
            return Err(Error::Invalid("subexpressions do not live on the given word".into()));
        }
        if e1.endpoint != e2.endpoint {
            return Err(Error::Invalid("subexpressions have different endpoints".into()));
        }
        if e1.has_d1() || e2.has_d1() {
            return Err(Error::NotApplicable("a subexpression has a D1 decoration".into()));
        }
        let target = &e1.endpoint;
        let mut x = NilHeckeElt::d(self.sys.identity());
        let n = word.len();
        for i in 0..n {
            let u1 = e1.decorations[i] == Decoration::U0;
            let u2 = e2.decorations[i] == Decoration::U0;
            match (u1, u2) {
                (true, true) => x = self.rmul_poly(&x, &root_poly(self.sys, word[i])),
                (true, false) | (false, true) => {}
                (false, false) => x = self.rmul_d(&x, word[i]),
            }
            // Later factors raise the length by at most the number of
            // remaining D's, so shorter terms can be dropped.
            let remaining_d = (i + 1..n)
                .filter(|&j| {
                    e1.decorations[j] != Decoration::U0 && e2.decorations[j] != Decoration::U0
                })
                .count();
            x.terms.retain(|y, _| y.len() + remaining_d >= target.len());
        }
        Ok(x.coeff(target))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g2() -> CoxeterSystem {
        CoxeterSystem::named("G2").unwrap()
    }

    #[test]
    fn rmul_d_examples() {
        let g = g2();
        let nh = NilHecke::new(&g);
        assert!(nh.rmul_d(&NilHeckeElt::d(g.gen(0)), 0).is_zero());
        assert_eq!(nh.rmul_d(&NilHeckeElt::d(g.identity()), 0), NilHeckeElt::d(g.gen(0)));
        assert_eq!(
            nh.rmul_d(&NilHeckeElt::d(g.from_word(&[0, 1])), 0),
            NilHeckeElt::d(g.from_word(&[0, 1, 0]))
        );
    }

    #[test]
    fn rmul_poly_examples() {
        let g = g2();
        let nh = NilHecke::new(&g);
        let at = root_poly(&g, 1);
        let r = nh.rmul_poly(&NilHeckeElt::d(g.gen(0)), &at);
        assert_eq!(r.coeff(&g.gen(0)), act_gen(&g, 0, &at));
        assert_eq!(r.coeff(&g.identity()), Poly::constant(-3));
        let f = &Poly::var(0) * &Poly::var(1);
        assert_eq!(nh.rmul_poly(&NilHeckeElt::d(g.identity()), &f), NilHeckeElt::term(g.identity(), f));
        let st = g.from_word(&[0, 1]);
        let a_s = root_poly(&g, 0);
        let r = nh.rmul_poly(&NilHeckeElt::d(st.clone()), &a_s);
        assert_eq!(r.coeff(&st), crate::polyring::act(&g, &st, &a_s));
    }

    #[test]
    fn d_pair_g2() {
        let g = g2();
        let nh = NilHecke::new(&g);
        let w = [0, 1, 0, 1];
        let a = g.decorate(&w, &[1, 0, 0, 1]);
        let b = g.decorate(&w, &[1, 1, 0, 0]);
        assert_eq!(nh.d_pair(&w, &a, &a).unwrap(), Poly::constant(-3));
        assert_eq!(nh.d_pair(&w, &a, &b).unwrap(), Poly::constant(1));
        assert_eq!(nh.d_pair(&w, &b, &a).unwrap(), Poly::constant(1));
        assert_eq!(nh.d_pair(&w, &b, &b).unwrap(), Poly::constant(-1));
    }

    #[test]
    fn d_pair_b2_full_form() {
        let b = CoxeterSystem::named("B2").unwrap();
        let nh = NilHecke::new(&b);
        let w = [0, 1, 0];
        let subs = b.subexpressions_for(&w, &b.gen(0));
        // Lexicographic order: (0,0,1) of defect 2, then (1,0,0) of defect 0.
        let (l2, l1) = (&subs[0], &subs[1]);
        let (a_s, a_t) = (root_poly(&b, 0), root_poly(&b, 1));
        assert_eq!(nh.d_pair(&w, l1, l1).unwrap(), Poly::constant(-2));
        assert_eq!(nh.d_pair(&w, l1, l2).unwrap(), a_t);
        assert_eq!(nh.d_pair(&w, l2, l2).unwrap(), &a_s * &a_t);
    }

    #[test]
    fn d_pair_rejects_d1() {
        let b = CoxeterSystem::named("B2").unwrap();
        let nh = NilHecke::new(&b);
        let w = [0, 0];
        let e = b.decorate(&w, &[1, 1]);
        assert!(matches!(nh.d_pair(&w, &e, &e), Err(Error::NotApplicable(_))));
    }

    #[test]
    fn symmetric_and_degree() {
        for name in ["B2", "G2", "A3"] {
            let sys = CoxeterSystem::named(name).unwrap();
            let nh = NilHecke::new(&sys);
            let w: Vec<Gen> = match name {
                "A3" => vec![0, 1, 2, 1, 0, 1],
                _ => vec![0, 1, 0, 1, 0],
            };
            for (_, subs) in sys.subexpressions_by_endpoint(&w) {
                let ok: Vec<_> = subs.iter().filter(|e| !e.has_d1()).collect();
                for a in &ok {
                    for b in &ok {
                        let v = nh.d_pair(&w, a, b).unwrap();
                        assert_eq!(v, nh.d_pair(&w, b, a).unwrap());
                        if !v.is_zero() {
                            assert_eq!(v.grade(), Some(a.defect + b.defect));
                        }
                    }
                }
            }
        }
    }
}
