//! Light leaves, their localization, and local intersection forms.
//!
//! Only the row of a light leaf at the top subexpression of its codomain
//! is needed to pair it with another light leaf, so leaves are pushed
//! through layer by layer as a sparse row vector rather than as a full
//! matrix. Rows can be computed exactly (fractions) or as values modulo a
//! large prime at a fixed integral point; the latter is exact for the
//! degree-zero pairing entries because evaluation at a point away from the
//! poles is a ring map and those entries are integers.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};
use std::sync::Arc;

use dashmap::DashMap;
use serde::{Deserialize, Serialize};
use serde_json::json;
use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::coxeter::{CoxeterSystem, DecoratedSubexpr, Decoration, Gen, WElem};
use crate::error::{Error, Result};
use crate::hecke::LaurentPoly;
use crate::localize::{
    alternating, endpoint_action, evaluate as evaluate_layers, flip_layers, gen_matrix, nu_factors, Generator,
    GeneratorTag, Mat, StdMatrix,
};
use crate::nilhecke::NilHecke;
use crate::polyring::{inv_mod, mul_mod, LinearForm, Poly, RatFn};

/// How braid-move routes between reduced words are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RexPolicy {
    /// Breadth-first, moves tried from the left end first.
    #[default]
    Lex,
    /// Breadth-first, moves tried from the right end first.
    RevLex,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
enum RexGoal {
    EndsWith(Gen),
    Exact(Vec<Gen>),
}

impl RexGoal {
    fn reached(&self, w: &[Gen]) -> bool {
        match self {
            RexGoal::EndsWith(s) => w.last() == Some(s),
            RexGoal::Exact(t) => w == &t[..],
        }
    }
}

/// A morphism given as layers applied bottom to top.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSeq {
    pub dom: Vec<Gen>,
    pub cod: Vec<Gen>,
    pub layers: Vec<GeneratorTag>,
    pub degree: i32,
}

impl GenSeq {
    pub fn identity(word: &[Gen]) -> Self {
        Self { dom: word.to_vec(), cod: word.to_vec(), layers: vec![], degree: 0 }
    }

    pub fn flip(&self) -> Self {
        Self {
            dom: self.cod.clone(),
            cod: self.dom.clone(),
            layers: flip_layers(&self.layers),
            degree: self.degree,
        }
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &GenSeq) -> Result<Self> {
        if self.cod != other.dom {
            return Err(Error::Invalid("sequences do not compose".into()));
        }
        let mut layers = self.layers.clone();
        layers.extend_from_slice(&other.layers);
        Ok(Self { dom: self.dom.clone(), cod: other.cod.clone(), layers, degree: self.degree + other.degree })
    }

    /// Words before each layer, then the codomain.
    fn words(&self, sys: &CoxeterSystem) -> Result<Vec<Vec<Gen>>> {
        let mut out = vec![self.dom.clone()];
        for l in &self.layers {
            let next = l.apply_to_word(sys, out.last().unwrap())?;
            out.push(next);
        }
        Ok(out)
    }
}

/// Full localization matrix of a sequence.
pub fn evaluate(sys: &CoxeterSystem, seq: &GenSeq) -> Result<StdMatrix> {
    let m = evaluate_layers(sys, &seq.dom, &seq.layers)?;
    if m.degree() != seq.degree {
        return Err(Error::Homogeneity(format!("sequence degree {} evaluates to {}", seq.degree, m.degree())));
    }
    Ok(m)
}

// ---- scalar backends -------------------------------------------------------

trait Backend {
    type S: Clone;
    fn zero(&self) -> Self::S;
    fn one(&self) -> Self::S;
    fn is_zero(&self, x: &Self::S) -> bool;
    fn add(&self, a: &Self::S, b: &Self::S) -> Self::S;
    fn mul(&self, a: &Self::S, b: &Self::S) -> Self::S;
    /// A generator entry twisted by the action of the strands to its left.
    fn twisted(&self, v: &RatFn, a: &Mat) -> Result<Self::S>;
    fn linear(&self, l: &LinearForm) -> Self::S;
    fn div_linear(&self, x: &Self::S, l: &LinearForm) -> Result<Self::S>;
}

struct Exact;

impl Backend for Exact {
    type S = RatFn;
    fn zero(&self) -> RatFn {
        RatFn::zero()
    }
    fn one(&self) -> RatFn {
        RatFn::one()
    }
    fn is_zero(&self, x: &RatFn) -> bool {
        x.is_zero()
    }
    fn add(&self, a: &RatFn, b: &RatFn) -> RatFn {
        a + b
    }
    fn mul(&self, a: &RatFn, b: &RatFn) -> RatFn {
        a * b
    }
    fn twisted(&self, v: &RatFn, a: &Mat) -> Result<RatFn> {
        Ok(v.act_matrix(a))
    }
    fn linear(&self, l: &LinearForm) -> RatFn {
        RatFn::from_poly(l.to_poly())
    }
    fn div_linear(&self, x: &RatFn, l: &LinearForm) -> Result<RatFn> {
        Ok(x.div_linear(l))
    }
}

const MODULUS: i128 = (1 << 61) - 1;

struct Modular {
    point: Vec<i128>,
}

impl Modular {
    fn new(rank: usize, seed: u64) -> Self {
        // Fixed pseudo-random point; a pole is detected and triggers a reseed.
        let mut state = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
        let point = (0..rank)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state as i128).rem_euclid(MODULUS)
            })
            .collect();
        Self { point }
    }

    fn lin(&self, l: &[i64]) -> i128 {
        l.iter()
            .zip(&self.point)
            .fold(0, |acc, (&c, &x)| (acc + mul_mod((c as i128).rem_euclid(MODULUS), x, MODULUS)) % MODULUS)
    }
}

impl Backend for Modular {
    type S = i128;
    fn zero(&self) -> i128 {
        0
    }
    fn one(&self) -> i128 {
        1
    }
    fn is_zero(&self, x: &i128) -> bool {
        *x == 0
    }
    fn add(&self, a: &i128, b: &i128) -> i128 {
        (a + b) % MODULUS
    }
    fn mul(&self, a: &i128, b: &i128) -> i128 {
        mul_mod(*a, *b, MODULUS)
    }
    fn twisted(&self, v: &RatFn, a: &Mat) -> Result<i128> {
        // (A f)(pt) = f(pt') with pt'_j = sum_i A[i][j] pt_i.
        let r = a.len();
        let pt: Vec<i128> = (0..r).map(|j| self.lin(&(0..r).map(|i| a[i][j]).collect::<Vec<_>>())).collect();
        v.eval_mod(&pt, MODULUS).ok_or(Error::DegeneratePoint)
    }
    fn linear(&self, l: &LinearForm) -> i128 {
        self.lin(&l.0)
    }
    fn div_linear(&self, x: &i128, l: &LinearForm) -> Result<i128> {
        let d = self.lin(&l.0);
        if d == 0 {
            return Err(Error::DegeneratePoint);
        }
        Ok(mul_mod(*x, inv_mod(d, MODULUS), MODULUS))
    }
}

fn lift(v: i128) -> i128 {
    if v > MODULUS / 2 {
        v - MODULUS
    } else {
        v
    }
}

struct GenEntries {
    dom_len: usize,
    cod_len: usize,
    /// `by_row[g']` lists `(g, G[g', g])`.
    by_row: Vec<Vec<(u64, RatFn)>>,
}

// ---- Gram data ---------------------------------------------------------------

/// Integer block of the intersection form pairing leaves of defect `-degree`
/// (rows) with leaves of defect `degree` (columns). Indices refer to the
/// subexpression list of the owning family.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeBlock {
    pub degree: i32,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub matrix: Vec<Vec<i64>>,
}

#[derive(Clone, Debug)]
pub struct GramFamily {
    pub word: Vec<Gen>,
    pub target: WElem,
    /// Reduced word of the target that all leaves end in.
    pub target_word: Vec<Gen>,
    pub subexprs: Vec<DecoratedSubexpr>,
    /// Full polynomial pairing, present only for exact computations.
    pub pairing: Option<Vec<Vec<Poly>>>,
    pub blocks: Vec<DegreeBlock>,
    pub rank_q: LaurentPoly,
    pub ranks_p: BTreeMap<u64, LaurentPoly>,
    pub nil_hecke_checked: usize,
    pub nil_hecke_mismatches: usize,
}

impl GramFamily {
    pub fn block(&self, degree: i32) -> Option<&DegreeBlock> {
        self.blocks.iter().find(|b| b.degree == degree)
    }

    pub fn to_json(&self, sys: &CoxeterSystem) -> serde_json::Value {
        let subs: Vec<_> = self
            .subexprs
            .iter()
            .map(|e| {
                json!({
                    "bits": e.bits.iter().map(|b| b.to_string()).collect::<String>(),
                    "decorations": e.decorations,
                    "defect": e.defect,
                })
            })
            .collect();
        let pairing = self.pairing.as_ref().map(|p| {
            p.iter()
                .map(|row| row.iter().map(|f| f.to_string()).collect::<Vec<_>>())
                .collect::<Vec<_>>()
        });
        json!({
            "word": sys.format_word(&self.word),
            "target": sys.format_word(self.target.word()),
            "target_word": sys.format_word(&self.target_word),
            "subexpressions": subs,
            "pairing": pairing,
            "blocks": self.blocks,
            "rank_q": self.rank_q,
            "ranks_p": self.ranks_p,
            "nil_hecke": {"checked": self.nil_hecke_checked, "mismatches": self.nil_hecke_mismatches},
        })
    }
}

#[derive(Clone, Debug, Default)]
pub struct GramOptions {
    pub primes: Vec<u64>,
    /// Compute the full pairing over fractions instead of modular values.
    pub exact: bool,
    /// Compare every D1-free entry with the nil Hecke formula.
    pub verify_nil_hecke: bool,
    /// Reduced word of the target; defaults to its ShortLex word.
    pub target_word: Option<Vec<Gen>>,
}

/// Bumped whenever the leaves or the pairing convention change.
pub const ENGINE_VERSION: u32 = 1;

/// Persistent storage for integer Gram blocks, keyed by a string that
/// determines the blocks completely.
pub trait GramStore: Send + Sync {
    fn load(&self, key: &str) -> Option<Vec<DegreeBlock>>;
    fn store(&self, key: &str, blocks: &[DegreeBlock]);
}

// ---- the engine --------------------------------------------------------------

pub struct LightLeaves<'a> {
    sys: &'a CoxeterSystem,
    policy: RexPolicy,
    rex_cache: DashMap<(Vec<Gen>, RexGoal), Arc<Vec<GeneratorTag>>>,
    gens: DashMap<Generator, Arc<GenEntries>>,
    key_prefix: String,
}

impl<'a> LightLeaves<'a> {
    pub fn new(sys: &'a CoxeterSystem, policy: RexPolicy) -> Self {
        let realization = serde_json::to_string(&sys.to_config()).expect("realization serializes");
        let key_prefix = format!("gram/v{ENGINE_VERSION}/{policy:?}/{realization}");
        Self { sys, policy, rex_cache: DashMap::new(), gens: DashMap::new(), key_prefix }
    }

    pub fn system(&self) -> &CoxeterSystem {
        self.sys
    }

    pub fn policy(&self) -> RexPolicy {
        self.policy
    }

    /// Braid moves applicable to `word`, in policy order.
    fn braid_moves(&self, word: &[Gen]) -> Vec<(GeneratorTag, Vec<Gen>)> {
        let n = word.len();
        let mut out = Vec::new();
        let positions: Vec<usize> = match self.policy {
            RexPolicy::Lex => (0..n.saturating_sub(1)).collect(),
            RexPolicy::RevLex => (0..n.saturating_sub(1)).rev().collect(),
        };
        for pos in positions {
            let (a, b) = (word[pos], word[pos + 1]);
            if a == b {
                continue;
            }
            let Some(m) = self.sys.m(a, b) else { continue };
            let m = m as usize;
            if pos + m > n || word[pos..pos + m] != alternating(a, b, m)[..] {
                continue;
            }
            let mut next = word.to_vec();
            next[pos..pos + m].copy_from_slice(&alternating(b, a, m));
            out.push((GeneratorTag::new(pos, Generator::Braid(a, b)), next));
        }
        out
    }

    /// Shortest braid-move route from `from` to a word satisfying `goal`.
    fn rex_route(&self, from: &[Gen], goal: RexGoal) -> Result<Arc<Vec<GeneratorTag>>> {
        let key = (from.to_vec(), goal);
        if let Some(r) = self.rex_cache.get(&key) {
            return Ok(r.clone());
        }
        let goal = &key.1;
        let mut parent: HashMap<Vec<Gen>, (Vec<Gen>, GeneratorTag)> = HashMap::new();
        let mut seen: HashSet<Vec<Gen>> = HashSet::from([from.to_vec()]);
        let mut queue = VecDeque::from([from.to_vec()]);
        let mut found = None;
        while let Some(w) = queue.pop_front() {
            if goal.reached(&w) {
                found = Some(w);
                break;
            }
            for (tag, next) in self.braid_moves(&w) {
                if seen.insert(next.clone()) {
                    parent.insert(next.clone(), (w.clone(), tag));
                    queue.push_back(next);
                }
            }
        }
        let Some(mut w) = found else {
            return Err(Error::Invalid(format!(
                "no braid-move route from {} to {goal:?}",
                self.sys.format_word(from)
            )));
        };
        let mut route = Vec::new();
        while let Some((prev, tag)) = parent.get(&w) {
            route.push(*tag);
            w = prev.clone();
        }
        route.reverse();
        let route = Arc::new(route);
        self.rex_cache.insert(key, route.clone());
        Ok(route)
    }

    /// The light leaf of `e`, ending in `target` (a reduced word of the
    /// endpoint) if given.
    pub fn build(&self, e: &DecoratedSubexpr, target: Option<&[Gen]>) -> Result<GenSeq> {
        use Decoration::*;
        let mut cur: Vec<Gen> = Vec::new();
        let mut layers = Vec::new();
        let mut degree = 0;
        for (i, &s) in e.word.iter().enumerate() {
            let k = cur.len();
            match e.decorations[i] {
                U1 => cur.push(s),
                U0 => {
                    layers.push(GeneratorTag::new(k, Generator::DotOut(s)));
                    degree += 1;
                }
                D0 | D1 => {
                    for tag in self.rex_route(&cur, RexGoal::EndsWith(s))?.iter() {
                        cur = tag.apply_to_word(self.sys, &cur)?;
                        layers.push(*tag);
                    }
                    layers.push(GeneratorTag::new(k - 1, Generator::Merge(s)));
                    if e.decorations[i] == D1 {
                        layers.push(GeneratorTag::new(k - 1, Generator::DotOut(s)));
                        cur.pop();
                    } else {
                        degree -= 1;
                    }
                }
            }
        }
        if let Some(t) = target {
            if self.sys.from_word(t) != e.endpoint || t.len() != e.endpoint.len() {
                return Err(Error::Invalid("target word is not a reduced word of the endpoint".into()));
            }
            for tag in self.rex_route(&cur, RexGoal::Exact(t.to_vec()))?.iter() {
                cur = tag.apply_to_word(self.sys, &cur)?;
                layers.push(*tag);
            }
        }
        debug_assert_eq!(degree, e.defect);
        Ok(GenSeq { dom: e.word.clone(), cod: cur, layers, degree })
    }

    fn gen_entries(&self, g: Generator) -> Result<Arc<GenEntries>> {
        if let Some(e) = self.gens.get(&g) {
            return Ok(e.clone());
        }
        let m = gen_matrix(self.sys, g)?;
        let (dom_len, cod_len) = (m.dom().len(), m.cod().len());
        let mut by_row = vec![Vec::new(); 1 << cod_len];
        for (r, c, v) in m.entries() {
            by_row[r as usize].push((c, v.clone()));
        }
        let e = Arc::new(GenEntries { dom_len, cod_len, by_row });
        self.gens.insert(g, e.clone());
        Ok(e)
    }

    /// `row · L` for the matrix `L` of one layer acting on `word`.
    fn through_layer<B: Backend>(
        &self,
        b: &B,
        word: &[Gen],
        tag: &GeneratorTag,
        row: &HashMap<u64, B::S>,
    ) -> Result<HashMap<u64, B::S>> {
        let g = self.gen_entries(tag.gen)?;
        let l = tag.pos;
        let (cl, dl) = (g.cod_len, g.dom_len);
        let lmask = (1u64 << l) - 1;
        let gmask = (1u64 << cl) - 1;
        let mut twisted: HashMap<u64, Vec<Vec<(u64, B::S)>>> = HashMap::new();
        let mut out: HashMap<u64, B::S> = HashMap::new();
        for (&mask, val) in row {
            let a = mask & lmask;
            let gp = (mask >> l & gmask) as usize;
            let rest = mask >> (l + cl);
            if !twisted.contains_key(&a) {
                let act = endpoint_action(self.sys, &word[..l], a);
                let rows = g
                    .by_row
                    .iter()
                    .map(|r| r.iter().map(|(c, v)| Ok((*c, b.twisted(v, &act)?))).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                twisted.insert(a, rows);
            }
            for (gc, x) in &twisted[&a][gp] {
                let m = a | gc << l | rest << (l + dl);
                let add = b.mul(val, x);
                let slot = out.entry(m).or_insert_with(|| b.zero());
                *slot = b.add(slot, &add);
            }
        }
        out.retain(|_, v| !b.is_zero(v));
        Ok(out)
    }

    /// Row of the localization of `seq` at the top subexpression of its
    /// codomain, indexed by subexpressions of its domain.
    fn top_row<B: Backend>(&self, b: &B, seq: &GenSeq) -> Result<HashMap<u64, B::S>> {
        let words = seq.words(self.sys)?;
        let mut row = HashMap::from([((1u64 << seq.cod.len()) - 1, b.one())]);
        for (tag, word) in seq.layers.iter().zip(&words).rev() {
            row = self.through_layer(b, word, tag, &row)?;
        }
        Ok(row)
    }

    fn nu<B: Backend>(&self, b: &B, word: &[Gen], mask: u64) -> B::S {
        nu_factors(self.sys, word, mask)
            .iter()
            .fold(b.one(), |acc, l| b.mul(&acc, &b.linear(l)))
    }

    /// `sum_e r1[e] r2[e] nu_w(e) / nu_x(top)`.
    fn pair_rows<B: Backend>(
        &self,
        b: &B,
        r1: &HashMap<u64, B::S>,
        r2: &HashMap<u64, B::S>,
        nus: &HashMap<u64, B::S>,
        top_factors: &[LinearForm],
    ) -> Result<B::S> {
        let (small, big) = if r1.len() <= r2.len() { (r1, r2) } else { (r2, r1) };
        let mut acc = b.zero();
        for (e, x) in small {
            if let Some(y) = big.get(e) {
                acc = b.add(&acc, &b.mul(&b.mul(x, y), &nus[e]));
            }
        }
        for l in top_factors {
            acc = b.div_linear(&acc, l)?;
        }
        Ok(acc)
    }

    /// Pairing of two light leaves (the top-top entry of `LL_f ∘ flip(LL_e)`).
    pub fn pairing_exact(&self, a: &GenSeq, b: &GenSeq) -> Result<Poly> {
        if a.dom != b.dom || a.cod != b.cod {
            return Err(Error::Invalid("leaves have different shapes".into()));
        }
        let (ra, rb) = (self.top_row(&Exact, a)?, self.top_row(&Exact, b)?);
        let nus: HashMap<u64, RatFn> = ra.keys().map(|&e| (e, self.nu(&Exact, &a.dom, e))).collect();
        let top = nu_factors(self.sys, &a.cod, (1u64 << a.cod.len()) - 1);
        let v = self.pair_rows(&Exact, &ra, &rb, &nus, &top)?;
        v.to_poly().ok_or_else(|| Error::NonPolynomial(v.to_string()))
    }

    /// The local intersection form of `word` at `x`.
    pub fn gram(&self, word: &[Gen], x: &WElem, opts: &GramOptions) -> Result<GramFamily> {
        let subs = self.sys.subexpressions_for(word, x);
        self.gram_from(word, x, subs, opts, None)
    }

    /// As [`gram`](Self::gram) with precomputed subexpressions and an
    /// optional persistent store for the integer blocks.
    pub fn gram_from(
        &self,
        word: &[Gen],
        x: &WElem,
        subs: Vec<DecoratedSubexpr>,
        opts: &GramOptions,
        store: Option<&dyn GramStore>,
    ) -> Result<GramFamily> {
        let target_word = opts.target_word.clone().unwrap_or_else(|| x.word().to_vec());
        let key = format!("{}/{:?}/{:?}", self.key_prefix, word, target_word);
        let defects: BTreeSet<i32> = subs.iter().map(|e| e.defect).collect();
        let paired = |e: &DecoratedSubexpr| defects.contains(&-e.defect);
        let mut fam = GramFamily {
            word: word.to_vec(),
            target: x.clone(),
            target_word: target_word.clone(),
            pairing: None,
            blocks: Vec::new(),
            rank_q: LaurentPoly::zero(),
            ranks_p: BTreeMap::new(),
            nil_hecke_checked: 0,
            nil_hecke_mismatches: 0,
            subexprs: subs,
        };
        let subs = &fam.subexprs;
        let cached = if opts.exact || opts.verify_nil_hecke { None } else { store.and_then(|s| s.load(&key)) };
        let cached_hit = cached.as_ref().map(|_| ());
        let blocks = if let Some(b) = cached {
            b
        } else if opts.exact {
            let leaves = subs.iter().map(|e| self.build(e, Some(&target_word))).collect::<Result<Vec<_>>>()?;
            let rows = leaves.iter().map(|l| self.top_row(&Exact, l)).collect::<Result<Vec<_>>>()?;
            let mut keys: BTreeSet<u64> = BTreeSet::new();
            for r in &rows {
                keys.extend(r.keys());
            }
            let nus: HashMap<u64, RatFn> = keys.iter().map(|&e| (e, self.nu(&Exact, word, e))).collect();
            let top = nu_factors(self.sys, &target_word, (1u64 << target_word.len()) - 1);
            let n = subs.len();
            let mut p = vec![vec![Poly::zero(); n]; n];
            for i in 0..n {
                for j in i..n {
                    let v = self.pair_rows(&Exact, &rows[i], &rows[j], &nus, &top)?;
                    let v = v.to_poly().ok_or_else(|| Error::NonPolynomial(v.to_string()))?;
                    if !v.is_zero() && v.grade() != Some(subs[i].defect + subs[j].defect) {
                        return Err(Error::Homogeneity(format!("pairing entry {v}")));
                    }
                    p[i][j] = v.clone();
                    p[j][i] = v;
                }
            }
            let blocks = blocks_from(subs, |i, j| Ok(p[i][j].constant_term()))?;
            fam.pairing = Some(p);
            blocks
        } else {
            let mut seed = 1;
            loop {
                match self.modular_blocks(word, subs, &target_word, &paired, seed) {
                    Err(Error::DegeneratePoint) if seed < 8 => seed += 1,
                    other => break other?,
                }
            }
        };
        if opts.verify_nil_hecke {
            let nh = NilHecke::new(self.sys);
            match &fam.pairing {
                Some(p) => {
                    for i in 0..subs.len() {
                        for j in 0..subs.len() {
                            if subs[i].has_d1() || subs[j].has_d1() {
                                continue;
                            }
                            fam.nil_hecke_checked += 1;
                            if nh.d_pair(word, &subs[i], &subs[j])? != p[i][j] {
                                fam.nil_hecke_mismatches += 1;
                            }
                        }
                    }
                }
                None => {
                    for b in &blocks {
                        for (bi, &i) in b.rows.iter().enumerate() {
                            for (bj, &j) in b.cols.iter().enumerate() {
                                if subs[i].has_d1() || subs[j].has_d1() {
                                    continue;
                                }
                                fam.nil_hecke_checked += 1;
                                let d = nh.d_pair(word, &subs[i], &subs[j])?;
                                if !d.is_constant() || d.constant_term() != b.matrix[bi][bj] as i128 {
                                    fam.nil_hecke_mismatches += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        if let Some(s) = store {
            if cached_hit.is_none() {
                s.store(&key, &blocks);
            }
        }
        let mut rank_q = LaurentPoly::zero();
        for b in &blocks {
            rank_q.add_term(b.degree, rank_over_q(&b.matrix)? as i64);
        }
        for &p in &opts.primes {
            let mut r = LaurentPoly::zero();
            for b in &blocks {
                r.add_term(b.degree, rank_mod_p(&b.matrix, p) as i64);
            }
            fam.ranks_p.insert(p, r);
        }
        fam.rank_q = rank_q;
        fam.blocks = blocks;
        Ok(fam)
    }

    fn modular_blocks(
        &self,
        word: &[Gen],
        subs: &[DecoratedSubexpr],
        target_word: &[Gen],
        paired: &dyn Fn(&DecoratedSubexpr) -> bool,
        seed: u64,
    ) -> Result<Vec<DegreeBlock>> {
        let b = Modular::new(self.sys.rank(), seed);
        let mut rows: HashMap<usize, HashMap<u64, i128>> = HashMap::new();
        for (i, e) in subs.iter().enumerate() {
            if paired(e) {
                let leaf = self.build(e, Some(target_word))?;
                rows.insert(i, self.top_row(&b, &leaf)?);
            }
        }
        let mut nus: HashMap<u64, i128> = HashMap::new();
        for r in rows.values() {
            for &e in r.keys() {
                nus.entry(e).or_insert_with(|| self.nu(&b, word, e));
            }
        }
        let top = nu_factors(self.sys, target_word, (1u64 << target_word.len()) - 1);
        blocks_from(subs, |i, j| {
            let v = lift(self.pair_rows(&b, &rows[&i], &rows[&j], &nus, &top)?);
            if v.abs() > 1 << 40 {
                return Err(Error::Overflow("intersection form entry".into()));
            }
            Ok(v)
        })
    }
}

/// Degree blocks from an entry oracle on index pairs of defect sum zero.
fn blocks_from(
    subs: &[DecoratedSubexpr],
    mut entry: impl FnMut(usize, usize) -> Result<i128>,
) -> Result<Vec<DegreeBlock>> {
    let mut by_defect: BTreeMap<i32, Vec<usize>> = BTreeMap::new();
    for (i, e) in subs.iter().enumerate() {
        by_defect.entry(e.defect).or_default().push(i);
    }
    let mut cache: HashMap<(usize, usize), i64> = HashMap::new();
    let mut blocks = Vec::new();
    for (&d, cols) in &by_defect {
        let Some(rows) = by_defect.get(&-d) else { continue };
        let mut matrix = vec![vec![0i64; cols.len()]; rows.len()];
        for (bi, &i) in rows.iter().enumerate() {
            for (bj, &j) in cols.iter().enumerate() {
                let key = (i.min(j), i.max(j));
                let v = match cache.get(&key) {
                    Some(&v) => v,
                    None => {
                        let v = i64::try_from(entry(key.0, key.1)?)
                            .map_err(|_| Error::Overflow("intersection form entry".into()))?;
                        cache.insert(key, v);
                        v
                    }
                };
                matrix[bi][bj] = v;
            }
        }
        blocks.push(DegreeBlock { degree: d, rows: rows.clone(), cols: cols.clone(), matrix });
    }
    Ok(blocks)
}

// ---- ranks -------------------------------------------------------------------

pub fn rank_mod_p(m: &[Vec<i64>], p: u64) -> usize {
    let p = p as i128;
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| (x as i128).rem_euclid(p)).collect()).collect();
    let ncols = a.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..ncols {
        let Some(piv) = (rank..a.len()).find(|&i| a[i][col] != 0) else { continue };
        a.swap(rank, piv);
        let inv = inv_mod(a[rank][col], p);
        for i in rank + 1..a.len() {
            if a[i][col] != 0 {
                let f = mul_mod(a[i][col], inv, p);
                for j in col..ncols {
                    a[i][j] = (a[i][j] - mul_mod(f, a[rank][j], p)).rem_euclid(p);
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Fraction-free elimination: rank over Q and, for square matrices, the
/// determinant.
pub fn bareiss(m: &[Vec<i64>]) -> Result<(usize, i128)> {
    let mut a: Vec<Vec<i128>> = m.iter().map(|r| r.iter().map(|&x| x as i128).collect()).collect();
    let nrows = a.len();
    let ncols = a.first().map_or(0, Vec::len);
    let (mut rank, mut prev, mut sign) = (0, 1i128, 1i128);
    let ovf = || Error::Overflow("Bareiss elimination".into());
    for col in 0..ncols {
        let Some(piv) = (rank..nrows).find(|&i| a[i][col] != 0) else { continue };
        if piv != rank {
            a.swap(rank, piv);
            sign = -sign;
        }
        for i in rank + 1..nrows {
            for j in col + 1..ncols {
                let x = a[i][j].checked_mul(a[rank][col]).ok_or_else(ovf)?;
                let y = a[i][col].checked_mul(a[rank][j]).ok_or_else(ovf)?;
                a[i][j] = x.checked_sub(y).ok_or_else(ovf)? / prev;
            }
            a[i][col] = 0;
        }
        prev = a[rank][col];
        rank += 1;
    }
    let det = if nrows == ncols && rank == nrows { sign * if nrows == 0 { 1 } else { prev } } else { 0 };
    Ok((rank, det))
}

/// Exact rank over Q. Falls back to arbitrary precision when the i128
/// elimination overflows.
pub fn rank_over_q(m: &[Vec<i64>]) -> Result<usize> {
    match bareiss(m) {
        Ok((rank, _)) => Ok(rank),
        Err(Error::Overflow(_)) => Ok(bareiss_big(m).0),
        Err(e) => Err(e),
    }
}

pub fn bareiss_big(m: &[Vec<i64>]) -> (usize, BigInt) {
    let mut a: Vec<Vec<BigInt>> = m.iter().map(|r| r.iter().map(|&x| BigInt::from(x)).collect()).collect();
    let nrows = a.len();
    let ncols = a.first().map_or(0, Vec::len);
    let (mut rank, mut prev, mut neg) = (0, BigInt::one(), false);
    for col in 0..ncols {
        let Some(piv) = (rank..nrows).find(|&i| !a[i][col].is_zero()) else { continue };
        if piv != rank {
            a.swap(rank, piv);
            neg = !neg;
        }
        for i in rank + 1..nrows {
            for j in col + 1..ncols {
                let x = &a[i][j] * &a[rank][col] - &a[i][col] * &a[rank][j];
                a[i][j] = x / &prev;
            }
            a[i][col] = BigInt::zero();
        }
        prev = a[rank][col].clone();
        rank += 1;
    }
    let det = if nrows == ncols && rank == nrows { if neg { -prev } else { prev } } else { BigInt::zero() };
    (rank, det)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sys(n: &str) -> CoxeterSystem {
        CoxeterSystem::named(n).unwrap()
    }

    #[test]
    fn b2_leaves_shapes() {
        let b = sys("B2");
        let ll = LightLeaves::new(&b, RexPolicy::Lex);
        let l1 = ll.build(&b.decorate(&[0, 1, 0], &[1, 0, 0]), None).unwrap();
        assert_eq!(
            l1.layers,
            vec![GeneratorTag::new(1, Generator::DotOut(1)), GeneratorTag::new(0, Generator::Merge(0))]
        );
        assert_eq!(l1.degree, 0);
        let l2 = ll.build(&b.decorate(&[0, 1, 0], &[0, 0, 1]), None).unwrap();
        assert_eq!(l2.degree, 2);
        assert_eq!(l2.cod, vec![0]);
        let id = ll.build(&b.decorate(&[0, 1, 0], &[1, 1, 1]), None).unwrap();
        assert!(id.layers.is_empty());
        assert_eq!(evaluate(&b, &id).unwrap(), StdMatrix::identity(&[0, 1, 0]));
        for e in b.all_subexpressions(&[0, 1, 0, 1, 0]) {
            let leaf = ll.build(&e, None).unwrap();
            assert_eq!(evaluate(&b, &leaf).unwrap().degree(), e.defect);
        }
    }

    #[test]
    fn b2_pairing() {
        let b = sys("B2");
        let ll = LightLeaves::new(&b, RexPolicy::Lex);
        let w = [0, 1, 0];
        let l1 = ll.build(&b.decorate(&w, &[1, 0, 0]), None).unwrap();
        let l2 = ll.build(&b.decorate(&w, &[0, 0, 1]), None).unwrap();
        // Full matrix route for the top-top entry.
        let m1 = evaluate(&b, &l1).unwrap();
        let f1 = evaluate(&b, &l1.flip()).unwrap();
        let c = crate::localize::compose(&m1, &f1).unwrap();
        assert_eq!(c.get(1, 1), RatFn::constant(-2));
        assert_eq!(ll.pairing_exact(&l1, &l1).unwrap(), Poly::constant(-2));
        let (a_s, a_t) = (Poly::linear(b.root(0)), Poly::linear(b.root(1)));
        assert_eq!(ll.pairing_exact(&l2, &l2).unwrap(), &a_s * &a_t);
        assert_eq!(ll.pairing_exact(&l1, &l2).unwrap(), a_t);

        let fam = ll
            .gram(&w, &b.gen(0), &GramOptions { primes: vec![2, 3], exact: true, verify_nil_hecke: true, ..Default::default() })
            .unwrap();
        assert_eq!(fam.block(0).unwrap().matrix, vec![vec![-2]]);
        assert_eq!(fam.rank_q, LaurentPoly::one());
        assert_eq!(fam.ranks_p[&2], LaurentPoly::zero());
        assert_eq!(fam.ranks_p[&3], LaurentPoly::one());
        assert_eq!(fam.nil_hecke_mismatches, 0);
        assert_eq!(fam.nil_hecke_checked, 4);
    }

    #[test]
    fn g2_block() {
        let g = sys("G2");
        let ll = LightLeaves::new(&g, RexPolicy::Lex);
        let w = [0, 1, 0, 1];
        let x = g.from_word(&[0, 1]);
        for exact in [false, true] {
            let fam = ll
                .gram(&w, &x, &GramOptions { primes: vec![2, 3], exact, verify_nil_hecke: true, ..Default::default() })
                .unwrap();
            let blk = fam.block(0).unwrap();
            let (rank, det) = bareiss(&blk.matrix).unwrap();
            // Diagonal entries are d_s(alpha_t) = -3 and d_t(alpha_s) = -1.
            assert_eq!(blk.matrix, vec![vec![-3, 1], vec![1, -1]]);
            assert_eq!((rank, det), (2, 2));
            assert_eq!(fam.ranks_p[&2].coeff(0), 1);
            assert_eq!(fam.ranks_p[&3].coeff(0), 2);
            assert_eq!(fam.nil_hecke_mismatches, 0);
        }
    }

    #[test]
    fn d4_blocks() {
        let d = sys("D4");
        let ll = LightLeaves::new(&d, RexPolicy::Lex);
        let w = d.parse_word("suvtsuv").unwrap();
        let x = d.parse_elem("suv").unwrap();
        let fam = ll
            .gram(&w, &x, &GramOptions { primes: vec![2], verify_nil_hecke: true, ..Default::default() })
            .unwrap();
        let b0 = fam.block(0).unwrap();
        assert_eq!(b0.matrix, vec![vec![0, -1, -1], vec![-1, 0, -1], vec![-1, -1, 0]]);
        assert_eq!(bareiss(&b0.matrix).unwrap().1.abs(), 2);
        assert_eq!(fam.block(2).unwrap().matrix, vec![vec![-1, -1, -1]]);
        assert_eq!(fam.block(-2).unwrap().matrix, vec![vec![-1], vec![-1], vec![-1]]);
        assert_eq!(fam.rank_q, LaurentPoly::from_terms([(-2, 1), (0, 3), (2, 1)]));
        assert_eq!(fam.ranks_p[&2], LaurentPoly::from_terms([(-2, 1), (0, 2), (2, 1)]));
        assert_eq!(fam.nil_hecke_mismatches, 0);
        assert!(fam.nil_hecke_checked > 0);
    }

    #[test]
    fn policy_and_target_word_independence() {
        for (name, w) in [("B2", "ststs"), ("G2", "tststs"), ("D4", "suvtsuv")] {
            let s = sys(name);
            let word = s.parse_word(w).unwrap();
            for (x, _) in s.subexpressions_by_endpoint(&word) {
                let a = LightLeaves::new(&s, RexPolicy::Lex)
                    .gram(&word, &x, &GramOptions { primes: vec![2, 3], ..Default::default() })
                    .unwrap();
                let alt = s.reduced_words(&x).pop();
                let b = LightLeaves::new(&s, RexPolicy::RevLex)
                    .gram(&word, &x, &GramOptions { primes: vec![2, 3], target_word: alt, ..Default::default() })
                    .unwrap();
                assert_eq!(a.rank_q, b.rank_q, "{name} {x:?}");
                assert_eq!(a.ranks_p, b.ranks_p, "{name} {x:?}");
            }
        }
    }

    #[test]
    fn rank_helpers() {
        assert_eq!(bareiss(&[vec![-3, 1], vec![1, 1]]).unwrap(), (2, -4));
        assert_eq!(rank_mod_p(&[vec![-3, 1], vec![1, 1]], 2), 1);
        assert_eq!(bareiss(&[vec![0, 0], vec![0, 0]]).unwrap(), (0, 0));
        assert_eq!(bareiss(&[vec![1, 2, 3], vec![2, 4, 6]]).unwrap().0, 1);
        assert_eq!(bareiss(&[vec![0, 1], vec![1, 0]]).unwrap(), (2, -1));
        // Entries up to 2^48 make the i128 elimination overflow.
        let big: Vec<Vec<i64>> = (0..12).map(|i| (0..12).map(|j| 1i64 << (4 * ((i * j) % 13))).collect()).collect();
        let small: Vec<Vec<i64>> = vec![vec![2, 1, 0], vec![1, 2, 1], vec![0, 1, 2]];
        assert_eq!(bareiss_big(&small), (3, BigInt::from(4)));
        assert!(bareiss(&big).is_err());
        let r = rank_over_q(&big).unwrap();
        assert_eq!(r, bareiss_big(&big).0);
        assert!(r <= 12 && r >= rank_mod_p(&big, 1_000_000_007));
    }
}
