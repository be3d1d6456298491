//! p-canonical bases from graded ranks of local intersection forms.

use std::collections::BTreeMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::coxeter::{CoxeterSystem, Gen, RealizationConfig, Side, WElem};
use crate::error::{Error, Result};
use crate::hecke::{Hecke, HeckeElt, LaurentPoly};
use crate::lightleaves::{GramOptions, GramStore, LightLeaves, RexPolicy, ENGINE_VERSION};

/// Which reduced word of each element the Bott-Samelson object uses.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum WordChoice {
    #[default]
    ShortLex,
    /// The lexicographically largest reduced word.
    Alternative,
}

#[derive(Clone)]
pub struct PCanOptions {
    pub maxlen: usize,
    pub word_choice: WordChoice,
    pub rex_policy: RexPolicy,
    /// Cross-check every D1-free block entry against the nil Hecke formula.
    pub verify_nil_hecke: bool,
    pub budget: usize,
    pub store: Option<Arc<dyn GramStore>>,
}

impl Default for PCanOptions {
    fn default() -> Self {
        Self {
            maxlen: 4,
            word_choice: WordChoice::ShortLex,
            rex_policy: RexPolicy::Lex,
            verify_nil_hecke: false,
            budget: 1 << 20,
            store: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PCanEntry {
    /// Reduced word used for the Bott-Samelson object.
    pub word: Vec<Gen>,
    /// Coefficients `p m_{y,x}` in the KL basis.
    pub kl: HeckeElt,
    /// Coefficients `p h_{y,x}` in the standard basis.
    pub std: HeckeElt,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub engine_version: u32,
    pub word_choice: WordChoice,
    pub rex_policy: RexPolicy,
    pub gram_families: usize,
    pub nil_hecke_checked: usize,
    pub nil_hecke_mismatches: usize,
    /// Every element of the group has length at most `maxlen`.
    pub complete_group: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PCanTable {
    pub system: RealizationConfig,
    /// 0 for the Kazhdan-Lusztig basis.
    pub prime: u64,
    pub maxlen: usize,
    pub entries: BTreeMap<WElem, PCanEntry>,
    pub provenance: Provenance,
}

impl PCanTable {
    pub fn get(&self, x: &WElem) -> Option<&PCanEntry> {
        self.entries.get(x)
    }

    /// Elements whose p-canonical basis element differs from the KL one.
    pub fn nontrivial(&self) -> impl Iterator<Item = (&WElem, &PCanEntry)> {
        self.entries.iter().filter(|(x, e)| e.kl.len() != 1 || e.kl.coeff(x) != LaurentPoly::one())
    }

    pub fn to_json(&self, sys: &CoxeterSystem) -> serde_json::Value {
        let expansion = |h: &HeckeElt| {
            let m: serde_json::Map<String, serde_json::Value> = h
                .iter()
                .map(|(y, c)| (sys.format_word(y.word()), serde_json::to_value(c).unwrap()))
                .collect();
            serde_json::Value::Object(m)
        };
        let entries: Vec<_> = self
            .entries
            .iter()
            .map(|(x, e)| {
                json!({
                    "element": sys.format_word(x.word()),
                    "word": sys.format_word(&e.word),
                    "kl": expansion(&e.kl),
                    "std": expansion(&e.std),
                })
            })
            .collect();
        json!({
            "system": self.system,
            "prime": self.prime,
            "max_length": self.maxlen,
            "entries": entries,
            "provenance": self.provenance,
        })
    }

    /// One line per element, `p b_x = kl_x + ...`.
    pub fn to_text(&self, hecke: &Hecke) -> String {
        let sys = hecke.system();
        let mut out = String::new();
        for (x, e) in &self.entries {
            out.push_str(&format!(
                "{}b_{{{}}} = {}\n",
                if self.prime == 0 { String::new() } else { format!("{} ", self.prime) },
                sys.format_word(x.word()),
                hecke.format(&e.kl, "kl")
            ));
        }
        out
    }
}

fn choose_word(sys: &CoxeterSystem, x: &WElem, choice: WordChoice) -> Vec<Gen> {
    match choice {
        WordChoice::ShortLex => x.word().to_vec(),
        WordChoice::Alternative => sys.reduced_words(x).pop().unwrap_or_default(),
    }
}

/// Graded multiplicities `n_{x,w}` of the Bott-Samelson object of `word`,
/// one map per requested prime (0 meaning characteristic zero).
fn multiplicities(
    hecke: &Hecke,
    ll: &LightLeaves,
    w: &WElem,
    word: &[Gen],
    primes: &[u64],
    opts: &PCanOptions,
) -> Result<(HeckeElt, Vec<BTreeMap<WElem, LaurentPoly>>, usize, usize, usize)> {
    let sys = hecke.system();
    let bs = hecke.to_kl(&hecke.bott_samelson(word));
    let mut by_end = sys.subexpressions_by_endpoint(word);
    let nonzero: Vec<u64> = primes.iter().copied().filter(|&p| p != 0).collect();
    let mut out = vec![BTreeMap::new(); primes.len()];
    let (mut fams, mut checked, mut mismatched) = (0, 0, 0);
    for (x, c) in bs.iter() {
        if x == w {
            continue;
        }
        let needs_ranks = !nonzero.is_empty();
        let mut ranks = BTreeMap::new();
        if needs_ranks {
            let subs = by_end.remove(x).unwrap_or_default();
            let gopts = GramOptions { primes: nonzero.clone(), verify_nil_hecke: opts.verify_nil_hecke, ..Default::default() };
            let fam = ll.gram_from(word, x, subs, &gopts, opts.store.as_deref())?;
            fams += 1;
            checked += fam.nil_hecke_checked;
            mismatched += fam.nil_hecke_mismatches;
            if fam.rank_q != *c {
                return Err(Error::Invalid(format!(
                    "rank over Q of the form of {} at {} is {} but the KL multiplicity is {}",
                    sys.format_word(word),
                    sys.format_word(x.word()),
                    fam.rank_q,
                    c
                )));
            }
            ranks = fam.ranks_p;
        }
        for (i, &p) in primes.iter().enumerate() {
            let n = if p == 0 { c.clone() } else { ranks[&p].clone() };
            if !n.is_zero() {
                out[i].insert(x.clone(), n);
            }
        }
    }
    Ok((bs, out, fams, checked, mismatched))
}

/// p-canonical basis elements up to `opts.maxlen`, one table per prime.
pub fn compute_pcan_multi(hecke: &Hecke, primes: &[u64], opts: &PCanOptions) -> Result<Vec<PCanTable>> {
    let sys = hecke.system().clone();
    for &p in primes {
        if p != 0 {
            if !is_prime(p) {
                return Err(Error::Invalid(format!("{p} is not a prime")));
            }
            sys.check_surjective(p)?;
        }
    }
    let strata = sys.enumerate_elements(opts.maxlen + 1, opts.budget)?;
    let complete_group = strata.get(opts.maxlen + 1).is_none_or(Vec::is_empty);
    let ll = LightLeaves::new(&sys, opts.rex_policy);
    let mut tables: Vec<PCanTable> = primes
        .iter()
        .map(|&p| PCanTable {
            system: sys.to_config(),
            prime: p,
            maxlen: opts.maxlen,
            entries: BTreeMap::new(),
            provenance: Provenance {
                engine_version: ENGINE_VERSION,
                word_choice: opts.word_choice,
                rex_policy: opts.rex_policy,
                complete_group,
                ..Default::default()
            },
        })
        .collect();
    for stratum in strata.iter().take(opts.maxlen + 1) {
        let results: Vec<_> = stratum
            .par_iter()
            .map(|w| {
                let word = choose_word(&sys, w, opts.word_choice);
                multiplicities(hecke, &ll, w, &word, primes, opts).map(|r| (w, word, r))
            })
            .collect::<Result<Vec<_>>>()?;
        for (w, word, (bs, mults, fams, checked, mismatched)) in results {
            for (table, n) in tables.iter_mut().zip(mults) {
                let mut kl = bs.clone();
                for (x, c) in &n {
                    let lower = &table.entries[x].kl;
                    kl.add_scaled(lower, &c.scale(-1));
                }
                check_entry(&sys, w, &kl)?;
                let std = hecke.from_kl(&kl);
                table.entries.insert(w.clone(), PCanEntry { word: word.clone(), kl, std });
                table.provenance.gram_families += fams;
                table.provenance.nil_hecke_checked += checked;
                table.provenance.nil_hecke_mismatches += mismatched;
            }
        }
    }
    Ok(tables)
}

pub fn compute_pcan(hecke: &Hecke, p: u64, opts: &PCanOptions) -> Result<PCanTable> {
    Ok(compute_pcan_multi(hecke, &[p], opts)?.pop().unwrap())
}

fn check_entry(sys: &CoxeterSystem, w: &WElem, kl: &HeckeElt) -> Result<()> {
    if kl.coeff(w) != LaurentPoly::one() {
        return Err(Error::Invalid(format!("leading coefficient of {} is not 1", sys.format_word(w.word()))));
    }
    for (y, c) in kl.iter() {
        if !c.is_nonnegative() {
            return Err(Error::NegativeCoefficient(format!(
                "coefficient {c} of kl_{} in p b_{}",
                sys.format_word(y.word()),
                sys.format_word(w.word())
            )));
        }
    }
    Ok(())
}

pub fn is_prime(p: u64) -> bool {
    p >= 2 && (2..).take_while(|d| d * d <= p).all(|d| p % d != 0)
}

// ---- property suite ------------------------------------------------------------

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct PropertyReport {
    /// `(property, number of elements checked, violations)`.
    pub checks: Vec<(String, usize, Vec<String>)>,
}

impl PropertyReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.2.is_empty())
    }
    pub fn violations(&self) -> Vec<String> {
        self.checks.iter().flat_map(|c| c.2.iter().map(move |v| format!("{}: {v}", c.0))).collect()
    }
}

/// Writes `a` (KL coordinates) in the p-canonical basis of `table`.
pub fn to_pcan(table: &PCanTable, a: &HeckeElt) -> Result<HeckeElt> {
    let mut rest = a.clone();
    let mut out = HeckeElt::zero();
    loop {
        let Some((z, c)) = rest.iter().next_back().map(|(z, c)| (z.clone(), c.clone())) else { break };
        let e = table
            .entries
            .get(&z)
            .ok_or_else(|| Error::Invalid("element outside the table".into()))?;
        rest.add_scaled(&e.kl, &c.scale(-1));
        out.add_term(z, &c);
    }
    Ok(out)
}

pub fn verify_properties(hecke: &Hecke, table: &PCanTable) -> Result<PropertyReport> {
    let sys = hecke.system();
    let name = |x: &WElem| sys.format_word(x.word());
    let mut rep = PropertyReport::default();
    let n = table.entries.len();
    let mut push = |label: &str, count: usize, v: Vec<String>| rep.checks.push((label.to_string(), count, v));

    let mut v1 = Vec::new();
    let mut v2 = Vec::new();
    let mut v3 = Vec::new();
    let mut v4 = Vec::new();
    let mut v5 = Vec::new();
    let mut vsupp = Vec::new();
    for (x, e) in &table.entries {
        if hecke.bar(&e.std) != e.std {
            v1.push(name(x));
        }
        for (y, c) in e.std.iter() {
            if !c.is_nonnegative() {
                v2.push(format!("h_{{{},{}}} = {c}", name(y), name(x)));
            }
        }
        for (y, c) in e.kl.iter() {
            if !c.is_nonnegative() || !c.is_self_dual() {
                v3.push(format!("m_{{{},{}}} = {c}", name(y), name(x)));
            }
            if !sys.bruhat_leq(y, x) {
                vsupp.push(format!("{} not below {}", name(y), name(x)));
            }
            let (yi, xi) = (sys.inverse(y), sys.inverse(x));
            if let Some(ei) = table.entries.get(&xi) {
                if ei.kl.coeff(&yi) != *c {
                    v4.push(format!("m_{{{},{}}}", name(y), name(x)));
                }
            }
            for side in [Side::Left, Side::Right] {
                let dx = sys.descent_set(x, side);
                let dy = sys.descent_set(y, side);
                if !dx.iter().all(|s| dy.contains(s)) {
                    v5.push(format!("m_{{{},{}}} with descents {side:?}", name(y), name(x)));
                }
            }
        }
        if e.kl.coeff(x) != LaurentPoly::one() {
            vsupp.push(format!("{} missing from its own support", name(x)));
        }
    }
    push("(1) self-dual", n, v1);
    push("(2) standard coefficients non-negative", n, v2);
    push("(3) KL coefficients self-dual and non-negative", n, v3);
    push("(4) inversion symmetry", n, v4);
    push("(5) descent containment", n, v5);
    push("support between x and the Bruhat interval below it", n, vsupp);

    // (6) and the multiplication lemma on products b_s p b_x.
    let mut v6 = Vec::new();
    let mut vlem = Vec::new();
    let mut count = 0;
    for (x, e) in &table.entries {
        if x.len() >= table.maxlen {
            continue;
        }
        for s in sys.gens() {
            count += 1;
            let prod = hecke.to_kl(&hecke.lmul_kl_s(s, &e.std));
            let mu = to_pcan(table, &prod)?;
            for (z, c) in mu.iter() {
                if !c.is_nonnegative() || !c.is_self_dual() {
                    v6.push(format!("mu^{}_{{{},{}}} = {c}", name(z), sys.labels()[s as usize], name(x)));
                }
            }
            if sys.descent(x, s, Side::Left) && mu != HeckeElt::term(x.clone(), LaurentPoly::quantum_two()) {
                vlem.push(format!("b_{} p b_{}", sys.labels()[s as usize], name(x)));
            }
        }
    }
    push("(6) structure constants self-dual and non-negative", count, v6);
    push("multiplication lemma", count, vlem);

    // (7), and characteristic zero.
    if table.prime == 0 || (table.prime >= 7 && table.provenance.complete_group) {
        let mut v7 = Vec::new();
        for (x, e) in &table.entries {
            if e.kl != HeckeElt::basis(x.clone()) {
                v7.push(name(x));
            }
        }
        push("(7) agreement with the KL basis", n, v7);
    }
    Ok(rep)
}

// ---- affine A1 tilting characters --------------------------------------------------

/// Digits `n_0, .., n_l` with `p-1 <= n_i <= 2p-2` for `i < l` and
/// `0 <= n_l <= p-1`.
pub fn tilting_digits(n: u64, p: u64) -> Vec<u64> {
    fn rec(n: u64, l: usize, p: u64) -> Option<Vec<u64>> {
        if l == 0 {
            return (n < p).then(|| vec![n]);
        }
        let d = (p - 1) + (n + 1) % p;
        if d > n {
            return None;
        }
        let mut rest = rec((n - d) / p, l - 1, p)?;
        rest.insert(0, d);
        Some(rest)
    }
    (0..).find_map(|l| rec(n, l, p)).unwrap()
}

/// The `m` with `Delta(m)` in a Delta-flag of `T(n)`, ascending.
pub fn tilting_weights(n: u64, p: u64) -> Vec<u64> {
    let digits = tilting_digits(n, p);
    let l = digits.len() - 1;
    let mut out = vec![0u64];
    let mut scale = 1u64;
    for (j, &d) in digits.iter().enumerate() {
        let choices: Vec<u64> = if j < l && d != p - 1 { vec![d, 2 * p - 2 - d] } else { vec![d] };
        out = out.iter().flat_map(|&m| choices.iter().map(move |&c| m + c * scale)).collect();
        scale *= p;
    }
    out.sort_unstable();
    out
}

/// `p b` of the alternating word of length `lambda + 1` starting with
/// `first`, from the tilting character of `T(lambda)`.
pub fn a1_tilting_pcan(sys: &CoxeterSystem, lambda: u64, p: u64, first: Gen) -> Result<HeckeElt> {
    if sys.num_gens() != 2 || sys.m(0, 1).is_some() {
        return Err(Error::NotApplicable("the tilting rule needs the infinite dihedral group".into()));
    }
    let other = 1 - first;
    let mut out = HeckeElt::zero();
    for m in tilting_weights(lambda, p) {
        let word = crate::localize::alternating(first, other, m as usize + 1);
        out.add_term(sys.from_word(&word), &LaurentPoly::one());
    }
    Ok(out)
}
