//! Coxeter systems with integral realizations, group elements in ShortLex
//! normal form, Bruhat order and decorated subexpressions.

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of a simple reflection.
pub type Gen = u8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

/// Realization description as read from a config file.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemConfig {
    Named { named: String },
    Explicit(RealizationConfig),
}

/// `coxeter_matrix` uses 0 for infinity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RealizationConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub generators: Vec<String>,
    pub coxeter_matrix: Vec<Vec<u32>>,
    pub rank: usize,
    pub coroots: Vec<Vec<i64>>,
    pub roots: Vec<Vec<i64>>,
}

pub fn build_system(config: &SystemConfig) -> Result<CoxeterSystem> {
    match config {
        SystemConfig::Named { named } => CoxeterSystem::named(named),
        SystemConfig::Explicit(c) => CoxeterSystem::from_realization(c),
    }
}

pub struct CoxeterSystem {
    name: String,
    labels: Vec<String>,
    /// `None` is infinity.
    m: Vec<Vec<Option<u32>>>,
    rank: usize,
    coroots: Vec<Vec<i64>>,
    roots: Vec<Vec<i64>>,
    /// `cartan[s][t] = <alpha_t, alpha_s^vee>`.
    cartan: Vec<Vec<i64>>,
    /// Primes p for which some root or coroot is divisible by p.
    bad_primes: Vec<u64>,
}

impl fmt::Debug for CoxeterSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoxeterSystem")
            .field("name", &self.name)
            .field("labels", &self.labels)
            .field("rank", &self.rank)
            .field("coroots", &self.coroots)
            .field("roots", &self.roots)
            .finish()
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn vec_gcd(v: &[i64]) -> i64 {
    v.iter().fold(0, |g, &x| gcd(g, x))
}

fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Rank over Q of a list of integer vectors, by fraction-free elimination.
pub(crate) fn rational_rank(rows: &[Vec<i64>]) -> usize {
    let mut m: Vec<Vec<i128>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x as i128).collect())
        .collect();
    let ncols = m.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..ncols {
        let Some(p) = (rank..m.len()).find(|&i| m[i][c] != 0) else {
            continue;
        };
        m.swap(rank, p);
        for i in rank + 1..m.len() {
            if m[i][c] != 0 {
                let (a, b) = (m[rank][c], m[i][c]);
                for j in 0..ncols {
                    m[i][j] = m[i][j] * a - m[rank][j] * b;
                }
                let g = m[i].iter().fold(0i128, |g, &x| {
                    let (mut a, mut b) = (g.abs(), x.abs());
                    while b != 0 {
                        let t = a % b;
                        a = b;
                        b = t;
                    }
                    a
                });
                if g > 1 {
                    m[i].iter_mut().for_each(|x| *x /= g);
                }
            }
        }
        rank += 1;
    }
    rank
}

fn chain_cartan(n: usize) -> Vec<Vec<i64>> {
    let mut c = vec![vec![0; n]; n];
    for i in 0..n {
        c[i][i] = 2;
        if i + 1 < n {
            c[i][i + 1] = -1;
            c[i + 1][i] = -1;
        }
    }
    c
}

fn m_from_cartan(c: &[Vec<i64>]) -> Vec<Vec<u32>> {
    let n = c.len();
    let mut m = vec![vec![1; n]; n];
    for s in 0..n {
        for t in 0..n {
            if s != t {
                m[s][t] = match c[s][t] * c[t][s] {
                    0 => 2,
                    1 => 3,
                    2 => 4,
                    3 => 6,
                    _ => 0,
                };
            }
        }
    }
    m
}

fn letters(n: usize) -> Vec<String> {
    ["s", "t", "u", "v"][..n].iter().map(|s| s.to_string()).collect()
}

fn digits(n: usize) -> Vec<String> {
    (1..=n).map(|i| i.to_string()).collect()
}

/// Realization with coroots the standard basis; an extra coordinate is
/// appended when some root is not primitive or the roots are dependent.
fn standard_realization(name: &str, labels: Vec<String>, cartan: Vec<Vec<i64>>) -> RealizationConfig {
    let n = cartan.len();
    let mut roots: Vec<Vec<i64>> = (0..n).map(|t| (0..n).map(|s| cartan[s][t]).collect()).collect();
    let mut coroots: Vec<Vec<i64>> = (0..n)
        .map(|s| (0..n).map(|j| i64::from(j == s)).collect())
        .collect();
    let mut rank = n;
    let bad: Vec<bool> = roots.iter().map(|r| vec_gcd(r) != 1).collect();
    if bad.iter().any(|&b| b) || rational_rank(&roots) < n {
        rank += 1;
        for (t, r) in roots.iter_mut().enumerate() {
            r.push(i64::from(bad[t]));
        }
        if rational_rank(&roots) < n {
            for r in roots.iter_mut() {
                *r.last_mut().unwrap() = 1;
            }
        }
        for c in coroots.iter_mut() {
            c.push(0);
        }
    }
    RealizationConfig {
        name: Some(name.to_string()),
        generators: labels,
        coxeter_matrix: m_from_cartan(&cartan),
        rank,
        coroots,
        roots,
    }
}

/// Normalizes names such as `A1~`, `At1`, `Ã1` to a canonical spelling.
fn normalize_name(name: &str) -> String {
    let n = name.trim().replace('Ã', "A~");
    let upper = n.to_uppercase();
    if upper == "A~1" || upper == "A1~" || upper == "AT1" || upper == "AFFINEA1" {
        return "A1~".into();
    }
    if upper == "A1XA1" || upper == "A1×A1" {
        return "A1xA1".into();
    }
    let upper = upper.replace('_', "");
    upper
}

impl CoxeterSystem {
    /// Built-in types: `A_n`, `A1xA1`, `B_n`, `C_n`, `D_n`, `G2`, `A1~`.
    pub fn named(name: &str) -> Result<Self> {
        let key = normalize_name(name);
        let unknown = || Error::UnknownType(name.to_string());
        let config = if key == "A1" {
            RealizationConfig {
                name: Some("A1".into()),
                generators: letters(1),
                coxeter_matrix: vec![vec![1]],
                rank: 1,
                coroots: vec![vec![1]],
                roots: vec![vec![2]],
            }
        } else if key == "A1~" {
            RealizationConfig {
                name: Some("A1~".into()),
                generators: letters(2),
                coxeter_matrix: vec![vec![1, 0], vec![0, 1]],
                rank: 3,
                coroots: vec![vec![1, 0, 0], vec![0, 1, 0]],
                roots: vec![vec![2, -2, 1], vec![-2, 2, 1]],
            }
        } else if key == "A1xA1" {
            standard_realization(&key, letters(2), vec![vec![2, 0], vec![0, 2]])
        } else if key == "G2" {
            standard_realization(&key, letters(2), vec![vec![2, -3], vec![-1, 2]])
        } else {
            let (kind, n) = key.split_at(1);
            let n: usize = n.parse().map_err(|_| unknown())?;
            let labels = |n: usize| if n <= 2 { letters(n) } else { digits(n) };
            match kind {
                "A" if n >= 2 => standard_realization(&key, labels(n), chain_cartan(n)),
                "B" | "C" if n >= 2 => {
                    let mut c = chain_cartan(n);
                    // B: <alpha_2, alpha_1^vee> = -2; C is the transpose.
                    let (i, j) = if kind == "B" { (0, 1) } else { (1, 0) };
                    c[i][j] = -2;
                    standard_realization(&key, labels(n), c)
                }
                "D" if n >= 4 => {
                    let mut c = vec![vec![0; n]; n];
                    if n == 4 {
                        // s, t, u, v with t central.
                        for i in 0..4 {
                            c[i][i] = 2;
                            if i != 1 {
                                c[i][1] = -1;
                                c[1][i] = -1;
                            }
                        }
                        standard_realization(&key, letters(4), c)
                    } else {
                        c = chain_cartan(n - 1);
                        for row in c.iter_mut() {
                            row.push(0);
                        }
                        c.push(vec![0; n]);
                        c[n - 1][n - 1] = 2;
                        c[n - 1][n - 3] = -1;
                        c[n - 3][n - 1] = -1;
                        standard_realization(&key, digits(n), c)
                    }
                }
                _ => return Err(unknown()),
            }
        };
        Self::from_realization(&config)
    }

    pub fn from_realization(c: &RealizationConfig) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidRealization(msg));
        let n = c.generators.len();
        if n == 0 || n > 32 {
            return bad(format!("need between 1 and 32 generators, got {n}"));
        }
        {
            let mut seen = HashSet::new();
            for l in &c.generators {
                if l.is_empty() || l == "e" || l.contains('.') || !seen.insert(l) {
                    return bad(format!("bad or duplicate generator label `{l}`"));
                }
            }
        }
        if c.rank == 0 || c.rank > 8 {
            return bad(format!("realization rank must be in 1..=8, got {}", c.rank));
        }
        if c.coxeter_matrix.len() != n || c.coxeter_matrix.iter().any(|r| r.len() != n) {
            return bad("Coxeter matrix has wrong shape".into());
        }
        if c.coroots.len() != n || c.roots.len() != n {
            return bad("need one root and one coroot per generator".into());
        }
        if c.coroots.iter().chain(&c.roots).any(|v| v.len() != c.rank) {
            return bad("root or coroot of wrong length".into());
        }
        let mut m = vec![vec![None; n]; n];
        for s in 0..n {
            for t in 0..n {
                let e = c.coxeter_matrix[s][t];
                if e != c.coxeter_matrix[t][s] {
                    return bad("Coxeter matrix is not symmetric".into());
                }
                if s == t {
                    if e != 1 {
                        return bad("diagonal of the Coxeter matrix must be 1".into());
                    }
                    m[s][t] = Some(1);
                } else {
                    if ![0, 2, 3, 4, 6].contains(&e) {
                        return bad(format!("m = {e} is not crystallographic"));
                    }
                    m[s][t] = (e != 0).then_some(e);
                }
            }
        }
        let pair = |a: &[i64], b: &[i64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<i64>();
        let cartan: Vec<Vec<i64>> = (0..n)
            .map(|s| (0..n).map(|t| pair(&c.roots[t], &c.coroots[s])).collect())
            .collect();
        for s in 0..n {
            if cartan[s][s] != 2 {
                return bad(format!("alpha_s(alpha_s^vee) = {} for {}", cartan[s][s], c.generators[s]));
            }
            for t in 0..n {
                if s == t {
                    continue;
                }
                let (a, b) = (cartan[s][t], cartan[t][s]);
                if a > 0 || b > 0 || (a == 0) != (b == 0) {
                    return bad(format!(
                        "Cartan entries {a}, {b} for {}, {} are not a generalized Cartan pair",
                        c.generators[s], c.generators[t]
                    ));
                }
                let ok = match m[s][t] {
                    Some(2) => a * b == 0,
                    Some(3) => a * b == 1,
                    Some(4) => a * b == 2,
                    Some(6) => a * b == 3,
                    None => a * b >= 4,
                    _ => false,
                };
                if !ok {
                    return bad(format!(
                        "Cartan product {} inconsistent with m = {:?} for {}, {}",
                        a * b,
                        m[s][t],
                        c.generators[s],
                        c.generators[t]
                    ));
                }
            }
        }
        if rational_rank(&c.roots) < n {
            return bad("roots are linearly dependent".into());
        }
        let mut bad_primes: Vec<u64> = c
            .roots
            .iter()
            .chain(&c.coroots)
            .flat_map(|v| prime_factors(vec_gcd(v).unsigned_abs()))
            .collect();
        bad_primes.sort_unstable();
        bad_primes.dedup();
        Ok(CoxeterSystem {
            name: c.name.clone().unwrap_or_else(|| "custom".into()),
            labels: c.generators.clone(),
            m,
            rank: c.rank,
            coroots: c.coroots.clone(),
            roots: c.roots.clone(),
            cartan,
            bad_primes,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }
    pub fn labels(&self) -> &[String] {
        &self.labels
    }
    pub fn num_gens(&self) -> usize {
        self.labels.len()
    }
    pub fn gens(&self) -> impl Iterator<Item = Gen> {
        0..self.labels.len() as Gen
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn root(&self, s: Gen) -> &[i64] {
        &self.roots[s as usize]
    }
    pub fn coroot(&self, s: Gen) -> &[i64] {
        &self.coroots[s as usize]
    }
    pub fn cartan(&self, s: Gen, t: Gen) -> i64 {
        self.cartan[s as usize][t as usize]
    }
    pub fn cartan_matrix(&self) -> &[Vec<i64>] {
        &self.cartan
    }
    /// Order of `st`; `None` for infinity.
    pub fn m(&self, s: Gen, t: Gen) -> Option<u32> {
        self.m[s as usize][t as usize]
    }

    /// Demazure surjectivity in characteristic `p` (0 for the rationals).
    pub fn surjective_at(&self, p: u64) -> bool {
        p == 0 || !self.bad_primes.contains(&p)
    }

    pub fn check_surjective(&self, p: u64) -> Result<()> {
        if self.surjective_at(p) {
            Ok(())
        } else {
            Err(Error::NotSurjective(p))
        }
    }

    pub fn to_config(&self) -> RealizationConfig {
        RealizationConfig {
            name: Some(self.name.clone()),
            generators: self.labels.clone(),
            coxeter_matrix: self.m.iter().map(|r| r.iter().map(|e| e.unwrap_or(0)).collect()).collect(),
            rank: self.rank,
            coroots: self.coroots.clone(),
            roots: self.roots.clone(),
        }
    }

    pub fn gen_by_label(&self, label: &str) -> Option<Gen> {
        self.labels.iter().position(|l| l == label).map(|i| i as Gen)
    }

    /// Parses `sts`, `s.t.s`, `121`, or `e` for the empty word.
    pub fn parse_word(&self, text: &str) -> Result<Vec<Gen>> {
        let text = text.trim();
        if text.is_empty() || text == "e" {
            return Ok(Vec::new());
        }
        let err = || Error::ParseWord(text.to_string());
        if text.contains('.') || text.contains(',') || text.contains(' ') {
            return text
                .split(['.', ',', ' '])
                .filter(|p| !p.is_empty())
                .map(|p| self.gen_by_label(p).ok_or_else(err))
                .collect();
        }
        if self.labels.iter().all(|l| l.chars().count() == 1) {
            text.chars()
                .map(|c| self.gen_by_label(&c.to_string()).ok_or_else(err))
                .collect()
        } else {
            self.gen_by_label(text).map(|g| vec![g]).ok_or_else(err)
        }
    }

    pub fn format_word(&self, word: &[Gen]) -> String {
        if word.is_empty() {
            return "e".into();
        }
        let parts: Vec<&str> = word.iter().map(|&g| self.labels[g as usize].as_str()).collect();
        if self.labels.iter().all(|l| l.chars().count() == 1) {
            parts.concat()
        } else {
            parts.join(".")
        }
    }

    // ---- group elements -------------------------------------------------

    /// Matrix of `s` on root coordinates: column j is `s(alpha_j)`.
    fn refl_apply_left(&self, s: Gen, mat: &mut [i64]) {
        // mat <- S_s * mat: only row s changes.
        let n = self.num_gens();
        let s = s as usize;
        for j in 0..n {
            let v: i64 = (0..n).map(|k| self.cartan[s][k] * mat[k * n + j]).sum();
            mat[s * n + j] -= v;
        }
    }

    fn refl_apply_right(&self, mat: &mut [i64], s: Gen) {
        // mat <- mat * S_s: (M S)[i][j] = M[i][j] - M[i][s] * cartan[s][j].
        let n = self.num_gens();
        let s = s as usize;
        for i in 0..n {
            let f = mat[i * n + s];
            if f != 0 {
                for j in 0..n {
                    mat[i * n + j] -= f * self.cartan[s][j];
                }
            }
        }
    }

    fn identity_matrix(&self) -> Vec<i64> {
        let n = self.num_gens();
        let mut m = vec![0; n * n];
        for i in 0..n {
            m[i * n + i] = 1;
        }
        m
    }

    fn col_negative(&self, mat: &[i64], s: Gen) -> bool {
        let n = self.num_gens();
        // Real roots are sign-coherent, so the sum decides the sign.
        (0..n).map(|i| mat[i * n + s as usize]).sum::<i64>() < 0
    }

    /// ShortLex normal form from the pair of matrices.
    fn canonical_word(&self, mat: &[i64], inv: &[i64]) -> Vec<Gen> {
        let mut mat = mat.to_vec();
        let mut inv = inv.to_vec();
        let mut word = Vec::new();
        loop {
            let Some(s) = self.gens().find(|&s| self.col_negative(&inv, s)) else {
                break;
            };
            word.push(s);
            self.refl_apply_left(s, &mut mat);
            self.refl_apply_right(&mut inv, s);
        }
        word
    }

    fn make(&self, mat: Vec<i64>, inv: Vec<i64>) -> WElem {
        let word = self.canonical_word(&mat, &inv);
        WElem {
            word: word.into(),
            mat: mat.into(),
            inv: inv.into(),
        }
    }

    pub fn identity(&self) -> WElem {
        let id = self.identity_matrix();
        WElem {
            word: Vec::new().into(),
            mat: id.clone().into(),
            inv: id.into(),
        }
    }

    pub fn gen(&self, s: Gen) -> WElem {
        self.from_word(&[s])
    }

    pub fn from_word(&self, word: &[Gen]) -> WElem {
        let mut mat = self.identity_matrix();
        let mut inv = self.identity_matrix();
        for &s in word {
            self.refl_apply_right(&mut mat, s);
            self.refl_apply_left(s, &mut inv);
        }
        self.make(mat, inv)
    }

    pub fn parse_elem(&self, text: &str) -> Result<WElem> {
        Ok(self.from_word(&self.parse_word(text)?))
    }

    pub fn rmul(&self, x: &WElem, s: Gen) -> WElem {
        let mut mat = x.mat.to_vec();
        let mut inv = x.inv.to_vec();
        self.refl_apply_right(&mut mat, s);
        self.refl_apply_left(s, &mut inv);
        self.make(mat, inv)
    }

    pub fn lmul(&self, s: Gen, x: &WElem) -> WElem {
        let mut mat = x.mat.to_vec();
        let mut inv = x.inv.to_vec();
        self.refl_apply_left(s, &mut mat);
        self.refl_apply_right(&mut inv, s);
        self.make(mat, inv)
    }

    pub fn mult(&self, x: &WElem, y: &WElem) -> WElem {
        let mut mat = x.mat.to_vec();
        let mut inv = x.inv.to_vec();
        for &s in y.word.iter() {
            self.refl_apply_right(&mut mat, s);
            self.refl_apply_left(s, &mut inv);
        }
        self.make(mat, inv)
    }

    pub fn inverse(&self, x: &WElem) -> WElem {
        self.make(x.inv.to_vec(), x.mat.to_vec())
    }

    pub fn descent(&self, x: &WElem, s: Gen, side: Side) -> bool {
        match side {
            Side::Right => self.col_negative(&x.mat, s),
            Side::Left => self.col_negative(&x.inv, s),
        }
    }

    pub fn descent_set(&self, x: &WElem, side: Side) -> Vec<Gen> {
        self.gens().filter(|&s| self.descent(x, s, side)).collect()
    }

    pub fn bruhat_leq(&self, x: &WElem, y: &WElem) -> bool {
        if x.len() > y.len() {
            return false;
        }
        if x.len() == y.len() {
            return x == y;
        }
        if x.is_identity() {
            return true;
        }
        // Lifting property: for s in D_L(y), x <= y iff min(x, sx) <= sy.
        let s = y.word[0];
        let sy = self.lmul(s, y);
        if self.descent(x, s, Side::Left) {
            self.bruhat_leq(&self.lmul(s, x), &sy)
        } else {
            self.bruhat_leq(x, &sy)
        }
    }

    /// All elements of length at most `maxlen`, grouped by length, each
    /// group sorted in ShortLex order. `budget` caps the total count.
    pub fn enumerate_elements(&self, maxlen: usize, budget: usize) -> Result<Vec<Vec<WElem>>> {
        let mut levels = vec![vec![self.identity()]];
        let mut total = 1;
        for _ in 0..maxlen {
            let mut next: HashSet<WElem> = HashSet::new();
            for x in levels.last().unwrap() {
                for s in self.gens() {
                    if !self.descent(x, s, Side::Right) {
                        next.insert(self.rmul(x, s));
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            total += next.len();
            if total > budget {
                return Err(Error::BudgetExceeded(budget));
            }
            let mut v: Vec<WElem> = next.into_iter().collect();
            v.sort();
            levels.push(v);
        }
        Ok(levels)
    }

    /// True when every letter of `word` increases the length.
    pub fn is_reduced(&self, word: &[Gen]) -> bool {
        self.from_word(word).len() == word.len()
    }

    /// All reduced words of `x`, sorted lexicographically.
    pub fn reduced_words(&self, x: &WElem) -> Vec<Vec<Gen>> {
        let mut memo: HashMap<WElem, Vec<Vec<Gen>>> = HashMap::new();
        self.reduced_words_rec(x, &mut memo)
    }

    fn reduced_words_rec(&self, x: &WElem, memo: &mut HashMap<WElem, Vec<Vec<Gen>>>) -> Vec<Vec<Gen>> {
        if x.is_identity() {
            return vec![Vec::new()];
        }
        if let Some(v) = memo.get(x) {
            return v.clone();
        }
        let mut out = Vec::new();
        for s in self.descent_set(x, Side::Right) {
            let xs = self.rmul(x, s);
            for mut w in self.reduced_words_rec(&xs, memo) {
                w.push(s);
                out.push(w);
            }
        }
        out.sort();
        memo.insert(x.clone(), out.clone());
        out
    }

    /// The Weyl group action on root coordinates: column j of the result
    /// is `x(alpha_j)` in the basis of simple roots.
    pub fn root_action(&self, x: &WElem) -> Vec<Vec<i64>> {
        let n = self.num_gens();
        (0..n).map(|i| x.mat[i * n..(i + 1) * n].to_vec()).collect()
    }

    // ---- subexpressions -------------------------------------------------

    pub fn decorate(&self, word: &[Gen], bits: &[u8]) -> DecoratedSubexpr {
        assert_eq!(word.len(), bits.len(), "bits and word differ in length");
        let mut cur = self.identity();
        let mut decorations = Vec::with_capacity(word.len());
        let mut defect = 0;
        for (&s, &b) in word.iter().zip(bits) {
            let up = !self.descent(&cur, s, Side::Right);
            let d = match (up, b != 0) {
                (true, false) => {
                    defect += 1;
                    Decoration::U0
                }
                (true, true) => Decoration::U1,
                (false, false) => {
                    defect -= 1;
                    Decoration::D0
                }
                (false, true) => Decoration::D1,
            };
            if b != 0 {
                cur = self.rmul(&cur, s);
            }
            decorations.push(d);
        }
        DecoratedSubexpr {
            word: word.to_vec(),
            bits: bits.iter().map(|&b| u8::from(b != 0)).collect(),
            decorations,
            defect,
            endpoint: cur,
        }
    }

    /// Every subexpression of `word`, in lexicographic order of bits.
    pub fn all_subexpressions(&self, word: &[Gen]) -> Vec<DecoratedSubexpr> {
        let mut out = Vec::with_capacity(1 << word.len().min(20));
        let mut bits = Vec::with_capacity(word.len());
        let mut decs = Vec::with_capacity(word.len());
        self.subexpr_rec(word, &mut bits, &mut decs, 0, &self.identity(), &mut |b, d, df, end| {
            out.push(DecoratedSubexpr {
                word: word.to_vec(),
                bits: b.to_vec(),
                decorations: d.to_vec(),
                defect: df,
                endpoint: end.clone(),
            });
            true
        });
        out
    }

    #[allow(clippy::too_many_arguments)]
    fn subexpr_rec(
        &self,
        word: &[Gen],
        bits: &mut Vec<u8>,
        decs: &mut Vec<Decoration>,
        defect: i32,
        cur: &WElem,
        emit: &mut dyn FnMut(&[u8], &[Decoration], i32, &WElem) -> bool,
    ) {
        let i = bits.len();
        if i == word.len() {
            emit(bits, decs, defect, cur);
            return;
        }
        let s = word[i];
        let up = !self.descent(cur, s, Side::Right);
        let next = self.rmul(cur, s);
        bits.push(0);
        decs.push(if up { Decoration::U0 } else { Decoration::D0 });
        self.subexpr_rec(word, bits, decs, defect + if up { 1 } else { -1 }, cur, emit);
        bits.pop();
        decs.pop();
        bits.push(1);
        decs.push(if up { Decoration::U1 } else { Decoration::D1 });
        self.subexpr_rec(word, bits, decs, defect, &next, emit);
        bits.pop();
        decs.pop();
    }

    /// Subexpressions of `word` with endpoint `target`, lexicographic in bits.
    pub fn subexpressions_for(&self, word: &[Gen], target: &WElem) -> Vec<DecoratedSubexpr> {
        if target.len() > word.len() {
            return Vec::new();
        }
        self.subexpressions_by_endpoint(word)
            .remove(target)
            .unwrap_or_default()
    }

    /// All subexpressions grouped by endpoint; each group is lexicographic.
    pub fn subexpressions_by_endpoint(&self, word: &[Gen]) -> BTreeMap<WElem, Vec<DecoratedSubexpr>> {
        let mut map: BTreeMap<WElem, Vec<DecoratedSubexpr>> = BTreeMap::new();
        for e in self.all_subexpressions(word) {
            map.entry(e.endpoint.clone()).or_default().push(e);
        }
        map
    }
}

/// A group element: ShortLex-minimal reduced word plus the matrices of
/// `x` and `x^{-1}` on root coordinates. Equality and ordering use the
/// word only (ShortLex order).
#[derive(Clone)]
pub struct WElem {
    word: Arc<[Gen]>,
    mat: Arc<[i64]>,
    inv: Arc<[i64]>,
}

impl WElem {
    pub fn word(&self) -> &[Gen] {
        &self.word
    }
    pub fn len(&self) -> usize {
        self.word.len()
    }
    pub fn is_empty(&self) -> bool {
        self.word.is_empty()
    }
    pub fn is_identity(&self) -> bool {
        self.word.is_empty()
    }
}

impl PartialEq for WElem {
    fn eq(&self, other: &Self) -> bool {
        self.word == other.word
    }
}
impl Eq for WElem {}

impl Hash for WElem {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.word.hash(state);
    }
}

impl Ord for WElem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.word
            .len()
            .cmp(&other.word.len())
            .then_with(|| self.word.cmp(&other.word))
    }
}
impl PartialOrd for WElem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for WElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "W{:?}", &*self.word)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decoration {
    U0,
    U1,
    D0,
    D1,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecoratedSubexpr {
    pub word: Vec<Gen>,
    pub bits: Vec<u8>,
    pub decorations: Vec<Decoration>,
    pub defect: i32,
    pub endpoint: WElem,
}

impl DecoratedSubexpr {
    pub fn has_d1(&self) -> bool {
        self.decorations.contains(&Decoration::D1)
    }

    /// Bit i of the result is `bits[i]`.
    pub fn mask(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .fold(0, |m, (i, &b)| m | (u64::from(b) << i))
    }
}
