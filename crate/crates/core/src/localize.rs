//! Localization matrices of morphisms between Bott-Samelson objects.
//!
//! The object `BS(w)` is identified after localization with a sum of
//! standard objects indexed by subexpressions `e` of `w`, via the
//! coordinates `c_e(f_0 ⊗ f_1 ⊗ .. ⊗ f_n) = f_0 · p_1(f_1) · .. · p_n(f_n)`
//! where `p_k = s_1^{e_1} .. s_k^{e_k}`. A morphism becomes a matrix with
//! rows indexed by subexpressions of the codomain and columns by those of
//! the domain; composition is matrix multiplication. Subexpressions are
//! bit masks with bit i equal to `e_i`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::coxeter::{CoxeterSystem, Gen, WElem};
use crate::error::{Error, Result};
use crate::polyring::{apply_linear, inv_mod, mul_mod, vstar_reflection, LinearForm, Poly, RatFn};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Generator {
    /// Unit `R -> B_s`, degree 1.
    DotIn(Gen),
    /// Counit `B_s -> R`, degree 1.
    DotOut(Gen),
    /// `B_s B_s -> B_s`, degree -1.
    Merge(Gen),
    /// `B_s -> B_s B_s`, degree -1.
    Split(Gen),
    /// `(s,t,s,..) -> (t,s,t,..)` with `m_{s,t}` letters, degree 0.
    Braid(Gen, Gen),
}

pub fn alternating(s: Gen, t: Gen, len: usize) -> Vec<Gen> {
    (0..len).map(|i| if i % 2 == 0 { s } else { t }).collect()
}

fn braid_m(sys: &CoxeterSystem, s: Gen, t: Gen) -> Result<usize> {
    match sys.m(s, t) {
        Some(m) if s != t => Ok(m as usize),
        Some(_) => Err(Error::Invalid("braid vertex needs two distinct generators".into())),
        None => Err(Error::InfiniteBraid(
            sys.labels()[s as usize].clone(),
            sys.labels()[t as usize].clone(),
        )),
    }
}

impl Generator {
    pub fn dom(&self, sys: &CoxeterSystem) -> Result<Vec<Gen>> {
        Ok(match *self {
            Generator::DotIn(_) => vec![],
            Generator::DotOut(s) | Generator::Split(s) => vec![s],
            Generator::Merge(s) => vec![s, s],
            Generator::Braid(s, t) => alternating(s, t, braid_m(sys, s, t)?),
        })
    }

    pub fn cod(&self, sys: &CoxeterSystem) -> Result<Vec<Gen>> {
        Ok(match *self {
            Generator::DotOut(_) => vec![],
            Generator::DotIn(s) | Generator::Merge(s) => vec![s],
            Generator::Split(s) => vec![s, s],
            Generator::Braid(s, t) => alternating(t, s, braid_m(sys, s, t)?),
        })
    }

    pub fn degree(&self) -> i32 {
        match self {
            Generator::DotIn(_) | Generator::DotOut(_) => 1,
            Generator::Merge(_) | Generator::Split(_) => -1,
            Generator::Braid(..) => 0,
        }
    }

    /// Upside-down partner.
    pub fn flip(&self) -> Generator {
        match *self {
            Generator::DotIn(s) => Generator::DotOut(s),
            Generator::DotOut(s) => Generator::DotIn(s),
            Generator::Merge(s) => Generator::Split(s),
            Generator::Split(s) => Generator::Merge(s),
            Generator::Braid(s, t) => Generator::Braid(t, s),
        }
    }
}

/// A generator placed on strands `pos..` of the current word.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GeneratorTag {
    pub gen: Generator,
    pub pos: usize,
}

impl GeneratorTag {
    pub fn new(pos: usize, gen: Generator) -> Self {
        Self { gen, pos }
    }

    /// The word after applying this layer to `word`.
    pub fn apply_to_word(&self, sys: &CoxeterSystem, word: &[Gen]) -> Result<Vec<Gen>> {
        let dom = self.gen.dom(sys)?;
        let end = self.pos + dom.len();
        if end > word.len() || word[self.pos..end] != dom[..] {
            return Err(Error::Invalid(format!(
                "layer {:?} does not fit word {}",
                self,
                sys.format_word(word)
            )));
        }
        let mut out = word[..self.pos].to_vec();
        out.extend(self.gen.cod(sys)?);
        out.extend_from_slice(&word[end..]);
        Ok(out)
    }
}

/// Flips a layer sequence upside down.
pub fn flip_layers(layers: &[GeneratorTag]) -> Vec<GeneratorTag> {
    layers
        .iter()
        .rev()
        .map(|l| GeneratorTag::new(l.pos, l.gen.flip()))
        .collect()
}

// ---- W-action helpers ----------------------------------------------------

pub(crate) type Mat = Vec<Vec<i64>>;

pub(crate) fn identity_mat(r: usize) -> Mat {
    (0..r).map(|i| (0..r).map(|j| i64::from(i == j)).collect()).collect()
}

pub(crate) fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let r = a.len();
    (0..r)
        .map(|i| (0..r).map(|j| (0..r).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// V* action of the endpoint of `mask` on `word`.
pub fn endpoint_action(sys: &CoxeterSystem, word: &[Gen], mask: u64) -> Mat {
    let mut a = identity_mat(sys.rank());
    for (i, &s) in word.iter().enumerate() {
        if mask >> i & 1 == 1 {
            a = mat_mul(&a, &vstar_reflection(sys, s));
        }
    }
    a
}

/// Endpoint actions of all masks on `word`, indexed by mask.
pub(crate) fn all_endpoint_actions(sys: &CoxeterSystem, word: &[Gen]) -> Vec<Mat> {
    let mut out = vec![identity_mat(sys.rank())];
    for (i, &s) in word.iter().enumerate() {
        let refl = vstar_reflection(sys, s);
        let half = out.len();
        debug_assert_eq!(half, 1 << i);
        for m in 0..half {
            let next = mat_mul(&out[m], &refl);
            out.push(next);
        }
    }
    out
}

/// Linear factors of `nu_w(e) = prod_i p_{i-1}(alpha_{s_i})`.
pub fn nu_factors(sys: &CoxeterSystem, word: &[Gen], mask: u64) -> Vec<LinearForm> {
    let mut a = identity_mat(sys.rank());
    let mut out = Vec::with_capacity(word.len());
    for (i, &s) in word.iter().enumerate() {
        out.push(LinearForm(apply_linear(&a, sys.root(s))));
        if mask >> i & 1 == 1 {
            a = mat_mul(&a, &vstar_reflection(sys, s));
        }
    }
    out
}

pub fn nu(sys: &CoxeterSystem, word: &[Gen], mask: u64) -> Poly {
    nu_factors(sys, word, mask)
        .iter()
        .fold(Poly::one(), |acc, l| &acc * &l.to_poly())
}

fn endpoint(sys: &CoxeterSystem, word: &[Gen], mask: u64) -> WElem {
    let sub: Vec<Gen> = word
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, &s)| s)
        .collect();
    sys.from_word(&sub)
}

/// An integral covector `delta` with `<delta, alpha_s^vee> = 1`.
pub fn delta(sys: &CoxeterSystem, s: Gen) -> Vec<i64> {
    // Extended gcd across the coroot coordinates.
    let c = sys.coroot(s);
    let mut g = 0i64;
    let mut coeffs = vec![0i64; c.len()];
    for (j, &x) in c.iter().enumerate() {
        if x == 0 {
            continue;
        }
        if g == 0 {
            g = x;
            coeffs[j] = 1;
            continue;
        }
        // a*g + b*x = gcd(g, x)
        let (mut r0, mut r1, mut a0, mut a1, mut b0, mut b1) = (g, x, 1i64, 0i64, 0i64, 1i64);
        while r1 != 0 {
            let q = r0 / r1;
            (r0, r1) = (r1, r0 - q * r1);
            (a0, a1) = (a1, a0 - q * a1);
            (b0, b1) = (b1, b0 - q * b1);
        }
        for v in coeffs.iter_mut() {
            *v *= a0;
        }
        coeffs[j] = b0;
        g = r0;
    }
    assert!(g == 1 || g == -1, "coroot is not primitive");
    coeffs.iter().map(|&v| v * g).collect()
}

// ---- matrices ------------------------------------------------------------

/// Sparse localization matrix, stored by column.
#[derive(Clone, PartialEq, Eq)]
pub struct StdMatrix {
    dom: Vec<Gen>,
    cod: Vec<Gen>,
    degree: i32,
    cols: BTreeMap<u64, BTreeMap<u64, RatFn>>,
}

impl fmt::Debug for StdMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "StdMatrix {:?} -> {:?} (degree {})", self.dom, self.cod, self.degree)?;
        for (c, col) in &self.cols {
            for (r, v) in col {
                writeln!(f, "  [{r:0w$b} <- {c:0dw$b}] {v}", w = self.cod.len().max(1), dw = self.dom.len().max(1))?;
            }
        }
        Ok(())
    }
}

impl StdMatrix {
    pub fn zero(dom: Vec<Gen>, cod: Vec<Gen>, degree: i32) -> Self {
        Self { dom, cod, degree, cols: BTreeMap::new() }
    }

    pub fn identity(word: &[Gen]) -> Self {
        let mut m = Self::zero(word.to_vec(), word.to_vec(), 0);
        for e in 0..1u64 << word.len() {
            m.add_entry(e, e, &RatFn::one());
        }
        m
    }

    /// The 1x1 matrix of multiplication by `f` on `R`.
    pub fn scalar(f: Poly, degree: i32) -> Self {
        let mut m = Self::zero(vec![], vec![], degree);
        m.add_entry(0, 0, &RatFn::from_poly(f));
        m
    }

    pub fn dom(&self) -> &[Gen] {
        &self.dom
    }
    pub fn cod(&self) -> &[Gen] {
        &self.cod
    }
    pub fn degree(&self) -> i32 {
        self.degree
    }
    pub fn is_zero(&self) -> bool {
        self.cols.is_empty()
    }

    pub fn get(&self, row: u64, col: u64) -> RatFn {
        self.cols
            .get(&col)
            .and_then(|c| c.get(&row))
            .cloned()
            .unwrap_or_default()
    }

    pub fn column(&self, col: u64) -> impl Iterator<Item = (u64, &RatFn)> {
        self.cols.get(&col).into_iter().flat_map(|c| c.iter().map(|(&r, v)| (r, v)))
    }

    /// All nonzero entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (u64, u64, &RatFn)> {
        self.cols
            .iter()
            .flat_map(|(&c, col)| col.iter().map(move |(&r, v)| (r, c, v)))
    }

    pub fn nnz(&self) -> usize {
        self.cols.values().map(BTreeMap::len).sum()
    }

    pub fn add_entry(&mut self, row: u64, col: u64, v: &RatFn) {
        if v.is_zero() {
            return;
        }
        let c = self.cols.entry(col).or_default();
        let new = match c.get(&row) {
            Some(old) => old + v,
            None => v.clone(),
        };
        if new.is_zero() {
            c.remove(&row);
            if c.is_empty() {
                self.cols.remove(&col);
            }
        } else {
            c.insert(row, new);
        }
    }

    /// Grade every entry must have (linear forms in degree 2).
    pub fn entry_grade(&self) -> i32 {
        self.degree + self.cod.len() as i32 - self.dom.len() as i32
    }

    pub fn check_homogeneous(&self) -> Result<()> {
        let want = self.entry_grade();
        for (r, c, v) in self.entries() {
            if v.grade() != Some(want) {
                return Err(Error::Homogeneity(format!(
                    "entry ({r:b}, {c:b}) = {v} has grade {:?}, expected {want}",
                    v.grade()
                )));
            }
        }
        Ok(())
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.dom != other.dom || self.cod != other.cod {
            return Err(Error::Invalid("matrices have different shapes".into()));
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (r, c, v) in other.entries() {
            out.add_entry(r, c, v);
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1))
    }

    pub fn scale(&self, c: i128) -> Self {
        let mut out = Self::zero(self.dom.clone(), self.cod.clone(), self.degree);
        if c != 0 {
            for (r, col, v) in self.entries() {
                out.add_entry(r, col, &v.scale(c));
            }
        }
        out
    }

    /// Left multiplication by a polynomial (placed at the far left).
    pub fn mul_poly_left(&self, f: &Poly) -> Self {
        let g = f.grade().unwrap_or(0);
        let mut out = Self::zero(self.dom.clone(), self.cod.clone(), self.degree + g);
        for (r, c, v) in self.entries() {
            out.add_entry(r, c, &v.mul_poly(f));
        }
        out
    }
}

/// `g ∘ f`.
pub fn compose(g: &StdMatrix, f: &StdMatrix) -> Result<StdMatrix> {
    if f.cod != g.dom {
        return Err(Error::Invalid("composition of incompatible matrices".into()));
    }
    let mut out = StdMatrix::zero(f.dom.clone(), g.cod.clone(), g.degree + f.degree);
    for (&e, col) in &f.cols {
        for (&mid, b) in col {
            for (r, a) in g.column(mid) {
                out.add_entry(r, e, &(a * b));
            }
        }
    }
    out.check_homogeneous()?;
    Ok(out)
}

/// `id_left ⊗ m ⊗ id_right`.
pub fn htensor(sys: &CoxeterSystem, left: &[Gen], m: &StdMatrix, right: &[Gen]) -> StdMatrix {
    let l = left.len();
    let dom: Vec<Gen> = left.iter().chain(&m.dom).chain(right).copied().collect();
    let cod: Vec<Gen> = left.iter().chain(&m.cod).chain(right).copied().collect();
    let mut out = StdMatrix::zero(dom, cod, m.degree);
    let actions = all_endpoint_actions(sys, left);
    let (dshift, cshift) = (l + m.dom.len(), l + m.cod.len());
    for (a, act) in actions.iter().enumerate() {
        let a = a as u64;
        for (g2, g, v) in m.entries() {
            let v = if a == 0 { v.clone() } else { v.act_matrix(act) };
            for b in 0..1u64 << right.len() {
                out.add_entry(a | g2 << l | b << cshift, a | g << l | b << dshift, &v);
            }
        }
    }
    out
}

pub fn gen_matrix(sys: &CoxeterSystem, gen: Generator) -> Result<StdMatrix> {
    let (dom, cod) = (gen.dom(sys)?, gen.cod(sys)?);
    let mut m = StdMatrix::zero(dom.clone(), cod.clone(), gen.degree());
    let one = RatFn::one();
    match gen {
        Generator::DotOut(_) => m.add_entry(0, 0, &one),
        Generator::DotIn(s) => m.add_entry(0, 0, &RatFn::from_poly(Poly::linear(sys.root(s)))),
        Generator::Merge(s) => {
            let inv = one.div_linear(&LinearForm(sys.root(s).to_vec()));
            // Column masks: bit 0 is the first strand.
            m.add_entry(0, 0b00, &inv);
            m.add_entry(0, 0b11, &-&inv);
            m.add_entry(1, 0b10, &inv);
            m.add_entry(1, 0b01, &-&inv);
        }
        Generator::Split(_) => {
            m.add_entry(0b00, 0, &one);
            m.add_entry(0b11, 0, &one);
            m.add_entry(0b10, 1, &one);
            m.add_entry(0b01, 1, &one);
        }
        Generator::Braid(..) => {
            let n = dom.len();
            let full = (1u64 << n) - 1;
            let top = RatFn::from_poly(nu(sys, &dom, full));
            let mut by_end: HashMap<WElem, Vec<u64>> = HashMap::new();
            for f in 0..1u64 << n {
                by_end.entry(endpoint(sys, &cod, f)).or_default().push(f);
            }
            for e in 0..1u64 << n {
                let v = nu_factors(sys, &dom, e).iter().fold(top.clone(), |acc, l| acc.div_linear(l));
                for &f in &by_end[&endpoint(sys, &dom, e)] {
                    m.add_entry(f, e, &v);
                }
            }
        }
    }
    m.check_homogeneous()?;
    Ok(m)
}

/// Matrix of one layer acting on `word`.
pub fn layer_matrix(sys: &CoxeterSystem, word: &[Gen], tag: &GeneratorTag) -> Result<StdMatrix> {
    let dom = tag.gen.dom(sys)?;
    tag.apply_to_word(sys, word)?;
    let g = gen_matrix(sys, tag.gen)?;
    Ok(htensor(sys, &word[..tag.pos], &g, &word[tag.pos + dom.len()..]))
}

/// Composite of layers applied bottom to top starting from `dom`.
pub fn evaluate(sys: &CoxeterSystem, dom: &[Gen], layers: &[GeneratorTag]) -> Result<StdMatrix> {
    let mut cur = StdMatrix::identity(dom);
    let mut word = dom.to_vec();
    for tag in layers {
        let m = layer_matrix(sys, &word, tag)?;
        word = tag.apply_to_word(sys, &word)?;
        cur = compose(&m, &cur)?;
    }
    Ok(cur)
}

/// Upside-down flip: `flip(M)[e, f] = M[f, e] nu_dom(e) / nu_cod(f)`.
pub fn flip(sys: &CoxeterSystem, m: &StdMatrix) -> StdMatrix {
    let mut out = StdMatrix::zero(m.cod.clone(), m.dom.clone(), m.degree);
    let mut nu_dom: HashMap<u64, Poly> = HashMap::new();
    let mut nu_cod: HashMap<u64, Vec<LinearForm>> = HashMap::new();
    for (f, e, v) in m.entries() {
        let nd = nu_dom.entry(e).or_insert_with(|| nu(sys, &m.dom, e)).clone();
        let nc = nu_cod.entry(f).or_insert_with(|| nu_factors(sys, &m.cod, f));
        let w = nc.iter().fold(v.mul_poly(&nd), |acc, l| acc.div_linear(l));
        out.add_entry(e, f, &w);
    }
    out
}

// ---- integral lattice ----------------------------------------------------

/// Whether the coordinate vector `z` (dense, indexed by mask) is the
/// image of an element of `BS(word)` itself, not just its localization.
pub fn lattice_member(sys: &CoxeterSystem, word: &[Gen], z: &[RatFn]) -> bool {
    let n = word.len();
    debug_assert_eq!(z.len(), 1 << n);
    if n == 0 {
        return z[0].is_poly();
    }
    if z.iter().all(RatFn::is_zero) {
        return true;
    }
    // Write z = y ⊗ 1 + y' ⊗ delta with y, y' on the shorter word.
    let s = word[n - 1];
    let half = 1usize << (n - 1);
    let actions = all_endpoint_actions(sys, &word[..n - 1]);
    let d = delta(sys, s);
    let mut u1 = Vec::with_capacity(half);
    let mut y = Vec::with_capacity(half);
    for e in 0..half {
        let a = &actions[e];
        let root = LinearForm(apply_linear(a, sys.root(s)));
        let dl = Poly::linear(&apply_linear(a, &d));
        let u = (&z[e] - &z[e | half]).div_linear(&root);
        y.push(&z[e] - &u.mul_poly(&dl));
        u1.push(u);
    }
    lattice_member(sys, &word[..n - 1], &u1) && lattice_member(sys, &word[..n - 1], &y)
}

/// Coordinates of the standard left basis `1 ⊗ delta^{eps_1} ⊗ ..`.
pub fn basis_coords(sys: &CoxeterSystem, word: &[Gen], eps: u64) -> Vec<RatFn> {
    let n = word.len();
    let deltas: Vec<Vec<i64>> = word.iter().map(|&s| delta(sys, s)).collect();
    (0..1u64 << n)
        .map(|e| {
            let mut a = identity_mat(sys.rank());
            let mut p = Poly::one();
            for i in 0..n {
                if e >> i & 1 == 1 {
                    a = mat_mul(&a, &vstar_reflection(sys, word[i]));
                }
                if eps >> i & 1 == 1 {
                    p = &p * &Poly::linear(&apply_linear(&a, &deltas[i]));
                }
            }
            RatFn::from_poly(p)
        })
        .collect()
}

/// Whether `m` maps the integral lattice of its domain into that of its
/// codomain.
pub fn preserves_lattice(sys: &CoxeterSystem, m: &StdMatrix) -> bool {
    for eps in 0..1u64 << m.dom.len() {
        let x = basis_coords(sys, &m.dom, eps);
        let mut y = vec![RatFn::zero(); 1 << m.cod.len()];
        for (f, e, v) in m.entries() {
            y[f as usize] = &y[f as usize] + &(v * &x[e as usize]);
        }
        if !lattice_member(sys, &m.cod, &y) {
            return false;
        }
    }
    true
}

// ---- Temperley-Lieb diagrams as dot/trivalent morphisms --------------------

/// Noncrossing perfect matchings of `2n` points in cyclic order
/// `B_0 .. B_{n-1}, T_{n-1} .. T_0`.
pub fn tl_diagrams(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn rec(points: &[usize]) -> Vec<Vec<(usize, usize)>> {
        if points.is_empty() {
            return vec![vec![]];
        }
        let mut out = Vec::new();
        for k in (1..points.len()).step_by(2) {
            for inner in rec(&points[1..k]) {
                for outer in rec(&points[k + 1..]) {
                    let mut m = vec![(points[0], points[k])];
                    m.extend(inner.iter().copied());
                    m.extend(outer.iter().copied());
                    out.push(m);
                }
            }
        }
        out
    }
    let pts: Vec<usize> = (0..2 * n).collect();
    rec(&pts)
}

/// Converts a TL diagram on `n` strands into a dot/trivalent morphism from
/// `bottom` (n letters) to `top` (n + 1 letters): each region of the
/// diagram becomes a tree joining the boundary points it contains.
pub fn tl_to_layers(
    sys: &CoxeterSystem,
    matching: &[(usize, usize)],
    bottom: &[Gen],
    top: &[Gen],
) -> Result<Vec<GeneratorTag>> {
    let n = bottom.len();
    assert_eq!(top.len(), n + 1);
    let np = 2 * n;
    // Boundary arc k joins point k and point k+1 (mod 2n).
    let side = |arc: usize| -> Vec<bool> {
        matching
            .iter()
            .map(|&(i, j)| {
                let (i, j) = (i.min(j), i.max(j));
                i <= arc && arc < j
            })
            .collect()
    };
    let sides: Vec<Vec<bool>> = (0..np).map(side).collect();
    let mut region_of_arc = vec![usize::MAX; np];
    let mut reps: Vec<Vec<bool>> = Vec::new();
    for a in 0..np {
        let r = match reps.iter().position(|s| *s == sides[a]) {
            Some(r) => r,
            None => {
                reps.push(sides[a].clone());
                reps.len() - 1
            }
        };
        region_of_arc[a] = r;
    }
    let bottom_arc = |k: usize| if k == 0 { np - 1 } else { k - 1 };
    let top_arc = |k: usize| {
        if k == 0 {
            np - 1
        } else if k == n {
            n - 1
        } else {
            np - 1 - k
        }
    };
    let bottom_regions: Vec<usize> = (0..n).map(|k| region_of_arc[bottom_arc(k)]).collect();
    let top_regions: Vec<usize> = (0..=n).map(|k| region_of_arc[top_arc(k)]).collect();
    let bset: BTreeSet<usize> = bottom_regions.iter().copied().collect();
    let tset: BTreeSet<usize> = top_regions.iter().copied().collect();

    // Collapse one boundary: regions without points on the other side are
    // merged and capped off innermost first, then equal neighbours merged.
    let reduce = |word: &[Gen], regions: &[usize], other: &BTreeSet<usize>| -> Result<(Vec<GeneratorTag>, Vec<usize>)> {
        let mut seq: Vec<(usize, Gen)> = regions.iter().copied().zip(word.iter().copied()).collect();
        let mut layers = Vec::new();
        loop {
            let candidate = seq.iter().map(|x| x.0).filter(|r| !other.contains(r)).find(|&r| {
                let idx: Vec<usize> = (0..seq.len()).filter(|&i| seq[i].0 == r).collect();
                idx.windows(2).all(|w| w[1] == w[0] + 1)
            });
            let Some(r) = candidate else { break };
            let idx: Vec<usize> = (0..seq.len()).filter(|&i| seq[i].0 == r).collect();
            let (start, color) = (idx[0], seq[idx[0]].1);
            for _ in 1..idx.len() {
                layers.push(GeneratorTag::new(start, Generator::Merge(color)));
            }
            layers.push(GeneratorTag::new(start, Generator::DotOut(color)));
            seq.drain(start..start + idx.len());
        }
        if seq.iter().any(|x| !other.contains(&x.0)) {
            return Err(Error::Invalid("non-planar region structure".into()));
        }
        let mut i = 0;
        while i + 1 < seq.len() {
            if seq[i].0 == seq[i + 1].0 {
                if seq[i].1 != seq[i + 1].1 {
                    return Err(Error::Invalid("region with two colours".into()));
                }
                layers.push(GeneratorTag::new(i, Generator::Merge(seq[i].1)));
                seq.remove(i + 1);
            } else {
                i += 1;
            }
        }
        Ok((layers, seq.into_iter().map(|x| x.0).collect()))
    };
    let (mut layers, mid_b) = reduce(bottom, &bottom_regions, &tset)?;
    let (top_layers, mid_t) = reduce(top, &top_regions, &bset)?;
    if mid_b != mid_t {
        return Err(Error::Invalid("middle words disagree".into()));
    }
    layers.extend(flip_layers(&top_layers));
    let mut w = bottom.to_vec();
    for l in &layers {
        w = l.apply_to_word(sys, &w)?;
    }
    if w != top {
        return Err(Error::Invalid("TL conversion produced the wrong codomain".into()));
    }
    Ok(layers)
}

const MODULUS: i128 = (1 << 61) - 1;

/// Solves `target = sum_i c_i basis_i` for integers `c_i`: first modulo a
/// large prime at sample points, then checked exactly. Returns `None` if
/// no integral solution reproduces `target` exactly.
pub fn solve_integral_combination(
    sys: &CoxeterSystem,
    target: &StdMatrix,
    basis: &[StdMatrix],
) -> Option<Vec<i128>> {
    let mut keys: BTreeSet<(u64, u64)> = target.entries().map(|(r, c, _)| (r, c)).collect();
    for b in basis {
        keys.extend(b.entries().map(|(r, c, _)| (r, c)));
    }
    let points: Vec<Vec<i128>> = (0..3)
        .map(|k| (0..sys.rank()).map(|j| 1_000_003 + 7919 * (j as i128 + 1) * (k + 3) + (j as i128).pow(3) * 104_729).collect())
        .collect();
    let nv = basis.len();
    let mut rows: Vec<Vec<i128>> = Vec::new();
    for pt in &points {
        for &(r, c) in &keys {
            let mut row = Vec::with_capacity(nv + 1);
            for b in basis {
                row.push(b.get(r, c).eval_mod(pt, MODULUS)?);
            }
            row.push(target.get(r, c).eval_mod(pt, MODULUS)?);
            rows.push(row);
        }
    }
    // Gaussian elimination modulo the prime.
    let mut pivots = Vec::new();
    let mut rank = 0;
    for col in 0..nv {
        let Some(p) = (rank..rows.len()).find(|&i| rows[i][col] != 0) else { continue };
        rows.swap(rank, p);
        let inv = inv_mod(rows[rank][col], MODULUS);
        for x in rows[rank].iter_mut() {
            *x = mul_mod(*x, inv, MODULUS);
        }
        for i in 0..rows.len() {
            if i != rank && rows[i][col] != 0 {
                let f = rows[i][col];
                for j in 0..=nv {
                    rows[i][j] = (rows[i][j] - mul_mod(f, rows[rank][j], MODULUS)).rem_euclid(MODULUS);
                }
            }
        }
        pivots.push(col);
        rank += 1;
    }
    if rows[rank..].iter().any(|r| r[nv] != 0) {
        return None;
    }
    let mut sol = vec![0i128; nv];
    for (i, &col) in pivots.iter().enumerate() {
        let v = rows[i][nv];
        sol[col] = if v > MODULUS / 2 { v - MODULUS } else { v };
    }
    let mut sum = StdMatrix::zero(target.dom.clone(), target.cod.clone(), target.degree);
    for (c, b) in sol.iter().zip(basis) {
        sum = sum.add(&b.scale(*c)).ok()?;
    }
    (sum == *target).then_some(sol)
}

// ---- relation suite --------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationCheck {
    pub name: String,
    pub passed: bool,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct RelationReport {
    pub checks: Vec<RelationCheck>,
    /// Solved Jones-Wenzl coefficients per ordered pair, in TL diagram order.
    pub jones_wenzl: Vec<(String, Vec<i128>)>,
}

impl RelationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
    fn push(&mut self, name: String, passed: bool) {
        self.checks.push(RelationCheck { name, passed });
    }
}

fn seq(sys: &CoxeterSystem, dom: &[Gen], layers: &[(usize, Generator)]) -> Result<StdMatrix> {
    let tags: Vec<GeneratorTag> = layers.iter().map(|&(p, g)| GeneratorTag::new(p, g)).collect();
    evaluate(sys, dom, &tags)
}

/// One-colour relations for `s`.
pub fn verify_one_colour(sys: &CoxeterSystem, s: Gen, report: &mut RelationReport) -> Result<()> {
    use Generator::*;
    let l = &sys.labels()[s as usize];
    let ss = [s, s];
    let id1 = StdMatrix::identity(&[s]);
    for g in [DotIn(s), DotOut(s), Merge(s), Split(s)] {
        let m = gen_matrix(sys, g)?;
        report.push(format!("{g:?}: lattice preserving"), preserves_lattice(sys, &m));
        let f = flip(sys, &m);
        report.push(format!("{g:?}: flip partner"), f == gen_matrix(sys, g.flip())?);
    }
    let unit_l = seq(sys, &[s], &[(0, DotIn(s)), (0, Merge(s))])?;
    let unit_r = seq(sys, &[s], &[(1, DotIn(s)), (0, Merge(s))])?;
    report.push(format!("{l}: Frobenius unit"), unit_l == id1 && unit_r == id1);
    let counit_l = seq(sys, &[s], &[(0, Split(s)), (0, DotOut(s))])?;
    let counit_r = seq(sys, &[s], &[(0, Split(s)), (1, DotOut(s))])?;
    report.push(format!("{l}: Frobenius counit"), counit_l == id1 && counit_r == id1);
    let a1 = seq(sys, &[s, s, s], &[(0, Merge(s)), (0, Merge(s))])?;
    let a2 = seq(sys, &[s, s, s], &[(1, Merge(s)), (0, Merge(s))])?;
    report.push(format!("{l}: merge associativity"), a1 == a2);
    let c1 = seq(sys, &[s], &[(0, Split(s)), (0, Split(s))])?;
    let c2 = seq(sys, &[s], &[(0, Split(s)), (1, Split(s))])?;
    report.push(format!("{l}: split associativity"), c1 == c2);
    let needle = seq(sys, &[s], &[(0, Split(s)), (0, Merge(s))])?;
    report.push(format!("{l}: needle"), needle.is_zero());
    let barbell = seq(sys, &[], &[(0, DotIn(s)), (0, DotOut(s))])?;
    report.push(
        format!("{l}: barbell"),
        barbell == StdMatrix::scalar(Poly::linear(sys.root(s)), 2),
    );
    // Frobenius compatibility: (id ⊗ merge)(split ⊗ id) = split ∘ merge.
    let f1 = seq(sys, &ss, &[(0, Split(s)), (1, Merge(s))])?;
    let f2 = seq(sys, &ss, &[(0, Merge(s)), (0, Split(s))])?;
    report.push(format!("{l}: Frobenius compatibility"), f1 == f2);
    // Polynomial forcing: f on the left = s(f) on the right + d_s(f) broken strand.
    let broken = seq(sys, &[s], &[(0, DotOut(s)), (0, DotIn(s))])?;
    let mut ok = true;
    for j in 0..sys.rank() {
        let f = Poly::var(j);
        let lhs = id1.mul_poly_left(&f);
        let mut right = StdMatrix::zero(vec![s], vec![s], 2);
        right.add_entry(0, 0, &RatFn::from_poly(crate::polyring::act_gen(sys, s, &f)));
        right.add_entry(1, 1, &RatFn::from_poly(f.clone()));
        let rhs = right.add(&broken.mul_poly_left(&crate::polyring::demazure(sys, s, &f)).with_degree(2))?;
        ok &= lhs == rhs;
    }
    report.push(format!("{l}: nil Hecke relation"), ok);
    Ok(())
}

impl StdMatrix {
    fn with_degree(mut self, d: i32) -> Self {
        self.degree = d;
        self
    }
}

/// Jones-Wenzl right-hand sides for `m <= 4`, as layer sequences with
/// integer coefficients. Domain is `X_s` without its first letter.
fn jw_explicit(sys: &CoxeterSystem, s: Gen, t: Gen, m: usize) -> Vec<(i128, Vec<(usize, Generator)>)> {
    use Generator::*;
    match m {
        2 => vec![(1, vec![(1, DotIn(s))])],
        3 => vec![
            (1, vec![(2, DotIn(t))]),
            (1, vec![(1, DotOut(s)), (0, Split(t)), (1, DotIn(s))]),
        ],
        4 => vec![
            (1, vec![(3, DotIn(s))]),
            (1, vec![(2, DotOut(t)), (0, Split(t)), (1, DotIn(s))]),
            (
                1,
                vec![(1, DotOut(s)), (0, Merge(t)), (1, DotIn(s)), (1, Split(s)), (2, DotIn(t))],
            ),
            (
                -(sys.cartan(s, t) as i128),
                vec![(1, DotOut(s)), (0, Merge(t)), (0, Split(t)), (1, DotIn(s)), (3, DotIn(s))],
            ),
            (
                -(sys.cartan(t, s) as i128),
                vec![(2, DotOut(t)), (1, Split(s)), (2, DotIn(t))],
            ),
        ],
        _ => vec![],
    }
}

/// Two-colour relations for the ordered pair `(s, t)`.
pub fn verify_two_colour(sys: &CoxeterSystem, s: Gen, t: Gen, report: &mut RelationReport) -> Result<()> {
    use Generator::*;
    let m = braid_m(sys, s, t)?;
    let name = format!("{}{}", sys.labels()[s as usize], sys.labels()[t as usize]);
    let xs = alternating(s, t, m);
    let xt = alternating(t, s, m);
    let braid = gen_matrix(sys, Braid(s, t))?;
    report.push(format!("braid {name}: lattice preserving"), preserves_lattice(sys, &braid));
    let full = (1u64 << m) - 1;
    report.push(format!("braid {name}: top entry 1"), braid.get(full, full) == RatFn::one());
    report.push(
        format!("braid {name}: flip partner"),
        flip(sys, &braid) == gen_matrix(sys, Braid(t, s))?,
    );
    // Two-colour associativity: a trivalent vertex on the last output slides
    // through the braid to the first input.
    let u = xt[m - 1];
    let lhs = seq(sys, &xs, &[(0, Braid(s, t)), (m - 1, Split(u))])?;
    let rhs = seq(sys, &xs, &[(0, Split(s)), (1, Braid(s, t)), (0, Braid(s, t))])?;
    report.push(format!("braid {name}: two-colour associativity"), lhs == rhs);
    // Jones-Wenzl: braid with a dot on the first input.
    let dom = &xs[1..];
    let jw_lhs = seq(sys, dom, &[(0, DotIn(s)), (0, Braid(s, t))])?;
    let explicit = jw_explicit(sys, s, t, m);
    if !explicit.is_empty() {
        let mut sum = StdMatrix::zero(dom.to_vec(), xt.clone(), 1);
        for (c, layers) in explicit {
            sum = sum.add(&seq(sys, dom, &layers)?.scale(c))?;
        }
        report.push(format!("braid {name}: Jones-Wenzl (explicit)"), sum == jw_lhs);
    }
    let diagrams = tl_diagrams(m - 1);
    let mut basis = Vec::with_capacity(diagrams.len());
    for d in &diagrams {
        let layers = tl_to_layers(sys, d, dom, &xt)?;
        basis.push(evaluate(sys, dom, &layers)?);
    }
    let sol = solve_integral_combination(sys, &jw_lhs, &basis);
    report.push(format!("braid {name}: Jones-Wenzl (TL span, integral)"), sol.is_some());
    if let Some(c) = sol {
        report.jones_wenzl.push((name, c));
    }
    Ok(())
}

/// Every one- and two-colour relation for the pair `s, t`.
pub fn verify_relations(sys: &CoxeterSystem, s: Gen, t: Gen) -> Result<RelationReport> {
    let mut report = RelationReport::default();
    verify_one_colour(sys, s, &mut report)?;
    verify_one_colour(sys, t, &mut report)?;
    verify_two_colour(sys, s, t, &mut report)?;
    verify_two_colour(sys, t, s, &mut report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Generator::*;

    fn sys(n: &str) -> CoxeterSystem {
        CoxeterSystem::named(n).unwrap()
    }

    #[test]
    fn generator_shapes() {
        let b = sys("B2");
        assert_eq!(Braid(0, 1).dom(&b).unwrap(), vec![0, 1, 0, 1]);
        assert_eq!(Braid(0, 1).cod(&b).unwrap(), vec![1, 0, 1, 0]);
        let a = sys("A1~");
        assert!(matches!(gen_matrix(&a, Braid(0, 1)), Err(Error::InfiniteBraid(..))));
    }

    #[test]
    fn barbell_and_needle() {
        let b = sys("B2");
        let bar = seq(&b, &[], &[(0, DotIn(0)), (0, DotOut(0))]).unwrap();
        assert_eq!(bar.get(0, 0).to_poly(), Some(Poly::linear(b.root(0))));
        assert!(seq(&b, &[0], &[(0, Split(0)), (0, Merge(0))]).unwrap().is_zero());
    }

    #[test]
    fn commuting_braid_is_permutation() {
        let a = sys("A1xA1");
        let m = gen_matrix(&a, Braid(0, 1)).unwrap();
        assert_eq!(m.nnz(), 4);
        for e in 0..4u64 {
            let swapped = (e & 1) << 1 | e >> 1;
            assert_eq!(m.get(swapped, e), RatFn::one());
        }
    }

    #[test]
    fn identity_composition() {
        let g = sys("G2");
        let m = gen_matrix(&g, Merge(1)).unwrap();
        assert_eq!(compose(&StdMatrix::identity(&[1]), &m).unwrap(), m);
        assert_eq!(compose(&m, &StdMatrix::identity(&[1, 1])).unwrap(), m);
    }

    #[test]
    fn lattice_detects_fractions() {
        let b = sys("B2");
        assert!(preserves_lattice(&b, &gen_matrix(&b, Split(0)).unwrap()));
        let mut bad = StdMatrix::zero(vec![0], vec![0], 0);
        bad.add_entry(0, 0, &RatFn::one());
        assert!(!preserves_lattice(&b, &bad));
    }

    #[test]
    fn tl_counts() {
        assert_eq!(tl_diagrams(1).len(), 1);
        assert_eq!(tl_diagrams(3).len(), 5);
        assert_eq!(tl_diagrams(5).len(), 42);
    }

    #[test]
    fn relations_small() {
        for name in ["A1xA1", "A2", "B2"] {
            let w = sys(name);
            let r = verify_relations(&w, 0, 1).unwrap();
            assert!(r.all_passed(), "{name}: {:?}", r.failures());
        }
    }

    #[test]
    fn relations_g2() {
        let g = sys("G2");
        let r = verify_relations(&g, 0, 1).unwrap();
        assert!(r.all_passed(), "{:?}", r.failures());
        assert_eq!(r.jones_wenzl.len(), 2);
        assert!(r.jones_wenzl.iter().all(|(_, c)| c.len() == 42));
    }

    #[test]
    fn relations_higher_rank_pairs() {
        for name in ["B3", "C3", "D4", "A1~"] {
            let w = sys(name);
            for s in w.gens() {
                for t in w.gens() {
                    if s < t && w.m(s, t).is_some() {
                        let r = verify_relations(&w, s, t).unwrap();
                        assert!(r.all_passed(), "{name} {s}{t}: {:?}", r.failures());
                    }
                }
            }
        }
    }
}
