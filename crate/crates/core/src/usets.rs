//! U-sets. On a flag (B,l) pick a non-degenerate hyperplane Π = P^⊥ through
//! B not containing l. The line σ = ⟨l,P⟩ ∩ Π pairs off the q+1 generators of
//! the cone B^⊥ ∩ Π ∩ Q⁻(5,q): p₂ is the second line of ⟨p₁,σ⟩ on the quadric.
//! Oᵢ is the set of generators of Π meeting pᵢ away from B, U = O₁ ∪ O₂, and
//! v = χ_{O₁} − χ_{O₂} lives on the vertices of X_l.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{HatVector, QuadricTables, Subspace};
use crate::gf::{Fq2, GaloisField, QPoly};
use crate::hermitian::HermitianSurface;
use crate::klein::{perspective_fast, KleinError, RhoTable};
use crate::oval::{check_oval, OvalError};
use crate::rational::{integer_rank, rat_string, ratio};
use crate::report::{all_passed, Check};
use crate::scheme::{multiplicities, projections, scaled_q, Base, SchemeInstance};

#[derive(Debug, Error)]
pub enum UsetError {
    #[error("point {point} is not on generator {line}")]
    NotIncident { point: u32, line: u32 },
    #[error("pole {0} is not a non-singular point of B^⊥ outside l^⊥")]
    BadHyperplane(u32),
    #[error("generator {0} is not on the cone of the hyperplane")]
    NotOnCone(u32),
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("the scheme is not X_l for generator {0}")]
    WrongScheme(u32),
    #[error("generator {0} is not a vertex of X_l")]
    NotAVertex(u32),
    #[error("not a pseudo-oval through l: {0}")]
    NotAPseudoOval(String),
    #[error(transparent)]
    Oval(#[from] OvalError),
    #[error(transparent)]
    Klein(#[from] KleinError),
}

type Result<T> = std::result::Result<T, UsetError>;

/// A singular point on a generator, by ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Flag {
    pub point: u32,
    pub line: u32,
}

impl Flag {
    pub fn new(tables: &QuadricTables, point: u32, line: u32) -> Result<Self> {
        if !tables.generator_points[line as usize].contains(&point) {
            return Err(UsetError::NotIncident { point, line });
        }
        Ok(Self { point, line })
    }
}

/// The q+1 flags on a generator, by point id.
pub fn flags(tables: &QuadricTables, l: u32) -> Vec<Flag> {
    let mut pts = tables.generator_points[l as usize].clone();
    pts.sort_unstable();
    pts.into_iter().map(|point| Flag { point, line: l }).collect()
}

fn check_pole(tables: &QuadricTables, flag: Flag, pole: u32) -> Result<()> {
    let b = &tables.points[flag.point as usize];
    let p = tables.poles.get(pole as usize).ok_or(UsetError::BadHyperplane(pole))?;
    if tables.space.bform(p, b) != 0 || tables.hyperplane_contains(pole, flag.line) {
        return Err(UsetError::BadHyperplane(pole));
    }
    Ok(())
}

/// Poles of the admissible hyperplanes of a flag: non-singular points of
/// B^⊥ ∖ l^⊥.
pub fn flag_poles(tables: &QuadricTables, flag: Flag) -> Vec<u32> {
    (0..tables.poles.len() as u32).filter(|&p| check_pole(tables, flag, p).is_ok()).collect()
}

/// Generators through B inside Π = pole^⊥, sorted.
pub fn cone_generators(tables: &QuadricTables, b: u32, pole: u32) -> Result<Vec<u32>> {
    let p = tables.poles.get(pole as usize).ok_or(UsetError::BadHyperplane(pole))?;
    if tables.space.bform(p, &tables.points[b as usize]) != 0 {
        return Err(UsetError::BadHyperplane(pole));
    }
    let mut out: Vec<u32> =
        tables.point_generators[b as usize].iter().copied().filter(|&g| tables.hyperplane_contains(pole, g)).collect();
    out.sort_unstable();
    Ok(out)
}

/// σ = ⟨l, P⟩ ∩ P^⊥.
pub fn sigma(tables: &QuadricTables, flag: Flag, pole: u32) -> Result<Subspace> {
    check_pole(tables, flag, pole)?;
    let space = &tables.space;
    let p = space.subspace(&[tables.poles[pole as usize]]);
    let s = space.meet(&space.join(tables.generator(flag.line), &p), &space.perp(&p));
    if s.dim() != 2 {
        return Err(UsetError::Degenerate(format!("σ has dimension {}", s.dim())));
    }
    Ok(s)
}

/// The second generator of the plane ⟨p₁, σ⟩.
pub fn partner(tables: &QuadricTables, b: u32, sigma: &Subspace, p1: u32) -> Result<u32> {
    let space = &tables.space;
    let g1 = tables.generator(p1);
    let plane = space.join(g1, sigma);
    if plane.dim() != 3 {
        return Err(UsetError::Degenerate(format!("⟨p₁,σ⟩ has dimension {}", plane.dim())));
    }
    let off: Vec<_> =
        space.points(&plane).into_iter().filter(|v| space.qform(v) == 0 && !space.contains_vec(g1, v)).collect();
    let r = off.first().ok_or_else(|| UsetError::Degenerate("⟨p₁,σ⟩ meets the quadric only in p₁".into()))?;
    let p2 = space.subspace(&[tables.points[b as usize], *r]);
    if off.len() != tables.q() as usize || off.iter().any(|v| !space.contains_vec(&p2, v)) {
        return Err(UsetError::Degenerate("⟨p₁,σ⟩ ∩ Q⁻(5,q) is not a pair of lines".into()));
    }
    tables.generator_id(&p2).ok_or_else(|| UsetError::Degenerate("p₂ is not a generator".into()))
}

/// σ̃ as (g, σ̃(g)) over the cone generators, sorted by g; checked to be a
/// fixed-point-free involution.
pub fn involution(tables: &QuadricTables, flag: Flag, pole: u32) -> Result<Vec<(u32, u32)>> {
    let s = sigma(tables, flag, pole)?;
    let cone = cone_generators(tables, flag.point, pole)?;
    let pairs: Vec<(u32, u32)> =
        cone.iter().map(|&g| partner(tables, flag.point, &s, g).map(|h| (g, h))).collect::<Result<_>>()?;
    let map: BTreeMap<u32, u32> = pairs.iter().copied().collect();
    for &(g, h) in &pairs {
        if g == h || map.get(&h) != Some(&g) {
            return Err(UsetError::Degenerate(format!("σ̃ is not a fixed-point-free involution at {g}")));
        }
    }
    Ok(pairs)
}

/// Generators in pole^⊥ meeting `p` in a point other than B.
fn meeting_off_base(tables: &QuadricTables, b: u32, pole: u32, p: u32) -> Vec<u32> {
    let mut out = BTreeSet::new();
    for &x in &tables.generator_points[p as usize] {
        if x == b {
            continue;
        }
        for &g in &tables.point_generators[x as usize] {
            if g != p && tables.hyperplane_contains(pole, g) {
                out.insert(g);
            }
        }
    }
    out.into_iter().collect()
}

/// U_{p₁,p₂} = O₁ ∪ O₂ with its construction data.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct USet {
    pub flag: Flag,
    pub pole: u32,
    #[serde(skip, default = "Subspace::zero")]
    pub sigma: Subspace,
    pub p1: u32,
    pub p2: u32,
    #[serde(rename = "O1")]
    pub o1: Vec<u32>,
    #[serde(rename = "O2")]
    pub o2: Vec<u32>,
}

impl USet {
    /// Deduplication key: both halves sorted, smaller half first.
    pub fn key(&self) -> (Vec<u32>, Vec<u32>) {
        if self.o1 <= self.o2 {
            (self.o1.clone(), self.o2.clone())
        } else {
            (self.o2.clone(), self.o1.clone())
        }
    }

    /// The same set with p₁ and p₂ exchanged.
    pub fn swapped(&self) -> Self {
        Self { p1: self.p2, p2: self.p1, o1: self.o2.clone(), o2: self.o1.clone(), ..self.clone() }
    }

    pub fn signed(&self) -> SignedVector {
        SignedVector { plus: self.o1.clone(), minus: self.o2.clone() }
    }

    pub fn contains(&self, g: u32) -> bool {
        self.o1.binary_search(&g).is_ok() || self.o2.binary_search(&g).is_ok()
    }
}

pub fn build_uset(tables: &QuadricTables, flag: Flag, pole: u32, p1: u32) -> Result<USet> {
    let s = sigma(tables, flag, pole)?;
    if !cone_generators(tables, flag.point, pole)?.contains(&p1) {
        return Err(UsetError::NotOnCone(p1));
    }
    let p2 = partner(tables, flag.point, &s, p1)?;
    let o1 = meeting_off_base(tables, flag.point, pole, p1);
    let o2 = meeting_off_base(tables, flag.point, pole, p2);
    Ok(USet { flag, pole, sigma: s, p1, p2, o1, o2 })
}

/// v = χ_{O₁} − χ_{O₂} by generator id.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignedVector {
    pub plus: Vec<u32>,
    pub minus: Vec<u32>,
}

impl SignedVector {
    pub fn neg(&self) -> Self {
        Self { plus: self.minus.clone(), minus: self.plus.clone() }
    }

    pub fn get(&self, g: u32) -> i64 {
        if self.plus.binary_search(&g).is_ok() {
            1
        } else if self.minus.binary_search(&g).is_ok() {
            -1
        } else {
            0
        }
    }

    pub fn entries(&self) -> BTreeMap<u32, i8> {
        self.plus.iter().map(|&g| (g, 1)).chain(self.minus.iter().map(|&g| (g, -1))).collect()
    }

    /// Dense vector over the vertices of `s`.
    pub fn dense(&self, s: &SchemeInstance) -> Result<Vec<i64>> {
        let mut v = vec![0i64; s.len()];
        for (g, c) in self.entries() {
            v[s.index_of(g).ok_or(UsetError::NotAVertex(g))?] = c as i64;
        }
        Ok(v)
    }

    /// Exact inner product with the characteristic vector of `ids`.
    pub fn dot_set(&self, ids: &BTreeSet<u32>) -> i64 {
        self.plus.iter().filter(|g| ids.contains(g)).count() as i64
            - self.minus.iter().filter(|g| ids.contains(g)).count() as i64
    }
}

/// One U-set per unordered pair {p₁,p₂} on one flag, p₁ < p₂, ordered by
/// (pole, p₁).
pub fn flag_usets(tables: &QuadricTables, flag: Flag) -> Result<Vec<USet>> {
    let poles = flag_poles(tables, flag);
    let per_pole: Vec<Vec<USet>> = poles.par_iter().map(|&pole| pole_usets(tables, flag, pole)).collect::<Result<_>>()?;
    Ok(per_pole.into_iter().flatten().collect())
}

fn pole_usets(tables: &QuadricTables, flag: Flag, pole: u32) -> Result<Vec<USet>> {
    involution(tables, flag, pole)?
        .into_iter()
        .filter(|&(g, h)| g < h)
        .map(|(g, _)| build_uset(tables, flag, pole, g))
        .collect()
}

/// Every U-set on every flag of `l`.
pub fn line_usets(tables: &QuadricTables, l: u32) -> Result<Vec<USet>> {
    let mut out = Vec::new();
    for f in flags(tables, l) {
        out.extend(flag_usets(tables, f)?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Enumeration {
    pub line: u32,
    pub per_flag: Vec<(Flag, usize)>,
    pub usets: Vec<USet>,
    pub distinct_usets: usize,
    /// V_l: both signs of every U-set, deduplicated and sorted.
    pub vectors: Vec<SignedVector>,
    /// Number of U-sets containing a line of X′ ↦ number of such lines.
    pub membership: BTreeMap<usize, usize>,
}

pub fn enumerate_all(tables: &QuadricTables, l: u32) -> Result<Enumeration> {
    let mut per_flag = Vec::new();
    let mut usets = Vec::new();
    for f in flags(tables, l) {
        let u = flag_usets(tables, f)?;
        per_flag.push((f, u.len()));
        usets.extend(u);
    }
    let distinct_usets = usets.iter().map(USet::key).collect::<BTreeSet<_>>().len();
    let vectors: BTreeSet<SignedVector> = usets.iter().flat_map(|u| [u.signed(), u.signed().neg()]).collect();
    let mut count: BTreeMap<u32, usize> = tables.disjoint_from(l).into_iter().map(|g| (g, 0)).collect();
    for u in &usets {
        for g in u.o1.iter().chain(&u.o2) {
            *count.entry(*g).or_default() += 1;
        }
    }
    let mut membership = BTreeMap::new();
    for c in count.values() {
        *membership.entry(*c).or_default() += 1;
    }
    Ok(Enumeration { line: l, per_flag, usets, distinct_usets, vectors: vectors.into_iter().collect(), membership })
}

/// Closed-form counts: (per flag, per line, |V_l|, U-sets through a line).
pub fn claimed_counts(q: u32) -> (usize, usize, usize, usize) {
    let q = q as usize;
    let per_flag = q.pow(3) * (q - 1) * (q + 1) / 2;
    let per_line = (q + 1) * q.pow(3) * (q * q - 1) / 2;
    let vectors = q.pow(3) * (q - 1) * (q + 1) * (q + 1);
    let through = (q + 1) * (q * q - 1);
    (per_flag, per_line, vectors, through)
}

/// The partition of X′ attached to a U-set.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Part {
    O1,
    O2,
    V,
    J1,
    J2,
    W,
    Z,
}

impl Part {
    pub const ALL: [Part; 7] = [Part::O1, Part::O2, Part::V, Part::J1, Part::J2, Part::W, Part::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    /// The label seen from the other half (O₁ ↔ O₂, J₁ ↔ J₂).
    pub fn swapped(self) -> Self {
        match self {
            Part::O1 => Part::O2,
            Part::O2 => Part::O1,
            Part::J1 => Part::J2,
            Part::J2 => Part::J1,
            p => p,
        }
    }
}

/// Label of a generator `n` disjoint from l, computed from incidences only.
pub fn classify_line(tables: &QuadricTables, u: &USet, n: u32) -> Part {
    let pts = &tables.generator_points[n as usize];
    let meets = |p: u32| tables.generator_points[p as usize].iter().any(|x| pts.contains(x));
    if tables.hyperplane_contains(u.pole, n) {
        return if meets(u.p1) {
            Part::O1
        } else if meets(u.p2) {
            Part::O2
        } else {
            Part::V
        };
    }
    let pole = &tables.poles[u.pole as usize];
    let r = *pts
        .iter()
        .find(|&&x| tables.space.bform(pole, &tables.points[x as usize]) == 0)
        .expect("a line not in a hyperplane meets it in a point");
    if tables.generator_points[u.p1 as usize].contains(&r) {
        Part::J1
    } else if tables.generator_points[u.p2 as usize].contains(&r) {
        Part::J2
    } else if tables.space.bform(&tables.points[r as usize], &tables.points[u.flag.point as usize]) == 0 {
        Part::W
    } else {
        Part::Z
    }
}

pub fn classify_partition(tables: &QuadricTables, u: &USet, vertices: &[u32]) -> Vec<Part> {
    vertices.iter().map(|&n| classify_line(tables, u, n)).collect()
}

/// Coefficients, per class, of χ_{O₁}A_i (i = 1..5), written as the same
/// combinations of j and class indicators as the identities. The A₅ line
/// carries a −χ_V term: without it row sums fail (V would get 1).
pub fn lemma_coefficients(q: u32, i: usize) -> [i64; 7] {
    use Part::*;
    let q = q as i64;
    let mut c = [0i64; 7];
    let mut add = |parts: &[Part], k: i64| {
        for p in parts {
            c[p.index()] += k;
        }
    };
    match i {
        1 => {
            add(&Part::ALL, 1);
            add(&[O1], q - 2);
            add(&[O2, V, J1], q - 1);
            add(&[J2, W], -1);
        }
        2 => {
            add(&Part::ALL, 1);
            add(&[O1], -1);
            add(&[O2, V], -1);
            add(&[J2, W], -1);
            add(&[Z], -1);
        }
        3 => {
            add(&Part::ALL, 1);
            add(&[O1], q * q - q - 1);
            add(&[O2, V], -1);
            add(&[J1], q * q - q - 2);
            add(&[J2, W], q - 1);
            add(&[Z], q - 2);
        }
        4 => {
            add(&Part::ALL, q * q - 1);
            add(&[O1, O2, J1], -(q * q - 1));
            add(&[J2, V], -(q - 1));
            add(&[Z], -2 * (q - 1));
            add(&[W], -(2 * q - 1));
        }
        5 => {
            add(&Part::ALL, 1);
            add(&[O1], -1);
            add(&[O2], q * q - q - 1);
            add(&[J1, J2], -1);
            add(&[W], q - 1);
            add(&[Z], q - 2);
            add(&[V], -1);
        }
        _ => panic!("relation index {i} out of 1..=5"),
    }
    c
}

/// Coefficients of vA_i in terms of v and χ_{J₁} − χ_{J₂}, per class.
pub fn corollary_coefficients(q: u32, i: usize) -> [i64; 7] {
    let q = q as i64;
    // (coefficient of v, coefficient of χ_{J₁} − χ_{J₂})
    let (a, b) = match i {
        1 => (-1, q),
        2 => (0, 1),
        3 => (q * (q - 1), q * q - 2 * q - 1),
        4 => (0, -(q * q - q)),
        5 => (-(q * q - q), 0),
        _ => panic!("relation index {i} out of 1..=5"),
    };
    let mut c = [0i64; 7];
    c[Part::O1.index()] = a;
    c[Part::O2.index()] = -a;
    c[Part::J1.index()] = b;
    c[Part::J2.index()] = -b;
    c
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentityCheck {
    pub class_sizes: [usize; 7],
    /// Labels O₁/O₂ agree with the stored halves.
    pub halves_match: bool,
    /// χ_{O₁}A_i and χ_{O₂}A_i, i = 1..5.
    pub lemma: [bool; 5],
    /// vA_i, i = 1..5.
    pub corollary: [bool; 5],
    /// q⁵vE₁ = q⁴(v + χ_{J₁} − χ_{J₂}), q⁵vE₅ = q⁴((q−1)v − χ_{J₁} + χ_{J₂}),
    /// other vE_j = 0.
    pub projections: bool,
}

impl IdentityCheck {
    pub fn ok(&self) -> bool {
        self.halves_match && self.lemma.iter().all(|&b| b) && self.corollary.iter().all(|&b| b) && self.projections
    }
}

fn require_scheme(s: &SchemeInstance, l: u32) -> Result<()> {
    if s.base() != Base::Generator(l) {
        return Err(UsetError::WrongScheme(l));
    }
    Ok(())
}

/// Checks the vector identities of one U-set against the relations of X_l.
pub fn check_identities(tables: &QuadricTables, s: &SchemeInstance, u: &USet) -> Result<IdentityCheck> {
    require_scheme(s, u.flag.line)?;
    let q = s.q();
    let n = s.len();
    let labels = classify_partition(tables, u, s.vertices());
    let mut class_sizes = [0usize; 7];
    for p in &labels {
        class_sizes[p.index()] += 1;
    }
    let half = |part: Part| -> Vec<u32> { (0..n).filter(|&z| labels[z] == part).map(|z| s.vertex(z)).collect() };
    let halves_match = half(Part::O1) == u.o1 && half(Part::O2) == u.o2;
    let row_counts = |ids: &[u32]| -> Result<Vec<[i64; 6]>> {
        let mut w = vec![[0i64; 6]; n];
        for &g in ids {
            let x = s.index_of(g).ok_or(UsetError::NotAVertex(g))?;
            for (z, &r) in s.row(x).iter().enumerate() {
                w[z][r as usize] += 1;
            }
        }
        Ok(w)
    };
    let w1 = row_counts(&u.o1)?;
    let w2 = row_counts(&u.o2)?;
    let mut lemma = [true; 5];
    let mut corollary = [true; 5];
    for i in 1..=5 {
        let c = lemma_coefficients(q, i);
        let d = corollary_coefficients(q, i);
        for z in 0..n {
            let p = labels[z];
            lemma[i - 1] &= w1[z][i] == c[p.index()] && w2[z][i] == c[p.swapped().index()];
            corollary[i - 1] &= w1[z][i] - w2[z][i] == d[p.index()];
        }
    }
    let v = u.signed().dense(s)?;
    let jd: Vec<i64> = labels
        .iter()
        .map(|p| match p {
            Part::J1 => 1,
            Part::J2 => -1,
            _ => 0,
        })
        .collect();
    let proj = projections(s, &v);
    let (d, _) = scaled_q(q);
    let q = q as i64;
    let projections = (0..n).all(|z| {
        proj[0][z] == 0
            && proj[2][z] == 0
            && proj[3][z] == 0
            && proj[4][z] == 0
            && proj[1][z] == d * q.pow(4) * (v[z] + jd[z])
            && proj[5][z] == d * q.pow(4) * ((q - 1) * v[z] - jd[z])
    });
    Ok(IdentityCheck { class_sizes, halves_match, lemma, corollary, projections })
}

/// Entry of the Gram matrix of V_l's columns on a pair in relation `rel`.
pub fn gram_expected(q: u32, rel: u8) -> i64 {
    let q = q as i64;
    match rel {
        0 => 2 * (q - 1) * (q + 1) * (q + 1),
        1 => -2,
        3 => 2 * q,
        5 => -2 * (q + 1),
        _ => 0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum GramMode {
    Exhaustive,
    Sampled { per_class: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GramReport {
    pub mode: GramMode,
    pub pairs_per_class: [u64; 6],
    pub mismatches: u64,
    /// First few (m, n, computed, expected).
    pub examples: Vec<(u32, u32, i64, i64)>,
}

/// Column Gram matrix of the stacked V_l, compared with
/// 2((q−1)(q+1)²I − A₁ + qA₃ − (q+1)A₅).
pub fn gram_check(s: &SchemeInstance, vectors: &[SignedVector], mode: GramMode) -> Result<GramReport> {
    let n = s.len();
    let mut cols: Vec<Vec<(u32, i8)>> = vec![Vec::new(); n];
    for (k, v) in vectors.iter().enumerate() {
        for (g, c) in v.entries() {
            cols[s.index_of(g).ok_or(UsetError::NotAVertex(g))?].push((k as u32, c));
        }
    }
    let dot = |a: usize, b: usize| -> i64 {
        let (x, y) = (&cols[a], &cols[b]);
        let (mut i, mut j, mut acc) = (0, 0, 0i64);
        while i < x.len() && j < y.len() {
            match x[i].0.cmp(&y[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += (x[i].1 * y[j].1) as i64;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    };
    let pairs: Vec<(usize, usize)> = match mode {
        GramMode::Exhaustive => (0..n).flat_map(|a| (a..n).map(move |b| (a, b))).collect(),
        GramMode::Sampled { per_class, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut chosen: Vec<Vec<(usize, usize)>> = vec![Vec::new(); 6];
            let mut attempts = 0usize;
            while chosen.iter().any(|c| c.len() < per_class) && attempts < 1000 * per_class.max(1) * 6 {
                attempts += 1;
                let a = rng.gen_range(0..n);
                let b = if chosen[0].len() < per_class && attempts % 6 == 0 { a } else { rng.gen_range(0..n) };
                let r = s.rel(a, b) as usize;
                if chosen[r].len() < per_class {
                    chosen[r].push((a, b));
                }
            }
            chosen.into_iter().flatten().collect()
        }
    };
    let results: Vec<(u8, i64)> = pairs.par_iter().map(|&(a, b)| (s.rel(a, b), dot(a, b))).collect();
    let mut pairs_per_class = [0u64; 6];
    let mut mismatches = 0;
    let mut examples = Vec::new();
    for (&(a, b), &(r, g)) in pairs.iter().zip(&results) {
        pairs_per_class[r as usize] += 1;
        let e = gram_expected(s.q(), r);
        if g != e {
            mismatches += 1;
            if examples.len() < 10 {
                examples.push((s.vertex(a), s.vertex(b), g, e));
            }
        }
    }
    Ok(GramReport { mode, pairs_per_class, mismatches, examples })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub q: u32,
    pub vectors: usize,
    /// Vectors whose dual degree set is exactly {1,5}.
    pub dual_degree_15: usize,
    pub gram: GramReport,
    pub rank: usize,
    pub rank_method: String,
    pub m1_plus_m5: String,
    /// q³(q−1)(q+1)², the value given for both |V_l| and dim(V₁ ⊥ V₅).
    pub size_formula: usize,
    pub size_matches_formula: bool,
    pub dimension_matches_formula: bool,
    pub checks: Vec<Check>,
    pub ok: bool,
}

pub fn spectral_suite(s: &SchemeInstance, vectors: &[SignedVector], gram: GramMode) -> Result<SpectralReport> {
    let q = s.q();
    let dense: Vec<Vec<i64>> = vectors.iter().map(|v| v.dense(s)).collect::<Result<_>>()?;
    let dual_degree_15 = dense
        .par_iter()
        .filter(|v| {
            let p = projections(s, v);
            (0..6).all(|j| p[j].iter().any(|&x| x != 0) == (j == 1 || j == 5))
        })
        .count();
    let gram = gram_check(s, vectors, gram)?;
    let rank = integer_rank(&dense);
    let m = multiplicities(q);
    let m15 = &m[1] + &m[5];
    let (_, _, size_formula, _) = claimed_counts(q);
    let size_matches_formula = vectors.len() == size_formula;
    let dimension_matches_formula = m15 == ratio(size_formula as i64, 1);
    let checks = vec![
        Check::new("dual-degree", "every v in V_l has dual degree set {1,5}", dual_degree_15 == vectors.len())
            .with_detail(format!("{dual_degree_15}/{}", vectors.len())),
        Check::new("gram", "column Gram matrix = 2((q−1)(q+1)²I − A₁ + qA₃ − (q+1)A₅)", gram.mismatches == 0)
            .with_detail(format!("pairs per class {:?}", gram.pairs_per_class)),
        Check::new("span", "rank ⟨V_l⟩ = m₁ + m₅", ratio(rank as i64, 1) == m15)
            .with_detail(format!("rank {rank}, m₁+m₅ = {}", rat_string(&m15))),
        Check::new("size", "|V_l| = q³(q−1)(q+1)²", size_matches_formula)
            .with_detail(format!("|V_l| = {}, formula {size_formula}", vectors.len())),
    ];
    let ok = all_passed(&checks);
    Ok(SpectralReport {
        q,
        vectors: vectors.len(),
        dual_degree_15,
        gram,
        rank,
        rank_method: "fraction-free Gaussian elimination over Z".into(),
        m1_plus_m5: rat_string(&m15),
        size_formula,
        size_matches_formula,
        dimension_matches_formula,
        checks,
        ok,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MeetCounts {
    /// |U ∩ (S∖{l})| ↦ number of U-sets.
    pub histogram: BTreeMap<usize, usize>,
    pub sum_mu: u64,
    pub expected_sum_mu: u64,
    pub pair_sum: u64,
    /// Σμ(μ−1) / (q²(q²−1)).
    pub average: String,
    pub average_is_q_plus_1: bool,
    pub zero_or_two: bool,
}

/// Meet counts of every U-set of `l` with S∖{l}.
pub fn uset_meet_counts(tables: &QuadricTables, usets: &[USet], l: u32, s: &[u32]) -> Result<MeetCounts> {
    if !s.contains(&l) {
        return Err(UsetError::NotAPseudoOval(format!("generator {l} is not a member")));
    }
    let report = check_oval(tables, s, false)?;
    if !report.ok {
        return Err(UsetError::NotAPseudoOval(format!("{report:?}")));
    }
    if let Some(u) = usets.iter().find(|u| u.flag.line != l) {
        return Err(UsetError::WrongScheme(u.flag.line));
    }
    let rest: Vec<u32> = s.iter().copied().filter(|&g| g != l).collect();
    let q = tables.q() as u64;
    let mut histogram = BTreeMap::new();
    let (mut sum_mu, mut pair_sum) = (0u64, 0u64);
    for u in usets {
        let mu = rest.iter().filter(|&&g| u.contains(g)).count();
        *histogram.entry(mu).or_default() += 1;
        sum_mu += mu as u64;
        pair_sum += (mu * mu.saturating_sub(1)) as u64;
    }
    let avg = ratio(pair_sum as i64, (q * q * (q * q - 1)) as i64);
    Ok(MeetCounts {
        zero_or_two: histogram.keys().all(|&k| k == 0 || k == 2),
        histogram,
        sum_mu,
        expected_sum_mu: q * q * (q + 1) * (q * q - 1),
        pair_sum,
        average_is_q_plus_1: avg == ratio(q as i64 + 1, 1),
        average: rat_string(&avg),
    })
}

/// The criterion through a flag (B,l): with Π = ⟨B,m,n⟩ and pᵢ the
/// generators on B meeting m and n, is p₂ = σ̃(p₁)?
pub fn sigma_correspondence(tables: &QuadricTables, b: u32, l: u32, m: u32, n: u32) -> Result<bool> {
    let space = &tables.space;
    let flag = Flag::new(tables, b, l)?;
    let bv = tables.points[b as usize];
    let bsub = space.subspace(&[bv]);
    let pi = space.span(&[bsub, *tables.generator(m), *tables.generator(n)]);
    if pi.dim() != 5 {
        return Err(UsetError::Degenerate(format!("⟨B,m,n⟩ has dimension {}", pi.dim())));
    }
    let perp = space.perp(&pi);
    let pole = tables
        .pole_id(&perp.basis()[0])
        .ok_or_else(|| UsetError::Degenerate("⟨B,m,n⟩ is a tangent hyperplane".into()))?;
    let bperp = space.perp(&bsub);
    let through_b = |g: u32| -> Result<u32> {
        let x = space.meet(tables.generator(g), &bperp);
        if x.dim() != 1 {
            return Err(UsetError::Degenerate(format!("generator {g} meets B^⊥ in dimension {}", x.dim())));
        }
        tables
            .generator_id(&space.subspace(&[bv, x.basis()[0]]))
            .ok_or_else(|| UsetError::Degenerate("no generator through B".into()))
    };
    let p1 = through_b(m)?;
    let p2 = through_b(n)?;
    let s = sigma(tables, flag, pole)?;
    Ok(partner(tables, b, &s, p1)? == p2)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BridgeReport {
    pub triples: u64,
    pub evaluations: u64,
    /// σ̃-criterion differs from the z-based perspective test.
    pub disagreements: u64,
    /// Triples where the criterion depends on the choice of B ∈ l.
    pub flag_dependent: u64,
    /// The z-based test differs from relation R′₅ of X_l.
    pub relation_disagreements: u64,
}

/// Every spanning triple (l,m,n) with m,n ∈ X′, every B ∈ l.
pub fn perspective_bridge(
    tables: &QuadricTables,
    s: &SchemeInstance,
    surface: &HermitianSurface,
    rho: &RhoTable,
) -> Result<BridgeReport> {
    let Base::Generator(l) = s.base() else { return Err(UsetError::WrongScheme(u32::MAX)) };
    let n = s.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|&(a, b)| s.rel(a, b) >= 4).collect();
    let pts = flags(tables, l);
    let rows: Vec<(u64, u64, u64)> = pairs
        .par_iter()
        .map(|&(a, b)| -> Result<(u64, u64, u64)> {
            let (m, k) = (s.vertex(a), s.vertex(b));
            let expected = perspective_fast(tables, rho, surface, [l, m, k])?;
            let got: Vec<bool> =
                pts.iter().map(|f| sigma_correspondence(tables, f.point, l, m, k)).collect::<Result<_>>()?;
            let dis = got.iter().filter(|&&g| g != expected).count() as u64;
            let dep = u64::from(got.iter().any(|&g| g != got[0]));
            let rel = u64::from(expected != (s.rel(a, b) == 5));
            Ok((dis, dep, rel))
        })
        .collect::<Result<_>>()?;
    Ok(BridgeReport {
        triples: pairs.len() as u64,
        evaluations: (pairs.len() * pts.len()) as u64,
        disagreements: rows.iter().map(|r| r.0).sum(),
        flag_dependent: rows.iter().map(|r| r.1).sum(),
        relation_disagreements: rows.iter().map(|r| r.2).sum(),
    })
}

/// Standard position: B = ⟨(1,0,0)₂⟩, l = L(I,0,0) and the hyperplane with
/// pole ⟨(α,β,θ)₂⟩.
pub mod standard {
    use super::*;

    /// N(β) − θ(α^q − α) ≠ 0, i.e. the pole is non-singular.
    pub fn admissible(gf: &GaloisField, alpha: Fq2, beta: Fq2) -> bool {
        pole_value(gf, alpha, beta) != gf.zero()
    }

    fn pole_value(gf: &GaloisField, alpha: Fq2, beta: Fq2) -> Fq2 {
        gf.sub(gf.embed(gf.norm(beta)), gf.mul(gf.theta(), gf.sub(gf.frob(alpha), alpha)))
    }

    pub fn pole(gf: &GaloisField, alpha: Fq2, beta: Fq2) -> HatVector {
        HatVector::new(alpha, beta, gf.theta())
    }

    /// Left side of the cone equation y^{q+1} − (β^qy + βy^q) + θ(α^q − α).
    pub fn cone_equation(gf: &GaloisField, alpha: Fq2, beta: Fq2, y: Fq2) -> Fq2 {
        let lin = gf.add(gf.mul(gf.frob(beta), y), gf.mul(beta, gf.frob(y)));
        gf.add(gf.sub(gf.embed(gf.norm(y)), lin), gf.mul(gf.theta(), gf.sub(gf.frob(alpha), alpha)))
    }

    /// Parameters y of the cone generators l_y.
    pub fn cone_parameters(gf: &GaloisField, alpha: Fq2, beta: Fq2) -> Vec<Fq2> {
        gf.elements().filter(|&y| cone_equation(gf, alpha, beta, y) == gf.zero()).collect()
    }

    /// l_y = L((2ξ − y^{q+1})x + (2ξ + y^{q+1})x^q, 2θy(x − x^q), 2ξ(x − x^q)).
    pub fn cone_line(gf: &GaloisField, y: Fq2) -> [QPoly; 3] {
        let xi2 = gf.embed(gf.base().mul(gf.xi(), gf.base().elem(2)));
        let ny = gf.embed(gf.norm(y));
        let ty = gf.mul(gf.mul(gf.int(2), gf.theta()), y);
        [QPoly::new(gf.sub(xi2, ny), gf.add(xi2, ny)), QPoly::new(ty, gf.neg(ty)), QPoly::new(xi2, gf.neg(xi2))]
    }

    /// σ = L((2β^{q+1}/θ + α − 2α^q)x − αx^q, −β(x + x^q), −θ(x + x^q)). At
    /// x = 1 this is a multiple of (α^q − β^{q+1}/θ, β, θ) modulo B, which
    /// lies on ⟨l,P⟩ ∩ P^⊥.
    pub fn sigma_line(gf: &GaloisField, alpha: Fq2, beta: Fq2) -> [QPoly; 3] {
        let nb = gf.embed(gf.norm(beta));
        let two = gf.int(2);
        let a = gf.sub(gf.add(gf.div(gf.mul(two, nb), gf.theta()).expect("θ ≠ 0"), alpha), gf.mul(two, gf.frob(alpha)));
        let nbeta = gf.neg(beta);
        let nt = gf.neg(gf.theta());
        [QPoly::new(a, gf.neg(alpha)), QPoly::new(nbeta, nbeta), QPoly::new(nt, nt)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::HatVector;
    use crate::klein::{standard_pair, GenLine};
    use crate::oval::{pseudo_conic, Context};
    use std::sync::OnceLock;

    struct Fixture {
        ctx: Context,
        l: u32,
        scheme: SchemeInstance,
        all: Enumeration,
    }

    fn q3() -> &'static Fixture {
        static F: OnceLock<Fixture> = OnceLock::new();
        F.get_or_init(|| {
            let ctx = Context::new(&GaloisField::new(3).unwrap()).unwrap();
            let l = pseudo_conic(&ctx.surface, &ctx.rho).unwrap()[0];
            let scheme = SchemeInstance::on_generator(&ctx.tables, l);
            let all = enumerate_all(&ctx.tables, l).unwrap();
            Fixture { ctx, l, scheme, all }
        })
    }

    fn standard_ids(t: &QuadricTables) -> (u32, u32) {
        let gf = t.field();
        let b = t.point_id(&t.space.to_coords(&HatVector::new(gf.one(), gf.zero(), gf.zero()))).unwrap();
        let l = t.generator_id(&GenLine::raw_subspace(&t.space, &standard_pair(gf).0)).unwrap();
        (b, l)
    }

    fn standard_oracle(q: u32, stride: usize) {
        let t = QuadricTables::build(&GaloisField::new(q).unwrap()).unwrap();
        let gf = t.field().clone();
        let (b, l) = standard_ids(&t);
        let flag = Flag::new(&t, b, l).unwrap();
        let elems: Vec<Fq2> = gf.elements().collect();
        let mut seen = 0;
        for (k, (&alpha, &beta)) in elems.iter().flat_map(|a| elems.iter().map(move |b| (a, b))).enumerate() {
            if k % stride != 0 || !standard::admissible(&gf, alpha, beta) {
                continue;
            }
            seen += 1;
            let pole = t.pole_id(&t.space.to_coords(&standard::pole(&gf, alpha, beta))).unwrap();
            let ys = standard::cone_parameters(&gf, alpha, beta);
            assert_eq!(ys.len(), q as usize + 1);
            assert!(!ys.contains(&beta));
            let id_of = |y: Fq2| t.generator_id(&GenLine::raw_subspace(&t.space, &standard::cone_line(&gf, y))).unwrap();
            let mut closed: Vec<u32> = ys.iter().map(|&y| id_of(y)).collect();
            closed.sort_unstable();
            assert_eq!(cone_generators(&t, b, pole).unwrap(), closed);
            let s = sigma(&t, flag, pole).unwrap();
            assert_eq!(s, GenLine::raw_subspace(&t.space, &standard::sigma_line(&gf, alpha, beta)));
            let pairing = involution(&t, flag, pole).unwrap();
            for &y in &ys {
                let y2 = gf.sub(gf.mul(gf.int(2), beta), y);
                assert!(pairing.contains(&(id_of(y), id_of(y2))));
            }
            // every non-singular point of ⟨B, P⟩ gives the same σ and pairing
            for lam in gf.base().elements() {
                let a2 = gf.add(alpha, gf.embed(lam));
                let p2 = t.pole_id(&t.space.to_coords(&standard::pole(&gf, a2, beta))).unwrap();
                assert_eq!(sigma(&t, flag, p2).unwrap(), s);
                assert_eq!(involution(&t, flag, p2).unwrap(), pairing);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn standard_position_q3() {
        standard_oracle(3, 1);
    }

    #[test]
    fn standard_position_q5_sampled() {
        standard_oracle(5, 7);
    }

    #[test]
    fn flag_rejects_foreign_point() {
        let f = q3();
        let t = &f.ctx.tables;
        let off = (0..t.points.len() as u32).find(|p| !t.generator_points[f.l as usize].contains(p)).unwrap();
        assert!(matches!(Flag::new(t, off, f.l), Err(UsetError::NotIncident { .. })));
        let flag = flags(t, f.l)[0];
        let bad = (0..t.poles.len() as u32).find(|&p| t.hyperplane_contains(p, f.l)).unwrap();
        assert!(matches!(sigma(t, flag, bad), Err(UsetError::BadHyperplane(_))));
    }

    #[test]
    fn uset_invariants_q3() {
        let f = q3();
        let t = &f.ctx.tables;
        let flag = flags(t, f.l)[1];
        let poles = flag_poles(t, flag);
        assert_eq!(poles.len(), 54);
        for &pole in poles.iter().take(10) {
            let cone = cone_generators(t, flag.point, pole).unwrap();
            assert_eq!(cone.len(), 4);
            for &p1 in &cone {
                let u = build_uset(t, flag, pole, p1).unwrap();
                assert_eq!((u.o1.len(), u.o2.len()), (9, 9));
                assert!(u.o1.iter().all(|g| !u.o2.contains(g)));
                assert!(u.o1.iter().chain(&u.o2).all(|&g| t.disjoint(g, f.l)));
                assert_eq!(build_uset(t, flag, pole, u.p2).unwrap(), u.swapped());
                assert_eq!(u.swapped().signed(), u.signed().neg());
            }
        }
    }

    #[test]
    fn counts_q3() {
        let f = q3();
        let (per_flag, per_line, vectors, through) = claimed_counts(3);
        assert_eq!((per_flag, per_line, vectors, through), (108, 432, 864, 32));
        assert!(f.all.per_flag.iter().all(|&(_, c)| c == per_flag));
        assert_eq!(f.all.usets.len(), per_line);
        assert_eq!(f.all.distinct_usets, per_line);
        assert_eq!(f.all.vectors.len(), vectors);
        assert_eq!(f.all.membership, BTreeMap::from([(32, 243)]));
    }

    #[test]
    fn identities_hold_for_every_uset_q3() {
        let f = q3();
        let sizes = f
            .all
            .usets
            .par_iter()
            .map(|u| {
                let c = check_identities(&f.ctx.tables, &f.scheme, u).unwrap();
                assert!(c.ok(), "{c:?}");
                c.class_sizes
            })
            .collect::<BTreeSet<_>>();
        assert_eq!(sizes, BTreeSet::from([[9, 9, 18, 18, 18, 36, 135]]));
    }

    #[test]
    fn a5_without_v_term_fails_row_sums() {
        // the coefficients over the seven classes of χ_{O₁}(I + A₁ + … + A₅)
        // must all equal |O₁| = q²
        for q in [3u32, 5, 7] {
            let mut col = [0i64; 7];
            col[Part::O1.index()] = 1;
            for i in 1..=5 {
                for (k, c) in lemma_coefficients(q, i).iter().enumerate() {
                    col[k] += c;
                }
            }
            assert_eq!(col, [(q * q) as i64; 7]);
            let mut wrong = col;
            wrong[Part::V.index()] += 1;
            assert_ne!(wrong, col);
        }
    }

    #[test]
    fn corollary_follows_from_lemma() {
        for q in [3u32, 5, 7, 11] {
            for i in 1..=5 {
                let c = lemma_coefficients(q, i);
                let d = corollary_coefficients(q, i);
                for p in Part::ALL {
                    assert_eq!(c[p.index()] - c[p.swapped().index()], d[p.index()], "q={q} i={i} {p:?}");
                }
            }
        }
    }

    #[test]
    fn spectral_suite_q3() {
        let f = q3();
        let r = spectral_suite(&f.scheme, &f.all.vectors, GramMode::Exhaustive).unwrap();
        assert_eq!(r.dual_degree_15, 864);
        assert_eq!(r.gram.mismatches, 0);
        assert!(r.gram.pairs_per_class.iter().all(|&c| c >= 100), "{:?}", r.gram.pairs_per_class);
        assert_eq!(r.rank, 104);
        assert_eq!(r.m1_plus_m5, "104");
        assert!(r.size_matches_formula);
        assert!(!r.dimension_matches_formula);
        assert!(r.ok);
        assert_eq!(gram_expected(3, 0), 64);
        assert_eq!(gram_expected(3, 1), -2);
    }

    #[test]
    fn sampled_gram_covers_every_class() {
        let f = q3();
        let r = gram_check(&f.scheme, &f.all.vectors, GramMode::Sampled { per_class: 120, seed: 7 }).unwrap();
        assert_eq!(r.pairs_per_class, [120; 6]);
        assert_eq!(r.mismatches, 0);
    }

    #[test]
    fn pseudo_conic_meets_usets_in_zero_or_two() {
        let f = q3();
        let s = pseudo_conic(&f.ctx.surface, &f.ctx.rho).unwrap();
        let m = uset_meet_counts(&f.ctx.tables, &f.all.usets, f.l, &s).unwrap();
        assert!(m.zero_or_two);
        assert!(m.average_is_q_plus_1);
        assert_eq!(m.average, "4");
        assert_eq!(m.sum_mu, m.expected_sum_mu);
        assert_eq!(m.sum_mu, 9 * 4 * 8);
        let members: BTreeSet<u32> = s.iter().copied().filter(|&g| g != f.l).collect();
        assert!(f.all.vectors.iter().all(|v| v.dot_set(&members) == 0));
    }

    #[test]
    fn meet_counts_reject_non_ovals() {
        let f = q3();
        let mut s = pseudo_conic(&f.ctx.surface, &f.ctx.rho).unwrap();
        s.pop();
        assert!(matches!(
            uset_meet_counts(&f.ctx.tables, &f.all.usets, f.l, &s),
            Err(UsetError::NotAPseudoOval(_))
        ));
    }

    #[test]
    fn perspective_bridge_q3() {
        let f = q3();
        let r = perspective_bridge(&f.ctx.tables, &f.scheme, &f.ctx.surface, &f.ctx.rho).unwrap();
        assert_eq!(r.triples, 243 * (96 + 48) / 2);
        assert_eq!(r.evaluations, r.triples * 4);
        assert_eq!(r.disagreements, 0);
        assert_eq!(r.flag_dependent, 0);
        assert_eq!(r.relation_disagreements, 0);
    }

    #[test]
    fn dump_round_trip() {
        let f = q3();
        let u = &f.all.usets[5];
        let text = serde_json::to_string(u).unwrap();
        assert!(text.contains("\"O1\"") && text.contains("\"pole\""));
        let back: USet = serde_json::from_str(&text).unwrap();
        assert_eq!((back.o1.clone(), back.o2.clone(), back.flag), (u.o1.clone(), u.o2.clone(), u.flag));
    }
}
