//! The five-class association scheme X_P on the points of H(3,q²) not
//! collinear with a fixed point P, its twin X_l on the generators of
//! Q⁻(5,q) disjoint from a fixed generator l, and the exact eigen-machinery.
//!
//! Relations are numbered 0..=5 and resolved in this order: equal, collinear
//! (concurrent), on the hyperbolic line ⟨P,Q⟩ (dim⟨l,m,n⟩ = 4), z = t
//! (disjoint with dim 5), z ∈ Γ (spanning, not in perspective), z = e
//! (spanning, in perspective). Points of ⟨P,Q⟩ also have z = t, so the order
//! matters.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{HatSpace, QuadricTables, Subspace};
use crate::gf::{Fq2, GaloisField};
use crate::hermitian::{classify_product, herm, normalize, HVec, HermitianSurface, ZClass};
use crate::klein::{perspective_classify, Perspective, RhoTable};
use crate::linalg;
use crate::rational::{common_denominator, rat, rat_string, ratio, Rat, RationalMatrix};
use crate::report::{all_passed, Check};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemeError {
    #[error("not a vertex of the scheme: {0}")]
    NotAVertex(String),
    #[error("operation needs a scheme on {0}")]
    WrongBase(&'static str),
    #[error("empty vertex subset")]
    EmptySet,
}

/// The fixed object the scheme is built around.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "id")]
pub enum Base {
    /// Point id in [`HermitianSurface::points`].
    Point(u32),
    /// Generator id in [`QuadricTables::generators`].
    Generator(u32),
}

/// p_ij^k stored as `l[i][k][j]`, i.e. six intersection matrices L₀..L₅ whose
/// (k,j) entry is p_ij^k.
pub type Structure = [[[i64; 6]; 6]; 6];

/// Counts #{z : rel(x,z)=i, rel(z,y)=j} for one pair, indexed `[i][j]`.
type Table = [[u32; 6]; 6];

#[derive(Clone, Debug)]
pub struct SchemeInstance {
    q: u32,
    base: Base,
    vertices: Vec<u32>,
    index: HashMap<u32, usize>,
    rel: Vec<u8>,
}

impl SchemeInstance {
    /// X_P: points of H(3,q²) not collinear with the point `p`.
    pub fn on_point(surface: &HermitianSurface, p: u32) -> Self {
        let gf = surface.field();
        let pv = *surface.point(p);
        let vertices: Vec<u32> =
            (0..surface.len() as u32).filter(|&i| herm(gf, surface.point(i), &pv) != gf.zero()).collect();
        let pts: Vec<HVec> = vertices.iter().map(|&i| *surface.point(i)).collect();
        // Q/h(Q,P) reduced modulo P names the hyperbolic line ⟨P,Q⟩
        let piv = pv.iter().position(|&c| c != gf.zero()).expect("non-zero point");
        let keys: Vec<HVec> = pts
            .iter()
            .map(|qv| {
                let s = gf.inv(herm(gf, qv, &pv)).expect("non-collinear");
                let mut v = qv.map(|c| gf.mul(c, s));
                let c = gf.div(v[piv], pv[piv]).expect("pivot");
                for k in 0..4 {
                    v[k] = gf.sub(v[k], gf.mul(c, pv[k]));
                }
                v
            })
            .collect();
        let hpq: Vec<Fq2> = pts.iter().map(|qv| herm(gf, &pv, qv)).collect();
        let hqp: Vec<Fq2> = pts.iter().map(|qv| herm(gf, qv, &pv)).collect();
        let n = pts.len();
        let mut rel = vec![0u8; n * n];
        rel.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = herm(gf, &pts[i], &pts[j]);
                row[j] = if w == gf.zero() {
                    1
                } else if keys[i] == keys[j] {
                    2
                } else {
                    z_relation(classify_product(gf, gf.mul(gf.mul(hpq[i], w), hqp[j])))
                };
            }
        });
        Self::assemble(gf.q(), Base::Point(p), vertices, rel)
    }

    /// X_l: generators of Q⁻(5,q) disjoint from the generator `l`.
    pub fn on_generator(tables: &QuadricTables, l: u32) -> Self {
        let space = &tables.space;
        let vertices = tables.disjoint_from(l);
        let lsub = *tables.generator(l);
        let gens: Vec<Subspace> = vertices.iter().map(|&m| *tables.generator(m)).collect();
        let n = gens.len();
        let upper: Vec<Vec<u8>> = (0..n)
            .into_par_iter()
            .map(|i| (i + 1..n).map(|j| classify_disjoint(space, &lsub, &gens[i], &gens[j])).collect())
            .collect();
        let mut rel = vec![0u8; n * n];
        for (i, row) in upper.iter().enumerate() {
            for (o, &r) in row.iter().enumerate() {
                let j = i + 1 + o;
                rel[i * n + j] = r;
                rel[j * n + i] = r;
            }
        }
        Self::assemble(tables.q(), Base::Generator(l), vertices, rel)
    }

    fn assemble(q: u32, base: Base, vertices: Vec<u32>, rel: Vec<u8>) -> Self {
        let index = vertices.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        SchemeInstance { q, base, vertices, index, rel }
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn base(&self) -> Base {
        self.base
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Canonical ids (point or generator ids), in increasing order.
    pub fn vertices(&self) -> &[u32] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> u32 {
        self.vertices[i]
    }

    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.index.get(&id).copied()
    }

    #[inline]
    pub fn rel(&self, i: usize, j: usize) -> u8 {
        self.rel[i * self.vertices.len() + j]
    }

    pub fn row(&self, i: usize) -> &[u8] {
        let n = self.vertices.len();
        &self.rel[i * n..(i + 1) * n]
    }

    /// Diagonal is 0, nothing else is, and the relation matrix is symmetric.
    pub fn is_symmetric(&self) -> bool {
        let n = self.len();
        (0..n).all(|i| (0..n).all(|j| (self.rel(i, j) == 0) == (i == j) && self.rel(i, j) == self.rel(j, i)))
    }

    pub fn row_counts(&self, i: usize) -> [u64; 6] {
        let mut c = [0u64; 6];
        for &r in self.row(i) {
            c[r as usize] += 1;
        }
        c
    }

    /// Relation sizes seen from every vertex, if they agree.
    pub fn valencies(&self) -> Option<[u64; 6]> {
        let first = self.row_counts(0);
        (1..self.len()).all(|i| self.row_counts(i) == first).then_some(first)
    }

    pub fn bitsets(&self) -> RelationBitsets {
        RelationBitsets::new(self)
    }
}

fn z_relation(z: ZClass) -> u8 {
    match z {
        ZClass::Zero => 1,
        ZClass::T => 3,
        ZClass::Gamma(_) => 4,
        ZClass::E => 5,
    }
}

fn classify_disjoint(space: &HatSpace, l: &Subspace, m: &Subspace, n: &Subspace) -> u8 {
    if m == n {
        return 0;
    }
    if space.meet(m, n).dim() > 0 {
        return 1;
    }
    match space.span(&[*l, *m, *n]).dim() {
        4 => 2,
        5 => 3,
        _ => match perspective_classify(space, [l, m, n]) {
            Ok(Perspective::Perspective) => 5,
            _ => 4,
        },
    }
}

/// Reference classifier for X_P from raw coordinates.
pub fn classify_points(gf: &GaloisField, p: &HVec, q: &HVec, r: &HVec) -> Result<u8, SchemeError> {
    for v in [q, r] {
        if herm(gf, v, v) != gf.zero() || herm(gf, p, v) == gf.zero() {
            return Err(SchemeError::NotAVertex(format!("{v:?}")));
        }
    }
    if normalize(gf, q) == normalize(gf, r) {
        return Ok(0);
    }
    if herm(gf, q, r) == gf.zero() {
        return Ok(1);
    }
    if linalg::rank(gf, &[p.to_vec(), q.to_vec(), r.to_vec()]) == 2 {
        return Ok(2);
    }
    Ok(z_relation(crate::hermitian::zclass(gf, p, q, r)))
}

/// Reference classifier for X_l from subspaces.
pub fn classify_generators(space: &HatSpace, l: &Subspace, m: &Subspace, n: &Subspace) -> Result<u8, SchemeError> {
    for v in [m, n] {
        if v.dim() != 2 || !space.is_totally_singular(v) || space.meet(l, v).dim() != 0 {
            return Err(SchemeError::NotAVertex(format!("{v:?}")));
        }
    }
    Ok(classify_disjoint(space, l, m, n))
}

/// Per-vertex, per-relation membership bitmaps.
pub struct RelationBitsets {
    words: usize,
    bits: Vec<u64>,
    sizes: Vec<[u32; 6]>,
}

impl RelationBitsets {
    fn new(s: &SchemeInstance) -> Self {
        let n = s.len();
        let words = n.div_ceil(64);
        let mut bits = vec![0u64; n * 6 * words];
        let mut sizes = vec![[0u32; 6]; n];
        for x in 0..n {
            for (z, &r) in s.row(x).iter().enumerate() {
                bits[(x * 6 + r as usize) * words + z / 64] |= 1 << (z % 64);
                sizes[x][r as usize] += 1;
            }
        }
        RelationBitsets { words, bits, sizes }
    }

    pub fn set(&self, x: usize, i: usize) -> &[u64] {
        let o = (x * 6 + i) * self.words;
        &self.bits[o..o + self.words]
    }

    pub fn size(&self, x: usize, i: usize) -> u32 {
        self.sizes[x][i]
    }
}

#[inline(always)]
fn and_count(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

/// Fills the 6×6 table of a pair from 16 popcounts and the row/column sums.
#[inline(always)]
fn bitset_table(bs: &RelationBitsets, x: usize, y: usize, k: usize) -> Table {
    let mut t = [[0u32; 6]; 6];
    t[0][k] = 1;
    t[k][0] += u32::from(k != 0);
    for i in 1..5 {
        let a = bs.set(x, i);
        for j in 1..5 {
            t[i][j] = and_count(a, bs.set(y, j));
        }
    }
    for i in 0..5 {
        let row: u32 = t[i][..5].iter().sum();
        t[i][5] = bs.size(x, i) - row;
    }
    for j in 0..6 {
        let col: u32 = (0..5).map(|i| t[i][j]).sum();
        t[5][j] = bs.size(y, j) - col;
    }
    t
}

type ClassTables = Vec<BTreeMap<Table, u64>>;

#[inline(always)]
fn exhaustive_row(s: &SchemeInstance, bs: &RelationBitsets, x: usize) -> ClassTables {
    let mut out: ClassTables = vec![BTreeMap::new(); 6];
    for y in x..s.len() {
        let k = s.rel(x, y) as usize;
        let t = bitset_table(bs, x, y, k);
        *out[k].entry(t).or_default() += 1;
        if y != x {
            *out[k].entry(transpose(&t)).or_default() += 1;
        }
    }
    out
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt")]
unsafe fn exhaustive_row_popcnt(s: &SchemeInstance, bs: &RelationBitsets, x: usize) -> ClassTables {
    exhaustive_row(s, bs, x)
}

fn exhaustive_row_dispatch(s: &SchemeInstance, bs: &RelationBitsets, x: usize) -> ClassTables {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("popcnt") {
        // SAFETY: the CPU supports popcnt
        return unsafe { exhaustive_row_popcnt(s, bs, x) };
    }
    exhaustive_row(s, bs, x)
}

fn transpose(t: &Table) -> Table {
    let mut u = [[0u32; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            u[i][j] = t[j][i];
        }
    }
    u
}

fn direct_table(s: &SchemeInstance, x: usize, y: usize) -> Table {
    let mut t = [[0u32; 6]; 6];
    for z in 0..s.len() {
        t[s.rel(x, z) as usize][s.rel(z, y) as usize] += 1;
    }
    t
}

fn merge(mut a: ClassTables, b: ClassTables) -> ClassTables {
    for (ma, mb) in a.iter_mut().zip(b) {
        for (t, c) in mb {
            *ma.entry(t).or_default() += c;
        }
    }
    a
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckMode {
    /// Every ordered pair of vertices.
    Exhaustive,
    /// Seeded random pairs, `per_class` from each relation.
    Sampled { per_class: usize, seed: u64 },
}

#[derive(Clone, Debug, Serialize)]
pub struct IntersectionReport {
    pub mode: CheckMode,
    pub pairs_checked: [u64; 6],
    /// Every tested pair of the same relation produced the same counts.
    pub well_defined: bool,
    /// L₀..L₅ with (k,j) entry p_ij^k, from the most frequent table per class.
    pub computed: Vec<Vec<Vec<i64>>>,
    pub claimed: Vec<Vec<Vec<i64>>>,
    pub deviations: Vec<String>,
    pub ok: bool,
}

impl IntersectionReport {
    /// The computed structure constants, if they are well defined.
    pub fn structure(&self) -> Option<Structure> {
        if !self.well_defined {
            return None;
        }
        let mut s = [[[0i64; 6]; 6]; 6];
        for i in 0..6 {
            for k in 0..6 {
                for j in 0..6 {
                    s[i][k][j] = self.computed[i][k][j];
                }
            }
        }
        Some(s)
    }
}

/// Brute-force intersection numbers compared with [`claimed_structure`].
pub fn intersection_numbers(s: &SchemeInstance, mode: CheckMode) -> IntersectionReport {
    let tables: ClassTables = match mode {
        CheckMode::Exhaustive => {
            let bs = s.bitsets();
            (0..s.len())
                .into_par_iter()
                .map(|x| exhaustive_row_dispatch(s, &bs, x))
                .reduce(|| vec![BTreeMap::new(); 6], merge)
        }
        CheckMode::Sampled { per_class, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pairs = Vec::new();
            for k in 0..6u8 {
                let mut found = 0;
                let mut attempts = 0;
                while found < per_class && attempts < 100 * per_class.max(1) {
                    attempts += 1;
                    let x = rng.gen_range(0..s.len());
                    let cands: Vec<usize> = (0..s.len()).filter(|&y| s.rel(x, y) == k).collect();
                    if cands.is_empty() {
                        continue;
                    }
                    pairs.push((x, cands[rng.gen_range(0..cands.len())], k as usize));
                    found += 1;
                }
            }
            pairs
                .par_iter()
                .map(|&(x, y, k)| {
                    let mut out: ClassTables = vec![BTreeMap::new(); 6];
                    out[k].insert(direct_table(s, x, y), 1);
                    out
                })
                .reduce(|| vec![BTreeMap::new(); 6], merge)
        }
    };
    let claimed = claimed_structure(s.q());
    let mut pairs_checked = [0u64; 6];
    let mut computed = vec![vec![vec![0i64; 6]; 6]; 6];
    let mut deviations = Vec::new();
    let mut well_defined = true;
    for k in 0..6 {
        pairs_checked[k] = tables[k].values().sum();
        if tables[k].len() > 1 {
            well_defined = false;
            deviations.push(format!("relation {k}: {} distinct count tables", tables[k].len()));
        }
        let Some((best, _)) = tables[k].iter().max_by_key(|(_, &c)| c) else {
            deviations.push(format!("relation {k}: no pairs tested"));
            continue;
        };
        for i in 0..6 {
            for j in 0..6 {
                computed[i][k][j] = i64::from(best[i][j]);
                if computed[i][k][j] != claimed[i][k][j] {
                    deviations.push(format!(
                        "p_{i}{j}^{k}: computed {} claimed {}",
                        computed[i][k][j], claimed[i][k][j]
                    ));
                }
            }
        }
    }
    let claimed_v = claimed.iter().map(|l| l.iter().map(|r| r.to_vec()).collect()).collect();
    IntersectionReport {
        mode,
        pairs_checked,
        well_defined,
        computed,
        claimed: claimed_v,
        ok: deviations.is_empty(),
        deviations,
    }
}

/// Closed-form valencies η₀..η₅.
pub fn claimed_valencies(q: u32) -> [i64; 6] {
    let q = i64::from(q);
    [1, (q * q - 1) * (q + 1), q - 1, (q * q - 1).pow(2), (q.pow(3) - q) * (q - 1).pow(2), (q.pow(3) - q) * (q - 1)]
}

/// Closed-form intersection matrices L₀..L₅ (`[i][k][j]` = p_ij^k).
pub fn claimed_structure(q: u32) -> Structure {
    let q = i64::from(q);
    let q2 = q * q;
    let q3 = q2 * q;
    let q4 = q3 * q;
    let q5 = q4 * q;
    let m1 = q - 1;
    let mut l0 = [[0i64; 6]; 6];
    for (k, row) in l0.iter_mut().enumerate() {
        row[k] = 1;
    }
    let l1 = [
        [0, (q2 - 1) * (q + 1), 0, 0, 0, 0],
        [1, q2 - 2, 0, q * m1, q * m1 * m1, q * m1],
        [0, 0, 0, m1 * (q + 1) * (q + 1), 0, 0],
        [0, q, 1, 2 * (q2 - q - 1), q * m1 * m1, q * m1],
        [0, q + 1, 0, q2 - 1, q3 - q2 - 2 * q, q2 - 1],
        [0, q + 1, 0, q2 - 1, (q + 1) * m1 * m1, (q - 2) * (q + 1)],
    ];
    let l2 = [
        [0, 0, m1, 0, 0, 0],
        [0, 0, 0, m1, 0, 0],
        [1, 0, q - 2, 0, 0, 0],
        [0, 1, 0, q - 2, 0, 0],
        [0, 0, 0, 0, q - 2, 1],
        [0, 0, 0, 0, m1, 0],
    ];
    let l3 = [
        [0, 0, 0, (q2 - 1) * (q2 - 1), 0, 0],
        [0, q * m1, m1, 2 * m1 * (q2 - q - 1), q * m1.pow(3), q * m1 * m1],
        [0, m1 * (q + 1) * (q + 1), 0, (q2 - 1) * (q2 - q - 2), 0, 0],
        [1, 2 * (q2 - q - 1), q - 2, 2 * q3 - 5 * q2 + q + 4, q * m1.pow(3), q * m1 * m1],
        [0, q2 - 1, 0, (q2 - 1) * m1, q4 - 2 * q3 - q2 + 3 * q + 1, q * (q + 1) * (q - 2)],
        [0, q2 - 1, 0, (q2 - 1) * m1, q * (q2 - 1) * (q - 2), (q2 - 1) * m1],
    ];
    let l4 = [
        [0, 0, 0, 0, (q3 - q) * m1 * m1, 0],
        [0, q * m1 * m1, 0, q * m1.pow(3), q2 * m1 * m1 * (q - 2), q * m1.pow(3)],
        [0, 0, 0, 0, (q3 - q) * m1 * (q - 2), (q3 - q) * m1],
        [0, q * m1 * m1, 0, q * m1.pow(3), q * m1 * (q3 - 3 * q2 + 2 * q + 1), q2 * m1 * (q - 2)],
        [
            1,
            q3 - q2 - 2 * q,
            q - 2,
            q4 - 2 * q3 - q2 + 3 * q + 1,
            q5 - 4 * q4 + 4 * q3 + 3 * q2 - 7 * q + 1,
            q4 - 3 * q3 + q2 + 4 * q - 1,
        ],
        [
            0,
            (q + 1) * m1 * m1,
            m1,
            q * (q2 - 1) * (q - 2),
            q5 - 4 * q4 + 4 * q3 + 3 * q2 - 5 * q + 1,
            q4 - 3 * q3 + q2 + 2 * q - 1,
        ],
    ];
    let l5 = [
        [0, 0, 0, 0, 0, (q3 - q) * m1],
        [0, q * m1, 0, q * m1 * m1, q * m1.pow(3), q * (q - 2) * m1],
        [0, 0, 0, 0, (q3 - q) * m1, 0],
        [0, q * m1, 0, q * m1 * m1, q2 * m1 * (q - 2), q * m1 * m1],
        [0, q2 - 1, 1, q * (q + 1) * (q - 2), q4 - 3 * q3 + q2 + 4 * q - 1, q3 - 2 * q2 - q + 1],
        [1, (q - 2) * (q + 1), 0, (q2 - 1) * m1, q4 - 3 * q3 + q2 + 2 * q - 1, q3 - 2 * q2 + q + 1],
    ];
    [l0, l1, l2, l3, l4, l5]
}

/// p^k_ij = 0 whenever i,j ∈ {0,2} and k ∉ {0,2}: R₀ ∪ R₂ is an equivalence.
pub fn imprimitivity_witness(s: &Structure) -> bool {
    [0, 2].iter().all(|&i| [0, 2].iter().all(|&j| [1, 3, 4, 5].iter().all(|&k| s[i][k][j] == 0)))
}

/// The first and second eigenmatrices 𝒫 (rows: idempotents, columns:
/// relations) and 𝒬 (rows: relations, columns: idempotents).
pub fn eigenmatrices(q: u32) -> (RationalMatrix, RationalMatrix) {
    let q = i64::from(q);
    let r = rat;
    let (q2, q3) = (q * q, q * q * q);
    let m1 = q - 1;
    let p = [
        [1, (q2 - 1) * (q + 1), m1, (q2 - 1) * (q2 - 1), (q3 - q) * m1 * m1, (q3 - q) * m1],
        [1, q2 - q - 1, m1, q3 - 2 * q2 + 1, -q * m1 * m1, -q * m1],
        [1, q2 - 1, -1, 1 - q2, 0, 0],
        [1, -q - 1, m1, 1 - q2, q * m1, q],
        [1, -q - 1, -1, q + 1, -q * (q + 1), q * (q + 1)],
        [1, -q - 1, -1, q + 1, q * m1, -q * m1],
    ];
    let pm = RationalMatrix::from_fn(6, 6, |i, j| r(p[i][j]));
    let qrows: [[Rat; 6]; 6] = [
        [
            r(1),
            r(m1 * (q + 1) * (q + 1)),
            r(q3 * m1),
            r(q * m1 * m1 * (q + 1)),
            ratio(q2 * m1.pow(3), 2),
            ratio(q2 * (q + 1) * m1 * m1, 2),
        ],
        [
            r(1),
            r(q2 - q - 1),
            ratio(q3 * m1, q + 1),
            r(-q * m1),
            ratio(-q2 * m1 * m1, 2 * (q + 1)),
            ratio(-q2 * m1, 2),
        ],
        [
            r(1),
            r(m1 * (q + 1) * (q + 1)),
            r(-q3),
            r(q * m1 * m1 * (q + 1)),
            ratio(-q2 * m1 * m1, 2),
            ratio(-q2 * (q + 1) * m1, 2),
        ],
        [r(1), r(q2 - q - 1), ratio(-q3, q + 1), r(-q * m1), ratio(q2 * m1, 2 * (q + 1)), ratio(q2, 2)],
        [r(1), r(-q - 1), r(0), r(q), ratio(-q2, 2), ratio(q2, 2)],
        [r(1), r(-q - 1), r(0), r(q), ratio(q2 * m1, 2), ratio(-q2 * m1, 2)],
    ];
    let qm = RationalMatrix::from_fn(6, 6, |i, j| qrows[i][j].clone());
    (pm, qm)
}

/// Multiplicities m₀..m₅ (row 0 of 𝒬).
pub fn multiplicities(q: u32) -> Vec<Rat> {
    let (_, qm) = eigenmatrices(q);
    qm.row(0).to_vec()
}

/// D·𝒬 with D the least common denominator, as integers.
pub fn scaled_q(q: u32) -> (i64, [[i64; 6]; 6]) {
    let (_, qm) = eigenmatrices(q);
    let d = common_denominator((0..6).flat_map(|i| qm.row(i).to_vec()));
    let mut out = [[0i64; 6]; 6];
    for i in 0..6 {
        for j in 0..6 {
            let v = qm.get(i, j) * Rat::from_integer(d.clone());
            out[i][j] = v.to_integer().to_i64().expect("small");
        }
    }
    (d.to_i64().expect("small"), out)
}

/// Element of the Bose–Mesner algebra in the basis A₀..A₅.
type Coeffs = Vec<Rat>;

fn algebra_mul(s: &Structure, x: &Coeffs, y: &Coeffs) -> Coeffs {
    let mut z = vec![Rat::zero(); 6];
    for i in 0..6 {
        if x[i].is_zero() {
            continue;
        }
        for j in 0..6 {
            if y[j].is_zero() {
                continue;
            }
            let c = &x[i] * &y[j];
            for (k, zk) in z.iter_mut().enumerate() {
                if s[i][k][j] != 0 {
                    *zk += &c * rat(s[i][k][j]);
                }
            }
        }
    }
    z
}

#[derive(Clone, Debug, Serialize)]
pub struct BoseMesnerReport {
    /// "regular-representation" or "dense".
    pub method: String,
    pub pq_is_scaled_identity: bool,
    pub idempotent_products: bool,
    pub sum_is_identity: bool,
    pub eigenvalue_relations: bool,
    pub multiplicities: Vec<String>,
    pub ranks: Vec<u64>,
    pub rank_method: String,
    pub ok: bool,
}

/// 𝒫𝒬 = q⁵·I.
pub fn pq_identity(q: u32) -> bool {
    let (pm, qm) = eigenmatrices(q);
    pm.mul(&qm) == RationalMatrix::identity(6).scale(&rat(i64::from(q).pow(5)))
}

/// Bose–Mesner identities in the six-dimensional algebra with the given
/// structure constants. When the constants have been verified exhaustively
/// against the adjacency matrices, the algebra is faithfully represented and
/// the identities transfer to the |X|×|X| matrices. Ranks are traces of the
/// idempotents: |X| times their A₀-coefficient.
pub fn bose_mesner_regular(q: u32, s: &Structure) -> BoseMesnerReport {
    let (pm, qm) = eigenmatrices(q);
    let n = i64::from(q).pow(5);
    let inv_n = ratio(1, n);
    let e: Vec<Coeffs> = (0..6).map(|i| (0..6).map(|j| qm.get(j, i) * &inv_n).collect()).collect();
    let unit = |k: usize| -> Coeffs { (0..6).map(|j| rat(i64::from(j == k))).collect() };
    let zero: Coeffs = vec![Rat::zero(); 6];
    let mut products = true;
    for i in 0..6 {
        for j in 0..6 {
            let want = if i == j { e[i].clone() } else { zero.clone() };
            products &= algebra_mul(s, &e[i], &e[j]) == want;
        }
    }
    let sum = e.iter().fold(zero.clone(), |acc, x| acc.iter().zip(x).map(|(a, b)| a + b).collect());
    let sum_ok = sum == unit(0);
    let mut eig = true;
    for i in 0..6 {
        for j in 0..6 {
            let lhs = algebra_mul(s, &unit(j), &e[i]);
            let rhs: Coeffs = e[i].iter().map(|c| c * pm.get(i, j)).collect();
            eig &= lhs == rhs;
        }
    }
    let mults = multiplicities(q);
    let ranks: Vec<u64> = e.iter().map(|c| (&c[0] * rat(n)).to_integer().to_u64().unwrap_or(0)).collect();
    let ranks_ok = ranks.iter().zip(&mults).all(|(&r, m)| rat(r as i64) == *m);
    let pq = pq_identity(q);
    BoseMesnerReport {
        method: "regular-representation".into(),
        pq_is_scaled_identity: pq,
        idempotent_products: products,
        sum_is_identity: sum_ok,
        eigenvalue_relations: eig,
        multiplicities: mults.iter().map(rat_string).collect(),
        ranks,
        rank_method: "trace of idempotent".into(),
        ok: pq && products && sum_ok && eig && ranks_ok,
    }
}

fn matmul_i64(a: &[i64], b: &[i64], n: usize) -> Vec<i64> {
    let mut c = vec![0i64; n * n];
    c.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0 {
                continue;
            }
            let bk = &b[k * n..(k + 1) * n];
            for (x, &y) in row.iter_mut().zip(bk) {
                *x += aik * y;
            }
        }
    });
    c
}

/// Bose–Mesner identities on the full matrices with exact integer arithmetic
/// after clearing denominators: Mᵢ = D·q⁵·Eᵢ has entries D·𝒬(rel(x,y), i).
/// Ranks by fraction-free elimination. Cubic in |X|; meant for q = 3.
pub fn bose_mesner_dense(s: &SchemeInstance) -> BoseMesnerReport {
    let q = s.q();
    let n = s.len();
    let (pm, _) = eigenmatrices(q);
    let (d, dq) = scaled_q(q);
    let scale = d * i64::from(q).pow(5);
    let m: Vec<Vec<i64>> =
        (0..6).map(|i| s.rel.iter().map(|&r| dq[r as usize][i]).collect()).collect();
    let a: Vec<Vec<i64>> = (0..6).map(|j| s.rel.iter().map(|&r| i64::from(r as usize == j)).collect()).collect();
    let mut products = true;
    for i in 0..6 {
        for j in i..6 {
            let prod = matmul_i64(&m[i], &m[j], n);
            products &= if i == j {
                prod.iter().zip(&m[i]).all(|(&x, &y)| x == scale * y)
            } else {
                prod.iter().all(|&x| x == 0)
            };
        }
    }
    let sum_ok = (0..n * n).all(|t| {
        let v: i64 = (0..6).map(|i| m[i][t]).sum();
        v == if t % (n + 1) == 0 { scale } else { 0 }
    });
    let mut eig = true;
    for i in 0..6 {
        for j in 1..6 {
            let lhs = matmul_i64(&a[j], &m[i], n);
            let ev = pm.get(i, j).to_integer().to_i64().expect("integral eigenvalue");
            eig &= lhs.iter().zip(&m[i]).all(|(&x, &y)| x == ev * y);
        }
    }
    let ranks: Vec<u64> = m
        .par_iter()
        .map(|mi| {
            let rows: Vec<Vec<i64>> = mi.chunks(n).map(<[i64]>::to_vec).collect();
            crate::rational::integer_rank(&rows) as u64
        })
        .collect();
    let mults = multiplicities(q);
    let ranks_ok = ranks.iter().zip(&mults).all(|(&r, m)| rat(r as i64) == *m);
    let pq = pq_identity(q);
    BoseMesnerReport {
        method: "dense".into(),
        pq_is_scaled_identity: pq,
        idempotent_products: products,
        sum_is_identity: sum_ok,
        eigenvalue_relations: eig,
        multiplicities: mults.iter().map(rat_string).collect(),
        ranks,
        rank_method: "fraction-free elimination".into(),
        ok: pq && products && sum_ok && eig && ranks_ok,
    }
}

/// a_i = |Y|⁻¹·|R_i ∩ Y²|.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InnerDistribution {
    pub size: usize,
    pub a: Vec<Rat>,
}

impl InnerDistribution {
    pub fn to_strings(&self) -> Vec<String> {
        self.a.iter().map(rat_string).collect()
    }
}

pub fn inner_distribution(s: &SchemeInstance, ys: &[usize]) -> Result<InnerDistribution, SchemeError> {
    if ys.is_empty() {
        return Err(SchemeError::EmptySet);
    }
    let set: BTreeSet<usize> = ys.iter().copied().collect();
    let mut counts = [0i64; 6];
    for &x in &set {
        for &y in &set {
            counts[s.rel(x, y) as usize] += 1;
        }
    }
    let size = set.len();
    Ok(InnerDistribution { size, a: counts.iter().map(|&c| ratio(c, size as i64)).collect() })
}

/// The MacWilliams transform a𝒬.
pub fn macwilliams(a: &InnerDistribution, q: u32) -> Vec<Rat> {
    let (_, qm) = eigenmatrices(q);
    (0..6).map(|j| (0..6).fold(Rat::zero(), |acc, i| acc + &a.a[i] * qm.get(i, j))).collect()
}

pub fn is_m_clique(a: &InnerDistribution, m: &[usize]) -> bool {
    (0..6).all(|i| m.contains(&i) || a.a[i].is_zero())
}

pub fn is_t_design(a: &InnerDistribution, t: &[usize], q: u32) -> bool {
    let mw = macwilliams(a, q);
    t.iter().all(|&j| mw[j].is_zero())
}

/// D·q⁵·vE_j for every j, as exact integers (`[j][z]`).
pub fn projections(s: &SchemeInstance, v: &[i64]) -> Vec<Vec<i64>> {
    let n = s.len();
    let (_, dq) = scaled_q(s.q());
    // w[z][i] = (vA_i)(z)
    let mut w = vec![[0i64; 6]; n];
    for (x, &vx) in v.iter().enumerate() {
        if vx == 0 {
            continue;
        }
        for (z, &r) in s.row(x).iter().enumerate() {
            w[z][r as usize] += vx;
        }
    }
    (0..6).map(|j| w.iter().map(|wz| (0..6).map(|i| dq[i][j] * wz[i]).sum()).collect()).collect()
}

/// {j ≥ 1 : vE_j ≠ 0}.
pub fn dual_degree_set(s: &SchemeInstance, v: &[i64]) -> BTreeSet<usize> {
    projections(s, v).iter().enumerate().skip(1).filter(|(_, p)| p.iter().any(|&x| x != 0)).map(|(j, _)| j).collect()
}

pub fn characteristic(s: &SchemeInstance, ys: &[usize]) -> Vec<i64> {
    let mut v = vec![0i64; s.len()];
    for &y in ys {
        v[y] = 1;
    }
    v
}

/// (a𝒬)_j = 0 ⟺ χ_Y E_j = 0, for every j.
pub fn design_cross_check(s: &SchemeInstance, ys: &[usize]) -> Result<bool, SchemeError> {
    let a = inner_distribution(s, ys)?;
    let mw = macwilliams(&a, s.q());
    let proj = projections(s, &characteristic(s, ys));
    Ok((0..6).all(|j| mw[j].is_zero() == proj[j].iter().all(|&x| x == 0)))
}

#[derive(Clone, Debug, Serialize)]
pub struct PhiReport {
    pub bijective: bool,
    pub pairs_checked: u64,
    /// Pairs where adjacency, Tr(h(q,r)) = 0, det(φ(m)−φ(n)) = 0 and
    /// rank(φ(m)−φ(n)) = 1 over GF(q) all agree.
    pub agreements: u64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct QuotientReport {
    pub classes: usize,
    pub fibers_have_size_q: bool,
    /// Between two classes only R₁∪R₃ or only R₄∪R₅ occurs.
    pub class_relations_well_defined: bool,
    pub parameters: Option<[u64; 4]>,
    pub claimed: [u64; 4],
    pub feasibility_identity: bool,
    pub phi: Option<PhiReport>,
    pub ok: bool,
}

/// SRG parameters (v,k,λ,μ) claimed for the quotient graph.
pub fn claimed_srg(q: u32) -> [u64; 4] {
    let q = u64::from(q);
    [q.pow(4), (q * q - 1) * (q + 1), 2 * q * q - q - 2, q * (q + 1)]
}

/// Quotient of X_P by R₀ ∪ R₂, with classes adjacent when related by R₁ ∪ R₃.
/// The Dickson witness φ is checked when P = ⟨(0,0,0,1)⟩.
pub fn quotient_scheme(s: &SchemeInstance, surface: &HermitianSurface) -> Result<QuotientReport, SchemeError> {
    let Base::Point(p) = s.base() else { return Err(SchemeError::WrongBase("a point")) };
    let n = s.len();
    let q = s.q();
    let mut label = vec![usize::MAX; n];
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for x in 0..n {
        if label[x] != usize::MAX {
            continue;
        }
        let members: Vec<usize> = (0..n).filter(|&y| matches!(s.rel(x, y), 0 | 2)).collect();
        for &y in &members {
            label[y] = classes.len();
        }
        classes.push(members);
    }
    let fibers_ok = classes.iter().all(|c| c.len() == q as usize)
        && classes.iter().all(|c| c.iter().all(|&x| c.iter().all(|&y| matches!(s.rel(x, y), 0 | 2))));
    let v = classes.len();
    let mut adj = vec![vec![false; v]; v];
    let mut well = true;
    for a in 0..v {
        for b in 0..v {
            if a == b {
                continue;
            }
            let kinds: BTreeSet<bool> = classes[a]
                .iter()
                .flat_map(|&x| classes[b].iter().map(move |&y| (x, y)))
                .map(|(x, y)| matches!(s.rel(x, y), 1 | 3))
                .collect();
            well &= kinds.len() == 1 && classes[a].iter().all(|&x| classes[b].iter().all(|&y| s.rel(x, y) != 0 && s.rel(x, y) != 2));
            adj[a][b] = kinds.contains(&true);
        }
    }
    let degrees: BTreeSet<usize> = adj.iter().map(|r| r.iter().filter(|&&b| b).count()).collect();
    let mut lambdas = BTreeSet::new();
    let mut mus = BTreeSet::new();
    for a in 0..v {
        for b in a + 1..v {
            let common = (0..v).filter(|&c| adj[a][c] && adj[b][c]).count();
            if adj[a][b] {
                lambdas.insert(common);
            } else {
                mus.insert(common);
            }
        }
    }
    let parameters = (degrees.len() == 1 && lambdas.len() == 1 && mus.len() == 1).then(|| {
        let k = *degrees.iter().next().unwrap() as u64;
        [v as u64, k, *lambdas.iter().next().unwrap() as u64, *mus.iter().next().unwrap() as u64]
    });
    let feasibility = parameters.is_some_and(|[v, k, l, m]| k * (k - l - 1) == (v - k - 1) * m);
    let gf = surface.field();
    let standard = normalize(gf, surface.point(p)) == Some([gf.zero(), gf.zero(), gf.zero(), gf.one()]);
    let phi = standard.then(|| phi_witness(gf, surface, s, &classes, &adj));
    let claimed = claimed_srg(q);
    let ok = fibers_ok && well && parameters == Some(claimed) && feasibility && phi.as_ref().is_none_or(|p| p.ok);
    Ok(QuotientReport {
        classes: v,
        fibers_have_size_q: fibers_ok,
        class_relations_well_defined: well,
        parameters,
        claimed,
        feasibility_identity: feasibility,
        phi,
        ok,
    })
}

/// φ: l_(r₁,r₂) ↦ D_(r₁, μr₂) with N(μ) = −1.
fn phi_witness(
    gf: &GaloisField,
    surface: &HermitianSurface,
    s: &SchemeInstance,
    classes: &[Vec<usize>],
    adj: &[Vec<bool>],
) -> PhiReport {
    let delta = gf.mu();
    let reps: Vec<HVec> = classes
        .iter()
        .map(|c| {
            let v = surface.point(s.vertex(c[0]));
            let inv = gf.inv(v[0]).expect("not collinear with P");
            v.map(|x| gf.mul(x, inv))
        })
        .collect();
    let images: Vec<(Fq2, Fq2)> = reps.iter().map(|r| (r[1], gf.mul(delta, r[2]))).collect();
    let distinct: BTreeSet<(Fq2, Fq2)> = images.iter().copied().collect();
    let bijective = distinct.len() == classes.len() && distinct.len() == (gf.q() as usize).pow(4);
    let mut pairs = 0;
    let mut agree = 0;
    for a in 0..classes.len() {
        for b in 0..classes.len() {
            if a == b {
                continue;
            }
            pairs += 1;
            let tr = gf.trace(herm(gf, &reps[a], &reps[b])) == gf.base().zero();
            let (da, db) = (gf.sub(images[a].0, images[b].0), gf.sub(images[a].1, images[b].1));
            let det = gf.norm(da) == gf.norm(db);
            let rank1 = dickson_rank_over_base(gf, da, db) == 1;
            if adj[a][b] == tr && tr == det && det == rank1 {
                agree += 1;
            }
        }
    }
    PhiReport { bijective, pairs_checked: pairs, agreements: agree, ok: bijective && agree == pairs }
}

/// Rank over GF(q) of x ↦ ax + bx^q on GF(q²) = GF(q)·1 ⊕ GF(q)·θ.
fn dickson_rank_over_base(gf: &GaloisField, a: Fq2, b: Fq2) -> usize {
    let f = |x: Fq2| gf.add(gf.mul(a, x), gf.mul(b, gf.frob(x)));
    let (c0, c1) = (gf.parts(f(gf.one())), gf.parts(f(gf.theta())));
    let rows = vec![vec![c0.0, c0.1], vec![c1.0, c1.1]];
    linalg::rank(gf.base(), &rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct TransportReport {
    pub pairs: u64,
    pub mismatches: u64,
}

/// Maps X_P through ρ onto X_ρ(P) and compares relation ids pair by pair.
pub fn rho_transport(xp: &SchemeInstance, xl: &SchemeInstance, rho: &RhoTable) -> Result<TransportReport, SchemeError> {
    let Base::Point(p) = xp.base() else { return Err(SchemeError::WrongBase("a point")) };
    if xl.base() != Base::Generator(rho.generator(p)) {
        return Err(SchemeError::WrongBase("the image generator ρ(P)"));
    }
    let map: Vec<usize> = xp
        .vertices()
        .iter()
        .map(|&v| xl.index_of(rho.generator(v)).ok_or_else(|| SchemeError::NotAVertex(format!("ρ of point {v}"))))
        .collect::<Result<_, _>>()?;
    let n = xp.len();
    let mismatches = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| xp.rel(i, j) != xl.rel(map[i], map[j])).count() as u64)
        .sum();
    Ok(TransportReport { pairs: (n * n) as u64, mismatches })
}

#[derive(Clone, Debug, Serialize)]
pub struct SchemeReport {
    pub q: u32,
    pub base: Base,
    pub vertices: usize,
    pub valencies_claimed: Vec<i64>,
    pub valencies_computed: Option<Vec<u64>>,
    pub intersection: IntersectionReport,
    pub bose_mesner: Vec<BoseMesnerReport>,
    pub checks: Vec<Check>,
    pub ok: bool,
}

/// Valencies, intersection numbers and Bose–Mesner identities. The dense
/// Bose–Mesner pass runs when `dense` is set.
pub fn verify(s: &SchemeInstance, mode: CheckMode, dense: bool) -> SchemeReport {
    let q = s.q();
    let claimed_v = claimed_valencies(q);
    let computed_v = s.valencies();
    let inter = intersection_numbers(s, mode);
    let mut checks = vec![
        Check::new("scheme.vertex-count", "|X| = q^5", s.len() as u64 == u64::from(q).pow(5)),
        Check::new("scheme.symmetric", "relations are symmetric with R0 the diagonal", s.is_symmetric()),
        Check::new(
            "scheme.valencies",
            "valencies ((q^2-1)(q+1), q-1, (q^2-1)^2, (q^3-q)(q-1)^2, (q^3-q)(q-1))",
            computed_v.is_some_and(|c| c.iter().zip(&claimed_v).all(|(&a, &b)| a as i64 == b)),
        ),
        Check::new("scheme.well-defined", "intersection numbers do not depend on the pair", inter.well_defined),
        Check::new("scheme.intersection-matrices", "intersection matrices L1..L5 match the closed forms", inter.ok)
            .with_detail(inter.deviations.join("; ")),
        Check::new(
            "scheme.imprimitive",
            "p^k_ij = 0 for i,j in {0,2} and k not in {0,2}",
            inter.structure().is_some_and(|st| imprimitivity_witness(&st)),
        ),
    ];
    let mut bm = Vec::new();
    let exhaustive = matches!(mode, CheckMode::Exhaustive);
    let structure = inter.structure().filter(|_| inter.ok).unwrap_or_else(|| claimed_structure(q));
    let regular = bose_mesner_regular(q, &structure);
    checks.push(
        Check::new(
            "scheme.bose-mesner.regular",
            "EiEj = delta_ij Ei, sum Ei = I, AjEi = P(i,j)Ei, PQ = q^5 I, rank Ei = mi",
            regular.ok,
        )
        .with_detail(if exhaustive && inter.ok {
            "structure constants verified on every pair"
        } else {
            "structure constants verified on sampled pairs only"
        }),
    );
    bm.push(regular);
    if dense {
        let d = bose_mesner_dense(s);
        checks.push(Check::new(
            "scheme.bose-mesner.dense",
            "Bose-Mesner identities and ranks on the full matrices",
            d.ok,
        ));
        bm.push(d);
    }
    let ok = all_passed(&checks);
    SchemeReport {
        q,
        base: s.base(),
        vertices: s.len(),
        valencies_claimed: claimed_v.to_vec(),
        valencies_computed: computed_v.map(|c| c.to_vec()),
        intersection: inter,
        bose_mesner: bm,
        checks,
        ok,
    }
}

/// Id of ⟨(0,0,0,1)⟩ on the surface.
pub fn standard_point(surface: &HermitianSurface) -> u32 {
    let gf = surface.field();
    surface.id(&[gf.zero(), gf.zero(), gf.zero(), gf.one()]).expect("(0,0,0,1) lies on H(3,q²)")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xp(q: u32) -> (GaloisField, HermitianSurface, SchemeInstance) {
        let gf = GaloisField::new(q).unwrap();
        let surface = HermitianSurface::new(&gf);
        let p = standard_point(&surface);
        let s = SchemeInstance::on_point(&surface, p);
        (gf, surface, s)
    }

    #[test]
    fn classify_examples() {
        let gf = GaloisField::new(3).unwrap();
        let (o, z, t) = (gf.one(), gf.zero(), gf.theta());
        let p = [z, z, z, o];
        let q = [o, z, z, z];
        assert_eq!(classify_points(&gf, &p, &q, &[o, z, z, t]), Ok(2));
        assert_eq!(classify_points(&gf, &p, &q, &[o, o, o, o]), Ok(5));
        assert_eq!(classify_points(&gf, &p, &q, &q), Ok(0));
        assert!(classify_points(&gf, &p, &q, &[z, o, z, z]).is_err());
    }

    #[test]
    fn fast_builder_matches_reference_classifier() {
        let (gf, surface, s) = xp(3);
        let p = *surface.point(standard_point(&surface));
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let (i, j) = (rng.gen_range(0..s.len()), rng.gen_range(0..s.len()));
            let (a, b) = (surface.point(s.vertex(i)), surface.point(s.vertex(j)));
            assert_eq!(classify_points(&gf, &p, a, b), Ok(s.rel(i, j)));
            assert_eq!(s.rel(i, j), s.rel(j, i));
        }
    }

    #[test]
    fn valencies_q3_q5() {
        for q in [3, 5] {
            let (_, _, s) = xp(q);
            assert_eq!(s.len(), (q as usize).pow(5));
            assert!(s.is_symmetric());
            let v = s.valencies().unwrap();
            let c = claimed_valencies(q);
            assert_eq!(v.map(|x| x as i64), c);
        }
        assert_eq!(claimed_valencies(3), [1, 32, 2, 64, 96, 48]);
    }

    #[test]
    fn closed_forms_are_consistent() {
        for q in [3, 5, 7, 11] {
            let s = claimed_structure(q);
            let eta = claimed_valencies(q);
            for i in 0..6 {
                for k in 0..6 {
                    // row sums are valencies
                    assert_eq!(s[i][k].iter().sum::<i64>(), eta[i], "q={q} L{i} row {k}");
                    // η_k p_ij^k = η_j p_ik^j
                    for j in 0..6 {
                        assert_eq!(eta[k] * s[i][k][j], eta[j] * s[i][j][k], "q={q} i={i} j={j} k={k}");
                    }
                }
            }
            assert!(imprimitivity_witness(&s));
        }
        let s = claimed_structure(3);
        assert_eq!(s[1][1][1], 7);
        assert_eq!(s[2][1][3], 2);
        assert_eq!(s[5][5][5], 13);
    }

    #[test]
    fn intersection_numbers_exhaustive_q3() {
        let (_, _, s) = xp(3);
        let r = intersection_numbers(&s, CheckMode::Exhaustive);
        assert_eq!(r.pairs_checked.iter().sum::<u64>(), 243 * 243);
        assert!(r.well_defined, "{:?}", r.deviations);
        assert!(r.ok, "{:?}", r.deviations);
    }

    #[test]
    fn bitset_and_direct_tables_agree() {
        let (_, _, s) = xp(3);
        let bs = s.bitsets();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..300 {
            let (x, y) = (rng.gen_range(0..s.len()), rng.gen_range(0..s.len()));
            assert_eq!(bitset_table(&bs, x, y, s.rel(x, y) as usize), direct_table(&s, x, y));
        }
    }

    #[test]
    fn intersection_numbers_sampled_q5() {
        let (_, _, s) = xp(5);
        let r = intersection_numbers(&s, CheckMode::Sampled { per_class: 200, seed: 1 });
        assert!(r.pairs_checked.iter().all(|&c| c == 200));
        assert!(r.ok, "{:?}", r.deviations);
    }

    #[test]
    fn eigenmatrices_and_multiplicities() {
        for q in [3, 5, 7] {
            assert!(pq_identity(q));
            let (pm, qm) = eigenmatrices(q);
            // row 0 of P is the valency vector
            let eta = claimed_valencies(q);
            assert!((0..6).all(|j| *pm.get(0, j) == rat(eta[j])));
            // Q(0,i) sums to |X|
            let total = (0..6).fold(Rat::zero(), |acc, i| acc + qm.get(0, i));
            assert_eq!(total, rat(i64::from(q).pow(5)));
        }
        let m: Vec<String> = multiplicities(3).iter().map(rat_string).collect();
        assert_eq!(m, ["1", "32", "54", "48", "36", "72"]);
    }

    #[test]
    fn bose_mesner_regular_closed_form() {
        for q in [3, 5, 7] {
            let r = bose_mesner_regular(q, &claimed_structure(q));
            assert!(r.ok, "{r:?}");
        }
        // a perturbed structure is caught
        let mut s = claimed_structure(3);
        s[1][1][1] += 1;
        s[1][1][4] -= 1;
        assert!(!bose_mesner_regular(3, &s).ok);
    }

    #[test]
    fn bose_mesner_dense_q3() {
        let (_, _, s) = xp(3);
        let r = bose_mesner_dense(&s);
        assert!(r.ok, "{r:?}");
        assert_eq!(r.ranks, vec![1, 32, 54, 48, 36, 72]);
    }

    #[test]
    fn inner_distribution_of_whole_set() {
        let (_, _, s) = xp(3);
        let all: Vec<usize> = (0..s.len()).collect();
        let a = inner_distribution(&s, &all).unwrap();
        assert!(is_t_design(&a, &[1, 2, 3, 4, 5], 3));
        assert!(design_cross_check(&s, &all).unwrap());
        assert_eq!(inner_distribution(&s, &[]), Err(SchemeError::EmptySet));
        let d = dual_degree_set(&s, &characteristic(&s, &[0, 1, 2]));
        assert!(design_cross_check(&s, &[0, 1, 2]).unwrap());
        assert!(!d.is_empty());
    }

    #[test]
    fn macwilliams_formula_for_zero_five_cliques() {
        for q in [3u32, 5, 7] {
            let qq = i64::from(q);
            let a = InnerDistribution {
                size: (q * q) as usize,
                a: vec![rat(1), rat(0), rat(0), rat(0), rat(0), rat(qq * qq - 1)],
            };
            let want = [qq * qq, 0, qq.pow(3) * (qq - 1), qq * qq * (qq * qq - 1), qq.pow(3) * (qq - 1).pow(2), 0];
            assert_eq!(macwilliams(&a, q), want.map(rat).to_vec());
            assert!(is_m_clique(&a, &[0, 5]));
            assert!(is_t_design(&a, &[1, 5], q));
        }
    }

    #[test]
    fn rho_transport_is_exact_q3() {
        let (gf, surface, s) = xp(3);
        let tables = QuadricTables::build(&gf).unwrap();
        let km = crate::klein::KleinMap::new(&tables.space);
        let rho = RhoTable::build(&km, &surface, &tables).unwrap();
        let l = rho.generator(standard_point(&surface));
        let xl = SchemeInstance::on_generator(&tables, l);
        assert_eq!(xl.len(), 243);
        assert_eq!(xl.valencies().unwrap().map(|x| x as i64), claimed_valencies(3));
        let r = rho_transport(&s, &xl, &rho).unwrap();
        assert_eq!((r.pairs, r.mismatches), (243 * 243, 0));
        let m = *tables.generator(xl.vertex(0));
        let n = *tables.generator(xl.vertex(1));
        assert_eq!(classify_generators(&tables.space, tables.generator(l), &m, &n), Ok(xl.rel(0, 1)));
    }

    #[test]
    fn quotient_q3() {
        let (_, surface, s) = xp(3);
        let r = quotient_scheme(&s, &surface).unwrap();
        assert_eq!(r.parameters, Some([81, 32, 13, 12]));
        let phi = r.phi.as_ref().unwrap();
        assert_eq!(phi.pairs_checked, 81 * 80);
        assert!(r.ok, "{r:?}");
    }
}
