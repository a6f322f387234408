//! The six-dimensional GF(q)-space V̂ = {(x, x^q, y, y^q, z, z^q)} with the
//! quadratic form Q̂(x,y,z) = −xz^q − x^qz + y^{q+1}, its polar form b̂, a
//! fixed-size subspace lattice, and the enumerations of Q⁻(5,q).
//!
//! Vectors of V̂ are handled in two equivalent models: [`HatVector`] (three
//! GF(q²) entries, convenient for closed formulas) and [`Coords`] (six GF(q)
//! entries `(x₀,x₁,y₀,y₁,z₀,z₁)` with `x = x₀ + x₁θ`, used for linear algebra).

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{FieldConstants, Fq, Fq2, GaloisField, GfError};

/// Six GF(q) coordinates of a vector of V̂.
pub type Coords = [u8; 6];

/// Largest q for which [`QuadricTables::build`] materialises everything.
pub const DEFAULT_TABLE_BOUND: u32 = 7;

/// Version tag of the JSON table cache.
pub const CACHE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error(transparent)]
    Field(#[from] GfError),
    #[error("q = {q} exceeds the configured table bound {bound}")]
    ResourceBound { q: u32, bound: u32 },
    #[error("cache mismatch: {0}")]
    CacheMismatch(String),
    #[error("cache I/O: {0}")]
    Io(#[from] std::io::Error),
    #[error("cache format: {0}")]
    Format(#[from] serde_json::Error),
}

/// `(x, y, z)₂`, standing for `(x, x^q, y, y^q, z, z^q)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HatVector {
    pub x: Fq2,
    pub y: Fq2,
    pub z: Fq2,
}

impl HatVector {
    pub fn new(x: Fq2, y: Fq2, z: Fq2) -> Self {
        Self { x, y, z }
    }
}

/// A subspace of V̂ stored by its reduced row echelon basis. Unused rows are
/// zero, so equality of subspaces is equality of values.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Subspace {
    dim: u8,
    rows: [Coords; 6],
}

impl Subspace {
    pub fn zero() -> Self {
        Self { dim: 0, rows: [[0; 6]; 6] }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn basis(&self) -> &[Coords] {
        &self.rows[..self.dim as usize]
    }
}

/// V̂ together with its forms; all subspace operations live here because they
/// need the field.
#[derive(Clone, Debug)]
pub struct HatSpace {
    gf: GaloisField,
    q: u32,
    inv: Vec<u32>,
    half: u32,
    gram: [[u32; 6]; 6],
}

impl HatSpace {
    pub fn new(gf: &GaloisField) -> Self {
        let q = gf.q();
        let f = gf.base();
        let inv: Vec<u32> = (0..q).map(|a| f.inv(Fq(a as u16)).map_or(0, |x| x.value())).collect();
        let half = inv[2];
        let mut space = Self { gf: gf.clone(), q, inv, half, gram: [[0; 6]; 6] };
        let mut gram = [[0u32; 6]; 6];
        for (i, row) in gram.iter_mut().enumerate() {
            for (j, g) in row.iter_mut().enumerate() {
                let mut ei = [0u8; 6];
                let mut ej = [0u8; 6];
                ei[i] = 1;
                ej[j] = 1;
                *g = space.bhat(&space.to_hat(&ei), &space.to_hat(&ej)).value();
            }
        }
        space.gram = gram;
        space
    }

    pub fn field(&self) -> &GaloisField {
        &self.gf
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// The Gram matrix of b̂ in the six-coordinate model.
    pub fn gram(&self) -> [[u32; 6]; 6] {
        self.gram
    }

    pub fn to_coords(&self, v: &HatVector) -> Coords {
        let mut c = [0u8; 6];
        for (k, e) in [v.x, v.y, v.z].into_iter().enumerate() {
            let (a0, a1) = self.gf.parts(e);
            c[2 * k] = a0.0 as u8;
            c[2 * k + 1] = a1.0 as u8;
        }
        c
    }

    pub fn to_hat(&self, c: &Coords) -> HatVector {
        let e = |k: usize| self.gf.from_parts(Fq(c[2 * k] as u16), Fq(c[2 * k + 1] as u16));
        HatVector { x: e(0), y: e(1), z: e(2) }
    }

    /// Q̂(v) = −xz^q − x^qz + y^{q+1}.
    pub fn qhat(&self, v: &HatVector) -> Fq {
        let gf = &self.gf;
        let f = gf.base();
        let xzq = gf.mul(v.x, gf.frob(v.z));
        f.sub(gf.norm(v.y), gf.trace(xzq))
    }

    /// b̂(u,v) = −xz′^q − x^qz′ + yy′^q + y^qy′ − zx′^q − z^qx′.
    pub fn bhat(&self, u: &HatVector, v: &HatVector) -> Fq {
        let gf = &self.gf;
        let f = gf.base();
        let t1 = gf.trace(gf.mul(u.x, gf.frob(v.z)));
        let t2 = gf.trace(gf.mul(u.y, gf.frob(v.y)));
        let t3 = gf.trace(gf.mul(u.z, gf.frob(v.x)));
        f.sub(t2, f.add(t1, t3))
    }

    /// b̂ in coordinates, via the Gram matrix.
    #[inline]
    pub fn bform(&self, u: &Coords, v: &Coords) -> u32 {
        let mut acc = 0u32;
        for i in 0..6 {
            if u[i] == 0 {
                continue;
            }
            let mut s = 0u32;
            for j in 0..6 {
                s += self.gram[i][j] * v[j] as u32;
            }
            acc += u[i] as u32 * (s % self.q);
        }
        acc % self.q
    }

    /// Q̂ in coordinates, as b̂(v,v)/2.
    #[inline]
    pub fn qform(&self, v: &Coords) -> u32 {
        self.bform(v, v) * self.half % self.q
    }

    /// Scales a non-zero vector so that its first non-zero coordinate is 1.
    pub fn normalize(&self, v: &Coords) -> Option<Coords> {
        let lead = *v.iter().find(|&&c| c != 0)? as usize;
        let s = self.inv[lead];
        let mut out = [0u8; 6];
        for i in 0..6 {
            out[i] = (v[i] as u32 * s % self.q) as u8;
        }
        Some(out)
    }

    /// Base-q integer encoding of a coordinate vector.
    #[inline]
    pub fn encode(&self, v: &Coords) -> usize {
        v.iter().fold(0usize, |acc, &c| acc * self.q as usize + c as usize)
    }

    pub fn decode(&self, mut n: usize) -> Coords {
        let mut v = [0u8; 6];
        for i in (0..6).rev() {
            v[i] = (n % self.q as usize) as u8;
            n /= self.q as usize;
        }
        v
    }

    /// `a + c·b`.
    #[inline]
    pub fn axpy(&self, a: &Coords, c: u32, b: &Coords) -> Coords {
        let mut out = [0u8; 6];
        for i in 0..6 {
            out[i] = ((a[i] as u32 + c * b[i] as u32) % self.q) as u8;
        }
        out
    }

    pub fn scale(&self, c: u32, a: &Coords) -> Coords {
        let mut out = [0u8; 6];
        for i in 0..6 {
            out[i] = (c * a[i] as u32 % self.q) as u8;
        }
        out
    }

    /// The subspace spanned by the given vectors.
    pub fn subspace(&self, vecs: &[Coords]) -> Subspace {
        let mut rows: Vec<Coords> = vecs.to_vec();
        let mut r = 0usize;
        for c in 0..6 {
            if r == rows.len() {
                break;
            }
            let Some(p) = (r..rows.len()).find(|&i| rows[i][c] != 0) else {
                continue;
            };
            rows.swap(r, p);
            let s = self.inv[rows[r][c] as usize];
            rows[r] = self.scale(s, &rows[r]);
            for i in 0..rows.len() {
                if i != r && rows[i][c] != 0 {
                    let factor = self.q - rows[i][c] as u32;
                    rows[i] = self.axpy(&rows[i], factor, &rows[r]);
                }
            }
            r += 1;
        }
        let mut out = Subspace::zero();
        out.dim = r as u8;
        out.rows[..r].copy_from_slice(&rows[..r]);
        out
    }

    pub fn whole(&self) -> Subspace {
        let mut rows = [[0u8; 6]; 6];
        for (i, r) in rows.iter_mut().enumerate() {
            r[i] = 1;
        }
        Subspace { dim: 6, rows }
    }

    /// Dimension of the span of a set of vectors.
    pub fn rank(&self, vecs: &[Coords]) -> usize {
        self.subspace(vecs).dim()
    }

    pub fn span(&self, parts: &[Subspace]) -> Subspace {
        let vecs: Vec<Coords> = parts.iter().flat_map(|s| s.basis().iter().copied()).collect();
        self.subspace(&vecs)
    }

    pub fn join(&self, a: &Subspace, b: &Subspace) -> Subspace {
        self.span(&[*a, *b])
    }

    /// `S^⊥` with respect to b̂.
    pub fn perp(&self, s: &Subspace) -> Subspace {
        // rows of S·G; the perp is their common kernel
        let mut m: Vec<Coords> = s
            .basis()
            .iter()
            .map(|r| {
                let mut out = [0u8; 6];
                for (j, o) in out.iter_mut().enumerate() {
                    let mut acc = 0u32;
                    for i in 0..6 {
                        acc += r[i] as u32 * self.gram[i][j];
                    }
                    *o = (acc % self.q) as u8;
                }
                out
            })
            .collect();
        let red = self.subspace(&m);
        m = red.basis().to_vec();
        let pivots: Vec<usize> = m.iter().map(|r| r.iter().position(|&c| c != 0).unwrap()).collect();
        let mut basis = Vec::new();
        for free in (0..6).filter(|c| !pivots.contains(c)) {
            let mut v = [0u8; 6];
            v[free] = 1;
            for (r, &pc) in pivots.iter().enumerate() {
                v[pc] = ((self.q - m[r][free] as u32) % self.q) as u8;
            }
            basis.push(v);
        }
        self.subspace(&basis)
    }

    pub fn meet(&self, a: &Subspace, b: &Subspace) -> Subspace {
        self.perp(&self.join(&self.perp(a), &self.perp(b)))
    }

    pub fn contains_vec(&self, s: &Subspace, v: &Coords) -> bool {
        let mut vecs = s.basis().to_vec();
        vecs.push(*v);
        self.rank(&vecs) == s.dim()
    }

    pub fn contains(&self, outer: &Subspace, inner: &Subspace) -> bool {
        self.join(outer, inner).dim() == outer.dim()
    }

    /// Every vector of `s` (q^dim of them, zero included).
    pub fn vectors(&self, s: &Subspace) -> Vec<Coords> {
        let mut out = vec![[0u8; 6]];
        for b in s.basis() {
            let mut next = Vec::with_capacity(out.len() * self.q as usize);
            for v in &out {
                for c in 0..self.q {
                    next.push(self.axpy(v, c, b));
                }
            }
            out = next;
        }
        out
    }

    /// Normalized projective points of `s`, sorted.
    pub fn points(&self, s: &Subspace) -> Vec<Coords> {
        let set: BTreeSet<Coords> = self.vectors(s).iter().filter_map(|v| self.normalize(v)).collect();
        set.into_iter().collect()
    }

    /// True iff Q̂ vanishes on the whole subspace.
    pub fn is_totally_singular(&self, s: &Subspace) -> bool {
        let b = s.basis();
        b.iter().all(|u| self.qform(u) == 0) && b.iter().enumerate().all(|(i, u)| b[i + 1..].iter().all(|v| self.bform(u, v) == 0))
    }

    /// The orthogonal reflection `x ↦ x − (b̂(x,v)/Q̂(v))·v` in a non-singular `v`.
    pub fn reflect(&self, x: &Coords, v: &Coords) -> Coords {
        let qv = self.qform(v);
        assert!(qv != 0, "reflection needs a non-singular vector");
        let c = self.bform(x, v) * self.inv[qv as usize] % self.q;
        self.axpy(x, (self.q - c) % self.q, v)
    }
}

/// Materialised point, generator and hyperplane lists of Q⁻(5,q).
#[derive(Clone, Debug)]
pub struct QuadricTables {
    pub space: HatSpace,
    /// Singular points in canonical order.
    pub points: Vec<Coords>,
    /// Generators (totally singular lines) in canonical order.
    pub generators: Vec<Subspace>,
    /// Non-singular points, i.e. poles of the non-degenerate hyperplanes.
    pub poles: Vec<Coords>,
    /// The q+1 point ids on each generator.
    pub generator_points: Vec<Vec<u32>>,
    /// The q²+1 generator ids through each point.
    pub point_generators: Vec<Vec<u32>>,
    point_id: Vec<u32>,
    pole_id: Vec<u32>,
    generator_id: HashMap<Subspace, u32>,
}

impl QuadricTables {
    pub fn build(gf: &GaloisField) -> Result<Self, GeometryError> {
        Self::build_bounded(gf, DEFAULT_TABLE_BOUND)
    }

    pub fn build_bounded(gf: &GaloisField, bound: u32) -> Result<Self, GeometryError> {
        let q = gf.q();
        if q > bound {
            return Err(GeometryError::ResourceBound { q, bound });
        }
        let space = HatSpace::new(gf);
        let total = (q as usize).pow(6);
        let mut points = Vec::new();
        let mut poles = Vec::new();
        for n in 1..total {
            let v = space.decode(n);
            if space.normalize(&v) != Some(v) {
                continue;
            }
            if space.qform(&v) == 0 {
                points.push(v);
            } else {
                poles.push(v);
            }
        }
        let mut generators = BTreeSet::new();
        for (i, p) in points.iter().enumerate() {
            for r in &points[i + 1..] {
                if space.bform(p, r) == 0 {
                    generators.insert(space.subspace(&[*p, *r]));
                }
            }
        }
        Ok(Self::from_lists(space, points, generators.into_iter().collect(), poles))
    }

    fn from_lists(space: HatSpace, points: Vec<Coords>, generators: Vec<Subspace>, poles: Vec<Coords>) -> Self {
        let total = (space.q() as usize).pow(6);
        let mut point_id = vec![u32::MAX; total];
        for (i, p) in points.iter().enumerate() {
            point_id[space.encode(p)] = i as u32;
        }
        let mut pole_id = vec![u32::MAX; total];
        for (i, p) in poles.iter().enumerate() {
            pole_id[space.encode(p)] = i as u32;
        }
        let generator_id: HashMap<Subspace, u32> =
            generators.iter().enumerate().map(|(i, g)| (*g, i as u32)).collect();
        let mut generator_points = Vec::with_capacity(generators.len());
        let mut point_generators = vec![Vec::new(); points.len()];
        for (gid, g) in generators.iter().enumerate() {
            let ids: Vec<u32> = space.points(g).iter().map(|p| point_id[space.encode(p)]).collect();
            for &p in &ids {
                point_generators[p as usize].push(gid as u32);
            }
            generator_points.push(ids);
        }
        Self { space, points, generators, poles, generator_points, point_generators, point_id, pole_id, generator_id }
    }

    pub fn q(&self) -> u32 {
        self.space.q()
    }

    pub fn field(&self) -> &GaloisField {
        self.space.field()
    }

    /// Id of a singular point, after normalization.
    pub fn point_id(&self, v: &Coords) -> Option<u32> {
        let n = self.space.normalize(v)?;
        let id = self.point_id[self.space.encode(&n)];
        (id != u32::MAX).then_some(id)
    }

    /// Id of a non-singular point (hyperplane pole), after normalization.
    pub fn pole_id(&self, v: &Coords) -> Option<u32> {
        let n = self.space.normalize(v)?;
        let id = self.pole_id[self.space.encode(&n)];
        (id != u32::MAX).then_some(id)
    }

    pub fn generator_id(&self, s: &Subspace) -> Option<u32> {
        self.generator_id.get(s).copied()
    }

    pub fn generator(&self, id: u32) -> &Subspace {
        &self.generators[id as usize]
    }

    /// True iff the generators share no point.
    pub fn disjoint(&self, a: u32, b: u32) -> bool {
        let pa = &self.generator_points[a as usize];
        let pb = &self.generator_points[b as usize];
        !pa.iter().any(|p| pb.contains(p))
    }

    /// Generators sharing no point with `l`, in canonical order.
    pub fn disjoint_from(&self, l: u32) -> Vec<u32> {
        (0..self.generators.len() as u32).filter(|&m| self.disjoint(l, m)).collect()
    }

    /// True iff the generator lies in the hyperplane with the given pole.
    pub fn hyperplane_contains(&self, pole: u32, line: u32) -> bool {
        let p = &self.poles[pole as usize];
        self.generators[line as usize].basis().iter().all(|v| self.space.bform(p, v) == 0)
    }

    /// Non-degenerate hyperplanes (by pole id) containing the generator.
    pub fn hyperplanes_containing(&self, line: u32) -> Vec<u32> {
        (0..self.poles.len() as u32).filter(|&h| self.hyperplane_contains(h, line)).collect()
    }

    pub fn cache(&self) -> TableCache {
        TableCache {
            version: CACHE_VERSION,
            constants: self.field().constants(),
            points: self.points.clone(),
            generators: self.generators.iter().map(|g| g.basis().to_vec()).collect(),
            poles: self.poles.clone(),
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), GeometryError> {
        let text = serde_json::to_string(&self.cache())?;
        std::fs::write(path, text)?;
        Ok(())
    }

    /// Reloads tables written by [`save`](Self::save); the header must match
    /// the deterministic constants of `gf`.
    pub fn load(gf: &GaloisField, path: &Path) -> Result<Self, GeometryError> {
        let cache: TableCache = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::from_cache(gf, cache)
    }

    pub fn from_cache(gf: &GaloisField, cache: TableCache) -> Result<Self, GeometryError> {
        if cache.version != CACHE_VERSION {
            return Err(GeometryError::CacheMismatch(format!("version {}", cache.version)));
        }
        if cache.constants != gf.constants() {
            return Err(GeometryError::CacheMismatch(format!(
                "constants {:?} differ from {:?}",
                cache.constants,
                gf.constants()
            )));
        }
        let space = HatSpace::new(gf);
        let generators: Vec<Subspace> = cache.generators.iter().map(|b| space.subspace(b)).collect();
        for (g, b) in generators.iter().zip(&cache.generators) {
            if g.basis() != b.as_slice() {
                return Err(GeometryError::CacheMismatch("generator basis not reduced".into()));
            }
        }
        Ok(Self::from_lists(space, cache.points, generators, cache.poles))
    }
}

/// JSON layout of the table cache: a header of field constants followed by
/// the canonical lists.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCache {
    pub version: u32,
    pub constants: FieldConstants,
    pub points: Vec<Coords>,
    pub generators: Vec<Vec<Coords>>,
    pub poles: Vec<Coords>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn space(q: u32) -> HatSpace {
        HatSpace::new(&GaloisField::new(q).unwrap())
    }

    fn random_coords(rng: &mut ChaCha8Rng, q: u32) -> Coords {
        let mut v = [0u8; 6];
        for c in v.iter_mut() {
            *c = rng.gen_range(0..q) as u8;
        }
        v
    }

    #[test]
    fn qhat_examples() {
        let s = space(3);
        let gf = s.field().clone();
        let (o, z, t) = (gf.one(), gf.zero(), gf.theta());
        assert_eq!(s.qhat(&HatVector::new(o, z, z)), Fq(0));
        assert_eq!(s.qhat(&HatVector::new(z, o, z)), Fq(1));
        assert_eq!(s.qhat(&HatVector::new(o, z, t)), Fq(0));
        assert_eq!(s.bhat(&HatVector::new(o, z, z), &HatVector::new(z, z, o)), gf.base().elem(-2));
        assert_eq!(s.bhat(&HatVector::new(o, z, z), &HatVector::new(o, z, z)), Fq(0));
    }

    #[test]
    fn coordinate_model_agrees_with_triples() {
        for q in [3, 5, 7] {
            let s = space(q);
            let f = s.field().base().clone();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            for _ in 0..1000 {
                let u = random_coords(&mut rng, q);
                let v = random_coords(&mut rng, q);
                let (hu, hv) = (s.to_hat(&u), s.to_hat(&v));
                assert_eq!(s.to_coords(&hu), u);
                assert_eq!(s.bhat(&hu, &hv).value(), s.bform(&u, &v));
                assert_eq!(s.bhat(&hu, &hv), s.bhat(&hv, &hu));
                assert_eq!(s.bhat(&hu, &hu), f.mul(Fq(2), s.qhat(&hu)));
                assert_eq!(s.qhat(&hu).value(), s.qform(&u));
                let c = rng.gen_range(0..q);
                let w = s.axpy(&u, c, &v);
                let hw = s.to_hat(&w);
                let gf = s.field();
                assert_eq!(hw.x, gf.add(hu.x, gf.scale(Fq(c as u16), hv.x)));
            }
        }
    }

    #[test]
    fn lattice_laws() {
        let s = space(3);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        assert_eq!(s.perp(&s.whole()).dim(), 0);
        assert_eq!(s.perp(&Subspace::zero()), s.whole());
        for _ in 0..500 {
            let k = rng.gen_range(0..5);
            let a: Vec<Coords> = (0..k).map(|_| random_coords(&mut rng, 3)).collect();
            let m = rng.gen_range(0..5);
            let b: Vec<Coords> = (0..m).map(|_| random_coords(&mut rng, 3)).collect();
            let (a, b) = (s.subspace(&a), s.subspace(&b));
            assert_eq!(s.meet(&a, &a), a);
            assert_eq!(s.perp(&s.perp(&a)), a);
            assert_eq!(a.dim() + s.perp(&a).dim(), 6);
            assert_eq!(a.dim() + b.dim(), s.join(&a, &b).dim() + s.meet(&a, &b).dim());
            let mt = s.meet(&a, &b);
            assert!(s.contains(&a, &mt) && s.contains(&b, &mt));
            for v in s.vectors(&a) {
                assert!(s.contains_vec(&a, &v));
            }
        }
    }

    #[test]
    fn table_counts_q3() {
        let gf = GaloisField::new(3).unwrap();
        let t = QuadricTables::build(&gf).unwrap();
        assert_eq!(t.points.len(), 112);
        assert_eq!(t.generators.len(), 280);
        assert_eq!(t.poles.len(), 252);
        let l = 0;
        assert_eq!(t.hyperplanes_containing(l).len(), 36);
        let disjoint = t.disjoint_from(l);
        assert_eq!(disjoint.len(), 243);
        let hl: BTreeSet<u32> = t.hyperplanes_containing(l).into_iter().collect();
        for &m in disjoint.iter().take(20) {
            let common = t.hyperplanes_containing(m).into_iter().filter(|h| hl.contains(h)).count();
            assert_eq!(common, 4);
            let span = t.space.join(t.generator(l), t.generator(m));
            assert_eq!(span.dim(), 4);
        }
        for (gid, g) in t.generators.iter().enumerate() {
            assert!(t.space.is_totally_singular(g));
            assert_eq!(t.generator_points[gid].len(), 4);
            // l^⊥ meets the quadric exactly in l
            let lp = t.space.perp(g);
            assert_eq!(lp.dim(), 4);
            assert!(t.space.contains(&lp, g));
            let singular = t.space.points(&lp).iter().filter(|p| t.space.qform(p) == 0).count();
            assert_eq!(singular, 4);
        }
        // order (q, q²): q²+1 generators on every point
        for pg in &t.point_generators {
            assert_eq!(pg.len(), 10);
        }
    }

    #[test]
    fn table_counts_q5() {
        let gf = GaloisField::new(5).unwrap();
        let t = QuadricTables::build(&gf).unwrap();
        assert_eq!(t.points.len(), 6 * 126);
        assert_eq!(t.generators.len(), 26 * 126);
        assert_eq!(t.poles.len(), 25 * 126);
        assert_eq!(t.hyperplanes_containing(0).len(), 25 * 6);
        assert_eq!(t.disjoint_from(0).len(), 3125);
    }

    #[test]
    fn resource_bound_is_enforced() {
        let gf = GaloisField::new(11).unwrap();
        assert!(matches!(QuadricTables::build(&gf), Err(GeometryError::ResourceBound { q: 11, bound: 7 })));
    }

    #[test]
    fn reflections_are_isometries() {
        let s = space(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let v = random_coords(&mut rng, 5);
            if s.qform(&v) == 0 {
                continue;
            }
            let x = random_coords(&mut rng, 5);
            let y = random_coords(&mut rng, 5);
            assert_eq!(s.bform(&s.reflect(&x, &v), &s.reflect(&y, &v)), s.bform(&x, &y));
            assert_eq!(s.reflect(&s.reflect(&x, &v), &v), x);
        }
    }

    #[test]
    fn cache_round_trip() {
        let gf = GaloisField::new(3).unwrap();
        let t = QuadricTables::build(&gf).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q3.json");
        t.save(&path).unwrap();
        let back = QuadricTables::load(&gf, &path).unwrap();
        assert_eq!(back.points, t.points);
        assert_eq!(back.generators, t.generators);
        assert_eq!(back.poles, t.poles);
        assert_eq!(back.generator_points, t.generator_points);
        let again = back.cache();
        assert_eq!(serde_json::to_string(&again).unwrap(), std::fs::read_to_string(&path).unwrap());
        let gf5 = GaloisField::new(5).unwrap();
        assert!(matches!(QuadricTables::load(&gf5, &path), Err(GeometryError::CacheMismatch(_))));
    }
}
