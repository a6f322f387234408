//! The Klein correspondence ρ = τ∘κ from lines of H(3,q²) to points of
//! Q⁻(5,q), the parametrisations L(F₀,F₁,F₂) of lines and π(H₀,H₁,H₂) of
//! solids of V̂, and three equivalent tests for perspective triples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Coords, HatSpace, HatVector, QuadricTables, Subspace};
use crate::gf::{Fq2, GaloisField, QPoly};
use crate::hermitian::{herm, zclass, HVec, HermitianSurface, ZClass};
use crate::linalg;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KleinError {
    #[error("the line is not totally isotropic")]
    NotIsotropic,
    #[error("no scalar brings τ∘κ of the line into V̂")]
    NoNormalization,
    #[error("the triple of q-polynomials does not define a line")]
    NotALine,
    #[error("subspace is not a generator of the quadric")]
    NotAGenerator,
    #[error("degenerate configuration: {0}")]
    Degenerate(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// κ followed by τ, for the fixed μ of norm −1.
#[derive(Clone, Debug)]
pub struct KleinMap {
    space: HatSpace,
    mu: Fq2,
}

impl KleinMap {
    pub fn new(space: &HatSpace) -> Self {
        let mu = space.field().mu();
        Self { space: space.clone(), mu }
    }

    pub fn mu(&self) -> Fq2 {
        self.mu
    }

    pub fn space(&self) -> &HatSpace {
        &self.space
    }

    fn gf(&self) -> &GaloisField {
        self.space.field()
    }

    /// (p₀₁, p₀₂, p₀₃, p₁₂, p₁₃, p₂₃) with p_ij = u_i v_j − u_j v_i.
    /// With this sign on p₂₃ the Klein quadric X₁X₆ − X₂X₅ + X₃X₄ is carried by τ
    /// onto a multiple of Q̂, so isotropic lines land in V̂.
    pub fn plucker(&self, u: &HVec, v: &HVec) -> [Fq2; 6] {
        let gf = self.gf();
        let p = |i: usize, j: usize| gf.sub(gf.mul(u[i], v[j]), gf.mul(u[j], v[i]));
        [p(0, 1), p(0, 2), p(0, 3), p(1, 2), p(1, 3), p(2, 3)]
    }

    /// τ(X) = (X₁, −μ^qX₂, X₃, −μ^qX₄, X₅, μ^qX₆).
    pub fn tau(&self, x: &[Fq2; 6]) -> [Fq2; 6] {
        let gf = self.gf();
        let mq = gf.frob(self.mu);
        let nmq = gf.neg(mq);
        [x[0], gf.mul(nmq, x[1]), x[2], gf.mul(nmq, x[3]), x[4], gf.mul(mq, x[5])]
    }

    /// ρ of the totally isotropic line ⟨u,v⟩, as a normalized singular point.
    pub fn rho_line(&self, u: &HVec, v: &HVec) -> Result<Coords, KleinError> {
        let gf = self.gf();
        if herm(gf, u, u) != gf.zero() || herm(gf, v, v) != gf.zero() || herm(gf, u, v) != gf.zero() {
            return Err(KleinError::NotIsotropic);
        }
        let y = self.tau(&self.plucker(u, v));
        if y.iter().all(|&c| c == gf.zero()) {
            return Err(KleinError::InvalidInput("u and v are dependent".into()));
        }
        for lambda in gf.nonzero_elements() {
            let s = y.map(|c| gf.mul(lambda, c));
            if s[1] == gf.frob(s[0]) && s[3] == gf.frob(s[2]) && s[5] == gf.frob(s[4]) {
                let c = self.space.to_coords(&HatVector::new(s[0], s[2], s[4]));
                return self.space.normalize(&c).ok_or(KleinError::NoNormalization);
            }
        }
        Err(KleinError::NoNormalization)
    }

    /// ρ(P): the generator formed by the images of the lines through P.
    pub fn rho_point(&self, surface: &HermitianSurface, p: &HVec) -> Result<Subspace, KleinError> {
        let gf = self.gf();
        if herm(gf, p, p) != gf.zero() {
            return Err(KleinError::NotIsotropic);
        }
        let dirs = surface.lines_through(p);
        let a = self.rho_line(p, &dirs[0])?;
        let b = self.rho_line(p, &dirs[1])?;
        Ok(self.space.subspace(&[a, b]))
    }
}

/// ρ on points as a pair of mutually inverse id tables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RhoTable {
    pub point_to_generator: Vec<u32>,
    pub generator_to_point: Vec<u32>,
}

impl RhoTable {
    pub fn build(km: &KleinMap, surface: &HermitianSurface, tables: &QuadricTables) -> Result<Self, KleinError> {
        let mut point_to_generator = Vec::with_capacity(surface.len());
        let mut generator_to_point = vec![u32::MAX; tables.generators.len()];
        for (pid, p) in surface.points.iter().enumerate() {
            let g = km.rho_point(surface, p)?;
            let gid = tables.generator_id(&g).ok_or(KleinError::NotAGenerator)?;
            if generator_to_point[gid as usize] != u32::MAX {
                return Err(KleinError::Degenerate(format!("ρ is not injective at generator {gid}")));
            }
            generator_to_point[gid as usize] = pid as u32;
            point_to_generator.push(gid);
        }
        if generator_to_point.contains(&u32::MAX) {
            return Err(KleinError::Degenerate("ρ is not surjective".into()));
        }
        Ok(Self { point_to_generator, generator_to_point })
    }

    pub fn generator(&self, point: u32) -> u32 {
        self.point_to_generator[point as usize]
    }

    pub fn point(&self, generator: u32) -> u32 {
        self.generator_to_point[generator as usize]
    }
}

/// `L(F₀,F₁,F₂) = {(F₀(x), F₁(x), F₂(x))₂ : x ∈ GF(q²)}`, canonicalised so that
/// the images of 1 and θ are the reduced echelon basis of the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GenLine {
    pub f: [QPoly; 3],
}

impl GenLine {
    /// Canonicalises an arbitrary triple; fails if it does not have rank 2.
    pub fn new(space: &HatSpace, f: [QPoly; 3]) -> Result<Self, KleinError> {
        Self::from_subspace(space, &Self::raw_subspace(space, &f))
    }

    /// The subspace swept out by a triple (possibly of dimension < 2).
    pub fn raw_subspace(space: &HatSpace, f: &[QPoly; 3]) -> Subspace {
        let gf = space.field();
        let image = |x: Fq2| space.to_coords(&HatVector::new(f[0].eval(gf, x), f[1].eval(gf, x), f[2].eval(gf, x)));
        space.subspace(&[image(gf.one()), image(gf.theta())])
    }

    /// Reads a 2-dimensional subspace as L(F₀,F₁,F₂) with F(1), F(θ) its basis.
    pub fn from_subspace(space: &HatSpace, s: &Subspace) -> Result<Self, KleinError> {
        if s.dim() != 2 {
            return Err(KleinError::NotALine);
        }
        let gf = space.field();
        let u = space.to_hat(&s.basis()[0]);
        let v = space.to_hat(&s.basis()[1]);
        let half = gf.inv(gf.int(2)).expect("q is odd");
        let inv_theta = gf.inv(gf.theta()).expect("θ ≠ 0");
        let poly = |ui: Fq2, vi: Fq2| {
            let w = gf.mul(vi, inv_theta);
            QPoly::new(gf.mul(half, gf.add(ui, w)), gf.mul(half, gf.sub(ui, w)))
        };
        Ok(Self { f: [poly(u.x, v.x), poly(u.y, v.y), poly(u.z, v.z)] })
    }

    pub fn subspace(&self, space: &HatSpace) -> Subspace {
        Self::raw_subspace(space, &self.f)
    }

    /// `L(F₀∘G, F₁∘G, F₂∘G)`: the same line for invertible G.
    pub fn reparametrize(&self, gf: &GaloisField, g: &QPoly) -> [QPoly; 3] {
        self.f.map(|fi| fi.compose(gf, g))
    }
}

/// The two conditions of the totally-singular criterion for L(F₀,F₁,F₂):
/// `f₂g₀^q + f₀g₂^q = f₁g₁^q` and
/// `f₀f₂^q + f₀^qf₂ + g₀g₂^q + g₀^qg₂ = f₁^{q+1} + g₁^{q+1}`.
pub fn totally_singular(gf: &GaloisField, f: &[QPoly; 3]) -> bool {
    let [p0, p1, p2] = f;
    let (f0, g0, f1, g1, f2, g2) = (p0.a, p0.b, p1.a, p1.b, p2.a, p2.b);
    let fr = |x| gf.frob(x);
    let lhs1 = gf.add(gf.mul(f2, fr(g0)), gf.mul(f0, fr(g2)));
    let rhs1 = gf.mul(f1, fr(g1));
    let lhs2 = gf.base().add(gf.trace(gf.mul(f0, fr(f2))), gf.trace(gf.mul(g0, fr(g2))));
    let rhs2 = gf.base().add(gf.norm(f1), gf.norm(g1));
    lhs1 == rhs1 && lhs2 == rhs2
}

/// `π(H₀,H₁,H₂) = {(x,y,z)₂ : H₀(x) + H₁(y) + H₂(z) = 0}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Solid {
    pub h: [QPoly; 3],
}

impl Solid {
    pub fn new(h: [QPoly; 3]) -> Self {
        Self { h }
    }

    /// Kernel of the map v ↦ H₀(x)+H₁(y)+H₂(z); dimension 4 for a genuine solid.
    pub fn subspace(&self, space: &HatSpace) -> Subspace {
        let gf = space.field();
        let f = gf.base();
        let mut rows = vec![vec![f.zero(); 6], vec![f.zero(); 6]];
        for j in 0..6 {
            let mut e = [0u8; 6];
            e[j] = 1;
            let v = space.to_hat(&e);
            let w = gf.add(gf.add(self.h[0].eval(gf, v.x), self.h[1].eval(gf, v.y)), self.h[2].eval(gf, v.z));
            let (w0, w1) = gf.parts(w);
            rows[0][j] = w0;
            rows[1][j] = w1;
        }
        let basis: Vec<Coords> = linalg::null_space(f, &rows, 6)
            .into_iter()
            .map(|r| {
                let mut c = [0u8; 6];
                for (ci, x) in c.iter_mut().zip(r) {
                    *ci = x.0 as u8;
                }
                c
            })
            .collect();
        space.subspace(&basis)
    }

    /// l^⊥ = π(F₂*∘K, −F₁*∘K, F₀*∘K) for a generator l = L(F₀,F₁,F₂).
    pub fn perp_of(gf: &GaloisField, l: &GenLine) -> Self {
        let k = QPoly::frobenius(gf);
        let adj_k = |p: &QPoly| p.adjoint(gf).compose(gf, &k);
        Self { h: [adj_k(&l.f[2]), adj_k(&l.f[1]).neg(gf), adj_k(&l.f[0])] }
    }
}

/// Containment test `H₀∘F₀ + H₁∘F₁ + H₂∘F₂ = 0`.
pub fn solid_contains(gf: &GaloisField, t: &Solid, l: &GenLine) -> bool {
    let mut acc = QPoly::zero();
    for i in 0..3 {
        acc = acc.add(gf, &t.h[i].compose(gf, &l.f[i]));
    }
    acc.is_zero()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Perspective {
    /// Some pair meets, or the three lines do not span V̂.
    NotSpanning,
    Neither,
    SemiPerspective,
    Perspective,
}

/// True iff the three lines are pairwise disjoint and span V̂.
pub fn spanning(space: &HatSpace, l: [&Subspace; 3]) -> bool {
    for i in 0..3 {
        for j in i + 1..3 {
            if space.join(l[i], l[j]).dim() != 4 {
                return false;
            }
        }
    }
    space.span(&[*l[0], *l[1], *l[2]]).dim() == 6
}

/// Geometric evaluation: Tᵢ = lᵢ^⊥, s_k = Tᵢ ∩ T_j, Σᵢ = ⟨sᵢ, lᵢ⟩, classified
/// by the vector dimension of Σ₁ ∩ Σ₂ ∩ Σ₃.
pub fn perspective_classify(space: &HatSpace, l: [&Subspace; 3]) -> Result<Perspective, KleinError> {
    if l[0] == l[1] || l[1] == l[2] || l[0] == l[2] {
        return Err(KleinError::InvalidInput("lines must be pairwise distinct".into()));
    }
    if !spanning(space, l) {
        return Ok(Perspective::NotSpanning);
    }
    let t: Vec<Subspace> = l.iter().map(|x| space.perp(x)).collect();
    let mut sigma = Vec::with_capacity(3);
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let s = space.meet(&t[j], &t[k]);
        let sig = space.join(&s, l[i]);
        if sig.dim() != 4 {
            return Err(KleinError::Degenerate(format!("s_{} meets l_{}", i + 1, i + 1)));
        }
        sigma.push(sig);
    }
    let common = space.meet(&space.meet(&sigma[0], &sigma[1]), &sigma[2]);
    match common.dim() {
        0 => Ok(Perspective::Neither),
        1 => Ok(Perspective::SemiPerspective),
        2 => Ok(Perspective::Perspective),
        d => Err(KleinError::Degenerate(format!("Σ₁∩Σ₂∩Σ₃ has dimension {d}"))),
    }
}

/// Perspective through the Klein correspondence: the ρ-preimages have z = e.
pub fn perspective_fast(
    tables: &QuadricTables,
    rho: &RhoTable,
    surface: &HermitianSurface,
    ids: [u32; 3],
) -> Result<bool, KleinError> {
    let l = ids.map(|i| tables.generator(i));
    if !spanning(&tables.space, [l[0], l[1], l[2]]) {
        return Err(KleinError::InvalidInput("lines must be pairwise disjoint and spanning".into()));
    }
    let p = ids.map(|i| *surface.point(rho.point(i)));
    Ok(zclass(surface.field(), &p[0], &p[1], &p[2]) == ZClass::E)
}

/// Standard position l = L(I,0,0), m = L(0,0,I), n = L(F₀,F₁,F₂):
/// perspective iff f₀^qf₂ + g₀g₂^q ∈ GF(q).
pub fn perspective_algebraic(gf: &GaloisField, n: &[QPoly; 3]) -> bool {
    let (f0, g0, f2, g2) = (n[0].a, n[0].b, n[2].a, n[2].b);
    let w = gf.add(gf.mul(gf.frob(f0), f2), gf.mul(g0, gf.frob(g2)));
    gf.is_base(w)
}

/// L(I,0,0) and L(0,0,I).
pub fn standard_pair(gf: &GaloisField) -> ([QPoly; 3], [QPoly; 3]) {
    let i = QPoly::identity(gf);
    let z = QPoly::zero();
    ([i, z, z], [z, z, i])
}

/// The generator ρ(⟨(1,t₁,t₂,t₃)⟩) = L(I,F₁,F₂) with F₁(x) = t₁^qx + t₂^qμx^q
/// and F₂(x) = (t₁^{q+1} − t₃)x + t₁t₂^qμx^q.
pub fn rho_affine_point(gf: &GaloisField, mu: Fq2, t: [Fq2; 3]) -> [QPoly; 3] {
    let [t1, t2, t3] = t;
    let f1 = QPoly::new(gf.frob(t1), gf.mul(gf.frob(t2), mu));
    let f2 = QPoly::new(gf.sub(gf.embed(gf.norm(t1)), t3), gf.mul(gf.mul(t1, gf.frob(t2)), mu));
    [QPoly::identity(gf), f1, f2]
}
