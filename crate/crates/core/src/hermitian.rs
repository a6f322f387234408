//! The Hermitian surface H(3,q²) of the form
//! h(x,y) = x₀y₃^q − x₁y₁^q − x₂y₂^q + x₃y₀^q, Shult's z-invariant and special
//! sets of CP-type.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gf::{Fq, Fq2, GaloisField};
use crate::linalg;

/// A vector of GF(q²)⁴.
pub type HVec = [Fq2; 4];

#[derive(Debug, Error)]
pub enum HermitianError {
    #[error("special set construction produced {found} points, expected {expected}")]
    ConstructionFailure { found: usize, expected: usize },
    #[error("points {0} and {1} are collinear (or equal)")]
    Collinear(usize, usize),
    #[error("malformed special set file: {0}")]
    Format(String),
}

/// The coset class of z(P,Q,R) = h(p,q)h(q,r)h(r,p)·GF(q)*.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ZClass {
    /// Some pair of the three points is collinear (or equal).
    Zero,
    /// The product lies in GF(q)*.
    E,
    /// The product lies in θ·GF(q)*.
    T,
    /// Any other coset; the label is the discrete logarithm mod q+1.
    Gamma(u32),
}

/// Points of H(3,q²) in canonical order.
#[derive(Clone, Debug)]
pub struct HermitianSurface {
    gf: GaloisField,
    pub points: Vec<HVec>,
    index: HashMap<HVec, u32>,
}

impl HermitianSurface {
    pub fn new(gf: &GaloisField) -> Self {
        let mut points = Vec::new();
        let n = gf.size() as u16;
        // leading coordinate 1, zeros before it, arbitrary after it
        for lead in 0..4 {
            let free = 3 - lead;
            let total = (n as usize).pow(free as u32);
            for mut k in 0..total {
                let mut v = [gf.zero(); 4];
                v[lead] = gf.one();
                for i in (lead + 1..4).rev() {
                    v[i] = Fq2((k % n as usize) as u16);
                    k /= n as usize;
                }
                if herm(gf, &v, &v) == gf.zero() {
                    points.push(v);
                }
            }
        }
        points.sort();
        let index = points.iter().enumerate().map(|(i, p)| (*p, i as u32)).collect();
        Self { gf: gf.clone(), points, index }
    }

    pub fn field(&self) -> &GaloisField {
        &self.gf
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Id of the point spanned by `v` (normalized first), if it is on the surface.
    pub fn id(&self, v: &HVec) -> Option<u32> {
        let n = normalize(&self.gf, v)?;
        self.index.get(&n).copied()
    }

    pub fn point(&self, id: u32) -> &HVec {
        &self.points[id as usize]
    }

    /// Second basis vectors `d` of the q+1 totally isotropic lines ⟨p,d⟩
    /// through the point `p`, in canonical order.
    pub fn lines_through(&self, p: &HVec) -> Vec<HVec> {
        let gf = &self.gf;
        let partner = (0..4)
            .map(|i| {
                let mut e = [gf.zero(); 4];
                e[i] = gf.one();
                e
            })
            .find(|e| herm(gf, p, e) != gf.zero())
            .expect("h is non-degenerate");
        let rows = vec![perp_row(gf, p).to_vec(), perp_row(gf, &partner).to_vec()];
        let w = linalg::null_space(gf, &rows, 4);
        let (a, b) = (w[0].clone(), w[1].clone());
        let mut dirs = Vec::new();
        let combo = |s: Fq2, t: Fq2| -> HVec {
            let mut v = [gf.zero(); 4];
            for i in 0..4 {
                v[i] = gf.add(gf.mul(s, a[i]), gf.mul(t, b[i]));
            }
            v
        };
        let mut cands = vec![combo(gf.zero(), gf.one())];
        cands.extend(gf.elements().map(|t| combo(gf.one(), t)));
        for d in cands {
            if herm(gf, &d, &d) == gf.zero() {
                dirs.push(normalize(gf, &d).expect("non-zero"));
            }
        }
        dirs.sort();
        dirs
    }
}

/// Coefficients `c` with `h(v, p) = Σ cᵢ vᵢ`.
fn perp_row(gf: &GaloisField, p: &HVec) -> [Fq2; 4] {
    [gf.frob(p[3]), gf.neg(gf.frob(p[1])), gf.neg(gf.frob(p[2])), gf.frob(p[0])]
}

/// Scales a non-zero vector so its first non-zero entry is 1.
pub fn normalize(gf: &GaloisField, v: &HVec) -> Option<HVec> {
    let lead = v.iter().find(|&&c| c != gf.zero())?;
    let s = gf.inv(*lead)?;
    Some(v.map(|c| gf.mul(s, c)))
}

/// h(x,y) = x₀y₃^q − x₁y₁^q − x₂y₂^q + x₃y₀^q.
pub fn herm(gf: &GaloisField, x: &HVec, y: &HVec) -> Fq2 {
    let t0 = gf.mul(x[0], gf.frob(y[3]));
    let t1 = gf.mul(x[1], gf.frob(y[1]));
    let t2 = gf.mul(x[2], gf.frob(y[2]));
    let t3 = gf.mul(x[3], gf.frob(y[0]));
    gf.add(gf.sub(gf.sub(t0, t1), t2), t3)
}

/// Classifies a non-zero product h(p,q)h(q,r)h(r,p) by its coset.
pub fn classify_product(gf: &GaloisField, w: Fq2) -> ZClass {
    match gf.coset_label(w) {
        None => ZClass::Zero,
        Some(0) => ZClass::E,
        Some(l) if l == (gf.q() + 1) / 2 => ZClass::T,
        Some(l) => ZClass::Gamma(l),
    }
}

/// The z-invariant of three points, from any representatives.
pub fn zclass(gf: &GaloisField, p: &HVec, q: &HVec, r: &HVec) -> ZClass {
    let w = gf.mul(gf.mul(herm(gf, p, q), herm(gf, q, r)), herm(gf, r, p));
    classify_product(gf, w)
}

/// Rank-based test of whether ⟨p,q,r⟩ is degenerate for h (a line counts as
/// degenerate). Errors when some pair is collinear.
pub fn degenerate_span_test(gf: &GaloisField, p: &HVec, q: &HVec, r: &HVec) -> Result<bool, HermitianError> {
    let pts = [p, q, r];
    for i in 0..3 {
        for j in i + 1..3 {
            if herm(gf, pts[i], pts[j]) == gf.zero() {
                return Err(HermitianError::Collinear(i, j));
            }
        }
    }
    let rows: Vec<Vec<Fq2>> = pts.iter().map(|v| v.to_vec()).collect();
    if linalg::rank(gf, &rows) < 3 {
        return Ok(true);
    }
    let gram: Vec<Vec<Fq2>> = pts.iter().map(|a| pts.iter().map(|b| herm(gf, a, b)).collect()).collect();
    Ok(linalg::rank(gf, &gram) < 3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Constructed,
    UserSupplied,
}

/// A candidate special set of q²+1 points of H(3,q²).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpecialSet {
    pub points: Vec<HVec>,
    pub provenance: Provenance,
}

/// The CP-type special set {(x₀, x₁, δx₂, x₃) : xᵢ ∈ GF(q)} ∩ H(3,q²), where
/// N(δ) = ν and −ν is a non-square.
pub fn build_special_set(gf: &GaloisField) -> Result<SpecialSet, HermitianError> {
    let q = gf.q();
    let delta = gf.delta();
    let mut points = Vec::new();
    for n in 1..q.pow(4) {
        let mut c = [0u32; 4];
        let mut k = n;
        for x in c.iter_mut().rev() {
            *x = k % q;
            k /= q;
        }
        let e = |i: usize| gf.embed(Fq(c[i] as u16));
        let v = [e(0), e(1), gf.mul(delta, e(2)), e(3)];
        if herm(gf, &v, &v) != gf.zero() {
            continue;
        }
        let v = normalize(gf, &v).expect("non-zero");
        if !points.contains(&v) {
            points.push(v);
        }
    }
    points.sort();
    let expected = (q * q + 1) as usize;
    if points.len() != expected {
        return Err(HermitianError::ConstructionFailure { found: points.len(), expected });
    }
    Ok(SpecialSet { points, provenance: Provenance::Constructed })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecialSetReport {
    pub size: usize,
    pub expected_size: usize,
    pub off_surface: Vec<usize>,
    pub collinear_pairs: Vec<(usize, usize)>,
    /// Outside points (surface ids) orthogonal to a number of members other than 0 or 2.
    pub violations: Vec<(u32, usize)>,
    pub ok: bool,
}

/// Checks size, pairwise non-collinearity and the 0-or-2 orthogonality
/// property against every outside point of the surface.
pub fn validate_special_set(surface: &HermitianSurface, s: &SpecialSet) -> SpecialSetReport {
    let gf = surface.field();
    let q = gf.q() as usize;
    let expected_size = q * q + 1;
    let off_surface: Vec<usize> =
        (0..s.points.len()).filter(|&i| herm(gf, &s.points[i], &s.points[i]) != gf.zero()).collect();
    let mut collinear_pairs = Vec::new();
    for i in 0..s.points.len() {
        for j in i + 1..s.points.len() {
            if herm(gf, &s.points[i], &s.points[j]) == gf.zero() {
                collinear_pairs.push((i, j));
            }
        }
    }
    let members: Vec<Option<u32>> = s.points.iter().map(|p| surface.id(p)).collect();
    let mut violations = Vec::new();
    for (id, p) in surface.points.iter().enumerate() {
        if members.contains(&Some(id as u32)) {
            continue;
        }
        let count = s.points.iter().filter(|m| herm(gf, p, m) == gf.zero()).count();
        if count != 0 && count != 2 {
            violations.push((id as u32, count));
        }
    }
    let ok = s.points.len() == expected_size && off_surface.is_empty() && collinear_pairs.is_empty() && violations.is_empty();
    SpecialSetReport { size: s.points.len(), expected_size, off_surface, collinear_pairs, violations, ok }
}

/// Each coordinate is written as `[a₀, a₁]`.
pub fn special_set_to_json(gf: &GaloisField, s: &SpecialSet) -> serde_json::Value {
    let pts: Vec<Vec<[u16; 2]>> = s
        .points
        .iter()
        .map(|p| {
            p.iter()
                .map(|&c| {
                    let (a0, a1) = gf.parts(c);
                    [a0.0, a1.0]
                })
                .collect()
        })
        .collect();
    serde_json::to_value(pts).expect("plain arrays serialize")
}

pub fn special_set_from_json(gf: &GaloisField, value: &serde_json::Value) -> Result<SpecialSet, HermitianError> {
    let raw: Vec<Vec<[u16; 2]>> =
        serde_json::from_value(value.clone()).map_err(|e| HermitianError::Format(e.to_string()))?;
    let q = gf.q() as u16;
    let mut points = Vec::with_capacity(raw.len());
    for p in raw {
        if p.len() != 4 {
            return Err(HermitianError::Format(format!("expected 4 coordinates, found {}", p.len())));
        }
        let mut v = [gf.zero(); 4];
        for (i, [a0, a1]) in p.into_iter().enumerate() {
            if a0 >= q || a1 >= q {
                return Err(HermitianError::Format(format!("coordinate [{a0},{a1}] out of range")));
            }
            v[i] = gf.from_parts(Fq(a0), Fq(a1));
        }
        points.push(normalize(gf, &v).ok_or_else(|| HermitianError::Format("zero vector".into()))?);
    }
    Ok(SpecialSet { points, provenance: Provenance::UserSupplied })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(gf: &GaloisField, a: [Fq2; 4]) -> HVec {
        let _ = gf;
        a
    }

    #[test]
    fn herm_examples() {
        let gf = GaloisField::new(3).unwrap();
        let (o, z) = (gf.one(), gf.zero());
        assert_eq!(herm(&gf, &[z, z, z, o], &[o, z, z, z]), o);
        assert_eq!(herm(&gf, &[o, o, o, o], &[o, o, o, o]), z);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let x: HVec = std::array::from_fn(|_| Fq2(rng.gen_range(0..9)));
            let y: HVec = std::array::from_fn(|_| Fq2(rng.gen_range(0..9)));
            assert_eq!(herm(&gf, &y, &x), gf.frob(herm(&gf, &x, &y)));
        }
    }

    #[test]
    fn surface_counts() {
        for q in [3u32, 5] {
            let gf = GaloisField::new(q).unwrap();
            let s = HermitianSurface::new(&gf);
            assert_eq!(s.len() as u32, (q * q + 1) * (q * q * q + 1));
            let p = [gf.zero(), gf.zero(), gf.zero(), gf.one()];
            let non_collinear = s.points.iter().filter(|r| herm(&gf, &p, r) != gf.zero()).count();
            assert_eq!(non_collinear as u32, q.pow(5));
            for pt in s.points.iter().step_by(7) {
                let dirs = s.lines_through(pt);
                assert_eq!(dirs.len() as u32, q + 1);
                for d in &dirs {
                    assert_eq!(herm(&gf, pt, d), gf.zero());
                    assert_eq!(herm(&gf, d, d), gf.zero());
                }
            }
        }
    }

    #[test]
    fn zclass_examples() {
        let gf = GaloisField::new(3).unwrap();
        let (o, z, t) = (gf.one(), gf.zero(), gf.theta());
        let p = v(&gf, [z, z, z, o]);
        let q = v(&gf, [o, z, z, z]);
        let s = HermitianSurface::new(&gf);
        for r in s.points.iter().filter(|r| r[0] == o && r[3] != z) {
            let expect = classify_product(&gf, gf.frob(r[3]));
            assert_eq!(zclass(&gf, &p, &q, r), expect);
            if gf.is_base(r[3]) {
                assert_eq!(expect, ZClass::E);
            }
        }
        let r2 = gf.nonzero_elements().find(|&x| gf.norm(x) == Fq(2)).unwrap();
        let r = [o, o, r2, t];
        assert_eq!(herm(&gf, &r, &r), z);
        assert_eq!(zclass(&gf, &p, &q, &r), ZClass::T);
        // a point on the hyperbolic line ⟨P,Q⟩
        let r = [o, z, z, t];
        assert_eq!(zclass(&gf, &p, &q, &r), ZClass::T);
        assert_eq!(degenerate_span_test(&gf, &p, &q, &r).unwrap(), true);
        assert!(degenerate_span_test(&gf, &p, &p, &r).is_err());
    }

    #[test]
    fn zclass_is_well_defined_and_matches_degeneracy() {
        for q in [3u32, 5] {
            let gf = GaloisField::new(q).unwrap();
            let s = HermitianSurface::new(&gf);
            let mut rng = ChaCha8Rng::seed_from_u64(q as u64);
            let mut checked = 0;
            while checked < 1000 {
                let pick = |rng: &mut ChaCha8Rng| s.points[rng.gen_range(0..s.len())];
                let (a, b, c) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
                let z = zclass(&gf, &a, &b, &c);
                let l1 = gf.nonzero_elements().nth(rng.gen_range(0..(q * q - 1) as usize)).unwrap();
                let l2 = gf.nonzero_elements().nth(rng.gen_range(0..(q * q - 1) as usize)).unwrap();
                let a2 = a.map(|x| gf.mul(l1, x));
                let c2 = c.map(|x| gf.mul(l2, x));
                assert_eq!(zclass(&gf, &a2, &b, &c2), z);
                let rev = zclass(&gf, &c, &b, &a);
                match (z, rev) {
                    (ZClass::Gamma(x), ZClass::Gamma(y)) => assert_eq!((x + y) % (q + 1), 0),
                    _ => assert_eq!(z, rev),
                }
                if z == ZClass::Zero {
                    continue;
                }
                assert_eq!(degenerate_span_test(&gf, &a, &b, &c).unwrap(), z == ZClass::T);
                checked += 1;
            }
        }
    }

    #[test]
    fn special_sets() {
        for (q, n) in [(3u32, 10usize), (5, 26)] {
            let gf = GaloisField::new(q).unwrap();
            let s = build_special_set(&gf).unwrap();
            assert_eq!(s.points.len(), n);
            let surface = HermitianSurface::new(&gf);
            let report = validate_special_set(&surface, &s);
            assert!(report.ok, "{report:?}");
            for i in 0..n {
                for j in i + 1..n {
                    for k in j + 1..n {
                        assert_eq!(zclass(&gf, &s.points[i], &s.points[j], &s.points[k]), ZClass::E);
                    }
                }
            }
            let json = special_set_to_json(&gf, &s);
            let back = special_set_from_json(&gf, &json).unwrap();
            assert_eq!(back.points, s.points);
            assert_eq!(back.provenance, Provenance::UserSupplied);
        }
    }

    #[test]
    fn tampered_special_set_fails() {
        let gf = GaloisField::new(3).unwrap();
        let surface = HermitianSurface::new(&gf);
        let mut s = build_special_set(&gf).unwrap();
        let keep = s.points[0];
        let replacement = surface
            .points
            .iter()
            .find(|p| **p != keep && herm(&gf, p, &keep) == gf.zero() && !s.points.contains(p))
            .copied()
            .unwrap();
        s.points[1] = replacement;
        let report = validate_special_set(&surface, &s);
        assert!(!report.ok);
        assert!(!report.collinear_pairs.is_empty());
    }
}
