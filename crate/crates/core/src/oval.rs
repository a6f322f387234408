//! Pseudo-ovals of Q⁻(5,q) given as sets of generator ids, and the
//! pseudo-conic obtained as the ρ-image of the CP-type special set.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::QuadricTables;
use crate::gf::GaloisField;
use crate::hermitian::{
    build_special_set, validate_special_set, zclass, HermitianError, HermitianSurface, SpecialSet, SpecialSetReport, ZClass,
};
use crate::klein::{perspective_classify, spanning, KleinError, KleinMap, Perspective, RhoTable};
use crate::rational::{rat, rat_string, Rat};
use crate::report::{all_passed, Check};
use crate::scheme::{classify_generators, macwilliams, InnerDistribution};

#[derive(Debug, Error)]
pub enum OvalError {
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Klein(#[from] KleinError),
    #[error(transparent)]
    Hermitian(#[from] HermitianError),
    #[error("unknown generator id {0}")]
    UnknownGenerator(u32),
}

/// First triple (in lexicographic id order) that fails to span V̂.
pub fn non_spanning_triple(tables: &QuadricTables, ids: &[u32]) -> Option<[u32; 3]> {
    for (a, &x) in ids.iter().enumerate() {
        for (b, &y) in ids.iter().enumerate().skip(a + 1) {
            if !tables.disjoint(x, y) {
                let z = ids.iter().copied().find(|&z| z != x && z != y)?;
                return Some([x, y, z]);
            }
            for &z in &ids[b + 1..] {
                let g = [x, y, z].map(|i| tables.generator(i));
                if !spanning(&tables.space, g) {
                    return Some([x, y, z]);
                }
            }
        }
    }
    None
}

/// Non-degenerate hyperplanes (by pole id) holding a number of members other
/// than 0 or 2, with that number.
pub fn hyperplane_violations(tables: &QuadricTables, ids: &[u32]) -> Vec<(u32, usize)> {
    (0..tables.poles.len() as u32)
        .filter_map(|h| {
            let c = ids.iter().filter(|&&g| tables.hyperplane_contains(h, g)).count();
            (c != 0 && c != 2).then_some((h, c))
        })
        .collect()
}

/// First triple that is not in perspective, if any.
pub fn non_perspective_triple(tables: &QuadricTables, ids: &[u32]) -> Result<Option<[u32; 3]>, OvalError> {
    for (a, &x) in ids.iter().enumerate() {
        for (b, &y) in ids.iter().enumerate().skip(a + 1) {
            for &z in &ids[b + 1..] {
                let g = [x, y, z].map(|i| tables.generator(i));
                if perspective_classify(&tables.space, g)? != Perspective::Perspective {
                    return Ok(Some([x, y, z]));
                }
            }
        }
    }
    Ok(None)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OvalReport {
    pub size: usize,
    pub expected_size: usize,
    pub any_three_span: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failing_triple: Option<[u32; 3]>,
    pub zero_or_two: bool,
    pub hyperplane_violations: usize,
    /// Every triple in perspective; only evaluated for spanning sets.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo_conic: Option<bool>,
    pub ok: bool,
}

/// Both pseudo-oval tests, and optionally the all-triples-in-perspective test.
pub fn check_oval(tables: &QuadricTables, ids: &[u32], perspective: bool) -> Result<OvalReport, OvalError> {
    if let Some(&bad) = ids.iter().find(|&&g| g as usize >= tables.generators.len()) {
        return Err(OvalError::UnknownGenerator(bad));
    }
    let mut ids = ids.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let q = tables.q() as usize;
    let expected_size = q * q + 1;
    let failing_triple = non_spanning_triple(tables, &ids);
    let violations = hyperplane_violations(tables, &ids);
    let any_three_span = failing_triple.is_none() && ids.len() >= 3;
    let pseudo_conic = if perspective && any_three_span {
        Some(non_perspective_triple(tables, &ids)?.is_none())
    } else {
        None
    };
    let ok = ids.len() == expected_size && any_three_span && violations.is_empty();
    Ok(OvalReport {
        size: ids.len(),
        expected_size,
        any_three_span,
        failing_triple,
        zero_or_two: violations.is_empty(),
        hyperplane_violations: violations.len(),
        pseudo_conic,
        ok,
    })
}

/// Generator ids of ρ(S) for the constructed special set S, sorted.
pub fn pseudo_conic(surface: &HermitianSurface, rho: &RhoTable) -> Result<Vec<u32>, OvalError> {
    rho_image(surface, rho, &build_special_set(surface.field())?)
}

/// Generator ids of ρ(S), sorted; points must lie on the surface.
pub fn rho_image(surface: &HermitianSurface, rho: &RhoTable, set: &SpecialSet) -> Result<Vec<u32>, OvalError> {
    let mut ids: Vec<u32> = set
        .points
        .iter()
        .map(|p| surface.id(p).map(|i| rho.generator(i)).ok_or(OvalError::Klein(KleinError::NotAGenerator)))
        .collect::<Result<_, _>>()?;
    ids.sort_unstable();
    Ok(ids)
}

/// a_i = |S′|⁻¹·#{(m,n) ∈ S′² : (m,n) ∈ R′_i} for S′ = S∖{l}, relations taken
/// in X_l.
pub fn inner_distribution_on(tables: &QuadricTables, l: u32, members: &[u32]) -> Result<InnerDistribution, OvalError> {
    let space = &tables.space;
    let lsub = tables.generator(l);
    let mut counts = [0i64; 6];
    for &m in members {
        for &n in members {
            let r = classify_generators(space, lsub, tables.generator(m), tables.generator(n))
                .map_err(|e| OvalError::Klein(KleinError::InvalidInput(e.to_string())))?;
            counts[r as usize] += 1;
        }
    }
    let size = members.len();
    Ok(InnerDistribution { size, a: counts.iter().map(|&c| crate::rational::ratio(c, size as i64)).collect() })
}

/// a𝒬 for a = (1,0,0,0,x,q²−x−1).
pub fn claimed_transform(q: u32, x: i64) -> Vec<Rat> {
    let q = q as i64;
    let half = |n: i64| Rat::new(n.into(), 2.into());
    vec![
        rat(q * q),
        rat(0),
        rat(q.pow(3) * (q - 1)),
        rat(q * q * (q * q - 1)),
        half(q.pow(3) * (2 * q * q - 4 * q + 2 - x)),
        half(q.pow(3) * x),
    ]
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineReport {
    pub q: u32,
    pub special_set: SpecialSetReport,
    pub z_all_e: bool,
    pub generators: Vec<u32>,
    pub base_line: u32,
    pub oval: OvalReport,
    pub inner_distribution: Vec<String>,
    pub macwilliams: Vec<String>,
    pub claimed_macwilliams: Vec<String>,
    pub checks: Vec<Check>,
    pub ok: bool,
}

/// Special set → z ≡ e → ρ-image → pseudo-oval tests → inner distribution in
/// X_l for l the smallest member → MacWilliams transform.
pub fn pseudo_conic_pipeline(
    tables: &QuadricTables,
    surface: &HermitianSurface,
    rho: &RhoTable,
) -> Result<PipelineReport, OvalError> {
    pipeline_for_set(tables, surface, rho, &build_special_set(surface.field())?)
}

/// The same checks for a given point set. Points off the surface fail the
/// special-set check and stop the pipeline there.
pub fn pipeline_for_set(
    tables: &QuadricTables,
    surface: &HermitianSurface,
    rho: &RhoTable,
    set: &SpecialSet,
) -> Result<PipelineReport, OvalError> {
    let gf = surface.field();
    let q = gf.q();
    let special_set = validate_special_set(surface, set);
    let pts = &set.points;
    let mut z_all_e = true;
    for a in 0..pts.len() {
        for b in a + 1..pts.len() {
            for c in b + 1..pts.len() {
                z_all_e &= zclass(gf, &pts[a], &pts[b], &pts[c]) == ZClass::E;
            }
        }
    }
    let generators = if special_set.off_surface.is_empty() { rho_image(surface, rho, set)? } else { Vec::new() };
    if generators.len() < 2 {
        let checks = vec![Check::new("special-set", "q²+1 pairwise non-collinear points, outside points see 0 or 2", false)];
        return Ok(PipelineReport {
            q,
            special_set,
            z_all_e,
            base_line: generators.first().copied().unwrap_or(0),
            oval: check_oval(tables, &generators, false)?,
            generators,
            inner_distribution: Vec::new(),
            macwilliams: Vec::new(),
            claimed_macwilliams: claimed_transform(q, 0).iter().map(rat_string).collect(),
            checks,
            ok: false,
        });
    }
    let oval = check_oval(tables, &generators, true)?;
    let base_line = generators[0];
    let rest = &generators[1..];
    let inner = inner_distribution_on(tables, base_line, rest)?;
    let mw = macwilliams(&inner, q);
    let claimed_mw = claimed_transform(q, 0);
    let q2 = (q * q) as i64;
    let claimed_inner = [1, 0, 0, 0, 0, q2 - 1].map(rat);
    let checks = vec![
        Check::new("special-set", "q²+1 pairwise non-collinear points, outside points see 0 or 2", special_set.ok),
        Check::new("z-identity", "z(P,Q,R) = e on every triple of the special set", z_all_e),
        Check::new("any-three-span", "any three ρ-images span V̂", oval.any_three_span),
        Check::new("zero-or-two", "every non-degenerate hyperplane holds 0 or 2 ρ-images", oval.zero_or_two),
        Check::new("perspective", "every triple of ρ-images is in perspective", oval.pseudo_conic == Some(true)),
        Check::new("inner-distribution", "a = (1,0,0,0,0,q²−1)", inner.a == claimed_inner)
            .with_detail(inner.to_strings().join(",")),
        Check::new("macwilliams", "a𝒬 = (q²,0,q³(q−1),q²(q²−1),q³(q−1)²,0)", mw == claimed_mw),
    ];
    let ok = all_passed(&checks);
    Ok(PipelineReport {
        q,
        special_set,
        z_all_e,
        generators,
        base_line,
        oval,
        inner_distribution: inner.to_strings(),
        macwilliams: mw.iter().map(rat_string).collect(),
        claimed_macwilliams: claimed_mw.iter().map(rat_string).collect(),
        checks,
        ok,
    })
}

/// Tables, surface and ρ for one q, built together.
pub struct Context {
    pub tables: QuadricTables,
    pub surface: HermitianSurface,
    pub rho: RhoTable,
}

impl Context {
    pub fn new(gf: &GaloisField) -> Result<Self, OvalError> {
        let tables = QuadricTables::build(gf)?;
        Self::with_tables(tables)
    }

    pub fn with_tables(tables: QuadricTables) -> Result<Self, OvalError> {
        let surface = HermitianSurface::new(tables.field());
        let km = KleinMap::new(&tables.space);
        let rho = RhoTable::build(&km, &surface, &tables)?;
        Ok(Self { tables, surface, rho })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(q: u32) -> Context {
        Context::new(&GaloisField::new(q).unwrap()).unwrap()
    }

    #[test]
    fn pipeline_q3() {
        let c = ctx(3);
        let r = pseudo_conic_pipeline(&c.tables, &c.surface, &c.rho).unwrap();
        assert!(r.ok, "{:?}", r.checks);
        assert_eq!(r.generators.len(), 10);
        assert_eq!(r.inner_distribution, ["1", "0", "0", "0", "0", "8"]);
        assert_eq!(r.macwilliams, ["9", "0", "54", "72", "108", "0"]);
    }

    #[test]
    fn concurrent_replacement_breaks_spanning() {
        let c = ctx(3);
        let mut s = pseudo_conic(&c.surface, &c.rho).unwrap();
        assert!(check_oval(&c.tables, &s, false).unwrap().ok);
        let p = c.tables.generator_points[s[0] as usize][0];
        let concurrent = *c.tables.point_generators[p as usize].iter().find(|&&g| !s.contains(&g)).unwrap();
        *s.last_mut().unwrap() = concurrent;
        let r = check_oval(&c.tables, &s, false).unwrap();
        assert!(!r.any_three_span);
        assert!(!r.ok);
    }

    #[test]
    fn transform_formula() {
        let t = claimed_transform(5, 0);
        assert_eq!(t.iter().map(rat_string).collect::<Vec<_>>(), ["25", "0", "500", "600", "2000", "0"]);
    }
}
