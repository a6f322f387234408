use std::sync::OnceLock;

use proptest::prelude::*;

use pseudoconic::geometry::{HatVector, QuadricTables};
use pseudoconic::hermitian::{self, HVec, HermitianSurface, ZClass};
use pseudoconic::klein::{perspective_classify, spanning};
use pseudoconic::oval::{pseudo_conic, Context};
use pseudoconic::search::{self, SolveOptions};
use pseudoconic::{Fq2, GaloisField};

fn ctx() -> &'static Context {
    static C: OnceLock<Context> = OnceLock::new();
    C.get_or_init(|| Context::new(&GaloisField::new(3).unwrap()).unwrap())
}

fn field() -> &'static GaloisField {
    ctx().tables.field()
}

fn scale(gf: &GaloisField, c: Fq2, v: &HVec) -> HVec {
    v.map(|x| gf.mul(c, x))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn hat_coordinates_round_trip(x in 0u16..9, y in 0u16..9, z in 0u16..9) {
        let sp = &ctx().tables.space;
        let v = HatVector::new(Fq2(x), Fq2(y), Fq2(z));
        prop_assert_eq!(sp.to_hat(&sp.to_coords(&v)), v);
    }

    #[test]
    fn zclass_ignores_representatives_and_reversal(
        p in 0u32..280, q in 0u32..280, r in 0u32..280,
        a in 1u16..9, b in 1u16..9, c in 1u16..9,
    ) {
        let gf = field();
        let s = &ctx().surface;
        let (p, q, r) = (s.point(p), s.point(q), s.point(r));
        let z = hermitian::zclass(gf, p, q, r);
        let scaled = hermitian::zclass(gf, &scale(gf, Fq2(a), p), &scale(gf, Fq2(b), q), &scale(gf, Fq2(c), r));
        prop_assert_eq!(z, scaled);
        // reversal conjugates the product, which negates a Γ label mod q+1
        let reversed = match z {
            ZClass::Gamma(k) => ZClass::Gamma((4 - k) % 4),
            other => other,
        };
        prop_assert_eq!(reversed, hermitian::zclass(gf, r, q, p));
        let collinear = [(p, q), (q, r), (r, p)].iter().any(|(x, y)| hermitian::herm(gf, x, y) == Fq2(0));
        prop_assert_eq!(z == ZClass::Zero, collinear);
    }

    #[test]
    fn subspace_form_is_canonical(
        ids in proptest::collection::vec(0usize..729, 1..5),
        mix in proptest::collection::vec(0u32..3, 16),
    ) {
        let sp = &ctx().tables.space;
        let vecs: Vec<_> = ids.iter().map(|&i| sp.decode(i)).collect();
        let s = sp.subspace(&vecs);
        // add random combinations of the generators: same subspace, same basis
        let mut more = vecs.clone();
        for (k, w) in mix.chunks(4).enumerate() {
            let mut v = vecs[k % vecs.len()];
            for (j, &c) in w.iter().enumerate() {
                v = sp.axpy(&v, c, &vecs[j % vecs.len()]);
            }
            more.push(v);
        }
        more.reverse();
        prop_assert_eq!(sp.subspace(&more), s.clone());
        prop_assert!(s.dim() <= 6);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 500, max_global_rejects: 100_000, ..ProptestConfig::default() })]

    #[test]
    fn perspective_is_invariant_under_reflections(
        a in 0u32..280, b in 0u32..280, c in 0u32..280, pole in 0usize..729,
    ) {
        let t = &ctx().tables;
        let sp = &t.space;
        let v = sp.decode(pole);
        prop_assume!(sp.qform(&v) != 0);
        let g = [a, b, c].map(|i| t.generator(i));
        prop_assume!(spanning(sp, g));
        let moved: Vec<_> = g.iter().map(|s| sp.subspace(&s.basis().iter().map(|x| sp.reflect(x, &v)).collect::<Vec<_>>())).collect();
        prop_assert_eq!(
            perspective_classify(sp, g).unwrap(),
            perspective_classify(sp, [&moved[0], &moved[1], &moved[2]]).unwrap()
        );
    }
}

#[test]
fn surface_and_quadric_counts_q5() {
    let gf = GaloisField::new(5).unwrap();
    let s = HermitianSurface::new(&gf);
    assert_eq!(s.len(), (25 + 1) * (125 + 1));
    let t = QuadricTables::build(&gf).unwrap();
    assert_eq!(t.generators.len(), s.len());
    let l = 0;
    assert_eq!(t.disjoint_from(l).len(), 3125);
}

#[test]
fn search_results_do_not_depend_on_thread_count() {
    let c = ctx();
    let l = pseudo_conic(&c.surface, &c.rho).unwrap()[0];
    let p = search::build_problem(&c.tables, l, Vec::new()).unwrap();
    let run = |threads| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| search::solve(&p, &SolveOptions::default()))
    };
    let (one, three) = (run(1), run(3));
    assert_eq!(one.solutions.len(), 324);
    assert_eq!(one.solutions, three.solutions);
    assert_eq!(one.status, three.status);
    for s in &one.solutions {
        assert!(search::verify_solution(&c.tables, l, s).unwrap().ok);
    }
}
