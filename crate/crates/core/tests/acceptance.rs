//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. `PSEUDOCONIC_PROBE_TIMEOUT` sets the per-probe limit of
//! AC10 in seconds (default 20).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pseudoconic::hermitian::HermitianSurface;
use pseudoconic::klein::{
    perspective_algebraic, perspective_classify, perspective_fast, spanning, standard_pair, GenLine, Perspective,
};
use pseudoconic::oval::{pseudo_conic, pseudo_conic_pipeline, Context};
use pseudoconic::scheme::{self, CheckMode, SchemeInstance};
use pseudoconic::search::{self, SolveMode, SolveOptions, Status};
use pseudoconic::usets::{self, GramMode};
use pseudoconic::GaloisField;

fn ctx(q: u32) -> &'static Context {
    static C3: OnceLock<Context> = OnceLock::new();
    static C5: OnceLock<Context> = OnceLock::new();
    let cell = if q == 3 { &C3 } else { &C5 };
    cell.get_or_init(|| Context::new(&GaloisField::new(q).unwrap()).unwrap())
}

fn xp(q: u32) -> SchemeInstance {
    let c = ctx(q);
    SchemeInstance::on_point(&c.surface, scheme::standard_point(&c.surface))
}

type Outcome = (bool, String);

fn ac1() -> Outcome {
    let start = Instant::now();
    let s = xp(3);
    let v = s.valencies().map(|v| v[1..].to_vec());
    let r = scheme::intersection_numbers(&s, CheckMode::Exhaustive);
    let secs = start.elapsed().as_secs_f64();
    let triples: u64 = r.pairs_checked.iter().sum::<u64>() * s.len() as u64;
    let ok = v == Some(vec![32, 2, 64, 96, 48]) && r.well_defined && r.ok && secs <= 60.0;
    (ok, format!("valencies {v:?}, {triples} ordered triples, {} deviations, {secs:.1}s", r.deviations.len()))
}

fn ac2() -> Outcome {
    let start = Instant::now();
    let r = scheme::intersection_numbers(&xp(5), CheckMode::Sampled { per_class: 200, seed: 2 });
    let ok = r.ok && r.pairs_checked.iter().all(|&n| n >= 200);
    (ok, format!("pairs per class {:?}, {} deviations, {:.1}s", r.pairs_checked, r.deviations.len(), start.elapsed().as_secs_f64()))
}

fn ac3() -> Outcome {
    let s3 = xp(3);
    let dense = scheme::bose_mesner_dense(&s3);
    let ex3 = scheme::intersection_numbers(&s3, CheckMode::Exhaustive);
    let reg3 = scheme::bose_mesner_regular(3, &ex3.structure().expect("well defined"));
    let ex5 = scheme::intersection_numbers(&xp(5), CheckMode::Exhaustive);
    let reg5 = ex5.structure().filter(|_| ex5.ok).map(|st| scheme::bose_mesner_regular(5, &st));
    let ok = dense.ok && reg3.ok && reg5.as_ref().is_some_and(|r| r.ok) && scheme::pq_identity(3) && scheme::pq_identity(5);
    let ranks5 = reg5.map(|r| r.ranks).unwrap_or_default();
    (ok, format!("q=3 dense ranks {:?}; q=5 exhaustive constants, ranks {ranks5:?}", dense.ranks))
}

fn ac4() -> Outcome {
    let mut ok = true;
    let mut detail = Vec::new();
    for q in [3, 5] {
        let c = ctx(q);
        let r = pseudo_conic_pipeline(&c.tables, &c.surface, &c.rho).unwrap();
        ok &= r.ok && r.special_set.ok && r.z_all_e && r.oval.any_three_span && r.oval.zero_or_two;
        ok &= r.macwilliams == r.claimed_macwilliams;
        detail.push(format!("q={q}: a=({}) aQ=({})", r.inner_distribution.join(","), r.macwilliams.join(",")));
    }
    (ok, detail.join("; "))
}

fn ac5() -> Outcome {
    let c = ctx(3);
    let p = scheme::standard_point(&c.surface);
    let xl = SchemeInstance::on_generator(&c.tables, c.rho.generator(p));
    let r = scheme::rho_transport(&xp(3), &xl, &c.rho).unwrap();
    (r.pairs == 243 * 243 && r.mismatches == 0, format!("{} pairs, {} mismatches", r.pairs, r.mismatches))
}

fn ac6() -> Outcome {
    let c = ctx(3);
    let (t, sp) = (&c.tables, &c.tables.space);
    let gf = t.field();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let ng = t.generators.len() as u32;
    let (mut random, mut random_bad, mut persp) = (0, 0, 0);
    while random < 1000 {
        let ids = [rng.gen_range(0..ng), rng.gen_range(0..ng), rng.gen_range(0..ng)];
        let g = ids.map(|i| t.generator(i));
        if !spanning(sp, g) {
            continue;
        }
        let geo = perspective_classify(sp, g).unwrap() == Perspective::Perspective;
        let z = perspective_fast(t, &c.rho, &c.surface, ids).unwrap();
        random_bad += usize::from(geo != z);
        persp += usize::from(geo);
        random += 1;
    }
    // standard position: l = L(I,0,0), m = L(0,0,I), every spanning n
    let (l, m) = standard_pair(gf);
    let (l, m) = (GenLine::raw_subspace(sp, &l), GenLine::raw_subspace(sp, &m));
    let (lid, mid) = (t.generator_id(&l).unwrap(), t.generator_id(&m).unwrap());
    let (mut fixtures, mut fixture_bad) = (0, 0);
    for (nid, n) in t.generators.iter().enumerate() {
        if !spanning(sp, [&l, &m, n]) {
            continue;
        }
        let geo = perspective_classify(sp, [&l, &m, n]).unwrap() == Perspective::Perspective;
        let alg = perspective_algebraic(gf, &GenLine::from_subspace(sp, n).unwrap().f);
        let z = perspective_fast(t, &c.rho, &c.surface, [lid, mid, nid as u32]).unwrap();
        fixture_bad += usize::from(geo != alg || alg != z);
        fixtures += 1;
    }
    let ok = random_bad == 0 && fixture_bad == 0 && persp > 0 && persp < random;
    (
        ok,
        format!(
            "{random} random spanning triples ({persp} in perspective), {random_bad} disagreements; \
             {fixtures} standard-position triples, {fixture_bad} disagreements"
        ),
    )
}

fn ac7() -> Outcome {
    let start = Instant::now();
    let c = ctx(3);
    let t = &c.tables;
    let l = pseudo_conic(&c.surface, &c.rho).unwrap()[0];
    let s = SchemeInstance::on_generator(t, l);
    let e = usets::enumerate_all(t, l).unwrap();
    let per_flag_ok = e.per_flag.iter().all(|&(_, n)| n == 108);
    let failing = e.usets.iter().filter(|u| !usets::check_identities(t, &s, u).unwrap().ok()).count();
    let sp = usets::spectral_suite(&s, &e.vectors, GramMode::Exhaustive).unwrap();
    let gram_ok = sp.gram.mismatches == 0 && sp.gram.pairs_per_class[1..].iter().all(|&n| n >= 100);
    let secs = start.elapsed().as_secs_f64();
    let ok = per_flag_ok
        && e.usets.len() == 432
        && e.distinct_usets == 432
        && e.vectors.len() == 864
        && failing == 0
        && sp.dual_degree_15 == 864
        && sp.rank == 104
        && sp.m1_plus_m5 == "104"
        && gram_ok
        && secs <= 900.0;
    (
        ok,
        format!(
            "432 U-sets ({failing} failing identities), |V_l| = {}, dual degree {{1,5}} for {}, rank {} = m1+m5 {}, \
             |V_l| vs size formula {} (dimension matches formula: {}), Gram pairs {:?}, {secs:.1}s",
            e.vectors.len(),
            sp.dual_degree_15,
            sp.rank,
            sp.m1_plus_m5,
            sp.size_formula,
            sp.dimension_matches_formula,
            sp.gram.pairs_per_class
        ),
    )
}

fn ac8() -> Outcome {
    let surface = HermitianSurface::new(ctx(3).tables.field());
    let r = scheme::quotient_scheme(&xp(3), &surface).unwrap();
    let phi = r.phi.as_ref();
    let ok = r.ok && r.parameters == Some([81, 32, 13, 12]) && phi.is_some_and(|p| p.ok && p.pairs_checked == 81 * 80);
    (ok, format!("parameters {:?}, φ pairs {:?}", r.parameters, phi.map(|p| (p.pairs_checked, p.agreements))))
}

fn ac9() -> Outcome {
    let start = Instant::now();
    let c = ctx(3);
    let t = &c.tables;
    let l = pseudo_conic(&c.surface, &c.rho).unwrap()[0];
    let p = search::build_problem(t, l, Vec::new()).unwrap();
    let us = usets::line_usets(t, l).unwrap();
    let mut infeasible = 0;
    for (i, u) in us.iter().enumerate() {
        let pu = p.with_sides(vec![search::uset_constraint(&format!("u{i}"), u)]).unwrap();
        let r = search::solve(&pu, &SolveOptions { mode: SolveMode::ProveInfeasible, ..Default::default() });
        infeasible += usize::from(r.status == Status::Infeasible);
    }
    // plain xM = 2y model: no pairwise pruning, no implied constraints
    let bare = SolveOptions { pairwise: false, through_l: false, ..Default::default() };
    let all = search::solve(&p, &bare);
    let kinds = search::classify_solutions(t, l, &all.solutions).unwrap();
    let conics = kinds.get("pseudo-conic").copied().unwrap_or(0);
    let complete = all.exhausted.len() == all.branches;
    let ok = infeasible == us.len() && us.len() == 432 && complete && !all.solutions.is_empty() && conics == all.solutions.len();
    (
        ok,
        format!(
            "(a) {infeasible}/{} U-sets infeasible; (b) {} solutions, {conics} verify as pseudo-conics; {:.1}s",
            us.len(),
            all.solutions.len(),
            start.elapsed().as_secs_f64()
        ),
    )
}

fn ac10() -> Outcome {
    let secs: u64 = std::env::var("PSEUDOCONIC_PROBE_TIMEOUT").ok().and_then(|s| s.parse().ok()).unwrap_or(20);
    let c = ctx(5);
    let t = &c.tables;
    let l = pseudo_conic(&c.surface, &c.rho).unwrap()[0];
    let p = search::build_problem(t, l, Vec::new()).unwrap();
    let probes = search::uset_probes(t, &p, 20, 10, Some(Duration::from_secs(secs))).unwrap();
    let count = |s: Status| probes.iter().filter(|r| r.status == s).count();
    let (inf, feas, to) = (count(Status::Infeasible), count(Status::Feasible), count(Status::Timeout));
    (inf >= 20, format!("{inf} confirmed infeasible, {feas} feasible, {to} timed out at {secs}s each"))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 10] = [
        ("AC1", "scheme exactness q=3", ac1),
        ("AC2", "scheme exactness q=5 (sampled)", ac2),
        ("AC3", "Bose-Mesner identities q=3,5", ac3),
        ("AC4", "pseudo-conic pipeline q=3,5", ac4),
        ("AC5", "rho-intertwining q=3", ac5),
        ("AC6", "perspective tri-oracle q=3", ac6),
        ("AC7", "U-set suite q=3", ac7),
        ("AC8", "quotient scheme q=3", ac8),
        ("AC9", "search reproduction q=3", ac9),
        ("AC10", "search probe q=5", ac10),
    ];
    let mut failed = 0;
    for (id, name, f) in criteria {
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(r) => r,
            Err(e) => (false, format!("panicked: {}", e.downcast_ref::<String>().cloned().unwrap_or_default())),
        };
        failed += usize::from(!ok);
        println!("{} {id} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
