//! `pseudoconic` command-line driver. Every subcommand prints one JSON report
//! and exits 0 on success, 1 when a verification fails, 2 on usage errors.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use pseudoconic::geometry::{QuadricTables, DEFAULT_TABLE_BOUND};
use pseudoconic::hermitian::{build_special_set, special_set_from_json, special_set_to_json};
use pseudoconic::oval::{pipeline_for_set, pseudo_conic, pseudo_conic_pipeline, Context};
use pseudoconic::rational::rat_string;
use pseudoconic::report::{all_passed, Check};
use pseudoconic::scheme::{self, CheckMode, SchemeInstance};
use pseudoconic::search::{self, FeasibilityProblem, SolveMode, SolveOptions, Status};
use pseudoconic::usets::{self, GramMode};
use pseudoconic::GaloisField;

#[derive(Parser)]
#[command(name = "pseudoconic", version, about = "Verification and search pipelines for pseudo-ovals of Q-(5,q)")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Worker threads; defaults to the number of cores.
    #[arg(long, global = true, env = "PSEUDOCONIC_THREADS")]
    threads: Option<usize>,
    /// Directory for cached quadric tables.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    /// Write the JSON report to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
    /// Seed for sampled checks and random probes.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Keep wall-clock timings in the report (they make reports differ between runs).
    #[arg(long, global = true)]
    timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// The five-class scheme on q⁵ points.
    #[command(subcommand)]
    Scheme(SchemeCmd),
    /// The pseudo-conic from the CP-type special set.
    #[command(subcommand)]
    Pseudoconic(PseudoconicCmd),
    /// U-sets on a fixed generator.
    #[command(subcommand)]
    Usets(UsetsCmd),
    /// Pseudo-oval feasibility search.
    #[command(subcommand)]
    Search(SearchCmd),
    /// Model export.
    #[command(subcommand)]
    Export(ExportCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum BaseKind {
    /// X_P on the points of H(3,q²) not collinear with P.
    Point,
    /// X_l on the generators of Q⁻(5,q) disjoint from l.
    Generator,
}

#[derive(Subcommand)]
enum SchemeCmd {
    /// Valencies, intersection matrices, Bose–Mesner identities, quotient scheme.
    Verify {
        #[arg(long)]
        q: u32,
        /// Check every ordered pair (default for q = 3).
        #[arg(long, conflicts_with = "samples")]
        exhaustive: bool,
        /// Sampled base pairs per relation (default 200 for q > 3).
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, value_enum, default_value = "point")]
        base: BaseKind,
        /// Also check the identities on the full q⁵×q⁵ matrices.
        #[arg(long)]
        dense: bool,
    },
    /// Eigenmatrices and multiplicities as exact rationals.
    Eigen {
        #[arg(long)]
        q: u32,
    },
}

#[derive(Subcommand)]
enum PseudoconicCmd {
    /// Construct the special set and its ρ-image, write them to FILE.
    Build {
        #[arg(long)]
        q: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run every check on a file written by `build`.
    Verify {
        #[arg(long)]
        q: u32,
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum UsetsCmd {
    /// Count U-sets per flag and per line.
    Enumerate {
        #[arg(long)]
        q: u32,
        /// Restrict to one flag, by its index on the fixed generator.
        #[arg(long)]
        flag: Option<usize>,
        /// List every U-set in the report.
        #[arg(long)]
        list: bool,
    },
    /// Vector identities, spectral suite and meet counts for every U-set.
    Verify {
        #[arg(long)]
        q: u32,
        /// Gram pairs sampled per relation; exhaustive when omitted.
        #[arg(long)]
        gram_samples: Option<usize>,
        /// Skip the perspective/σ̃ bridge check.
        #[arg(long)]
        no_bridge: bool,
    },
}

#[derive(Subcommand)]
enum SearchCmd {
    /// Enumerate every pseudo-oval through the fixed generator.
    Classify {
        #[arg(long)]
        q: u32,
        /// Seconds before the search stops.
        #[arg(long)]
        timeout: Option<u64>,
        /// Checkpoint file: exhausted subtrees are read from and written to it.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Stop at the first solution.
        #[arg(long)]
        first: bool,
    },
    /// Feasibility with Σ_U x = 1 for U-sets on the fixed generator.
    UsetFeasibility {
        #[arg(long)]
        q: u32,
        /// One U-set, by index in the enumeration order.
        #[arg(long, conflicts_with_all = ["all", "random"])]
        uset: Option<usize>,
        /// Every U-set on the fixed generator.
        #[arg(long, conflicts_with = "random")]
        all: bool,
        /// This many seeded random U-sets.
        #[arg(long)]
        random: Option<usize>,
        /// Seconds per U-set.
        #[arg(long)]
        timeout: Option<u64>,
    },
}

#[derive(Subcommand)]
enum ExportCmd {
    /// Write the feasibility model in LP format.
    Lp {
        #[arg(long)]
        q: u32,
        /// Add Σ_U x = 1 for this U-set index.
        #[arg(long)]
        uset: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Re-read the file and compare solver outcomes.
        #[arg(long)]
        cross_check: bool,
    },
}

/// Bad arguments detected after parsing.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    Usage(msg.into()).into()
}

/// Everything a subcommand hands back for printing.
struct Outcome {
    command: &'static str,
    q: u32,
    ok: bool,
    report: Value,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(ok) => ExitCode::from(if ok { 0 } else { 1 }),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(if e.downcast_ref::<Usage>().is_some() { 2 } else { 1 })
        }
    }
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.common.threads {
        if n == 0 {
            return Err(usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("thread pool")?;
    }
    let start = Instant::now();
    let c = &cli.common;
    let out = match &cli.command {
        Command::Scheme(SchemeCmd::Verify { q, exhaustive, samples, base, dense }) => {
            scheme_verify(c, *q, *exhaustive, *samples, *base, *dense)?
        }
        Command::Scheme(SchemeCmd::Eigen { q }) => scheme_eigen(*q)?,
        Command::Pseudoconic(PseudoconicCmd::Build { q, out }) => pseudoconic_build(c, *q, out)?,
        Command::Pseudoconic(PseudoconicCmd::Verify { q, input }) => pseudoconic_verify(c, *q, input)?,
        Command::Usets(UsetsCmd::Enumerate { q, flag, list }) => usets_enumerate(c, *q, *flag, *list)?,
        Command::Usets(UsetsCmd::Verify { q, gram_samples, no_bridge }) => usets_verify(c, *q, *gram_samples, !no_bridge)?,
        Command::Search(SearchCmd::Classify { q, timeout, checkpoint, first }) => {
            search_classify(c, *q, *timeout, checkpoint.as_deref(), *first)?
        }
        Command::Search(SearchCmd::UsetFeasibility { q, uset, all, random, timeout }) => {
            uset_feasibility(c, *q, *uset, *all, *random, *timeout)?
        }
        Command::Export(ExportCmd::Lp { q, uset, out, cross_check }) => export_lp(c, *q, *uset, out, *cross_check)?,
    };
    let mut report = out.report;
    if !c.timing {
        strip_timing(&mut report);
    }
    let mut doc = json!({
        "command": out.command,
        "q": out.q,
        "seed": c.seed,
        "ok": out.ok,
        "report": report,
    });
    if c.timing {
        doc["timing"] = json!({ "wall_ms": start.elapsed().as_millis() as u64 });
    }
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    match &c.output {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => print!("{text}"),
    }
    Ok(out.ok)
}

fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(m) => {
            m.remove("wall_ms");
            m.values_mut().for_each(strip_timing);
        }
        Value::Array(a) => a.iter_mut().for_each(strip_timing),
        _ => {}
    }
}

fn field(q: u32) -> Result<GaloisField> {
    let gf = GaloisField::new(q).map_err(|e| usage(format!("q = {q}: {e}")))?;
    if q > DEFAULT_TABLE_BOUND {
        return Err(usage(format!("q = {q} is above the supported bound {DEFAULT_TABLE_BOUND}")));
    }
    Ok(gf)
}

/// Tables from the cache directory when present and matching, else built
/// (and stored when a cache directory is given).
fn tables(c: &Common, gf: &GaloisField) -> Result<QuadricTables> {
    let Some(dir) = &c.cache_dir else { return Ok(QuadricTables::build(gf)?) };
    let k = gf.constants();
    let path = dir.join(format!("tables-q{}-xi{}-w{}-mu{}-delta{}.json", k.q, k.xi, k.w, k.mu, k.delta));
    if path.exists() {
        if let Ok(t) = QuadricTables::load(gf, &path) {
            return Ok(t);
        }
    }
    let t = QuadricTables::build(gf)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    t.save(&path)?;
    Ok(t)
}

fn context(c: &Common, q: u32) -> Result<Context> {
    let gf = field(q)?;
    Ok(Context::with_tables(tables(c, &gf)?)?)
}

/// The fixed generator: the smallest member of the pseudo-conic.
fn base_line(ctx: &Context) -> Result<u32> {
    Ok(pseudo_conic(&ctx.surface, &ctx.rho)?[0])
}

fn scheme_verify(
    c: &Common,
    q: u32,
    exhaustive: bool,
    samples: Option<usize>,
    base: BaseKind,
    dense: bool,
) -> Result<Outcome> {
    let gf = field(q)?;
    let mode = match (exhaustive, samples) {
        (true, _) => CheckMode::Exhaustive,
        (false, Some(n)) => CheckMode::Sampled { per_class: n, seed: c.seed },
        (false, None) if q == 3 => CheckMode::Exhaustive,
        (false, None) => CheckMode::Sampled { per_class: 200, seed: c.seed },
    };
    let surface = pseudoconic::hermitian::HermitianSurface::new(&gf);
    let mut extra = Vec::new();
    let (inst, quotient) = match base {
        BaseKind::Point => {
            let s = SchemeInstance::on_point(&surface, scheme::standard_point(&surface));
            let quot = scheme::quotient_scheme(&s, &surface)?;
            extra.push(Check::new("scheme.quotient", "the quotient graph is SRG(q^4,(q^2-1)(q+1),2q^2-q-2,q(q+1))", quot.ok));
            (s, Some(quot))
        }
        BaseKind::Generator => {
            let ctx = context(c, q)?;
            let l = ctx.rho.generator(scheme::standard_point(&ctx.surface));
            let xl = SchemeInstance::on_generator(&ctx.tables, l);
            let xp = SchemeInstance::on_point(&ctx.surface, scheme::standard_point(&ctx.surface));
            let tr = scheme::rho_transport(&xp, &xl, &ctx.rho)?;
            extra.push(
                Check::new("scheme.rho-transport", "rho carries each relation of X_P onto the same relation of X_l", tr.mismatches == 0)
                    .with_detail(format!("{} pairs, {} mismatches", tr.pairs, tr.mismatches)),
            );
            (xl, None)
        }
    };
    let r = scheme::verify(&inst, mode, dense);
    let ok = r.ok && all_passed(&extra);
    Ok(Outcome {
        command: "scheme verify",
        q,
        ok,
        report: json!({ "scheme": r, "quotient": quotient, "checks": extra }),
    })
}

fn scheme_eigen(q: u32) -> Result<Outcome> {
    field(q)?;
    let (p, qm) = scheme::eigenmatrices(q);
    let m: Vec<String> = scheme::multiplicities(q).iter().map(rat_string).collect();
    let checks = vec![Check::new("scheme.pq", "PQ = q^5 I", scheme::pq_identity(q))];
    Ok(Outcome {
        command: "scheme eigen",
        q,
        ok: all_passed(&checks),
        report: json!({ "P": p.to_strings(), "Q": qm.to_strings(), "multiplicities": m, "checks": checks }),
    })
}

/// On-disk form of a constructed pseudo-conic.
#[derive(Serialize, Deserialize)]
struct PseudoconicFile {
    q: u32,
    constants: pseudoconic::gf::FieldConstants,
    special_set: Value,
    generators: Vec<u32>,
}

fn pseudoconic_build(c: &Common, q: u32, out: &Path) -> Result<Outcome> {
    let ctx = context(c, q)?;
    let gf = ctx.tables.field();
    let set = build_special_set(gf)?;
    let r = pseudo_conic_pipeline(&ctx.tables, &ctx.surface, &ctx.rho)?;
    let file = PseudoconicFile {
        q,
        constants: gf.constants(),
        special_set: special_set_to_json(gf, &set),
        generators: r.generators.clone(),
    };
    std::fs::write(out, serde_json::to_string_pretty(&file)? + "\n").with_context(|| format!("writing {}", out.display()))?;
    Ok(Outcome { command: "pseudoconic build", q, ok: r.ok, report: serde_json::to_value(&r)? })
}

fn pseudoconic_verify(c: &Common, q: u32, input: &Path) -> Result<Outcome> {
    let ctx = context(c, q)?;
    let gf = ctx.tables.field();
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let failed = |why: String| Outcome { command: "pseudoconic verify", q, ok: false, report: json!({ "error": why }) };
    let file: PseudoconicFile = match serde_json::from_str(&text) {
        Ok(f) => f,
        Err(e) => return Ok(failed(format!("unreadable file: {e}"))),
    };
    if file.q != q || file.constants != gf.constants() {
        return Ok(failed(format!("file is for q = {} with constants {:?}", file.q, file.constants)));
    }
    let set = match special_set_from_json(gf, &file.special_set) {
        Ok(s) => s,
        Err(e) => return Ok(failed(format!("special set: {e}"))),
    };
    let r = pipeline_for_set(&ctx.tables, &ctx.surface, &ctx.rho, &set)?;
    let mut listed = file.generators.clone();
    listed.sort_unstable();
    let same = listed == r.generators;
    let check = Check::new("generators", "the listed generators are the rho-image of the listed points", same);
    let ok = r.ok && same;
    Ok(Outcome { command: "pseudoconic verify", q, ok, report: json!({ "pipeline": r, "checks": [check] }) })
}

fn usets_enumerate(c: &Common, q: u32, flag: Option<usize>, list: bool) -> Result<Outcome> {
    let ctx = context(c, q)?;
    let t = &ctx.tables;
    let l = base_line(&ctx)?;
    let (per_flag, per_line, vectors, through) = usets::claimed_counts(q);
    if let Some(i) = flag {
        let flags = usets::flags(t, l);
        let f = *flags.get(i).ok_or_else(|| usage(format!("flag index {i} out of range 0..{}", flags.len())))?;
        let us = usets::flag_usets(t, f)?;
        let checks = vec![Check::new("usets.per-flag", "q^3(q-1)(q+1)/2 U-sets on a flag", us.len() == per_flag)];
        let mut report = json!({ "line": l, "flag": f, "count": us.len(), "checks": checks });
        if list {
            report["usets"] = serde_json::to_value(&us)?;
        }
        return Ok(Outcome { command: "usets enumerate", q, ok: all_passed(&checks), report });
    }
    let e = usets::enumerate_all(t, l)?;
    let checks = vec![
        Check::new("usets.per-flag", "q^3(q-1)(q+1)/2 U-sets on each flag", e.per_flag.iter().all(|&(_, n)| n == per_flag)),
        Check::new("usets.per-line", "(q+1)q^3(q^2-1)/2 U-sets on the line, all distinct", e.usets.len() == per_line && e.distinct_usets == per_line),
        Check::new("usets.vectors", "|V_l| = q^3(q-1)(q+1)^2", e.vectors.len() == vectors),
        Check::new(
            "usets.membership",
            "every line disjoint from l lies in the same number of U-sets",
            e.membership.len() == 1 && e.membership.contains_key(&through),
        ),
    ];
    let mut report = json!({
        "line": l,
        "per_flag": e.per_flag.iter().map(|(f, n)| json!({ "flag": f, "count": n })).collect::<Vec<_>>(),
        "usets": e.usets.len(),
        "distinct_usets": e.distinct_usets,
        "vectors": e.vectors.len(),
        "membership": e.membership,
        "checks": checks,
    });
    if list {
        report["list"] = serde_json::to_value(&e.usets)?;
    }
    Ok(Outcome { command: "usets enumerate", q, ok: all_passed(&checks), report })
}

fn usets_verify(c: &Common, q: u32, gram_samples: Option<usize>, bridge: bool) -> Result<Outcome> {
    let ctx = context(c, q)?;
    let t = &ctx.tables;
    let l = base_line(&ctx)?;
    let s = SchemeInstance::on_generator(t, l);
    let e = usets::enumerate_all(t, l)?;
    let ids: Vec<usets::IdentityCheck> = {
        use rayon::prelude::*;
        e.usets.par_iter().map(|u| usets::check_identities(t, &s, u)).collect::<Result<_, _>>()?
    };
    let failing: Vec<usize> = ids.iter().enumerate().filter(|(_, r)| !r.ok()).map(|(i, _)| i).collect();
    let mode = match gram_samples {
        Some(n) => GramMode::Sampled { per_class: n, seed: c.seed },
        None => GramMode::Exhaustive,
    };
    let spectral = usets::spectral_suite(&s, &e.vectors, mode)?;
    let members = pseudo_conic(&ctx.surface, &ctx.rho)?;
    let meets = usets::uset_meet_counts(t, &e.usets, l, &members)?;
    let mut checks = vec![
        Check::new("usets.identities", "vector identities for chi_O1 A_i, chi_O2 A_i, v A_i and v E_j hold", failing.is_empty())
            .with_detail(format!("{} of {} U-sets fail", failing.len(), ids.len())),
        Check::new("usets.spectral", "dual degree {1,5}, Gram closed form, rank m1+m5", spectral.ok),
        Check::new("usets.meets", "the pseudo-conic meets every U-set in 0 or 2 lines, q+1 on average over pairs", meets.zero_or_two && meets.average_is_q_plus_1),
    ];
    let bridge_report = if bridge {
        let b = usets::perspective_bridge(t, &s, &ctx.surface, &ctx.rho)?;
        checks.push(Check::new(
            "usets.bridge",
            "perspective with l agrees with the sigma-tilde correspondence, for every flag",
            b.disagreements == 0 && b.flag_dependent == 0 && b.relation_disagreements == 0,
        ));
        Some(b)
    } else {
        None
    };
    Ok(Outcome {
        command: "usets verify",
        q,
        ok: all_passed(&checks),
        report: json!({
            "line": l,
            "usets": e.usets.len(),
            "failing_usets": failing,
            "spectral": spectral,
            "meet_counts": meets,
            "bridge": bridge_report,
            "checks": checks,
        }),
    })
}

/// Resumable state of `search classify`.
#[derive(Serialize, Deserialize)]
struct Checkpoint {
    q: u32,
    line: u32,
    branches: usize,
    exhausted: Vec<usize>,
    solutions: Vec<Vec<u32>>,
}

fn search_classify(c: &Common, q: u32, timeout: Option<u64>, checkpoint: Option<&Path>, first: bool) -> Result<Outcome> {
    let ctx = context(c, q)?;
    let t = &ctx.tables;
    let l = base_line(&ctx)?;
    let p = search::build_problem(t, l, Vec::new())?;
    let prior: Option<Checkpoint> = match checkpoint {
        Some(path) if path.exists() => {
            let cp: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?).context("checkpoint")?;
            if cp.q != q || cp.line != l {
                return Err(usage(format!("checkpoint is for q = {}, line {}", cp.q, cp.line)));
            }
            Some(cp)
        }
        _ => None,
    };
    let opts = SolveOptions {
        mode: if first { SolveMode::First } else { SolveMode::All },
        timeout: timeout.map(Duration::from_secs),
        skip: prior.as_ref().map(|cp| cp.exhausted.iter().copied().collect()).unwrap_or_default(),
        ..Default::default()
    };
    let mut r = search::solve(&p, &opts);
    if let Some(cp) = &prior {
        if cp.branches != r.branches {
            return Err(usage("checkpoint was written with a different branch split"));
        }
        let merged: BTreeSet<Vec<u32>> = r.solutions.iter().chain(&cp.solutions).cloned().collect();
        r.solutions = merged.into_iter().collect();
    }
    if let Some(path) = checkpoint {
        let cp = Checkpoint { q, line: l, branches: r.branches, exhausted: r.exhausted.clone(), solutions: r.solutions.clone() };
        std::fs::write(path, serde_json::to_string(&cp)?).with_context(|| format!("writing {}", path.display()))?;
    }
    let complete = r.exhausted.len() == r.branches;
    let kinds = search::classify_solutions(t, l, &r.solutions)?;
    let all_verified = kinds.keys().all(|k| k == "pseudo-conic" || k == "pseudo-oval, not a pseudo-conic");
    let checks = vec![
        Check::new("search.complete", "every subtree was exhausted", complete || first),
        Check::new("search.verified", "every solution is a pseudo-oval through l", all_verified),
    ];
    Ok(Outcome {
        command: "search classify",
        q,
        ok: all_passed(&checks) && r.status != Status::Timeout,
        report: json!({ "line": l, "solution_count": r.solutions.len(), "kinds": kinds, "search": r, "checks": checks }),
    })
}

fn uset_feasibility(
    c: &Common,
    q: u32,
    uset: Option<usize>,
    all: bool,
    random: Option<usize>,
    timeout: Option<u64>,
) -> Result<Outcome> {
    let ctx = context(c, q)?;
    let t = &ctx.tables;
    let l = base_line(&ctx)?;
    let p = search::build_problem(t, l, Vec::new())?;
    let timeout = timeout.map(Duration::from_secs);
    if let Some(n) = random {
        let probes = search::uset_probes(t, &p, n, c.seed, timeout)?;
        return Ok(feasibility_outcome(q, l, probes.iter().map(|r| r.status).collect(), json!(probes)));
    }
    let us = usets::line_usets(t, l)?;
    let chosen: Vec<usize> = match (uset, all) {
        (Some(i), _) if i < us.len() => vec![i],
        (Some(i), _) => return Err(usage(format!("U-set index {i} out of range 0..{}", us.len()))),
        (None, true) => (0..us.len()).collect(),
        (None, false) => return Err(usage("give --uset ID, --all or --random N")),
    };
    let mut rows = Vec::new();
    let mut statuses = Vec::new();
    for i in chosen {
        let pu = p.with_sides(vec![search::uset_constraint(&format!("u{i}"), &us[i])])?;
        let r = search::solve(&pu, &SolveOptions { mode: SolveMode::ProveInfeasible, timeout, ..Default::default() });
        statuses.push(r.status);
        rows.push(json!({ "uset": i, "flag": us[i].flag, "pole": us[i].pole, "status": r.status, "nodes": r.nodes, "wall_ms": r.wall_ms }));
    }
    Ok(feasibility_outcome(q, l, statuses, Value::Array(rows)))
}

fn feasibility_outcome(q: u32, l: u32, statuses: Vec<Status>, detail: Value) -> Outcome {
    let count = |s: Status| statuses.iter().filter(|&&x| x == s).count();
    let (inf, feas, to) = (count(Status::Infeasible), count(Status::Feasible), count(Status::Timeout));
    let checks = vec![
        Check::new("search.uset-infeasible", "no pseudo-oval through l meets a U-set in exactly one line", feas == 0 && to == 0)
            .with_detail(format!("{inf} infeasible, {feas} feasible, {to} timed out")),
    ];
    Outcome {
        command: "search uset-feasibility",
        q,
        ok: all_passed(&checks),
        report: json!({ "line": l, "infeasible": inf, "feasible": feas, "timeouts": to, "results": detail, "checks": checks }),
    }
}

fn export_lp(c: &Common, q: u32, uset: Option<usize>, out: &Path, cross_check: bool) -> Result<Outcome> {
    let ctx = context(c, q)?;
    let t = &ctx.tables;
    let l = base_line(&ctx)?;
    let base = search::build_problem(t, l, Vec::new())?;
    let p: FeasibilityProblem = match uset {
        None => base,
        Some(i) => {
            let us = usets::line_usets(t, l)?;
            let u = us.get(i).ok_or_else(|| usage(format!("U-set index {i} out of range 0..{}", us.len())))?;
            base.with_sides(vec![search::uset_constraint("u0", u)])?
        }
    };
    let text = search::export_lp(&p);
    std::fs::write(out, &text).with_context(|| format!("writing {}", out.display()))?;
    let (rows, cols) = p.incidence.dims();
    let mut checks = Vec::new();
    let mut cross = Value::Null;
    if cross_check {
        let back = search::problem_from_lp(&search::parse_lp(&std::fs::read_to_string(out)?)?, q)?;
        let opts = SolveOptions { mode: SolveMode::First, ..Default::default() };
        let a = search::solve(&p, &opts);
        let b = search::solve(&back, &SolveOptions { pairwise: false, ..opts });
        let same_model = back.incidence.row_cols == p.incidence.row_cols && back.target == p.target;
        checks.push(Check::new("lp.round-trip", "the re-read model has the same columns and cardinality", same_model));
        checks.push(Check::new("lp.same-outcome", "solving the re-read model gives the same status", a.status == b.status));
        cross = json!({ "internal": a.status, "reimported": b.status });
    }
    Ok(Outcome {
        command: "export lp",
        q,
        ok: all_passed(&checks),
        report: json!({
            "line": l,
            "path": out.display().to_string(),
            "x_variables": rows,
            "y_variables": cols,
            "constraints": cols + 1 + p.sides.len(),
            "cross_check": cross,
            "checks": checks,
        }),
    })
}
