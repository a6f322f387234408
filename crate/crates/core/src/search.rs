//! Pseudo-oval search through a fixed generator l.
//!
//! Rows are the q⁵ generators disjoint from l, columns the q⁵−q³
//! non-degenerate hyperplanes not containing l. A 0/1 vector x with q² ones
//! and every column sum in {0,2} is the characteristic vector of S∖{l} for a
//! pseudo-oval S through l. Side constraints Σ_{i∈U} x_i = c restrict the
//! meet with a U-set.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{QuadricTables, DEFAULT_TABLE_BOUND};
use crate::klein::{perspective_classify, spanning, Perspective};
use crate::oval::{check_oval, OvalError, OvalReport};
use crate::scheme::classify_generators;

#[derive(Debug, Error)]
pub enum SearchError {
    #[error("q = {q} exceeds the search bound {bound}")]
    ResourceBound { q: u32, bound: u32 },
    #[error("expected {expected} lines, got {found}")]
    Cardinality { expected: usize, found: usize },
    #[error("generator {0} is not a row of the problem")]
    UnknownRow(u32),
    #[error("LP format: {0}")]
    LpFormat(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Oval(#[from] OvalError),
    #[error(transparent)]
    Uset(#[from] crate::usets::UsetError),
}

type Result<T> = std::result::Result<T, SearchError>;

/// Line-in-hyperplane incidences between X′ and the hyperplanes avoiding l.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IncidenceMatrix {
    /// The fixed generator, when built from geometry.
    pub line: Option<u32>,
    /// Row ids (generator ids), increasing.
    pub rows: Vec<u32>,
    /// Column ids (pole ids), increasing.
    pub cols: Vec<u32>,
    pub row_cols: Vec<Vec<u32>>,
    pub col_rows: Vec<Vec<u32>>,
}

impl IncidenceMatrix {
    pub fn build(tables: &QuadricTables, l: u32) -> Self {
        let rows = tables.disjoint_from(l);
        let cols: Vec<u32> = (0..tables.poles.len() as u32).filter(|&h| !tables.hyperplane_contains(h, l)).collect();
        let row_cols: Vec<Vec<u32>> = rows
            .par_iter()
            .map(|&g| (0..cols.len() as u32).filter(|&c| tables.hyperplane_contains(cols[c as usize], g)).collect())
            .collect();
        Self::from_rows(Some(l), rows, cols, row_cols)
    }

    /// Assembles the column lists from row lists (indices, not ids).
    pub fn from_rows(line: Option<u32>, rows: Vec<u32>, cols: Vec<u32>, row_cols: Vec<Vec<u32>>) -> Self {
        let mut col_rows = vec![Vec::new(); cols.len()];
        for (r, cs) in row_cols.iter().enumerate() {
            for &c in cs {
                col_rows[c as usize].push(r as u32);
            }
        }
        Self { line, rows, cols, row_cols, col_rows }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.rows.len(), self.cols.len())
    }

    pub fn row_index(&self, id: u32) -> Option<usize> {
        self.rows.binary_search(&id).ok()
    }

    /// Number of columns holding both rows.
    pub fn common_columns(&self, a: usize, b: usize) -> usize {
        let (x, y) = (&self.row_cols[a], &self.row_cols[b]);
        x.iter().filter(|c| y.binary_search(c).is_ok()).count()
    }

    /// Largest number of common columns over row pairs accepted by `keep`.
    pub fn max_common_columns(&self, keep: impl Fn(usize, usize) -> bool + Sync) -> usize {
        (0..self.rows.len())
            .into_par_iter()
            .map(|a| (a + 1..self.rows.len()).filter(|&b| keep(a, b)).map(|b| self.common_columns(a, b)).max().unwrap_or(0))
            .max()
            .unwrap_or(0)
    }
}

/// Column weight q²(q+1) of a hyperplane avoiding l: its generators number
/// (q+1)(q²+1), of which the q+1 through l ∩ Π meet l.
pub fn claimed_column_weight(q: u32) -> usize {
    (q * q * (q + 1)) as usize
}

/// Column weight by direct enumeration: generators inside the hyperplane,
/// tested with subspace containment, that share no point with l.
pub fn column_weight_oracle(tables: &QuadricTables, l: u32, pole: u32) -> usize {
    let space = &tables.space;
    let pi = space.perp(&space.subspace(&[tables.poles[pole as usize]]));
    let lsub = tables.generator(l);
    tables.generators.iter().filter(|g| space.contains(&pi, g) && space.meet(g, lsub).dim() == 0).count()
}

/// Row-by-row bitsets of pairs that can coexist in S∖{l}: disjoint and
/// spanning V̂ together with l (relations R′₄ ∪ R′₅).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Compatibility {
    words: usize,
    bits: Vec<u64>,
}

impl Compatibility {
    pub fn build(tables: &QuadricTables, inc: &IncidenceMatrix) -> Self {
        let l = inc.line.expect("compatibility needs the fixed generator");
        let lsub = *tables.generator(l);
        let n = inc.rows.len();
        let words = n.div_ceil(64);
        let rows: Vec<Vec<u64>> = (0..n)
            .into_par_iter()
            .map(|a| {
                let ga = tables.generator(inc.rows[a]);
                let join = tables.space.join(&lsub, ga);
                let mut w = vec![0u64; words];
                for b in 0..n {
                    if b != a && tables.space.join(&join, tables.generator(inc.rows[b])).dim() == 6 {
                        w[b / 64] |= 1 << (b % 64);
                    }
                }
                w
            })
            .collect();
        Self { words, bits: rows.concat() }
    }

    pub fn row(&self, a: usize) -> &[u64] {
        &self.bits[a * self.words..(a + 1) * self.words]
    }

    #[inline]
    pub fn ok(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideConstraint {
    pub label: String,
    /// Row ids (generator ids).
    pub support: Vec<u32>,
    pub value: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMode {
    First,
    All,
    ProveInfeasible,
}

#[derive(Clone, Debug)]
pub struct FeasibilityProblem {
    pub q: u32,
    pub incidence: Arc<IncidenceMatrix>,
    pub compat: Option<Arc<Compatibility>>,
    pub target: usize,
    pub sides: Vec<SideConstraint>,
    /// Rows forced into the solution (symmetry reduction; off by default).
    pub fixed: Vec<u32>,
    /// For each non-degenerate hyperplane through l, its rows (indices).
    pub through_l: Option<Arc<Vec<Vec<u32>>>>,
}

/// Problem for S∖{l} with the given side constraints and pairwise pruning.
pub fn build_problem(tables: &QuadricTables, l: u32, sides: Vec<SideConstraint>) -> Result<FeasibilityProblem> {
    let q = tables.q();
    if q > DEFAULT_TABLE_BOUND {
        return Err(SearchError::ResourceBound { q, bound: DEFAULT_TABLE_BOUND });
    }
    let inc = Arc::new(IncidenceMatrix::build(tables, l));
    let compat = Arc::new(Compatibility::build(tables, &inc));
    let mut p = FeasibilityProblem::new(q, inc.clone(), Some(compat), (q * q) as usize, sides)?;
    p.through_l = Some(Arc::new(hyperplanes_through(tables, &inc)));
    Ok(p)
}

/// Row lists of the non-degenerate hyperplanes containing l. A pseudo-oval
/// through l has exactly one further member in each of them.
pub fn hyperplanes_through(tables: &QuadricTables, inc: &IncidenceMatrix) -> Vec<Vec<u32>> {
    let l = inc.line.expect("geometric problem");
    tables
        .hyperplanes_containing(l)
        .into_iter()
        .map(|h| (0..inc.rows.len() as u32).filter(|&r| tables.hyperplane_contains(h, inc.rows[r as usize])).collect())
        .collect()
}

impl FeasibilityProblem {
    pub fn new(
        q: u32,
        incidence: Arc<IncidenceMatrix>,
        compat: Option<Arc<Compatibility>>,
        target: usize,
        sides: Vec<SideConstraint>,
    ) -> Result<Self> {
        for s in &sides {
            if let Some(&g) = s.support.iter().find(|&&g| incidence.row_index(g).is_none()) {
                return Err(SearchError::UnknownRow(g));
            }
        }
        Ok(Self { q, incidence, compat, target, sides, fixed: Vec::new(), through_l: None })
    }

    /// Same data with different side constraints.
    pub fn with_sides(&self, sides: Vec<SideConstraint>) -> Result<Self> {
        let mut p = Self::new(self.q, self.incidence.clone(), self.compat.clone(), self.target, sides)?;
        p.through_l = self.through_l.clone();
        Ok(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Feasible,
    Infeasible,
    Timeout,
}

/// Dead ends by cause.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictStats {
    /// A column with one chosen line lost its last candidate.
    pub dead_column: u64,
    pub over_full_column: u64,
    pub cardinality: u64,
    pub side: u64,
}

impl ConflictStats {
    fn add(&mut self, o: &Self) {
        self.dead_column += o.dead_column;
        self.over_full_column += o.over_full_column;
        self.cardinality += o.cardinality;
        self.side += o.side;
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SearchReport {
    pub status: Status,
    pub mode: SolveMode,
    /// Solutions as sorted row ids, in increasing order.
    pub solutions: Vec<Vec<u32>>,
    pub nodes: u64,
    pub wall_ms: u64,
    pub conflicts: ConflictStats,
    /// Top-level subtrees and the indices of those fully explored.
    pub branches: usize,
    pub exhausted: Vec<usize>,
    pub pairwise: bool,
    pub sides: Vec<SideConstraint>,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub mode: SolveMode,
    pub timeout: Option<Duration>,
    pub pairwise: bool,
    /// Top-level branches already exhausted by an earlier run.
    pub skip: BTreeSet<usize>,
    /// Number of top-level branches to aim for.
    pub split: usize,
    /// Enforce one further member in every hyperplane through l.
    pub through_l: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { mode: SolveMode::All, timeout: None, pairwise: true, skip: BTreeSet::new(), split: 64, through_l: true }
    }
}

#[derive(Clone, Debug)]
struct Node {
    /// Undecided rows.
    free: Vec<u64>,
    col_count: Vec<u8>,
    side_count: Vec<u32>,
    chosen: Vec<u32>,
}

#[derive(Clone, Copy, Debug)]
enum Conflict {
    DeadColumn,
    OverFull,
    Cardinality,
    Side,
}

/// Where to branch next.
#[derive(Clone, Copy, Debug)]
enum Pick {
    Column(usize),
    Side(usize),
    Row(usize),
    Done,
}

fn bits_of(rows: &[u32], words: usize) -> Vec<u64> {
    let mut b = vec![0u64; words];
    for &r in rows {
        b[r as usize / 64] |= 1 << (r % 64);
    }
    b
}

#[inline]
fn and_count(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x & y).count_ones()).sum()
}

#[inline]
fn clear(a: &mut [u64], b: &[u64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x &= !y;
    }
}

fn ones(words: &[u64]) -> impl Iterator<Item = u32> + '_ {
    words.iter().enumerate().flat_map(|(w, &x)| {
        let mut x = x;
        std::iter::from_fn(move || {
            (x != 0).then(|| {
                let b = x.trailing_zeros();
                x &= x - 1;
                (w * 64) as u32 + b
            })
        })
    })
}

struct Solver<'a> {
    inc: &'a IncidenceMatrix,
    compat: Option<&'a Compatibility>,
    target: usize,
    words: usize,
    col_bits: Vec<u64>,
    side_bits: Vec<u64>,
    side_value: Vec<u32>,
    row_sides: Vec<Vec<u32>>,
    mode: SolveMode,
    deadline: Option<Instant>,
    stop: AtomicBool,
    timed_out: AtomicBool,
    nodes: AtomicU64,
}

enum Expansion {
    Solution(Vec<u32>),
    Children(Vec<Node>),
}

impl<'a> Solver<'a> {
    fn new(p: &'a FeasibilityProblem, o: &SolveOptions) -> Self {
        let inc = &*p.incidence;
        let words = inc.rows.len().div_ceil(64);
        let mut side_rows: Vec<Vec<u32>> = p
            .sides
            .iter()
            .map(|s| s.support.iter().map(|&g| inc.row_index(g).expect("checked") as u32).collect())
            .collect();
        let mut side_value: Vec<u32> = p.sides.iter().map(|s| s.value).collect();
        // one further member per hyperplane through l holds for full pseudo-ovals only
        if let (true, Some(h), true) = (o.through_l, &p.through_l, p.target == (p.q * p.q) as usize) {
            side_rows.extend(h.iter().cloned());
            side_value.extend(std::iter::repeat_n(1, h.len()));
        }
        let mut row_sides = vec![Vec::new(); inc.rows.len()];
        for (k, rows) in side_rows.iter().enumerate() {
            for &r in rows {
                row_sides[r as usize].push(k as u32);
            }
        }
        Self {
            inc,
            compat: if o.pairwise { p.compat.as_deref() } else { None },
            target: p.target,
            words,
            col_bits: inc.col_rows.iter().flat_map(|r| bits_of(r, words)).collect(),
            side_bits: side_rows.iter().flat_map(|r| bits_of(r, words)).collect(),
            side_value,
            row_sides,
            mode: o.mode,
            deadline: o.timeout.map(|t| Instant::now() + t),
            stop: AtomicBool::new(false),
            timed_out: AtomicBool::new(false),
            nodes: AtomicU64::new(0),
        }
    }

    fn col(&self, c: usize) -> &[u64] {
        &self.col_bits[c * self.words..(c + 1) * self.words]
    }

    fn side(&self, k: usize) -> &[u64] {
        &self.side_bits[k * self.words..(k + 1) * self.words]
    }

    fn root(&self) -> Node {
        let n = self.inc.rows.len();
        let mut free = vec![u64::MAX; self.words];
        if n % 64 != 0 {
            free[self.words - 1] = (1u64 << (n % 64)) - 1;
        }
        Node {
            free,
            col_count: vec![0; self.inc.cols.len()],
            side_count: vec![0; self.side_value.len()],
            chosen: Vec::new(),
        }
    }

    /// Puts a free row into the solution and applies (i), pairwise
    /// exclusion, saturated side constraints and the cardinality cap.
    fn choose(&self, node: &mut Node, r: u32) -> std::result::Result<(), Conflict> {
        let ri = r as usize;
        if node.free[ri / 64] >> (ri % 64) & 1 == 0 {
            return Err(Conflict::Cardinality);
        }
        node.free[ri / 64] &= !(1 << (ri % 64));
        node.chosen.push(r);
        if node.chosen.len() > self.target {
            return Err(Conflict::Cardinality);
        }
        for &c in &self.inc.row_cols[ri] {
            let c = c as usize;
            node.col_count[c] += 1;
            match node.col_count[c] {
                2 => clear(&mut node.free, self.col(c)),
                3.. => return Err(Conflict::OverFull),
                _ => {}
            }
        }
        if let Some(cp) = self.compat {
            for (x, y) in node.free.iter_mut().zip(cp.row(ri)) {
                *x &= y;
            }
        }
        for &k in &self.row_sides[ri] {
            let k = k as usize;
            node.side_count[k] += 1;
            if node.side_count[k] > self.side_value[k] {
                return Err(Conflict::Side);
            }
            if node.side_count[k] == self.side_value[k] {
                clear(&mut node.free, self.side(k));
            }
        }
        if node.chosen.len() == self.target {
            node.free.iter_mut().for_each(|x| *x = 0);
        }
        Ok(())
    }

    /// Detects dead ends (ii), unreachable side values and cardinality, and
    /// picks the narrowest open constraint to branch on.
    fn inspect(&self, node: &Node) -> std::result::Result<Pick, Conflict> {
        let free_total: u32 = node.free.iter().map(|x| x.count_ones()).sum();
        if node.chosen.len() + (free_total as usize) < self.target {
            return Err(Conflict::Cardinality);
        }
        let mut best: Option<(u32, Pick)> = None;
        for (c, &cnt) in node.col_count.iter().enumerate() {
            if cnt == 1 {
                let f = and_count(self.col(c), &node.free);
                if f == 0 {
                    return Err(Conflict::DeadColumn);
                }
                if best.is_none_or(|(b, _)| f < b) {
                    best = Some((f, Pick::Column(c)));
                }
            }
        }
        for (k, &v) in self.side_value.iter().enumerate() {
            let cnt = node.side_count[k];
            if cnt < v {
                let f = and_count(self.side(k), &node.free);
                if cnt + f < v {
                    return Err(Conflict::Side);
                }
                if best.is_none_or(|(b, _)| f < b) {
                    best = Some((f, Pick::Side(k)));
                }
            }
        }
        if let Some((_, p)) = best {
            return Ok(p);
        }
        if node.chosen.len() == self.target {
            return Ok(Pick::Done);
        }
        Ok(Pick::Row(ones(&node.free).next().expect("cardinality checked") as usize))
    }

    fn record(stats: &mut ConflictStats, c: Conflict) {
        match c {
            Conflict::DeadColumn => stats.dead_column += 1,
            Conflict::OverFull => stats.over_full_column += 1,
            Conflict::Cardinality => stats.cardinality += 1,
            Conflict::Side => stats.side += 1,
        }
    }

    fn tight_incidence(&self, node: &Node, r: usize) -> usize {
        self.inc.row_cols[r].iter().filter(|&&c| node.col_count[c as usize] == 1).count()
    }

    /// Child with `take` chosen and `drop` excluded, if it survives.
    fn child(&self, node: &Node, drop: &[u32], take: Option<u32>, stats: &mut ConflictStats) -> Option<Node> {
        let mut ch = node.clone();
        for &y in drop {
            ch.free[y as usize / 64] &= !(1 << (y % 64));
        }
        let res = match take {
            Some(x) => self.choose(&mut ch, x).and_then(|_| self.inspect(&ch).map(|_| ())),
            None => self.inspect(&ch).map(|_| ()),
        };
        match res {
            Ok(()) => Some(ch),
            Err(e) => {
                Self::record(stats, e);
                None
            }
        }
    }

    fn expand(&self, node: &Node, stats: &mut ConflictStats) -> Expansion {
        let pick = match self.inspect(node) {
            Ok(p) => p,
            Err(e) => {
                Self::record(stats, e);
                return Expansion::Children(Vec::new());
            }
        };
        let rows: Vec<u64> = match pick {
            Pick::Done => {
                let mut ids: Vec<u32> = node.chosen.iter().map(|&r| self.inc.rows[r as usize]).collect();
                ids.sort_unstable();
                return Expansion::Solution(ids);
            }
            Pick::Row(r) => {
                let r = r as u32;
                let children = [self.child(node, &[], Some(r), stats), self.child(node, &[r], None, stats)];
                return Expansion::Children(children.into_iter().flatten().collect());
            }
            Pick::Column(c) => self.col(c).to_vec(),
            Pick::Side(k) => self.side(k).to_vec(),
        };
        // exactly one more candidate of this constraint enters; branch on which
        let free: Vec<u64> = rows.iter().zip(&node.free).map(|(a, b)| a & b).collect();
        let mut cands: Vec<u32> = ones(&free).collect();
        cands.sort_by_key(|&x| (std::cmp::Reverse(self.tight_incidence(node, x as usize)), x));
        let children =
            cands.iter().enumerate().filter_map(|(k, &x)| self.child(node, &cands[..k], Some(x), stats)).collect();
        Expansion::Children(children)
    }

    fn halted(&self) -> bool {
        if self.stop.load(Ordering::Relaxed) {
            return true;
        }
        if let Some(d) = self.deadline {
            let n = self.nodes.load(Ordering::Relaxed);
            if n % 256 == 0 && Instant::now() >= d {
                self.timed_out.store(true, Ordering::Relaxed);
                self.stop.store(true, Ordering::Relaxed);
                return true;
            }
        }
        false
    }

    /// Depth-first search; returns false if interrupted.
    fn dfs(&self, node: &Node, out: &mut Vec<Vec<u32>>, stats: &mut ConflictStats) -> bool {
        if self.halted() {
            return false;
        }
        self.nodes.fetch_add(1, Ordering::Relaxed);
        match self.expand(node, stats) {
            Expansion::Solution(s) => {
                out.push(s);
                if self.mode != SolveMode::All {
                    self.stop.store(true, Ordering::Relaxed);
                }
                true
            }
            Expansion::Children(ch) => {
                for c in &ch {
                    if !self.dfs(c, out, stats) {
                        return false;
                    }
                }
                true
            }
        }
    }
}

/// Runs the search. Top-level subtrees are explored in parallel; the
/// solution list is sorted, so it does not depend on scheduling.
pub fn solve(p: &FeasibilityProblem, o: &SolveOptions) -> SearchReport {
    let start = Instant::now();
    let solver = Solver::new(p, o);
    let mut stats = ConflictStats::default();
    let mut found: Vec<Vec<u32>> = Vec::new();
    let mut root = solver.root();
    let fixed = p.fixed.iter().filter_map(|&g| p.incidence.row_index(g));
    let mut frontier = match fixed.map(|r| solver.choose(&mut root, r as u32)).collect::<std::result::Result<Vec<()>, _>>() {
        Ok(_) => vec![root],
        Err(e) => {
            Solver::record(&mut stats, e);
            Vec::new()
        }
    };
    // breadth-first split into independent subtrees
    for _ in 0..8 {
        if frontier.len() >= o.split || frontier.is_empty() {
            break;
        }
        let mut next = Vec::new();
        for node in &frontier {
            solver.nodes.fetch_add(1, Ordering::Relaxed);
            match solver.expand(node, &mut stats) {
                Expansion::Solution(s) => found.push(s),
                Expansion::Children(ch) => next.extend(ch),
            }
        }
        frontier = next;
        if !found.is_empty() && o.mode != SolveMode::All {
            frontier.clear();
        }
    }
    let results: Vec<(usize, bool, Vec<Vec<u32>>, ConflictStats)> = frontier
        .par_iter()
        .enumerate()
        .filter(|(i, _)| !o.skip.contains(i))
        .map(|(i, node)| {
            let mut out = Vec::new();
            let mut st = ConflictStats::default();
            let done = solver.dfs(node, &mut out, &mut st);
            (i, done, out, st)
        })
        .collect();
    let mut exhausted: Vec<usize> = o.skip.iter().copied().filter(|&i| i < frontier.len()).collect();
    for (i, done, out, st) in results {
        stats.add(&st);
        found.extend(out);
        if done {
            exhausted.push(i);
        }
    }
    exhausted.sort_unstable();
    let solutions: Vec<Vec<u32>> = found.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    let status = if !solutions.is_empty() {
        Status::Feasible
    } else if solver.timed_out.load(Ordering::Relaxed) {
        Status::Timeout
    } else {
        Status::Infeasible
    };
    SearchReport {
        status,
        mode: o.mode,
        solutions,
        nodes: solver.nodes.load(Ordering::Relaxed),
        wall_ms: start.elapsed().as_millis() as u64,
        conflicts: stats,
        branches: frontier.len(),
        exhausted,
        pairwise: solver.compat.is_some(),
        sides: p.sides.clone(),
    }
}

/// Every target-subset of the rows satisfying the constraints, by plain
/// enumeration in id order; only an over-full column stops a branch early.
pub fn reference_enumeration(p: &FeasibilityProblem, pairwise: bool) -> Vec<Vec<u32>> {
    let inc = &*p.incidence;
    let n = inc.rows.len();
    let mut out = Vec::new();
    let mut counts = vec![0u8; inc.cols.len()];
    let mut chosen = Vec::new();
    fn rec(
        p: &FeasibilityProblem,
        pairwise: bool,
        from: usize,
        n: usize,
        counts: &mut Vec<u8>,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<u32>>,
    ) {
        let inc = &*p.incidence;
        if chosen.len() == p.target {
            let cols_ok = counts.iter().all(|&c| c == 0 || c == 2);
            let pair_ok = !pairwise
                || p.compat.as_ref().is_none_or(|cp| {
                    chosen.iter().enumerate().all(|(i, &a)| chosen[i + 1..].iter().all(|&b| cp.ok(a, b)))
                });
            let sides_ok = p.sides.iter().all(|s| {
                chosen.iter().filter(|&&r| s.support.contains(&inc.rows[r])).count() == s.value as usize
            });
            if cols_ok && pair_ok && sides_ok {
                out.push(chosen.iter().map(|&r| inc.rows[r]).collect());
            }
            return;
        }
        for r in from..n {
            if n - r < p.target - chosen.len() {
                break;
            }
            let cs = &inc.row_cols[r];
            if cs.iter().any(|&c| counts[c as usize] >= 2) {
                continue;
            }
            for &c in cs {
                counts[c as usize] += 1;
            }
            chosen.push(r);
            rec(p, pairwise, r + 1, n, counts, chosen, out);
            chosen.pop();
            for &c in cs {
                counts[c as usize] -= 1;
            }
        }
    }
    rec(p, pairwise, 0, n, &mut counts, &mut chosen, &mut out);
    out.sort();
    out
}

/// The sub-problem on the first `k` rows (all columns kept).
pub fn restrict(p: &FeasibilityProblem, k: usize, target: usize, tables: &QuadricTables) -> Result<FeasibilityProblem> {
    restrict_to(p, &p.incidence.rows[..k], target, tables)
}

/// The sub-problem on the given row ids (all columns kept).
pub fn restrict_to(p: &FeasibilityProblem, ids: &[u32], target: usize, tables: &QuadricTables) -> Result<FeasibilityProblem> {
    let inc = &*p.incidence;
    let mut rows = ids.to_vec();
    rows.sort_unstable();
    rows.dedup();
    let row_cols = rows
        .iter()
        .map(|&g| inc.row_index(g).map(|r| inc.row_cols[r].clone()).ok_or(SearchError::UnknownRow(g)))
        .collect::<Result<_>>()?;
    let sub = Arc::new(IncidenceMatrix::from_rows(inc.line, rows, inc.cols.clone(), row_cols));
    let compat = p.compat.as_ref().map(|_| Arc::new(Compatibility::build(tables, &sub)));
    let sides = p
        .sides
        .iter()
        .map(|s| SideConstraint { support: s.support.iter().copied().filter(|g| sub.row_index(*g).is_some()).collect(), ..s.clone() })
        .collect();
    FeasibilityProblem::new(p.q, sub, compat, target, sides)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub line: u32,
    pub members: Vec<u32>,
    /// (a) any three members of S = support ∪ {l} span V̂.
    pub any_three_span: bool,
    /// (b) every non-degenerate hyperplane holds 0 or 2 members.
    pub zero_or_two: bool,
    /// (c) (a) and (b) agree.
    pub tests_agree: bool,
    /// (d) every triple in perspective.
    pub all_perspective: bool,
    /// (d) S∖{m} is a {0,5}-clique of X_m for every m ∈ S.
    pub cliques_05: bool,
    pub pseudo_conic: bool,
    pub oval: OvalReport,
    pub ok: bool,
}

/// Independent checks of a candidate S∖{l}.
pub fn verify_solution(tables: &QuadricTables, l: u32, support: &[u32]) -> Result<VerifyReport> {
    let q = tables.q() as usize;
    if support.len() != q * q {
        return Err(SearchError::Cardinality { expected: q * q, found: support.len() });
    }
    let mut members: Vec<u32> = support.to_vec();
    members.push(l);
    members.sort_unstable();
    members.dedup();
    let oval = check_oval(tables, &members, false)?;
    let any_three_span = oval.any_three_span && members.len() == q * q + 1;
    let zero_or_two = oval.zero_or_two && members.len() == q * q + 1;
    let mut all_perspective = any_three_span;
    let mut cliques_05 = any_three_span;
    if any_three_span {
        let space = &tables.space;
        for (a, &x) in members.iter().enumerate() {
            for (b, &y) in members.iter().enumerate().skip(a + 1) {
                for &z in &members[b + 1..] {
                    let g = [x, y, z].map(|i| tables.generator(i));
                    let sp = spanning(space, g);
                    let persp = sp && matches!(perspective_classify(space, g), Ok(Perspective::Perspective));
                    all_perspective &= persp;
                }
            }
        }
        for &m in &members {
            let msub = tables.generator(m);
            for &x in &members {
                for &y in &members {
                    if x == m || y == m {
                        continue;
                    }
                    let r = classify_generators(space, msub, tables.generator(x), tables.generator(y));
                    cliques_05 &= matches!(r, Ok(0) | Ok(5));
                }
            }
        }
    }
    let tests_agree = any_three_span == zero_or_two;
    let ok = any_three_span && zero_or_two && tests_agree;
    Ok(VerifyReport {
        line: l,
        members,
        any_three_span,
        zero_or_two,
        tests_agree,
        all_perspective,
        cliques_05,
        pseudo_conic: all_perspective && cliques_05,
        oval,
        ok,
    })
}

/// Writes the model in CPLEX LP syntax: binaries x0.. (rows in id order) and
/// y0.. (columns in id order), one constraint per column, the cardinality
/// constraint and the side constraints, constant objective.
pub fn export_lp(p: &FeasibilityProblem) -> String {
    let inc = &*p.incidence;
    let mut s = String::new();
    let _ = writeln!(s, "\\ pseudo-oval feasibility q={} target={}", p.q, p.target);
    if let Some(l) = inc.line {
        let _ = writeln!(s, "\\ fixed generator {l}; x_i is the i-th generator disjoint from it");
    }
    s.push_str("\\ Maximise: 0\nMaximize\n obj: 0 x0\nSubject To\n");
    let line = |s: &mut String, name: &str, terms: Vec<String>, rhs: i64| {
        let _ = write!(s, " {name}:");
        for (k, t) in terms.iter().enumerate() {
            if k > 0 && k % 16 == 0 {
                s.push_str("\n   ");
            }
            let _ = write!(s, " {t}");
        }
        let _ = writeln!(s, " = {rhs}");
    };
    for (j, rows) in inc.col_rows.iter().enumerate() {
        let mut t: Vec<String> = rows.iter().enumerate().map(|(k, r)| if k == 0 { format!("x{r}") } else { format!("+ x{r}") }).collect();
        t.push(format!("- 2 y{j}"));
        line(&mut s, &format!("c{j}"), t, 0);
    }
    let all: Vec<String> = (0..inc.rows.len()).map(|r| if r == 0 { format!("x{r}") } else { format!("+ x{r}") }).collect();
    line(&mut s, "card", all, p.target as i64);
    for (k, side) in p.sides.iter().enumerate() {
        let t: Vec<String> = side
            .support
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let r = inc.row_index(*g).expect("checked");
                if i == 0 { format!("x{r}") } else { format!("+ x{r}") }
            })
            .collect();
        line(&mut s, &format!("u{k}"), t, side.value as i64);
    }
    s.push_str("Binary\n");
    let vars: Vec<String> = (0..inc.rows.len()).map(|r| format!("x{r}")).chain((0..inc.cols.len()).map(|j| format!("y{j}"))).collect();
    for chunk in vars.chunks(16) {
        let _ = writeln!(s, " {}", chunk.join(" "));
    }
    s.push_str("End\n");
    s
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpConstraint {
    pub name: String,
    pub terms: Vec<(i64, String)>,
    pub rhs: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LpModel {
    pub maximize: bool,
    pub objective: Vec<(i64, String)>,
    pub constraints: Vec<LpConstraint>,
    pub binaries: Vec<String>,
}

/// Reads the subset of LP syntax written by [`export_lp`]: linear equality
/// constraints with integer coefficients and a binary section.
pub fn parse_lp(text: &str) -> Result<LpModel> {
    let bad = |m: String| SearchError::LpFormat(m);
    let mut section = "";
    let mut obj_tokens = Vec::new();
    let mut con_tokens = Vec::new();
    let mut binaries = Vec::new();
    let mut maximize = true;
    for raw in text.lines() {
        let line = raw.split('\\').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        match line.to_ascii_lowercase().as_str() {
            "maximize" | "maximise" | "max" => {
                section = "obj";
                continue;
            }
            "minimize" | "minimise" | "min" => {
                section = "obj";
                maximize = false;
                continue;
            }
            "subject to" | "st" | "s.t." => {
                section = "con";
                continue;
            }
            "binary" | "binaries" | "bin" => {
                section = "bin";
                continue;
            }
            "end" => break,
            _ => {}
        }
        let toks = line.split_whitespace().map(str::to_string);
        match section {
            "obj" => obj_tokens.extend(toks),
            "con" => con_tokens.extend(toks),
            "bin" => binaries.extend(toks),
            _ => return Err(bad(format!("text outside a section: {line}"))),
        }
    }
    fn terms(toks: &[String]) -> std::result::Result<Vec<(i64, String)>, String> {
        let mut out = Vec::new();
        let mut sign = 1i64;
        let mut coef: Option<i64> = None;
        for t in toks {
            match t.as_str() {
                "+" => sign = 1,
                "-" => sign = -1,
                _ => {
                    if let Ok(v) = t.parse::<i64>() {
                        coef = Some(v);
                    } else {
                        out.push((sign * coef.take().unwrap_or(1), t.clone()));
                        sign = 1;
                    }
                }
            }
        }
        if coef.is_some() && out.is_empty() {
            // a constant objective such as "obj: 0"
            return Ok(out);
        }
        if coef.is_some() {
            return Err("dangling coefficient".into());
        }
        Ok(out)
    }
    let strip_name = |toks: &[String]| -> (String, Vec<String>) {
        match toks.first() {
            Some(t) if t.ends_with(':') => (t.trim_end_matches(':').to_string(), toks[1..].to_vec()),
            _ => (String::new(), toks.to_vec()),
        }
    };
    let (_, obj) = strip_name(&obj_tokens);
    let objective = terms(&obj).map_err(bad)?;
    let mut constraints = Vec::new();
    let mut i = 0;
    while i < con_tokens.len() {
        let start = i;
        while i < con_tokens.len() && con_tokens[i] != "=" {
            if con_tokens[i] == "<=" || con_tokens[i] == ">=" {
                return Err(bad("only equality constraints are supported".into()));
            }
            i += 1;
        }
        if i + 1 >= con_tokens.len() {
            return Err(bad("constraint without right-hand side".into()));
        }
        let (name, body) = strip_name(&con_tokens[start..i]);
        let rhs = con_tokens[i + 1].parse::<i64>().map_err(|e| bad(format!("rhs of {name}: {e}")))?;
        constraints.push(LpConstraint { name, terms: terms(&body).map_err(bad)?, rhs });
        i += 2;
    }
    Ok(LpModel { maximize, objective, constraints, binaries })
}

/// Rebuilds a problem from a parsed model written by [`export_lp`]. Row and
/// column ids become the variable indices; there is no pairwise data.
pub fn problem_from_lp(m: &LpModel, q: u32) -> Result<FeasibilityProblem> {
    let bad = |s: String| SearchError::LpFormat(s);
    let index = |v: &str, p: char| -> Option<u32> { v.strip_prefix(p)?.parse().ok() };
    let nx = m.binaries.iter().filter(|v| index(v, 'x').is_some()).count();
    let ny = m.binaries.iter().filter(|v| index(v, 'y').is_some()).count();
    let mut row_cols = vec![Vec::new(); nx];
    let mut target = None;
    let mut sides = Vec::new();
    for c in &m.constraints {
        let ys: Vec<&(i64, String)> = c.terms.iter().filter(|t| t.1.starts_with('y')).collect();
        let xs: Vec<u32> = c
            .terms
            .iter()
            .filter(|t| t.1.starts_with('x'))
            .map(|t| if t.0 == 1 { index(&t.1, 'x').ok_or_else(|| bad(t.1.clone())) } else { Err(bad(format!("coefficient {} in {}", t.0, c.name))) })
            .collect::<Result<_>>()?;
        match ys.as_slice() {
            [(-2, y)] if c.rhs == 0 => {
                let j = index(y, 'y').ok_or_else(|| bad(y.clone()))?;
                for &x in &xs {
                    row_cols[x as usize].push(j);
                }
            }
            [] if c.name == "card" => target = Some(c.rhs as usize),
            [] => sides.push(SideConstraint { label: c.name.clone(), support: xs, value: c.rhs as u32 }),
            _ => return Err(bad(format!("unexpected constraint {}", c.name))),
        }
    }
    for rc in &mut row_cols {
        rc.sort_unstable();
    }
    let inc = IncidenceMatrix::from_rows(None, (0..nx as u32).collect(), (0..ny as u32).collect(), row_cols);
    let target = target.ok_or_else(|| bad("no cardinality constraint".into()))?;
    FeasibilityProblem::new(q, Arc::new(inc), None, target, sides)
}

/// Side constraint Σ_{i∈U} x_i = 1 for a U-set.
pub fn uset_constraint(label: &str, u: &crate::usets::USet) -> SideConstraint {
    let mut support: Vec<u32> = u.o1.iter().chain(&u.o2).copied().collect();
    support.sort_unstable();
    SideConstraint { label: label.into(), support, value: 1 }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub flag: crate::usets::Flag,
    pub pole: u32,
    pub p1: u32,
    pub status: Status,
    pub nodes: u64,
    pub wall_ms: u64,
}

/// Feasibility with Σ_U x = 1 for `count` seeded random U-sets on l, each
/// under its own timeout. Timed-out probes stay in the list as such.
pub fn uset_probes(
    tables: &QuadricTables,
    p: &FeasibilityProblem,
    count: usize,
    seed: u64,
    timeout: Option<Duration>,
) -> Result<Vec<ProbeResult>> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let l = p.incidence.line.expect("geometric problem");
    let flags = crate::usets::flags(tables, l);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut per_flag = BTreeMap::new();
    for _ in 0..count {
        let flag = *flags.choose(&mut rng).expect("a generator has points");
        if !per_flag.contains_key(&flag.point) {
            let us = crate::usets::flag_usets(tables, flag)?;
            per_flag.insert(flag.point, us);
        }
        let u = per_flag[&flag.point].choose(&mut rng).expect("every flag has U-sets");
        let pu = p.with_sides(vec![uset_constraint("u", u)])?;
        let r = solve(&pu, &SolveOptions { mode: SolveMode::ProveInfeasible, timeout, ..Default::default() });
        out.push(ProbeResult { flag, pole: u.pole, p1: u.p1, status: r.status, nodes: r.nodes, wall_ms: r.wall_ms });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub samples: usize,
    pub passing_either: usize,
    pub disagreements: usize,
}

/// Compares the any-three-span and 0-or-2 tests on seeded random q²-sets
/// grown greedily from pairwise compatible lines, plus the given sets.
pub fn equivalence_probe(
    tables: &QuadricTables,
    p: &FeasibilityProblem,
    extra: &[Vec<u32>],
    samples: usize,
    seed: u64,
) -> Result<EquivalenceReport> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    let l = p.incidence.line.expect("geometric problem");
    let inc = &*p.incidence;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sets: Vec<Vec<u32>> = extra.to_vec();
    let n = inc.rows.len();
    for _ in 0..samples {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        let mut chosen: Vec<usize> = Vec::new();
        for r in order {
            if chosen.len() == p.target {
                break;
            }
            if p.compat.as_ref().is_none_or(|cp| chosen.iter().all(|&c| cp.ok(c, r))) {
                chosen.push(r);
            }
        }
        if chosen.len() == p.target {
            sets.push(chosen.iter().map(|&r| inc.rows[r]).collect());
        }
    }
    let outcomes: Vec<(bool, bool)> = sets
        .par_iter()
        .map(|s| verify_solution(tables, l, s).map(|v| (v.any_three_span, v.zero_or_two)))
        .collect::<Result<_>>()?;
    Ok(EquivalenceReport {
        samples: outcomes.len(),
        passing_either: outcomes.iter().filter(|(a, b)| *a || *b).count(),
        disagreements: outcomes.iter().filter(|(a, b)| a != b).count(),
    })
}

/// Solutions grouped by their pseudo-conic flag, for reports.
pub fn classify_solutions(tables: &QuadricTables, l: u32, sols: &[Vec<u32>]) -> Result<BTreeMap<String, usize>> {
    let reports: Vec<VerifyReport> = sols.par_iter().map(|s| verify_solution(tables, l, s)).collect::<Result<_>>()?;
    let mut out = BTreeMap::new();
    for r in reports {
        let key = match (r.ok, r.pseudo_conic) {
            (true, true) => "pseudo-conic",
            (true, false) => "pseudo-oval, not a pseudo-conic",
            _ => "not a pseudo-oval",
        };
        *out.entry(key.to_string()).or_default() += 1;
    }
    Ok(out)
}
