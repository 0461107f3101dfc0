//! Identity batteries, one per acceptance criterion, grouped into named
//! suites. Every check is exact unless it concerns Monte Carlo or the
//! floating-point analysis layer, and a failed identity reports the first
//! divergent coefficient.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::time::{Duration, Instant};

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::{lace_constants, zc_ratio_estimate, LaceSeries};
use crate::enumerate::{
    alpha, alpha0, ball, bubble_chain, closed_walk_sum, i_omega, interaction_two_point, loop_count_table,
    loop_erased_two_point_all, loop_measure, one_step_bound, reference_neighbor, singleton, split_visit_rhs,
    split_visit_sum, susceptibility, two_point, two_point_all, visit_weighted_closed_sum, Budget, BubbleVariant,
    LoopCatalogue, SplitForm,
};
use crate::error::{LwwError, Result};
use crate::expansion::Expansion;
use crate::heaps::{
    cycle_gas_two_point, directed_edge_multiset, erased_cycle_multiset, legal_pairs, loop_addition,
    loop_erasure_to_pair, pair_edge_multiset, trivial_heap_sum, CycleBookkeeping,
};
use crate::laces::{
    connected_graph_sum, connected_graph_sum_brute, connectedness_recursion_residual, edge_universe,
    lace_prescription_sum, Edge, LabelMode,
};
use crate::oracle;
use crate::sampling::{msd_exact, msd_importance, Method, SamplerConfig};
use crate::series::{fmt_q, q, q_to_f64, qr, SpatialSeries, ZSeries, Q};
use crate::walk::{apply_isometry, non_repulsiveness_witnesses, point_group, FiniteGraph, GraphCtx, LoopActivity, Point};

/// Suite names accepted by [`run_suite`], in acceptance order.
pub const SUITES: [&str; 11] = [
    "core",
    "lm-rep",
    "heaps",
    "cycle-gas",
    "laces",
    "lace-eq",
    "visits",
    "inequalities",
    "sampling",
    "analysis",
    "witnesses",
];

/// First coefficient at which two sides of an identity or bound disagree.
#[derive(Clone, Debug, PartialEq)]
pub struct Divergence {
    pub order: usize,
    pub x: Option<Point>,
    pub lhs: String,
    pub rhs: String,
}

impl fmt::Display for Divergence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.x {
            Some(x) => write!(f, "order {} at x = {:?}: lhs {} rhs {}", self.order, x, self.lhs, self.rhs),
            None => write!(f, "order {}: lhs {} rhs {}", self.order, self.lhs, self.rhs),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub divergence: Option<Divergence>,
}

impl Check {
    pub fn boolean(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into(), divergence: None }
    }

    fn from_divergence(name: impl Into<String>, div: Option<Divergence>, what: &str) -> Self {
        let detail = match &div {
            None => what.to_string(),
            Some(d) => d.to_string(),
        };
        Check { name: name.into(), passed: div.is_none(), detail, divergence: div }
    }

    /// Coefficientwise equality of two series.
    pub fn equal(name: impl Into<String>, lhs: &ZSeries, rhs: &ZSeries, x: Option<&Point>) -> Self {
        let div = lhs.first_difference(rhs).map(|k| Divergence {
            order: k,
            x: x.cloned(),
            lhs: fmt_q(&lhs.coeff(k)),
            rhs: fmt_q(&rhs.coeff(k)),
        });
        Check::from_divergence(name, div, "equal at every order")
    }

    /// Coefficientwise equality at every point of either support.
    pub fn equal_spatial(name: impl Into<String>, lhs: &SpatialSeries, rhs: &SpatialSeries) -> Self {
        let div = lhs.first_difference(rhs).map(|(x, k, a, b)| Divergence {
            order: k,
            x: Some(x),
            lhs: fmt_q(&a),
            rhs: fmt_q(&b),
        });
        Check::from_divergence(name, div, "equal at every order and point")
    }

    /// Coefficientwise `lhs <= rhs`.
    pub fn at_most(name: impl Into<String>, lhs: &ZSeries, rhs: &ZSeries, x: Option<&Point>) -> Self {
        Check::from_divergence(name, first_excess(lhs, rhs, x), "bound holds at every order")
    }

    /// Merges several checks of one kind into a single line that keeps the
    /// first failure.
    pub fn all(name: impl Into<String>, checks: Vec<Check>) -> Self {
        let count = checks.len();
        match checks.into_iter().find(|c| !c.passed) {
            Some(c) => Check { name: name.into(), passed: false, detail: format!("{}: {}", c.name, c.detail), divergence: c.divergence },
            None => Check::boolean(name, true, format!("{count} cases")),
        }
    }
}

fn first_excess(lhs: &ZSeries, rhs: &ZSeries, x: Option<&Point>) -> Option<Divergence> {
    (0..=lhs.nmax().max(rhs.nmax())).find(|&k| lhs.coeff(k) > rhs.coeff(k)).map(|k| Divergence {
        order: k,
        x: x.cloned(),
        lhs: fmt_q(&lhs.coeff(k)),
        rhs: fmt_q(&rhs.coeff(k)),
    })
}

#[derive(Clone, Debug)]
pub struct SuiteReport {
    pub criterion: usize,
    pub title: String,
    pub checks: Vec<Check>,
    pub elapsed: Duration,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    /// One line: verdict, criterion number, title, and the first failure.
    pub fn summary(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let mut line = format!(
            "{verdict} [{:>2}] {} ({} checks, {:.1}s)",
            self.criterion,
            self.title,
            self.checks.len(),
            self.elapsed.as_secs_f64()
        );
        if let Some(c) = self.failures().next() {
            line.push_str(&format!(": {}: {}", c.name, c.detail));
        }
        line
    }
}

/// Overrides for a suite's default parameter grid. `None` keeps the grid
/// of the acceptance criterion.
#[derive(Clone, Debug, Default)]
pub struct Params {
    pub d: Option<usize>,
    pub lambda: Option<Q>,
    pub nmax: Option<usize>,
    pub samples: Option<usize>,
    pub seeds: Option<u64>,
    pub budget: Budget,
}

impl Params {
    fn dims(&self, default: &[usize]) -> Vec<usize> {
        self.d.map(|d| vec![d]).unwrap_or_else(|| default.to_vec())
    }

    fn lambdas(&self, default: &[(i64, i64)]) -> Vec<Q> {
        self.lambda.clone().map(|l| vec![l]).unwrap_or_else(|| default.iter().map(|&(a, b)| qr(a, b)).collect())
    }

    fn order(&self, default: usize) -> usize {
        self.nmax.unwrap_or(default)
    }
}

/// Criteria run by a suite. `all` runs every criterion.
pub fn suite_criteria(name: &str) -> Result<Vec<usize>> {
    Ok(match name {
        "all" => (1..=12).collect(),
        "core" => vec![1, 2],
        "lm-rep" => vec![3],
        "heaps" => vec![4],
        "cycle-gas" => vec![5],
        "laces" => vec![6],
        "lace-eq" => vec![7],
        "visits" => vec![8],
        "inequalities" => vec![9],
        "sampling" => vec![10],
        "analysis" => vec![11],
        "witnesses" => vec![12],
        other => return Err(LwwError::Parse(format!("unknown suite '{other}'; expected one of all, {}", SUITES.join(", ")))),
    })
}

pub fn run_suite(name: &str, p: &Params) -> Result<Vec<SuiteReport>> {
    suite_criteria(name)?.into_iter().map(|k| criterion(k, p)).collect()
}

/// Runs one acceptance criterion.
pub fn criterion(k: usize, p: &Params) -> Result<SuiteReport> {
    let start = Instant::now();
    let (title, checks) = match k {
        1 => ("simple random walk anchor", srw_anchor(p)?),
        2 => ("self-avoiding walk anchor", saw_anchor(p)?),
        3 => ("loop-measure representation", lm_rep(p)?),
        4 => ("loop erasure and loop addition round trip", viennot(p)?),
        5 => ("heap identity and cycle gas", cycle_gas(p)?),
        6 => ("lace prescription and connectedness recursion", lace_machinery(p)?),
        7 => ("lace expansion equation", lace_equation(p)?),
        8 => ("visit identities", visit_identities(p)?),
        9 => ("coefficientwise inequalities", inequalities(p)?),
        10 => ("Monte Carlo consistency", monte_carlo(p)?),
        11 => ("series analysis sanity", analysis_sanity(p)?),
        12 => ("non-repulsiveness witnesses", witnesses(p)?),
        _ => return Err(LwwError::Precondition(format!("criteria are numbered 1 to 12, got {k}"))),
    };
    Ok(SuiteReport { criterion: k, title: title.into(), checks, elapsed: start.elapsed() })
}

fn lam_name(l: &Q) -> String {
    fmt_q(l)
}

fn srw_anchor(p: &Params) -> Result<Vec<Check>> {
    let nmax = p.order(12);
    let mut out = Vec::new();
    for d in p.dims(&[1, 2, 3]) {
        let t = loop_count_table(nmax, d, false, p.budget)?;
        let powers = ZSeries::from_coeffs((0..=nmax).map(|n| num_traits::pow(q(2 * d as i64), n)).collect());
        out.push(Check::equal(format!("c_n = (2d)^n, d={d}"), &t.chi(&Q::one()), &powers, None));
        let msd = ZSeries::from_coeffs((0..=nmax).map(|n| msd_exact(n, d, &LoopActivity::from_int(1), p.budget)).collect::<Result<_>>()?);
        let ns = ZSeries::from_coeffs((0..=nmax).map(|n| q(n as i64)).collect());
        out.push(Check::equal(format!("msd_exact(n) = n, d={d}"), &msd, &ns, None));
    }
    Ok(out)
}

fn saw_anchor(p: &Params) -> Result<Vec<Check>> {
    let nmax = p.order(5);
    let ctx = GraphCtx::lattice(2);
    let chi = susceptibility(&ctx, &Point::origin(2), &LoopActivity::from_int(0), nmax, p.budget)?;
    let brute = ZSeries::from_coeffs((0..=nmax).map(|n| q(oracle::saw_count(2, n) as i64)).collect());
    let table = loop_count_table(nmax, 2, false, p.budget)?.chi(&Q::zero());
    let known = ZSeries::from_ints(5, &[1, 4, 12, 36, 100, 284]);
    Ok(vec![
        Check::equal("engine at lambda=0 vs brute-force SAW count", &chi, &brute, None),
        Check::equal("loop table at lambda=0 vs brute-force SAW count", &table, &brute, None),
        Check::equal("counts 4, 12, 36, 100, 284", &brute.truncate(5.min(nmax)), &known.truncate(5.min(nmax)), None),
    ])
}

fn lm_rep(p: &Params) -> Result<Vec<Check>> {
    let nmax = p.order(8);
    let mut out = Vec::new();
    for d in p.dims(&[1, 2]) {
        let ctx = GraphCtx::lattice(d);
        let o = Point::origin(d);
        for l in p.lambdas(&[(0, 1), (1, 2), (1, 1), (2, 1)]) {
            let act = LoopActivity::constant(l.clone());
            let cat = LoopCatalogue::build(&ctx, &act, nmax, p.budget)?;
            let le = loop_erased_two_point_all(&cat, &ctx, &o, p.budget)?;
            let g = two_point_all(&ctx, &o, &act, nmax, p.budget)?;
            let cases = ball(&o, 3)
                .iter()
                .map(|x| Check::equal("x", &le.get(x), &g.get(x), Some(x)))
                .collect();
            out.push(Check::all(format!("d={d} lambda={}", lam_name(&l)), cases));
        }
    }
    Ok(out)
}

fn viennot(p: &Params) -> Result<Vec<Check>> {
    let size = p.order(8);
    let d = p.d.unwrap_or(2);
    let mut walks = 0usize;
    let mut bad: [Option<String>; 4] = Default::default();
    for n in 0..=size {
        for w in oracle::all_walks(d, n) {
            walks += 1;
            let pair = loop_erasure_to_pair(&w);
            let checks = [
                pair.is_legal(),
                loop_addition(&pair).as_ref() == Ok(&w),
                pair_edge_multiset(&pair) == directed_edge_multiset(&w),
                pair.heap.labels() == erased_cycle_multiset(&w),
            ];
            for (slot, ok) in bad.iter_mut().zip(checks) {
                if !ok && slot.is_none() {
                    *slot = Some(format!("walk {w:?}"));
                }
            }
        }
    }
    let g = FiniteGraph::grid(3, 3);
    let mut pairs = 0usize;
    let mut bad_pairs: [Option<String>; 3] = Default::default();
    for pair in legal_pairs(&g, size) {
        pairs += 1;
        let w = loop_addition(&pair)?;
        let checks = [
            loop_erasure_to_pair(&w) == pair,
            pair_edge_multiset(&pair) == directed_edge_multiset(&w),
            pair.heap.labels() == erased_cycle_multiset(&w),
        ];
        for (slot, ok) in bad_pairs.iter_mut().zip(checks) {
            if !ok && slot.is_none() {
                *slot = Some(format!("pair with path {:?}", pair.eta));
            }
        }
    }
    let mk = |name: &str, fail: &Option<String>, count: usize, what: &str| match fail {
        Some(f) => Check::boolean(name, false, format!("fails at {f}")),
        None => Check::boolean(name, true, format!("{count} {what}")),
    };
    Ok(vec![
        mk("loop erasure gives a legal pair", &bad[0], walks, "walks"),
        mk("loop addition inverts loop erasure", &bad[1], walks, "walks"),
        mk("walk edge multiset conserved", &bad[2], walks, "walks"),
        mk("walk cycle multiset conserved", &bad[3], walks, "walks"),
        mk("loop erasure inverts loop addition on the 3x3 box", &bad_pairs[0], pairs, "legal pairs"),
        mk("pair edge multiset conserved", &bad_pairs[1], pairs, "legal pairs"),
        mk("pair cycle multiset conserved", &bad_pairs[2], pairs, "legal pairs"),
        Check::boolean("legal pairs found", pairs > 0, format!("{pairs} legal pairs")),
    ])
}

fn restrict(g: &FiniteGraph, forbidden: &BTreeSet<Point>) -> Result<FiniteGraph> {
    let keep: Vec<Point> = g.vertices().iter().filter(|v| !forbidden.contains(v)).cloned().collect();
    let idx = |p: &Point| keep.iter().position(|q| q == p);
    let edges: Vec<(usize, usize)> = g
        .edge_list()
        .into_iter()
        .filter_map(|(a, b)| Some((idx(&g.vertices()[a])?, idx(&g.vertices()[b])?)))
        .collect();
    FiniteGraph::new(keep, &edges)
}

/// `sum_x sum_n c_n(x, x) z^n / n` over closed walks avoiding `forbidden`.
fn rooted_loop_sum(g: &FiniteGraph, forbidden: &BTreeSet<Point>, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<ZSeries> {
    let sub = GraphCtx::Finite(restrict(g, forbidden)?);
    let mut acc = ZSeries::zero(nmax);
    for v in g.vertices().iter().filter(|v| !forbidden.contains(v)) {
        let c = closed_walk_sum(&sub, v, act, nmax, budget)?;
        for n in 1..=nmax {
            acc.add_to_coeff(n, &(c.coeff(n) / q(n as i64)));
        }
    }
    Ok(acc)
}

fn cycle_gas(p: &Params) -> Result<Vec<Check>> {
    let nmax = p.order(8);
    let mut out = Vec::new();
    for (w, h) in [(2, 2), (2, 3), (3, 3)] {
        let g = FiniteGraph::grid(w, h);
        let ctx = GraphCtx::Finite(g.clone());
        let o = Point(vec![0, 0]);
        for l in p.lambdas(&[(1, 2), (1, 1), (2, 1)]) {
            let act = LoopActivity::constant(l.clone());
            let tag = format!("{w}x{h} lambda={}", lam_name(&l));
            let mut heap = Vec::new();
            for forb in [BTreeSet::new(), singleton(&o), singleton(&Point(vec![1, 1]))] {
                let t = trivial_heap_sum(&forb, &ctx, &act, nmax)?;
                let e = rooted_loop_sum(&g, &forb, &act, nmax, p.budget)?.neg().exp()?;
                heap.push(Check::equal(format!("forbidden {forb:?}"), &t, &e, None));
            }
            out.push(Check::all(format!("heap identity {tag}"), heap));
            let mut gas = Vec::new();
            for x in g.vertices() {
                let g2 = two_point(&ctx, &o, x, &act, nmax, false, p.budget)?;
                for b in [CycleBookkeeping::Oriented, CycleBookkeeping::Unoriented] {
                    let c = cycle_gas_two_point(&o, x, &ctx, &act, nmax, b)?;
                    gas.push(Check::equal(format!("{b:?}"), &c, &g2, Some(x)));
                }
            }
            out.push(Check::all(format!("cycle gas {tag}"), gas));
        }
    }
    Ok(out)
}

fn random_weights(a: usize, b: usize, mode: LabelMode, rng: &mut ChaCha8Rng) -> HashMap<Edge, Q> {
    edge_universe(a, b, mode)
        .into_iter()
        .map(|e| (e, qr(rng.random_range(-6i64..=6), rng.random_range(1i64..=7))))
        .collect()
}

fn lace_machinery(p: &Params) -> Result<Vec<Check>> {
    const WEIGHTINGS: usize = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut out = Vec::new();
    for (mode, max_len, brute_len) in [(LabelMode::Single, 6, 5), (LabelMode::Dual, 4, 3)] {
        let max_len = p.nmax.map_or(max_len, |n| n.min(max_len));
        let (mut prescription, mut recursion, mut brute) = (Vec::new(), Vec::new(), Vec::new());
        for len in 1..=max_len {
            for i in 0..WEIGHTINGS {
                let w = random_weights(0, len, mode, &mut rng);
                let lhs = connected_graph_sum(0, len, &w, mode)?;
                let rhs = lace_prescription_sum(0, len, &w, mode)?;
                let tag = format!("length {len} weighting {i}");
                prescription.push(eq_q(&tag, &lhs, &rhs));
                let r = connectedness_recursion_residual(0, len, &w, mode)?;
                recursion.push(eq_q(&tag, &r, &Q::zero()));
                if len <= brute_len && i < 5 {
                    brute.push(eq_q(&tag, &lhs, &connected_graph_sum_brute(0, len, &w, mode)?));
                }
            }
        }
        out.push(Check::all(format!("{mode:?} lace prescription"), prescription));
        out.push(Check::all(format!("{mode:?} K/J recursion residual"), recursion));
        out.push(Check::all(format!("{mode:?} state sum vs subset sum"), brute));
    }
    Ok(out)
}

fn eq_q(name: &str, lhs: &Q, rhs: &Q) -> Check {
    let div = (lhs != rhs).then(|| Divergence { order: 0, x: None, lhs: fmt_q(lhs), rhs: fmt_q(rhs) });
    Check::from_divergence(name, div, "equal")
}

fn lace_equation(p: &Params) -> Result<Vec<Check>> {
    let nmax = p.order(6);
    let mut out = Vec::new();
    for d in p.dims(&[1, 2]) {
        for l in p.lambdas(&[(0, 1), (1, 2), (2, 1)]) {
            let ex = Expansion::new(&GraphCtx::lattice(d), &LoopActivity::constant(l.clone()), nmax, p.budget)?;
            let tag = format!("d={d} lambda={}", lam_name(&l));
            let res = ex.lace_recursion_check()?;
            out.push(eq_q(&format!("recursion residual {tag}"), &res, &Q::zero()));
            out.push(Check::equal_spatial(format!("pi_total = pi_oracle {tag}"), &ex.pi_total()?, &ex.pi_oracle()?));
        }
    }
    Ok(out)
}

fn visit_identities(p: &Params) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let orders = p.nmax.map(|n| vec![n]).unwrap_or_else(|| vec![6, 8]);
    for (d, nmax) in p.dims(&[1, 2]).into_iter().flat_map(|d| orders.iter().map(move |&n| (d, n))) {
        let ctx = GraphCtx::lattice(d);
        let o = Point::origin(d);
        for l in p.lambdas(&[(0, 1), (1, 2), (1, 1), (2, 1)]) {
            let act = LoopActivity::constant(l.clone());
            let tag = format!("d={d} lambda={} N={nmax}", lam_name(&l));
            let cat = LoopCatalogue::build(&ctx, &act, nmax, p.budget)?;
            let a0 = alpha0(&cat, &o);
            let diag = visit_weighted_closed_sum(&ctx, &o, &o, &act, nmax, p.budget)?;
            out.push(Check::equal(format!("BC-Diag {tag}"), &diag, &a0.mul(&a0.sub(&ZSeries::one(nmax))), Some(&o)));
            let mut chain = Vec::new();
            for y in ball(&o, 2).into_iter().filter(|y| *y != o) {
                let lhs = visit_weighted_closed_sum(&ctx, &o, &y, &act, nmax, p.budget)?;
                let rhs = bubble_chain(&ctx, &o, &y, &act, nmax, BubbleVariant::True, p.budget)?;
                chain.push(Check::equal("y", &lhs, &rhs, Some(&y)));
            }
            out.push(Check::all(format!("Bubble-Chain {tag}"), chain));
            let mut split = Vec::new();
            for (y, b) in split_cases(d) {
                let lhs = split_visit_sum(&ctx, &o, &y, &b, &act, nmax, p.budget)?;
                let rhs = split_visit_rhs(&ctx, &o, &y, &b, &act, nmax, SplitForm::Exact, p.budget)?;
                split.push(Check::equal(format!("b={b:?}"), &lhs, &rhs, Some(&y)));
            }
            out.push(Check::all(format!("Bubble-Chain-Split {tag}"), split));
        }
    }
    Ok(out)
}

/// Endpoint and visited-point pairs for the split identity.
fn split_cases(d: usize) -> Vec<(Point, Point)> {
    let e = |k: usize, s: i32| Point::unit(d, k, s);
    let mut v = vec![(e(0, 2), e(0, 1)), (e(0, 1), e(0, 2)), (e(0, 1), e(0, 1)), (e(0, 1), e(0, -1))];
    if d > 1 {
        v.push((e(0, 1), e(1, 1)));
        v.push((e(0, 1).add(&e(1, 1)), e(1, 1)));
    }
    v
}

fn inequalities(p: &Params) -> Result<Vec<Check>> {
    let nmax = p.order(8);
    let mut out = Vec::new();

    let mut trivial = Vec::new();
    for d in p.dims(&[1, 2, 3]) {
        let t = loop_count_table(nmax, d, false, p.budget)?;
        for l in p.lambdas(&[(0, 1), (1, 2), (1, 1), (2, 1), (5, 1)]) {
            let bar = if l > Q::one() { l.clone() } else { Q::one() };
            let bound =
                ZSeries::from_coeffs((0..=nmax).map(|n| num_traits::pow(bar.clone(), n / 2) * num_traits::pow(q(2 * d as i64), n)).collect());
            trivial.push(Check::at_most(format!("d={d} lambda={}", lam_name(&l)), &t.chi(&l), &bound, None));
        }
    }
    out.push(Check::all("Trivial-G-Bound", trivial));

    let small = nmax.min(6);
    let mut repulsion = Vec::new();
    for d in p.dims(&[1, 2]) {
        let ctx = GraphCtx::lattice(d);
        let max_len = if d == 1 { 6 } else { 4 };
        for l in p.lambdas(&[(1, 2), (1, 1), (2, 1)]) {
            let cat = LoopCatalogue::build(&ctx, &LoopActivity::constant(l.clone()), small, p.budget)?;
            let mut cache: HashMap<(Point, Point), ZSeries> = HashMap::new();
            let mut cases = Vec::new();
            for n in 1..=max_len {
                for w in oracle::all_walks(d, n) {
                    for a in 0..w.len() {
                        for b in a + 1..=w.len() {
                            let io = i_omega(&cat, &w, a, b)?;
                            let key = (w.0[a].clone(), w.0[b].clone());
                            let i = cache.entry(key).or_insert_with(|| interaction_two_point(&cat, &w.0[a], &w.0[b]));
                            cases.push(Check::at_most(format!("walk {w:?} s={a} t={b}"), &io, i, None));
                        }
                    }
                }
            }
            repulsion.push(Check::all(format!("d={d} lambda={}", lam_name(&l)), cases));
        }
    }
    out.push(Check::all("Repulsion-I", repulsion));

    // Listed per case: this bound fails at nearest neighbours.
    for d in p.dims(&[1, 2]) {
        let ctx = GraphCtx::lattice(d);
        let o = Point::origin(d);
        for l in p.lambdas(&[(0, 1), (1, 2), (1, 1), (2, 1)]) {
            let act = LoopActivity::constant(l.clone());
            let mut cases = Vec::new();
            for y in ball(&o, 2).into_iter().filter(|y| *y != o) {
                let t = bubble_chain(&ctx, &o, &y, &act, small, BubbleVariant::True, p.budget)?;
                let u = bubble_chain(&ctx, &o, &y, &act, small, BubbleVariant::Upper, p.budget)?;
                cases.push(Check::at_most("y", &t, &u, Some(&y)));
            }
            out.push(Check::all(format!("BC-Bound d={d} lambda={}", lam_name(&l)), cases));
        }
    }

    let mut one_step = Vec::new();
    for d in p.dims(&[1, 2]) {
        let ctx = GraphCtx::lattice(d);
        let o = Point::origin(d);
        for l in p.lambdas(&[(0, 1), (1, 2), (1, 1), (2, 1)]) {
            let act = LoopActivity::constant(l.clone());
            let g = two_point_all(&ctx, &o, &act, nmax, p.budget)?;
            let cat = LoopCatalogue::build(&ctx, &act, nmax, p.budget)?;
            let a = alpha(&cat, &o, &reference_neighbor(&ctx, &o)?);
            let mut cases = Vec::new();
            for (y, gy) in g.iter().filter(|(y, _)| **y != o) {
                cases.push(Check::at_most("y", gy, &one_step_bound(&g, &a, &ctx, y)?, Some(y)));
            }
            one_step.push(Check::all(format!("d={d} lambda={}", lam_name(&l)), cases));
        }
    }
    out.push(Check::all("One-Step-SM", one_step));

    out.push(Check::all("LM-Properties", loop_measure_properties(p, small)?));
    Ok(out)
}

/// Monotonicity of `mu(A; B)` in both sets and invariance under lattice
/// symmetries.
fn loop_measure_properties(p: &Params, nmax: usize) -> Result<Vec<Check>> {
    let d = p.d.unwrap_or(2);
    let ctx = GraphCtx::lattice(d);
    let o = Point::origin(d);
    let e = |k: usize, s: i32| Point::unit(d, k.min(d - 1), s);
    let a_chain: Vec<BTreeSet<Point>> = vec![
        [o.clone()].into(),
        [o.clone(), e(0, 1)].into(),
        [o.clone(), e(0, 1), e(0, 1).add(&e(1, 1))].into(),
    ];
    let b_chain: Vec<BTreeSet<Point>> = vec![BTreeSet::new(), [e(0, 2)].into(), [e(0, 2), e(1, -1).add(&e(0, -1))].into()];
    let mut out = Vec::new();
    for l in p.lambdas(&[(1, 2), (1, 1), (2, 1)]) {
        let cat = LoopCatalogue::build(&ctx, &LoopActivity::constant(l.clone()), nmax, p.budget)?;
        let tag = format!("lambda={}", lam_name(&l));
        for b in &b_chain {
            for w in a_chain.windows(2) {
                let (lo, hi) = (loop_measure(&cat, &w[0], b), loop_measure(&cat, &w[1], b));
                out.push(Check::at_most(format!("increasing in A {tag}"), &lo, &hi, None));
            }
        }
        for a in &a_chain {
            for w in b_chain.windows(2) {
                let (big, small) = (loop_measure(&cat, a, &w[0]), loop_measure(&cat, a, &w[1]));
                out.push(Check::at_most(format!("decreasing in B {tag}"), &small, &big, None));
            }
            out.push(Check::boolean(format!("nonnegative {tag}"), loop_measure(&cat, a, &BTreeSet::new()).is_nonnegative(), "all orders"));
        }
        let (a, b) = (&a_chain[2], &b_chain[2]);
        let base = loop_measure(&cat, a, b);
        for g in point_group(d) {
            let ra: BTreeSet<Point> = a.iter().map(|x| apply_isometry(&g, x)).collect();
            let rb: BTreeSet<Point> = b.iter().map(|x| apply_isometry(&g, x)).collect();
            out.push(Check::equal(format!("point-group invariance {tag}"), &loop_measure(&cat, &ra, &rb), &base, None));
        }
        let shift = e(0, 3);
        let ta: BTreeSet<Point> = a.iter().map(|x| x.add(&shift)).collect();
        let tb: BTreeSet<Point> = b.iter().map(|x| x.add(&shift)).collect();
        out.push(Check::equal(format!("translation invariance {tag}"), &loop_measure(&cat, &ta, &tb), &base, None));
    }
    Ok(out)
}

fn monte_carlo(p: &Params) -> Result<Vec<Check>> {
    let d = p.d.unwrap_or(2);
    let n = p.nmax.unwrap_or(10);
    let samples = p.samples.unwrap_or(1_000_000);
    let seeds = p.seeds.unwrap_or(100);
    let mut out = Vec::new();
    for l in p.lambdas(&[(1, 2), (2, 1)]) {
        let exact = q_to_f64(&msd_exact(n, d, &LoopActivity::constant(l.clone()), p.budget)?);
        let mut covered = 0;
        let mut first = None;
        for seed in 0..seeds {
            let cfg = SamplerConfig { d, n, lambda: l.clone(), num_samples: samples, seed, method: Method::ImportanceSrw };
            let est = msd_importance(&cfg)?;
            if est.covers(exact, 3.0) {
                covered += 1;
            }
            first.get_or_insert(est);
        }
        let tag = format!("d={d} n={n} lambda={}", lam_name(&l));
        if let Some(est) = first {
            out.push(Check::boolean(
                format!("seed 0 within 3 standard errors {tag}"),
                est.covers(exact, 3.0),
                format!("estimate {:.5} +- {:.5}, exact {exact:.5}", est.estimate, est.stderr),
            ));
        }
        let rate = covered as f64 / seeds as f64;
        out.push(Check::boolean(
            format!("3-sigma coverage {tag}"),
            rate >= 0.95,
            format!("{covered} of {seeds} seeds cover the exact value {exact:.5}"),
        ));
    }
    Ok(out)
}

fn analysis_sanity(p: &Params) -> Result<Vec<Check>> {
    let mut out = Vec::new();
    let nmax = p.order(10);
    for d in p.dims(&[1, 2, 3]) {
        let t = loop_count_table(nmax, d, false, p.budget)?;
        let chi = t.chi(&Q::one());
        let exact_ratio = (0..nmax).all(|n| chi.coeff(n) / chi.coeff(n + 1) == qr(1, 2 * d as i64));
        let est = zc_ratio_estimate(&chi)?;
        let target = 1.0 / (2 * d) as f64;
        let floats = est.rows.iter().flat_map(|r| r.values.iter().flatten()).all(|v| (v - target).abs() <= 1e-12 * target);
        out.push(Check::boolean(
            format!("lambda=1 ratios equal 1/(2d), d={d}"),
            exact_ratio && floats && (est.extrapolated - target).abs() <= 1e-12 * target,
            format!("extrapolated {:.15}", est.extrapolated),
        ));
    }
    let d2 = p.d.unwrap_or(2);
    let chi = loop_count_table(nmax, d2, false, p.budget)?.chi(&q(2));
    let zc = zc_ratio_estimate(&chi)?.extrapolated;
    let bound = 1.0 / (2.0 * d2 as f64 * 2f64.sqrt());
    out.push(Check::boolean(
        format!("lambda=2 critical point above 1/(2d sqrt 2), d={d2}"),
        zc >= bound,
        format!("z_c estimate {zc:.5}, bound {bound:.5}"),
    ));
    for d in p.dims(&[1, 2]) {
        let order = if d == 1 { 11 } else { 9 };
        let series = LaceSeries::compute(d, &LoopActivity::from_int(1), p.nmax.unwrap_or(order), p.budget)?;
        let (a, dd) = lace_constants(&series)?;
        for (name, est) in [("A", a), ("D", dd)] {
            let v = est.extrapolated;
            out.push(Check::boolean(
                format!("{name} within 10% of 1 at lambda=1, d={d}"),
                (v - 1.0).abs() <= 0.1,
                format!("{name} = {v:.12} at order {}", est.order),
            ));
        }
    }
    Ok(out)
}

fn witnesses(p: &Params) -> Result<Vec<Check>> {
    let d = p.d.unwrap_or(2);
    let max_len = p.order(6);
    let (more, fewer) = non_repulsiveness_witnesses(d, max_len)?;
    let show = |w: &Option<crate::walk::LoopCountWitness>| match w {
        Some(w) => format!("{:?} then {:?}: separate {}, joined {}", w.first, w.second, w.separate, w.joined),
        None => format!("none with both lengths at most {max_len}"),
    };
    Ok(vec![
        Check::boolean("joining creates a loop", more.is_some(), show(&more)),
        Check::boolean("joining merges loops", fewer.is_some(), show(&fewer)),
    ])
}
