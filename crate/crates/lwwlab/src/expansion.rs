//! Hyperedge weights over a cutoff universe of closed walks, the
//! lace-expansion coefficients `pi^(N)`, the coefficient `Pi` solved from
//! the two-point function, and the coefficientwise lace recursion check.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use num_traits::{One, Signed, Zero};

use crate::enumerate::{
    alpha, alpha0, for_each_walk, generalized_loop_measure, loop_measure, reference_neighbor, self_avoiding_walks,
    two_point_all, Budget, LoopCatalogue,
};
use crate::error::{precondition, LwwError, Result};
use crate::laces::{all_laces, IntervalGraph, LabelMode, BRUTE_FORCE_CAP};
use crate::series::{q, step_distribution, Q, SpatialSeries, ZSeries};
use crate::walk::{walk_weight, GraphCtx, LoopActivity, Point, Walk};

/// A finite set of rooted closed walks `X`, each with its range `l(X)` and
/// `alpha_X = exp(w(X)/|X|) - 1`.
#[derive(Clone, Debug)]
pub struct LoopUniverse {
    pub cutoff: usize,
    pub nmax: usize,
    loops: Vec<(Walk, BTreeSet<Point>, ZSeries)>,
}

impl LoopUniverse {
    /// Closed walks of length `1..=cutoff` whose range meets `region`.
    pub fn build(
        ctx: &GraphCtx,
        act: &LoopActivity,
        cutoff: usize,
        nmax: usize,
        region: &BTreeSet<Point>,
    ) -> Result<Self> {
        let mut roots: BTreeSet<Point> = BTreeSet::new();
        match ctx {
            GraphCtx::Lattice(_) => {
                for p in region {
                    roots.extend(crate::enumerate::ball(p, (cutoff / 2) as i64));
                }
            }
            GraphCtx::Finite(g) => roots.extend(g.vertices().iter().cloned()),
        }
        let mut loops = Vec::new();
        for root in &roots {
            let mut found = Vec::new();
            for_each_walk(ctx, root, cutoff, |w| {
                if !w.is_empty() && w.is_closed() && w.0.iter().any(|p| region.contains(p)) {
                    found.push(w.clone());
                }
            })?;
            for w in found {
                let (n, f) = walk_weight(&w, act, ctx);
                let x = ZSeries::monomial(nmax, n, f / q(n as i64));
                let a = x.exp()?.sub(&ZSeries::one(nmax));
                loops.push((w.clone(), w.range(), a));
            }
        }
        Ok(LoopUniverse { cutoff, nmax, loops })
    }

    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    pub fn walk(&self, x: usize) -> &Walk {
        &self.loops[x].0
    }

    pub fn range(&self, x: usize) -> &BTreeSet<Point> {
        &self.loops[x].1
    }

    pub fn alpha(&self, x: usize) -> &ZSeries {
        &self.loops[x].2
    }

    /// `(1 + alpha_X)^e` for `e` in `{-1, 0, 1}`.
    fn power(&self, x: usize, e: i32) -> Result<ZSeries> {
        let one = ZSeries::one(self.nmax);
        match e {
            0 => Ok(one),
            1 => Ok(one.add(self.alpha(x))),
            -1 => one.add(self.alpha(x)).reciprocal(),
            _ => precondition("exponent outside {-1, 0, 1}"),
        }
    }
}

/// A hyperedge `(J, X)`: a set of walk indices together with a closed walk
/// of the universe, or no closed walk for a timelike pair.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Hyperedge {
    pub j: BTreeSet<usize>,
    pub x: Option<usize>,
}

impl Hyperedge {
    pub fn spacelike(j: impl IntoIterator<Item = usize>, x: usize) -> Self {
        Hyperedge { j: j.into_iter().collect(), x: Some(x) }
    }

    pub fn timelike(s: usize, t: usize) -> Self {
        Hyperedge { j: [s, t].into_iter().collect(), x: None }
    }

    pub fn is_timelike(&self) -> bool {
        self.x.is_none()
    }

    /// `(min J, max J)`.
    pub fn span(&self) -> Option<(usize, usize)> {
        Some((*self.j.first()?, *self.j.last()?))
    }
}

/// `F_{J,X}(w)`: `alpha_X` for odd `|J|`, `-alpha_X/(1+alpha_X)` for even
/// `|J|`, each times the indicator that every `w_j` lies in `l(X)`; a
/// timelike pair weighs `-1{w_s = w_t}`.
pub fn hyperedge_weight(e: &Hyperedge, w: &Walk, u: &LoopUniverse) -> Result<ZSeries> {
    if e.j.is_empty() {
        return precondition("a hyperedge needs a nonempty index set");
    }
    if let Some(&j) = e.j.iter().find(|&&j| j > w.len()) {
        return precondition(format!("index {j} exceeds the walk length {}", w.len()));
    }
    match e.x {
        None => {
            if e.j.len() != 2 {
                return precondition("a hyperedge without a closed walk must have two indices");
            }
            let (s, t) = e.span().expect("nonempty");
            let c = if w.0[s] == w.0[t] { -Q::one() } else { Q::zero() };
            Ok(ZSeries::constant(u.nmax, c))
        }
        Some(x) => {
            if x >= u.len() {
                return Err(LwwError::Domain(format!("closed walk {x} is not in the universe")));
            }
            if !e.j.iter().all(|&j| u.range(x).contains(&w.0[j])) {
                return Ok(ZSeries::zero(u.nmax));
            }
            let a = u.alpha(x).clone();
            if e.j.len() % 2 == 1 {
                Ok(a)
            } else {
                Ok(a.mul(&ZSeries::one(u.nmax).add(&a).reciprocal()?).neg())
            }
        }
    }
}

/// All nonempty subsets of `items`.
fn nonempty_subsets(items: &[usize]) -> impl Iterator<Item = BTreeSet<usize>> + '_ {
    (1u64..1u64 << items.len()).map(move |mask| (0..items.len()).filter(|&i| mask >> i & 1 == 1).map(|i| items[i]).collect())
}

fn hyperedge_product(w: &Walk, u: &LoopUniverse, x: usize, sets: impl Iterator<Item = BTreeSet<usize>>) -> Result<ZSeries> {
    let mut p = ZSeries::one(u.nmax);
    for j in sets {
        let f = hyperedge_weight(&Hyperedge { j, x: Some(x) }, w, u)?;
        if !f.is_zero() {
            p = p.mul(&ZSeries::one(u.nmax).add(&f));
        }
    }
    Ok(p)
}

const SUBSET_CAP: usize = 14;

/// Checks `prod_{J nonempty} (1 + F_{J,X}(w)) = (1 + alpha_X)^{1{l(X) meets
/// range w}}` for every `X` of the universe.
pub fn product_identity_check(w: &Walk, u: &LoopUniverse) -> Result<bool> {
    if w.len() + 1 > SUBSET_CAP {
        return Err(LwwError::Resource(format!("walks longer than {} steps", SUBSET_CAP - 1)));
    }
    let idx: Vec<usize> = (0..=w.len()).collect();
    let range = w.range();
    for x in 0..u.len() {
        let lhs = hyperedge_product(w, u, x, nonempty_subsets(&idx))?;
        let meets = u.range(x).iter().any(|p| range.contains(p));
        if lhs != u.power(x, meets as i32)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks the remainder identity: the product over nonempty `J` meeting
/// `[k, n]` equals `(1 + alpha_X)` raised to `1{w[0,k) misses l(X)}
/// 1{w[k,n] meets l(X)}`.
pub fn remainder_identity_check(w: &Walk, k: usize, u: &LoopUniverse) -> Result<bool> {
    if k > w.len() {
        return precondition(format!("k = {k} exceeds the walk length {}", w.len()));
    }
    if w.len() + 1 > SUBSET_CAP {
        return Err(LwwError::Resource(format!("walks longer than {} steps", SUBSET_CAP - 1)));
    }
    let idx: Vec<usize> = (0..=w.len()).collect();
    for x in 0..u.len() {
        let sets = nonempty_subsets(&idx).filter(|j| j.iter().any(|&i| i >= k));
        let lhs = hyperedge_product(w, u, x, sets)?;
        let head_misses = w.0[..k].iter().all(|p| !u.range(x).contains(p));
        let tail_meets = w.0[k..].iter().any(|p| u.range(x).contains(p));
        if lhs != u.power(x, (head_misses && tail_meets) as i32)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// `I^w(s, t)` from its product form over the universe.
pub fn i_omega_universe(w: &Walk, s: usize, t: usize, u: &LoopUniverse) -> Result<ZSeries> {
    if s >= t || t > w.len() {
        return precondition("need s < t <= |w|");
    }
    let one = ZSeries::one(u.nmax);
    if w.0[s] == w.0[t] {
        return Ok(one);
    }
    let inside: BTreeSet<&Point> = w.0[s + 1..t].iter().collect();
    let mut p = one.clone();
    for x in 0..u.len() {
        let r = u.range(x);
        if r.contains(&w.0[s]) && r.contains(&w.0[t]) && !r.iter().any(|p| inside.contains(p)) {
            let a = u.alpha(x);
            let frac = a.mul(&one.add(a).reciprocal()?);
            p = p.mul(&one.sub(&frac));
        }
    }
    Ok(one.sub(&p))
}

/// `w_*(st, spacelike)` summed literally over nonempty collections of
/// spacelike hyperedges with span `st`, and `w_*(st, timelike)`.
pub fn pushforward_weights(w: &Walk, s: usize, t: usize, u: &LoopUniverse) -> Result<(ZSeries, ZSeries)> {
    if s >= t || t > w.len() {
        return precondition("need s < t <= |w|");
    }
    if t - s + 1 > SUBSET_CAP {
        return Err(LwwError::Resource("span too long for the literal pushforward".into()));
    }
    let one = ZSeries::one(u.nmax);
    let same = w.0[s] == w.0[t];
    let timelike = hyperedge_weight(&Hyperedge::timelike(s, t), w, u)?;
    if same {
        return Ok((ZSeries::zero(u.nmax), timelike));
    }
    let inner: Vec<usize> = (s + 1..t).collect();
    let mut all = one.clone();
    for x in 0..u.len() {
        for mask in 0u64..1u64 << inner.len() {
            let mut j: BTreeSet<usize> = (0..inner.len()).filter(|&i| mask >> i & 1 == 1).map(|i| inner[i]).collect();
            j.insert(s);
            j.insert(t);
            let f = hyperedge_weight(&Hyperedge { j, x: Some(x) }, w, u)?;
            if !f.is_zero() {
                all = all.mul(&one.add(&f));
            }
        }
    }
    Ok((all.sub(&one), timelike))
}

/// `w_*(st, spacelike) + w_*(st, timelike) = -I^w(s, t)`.
pub fn span_resummation_check(w: &Walk, s: usize, t: usize, u: &LoopUniverse) -> Result<bool> {
    let (sp, tl) = pushforward_weights(w, s, t, u)?;
    Ok(sp.add(&tl) == i_omega_universe(w, s, t, u)?.neg())
}

/// For a lace with edges `s_i t_i` (sorted by `s`) on `[0, m]`, the lowest
/// compatible partner `sigma(t)` of every time `t` in `1..=m`: the pairs
/// `st` outside the lace that are compatible with it are exactly those
/// with `sigma(t) <= s < t`. Entry 0 is unused.
///
/// * `0 < t < t_1`: every earlier time, `sigma = 0`.
/// * `t = t_i`: `sigma = s_i + 1`.
/// * `t_1 < t < t_2`: only time 0 is excluded, `sigma = 1`.
/// * `t_i < t < t_{i+1}` with `i >= 2`: `sigma = t_{i-1}`.
pub fn avoidance_table(lace: &[(usize, usize)]) -> Vec<usize> {
    let m = lace.last().map(|e| e.1).unwrap_or(0);
    let mut sigma = vec![0; m + 1];
    let ts: Vec<usize> = lace.iter().map(|e| e.1).collect();
    for (t, slot) in sigma.iter_mut().enumerate().skip(1) {
        *slot = if let Some(i) = ts.iter().position(|&x| x == t) {
            lace[i].0 + 1
        } else {
            // Number of lace endpoints below t.
            let i = ts.iter().filter(|&&x| x < t).count();
            match i {
                0 => 0,
                1 => 1,
                _ => ts[i - 2],
            }
        };
    }
    sigma
}

/// A run of consecutive times `start..=end` sharing the partner bound
/// `sigma`. The subwalk `w[start, end]` is weighted by
/// `exp(mu(range; w[sigma, start)))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
    pub sigma: usize,
}

/// Groups the times `1..=m` into maximal runs with a common `sigma`.
pub fn segments(lace: &[(usize, usize)]) -> Vec<Segment> {
    let sigma = avoidance_table(lace);
    let mut out: Vec<Segment> = Vec::new();
    for (t, &s) in sigma.iter().enumerate().skip(1) {
        match out.last_mut() {
            Some(seg) if seg.sigma == s => seg.end = t,
            _ => out.push(Segment { start: t, end: t, sigma: s }),
        }
    }
    out
}

fn lace_pairs(l: &IntervalGraph) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = l.edges.iter().map(|e| (e.s, e.t)).collect();
    v.sort();
    v
}

/// The `2N` cut points `0 = s_1 < s_2 <= t_1 <= s_3 <= ... <= t_N` of a lace.
pub fn lace_cut_points(l: &IntervalGraph) -> Vec<usize> {
    let mut cuts = vec![l.a];
    for len in crate::laces::lace_intervals(l) {
        let last = *cuts.last().expect("nonempty");
        cuts.push(last + len);
    }
    cuts
}

/// Indices (1-based) of the earlier subwalks that subwalk `k` avoids in
/// the literal subwalk description.
pub fn subwalk_avoids(k: usize) -> Vec<usize> {
    match k {
        0 | 1 => vec![],
        2 => vec![1],
        k if k % 2 == 1 => vec![k - 2, k - 1],
        k => vec![k - 3, k - 2, k - 1],
    }
}

/// Unlabelled laces on `[0, m]` with `n_edges` edges, as sorted pairs.
pub fn laces_with_edges(m: usize, n_edges: usize) -> Result<Vec<Vec<(usize, usize)>>> {
    Ok(all_laces(0, m, LabelMode::Single)?.iter().map(lace_pairs).filter(|l| l.len() == n_edges).collect())
}

/// Exact lace-expansion coefficients on `Z^d` for one activity and
/// truncation order.
pub struct Expansion {
    pub d: usize,
    pub nmax: usize,
    pub act: LoopActivity,
    ctx: GraphCtx,
    cat: LoopCatalogue,
    alpha0: ZSeries,
    alpha: ZSeries,
    budget: Budget,
    cache: RefCell<HashMap<(Vec<Point>, Vec<Point>, Vec<Point>), ZSeries>>,
    by_edges: RefCell<HashMap<(usize, bool), Vec<SpatialSeries>>>,
}

fn normalized(sets: [&[Point]; 3]) -> (Vec<Point>, Vec<Point>, Vec<Point>) {
    let base = sets[0][0].clone();
    let f = |s: &[Point]| {
        let mut v: Vec<Point> = s.iter().map(|p| p.sub(&base)).collect();
        v.sort();
        v.dedup();
        v
    };
    (f(sets[0]), f(sets[1]), f(sets[2]))
}

impl Expansion {
    pub fn new(ctx: &GraphCtx, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<Self> {
        let d = match ctx {
            GraphCtx::Lattice(d) => *d,
            GraphCtx::Finite(_) => {
                return Err(LwwError::Unsupported("the lace expansion needs a translation-invariant lattice".into()))
            }
        };
        if nmax > BRUTE_FORCE_CAP {
            return Err(LwwError::Resource(format!(
                "the lace expansion enumerates laces on intervals up to {BRUTE_FORCE_CAP}"
            )));
        }
        let cat = LoopCatalogue::build(ctx, act, nmax, budget)?;
        let o = Point::origin(d);
        let y = reference_neighbor(ctx, &o)?;
        Ok(Expansion {
            d,
            nmax,
            act: act.clone(),
            ctx: ctx.clone(),
            alpha0: alpha0(&cat, &o),
            alpha: alpha(&cat, &o, &y),
            cat,
            budget,
            cache: RefCell::new(HashMap::new()),
            by_edges: RefCell::new(HashMap::new()),
        })
    }

    pub fn alpha0(&self) -> &ZSeries {
        &self.alpha0
    }

    pub fn alpha(&self) -> &ZSeries {
        &self.alpha
    }

    pub fn catalogue(&self) -> &LoopCatalogue {
        &self.cat
    }

    /// `exp(mu(A, B; C))`, cached up to translation. An empty `B` means no
    /// second hitting condition.
    fn exp_measure(&self, a: &[Point], b: &[Point], c: &[Point]) -> ZSeries {
        let key = normalized([a, b, c]);
        if let Some(s) = self.cache.borrow().get(&key) {
            return s.clone();
        }
        let set = |v: &[Point]| -> BTreeSet<Point> { v.iter().cloned().collect() };
        let (a, b, c) = (set(&key.0), set(&key.1), set(&key.2));
        let mu = if b.is_empty() { loop_measure(&self.cat, &a, &c) } else { generalized_loop_measure(&self.cat, &a, &b, &c) };
        let s = mu.exp().expect("loop measures have no constant term");
        self.cache.borrow_mut().insert(key, s.clone());
        s
    }

    /// `I^w(s, t)` from the loop measure.
    pub fn i_omega(&self, w: &[Point], s: usize, t: usize) -> ZSeries {
        if w[s] == w[t] {
            return ZSeries::one(self.nmax);
        }
        let e = self.exp_measure(&w[s..=s], &w[t..=t], &w[s + 1..t]);
        ZSeries::one(self.nmax).sub(&e.reciprocal().expect("unit constant term"))
    }

    /// The summand of `pi^(N)_m` for one walk and one lace, without `z^m`.
    /// Zero when the walk breaks the avoidance table. With `majorant` the
    /// loop weights ignore what they must avoid and `I^w(s, t)` is replaced
    /// by `exp(mu(w_s, w_t)) - 1`, which bounds it coefficientwise.
    fn lace_term(
        &self,
        w: &[Point],
        lace: &[(usize, usize)],
        segs: &[Segment],
        sigma: &[usize],
        majorant: bool,
    ) -> Option<ZSeries> {
        for t in 1..w.len() {
            if w[sigma[t]..t].contains(&w[t]) {
                return None;
            }
        }
        let mut term = ZSeries::one(self.nmax);
        for &(s, t) in lace {
            let i = if majorant && w[s] != w[t] {
                self.exp_measure(&w[s..=s], &w[t..=t], &[]).sub(&ZSeries::one(self.nmax))
            } else {
                self.i_omega(w, s, t)
            };
            if i.is_zero() {
                return None;
            }
            term = term.mul(&i);
        }
        for seg in segs {
            let avoid = if majorant { &[][..] } else { &w[seg.sigma..seg.start] };
            term = term.mul(&self.exp_measure(&w[seg.start..=seg.end], &[], avoid));
        }
        Some(term)
    }

    fn by_length(&self, n_edges: usize, majorant: bool) -> Result<Vec<SpatialSeries>> {
        if n_edges == 0 {
            return precondition("laces have at least one edge");
        }
        if let Some(v) = self.by_edges.borrow().get(&(n_edges, majorant)) {
            return Ok(v.clone());
        }
        let o = Point::origin(self.d);
        let mut out: Vec<SpatialSeries> = (0..=self.nmax).map(|_| SpatialSeries::new(self.nmax)).collect();
        let mut walks: Vec<Vec<Walk>> = vec![Vec::new(); self.nmax + 1];
        self.budget.check(crate::enumerate::tree_size(2 * self.d, self.nmax), "walks for pi")?;
        for_each_walk(&self.ctx, &o, self.nmax, |w| walks[w.len()].push(w.clone()))?;
        for (m, ws) in walks.iter().enumerate() {
            if m < n_edges + 1 {
                continue;
            }
            for lace in laces_with_edges(m, n_edges)? {
                let sigma = avoidance_table(&lace);
                let segs = segments(&lace);
                for w in ws {
                    if let Some(term) = self.lace_term(&w.0, &lace, &segs, &sigma, majorant) {
                        out[m].add_at(w.end(), &term.shift(m));
                    }
                }
            }
        }
        self.by_edges.borrow_mut().insert((n_edges, majorant), out.clone());
        Ok(out)
    }

    /// `pi^(N)_m(x)` for every `m <= nmax` and every `x`, indexed by `m`.
    pub fn pi_n_by_length(&self, n_edges: usize) -> Result<Vec<SpatialSeries>> {
        self.by_length(n_edges, false)
    }

    /// A coefficientwise majorant of `|pi^(N)_m(x)|`: the same walks with
    /// the avoidance conditions on closed walks dropped.
    pub fn pi_n_majorant_by_length(&self, n_edges: usize) -> Result<Vec<SpatialSeries>> {
        self.by_length(n_edges, true)
    }

    /// `pi^(N)_m` from the subwalk description read literally: every
    /// subwalk is self-avoiding, `w^(2)` avoids `w^(1)`, `w^(2k+1)` avoids
    /// `w^(2k-1)` and `w^(2k)`, `w^(2k+2)` avoids `w^(2k-1)`, `w^(2k)` and
    /// `w^(2k+1)`, always apart from the shared endpoint, and each subwalk
    /// carries `alpha_0^{-1} exp(mu(range; avoided subwalks))`. Kept to
    /// compare against the solved coefficient; [`Self::pi_n_by_length`] is
    /// the reading that agrees with it.
    pub fn pi_n_subwalk_reading(&self, n_edges: usize) -> Result<Vec<SpatialSeries>> {
        if n_edges == 0 {
            return precondition("laces have at least one edge");
        }
        let o = Point::origin(self.d);
        let mut out: Vec<SpatialSeries> = (0..=self.nmax).map(|_| SpatialSeries::new(self.nmax)).collect();
        let mut walks: Vec<Vec<Walk>> = vec![Vec::new(); self.nmax + 1];
        for_each_walk(&self.ctx, &o, self.nmax, |w| walks[w.len()].push(w.clone()))?;
        let a0inv = self.alpha0.reciprocal()?;
        for (m, ws) in walks.iter().enumerate() {
            if m < n_edges + 1 {
                continue;
            }
            for l in all_laces(0, m, LabelMode::Single)? {
                let lace = lace_pairs(&l);
                if lace.len() != n_edges {
                    continue;
                }
                let cuts = lace_cut_points(&l);
                'walks: for w in ws {
                    let w = &w.0;
                    let mut term = ZSeries::one(self.nmax);
                    for k in 1..cuts.len() {
                        let (a, b) = (cuts[k - 1], cuts[k]);
                        let sub = &w[a..=b];
                        let distinct: BTreeSet<&Point> = sub.iter().collect();
                        if distinct.len() != sub.len() {
                            continue 'walks;
                        }
                        let mut avoid: BTreeSet<Point> = BTreeSet::new();
                        for j in subwalk_avoids(k) {
                            avoid.extend(w[cuts[j - 1]..=cuts[j]].iter().cloned());
                        }
                        avoid.remove(&w[a]);
                        if sub[1..].iter().any(|p| avoid.contains(p)) {
                            continue 'walks;
                        }
                        let avoid: Vec<Point> = avoid.into_iter().collect();
                        term = term.mul(&self.exp_measure(sub, &[], &avoid)).mul(&a0inv);
                    }
                    for &(s, t) in &lace {
                        term = term.mul(&self.i_omega(w, s, t));
                    }
                    out[m].add_at(&w[m], &term.shift(m));
                }
            }
        }
        Ok(out)
    }

    /// `pi^(N)(x) = sum_m pi^(N)_m(x)`.
    pub fn pi_n(&self, x: &Point, n_edges: usize) -> Result<ZSeries> {
        let parts = self.pi_n_by_length(n_edges)?;
        Ok(parts.iter().fold(ZSeries::zero(self.nmax), |acc, s| acc.add(&s.get(x))))
    }

    /// `pi^(1)` from its closed forms over self-avoiding walks and
    /// polygons: at `x = 0`,
    /// `alpha_0^{-1} sum z^m exp(mu(range)) exp(mu(0; range - 0))`;
    /// elsewhere
    /// `alpha_0^{-1} sum z^m exp(mu(range)) (exp(mu(w_0, w_m; w[1, m-1])) - 1)`.
    pub fn pi1(&self, x: &Point) -> Result<ZSeries> {
        let o = Point::origin(self.d);
        let mut acc = ZSeries::zero(self.nmax);
        for w in self_avoiding_walks(&self.ctx, &o, self.nmax) {
            let m = w.len() - 1;
            if m < 1 {
                continue;
            }
            let end = &w[m];
            if *x == o {
                // A polygon: a self-avoiding walk ending next to the origin,
                // closed by one more step.
                if m + 1 > self.nmax || !end.is_adjacent_lattice(&o) {
                    continue;
                }
                let range = self.exp_measure(&w, &[], &[]);
                let root = self.exp_measure(&w[..1], &[], &w[1..]);
                acc.add_assign(&range.mul(&root).shift(m + 1));
            } else if end == x && m >= 2 {
                let range = self.exp_measure(&w, &[], &[]);
                let pair = self.exp_measure(&w[..1], &w[m..], &w[1..m]);
                acc.add_assign(&range.mul(&pair.sub(&ZSeries::one(self.nmax))).shift(m));
            }
        }
        Ok(acc.mul(&self.alpha0.reciprocal()?))
    }

    /// The largest number of lace edges that fits below `nmax`.
    pub fn max_edges(&self) -> usize {
        self.nmax.saturating_sub(1)
    }

    /// `pi_m = sum_N (-1)^N pi^(N)_m`, indexed by `m`.
    pub fn pi_total_by_length(&self) -> Result<Vec<SpatialSeries>> {
        let mut out: Vec<SpatialSeries> = (0..=self.nmax).map(|_| SpatialSeries::new(self.nmax)).collect();
        for n_edges in 1..=self.max_edges() {
            let parts = self.pi_n_by_length(n_edges)?;
            let sign = if n_edges % 2 == 1 { -Q::one() } else { Q::one() };
            for (m, p) in parts.iter().enumerate() {
                out[m] = out[m].add(&p.scale(&sign));
            }
        }
        Ok(out)
    }

    /// `Pi(x) = sum_m pi_m(x)` from the lace expansion.
    pub fn pi_total(&self) -> Result<SpatialSeries> {
        Ok(self.pi_total_by_length()?.iter().fold(SpatialSeries::new(self.nmax), |acc, s| acc.add(s)))
    }

    /// `Pi = delta - alpha z 2d D - alpha_0 G^{-1}`, solved from the
    /// enumerated two-point function.
    pub fn pi_oracle(&self) -> Result<SpatialSeries> {
        let g = two_point_all(&self.ctx, &Point::origin(self.d), &self.act, self.nmax, self.budget)?;
        pi_from_two_point(self.d, &g, &self.alpha0, &self.alpha)
    }

    /// `c_n(0, x) = sum over n-step self-avoiding walks of exp(mu(range))`,
    /// indexed by `n`.
    pub fn saw_coefficients(&self) -> Vec<SpatialSeries> {
        let o = Point::origin(self.d);
        let mut out: Vec<SpatialSeries> = (0..=self.nmax).map(|_| SpatialSeries::new(self.nmax)).collect();
        for w in self_avoiding_walks(&self.ctx, &o, self.nmax) {
            let n = w.len() - 1;
            out[n].add_at(&w[n], &self.exp_measure(&w, &[], &[]));
        }
        out
    }

    /// Residuals of the lace recursion for `n <= nmax`:
    /// `z^n c_n(0,x) - z alpha sum_{y~0} z^{n-1} c_{n-1}(y,x)
    ///  - sum_{j>=2} sum_y pi_j(y) z^{n-j} c_{n-j}(y,x)`,
    /// with the `n = 0` row compared against `alpha_0 delta_{0,x}`.
    pub fn lace_recursion_residuals(&self) -> Result<Vec<SpatialSeries>> {
        let c = self.saw_coefficients();
        let pi = self.pi_total_by_length()?;
        let o = Point::origin(self.d);
        let shifted: Vec<SpatialSeries> = c.iter().enumerate().map(|(n, s)| shift_all(s, n)).collect();
        let nbrs = self.ctx.neighbors(&o)?;
        let mut out = Vec::new();
        for n in 0..=self.nmax {
            let mut r = shifted[n].clone();
            if n == 0 {
                r = r.sub(&SpatialSeries::delta(self.nmax, o.clone(), self.alpha0.clone()));
            } else {
                let za = self.alpha.shift(1);
                for y in &nbrs {
                    // c_{n-1}(y, x) = c_{n-1}(0, x - y).
                    r = r.sub(&translate(&shifted[n - 1], y).mul_series(&za));
                }
                for j in 2..=n {
                    r = r.sub(&pi[j].convolve(&shifted[n - j])?);
                }
            }
            out.push(r);
        }
        Ok(out)
    }

    /// Largest absolute coefficient over all residuals.
    pub fn lace_recursion_check(&self) -> Result<Q> {
        let mut worst = Q::zero();
        for r in self.lace_recursion_residuals()? {
            for (_, s) in r.iter() {
                for c in s.coeffs() {
                    if c.abs() > worst {
                        worst = c.abs();
                    }
                }
            }
        }
        Ok(worst)
    }
}

fn shift_all(s: &SpatialSeries, k: usize) -> SpatialSeries {
    let mut out = SpatialSeries::new(s.nmax());
    for (x, v) in s.iter() {
        out.insert(x.clone(), v.shift(k));
    }
    out
}

fn translate(s: &SpatialSeries, by: &Point) -> SpatialSeries {
    let mut out = SpatialSeries::new(s.nmax());
    for (x, v) in s.iter() {
        out.insert(x.add(by), v.clone());
    }
    out
}

/// Solves the lace equation for the expansion coefficient:
/// `Pi = delta_0 - z alpha 2d D - alpha_0 G^{-1}`.
pub fn pi_from_two_point(d: usize, g: &SpatialSeries, alpha0: &ZSeries, alpha: &ZSeries) -> Result<SpatialSeries> {
    let nmax = g.nmax();
    let step = step_distribution(d, nmax).scale(&q(2 * d as i64)).mul_series(&alpha.shift(1));
    let delta = SpatialSeries::delta(nmax, Point::origin(d), ZSeries::one(nmax));
    Ok(delta.sub(&step).sub(&g.inverse()?.mul_series(alpha0)))
}
