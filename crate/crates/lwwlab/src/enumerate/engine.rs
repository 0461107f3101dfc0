//! Depth-first walk enumeration with incremental loop erasure.

use std::collections::{BTreeSet, HashMap, VecDeque};

use num_traits::{One, Zero};
use rayon::prelude::*;

use crate::error::{precondition, LwwError, Result};
use crate::series::{q, SpatialSeries, ZSeries, Q};
use crate::walk::{GraphCtx, LoopActivity, Point, SapKey, Walk};

/// Ceiling on the number of enumeration nodes a job may visit.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budget {
    pub max_nodes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_nodes: 1_000_000_000 }
    }
}

impl Budget {
    pub fn new(max_nodes: u64) -> Self {
        Budget { max_nodes }
    }

    /// Reads `LWW_BUDGET` from the environment, falling back to the default.
    pub fn from_env() -> Self {
        std::env::var("LWW_BUDGET")
            .ok()
            .and_then(|s| s.trim().parse::<f64>().ok())
            .map(|v| Budget { max_nodes: v as u64 })
            .unwrap_or_default()
    }

    pub fn check(&self, nodes: f64, what: &str) -> Result<()> {
        if nodes > self.max_nodes as f64 {
            return Err(LwwError::Resource(format!(
                "{what} needs about {nodes:.3e} enumeration nodes, above the budget of {}",
                self.max_nodes
            )));
        }
        Ok(())
    }
}

/// Number of nodes in a full enumeration tree of the given degree and depth.
pub fn tree_size(degree: usize, depth: usize) -> f64 {
    (0..=depth).map(|n| (degree as f64).powi(n as i32)).sum()
}

/// A graph with vertices numbered `0..n`, used by the enumeration loops.
/// Lattice contexts are represented by a box large enough that walks
/// of the requested length never reach its boundary.
pub struct IndexedGraph {
    pub coords: Vec<Point>,
    pub adj: Vec<Vec<u32>>,
    index: HashMap<Point, u32>,
    pub lattice: bool,
}

impl IndexedGraph {
    pub fn new(ctx: &GraphCtx, center: &Point, reach: usize) -> Self {
        match ctx {
            GraphCtx::Lattice(d) => Self::lattice_box(*d, center, reach as i32 + 1),
            GraphCtx::Finite(g) => {
                let coords = g.vertices().to_vec();
                let adj = g.adjacency().iter().map(|r| r.iter().map(|&j| j as u32).collect()).collect();
                let index = coords.iter().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect();
                IndexedGraph { coords, adj, index, lattice: false }
            }
        }
    }

    fn lattice_box(d: usize, center: &Point, radius: i32) -> Self {
        let side = (2 * radius + 1) as usize;
        let total = side.pow(d as u32);
        let mut coords = Vec::with_capacity(total);
        for code in 0..total {
            let mut c = code;
            let mut v = Vec::with_capacity(d);
            for i in 0..d {
                v.push((c % side) as i32 - radius + center.0[i]);
                c /= side;
            }
            coords.push(Point(v));
        }
        let index: HashMap<Point, u32> = coords.iter().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect();
        let mut adj = vec![Vec::with_capacity(2 * d); total];
        for (i, p) in coords.iter().enumerate() {
            let mut row = Vec::with_capacity(2 * d);
            for axis in 0..d {
                for sign in [-1, 1] {
                    if let Some(&j) = index.get(&p.add(&Point::unit(d, axis, sign))) {
                        row.push(j);
                    }
                }
            }
            row.sort_by(|&a, &b| coords[a as usize].cmp(&coords[b as usize]));
            adj[i] = row;
        }
        IndexedGraph { coords, adj, index, lattice: true }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn index_of(&self, p: &Point) -> Option<u32> {
        self.index.get(p).copied()
    }

    pub fn max_degree(&self) -> usize {
        self.adj.iter().map(|r| r.len()).max().unwrap_or(0)
    }

    /// Graph distance from every vertex to the nearest member of `targets`.
    pub fn distances_to(&self, targets: &[u32]) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.len()];
        let mut queue = VecDeque::new();
        for &t in targets {
            if dist[t as usize] != 0 {
                dist[t as usize] = 0;
                queue.push_back(t);
            }
        }
        while let Some(u) = queue.pop_front() {
            let du = dist[u as usize];
            for &v in &self.adj[u as usize] {
                if dist[v as usize] == u32::MAX {
                    dist[v as usize] = du + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EndSpec {
    Any,
    At(Point),
}

/// Conjunctive constraints selecting the walks in a walk sum.
#[derive(Clone, Debug)]
pub struct WalkConstraint {
    pub start: Point,
    pub end: EndSpec,
    /// Each set must be met by the range of the walk.
    pub must_hit: Vec<BTreeSet<Point>>,
    pub must_avoid: BTreeSet<Point>,
    pub no_return_to_start: bool,
    pub saw_only: bool,
    /// Only closed walks that are self-avoiding polygons.
    pub sap_only: bool,
    pub min_len: usize,
    pub max_len: usize,
}

impl WalkConstraint {
    pub fn from(start: Point, max_len: usize) -> Self {
        WalkConstraint {
            start,
            end: EndSpec::Any,
            must_hit: Vec::new(),
            must_avoid: BTreeSet::new(),
            no_return_to_start: false,
            saw_only: false,
            sap_only: false,
            min_len: 0,
            max_len,
        }
    }

    pub fn to(mut self, end: Point) -> Self {
        self.end = EndSpec::At(end);
        self
    }

    pub fn hitting(mut self, set: BTreeSet<Point>) -> Self {
        self.must_hit.push(set);
        self
    }

    pub fn avoiding(mut self, set: BTreeSet<Point>) -> Self {
        self.must_avoid.extend(set);
        self
    }

    pub fn saw(mut self) -> Self {
        self.saw_only = true;
        self
    }

    pub fn sap(mut self) -> Self {
        self.sap_only = true;
        self
    }

    pub fn no_return(mut self) -> Self {
        self.no_return_to_start = true;
        self
    }

    pub fn min_len(mut self, n: usize) -> Self {
        self.min_len = n;
        self
    }

    fn reach(&self) -> usize {
        self.max_len
    }
}

/// Accumulated weights: per endpoint, per length, either loop-count
/// histograms (constant activity) or exact loop factors (tabulated).
enum Acc {
    Counts(HashMap<u32, Vec<Vec<u64>>>),
    Weights(HashMap<u32, Vec<Q>>),
}

struct Dfs<'a> {
    g: &'a IndexedGraph,
    c: &'a WalkConstraint,
    act: &'a LoopActivity,
    ctx: &'a GraphCtx,
    start: u32,
    end: Option<u32>,
    end_dist: Option<Vec<u32>>,
    avoid: Vec<bool>,
    hit_mask: Vec<u64>,
    hit_dist: Vec<Vec<u32>>,
    hit_count: Vec<u32>,
    pos: Vec<i32>,
    stack: Vec<u32>,
    undo: Vec<u32>,
    loops: usize,
    factors: Vec<Q>,
    per_endpoint: bool,
    acc: Acc,
    max_len: usize,
}

impl<'a> Dfs<'a> {
    fn new(
        g: &'a IndexedGraph,
        c: &'a WalkConstraint,
        act: &'a LoopActivity,
        ctx: &'a GraphCtx,
        per_endpoint: bool,
    ) -> Result<Option<Self>> {
        let start = match g.index_of(&c.start) {
            Some(s) => s,
            None => return Err(LwwError::Domain(format!("{:?} is not in the graph", c.start))),
        };
        let end = match &c.end {
            EndSpec::Any => None,
            EndSpec::At(p) => match g.index_of(p) {
                Some(e) => Some(e),
                None => return Ok(None),
            },
        };
        let mut avoid = vec![false; g.len()];
        for p in &c.must_avoid {
            if let Some(i) = g.index_of(p) {
                avoid[i as usize] = true;
            }
        }
        if avoid[start as usize] {
            return Ok(None);
        }
        if c.must_hit.len() > 64 {
            return precondition("at most 64 hitting sets are supported");
        }
        let mut hit_mask = vec![0u64; g.len()];
        let mut hit_dist = Vec::new();
        for (k, set) in c.must_hit.iter().enumerate() {
            let members: Vec<u32> = set.iter().filter_map(|p| g.index_of(p)).collect();
            if members.is_empty() {
                return Ok(None);
            }
            for &m in &members {
                hit_mask[m as usize] |= 1 << k;
            }
            hit_dist.push(g.distances_to(&members));
        }
        let end_dist = end.map(|e| g.distances_to(&[e]));
        let acc = match act {
            LoopActivity::Constant(_) => Acc::Counts(HashMap::new()),
            LoopActivity::Table { .. } => Acc::Weights(HashMap::new()),
        };
        let mut dfs = Dfs {
            g,
            c,
            act,
            ctx,
            start,
            end,
            end_dist,
            avoid,
            hit_mask,
            hit_dist,
            hit_count: vec![0; c.must_hit.len()],
            pos: vec![-1; g.len()],
            stack: Vec::with_capacity(c.max_len + 1),
            undo: Vec::new(),
            loops: 0,
            factors: vec![Q::one()],
            per_endpoint,
            acc,
            max_len: c.max_len,
        };
        dfs.pos[start as usize] = 0;
        dfs.stack.push(start);
        dfs.mark_hits(start, 1);
        Ok(Some(dfs))
    }

    fn mark_hits(&mut self, v: u32, delta: i32) {
        let mut m = self.hit_mask[v as usize];
        while m != 0 {
            let k = m.trailing_zeros() as usize;
            if delta > 0 {
                self.hit_count[k] += 1;
            } else {
                self.hit_count[k] -= 1;
            }
            m &= m - 1;
        }
    }

    fn feasible(&self, cur: u32, n: usize) -> bool {
        let left = (self.max_len - n) as u32;
        if let Some(d) = &self.end_dist {
            if d[cur as usize] > left {
                return false;
            }
        }
        for (k, dist) in self.hit_dist.iter().enumerate() {
            if self.hit_count[k] == 0 && dist[cur as usize] > left {
                return false;
            }
        }
        true
    }

    fn accept(&mut self, cur: u32, n: usize, closed_sap: bool) {
        if n < self.c.min_len {
            return;
        }
        if let Some(e) = self.end {
            if cur != e {
                return;
            }
        }
        if self.hit_count.contains(&0) {
            return;
        }
        if self.c.sap_only && !closed_sap {
            return;
        }
        let key = if self.per_endpoint { cur } else { 0 };
        let max_len = self.max_len;
        match &mut self.acc {
            Acc::Counts(m) => {
                let row = m.entry(key).or_insert_with(|| vec![vec![0u64; max_len / 2 + 2]; max_len + 1]);
                row[n][self.loops] += 1;
            }
            Acc::Weights(m) => {
                let row = m.entry(key).or_insert_with(|| vec![Q::zero(); max_len + 1]);
                row[n] += self.factors.last().unwrap();
            }
        }
    }

    /// Runs only the subtree below the first step to `first`.
    fn run_from_first(&mut self, first: u32) {
        self.step(self.start, first, 0);
    }

    fn descend(&mut self, cur: u32, n: usize) {
        let g = self.g;
        for &v in &g.adj[cur as usize] {
            self.step(cur, v, n);
        }
    }

    fn step(&mut self, _cur: u32, v: u32, n: usize) {
        let vi = v as usize;
        if self.avoid[vi] {
            return;
        }
        if v == self.start && self.c.no_return_to_start {
            return;
        }
        let on_stack = self.pos[vi] >= 0;
        if on_stack && self.c.saw_only {
            return;
        }
        let mut closed_sap = false;
        if self.c.sap_only && on_stack {
            if v != self.start || n + 1 < 2 {
                return;
            }
            closed_sap = true;
        }
        let n1 = n + 1;
        // Apply the step to the loop-erasure stack.
        let popped = if on_stack {
            let i = self.pos[vi] as usize;
            if let LoopActivity::Table { .. } = self.act {
                let mut poly: Vec<Point> = self.stack[i..].iter().map(|&u| self.g.coords[u as usize].clone()).collect();
                poly.push(self.g.coords[vi].clone());
                let lam = self.act.activity_of(&SapKey::new(&Walk(poly), self.ctx));
                let f = self.factors.last().unwrap() * lam;
                self.factors.push(f);
            }
            let cnt = self.stack.len() - 1 - i;
            for u in self.stack.drain(i + 1..) {
                self.pos[u as usize] = -1;
                self.undo.push(u);
            }
            self.loops += 1;
            Some(cnt)
        } else {
            self.pos[vi] = self.stack.len() as i32;
            self.stack.push(v);
            None
        };
        self.mark_hits(v, 1);

        self.accept(v, n1, closed_sap);
        if n1 < self.max_len && !closed_sap && self.feasible(v, n1) {
            self.descend(v, n1);
        }

        self.mark_hits(v, -1);
        match popped {
            Some(cnt) => {
                let from = self.undo.len() - cnt;
                for k in from..self.undo.len() {
                    let u = self.undo[k];
                    self.pos[u as usize] = self.stack.len() as i32;
                    self.stack.push(u);
                }
                self.undo.truncate(from);
                self.loops -= 1;
                if let LoopActivity::Table { .. } = self.act {
                    self.factors.pop();
                }
            }
            None => {
                self.stack.pop();
                self.pos[vi] = -1;
            }
        }
    }
}

fn merge_acc(into: &mut Acc, from: Acc) {
    match (into, from) {
        (Acc::Counts(a), Acc::Counts(b)) => {
            for (k, rows) in b {
                match a.get_mut(&k) {
                    Some(r) => {
                        for (x, y) in r.iter_mut().zip(rows) {
                            for (p, q) in x.iter_mut().zip(y) {
                                *p += q;
                            }
                        }
                    }
                    None => {
                        a.insert(k, rows);
                    }
                }
            }
        }
        (Acc::Weights(a), Acc::Weights(b)) => {
            for (k, rows) in b {
                match a.get_mut(&k) {
                    Some(r) => {
                        for (x, y) in r.iter_mut().zip(rows) {
                            *x += y;
                        }
                    }
                    None => {
                        a.insert(k, rows);
                    }
                }
            }
        }
        _ => unreachable!("accumulators of one job share a kind"),
    }
}

/// Powers `1, lambda, lambda^2, ...` up to `k`.
pub fn lambda_powers(lambda: &Q, k: usize) -> Vec<Q> {
    let mut out = Vec::with_capacity(k + 1);
    let mut p = Q::one();
    for _ in 0..=k {
        out.push(p.clone());
        p *= lambda;
    }
    out
}

fn rows_to_series(rows: &[Vec<u64>], lambda_pows: &[Q], nmax: usize, divide_by_len: bool) -> ZSeries {
    let mut s = ZSeries::zero(nmax);
    for (n, row) in rows.iter().enumerate().take(nmax + 1) {
        let mut c = Q::zero();
        for (k, &cnt) in row.iter().enumerate() {
            if cnt != 0 {
                c += &lambda_pows[k] * q(cnt as i64);
            }
        }
        if divide_by_len && n > 0 {
            c /= q(n as i64);
        }
        s.set_coeff(n, c);
    }
    s
}

fn weights_to_series(w: &[Q], nmax: usize, divide_by_len: bool) -> ZSeries {
    let mut s = ZSeries::zero(nmax);
    for (n, c) in w.iter().enumerate().take(nmax + 1) {
        let mut c = c.clone();
        if divide_by_len && n > 0 {
            c /= q(n as i64);
        }
        s.set_coeff(n, c);
    }
    s
}

/// Runs one constrained enumeration and returns the weights grouped by
/// endpoint (a single group keyed by the start when `per_endpoint` is off).
pub(crate) fn enumerate_grouped(
    ctx: &GraphCtx,
    c: &WalkConstraint,
    act: &LoopActivity,
    nmax: usize,
    budget: Budget,
    per_endpoint: bool,
    divide_by_len: bool,
) -> Result<Vec<(Point, ZSeries)>> {
    let mut c = c.clone();
    c.max_len = c.max_len.min(nmax);
    let g = IndexedGraph::new(ctx, &c.start, c.reach());
    budget.check(tree_size(g.max_degree(), c.max_len), "walk enumeration")?;
    let Some(mut root) = Dfs::new(&g, &c, act, ctx, per_endpoint)? else {
        return Ok(Vec::new());
    };
    root.accept(root.start, 0, false);
    let firsts: Vec<u32> =
        if c.max_len > 0 && root.feasible(root.start, 0) { g.adj[root.start as usize].clone() } else { Vec::new() };
    let parts: Vec<Acc> = firsts
        .par_iter()
        .map(|&v| {
            let mut d = Dfs::new(&g, &c, act, ctx, per_endpoint).unwrap().unwrap();
            d.run_from_first(v);
            d.acc
        })
        .collect();
    let mut acc = std::mem::replace(&mut root.acc, Acc::Counts(HashMap::new()));
    for p in parts {
        merge_acc(&mut acc, p);
    }
    let mut out = Vec::new();
    match acc {
        Acc::Counts(m) => {
            let lambda = act.as_constant().expect("constant activity");
            let pows = lambda_powers(lambda, c.max_len / 2 + 1);
            for (k, rows) in m {
                out.push((g.coords[k as usize].clone(), rows_to_series(&rows, &pows, nmax, divide_by_len)));
            }
        }
        Acc::Weights(m) => {
            for (k, w) in m {
                out.push((g.coords[k as usize].clone(), weights_to_series(&w, nmax, divide_by_len)));
            }
        }
    }
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Sum of `z^|w|` times the loop factor over all walks satisfying `c`.
pub fn walk_sum(ctx: &GraphCtx, c: &WalkConstraint, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<ZSeries> {
    let parts = enumerate_grouped(ctx, c, act, nmax, budget, false, false)?;
    Ok(parts.into_iter().next().map(|(_, s)| s).unwrap_or_else(|| ZSeries::zero(nmax)))
}

/// Like [`walk_sum`] but resolved by the endpoint of the walk.
pub fn walk_sum_by_endpoint(
    ctx: &GraphCtx,
    c: &WalkConstraint,
    act: &LoopActivity,
    nmax: usize,
    budget: Budget,
) -> Result<SpatialSeries> {
    let parts = enumerate_grouped(ctx, c, act, nmax, budget, true, false)?;
    let mut out = SpatialSeries::new(nmax);
    for (p, s) in parts {
        out.insert(p, s);
    }
    Ok(out)
}

/// Walk sum with each walk weighted by `1/|w|` (the zero-step walk is
/// dropped).
pub fn walk_sum_per_length(
    ctx: &GraphCtx,
    c: &WalkConstraint,
    act: &LoopActivity,
    nmax: usize,
    budget: Budget,
) -> Result<ZSeries> {
    let mut c = c.clone();
    c.min_len = c.min_len.max(1);
    let parts = enumerate_grouped(ctx, &c, act, nmax, budget, false, true)?;
    Ok(parts.into_iter().next().map(|(_, s)| s).unwrap_or_else(|| ZSeries::zero(nmax)))
}

/// Calls `f` on every walk of length at most `max_len` from `start`, in
/// depth-first order. Intended for small exhaustive checks.
pub fn for_each_walk(ctx: &GraphCtx, start: &Point, max_len: usize, mut f: impl FnMut(&Walk)) -> Result<()> {
    let g = IndexedGraph::new(ctx, start, max_len);
    let s = g.index_of(start).ok_or_else(|| LwwError::Domain(format!("{start:?} is not in the graph")))?;
    let mut path = vec![s];
    fn rec(g: &IndexedGraph, path: &mut Vec<u32>, max_len: usize, f: &mut dyn FnMut(&Walk)) {
        let w = Walk(path.iter().map(|&i| g.coords[i as usize].clone()).collect());
        f(&w);
        if path.len() - 1 == max_len {
            return;
        }
        let cur = *path.last().unwrap();
        for &v in &g.adj[cur as usize] {
            path.push(v);
            rec(g, path, max_len, f);
            path.pop();
        }
    }
    rec(&g, &mut path, max_len, &mut f);
    Ok(())
}
