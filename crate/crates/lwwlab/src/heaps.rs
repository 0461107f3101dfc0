//! Heaps of oriented cycles and the bijection between walks and legal
//! pairs (self-avoiding walk, heap).

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use num_traits::One;

use crate::error::{precondition, LwwError, Result};
use crate::series::{ZSeries, Q};
use crate::walk::{FiniteGraph, GraphCtx, LoopActivity, Point, SapKey, Walk};

/// An oriented cycle, stored as its cyclic vertex sequence rotated to start
/// at the smallest vertex. A trivial cycle (a single edge) has no
/// orientation and is stored as `[min, max]`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrientedCycle {
    verts: Vec<Point>,
}

impl fmt::Debug for OrientedCycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{:?}", self.verts)
    }
}

impl OrientedCycle {
    /// The cycle traced by a closed self-avoiding walk `(c_0, ..., c_k = c_0)`
    /// with `k >= 2`.
    pub fn from_polygon(polygon: &Walk) -> Result<Self> {
        let v = &polygon.0;
        if v.len() < 3 || v.first() != v.last() {
            return precondition("a cycle needs a closed walk of length at least 2");
        }
        let body = &v[..v.len() - 1];
        let distinct: HashSet<&Point> = body.iter().collect();
        if distinct.len() != body.len() {
            return precondition("a cycle must be self-avoiding apart from its endpoints");
        }
        Ok(Self::from_cyclic(body.to_vec()))
    }

    fn from_cyclic(mut body: Vec<Point>) -> Self {
        if body.len() == 2 {
            body.sort();
            return OrientedCycle { verts: body };
        }
        let k = body.iter().enumerate().min_by(|a, b| a.1.cmp(b.1)).map(|(i, _)| i).unwrap();
        body.rotate_left(k);
        OrientedCycle { verts: body }
    }

    pub fn trivial(u: Point, v: Point) -> Self {
        Self::from_cyclic(vec![u, v])
    }

    /// Number of edges, which is also the number of vertices.
    pub fn len(&self) -> usize {
        self.verts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verts.is_empty()
    }

    pub fn is_trivial(&self) -> bool {
        self.verts.len() == 2
    }

    pub fn vertices(&self) -> &[Point] {
        &self.verts
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.verts.contains(p)
    }

    /// Concurrency: the two cycles share a vertex.
    pub fn meets(&self, other: &OrientedCycle) -> bool {
        self.verts.iter().any(|p| other.contains(p))
    }

    /// The closed walk representing the cycle that starts and ends at `p`.
    pub fn rooted_at(&self, p: &Point) -> Option<Walk> {
        let i = self.verts.iter().position(|v| v == p)?;
        let mut w: Vec<Point> = self.verts[i..].iter().chain(&self.verts[..i]).cloned().collect();
        w.push(p.clone());
        Some(Walk(w))
    }

    /// The same cycle traversed the other way round.
    pub fn reversed(&self) -> Self {
        let mut v = self.verts.clone();
        v.reverse();
        Self::from_cyclic(v)
    }

    /// Directed edges of the cycle. A trivial cycle contributes both
    /// directions of its edge.
    pub fn directed_edges(&self) -> Vec<(Point, Point)> {
        let n = self.verts.len();
        (0..n).map(|i| (self.verts[i].clone(), self.verts[(i + 1) % n].clone())).collect()
    }

    /// Loop activity of the cycle.
    pub fn activity(&self, act: &LoopActivity, ctx: &GraphCtx) -> Q {
        match act {
            LoopActivity::Constant(l) => l.clone(),
            LoopActivity::Table { .. } => act.activity_of(&SapKey::new(&self.rooted_at(&self.verts[0]).unwrap(), ctx)),
        }
    }

    /// `z^len lambda_C` as a truncated series.
    pub fn weight(&self, act: &LoopActivity, ctx: &GraphCtx, nmax: usize) -> ZSeries {
        ZSeries::monomial(nmax, self.len(), self.activity(act, ctx))
    }
}

/// A heap of oriented cycles in Cartier-Foata form: each piece carries its
/// level, one more than the highest concurrent piece below it, and the
/// pieces are kept sorted by (level, cycle).
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CycleHeap {
    pieces: Vec<(usize, OrientedCycle)>,
}

impl CycleHeap {
    pub fn empty() -> Self {
        CycleHeap::default()
    }

    pub fn pieces(&self) -> &[(usize, OrientedCycle)] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    /// Total length of the labels.
    pub fn size(&self) -> usize {
        self.pieces.iter().map(|(_, c)| c.len()).sum()
    }

    /// Drops `c` on top of the heap.
    pub fn compose(&self, c: &OrientedCycle) -> CycleHeap {
        let level = self.pieces.iter().filter(|(_, p)| p.meets(c)).map(|(l, _)| l + 1).max().unwrap_or(0);
        let mut pieces = self.pieces.clone();
        let at = pieces.partition_point(|p| (p.0, &p.1) <= (level, c));
        pieces.insert(at, (level, c.clone()));
        CycleHeap { pieces }
    }

    /// Indices of the maximal pieces: those with no concurrent piece above.
    pub fn maximal(&self) -> Vec<usize> {
        (0..self.pieces.len())
            .filter(|&i| {
                let (l, c) = &self.pieces[i];
                !self.pieces.iter().any(|(m, d)| m > l && d.meets(c))
            })
            .collect()
    }

    /// Removes the piece at `index`, which must be maximal.
    pub fn remove_maximal(&self, index: usize) -> Result<CycleHeap> {
        if !self.maximal().contains(&index) {
            return precondition("only a maximal piece can be removed");
        }
        let mut pieces = self.pieces.clone();
        pieces.remove(index);
        Ok(CycleHeap { pieces })
    }

    /// The multiset of labels.
    pub fn labels(&self) -> HashMap<OrientedCycle, usize> {
        let mut m = HashMap::new();
        for (_, c) in &self.pieces {
            *m.entry(c.clone()).or_insert(0) += 1;
        }
        m
    }

    pub fn weight(&self, act: &LoopActivity, ctx: &GraphCtx, nmax: usize) -> ZSeries {
        let mut zpow = 0;
        let mut factor = Q::one();
        for (_, c) in &self.pieces {
            zpow += c.len();
            factor *= c.activity(act, ctx);
        }
        ZSeries::monomial(nmax, zpow, factor)
    }
}

/// A self-avoiding walk with a heap whose maximal pieces all touch it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LegalPair {
    pub eta: Walk,
    pub heap: CycleHeap,
}

impl LegalPair {
    pub fn new(eta: Walk, heap: CycleHeap) -> Result<Self> {
        let pair = LegalPair { eta, heap };
        if !pair.is_legal() {
            return precondition("every maximal piece must share a vertex with the walk, which must be self-avoiding");
        }
        Ok(pair)
    }

    pub fn is_legal(&self) -> bool {
        self.eta.is_self_avoiding()
            && self.heap.maximal().iter().all(|&i| self.eta.0.iter().any(|p| self.heap.pieces[i].1.contains(p)))
    }

    pub fn size(&self) -> usize {
        self.eta.len() + self.heap.size()
    }
}

/// Inserts `c` at the first vertex of `w` that lies on it.
pub fn loop_insert(w: &Walk, c: &OrientedCycle) -> Result<Walk> {
    let Some(i) = w.0.iter().position(|p| c.contains(p)) else {
        return precondition("the cycle does not meet the walk");
    };
    let rep = c.rooted_at(&w.0[i]).expect("vertex lies on the cycle");
    let mut v = w.0[..i].to_vec();
    v.extend(rep.0);
    v.extend_from_slice(&w.0[i + 1..]);
    Ok(Walk(v))
}

/// Index of the cycle whose first hitting time by `w` is largest. The
/// cycles must be pairwise disjoint and each must meet `w`.
pub fn walk_order_max(w: &Walk, cycles: &[OrientedCycle]) -> Result<usize> {
    if cycles.is_empty() {
        return precondition("no cycles to order");
    }
    for (i, a) in cycles.iter().enumerate() {
        for b in &cycles[i + 1..] {
            if a.meets(b) {
                return precondition("the cycles must be pairwise disjoint");
            }
        }
    }
    let mut best = None;
    for (j, c) in cycles.iter().enumerate() {
        let Some(t) = w.0.iter().position(|p| c.contains(p)) else {
            return precondition("every cycle must meet the walk");
        };
        if best.is_none_or(|(bt, _)| t > bt) {
            best = Some((t, j));
        }
    }
    Ok(best.unwrap().1)
}

/// Builds the walk of a legal pair by inserting the maximal pieces one at a
/// time, always the one that is largest in the walk order.
pub fn loop_addition(pair: &LegalPair) -> Result<Walk> {
    if !pair.is_legal() {
        return precondition("loop addition needs a legal pair");
    }
    let mut w = pair.eta.clone();
    let mut heap = pair.heap.clone();
    while !heap.is_empty() {
        let max = heap.maximal();
        let labels: Vec<OrientedCycle> = max.iter().map(|&i| heap.pieces[i].1.clone()).collect();
        let j = walk_order_max(&w, &labels)?;
        w = loop_insert(&w, &labels[j])?;
        heap = heap.remove_maximal(max[j])?;
    }
    Ok(w)
}

/// Repeated single loop erasure, dropping each erased cycle on top of the
/// heap.
pub fn loop_erasure_to_pair(w: &Walk) -> LegalPair {
    let mut cur = w.clone();
    let mut heap = CycleHeap::empty();
    loop {
        let (next, removed) = cur.single_loop_erase();
        match removed {
            Some(poly) => {
                heap = heap.compose(&OrientedCycle::from_polygon(&poly).expect("erased loops are polygons"));
                cur = next;
            }
            None => return LegalPair { eta: cur, heap },
        }
    }
}

/// Multiset of directed edges of a walk.
pub fn directed_edge_multiset(w: &Walk) -> HashMap<(Point, Point), usize> {
    let mut m = HashMap::new();
    for e in w.0.windows(2) {
        *m.entry((e[0].clone(), e[1].clone())).or_insert(0) += 1;
    }
    m
}

/// Multiset of directed edges of a legal pair.
pub fn pair_edge_multiset(pair: &LegalPair) -> HashMap<(Point, Point), usize> {
    let mut m = directed_edge_multiset(&pair.eta);
    for (_, c) in pair.heap.pieces() {
        for e in c.directed_edges() {
            *m.entry(e).or_insert(0) += 1;
        }
    }
    m
}

/// Multiset of the cycles erased from `w` by chronological loop erasure.
pub fn erased_cycle_multiset(w: &Walk) -> HashMap<OrientedCycle, usize> {
    let mut m = HashMap::new();
    for poly in w.loop_erase_raw().1 {
        *m.entry(OrientedCycle::from_polygon(&poly).expect("erased loops are polygons")).or_insert(0) += 1;
    }
    m
}

fn finite<'a>(ctx: &'a GraphCtx, what: &str) -> Result<&'a FiniteGraph> {
    match ctx {
        GraphCtx::Finite(g) => Ok(g),
        GraphCtx::Lattice(_) => Err(LwwError::Domain(format!("{what} is only defined on a finite graph"))),
    }
}

/// All oriented cycles of a finite graph with at most `max_len` edges.
/// Every cyclic subgraph appears once per orientation, every edge once.
pub fn oriented_cycles(g: &FiniteGraph, max_len: usize) -> Vec<OrientedCycle> {
    let mut out = BTreeSet::new();
    if max_len >= 2 {
        for (a, b) in g.edge_list() {
            out.insert(OrientedCycle::trivial(g.vertices()[a].clone(), g.vertices()[b].clone()));
        }
    }
    let adj = g.adjacency();
    let n = g.vertices().len();
    // Cycles of length >= 3 rooted at their smallest vertex index.
    for root in 0..n {
        let mut path = vec![root];
        let mut on = vec![false; n];
        on[root] = true;
        fn rec(
            g: &FiniteGraph,
            adj: &[Vec<usize>],
            root: usize,
            path: &mut Vec<usize>,
            on: &mut [bool],
            max_len: usize,
            out: &mut BTreeSet<OrientedCycle>,
        ) {
            let cur = *path.last().unwrap();
            for &v in &adj[cur] {
                if v == root && path.len() >= 3 {
                    out.insert(OrientedCycle::from_cyclic(path.iter().map(|&i| g.vertices()[i].clone()).collect()));
                }
                if v <= root || on[v] || path.len() >= max_len {
                    continue;
                }
                on[v] = true;
                path.push(v);
                rec(g, adj, root, path, on, max_len, out);
                path.pop();
                on[v] = false;
            }
        }
        rec(g, adj, root, &mut path, &mut on, max_len, &mut out);
    }
    out.into_iter().collect()
}

/// `sum_T (-1)^|T| w(T)` over trivial heaps, i.e. sets of pairwise
/// disjoint oriented cycles that avoid `forbidden`.
pub fn trivial_heap_sum(forbidden: &BTreeSet<Point>, ctx: &GraphCtx, act: &LoopActivity, nmax: usize) -> Result<ZSeries> {
    let g = finite(ctx, "the trivial-heap sum")?;
    let cycles: Vec<(OrientedCycle, Q)> = oriented_cycles(g, nmax)
        .into_iter()
        .filter(|c| !c.vertices().iter().any(|p| forbidden.contains(p)))
        .map(|c| {
            let a = c.activity(act, ctx);
            (c, a)
        })
        .collect();
    let mut out = ZSeries::zero(nmax);
    let mut used: HashSet<Point> = HashSet::new();
    fn rec(
        cycles: &[(OrientedCycle, Q)],
        from: usize,
        size: usize,
        sign_weight: Q,
        used: &mut HashSet<Point>,
        nmax: usize,
        out: &mut ZSeries,
    ) {
        out.add_to_coeff(size, &sign_weight);
        for i in from..cycles.len() {
            let (c, a) = &cycles[i];
            if size + c.len() > nmax || c.vertices().iter().any(|p| used.contains(p)) {
                continue;
            }
            for p in c.vertices() {
                used.insert(p.clone());
            }
            rec(cycles, i + 1, size + c.len(), -(&sign_weight * a), used, nmax, out);
            for p in c.vertices() {
                used.remove(p);
            }
        }
    }
    rec(&cycles, 0, 0, Q::one(), &mut used, nmax, &mut out);
    Ok(out)
}

/// Unoriented version of [`trivial_heap_sum`]: each cyclic subgraph of
/// length at least 3 appears once with activity `2 lambda`, each edge once
/// with activity `lambda`.
pub fn unoriented_cycle_sum(forbidden: &BTreeSet<Point>, ctx: &GraphCtx, act: &LoopActivity, nmax: usize) -> Result<ZSeries> {
    let g = finite(ctx, "the cycle-gas sum")?;
    let two = Q::from_integer(2.into());
    let mut cycles: Vec<(OrientedCycle, Q)> = Vec::new();
    for c in oriented_cycles(g, nmax) {
        if c.vertices().iter().any(|p| forbidden.contains(p)) {
            continue;
        }
        if c.is_trivial() {
            let a = c.activity(act, ctx);
            cycles.push((c, a));
        } else if c < c.reversed() {
            let a = c.activity(act, ctx) * &two;
            cycles.push((c, a));
        }
    }
    let mut out = ZSeries::zero(nmax);
    let mut stack: Vec<(usize, usize, Q, Vec<bool>)> = vec![(0, 0, Q::one(), vec![false; cycles.len()])];
    // Iterative subset enumeration over pairwise disjoint cycles.
    while let Some((from, size, w, blocked)) = stack.pop() {
        out.add_to_coeff(size, &w);
        for i in from..cycles.len() {
            let (c, a) = &cycles[i];
            if blocked[i] || size + c.len() > nmax {
                continue;
            }
            let mut b2 = blocked.clone();
            for (j, (d, _)) in cycles.iter().enumerate().skip(i + 1) {
                if d.meets(c) {
                    b2[j] = true;
                }
            }
            stack.push((i + 1, size + c.len(), -(&w * a), b2));
        }
    }
    Ok(out)
}

/// How cycles are counted in the cycle-gas ratio.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CycleBookkeeping {
    Oriented,
    Unoriented,
}

/// The two-point function as a ratio of cycle-gas partition functions:
/// self-avoiding walks `origin -> x` with the signed disjoint cycles that
/// avoid them, over the cycle sum with nothing removed.
pub fn cycle_gas_two_point(
    origin: &Point,
    x: &Point,
    ctx: &GraphCtx,
    act: &LoopActivity,
    nmax: usize,
    bookkeeping: CycleBookkeeping,
) -> Result<ZSeries> {
    let g = finite(ctx, "the cycle-gas two-point function")?;
    if g.index_of(origin).is_none() || g.index_of(x).is_none() {
        return Err(LwwError::Domain("endpoints must be vertices of the graph".into()));
    }
    let sum = |forb: &BTreeSet<Point>| match bookkeeping {
        CycleBookkeeping::Oriented => trivial_heap_sum(forb, ctx, act, nmax),
        CycleBookkeeping::Unoriented => unoriented_cycle_sum(forb, ctx, act, nmax),
    };
    let mut num = ZSeries::zero(nmax);
    for eta in crate::enumerate::self_avoiding_walks(ctx, origin, nmax) {
        if eta.last() != Some(x) {
            continue;
        }
        let m = eta.len() - 1;
        let range: BTreeSet<Point> = eta.iter().cloned().collect();
        num.add_assign(&sum(&range)?.shift(m));
    }
    Ok(num.mul(&sum(&BTreeSet::new())?.reciprocal()?))
}

/// Every heap whose labels are drawn from `cycles` with total label length
/// at most `max_size`, each listed once.
pub fn all_heaps(cycles: &[OrientedCycle], max_size: usize) -> Vec<CycleHeap> {
    let mut seen: HashSet<CycleHeap> = HashSet::new();
    let mut frontier = vec![CycleHeap::empty()];
    seen.insert(CycleHeap::empty());
    while let Some(h) = frontier.pop() {
        for c in cycles {
            if h.size() + c.len() > max_size {
                continue;
            }
            let h2 = h.compose(c);
            if seen.insert(h2.clone()) {
                frontier.push(h2);
            }
        }
    }
    let mut out: Vec<CycleHeap> = seen.into_iter().collect();
    out.sort();
    out
}

/// `sum_H w(H)` over all heaps of cycles of the graph, to order `nmax`.
pub fn heap_sum(ctx: &GraphCtx, act: &LoopActivity, nmax: usize) -> Result<ZSeries> {
    let g = finite(ctx, "the heap sum")?;
    let cycles = oriented_cycles(g, nmax);
    let mut out = ZSeries::zero(nmax);
    for h in all_heaps(&cycles, nmax) {
        out.add_assign(&h.weight(act, ctx, nmax));
    }
    Ok(out)
}

/// Every legal pair on a finite graph with total size at most `max_size`.
pub fn legal_pairs(g: &FiniteGraph, max_size: usize) -> Vec<LegalPair> {
    let ctx = GraphCtx::Finite(g.clone());
    let heaps = all_heaps(&oriented_cycles(g, max_size), max_size);
    let mut out = Vec::new();
    for a in g.vertices() {
        for eta in crate::enumerate::self_avoiding_walks(&ctx, a, max_size) {
            let eta = Walk(eta);
            for h in &heaps {
                if eta.len() + h.size() > max_size {
                    continue;
                }
                let pair = LegalPair { eta: eta.clone(), heap: h.clone() };
                if pair.is_legal() {
                    out.push(pair);
                }
            }
        }
    }
    out
}
