//! Loop measures, renormalized activities and interaction two-point
//! functions.

use std::collections::{BTreeSet, HashMap, HashSet};

use crate::error::{precondition, Result};
use crate::series::{q, ZSeries};
use crate::walk::{GraphCtx, LoopActivity, Point, Walk};

use super::engine::{walk_sum_per_length, Budget, IndexedGraph, WalkConstraint};

/// Closed walks grouped by range, each group carrying the series of
/// `w(X)/|X|` summed over its members.
///
/// On the lattice the catalogue stores walks rooted at the origin and every
/// closed walk of the lattice is one of their translates. On a finite graph
/// it stores the closed walks rooted at every vertex.
#[derive(Clone, Debug)]
pub struct LoopCatalogue {
    pub nmax: usize,
    translate: bool,
    /// `(range, min length, weight series)`.
    entries: Vec<(Vec<Point>, usize, ZSeries)>,
}

impl LoopCatalogue {
    pub fn build(ctx: &GraphCtx, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<Self> {
        match ctx {
            GraphCtx::Lattice(d) => {
                let entries = closed_walks_by_range(ctx, &Point::origin(*d), act, nmax, budget)?;
                Ok(LoopCatalogue { nmax, translate: true, entries })
            }
            GraphCtx::Finite(g) => {
                let mut merged: HashMap<Vec<Point>, (usize, ZSeries)> = HashMap::new();
                for root in g.vertices() {
                    for (r, m, s) in closed_walks_by_range(ctx, root, act, nmax, budget)? {
                        let e = merged.entry(r).or_insert_with(|| (m, ZSeries::zero(nmax)));
                        e.0 = e.0.min(m);
                        e.1.add_assign(&s);
                    }
                }
                let mut entries: Vec<_> = merged.into_iter().map(|(r, (m, s))| (r, m, s)).collect();
                entries.sort_by(|a, b| a.0.cmp(&b.0));
                Ok(LoopCatalogue { nmax, translate: false, entries })
            }
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Calls `f(range, weight)` on every placed closed-walk class whose
    /// range meets `anchor`, with walks no longer than `max_len`.
    pub fn for_each_meeting(&self, anchor: &BTreeSet<Point>, max_len: usize, mut f: impl FnMut(&[Point], &ZSeries)) {
        for (range, min_len, w) in &self.entries {
            if *min_len > max_len {
                continue;
            }
            if self.translate {
                let mut shifts: HashSet<Point> = HashSet::new();
                for a in anchor {
                    for r in range {
                        shifts.insert(a.sub(r));
                    }
                }
                let mut placed: Vec<Point> = Vec::with_capacity(range.len());
                for t in shifts {
                    placed.clear();
                    placed.extend(range.iter().map(|r| r.add(&t)));
                    f(&placed, w);
                }
            } else if range.iter().any(|r| anchor.contains(r)) {
                f(range, w);
            }
        }
    }

    /// Generalized loop measure: closed walks meeting every set in `hit`
    /// and avoiding `avoid`.
    pub fn measure(&self, hit: &[&BTreeSet<Point>], avoid: &BTreeSet<Point>) -> ZSeries {
        let mut acc = ZSeries::zero(self.nmax);
        let Some(first) = hit.first() else {
            return acc;
        };
        if first.is_empty() {
            return acc;
        }
        self.for_each_meeting(first, self.nmax, |placed, w| {
            if placed.iter().any(|p| avoid.contains(p)) {
                return;
            }
            if hit[1..].iter().all(|h| placed.iter().any(|p| h.contains(p))) {
                acc.add_assign(w);
            }
        });
        acc
    }
}

/// Closed walks from `root` of length `1..=nmax`, grouped by range, with
/// the loop factor divided by the length.
fn closed_walks_by_range(
    ctx: &GraphCtx,
    root: &Point,
    act: &LoopActivity,
    nmax: usize,
    budget: Budget,
) -> Result<Vec<(Vec<Point>, usize, ZSeries)>> {
    let g = IndexedGraph::new(ctx, root, nmax);
    budget.check(super::engine::tree_size(g.max_degree(), nmax), "closed-walk catalogue")?;
    let s = g.index_of(root).expect("root in graph");
    let mut groups: HashMap<Vec<u32>, (usize, ZSeries)> = HashMap::new();
    let mut path = vec![s];
    rec(&g, &mut path, nmax, &mut |path| {
        let n = path.len() - 1;
        let mut range: Vec<u32> = path.to_vec();
        range.sort_unstable();
        range.dedup();
        let w = Walk(path.iter().map(|&i| g.coords[i as usize].clone()).collect());
        let factor = crate::walk::walk_weight(&w, act, ctx).1 / q(n as i64);
        let e = groups.entry(range).or_insert_with(|| (n, ZSeries::zero(nmax)));
        e.0 = e.0.min(n);
        e.1.add_to_coeff(n, &factor);
    });
    fn rec(g: &IndexedGraph, path: &mut Vec<u32>, nmax: usize, f: &mut dyn FnMut(&[u32])) {
        let n = path.len() - 1;
        let cur = *path.last().unwrap();
        let root = path[0];
        for &v in &g.adj[cur as usize] {
            // A closed walk of length n ends at the root, so the remaining
            // budget must allow the return.
            let back = if g.lattice { g.coords[v as usize].sub(&g.coords[root as usize]).l1() as usize } else { 0 };
            if n + 1 + back > nmax {
                continue;
            }
            path.push(v);
            if v == root {
                f(path);
            }
            if n + 1 < nmax {
                rec(g, path, nmax, f);
            }
            path.pop();
        }
    }
    let mut out: Vec<_> = groups
        .into_iter()
        .map(|(r, (m, s))| (r.iter().map(|&i| g.coords[i as usize].clone()).collect::<Vec<_>>(), m, s))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}

/// Loop measure `mu(A; B)` from the closed-walk catalogue.
pub fn loop_measure(cat: &LoopCatalogue, a: &BTreeSet<Point>, b: &BTreeSet<Point>) -> ZSeries {
    cat.measure(&[a], b)
}

/// `mu(A, B; C)`: closed walks meeting both `A` and `B`, avoiding `C`.
pub fn generalized_loop_measure(
    cat: &LoopCatalogue,
    a: &BTreeSet<Point>,
    b: &BTreeSet<Point>,
    c: &BTreeSet<Point>,
) -> ZSeries {
    cat.measure(&[a, b], c)
}

/// Loop measure computed by rooting closed walks at every point within
/// reach of `A` and enumerating them directly. Independent of the
/// catalogue; used to cross-check it.
pub fn loop_measure_direct(
    ctx: &GraphCtx,
    hit: &[BTreeSet<Point>],
    avoid: &BTreeSet<Point>,
    act: &LoopActivity,
    nmax: usize,
    budget: Budget,
) -> Result<ZSeries> {
    let mut acc = ZSeries::zero(nmax);
    let Some(first) = hit.first() else {
        return Ok(acc);
    };
    let roots: BTreeSet<Point> = match ctx {
        GraphCtx::Lattice(_) => {
            let r = (nmax / 2) as i64;
            let mut roots = BTreeSet::new();
            for a in first {
                for p in ball(a, r) {
                    roots.insert(p);
                }
            }
            roots
        }
        GraphCtx::Finite(g) => g.vertices().iter().cloned().collect(),
    };
    for root in roots {
        let mut c = WalkConstraint::from(root.clone(), nmax).to(root.clone()).avoiding(avoid.clone());
        for h in hit {
            c = c.hitting(h.clone());
        }
        acc.add_assign(&walk_sum_per_length(ctx, &c, act, nmax, budget)?);
    }
    Ok(acc)
}

/// Lattice points within L1 distance `r` of `center`.
pub fn ball(center: &Point, r: i64) -> Vec<Point> {
    let d = center.dim();
    let mut out = Vec::new();
    let mut cur = vec![0i32; d];
    fn rec(k: usize, left: i64, cur: &mut Vec<i32>, center: &Point, out: &mut Vec<Point>) {
        if k == cur.len() {
            out.push(Point(cur.iter().zip(&center.0).map(|(a, b)| a + b).collect()));
            return;
        }
        for x in -left..=left {
            cur[k] = x as i32;
            rec(k + 1, left - x.abs(), cur, center, out);
        }
        cur[k] = 0;
    }
    rec(0, r, &mut cur, center, &mut out);
    out
}

pub fn singleton(p: &Point) -> BTreeSet<Point> {
    std::iter::once(p.clone()).collect()
}

/// The neighbour used to define `alpha`: the lexicographically first one.
pub fn reference_neighbor(ctx: &GraphCtx, origin: &Point) -> Result<Point> {
    let nb = ctx.neighbors(origin)?;
    match nb.into_iter().next() {
        Some(p) => Ok(p),
        None => precondition("the base vertex has no neighbours"),
    }
}

/// `alpha_0 = exp(mu({0}; {}))`.
pub fn alpha0(cat: &LoopCatalogue, origin: &Point) -> ZSeries {
    loop_measure(cat, &singleton(origin), &BTreeSet::new()).exp().expect("loop measures start at z^2")
}

/// `alpha = exp(mu({0}; {y}))` for a neighbour `y` of the origin.
pub fn alpha(cat: &LoopCatalogue, origin: &Point, y: &Point) -> ZSeries {
    loop_measure(cat, &singleton(origin), &singleton(y)).exp().expect("loop measures start at z^2")
}

/// `I(x, y) = 1{x = y} + 1{x != y} (1 - exp(-mu(x, y; {})))`.
pub fn interaction_two_point(cat: &LoopCatalogue, x: &Point, y: &Point) -> ZSeries {
    if x == y {
        return ZSeries::one(cat.nmax);
    }
    let mu = generalized_loop_measure(cat, &singleton(x), &singleton(y), &BTreeSet::new());
    ZSeries::one(cat.nmax).sub(&mu.neg().exp().expect("zero constant term"))
}

/// `I^w(a, b)`: like the interaction two-point function of `w_a, w_b`, with
/// closed walks forbidden to touch the walk strictly between times `a` and `b`.
pub fn i_omega(cat: &LoopCatalogue, w: &Walk, a: usize, b: usize) -> Result<ZSeries> {
    if a >= b || b > w.len() {
        return precondition(format!("need 0 <= a < b <= |w|, got a={a}, b={b}, |w|={}", w.len()));
    }
    let (x, y) = (&w.0[a], &w.0[b]);
    if x == y {
        return Ok(ZSeries::one(cat.nmax));
    }
    let interior: BTreeSet<Point> = w.0[a + 1..b].iter().cloned().collect();
    let mu = generalized_loop_measure(cat, &singleton(x), &singleton(y), &interior);
    Ok(ZSeries::one(cat.nmax).sub(&mu.neg().exp()?))
}

/// `exp(mu(range))` for a set of points.
pub fn range_factor(cat: &LoopCatalogue, range: &BTreeSet<Point>) -> ZSeries {
    loop_measure(cat, range, &BTreeSet::new()).exp().expect("zero constant term")
}

/// Closed-walk sum at `x` over walks of length at least one, weighted by
/// the loop factor (not divided by the length).
pub fn closed_walk_sum(ctx: &GraphCtx, x: &Point, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<ZSeries> {
    let c = WalkConstraint::from(x.clone(), nmax).to(x.clone()).min_len(1);
    super::engine::walk_sum(ctx, &c, act, nmax, budget)
}
