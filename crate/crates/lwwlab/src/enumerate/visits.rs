//! Visit counts of closed walks and the bubble-chain decompositions.
//!
//! The decomposition side of each identity is enumerated segment by
//! segment, with the segment conditions imposed directly, so that it is
//! an independent computation from the whole-walk side.

use std::collections::HashMap;

use num_traits::{One, Zero};

use crate::error::{LwwError, Result};
use crate::series::{SpatialSeries, ZSeries, Q};
use crate::walk::{GraphCtx, LoopActivity, Point, SapKey, Walk};

use super::engine::{tree_size, Budget, IndexedGraph};

/// Enumerates walks on an indexed graph, tracking the chronological loop
/// erasure so each walk arrives with its loop factor.
pub(crate) struct Walker<'a> {
    g: &'a IndexedGraph,
    ctx: &'a GraphCtx,
    act: &'a LoopActivity,
}

struct WalkState {
    path: Vec<u32>,
    pos: Vec<i32>,
    stack: Vec<u32>,
    undo: Vec<u32>,
    factors: Vec<Q>,
}

impl<'a> Walker<'a> {
    pub(crate) fn new(g: &'a IndexedGraph, ctx: &'a GraphCtx, act: &'a LoopActivity) -> Self {
        Walker { g, ctx, act }
    }

    /// Calls `f(path, factor)` for every walk from `start` of length at
    /// most `max_len` whose vertices after the start avoid `avoid`.
    /// When `end_dist` is given, branches that cannot reach distance zero
    /// in the remaining steps are cut.
    pub(crate) fn run(
        &self,
        start: u32,
        max_len: usize,
        avoid: &[bool],
        end_dist: Option<&[u32]>,
        f: &mut dyn FnMut(&[u32], &Q),
    ) {
        let mut st = WalkState {
            path: vec![start],
            pos: vec![-1; self.g.len()],
            stack: vec![start],
            undo: Vec::new(),
            factors: vec![Q::one()],
        };
        st.pos[start as usize] = 0;
        f(&st.path, &st.factors[0]);
        self.rec(&mut st, max_len, avoid, end_dist, f);
    }

    fn rec(&self, st: &mut WalkState, max_len: usize, avoid: &[bool], end_dist: Option<&[u32]>, f: &mut dyn FnMut(&[u32], &Q)) {
        let n = st.path.len() - 1;
        if n == max_len {
            return;
        }
        let cur = *st.path.last().unwrap();
        for &v in &self.g.adj[cur as usize] {
            let vi = v as usize;
            if avoid[vi] {
                continue;
            }
            if let Some(d) = end_dist {
                if d[vi] as usize > max_len - n - 1 {
                    continue;
                }
            }
            let popped = if st.pos[vi] >= 0 {
                let i = st.pos[vi] as usize;
                let mut poly: Vec<Point> = st.stack[i..].iter().map(|&u| self.g.coords[u as usize].clone()).collect();
                poly.push(self.g.coords[vi].clone());
                let lam = match self.act {
                    LoopActivity::Constant(l) => l.clone(),
                    _ => self.act.activity_of(&SapKey::new(&Walk(poly), self.ctx)),
                };
                let fct = st.factors.last().unwrap() * lam;
                st.factors.push(fct);
                let cnt = st.stack.len() - 1 - i;
                for u in st.stack.drain(i + 1..) {
                    st.pos[u as usize] = -1;
                    st.undo.push(u);
                }
                Some(cnt)
            } else {
                st.pos[vi] = st.stack.len() as i32;
                st.stack.push(v);
                None
            };
            st.path.push(v);
            f(&st.path, st.factors.last().unwrap());
            self.rec(st, max_len, avoid, end_dist, f);
            st.path.pop();
            match popped {
                Some(cnt) => {
                    let from = st.undo.len() - cnt;
                    for k in from..st.undo.len() {
                        let u = st.undo[k];
                        st.pos[u as usize] = st.stack.len() as i32;
                        st.stack.push(u);
                    }
                    st.undo.truncate(from);
                    st.factors.pop();
                }
                None => {
                    st.stack.pop();
                    st.pos[vi] = -1;
                }
            }
        }
    }
}

/// Chronological loop erasure of an index path.
fn le_indices(path: &[u32]) -> Vec<u32> {
    let mut out: Vec<u32> = Vec::with_capacity(path.len());
    for &v in path {
        if let Some(i) = out.iter().position(|&u| u == v) {
            out.truncate(i + 1);
        } else {
            out.push(v);
        }
    }
    out
}

fn lattice_only(ctx: &GraphCtx, what: &str) -> Result<()> {
    if ctx.is_lattice() {
        Ok(())
    } else {
        Err(LwwError::Unsupported(format!("{what} is implemented on Z^d only")))
    }
}

fn constant_lambda<'a>(act: &'a LoopActivity, what: &str) -> Result<&'a Q> {
    act.as_constant()
        .ok_or_else(|| LwwError::Unsupported(format!("{what} uses a scalar activity; per-polygon activities are not supported")))
}

/// `sum_{w: x -> x, |w| >= 1} |{j >= 1 : w_j = y}| w(w)`.
pub fn visit_weighted_closed_sum(ctx: &GraphCtx, x: &Point, y: &Point, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<ZSeries> {
    let g = IndexedGraph::new(ctx, x, nmax);
    budget.check(tree_size(g.max_degree(), nmax), "visit-weighted closed walks")?;
    let mut out = ZSeries::zero(nmax);
    let (Some(xi), Some(yi)) = (g.index_of(x), g.index_of(y)) else {
        return Ok(out);
    };
    let dist = g.distances_to(&[xi]);
    let avoid = vec![false; g.len()];
    Walker::new(&g, ctx, act).run(xi, nmax, &avoid, Some(&dist), &mut |path, f| {
        let n = path.len() - 1;
        if n == 0 || path[n] != xi {
            return;
        }
        let visits = path[1..].iter().filter(|&&v| v == yi).count();
        if visits > 0 {
            out.add_to_coeff(n, &(f * Q::from_integer((visits as i64).into())));
        }
    });
    Ok(out)
}

/// Which side of the bubble-chain bound to compute.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BubbleVariant {
    /// The exact chain, built from its segment decomposition.
    True,
    /// The relaxed chain built from squared scaled two-point functions.
    Upper,
}

/// The bubble chain from `x` to `y`.
pub fn bubble_chain(
    ctx: &GraphCtx,
    x: &Point,
    y: &Point,
    act: &LoopActivity,
    nmax: usize,
    variant: BubbleVariant,
    budget: Budget,
) -> Result<ZSeries> {
    lattice_only(ctx, "the bubble chain")?;
    let lambda = constant_lambda(act, "the bubble chain")?;
    match variant {
        BubbleVariant::True => bubble_chain_true_rhs(ctx, x, y, act, nmax, &[], budget),
        BubbleVariant::Upper => upper_bubble_chain(ctx, x, y, lambda, nmax, budget),
    }
}

fn upper_bubble_chain(ctx: &GraphCtx, x: &Point, y: &Point, lambda: &Q, nmax: usize, budget: Budget) -> Result<ZSeries> {
    let d = x.dim();
    let origin = Point::origin(d);
    let act = LoopActivity::constant(lambda.clone());
    let g = super::two_point_all(ctx, &origin, &act, nmax, budget)?;
    let a0 = g.get(&origin);
    if x == y {
        return Ok(a0.mul(&a0.sub(&ZSeries::one(nmax))));
    }
    let inv = a0.reciprocal()?;
    let mut bbar = SpatialSeries::new(nmax);
    for (p, s) in g.iter() {
        if *p != origin {
            let h = s.mul(&inv);
            bbar.insert(p.clone(), h.mul(&h));
        }
    }
    let target = y.sub(x);
    let mut power = bbar.clone();
    let mut acc = ZSeries::zero(nmax);
    let mut lk = lambda.clone();
    // Each factor of the chain starts at order z^2.
    for k in 1..=nmax / 2 {
        acc.add_assign(&power.get(&target).scale(&lk));
        if k < nmax / 2 {
            power = power.convolve(&bbar)?;
            lk *= lambda;
        }
    }
    Ok(a0.mul(&acc))
}

/// Sum of the loop factors of closed walks at `x` (the empty walk
/// included) that stay off `forbidden`.
fn restricted_alpha0(w: &Walker, g: &IndexedGraph, x: u32, forbidden: &[bool], nmax: usize) -> ZSeries {
    let dist = g.distances_to(&[x]);
    let mut out = ZSeries::zero(nmax);
    w.run(x, nmax, forbidden, Some(&dist), &mut |path, f| {
        if *path.last().unwrap() == x {
            out.add_to_coeff(path.len() - 1, f);
        }
    });
    out
}

/// Right-hand side of the bubble-chain decomposition, on the lattice with
/// the points of `forbidden` removed.
///
/// A closed walk at `x` with a marked visit to `y` is cut into: the
/// excursions at `x` before the last visit to `x` preceding the mark; the
/// forward segments `x_{i-1} -> x_i`, each avoiding (after its first
/// vertex) the loop erasure built so far; the backward segments
/// `x_{k-i+1} -> x_{k-i}` that reach the surviving part of that loop
/// erasure for the first time at their last step, where each arrival
/// closes one loop; and the closed walk at `x` after the last arrival.
pub fn bubble_chain_true_rhs(
    ctx: &GraphCtx,
    x: &Point,
    y: &Point,
    act: &LoopActivity,
    nmax: usize,
    forbidden: &[Point],
    budget: Budget,
) -> Result<ZSeries> {
    lattice_only(ctx, "the bubble chain")?;
    let lambda = constant_lambda(act, "the bubble chain")?.clone();
    let g = IndexedGraph::new(ctx, x, nmax);
    budget.check(tree_size(g.max_degree(), nmax), "bubble-chain decomposition")?;
    let mut forb = vec![false; g.len()];
    for p in forbidden {
        if let Some(i) = g.index_of(p) {
            forb[i as usize] = true;
        }
    }
    let Some(xi) = g.index_of(x) else {
        return Ok(ZSeries::zero(nmax));
    };
    if forb[xi as usize] {
        return Ok(ZSeries::zero(nmax));
    }
    let walker = Walker::new(&g, ctx, act);
    let a0 = restricted_alpha0(&walker, &g, xi, &forb, nmax);
    if x == y {
        return Ok(a0.mul(&a0.sub(&ZSeries::one(nmax))));
    }
    let Some(yi) = g.index_of(y) else {
        return Ok(ZSeries::zero(nmax));
    };
    if forb[yi as usize] {
        return Ok(ZSeries::zero(nmax));
    }
    let mut chain = Chain { g: &g, walker: &walker, lambda, forb: &forb, y: yi, nmax, acc: ZSeries::zero(nmax) };
    chain.forward(vec![xi], vec![0], 0, Q::one());
    Ok(a0.mul(&a0).mul(&chain.acc))
}

struct Chain<'a> {
    g: &'a IndexedGraph,
    walker: &'a Walker<'a>,
    lambda: Q,
    forb: &'a [bool],
    y: u32,
    nmax: usize,
    acc: ZSeries,
}

impl Chain<'_> {
    /// Extends the loop erasure `eta` (cut at `cuts`) by one forward segment.
    fn forward(&mut self, eta: Vec<u32>, cuts: Vec<usize>, used: usize, weight: Q) {
        let cur = *eta.last().unwrap();
        let mut avoid = self.forb.to_vec();
        for &v in &eta {
            avoid[v as usize] = true;
        }
        // Every backward segment needs at least one step.
        let k_now = cuts.len();
        let room = self.nmax.saturating_sub(used + k_now);
        if room == 0 {
            return;
        }
        let mut segs: Vec<(Vec<u32>, Q)> = Vec::new();
        self.walker.run(cur, room, &avoid, None, &mut |path, f| {
            if path.len() > 1 {
                segs.push((path.to_vec(), f.clone()));
            }
        });
        for (seg, f) in segs {
            let le = le_indices(&seg);
            let end = *le.last().unwrap();
            if le[1..le.len() - 1].contains(&self.y) {
                continue;
            }
            let mut eta2 = eta.clone();
            eta2.extend_from_slice(&le[1..]);
            let mut cuts2 = cuts.clone();
            cuts2.push(eta2.len() - 1);
            let used2 = used + seg.len() - 1;
            let w2 = &weight * &f;
            if end == self.y {
                self.backward(&eta2, &cuts2, 1, *eta2.last().unwrap(), used2, w2);
            } else {
                self.forward(eta2, cuts2, used2, w2);
            }
        }
    }

    /// Backward segment number `l` (1-based), starting at `from`.
    fn backward(&mut self, eta: &[u32], cuts: &[usize], l: usize, from: u32, used: usize, weight: Q) {
        let k = cuts.len() - 1;
        if l > k {
            self.acc.add_to_coeff(used, &weight);
            return;
        }
        let target = eta[cuts[k - l]];
        let surviving = &eta[..cuts[k - l + 1]];
        let mut avoid = self.forb.to_vec();
        for &v in surviving {
            avoid[v as usize] = true;
        }
        let remaining_segments = k - l;
        if used + 1 + remaining_segments > self.nmax {
            return;
        }
        let room = self.nmax - used - 1 - remaining_segments;
        let dist = self.g.distances_to(&self.g.adj[target as usize].clone());
        let mut found: Vec<(usize, Q)> = Vec::new();
        let g = self.g;
        self.walker.run(from, room, &avoid, Some(&dist), &mut |path, f| {
            let last = *path.last().unwrap();
            if g.adj[last as usize].contains(&target) {
                found.push((path.len(), f.clone()));
            }
        });
        for (len, f) in found {
            // `len - 1` steps to the neighbour plus the arrival step.
            let w2 = &weight * &f * &self.lambda;
            self.backward(eta, cuts, l + 1, target, used + len, w2);
        }
    }
}

/// `sum_{w: x -> y, x not revisited} |{j >= 1 : w_j = b}| w(w)`.
pub fn split_visit_sum(ctx: &GraphCtx, x: &Point, y: &Point, b: &Point, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<ZSeries> {
    if x == y || b == x {
        return Err(LwwError::Precondition("the split identity needs x != y and b != x".into()));
    }
    let g = IndexedGraph::new(ctx, x, nmax);
    budget.check(tree_size(g.max_degree(), nmax), "split visit sum")?;
    let mut out = ZSeries::zero(nmax);
    let (Some(xi), Some(yi)) = (g.index_of(x), g.index_of(y)) else {
        return Ok(out);
    };
    let bi = g.index_of(b);
    let mut avoid = vec![false; g.len()];
    avoid[xi as usize] = true;
    let dist = g.distances_to(&[yi]);
    Walker::new(&g, ctx, act).run(xi, nmax, &avoid, Some(&dist), &mut |path, f| {
        if *path.last().unwrap() != yi {
            return;
        }
        let visits = path[1..].iter().filter(|&&v| Some(v) == bi).count();
        if visits > 0 {
            out.add_to_coeff(path.len() - 1, &(f * Q::from_integer((visits as i64).into())));
        }
    });
    Ok(out)
}

/// How the chain factor of the split decomposition is normalized.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SplitForm {
    /// `delta_{a,b} + B^eta(a, b) / alpha_0^eta(a)`: the excursions at `a`
    /// that end the initial segment are not counted a second time by the
    /// chain. This form equals the left-hand side.
    Exact,
    /// `delta_{a,b} + B^eta(a, b)` as literally stated. It counts the
    /// excursions at `a` twice and so only bounds the left-hand side.
    Literal,
}

/// Decomposition side of the split identity: an initial segment to `a`
/// that never returns to `x`, a restricted bubble chain from `a` to `b`
/// (or nothing when `a = b`), and a final segment from `a` to `y` that
/// avoids the loop erasure of the initial segment.
pub fn split_visit_rhs(
    ctx: &GraphCtx,
    x: &Point,
    y: &Point,
    b: &Point,
    act: &LoopActivity,
    nmax: usize,
    form: SplitForm,
    budget: Budget,
) -> Result<ZSeries> {
    lattice_only(ctx, "the split identity")?;
    if x == y || b == x {
        return Err(LwwError::Precondition("the split identity needs x != y and b != x".into()));
    }
    let g = IndexedGraph::new(ctx, x, nmax);
    budget.check(tree_size(g.max_degree(), nmax), "split decomposition")?;
    let mut out = ZSeries::zero(nmax);
    let (Some(xi), Some(yi)) = (g.index_of(x), g.index_of(y)) else {
        return Ok(out);
    };
    let walker = Walker::new(&g, ctx, act);
    let mut no_x = vec![false; g.len()];
    no_x[xi as usize] = true;
    let mut firsts: Vec<(Vec<u32>, Q)> = Vec::new();
    walker.run(xi, nmax, &no_x, None, &mut |path, f| firsts.push((path.to_vec(), f.clone())));
    let mut chain_cache: HashMap<(Vec<u32>, u32), ZSeries> = HashMap::new();
    let ydist = g.distances_to(&[yi]);
    for (w1, f1) in firsts {
        let n1 = w1.len() - 1;
        // A trivial initial segment would put the chain at `x` itself,
        // which the left-hand side excludes.
        if n1 == 0 {
            continue;
        }
        let a = *w1.last().unwrap();
        if ydist[a as usize] as usize > nmax - n1 {
            continue;
        }
        let le = le_indices(&w1);
        let room = nmax - n1;
        let mut avoid2 = vec![false; g.len()];
        for &v in &le {
            avoid2[v as usize] = true;
        }
        let mut second = ZSeries::zero(nmax);
        walker.run(a, room, &avoid2, Some(&ydist), &mut |path, f| {
            if *path.last().unwrap() == yi {
                second.add_to_coeff(path.len() - 1, f);
            }
        });
        if second.is_zero() {
            continue;
        }
        let mut key_set: Vec<u32> = le[..le.len() - 1].to_vec();
        key_set.sort_unstable();
        let key = (key_set.clone(), a);
        let chain = match chain_cache.get(&key) {
            Some(s) => s.truncate(room).truncate(nmax),
            None => {
                // Every initial segment with this loop erasure has at least
                // `le.len() - 1` steps, so this room serves all of them.
                let room = nmax - (le.len() - 1);
                let forb: Vec<Point> = key_set.iter().map(|&i| g.coords[i as usize].clone()).collect();
                let ap = &g.coords[a as usize];
                let mut s = bubble_chain_true_rhs(ctx, ap, b, act, room, &forb, budget)?;
                if form == SplitForm::Exact {
                    let mut forb_mask = vec![false; g.len()];
                    for &i in &key_set {
                        forb_mask[i as usize] = true;
                    }
                    let a0 = restricted_alpha0(&walker, &g, a, &forb_mask, room);
                    s = s.mul(&a0.reciprocal()?);
                }
                let s = ZSeries::from_coeffs((0..=nmax).map(|k| if k <= room { s.coeff(k) } else { Q::zero() }).collect());
                chain_cache.insert(key, s.clone());
                s.truncate(nmax - n1).truncate(nmax)
            }
        };
        let mut factor = chain;
        if g.coords[a as usize] == *b {
            factor.add_to_coeff(0, &Q::one());
        }
        out.add_assign(&factor.mul(&second).scale(&f1).shift(n1));
    }
    Ok(out)
}

/// Triangle and square diagrams.
#[derive(Clone, Debug, PartialEq)]
pub struct Diagrams {
    pub triangle: ZSeries,
    pub square: ZSeries,
}

/// `T = sum_{x,y} H(x) H(y - x) H(-y)` and the four-factor analogue,
/// computed in x-space from the reduced two-point function.
pub fn diagrams(ctx: &GraphCtx, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<Diagrams> {
    lattice_only(ctx, "the diagrams")?;
    let d = match ctx {
        GraphCtx::Lattice(d) => *d,
        GraphCtx::Finite(_) => unreachable!(),
    };
    let origin = Point::origin(d);
    let h = super::reduced_two_point_all(ctx, &origin, act, nmax, budget)?;
    let h2 = h.convolve(&h)?;
    let h3 = h2.convolve(&h)?;
    let h4 = h3.convolve(&h)?;
    Ok(Diagrams { triangle: h3.get(&origin), square: h4.get(&origin) })
}

/// Right-hand side of the one-step bound at `y`:
/// `z alpha sum_{u ~ 0} G(u, y)`.
pub fn one_step_bound(g_all: &SpatialSeries, alpha: &ZSeries, ctx: &GraphCtx, y: &Point) -> Result<ZSeries> {
    let origin = Point::origin(y.dim());
    let mut acc = ZSeries::zero(g_all.nmax());
    for u in ctx.neighbors(&origin)? {
        acc.add_assign(&g_all.get(&y.sub(&u)));
    }
    Ok(alpha.mul(&acc).shift(1))
}
