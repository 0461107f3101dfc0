//! Exhaustive walk sums: two-point functions, susceptibility, loop
//! measures and the visit identities built on them.

mod counts;
mod engine;
mod loops;
mod visits;

use std::collections::BTreeSet;

use crate::error::Result;
use crate::series::{SpatialSeries, ZSeries};
use crate::walk::{GraphCtx, LoopActivity, Point};

pub use counts::{loop_count_table, reduced_tree_size, LoopCountTable};
pub use engine::{
    for_each_walk, lambda_powers, tree_size, walk_sum, walk_sum_by_endpoint, walk_sum_per_length, Budget, EndSpec,
    IndexedGraph, WalkConstraint,
};
pub use loops::{
    alpha, alpha0, ball, closed_walk_sum, generalized_loop_measure, i_omega, interaction_two_point, loop_measure,
    loop_measure_direct, range_factor, reference_neighbor, singleton, LoopCatalogue,
};
pub use visits::{
    bubble_chain, bubble_chain_true_rhs, diagrams, split_visit_rhs, split_visit_sum, visit_weighted_closed_sum,
    one_step_bound, BubbleVariant, Diagrams, SplitForm,
};

/// `G(0, x)`, or the reduced `H(0, x) = (1 - delta_{0,x}) G(0, x)`.
pub fn two_point(ctx: &GraphCtx, origin: &Point, x: &Point, act: &LoopActivity, nmax: usize, reduced: bool, budget: Budget) -> Result<ZSeries> {
    if reduced && x == origin {
        return Ok(ZSeries::zero(nmax));
    }
    let c = WalkConstraint::from(origin.clone(), nmax).to(x.clone());
    walk_sum(ctx, &c, act, nmax, budget)
}

/// `G(0, x)` for every `x` at once.
pub fn two_point_all(ctx: &GraphCtx, origin: &Point, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<SpatialSeries> {
    walk_sum_by_endpoint(ctx, &WalkConstraint::from(origin.clone(), nmax), act, nmax, budget)
}

/// `H = G - alpha_0 delta` evaluated from the full two-point function.
pub fn reduced_two_point_all(ctx: &GraphCtx, origin: &Point, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<SpatialSeries> {
    let mut g = two_point_all(ctx, origin, act, nmax, budget)?;
    g.insert(origin.clone(), ZSeries::zero(nmax));
    Ok(g)
}

/// Susceptibility `chi(z) = sum_x G(0, x)`.
pub fn susceptibility(ctx: &GraphCtx, origin: &Point, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<ZSeries> {
    walk_sum(ctx, &WalkConstraint::from(origin.clone(), nmax), act, nmax, budget)
}

/// Sum over self-avoiding walks `eta` from the origin to `x` of
/// `z^|eta| exp(mu(range eta))`, with loop measures from the catalogue.
pub fn loop_erased_two_point(cat: &LoopCatalogue, ctx: &GraphCtx, origin: &Point, x: &Point, budget: Budget) -> Result<ZSeries> {
    Ok(loop_erased_two_point_all(cat, ctx, origin, budget)?.get(x))
}

/// [`loop_erased_two_point`] for every endpoint.
pub fn loop_erased_two_point_all(cat: &LoopCatalogue, ctx: &GraphCtx, origin: &Point, budget: Budget) -> Result<SpatialSeries> {
    let nmax = cat.nmax;
    let mut out = SpatialSeries::new(nmax);
    let c = WalkConstraint::from(origin.clone(), nmax).saw();
    let mut saws = Vec::new();
    let g = IndexedGraph::new(ctx, origin, nmax);
    budget.check(tree_size(g.max_degree(), nmax), "self-avoiding walk list")?;
    collect_saws(&g, &c, &mut saws);
    for path in saws {
        let m = path.len() - 1;
        let range: BTreeSet<Point> = path.iter().cloned().collect();
        let mut mu = ZSeries::zero(nmax);
        cat.for_each_meeting(&range, nmax - m, |_, w| mu.add_assign(&w.truncate(nmax - m).truncate(nmax)));
        let f = mu.truncate(nmax - m).exp()?.truncate(nmax).shift(m);
        out.add_at(path.last().unwrap(), &f);
    }
    Ok(out)
}

fn collect_saws(g: &IndexedGraph, c: &WalkConstraint, out: &mut Vec<Vec<Point>>) {
    let s = g.index_of(&c.start).expect("start in graph");
    let mut path = vec![s];
    let mut on = vec![false; g.len()];
    on[s as usize] = true;
    fn rec(g: &IndexedGraph, path: &mut Vec<u32>, on: &mut [bool], max: usize, out: &mut Vec<Vec<Point>>) {
        out.push(path.iter().map(|&i| g.coords[i as usize].clone()).collect());
        if path.len() - 1 == max {
            return;
        }
        let cur = *path.last().unwrap();
        for &v in &g.adj[cur as usize] {
            if on[v as usize] {
                continue;
            }
            on[v as usize] = true;
            path.push(v);
            rec(g, path, on, max, out);
            path.pop();
            on[v as usize] = false;
        }
    }
    rec(g, &mut path, &mut on, c.max_len, out);
}

/// All self-avoiding walks from `start` of length at most `max_len`.
pub fn self_avoiding_walks(ctx: &GraphCtx, start: &Point, max_len: usize) -> Vec<Vec<Point>> {
    let g = IndexedGraph::new(ctx, start, max_len);
    let mut out = Vec::new();
    collect_saws(&g, &WalkConstraint::from(start.clone(), max_len).saw(), &mut out);
    out
}
