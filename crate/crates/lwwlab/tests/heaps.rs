use std::collections::BTreeSet;

use lwwlab::enumerate::{closed_walk_sum, two_point, Budget};
use lwwlab::heaps::*;
use lwwlab::oracle;
use lwwlab::series::qr;
use lwwlab::walk::FiniteGraph;
use lwwlab::{GraphCtx, LoopActivity, Point, Walk, ZSeries};

fn p(c: &[i32]) -> Point {
    Point(c.to_vec())
}

fn cyc(v: &[&[i32]]) -> OrientedCycle {
    let mut w: Vec<Point> = v.iter().map(|c| p(c)).collect();
    w.push(w[0].clone());
    OrientedCycle::from_polygon(&Walk(w)).unwrap()
}

#[test]
fn cycles_keep_orientation_except_when_trivial() {
    let a = cyc(&[&[0, 0], &[1, 0], &[1, 1], &[0, 1]]);
    let b = cyc(&[&[1, 1], &[0, 1], &[0, 0], &[1, 0]]);
    assert_eq!(a, b);
    assert_ne!(a, a.reversed());
    assert_eq!(cyc(&[&[0], &[1]]), cyc(&[&[1], &[0]]));
    assert!(OrientedCycle::from_polygon(&Walk::line(&[0, 1, 2, 1, 0])).is_err());
}

#[test]
fn composition_and_commutation() {
    let c1 = cyc(&[&[0], &[1]]);
    let c2 = cyc(&[&[5], &[6]]);
    let c3 = cyc(&[&[1], &[2]]);
    let e = CycleHeap::empty();
    let one = e.compose(&c1);
    assert_eq!(one.len(), 1);
    assert_eq!(one.maximal(), vec![0]);
    assert_eq!(one.compose(&c2), e.compose(&c2).compose(&c1));
    assert_ne!(one.compose(&c3), e.compose(&c3).compose(&c1));
    let h = one.compose(&c3).compose(&c2);
    assert_eq!(h.maximal().len(), 2);
}

#[test]
fn linearizations_give_the_same_heap() {
    // c1 < c3 (they overlap); c2 is free. All orders respecting c1 before
    // c3 build the same heap.
    let c1 = cyc(&[&[0], &[1]]);
    let c2 = cyc(&[&[5], &[6]]);
    let c3 = cyc(&[&[1], &[2]]);
    let orders = [[&c1, &c3, &c2], [&c1, &c2, &c3], [&c2, &c1, &c3]];
    let heaps: Vec<CycleHeap> = orders.iter().map(|o| o.iter().fold(CycleHeap::empty(), |h, c| h.compose(c))).collect();
    assert!(heaps.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn insertion_examples() {
    let w = Walk::line(&[0, 1, 2]);
    let c = cyc(&[&[1], &[2]]);
    assert_eq!(loop_insert(&w, &c).unwrap(), Walk::line(&[0, 1, 2, 1, 2]));
    assert!(loop_insert(&w, &cyc(&[&[7], &[8]])).is_err());
    let cs = [cyc(&[&[0], &[1]]), cyc(&[&[2], &[3]])];
    assert_eq!(walk_order_max(&w, &cs).unwrap(), 1);
    assert_eq!(walk_order_max(&w, &cs[..1]).unwrap(), 0);
    assert!(walk_order_max(&w, &[cyc(&[&[0], &[1]]), cyc(&[&[1], &[2]])]).is_err());
}

#[test]
fn addition_and_erasure_examples() {
    let eta = Walk::line(&[0, -1]);
    let pair = LegalPair::new(eta.clone(), CycleHeap::empty().compose(&cyc(&[&[0], &[1]]))).unwrap();
    assert_eq!(loop_addition(&pair).unwrap(), Walk::line(&[0, 1, 0, -1]));
    assert_eq!(loop_erasure_to_pair(&Walk::line(&[0, 1, 0, -1])), pair);
    assert_eq!(loop_addition(&LegalPair::new(eta.clone(), CycleHeap::empty()).unwrap()).unwrap(), eta);
    assert!(LegalPair::new(eta, CycleHeap::empty().compose(&cyc(&[&[4], &[5]]))).is_err());
}

#[test]
fn erasing_an_insertion_recovers_the_cycle() {
    let eta = Walk::from_coords(&[&[0, 0], &[1, 0], &[2, 0]]);
    let c = cyc(&[&[1, 0], &[1, 1], &[2, 1], &[2, 0]]);
    let w = loop_insert(&eta, &c).unwrap();
    let (rest, removed) = w.single_loop_erase();
    assert_eq!(rest, eta);
    assert_eq!(OrientedCycle::from_polygon(&removed.unwrap()).unwrap(), c);
}

#[test]
fn round_trip_on_short_planar_walks() {
    for n in 0..=6 {
        for w in oracle::all_walks(2, n) {
            let pair = loop_erasure_to_pair(&w);
            assert!(pair.is_legal());
            assert_eq!(loop_addition(&pair).unwrap(), w);
            assert_eq!(pair_edge_multiset(&pair), directed_edge_multiset(&w));
            assert_eq!(pair.heap.labels(), erased_cycle_multiset(&w));
        }
    }
}

#[test]
fn legal_pairs_round_trip_on_small_box() {
    let g = FiniteGraph::grid(2, 3);
    let pairs = legal_pairs(&g, 6);
    assert!(!pairs.is_empty());
    for pair in pairs {
        let w = loop_addition(&pair).unwrap();
        assert_eq!(loop_erasure_to_pair(&w), pair);
    }
}

#[test]
fn cycle_lists_of_small_graphs() {
    let g = FiniteGraph::grid(3, 3);
    let cs = oriented_cycles(&g, 8);
    let count = |k: usize| cs.iter().filter(|c| c.len() == k).count();
    assert_eq!((count(2), count(4), count(6), count(8)), (12, 8, 8, 10));
}

#[test]
fn trivial_heap_sums() {
    let edge = GraphCtx::Finite(FiniteGraph::new(vec![p(&[0]), p(&[1])], &[(0, 1)]).unwrap());
    let l = LoopActivity::ratio(3, 2);
    let s = trivial_heap_sum(&BTreeSet::new(), &edge, &l, 6).unwrap();
    assert_eq!(s, ZSeries::one(6).sub(&ZSeries::monomial(6, 2, qr(3, 2))));
    let all: BTreeSet<Point> = [p(&[0]), p(&[1])].into_iter().collect();
    assert_eq!(trivial_heap_sum(&all, &edge, &l, 6).unwrap(), ZSeries::one(6));
    assert!(trivial_heap_sum(&BTreeSet::new(), &GraphCtx::lattice(2), &l, 4).is_err());
}

/// Closed walks of a finite graph, rooted everywhere, divided by length.
fn loop_sum(ctx: &GraphCtx, forbidden: &BTreeSet<Point>, act: &LoopActivity, nmax: usize) -> ZSeries {
    let GraphCtx::Finite(g) = ctx else { unreachable!() };
    let mut acc = ZSeries::zero(nmax);
    for v in g.vertices() {
        if forbidden.contains(v) {
            continue;
        }
        let sub = restrict(g, forbidden);
        let c = closed_walk_sum(&GraphCtx::Finite(sub), v, act, nmax, Budget::default()).unwrap();
        for n in 1..=nmax {
            acc.add_to_coeff(n, &(c.coeff(n) / lwwlab::series::q(n as i64)));
        }
    }
    acc
}

fn restrict(g: &FiniteGraph, forbidden: &BTreeSet<Point>) -> FiniteGraph {
    let keep: Vec<Point> = g.vertices().iter().filter(|v| !forbidden.contains(v)).cloned().collect();
    let idx = |p: &Point| keep.iter().position(|q| q == p);
    let edges: Vec<(usize, usize)> = g
        .edge_list()
        .into_iter()
        .filter_map(|(a, b)| Some((idx(&g.vertices()[a])?, idx(&g.vertices()[b])?)))
        .collect();
    FiniteGraph::new(keep, &edges).unwrap()
}

#[test]
fn heap_identity_on_boxes() {
    for (w, h) in [(2, 2), (2, 3)] {
        let ctx = GraphCtx::Finite(FiniteGraph::grid(w, h));
        for act in [LoopActivity::ratio(1, 2), LoopActivity::from_int(2)] {
            let t = trivial_heap_sum(&BTreeSet::new(), &ctx, &act, 8).unwrap();
            assert_eq!(t, loop_sum(&ctx, &BTreeSet::new(), &act, 8).neg().exp().unwrap());
            let forb: BTreeSet<Point> = [p(&[0, 0])].into_iter().collect();
            let tf = trivial_heap_sum(&forb, &ctx, &act, 8).unwrap();
            assert_eq!(tf, loop_sum(&ctx, &forb, &act, 8).neg().exp().unwrap());
            assert_eq!(heap_sum(&ctx, &act, 6).unwrap(), t.truncate(6).reciprocal().unwrap());
        }
    }
}

#[test]
fn cycle_gas_matches_two_point() {
    let ctx = GraphCtx::Finite(FiniteGraph::grid(3, 3));
    let o = p(&[0, 0]);
    for act in [LoopActivity::from_int(0), LoopActivity::ratio(1, 2), LoopActivity::from_int(1)] {
        for x in [p(&[0, 0]), p(&[1, 1]), p(&[2, 1])] {
            let g = two_point(&ctx, &o, &x, &act, 6, false, Budget::default()).unwrap();
            let o_gas = cycle_gas_two_point(&o, &x, &ctx, &act, 6, CycleBookkeeping::Oriented).unwrap();
            let u_gas = cycle_gas_two_point(&o, &x, &ctx, &act, 6, CycleBookkeeping::Unoriented).unwrap();
            assert_eq!(g, o_gas, "x={x:?}");
            assert_eq!(o_gas, u_gas);
        }
    }
}
