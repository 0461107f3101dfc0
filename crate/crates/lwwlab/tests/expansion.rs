use std::collections::BTreeSet;

use lwwlab::enumerate::Budget;
use lwwlab::expansion::*;
use lwwlab::laces::{all_laces, compatible_edges, LabelMode};
use lwwlab::series::{q, step_distribution};
use lwwlab::{oracle, GraphCtx, LoopActivity, LwwError, Point, SpatialSeries, Walk, ZSeries};
use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_walk(d: usize, n: usize, rng: &mut ChaCha8Rng) -> Walk {
    let mut pts = vec![Point::origin(d)];
    for _ in 0..n {
        let axis = rng.random_range(0..d);
        let sign = if rng.random_bool(0.5) { 1 } else { -1 };
        let next = pts.last().unwrap().add(&Point::unit(d, axis, sign));
        pts.push(next);
    }
    Walk(pts)
}

fn expansion(d: usize, lambda: (i64, i64), nmax: usize) -> Expansion {
    Expansion::new(&GraphCtx::lattice(d), &LoopActivity::ratio(lambda.0, lambda.1), nmax, Budget::default()).unwrap()
}

fn universe_for(w: &Walk, cutoff: usize, nmax: usize, lambda: (i64, i64)) -> LoopUniverse {
    LoopUniverse::build(&GraphCtx::lattice(2), &LoopActivity::ratio(lambda.0, lambda.1), cutoff, nmax, &w.range()).unwrap()
}

#[test]
fn hyperedge_weight_cases() {
    let w = Walk::from_coords(&[&[0, 0], &[1, 0], &[1, 1]]);
    let u = universe_for(&w, 4, 6, (1, 2));
    let x = (0..u.len()).find(|&x| u.range(x).contains(&Point(vec![0, 0])) && u.range(x).len() == 2).unwrap();
    let far = (0..u.len()).find(|&x| !u.range(x).contains(&Point(vec![0, 0]))).unwrap();
    assert_eq!(hyperedge_weight(&Hyperedge::spacelike([0], x), &w, &u).unwrap(), *u.alpha(x));
    assert!(hyperedge_weight(&Hyperedge::spacelike([0, 2], far), &w, &u).unwrap().is_zero());
    let even = hyperedge_weight(&Hyperedge::spacelike([0, 0], x), &w, &u).unwrap();
    assert_eq!(even, *u.alpha(x));
    assert!(u.alpha(x).is_nonnegative());
    let closing = Walk::from_coords(&[&[0, 0], &[1, 0], &[0, 0]]);
    assert_eq!(hyperedge_weight(&Hyperedge::timelike(0, 2), &closing, &u).unwrap(), ZSeries::constant(6, q(-1)));
    assert!(hyperedge_weight(&Hyperedge::timelike(0, 1), &closing, &u).unwrap().is_zero());
    let bad = Hyperedge { j: [0usize].into_iter().collect(), x: None };
    assert!(matches!(hyperedge_weight(&bad, &w, &u), Err(LwwError::Precondition(_))));
}

#[test]
fn product_and_remainder_identities_on_random_walks() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..6 {
        let n = rng.random_range(1..=4);
        let w = random_walk(2, n, &mut rng);
        let u = universe_for(&w, 4, 6, (2, 1));
        assert!(!u.is_empty());
        assert!(product_identity_check(&w, &u).unwrap(), "{w:?}");
        for k in 0..=n {
            assert!(remainder_identity_check(&w, k, &u).unwrap(), "{w:?} k={k}");
        }
    }
}

#[test]
fn span_resummation_on_random_walks() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..6 {
        let n = rng.random_range(2..=5);
        let w = random_walk(2, n, &mut rng);
        let u = universe_for(&w, 4, 6, (1, 2));
        for s in 0..n {
            for t in s + 1..=n {
                assert!(span_resummation_check(&w, s, t, &u).unwrap(), "{w:?} {s} {t}");
            }
        }
    }
}

#[test]
fn i_omega_from_universe_matches_loop_measure() {
    let nmax = 6;
    let e = expansion(2, (1, 2), nmax);
    let w = Walk::from_coords(&[&[0, 0], &[1, 0], &[1, 1], &[0, 1], &[-1, 1]]);
    // Every closed walk of length <= nmax through w_s.
    for (s, t) in [(0, 3), (0, 4), (1, 4), (0, 1)] {
        let region: BTreeSet<Point> = [w.0[s].clone()].into();
        let u = LoopUniverse::build(&GraphCtx::lattice(2), &e.act, nmax, nmax, &region).unwrap();
        assert_eq!(i_omega_universe(&w, s, t, &u).unwrap(), e.i_omega(&w.0, s, t), "{s} {t}");
    }
}

#[test]
fn avoidance_table_examples() {
    assert_eq!(avoidance_table(&[(0, 4)]), vec![0, 0, 0, 0, 1]);
    assert_eq!(avoidance_table(&[(0, 2), (1, 3)]), vec![0, 0, 1, 2]);
    assert_eq!(avoidance_table(&[(0, 2), (1, 4), (3, 6)]), vec![0, 0, 1, 1, 2, 2, 4]);
    assert_eq!(
        segments(&[(0, 2), (1, 4), (3, 6)]),
        vec![
            Segment { start: 1, end: 1, sigma: 0 },
            Segment { start: 2, end: 3, sigma: 1 },
            Segment { start: 4, end: 5, sigma: 2 },
            Segment { start: 6, end: 6, sigma: 4 },
        ]
    );
    assert_eq!(subwalk_avoids(2), vec![1]);
    assert_eq!(subwalk_avoids(5), vec![3, 4]);
    assert_eq!(subwalk_avoids(6), vec![3, 4, 5]);
}

#[test]
fn avoidance_table_matches_compatible_edges() {
    for m in 2..=6 {
        for lace in all_laces(0, m, LabelMode::Single).unwrap() {
            let pairs: Vec<(usize, usize)> = {
                let mut v: Vec<_> = lace.edges.iter().map(|e| (e.s, e.t)).collect();
                v.sort();
                v
            };
            let sigma = avoidance_table(&pairs);
            let compatible: BTreeSet<(usize, usize)> =
                compatible_edges(&lace, LabelMode::Single).unwrap().iter().map(|e| (e.s, e.t)).collect();
            let table: BTreeSet<(usize, usize)> =
                (1..=m).flat_map(|t| (sigma[t]..t).map(move |s| (s, t))).collect();
            assert_eq!(compatible, table, "{pairs:?}");
            assert_eq!(lace_cut_points(&lace).len(), 2 * pairs.len());
        }
    }
}

#[test]
fn pi1_closed_forms_match_the_table() {
    for d in [1, 2] {
        let e = expansion(d, (1, 2), 6);
        for x in [Point::origin(d), Point::unit(d, 0, 1), Point::unit(d, 0, -1).add(&Point::unit(d, d - 1, -1))] {
            assert_eq!(e.pi1(&x).unwrap(), e.pi_n(&x, 1).unwrap(), "d={d} {x:?}");
        }
    }
}

#[test]
fn pi1_small_cases() {
    let e = expansion(1, (0, 1), 6);
    assert!(e.pi1(&Point(vec![1])).unwrap().is_zero());
    assert!(e.pi1(&Point(vec![2])).unwrap().is_zero());
    let e = expansion(2, (0, 1), 6);
    assert!(e.pi1(&Point(vec![1, 1])).unwrap().is_zero());
    assert!(e.pi_n(&Point(vec![4, 3]), 1).unwrap().is_zero());
}

/// The two-step return carries no loop activity: the coefficient of `z^2`
/// in `pi^(1)(0)` is `2d`, forced by the solved coefficient.
#[test]
fn pi1_at_the_origin_starts_with_2d() {
    for (d, lambda) in [(1, (1, 2)), (1, (0, 1)), (2, (2, 1))] {
        let e = expansion(d, lambda, 4);
        let o = Point::origin(d);
        let p = e.pi1(&o).unwrap();
        assert_eq!(p.coeff(2), q(2 * d as i64));
        assert_eq!(e.pi_oracle().unwrap().get(&o).coeff(2), q(-2 * d as i64));
    }
    // The bubble form z lambda 2d (D * H / alpha_0)(0) = 1 - 1/alpha_0 has
    // z^2 coefficient 2 d lambda instead.
    let e = expansion(1, (1, 2), 4);
    let bubble = ZSeries::one(4).sub(&e.alpha0().reciprocal().unwrap());
    assert_eq!(bubble.coeff(2), q(1));
    assert_ne!(bubble, e.pi1(&Point::origin(1)).unwrap());
}

#[test]
fn pi_total_matches_the_solved_coefficient() {
    for (d, lambda, nmax) in [(1, (0, 1), 6), (1, (2, 1), 6), (2, (1, 2), 5)] {
        let e = expansion(d, lambda, nmax);
        let total = e.pi_total().unwrap();
        let solved = e.pi_oracle().unwrap();
        assert_eq!(total.first_difference(&solved), None, "d={d} {lambda:?}");
        for (_, s) in total.iter() {
            assert!(s.coeff(0).is_zero() && s.coeff(1).is_zero());
        }
        assert!(solved.total().coeff(0).is_zero());
    }
}

#[test]
fn solved_coefficient_satisfies_the_lace_equation() {
    let (d, nmax) = (2, 5);
    let e = expansion(d, (1, 1), nmax);
    let ctx = GraphCtx::lattice(d);
    let o = Point::origin(d);
    let g = lwwlab::enumerate::two_point_all(&ctx, &o, &e.act, nmax, Budget::default()).unwrap();
    let pi = e.pi_oracle().unwrap();
    let step = step_distribution(d, nmax).scale(&q(2 * d as i64)).mul_series(&e.alpha().shift(1));
    let rhs = SpatialSeries::delta(nmax, o, e.alpha0().clone())
        .add(&step.convolve(&g).unwrap())
        .add(&pi.convolve(&g).unwrap());
    assert_eq!(rhs.first_difference(&g), None);
}

#[test]
fn lace_recursion_has_zero_residual() {
    for (d, lambda, nmax) in [(1, (0, 1), 6), (2, (2, 1), 5)] {
        let e = expansion(d, lambda, nmax);
        assert!(e.lace_recursion_check().unwrap().is_zero(), "d={d} {lambda:?}");
        assert_eq!(e.lace_recursion_residuals().unwrap().len(), nmax + 1);
    }
}

#[test]
fn self_avoiding_case_uses_plain_counts() {
    let e = expansion(2, (0, 1), 5);
    let c = e.saw_coefficients();
    for (n, row) in c.iter().enumerate() {
        assert_eq!(row.total(), ZSeries::constant(5, q(oracle::saw_count(2, n) as i64)));
    }
    assert_eq!(*e.alpha0(), ZSeries::one(5));
}

#[test]
fn majorant_bounds_each_order() {
    let e = expansion(2, (1, 2), 6);
    for n_edges in 1..=3 {
        let exact = e.pi_n_by_length(n_edges).unwrap();
        let bound = e.pi_n_majorant_by_length(n_edges).unwrap();
        for (m, (a, b)) in exact.iter().zip(&bound).enumerate() {
            for (x, s) in a.iter() {
                let t = b.get(x);
                for k in 0..=6 {
                    assert!(s.coeff(k).abs() <= t.coeff(k), "N={n_edges} m={m} {x:?} z^{k}");
                }
            }
        }
    }
}

#[test]
fn literal_subwalk_reading_misses_coinciding_lace_endpoints() {
    let e = expansion(1, (0, 1), 4);
    let table = e.pi_n_by_length(2).unwrap();
    let literal = e.pi_n_subwalk_reading(2).unwrap();
    let x = Point(vec![-1]);
    // The walk 0, -1, 0, -1 returns along both lace edges.
    assert_eq!(table[3].get(&x).coeff(3), q(1));
    assert!(literal[3].get(&x).is_zero());
    assert_ne!(e.pi_oracle().unwrap().get(&x), ZSeries::zero(4));
}

#[test]
fn finite_graphs_and_long_truncations_are_refused() {
    let g = GraphCtx::Finite(lwwlab::walk::FiniteGraph::grid(2, 2));
    assert!(matches!(Expansion::new(&g, &LoopActivity::from_int(1), 4, Budget::default()), Err(LwwError::Unsupported(_))));
    assert!(matches!(
        Expansion::new(&GraphCtx::lattice(1), &LoopActivity::from_int(1), 7, Budget::default()),
        Err(LwwError::Resource(_))
    ));
}
