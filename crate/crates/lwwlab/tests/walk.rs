use std::collections::BTreeSet;

use lwwlab::enumerate::for_each_walk;
use lwwlab::series::qr;
use lwwlab::walk::*;
use lwwlab::{oracle, LwwError, Q};
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(c: &[i32]) -> Point {
    Point(c.to_vec())
}

fn random_walk(d: usize, n: usize, rng: &mut ChaCha8Rng) -> Walk {
    let mut pts = vec![Point::origin(d)];
    for _ in 0..n {
        let step = Point::unit(d, rng.random_range(0..d), if rng.random_bool(0.5) { 1 } else { -1 });
        pts.push(pts.last().unwrap().add(&step));
    }
    Walk(pts)
}

#[test]
fn neighbours_in_lexicographic_order() {
    assert_eq!(GraphCtx::lattice(1).neighbors(&p(&[0])).unwrap(), vec![p(&[-1]), p(&[1])]);
    assert_eq!(
        GraphCtx::lattice(2).neighbors(&p(&[0, 0])).unwrap(),
        vec![p(&[-1, 0]), p(&[0, -1]), p(&[0, 1]), p(&[1, 0])]
    );
    let triangle = FiniteGraph::new(vec![p(&[0]), p(&[1]), p(&[2])], &[(0, 1), (1, 2), (2, 0)]).unwrap();
    let ctx = GraphCtx::Finite(triangle);
    assert_eq!(ctx.neighbors(&p(&[0])).unwrap(), vec![p(&[1]), p(&[2])]);
    assert!(matches!(ctx.neighbors(&p(&[5])), Err(LwwError::Domain(_))));
    assert!(matches!(GraphCtx::lattice(2).neighbors(&p(&[0])), Err(LwwError::Domain(_))));
}

#[test]
fn concatenation_examples() {
    assert_eq!(Walk::line(&[0, 1]).concat(&Walk::line(&[1, 2])).unwrap(), Walk::line(&[0, 1, 2]));
    let w = Walk::line(&[0, 1, 2]);
    assert_eq!(w.concat(&Walk::trivial(p(&[2]))).unwrap(), w);
    let a = Walk::from_coords(&[&[0, 0], &[1, 0], &[0, 0]]);
    let b = Walk::from_coords(&[&[0, 0], &[0, 1]]);
    assert_eq!(a.concat(&b).unwrap(), Walk::from_coords(&[&[0, 0], &[1, 0], &[0, 0], &[0, 1]]));
    assert!(matches!(b.concat(&a), Err(LwwError::Precondition(_))));

    let ctx = GraphCtx::lattice(1);
    assert_eq!(Walk::line(&[0]).diamond_concat(&Walk::line(&[1]), &ctx).unwrap(), Walk::line(&[0, 1]));
    assert_eq!(Walk::line(&[0, 1]).diamond_concat(&Walk::line(&[2, 3]), &ctx).unwrap(), Walk::line(&[0, 1, 2, 3]));
    assert!(Walk::line(&[0]).diamond_concat(&Walk::line(&[2]), &ctx).is_err());
}

#[test]
fn classification() {
    assert_eq!(Walk::line(&[0, 1, 0]).classify(), WalkClass::Sap);
    assert_eq!(Walk::line(&[0, 1, 2]).classify(), WalkClass::Saw);
    assert_eq!(Walk::line(&[0, 1, 0, 1, 0]).classify(), WalkClass::Loop);
    assert_eq!(Walk::line(&[0, 1, 2, 1]).classify(), WalkClass::General);
    let square = Walk::from_coords(&[&[0, 0], &[1, 0], &[1, 1], &[0, 1], &[0, 0]]);
    assert_eq!(square.classify(), WalkClass::Sap);
}

#[test]
fn single_erasure_examples() {
    assert_eq!(Walk::line(&[0, 1, 0, -1]).single_loop_erase(), (Walk::line(&[0, -1]), Some(Walk::line(&[0, 1, 0]))));
    assert_eq!(Walk::line(&[0, 1, 2, 1]).single_loop_erase(), (Walk::line(&[0, 1]), Some(Walk::line(&[1, 2, 1]))));
    assert_eq!(Walk::line(&[0, 1, 2]).single_loop_erase(), (Walk::line(&[0, 1, 2]), None));
}

#[test]
fn loop_erasure_examples() {
    let ctx = GraphCtx::lattice(1);
    let le = Walk::line(&[0, 1, 0, 1, 0]).loop_erase(&ctx);
    assert_eq!(le.saw, Walk::line(&[0]));
    assert_eq!(le.record.count(), 2);
    assert_eq!(le.erased, vec![Walk::line(&[0, 1, 0]), Walk::line(&[0, 1, 0])]);
    let le = Walk::line(&[0, 1, 0, -1]).loop_erase(&ctx);
    assert_eq!((le.saw, le.record.count()), (Walk::line(&[0, -1]), 1));
    assert_eq!(Walk::line(&[0, 1, 0, -1]).loop_erase_last_exit(), Walk::line(&[0, -1]));
}

#[test]
fn exhaustive_loop_erasure_properties() {
    let ctx = GraphCtx::lattice(2);
    let mut count = 0u64;
    for_each_walk(&ctx, &Point::origin(2), 10, |w| {
        let (saw, erased) = w.loop_erase_raw();
        assert!(saw.is_self_avoiding());
        assert_eq!((saw.start(), saw.end()), (w.start(), w.end()));
        assert_eq!(w.loop_erase_last_exit(), saw);
        if w.len() <= 6 {
            assert_eq!(saw.loop_erase_raw().0, saw);
            for polygon in &erased {
                assert_eq!(polygon.classify(), WalkClass::Sap);
            }
        }
        count += 1;
    })
    .unwrap();
    assert_eq!(count, (0..=10).map(|n| 4u64.pow(n)).sum::<u64>());
}

#[test]
fn erasure_record_matches_repeated_single_erasure() {
    let ctx = GraphCtx::lattice(2);
    for w in oracle::all_walks(2, 6) {
        let mut cur = w.clone();
        let mut removed = Vec::new();
        loop {
            match cur.single_loop_erase() {
                (next, Some(l)) => {
                    removed.push(l);
                    cur = next;
                }
                (_, None) => break,
            }
        }
        let le = w.loop_erase(&ctx);
        assert_eq!(le.saw, cur);
        assert_eq!(le.erased, removed);
        assert_eq!(le.record.count(), removed.len());
    }
}

#[test]
fn sap_keys_are_isometry_and_translation_invariant() {
    let ctx = GraphCtx::lattice(2);
    let l = Walk::from_coords(&[&[0, 0], &[1, 0], &[2, 0], &[2, 1], &[1, 1], &[0, 1], &[0, 0]]);
    let key = SapKey::new(&l, &ctx);
    let shift = p(&[3, -7]);
    for g in point_group(2) {
        let image = Walk(l.0.iter().map(|x| apply_isometry(&g, x).add(&shift)).collect());
        assert_eq!(SapKey::new(&image, &ctx), key);
        // Rotating the starting vertex and reversing keep the class.
        let mut rot: Vec<Point> = image.0[2..].to_vec();
        rot.extend_from_slice(&image.0[1..3]);
        assert_eq!(SapKey::new(&Walk(rot.clone()), &ctx), key);
        rot.reverse();
        assert_eq!(SapKey::new(&Walk(rot), &ctx), key);
    }
    assert_eq!(point_group(2).len(), 8);
    assert_eq!(point_group(3).len(), 48);
    let square = Walk::from_coords(&[&[0, 0], &[1, 0], &[1, 1], &[0, 1], &[0, 0]]);
    assert_ne!(SapKey::new(&square, &ctx), key);
}

#[test]
fn preimage_segments_reassemble() {
    let ctx = GraphCtx::lattice(2);
    let saw = Walk::from_coords(&[&[0, 0], &[1, 0], &[1, 1]]);
    assert_eq!(saw.preimage_segments(&[0, 2]).unwrap(), vec![saw.clone()]);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let w = random_walk(2, rng.random_range(0..=12), &mut rng);
        let eta = w.loop_erase_raw().0;
        let k = eta.len();
        let cuts: Vec<usize> = std::iter::once(0)
            .chain((1..k).filter(|_| rng.random_bool(0.5)))
            .chain(std::iter::once(k))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let segs = w.preimage_segments(&cuts).unwrap();
        let mut joined = segs[0].clone();
        for s in &segs[1..] {
            joined = joined.diamond_concat(s, &ctx).unwrap();
        }
        assert_eq!(joined, w);
        for (i, s) in segs.iter().enumerate().take(cuts.len() - 1) {
            let hi = if cuts[i + 1] == k { k } else { cuts[i + 1] - 1 };
            assert_eq!(s.loop_erase_raw().0, eta.sub(cuts[i], hi));
            // Later segments stay off the loop erasure built before them.
            let before: BTreeSet<&Point> = eta.0[..cuts[i]].iter().collect();
            assert!(s.0.iter().all(|x| !before.contains(x)));
        }
    }
    // A later segment can revisit its own first vertex.
    let segs = Walk::line(&[0, 1, 2, 1, 2]).preimage_segments(&[0, 1, 2]).unwrap();
    assert_eq!(segs, vec![Walk::line(&[0]), Walk::line(&[1, 2, 1, 2])]);
    assert!(saw.preimage_segments(&[0, 1]).is_err());
    assert!(saw.preimage_segments(&[0, 1, 1, 2]).is_err());
}

#[test]
fn shrinking_times_cases() {
    let eta = Walk::line(&[0, 1, 2]);
    assert_eq!(Walk::line(&[2, 3, 4, 3]).shrinking_times(&eta).unwrap(), vec![]);
    assert!(Walk::line(&[1, 2]).shrinking_times(&eta).is_err());
    // The walk hits eta_2 = (0,2) first, then the erased portion again at
    // (0,1) and (0,2); only the first hit below each shrinking time counts.
    let eta = Walk::from_coords(&[&[0, 0], &[0, 1], &[0, 2], &[0, 3], &[1, 3]]);
    let w = Walk::from_coords(&[&[1, 3], &[1, 2], &[0, 2], &[1, 2], &[1, 1], &[0, 1], &[0, 2], &[-1, 2]]);
    let times = w.shrinking_times(&eta).unwrap();
    assert_eq!(times, vec![(2, 2), (5, 1)]);
    assert!(!times.iter().any(|&(s, _)| s == 6));

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..200 {
        let base = random_walk(2, 10, &mut rng);
        let eta = base.loop_erase_raw().0;
        let tail = random_walk(2, 10, &mut rng);
        let w = Walk(tail.0.iter().map(|x| x.add(eta.end())).collect());
        let t = w.shrinking_times(&eta).unwrap();
        assert!(t.windows(2).all(|p| p[0].1 > p[1].1 && p[0].0 < p[1].0));
    }
}

#[test]
fn walk_weight_examples() {
    let ctx = GraphCtx::lattice(1);
    let half = LoopActivity::ratio(1, 2);
    assert_eq!(walk_weight(&Walk::line(&[0, 1, 2]), &half, &ctx), (2, Q::one()));
    assert_eq!(walk_weight(&Walk::line(&[0, 1, 0, -1]), &half, &ctx), (3, qr(1, 2)));
    for w in oracle::all_walks(1, 6) {
        assert_eq!(walk_weight(&w, &LoopActivity::from_int(1), &ctx).1, Q::one());
    }
    let mut map = std::collections::HashMap::new();
    map.insert(SapKey::new(&Walk::line(&[0, 1, 0]), &ctx), qr(3, 1));
    let table = LoopActivity::Table { map, default: qr(1, 5) };
    assert_eq!(walk_weight(&Walk::line(&[0, 1, 0, 1, 0]), &table, &ctx).1, qr(9, 1));
    assert_eq!(table.sup(), qr(3, 1));
}

#[test]
fn non_repulsiveness_witnesses_exist_in_both_directions() {
    let (more, fewer) = non_repulsiveness_witnesses(2, 6).unwrap();
    let (more, fewer) = (more.unwrap(), fewer.unwrap());
    for w in [&more, &fewer] {
        assert!(w.first.len() <= 6 && w.second.len() <= 6);
        assert_eq!(w.separate, w.first.loop_count() + w.second.loop_count());
        assert_eq!(w.joined, w.first.concat(&w.second).unwrap().loop_count());
    }
    assert!(more.joined > more.separate);
    assert!(fewer.joined < fewer.separate);
}

#[test]
fn graph_file_parsing() {
    let g = FiniteGraph::from_json(r#"{"vertices": [[0,0],[1,0],[1,1]], "edges": [[0,1],[1,2]]}"#).unwrap();
    assert_eq!(g.vertices().len(), 3);
    assert_eq!(g.edge_list(), vec![(0, 1), (1, 2)]);
    let line = FiniteGraph::from_json(r#"{"vertices": [0, 1, 2], "edges": [[0,1],[1,2]]}"#).unwrap();
    assert_eq!(line.vertices()[2], Point(vec![2]));
    assert!(matches!(FiniteGraph::from_json("{"), Err(lwwlab::LwwError::Parse(_))));
    assert!(FiniteGraph::from_json(r#"{"vertices": [[0,0],[1]], "edges": []}"#).is_err());
    assert!(matches!(FiniteGraph::from_json(r#"{"vertices": [0], "edges": [[0,3]]}"#), Err(lwwlab::LwwError::Domain(_))));
}
