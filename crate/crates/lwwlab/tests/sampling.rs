use std::collections::HashMap;

use lwwlab::enumerate::{loop_count_table, Budget};
use lwwlab::oracle;
use lwwlab::sampling::*;
use lwwlab::series::{q, q_to_f64, qr};
use lwwlab::{GraphCtx, LoopActivity, LwwError, Point, Q, Walk};

fn cfg(d: usize, n: usize, lambda: Q, num_samples: usize, seed: u64) -> SamplerConfig {
    SamplerConfig { d, n, lambda, num_samples, seed, method: Method::ImportanceSrw }
}

/// Brute-force mean-square displacement over the naive walk list.
fn brute_msd(d: usize, n: usize, lambda: &Q) -> Q {
    let (mut num, mut den) = (q(0), q(0));
    for w in oracle::all_walks(d, n) {
        let f = num_traits::pow(lambda.clone(), oracle_loops(&w));
        num += &f * q(w.end().norm2());
        den += f;
    }
    num / den
}

fn oracle_loops(w: &Walk) -> usize {
    let mut cur = w.0.clone();
    let mut k = 0;
    'outer: loop {
        for j in 0..cur.len() {
            if let Some(i) = cur[..j].iter().position(|p| *p == cur[j]) {
                cur.drain(i + 1..=j);
                k += 1;
                continue 'outer;
            }
        }
        return k;
    }
}

#[test]
fn exact_msd_examples() {
    let b = Budget::default();
    for d in 1..=3 {
        for n in 0..=8 {
            assert_eq!(msd_exact(n, d, &LoopActivity::from_int(1), b).unwrap(), q(n as i64));
        }
    }
    for lambda in [qr(1, 3), q(0), q(5)] {
        let act = LoopActivity::constant(lambda.clone());
        assert_eq!(msd_exact(1, 2, &act, b).unwrap(), q(1));
        assert_eq!(msd_exact(2, 1, &act, b).unwrap(), q(4) / (q(1) + &lambda));
        assert_eq!(msd_exact(6, 2, &act, b).unwrap(), brute_msd(2, 6, &lambda));
    }
    let table = LoopActivity::Table { map: HashMap::new(), default: qr(3, 2) };
    assert_eq!(msd_exact(5, 2, &table, b).unwrap(), msd_exact(5, 2, &LoopActivity::ratio(3, 2), b).unwrap());
    assert!(matches!(msd_exact(12, 2, &table, Budget::new(1000)), Err(LwwError::Resource(_))));
}

#[test]
fn importance_sampling_at_lambda_one_is_plain_average() {
    let e = msd_importance(&cfg(2, 8, q(1), 200_000, 3)).unwrap();
    assert!(e.covers(8.0, 3.0), "{e:?}");
    let recs = srw_samples(&cfg(2, 8, q(1), 1000, 3)).unwrap();
    let mean = recs.iter().map(|r| r.norm2() as f64).sum::<f64>() / 1000.0;
    let small = msd_importance(&cfg(2, 8, q(1), 1000, 3)).unwrap();
    assert!((small.estimate - mean).abs() < 1e-9);
}

#[test]
fn importance_sampling_matches_exact_values() {
    for lambda in [qr(1, 2), q(2)] {
        let exact = q_to_f64(&msd_exact(10, 2, &LoopActivity::constant(lambda.clone()), Budget::default()).unwrap());
        let e = msd_importance(&cfg(2, 10, lambda.clone(), 200_000, 17)).unwrap();
        assert!(e.covers(exact, 3.0), "{lambda} {e:?} {exact}");
        assert!(e.stderr > 0.0);
    }
}

#[test]
fn importance_sampling_refuses_lambda_zero() {
    assert!(matches!(msd_importance(&cfg(2, 4, q(0), 10, 1)), Err(LwwError::Unsupported(_))));
    assert!(msd_importance(&cfg(2, 4, q(1), 0, 1)).is_err());
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let c = cfg(2, 10, qr(1, 2), 50_000, 99);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(|| msd_importance(&c).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.estimate.to_bits(), four.estimate.to_bits());
    assert_eq!(one.stderr.to_bits(), four.stderr.to_bits());
    assert_ne!(msd_importance(&cfg(2, 10, qr(1, 2), 50_000, 100)).unwrap(), one);
}

#[test]
fn loop_counts_of_samples_are_correct() {
    // Replay each sample's stream: step s moves along axis s/2, forward
    // when s is even.
    use rand::Rng;
    let (d, n) = (2, 9);
    for r in srw_samples(&cfg(d, n, q(1), 300, 5)).unwrap() {
        let mut rng = sample_rng(5, r.index as u64);
        let mut pts = vec![Point::origin(d)];
        for _ in 0..n {
            let s = rng.random_range(0..2 * d);
            let step = Point::unit(d, s / 2, if s % 2 == 0 { 1 } else { -1 });
            pts.push(pts.last().unwrap().add(&step));
        }
        let w = Walk(pts);
        assert_eq!(r.loop_count, oracle_loops(&w));
        assert_eq!(&r.end, w.end());
    }
    let walks = sample_exact(7, 2, &LoopActivity::from_int(1), 4, 300, Budget::default()).unwrap();
    for w in &walks {
        GraphCtx::lattice(2).check_walk(w).unwrap();
        assert_eq!(w.len(), 7);
    }
}

#[test]
fn exact_sampler_is_uniform_at_lambda_one() {
    let draws = sample_exact(3, 1, &LoopActivity::from_int(1), 7, 16_000, Budget::default()).unwrap();
    let mut counts: HashMap<Walk, f64> = HashMap::new();
    for w in draws {
        GraphCtx::lattice(1).check_walk(&w).unwrap();
        *counts.entry(w).or_default() += 1.0;
    }
    assert_eq!(counts.len(), 8);
    let expected = 2000.0;
    let chi2: f64 = counts.values().map(|c| (c - expected).powi(2) / expected).sum();
    // 7 degrees of freedom; the 0.999 quantile is 24.3.
    assert!(chi2 < 24.3, "chi2 = {chi2}");
}

#[test]
fn exact_sampler_at_lambda_zero_draws_self_avoiding_walks() {
    let draws = sample_exact(4, 2, &LoopActivity::from_int(0), 2, 10_000, Budget::default()).unwrap();
    let mut counts: HashMap<Walk, f64> = HashMap::new();
    for w in draws {
        assert!(w.is_self_avoiding());
        *counts.entry(w).or_default() += 1.0;
    }
    assert_eq!(counts.len() as u64, oracle::saw_count(2, 4));
    let expected = 10_000.0 / 100.0;
    let chi2: f64 = counts.values().map(|c| (c - expected).powi(2) / expected).sum();
    // 99 degrees of freedom; the 0.999 quantile is 148.2.
    assert!(chi2 < 148.2, "chi2 = {chi2}");
}

#[test]
fn exact_sampler_return_probability() {
    let n = 20_000;
    let draws = sample_exact(2, 1, &LoopActivity::from_int(3), 11, n, Budget::default()).unwrap();
    let returns = draws.iter().filter(|w| *w.end() == Point::origin(1)).count() as f64;
    let p = 0.75;
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    assert!((returns / n as f64 - p).abs() < 4.0 * sd);
}

#[test]
fn exact_sampler_loop_count_frequencies() {
    let (n, lambda) = (6, qr(5, 2));
    let table = loop_count_table(n, 2, false, Budget::default()).unwrap();
    let c = table.c_n(n, &lambda);
    let draws = 20_000;
    let recs = exact_samples(
        &SamplerConfig { d: 2, n, lambda: lambda.clone(), num_samples: draws, seed: 8, method: Method::ExactTable },
        Budget::default(),
    )
    .unwrap();
    let mut seen = [0f64; 4];
    for r in &recs {
        seen[r.loop_count] += 1.0;
    }
    for (k, &s) in seen.iter().enumerate() {
        let p = q_to_f64(&(q(table.entry(n, k) as i64) * num_traits::pow(lambda.clone(), k) / &c));
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        assert!((s / draws as f64 - p).abs() <= 4.0 * sd + 1e-12, "k={k}");
    }
    let mut sampler = ExactSampler::new(n, 2, &LoopActivity::constant(lambda.clone()), Budget::default()).unwrap();
    assert_eq!(sampler.total(), c);
}

#[test]
fn exact_sampler_refuses_unsupported_inputs() {
    let table = LoopActivity::Table { map: HashMap::new(), default: q(1) };
    assert!(matches!(ExactSampler::new(3, 1, &table, Budget::default()), Err(LwwError::Unsupported(_))));
    assert!(matches!(
        ExactSampler::new(20, 2, &LoopActivity::from_int(1), Budget::new(1000)),
        Err(LwwError::Resource(_))
    ));
}
