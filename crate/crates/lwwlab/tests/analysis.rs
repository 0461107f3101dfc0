use lwwlab::analysis::*;
use lwwlab::enumerate::{loop_count_table, Budget};
use lwwlab::series::q;
use lwwlab::{LoopActivity, LwwError, ZSeries};

fn chi(d: usize, lambda: lwwlab::Q, nmax: usize) -> ZSeries {
    loop_count_table(nmax, d, false, Budget::default()).unwrap().chi(&lambda)
}

#[test]
fn ratios_are_exact_for_the_simple_random_walk() {
    for d in 1..=3 {
        let e = zc_ratio_estimate(&chi(d, q(1), 10)).unwrap();
        let target = 1.0 / (2 * d) as f64;
        assert_eq!(e.extrapolated, target);
        for col in ["ratio", "aitken", "intercept"] {
            let v = e.column(col);
            assert!(!v.is_empty());
            assert!(v.iter().all(|&(_, x)| x == target), "{col}");
        }
    }
}

#[test]
fn self_avoiding_walk_estimate() {
    let e = zc_ratio_estimate(&chi(2, q(0), 12)).unwrap();
    assert!(e.extrapolated > 0.37 && e.extrapolated < 0.40, "{}", e.extrapolated);
    assert_eq!(e.rows.len(), 12);
    // Raw columns are kept: the ratios oscillate with parity.
    let r = e.column("ratio");
    assert!(r[9].1 > r[10].1 && r[10].1 < r[11].1);
}

#[test]
fn lambda_two_respects_the_trivial_bound() {
    let e = zc_ratio_estimate(&chi(2, q(2), 12)).unwrap();
    let bound = 1.0 / (4.0 * 2f64.sqrt());
    assert!(e.extrapolated > bound && e.extrapolated < 0.25, "{}", e.extrapolated);
}

#[test]
fn ratio_method_needs_four_coefficients() {
    let s = ZSeries::from_ints(5, &[1, 0, 3, 0, 9]);
    assert!(matches!(zc_ratio_estimate(&s), Err(LwwError::Precondition(_))));
    let gaps = ZSeries::from_ints(8, &[1, 0, 4, 0, 16, 0, 64, 0, 256]);
    let e = zc_ratio_estimate(&gaps).unwrap();
    assert!((e.extrapolated - 0.5).abs() < 1e-15);
    assert!(zc_ratio_estimate(&ZSeries::from_ints(4, &[1, -1, 1, 1, 1])).is_err());
}

#[test]
fn aitken_transform() {
    let geometric: Vec<f64> = (0..6).map(|k| 2.0 - 0.5f64.powi(k)).collect();
    for v in aitken(&geometric) {
        assert!((v - 2.0).abs() < 1e-12);
    }
    assert_eq!(aitken(&[3.0, 3.0, 3.0]), vec![3.0]);
}

#[test]
fn amplitude_and_diffusion_at_lambda_one() {
    for (d, nmax) in [(1, 10), (2, 9)] {
        let series = LaceSeries::compute(d, &LoopActivity::from_int(1), nmax, Budget::default()).unwrap();
        let (a, dd) = lace_constants(&series).unwrap();
        assert!((a.extrapolated - 1.0).abs() < 1e-9, "{}", a.extrapolated);
        assert!((dd.extrapolated - 1.0).abs() < 1e-9, "{}", dd.extrapolated);
        assert_eq!(a.order, 9);
        let check = a.reported("chi_check").unwrap();
        assert!((check - a.extrapolated).abs() < 0.1 * a.extrapolated);
        let (lo, hi) = a.sensitivity.unwrap();
        assert!(lo > 1.0 && hi < 1.0);
        // The denominator-only expression is 1 / alpha_0(z_c).
        let den = a.reported("A_denominator").unwrap();
        let a0 = series.alpha0.truncate(a.order).eval_f64(1.0 / (2 * d) as f64);
        assert!((den * a0 - 1.0).abs() < 1e-9);
        assert!(den < 0.9);
    }
}

#[test]
fn estimates_for_other_activities_are_reported_with_raw_orders() {
    let a = amplitude_a_estimate(2, &LoopActivity::ratio(1, 2), 8, Budget::default()).unwrap();
    assert_eq!(a.rows.len(), 5);
    assert!(a.extrapolated.is_finite() && a.extrapolated > 0.0);
    let csv = a.to_csv();
    assert!(csv.starts_with("order,z_c,A,A_denominator,chi_check\n4,"));
    let d = diffusion_d_estimate(2, &LoopActivity::from_int(2), 8, Budget::default()).unwrap();
    assert!(d.extrapolated > 0.0);
    assert!(d.sensitivity.is_some());
    assert!(amplitude_a_estimate(2, &LoopActivity::from_int(1), 3, Budget::default()).is_err());
}
