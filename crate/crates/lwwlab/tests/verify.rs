use lwwlab::series::qr;
use lwwlab::verify::*;
use lwwlab::{LwwError, Point, SpatialSeries, ZSeries};

#[test]
fn equality_reports_first_divergent_coefficient() {
    let a = ZSeries::from_ints(4, &[1, 2, 3, 4, 5]);
    let mut b = a.clone();
    b.set_coeff(3, qr(7, 2));
    b.set_coeff(4, qr(0, 1));
    let x = Point(vec![1, 0]);
    let c = Check::equal("case", &a, &b, Some(&x));
    assert!(!c.passed);
    let d = c.divergence.unwrap();
    assert_eq!((d.order, d.x, d.lhs.as_str(), d.rhs.as_str()), (3, Some(x), "4", "7/2"));
    assert!(Check::equal("same", &a, &a, None).passed);
}

#[test]
fn spatial_equality_and_bounds() {
    let mut a = SpatialSeries::new(2);
    a.insert(Point(vec![0]), ZSeries::from_ints(2, &[1, 0, 2]));
    let mut b = a.clone();
    b.insert(Point(vec![3]), ZSeries::from_ints(2, &[0, 1, 0]));
    let d = Check::equal_spatial("s", &a, &b).divergence.unwrap();
    assert_eq!((d.order, d.x), (1, Some(Point(vec![3]))));

    let lo = ZSeries::from_ints(2, &[1, 5, 0]);
    let hi = ZSeries::from_ints(2, &[1, 4, 9]);
    let c = Check::at_most("b", &lo, &hi, None);
    assert_eq!(c.divergence.unwrap().order, 1);
    assert!(Check::at_most("b", &ZSeries::zero(2), &hi, None).passed);
}

#[test]
fn merged_checks_keep_the_first_failure() {
    let ok = Check::boolean("a", true, "");
    let bad = Check::boolean("b", false, "broken");
    let worse = Check::boolean("c", false, "later");
    let m = Check::all("group", vec![ok.clone(), bad, worse]);
    assert!(!m.passed);
    assert_eq!(m.detail, "b: broken");
    assert_eq!(Check::all("group", vec![ok.clone(), ok]).detail, "2 cases");
}

#[test]
fn suite_names() {
    assert_eq!(suite_criteria("all").unwrap(), (1..=12).collect::<Vec<_>>());
    assert_eq!(suite_criteria("core").unwrap(), vec![1, 2]);
    for s in SUITES {
        assert!(!suite_criteria(s).unwrap().is_empty());
    }
    assert!(matches!(suite_criteria("bogus"), Err(LwwError::Parse(_))));
    assert!(criterion(13, &Params::default()).is_err());
}

#[test]
fn small_suites_run_with_overrides() {
    let p = Params { d: Some(1), lambda: Some(qr(1, 2)), nmax: Some(5), ..Params::default() };
    for name in ["core", "lm-rep", "lace-eq", "visits"] {
        for r in run_suite(name, &p).unwrap() {
            assert!(r.passed(), "{}", r.summary());
        }
    }
    let r = &run_suite("inequalities", &p).unwrap()[0];
    let failing: Vec<&str> = r.failures().map(|c| c.name.as_str()).collect();
    assert_eq!(failing, ["BC-Bound d=1 lambda=1/2"]);
    assert!(r.summary().starts_with("FAIL [ 9]"));
}
