use std::process::{Command, Output};

fn lww(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lww")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// CSV body without the metadata lines.
fn rows(o: &Output) -> Vec<Vec<String>> {
    stdout(o)
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).unwrap()
}

#[test]
fn enumerate_row_three_in_one_dimension() {
    let o = lww(&["enumerate", "--d", "1", "--n", "3"]);
    assert_eq!(o.status.code(), Some(0));
    let r = rows(&o);
    assert_eq!(&r[3][..3], &["3", "2", "6"]);
    assert!(stdout(&o).starts_with("# version: "));
}

#[test]
fn chi_at_lambda_one() {
    let o = lww(&["chi", "--d", "2", "--lambda", "1", "--nmax", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let coeffs: Vec<String> = rows(&o).into_iter().map(|r| r[1].clone()).collect();
    assert_eq!(coeffs, ["1", "4", "16", "64", "256", "1024"]);
    let j = json(&lww(&["chi", "--d", "2", "--nmax", "5", "--format", "json"]));
    assert_eq!(j["data"]["chi"][5], "1024");
    assert_eq!(j["metadata"]["truncation"], "5");
}

#[test]
fn verify_lm_rep_passes() {
    let o = lww(&["verify", "lm-rep", "--d", "2", "--lambda", "1/2", "--nmax", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("PASS"));
}

#[test]
fn verify_reports_the_false_bubble_chain_bound() {
    let o = lww(&["verify", "inequalities", "--d", "1", "--lambda", "1", "--nmax", "6", "--format", "json"]);
    assert_eq!(o.status.code(), Some(1));
    let j = json(&o);
    let failed: Vec<&serde_json::Value> = j["data"].as_array().unwrap().iter().filter(|c| c["passed"] == false).collect();
    assert_eq!(failed.len(), 1);
    assert!(failed[0]["check"].as_str().unwrap().starts_with("BC-Bound"));
    let div = &failed[0]["divergence"];
    assert_eq!((div["order"].as_u64(), div["lhs"].as_str(), div["rhs"].as_str()), (Some(4), Some("6"), Some("4")));
}

#[test]
fn flag_errors_exit_two() {
    for args in [
        &["chi", "--lambda", "abc"][..],
        &["chi", "--lambda", "-1"],
        &["chi", "--bogus"],
        &["verify", "nope"],
        &["two-point", "--x", "1,a"],
        &["sample", "--threads", "0"],
        &["msd", "--lambda", "0", "--samples", "3"],
    ] {
        assert_eq!(lww(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn budget_from_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_lww"))
        .args(["chi", "--nmax", "8"])
        .env("LWW_BUDGET", "100")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("resource limit"));
}

#[test]
fn output_file_carries_metadata() {
    let dir = std::env::temp_dir().join(format!("lww-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("samples.csv");
    let o = lww(&["sample", "--n", "6", "--samples", "5", "--seed", "3", "--output", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    for key in ["# version:", "# command:", "# seed: 3", "# n: 6"] {
        assert!(text.contains(key), "{key}");
    }
    assert!(text.contains("sample_index,loop_count,end_x1,end_x2,end_norm2"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn sampling_output_ignores_thread_count() {
    let data = |t: &str| {
        let o = lww(&["msd", "--n", "8", "--lambda", "2", "--samples", "20000", "--seed", "5", "--threads", t]);
        rows(&o)
    };
    assert_eq!(data("1"), data("3"));
    let s = |t: &str| rows(&lww(&["sample", "--samples", "50", "--seed", "9", "--threads", t]));
    assert_eq!(s("1"), s("2"));
}

#[test]
fn sample_records_are_consistent() {
    for method in ["importance", "exact"] {
        let o = lww(&["sample", "--d", "2", "--n", "7", "--lambda", "2", "--samples", "20", "--method", method]);
        assert_eq!(o.status.code(), Some(0));
        for r in rows(&o) {
            let (x, y, n2): (i64, i64, i64) = (r[2].parse().unwrap(), r[3].parse().unwrap(), r[4].parse().unwrap());
            assert_eq!(x * x + y * y, n2);
            assert_eq!((x + y).rem_euclid(2), 1);
        }
    }
}

#[test]
fn msd_exact_value() {
    let o = lww(&["msd", "--d", "1", "--n", "2", "--lambda", "3"]);
    // Two 2-step walks reach |x|^2 = 4 with no loop and two return with
    // one, so the average is 8 / (2 + 2 lambda).
    assert_eq!(rows(&o)[0][1], "1");
    let o = lww(&["msd", "--d", "2", "--n", "5", "--lambda", "1"]);
    assert_eq!(rows(&o)[0][1], "5");
}

#[test]
fn pi_direct_matches_oracle() {
    let a = json(&lww(&["pi", "--d", "1", "--lambda", "2", "--nmax", "5", "--format", "json"]));
    let b = json(&lww(&["pi", "--d", "1", "--lambda", "2", "--nmax", "5", "--method", "oracle", "--format", "json"]));
    assert_eq!(a["data"], b["data"]);
    assert_eq!(a["metadata"]["method"], "direct");
}

#[test]
fn graph_file_input() {
    let dir = std::env::temp_dir().join(format!("lww-graph-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("square.json");
    std::fs::write(&path, r#"{"vertices": [[0,0],[1,0],[1,1],[0,1]], "edges": [[0,1],[1,2],[2,3],[3,0]]}"#).unwrap();
    let p = path.to_str().unwrap();
    let o = lww(&["two-point", "--graph", p, "--nmax", "4", "--x", "1,1"]);
    assert_eq!(o.status.code(), Some(0));
    // Two 2-step paths to the opposite corner; at order 4 each of the
    // eight walks there erases exactly one loop.
    assert_eq!(rows(&o)[0], ["1", "1", "0", "0", "2", "0", "8"]);
    assert!(stdout(&o).contains(&format!("# graph: {p}")));
    let o = lww(&["chi", "--graph", p, "--nmax", "2", "--lambda", "0"]);
    let c: Vec<String> = rows(&o).into_iter().map(|r| r[1].clone()).collect();
    assert_eq!(c, ["1", "2", "2"]);
    std::fs::write(&path, "{").unwrap();
    assert_eq!(lww(&["chi", "--graph", p]).status.code(), Some(2));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn loop_measure_and_alpha() {
    let o = lww(&["loop-measure", "--d", "1", "--lambda", "5", "--nmax", "4", "--a", "0|1"]);
    assert_eq!(rows(&o)[2][1], "5");
    let o = lww(&["alpha", "--d", "1", "--lambda", "1", "--nmax", "2"]);
    assert_eq!(rows(&o)[2], ["2", "2", "1"]);
}

#[test]
fn analyze_reports_per_order_columns() {
    let o = lww(&["analyze", "--d", "2", "--lambda", "1", "--nmax", "8"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("order,ratio,aitken,intercept"));
    assert!(text.contains("# extrapolated: 0.250000000000"));
    let j = json(&lww(&["analyze", "--quantity", "d", "--d", "1", "--nmax", "9", "--format", "json"]));
    assert!((j["data"]["extrapolated"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}
