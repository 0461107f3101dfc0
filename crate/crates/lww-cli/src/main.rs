use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use lwwlab::analysis::{lace_constants, zc_ratio_estimate, LaceSeries, SeriesEstimate};
use lwwlab::enumerate::{
    alpha, alpha0, generalized_loop_measure, loop_count_table, loop_measure, reference_neighbor, susceptibility,
    two_point, two_point_all, Budget, LoopCatalogue,
};
use lwwlab::expansion::Expansion;
use lwwlab::sampling::{exact_samples, msd_exact, msd_importance, srw_samples, Method, SampleRecord, SamplerConfig};
use lwwlab::series::{fmt_q, parse_q, q_to_f64};
use lwwlab::verify::{run_suite, Params, SuiteReport, SUITES};
use lwwlab::walk::FiniteGraph;
use lwwlab::{GraphCtx, LoopActivity, LwwError, Point, SpatialSeries, ZSeries, Q};

#[derive(Parser)]
#[command(name = "lww", version, about = "Exact series, identity checks and sampling for the loop-weighted walk")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Worker threads for parallel stages. Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the result here instead of standard output.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone)]
struct Model {
    /// Lattice dimension.
    #[arg(long = "d", default_value_t = 2)]
    d: usize,
    /// Loop activity as "p/q".
    #[arg(long, default_value = "1", value_parser = parse_lambda)]
    lambda: Q,
    /// Truncation order.
    #[arg(long, default_value_t = 10)]
    nmax: usize,
}

#[derive(Args, Clone)]
struct GraphArgs {
    /// Finite graph as JSON {"vertices": [...], "edges": [[i, j], ...]};
    /// replaces Z^d.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// Starting point as comma-separated coordinates. Defaults to the
    /// origin of Z^d or the first vertex of the graph.
    #[arg(long)]
    origin: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Loop-count table N(n, k) of walks from the origin.
    Enumerate {
        #[arg(long = "d", default_value_t = 2)]
        d: usize,
        /// Largest walk length.
        #[arg(long, default_value_t = 10)]
        n: usize,
    },
    /// Two-point function at one point, or at every reachable point.
    TwoPoint {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        graph: GraphArgs,
        /// Endpoint as comma-separated coordinates.
        #[arg(long)]
        x: Option<String>,
    },
    /// Susceptibility series.
    Chi {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Loop measure of loops hitting every set in --a and avoiding --b.
    LoopMeasure {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        graph: GraphArgs,
        /// Sets to hit, points separated by ';', sets by '|'.
        #[arg(long)]
        a: String,
        /// Points to avoid, separated by ';'.
        #[arg(long, default_value = "")]
        b: String,
    },
    /// Closed-walk series alpha_0 and alpha.
    Alpha {
        #[command(flatten)]
        model: Model,
        #[command(flatten)]
        graph: GraphArgs,
    },
    /// Lace-expansion coefficient Pi(x).
    Pi {
        #[arg(long = "d", default_value_t = 2)]
        d: usize,
        #[arg(long, default_value = "1", value_parser = parse_lambda)]
        lambda: Q,
        #[arg(long, default_value_t = 6)]
        nmax: usize,
        #[arg(long, value_enum, default_value_t = PiMethod::Direct)]
        method: PiMethod,
    },
    /// Run an identity suite; exits 1 on any failure.
    Verify {
        /// One of all, core, lm-rep, heaps, cycle-gas, laces, lace-eq,
        /// visits, inequalities, sampling, analysis, witnesses.
        suite: String,
        #[arg(long = "d")]
        d: Option<usize>,
        #[arg(long, value_parser = parse_lambda)]
        lambda: Option<Q>,
        #[arg(long)]
        nmax: Option<usize>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seeds: Option<u64>,
    },
    /// Draw walks and print their loop counts and endpoints.
    Sample {
        #[arg(long = "d", default_value_t = 2)]
        d: usize,
        #[arg(long, default_value = "1", value_parser = parse_lambda)]
        lambda: Q,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = SampleMethod::Importance)]
        method: SampleMethod,
    },
    /// Mean-square displacement, exact and optionally sampled.
    Msd {
        #[arg(long = "d", default_value_t = 2)]
        d: usize,
        #[arg(long, default_value = "1", value_parser = parse_lambda)]
        lambda: Q,
        #[arg(long, default_value_t = 10)]
        n: usize,
        /// Also run the importance sampler with this many samples.
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Per-order series analysis.
    Analyze {
        #[command(flatten)]
        model: Model,
        #[arg(long, value_enum, default_value_t = Quantity::Zc)]
        quantity: Quantity,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PiMethod {
    Direct,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum SampleMethod {
    Importance,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum Quantity {
    Zc,
    A,
    D,
}

fn parse_lambda(s: &str) -> Result<Q, String> {
    let q = parse_q(s).map_err(|e| e.to_string())?;
    if q < Q::from_integer(0.into()) {
        return Err("loop activity must be nonnegative".into());
    }
    Ok(q)
}

fn parse_point(s: &str) -> Result<Point, LwwError> {
    s.split(',')
        .map(|c| c.trim().parse::<i32>().map_err(|_| LwwError::Parse(format!("bad coordinate '{c}' in '{s}'"))))
        .collect::<Result<Vec<_>, _>>()
        .map(Point)
}

fn parse_points(s: &str) -> Result<Vec<Point>, LwwError> {
    s.split(';').filter(|p| !p.trim().is_empty()).map(parse_point).collect()
}

/// A result ready to be written as CSV or JSON.
struct Output {
    meta: Vec<(String, String)>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    json: Value,
}

impl Output {
    fn new(header: Vec<String>, rows: Vec<Vec<String>>, json: Value) -> Self {
        Output { meta: Vec::new(), header, rows, json }
    }

    fn meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    fn render(&self, format: Format) -> Result<String, LwwError> {
        let mut meta = vec![
            ("version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
            ("command".to_string(), std::env::args().skip(1).collect::<Vec<_>>().join(" ")),
        ];
        meta.extend(self.meta.iter().cloned());
        match format {
            Format::Json => {
                let m: serde_json::Map<String, Value> = meta.into_iter().map(|(k, v)| (k, Value::String(v))).collect();
                let doc = json!({ "metadata": m, "data": self.json });
                Ok(serde_json::to_string_pretty(&doc).expect("serializable") + "\n")
            }
            Format::Csv => {
                let mut out = String::new();
                for (k, v) in meta {
                    out.push_str(&format!("# {k}: {v}\n"));
                }
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.header).map_err(|e| LwwError::Parse(e.to_string()))?;
                for r in &self.rows {
                    w.write_record(r).map_err(|e| LwwError::Parse(e.to_string()))?;
                }
                let bytes = w.into_inner().map_err(|e| LwwError::Parse(e.to_string()))?;
                out.push_str(&String::from_utf8(bytes).expect("utf8"));
                Ok(out)
            }
        }
    }
}

fn model_meta(out: Output, m: &Model) -> Output {
    out.meta("d", m.d).meta("lambda", fmt_q(&m.lambda)).meta("truncation", m.nmax)
}

fn graph_meta(out: Output, m: &Model, g: &GraphArgs) -> Output {
    match &g.graph {
        Some(path) => out.meta("graph", path.display()).meta("lambda", fmt_q(&m.lambda)).meta("truncation", m.nmax),
        None => model_meta(out, m),
    }
}

fn series_output(s: &ZSeries, name: &str) -> Output {
    let rows = s.coeffs().iter().enumerate().map(|(n, c)| vec![n.to_string(), fmt_q(c)]).collect();
    Output::new(vec!["n".into(), name.into()], rows, json!({ name: s.to_strings() }))
}

fn spatial_output(s: &SpatialSeries, d: usize) -> Output {
    let mut header: Vec<String> = (1..=d).map(|i| format!("x_{i}")).collect();
    header.extend((0..=s.nmax()).map(|n| format!("z^{n}")));
    let rows = s
        .iter()
        .map(|(x, v)| x.0.iter().map(|c| c.to_string()).chain(v.to_strings()).collect())
        .collect();
    Output::new(header, rows, s.to_json())
}

fn context(m: &Model, g: &GraphArgs) -> Result<(GraphCtx, Point), LwwError> {
    let ctx = match &g.graph {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| LwwError::Parse(format!("{}: {e}", path.display())))?;
            GraphCtx::Finite(FiniteGraph::from_json(&text)?)
        }
        None => GraphCtx::lattice(m.d),
    };
    let origin = match (&g.origin, &ctx) {
        (Some(s), _) => parse_point(s)?,
        (None, GraphCtx::Lattice(d)) => Point::origin(*d),
        (None, GraphCtx::Finite(f)) => {
            f.vertices().first().cloned().ok_or_else(|| LwwError::Precondition("the graph has no vertices".into()))?
        }
    };
    Ok((ctx, origin))
}

fn dim_of(ctx: &GraphCtx, origin: &Point) -> usize {
    match ctx {
        GraphCtx::Lattice(d) => *d,
        GraphCtx::Finite(_) => origin.dim(),
    }
}

fn estimate_output(e: &SeriesEstimate) -> Output {
    let mut header = vec!["order".to_string()];
    header.extend(e.columns.iter().cloned());
    let rows = e
        .rows
        .iter()
        .map(|r| {
            std::iter::once(r.order.to_string())
                .chain(r.values.iter().map(|v| v.map(|x| format!("{x:.12}")).unwrap_or_default()))
                .collect()
        })
        .collect();
    let json = json!({
        "quantity": e.quantity,
        "method": e.method,
        "columns": e.columns,
        "rows": e.rows.iter().map(|r| json!({"order": r.order, "values": r.values})).collect::<Vec<_>>(),
        "extrapolated": e.extrapolated,
        "order": e.order,
        "sensitivity": e.sensitivity,
        "warning": e.warning,
    });
    let mut out = Output::new(header, rows, json)
        .meta("quantity", &e.quantity)
        .meta("method", &e.method)
        .meta("extrapolated", format!("{:.12}", e.extrapolated))
        .meta("reported_order", e.order);
    if let Some((lo, hi)) = e.sensitivity {
        out = out.meta("sensitivity", format!("{lo:.12} {hi:.12}"));
    }
    if let Some(w) = &e.warning {
        out = out.meta("warning", w);
    }
    out
}

fn records_output(records: &[SampleRecord], d: usize) -> Output {
    let mut header = vec!["sample_index".to_string(), "loop_count".to_string()];
    header.extend((1..=d).map(|i| format!("end_x{i}")));
    header.push("end_norm2".into());
    let rows = records
        .iter()
        .map(|r| {
            let mut row = vec![r.index.to_string(), r.loop_count.to_string()];
            row.extend(r.end.0.iter().map(|c| c.to_string()));
            row.push(r.norm2().to_string());
            row
        })
        .collect();
    let json = records
        .iter()
        .map(|r| json!({"sample_index": r.index, "loop_count": r.loop_count, "end": r.end.0, "end_norm2": r.norm2()}))
        .collect::<Vec<_>>();
    Output::new(header, rows, Value::Array(json))
}

fn verify_output(reports: &[SuiteReport]) -> Output {
    let header = ["criterion", "check", "passed", "detail", "order", "x", "lhs", "rhs"].map(String::from).to_vec();
    let mut rows = Vec::new();
    let mut json = Vec::new();
    for r in reports {
        for c in &r.checks {
            let div = c.divergence.as_ref();
            rows.push(vec![
                r.criterion.to_string(),
                c.name.clone(),
                c.passed.to_string(),
                c.detail.clone(),
                div.map(|d| d.order.to_string()).unwrap_or_default(),
                div.and_then(|d| d.x.as_ref()).map(|x| format!("{:?}", x.0)).unwrap_or_default(),
                div.map(|d| d.lhs.clone()).unwrap_or_default(),
                div.map(|d| d.rhs.clone()).unwrap_or_default(),
            ]);
            json.push(json!({
                "criterion": r.criterion,
                "check": c.name,
                "passed": c.passed,
                "detail": c.detail,
                "divergence": div.map(|d| json!({"order": d.order, "x": d.x.as_ref().map(|x| x.0.clone()), "lhs": d.lhs, "rhs": d.rhs})),
            }));
        }
    }
    Output::new(header, rows, Value::Array(json))
}

/// Runs a subcommand. The flag records whether a verification failed.
fn run(cmd: Command, budget: Budget) -> Result<(Output, bool), LwwError> {
    let out = match cmd {
        Command::Enumerate { d, n } => {
            let t = loop_count_table(n, d, false, budget)?;
            let kmax = t.counts.iter().map(|r| r.iter().rposition(|&c| c > 0).unwrap_or(0)).max().unwrap_or(0);
            let mut header = vec!["n".to_string()];
            header.extend((0..=kmax).map(|k| format!("N_{k}")));
            header.extend((0..=kmax).map(|k| format!("sq_{k}")));
            let rows = (0..=n)
                .map(|m| {
                    let mut row = vec![m.to_string()];
                    row.extend((0..=kmax).map(|k| t.entry(m, k).to_string()));
                    row.extend((0..=kmax).map(|k| t.sq[m].get(k).copied().unwrap_or(0).to_string()));
                    row
                })
                .collect();
            let json = json!({"d": d, "nmax": n, "counts": t.counts, "sq": t.sq.iter().map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>()).collect::<Vec<_>>()});
            Output::new(header, rows, json).meta("d", d).meta("truncation", n)
        }
        Command::TwoPoint { model, graph, x } => {
            let (ctx, o) = context(&model, &graph)?;
            let act = LoopActivity::constant(model.lambda.clone());
            let out = match x {
                Some(x) => {
                    let x = parse_point(&x)?;
                    let s = two_point(&ctx, &o, &x, &act, model.nmax, false, budget)?;
                    let mut all = SpatialSeries::new(model.nmax);
                    all.insert(x, s);
                    spatial_output(&all, dim_of(&ctx, &o))
                }
                None => spatial_output(&two_point_all(&ctx, &o, &act, model.nmax, budget)?, dim_of(&ctx, &o)),
            };
            graph_meta(out, &model, &graph).meta("origin", format!("{:?}", o.0))
        }
        Command::Chi { model, graph } => {
            let (ctx, o) = context(&model, &graph)?;
            let s = susceptibility(&ctx, &o, &LoopActivity::constant(model.lambda.clone()), model.nmax, budget)?;
            graph_meta(series_output(&s, "chi"), &model, &graph)
        }
        Command::LoopMeasure { model, graph, a, b } => {
            let (ctx, _) = context(&model, &graph)?;
            let cat = LoopCatalogue::build(&ctx, &LoopActivity::constant(model.lambda.clone()), model.nmax, budget)?;
            let sets: Vec<_> = a.split('|').map(|s| parse_points(s).map(|v| v.into_iter().collect())).collect::<Result<_, _>>()?;
            let avoid = parse_points(&b)?.into_iter().collect();
            let s = match sets.as_slice() {
                [one] => loop_measure(&cat, one, &avoid),
                [first, second] => generalized_loop_measure(&cat, first, second, &avoid),
                _ => return Err(LwwError::Precondition("--a takes one or two sets".into())),
            };
            graph_meta(series_output(&s, "mu"), &model, &graph).meta("a", a).meta("b", b)
        }
        Command::Alpha { model, graph } => {
            let (ctx, o) = context(&model, &graph)?;
            let cat = LoopCatalogue::build(&ctx, &LoopActivity::constant(model.lambda.clone()), model.nmax, budget)?;
            let y = reference_neighbor(&ctx, &o)?;
            let (a0, a) = (alpha0(&cat, &o), alpha(&cat, &o, &y));
            let rows = (0..=model.nmax).map(|n| vec![n.to_string(), fmt_q(&a0.coeff(n)), fmt_q(&a.coeff(n))]).collect();
            let json = json!({"alpha0": a0.to_strings(), "alpha": a.to_strings(), "neighbor": y.0});
            graph_meta(Output::new(vec!["n".into(), "alpha0".into(), "alpha".into()], rows, json), &model, &graph)
                .meta("neighbor", format!("{:?}", y.0))
        }
        Command::Pi { d, lambda, nmax, method } => {
            let ex = Expansion::new(&GraphCtx::lattice(d), &LoopActivity::constant(lambda.clone()), nmax, budget)?;
            let (pi, name) = match method {
                PiMethod::Direct => (ex.pi_total()?, "direct"),
                PiMethod::Oracle => (ex.pi_oracle()?, "oracle"),
            };
            spatial_output(&pi, d).meta("d", d).meta("lambda", fmt_q(&lambda)).meta("truncation", nmax).meta("method", name)
        }
        Command::Verify { suite, d, lambda, nmax, samples, seeds } => {
            let params = Params { d, lambda, nmax, samples, seeds, budget };
            let reports = run_suite(&suite, &params)?;
            let mut failed = false;
            for r in &reports {
                eprintln!("{}", r.summary());
                failed |= !r.passed();
            }
            let out = verify_output(&reports).meta("suite", &suite);
            return Ok((out, failed));
        }
        Command::Sample { d, lambda, n, samples, seed, method } => {
            let cfg = SamplerConfig {
                d,
                n,
                lambda: lambda.clone(),
                num_samples: samples,
                seed,
                method: match method {
                    SampleMethod::Importance => Method::ImportanceSrw,
                    SampleMethod::Exact => Method::ExactTable,
                },
            };
            let records = match method {
                SampleMethod::Importance => srw_samples(&cfg)?,
                SampleMethod::Exact => exact_samples(&cfg, budget)?,
            };
            let weighting = match method {
                SampleMethod::Importance => "simple random walk; weight lambda^loop_count",
                SampleMethod::Exact => "exact loop-weighted walk; unit weight",
            };
            records_output(&records, d)
                .meta("d", d)
                .meta("lambda", fmt_q(&lambda))
                .meta("n", n)
                .meta("seed", seed)
                .meta("samples", samples)
                .meta("weighting", weighting)
        }
        Command::Msd { d, lambda, n, samples, seed } => {
            let exact = msd_exact(n, d, &LoopActivity::constant(lambda.clone()), budget)?;
            let mut rows = vec![vec!["exact".to_string(), fmt_q(&exact), format!("{:.12}", q_to_f64(&exact)), String::new()]];
            let mut json = json!({"exact": fmt_q(&exact), "exact_value": q_to_f64(&exact)});
            if let Some(num_samples) = samples {
                let cfg = SamplerConfig { d, n, lambda: lambda.clone(), num_samples, seed, method: Method::ImportanceSrw };
                let e = msd_importance(&cfg)?;
                rows.push(vec!["importance".into(), String::new(), format!("{:.12}", e.estimate), format!("{:.12}", e.stderr)]);
                json["importance"] = json!({"estimate": e.estimate, "stderr": e.stderr, "samples": num_samples});
            }
            Output::new(["method", "exact", "value", "stderr"].map(String::from).to_vec(), rows, json)
                .meta("d", d)
                .meta("lambda", fmt_q(&lambda))
                .meta("n", n)
                .meta("seed", seed)
        }
        Command::Analyze { model, quantity } => {
            let act = LoopActivity::constant(model.lambda.clone());
            let est = match quantity {
                Quantity::Zc => {
                    let chi = loop_count_table(model.nmax, model.d, false, budget)?.chi(&model.lambda);
                    zc_ratio_estimate(&chi)?
                }
                Quantity::A | Quantity::D => {
                    let (a, d) = lace_constants(&LaceSeries::compute(model.d, &act, model.nmax, budget)?)?;
                    if matches!(quantity, Quantity::A) {
                        a
                    } else {
                        d
                    }
                }
            };
            model_meta(estimate_output(&est), &model)
        }
    };
    Ok((out, false))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().expect("thread pool is set once");
    }
    if let Command::Verify { suite, .. } = &cli.command {
        if suite != "all" && !SUITES.contains(&suite.as_str()) {
            eprintln!("error: unknown suite '{suite}'; expected one of all, {}", SUITES.join(", "));
            return ExitCode::from(2);
        }
    }
    let result = run(cli.command, Budget::from_env()).and_then(|(out, failed)| Ok((out.render(cli.format)?, failed)));
    let (text, failed) = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let written = match &cli.output {
        Some(path) => fs::write(path, &text),
        None => io::stdout().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: cannot write output: {e}");
        return ExitCode::from(2);
    }
    if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}
