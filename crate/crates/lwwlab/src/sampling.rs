//! Monte Carlo estimates for the loop-weighted walk, checked against exact
//! enumeration. This is the only module that uses floating point.
//!
//! Sample `i` of a run with seed `s` draws from its own ChaCha stream
//! (key `s`, stream `i`), and sums are reduced in sample order over fixed
//! chunks, so the output does not depend on the number of worker threads.

use std::collections::HashMap;

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::enumerate::{for_each_walk, loop_count_table, tree_size, Budget};
use crate::error::{precondition, LwwError, Result};
use crate::series::{q, q_to_f64, Q};
use crate::walk::{walk_weight, GraphCtx, LoopActivity, Point, Walk};

const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    ImportanceSrw,
    ExactTable,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub d: usize,
    pub n: usize,
    pub lambda: Q,
    pub num_samples: usize,
    pub seed: u64,
    pub method: Method,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub estimate: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Whether `value` lies within `k` standard errors of the estimate.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.estimate - value).abs() <= k * self.stderr
    }
}

/// One drawn walk, reduced to the columns of the sample CSV.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleRecord {
    pub index: usize,
    pub loop_count: usize,
    pub end: Point,
}

impl SampleRecord {
    pub fn norm2(&self) -> i64 {
        self.end.norm2()
    }
}

/// The random stream of sample `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Exact mean-square displacement `sum |w_n|^2 weight / c_n` over all
/// `n`-step walks from the origin of Z^d.
pub fn msd_exact(n: usize, d: usize, act: &LoopActivity, budget: Budget) -> Result<Q> {
    if let Some(lambda) = act.as_constant() {
        return Ok(loop_count_table(n, d, false, budget)?.msd(n, lambda));
    }
    budget.check(tree_size(2 * d, n), "exact mean-square displacement")?;
    let ctx = GraphCtx::lattice(d);
    let (mut num, mut den) = (Q::zero(), Q::zero());
    for_each_walk(&ctx, &Point::origin(d), n, |w| {
        if w.len() == n {
            let (_, f) = walk_weight(w, act, &ctx);
            num += &f * q(w.end().norm2());
            den += f;
        }
    })?;
    if den.is_zero() {
        return precondition("all walks have zero weight");
    }
    Ok(num / den)
}

/// Chronological loop erasure on a small box, tracking only the number of
/// erased loops.
struct LoopCounter {
    side: i64,
    offset: i64,
    slot: Vec<u32>,
    stack: Vec<usize>,
}

impl LoopCounter {
    fn new(d: usize, n: usize) -> Self {
        let side = 2 * n as i64 + 1;
        LoopCounter { side, offset: n as i64, slot: vec![0; side.pow(d as u32) as usize], stack: Vec::with_capacity(n + 1) }
    }

    fn cell(&self, x: &[i64]) -> usize {
        x.iter().fold(0i64, |acc, &c| acc * self.side + c + self.offset) as usize
    }

    fn reset(&mut self) {
        for &c in &self.stack {
            self.slot[c] = 0;
        }
        self.stack.clear();
    }

    /// Adds the next vertex and reports whether a loop was erased.
    fn visit(&mut self, x: &[i64]) -> bool {
        let c = self.cell(x);
        let at = self.slot[c] as usize;
        if at == 0 {
            self.stack.push(c);
            self.slot[c] = self.stack.len() as u32;
            return false;
        }
        for &other in &self.stack[at..] {
            self.slot[other] = 0;
        }
        self.stack.truncate(at);
        true
    }
}

/// Draws a simple random walk for sample `index` and returns its record.
fn srw_record(cfg: &SamplerConfig, index: usize, counter: &mut LoopCounter) -> SampleRecord {
    let mut rng = sample_rng(cfg.seed, index as u64);
    let mut x = vec![0i64; cfg.d];
    counter.reset();
    counter.visit(&x);
    let mut loops = 0;
    for _ in 0..cfg.n {
        let s = rng.random_range(0..2 * cfg.d);
        x[s / 2] += if s % 2 == 0 { 1 } else { -1 };
        if counter.visit(&x) {
            loops += 1;
        }
    }
    SampleRecord { index, loop_count: loops, end: Point(x.iter().map(|&c| c as i32).collect()) }
}

fn check_config(cfg: &SamplerConfig) -> Result<()> {
    if cfg.d == 0 {
        return precondition("dimension must be positive");
    }
    if cfg.lambda < Q::zero() {
        return precondition("loop activity must be nonnegative");
    }
    if cfg.num_samples == 0 {
        return precondition("need at least one sample");
    }
    Ok(())
}

/// Self-normalized importance sampling from the simple random walk with
/// weights `lambda^{loops}`. The standard error uses the delta method for
/// a ratio estimator.
pub fn msd_importance(cfg: &SamplerConfig) -> Result<Estimate> {
    check_config(cfg)?;
    if cfg.lambda.is_zero() {
        return Err(LwwError::Unsupported(
            "importance sampling from the simple random walk cannot reach lambda = 0".into(),
        ));
    }
    let lambda = q_to_f64(&cfg.lambda);
    let powers: Vec<f64> = (0..=cfg.n).map(|k| lambda.powi(k as i32)).collect();
    let chunks: Vec<Vec<(f64, f64)>> = (0..cfg.num_samples.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut counter = LoopCounter::new(cfg.d, cfg.n);
            (c * CHUNK..((c + 1) * CHUNK).min(cfg.num_samples))
                .map(|i| {
                    let r = srw_record(cfg, i, &mut counter);
                    (powers[r.loop_count], r.norm2() as f64)
                })
                .collect()
        })
        .collect();
    let (mut sw, mut swy) = (0.0, 0.0);
    for &(w, y) in chunks.iter().flatten() {
        sw += w;
        swy += w * y;
    }
    let est = swy / sw;
    let mut s2 = 0.0;
    for &(w, y) in chunks.iter().flatten() {
        s2 += (w * (y - est)).powi(2);
    }
    Ok(Estimate { estimate: est, stderr: s2.sqrt() / sw })
}

/// Loop counts and endpoints of simple random walk samples, as used by the
/// importance sampler. Each record carries weight `lambda^{loop_count}`.
pub fn srw_samples(cfg: &SamplerConfig) -> Result<Vec<SampleRecord>> {
    check_config(cfg)?;
    let mut counter = LoopCounter::new(cfg.d, cfg.n);
    Ok((0..cfg.num_samples).map(|i| srw_record(cfg, i, &mut counter)).collect())
}

/// Exact sampler: each step is drawn with probability proportional to the
/// weighted number of completions of the extended prefix. Completion sums
/// depend only on the loop-erased prefix and the remaining length, and are
/// cached on that key.
pub struct ExactSampler {
    d: usize,
    n: usize,
    lambda: Q,
    cache: HashMap<(Vec<Point>, usize), Q>,
}

impl ExactSampler {
    pub fn new(n: usize, d: usize, act: &LoopActivity, budget: Budget) -> Result<Self> {
        let lambda = act
            .as_constant()
            .cloned()
            .ok_or_else(|| LwwError::Unsupported("the exact sampler needs a constant activity".into()))?;
        budget.check(tree_size(2 * d, n), "exact sampling table")?;
        Ok(ExactSampler { d, n, lambda, cache: HashMap::new() })
    }

    /// Weighted number of `rest`-step continuations of a walk whose loop
    /// erasure is `le`, counting `lambda` for each loop they erase.
    fn completions(&mut self, le: &[Point], rest: usize) -> Q {
        if rest == 0 {
            return Q::one();
        }
        let key = (le.to_vec(), rest);
        if let Some(v) = self.cache.get(&key) {
            return v.clone();
        }
        let mut acc = Q::zero();
        for s in 0..2 * self.d {
            let (next, erased) = self.step(le, s);
            let sub = self.completions(&next, rest - 1);
            acc += if erased { sub * &self.lambda } else { sub };
        }
        self.cache.insert(key, acc.clone());
        acc
    }

    fn step(&self, le: &[Point], s: usize) -> (Vec<Point>, bool) {
        let x = le.last().unwrap().add(&Point::unit(self.d, s / 2, if s % 2 == 0 { 1 } else { -1 }));
        match le.iter().position(|p| *p == x) {
            Some(i) => (le[..=i].to_vec(), true),
            None => {
                let mut v = le.to_vec();
                v.push(x);
                (v, false)
            }
        }
    }

    /// Total weight `c_n` of the `n`-step walks.
    pub fn total(&mut self) -> Q {
        self.completions(&[Point::origin(self.d)], self.n)
    }

    /// Draws one walk using `rng`.
    pub fn draw(&mut self, rng: &mut ChaCha8Rng) -> Walk {
        let mut le = vec![Point::origin(self.d)];
        let mut path = le.clone();
        for k in 0..self.n {
            let rest = self.n - k - 1;
            let options: Vec<(Vec<Point>, Q)> = (0..2 * self.d)
                .map(|s| {
                    let (next, erased) = self.step(&le, s);
                    let w = self.completions(&next, rest);
                    let w = if erased { w * &self.lambda } else { w };
                    (next, w)
                })
                .collect();
            let total: Q = options.iter().map(|(_, w)| w.clone()).sum();
            let mut u = rng.random::<f64>() * q_to_f64(&total);
            let mut pick = options.len() - 1;
            for (i, (_, w)) in options.iter().enumerate() {
                let wf = q_to_f64(w);
                if wf > 0.0 && u < wf {
                    pick = i;
                    break;
                }
                u -= wf;
            }
            // Guard against rounding landing on a zero-weight option.
            while options[pick].1.is_zero() {
                pick -= 1;
            }
            le = options[pick].0.clone();
            let s = pick;
            let x = path.last().unwrap().add(&Point::unit(self.d, s / 2, if s % 2 == 0 { 1 } else { -1 }));
            path.push(x);
        }
        Walk(path)
    }
}

/// `count` independent draws from the `n`-step loop-weighted walk. Draw `i`
/// uses stream `i` of the seed.
pub fn sample_exact(n: usize, d: usize, act: &LoopActivity, seed: u64, count: usize, budget: Budget) -> Result<Vec<Walk>> {
    let mut sampler = ExactSampler::new(n, d, act, budget)?;
    if sampler.total().is_zero() {
        return precondition("no walk of this length has positive weight");
    }
    Ok((0..count).map(|i| sampler.draw(&mut sample_rng(seed, i as u64))).collect())
}

/// Records for `sample_exact` draws, matching the importance sampler's CSV
/// columns.
pub fn exact_samples(cfg: &SamplerConfig, budget: Budget) -> Result<Vec<SampleRecord>> {
    check_config(cfg)?;
    let act = LoopActivity::constant(cfg.lambda.clone());
    let walks = sample_exact(cfg.n, cfg.d, &act, cfg.seed, cfg.num_samples, budget)?;
    Ok(walks
        .into_iter()
        .enumerate()
        .map(|(index, w)| SampleRecord { index, loop_count: w.loop_count(), end: w.end().clone() })
        .collect())
}
