//! Finite-order estimates of the critical point, the amplitude and the
//! diffusion constant from truncated series. These are trend reports: each
//! estimate carries its per-order values, and nothing here claims an
//! asymptotic limit.

use num_traits::Zero;

use crate::enumerate::{alpha, alpha0, reference_neighbor, two_point_all, Budget, LoopCatalogue};
use crate::error::{precondition, Result};
use crate::expansion::pi_from_two_point;
use crate::series::{q_to_f64, SpatialSeries, ZSeries};
use crate::walk::{GraphCtx, LoopActivity, Point};

/// Relative shift of the critical point used for the sensitivity columns.
pub const SENSITIVITY: f64 = 0.02;

/// One row of per-order data. Missing entries are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct OrderRow {
    pub order: usize,
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesEstimate {
    pub quantity: String,
    pub method: String,
    /// Names of the per-order columns after `order`.
    pub columns: Vec<String>,
    pub rows: Vec<OrderRow>,
    pub extrapolated: f64,
    /// Truncation order the extrapolated value comes from.
    pub order: usize,
    /// Values at the critical point estimate scaled by `1 - SENSITIVITY`
    /// and `1 + SENSITIVITY`.
    pub sensitivity: Option<(f64, f64)>,
    pub warning: Option<String>,
}

impl SeriesEstimate {
    /// Per-order data as CSV with an `order` column first.
    pub fn to_csv(&self) -> String {
        let mut out = format!("order,{}\n", self.columns.join(","));
        for r in &self.rows {
            let cells: Vec<String> = r.values.iter().map(|v| v.map(|x| format!("{x:.12}")).unwrap_or_default()).collect();
            out.push_str(&format!("{},{}\n", r.order, cells.join(",")));
        }
        out
    }

    pub fn column(&self, name: &str) -> Vec<(usize, f64)> {
        let Some(i) = self.columns.iter().position(|c| c == name) else {
            return Vec::new();
        };
        self.rows.iter().filter_map(|r| r.values[i].map(|v| (r.order, v))).collect()
    }

    /// Entry of column `name` in the row for the reported order.
    pub fn reported(&self, name: &str) -> Option<f64> {
        self.column(name).into_iter().find(|&(m, _)| m == self.order).map(|(_, v)| v)
    }
}

/// Aitken's delta-squared transform. A vanishing second difference means
/// the sequence is already constant there, and the last value is kept.
pub fn aitken(s: &[f64]) -> Vec<f64> {
    s.windows(3)
        .map(|w| {
            let (d1, d2) = (w[1] - w[0], w[2] - w[1]);
            let dd = d2 - d1;
            if dd == 0.0 {
                w[2]
            } else {
                w[2] - d2 * d2 / dd
            }
        })
        .collect()
}

/// Estimates the radius of convergence from the coefficients.
///
/// Columns, indexed by the lower order `a_j` of each nonzero coefficient:
/// the ratio `(c_{a_j} / c_{a_{j+1}})^{1/gap}`, its Aitken transform, and
/// the linear intercept of two-step growth estimates
/// `mu_j = (c_{a_{j+2}} / c_{a_j})^{1/gap}`, which eliminates a `1/n`
/// correction and the odd-even oscillation of bipartite lattices. The
/// extrapolated value is the last intercept, or the last Aitken value when
/// there are too few coefficients for an intercept.
pub fn zc_ratio_estimate(chi: &ZSeries) -> Result<SeriesEstimate> {
    let nz: Vec<(usize, f64)> =
        (0..=chi.nmax()).filter(|&k| !chi.coeff_ref(k).is_zero()).map(|k| (k, q_to_f64(chi.coeff_ref(k)))).collect();
    if nz.len() < 4 {
        return precondition("the ratio method needs at least four nonzero coefficients");
    }
    if nz.iter().any(|&(_, c)| c <= 0.0) {
        return precondition("the ratio method needs positive coefficients");
    }
    let growth = |i: usize, j: usize| (nz[j].1 / nz[i].1).powf(1.0 / (nz[j].0 - nz[i].0) as f64);
    let ratios: Vec<f64> = (0..nz.len() - 1).map(|j| 1.0 / growth(j, j + 1)).collect();
    let ait = aitken(&ratios);
    let two: Vec<f64> = (0..nz.len() - 2).map(|j| growth(j, j + 2)).collect();
    let intercepts: Vec<Option<f64>> = (0..two.len())
        .map(|j| {
            (j >= 2 && nz[j].0 > 0).then(|| {
                let (a, b) = (nz[j].0 as f64, nz[j - 2].0 as f64);
                (a - b) / (a * two[j] - b * two[j - 2])
            })
        })
        .collect();
    let rows = (0..ratios.len())
        .map(|j| OrderRow {
            order: nz[j].0,
            values: vec![
                Some(ratios[j]),
                j.checked_sub(2).map(|i| ait[i]),
                intercepts.get(j).copied().flatten(),
            ],
        })
        .collect();
    let (extrapolated, method) = match intercepts.iter().rev().find_map(|x| *x) {
        Some(v) => (v, "ratio, two-step linear intercept"),
        None => (*ait.last().unwrap(), "ratio, Aitken"),
    };
    Ok(SeriesEstimate {
        quantity: "z_c".into(),
        method: method.into(),
        columns: vec!["ratio".into(), "aitken".into(), "intercept".into()],
        rows,
        extrapolated,
        order: chi.nmax(),
        sensitivity: None,
        warning: None,
    })
}

/// Exact series entering the amplitude and diffusion constant.
#[derive(Clone, Debug)]
pub struct LaceSeries {
    pub d: usize,
    pub chi: ZSeries,
    pub alpha0: ZSeries,
    pub alpha: ZSeries,
    pub pi: SpatialSeries,
}

impl LaceSeries {
    pub fn compute(d: usize, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<Self> {
        let ctx = GraphCtx::lattice(d);
        let o = Point::origin(d);
        let g = two_point_all(&ctx, &o, act, nmax, budget)?;
        let cat = LoopCatalogue::build(&ctx, act, nmax, budget)?;
        let a0 = alpha0(&cat, &o);
        let a = alpha(&cat, &o, &reference_neighbor(&ctx, &o)?);
        let pi = pi_from_two_point(d, &g, &a0, &a)?;
        Ok(LaceSeries { d, chi: g.total(), alpha0: a0, alpha: a, pi })
    }

    fn truncated(&self, m: usize) -> (ZSeries, ZSeries, ZSeries, ZSeries, ZSeries) {
        (
            self.chi.truncate(m),
            self.alpha0.truncate(m),
            self.alpha.truncate(m),
            self.pi.total().truncate(m),
            self.pi.second_moment().truncate(m),
        )
    }
}

/// Values of the constants at one truncation order and one `z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Constants {
    /// `z_c^{-1} (|Omega| alpha + z |Omega| alpha' + Pi'(0))^{-1}`, the
    /// expression with the lace-equation denominator only.
    pub a_denominator: f64,
    /// Amplitude of `c_n ~ A z_c^{-n}`: the value above times `alpha_0`.
    pub a: f64,
    pub d: f64,
    /// `(z_c - z) chi(z) / z_c` at `z = 0.95 z_c`, with `chi` evaluated as
    /// `alpha_0 / (1 - z |Omega| alpha - Pi(0))`.
    pub chi_check: f64,
}

fn constants_at(d: usize, parts: &(ZSeries, ZSeries, ZSeries, ZSeries, ZSeries), zc: f64) -> Constants {
    let (_, a0, a, pi0, m2) = parts;
    let omega = (2 * d) as f64;
    let slope = omega * a.eval_f64(zc) + zc * omega * a.derivative().eval_f64(zc) + pi0.derivative().eval_f64(zc);
    let a_den = 1.0 / (zc * slope);
    let z = 0.95 * zc;
    let chi = a0.eval_f64(z) / (1.0 - z * omega * a.eval_f64(z) - pi0.eval_f64(z));
    Constants {
        a_denominator: a_den,
        a: a0.eval_f64(zc) * a_den,
        d: a_den * (zc * omega * a.eval_f64(zc) + m2.eval_f64(zc)),
        chi_check: (zc - z) * chi / zc,
    }
}

/// Flags a truncated series whose last term is not small against its sum
/// at `z`.
fn tail_warning(name: &str, s: &ZSeries, z: f64) -> Option<String> {
    let n = s.nmax();
    let last = q_to_f64(s.coeff_ref(n)).abs() * z.powi(n as i32);
    let sum = s.eval_f64(z).abs();
    (last > 0.1 * sum.max(f64::MIN_POSITIVE)).then(|| format!("{name}: last term {last:.3e} against sum {sum:.3e}"))
}

/// Per-order estimates of the amplitude `A` and diffusion constant `D`,
/// each evaluated at that order's critical point estimate. Orders start
/// at 4, the first with enough coefficients for the ratio method.
///
/// On Z^d the closed-walk series `alpha_0` and `alpha` have only even
/// powers. Truncating at an even order keeps their top coefficient but
/// drops the matching next-order terms of the products built from it, so
/// the reported value comes from the largest odd order.
pub fn lace_constants(series: &LaceSeries) -> Result<(SeriesEstimate, SeriesEstimate)> {
    let nmax = series.chi.nmax();
    if nmax < 4 {
        return precondition("the estimates need truncation order at least 4");
    }
    let mut a_rows = Vec::new();
    let mut d_rows = Vec::new();
    let mut chosen = None;
    for m in 4..=nmax {
        let parts = series.truncated(m);
        let zc = zc_ratio_estimate(&parts.0)?.extrapolated;
        let c = constants_at(series.d, &parts, zc);
        a_rows.push(OrderRow { order: m, values: vec![Some(zc), Some(c.a), Some(c.a_denominator), Some(c.chi_check)] });
        d_rows.push(OrderRow { order: m, values: vec![Some(zc), Some(c.d)] });
        if m % 2 == 1 || chosen.is_none() {
            chosen = Some((m, parts, zc, c));
        }
    }
    let (order, parts, zc, c) = chosen.unwrap();
    let lo = constants_at(series.d, &parts, zc * (1.0 - SENSITIVITY));
    let hi = constants_at(series.d, &parts, zc * (1.0 + SENSITIVITY));
    let warning = [("alpha_0", &parts.1), ("alpha", &parts.2), ("Pi(0)", &parts.3), ("sum |x|^2 Pi", &parts.4)]
        .iter()
        .filter_map(|(n, s)| tail_warning(n, s, zc))
        .collect::<Vec<_>>();
    let warning = (!warning.is_empty()).then(|| warning.join("; "));
    let a = SeriesEstimate {
        quantity: "A".into(),
        method: "lace-equation constants at the ratio estimate of z_c".into(),
        columns: vec!["z_c".into(), "A".into(), "A_denominator".into(), "chi_check".into()],
        rows: a_rows,
        extrapolated: c.a,
        order,
        sensitivity: Some((lo.a, hi.a)),
        warning: warning.clone(),
    };
    let d = SeriesEstimate {
        quantity: "D".into(),
        method: "lace-equation constants at the ratio estimate of z_c".into(),
        columns: vec!["z_c".into(), "D".into()],
        rows: d_rows,
        extrapolated: c.d,
        order,
        sensitivity: Some((lo.d, hi.d)),
        warning,
    };
    Ok((a, d))
}

pub fn amplitude_a_estimate(d: usize, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<SeriesEstimate> {
    Ok(lace_constants(&LaceSeries::compute(d, act, nmax, budget)?)?.0)
}

pub fn diffusion_d_estimate(d: usize, act: &LoopActivity, nmax: usize, budget: Budget) -> Result<SeriesEstimate> {
    Ok(lace_constants(&LaceSeries::compute(d, act, nmax, budget)?)?.1)
}
