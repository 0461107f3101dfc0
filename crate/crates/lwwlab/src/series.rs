//! Truncated power series in `z` with exact rational coefficients, and
//! lattice-indexed families of such series.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{precondition, LwwError, Result};
use crate::walk::{GraphCtx, Point};

pub type Q = BigRational;

pub fn q(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

pub fn qr(p: i64, d: i64) -> Q {
    Q::new(BigInt::from(p), BigInt::from(d))
}

/// Parses `"p/q"`, `"p"` or a terminating decimal such as `"0.5"`.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || LwwError::Parse(format!("not a rational number: {s:?}"));
    if let Some((p, d)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let d: BigInt = d.trim().parse().map_err(|_| bad())?;
        if d.is_zero() {
            return Err(bad());
        }
        return Ok(Q::new(p, d));
    }
    if let Some((int, frac)) = s.split_once('.') {
        if frac.is_empty() || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let neg = int.starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" { BigInt::zero() } else { int.parse().map_err(|_| bad())? };
        let frac_part: BigInt = frac.parse().map_err(|_| bad())?;
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let magnitude = int_part.abs() * &scale + frac_part;
        let num = if neg { -magnitude } else { magnitude };
        return Ok(Q::new(num, scale));
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(Q::from_integer(p))
}

pub fn fmt_q(x: &Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

pub fn q_to_f64(x: &Q) -> f64 {
    match (x.numer().to_f64(), x.denom().to_f64()) {
        (Some(n), Some(d)) if n.is_finite() && d.is_finite() => n / d,
        _ => {
            // Scale down huge numerators and denominators together.
            let shift = x.numer().bits().max(x.denom().bits()).saturating_sub(1000);
            let n = (x.numer() >> shift).to_f64().unwrap_or(f64::NAN);
            let d = (x.denom() >> shift).to_f64().unwrap_or(f64::NAN);
            n / d
        }
    }
}

/// A power series `c_0 + c_1 z + ... + c_N z^N` truncated at order `N`.
#[derive(Clone, PartialEq, Eq)]
pub struct ZSeries {
    coeffs: Vec<Q>,
}

impl ZSeries {
    pub fn zero(nmax: usize) -> Self {
        ZSeries { coeffs: vec![Q::zero(); nmax + 1] }
    }

    pub fn one(nmax: usize) -> Self {
        Self::constant(nmax, Q::one())
    }

    pub fn constant(nmax: usize, c: Q) -> Self {
        let mut s = Self::zero(nmax);
        s.coeffs[0] = c;
        s
    }

    /// The monomial `c z^k`, or zero when `k` exceeds the truncation.
    pub fn monomial(nmax: usize, k: usize, c: Q) -> Self {
        let mut s = Self::zero(nmax);
        if k <= nmax {
            s.coeffs[k] = c;
        }
        s
    }

    pub fn from_coeffs(coeffs: Vec<Q>) -> Self {
        assert!(!coeffs.is_empty());
        ZSeries { coeffs }
    }

    pub fn from_ints(nmax: usize, xs: &[i64]) -> Self {
        let mut s = Self::zero(nmax);
        for (i, &x) in xs.iter().enumerate().take(nmax + 1) {
            s.coeffs[i] = q(x);
        }
        s
    }

    pub fn nmax(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Q {
        self.coeffs.get(k).cloned().unwrap_or_else(Q::zero)
    }

    pub fn coeff_ref(&self, k: usize) -> &Q {
        &self.coeffs[k]
    }

    pub fn set_coeff(&mut self, k: usize, c: Q) {
        if k <= self.nmax() {
            self.coeffs[k] = c;
        }
    }

    pub fn add_to_coeff(&mut self, k: usize, c: &Q) {
        if k <= self.nmax() {
            self.coeffs[k] += c;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Lowest index with a nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    fn check(&self, other: &ZSeries) -> Result<()> {
        if self.nmax() != other.nmax() {
            return precondition(format!("truncation mismatch: {} vs {}", self.nmax(), other.nmax()));
        }
        Ok(())
    }

    pub fn try_add(&self, other: &ZSeries) -> Result<ZSeries> {
        self.check(other)?;
        Ok(self.add(other))
    }

    pub fn try_mul(&self, other: &ZSeries) -> Result<ZSeries> {
        self.check(other)?;
        Ok(self.mul(other))
    }

    pub fn add(&self, other: &ZSeries) -> ZSeries {
        debug_assert_eq!(self.nmax(), other.nmax());
        ZSeries { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &ZSeries) -> ZSeries {
        debug_assert_eq!(self.nmax(), other.nmax());
        ZSeries { coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect() }
    }

    pub fn add_assign(&mut self, other: &ZSeries) {
        debug_assert_eq!(self.nmax(), other.nmax());
        for (a, b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            if !b.is_zero() {
                *a += b;
            }
        }
    }

    pub fn neg(&self) -> ZSeries {
        ZSeries { coeffs: self.coeffs.iter().map(|a| -a).collect() }
    }

    pub fn scale(&self, c: &Q) -> ZSeries {
        ZSeries { coeffs: self.coeffs.iter().map(|a| a * c).collect() }
    }

    pub fn mul(&self, other: &ZSeries) -> ZSeries {
        debug_assert_eq!(self.nmax(), other.nmax());
        let n = self.nmax();
        let mut out = vec![Q::zero(); n + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs[..=n - i].iter().enumerate() {
                if !b.is_zero() {
                    out[i + j] += a * b;
                }
            }
        }
        ZSeries { coeffs: out }
    }

    /// Multiplies by `z^k`.
    pub fn shift(&self, k: usize) -> ZSeries {
        let n = self.nmax();
        let mut out = vec![Q::zero(); n + 1];
        for i in 0..=n {
            if i + k <= n {
                out[i + k] = self.coeffs[i].clone();
            }
        }
        ZSeries { coeffs: out }
    }

    pub fn pow(&self, k: usize) -> ZSeries {
        let mut out = ZSeries::one(self.nmax());
        for _ in 0..k {
            out = out.mul(self);
        }
        out
    }

    /// Exponential of a series with zero constant term.
    pub fn exp(&self) -> Result<ZSeries> {
        if !self.coeffs[0].is_zero() {
            return precondition("exp needs a series with zero constant term");
        }
        // b' = a' b, solved coefficient by coefficient.
        let n = self.nmax();
        let mut b = vec![Q::zero(); n + 1];
        b[0] = Q::one();
        for k in 1..=n {
            let mut acc = Q::zero();
            for j in 1..=k {
                let a = &self.coeffs[j];
                if !a.is_zero() && !b[k - j].is_zero() {
                    acc += a * &b[k - j] * Q::from_integer(BigInt::from(j));
                }
            }
            b[k] = acc / Q::from_integer(BigInt::from(k));
        }
        Ok(ZSeries { coeffs: b })
    }

    /// Logarithm of a series with constant term one.
    pub fn log(&self) -> Result<ZSeries> {
        if !self.coeffs[0].is_one() {
            return precondition("log needs a series with constant term one");
        }
        let n = self.nmax();
        let deriv = self.derivative_full();
        let inv = self.reciprocal()?;
        let mut prod = vec![Q::zero(); n + 1];
        for i in 0..n {
            for j in 0..n - i {
                prod[i + j] += &deriv[i] * &inv.coeffs[j];
            }
        }
        let mut out = vec![Q::zero(); n + 1];
        for k in 1..=n {
            out[k] = &prod[k - 1] / Q::from_integer(BigInt::from(k));
        }
        Ok(ZSeries { coeffs: out })
    }

    pub fn reciprocal(&self) -> Result<ZSeries> {
        let c0 = &self.coeffs[0];
        if c0.is_zero() {
            return Err(LwwError::Precondition("reciprocal needs a nonzero constant term".into()));
        }
        let n = self.nmax();
        let inv0 = c0.recip();
        let mut b = vec![Q::zero(); n + 1];
        b[0] = inv0.clone();
        for k in 1..=n {
            let mut acc = Q::zero();
            for j in 1..=k {
                let a = &self.coeffs[j];
                if !a.is_zero() && !b[k - j].is_zero() {
                    acc += a * &b[k - j];
                }
            }
            b[k] = -acc * &inv0;
        }
        Ok(ZSeries { coeffs: b })
    }

    /// Coefficients of the derivative, `(k+1) c_{k+1}` for `k < N`, padded
    /// with a zero in the top slot (that coefficient is not known).
    pub fn derivative(&self) -> ZSeries {
        let mut v = self.derivative_full();
        v.push(Q::zero());
        ZSeries { coeffs: v }
    }

    fn derivative_full(&self) -> Vec<Q> {
        (1..=self.nmax()).map(|k| &self.coeffs[k] * Q::from_integer(BigInt::from(k))).collect()
    }

    pub fn truncate(&self, nmax: usize) -> ZSeries {
        let mut c: Vec<Q> = self.coeffs.iter().take(nmax + 1).cloned().collect();
        c.resize(nmax + 1, Q::zero());
        ZSeries { coeffs: c }
    }

    /// Coefficientwise `self <= other`.
    pub fn le(&self, other: &ZSeries) -> bool {
        self.coeffs.iter().zip(&other.coeffs).all(|(a, b)| a <= b)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.coeffs.iter().all(|c| !c.is_negative())
    }

    /// First index at which two series differ.
    pub fn first_difference(&self, other: &ZSeries) -> Option<usize> {
        (0..=self.nmax().max(other.nmax())).find(|&k| self.coeff(k) != other.coeff(k))
    }

    pub fn eval_f64(&self, z: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * z + q_to_f64(c);
        }
        acc
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(fmt_q).collect()
    }

    pub fn from_strings(v: &[String]) -> Result<ZSeries> {
        if v.is_empty() {
            return precondition("empty coefficient list");
        }
        Ok(ZSeries { coeffs: v.iter().map(|s| parse_q(s)).collect::<Result<_>>()? })
    }
}

impl fmt::Debug for ZSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}]", self.to_strings().join(", "))
    }
}

impl fmt::Display for ZSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            terms.push(match k {
                0 => fmt_q(c),
                1 => format!("{}*z", fmt_q(c)),
                _ => format!("{}*z^{}", fmt_q(c), k),
            });
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{} + O(z^{})", terms.join(" + "), self.nmax() + 1)
        }
    }
}

/// A finitely supported map from lattice points to series.
#[derive(Clone, PartialEq, Eq)]
pub struct SpatialSeries {
    nmax: usize,
    map: BTreeMap<Point, ZSeries>,
}

#[derive(Serialize, Deserialize)]
struct SpatialEntry {
    x: Vec<i32>,
    coeffs: Vec<String>,
}

impl SpatialSeries {
    pub fn new(nmax: usize) -> Self {
        SpatialSeries { nmax, map: BTreeMap::new() }
    }

    pub fn delta(nmax: usize, x: Point, s: ZSeries) -> Self {
        let mut out = Self::new(nmax);
        out.insert(x, s);
        out
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn insert(&mut self, x: Point, s: ZSeries) {
        assert_eq!(s.nmax(), self.nmax);
        if s.is_zero() {
            self.map.remove(&x);
        } else {
            self.map.insert(x, s);
        }
    }

    pub fn add_at(&mut self, x: &Point, s: &ZSeries) {
        if s.is_zero() {
            return;
        }
        match self.map.get_mut(x) {
            Some(e) => {
                e.add_assign(s);
                if e.is_zero() {
                    self.map.remove(x);
                }
            }
            None => {
                self.map.insert(x.clone(), s.clone());
            }
        }
    }

    pub fn get(&self, x: &Point) -> ZSeries {
        self.map.get(x).cloned().unwrap_or_else(|| ZSeries::zero(self.nmax))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Point, &ZSeries)> {
        self.map.iter()
    }

    pub fn support(&self) -> Vec<Point> {
        self.map.keys().cloned().collect()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn add(&self, other: &SpatialSeries) -> SpatialSeries {
        let mut out = self.clone();
        for (x, s) in &other.map {
            out.add_at(x, s);
        }
        out
    }

    pub fn sub(&self, other: &SpatialSeries) -> SpatialSeries {
        self.add(&other.scale(&q(-1)))
    }

    pub fn scale(&self, c: &Q) -> SpatialSeries {
        let mut out = SpatialSeries::new(self.nmax);
        for (x, s) in &self.map {
            out.insert(x.clone(), s.scale(c));
        }
        out
    }

    pub fn mul_series(&self, f: &ZSeries) -> SpatialSeries {
        let mut out = SpatialSeries::new(self.nmax);
        for (x, s) in &self.map {
            out.insert(x.clone(), s.mul(f));
        }
        out
    }

    /// Sum over all points.
    pub fn total(&self) -> ZSeries {
        let mut acc = ZSeries::zero(self.nmax);
        for s in self.map.values() {
            acc.add_assign(s);
        }
        acc
    }

    /// `sum_x |x|^2 a(x)`.
    pub fn second_moment(&self) -> ZSeries {
        let mut acc = ZSeries::zero(self.nmax);
        for (x, s) in &self.map {
            acc.add_assign(&s.scale(&q(x.norm2())));
        }
        acc
    }

    /// Lattice convolution `(a * b)(x) = sum_y a(y) b(x - y)`.
    pub fn convolve(&self, other: &SpatialSeries) -> Result<SpatialSeries> {
        if self.nmax != other.nmax {
            return precondition("truncation mismatch in convolution");
        }
        let mut out = SpatialSeries::new(self.nmax);
        for (y, a) in &self.map {
            let va = a.valuation().unwrap_or(usize::MAX);
            for (u, b) in &other.map {
                let vb = b.valuation().unwrap_or(usize::MAX);
                if va.saturating_add(vb) > self.nmax {
                    continue;
                }
                out.add_at(&y.add(u), &a.mul(b));
            }
        }
        Ok(out)
    }

    /// Convolution on a graph context. Only the translation-invariant
    /// lattice is supported.
    pub fn convolve_on(&self, other: &SpatialSeries, ctx: &GraphCtx) -> Result<SpatialSeries> {
        match ctx {
            GraphCtx::Lattice(_) => self.convolve(other),
            GraphCtx::Finite(_) => Err(LwwError::Unsupported(
                "spatial convolution needs a translation-invariant lattice".into(),
            )),
        }
    }

    /// Convolution inverse: the series `b` with `a * b = delta_0`.
    pub fn inverse(&self) -> Result<SpatialSeries> {
        let d = match self.map.keys().next() {
            Some(p) => p.dim(),
            None => return precondition("cannot invert the zero spatial series"),
        };
        let origin = Point::origin(d);
        let a0 = self.get(&origin);
        let c = a0.coeff(0);
        if c.is_zero() {
            return precondition("inverse needs a(0) with nonzero constant term");
        }
        for (x, s) in &self.map {
            if *x != origin && !s.coeff(0).is_zero() {
                return precondition("inverse needs a(x) without constant term for x != 0");
            }
        }
        // a = c (delta - E) with E of positive valuation; b = c^{-1} sum_k E^k.
        let cinv = c.recip();
        let mut e = self.scale(&(-cinv.clone()));
        e.add_at(&origin, &ZSeries::one(self.nmax));
        let mut term = SpatialSeries::delta(self.nmax, origin.clone(), ZSeries::one(self.nmax));
        let mut acc = term.clone();
        for _ in 0..self.nmax {
            term = term.convolve(&e)?;
            if term.is_empty() {
                break;
            }
            acc = acc.add(&term);
        }
        Ok(acc.scale(&cinv))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let entries: Vec<SpatialEntry> =
            self.map.iter().map(|(x, s)| SpatialEntry { x: x.0.clone(), coeffs: s.to_strings() }).collect();
        serde_json::to_value(entries).expect("serializable")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<SpatialSeries> {
        let entries: Vec<SpatialEntry> =
            serde_json::from_value(v.clone()).map_err(|e| LwwError::Parse(e.to_string()))?;
        let nmax = entries.first().map(|e| e.coeffs.len().saturating_sub(1)).unwrap_or(0);
        let mut out = SpatialSeries::new(nmax);
        for e in entries {
            let s = ZSeries::from_strings(&e.coeffs)?;
            if s.nmax() != nmax {
                return precondition("inconsistent truncation in spatial series");
            }
            out.insert(Point(e.x), s);
        }
        Ok(out)
    }

    /// First point and order where two spatial series differ.
    pub fn first_difference(&self, other: &SpatialSeries) -> Option<(Point, usize, Q, Q)> {
        let mut keys: Vec<&Point> = self.map.keys().chain(other.map.keys()).collect();
        keys.sort();
        keys.dedup();
        for x in keys {
            let (a, b) = (self.get(x), other.get(x));
            if let Some(k) = a.first_difference(&b) {
                return Some((x.clone(), k, a.coeff(k), b.coeff(k)));
            }
        }
        None
    }
}

impl fmt::Debug for SpatialSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.map.iter()).finish()
    }
}

/// The step distribution `D(x) = 1/(2d)` on nearest neighbours, as
/// constant series.
pub fn step_distribution(d: usize, nmax: usize) -> SpatialSeries {
    let mut out = SpatialSeries::new(nmax);
    let w = qr(1, 2 * d as i64);
    for axis in 0..d {
        for sign in [-1, 1] {
            out.insert(Point::unit(d, axis, sign), ZSeries::constant(nmax, w.clone()));
        }
    }
    out
}
