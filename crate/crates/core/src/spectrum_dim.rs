//! Hausdorff-dimension formulas for recurrence sets, evaluated on certified
//! eigenvalue moduli.
//!
//! Two families are provided. [`dim_theorem1`] is the general formula, exact
//! when `alpha >= ln(lambda_d / lambda_1)` and an upper bound otherwise.
//! [`dim_theorem2`] adds the correction over the index sets `K(j)` and is the
//! exact value for matrices diagonalizable over the rationals.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_linalg::{ln_rational, rational_to_f64};
use crate::interval::Interval;
use crate::serde_util;

/// One eigenvalue modulus with a certified enclosure.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Modulus {
    pub value: f64,
    pub bounds: Interval,
    #[serde(serialize_with = "serde_util::opt_rational")]
    pub exact: Option<BigRational>,
    /// Moduli sharing a class are known to be exactly equal (conjugate pairs,
    /// repeated roots).
    #[serde(skip)]
    pub class: usize,
}

impl Modulus {
    pub fn from_rational(q: BigRational, class: usize) -> Self {
        let q = q.abs();
        Self {
            value: rational_to_f64(&q),
            bounds: Interval::from_rational(&q),
            exact: Some(q),
            class,
        }
    }

    pub fn ln_interval(&self) -> Interval {
        match &self.exact {
            Some(q) => {
                let b = Interval::from_rational(q);
                if b.lo > 0.0 && b.hi.is_finite() {
                    b.ln()
                } else {
                    let l = ln_rational(q);
                    Interval::new(l - l.abs() * 1e-14, l + l.abs() * 1e-14)
                }
            }
            None => self.bounds.ln(),
        }
    }

    fn ln_value(&self) -> f64 {
        match &self.exact {
            Some(q) => ln_rational(q),
            None => self.value.ln(),
        }
    }
}

/// Ascending eigenvalue moduli `|lambda_1| <= ... <= |lambda_d|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Spectrum {
    moduli: Vec<Modulus>,
    log_moduli: Vec<f64>,
    tol: f64,
    integer_diagonalizable: bool,
}

impl Spectrum {
    pub fn from_parts(mut moduli: Vec<Modulus>, tol: f64) -> Result<Self> {
        if moduli.is_empty() {
            return Err(Error::InvalidSpectrum("empty spectrum".into()));
        }
        for m in &moduli {
            if !(m.value > 0.0 && m.value.is_finite()) {
                return Err(Error::InvalidSpectrum(format!("modulus {} is not positive and finite", m.value)));
            }
        }
        moduli.sort_by(|a, b| cmp_moduli(a, b));
        let log_moduli = moduli.iter().map(Modulus::ln_value).collect();
        Ok(Self {
            moduli,
            log_moduli,
            tol,
            integer_diagonalizable: false,
        })
    }

    /// Moduli given as floats, each taken to be exact.
    pub fn from_moduli(values: &[f64]) -> Result<Self> {
        let moduli = values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let q = BigRational::from_float(v)
                    .ok_or_else(|| Error::InvalidSpectrum(format!("modulus {v} is not finite")))?;
                Ok(Modulus::from_rational(q, i))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut s = Self::from_parts(moduli, 0.0)?;
        s.merge_equal_classes();
        Ok(s)
    }

    pub fn from_integers(values: &[i64]) -> Result<Self> {
        Self::from_rationals(values.iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect())
    }

    pub fn from_rationals(values: Vec<BigRational>) -> Result<Self> {
        if values.iter().any(Zero::is_zero) {
            return Err(Error::InvalidSpectrum("zero modulus".into()));
        }
        let moduli = values
            .into_iter()
            .enumerate()
            .map(|(i, q)| Modulus::from_rational(q, i))
            .collect();
        let mut s = Self::from_parts(moduli, 0.0)?;
        s.merge_equal_classes();
        Ok(s)
    }

    fn merge_equal_classes(&mut self) {
        for i in 1..self.moduli.len() {
            if self.moduli[i].exact.is_some() && self.moduli[i].exact == self.moduli[i - 1].exact {
                self.moduli[i].class = self.moduli[i - 1].class;
            }
        }
    }

    /// Marks the spectrum as coming from a matrix diagonalizable over the
    /// rationals with integer eigenvalues.
    pub fn with_integer_diagonalizable(mut self, flag: bool) -> Self {
        self.integer_diagonalizable = flag;
        self
    }

    pub fn integer_diagonalizable(&self) -> bool {
        self.integer_diagonalizable
    }

    pub fn dim(&self) -> usize {
        self.moduli.len()
    }

    pub fn moduli(&self) -> &[Modulus] {
        &self.moduli
    }

    pub fn values(&self) -> Vec<f64> {
        self.moduli.iter().map(|m| m.value).collect()
    }

    pub fn log_moduli(&self) -> &[f64] {
        &self.log_moduli
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn min(&self) -> &Modulus {
        &self.moduli[0]
    }

    pub fn max(&self) -> &Modulus {
        &self.moduli[self.moduli.len() - 1]
    }

    /// Some modulus may be `<= 1 + tol`.
    pub fn hypothesis_violated(&self) -> bool {
        self.min().bounds.lo <= 1.0 + self.tol
    }

    /// Every modulus is certified to exceed 1.
    pub fn is_expanding(&self) -> bool {
        self.min().bounds.lo > 1.0
    }

    fn require_expanding(&self) -> Result<()> {
        if self.is_expanding() {
            Ok(())
        } else {
            Err(Error::InvalidSpectrum(format!(
                "smallest modulus {} is not certified to exceed 1",
                self.min().value
            )))
        }
    }

    /// The spectrum of `A^t`.
    pub fn powered(&self, t: u32) -> Self {
        let moduli = self
            .moduli
            .iter()
            .map(|m| match &m.exact {
                Some(q) => Modulus::from_rational(q.pow(t as i32), m.class),
                None => Modulus {
                    value: m.value.powi(t as i32),
                    bounds: m.bounds.powi(t as i32),
                    exact: None,
                    class: m.class,
                },
            })
            .collect();
        let mut s = Self::from_parts(moduli, self.tol).expect("powers of a valid spectrum are valid");
        s.integer_diagonalizable = self.integer_diagonalizable;
        s
    }

    /// Decides `|lambda_i| > |lambda_j| e^alpha` (0-based indices), exactly
    /// when possible and otherwise by interval enclosures.
    pub fn certified_exceeds(&self, i: usize, j: usize, alpha: &Alpha) -> Result<bool> {
        let (a, b) = (&self.moduli[i], &self.moduli[j]);
        if a.class == b.class {
            return Ok(false);
        }
        if let (Some(qa), Some(qb)) = (&a.exact, &b.exact) {
            match alpha {
                Alpha::Infinite => return Ok(false),
                Alpha::Log(q) => return Ok(*qa > qb * q),
                Alpha::Value(v) if *v == 0.0 => return Ok(qa > qb),
                Alpha::Value(_) => {}
            }
        }
        if alpha.is_infinite() {
            return Ok(false);
        }
        let rhs = b.ln_interval() + alpha.interval();
        match a.ln_interval().certified_cmp(&rhs) {
            Some(Ordering::Greater) => Ok(true),
            Some(_) => Ok(false),
            None => Err(Error::AmbiguousComparison(format!(
                "ln|lambda_{}| vs ln|lambda_{}| + {alpha}",
                i + 1,
                j + 1
            ))),
        }
    }

    /// Certifies `alpha >= ln(lambda_d / lambda_1)`; `false` when this fails
    /// or cannot be decided.
    pub fn alpha_at_least_threshold(&self, alpha: &Alpha) -> bool {
        let (lo, hi) = (self.min(), self.max());
        if lo.class == hi.class || alpha.is_infinite() {
            return true;
        }
        if let (Some(a), Some(b), Alpha::Log(q)) = (&lo.exact, &hi.exact, alpha) {
            return b <= &(a * q);
        }
        alpha.interval().lo >= alpha_threshold(self).hi
    }
}

fn cmp_moduli(a: &Modulus, b: &Modulus) -> Ordering {
    match (&a.exact, &b.exact) {
        (Some(x), Some(y)) => x.cmp(y),
        _ => a.value.total_cmp(&b.value),
    }
    .then(a.class.cmp(&b.class))
}

/// Lower order `alpha` of a rate function: `ln q` for a rational `q >= 1`, a
/// decimal value, or infinity.
#[derive(Clone, Debug, PartialEq)]
pub enum Alpha {
    Log(BigRational),
    Value(f64),
    Infinite,
}

impl Alpha {
    pub fn ln(q: i64) -> Self {
        Alpha::Log(BigRational::from_integer(BigInt::from(q)))
    }

    pub fn value(&self) -> f64 {
        match self {
            Alpha::Log(q) => ln_rational(q),
            Alpha::Value(v) => *v,
            Alpha::Infinite => f64::INFINITY,
        }
    }

    pub fn interval(&self) -> Interval {
        match self {
            Alpha::Log(q) if q.is_one() => Interval::point(0.0),
            Alpha::Log(q) => Modulus::from_rational(q.clone(), 0).ln_interval(),
            Alpha::Value(v) => Interval::point(*v),
            Alpha::Infinite => Interval::point(f64::INFINITY),
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Alpha::Infinite)
    }

    /// `t * alpha`
    pub fn scaled(&self, t: u32) -> Self {
        match self {
            Alpha::Log(q) => Alpha::Log(q.pow(t as i32)),
            Alpha::Value(v) => Alpha::Value(v * t as f64),
            Alpha::Infinite => Alpha::Infinite,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Alpha::Log(q) if *q < BigRational::one() => {
                Err(Error::InvalidArgument(format!("alpha = ln({q}) is negative")))
            }
            Alpha::Value(v) if !(*v >= 0.0 && v.is_finite()) => {
                Err(Error::InvalidArgument(format!("alpha = {v} must be finite and nonnegative")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Alpha {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Alpha::Log(q) if q.is_integer() => write!(f, "ln{}", q.numer()),
            Alpha::Log(q) => write!(f, "ln({}/{})", q.numer(), q.denom()),
            Alpha::Value(v) => write!(f, "{v}"),
            Alpha::Infinite => write!(f, "inf"),
        }
    }
}

impl FromStr for Alpha {
    type Err = Error;

    /// Accepts `ln2`, `ln(3/2)`, `log8`, decimals, and `inf`.
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let lower = t.to_ascii_lowercase();
        let alpha = if lower == "inf" || lower == "infinity" {
            Alpha::Infinite
        } else if let Some(rest) = lower.strip_prefix("ln").or_else(|| lower.strip_prefix("log")) {
            let rest = rest.trim();
            let rest = rest
                .strip_prefix('(')
                .and_then(|r| r.strip_suffix(')'))
                .unwrap_or(rest);
            let q = serde_util::parse_rational(rest)
                .ok_or_else(|| Error::Parse(format!("bad logarithm argument in alpha '{t}'")))?;
            Alpha::Log(q)
        } else {
            Alpha::Value(t.parse().map_err(|_| Error::Parse(format!("bad alpha '{t}'")))?)
        };
        alpha.validate()?;
        Ok(alpha)
    }
}

impl Serialize for Alpha {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Target radii `psi(n)`, `n >= 1`.
#[derive(Clone, Debug, PartialEq)]
pub enum RateFunction {
    /// `psi(n) = e^{-alpha n}`
    Exponential(Alpha),
    /// `psi(1), psi(2), ...`, strictly decreasing and positive.
    Table(Vec<f64>),
}

impl RateFunction {
    pub fn exponential(alpha: Alpha) -> Result<Self> {
        alpha.validate()?;
        match &alpha {
            Alpha::Infinite => Err(Error::InvalidArgument("psi = e^(-inf n) vanishes identically".into())),
            a if a.value() <= 0.0 => Err(Error::InvalidArgument("psi must tend to 0 (alpha > 0)".into())),
            _ => Ok(RateFunction::Exponential(alpha)),
        }
    }

    pub fn table(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("empty psi table".into()));
        }
        if values.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidArgument("psi table values must be positive".into()));
        }
        if values.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidArgument("psi table must be strictly decreasing".into()));
        }
        Ok(RateFunction::Table(values))
    }

    /// Largest `n` the function is defined for.
    pub fn horizon(&self) -> Option<u32> {
        match self {
            RateFunction::Exponential(_) => None,
            RateFunction::Table(v) => Some(v.len() as u32),
        }
    }

    pub fn covers(&self, n: u32) -> bool {
        n >= 1 && self.horizon().is_none_or(|h| n <= h)
    }

    pub fn ensure_covers(&self, n: u32) -> Result<()> {
        if self.covers(n) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "psi({n}) is undefined (table horizon {})",
                self.horizon().unwrap_or(0)
            )))
        }
    }

    /// `psi(n)`; panics when `n` is outside [`Self::covers`].
    pub fn value(&self, n: u32) -> f64 {
        assert!(self.covers(n), "psi({n}) is undefined");
        match self {
            RateFunction::Exponential(Alpha::Log(q)) => rational_to_f64(&q.pow(-(n as i32))),
            RateFunction::Exponential(a) => (-a.value() * n as f64).exp(),
            RateFunction::Table(v) => v[n as usize - 1],
        }
    }

    /// `psi(n)` as an exact rational (the float value itself when `psi` is not
    /// rational-valued).
    pub fn rational(&self, n: u32) -> BigRational {
        match self {
            RateFunction::Exponential(Alpha::Log(q)) => {
                assert!(n >= 1);
                q.pow(-(n as i32))
            }
            _ => BigRational::from_float(self.value(n)).expect("psi is finite"),
        }
    }

    /// The lower order. For tables this is the finite-horizon proxy
    /// `min_{h/2 <= n <= h} -ln psi(n) / n` with `h` the table length.
    pub fn alpha(&self) -> Alpha {
        match self {
            RateFunction::Exponential(a) => a.clone(),
            RateFunction::Table(v) => {
                let h = v.len();
                let a = ((h + 1) / 2).max(1)..=h;
                Alpha::Value(
                    a.map(|n| -v[n - 1].ln() / n as f64)
                        .fold(f64::INFINITY, f64::min)
                        .max(0.0),
                )
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DimLabel {
    Exact,
    UpperBound,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimensionResult {
    pub value: f64,
    pub label: DimLabel,
    /// 1-based.
    pub argmin_j: usize,
    pub per_j: Vec<f64>,
    /// 1-based index sets `K(j)`, present for the corrected formula.
    pub k_sets: Option<Vec<Vec<usize>>>,
    pub alpha_threshold: f64,
}

/// `ln(lambda_d / lambda_1)` with a certified enclosure.
pub fn alpha_threshold(spec: &Spectrum) -> Interval {
    let (lo, hi) = (spec.min(), spec.max());
    if lo.class == hi.class {
        return Interval::point(0.0);
    }
    if let (Some(a), Some(b)) = (&lo.exact, &hi.exact) {
        return Modulus::from_rational(b / a, 0).ln_interval();
    }
    let t = hi.ln_interval() - lo.ln_interval();
    Interval::new(t.lo.max(0.0), t.hi.max(0.0))
}

fn argmin(per_j: &[f64]) -> (f64, usize) {
    let min = per_j.iter().copied().fold(f64::INFINITY, f64::min);
    let slack = 1e-12 * min.abs().max(1.0);
    let j = per_j.iter().position(|&v| v <= min + slack).unwrap_or(0);
    (min, j + 1)
}

fn infinite_result(spec: &Spectrum, k_sets: bool) -> DimensionResult {
    let d = spec.dim();
    DimensionResult {
        value: 0.0,
        label: DimLabel::Exact,
        argmin_j: 1,
        per_j: vec![0.0; d],
        k_sets: k_sets.then(|| vec![Vec::new(); d]),
        alpha_threshold: alpha_threshold(spec).mid(),
    }
}

/// `min_j (j ln l_j + sum_{i>j} ln l_i) / (alpha + ln l_j)`.
pub fn dim_theorem1(spec: &Spectrum, alpha: &Alpha) -> Result<DimensionResult> {
    spec.require_expanding()?;
    alpha.validate()?;
    if alpha.is_infinite() {
        return Ok(infinite_result(spec, false));
    }
    let a = alpha.value();
    let l = spec.log_moduli();
    let d = l.len();
    let per_j: Vec<f64> = (0..d)
        .map(|j| {
            let tail: f64 = l[j + 1..].iter().sum();
            ((j + 1) as f64 * l[j] + tail) / (a + l[j])
        })
        .collect();
    let (value, argmin_j) = argmin(&per_j);
    let label = if spec.alpha_at_least_threshold(alpha) {
        DimLabel::Exact
    } else {
        DimLabel::UpperBound
    };
    Ok(DimensionResult {
        value,
        label,
        argmin_j,
        per_j,
        k_sets: None,
        alpha_threshold: alpha_threshold(spec).mid(),
    })
}

/// `d ln lambda / (alpha + ln lambda)`
pub fn dim_corollary_equal_moduli(d: usize, lambda: f64, alpha: f64) -> f64 {
    let l = lambda.ln();
    d as f64 * l / (alpha + l)
}

/// `K(j) = { i : ln l_i > ln l_j + alpha }`, 1-based.
pub fn k_set(spec: &Spectrum, alpha: &Alpha, j: usize) -> Result<Vec<usize>> {
    if j == 0 || j > spec.dim() {
        return Err(Error::InvalidArgument(format!("index j = {j} outside 1..={}", spec.dim())));
    }
    let mut out = Vec::new();
    for i in 0..spec.dim() {
        if spec.certified_exceeds(i, j - 1, alpha)? {
            out.push(i + 1);
        }
    }
    Ok(out)
}

/// The corrected formula
/// `min_j (j ln l_j + sum_{k in K(j)} (alpha + ln l_j - ln l_k) + sum_{i>j} ln l_i) / (ln l_j + alpha)`.
pub fn dim_theorem2(spec: &Spectrum, alpha: &Alpha) -> Result<DimensionResult> {
    spec.require_expanding()?;
    alpha.validate()?;
    if alpha.is_infinite() {
        return Ok(infinite_result(spec, true));
    }
    let a = alpha.value();
    let l = spec.log_moduli();
    let d = l.len();
    let mut per_j = Vec::with_capacity(d);
    let mut k_sets = Vec::with_capacity(d);
    for j in 0..d {
        let ks = k_set(spec, alpha, j + 1)?;
        let correction: f64 = ks
            .iter()
            .map(|&k| {
                let c = a + l[j] - l[k - 1];
                debug_assert!(c < 0.0, "K(j) correction must be negative");
                c
            })
            .sum();
        let tail: f64 = l[j + 1..].iter().sum();
        per_j.push(((j + 1) as f64 * l[j] + correction + tail) / (a + l[j]));
        k_sets.push(ks);
    }
    let (value, argmin_j) = argmin(&per_j);
    let label = if spec.integer_diagonalizable() || spec.alpha_at_least_threshold(alpha) {
        DimLabel::Exact
    } else {
        DimLabel::UpperBound
    };
    Ok(DimensionResult {
        value,
        label,
        argmin_j,
        per_j,
        k_sets: Some(k_sets),
        alpha_threshold: alpha_threshold(spec).mid(),
    })
}
