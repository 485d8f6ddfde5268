//! Ball covers of the ellipsoids and the Hausdorff-measure series bounding
//! `H^s(R(psi))` from above.
//!
//! One degree-`n` ellipsoid is covered by `prod_{j<=k} (l_k^n - 1)/(l_j^n - 1)`
//! balls of diameter `2 psi(n) / (l_k^n - 1)`, and there are
//! `H_n = prod_j (l_j^n - 1)` of them. All quantities are handled in log
//! space so long ranges of `n` do not overflow.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::spectrum_dim::{RateFunction, Spectrum};

/// `ln(x^n - 1)` for `ln x = l > 0`, accurate for large `n l`.
pub(crate) fn ln_pow_minus_one(l: f64, n: u32) -> f64 {
    let t = n as f64 * l;
    t + (-(-t).exp()).ln_1p()
}

fn ln_psi(psi: &RateFunction, n: u32) -> f64 {
    match psi {
        RateFunction::Exponential(a) => -a.value() * n as f64,
        RateFunction::Table(_) => psi.value(n).ln(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoveringCount {
    pub degree: u32,
    pub k: usize,
    /// Balls per ellipsoid.
    pub per_ellipsoid: f64,
    pub ln_per_ellipsoid: f64,
    /// `ln H_n` from the moduli.
    pub ln_h: f64,
    /// `ln l_{n,k}`, the log ball diameter.
    pub ln_diameter: f64,
}

impl CoveringCount {
    /// `ln(H_n * count * l_{n,k}^s)`
    pub fn ln_s_cost(&self, s: f64) -> f64 {
        self.ln_h + self.ln_per_ellipsoid + s * self.ln_diameter
    }

    pub fn s_cost(&self, s: f64) -> f64 {
        self.ln_s_cost(s).exp()
    }
}

pub fn covering_count(spec: &Spectrum, n: u32, psi: &RateFunction, k: usize) -> Result<CoveringCount> {
    let d = spec.dim();
    if k == 0 || k > d {
        return Err(Error::InvalidArgument(format!("index k = {k} outside 1..={d}")));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("degree must be at least 1".into()));
    }
    psi.ensure_covers(n)?;
    if !spec.is_expanding() {
        return Err(Error::InvalidSpectrum("covering counts need all moduli > 1".into()));
    }
    let lp: Vec<f64> = spec.log_moduli().iter().map(|&l| ln_pow_minus_one(l, n)).collect();
    let ln_per: f64 = (0..k).map(|j| lp[k - 1] - lp[j]).sum();
    Ok(CoveringCount {
        degree: n,
        k,
        per_ellipsoid: ln_per.exp(),
        ln_per_ellipsoid: ln_per,
        ln_h: lp.iter().sum(),
        ln_diameter: std::f64::consts::LN_2 + ln_psi(psi, n) - lp[k - 1],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesVerdict {
    Converging,
    Diverging,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UpperBoundSum {
    pub s: f64,
    pub n_range: (u32, u32),
    /// `ln` of each term `min_k H_n count_k l_{n,k}^s`.
    pub ln_terms: Vec<f64>,
    /// Minimising `k` for each term.
    pub best_k: Vec<usize>,
    pub ln_partial_sum: f64,
    /// Geometric-mean ratio of successive terms over the second half.
    pub tail_ratio: f64,
    pub verdict: SeriesVerdict,
}

/// Margin below 1 the tail ratio must clear to count as converging.
pub const CONVERGENCE_MARGIN: f64 = 1e-3;

pub fn upper_bound_sum(spec: &Spectrum, psi: &RateFunction, s: f64, n_lo: u32, n_hi: u32) -> Result<UpperBoundSum> {
    let d = spec.dim() as f64;
    if !(s > 0.0 && s <= d) {
        return Err(Error::InvalidArgument(format!("s = {s} outside (0, {d}]")));
    }
    if n_lo == 0 || n_hi <= n_lo {
        return Err(Error::InvalidArgument(format!("bad degree range {n_lo}:{n_hi}")));
    }
    let mut ln_terms = Vec::new();
    let mut best_k = Vec::new();
    for n in n_lo..=n_hi {
        let mut best = (f64::INFINITY, 0usize);
        for k in 1..=spec.dim() {
            let c = covering_count(spec, n, psi, k)?.ln_s_cost(s);
            if c < best.0 {
                best = (c, k);
            }
        }
        ln_terms.push(best.0);
        best_k.push(best.1);
    }
    let max = ln_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ln_partial_sum = max + ln_terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln();
    let mid = ln_terms.len() / 2;
    let steps = (ln_terms.len() - 1 - mid) as f64;
    let tail_ratio = ((ln_terms[ln_terms.len() - 1] - ln_terms[mid]) / steps).exp();
    let verdict = if tail_ratio < 1.0 - CONVERGENCE_MARGIN {
        SeriesVerdict::Converging
    } else if tail_ratio >= 1.0 {
        SeriesVerdict::Diverging
    } else {
        SeriesVerdict::Inconclusive
    };
    Ok(UpperBoundSum {
        s,
        n_range: (n_lo, n_hi),
        ln_terms,
        best_k,
        ln_partial_sum,
        tail_ratio,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum_dim::{dim_theorem1, Alpha};

    #[test]
    fn product_example() {
        let spec = Spectrum::from_integers(&[2, 4]).unwrap();
        let psi = RateFunction::exponential(Alpha::ln(8)).unwrap();
        let c = covering_count(&spec, 3, &psi, 2).unwrap();
        assert!((c.per_ellipsoid - 9.0).abs() < 1e-12);
        let c = covering_count(&spec, 3, &psi, 1).unwrap();
        assert_eq!(c.per_ellipsoid, 1.0);
    }

    #[test]
    fn equal_moduli_single_ball() {
        let spec = Spectrum::from_integers(&[3, 3, 3]).unwrap();
        let psi = RateFunction::exponential(Alpha::ln(2)).unwrap();
        let c = covering_count(&spec, 5, &psi, 3).unwrap();
        assert!((c.per_ellipsoid - 1.0).abs() < 1e-12);
    }

    #[test]
    fn verdicts_around_formula_value() {
        let spec = Spectrum::from_integers(&[2, 4]).unwrap();
        let psi = RateFunction::exponential(Alpha::ln(8)).unwrap();
        let v = dim_theorem1(&spec, &Alpha::ln(8)).unwrap().value;
        let up = upper_bound_sum(&spec, &psi, v + 0.05, 5, 60).unwrap();
        assert_eq!(up.verdict, SeriesVerdict::Converging);
        let down = upper_bound_sum(&spec, &psi, v - 0.05, 5, 60).unwrap();
        assert_eq!(down.verdict, SeriesVerdict::Diverging);
        let full = upper_bound_sum(&spec, &psi, 2.0, 5, 60).unwrap();
        assert_eq!(full.verdict, SeriesVerdict::Converging);
    }
}
