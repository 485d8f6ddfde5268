//! Box counting over half-open dyadic grids anchored at the origin, for
//! unions of ellipsoid families in dimension 1 or 2.
//!
//! In dimension 1 every ellipsoid is an interval with rational endpoints and
//! the cells it meets are found exactly. In dimension 2 a cell meets an
//! ellipse iff the minimum of the ellipse's quadratic form over the closed
//! cell is below `psi^2`; the minimum is found in closed form on the cell
//! edges.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;

use super::{least_squares_slope, EllipsoidShape};
use crate::error::{Error, Result};
use crate::exact_linalg::IntegerMatrix;
use crate::fgeom;
use crate::par::{self, Exec};
use crate::periodic_lattice::PeriodicLattice;
use crate::spectrum_dim::RateFunction;

pub const MAX_BOXES: u128 = 100_000_000;

/// `R_{n_lo}(psi) u ... u R_{n_hi}(psi)`, with centres streamed from the
/// period lattices.
#[derive(Clone, Debug)]
pub struct BoxRegion {
    levels: Vec<(PeriodicLattice, EllipsoidShape)>,
    dim: usize,
}

impl BoxRegion {
    pub fn new(a: &IntegerMatrix, psi: &RateFunction, n_lo: u32, n_hi: u32, cap: &BigInt) -> Result<Self> {
        if a.dim() > 2 {
            return Err(Error::InvalidArgument("box counting supports d <= 2".into()));
        }
        if n_lo == 0 || n_hi < n_lo {
            return Err(Error::InvalidArgument(format!("bad degree range {n_lo}:{n_hi}")));
        }
        let mut total = BigInt::from(0);
        let mut levels = Vec::new();
        for n in n_lo..=n_hi {
            let lattice = PeriodicLattice::new(a, n)?;
            total += lattice.cardinality();
            if &total > cap {
                return Err(Error::cap("box-count region", total, cap.clone()));
            }
            let shape = EllipsoidShape::new(a, lattice.spectrum(), n, psi)?;
            if shape.max_extent() >= 0.5 {
                return Err(Error::InvalidArgument(format!("ellipsoids of degree {n} are not small")));
            }
            levels.push((lattice, shape));
        }
        Ok(Self { levels, dim: a.dim() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.levels.iter().map(|(_, s)| s.degree()).collect()
    }

    fn count(&self, k: u32, which: &[usize]) -> Result<u64> {
        let per_axis = 1u128 << k;
        let boxes = per_axis.pow(self.dim as u32);
        if boxes > MAX_BOXES {
            return Err(Error::ScaleTooFine {
                exponent: k,
                boxes,
                limit: MAX_BOXES,
            });
        }
        let mut grid = vec![0u64; (boxes as usize).div_ceil(64)];
        let mut mark = |i: usize| grid[i / 64] |= 1 << (i % 64);
        for &li in which {
            let (lattice, shape) = &self.levels[li];
            match self.dim {
                1 => mark_intervals(lattice, shape, k, &mut mark),
                _ => mark_ellipses(lattice, shape, k, &mut mark),
            }
        }
        Ok(grid.iter().map(|w| w.count_ones() as u64).sum())
    }
}

fn mark_intervals(lattice: &PeriodicLattice, shape: &EllipsoidShape, k: u32, mark: &mut impl FnMut(usize)) {
    let q = lattice.denom();
    let m = shape.shift_matrix().get(0, 0).clone();
    let half = shape.psi() / BigRational::from_integer(num_traits::Signed::abs(&m));
    let scale = BigRational::from_integer(BigInt::from(1u64) << k);
    let per_axis = 1i64 << k;
    for t in 0..lattice.len() {
        let c = BigRational::new(lattice.numerators(t)[0].into(), q.into());
        let lo = ((&c - &half) * &scale).floor().to_integer();
        let hi: BigInt = ((&c + &half) * &scale).ceil().to_integer() - 1;
        let (lo, hi) = (lo.to_i64().expect("small"), hi.to_i64().expect("small"));
        for j in lo..=hi {
            mark(j.rem_euclid(per_axis) as usize);
        }
    }
}

fn mark_ellipses(lattice: &PeriodicLattice, shape: &EllipsoidShape, k: u32, mark: &mut impl FnMut(usize)) {
    let q = lattice.denom() as f64;
    let g = shape.gram_f64();
    let psi2 = shape.psi_f64().powi(2) * (1.0 + 1e-12);
    let inv = lattice.inverse().to_f64_rows();
    let h: Vec<f64> = inv.iter().map(|r| shape.psi_f64() * fgeom::norm(r) * (1.0 + 1e-12)).collect();
    let side = 1.0 / (1u64 << k) as f64;
    let per_axis = 1i64 << k;
    for t in 0..lattice.len() {
        let c: Vec<f64> = lattice.numerators(t).iter().map(|&x| x as f64 / q).collect();
        let lo: Vec<i64> = (0..2).map(|i| ((c[i] - h[i]) / side).floor() as i64).collect();
        let hi: Vec<i64> = (0..2).map(|i| ((c[i] + h[i]) / side).floor() as i64).collect();
        for i in lo[0]..=hi[0] {
            for j in lo[1]..=hi[1] {
                let lo = [i as f64 * side - c[0], j as f64 * side - c[1]];
                let hit = fgeom::box_form_min(g, &lo, side) < psi2;
                if hit {
                    let ci = i.rem_euclid(per_axis) as usize;
                    let cj = j.rem_euclid(per_axis) as usize;
                    mark(ci * per_axis as usize + cj);
                }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScaleCount {
    /// Side length `2^-exponent`.
    pub exponent: u32,
    pub side: f64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MatchedLevelCount {
    pub exponent: u32,
    pub degree: u32,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoxCountReport {
    pub scales: Vec<ScaleCount>,
    /// Least-squares slope of `ln count` against `ln(1/side)`.
    pub slope: f64,
    /// Counts never increase as the side grows.
    pub monotone: bool,
    /// Per scale, the count for the single degree whose ellipsoid diameter is
    /// within a factor 2 of the side (scales without such a degree omitted).
    pub matched: Vec<MatchedLevelCount>,
    pub matched_slope: Option<f64>,
}

pub fn box_count_dimension(region: &BoxRegion, exponents: &[u32]) -> Result<BoxCountReport> {
    box_count_dimension_with(Exec::default(), region, exponents)
}

pub fn box_count_dimension_with(exec: Exec, region: &BoxRegion, exponents: &[u32]) -> Result<BoxCountReport> {
    if exponents.is_empty() {
        return Err(Error::InvalidArgument("no scales given".into()));
    }
    let mut exps = exponents.to_vec();
    exps.sort_unstable();
    exps.dedup();
    let all: Vec<usize> = (0..region.levels.len()).collect();
    let counts = par::map_collect(exec, &exps, |&k| region.count(k, &all))
        .into_iter()
        .collect::<Result<Vec<u64>>>()?;
    let scales: Vec<ScaleCount> = exps
        .iter()
        .zip(&counts)
        .map(|(&k, &count)| ScaleCount {
            exponent: k,
            side: 0.5f64.powi(k as i32),
            count,
        })
        .collect();
    let xs: Vec<f64> = exps.iter().map(|&k| k as f64 * std::f64::consts::LN_2).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| (c.max(1) as f64).ln()).collect();
    let monotone = counts.windows(2).all(|w| w[0] <= w[1]);

    let matched_plan: Vec<(u32, usize)> = exps
        .iter()
        .filter_map(|&k| {
            let side = 0.5f64.powi(k as i32);
            region
                .levels
                .iter()
                .enumerate()
                .map(|(i, (_, s))| (i, (2.0 * s.semi_axes_exact()[0] / side).ln().abs()))
                .filter(|(_, dev)| *dev <= std::f64::consts::LN_2 + 1e-9)
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .map(|(i, _)| (k, i))
        })
        .collect();
    let matched = par::map_collect(exec, &matched_plan, |&(k, i)| {
        region.count(k, &[i]).map(|count| MatchedLevelCount {
            exponent: k,
            degree: region.levels[i].1.degree(),
            count,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let matched_slope = (matched.len() >= 2).then(|| {
        let xs: Vec<f64> = matched.iter().map(|m| m.exponent as f64 * std::f64::consts::LN_2).collect();
        let ys: Vec<f64> = matched.iter().map(|m| (m.count.max(1) as f64).ln()).collect();
        least_squares_slope(&xs, &ys)
    });
    Ok(BoxCountReport {
        slope: least_squares_slope(&xs, &ys),
        scales,
        monotone,
        matched,
        matched_slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum_dim::Alpha;

    #[test]
    fn single_interval_has_slope_one() {
        // one degree-1 interval for A = [2]: centre 0, half-width psi(1)
        let psi = RateFunction::table(vec![0.3]).unwrap();
        let region = BoxRegion::new(&IntegerMatrix::diag(&[2]), &psi, 1, 1, &BigInt::from(10)).unwrap();
        let rep = box_count_dimension(&region, &[6, 7, 8, 9, 10]).unwrap();
        assert!((rep.slope - 1.0).abs() < 0.02, "{}", rep.slope);
        // (-0.3, 0.3) covers ceil(0.3 * 64) = 20 cells each side
        assert_eq!(rep.scales[0].count, 40);
    }

    #[test]
    fn counts_are_monotone_and_bounded() {
        let psi = RateFunction::exponential(Alpha::ln(2)).unwrap();
        let region = BoxRegion::new(&IntegerMatrix::diag(&[2]), &psi, 6, 8, &BigInt::from(10_000)).unwrap();
        let rep = box_count_dimension(&region, &[2, 4, 6, 8, 10]).unwrap();
        assert!(rep.monotone);
        for s in &rep.scales {
            assert!(s.count <= 1 << s.exponent);
        }
    }

    #[test]
    fn planar_matches_pointwise_oracle() {
        let psi = RateFunction::exponential(Alpha::ln(3)).unwrap();
        let a = IntegerMatrix::from_i64_rows(&[[2, 1], [1, 3]]).unwrap();
        let region = BoxRegion::new(&a, &psi, 2, 2, &BigInt::from(1000)).unwrap();
        let k = 6;
        let got = region.count(k, &[0]).unwrap();
        // oracle: sample each cell on a fine sub-grid; anything it finds must
        // be counted, and the exact count cannot exceed the bounding boxes
        let (lattice, shape) = &region.levels[0];
        let centres: Vec<Vec<f64>> = (0..lattice.len())
            .map(|t| lattice.numerators(t).iter().map(|&x| x as f64 / lattice.denom() as f64).collect())
            .collect();
        let side = 1.0 / 64.0;
        let mut sampled = 0u64;
        for i in 0..64 {
            for j in 0..64 {
                let hit = (0..=8).any(|a| {
                    (0..=8).any(|b| {
                        let y = [(i as f64 + a as f64 / 8.0) * side, (j as f64 + b as f64 / 8.0) * side];
                        centres.iter().any(|c| {
                            let v: Vec<f64> = (0..2).map(|t| crate::torus::centered_f64(y[t] - c[t])).collect();
                            shape.form_f64(&v) < shape.psi_f64().powi(2)
                        })
                    })
                });
                sampled += hit as u64;
            }
        }
        assert!(sampled <= got);
        assert!(got <= sampled + sampled / 2 + 4, "{got} vs {sampled}");
    }

    #[test]
    fn rejects_fine_scales() {
        let psi = RateFunction::exponential(Alpha::ln(3)).unwrap();
        let a = IntegerMatrix::from_i64_rows(&[[2, 1], [1, 3]]).unwrap();
        let region = BoxRegion::new(&a, &psi, 2, 2, &BigInt::from(1000)).unwrap();
        assert!(matches!(box_count_dimension(&region, &[14]), Err(Error::ScaleTooFine { .. })));
    }
}
