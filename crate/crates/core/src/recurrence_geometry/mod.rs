//! The recurrence sets `R_n(psi) = { x : (A^n - I) x mod 1 in B(0, psi(n)) }`
//! as unions of `H_n` translated ellipsoids `(A^n - I)^{-1} B(0, psi(n)) + y`,
//! `y` ranging over the period-`n` points.

mod boxcount;
pub(crate) mod covering;
mod orbit;
mod separation;

pub use boxcount::{box_count_dimension, box_count_dimension_with, BoxCountReport, BoxRegion, ScaleCount};
pub use covering::{covering_count, upper_bound_sum, CoveringCount, SeriesVerdict, UpperBoundSum};
pub use orbit::{
    boshernitzan_statistic, orbit_record, random_rational_point, recurrence_indices, recurrence_indices_f64,
    BoshernitzanStatistic, OrbitRecord, RationalOrbit,
};
pub use separation::{
    ellipsoid_min_distance, ellipsoid_min_distance_scan, lattice_min_distance, SeparationReport,
};

use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use serde::ser::SerializeStruct;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_linalg::{eigen_moduli, rational_to_f64, singular_values, IntegerMatrix};
use crate::fgeom::{self, Mat};
use crate::interval::Interval;
use crate::par::Exec;
use crate::periodic_lattice::{PeriodicLattice, PeriodicSet};
use crate::serde_util;
use crate::spectrum_dim::{RateFunction, Spectrum};
use crate::torus;

const SV_TOL: f64 = 1e-12;

/// Data shared by all ellipsoids of one degree.
#[derive(Clone, Debug)]
pub struct EllipsoidShape {
    degree: u32,
    psi: BigRational,
    psi_f64: f64,
    m: IntegerMatrix,
    m_f64: Mat,
    m_inv_t_f64: Mat,
    gram_f64: Mat,
    semi_axes_bounds: Vec<Interval>,
    semi_axes_model: Vec<f64>,
}

impl EllipsoidShape {
    pub fn new(a: &IntegerMatrix, spectrum: &Spectrum, n: u32, psi: &RateFunction) -> Result<Self> {
        psi.ensure_covers(n)?;
        let m = a.pow(n).minus_identity();
        let inv = m.to_rational().inverse()?;
        let m_f64 = m.to_f64_rows();
        let m_inv_t_f64 = inv.transpose().to_f64_rows();
        let gram_f64 = fgeom::mat_mul(&fgeom::transpose(&m_f64), &m_f64);
        let psi_q = psi.rational(n);
        let psi_i = Interval::from_rational(&psi_q);
        let sigma = singular_values(&m, SV_TOL)?;
        // semi-axes psi / sigma_j, descending as sigma ascends
        let semi_axes_bounds = sigma.iter().map(|s| psi_i / *s).collect();
        let semi_axes_model = spectrum
            .values()
            .iter()
            .map(|l| psi.value(n) / (l.powi(n as i32) - 1.0))
            .collect();
        Ok(Self {
            degree: n,
            psi_f64: rational_to_f64(&psi_q),
            psi: psi_q,
            m,
            m_f64,
            m_inv_t_f64,
            gram_f64,
            semi_axes_bounds,
            semi_axes_model,
        })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn psi(&self) -> &BigRational {
        &self.psi
    }

    pub fn psi_f64(&self) -> f64 {
        self.psi_f64
    }

    /// `A^n - I`
    pub fn shift_matrix(&self) -> &IntegerMatrix {
        &self.m
    }

    pub fn shift_matrix_f64(&self) -> &Mat {
        &self.m_f64
    }

    /// `(A^n - I)^T (A^n - I)` in `f64`.
    pub fn gram_f64(&self) -> &Mat {
        &self.gram_f64
    }

    /// `psi(n) sigma_j((A^n - I)^{-1})`, descending.
    pub fn semi_axes_exact(&self) -> Vec<f64> {
        self.semi_axes_bounds.iter().map(Interval::mid).collect()
    }

    pub fn semi_axes_bounds(&self) -> &[Interval] {
        &self.semi_axes_bounds
    }

    /// `psi(n) / (|lambda_j|^n - 1)`, descending.
    pub fn semi_axes_model(&self) -> &[f64] {
        &self.semi_axes_model
    }

    /// Certified upper bound on the longest semi-axis.
    pub fn max_extent(&self) -> f64 {
        self.semi_axes_bounds[0].hi
    }

    /// Certified lower bound on the shortest semi-axis.
    pub fn min_extent(&self) -> f64 {
        self.semi_axes_bounds[self.dim() - 1].lo
    }

    /// `|(A^n - I) v|^2`
    pub fn form(&self, v: &[BigRational]) -> BigRational {
        self.m
            .mul_rational_vec(v)
            .into_iter()
            .fold(BigRational::zero(), |acc, y| acc + &y * &y)
    }

    pub fn form_f64(&self, v: &[f64]) -> f64 {
        fgeom::mat_vec(&self.m_f64, v).iter().map(|y| y * y).sum()
    }

    /// Support function of the centred ellipsoid: `psi |M^{-T} u|`.
    pub fn support(&self, u: &[f64]) -> f64 {
        self.psi_f64 * fgeom::norm(&fgeom::mat_vec(&self.m_inv_t_f64, u))
    }

    /// `psi M^{-1} u`: maps the unit ball onto the centred ellipsoid.
    pub fn displacement(&self, u: &[f64]) -> Vec<f64> {
        fgeom::mat_vec(&fgeom::transpose(&self.m_inv_t_f64), u)
            .into_iter()
            .map(|y| self.psi_f64 * y)
            .collect()
    }

    /// Half-widths of the axis-aligned bounding box, slightly widened.
    pub fn bounding_half_widths(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let e: Vec<f64> = (0..self.dim()).map(|j| if i == j { 1.0 } else { 0.0 }).collect();
                self.support(&e) * (1.0 + 1e-12)
            })
            .collect()
    }

    /// Membership of a displacement `v` (not reduced), strict.
    pub fn contains_displacement(&self, v: &[BigRational]) -> bool {
        self.form(v) < &self.psi * &self.psi
    }
}

/// `center + (A^n - I)^{-1} B(0, psi(n))` on the torus.
#[derive(Clone, Debug)]
pub struct Ellipsoid {
    center: Vec<BigRational>,
    shape: Arc<EllipsoidShape>,
}

impl Ellipsoid {
    pub fn new(center: Vec<BigRational>, shape: Arc<EllipsoidShape>) -> Self {
        Self {
            center: torus::canonical(&center),
            shape,
        }
    }

    pub fn center(&self) -> &[BigRational] {
        &self.center
    }

    pub fn center_f64(&self) -> Vec<f64> {
        self.center.iter().map(rational_to_f64).collect()
    }

    pub fn shape(&self) -> &EllipsoidShape {
        &self.shape
    }

    pub fn shared_shape(&self) -> &Arc<EllipsoidShape> {
        &self.shape
    }

    pub fn degree(&self) -> u32 {
        self.shape.degree
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Exact membership: `|(A^n - I)(x - center + k)| < psi(n)` for some
    /// `k` among the `3^d` translates of the centred difference.
    pub fn contains(&self, x: &[BigRational]) -> bool {
        let v: Vec<BigRational> = x.iter().zip(&self.center).map(|(a, b)| torus::centered(&(a - b))).collect();
        torus::unit_offsets(self.dim()).iter().any(|k| {
            let w: Vec<BigRational> = v
                .iter()
                .zip(k)
                .map(|(a, &o)| a + BigRational::from_integer(BigInt::from(o)))
                .collect();
            self.shape.contains_displacement(&w)
        })
    }

    pub fn contains_f64(&self, x: &[f64]) -> bool {
        let c = self.center_f64();
        let v: Vec<f64> = x.iter().zip(&c).map(|(a, b)| torus::centered_f64(a - b)).collect();
        let psi2 = self.shape.psi_f64 * self.shape.psi_f64;
        torus::unit_offsets(self.dim()).iter().any(|k| {
            let w: Vec<f64> = v.iter().zip(k).map(|(a, &o)| a + o as f64).collect();
            self.shape.form_f64(&w) < psi2
        })
    }
}

impl Serialize for Ellipsoid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let center: Vec<String> = self.center.iter().map(serde_util::rational_string).collect();
        let mut st = s.serialize_struct("Ellipsoid", 5)?;
        st.serialize_field("center", &center)?;
        st.serialize_field("degree", &self.shape.degree)?;
        st.serialize_field("psi", &serde_util::rational_string(&self.shape.psi))?;
        st.serialize_field("semi_axes_exact", &self.shape.semi_axes_exact())?;
        st.serialize_field("semi_axes_model", &self.shape.semi_axes_model)?;
        st.end()
    }
}

fn check_psi_below_half(psi: &RateFunction, n: u32) -> Result<()> {
    psi.ensure_covers(n)?;
    let two = BigRational::from_integer(BigInt::from(2));
    if psi.rational(n) * two >= BigRational::from_integer(BigInt::from(1)) {
        return Err(Error::InvalidArgument(format!("psi({n}) must be below 1/2")));
    }
    Ok(())
}

/// `x in R_n(psi)`, exactly: `rho((A^n - I) x mod 1, 0) < psi(n)`.
pub fn membership(x: &[BigRational], a: &IntegerMatrix, n: u32, psi: &RateFunction) -> Result<bool> {
    check_psi_below_half(psi, n)?;
    let y = a.pow(n).minus_identity().mul_rational_vec(x);
    let p = psi.rational(n);
    Ok(torus::dist2_to_zero(&y) < &p * &p)
}

/// The dynamical form `rho(T^n x, x) < psi(n)`, iterating `T` exactly.
pub fn membership_dynamical(x: &[BigRational], a: &IntegerMatrix, n: u32, psi: &RateFunction) -> Result<bool> {
    check_psi_below_half(psi, n)?;
    let mut y = torus::canonical(x);
    for _ in 0..n {
        y = torus::canonical(&a.mul_rational_vec(&y));
    }
    let p = psi.rational(n);
    Ok(torus::dist2(&y, x) < &p * &p)
}

/// Algebraic membership for a floating point.
pub fn membership_f64(x: &[f64], a: &IntegerMatrix, n: u32, psi: &RateFunction) -> Result<bool> {
    check_psi_below_half(psi, n)?;
    let m = a.pow(n).minus_identity().to_f64_rows();
    let y: Vec<f64> = fgeom::mat_vec(&m, x);
    let zero = vec![0.0; x.len()];
    Ok(torus::dist_f64(&y, &zero) < psi.value(n))
}

/// Dynamical membership for a floating point, iterating `T` in `f64`.
pub fn membership_dynamical_f64(x: &[f64], a: &IntegerMatrix, n: u32, psi: &RateFunction) -> Result<bool> {
    check_psi_below_half(psi, n)?;
    let af = a.to_f64_rows();
    let mut y = x.to_vec();
    for _ in 0..n {
        y = fgeom::mat_vec(&af, &y).into_iter().map(torus::frac_f64).collect();
    }
    Ok(torus::dist_f64(&y, x) < psi.value(n))
}

/// All `H_n` ellipsoids of `R_n(psi)`.
#[derive(Clone, Debug)]
pub struct EllipsoidFamily {
    psi: RateFunction,
    shape: Arc<EllipsoidShape>,
    lattice: PeriodicLattice,
    centers: PeriodicSet,
}

impl EllipsoidFamily {
    pub fn degree(&self) -> u32 {
        self.shape.degree
    }

    pub fn psi(&self) -> &RateFunction {
        &self.psi
    }

    pub fn shape(&self) -> &Arc<EllipsoidShape> {
        &self.shape
    }

    pub fn lattice(&self) -> &PeriodicLattice {
        &self.lattice
    }

    pub fn centers(&self) -> &PeriodicSet {
        &self.centers
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn member(&self, i: usize) -> Ellipsoid {
        Ellipsoid::new(self.centers.point(i), self.shape.clone())
    }

    pub fn members(&self) -> impl Iterator<Item = Ellipsoid> + '_ {
        (0..self.len()).map(|i| self.member(i))
    }

    /// Membership in the union, by search over the member ellipsoids.
    pub fn contains(&self, x: &[BigRational]) -> bool {
        self.members().any(|e| e.contains(x))
    }
}

pub fn decompose_rn(a: &IntegerMatrix, n: u32, psi: &RateFunction, cap: &BigInt) -> Result<EllipsoidFamily> {
    decompose_rn_with(Exec::default(), a, n, psi, cap)
}

pub fn decompose_rn_with(
    exec: Exec,
    a: &IntegerMatrix,
    n: u32,
    psi: &RateFunction,
    cap: &BigInt,
) -> Result<EllipsoidFamily> {
    check_psi_below_half(psi, n)?;
    let h = crate::periodic_lattice::count_periodic(a, n)?;
    if &h > cap {
        return Err(Error::cap("ellipsoid family", h, cap.clone()));
    }
    let lattice = PeriodicLattice::new(a, n)?;
    let shape = Arc::new(EllipsoidShape::new(a, lattice.spectrum(), n, psi)?);
    let centers = lattice.to_set(exec);
    Ok(EllipsoidFamily {
        psi: psi.clone(),
        shape,
        lattice,
        centers,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemiAxesReport {
    pub degree: u32,
    pub exact: Vec<f64>,
    pub model: Vec<f64>,
    /// `exact_j / model_j`
    pub ratios: Vec<f64>,
}

pub fn semi_axes(a: &IntegerMatrix, n: u32, psi: &RateFunction) -> Result<SemiAxesReport> {
    let spectrum = eigen_moduli(a, SV_TOL)?;
    semi_axes_for(a, &spectrum, n, psi)
}

fn semi_axes_for(a: &IntegerMatrix, spectrum: &Spectrum, n: u32, psi: &RateFunction) -> Result<SemiAxesReport> {
    if n == 0 {
        return Err(Error::InvalidArgument("degree must be at least 1".into()));
    }
    let shape = EllipsoidShape::new(a, spectrum, n, psi)?;
    let exact = shape.semi_axes_exact();
    let model = shape.semi_axes_model().to_vec();
    let ratios = exact.iter().zip(&model).map(|(e, m)| e / m).collect();
    Ok(SemiAxesReport {
        degree: n,
        exact,
        model,
        ratios,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SemiAxesSweep {
    pub reports: Vec<SemiAxesReport>,
    /// Least-squares slope of `ln max_j max(r_j, 1/r_j)` against `ln n`.
    pub fitted_exponent: f64,
    pub max_deviation: f64,
}

pub fn semi_axes_sweep(a: &IntegerMatrix, psi: &RateFunction, n_lo: u32, n_hi: u32) -> Result<SemiAxesSweep> {
    if n_lo == 0 || n_hi < n_lo {
        return Err(Error::InvalidArgument(format!("bad degree range {n_lo}:{n_hi}")));
    }
    let spectrum = eigen_moduli(a, SV_TOL)?;
    let reports = (n_lo..=n_hi)
        .map(|n| semi_axes_for(a, &spectrum, n, psi))
        .collect::<Result<Vec<_>>>()?;
    let dev: Vec<f64> = reports
        .iter()
        .map(|r| r.ratios.iter().map(|&x| x.max(1.0 / x)).fold(1.0, f64::max))
        .collect();
    let xs: Vec<f64> = reports.iter().map(|r| (r.degree as f64).ln()).collect();
    let ys: Vec<f64> = dev.iter().map(|v| v.ln()).collect();
    Ok(SemiAxesSweep {
        fitted_exponent: least_squares_slope(&xs, &ys),
        max_deviation: dev.iter().copied().fold(1.0, f64::max),
        reports,
    })
}

/// Slope of the least-squares line through `(x_i, y_i)`; 0 for fewer than
/// two distinct abscissae.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
