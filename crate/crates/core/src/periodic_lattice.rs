//! Periodic points `P_n = { x : (A^n - I) x = 0 mod 1 }`.
//!
//! `P_n` is the group `M^{-1} Z^d / Z^d` with `M = A^n - I`. Writing the Smith
//! form `M = U S V`, its elements are `V^{-1} (k_1/s_1, ..., k_d/s_d) mod 1`
//! for `0 <= k_i < s_i`, all distinct because `V` is unimodular. Every point
//! has denominator dividing `q = s_d`, so points are stored as numerator
//! vectors over `q`.

use std::sync::Arc;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::ser::{SerializeSeq, SerializeStruct};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_linalg::{eigen_moduli, has_root_of_unity, smith_normal_form, IntegerMatrix, RationalMatrix};
use crate::fgeom::{self, Mat};
use crate::par::{self, Exec};
use crate::recurrence_geometry::Ellipsoid;
use crate::spectrum_dim::Spectrum;
use crate::torus;

const CHUNK: u64 = 4096;
const CANDIDATE_LIMIT: u64 = 200_000_000;

/// `H_n = |det(A^n - I)|`.
pub fn count_periodic(a: &IntegerMatrix, n: u32) -> Result<BigInt> {
    if n == 0 {
        return Err(Error::InvalidArgument("period must be at least 1".into()));
    }
    if has_root_of_unity(&a.char_poly()) {
        return Err(Error::RootOfUnity);
    }
    Ok(a.pow(n).minus_identity().det().abs())
}

/// Generator for `P_n`: random access by index, streamed counting, and
/// region queries, without materializing all points.
#[derive(Clone, Debug)]
pub struct PeriodicLattice {
    a: IntegerMatrix,
    period: u32,
    m: IntegerMatrix,
    spectrum: Arc<Spectrum>,
    cardinality: BigInt,
    len: u64,
    denom: u64,
    radices: Vec<u64>,
    // weights[c][r]: numerator of coordinate r contributed by one unit of k_c
    weights: Vec<Vec<u64>>,
    scaled_inverse: IntegerMatrix,
    inverse: RationalMatrix,
    inverse_f64: Mat,
}

impl PeriodicLattice {
    pub fn new(a: &IntegerMatrix, n: u32) -> Result<Self> {
        let cardinality = count_periodic(a, n)?;
        let len = cardinality
            .to_u64()
            .filter(|&h| h < 1 << 62)
            .ok_or_else(|| Error::cap("periodic point set", cardinality.clone(), BigInt::from(1u64 << 62)))?;
        let m = a.pow(n).minus_identity();
        let snf = smith_normal_form(&m)?;
        let radices: Vec<u64> = snf
            .invariant_factors()
            .iter()
            .map(|s| s.to_u64().expect("invariant factor bounded by H_n"))
            .collect();
        let denom = *radices.last().expect("dim >= 1");
        let d = m.dim();
        let q = BigInt::from(denom);
        let v_inv = snf.v_inverse();
        let weights = (0..d)
            .map(|c| {
                let step = denom / radices[c];
                (0..d)
                    .map(|r| {
                        let e = v_inv.get(r, c).mod_floor(&q).to_u64().expect("reduced mod q");
                        ((e as u128 * step as u128) % denom as u128) as u64
                    })
                    .collect()
            })
            .collect();
        let inverse = m.to_rational().inverse()?;
        let scaled_inverse = inverse
            .scaled_to_integer(&q)
            .expect("q (A^n - I)^{-1} is integral");
        let inverse_f64 = inverse.to_f64_rows();
        let spectrum = Arc::new(eigen_moduli(a, 1e-12)?);
        Ok(Self {
            a: a.clone(),
            period: n,
            m,
            spectrum,
            cardinality,
            len,
            denom,
            radices,
            weights,
            scaled_inverse,
            inverse,
            inverse_f64,
        })
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn matrix(&self) -> &IntegerMatrix {
        &self.a
    }

    /// `A^n - I`
    pub fn shift_matrix(&self) -> &IntegerMatrix {
        &self.m
    }

    pub fn inverse(&self) -> &RationalMatrix {
        &self.inverse
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn cardinality(&self) -> &BigInt {
        &self.cardinality
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Common denominator `q` of all points.
    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn invariant_factors(&self) -> &[u64] {
        &self.radices
    }

    /// Numerators over [`Self::denom`] of the point with index `t`.
    pub fn numerators(&self, t: u64) -> Vec<u64> {
        let mut out = vec![0u64; self.dim()];
        self.numerators_into(t, &mut out);
        out
    }

    fn numerators_into(&self, mut t: u64, out: &mut [u64]) {
        let q = self.denom as u128;
        out.iter_mut().for_each(|x| *x = 0);
        for (c, &s) in self.radices.iter().enumerate() {
            let k = t % s;
            t /= s;
            if k == 0 {
                continue;
            }
            for (r, x) in out.iter_mut().enumerate() {
                *x = ((*x as u128 + self.weights[c][r] as u128 * k as u128) % q) as u64;
            }
        }
    }

    pub fn point(&self, t: u64) -> Vec<BigRational> {
        self.numerators(t)
            .into_iter()
            .map(|x| BigRational::new(x.into(), self.denom.into()))
            .collect()
    }

    /// Exact check that `num / q` lies in `P_n`.
    pub fn is_member(&self, num: &[u64]) -> bool {
        let v: Vec<BigInt> = num.iter().map(|&x| BigInt::from(x)).collect();
        let q = BigInt::from(self.denom);
        self.m.mul_vec(&v).iter().all(|y| (y % &q).is_zero())
    }

    /// Number of points satisfying `pred`, streaming over all of `P_n`.
    pub fn count_where<F>(&self, exec: Exec, pred: F) -> u64
    where
        F: Fn(&[u64]) -> bool + Sync + Send,
    {
        let chunks = self.len.div_ceil(CHUNK);
        par::sum_range(exec, 0..chunks, |c| {
            let mut buf = vec![0u64; self.dim()];
            let end = ((c + 1) * CHUNK).min(self.len);
            (c * CHUNK..end)
                .filter(|&t| {
                    self.numerators_into(t, &mut buf);
                    pred(&buf)
                })
                .count() as u64
        })
    }

    /// All points, canonical in `[0,1)^d`, sorted lexicographically.
    pub fn collect(&self, exec: Exec) -> Vec<Vec<u64>> {
        let chunks = self.len.div_ceil(CHUNK);
        let mut pts: Vec<Vec<u64>> = par::map_range(exec, 0..chunks, |c| {
            let end = ((c + 1) * CHUNK).min(self.len);
            (c * CHUNK..end).map(|t| self.numerators(t)).collect::<Vec<_>>()
        })
        .into_iter()
        .flatten()
        .collect();
        pts.sort_unstable();
        pts
    }

    pub fn inverse_f64(&self) -> &Mat {
        &self.inverse_f64
    }

    /// Whether `M^{-1} z` is an integer vector, i.e. `z` lifts the zero point.
    pub fn lifts_zero(&self, z: &[i64]) -> bool {
        let q = BigInt::from(self.denom);
        self.lift(z).iter().all(|v| v.is_multiple_of(&q))
    }

    /// Lifts `x = M^{-1} z` of lattice points, as numerators over `q`
    /// (not reduced mod `q`).
    fn lift(&self, z: &[i64]) -> Vec<BigInt> {
        let zb: Vec<BigInt> = z.iter().map(|&v| BigInt::from(v)).collect();
        self.scaled_inverse.mul_vec(&zb)
    }

    /// Calls `f` with the exact lift `x` (in `R^d`) of every point of `P_n`
    /// whose lift `M^{-1} z` satisfies `(x - c)^T G (x - c) <= rho2` up to
    /// the enumeration slack; `g` is given in `f64`. Each returned lift is a
    /// candidate only; callers re-test exactly.
    pub(crate) fn lifts_in_region(
        &self,
        g: &Mat,
        centre: &[f64],
        rho2: f64,
        mut f: impl FnMut(Vec<BigRational>),
    ) -> Result<()> {
        // x = M^{-1} z, so the form in z is M^{-T} G M^{-1}
        let minv = &self.inverse_f64;
        let qz = fgeom::mat_mul(&fgeom::transpose(minv), &fgeom::mat_mul(g, minv));
        let z0: Vec<f64> = self.m.to_f64_rows().iter().map(|r| fgeom::dot(r, centre)).collect();
        let q = BigInt::from(self.denom);
        fgeom::integer_points_in_ellipsoid(&qz, &z0, rho2, CANDIDATE_LIMIT, |z| {
            let x = self
                .lift(z)
                .into_iter()
                .map(|n| BigRational::new(n, q.clone()))
                .collect();
            f(x);
        })?;
        Ok(())
    }
}

/// A fully enumerated `P_n`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicSet {
    period: u32,
    dim: usize,
    cardinality: BigInt,
    denom: u64,
    coords: Vec<u64>,
}

impl PeriodicSet {
    pub fn period(&self) -> u32 {
        self.period
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cardinality(&self) -> &BigInt {
        &self.cardinality
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn denom(&self) -> u64 {
        self.denom
    }

    pub fn numerators(&self, i: usize) -> &[u64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[u64]> + '_ {
        self.coords.chunks(self.dim)
    }

    pub fn point(&self, i: usize) -> Vec<BigRational> {
        self.numerators(i)
            .iter()
            .map(|&x| BigRational::new(x.into(), self.denom.into()))
            .collect()
    }

    pub fn point_f64(&self, i: usize) -> Vec<f64> {
        self.numerators(i).iter().map(|&x| x as f64 / self.denom as f64).collect()
    }

    pub fn points(&self) -> Vec<Vec<BigRational>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }

    /// Membership of a canonical numerator vector (over [`Self::denom`]).
    pub fn contains(&self, num: &[u64]) -> bool {
        let n = self.len();
        let (mut lo, mut hi) = (0usize, n);
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.numerators(mid).cmp(num) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    /// Membership of an arbitrary rational point.
    pub fn contains_point(&self, x: &[BigRational]) -> bool {
        let q = BigRational::from_integer(self.denom.into());
        let mut num = Vec::with_capacity(self.dim);
        for c in x {
            let y = torus::frac(c) * &q;
            if !y.is_integer() {
                return false;
            }
            num.push(y.to_integer().to_u64().expect("below q"));
        }
        self.contains(&num)
    }
}

impl Serialize for PeriodicSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        struct Points<'a>(&'a PeriodicSet);
        impl Serialize for Points<'_> {
            fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                let mut seq = s.serialize_seq(Some(self.0.len()))?;
                for p in self.0.iter() {
                    let v: Vec<String> = p.iter().map(|&x| torus::fraction_string(x, self.0.denom)).collect();
                    seq.serialize_element(&v)?;
                }
                seq.end()
            }
        }
        let mut st = s.serialize_struct("PeriodicSet", 3)?;
        st.serialize_field("period", &self.period)?;
        st.serialize_field("cardinality", &self.cardinality.to_string())?;
        st.serialize_field("points", &Points(self))?;
        st.end()
    }
}

pub fn enumerate_periodic(a: &IntegerMatrix, n: u32, cap: &BigInt) -> Result<PeriodicSet> {
    enumerate_periodic_with(Exec::default(), a, n, cap)
}

pub fn enumerate_periodic_with(exec: Exec, a: &IntegerMatrix, n: u32, cap: &BigInt) -> Result<PeriodicSet> {
    let h = count_periodic(a, n)?;
    if &h > cap {
        return Err(Error::cap("periodic point set", h, cap.clone()));
    }
    let lattice = PeriodicLattice::new(a, n)?;
    Ok(lattice.to_set(exec))
}

impl PeriodicLattice {
    pub fn to_set(&self, exec: Exec) -> PeriodicSet {
        let pts = self.collect(exec);
        PeriodicSet {
            period: self.period,
            dim: self.dim(),
            cardinality: self.cardinality.clone(),
            denom: self.denom,
            coords: pts.into_iter().flatten().collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BallCount {
    pub count: u64,
    /// `prod_{j : (|l_j|^n - 1) r > 1} ceil((|l_j|^n - 1) r)`
    pub product_bound: f64,
    /// `count / product_bound`
    pub bound_ratio: f64,
    /// `count / (r^d H_n)`, present when `r (|l_1|^n - 1) > 1`.
    pub volume_ratio: Option<f64>,
}

/// Exact number of points of `P_n` at quotient distance `< r` from `centre`.
pub fn count_in_ball(lattice: &PeriodicLattice, centre: &[f64], r: f64) -> Result<BallCount> {
    count_in_ball_with(Exec::default(), lattice, centre, r)
}

pub fn count_in_ball_with(exec: Exec, lattice: &PeriodicLattice, centre: &[f64], r: f64) -> Result<BallCount> {
    let d = lattice.dim();
    if centre.len() != d {
        return Err(Error::InvalidArgument(format!("centre has {} coordinates, expected {d}", centre.len())));
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {r}")));
    }
    let c: Vec<f64> = centre.iter().map(|&x| torus::frac_f64(x)).collect();
    let count = if r < 0.5 {
        let c_exact: Vec<BigRational> = c.iter().map(|&x| BigRational::from_float(x).expect("finite")).collect();
        let r_exact = BigRational::from_float(r).expect("finite");
        let r2 = &r_exact * &r_exact;
        let eye: Mat = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        let mut count = 0u64;
        lattice.lifts_in_region(&eye, &c, r * r, |x| {
            let s = x
                .iter()
                .zip(&c_exact)
                .map(|(a, b)| {
                    let t = a - b;
                    &t * &t
                })
                .fold(BigRational::zero(), |a, b| a + b);
            if s < r2 {
                count += 1;
            }
        })?;
        count
    } else {
        count_in_ball_streamed(exec, lattice, &c, r)
    };
    Ok(ball_report(lattice, count, r))
}

/// Streaming count over all of `P_n`, with an exact fallback for points
/// within rounding distance of the sphere.
pub fn count_in_ball_streamed(exec: Exec, lattice: &PeriodicLattice, centre: &[f64], r: f64) -> u64 {
    let q = lattice.denom() as f64;
    let qb = BigRational::from_integer(lattice.denom().into());
    let c_exact: Vec<BigRational> = centre.iter().map(|&x| BigRational::from_float(x).expect("finite")).collect();
    let r_exact = BigRational::from_float(r).expect("finite");
    let r2 = &r_exact * &r_exact;
    lattice.count_where(exec, |num| {
        let x: Vec<f64> = num.iter().map(|&v| v as f64 / q).collect();
        let dist2: f64 = x
            .iter()
            .zip(centre)
            .map(|(a, b)| torus::centered_f64(a - b).powi(2))
            .sum();
        let margin = 1e-9 * (r * r).max(1e-300) + 1e-15;
        if dist2 < r * r - margin {
            true
        } else if dist2 > r * r + margin {
            false
        } else {
            let x: Vec<BigRational> = num.iter().map(|&v| BigRational::from_integer(v.into()) / &qb).collect();
            torus::dist2(&x, &c_exact) < r2
        }
    })
}

fn ball_report(lattice: &PeriodicLattice, count: u64, r: f64) -> BallCount {
    let n = lattice.period() as i32;
    let d = lattice.dim();
    let factors: Vec<f64> = lattice
        .spectrum()
        .values()
        .iter()
        .map(|&l| (l.powi(n) - 1.0).abs() * r)
        .collect();
    let product_bound: f64 = factors.iter().filter(|&&f| f > 1.0).map(|f| f.ceil()).product();
    let h = crate::exact_linalg::big_to_f64(lattice.cardinality());
    let volume_ratio = (factors[0] > 1.0).then(|| count as f64 / (r.powi(d as i32) * h));
    BallCount {
        count,
        product_bound,
        bound_ratio: count as f64 / product_bound,
        volume_ratio,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EllipsoidCount {
    pub count: u64,
    /// `psi(n)^d H_m / H_n`
    pub model: f64,
    pub ratio: f64,
    /// `l_{n,d} (|l_1|^m - 1) / sqrt(d) > 1`
    pub hypothesis_met: bool,
}

/// Exact number of points of `P_m` inside a degree-`n` ellipsoid.
pub fn count_in_ellipsoid(lattice_m: &PeriodicLattice, ell: &Ellipsoid) -> Result<EllipsoidCount> {
    count_in_ellipsoid_with(Exec::default(), lattice_m, ell)
}

pub fn count_in_ellipsoid_with(exec: Exec, lattice_m: &PeriodicLattice, ell: &Ellipsoid) -> Result<EllipsoidCount> {
    let d = lattice_m.dim();
    if ell.dim() != d {
        return Err(Error::InvalidArgument("dimension mismatch".into()));
    }
    let shape = ell.shape();
    let count = if shape.max_extent() < 0.5 {
        let mn = shape.shift_matrix();
        let g = fgeom::mat_mul(&fgeom::transpose(&mn.to_f64_rows()), &mn.to_f64_rows());
        let c_f64: Vec<f64> = ell.center().iter().map(crate::exact_linalg::rational_to_f64).collect();
        let psi2 = shape.psi() * shape.psi();
        let mut count = 0u64;
        lattice_m.lifts_in_region(&g, &c_f64, shape.psi_f64().powi(2), |x| {
            let v: Vec<BigRational> = x.iter().zip(ell.center()).map(|(a, b)| a - b).collect();
            if shape.form(&v) < psi2 {
                count += 1;
            }
        })?;
        count
    } else {
        let q = BigRational::from_integer(lattice_m.denom().into());
        lattice_m.count_where(exec, |num| {
            let x: Vec<BigRational> = num.iter().map(|&v| BigRational::from_integer(v.into()) / &q).collect();
            ell.contains(&x)
        })
    };
    let n = shape.degree() as i32;
    let m = lattice_m.period() as i32;
    let spec = lattice_m.spectrum();
    let h_m = crate::exact_linalg::big_to_f64(lattice_m.cardinality());
    let h_n = crate::exact_linalg::big_to_f64(&shape.shift_matrix().det().abs());
    let model = shape.psi_f64().powi(d as i32) * h_m / h_n;
    let l_nd = 2.0 * shape.psi_f64() / (spec.max().value.powi(n) - 1.0);
    let hypothesis_met = l_nd * (spec.min().value.powi(m) - 1.0) / (d as f64).sqrt() > 1.0;
    Ok(EllipsoidCount {
        count,
        model,
        ratio: count as f64 / model,
        hypothesis_met,
    })
}

/// Applies `x -> A x mod 1` to a numerator vector over `q`.
pub fn apply_map(a: &IntegerMatrix, num: &[u64], q: u64) -> Vec<u64> {
    let v: Vec<BigInt> = num.iter().map(|&x| BigInt::from(x)).collect();
    let qb = BigInt::from(q);
    a.mul_vec(&v)
        .into_iter()
        .map(|y| y.mod_floor(&qb).to_u64().expect("reduced"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> IntegerMatrix {
        IntegerMatrix::from_i64_rows(rows).unwrap()
    }

    fn big(v: i64) -> BigInt {
        BigInt::from(v)
    }

    #[test]
    fn counts() {
        assert_eq!(count_periodic(&m(&[&[2]]), 3).unwrap(), big(7));
        assert_eq!(count_periodic(&m(&[&[3, 1], &[1, 2]]), 1).unwrap(), big(1));
        assert_eq!(count_periodic(&m(&[&[3, 1], &[1, 2]]), 2).unwrap(), big(11));
        assert_eq!(count_periodic(&m(&[&[0, -1], &[1, 0]]), 1), Err(Error::RootOfUnity));
    }

    #[test]
    fn enumerations() {
        let s = enumerate_periodic(&m(&[&[2]]), 2, &big(100)).unwrap();
        assert_eq!(s.points(), vec![
            vec![BigRational::zero()],
            vec![BigRational::new(big(1), big(3))],
            vec![BigRational::new(big(2), big(3))],
        ]);
        let s = enumerate_periodic(&m(&[&[2]]), 3, &big(100)).unwrap();
        let want: Vec<Vec<BigRational>> = (0..7).map(|k| vec![BigRational::new(big(k), big(7))]).collect();
        assert_eq!(s.points(), want);
        let err = enumerate_periodic(&m(&[&[3, 1], &[1, 2]]), 2, &big(10)).unwrap_err();
        assert!(matches!(err, Error::CapExceeded { .. }));
    }

    #[test]
    fn points_are_periodic_and_distinct() {
        let a = m(&[&[4, 1], &[0, 2]]);
        for n in 1..=4 {
            let l = PeriodicLattice::new(&a, n).unwrap();
            let s = l.to_set(Exec::Sequential);
            assert_eq!(BigInt::from(s.len()), count_periodic(&a, n).unwrap());
            for p in s.iter() {
                assert!(l.is_member(p));
            }
            let mut v: Vec<&[u64]> = s.iter().collect();
            v.dedup();
            assert_eq!(v.len(), s.len());
        }
    }

    #[test]
    fn ball_counts() {
        let l = PeriodicLattice::new(&m(&[&[2]]), 3).unwrap();
        assert_eq!(count_in_ball(&l, &[0.0], 0.3).unwrap().count, 5);
        assert_eq!(count_in_ball(&l, &[0.3], 0.8).unwrap().count, 7);
        let l = PeriodicLattice::new(&m(&[&[3, 1], &[1, 2]]), 4).unwrap();
        for (c, r) in [([0.1, 0.7], 0.2), ([0.5, 0.5], 0.45), ([0.93, 0.02], 0.05)] {
            let fast = count_in_ball(&l, &c, r).unwrap().count;
            let slow = count_in_ball_streamed(Exec::Sequential, &l, &c, r);
            assert_eq!(fast, slow);
        }
        assert_eq!(count_in_ball(&l, &[0.2, 0.2], 0.75).unwrap().count, l.len());
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let l = PeriodicLattice::new(&m(&[&[3, 1], &[1, 2]]), 5).unwrap();
        assert_eq!(l.to_set(Exec::Sequential), l.to_set(Exec::Parallel));
    }
}
