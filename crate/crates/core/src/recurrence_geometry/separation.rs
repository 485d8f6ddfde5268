//! Certified lower bounds on the distance between distinct ellipsoids of
//! one family.
//!
//! Two members are `K + c_i` and `K + c_j` with `K = M^{-1} B(0, psi)`, and
//! their distance on the torus is the minimum over lifts `D` of the
//! difference `c_i - c_j` of `dist(D, 2K)`. Since `c_i - c_j` ranges over
//! `P_n \ {0}`, it suffices to scan group elements rather than pairs. For a
//! unit vector `v`, `D . v - 2 psi |M^{-T} v|` is a lower bound (the width of
//! `2K` along `v` subtracted from the projection); it is evaluated first on
//! the centre line and then, where that could matter, on the normal at the
//! nearest point of `2K`.

use serde::Serialize;

use super::{EllipsoidFamily, EllipsoidShape};
use crate::error::{Error, Result};
use crate::fgeom;
use crate::par::{self, Exec};
use crate::periodic_lattice::PeriodicLattice;
use crate::spectrum_dim::RateFunction;
use crate::torus;

/// Relative slack absorbing `f64` rounding in each bound.
const ROUNDING_SLACK: f64 = 1e-12;
const CHUNK: u64 = 4096;
const CANDIDATE_LIMIT: u64 = 50_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeparationReport {
    pub degree: u32,
    /// Certified lower bound on the minimum pairwise distance; `None` when the
    /// family has a single member.
    pub distance: Option<f64>,
    /// `2 (1/3 - psi(n)) / (|lambda_d|^n - 1)`
    pub required: f64,
    pub holds: bool,
    /// Difference vector attaining the minimum.
    pub witness: Option<Vec<f64>>,
}

fn setup(psi: &RateFunction, lattice: &PeriodicLattice, shape: &EllipsoidShape) -> Result<(u32, f64, f64)> {
    if !psi.covers(1) || psi.value(1) >= 1.0 / 3.0 {
        return Err(Error::InvalidArgument("separation needs psi(1) < 1/3".into()));
    }
    let n = shape.degree();
    let psi_n = shape.psi_f64();
    let lambda_d = lattice.spectrum().max().value;
    Ok((n, psi_n, 2.0 * (1.0 / 3.0 - psi_n) / (lambda_d.powi(n as i32) - 1.0)))
}

fn single(n: u32, required: f64) -> SeparationReport {
    SeparationReport {
        degree: n,
        distance: None,
        required,
        holds: true,
        witness: None,
    }
}

fn report(n: u32, required: f64, distance: f64, witness: Vec<f64>) -> SeparationReport {
    SeparationReport {
        degree: n,
        distance: Some(distance),
        required,
        holds: distance >= required,
        witness: Some(witness),
    }
}

fn centre_line_bound(shape: &EllipsoidShape, delta: &[f64]) -> f64 {
    let len = fgeom::norm(delta);
    let u: Vec<f64> = delta.iter().map(|x| x / len).collect();
    let w = 2.0 * shape.support(&u);
    len - w - ROUNDING_SLACK * (len + w)
}

fn refined_bound(shape: &EllipsoidShape, psi_n: f64, delta: &[f64]) -> f64 {
    let base = centre_line_bound(shape, delta);
    match fgeom::point_to_ellipsoid(delta, shape.gram_f64(), 2.0 * psi_n).1 {
        Some(v) => {
            let p = fgeom::dot(delta, &v);
            let w = 2.0 * shape.support(&v);
            base.max(p - w - ROUNDING_SLACK * (fgeom::norm(delta) + w))
        }
        None => base,
    }
}

pub fn ellipsoid_min_distance(family: &EllipsoidFamily) -> Result<SeparationReport> {
    lattice_min_distance(family.psi(), family.lattice(), family.shape())
}

/// The same bound computed from the lattice alone, without materializing
/// the family.
pub fn lattice_min_distance(psi: &RateFunction, lattice: &PeriodicLattice, shape: &EllipsoidShape) -> Result<SeparationReport> {
    let (n, psi_n, required) = setup(psi, lattice, shape)?;
    if lattice.len() <= 1 {
        return Ok(single(n, required));
    }
    let d = shape.dim();
    let sigma_hi = psi_n / shape.min_extent() * (1.0 + 1e-12);
    let minv = lattice.inverse_f64();
    let eye: fgeom::Mat = (0..d).map(|i| (0..d).map(|j| (i == j) as u8 as f64).collect()).collect();
    let zero = vec![0.0; d];
    // every element has a lift within sqrt(d)/2 of the origin, so this trial
    // radius always suffices
    let t_max = (d as f64).sqrt();
    let mut t = required.max(1e-300) * 2.0;
    loop {
        let t_now = t.min(t_max);
        let reach = 2.0 * psi_n + sigma_hi * t_now;
        let mut best: Option<(f64, Vec<f64>)> = None;
        fgeom::integer_points_in_ellipsoid(&eye, &zero, reach * reach, CANDIDATE_LIMIT, |z| {
            if z.iter().all(|&v| v == 0) || lattice.lifts_zero(z) {
                return;
            }
            let zf: Vec<f64> = z.iter().map(|&v| v as f64).collect();
            let delta = fgeom::mat_vec(minv, &zf);
            let b = refined_bound(shape, psi_n, &delta);
            if best.as_ref().is_none_or(|(v, w)| b < *v || (b == *v && delta < *w)) {
                best = Some((b, delta));
            }
        })?;
        match best {
            Some((b, delta)) if b <= t_now || t_now >= t_max => return Ok(report(n, required, b, delta)),
            _ if t_now >= t_max => return Ok(single(n, required)),
            _ => t *= 4.0,
        }
    }
}

/// Exhaustive version: bounds every nonzero element of `P_n` at each of its
/// `3^d` centred lifts.
pub fn ellipsoid_min_distance_scan(exec: Exec, family: &EllipsoidFamily) -> Result<SeparationReport> {
    let shape = family.shape();
    let lattice = family.lattice();
    let (n, psi_n, required) = setup(family.psi(), lattice, shape)?;
    let d = shape.dim();
    let len = lattice.len();
    if len <= 1 {
        return Ok(single(n, required));
    }
    let q = lattice.denom() as f64;
    let offsets = torus::unit_offsets(d);
    let lift = |t: u64, k: &[i64]| -> Vec<f64> {
        lattice
            .numerators(t)
            .iter()
            .zip(k)
            .map(|(&x, &o)| torus::centered_f64(x as f64 / q) + o as f64)
            .collect()
    };
    let centre_line = |delta: &[f64]| centre_line_bound(shape, delta);
    let refined = |delta: &[f64]| refined_bound(shape, psi_n, delta);
    let chunks = len.div_ceil(CHUNK);

    // pass 1: the smallest centre-line bound
    let best_line = par::map_range(exec, 0..chunks, |c| {
        let mut best: Option<(f64, u64, usize)> = None;
        for t in (c * CHUNK).max(1)..((c + 1) * CHUNK).min(len) {
            for (ki, k) in offsets.iter().enumerate() {
                let b = centre_line(&lift(t, k));
                if best.is_none_or(|(v, _, _)| b < v) {
                    best = Some((b, t, ki));
                }
            }
        }
        best
    })
    .into_iter()
    .flatten()
    .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)))
    .expect("at least one nonzero element");

    // pass 2: anything whose centre-line bound is below the refined bound of
    // the pass-1 minimiser might attain the overall minimum
    let first = lift(best_line.1, &offsets[best_line.2]);
    let first_true = fgeom::point_to_ellipsoid(&first, shape.gram_f64(), 2.0 * psi_n).0;
    let threshold = refined(&first).max(first_true);
    let candidates: Vec<(u64, usize)> = par::map_range(exec, 0..chunks, |c| {
        let mut out = Vec::new();
        for t in (c * CHUNK).max(1)..((c + 1) * CHUNK).min(len) {
            for (ki, k) in offsets.iter().enumerate() {
                if centre_line(&lift(t, k)) <= threshold {
                    out.push((t, ki));
                }
            }
        }
        out
    })
    .into_iter()
    .flatten()
    .collect();
    let (distance, t, ki) = par::map_collect(exec, &candidates, |&(t, ki)| (refined(&lift(t, &offsets[ki])), t, ki))
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)))
        .expect("pass-1 minimiser is a candidate");
    Ok(report(n, required, distance, lift(t, &offsets[ki])))
}

#[cfg(test)]
mod tests {
    use super::super::decompose_rn;
    use super::*;
    use crate::exact_linalg::IntegerMatrix;
    use crate::spectrum_dim::{Alpha, RateFunction};
    use num_bigint::BigInt;

    #[test]
    fn doubling_map_example() {
        let psi = RateFunction::table(vec![0.3, 0.06]).unwrap();
        let fam = decompose_rn(&IntegerMatrix::diag(&[2]), 2, &psi, &BigInt::from(100)).unwrap();
        let rep = ellipsoid_min_distance(&fam).unwrap();
        let dist = rep.distance.unwrap();
        assert!((dist - (1.0 / 3.0 - 0.04)).abs() < 1e-10, "{dist}");
        assert!((rep.required - 2.0 * (1.0 / 3.0 - 0.06) / 3.0).abs() < 1e-15);
        assert!(rep.holds);
    }

    #[test]
    fn single_member_is_infinite() {
        let psi = RateFunction::exponential(Alpha::ln(4)).unwrap();
        let a = IntegerMatrix::from_i64_rows(&[[3, 1], [1, 2]]).unwrap();
        let fam = decompose_rn(&a, 1, &psi, &BigInt::from(100)).unwrap();
        assert_eq!(ellipsoid_min_distance(&fam).unwrap().distance, None);
    }

    #[test]
    fn pairwise_oracle_agrees() {
        // brute force over all ordered pairs, using the same per-pair bound
        let psi = RateFunction::exponential(Alpha::ln(4)).unwrap();
        let a = IntegerMatrix::from_i64_rows(&[[3, 1], [1, 2]]).unwrap();
        let fam = decompose_rn(&a, 3, &psi, &BigInt::from(1000)).unwrap();
        let rep = ellipsoid_min_distance(&fam).unwrap();
        let pts: Vec<Vec<f64>> = (0..fam.len()).map(|i| fam.centers().point_f64(i)).collect();
        let shape = fam.shape();
        let mut best = f64::INFINITY;
        for i in 0..pts.len() {
            for j in 0..pts.len() {
                if i == j {
                    continue;
                }
                for k in torus::unit_offsets(2) {
                    let delta: Vec<f64> = (0..2)
                        .map(|c| torus::centered_f64(pts[i][c] - pts[j][c]) + k[c] as f64)
                        .collect();
                    let dist = fgeom::point_to_ellipsoid(&delta, shape.gram_f64(), 2.0 * shape.psi_f64()).0;
                    best = best.min(dist);
                }
            }
        }
        let got = rep.distance.unwrap();
        let scan = ellipsoid_min_distance_scan(Exec::Sequential, &fam).unwrap();
        assert!((scan.distance.unwrap() - got).abs() < 1e-12);
        assert!(got <= best + 1e-12);
        assert!(got >= best - 1e-9, "{got} vs {best}");
        assert!(rep.holds);
    }
}
