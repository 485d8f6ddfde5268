//! Small dense `f64` geometry: Cholesky, linear solves, lattice-point
//! enumeration in ellipsoids and point-to-ellipsoid distance. Callers that
//! need exact answers use these only to generate candidates or directions
//! and verify the outcome exactly or with an explicit error margin.

use crate::error::{Error, Result};

pub type Mat = Vec<Vec<f64>>;

pub fn mat_mul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let m = b[0].len();
    (0..n)
        .map(|i| (0..m).map(|j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn mat_vec(a: &Mat, v: &[f64]) -> Vec<f64> {
    a.iter().map(|r| r.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular `L` with `Q = L L^T`.
pub fn cholesky(q: &Mat) -> Option<Mat> {
    let n = q.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i][k] * l[j][k]).sum();
            if i == j {
                let v = q[i][i] - s;
                if !(v > 0.0) {
                    return None;
                }
                l[i][i] = v.sqrt();
            } else {
                l[i][j] = (q[i][j] - s) / l[j][j];
            }
        }
    }
    Some(l)
}

/// Solves `a x = b` by partial-pivot elimination.
pub fn solve(a: &Mat, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Mat = a.iter().zip(b).map(|(r, &v)| {
        let mut r = r.clone();
        r.push(v);
        r
    }).collect();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c] == 0.0 {
            return None;
        }
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            for k in c..=n {
                m[r][k] -= f * m[c][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (m[i][n] - s) / m[i][i];
    }
    Some(x)
}

/// Calls `f` for every integer vector `z` with `(z - z0)^T Q (z - z0) <= rho2`,
/// plus possibly a thin shell of extra candidates (bounds are widened to
/// absorb rounding). Fails once more than `limit` candidates are produced.
pub fn integer_points_in_ellipsoid(
    q: &Mat,
    z0: &[f64],
    rho2: f64,
    limit: u64,
    mut f: impl FnMut(&[i64]),
) -> Result<u64> {
    let d = q.len();
    let l = cholesky(q).ok_or_else(|| Error::InvalidArgument("quadratic form is not positive definite".into()))?;
    // R = L^T, upper triangular
    let r: Mat = transpose(&l);
    let mut z = vec![0i64; d];
    let mut produced = 0u64;
    fn rec(
        i: usize,
        r: &Mat,
        z0: &[f64],
        budget: f64,
        z: &mut Vec<i64>,
        produced: &mut u64,
        limit: u64,
        f: &mut dyn FnMut(&[i64]),
    ) -> Result<()> {
        let d = z.len();
        let s: f64 = (i + 1..d).map(|j| r[i][j] * (z[j] as f64 - z0[j])).sum::<f64>() / r[i][i];
        let centre = z0[i] - s;
        let half = budget.max(0.0).sqrt() / r[i][i];
        let slack = 1e-7 * (1.0 + centre.abs() + half);
        let lo = (centre - half - slack).ceil();
        let hi = (centre + half + slack).floor();
        if !(lo.abs() < 4e18 && hi.abs() < 4e18) {
            return Err(Error::InvalidArgument("enumeration region exceeds the i64 range".into()));
        }
        let (lo, hi) = (lo as i64, hi as i64);
        for zi in lo..=hi {
            z[i] = zi;
            let t = r[i][i] * (zi as f64 - centre);
            let rest = budget - t * t;
            if i == 0 {
                *produced += 1;
                if *produced > limit {
                    return Err(Error::cap("ellipsoid candidate set", *produced, limit));
                }
                f(z);
            } else {
                rec(i - 1, r, z0, rest, z, produced, limit, f)?;
            }
        }
        Ok(())
    }
    rec(d - 1, &r, z0, rho2 * (1.0 + 1e-9), &mut z, &mut produced, limit, &mut f)?;
    Ok(produced)
}

/// Distance from `x` to the ellipsoid `{y : y^T Q y <= rho^2}`, and the unit
/// outward normal at the nearest point (`None` when `x` is inside).
pub fn point_to_ellipsoid(x: &[f64], q: &Mat, rho: f64) -> (f64, Option<Vec<f64>>) {
    let d = x.len();
    let form = |y: &[f64]| dot(y, &mat_vec(q, y));
    if form(x) <= rho * rho {
        return (0.0, None);
    }
    // nearest point y(t) = (I + t Q)^{-1} x, with form(y(t)) decreasing in t
    let y_at = |t: f64| {
        let a: Mat = (0..d)
            .map(|i| (0..d).map(|j| t * q[i][j] + if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        solve(&a, x).unwrap_or_else(|| vec![0.0; d])
    };
    let mut lo = 0.0;
    let mut hi = 1.0;
    while form(&y_at(hi)) > rho * rho && hi < 1e300 {
        hi *= 4.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if form(&y_at(mid)) > rho * rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let y = y_at(hi);
    let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
    let dist = norm(&diff);
    let normal = if dist > 0.0 {
        diff.iter().map(|v| v / dist).collect()
    } else {
        let g = mat_vec(q, &y);
        let n = norm(&g);
        g.iter().map(|v| v / n).collect()
    };
    (dist, Some(normal))
}

/// Minimum of `v^T G v` over the closed cube `lo + [0, side]^d`, for
/// `d <= 2`. In two dimensions the minimiser is the origin when it lies in
/// the cube and otherwise sits on an edge, where the form is a clamped 1-D
/// quadratic.
pub fn box_form_min(g: &Mat, lo: &[f64], side: f64) -> f64 {
    match lo.len() {
        1 => {
            let t = (0.0f64).clamp(lo[0], lo[0] + side);
            g[0][0] * t * t
        }
        2 => {
            let inside = (0..2).all(|i| lo[i] <= 0.0 && 0.0 <= lo[i] + side);
            if inside {
                return 0.0;
            }
            let edge = |p: [f64; 2], axis: usize| {
                let gv = mat_vec(g, &p);
                let s = (-gv[axis] / g[axis][axis]).clamp(0.0, side);
                dot(&p, &gv) + 2.0 * s * gv[axis] + s * s * g[axis][axis]
            };
            let (x, y) = (lo[0], lo[1]);
            edge([x, y], 0)
                .min(edge([x, y + side], 0))
                .min(edge([x, y], 1))
                .min(edge([x + side, y], 1))
        }
        d => panic!("box_form_min supports d <= 2, got {d}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerates_disc() {
        let q = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let mut pts = Vec::new();
        integer_points_in_ellipsoid(&q, &[0.0, 0.0], 4.0, 1000, |z| pts.push(z.to_vec())).unwrap();
        let inside = pts.iter().filter(|z| z[0] * z[0] + z[1] * z[1] <= 4).count();
        assert_eq!(inside, 13);
    }

    #[test]
    fn enumerates_skew_ellipse() {
        let q = vec![vec![5.0, 3.0], vec![3.0, 2.0]];
        let z0 = [0.3, -0.7];
        let mut pts = Vec::new();
        integer_points_in_ellipsoid(&q, &z0, 30.0, 100_000, |z| pts.push(z.to_vec())).unwrap();
        let val = |z: &[i64]| {
            let y = [z[0] as f64 - z0[0], z[1] as f64 - z0[1]];
            5.0 * y[0] * y[0] + 6.0 * y[0] * y[1] + 2.0 * y[1] * y[1]
        };
        let brute = (-100..=100)
            .flat_map(|a| (-100..=100).map(move |b| [a, b]))
            .filter(|z| val(z) <= 30.0)
            .count();
        assert_eq!(pts.iter().filter(|z| val(z) <= 30.0).count(), brute);
    }

    #[test]
    fn cap_is_enforced() {
        let q = vec![vec![1.0]];
        assert!(integer_points_in_ellipsoid(&q, &[0.0], 1e6, 10, |_| {}).is_err());
    }

    #[test]
    fn distance_to_ellipse() {
        // axis-aligned ellipse with semi-axes 2 and 1
        let q = vec![vec![0.25, 0.0], vec![0.0, 1.0]];
        let (d, n) = point_to_ellipsoid(&[5.0, 0.0], &q, 1.0);
        assert!((d - 3.0).abs() < 1e-9);
        assert!((n.unwrap()[0] - 1.0).abs() < 1e-9);
        let (d, _) = point_to_ellipsoid(&[0.0, 3.0], &q, 1.0);
        assert!((d - 2.0).abs() < 1e-9);
        assert_eq!(point_to_ellipsoid(&[0.5, 0.5], &q, 1.0).0, 0.0);
    }

    #[test]
    fn box_minimum_of_disc_form() {
        let eye = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(box_form_min(&eye, &[-0.5, -0.5], 1.0), 0.0);
        assert!((box_form_min(&eye, &[1.0, 2.0], 1.0) - 5.0).abs() < 1e-15);
        assert!((box_form_min(&eye, &[-0.5, 2.0], 1.0) - 4.0).abs() < 1e-15);
        let g = vec![vec![4.0]];
        assert_eq!(box_form_min(&g, &[-3.0], 1.0), 16.0);
    }
}
