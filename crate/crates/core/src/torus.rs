//! Points of the torus `R^d / Z^d` and the quotient metric.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Reduction to `[0, 1)`.
pub fn frac(q: &BigRational) -> BigRational {
    q - BigRational::from_integer(q.floor().to_integer())
}

/// Reduction to `[-1/2, 1/2)`.
pub fn centered(q: &BigRational) -> BigRational {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    frac(&(q + &half)) - half
}

pub fn canonical(v: &[BigRational]) -> Vec<BigRational> {
    v.iter().map(frac).collect()
}

/// Squared quotient distance of `v` from the origin.
pub fn dist2_to_zero(v: &[BigRational]) -> BigRational {
    v.iter().map(|c| {
        let c = centered(c);
        &c * &c
    })
    .fold(BigRational::zero(), |a, b| a + b)
}

pub fn dist2(x: &[BigRational], y: &[BigRational]) -> BigRational {
    let diff: Vec<BigRational> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    dist2_to_zero(&diff)
}

pub fn frac_f64(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

pub fn centered_f64(x: f64) -> f64 {
    frac_f64(x + 0.5) - 0.5
}

/// Quotient distance between two points given in `f64`.
pub fn dist_f64(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let c = centered_f64(a - b);
            c * c
        })
        .sum::<f64>()
        .sqrt()
}

/// The `3^d` integer offsets in `{-1, 0, 1}^d`, origin first.
pub fn unit_offsets(d: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![0i64; d]];
    let total = 3usize.pow(d as u32);
    for t in 1..total {
        let mut t = t;
        let mut k = vec![0i64; d];
        for c in k.iter_mut() {
            let (q, r) = t.div_rem(&3);
            *c = [0, 1, -1][r];
            t = q;
        }
        out.push(k);
    }
    out
}

/// `p/q` string for a numerator over a common denominator.
pub fn fraction_string(num: u64, den: u64) -> String {
    let g = num.gcd(&den);
    if num == 0 {
        "0/1".to_string()
    } else {
        format!("{}/{}", num / g, den / g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(p: i64, q: i64) -> BigRational {
        BigRational::new(p.into(), q.into())
    }

    #[test]
    fn reductions() {
        assert_eq!(frac(&r(-1, 3)), r(2, 3));
        assert_eq!(frac(&r(7, 3)), r(1, 3));
        assert_eq!(centered(&r(2, 3)), r(-1, 3));
        assert_eq!(centered(&r(1, 2)), r(-1, 2));
        assert_eq!(dist2_to_zero(&[r(9, 10), r(1, 2)]), r(1, 100) + r(1, 4));
        assert_eq!(frac_f64(-1e-30), 0.0);
        assert!((dist_f64(&[0.95], &[0.05]) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn offsets() {
        let o = unit_offsets(2);
        assert_eq!(o.len(), 9);
        assert_eq!(o[0], vec![0, 0]);
        let mut s = o.clone();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 9);
        assert_eq!(fraction_string(2, 6), "1/3");
        assert_eq!(fraction_string(0, 7), "0/1");
    }
}
