//! Exact integer and rational linear algebra.

mod matrix;
mod poly;
mod roots;
mod snf;

pub use matrix::{big_to_f64, ldexp, ln_bigint, ln_rational, rational_to_f64, IntegerMatrix, RationalMatrix};
pub use poly::{has_root_of_unity, IntPoly, RatPoly};
pub use roots::{enclose_roots, integer_roots, RootEnclosure};
pub use snf::{smith_normal_form, SnfDecomposition};

use crate::error::{Error, Result};
use crate::interval::Interval;
use crate::spectrum_dim::{Modulus, Spectrum};

/// `A^n` by binary exponentiation.
pub fn matrix_power(a: &IntegerMatrix, n: u32) -> IntegerMatrix {
    a.pow(n)
}

pub fn det_exact(m: &IntegerMatrix) -> num_bigint::BigInt {
    m.det()
}

/// Certified eigenvalue moduli of `a`, ascending, each with half-width at
/// most `tol * max(1, |lambda|)`.
pub fn eigen_moduli(a: &IntegerMatrix, tol: f64) -> Result<Spectrum> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if tol < 4.0 * f64::EPSILON {
        return Err(Error::PrecisionFailure {
            tol,
            reason: "tolerance below the resolution of the f64 output".into(),
        });
    }
    let roots = enclose_roots(&a.char_poly(), tol)?;
    let mut class: Vec<usize> = (0..roots.len()).collect();
    for (k, r) in roots.iter().enumerate() {
        if r.exact.is_some() || r.im.abs() <= r.radius {
            continue;
        }
        let partner = roots
            .iter()
            .enumerate()
            .filter(|(j, s)| *j != k && s.exact.is_none() && s.im.abs() > s.radius && s.im * r.im < 0.0)
            .min_by(|(_, s), (_, t)| {
                let ds = (s.re - r.re).hypot(s.im + r.im);
                let dt = (t.re - r.re).hypot(t.im + r.im);
                ds.total_cmp(&dt)
            })
            .map(|(j, _)| j);
        if let Some(j) = partner {
            class[k] = class[k].min(j);
        }
    }
    let mut moduli = Vec::with_capacity(a.dim());
    for (k, r) in roots.iter().enumerate() {
        for _ in 0..r.multiplicity {
            moduli.push(match &r.exact {
                Some(q) => Modulus::from_rational(q.clone(), class[k]),
                None => Modulus {
                    value: r.modulus.mid(),
                    bounds: r.modulus,
                    exact: None,
                    class: class[k],
                },
            });
        }
    }
    Spectrum::from_parts(moduli, tol)
}

/// Certified singular values of `m`, ascending, from the eigenvalues of the
/// integer Gram matrix `m^T m`.
pub fn singular_values(m: &IntegerMatrix, tol: f64) -> Result<Vec<Interval>> {
    let gram = &m.transpose() * m;
    let mut out = Vec::with_capacity(m.dim());
    for r in enclose_roots(&gram.char_poly(), tol)? {
        let mu = r.modulus;
        let s = Interval::new(mu.lo.max(0.0).sqrt().next_down().max(0.0), mu.hi.sqrt().next_up());
        for _ in 0..r.multiplicity {
            out.push(s);
        }
    }
    out.sort_by(|a, b| a.mid().total_cmp(&b.mid()));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn moduli_examples() {
        let s = eigen_moduli(&IntegerMatrix::diag(&[2, 3]), 1e-12).unwrap();
        assert_eq!(s.values(), vec![2.0, 3.0]);
        assert!(!s.hypothesis_violated());

        let a = IntegerMatrix::from_i64_rows(&[[3, 1], [1, 2]]).unwrap();
        let s = eigen_moduli(&a, 1e-12).unwrap();
        let r5 = 5f64.sqrt();
        assert!((s.values()[0] - (5.0 - r5) / 2.0).abs() < 1e-12);
        assert!((s.values()[1] - (5.0 + r5) / 2.0).abs() < 1e-12);
        assert!(s.moduli().iter().all(|m| m.bounds.radius() <= 1e-12 * m.value.max(1.0)));

        let a = IntegerMatrix::from_i64_rows(&[[2, 1], [1, 1]]).unwrap();
        let s = eigen_moduli(&a, 1e-12).unwrap();
        assert!(s.hypothesis_violated());
        assert!((s.values()[0] - 0.381_966_011_250_105_1).abs() < 1e-12);
    }

    #[test]
    fn conjugate_pairs_share_a_class() {
        // rotation-like block with eigenvalues 1 +- 2i, plus 3
        let a = IntegerMatrix::from_i64_rows(&[[1, -2, 0], [2, 1, 0], [0, 0, 3]]).unwrap();
        let s = eigen_moduli(&a, 1e-12).unwrap();
        let m = s.moduli();
        assert_eq!(m[0].class, m[1].class);
        assert_ne!(m[1].class, m[2].class);
        assert!((m[0].value - 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn singular_values_of_symmetric() {
        let a = IntegerMatrix::from_i64_rows(&[[3, 1], [1, 2]]).unwrap();
        let s = singular_values(&a, 1e-13).unwrap();
        let r5 = 5f64.sqrt();
        assert!(s[0].contains((5.0 - r5) / 2.0) || (s[0].mid() - (5.0 - r5) / 2.0).abs() < 1e-14);
        assert!((s[1].mid() - (5.0 + r5) / 2.0).abs() < 1e-12);
        let s = singular_values(&IntegerMatrix::diag(&[-7, 2]), 1e-13).unwrap();
        assert!(s[0].contains(2.0) && s[0].hi - s[0].lo < 1e-14);
        assert!(s[1].contains(7.0));
    }

    #[test]
    fn tolerance_too_small() {
        let a = IntegerMatrix::from_i64_rows(&[[3, 1], [1, 2]]).unwrap();
        assert!(matches!(eigen_moduli(&a, 1e-20), Err(Error::PrecisionFailure { .. })));
    }
}
