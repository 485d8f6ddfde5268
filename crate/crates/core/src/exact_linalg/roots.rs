//! Certified enclosures of polynomial roots.
//!
//! Roots are approximated in `f64` by Aberth iteration and then certified
//! with the Weierstrass-correction inclusion: for a monic square-free `p` of
//! degree `m` and distinct approximations `z_i`, every root of `p` is an
//! eigenvalue of `diag(z) - W 1^T`, `W_i = p(z_i) / prod_{j != i} (z_i - z_j)`.
//! Gerschgorin discs `D(z_i - W_i, (m - 1)|W_i|)` that are pairwise disjoint
//! therefore each hold exactly one root. The corrections are evaluated in
//! exact rational arithmetic; when the discs are too wide, the approximations
//! are replaced by the disc centres rounded to a growing dyadic precision
//! (one Durand-Kerner step) and the check repeats.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{Signed, Zero};

use super::matrix::rational_to_f64;
use super::poly::{IntPoly, RatPoly};
use crate::error::{Error, Result};
use crate::interval::Interval;

const MAX_BITS: u64 = 16_384;

#[derive(Clone, Debug, PartialEq)]
pub struct RootEnclosure {
    pub re: f64,
    pub im: f64,
    /// Radius of a disc around `(re, im)` that provably contains the root.
    pub radius: f64,
    pub modulus: Interval,
    pub multiplicity: usize,
    /// Present when the root is rational.
    pub exact: Option<BigRational>,
}

/// Encloses every root of `p` (with multiplicity) so that each modulus
/// interval has half-width at most `tol * max(1, |root|)`.
pub fn enclose_roots(p: &IntPoly, tol: f64) -> Result<Vec<RootEnclosure>> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let mut out = Vec::new();
    for (factor, mult) in p.to_rational().squarefree_factors() {
        for mut r in enclose_squarefree(&factor, tol)? {
            r.multiplicity = mult;
            out.push(r);
        }
    }
    Ok(out)
}

fn enclose_squarefree(f: &RatPoly, tol: f64) -> Result<Vec<RootEnclosure>> {
    let m = f.degree();
    if m == 1 {
        let root = -&f.coeffs()[0] / &f.coeffs()[1];
        let modulus = Interval::from_rational(&root.abs());
        return Ok(vec![RootEnclosure {
            re: rational_to_f64(&root),
            im: 0.0,
            radius: 0.0,
            modulus,
            multiplicity: 1,
            exact: Some(root),
        }]);
    }

    let approx = aberth(f)?;
    let mut z: Vec<(BigRational, BigRational)> = approx
        .iter()
        .map(|c| {
            Ok((
                BigRational::from_float(c.re).ok_or_else(|| nonfinite(tol))?,
                BigRational::from_float(c.im).ok_or_else(|| nonfinite(tol))?,
            ))
        })
        .collect::<Result<_>>()?;

    let mut bits = 64u64;
    loop {
        if let Some(encl) = try_certify(f, &z, tol)? {
            return Ok(encl);
        }
        if bits > MAX_BITS {
            return Err(Error::PrecisionFailure {
                tol,
                reason: format!("root discs not separated within {MAX_BITS} bits"),
            });
        }
        z = corrections(f, &z)?
            .into_iter()
            .zip(&z)
            .map(|((wr, wi), (zr, zi))| {
                let cr = zr - wr;
                let ci = zi - wi;
                let e = magnitude_exp(&cr).max(magnitude_exp(&ci));
                (round_dyadic(&cr, bits as i64 - e), round_dyadic(&ci, bits as i64 - e))
            })
            .collect();
        bits *= 2;
    }
}

fn nonfinite(tol: f64) -> Error {
    Error::PrecisionFailure {
        tol,
        reason: "root approximation left the f64 range".into(),
    }
}

/// Weierstrass corrections `W_i`; `None`-free because approximations are
/// kept distinct (a coincidence is reported as a precision failure).
fn corrections(
    f: &RatPoly,
    z: &[(BigRational, BigRational)],
) -> Result<Vec<(BigRational, BigRational)>> {
    let mut out = Vec::with_capacity(z.len());
    for (i, (zr, zi)) in z.iter().enumerate() {
        let (pr, pi) = f.eval_complex(zr, zi);
        let mut qr = BigRational::from_integer(BigInt::from(1));
        let mut qi = BigRational::zero();
        for (j, (wr, wi)) in z.iter().enumerate() {
            if i == j {
                continue;
            }
            let dr = zr - wr;
            let di = zi - wi;
            let nr = &qr * &dr - &qi * &di;
            let ni = &qr * &di + &qi * &dr;
            qr = nr;
            qi = ni;
        }
        let den = &qr * &qr + &qi * &qi;
        if den.is_zero() {
            return Err(Error::PrecisionFailure {
                tol: 0.0,
                reason: "coincident root approximations".into(),
            });
        }
        // p / q = p * conj(q) / |q|^2
        let wr = (&pr * &qr + &pi * &qi) / &den;
        let wi = (&pi * &qr - &pr * &qi) / &den;
        out.push((wr, wi));
    }
    Ok(out)
}

fn try_certify(
    f: &RatPoly,
    z: &[(BigRational, BigRational)],
    tol: f64,
) -> Result<Option<Vec<RootEnclosure>>> {
    let m = z.len();
    let w = corrections(f, z)?;
    let factor = BigRational::from_integer(BigInt::from((m - 1) as u64));
    let mut centres = Vec::with_capacity(m);
    let mut radii = Vec::with_capacity(m);
    for ((zr, zi), (wr, wi)) in z.iter().zip(&w) {
        let cr = zr - wr;
        let ci = zi - wi;
        let r2 = &factor * &factor * (wr * wr + wi * wi);
        let r = Interval::sqrt_rational(&r2).hi;
        centres.push((cr, ci));
        radii.push(r);
    }
    // pairwise disjoint discs
    for i in 0..m {
        for j in i + 1..m {
            let dr = &centres[i].0 - &centres[j].0;
            let di = &centres[i].1 - &centres[j].1;
            let dist2 = &dr * &dr + &di * &di;
            let sum = BigRational::from_float(radii[i] + radii[j]).unwrap_or_else(BigRational::zero);
            let sum = sum.clone() * sum;
            if dist2 <= sum {
                return Ok(None);
            }
        }
    }
    let mut out = Vec::with_capacity(m);
    for ((cr, ci), r) in centres.into_iter().zip(radii) {
        let abs2 = &cr * &cr + &ci * &ci;
        let s = Interval::sqrt_rational(&abs2);
        let modulus = Interval::new((s.lo - r).next_down().max(0.0), (s.hi + r).next_up());
        if modulus.radius() > tol * modulus.hi.max(1.0) {
            return Ok(None);
        }
        out.push(RootEnclosure {
            re: rational_to_f64(&cr),
            im: rational_to_f64(&ci),
            radius: r,
            modulus,
            multiplicity: 1,
            exact: None,
        });
    }
    Ok(Some(out))
}

fn magnitude_exp(q: &BigRational) -> i64 {
    if q.is_zero() {
        i64::MIN / 4
    } else {
        q.numer().bits() as i64 - q.denom().bits() as i64
    }
}

/// Rounds `q` to the nearest multiple of `2^-k`.
fn round_dyadic(q: &BigRational, k: i64) -> BigRational {
    let k = k.max(0) as usize;
    let scaled = q.numer() << k;
    let den = q.denom();
    let two = BigInt::from(2);
    let rounded = num_integer::Integer::div_floor(&(&scaled * &two + den), &(den * &two));
    BigRational::new(rounded, BigInt::from(1) << k)
}

/// Simultaneous root approximation by Aberth-Ehrlich iteration.
fn aberth(f: &RatPoly) -> Result<Vec<Complex64>> {
    let m = f.degree();
    let lead = f.lead();
    let c: Vec<f64> = f.coeffs().iter().map(|a| rational_to_f64(&(a / &lead))).collect();
    if c.iter().any(|v| !v.is_finite()) {
        return Err(nonfinite(0.0));
    }
    // Fujiwara bound on root moduli
    let bound = (0..m)
        .map(|k| (c[k].abs() / 1.0).powf(1.0 / (m - k) as f64))
        .fold(0.0f64, f64::max)
        * 2.0;
    let bound = if bound > 0.0 { bound } else { 1.0 };
    let eval = |x: Complex64| {
        let mut p = Complex64::new(1.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for k in (0..m).rev() {
            dp = dp * x + p;
            p = p * x + c[k];
        }
        (p, dp)
    };
    let mut z: Vec<Complex64> = (0..m)
        .map(|k| {
            let theta = 2.0 * std::f64::consts::PI * k as f64 / m as f64 + 0.4;
            Complex64::from_polar(bound * 0.5, theta)
        })
        .collect();
    for _ in 0..2000 {
        let mut max_step = 0.0f64;
        for i in 0..m {
            let (p, dp) = eval(z[i]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let sum: Complex64 = (0..m)
                .filter(|&j| j != i)
                .map(|j| Complex64::new(1.0, 0.0) / (z[i] - z[j]))
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * sum);
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(f64::MIN_POSITIVE));
            }
        }
        if max_step < 1e-15 {
            break;
        }
    }
    if z.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(nonfinite(0.0));
    }
    // keep approximations distinct so the corrections are defined
    for i in 0..m {
        for j in 0..i {
            if z[i] == z[j] {
                let nudge = Complex64::new(z[i].norm().max(1.0) * 1e-12, 0.0);
                z[i] += nudge;
            }
        }
    }
    Ok(z)
}

/// Integer roots of `p` with multiplicity, found from certified enclosures and
/// confirmed by exact evaluation.
pub fn integer_roots(p: &IntPoly) -> Result<Vec<(BigInt, usize)>> {
    let mut out = Vec::new();
    for (factor, mult) in p.to_rational().squarefree_factors() {
        for r in enclose_squarefree(&factor, 0.25)? {
            let cand = match &r.exact {
                Some(q) if q.is_integer() => Some(q.to_integer()),
                Some(_) => None,
                None if r.im.abs() <= r.radius => round_to_bigint(r.re),
                None => None,
            };
            if let Some(k) = cand {
                if factor.eval(&BigRational::from_integer(k.clone())).is_zero() {
                    out.push((k, mult));
                }
            }
        }
    }
    Ok(out)
}

fn round_to_bigint(x: f64) -> Option<BigInt> {
    BigRational::from_float(x.round()).map(|r| r.to_integer())
}
