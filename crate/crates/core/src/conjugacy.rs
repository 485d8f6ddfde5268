//! Conjugating a rationally diagonalizable integer matrix to a diagonal one.
//!
//! Rows of `P` are left eigenvectors, so `P A = D P`; clearing denominators
//! with `beta = lcm` gives an integer `P~ = beta P` with the same identity.
//! The map `f(x) = P~ x mod 1` then intertwines `A` and `D` on the torus,
//! and is bi-Lipschitz on small balls with constants the extreme singular
//! values of `P~`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_linalg::{integer_roots, singular_values, IntegerMatrix, RationalMatrix};
use crate::interval::Interval;
use crate::serde_util;
use crate::spectrum_dim::{dim_theorem2, Alpha, DimensionResult, Spectrum};
use crate::torus;

const SV_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConjugacyData {
    #[serde(serialize_with = "rational_matrix")]
    pub p: RationalMatrix,
    #[serde(serialize_with = "integer_matrix")]
    pub p_tilde: IntegerMatrix,
    #[serde(serialize_with = "serde_util::bigint")]
    pub beta: BigInt,
    /// Diagonal of `D`, ordered by modulus.
    #[serde(serialize_with = "serde_util::bigints")]
    pub d: Vec<BigInt>,
    pub e_min: Interval,
    pub e_max: Interval,
}

fn rational_matrix<S: serde::Serializer>(m: &RationalMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<BigRational>> = (0..m.dim()).map(|i| m.row(i).to_vec()).collect();
    serde_util::rational_rows(&rows, s)
}

fn integer_matrix<S: serde::Serializer>(m: &IntegerMatrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    serde_util::bigint_rows(&m.rows(), s)
}

impl ConjugacyData {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn diagonal(&self) -> IntegerMatrix {
        let n = self.dim();
        IntegerMatrix::from_fn(n, |i, j| if i == j { self.d[i].clone() } else { BigInt::zero() })
    }

    /// `P~ A = D P~` entrywise, with `P~` invertible.
    pub fn identity_holds(&self, a: &IntegerMatrix) -> bool {
        !self.p_tilde.det().is_zero() && &self.p_tilde * a == &self.diagonal() * &self.p_tilde
    }

    /// `f(x) = P~ x mod 1`
    pub fn apply(&self, x: &[BigRational]) -> Vec<BigRational> {
        torus::canonical(&self.p_tilde.mul_rational_vec(x))
    }
}

/// Basis of `{ v : M v = 0 }` by exact row reduction, each vector scaled so
/// its first nonzero coordinate is 1.
fn nullspace(m: &RationalMatrix) -> Vec<Vec<BigRational>> {
    let n = m.dim();
    let mut rows: Vec<Vec<BigRational>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..n).find(|&i| !rows[i][c].is_zero()) else {
            continue;
        };
        rows.swap(r, p);
        let inv = rows[r][c].recip();
        for x in rows[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..n {
            if i != r && !rows[i][c].is_zero() {
                let f = rows[i][c].clone();
                for k in 0..n {
                    let t = &f * &rows[r][k];
                    rows[i][k] -= t;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    let free: Vec<usize> = (0..n).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![BigRational::zero(); n];
            v[f] = BigRational::one();
            for (ri, &pc) in pivots.iter().enumerate() {
                v[pc] = -rows[ri][f].clone();
            }
            let lead = v.iter().find(|x| !x.is_zero()).expect("basis vector is nonzero").clone();
            v.iter().map(|x| x / &lead).collect()
        })
        .collect()
}

pub fn rational_diagonalize(a: &IntegerMatrix) -> Result<ConjugacyData> {
    let n = a.dim();
    let mut roots = integer_roots(&a.char_poly())?;
    if roots.iter().map(|(_, m)| m).sum::<usize>() != n {
        return Err(Error::NonIntegerEigenvalues);
    }
    roots.sort_by(|x, y| x.0.abs().cmp(&y.0.abs()).then(x.0.cmp(&y.0)));
    if let Some((l, _)) = roots.iter().find(|(l, _)| l.abs() <= BigInt::one()) {
        return Err(Error::InvalidSpectrum(format!("eigenvalue {l} has modulus at most 1")));
    }
    let at = a.transpose().to_rational();
    let mut p_rows = Vec::with_capacity(n);
    let mut d = Vec::with_capacity(n);
    for (lambda, mult) in &roots {
        let l = BigRational::from_integer(lambda.clone());
        let shifted = RationalMatrix::from_fn(n, |i, j| {
            if i == j {
                at.get(i, j) - &l
            } else {
                at.get(i, j).clone()
            }
        });
        let basis = nullspace(&shifted);
        if basis.len() != *mult {
            return Err(Error::NotDiagonalizableOverQ);
        }
        for v in basis {
            p_rows.push(v);
            d.push(lambda.clone());
        }
    }
    let p = RationalMatrix::from_rows(p_rows)?;
    let beta = p.denominator_lcm();
    let p_tilde = p.scaled_to_integer(&beta).expect("lcm clears every denominator");
    let sv = singular_values(&p_tilde, SV_TOL)?;
    let cd = ConjugacyData {
        p,
        p_tilde,
        beta,
        d,
        e_min: sv[0],
        e_max: sv[n - 1],
    };
    assert!(cd.identity_holds(a), "conjugation identity failed");
    Ok(cd)
}

/// Spectrum of `|D|`, flagged as integer diagonalizable.
pub fn diagonal_spectrum(cd: &ConjugacyData) -> Result<Spectrum> {
    Ok(Spectrum::from_rationals(cd.d.iter().map(|l| BigRational::from_integer(l.abs())).collect())?
        .with_integer_diagonalizable(true))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CommutationReport {
    pub samples: usize,
    /// Indices of samples where `f(Ax) != D f(x)`.
    pub failures: Vec<usize>,
}

impl CommutationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

pub fn commutation_check(cd: &ConjugacyData, a: &IntegerMatrix, samples: &[Vec<BigRational>]) -> CommutationReport {
    let dm = cd.diagonal();
    let failures = samples
        .iter()
        .enumerate()
        .filter(|(_, x)| {
            let tx = torus::canonical(&a.mul_rational_vec(x));
            let lhs = cd.apply(&tx);
            let rhs = torus::canonical(&dm.mul_rational_vec(&cd.apply(x)));
            lhs != rhs
        })
        .map(|(i, _)| i)
        .collect();
    CommutationReport {
        samples: samples.len(),
        failures,
    }
}

/// Whether `f(x)` has period `n` under `D`, i.e. `(D^n - I) f(x)` is integral.
pub fn transports_periodic(cd: &ConjugacyData, x: &[BigRational], n: u32) -> bool {
    let fx = cd.apply(x);
    cd.d.iter()
        .zip(&fx)
        .all(|(l, y)| (y * BigRational::from_integer(l.pow(n) - 1)).is_integer())
}

/// Uniform rationals `k / q` with `1 <= q <= max_den`, `0 <= k < q`.
pub fn random_small_rationals<R: Rng>(rng: &mut R, d: usize, count: usize, max_den: u64) -> Vec<Vec<BigRational>> {
    (0..count)
        .map(|_| {
            (0..d)
                .map(|_| {
                    let q = rng.random_range(1..=max_den);
                    BigRational::new(rng.random_range(0..q).into(), q.into())
                })
                .collect()
        })
        .collect()
}

/// `G - c I` (or `c I - G`) is positive semidefinite, by principal minors.
fn psd_shift(g: &RationalMatrix, c: &BigRational, negate: bool) -> bool {
    let n = g.dim();
    let m = RationalMatrix::from_fn(n, |i, j| {
        let v = if i == j { g.get(i, j) - c } else { g.get(i, j).clone() };
        if negate {
            -v
        } else {
            v
        }
    });
    (1u32..(1 << n)).all(|mask| {
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let sub = RationalMatrix::from_fn(idx.len(), |i, j| m.get(idx[i], idx[j]).clone());
        !rational_det(&sub).is_negative()
    })
}

fn rational_det(m: &RationalMatrix) -> BigRational {
    let n = m.dim();
    let mut a: Vec<Vec<BigRational>> = (0..n).map(|i| m.row(i).to_vec()).collect();
    let mut det = BigRational::one();
    for c in 0..n {
        let Some(p) = (c..n).find(|&i| !a[i][c].is_zero()) else {
            return BigRational::zero();
        };
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= &a[c][c];
        for i in c + 1..n {
            let f = &a[i][c] / &a[c][c];
            for k in c..n {
                let t = &f * &a[c][k];
                a[i][k] -= t;
            }
        }
    }
    det
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SandwichReport {
    pub r: f64,
    /// `B(0, e_min r) ⊂ P~ B(0, r)` with `e_min` the certified lower bound.
    pub inner_radius: f64,
    pub inner_holds: bool,
    /// `P~ B(0, r) ⊂ B(0, e_max r)` with `e_max` the certified upper bound.
    pub outer_radius: f64,
    pub outer_holds: bool,
    /// The same inclusions with `e_min^d` and `e_max^d`.
    pub inner_holds_pow_d: bool,
    pub outer_holds_pow_d: bool,
}

/// Checks the inclusions against `G = P~^T P~` exactly: the image of
/// `B(0, r)` contains `B(0, s)` iff `G - (s/r)^2 I` is PSD, and lies in
/// `B(0, s)` iff `(s/r)^2 I - G` is PSD.
pub fn lipschitz_sandwich(cd: &ConjugacyData, radii: &[f64]) -> Result<Vec<SandwichReport>> {
    if radii.iter().any(|&r| !(r > 0.0 && r < 0.5)) {
        return Err(Error::InvalidArgument("radii must lie in (0, 1/2)".into()));
    }
    let g = (&cd.p_tilde.transpose() * &cd.p_tilde).to_rational();
    let lo = BigRational::from_float(cd.e_min.lo).expect("finite");
    let hi = BigRational::from_float(cd.e_max.hi).expect("finite");
    let inner_holds = psd_shift(&g, &(&lo * &lo), false);
    let outer_holds = psd_shift(&g, &(&hi * &hi), true);
    // with e = sigma exactly, e^d <= sigma_min iff d = 1 or sigma_min <= 1,
    // and e^d >= sigma_max iff d = 1 or sigma_max >= 1
    let d = cd.dim();
    let one = BigRational::one();
    let inner_holds_pow_d = d == 1 || !psd_shift(&g, &one, false) || rational_det(&sub_one(&g)).is_zero();
    let outer_holds_pow_d = d == 1 || !psd_shift(&g, &one, true) || rational_det(&sub_one(&g)).is_zero();
    Ok(radii
        .iter()
        .map(|&r| SandwichReport {
            r,
            inner_radius: cd.e_min.lo * r,
            inner_holds,
            outer_radius: cd.e_max.hi * r,
            outer_holds,
            inner_holds_pow_d,
            outer_holds_pow_d,
        })
        .collect())
}

fn sub_one(g: &RationalMatrix) -> RationalMatrix {
    RationalMatrix::from_fn(g.dim(), |i, j| {
        if i == j {
            g.get(i, j) - BigRational::one()
        } else {
            g.get(i, j).clone()
        }
    })
}

/// The dimension formula evaluated on `|D|`; equal to the value for `A`
/// since the conjugacy is bi-Lipschitz.
pub fn transported_dimension(a: &IntegerMatrix, alpha: &Alpha) -> Result<DimensionResult> {
    let cd = rational_diagonalize(a)?;
    dim_theorem2(&diagonal_spectrum(&cd)?, alpha)
}

/// `beta / p` fails to clear the denominators of `P` for every prime `p | beta`.
pub fn is_minimal_beta(cd: &ConjugacyData) -> bool {
    let mut rest = cd.beta.clone();
    let mut p = BigInt::from(2);
    let mut primes = Vec::new();
    while &p * &p <= rest {
        if rest.is_multiple_of(&p) {
            primes.push(p.clone());
            while rest.is_multiple_of(&p) {
                rest /= &p;
            }
        }
        p += 1;
    }
    if rest > BigInt::one() {
        primes.push(rest);
    }
    primes.iter().all(|q| {
        let b = &cd.beta / q;
        cd.p.scaled_to_integer(&b).is_none()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_linalg::eigen_moduli;
    use crate::spectrum_dim::dim_theorem1;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn m(rows: &[[i64; 2]]) -> IntegerMatrix {
        IntegerMatrix::from_i64_rows(rows).unwrap()
    }

    #[test]
    fn diagonal_is_fixed() {
        let cd = rational_diagonalize(&IntegerMatrix::diag(&[2, 3])).unwrap();
        assert_eq!(cd.p, RationalMatrix::identity(2));
        assert_eq!(cd.beta, BigInt::one());
        assert_eq!(cd.d, vec![BigInt::from(2), BigInt::from(3)]);
    }

    #[test]
    fn upper_triangular_example() {
        let a = m(&[[4, 1], [0, 2]]);
        let cd = rational_diagonalize(&a).unwrap();
        assert!(cd.identity_holds(&a));
        assert_eq!(cd.d, vec![BigInt::from(2), BigInt::from(4)]);
        // oracle: left eigenvectors solved by hand are (0, 1) and (1, 1/2)
        let want = RationalMatrix::from_rows(vec![
            vec![BigRational::zero(), BigRational::one()],
            vec![BigRational::one(), BigRational::new(1.into(), 2.into())],
        ])
        .unwrap();
        assert_eq!(cd.p, want);
        assert_eq!(cd.beta, BigInt::from(2));
        assert!(is_minimal_beta(&cd));
    }

    #[test]
    fn irrational_and_defective_rejected() {
        assert_eq!(rational_diagonalize(&m(&[[3, 1], [1, 2]])), Err(Error::NonIntegerEigenvalues));
        assert_eq!(rational_diagonalize(&m(&[[2, 1], [0, 2]])), Err(Error::NotDiagonalizableOverQ));
    }

    #[test]
    fn commutation_on_random_rationals() {
        let a = m(&[[4, 1], [0, 2]]);
        let cd = rational_diagonalize(&a).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut xs = random_small_rationals(&mut rng, 2, 1000, 10_000);
        xs.push(vec![BigRational::zero(), BigRational::zero()]);
        assert!(commutation_check(&cd, &a, &xs).passed());
    }

    #[test]
    fn periodicity_is_transported() {
        let a = m(&[[4, 1], [0, 2]]);
        let cd = rational_diagonalize(&a).unwrap();
        let set = crate::periodic_lattice::enumerate_periodic(&a, 3, &BigInt::from(1000)).unwrap();
        for x in set.points() {
            assert!(transports_periodic(&cd, &x, 3));
        }
    }

    #[test]
    fn sandwich_examples() {
        let cd = rational_diagonalize(&IntegerMatrix::diag(&[2, 3])).unwrap();
        let rep = lipschitz_sandwich(&cd, &[0.1]).unwrap();
        assert!(rep[0].inner_holds && rep[0].outer_holds);
        assert!(rep[0].inner_holds_pow_d && rep[0].outer_holds_pow_d);
        let cd = ConjugacyData {
            p_tilde: IntegerMatrix::diag(&[2, 3]),
            p: IntegerMatrix::diag(&[2, 3]).to_rational(),
            beta: BigInt::one(),
            e_min: singular_values(&IntegerMatrix::diag(&[2, 3]), SV_TOL).unwrap()[0],
            e_max: singular_values(&IntegerMatrix::diag(&[2, 3]), SV_TOL).unwrap()[1],
            d: vec![BigInt::from(2), BigInt::from(3)],
        };
        let rep = lipschitz_sandwich(&cd, &[0.1]).unwrap();
        assert!((rep[0].inner_radius - 0.2).abs() < 1e-12 && (rep[0].outer_radius - 0.3).abs() < 1e-12);
        assert!(rep[0].inner_holds && rep[0].outer_holds);
        // e_min^2 = 4 > 2: the squared inner constant is too large
        assert!(!rep[0].inner_holds_pow_d && rep[0].outer_holds_pow_d);
    }

    #[test]
    fn similarity_preserves_dimension() {
        // U^{-1} diag(2, 8) U with U = [[2, 1], [1, 1]]
        let u = m(&[[2, 1], [1, 1]]);
        let uinv = m(&[[1, -1], [-1, 2]]);
        let a = &(&uinv * &IntegerMatrix::diag(&[2, 8])) * &u;
        let v = transported_dimension(&a, &Alpha::ln(2)).unwrap();
        assert!((v.value - 1.5).abs() < 1e-12);
        let spec = eigen_moduli(&a, 1e-12).unwrap();
        assert_eq!(spec.values(), vec![2.0, 8.0]);
        let big = transported_dimension(&a, &Alpha::ln(4)).unwrap();
        let t1 = dim_theorem1(&spec, &Alpha::ln(4)).unwrap();
        assert!((big.value - t1.value).abs() < 1e-12);
    }
}
