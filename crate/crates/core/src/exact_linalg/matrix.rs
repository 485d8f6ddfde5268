use std::fmt;
use std::ops::{Mul, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::poly::IntPoly;
use crate::error::{Error, Result};

/// Square matrix with arbitrary-precision integer entries, row-major.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IntegerMatrix {
    dim: usize,
    entries: Vec<BigInt>,
}

impl IntegerMatrix {
    pub fn new(rows: Vec<Vec<BigInt>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidMatrix("dimension must be at least 1".into()));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidMatrix(format!(
                "row {bad} has {} entries, expected {dim}",
                rows[bad].len()
            )));
        }
        Ok(Self {
            dim,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_i64_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| r.as_ref().iter().map(|&v| BigInt::from(v)).collect())
                .collect(),
        )
    }

    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> BigInt) -> Self {
        assert!(dim >= 1);
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { BigInt::one() } else { BigInt::zero() })
    }

    pub fn diag(values: &[i64]) -> Self {
        Self::from_fn(values.len(), |i, j| {
            if i == j {
                BigInt::from(values[i])
            } else {
                BigInt::zero()
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.dim + j]
    }

    pub(crate) fn get_mut(&mut self, i: usize, j: usize) -> &mut BigInt {
        &mut self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[BigInt] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.dim).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).clone())
    }

    pub fn trace(&self) -> BigInt {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.dim).all(|i| (0..self.dim).all(|j| i == j || self.get(i, j).is_zero()))
    }

    pub fn scale(&self, k: &BigInt) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * k).collect(),
        }
    }

    /// `self - I`.
    pub fn minus_identity(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            *m.get_mut(i, i) -= 1;
        }
        m
    }

    /// Exact `self^n` by binary exponentiation; `self^0 = I`.
    pub fn pow(&self, n: u32) -> Self {
        let mut result = Self::identity(self.dim);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        result
    }

    /// Determinant by Bareiss fraction-free elimination.
    pub fn det(&self) -> BigInt {
        let n = self.dim;
        let mut a: Vec<Vec<BigInt>> = self.rows();
        let mut sign = 1i32;
        let mut prev = BigInt::one();
        for k in 0..n.saturating_sub(1) {
            if a[k][k].is_zero() {
                match (k + 1..n).find(|&r| !a[r][k].is_zero()) {
                    Some(r) => {
                        a.swap(k, r);
                        sign = -sign;
                    }
                    None => return BigInt::zero(),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &a[i][j] * &a[k][k] - &a[i][k] * &a[k][j];
                    a[i][j] = v / &prev;
                }
            }
            prev = a[k][k].clone();
        }
        let d = a[n - 1][n - 1].clone();
        if sign < 0 {
            -d
        } else {
            d
        }
    }

    /// Characteristic polynomial `det(xI - A)` by the Faddeev-LeVerrier
    /// recurrence; every division is exact over the integers.
    pub fn char_poly(&self) -> IntPoly {
        let n = self.dim;
        let mut coeffs = vec![BigInt::zero(); n + 1];
        coeffs[n] = BigInt::one();
        let mut m = Self::from_fn(n, |_, _| BigInt::zero());
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            let mut next = self * &m;
            for i in 0..n {
                *next.get_mut(i, i) += &coeffs[n - k + 1];
            }
            m = next;
            let t = (self * &m).trace();
            let (q, r) = num_integer::Integer::div_rem(&t, &BigInt::from(k));
            debug_assert!(r.is_zero());
            coeffs[n - k] = -q;
        }
        IntPoly::new(coeffs)
    }

    /// Horner evaluation of an integer polynomial at this matrix.
    pub fn eval_poly(&self, p: &IntPoly) -> Self {
        let mut acc = Self::from_fn(self.dim, |_, _| BigInt::zero());
        for c in p.coeffs().iter().rev() {
            acc = &acc * self;
            for i in 0..self.dim {
                *acc.get_mut(i, i) += c;
            }
        }
        acc
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn max_abs_entry(&self) -> BigInt {
        self.entries.iter().map(|e| e.abs()).max().unwrap_or_default()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(big_to_f64).collect())
            .collect()
    }

    pub fn to_rational(&self) -> RationalMatrix {
        RationalMatrix::from_fn(self.dim, |i, j| BigRational::from_integer(self.get(i, j).clone()))
    }

    pub fn mul_vec(&self, v: &[BigInt]) -> Vec<BigInt> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn mul_rational_vec(&self, v: &[BigRational]) -> Vec<BigRational> {
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(BigRational::zero(), |acc, (a, b)| acc + b * a)
            })
            .collect()
    }

    pub(crate) fn swap_rows(&mut self, a: usize, b: usize) {
        if a != b {
            for j in 0..self.dim {
                self.entries.swap(a * self.dim + j, b * self.dim + j);
            }
        }
    }

    pub(crate) fn swap_cols(&mut self, a: usize, b: usize) {
        if a != b {
            for i in 0..self.dim {
                self.entries.swap(i * self.dim + a, i * self.dim + b);
            }
        }
    }

    /// row[dst] += c * row[src]
    pub(crate) fn add_row_multiple(&mut self, dst: usize, src: usize, c: &BigInt) {
        for j in 0..self.dim {
            let v = self.get(src, j) * c;
            *self.get_mut(dst, j) += v;
        }
    }

    /// col[dst] += c * col[src]
    pub(crate) fn add_col_multiple(&mut self, dst: usize, src: usize, c: &BigInt) {
        for i in 0..self.dim {
            let v = self.get(i, src) * c;
            *self.get_mut(i, dst) += v;
        }
    }

    pub(crate) fn negate_row(&mut self, i: usize) {
        for j in 0..self.dim {
            let v = -self.get(i, j);
            *self.get_mut(i, j) = v;
        }
    }

    pub(crate) fn negate_col(&mut self, j: usize) {
        for i in 0..self.dim {
            let v = -self.get(i, j);
            *self.get_mut(i, j) = v;
        }
    }
}

impl Mul for &IntegerMatrix {
    type Output = IntegerMatrix;

    fn mul(self, rhs: &IntegerMatrix) -> IntegerMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        IntegerMatrix::from_fn(n, |i, j| (0..n).map(|k| self.get(i, k) * rhs.get(k, j)).sum())
    }
}

impl Sub for &IntegerMatrix {
    type Output = IntegerMatrix;

    fn sub(self, rhs: &IntegerMatrix) -> IntegerMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        IntegerMatrix {
            dim: self.dim,
            entries: self.entries.iter().zip(&rhs.entries).map(|(a, b)| a - b).collect(),
        }
    }
}

impl fmt::Display for IntegerMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.dim {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "[")?;
            for (j, e) in self.row(i).iter().enumerate() {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{e}")?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

/// Parses the compact text form `"d; a11 a12 ... add"`.
impl FromStr for IntegerMatrix {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (head, body) = s
            .split_once(';')
            .ok_or_else(|| Error::Parse(format!("expected \"d; a11 a12 ...\", got {s:?}")))?;
        let dim: usize = head
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("bad dimension {:?}", head.trim())))?;
        let vals = body
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<BigInt>().map_err(|_| Error::Parse(format!("bad entry {t:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if dim == 0 || vals.len() != dim * dim {
            return Err(Error::Parse(format!(
                "dimension {dim} needs {} entries, got {}",
                dim * dim,
                vals.len()
            )));
        }
        Self::new(vals.chunks(dim).map(<[BigInt]>::to_vec).collect())
    }
}

/// Square matrix of exact rationals; entries are kept in lowest terms by
/// `BigRational`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalMatrix {
    dim: usize,
    entries: Vec<BigRational>,
}

impl RationalMatrix {
    pub fn from_fn(dim: usize, f: impl Fn(usize, usize) -> BigRational) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn from_rows(rows: Vec<Vec<BigRational>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidMatrix("rational matrix must be square and non-empty".into()));
        }
        Ok(Self {
            dim,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { BigRational::one() } else { BigRational::zero() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &BigRational {
        &self.entries[i * self.dim + j]
    }

    pub fn row(&self, i: usize) -> &[BigRational] {
        &self.entries[i * self.dim..(i + 1) * self.dim]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i).clone())
    }

    /// Least common multiple of all entry denominators.
    pub fn denominator_lcm(&self) -> BigInt {
        self.entries.iter().fold(BigInt::one(), |acc, e| {
            num_integer::Integer::lcm(&acc, e.denom())
        })
    }

    /// Returns the integer matrix `k * self` when every entry becomes integral.
    pub fn scaled_to_integer(&self, k: &BigInt) -> Option<IntegerMatrix> {
        let scaled: Vec<BigRational> = self.entries.iter().map(|e| e * k).collect();
        if scaled.iter().all(|e| e.is_integer()) {
            Some(IntegerMatrix {
                dim: self.dim,
                entries: scaled.into_iter().map(|e| e.to_integer()).collect(),
            })
        } else {
            None
        }
    }

    /// Exact inverse by Gauss-Jordan elimination.
    pub fn inverse(&self) -> Result<Self> {
        let n = self.dim;
        let mut a: Vec<Vec<BigRational>> = (0..n).map(|i| self.row(i).to_vec()).collect();
        let mut inv: Vec<Vec<BigRational>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                    .collect()
            })
            .collect();
        for col in 0..n {
            let piv = (col..n).find(|&r| !a[r][col].is_zero()).ok_or(Error::SingularMatrix)?;
            a.swap(col, piv);
            inv.swap(col, piv);
            let p = a[col][col].clone();
            for j in 0..n {
                a[col][j] = &a[col][j] / &p;
                inv[col][j] = &inv[col][j] / &p;
            }
            for r in 0..n {
                if r != col && !a[r][col].is_zero() {
                    let f = a[r][col].clone();
                    for j in 0..n {
                        let da = &a[col][j] * &f;
                        a[r][j] -= da;
                        let di = &inv[col][j] * &f;
                        inv[r][j] -= di;
                    }
                }
            }
        }
        Self::from_rows(inv)
    }

    pub fn mul_vec(&self, v: &[BigRational]) -> Vec<BigRational> {
        (0..self.dim)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(BigRational::zero(), |acc, (a, b)| acc + a * b)
            })
            .collect()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.row(i).iter().map(rational_to_f64).collect())
            .collect()
    }
}

impl Mul for &RationalMatrix {
    type Output = RationalMatrix;

    fn mul(self, rhs: &RationalMatrix) -> RationalMatrix {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch");
        let n = self.dim;
        RationalMatrix::from_fn(n, |i, j| {
            (0..n).fold(BigRational::zero(), |acc, k| acc + self.get(i, k) * rhs.get(k, j))
        })
    }
}

pub fn big_to_f64(v: &BigInt) -> f64 {
    v.to_f64().unwrap_or(if v.is_negative() { f64::NEG_INFINITY } else { f64::INFINITY })
}

/// `f64` approximation of a rational (relative error about 2^-63 before the
/// final rounding), robust to numerators and denominators beyond `f64` range.
pub fn rational_to_f64(q: &BigRational) -> f64 {
    if q.is_zero() {
        return 0.0;
    }
    let num = q.numer().abs();
    let den = q.denom();
    let shift = 64 + den.bits() as i64 - num.bits() as i64;
    let quot = if shift >= 0 {
        (num << shift as usize) / den
    } else {
        num / (den << (-shift) as usize)
    };
    let v = ldexp(big_to_f64(&quot), -shift);
    if q.is_negative() {
        -v
    } else {
        v
    }
}

/// `x * 2^e` without intermediate overflow of the power.
pub fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
    }
    x * 2f64.powi(e as i32)
}

/// Natural log of a positive rational without overflowing `f64`.
pub fn ln_rational(q: &BigRational) -> f64 {
    ln_bigint(q.numer()) - ln_bigint(q.denom())
}

pub fn ln_bigint(v: &BigInt) -> f64 {
    let bits = v.bits();
    if bits < 1000 {
        return big_to_f64(v).ln();
    }
    let shift = bits - 60;
    big_to_f64(&(v >> shift as usize)).ln() + shift as f64 * std::f64::consts::LN_2
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[i64]]) -> IntegerMatrix {
        IntegerMatrix::from_i64_rows(rows).unwrap()
    }

    #[test]
    fn power_examples() {
        assert_eq!(m(&[&[2]]).pow(5), m(&[&[32]]));
        assert_eq!(IntegerMatrix::identity(2).pow(7), IntegerMatrix::identity(2));
        // hand multiplication: [[3,1],[1,2]]^2 = [[9+1, 3+2],[3+2, 1+4]]
        assert_eq!(m(&[&[3, 1], &[1, 2]]).pow(2), m(&[&[10, 5], &[5, 5]]));
    }

    #[test]
    fn det_examples() {
        assert_eq!(m(&[&[2, 0], &[0, 3]]).det(), BigInt::from(6));
        // cofactor: 9*4 - 5*5
        assert_eq!(m(&[&[9, 5], &[5, 4]]).det(), BigInt::from(11));
        assert_eq!(IntegerMatrix::identity(4).det(), BigInt::one());
        assert_eq!(m(&[&[0, 1], &[1, 0]]).det(), BigInt::from(-1));
        assert_eq!(m(&[&[1, 2], &[2, 4]]).det(), BigInt::zero());
        assert_eq!(m(&[&[0, 0, 1], &[0, 2, 0], &[3, 0, 0]]).det(), BigInt::from(-6));
    }

    #[test]
    fn char_poly_examples() {
        assert_eq!(m(&[&[2]]).char_poly().coeffs(), &[BigInt::from(-2), BigInt::one()]);
        // trace 5, determinant 5
        let p = m(&[&[3, 1], &[1, 2]]).char_poly();
        assert_eq!(p.coeffs(), &[5, -5, 1].map(BigInt::from));
        let p = m(&[&[2, 0], &[0, 2]]).char_poly();
        assert_eq!(p.coeffs(), &[4, -4, 1].map(BigInt::from));
    }

    #[test]
    fn cayley_hamilton() {
        let a = m(&[&[1, 2, 0], &[-3, 4, 5], &[7, 0, -2]]);
        assert!(a.eval_poly(&a.char_poly()).is_zero());
    }

    #[test]
    fn parse_compact() {
        let a: IntegerMatrix = "2; 3 1 1 2".parse().unwrap();
        assert_eq!(a, m(&[&[3, 1], &[1, 2]]));
        assert!("2; 1 2 3".parse::<IntegerMatrix>().is_err());
        assert!("x; 1".parse::<IntegerMatrix>().is_err());
        assert_eq!(a.to_string(), "[[3,1],[1,2]]");
    }

    #[test]
    fn rational_inverse() {
        let a = m(&[&[4, 1], &[0, 2]]).to_rational();
        let inv = a.inverse().unwrap();
        assert_eq!(&a * &inv, RationalMatrix::identity(2));
        assert!(m(&[&[1, 2], &[2, 4]]).to_rational().inverse().is_err());
    }

    #[test]
    fn huge_rational_to_f64() {
        let big = BigInt::from(3).pow(800u32);
        let q = BigRational::new(big.clone() * 2, big);
        assert!((rational_to_f64(&q) - 2.0).abs() < 1e-15);
        let q = BigRational::new(BigInt::one(), BigInt::from(2).pow(1100u32));
        assert_eq!(rational_to_f64(&q), 0.0);
        let l = ln_bigint(&BigInt::from(2).pow(5000u32));
        assert!((l - 5000.0 * std::f64::consts::LN_2).abs() < 1e-9);
    }
}
