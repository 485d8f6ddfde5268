//! Exact orbits of rational points and the return-time statistics built on
//! them.
//!
//! A rational start `x` with common denominator `Q` stays on the grid
//! `Z^d / Q`, so `T^n x` is tracked as an integer vector mod `Q`. Narrow
//! matrices and denominators use `i128`; everything else falls back to big
//! integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact_linalg::{big_to_f64, IntegerMatrix};
use crate::fgeom;
use crate::serde_util;
use crate::spectrum_dim::RateFunction;
use crate::torus;

#[derive(Clone, Debug)]
enum State {
    Narrow {
        a: Vec<Vec<i128>>,
        q: i128,
        start: Vec<i128>,
        cur: Vec<i128>,
    },
    Wide {
        a: IntegerMatrix,
        q: BigInt,
        start: Vec<BigInt>,
        cur: Vec<BigInt>,
    },
}

/// The orbit `x, T x, T^2 x, ...` of a rational point.
#[derive(Clone, Debug)]
pub struct RationalOrbit {
    state: State,
    step: u32,
}

impl RationalOrbit {
    pub fn new(a: &IntegerMatrix, x: &[BigRational]) -> Result<Self> {
        if x.len() != a.dim() {
            return Err(Error::InvalidArgument(format!(
                "point has {} coordinates, matrix has dimension {}",
                x.len(),
                a.dim()
            )));
        }
        let x = torus::canonical(x);
        let q = x.iter().fold(BigInt::from(1), |acc, c| acc.lcm(c.denom()));
        let nums: Vec<BigInt> = x.iter().map(|c| c.numer() * (&q / c.denom())).collect();
        let narrow_entries: Option<Vec<Vec<i128>>> = a
            .rows()
            .iter()
            .map(|r| r.iter().map(|v| v.to_i64().map(i128::from)).collect())
            .collect();
        let state = match (narrow_entries, q.to_i128()) {
            (Some(rows), Some(qi)) if qi < 1 << 56 && rows.iter().flatten().all(|v| v.abs() < 1 << 60) => {
                let start: Vec<i128> = nums.iter().map(|v| v.to_i128().expect("below q")).collect();
                State::Narrow {
                    a: rows,
                    q: qi,
                    cur: start.clone(),
                    start,
                }
            }
            _ => State::Wide {
                a: a.clone(),
                q,
                cur: nums.clone(),
                start: nums,
            },
        };
        Ok(Self { state, step: 0 })
    }

    pub fn step(&self) -> u32 {
        self.step
    }

    pub fn advance(&mut self) {
        match &mut self.state {
            State::Narrow { a, q, cur, .. } => {
                let next: Vec<i128> = a
                    .iter()
                    .map(|row| {
                        row.iter()
                            .zip(cur.iter())
                            .fold(0i128, |acc, (x, y)| (acc + x * y).rem_euclid(*q))
                    })
                    .collect();
                *cur = next;
            }
            State::Wide { a, q, cur, .. } => {
                *cur = a.mul_vec(cur).into_iter().map(|v| v.mod_floor(q)).collect();
            }
        }
        self.step += 1;
    }

    /// `(S, Q)` with `rho(T^n x, x)^2 = S / Q^2`.
    pub fn dist2_parts(&self) -> (BigInt, BigInt) {
        match &self.state {
            State::Narrow { q, start, cur, .. } => {
                let s: i128 = cur
                    .iter()
                    .zip(start)
                    .map(|(c, s)| {
                        let t = centred_mod(c - s, *q);
                        t * t
                    })
                    .sum();
                (BigInt::from(s), BigInt::from(*q))
            }
            State::Wide { q, start, cur, .. } => {
                let s = cur
                    .iter()
                    .zip(start)
                    .map(|(c, s)| {
                        let mut t = (c - s).mod_floor(q);
                        if &t * 2 >= *q {
                            t -= q;
                        }
                        &t * &t
                    })
                    .fold(BigInt::zero(), |a, b| a + b);
                (s, q.clone())
            }
        }
    }

    /// `rho(T^n x, x)`
    pub fn distance(&self) -> f64 {
        match &self.state {
            State::Narrow { q, start, cur, .. } => {
                let s: f64 = cur
                    .iter()
                    .zip(start)
                    .map(|(c, s)| {
                        let t = centred_mod(c - s, *q) as f64 / *q as f64;
                        t * t
                    })
                    .sum();
                s.sqrt()
            }
            State::Wide { .. } => {
                let (s, q) = self.dist2_parts();
                (big_to_f64(&s).sqrt()) / big_to_f64(&q)
            }
        }
    }

    /// `rho(T^n x, x) < r`, exactly.
    pub fn within(&self, r: &BigRational) -> bool {
        let (s, q) = self.dist2_parts();
        // S / Q^2 < p^2 / t^2
        s * r.denom() * r.denom() < r.numer() * r.numer() * &q * &q
    }
}

fn centred_mod(v: i128, q: i128) -> i128 {
    let t = v.rem_euclid(q);
    if 2 * t >= q {
        t - q
    } else {
        t
    }
}

/// All `n <= horizon` with `rho(T^n x, x) < psi(n)`, exactly.
pub fn recurrence_indices(x: &[BigRational], a: &IntegerMatrix, psi: &RateFunction, horizon: u32) -> Result<Vec<u32>> {
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    psi.ensure_covers(horizon)?;
    let mut orbit = RationalOrbit::new(a, x)?;
    let mut out = Vec::new();
    for n in 1..=horizon {
        orbit.advance();
        if orbit.within(&psi.rational(n)) {
            out.push(n);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FloatRecurrence {
    pub indices: Vec<u32>,
    /// First step whose accumulated rounding bound exceeds `1e-9`; hits at
    /// or beyond it are not meaningful.
    pub unreliable_from: Option<u32>,
}

/// Floating-point variant: `T^n x` is iterated in `f64`. Rounding grows like
/// `|A|^n`, which is tracked and reported.
pub fn recurrence_indices_f64(x: &[f64], a: &IntegerMatrix, psi: &RateFunction, horizon: u32) -> Result<FloatRecurrence> {
    psi.ensure_covers(horizon)?;
    let af = a.to_f64_rows();
    let growth = af
        .iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let mut y: Vec<f64> = x.iter().map(|&v| torus::frac_f64(v)).collect();
    let x0 = y.clone();
    let mut err = 0.0f64;
    let mut out = FloatRecurrence {
        indices: Vec::new(),
        unreliable_from: None,
    };
    for n in 1..=horizon {
        y = fgeom::mat_vec(&af, &y).into_iter().map(torus::frac_f64).collect();
        err = err * growth + 4.0 * f64::EPSILON * growth.max(1.0);
        if err > 1e-9 && out.unreliable_from.is_none() {
            out.unreliable_from = Some(n);
        }
        if torus::dist_f64(&y, &x0) < psi.value(n) {
            out.indices.push(n);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoshernitzanStatistic {
    /// `min_{n <= N} n^{1/tau} rho(T^n x, x)`
    pub value: f64,
    pub argmin_n: u32,
}

pub fn boshernitzan_statistic(x: &[BigRational], a: &IntegerMatrix, tau: f64, horizon: u32) -> Result<BoshernitzanStatistic> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if horizon == 0 {
        return Err(Error::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut orbit = RationalOrbit::new(a, x)?;
    let mut best = BoshernitzanStatistic {
        value: f64::INFINITY,
        argmin_n: 0,
    };
    for n in 1..=horizon {
        orbit.advance();
        let v = (n as f64).powf(1.0 / tau) * orbit.distance();
        if v < best.value {
            best = BoshernitzanStatistic { value: v, argmin_n: n };
            if v == 0.0 {
                break;
            }
        }
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OrbitRecord {
    #[serde(serialize_with = "serde_util::rationals")]
    pub start: Vec<BigRational>,
    pub horizon: u32,
    /// `rho(T^n x, x)` for `n = 1..=horizon`.
    pub distances: Vec<f64>,
}

pub fn orbit_record(x: &[BigRational], a: &IntegerMatrix, horizon: u32) -> Result<OrbitRecord> {
    let mut orbit = RationalOrbit::new(a, x)?;
    let distances = (0..horizon)
        .map(|_| {
            orbit.advance();
            orbit.distance()
        })
        .collect();
    Ok(OrbitRecord {
        start: torus::canonical(x),
        horizon,
        distances,
    })
}

fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    (a as u128 * b as u128 % m as u128) as u64
}

fn pow_mod(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1u64;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod(r, b, m);
        }
        b = mul_mod(b, b, m);
        e >>= 1;
    }
    r
}

/// Deterministic Miller-Rabin for 64-bit integers.
pub fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        if n % p == 0 {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'outer: for a in BASES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'outer;
            }
        }
        return false;
    }
    true
}

/// A random rational point whose coordinates share a random prime
/// denominator in `[2^40, 2^41)`. Dyadic floats would collapse under
/// expanding maps with even entries; a large prime denominator keeps the
/// orbit generic over any practical horizon.
pub fn random_rational_point<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<BigRational> {
    let p = loop {
        let c: u64 = rng.random_range(1u64 << 40..1u64 << 41) | 1;
        if is_prime_u64(c) {
            break c;
        }
    };
    (0..d)
        .map(|_| BigRational::new(BigInt::from(rng.random_range(0..p)), BigInt::from(p)))
        .collect()
}
