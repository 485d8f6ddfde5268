use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use super::matrix::IntegerMatrix;
use crate::error::{Error, Result};

/// `M = U * S * V` with `U`, `V` unimodular and `S` diagonal,
/// `s_1 | s_2 | ... | s_d`, all `s_i >= 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SnfDecomposition {
    pub u: IntegerMatrix,
    pub s: IntegerMatrix,
    pub v: IntegerMatrix,
    v_inv: IntegerMatrix,
}

impl SnfDecomposition {
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        (0..self.s.dim()).map(|i| self.s.get(i, i).clone()).collect()
    }

    /// `V^-1`, tracked alongside `V` during the reduction.
    pub fn v_inverse(&self) -> &IntegerMatrix {
        &self.v_inv
    }
}

/// Smith normal form of a nonsingular integer matrix.
///
/// Pivot choice: smallest absolute nonzero entry of the active block, ties
/// broken by row-major position. The working matrix `W` always satisfies
/// `M = U * W * V`; every elementary operation applied to `W` is undone on
/// `U` or `V` so the identity never breaks.
pub fn smith_normal_form(m: &IntegerMatrix) -> Result<SnfDecomposition> {
    if m.det().is_zero() {
        return Err(Error::SingularMatrix);
    }
    let n = m.dim();
    let mut w = m.clone();
    let mut u = IntegerMatrix::identity(n);
    let mut v = IntegerMatrix::identity(n);
    let mut v_inv = IntegerMatrix::identity(n);

    // row[dst] += c * row[src] on W
    let row_add = |w: &mut IntegerMatrix, u: &mut IntegerMatrix, dst: usize, src: usize, c: &BigInt| {
        w.add_row_multiple(dst, src, c);
        u.add_col_multiple(src, dst, &-c);
    };
    // col[dst] += c * col[src] on W
    let col_add = |w: &mut IntegerMatrix,
                   v: &mut IntegerMatrix,
                   v_inv: &mut IntegerMatrix,
                   dst: usize,
                   src: usize,
                   c: &BigInt| {
        w.add_col_multiple(dst, src, c);
        v.add_row_multiple(src, dst, &-c);
        v_inv.add_col_multiple(dst, src, c);
    };

    for t in 0..n {
        loop {
            let (pi, pj) = pivot(&w, t).ok_or(Error::SingularMatrix)?;
            w.swap_rows(t, pi);
            u.swap_cols(t, pi);
            w.swap_cols(t, pj);
            v.swap_rows(t, pj);
            v_inv.swap_cols(t, pj);

            let p = w.get(t, t).clone();
            let mut clean = true;
            for i in t + 1..n {
                let q = w.get(i, t) / &p;
                if !q.is_zero() {
                    row_add(&mut w, &mut u, i, t, &-q);
                }
                if !w.get(i, t).is_zero() {
                    clean = false;
                }
            }
            for j in t + 1..n {
                let q = w.get(t, j) / &p;
                if !q.is_zero() {
                    col_add(&mut w, &mut v, &mut v_inv, j, t, &-q);
                }
                if !w.get(t, j).is_zero() {
                    clean = false;
                }
            }
            if !clean {
                continue;
            }
            let bad = (t + 1..n).find(|&i| (t + 1..n).any(|j| !(w.get(i, j) % &p).is_zero()));
            match bad {
                Some(i) => row_add(&mut w, &mut u, t, i, &BigInt::from(1)),
                None => break,
            }
        }
        if w.get(t, t).is_negative() {
            w.negate_row(t);
            u.negate_col(t);
        }
    }
    Ok(SnfDecomposition { u, s: w, v, v_inv })
}

fn pivot(w: &IntegerMatrix, t: usize) -> Option<(usize, usize)> {
    let n = w.dim();
    let mut best: Option<(BigInt, usize, usize)> = None;
    for i in t..n {
        for j in t..n {
            let a = w.get(i, j).abs();
            if a.is_zero() {
                continue;
            }
            if best.as_ref().is_none_or(|(b, _, _)| a < *b) {
                best = Some((a, i, j));
            }
        }
    }
    best.map(|(_, i, j)| (i, j))
}
