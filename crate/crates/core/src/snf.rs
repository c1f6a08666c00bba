//! Smith normal form over the integers, with the unimodular transform pair.
//!
//! The engine repeatedly moves a nonzero entry of minimal absolute value to
//! the pivot position, clears the pivot row and column by floor-division
//! steps (any leftover remainder is strictly smaller than the pivot, so
//! re-pivoting terminates), and then forces the pivot to divide the whole
//! remaining block by folding an offending row into the pivot row. That last
//! step makes the diagonal a divisibility chain by construction. Every
//! elementary operation is mirrored into accumulators seeded with the
//! identity, so `left * input * right = diagonal` holds exactly at all times
//! and the result carries a replayable certificate.

use crate::group::AbelianGroup;
use crate::matrix::IntMatrix;
use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SnfError {
    #[error("the minor-gcd oracle handles at most {limit}x{limit} matrices, got {rows}x{cols}")]
    OracleTooLarge {
        rows: usize,
        cols: usize,
        limit: usize,
    },
}

/// Smith normal form `D` of an input `A`, with unimodular `P`, `Q` such that
/// `P * A * Q = D`. The diagonal of `D` is nonnegative and each nonzero
/// entry divides the next; `factors` lists the nonzero diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnfResult {
    d: IntMatrix,
    p: IntMatrix,
    q: IntMatrix,
    factors: Vec<BigInt>,
}

impl SnfResult {
    pub fn d(&self) -> &IntMatrix {
        &self.d
    }

    pub fn p(&self) -> &IntMatrix {
        &self.p
    }

    pub fn q(&self) -> &IntMatrix {
        &self.q
    }

    /// Nonzero diagonal entries, in divisibility order. Ones included.
    pub fn factors(&self) -> &[BigInt] {
        &self.factors
    }

    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    /// Replays the certificate: both transforms unimodular and
    /// `P * A * Q = D` for the original input.
    pub fn verify_against(&self, input: &IntMatrix) -> bool {
        if !self.p.is_unimodular() || !self.q.is_unimodular() {
            return false;
        }
        match self.p.mul(input).and_then(|pa| pa.mul(&self.q)) {
            Ok(product) => product == self.d,
            Err(_) => false,
        }
    }
}

/// Position of a nonzero entry of minimal absolute value in the block with
/// both indices >= `t`, or None when the block is entirely zero.
fn min_abs_position(d: &IntMatrix, t: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut best_abs = BigInt::zero();
    for i in t..d.rows() {
        for j in t..d.cols() {
            let v = d.at(i, j);
            if v.is_zero() {
                continue;
            }
            let a = v.abs();
            if best.is_none() || a < best_abs {
                if a.is_one() {
                    return Some((i, j));
                }
                best = Some((i, j));
                best_abs = a;
            }
        }
    }
    best
}

/// First entry in the interior block (both indices > `t`) that the pivot
/// does not divide.
fn first_nondivisible(d: &IntMatrix, t: usize) -> Option<(usize, usize)> {
    let pivot = d.at(t, t);
    for i in t + 1..d.rows() {
        for j in t + 1..d.cols() {
            if !(d.at(i, j) % pivot).is_zero() {
                return Some((i, j));
            }
        }
    }
    None
}

pub fn smith_normal_form(a: &IntMatrix) -> SnfResult {
    let (m, n) = (a.rows(), a.cols());
    let mut d = a.clone();
    let mut p = IntMatrix::identity(m).expect("row count is positive");
    let mut q = IntMatrix::identity(n).expect("column count is positive");

    let mut t = 0;
    while t < m.min(n) {
        let Some((pi, pj)) = min_abs_position(&d, t) else {
            break;
        };
        if pi != t {
            d.swap_rows_mut(t, pi);
            p.swap_rows_mut(t, pi);
        }
        if pj != t {
            d.swap_cols_mut(t, pj);
            q.swap_cols_mut(t, pj);
        }
        if d.at(t, t).is_negative() {
            d.negate_row_mut(t);
            p.negate_row_mut(t);
        }

        // Clear column t below the pivot. A nonzero remainder is smaller
        // than the pivot, so restart pivot selection.
        let mut dirty = false;
        for i in t + 1..m {
            if d.at(i, t).is_zero() {
                continue;
            }
            let quotient = d.at(i, t).div_floor(d.at(t, t));
            if !quotient.is_zero() {
                let f = -quotient;
                d.add_row_mut(i, t, &f);
                p.add_row_mut(i, t, &f);
            }
            if !d.at(i, t).is_zero() {
                dirty = true;
            }
        }
        if dirty {
            continue;
        }

        // Clear row t right of the pivot. Column t below the pivot is
        // already zero, so these column ops only touch row t.
        for j in t + 1..n {
            if d.at(t, j).is_zero() {
                continue;
            }
            let quotient = d.at(t, j).div_floor(d.at(t, t));
            if !quotient.is_zero() {
                let f = -quotient;
                d.add_col_mut(j, t, &f);
                q.add_col_mut(j, t, &f);
            }
            if !d.at(t, j).is_zero() {
                dirty = true;
            }
        }
        if dirty {
            continue;
        }

        // Pivot row and column are clean. Make the pivot divide the whole
        // remaining block: folding an offending row into row t plants an
        // entry whose division step will shrink the pivot.
        if let Some((offender, _)) = first_nondivisible(&d, t) {
            let one = BigInt::one();
            d.add_row_mut(t, offender, &one);
            p.add_row_mut(t, offender, &one);
            continue;
        }
        t += 1;
    }

    let factors: Vec<BigInt> = d
        .diagonal()
        .into_iter()
        .take_while(|x| !x.is_zero())
        .collect();
    debug_assert!(factors.windows(2).all(|w| (&w[1] % &w[0]).is_zero()));
    debug_assert!(d.is_diagonal());

    SnfResult { d, p, q, factors }
}

/// Nonzero diagonal of the Smith form, in divisibility order.
pub fn invariant_factors(a: &IntMatrix) -> Vec<BigInt> {
    smith_normal_form(a).factors
}

pub fn rank(a: &IntMatrix) -> usize {
    smith_normal_form(a).rank()
}

/// Quotient of the integer lattice indexed by the columns by the span of
/// the rows: free rank `cols - rank`, torsion from the invariant factors
/// exceeding one. For the symmetric matrices this crate computes with, the
/// row/column convention makes no difference.
pub fn cokernel(a: &IntMatrix) -> AbelianGroup {
    let result = smith_normal_form(a);
    let free = a.cols() - result.rank();
    AbelianGroup::new(free, result.factors)
}

/// Invariant factors by an independent route: `d_i = g_i / g_(i-1)` where
/// `g_i` is the gcd of all i by i minors (`g_0 = 1`). Exponential in the
/// dimension, so capped at 8x8; used as a cross-check oracle for the engine.
pub fn snf_naive_oracle(a: &IntMatrix) -> Result<Vec<BigInt>, SnfError> {
    const LIMIT: usize = 8;
    if a.rows() > LIMIT || a.cols() > LIMIT {
        return Err(SnfError::OracleTooLarge {
            rows: a.rows(),
            cols: a.cols(),
            limit: LIMIT,
        });
    }
    let mut factors = Vec::new();
    let mut prev = BigInt::one();
    for size in 1..=a.rows().min(a.cols()) {
        let mut g = BigInt::zero();
        let mut row_pick: Vec<usize> = (0..size).collect();
        'rows: loop {
            let mut col_pick: Vec<usize> = (0..size).collect();
            loop {
                let minor = a
                    .select(&row_pick, &col_pick)
                    .expect("index sets in range")
                    .det()
                    .expect("square selection");
                g = g.gcd(&minor);
                // Every minor of this size is a multiple of the previous
                // gcd, so the running gcd can never drop below it.
                if g == prev {
                    break 'rows;
                }
                if !next_combination(&mut col_pick, a.cols()) {
                    break;
                }
            }
            if !next_combination(&mut row_pick, a.rows()) {
                break;
            }
        }
        if g.is_zero() {
            break;
        }
        factors.push(&g / &prev);
        prev = g;
    }
    Ok(factors)
}

/// Advances `pick` to the next k-subset of 0..n in lexicographic order.
fn next_combination(pick: &mut [usize], n: usize) -> bool {
    let k = pick.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if pick[i] < n - k + i {
            pick[i] += 1;
            for j in i + 1..k {
                pick[j] = pick[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
