//! Dense integer matrices with arbitrary-precision entries.
//!
//! All public operations are immutable: they return fresh matrices and leave
//! their inputs untouched. Determinants are computed fraction-free (Bareiss),
//! so every intermediate value stays an exact integer.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatrixError {
    #[error("matrix needs at least one row and one column")]
    Empty,
    #[error("row {row} has {got} entries, expected {want}")]
    Ragged { row: usize, got: usize, want: usize },
    #[error("index ({i}, {j}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        i: usize,
        j: usize,
        rows: usize,
        cols: usize,
    },
    #[error("cannot multiply {lr}x{lc} by {rr}x{rc}")]
    DimensionMismatch {
        lr: usize,
        lc: usize,
        rr: usize,
        rc: usize,
    },
    #[error("operation requires a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("add-multiple factor must be nonzero")]
    ZeroFactor,
    #[error("add-multiple source and target must differ")]
    EqualIndices,
    #[error("deleting row {i}, column {j} would leave an empty matrix")]
    WouldBeEmpty { i: usize, j: usize },
    #[error("matrix text: {0}")]
    Parse(String),
}

/// A single unimodular move. Interpreted as a row operation by
/// [`IntMatrix::row_op`] and as a column operation by [`IntMatrix::col_op`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ElementaryOp {
    /// target += factor * source. Determinant-preserving.
    AddMultiple {
        target: usize,
        source: usize,
        factor: BigInt,
    },
    /// Exchange two rows/columns. Flips the determinant sign.
    Swap { a: usize, b: usize },
    /// Multiply one row/column by -1. Flips the determinant sign.
    Negate { index: usize },
}

/// Row-major integer matrix. Always at least 1x1.
#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<BigInt>,
}

impl IntMatrix {
    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Result<Self, MatrixError> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(MatrixError::Empty);
        }
        let cols = rows[0].len();
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(MatrixError::Ragged {
                    row: i,
                    got: r.len(),
                    want: cols,
                });
            }
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    /// Convenience constructor for literal matrices.
    pub fn from_i64_rows(rows: &[Vec<i64>]) -> Result<Self, MatrixError> {
        Self::from_rows(
            rows.iter()
                .map(|r| r.iter().map(|&x| BigInt::from(x)).collect())
                .collect(),
        )
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> BigInt,
    ) -> Result<Self, MatrixError> {
        if rows == 0 || cols == 0 {
            return Err(MatrixError::Empty);
        }
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self, MatrixError> {
        Self::from_fn(rows, cols, |_, _| BigInt::zero())
    }

    pub fn identity(n: usize) -> Result<Self, MatrixError> {
        Self::from_fn(n, n, |i, j| {
            if i == j {
                BigInt::one()
            } else {
                BigInt::zero()
            }
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Panics if out of range, like slice indexing. Use [`IntMatrix::get`]
    /// for checked access.
    pub fn at(&self, i: usize, j: usize) -> &BigInt {
        assert!(
            i < self.rows && j < self.cols,
            "index ({i}, {j}) out of range for {}x{}",
            self.rows,
            self.cols
        );
        &self.entries[i * self.cols + j]
    }

    pub fn get(&self, i: usize, j: usize) -> Option<&BigInt> {
        (i < self.rows && j < self.cols).then(|| &self.entries[i * self.cols + j])
    }

    pub(crate) fn set(&mut self, i: usize, j: usize, v: BigInt) {
        let c = self.cols;
        self.entries[i * c + j] = v;
    }

    fn check_index(&self, idx: usize, bound: usize) -> Result<(), MatrixError> {
        if idx < bound {
            Ok(())
        } else {
            Err(MatrixError::IndexOutOfRange {
                i: idx,
                j: idx,
                rows: self.rows,
                cols: self.cols,
            })
        }
    }

    fn validate_op(&self, op: &ElementaryOp, bound: usize) -> Result<(), MatrixError> {
        match op {
            ElementaryOp::AddMultiple {
                target,
                source,
                factor,
            } => {
                self.check_index(*target, bound)?;
                self.check_index(*source, bound)?;
                if factor.is_zero() {
                    return Err(MatrixError::ZeroFactor);
                }
                if target == source {
                    return Err(MatrixError::EqualIndices);
                }
                Ok(())
            }
            ElementaryOp::Swap { a, b } => {
                self.check_index(*a, bound)?;
                self.check_index(*b, bound)
            }
            ElementaryOp::Negate { index } => self.check_index(*index, bound),
        }
    }

    pub fn row_op(&self, op: &ElementaryOp) -> Result<Self, MatrixError> {
        self.validate_op(op, self.rows)?;
        let mut out = self.clone();
        match op {
            ElementaryOp::AddMultiple {
                target,
                source,
                factor,
            } => out.add_row_mut(*target, *source, factor),
            ElementaryOp::Swap { a, b } => out.swap_rows_mut(*a, *b),
            ElementaryOp::Negate { index } => out.negate_row_mut(*index),
        }
        Ok(out)
    }

    pub fn col_op(&self, op: &ElementaryOp) -> Result<Self, MatrixError> {
        self.validate_op(op, self.cols)?;
        let mut out = self.clone();
        match op {
            ElementaryOp::AddMultiple {
                target,
                source,
                factor,
            } => out.add_col_mut(*target, *source, factor),
            ElementaryOp::Swap { a, b } => out.swap_cols_mut(*a, *b),
            ElementaryOp::Negate { index } => out.negate_col_mut(*index),
        }
        Ok(out)
    }

    pub(crate) fn swap_rows_mut(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.entries.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub(crate) fn swap_cols_mut(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.entries.swap(i * self.cols + a, i * self.cols + b);
        }
    }

    pub(crate) fn add_row_mut(&mut self, target: usize, source: usize, factor: &BigInt) {
        for j in 0..self.cols {
            let add = &self.entries[source * self.cols + j] * factor;
            self.entries[target * self.cols + j] += add;
        }
    }

    pub(crate) fn add_col_mut(&mut self, target: usize, source: usize, factor: &BigInt) {
        for i in 0..self.rows {
            let add = &self.entries[i * self.cols + source] * factor;
            self.entries[i * self.cols + target] += add;
        }
    }

    pub(crate) fn negate_row_mut(&mut self, r: usize) {
        for j in 0..self.cols {
            let idx = r * self.cols + j;
            let v = std::mem::take(&mut self.entries[idx]);
            self.entries[idx] = -v;
        }
    }

    pub(crate) fn negate_col_mut(&mut self, c: usize) {
        for i in 0..self.rows {
            let idx = i * self.cols + c;
            let v = std::mem::take(&mut self.entries[idx]);
            self.entries[idx] = -v;
        }
    }

    pub fn mul(&self, rhs: &Self) -> Result<Self, MatrixError> {
        if self.cols != rhs.rows {
            return Err(MatrixError::DimensionMismatch {
                lr: self.rows,
                lc: self.cols,
                rr: rhs.rows,
                rc: rhs.cols,
            });
        }
        Self::from_fn(self.rows, rhs.cols, |i, j| {
            let mut acc = BigInt::zero();
            for t in 0..self.cols {
                if !self.entries[i * self.cols + t].is_zero() {
                    acc += &self.entries[i * self.cols + t] * &rhs.entries[t * rhs.cols + j];
                }
            }
            acc
        })
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.at(j, i).clone())
            .expect("transpose of a nonempty matrix is nonempty")
    }

    /// Exact determinant by fraction-free Gaussian elimination (Bareiss).
    /// Every division in the recurrence is exact over the integers.
    pub fn det(&self) -> Result<BigInt, MatrixError> {
        if !self.is_square() {
            return Err(MatrixError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let mut m: Vec<BigInt> = self.entries.clone();
        let idx = |i: usize, j: usize| i * n + j;
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n.saturating_sub(1) {
            if m[idx(k, k)].is_zero() {
                let swap = (k + 1..n).find(|&i| !m[idx(i, k)].is_zero());
                match swap {
                    Some(i) => {
                        for j in 0..n {
                            m.swap(idx(k, j), idx(i, j));
                        }
                        sign = -sign;
                    }
                    None => return Ok(BigInt::zero()),
                }
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let num = &m[idx(i, j)] * &m[idx(k, k)] - &m[idx(i, k)] * &m[idx(k, j)];
                    m[idx(i, j)] = num / &prev;
                }
            }
            prev = m[idx(k, k)].clone();
        }
        Ok(sign * m[idx(n - 1, n - 1)].clone())
    }

    pub fn is_unimodular(&self) -> bool {
        self.is_square() && self.det().map(|d| d.abs().is_one()).unwrap_or(false)
    }

    pub fn delete_row_col(&self, i: usize, j: usize) -> Result<Self, MatrixError> {
        if i >= self.rows || j >= self.cols {
            return Err(MatrixError::IndexOutOfRange {
                i,
                j,
                rows: self.rows,
                cols: self.cols,
            });
        }
        if self.rows == 1 || self.cols == 1 {
            return Err(MatrixError::WouldBeEmpty { i, j });
        }
        Self::from_fn(self.rows - 1, self.cols - 1, |r, c| {
            let sr = if r < i { r } else { r + 1 };
            let sc = if c < j { c } else { c + 1 };
            self.at(sr, sc).clone()
        })
    }

    /// Keep only the listed rows and columns, in the order given.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Result<Self, MatrixError> {
        for &r in rows {
            self.check_index(r, self.rows)?;
        }
        for &c in cols {
            self.check_index(c, self.cols)?;
        }
        if rows.is_empty() || cols.is_empty() {
            return Err(MatrixError::Empty);
        }
        Self::from_fn(rows.len(), cols.len(), |i, j| {
            self.at(rows[i], cols[j]).clone()
        })
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.rows).all(|i| (0..self.cols).all(|j| i == j || self.at(i, j).is_zero()))
    }

    pub fn diagonal(&self) -> Vec<BigInt> {
        (0..self.rows.min(self.cols))
            .map(|i| self.at(i, i).clone())
            .collect()
    }

    /// Text form: a `rows cols` header line, then one whitespace-separated
    /// line per row. Round-trips bit-exactly through [`IntMatrix::from_text`].
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows, self.cols);
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.at(i, j).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn from_text(s: &str) -> Result<Self, MatrixError> {
        let mut tokens = s.split_whitespace();
        let rows: usize = tokens
            .next()
            .ok_or_else(|| MatrixError::Parse("missing row count".into()))?
            .parse()
            .map_err(|e| MatrixError::Parse(format!("bad row count: {e}")))?;
        let cols: usize = tokens
            .next()
            .ok_or_else(|| MatrixError::Parse("missing column count".into()))?
            .parse()
            .map_err(|e| MatrixError::Parse(format!("bad column count: {e}")))?;
        if rows == 0 || cols == 0 {
            return Err(MatrixError::Empty);
        }
        let mut entries = Vec::with_capacity(rows * cols);
        for t in tokens.by_ref() {
            if entries.len() == rows * cols {
                return Err(MatrixError::Parse("trailing entries after matrix".into()));
            }
            let v: BigInt = t
                .parse()
                .map_err(|e| MatrixError::Parse(format!("bad entry {t:?}: {e}")))?;
            entries.push(v);
        }
        if entries.len() != rows * cols {
            return Err(MatrixError::Parse(format!(
                "expected {} entries, found {}",
                rows * cols,
                entries.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            entries,
        })
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMatrix {}x{}", self.rows, self.cols)?;
        fmt::Display::fmt(self, f)
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let widths: Vec<usize> = (0..self.cols)
            .map(|j| {
                (0..self.rows)
                    .map(|i| self.at(i, j).to_string().len())
                    .max()
                    .unwrap_or(1)
            })
            .collect();
        for i in 0..self.rows {
            write!(f, "[")?;
            for (j, width) in widths.iter().enumerate() {
                if j > 0 {
                    write!(f, " ")?;
                }
                write!(f, "{:>width$}", self.at(i, j), width = width)?;
            }
            writeln!(f, "]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_i64_rows(rows).unwrap()
    }

    #[test]
    fn constructors_reject_bad_shapes() {
        assert_eq!(IntMatrix::from_rows(vec![]), Err(MatrixError::Empty));
        assert!(matches!(
            IntMatrix::from_i64_rows(&[vec![1, 2], vec![3]]),
            Err(MatrixError::Ragged {
                row: 1,
                got: 1,
                want: 2
            })
        ));
        assert_eq!(IntMatrix::zeros(0, 3), Err(MatrixError::Empty));
    }

    #[test]
    fn elementary_row_op_examples() {
        let a = m(&[vec![1, 0], vec![1, 1]]);
        let op = ElementaryOp::AddMultiple {
            target: 1,
            source: 0,
            factor: BigInt::from(-1),
        };
        assert_eq!(a.row_op(&op).unwrap(), m(&[vec![1, 0], vec![0, 1]]));

        let swapped = a.row_op(&ElementaryOp::Swap { a: 0, b: 1 }).unwrap();
        assert_eq!(swapped, m(&[vec![1, 1], vec![1, 0]]));

        let negated = a.row_op(&ElementaryOp::Negate { index: 0 }).unwrap();
        assert_eq!(negated, m(&[vec![-1, 0], vec![1, 1]]));
    }

    #[test]
    fn elementary_op_validation() {
        let a = m(&[vec![1, 0], vec![1, 1]]);
        assert_eq!(
            a.row_op(&ElementaryOp::AddMultiple {
                target: 0,
                source: 1,
                factor: BigInt::zero(),
            }),
            Err(MatrixError::ZeroFactor)
        );
        assert_eq!(
            a.row_op(&ElementaryOp::AddMultiple {
                target: 1,
                source: 1,
                factor: BigInt::one(),
            }),
            Err(MatrixError::EqualIndices)
        );
        assert!(a.row_op(&ElementaryOp::Negate { index: 2 }).is_err());
    }

    #[test]
    fn col_op_mirrors_row_op_on_transpose() {
        let a = m(&[vec![1, 2, 3], vec![4, 5, 6]]);
        let op = ElementaryOp::AddMultiple {
            target: 0,
            source: 2,
            factor: BigInt::from(7),
        };
        let lhs = a.col_op(&op).unwrap();
        let rhs = a.transpose().row_op(&op).unwrap().transpose();
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(m(&[vec![2, 0], vec![0, 3]]).det().unwrap(), BigInt::from(6));
        // Pascal-style matrix with unit determinant.
        let p = m(&[
            vec![1, 1, 1, 1],
            vec![1, 2, 3, 4],
            vec![1, 3, 6, 10],
            vec![1, 4, 10, 20],
        ]);
        assert_eq!(p.det().unwrap(), BigInt::one());
        let singular = m(&[vec![1, 2], vec![2, 4]]);
        assert_eq!(singular.det().unwrap(), BigInt::zero());
        assert!(m(&[vec![1, 2, 3]]).det().is_err());
    }

    #[test]
    fn unimodular_checks() {
        assert!(m(&[vec![2, 1], vec![1, 1]]).is_unimodular());
        assert!(!m(&[vec![2, 0], vec![0, 2]]).is_unimodular());
        assert!(!m(&[vec![1, 2, 3]]).is_unimodular());
    }

    #[test]
    fn delete_row_col_example() {
        let a = m(&[vec![1, 2], vec![3, 4]]);
        assert_eq!(a.delete_row_col(0, 1).unwrap(), m(&[vec![3]]));
        assert!(matches!(
            m(&[vec![5]]).delete_row_col(0, 0),
            Err(MatrixError::WouldBeEmpty { .. })
        ));
        assert!(a.delete_row_col(2, 0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let a = m(&[vec![1, -2], vec![30, 4]]);
        let text = a.to_text();
        assert_eq!(text, "2 2\n1 -2\n30 4\n");
        assert_eq!(IntMatrix::from_text(&text).unwrap(), a);
    }

    #[test]
    fn text_round_trip_huge_entries() {
        let big: BigInt = "123456789012345678901234567890123456789012345678901"
            .parse()
            .unwrap();
        let a = IntMatrix::from_rows(vec![
            vec![big.clone(), -&big],
            vec![&big * &big, BigInt::one()],
        ])
        .unwrap();
        assert_eq!(IntMatrix::from_text(&a.to_text()).unwrap(), a);
    }

    #[test]
    fn text_rejects_malformed_input() {
        assert!(IntMatrix::from_text("").is_err());
        assert!(IntMatrix::from_text("2").is_err());
        assert!(IntMatrix::from_text("2 2\n1 2 3 4 5").is_err());
        assert!(IntMatrix::from_text("2 2\n1 2 3").is_err());
        assert!(IntMatrix::from_text("1 1\nx").is_err());
        assert!(IntMatrix::from_text("0 2\n").is_err());
    }

    #[test]
    fn multiplication_shapes() {
        let a = m(&[vec![1, 2], vec![3, 4], vec![5, 6]]);
        let b = m(&[vec![1, 0, 1], vec![0, 1, 1]]);
        let ab = a.mul(&b).unwrap();
        assert_eq!(ab.rows(), 3);
        assert_eq!(ab.cols(), 3);
        assert_eq!(ab.at(2, 2), &BigInt::from(11));
        assert!(b.mul(&b).is_err());
    }

    #[test]
    fn identity_is_neutral() {
        let a = m(&[vec![3, 1, 4], vec![1, 5, 9]]);
        let i3 = IntMatrix::identity(3).unwrap();
        let i2 = IntMatrix::identity(2).unwrap();
        assert_eq!(a.mul(&i3).unwrap(), a);
        assert_eq!(i2.mul(&a).unwrap(), a);
    }

    #[test]
    fn select_keeps_requested_positions() {
        let a = m(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]);
        let s = a.select(&[0, 2], &[1, 2]).unwrap();
        assert_eq!(s, m(&[vec![2, 3], vec![8, 9]]));
    }
}
