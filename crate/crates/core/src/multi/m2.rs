//! The parameter-derivative matrix of `(F_α ∘ f)^(s)` along `α`.
//!
//! Block row `i` is `[E_l | diag(b_i, .., b_i)]` with `b_i = f̃(t_i)` as a row.
//! Subtracting the first block row from the others leaves
//! `diag(b_i - b_1, ..)`, so the rank is `l + l * rank(b_2 - b_1, .., b_s - b_1)`
//! and equals `l s` exactly when the difference vectors are independent. The
//! matrix does not involve `α` or `F`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dist, numerical_rank, RANK_TOL};

#[derive(Debug, Clone, Serialize)]
pub struct M2Result {
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    /// Rank after subtracting the first block row.
    pub reduced_rank: usize,
    /// Rank of the `s - 1` difference vectors.
    pub difference_rank: usize,
    /// `l s`
    pub expected: usize,
}

impl M2Result {
    pub fn full_rank(&self) -> bool {
        self.rank == self.expected
    }
}

/// `values` holds `f̃(t_1), .., f̃(t_s)` in `R^m`; `l` is the target dimension.
pub fn build_m2(values: &[Vec<f64>], l: usize) -> Result<M2Result> {
    let s = values.len();
    if s < 2 {
        return Err(Error::TooFewPoints { need: 2, got: s });
    }
    if l == 0 {
        return Err(Error::BadDimension("l must be positive".into()));
    }
    let m = values[0].len();
    if let Some(v) = values.iter().find(|v| v.len() != m) {
        return Err(Error::DimensionMismatch {
            context: "M2 values",
            expected: m,
            found: v.len(),
        });
    }
    for i in 0..s {
        for j in (i + 1)..s {
            if dist(&values[i], &values[j]) == 0.0 {
                return Err(Error::DegenerateTuple(i, j));
            }
        }
    }

    let mut m2 = DMatrix::zeros(l * s, l + m * l);
    for (i, b) in values.iter().enumerate() {
        for c in 0..l {
            let row = i * l + c;
            m2[(row, c)] = 1.0;
            for (j, bj) in b.iter().enumerate() {
                m2[(row, l + c * m + j)] = *bj;
            }
        }
    }
    let mut reduced = m2.clone();
    for row in l..l * s {
        let base = m2.row(row % l).into_owned();
        reduced.row_mut(row).copy_from(&(m2.row(row) - base));
    }
    let diffs = DMatrix::from_fn(m, s - 1, |r, c| values[c + 1][r] - values[0][r]);
    Ok(M2Result {
        rank: numerical_rank(&m2, RANK_TOL),
        reduced_rank: numerical_rank(&reduced, RANK_TOL),
        difference_rank: numerical_rank(&diffs, RANK_TOL),
        expected: l * s,
        matrix: m2,
    })
}
