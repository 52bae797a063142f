//! The parameter-derivative matrix of the 1-jet extension of `F_α ∘ f`.
//!
//! Writing `Γ(t, α) = (t, g(t), ∂g/∂t(t))` for `g = F_α ∘ f̃` in a chart, the
//! columns of `JΓ` with respect to `α` do not depend on `F` or `α`: the value
//! rows see `f̃(t)` and the derivative rows see `ᵗ(Jf̃)`. Bordered by an
//! identity block they form `M₁`, of full row rank exactly when `f̃` is an
//! immersion at `t`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::diff::SmoothMap;
use crate::error::{Error, Result};
use crate::linalg::{numerical_rank, RANK_TOL};
use crate::zoo::{compose, perturb, LinearPerturbation};

#[derive(Debug, Clone, Serialize)]
pub struct M1Result {
    #[serde(skip)]
    pub matrix: DMatrix<f64>,
    pub rank: usize,
    /// `n + l + n l`
    pub expected: usize,
    /// Largest difference between the `α` columns of `M₁` and central
    /// differences of `Γ` in `α`.
    pub gamma_column_error: f64,
}

impl M1Result {
    pub fn full_rank(&self) -> bool {
        self.rank == self.expected
    }
}

/// `Γ(t, α)` flattened as `(t, g(t), rows of Jg(t))`.
fn gamma(f_chart: &SmoothMap, big_f: &SmoothMap, t: &[f64], alpha: &LinearPerturbation) -> Result<Vec<f64>> {
    let g = compose(&perturb(big_f, alpha)?, f_chart)?;
    let (value, jac) = g.value_and_jacobian(t)?;
    let mut out = t.to_vec();
    out.extend(value);
    for i in 0..jac.nrows() {
        out.extend(jac.row(i).iter());
    }
    Ok(out)
}

pub fn build_m1(
    f_chart: &SmoothMap,
    big_f: &SmoothMap,
    t: &[f64],
    alpha: &LinearPerturbation,
) -> Result<M1Result> {
    let n = f_chart.domain_dim();
    let m = f_chart.codomain_dim();
    let l = big_f.codomain_dim();
    if big_f.domain_dim() != m {
        return Err(Error::DimensionMismatch {
            context: "M1 composition",
            expected: m,
            found: big_f.domain_dim(),
        });
    }
    let (ft, jf) = f_chart.value_and_jacobian(t)?;
    if numerical_rank(&jf, RANK_TOL) < n {
        return Err(Error::NotImmersionAt { t: t.to_vec() });
    }

    let rows = n + l + n * l;
    let mut m1 = DMatrix::zeros(rows, n + l + m * l);
    for d in 0..n + l {
        m1[(d, d)] = 1.0;
    }
    for i in 0..l {
        for j in 0..m {
            let col = n + l + i * m + j;
            m1[(n + i, col)] = ft[j];
            for k in 0..n {
                m1[(n + l + i * n + k, col)] = jf[(j, k)];
            }
        }
    }

    // Γ is affine in α, so central differences reproduce its α-columns up to rounding
    let h = 1e-3;
    let mut err: f64 = 0.0;
    for i in 0..l {
        for j in 0..m {
            let mut plus = alpha.clone();
            let mut minus = alpha.clone();
            plus.0[(i, j)] += h;
            minus.0[(i, j)] -= h;
            let gp = gamma(f_chart, big_f, t, &plus)?;
            let gm = gamma(f_chart, big_f, t, &minus)?;
            let col = n + l + i * m + j;
            for r in 0..rows {
                let fd = (gp[r] - gm[r]) / (2.0 * h);
                err = err.max((fd - m1[(r, col)]).abs());
            }
        }
    }

    Ok(M1Result {
        rank: numerical_rank(&m1, RANK_TOL),
        expected: rows,
        matrix: m1,
        gamma_column_error: err,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Dual;
    use crate::zoo::{chart_atlas, ManifoldKind};

    fn quadratic(m: usize, l: usize) -> SmoothMap {
        SmoothMap::new("q", m, l, move |x: &[Dual]| {
            (0..l)
                .map(|i| {
                    let mut acc = Dual::constant(0.0);
                    for (j, xj) in x.iter().enumerate() {
                        acc += xj.square() * (1.0 + (i + j) as f64 * 0.5);
                    }
                    acc
                })
                .collect()
        })
        .unwrap()
    }

    #[test]
    fn circle_chart_at_zero() {
        let c = chart_atlas(&ManifoldKind::Circle { m: 2 }).unwrap();
        let alpha = LinearPerturbation::from_rows(&[vec![0.3, -0.7]]).unwrap();
        let r = build_m1(&c.charts[0].map, &quadratic(2, 1), &[0.0], &alpha).unwrap();
        assert_eq!((r.rank, r.expected), (3, 3));
        assert_eq!(r.matrix.shape(), (3, 4));
        assert!(r.gamma_column_error < 1e-8);
    }

    #[test]
    fn sphere_chart_rank_eleven() {
        let s = chart_atlas(&ManifoldKind::Sphere2 { m: 3 }).unwrap();
        let alpha = LinearPerturbation::from_rows(&[
            vec![1.0, 0.2, -0.4],
            vec![0.0, 0.5, 0.9],
            vec![-1.1, 0.3, 0.1],
        ])
        .unwrap();
        let r = build_m1(&s.charts[1].map, &quadratic(3, 3), &[0.4, -0.3], &alpha).unwrap();
        assert_eq!((r.rank, r.expected), (11, 11));
        assert!(r.gamma_column_error < 1e-7);
    }

    #[test]
    fn degenerate_chart_rejected() {
        let fold = SmoothMap::new("t^2", 1, 2, |t: &[Dual]| vec![t[0].square(), t[0].powi(3)]).unwrap();
        let alpha = LinearPerturbation::zeros(1, 2);
        assert!(matches!(
            build_m1(&fold, &quadratic(2, 1), &[0.0], &alpha),
            Err(Error::NotImmersionAt { .. })
        ));
    }
}
