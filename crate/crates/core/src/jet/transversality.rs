use nalgebra::DMatrix;
use serde::Serialize;

use super::{sigma_codim, Dimensions, Jet1};
use crate::diff::{HessianTensor, SmoothMap};
use crate::error::Result;
use crate::linalg::{singular_values, FullSvd, RANK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransversalityVerdict {
    pub on_stratum: bool,
    pub corank: usize,
    /// Smallest singular value of the normal map; only computed on the stratum.
    pub margin: f64,
    pub transverse: bool,
    pub codim: usize,
}

/// Rank of `J` and the map `u -> U2^T (D_u J) V2` flattened to a
/// `((l - r)(n - r)) x n` matrix, `U2`, `V2` spanning the left and right kernels.
///
/// Its image is the projection of the jet derivative onto the normal space of
/// the rank-`r` matrices at `J`.
pub fn normal_map(jac: &DMatrix<f64>, hess: &HessianTensor, rank_tol: f64) -> (usize, DMatrix<f64>) {
    let (l, n) = jac.shape();
    let svd = FullSvd::new(jac);
    let r = svd.rank(rank_tol);
    let u2 = svd.u.columns(r, l - r).into_owned();
    let v2 = svd.v.columns(r, n - r).into_owned();
    let rows = (l - r) * (n - r);
    let mut out = DMatrix::zeros(rows, n);
    for k in 0..n {
        let block = u2.transpose() * hess.jacobian_derivative(k) * &v2;
        for (idx, val) in block.iter().enumerate() {
            out[(idx, k)] = *val;
        }
    }
    (r, out)
}

/// Margin of a normal map of the given codimension: its `codim`-th singular
/// value, zero when surjectivity is impossible.
fn surjectivity_margin(normal: &DMatrix<f64>, codim: usize) -> f64 {
    if codim == 0 {
        return f64::INFINITY;
    }
    if codim > normal.ncols() {
        return 0.0;
    }
    singular_values(normal)[codim - 1]
}

/// Whether `j^1 g` meets the corank-`k` stratum at `t`, and if so transversally.
pub fn sigma_transversality(g: &SmoothMap, t: &[f64], k: usize, tol: f64) -> Result<TransversalityVerdict> {
    sigma_transversality_with(g, t, k, tol, RANK_TOL)
}

pub fn sigma_transversality_with(
    g: &SmoothMap,
    t: &[f64],
    k: usize,
    tol: f64,
    rank_tol: f64,
) -> Result<TransversalityVerdict> {
    let dims = Dimensions::new(g.domain_dim(), g.codomain_dim())?;
    let codim = sigma_codim(dims, k)?;
    let (_, jac, hess) = g.second_order(t)?;
    let (r, normal) = normal_map(&jac, &hess, rank_tol);
    let corank = dims.v() - r;
    if corank != k {
        return Ok(TransversalityVerdict {
            on_stratum: false,
            corank,
            margin: 0.0,
            transverse: true,
            codim,
        });
    }
    let margin = surjectivity_margin(&normal, codim);
    Ok(TransversalityVerdict {
        on_stratum: true,
        corank,
        margin,
        transverse: margin > tol,
        codim,
    })
}

type Membership = dyn Fn(&Jet1) -> bool + Send + Sync;
type NormalFn = dyn Fn(&Jet1, &HessianTensor) -> DMatrix<f64> + Send + Sync;

/// A user-described invariant subset of jet space: membership test plus the
/// derivative of the jet extension projected onto its normal space.
pub struct CustomStratum {
    pub codim: usize,
    pub membership: Box<Membership>,
    pub normal: Box<NormalFn>,
}

pub fn stratum_transversality(
    g: &SmoothMap,
    t: &[f64],
    stratum: &CustomStratum,
    tol: f64,
) -> Result<TransversalityVerdict> {
    let (value, jac, hess) = g.second_order(t)?;
    let jet = Jet1 {
        base: t.to_vec(),
        value,
        jac,
    };
    let corank = super::corank(&jet.jac, RANK_TOL);
    if !(stratum.membership)(&jet) {
        return Ok(TransversalityVerdict {
            on_stratum: false,
            corank,
            margin: 0.0,
            transverse: true,
            codim: stratum.codim,
        });
    }
    let margin = surjectivity_margin(&(stratum.normal)(&jet, &hess), stratum.codim);
    Ok(TransversalityVerdict {
        on_stratum: true,
        corank,
        margin,
        transverse: margin > tol,
        codim: stratum.codim,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Dual;
    use crate::linalg::numerical_rank;
    use crate::zoo::{normal_form, NormalForm};
    use proptest::prelude::*;

    #[test]
    fn fold_is_transverse_with_margin_two() {
        let fold = normal_form(NormalForm::Fold { n: 1 }).unwrap();
        let v = sigma_transversality(&fold, &[0.0], 1, 1e-6).unwrap();
        assert!(v.on_stratum && v.transverse);
        assert!((v.margin - 2.0).abs() < 1e-12);
        assert_eq!(v.codim, 1);
    }

    #[test]
    fn cubic_is_not_transverse() {
        let cubic = SmoothMap::new("t^3", 1, 1, |t: &[Dual]| vec![t[0].powi(3)]).unwrap();
        let v = sigma_transversality(&cubic, &[0.0], 1, 1e-6).unwrap();
        assert!(v.on_stratum && !v.transverse);
        assert_eq!(v.margin, 0.0);
    }

    #[test]
    fn umbrella_origin_normal_map() {
        let w = normal_form(NormalForm::WhitneyUmbrella { n: 2 }).unwrap();
        let v = sigma_transversality(&w, &[0.0, 0.0], 1, 1e-6).unwrap();
        assert!(v.on_stratum && v.transverse);
        assert_eq!((v.corank, v.codim), (1, 2));
        // normal map is diag(2, 1) up to orthogonal factors
        assert!((v.margin - 1.0).abs() < 1e-12);
        let off = sigma_transversality(&w, &[0.5, 0.0], 1, 1e-6).unwrap();
        assert!(!off.on_stratum && off.transverse);
    }

    #[test]
    fn codim_larger_than_source_cannot_be_transverse() {
        // constant map R^2 -> R^2 lies in corank 2, codim 4 > 2
        let c = crate::diff::constant(2, vec![1.0, 1.0]).unwrap();
        let v = sigma_transversality(&c, &[0.1, 0.2], 2, 1e-6).unwrap();
        assert!(v.on_stratum && !v.transverse);
        assert_eq!(v.codim, 4);
    }

    #[test]
    fn custom_stratum_reproduces_sigma_one() {
        let w = normal_form(NormalForm::WhitneyUmbrella { n: 2 }).unwrap();
        let stratum = CustomStratum {
            codim: 2,
            membership: Box::new(|j: &Jet1| super::super::corank(&j.jac, RANK_TOL) == 1),
            normal: Box::new(|j: &Jet1, h: &HessianTensor| normal_map(&j.jac, h, RANK_TOL).1),
        };
        let a = stratum_transversality(&w, &[0.0, 0.0], &stratum, 1e-6).unwrap();
        let b = sigma_transversality(&w, &[0.0, 0.0], 1, 1e-6).unwrap();
        assert_eq!(a, b);
    }

    /// Dimension of the tangent space to the rank-`r` matrices at `j`, spanned
    /// by the velocities `E_ab j` and `j E_cd` of the left-right action.
    fn orbit_tangent_dim(j: &DMatrix<f64>) -> usize {
        let (l, n) = j.shape();
        let mut cols = Vec::new();
        for a in 0..l {
            for b in 0..l {
                let mut e = DMatrix::zeros(l, l);
                e[(a, b)] = 1.0;
                cols.push(&e * j);
            }
        }
        for c in 0..n {
            for d in 0..n {
                let mut e = DMatrix::zeros(n, n);
                e[(c, d)] = 1.0;
                cols.push(j * &e);
            }
        }
        let m = DMatrix::from_fn(l * n, cols.len(), |row, col| cols[col][(row / n, row % n)]);
        numerical_rank(&m, 1e-10)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn codim_matches_measured_normal_dimension(
            n in 1usize..5,
            l in 1usize..5,
            k_frac in 0.0f64..1.0,
            raw in proptest::collection::vec(-1.0f64..1.0, 40),
        ) {
            let dims = Dimensions::new(n, l).unwrap();
            let v = dims.v();
            let k = 1 + ((v as f64 * k_frac) as usize).min(v - 1);
            let r = v - k;
            let a = DMatrix::from_fn(l, r, |i, j| raw[(i * 4 + j) % 40] + if i == j { 5.0 } else { 0.0 });
            let b = DMatrix::from_fn(r, n, |i, j| raw[(17 + i * 4 + j) % 40] + if i == j { 5.0 } else { 0.0 });
            let j = &a * &b;
            prop_assert_eq!(numerical_rank(&j, RANK_TOL), r);
            let measured = n * l - orbit_tangent_dim(&j);
            prop_assert_eq!(measured, sigma_codim(dims, k).unwrap());
            prop_assert_eq!(measured, (l - r) * (n - r));
        }
    }
}
