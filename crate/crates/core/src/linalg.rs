//! Dense linear algebra helpers on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

/// Default relative rank tolerance.
pub const RANK_TOL: f64 = 1e-8;

/// Singular values in non-increasing order.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Threshold below which a singular value counts as zero:
/// `tol * max(sigma_max, 1)`.
pub fn rank_threshold(sigma_max: f64, tol: f64) -> f64 {
    tol * sigma_max.max(1.0)
}

pub fn rank_from_singular_values(s: &[f64], tol: f64) -> usize {
    let smax = s.first().copied().unwrap_or(0.0);
    let thr = rank_threshold(smax, tol);
    s.iter().filter(|&&v| v > thr).count()
}

/// Numerical rank with the scale-aware threshold.
pub fn numerical_rank(a: &DMatrix<f64>, tol: f64) -> usize {
    rank_from_singular_values(&singular_values(a), tol)
}

/// Full singular value decomposition `A = U S V^T` with square `U` (rows x rows)
/// and `V` (cols x cols), columns ordered by non-increasing singular value.
#[derive(Debug, Clone)]
pub struct FullSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

impl FullSvd {
    pub fn new(a: &DMatrix<f64>) -> Self {
        let (r, c) = a.shape();
        let k = r.max(c);
        // zero padding to a square matrix makes both factors full
        let mut padded = DMatrix::zeros(k, k);
        padded.view_mut((0, 0), (r, c)).copy_from(a);
        let svd = padded.svd(true, true);
        let u = svd.u.expect("u requested");
        let vt = svd.v_t.expect("v_t requested");
        let mut order: Vec<usize> = (0..k).collect();
        order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
        // padded singular vectors past the true sizes carry zero singular values;
        // the leading r rows of U and c columns of V span the original spaces
        let u_full = orthonormal_completion(
            &DMatrix::from_fn(r, k, |i, j| u[(i, order[j])]),
            r,
        );
        let v_full = orthonormal_completion(
            &DMatrix::from_fn(c, k, |i, j| vt[(order[j], i)]),
            c,
        );
        let s = order
            .iter()
            .map(|&i| svd.singular_values[i])
            .take(r.min(c))
            .collect();
        FullSvd { u: u_full, s, v: v_full }
    }

    pub fn rank(&self, tol: f64) -> usize {
        rank_from_singular_values(&self.s, tol)
    }
}

/// Given the top `dim` rows of a `dim x k` column set whose leading columns are
/// orthonormal (as produced by the padded SVD), returns a `dim x dim` orthonormal
/// basis: leading columns kept, remainder completed by Gram-Schmidt.
fn orthonormal_completion(cols: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(dim);
    let candidates = (0..cols.ncols())
        .map(|j| cols.column(j).into_owned())
        .chain((0..dim).map(|i| DVector::from_fn(dim, |r, _| if r == i { 1.0 } else { 0.0 })));
    for mut v in candidates {
        if basis.len() == dim {
            break;
        }
        for b in &basis {
            let d = b.dot(&v);
            v -= b * d;
        }
        for b in &basis {
            let d = b.dot(&v);
            v -= b * d;
        }
        let nrm = v.norm();
        if nrm > 1e-6 {
            basis.push(v / nrm);
        }
    }
    DMatrix::from_columns(&basis)
}

/// Minimum-norm least-squares solution of `A x = b` via SVD, singular values
/// below the rank threshold dropped.
pub fn lstsq(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64) -> DVector<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let thr = rank_threshold(smax, tol);
    svd.solve(b, thr).unwrap_or_else(|_| DVector::zeros(a.ncols()))
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_svd_factors_reconstruct() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 0.0, 1.0, 3.0, -1.0]);
        let f = FullSvd::new(&a);
        assert_eq!(f.u.shape(), (3, 3));
        assert_eq!(f.v.shape(), (2, 2));
        let mut s = DMatrix::zeros(3, 2);
        for (i, v) in f.s.iter().enumerate() {
            s[(i, i)] = *v;
        }
        let recon = &f.u * s * f.v.transpose();
        assert!((recon - a).amax() < 1e-12);
        assert!((f.u.transpose() * &f.u - DMatrix::identity(3, 3)).amax() < 1e-12);
        assert!(f.s[0] >= f.s[1]);
    }

    #[test]
    fn full_svd_of_rank_deficient_wide_matrix() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        let f = FullSvd::new(&a);
        assert_eq!(f.rank(RANK_TOL), 1);
        assert!((f.v.transpose() * &f.v - DMatrix::identity(4, 4)).amax() < 1e-12);
        // trailing left singular vector spans the left null space
        let u2 = f.u.column(1);
        assert!((a.transpose() * u2).amax() < 1e-12);
    }

    #[test]
    fn rank_conventions() {
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 2), RANK_TOL), 0);
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3), RANK_TOL), 3);
        let tiny = DMatrix::from_row_slice(2, 2, &[1e-10, 0.0, 0.0, 1e-10]);
        assert_eq!(numerical_rank(&tiny, RANK_TOL), 0);
    }

    #[test]
    fn lstsq_min_norm() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = lstsq(&a, &DVector::from_vec(vec![2.0]), RANK_TOL);
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
