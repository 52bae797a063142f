//! Generalized distance-squared mappings
//! `G_(p,A)(x) = (sum_j a_ij (x_j - p_ij)^2)_i` and the reparametrization of
//! central points as linear perturbations.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::perturb::LinearPerturbation;
use crate::diff::{Dual, SmoothMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GdsmVariant {
    General,
    DistanceSquared,
    Lorentzian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdsmSpec {
    /// Central point, one row `p_i ∈ R^m` per component.
    pub p: Vec<Vec<f64>>,
    /// Coefficient matrix `A`, `l x m`.
    pub a: Vec<Vec<f64>>,
    pub variant: GdsmVariant,
}

impl GdsmSpec {
    pub fn distance_squared(p: Vec<Vec<f64>>) -> Self {
        let a = p.iter().map(|row| vec![1.0; row.len()]).collect();
        GdsmSpec {
            p,
            a,
            variant: GdsmVariant::DistanceSquared,
        }
    }

    pub fn lorentzian(p: Vec<Vec<f64>>) -> Self {
        let a = p
            .iter()
            .map(|row| {
                (0..row.len())
                    .map(|j| if j == 0 { -1.0 } else { 1.0 })
                    .collect()
            })
            .collect();
        GdsmSpec {
            p,
            a,
            variant: GdsmVariant::Lorentzian,
        }
    }

    pub fn general(p: Vec<Vec<f64>>, a: Vec<Vec<f64>>) -> Self {
        GdsmSpec {
            p,
            a,
            variant: GdsmVariant::General,
        }
    }

    /// `l x m` of the coefficient matrix.
    pub fn shape(&self) -> (usize, usize) {
        (self.a.len(), self.a.first().map_or(0, Vec::len))
    }

    pub fn validate(&self) -> Result<()> {
        let (l, m) = self.shape();
        if l == 0 || m == 0 {
            return Err(Error::InvalidSpec("empty coefficient matrix".into()));
        }
        if self.a.iter().any(|r| r.len() != m) || self.p.len() != l || self.p.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidSpec(format!(
                "central point and coefficients must both be {l}x{m}"
            )));
        }
        if self.p.iter().flatten().chain(self.a.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gdsm spec"));
        }
        for (i, row) in self.a.iter().enumerate() {
            for (j, &aij) in row.iter().enumerate() {
                let expected = match self.variant {
                    GdsmVariant::General => None,
                    GdsmVariant::DistanceSquared => Some(1.0),
                    GdsmVariant::Lorentzian => Some(if j == 0 { -1.0 } else { 1.0 }),
                };
                match expected {
                    None if aij == 0.0 => {
                        return Err(Error::InvalidSpec(format!("a[{i}][{j}] = 0")));
                    }
                    Some(e) if aij != e => {
                        return Err(Error::InvalidSpec(format!(
                            "a[{i}][{j}] = {aij}, variant {:?} requires {e}",
                            self.variant
                        )));
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }
}

/// Builds `G_(p,A): R^m -> R^l`.
pub fn make_gdsm(spec: &GdsmSpec) -> Result<SmoothMap> {
    spec.validate()?;
    let (l, m) = spec.shape();
    let p = spec.p.clone();
    let a = spec.a.clone();
    let label = match spec.variant {
        GdsmVariant::General => "gdsm",
        GdsmVariant::DistanceSquared => "distance_squared",
        GdsmVariant::Lorentzian => "lorentzian",
    };
    SmoothMap::new(label, m, l, move |x: &[Dual]| {
        (0..l)
            .map(|i| {
                let mut acc = Dual::constant(0.0);
                for j in 0..m {
                    acc += (&x[j] - p[i][j]).square() * a[i][j];
                }
                acc
            })
            .collect()
    })
}

/// `psi(p)_ij = -2 a_ij p_ij`: the linear part of `G_(p,A)` after the target
/// translation that removes constant terms.
pub fn psi_central_to_linear(spec: &GdsmSpec) -> Result<LinearPerturbation> {
    spec.validate()?;
    let (l, m) = spec.shape();
    LinearPerturbation::new(DMatrix::from_fn(l, m, |i, j| -2.0 * spec.a[i][j] * spec.p[i][j]))
}

/// Inverse of [`psi_central_to_linear`] for fixed `A`: returns the central point.
pub fn psi_linear_to_central(a: &[Vec<f64>], alpha: &LinearPerturbation) -> Result<Vec<Vec<f64>>> {
    let (l, m) = alpha.shape();
    if a.len() != l || a.iter().any(|r| r.len() != m) {
        return Err(Error::InvalidSpec(format!("coefficients must be {l}x{m}")));
    }
    let mut p = vec![vec![0.0; m]; l];
    for i in 0..l {
        for j in 0..m {
            if a[i][j] == 0.0 {
                return Err(Error::InvalidSpec(format!(
                    "a[{i}][{j}] = 0 makes psi non-invertible"
                )));
            }
            p[i][j] = alpha.0[(i, j)] / (-2.0 * a[i][j]);
        }
    }
    Ok(p)
}
