use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::diff::{Dual, SmoothMap};
use crate::error::{Error, Result};

/// The representing `l x m` matrix of a linear map `R^m -> R^l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPerturbation(pub DMatrix<f64>);

impl LinearPerturbation {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("perturbation matrix"));
        }
        Ok(LinearPerturbation(matrix))
    }

    pub fn zeros(l: usize, m: usize) -> Self {
        LinearPerturbation(DMatrix::zeros(l, m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let l = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidSpec("ragged perturbation rows".into()));
        }
        Self::new(DMatrix::from_fn(l, m, |i, j| rows[i][j]))
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.0.nrows())
            .map(|i| self.0.row(i).iter().copied().collect())
            .collect()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.0.nrows())
            .map(|i| (0..self.0.ncols()).map(|j| self.0[(i, j)] * x[j]).sum())
            .collect()
    }
}

impl Serialize for LinearPerturbation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for LinearPerturbation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        LinearPerturbation::from_rows(&rows).map_err(serde::de::Error::custom)
    }
}

/// `F_pi = F + pi`, same domain as `F`.
pub fn perturb(f: &SmoothMap, pi: &LinearPerturbation) -> Result<SmoothMap> {
    let (l, m) = pi.shape();
    if l != f.codomain_dim() {
        return Err(Error::DimensionMismatch {
            context: "perturbation rows",
            expected: f.codomain_dim(),
            found: l,
        });
    }
    if m != f.domain_dim() {
        return Err(Error::DimensionMismatch {
            context: "perturbation columns",
            expected: f.domain_dim(),
            found: m,
        });
    }
    let inner = f.clone();
    let alpha = pi.0.clone();
    let guard = f.shared_guard();
    let map = SmoothMap::new(format!("{}+pi", f.label()), m, l, move |x| {
        let mut out = inner.eval_dual(x);
        for (i, oi) in out.iter_mut().enumerate() {
            for (j, xj) in x.iter().enumerate() {
                let a = alpha[(i, j)];
                if a != 0.0 {
                    *oi += xj * a;
                }
            }
        }
        out
    })?;
    Ok(map.with_shared_guard(guard))
}

/// `F ∘ chart`; the composite is guarded by both domains.
pub fn compose(f: &SmoothMap, chart: &SmoothMap) -> Result<SmoothMap> {
    if chart.codomain_dim() != f.domain_dim() {
        return Err(Error::DimensionMismatch {
            context: "composition",
            expected: f.domain_dim(),
            found: chart.codomain_dim(),
        });
    }
    let outer = f.clone();
    let inner = chart.clone();
    let map = SmoothMap::new(
        format!("{}∘{}", f.label(), chart.label()),
        chart.domain_dim(),
        f.codomain_dim(),
        {
            let outer = outer.clone();
            let inner = inner.clone();
            move |t: &[Dual]| outer.eval_dual(&inner.eval_dual(t))
        },
    )?;
    if outer.shared_guard().is_none() && inner.shared_guard().is_none() {
        return Ok(map);
    }
    Ok(map.with_guard(move |t| {
        inner.contains(t)
            && inner
                .evaluate(t)
                .map(|y| outer.contains(&y))
                .unwrap_or(false)
    }))
}

/// Verifies that `chart` maps every sample into the domain of `f`.
pub fn check_image_in_domain<'a>(
    f: &SmoothMap,
    chart: &SmoothMap,
    samples: impl IntoIterator<Item = &'a [f64]>,
) -> Result<()> {
    for t in samples {
        let y = chart.evaluate(t)?;
        if !f.contains(&y) {
            return Err(Error::DomainViolation {
                map: f.label().to_string(),
                point: y,
            });
        }
    }
    Ok(())
}
