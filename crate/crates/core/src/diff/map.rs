use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::dual::Dual;
use crate::error::{Error, Result};

type Body = dyn Fn(&[Dual]) -> Vec<Dual> + Send + Sync;
type Guard = dyn Fn(&[f64]) -> bool + Send + Sync;

/// A map `U ⊂ R^m -> R^l` evaluable on plain values and on first- and
/// second-order dual numbers.
///
/// The body is written once against [`Dual`]; value-only evaluation passes
/// constants, which carry no derivative storage. Immutable and cheap to clone.
#[derive(Clone)]
pub struct SmoothMap {
    domain_dim: usize,
    codomain_dim: usize,
    label: String,
    guard: Option<Arc<Guard>>,
    body: Arc<Body>,
}

impl fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothMap")
            .field("label", &self.label)
            .field("domain_dim", &self.domain_dim)
            .field("codomain_dim", &self.codomain_dim)
            .field("guarded", &self.guard.is_some())
            .finish()
    }
}

/// `l` symmetric `m x m` slices, slice `i` the Hessian of component `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct HessianTensor {
    pub slices: Vec<DMatrix<f64>>,
}

impl HessianTensor {
    /// `d/dt_k` of the Jacobian, an `l x m` matrix with entry (i, j) equal to
    /// `d^2 g_i / dt_j dt_k`.
    pub fn jacobian_derivative(&self, k: usize) -> DMatrix<f64> {
        let l = self.slices.len();
        let m = self.slices.first().map_or(0, |s| s.ncols());
        DMatrix::from_fn(l, m, |i, j| self.slices[i][(j, k)])
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.slices
            .iter()
            .map(|s| (s - s.transpose()).amax())
            .fold(0.0, f64::max)
    }
}

impl SmoothMap {
    /// Builds a map defined on all of `R^m`.
    pub fn new<F>(label: impl Into<String>, domain_dim: usize, codomain_dim: usize, body: F) -> Result<Self>
    where
        F: Fn(&[Dual]) -> Vec<Dual> + Send + Sync + 'static,
    {
        if domain_dim == 0 || codomain_dim == 0 {
            return Err(Error::BadDimension(format!(
                "maps need positive dimensions, got {domain_dim} -> {codomain_dim}"
            )));
        }
        Ok(SmoothMap {
            domain_dim,
            codomain_dim,
            label: label.into(),
            guard: None,
            body: Arc::new(body),
        })
    }

    /// Restricts the map to the open set where `guard` holds.
    pub fn with_guard<G>(mut self, guard: G) -> Self
    where
        G: Fn(&[f64]) -> bool + Send + Sync + 'static,
    {
        self.guard = Some(Arc::new(guard));
        self
    }

    pub(crate) fn with_shared_guard(mut self, guard: Option<Arc<Guard>>) -> Self {
        self.guard = guard;
        self
    }

    pub(crate) fn shared_guard(&self) -> Option<Arc<Guard>> {
        self.guard.clone()
    }

    pub fn domain_dim(&self) -> usize {
        self.domain_dim
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.domain_dim
            && x.iter().all(|v| v.is_finite())
            && self.guard.as_ref().is_none_or(|g| g(x))
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.domain_dim {
            return Err(Error::DimensionMismatch {
                context: "map argument",
                expected: self.domain_dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("map argument"));
        }
        if let Some(g) = &self.guard {
            if !g(x) {
                return Err(Error::DomainViolation {
                    map: self.label.clone(),
                    point: x.to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Unchecked dual evaluation, used by constructors that build on this map.
    pub(crate) fn eval_dual(&self, x: &[Dual]) -> Vec<Dual> {
        (self.body)(x)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let args: Vec<Dual> = x.iter().map(|&v| Dual::constant(v)).collect();
        Ok(self.eval_dual(&args).into_iter().map(|d| d.val).collect())
    }

    /// Value and Jacobian in one first-order pass.
    pub fn value_and_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        self.check(x)?;
        let m = self.domain_dim;
        let args: Vec<Dual> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::variable(v, i, m))
            .collect();
        let out = self.eval_dual(&args);
        let jac = DMatrix::from_fn(self.codomain_dim, m, |i, j| out[i].grad_at(j));
        Ok((out.into_iter().map(|d| d.val).collect(), jac))
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        self.value_and_jacobian(x).map(|(_, j)| j)
    }

    /// Value, Jacobian and Hessian tensor from a single second-order pass.
    pub fn second_order(&self, x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>, HessianTensor)> {
        self.check(x)?;
        let m = self.domain_dim;
        let args: Vec<Dual> = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Dual::variable2(v, i, m))
            .collect();
        let out = self.eval_dual(&args);
        let jac = DMatrix::from_fn(self.codomain_dim, m, |i, j| out[i].grad_at(j));
        let slices = out
            .iter()
            .map(|d| DMatrix::from_fn(m, m, |a, b| d.hess_at(a, b)))
            .collect();
        let value = out.iter().map(|d| d.val).collect();
        Ok((value, jac, HessianTensor { slices }))
    }

    pub fn hessian_tensor(&self, x: &[f64]) -> Result<HessianTensor> {
        self.second_order(x).map(|(_, _, h)| h)
    }
}

/// Identity map on `R^m`.
pub fn identity(m: usize) -> Result<SmoothMap> {
    SmoothMap::new(format!("identity({m})"), m, m, |x| x.to_vec())
}

/// Linear map `x -> A x`.
pub fn linear(a: DMatrix<f64>) -> Result<SmoothMap> {
    let (l, m) = a.shape();
    SmoothMap::new(format!("linear({l}x{m})"), m, l, move |x| {
        (0..l)
            .map(|i| {
                let mut acc = Dual::constant(0.0);
                for (j, xj) in x.iter().enumerate() {
                    if a[(i, j)] != 0.0 {
                        acc += xj * a[(i, j)];
                    }
                }
                acc
            })
            .collect()
    })
}

/// Constant map with value `c`.
pub fn constant(m: usize, c: Vec<f64>) -> Result<SmoothMap> {
    let l = c.len();
    SmoothMap::new(format!("constant({m}->{l})"), m, l, move |_| {
        c.iter().map(|&v| Dual::constant(v)).collect()
    })
}
