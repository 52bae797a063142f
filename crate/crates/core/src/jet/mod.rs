//! 1-jets, the corank stratification and single-point singularity checks.

mod classify;
mod locate;
mod m1;
mod transversality;

pub use classify::{
    corank_bound_check, immersion_check, morse_record, morse_verdict, refine_min_singular_value,
    whitney_umbrella_verdict,
    CorankReport, ImmersionReport, MorseClass, MorseRecord,
};
pub use locate::{find_critical_points, find_singular_points, LocateOptions};
pub use m1::{build_m1, M1Result};
pub use transversality::{
    normal_map, sigma_transversality, sigma_transversality_with, stratum_transversality,
    CustomStratum, TransversalityVerdict,
};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::diff::SmoothMap;
use crate::error::{Error, Result};
use crate::linalg::numerical_rank;

/// Chart representation of `j^1 g(t)`: base point, value and Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet1 {
    pub base: Vec<f64>,
    pub value: Vec<f64>,
    pub jac: DMatrix<f64>,
}

impl Serialize for Jet1 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let rows: Vec<Vec<f64>> = (0..self.jac.nrows())
            .map(|i| self.jac.row(i).iter().copied().collect())
            .collect();
        let mut st = s.serialize_struct("Jet1", 3)?;
        st.serialize_field("base", &self.base)?;
        st.serialize_field("value", &self.value)?;
        st.serialize_field("jac", &rows)?;
        st.end()
    }
}

pub fn jet1(g: &SmoothMap, t: &[f64]) -> Result<Jet1> {
    let (value, jac) = g.value_and_jacobian(t)?;
    Ok(Jet1 {
        base: t.to_vec(),
        value,
        jac,
    })
}

/// Source and target dimensions `(n, l)` with `v = min(n, l)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Dimensions {
    pub n: usize,
    pub l: usize,
}

impl Dimensions {
    pub fn new(n: usize, l: usize) -> Result<Self> {
        if n == 0 || l == 0 {
            return Err(Error::BadDimension(format!("need n, l >= 1, got ({n}, {l})")));
        }
        Ok(Dimensions { n, l })
    }

    pub fn v(&self) -> usize {
        self.n.min(self.l)
    }
}

/// `min(n, l) - rank J`.
pub fn corank(j: &DMatrix<f64>, tol: f64) -> usize {
    j.nrows().min(j.ncols()) - numerical_rank(j, tol)
}

/// Codimension `(n - v + k)(l - v + k)` of the corank-`k` stratum.
pub fn sigma_codim(dims: Dimensions, k: usize) -> Result<usize> {
    let v = dims.v();
    if k < 1 || k > v {
        return Err(Error::BadK { k, v });
    }
    Ok((dims.n - v + k) * (dims.l - v + k))
}

/// Largest `k >= 0` with `(n - v + k)(l - v + k) <= n`.
pub fn max_corank_k0(dims: Dimensions) -> usize {
    let v = dims.v();
    (0..=v)
        .take_while(|&k| (dims.n - v + k) * (dims.l - v + k) <= dims.n)
        .last()
        .unwrap_or(0)
}
