//! Multiple points: the diagonal condition, double-point search, normal
//! crossings, the `s_f` invariant, fiber counts and the `M₂` oracle.

mod fibers;
mod m2;
mod search;
mod sf;

pub use fibers::{fiber_cardinality, FiberOptions, FiberResult};
pub use m2::{build_m2, M2Result};
pub use search::{
    find_multiple_points, injectivity_check, normal_crossings_verdict, write_witness_csv,
    InjectivityReport, MultiSearch, NormalCrossingsReport, SearchBudget,
};
pub use sf::{compute_sf, estimate_sf, SfBudget, SfProfile, SfWitness};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::TransversalityVerdict;
use crate::linalg::{dist, numerical_rank, singular_values, RANK_TOL};
use crate::zoo::{ChartPoint, ChartedManifold, ChartedMap};

/// An `s`-tuple of pairwise distinct points of `N`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiPoint {
    pub s: usize,
    pub points: Vec<ChartPoint>,
    pub distinct: bool,
}

impl MultiPoint {
    /// Validates that no two points are closer than `radius` on `N`.
    pub fn new(manifold: &ChartedManifold, points: Vec<ChartPoint>, radius: f64) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::TooFewPoints {
                need: 2,
                got: points.len(),
            });
        }
        for i in 0..points.len() {
            for j in (i + 1)..points.len() {
                if manifold.same_point(&points[i], &points[j], radius) {
                    return Err(Error::DegenerateTuple(i, j));
                }
            }
        }
        Ok(MultiPoint {
            s: points.len(),
            points,
            distinct: true,
        })
    }
}

/// Stacked `l(s-1) x ns` matrix with block row `i` equal to
/// `[dg_{q1} | 0 .. | -dg_{qi} | 0 ..]`.
pub fn stacked_difference_matrix(g: &ChartedMap, mp: &MultiPoint) -> Result<DMatrix<f64>> {
    let (n, l, s) = (g.n(), g.l(), mp.s);
    let jacs = mp
        .points
        .iter()
        .map(|p| g.piece(p).jacobian(&p.t))
        .collect::<Result<Vec<_>>>()?;
    let mut out = DMatrix::zeros(l * (s - 1), n * s);
    for i in 1..s {
        out.view_mut((l * (i - 1), 0), (l, n)).copy_from(&jacs[0]);
        out.view_mut((l * (i - 1), n * i), (l, n)).copy_from(&(-&jacs[i]));
    }
    Ok(out)
}

/// Transversality of `g^(s)` to the diagonal at `mp`, with the same tolerance
/// for image coincidence and for the margin.
pub fn delta_transversality(g: &ChartedMap, mp: &MultiPoint, tol: f64) -> Result<TransversalityVerdict> {
    delta_transversality_with(g, mp, tol, tol)
}

pub fn delta_transversality_with(
    g: &ChartedMap,
    mp: &MultiPoint,
    coincidence_tol: f64,
    margin_tol: f64,
) -> Result<TransversalityVerdict> {
    let images = mp
        .points
        .iter()
        .map(|p| g.evaluate(p))
        .collect::<Result<Vec<_>>>()?;
    let spread = images
        .iter()
        .flat_map(|a| images.iter().map(move |b| dist(a, b)))
        .fold(0.0, f64::max);
    let codim = g.l() * (mp.s - 1);
    let stacked = stacked_difference_matrix(g, mp)?;
    let deficiency = codim - numerical_rank(&stacked, RANK_TOL);
    if spread >= coincidence_tol {
        return Ok(TransversalityVerdict {
            on_stratum: false,
            corank: deficiency,
            margin: 0.0,
            transverse: true,
            codim,
        });
    }
    let margin = if codim > stacked.ncols() {
        0.0
    } else {
        singular_values(&stacked)[codim - 1]
    };
    Ok(TransversalityVerdict {
        on_stratum: true,
        corank: deficiency,
        margin,
        transverse: margin > margin_tol,
        codim,
    })
}
