//! Counting preimages `F^{-1}(y)` inside a box by Newton from a seed grid.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::diff::SmoothMap;
use crate::error::{Error, Result};
use crate::linalg::dist;
use crate::newton::{solve, NewtonOptions};
use crate::zoo::Chart;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct FiberOptions {
    /// Seeds per axis of the box.
    pub seeds_per_axis: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
}

impl Default for FiberOptions {
    fn default() -> Self {
        FiberOptions {
            seeds_per_axis: 8,
            newton_tol: 1e-10,
            max_newton_iters: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FiberResult {
    /// Distinct solutions found; a lower bound for the true count.
    pub count: usize,
    pub points: Vec<Vec<f64>>,
    pub converged_runs: usize,
}

/// Solutions of `F(x) = y` in the open box `[lo, hi]`, clustered with radius
/// `tol`.
pub fn fiber_cardinality(
    big_f: &SmoothMap,
    y: &[f64],
    lo: &[f64],
    hi: &[f64],
    tol: f64,
    opts: &FiberOptions,
) -> Result<FiberResult> {
    let m = big_f.domain_dim();
    if y.len() != big_f.codomain_dim() {
        return Err(Error::DimensionMismatch {
            context: "fiber target",
            expected: big_f.codomain_dim(),
            found: y.len(),
        });
    }
    if lo.len() != m || hi.len() != m {
        return Err(Error::DimensionMismatch {
            context: "fiber box",
            expected: m,
            found: lo.len(),
        });
    }
    if opts.seeds_per_axis == 0 {
        return Err(Error::BudgetExhausted("no fiber seeds".into()));
    }
    let region = Chart {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        map: big_f.clone(),
    };
    let newton = NewtonOptions {
        tol: opts.newton_tol,
        max_iter: opts.max_newton_iters,
    };
    let mut points: Vec<Vec<f64>> = Vec::new();
    let mut converged = 0;
    for seed in region.grid(opts.seeds_per_axis) {
        let system = |x: &[f64]| -> Result<(Vec<f64>, DMatrix<f64>)> {
            let (v, j) = big_f.value_and_jacobian(x)?;
            Ok((v.iter().zip(y).map(|(a, b)| a - b).collect(), j))
        };
        let Some(out) = solve(system, &seed, newton) else {
            continue;
        };
        if !out.converged || !region.contains(&out.x) {
            continue;
        }
        converged += 1;
        if !points.iter().any(|p| dist(p, &out.x) < tol) {
            points.push(out.x);
        }
    }
    points.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(FiberResult {
        count: points.len(),
        points,
        converged_runs: converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{make_gdsm, GdsmSpec};

    #[test]
    fn one_dimensional_distance() {
        let d = make_gdsm(&GdsmSpec::distance_squared(vec![vec![0.0]])).unwrap();
        let opts = FiberOptions::default();
        let r = fiber_cardinality(&d, &[4.0], &[-5.0], &[5.0], 1e-6, &opts).unwrap();
        assert_eq!(r.count, 2);
        assert!((r.points[0][0] + 2.0).abs() < 1e-12 && (r.points[1][0] - 2.0).abs() < 1e-12);
        let r = fiber_cardinality(&d, &[-1.0], &[-5.0], &[5.0], 1e-6, &opts).unwrap();
        assert_eq!(r.count, 0);
    }

    #[test]
    fn planar_distance_matches_circle_intersections() {
        // |x - p1|^2 = y1 and |x - p2|^2 = y2 meet in 0, 1 or 2 points
        let p1 = [0.3, -0.2];
        let p2 = [-0.8, 0.9];
        let d = make_gdsm(&GdsmSpec::distance_squared(vec![p1.to_vec(), p2.to_vec()])).unwrap();
        let sep = ((p1[0] - p2[0]).powi(2) + (p1[1] - p2[1]).powi(2)).sqrt();
        let opts = FiberOptions::default();
        for (r1, r2) in [(1.0f64, 1.0f64), (0.5, 0.6), (2.0, 0.4), (1.2, 0.9), (0.1, 3.0)] {
            let expected = if (r1 - r2).abs() < sep && sep < r1 + r2 { 2 } else { 0 };
            let r = fiber_cardinality(&d, &[r1 * r1, r2 * r2], &[-6.0, -6.0], &[6.0, 6.0], 1e-6, &opts).unwrap();
            assert_eq!(r.count, expected, "radii ({r1}, {r2})");
        }
    }
}
