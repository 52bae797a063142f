//! Locating critical and singular points by Newton iteration from grid seeds.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::FullSvd;
use crate::newton::{solve, NewtonOptions};
use crate::zoo::{ChartPoint, ChartedManifold, ChartedMap};

#[derive(Debug, Clone, Copy)]
pub struct LocateOptions {
    pub newton: NewtonOptions,
    /// Number of Newton starts.
    pub seeds: usize,
    /// Solutions closer than this are merged.
    pub dedupe_radius: f64,
}

impl Default for LocateOptions {
    fn default() -> Self {
        LocateOptions {
            newton: NewtonOptions::default(),
            seeds: 64,
            dedupe_radius: 1e-6,
        }
    }
}

fn outside(p: &ChartPoint) -> Error {
    Error::DomainViolation {
        map: format!("chart {}", p.chart),
        point: p.t.clone(),
    }
}

/// Roughly `seeds` grid points spread evenly over the charts.
fn seed_grid(manifold: &ChartedManifold, seeds: usize) -> Vec<ChartPoint> {
    let per_chart = seeds.div_ceil(manifold.charts.len()).max(1);
    let density = (per_chart as f64).powf(1.0 / manifold.n as f64).ceil().max(1.0) as usize;
    manifold.samples_at(density)
}

fn push_distinct(found: &mut Vec<ChartPoint>, manifold: &ChartedManifold, p: ChartPoint, radius: f64) {
    if !found.iter().any(|q| manifold.same_point(q, &p, radius)) {
        found.push(p);
    }
}

/// Zeros of the gradient of a scalar `g`, by damped Newton on `grad g = 0`.
pub fn find_critical_points(g: &ChartedMap, opts: &LocateOptions) -> Result<Vec<ChartPoint>> {
    if g.l() != 1 {
        return Err(Error::BadDimensionPair {
            n: g.n(),
            l: g.l(),
            reason: "critical points are located for scalar functions only",
        });
    }
    let manifold = &g.manifold;
    let mut found = Vec::new();
    for seed in seed_grid(manifold, opts.seeds) {
        let chart = seed.chart;
        let system = |t: &[f64]| -> Result<(Vec<f64>, DMatrix<f64>)> {
            let p = ChartPoint { chart, t: t.to_vec() };
            if !manifold.contains(&p) {
                return Err(outside(&p));
            }
            let (_, jac, hess) = g.pieces[chart].second_order(t)?;
            Ok((jac.row(0).iter().copied().collect(), hess.slices[0].clone()))
        };
        if let Some(out) = solve(system, &seed.t, opts.newton) {
            if out.converged {
                push_distinct(&mut found, manifold, ChartPoint { chart, t: out.x }, opts.dedupe_radius);
            }
        }
    }
    Ok(found)
}

fn smallest_pair(jac: &DMatrix<f64>) -> (f64, Vec<f64>) {
    let svd = FullSvd::new(jac);
    let n = jac.ncols();
    let s = svd.s.get(n - 1).copied().unwrap_or(0.0);
    (s, svd.v.column(n - 1).iter().copied().collect())
}

/// Points where the Jacobian drops rank, found by Newton on
/// `(t, v) -> (J(t) v, (|v|^2 - 1) / 2)` from seeds at grid minima of the
/// smallest singular value.
pub fn find_singular_points(g: &ChartedMap, opts: &LocateOptions) -> Result<Vec<ChartPoint>> {
    let manifold = &g.manifold;
    let n = g.n();
    let density = manifold.sample_density;
    let mut candidates: Vec<(usize, f64, ChartPoint, Vec<f64>)> = Vec::new();
    for (c, chart) in manifold.charts.iter().enumerate() {
        let grid = chart.grid(density);
        let mut sv = Vec::with_capacity(grid.len());
        for t in &grid {
            sv.push(smallest_pair(&g.pieces[c].jacobian(t)?));
        }
        for (idx, t) in grid.iter().enumerate() {
            // axes along which this sample is a discrete local minimum
            let mut axes = 0;
            let mut stride = 1;
            for _ in 0..n {
                let k = (idx / stride) % density;
                let below = k > 0 && sv[idx - stride].0 < sv[idx].0;
                let above = k + 1 < density && sv[idx + stride].0 < sv[idx].0;
                if !below && !above {
                    axes += 1;
                }
                stride *= density;
            }
            if axes > 0 {
                candidates.push((n - axes, sv[idx].0, ChartPoint { chart: c, t: t.clone() }, sv[idx].1.clone()));
            }
        }
    }
    // full local minima first, then valley floors: an isolated zero of the
    // smallest singular value inside a valley narrower than the grid step need
    // not produce a grid minimum of its own
    candidates.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    candidates.truncate(opts.seeds);

    let mut found = Vec::new();
    for (_, _, seed, v0) in candidates {
        let chart = seed.chart;
        let system = |x: &[f64]| -> Result<(Vec<f64>, DMatrix<f64>)> {
            let (t, v) = x.split_at(n);
            let p = ChartPoint { chart, t: t.to_vec() };
            if !manifold.contains(&p) {
                return Err(outside(&p));
            }
            let (_, jac, hess) = g.pieces[chart].second_order(t)?;
            let l = jac.nrows();
            let mut r: Vec<f64> = (&jac * nalgebra::DVector::from_column_slice(v)).iter().copied().collect();
            r.push(0.5 * (v.iter().map(|a| a * a).sum::<f64>() - 1.0));
            let mut jm = DMatrix::zeros(l + 1, 2 * n);
            for k in 0..n {
                let dk = hess.jacobian_derivative(k);
                for i in 0..l {
                    jm[(i, k)] = (0..n).map(|j| dk[(i, j)] * v[j]).sum();
                }
            }
            jm.view_mut((0, n), (l, n)).copy_from(&jac);
            for j in 0..n {
                jm[(l, n + j)] = v[j];
            }
            Ok((r, jm))
        };
        let x0: Vec<f64> = seed.t.iter().chain(&v0).copied().collect();
        if let Some(out) = solve(system, &x0, opts.newton) {
            if out.converged {
                let p = ChartPoint { chart, t: out.x[..n].to_vec() };
                push_distinct(&mut found, manifold, p, opts.dedupe_radius);
            }
        }
    }
    Ok(found)
}
