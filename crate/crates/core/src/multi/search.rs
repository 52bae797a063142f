//! Heuristic search for multiple points: grid seeding by near-coincident image
//! pairs, Gauss-Newton on the image differences, clustering of the solutions.

use std::io::Write;

use nalgebra::DMatrix;
use serde::Serialize;

use super::{delta_transversality_with, MultiPoint};
use crate::error::{Error, Result};
use crate::jet::TransversalityVerdict;
use crate::linalg::{dist, singular_values};
use crate::newton::{solve, NewtonOptions};
use crate::zoo::{ChartPoint, ChartedMap};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SearchBudget {
    /// Grid density per axis; `None` uses the manifold's own.
    pub grid_density: Option<usize>,
    /// Maximum number of seed tuples passed to Gauss-Newton.
    pub pair_seeds: usize,
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    /// Seed pairs must be at least this many grid steps apart on `N`.
    pub min_separation_steps: f64,
    /// Seed pairs must have images within this many local grid scales.
    pub image_window: f64,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            grid_density: None,
            pair_seeds: 200,
            newton_tol: 1e-10,
            max_newton_iters: 50,
            min_separation_steps: 3.0,
            image_window: 2.0,
        }
    }
}

impl SearchBudget {
    fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.newton_tol,
            max_iter: self.max_newton_iters,
        }
    }

    /// Clustering radius: ten times the Newton tolerance.
    pub fn dedupe_radius(&self) -> f64 {
        10.0 * self.newton_tol
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MultiSearch {
    pub points: Vec<MultiPoint>,
    /// More seed tuples qualified than the budget allowed.
    pub budget_exhausted: bool,
    pub seeds_tried: usize,
    /// Smallest image distance among seed-eligible sample pairs.
    pub min_sample_gap: f64,
}

struct Sample {
    p: ChartPoint,
    y: Vec<f64>,
    /// Largest singular value of the chart Jacobian, the local image scale.
    speed: f64,
}

fn lex_cmp(a: &ChartPoint, b: &ChartPoint) -> std::cmp::Ordering {
    a.chart.cmp(&b.chart).then_with(|| {
        a.t.iter()
            .zip(&b.t)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

/// Gauss-Newton on `(g(q1) - g(q2), .., g(q1) - g(qs))` with charts fixed.
fn polish(g: &ChartedMap, seed: &[ChartPoint], opts: NewtonOptions) -> Option<(Vec<ChartPoint>, f64)> {
    let n = g.n();
    let l = g.l();
    let s = seed.len();
    let charts: Vec<usize> = seed.iter().map(|p| p.chart).collect();
    let system = |x: &[f64]| -> Result<(Vec<f64>, DMatrix<f64>)> {
        let mut vals = Vec::with_capacity(s);
        let mut jacs = Vec::with_capacity(s);
        for (i, &c) in charts.iter().enumerate() {
            let p = ChartPoint { chart: c, t: x[i * n..(i + 1) * n].to_vec() };
            if !g.manifold.contains(&p) {
                return Err(Error::DomainViolation {
                    map: format!("chart {c}"),
                    point: p.t,
                });
            }
            let (v, j) = g.pieces[c].value_and_jacobian(&p.t)?;
            vals.push(v);
            jacs.push(j);
        }
        let mut r = Vec::with_capacity(l * (s - 1));
        let mut jm = DMatrix::zeros(l * (s - 1), n * s);
        for i in 1..s {
            r.extend(vals[0].iter().zip(&vals[i]).map(|(a, b)| a - b));
            jm.view_mut((l * (i - 1), 0), (l, n)).copy_from(&jacs[0]);
            jm.view_mut((l * (i - 1), n * i), (l, n)).copy_from(&(-&jacs[i]));
        }
        Ok((r, jm))
    };
    let x0: Vec<f64> = seed.iter().flat_map(|p| p.t.iter().copied()).collect();
    let out = solve(system, &x0, opts)?;
    if !out.converged {
        return None;
    }
    let pts = charts
        .iter()
        .enumerate()
        .map(|(i, &c)| ChartPoint { chart: c, t: out.x[i * n..(i + 1) * n].to_vec() })
        .collect();
    Some((pts, out.residual))
}

fn same_tuple(g: &ChartedMap, a: &MultiPoint, b: &MultiPoint, radius: f64) -> bool {
    a.s == b.s
        && a.points
            .iter()
            .all(|p| b.points.iter().any(|q| g.manifold.same_point(p, q, radius)))
}

/// Multiple points of order `s` with images coinciding to `tol`.
pub fn find_multiple_points(g: &ChartedMap, s: usize, budget: &SearchBudget, tol: f64) -> Result<MultiSearch> {
    if s < 2 {
        return Err(Error::TooFewPoints { need: 2, got: s });
    }
    let manifold = &g.manifold;
    let density = budget.grid_density.unwrap_or(manifold.sample_density);
    let step = manifold.grid_step(density);
    let mut samples = Vec::new();
    for p in manifold.samples_at(density) {
        let (y, jac) = g.piece(&p).value_and_jacobian(&p.t)?;
        let speed = singular_values(&jac)[0];
        samples.push(Sample { p, y, speed });
    }

    let min_sep = budget.min_separation_steps * step;
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    let mut min_gap = f64::INFINITY;
    for i in 0..samples.len() {
        for j in (i + 1)..samples.len() {
            let (a, b) = (&samples[i], &samples[j]);
            if manifold.separation(&a.p, &b.p) < min_sep {
                continue;
            }
            let d = dist(&a.y, &b.y);
            min_gap = min_gap.min(d);
            let scale = 0.5 * (a.speed + b.speed) * step * (g.n() as f64).sqrt();
            if d <= budget.image_window * scale.max(f64::MIN_POSITIVE) {
                candidates.push((d, i, j));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let budget_exhausted = candidates.len() > budget.pair_seeds;
    candidates.truncate(budget.pair_seeds);

    let radius = budget.dedupe_radius();
    let mut pairs: Vec<Vec<ChartPoint>> = Vec::new();
    for &(_, i, j) in &candidates {
        let seed = [samples[i].p.clone(), samples[j].p.clone()];
        if let Some((pts, res)) = polish(g, &seed, budget.newton()) {
            if res < tol && manifold.separation(&pts[0], &pts[1]) >= step {
                let mut pts = pts;
                pts.sort_by(lex_cmp);
                pairs.push(pts);
            }
        }
    }
    pairs.sort_by(|a, b| lex_cmp(&a[0], &b[0]).then_with(|| lex_cmp(&a[1], &b[1])));

    let mut found: Vec<MultiPoint> = Vec::new();
    if s == 2 {
        for pts in pairs {
            if let Ok(mp) = MultiPoint::new(manifold, pts, radius) {
                if !found.iter().any(|f| same_tuple(g, f, &mp, radius)) {
                    found.push(mp);
                }
            }
        }
    } else {
        // points of N taking part in double points, grouped by common image
        let mut pool: Vec<ChartPoint> = Vec::new();
        for p in pairs.into_iter().flatten() {
            if !pool.iter().any(|q| manifold.same_point(q, &p, radius)) {
                pool.push(p);
            }
        }
        pool.sort_by(lex_cmp);
        let images = pool.iter().map(|p| g.evaluate(p)).collect::<Result<Vec<_>>>()?;
        let mut used = vec![false; pool.len()];
        for i in 0..pool.len() {
            if used[i] {
                continue;
            }
            let group: Vec<usize> = (i..pool.len())
                .filter(|&j| !used[j] && dist(&images[i], &images[j]) < tol.max(1e3 * radius))
                .collect();
            for &j in &group {
                used[j] = true;
            }
            if group.len() < s {
                continue;
            }
            use itertools::Itertools;
            for combo in group.iter().copied().combinations(s) {
                let seed: Vec<ChartPoint> = combo.iter().map(|&k| pool[k].clone()).collect();
                if let Some((pts, res)) = polish(g, &seed, budget.newton()) {
                    if res < tol {
                        if let Ok(mp) = MultiPoint::new(manifold, pts, radius) {
                            if !found.iter().any(|f| same_tuple(g, f, &mp, radius)) {
                                found.push(mp);
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(MultiSearch {
        points: found,
        budget_exhausted,
        seeds_tried: candidates.len(),
        min_sample_gap: min_gap,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct NormalCrossingsReport {
    pub is_normal_crossings_at_found_points: bool,
    pub per_point: Vec<(MultiPoint, TransversalityVerdict)>,
    pub min_margin: Option<f64>,
    pub budget_exhausted: bool,
}

/// Delta transversality at every multiple point found for `s = 2..=s_max`.
pub fn normal_crossings_verdict(
    g: &ChartedMap,
    s_max: usize,
    budget: &SearchBudget,
    tol: f64,
    margin_tol: f64,
) -> Result<NormalCrossingsReport> {
    if s_max < 2 {
        return Err(Error::TooFewPoints { need: 2, got: s_max });
    }
    let mut per_point = Vec::new();
    let mut exhausted = false;
    for s in 2..=s_max {
        let search = find_multiple_points(g, s, budget, tol)?;
        exhausted |= search.budget_exhausted;
        for mp in search.points {
            let v = delta_transversality_with(g, &mp, tol, margin_tol)?;
            per_point.push((mp, v));
        }
    }
    let ok = per_point.iter().all(|(_, v)| v.transverse);
    let min_margin = per_point
        .iter()
        .filter(|(_, v)| v.on_stratum)
        .map(|(_, v)| v.margin)
        .reduce(f64::min);
    Ok(NormalCrossingsReport {
        is_normal_crossings_at_found_points: ok,
        per_point,
        min_margin,
        budget_exhausted: exhausted,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct InjectivityReport {
    pub is_injective_at_resolution: bool,
    /// Smallest image distance seen: the residual of a found double point, or
    /// the smallest gap between well-separated samples.
    pub min_image_gap: f64,
    pub witness: Option<MultiPoint>,
    pub budget_exhausted: bool,
}

pub fn injectivity_check(g: &ChartedMap, budget: &SearchBudget, tol: f64) -> Result<InjectivityReport> {
    let search = find_multiple_points(g, 2, budget, tol)?;
    let witness = search.points.first().cloned();
    let gap = match &witness {
        Some(mp) => dist(&g.evaluate(&mp.points[0])?, &g.evaluate(&mp.points[1])?),
        None => search.min_sample_gap,
    };
    Ok(InjectivityReport {
        is_injective_at_resolution: witness.is_none(),
        min_image_gap: gap,
        witness,
        budget_exhausted: search.budget_exhausted,
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.12e}")).collect::<Vec<_>>().join(" ")
}

/// One CSV row per point of each tuple: tuple index, point index, chart id,
/// parameters, image coordinates and the tuple's margin.
pub fn write_witness_csv<W: Write>(
    out: W,
    g: &ChartedMap,
    tuples: &[(MultiPoint, Option<f64>)],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["tuple", "point", "chart", "params", "image", "margin"])?;
    for (k, (mp, margin)) in tuples.iter().enumerate() {
        for (i, p) in mp.points.iter().enumerate() {
            let y = g.evaluate(p)?;
            w.write_record([
                k.to_string(),
                i.to_string(),
                p.chart.to_string(),
                join(&p.t),
                join(&y),
                margin.map(|m| format!("{m:.12e}")).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::{Dual, SmoothMap};
    use crate::zoo::{chart_atlas, compose, make_gdsm, GdsmSpec, ManifoldKind};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn curve(kind: ManifoldKind) -> ChartedMap {
        ChartedMap::from_manifold(Arc::new(chart_atlas(&kind).unwrap()))
    }

    fn tangency() -> ChartedMap {
        // both branches through the origin at t = -1 and t = 1 with horizontal tangents
        let m = SmoothMap::new("tangency", 1, 2, |t: &[Dual]| {
            let u = &t[0].square() - 1.0;
            vec![u.clone(), &u.square() * &t[0]]
        })
        .unwrap();
        ChartedMap::on_box(m, vec![-2.0], vec![2.0], 200).unwrap()
    }

    #[test]
    fn nodal_cubic_has_one_double_point() {
        let g = curve(ManifoldKind::NodalCubic { m: 2 });
        let found = find_multiple_points(&g, 2, &SearchBudget::default(), 1e-8).unwrap();
        assert_eq!(found.points.len(), 1);
        let mp = &found.points[0];
        assert!((mp.points[0].t[0] + 1.0).abs() < 1e-9);
        assert!((mp.points[1].t[0] - 1.0).abs() < 1e-9);
        let rep = injectivity_check(&g, &SearchBudget::default(), 1e-8).unwrap();
        assert!(!rep.is_injective_at_resolution);
        assert!(rep.min_image_gap < 1e-8);
    }

    #[test]
    fn circle_is_injective() {
        let g = curve(ManifoldKind::Circle { m: 2 });
        assert!(find_multiple_points(&g, 2, &SearchBudget::default(), 1e-8).unwrap().points.is_empty());
        let g3 = curve(ManifoldKind::Circle { m: 3 });
        let rep = injectivity_check(&g3, &SearchBudget::default(), 1e-8).unwrap();
        assert!(rep.is_injective_at_resolution);
        assert!(rep.min_image_gap > 0.1);
    }

    #[test]
    fn distance_on_circle_pairs_are_mirror_images() {
        // level sets of |x - p|^2 on the circle pair theta with 2 arg(p) - theta
        let p = [0.6, 0.3];
        let d = make_gdsm(&GdsmSpec::distance_squared(vec![p.to_vec()])).unwrap();
        let circle = Arc::new(chart_atlas(&ManifoldKind::Circle { m: 2 }).unwrap());
        let g = ChartedMap::compose(&d, circle.clone()).unwrap();
        let found = find_multiple_points(&g, 2, &SearchBudget::default(), 1e-8).unwrap();
        assert!(!found.points.is_empty());
        let axis = 2.0 * p[1].atan2(p[0]);
        for mp in &found.points {
            let th: Vec<f64> = mp
                .points
                .iter()
                .map(|q| {
                    let y = circle.embed(q).unwrap();
                    y[1].atan2(y[0])
                })
                .collect();
            let defect = (th[0] + th[1] - axis).rem_euclid(2.0 * PI);
            assert!(defect.min(2.0 * PI - defect) < 1e-7, "pair {th:?}");
        }
    }

    #[test]
    fn normal_crossings_node_and_tangency() {
        let g = curve(ManifoldKind::NodalCubic { m: 2 });
        let rep = normal_crossings_verdict(&g, 2, &SearchBudget::default(), 1e-8, 1e-6).unwrap();
        assert!(rep.is_normal_crossings_at_found_points);
        assert!(rep.min_margin.unwrap() > 0.5);

        let t = tangency();
        let found = find_multiple_points(&t, 2, &SearchBudget::default(), 1e-8).unwrap();
        assert!(!found.points.is_empty());
        let rep = normal_crossings_verdict(&t, 2, &SearchBudget::default(), 1e-8, 1e-6).unwrap();
        assert!(!rep.is_normal_crossings_at_found_points);

        let c = curve(ManifoldKind::Circle { m: 2 });
        let rep = normal_crossings_verdict(&c, 3, &SearchBudget::default(), 1e-8, 1e-6).unwrap();
        assert!(rep.is_normal_crossings_at_found_points && rep.per_point.is_empty());
    }

    #[test]
    fn triple_point_of_three_petal_curve() {
        // r = cos(3 theta) passes through the origin three times
        let rose = SmoothMap::new("rose", 1, 2, |t: &[Dual]| {
            let r = (&t[0] * 3.0).cos();
            vec![&r * &t[0].cos(), &r * &t[0].sin()]
        })
        .unwrap();
        let g = ChartedMap::on_box(rose, vec![0.1], vec![PI - 0.1], 300).unwrap();
        let found = find_multiple_points(&g, 3, &SearchBudget::default(), 1e-8).unwrap();
        assert_eq!(found.points.len(), 1);
        let mut ts: Vec<f64> = found.points[0].points.iter().map(|p| p.t[0]).collect();
        ts.sort_by(f64::total_cmp);
        for (t, e) in ts.iter().zip([PI / 6.0, PI / 2.0, 5.0 * PI / 6.0]) {
            assert!((t - e).abs() < 1e-8);
        }
    }

    #[test]
    fn target_translation_leaves_verdict_unchanged() {
        let g = curve(ManifoldKind::NodalCubic { m: 2 });
        let shift = SmoothMap::new("shift", 2, 2, |x: &[Dual]| vec![&x[0] + 3.7, &x[1] - 1.9]).unwrap();
        let moved = ChartedMap {
            manifold: g.manifold.clone(),
            pieces: vec![compose(&shift, &g.pieces[0]).unwrap()],
        };
        let a = normal_crossings_verdict(&g, 2, &SearchBudget::default(), 1e-8, 1e-6).unwrap();
        let b = normal_crossings_verdict(&moved, 2, &SearchBudget::default(), 1e-8, 1e-6).unwrap();
        assert_eq!(a.is_normal_crossings_at_found_points, b.is_normal_crossings_at_found_points);
        assert_eq!(a.per_point.len(), b.per_point.len());
    }

    #[test]
    fn witness_csv_rows() {
        let g = curve(ManifoldKind::NodalCubic { m: 2 });
        let found = find_multiple_points(&g, 2, &SearchBudget::default(), 1e-8).unwrap();
        let tuples: Vec<_> = found.points.into_iter().map(|mp| (mp, Some(2.5))).collect();
        let mut buf = Vec::new();
        write_witness_csv(&mut buf, &g, &tuples).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "tuple,point,chart,params,image,margin");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0,0,-1.0"));
    }
}
