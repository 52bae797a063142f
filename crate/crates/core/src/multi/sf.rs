//! The invariant `s_f`: the largest `s` such that every `s` distinct image
//! points are affinely independent (their difference vectors from the first
//! span an `(s-1)`-dimensional space).

use itertools::Itertools;
use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dist, numerical_rank, singular_values, RANK_TOL};
use crate::zoo::ChartedManifold;

/// Largest cloud handled by exhaustive tuple enumeration.
pub const EXHAUSTIVE_CAP: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    /// Affinely independent tuple certifying its size.
    Independent,
    /// Affinely dependent tuple bounding `s_f` from above.
    Dependent,
    /// The last point moved between two samples flips the orientation sign, so
    /// a dependent tuple exists in between.
    BracketedDependent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SfWitness {
    pub s: usize,
    pub kind: WitnessKind,
    pub points: Vec<Vec<f64>>,
    /// Smallest singular value of the difference-vector matrix.
    pub min_singular_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SfProfile {
    pub s_f: usize,
    pub ambient_dim: usize,
    /// `true` when every tuple of the cloud was examined.
    pub exhaustive: bool,
    /// Sampled estimates can only miss dependent tuples, so they bound `s_f`
    /// from above.
    pub upper_estimate: bool,
    pub cloud_size: usize,
    pub tuples_checked: usize,
    pub witnesses: Vec<SfWitness>,
    pub violation: Option<SfWitness>,
    /// `2 <= s_f <= m + 1`
    pub bound_check: bool,
}

fn difference_matrix(points: &[&Vec<f64>]) -> DMatrix<f64> {
    let m = points[0].len();
    DMatrix::from_fn(m, points.len() - 1, |r, c| points[c + 1][r] - points[0][r])
}

fn witness(points: &[&Vec<f64>], kind: WitnessKind) -> SfWitness {
    let d = difference_matrix(points);
    SfWitness {
        s: points.len(),
        kind,
        points: points.iter().map(|p| (*p).clone()).collect(),
        min_singular_value: singular_values(&d).last().copied().unwrap_or(0.0),
    }
}

/// Exact `s_f` of a finite cloud by exhaustive enumeration (at most
/// [`EXHAUSTIVE_CAP`] points).
pub fn compute_sf(points: &[Vec<f64>]) -> Result<SfProfile> {
    if points.len() < 2 {
        return Err(Error::TooFewPoints {
            need: 2,
            got: points.len(),
        });
    }
    if points.len() > EXHAUSTIVE_CAP {
        return Err(Error::InvalidSpec(format!(
            "exhaustive s_f is capped at {EXHAUSTIVE_CAP} points, got {}; use estimate_sf",
            points.len()
        )));
    }
    let m = points[0].len();
    if points.iter().any(|p| p.len() != m) {
        return Err(Error::DimensionMismatch {
            context: "s_f cloud",
            expected: m,
            found: points.iter().map(Vec::len).find(|&d| d != m).unwrap_or(m),
        });
    }
    let scale = points.iter().flatten().fold(1.0f64, |a, v| a.max(v.abs()));
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            if dist(&points[i], &points[j]) <= 1e-12 * scale {
                return Err(Error::DegenerateTuple(i, j));
            }
        }
    }

    let top = (m + 1).min(points.len());
    let mut witnesses = Vec::new();
    let mut violation = None;
    let mut checked = 0;
    let mut s_f = 1;
    'sizes: for s in 2..=top {
        let mut first = None;
        for combo in (0..points.len()).combinations(s) {
            checked += 1;
            let tuple: Vec<&Vec<f64>> = combo.iter().map(|&i| &points[i]).collect();
            if numerical_rank(&difference_matrix(&tuple), RANK_TOL) < s - 1 {
                violation = Some(witness(&tuple, WitnessKind::Dependent));
                break 'sizes;
            }
            if first.is_none() {
                first = Some(witness(&tuple, WitnessKind::Independent));
            }
        }
        s_f = s;
        witnesses.extend(first);
    }
    // m + 2 points in R^m are always dependent, so s_f never exceeds m + 1
    Ok(SfProfile {
        s_f,
        ambient_dim: m,
        exhaustive: true,
        upper_estimate: false,
        cloud_size: points.len(),
        tuples_checked: checked,
        witnesses,
        violation,
        bound_check: (2..=m + 1).contains(&s_f),
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SfBudget {
    /// Random sub-clouds of [`EXHAUSTIVE_CAP`] points.
    pub random_subclouds: usize,
    /// Tuples examined by the orientation sign sweep on curves.
    pub sweep_tuples: usize,
    pub seed: u64,
}

impl Default for SfBudget {
    fn default() -> Self {
        SfBudget {
            random_subclouds: 200,
            sweep_tuples: 20_000,
            seed: 0,
        }
    }
}

fn evenly(items: &[usize], k: usize) -> Vec<usize> {
    if items.len() <= k {
        return items.to_vec();
    }
    (0..k).map(|i| items[i * (items.len() - 1) / (k - 1)]).collect()
}

/// Orientation sweep on a curve: for `m` fixed points and a moving last point,
/// a sign change of `det(differences)` between consecutive samples, away from
/// the fixed points, brackets an affinely dependent `(m+1)`-tuple.
fn sweep_curve(chart_images: &[Vec<Vec<f64>>], m: usize, budget: &SfBudget) -> (usize, Option<SfWitness>) {
    let all: Vec<&Vec<f64>> = chart_images.iter().flatten().collect();
    if all.len() < m + 1 {
        return (0, None);
    }
    // a fixed point lying between two consecutive samples is within one
    // spacing of both
    let exclusion = chart_images
        .iter()
        .flat_map(|c| c.windows(2).map(|w| dist(&w[0], &w[1])))
        .fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed ^ 0x5f5f);
    let anchors_wanted = (budget.sweep_tuples / all.len().max(1)).max(1);
    let mut checked = 0;
    for _ in 0..anchors_wanted {
        let idx = sample(&mut rng, all.len(), m).into_vec();
        let fixed: Vec<&Vec<f64>> = idx.iter().map(|&i| all[i]).collect();
        let det_with = |y: &Vec<f64>| {
            let mut tuple = fixed.clone();
            tuple.push(y);
            difference_matrix(&tuple).determinant()
        };
        for images in chart_images {
            for w in images.windows(2) {
                checked += 1;
                let clear = fixed
                    .iter()
                    .all(|f| dist(f, &w[0]) > exclusion && dist(f, &w[1]) > exclusion);
                if !clear {
                    continue;
                }
                let (d0, d1) = (det_with(&w[0]), det_with(&w[1]));
                if d0 * d1 < 0.0 {
                    let mut tuple = fixed.clone();
                    tuple.push(&w[0]);
                    return (checked, Some(witness(&tuple, WitnessKind::BracketedDependent)));
                }
            }
        }
    }
    (checked, None)
}

/// Sampled `s_f` of a charted manifold: the minimum over deterministic and
/// random sub-clouds of the grid image, plus an orientation sweep on curves.
pub fn estimate_sf(f: &ChartedManifold, budget: &SfBudget) -> Result<SfProfile> {
    let m = f.m;
    let density = f.sample_density;
    let mut chart_images: Vec<Vec<Vec<f64>>> = Vec::new();
    for chart in &f.charts {
        chart_images.push(chart.grid(density).iter().map(|t| chart.map.evaluate(t)).collect::<Result<_>>()?);
    }
    // overlapping charts may repeat points; keep the first occurrence
    let mut cloud: Vec<Vec<f64>> = Vec::new();
    for y in chart_images.iter().flatten() {
        if !cloud.iter().any(|c| dist(c, y) < 1e-9) {
            cloud.push(y.clone());
        }
    }
    if cloud.len() < 2 {
        return Err(Error::TooFewPoints {
            need: 2,
            got: cloud.len(),
        });
    }

    let mut subclouds: Vec<Vec<Vec<f64>>> = Vec::new();
    // grid lines: along each axis of each chart, with the other coordinates fixed
    for images in &chart_images {
        let total = images.len();
        if f.n == 1 {
            subclouds.push(evenly(&(0..total).collect::<Vec<_>>(), EXHAUSTIVE_CAP).iter().map(|&i| images[i].clone()).collect());
            continue;
        }
        let mut stride = 1;
        for _ in 0..f.n {
            // every third line along this axis
            let bases: Vec<usize> = (0..total).filter(|&i| (i / stride) % density == 0).collect();
            for &base in bases.iter().step_by(3) {
                let line: Vec<usize> = (0..density).map(|k| base + k * stride).collect();
                subclouds.push(evenly(&line, EXHAUSTIVE_CAP).iter().map(|&i| images[i].clone()).collect());
            }
            stride *= density;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    for _ in 0..budget.random_subclouds {
        let k = EXHAUSTIVE_CAP.min(cloud.len());
        let idx = sample(&mut rng, cloud.len(), k).into_vec();
        subclouds.push(idx.iter().map(|&i| cloud[i].clone()).collect());
    }

    let mut best: Option<SfProfile> = None;
    let mut checked = 0;
    for sc in &subclouds {
        let mut pts: Vec<Vec<f64>> = Vec::new();
        for p in sc {
            if !pts.iter().any(|q| dist(q, p) < 1e-9) {
                pts.push(p.clone());
            }
        }
        if pts.len() < 2 {
            continue;
        }
        let prof = compute_sf(&pts)?;
        checked += prof.tuples_checked;
        if best.as_ref().is_none_or(|b| prof.s_f < b.s_f) {
            best = Some(prof);
        }
    }
    let mut prof = best.ok_or(Error::TooFewPoints { need: 2, got: 1 })?;

    if f.n == 1 && prof.s_f == m + 1 {
        let (swept, found) = sweep_curve(&chart_images, m, budget);
        checked += swept;
        if let Some(w) = found {
            prof.s_f = m;
            prof.witnesses.retain(|x| x.s <= m);
            prof.violation = Some(w);
        }
    }
    prof.exhaustive = false;
    prof.upper_estimate = true;
    prof.cloud_size = cloud.len();
    prof.tuples_checked = checked;
    prof.bound_check = (2..=m + 1).contains(&prof.s_f);
    Ok(prof)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{chart_atlas, ManifoldKind};
    use rand::Rng;

    #[test]
    fn collinear_points_give_two() {
        let pts: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64, 2.0 * i as f64, -1.0]).collect();
        let p = compute_sf(&pts).unwrap();
        assert_eq!(p.s_f, 2);
        assert_eq!(p.violation.unwrap().kind, WitnessKind::Dependent);
        assert!(p.bound_check);
    }

    #[test]
    fn generic_simplex_gives_m_plus_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in 1..6 {
            let pts: Vec<Vec<f64>> = (0..=m).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            assert_eq!(compute_sf(&pts).unwrap().s_f, m + 1);
        }
    }

    #[test]
    fn errors() {
        assert!(matches!(compute_sf(&[vec![1.0]]), Err(Error::TooFewPoints { .. })));
        assert!(matches!(
            compute_sf(&[vec![1.0, 2.0], vec![1.0, 2.0]]),
            Err(Error::DegenerateTuple(0, 1))
        ));
    }

    #[test]
    fn sphere_gives_three() {
        let s = chart_atlas(&ManifoldKind::Sphere2 { m: 3 }).unwrap();
        let p = estimate_sf(&s, &SfBudget::default()).unwrap();
        assert!(p.cloud_size >= 200);
        assert_eq!(p.s_f, 3);
        assert!(p.upper_estimate);
    }

    #[test]
    fn catalog_bounds() {
        for kind in [
            ManifoldKind::Circle { m: 2 },
            ManifoldKind::Circle { m: 4 },
            ManifoldKind::Sphere2 { m: 4 },
            ManifoldKind::NodalCubic { m: 2 },
            ManifoldKind::Spiral { m: 2 },
        ] {
            let f = chart_atlas(&kind).unwrap();
            let p = estimate_sf(&f, &SfBudget::default()).unwrap();
            assert!(p.bound_check, "{kind:?}: {}", p.s_f);
        }
    }

    #[test]
    fn curves_with_collinear_triples() {
        // every line through two points of a planar cubic meets it again
        let f = chart_atlas(&ManifoldKind::NodalCubic { m: 2 }).unwrap();
        let p = estimate_sf(&f, &SfBudget::default()).unwrap();
        assert_eq!(p.s_f, 2);
        assert_eq!(p.violation.unwrap().kind, WitnessKind::BracketedDependent);
        let c = chart_atlas(&ManifoldKind::Circle { m: 2 }).unwrap();
        assert_eq!(estimate_sf(&c, &SfBudget::default()).unwrap().s_f, 3);
    }
}
