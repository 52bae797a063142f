use serde::Serialize;

use super::{corank, max_corank_k0, sigma_transversality_with, Dimensions};
use crate::diff::SmoothMap;
use crate::error::{Error, Result};
use crate::linalg::{singular_values, RANK_TOL};
use crate::zoo::{ChartPoint, ChartedMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MorseClass {
    Regular,
    NondegenerateCritical,
    DegenerateCritical,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MorseRecord {
    pub class: MorseClass,
    pub grad_norm: f64,
    pub hess_det: f64,
}

fn require_scalar(g: &SmoothMap) -> Result<()> {
    if g.codomain_dim() != 1 {
        return Err(Error::BadDimensionPair {
            n: g.domain_dim(),
            l: g.codomain_dim(),
            reason: "Morse classification needs a scalar function (l = 1)",
        });
    }
    Ok(())
}

pub fn morse_verdict(g: &SmoothMap, t: &[f64], tol: f64) -> Result<MorseClass> {
    morse_record(g, t, tol, tol).map(|r| r.class)
}

/// Gradient norm and Hessian determinant at `t` with the resulting class.
pub fn morse_record(g: &SmoothMap, t: &[f64], grad_tol: f64, det_tol: f64) -> Result<MorseRecord> {
    require_scalar(g)?;
    let (_, jac, hess) = g.second_order(t)?;
    let grad_norm = jac.norm();
    let hess_det = hess.slices[0].determinant();
    let class = if grad_norm > grad_tol {
        MorseClass::Regular
    } else if hess_det.abs() > det_tol {
        MorseClass::NondegenerateCritical
    } else {
        MorseClass::DegenerateCritical
    };
    Ok(MorseRecord {
        class,
        grad_norm,
        hess_det,
    })
}

/// The sufficient criterion: corank one and `j^1 g` transverse to the corank-one
/// stratum at `t`.
pub fn whitney_umbrella_verdict(g: &SmoothMap, t: &[f64], tol: f64) -> Result<bool> {
    let (n, l) = (g.domain_dim(), g.codomain_dim());
    if n < 2 || l != 2 * n - 1 {
        return Err(Error::BadDimensionPair {
            n,
            l,
            reason: "Whitney umbrella needs l = 2n - 1 and n >= 2",
        });
    }
    let v = sigma_transversality_with(g, t, 1, tol, RANK_TOL)?;
    Ok(v.on_stratum && v.transverse)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImmersionReport {
    pub min_singular_value: f64,
    pub witness: ChartPoint,
    pub is_immersion_at_samples: bool,
}

fn smallest_sv(g: &ChartedMap, p: &ChartPoint) -> Result<f64> {
    let jac = g.piece(p).jacobian(&p.t)?;
    let s = singular_values(&jac);
    Ok(s.get(g.n() - 1).copied().unwrap_or(0.0))
}

/// Minimum over `samples` of the `n`-th singular value of the Jacobian.
pub fn immersion_check(g: &ChartedMap, samples: &[ChartPoint], tol: f64) -> Result<ImmersionReport> {
    if samples.is_empty() {
        return Err(Error::TooFewPoints { need: 1, got: 0 });
    }
    let mut best: Option<(f64, &ChartPoint)> = None;
    for p in samples {
        let s = smallest_sv(g, p)?;
        if best.is_none_or(|(b, _)| s < b) {
            best = Some((s, p));
        }
    }
    let (min, witness) = best.expect("nonempty samples");
    Ok(ImmersionReport {
        min_singular_value: min,
        witness: witness.clone(),
        is_immersion_at_samples: min > tol,
    })
}

/// Polishes a grid minimum of the smallest singular value by compass search
/// inside the chart box.
pub fn refine_min_singular_value(
    g: &ChartedMap,
    start: &ChartPoint,
    step: f64,
    tol: f64,
) -> Result<ImmersionReport> {
    let chart = &g.manifold.charts[start.chart];
    let mut p = start.clone();
    let mut best = smallest_sv(g, &p)?;
    let mut h = step;
    while h > 1e-12 {
        let mut improved = false;
        for axis in 0..p.t.len() {
            for dir in [-1.0, 1.0] {
                let mut q = p.clone();
                q.t[axis] += dir * h;
                if !chart.contains(&q.t) {
                    continue;
                }
                let s = smallest_sv(g, &q)?;
                if s < best {
                    best = s;
                    p = q;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    Ok(ImmersionReport {
        min_singular_value: best,
        witness: p,
        is_immersion_at_samples: best > tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorankReport {
    pub max_corank_observed: usize,
    pub k0: usize,
    pub respects_bound: bool,
    pub witness: Option<ChartPoint>,
}

pub fn corank_bound_check(g: &ChartedMap, samples: &[ChartPoint], tol: f64) -> Result<CorankReport> {
    let dims = Dimensions::new(g.n(), g.l())?;
    let k0 = max_corank_k0(dims);
    let mut max = 0;
    let mut witness = None;
    for p in samples {
        let c = corank(&g.piece(p).jacobian(&p.t)?, tol);
        if c > max || witness.is_none() {
            if c > max {
                max = c;
            }
            witness = Some(p.clone());
        }
    }
    Ok(CorankReport {
        max_corank_observed: max,
        k0,
        respects_bound: max <= k0,
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diff::Dual;
    use crate::zoo::{chart_atlas, normal_form, ManifoldKind, NormalForm};
    use rand::{Rng, SeedableRng};
    use std::sync::Arc;

    fn scalar(label: &str, f: fn(&Dual) -> Dual) -> SmoothMap {
        SmoothMap::new(label, 1, 1, move |t: &[Dual]| vec![f(&t[0])]).unwrap()
    }

    #[test]
    fn morse_on_powers() {
        let sq = scalar("t^2", |t| t.square());
        let cube = scalar("t^3", |t| t.powi(3));
        assert_eq!(morse_verdict(&sq, &[0.0], 1e-6).unwrap(), MorseClass::NondegenerateCritical);
        assert_eq!(morse_verdict(&cube, &[0.0], 1e-6).unwrap(), MorseClass::DegenerateCritical);
        assert_eq!(morse_verdict(&sq, &[1.0], 1e-6).unwrap(), MorseClass::Regular);
        let w = normal_form(NormalForm::WhitneyUmbrella { n: 2 }).unwrap();
        assert!(morse_verdict(&w, &[0.0, 0.0], 1e-6).is_err());
    }

    #[test]
    fn shifted_distance_on_circle_has_two_critical_points() {
        // 5 - 4 cos(theta): derivative 4 sin(theta), second derivative 4 cos(theta)
        let g = scalar("5-4cos", |t| (t.cos() * -4.0) + 5.0);
        assert_eq!(morse_verdict(&g, &[0.0], 1e-6).unwrap(), MorseClass::NondegenerateCritical);
        let pi = std::f64::consts::PI;
        assert_eq!(morse_verdict(&g, &[pi], 1e-6).unwrap(), MorseClass::NondegenerateCritical);
        // closed-form oracle: critical points are exactly the zeros of sin on [0, 2pi)
        for i in 0..720 {
            let th = i as f64 * pi / 360.0;
            let expected = if th.sin().abs() * 4.0 > 1e-6 {
                MorseClass::Regular
            } else {
                MorseClass::NondegenerateCritical
            };
            assert_eq!(morse_verdict(&g, &[th], 1e-6).unwrap(), expected, "theta = {th}");
        }
    }

    #[test]
    fn morse_invariant_under_local_diffeomorphisms() {
        // g(x, y) = x^2 - 2y^2 + xy^2 has a nondegenerate critical point at 0;
        // precomposition with phi(u) = B u + small quadratic keeps it so
        let g = SmoothMap::new("g", 2, 1, |x: &[Dual]| {
            vec![x[0].square() - x[1].square() * 2.0 + &x[0] * &x[1].square()]
        })
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let det = b[0] * b[3] - b[1] * b[2];
            if det.abs() < 0.1 {
                continue;
            }
            let c: Vec<f64> = (0..6).map(|_| rng.random_range(-0.3..0.3)).collect();
            let phi = SmoothMap::new("phi", 2, 2, move |u: &[Dual]| {
                let q = |o: usize| {
                    u[0].square() * c[o] + &u[0] * &u[1] * c[o + 1] + u[1].square() * c[o + 2]
                };
                vec![&u[0] * b[0] + &u[1] * b[1] + q(0), &u[0] * b[2] + &u[1] * b[3] + q(3)]
            })
            .unwrap();
            let h = crate::zoo::compose(&g, &phi).unwrap();
            assert_eq!(morse_verdict(&h, &[0.0, 0.0], 1e-6).unwrap(), MorseClass::NondegenerateCritical);
        }
    }

    #[test]
    fn umbrella_verdicts() {
        let w = normal_form(NormalForm::WhitneyUmbrella { n: 2 }).unwrap();
        assert!(whitney_umbrella_verdict(&w, &[0.0, 0.0], 1e-6).unwrap());
        for i in -5..=5 {
            for j in -5..=5 {
                if (i, j) != (0, 0) {
                    let t = [i as f64 * 0.2, j as f64 * 0.2];
                    assert!(!whitney_umbrella_verdict(&w, &t, 1e-6).unwrap());
                }
            }
        }
        let inc = normal_form(NormalForm::Inclusion { n: 2, l: 3 }).unwrap();
        assert!(!whitney_umbrella_verdict(&inc, &[0.3, -0.4], 1e-6).unwrap());
        let cubic = SmoothMap::new("cubic", 2, 3, |x: &[Dual]| {
            vec![x[0].powi(3), &x[0] * &x[1], x[1].clone()]
        })
        .unwrap();
        assert!(!whitney_umbrella_verdict(&cubic, &[0.0, 0.0], 1e-6).unwrap());
        let fold = normal_form(NormalForm::Fold { n: 2 }).unwrap();
        assert!(matches!(
            whitney_umbrella_verdict(&fold, &[0.0, 0.0], 1e-6),
            Err(Error::BadDimensionPair { .. })
        ));
    }

    #[test]
    fn immersion_of_circle_and_fold() {
        let c = ChartedMap::from_manifold(Arc::new(chart_atlas(&ManifoldKind::Circle { m: 2 }).unwrap()));
        let rep = immersion_check(&c, &c.manifold.samples(), 1e-6).unwrap();
        assert!(rep.is_immersion_at_samples);
        assert!((rep.min_singular_value - 1.0).abs() < 1e-12);

        let fold = ChartedMap::on_box(
            normal_form(NormalForm::Fold { n: 1 }).unwrap(),
            vec![-1.0],
            vec![1.0],
            101,
        )
        .unwrap();
        let samples = fold.manifold.samples();
        let rep = immersion_check(&fold, &samples, 1e-6).unwrap();
        assert!(!rep.is_immersion_at_samples);
        assert!(rep.witness.t[0].abs() < 1e-9);
        // an even grid misses 0 but refinement finds it
        let even = ChartedMap::on_box(normal_form(NormalForm::Fold { n: 1 }).unwrap(), vec![-1.0], vec![1.0], 10).unwrap();
        let coarse = immersion_check(&even, &even.manifold.samples(), 1e-6).unwrap();
        assert!(coarse.is_immersion_at_samples);
        let fine = refine_min_singular_value(&even, &coarse.witness, 0.1, 1e-6).unwrap();
        assert!(!fine.is_immersion_at_samples);
        assert!(fine.witness.t[0].abs() < 1e-9);
    }

    #[test]
    fn corank_bounds() {
        let c = ChartedMap::from_manifold(Arc::new(chart_atlas(&ManifoldKind::Circle { m: 3 }).unwrap()));
        let rep = corank_bound_check(&c, &c.manifold.samples(), RANK_TOL).unwrap();
        assert_eq!((rep.max_corank_observed, rep.k0, rep.respects_bound), (0, 0, true));

        let fold = ChartedMap::on_box(
            normal_form(NormalForm::Fold { n: 2 }).unwrap(),
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            21,
        )
        .unwrap();
        let rep = corank_bound_check(&fold, &fold.manifold.samples(), RANK_TOL).unwrap();
        assert_eq!((rep.max_corank_observed, rep.k0, rep.respects_bound), (1, 1, true));

        let constant = ChartedMap::on_box(
            crate::diff::constant(2, vec![0.0, 1.0]).unwrap(),
            vec![-1.0, -1.0],
            vec![1.0, 1.0],
            5,
        )
        .unwrap();
        let rep = corank_bound_check(&constant, &constant.manifold.samples(), RANK_TOL).unwrap();
        assert_eq!(rep.max_corank_observed, 2);
        assert!(!rep.respects_bound);
    }
}
