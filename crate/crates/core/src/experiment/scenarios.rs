//! Verdict pipelines, one per scenario, applied to a single sampled map.

use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use super::config::{ExperimentConfig, Sampling, Scenario};
use super::sampling::{sample_central_uniform, sample_perturbation};
use crate::diff::SmoothMap;
use crate::error::{Error, Result};
use crate::jet::{
    build_m1, corank_bound_check, find_critical_points, find_singular_points, immersion_check,
    morse_record, refine_min_singular_value, sigma_transversality_with, LocateOptions,
};
use crate::linalg::singular_values;
use crate::multi::{
    build_m2, estimate_sf, fiber_cardinality, injectivity_check, normal_crossings_verdict, FiberOptions,
    SearchBudget, SfBudget,
};
use crate::newton::NewtonOptions;
use crate::zoo::{
    chart_atlas, make_gdsm, perturb, psi_central_to_linear, psi_linear_to_central, ChartPoint, ChartedManifold,
    ChartedMap, GdsmSpec, LinearPerturbation,
};

/// Shared, read-only state of a run.
pub(crate) struct Context {
    pub cfg: ExperimentConfig,
    pub manifold: Arc<ChartedManifold>,
    pub base: SmoothMap,
}

impl Context {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        let mut manifold = chart_atlas(&cfg.manifold)?;
        if let Some(d) = cfg.grid.density {
            manifold = manifold.with_density(d);
        }
        let base = cfg.base_map.build()?;
        Ok(Context {
            manifold: Arc::new(manifold),
            base,
            cfg,
        })
    }

    fn newton(&self) -> NewtonOptions {
        NewtonOptions {
            tol: self.cfg.tolerances.newton,
            max_iter: self.cfg.budgets.max_newton_iters,
        }
    }

    fn locate(&self, seeds: usize) -> LocateOptions {
        LocateOptions {
            newton: self.newton(),
            seeds,
            ..LocateOptions::default()
        }
    }

    fn search_budget(&self) -> SearchBudget {
        SearchBudget {
            grid_density: self.cfg.grid.density,
            pair_seeds: self.cfg.budgets.pair_seeds,
            newton_tol: self.cfg.tolerances.newton,
            max_newton_iters: self.cfg.budgets.max_newton_iters,
            ..SearchBudget::default()
        }
    }
}

/// The map of one trial together with what is needed to replay it.
pub(crate) struct TrialMap {
    pub map: SmoothMap,
    pub perturbation: LinearPerturbation,
    pub central_point: Option<Vec<Vec<f64>>>,
}

/// Draws `F_π` (or `G_(p,A)`); `control` uses the zero perturbation.
pub(crate) fn draw_map(ctx: &Context, sampling: Sampling, rng: &mut ChaCha8Rng, control: bool) -> Result<TrialMap> {
    let (l, m) = (ctx.cfg.dims.l, ctx.cfg.dims.m);
    let scale = if control { 0.0 } else { ctx.cfg.perturbation_scale };
    let central = |p: Vec<Vec<f64>>| -> Result<TrialMap> {
        let base = ctx.cfg.base_map.gdsm_spec().ok_or_else(|| Error::config("sampling", "needs a gdsm base map"))?;
        let spec = GdsmSpec { p: p.clone(), ..base };
        Ok(TrialMap {
            map: make_gdsm(&spec)?,
            perturbation: psi_central_to_linear(&spec)?,
            central_point: Some(p),
        })
    };
    match sampling {
        Sampling::Linear => {
            let pi = sample_perturbation(rng, l, m, scale);
            Ok(TrialMap {
                map: perturb(&ctx.base, &pi)?,
                perturbation: pi,
                central_point: None,
            })
        }
        Sampling::CentralFromLinear => {
            let pi = sample_perturbation(rng, l, m, scale);
            let a = ctx.cfg.base_map.gdsm_spec().expect("validated").a;
            central(psi_linear_to_central(&a, &pi)?)
        }
        Sampling::CentralUniform => central(sample_central_uniform(rng, l, m, scale)),
    }
}

/// Verdict of one trial before bookkeeping.
pub(crate) struct Verdict {
    pub pass: bool,
    pub margin: Option<f64>,
    pub witness: Option<Value>,
    pub details: Value,
}

fn point_json(g: &ChartedMap, p: &ChartPoint) -> Value {
    json!({
        "chart": p.chart,
        "t": p.t,
        "image": g.evaluate(p).ok(),
    })
}

/// Runs the verdict pipeline of `scenario` on `F∘f`.
pub(crate) fn map_verdict(ctx: &Context, scenario: Scenario, f: &SmoothMap) -> Result<Verdict> {
    let g = ChartedMap::compose(f, ctx.manifold.clone())?;
    let tol = &ctx.cfg.tolerances;
    match scenario {
        Scenario::Morse => {
            let crit = find_critical_points(&g, &ctx.locate(ctx.cfg.budgets.newton_seeds))?;
            let mut worst: Option<(f64, &ChartPoint)> = None;
            for p in &crit {
                let det = morse_record(g.piece(p), &p.t, tol.newton.sqrt(), tol.morse_det)?.hess_det.abs();
                if worst.is_none_or(|(w, _)| det < w) {
                    worst = Some((det, p));
                }
            }
            let needed = if ctx.manifold.compact { 2 } else { 1 };
            let nondegenerate = worst.is_none_or(|(d, _)| d > tol.morse_det);
            Ok(Verdict {
                pass: crit.len() >= needed && nondegenerate,
                margin: worst.map(|(d, _)| d),
                witness: worst.map(|(d, p)| json!({"point": point_json(&g, p), "hess_det": d})),
                details: json!({"critical_points": crit.len()}),
            })
        }
        Scenario::WhitneyUmbrella => {
            let sing = find_singular_points(&g, &ctx.locate(ctx.cfg.budgets.singular_seeds))?;
            let mut margin: Option<f64> = None;
            let mut witness = None;
            let mut all_umbrellas = true;
            for p in &sing {
                let v = sigma_transversality_with(g.piece(p), &p.t, 1, tol.transversality, tol.rank)?;
                let ok = v.on_stratum && v.transverse && v.corank == 1;
                if margin.is_none_or(|m| v.margin < m) {
                    margin = Some(v.margin);
                }
                if !ok && witness.is_none() {
                    witness = Some(json!({"point": point_json(&g, p), "verdict": v}));
                }
                all_umbrellas &= ok;
            }
            let corank = corank_bound_check(&g, &ctx.manifold.samples(), tol.rank)?;
            if !corank.respects_bound && witness.is_none() {
                witness = corank.witness.as_ref().map(|p| json!({"corank_point": point_json(&g, p)}));
            }
            Ok(Verdict {
                pass: all_umbrellas && corank.respects_bound,
                margin,
                witness,
                details: json!({
                    "singular_points": sing.len(),
                    "max_corank": corank.max_corank_observed,
                    "k0": corank.k0,
                }),
            })
        }
        Scenario::Immersion => {
            let (min_sv, at) = immersion_margin(ctx, &g)?;
            Ok(Verdict {
                pass: min_sv > tol.immersion,
                margin: Some(min_sv),
                witness: Some(point_json(&g, &at)),
                details: json!({"samples": ctx.manifold.samples().len()}),
            })
        }
        Scenario::CorankBound => {
            let rep = corank_bound_check(&g, &ctx.manifold.samples(), tol.rank)?;
            Ok(Verdict {
                pass: rep.respects_bound,
                margin: None,
                witness: rep.witness.as_ref().map(|p| point_json(&g, p)),
                details: json!({"max_corank": rep.max_corank_observed, "k0": rep.k0}),
            })
        }
        Scenario::Injectivity => {
            let rep = injectivity_check(&g, &ctx.search_budget(), tol.coincidence)?;
            Ok(Verdict {
                pass: rep.is_injective_at_resolution,
                margin: Some(rep.min_image_gap),
                witness: rep.witness.as_ref().map(|mp| json!(mp)),
                details: json!({"budget_exhausted": rep.budget_exhausted}),
            })
        }
        Scenario::Embedding => {
            let (min_sv, at) = immersion_margin(ctx, &g)?;
            let inj = injectivity_check(&g, &ctx.search_budget(), tol.coincidence)?;
            let immersed = min_sv > tol.immersion;
            let witness = match (&inj.witness, immersed) {
                (Some(mp), _) => Some(json!({"double_point": mp})),
                (None, false) => Some(json!({"singular_point": point_json(&g, &at)})),
                _ => None,
            };
            Ok(Verdict {
                pass: immersed && inj.is_injective_at_resolution,
                margin: Some(min_sv.min(inj.min_image_gap)),
                witness,
                details: json!({
                    "min_singular_value": min_sv,
                    "min_image_gap": inj.min_image_gap,
                    "budget_exhausted": inj.budget_exhausted,
                }),
            })
        }
        Scenario::NormalCrossings => {
            let rep = normal_crossings_verdict(
                &g,
                ctx.cfg.s_max,
                &ctx.search_budget(),
                tol.coincidence,
                tol.transversality,
            )?;
            let witness = rep
                .per_point
                .iter()
                .find(|(_, v)| !v.transverse)
                .map(|(mp, v)| json!({"tuple": mp, "verdict": v}));
            let counts: Vec<usize> = (2..=ctx.cfg.s_max)
                .map(|s| rep.per_point.iter().filter(|(mp, _)| mp.s == s).count())
                .collect();
            Ok(Verdict {
                pass: rep.is_normal_crossings_at_found_points,
                margin: rep.min_margin,
                witness,
                details: json!({"multiple_points_by_s": counts, "budget_exhausted": rep.budget_exhausted}),
            })
        }
        Scenario::DpLpFibers | Scenario::M1Oracle | Scenario::M2Oracle | Scenario::SfProfile | Scenario::GdsmAnalog => {
            Err(Error::InvalidSpec(format!("{} is not a map verdict", scenario.name())))
        }
    }
}

/// Smallest singular value of `dg` over the grid, optionally polished.
fn immersion_margin(ctx: &Context, g: &ChartedMap) -> Result<(f64, ChartPoint)> {
    let rep = immersion_check(g, &ctx.manifold.samples(), ctx.cfg.tolerances.immersion)?;
    if !ctx.cfg.grid.refine_immersion {
        return Ok((rep.min_singular_value, rep.witness));
    }
    let step = ctx.manifold.grid_step(ctx.manifold.sample_density);
    let refined = refine_min_singular_value(g, &rep.witness, step, ctx.cfg.tolerances.immersion)?;
    if refined.min_singular_value < rep.min_singular_value {
        Ok((refined.min_singular_value, refined.witness))
    } else {
        Ok((rep.min_singular_value, rep.witness))
    }
}

/// Fiber counts of `F` at targets `F(x0)` with `x0` uniform in the box.
pub(crate) fn fiber_verdict(ctx: &Context, f: &SmoothMap, rng: &mut ChaCha8Rng) -> Result<Verdict> {
    let chart = &ctx.manifold.charts[0];
    let opts = FiberOptions {
        seeds_per_axis: ctx.cfg.budgets.fiber_seeds_per_axis,
        newton_tol: ctx.cfg.tolerances.newton,
        max_newton_iters: ctx.cfg.budgets.max_newton_iters,
    };
    let mut histogram = vec![0usize; 8];
    let mut worst: Option<(usize, Vec<f64>, Vec<Vec<f64>>)> = None;
    for _ in 0..ctx.cfg.budgets.fiber_targets {
        let x0: Vec<f64> = chart
            .lo
            .iter()
            .zip(&chart.hi)
            .map(|(a, b)| a + (b - a) * (0.25 + 0.5 * rng.random::<f64>()))
            .collect();
        let y = f.evaluate(&x0)?;
        let fiber = fiber_cardinality(f, &y, &chart.lo, &chart.hi, ctx.cfg.tolerances.fiber_cluster, &opts)?;
        histogram[fiber.count.min(7)] += 1;
        if worst.as_ref().is_none_or(|(c, _, _)| fiber.count > *c) {
            worst = Some((fiber.count, y, fiber.points));
        }
    }
    let (max_count, y, points) = worst.expect("at least one target");
    Ok(Verdict {
        pass: max_count <= ctx.cfg.fiber_bound,
        margin: None,
        witness: Some(json!({"target": y, "fiber": points})),
        details: json!({"max_count": max_count, "count_histogram": histogram}),
    })
}

/// Rank of `M₁` at a random chart point for the sampled `α`.
pub(crate) fn m1_verdict(ctx: &Context, alpha: &LinearPerturbation, rng: &mut ChaCha8Rng) -> Result<Verdict> {
    let p = ctx.manifold.random_point(rng);
    let chart = &ctx.manifold.charts[p.chart].map;
    let m1 = build_m1(chart, &ctx.base, &p.t, alpha)?;
    let sv = singular_values(&m1.matrix);
    let margin = sv.last().copied();
    let ok = m1.full_rank() && m1.gamma_column_error < ctx.cfg.tolerances.gamma_column;
    Ok(Verdict {
        pass: ok,
        margin,
        witness: Some(json!({"chart": p.chart, "t": p.t})),
        details: json!({
            "rank": m1.rank,
            "expected": m1.expected,
            "gamma_column_error": m1.gamma_column_error,
        }),
    })
}

/// Rank of `M₂` at `s` random points against a Gram-determinant certificate
/// of the difference vectors; `collinear` replaces the tuple by collinear
/// values, which must not give full rank.
pub(crate) fn m2_verdict(ctx: &Context, rng: &mut ChaCha8Rng, collinear: bool) -> Result<Verdict> {
    let s = if collinear { ctx.cfg.s.max(3) } else { ctx.cfg.s };
    let mut values = Vec::with_capacity(s);
    let mut points = Vec::with_capacity(s);
    while values.len() < s {
        let p = ctx.manifold.random_point(rng);
        if points.iter().any(|q| ctx.manifold.same_point(q, &p, 1e-6)) {
            continue;
        }
        values.push(ctx.manifold.embed(&p)?);
        points.push(p);
    }
    if collinear {
        let (v0, v1) = (values[0].clone(), values[1].clone());
        for (i, v) in values.iter_mut().enumerate().skip(2) {
            *v = v0.iter().zip(&v1).map(|(a, b)| a + i as f64 * (b - a)).collect();
        }
    }
    let m2 = build_m2(&values, ctx.cfg.dims.l)?;
    let gram = gram_determinant(&values);
    let scale: f64 = values.iter().flatten().map(|v| v * v).sum::<f64>().max(1.0);
    let certified_independent = gram > 1e-10 * scale.powi((s - 1) as i32);
    let full = m2.full_rank();
    let pass = if collinear { full } else { full == certified_independent };
    Ok(Verdict {
        pass,
        margin: Some(gram),
        witness: Some(json!({"values": values})),
        details: json!({
            "rank": m2.rank,
            "expected": m2.expected,
            "difference_rank": m2.difference_rank,
            "certified_independent": certified_independent,
        }),
    })
}

/// `det(DᵀD)` for the difference vectors `D = [v_2 - v_1, ..]`, by Gaussian
/// elimination with partial pivoting.
fn gram_determinant(values: &[Vec<f64>]) -> f64 {
    let diffs: Vec<Vec<f64>> = values[1..]
        .iter()
        .map(|v| v.iter().zip(&values[0]).map(|(a, b)| a - b).collect())
        .collect();
    let k = diffs.len();
    let mut g: Vec<Vec<f64>> = (0..k)
        .map(|i| (0..k).map(|j| diffs[i].iter().zip(&diffs[j]).map(|(a, b)| a * b).sum()).collect())
        .collect();
    let mut det = 1.0;
    for c in 0..k {
        let piv = (c..k).max_by(|&a, &b| g[a][c].abs().total_cmp(&g[b][c].abs())).unwrap();
        if g[piv][c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            g.swap(piv, c);
            det = -det;
        }
        det *= g[c][c];
        for r in (c + 1)..k {
            let f = g[r][c] / g[c][c];
            for j in c..k {
                g[r][j] -= f * g[c][j];
            }
        }
    }
    det
}

/// `s_f` of the embedded manifold with this trial's seed.
pub(crate) fn sf_verdict(ctx: &Context, seed: u64) -> Result<Verdict> {
    let profile = estimate_sf(
        &ctx.manifold,
        &SfBudget {
            random_subclouds: ctx.cfg.budgets.sf_random_subclouds,
            sweep_tuples: ctx.cfg.budgets.sf_sweep_tuples,
            seed,
        },
    )?;
    let matches = ctx.cfg.expected_sf.is_none_or(|e| e == profile.s_f);
    Ok(Verdict {
        pass: profile.bound_check && matches,
        margin: None,
        witness: profile.violation.as_ref().map(|w| json!(w)),
        details: json!(profile),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gram_determinant_reference() {
        // differences (1,0,0) and (1,1,0): Gram [[1,1],[1,2]] has determinant 1
        let v = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![1.0, 1.0, 0.0]];
        assert!((gram_determinant(&v) - 1.0).abs() < 1e-15);
        let c = vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]];
        assert!(gram_determinant(&c).abs() < 1e-15);
    }
}
