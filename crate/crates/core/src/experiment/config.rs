use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diff::SmoothMap;
use crate::error::{Error, Result};
use crate::zoo::{make_gdsm, normal_form, GdsmSpec, GdsmVariant, ManifoldKind, NormalForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Morse,
    WhitneyUmbrella,
    Immersion,
    CorankBound,
    Injectivity,
    NormalCrossings,
    Embedding,
    GdsmAnalog,
    DpLpFibers,
    M1Oracle,
    M2Oracle,
    SfProfile,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Morse => "morse",
            Scenario::WhitneyUmbrella => "whitney_umbrella",
            Scenario::Immersion => "immersion",
            Scenario::CorankBound => "corank_bound",
            Scenario::Injectivity => "injectivity",
            Scenario::NormalCrossings => "normal_crossings",
            Scenario::Embedding => "embedding",
            Scenario::GdsmAnalog => "gdsm_analog",
            Scenario::DpLpFibers => "dp_lp_fibers",
            Scenario::M1Oracle => "m1_oracle",
            Scenario::M2Oracle => "m2_oracle",
            Scenario::SfProfile => "sf_profile",
        }
    }
}

/// The map `F: R^m -> R^l` being perturbed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseMapSpec {
    /// `F = 0`: the perturbation alone.
    Zero { m: usize, l: usize },
    Gdsm { p: Vec<Vec<f64>>, a: Vec<Vec<f64>> },
    DistanceSquared { p: Vec<Vec<f64>> },
    Lorentzian { p: Vec<Vec<f64>> },
    Fold { n: usize },
    WhitneyUmbrella { n: usize },
    Inclusion { n: usize, l: usize },
}

impl BaseMapSpec {
    pub fn gdsm_spec(&self) -> Option<GdsmSpec> {
        match self {
            BaseMapSpec::Gdsm { p, a } => Some(GdsmSpec::general(p.clone(), a.clone())),
            BaseMapSpec::DistanceSquared { p } => Some(GdsmSpec::distance_squared(p.clone())),
            BaseMapSpec::Lorentzian { p } => Some(GdsmSpec::lorentzian(p.clone())),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<SmoothMap> {
        if let Some(spec) = self.gdsm_spec() {
            return make_gdsm(&spec);
        }
        match *self {
            BaseMapSpec::Zero { m, l } => crate::diff::constant(m, vec![0.0; l]),
            BaseMapSpec::Fold { n } => normal_form(NormalForm::Fold { n }),
            BaseMapSpec::WhitneyUmbrella { n } => normal_form(NormalForm::WhitneyUmbrella { n }),
            BaseMapSpec::Inclusion { n, l } => normal_form(NormalForm::Inclusion { n, l }),
            _ => unreachable!("gdsm family handled above"),
        }
    }
}

/// How each trial's map is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sampling {
    /// `F + π` with Gaussian `π`.
    Linear,
    /// Gaussian `π`, central point `p = ψ⁻¹(π)`, map `G_(p,A)`.
    CentralFromLinear,
    /// Central point uniform in `[-scale, scale]^(l x m)`, map `G_(p,A)`.
    CentralUniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub rank: f64,
    pub newton: f64,
    pub morse_det: f64,
    pub transversality: f64,
    pub immersion: f64,
    pub coincidence: f64,
    pub fiber_cluster: f64,
    pub gamma_column: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rank: 1e-8,
            newton: 1e-10,
            morse_det: 1e-6,
            transversality: 1e-6,
            immersion: 1e-6,
            coincidence: 1e-8,
            fiber_cluster: 1e-6,
            gamma_column: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budgets {
    pub newton_seeds: usize,
    pub max_newton_iters: usize,
    pub singular_seeds: usize,
    pub pair_seeds: usize,
    pub fiber_targets: usize,
    pub fiber_seeds_per_axis: usize,
    pub sf_random_subclouds: usize,
    pub sf_sweep_tuples: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        Budgets {
            newton_seeds: 64,
            max_newton_iters: 50,
            singular_seeds: 64,
            pair_seeds: 200,
            fiber_targets: 100,
            fiber_seeds_per_axis: 8,
            sf_random_subclouds: 200,
            sf_sweep_tuples: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Samples per chart axis; `null` keeps the manifold's own density.
    pub density: Option<usize>,
    /// Polish the grid minimum of the smallest singular value.
    pub refine_immersion: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            density: None,
            refine_immersion: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub l: usize,
}

fn default_threshold() -> f64 {
    0.99
}

fn default_alpha() -> f64 {
    0.01
}

fn default_s_max() -> usize {
    2
}

fn default_s() -> usize {
    2
}

fn default_fiber_bound() -> usize {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub manifold: ManifoldKind,
    pub base_map: BaseMapSpec,
    pub dims: Dims,
    pub trials: usize,
    pub perturbation_scale: f64,
    pub seed: u64,
    #[serde(default = "default_sampling")]
    pub sampling: Sampling,
    /// Also run the unperturbed map, which is expected to fail.
    #[serde(default)]
    pub control: bool,
    /// Verdict pipeline compared across the two sampling arms of `gdsm_analog`.
    #[serde(default)]
    pub analog_of: Option<Scenario>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default = "default_threshold")]
    pub pass_threshold: f64,
    /// Significance level of the two-sided proportion test in `gdsm_analog`.
    #[serde(default = "default_alpha")]
    pub proportion_alpha: f64,
    /// Largest multiplicity searched by `normal_crossings`.
    #[serde(default = "default_s_max")]
    pub s_max: usize,
    /// Tuple size used by `m2_oracle`.
    #[serde(default = "default_s")]
    pub s: usize,
    #[serde(default = "default_fiber_bound")]
    pub fiber_bound: usize,
    #[serde(default)]
    pub expected_sf: Option<usize>,
}

fn default_sampling() -> Sampling {
    Sampling::Linear
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::config("<document>", e.to_string()))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| {
            let msg = e.to_string();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "<document>".into());
            Error::config(field, msg)
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Checks dimensions against the catalog and the scenario's hypotheses.
    pub fn validate(&self) -> Result<()> {
        let Dims { n, m, l } = self.dims;
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if !(self.perturbation_scale > 0.0 && self.perturbation_scale.is_finite()) {
            return Err(Error::config("perturbation_scale", "must be a positive real"));
        }
        if !(self.pass_threshold > 0.0 && self.pass_threshold <= 1.0) {
            return Err(Error::config("pass_threshold", "must lie in (0, 1]"));
        }
        if !(self.proportion_alpha > 0.0 && self.proportion_alpha < 1.0) {
            return Err(Error::config("proportion_alpha", "must lie in (0, 1)"));
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.rank", t.rank),
            ("tolerances.newton", t.newton),
            ("tolerances.morse_det", t.morse_det),
            ("tolerances.transversality", t.transversality),
            ("tolerances.immersion", t.immersion),
            ("tolerances.coincidence", t.coincidence),
            ("tolerances.fiber_cluster", t.fiber_cluster),
            ("tolerances.gamma_column", t.gamma_column),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(name, "must be a positive real"));
            }
        }
        if self.grid.density == Some(0) {
            return Err(Error::config("grid.density", "must be positive"));
        }
        if self.budgets.newton_seeds == 0 || self.budgets.fiber_targets == 0 || self.budgets.max_newton_iters == 0 {
            return Err(Error::config("budgets", "seed, target and iteration budgets must be positive"));
        }

        if n != self.manifold.intrinsic_dim() {
            return Err(Error::config(
                "dims.n",
                format!("manifold has dimension {}, got n = {n}", self.manifold.intrinsic_dim()),
            ));
        }
        if m != self.manifold.ambient_dim() {
            return Err(Error::config(
                "dims.m",
                format!("manifold sits in R^{}, got m = {m}", self.manifold.ambient_dim()),
            ));
        }
        let f = self
            .base_map
            .build()
            .map_err(|e| Error::config("base_map", e.to_string()))?;
        if f.domain_dim() != m {
            return Err(Error::config(
                "base_map",
                format!("domain R^{} does not match m = {m}", f.domain_dim()),
            ));
        }
        if f.codomain_dim() != l {
            return Err(Error::config(
                "dims.l",
                format!("base map targets R^{}, got l = {l}", f.codomain_dim()),
            ));
        }
        let central = matches!(self.sampling, Sampling::CentralFromLinear | Sampling::CentralUniform)
            || self.scenario == Scenario::GdsmAnalog;
        if central && self.base_map.gdsm_spec().is_none() {
            return Err(Error::config(
                "sampling",
                "central-point sampling needs a gdsm, distance_squared or lorentzian base map",
            ));
        }
        if self.sampling == Sampling::CentralFromLinear {
            if let Some(spec) = self.base_map.gdsm_spec() {
                if spec.a.iter().flatten().any(|&a| a == 0.0) {
                    return Err(Error::config("base_map.a", "psi is not invertible when some a_ij = 0"));
                }
            }
        }

        let scenario = if self.scenario == Scenario::GdsmAnalog {
            match self.analog_of {
                None => return Err(Error::config("analog_of", "gdsm_analog needs the scenario to compare")),
                Some(Scenario::GdsmAnalog) => {
                    return Err(Error::config("analog_of", "cannot nest gdsm_analog"))
                }
                Some(s) => s,
            }
        } else {
            self.scenario
        };
        self.validate_scenario(scenario, n, l)
    }

    fn validate_scenario(&self, scenario: Scenario, n: usize, l: usize) -> Result<()> {
        match scenario {
            Scenario::Morse if l != 1 => Err(Error::config("dims.l", "morse requires ℓ = 1")),
            Scenario::WhitneyUmbrella if n < 2 || l != 2 * n - 1 => Err(Error::config(
                "dims.l",
                "whitney_umbrella requires (n, ℓ) = (n, 2n - 1) with n >= 2",
            )),
            Scenario::Immersion if l < 2 * n => Err(Error::config("dims.l", "immersion requires ℓ >= 2n")),
            Scenario::Injectivity if l <= 2 * n => Err(Error::config("dims.l", "injectivity requires ℓ > 2n")),
            Scenario::Embedding if l <= 2 * n => Err(Error::config("dims.l", "embedding requires ℓ > 2n")),
            Scenario::Embedding if !crate::zoo::chart_atlas(&self.manifold)?.compact => {
                Err(Error::config("manifold", "embedding requires a compact manifold"))
            }
            Scenario::NormalCrossings if self.s_max < 2 => Err(Error::config("s_max", "must be at least 2")),
            Scenario::M2Oracle if self.s < 2 => Err(Error::config("s", "must be at least 2")),
            Scenario::DpLpFibers => {
                let ok = matches!(
                    self.base_map.gdsm_spec().map(|s| s.variant),
                    Some(GdsmVariant::DistanceSquared | GdsmVariant::Lorentzian)
                );
                if !ok {
                    return Err(Error::config(
                        "base_map",
                        "dp_lp_fibers needs a distance_squared or lorentzian base map",
                    ));
                }
                if !matches!(self.manifold, ManifoldKind::Box { .. }) {
                    return Err(Error::config("manifold", "dp_lp_fibers searches a box manifold"));
                }
                if self.dims.m != l {
                    return Err(Error::config("dims.l", "dp_lp_fibers requires m = ℓ"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Sets `key` (dot-separated path) in a JSON document to `value`, parsed as
/// JSON when possible and as a string otherwise.
pub fn apply_override(doc: &mut serde_json::Value, key: &str, value: &str) -> Result<()> {
    let parsed: serde_json::Value =
        serde_json::from_str(value).unwrap_or_else(|_| serde_json::Value::String(value.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(Error::config(key, "empty path segment"));
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| Error::config(key, format!("`{}` is not an object", parts[..i].join("."))))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = obj
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn morse_json() -> serde_json::Value {
        serde_json::json!({
            "scenario": "morse",
            "manifold": {"name": "circle", "m": 2},
            "base_map": {"name": "distance_squared", "p": [[0.0, 0.0]]},
            "dims": {"n": 1, "m": 2, "l": 1},
            "trials": 10,
            "perturbation_scale": 1.0,
            "seed": 7
        })
    }

    #[test]
    fn defaults_are_filled_and_round_trip() {
        let cfg = ExperimentConfig::from_value(morse_json()).unwrap();
        assert_eq!(cfg.tolerances, Tolerances::default());
        assert_eq!(cfg.pass_threshold, 0.99);
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(ExperimentConfig::from_json(&text).unwrap(), cfg);
    }

    #[test]
    fn injectivity_dimension_hypothesis() {
        let mut v = morse_json();
        v["scenario"] = "injectivity".into();
        v["base_map"] = serde_json::json!({"name": "distance_squared", "p": [[0.0, 0.0], [1.0, 0.0]]});
        v["dims"]["l"] = 2.into();
        match ExperimentConfig::from_value(v) {
            Err(Error::Config { field, message }) => {
                assert_eq!(field, "dims.l");
                assert!(message.contains("requires ℓ > 2n"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_and_mistyped_fields_are_named() {
        let mut v = morse_json();
        v["trails"] = 3.into();
        assert!(matches!(ExperimentConfig::from_value(v), Err(Error::Config { field, .. }) if field == "trails"));
        let mut v = morse_json();
        v["dims"]["n"] = 2.into();
        assert!(matches!(ExperimentConfig::from_value(v), Err(Error::Config { field, .. }) if field == "dims.n"));
        let mut v = morse_json();
        v["perturbation_scale"] = 0.0.into();
        assert!(matches!(
            ExperimentConfig::from_value(v),
            Err(Error::Config { field, .. }) if field == "perturbation_scale"
        ));
    }

    #[test]
    fn overrides() {
        let mut v = morse_json();
        apply_override(&mut v, "tolerances.morse_det", "1e-5").unwrap();
        apply_override(&mut v, "trials", "3").unwrap();
        apply_override(&mut v, "scenario", "immersion").unwrap();
        assert_eq!(v["tolerances"]["morse_det"], 1e-5);
        assert_eq!(v["trials"], 3);
        assert_eq!(v["scenario"], "immersion");
        assert!(apply_override(&mut v, "trials.x", "1").is_err());
    }
}
