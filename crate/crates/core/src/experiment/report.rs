//! Trial records, reports, their persistence and pooled statistics.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::config::{ExperimentConfig, Scenario};
use crate::error::{Error, Result};

/// Outcome of one sampled perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    /// Seed of this trial's own random stream.
    pub seed: u64,
    /// Sampling arm (`linear`, `central` or `control`) when the scenario has several.
    pub arm: Option<String>,
    pub pass: bool,
    /// Distance of the verdict from its tolerance, in the scenario's own units.
    pub margin: Option<f64>,
    pub witness: Option<serde_json::Value>,
    /// The sampled `π` (or `ψ(p)` for central-point sampling), row by row.
    pub perturbation: Vec<Vec<f64>>,
    pub central_point: Option<Vec<Vec<f64>>>,
    pub details: serde_json::Value,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailingTrial {
    pub trial: usize,
    pub seed: u64,
    pub arm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: Scenario,
    pub config: ExperimentConfig,
    pub trial_count: usize,
    pub pass_count: usize,
    pub pass_rate: f64,
    pub threshold: f64,
    /// Pass rate met and, when requested, the control failed.
    pub passed: bool,
    pub control: Option<TrialRecord>,
    pub control_failed: Option<bool>,
    pub failing: Vec<FailingTrial>,
    pub error_count: usize,
    pub margin_min: Option<f64>,
    pub margin_median: Option<f64>,
    pub notes: Vec<String>,
    pub extras: serde_json::Value,
    pub trials: Vec<TrialRecord>,
}

impl ExperimentReport {
    pub(crate) fn assemble(
        config: ExperimentConfig,
        trials: Vec<TrialRecord>,
        control: Option<TrialRecord>,
        extra_pass: bool,
        notes: Vec<String>,
        extras: serde_json::Value,
    ) -> Self {
        let trial_count = trials.len();
        let pass_count = trials.iter().filter(|t| t.pass).count();
        let pass_rate = pass_count as f64 / trial_count.max(1) as f64;
        let failing = trials
            .iter()
            .filter(|t| !t.pass)
            .map(|t| FailingTrial {
                trial: t.trial,
                seed: t.seed,
                arm: t.arm.clone(),
            })
            .collect();
        let margins: Vec<f64> = trials.iter().filter_map(|t| t.margin).collect();
        let (margin_min, margin_median) = min_and_median(margins);
        let control_failed = control.as_ref().map(|c| !c.pass);
        let passed = pass_rate >= config.pass_threshold && control_failed != Some(false) && extra_pass;
        ExperimentReport {
            scenario: config.scenario,
            threshold: config.pass_threshold,
            config,
            trial_count,
            pass_count,
            pass_rate,
            passed,
            control,
            control_failed,
            failing,
            error_count: trials.iter().filter(|t| t.error.is_some()).count(),
            margin_min,
            margin_median,
            notes,
            extras,
            trials,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    /// Writes `trials.csv` with header `trial,seed,scenario,pass,margin,witness`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["trial", "seed", "scenario", "pass", "margin", "witness"])?;
        for t in &self.trials {
            w.write_record([
                t.trial.to_string(),
                t.seed.to_string(),
                self.scenario.name().to_string(),
                t.pass.to_string(),
                t.margin.map(|m| m.to_string()).unwrap_or_default(),
                t.witness.as_ref().map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `report.json` and `trials.csv` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        self.write_csv(fs::File::create(dir.join("trials.csv"))?)
    }
}

fn min_and_median(mut xs: Vec<f64>) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        return (None, None);
    }
    xs.sort_by(f64::total_cmp);
    (Some(xs[0]), Some(quantile_sorted(&xs, 0.5)))
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(xs: &[f64], q: f64) -> f64 {
    let pos = q * (xs.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    xs[lo] + (xs[hi] - xs[lo]) * (pos - lo as f64)
}

/// Wilson score interval for `successes / n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = successes as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z / denom * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Two-sided pooled two-proportion z-test; returns `(z, p_value)`.
pub fn two_proportion_test(x1: usize, n1: usize, x2: usize, n2: usize) -> (f64, f64) {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    if !(se > 0.0) {
        return (0.0, 1.0);
    }
    let z = (x1 as f64 / n1f - x2 as f64 / n2f) / se;
    let std = Normal::new(0.0, 1.0).expect("standard normal");
    (z, 2.0 * (1.0 - std.cdf(z.abs())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateFailure {
    pub report: usize,
    pub trial: usize,
    pub seed: u64,
    pub arm: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateSummary {
    pub scenario: Scenario,
    pub report_count: usize,
    pub trial_count: usize,
    pub pass_count: usize,
    pub pass_rate: f64,
    /// 95% Wilson score interval of the pooled pass rate.
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub margin_min: Option<f64>,
    pub margin_q05: Option<f64>,
    pub margin_median: Option<f64>,
    pub margin_max: Option<f64>,
    pub failing: Vec<AggregateFailure>,
    pub all_passed: bool,
}

/// Pools reports of a single scenario.
pub fn aggregate(reports: &[ExperimentReport]) -> Result<AggregateSummary> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InvalidSpec("nothing to aggregate".into()))?;
    if let Some(other) = reports.iter().find(|r| r.scenario != first.scenario) {
        return Err(Error::MixedScenario(
            first.scenario.name().into(),
            other.scenario.name().into(),
        ));
    }
    let trial_count: usize = reports.iter().map(|r| r.trial_count).sum();
    let pass_count: usize = reports.iter().map(|r| r.pass_count).sum();
    let (wilson_low, wilson_high) = wilson_interval(pass_count, trial_count, 1.96);
    let mut margins: Vec<f64> = reports
        .iter()
        .flat_map(|r| r.trials.iter().filter_map(|t| t.margin))
        .collect();
    margins.sort_by(f64::total_cmp);
    let q = |p: f64| (!margins.is_empty()).then(|| quantile_sorted(&margins, p));
    let failing = reports
        .iter()
        .enumerate()
        .flat_map(|(i, r)| {
            r.failing.iter().map(move |f| AggregateFailure {
                report: i,
                trial: f.trial,
                seed: f.seed,
                arm: f.arm.clone(),
            })
        })
        .collect();
    Ok(AggregateSummary {
        scenario: first.scenario,
        report_count: reports.len(),
        trial_count,
        pass_count,
        pass_rate: pass_count as f64 / trial_count.max(1) as f64,
        wilson_low,
        wilson_high,
        margin_min: q(0.0),
        margin_q05: q(0.05),
        margin_median: q(0.5),
        margin_max: q(1.0),
        failing,
        all_passed: reports.iter().all(|r| r.passed),
    })
}
