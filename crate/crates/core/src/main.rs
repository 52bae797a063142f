//! Command-line front end: run experiments, inspect jets, `s_f`, fibers and
//! pooled reports.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;

use genpert::experiment::{aggregate, apply_override, run_experiment, ExperimentConfig, ExperimentReport};
use genpert::jet::{corank, jet1, max_corank_k0, sigma_codim, sigma_transversality_with, Dimensions};
use genpert::multi::{estimate_sf, fiber_cardinality, FiberOptions, SfBudget};
use genpert::zoo::{chart_atlas, make_gdsm, normal_form, GdsmSpec, ManifoldKind, NormalForm};
use genpert::{Error, Result};

#[derive(Parser)]
#[command(name = "genpert", version, about = "Genericity checks for compositions of perturbed maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write report.json and trials.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override a config field, e.g. `--set tolerances.newton=1e-12`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Print the 1-jet and corank-stratum verdict of a normal form at a point.
    AnalyzeJet {
        /// fold, whitney_umbrella, inclusion or definite_fold.
        #[arg(long)]
        map: String,
        /// Comma-separated coordinates; their number is the source dimension.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        /// Target dimension, needed by `inclusion`.
        #[arg(long)]
        l: Option<usize>,
        /// Stratum index; defaults to the corank at the point (at least 1).
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 1e-8)]
        rank_tol: f64,
    },
    /// Print the s_f profile of a catalog manifold.
    Sf {
        /// circle, sphere2, nodal_cubic or spiral.
        #[arg(long)]
        manifold: String,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 200)]
        random_subclouds: usize,
        #[arg(long, default_value_t = 20_000)]
        sweep_tuples: usize,
    },
    /// Print fiber cardinalities of D_p or L_p on a box.
    Fibers {
        /// distance_squared or lorentzian.
        #[arg(long, default_value = "distance_squared")]
        variant: String,
        /// Central point rows separated by `;`, entries by `,`.
        #[arg(long, allow_hyphen_values = true)]
        p: String,
        /// Target, comma-separated; repeat for several.
        #[arg(long, allow_hyphen_values = true, required = true)]
        y: Vec<String>,
        /// Half-width of the search box.
        #[arg(long, default_value_t = 10.0)]
        radius: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 8)]
        seeds_per_axis: usize,
    },
    /// Pool report.json files (or directories holding one) of a single scenario.
    Report {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        /// Also write the summary here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_vector(field: &str, text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::Config {
                    field: field.into(),
                    message: format!("`{s}`: {e}"),
                })
        })
        .collect()
}

fn parse_matrix(field: &str, text: &str) -> Result<Vec<Vec<f64>>> {
    text.split(';').map(|row| parse_vector(field, row)).collect()
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(config: &Path, out: &Path, overrides: &[String], seed: Option<u64>, trials: Option<usize>) -> Result<bool> {
    let text = std::fs::read_to_string(config)?;
    let mut doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Config {
        field: "<document>".into(),
        message: e.to_string(),
    })?;
    for kv in overrides {
        let (key, value) = kv.split_once('=').ok_or_else(|| Error::Config {
            field: kv.clone(),
            message: "overrides take the form key=value".into(),
        })?;
        apply_override(&mut doc, key, value)?;
    }
    if let Some(s) = seed {
        apply_override(&mut doc, "seed", &s.to_string())?;
    }
    if let Some(t) = trials {
        apply_override(&mut doc, "trials", &t.to_string())?;
    }
    let cfg = ExperimentConfig::from_value(doc)?;
    let start = Instant::now();
    let report = run_experiment(&cfg)?;
    let wall = start.elapsed().as_secs_f64();
    report.write_to(out)?;
    std::fs::write(
        out.join("timing.json"),
        serde_json::to_string_pretty(&json!({"wall_time_s": wall, "trials": report.trial_count}))? + "\n",
    )?;
    println!(
        "{}: {}/{} passed (rate {:.4}, threshold {}){}{} -> {}",
        report.scenario.name(),
        report.pass_count,
        report.trial_count,
        report.pass_rate,
        report.threshold,
        match report.control_failed {
            Some(true) => ", control failed as expected",
            Some(false) => ", CONTROL PASSED",
            None => "",
        },
        if report.passed { "" } else { " [FAIL]" },
        out.display()
    );
    Ok(report.passed)
}

fn analyze_jet(map: &str, point: &str, l: Option<usize>, k: Option<usize>, tol: f64, rank_tol: f64) -> Result<bool> {
    let t = parse_vector("point", point)?;
    let g = normal_form(NormalForm::from_name(map, t.len(), l)?)?;
    if g.domain_dim() != t.len() {
        return Err(Error::Config {
            field: "point".into(),
            message: format!("{map} needs {} coordinates", g.domain_dim()),
        });
    }
    let jet = jet1(&g, &t)?;
    let c = corank(&jet.jac, rank_tol);
    let dims = Dimensions::new(g.domain_dim(), g.codomain_dim())?;
    let k = k.unwrap_or(c.max(1));
    let verdict = sigma_transversality_with(&g, &t, k, tol, rank_tol)?;
    print_json(&json!({
        "map": g.label(),
        "n": dims.n,
        "l": dims.l,
        "jet": jet,
        "corank": c,
        "k": k,
        "sigma_codim": sigma_codim(dims, k)?,
        "k0": max_corank_k0(dims),
        "verdict": verdict,
    }))?;
    Ok(true)
}

fn sf(manifold: &str, m: usize, seed: u64, random_subclouds: usize, sweep_tuples: usize) -> Result<bool> {
    let kind: ManifoldKind = serde_json::from_value(json!({"name": manifold, "m": m})).map_err(|e| Error::Config {
        field: "manifold".into(),
        message: e.to_string(),
    })?;
    let profile = estimate_sf(
        &chart_atlas(&kind)?,
        &SfBudget {
            random_subclouds,
            sweep_tuples,
            seed,
        },
    )?;
    print_json(&profile)?;
    Ok(profile.bound_check)
}

fn fibers(variant: &str, p: &str, ys: &[String], radius: f64, tol: f64, seeds_per_axis: usize) -> Result<bool> {
    let p = parse_matrix("p", p)?;
    let spec = match variant {
        "distance_squared" => GdsmSpec::distance_squared(p),
        "lorentzian" => GdsmSpec::lorentzian(p),
        other => {
            return Err(Error::Config {
                field: "variant".into(),
                message: format!("unknown variant `{other}`"),
            })
        }
    };
    let f = make_gdsm(&spec)?;
    let m = f.domain_dim();
    let opts = FiberOptions {
        seeds_per_axis,
        ..FiberOptions::default()
    };
    let mut out = Vec::new();
    for y in ys {
        let y = parse_vector("y", y)?;
        let r = fiber_cardinality(&f, &y, &vec![-radius; m], &vec![radius; m], tol, &opts)?;
        out.push(json!({"y": y, "count": r.count, "points": r.points}));
    }
    print_json(&out)?;
    Ok(true)
}

fn report(inputs: &[PathBuf], out: Option<&Path>) -> Result<bool> {
    let reports = inputs
        .iter()
        .map(|p| {
            let file = if p.is_dir() { p.join("report.json") } else { p.clone() };
            ExperimentReport::load(&file)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = aggregate(&reports)?;
    print_json(&summary)?;
    if let Some(path) = out {
        std::fs::write(path, serde_json::to_string_pretty(&summary)? + "\n")?;
    }
    Ok(summary.all_passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run {
            config,
            out,
            overrides,
            seed,
            trials,
        } => run(config, out, overrides, *seed, *trials),
        Command::AnalyzeJet {
            map,
            point,
            l,
            k,
            tol,
            rank_tol,
        } => analyze_jet(map, point, *l, *k, *tol, *rank_tol),
        Command::Sf {
            manifold,
            m,
            seed,
            random_subclouds,
            sweep_tuples,
        } => sf(manifold, *m, *seed, *random_subclouds, *sweep_tuples),
        Command::Fibers {
            variant,
            p,
            y,
            radius,
            tol,
            seeds_per_axis,
        } => fibers(variant, p, y, *radius, *tol, *seeds_per_axis),
        Command::Report { inputs, out } => report(inputs, out.as_deref()),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
