use std::path::{Path, PathBuf};
use std::time::Instant;

use mtm_core::experiments::{escape_time, grid_posterior_mean, run_experiment};
use mtm_core::oracle::{
    check_detailed_balance, check_stationarity, exact_imtm_kernel, exact_rw_mtm_kernel, exact_variable_n_kernel,
    mc_kernel_estimate, DetailedBalanceReport, StationarityReport,
};
use mtm_core::samplers::{chain_rng, imtm_step, rw_mtm_step, variable_n_step};
use mtm_core::{run_chain, Point, SamplerConfig};
use serde::Serialize;

use crate::config::{self, ExperimentFile, GridConfig, OracleConfig, OracleVariant, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{write_manifest, write_summary, write_trace};

pub fn run(config_path: &Path, output: &Path, seed: Option<u64>) -> CliResult<()> {
    let start = Instant::now();
    let mut cfg: RunConfig = config::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let sampler = cfg.sampler()?;
    let target = cfg.model.target();
    let x0 = Point::new(cfg.x0.clone());
    let trace = run_chain(
        &SamplerConfig {
            sampler,
            chain_length: cfg.chain_length,
            seed: cfg.seed,
        },
        &target,
        x0.clone(),
    )?;
    write_trace(output, &trace)?;
    write_manifest(output, "run", &cfg, cfg.seed, start.elapsed())?;
    let tau = escape_time(&trace.states, &x0, &cfg.mu)?;
    println!(
        "{} iterations, acceptance rate {:.4}, tau* {tau}; trace written to {}",
        trace.len(),
        trace.acceptance_rate(),
        output.display()
    );
    Ok(())
}

pub fn experiment(config_path: &Path, output: &Path, seed: Option<u64>) -> CliResult<()> {
    let start = Instant::now();
    let mut cfg: ExperimentFile = config::load(config_path)?;
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    cfg.validate()?;
    let summary = run_experiment(&cfg)?;
    write_summary(output, &summary)?;
    write_manifest(output, "experiment", &cfg, cfg.master_seed, start.elapsed())?;
    let mut incomplete = Vec::new();
    for c in &summary.cells {
        let mse = c.mse.map(|m| format!(", mse {m:.4}")).unwrap_or_default();
        println!(
            "{:<14} sigma {:<6} n {:<5} tau* {:>9.2} ± {:.2}{mse}",
            c.scheme.name(),
            c.sigma,
            c.n_tilde,
            c.mean_tau,
            c.tau_se
        );
        for f in &c.failures {
            eprintln!("  {f}");
        }
        if !c.is_complete() {
            incomplete.push(format!("{} sigma {} n {}", c.scheme.name(), c.sigma, c.n_tilde));
        }
    }
    if incomplete.is_empty() {
        Ok(())
    } else {
        Err(CliError::Runtime(format!("incomplete cells: {}", incomplete.join("; "))))
    }
}

#[derive(Debug, Serialize)]
pub struct OracleReport {
    pub states: usize,
    pub variant: String,
    pub row_sum_defect: f64,
    pub stationarity: StationarityReport,
    pub detailed_balance: DetailedBalanceReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloReport>,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct MonteCarloReport {
    pub samples_per_state: usize,
    pub max_deviation: f64,
    pub bound: f64,
    pub pass: bool,
}

pub fn oracle_report(cfg: &OracleConfig) -> CliResult<OracleReport> {
    let space = cfg.space()?;
    let imtm = cfg.imtm()?;
    let (mut kernel, variant) = match &cfg.variant {
        OracleVariant::RwMtm { tries } => (exact_rw_mtm_kernel(&space, *tries)?, format!("rw-mtm N={tries}")),
        OracleVariant::VariableN { schedule } => (
            exact_variable_n_kernel(&space, schedule)?,
            format!("variable-n {schedule:?}"),
        ),
        OracleVariant::Imtm { weights, .. } => {
            let imtm = imtm.as_ref().expect("imtm variant");
            (
                exact_imtm_kernel(&space, imtm)?,
                format!("imtm {weights:?} P={}", imtm.total_tries()),
            )
        }
    };
    let exact = kernel.clone();
    if let Some(p) = &cfg.perturb {
        if p.row >= space.len() || p.col >= space.len() {
            return Err(CliError::Config("perturbation indices outside the state space".into()));
        }
        kernel = kernel.perturbed(p.row, p.col, p.amount);
    }
    let pi = space.target_pmf();
    let stationarity = check_stationarity(&kernel, pi, cfg.tolerance)?;
    let detailed_balance = check_detailed_balance(&kernel, pi, cfg.tolerance)?;

    let monte_carlo = match cfg.mc_samples {
        None => None,
        Some(n) => {
            let target = space.target();
            let q = space.conditional_proposal();
            let mut rng = chain_rng(cfg.seed, 0);
            let est = match &cfg.variant {
                OracleVariant::RwMtm { tries } => mc_kernel_estimate(
                    |x, r| Ok(rw_mtm_step(x, &target, &q, *tries, r)?.state),
                    &space,
                    n,
                    &mut rng,
                )?,
                OracleVariant::VariableN { schedule } => mc_kernel_estimate(
                    |x, r| Ok(variable_n_step(x, &target, &q, schedule, r)?.state),
                    &space,
                    n,
                    &mut rng,
                )?,
                OracleVariant::Imtm { .. } => {
                    let imtm = imtm.as_ref().expect("imtm variant");
                    mc_kernel_estimate(|x, r| Ok(imtm_step(x, &target, imtm, r)?.state), &space, n, &mut rng)?
                }
            };
            let max_deviation = est.max_abs_difference(&exact)?;
            let bound = 4.0 * (0.25 / n as f64).sqrt();
            Some(MonteCarloReport {
                samples_per_state: n,
                max_deviation,
                bound,
                pass: max_deviation < bound,
            })
        }
    };
    let pass = stationarity.pass && detailed_balance.pass && monte_carlo.as_ref().is_none_or(|m| m.pass);
    Ok(OracleReport {
        states: space.len(),
        variant,
        row_sum_defect: kernel.row_sum_defect(),
        stationarity,
        detailed_balance,
        monte_carlo,
        pass,
    })
}

pub fn oracle_check(config_path: &Path, output: Option<&PathBuf>, seed: Option<u64>) -> CliResult<()> {
    let start = Instant::now();
    let mut cfg: OracleConfig = config::load(config_path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let report = oracle_report(&cfg)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    if let Some(out) = output {
        std::fs::write(out, text + "\n")?;
        write_manifest(out, "oracle-check", &cfg, cfg.seed, start.elapsed())?;
    }
    if report.pass {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!("{} kernel failed verification", report.variant)))
    }
}

#[derive(Debug, Serialize)]
pub struct GridReport {
    pub resolution: usize,
    pub mean: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub within_tolerance: Option<bool>,
}

pub fn grid_report(cfg: &GridConfig) -> CliResult<GridReport> {
    let target = cfg.target.density()?;
    let mean = grid_posterior_mean(&target, &cfg.bounds, cfg.resolution)?.into_inner();
    let delta = match &cfg.reference {
        Some(r) if r.len() != mean.len() => {
            return Err(CliError::Config(format!("reference must have {} coordinates", mean.len())))
        }
        Some(r) => Some(mean.iter().zip(r).map(|(m, r)| m - r).collect::<Vec<_>>()),
        None => None,
    };
    let within_tolerance = match (&delta, cfg.tolerance) {
        (Some(d), Some(tol)) => Some(d.iter().all(|v| v.abs() <= tol)),
        (None, Some(_)) => return Err(CliError::Config("tolerance needs a reference point".into())),
        _ => None,
    };
    Ok(GridReport {
        resolution: cfg.resolution,
        mean,
        reference: cfg.reference.clone(),
        delta,
        within_tolerance,
    })
}

pub fn grid_mean(config_path: &Path, output: Option<&PathBuf>) -> CliResult<()> {
    let start = Instant::now();
    let cfg: GridConfig = config::load(config_path)?;
    let report = grid_report(&cfg)?;
    let text = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{text}");
    if let Some(out) = output {
        std::fs::write(out, text + "\n")?;
        write_manifest(out, "grid-mean", &cfg, 0, start.elapsed())?;
    }
    match report.within_tolerance {
        Some(false) => Err(CliError::CheckFailed("grid mean differs from the reference point".into())),
        _ => Ok(()),
    }
}
