use std::path::Path;
use std::sync::Arc;

use jumpsignal::simulate::{path_stream, EstimatorResult, Simulator};
use jumpsignal::verify::{run_suite, SuiteOptions};
use jumpsignal::Solver;
use serde::Serialize;

use crate::config::{McSettings, RunConfig};
use crate::output::{json, write_atomic, Csv};
use crate::CliError;

pub const DEFAULT_TRAJECTORIES: usize = 10;

/// `z,phi_star` over the configured signal grid (the signal values of the
/// atoms for discrete marks), preceded by a `# phi_star_0=...` line.
pub fn policy(run: &RunConfig) -> Result<String, CliError> {
    let solver = Solver::new(run.model()?, &run.numerics)?;
    let report = solver.growth_constant()?;
    let mut csv = Csv::with_metadata(&[("phi_star_0", report.phi0)], &["z", "phi_star"]);
    for (z, phi) in &report.signal_table {
        csv.row(&[*z, *phi]);
    }
    Ok(csv.into_string())
}

/// `p,phi_star_0` with the signal probability replaced by each grid value.
pub fn policy_sweep(run: &RunConfig, ps: &[f64]) -> Result<String, CliError> {
    let (_, rho) = run.copula().ok_or_else(|| CliError::usage("--sweep-p needs a gaussian_copula signal model"))?;
    let mut csv = Csv::new(&["p", "phi_star_0"]);
    for &p in ps {
        let solver = Solver::new(run.with_copula(p, rho)?, &run.numerics)?;
        csv.row(&[p, solver.optimal_fraction_no_signal()?]);
    }
    Ok(csv.into_string())
}

/// `p,rho,M` over the product grid, `p` varying slowest. Missing grids fall
/// back to the configured value.
pub fn growth(run: &RunConfig, ps: Option<Vec<f64>>, rhos: Option<Vec<f64>>) -> Result<String, CliError> {
    let (p0, rho0) = run.copula().ok_or_else(|| CliError::usage("growth grids need a gaussian_copula signal model"))?;
    let ps = ps.unwrap_or_else(|| vec![p0]);
    let rhos = rhos.unwrap_or_else(|| vec![rho0]);
    let mut csv = Csv::new(&["p", "rho", "M"]);
    for &p in &ps {
        for &rho in &rhos {
            let report = Solver::new(run.with_copula(p, rho)?, &run.numerics)?.growth_constant()?;
            csv.row(&[p, rho, report.m]);
        }
    }
    Ok(csv.into_string())
}

#[derive(Debug, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SimulationSummary {
    pub estimator: EstimatorResult,
    /// `v(0, x0)` of the optimal policy.
    pub value: f64,
    #[serde(rename = "M")]
    pub m: f64,
    pub phi0: f64,
    pub horizon: f64,
    pub output_steps: usize,
    pub trajectories: Vec<String>,
}

/// Estimates the optimal expected utility, writes the first `trajectories`
/// paths as CSV and `summary.json` into `dir`; returns the summary.
pub fn simulate(run: &RunConfig, mc: McSettings, trajectories: usize, dir: &Path) -> Result<String, CliError> {
    if mc.n_paths < 2 {
        return Err(CliError::usage("simulate needs at least two paths"));
    }
    let cfg = run.model()?;
    let solver = Arc::new(Solver::new(cfg.clone(), &run.numerics)?);
    let report = solver.growth_constant()?;
    let policy = solver.optimal_policy()?;
    let sim = Simulator::new(&cfg);
    let steps = run.numerics.output_steps;
    let estimator = sim.estimate(&policy, mc.n_paths, mc.seed, steps)?;

    std::fs::create_dir_all(dir).map_err(|e| CliError::new("OutputError", format!("{}: {e}", dir.display())))?;
    let count = trajectories.min(mc.n_paths);
    let width = count.saturating_sub(1).to_string().len();
    let mut files = Vec::with_capacity(count);
    for i in 0..count {
        let path = sim.run(&policy, steps, &mut path_stream(mc.seed, i as u64), true)?;
        let name = format!("path_{i:0width$}.csv");
        write_atomic(&dir.join(&name), path.to_csv().as_bytes())?;
        files.push(name);
    }
    let summary = json(&SimulationSummary {
        estimator,
        value: report.value_at(0.0, cfg.market.x0)?,
        m: report.m,
        phi0: report.phi0,
        horizon: cfg.market.horizon,
        output_steps: steps,
        trajectories: files,
    });
    write_atomic(&dir.join("summary.json"), summary.as_bytes())?;
    Ok(summary)
}

/// Verification report as JSON and whether every check passed.
pub fn verify(run: &RunConfig, mc: McSettings) -> Result<(String, bool), CliError> {
    let cfg = run.model()?;
    let options = SuiteOptions { n_paths: mc.n_paths, seed: mc.seed, ..SuiteOptions::default() };
    let report = run_suite(&cfg, &run.numerics, &options);
    Ok((json(&report), report.summary))
}

#[derive(Debug, Serialize)]
struct ValueOutput {
    #[serde(rename = "M")]
    m: f64,
    phi0: f64,
    t: f64,
    x: f64,
    v: f64,
}

pub fn value(run: &RunConfig, t: f64, x: f64) -> Result<String, CliError> {
    let report = Solver::new(run.model()?, &run.numerics)?.growth_constant()?;
    let v = report.value_at(t, x)?;
    Ok(json(&ValueOutput { m: report.m, phi0: report.phi0, t, x, v }))
}
