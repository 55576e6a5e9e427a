//! Independent checks of the solver: HJB residuals of the closed-form value
//! function, drift signs of the value process under arbitrary policies,
//! brute-force grid maximization and an exact solver for finite mark spaces.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::model::{utility, AdmissibleInterval, Config, ConditionalLaw, DisintegratedKernel, JumpSignalModel, PolicyField, Signal};
use crate::policy::{maximize_concave, GrowthReport, Numerics, Solver};
use crate::quad::{expect_discrete, expect_normal};
use crate::simulate::Simulator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub check: String,
    pub status: Status,
    pub value: f64,
    pub tolerance: f64,
}

impl CheckResult {
    /// Passes iff `value <= tolerance` (NaN fails).
    pub fn at_most(check: impl Into<String>, value: f64, tolerance: f64) -> Self {
        let status = if value <= tolerance { Status::Pass } else { Status::Fail };
        Self { check: check.into(), status, value, tolerance }
    }

    fn failed(check: impl Into<String>) -> Self {
        Self { check: check.into(), status: Status::Fail, value: f64::NAN, tolerance: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckResult>,
    pub summary: bool,
}

impl VerificationReport {
    pub fn new(checks: Vec<CheckResult>) -> Self {
        let summary = checks.iter().all(|c| c.status == Status::Pass);
        Self { checks, summary }
    }

    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.check == name)
    }
}

/// Derivatives of `v(t, x) = U(x) exp((1-alpha)(r+M)(T-t))`.
struct ValueDerivatives {
    v: f64,
    dt: f64,
    dx: f64,
    dxx: f64,
}

fn derivatives(report: &GrowthReport, t: f64, x: f64) -> ValueDerivatives {
    let v = report.value_unchecked(t, x);
    let a = report.alpha;
    ValueDerivatives {
        v,
        dt: -(1.0 - a) * (report.r + report.m) * v,
        dx: (1.0 - a) * v / x,
        dxx: -a * (1.0 - a) * v / (x * x),
    }
}

/// `E_K[v(t, x(1 + phi eta)) - v(t, x)]` on a slice.
fn expected_value_jump(solver: &Solver, report: &GrowthReport, signal: Signal, t: f64, x: f64, phi: f64) -> Result<f64> {
    let v = report.value_unchecked(t, x);
    let jump = |eta: f64| report.value_unchecked(t, x * (1.0 + phi * eta)) - v;
    match solver.kernel().conditional(signal) {
        Some(ConditionalLaw::Normal { mean, var, mu_hat, sigma_hat }) => expect_normal(
            |y| jump(crate::model::jump_ratio(y, mu_hat, sigma_hat)),
            mean,
            var,
            solver.inner_rule(),
        ),
        Some(ConditionalLaw::Atoms(atoms)) => expect_discrete(jump, &atoms),
        None => Ok(0.0),
    }
}

/// Reference points of the outer signal integral: `(weight, z)` with the
/// signal density folded into the weight.
fn signal_nodes(solver: &Solver) -> Vec<(f64, f64)> {
    match solver.kernel() {
        DisintegratedKernel::Gaussian { signal_mass, .. } => {
            if *signal_mass == 0.0 {
                return Vec::new();
            }
            solver.outer_rule().iter().map(|(z, w)| (w * signal_mass, z)).collect()
        }
        DisintegratedKernel::Discrete { signals, .. } => signals.iter().map(|g| (g.mass, g.z)).collect(),
    }
}

fn diffusive_term(solver: &Solver, d: &ValueDerivatives, x: f64, phi: f64) -> f64 {
    let m = &solver.config().market;
    phi * x * (m.mu - m.r) * d.dx + 0.5 * d.dxx * x * x * phi * phi * m.sigma * m.sigma
}

/// Left-hand side of the HJB equation at `(t, x)` for the candidate value
/// function of `report`; every supremum is recomputed numerically.
pub fn hjb_residual(solver: &Solver, report: &GrowthReport, t: f64, x: f64) -> Result<f64> {
    if !(0.0..report.horizon).contains(&t) || !(x > 0.0) {
        return Err(domain(format!("need 0 <= t < T and x > 0, got t = {t}, x = {x}")));
    }
    let d = derivatives(report, t, x);
    let m = &solver.config().market;
    let tol = solver.tol();
    let no_signal_mass = solver.kernel().no_signal_mass();

    let (_, sup0) = maximize_concave(
        |phi| {
            let jump = if no_signal_mass > 0.0 {
                no_signal_mass * expected_value_jump(solver, report, Signal::Absent, t, x, phi)?
            } else {
                0.0
            };
            Ok(diffusive_term(solver, &d, x, phi) + jump)
        },
        solver.interval(Signal::Absent),
        tol,
    )?;

    let mut outer = 0.0;
    for (w, z) in signal_nodes(solver) {
        let (_, s) = maximize_concave(
            |phi| expected_value_jump(solver, report, Signal::Value(z), t, x, phi),
            solver.interval(Signal::Value(z)),
            tol,
        )?;
        outer += w * s;
    }
    Ok(d.dt + m.r * x * d.dx + sup0 + outer)
}

/// Drift of `v(t, X_t)` under `field` at `(t, x)`, divided by `|v(t, x)|`.
pub fn drift_at_point(solver: &Solver, report: &GrowthReport, field: &PolicyField, t: f64, x: f64) -> Result<f64> {
    let d = derivatives(report, t, x);
    let m = &solver.config().market;
    let phi0 = field.no_signal();
    solver.interval(Signal::Absent).check(phi0)?;
    let mut drift = d.dt + d.dx * x * (phi0 * (m.mu - m.r) + m.r) + 0.5 * d.dxx * x * x * phi0 * phi0 * m.sigma * m.sigma;
    let no_signal_mass = solver.kernel().no_signal_mass();
    if no_signal_mass > 0.0 {
        drift += no_signal_mass * expected_value_jump(solver, report, Signal::Absent, t, x, phi0)?;
    }
    for (w, z) in signal_nodes(solver) {
        let phi = field.at_signal(z);
        solver.interval(Signal::Value(z)).check(phi)?;
        drift += w * expected_value_jump(solver, report, Signal::Value(z), t, x, phi)?;
    }
    Ok(drift / d.v.abs())
}

/// [`drift_at_point`] at `(0, x0)`; by homotheticity and the exponential
/// time dependence the normalized drift is the same at every `(t, x)`.
pub fn drift_at(solver: &Solver, report: &GrowthReport, field: &PolicyField) -> Result<f64> {
    drift_at_point(solver, report, field, 0.0, solver.config().market.x0)
}

/// Best point of a uniform grid of `points` points on a bounded interval;
/// ties go to the smaller point.
pub fn grid_oracle<F>(mut f: F, interval: AdmissibleInterval, points: usize) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !interval.is_bounded() {
        return Err(domain("grid oracle needs a bounded interval"));
    }
    if points < 2 {
        return Err(domain("grid oracle needs at least two points"));
    }
    let (lo, hi) = (interval.lo, interval.hi);
    let mut best = (lo, f(lo)?);
    for i in 1..points {
        let x = if i == points - 1 { hi } else { lo + (hi - lo) * i as f64 / (points - 1) as f64 };
        let v = f(x)?;
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// Repeated [`grid_oracle`] passes, each zooming into the two cells around
/// the previous best point.
pub fn refined_grid_oracle<F>(mut f: F, interval: AdmissibleInterval, first_pass: usize, resolution: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut best = grid_oracle(&mut f, interval, first_pass)?;
    let mut h = (interval.hi - interval.lo) / (first_pass - 1) as f64;
    while h > resolution {
        let window = AdmissibleInterval::new((best.0 - h).max(interval.lo), (best.0 + h).min(interval.hi));
        let pass = grid_oracle(&mut f, window, 1001)?;
        if pass.1 > best.1 || (pass.1 == best.1 && pass.0 < best.0) {
            best = pass;
        }
        h = (window.hi - window.lo) / 1000.0;
    }
    Ok(best)
}

/// Grid resolution targeted by [`discrete_exact_solution`].
pub const ORACLE_RESOLUTION: f64 = 1e-10;
pub const ORACLE_FIRST_PASS: usize = 1_000_001;

/// Growth constant and optimal fractions of a finite-mark model, computed
/// from finite sums and dense grids only.
pub fn discrete_exact_solution(cfg: &Config) -> Result<GrowthReport> {
    let atoms = match &cfg.model {
        JumpSignalModel::DiscreteMarks { atoms } => atoms.clone(),
        JumpSignalModel::GaussianCopula { .. } => return Err(domain("exact solution needs discrete marks")),
    };
    let alpha = cfg.alpha();
    let m = &cfg.market;
    let u1 = utility(1.0, alpha);

    // group by signal without going through the kernel
    let mut zs: Vec<f64> = Vec::new();
    for a in &atoms {
        if !zs.contains(&a.zeta) {
            zs.push(a.zeta);
        }
    }
    let slice = |z: f64| -> (f64, Vec<(f64, f64)>) {
        let members: Vec<_> = atoms.iter().filter(|a| a.zeta == z).collect();
        let mass: f64 = members.iter().map(|a| a.weight).sum();
        (mass, members.iter().map(|a| (a.weight / mass, a.eta)).collect())
    };
    let bounds = |law: &[(f64, f64)]| {
        let lo = law.iter().filter(|(_, e)| *e > 0.0).map(|(_, e)| -1.0 / e).fold(f64::NEG_INFINITY, f64::max);
        let hi = law.iter().filter(|(_, e)| *e < 0.0).map(|(_, e)| -1.0 / e).fold(f64::INFINITY, f64::min);
        AdmissibleInterval::new(lo, hi)
    };
    let gain = |law: &[(f64, f64)], phi: f64| expect_discrete(|eta| utility(1.0 + phi * eta, alpha) - u1, law);

    let a = m.mu - m.r;
    let b = 0.5 * alpha * m.sigma * m.sigma;
    let (phi0, no_signal_value) = if zs.contains(&0.0) {
        let (mass, law) = slice(0.0);
        let interval = bounds(&law);
        if !interval.is_bounded() {
            return Err(domain("exact solution needs a two-sided no-signal slice"));
        }
        refined_grid_oracle(|phi| Ok(a * phi - b * phi * phi + mass * gain(&law, phi)?), interval, ORACLE_FIRST_PASS, ORACLE_RESOLUTION)?
    } else {
        // pure quadratic; its maximizer lies in [-|a|/b, |a|/b]
        let r = a.abs() / b + 1.0;
        refined_grid_oracle(|phi| Ok(a * phi - b * phi * phi), AdmissibleInterval::new(-r, r), ORACLE_FIRST_PASS, ORACLE_RESOLUTION)?
    };

    let mut signal_value = 0.0;
    let mut signal_table = Vec::new();
    for &z in zs.iter().filter(|z| **z != 0.0) {
        let (mass, law) = slice(z);
        let interval = bounds(&law);
        if !interval.is_bounded() {
            return Err(domain(format!("exact solution needs a two-sided slice at signal {z}")));
        }
        let (phi, value) = refined_grid_oracle(|phi| Ok(mass * gain(&law, phi)?), interval, ORACLE_FIRST_PASS, ORACLE_RESOLUTION)?;
        signal_value += value;
        signal_table.push((z, phi));
    }
    Ok(GrowthReport {
        m: no_signal_value + signal_value,
        phi0,
        no_signal_value,
        signal_value,
        signal_table,
        r: m.r,
        alpha,
        horizon: m.horizon,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteOptions {
    pub hjb_points: usize,
    pub drift_perturbations: usize,
    pub chords: usize,
    pub slope_points: usize,
    /// Monte-Carlo paths; `0` skips the Monte-Carlo checks.
    pub n_paths: usize,
    pub mc_perturbations: usize,
    pub seed: u64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            hjb_points: 20,
            drift_perturbations: 100,
            chords: 200,
            slope_points: 50,
            n_paths: 100_000,
            mc_perturbations: 3,
            seed: 42,
        }
    }
}

pub const HJB_TOL: f64 = 1e-6;
pub const DRIFT_OPTIMAL_TOL: f64 = 1e-6;
pub const DRIFT_SIGN_TOL: f64 = 1e-8;
pub const CONCAVITY_TOL: f64 = 1e-9;
pub const SLOPE_TOL: f64 = 1e-6;
pub const ORACLE_M_TOL: f64 = 1e-8;
pub const ORACLE_PHI_TOL: f64 = 2e-6;

fn sample_in(rng: &mut ChaCha8Rng, interval: AdmissibleInterval, around: f64) -> f64 {
    if interval.is_bounded() {
        rng.random_range(interval.lo..=interval.hi)
    } else {
        interval.clamp(around + rng.random_range(-2.0..2.0))
    }
}

/// Random admissible perturbation of `field`.
pub fn perturb_field(solver: &Arc<Solver>, field: &PolicyField, rng: &mut ChaCha8Rng) -> PolicyField {
    let i0 = solver.interval(Signal::Absent);
    let shift0: f64 = rng.random_range(-0.5..0.5);
    let phi0 = i0.clamp(field.no_signal() + shift0);
    let (a, b, c): (f64, f64, f64) = (rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.2..3.0));
    let s = Arc::clone(solver);
    field
        .with_no_signal(phi0)
        .map_response(move |z, phi| s.interval(Signal::Value(z)).clamp(phi + a + b * (c * z).sin()))
}

/// Runs every applicable check; failures become report entries.
pub fn run_suite(cfg: &Config, numerics: &Numerics, options: &SuiteOptions) -> VerificationReport {
    let mut checks = Vec::new();
    if let Err(e) = suite_checks(cfg, numerics, options, &mut checks) {
        checks.push(CheckResult::failed(format!("error: {e}")));
    }
    VerificationReport::new(checks)
}

fn suite_checks(cfg: &Config, numerics: &Numerics, options: &SuiteOptions, checks: &mut Vec<CheckResult>) -> Result<()> {
    let solver = Arc::new(Solver::new(cfg.clone(), numerics)?);
    let report = solver.growth_constant()?;
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    checks.push(CheckResult::at_most("growth_finite", if report.m.is_finite() { 0.0 } else { 1.0 }, 0.0));
    checks.extend(analytic_checks(&solver, &report, options, &mut rng)?);
    checks.extend(optimizer_checks(&solver, &report, options, &mut rng)?);
    if matches!(cfg.model, JumpSignalModel::DiscreteMarks { .. }) {
        checks.extend(oracle_equivalence_checks(&solver, &report)?);
    }
    if options.n_paths >= 2 {
        checks.extend(monte_carlo_checks(&solver, &report, options, &mut rng)?);
    }
    Ok(())
}

/// Terminal condition, HJB residuals and drift signs.
pub fn analytic_checks(
    solver: &Arc<Solver>,
    report: &GrowthReport,
    options: &SuiteOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let horizon = report.horizon;
    let terminal = [0.25, 1.0, 3.0]
        .iter()
        .map(|&x| (report.value_unchecked(horizon, x) - utility(x, report.alpha)).abs())
        .fold(0.0, f64::max);
    out.push(CheckResult::at_most("terminal_condition", terminal, 0.0));

    let mut worst: f64 = 0.0;
    for _ in 0..options.hjb_points {
        let t = rng.random_range(0.0..horizon);
        let x = rng.random_range(0.1..10.0);
        let res = hjb_residual(solver, report, t, x)?;
        worst = worst.max(res.abs() / (1.0 + report.value_unchecked(t, x).abs()));
    }
    out.push(CheckResult::at_most("hjb_residual", worst, HJB_TOL));

    let t = 0.5 * horizon;
    let rel = |x: f64| -> Result<f64> { Ok(hjb_residual(solver, report, t, x)? / report.value_unchecked(t, x).abs()) };
    out.push(CheckResult::at_most("hjb_homotheticity", (rel(1.0)? - rel(2.0)?).abs(), 1e-9));

    let optimal = solver.optimal_policy_exact()?;
    out.push(CheckResult::at_most("drift_optimal", drift_at(solver, report, &optimal)?.abs(), DRIFT_OPTIMAL_TOL));
    let mut max_drift = f64::NEG_INFINITY;
    for _ in 0..options.drift_perturbations {
        let field = perturb_field(solver, &optimal, rng);
        max_drift = max_drift.max(drift_at(solver, report, &field)?);
    }
    if options.drift_perturbations > 0 {
        out.push(CheckResult::at_most("drift_perturbed", max_drift, DRIFT_SIGN_TOL));
    }
    Ok(out)
}

fn signal_probes(solver: &Solver, rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    match solver.kernel() {
        DisintegratedKernel::Gaussian { signal_mass, .. } if *signal_mass > 0.0 => {
            (0..n).map(|_| rng.random_range(-3.0..3.0)).collect()
        }
        DisintegratedKernel::Gaussian { .. } => Vec::new(),
        DisintegratedKernel::Discrete { signals, .. } => (0..n).filter_map(|i| signals.get(i % signals.len().max(1)).map(|g| g.z)).collect(),
    }
}

/// Concavity certificates, slope consistency and grid-oracle agreement.
pub fn optimizer_checks(
    solver: &Arc<Solver>,
    report: &GrowthReport,
    options: &SuiteOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    let i0 = solver.interval(Signal::Absent);
    let center0 = report.phi0;

    let mut violation0: f64 = 0.0;
    let mut violation_z: f64 = 0.0;
    let zs = signal_probes(solver, rng, options.chords);
    for k in 0..options.chords {
        let (a, b, th) = (sample_in(rng, i0, center0), sample_in(rng, i0, center0), rng.random_range(0.0..1.0));
        let lhs = solver.objective_no_signal(th * a + (1.0 - th) * b)?;
        let rhs = th * solver.objective_no_signal(a)? + (1.0 - th) * solver.objective_no_signal(b)?;
        violation0 = violation0.max(rhs - lhs);
        if let Some(&z) = zs.get(k) {
            let iz = solver.interval(Signal::Value(z));
            let (a, b) = (sample_in(rng, iz, 0.5), sample_in(rng, iz, 0.5));
            let lhs = solver.objective_signal(th * a + (1.0 - th) * b, z)?;
            let rhs = th * solver.objective_signal(a, z)? + (1.0 - th) * solver.objective_signal(b, z)?;
            violation_z = violation_z.max(rhs - lhs);
        }
    }
    out.push(CheckResult::at_most("concavity_no_signal", violation0, CONCAVITY_TOL));
    if !zs.is_empty() {
        out.push(CheckResult::at_most("concavity_signal", violation_z, CONCAVITY_TOL));
    }

    out.push(CheckResult::at_most("slope_vs_finite_difference", slope_error(solver, rng, options.slope_points)?, SLOPE_TOL));

    // grid oracle against golden section where the interval is bounded
    let points = 20_001;
    if i0.is_bounded() {
        let spacing = (i0.hi - i0.lo) / (points - 1) as f64;
        let (x, v) = grid_oracle(|phi| solver.objective_no_signal(phi), i0, points)?;
        let (xs, vs) = solver.solve_no_signal()?;
        out.push(CheckResult::at_most("grid_oracle_no_signal_argmax", (x - xs).abs(), spacing));
        out.push(CheckResult::at_most("grid_oracle_no_signal_value", v - vs, 1e-12));
    }
    let mut worst_arg: f64 = 0.0;
    let mut worst_val = f64::NEG_INFINITY;
    let mut spacing: f64 = 0.0;
    for &z in signal_probes(solver, rng, 5).iter() {
        let iz = solver.interval(Signal::Value(z));
        if !iz.is_bounded() {
            continue;
        }
        spacing = spacing.max((iz.hi - iz.lo) / (points - 1) as f64);
        let (x, v) = grid_oracle(|phi| solver.objective_signal(phi, z), iz, points)?;
        let (xs, vs) = solver.solve_signal(z)?;
        worst_arg = worst_arg.max((x - xs).abs());
        worst_val = worst_val.max(v - vs);
    }
    if spacing > 0.0 {
        out.push(CheckResult::at_most("grid_oracle_signal_argmax", worst_arg, spacing));
        out.push(CheckResult::at_most("grid_oracle_signal_value", worst_val, 1e-12));
    }
    Ok(out)
}

/// Largest gap between the analytic objective slopes and central finite
/// differences at `n` random interior points of each objective.
pub fn slope_error(solver: &Solver, rng: &mut ChaCha8Rng, n: usize) -> Result<f64> {
    let h = 1e-5;
    // stay clear of edges where 1 + phi*eta vanishes and the differences blow up
    let interior = |rng: &mut ChaCha8Rng, iv: AdmissibleInterval, around: f64| {
        let inner = if iv.is_bounded() {
            let pad = 0.1 * (iv.hi - iv.lo);
            AdmissibleInterval::new(iv.lo + pad, iv.hi - pad)
        } else {
            AdmissibleInterval::new(iv.lo + 1.0, iv.hi - 1.0)
        };
        sample_in(rng, inner, around)
    };
    let i0 = solver.interval(Signal::Absent);
    let zs = signal_probes(solver, rng, n);
    let mut worst: f64 = 0.0;
    for k in 0..n {
        let phi = interior(rng, i0, 0.5);
        let fd = (solver.objective_no_signal(phi + h)? - solver.objective_no_signal(phi - h)?) / (2.0 * h);
        worst = worst.max((fd - solver.objective_no_signal_slope(phi)?).abs());
        if let Some(&z) = zs.get(k) {
            let iz = solver.interval(Signal::Value(z));
            let phi = interior(rng, iz, 0.5);
            let fd = (solver.objective_signal(phi + h, z)? - solver.objective_signal(phi - h, z)?) / (2.0 * h);
            worst = worst.max((fd - solver.objective_signal_slope(phi, z)?).abs());
        }
    }
    Ok(worst)
}

/// Main pipeline against [`discrete_exact_solution`].
pub fn oracle_equivalence_checks(solver: &Solver, report: &GrowthReport) -> Result<Vec<CheckResult>> {
    let exact = discrete_exact_solution(solver.config())?;
    let mut dphi = (exact.phi0 - report.phi0).abs();
    for ((z1, p1), (z2, p2)) in exact.signal_table.iter().zip(&report.signal_table) {
        if z1 != z2 {
            return Err(domain("signal tables are not aligned"));
        }
        dphi = dphi.max((p1 - p2).abs());
    }
    Ok(vec![
        CheckResult::at_most("oracle_growth_constant", (exact.m - report.m).abs(), ORACLE_M_TOL),
        CheckResult::at_most("oracle_fractions", dphi, ORACLE_PHI_TOL),
    ])
}

/// Expected utility of the optimal policy against `v(0, x0)`, and dominance
/// over perturbed policies (each within three standard errors).
pub fn monte_carlo_checks(
    solver: &Arc<Solver>,
    report: &GrowthReport,
    options: &SuiteOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<CheckResult>> {
    let cfg = solver.config();
    let sim = Simulator::new(cfg);
    let steps = 1;
    let v0 = report.value_at(0.0, cfg.market.x0)?;
    let optimal = solver.optimal_policy()?;
    let est = sim.estimate(&optimal, options.n_paths, options.seed, steps)?;
    let mut out = vec![CheckResult::at_most("mc_value_consistency", (est.mean - v0).abs() / est.stderr, 3.0)];
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..options.mc_perturbations {
        let field = perturb_field(solver, &optimal, rng);
        let e = sim.estimate(&field, options.n_paths, options.seed, steps)?;
        worst = worst.max((e.mean - v0) / e.stderr);
    }
    if options.mc_perturbations > 0 {
        out.push(CheckResult::at_most("mc_perturbed_dominance", worst, 3.0));
    }
    Ok(out)
}
