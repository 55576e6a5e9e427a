//! Exact event-driven Monte Carlo of stock, signals and controlled wealth.
//!
//! Between events both the stock and the wealth are log-normal with a
//! common Brownian increment, so paths are sampled exactly on the merged
//! grid of output times and jump times. Each path owns a ChaCha stream
//! keyed by `(seed, path index)`; the position inside the stream is the
//! draw counter, so results never depend on the number of workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::model::{
    jump_ratio, utility, AdmissibleInterval, Config, DisintegratedKernel, JumpSignalModel, PolicyField, Signal,
};
use crate::par;
use crate::policy::admissible_interval;

/// Random stream for one path.
pub fn path_stream(seed: u64, path_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_index);
    rng
}

/// What generated a jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Mark {
    /// Standard-normal price shock `y`, signal noise `eps`.
    Gaussian { y: f64, eps: f64 },
    /// Index into the discrete atom list.
    Atom { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SignalEvent {
    pub time: f64,
    /// Whether a signal was delivered.
    pub delta: bool,
    /// Signal increment, `0` when `delta` is false.
    pub z: f64,
    pub eta: f64,
    pub mark: Mark,
    /// Fraction applied across the jump.
    pub position: f64,
    pub stock_before: f64,
    pub wealth_before: f64,
    pub wealth_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathRow {
    pub t: f64,
    pub stock: f64,
    pub wealth: f64,
    /// Fraction in force: `phi(0)` on grid rows, the applied fraction on
    /// jump rows.
    pub position: f64,
    pub signal: f64,
    pub delta: u8,
    pub jump: bool,
}

/// One trajectory; jump rows carry post-jump values, pre-jump values live in
/// the matching [`SignalEvent`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimPath {
    pub rows: Vec<PathRow>,
    pub events: Vec<SignalEvent>,
}

impl SimPath {
    pub fn grid_times(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().map(|r| r.t)
    }

    pub fn terminal_wealth(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.wealth)
    }

    pub fn terminal_stock(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.stock)
    }

    /// CSV with header `t,stock,wealth,position,signal,delta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,stock,wealth,position,signal,delta\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{},{}\n", r.t, r.stock, r.wealth, r.position, r.signal, r.delta));
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EstimatorResult {
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub seed: u64,
}

/// Precomputed per-configuration data shared by all paths.
#[derive(Debug, Clone)]
pub struct Simulator {
    cfg: Config,
    kernel: DisintegratedKernel,
    intensity: f64,
    /// Cumulative atom weights normalized to 1 (discrete marks only).
    cumulative: Vec<f64>,
}

struct Draw {
    mark: Mark,
    z: f64,
    eta: f64,
    delta: bool,
}

impl Simulator {
    pub fn new(cfg: &Config) -> Self {
        let kernel = cfg.kernel();
        let intensity = kernel.total_mass();
        let cumulative = match &cfg.model {
            JumpSignalModel::DiscreteMarks { atoms } => {
                let total: f64 = atoms.iter().map(|a| a.weight).sum();
                let mut acc = 0.0;
                atoms
                    .iter()
                    .map(|a| {
                        acc += a.weight / total;
                        acc
                    })
                    .collect()
            }
            JumpSignalModel::GaussianCopula { .. } => Vec::new(),
        };
        Self { cfg: cfg.clone(), kernel, intensity, cumulative }
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    fn draw_mark<R: Rng>(&self, rng: &mut R) -> Draw {
        match &self.cfg.model {
            JumpSignalModel::GaussianCopula { p, rho } => {
                let y: f64 = StandardNormal.sample(rng);
                let eps: f64 = StandardNormal.sample(rng);
                let u: f64 = rng.random();
                let delta = u < *p;
                let z = if delta { rho * y + (1.0 - rho * rho).sqrt() * eps } else { 0.0 };
                let m = &self.cfg.market;
                Draw { mark: Mark::Gaussian { y, eps }, z, eta: jump_ratio(y, m.mu_hat, m.sigma_hat), delta }
            }
            JumpSignalModel::DiscreteMarks { atoms } => {
                let u: f64 = rng.random();
                let index = self.cumulative.iter().position(|&c| u < c).unwrap_or(atoms.len() - 1);
                let a = atoms[index];
                Draw { mark: Mark::Atom { index }, z: a.zeta, eta: a.eta, delta: a.zeta != 0.0 }
            }
        }
    }

    fn interval(&self, signal: Signal) -> AdmissibleInterval {
        admissible_interval(&self.kernel, signal)
    }

    /// Simulates one path on `output_steps` uniform steps plus jump times.
    /// With `record == false` only the terminal row is kept; the random
    /// stream is consumed identically either way.
    pub fn run<R: Rng>(&self, policy: &PolicyField, output_steps: usize, rng: &mut R, record: bool) -> Result<SimPath> {
        if output_steps < 1 {
            return Err(domain("output_steps must be positive"));
        }
        let m = &self.cfg.market;
        let horizon = m.horizon;
        let phi0 = policy.no_signal();
        let no_signal_interval = self.interval(Signal::Absent);
        if !no_signal_interval.contains(phi0) {
            return Err(Error::InadmissiblePolicy(format!(
                "no-signal fraction {phi0} outside [{}, {}]",
                no_signal_interval.lo, no_signal_interval.hi
            )));
        }
        let stock_drift = m.mu - 0.5 * m.sigma * m.sigma;
        let wealth_drift = (1.0 - phi0) * m.r + phi0 * m.mu - 0.5 * phi0 * phi0 * m.sigma * m.sigma;
        let wealth_vol = phi0 * m.sigma;

        let mut t = 0.0;
        let mut stock = m.s0;
        let mut wealth = m.x0;
        let mut rows = Vec::with_capacity(if record { output_steps + 8 } else { 1 });
        let mut events = Vec::new();
        let grid_row = |t, stock, wealth| PathRow { t, stock, wealth, position: phi0, signal: 0.0, delta: 0, jump: false };
        if record {
            rows.push(grid_row(0.0, stock, wealth));
        }

        let draw_gap = |rng: &mut R| -> f64 {
            let e: f64 = Exp1.sample(rng);
            e / self.intensity
        };
        let mut next_jump = draw_gap(rng);
        let mut k = 1;
        while k <= output_steps {
            let next_grid = if k == output_steps { horizon } else { horizon * k as f64 / output_steps as f64 };
            let is_jump = next_jump < next_grid;
            let target = if is_jump { next_jump } else { next_grid };
            let dt = target - t;
            if dt > 0.0 {
                let xi: f64 = StandardNormal.sample(rng);
                let dw = dt.sqrt() * xi;
                stock *= (stock_drift * dt + m.sigma * dw).exp();
                wealth *= (wealth_drift * dt + wealth_vol * dw).exp();
            }
            t = target;
            if is_jump {
                let d = self.draw_mark(rng);
                let signal = if d.delta { Signal::Value(d.z) } else { Signal::Absent };
                let position = policy.position(signal);
                let interval = self.interval(signal);
                if !interval.contains(position) {
                    return Err(Error::InadmissiblePolicy(format!(
                        "fraction {position} at signal {} outside [{}, {}]",
                        d.z, interval.lo, interval.hi
                    )));
                }
                let factor = 1.0 + position * d.eta;
                if factor < 0.0 {
                    return Err(Error::InadmissiblePolicy(format!("jump factor {factor} would make wealth negative")));
                }
                let (stock_before, wealth_before) = (stock, wealth);
                wealth = if factor == 0.0 { 0.0 } else { wealth * factor };
                stock *= 1.0 + d.eta;
                if record {
                    events.push(SignalEvent {
                        time: t,
                        delta: d.delta,
                        z: d.z,
                        eta: d.eta,
                        mark: d.mark,
                        position,
                        stock_before,
                        wealth_before,
                        wealth_after: wealth,
                    });
                    rows.push(PathRow {
                        t,
                        stock,
                        wealth,
                        position,
                        signal: d.z,
                        delta: u8::from(d.delta),
                        jump: true,
                    });
                }
                next_jump = t + draw_gap(rng);
            } else {
                // a grid time coinciding with the last jump row is collapsed into it
                if record && rows.last().is_none_or(|r: &PathRow| r.t != t) {
                    rows.push(grid_row(t, stock, wealth));
                }
                k += 1;
            }
        }
        if !record {
            rows.push(grid_row(t, stock, wealth));
        }
        Ok(SimPath { rows, events })
    }

    pub fn terminal_utility(&self, policy: &PolicyField, output_steps: usize, seed: u64, index: u64) -> Result<f64> {
        let mut rng = path_stream(seed, index);
        let path = self.run(policy, output_steps, &mut rng, false)?;
        Ok(utility(path.terminal_wealth(), self.cfg.alpha()))
    }

    pub fn estimate(&self, policy: &PolicyField, n_paths: usize, seed: u64, output_steps: usize) -> Result<EstimatorResult> {
        check_paths(n_paths)?;
        let values = par::map_range(n_paths, |i| self.terminal_utility(policy, output_steps, seed, i as u64));
        summarize(values, seed)
    }

    pub fn estimate_sequential(
        &self,
        policy: &PolicyField,
        n_paths: usize,
        seed: u64,
        output_steps: usize,
    ) -> Result<EstimatorResult> {
        check_paths(n_paths)?;
        let values = par::map_range_sequential(n_paths, |i| self.terminal_utility(policy, output_steps, seed, i as u64));
        summarize(values, seed)
    }
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(domain("need at least two paths"));
    }
    Ok(())
}

fn summarize(values: Vec<Result<f64>>, seed: u64) -> Result<EstimatorResult> {
    let values: Vec<f64> = values.into_iter().collect::<Result<_>>()?;
    let n = values.len();
    let mean = par::compensated_sum(values.iter().copied()) / n as f64;
    let stderr = if mean.is_finite() {
        let ss = par::compensated_sum(values.iter().map(|v| (v - mean) * (v - mean)));
        (ss / (n as f64 - 1.0)).sqrt() / (n as f64).sqrt()
    } else {
        f64::NAN
    };
    Ok(EstimatorResult { mean, stderr, n_paths: n, seed })
}

pub fn simulate_path<R: Rng>(cfg: &Config, policy: &PolicyField, output_steps: usize, rng: &mut R) -> Result<SimPath> {
    Simulator::new(cfg).run(policy, output_steps, rng, true)
}

/// Sample mean and standard error of `U(X_T)` over `n_paths` paths; path
/// `i` uses [`path_stream`]`(seed, i)`. Bit-identical across thread counts.
pub fn estimate_expected_utility(
    cfg: &Config,
    policy: &PolicyField,
    n_paths: usize,
    seed: u64,
    output_steps: usize,
) -> Result<EstimatorResult> {
    Simulator::new(cfg).estimate(policy, n_paths, seed, output_steps)
}

/// Single-threaded reference for [`estimate_expected_utility`].
pub fn estimate_expected_utility_sequential(
    cfg: &Config,
    policy: &PolicyField,
    n_paths: usize,
    seed: u64,
    output_steps: usize,
) -> Result<EstimatorResult> {
    Simulator::new(cfg).estimate_sequential(policy, n_paths, seed, output_steps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Atom;

    fn cfg(p: f64, rho: f64) -> Config {
        Config::reference(p, rho).unwrap()
    }

    #[test]
    fn all_cash_grows_at_riskfree_rate() {
        let mut c = cfg(0.5, 0.8);
        c.market.r = 0.03;
        let policy = PolicyField::constant(0.0);
        for i in 0..20 {
            let path = simulate_path(&c, &policy, 16, &mut path_stream(1, i)).unwrap();
            let want = c.market.x0 * (0.03f64 * c.market.horizon).exp();
            assert!((path.terminal_wealth() / want - 1.0).abs() < 1e-14);
        }
        let c = cfg(0.5, 0.8);
        let est = estimate_expected_utility(&c, &policy, 100, 7, 8).unwrap();
        assert_eq!(est.mean, utility(c.market.x0, 0.6));
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn full_stock_replicates_stock_without_jumps() {
        let mut c = cfg(0.5, 0.8);
        c.market.lambda = 1e-9;
        let policy = PolicyField::constant(1.0);
        for i in 0..20 {
            let path = simulate_path(&c, &policy, 32, &mut path_stream(3, i)).unwrap();
            assert!(path.events.is_empty());
            for r in &path.rows {
                assert_eq!((r.wealth / c.market.x0).ln(), (r.stock / c.market.s0).ln());
            }
        }
    }

    #[test]
    fn no_signals_when_probability_zero() {
        let c = cfg(0.0, 0.8);
        let policy = PolicyField::new(0.4, |_| 1.0);
        let mut count = 0;
        for i in 0..50 {
            let path = simulate_path(&c, &policy, 4, &mut path_stream(5, i)).unwrap();
            for e in &path.events {
                assert!(!e.delta);
                assert_eq!(e.z, 0.0);
                assert_eq!(e.position, 0.4);
                count += 1;
            }
        }
        assert!(count > 0);
    }

    #[test]
    fn path_invariants() {
        let c = cfg(0.5, 0.8);
        let policy = PolicyField::new(0.5, |z| if z > 0.0 { 1.0 } else { 0.0 });
        let path = simulate_path(&c, &policy, 64, &mut path_stream(11, 0)).unwrap();
        assert!(path.grid_times().zip(path.grid_times().skip(1)).all(|(a, b)| a < b));
        assert_eq!(path.rows.first().unwrap().t, 0.0);
        assert_eq!(path.rows.last().unwrap().t, c.market.horizon);
        assert!(path.rows.iter().all(|r| r.wealth >= 0.0 && r.stock > 0.0));
        for e in &path.events {
            assert_eq!(e.wealth_after, e.wealth_before * (1.0 + e.position * e.eta));
        }
        let jump_rows = path.rows.iter().filter(|r| r.jump).count();
        assert_eq!(jump_rows, path.events.len());
        assert_eq!(path.rows.len(), 65 + jump_rows);
    }

    #[test]
    fn inadmissible_positions_are_rejected() {
        let c = cfg(0.5, 0.8);
        let policy = PolicyField::new(0.5, |_| 1.5);
        let err = (0..50).find_map(|i| simulate_path(&c, &policy, 4, &mut path_stream(2, i)).err()).unwrap();
        assert!(matches!(err, Error::InadmissiblePolicy(_)));
        let err = simulate_path(&c, &PolicyField::constant(-0.2), 4, &mut path_stream(2, 0)).unwrap_err();
        assert!(matches!(err, Error::InadmissiblePolicy(_)));
    }

    #[test]
    fn discrete_total_loss_absorbs_wealth() {
        let c = cfg(0.5, 0.0)
            .with_model(JumpSignalModel::DiscreteMarks {
                atoms: vec![Atom { weight: 5.0, eta: -1.0, zeta: 0.0 }, Atom { weight: 5.0, eta: 1.0, zeta: 0.0 }],
            })
            .unwrap();
        let policy = PolicyField::constant(1.0);
        let path = (0..20)
            .map(|i| simulate_path(&c, &policy, 8, &mut path_stream(4, i)).unwrap())
            .find(|p| p.events.iter().any(|e| e.eta == -1.0))
            .unwrap();
        let first = path.events.iter().position(|e| e.eta == -1.0).unwrap();
        assert!(path.events[first..].iter().all(|e| e.wealth_after == 0.0));
        assert_eq!(path.terminal_wealth(), 0.0);
    }

    #[test]
    fn estimator_is_reproducible_and_prefix_consistent() {
        let c = cfg(0.5, 0.8);
        let policy = PolicyField::new(0.5, |z| (0.5 + z).clamp(0.0, 1.0));
        let a = estimate_expected_utility(&c, &policy, 200, 9, 4).unwrap();
        let b = estimate_expected_utility(&c, &policy, 200, 9, 4).unwrap();
        let s = estimate_expected_utility_sequential(&c, &policy, 200, 9, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, s);
        let sim = Simulator::new(&c);
        for i in 0..100 {
            assert_eq!(sim.terminal_utility(&policy, 4, 9, i).unwrap(), sim.terminal_utility(&policy, 4, 9, i).unwrap());
        }
        assert!(estimate_expected_utility(&c, &policy, 1, 9, 4).is_err());
        // recording does not change the stream
        let rec = simulate_path(&c, &policy, 4, &mut path_stream(9, 17)).unwrap();
        assert_eq!(utility(rec.terminal_wealth(), 0.6), sim.terminal_utility(&policy, 4, 9, 17).unwrap());
    }

    #[test]
    fn csv_layout() {
        let c = cfg(0.5, 0.8);
        let path = simulate_path(&c, &PolicyField::constant(0.5), 2, &mut path_stream(0, 0)).unwrap();
        let csv = path.to_csv();
        assert!(csv.starts_with("t,stock,wealth,position,signal,delta\n"));
        assert_eq!(csv.lines().count(), path.rows.len() + 1);
        assert!(!csv.contains('\r'));
    }
}
