//! Optimal fractions, the growth constant `M` and the value function.
//!
//! With power utility the value function is `U(x exp((r + M)(T - t)))`.
//! `M` is the sum of two parts: the supremum over no-signal fractions of
//! the diffusive mean-variance term plus the unannounced-jump term, and the
//! integral over signals `z` of the supremum of the announced-jump term.
//! The order "integrate the suprema" in the second part is what lets the
//! investor react to each signal individually.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::model::{
    jump_ratio, utility, AdmissibleInterval, Config, ConditionalLaw, DisintegratedKernel, PolicyField, Signal,
};
use crate::par;
use crate::quad::{self, expect_discrete, expect_normal, QuadratureRule};

pub const DEFAULT_TOL: f64 = 1e-8;
/// Largest |phi| the bracket expansion may reach on an unbounded interval.
pub const BRACKET_CAP: f64 = 1e6;
/// Standard-normal tail cut of the outer signal integral.
pub const PANEL_TAIL: f64 = 12.0;
pub const PANEL_WIDTH: f64 = 4.0;
const KINK_SCAN_POINTS: usize = 481;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct Numerics {
    pub quad_order: usize,
    /// Order of the outer rule integrating over signals.
    pub outer_order: usize,
    pub opt_tol: f64,
    pub z_grid_min: f64,
    pub z_grid_max: f64,
    pub z_grid_points: usize,
    pub output_steps: usize,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            quad_order: quad::DEFAULT_ORDER,
            outer_order: quad::DEFAULT_ORDER,
            opt_tol: DEFAULT_TOL,
            z_grid_min: -3.0,
            z_grid_max: 3.0,
            z_grid_points: 61,
            output_steps: 256,
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        if self.quad_order < 1 || self.outer_order < 1 {
            return Err(domain("quadrature orders must be positive"));
        }
        if !(self.opt_tol > 0.0) || !self.opt_tol.is_finite() {
            return Err(domain(format!("opt_tol must be positive, got {}", self.opt_tol)));
        }
        if !(self.z_grid_min < self.z_grid_max) || !self.z_grid_min.is_finite() || !self.z_grid_max.is_finite() {
            return Err(domain("need finite z_grid_min < z_grid_max"));
        }
        if self.z_grid_points < 1 || self.output_steps < 1 {
            return Err(domain("z_grid_points and output_steps must be positive"));
        }
        Ok(())
    }

    pub fn z_grid(&self) -> Vec<f64> {
        linspace(self.z_grid_min, self.z_grid_max, self.z_grid_points)
    }
}

/// `n` evenly spaced points from `a` to `b` inclusive (`[a]` when `n == 1`).
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// `U(1 + phi*eta) - U(1)`, computed without cancellation for small
/// `phi*eta`.
#[inline]
pub(crate) fn jump_gain(phi: f64, eta: f64, alpha: f64) -> f64 {
    let e = 1.0 - alpha;
    (e * (phi * eta).ln_1p()).exp_m1() / e
}

/// d/dphi of [`jump_gain`]: `eta (1 + phi*eta)^(-alpha)`.
#[inline]
fn jump_gain_slope(phi: f64, eta: f64, alpha: f64) -> f64 {
    eta * (-alpha * (phi * eta).ln_1p()).exp()
}

fn expect_law(law: &ConditionalLaw, rule: &QuadratureRule, g: impl Fn(f64) -> f64) -> Result<f64> {
    match law {
        ConditionalLaw::Normal { mean, var, mu_hat, sigma_hat } => {
            expect_normal(|y| g(jump_ratio(y, *mu_hat, *sigma_hat)), *mean, *var, rule)
        }
        ConditionalLaw::Atoms(atoms) => expect_discrete(g, atoms),
    }
}

/// Fractions keeping post-jump wealth nonnegative almost surely on the slice.
pub fn admissible_interval(kernel: &DisintegratedKernel, signal: Signal) -> AdmissibleInterval {
    match kernel {
        DisintegratedKernel::Gaussian { no_signal_mass, .. } => match signal {
            // log-normal jumps have full support on (-1, inf)
            Signal::Value(_) => AdmissibleInterval::UNIT,
            Signal::Absent if *no_signal_mass > 0.0 => AdmissibleInterval::UNIT,
            Signal::Absent => AdmissibleInterval::REAL_LINE,
        },
        DisintegratedKernel::Discrete { .. } => match kernel.conditional(signal) {
            Some(ConditionalLaw::Atoms(atoms)) => atoms_interval(&atoms),
            _ => AdmissibleInterval::REAL_LINE,
        },
    }
}

fn atoms_interval(atoms: &[(f64, f64)]) -> AdmissibleInterval {
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for &(p, eta) in atoms {
        if p <= 0.0 {
            continue;
        }
        if eta > 0.0 {
            lo = lo.max(-1.0 / eta);
        } else if eta < 0.0 {
            hi = hi.min(-1.0 / eta);
        }
    }
    AdmissibleInterval::new(lo, hi)
}

/// Maximizes a concave `f` over `interval` to argument accuracy `tol` by
/// golden-section search. Infinite endpoints are handled by doubling the
/// window until the midpoint dominates both ends. The interior candidate is
/// compared against the finite window ends, preferring the smaller fraction
/// on ties.
pub fn maximize_concave<F>(mut f: F, interval: AdmissibleInterval, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(tol > 0.0) {
        return Err(domain(format!("tolerance must be positive, got {tol}")));
    }
    let (lo, hi) = (interval.lo, interval.hi);
    let (mut a, mut c) = match (lo.is_finite(), hi.is_finite()) {
        (true, true) => (lo, hi),
        (true, false) => (lo, lo + 3.0),
        (false, true) => (hi - 3.0, hi),
        (false, false) => (-1.0, 2.0),
    };
    if a == c {
        return Ok((a, f(a)?));
    }
    loop {
        let b = 0.5 * (a + c);
        let (fa, fb, fc) = (f(a)?, f(b)?, f(c)?);
        let grow_right = c < hi && fc > fb;
        let grow_left = a > lo && fa > fb;
        if !grow_right && !grow_left {
            break;
        }
        let width = c - a;
        if grow_right {
            c = (c + width).min(hi);
        }
        if grow_left {
            a = (a - width).max(lo);
        }
        if a.abs() > BRACKET_CAP || c.abs() > BRACKET_CAP {
            return Err(Error::BracketFailure(BRACKET_CAP));
        }
    }

    let (a0, c0) = (a, c);
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = c - INV_PHI * (c - a);
    let mut x2 = a + INV_PHI * (c - a);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while c - a > tol {
        if f1 >= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - INV_PHI * (c - a);
            f1 = f(x1)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (c - a);
            f2 = f(x2)?;
        }
    }
    let mut best = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if a0 == lo {
        let fl = f(a0)?;
        if fl >= best.1 {
            best = (a0, fl);
        }
    }
    if c0 == hi {
        let fh = f(c0)?;
        if fh > best.1 {
            best = (c0, fh);
        }
    }
    Ok(best)
}

/// [`maximize_concave`] preceded by the first-order test at finite ends:
/// a concave objective with nonpositive slope at `lo` (nonnegative at `hi`)
/// is maximized there. This resolves boundary optima exactly where the
/// value comparison alone cannot beat rounding. Infinite or failed slopes
/// (a wealth factor vanishing at that end) skip the test.
fn solve_with_boundary_check<F, G>(mut f: F, slope: G, interval: AdmissibleInterval, tol: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
    G: Fn(f64) -> Result<f64>,
{
    let finite_slope = |phi: f64| slope(phi).ok().filter(|s| s.is_finite());
    if interval.lo.is_finite() && finite_slope(interval.lo).is_some_and(|s| s <= 0.0) {
        return Ok((interval.lo, f(interval.lo)?));
    }
    if interval.hi.is_finite() && finite_slope(interval.hi).is_some_and(|s| s >= 0.0) {
        return Ok((interval.hi, f(interval.hi)?));
    }
    maximize_concave(f, interval, tol)
}

/// Bundles a validated configuration with the quadrature rules and the
/// optimizer tolerance.
#[derive(Debug, Clone)]
pub struct Solver {
    cfg: Config,
    kernel: DisintegratedKernel,
    inner: QuadratureRule,
    outer: QuadratureRule,
    tol: f64,
    z_grid: Vec<f64>,
}

impl Solver {
    /// Inner expectations use Gauss–Hermite of `quad_order`; the outer signal
    /// integral uses [`Solver::signal_panels`] with `outer_order` nodes per
    /// panel.
    pub fn new(cfg: Config, numerics: &Numerics) -> Result<Self> {
        numerics.validate()?;
        let inner = quad::gauss_hermite(numerics.quad_order)?;
        let mut solver = Self::with_rules(cfg, inner.clone(), inner, numerics.opt_tol).with_z_grid(numerics.z_grid());
        if matches!(solver.kernel, DisintegratedKernel::Gaussian { signal_mass, .. } if signal_mass > 0.0) {
            solver.outer = quad::normal_panels(numerics.outer_order, &solver.signal_panels()?)?;
        }
        Ok(solver)
    }

    /// Breakpoints for the outer signal integral of the Gaussian model: the
    /// [`Solver::signal_kinks`] plus a uniform split of `[-Z, Z]` into panels
    /// no wider than [`PANEL_WIDTH`].
    pub fn signal_panels(&self) -> Result<Vec<f64>> {
        let span = self.panel_span()?;
        let mut breaks = linspace(-span, span, (2.0 * span / PANEL_WIDTH).ceil() as usize + 1);
        breaks.extend(self.signal_kinks()?);
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|b, a| *b - *a < 1e-12);
        Ok(breaks)
    }

    pub fn with_rules(cfg: Config, inner: QuadratureRule, outer: QuadratureRule, tol: f64) -> Self {
        let kernel = cfg.kernel();
        Self { cfg, kernel, inner, outer, tol, z_grid: Numerics::default().z_grid() }
    }

    pub fn with_z_grid(mut self, z_grid: Vec<f64>) -> Self {
        self.z_grid = z_grid;
        self
    }

    /// Half-width `Z` of the outer integration range; the tail mass beyond
    /// it stays far below rounding even against the exponential growth of
    /// the objective in `z`.
    fn panel_span(&self) -> Result<f64> {
        match self.kernel {
            DisintegratedKernel::Gaussian { rho, sigma_hat, .. } => {
                Ok(PANEL_TAIL + (1.0 - self.cfg.alpha()).max(0.0) * sigma_hat * rho.abs())
            }
            DisintegratedKernel::Discrete { .. } => Err(domain("signal panels need the gaussian model")),
        }
    }

    /// Signals in `[-Z, Z]` where `phi*(z)` reaches 0 or 1, i.e. where the
    /// signal objective's slope at 0 or at 1 changes sign; the maximized
    /// objective has kinks there. Sorted.
    pub fn signal_kinks(&self) -> Result<Vec<f64>> {
        let span = self.panel_span()?;
        let scan = linspace(-span, span, KINK_SCAN_POINTS);
        let mut kinks = Vec::new();
        for edge in [0.0, 1.0] {
            let mut signs = Vec::with_capacity(scan.len());
            for &z in &scan {
                signs.push(self.objective_signal_slope(edge, z)? > 0.0);
            }
            for (i, w) in signs.windows(2).enumerate() {
                if w[0] != w[1] {
                    let (mut a, mut b) = (scan[i], scan[i + 1]);
                    while b - a > 1e-14 * a.abs().max(1.0) {
                        let mid = 0.5 * (a + b);
                        if (self.objective_signal_slope(edge, mid)? > 0.0) == w[0] {
                            a = mid;
                        } else {
                            b = mid;
                        }
                    }
                    kinks.push(0.5 * (a + b));
                }
            }
        }
        kinks.sort_by(f64::total_cmp);
        Ok(kinks)
    }

    pub fn config(&self) -> &Config {
        &self.cfg
    }

    pub fn kernel(&self) -> &DisintegratedKernel {
        &self.kernel
    }

    pub fn inner_rule(&self) -> &QuadratureRule {
        &self.inner
    }

    pub fn outer_rule(&self) -> &QuadratureRule {
        &self.outer
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn interval(&self, signal: Signal) -> AdmissibleInterval {
        admissible_interval(&self.kernel, signal)
    }

    /// `E_K[U(1 + phi*eta) - U(1)]` on the slice, unscaled.
    fn expected_gain(&self, signal: Signal, phi: f64) -> Result<f64> {
        let alpha = self.cfg.alpha();
        match self.kernel.conditional(signal) {
            Some(law) => expect_law(&law, &self.inner, |eta| jump_gain(phi, eta, alpha)),
            None => Ok(0.0),
        }
    }

    fn expected_gain_slope(&self, signal: Signal, phi: f64) -> Result<f64> {
        let alpha = self.cfg.alpha();
        match self.kernel.conditional(signal) {
            Some(law) => expect_law(&law, &self.inner, |eta| jump_gain_slope(phi, eta, alpha)),
            None => Ok(0.0),
        }
    }

    /// `(mu - r) phi - alpha sigma^2 phi^2 / 2 + nu(zeta = 0) E[U(1+phi eta) - U(1) | no signal]`.
    pub fn objective_no_signal(&self, phi: f64) -> Result<f64> {
        self.interval(Signal::Absent).check(phi)?;
        let m = &self.cfg.market;
        let diffusive = (m.mu - m.r) * phi - 0.5 * self.cfg.alpha() * m.sigma * m.sigma * phi * phi;
        let mass = self.kernel.no_signal_mass();
        if mass == 0.0 {
            return Ok(diffusive);
        }
        Ok(diffusive + mass * self.expected_gain(Signal::Absent, phi)?)
    }

    pub fn objective_no_signal_slope(&self, phi: f64) -> Result<f64> {
        self.interval(Signal::Absent).check(phi)?;
        let m = &self.cfg.market;
        let diffusive = (m.mu - m.r) - self.cfg.alpha() * m.sigma * m.sigma * phi;
        let mass = self.kernel.no_signal_mass();
        if mass == 0.0 {
            return Ok(diffusive);
        }
        Ok(diffusive + mass * self.expected_gain_slope(Signal::Absent, phi)?)
    }

    /// Signal density times `E[U(1+phi eta) - U(1) | signal z]`.
    pub fn objective_signal(&self, phi: f64, z: f64) -> Result<f64> {
        self.interval(Signal::Value(z)).check(phi)?;
        let scale = self.kernel.signal_scale(z);
        if scale == 0.0 {
            return Ok(0.0);
        }
        Ok(scale * self.expected_gain(Signal::Value(z), phi)?)
    }

    pub fn objective_signal_slope(&self, phi: f64, z: f64) -> Result<f64> {
        self.interval(Signal::Value(z)).check(phi)?;
        let scale = self.kernel.signal_scale(z);
        if scale == 0.0 {
            return Ok(0.0);
        }
        Ok(scale * self.expected_gain_slope(Signal::Value(z), phi)?)
    }

    /// `(phi*(0), M^0(phi*(0)))`.
    pub fn solve_no_signal(&self) -> Result<(f64, f64)> {
        solve_with_boundary_check(
            |phi| self.objective_no_signal(phi),
            |phi| self.objective_no_signal_slope(phi),
            self.interval(Signal::Absent),
            self.tol,
        )
    }

    /// `(phi*(z), M^z(phi*(z)))`.
    pub fn solve_signal(&self, z: f64) -> Result<(f64, f64)> {
        solve_with_boundary_check(
            |phi| self.objective_signal(phi, z),
            |phi| self.objective_signal_slope(phi, z),
            self.interval(Signal::Value(z)),
            self.tol,
        )
    }

    pub fn optimal_fraction_no_signal(&self) -> Result<f64> {
        Ok(self.solve_no_signal()?.0)
    }

    pub fn optimal_fraction_signal(&self, z: f64) -> Result<f64> {
        Ok(self.solve_signal(z)?.0)
    }

    /// Integral over signals of the maximized signal objective.
    pub fn signal_growth(&self) -> Result<f64> {
        match &self.kernel {
            DisintegratedKernel::Gaussian { signal_mass, .. } => {
                if *signal_mass == 0.0 {
                    return Ok(0.0);
                }
                let nodes = self.outer.nodes();
                let sups = par::map_range(nodes.len(), |i| self.solve_signal(nodes[i]).map(|s| s.1));
                let mut acc = Vec::with_capacity(sups.len());
                for (w, s) in self.outer.weights().iter().zip(sups) {
                    acc.push(w * s?);
                }
                Ok(par::compensated_sum(acc))
            }
            DisintegratedKernel::Discrete { signals, .. } => {
                let mut acc = Vec::with_capacity(signals.len());
                for g in signals {
                    acc.push(self.solve_signal(g.z)?.1);
                }
                Ok(par::compensated_sum(acc))
            }
        }
    }

    /// Largest signal in `[lo, hi]` at which staying out (`phi*(z) = 0`) is
    /// optimal, found by bisection on the sign of the signal objective's
    /// slope at zero. Assumes the slope is increasing in `z` (positive
    /// correlation). `None` if `phi*(lo) > 0`.
    pub fn disinvestment_threshold(&self, lo: f64, hi: f64) -> Result<Option<f64>> {
        let stays_out = |z: f64| self.objective_signal_slope(0.0, z).map(|s| s <= 0.0);
        if !stays_out(lo)? {
            return Ok(None);
        }
        if stays_out(hi)? {
            return Ok(Some(hi));
        }
        let (mut a, mut b) = (lo, hi);
        while b - a > self.tol {
            let mid = 0.5 * (a + b);
            if stays_out(mid)? {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(Some(a))
    }

    pub fn policy_table(&self, z_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
        par::map_range(z_grid.len(), |i| self.optimal_fraction_signal(z_grid[i]).map(|phi| (z_grid[i], phi)))
            .into_iter()
            .collect()
    }

    pub fn growth_constant(&self) -> Result<GrowthReport> {
        let (phi0, no_signal_value) = self.solve_no_signal()?;
        let signal_value = self.signal_growth()?;
        let m = no_signal_value + signal_value;
        if !m.is_finite() {
            return Err(Error::DivergentGrowth(m));
        }
        let signal_table = match &self.kernel {
            DisintegratedKernel::Gaussian { .. } => self.policy_table(&self.z_grid)?,
            DisintegratedKernel::Discrete { signals, .. } => {
                let zs: Vec<f64> = signals.iter().map(|g| g.z).collect();
                self.policy_table(&zs)?
            }
        };
        Ok(GrowthReport {
            m,
            phi0,
            no_signal_value,
            signal_value,
            signal_table,
            r: self.cfg.market.r,
            alpha: self.cfg.alpha(),
            horizon: self.cfg.market.horizon,
        })
    }

    /// The optimal strategy as a [`PolicyField`]. Gaussian signals are
    /// re-solved on demand at `z` rounded to `1e-3` and memoized; discrete
    /// signals are looked up exactly.
    pub fn optimal_policy(self: &Arc<Self>) -> Result<PolicyField> {
        let phi0 = self.optimal_fraction_no_signal()?;
        match &self.kernel {
            DisintegratedKernel::Gaussian { .. } => {
                let solver = Arc::clone(self);
                let memo = Arc::new(SignalMemo::default());
                Ok(PolicyField::new(phi0, move |z| memo.get_or_solve(&solver, z)))
            }
            DisintegratedKernel::Discrete { signals, .. } => {
                let mut table = Vec::with_capacity(signals.len());
                for g in signals {
                    table.push((g.z, self.optimal_fraction_signal(g.z)?));
                }
                Ok(PolicyField::new(phi0, move |z| {
                    table.iter().find(|(zz, _)| *zz == z).map_or(f64::NAN, |(_, phi)| *phi)
                }))
            }
        }
    }

    /// The optimal strategy re-solved exactly at every requested signal.
    pub fn optimal_policy_exact(self: &Arc<Self>) -> Result<PolicyField> {
        let phi0 = self.optimal_fraction_no_signal()?;
        let solver = Arc::clone(self);
        Ok(PolicyField::new(phi0, move |z| solver.optimal_fraction_signal(z).unwrap_or(f64::NAN)))
    }
}

const MEMO_CAPACITY: usize = 1 << 16;

#[derive(Default)]
struct SignalMemo {
    cache: Mutex<HashMap<i64, f64>>,
}

impl SignalMemo {
    fn get_or_solve(&self, solver: &Solver, z: f64) -> f64 {
        let key = (z * 1e3).round() as i64;
        if let Some(&phi) = self.cache.lock().unwrap().get(&key) {
            return phi;
        }
        // solve outside the lock; racing workers compute the same value
        let phi = solver.optimal_fraction_signal(key as f64 * 1e-3).unwrap_or(f64::NAN);
        let mut cache = self.cache.lock().unwrap();
        if cache.len() >= MEMO_CAPACITY {
            cache.clear();
        }
        cache.insert(key, phi);
        phi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GrowthReport {
    /// Growth constant.
    #[serde(rename = "M")]
    pub m: f64,
    pub phi0: f64,
    /// Maximized no-signal objective.
    pub no_signal_value: f64,
    /// Integrated maximized signal objective.
    pub signal_value: f64,
    pub signal_table: Vec<(f64, f64)>,
    pub r: f64,
    pub alpha: f64,
    pub horizon: f64,
}

impl GrowthReport {
    /// `v(t, x) = x^(1-alpha)/(1-alpha) exp((1-alpha)(r+M)(T-t))`.
    pub fn value_at(&self, t: f64, x: f64) -> Result<f64> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(domain(format!("t = {t} outside [0, {}]", self.horizon)));
        }
        if !(x > 0.0) || !x.is_finite() {
            return Err(domain(format!("wealth must be positive, got {x}")));
        }
        Ok(self.value_unchecked(t, x))
    }

    pub(crate) fn value_unchecked(&self, t: f64, x: f64) -> f64 {
        let e = 1.0 - self.alpha;
        utility(x, self.alpha) * (e * (self.r + self.m) * (self.horizon - t)).exp()
    }
}

pub fn value_function(t: f64, x: f64, report: &GrowthReport) -> Result<f64> {
    report.value_at(t, x)
}

/// Smallest signal probability from which full investment is optimal
/// without a signal, located by bisection on the sign of the no-signal
/// objective's slope at `phi = 1`. `None` if no `p < 1` qualifies.
pub fn full_investment_onset(base: &Config, rho: f64, rule: &QuadratureRule, tol: f64) -> Result<Option<f64>> {
    let slope_at_one = |p: f64| -> Result<f64> {
        let cfg = base.with_model(crate::model::JumpSignalModel::GaussianCopula { p, rho })?;
        let solver = Solver::with_rules(cfg, rule.clone(), rule.clone(), tol);
        solver.objective_no_signal_slope(1.0)
    };
    let top = 1.0 - 1e-12;
    if slope_at_one(top)? < 0.0 {
        return Ok(None);
    }
    if slope_at_one(0.0)? >= 0.0 {
        return Ok(Some(0.0));
    }
    let (mut a, mut b) = (0.0, top);
    while b - a > tol {
        let mid = 0.5 * (a + b);
        if slope_at_one(mid)? >= 0.0 {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(Some(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Atom, JumpSignalModel};
    use approx::assert_abs_diff_eq;

    fn solver(p: f64, rho: f64) -> Solver {
        Solver::new(Config::reference(p, rho).unwrap(), &Numerics::default()).unwrap()
    }

    fn discrete(atoms: &[(f64, f64, f64)]) -> Solver {
        let cfg = Config::reference(0.5, 0.0)
            .unwrap()
            .with_model(JumpSignalModel::DiscreteMarks {
                atoms: atoms.iter().map(|&(weight, eta, zeta)| Atom { weight, eta, zeta }).collect(),
            })
            .unwrap();
        Solver::new(cfg, &Numerics::default()).unwrap()
    }

    #[test]
    fn gaussian_intervals() {
        let s = solver(0.5, 0.8);
        assert_eq!(s.interval(Signal::Value(0.7)), AdmissibleInterval::UNIT);
        assert_eq!(s.interval(Signal::Absent), AdmissibleInterval::UNIT);
        let s = solver(1.0, 0.8);
        assert_eq!(s.interval(Signal::Absent), AdmissibleInterval::REAL_LINE);
    }

    #[test]
    fn discrete_interval_two_atoms() {
        let s = discrete(&[(1.0, 1.0, 2.0), (1.0, -0.5, 2.0)]);
        assert_eq!(s.interval(Signal::Value(2.0)), AdmissibleInterval::new(-1.0, 2.0));
        assert_eq!(s.interval(Signal::Absent), AdmissibleInterval::REAL_LINE);
    }

    #[test]
    fn maximize_examples() {
        let (x, _) = maximize_concave(|x| Ok(-(x - 0.3) * (x - 0.3)), AdmissibleInterval::UNIT, 1e-8).unwrap();
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-8);
        let (x, v) = maximize_concave(Ok, AdmissibleInterval::UNIT, 1e-8).unwrap();
        assert_eq!((x, v), (1.0, 1.0));
        let (x, _) = maximize_concave(|x| Ok(-x), AdmissibleInterval::UNIT, 1e-8).unwrap();
        assert_eq!(x, 0.0);
        // ties go to the smaller fraction
        let (x, _) = maximize_concave(|_| Ok(0.0), AdmissibleInterval::UNIT, 1e-8).unwrap();
        assert_eq!(x, 0.0);
        // unbounded
        let (x, _) = maximize_concave(|x| Ok(-(x - 1234.5).powi(2)), AdmissibleInterval::REAL_LINE, 1e-8).unwrap();
        assert_abs_diff_eq!(x, 1234.5, epsilon = 1e-6);
        let (x, _) = maximize_concave(|x| Ok(-(x + 40.0).powi(2)), AdmissibleInterval::new(-1e9, 5.0), 1e-8).unwrap();
        assert_abs_diff_eq!(x, -40.0, epsilon = 1e-6);
        let err = maximize_concave(Ok, AdmissibleInterval::REAL_LINE, 1e-8).unwrap_err();
        assert_eq!(err, Error::BracketFailure(BRACKET_CAP));
        assert!(maximize_concave(Ok, AdmissibleInterval::UNIT, 0.0).is_err());
        let (x, _) = maximize_concave(|x| Ok(-x * x), AdmissibleInterval::new(0.25, 0.25), 1e-8).unwrap();
        assert_eq!(x, 0.25);
    }

    #[test]
    fn objectives_vanish_at_zero() {
        let s = solver(0.4, 0.6);
        assert_eq!(s.objective_no_signal(0.0).unwrap(), 0.0);
        for z in [-2.0, 0.3, 1.7] {
            assert_eq!(s.objective_signal(0.0, z).unwrap(), 0.0);
        }
        assert!(matches!(s.objective_no_signal(1.5), Err(Error::OutsideAdmissible { .. })));
        assert!(matches!(s.objective_signal(-0.1, 1.0), Err(Error::OutsideAdmissible { .. })));
    }

    #[test]
    fn discrete_single_atom_closed_form() {
        let mut s = discrete(&[(2.5, 0.1, 1.0), (1.0, -0.1, 0.0), (1.0, 0.1, 0.0)]);
        s.cfg.prefs.alpha = 0.5;
        let got = s.objective_signal(1.0, 1.0).unwrap();
        assert_abs_diff_eq!(got, 2.5 * 2.0 * (1.1f64.sqrt() - 1.0), epsilon = 1e-14);
    }

    #[test]
    fn merton_ratio_without_signal() {
        let phi = solver(0.0, 0.3).optimal_fraction_no_signal().unwrap();
        assert!((phi - 0.46).abs() < 0.02, "{phi}");
    }

    #[test]
    fn full_signal_probability_gives_unconstrained_merton_ratio() {
        let s = solver(1.0, 0.3);
        let phi = s.optimal_fraction_no_signal().unwrap();
        assert_abs_diff_eq!(phi, 0.1 / (0.6 * 0.09), epsilon = 1e-6);
    }

    #[test]
    fn plateau_at_high_signal_probability() {
        assert_eq!(solver(0.95, 0.3).optimal_fraction_no_signal().unwrap(), 1.0);
        let rule = quad::gauss_hermite(64).unwrap();
        let p0 = full_investment_onset(&Config::reference(0.0, 0.3).unwrap(), 0.3, &rule, 1e-10)
            .unwrap()
            .unwrap();
        assert!(p0 > 0.0 && p0 < 0.95, "{p0}");
        assert!(solver(p0 - 1e-4, 0.3).optimal_fraction_no_signal().unwrap() < 1.0);
        assert_eq!(solver((p0 + 1e-4).min(0.999), 0.3).optimal_fraction_no_signal().unwrap(), 1.0);
    }

    #[test]
    fn signal_extremes() {
        let s = solver(0.25, 0.8);
        assert_eq!(s.optimal_fraction_signal(3.0).unwrap(), 1.0);
        assert_eq!(s.optimal_fraction_signal(-3.0).unwrap(), 0.0);
        let s = solver(0.25, 0.0);
        let a = s.optimal_fraction_signal(-1.3).unwrap();
        let b = s.optimal_fraction_signal(2.2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_signal_probability_matches_classical_constant() {
        let r = solver(0.0, 0.5).growth_constant().unwrap();
        assert_eq!(r.signal_value, 0.0);
        assert_eq!(r.m, r.no_signal_value);
        let r2 = solver(0.0, 0.0).growth_constant().unwrap();
        assert_eq!(r.m, r2.m);
    }

    #[test]
    fn vanishing_intensity_limit() {
        let mut cfg = Config::reference(0.0, 0.0).unwrap();
        cfg.market.lambda = 1e-12;
        let r = Solver::new(cfg, &Numerics::default()).unwrap().growth_constant().unwrap();
        assert_abs_diff_eq!(r.m, 0.073, epsilon = 1e-9);
        assert_eq!(r.phi0, 1.0);
    }

    #[test]
    fn growth_increases_with_signal_quality() {
        let m = |p, rho| solver(p, rho).growth_constant().unwrap().m;
        let (a, b, c, d) = (m(0.5, 0.8), m(0.5, 0.2), m(0.5, 0.0), m(0.0, 0.0));
        assert!(a > b && b > c && c >= d, "{a} {b} {c} {d}");
    }

    #[test]
    fn value_function_examples() {
        let r = solver(0.5, 0.8).growth_constant().unwrap();
        assert_eq!(r.value_at(1.0, 2.0).unwrap(), utility(2.0, 0.6));
        let v1 = r.value_at(0.3, 1.5).unwrap();
        let v2 = r.value_at(0.3, 3.0).unwrap();
        assert_abs_diff_eq!(v2, 2f64.powf(0.4) * v1, epsilon = 1e-14);
        let zero = GrowthReport { m: 0.0, r: 0.0, ..r.clone() };
        assert_abs_diff_eq!(zero.value_at(0.2, 1.7).unwrap(), utility(1.7, 0.6), epsilon = 1e-15);
        assert!(r.value_at(1.5, 1.0).is_err());
        assert!(r.value_at(0.5, 0.0).is_err());
    }

    #[test]
    fn policy_table_shapes() {
        let grid = linspace(-3.0, 3.0, 61);
        let t = solver(0.25, 0.8).policy_table(&grid).unwrap();
        assert!(t.windows(2).all(|w| w[0].1 <= w[1].1));
        let s = solver(0.25, 0.8);
        let z0 = s.disinvestment_threshold(-3.0, 3.0).unwrap().unwrap();
        assert!(z0 > 0.0 && z0 < 0.1, "{z0}");
        assert_eq!(s.optimal_fraction_signal(0.5 * z0).unwrap(), 0.0);
        assert!(s.optimal_fraction_signal(z0 + 1e-3).unwrap() > 0.0);
        let t = solver(0.25, 0.0).policy_table(&grid).unwrap();
        assert!(t.iter().all(|(_, phi)| *phi == t[0].1));
    }

    #[test]
    fn memoized_policy_is_deterministic() {
        let s = Arc::new(solver(0.5, 0.8));
        let f = s.optimal_policy().unwrap();
        let g = s.optimal_policy().unwrap();
        for z in [-1.23456, 0.0004, 0.37, 2.9] {
            assert_eq!(f.at_signal(z), g.at_signal(z));
            assert_eq!(f.at_signal(z), f.at_signal(z));
            assert_eq!(f.at_signal(z), s.optimal_fraction_signal((z * 1e3f64).round() * 1e-3).unwrap());
        }
    }

    #[test]
    fn divergent_growth_for_one_sided_discrete_jumps() {
        // only upward jumps on the signal slice: unbounded objective
        let s = discrete(&[(1.0, 0.2, 1.0), (1.0, 0.1, 0.0), (1.0, -0.1, 0.0)]);
        assert!(matches!(s.growth_constant(), Err(Error::BracketFailure(_))));
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(-3.0, 3.0, 61)[30], 0.0);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
        assert_eq!(*linspace(0.0, 1.0, 11).last().unwrap(), 1.0);
    }

    #[test]
    fn signal_panels_bracket_the_kinks() {
        let s = solver(0.25, 0.8);
        let breaks = s.signal_panels().unwrap();
        assert!(breaks.windows(2).all(|w| w[0] < w[1] && w[1] - w[0] <= PANEL_WIDTH));
        let kinks = s.signal_kinks().unwrap();
        assert_eq!(kinks.len(), 2, "{kinks:?}");
        assert!(kinks.iter().all(|k| breaks.contains(k)));
        let z0 = s.disinvestment_threshold(-3.0, 3.0).unwrap().unwrap();
        assert_abs_diff_eq!(kinks[0], z0, epsilon = 1e-7);
        // phi* is 0 below the first kink, 1 past the second, interior between
        assert_eq!(s.optimal_fraction_signal(kinks[0] - 1e-6).unwrap(), 0.0);
        assert!(s.optimal_fraction_signal(kinks[0] + 1e-6).unwrap() > 0.0);
        assert_eq!(s.optimal_fraction_signal(kinks[1] + 1e-6).unwrap(), 1.0);
        assert!(s.optimal_fraction_signal(kinks[1] - 1e-6).unwrap() < 1.0);
        // without correlation the slopes do not depend on z
        assert!(solver(0.25, 0.0).signal_kinks().unwrap().is_empty());
        assert!(solver(0.25, -0.8).signal_kinks().unwrap().len() == 2);
    }

    #[test]
    fn outer_integral_converges_in_order() {
        let cfg = Config::reference(0.5, 0.8).unwrap();
        let m = |order| {
            let n = Numerics { quad_order: order, outer_order: order, ..Numerics::default() };
            Solver::new(cfg.clone(), &n).unwrap().growth_constant().unwrap().m
        };
        assert_abs_diff_eq!(m(32), m(96), epsilon = 1e-10);
    }

    #[test]
    fn boundary_optimum_is_exact_at_the_onset() {
        let base = Config::reference(0.5, 0.8).unwrap();
        let p0 = full_investment_onset(&base, 0.8, &quad::gauss_hermite(64).unwrap(), 1e-12).unwrap().unwrap();
        assert_eq!(solver(p0, 0.8).optimal_fraction_no_signal().unwrap(), 1.0);
        assert!(solver(p0 - 1e-6, 0.8).optimal_fraction_no_signal().unwrap() < 1.0);
    }
}
