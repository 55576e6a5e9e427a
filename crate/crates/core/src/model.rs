//! Market, preference and jump-signal model parameters.
//!
//! The stock follows a jump diffusion driven by a marked Poisson process with
//! finite intensity. Each mark `e` determines a relative price jump `eta(e)`
//! and a signal `zeta(e)`; a zero signal means the jump arrives unannounced.
//! [`disintegrate`] factors the jump measure into the signal law and the
//! conditional law of the jump given the signal, which is everything the
//! optimizer needs.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MarketParams {
    /// Riskfree rate.
    pub r: f64,
    /// Stock drift.
    pub mu: f64,
    /// Diffusive volatility.
    pub sigma: f64,
    /// Jump intensity. Ignored by [`JumpSignalModel::DiscreteMarks`], whose
    /// atom weights carry the intensity themselves.
    pub lambda: f64,
    /// Location of the log jump size.
    #[serde(alias = "mu_hat")]
    pub mu_hat: f64,
    /// Scale of the log jump size.
    #[serde(alias = "sigma_hat")]
    pub sigma_hat: f64,
    /// Investment horizon.
    #[serde(rename = "T", alias = "horizon")]
    pub horizon: f64,
    /// Initial capital.
    pub x0: f64,
    /// Initial stock price, only used for rendering paths.
    #[serde(default = "one")]
    pub s0: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preferences {
    /// Relative risk aversion of the power utility.
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    /// Jump-measure mass of this mark.
    pub weight: f64,
    /// Relative price jump.
    pub eta: f64,
    /// Signal delivered with the jump; `0` means no signal.
    pub zeta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum JumpSignalModel {
    /// Log-normal jumps `exp(sigma_hat*Y + mu_hat - sigma_hat^2/2) - 1`, announced
    /// with probability `p` by the signal `rho*Y + sqrt(1-rho^2)*eps`.
    GaussianCopula { p: f64, rho: f64 },
    /// Finite mark space.
    DiscreteMarks { atoms: Vec<Atom> },
}

/// Validated model configuration. Construct through [`validate`] or
/// [`Config::new`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub market: MarketParams,
    pub prefs: Preferences,
    pub model: JumpSignalModel,
}

impl Config {
    pub fn new(market: MarketParams, prefs: Preferences, model: JumpSignalModel) -> Result<Self> {
        validate(market, prefs, model)
    }

    /// The case-study market (alpha 0.6, r 0, mu 0.1, sigma 0.3, mu_hat 0.05,
    /// sigma_hat 0.5, lambda 4) with Gaussian signals, unit capital and
    /// horizon one.
    pub fn reference(p: f64, rho: f64) -> Result<Self> {
        validate(
            MarketParams {
                r: 0.0,
                mu: 0.1,
                sigma: 0.3,
                lambda: 4.0,
                mu_hat: 0.05,
                sigma_hat: 0.5,
                horizon: 1.0,
                x0: 1.0,
                s0: 1.0,
            },
            Preferences { alpha: 0.6 },
            JumpSignalModel::GaussianCopula { p, rho },
        )
    }

    pub fn with_model(&self, model: JumpSignalModel) -> Result<Self> {
        validate(self.market, self.prefs, model)
    }

    pub fn alpha(&self) -> f64 {
        self.prefs.alpha
    }

    pub fn kernel(&self) -> DisintegratedKernel {
        disintegrate(&self.model, &self.market)
    }
}

fn finite(name: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be finite, got {v}")))
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    finite(name, v)?;
    if v > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive, got {v}")))
    }
}

pub fn validate(market: MarketParams, prefs: Preferences, model: JumpSignalModel) -> Result<Config> {
    let alpha = prefs.alpha;
    if !alpha.is_finite() || alpha <= 0.0 || alpha == 1.0 {
        return Err(Error::RiskAversionUnsupported(alpha));
    }
    finite("r", market.r)?;
    finite("mu", market.mu)?;
    finite("mu_hat", market.mu_hat)?;
    positive("sigma", market.sigma)?;
    positive("sigma_hat", market.sigma_hat)?;
    positive("lambda", market.lambda)?;
    positive("horizon", market.horizon)?;
    positive("x0", market.x0)?;
    positive("s0", market.s0)?;

    match &model {
        JumpSignalModel::GaussianCopula { p, rho } => {
            if !(0.0..=1.0).contains(p) {
                return Err(domain(format!("signal probability p must lie in [0, 1], got {p}")));
            }
            if !rho.is_finite() {
                return Err(domain(format!("rho must be finite, got {rho}")));
            }
            if rho.abs() >= 1.0 {
                return Err(Error::ArbitrageSignal(*rho));
            }
        }
        JumpSignalModel::DiscreteMarks { atoms } => {
            if atoms.is_empty() {
                return Err(domain("discrete mark model needs at least one atom"));
            }
            for (i, a) in atoms.iter().enumerate() {
                positive(&format!("atoms[{i}].weight"), a.weight)?;
                finite(&format!("atoms[{i}].zeta"), a.zeta)?;
                finite(&format!("atoms[{i}].eta"), a.eta)?;
                if a.eta < -1.0 {
                    return Err(domain(format!("atoms[{i}].eta must be >= -1, got {}", a.eta)));
                }
            }
        }
    }
    Ok(Config { market, prefs, model })
}

/// Relative price jump of a standard-normal mark `y`.
pub fn eta_of_mark(y: f64, market: &MarketParams) -> f64 {
    jump_ratio(y, market.mu_hat, market.sigma_hat)
}

#[inline]
pub(crate) fn jump_ratio(y: f64, mu_hat: f64, sigma_hat: f64) -> f64 {
    (sigma_hat * y + mu_hat - 0.5 * sigma_hat * sigma_hat).exp_m1()
}

/// Power utility `x^(1-alpha)/(1-alpha)`; at zero wealth this is `0` for
/// `alpha < 1` and `-inf` for `alpha > 1`.
pub fn power_utility(x: f64, prefs: &Preferences) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(Error::NegativeWealth(x));
    }
    Ok(utility(x, prefs.alpha))
}

#[inline]
pub(crate) fn utility(x: f64, alpha: f64) -> f64 {
    let e = 1.0 - alpha;
    x.powf(e) / e
}

/// A point of the signal axis: either no signal, or a nonzero signal value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Signal {
    Absent,
    Value(f64),
}

impl Signal {
    /// Maps a raw signal increment to a [`Signal`]; zero means no signal.
    pub fn from_increment(z: f64) -> Self {
        if z == 0.0 {
            Signal::Absent
        } else {
            Signal::Value(z)
        }
    }
}

/// Law of the jump given the signal.
#[derive(Debug, Clone, PartialEq)]
pub enum ConditionalLaw {
    /// Standard-normal coordinate of the mark is `N(mean, var)`; the jump is
    /// `exp(sigma_hat*Y + mu_hat - sigma_hat^2/2) - 1`.
    Normal { mean: f64, var: f64, mu_hat: f64, sigma_hat: f64 },
    /// Probability-weighted jump ratios `(prob, eta)`.
    Atoms(Vec<(f64, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalGroup {
    pub z: f64,
    /// Jump-measure mass carrying this signal.
    pub mass: f64,
    /// Normalized `(prob, eta)` pairs.
    pub law: Vec<(f64, f64)>,
}

/// Jump measure factored as `nu(de) = K(z, de) mu(dz)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DisintegratedKernel {
    /// Signal law `lambda(1-p) Dirac_0 + lambda p N(0,1)`; given a signal `z`
    /// the mark is `N(rho z, 1 - rho^2)`, without a signal it is `N(0, 1)`.
    Gaussian {
        no_signal_mass: f64,
        signal_mass: f64,
        rho: f64,
        mu_hat: f64,
        sigma_hat: f64,
    },
    Discrete {
        no_signal: Option<SignalGroup>,
        signals: Vec<SignalGroup>,
    },
}

impl DisintegratedKernel {
    pub fn total_mass(&self) -> f64 {
        match self {
            DisintegratedKernel::Gaussian { no_signal_mass, signal_mass, .. } => {
                no_signal_mass + signal_mass
            }
            DisintegratedKernel::Discrete { no_signal, signals } => {
                no_signal.as_ref().map_or(0.0, |g| g.mass) + signals.iter().map(|g| g.mass).sum::<f64>()
            }
        }
    }

    /// Mass of `{zeta = 0}`.
    pub fn no_signal_mass(&self) -> f64 {
        match self {
            DisintegratedKernel::Gaussian { no_signal_mass, .. } => *no_signal_mass,
            DisintegratedKernel::Discrete { no_signal, .. } => no_signal.as_ref().map_or(0.0, |g| g.mass),
        }
    }

    /// Density of the signal law at `z` with respect to the outer reference
    /// measure: `lambda p` against `N(0,1)` for the Gaussian model, the atom
    /// mass (counting measure) for discrete marks.
    pub fn signal_scale(&self, z: f64) -> f64 {
        match self {
            DisintegratedKernel::Gaussian { signal_mass, .. } => *signal_mass,
            DisintegratedKernel::Discrete { signals, .. } => {
                signals.iter().find(|g| g.z == z).map_or(0.0, |g| g.mass)
            }
        }
    }

    /// Conditional jump law on the given slice, `None` if the slice carries
    /// no mass (discrete signal not among the atoms).
    pub fn conditional(&self, signal: Signal) -> Option<ConditionalLaw> {
        match self {
            DisintegratedKernel::Gaussian { rho, mu_hat, sigma_hat, .. } => Some(match signal {
                Signal::Absent => ConditionalLaw::Normal {
                    mean: 0.0,
                    var: 1.0,
                    mu_hat: *mu_hat,
                    sigma_hat: *sigma_hat,
                },
                Signal::Value(z) => ConditionalLaw::Normal {
                    mean: rho * z,
                    var: 1.0 - rho * rho,
                    mu_hat: *mu_hat,
                    sigma_hat: *sigma_hat,
                },
            }),
            DisintegratedKernel::Discrete { no_signal, signals } => {
                let group = match signal {
                    Signal::Absent => no_signal.as_ref(),
                    Signal::Value(z) => signals.iter().find(|g| g.z == z),
                };
                group.map(|g| ConditionalLaw::Atoms(g.law.clone()))
            }
        }
    }

    /// Distinct nonzero signal values of a discrete kernel.
    pub fn signal_atoms(&self) -> &[SignalGroup] {
        match self {
            DisintegratedKernel::Gaussian { .. } => &[],
            DisintegratedKernel::Discrete { signals, .. } => signals,
        }
    }
}

pub fn disintegrate(model: &JumpSignalModel, market: &MarketParams) -> DisintegratedKernel {
    match model {
        JumpSignalModel::GaussianCopula { p, rho } => DisintegratedKernel::Gaussian {
            no_signal_mass: market.lambda * (1.0 - p),
            signal_mass: market.lambda * p,
            rho: *rho,
            mu_hat: market.mu_hat,
            sigma_hat: market.sigma_hat,
        },
        JumpSignalModel::DiscreteMarks { atoms } => {
            // group by signal value, keeping first-appearance order
            let mut groups: Vec<(f64, Vec<(f64, f64)>)> = Vec::new();
            for a in atoms {
                match groups.iter_mut().find(|(z, _)| *z == a.zeta) {
                    Some((_, members)) => members.push((a.weight, a.eta)),
                    None => groups.push((a.zeta, vec![(a.weight, a.eta)])),
                }
            }
            let mut no_signal = None;
            let mut signals = Vec::new();
            for (z, members) in groups {
                let mass: f64 = members.iter().map(|(w, _)| w).sum();
                let law = members.into_iter().map(|(w, e)| (w / mass, e)).collect();
                let g = SignalGroup { z, mass, law };
                if z == 0.0 {
                    no_signal = Some(g);
                } else {
                    signals.push(g);
                }
            }
            DisintegratedKernel::Discrete { no_signal, signals }
        }
    }
}

/// Closed interval with possibly infinite endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibleInterval {
    pub lo: f64,
    pub hi: f64,
}

impl AdmissibleInterval {
    pub const REAL_LINE: Self = Self { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
    pub const UNIT: Self = Self { lo: 0.0, hi: 1.0 };

    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi);
        Self { lo, hi }
    }

    pub fn contains(&self, phi: f64) -> bool {
        self.lo <= phi && phi <= self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn clamp(&self, phi: f64) -> f64 {
        phi.max(self.lo).min(self.hi)
    }

    pub(crate) fn check(&self, phi: f64) -> Result<()> {
        if self.contains(phi) {
            Ok(())
        } else {
            Err(Error::OutsideAdmissible { phi, lo: self.lo, hi: self.hi })
        }
    }
}

/// A strategy as a field of fractions indexed by the instantaneous signal:
/// `phi0` while no signal arrives, `response(z)` upon a signal `z != 0`.
#[derive(Clone)]
pub struct PolicyField {
    phi0: f64,
    response: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl std::fmt::Debug for PolicyField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PolicyField").field("phi0", &self.phi0).finish_non_exhaustive()
    }
}

impl PolicyField {
    pub fn new(phi0: f64, response: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { phi0, response: Arc::new(response) }
    }

    /// Ignores signals altogether.
    pub fn constant(phi: f64) -> Self {
        Self::new(phi, move |_| phi)
    }

    pub fn no_signal(&self) -> f64 {
        self.phi0
    }

    pub fn at_signal(&self, z: f64) -> f64 {
        (self.response)(z)
    }

    pub fn position(&self, signal: Signal) -> f64 {
        match signal {
            Signal::Absent => self.phi0,
            Signal::Value(z) => self.at_signal(z),
        }
    }

    /// Same field with the no-signal fraction replaced.
    pub fn with_no_signal(&self, phi0: f64) -> Self {
        Self { phi0, response: Arc::clone(&self.response) }
    }

    /// Composes the signal response with `g(z, phi)`.
    pub fn map_response(&self, g: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        let inner = Arc::clone(&self.response);
        Self { phi0: self.phi0, response: Arc::new(move |z| g(z, inner(z))) }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn market() -> MarketParams {
        Config::reference(0.5, 0.8).unwrap().market
    }

    #[test]
    fn reference_config_is_valid() {
        let cfg = Config::reference(0.5, 0.8).unwrap();
        assert_eq!(cfg.prefs.alpha, 0.6);
        assert_eq!(cfg.market.lambda, 4.0);
    }

    #[test]
    fn rejects_log_utility_and_nonpositive_alpha() {
        let cfg = Config::reference(0.5, 0.8).unwrap();
        for alpha in [1.0, 0.0, -0.5, f64::NAN] {
            let err = validate(cfg.market, Preferences { alpha }, cfg.model.clone()).unwrap_err();
            assert_eq!(err.kind(), "RiskAversionUnsupported");
        }
    }

    #[test]
    fn perfect_correlation_is_arbitrage() {
        assert_eq!(Config::reference(0.5, 1.0).unwrap_err(), Error::ArbitrageSignal(1.0));
        assert_eq!(Config::reference(0.5, -1.0).unwrap_err(), Error::ArbitrageSignal(-1.0));
    }

    #[test]
    fn domain_errors() {
        assert_eq!(Config::reference(1.2, 0.0).unwrap_err().kind(), "DomainError");
        assert_eq!(Config::reference(-0.1, 0.0).unwrap_err().kind(), "DomainError");
        let cfg = Config::reference(0.5, 0.0).unwrap();
        let mut m = cfg.market;
        m.sigma = 0.0;
        assert_eq!(validate(m, cfg.prefs, cfg.model.clone()).unwrap_err().kind(), "DomainError");
        let bad = JumpSignalModel::DiscreteMarks { atoms: vec![Atom { weight: 1.0, eta: -1.5, zeta: 0.0 }] };
        assert_eq!(cfg.with_model(bad).unwrap_err().kind(), "DomainError");
        let bad = JumpSignalModel::DiscreteMarks { atoms: vec![Atom { weight: 0.0, eta: 0.5, zeta: 0.0 }] };
        assert_eq!(cfg.with_model(bad).unwrap_err().kind(), "DomainError");
    }

    #[test]
    fn eta_examples() {
        let m = market();
        let y0 = (0.5 * m.sigma_hat * m.sigma_hat - m.mu_hat) / m.sigma_hat;
        assert_abs_diff_eq!(eta_of_mark(y0, &m), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eta_of_mark(0.0, &m), (-0.075f64).exp() - 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(eta_of_mark(0.0, &m), -0.07226, epsilon = 1e-5);
        let low = eta_of_mark(-60.0, &m);
        assert!(low > -1.0 && low < -1.0 + 1e-12);
    }

    #[test]
    fn utility_examples() {
        let p = Preferences { alpha: 0.6 };
        assert_abs_diff_eq!(power_utility(1.0, &p).unwrap(), 1.0 / 0.4, epsilon = 1e-15);
        assert_eq!(power_utility(0.0, &Preferences { alpha: 1.5 }).unwrap(), f64::NEG_INFINITY);
        assert_eq!(power_utility(0.0, &Preferences { alpha: 0.5 }).unwrap(), 0.0);
        assert_abs_diff_eq!(power_utility(4.0, &Preferences { alpha: 0.5 }).unwrap(), 4.0, epsilon = 1e-15);
        assert_eq!(power_utility(-1.0, &p).unwrap_err(), Error::NegativeWealth(-1.0));
    }

    #[test]
    fn gaussian_disintegration() {
        let cfg = Config::reference(1.0, 0.3).unwrap();
        let k = cfg.kernel();
        assert_eq!(k.no_signal_mass(), 0.0);
        assert_abs_diff_eq!(k.total_mass(), 4.0, epsilon = 1e-15);
        let cfg = Config::reference(0.3, 0.0).unwrap();
        let k = cfg.kernel();
        for z in [-2.0, 0.7] {
            match k.conditional(Signal::Value(z)).unwrap() {
                ConditionalLaw::Normal { mean, var, .. } => {
                    assert_eq!(mean, 0.0);
                    assert_eq!(var, 1.0);
                }
                _ => unreachable!(),
            }
        }
        assert_abs_diff_eq!(k.total_mass(), 4.0, epsilon = 1e-15);
    }

    #[test]
    fn discrete_disintegration_groups_and_normalizes() {
        let cfg = Config::reference(0.5, 0.0).unwrap();
        let cfg = cfg
            .with_model(JumpSignalModel::DiscreteMarks {
                atoms: vec![
                    Atom { weight: 1.0, eta: 0.5, zeta: 1.0 },
                    Atom { weight: 3.0, eta: -0.2, zeta: 1.0 },
                ],
            })
            .unwrap();
        let k = cfg.kernel();
        assert_eq!(k.total_mass(), 4.0);
        assert_eq!(k.no_signal_mass(), 0.0);
        assert_eq!(k.signal_scale(1.0), 4.0);
        assert_eq!(
            k.conditional(Signal::Value(1.0)),
            Some(ConditionalLaw::Atoms(vec![(0.25, 0.5), (0.75, -0.2)]))
        );
        assert_eq!(k.conditional(Signal::Value(2.0)), None);
        assert_eq!(k.conditional(Signal::Absent), None);
    }

    #[test]
    fn config_json_roundtrip_shape() {
        let json = r#"{"type":"gaussian_copula","p":0.5,"rho":0.8}"#;
        let m: JumpSignalModel = serde_json::from_str(json).unwrap();
        assert_eq!(m, JumpSignalModel::GaussianCopula { p: 0.5, rho: 0.8 });
        let json = r#"{"type":"discrete_marks","atoms":[{"weight":1,"eta":0.1,"zeta":0}]}"#;
        let m: JumpSignalModel = serde_json::from_str(json).unwrap();
        assert!(matches!(m, JumpSignalModel::DiscreteMarks { ref atoms } if atoms.len() == 1));
    }

    #[test]
    fn policy_field_basics() {
        let f = PolicyField::new(0.4, |z| if z > 0.0 { 1.0 } else { 0.0 });
        assert_eq!(f.position(Signal::Absent), 0.4);
        assert_eq!(f.position(Signal::Value(0.3)), 1.0);
        assert_eq!(f.position(Signal::Value(-0.3)), 0.0);
        let g = f.map_response(|_, phi| phi * 0.5).with_no_signal(0.1);
        assert_eq!(g.position(Signal::Value(0.3)), 0.5);
        assert_eq!(g.no_signal(), 0.1);
        assert_eq!(Signal::from_increment(0.0), Signal::Absent);
    }

    use proptest::prelude::*;
    proptest! {
        #[test]
        fn eta_increasing_and_bounded(a in -8.0f64..8.0, b in -8.0f64..8.0) {
            let m = market();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assume!(hi - lo > 1e-9);
            prop_assert!(eta_of_mark(lo, &m) < eta_of_mark(hi, &m));
            prop_assert!(eta_of_mark(lo, &m) > -1.0);
        }
    }
}
