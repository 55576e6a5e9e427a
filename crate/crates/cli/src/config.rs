use std::path::Path;

use jumpsignal::{Config, JumpSignalModel, MarketParams, Numerics, Preferences};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, rename_all = "camelCase", deny_unknown_fields)]
pub struct McSettings {
    pub n_paths: usize,
    pub seed: u64,
}

impl Default for McSettings {
    fn default() -> Self {
        Self { n_paths: 100_000, seed: 42 }
    }
}

/// On-disk run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub market: MarketParams,
    pub preferences: Preferences,
    pub signal_model: JumpSignalModel,
    #[serde(default)]
    pub numerics: Numerics,
    #[serde(default)]
    pub mc: McSettings,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::new("ConfigParseError", e.to_string()))?;
        cfg.numerics.validate()?;
        cfg.model()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new("ConfigReadError", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Validated model configuration.
    pub fn model(&self) -> Result<Config, CliError> {
        Ok(Config::new(self.market, self.preferences, self.signal_model.clone())?)
    }

    /// Same configuration with the copula parameters replaced.
    pub fn with_copula(&self, p: f64, rho: f64) -> Result<Config, CliError> {
        if !matches!(self.signal_model, JumpSignalModel::GaussianCopula { .. }) {
            return Err(CliError::usage("p/rho grids need a gaussian_copula signal model"));
        }
        Ok(Config::new(self.market, self.preferences, JumpSignalModel::GaussianCopula { p, rho })?)
    }

    pub fn copula(&self) -> Option<(f64, f64)> {
        match self.signal_model {
            JumpSignalModel::GaussianCopula { p, rho } => Some((p, rho)),
            JumpSignalModel::DiscreteMarks { .. } => None,
        }
    }
}

/// Evenly spaced grid given as `a:b:n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub start: f64,
    pub end: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        jumpsignal::policy::linspace(self.start, self.end, self.points)
    }
}

impl std::str::FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, n] = parts[..] else {
            return Err(format!("expected a:b:n, got {s:?}"));
        };
        let start: f64 = a.trim().parse().map_err(|e| format!("bad grid start {a:?}: {e}"))?;
        let end: f64 = b.trim().parse().map_err(|e| format!("bad grid end {b:?}: {e}"))?;
        let points: usize = n.trim().parse().map_err(|e| format!("bad grid size {n:?}: {e}"))?;
        if points == 0 || !start.is_finite() || !end.is_finite() {
            return Err(format!("grid {s:?} needs finite ends and at least one point"));
        }
        if points == 1 && start != end {
            return Err(format!("single-point grid {s:?} needs a == b"));
        }
        Ok(Self { start, end, points })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "market": { "r": 0, "mu": 0.1, "sigma": 0.3, "lambda": 4, "muHat": 0.05, "sigmaHat": 0.5, "T": 1, "x0": 1 },
        "preferences": { "alpha": 0.6 },
        "signal_model": { "type": "gaussian_copula", "p": 0.5, "rho": 0.8 }
    }"#;

    #[test]
    fn defaults_fill_missing_sections() {
        let cfg = RunConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.numerics, Numerics::default());
        assert_eq!(cfg.numerics.quad_order, 64);
        assert_eq!(cfg.numerics.z_grid_points, 61);
        assert_eq!(cfg.numerics.output_steps, 256);
        assert_eq!(cfg.mc, McSettings { n_paths: 100_000, seed: 42 });
        assert_eq!(cfg.copula(), Some((0.5, 0.8)));
    }

    #[test]
    fn partial_sections_and_errors() {
        let text = MINIMAL.replace("\"signal_model\"", "\"numerics\": { \"quadOrder\": 32 }, \"mc\": { \"seed\": 7 }, \"signal_model\"");
        let cfg = RunConfig::from_json(&text).unwrap();
        assert_eq!(cfg.numerics.quad_order, 32);
        assert_eq!(cfg.numerics.opt_tol, 1e-8);
        assert_eq!(cfg.mc, McSettings { n_paths: 100_000, seed: 7 });

        let typo = MINIMAL.replace("muHat", "mu_hatt");
        assert_eq!(RunConfig::from_json(&typo).unwrap_err().kind, "ConfigParseError");
        let bad_grid = MINIMAL.replace("\"signal_model\"", "\"numerics\": { \"zGridMin\": 3, \"zGridMax\": -3 }, \"signal_model\"");
        assert_eq!(RunConfig::from_json(&bad_grid).unwrap_err().kind, "DomainError");
        let arb = MINIMAL.replace("\"rho\": 0.8", "\"rho\": -1");
        assert_eq!(RunConfig::from_json(&arb).unwrap_err().kind, "ArbitrageSignal");
    }

    #[test]
    fn grid_parsing() {
        let g: Grid = "0:1:11".parse().unwrap();
        assert_eq!(g.values().len(), 11);
        assert_eq!(g.values()[10], 1.0);
        assert_eq!("-0.5:0.5:3".parse::<Grid>().unwrap().values(), vec![-0.5, 0.0, 0.5]);
        assert_eq!("0.2:0.2:1".parse::<Grid>().unwrap().values(), vec![0.2]);
        for bad in ["0:1", "a:1:2", "0:1:0", "0:1:1", "0:inf:3", "0:1:2:3"] {
            assert!(bad.parse::<Grid>().is_err(), "{bad}");
        }
    }
}
