use std::path::Path;

use serde::{Deserialize, Serialize};

use hexflow_core::flow::FlowOptions;

/// Run settings loaded from `--config FILE` (JSON). Missing keys keep their
/// defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Collapse threshold relative to the initial minimal segment length.
    pub eps_len_rel: f64,
    pub eta: f64,
    pub max_steps: usize,
    pub max_restarts: usize,
    /// Stop as singular once a speed-limited step is below this times L0min².
    pub min_dt_rel: f64,
    /// Sample the trajectory on this grid; every step when absent.
    pub sample_interval: Option<f64>,
    /// Side length a of the shrinker hexagons.
    pub shrinker_a0: f64,
    /// Fraction of the predicted collapse time used by `shrink --flow`.
    pub horizon_fraction: f64,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let f = FlowOptions::default();
        RunConfig {
            eps_len_rel: f.eps_len_rel,
            eta: f.eta,
            max_steps: f.max_steps,
            max_restarts: f.max_restarts,
            min_dt_rel: f.min_dt_rel,
            sample_interval: f.sample_interval,
            shrinker_a0: 1.0,
            horizon_fraction: 0.5,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), String> {
        let positive = [
            ("eps_len_rel", self.eps_len_rel),
            ("eta", self.eta),
            ("min_dt_rel", self.min_dt_rel),
            ("shrinker_a0", self.shrinker_a0),
            ("horizon_fraction", self.horizon_fraction),
            ("sample_interval", self.sample_interval.unwrap_or(1.0)),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("config: {name} must be positive, got {v}"));
            }
        }
        if self.horizon_fraction >= 1.0 {
            return Err("config: horizon_fraction must be below 1".into());
        }
        if self.max_steps == 0 {
            return Err("config: max_steps must be positive".into());
        }
        Ok(())
    }

    pub fn flow_options(&self) -> FlowOptions {
        FlowOptions {
            eta: self.eta,
            eps_len_rel: self.eps_len_rel,
            max_steps: self.max_steps,
            max_restarts: self.max_restarts,
            min_dt_rel: self.min_dt_rel,
            sample_interval: self.sample_interval,
            ..FlowOptions::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_config_keeps_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"eta": 0.05}"#).unwrap();
        assert_eq!(cfg.eta, 0.05);
        assert_eq!(cfg.max_steps, RunConfig::default().max_steps);
    }

    #[test]
    fn nonpositive_tolerance_rejected() {
        let cfg = RunConfig { eps_len_rel: 0.0, ..RunConfig::default() };
        assert!(cfg.check().is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"etaa": 1}"#).is_err());
    }
}
