//! Scenario files: a named, reproducible description of one simulated
//! operating point (source state, efficiencies, acquisition scale, seeds).

use std::path::Path;

use serde::{Deserialize, Serialize};
use steerkit::expsim::{mix_sources, SourceConfig};
use steerkit::qstate::{state_from_json, werner_state, DensityMatrix4, WernerSpec};
use steerkit::{Result, SteerError};

/// How the source state is specified.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSpec {
    /// Exact Werner state with the given μ.
    Werner { mu: f64 },
    /// Two-sub-source mixture with a visibility knob.
    Mix { w: f64, visibility: f64 },
    /// Load a state file (path relative to the scenario file).
    File { path: String },
}

fn default_samples() -> usize {
    steerkit::tomo::MC_DEFAULT_SAMPLES
}

fn default_threshold() -> f64 {
    3.0
}

fn default_visibility() -> f64 {
    1.0
}

/// One named operating point of the simulated experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub state: StateSpec,
    /// Heralding efficiency of the steering (announcing) party.
    pub eps_a: f64,
    /// Heralding efficiency of the lossy party being tested for
    /// nonsteerability.
    pub eps_b: f64,
    /// Generated pairs per second.
    pub pair_rate: f64,
    /// Seconds per steering setting.
    pub steering_time: f64,
    /// Seconds per tomography setting pair.
    pub tomo_time: f64,
    #[serde(default)]
    pub dark_rate_a: f64,
    #[serde(default)]
    pub dark_rate_b: f64,
    pub seed: u64,
    #[serde(default = "default_samples")]
    pub n_samples: usize,
    #[serde(default = "default_threshold")]
    pub sd_threshold: f64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let sc: ScenarioConfig = serde_json::from_str(text)?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("eps_a", self.eps_a), ("eps_b", self.eps_b)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(SteerError::Domain(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if self.pair_rate <= 0.0 || self.steering_time <= 0.0 || self.tomo_time <= 0.0 {
            return Err(SteerError::Domain(
                "pair_rate, steering_time, tomo_time must be positive".into(),
            ));
        }
        if self.n_samples < 2 {
            return Err(SteerError::Domain("n_samples must be at least 2".into()));
        }
        Ok(())
    }

    /// Materialize the source state; `base` resolves relative file paths.
    pub fn resolve_state(&self, base: &Path) -> Result<DensityMatrix4> {
        match &self.state {
            StateSpec::Werner { mu } => Ok(werner_state(WernerSpec::new(*mu)?)),
            StateSpec::Mix { w, visibility } => mix_sources(*w, *visibility),
            StateSpec::File { path } => {
                let full = base.join(path);
                let text = std::fs::read_to_string(&full).map_err(SteerError::Io)?;
                state_from_json(&text)
            }
        }
    }

    /// Source configuration for one acquisition stage. `stage` offsets the
    /// seed so steering and tomography use independent streams.
    pub fn source_config(&self, integration_time: f64, stage: u64) -> SourceConfig {
        let (w, vis) = match &self.state {
            StateSpec::Mix { w, visibility } => (*w, *visibility),
            StateSpec::Werner { mu } => (*mu, 1.0),
            StateSpec::File { .. } => (f64::NAN, f64::NAN),
        };
        SourceConfig {
            mix_weight: if w.is_finite() { w } else { 0.0 },
            singlet_visibility: if vis.is_finite() { vis } else { 0.0 },
            pair_rate: self.pair_rate,
            integration_time,
            eps_a: self.eps_a,
            eps_b: self.eps_b,
            dark_rate_a: self.dark_rate_a,
            dark_rate_b: self.dark_rate_b,
            seed: self.seed.wrapping_add(stage.wrapping_mul(0x9E3779B97F4A7C15)),
        }
    }
}

/// The conclusive one-way operating point shipped as a preset.
pub fn preset_red_triangle() -> ScenarioConfig {
    ScenarioConfig {
        name: "red-triangle".into(),
        state: StateSpec::Mix { w: 0.951, visibility: default_visibility() },
        eps_a: 0.30,
        eps_b: 2.52e-3,
        pair_rate: 2e6,
        steering_time: 100.0,
        tomo_time: 100.0,
        dark_rate_a: 0.0,
        dark_rate_b: 0.0,
        seed: 20260810,
        n_samples: default_samples(),
        sd_threshold: default_threshold(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_json_round_trip() {
        let sc = preset_red_triangle();
        let text = serde_json::to_string_pretty(&sc).unwrap();
        let back = ScenarioConfig::from_json(&text).unwrap();
        assert_eq!(back.name, "red-triangle");
        assert_eq!(back.n_samples, 200);
        assert!(matches!(back.state, StateSpec::Mix { .. }));
    }

    #[test]
    fn defaults_fill_in() {
        let text = r#"{
            "name": "minimal",
            "state": {"werner": {"mu": 0.5}},
            "eps_a": 0.3, "eps_b": 0.01,
            "pair_rate": 1e5, "steering_time": 1.0, "tomo_time": 1.0,
            "seed": 7
        }"#;
        let sc = ScenarioConfig::from_json(text).unwrap();
        assert_eq!(sc.n_samples, 200);
        assert_eq!(sc.sd_threshold, 3.0);
        assert_eq!(sc.dark_rate_a, 0.0);
    }

    #[test]
    fn bad_scenarios_rejected() {
        let text = r#"{
            "name": "bad", "state": {"werner": {"mu": 0.5}},
            "eps_a": 1.5, "eps_b": 0.01,
            "pair_rate": 1e5, "steering_time": 1.0, "tomo_time": 1.0, "seed": 7
        }"#;
        assert!(ScenarioConfig::from_json(text).is_err());
    }
}
