//! Run configuration, read from and written to JSON.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::medium::{Material, Medium};
use crate::select::SelectionParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Source {
    None,
    /// `f(x) = A e^{-c|x - x*|²}`
    Gaussian {
        amplitude: f64,
        decay: f64,
        center: [f64; 2],
    },
    /// Plane wave `A e^{i j·x}` entering from the left.
    Incoming {
        j_in: [f64; 2],
        #[serde(default = "default_d")]
        d: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        /// Continuous step `½(1 - tanh)`; `false` drops the factor ½.
        #[serde(default = "default_true")]
        half_step: bool,
    },
}

fn default_d() -> f64 {
    1.0
}

fn default_amplitude() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

/// Vertical wave numbers whose lines are searched for outgoing modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum J2Policy {
    /// Every value of `Q'_K`.
    All,
    /// The `lines` values of `Q'_K` closest to the incoming `j2` (or to 0
    /// without an incoming wave).
    Incoming { lines: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BandOutput {
    /// Points per direction of the Brillouin-zone sample.
    pub mesh: usize,
    pub n_bands: usize,
    /// Also compute group velocities for the sampled points (slow).
    pub group_velocity: bool,
}

impl Default for BandOutput {
    fn default() -> Self {
        BandOutput { mesh: 21, n_bands: 3, group_velocity: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Outputs {
    pub field: String,
    pub report: String,
    pub bands: String,
    pub selected: String,
    pub rt: String,
    pub sweep: String,
    pub timings: String,
    pub band: BandOutput,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            field: "field.csv".into(),
            report: "report.json".into(),
            bands: "bands.csv".into(),
            selected: "selected.csv".into(),
            rt: "rt.json".into(),
            sweep: "sweep.csv".into(),
            timings: "timings.json".into(),
            band: BandOutput::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GridSpec,
    pub medium: Medium,
    pub omega: f64,
    pub delta: f64,
    pub source: Source,
    pub selection: SelectionParams,
    pub j2_policy: J2Policy,
    /// Upper bound on the Bloch modes per side (closest `j2` lines first).
    pub max_modes: Option<usize>,
    pub orthonormalize: bool,
    /// Coefficient used for the Fresnel reference; computed from the right
    /// material when absent.
    pub reference_a_star: Option<f64>,
    /// Step for the band-curvature estimate of `a*`.
    pub a_star_dj: f64,
    /// Damping values for `sweep`.
    pub deltas: Vec<f64>,
    pub outputs: Outputs,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: GridSpec { eps: 1.0, r: 15, l: 6, k: 14, n1: 20, n2: 19 },
            medium: Medium::interface(Material::constant(1.0), Material::crystal()),
            omega: 0.2 * std::f64::consts::PI,
            delta: 1e-4,
            source: Source::Incoming { j_in: [0.440, 0.449], d: 1.0, amplitude: 1.0, half_step: true },
            selection: SelectionParams::default(),
            j2_policy: J2Policy::Incoming { lines: 3 },
            max_modes: Some(4),
            orthonormalize: true,
            reference_a_star: None,
            a_star_dj: 1e-3,
            deltas: vec![1e-2, 1e-3, 1e-4, 1e-5, 1e-6],
            outputs: Outputs::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.medium.validate()?;
        self.selection.validate()?;
        if !(self.omega > 0.0 && self.omega.is_finite()) {
            return Err(Error::Config(format!("omega must be positive, got {}", self.omega)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("delta must be nonnegative, got {}", self.delta)));
        }
        if self.medium.slab_cells.is_some_and(|s| s > self.geometry.r) {
            return Err(Error::Config("slab is wider than the inner domain".into()));
        }
        match &self.source {
            Source::None => {}
            Source::Gaussian { decay, amplitude, center } => {
                if !(*decay > 0.0) || !amplitude.is_finite() || !center.iter().all(|c| c.is_finite()) {
                    return Err(Error::Config("gaussian source needs decay > 0 and finite parameters".into()));
                }
            }
            Source::Incoming { j_in, d, amplitude, .. } => {
                if !(*d > 0.0) || !amplitude.is_finite() || !j_in.iter().all(|c| c.is_finite()) {
                    return Err(Error::Config("incoming wave needs d > 0 and finite parameters".into()));
                }
                if self.medium.left.as_constant() != Some(1.0) {
                    return Err(Error::Config("incoming waves need the left medium a = 1".into()));
                }
            }
        }
        if let J2Policy::Incoming { lines } = self.j2_policy {
            if lines == 0 {
                return Err(Error::Config("j2_policy.lines must be at least 1".into()));
            }
        }
        if self.max_modes == Some(0) {
            return Err(Error::Config("max_modes must be at least 1".into()));
        }
        if self.reference_a_star.is_some_and(|a| !(a > 0.0)) {
            return Err(Error::Config("reference_a_star must be positive".into()));
        }
        if !self.deltas.iter().all(|d| *d > 0.0) || self.deltas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("deltas must be positive and strictly descending".into()));
        }
        if self.outputs.band.mesh < 2 || self.outputs.band.n_bands == 0 {
            return Err(Error::Config("band output needs mesh >= 2 and n_bands >= 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config_uses_defaults() {
        let cfg = RunConfig::from_json(
            r#"{"omega": 1.85, "source": {"type": "gaussian", "amplitude": 2.0, "decay": 3.0, "center": [-3.5, 0.0]}}"#,
        )
        .unwrap();
        assert_eq!(cfg.omega, 1.85);
        assert_eq!(cfg.geometry.n1, 20);
    }

    #[test]
    fn rejects_bad_values() {
        for text in [
            r#"{"omega": -1.0}"#,
            r#"{"delta": -1e-3}"#,
            r#"{"geometry": {"eps": 1.0, "R": 0, "L": 1, "K": 1, "n1": 1, "n2": 1}}"#,
            r#"{"deltas": [1e-3, 1e-2]}"#,
            r#"{"unknown_key": 1}"#,
            r#"{"j2_policy": {"type": "incoming", "lines": 0}}"#,
        ] {
            let err = RunConfig::from_json(text).unwrap_err();
            assert!(err.is_config(), "{text}: {err}");
        }
    }
}
