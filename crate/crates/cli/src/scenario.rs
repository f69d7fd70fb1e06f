//! Flat JSON scenario files.
//!
//! Every field is in SI base units (Hz, bit, s, W, W/Hz). The system fields
//! carry the same names as [`SystemParams`]; the remaining ones configure the
//! commands and may be overridden on the command line.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::ValueEnum;
use flra_core::{Protocol, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProtocolChoice {
    Aloha,
    Saloha,
    #[default]
    Both,
}

impl ProtocolChoice {
    pub fn protocols(self) -> Vec<Protocol> {
        match self {
            ProtocolChoice::Aloha => vec![Protocol::Aloha],
            ProtocolChoice::Saloha => vec![Protocol::SlottedAloha],
            ProtocolChoice::Both => Protocol::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum SweepAxis {
    Rho,
    NFl,
    LambdaFresh,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Rho => "rho",
            SweepAxis::NFl => "n_fl",
            SweepAxis::LambdaFresh => "lambda_fresh",
        }
    }
}

/// Inclusive `START:STOP:STEP` range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl RangeSpec {
    /// Grid points; `stop` is included when it lies on the grid up to
    /// rounding.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| self.start + self.step * k as f64)
            .map(|v| v.min(self.stop))
            .collect()
    }
}

impl FromStr for RangeSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(format!("range must be START:STOP:STEP (got {s:?})"));
        };
        let num = |p: &str| {
            p.trim()
                .parse::<f64>()
                .map_err(|_| format!("not a number in range {s:?}: {p:?}"))
        };
        let spec = RangeSpec {
            start: num(start)?,
            stop: num(stop)?,
            step: num(step)?,
        };
        if !(spec.start.is_finite() && spec.stop.is_finite()) {
            return Err(format!("range bounds must be finite (got {s:?})"));
        }
        if !(spec.step > 0.0 && spec.step.is_finite()) {
            return Err(format!("range step must be positive (got {s:?})"));
        }
        if spec.stop < spec.start {
            return Err(format!("empty range {s:?}: STOP is below START"));
        }
        Ok(spec)
    }
}

impl fmt::Display for RangeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

impl Serialize for RangeSpec {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RangeSpec {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

fn default_grid_step() -> f64 {
    1e-3
}

fn default_true() -> bool {
    true
}

fn default_rounds() -> u64 {
    1
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n_fl: usize,
    /// packets/s
    pub lambda_fresh: f64,
    /// s
    pub t_cpu: f64,
    /// s
    pub t_round: f64,
    pub q_min: f64,
    /// packets/s
    pub eps_retx: f64,
    /// Hz
    pub bandwidth: f64,
    /// bit
    pub s_fl: f64,
    /// bit
    pub s_ra: f64,
    pub gains_fl: Vec<f64>,
    pub gain_ra: f64,
    /// W
    pub p_tx_fl: f64,
    /// W
    pub p_tx_ra: f64,
    /// W/Hz
    pub n0: f64,

    #[serde(default)]
    pub protocol: ProtocolChoice,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_true")]
    pub refine: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_axis: Option<SweepAxis>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep_range: Option<RangeSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_rounds")]
    pub n_rounds: u64,
    /// Attempt rate to simulate; the optimum is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_lambda: Option<f64>,
    /// Share to simulate; the optimum is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim_rho: Option<f64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

impl ScenarioFile {
    /// Scenario around `params` with default command settings.
    pub fn from_params(params: &SystemParams) -> Self {
        let p = params.clone();
        ScenarioFile {
            n_fl: p.n_fl,
            lambda_fresh: p.lambda_fresh,
            t_cpu: p.t_cpu,
            t_round: p.t_round,
            q_min: p.q_min,
            eps_retx: p.eps_retx,
            bandwidth: p.bandwidth,
            s_fl: p.s_fl,
            s_ra: p.s_ra,
            gains_fl: p.gains_fl,
            gain_ra: p.gain_ra,
            p_tx_fl: p.p_tx_fl,
            p_tx_ra: p.p_tx_ra,
            n0: p.n0,
            protocol: ProtocolChoice::default(),
            grid_step: default_grid_step(),
            refine: true,
            sweep_axis: None,
            sweep_range: None,
            seed: 0,
            n_rounds: default_rounds(),
            sim_lambda: None,
            sim_rho: None,
            out_dir: default_out_dir(),
        }
    }

    pub fn params(&self) -> SystemParams {
        SystemParams {
            n_fl: self.n_fl,
            lambda_fresh: self.lambda_fresh,
            t_cpu: self.t_cpu,
            t_round: self.t_round,
            q_min: self.q_min,
            eps_retx: self.eps_retx,
            bandwidth: self.bandwidth,
            s_fl: self.s_fl,
            s_ra: self.s_ra,
            gains_fl: self.gains_fl.clone(),
            gain_ra: self.gain_ra,
            p_tx_fl: self.p_tx_fl,
            p_tx_ra: self.p_tx_ra,
            n0: self.n0,
        }
    }

    /// Parses and validates a scenario.
    pub fn from_json(text: &str) -> Result<Self, String> {
        let scenario: ScenarioFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        scenario
            .params()
            .validate()
            .map_err(|e| format!("invalid parameters: {e}"))?;
        Ok(scenario)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let scenario_err = |source: Box<dyn std::error::Error + Send + Sync>| CliError::Scenario {
            path: path.to_path_buf(),
            source,
        };
        let text = std::fs::read_to_string(path).map_err(|e| scenario_err(e.into()))?;
        Self::from_json(&text).map_err(|e| scenario_err(e.into()))
    }
}

impl Default for ScenarioFile {
    fn default() -> Self {
        Self::from_params(&SystemParams::table_one())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_values_include_stop() {
        let r: RangeSpec = "10:100:10".parse().unwrap();
        assert_eq!(r.values().len(), 10);
        assert_eq!(*r.values().last().unwrap(), 100.0);
        let r: RangeSpec = "0:1:0.01".parse().unwrap();
        assert_eq!(r.values().len(), 101);
        assert_eq!(*r.values().last().unwrap(), 1.0);
        let r: RangeSpec = "5:5:1".parse().unwrap();
        assert_eq!(r.values(), vec![5.0]);
    }

    #[test]
    fn bad_ranges_rejected() {
        for s in ["", "1:2", "1:2:0", "2:1:1", "a:2:1", "1:2:-1", "1:inf:1"] {
            assert!(s.parse::<RangeSpec>().is_err(), "{s}");
        }
    }

    #[test]
    fn unknown_key_rejected() {
        let mut value = serde_json::to_value(ScenarioFile::default()).unwrap();
        value["bandwith"] = 1.0.into();
        let err = ScenarioFile::from_json(&value.to_string()).unwrap_err();
        assert!(err.contains("bandwith"), "{err}");
    }

    #[test]
    fn invalid_params_rejected() {
        let s = ScenarioFile {
            n_fl: 3,
            ..ScenarioFile::default()
        };
        assert!(ScenarioFile::from_json(&s.to_json()).is_err());
    }

    #[test]
    fn defaults_fill_command_settings() {
        let mut value = serde_json::to_value(ScenarioFile::default()).unwrap();
        for key in [
            "protocol",
            "grid_step",
            "refine",
            "seed",
            "n_rounds",
            "out_dir",
        ] {
            value.as_object_mut().unwrap().remove(key);
        }
        let s = ScenarioFile::from_json(&value.to_string()).unwrap();
        assert_eq!(s, ScenarioFile::default());
    }
}
