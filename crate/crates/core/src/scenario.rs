//! Declarative experiment files.
//!
//! A scenario is a JSON document; field names carry units. Unknown keys are
//! rejected, and validation failures point at the offending line.
//!
//! ```json
//! {
//!   "id": "narrow_passage_avclbf",
//!   "model": "unicycle4",
//!   "initial_state": { "x_m": -2.5, "y_m": 0.0, "theta_rad": 0.0, "v_m_per_s": 0.5 },
//!   "safety_gains": { "k1": 1.0, "k2": 1.0 },
//!   "controller": { "family": "avclbf", "l1": 0.5, "l2": 1.0, "q": 0.6667, ... },
//!   "regions": [ { "center_x_m": 0.0, "center_y_m": 1.0, "radius_m": 1.0, "mode": "keep_out" } ],
//!   "targets": [ { "center_x_m": 3.0, "center_y_m": 0.0, "radius_m": 1.0, "deadline_s": 5.0 } ],
//!   "sim": { "dt_s": 0.01, "t_max_s": 6.0, "u_min": [-10, -5], "u_max": [10, 5] }
//! }
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::{HoclbfGains, TvCbfGains};
use crate::error::Error;
use crate::model::UnicycleState;
use crate::reach::{AvclbfGains, ReachTarget};
use crate::safety::{CircularRegion, HocbfGains};
use crate::sim::SimConfig;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{}{field}: {message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Invalid {
        field: String,
        line: Option<usize>,
        message: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    /// `(x, y, θ, v)` with inputs `(ω, a)`.
    #[default]
    Unicycle4,
    /// `(x, y, θ)` at the constant initial speed, input `ω`.
    Unicycle3,
}

impl ModelKind {
    pub fn input_count(self) -> usize {
        match self {
            Self::Unicycle4 => 2,
            Self::Unicycle3 => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub x_m: f64,
    pub y_m: f64,
    pub theta_rad: f64,
    pub v_m_per_s: f64,
}

impl From<InitialState> for UnicycleState {
    fn from(s: InitialState) -> Self {
        UnicycleState::new(s.x_m, s.y_m, s.theta_rad, s.v_m_per_s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ControllerConfig {
    Avclbf(AvclbfGains),
    Hoclbf(HoclbfGains),
    Tvcbf(TvCbfGains),
}

impl ControllerConfig {
    pub fn family(&self) -> &'static str {
        match self {
            Self::Avclbf(_) => "avclbf",
            Self::Hoclbf(_) => "hoclbf",
            Self::Tvcbf(_) => "tvcbf",
        }
    }

    pub fn has_auxiliary(&self) -> bool {
        matches!(self, Self::Avclbf(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    #[serde(default = "yes")]
    pub write_series: bool,
}

impl Default for OutputOptions {
    fn default() -> Self {
        Self { write_series: true }
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default)]
    pub model: ModelKind,
    pub initial_state: InitialState,
    pub safety_gains: HocbfGains,
    pub controller: ControllerConfig,
    #[serde(default)]
    pub regions: Vec<CircularRegion>,
    #[serde(default)]
    pub targets: Vec<ReachTarget>,
    pub sim: SimConfig,
    #[serde(default)]
    pub output: OutputOptions,
}

impl ScenarioConfig {
    pub fn initial_state(&self) -> UnicycleState {
        self.initial_state.into()
    }

    /// Initial auxiliary variable; 1 for the benchmark families.
    pub fn initial_a1(&self) -> f64 {
        match &self.controller {
            ControllerConfig::Avclbf(g) => g.a1_0,
            _ => 1.0,
        }
    }

    /// Checks every field, returning the dotted path of the first bad one.
    pub fn validate(&self) -> Result<(), (String, Error)> {
        let at = |field: String| move |e: Error| (field, e);
        if self.id.trim().is_empty() {
            return Err(("id".into(), Error::InvalidParameter("id must not be empty".into())));
        }
        let s = self.initial_state();
        if !s.is_finite() {
            return Err((
                "initial_state".into(),
                Error::InvalidParameter("initial state must be finite".into()),
            ));
        }
        if self.model == ModelKind::Unicycle3 && !(s.v > 0.0) {
            return Err((
                "initial_state.v_m_per_s".into(),
                Error::InvalidParameter("the constant-speed model needs a positive speed".into()),
            ));
        }
        self.safety_gains.validate().map_err(at("safety_gains".into()))?;
        match &self.controller {
            ControllerConfig::Avclbf(g) => {
                if !(g.q > 0.0 && g.q < 1.0) {
                    return Err(("controller.q".into(), Error::ExponentOutOfRange(g.q)));
                }
                g.validate().map_err(at("controller".into()))?
            }
            ControllerConfig::Hoclbf(g) => g.validate().map_err(at("controller".into()))?,
            ControllerConfig::Tvcbf(g) => g.validate().map_err(at("controller".into()))?,
        }
        for (i, r) in self.regions.iter().enumerate() {
            r.validate().map_err(at(format!("regions.{i}.radius_m")))?;
        }
        for (i, t) in self.targets.iter().enumerate() {
            t.validate().map_err(at(format!("targets.{i}")))?;
        }
        self.sim
            .validate(self.model.input_count())
            .map_err(at("sim".into()))?;
        Ok(())
    }
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenario_str(&text)
}

pub fn parse_scenario_str(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
        let (line, column) = unknown_key_position(text, &e).unwrap_or((e.line(), e.column()));
        ScenarioError::Syntax {
            line,
            column,
            message: e.to_string(),
        }
    })?;
    cfg.validate().map_err(|(field, err)| ScenarioError::Invalid {
        line: locate(text, &field),
        field,
        message: err.to_string(),
    })?;
    Ok(cfg)
}

/// Tagged enums buffer their body, so serde reports unknown keys at the end
/// of the enclosing object. Point at the last occurrence of the key before that.
fn unknown_key_position(text: &str, e: &serde_json::Error) -> Option<(usize, usize)> {
    let msg = e.to_string();
    let name = msg.strip_prefix("unknown field `")?.split('`').next()?;
    let end: usize = text
        .split_inclusive('\n')
        .take(e.line().saturating_sub(1))
        .map(str::len)
        .sum::<usize>()
        + e.column();
    let at = text[..end.min(text.len())].rfind(&format!("\"{name}\""))?;
    let line = text[..at].matches('\n').count() + 1;
    let column = at - text[..at].rfind('\n').map_or(0, |p| p + 1) + 1;
    Some((line, column))
}

/// Best-effort line of a dotted field path inside the source text.
fn locate(text: &str, field: &str) -> Option<usize> {
    let segments: Vec<&str> = field.split('.').collect();
    let mut pos = 0;
    let mut i = 0;
    let mut found = None;
    while i < segments.len() {
        let seg = segments[i];
        let (key, skip) = match seg.parse::<usize>() {
            Ok(k) => match segments.get(i + 1) {
                Some(next) => {
                    i += 1;
                    (*next, k)
                }
                None => break,
            },
            Err(_) => (seg, 0),
        };
        let needle = format!("\"{key}\"");
        let mut at = pos;
        for _ in 0..=skip {
            let off = text[at..].find(&needle)?;
            found = Some(at + off);
            at += off + needle.len();
        }
        pos = at;
        i += 1;
    }
    found.map(|p| text[..p].matches('\n').count() + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const NARROW: &str = r#"{
  "id": "narrow",
  "model": "unicycle4",
  "initial_state": { "x_m": -2.5, "y_m": 0.0, "theta_rad": 0.0, "v_m_per_s": 0.5 },
  "safety_gains": { "k1": 1.0, "k2": 1.0 },
  "controller": {
    "family": "avclbf",
    "l1": 0.5,
    "l2": 1.0,
    "q": 0.6666666666666666,
    "c_schedule": { "coefficients": [-1.0, 4.0] },
    "eps": 1e-10,
    "w1": 1000.0,
    "a1w": 1000.0,
    "a1_0": 1001.0
  },
  "regions": [
    { "center_x_m": 0.0, "center_y_m": 1.0, "radius_m": 1.0, "mode": "keep_out" },
    { "center_x_m": 0.0, "center_y_m": -1.0, "radius_m": 1.0, "mode": "keep_out" }
  ],
  "targets": [ { "center_x_m": 3.0, "center_y_m": 0.0, "radius_m": 1.0, "deadline_s": 5.0 } ],
  "sim": { "dt_s": 0.01, "t_max_s": 6.0, "u_min": [-10.0, -5.0], "u_max": [10.0, 5.0] }
}"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = parse_scenario_str(NARROW).unwrap();
        assert_eq!(cfg.regions.len(), 2);
        assert_eq!(cfg.controller.family(), "avclbf");
        assert!(cfg.output.write_series);
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(parse_scenario_str(&text).unwrap(), cfg);
    }

    #[test]
    fn rejects_q_outside_unit_interval() {
        let bad = NARROW.replace("0.6666666666666666", "1.5");
        match parse_scenario_str(&bad) {
            Err(ScenarioError::Invalid { field, line, message }) => {
                assert_eq!(field, "controller.q");
                assert_eq!(line, Some(10));
                assert!(message.contains("(0, 1)"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = NARROW.replace("\"eps\": 1e-10,", "\"eps\": 1e-10, \"epsilon\": 2,");
        let r = parse_scenario_str(&bad);
        assert!(matches!(r, Err(ScenarioError::Syntax { line: 12, .. })), "{r:?}");
        let bad = NARROW.replace("\"model\"", "\"modle\"");
        assert!(matches!(parse_scenario_str(&bad), Err(ScenarioError::Syntax { .. })));
    }

    #[test]
    fn rejects_mixed_families() {
        let bad = NARROW.replace("\"l1\": 0.5,", "\"l1\": 0.5, \"c1\": 5.0,");
        assert!(matches!(parse_scenario_str(&bad), Err(ScenarioError::Syntax { .. })));
    }

    #[test]
    fn missing_field_is_reported() {
        let bad = NARROW.replace("\"w1\": 1000.0,", "");
        match parse_scenario_str(&bad) {
            Err(ScenarioError::Syntax { message, .. }) => assert!(message.contains("w1"), "{message}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_regions_are_valid() {
        let start = NARROW.find("\"regions\"").unwrap();
        let end = NARROW.find("\"targets\"").unwrap();
        let text = format!("{}\"regions\": [],\n  {}", &NARROW[..start], &NARROW[end..]);
        assert!(parse_scenario_str(&text).unwrap().regions.is_empty());
    }

    #[test]
    fn locates_indexed_fields() {
        let bad = NARROW.replacen("\"radius_m\": 1.0, \"mode\": \"keep_out\" },\n    { \"center_x_m\": 0.0, \"center_y_m\": -1.0, \"radius_m\": 1.0",
            "\"radius_m\": 1.0, \"mode\": \"keep_out\" },\n    { \"center_x_m\": 0.0, \"center_y_m\": -1.0, \"radius_m\": -1.0", 1);
        match parse_scenario_str(&bad) {
            Err(ScenarioError::Invalid { field, line, .. }) => {
                assert_eq!(field, "regions.1.radius_m");
                assert_eq!(line, Some(19));
            }
            other => panic!("{other:?}"),
        }
    }
}
