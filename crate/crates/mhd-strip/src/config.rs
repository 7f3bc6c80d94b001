//! Run configuration: strict JSON schema with defaults, validation
//! errors carrying JSON pointer paths, and a canonical serializer
//! (fixed key order, 17 significant digits) so that identical
//! configurations produce byte-identical artifacts.

use std::collections::BTreeSet;

use serde_json::Value;
use thiserror::Error;

use crate::grid::GridSpec;
use crate::state::{InitialDataSpec, Mode, ModeCoeffs, PhysicalParams, ProfileKind};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config is not valid JSON: {0}")]
    Json(String),
    #[error("{path}: unknown key '{key}'")]
    UnknownKey { path: String, key: String },
    #[error("{path}: expected {expected}")]
    WrongType { path: String, expected: &'static str },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        path: path.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeConfig {
    pub horizon: f64,
    pub cfl_adv: f64,
    pub cfl_visc: f64,
    pub store_dt: f64,
    pub report_dt: f64,
    pub dt_cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormsConfig {
    pub m: usize,
    pub alpha0_max: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: String,
    pub dump_fields: bool,
}

/// The full run configuration; every field has a documented default
/// (emitted by `reference-config`).
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub grid: GridSpec,
    pub physics: PhysicalParams, // epsilon here is unused; runs set it
    pub initial: InitialDataSpec,
    pub time: TimeConfig,
    pub norms: NormsConfig,
    pub epsilon_list: Vec<f64>,
    pub filter_coeff: f64,
    pub output: OutputConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            grid: GridSpec {
                nx: 64,
                ny: 64,
                length_x: 1.0,
                ymax: 10.0,
                stretch_beta: 2.0,
            },
            physics: PhysicalParams {
                epsilon: 0.01,
                mu: 1.0,
                lambda: 0.0,
                gamma: 1.4,
            },
            initial: InitialDataSpec {
                amplitude: 0.01,
                modes: vec![Mode {
                    kx: 1,
                    profile: ProfileKind::Bump,
                    coeffs: ModeCoeffs {
                        rho: 0.5,
                        v1: 1.0,
                        v2: 0.7,
                        psi: 0.7,
                    },
                }],
            },
            time: TimeConfig {
                horizon: 0.5,
                cfl_adv: 0.4,
                cfl_visc: 0.25,
                store_dt: 0.01,
                report_dt: 0.05,
                dt_cap: None,
            },
            norms: NormsConfig { m: 2, alpha0_max: 2 },
            epsilon_list: vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
            filter_coeff: 0.002,
            output: OutputConfig {
                dir: "out".to_string(),
                dump_fields: false,
            },
        }
    }
}

fn profile_name(p: ProfileKind) -> &'static str {
    match p {
        ProfileKind::Wall2 => "wall2",
        ProfileKind::Wall3 => "wall3",
        ProfileKind::Gauss => "gauss",
        ProfileKind::Bump => "bump",
    }
}

fn profile_from_name(name: &str, path: &str) -> Result<ProfileKind, ConfigError> {
    match name {
        "wall2" => Ok(ProfileKind::Wall2),
        "wall3" => Ok(ProfileKind::Wall3),
        "gauss" => Ok(ProfileKind::Gauss),
        "bump" => Ok(ProfileKind::Bump),
        other => Err(invalid(
            path,
            format!("unknown profile '{other}' (expected wall2|wall3|gauss|bump)"),
        )),
    }
}

struct Walker<'a> {
    value: &'a Value,
    path: String,
}

impl<'a> Walker<'a> {
    fn object(&self, allowed: &[&str]) -> Result<(), ConfigError> {
        let map = self.value.as_object().ok_or(ConfigError::WrongType {
            path: self.path.clone(),
            expected: "object",
        })?;
        let allowed: BTreeSet<&str> = allowed.iter().copied().collect();
        for key in map.keys() {
            if !allowed.contains(key.as_str()) {
                return Err(ConfigError::UnknownKey {
                    path: self.path.clone(),
                    key: key.clone(),
                });
            }
        }
        Ok(())
    }

    fn child(&self, key: &str) -> Option<Walker<'a>> {
        self.value.get(key).map(|v| Walker {
            value: v,
            path: format!("{}/{}", self.path, key),
        })
    }

    fn f64(&self) -> Result<f64, ConfigError> {
        self.value
            .as_f64()
            .filter(|v| v.is_finite())
            .ok_or(ConfigError::WrongType {
                path: self.path.clone(),
                expected: "finite number",
            })
    }

    fn usize(&self) -> Result<usize, ConfigError> {
        self.value.as_u64().map(|v| v as usize).ok_or(ConfigError::WrongType {
            path: self.path.clone(),
            expected: "non-negative integer",
        })
    }

    fn bool(&self) -> Result<bool, ConfigError> {
        self.value.as_bool().ok_or(ConfigError::WrongType {
            path: self.path.clone(),
            expected: "boolean",
        })
    }

    fn string(&self) -> Result<&'a str, ConfigError> {
        self.value.as_str().ok_or(ConfigError::WrongType {
            path: self.path.clone(),
            expected: "string",
        })
    }

    fn array(&self) -> Result<Vec<Walker<'a>>, ConfigError> {
        let arr = self.value.as_array().ok_or(ConfigError::WrongType {
            path: self.path.clone(),
            expected: "array",
        })?;
        Ok(arr
            .iter()
            .enumerate()
            .map(|(k, v)| Walker {
                value: v,
                path: format!("{}/{}", self.path, k),
            })
            .collect())
    }
}

macro_rules! take_f64 {
    ($node:expr, $key:literal, $slot:expr) => {
        if let Some(w) = $node.child($key) {
            $slot = w.f64()?;
        }
    };
}

/// Parse and validate a configuration. Missing fields take their
/// defaults; unknown keys and out-of-range values are rejected with the
/// JSON pointer of the offending entry.
pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let root_value: Value =
        serde_json::from_str(text).map_err(|e| ConfigError::Json(e.to_string()))?;
    let root = Walker {
        value: &root_value,
        path: String::new(),
    };
    root.object(&[
        "grid",
        "physics",
        "initial",
        "time",
        "norms",
        "sweep",
        "stabilization",
        "output",
    ])?;

    let mut cfg = Config::default();

    if let Some(node) = root.child("grid") {
        node.object(&["nx", "ny", "length_x", "ymax", "stretch_beta"])?;
        if let Some(w) = node.child("nx") {
            cfg.grid.nx = w.usize()?;
        }
        if let Some(w) = node.child("ny") {
            cfg.grid.ny = w.usize()?;
        }
        take_f64!(node, "length_x", cfg.grid.length_x);
        take_f64!(node, "ymax", cfg.grid.ymax);
        take_f64!(node, "stretch_beta", cfg.grid.stretch_beta);
        cfg.grid
            .validate()
            .map_err(|e| invalid(&node.path, e.to_string()))?;
    }

    if let Some(node) = root.child("physics") {
        node.object(&["mu", "lambda", "gamma"])?;
        take_f64!(node, "mu", cfg.physics.mu);
        take_f64!(node, "lambda", cfg.physics.lambda);
        take_f64!(node, "gamma", cfg.physics.gamma);
        if !(cfg.physics.mu > 0.0) {
            return Err(invalid("/physics/mu", "mu must be > 0"));
        }
        if !(cfg.physics.mu + cfg.physics.lambda > 0.0) {
            return Err(invalid("/physics/lambda", "mu + lambda must be > 0"));
        }
        if !(cfg.physics.gamma >= 1.0) {
            return Err(invalid("/physics/gamma", "gamma must be >= 1"));
        }
    }

    if let Some(node) = root.child("initial") {
        node.object(&["amplitude", "modes"])?;
        if let Some(w) = node.child("amplitude") {
            cfg.initial.amplitude = w.f64()?;
            if !(cfg.initial.amplitude >= 0.0) {
                return Err(invalid(&w.path, "amplitude must be >= 0"));
            }
        }
        if let Some(w) = node.child("modes") {
            let mut modes = Vec::new();
            for entry in w.array()? {
                entry.object(&["kx", "profile", "coeffs"])?;
                let mut mode = Mode {
                    kx: 1,
                    profile: ProfileKind::Bump,
                    coeffs: ModeCoeffs {
                        rho: 0.0,
                        v1: 0.0,
                        v2: 0.0,
                        psi: 0.0,
                    },
                };
                if let Some(k) = entry.child("kx") {
                    mode.kx = k.usize()?;
                }
                if let Some(p) = entry.child("profile") {
                    mode.profile = profile_from_name(p.string()?, &p.path)?;
                }
                if let Some(c) = entry.child("coeffs") {
                    c.object(&["rho", "v1", "v2", "psi"])?;
                    take_f64!(c, "rho", mode.coeffs.rho);
                    take_f64!(c, "v1", mode.coeffs.v1);
                    take_f64!(c, "v2", mode.coeffs.v2);
                    take_f64!(c, "psi", mode.coeffs.psi);
                }
                modes.push(mode);
            }
            cfg.initial.modes = modes;
        }
    }

    if let Some(node) = root.child("time") {
        node.object(&[
            "horizon",
            "cfl_adv",
            "cfl_visc",
            "store_dt",
            "report_dt",
            "dt_cap",
        ])?;
        take_f64!(node, "horizon", cfg.time.horizon);
        take_f64!(node, "cfl_adv", cfg.time.cfl_adv);
        take_f64!(node, "cfl_visc", cfg.time.cfl_visc);
        take_f64!(node, "store_dt", cfg.time.store_dt);
        take_f64!(node, "report_dt", cfg.time.report_dt);
        if let Some(w) = node.child("dt_cap") {
            cfg.time.dt_cap = if w.value.is_null() {
                None
            } else {
                let v = w.f64()?;
                if !(v > 0.0) {
                    return Err(invalid(&w.path, "dt_cap must be positive or null"));
                }
                Some(v)
            };
        }
        let t = &cfg.time;
        if !(t.horizon > 0.0) {
            return Err(invalid("/time/horizon", "horizon must be > 0"));
        }
        for (name, v) in [("cfl_adv", t.cfl_adv), ("cfl_visc", t.cfl_visc)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(invalid(
                    &format!("/time/{name}"),
                    "Courant numbers must lie in (0, 1]",
                ));
            }
        }
        if !(t.store_dt > 0.0) {
            return Err(invalid("/time/store_dt", "store_dt must be > 0"));
        }
        let ratio = t.report_dt / t.store_dt;
        if !(t.report_dt > 0.0) || (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 - 1e-9 {
            return Err(invalid(
                "/time/report_dt",
                "report_dt must be a positive integer multiple of store_dt",
            ));
        }
        if t.report_dt > t.horizon + 1e-12 {
            return Err(invalid("/time/report_dt", "report_dt must not exceed horizon"));
        }
    }

    if let Some(node) = root.child("norms") {
        node.object(&["m", "alpha0_max"])?;
        if let Some(w) = node.child("m") {
            cfg.norms.m = w.usize()?;
        }
        if let Some(w) = node.child("alpha0_max") {
            cfg.norms.alpha0_max = w.usize()?;
        }
        if cfg.norms.m < 1 || cfg.norms.m > crate::conormal::M_MAX {
            return Err(invalid(
                "/norms/m",
                format!("m must lie in 1..={}", crate::conormal::M_MAX),
            ));
        }
        if cfg.norms.alpha0_max > 2 {
            return Err(invalid("/norms/alpha0_max", "alpha0_max must be <= 2"));
        }
    }

    if let Some(node) = root.child("sweep") {
        node.object(&["epsilon_list"])?;
        if let Some(w) = node.child("epsilon_list") {
            let mut list = Vec::new();
            for entry in w.array()? {
                let v = entry.f64()?;
                if !(v > 0.0 && v <= 1.0) {
                    return Err(invalid(&entry.path, "epsilon must lie in (0, 1]"));
                }
                if let Some(&last) = list.last() {
                    if v >= last {
                        return Err(invalid(&entry.path, "epsilon_list must be strictly decreasing"));
                    }
                }
                list.push(v);
            }
            if list.is_empty() {
                return Err(invalid(&w.path, "epsilon_list must not be empty"));
            }
            cfg.epsilon_list = list;
        }
    }

    if let Some(node) = root.child("stabilization") {
        node.object(&["filter_coeff"])?;
        if let Some(w) = node.child("filter_coeff") {
            cfg.filter_coeff = w.f64()?;
            if !(cfg.filter_coeff >= 0.0 && cfg.filter_coeff <= 0.0625) {
                return Err(invalid(&w.path, "filter_coeff must lie in [0, 1/16]"));
            }
        }
    }

    if let Some(node) = root.child("output") {
        node.object(&["dir", "dump_fields"])?;
        if let Some(w) = node.child("dir") {
            cfg.output.dir = w.string()?.to_string();
            if cfg.output.dir.is_empty() {
                return Err(invalid(&w.path, "output dir must not be empty"));
            }
        }
        if let Some(w) = node.child("dump_fields") {
            cfg.output.dump_fields = w.bool()?;
        }
    }

    Ok(cfg)
}

/// 17 significant digits, round-trip stable.
pub fn fmt_f64(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Canonical JSON: fixed key order, two-space indent, every float with
/// 17 significant digits.
pub fn to_canonical_json(cfg: &Config) -> String {
    let mut s = String::new();
    s.push_str("{\n");
    s.push_str(&format!(
        "  \"grid\": {{\"nx\": {}, \"ny\": {}, \"length_x\": {}, \"ymax\": {}, \"stretch_beta\": {}}},\n",
        cfg.grid.nx,
        cfg.grid.ny,
        fmt_f64(cfg.grid.length_x),
        fmt_f64(cfg.grid.ymax),
        fmt_f64(cfg.grid.stretch_beta)
    ));
    s.push_str(&format!(
        "  \"physics\": {{\"mu\": {}, \"lambda\": {}, \"gamma\": {}}},\n",
        fmt_f64(cfg.physics.mu),
        fmt_f64(cfg.physics.lambda),
        fmt_f64(cfg.physics.gamma)
    ));
    s.push_str(&format!(
        "  \"initial\": {{\"amplitude\": {}, \"modes\": [",
        fmt_f64(cfg.initial.amplitude)
    ));
    for (k, mode) in cfg.initial.modes.iter().enumerate() {
        if k > 0 {
            s.push_str(", ");
        }
        s.push_str(&format!(
            "{{\"kx\": {}, \"profile\": \"{}\", \"coeffs\": {{\"rho\": {}, \"v1\": {}, \"v2\": {}, \"psi\": {}}}}}",
            mode.kx,
            profile_name(mode.profile),
            fmt_f64(mode.coeffs.rho),
            fmt_f64(mode.coeffs.v1),
            fmt_f64(mode.coeffs.v2),
            fmt_f64(mode.coeffs.psi)
        ));
    }
    s.push_str("]},\n");
    let dt_cap = match cfg.time.dt_cap {
        Some(v) => fmt_f64(v),
        None => "null".to_string(),
    };
    s.push_str(&format!(
        "  \"time\": {{\"horizon\": {}, \"cfl_adv\": {}, \"cfl_visc\": {}, \"store_dt\": {}, \"report_dt\": {}, \"dt_cap\": {}}},\n",
        fmt_f64(cfg.time.horizon),
        fmt_f64(cfg.time.cfl_adv),
        fmt_f64(cfg.time.cfl_visc),
        fmt_f64(cfg.time.store_dt),
        fmt_f64(cfg.time.report_dt),
        dt_cap
    ));
    s.push_str(&format!(
        "  \"norms\": {{\"m\": {}, \"alpha0_max\": {}}},\n",
        cfg.norms.m, cfg.norms.alpha0_max
    ));
    s.push_str("  \"sweep\": {\"epsilon_list\": [");
    for (k, eps) in cfg.epsilon_list.iter().enumerate() {
        if k > 0 {
            s.push_str(", ");
        }
        s.push_str(&fmt_f64(*eps));
    }
    s.push_str("]},\n");
    s.push_str(&format!(
        "  \"stabilization\": {{\"filter_coeff\": {}}},\n",
        fmt_f64(cfg.filter_coeff)
    ));
    s.push_str(&format!(
        "  \"output\": {{\"dir\": {}, \"dump_fields\": {}}}\n",
        serde_json::to_string(&cfg.output.dir).expect("string encodes"),
        cfg.output.dump_fields
    ));
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_config_round_trips_to_defaults() {
        let reference = to_canonical_json(&Config::default());
        let parsed = parse_config(&reference).unwrap();
        assert_eq!(parsed, Config::default());
        // canonical form is a fixed point
        assert_eq!(to_canonical_json(&parsed), reference);
    }

    #[test]
    fn zero_mu_rejected_with_path() {
        let err = parse_config(r#"{"physics": {"mu": 0.0}}"#).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("/physics/mu"), "{text}");
    }

    #[test]
    fn unknown_key_rejected_with_path() {
        let err = parse_config(r#"{"physics": {"viscocity": 1.0}}"#).unwrap_err();
        let text = err.to_string();
        assert!(text.contains("viscocity"), "{text}");
        assert!(text.contains("/physics"), "{text}");
        let err = parse_config(r#"{"grib": {}}"#).unwrap_err();
        assert!(err.to_string().contains("grib"));
    }

    #[test]
    fn report_cadence_must_divide() {
        let err =
            parse_config(r#"{"time": {"store_dt": 0.01, "report_dt": 0.025}}"#).unwrap_err();
        assert!(err.to_string().contains("report_dt"));
        assert!(parse_config(r#"{"time": {"store_dt": 0.01, "report_dt": 0.05}}"#).is_ok());
    }

    #[test]
    fn epsilon_list_must_decrease() {
        let err = parse_config(r#"{"sweep": {"epsilon_list": [0.1, 0.1]}}"#).unwrap_err();
        assert!(err.to_string().contains("strictly decreasing"));
        let err = parse_config(r#"{"sweep": {"epsilon_list": [0.1, 1.5]}}"#).unwrap_err();
        assert!(err.to_string().contains("epsilon"));
    }

    #[test]
    fn partial_config_overrides_defaults() {
        let cfg = parse_config(r#"{"grid": {"nx": 32, "ny": 32}, "norms": {"m": 3}}"#).unwrap();
        assert_eq!(cfg.grid.nx, 32);
        assert_eq!(cfg.norms.m, 3);
        assert_eq!(cfg.time.horizon, Config::default().time.horizon);
    }

    #[test]
    fn bad_profile_name_rejected() {
        let err = parse_config(
            r#"{"initial": {"modes": [{"kx": 1, "profile": "quartic", "coeffs": {}}]}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("/initial/modes/0/profile"));
    }
}
