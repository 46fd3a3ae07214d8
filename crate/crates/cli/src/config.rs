//! Scenario configuration: a flat `key = value` file, overridden by flags.
//!
//! ```text
//! # comment
//! mode = spin
//! j = 1.5
//! temp = 2.0        # zero | inf | positive number
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::PathBuf;

use dqpt_core::band::{ssh_bloch, BandQuenchScenario, DEFAULT_K_POINTS};
use dqpt_core::quench::{RateNorm, SpinQuenchScenario};
use dqpt_core::{SpinDirection, SpinJ, Temperature};

use crate::error::{CliError, Result};

pub const KEYS: &[&str] = &[
    "mode", "j", "temp", "omega0", "theta0", "phi0", "theta", "phi", "dot", "mi", "mf", "j2", "t_max",
    "t_steps", "k_points", "out", "phase_map", "rate_norm",
];

const SPIN_KEYS: &[&str] = &["j", "omega0", "theta0", "phi0", "theta", "phi", "dot", "rate_norm"];
const SSH_KEYS: &[&str] = &["mi", "mf", "j2", "k_points", "phase_map"];

pub const DEFAULT_T_STEPS: usize = 4000;
pub const DEFAULT_SPIN_T_MAX: f64 = 20.0;
pub const DEFAULT_SSH_T_MAX: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    TwoLevel,
    Spin,
    Ssh,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::TwoLevel => "two-level",
            Mode::Spin => "spin",
            Mode::Ssh => "ssh",
        }
    }

    fn parse(v: &str) -> Result<Self> {
        match v {
            "two-level" => Ok(Mode::TwoLevel),
            "spin" => Ok(Mode::Spin),
            "ssh" => Ok(Mode::Ssh),
            _ => Err(bad("mode", v, "expected one of two-level, spin, ssh")),
        }
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Mode::TwoLevel => &["temp"],
            Mode::Spin => &["j", "temp"],
            Mode::Ssh => &["mi", "mf", "temp"],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FinalDirection {
    Angles { theta: f64, phi: f64 },
    Overlap(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpinParams {
    pub spin: SpinJ,
    pub omega0: f64,
    pub theta0: f64,
    pub phi0: f64,
    pub direction: FinalDirection,
    pub rate_norm: RateNorm,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SshParams {
    pub mi: f64,
    pub mf: f64,
    pub j2: f64,
    pub k_points: usize,
    pub phase_map: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Physics {
    Spin(SpinParams),
    Ssh(SshParams),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub temperature: Temperature,
    pub physics: Physics,
    pub t_max: f64,
    pub t_steps: usize,
    pub out: Option<PathBuf>,
}

fn bad(key: &str, value: &str, why: &str) -> CliError {
    CliError::Config(format!("invalid value `{value}` for key `{key}`: {why}"))
}

/// Parses the `key = value` grammar into raw entries.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected `key = value`, found `{line}`", i + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(CliError::Config(format!("line {}: unknown key `{key}`", i + 1)));
        }
        if map.insert(key.to_string(), value.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(map)
}

struct Entries(BTreeMap<String, String>);

impl Entries {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.raw(key)
            .map(|v| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(bad(key, v, "expected a finite number")),
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.raw(key)
            .map(|v| v.parse::<usize>().map_err(|_| bad(key, v, "expected a non-negative integer")))
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }
}

fn parse_temperature(v: &str) -> Result<Temperature> {
    match v {
        "zero" | "0" => Ok(Temperature::Zero),
        "inf" | "infinite" => Ok(Temperature::Infinite),
        _ => {
            let t: f64 = v.parse().map_err(|_| bad("temp", v, "expected zero, inf or a positive number"))?;
            Temperature::finite(t).map_err(|e| bad("temp", v, &e.to_string()))
        }
    }
}

fn temperature_str(t: Temperature) -> String {
    match t {
        Temperature::Zero => "zero".into(),
        Temperature::Infinite => "inf".into(),
        Temperature::Finite(v) => format!("{v}"),
    }
}

fn parse_rate_norm(v: &str) -> Result<RateNorm> {
    match v {
        "one" => Ok(RateNorm::One),
        "two-j" => Ok(RateNorm::TwoJ),
        "dim" => Ok(RateNorm::Dim),
        _ => Err(bad("rate_norm", v, "expected one of one, two-j, dim")),
    }
}

fn rate_norm_str(r: RateNorm) -> &'static str {
    match r {
        RateNorm::One => "one",
        RateNorm::TwoJ => "two-j",
        RateNorm::Dim => "dim",
    }
}

impl ScenarioConfig {
    /// Merges file entries with flag entries (flags win) and validates.
    pub fn from_sources(file: Option<&str>, flags: &BTreeMap<String, String>) -> Result<Self> {
        let mut map = match file {
            Some(text) => parse_entries(text)?,
            None => BTreeMap::new(),
        };
        for (k, v) in flags {
            if !KEYS.contains(&k.as_str()) {
                return Err(CliError::Config(format!("unknown key `{k}`")));
            }
            map.insert(k.clone(), v.clone());
        }
        Self::from_entries(map)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_entries(parse_entries(text)?)
    }

    fn from_entries(map: BTreeMap<String, String>) -> Result<Self> {
        let e = Entries(map);
        let Some(mode) = e.raw("mode") else {
            return Err(CliError::Config(
                "missing required key `mode` (two-level, spin or ssh); \
                 spin needs j and temp, two-level needs temp, ssh needs mi, mf and temp"
                    .into(),
            ));
        };
        let mode = Mode::parse(mode)?;
        let missing: Vec<&str> = mode.required().iter().copied().filter(|k| e.raw(k).is_none()).collect();
        if !missing.is_empty() {
            return Err(CliError::Config(format!(
                "missing required key(s) for mode {}: {}",
                mode.as_str(),
                missing.join(", ")
            )));
        }
        let foreign = if mode == Mode::Ssh { SPIN_KEYS } else { SSH_KEYS };
        if let Some(k) = foreign.iter().find(|k| e.raw(k).is_some()) {
            return Err(CliError::Config(format!("key `{k}` does not apply to mode {}", mode.as_str())));
        }

        let temperature = parse_temperature(e.raw("temp").unwrap_or_default())?;
        let t_max = e.f64("t_max")?.unwrap_or(if mode == Mode::Ssh {
            DEFAULT_SSH_T_MAX
        } else {
            DEFAULT_SPIN_T_MAX
        });
        if !(t_max > 0.0) {
            return Err(bad("t_max", &t_max.to_string(), "must be positive"));
        }
        let t_steps = e.usize("t_steps")?.unwrap_or(DEFAULT_T_STEPS);
        let min_steps = if mode == Mode::Ssh { 3 } else { 1 };
        if t_steps < min_steps {
            return Err(bad("t_steps", &t_steps.to_string(), &format!("need at least {min_steps}")));
        }

        let physics = match mode {
            Mode::Ssh => {
                let k_points = e.usize("k_points")?.unwrap_or(DEFAULT_K_POINTS);
                if k_points < 3 {
                    return Err(bad("k_points", &k_points.to_string(), "need at least 3"));
                }
                Physics::Ssh(SshParams {
                    mi: e.f64("mi")?.unwrap_or_default(),
                    mf: e.f64("mf")?.unwrap_or_default(),
                    j2: e.f64("j2")?.unwrap_or(1.0),
                    k_points,
                    phase_map: e.path("phase_map"),
                })
            }
            Mode::Spin | Mode::TwoLevel => {
                let j = e.f64("j")?.unwrap_or(0.5);
                if mode == Mode::TwoLevel && j != 0.5 {
                    return Err(bad("j", &j.to_string(), "two-level mode is fixed to j = 0.5"));
                }
                let spin = SpinJ::from_j(j).map_err(|err| bad("j", &j.to_string(), &err.to_string()))?;
                let (theta, phi, dot) = (e.f64("theta")?, e.f64("phi")?, e.f64("dot")?);
                let direction = match (dot, theta, phi) {
                    (Some(_), Some(_), _) | (Some(_), _, Some(_)) => {
                        return Err(CliError::Config("key `dot` conflicts with `theta`/`phi`".into()))
                    }
                    (Some(d), None, None) => FinalDirection::Overlap(d),
                    (None, th, ph) => FinalDirection::Angles {
                        theta: th.unwrap_or(PI / 2.0),
                        phi: ph.unwrap_or(0.0),
                    },
                };
                Physics::Spin(SpinParams {
                    spin,
                    omega0: e.f64("omega0")?.unwrap_or(1.0),
                    theta0: e.f64("theta0")?.unwrap_or(0.0),
                    phi0: e.f64("phi0")?.unwrap_or(0.0),
                    direction,
                    rate_norm: e.raw("rate_norm").map(parse_rate_norm).transpose()?.unwrap_or_default(),
                })
            }
        };
        let cfg = ScenarioConfig {
            mode,
            temperature,
            physics,
            t_max,
            t_steps,
            out: e.path("out"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Re-checks every physical constraint by building the core scenario.
    pub fn validate(&self) -> Result<()> {
        match &self.physics {
            Physics::Spin(_) => self.spin_scenario().map(|_| ()),
            Physics::Ssh(p) => {
                if !(p.j2 > 0.0) {
                    return Err(bad("j2", &p.j2.to_string(), "must be positive"));
                }
                ssh_bloch(p.mi, p.j2).map_err(|e| keyed("mi", e))?;
                ssh_bloch(p.mf, p.j2).map_err(|e| keyed("mf", e))?;
                Ok(())
            }
        }
    }

    pub fn spin_params(&self) -> Option<&SpinParams> {
        match &self.physics {
            Physics::Spin(p) => Some(p),
            Physics::Ssh(_) => None,
        }
    }

    pub fn ssh_params(&self) -> Option<&SshParams> {
        match &self.physics {
            Physics::Ssh(p) => Some(p),
            Physics::Spin(_) => None,
        }
    }

    pub fn spin_scenario(&self) -> Result<SpinQuenchScenario> {
        let p = self
            .spin_params()
            .ok_or_else(|| CliError::Config(format!("mode {} is not a spin scenario", self.mode.as_str())))?;
        let b0 = SpinDirection::new(p.theta0, p.phi0).map_err(|e| keyed("theta0", e))?;
        let b = match p.direction {
            FinalDirection::Angles { theta, phi } => SpinDirection::new(theta, phi).map_err(|e| keyed("theta", e))?,
            FinalDirection::Overlap(d) => SpinDirection::at_overlap(b0, d).map_err(|e| keyed("dot", e))?,
        };
        SpinQuenchScenario::new(p.spin, p.omega0, self.temperature, b0, b).map_err(|e| keyed("omega0", e))
    }

    pub fn ssh_scenario(&self) -> Result<BandQuenchScenario> {
        let p = self
            .ssh_params()
            .ok_or_else(|| CliError::Config(format!("mode {} is not an ssh scenario", self.mode.as_str())))?;
        Ok(BandQuenchScenario::uniform(
            ssh_bloch(p.mi, p.j2)?,
            ssh_bloch(p.mf, p.j2)?,
            self.temperature,
            p.k_points,
            self.t_max,
            self.t_steps,
        )?)
    }

    /// All effective entries, defaults included, in a fixed order.
    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("mode", self.mode.as_str().into());
        put("temp", temperature_str(self.temperature));
        put("t_max", format!("{}", self.t_max));
        put("t_steps", self.t_steps.to_string());
        if let Some(out) = &self.out {
            put("out", out.display().to_string());
        }
        match &self.physics {
            Physics::Spin(p) => {
                put("j", format!("{}", p.spin.j()));
                put("omega0", format!("{}", p.omega0));
                put("theta0", format!("{}", p.theta0));
                put("phi0", format!("{}", p.phi0));
                match p.direction {
                    FinalDirection::Angles { theta, phi } => {
                        put("theta", format!("{theta}"));
                        put("phi", format!("{phi}"));
                    }
                    FinalDirection::Overlap(d) => put("dot", format!("{d}")),
                }
                put("rate_norm", rate_norm_str(p.rate_norm).into());
            }
            Physics::Ssh(p) => {
                put("mi", format!("{}", p.mi));
                put("mf", format!("{}", p.mf));
                put("j2", format!("{}", p.j2));
                put("k_points", p.k_points.to_string());
                if let Some(pm) = &p.phase_map {
                    put("phase_map", pm.display().to_string());
                }
            }
        }
        m
    }

    /// Serializes to the config grammar; `parse(emit())` reproduces `self`.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }
}

fn keyed(key: &str, e: dqpt_core::Error) -> CliError {
    CliError::Config(format!("invalid `{key}`: {e}"))
}
