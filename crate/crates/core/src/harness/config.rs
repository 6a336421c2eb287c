//! Experiment configuration: a `key = value` file merged with command-line
//! overrides, then resolved against per-command defaults.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde_json::json;

use crate::diagnostics::ReversalProtocol;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::profiles::{CrossSection, FrontKind, DEFAULT_SIGMA};
use crate::schemes::{CorrectorMode, SchemeConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Run,
    Conserve,
    Convergence,
    Reversibility,
    Bench,
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "run" => Command::Run,
            "conserve" => Command::Conserve,
            "convergence" => Command::Convergence,
            "reversibility" => Command::Reversibility,
            "bench" => Command::Bench,
            _ => return Err(Error::Config(format!("unknown command {s:?}"))),
        })
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Run => "run",
            Command::Conserve => "conserve",
            Command::Convergence => "convergence",
            Command::Reversibility => "reversibility",
            Command::Bench => "bench",
        })
    }
}

/// How the time step follows from the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    Fixed(f64),
    /// `dt = dx²`.
    Dx2,
    /// `dt = r · dx`.
    DxRatio(f64),
}

impl DtRule {
    pub fn dt(&self, g: &GridSpec) -> f64 {
        match *self {
            DtRule::Fixed(dt) => dt,
            DtRule::Dx2 => g.dx() * g.dx(),
            DtRule::DxRatio(r) => r * g.dx(),
        }
    }
}

impl fmt::Display for DtRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DtRule::Fixed(dt) => write!(f, "dt={dt}"),
            DtRule::Dx2 => f.write_str("dt=dx^2"),
            DtRule::DxRatio(r) => write!(f, "dt={r}*dx"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileKind {
    Sine,
    Front(FrontKind),
}

impl FromStr for ProfileKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "sine" {
            return Ok(ProfileKind::Sine);
        }
        s.parse()
            .map(ProfileKind::Front)
            .map_err(|_| Error::Config(format!("unknown profile {s:?}")))
    }
}

impl fmt::Display for ProfileKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileKind::Sine => f.write_str("sine"),
            ProfileKind::Front(k) => k.fmt(f),
        }
    }
}

const KEYS: &[&str] = &[
    "scheme",
    "grid",
    "grids",
    "reference",
    "alpha",
    "alpha_over_sigma",
    "dt",
    "dt_dx2",
    "dt_dx_ratio",
    "t_final",
    "profile",
    "sigma",
    "gaussian_cross_section",
    "corrector_rtol",
    "corrector_max_iter",
    "out",
    "snapshot_every",
    "seed",
    "full_scale",
    "steps",
    "reversal",
];

const DT_KEYS: &[&str] = &["dt", "dt_dx2", "dt_dx_ratio"];

/// Raw, unvalidated settings keyed by name. Dashes in keys are read as
/// underscores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl ToString) -> Result<()> {
        let key = key.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) {
            return Err(Error::Config(format!("unknown setting {key:?}")));
        }
        self.values.insert(key, value.to_string().trim().to_string());
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut s = Settings::new();
        for (no, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", no + 1)))?;
            s.set(k, v)
                .map_err(|e| Error::Config(format!("line {}: {e}", no + 1)))?;
        }
        Ok(s)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// `overrides` win. A time-step rule in `overrides` replaces any rule here.
    pub fn merged(mut self, overrides: &Settings) -> Self {
        if DT_KEYS.iter().any(|k| overrides.values.contains_key(*k)) {
            for k in DT_KEYS {
                self.values.remove(*k);
            }
        }
        for (k, v) in &overrides.values {
            self.values.insert(k.clone(), v.clone());
        }
        self
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::Config(format!("bad value {v:?} for {key}")))
            })
            .transpose()
    }

    fn flag(&self, key: &str) -> Result<bool> {
        match self.get(key) {
            None => Ok(false),
            Some("true" | "1" | "yes" | "") => Ok(true),
            Some("false" | "0" | "no") => Ok(false),
            Some(v) => Err(Error::Config(format!("bad value {v:?} for {key}"))),
        }
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    /// Schemes with placeholder step sizes; the step follows from `dt_rule`.
    pub schemes: Vec<SchemeConfig>,
    pub grid: (usize, usize),
    /// Square grid sizes for `convergence` and `bench`.
    pub grids: Vec<usize>,
    pub reference: usize,
    pub alpha: f64,
    pub dt_rule: DtRule,
    pub t_final: f64,
    pub profile: ProfileKind,
    pub sigma: f64,
    pub cross_section: CrossSection,
    pub out: PathBuf,
    pub snapshot_every: usize,
    pub seed: u64,
    pub full_scale: bool,
    pub steps: usize,
    pub reversal: ReversalProtocol,
    /// Whether scheme, profile, α or the step rule were set explicitly.
    pub custom_case: bool,
}

fn parse_grid(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("bad grid {s:?}, expected KxJ or N"));
    let (k, j) = match s.split_once(['x', 'X']) {
        Some((k, j)) => (k.trim().parse(), j.trim().parse()),
        None => (s.trim().parse(), s.trim().parse()),
    };
    let (k, j) = (k.map_err(|_| bad())?, j.map_err(|_| bad())?);
    if k < 3 || j < 3 {
        return Err(Error::Config(format!("grid {s:?} needs at least 3 points per axis")));
    }
    Ok((k, j))
}

fn parse_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| Error::Config(format!("bad grid size {v:?} in {s:?}")))
        })
        .collect()
}

fn parse_schemes(s: &str) -> Result<Vec<SchemeConfig>> {
    s.split(',').map(|v| v.trim().parse()).collect()
}

fn reversal_from(s: &str) -> Result<ReversalProtocol> {
    match s {
        "restart" => Ok(ReversalProtocol::Restart),
        "negate-swap" | "negate_swap" => Ok(ReversalProtocol::NegateSwap),
        _ => Err(Error::Config(format!("unknown reversal protocol {s:?}"))),
    }
}

pub fn reversal_name(p: ReversalProtocol) -> &'static str {
    match p {
        ReversalProtocol::Restart => "restart",
        ReversalProtocol::NegateSwap => "negate-swap",
    }
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be positive, got {v}")))
    }
}

impl ExperimentConfig {
    pub fn resolve(command: Command, s: &Settings) -> Result<Self> {
        use Command::*;
        let full_scale = s.flag("full_scale")?;
        let profile = match s.get("profile") {
            Some(p) => p.parse()?,
            None if command == Conserve => ProfileKind::Sine,
            None => ProfileKind::Front(FrontKind::Plate),
        };
        let sigma = positive("sigma", s.parsed("sigma")?.unwrap_or(DEFAULT_SIGMA))?;
        let alpha = match (s.parsed::<f64>("alpha")?, s.parsed::<f64>("alpha_over_sigma")?) {
            (Some(a), _) => positive("alpha", a)?,
            (None, Some(r)) => positive("alpha_over_sigma", r)? * sigma,
            (None, None) if profile == ProfileKind::Sine => 1.0,
            (None, None) => sigma,
        };

        let rules = [
            s.parsed::<f64>("dt")?.map(DtRule::Fixed),
            s.flag("dt_dx2")?.then_some(DtRule::Dx2),
            s.parsed::<f64>("dt_dx_ratio")?.map(DtRule::DxRatio),
        ];
        let mut rules = rules.into_iter().flatten();
        let explicit_dt = rules.next();
        if rules.next().is_some() {
            return Err(Error::Config("give at most one of dt, dt_dx2, dt_dx_ratio".into()));
        }
        let dt_rule = explicit_dt.unwrap_or(match command {
            Conserve => DtRule::Dx2,
            Convergence => DtRule::DxRatio(0.5),
            _ => DtRule::DxRatio(0.25),
        });
        match dt_rule {
            DtRule::Fixed(v) => {
                positive("dt", v)?;
            }
            DtRule::DxRatio(r) => {
                positive("dt_dx_ratio", r)?;
            }
            DtRule::Dx2 => {}
        }

        let mut schemes = match s.get("scheme") {
            Some(v) => parse_schemes(v)?,
            None => {
                let names: &[&str] = match command {
                    Conserve => &["scheme1", "scheme1-fixed=5", "scheme2", "scheme3", "rk4"],
                    Bench => &["scheme1-fixed=3", "scheme2", "scheme3", "rk4"],
                    _ => &["scheme2"],
                };
                names.iter().map(|n| n.parse()).collect::<Result<_>>()?
            }
        };
        let rtol = s.parsed::<f64>("corrector_rtol")?;
        let max_iter = s.parsed::<usize>("corrector_max_iter")?;
        for cfg in &mut schemes {
            if let CorrectorMode::Tolerance { rtol: r0, max_iter: m0 } = cfg.corrector_mode {
                let mode = CorrectorMode::Tolerance {
                    rtol: rtol.unwrap_or(r0),
                    max_iter: max_iter.unwrap_or(m0),
                };
                *cfg = cfg.with_corrector(mode).map_err(|e| Error::Config(e.to_string()))?;
            }
        }

        let default_grid = match (command, full_scale) {
            (Conserve, _) => 20,
            (Run, true) => 1025,
            (Run, false) => 128,
            _ => 200,
        };
        let grid = match s.get("grid") {
            Some(g) => parse_grid(g)?,
            None => (default_grid, default_grid),
        };
        let grids = match s.get("grids") {
            Some(g) => parse_list(g)?,
            None => match (command, full_scale) {
                (Convergence, false) => vec![32, 64, 128],
                (Convergence, true) => vec![64, 128, 256],
                (Bench, false) => vec![100, 200, 400],
                (Bench, true) => (1..=10).map(|i| 100 * i).collect(),
                _ => Vec::new(),
            },
        };
        let reference = match s.parsed::<usize>("reference")? {
            Some(r) => r,
            None if full_scale => 512,
            None => 256,
        };
        let t_final = match s.parsed::<f64>("t_final")? {
            Some(t) => positive("t_final", t)?,
            None => match command {
                Conserve => 50.0,
                Run => 0.5,
                Convergence => 0.375,
                Reversibility => 0.25,
                Bench => 0.0,
            },
        };
        let cross_section = if s.flag("gaussian_cross_section")? {
            CrossSection::Gaussian
        } else {
            CrossSection::Exponential
        };
        let out = PathBuf::from(s.get("out").unwrap_or("out"));
        let snapshot_every = s.parsed("snapshot_every")?.unwrap_or(0);
        let seed = s.parsed("seed")?.unwrap_or(0);
        let steps = s.parsed("steps")?.unwrap_or(20);
        let reversal = s
            .get("reversal")
            .map(reversal_from)
            .transpose()?
            .unwrap_or_default();
        let custom_case = ["scheme", "profile", "alpha", "alpha_over_sigma"]
            .iter()
            .any(|k| s.get(k).is_some())
            || explicit_dt.is_some();

        let cfg = ExperimentConfig {
            command,
            schemes,
            grid,
            grids,
            reference,
            alpha,
            dt_rule,
            t_final,
            profile,
            sigma,
            cross_section,
            out,
            snapshot_every,
            seed,
            full_scale,
            steps,
            reversal,
            custom_case,
        };
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<()> {
        use Command::*;
        if self.schemes.is_empty() {
            return Err(Error::Config("no scheme selected".into()));
        }
        match self.command {
            Run if self.schemes.len() != 1 => {
                Err(Error::Config("run takes exactly one scheme".into()))
            }
            Convergence => {
                if !matches!(self.dt_rule, DtRule::DxRatio(_)) {
                    return Err(Error::Config("convergence needs dt_dx_ratio".into()));
                }
                if self.grids.is_empty() {
                    return Err(Error::Config("convergence needs at least one grid".into()));
                }
                for &n in &self.grids {
                    if n == self.reference {
                        return Err(Error::Config(format!(
                            "grid {n} equals the reference grid"
                        )));
                    }
                    if n < 3 || n > self.reference || self.reference % n != 0 {
                        return Err(Error::Config(format!(
                            "grid {n} is not nested in the reference grid {}",
                            self.reference
                        )));
                    }
                }
                Ok(())
            }
            Reversibility if self.profile == ProfileKind::Sine => Err(Error::Config(
                "reversibility cases are defined for the wave-front profiles".into(),
            )),
            Bench => {
                if self.grids.is_empty() || self.grids.iter().any(|&n| n < 3) {
                    return Err(Error::Config("bench needs grid sizes of at least 3".into()));
                }
                if self.steps == 0 {
                    return Err(Error::Config("bench needs at least one timed step".into()));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Scheme configurations with the step size fixed for grid `g`.
    pub fn schemes_for(&self, g: &GridSpec) -> Result<Vec<SchemeConfig>> {
        let dt = self.dt_rule.dt(g);
        self.schemes
            .iter()
            .map(|c| c.with_dt(dt).map_err(|e| Error::Config(e.to_string())))
            .collect()
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.0, self.grid.1, self.alpha).map_err(|e| Error::Config(e.to_string()))
    }

    /// JSON echo of the configuration for `summary.json`.
    pub fn describe(&self) -> serde_json::Value {
        json!({
            "command": self.command.to_string(),
            "schemes": self.schemes.iter().map(|s| s.label()).collect::<Vec<_>>(),
            "grid": format!("{}x{}", self.grid.0, self.grid.1),
            "grids": self.grids,
            "reference": self.reference,
            "alpha": self.alpha,
            "dt_rule": self.dt_rule.to_string(),
            "t_final": self.t_final,
            "profile": self.profile.to_string(),
            "sigma": self.sigma,
            "cross_section": match self.cross_section {
                CrossSection::Exponential => "exponential",
                CrossSection::Gaussian => "gaussian",
            },
            "snapshot_every": self.snapshot_every,
            "seed": self.seed,
            "full_scale": self.full_scale,
            "steps": self.steps,
            "reversal": reversal_name(self.reversal),
        })
    }
}
