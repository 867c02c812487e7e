//! Flat `key = value` run configuration.
//!
//! Layers, lowest precedence first: built-in defaults, a preset, the config
//! file, then `--set key=value` overrides. Unknown or repeated keys are
//! rejected.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use optoqpg::lindblad::{mech_dim_for, Integrator, DEFAULT_TOL, DEFAULT_TRUNC_TOL};
use optoqpg::{EvolutionConfig, SystemParams};

/// Keys accepted in config files and `--set`.
pub const KEYS: &[&str] = &[
    "preset",
    "g",
    "g1",
    "g2",
    "omega_m",
    "delta1",
    "delta2",
    "kappa",
    "kappa1",
    "kappa2",
    "q_m",
    "nbar",
    "t_end",
    "n_points",
    "t_grid",
    "rel_tol",
    "abs_tol",
    "trunc_tol",
    "max_step",
    "mech_dim",
    "integrator",
    "rk4_step",
    "seed",
    "mc_samples",
    "out",
    "sweep_kappa",
    "sweep_nbar",
    "sweep_g",
    "sweep_q_m",
    "sweep_budget",
];

pub const PRESETS: &[&str] = &["ideal-nbar0", "ideal-nbar10", "lossy-nbar0", "lossy-nbar10"];

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Everything one invocation needs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub g1: f64,
    pub g2: f64,
    pub omega_m: f64,
    /// `None` selects the self-Kerr cancelling `g_j²/ω_m`.
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub kappa1: f64,
    pub kappa2: f64,
    pub q_m: f64,
    pub nbar: f64,
    /// Defaults to `4π/ω_m`.
    pub t_end: Option<f64>,
    pub n_points: usize,
    /// Explicit output times; overrides `t_end`/`n_points`.
    pub t_grid: Option<Vec<f64>>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub trunc_tol: f64,
    pub max_step: f64,
    /// `None` derives the truncation from the parameters.
    pub mech_dim: Option<usize>,
    pub integrator: IntegratorChoice,
    pub rk4_step: f64,
    pub seed: u64,
    pub mc_samples: usize,
    pub out: Option<PathBuf>,
    pub sweep_kappa: Option<Vec<f64>>,
    pub sweep_nbar: Option<Vec<f64>>,
    pub sweep_g: Option<Vec<f64>>,
    pub sweep_q_m: Option<Vec<f64>>,
    pub sweep_budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorChoice {
    Dp5,
    Rk4,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            g1: 0.5,
            g2: 0.5,
            omega_m: 1.0,
            delta1: None,
            delta2: None,
            kappa1: 0.0,
            kappa2: 0.0,
            q_m: f64::INFINITY,
            nbar: 0.0,
            t_end: None,
            n_points: 200,
            t_grid: None,
            rel_tol: DEFAULT_TOL,
            abs_tol: DEFAULT_TOL,
            trunc_tol: DEFAULT_TRUNC_TOL,
            max_step: 0.25,
            mech_dim: None,
            integrator: IntegratorChoice::Dp5,
            rk4_step: 1e-3,
            seed: 0,
            mc_samples: 10_000,
            out: None,
            sweep_kappa: None,
            sweep_nbar: None,
            sweep_g: None,
            sweep_q_m: None,
            sweep_budget: 64,
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64, ConfigError> {
    v.parse::<f64>()
        .map_err(|_| ConfigError(format!("{key}: expected a number, got {v:?}")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize, ConfigError> {
    v.parse::<usize>()
        .map_err(|_| ConfigError(format!("{key}: expected a nonnegative integer, got {v:?}")))
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, ConfigError> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_f64(key, x.trim())).collect()
}

fn nonneg(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x >= 0.0 {
        Ok(x)
    } else {
        err(format!("{key} must be nonnegative, got {x}"))
    }
}

fn positive(key: &str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 {
        Ok(x)
    } else {
        err(format!("{key} must be positive, got {x}"))
    }
}

impl RunConfig {
    /// Parameters of a named preset: ideal or lossy, cold or warm.
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        cfg.apply_preset(name)?;
        Ok(cfg)
    }

    fn apply_preset(&mut self, name: &str) -> Result<(), ConfigError> {
        let (lossy, nbar) = match name {
            "ideal-nbar0" => (false, 0.0),
            "ideal-nbar10" => (false, 10.0),
            "lossy-nbar0" => (true, 0.0),
            "lossy-nbar10" => (true, 10.0),
            _ => {
                return err(format!(
                    "unknown preset {name:?}; known: {}",
                    PRESETS.join(", ")
                ))
            }
        };
        self.g1 = 0.5;
        self.g2 = 0.5;
        self.omega_m = 1.0;
        self.delta1 = None;
        self.delta2 = None;
        self.nbar = nbar;
        if lossy {
            self.kappa1 = 1e-2;
            self.kappa2 = 1e-2;
            self.q_m = 1e6;
        } else {
            self.kappa1 = 0.0;
            self.kappa2 = 0.0;
            self.q_m = f64::INFINITY;
        }
        Ok(())
    }

    /// Set one key. `preset` resets the physical parameters.
    pub fn set(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        let v = v.trim();
        match key {
            "preset" => self.apply_preset(v)?,
            "g" => {
                let g = nonneg(key, parse_f64(key, v)?)?;
                self.g1 = g;
                self.g2 = g;
            }
            "g1" => self.g1 = nonneg(key, parse_f64(key, v)?)?,
            "g2" => self.g2 = nonneg(key, parse_f64(key, v)?)?,
            "omega_m" => self.omega_m = positive(key, parse_f64(key, v)?)?,
            "delta1" => self.delta1 = Some(parse_f64(key, v)?),
            "delta2" => self.delta2 = Some(parse_f64(key, v)?),
            "kappa" => {
                let k = nonneg(key, parse_f64(key, v)?)?;
                self.kappa1 = k;
                self.kappa2 = k;
            }
            "kappa1" => self.kappa1 = nonneg(key, parse_f64(key, v)?)?,
            "kappa2" => self.kappa2 = nonneg(key, parse_f64(key, v)?)?,
            "q_m" => self.q_m = positive(key, parse_f64(key, v)?)?,
            "nbar" => self.nbar = nonneg(key, parse_f64(key, v)?)?,
            "t_end" => self.t_end = Some(positive(key, parse_f64(key, v)?)?),
            "n_points" => self.n_points = parse_usize(key, v)?,
            "t_grid" => self.t_grid = Some(parse_list(key, v)?),
            "rel_tol" => self.rel_tol = positive(key, parse_f64(key, v)?)?,
            "abs_tol" => self.abs_tol = positive(key, parse_f64(key, v)?)?,
            "trunc_tol" => self.trunc_tol = positive(key, parse_f64(key, v)?)?,
            "max_step" => self.max_step = positive(key, parse_f64(key, v)?)?,
            "mech_dim" => self.mech_dim = Some(parse_usize(key, v)?),
            "integrator" => {
                self.integrator = match v {
                    "dp5" => IntegratorChoice::Dp5,
                    "rk4" => IntegratorChoice::Rk4,
                    _ => return err(format!("integrator must be dp5 or rk4, got {v:?}")),
                }
            }
            "rk4_step" => self.rk4_step = positive(key, parse_f64(key, v)?)?,
            "seed" => {
                self.seed = v
                    .parse()
                    .map_err(|_| ConfigError(format!("seed: expected a u64, got {v:?}")))?
            }
            "mc_samples" => self.mc_samples = parse_usize(key, v)?,
            "out" => self.out = Some(PathBuf::from(v)),
            "sweep_kappa" => self.sweep_kappa = Some(parse_list(key, v)?),
            "sweep_nbar" => self.sweep_nbar = Some(parse_list(key, v)?),
            "sweep_g" => self.sweep_g = Some(parse_list(key, v)?),
            "sweep_q_m" => self.sweep_q_m = Some(parse_list(key, v)?),
            "sweep_budget" => self.sweep_budget = parse_usize(key, v)?,
            _ => return err(format!("unknown key {key:?}")),
        }
        Ok(())
    }

    /// Apply a config file's text. A `preset` line is applied before the
    /// other keys regardless of its position.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        let pairs = parse_pairs(text)?;
        if let Some((_, v)) = pairs.iter().find(|(k, _)| k == "preset") {
            self.set("preset", v)?;
        }
        for (k, v) in pairs.iter().filter(|(k, _)| k != "preset") {
            self.set(k, v)?;
        }
        Ok(())
    }

    /// Apply a single `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<(), ConfigError> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override {kv:?} is not key=value")))?;
        self.set(k.trim(), v)
    }

    pub fn params(&self) -> SystemParams {
        let mut p = SystemParams::new(self.g1, self.g2)
            .with_nbar(self.nbar)
            .with_losses(self.kappa1, self.kappa2, self.q_m);
        p.omega_m = self.omega_m;
        p = p.with_default_detunings();
        if let Some(d) = self.delta1 {
            p.delta1 = d;
        }
        if let Some(d) = self.delta2 {
            p.delta2 = d;
        }
        p
    }

    /// Output times: `t_grid` if given, otherwise `n_points` evenly spaced on
    /// `[0, t_end]`.
    pub fn time_grid(&self) -> Result<Vec<f64>, ConfigError> {
        let grid = match &self.t_grid {
            Some(g) => g.clone(),
            None => {
                let t_end = self.t_end.unwrap_or(4.0 * PI / self.omega_m);
                match self.n_points {
                    0 => Vec::new(),
                    1 => vec![0.0],
                    n => (0..n).map(|i| t_end * i as f64 / (n - 1) as f64).collect(),
                }
            }
        };
        if grid.is_empty() {
            return err("empty time grid");
        }
        if grid[0] != 0.0 {
            return err(format!("time grid must start at 0, starts at {}", grid[0]));
        }
        if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return err("time grid must be finite and strictly increasing");
        }
        Ok(grid)
    }

    /// Evolution settings for `params` on `grid`.
    pub fn evolution(&self, params: &SystemParams, grid: Vec<f64>) -> EvolutionConfig {
        let mut cfg =
            EvolutionConfig::for_params(grid, params).with_tolerances(self.rel_tol, self.abs_tol);
        cfg.trunc_tol = self.trunc_tol;
        cfg.max_step = self.max_step;
        cfg.mech_dim = self
            .mech_dim
            .unwrap_or_else(|| mech_dim_for(params, self.trunc_tol));
        if self.integrator == IntegratorChoice::Rk4 {
            cfg = cfg.with_integrator(Integrator::Rk4 {
                step: self.rk4_step,
            });
        }
        cfg
    }

    /// Cross-field checks that single keys cannot catch.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.params()
            .validate()
            .map_err(|e| ConfigError(e.to_string()))?;
        if let Some(m) = self.mech_dim {
            if m < 2 {
                return err(format!("mech_dim must be at least 2, got {m}"));
            }
        }
        for (name, axis) in [
            ("sweep_kappa", &self.sweep_kappa),
            ("sweep_nbar", &self.sweep_nbar),
            ("sweep_g", &self.sweep_g),
            ("sweep_q_m", &self.sweep_q_m),
        ] {
            if let Some(values) = axis {
                if values.is_empty() {
                    return err(format!("{name} must list at least one value"));
                }
                let bad = if name == "sweep_q_m" {
                    values.iter().any(|v| !(*v > 0.0))
                } else {
                    values.iter().any(|v| !(*v >= 0.0))
                };
                if bad {
                    return err(format!("{name} contains an invalid rate"));
                }
            }
        }
        Ok(())
    }
}

/// Split config text into `(key, value)` pairs, rejecting malformed lines,
/// unknown keys and repeats.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, ConfigError> {
    let mut out: Vec<(String, String)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return err(format!("line {}: expected key = value, got {raw:?}", i + 1));
        };
        let k = k.trim();
        if !KEYS.contains(&k) {
            return err(format!("line {}: unknown key {k:?}", i + 1));
        }
        if out.iter().any(|(seen, _)| seen == k) {
            return err(format!("line {}: key {k:?} given twice", i + 1));
        }
        out.push((k.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_match_scenarios() {
        let p = RunConfig::preset("lossy-nbar10").unwrap().params();
        assert_eq!(
            (p.g1, p.g2, p.kappa1, p.kappa2, p.q_m, p.nbar),
            (0.5, 0.5, 1e-2, 1e-2, 1e6, 10.0)
        );
        assert!(p.uses_default_detunings());
        let p = RunConfig::preset("ideal-nbar0").unwrap().params();
        assert!(p.is_lossless());
        assert!(RunConfig::preset("ideal-nbar5").is_err());
    }

    #[test]
    fn file_keys_override_preset() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# comment\nkappa = 0.05\npreset = lossy-nbar0\n\nnbar = 2 # trailing\n")
            .unwrap();
        assert_eq!(cfg.kappa1, 0.05);
        assert_eq!(cfg.nbar, 2.0);
        assert_eq!(cfg.q_m, 1e6);
    }

    #[test]
    fn strict_parsing() {
        assert!(parse_pairs("kapa = 1").is_err());
        assert!(parse_pairs("kappa 1").is_err());
        assert!(parse_pairs("nbar = 1\nnbar = 2").is_err());
        let mut cfg = RunConfig::default();
        assert!(cfg.set("kappa", "-0.1").is_err());
        assert!(cfg.set("q_m", "0").is_err());
        assert!(cfg.set("nbar", "abc").is_err());
        assert!(cfg.apply_override("nbar").is_err());
        cfg.set("q_m", "inf").unwrap();
        assert!(cfg.q_m.is_infinite());
    }

    #[test]
    fn grids() {
        let mut cfg = RunConfig::default();
        let g = cfg.time_grid().unwrap();
        assert_eq!(g.len(), 200);
        assert_eq!(g[199], 4.0 * PI);
        cfg.set("n_points", "0").unwrap();
        assert!(cfg.time_grid().is_err());
        cfg.set("t_grid", "").unwrap();
        assert!(cfg.time_grid().is_err());
        cfg.set("t_grid", "0, 1, 0.5").unwrap();
        assert!(cfg.time_grid().is_err());
        cfg.set("t_grid", "0, 1.5, 3").unwrap();
        assert_eq!(cfg.time_grid().unwrap(), vec![0.0, 1.5, 3.0]);
    }

    #[test]
    fn explicit_detunings_survive_coupling_changes() {
        let mut cfg = RunConfig::default();
        cfg.set("g", "0.3").unwrap();
        assert!(cfg.params().uses_default_detunings());
        cfg.set("delta1", "0.2").unwrap();
        let p = cfg.params();
        assert_eq!(p.delta1, 0.2);
        assert!((p.delta2 - 0.09).abs() < 1e-15);
    }

    #[test]
    fn every_key_is_settable() {
        let samples = [
            ("preset", "ideal-nbar0"),
            ("integrator", "rk4"),
            ("out", "x.csv"),
            ("t_grid", "0,1"),
            ("sweep_kappa", "0,0.1"),
            ("sweep_nbar", "0"),
            ("sweep_g", "0.5"),
            ("sweep_q_m", "1e6"),
        ];
        for key in KEYS {
            let v = samples
                .iter()
                .find(|(k, _)| k == key)
                .map_or("1", |(_, v)| v);
            RunConfig::default()
                .set(key, v)
                .unwrap_or_else(|e| panic!("{key}: {e}"));
        }
    }
}
