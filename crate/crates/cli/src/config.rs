//! Plain `key = value` run configuration with dotted keys, `#` comments,
//! hard errors on unknown keys, and last-one-wins duplicates (recorded as
//! warnings).

use chemotax_lv_core::model::{weak_defaults, ModelParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Continuation-command settings. The chi window defaults to a bracket
/// around the mode's bifurcation value when left unset.
#[derive(Debug, Clone, Copy)]
pub struct ContinueConfig {
    pub k: usize,
    pub chi_lo: Option<f64>,
    pub chi_hi: Option<f64>,
    pub ds: f64,
}

/// Shadow-system settings shared by `shadow-branch`, `layer`, and
/// `verify-shadow-limit`.
#[derive(Debug, Clone)]
pub struct ShadowConfig {
    pub r: f64,
    pub eps: f64,
    pub n_mode: usize,
    /// Largest pinned amplitude of the branch sweep.
    pub s_max: f64,
    /// Amplitude step of the branch sweep.
    pub ds: f64,
    /// D1 sweep of the shadow-limit check.
    pub d1_list: Vec<f64>,
    pub grid_n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub perturbation: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct LayerConfig {
    pub v_bar2: f64,
    pub eps: f64,
}

/// Fully resolved configuration: defaults overlaid with the parsed file.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid_n: usize,
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: f64,
    /// Relative amplitude of the seeded random initial perturbation.
    pub perturbation: f64,
    pub stability_k_max: usize,
    pub cont: ContinueConfig,
    pub shadow: ShadowConfig,
    pub layer: LayerConfig,
    pub seed: u64,
    /// Duplicate-key notices gathered while parsing.
    pub warnings: Vec<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: weak_defaults(),
            grid_n: 256,
            dt: 2e-3,
            t_end: 10.0,
            snapshot_every: 0.5,
            perturbation: 0.01,
            stability_k_max: 16,
            cont: ContinueConfig { k: 1, chi_lo: None, chi_hi: None, ds: 0.005 },
            shadow: ShadowConfig {
                r: 2.0,
                eps: 0.5,
                n_mode: 1,
                s_max: 0.05,
                ds: 0.005,
                d1_list: vec![1e2, 1e3, 1e4],
                grid_n: 256,
                t_end: 10.0,
                dt: 1e-4,
                perturbation: 0.01,
            },
            layer: LayerConfig { v_bar2: 0.75, eps: 1e-4 },
            seed: 0,
            warnings: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Every `(key, resolved value)` pair, for the manifest echo.
    pub fn echo(&self) -> Vec<(String, String)> {
        let m = &self.model;
        let s = &m.sensitivity;
        let mut out: Vec<(String, String)> = vec![
            ("model.a1".into(), m.a1.to_string()),
            ("model.a2".into(), m.a2.to_string()),
            ("model.b1".into(), m.b1.to_string()),
            ("model.b2".into(), m.b2.to_string()),
            ("model.c1".into(), m.c1.to_string()),
            ("model.c2".into(), m.c2.to_string()),
            ("model.D1".into(), m.d1.to_string()),
            ("model.D2".into(), m.d2.to_string()),
            ("model.chi".into(), m.chi.to_string()),
            ("model.tau".into(), m.tau.to_string()),
            ("model.L".into(), m.l.to_string()),
            ("model.phi.p0".into(), s.p0.to_string()),
            ("model.phi.p1".into(), s.p1.to_string()),
            ("model.phi.p2".into(), s.p2.to_string()),
            ("model.phi.p3".into(), s.p3.to_string()),
            ("grid.n".into(), self.grid_n.to_string()),
            ("time.dt".into(), self.dt.to_string()),
            ("time.t_end".into(), self.t_end.to_string()),
            ("time.snapshot_every".into(), self.snapshot_every.to_string()),
            ("sim.perturbation".into(), self.perturbation.to_string()),
            ("stability.k_max".into(), self.stability_k_max.to_string()),
            ("continue.k".into(), self.cont.k.to_string()),
            ("continue.ds".into(), self.cont.ds.to_string()),
            ("shadow.r".into(), self.shadow.r.to_string()),
            ("shadow.eps".into(), self.shadow.eps.to_string()),
            ("shadow.n".into(), self.shadow.n_mode.to_string()),
            ("shadow.s_max".into(), self.shadow.s_max.to_string()),
            ("shadow.ds".into(), self.shadow.ds.to_string()),
            (
                "shadow.d1_list".into(),
                self.shadow
                    .d1_list
                    .iter()
                    .map(|d| d.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            ),
            ("shadow.grid_n".into(), self.shadow.grid_n.to_string()),
            ("shadow.t_end".into(), self.shadow.t_end.to_string()),
            ("shadow.dt".into(), self.shadow.dt.to_string()),
            ("shadow.perturbation".into(), self.shadow.perturbation.to_string()),
            ("layer.v_bar2".into(), self.layer.v_bar2.to_string()),
            ("layer.eps".into(), self.layer.eps.to_string()),
            ("seed".into(), self.seed.to_string()),
        ];
        if let Some(lo) = self.cont.chi_lo {
            out.push(("continue.chi_lo".into(), lo.to_string()));
        }
        if let Some(hi) = self.cont.chi_hi {
            out.push(("continue.chi_hi".into(), hi.to_string()));
        }
        out
    }
}

fn parse_f64(line: usize, key: &str, value: &str) -> Result<f64, ConfigError> {
    value.trim().parse::<f64>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("`{key}` expects a number, got `{value}`"),
    })
}

fn parse_usize(line: usize, key: &str, value: &str) -> Result<usize, ConfigError> {
    value.trim().parse::<usize>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("`{key}` expects a nonnegative integer, got `{value}`"),
    })
}

fn parse_u64(line: usize, key: &str, value: &str) -> Result<u64, ConfigError> {
    value.trim().parse::<u64>().map_err(|_| ConfigError::Parse {
        line,
        message: format!("`{key}` expects a nonnegative integer, got `{value}`"),
    })
}

fn parse_f64_list(line: usize, key: &str, value: &str) -> Result<Vec<f64>, ConfigError> {
    value
        .split(',')
        .map(|part| parse_f64(line, key, part))
        .collect()
}

/// Parses a configuration file body over the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen: Vec<(String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ConfigError::Parse {
                line: lineno,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim();
        let value = value.trim();
        if let Some((_, first)) = seen.iter().find(|(k, _)| k == key) {
            cfg.warnings.push(format!(
                "duplicate key `{key}` at line {lineno} overrides line {first}; last one wins"
            ));
        }
        seen.retain(|(k, _)| k != key);
        seen.push((key.to_string(), lineno));

        match key {
            "model.a1" => cfg.model.a1 = parse_f64(lineno, key, value)?,
            "model.a2" => cfg.model.a2 = parse_f64(lineno, key, value)?,
            "model.b1" => cfg.model.b1 = parse_f64(lineno, key, value)?,
            "model.b2" => cfg.model.b2 = parse_f64(lineno, key, value)?,
            "model.c1" => cfg.model.c1 = parse_f64(lineno, key, value)?,
            "model.c2" => cfg.model.c2 = parse_f64(lineno, key, value)?,
            "model.D1" => cfg.model.d1 = parse_f64(lineno, key, value)?,
            "model.D2" => cfg.model.d2 = parse_f64(lineno, key, value)?,
            "model.chi" => cfg.model.chi = parse_f64(lineno, key, value)?,
            "model.tau" => cfg.model.tau = parse_f64(lineno, key, value)?,
            "model.L" => cfg.model.l = parse_f64(lineno, key, value)?,
            "model.phi.p0" => cfg.model.sensitivity.p0 = parse_f64(lineno, key, value)?,
            "model.phi.p1" => cfg.model.sensitivity.p1 = parse_f64(lineno, key, value)?,
            "model.phi.p2" => cfg.model.sensitivity.p2 = parse_f64(lineno, key, value)?,
            "model.phi.p3" => cfg.model.sensitivity.p3 = parse_f64(lineno, key, value)?,
            "grid.n" => cfg.grid_n = parse_usize(lineno, key, value)?,
            "time.dt" => cfg.dt = parse_f64(lineno, key, value)?,
            "time.t_end" => cfg.t_end = parse_f64(lineno, key, value)?,
            "time.snapshot_every" => cfg.snapshot_every = parse_f64(lineno, key, value)?,
            "sim.perturbation" => cfg.perturbation = parse_f64(lineno, key, value)?,
            "stability.k_max" => cfg.stability_k_max = parse_usize(lineno, key, value)?,
            "continue.k" => cfg.cont.k = parse_usize(lineno, key, value)?,
            "continue.chi_lo" => cfg.cont.chi_lo = Some(parse_f64(lineno, key, value)?),
            "continue.chi_hi" => cfg.cont.chi_hi = Some(parse_f64(lineno, key, value)?),
            "continue.ds" => cfg.cont.ds = parse_f64(lineno, key, value)?,
            "shadow.r" => cfg.shadow.r = parse_f64(lineno, key, value)?,
            "shadow.eps" => cfg.shadow.eps = parse_f64(lineno, key, value)?,
            "shadow.n" => cfg.shadow.n_mode = parse_usize(lineno, key, value)?,
            "shadow.s_max" => cfg.shadow.s_max = parse_f64(lineno, key, value)?,
            "shadow.ds" => cfg.shadow.ds = parse_f64(lineno, key, value)?,
            "shadow.d1_list" => cfg.shadow.d1_list = parse_f64_list(lineno, key, value)?,
            "shadow.grid_n" => cfg.shadow.grid_n = parse_usize(lineno, key, value)?,
            "shadow.t_end" => cfg.shadow.t_end = parse_f64(lineno, key, value)?,
            "shadow.dt" => cfg.shadow.dt = parse_f64(lineno, key, value)?,
            "shadow.perturbation" => cfg.shadow.perturbation = parse_f64(lineno, key, value)?,
            "layer.v_bar2" => cfg.layer.v_bar2 = parse_f64(lineno, key, value)?,
            "layer.eps" => cfg.layer.eps = parse_f64(lineno, key, value)?,
            "seed" => cfg.seed = parse_u64(lineno, key, value)?,
            _ => return Err(ConfigError::UnknownKey { line: lineno, key: key.to_string() }),
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), ConfigError> {
    cfg.model.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
    if cfg.grid_n < 3 {
        return Err(ConfigError::Invalid(format!("grid.n = {} is too small", cfg.grid_n)));
    }
    for (name, val) in [
        ("time.dt", cfg.dt),
        ("time.t_end", cfg.t_end),
        ("time.snapshot_every", cfg.snapshot_every),
        ("continue.ds", cfg.cont.ds),
        ("shadow.eps", cfg.shadow.eps),
        ("shadow.ds", cfg.shadow.ds),
        ("layer.eps", cfg.layer.eps),
    ] {
        if !(val > 0.0) {
            return Err(ConfigError::Invalid(format!("{name} must be positive (got {val})")));
        }
    }
    if cfg.cont.k == 0 || cfg.shadow.n_mode == 0 {
        return Err(ConfigError::Invalid("mode indices must be >= 1".into()));
    }
    Ok(())
}
