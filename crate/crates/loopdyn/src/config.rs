//! Run configuration for the batch front end: a flat key-value text format
//! with `[section]` headers, strict key checking, bit-exact float round
//! trips (17 significant digits), and a stable fingerprint stamped into
//! every output file.

use crate::asmodel::ASParams;
use crate::dynsys::PlanarField;
use crate::fixtures::{GluedLoop, HamiltonianFish, LinearSaddle};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Exit code for configuration/validation failures.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for numeric failures (a witness file is written).
pub const EXIT_NUMERIC: i32 = 3;

/// Complete description of one batch run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    // [system]
    /// Builtin vector-field fixture: `glued-loop`, `linear-saddle`, `fish`.
    pub fixture: String,
    pub alpha: f64,
    pub beta: f64,
    /// Eigenvalue detuning of the glued-loop fixture.
    pub detune: f64,
    /// Truncation window radius parameter.
    pub epsilon: f64,
    // [forcing]
    pub omega: f64,
    /// Forcing offset; `None` means the midpoint of the admissible interval.
    pub rho: Option<f64>,
    pub mu_min: f64,
    pub mu_max: f64,
    pub mu_steps: usize,
    // [model]
    pub lambda: f64,
    pub xi1: f64,
    pub xi2: f64,
    pub b: f64,
    pub a_amp: f64,
    /// Upper end of the dissipation ladder.
    pub mu0: f64,
    // [scan]
    pub a_steps: usize,
    pub n_min: u32,
    pub n_max: u32,
    pub iterates: usize,
    pub transient: usize,
    /// Iteration horizon of the 1D verification.
    pub horizon: usize,
    /// Grid size for critical-point location and orbit scans.
    pub grid: usize,
    // [numerics]
    pub tol: f64,
    // [output]
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 means the rayon default.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            fixture: "glued-loop".to_string(),
            alpha: 2.0,
            beta: 1.0,
            detune: 0.0,
            epsilon: 0.05,
            omega: 2.0,
            rho: None,
            mu_min: 1e-8,
            mu_max: 1e-6,
            mu_steps: 5,
            lambda: 0.05,
            xi1: 1.0,
            xi2: 0.3,
            b: 1.0,
            a_amp: 0.3,
            mu0: 1e-3,
            a_steps: 16,
            n_min: 1,
            n_max: 3,
            iterates: 10_000,
            transient: 1_000,
            horizon: 100,
            grid: 2048,
            tol: 1e-9,
            out_dir: PathBuf::from("out"),
            seed: 7,
            threads: 0,
        }
    }
}

/// `{:.16e}`: 17 significant digits, enough for a bit-exact round trip of
/// any finite `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut rho_set = false;
        let mut section = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name.strip_suffix(']').ok_or(ConfigError::Parse {
                    line: i + 1,
                    msg: "unterminated section header".to_string(),
                })?;
                section = name.trim().to_string();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or(ConfigError::Parse {
                line: i + 1,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            let key = key.trim();
            let value = value.trim();
            let full = format!("{section}.{key}");
            let parse_err = |msg: String| ConfigError::Parse { line: i + 1, msg };
            let f = || value.parse::<f64>().map_err(|e| parse_err(format!("bad float `{value}`: {e}")));
            let u = || value.parse::<usize>().map_err(|e| parse_err(format!("bad integer `{value}`: {e}")));
            match full.as_str() {
                "system.fixture" => cfg.fixture = value.to_string(),
                "system.alpha" => cfg.alpha = f()?,
                "system.beta" => cfg.beta = f()?,
                "system.detune" => cfg.detune = f()?,
                "system.epsilon" => cfg.epsilon = f()?,
                "forcing.omega" => cfg.omega = f()?,
                "forcing.rho" => {
                    cfg.rho = Some(f()?);
                    rho_set = true;
                }
                "forcing.mu_min" => cfg.mu_min = f()?,
                "forcing.mu_max" => cfg.mu_max = f()?,
                "forcing.mu_steps" => cfg.mu_steps = u()?,
                "model.lambda" => cfg.lambda = f()?,
                "model.xi1" => cfg.xi1 = f()?,
                "model.xi2" => cfg.xi2 = f()?,
                "model.b" => cfg.b = f()?,
                "model.a_amp" => cfg.a_amp = f()?,
                "model.mu0" => cfg.mu0 = f()?,
                "scan.a_steps" => cfg.a_steps = u()?,
                "scan.n_min" => cfg.n_min = u()? as u32,
                "scan.n_max" => cfg.n_max = u()? as u32,
                "scan.iterates" => cfg.iterates = u()?,
                "scan.transient" => cfg.transient = u()?,
                "scan.horizon" => cfg.horizon = u()?,
                "scan.grid" => cfg.grid = u()?,
                "numerics.tol" => cfg.tol = f()?,
                "output.dir" => cfg.out_dir = PathBuf::from(value),
                "output.seed" => {
                    cfg.seed = value
                        .parse::<u64>()
                        .map_err(|e| parse_err(format!("bad seed `{value}`: {e}")))?
                }
                "output.threads" => cfg.threads = u()?,
                _ => return Err(ConfigError::UnknownKey(full)),
            }
        }
        if !rho_set {
            cfg.rho = None;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.beta > 0.0 && self.alpha > self.beta) {
            return fail(format!("need 0 < beta < alpha, got alpha = {}, beta = {}", self.alpha, self.beta));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return fail(format!("need epsilon in (0, 1), got {}", self.epsilon));
        }
        if !(self.mu_min > 0.0 && self.mu_min <= self.mu_max) {
            return fail(format!("need 0 < mu_min <= mu_max, got [{}, {}]", self.mu_min, self.mu_max));
        }
        // two-scale separation: the dissipation must sit far below the window
        let cap = 0.1 * self.epsilon * self.epsilon;
        if self.mu_max > cap {
            return fail(format!(
                "mu_max = {} violates the scale separation mu_max <= 0.1 epsilon^2 = {cap}",
                self.mu_max
            ));
        }
        if self.mu_steps == 0 {
            return fail("mu_steps must be positive".to_string());
        }
        if !(self.omega > 0.0) {
            return fail(format!("need omega > 0, got {}", self.omega));
        }
        if !(self.lambda > 0.0 && self.lambda < 1.0) {
            return fail(format!("need lambda in (0, 1), got {}", self.lambda));
        }
        if !(self.a_amp > 0.0 && self.a_amp < 1.0) {
            return fail(format!("need a_amp in (0, 1), got {}", self.a_amp));
        }
        if !(self.b > 0.0 && self.xi1 > 0.0) {
            return fail("need b > 0 and xi1 > 0".to_string());
        }
        if !(self.mu0 > 0.0 && self.mu0 < 1.0) {
            return fail(format!("need mu0 in (0, 1), got {}", self.mu0));
        }
        if self.a_steps == 0 || self.iterates == 0 || self.horizon == 0 || self.grid == 0 {
            return fail("scan budgets must be positive".to_string());
        }
        if !(self.n_min >= 1 && self.n_min <= self.n_max) {
            return fail(format!("need 1 <= n_min <= n_max, got [{}, {}]", self.n_min, self.n_max));
        }
        if !(self.tol > 0.0) {
            return fail(format!("need tol > 0, got {}", self.tol));
        }
        match self.fixture.as_str() {
            "glued-loop" | "linear-saddle" | "fish" => {}
            other => return fail(format!("unknown fixture `{other}`")),
        }
        Ok(())
    }

    /// Canonical serialization: fixed section and key order, floats at 17
    /// significant digits. `parse(canonical())` reproduces the config
    /// bit-for-bit.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[system]");
        let _ = writeln!(s, "fixture = {}", self.fixture);
        let _ = writeln!(s, "alpha = {}", fmt_f64(self.alpha));
        let _ = writeln!(s, "beta = {}", fmt_f64(self.beta));
        let _ = writeln!(s, "detune = {}", fmt_f64(self.detune));
        let _ = writeln!(s, "epsilon = {}", fmt_f64(self.epsilon));
        let _ = writeln!(s, "[forcing]");
        let _ = writeln!(s, "omega = {}", fmt_f64(self.omega));
        if let Some(r) = self.rho {
            let _ = writeln!(s, "rho = {}", fmt_f64(r));
        }
        let _ = writeln!(s, "mu_min = {}", fmt_f64(self.mu_min));
        let _ = writeln!(s, "mu_max = {}", fmt_f64(self.mu_max));
        let _ = writeln!(s, "mu_steps = {}", self.mu_steps);
        let _ = writeln!(s, "[model]");
        let _ = writeln!(s, "lambda = {}", fmt_f64(self.lambda));
        let _ = writeln!(s, "xi1 = {}", fmt_f64(self.xi1));
        let _ = writeln!(s, "xi2 = {}", fmt_f64(self.xi2));
        let _ = writeln!(s, "b = {}", fmt_f64(self.b));
        let _ = writeln!(s, "a_amp = {}", fmt_f64(self.a_amp));
        let _ = writeln!(s, "mu0 = {}", fmt_f64(self.mu0));
        let _ = writeln!(s, "[scan]");
        let _ = writeln!(s, "a_steps = {}", self.a_steps);
        let _ = writeln!(s, "n_min = {}", self.n_min);
        let _ = writeln!(s, "n_max = {}", self.n_max);
        let _ = writeln!(s, "iterates = {}", self.iterates);
        let _ = writeln!(s, "transient = {}", self.transient);
        let _ = writeln!(s, "horizon = {}", self.horizon);
        let _ = writeln!(s, "grid = {}", self.grid);
        let _ = writeln!(s, "[numerics]");
        let _ = writeln!(s, "tol = {}", fmt_f64(self.tol));
        let _ = writeln!(s, "[output]");
        let _ = writeln!(s, "dir = {}", self.out_dir.display());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threads = {}", self.threads);
        s
    }

    /// FNV-1a hash of the canonical serialization, as 16 hex digits. Stable
    /// across platforms and toolchains.
    pub fn fingerprint(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.canonical().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// Model-map parameters at dissipation `mu`.
    pub fn model_params(&self, mu: f64) -> ASParams {
        ASParams {
            alpha: self.alpha,
            beta: self.beta,
            epsilon: self.epsilon,
            lambda: self.lambda,
            xi1: self.xi1,
            xi2: self.xi2,
            b: self.b,
            a_amp: self.a_amp,
            omega: self.omega,
            mu,
        }
    }

    /// Instantiate the configured builtin vector field.
    pub fn planar_field(&self) -> Result<Arc<dyn PlanarField>, ConfigError> {
        match self.fixture.as_str() {
            "glued-loop" => {
                Ok(Arc::new(GluedLoop::new(self.alpha, self.beta).with_detune(self.detune)))
            }
            "linear-saddle" => {
                Ok(Arc::new(LinearSaddle { alpha: self.alpha, beta: self.beta }))
            }
            "fish" => Ok(Arc::new(HamiltonianFish)),
            other => Err(ConfigError::Invalid(format!("unknown fixture `{other}`"))),
        }
    }

    /// Geometric grid of `mu_steps` dissipation values spanning
    /// `[mu_min, mu_max]`.
    pub fn mu_grid(&self) -> Vec<f64> {
        if self.mu_steps == 1 {
            return vec![self.mu_max];
        }
        let (l0, l1) = (self.mu_min.ln(), self.mu_max.ln());
        (0..self.mu_steps)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (self.mu_steps - 1) as f64).exp())
            .collect()
    }
}
