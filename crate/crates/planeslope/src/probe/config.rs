//! Probe configuration and its plain-text `key = value` file format.
//!
//! Every key is optional; unset keys keep their defaults. Lines that are
//! blank or start with `#` are ignored. Keys:
//!
//! ```text
//! s0         = 0.1      # initial ladder scale, > 0
//! rho        = 0.5      # ladder contraction ratio, in (0, 1)
//! levels     = 20       # ladder rungs, >= 4
//! frames     = 8        # random rotation frames in the battery
//! seed       = 42       # RNG seed for the rotation battery
//! tol_conv   = 1e-4     # per-ladder convergence tolerance (relative)
//! tol_agree  = 1e-4     # cross-frame agreement tolerance (relative)
//! tol_sep    = 1e-2     # witness separation threshold (absolute)
//! kappa_min  = 1e-3     # minimum conditioning for battery frames
//! richardson = false    # reserved; accepted but not applied
//! parallel   = true     # run ladders/cells concurrently when compiled in
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use thiserror::Error;

use super::Ladder;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config file: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Everything `classify` needs: the ladder geometry, the frame battery
/// size and seed, and the decision tolerances.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeConfig {
    /// Initial ladder scale.
    pub s0: f64,
    /// Ladder contraction ratio in `(0, 1)`.
    pub rho: f64,
    /// Number of ladder rungs.
    pub levels: usize,
    /// Number of random rotation frames in the battery.
    pub frames: usize,
    /// Seed for the rotation battery.
    pub seed: u64,
    /// Per-ladder convergence tolerance, scaled by `1 + |slope|`.
    pub tol_conv: f64,
    /// Cross-frame agreement tolerance, scaled by `1 + max |limit|`.
    pub tol_agree: f64,
    /// Witness separation threshold (absolute, like the limits themselves).
    pub tol_sep: f64,
    /// Minimum conditioning required of battery frames.
    pub kappa_min: f64,
    /// Reserved switch for extrapolated limits; parsed and carried, with no
    /// effect on the current estimator.
    pub richardson: bool,
    /// Evaluate independent ladders (and scan cells) concurrently. Results
    /// do not depend on this switch.
    pub parallel: bool,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            s0: 0.1,
            rho: 0.5,
            levels: 20,
            frames: 8,
            seed: 42,
            tol_conv: 1e-4,
            tol_agree: 1e-4,
            tol_sep: 1e-2,
            kappa_min: 1e-3,
            richardson: false,
            parallel: true,
        }
    }
}

impl ProbeConfig {
    pub fn ladder(&self) -> Ladder {
        // validate() has checked the same invariants.
        Ladder::new(self.s0, self.rho, self.levels).expect("config holds a valid ladder")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        Ladder::new(self.s0, self.rho, self.levels)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        for (name, v) in [
            ("tol_conv", self.tol_conv),
            ("tol_agree", self.tol_agree),
            ("tol_sep", self.tol_sep),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::Invalid(format!("{name} must be positive")));
            }
        }
        if !(self.kappa_min.is_finite() && self.kappa_min > 0.0 && self.kappa_min <= 1.0) {
            return Err(ConfigError::Invalid("kappa_min must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        std::fs::read_to_string(path)?.parse()
    }

    /// Canonical `key = value` rendering; parses back to an equal config.
    pub fn to_key_values(&self) -> String {
        format!(
            "s0 = {}\nrho = {}\nlevels = {}\nframes = {}\nseed = {}\n\
             tol_conv = {}\ntol_agree = {}\ntol_sep = {}\nkappa_min = {}\n\
             richardson = {}\nparallel = {}\n",
            self.s0,
            self.rho,
            self.levels,
            self.frames,
            self.seed,
            self.tol_conv,
            self.tol_agree,
            self.tol_sep,
            self.kappa_min,
            self.richardson,
            self.parallel,
        )
    }
}

impl fmt::Display for ProbeConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_key_values())
    }
}

impl FromStr for ProbeConfig {
    type Err = ConfigError;

    fn from_str(text: &str) -> Result<Self, ConfigError> {
        let mut config = ProbeConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let body = trimmed.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(ConfigError::Malformed {
                    line,
                    text: raw.to_string(),
                });
            };
            let key = key.trim();
            let value = value.trim();
            let invalid = |message: String| ConfigError::InvalidValue {
                line,
                key: key.to_string(),
                message,
            };
            match key {
                "s0" => config.s0 = value.parse().map_err(|e| invalid(format!("{e}")))?,
                "rho" => config.rho = value.parse().map_err(|e| invalid(format!("{e}")))?,
                "levels" => config.levels = value.parse().map_err(|e| invalid(format!("{e}")))?,
                "frames" => config.frames = value.parse().map_err(|e| invalid(format!("{e}")))?,
                "seed" => config.seed = value.parse().map_err(|e| invalid(format!("{e}")))?,
                "tol_conv" => {
                    config.tol_conv = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "tol_agree" => {
                    config.tol_agree = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "tol_sep" => config.tol_sep = value.parse().map_err(|e| invalid(format!("{e}")))?,
                "kappa_min" => {
                    config.kappa_min = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "richardson" => {
                    config.richardson = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                "parallel" => {
                    config.parallel = value.parse().map_err(|e| invalid(format!("{e}")))?
                }
                _ => {
                    return Err(ConfigError::UnknownKey {
                        line,
                        key: key.to_string(),
                    })
                }
            }
        }
        config.validate()?;
        Ok(config)
    }
}
