//! Run configuration: flat `key = value` text, one entry per line.
//!
//! `#` starts a comment. Every key is optional and falls back to the default
//! desk-scale profile; unknown or repeated keys are rejected.
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `resolution` | grid size `M` | 64 |
//! | `viscosity`, `diffusivity` | `ν`, `D` | 1, 0.5 |
//! | `kappa`, `shell`, `gamma` | noise intensity `κ`, shell `N`, profile exponent | 0, 4, 1 |
//! | `dt`, `t_end`, `record_stride` | stepping | 1e-3, 10, 100 |
//! | `scheme` | `exponential-euler` or `semi-implicit-euler` | exponential-euler |
//! | `seed`, `ensemble` | master seed, trajectory count | 0, 64 |
//! | `ic` | `cosine`, `random-band` or `checkpoint` | cosine |
//! | `mean`, `epsilon`, `mode`, `kmax`, `ic_seed`, `checkpoint` | initial concentrations | 1, 0.1, `1,0`, 4, 1, - |
//! | `velocity`, `velocity_amplitude`, `velocity_kmax` | `zero`, `random-band` or `taylor-green` | zero, 0.1, 4 |
//! | `output` | output path | - |
//! | `kappa_list`, `shell_list` | sweep axes, comma separated | `0,1,4`, `shell` |
//! | `corrector_s`, `corrector_alpha` | corrector-check norms | 1, 1 |
//! | `delta_alpha`, `delta_beta`, `delta_constant` | contraction bound | 0.5, 3, 1 |

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use npns_core::integrator::{Scheme, StepperConfig};
use npns_core::{Grid, NoiseBasis, NoiseSpec, SystemParams};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ConcentrationIc {
    /// `c₁ = c̄ + ε cos(k·x)`, `c₂ = c̄ - ε cos(k·x)`.
    Cosine { mean: f64, epsilon: f64, mode: (i64, i64) },
    /// `c_i = c̄ + ε g_i` with independent random fields `g_i` on `|k| ≤ kmax`,
    /// scaled to `max|g_i| = 1`.
    RandomBand { mean: f64, epsilon: f64, kmax: i64, seed: u64 },
    Checkpoint(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VelocityIc {
    Zero,
    /// Leray projection of a random field on `|k| ≤ kmax`, scaled to `max|u| = amplitude`.
    RandomBand { amplitude: f64, kmax: i64 },
    /// `amplitude (sin x₁ cos x₂, -cos x₁ sin x₂)`.
    TaylorGreen { amplitude: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub resolution: usize,
    pub viscosity: f64,
    pub diffusivity: f64,
    pub kappa: f64,
    pub shell: u32,
    pub gamma: f64,
    pub dt: f64,
    pub t_end: f64,
    pub record_stride: usize,
    pub scheme: Scheme,
    pub seed: u64,
    pub ensemble: usize,
    pub concentration: ConcentrationIc,
    pub velocity: VelocityIc,
    /// Seed of the random initial fields.
    pub ic_seed: u64,
    pub output: Option<PathBuf>,
    pub kappa_list: Vec<f64>,
    pub shell_list: Vec<u32>,
    pub corrector_s: f64,
    pub corrector_alpha: f64,
    pub delta_alpha: f64,
    pub delta_beta: f64,
    pub delta_constant: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            resolution: 64,
            viscosity: 1.0,
            diffusivity: 0.5,
            kappa: 0.0,
            shell: 4,
            gamma: 1.0,
            dt: 1e-3,
            t_end: 10.0,
            record_stride: 100,
            scheme: Scheme::ExponentialEuler,
            seed: 0,
            ensemble: 64,
            concentration: ConcentrationIc::Cosine {
                mean: 1.0,
                epsilon: 0.1,
                mode: (1, 0),
            },
            velocity: VelocityIc::Zero,
            ic_seed: 1,
            output: None,
            kappa_list: vec![0.0, 1.0, 4.0],
            shell_list: vec![4],
            corrector_s: 1.0,
            corrector_alpha: 1.0,
            delta_alpha: 0.5,
            delta_beta: 3.0,
            delta_constant: 1.0,
        }
    }
}

fn bad(key: &str, value: &str, why: impl std::fmt::Display) -> HarnessError {
    HarnessError::Config(format!("`{key} = {value}`: {why}"))
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| bad(key, value, e))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    value.split(',').map(|v| number(key, v.trim())).collect()
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::io(format!("reading {}", path.display()), e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = HashSet::new();
        // initial-condition keys are collected first, then assembled
        let mut ic_kind = "cosine".to_string();
        let (mut mean, mut epsilon, mut mode, mut kmax, mut ic_seed) = (1.0, 0.1, (1i64, 0i64), 4i64, 1u64);
        let mut checkpoint: Option<PathBuf> = None;
        let mut velocity_kind = "zero".to_string();
        let (mut v_amp, mut v_kmax) = (0.1, 4i64);

        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(HarnessError::Config(format!("line {}: expected `key = value`", lineno + 1)));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(HarnessError::Config(format!("line {}: duplicate key `{key}`", lineno + 1)));
            }
            match key {
                "resolution" => cfg.resolution = number(key, value)?,
                "viscosity" => cfg.viscosity = number(key, value)?,
                "diffusivity" => cfg.diffusivity = number(key, value)?,
                "kappa" => cfg.kappa = number(key, value)?,
                "shell" => cfg.shell = number(key, value)?,
                "gamma" => cfg.gamma = number(key, value)?,
                "dt" => cfg.dt = number(key, value)?,
                "t_end" => cfg.t_end = number(key, value)?,
                "record_stride" => cfg.record_stride = number(key, value)?,
                "scheme" => cfg.scheme = value.parse().map_err(|e| bad(key, value, e))?,
                "seed" => cfg.seed = number(key, value)?,
                "ensemble" => cfg.ensemble = number(key, value)?,
                "ic" => ic_kind = value.to_string(),
                "mean" => mean = number(key, value)?,
                "epsilon" => epsilon = number(key, value)?,
                "mode" => {
                    let k: Vec<i64> = list(key, value)?;
                    if k.len() != 2 {
                        return Err(bad(key, value, "expected two integers `k1,k2`"));
                    }
                    mode = (k[0], k[1]);
                }
                "kmax" => kmax = number(key, value)?,
                "ic_seed" => ic_seed = number(key, value)?,
                "checkpoint" => checkpoint = Some(PathBuf::from(value)),
                "velocity" => velocity_kind = value.to_string(),
                "velocity_amplitude" => v_amp = number(key, value)?,
                "velocity_kmax" => v_kmax = number(key, value)?,
                "output" => cfg.output = Some(PathBuf::from(value)),
                "kappa_list" => cfg.kappa_list = list(key, value)?,
                "shell_list" => cfg.shell_list = list(key, value)?,
                "corrector_s" => cfg.corrector_s = number(key, value)?,
                "corrector_alpha" => cfg.corrector_alpha = number(key, value)?,
                "delta_alpha" => cfg.delta_alpha = number(key, value)?,
                "delta_beta" => cfg.delta_beta = number(key, value)?,
                "delta_constant" => cfg.delta_constant = number(key, value)?,
                other => return Err(HarnessError::Config(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }

        cfg.concentration = match ic_kind.as_str() {
            "cosine" => ConcentrationIc::Cosine { mean, epsilon, mode },
            "random-band" => ConcentrationIc::RandomBand {
                mean,
                epsilon,
                kmax,
                seed: ic_seed,
            },
            "checkpoint" => ConcentrationIc::Checkpoint(
                checkpoint.ok_or_else(|| HarnessError::Config("`ic = checkpoint` needs a `checkpoint` path".into()))?,
            ),
            other => return Err(bad("ic", other, "expected cosine, random-band or checkpoint")),
        };
        if !seen.contains("shell_list") {
            cfg.shell_list = vec![cfg.shell];
        }
        cfg.ic_seed = ic_seed;
        cfg.velocity = match velocity_kind.as_str() {
            "zero" => VelocityIc::Zero,
            "random-band" => VelocityIc::RandomBand {
                amplitude: v_amp,
                kmax: v_kmax,
            },
            "taylor-green" => VelocityIc::TaylorGreen { amplitude: v_amp },
            other => return Err(bad("velocity", other, "expected zero, random-band or taylor-green")),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every constraint that does not need the initial state.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid()?;
        self.params()?;
        self.stepper(0).validate()?;
        if self.ensemble == 0 {
            return Err(HarnessError::Config("ensemble must be ≥ 1".into()));
        }
        if self.shell_list.is_empty() || self.kappa_list.is_empty() {
            return Err(HarnessError::Config("kappa_list and shell_list must not be empty".into()));
        }
        // zero intensity: only the shell geometry is checked
        for &n in std::iter::once(&self.shell).chain(&self.shell_list) {
            NoiseBasis::new(NoiseSpec::new(0.0, n, self.gamma)?, &grid)?;
        }
        for &k in &self.kappa_list {
            NoiseSpec::new(k, self.shell, self.gamma)?;
        }
        match &self.concentration {
            ConcentrationIc::Cosine { mean, epsilon, mode } => {
                if !(mean.is_finite() && epsilon.is_finite()) {
                    return Err(HarnessError::Config("mean and epsilon must be finite".into()));
                }
                let r = grid.dealias_radius();
                if mode.0.abs() > r || mode.1.abs() > r || *mode == (0, 0) {
                    return Err(HarnessError::Config(format!(
                        "cosine mode {mode:?} must be nonzero and within the dealias radius {r}"
                    )));
                }
            }
            ConcentrationIc::RandomBand { kmax, .. } => {
                if *kmax < 1 || *kmax > grid.dealias_radius() {
                    return Err(HarnessError::Config(format!(
                        "kmax = {kmax} must lie in [1, {}]",
                        grid.dealias_radius()
                    )));
                }
            }
            ConcentrationIc::Checkpoint(_) => {}
        }
        match self.velocity {
            VelocityIc::RandomBand { kmax, amplitude } => {
                if kmax < 1 || kmax > grid.dealias_radius() || !(amplitude >= 0.0) {
                    return Err(HarnessError::Config("velocity_kmax or velocity_amplitude out of range".into()));
                }
            }
            VelocityIc::TaylorGreen { amplitude } if !amplitude.is_finite() => {
                return Err(HarnessError::Config("velocity_amplitude must be finite".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Ok(Grid::new(self.resolution)?)
    }

    pub fn noise(&self) -> Result<NoiseSpec> {
        Ok(NoiseSpec::new(self.kappa, self.shell, self.gamma)?)
    }

    pub fn params(&self) -> Result<SystemParams> {
        Ok(SystemParams::new(self.viscosity, self.diffusivity, self.noise()?)?)
    }

    pub fn stepper(&self, trajectory: u64) -> StepperConfig {
        StepperConfig {
            dt: self.dt,
            scheme: self.scheme,
            t_end: self.t_end,
            seed: self.seed,
            record_stride: self.record_stride,
            trajectory,
        }
    }

    /// Copy with a different noise intensity and shell, as used by sweeps.
    pub fn with_noise(&self, kappa: f64, shell: u32) -> Self {
        Self {
            kappa,
            shell,
            ..self.clone()
        }
    }
}
