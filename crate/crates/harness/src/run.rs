//! Simulations, ensembles, sweeps and corrector checks, with their output files.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use npns_core::diagnostics::{
    deterministic_rate, delta_bound, fit_decay_rate, path_prefactor, sobolev_embedding_constant, DecayFit,
    EnergyRecord, EnsembleStats, FitWindow,
};
use npns_core::integrator::integrate;
use npns_core::noise::CorrectorReport;
use npns_core::{NoiseBasis, NoiseSpec, NpnsError, State};
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint;
use crate::config::{RunConfig, VelocityIc};
use crate::error::{HarnessError, Result};
use crate::initial::initial_state;

pub fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(HarnessError::Config("--threads must be ≥ 1".into()));
        }
        builder = builder.num_threads(n);
    }
    builder
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| HarnessError::io(format!("creating {}", path.display()), e))
}

pub fn write_ndjson<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for row in rows {
        let line = serde_json::to_string(row).expect("rows serialize to JSON");
        writeln!(w, "{line}").map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))?;
    }
    w.flush().map_err(|e| HarnessError::io(format!("writing {}", path.display()), e))
}

pub fn write_csv(path: &Path, header: &str, rows: &[String]) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| HarnessError::io(format!("writing {}", path.display()), e);
    writeln!(w, "{header}").map_err(io)?;
    for row in rows {
        writeln!(w, "{row}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// `path` with `suffix` appended to the file name.
pub fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn shift(records: &mut [EnergyRecord], t0: f64) {
    if t0 != 0.0 {
        for r in records {
            r.t += t0;
        }
    }
}

/// One trajectory of `cfg` (substream `trajectory`), from its initial state.
pub fn trajectory(cfg: &RunConfig, trajectory: u64) -> Result<(Vec<EnergyRecord>, State, f64), (HarnessError, Vec<EnergyRecord>)> {
    let setup = || -> Result<_> {
        let grid = cfg.grid()?;
        let params = cfg.params()?;
        let basis = NoiseBasis::new(params.noise, &grid)?;
        let (state, t0) = initial_state(cfg, &grid)?;
        Ok((grid, params, basis, state, t0))
    };
    let (grid, params, basis, state, t0) = setup().map_err(|e| (e, Vec::new()))?;
    match integrate(&grid, &basis, state, &params, &cfg.stepper(trajectory), |_, _| {}) {
        Ok(mut out) => {
            shift(&mut out.records, t0);
            Ok((out.records, out.final_state, t0 + out.steps as f64 * cfg.dt))
        }
        Err(mut e) => {
            shift(&mut e.records, t0);
            Err((e.error.into(), e.records))
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimulationSummary {
    pub records: Vec<EnergyRecord>,
    pub checkpoint: PathBuf,
}

/// Runs trajectory 0, writes one NDJSON record per stride to `output` and
/// the final state to `<output>.ckpt`. On blow-up the records made so far are
/// still written.
pub fn simulate(cfg: &RunConfig, output: &Path) -> Result<SimulationSummary> {
    match trajectory(cfg, 0) {
        Ok((records, state, t)) => {
            write_ndjson(output, &records)?;
            let ck = sidecar(output, ".ckpt");
            checkpoint::save(&ck, &cfg.params()?, t, &state)?;
            Ok(SimulationSummary { records, checkpoint: ck })
        }
        Err((error, records)) => {
            write_ndjson(output, &records)?;
            Err(error)
        }
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleRun {
    pub paths: Vec<Vec<EnergyRecord>>,
    pub stats: EnsembleStats,
    /// Fit of the ensemble mean of `‖U‖²`; `None` when the mean vanishes.
    pub fit: Option<DecayFit>,
}

impl EnsembleRun {
    /// Per-path `sup_t e^{λt}‖U(t)‖/‖U(0)‖` with `λ` half the fitted energy rate.
    pub fn prefactors(&self) -> Vec<f64> {
        let rate = self.fit.map_or(0.0, |f| 0.5 * f.rate);
        self.paths.iter().map(|p| path_prefactor(p, rate)).collect()
    }
}

/// `cfg.ensemble` trajectories on substreams `0..ensemble` of `cfg.seed`.
/// The aggregate does not depend on the pool size or completion order.
pub fn run_ensemble(cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<EnsembleRun> {
    let outcomes: Vec<_> = pool.install(|| {
        (0..cfg.ensemble as u64)
            .into_par_iter()
            .map(|i| trajectory(cfg, i).map(|(records, _, _)| records))
            .collect()
    });
    let mut paths = Vec::with_capacity(outcomes.len());
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(records) => paths.push(records),
            Err((HarnessError::BlowUp(msg), _)) => {
                return Err(HarnessError::BlowUp(format!("trajectory {i}: {msg}")));
            }
            Err((e, _)) => return Err(e),
        }
    }
    let stats = EnsembleStats::from_paths(&paths)?;
    let fit = fit_decay_rate(&stats.series(), FitWindow::TailHalf).ok();
    Ok(EnsembleRun { paths, stats, fit })
}

/// Writes the ensemble means to `output` (NDJSON), per-path prefactors to
/// `<output>.prefactors.csv` and unit-time contraction ratios to `<output>.ratios.csv`.
pub fn ensemble(cfg: &RunConfig, output: &Path, pool: &rayon::ThreadPool) -> Result<EnsembleRun> {
    let run = run_ensemble(cfg, pool)?;
    write_ndjson(output, &run.stats.points)?;
    let prefactors: Vec<String> = run
        .prefactors()
        .iter()
        .enumerate()
        .map(|(i, c)| format!("{i},{c:e}"))
        .collect();
    write_csv(&sidecar(output, ".prefactors.csv"), "trajectory,prefactor", &prefactors)?;
    let ratios: Vec<String> = run
        .stats
        .unit_time_ratios()
        .iter()
        .map(|(t, r)| format!("{t},{r:e}"))
        .collect();
    write_csv(&sidecar(output, ".ratios.csv"), "t,ratio", &ratios)?;
    Ok(run)
}

/// `‖S_ζ(u) - (κ/4)Δu‖` against `κ‖u‖/N^α` for every shell in `shell_list`,
/// with `u` the configured velocity.
pub fn corrector_check(cfg: &RunConfig) -> Result<Vec<CorrectorReport>> {
    if cfg.velocity == VelocityIc::Zero {
        return Err(HarnessError::Config("corrector-check needs a non-zero velocity".into()));
    }
    let grid = cfg.grid()?;
    let (state, _) = initial_state(cfg, &grid)?;
    cfg.shell_list
        .iter()
        .map(|&n| {
            let basis = NoiseBasis::new(NoiseSpec::new(cfg.kappa, n, cfg.gamma)?, &grid)?;
            Ok(basis.corrector_bound_report(state.velocity(), cfg.corrector_s, cfg.corrector_alpha)?)
        })
        .collect()
}

pub fn write_corrector_csv(path: &Path, reports: &[CorrectorReport]) -> Result<()> {
    let rows: Vec<String> = reports
        .iter()
        .map(|r| format!("{},{:e},{:e},{:e}", r.shell, r.error_norm, r.reference, r.ratio))
        .collect();
    write_csv(path, "shell,error_norm,reference,ratio", &rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub shell: u32,
    /// Fitted decay rate of the ensemble mean of `‖U‖²` (NaN when undefined).
    pub rate: f64,
    pub intercept: f64,
    pub residual: f64,
    /// Deterministic rate `γ` of the initial data (NaN when the smallness condition fails).
    pub gamma: f64,
    /// Contraction estimate (NaN for `κ = 0`).
    pub delta_bound: f64,
}

/// One ensemble per `(κ, N)` in `kappa_list × shell_list`.
pub fn rate_sweep(cfg: &RunConfig, pool: &rayon::ThreadPool) -> Result<Vec<SweepRow>> {
    let gamma0 = sobolev_embedding_constant();
    let mut rows = Vec::new();
    for &shell in &cfg.shell_list {
        for &kappa in &cfg.kappa_list {
            let cell = cfg.with_noise(kappa, shell);
            cell.validate()?;
            let run = run_ensemble(&cell, pool)?;
            let first = run.paths[0][0];
            let gamma = deterministic_rate(cfg.viscosity, cfg.diffusivity, first.concentration_deviation(), gamma0)
                .unwrap_or(f64::NAN);
            let delta = match delta_bound(kappa, shell, cfg.delta_alpha, cfg.delta_beta, cfg.delta_constant) {
                Ok(d) => d,
                Err(NpnsError::Config(_)) if kappa == 0.0 => f64::NAN,
                Err(e) => return Err(e.into()),
            };
            let (rate, intercept, residual) = run
                .fit
                .map_or((f64::NAN, f64::NAN, f64::NAN), |f| (f.rate, f.intercept, f.residual));
            rows.push(SweepRow {
                kappa,
                shell,
                rate,
                intercept,
                residual,
                gamma,
                delta_bound: delta,
            });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let lines: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "{},{},{:e},{:e},{:e},{:e},{:e}",
                r.kappa, r.shell, r.rate, r.intercept, r.residual, r.gamma, r.delta_bound
            )
        })
        .collect();
    write_csv(path, "kappa,shell,rate,intercept,residual,gamma,delta_bound", &lines)
}

/// Decay fit of one column of an NDJSON file. Without `column`, uses
/// `total_energy` (simulation output) or `mean_energy` (ensemble output).
pub fn fit_file(path: &Path, column: Option<&str>, window: FitWindow) -> Result<DecayFit> {
    let file = File::open(path).map_err(|e| HarnessError::io(format!("reading {}", path.display()), e))?;
    let mut series = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| HarnessError::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| HarnessError::Config(format!("{} line {}: {e}", path.display(), i + 1)))?;
        let key = match column {
            Some(c) => c,
            None if row.get("total_energy").is_some() => "total_energy",
            None => "mean_energy",
        };
        let get = |k: &str| {
            row.get(k)
                .and_then(serde_json::Value::as_f64)
                .ok_or_else(|| HarnessError::Config(format!("{} line {}: no numeric `{k}`", path.display(), i + 1)))
        };
        series.push((get("t")?, get(key)?));
    }
    Ok(fit_decay_rate(&series, window)?)
}
