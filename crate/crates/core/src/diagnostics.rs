//! Energy functionals, smallness conditions, rate bounds and decay fits.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dynamics::{State, SystemParams};
use crate::error::{NpnsError, Result};
use crate::spectral::{lp_norm_of_samples, Grid, LpExponent};

/// Norms of one state at time `t`. Concentration norms are of the deviations
/// `c_i - c̄_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyRecord {
    pub t: f64,
    /// `‖u‖²_{L²}`
    pub velocity_energy: f64,
    /// `‖c₁ - c̄₁‖²_{L²}`
    pub c1_deviation: f64,
    /// `‖c₂ - c̄₂‖²_{L²}`
    pub c2_deviation: f64,
    /// `‖U‖² = ‖u‖² + ‖c₁ - c̄₁‖² + ‖c₂ - c̄₂‖²`
    pub total_energy: f64,
    /// `‖ρ‖³_{L³}`
    pub charge_l3_cubed: f64,
    /// `‖ρ‖_{L²}`
    pub charge_l2: f64,
    pub c1_gradient: f64,
    pub c2_gradient: f64,
    pub velocity_gradient: f64,
    /// Minimum of `c₁` over the collocation points.
    pub c1_min: f64,
    pub c2_min: f64,
    pub c1_mean: f64,
    pub c2_mean: f64,
}

impl EnergyRecord {
    /// `‖c₁ - c̄₁‖² + ‖c₂ - c̄₂‖²`.
    pub fn concentration_deviation(&self) -> f64 {
        self.c1_deviation + self.c2_deviation
    }

    pub fn is_finite(&self) -> bool {
        [
            self.t,
            self.velocity_energy,
            self.c1_deviation,
            self.c2_deviation,
            self.total_energy,
            self.charge_l3_cubed,
            self.charge_l2,
            self.c1_gradient,
            self.c2_gradient,
            self.velocity_gradient,
            self.c1_min,
            self.c2_min,
            self.c1_mean,
            self.c2_mean,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Diagnostics of `state` at time `t`.
pub fn record(grid: &Grid, state: &State, t: f64) -> EnergyRecord {
    let (p1, p2) = grid.to_physical_pair(state.c1(), state.c2());
    let rho: Vec<f64> = p1.iter().zip(&p2).map(|(a, b)| a - b).collect();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let velocity_energy = state.velocity().l2_norm_sq();
    let c1_deviation = state.c1().deviation_norm_sq().max(0.0);
    let c2_deviation = state.c2().deviation_norm_sq().max(0.0);
    EnergyRecord {
        t,
        velocity_energy,
        c1_deviation,
        c2_deviation,
        total_energy: velocity_energy + c1_deviation + c2_deviation,
        charge_l3_cubed: lp_norm_of_samples(&rho, LpExponent::Three).powi(3),
        charge_l2: state.charge().l2_norm_sq().sqrt(),
        c1_gradient: state.c1().gradient_norm_sq(),
        c2_gradient: state.c2().gradient_norm_sq(),
        velocity_gradient: state.velocity().gradient_norm_sq(),
        c1_min: min(&p1),
        c2_min: min(&p2),
        c1_mean: state.c1().mean(),
        c2_mean: state.c2().mean(),
    }
}

/// `Σ_{n∈ℤ} (n² + a²)⁻²`, from differentiating `Σ (n² + a²)⁻¹ = (π/a) coth(πa)`.
fn lattice_row_sum(a: f64) -> f64 {
    let x = PI * a;
    let e = (-2.0 * x).exp();
    let coth = (1.0 + e) / (1.0 - e);
    // csch²(x) = 4e^{-2x} / (1 - e^{-2x})²
    let csch_sq = 4.0 * e / ((1.0 - e) * (1.0 - e));
    PI * coth / (2.0 * a * a * a) + PI * PI * csch_sq / (2.0 * a * a)
}

/// Constant `γ₀` of `‖f‖_{L^∞} ≤ γ₀ ‖f‖_{H²}` in the spectral norm convention.
///
/// By Cauchy-Schwarz, `‖f‖_∞ ≤ Σ|f̂_k| ≤ (Σ(1+|k|²)⁻²)^{1/2} ‖f‖_{H²} / 2π`.
/// The lattice sum is evaluated row by row in closed form; the rows are summed
/// up to `|k₁| ≤ 10⁶` with an integral tail correction, leaving an error far
/// below `1e-10`.
pub fn sobolev_embedding_constant() -> f64 {
    const ROWS: i64 = 1_000_000;
    let mut sum = lattice_row_sum(1.0);
    // summing small terms first keeps the rounding low
    for k in (1..=ROWS).rev() {
        sum += 2.0 * lattice_row_sum((1.0 + (k * k) as f64).sqrt());
    }
    // Σ_{k>K} π/(2k³) ≈ π/(4K²) per side, and the csch² part is negligible
    let tail = 2.0 * PI / (4.0 * (ROWS as f64 + 0.5).powi(2));
    (sum + tail).sqrt() / (2.0 * PI)
}

/// Result of [`smallness_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Smallness {
    pub holds: bool,
    /// Initial deviation energy `c̄₀ = ‖c₁(0) - c̄₁‖² + ‖c₂(0) - c̄₂‖²`.
    pub deviation_energy: f64,
    /// `νD / (2γ₀²)`; the condition is `c̄₀ <` threshold.
    pub threshold: f64,
    /// `threshold - c̄₀`, positive when the condition holds.
    pub margin: f64,
}

/// Checks `‖c₁(0)-c̄₁‖² + ‖c₂(0)-c̄₂‖² < νD/(2γ₀²)`, equivalently `νD - 2γ₀² c̄₀ > 0`.
pub fn smallness_check(initial: &EnergyRecord, params: &SystemParams, gamma0: f64) -> Smallness {
    let deviation_energy = initial.concentration_deviation();
    let threshold = params.viscosity * params.diffusivity / (2.0 * gamma0 * gamma0);
    // Both forms are checked as written so the strict inequality is exact at the boundary.
    let theorem_form = deviation_energy < threshold;
    let energy_form = params.viscosity * params.diffusivity - 2.0 * gamma0 * gamma0 * deviation_energy > 0.0;
    Smallness {
        holds: theorem_form && energy_form,
        deviation_energy,
        threshold,
        margin: threshold - deviation_energy,
    }
}

/// Rate `γ = min{ν, 2D - 4γ₀² c̄₀ / ν}` of the deterministic energy inequality.
pub fn deterministic_rate(viscosity: f64, diffusivity: f64, deviation_energy: f64, gamma0: f64) -> Result<f64> {
    let condition = viscosity * diffusivity - 2.0 * gamma0 * gamma0 * deviation_energy;
    if condition <= 0.0 {
        return Err(NpnsError::ConditionFailed(format!(
            "νD - 2γ₀²c̄₀ = {condition:e} is not positive"
        )));
    }
    Ok(viscosity.min(2.0 * diffusivity - 4.0 * gamma0 * gamma0 * deviation_energy / viscosity))
}

/// Exponents `(p, q)` of the last term `κ^p N^{-q}` in the contraction bound.
pub fn delta_bound_exponents(alpha: f64, beta: f64) -> (f64, f64) {
    (
        (2.0 * beta - alpha * (beta + 1.0)) / (2.0 * (alpha + beta)),
        2.0 * alpha / (alpha + beta),
    )
}

/// `C (1/κ + 1/κ² + 1/N² + κ^p N^{-q})`, the one-step contraction estimate.
pub fn delta_bound(kappa: f64, shell: u32, alpha: f64, beta: f64, constant: f64) -> Result<f64> {
    if !(0.0 < alpha && alpha < 1.0 && 1.0 < beta && beta <= 3.0) {
        return Err(NpnsError::Config(format!(
            "need 0 < α < 1 < β ≤ 3, got α = {alpha}, β = {beta}"
        )));
    }
    if !(kappa > 0.0) || shell == 0 {
        return Err(NpnsError::Config("need κ > 0 and N ≥ 1".into()));
    }
    let n = shell as f64;
    let (p, q) = delta_bound_exponents(alpha, beta);
    Ok(constant * (1.0 / kappa + 1.0 / (kappa * kappa) + 1.0 / (n * n) + kappa.powf(p) * n.powf(-q)))
}

/// Portion of a series used by [`fit_decay_rate`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum FitWindow {
    /// Second half of the recorded time range.
    #[default]
    TailHalf,
    /// Closed interval `[t₀, t₁]`.
    Range(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// `λ̂ = -slope` of `log(value)` against `t`.
    pub rate: f64,
    /// Fitted `log(value)` at `t = 0`.
    pub intercept: f64,
    pub window: (f64, f64),
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit of `log(value) = intercept - rate · t`.
pub fn fit_decay_rate(series: &[(f64, f64)], window: FitWindow) -> Result<DecayFit> {
    if series.is_empty() {
        return Err(NpnsError::FitDomain("empty series".into()));
    }
    let (t_first, t_last) = (series[0].0, series[series.len() - 1].0);
    let (lo, hi) = match window {
        FitWindow::TailHalf => (t_first + 0.5 * (t_last - t_first), t_last),
        FitWindow::Range(a, b) => (a, b),
    };
    let pts: Vec<(f64, f64)> = series
        .iter()
        .filter(|(t, _)| *t >= lo && *t <= hi)
        .copied()
        .collect();
    if pts.len() < 2 {
        return Err(NpnsError::FitDomain(format!(
            "window [{lo}, {hi}] holds {} point(s), need at least 2",
            pts.len()
        )));
    }
    if let Some((t, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(NpnsError::FitDomain(format!("value {v} at t = {t} is not positive")));
    }
    let n = pts.len() as f64;
    let mean_t = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in &pts {
        let dt = t - mean_t;
        sxy += dt * (v.ln() - mean_y);
        sxx += dt * dt;
    }
    if sxx == 0.0 {
        return Err(NpnsError::FitDomain("window spans a single time".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    let residual = (pts
        .iter()
        .map(|(t, v)| (v.ln() - intercept - slope * t).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(DecayFit {
        rate: -slope,
        intercept,
        window: (lo, hi),
        residual,
        points: pts.len(),
    })
}

/// Largest `(‖c₁-c̄₁‖² + ‖c₂-c̄₂‖²)(t) / (e^{-2Dt} · initial)` over the records.
pub fn worst_decay_ratio(records: &[EnergyRecord], diffusivity: f64) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    let initial = first.concentration_deviation();
    records
        .iter()
        .map(|r| {
            let bound = (-2.0 * diffusivity * (r.t - first.t)).exp() * initial;
            if bound == 0.0 {
                if r.concentration_deviation() == 0.0 { 0.0 } else { f64::INFINITY }
            } else {
                r.concentration_deviation() / bound
            }
        })
        .fold(0.0, f64::max)
}

/// Checks `‖c₁-c̄₁‖² + ‖c₂-c̄₂‖² ≤ e^{-2Dt} (initial)` at every record with
/// multiplicative slack `1 + 1e-6 · steps`, where `steps = (t - t₀)/dt`.
pub fn pathwise_decay_check(records: &[EnergyRecord], diffusivity: f64, dt: f64) -> bool {
    let Some(first) = records.first() else {
        return true;
    };
    let initial = first.concentration_deviation();
    records.iter().all(|r| {
        let elapsed = r.t - first.t;
        let steps = (elapsed / dt).round();
        let bound = (-2.0 * diffusivity * elapsed).exp() * initial * (1.0 + 1e-6 * steps);
        r.concentration_deviation() <= bound
    })
}

/// Per-path prefactor `sup_t e^{λt} ‖U(t)‖ / ‖U(0)‖`.
pub fn path_prefactor(records: &[EnergyRecord], rate: f64) -> f64 {
    let Some(first) = records.first() else {
        return 0.0;
    };
    let u0 = first.total_energy.sqrt();
    if u0 == 0.0 {
        return 0.0;
    }
    records
        .iter()
        .map(|r| (rate * (r.t - first.t)).exp() * r.total_energy.sqrt() / u0)
        .fold(0.0, f64::max)
}

/// Ensemble mean of `‖U‖²` at one record time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsemblePoint {
    pub t: f64,
    pub mean_energy: f64,
    pub standard_error: f64,
    pub trajectories: usize,
}

/// Ensemble means of `‖U‖²` over trajectories sharing record times.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub points: Vec<EnsemblePoint>,
}

impl EnsembleStats {
    /// Aggregates paths; values are sorted before summation so the result does
    /// not depend on the order of the trajectories.
    pub fn from_paths(paths: &[Vec<EnergyRecord>]) -> Result<Self> {
        let Some(first) = paths.first() else {
            return Err(NpnsError::Config("ensemble needs at least one trajectory".into()));
        };
        let len = paths.iter().map(Vec::len).min().unwrap_or(0);
        if paths.iter().any(|p| p.len() != first.len()) {
            return Err(NpnsError::Config("trajectories recorded different numbers of points".into()));
        }
        let count = paths.len();
        let points = (0..len)
            .map(|i| {
                let mut values: Vec<f64> = paths.iter().map(|p| p[i].total_energy).collect();
                values.sort_by(f64::total_cmp);
                let mean = values.iter().sum::<f64>() / count as f64;
                let standard_error = if count > 1 {
                    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
                    dev.sort_by(f64::total_cmp);
                    (dev.iter().sum::<f64>() / (count - 1) as f64 / count as f64).sqrt()
                } else {
                    0.0
                };
                EnsemblePoint {
                    t: first[i].t,
                    mean_energy: mean,
                    standard_error,
                    trajectories: count,
                }
            })
            .collect();
        Ok(Self { points })
    }

    /// `(t, mean ‖U‖²)` pairs for [`fit_decay_rate`].
    pub fn series(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.t, p.mean_energy)).collect()
    }

    /// Ratios `E‖U(n+1)‖² / E‖U(n)‖²` over consecutive whole time units.
    pub fn unit_time_ratios(&self) -> Vec<(f64, f64)> {
        let at = |t: f64| {
            self.points
                .iter()
                .find(|p| (p.t - t).abs() < 1e-9)
                .map(|p| p.mean_energy)
        };
        let t_end = self.points.last().map(|p| p.t).unwrap_or(0.0);
        let mut out = Vec::new();
        let mut n = 0.0;
        while n + 1.0 <= t_end + 1e-9 {
            if let (Some(a), Some(b)) = (at(n), at(n + 1.0)) {
                if a > 0.0 {
                    out.push((n, b / a));
                }
            }
            n += 1.0;
        }
        out
    }
}
