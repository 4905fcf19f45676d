//! Time stepping of the coupled system on the mild formulation.
//!
//! With `Q = e^{(D+κ)dtΔ}` and `P = e^{(ν+κ/4)dtΔ}` one exponential step is
//!
//! ```text
//! c_i' = Q[c_i + dt·F_i(U) + dV·∇c_i]
//! u'   = P[u + dt·(G(U) + S_ζ(u) - (κ/4)Δu) + Π(dV·∇u)]
//! ```
//!
//! with every explicit term taken at the left endpoint. The semi-implicit
//! variant replaces `e^{-a|k|²dt}` by `1/(1 + a|k|²dt)`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{record, EnergyRecord};
use crate::dynamics::{advect, explicit_terms, noise_action_physical, PhysicalState, State, SystemParams};
use crate::error::{NpnsError, Result};
use crate::noise::NoiseBasis;
use crate::spectral::{Grid, SpectralScalar, SpectralVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    ExponentialEuler,
    SemiImplicitEuler,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::ExponentialEuler => "exponential-euler",
            Scheme::SemiImplicitEuler => "semi-implicit-euler",
        }
    }

    /// Damping factor of `e^{-x}` over one step, `x = a|k|²dt`.
    fn multiplier(self, x: f64) -> f64 {
        match self {
            Scheme::ExponentialEuler => (-x).exp(),
            Scheme::SemiImplicitEuler => 1.0 / (1.0 + x),
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = NpnsError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exponential-euler" => Ok(Scheme::ExponentialEuler),
            "semi-implicit-euler" => Ok(Scheme::SemiImplicitEuler),
            other => Err(NpnsError::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_end: f64,
    pub seed: u64,
    /// Steps between diagnostics records.
    pub record_stride: usize,
    /// Substream index of this trajectory under `seed`.
    pub trajectory: u64,
}

impl StepperConfig {
    pub fn new(dt: f64, t_end: f64, seed: u64) -> Self {
        Self {
            dt,
            scheme: Scheme::ExponentialEuler,
            t_end,
            seed,
            record_stride: 1,
            trajectory: 0,
        }
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_stride(mut self, record_stride: usize) -> Self {
        self.record_stride = record_stride;
        self
    }

    pub fn with_trajectory(mut self, trajectory: u64) -> Self {
        self.trajectory = trajectory;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(NpnsError::Config(format!("dt must be finite and > 0, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(NpnsError::Config(format!("t_end must be finite and ≥ 0, got {}", self.t_end)));
        }
        if self.record_stride == 0 {
            return Err(NpnsError::Config("record_stride must be ≥ 1".into()));
        }
        Ok(())
    }

    /// Number of steps, `t_end / dt` rounded to the nearest integer.
    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }
}

/// Largest admissible `dt` for `state`:
/// `min(0.5 / (max|k| · ‖u‖_∞), 0.1 / (D(1 + 2c̄)))`, where `max|k|` is the
/// largest retained wavenumber magnitude and `c̄` the larger species mean.
pub fn stability_budget(grid: &Grid, state: &State, params: &SystemParams) -> Result<f64> {
    let (ux, uy) = grid.vector_to_physical(state.velocity())?;
    let u_max = ux
        .iter()
        .zip(&uy)
        .map(|(a, b)| a.hypot(*b))
        .fold(0.0, f64::max);
    let k_max = std::f64::consts::SQRT_2 * grid.dealias_radius() as f64;
    let (m1, m2) = state.mean_concentrations();
    let cbar = m1.max(m2).max(0.0);
    let advective = if u_max > 0.0 { 0.5 / (k_max * u_max) } else { f64::INFINITY };
    let screening = 0.1 / (params.diffusivity * (1.0 + 2.0 * cbar));
    Ok(advective.min(screening))
}

/// Per-mode damping factors over one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Semigroups {
    /// `Q_dt(k)`, rate `D + κ`.
    pub scalar: Vec<f64>,
    /// `P_dt(k)`, rate `ν + κ/4`.
    pub velocity: Vec<f64>,
}

impl Semigroups {
    pub fn new(grid: &Grid, params: &SystemParams, dt: f64, scheme: Scheme) -> Self {
        Self::with_rates(grid, params.scalar_diffusivity(), params.velocity_diffusivity(), dt, scheme)
    }

    fn with_rates(grid: &Grid, scalar_rate: f64, velocity_rate: f64, dt: f64, scheme: Scheme) -> Self {
        let k2: Vec<f64> = (0..grid.len())
            .map(|i| {
                let (a, b) = grid.wavevector(i);
                (a * a + b * b) as f64
            })
            .collect();
        Self {
            scalar: k2.iter().map(|k| scheme.multiplier(scalar_rate * k * dt)).collect(),
            velocity: k2.iter().map(|k| scheme.multiplier(velocity_rate * k * dt)).collect(),
        }
    }
}

/// Generator of trajectory `index` under `seed`: a ChaCha8 stream keyed by the
/// seed with the trajectory index as stream number.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Single-trajectory stepper holding the semigroups and the random stream.
pub struct Stepper<'a> {
    grid: &'a Grid,
    basis: &'a NoiseBasis,
    params: SystemParams,
    semigroups: Semigroups,
    dt: f64,
    rng: ChaCha8Rng,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a Grid, basis: &'a NoiseBasis, params: SystemParams, config: &StepperConfig) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        if basis.resolution() != grid.size() || basis.spec() != &params.noise {
            return Err(NpnsError::Config("noise basis does not match the grid or parameters".into()));
        }
        Ok(Self {
            grid,
            basis,
            params,
            semigroups: Semigroups::new(grid, &params, config.dt, config.scheme),
            dt: config.dt,
            rng: trajectory_rng(config.seed, config.trajectory),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advances `state` by one step.
    pub fn step(&mut self, state: &State) -> Result<State> {
        let grid = self.grid;
        let phys = PhysicalState::of(grid, state);
        let terms = explicit_terms(grid, state, &phys, &self.params, self.basis)?;
        let dt = self.dt;

        let mut c1 = state.c1().clone();
        c1.axpy(dt, &terms.c1);
        let mut c2 = state.c2().clone();
        c2.axpy(dt, &terms.c2);
        let mut u = state.velocity().clone();
        u.axpy(dt, &terms.u);

        if self.params.noise.is_active() {
            let dv = self.basis.sample_increment(dt, &mut self.rng).field;
            let (vx, vy) = grid.vector_to_physical(&dv)?;
            let action = noise_action_physical(grid, &phys, &vx, &vy);
            c1 += &action.c1;
            c2 += &action.c2;
            u += &action.u;
        }

        damp(&mut c1, &self.semigroups.scalar);
        damp(&mut c2, &self.semigroups.scalar);
        damp(&mut u.x, &self.semigroups.velocity);
        damp(&mut u.y, &self.semigroups.velocity);
        if !(c1.is_finite() && c2.is_finite() && u.is_finite()) {
            return Err(NpnsError::BlowUp {
                t: f64::NAN,
                reason: "non-finite coefficient".into(),
                last_record: None,
            });
        }
        State::from_parts_unchecked(u, c1, c2)
    }
}

fn damp(f: &mut SpectralScalar, factors: &[f64]) {
    for (c, q) in f.coefficients_mut().iter_mut().zip(factors) {
        *c *= *q;
    }
}

/// Final state and the diagnostics recorded along a trajectory.
#[derive(Debug, Clone)]
pub struct TrajectoryResult {
    pub final_state: State,
    pub records: Vec<EnergyRecord>,
    pub steps: u64,
}

/// A failed trajectory together with the records made before the failure.
#[derive(Debug)]
pub struct TrajectoryError {
    pub error: NpnsError,
    pub records: Vec<EnergyRecord>,
}

impl std::fmt::Display for TrajectoryError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ({} records kept)", self.error, self.records.len())
    }
}

impl std::error::Error for TrajectoryError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<NpnsError> for TrajectoryError {
    fn from(error: NpnsError) -> Self {
        Self { error, records: Vec::new() }
    }
}

/// Integrates from `state0` to `config.t_end`, recording at step 0, every
/// `record_stride` steps and at the final step. `observer` sees each recorded
/// state.
pub fn integrate<F>(
    grid: &Grid,
    basis: &NoiseBasis,
    state0: State,
    params: &SystemParams,
    config: &StepperConfig,
    mut observer: F,
) -> std::result::Result<TrajectoryResult, TrajectoryError>
where
    F: FnMut(&State, &EnergyRecord),
{
    let mut stepper = Stepper::new(grid, basis, *params, config)?;
    let budget = stability_budget(grid, &state0, params)?;
    if config.dt > budget {
        return Err(NpnsError::Config(format!(
            "dt = {} exceeds the stability budget {budget:.3e} of the initial state",
            config.dt
        ))
        .into());
    }
    let steps = config.steps();
    let mut state = state0;
    let first = record(grid, &state, 0.0);
    observer(&state, &first);
    let mut records = vec![first];
    for n in 1..=steps {
        let t = n as f64 * config.dt;
        match stepper.step(&state) {
            Ok(next) => state = next,
            Err(error) => {
                let error = match error {
                    NpnsError::BlowUp { reason, .. } => NpnsError::BlowUp {
                        t,
                        reason,
                        last_record: Some(Box::new(record(grid, &state, t - config.dt))),
                    },
                    other => other,
                };
                return Err(TrajectoryError { error, records });
            }
        }
        if n % config.record_stride as u64 == 0 || n == steps {
            let r = record(grid, &state, t);
            observer(&state, &r);
            records.push(r);
        }
    }
    Ok(TrajectoryResult {
        final_state: state,
        records,
        steps,
    })
}

/// Transport of a single passive scalar with diffusivity `diffusivity ≥ 0`:
/// `dc = (diffusivity + κ)Δc dt + dV·∇c`, velocity ignored. Returns
/// `(t, ‖c‖²_{L²})` at step 0, every `record_stride` steps and at the end.
pub fn integrate_passive_scalar(
    grid: &Grid,
    basis: &NoiseBasis,
    c0: &SpectralScalar,
    diffusivity: f64,
    config: &StepperConfig,
) -> Result<Vec<(f64, f64)>> {
    config.validate()?;
    if !(diffusivity >= 0.0 && diffusivity.is_finite()) {
        return Err(NpnsError::Config(format!("diffusivity must be ≥ 0, got {diffusivity}")));
    }
    let kappa = basis.spec().intensity;
    let q = Semigroups::with_rates(grid, diffusivity + kappa, 0.0, config.dt, config.scheme).scalar;
    let mut rng = trajectory_rng(config.seed, config.trajectory);
    let mut c = c0.clone().dealiased();
    let steps = config.steps();
    let mut out = vec![(0.0, c.l2_norm_sq())];
    for n in 1..=steps {
        if basis.spec().is_active() {
            let dv: SpectralVector = basis.sample_increment(config.dt, &mut rng).field;
            c += &advect(grid, &dv, &c)?;
        }
        damp(&mut c, &q);
        if !c.is_finite() {
            return Err(NpnsError::BlowUp {
                t: n as f64 * config.dt,
                reason: "non-finite passive scalar".into(),
                last_record: None,
            });
        }
        if n % config.record_stride as u64 == 0 || n == steps {
            out.push((n as f64 * config.dt, c.l2_norm_sq()));
        }
    }
    Ok(out)
}

/// Ratio `δ·‖∫_a^b e^{δ(b-s)Δ} f(s) ds‖²_{Ḣ^{α+1}} / ∫_a^b ‖f(s)‖²_{Ḣ^α} ds`
/// from samples of `f` at equally spaced times `a = s₀ < … < s_n = b`
/// (composite Simpson rule, `n` even). Norms are homogeneous, so the zero mode
/// is ignored. Returns 0 when `f` vanishes.
pub fn heat_smoothing_check(samples: &[SpectralScalar], a: f64, b: f64, delta: f64, alpha: f64) -> Result<f64> {
    if samples.len() < 3 || samples.len() % 2 == 0 {
        return Err(NpnsError::Config("need an odd number (≥ 3) of time samples".into()));
    }
    if !(b > a) || !(delta > 0.0) {
        return Err(NpnsError::Config("need a < b and δ > 0".into()));
    }
    let m = samples[0].size();
    if samples.iter().any(|f| f.size() != m) {
        return Err(NpnsError::Config("samples on different grids".into()));
    }
    let n = samples.len() - 1;
    let h = (b - a) / n as f64;
    let weight = |i: usize| {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w * h / 3.0
    };

    let mut convolved = SpectralScalar::zeros(m);
    let mut rhs = 0.0;
    for (i, f) in samples.iter().enumerate() {
        let s = a + i as f64 * h;
        let w = weight(i);
        let mut damped = f.apply_radial(|k2| (-delta * k2 * (b - s)).exp());
        damped *= w;
        convolved += &damped;
        rhs += w * f.homogeneous_sobolev_norm_sq(alpha);
    }
    if rhs == 0.0 {
        return Ok(0.0);
    }
    Ok(delta * convolved.homogeneous_sobolev_norm_sq(alpha + 1.0) / rhs)
}
