//! Itô drift and noise action of the coupled two-species system
//!
//! ```text
//! dc₁ = [(D+κ)Δc₁ - u·∇c₁ + D∇·(c₁∇Φ)] dt + dV·∇c₁
//! dc₂ = [(D+κ)Δc₂ - u·∇c₂ - D∇·(c₂∇Φ)] dt + dV·∇c₂
//! du  = [νΔu + S_ζ(u) - Π(u·∇u + ρ∇Φ)] dt + Π(dV·∇u)
//! -ΔΦ = ρ = c₁ - c₂,   ∇·u = 0
//! ```
//!
//! Products are formed on the collocation grid and differentiated in Fourier
//! space in divergence form, so the mean of every term vanishes identically.

use crate::error::{NpnsError, Result};
use crate::noise::{NoiseBasis, NoiseSpec};
use crate::spectral::{Grid, SpectralScalar, SpectralVector, HERMITIAN_TOLERANCE};

/// Relative divergence tolerated when building a [`State`].
const STATE_DIVERGENCE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Fluid viscosity `ν > 0`.
    pub viscosity: f64,
    /// Ionic diffusivity `D > 0`, shared by both species.
    pub diffusivity: f64,
    pub noise: NoiseSpec,
}

impl SystemParams {
    pub fn new(viscosity: f64, diffusivity: f64, noise: NoiseSpec) -> Result<Self> {
        let params = Self {
            viscosity,
            diffusivity,
            noise,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("viscosity", self.viscosity), ("diffusivity", self.diffusivity)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(NpnsError::Config(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        self.noise.validate()
    }

    /// Effective scalar diffusivity `D + κ`.
    pub fn scalar_diffusivity(&self) -> f64 {
        self.diffusivity + self.noise.intensity
    }

    /// Effective viscosity `ν + κ/4` of the velocity semigroup.
    pub fn velocity_diffusivity(&self) -> f64 {
        self.viscosity + 0.25 * self.noise.intensity
    }
}

/// Charge of a species: `+1` for `c₁`, `-1` for `c₂`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valence {
    Positive,
    Negative,
}

impl Valence {
    pub fn sign(self) -> f64 {
        match self {
            Valence::Positive => 1.0,
            Valence::Negative => -1.0,
        }
    }
}

/// Velocity and concentrations at one instant, with the potential kept in sync.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    u: SpectralVector,
    c1: SpectralScalar,
    c2: SpectralScalar,
    rho: SpectralScalar,
    phi: SpectralScalar,
}

impl State {
    /// Builds a state, truncating every field to the 2/3-rule band.
    ///
    /// Fails if the fields are not real, `u` is not divergence-free with zero
    /// mean, or the two species have different means.
    pub fn new(u: SpectralVector, c1: SpectralScalar, c2: SpectralScalar) -> Result<Self> {
        let m = c1.size();
        if c2.size() != m || u.size() != m {
            return Err(NpnsError::InvalidField("fields have different resolutions".into()));
        }
        for (name, f) in [("u₁", &u.x), ("u₂", &u.y), ("c₁", &c1), ("c₂", &c2)] {
            if f.hermitian_defect() > HERMITIAN_TOLERANCE * f.max_abs().max(1.0) {
                return Err(NpnsError::InvalidField(format!("{name} is not a real field")));
            }
        }
        let scale = u.max_abs().max(1.0);
        if u.divergence_defect() > STATE_DIVERGENCE_TOLERANCE * scale {
            return Err(NpnsError::InvalidField("velocity is not divergence-free".into()));
        }
        if u.x.mean().abs().max(u.y.mean().abs()) > STATE_DIVERGENCE_TOLERANCE * scale {
            return Err(NpnsError::InvalidField("velocity must have zero mean".into()));
        }
        let mut state = Self {
            u,
            c1,
            c2,
            rho: SpectralScalar::zeros(m),
            phi: SpectralScalar::zeros(m),
        };
        state.u.dealias();
        state.c1.dealias();
        state.c2.dealias();
        state.refresh_coupling()?;
        Ok(state)
    }

    /// `u = 0`, `c₁ = c₂ = c̄`.
    pub fn equilibrium(m: usize, mean: f64) -> Self {
        Self {
            u: SpectralVector::zeros(m),
            c1: SpectralScalar::constant(m, mean),
            c2: SpectralScalar::constant(m, mean),
            rho: SpectralScalar::zeros(m),
            phi: SpectralScalar::zeros(m),
        }
    }

    /// Recomputes `ρ = c₁ - c₂` and solves `-ΔΦ = ρ`.
    pub fn refresh_coupling(&mut self) -> Result<()> {
        let mut rho = self.c1.clone();
        rho -= &self.c2;
        // The means are equal up to rounding; the charge has none.
        rho.coefficients_mut()[0] = num_complex::Complex64::default();
        let mean_gap = (self.c1.mean() - self.c2.mean()).abs();
        if mean_gap > crate::spectral::ZERO_MEAN_TOLERANCE {
            return Err(NpnsError::NonzeroMeanCharge(mean_gap));
        }
        self.phi = rho.poisson_solve()?;
        self.rho = rho;
        Ok(())
    }

    pub(crate) fn from_parts_unchecked(
        u: SpectralVector,
        c1: SpectralScalar,
        c2: SpectralScalar,
    ) -> Result<Self> {
        let m = c1.size();
        let mut state = Self {
            u,
            c1,
            c2,
            rho: SpectralScalar::zeros(m),
            phi: SpectralScalar::zeros(m),
        };
        state.refresh_coupling()?;
        Ok(state)
    }

    pub fn size(&self) -> usize {
        self.c1.size()
    }

    pub fn velocity(&self) -> &SpectralVector {
        &self.u
    }

    pub fn c1(&self) -> &SpectralScalar {
        &self.c1
    }

    pub fn c2(&self) -> &SpectralScalar {
        &self.c2
    }

    pub fn charge(&self) -> &SpectralScalar {
        &self.rho
    }

    pub fn potential(&self) -> &SpectralScalar {
        &self.phi
    }

    /// `(c̄₁, c̄₂)`.
    pub fn mean_concentrations(&self) -> (f64, f64) {
        (self.c1.mean(), self.c2.mean())
    }

    pub fn into_parts(self) -> (SpectralVector, SpectralScalar, SpectralScalar) {
        (self.u, self.c1, self.c2)
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.c1.is_finite() && self.c2.is_finite()
    }

    /// Same state with the species exchanged.
    pub fn swap_species(&self) -> Self {
        Self {
            u: self.u.clone(),
            c1: self.c2.clone(),
            c2: self.c1.clone(),
            rho: negated(&self.rho),
            phi: negated(&self.phi),
        }
    }
}

fn negated(f: &SpectralScalar) -> SpectralScalar {
    let mut out = f.clone();
    out *= -1.0;
    out
}

/// Full Itô drift of `(c₁, c₂, u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEval {
    pub c1: SpectralScalar,
    pub c2: SpectralScalar,
    pub u: SpectralVector,
}

/// Noise contribution `(dV·∇c₁, dV·∇c₂, Π(dV·∇u))` of one increment.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseAction {
    pub c1: SpectralScalar,
    pub c2: SpectralScalar,
    pub u: SpectralVector,
}

/// `∇·(f_x, f_y)` of a flux, dealiased.
fn flux_divergence(fx: SpectralScalar, fy: SpectralScalar) -> SpectralScalar {
    let mut d = SpectralVector::new(fx, fy).divergence();
    d.dealias();
    d
}

/// `v·∇f`, computed as `∇·(v f)`; requires `∇·v = 0`.
pub fn advect(grid: &Grid, v: &SpectralVector, f: &SpectralScalar) -> Result<SpectralScalar> {
    let (vx, vy) = grid.vector_to_physical(v)?;
    let pf = grid.to_physical(f)?;
    let fx: Vec<f64> = vx.iter().zip(&pf).map(|(a, b)| a * b).collect();
    let fy: Vec<f64> = vy.iter().zip(&pf).map(|(a, b)| a * b).collect();
    let (sx, sy) = grid.to_spectral_pair(&fx, &fy);
    Ok(flux_divergence(sx, sy))
}

/// Electromigration term `z D ∇·(c∇Φ)` of a species with valence `z`.
pub fn migration(
    grid: &Grid,
    c: &SpectralScalar,
    phi: &SpectralScalar,
    valence: Valence,
    diffusivity: f64,
) -> Result<SpectralScalar> {
    let (gx, gy) = grid.vector_to_physical(&phi.gradient())?;
    let pc = grid.to_physical(c)?;
    let scale = valence.sign() * diffusivity;
    let fx: Vec<f64> = gx.iter().zip(&pc).map(|(g, c)| scale * g * c).collect();
    let fy: Vec<f64> = gy.iter().zip(&pc).map(|(g, c)| scale * g * c).collect();
    let (sx, sy) = grid.to_spectral_pair(&fx, &fy);
    Ok(flux_divergence(sx, sy))
}

/// Electric body force `-Π(ρ∇Φ)`.
pub fn electric_force(
    grid: &Grid,
    rho: &SpectralScalar,
    phi: &SpectralScalar,
) -> Result<SpectralVector> {
    let (gx, gy) = grid.vector_to_physical(&phi.gradient())?;
    let pr = grid.to_physical(rho)?;
    let fx: Vec<f64> = gx.iter().zip(&pr).map(|(g, r)| -g * r).collect();
    let fy: Vec<f64> = gy.iter().zip(&pr).map(|(g, r)| -g * r).collect();
    let (sx, sy) = grid.to_spectral_pair(&fx, &fy);
    let mut f = SpectralVector::new(sx, sy).leray_project();
    f.dealias();
    zero_mean_vector(&mut f);
    Ok(f)
}

/// `Π(v·∇w)` for a divergence-free `v`, dealiased and mean-free.
pub fn vector_advection(grid: &Grid, v: &SpectralVector, w: &SpectralVector) -> Result<SpectralVector> {
    let (vx, vy) = grid.vector_to_physical(v)?;
    let (wx, wy) = grid.vector_to_physical(w)?;
    Ok(vector_advection_physical(grid, &vx, &vy, &wx, &wy))
}

fn vector_advection_physical(grid: &Grid, vx: &[f64], vy: &[f64], wx: &[f64], wy: &[f64]) -> SpectralVector {
    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p * q).collect() };
    // component i is ∂_j(v_j w_i)
    let (a_x, a_y) = grid.to_spectral_pair(&mul(vx, wx), &mul(vy, wx));
    let (b_x, b_y) = grid.to_spectral_pair(&mul(vx, wy), &mul(vy, wy));
    let raw = SpectralVector::new(
        SpectralVector::new(a_x, a_y).divergence(),
        SpectralVector::new(b_x, b_y).divergence(),
    );
    let mut out = raw.leray_project();
    out.dealias();
    zero_mean_vector(&mut out);
    out
}

fn zero_mean_vector(v: &mut SpectralVector) {
    v.x.coefficients_mut()[0] = Default::default();
    v.y.coefficients_mut()[0] = Default::default();
}

/// Collocation samples of the state, shared between drift and noise.
pub(crate) struct PhysicalState {
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub c1: Vec<f64>,
    pub c2: Vec<f64>,
}

impl PhysicalState {
    pub(crate) fn of(grid: &Grid, state: &State) -> Self {
        let (u1, u2) = grid.to_physical_pair(&state.u.x, &state.u.y);
        let (c1, c2) = grid.to_physical_pair(&state.c1, &state.c2);
        Self { u1, u2, c1, c2 }
    }
}

/// Drift terms integrated explicitly: everything except `(D+κ)Δc_i` and `(ν+κ/4)Δu`.
pub(crate) struct ExplicitTerms {
    pub c1: SpectralScalar,
    pub c2: SpectralScalar,
    pub u: SpectralVector,
}

pub(crate) fn explicit_terms(
    grid: &Grid,
    state: &State,
    phys: &PhysicalState,
    params: &SystemParams,
    basis: &NoiseBasis,
) -> Result<ExplicitTerms> {
    let d = params.diffusivity;
    let (px, py) = grid.to_physical_pair(&state.phi.gradient().x, &state.phi.gradient().y);
    let n = grid.len();
    let mut f1x = vec![0.0; n];
    let mut f1y = vec![0.0; n];
    let mut f2x = vec![0.0; n];
    let mut f2y = vec![0.0; n];
    let mut uu = vec![0.0; n];
    let mut uv = vec![0.0; n];
    let mut vv = vec![0.0; n];
    let mut ex = vec![0.0; n];
    let mut ey = vec![0.0; n];
    for j in 0..n {
        let (u1, u2, c1, c2) = (phys.u1[j], phys.u2[j], phys.c1[j], phys.c2[j]);
        // c₁ flux: c₁(D∇Φ - u); c₂ flux: c₂(-D∇Φ - u)
        f1x[j] = c1 * (d * px[j] - u1);
        f1y[j] = c1 * (d * py[j] - u2);
        f2x[j] = -c2 * (d * px[j] + u1);
        f2y[j] = -c2 * (d * py[j] + u2);
        uu[j] = u1 * u1;
        uv[j] = u1 * u2;
        vv[j] = u2 * u2;
        let rho = c1 - c2;
        ex[j] = rho * px[j];
        ey[j] = rho * py[j];
    }
    let (s1x, s1y) = grid.to_spectral_pair(&f1x, &f1y);
    let (s2x, s2y) = grid.to_spectral_pair(&f2x, &f2y);
    let (suu, suv) = grid.to_spectral_pair(&uu, &uv);
    let (svv, sex) = grid.to_spectral_pair(&vv, &ex);
    let (sey, _) = grid.to_spectral_pair(&ey, &vec![0.0; n]);

    let c1 = flux_divergence(s1x, s1y);
    let c2 = flux_divergence(s2x, s2y);

    // ∇·(u⊗u) + ρ∇Φ
    let mut force = SpectralVector::new(
        SpectralVector::new(suu, suv.clone()).divergence(),
        SpectralVector::new(suv, svv).divergence(),
    );
    force += &SpectralVector::new(sex, sey);
    let mut u = force.leray_project();
    u *= -1.0;
    u.dealias();
    if params.noise.is_active() {
        let mut residual = basis.apply_corrector_blocks(&state.u);
        residual.axpy(-0.25 * params.noise.intensity, &state.u.laplacian());
        u += &residual;
    }
    zero_mean_vector(&mut u);
    Ok(ExplicitTerms { c1, c2, u })
}

/// Full Itô drift at `state`.
pub fn full_drift(
    grid: &Grid,
    state: &State,
    params: &SystemParams,
    basis: &NoiseBasis,
) -> Result<DriftEval> {
    if params.noise.is_active() {
        crate::noise::NoiseBasis::velocity_corrector(basis, &state.u)?;
    }
    let phys = PhysicalState::of(grid, state);
    let ExplicitTerms { mut c1, mut c2, mut u } = explicit_terms(grid, state, &phys, params, basis)?;
    let dk = params.scalar_diffusivity();
    c1.axpy(dk, &state.c1.laplacian());
    c2.axpy(dk, &state.c2.laplacian());
    u.axpy(params.velocity_diffusivity(), &state.u.laplacian());
    Ok(DriftEval { c1, c2, u })
}

/// Noise contribution of one increment field `dV`.
///
/// The shell sum `Σ_k √(2κ) ζ_k σ_k ΔW^k` is linear in the increments, so it
/// acts through the assembled field: `dV·∇c_i` and `Π(dV·∇u)`.
pub fn apply_transport_noise(grid: &Grid, state: &State, dv: &SpectralVector) -> Result<NoiseAction> {
    let (vx, vy) = grid.vector_to_physical(dv)?;
    let phys = PhysicalState::of(grid, state);
    Ok(noise_action_physical(grid, &phys, &vx, &vy))
}

pub(crate) fn noise_action_physical(grid: &Grid, phys: &PhysicalState, vx: &[f64], vy: &[f64]) -> NoiseAction {
    let mul = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p * q).collect() };
    let (a_x, a_y) = grid.to_spectral_pair(&mul(vx, &phys.c1), &mul(vy, &phys.c1));
    let (b_x, b_y) = grid.to_spectral_pair(&mul(vx, &phys.c2), &mul(vy, &phys.c2));
    NoiseAction {
        c1: flux_divergence(a_x, a_y),
        c2: flux_divergence(b_x, b_y),
        u: vector_advection_physical(grid, vx, vy, &phys.u1, &phys.u2),
    }
}
