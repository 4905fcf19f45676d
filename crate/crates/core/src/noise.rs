//! Fourier-shell transport noise and its Itô correctors.
//!
//! The noise acts through the divergence-free fields `σ_k = a_k e^{ik·x}` for
//! wavevectors `k` in the shell `N ≤ |k| ≤ 2N`, weighted by
//! `√(2κ) ζ_k` with `ζ_k = Λ_N⁻¹ |k|^{-γ}` and `Σ ζ_k² = 1`. The directions are
//! `a_k = ± k^⊥/|k|` with `k^⊥ = (-k₂, k₁)` and the sign `+` on the half
//! lattice `{k₁ > 0} ∪ {k₁ = 0, k₂ > 0}`. With that sign choice `a_{-k} = a_k`,
//! so `σ_{-k} = conj(σ_k)` and every increment field is real.
//!
//! Complex increments satisfy `ΔW^{-k} = conj(ΔW^k)` with independent real and
//! imaginary parts of variance `dt`, which matches `[W^k, W^{-k}]_t = 2t`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{NpnsError, Result};
use crate::spectral::{wavenumber, Grid, SpectralScalar, SpectralVector};

/// Relative divergence tolerated on inputs of the velocity corrector.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-8;

/// Intensity and shape of the shell noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    /// `κ ≥ 0`; zero switches the noise off.
    pub intensity: f64,
    /// Shell index `N ≥ 1`.
    pub shell: u32,
    /// Profile exponent `γ > 0` of `ζ_k ∝ |k|^{-γ}`.
    pub profile_exponent: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::deterministic()
    }
}

impl NoiseSpec {
    pub fn new(intensity: f64, shell: u32, profile_exponent: f64) -> Result<Self> {
        let spec = Self {
            intensity,
            shell,
            profile_exponent,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// `κ = 0`, the deterministic system.
    pub fn deterministic() -> Self {
        Self {
            intensity: 0.0,
            shell: 1,
            profile_exponent: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(NpnsError::Config(format!(
                "noise intensity must be finite and >= 0, got {}",
                self.intensity
            )));
        }
        if self.shell < 1 {
            return Err(NpnsError::Config("noise shell index must be >= 1".into()));
        }
        if !(self.profile_exponent > 0.0 && self.profile_exponent.is_finite()) {
            return Err(NpnsError::Config(format!(
                "noise profile exponent must be > 0, got {}",
                self.profile_exponent
            )));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.intensity > 0.0
    }
}

/// One wavevector of the noise shell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShellMode {
    pub k: (i64, i64),
    /// `ζ_k`.
    pub weight: f64,
    /// Unit vector `a_k`, orthogonal to `k`.
    pub direction: [f64; 2],
    /// Whether `k` lies in the positive half lattice.
    pub positive: bool,
}

/// Positive half lattice `{k₁ > 0} ∪ {k₁ = 0, k₂ > 0}`.
pub fn in_positive_half(k: (i64, i64)) -> bool {
    k.0 > 0 || (k.0 == 0 && k.1 > 0)
}

/// Shell modes, weights and the precomputed velocity-corrector blocks.
#[derive(Debug, Clone)]
pub struct NoiseBasis {
    spec: NoiseSpec,
    m: usize,
    modes: Vec<ShellMode>,
    normalizer: f64,
    /// Indices into `modes` of the positive half, in sampling order.
    positive: Vec<usize>,
    /// Per grid mode `j`, the 2×2 block `-2κ Σ_k ζ_k² (a_k·j)² P_j P_{j-k}`.
    corrector_blocks: Vec<[f64; 4]>,
}

impl NoiseBasis {
    pub fn new(spec: NoiseSpec, grid: &Grid) -> Result<Self> {
        spec.validate()?;
        let n = spec.shell as i64;
        if 2 * n > grid.dealias_radius() {
            return Err(NpnsError::Config(format!(
                "noise shell 2N = {} exceeds the dealias radius {} of an M = {} grid",
                2 * n,
                grid.dealias_radius(),
                grid.size()
            )));
        }
        let mut modes = Vec::new();
        for k1 in -2 * n..=2 * n {
            for k2 in -2 * n..=2 * n {
                let r2 = k1 * k1 + k2 * k2;
                if r2 < n * n || r2 > 4 * n * n {
                    continue;
                }
                let r = (r2 as f64).sqrt();
                let positive = in_positive_half((k1, k2));
                let sign = if positive { 1.0 } else { -1.0 };
                modes.push(ShellMode {
                    k: (k1, k2),
                    weight: r.powf(-spec.profile_exponent),
                    direction: [-sign * k2 as f64 / r, sign * k1 as f64 / r],
                    positive,
                });
            }
        }
        if modes.is_empty() {
            return Err(NpnsError::Config("noise shell is empty".into()));
        }
        let normalizer = modes.iter().map(|s| s.weight * s.weight).sum::<f64>().sqrt();
        for s in &mut modes {
            s.weight /= normalizer;
        }
        let positive = (0..modes.len()).filter(|&i| modes[i].positive).collect();

        let mut basis = Self {
            spec,
            m: grid.size(),
            modes,
            normalizer,
            positive,
            corrector_blocks: Vec::new(),
        };
        if spec.is_active() {
            basis.corrector_blocks = basis.build_corrector_blocks();
        }
        Ok(basis)
    }

    pub fn spec(&self) -> &NoiseSpec {
        &self.spec
    }

    pub fn modes(&self) -> &[ShellMode] {
        &self.modes
    }

    /// `Λ_N`, with `Λ_N² = Σ_{k∈S} |k|^{-2γ}`.
    pub fn normalizer(&self) -> f64 {
        self.normalizer
    }

    pub fn positive_modes(&self) -> impl Iterator<Item = &ShellMode> {
        self.positive.iter().map(move |&i| &self.modes[i])
    }

    pub fn resolution(&self) -> usize {
        self.m
    }

    fn build_corrector_blocks(&self) -> Vec<[f64; 4]> {
        let m = self.m;
        let two_kappa = 2.0 * self.spec.intensity;
        (0..m * m)
            .map(|idx| {
                let j = [wavenumber(m, idx / m) as f64, wavenumber(m, idx % m) as f64];
                if j == [0.0, 0.0] {
                    return [0.0; 4];
                }
                let outer = projector(j);
                let mut acc = [0.0; 4];
                for s in &self.modes {
                    let a = s.direction;
                    let aj = a[0] * j[0] + a[1] * j[1];
                    let w = -two_kappa * s.weight * s.weight * aj * aj;
                    let inner = projector([j[0] - s.k.0 as f64, j[1] - s.k.1 as f64]);
                    for (slot, v) in acc.iter_mut().zip(mat_mul(outer, inner)) {
                        *slot += w * v;
                    }
                }
                acc
            })
            .collect()
    }

    /// Draws one Wiener increment field over a step of length `dt`.
    pub fn sample_increment<R: Rng + ?Sized>(&self, dt: f64, rng: &mut R) -> WienerIncrement {
        assert!(dt > 0.0, "time step must be positive");
        let sd = dt.sqrt();
        let increments: Vec<Complex64> = self
            .positive
            .iter()
            .map(|_| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex64::new(sd * re, sd * im)
            })
            .collect();
        let field = self.assemble(&increments);
        WienerIncrement { field, increments }
    }

    /// `√(2κ) Σ_k ζ_k a_k e^{ik·x} ΔW^k` from the positive-half increments.
    pub fn assemble(&self, increments: &[Complex64]) -> SpectralVector {
        assert_eq!(increments.len(), self.positive.len(), "one increment per positive mode");
        let mut field = SpectralVector::zeros(self.m);
        if !self.spec.is_active() {
            return field;
        }
        let amp = (2.0 * self.spec.intensity).sqrt();
        for (&i, &dw) in self.positive.iter().zip(increments) {
            let s = &self.modes[i];
            let c = dw * (amp * s.weight);
            field.x.set_mode(s.k.0, s.k.1, c * s.direction[0]);
            field.y.set_mode(s.k.0, s.k.1, c * s.direction[1]);
        }
        field
    }

    /// Closed form of `E‖dV‖²_{L²} / dt`, namely `(2π)² · 4κ Σ ζ_k²`.
    pub fn expected_increment_energy_rate(&self) -> f64 {
        let sum: f64 = self.modes.iter().map(|s| s.weight * s.weight).sum();
        crate::spectral::TORUS_AREA * 4.0 * self.spec.intensity * sum
    }

    /// Velocity corrector `S_ζ(u) = 2κ Σ_k ζ_k² Π[σ_k·∇Π(σ_{-k}·∇u)]`.
    ///
    /// Uses the per-mode 2×2 blocks; see [`velocity_corrector_literal`] for
    /// the shell sum evaluated term by term.
    pub fn velocity_corrector(&self, u: &SpectralVector) -> Result<SpectralVector> {
        check_divergence_free(u)?;
        Ok(self.apply_corrector_blocks(u))
    }

    pub(crate) fn apply_corrector_blocks(&self, u: &SpectralVector) -> SpectralVector {
        let mut out = SpectralVector::zeros(self.m);
        if !self.spec.is_active() {
            return out;
        }
        let (ux, uy) = (u.x.coefficients(), u.y.coefficients());
        let ox = out.x.coefficients_mut();
        for (idx, b) in self.corrector_blocks.iter().enumerate() {
            ox[idx] = ux[idx] * b[0] + uy[idx] * b[1];
        }
        let oy = out.y.coefficients_mut();
        for (idx, b) in self.corrector_blocks.iter().enumerate() {
            oy[idx] = ux[idx] * b[2] + uy[idx] * b[3];
        }
        out
    }

    /// `S_ζ(u) - (κ/4)Δu`, the part of the velocity corrector not absorbed by the semigroup.
    pub fn corrector_residual(&self, u: &SpectralVector) -> Result<SpectralVector> {
        let mut r = self.velocity_corrector(u)?;
        r.axpy(-0.25 * self.spec.intensity, &u.laplacian());
        Ok(r)
    }

    /// Compares `S_ζ(u) - (κ/4)Δu` in `H^{s-2-α}` with `κ‖u‖_{H^s} / N^α`.
    pub fn corrector_bound_report(
        &self,
        u: &SpectralVector,
        s: f64,
        alpha: f64,
    ) -> Result<CorrectorReport> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(NpnsError::Config(format!("alpha must lie in [0, 1], got {alpha}")));
        }
        let error_norm = self.corrector_residual(u)?.sobolev_norm(s - 2.0 - alpha);
        let reference =
            self.spec.intensity * u.sobolev_norm(s) / (self.spec.shell as f64).powf(alpha);
        let ratio = if reference == 0.0 { 0.0 } else { error_norm / reference };
        Ok(CorrectorReport {
            shell: self.spec.shell,
            error_norm,
            reference,
            ratio,
        })
    }
}

/// Outcome of [`NoiseBasis::corrector_bound_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorReport {
    pub shell: u32,
    /// `‖S_ζ(u) - (κ/4)Δu‖_{H^{s-2-α}}`.
    pub error_norm: f64,
    /// `κ ‖u‖_{H^s} / N^α`.
    pub reference: f64,
    /// `error_norm / reference`, zero when both vanish.
    pub ratio: f64,
}

/// A real, divergence-free, shell-supported noise increment.
#[derive(Debug, Clone)]
pub struct WienerIncrement {
    pub field: SpectralVector,
    /// `ΔW^k` for the positive-half modes, in [`NoiseBasis::positive_modes`] order.
    pub increments: Vec<Complex64>,
}

/// Itô correction of the scalar equations, `κΔc`.
pub fn concentration_corrector(c: &SpectralScalar, spec: &NoiseSpec) -> SpectralScalar {
    let mut out = c.laplacian();
    out *= spec.intensity;
    out
}

fn check_divergence_free(u: &SpectralVector) -> Result<()> {
    let defect = u.divergence_defect();
    if defect > DIVERGENCE_TOLERANCE * u.max_abs().max(1.0) {
        return Err(NpnsError::InvalidField(format!(
            "velocity is not divergence-free (defect {defect:e})"
        )));
    }
    Ok(())
}

fn projector(k: [f64; 2]) -> [f64; 4] {
    let k_sq = k[0] * k[0] + k[1] * k[1];
    if k_sq == 0.0 {
        return [1.0, 0.0, 0.0, 1.0];
    }
    [
        1.0 - k[0] * k[0] / k_sq,
        -k[0] * k[1] / k_sq,
        -k[1] * k[0] / k_sq,
        1.0 - k[1] * k[1] / k_sq,
    ]
}

fn mat_mul(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] + a[1] * b[2],
        a[0] * b[1] + a[1] * b[3],
        a[2] * b[0] + a[3] * b[2],
        a[2] * b[1] + a[3] * b[3],
    ]
}

/// Complex field on a padded grid, used by the term-by-term corrector.
struct PaddedField {
    grid: Grid,
    x: Vec<Complex64>,
    y: Vec<Complex64>,
}

impl PaddedField {
    fn embed(grid: &Grid, v: &SpectralVector) -> Self {
        let m = v.size();
        let mut x = vec![Complex64::default(); grid.len()];
        let mut y = vec![Complex64::default(); grid.len()];
        for idx in 0..m * m {
            let (k1, k2) = (wavenumber(m, idx / m), wavenumber(m, idx % m));
            let p = grid.index_of(k1, k2).expect("padded grid holds every mode");
            x[p] = v.x.coefficients()[idx];
            y[p] = v.y.coefficients()[idx];
        }
        Self {
            grid: grid.clone(),
            x,
            y,
        }
    }

    /// `e^{i sign k·x} (a·∇) w`, evaluated with a physical-space product.
    fn directional_shift(&self, a: [f64; 2], k: (i64, i64), sign: f64) -> Self {
        let g = &self.grid;
        let n = g.len() as f64;
        let transform = |coeffs: &[Complex64]| {
            let mut data: Vec<Complex64> = coeffs
                .iter()
                .enumerate()
                .map(|(idx, &z)| {
                    let (j1, j2) = g.wavevector(idx);
                    z * Complex64::new(0.0, a[0] * j1 as f64 + a[1] * j2 as f64)
                })
                .collect();
            g.ifft2(&mut data);
            for (j, z) in data.iter_mut().enumerate() {
                let (x1, x2) = g.point(j);
                let phase = sign * (k.0 as f64 * x1 + k.1 as f64 * x2);
                *z *= Complex64::from_polar(1.0 / n, phase);
            }
            g.fft2(&mut data);
            data
        };
        Self {
            grid: g.clone(),
            x: transform(&self.x),
            y: transform(&self.y),
        }
    }

    fn leray_project(&mut self) {
        for idx in 1..self.grid.len() {
            let (k1, k2) = self.grid.wavevector(idx);
            let (k1, k2) = (k1 as f64, k2 as f64);
            let dot = (self.x[idx] * k1 + self.y[idx] * k2) / (k1 * k1 + k2 * k2);
            self.x[idx] -= dot * k1;
            self.y[idx] -= dot * k2;
        }
    }
}

/// `S_ζ(u)` as the literal shell sum of `Π[σ_k·∇Π(σ_{-k}·∇u)]`.
///
/// Each term is formed with physical-space products on a grid of twice the
/// resolution so the shifted modes do not wrap. Cost grows with the shell
/// size; intended for small `N` and for cross-checking the block form.
pub fn velocity_corrector_literal(
    basis: &NoiseBasis,
    u: &SpectralVector,
) -> Result<SpectralVector> {
    check_divergence_free(u)?;
    let m = u.size();
    if m != basis.m {
        return Err(NpnsError::InvalidField(format!(
            "velocity has resolution {m} but the noise basis was built for {}",
            basis.m
        )));
    }
    let mut out = SpectralVector::zeros(m);
    if !basis.spec.is_active() {
        return Ok(out);
    }
    let padded = Grid::new(2 * m)?;
    let base = PaddedField::embed(&padded, u);
    let mut acc_x = vec![Complex64::default(); padded.len()];
    let mut acc_y = vec![Complex64::default(); padded.len()];
    for s in &basis.modes {
        // σ_{-k} = a_k e^{-ik·x} because a_{-k} = a_k
        let mut inner = base.directional_shift(s.direction, s.k, -1.0);
        inner.leray_project();
        let mut outer = inner.directional_shift(s.direction, s.k, 1.0);
        outer.leray_project();
        let w = 2.0 * basis.spec.intensity * s.weight * s.weight;
        for idx in 0..padded.len() {
            acc_x[idx] += outer.x[idx] * w;
            acc_y[idx] += outer.y[idx] * w;
        }
    }
    for idx in 0..m * m {
        let (k1, k2) = (wavenumber(m, idx / m), wavenumber(m, idx % m));
        let p = padded.index_of(k1, k2).expect("padded grid holds every mode");
        out.x.coefficients_mut()[idx] = acc_x[p];
        out.y.coefficients_mut()[idx] = acc_y[p];
    }
    Ok(out)
}
