//! Fourier representation of fields on the torus `[0, 2π)²`.
//!
//! A scalar field is stored through its coefficients `f̂_k` in the basis
//! `e^{ik·x}`, so that `f(x) = Σ_k f̂_k e^{ik·x}` and
//! `f̂_k = (2π)⁻² ∫ f e^{-ik·x} dx`. The volume factor `(2π)²` therefore shows
//! up explicitly in every norm and inner product.
//!
//! Coefficients live in an `M × M` row-major array. Array index `i` along an
//! axis carries wavenumber `i` for `i < M/2` and `i - M` otherwise, so the
//! Nyquist index `M/2` holds wavenumber `-M/2`. Physical samples use the same
//! layout with `x = 2π j / M`.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{AddAssign, MulAssign, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{NpnsError, Result};

/// Area of the torus, `(2π)²`.
pub const TORUS_AREA: f64 = 4.0 * PI * PI;

/// Largest tolerated `|f̂_k - conj(f̂_{-k})|`, relative to the largest coefficient.
pub const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// Largest tolerated `|ρ̂_0|` for the Poisson solve.
pub const ZERO_MEAN_TOLERANCE: f64 = 1e-10;

#[inline]
pub(crate) fn wavenumber(m: usize, i: usize) -> i64 {
    if i < m / 2 {
        i as i64
    } else {
        i as i64 - m as i64
    }
}

#[inline]
pub(crate) fn index_of(m: usize, k1: i64, k2: i64) -> Option<usize> {
    let half = (m / 2) as i64;
    if k1.abs() > half || k2.abs() > half {
        return None;
    }
    let wrap = |k: i64| k.rem_euclid(m as i64) as usize;
    Some(wrap(k1) * m + wrap(k2))
}

#[inline]
fn conjugate_index(m: usize, idx: usize) -> usize {
    let (i1, i2) = (idx / m, idx % m);
    ((m - i1) % m) * m + (m - i2) % m
}

/// Derivative wavenumber along one axis; the Nyquist mode has no real derivative.
#[inline]
fn derivative_wavenumber(m: usize, i: usize) -> f64 {
    if i == m / 2 {
        0.0
    } else {
        wavenumber(m, i) as f64
    }
}

/// Collocation grid and cached FFT plans for one resolution.
///
/// Plans are shared behind `Arc` and are `Send + Sync`, so a `Grid` can be
/// cloned into every trajectory of an ensemble.
#[derive(Clone)]
pub struct Grid {
    m: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid").field("m", &self.m).finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m
    }
}

impl Grid {
    /// Grid with `m` modes per axis; `m` must be even and at least 8.
    pub fn new(m: usize) -> Result<Self> {
        if m < 8 || m % 2 != 0 {
            return Err(NpnsError::InvalidGrid(format!(
                "resolution must be even and >= 8, got {m}"
            )));
        }
        let mut planner = FftPlanner::new();
        Ok(Self {
            m,
            forward: planner.plan_fft_forward(m),
            inverse: planner.plan_fft_inverse(m),
        })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    /// Number of stored coefficients, `M²`.
    pub fn len(&self) -> usize {
        self.m * self.m
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn wavevector(&self, idx: usize) -> (i64, i64) {
        (wavenumber(self.m, idx / self.m), wavenumber(self.m, idx % self.m))
    }

    pub fn index_of(&self, k1: i64, k2: i64) -> Option<usize> {
        index_of(self.m, k1, k2)
    }

    /// Largest wavenumber kept by the 2/3 rule, `⌊M/3⌋`.
    pub fn dealias_radius(&self) -> i64 {
        (self.m / 3) as i64
    }

    /// Collocation point of physical index `j`.
    pub fn point(&self, j: usize) -> (f64, f64) {
        let h = 2.0 * PI / self.m as f64;
        ((j / self.m) as f64 * h, (j % self.m) as f64 * h)
    }

    pub fn zeros(&self) -> SpectralScalar {
        SpectralScalar::zeros(self.m)
    }

    /// Samples `f` on the collocation points and projects onto the grid.
    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> SpectralScalar {
        let values: Vec<f64> = (0..self.len())
            .map(|j| {
                let (x1, x2) = self.point(j);
                f(x1, x2)
            })
            .collect();
        self.to_spectral(&values)
    }

    fn transform_rows(&self, plan: &Arc<dyn Fft<f64>>, data: &mut [Complex64]) {
        let mut scratch = vec![Complex64::default(); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
    }

    fn transpose(&self, data: &mut [Complex64]) {
        let m = self.m;
        for i in 0..m {
            for j in (i + 1)..m {
                data.swap(i * m + j, j * m + i);
            }
        }
    }

    /// Unnormalised forward 2D DFT, `Σ_j f_j e^{-2πi k·j/M}`, in place.
    pub fn fft2(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        self.transform_rows(&self.forward, data);
        self.transpose(data);
        self.transform_rows(&self.forward, data);
        self.transpose(data);
    }

    /// Unnormalised inverse 2D DFT, `Σ_k f̂_k e^{2πi k·j/M}`, in place.
    pub fn ifft2(&self, data: &mut [Complex64]) {
        assert_eq!(data.len(), self.len(), "buffer does not match grid");
        self.transform_rows(&self.inverse, data);
        self.transpose(data);
        self.transform_rows(&self.inverse, data);
        self.transpose(data);
    }

    fn check_grid(&self, f: &SpectralScalar) -> Result<()> {
        if f.m != self.m {
            return Err(NpnsError::InvalidField(format!(
                "field has resolution {} but grid has {}",
                f.m, self.m
            )));
        }
        Ok(())
    }

    /// Real samples of `f` on the collocation grid.
    ///
    /// Fails if `f` is not the transform of a real field.
    pub fn to_physical(&self, f: &SpectralScalar) -> Result<Vec<f64>> {
        self.check_grid(f)?;
        let defect = f.hermitian_defect();
        let scale = f.max_abs().max(1.0);
        if defect > HERMITIAN_TOLERANCE * scale {
            return Err(NpnsError::InvalidField(format!(
                "coefficients are not Hermitian symmetric (defect {defect:e})"
            )));
        }
        let mut data = f.coeffs.clone();
        self.ifft2(&mut data);
        Ok(data.into_iter().map(|z| z.re).collect())
    }

    /// Fourier coefficients of real collocation samples.
    pub fn to_spectral(&self, values: &[f64]) -> SpectralScalar {
        assert_eq!(values.len(), self.len(), "sample count does not match grid");
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fft2(&mut data);
        let norm = 1.0 / self.len() as f64;
        for z in &mut data {
            *z *= norm;
        }
        SpectralScalar {
            m: self.m,
            coeffs: data,
        }
    }

    /// Two real fields through one complex transform (`a + i b`).
    ///
    /// Inputs are assumed Hermitian; the imaginary parts of `a` and `b` in
    /// physical space are discarded.
    pub(crate) fn to_physical_pair(
        &self,
        a: &SpectralScalar,
        b: &SpectralScalar,
    ) -> (Vec<f64>, Vec<f64>) {
        let i = Complex64::i();
        let mut data: Vec<Complex64> = a
            .coeffs
            .iter()
            .zip(&b.coeffs)
            .map(|(&x, &y)| x + i * y)
            .collect();
        self.ifft2(&mut data);
        data.into_iter().map(|z| (z.re, z.im)).unzip()
    }

    /// Coefficients of two real fields through one complex transform.
    pub(crate) fn to_spectral_pair(
        &self,
        a: &[f64],
        b: &[f64],
    ) -> (SpectralScalar, SpectralScalar) {
        let m = self.m;
        let mut data: Vec<Complex64> = a
            .iter()
            .zip(b)
            .map(|(&x, &y)| Complex64::new(x, y))
            .collect();
        self.fft2(&mut data);
        let norm = 0.5 / self.len() as f64;
        let mut fa = vec![Complex64::default(); self.len()];
        let mut fb = vec![Complex64::default(); self.len()];
        for idx in 0..self.len() {
            let z = data[idx];
            let zc = data[conjugate_index(m, idx)].conj();
            fa[idx] = (z + zc) * norm;
            // (z - zc) / (2i)
            let d = (z - zc) * norm;
            fb[idx] = Complex64::new(d.im, -d.re);
        }
        (
            SpectralScalar { m, coeffs: fa },
            SpectralScalar { m, coeffs: fb },
        )
    }

    /// Vector field samples.
    pub fn vector_to_physical(&self, v: &SpectralVector) -> Result<(Vec<f64>, Vec<f64>)> {
        Ok((self.to_physical(&v.x)?, self.to_physical(&v.y)?))
    }

    /// Dealiased pseudo-spectral product `fg`.
    pub fn product(&self, f: &SpectralScalar, g: &SpectralScalar) -> Result<SpectralScalar> {
        let pf = self.to_physical(f)?;
        let pg = self.to_physical(g)?;
        let prod: Vec<f64> = pf.iter().zip(&pg).map(|(a, b)| a * b).collect();
        let mut out = self.to_spectral(&prod);
        out.dealias();
        Ok(out)
    }

    /// `L^p` norm by collocation quadrature.
    pub fn lp_norm(&self, f: &SpectralScalar, p: LpExponent) -> Result<f64> {
        let values = self.to_physical(f)?;
        Ok(lp_norm_of_samples(&values, p))
    }
}

/// Exponents supported by [`Grid::lp_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpExponent {
    One,
    Two,
    Three,
    Infinity,
}

/// `L^p` norm of collocation samples on `[0, 2π)²`.
pub fn lp_norm_of_samples(values: &[f64], p: LpExponent) -> f64 {
    let cell = TORUS_AREA / values.len() as f64;
    match p {
        LpExponent::One => cell * values.iter().map(|v| v.abs()).sum::<f64>(),
        LpExponent::Two => (cell * values.iter().map(|v| v * v).sum::<f64>()).sqrt(),
        LpExponent::Three => (cell * values.iter().map(|v| v.abs().powi(3)).sum::<f64>()).cbrt(),
        LpExponent::Infinity => values.iter().fold(0.0, |acc: f64, v| acc.max(v.abs())),
    }
}

/// Truncated Fourier series of a real scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralScalar {
    m: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralScalar {
    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            coeffs: vec![Complex64::default(); m * m],
        }
    }

    /// Constant field equal to `value`.
    pub fn constant(m: usize, value: f64) -> Self {
        let mut f = Self::zeros(m);
        f.coeffs[0] = Complex64::new(value, 0.0);
        f
    }

    pub fn from_coefficients(m: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != m * m {
            return Err(NpnsError::InvalidField(format!(
                "expected {} coefficients, got {}",
                m * m,
                coeffs.len()
            )));
        }
        Ok(Self { m, coeffs })
    }

    pub fn size(&self) -> usize {
        self.m
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coefficients(self) -> Vec<Complex64> {
        self.coeffs
    }

    pub fn wavevector(&self, idx: usize) -> (i64, i64) {
        (wavenumber(self.m, idx / self.m), wavenumber(self.m, idx % self.m))
    }

    /// Coefficient of mode `k`, zero if `k` is outside the grid.
    pub fn mode(&self, k1: i64, k2: i64) -> Complex64 {
        index_of(self.m, k1, k2)
            .map(|i| self.coeffs[i])
            .unwrap_or_default()
    }

    /// Sets `f̂_k = value` and `f̂_{-k} = conj(value)`.
    pub fn set_mode(&mut self, k1: i64, k2: i64, value: Complex64) {
        let idx = index_of(self.m, k1, k2).expect("mode outside grid");
        let cidx = conjugate_index(self.m, idx);
        if cidx == idx {
            self.coeffs[idx] = Complex64::new(value.re, 0.0);
        } else {
            self.coeffs[idx] = value;
            self.coeffs[cidx] = value.conj();
        }
    }

    /// Spatial mean, the real part of `f̂_0`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |acc: f64, z| acc.max(z.norm()))
    }

    /// `max_k |f̂_k - conj(f̂_{-k})|`.
    pub fn hermitian_defect(&self) -> f64 {
        (0..self.coeffs.len())
            .map(|idx| (self.coeffs[idx] - self.coeffs[conjugate_index(self.m, idx)].conj()).norm())
            .fold(0.0, f64::max)
    }

    /// Multiplies every coefficient by `symbol(k1, k2)`.
    pub fn apply_symbol<F: Fn(i64, i64) -> Complex64>(&self, symbol: F) -> Self {
        let m = self.m;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &z)| z * symbol(wavenumber(m, idx / m), wavenumber(m, idx % m)))
            .collect();
        Self { m, coeffs }
    }

    /// Multiplies every coefficient by the real multiplier `symbol(|k|²)`.
    pub fn apply_radial<F: Fn(f64) -> f64>(&self, symbol: F) -> Self {
        self.apply_symbol(|k1, k2| Complex64::new(symbol((k1 * k1 + k2 * k2) as f64), 0.0))
    }

    fn partial(&self, axis: usize) -> Self {
        let m = self.m;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, &z)| {
                let i = if axis == 0 { idx / m } else { idx % m };
                z * Complex64::new(0.0, derivative_wavenumber(m, i))
            })
            .collect();
        Self { m, coeffs }
    }

    /// `∇f`, coefficients `(ik₁ f̂_k, ik₂ f̂_k)`.
    pub fn gradient(&self) -> SpectralVector {
        SpectralVector {
            x: self.partial(0),
            y: self.partial(1),
        }
    }

    /// `∇^⊥ψ = (-∂₂ψ, ∂₁ψ)`, divergence-free for every `ψ`.
    pub fn perp_gradient(&self) -> SpectralVector {
        let mut x = self.partial(1);
        x *= -1.0;
        SpectralVector {
            x,
            y: self.partial(0),
        }
    }

    /// `Δf`, coefficients `-|k|² f̂_k`.
    pub fn laplacian(&self) -> Self {
        self.apply_radial(|k2| -k2)
    }

    /// Solves `-ΔΦ = ρ` with `Φ̂_0 = 0`.
    pub fn poisson_solve(&self) -> Result<Self> {
        let mean = self.coeffs[0].norm();
        if mean > ZERO_MEAN_TOLERANCE {
            return Err(NpnsError::NonzeroMeanCharge(mean));
        }
        Ok(self.apply_radial(|k2| if k2 == 0.0 { 0.0 } else { 1.0 / k2 }))
    }

    /// Zeroes every mode with `max(|k₁|, |k₂|) > M/3`.
    pub fn dealias(&mut self) {
        let m = self.m;
        let cutoff = (m / 3) as i64;
        for (idx, z) in self.coeffs.iter_mut().enumerate() {
            let k1 = wavenumber(m, idx / m).abs();
            let k2 = wavenumber(m, idx % m).abs();
            if k1 > cutoff || k2 > cutoff {
                *z = Complex64::default();
            }
        }
    }

    pub fn dealiased(mut self) -> Self {
        self.dealias();
        self
    }

    /// Largest coefficient magnitude outside the 2/3-rule band.
    pub fn aliased_content(&self) -> f64 {
        let cutoff = (self.m / 3) as i64;
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(idx, _)| {
                let (k1, k2) = self.wavevector(*idx);
                k1.abs() > cutoff || k2.abs() > cutoff
            })
            .fold(0.0, |acc: f64, (_, z)| acc.max(z.norm()))
    }

    /// `(Σ_k (1+|k|²)^s |f̂_k|² (2π)²)^{1/2}`.
    pub fn sobolev_norm(&self, s: f64) -> f64 {
        self.sobolev_norm_sq(s).sqrt()
    }

    pub fn sobolev_norm_sq(&self, s: f64) -> f64 {
        let m = self.m;
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let k1 = wavenumber(m, idx / m) as f64;
                let k2 = wavenumber(m, idx % m) as f64;
                (1.0 + k1 * k1 + k2 * k2).powf(s) * z.norm_sqr()
            })
            .sum();
        TORUS_AREA * sum
    }

    /// Homogeneous seminorm `Σ_{k≠0} |k|^{2s} |f̂_k|² (2π)²`; the mean is ignored.
    pub fn homogeneous_sobolev_norm_sq(&self, s: f64) -> f64 {
        let m = self.m;
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(idx, z)| {
                let k1 = wavenumber(m, idx / m) as f64;
                let k2 = wavenumber(m, idx % m) as f64;
                (k1 * k1 + k2 * k2).powf(s) * z.norm_sqr()
            })
            .sum();
        TORUS_AREA * sum
    }

    /// `‖f‖²_{L²}` by Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        TORUS_AREA * self.coeffs.iter().map(|z| z.norm_sqr()).sum::<f64>()
    }

    /// `‖f - f̄‖²_{L²}`.
    pub fn deviation_norm_sq(&self) -> f64 {
        self.l2_norm_sq() - TORUS_AREA * self.coeffs[0].norm_sqr()
    }

    /// `‖∇f‖²_{L²}`.
    pub fn gradient_norm_sq(&self) -> f64 {
        let m = self.m;
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(idx, z)| {
                let k1 = wavenumber(m, idx / m) as f64;
                let k2 = wavenumber(m, idx % m) as f64;
                (k1 * k1 + k2 * k2) * z.norm_sqr()
            })
            .sum();
        TORUS_AREA * sum
    }

    /// Real `L²` inner product `⟨f, g⟩`.
    pub fn inner(&self, other: &Self) -> f64 {
        TORUS_AREA
            * self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| (a * b.conj()).re)
                .sum::<f64>()
    }

    /// `self += a · other`.
    pub fn axpy(&mut self, a: f64, other: &Self) {
        for (z, w) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *z += w * a;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl AddAssign<&SpectralScalar> for SpectralScalar {
    fn add_assign(&mut self, rhs: &SpectralScalar) {
        for (z, w) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *z += w;
        }
    }
}

impl SubAssign<&SpectralScalar> for SpectralScalar {
    fn sub_assign(&mut self, rhs: &SpectralScalar) {
        for (z, w) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *z -= w;
        }
    }
}

impl MulAssign<f64> for SpectralScalar {
    fn mul_assign(&mut self, rhs: f64) {
        for z in &mut self.coeffs {
            *z *= rhs;
        }
    }
}

/// Truncated Fourier series of a real planar vector field.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectralVector {
    pub x: SpectralScalar,
    pub y: SpectralScalar,
}

impl SpectralVector {
    pub fn zeros(m: usize) -> Self {
        Self {
            x: SpectralScalar::zeros(m),
            y: SpectralScalar::zeros(m),
        }
    }

    pub fn new(x: SpectralScalar, y: SpectralScalar) -> Self {
        assert_eq!(x.m, y.m, "components must share a resolution");
        Self { x, y }
    }

    pub fn size(&self) -> usize {
        self.x.m
    }

    /// `∇·v`, coefficients `ik·v̂_k`.
    pub fn divergence(&self) -> SpectralScalar {
        let mut d = self.x.partial(0);
        d += &self.y.partial(1);
        d
    }

    /// `max_k |k·v̂_k|`, zero for a divergence-free field.
    pub fn divergence_defect(&self) -> f64 {
        self.divergence().max_abs()
    }

    /// Leray-Hodge projection `v̂_k - k (k·v̂_k)/|k|²`; the mean passes through.
    pub fn leray_project(&self) -> Self {
        let m = self.x.m;
        let mut out = self.clone();
        for idx in 1..m * m {
            let k1 = wavenumber(m, idx / m) as f64;
            let k2 = wavenumber(m, idx % m) as f64;
            let k_sq = k1 * k1 + k2 * k2;
            let (a, b) = (self.x.coeffs[idx], self.y.coeffs[idx]);
            let dot = (a * k1 + b * k2) / k_sq;
            out.x.coeffs[idx] = a - dot * k1;
            out.y.coeffs[idx] = b - dot * k2;
        }
        out
    }

    pub fn dealias(&mut self) {
        self.x.dealias();
        self.y.dealias();
    }

    pub fn sobolev_norm(&self, s: f64) -> f64 {
        (self.x.sobolev_norm_sq(s) + self.y.sobolev_norm_sq(s)).sqrt()
    }

    pub fn l2_norm_sq(&self) -> f64 {
        self.x.l2_norm_sq() + self.y.l2_norm_sq()
    }

    /// `‖∇v‖²_{L²}` summed over components.
    pub fn gradient_norm_sq(&self) -> f64 {
        self.x.gradient_norm_sq() + self.y.gradient_norm_sq()
    }

    pub fn inner(&self, other: &Self) -> f64 {
        self.x.inner(&other.x) + self.y.inner(&other.y)
    }

    pub fn laplacian(&self) -> Self {
        Self {
            x: self.x.laplacian(),
            y: self.y.laplacian(),
        }
    }

    pub fn apply_radial<F: Fn(f64) -> f64 + Copy>(&self, symbol: F) -> Self {
        Self {
            x: self.x.apply_radial(symbol),
            y: self.y.apply_radial(symbol),
        }
    }

    pub fn axpy(&mut self, a: f64, other: &Self) {
        self.x.axpy(a, &other.x);
        self.y.axpy(a, &other.y);
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl AddAssign<&SpectralVector> for SpectralVector {
    fn add_assign(&mut self, rhs: &SpectralVector) {
        self.x += &rhs.x;
        self.y += &rhs.y;
    }
}

impl SubAssign<&SpectralVector> for SpectralVector {
    fn sub_assign(&mut self, rhs: &SpectralVector) {
        self.x -= &rhs.x;
        self.y -= &rhs.y;
    }
}

impl MulAssign<f64> for SpectralVector {
    fn mul_assign(&mut self, rhs: f64) {
        self.x *= rhs;
        self.y *= rhs;
    }
}
