use npns_core::integrator::trajectory_rng;
use npns_core::noise::in_positive_half;
use npns_core::{Grid, SpectralScalar, SpectralVector, State};
use num_complex::Complex64;
use rand::Rng;

use crate::checkpoint;
use crate::config::{ConcentrationIc, RunConfig, VelocityIc};
use crate::error::{HarnessError, Result};

/// Random real field on `|k| ≤ kmax` without mean, drawn from substream
/// `stream` of `seed`.
fn random_band(grid: &Grid, kmax: i64, seed: u64, stream: u64) -> SpectralScalar {
    let mut rng = trajectory_rng(seed, stream);
    let mut f = SpectralScalar::zeros(grid.size());
    for k1 in 0..=kmax {
        for k2 in -kmax..=kmax {
            if in_positive_half((k1, k2)) && k1 * k1 + k2 * k2 <= kmax * kmax {
                let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                f.set_mode(k1, k2, z);
            }
        }
    }
    f
}

fn sup(grid: &Grid, f: &SpectralScalar) -> Result<f64> {
    Ok(grid
        .to_physical(f)?
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs())))
}

fn velocity(grid: &Grid, ic: VelocityIc, seed: u64) -> Result<SpectralVector> {
    let m = grid.size();
    Ok(match ic {
        VelocityIc::Zero => SpectralVector::zeros(m),
        VelocityIc::TaylorGreen { amplitude } => {
            let mut u = SpectralVector::zeros(m);
            let q = Complex64::new(0.0, -amplitude / 4.0);
            u.x.set_mode(1, 1, q);
            u.x.set_mode(1, -1, q);
            u.y.set_mode(1, 1, -q);
            u.y.set_mode(1, -1, q);
            u
        }
        VelocityIc::RandomBand { amplitude, kmax } => {
            let raw = SpectralVector::new(random_band(grid, kmax, seed, 2), random_band(grid, kmax, seed, 3));
            let mut u = raw.leray_project();
            let (ux, uy) = grid.vector_to_physical(&u)?;
            let peak = ux.iter().zip(&uy).fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)));
            if peak > 0.0 {
                u *= amplitude / peak;
            }
            u
        }
    })
}

/// Initial state described by `cfg`, with the start time (non-zero only when
/// resuming from a checkpoint). Concentrations must be non-negative on the
/// collocation grid.
pub fn initial_state(cfg: &RunConfig, grid: &Grid) -> Result<(State, f64)> {
    let m = grid.size();
    let seed = cfg.ic_seed;
    let (state, t0) = match &cfg.concentration {
        ConcentrationIc::Checkpoint(path) => {
            let ck = checkpoint::load(path)?;
            if ck.state.size() != m {
                return Err(HarnessError::Config(format!(
                    "checkpoint resolution {} differs from resolution = {m}",
                    ck.state.size()
                )));
            }
            (ck.state, ck.t)
        }
        ConcentrationIc::Cosine { mean, epsilon, mode } => {
            let mut c1 = SpectralScalar::constant(m, *mean);
            c1.set_mode(mode.0, mode.1, Complex64::new(epsilon / 2.0, 0.0));
            let mut c2 = SpectralScalar::constant(m, *mean);
            c2.set_mode(mode.0, mode.1, Complex64::new(-epsilon / 2.0, 0.0));
            (State::new(velocity(grid, cfg.velocity, seed)?, c1, c2)?, 0.0)
        }
        ConcentrationIc::RandomBand {
            mean,
            epsilon,
            kmax,
            seed,
        } => {
            let mut species = Vec::with_capacity(2);
            for stream in 0..2 {
                let mut g = random_band(grid, *kmax, *seed, stream);
                let peak = sup(grid, &g)?;
                g *= epsilon / peak;
                g.coefficients_mut()[0] = Complex64::new(*mean, 0.0);
                species.push(g);
            }
            let c2 = species.pop().expect("two species");
            let c1 = species.pop().expect("two species");
            (State::new(velocity(grid, cfg.velocity, *seed)?, c1, c2)?, 0.0)
        }
    };
    for (name, c) in [("c1", state.c1()), ("c2", state.c2())] {
        let min = grid.to_physical(c)?.into_iter().fold(f64::INFINITY, f64::min);
        if min < 0.0 {
            return Err(HarnessError::Config(format!(
                "initial {name} is negative (min {min:e}) on the collocation grid"
            )));
        }
    }
    Ok((state, t0))
}
