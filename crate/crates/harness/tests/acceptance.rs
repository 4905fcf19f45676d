//! Acceptance criteria as a standalone target: one `PASS`/`FAIL` line per
//! criterion, non-zero exit status when any fails.

use std::process::ExitCode;
use std::time::Instant;

use npns_core::diagnostics::{
    deterministic_rate, fit_decay_rate, pathwise_decay_check, smallness_check, sobolev_embedding_constant,
    EnergyRecord, FitWindow,
};
use npns_core::dynamics::{apply_transport_noise, NoiseAction};
use npns_core::integrator::{integrate_passive_scalar, trajectory_rng, StepperConfig};
use npns_core::noise::velocity_corrector_literal;
use npns_core::{Grid, NoiseBasis, NoiseSpec, SpectralScalar, SpectralVector, State};
use npns_harness::run::{corrector_check, run_ensemble, thread_pool, trajectory};
use npns_harness::RunConfig;
use num_complex::Complex64;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn config(text: &str) -> RunConfig {
    RunConfig::parse(text).unwrap_or_else(|e| panic!("acceptance config rejected: {e}\n{text}"))
}

fn run(cfg: &RunConfig, index: u64) -> (Vec<EnergyRecord>, State) {
    match trajectory(cfg, index) {
        Ok((records, state, _)) => (records, state),
        Err((e, _)) => panic!("trajectory {index} failed: {e}"),
    }
}

fn ac1_mean_conservation() -> Outcome {
    let mut worst = 0.0f64;
    for kappa in [0.0, 4.0] {
        let cfg = config(&format!(
            "resolution = 64\nkappa = {kappa}\nshell = 4\ndt = 1e-3\nt_end = 10\nrecord_stride = 100\n\
             ic = random-band\nmean = 1\nepsilon = 0.5\nkmax = 4\n\
             velocity = random-band\nvelocity_amplitude = 0.2\nvelocity_kmax = 4\nseed = 1"
        ));
        let (records, _) = run(&cfg, 0);
        let (m1, m2) = (records[0].c1_mean, records[0].c2_mean);
        for r in &records {
            worst = worst.max((r.c1_mean - m1).abs()).max((r.c2_mean - m2).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max |c̄(t) - c̄(0)| = {worst:.3e} (tol 1e-12)"))
}

fn ac2_deterministic_decay() -> Outcome {
    let cfg = config(
        "resolution = 64\nviscosity = 1\ndiffusivity = 0.5\nkappa = 0\ndt = 1e-3\nt_end = 5\nrecord_stride = 10\n\
         mean = 1\nepsilon = 0.1\nmode = 1,0\nvelocity = taylor-green\nvelocity_amplitude = 0.1",
    );
    let (records, _) = run(&cfg, 0);
    let pass = pathwise_decay_check(&records, cfg.diffusivity, cfg.dt);
    let worst = npns_core::diagnostics::worst_decay_ratio(&records, cfg.diffusivity);
    outcome(pass, format!("{} records, worst ratio to e^(-2Dt) bound {worst:.6}", records.len()))
}

fn ac3_debye_rate() -> Outcome {
    let cfg = config(
        "resolution = 64\ndiffusivity = 0.5\nkappa = 0\ndt = 1e-3\nt_end = 4\nrecord_stride = 20\n\
         mean = 1\nepsilon = 1e-4\nmode = 1,0",
    );
    let (records, _) = run(&cfg, 0);
    let series: Vec<_> = records.iter().map(|r| (r.t, r.charge_l2)).collect();
    let fit = fit_decay_rate(&series, FitWindow::TailHalf).expect("charge decays");
    let expected = cfg.diffusivity * (1.0 + records[0].c1_mean + records[0].c2_mean);
    let rel = (fit.rate - expected).abs() / expected;
    outcome(rel <= 0.02, format!("fitted {:.6}, expected {expected:.6}, rel err {rel:.2e} (tol 2e-2)", fit.rate))
}

fn ac4_energy_inequality(pool: &rayon::ThreadPool) -> Outcome {
    let cfg = config(
        "resolution = 64\nviscosity = 1\ndiffusivity = 0.5\nkappa = 4\nshell = 4\ndt = 1e-3\nt_end = 2\n\
         record_stride = 50\nensemble = 16\nseed = 4\nmean = 1\nepsilon = 0.1\nmode = 1,0\n\
         velocity = taylor-green\nvelocity_amplitude = 0.1",
    );
    let params = cfg.params().unwrap();
    let ens = run_ensemble(&cfg, pool).expect("ensemble runs");
    let small = smallness_check(&ens.paths[0][0], &params, sobolev_embedding_constant());
    let mut worst = f64::NEG_INFINITY;
    for path in &ens.paths {
        for w in path.windows(2) {
            let allowed = w[0].total_energy * (1.0 + 1e-4 * (w[1].t - w[0].t));
            worst = worst.max(w[1].total_energy / allowed);
        }
    }
    outcome(
        small.holds && worst <= 1.0,
        format!(
            "smallness {} (margin {:.3}), worst step ratio to slack bound {worst:.6}, {} paths",
            small.holds,
            small.margin,
            ens.paths.len()
        ),
    )
}

fn ac5_non_negativity(pool: &rayon::ThreadPool) -> Outcome {
    let cfg = config(
        "resolution = 64\nkappa = 4\nshell = 4\ndt = 1e-3\nt_end = 1\nrecord_stride = 10\nensemble = 16\nseed = 5\n\
         ic = random-band\nmean = 1\nepsilon = 0.5\nkmax = 4\nic_seed = 3\n\
         velocity = random-band\nvelocity_amplitude = 0.2\nvelocity_kmax = 4",
    );
    let grid = cfg.grid().unwrap();
    let (state, _) = npns_harness::initial::initial_state(&cfg, &grid).unwrap();
    let sup = |c: &SpectralScalar| grid.to_physical(c).unwrap().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (s1, s2) = (sup(state.c1()), sup(state.c2()));
    let ens = run_ensemble(&cfg, pool).expect("ensemble runs");
    let initial_min = ens.paths[0][0].c1_min.min(ens.paths[0][0].c2_min);
    let mut worst = f64::INFINITY;
    let mut pass = initial_min >= 0.5 - 1e-12;
    for path in &ens.paths {
        for r in path {
            pass &= r.c1_min >= -1e-6 * s1 && r.c2_min >= -1e-6 * s2;
            worst = worst.min(r.c1_min).min(r.c2_min);
        }
    }
    outcome(pass, format!("initial min {initial_min:.4}, lowest recorded min {worst:.4e} over {} paths", ens.paths.len()))
}

fn ac6_enhanced_dissipation(pool: &rayon::ThreadPool) -> Outcome {
    let base = config(
        "resolution = 64\nviscosity = 1\ndiffusivity = 0.5\nshell = 8\ndt = 2e-3\nt_end = 4\nrecord_stride = 25\n\
         ensemble = 64\nseed = 6\nic = random-band\nmean = 1\nepsilon = 0.1\nkmax = 4\nic_seed = 6\n\
         velocity = random-band\nvelocity_amplitude = 0.1\nvelocity_kmax = 4",
    );
    let params = base.params().unwrap();
    let gamma0 = sobolev_embedding_constant();
    let mut rates = Vec::new();
    let mut initial = None;
    for kappa in [0.0, 1.0, 4.0] {
        let ens = run_ensemble(&base.with_noise(kappa, 8), pool).expect("ensemble runs");
        initial.get_or_insert(ens.paths[0][0]);
        rates.push(ens.fit.expect("energy decays").rate);
    }
    let first = initial.unwrap();
    let small = smallness_check(&first, &params, gamma0);
    let gamma = deterministic_rate(params.viscosity, params.diffusivity, first.concentration_deviation(), gamma0)
        .unwrap_or(f64::NAN);
    let pass = small.holds && rates[2] > rates[1] && rates[1] > rates[0] && rates[2] >= 1.2 * gamma;
    outcome(
        pass,
        format!(
            "rates κ=0 {:.4}, κ=1 {:.4}, κ=4 {:.4}; γ {gamma:.4}, 1.2γ {:.4}; smallness {}",
            rates[0],
            rates[1],
            rates[2],
            1.2 * gamma,
            small.holds
        ),
    )
}

fn ac7_corrector_estimate() -> Outcome {
    let cfg = config(
        "resolution = 128\nkappa = 1\nshell = 4\nshell_list = 4,8,16\ncorrector_s = 1\ncorrector_alpha = 1\n\
         velocity = random-band\nvelocity_amplitude = 1\nvelocity_kmax = 8\nic_seed = 7",
    );
    let reports = corrector_check(&cfg).expect("corrector check runs");
    let ratios: Vec<f64> = reports.iter().map(|r| r.ratio).collect();
    let spread = ratios.iter().cloned().fold(0.0, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let shrink: Vec<f64> = reports.windows(2).map(|w| w[0].error_norm / w[1].error_norm).collect();
    let pass = spread <= 3.0 && shrink.iter().all(|&s| s >= 1.5);
    outcome(
        pass,
        format!(
            "r(N) for N=4,8,16: {:.4e}, {:.4e}, {:.4e}; max/min {spread:.3} (tol 3); error shrink per doubling {:.3}, {:.3} (min 1.5)",
            ratios[0], ratios[1], ratios[2], shrink[0], shrink[1]
        ),
    )
}

fn random_solenoidal(grid: &Grid, seed: u64) -> SpectralVector {
    let mut rng = trajectory_rng(seed, 0);
    let mut draw = || {
        let values: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        grid.to_spectral(&values).dealiased()
    };
    let (mut x, mut y) = (draw(), draw());
    x.coefficients_mut()[0] = Complex64::default();
    y.coefficients_mut()[0] = Complex64::default();
    SpectralVector::new(x, y).leray_project()
}

fn random_scalar(grid: &Grid, seed: u64, mean: f64) -> SpectralScalar {
    let mut rng = trajectory_rng(seed, 1);
    let values: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-0.5..0.5)).collect();
    let mut c = grid.to_spectral(&values).dealiased();
    c.coefficients_mut()[0] = Complex64::new(mean, 0.0);
    c
}

fn max_abs_diff(a: &SpectralVector, b: &SpectralVector) -> f64 {
    let mut d = a.clone();
    d.axpy(-1.0, b);
    d.max_abs()
}

fn ac8_operator_equivalence() -> Outcome {
    let grid = Grid::new(32).unwrap();
    let basis = NoiseBasis::new(NoiseSpec::new(1.0, 1, 1.0).unwrap(), &grid).unwrap();
    let mut corrector = 0.0f64;
    for seed in 0..10 {
        let u = random_solenoidal(&grid, seed);
        let fast = basis.velocity_corrector(&u).unwrap();
        let literal = velocity_corrector_literal(&basis, &u).unwrap();
        corrector = corrector.max(max_abs_diff(&fast, &literal) / literal.max_abs().max(1e-300));
    }

    let noisy = NoiseBasis::new(NoiseSpec::new(1.0, 3, 1.0).unwrap(), &grid).unwrap();
    let mut action = 0.0f64;
    for seed in 0..3 {
        let u = random_solenoidal(&grid, 100 + seed);
        let state = State::new(u, random_scalar(&grid, 200 + seed, 1.0), random_scalar(&grid, 300 + seed, 1.0)).unwrap();
        let inc = noisy.sample_increment(1e-2, &mut trajectory_rng(seed, 9));
        let whole = apply_transport_noise(&grid, &state, &inc.field).unwrap();
        let mut sum = NoiseAction {
            c1: SpectralScalar::zeros(32),
            c2: SpectralScalar::zeros(32),
            u: SpectralVector::zeros(32),
        };
        for j in 0..inc.increments.len() {
            let mut one_hot = vec![Complex64::default(); inc.increments.len()];
            one_hot[j] = inc.increments[j];
            let part = apply_transport_noise(&grid, &state, &noisy.assemble(&one_hot)).unwrap();
            sum.c1 += &part.c1;
            sum.c2 += &part.c2;
            sum.u.axpy(1.0, &part.u);
        }
        let scale = whole.u.max_abs().max(whole.c1.max_abs()).max(whole.c2.max_abs());
        let mut dc1 = whole.c1.clone();
        dc1.axpy(-1.0, &sum.c1);
        let mut dc2 = whole.c2.clone();
        dc2.axpy(-1.0, &sum.c2);
        let diff = max_abs_diff(&whole.u, &sum.u).max(dc1.max_abs()).max(dc2.max_abs());
        action = action.max(diff / scale);
    }
    outcome(
        corrector <= 1e-10 && action <= 1e-10,
        format!("corrector blocks vs literal {corrector:.2e}, noise action vs per-mode sum {action:.2e} (tol 1e-10)"),
    )
}

fn ac9_transport_martingale() -> Outcome {
    let grid = Grid::new(64).unwrap();
    let basis = NoiseBasis::new(NoiseSpec::new(1.0, 4, 1.0).unwrap(), &grid).unwrap();
    let mut c = SpectralScalar::constant(64, 1.0);
    c.set_mode(1, 0, Complex64::new(0.25, 0.0));
    c.set_mode(0, 2, Complex64::new(0.0, 0.1));
    let t_end = 1.0;
    let drift = |dt: f64| {
        (0..4)
            .map(|path| {
                let cfg = StepperConfig::new(dt, t_end, 9).with_trajectory(path).with_stride(usize::MAX);
                let s = integrate_passive_scalar(&grid, &basis, &c, 0.0, &cfg).expect("passive scalar runs");
                (s.last().unwrap().1 / s[0].1 - 1.0).abs() / t_end
            })
            .fold(0.0f64, f64::max)
    };
    let coarse = drift(1e-3);
    let fine = drift(5e-4);
    let pass = coarse <= 5e-3 && fine <= 0.6 * coarse;
    outcome(
        pass,
        format!("max per-path |Δ‖c‖²|/‖c‖² per unit time: dt=1e-3 {coarse:.3e} (tol 5e-3), dt=5e-4 {fine:.3e} (ratio {:.3}, need ≤ 0.6)", fine / coarse),
    )
}

fn ac10_self_convergence() -> Outcome {
    let text = |m: usize| {
        format!(
            "resolution = {m}\nviscosity = 1\ndiffusivity = 0.5\nkappa = 0\ndt = 1e-3\nt_end = 1\nrecord_stride = 1000\n\
             mean = 1\nepsilon = 0.3\nmode = 1,1\nvelocity = taylor-green\nvelocity_amplitude = 0.5"
        )
    };
    let (_, coarse) = run(&config(&text(64)), 0);
    let (_, fine) = run(&config(&text(128)), 0);
    let coarse_grid = Grid::new(64).unwrap();
    let fine_grid = Grid::new(128).unwrap();
    let pairs = [
        (&coarse.velocity().x, &fine.velocity().x),
        (&coarse.velocity().y, &fine.velocity().y),
        (coarse.c1(), fine.c1()),
        (coarse.c2(), fine.c2()),
    ];
    let (mut diff, mut norm) = (0.0, 0.0);
    for (a, b) in pairs {
        for (idx, z) in b.coefficients().iter().enumerate() {
            let (k1, k2) = fine_grid.wavevector(idx);
            let w = coarse_grid.index_of(k1, k2).map_or(Complex64::default(), |j| a.coefficients()[j]);
            diff += (w - z).norm_sqr();
            norm += z.norm_sqr();
        }
    }
    let rel = (diff / norm).sqrt();
    outcome(rel <= 1e-6, format!("relative L² difference M=64 vs M=128 at T=1: {rel:.3e} (tol 1e-6)"))
}

fn main() -> ExitCode {
    let pool = thread_pool(None).expect("thread pool");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("AC1 mean conservation", Box::new(ac1_mean_conservation)),
        ("AC2 deterministic decay bound", Box::new(ac2_deterministic_decay)),
        ("AC3 Debye screening rate", Box::new(ac3_debye_rate)),
        ("AC4 stochastic energy inequality", Box::new(|| ac4_energy_inequality(&pool))),
        ("AC5 non-negativity", Box::new(|| ac5_non_negativity(&pool))),
        ("AC6 enhanced dissipation", Box::new(|| ac6_enhanced_dissipation(&pool))),
        ("AC7 corrector estimate", Box::new(ac7_corrector_estimate)),
        ("AC8 operator equivalence", Box::new(ac8_operator_equivalence)),
        ("AC9 transport martingale", Box::new(ac9_transport_martingale)),
        ("AC10 self-convergence", Box::new(ac10_self_convergence)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in &criteria {
        let id = name.split_whitespace().next().unwrap();
        if !filter.is_empty() && !filter.iter().any(|f| f == id) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!("{verdict} {name}: {} [{:.1}s]", o.detail, start.elapsed().as_secs_f64());
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
