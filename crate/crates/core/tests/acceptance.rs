//! Acceptance suite: one pass/fail line per criterion, non-zero exit on any
//! failure. Runs as a plain binary so the lines reach the terminal.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use kappa_ns::augmented_solver::{
    drift_rhs, initial_state, momentum_rhs, recover_u, run_observed, SolverParams, SolverState,
    Trajectory,
};
use kappa_ns::constitutive::{
    gamma_minus_threshold, validate_drag_hypotheses, validate_exponents, ConstitutiveSet,
    DensityRange, PressureLaw, ViscosityLaw,
};
use kappa_ns::entropy_diag::{
    balance_residual, convex_combination_check, kappa_entropy, mixture_identity_gap, normalization,
};
use kappa_ns::linear_hypo::{
    eigenvalues, kappa_admissible, log_slope, lyapunov_form, simulate_linear, system_matrix,
    transverse_rate, LinearModel,
};
use kappa_ns::torus_fields::{self as tf, GridSpec, PeriodicField};
use rand::{RngExt, SeedableRng};

type Check = Result<(bool, String), Box<dyn std::error::Error>>;

fn gamma_set(drag: f64) -> ConstitutiveSet {
    ConstitutiveSet::new(ViscosityLaw::Linear, PressureLaw::gamma_law(1.0, 2.0).unwrap())
        .with_drag(drag)
        .unwrap()
}

/// Everything the nonlinear criteria read from one observed run.
struct NonlinearRun {
    traj: Trajectory,
    reference: f64,
    report_dt: f64,
    /// Per-step balance residuals.
    residuals: Vec<f64>,
    min_rho: f64,
    /// States at report times.
    snapshots: Vec<SolverState>,
    /// Largest `|λ − 2κ(μ'ρ − μ)|`-term and `(μ'ρ − μ)`-drift entries seen.
    degenerate_max: f64,
    elapsed: Duration,
}

const DT: f64 = 2e-4;
const REPORT_EVERY: usize = 250;

/// 1D, N = 256, μ = ρ, γ = 2, κ = 1/2, ε = 1e-4, s = 2, ρ0 = 1 + 0.1 cos x,
/// u0 = 0.1 sin x, t ∈ [0, 1].
fn nonlinear_run(dt: f64, delta: f64, drag: f64, inspect_terms: bool) -> Result<NonlinearRun, Box<dyn std::error::Error>> {
    let start = Instant::now();
    let grid = GridSpec::new(1, 256)?;
    let set = gamma_set(drag);
    let params = SolverParams::new(0.5, dt, 1.0)?.with_eps(1e-4, 2)?.with_delta(delta)?;
    let rho0 = PeriodicField::scalar_from_fn(grid, |x| 1.0 + 0.1 * x[0].cos());
    let u0 = PeriodicField::vector_from_fn(grid, |x, _| 0.1 * x[0].sin());
    let initial = initial_state(&rho0, &u0, params.kappa, &set)?;
    let reference = normalization(kappa_entropy(&initial, &params, &set)?);
    let every = ((REPORT_EVERY as f64) * DT / dt).round() as usize;

    let mut residuals = Vec::new();
    let mut min_rho = initial.rho.min();
    let mut snapshots = vec![initial.clone()];
    let mut degenerate_max: f64 = 0.0;
    let mut failure = None;
    let mut step = 0usize;
    let traj = run_observed(&initial, &params, &set, every, |before, after| {
        step += 1;
        min_rho = min_rho.min(after.rho.min());
        match balance_residual(before, after, &params, &set, reference) {
            Ok(r) => residuals.push(r),
            Err(e) => failure = Some(e),
        }
        if step.is_multiple_of(every) {
            snapshots.push(after.clone());
        }
        if inspect_terms {
            let terms = momentum_rhs(after, &params, &set)
                .and_then(|m| Ok((m, drift_rhs(after, &params, &set)?)));
            match terms {
                Ok((m, d)) => {
                    degenerate_max = degenerate_max
                        .max(m.lambda_bracket.max_abs())
                        .max(d.bracket.max_abs());
                }
                Err(e) => failure = Some(e),
            }
        }
    })?;
    if let Some(e) = failure {
        return Err(e.into());
    }
    Ok(NonlinearRun {
        traj,
        reference,
        report_dt: every as f64 * dt,
        residuals,
        min_rho,
        snapshots,
        degenerate_max,
        elapsed: start.elapsed(),
    })
}

impl NonlinearRun {
    fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }

    fn rms_residual(&self) -> f64 {
        (self.residuals.iter().map(|r| r * r).sum::<f64>() / self.residuals.len() as f64).sqrt()
    }

    /// Worst `E_{n+1} − E_n − allowance` over consecutive reports; the
    /// allowance is the largest per-step balance defect integrated over one
    /// report interval.
    fn worst_entropy_excess(&self) -> f64 {
        let allowance = self.reference * self.max_residual() * self.report_dt;
        self.traj
            .rows
            .windows(2)
            .map(|w| w[1].1.entropy - w[0].1.entropy - allowance)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn mass_drift(&self) -> f64 {
        let m0 = self.traj.rows[0].0.mass;
        self.traj
            .rows
            .iter()
            .map(|r| ((r.0.mass - m0) / m0).abs())
            .fold(0.0, f64::max)
    }

    fn final_drift(&self) -> f64 {
        self.traj.rows.last().expect("final row").0.drift_v
    }
}

fn c1_mixture_identity() -> Check {
    let start = Instant::now();
    let mut rng = rand::rngs::StdRng::seed_from_u64(0x6b6e_736c);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let a: [f64; 3] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        let b: [f64; 3] = std::array::from_fn(|_| rng.random_range(-10.0..10.0));
        let kappa = rng.random_range(0.0..1.0);
        let scale = a.iter().chain(&b).map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        worst = worst.max(mixture_identity_gap(&a, &b, kappa) / scale);
    }
    let elapsed = start.elapsed();
    Ok((
        worst <= 1e-12 && elapsed < Duration::from_secs(1),
        format!("max relative gap {worst:.2e} over 1e5 triples in {elapsed:.2?}"),
    ))
}

fn c2_bd_relation() -> Check {
    let start = Instant::now();
    let range = DensityRange { min: 1e-3, max: 1e3 };
    let grid = range.log_grid(301);
    let laws = [
        ViscosityLaw::Linear,
        ViscosityLaw::single_power(0.8, 1.3)?,
        ViscosityLaw::single_power(1.5, 0.5)?,
        ViscosityLaw::power_law_pair(0.9, 1.2, 1.0, 1.0, 2.0)?,
    ];
    let pressures = [
        PressureLaw::gamma_law(1.0, 2.0)?,
        PressureLaw::gamma_law(0.7, 1.4)?,
        PressureLaw::singular_cold(1.0, 3.0, 2.0, 1.0)?,
    ];
    let mut worst_lambda: f64 = 0.0;
    let mut worst_energy: f64 = 0.0;
    for law in laws {
        let set = ConstitutiveSet::new(law, pressures[0]);
        let kink = match law {
            ViscosityLaw::PowerLawPair { rho_star, .. } => Some(rho_star),
            _ => None,
        };
        for &r in &grid {
            if kink.is_some_and(|k| (r / k - 1.0).abs() < 1e-3) {
                continue;
            }
            let h = 1e-5 * r;
            let mu_fd = (set.mu(r + h)? - set.mu(r - h)?) / (2.0 * h);
            let want = 2.0 * (r * mu_fd - set.mu(r)?);
            let scale = set.mu(r)?.max(want.abs());
            worst_lambda = worst_lambda.max((set.lambda_bd(r)? - want).abs() / scale);
        }
    }
    for p in pressures {
        let set = ConstitutiveSet::new(ViscosityLaw::Linear, p);
        for &r in &grid {
            let h = 1e-5 * r;
            let e_fd = (set.internal_energy(r + h)? - set.internal_energy(r - h)?) / (2.0 * h);
            let p_val = set.pressure(r)?;
            let scale = p_val.abs().max(r * r * e_fd.abs()).max(f64::MIN_POSITIVE);
            worst_energy = worst_energy.max((r * r * e_fd - p_val).abs() / scale);
        }
    }
    let linear = gamma_set(0.0);
    let lambda_zero = grid.iter().all(|&r| linear.lambda_bd(r) == Ok(0.0));
    let elapsed = start.elapsed();
    Ok((
        worst_lambda <= 1e-6 && worst_energy <= 1e-6 && lambda_zero && elapsed < Duration::from_secs(1),
        format!(
            "lambda rel err {worst_lambda:.1e}, rho^2 e' = p rel err {worst_energy:.1e}, mu = rho gives lambda == 0: {lambda_zero}, {elapsed:.2?}"
        ),
    ))
}

fn c3_validator_fidelity() -> Check {
    let exact = gamma_minus_threshold(1.0, 1.0) == 1.0;
    let name = "gamma_minus > 2n(3m-2)/(4m-3) - 1";
    let verdict = |gm: f64| -> Option<bool> { validate_exponents(1.0, 1.0, gm, 2.0).check(name).map(|c| c.passed) };
    let cases = [(1.0 - 1e-12, false), (1.0, false), (1.0 + 1e-12, true), (0.5, false), (1.5, true)];
    let correct = cases.iter().all(|&(gm, want)| verdict(gm) == Some(want));
    Ok((
        exact && correct,
        format!("threshold(1,1) = {} exactly: {exact}; boundary cases classified: {correct}", gamma_minus_threshold(1.0, 1.0)),
    ))
}

fn wavevectors(dim: usize) -> Vec<Vec<f64>> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(dim as u64);
    let mut out = Vec::new();
    for mag in [0.25, 0.5, 1.0, 2.0, 3.0, 5.0, 8.0] {
        for _ in 0..4 {
            let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
            out.push(raw.iter().map(|x| mag * x / norm).collect());
        }
    }
    out
}

fn c4_linear_identity() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut definite = true;
    let mut cases = 0usize;
    for dim in 1..=3 {
        let upper = (dim as f64 - 1.0) / dim as f64;
        for mu in [0.1, 1.0] {
            for j in 1..=9 {
                // d = 1 has no admissible κ; the identity is still checked on (0, 1)
                let kappa = if dim == 1 { j as f64 / 10.0 } else { upper * j as f64 / 10.0 };
                for model in [LinearModel::barotropic(dim, mu, kappa)?, LinearModel::heat(dim, mu, kappa, 1.0)?] {
                    let admissible = kappa_admissible(&model).passed();
                    for k in wavevectors(dim) {
                        let m = system_matrix(&model, &k)?;
                        let form = lyapunov_form(&model, &k)?;
                        let scale = form.pair.identity_scale(&m).max(1.0);
                        worst = worst.max(form.pair.identity_defect(&m) / scale);
                        if admissible {
                            definite &= form.q_positive_definite() && form.r_positive_semidefinite();
                        }
                        cases += 1;
                    }
                }
            }
        }
    }
    let elapsed = start.elapsed();
    Ok((
        worst <= 1e-12 && definite && elapsed < Duration::from_secs(5),
        format!("{cases} (model, k) cases: max scaled defect {worst:.1e}, Q > 0 and R >= 0 when admissible: {definite}, {elapsed:.2?}"),
    ))
}

fn c5_decay_rates() -> Check {
    let model = LinearModel::barotropic(3, 1.0, 0.4)?;
    let k = [1.0, 0.0, 0.0];
    // oracle: roots of λ² + (4/3)λ + 1
    let (b, c) = (4.0 / 3.0, 1.0);
    let (re, im) = (-b / 2.0, (c - b * b / 4.0_f64).sqrt());
    let eig = eigenvalues(&model, &k)?;
    let pair_err = [im, -im]
        .iter()
        .map(|&y| eig.iter().map(|z| (z.re - re).hypot(z.im - y)).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let abscissa = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);

    let traj = simulate_linear(&model, &k, &[1.0, 0.5, 0.0, 0.0], 0.01, 20.0)?;
    let pts: Vec<(f64, f64)> = traj.iter().map(|s| (s.t, s.z.norm_squared())).collect();
    let slope = log_slope(&pts);
    let slope_err = (slope / (2.0 * abscissa) - 1.0).abs();

    let transverse = simulate_linear(&model, &k, &[0.0, 0.0, 1.0, 0.0], 0.01, 20.0)?;
    let rate = transverse_rate(&model, 1.0);
    let trans_err = transverse
        .iter()
        .skip(1)
        .map(|s| (s.z.norm_squared().ln() / (2.0 * s.t) - rate).abs())
        .fold(0.0, f64::max);
    Ok((
        pair_err <= 1e-10 && slope_err <= 0.02 && trans_err <= 1e-12,
        format!(
            "eigenpair err {pair_err:.1e}, log-slope {slope:.5} vs {:.5} ({:.2}%), transverse rate err {trans_err:.1e}",
            2.0 * abscissa,
            100.0 * slope_err
        ),
    ))
}

fn c6_entropy_dissipation(run: &NonlinearRun) -> Check {
    let excess = run.worst_entropy_excess();
    let drift = run.mass_drift();
    Ok((
        excess <= 0.0 && drift <= 1e-11 && run.min_rho > 0.0 && run.elapsed < Duration::from_secs(120),
        format!(
            "worst entropy step {excess:.2e} (<= 0 required), mass drift {drift:.1e}, min rho {:.4}, {:.2?}",
            run.min_rho, run.elapsed
        ),
    ))
}

fn c7_residual_order(runs: [&NonlinearRun; 3]) -> Check {
    let rms: Vec<f64> = runs.iter().map(|r| r.rms_residual()).collect();
    let orders: Vec<f64> = rms.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    let ok = orders.iter().all(|&p| p >= 1.8);
    Ok((
        ok,
        format!(
            "rms per-step residual {:.3e}, {:.3e}, {:.3e}; observed orders {:.2}, {:.2}",
            rms[0], rms[1], rms[2], orders[0], orders[1]
        ),
    ))
}

fn c8_drift_identification(runs: [&NonlinearRun; 3]) -> Check {
    let d: Vec<f64> = runs.iter().map(|r| r.final_drift()).collect();
    Ok((
        d[0] > d[1] && d[1] > d[2],
        format!("final drift_v at delta = 0.1, 0.05, 0.025: {:.3e}, {:.3e}, {:.3e}", d[0], d[1], d[2]),
    ))
}

fn c9_endpoints(run: &NonlinearRun) -> Check {
    let set = gamma_set(0.0);
    let params = SolverParams::new(0.5, DT, 1.0)?;
    let mut worst_gap: f64 = 0.0;
    let mut worst_endpoint: f64 = 0.0;
    for state in &run.snapshots {
        worst_gap = worst_gap.max(convex_combination_check(state, &set, 0.5)?);

        // independent energy and BD entropy from the physical velocity
        let u = recover_u(state, &params, &set)?;
        let v = state.v.clone();
        let internal = tf::integrate(&state.rho.map(|r| r * set.internal_energy(r).unwrap()))?;
        let kinetic = |f: &PeriodicField| tf::integrate(&f.norm_sq().mul_scalar_field(&state.rho).unwrap()).map(|x| 0.5 * x);
        let energy = kinetic(&u)? + internal;
        let bd = kinetic(&u.add(&v)?)? + internal;
        for (kappa, want) in [(0.0, energy), (1.0, bd)] {
            let relabelled = SolverState::new(state.t, state.rho.clone(), u.axpy(kappa, &v)?, v.clone())?;
            let got = kappa_entropy(&relabelled, &SolverParams::diagnostic(kappa)?, &set)?;
            worst_endpoint = worst_endpoint.max((got - want).abs() / want.abs());
        }
    }
    Ok((
        worst_gap <= 1e-11 && worst_endpoint <= 1e-13,
        format!(
            "{} states: convex-combination gap {worst_gap:.1e}, endpoint mismatch {worst_endpoint:.1e}",
            run.snapshots.len()
        ),
    ))
}

fn c10_drag(run: &NonlinearRun) -> Check {
    let min_drag = run.traj.rows.iter().map(|r| r.1.diss_drag).fold(f64::INFINITY, f64::min);
    let excess = run.worst_entropy_excess();
    let set = gamma_set(1.0);
    let sandwich = (0..=200).all(|i| {
        let r = 10f64.powf(-4.0 + 8.0 * i as f64 / 200.0);
        let combo = set.bulk_combination(r).unwrap();
        combo == 2.0 * r && 0.5 * set.mu(r).unwrap() <= combo && combo <= set.mu(r).unwrap() / 0.5
    });
    let validator = validate_drag_hypotheses(&set, 0.5, 0.75, 2.0, DensityRange::default()).passed();
    Ok((
        min_drag > 0.0 && excess <= 0.0 && sandwich && validator,
        format!(
            "min diss_drag {min_drag:.3e}, worst entropy step {excess:.2e}, 2mu+3lambda = 2rho in sandwich: {sandwich}, validator: {validator}"
        ),
    ))
}

fn c11_degenerate_nullity(run: &NonlinearRun) -> Check {
    Ok((
        run.degenerate_max == 0.0,
        format!("max |term| over {} steps: {:e}", run.residuals.len(), run.degenerate_max),
    ))
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut results: Vec<(u32, &str, Check)> = vec![
        (1, "two-velocity mixture identity", c1_mixture_identity()),
        (2, "BD relation and pressure/energy suite", c2_bd_relation()),
        (3, "validator fidelity", c3_validator_fidelity()),
        (4, "linear Lyapunov identity", c4_linear_identity()),
        (5, "linear decay rates", c5_decay_rates()),
    ];

    let base = nonlinear_run(DT, 0.05, 0.0, true);
    let half = nonlinear_run(DT / 2.0, 0.05, 0.0, false);
    let quarter = nonlinear_run(DT / 4.0, 0.05, 0.0, false);
    let wide = nonlinear_run(DT, 0.1, 0.0, false);
    let narrow = nonlinear_run(DT, 0.025, 0.0, false);
    let drag = nonlinear_run(DT, 0.05, 1.0, false);
    let failed = |e: &dyn std::error::Error| -> Check { Err(e.to_string().into()) };

    match &base {
        Ok(run) => {
            results.push((6, "nonlinear kappa-entropy dissipation", c6_entropy_dissipation(run)));
            results.push((
                7,
                "balance residual order",
                match (&half, &quarter) {
                    (Ok(h), Ok(q)) => c7_residual_order([run, h, q]),
                    (Err(e), _) | (_, Err(e)) => failed(e.as_ref()),
                },
            ));
            results.push((
                8,
                "drift identification",
                match (&wide, &narrow) {
                    (Ok(w), Ok(n)) => c8_drift_identification([w, run, n]),
                    (Err(e), _) | (_, Err(e)) => failed(e.as_ref()),
                },
            ));
            results.push((9, "endpoint consistency", c9_endpoints(run)));
        }
        Err(e) => {
            for (id, name) in [(6, "nonlinear kappa-entropy dissipation"), (7, "balance residual order"), (8, "drift identification"), (9, "endpoint consistency")] {
                results.push((id, name, failed(e.as_ref())));
            }
        }
    }
    results.push((10, "drag variant", drag.as_ref().map_err(|e| e.to_string().into()).and_then(c10_drag)));
    results.push((
        11,
        "degenerate-term nullity",
        base.as_ref().map_err(|e| e.to_string().into()).and_then(c11_degenerate_nullity),
    ));

    let mut all = true;
    for (id, name, outcome) in &results {
        let (pass, detail) = match outcome {
            Ok((p, d)) => (*p, d.clone()),
            Err(e) => (false, format!("error: {e}")),
        };
        all &= pass;
        println!("criterion {id:>2} [{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} in {:.1?}", if all { "all criteria pass" } else { "FAILURES" }, started.elapsed());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
