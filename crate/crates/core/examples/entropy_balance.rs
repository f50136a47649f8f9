//! Convergence of the discrete kappa-entropy balance residual under step
//! halving.

use kappa_ns::augmented_solver::{initial_state, run_observed, SolverParams};
use kappa_ns::constitutive::{ConstitutiveSet, PressureLaw, ViscosityLaw};
use kappa_ns::entropy_diag::{balance_residual, kappa_entropy, normalization};
use kappa_ns::torus_fields::{GridSpec, PeriodicField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(1, 256)?;
    let set = ConstitutiveSet::new(ViscosityLaw::Linear, PressureLaw::gamma_law(1.0, 2.0)?);
    let rho0 = PeriodicField::scalar_from_fn(grid, |x| 1.0 + 0.1 * x[0].cos());
    let u0 = PeriodicField::vector_from_fn(grid, |x, _| 0.1 * x[0].sin());
    let t_end = 0.2;

    let mut previous: Option<f64> = None;
    for dt in [8e-4, 4e-4, 2e-4] {
        let params = SolverParams::new(0.5, dt, t_end)?.with_eps(1e-4, 2)?.with_delta(0.05)?;
        let initial = initial_state(&rho0, &u0, params.kappa, &set)?;
        let reference = normalization(kappa_entropy(&initial, &params, &set)?);
        let mut squares = Vec::new();
        run_observed(&initial, &params, &set, usize::MAX, |before, after| {
            let r = balance_residual(before, after, &params, &set, reference).unwrap_or(f64::NAN);
            squares.push(r * r);
        })?;
        let rms = (squares.iter().sum::<f64>() / squares.len() as f64).sqrt();
        match previous {
            Some(p) => println!("dt = {dt:e}: rms residual {rms:.3e}, order {:.2}", (p / rms).log2()),
            None => println!("dt = {dt:e}: rms residual {rms:.3e}"),
        }
        previous = Some(rms);
    }
    Ok(())
}
