//! One nonlinear run of the augmented system on a line, printing the report
//! table.

use kappa_ns::augmented_solver::{initial_state, run, SolverParams};
use kappa_ns::constitutive::{ConstitutiveSet, PressureLaw, ViscosityLaw};
use kappa_ns::torus_fields::{GridSpec, PeriodicField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(1, 256)?;
    let set = ConstitutiveSet::new(ViscosityLaw::Linear, PressureLaw::gamma_law(1.0, 2.0)?);
    let rho0 = PeriodicField::scalar_from_fn(grid, |x| 1.0 + 0.1 * x[0].cos());
    let u0 = PeriodicField::vector_from_fn(grid, |x, _| 0.1 * x[0].sin());
    let params = SolverParams::new(0.5, 2e-4, 1.0)?
        .with_eps(1e-4, 2)?
        .with_delta(0.05)?;
    let initial = initial_state(&rho0, &u0, params.kappa, &set)?;
    let traj = run(&initial, &params, &set, 500)?;

    println!("{:>6} {:>20} {:>12} {:>12} {:>12}", "t", "entropy", "residual", "min_rho", "drift_v");
    for (s, r) in &traj.rows {
        println!(
            "{:>6.3} {:>20.15} {:>12.3e} {:>12.6} {:>12.3e}",
            s.t, r.entropy, r.residual, s.min_rho, s.drift_v
        );
    }
    let (first, last) = (&traj.rows[0].0, &traj.rows[traj.rows.len() - 1].0);
    println!("relative mass drift: {:e}", (last.mass - first.mass) / first.mass);
    Ok(())
}
