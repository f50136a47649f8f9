//! The drift velocity approaches 2∇φ(ρ) as the mollifier width shrinks.

use kappa_ns::augmented_solver::{initial_state, run, SolverParams};
use kappa_ns::constitutive::{ConstitutiveSet, PressureLaw, ViscosityLaw};
use kappa_ns::torus_fields::{GridSpec, PeriodicField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(1, 128)?;
    let set = ConstitutiveSet::new(ViscosityLaw::Linear, PressureLaw::gamma_law(1.0, 2.0)?);
    let rho0 = PeriodicField::scalar_from_fn(grid, |x| 1.0 + 0.1 * x[0].cos());
    let u0 = PeriodicField::vector_from_fn(grid, |x, _| 0.1 * x[0].sin());
    for delta in [0.2, 0.1, 0.05, 0.025] {
        let params = SolverParams::new(0.5, 5e-4, 0.5)?.with_eps(1e-4, 2)?.with_delta(delta)?;
        let initial = initial_state(&rho0, &u0, params.kappa, &set)?;
        let traj = run(&initial, &params, &set, usize::MAX)?;
        let last = traj.rows.last().expect("final row").0;
        println!("delta = {delta:<6} |v - 2 grad phi|_L2 at t = {:.2}: {:.4e}", last.t, last.drift_v);
    }
    Ok(())
}
