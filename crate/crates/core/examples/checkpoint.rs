//! Save a state mid-run, reload it and check the continuation matches an
//! uninterrupted run bit for bit.

use kappa_ns::augmented_solver::{initial_state, run, SolverParams};
use kappa_ns::constitutive::{ConstitutiveSet, PressureLaw, ViscosityLaw};
use kappa_ns::runner_io::{checkpoint_load, checkpoint_save};
use kappa_ns::torus_fields::{GridSpec, PeriodicField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(2, 32)?;
    let set = ConstitutiveSet::new(ViscosityLaw::Linear, PressureLaw::gamma_law(1.0, 1.4)?);
    let rho0 = PeriodicField::scalar_from_fn(grid, |x| 1.0 + 0.2 * x[0].cos() * x[1].sin());
    let u0 = PeriodicField::vector_from_fn(grid, |x, c| if c == 1 { 0.1 * x[0].sin() } else { 0.0 });
    let params = SolverParams::new(0.3, 1e-3, 0.1)?.with_eps(1e-4, 2)?;
    let initial = initial_state(&rho0, &u0, params.kappa, &set)?;

    let half = run(&initial, &SolverParams { t_end: 0.05, ..params }, &set, usize::MAX)?;
    let blob = checkpoint_save(&half.final_state);
    println!("checkpoint: {} bytes at t = {}", blob.len(), half.final_state.t);
    let restored = checkpoint_load(&blob, &grid)?;

    let resumed = run(&restored, &params, &set, usize::MAX)?.final_state;
    let straight = run(&initial, &params, &set, usize::MAX)?.final_state;
    let gap = resumed.rho.sub(&straight.rho)?.max_abs();
    println!("max |rho_resumed - rho_straight| = {gap:e}");
    Ok(())
}
