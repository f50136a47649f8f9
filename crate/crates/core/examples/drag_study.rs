//! Turbulent drag adds a positive dissipation channel without breaking the
//! entropy decay.

use kappa_ns::augmented_solver::{initial_state, run, SolverParams};
use kappa_ns::constitutive::{
    validate_drag_hypotheses, ConstitutiveSet, DensityRange, PressureLaw, ViscosityLaw,
};
use kappa_ns::torus_fields::{GridSpec, PeriodicField};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = GridSpec::new(1, 128)?;
    let rho0 = PeriodicField::scalar_from_fn(grid, |x| 1.0 + 0.1 * x[0].cos());
    let u0 = PeriodicField::vector_from_fn(grid, |x, _| 0.1 * x[0].sin());
    let params = SolverParams::new(0.5, 5e-4, 0.5)?.with_eps(1e-4, 2)?.with_delta(0.05)?;
    for r1 in [0.0, 1.0, 10.0] {
        let set = ConstitutiveSet::new(ViscosityLaw::Linear, PressureLaw::gamma_law(1.0, 2.0)?)
            .with_drag(r1)?;
        let hyp = validate_drag_hypotheses(&set, 0.5, 0.75, 2.0, DensityRange::default());
        let initial = initial_state(&rho0, &u0, params.kappa, &set)?;
        let traj = run(&initial, &params, &set, 100)?;
        let min_drag = traj.rows[1..].iter().map(|r| r.1.diss_drag).fold(f64::INFINITY, f64::min);
        let last = traj.rows.last().expect("final row").1;
        println!(
            "r1 = {r1:>4}: hypotheses {}, final entropy {:.9}, min drag dissipation {:.3e}",
            hyp.passed(),
            last.entropy,
            min_drag
        );
    }
    Ok(())
}
