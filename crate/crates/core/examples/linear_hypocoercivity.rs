//! Mode-by-mode decay of the linearized systems and their Lyapunov
//! functionals.

use kappa_ns::linear_hypo::{
    decay_rate_over_band, eigenvalues, kappa_admissible, log_slope, lyapunov_form, simulate_linear,
    system_matrix, LinearModel,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let baro = LinearModel::barotropic(3, 1.0, 0.4)?;
    let k = [1.0, 0.0, 0.0];
    println!("eigenvalues at |k| = 1:");
    for z in eigenvalues(&baro, &k)? {
        println!("  {:+.12} {:+.12}i", z.re, z.im);
    }

    let form = lyapunov_form(&baro, &k)?;
    let m = system_matrix(&baro, &k)?;
    println!(
        "Q min eig {:.6}, R min eig {:.3e}, identity defect {:.3e}",
        form.min_eig_q,
        form.min_eig_r,
        form.pair.identity_defect(&m)
    );

    let traj = simulate_linear(&baro, &k, &[1.0, 0.5, 0.0, 0.0], 0.01, 20.0)?;
    let pts: Vec<(f64, f64)> = traj.iter().map(|s| (s.t, s.z.norm_squared())).collect();
    println!("measured log-slope of |z|^2 over [0, 20]: {:.5} (spectral: -4/3)", log_slope(&pts));

    for mu in [0.1, 1.0, 10.0, 100.0] {
        let model = LinearModel::barotropic(3, mu, 0.4)?;
        println!("mu = {mu:>5}: band decay rate for |k| <= 4: {:.6}", decay_rate_over_band(&model, 4.0)?);
    }

    let heat = LinearModel::heat(3, 1.0, 0.3, 1.0)?;
    for c in kappa_admissible(&heat).constraints {
        println!("{}: {} in ({}, {}) -> {}", c.name, c.value, c.lower, c.upper, c.passed);
    }
    Ok(())
}
