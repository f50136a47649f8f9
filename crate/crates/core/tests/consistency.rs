//! On the compatible slice `v = 2∇φ(ρ)` with `δ = ε = 0` the augmented system
//! must reduce to the compressible Navier–Stokes equations. Each side is
//! assembled independently from field primitives.

use kappa_ns::augmented_solver::{
    continuity_rhs, drift_rhs, initial_state, momentum_rhs, SolverParams, SolverState,
};
use kappa_ns::constitutive::{ConstitutiveSet, PressureLaw, ViscosityLaw};
use kappa_ns::torus_fields::{self as tf, GridSpec, PeriodicField};

const N: usize = 64;

fn pointwise(f: &PeriodicField, g: impl Fn(f64) -> f64) -> PeriodicField {
    f.map(g)
}

fn setup(law: ViscosityLaw, kappa: f64) -> (SolverState, SolverParams, ConstitutiveSet) {
    let grid = GridSpec::new(2, N).unwrap();
    let rho = PeriodicField::scalar_from_fn(grid, |x| {
        1.0 + 0.3 * x[0].sin() * x[1].cos() + 0.1 * (2.0 * x[1]).sin()
    });
    let u = PeriodicField::vector_from_fn(grid, |x, i| {
        if i == 0 {
            0.4 * x[1].sin() + 0.2 * (x[0] + x[1]).cos()
        } else {
            -0.3 * x[0].cos() + 0.1 * (2.0 * x[0]).sin()
        }
    });
    let set = ConstitutiveSet::new(law, PressureLaw::gamma_law(1.0, 1.4).unwrap());
    let state = initial_state(&rho, &u, kappa, &set).unwrap();
    let mut params = SolverParams::diagnostic(kappa).unwrap();
    params.dealias = false;
    (state, params, set)
}

fn rel_gap(a: &PeriodicField, b: &PeriodicField) -> f64 {
    a.sub(b).unwrap().max_abs() / b.max_abs().max(1.0)
}

/// Conservative momentum right-hand side `−div(ρu⊗u) + 2div(μD u) + ∇(λ div u) − ∇p`.
fn navier_stokes_momentum(rho: &PeriodicField, u: &PeriodicField, set: &ConstitutiveSet) -> PeriodicField {
    let mu = pointwise(rho, |r| set.mu(r).unwrap());
    let lambda = pointwise(rho, |r| set.lambda_bd(r).unwrap());
    let p = pointwise(rho, |r| set.pressure(r).unwrap());
    let rho_u = u.mul_scalar_field(rho).unwrap();
    let transport = tf::div(&u.outer(&rho_u).unwrap()).unwrap().scale(-1.0);
    let viscous = tf::div(&tf::sym_grad(u).unwrap().mul_scalar_field(&mu).unwrap())
        .unwrap()
        .scale(2.0);
    let bulk = tf::grad(&tf::div(u).unwrap().mul_scalar_field(&lambda).unwrap()).unwrap();
    let pressure = tf::grad(&p).unwrap().scale(-1.0);
    transport.add(&viscous).unwrap().add(&bulk).unwrap().add(&pressure).unwrap()
}

fn laws() -> Vec<ViscosityLaw> {
    vec![
        ViscosityLaw::Linear,
        ViscosityLaw::single_power(1.5, 0.8).unwrap(),
        ViscosityLaw::single_power(0.8, 1.2).unwrap(),
    ]
}

#[test]
fn drift_equation_follows_from_continuity() {
    for law in laws() {
        for kappa in [0.2, 0.5, 0.8] {
            let (state, params, set) = setup(law, kappa);
            let drho = continuity_rhs(&state, &params, &set).unwrap();
            let mup = pointwise(&state.rho, |r| set.mu_prime(r).unwrap());
            let want = tf::grad(&drho.mul_scalar_field(&mup).unwrap()).unwrap().scale(2.0);
            let got = drift_rhs(&state, &params, &set).unwrap().total();
            let gap = rel_gap(&got, &want);
            assert!(gap < 1e-8, "{law:?} κ={kappa}: drift gap {gap:e}");
        }
    }
}

#[test]
fn mass_equation_is_plain_continuity() {
    for law in laws() {
        let (state, params, set) = setup(law, 0.4);
        let u = state.w.axpy(-0.4, &state.v).unwrap();
        let want = tf::div(&u.mul_scalar_field(&state.rho).unwrap()).unwrap().scale(-1.0);
        let gap = rel_gap(&continuity_rhs(&state, &params, &set).unwrap(), &want);
        assert!(gap < 1e-10, "continuity gap {gap:e}");
    }
}

#[test]
fn velocity_combination_solves_navier_stokes() {
    for law in laws() {
        for kappa in [0.2, 0.5, 0.8] {
            let (state, params, set) = setup(law, kappa);
            let m = momentum_rhs(&state, &params, &set).unwrap().total();
            let dv = drift_rhs(&state, &params, &set).unwrap().total();
            let got = m.axpy(-kappa, &dv).unwrap();
            let u = state.w.axpy(-kappa, &state.v).unwrap();
            let want = navier_stokes_momentum(&state.rho, &u, &set);
            let gap = rel_gap(&got, &want);
            assert!(gap < 1e-8, "{law:?} κ={kappa}: momentum gap {gap:e}");
        }
    }
}
