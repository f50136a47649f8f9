//! κ-entropy, its dissipation integrals and the discrete balance residual.
//!
//! The residual of one step `[before, after]` is
//! `|ΔE/Δt + D + P + X| / E_ref`, where `D` is the sum of the six reported
//! dissipation integrals, `P = ∫p div([w]_δ − w)` is the mollification
//! defect of the pressure work and `X = 2κ r1 ∫ρ|u|u·∇φ(ρ)` the part of the
//! drag work not sign-definite; all three are evaluated at the fieldwise
//! midpoint state. `ΔE` is accumulated pointwise so that no large totals
//! are subtracted.

use crate::augmented_solver::{grad_phi, pointwise, recover_u, SolverError, SolverParams, SolverState};
use crate::constitutive::ConstitutiveSet;
use crate::quadrature::gauss3_mean;
use crate::torus_fields::{self as tf, PeriodicField};

type Result<T> = std::result::Result<T, SolverError>;

/// One row of diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EntropyReport {
    pub time: f64,
    pub entropy: f64,
    /// `∫ρ(|w|²/2 + κ(1−κ)|v|²/2)`.
    pub kinetic_mixture: f64,
    /// `∫ρe(ρ)`.
    pub internal: f64,
    pub diss_d: f64,
    pub diss_a: f64,
    pub diss_div: f64,
    pub diss_pressure: f64,
    pub diss_eps: f64,
    pub diss_drag: f64,
    /// Normalized balance defect of the step ending at `time`; zero for the
    /// first row.
    pub residual: f64,
}

impl EntropyReport {
    pub fn dissipation_total(&self) -> f64 {
        self.diss_d + self.diss_a + self.diss_div + self.diss_pressure + self.diss_eps + self.diss_drag
    }
}

/// Dissipation integrals and the two balance corrections of one state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dissipation {
    pub diss_d: f64,
    pub diss_a: f64,
    pub diss_div: f64,
    pub diss_pressure: f64,
    pub diss_eps: f64,
    pub diss_drag: f64,
    /// `∫p div([w]_δ − w)`.
    pub mollifier_defect: f64,
    /// `2κ r1 ∫ρ|u|u·∇φ(ρ)`.
    pub drag_cross: f64,
}

impl Dissipation {
    pub fn total(&self) -> f64 {
        self.diss_d + self.diss_a + self.diss_div + self.diss_pressure + self.diss_eps + self.diss_drag
    }
}

/// `(kinetic_mixture, internal)`.
pub fn entropy_parts(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<(f64, f64)> {
    let k = params.kappa;
    let density = state
        .w
        .norm_sq()
        .zip_with(&state.v.norm_sq(), |w2, v2| 0.5 * w2 + 0.5 * k * (1.0 - k) * v2)?
        .zip_with(&state.rho, |x, r| x * r)?;
    let internal = pointwise(&state.rho, |r| Ok(r * set.internal_energy(r)?))?;
    Ok((tf::integrate(&density)?, tf::integrate(&internal)?))
}

/// `∫ρ(|w|²/2 + κ(1−κ)|v|²/2) + ∫ρe(ρ)`.
pub fn kappa_entropy(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<f64> {
    let (kin, int) = entropy_parts(state, params, set)?;
    Ok(kin + int)
}

/// Scale used to normalize residuals.
pub fn normalization(e0: f64) -> f64 {
    if e0.abs() > f64::MIN_POSITIVE {
        e0.abs()
    } else {
        1.0
    }
}

pub fn dissipation(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<Dissipation> {
    let k = params.kappa;
    let rho = &state.rho;
    let mu = pointwise(rho, |r| set.mu(r))?;
    let b = pointwise(rho, |r| Ok(set.mu_prime(r)? * r - set.mu(r)?))?;
    let gw = tf::grad(&state.w)?;
    let gv = tf::grad(&state.v)?;

    let strain = tf::sym_grad(&state.w)?.axpy(-k, &gv)?;
    let diss_d = 2.0 * (1.0 - k) * tf::integrate(&strain.norm_sq().mul_scalar_field(&mu)?)?;
    let skew = tf::skew_grad(&state.w)?;
    let diss_a = 2.0 * k * tf::integrate(&skew.norm_sq().mul_scalar_field(&mu)?)?;
    let div_mix = tf::div(&state.w.axpy(-k, &state.v)?)?;
    let diss_div = 2.0 * (1.0 - k) * tf::integrate(&div_mix.norm_sq().mul_scalar_field(&b)?)?;

    let weight = pointwise(rho, |r| Ok(set.mu_prime(r)? * set.pressure_prime(r)? / r))?;
    let diss_pressure =
        2.0 * k * tf::integrate(&tf::grad(rho)?.norm_sq().mul_scalar_field(&weight)?)?;

    let diss_eps = if params.eps > 0.0 {
        let s = params.s;
        let t = rho.grid().tables();
        // Δ^s w has symbol (−|k|²)^s
        let lap_s = state.w.apply_multiplier(|i| {
            num_complex::Complex64::new((-tf::norm2(&t.k[i])).powi(s as i32), 0.0)
        });
        let g2 = gw.norm_sq();
        let limiter = g2.map(|x| (1.0 + x) * x);
        params.eps * (tf::integrate(&lap_s.norm_sq())? + tf::integrate(&limiter)?)
    } else {
        0.0
    };

    let (diss_drag, drag_cross) = if set.drag > 0.0 {
        let u = recover_u(state, params, set)?;
        let speed = u.norm_sq().map(f64::sqrt);
        let cube = speed.zip_with(rho, |s, r| r * s * s * s)?;
        let gp = grad_phi(rho, set)?;
        let cross = u
            .dot(&gp)?
            .zip_with(&speed, |a, s| a * s)?
            .zip_with(rho, |a, r| a * r)?;
        (
            set.drag * tf::integrate(&cube)?,
            2.0 * k * set.drag * tf::integrate(&cross)?,
        )
    } else {
        (0.0, 0.0)
    };

    let mollifier_defect = if params.delta > 0.0 {
        let p = pointwise(rho, |r| set.pressure(r))?;
        let wd = tf::mollify(&state.w, params.delta)?;
        tf::inner(&p, &tf::div(&wd.sub(&state.w)?)?)?
    } else {
        0.0
    };

    Ok(Dissipation {
        diss_d,
        diss_a,
        diss_div,
        diss_pressure,
        diss_eps,
        diss_drag,
        mollifier_defect,
        drag_cross,
    })
}

/// `E(after) − E(before)` summed pointwise; the internal part uses
/// `ρ'e(ρ') − ρe(ρ) = (ρ' − ρ)·mean of (se)'` over `[ρ, ρ']`.
pub fn entropy_increment(
    before: &SolverState,
    after: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<f64> {
    let k = params.kappa;
    let mix = 0.5 * k * (1.0 - k);
    let d = before.grid().dim();
    let (r0, r1) = (before.rho.samples(), after.rho.samples());
    let mut total = 0.0;
    for i in 0..r0.len() {
        let (a, b) = (r0[i], r1[i]);
        let mut kin = 0.0;
        for c in 0..d {
            let (w0, w1) = (before.w.component(c)[i], after.w.component(c)[i]);
            let (v0, v1) = (before.v.component(c)[i], after.v.component(c)[i]);
            // ρ'x'² − ρx² = (ρ'−ρ)(x'²+x²)/2 + (ρ'+ρ)(x'−x)(x'+x)/2
            let diff = |x0: f64, x1: f64| {
                0.5 * (b - a) * (x1 * x1 + x0 * x0) + 0.5 * (b + a) * (x1 - x0) * (x1 + x0)
            };
            kin += 0.5 * diff(w0, w1) + mix * diff(v0, v1);
        }
        // nodes lie between two positive densities, so only the endpoints can fail
        set.energy_density_prime(a)?;
        set.energy_density_prime(b)?;
        let h = gauss3_mean(|s| set.energy_density_prime(s).unwrap_or(f64::NAN), a, b);
        total += kin + (b - a) * h;
    }
    Ok(total * before.grid().cell_volume())
}

/// Normalized defect `|ΔE/Δt + D + P + X| / reference` of one step.
pub fn balance_residual(
    before: &SolverState,
    after: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
    reference: f64,
) -> Result<f64> {
    let dt = after.t - before.t;
    if !(dt > 0.0) {
        return Ok(0.0);
    }
    let de = entropy_increment(before, after, params, set)?;
    let mid = before.midpoint(after)?;
    let diss = dissipation(&mid, params, set)?;
    let defect = de / dt + diss.total() + diss.mollifier_defect + diss.drag_cross;
    Ok(defect.abs() / reference)
}

/// Diagnostics of `state`; with `previous` the residual of the step
/// `previous → state` is included and the dissipation integrals refer to
/// the midpoint of that step.
pub fn report(
    state: &SolverState,
    previous: Option<&SolverState>,
    params: &SolverParams,
    set: &ConstitutiveSet,
    reference: f64,
) -> Result<EntropyReport> {
    let (kinetic_mixture, internal) = entropy_parts(state, params, set)?;
    let (diss, residual) = match previous {
        Some(prev) => (
            dissipation(&prev.midpoint(state)?, params, set)?,
            balance_residual(prev, state, params, set, reference)?,
        ),
        None => (dissipation(state, params, set)?, 0.0),
    };
    Ok(EntropyReport {
        time: state.t,
        entropy: kinetic_mixture + internal,
        kinetic_mixture,
        internal,
        diss_d: diss.diss_d,
        diss_a: diss.diss_a,
        diss_div: diss.diss_div,
        diss_pressure: diss.diss_pressure,
        diss_eps: diss.diss_eps,
        diss_drag: diss.diss_drag,
        residual,
    })
}

/// `|κ|a+b|² + (1−κ)|a|² − |a+κb|² − (1−κ)κ|b|²|`.
pub fn mixture_identity_gap(a: &[f64], b: &[f64], kappa: f64) -> f64 {
    let sq = |x: &dyn Fn(usize) -> f64| (0..a.len()).map(|i| x(i) * x(i)).sum::<f64>();
    let lhs = kappa * sq(&|i| a[i] + b[i]) + (1.0 - kappa) * sq(&|i| a[i]);
    let rhs = sq(&|i| a[i] + kappa * b[i]) + (1.0 - kappa) * kappa * sq(&|i| b[i]);
    (lhs - rhs).abs()
}

/// The three functionals compared by [`convex_combination_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Functionals {
    /// κ-entropy with `v = 2∇φ(ρ)`.
    pub kappa_entropy: f64,
    /// `∫ρ|u|²/2 + ∫ρe`.
    pub energy: f64,
    /// `∫ρ|u + 2∇φ(ρ)|²/2 + ∫ρe`.
    pub bd_entropy: f64,
}

/// Evaluate the κ-entropy, energy and BD entropy of `state` with the drift
/// replaced by `2∇φ(ρ)`. `kappa` may be either endpoint of `[0, 1]`.
pub fn functionals(state: &SolverState, set: &ConstitutiveSet, kappa: f64) -> Result<Functionals> {
    let params = SolverParams::diagnostic(kappa)?;
    let v = grad_phi(&state.rho, set)?.scale(2.0);
    let u = state.w.axpy(-kappa, &v)?;
    let internal = tf::integrate(&pointwise(&state.rho, |r| Ok(r * set.internal_energy(r)?))?)?;
    let kinetic = |f: &PeriodicField| -> Result<f64> {
        Ok(0.5 * tf::integrate(&f.norm_sq().mul_scalar_field(&state.rho)?)?)
    };
    let enforced = SolverState::new(state.t, state.rho.clone(), state.w.clone(), v.clone())?;
    Ok(Functionals {
        kappa_entropy: kappa_entropy(&enforced, &params, set)?,
        energy: kinetic(&u)? + internal,
        bd_entropy: kinetic(&u.add(&v)?)? + internal,
    })
}

/// `|E_κ − (1−κ)E_0 − κE_1|`.
pub fn convex_combination_check(
    state: &SolverState,
    set: &ConstitutiveSet,
    kappa: f64,
) -> Result<f64> {
    let f = functionals(state, set, kappa)?;
    Ok((f.kappa_entropy - (1.0 - kappa) * f.energy - kappa * f.bd_entropy).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{PressureLaw, ViscosityLaw};
    use crate::torus_fields::{GridSpec, Rank};
    use std::f64::consts::PI;

    fn set() -> ConstitutiveSet {
        ConstitutiveSet::new(ViscosityLaw::Linear, PressureLaw::gamma_law(1.0, 2.0).unwrap())
    }

    fn uniform(g: GridSpec, w: f64, v: f64) -> SolverState {
        SolverState::new(
            0.0,
            PeriodicField::constant(g, 1.0),
            PeriodicField::vector_from_fn(g, |_, _| w),
            PeriodicField::vector_from_fn(g, |_, _| v),
        )
        .unwrap()
    }

    #[test]
    fn entropy_at_rest() {
        let g = GridSpec::new(1, 16).unwrap();
        let p = SolverParams::new(0.5, 1e-3, 1.0).unwrap();
        let e = kappa_entropy(&uniform(g, 0.0, 0.0), &p, &set()).unwrap();
        assert!((e - 2.0 * PI).abs() < 1e-13);
    }

    #[test]
    fn kinetic_mixture_values() {
        let g = GridSpec::new(1, 16).unwrap();
        let p = SolverParams::new(0.5, 1e-3, 1.0).unwrap();
        let c = 0.8;
        let (kin, _) = entropy_parts(&uniform(g, c, c), &p, &set()).unwrap();
        assert!((kin - (c * c / 2.0 + 0.25 * c * c / 2.0) * 2.0 * PI).abs() < 1e-13);
        let (k1, _) = entropy_parts(&uniform(g, c, 0.0), &p, &set()).unwrap();
        let (k2, _) = entropy_parts(&uniform(g, 2.0 * c, 0.0), &p, &set()).unwrap();
        assert!((k2 - 4.0 * k1).abs() < 1e-13);
    }

    #[test]
    fn equilibrium_residual_vanishes() {
        let g = GridSpec::new(1, 16).unwrap();
        let p = SolverParams::new(0.5, 1e-3, 1.0).unwrap();
        let a = uniform(g, 0.0, 0.0);
        let mut b = a.clone();
        b.t = 1e-3;
        assert!(balance_residual(&a, &b, &p, &set(), 2.0 * PI).unwrap() < 1e-14);
    }

    #[test]
    fn mixture_examples() {
        assert_eq!(mixture_identity_gap(&[1.0], &[2.0], 0.5), 0.0);
        assert_eq!(mixture_identity_gap(&[0.3, -1.0], &[2.0, 0.5], 0.0), 0.0);
    }

    #[test]
    fn convex_combination_endpoints() {
        let g = GridSpec::new(1, 32).unwrap();
        let rho = PeriodicField::scalar_from_fn(g, |x| 1.0 + 0.2 * x[0].sin());
        let w = PeriodicField::vector_from_fn(g, |x, _| 0.3 * (2.0 * x[0]).cos());
        let s = SolverState::new(0.0, rho, w, PeriodicField::zeros(g, Rank::Vector)).unwrap();
        assert!(convex_combination_check(&s, &set(), 0.0).unwrap() < 1e-14);
        let f = functionals(&s, &set(), 1.0).unwrap();
        assert!((f.kappa_entropy - f.bd_entropy).abs() < 1e-13);
        assert!(convex_combination_check(&s, &set(), 0.37).unwrap() < 1e-12);
    }
}
