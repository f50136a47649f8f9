//! Pseudo-spectral integrator for the regularized two-velocity system.
//!
//! The right-hand sides are assembled in conservative form for
//! `(ρ, m = ρw, n = ρv)`; the stepper advances `ρ` conservatively and the
//! velocities through `∂t w = (∂t m − w ∂tρ)/ρ`, likewise for `v`.
//!
//! Time stepping is an integrating-factor form of the two-stage SSP
//! Runge–Kutta scheme. The integrating factor is the exact exponential of a
//! frozen-coefficient linear operator: density diffusion on `ρ`, and per
//! Fourier mode the coupled viscous block on `(w, v)` (split into the parts
//! longitudinal and transverse to `k`) plus hyperdiffusion on `w`. Frozen
//! coefficients are spatial maxima over the step-start state, so the
//! explicit remainder is dissipative.

use num_complex::Complex64;
use thiserror::Error;

use crate::constitutive::{ConstitutiveError, ConstitutiveSet};
use crate::entropy_diag::{self, EntropyReport};
use crate::torus_fields::{
    self as tf, hyperdiffusion_multiplier, FieldError, GridSpec, PeriodicField, Rank,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid solver parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("initial density touches vacuum: min rho = {min_rho:e}")]
    Vacuum { min_rho: f64 },
    #[error("density floor breached at t = {t}: min rho = {min_rho:e} < {floor:e}")]
    DensityFloor { t: f64, min_rho: f64, floor: f64 },
    #[error("non-finite value in the state at t = {t}")]
    NonFinite { t: f64 },
    #[error("CFL violated at t = {t}: courant number {courant:.4} exceeds {limit}")]
    Cfl { t: f64, courant: f64, limit: f64 },
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Constitutive(#[from] ConstitutiveError),
}

type Result<T> = std::result::Result<T, SolverError>;

fn bad(name: &'static str, reason: impl Into<String>) -> SolverError {
    SolverError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Numerical and model parameters of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverParams {
    pub kappa: f64,
    /// Coefficient of both the hyperdiffusion and the gradient limiter.
    pub eps: f64,
    /// Hyperdiffusion order; the operator is `Δ^{2s}`.
    pub s: u32,
    /// Mollifier width of the transport velocity.
    pub delta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub cfl_safety: f64,
    pub density_floor: f64,
}

impl SolverParams {
    /// Defaults: `ε = 0`, `s = 2`, `δ = 0`, dealiasing on, CFL safety 0.5,
    /// density floor `1e-8`.
    pub fn new(kappa: f64, dt: f64, t_end: f64) -> Result<Self> {
        let p = Self {
            kappa,
            eps: 0.0,
            s: 2,
            delta: 0.0,
            dt,
            t_end,
            dealias: true,
            cfl_safety: 0.5,
            density_floor: 1e-8,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameters for diagnostics only: `κ` may sit on either endpoint.
    pub fn diagnostic(kappa: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(bad("kappa", "diagnostic kappa must lie in [0,1]"));
        }
        Ok(Self {
            kappa,
            eps: 0.0,
            s: 2,
            delta: 0.0,
            dt: 1.0,
            t_end: 0.0,
            dealias: true,
            cfl_safety: 1.0,
            density_floor: 1e-8,
        })
    }

    pub fn with_eps(mut self, eps: f64, s: u32) -> Result<Self> {
        self.eps = eps;
        self.s = s;
        self.validate()?;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        self.delta = delta;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(bad("kappa", "κ must lie in (0,1)"));
        }
        if !(self.eps >= 0.0) {
            return Err(bad("eps", "must be nonnegative"));
        }
        if self.s < 2 {
            return Err(bad("s", "hyperdiffusion order must be at least 2"));
        }
        if !(self.delta >= 0.0) {
            return Err(bad("delta", "must be nonnegative"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(bad("dt", "must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(bad("t_end", "must be nonnegative"));
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(bad("cfl_safety", "must lie in (0,1]"));
        }
        if !(self.density_floor > 0.0) {
            return Err(bad("density_floor", "must be positive"));
        }
        Ok(())
    }
}

/// `(ρ, w, v)` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub t: f64,
    pub rho: PeriodicField,
    pub w: PeriodicField,
    pub v: PeriodicField,
}

impl SolverState {
    pub fn new(t: f64, rho: PeriodicField, w: PeriodicField, v: PeriodicField) -> Result<Self> {
        rho.expect_rank(Rank::Scalar)?;
        w.expect_rank(Rank::Vector)?;
        v.expect_rank(Rank::Vector)?;
        if rho.grid() != w.grid() || rho.grid() != v.grid() {
            return Err(FieldError::GridMismatch.into());
        }
        Ok(Self { t, rho, w, v })
    }

    pub fn grid(&self) -> &GridSpec {
        self.rho.grid()
    }

    pub fn mass(&self) -> f64 {
        tf::integrate(&self.rho).expect("density is scalar")
    }

    /// Fieldwise average of two states on one grid.
    pub fn midpoint(&self, other: &Self) -> Result<Self> {
        let avg = |a: &PeriodicField, b: &PeriodicField| a.zip_with(b, |x, y| 0.5 * (x + y));
        Ok(Self {
            t: 0.5 * (self.t + other.t),
            rho: avg(&self.rho, &other.rho)?,
            w: avg(&self.w, &other.w)?,
            v: avg(&self.v, &other.v)?,
        })
    }
}

/// Evaluate a pointwise constitutive function on every sample of `rho`.
pub(crate) fn pointwise(
    rho: &PeriodicField,
    f: impl Fn(f64) -> std::result::Result<f64, ConstitutiveError>,
) -> Result<PeriodicField> {
    let samples = rho
        .samples()
        .iter()
        .map(|&r| f(r))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(PeriodicField::scalar(*rho.grid(), samples)?)
}

/// `∇φ(ρ) = (μ'(ρ)/ρ) ∇ρ`.
pub fn grad_phi(rho: &PeriodicField, set: &ConstitutiveSet) -> Result<PeriodicField> {
    let factor = pointwise(rho, |r| set.grad_phi_factor(r))?;
    Ok(tf::grad(rho)?.mul_scalar_field(&factor)?)
}

/// Change of variables `w0 = u0 + 2κ∇φ(ρ0)`, `v0 = 2∇φ(ρ0)`.
pub fn initial_state(
    rho0: &PeriodicField,
    u0: &PeriodicField,
    kappa: f64,
    set: &ConstitutiveSet,
) -> Result<SolverState> {
    rho0.expect_rank(Rank::Scalar)?;
    u0.expect_rank(Rank::Vector)?;
    if rho0.grid() != u0.grid() {
        return Err(FieldError::GridMismatch.into());
    }
    if !(0.0..=1.0).contains(&kappa) {
        return Err(bad("kappa", "κ must lie in (0,1)"));
    }
    let min_rho = rho0.min();
    if !(min_rho > 0.0) || !rho0.is_finite() {
        return Err(SolverError::Vacuum { min_rho });
    }
    let gp = grad_phi(rho0, set)?;
    let w = u0.axpy(2.0 * kappa, &gp)?;
    let v = gp.scale(2.0);
    SolverState::new(0.0, rho0.clone(), w, v)
}

/// `u = w − 2κ∇φ(ρ)`.
pub fn recover_u(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<PeriodicField> {
    if params.kappa == 0.0 {
        return Ok(state.w.clone());
    }
    Ok(state.w.axpy(-2.0 * params.kappa, &grad_phi(&state.rho, set)?)?)
}

/// Quantities shared by all three right-hand sides.
struct Kinematics {
    rho: PeriodicField,
    w: PeriodicField,
    v: PeriodicField,
    mu: PeriodicField,
    /// `ρμ' − μ`.
    b: PeriodicField,
    /// `λ − 2κ(ρμ' − μ)`.
    big_lambda: PeriodicField,
    /// Effective flux `ρ[w]_δ − 2κ∇μ(ρ)`.
    flux: PeriodicField,
    /// `div(w − κv)`.
    div_mix: PeriodicField,
}

impl Kinematics {
    fn new(state: &SolverState, params: &SolverParams, set: &ConstitutiveSet) -> Result<Self> {
        let kappa = params.kappa;
        let rho = state.rho.clone();
        let mu = pointwise(&rho, |r| set.mu(r))?;
        let mup = pointwise(&rho, |r| set.mu_prime(r))?;
        // computed as μ'ρ − μ so it vanishes exactly for μ(ρ) = ρ
        let b = mup.zip_with(&rho, |a, r| a * r)?.sub(&mu)?;
        let lambda = b.scale(2.0);
        let big_lambda = lambda.axpy(-2.0 * kappa, &b)?;
        let wd = tf::mollify(&state.w, params.delta)?;
        let rho_wd = wd.mul_scalar_field(&rho)?;
        let flux = rho_wd.axpy(-2.0 * kappa, &tf::grad(&mu)?)?;
        let div_mix = tf::div(&state.w.axpy(-kappa, &state.v)?)?;
        Ok(Self {
            rho,
            w: state.w.clone(),
            v: state.v.clone(),
            mu,
            b,
            big_lambda,
            flux,
            div_mix,
        })
    }
}

/// Each contribution to `∂t(ρw)`.
#[derive(Debug, Clone)]
pub struct MomentumTerms {
    /// `−div(F ⊗ w)`.
    pub transport: PeriodicField,
    /// `∇((λ − 2κ(ρμ'−μ)) div(w − κv))`.
    pub lambda_bracket: PeriodicField,
    /// `2(1−κ) div(μ D(w))`.
    pub viscous_sym: PeriodicField,
    /// `2κ div(μ A(w))`.
    pub viscous_skew: PeriodicField,
    /// `−∇p(ρ)`.
    pub pressure: PeriodicField,
    /// `−2κ(1−κ) div(μ∇v)`.
    pub coupling: PeriodicField,
    /// `−r1 ρ|u|u`.
    pub drag: PeriodicField,
    /// `−ε Δ^{2s} w`.
    pub hyperdiffusion: PeriodicField,
    /// `ε div((1 + |∇w|²)∇w)`.
    pub limiter: PeriodicField,
}

impl MomentumTerms {
    pub fn named(&self) -> [(&'static str, &PeriodicField); 9] {
        [
            ("transport", &self.transport),
            ("lambda_bracket", &self.lambda_bracket),
            ("viscous_sym", &self.viscous_sym),
            ("viscous_skew", &self.viscous_skew),
            ("pressure", &self.pressure),
            ("coupling", &self.coupling),
            ("drag", &self.drag),
            ("hyperdiffusion", &self.hyperdiffusion),
            ("limiter", &self.limiter),
        ]
    }

    pub fn total(&self) -> PeriodicField {
        sum_fields(self.named().iter().map(|(_, f)| *f))
    }
}

/// Each contribution to `∂t(ρv)`.
#[derive(Debug, Clone)]
pub struct DriftTerms {
    /// `−div(F ⊗ v)`.
    pub transport: PeriodicField,
    /// `2κ div(μ∇v)`.
    pub viscous: PeriodicField,
    /// `−2∇((ρμ'−μ) div(w − κv))`.
    pub bracket: PeriodicField,
    /// `−2 div(μ∇ᵗw)`.
    pub transpose: PeriodicField,
}

impl DriftTerms {
    pub fn named(&self) -> [(&'static str, &PeriodicField); 4] {
        [
            ("transport", &self.transport),
            ("viscous", &self.viscous),
            ("bracket", &self.bracket),
            ("transpose", &self.transpose),
        ]
    }

    pub fn total(&self) -> PeriodicField {
        sum_fields(self.named().iter().map(|(_, f)| *f))
    }
}

fn sum_fields<'a>(mut it: impl Iterator<Item = &'a PeriodicField>) -> PeriodicField {
    let first = it.next().expect("at least one term").clone();
    it.fold(first, |acc, f| acc.add(f).expect("terms share one shape"))
}

fn maybe_dealias(f: PeriodicField, params: &SolverParams) -> PeriodicField {
    if params.dealias {
        f.dealias()
    } else {
        f
    }
}

fn continuity_from(k: &Kinematics, params: &SolverParams) -> Result<PeriodicField> {
    let out = tf::div(&k.flux)?.scale(-1.0);
    Ok(maybe_dealias(out, params))
}

fn momentum_from(
    k: &Kinematics,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<MomentumTerms> {
    let kappa = params.kappa;
    let grid = *k.rho.grid();
    let transport = tf::div(&k.w.outer(&k.flux)?)?.scale(-1.0);
    let lambda_bracket = tf::grad(&k.big_lambda.zip_with(&k.div_mix, |a, b| a * b)?)?;
    let viscous_sym =
        tf::div(&tf::sym_grad(&k.w)?.mul_scalar_field(&k.mu)?)?.scale(2.0 * (1.0 - kappa));
    let viscous_skew = tf::div(&tf::skew_grad(&k.w)?.mul_scalar_field(&k.mu)?)?.scale(2.0 * kappa);
    let p = pointwise(&k.rho, |r| set.pressure(r))?;
    let pressure = tf::grad(&p)?.scale(-1.0);
    let coupling =
        tf::div(&tf::grad(&k.v)?.mul_scalar_field(&k.mu)?)?.scale(-2.0 * kappa * (1.0 - kappa));

    let drag = if set.drag > 0.0 {
        let u = k.w.axpy(-2.0 * kappa, &grad_phi(&k.rho, set)?)?;
        let speed = u.norm_sq().map(f64::sqrt);
        let coeff = speed.zip_with(&k.rho, |s, r| -set.drag * r * s)?;
        u.mul_scalar_field(&coeff)?
    } else {
        PeriodicField::zeros(grid, Rank::Vector)
    };

    let (hyperdiffusion, limiter) = if params.eps > 0.0 {
        let s = params.s;
        let eps = params.eps;
        let tables = grid.tables();
        let hyper = k.w.apply_multiplier(|i| {
            let kabs = tf::norm2(&tables.k[i]).sqrt();
            Complex64::new(
                -hyperdiffusion_multiplier(s, eps, kabs).expect("s validated"),
                0.0,
            )
        });
        let gw = tf::grad(&k.w)?;
        let cubic = if params.dealias {
            let fine = tf::upsample(&gw, 2)?;
            let weight = fine.norm_sq().map(|x| 1.0 + x);
            tf::downsample(&fine.mul_scalar_field(&weight)?, &grid)?
        } else {
            let weight = gw.norm_sq().map(|x| 1.0 + x);
            gw.mul_scalar_field(&weight)?
        };
        (hyper, tf::div(&cubic)?.scale(eps))
    } else {
        (
            PeriodicField::zeros(grid, Rank::Vector),
            PeriodicField::zeros(grid, Rank::Vector),
        )
    };

    let d = |f: PeriodicField| maybe_dealias(f, params);
    Ok(MomentumTerms {
        transport: d(transport),
        lambda_bracket: d(lambda_bracket),
        viscous_sym: d(viscous_sym),
        viscous_skew: d(viscous_skew),
        pressure: d(pressure),
        coupling: d(coupling),
        drag: d(drag),
        hyperdiffusion: d(hyperdiffusion),
        limiter: d(limiter),
    })
}

fn drift_from(k: &Kinematics, params: &SolverParams) -> Result<DriftTerms> {
    let kappa = params.kappa;
    let transport = tf::div(&k.v.outer(&k.flux)?)?.scale(-1.0);
    let viscous = tf::div(&tf::grad(&k.v)?.mul_scalar_field(&k.mu)?)?.scale(2.0 * kappa);
    let bracket = tf::grad(&k.b.zip_with(&k.div_mix, |a, b| a * b)?)?.scale(-2.0);
    let transpose = tf::div(&tf::grad(&k.w)?.transpose()?.mul_scalar_field(&k.mu)?)?.scale(-2.0);
    let d = |f: PeriodicField| maybe_dealias(f, params);
    Ok(DriftTerms {
        transport: d(transport),
        viscous: d(viscous),
        bracket: d(bracket),
        transpose: d(transpose),
    })
}

/// `∂tρ = −div(ρ[w]_δ) + 2κΔμ(ρ)`.
pub fn continuity_rhs(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<PeriodicField> {
    continuity_from(&Kinematics::new(state, params, set)?, params)
}

/// Term-by-term right-hand side of `∂t(ρw)`.
pub fn momentum_rhs(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<MomentumTerms> {
    momentum_from(&Kinematics::new(state, params, set)?, params, set)
}

/// Term-by-term right-hand side of `∂t(ρv)`.
pub fn drift_rhs(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<DriftTerms> {
    drift_from(&Kinematics::new(state, params, set)?, params)
}

/// Unknowns `[ρ, w_0.., v_0..]` in spectral space.
type Unknowns = Vec<Vec<Complex64>>;

struct FrozenOperator {
    grid: GridSpec,
    kappa: f64,
    /// `2κ max μ'(ρ)`.
    rho_diffusion: f64,
    /// `max μ/ρ`.
    c_mu: f64,
    /// `max (ρμ'−μ)/ρ`.
    c_b: f64,
    /// `ε / min ρ`.
    c_eps: f64,
    s: u32,
}

/// `2×2` real matrix, row-major.
type Mat2 = [[f64; 2]; 2];

/// `e^{hM}` in closed form. Stiff blocks (one eigenvalue far more negative
/// than the other) are evaluated without cancellation, so decayed entries
/// come out near zero rather than at roundoff of the slow mode.
fn expm2(m: Mat2, h: f64) -> Mat2 {
    let s = 0.5 * (m[0][0] + m[1][1]);
    let hd = 0.5 * (m[0][0] - m[1][1]);
    let bc = m[0][1] * m[1][0];
    let disc = hd * hd + bc;
    if disc < 0.0 {
        let q = (-disc).sqrt();
        let e = (h * s).exp();
        let (alpha, beta) = (e * (h * q).cos(), e * (h * q).sin() / q);
        return [
            [alpha + beta * hd, beta * m[0][1]],
            [beta * m[1][0], alpha - beta * hd],
        ];
    }
    let q = disc.sqrt();
    if h * q < 1e-4 {
        // e^{hM} = α I + β (M − sI), series in hq
        let x = h * q;
        let e = (h * s).exp();
        let (alpha, beta) = (e * (1.0 + 0.5 * x * x), e * h * (1.0 + x * x / 6.0));
        return [
            [alpha + beta * hd, beta * m[0][1]],
            [beta * m[1][0], alpha - beta * hd],
        ];
    }
    // hd ∓ q, using (hd + q)(hd − q) = −bc for the small one
    let (hd_minus_q, hd_plus_q) = if hd >= 0.0 {
        let p = hd + q;
        (-bc / p, p)
    } else {
        let n = hd - q;
        (n, -bc / n)
    };
    // eigenvalues s ± q, using λ₁λ₂ = det for the small one
    let det = m[0][0] * m[1][1] - bc;
    let (l1, l2) = if s >= 0.0 {
        let a = s + q;
        (a, det / a)
    } else {
        let b = s - q;
        (det / b, b)
    };
    let (e1, e2) = ((h * l1).exp(), (h * l2).exp());
    let inv = 0.5 / q;
    let off = (e1 - e2) * inv;
    [
        [(e1 * hd_plus_q - e2 * hd_minus_q) * inv, m[0][1] * off],
        [m[1][0] * off, (-e1 * hd_minus_q + e2 * hd_plus_q) * inv],
    ]
}

impl FrozenOperator {
    fn new(
        state: &SolverState,
        params: &SolverParams,
        set: &ConstitutiveSet,
    ) -> Result<Self> {
        let mut mup_max = f64::NEG_INFINITY;
        let mut c_mu = f64::NEG_INFINITY;
        let mut c_b = f64::NEG_INFINITY;
        for &r in state.rho.samples() {
            let mu = set.mu(r)?;
            let mup = set.mu_prime(r)?;
            mup_max = mup_max.max(mup);
            c_mu = c_mu.max(mu / r);
            c_b = c_b.max(mup - mu / r);
        }
        Ok(Self {
            grid: *state.grid(),
            kappa: params.kappa,
            rho_diffusion: 2.0 * params.kappa * mup_max,
            c_mu,
            c_b,
            c_eps: params.eps / state.rho.min(),
            s: params.s,
        })
    }

    /// Longitudinal and transverse `(w, v)` blocks at squared derivative
    /// wavenumber `k2` and hyperdiffusion symbol `hyper`.
    fn blocks(&self, k2: f64, hyper: f64) -> (Mat2, Mat2) {
        let kap = self.kappa;
        let cm = self.c_mu;
        let cb = self.c_b;
        let big = 2.0 * (1.0 - kap) * cb;
        let long = [
            [
                -k2 * (2.0 * (1.0 - kap) * cm + big) - hyper,
                k2 * (kap * big + 2.0 * kap * (1.0 - kap) * cm),
            ],
            [k2 * 2.0 * (cb + cm), -k2 * 2.0 * kap * (cm + cb)],
        ];
        let trans = [
            [-k2 * cm - hyper, k2 * 2.0 * kap * (1.0 - kap) * cm],
            [0.0, -k2 * 2.0 * kap * cm],
        ];
        (long, trans)
    }

    /// Apply `f(block)` mode by mode; `f` maps the generator to the matrix applied.
    fn apply(
        &self,
        u: &Unknowns,
        rho_map: impl Fn(f64) -> f64,
        block_map: impl Fn(Mat2) -> Mat2,
    ) -> Unknowns {
        let g = &self.grid;
        let d = g.dim();
        let tables = g.tables();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); g.len()]; 1 + 2 * d];
        for i in 0..g.len() {
            let kd = tables.k_deriv[i];
            let k2 = tf::norm2(&kd);
            let kf_abs = tf::norm2(&tables.k[i]).sqrt();
            let hyper = if self.c_eps > 0.0 {
                hyperdiffusion_multiplier(self.s, self.c_eps, kf_abs).expect("s validated")
            } else {
                0.0
            };
            out[0][i] = u[0][i] * rho_map(-self.rho_diffusion * k2);

            let (long, trans) = self.blocks(k2, hyper);
            let (bl, bt) = (block_map(long), block_map(trans));
            let m: Vec<Complex64> = (0..d).map(|c| u[1 + c][i]).collect();
            let n: Vec<Complex64> = (0..d).map(|c| u[1 + d + c][i]).collect();
            let khat: Vec<f64> = if k2 > 0.0 {
                let norm = k2.sqrt();
                (0..d).map(|c| kd[c] / norm).collect()
            } else {
                vec![0.0; d]
            };
            let proj = |x: &[Complex64]| -> Complex64 {
                x.iter().zip(&khat).map(|(a, &b)| a * b).sum()
            };
            let (ml, nl) = (proj(&m), proj(&n));
            for c in 0..d {
                let mt = m[c] - ml * khat[c];
                let nt = n[c] - nl * khat[c];
                out[1 + c][i] =
                    (ml * bl[0][0] + nl * bl[0][1]) * khat[c] + mt * bt[0][0] + nt * bt[0][1];
                out[1 + d + c][i] =
                    (ml * bl[1][0] + nl * bl[1][1]) * khat[c] + mt * bt[1][0] + nt * bt[1][1];
            }
        }
        out
    }

    fn generator(&self, u: &Unknowns) -> Unknowns {
        self.apply(u, |a| a, |m| m)
    }

    fn propagator(&self, u: &Unknowns, h: f64) -> Unknowns {
        self.apply(u, |a| (h * a).exp(), |m| expm2(m, h))
    }
}

fn unknowns(state: &SolverState) -> Unknowns {
    let mut out = vec![state.rho.spectrum()[0].clone()];
    out.extend(state.w.spectrum().iter().cloned());
    out.extend(state.v.spectrum().iter().cloned());
    out
}

fn primitive(u: Unknowns, grid: GridSpec, t: f64, floor: f64) -> Result<SolverState> {
    let d = grid.dim();
    let mut it = u.into_iter();
    let rho = PeriodicField::from_spectrum(grid, Rank::Scalar, vec![it.next().expect("rho")]);
    let w = PeriodicField::from_spectrum(grid, Rank::Vector, it.by_ref().take(d).collect());
    let v = PeriodicField::from_spectrum(grid, Rank::Vector, it.collect());
    if !(rho.is_finite() && w.is_finite() && v.is_finite()) {
        return Err(SolverError::NonFinite { t });
    }
    let min_rho = rho.min();
    if min_rho < floor {
        return Err(SolverError::DensityFloor { t, min_rho, floor });
    }
    SolverState::new(t, rho, w, v)
}

/// Time derivative of `[ρ, w, v]` in spectral space; the density zero mode
/// is pinned to 0.
fn rhs_spectral(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<Unknowns> {
    let k = Kinematics::new(state, params, set)?;
    let drho = continuity_from(&k, params)?;
    let inv_rho = state.rho.map(|r| 1.0 / r);
    // ∂t x = (∂t(ρx) − x ∂tρ)/ρ
    let velocity_rate = |cons: PeriodicField, x: &PeriodicField| -> Result<PeriodicField> {
        let rate = cons
            .sub(&x.mul_scalar_field(&drho)?)?
            .mul_scalar_field(&inv_rho)?;
        Ok(maybe_dealias(rate, params))
    };
    let dw = velocity_rate(momentum_from(&k, params, set)?.total(), &state.w)?;
    let dv = velocity_rate(drift_from(&k, params)?.total(), &state.v)?;
    let mut out = vec![drho.spectrum()[0].clone()];
    out[0][0] = Complex64::new(0.0, 0.0);
    out.extend(dw.spectrum().iter().cloned());
    out.extend(dv.spectrum().iter().cloned());
    Ok(out)
}

/// Zero the modes outside the dealiasing band; the right-hand side never
/// feeds them, so only roundoff is removed.
fn project(mut u: Unknowns, grid: &GridSpec, params: &SolverParams) -> Unknowns {
    if params.dealias {
        let t = grid.tables();
        for comp in &mut u {
            for (c, &keep) in comp.iter_mut().zip(&t.retained) {
                if !keep {
                    *c = Complex64::new(0.0, 0.0);
                }
            }
        }
    }
    u
}

fn combine(a: &Unknowns, ca: f64, b: &Unknowns, cb: f64) -> Unknowns {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * ca + q * cb).collect())
        .collect()
}

/// Courant number `dt (max|F/ρ| + max √p') / Δx`.
pub fn courant_number(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
    dt: f64,
) -> Result<f64> {
    let k = Kinematics::new(state, params, set)?;
    let speed = k
        .flux
        .norm_sq()
        .zip_with(&k.rho, |f2, r| f2.sqrt() / r)?
        .max();
    let sound = pointwise(&k.rho, |r| set.pressure_prime(r))?
        .map(|x| x.max(0.0).sqrt())
        .max();
    Ok(dt * (speed + sound) / state.grid().min_spacing())
}

/// One step of length `params.dt`.
pub fn step(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
) -> Result<SolverState> {
    step_with(state, params, set, params.dt)
}

/// One integrating-factor SSP-RK2 step of length `dt`.
pub fn step_with(
    state: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
    dt: f64,
) -> Result<SolverState> {
    let courant = courant_number(state, params, set, dt)?;
    if courant > params.cfl_safety {
        return Err(SolverError::Cfl {
            t: state.t,
            courant,
            limit: params.cfl_safety,
        });
    }
    let grid = *state.grid();
    let t1 = state.t + dt;
    let op = FrozenOperator::new(state, params, set)?;

    let u0 = unknowns(state);
    let n0 = combine(&rhs_spectral(state, params, set)?, 1.0, &op.generator(&u0), -1.0);
    let u1 = project(op.propagator(&combine(&u0, 1.0, &n0, dt), dt), &grid, params);
    let s1 = primitive(u1.clone(), grid, t1, params.density_floor)?;

    let n1 = combine(&rhs_spectral(&s1, params, set)?, 1.0, &op.generator(&u1), -1.0);
    let e_u0 = op.propagator(&u0, dt);
    let u2 = project(combine(&e_u0, 0.5, &combine(&u1, 1.0, &n1, dt), 0.5), &grid, params);
    primitive(u2, grid, t1, params.density_floor)
}

/// Global quantities of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateSummary {
    pub t: f64,
    pub mass: f64,
    pub min_rho: f64,
    pub max_rho: f64,
    /// `‖v − 2∇φ(ρ)‖_{L²}`.
    pub drift_v: f64,
}

/// `‖v − 2∇φ(ρ)‖_{L²}`.
pub fn drift_defect(state: &SolverState, set: &ConstitutiveSet) -> Result<f64> {
    let gap = state.v.axpy(-2.0, &grad_phi(&state.rho, set)?)?;
    Ok(tf::inner(&gap, &gap)?.sqrt())
}

pub fn summarize(state: &SolverState, set: &ConstitutiveSet) -> Result<StateSummary> {
    Ok(StateSummary {
        t: state.t,
        mass: state.mass(),
        min_rho: state.rho.min(),
        max_rho: state.rho.max(),
        drift_v: drift_defect(state, set)?,
    })
}

/// Reports at fixed step intervals plus the final state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub rows: Vec<(StateSummary, EntropyReport)>,
    pub final_state: SolverState,
    pub steps: usize,
}

/// Step sizes covering `[t, t_end]`: `dt` repeated, last one shortened.
fn schedule(t: f64, t_end: f64, dt: f64) -> Vec<f64> {
    let span = t_end - t;
    if span <= 0.0 {
        return Vec::new();
    }
    let n = ((span / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut steps = vec![dt; n];
    steps[n - 1] = span - dt * (n - 1) as f64;
    steps
}

/// Advance `initial` to `params.t_end`, reporting every `report_every`
/// steps and at the final time. Reports at intermediate steps carry the
/// balance residual of the step that ended there.
pub fn run(
    initial: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
    report_every: usize,
) -> Result<Trajectory> {
    run_observed(initial, params, set, report_every, |_, _| {})
}

/// [`run`] with a callback invoked on every accepted step with the states
/// before and after it.
pub fn run_observed(
    initial: &SolverState,
    params: &SolverParams,
    set: &ConstitutiveSet,
    report_every: usize,
    mut observe: impl FnMut(&SolverState, &SolverState),
) -> Result<Trajectory> {
    params.validate()?;
    let report_every = report_every.max(1);
    let e0 = entropy_diag::kappa_entropy(initial, params, set)?;
    let reference = entropy_diag::normalization(e0);
    let mut rows = vec![(
        summarize(initial, set)?,
        entropy_diag::report(initial, None, params, set, reference)?,
    )];
    let plan = schedule(initial.t, params.t_end, params.dt);
    let mut state = initial.clone();
    for (i, &dt) in plan.iter().enumerate() {
        let next = step_with(&state, params, set, dt)?;
        observe(&state, &next);
        if (i + 1) % report_every == 0 || i + 1 == plan.len() {
            rows.push((
                summarize(&next, set)?,
                entropy_diag::report(&next, Some(&state), params, set, reference)?,
            ));
        }
        state = next;
    }
    Ok(Trajectory {
        rows,
        final_state: state,
        steps: plan.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constitutive::{PressureLaw, ViscosityLaw};

    fn linear_set() -> ConstitutiveSet {
        ConstitutiveSet::new(ViscosityLaw::Linear, PressureLaw::gamma_law(1.0, 2.0).unwrap())
    }

    fn line(n: usize) -> GridSpec {
        GridSpec::new(1, n).unwrap()
    }

    #[test]
    fn constant_density_gives_zero_initial_velocities() {
        let g = line(16);
        let s = initial_state(
            &PeriodicField::constant(g, 1.0),
            &PeriodicField::zeros(g, Rank::Vector),
            0.5,
            &linear_set(),
        )
        .unwrap();
        assert_eq!(s.w.max_abs(), 0.0);
        assert_eq!(s.v.max_abs(), 0.0);
    }

    #[test]
    fn log_density_initial_drift() {
        let g = line(64);
        let rho0 = PeriodicField::scalar_from_fn(g, |x| x[0].sin().exp());
        let s = initial_state(&rho0, &PeriodicField::zeros(g, Rank::Vector), 0.5, &linear_set())
            .unwrap();
        for i in 0..g.len() {
            assert!((s.w.component(0)[i] - g.coords(i)[0].cos()).abs() < 1e-12);
        }
    }

    #[test]
    fn vacuum_is_rejected() {
        let g = line(16);
        let rho0 = PeriodicField::scalar_from_fn(g, |x| x[0].cos());
        let err = initial_state(&rho0, &PeriodicField::zeros(g, Rank::Vector), 0.5, &linear_set());
        assert!(matches!(err, Err(SolverError::Vacuum { .. })));
    }

    #[test]
    fn linear_density_diffusion() {
        let g = line(64);
        let set = linear_set();
        let rho = PeriodicField::scalar_from_fn(g, |x| 1.0 + 0.1 * x[0].cos());
        let z = PeriodicField::zeros(g, Rank::Vector);
        let state = SolverState::new(0.0, rho, z.clone(), z).unwrap();
        let params = SolverParams::new(0.5, 1e-3, 1.0).unwrap();
        let r = continuity_rhs(&state, &params, &set).unwrap();
        for i in 0..g.len() {
            assert!((r.samples()[i] + 0.1 * g.coords(i)[0].cos()).abs() < 1e-10);
        }
    }

    #[test]
    fn hyperdiffusion_of_cosine() {
        let g = line(32);
        let set = ConstitutiveSet::new(ViscosityLaw::Linear, PressureLaw::gamma_law(1.0, 2.0).unwrap());
        let w = PeriodicField::vector_from_fn(g, |x, _| x[0].cos());
        let z = PeriodicField::zeros(g, Rank::Vector);
        let state = SolverState::new(0.0, PeriodicField::constant(g, 1.0), w, z).unwrap();
        let params = SolverParams::new(0.5, 1e-3, 1.0).unwrap().with_eps(1e-3, 2).unwrap();
        let terms = momentum_rhs(&state, &params, &set).unwrap();
        for i in 0..g.len() {
            let want = -1e-3 * g.coords(i)[0].cos();
            // roundoff in retained high modes is amplified by ε|k|^8
            assert!((terms.hyperdiffusion.component(0)[i] - want).abs() < 1e-10);
        }
    }

    #[test]
    fn expm2_matches_series() {
        let m = [[-3.0, 1.5], [0.7, -0.4]];
        let h = 0.3;
        let mut term = [[1.0, 0.0], [0.0, 1.0]];
        let mut sum = term;
        for j in 1..40 {
            let next = [
                [
                    (term[0][0] * m[0][0] + term[0][1] * m[1][0]) * h / j as f64,
                    (term[0][0] * m[0][1] + term[0][1] * m[1][1]) * h / j as f64,
                ],
                [
                    (term[1][0] * m[0][0] + term[1][1] * m[1][0]) * h / j as f64,
                    (term[1][0] * m[0][1] + term[1][1] * m[1][1]) * h / j as f64,
                ],
            ];
            term = next;
            for a in 0..2 {
                for b in 0..2 {
                    sum[a][b] += term[a][b];
                }
            }
        }
        let e = expm2(m, h);
        for a in 0..2 {
            for b in 0..2 {
                assert!((e[a][b] - sum[a][b]).abs() < 1e-14);
            }
        }
        // complex eigenvalues
        let m = [[-1.0, -2.0], [3.0, -1.0]];
        let e = expm2(m, 0.5);
        let c = (-0.5f64).exp();
        let w = 6f64.sqrt();
        assert!((e[0][0] - c * (0.5 * w).cos()).abs() < 1e-14);
        assert!((e[0][1] + c * 2.0 / w * (0.5 * w).sin()).abs() < 1e-14);
    }

    #[test]
    fn expm2_stiff_block_has_no_cancellation() {
        let m = [[-1e10, 5e3], [1.6e4, -8e3]];
        let e = expm2(m, 4e-4);
        // 60-digit reference values
        let want = [
            [3.2609919709958e-14, 2.03811835137802e-8],
            [6.521978724409664e-8, 4.076233441769939e-2],
        ];
        for a in 0..2 {
            for b in 0..2 {
                assert!((e[a][b] / want[a][b] - 1.0).abs() < 1e-12, "entry {a}{b}: {}", e[a][b]);
            }
        }
    }

    #[test]
    fn schedule_covers_interval() {
        assert!(schedule(0.0, 0.0, 0.1).is_empty());
        let s = schedule(0.0, 1.0, 0.3);
        assert_eq!(s.len(), 4);
        assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert_eq!(schedule(0.0, 1.0, 0.25).len(), 4);
    }
}
