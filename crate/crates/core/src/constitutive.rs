//! Viscosity, pressure and internal-energy laws together with the
//! parameter-admissibility validators used before any run starts.
//!
//! The second viscosity is never stored: it is always the Bresch–Desjardins
//! combination `λ(ρ) = 2(ρμ'(ρ) − μ(ρ))`. The potential `φ` solves
//! `φ'(s) = μ'(s)/s` and vanishes at a configurable reference density.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstitutiveError {
    #[error("density must be positive, got {0}")]
    NonPositiveDensity(f64),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
}

type Result<T> = std::result::Result<T, ConstitutiveError>;

fn check_rho(rho: f64) -> Result<()> {
    if rho > 0.0 && rho.is_finite() {
        Ok(())
    } else {
        Err(ConstitutiveError::NonPositiveDensity(rho))
    }
}

fn invalid(name: &'static str, reason: impl Into<String>) -> ConstitutiveError {
    ConstitutiveError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Density-dependent shear viscosity `μ(ρ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ViscosityLaw {
    /// `μ(ρ) = ρ`, hence `λ ≡ 0`.
    Linear,
    /// `μ(ρ) = coeff · ρ^m`.
    SinglePower { m: f64, coeff: f64 },
    /// `μ = c0 ρ^n` below `rho_star`, `μ = c_hi ρ^m` above, with `c_hi`
    /// fixed by continuity of `μ` at `rho_star`. `c1` is the envelope
    /// constant of the growth bounds and is only used by validators.
    PowerLawPair {
        n: f64,
        m: f64,
        c0: f64,
        c1: f64,
        rho_star: f64,
    },
}

impl ViscosityLaw {
    pub fn power_law_pair(n: f64, m: f64, c0: f64, c1: f64, rho_star: f64) -> Result<Self> {
        if !(n > 0.0 && m > 0.0) {
            return Err(invalid("n/m", "exponents must be positive"));
        }
        if !(c0 > 0.0 && c1 > 0.0) {
            return Err(invalid("c0/c1", "coefficients must be positive"));
        }
        if !(rho_star > 0.0) {
            return Err(invalid("rho_star", "threshold density must be positive"));
        }
        Ok(Self::PowerLawPair {
            n,
            m,
            c0,
            c1,
            rho_star,
        })
    }

    pub fn single_power(m: f64, coeff: f64) -> Result<Self> {
        if !(m > 0.0) {
            return Err(invalid("m", "exponent must be positive"));
        }
        if !(coeff > 0.0) {
            return Err(invalid("coeff", "coefficient must be positive"));
        }
        Ok(Self::SinglePower { m, coeff })
    }

    /// Piecewise power description `(coefficient, exponent)` of the branch
    /// containing `rho`.
    fn branch(&self, rho: f64) -> (f64, f64) {
        match *self {
            Self::Linear => (1.0, 1.0),
            Self::SinglePower { m, coeff } => (coeff, m),
            Self::PowerLawPair {
                n,
                m,
                c0,
                rho_star,
                ..
            } => {
                if rho <= rho_star {
                    (c0, n)
                } else {
                    (c0 * rho_star.powf(n - m), m)
                }
            }
        }
    }

    fn mu_unchecked(&self, rho: f64) -> f64 {
        match self {
            Self::Linear => rho,
            _ => {
                let (c, p) = self.branch(rho);
                c * rho.powf(p)
            }
        }
    }

    fn mu_prime_unchecked(&self, rho: f64) -> f64 {
        match self {
            Self::Linear => 1.0,
            _ => {
                let (c, p) = self.branch(rho);
                c * p * rho.powf(p - 1.0)
            }
        }
    }

    fn mu_second_unchecked(&self, rho: f64) -> f64 {
        match self {
            Self::Linear => 0.0,
            _ => {
                let (c, p) = self.branch(rho);
                c * p * (p - 1.0) * rho.powf(p - 2.0)
            }
        }
    }

    /// `∫_a^b μ'(s)/s ds` for `a, b` inside one branch.
    fn phi_increment_branch(c: f64, p: f64, a: f64, b: f64) -> f64 {
        if (p - 1.0).abs() < 1e-14 {
            c * (b / a).ln()
        } else {
            c * p / (p - 1.0) * (b.powf(p - 1.0) - a.powf(p - 1.0))
        }
    }

    /// `∫_a^b μ'(s)/s ds` in closed form, splitting at the branch threshold.
    fn phi_increment(&self, a: f64, b: f64) -> f64 {
        match *self {
            Self::Linear => (b / a).ln(),
            Self::SinglePower { m, coeff } => Self::phi_increment_branch(coeff, m, a, b),
            Self::PowerLawPair { rho_star, .. } => {
                let (lo, hi, sign) = if a <= b { (a, b, 1.0) } else { (b, a, -1.0) };
                let mut total = 0.0;
                if lo < rho_star {
                    let top = hi.min(rho_star);
                    let (c, p) = self.branch(lo);
                    total += Self::phi_increment_branch(c, p, lo, top);
                }
                if hi > rho_star {
                    let bottom = lo.max(rho_star);
                    let (c, p) = self.branch(hi);
                    total += Self::phi_increment_branch(c, p, bottom, hi);
                }
                sign * total
            }
        }
    }
}

/// Barotropic pressure law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PressureLaw {
    /// `p = a ρ^γ`.
    GammaLaw { a: f64, gamma: f64 },
    /// Cold pressure, singular at vacuum: `p' = c1 ρ^{-γ⁻-1}` for
    /// `ρ ≤ ρ*` and `p' = c2 ρ^{γ⁺-1}` above. `c2` is derived from `c1`
    /// so that `p'` is continuous at `ρ*`.
    SingularCold {
        c1: f64,
        c2: f64,
        gamma_minus: f64,
        gamma_plus: f64,
        rho_star: f64,
    },
}

impl PressureLaw {
    pub fn gamma_law(a: f64, gamma: f64) -> Result<Self> {
        if !(a > 0.0) {
            return Err(invalid("a", "pressure coefficient must be positive"));
        }
        if !(gamma > 1.0) {
            return Err(invalid("gamma", "adiabatic exponent must exceed 1"));
        }
        Ok(Self::GammaLaw { a, gamma })
    }

    pub fn singular_cold(c1: f64, gamma_minus: f64, gamma_plus: f64, rho_star: f64) -> Result<Self> {
        if !(c1 > 0.0) {
            return Err(invalid("c1", "coefficient must be positive"));
        }
        if !(gamma_minus > 0.0) {
            return Err(invalid("gamma_minus", "must be positive"));
        }
        if !(gamma_plus > 1.0) {
            return Err(invalid("gamma_plus", "must exceed 1"));
        }
        if !(rho_star > 0.0) {
            return Err(invalid("rho_star", "threshold density must be positive"));
        }
        let c2 = c1 * rho_star.powf(-gamma_minus - gamma_plus);
        Ok(Self::SingularCold {
            c1,
            c2,
            gamma_minus,
            gamma_plus,
            rho_star,
        })
    }

    fn pressure_unchecked(&self, rho: f64) -> f64 {
        match *self {
            Self::GammaLaw { a, gamma } => a * rho.powf(gamma),
            Self::SingularCold {
                c1,
                c2,
                gamma_minus,
                gamma_plus,
                rho_star,
            } => {
                if rho > rho_star {
                    c2 * rho.powf(gamma_plus) / gamma_plus
                } else {
                    let p_star = c2 * rho_star.powf(gamma_plus) / gamma_plus;
                    p_star - c1 / gamma_minus * (rho.powf(-gamma_minus) - rho_star.powf(-gamma_minus))
                }
            }
        }
    }

    fn pressure_prime_unchecked(&self, rho: f64) -> f64 {
        match *self {
            Self::GammaLaw { a, gamma } => a * gamma * rho.powf(gamma - 1.0),
            Self::SingularCold {
                c1,
                c2,
                gamma_minus,
                gamma_plus,
                rho_star,
            } => {
                if rho <= rho_star {
                    c1 * rho.powf(-gamma_minus - 1.0)
                } else {
                    c2 * rho.powf(gamma_plus - 1.0)
                }
            }
        }
    }

    fn internal_energy_unchecked(&self, rho: f64) -> f64 {
        match *self {
            Self::GammaLaw { a, gamma } => a * rho.powf(gamma - 1.0) / (gamma - 1.0),
            Self::SingularCold {
                c1,
                c2,
                gamma_minus,
                gamma_plus,
                rho_star,
            } => {
                let upper = |r: f64| c2 * r.powf(gamma_plus - 1.0) / ((gamma_plus - 1.0) * gamma_plus);
                if rho > rho_star {
                    upper(rho)
                } else {
                    // below ρ*: p(s) = A − (c1/γ⁻) s^{−γ⁻}, e' = p/s²
                    let p_star = c2 * rho_star.powf(gamma_plus) / gamma_plus;
                    let a = p_star + c1 / gamma_minus * rho_star.powf(-gamma_minus);
                    let anti = |s: f64| {
                        -a / s + c1 / (gamma_minus * (gamma_minus + 1.0)) * s.powf(-gamma_minus - 1.0)
                    };
                    upper(rho_star) - anti(rho_star) + anti(rho)
                }
            }
        }
    }
}

/// Admissible density window for sampled invariant checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityRange {
    pub min: f64,
    pub max: f64,
}

impl Default for DensityRange {
    fn default() -> Self {
        Self { min: 1e-4, max: 1e4 }
    }
}

impl DensityRange {
    /// `count` log-spaced samples, endpoints included.
    pub fn log_grid(&self, count: usize) -> Vec<f64> {
        let (a, b) = (self.min.ln(), self.max.ln());
        (0..count)
            .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
            .collect()
    }
}

/// Full constitutive description of one barotropic fluid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstitutiveSet {
    pub viscosity: ViscosityLaw,
    pub pressure: PressureLaw,
    /// Turbulent drag coefficient `r1`; zero disables drag.
    pub drag: f64,
    /// Density at which `φ` vanishes.
    pub phi_reference: f64,
}

impl ConstitutiveSet {
    pub fn new(viscosity: ViscosityLaw, pressure: PressureLaw) -> Self {
        Self {
            viscosity,
            pressure,
            drag: 0.0,
            phi_reference: 1.0,
        }
    }

    pub fn with_drag(mut self, r1: f64) -> Result<Self> {
        if !(r1 >= 0.0) {
            return Err(invalid("drag", "drag coefficient must be nonnegative"));
        }
        self.drag = r1;
        Ok(self)
    }

    pub fn with_phi_reference(mut self, rho_ref: f64) -> Result<Self> {
        check_rho(rho_ref).map_err(|_| invalid("phi_reference", "must be positive"))?;
        self.phi_reference = rho_ref;
        Ok(self)
    }

    pub fn mu(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.viscosity.mu_unchecked(rho))
    }

    pub fn mu_prime(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.viscosity.mu_prime_unchecked(rho))
    }

    pub fn mu_second(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.viscosity.mu_second_unchecked(rho))
    }

    /// Bresch–Desjardins second viscosity `2(ρμ' − μ)`.
    pub fn lambda_bd(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(2.0 * self.degeneracy_unchecked(rho))
    }

    /// `λ'(ρ) = 2ρμ''(ρ)`.
    pub fn lambda_prime(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(2.0 * rho * self.viscosity.mu_second_unchecked(rho))
    }

    /// `ρμ'(ρ) − μ(ρ)`, the coefficient of the divergence terms.
    pub fn degeneracy(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.degeneracy_unchecked(rho))
    }

    fn degeneracy_unchecked(&self, rho: f64) -> f64 {
        self.viscosity.mu_prime_unchecked(rho) * rho - self.viscosity.mu_unchecked(rho)
    }

    /// `3λ + 2μ`; nonnegative values are required by the existence theory.
    pub fn bulk_combination(&self, rho: f64) -> Result<f64> {
        Ok(3.0 * self.lambda_bd(rho)? + 2.0 * self.mu(rho)?)
    }

    /// `φ(ρ)` with `φ' = μ'/ρ`, closed form.
    pub fn phi(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.viscosity.phi_increment(self.phi_reference, rho))
    }

    /// `φ(ρ)` by adaptive quadrature of `μ'(s)/s`; independent of the
    /// closed forms and used to cross-check them.
    pub fn phi_by_quadrature(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        let f = |s: f64| self.viscosity.mu_prime_unchecked(s) / s;
        let (a, b) = (self.phi_reference, rho);
        let mut total = 0.0;
        // split at the branch threshold so the integrand is smooth on each piece
        let mut cuts = vec![a.min(b), a.max(b)];
        if let ViscosityLaw::PowerLawPair { rho_star, .. } = self.viscosity {
            if rho_star > cuts[0] && rho_star < cuts[1] {
                cuts.insert(1, rho_star);
            }
        }
        for pair in cuts.windows(2) {
            total += crate::quadrature::adaptive_simpson(&f, pair[0], pair[1], 1e-13);
        }
        Ok(if b >= a { total } else { -total })
    }

    /// Multiplier turning `∇ρ` into `∇φ(ρ)`: `μ'(ρ)/ρ`.
    pub fn grad_phi_factor(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.viscosity.mu_prime_unchecked(rho) / rho)
    }

    pub fn pressure(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.pressure.pressure_unchecked(rho))
    }

    pub fn pressure_prime(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.pressure.pressure_prime_unchecked(rho))
    }

    /// Specific internal energy with `ρ² e' = p`.
    pub fn internal_energy(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.pressure.internal_energy_unchecked(rho))
    }

    /// Enthalpy-like derivative `(ρe)' = e + p/ρ`.
    pub fn energy_density_prime(&self, rho: f64) -> Result<f64> {
        check_rho(rho)?;
        Ok(self.pressure.internal_energy_unchecked(rho) + self.pressure.pressure_unchecked(rho) / rho)
    }

    /// Sampled check of the pointwise invariants of the set on `range`.
    pub fn check_invariants(&self, range: DensityRange, samples: usize) -> InvariantReport {
        let grid = range.log_grid(samples);
        let mut min_mu_prime = f64::INFINITY;
        let mut pressure_monotone = true;
        let mut energy_nonnegative = true;
        let mut bulk_nonnegative = true;
        for &r in &grid {
            min_mu_prime = min_mu_prime.min(self.viscosity.mu_prime_unchecked(r));
            pressure_monotone &= self.pressure.pressure_prime_unchecked(r) > 0.0;
            energy_nonnegative &= r * self.pressure.internal_energy_unchecked(r) >= 0.0;
            bulk_nonnegative &= 3.0 * 2.0 * self.degeneracy_unchecked(r)
                + 2.0 * self.viscosity.mu_unchecked(r)
                >= 0.0;
        }
        InvariantReport {
            min_mu_prime,
            pressure_monotone,
            energy_nonnegative,
            bulk_nonnegative,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantReport {
    /// Smallest sampled `μ'`; must be bounded away from zero.
    pub min_mu_prime: f64,
    pub pressure_monotone: bool,
    /// `ρe(ρ) ≥ 0` on the sampled range.
    pub energy_nonnegative: bool,
    /// `3λ + 2μ ≥ 0` on the sampled range.
    pub bulk_nonnegative: bool,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.min_mu_prime > 0.0 && self.pressure_monotone && self.energy_nonnegative
    }
}

/// One named inequality with the value that was tested and its threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidityReport {
    pub checks: Vec<Check>,
}

impl ValidityReport {
    fn push(&mut self, name: &'static str, passed: bool, value: f64, threshold: f64) {
        self.checks.push(Check {
            name,
            passed,
            value,
            threshold,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Binding threshold on `γ⁻`: `2n(3m−2)/(4m−3) − 1`.
pub fn gamma_minus_threshold(n: f64, m: f64) -> f64 {
    2.0 * n * (3.0 * m - 2.0) / (4.0 * m - 3.0) - 1.0
}

/// Exponent constraints for the singular-pressure existence result:
/// `m > 3/4`, `2/3 < n < (γ⁻+1)/2`, `γ⁺ > 1`, `γ⁻ > 2n(3m−2)/(4m−3) − 1`.
pub fn validate_exponents(n: f64, m: f64, gamma_minus: f64, gamma_plus: f64) -> ValidityReport {
    let mut report = ValidityReport::default();
    report.push("m > 3/4", m > 0.75, m, 0.75);
    report.push("n > 2/3", n > 2.0 / 3.0, n, 2.0 / 3.0);
    let n_upper = (gamma_minus + 1.0) / 2.0;
    report.push("n < (gamma_minus+1)/2", n < n_upper, n, n_upper);
    report.push("gamma_plus > 1", gamma_plus > 1.0, gamma_plus, 1.0);
    let threshold = if m > 0.75 {
        gamma_minus_threshold(n, m)
    } else {
        f64::INFINITY
    };
    report.push(
        "gamma_minus > 2n(3m-2)/(4m-3) - 1",
        gamma_minus > threshold,
        gamma_minus,
        threshold,
    );
    report
}

/// Growth bounds of the singular-pressure setting, reported separately from
/// the drag sandwich: for `s < ρ*`, `μ(s) ≥ c0 s^n` and `3λ + 2μ ≥ s^n`;
/// for `s ≥ ρ*`, `c1 s^m ≤ μ, 3λ + 2μ ≤ s^m / c1`.
pub fn validate_viscosity_growth(
    set: &ConstitutiveSet,
    n: f64,
    m: f64,
    c0: f64,
    c1: f64,
    rho_star: f64,
    range: DensityRange,
) -> ValidityReport {
    let mut report = ValidityReport::default();
    let v = &set.viscosity;
    let grid = range.log_grid(401);
    let mut worst = [f64::INFINITY; 4];
    for &s in &grid {
        let mu = v.mu_unchecked(s);
        let bulk = 6.0 * (v.mu_prime_unchecked(s) * s - mu) + 2.0 * mu;
        if s < rho_star {
            let floor = s.powf(n);
            worst[0] = worst[0].min(mu - c0 * floor);
            worst[1] = worst[1].min(bulk - floor);
        } else {
            let sm = s.powf(m);
            worst[2] = worst[2].min((mu - c1 * sm).min(sm / c1 - mu));
            worst[3] = worst[3].min((bulk - c1 * sm).min(sm / c1 - bulk));
        }
    }
    let tol = |x: f64| x >= -1e-12 || x == f64::INFINITY;
    report.push("mu >= c0 s^n below rho_star", tol(worst[0]), worst[0], 0.0);
    report.push("3 lambda + 2 mu >= s^n below rho_star", tol(worst[1]), worst[1], 0.0);
    report.push("c1 s^m <= mu <= s^m/c1 above rho_star", tol(worst[2]), worst[2], 0.0);
    report.push(
        "c1 s^m <= 3 lambda + 2 mu <= s^m/c1 above rho_star",
        tol(worst[3]),
        worst[3],
        0.0,
    );
    report
}

/// Hypotheses of the drag setting on a sampled density grid:
/// `μ' ≥ ν`, `|λ'| ≤ μ'/ν`, `νμ ≤ 2μ + 3λ ≤ μ/ν`, `η ∈ (1/γ, 1)` and the
/// growth envelope `μ(ρ) ≤ C ρ^{2/3 + 1/(3η)}` for `ρ ≥ 1`.
pub fn validate_drag_hypotheses(
    set: &ConstitutiveSet,
    nu: f64,
    eta: f64,
    gamma: f64,
    range: DensityRange,
) -> ValidityReport {
    let mut report = ValidityReport::default();
    let v = &set.viscosity;
    let grid = range.log_grid(601);
    let mut min_gap_mu_prime = f64::INFINITY;
    let mut min_gap_lambda_prime = f64::INFINITY;
    let mut min_gap_lower = f64::INFINITY;
    let mut min_gap_upper = f64::INFINITY;
    for &r in &grid {
        let mu = v.mu_unchecked(r);
        let mp = v.mu_prime_unchecked(r);
        let lambda = 2.0 * (mp * r - mu);
        let lambda_p = 2.0 * r * v.mu_second_unchecked(r);
        let combo = 2.0 * mu + 3.0 * lambda;
        min_gap_mu_prime = min_gap_mu_prime.min(mp - nu);
        min_gap_lambda_prime = min_gap_lambda_prime.min(mp / nu - lambda_p.abs());
        // relative gaps so that large densities do not dominate
        min_gap_lower = min_gap_lower.min((combo - nu * mu) / mu);
        min_gap_upper = min_gap_upper.min((mu / nu - combo) / mu);
    }
    let ok = |gap: f64| gap >= -1e-12;
    report.push("mu' >= nu", ok(min_gap_mu_prime), min_gap_mu_prime, 0.0);
    report.push(
        "|lambda'| <= mu'/nu",
        ok(min_gap_lambda_prime),
        min_gap_lambda_prime,
        0.0,
    );
    report.push("nu mu <= 2 mu + 3 lambda", ok(min_gap_lower), min_gap_lower, 0.0);
    report.push("2 mu + 3 lambda <= mu/nu", ok(min_gap_upper), min_gap_upper, 0.0);
    report.push(
        "eta in (1/gamma, 1)",
        eta > 1.0 / gamma && eta < 1.0,
        eta,
        1.0 / gamma,
    );

    // envelope: the log-log slope of μ over the top decade must not exceed
    // the allowed exponent
    let exponent = 2.0 / 3.0 + 1.0 / (3.0 * eta);
    let hi = range.max.max(10.0);
    let lo = hi / 10.0;
    let slope = (v.mu_unchecked(hi) / v.mu_unchecked(lo)).ln() / (hi / lo).ln();
    report.push(
        "mu <= C rho^(2/3 + 1/(3 eta)) for rho >= 1",
        slope <= exponent + 1e-9,
        slope,
        exponent,
    );
    report
}
