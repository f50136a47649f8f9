//! Linearized barotropic and heat-conducting systems around the constant
//! state, one Fourier mode at a time.
//!
//! A mode is represented by real standing waves
//! `ρ = q sin(k·x)`, `u = U cos(k·x)`, `θ = τ sin(k·x)`, so the state is the
//! real vector `z = (q, U, τ)` of length `1 + d` (`2 + d` with heat) and the
//! dynamics are `ż = M(k) z`. The second viscosity sits at the borderline
//! value `λ = −2μ/d`.
//!
//! Every quadratic functional is stored as a symmetric matrix `Q` together
//! with its dissipation matrix `R`, normalized so that
//! `d/dt zᵀQz = −2 zᵀRz`, i.e. `MᵀQ + QM = −2R`.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearError {
    #[error("invalid linear model parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("wavevector has {found} components, model dimension is {expected}")]
    WavevectorDimension { expected: usize, found: usize },
    #[error("eigenvalue iteration failed at k = {k:?}")]
    EigenFailure { k: Vec<f64> },
    #[error("initial state has {found} entries, mode system needs {expected}")]
    StateLength { expected: usize, found: usize },
}

type Result<T> = std::result::Result<T, LinearError>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinearKind {
    Barotropic,
    /// Heat-conducting, with conductivity `K`.
    Heat { conductivity: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearModel {
    pub kind: LinearKind,
    pub dim: usize,
    pub mu: f64,
    pub kappa: f64,
}

impl LinearModel {
    pub fn barotropic(dim: usize, mu: f64, kappa: f64) -> Result<Self> {
        Self::checked(LinearKind::Barotropic, dim, mu, kappa)
    }

    pub fn heat(dim: usize, mu: f64, kappa: f64, conductivity: f64) -> Result<Self> {
        if !(conductivity > 0.0 && conductivity.is_finite()) {
            return Err(LinearError::InvalidParameter {
                name: "conductivity",
                reason: "must be positive".into(),
            });
        }
        Self::checked(LinearKind::Heat { conductivity }, dim, mu, kappa)
    }

    fn checked(kind: LinearKind, dim: usize, mu: f64, kappa: f64) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(LinearError::InvalidParameter {
                name: "dim",
                reason: format!("{dim} not in 1..=3"),
            });
        }
        if !(mu > 0.0 && mu.is_finite()) {
            return Err(LinearError::InvalidParameter {
                name: "mu",
                reason: "must be positive".into(),
            });
        }
        if !kappa.is_finite() {
            return Err(LinearError::InvalidParameter {
                name: "kappa",
                reason: "must be finite".into(),
            });
        }
        Ok(Self {
            kind,
            dim,
            mu,
            kappa,
        })
    }

    pub fn conductivity(&self) -> Option<f64> {
        match self.kind {
            LinearKind::Heat { conductivity } => Some(conductivity),
            LinearKind::Barotropic => None,
        }
    }

    /// Length of the mode state vector.
    pub fn size(&self) -> usize {
        self.dim + if self.conductivity().is_some() { 2 } else { 1 }
    }

    /// `1 − 1/d − κ`, the coefficient of the divergence dissipation.
    pub fn div_coefficient(&self) -> f64 {
        1.0 - 1.0 / self.dim as f64 - self.kappa
    }

    fn wavevector(&self, k: &[f64]) -> Result<DVector<f64>> {
        if k.len() != self.dim {
            return Err(LinearError::WavevectorDimension {
                expected: self.dim,
                found: k.len(),
            });
        }
        Ok(DVector::from_column_slice(k))
    }

    fn theta(&self) -> Option<usize> {
        self.conductivity().map(|_| self.dim + 1)
    }
}

/// Symmetric pair `(Q, R)` with `MᵀQ + QM = −2R`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticPair {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

impl QuadraticPair {
    pub fn value(&self, z: &DVector<f64>) -> f64 {
        z.dot(&(&self.q * z))
    }

    pub fn dissipation(&self, z: &DVector<f64>) -> f64 {
        z.dot(&(&self.r * z))
    }

    /// Largest entry of `|MᵀQ + QM + 2R|`.
    pub fn identity_defect(&self, m: &DMatrix<f64>) -> f64 {
        (m.transpose() * &self.q + &self.q * m + &self.r * 2.0).amax()
    }

    /// Largest entry of `|MᵀQ|`, the natural scale of [`Self::identity_defect`].
    pub fn identity_scale(&self, m: &DMatrix<f64>) -> f64 {
        (m.transpose() * &self.q).amax()
    }
}

/// Lyapunov functional of a mode with its definiteness diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovForm {
    pub pair: QuadraticPair,
    pub min_eig_q: f64,
    pub min_eig_r: f64,
    pub admissible: bool,
}

impl LyapunovForm {
    pub fn q_positive_definite(&self) -> bool {
        self.min_eig_q > 0.0
    }

    /// Semidefinite up to roundoff relative to the size of `R`.
    pub fn r_positive_semidefinite(&self) -> bool {
        self.min_eig_r >= -1e-12 * self.pair.r.amax().max(1.0)
    }
}

/// `M(k)` and the Lyapunov pair of one wavevector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeSystem {
    pub k: Vec<f64>,
    pub matrix: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Assemble `M(k)` and the Lyapunov pair.
pub fn mode_matrix(model: &LinearModel, k: &[f64]) -> Result<ModeSystem> {
    let matrix = system_matrix(model, k)?;
    let pair = lyapunov_pair(model, k)?;
    Ok(ModeSystem {
        k: k.to_vec(),
        matrix,
        q: pair.q,
        r: pair.r,
    })
}

/// `ż = M(k) z` for `z = (q, U[, τ])`.
pub fn system_matrix(model: &LinearModel, k: &[f64]) -> Result<DMatrix<f64>> {
    let kv = model.wavevector(k)?;
    let d = model.dim;
    let mu = model.mu;
    let k2 = kv.norm_squared();
    let n = model.size();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..d {
        m[(0, 1 + i)] = kv[i];
        m[(1 + i, 0)] = -kv[i];
        m[(1 + i, 1 + i)] -= mu * k2;
        for j in 0..d {
            m[(1 + i, 1 + j)] -= mu * (1.0 - 2.0 / d as f64) * kv[i] * kv[j];
        }
    }
    if let (Some(t), Some(cond)) = (model.theta(), model.conductivity()) {
        for i in 0..d {
            m[(1 + i, t)] = -kv[i];
            m[(t, 1 + i)] = 2.0 / d as f64 * kv[i];
        }
        m[(t, t)] = -cond * k2;
    }
    Ok(m)
}

/// Rank-one contribution `c · a aᵀ`.
fn add_outer(target: &mut DMatrix<f64>, a: &DVector<f64>, c: f64) {
    *target += a * a.transpose() * c;
}

fn basis(n: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(n);
    e[i] = 1.0;
    e
}

/// Embedding of `k` into the velocity slots.
fn velocity_slot(n: usize, kv: &DVector<f64>) -> DVector<f64> {
    let mut a = DVector::zeros(n);
    a.rows_mut(1, kv.len()).copy_from(kv);
    a
}

/// `μ(|k|²|U|² − (k·U)²)` as a matrix.
fn transverse_velocity(n: usize, kv: &DVector<f64>, c: f64) -> DMatrix<f64> {
    let d = kv.len();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..d {
        m[(1 + i, 1 + i)] = c * kv.norm_squared();
    }
    add_outer(&mut m, &velocity_slot(n, kv), -c);
    m
}

/// κ-entropy functional: `Q = |U + 2κμ q k|² + q² + 4μ²κ(1−1/d−κ)|k|²q²
/// [+ (d/2)τ²]`.
fn lyapunov_pair(model: &LinearModel, k: &[f64]) -> Result<QuadraticPair> {
    let kv = model.wavevector(k)?;
    let n = model.size();
    let d = model.dim;
    let (mu, kap) = (model.mu, model.kappa);
    let k2 = kv.norm_squared();
    let c = model.div_coefficient();

    let mut q = DMatrix::zeros(n, n);
    // rows of the map z ↦ U + 2κμ q k
    for i in 0..d {
        let mut row = basis(n, 1 + i);
        row[0] = 2.0 * kap * mu * kv[i];
        add_outer(&mut q, &row, 1.0);
    }
    q[(0, 0)] += 1.0 + 4.0 * mu * mu * kap * c * k2;

    let ku = velocity_slot(n, &kv);
    let mut r = transverse_velocity(n, &kv, mu);
    add_outer(&mut r, &ku, 2.0 * mu * c);
    match (model.theta(), model.conductivity()) {
        (Some(t), Some(cond)) => {
            q[(t, t)] += d as f64 / 2.0;
            r[(0, 0)] += kap * mu * k2;
            r[(t, t)] += (d as f64 * cond / 2.0 - kap * mu) * k2;
            let mut sum = basis(n, 0);
            sum[t] = 1.0;
            add_outer(&mut r, &sum, kap * mu * k2);
        }
        _ => r[(0, 0)] += 2.0 * kap * mu * k2,
    }
    Ok(QuadraticPair { q, r })
}

fn min_symmetric_eigenvalue(m: &DMatrix<f64>, k: &[f64]) -> Result<f64> {
    let eig = SymmetricEigen::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| LinearError::EigenFailure { k: k.to_vec() })?;
    Ok(eig.eigenvalues.min())
}

/// κ-entropy pair with definiteness flags; returned also when `κ` is not
/// admissible.
pub fn lyapunov_form(model: &LinearModel, k: &[f64]) -> Result<LyapunovForm> {
    let pair = lyapunov_pair(model, k)?;
    Ok(LyapunovForm {
        min_eig_q: min_symmetric_eigenvalue(&pair.q, k)?,
        min_eig_r: min_symmetric_eigenvalue(&pair.r, k)?,
        admissible: kappa_admissible(model).passed(),
        pair,
    })
}

/// Standard energy `|U|² + q² [+ (d/2)τ²]`.
pub fn energy_form(model: &LinearModel, k: &[f64]) -> Result<QuadraticPair> {
    let kv = model.wavevector(k)?;
    let n = model.size();
    let d = model.dim as f64;
    let mu = model.mu;
    let mut q = DMatrix::identity(n, n);
    let mut r = DMatrix::zeros(n, n);
    for i in 0..model.dim {
        r[(1 + i, 1 + i)] = mu * kv.norm_squared();
    }
    add_outer(&mut r, &velocity_slot(n, &kv), mu * (1.0 - 2.0 / d));
    r[(0, 0)] = 0.0;
    if let (Some(t), Some(cond)) = (model.theta(), model.conductivity()) {
        q[(t, t)] = d / 2.0;
        r[(t, t)] = d * cond / 2.0 * kv.norm_squared();
    }
    Ok(QuadraticPair { q, r })
}

/// Gradient layer `(k·U)² + |k|²q² [+ (d/2)|k|²τ²]`, i.e. `|div u|² + |∇ρ|²
/// [+ (d/2)|∇θ|²]`.
pub fn h1_form(model: &LinearModel, k: &[f64]) -> Result<QuadraticPair> {
    let kv = model.wavevector(k)?;
    let n = model.size();
    let d = model.dim as f64;
    let k2 = kv.norm_squared();
    let ku = velocity_slot(n, &kv);
    let mut q = DMatrix::zeros(n, n);
    add_outer(&mut q, &ku, 1.0);
    q[(0, 0)] = k2;
    let mut r = DMatrix::zeros(n, n);
    add_outer(&mut r, &ku, 2.0 * model.mu * (1.0 - 1.0 / d) * k2);
    if let (Some(t), Some(cond)) = (model.theta(), model.conductivity()) {
        q[(t, t)] = d / 2.0 * k2;
        r[(t, t)] = d * cond / 2.0 * k2 * k2;
    }
    Ok(QuadraticPair { q, r })
}

/// Vorticity `|k|²|U|² − (k·U)²`, dissipated at rate `μ|k|²`.
pub fn curl_form(model: &LinearModel, k: &[f64]) -> Result<QuadraticPair> {
    let kv = model.wavevector(k)?;
    let n = model.size();
    let q = transverse_velocity(n, &kv, 1.0);
    let r = &q * (model.mu * kv.norm_squared());
    Ok(QuadraticPair { q, r })
}

/// One admissibility constraint `lower < value < upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub name: &'static str,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub constraints: Vec<Constraint>,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.constraints.iter().all(|c| c.passed)
    }
}

/// `0 < κ < (d−1)/d`; with heat also `0 < κμ < dK/2`.
pub fn kappa_admissible(model: &LinearModel) -> AdmissibilityReport {
    let d = model.dim as f64;
    let open = |name, value: f64, upper: f64| Constraint {
        name,
        value,
        lower: 0.0,
        upper,
        passed: value > 0.0 && value < upper,
    };
    let mut constraints = vec![open("0 < kappa < (d-1)/d", model.kappa, (d - 1.0) / d)];
    if let Some(cond) = model.conductivity() {
        constraints.push(open("0 < kappa mu < d K/2", model.kappa * model.mu, d * cond / 2.0));
    }
    AdmissibilityReport { constraints }
}

/// Eigenvalues of `M(k)` as complex numbers.
pub fn eigenvalues(model: &LinearModel, k: &[f64]) -> Result<Vec<num_complex::Complex64>> {
    let m = system_matrix(model, k)?;
    let schur = Schur::try_new(m, 1e-15, 10_000)
        .ok_or_else(|| LinearError::EigenFailure { k: k.to_vec() })?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Largest real part of the spectrum of `M(k)`.
pub fn spectral_abscissa(model: &LinearModel, k: &[f64]) -> Result<f64> {
    Ok(eigenvalues(model, k)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `M` restricted to `(q, k̂·U[, τ])`; rotation invariance makes it a function of `|k|`.
pub fn longitudinal_matrix(model: &LinearModel, k_abs: f64) -> DMatrix<f64> {
    let mu = model.mu;
    let d = model.dim as f64;
    let long_visc = -mu * k_abs * k_abs * (2.0 - 2.0 / d);
    match model.conductivity() {
        None => DMatrix::from_row_slice(2, 2, &[0.0, k_abs, -k_abs, long_visc]),
        Some(cond) => DMatrix::from_row_slice(
            3,
            3,
            &[
                0.0,
                k_abs,
                0.0,
                -k_abs,
                long_visc,
                -k_abs,
                0.0,
                2.0 / d * k_abs,
                -cond * k_abs * k_abs,
            ],
        ),
    }
}

/// Decay rate of every velocity component orthogonal to `k`.
pub fn transverse_rate(model: &LinearModel, k_abs: f64) -> f64 {
    -model.mu * k_abs * k_abs
}

/// Largest spectral abscissa over lattice wavevectors `0 < |k| ≤ kmax`
/// (unit period lattice; only `|k|` matters by rotation invariance).
pub fn decay_rate_over_band(model: &LinearModel, kmax: f64) -> Result<f64> {
    let mut best = f64::NEG_INFINITY;
    for n2 in lattice_norms(model.dim, kmax) {
        let mut k = vec![0.0; model.dim];
        k[0] = (n2 as f64).sqrt();
        best = best.max(spectral_abscissa(model, &k)?);
    }
    Ok(best)
}

/// Distinct positive values of `|n|²` for `n ∈ ℤ^d` with `|n| ≤ kmax`.
pub fn lattice_norms(dim: usize, kmax: f64) -> Vec<u64> {
    let m = kmax.floor() as i64;
    let bound = kmax * kmax + 1e-9;
    let range = || -m..=m;
    let mut out: Vec<u64> = match dim {
        1 => range().map(|a| (a * a) as u64).collect(),
        2 => range()
            .flat_map(|a| range().map(move |b| (a * a + b * b) as u64))
            .collect(),
        _ => range()
            .flat_map(|a| {
                range().flat_map(move |b| range().map(move |c| (a * a + b * b + c * c) as u64))
            })
            .collect(),
    };
    out.retain(|&x| x > 0 && (x as f64) <= bound);
    out.sort_unstable();
    out.dedup();
    out
}

/// Per-step record of a linear simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSample {
    pub t: f64,
    pub z: DVector<f64>,
    pub lyapunov: f64,
    pub lyapunov_dissipation: f64,
    pub energy: f64,
    pub h1: f64,
    pub curl: f64,
    /// `|zᵀ(MᵀQ + QM)z + 2zᵀRz| / max(zᵀQz, tiny)`.
    pub identity_gap: f64,
}

/// Exact matrix-exponential integration of one mode.
pub fn simulate_linear(
    model: &LinearModel,
    k: &[f64],
    z0: &[f64],
    dt: f64,
    t_end: f64,
) -> Result<Vec<LinearSample>> {
    let sys = mode_matrix(model, k)?;
    if z0.len() != model.size() {
        return Err(LinearError::StateLength {
            expected: model.size(),
            found: z0.len(),
        });
    }
    if !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(LinearError::InvalidParameter {
            name: "dt/t_end",
            reason: "need dt > 0 and t_end >= 0".into(),
        });
    }
    let lyap = QuadraticPair {
        q: sys.q.clone(),
        r: sys.r.clone(),
    };
    let energy = energy_form(model, k)?;
    let h1 = h1_form(model, k)?;
    let curl = curl_form(model, k)?;
    let m = &sys.matrix;
    let sym = m.transpose() * &lyap.q + &lyap.q * m;
    let propagator = (m * dt).exp();
    let steps = (t_end / dt).round() as usize;
    let mut z = DVector::from_column_slice(z0);
    let mut out = Vec::with_capacity(steps + 1);
    for i in 0..=steps {
        let qv = lyap.value(&z);
        let rv = lyap.dissipation(&z);
        let rate = z.dot(&(&sym * &z));
        out.push(LinearSample {
            t: i as f64 * dt,
            lyapunov: qv,
            lyapunov_dissipation: rv,
            energy: energy.value(&z),
            h1: h1.value(&z),
            curl: curl.value(&z),
            identity_gap: (rate + 2.0 * rv).abs() / qv.max(f64::MIN_POSITIVE),
            z: z.clone(),
        });
        z = &propagator * z;
    }
    Ok(out)
}

/// Least-squares slope of `ln y` against `t`.
pub fn log_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let (st, sy) = samples
        .iter()
        .fold((0.0, 0.0), |(a, b), &(t, y)| (a + t, b + y.ln()));
    let (mt, my) = (st / n, sy / n);
    let (num, den) = samples.iter().fold((0.0, 0.0), |(a, b), &(t, y)| {
        (a + (t - mt) * (y.ln() - my), b + (t - mt) * (t - mt))
    });
    num / den
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_longitudinal_pair() {
        let m = LinearModel::barotropic(3, 1.0, 0.4).unwrap();
        let eig = eigenvalues(&m, &[1.0, 0.0, 0.0]).unwrap();
        let im = 20f64.sqrt() / 6.0;
        let hits = eig
            .iter()
            .filter(|z| (z.re + 2.0 / 3.0).abs() < 1e-10 && (z.im.abs() - im).abs() < 1e-10)
            .count();
        assert_eq!(hits, 2);
        assert!((spectral_abscissa(&m, &[1.0, 0.0, 0.0]).unwrap() + 2.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn zero_wavevector_is_neutral() {
        let m = LinearModel::heat(2, 1.0, 0.3, 1.0).unwrap();
        assert_eq!(system_matrix(&m, &[0.0, 0.0]).unwrap().amax(), 0.0);
        assert_eq!(spectral_abscissa(&m, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn identity_holds_for_all_pairs() {
        for model in [
            LinearModel::barotropic(3, 0.7, 0.3).unwrap(),
            LinearModel::heat(2, 1.3, 0.2, 0.8).unwrap(),
        ] {
            let k: Vec<f64> = (0..model.dim).map(|i| 1.0 + i as f64).collect();
            let m = system_matrix(&model, &k).unwrap();
            for pair in [
                lyapunov_form(&model, &k).unwrap().pair,
                energy_form(&model, &k).unwrap(),
                h1_form(&model, &k).unwrap(),
                curl_form(&model, &k).unwrap(),
            ] {
                let scale = pair.identity_scale(&m).max(1.0);
                assert!(pair.identity_defect(&m) <= 1e-13 * scale);
            }
        }
    }

    #[test]
    fn boundary_kappa_kills_divergence_dissipation() {
        let m = LinearModel::barotropic(3, 1.0, 2.0 / 3.0).unwrap();
        assert!(m.div_coefficient().abs() < 1e-15);
        let h = LinearModel::heat(3, 1.0, 1.5, 1.0).unwrap();
        // κμ = dK/2: the ∇θ coefficient vanishes
        let pair = lyapunov_form(&h, &[0.0, 0.0, 1.0]).unwrap().pair;
        let r = &pair.r;
        // R[θ,θ] = (dK/2 − κμ)|k|² + κμ|k|²
        assert_eq!(r[(4, 4)], 1.5);
    }

    #[test]
    fn admissibility_examples() {
        assert!(kappa_admissible(&LinearModel::barotropic(3, 1.0, 0.5).unwrap()).passed());
        assert!(!kappa_admissible(&LinearModel::barotropic(3, 1.0, 0.7).unwrap()).passed());
        let r = kappa_admissible(&LinearModel::heat(3, 1.0, 0.3, 1.0).unwrap());
        assert!(r.passed());
        assert_eq!(r.constraints[1].upper, 1.5);
    }

    #[test]
    fn nonpositive_parameters_are_rejected() {
        assert!(LinearModel::barotropic(3, 0.0, 0.5).is_err());
        assert!(LinearModel::heat(3, 1.0, 0.5, -1.0).is_err());
    }

    #[test]
    fn lattice_norms_in_two_dimensions() {
        assert_eq!(lattice_norms(2, 2.0), vec![1, 2, 4]);
        assert_eq!(lattice_norms(1, 3.5), vec![1, 4, 9]);
    }

    #[test]
    fn zero_data_stays_zero() {
        let m = LinearModel::barotropic(2, 1.0, 0.2).unwrap();
        let traj = simulate_linear(&m, &[1.0, 1.0], &[0.0; 3], 0.1, 1.0).unwrap();
        assert!(traj.iter().all(|s| s.z.amax() == 0.0));
    }
}
