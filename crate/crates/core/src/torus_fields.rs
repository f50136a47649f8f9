//! Periodic fields on the `d`-torus and their spectral calculus.
//!
//! Samples are stored row-major with the last axis fastest. Every linear
//! differential operator is a diagonal Fourier multiplier; first derivatives
//! zero the Nyquist mode, and the Laplacian uses the same effective
//! wavenumber so that `div ∘ grad == laplacian` holds to roundoff.
//!
//! Vector fields have `d` components. Tensor fields have `d²` components
//! with `T[i*d + j] = ∂_j U_i`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("rank mismatch: expected {expected:?}, found {found:?}")]
    RankMismatch { expected: Rank, found: Rank },
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("sample buffer has {found} entries, grid needs {expected}")]
    WrongLength { expected: usize, found: usize },
    #[error("mollifier width must be nonnegative, got {0}")]
    NegativeWidth(f64),
    #[error("hyperdiffusion order must be at least 2, got {0}")]
    OrderTooLow(u32),
    #[error("operator `{0}` is undefined in this dimension")]
    Unsupported(&'static str),
}

type Result<T> = std::result::Result<T, FieldError>;

/// Uniform periodic grid with `n` points on each of `dim` axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    dim: usize,
    n: usize,
    lengths: [f64; 3],
}

impl GridSpec {
    /// Cube of side `2π`.
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        Self::with_lengths(dim, n, &vec![2.0 * PI; dim.clamp(1, 3)])
    }

    pub fn with_lengths(dim: usize, n: usize, lengths: &[f64]) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(FieldError::InvalidGrid(format!("dimension {dim} not in 1..=3")));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(FieldError::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {n}"
            )));
        }
        if lengths.len() != dim || lengths.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(FieldError::InvalidGrid(
                "need one positive period per axis".into(),
            ));
        }
        let mut l = [2.0 * PI; 3];
        l[..dim].copy_from_slice(lengths);
        Ok(Self { dim, n, lengths: l })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.lengths[axis]
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dim]
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.lengths[axis] / self.n as f64
    }

    /// Smallest grid spacing over all axes.
    pub fn min_spacing(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).fold(f64::INFINITY, f64::min)
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }

    /// Quadrature weight of one node.
    pub fn cell_volume(&self) -> f64 {
        self.volume() / self.len() as f64
    }

    fn stride(&self, axis: usize) -> usize {
        self.n.pow((self.dim - 1 - axis) as u32)
    }

    fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.stride(axis)) % self.n
    }

    /// Coordinates of node `flat`.
    pub fn coords(&self, flat: usize) -> [f64; 3] {
        let mut x = [0.0; 3];
        for (a, xa) in x.iter_mut().enumerate().take(self.dim) {
            *xa = self.axis_index(flat, a) as f64 * self.spacing(a);
        }
        x
    }

    /// Signed integer frequency of index `j` on one axis; Nyquist maps to `-n/2`.
    fn signed_mode(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Physical wavevector at spectral index `flat`.
    pub fn wavevector(&self, flat: usize) -> [f64; 3] {
        let mut k = [0.0; 3];
        for (a, ka) in k.iter_mut().enumerate().take(self.dim) {
            *ka = 2.0 * PI / self.lengths[a] * self.signed_mode(self.axis_index(flat, a)) as f64;
        }
        k
    }

    /// Wavevector used by differentiation: Nyquist components set to zero.
    pub fn derivative_wavevector(&self, flat: usize) -> [f64; 3] {
        let mut k = self.wavevector(flat);
        for (a, ka) in k.iter_mut().enumerate().take(self.dim) {
            if self.axis_index(flat, a) == self.n / 2 {
                *ka = 0.0;
            }
        }
        k
    }

    /// Cached per-mode wavevector tables of this grid.
    pub fn tables(&self) -> Arc<SpectralTables> {
        let key = (self.dim, self.n, self.lengths.map(f64::to_bits));
        TABLES.with(|t| {
            t.borrow_mut()
                .entry(key)
                .or_insert_with(|| {
                    let len = self.len();
                    Arc::new(SpectralTables {
                        k: (0..len).map(|i| self.wavevector(i)).collect(),
                        k_deriv: (0..len).map(|i| self.derivative_wavevector(i)).collect(),
                        retained: (0..len).map(|i| self.inside_two_thirds(i)).collect(),
                    })
                })
                .clone()
        })
    }

    /// Whether every axis frequency at `flat` satisfies `|n_axis| <= n/3`.
    pub fn inside_two_thirds(&self, flat: usize) -> bool {
        let cut = (self.n / 3) as i64;
        (0..self.dim).all(|a| self.signed_mode(self.axis_index(flat, a)).abs() <= cut)
    }
}

/// Per-mode wavevectors of a grid, indexed like the spectrum.
#[derive(Debug)]
pub struct SpectralTables {
    pub k: Vec<[f64; 3]>,
    /// Differentiation wavevectors (Nyquist components zeroed).
    pub k_deriv: Vec<[f64; 3]>,
    /// Inside the 2/3-rule box.
    pub retained: Vec<bool>,
}

type TableKey = (usize, usize, [u64; 3]);

thread_local! {
    static TABLES: RefCell<HashMap<TableKey, Arc<SpectralTables>>> = RefCell::new(HashMap::new());
}

/// `|k|²`.
pub fn norm2(k: &[f64; 3]) -> f64 {
    k[0] * k[0] + k[1] * k[1] + k[2] * k[2]
}

/// Tensor rank of a field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Scalar,
    Vector,
    Tensor,
}

impl Rank {
    fn components(self, dim: usize) -> usize {
        match self {
            Rank::Scalar => 1,
            Rank::Vector => dim,
            Rank::Tensor => dim * dim,
        }
    }
}

type Spectrum = Vec<Vec<Complex64>>;

/// Real field sampled on a periodic grid, with a lazily computed spectrum.
#[derive(Debug, Clone)]
pub struct PeriodicField {
    grid: GridSpec,
    rank: Rank,
    comps: Vec<Vec<f64>>,
    spectrum: OnceLock<Spectrum>,
}

impl PartialEq for PeriodicField {
    fn eq(&self, other: &Self) -> bool {
        self.grid == other.grid && self.rank == other.rank && self.comps == other.comps
    }
}

impl PeriodicField {
    pub fn zeros(grid: GridSpec, rank: Rank) -> Self {
        let comps = vec![vec![0.0; grid.len()]; rank.components(grid.dim())];
        Self::from_parts(grid, rank, comps)
    }

    pub fn constant(grid: GridSpec, value: f64) -> Self {
        Self::from_parts(grid, Rank::Scalar, vec![vec![value; grid.len()]])
    }

    fn from_parts(grid: GridSpec, rank: Rank, comps: Vec<Vec<f64>>) -> Self {
        Self {
            grid,
            rank,
            comps,
            spectrum: OnceLock::new(),
        }
    }

    pub fn scalar(grid: GridSpec, samples: Vec<f64>) -> Result<Self> {
        Self::from_components(grid, Rank::Scalar, vec![samples])
    }

    pub fn vector(grid: GridSpec, comps: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_components(grid, Rank::Vector, comps)
    }

    pub fn from_components(grid: GridSpec, rank: Rank, comps: Vec<Vec<f64>>) -> Result<Self> {
        let want = rank.components(grid.dim());
        if comps.len() != want {
            return Err(FieldError::WrongLength {
                expected: want,
                found: comps.len(),
            });
        }
        if let Some(c) = comps.iter().find(|c| c.len() != grid.len()) {
            return Err(FieldError::WrongLength {
                expected: grid.len(),
                found: c.len(),
            });
        }
        Ok(Self::from_parts(grid, rank, comps))
    }

    /// Scalar field sampled from `f(x)`.
    pub fn scalar_from_fn(grid: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        let samples = (0..grid.len())
            .map(|i| f(&grid.coords(i)[..grid.dim()]))
            .collect();
        Self::from_parts(grid, Rank::Scalar, vec![samples])
    }

    /// Vector field sampled from `f(x, component)`.
    pub fn vector_from_fn(grid: GridSpec, f: impl Fn(&[f64], usize) -> f64) -> Self {
        let comps = (0..grid.dim())
            .map(|c| {
                (0..grid.len())
                    .map(|i| f(&grid.coords(i)[..grid.dim()], c))
                    .collect()
            })
            .collect();
        Self::from_parts(grid, Rank::Vector, comps)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn rank(&self) -> Rank {
        self.rank
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.comps
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    /// Samples of a scalar field.
    pub fn samples(&self) -> &[f64] {
        &self.comps[0]
    }

    /// Mutable access; drops the cached spectrum.
    pub fn components_mut(&mut self) -> &mut [Vec<f64>] {
        self.spectrum = OnceLock::new();
        &mut self.comps
    }

    pub fn into_components(self) -> Vec<Vec<f64>> {
        self.comps
    }

    pub fn has_cached_spectrum(&self) -> bool {
        self.spectrum.get().is_some()
    }

    /// Discrete Fourier coefficients of each component (unnormalized forward transform).
    pub fn spectrum(&self) -> &Spectrum {
        self.spectrum.get_or_init(|| {
            self.comps
                .iter()
                .map(|c| {
                    let mut buf: Vec<Complex64> = c.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                    fft_nd(&self.grid, &mut buf, false);
                    buf
                })
                .collect()
        })
    }

    /// Field whose samples are the inverse transform of `spec` (real part).
    pub fn from_spectrum(grid: GridSpec, rank: Rank, spec: Spectrum) -> Self {
        let comps = spec.into_iter().map(|s| inverse_real(&grid, s)).collect();
        Self::from_parts(grid, rank, comps)
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().flatten().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.comps.iter().flatten().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.comps.iter().flatten().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn expect_rank(&self, rank: Rank) -> Result<()> {
        if self.rank == rank {
            Ok(())
        } else {
            Err(FieldError::RankMismatch {
                expected: rank,
                found: self.rank,
            })
        }
    }

    fn same_shape(&self, other: &Self) -> Result<()> {
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        other.expect_rank(self.rank)
    }

    /// Pointwise map of every sample.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().map(|&x| f(x)).collect())
            .collect();
        Self::from_parts(self.grid, self.rank, comps)
    }

    /// Pointwise combination of two same-shape fields.
    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.same_shape(other)?;
        let comps = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect())
            .collect();
        Ok(Self::from_parts(self.grid, self.rank, comps))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|x| c * x)
    }

    /// `self + c * other`.
    pub fn axpy(&self, c: f64, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + c * b)
    }

    /// Multiply every component by a scalar field.
    pub fn mul_scalar_field(&self, s: &Self) -> Result<Self> {
        s.expect_rank(Rank::Scalar)?;
        if s.grid != self.grid {
            return Err(FieldError::GridMismatch);
        }
        let w = &s.comps[0];
        let comps = self
            .comps
            .iter()
            .map(|c| c.iter().zip(w).map(|(&x, &y)| x * y).collect())
            .collect();
        Ok(Self::from_parts(self.grid, self.rank, comps))
    }

    /// Pointwise Euclidean (Frobenius for tensors) inner product of components.
    pub fn dot(&self, other: &Self) -> Result<Self> {
        self.same_shape(other)?;
        let mut out = vec![0.0; self.grid.len()];
        for (a, b) in self.comps.iter().zip(&other.comps) {
            for ((o, &x), &y) in out.iter_mut().zip(a).zip(b) {
                *o += x * y;
            }
        }
        Ok(Self::from_parts(self.grid, Rank::Scalar, vec![out]))
    }

    /// Pointwise squared norm.
    pub fn norm_sq(&self) -> Self {
        self.dot(self).expect("a field always matches itself")
    }

    /// Transpose of a tensor field.
    pub fn transpose(&self) -> Result<Self> {
        self.expect_rank(Rank::Tensor)?;
        let d = self.grid.dim();
        let comps = (0..d * d)
            .map(|ij| self.comps[(ij % d) * d + ij / d].clone())
            .collect();
        Ok(Self::from_parts(self.grid, Rank::Tensor, comps))
    }

    /// Trace of a tensor field.
    pub fn trace(&self) -> Result<Self> {
        self.expect_rank(Rank::Tensor)?;
        let d = self.grid.dim();
        let mut out = vec![0.0; self.grid.len()];
        for i in 0..d {
            for (o, &x) in out.iter_mut().zip(&self.comps[i * d + i]) {
                *o += x;
            }
        }
        Ok(Self::from_parts(self.grid, Rank::Scalar, vec![out]))
    }

    /// Outer product `self ⊗ other` of two vector fields: `T[i*d+j] = a_i b_j`.
    pub fn outer(&self, other: &Self) -> Result<Self> {
        self.expect_rank(Rank::Vector)?;
        other.expect_rank(Rank::Vector)?;
        if self.grid != other.grid {
            return Err(FieldError::GridMismatch);
        }
        let d = self.grid.dim();
        let comps = (0..d * d)
            .map(|ij| {
                self.comps[ij / d]
                    .iter()
                    .zip(&other.comps[ij % d])
                    .map(|(&a, &b)| a * b)
                    .collect()
            })
            .collect();
        Ok(Self::from_parts(self.grid, Rank::Tensor, comps))
    }

    /// Apply a spectral multiplier `m(flat_index)` to every component.
    pub fn apply_multiplier(&self, m: impl Fn(usize) -> Complex64) -> Self {
        let spec = self
            .spectrum()
            .iter()
            .map(|s| s.iter().enumerate().map(|(i, &c)| c * m(i)).collect())
            .collect();
        Self::from_spectrum(self.grid, self.rank, spec)
    }

    /// Zero all modes outside the 2/3-rule box.
    pub fn dealias(&self) -> Self {
        let t = self.grid.tables();
        self.apply_multiplier(|i| {
            if t.retained[i] {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

/// Gradient: scalar → vector, vector → tensor `∂_j U_i`.
pub fn grad(f: &PeriodicField) -> Result<PeriodicField> {
    let g = *f.grid();
    let d = g.dim();
    let out_rank = match f.rank() {
        Rank::Scalar => Rank::Vector,
        Rank::Vector => Rank::Tensor,
        Rank::Tensor => {
            return Err(FieldError::RankMismatch {
                expected: Rank::Vector,
                found: Rank::Tensor,
            })
        }
    };
    let spec = f.spectrum();
    let kd = &g.tables().k_deriv;
    let mut out = Vec::with_capacity(spec.len() * d);
    for s in spec {
        for j in 0..d {
            out.push(
                s.iter()
                    .zip(kd.iter())
                    .map(|(&c, k)| c * Complex64::new(0.0, k[j]))
                    .collect(),
            );
        }
    }
    Ok(PeriodicField::from_spectrum(g, out_rank, out))
}

/// Divergence: vector → scalar, tensor → vector `∂_j T_ij`.
pub fn div(f: &PeriodicField) -> Result<PeriodicField> {
    let g = *f.grid();
    let d = g.dim();
    let (rows, out_rank) = match f.rank() {
        Rank::Vector => (1, Rank::Scalar),
        Rank::Tensor => (d, Rank::Vector),
        Rank::Scalar => {
            return Err(FieldError::RankMismatch {
                expected: Rank::Vector,
                found: Rank::Scalar,
            })
        }
    };
    let spec = f.spectrum();
    let kd = &g.tables().k_deriv;
    let out = (0..rows)
        .map(|r| {
            (0..g.len())
                .map(|i| {
                    let k = kd[i];
                    (0..d)
                        .map(|j| spec[r * d + j][i] * Complex64::new(0.0, k[j]))
                        .sum()
                })
                .collect()
        })
        .collect();
    Ok(PeriodicField::from_spectrum(g, out_rank, out))
}

/// Laplacian with the differentiation wavevector, so `div(grad f)` agrees.
pub fn laplacian(f: &PeriodicField) -> PeriodicField {
    let t = f.grid().tables();
    f.apply_multiplier(|i| Complex64::new(-norm2(&t.k_deriv[i]), 0.0))
}

/// Symmetric part `D(U) = ½(∇U + ∇ᵗU)`.
pub fn sym_grad(u: &PeriodicField) -> Result<PeriodicField> {
    u.expect_rank(Rank::Vector)?;
    let g = grad(u)?;
    g.zip_with(&g.transpose()?, |a, b| 0.5 * (a + b))
}

/// Antisymmetric part `A(U) = ½(∇U − ∇ᵗU)`.
pub fn skew_grad(u: &PeriodicField) -> Result<PeriodicField> {
    u.expect_rank(Rank::Vector)?;
    let g = grad(u)?;
    g.zip_with(&g.transpose()?, |a, b| 0.5 * (a - b))
}

/// Curl: scalar vorticity in 2D, vector in 3D.
pub fn curl(u: &PeriodicField) -> Result<PeriodicField> {
    u.expect_rank(Rank::Vector)?;
    let g = grad(u)?;
    let d = u.grid().dim();
    let c = |i: usize, j: usize| g.component(i * d + j);
    let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
    match d {
        2 => PeriodicField::scalar(*u.grid(), diff(c(1, 0), c(0, 1))),
        3 => PeriodicField::vector(
            *u.grid(),
            vec![
                diff(c(2, 1), c(1, 2)),
                diff(c(0, 2), c(2, 0)),
                diff(c(1, 0), c(0, 1)),
            ],
        ),
        _ => Err(FieldError::Unsupported("curl")),
    }
}

/// Gaussian mollifier with multiplier `exp(−δ²|k|²/2)`; `δ = 0` returns the input.
pub fn mollify(f: &PeriodicField, delta: f64) -> Result<PeriodicField> {
    if !(delta >= 0.0) {
        return Err(FieldError::NegativeWidth(delta));
    }
    if delta == 0.0 {
        return Ok(f.clone());
    }
    let t = f.grid().tables();
    Ok(f.apply_multiplier(|i| {
        Complex64::new((-0.5 * delta * delta * norm2(&t.k[i])).exp(), 0.0)
    }))
}

/// `ε |k|^{4s}`, the symbol of `ε Δ^{2s}` up to sign.
pub fn hyperdiffusion_multiplier(s: u32, eps: f64, k_abs: f64) -> Result<f64> {
    if s < 2 {
        return Err(FieldError::OrderTooLow(s));
    }
    Ok(eps * k_abs.powi(4 * s as i32))
}

/// Rectangle rule, exact for trigonometric polynomials below the Nyquist limit.
pub fn integrate(f: &PeriodicField) -> Result<f64> {
    f.expect_rank(Rank::Scalar)?;
    Ok(f.grid().cell_volume() * f.samples().iter().sum::<f64>())
}

/// `L²` pairing summed over components.
pub fn inner(f: &PeriodicField, g: &PeriodicField) -> Result<f64> {
    integrate(&f.dot(g)?)
}

/// `L²` pairing evaluated from the spectra (Parseval).
pub fn inner_spectral(f: &PeriodicField, g: &PeriodicField) -> Result<f64> {
    f.same_shape(g)?;
    let n = f.grid().len() as f64;
    let sum: f64 = f
        .spectrum()
        .iter()
        .zip(g.spectrum())
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x * y.conj()).re))
        .sum();
    Ok(f.grid().cell_volume() * sum / n)
}

/// Trigonometric interpolation onto a grid with `factor` times more points per axis.
pub fn upsample(f: &PeriodicField, factor: usize) -> Result<PeriodicField> {
    let g = *f.grid();
    let fine = GridSpec::with_lengths(g.dim(), g.n() * factor, g.lengths())?;
    let spec = f
        .spectrum()
        .iter()
        .map(|s| resample_spectrum(&g, &fine, s))
        .collect();
    Ok(PeriodicField::from_spectrum(fine, f.rank(), spec))
}

/// Restriction of a fine field to `coarse`, keeping modes representable there.
pub fn downsample(f: &PeriodicField, coarse: &GridSpec) -> Result<PeriodicField> {
    let g = *f.grid();
    if coarse.dim() != g.dim() || coarse.n() > g.n() {
        return Err(FieldError::GridMismatch);
    }
    let spec = f
        .spectrum()
        .iter()
        .map(|s| resample_spectrum(&g, coarse, s))
        .collect();
    Ok(PeriodicField::from_spectrum(*coarse, f.rank(), spec))
}

/// Copy modes with `|n_axis| < min(N_from, N_to)/2` and rescale for the
/// unnormalized transform convention.
fn resample_spectrum(from: &GridSpec, to: &GridSpec, s: &[Complex64]) -> Vec<Complex64> {
    let d = from.dim();
    let half = (from.n().min(to.n()) / 2) as i64;
    let ratio = to.len() as f64 / from.len() as f64;
    let mut out = vec![Complex64::new(0.0, 0.0); to.len()];
    for (i, &c) in s.iter().enumerate() {
        let mut flat = 0usize;
        let mut keep = true;
        for a in 0..d {
            let m = from.signed_mode(from.axis_index(i, a));
            if m.abs() >= half {
                keep = false;
                break;
            }
            let j = m.rem_euclid(to.n() as i64) as usize;
            flat = flat * to.n() + j;
        }
        if keep {
            out[flat] = c * ratio;
        }
    }
    out
}

type PlanCache = HashMap<(usize, bool), Arc<dyn Fft<f64>>>;

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, PlanCache)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANS.with(|p| {
        let mut p = p.borrow_mut();
        let (planner, cache) = &mut *p;
        cache
            .entry((n, inverse))
            .or_insert_with(|| {
                if inverse {
                    planner.plan_fft_inverse(n)
                } else {
                    planner.plan_fft_forward(n)
                }
            })
            .clone()
    })
}

/// In-place multidimensional transform, one axis at a time. The inverse is
/// normalized so that forward followed by inverse is the identity.
fn fft_nd(grid: &GridSpec, data: &mut [Complex64], inverse: bool) {
    let n = grid.n();
    let fft = plan(n, inverse);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for axis in 0..grid.dim() {
        let stride = grid.stride(axis);
        if stride == 1 {
            for chunk in data.chunks_exact_mut(n) {
                fft.process_with_scratch(chunk, &mut scratch);
            }
            continue;
        }
        let block = stride * n;
        for base in (0..data.len()).step_by(block) {
            for offset in 0..stride {
                let start = base + offset;
                for (j, l) in line.iter_mut().enumerate() {
                    *l = data[start + j * stride];
                }
                fft.process_with_scratch(&mut line, &mut scratch);
                for (j, l) in line.iter().enumerate() {
                    data[start + j * stride] = *l;
                }
            }
        }
    }
    if inverse {
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|c| *c *= scale);
    }
}

fn inverse_real(grid: &GridSpec, mut spec: Vec<Complex64>) -> Vec<f64> {
    fft_nd(grid, &mut spec, true);
    spec.into_iter().map(|c| c.re).collect()
}
