//! Periodic torus discretization and the field/kernel value types.
//!
//! The torus Λ_L = ℝ^d / 2Lℤ^d (the box [−L, L]^d with periodic boundary
//! conditions) is sampled on N points per side, x = −L + j·Δx with
//! Δx = 2L/N. The dual lattice is Λ_L* = (π/L)ℤ^d, truncated symmetrically
//! to the N^d modes k = (π/L)·m with m ∈ {−N/2, …, N/2−1} per axis. Modes
//! are enumerated lexicographically over the per-axis integers, so k = 0
//! always sits at the middle of the list.
//!
//! Conventions (used consistently by every module in this crate):
//!
//! * integrals are Δx^d-weighted sums: ∫f ↦ Δx^d Σ_x f(x);
//! * the Fourier transform is the continuum pair
//!   f̂(k) = ∫_Λ f(x) e^{−ik·x} dx,  f(x) = |Λ|^{−1} Σ_k f̂(k) e^{ik·x},
//!   realized exactly on the grid (so n = |Λ|^{−1} Σ_k γ̂(k) holds verbatim);
//! * an operator kernel K(x; y) acts by (Kf)(x) = Δx^d Σ_y K(x; y) f(y),
//!   composition and traces carry the same weight, and the identity operator
//!   is the grid delta δ_w(x, y) = Δx^{−d} δ_{xy}.
//!
//! `GridKernel` encapsulates all of the weighted operator algebra; code
//! elsewhere never multiplies raw matrices.

use std::cell::RefCell;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use rustfft::FftPlanner;

use crate::error::{HfbError, Result};
use crate::linalg;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Discretized torus [−L, L]^d with N (even) points per side.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    dim: usize,
    points_per_side: usize,
    half_length: f64,
}

impl TorusGrid {
    /// Build a grid; rejects d = 0, odd or too-small N, and L ≤ 0.
    ///
    /// N must be even so the mode set is exactly {−N/2, …, N/2−1} per axis
    /// with a well-defined signed Nyquist mode.
    pub fn new(dim: usize, points_per_side: usize, half_length: f64) -> Result<Arc<TorusGrid>> {
        if dim < 1 {
            return Err(HfbError::InvalidGrid("dimension must be >= 1".into()));
        }
        if points_per_side < 2 || points_per_side % 2 != 0 {
            return Err(HfbError::InvalidGrid(format!(
                "points per side must be even and >= 2, got {points_per_side}"
            )));
        }
        if !(half_length > 0.0) || !half_length.is_finite() {
            return Err(HfbError::InvalidGrid(format!(
                "half length must be positive and finite, got {half_length}"
            )));
        }
        // Guard against absurd dense-kernel sizes (desk-scale targets).
        let sites = (points_per_side as f64).powi(dim as i32);
        if sites > 1e9 {
            return Err(HfbError::InvalidGrid(format!(
                "grid with {sites:.0} sites is out of scope"
            )));
        }
        Ok(Arc::new(TorusGrid {
            dim,
            points_per_side,
            half_length,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_side(&self) -> usize {
        self.points_per_side
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    /// Lattice spacing Δx = 2L/N.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_length / self.points_per_side as f64
    }

    /// Quadrature weight Δx^d of one cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim as i32)
    }

    /// Total volume |Λ_L| = (2L)^d.
    pub fn volume(&self) -> f64 {
        (2.0 * self.half_length).powi(self.dim as i32)
    }

    /// Number of sites N^d (= number of retained modes).
    pub fn site_count(&self) -> usize {
        self.points_per_side.pow(self.dim as u32)
    }

    /// Mode spacing π/L of the dual lattice.
    pub fn mode_spacing(&self) -> f64 {
        std::f64::consts::PI / self.half_length
    }

    fn digits(&self, flat: usize, out: &mut [usize]) {
        let n = self.points_per_side;
        let mut rest = flat;
        for axis in (0..self.dim).rev() {
            out[axis] = rest % n;
            rest /= n;
        }
        debug_assert_eq!(rest, 0);
    }

    /// Per-axis integer mode numbers m ∈ {−N/2, …, N/2−1} of mode `flat`
    /// (lexicographic enumeration, axis 0 most significant).
    pub fn mode_int(&self, flat: usize) -> Vec<i64> {
        let n = self.points_per_side;
        let mut digits = vec![0usize; self.dim];
        self.digits(flat, &mut digits);
        digits
            .iter()
            .map(|&j| j as i64 - (n / 2) as i64)
            .collect()
    }

    /// Dual-lattice vector k = (π/L)·m of mode `flat`.
    pub fn mode(&self, flat: usize) -> Vec<f64> {
        let dk = self.mode_spacing();
        self.mode_int(flat).iter().map(|&m| m as f64 * dk).collect()
    }

    /// |k|² of mode `flat`; exactly 0 for the zero mode.
    pub fn mode_sq(&self, flat: usize) -> f64 {
        let dk = self.mode_spacing();
        self.mode_int(flat)
            .iter()
            .map(|&m| {
                let km = m as f64 * dk;
                km * km
            })
            .sum()
    }

    /// Flat index of the zero mode.
    pub fn zero_mode_index(&self) -> usize {
        let n = self.points_per_side;
        let mut flat = 0usize;
        for _ in 0..self.dim {
            flat = flat * n + n / 2;
        }
        flat
    }

    /// Site coordinates x = −L + j·Δx of site `flat` (same digit layout as
    /// the modes).
    pub fn site(&self, flat: usize) -> Vec<f64> {
        let dx = self.spacing();
        let mut digits = vec![0usize; self.dim];
        self.digits(flat, &mut digits);
        digits
            .iter()
            .map(|&j| -self.half_length + j as f64 * dx)
            .collect()
    }

    /// Flat site index of the displacement x_i − x_j reduced to the torus
    /// (minimal-image site, used for kernels of the form f(x−y)).
    pub fn displacement_index(&self, i: usize, j: usize) -> usize {
        let n = self.points_per_side;
        let mut di = vec![0usize; self.dim];
        let mut dj = vec![0usize; self.dim];
        self.digits(i, &mut di);
        self.digits(j, &mut dj);
        let mut flat = 0usize;
        for axis in 0..self.dim {
            // site value −L + m·Δx equals the displacement (d_i−d_j)·Δx mod 2L
            let m = (di[axis] + n + n / 2 - dj[axis]) % n;
            flat = flat * n + m;
        }
        flat
    }
}

/// |k|² per mode, in the grid's lexicographic mode order.
pub fn laplacian_symbol(grid: &TorusGrid) -> Array1<f64> {
    Array1::from_iter((0..grid.site_count()).map(|i| grid.mode_sq(i)))
}

/// Construct a grid (front-door constructor mirroring the CLI vocabulary).
pub fn make_grid(dim: usize, points_per_side: usize, half_length: f64) -> Result<Arc<TorusGrid>> {
    TorusGrid::new(dim, points_per_side, half_length)
}

// ---------------------------------------------------------------------------
// GridField
// ---------------------------------------------------------------------------

/// Complex scalar field sampled on the grid sites (or, after `to_fourier`,
/// its mode coefficients in the same flat layout).
#[derive(Debug, Clone)]
pub struct GridField {
    grid: Arc<TorusGrid>,
    values: Array1<C64>,
}

impl GridField {
    pub fn zeros(grid: &Arc<TorusGrid>) -> GridField {
        GridField {
            grid: grid.clone(),
            values: Array1::zeros(grid.site_count()),
        }
    }

    pub fn from_values(grid: &Arc<TorusGrid>, values: Array1<C64>) -> Result<GridField> {
        if values.len() != grid.site_count() {
            return Err(HfbError::ShapeMismatch {
                context: "GridField::from_values",
                expected: grid.site_count().to_string(),
                got: values.len().to_string(),
            });
        }
        Ok(GridField {
            grid: grid.clone(),
            values,
        })
    }

    /// Sample a function of the site coordinates.
    pub fn from_fn(grid: &Arc<TorusGrid>, mut f: impl FnMut(&[f64]) -> C64) -> GridField {
        let values = Array1::from_iter((0..grid.site_count()).map(|i| f(&grid.site(i))));
        GridField {
            grid: grid.clone(),
            values,
        }
    }

    /// Plane wave e^{ik·x} for the grid mode with integer numbers `mode_int`.
    pub fn plane_wave(grid: &Arc<TorusGrid>, mode_int: &[i64]) -> GridField {
        assert_eq!(mode_int.len(), grid.dim());
        let dk = grid.mode_spacing();
        let k: Vec<f64> = mode_int.iter().map(|&m| m as f64 * dk).collect();
        GridField::from_fn(grid, |x| {
            let phase: f64 = x.iter().zip(&k).map(|(xi, ki)| xi * ki).sum();
            C64::from_polar(1.0, phase)
        })
    }

    pub fn constant(grid: &Arc<TorusGrid>, c: C64) -> GridField {
        GridField {
            grid: grid.clone(),
            values: Array1::from_elem(grid.site_count(), c),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &Array1<C64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array1<C64> {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// L² norm ‖f‖ = (Δx^d Σ |f(x)|²)^{1/2}.
    pub fn norm(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Inner product ⟨f, g⟩ = Δx^d Σ conj(f) g.
    pub fn inner(&self, other: &GridField) -> C64 {
        assert_eq!(self.grid, other.grid, "grid mismatch in GridField::inner");
        self.grid.cell_volume()
            * self
                .values
                .iter()
                .zip(other.values.iter())
                .map(|(a, b)| a.conj() * b)
                .sum::<C64>()
    }

    pub fn conj(&self) -> GridField {
        GridField {
            grid: self.grid.clone(),
            values: self.values.mapv(|z| z.conj()),
        }
    }

    pub fn scale(&self, c: C64) -> GridField {
        GridField {
            grid: self.grid.clone(),
            values: self.values.mapv(|z| z * c),
        }
    }

    pub fn add(&self, other: &GridField) -> GridField {
        assert_eq!(self.grid, other.grid, "grid mismatch in GridField::add");
        GridField {
            grid: self.grid.clone(),
            values: &self.values + &other.values,
        }
    }

    pub fn sub(&self, other: &GridField) -> GridField {
        assert_eq!(self.grid, other.grid, "grid mismatch in GridField::sub");
        GridField {
            grid: self.grid.clone(),
            values: &self.values - &other.values,
        }
    }

    /// Pointwise product f(x)·g(x).
    pub fn mul_pointwise(&self, other: &GridField) -> GridField {
        assert_eq!(self.grid, other.grid, "grid mismatch in mul_pointwise");
        GridField {
            grid: self.grid.clone(),
            values: &self.values * &other.values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

// ---------------------------------------------------------------------------
// Spectral transforms
// ---------------------------------------------------------------------------

/// In-place 1-d FFT along `axis` of the flat row-major N^d array.
fn fft_axis(values: &mut Array1<C64>, dim: usize, n: usize, axis: usize, forward: bool) {
    PLANNER.with(|planner| {
        let fft = {
            let mut p = planner.borrow_mut();
            if forward {
                p.plan_fft_forward(n)
            } else {
                p.plan_fft_inverse(n)
            }
        };
        let inner: usize = n.pow((dim - 1 - axis) as u32);
        let outer: usize = n.pow(axis as u32);
        let mut line = vec![C64::new(0.0, 0.0); n];
        let half = n / 2;
        for o in 0..outer {
            let base_o = o * n * inner;
            for i in 0..inner {
                let base = base_o + i;
                if forward {
                    for j in 0..n {
                        line[j] = values[base + j * inner];
                    }
                    fft.process(&mut line);
                    // shift to lexicographic order with the −L site offset phase:
                    // f̂(k_m) picks up (−1)^m relative to the raw DFT bin m mod N
                    for idx in 0..n {
                        let m = idx as i64 - half as i64;
                        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        let bin = (idx + half) % n;
                        values[base + idx * inner] = line[bin] * sign;
                    }
                } else {
                    for idx in 0..n {
                        let m = idx as i64 - half as i64;
                        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                        let bin = (idx + half) % n;
                        line[bin] = values[base + idx * inner] * sign;
                    }
                    fft.process(&mut line);
                    for j in 0..n {
                        values[base + j * inner] = line[j];
                    }
                }
            }
        }
    });
}

/// Forward transform f̂(k) = Δx^d Σ_x f(x) e^{−ik·x}, output in the grid's
/// lexicographic mode order.
pub fn to_fourier(f: &GridField) -> GridField {
    let grid = f.grid.clone();
    let mut values = f.values.clone();
    let (d, n) = (grid.dim(), grid.points_per_side());
    for axis in 0..d {
        fft_axis(&mut values, d, n, axis, true);
    }
    let w = grid.cell_volume();
    values.mapv_inplace(|z| z * w);
    GridField { grid, values }
}

/// Inverse transform f(x) = |Λ|^{−1} Σ_k f̂(k) e^{ik·x}.
pub fn from_fourier(fhat: &GridField) -> GridField {
    let grid = fhat.grid.clone();
    let mut values = fhat.values.clone();
    let (d, n) = (grid.dim(), grid.points_per_side());
    for axis in 0..d {
        fft_axis(&mut values, d, n, axis, false);
    }
    let vol = grid.volume();
    values.mapv_inplace(|z| z / vol);
    GridField { grid, values }
}

// ---------------------------------------------------------------------------
// GridKernel
// ---------------------------------------------------------------------------

/// Dense operator kernel K(x_i; x_j) on the grid. Entry `[i, j]` is the
/// kernel value at the site pair, so the identity operator is the grid delta
/// Δx^{−d}·δ_{ij}. All products, traces and norms account for the Δx^d
/// quadrature weight.
#[derive(Debug, Clone)]
pub struct GridKernel {
    grid: Arc<TorusGrid>,
    values: Array2<C64>,
}

impl GridKernel {
    pub fn zeros(grid: &Arc<TorusGrid>) -> GridKernel {
        let m = grid.site_count();
        GridKernel {
            grid: grid.clone(),
            values: Array2::zeros((m, m)),
        }
    }

    /// Identity operator: kernel Δx^{−d} δ_{xy}.
    pub fn identity(grid: &Arc<TorusGrid>) -> GridKernel {
        let m = grid.site_count();
        let winv = 1.0 / grid.cell_volume();
        let mut values = Array2::zeros((m, m));
        for i in 0..m {
            values[[i, i]] = C64::new(winv, 0.0);
        }
        GridKernel {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &Arc<TorusGrid>, values: Array2<C64>) -> Result<GridKernel> {
        let m = grid.site_count();
        if values.dim() != (m, m) {
            return Err(HfbError::ShapeMismatch {
                context: "GridKernel::from_values",
                expected: format!("({m}, {m})"),
                got: format!("{:?}", values.dim()),
            });
        }
        Ok(GridKernel {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Arc<TorusGrid>, mut f: impl FnMut(&[f64], &[f64]) -> C64) -> GridKernel {
        let m = grid.site_count();
        let sites: Vec<Vec<f64>> = (0..m).map(|i| grid.site(i)).collect();
        let values = Array2::from_shape_fn((m, m), |(i, j)| f(&sites[i], &sites[j]));
        GridKernel {
            grid: grid.clone(),
            values,
        }
    }

    /// Rank-one operator |f⟩⟨g| with kernel f(x)·conj(g(y)).
    pub fn ketbra(f: &GridField, g: &GridField) -> GridKernel {
        assert_eq!(f.grid, g.grid, "grid mismatch in ketbra");
        let m = f.len();
        let values = Array2::from_shape_fn((m, m), |(i, j)| f.values[i] * g.values[j].conj());
        GridKernel {
            grid: f.grid.clone(),
            values,
        }
    }

    /// Symmetric pairing tensor f ⊗ g with kernel f(x)·g(y) (no conjugation).
    pub fn sym_outer(f: &GridField, g: &GridField) -> GridKernel {
        assert_eq!(f.grid, g.grid, "grid mismatch in sym_outer");
        let m = f.len();
        let values = Array2::from_shape_fn((m, m), |(i, j)| f.values[i] * g.values[j]);
        GridKernel {
            grid: f.grid.clone(),
            values,
        }
    }

    /// Multiplication operator by the field m(x): kernel m(x)·Δx^{−d}·δ_{xy}.
    pub fn mult_operator(f: &GridField) -> GridKernel {
        let grid = f.grid.clone();
        let m = f.len();
        let winv = 1.0 / grid.cell_volume();
        let mut values = Array2::zeros((m, m));
        for i in 0..m {
            values[[i, i]] = f.values[i] * winv;
        }
        GridKernel { grid, values }
    }

    /// Displacement kernel f(x − y) with the difference wrapped to the torus.
    pub fn displacement(f: &GridField) -> GridKernel {
        let grid = f.grid.clone();
        let m = f.len();
        let values = Array2::from_shape_fn((m, m), |(i, j)| {
            f.values[grid.displacement_index(i, j)]
        });
        GridKernel { grid, values }
    }

    /// Translation-invariant operator with the given symbol s(k): kernel
    /// |Λ|^{−1} Σ_k s(k) e^{ik·(x−y)}. Used for −Δ and for exact kinetic
    /// propagators.
    pub fn from_symbol(grid: &Arc<TorusGrid>, symbol: &Array1<C64>) -> GridKernel {
        assert_eq!(symbol.len(), grid.site_count(), "symbol length mismatch");
        // profile κ(x) on the sites, then κ(x−y) by index arithmetic
        let shat = GridField {
            grid: grid.clone(),
            values: symbol.clone(),
        };
        let profile = from_fourier(&shat);
        GridKernel::displacement(&profile)
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &Array2<C64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<C64> {
        &mut self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// Operator composition (AB)(x, y) = Δx^d Σ_z A(x, z) B(z, y).
    pub fn compose(&self, other: &GridKernel) -> GridKernel {
        assert_eq!(self.grid, other.grid, "grid mismatch in compose");
        let w = C64::new(self.grid.cell_volume(), 0.0);
        GridKernel {
            grid: self.grid.clone(),
            values: self.values.dot(&other.values) * w,
        }
    }

    /// Apply to a field: (Kf)(x) = Δx^d Σ_y K(x, y) f(y).
    pub fn apply(&self, f: &GridField) -> GridField {
        assert_eq!(self.grid, f.grid, "grid mismatch in apply");
        let w = C64::new(self.grid.cell_volume(), 0.0);
        GridField {
            grid: self.grid.clone(),
            values: self.values.dot(&f.values) * w,
        }
    }

    /// Trace Tr K = Δx^d Σ_x K(x, x).
    pub fn trace(&self) -> C64 {
        self.grid.cell_volume() * self.values.diag().sum()
    }

    /// Diagonal d(K)(x) = K(x, x) as a field.
    pub fn diagonal(&self) -> GridField {
        GridField {
            grid: self.grid.clone(),
            values: self.values.diag().to_owned(),
        }
    }

    /// Hilbert-Schmidt norm ‖K‖_HS = (Δx^{2d} Σ |K(x,y)|²)^{1/2}.
    pub fn hs_norm(&self) -> f64 {
        let w = self.grid.cell_volume();
        (w * w * self.values.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// Operator norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        linalg::op_norm(&self.values) * self.grid.cell_volume()
    }

    /// Adjoint kernel K*(x, y) = conj(K(y, x)).
    pub fn adjoint(&self) -> GridKernel {
        GridKernel {
            grid: self.grid.clone(),
            values: self.values.t().mapv(|z| z.conj()),
        }
    }

    /// Transpose kernel K^T(x, y) = K(y, x) (the paper's A^T = C A* C).
    pub fn transpose(&self) -> GridKernel {
        GridKernel {
            grid: self.grid.clone(),
            values: self.values.t().to_owned(),
        }
    }

    /// Entrywise complex conjugate K̄ = C K C.
    pub fn conj(&self) -> GridKernel {
        GridKernel {
            grid: self.grid.clone(),
            values: self.values.mapv(|z| z.conj()),
        }
    }

    pub fn scale(&self, c: C64) -> GridKernel {
        GridKernel {
            grid: self.grid.clone(),
            values: self.values.mapv(|z| z * c),
        }
    }

    pub fn add(&self, other: &GridKernel) -> GridKernel {
        assert_eq!(self.grid, other.grid, "grid mismatch in add");
        GridKernel {
            grid: self.grid.clone(),
            values: &self.values + &other.values,
        }
    }

    pub fn sub(&self, other: &GridKernel) -> GridKernel {
        assert_eq!(self.grid, other.grid, "grid mismatch in sub");
        GridKernel {
            grid: self.grid.clone(),
            values: &self.values - &other.values,
        }
    }

    /// Entrywise (Hadamard) product, used for v ♯ α.
    pub fn hadamard(&self, other: &GridKernel) -> GridKernel {
        assert_eq!(self.grid, other.grid, "grid mismatch in hadamard");
        GridKernel {
            grid: self.grid.clone(),
            values: &self.values * &other.values,
        }
    }

    /// Largest |K(x,y) − conj(K(y,x))| over all entries.
    pub fn hermiticity_violation(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in i..m {
                let d = (self.values[[i, j]] - self.values[[j, i]].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Largest |K(x,y) − K(y,x)| over all entries.
    pub fn symmetry_violation(&self) -> f64 {
        let m = self.dim();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in i + 1..m {
                let d = (self.values[[i, j]] - self.values[[j, i]]).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn hermitize(&self) -> GridKernel {
        let h = self.adjoint();
        self.add(&h).scale(C64::new(0.5, 0.0))
    }

    pub fn symmetrize(&self) -> GridKernel {
        let t = self.transpose();
        self.add(&t).scale(C64::new(0.5, 0.0))
    }

    /// Eigenvalues of the operator (the kernel must be Hermitian), ascending.
    pub fn eigvalsh(&self) -> Array1<f64> {
        linalg::eigvalsh_scaled(&self.values, self.grid.cell_volume())
    }

    /// Smallest operator eigenvalue (Hermitian kernels).
    pub fn min_eig(&self) -> f64 {
        let ev = self.eigvalsh();
        ev.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Hermitize, then clip negative eigenvalues at 0. Returns the repaired
    /// kernel and the largest clipped magnitude.
    pub fn clip_psd(&self) -> (GridKernel, f64) {
        let w = self.grid.cell_volume();
        let (values, clipped) = linalg::clip_psd_scaled(&self.values, w);
        (
            GridKernel {
                grid: self.grid.clone(),
                values,
            },
            clipped,
        )
    }

    /// Inverse of a Hermitian positive definite operator.
    pub fn inv_hermitian(&self) -> GridKernel {
        let w = self.grid.cell_volume();
        GridKernel {
            grid: self.grid.clone(),
            values: linalg::inv_hermitian_scaled(&self.values, w),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}
