//! Mean-field operators entering the HFB system: the direct/exchange
//! operator b[γ] = v∗d(γ) + v♯γ, the pairing operator k(σ) = v♯σ, and the
//! assembled one-body operator h(γ) = −Δ + V + b[γ].
//!
//! The pair interaction comes in two modes: a real even function sampled on
//! the grid, or the contact interaction v = g·δ kept in analytic form (a
//! grid delta carries a Δx-dependent norm, so the reduced contact formulas
//! b[γ] = 2g·d(γ) and k(σ) = g·d(σ) are used instead).

use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64 as C64;

use crate::error::{HfbError, Result};
use crate::grid::{from_fourier, laplacian_symbol, to_fourier, GridField, GridKernel, TorusGrid};

/// Pair interaction potential.
#[derive(Debug, Clone)]
pub enum PairPotential {
    /// v(x) sampled on the grid, symmetrized to be even, with its Fourier
    /// transform cached for spectral convolutions.
    Grid { v: GridField, v_hat: GridField },
    /// Contact interaction v = g·δ with coupling g ≥ 0.
    Contact { g: f64 },
}

impl PairPotential {
    /// Wrap a grid-sampled pair potential; v is symmetrized,
    /// v ← (v(x) + v(−x))/2, and must be real.
    pub fn from_grid_function(v: &GridField) -> Result<PairPotential> {
        let grid = v.grid().clone();
        let n = grid.points_per_side();
        let d = grid.dim();
        let mut sym = GridField::zeros(&grid);
        for i in 0..grid.site_count() {
            let j = negate_site_index(i, n, d);
            sym.values_mut()[i] = 0.5 * (v.values()[i] + v.values()[j]);
        }
        let max_im = sym.values().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if max_im > 1e-12 * (1.0 + sym.max_abs()) {
            return Err(HfbError::InvalidParameter(
                "pair potential must be real".into(),
            ));
        }
        let v_hat = to_fourier(&sym);
        Ok(PairPotential::Grid { v: sym, v_hat })
    }

    /// Contact interaction with coupling g ≥ 0.
    pub fn contact(g: f64) -> Result<PairPotential> {
        if !(g >= 0.0) || !g.is_finite() {
            return Err(HfbError::InvalidParameter(format!(
                "contact coupling must be finite and >= 0, got {g}"
            )));
        }
        Ok(PairPotential::Contact { g })
    }

    pub fn is_contact(&self) -> bool {
        matches!(self, PairPotential::Contact { .. })
    }
}

/// Flat site index of −x for the site with flat index `i`.
fn negate_site_index(i: usize, n: usize, d: usize) -> usize {
    // site digit j ↦ x = −L + jΔx; −x corresponds to digit (N − j) mod N
    let mut rest = i;
    let mut digits = vec![0usize; d];
    for axis in (0..d).rev() {
        digits[axis] = rest % n;
        rest /= n;
    }
    let mut flat = 0usize;
    for axis in 0..d {
        flat = flat * n + (n - digits[axis]) % n;
    }
    flat
}

/// One-body operator split into a spectral kinetic part, a local
/// multiplication part and a dense nonlocal part.
#[derive(Debug, Clone)]
pub struct OneBodyOperator {
    grid: Arc<TorusGrid>,
    /// Symbol per mode multiplying in Fourier space (|k|² for the kinetic
    /// term; all zero when absent).
    kinetic_symbol: Array1<f64>,
    /// Local potential W(x) applied pointwise.
    multiplication: GridField,
    /// Nonlocal kernel (the exchange term v♯γ).
    nonlocal: GridKernel,
}

impl OneBodyOperator {
    pub fn zero(grid: &Arc<TorusGrid>) -> OneBodyOperator {
        OneBodyOperator {
            grid: grid.clone(),
            kinetic_symbol: Array1::zeros(grid.site_count()),
            multiplication: GridField::zeros(grid),
            nonlocal: GridKernel::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn kinetic_symbol(&self) -> &Array1<f64> {
        &self.kinetic_symbol
    }

    pub fn multiplication(&self) -> &GridField {
        &self.multiplication
    }

    pub fn nonlocal(&self) -> &GridKernel {
        &self.nonlocal
    }

    /// Apply to a field, kinetic part in Fourier space.
    pub fn apply(&self, f: &GridField) -> GridField {
        let mut out = self.multiplication.mul_pointwise(f);
        if self.kinetic_symbol.iter().any(|&s| s != 0.0) {
            let mut fhat = to_fourier(f);
            for (z, &s) in fhat.values_mut().iter_mut().zip(self.kinetic_symbol.iter()) {
                *z *= C64::new(s, 0.0);
            }
            out = out.add(&from_fourier(&fhat));
        }
        out.add(&self.nonlocal.apply(f))
    }

    /// Assemble the dense kernel of the operator.
    pub fn as_kernel(&self) -> GridKernel {
        let mut k = self.nonlocal.add(&GridKernel::mult_operator(&self.multiplication));
        if self.kinetic_symbol.iter().any(|&s| s != 0.0) {
            let sym = self.kinetic_symbol.mapv(|x| C64::new(x, 0.0));
            k = k.add(&GridKernel::from_symbol(&self.grid, &sym));
        }
        k
    }

    fn add_multiplication(mut self, f: &GridField) -> OneBodyOperator {
        self.multiplication = self.multiplication.add(f);
        self
    }
}

/// Diagonal extraction d(α)(x) = α(x, x).
pub fn diag_of(alpha: &GridKernel) -> GridField {
    alpha.diagonal()
}

/// Hadamard multiplier v ♯ α with kernel v(x−y)·α(x; y); in contact mode the
/// delta collapses it to the multiplication operator by g·d(α).
pub fn hadamard_v(pot: &PairPotential, alpha: &GridKernel) -> GridKernel {
    match pot {
        PairPotential::Grid { v, .. } => GridKernel::displacement(v).hadamard(alpha),
        PairPotential::Contact { g } => {
            let m = diag_of(alpha).scale(C64::new(*g, 0.0));
            GridKernel::mult_operator(&m)
        }
    }
}

/// Direct + exchange operator b[γ] = v∗d(γ) + v♯γ. The convolution is done
/// spectrally (exact cyclic convolution on the torus); in contact mode the
/// whole operator reduces to multiplication by 2g·d(γ).
pub fn b_op(pot: &PairPotential, gamma: &GridKernel) -> OneBodyOperator {
    let grid = gamma.grid().clone();
    let n = diag_of(gamma);
    match pot {
        PairPotential::Grid { v_hat, .. } => {
            let mut n_hat = to_fourier(&n);
            for (z, vh) in n_hat.values_mut().iter_mut().zip(v_hat.values().iter()) {
                *z *= vh;
            }
            let direct = from_fourier(&n_hat);
            OneBodyOperator {
                grid,
                kinetic_symbol: Array1::zeros(gamma.dim()),
                multiplication: direct,
                nonlocal: hadamard_v(pot, gamma),
            }
        }
        PairPotential::Contact { g } => {
            let mult = n.scale(C64::new(2.0 * g, 0.0));
            OneBodyOperator {
                grid,
                kinetic_symbol: Array1::zeros(gamma.dim()),
                multiplication: mult,
                nonlocal: GridKernel::zeros(gamma.grid()),
            }
        }
    }
}

/// Pairing operator k(σ) = v♯σ; multiplication by g·d(σ) in contact mode.
/// Returned as a dense kernel in both modes.
pub fn k_op(pot: &PairPotential, sigma: &GridKernel) -> GridKernel {
    hadamard_v(pot, sigma)
}

/// Dense kernel of the kinetic operator −Δ (spectral symbol |k|²).
pub fn laplacian_kernel(grid: &Arc<TorusGrid>) -> GridKernel {
    let sym = laplacian_symbol(grid).mapv(|x| C64::new(x, 0.0));
    GridKernel::from_symbol(grid, &sym)
}

/// Assembled one-body operator h(γ) = −Δ + V + b[γ].
pub fn h_op(pot: &PairPotential, v_ext: &GridField, gamma: &GridKernel) -> OneBodyOperator {
    let grid = gamma.grid().clone();
    let mut op = b_op(pot, gamma).add_multiplication(v_ext);
    op.kinetic_symbol = laplacian_symbol(&grid);
    op
}
