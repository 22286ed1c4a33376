//! Symplectomorphism algebra, the constructive diagonalization flow for the
//! generalized one-particle density matrix, the evolution equation for
//! diagonalizing maps along an HFB trajectory, and the stationary
//! quasiparticle mode problem.
//!
//! A symplectomorphism is the block map 𝒰 = [[u, v], [v̄, ū]] preserving
//! 𝒮 = diag(1, −1); equivalently its blocks satisfy the four identities
//!
//!   uu* − vv* = 1,   u*u − vᵀv̄ = 1,   u*v = vᵀū,   uvᵀ = vuᵀ.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;

use crate::error::{HfbError, Result};
use crate::grid::{GridField, GridKernel, TorusGrid};
use crate::meanfield::{h_op, k_op, PairPotential};
use crate::states::{GeneralizedDensityMatrix, QuasifreeState};
use crate::linalg;

/// Bogoliubov block map [[u, v], [v̄, ū]]; `u`, `v` are operator kernels on
/// the grid.
#[derive(Debug, Clone)]
pub struct Symplectomorphism {
    u: GridKernel,
    v: GridKernel,
}

impl Symplectomorphism {
    pub fn identity(grid: &Arc<TorusGrid>) -> Symplectomorphism {
        Symplectomorphism {
            u: GridKernel::identity(grid),
            v: GridKernel::zeros(grid),
        }
    }

    pub fn from_blocks(u: GridKernel, v: GridKernel) -> Symplectomorphism {
        assert_eq!(u.grid(), v.grid(), "grid mismatch in Symplectomorphism");
        Symplectomorphism { u, v }
    }

    pub fn u(&self) -> &GridKernel {
        &self.u
    }

    pub fn v(&self) -> &GridKernel {
        &self.v
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.u.grid()
    }

    /// Adjoint 𝒰* = [[u*, vᵀ], [v*, uᵀ]], again of symplectomorphism form.
    pub fn adjoint(&self) -> Symplectomorphism {
        Symplectomorphism {
            u: self.u.adjoint(),
            v: self.v.transpose(),
        }
    }

    /// Inverse 𝒰^{-1} = 𝒮𝒰*𝒮 = [[u*, −vᵀ], [−v*, uᵀ]].
    pub fn inverse(&self) -> Symplectomorphism {
        Symplectomorphism {
            u: self.u.adjoint(),
            v: self.v.transpose().scale(C64::new(-1.0, 0.0)),
        }
    }

    /// Conjugation by 𝒮: 𝒮𝒰𝒮 = [[u, −v], [−v̄, ū]] (flips the sign of the
    /// pairing block).
    pub fn s_conjugate(&self) -> Symplectomorphism {
        Symplectomorphism {
            u: self.u.clone(),
            v: self.v.scale(C64::new(-1.0, 0.0)),
        }
    }

    /// Block composition 𝒰₁𝒰₂.
    pub fn compose(&self, other: &Symplectomorphism) -> Symplectomorphism {
        // [[u1,v1],[v̄1,ū1]]·[[u2,v2],[v̄2,ū2]]
        let u = self.u.compose(&other.u).add(&self.v.compose(&other.v.conj()));
        let v = self.u.compose(&other.v).add(&self.v.compose(&other.u.conj()));
        Symplectomorphism { u, v }
    }

    /// Hilbert-Schmidt norm of the pairing block; finite ‖v‖_HS is the Shale
    /// implementability diagnostic.
    pub fn shale_norm(&self) -> f64 {
        self.v.hs_norm()
    }

    /// Conjugate a generalized density matrix: 𝒰 Γ 𝒰*.
    pub fn conjugate_gamma(&self, gamma: &BlockMatrix) -> BlockMatrix {
        let big = self.as_block_matrix();
        big.compose(gamma).compose(&big.adjoint())
    }

    /// Assemble the full 2M×2M block kernel.
    pub fn as_block_matrix(&self) -> BlockMatrix {
        BlockMatrix::from_blocks(&self.u, &self.v, &self.v.conj(), &self.u.conj())
    }

    pub fn is_finite(&self) -> bool {
        self.u.is_finite() && self.v.is_finite()
    }
}

/// Max violation of the four symplectomorphism identities, in operator norm.
pub fn check_symplectic(map: &Symplectomorphism) -> f64 {
    let id = GridKernel::identity(map.grid());
    let u = &map.u;
    let v = &map.v;
    let r1 = u
        .compose(&u.adjoint())
        .sub(&v.compose(&v.adjoint()))
        .sub(&id);
    let r2 = u
        .adjoint()
        .compose(u)
        .sub(&v.transpose().compose(&v.conj()))
        .sub(&id);
    let r3 = u.adjoint().compose(v).sub(&v.transpose().compose(&u.conj()));
    let r4 = u.compose(&v.transpose()).sub(&v.compose(&u.transpose()));
    [r1, r2, r3, r4]
        .iter()
        .map(|r| r.op_norm())
        .fold(0.0, f64::max)
}

/// Random symplectomorphism via its singular factorization
/// 𝒰 = [[p,0],[0,p̄]]·[[cosh D, sinh D],[sinh D, cosh D]]·[[q,0],[0,q̄]]
/// with Haar unitaries p, q and squeezing strengths D ~ `scale`·|N(0,1)|.
/// Deterministic in the caller's RNG; `scale = 0` gives a (random) unitary
/// with vanishing pairing block.
pub fn random_symplectomorphism(
    grid: &Arc<TorusGrid>,
    rng: &mut impl rand::Rng,
    scale: f64,
) -> Symplectomorphism {
    use rand_distr::StandardNormal;
    let m = grid.site_count();
    let p = linalg::to_na(&linalg::random_unitary(m, rng));
    let q = linalg::to_na(&linalg::random_unitary(m, rng));
    let mut c = nalgebra::DMatrix::<C64>::zeros(m, m);
    let mut s = nalgebra::DMatrix::<C64>::zeros(m, m);
    for i in 0..m {
        let r: f64 = scale * rng.sample::<f64, _>(StandardNormal).abs();
        c[(i, i)] = C64::new(r.cosh(), 0.0);
        s[(i, i)] = C64::new(r.sinh(), 0.0);
    }
    let u_mat = &p * &c * &q;
    let v_mat = &p * &s * q.map(|z| z.conj());
    let w = grid.cell_volume();
    let u = GridKernel::from_values(grid, linalg::from_na(&u_mat).mapv(|z| z / w)).unwrap();
    let v = GridKernel::from_values(grid, linalg::from_na(&v_mat).mapv(|z| z / w)).unwrap();
    Symplectomorphism { u, v }
}

// ---------------------------------------------------------------------------
// Full 2M×2M block kernels
// ---------------------------------------------------------------------------

/// Dense 2M×2M kernel over two copies of the grid (the doubled one-particle
/// space); used for Γ, Λ and symplectomorphisms in assembled form.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    grid: Arc<TorusGrid>,
    mat: Array2<C64>,
}

impl BlockMatrix {
    pub fn from_blocks(
        a: &GridKernel,
        b: &GridKernel,
        c: &GridKernel,
        d: &GridKernel,
    ) -> BlockMatrix {
        let grid = a.grid().clone();
        let m = a.dim();
        let mut mat = Array2::zeros((2 * m, 2 * m));
        for i in 0..m {
            for j in 0..m {
                mat[[i, j]] = a.values()[[i, j]];
                mat[[i, j + m]] = b.values()[[i, j]];
                mat[[i + m, j]] = c.values()[[i, j]];
                mat[[i + m, j + m]] = d.values()[[i, j]];
            }
        }
        BlockMatrix { grid, mat }
    }

    pub fn zeros(grid: &Arc<TorusGrid>) -> BlockMatrix {
        let m = grid.site_count();
        BlockMatrix {
            grid: grid.clone(),
            mat: Array2::zeros((2 * m, 2 * m)),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn mat(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn block(&self, row: usize, col: usize) -> GridKernel {
        let m = self.grid.site_count();
        let sub = self
            .mat
            .slice(ndarray::s![row * m..(row + 1) * m, col * m..(col + 1) * m])
            .to_owned();
        GridKernel::from_values(&self.grid, sub).unwrap()
    }

    pub fn compose(&self, other: &BlockMatrix) -> BlockMatrix {
        assert_eq!(self.grid, other.grid, "grid mismatch in BlockMatrix::compose");
        let w = C64::new(self.grid.cell_volume(), 0.0);
        BlockMatrix {
            grid: self.grid.clone(),
            mat: self.mat.dot(&other.mat) * w,
        }
    }

    pub fn adjoint(&self) -> BlockMatrix {
        BlockMatrix {
            grid: self.grid.clone(),
            mat: self.mat.t().mapv(|z| z.conj()),
        }
    }

    pub fn add(&self, other: &BlockMatrix) -> BlockMatrix {
        BlockMatrix {
            grid: self.grid.clone(),
            mat: &self.mat + &other.mat,
        }
    }

    pub fn sub(&self, other: &BlockMatrix) -> BlockMatrix {
        BlockMatrix {
            grid: self.grid.clone(),
            mat: &self.mat - &other.mat,
        }
    }

    pub fn scale(&self, c: C64) -> BlockMatrix {
        BlockMatrix {
            grid: self.grid.clone(),
            mat: self.mat.mapv(|z| z * c),
        }
    }

    /// Multiply by 𝒮 = diag(1, −1) from the left.
    pub fn s_mul_left(&self) -> BlockMatrix {
        let m = self.grid.site_count();
        let mut mat = self.mat.clone();
        for i in m..2 * m {
            for j in 0..2 * m {
                mat[[i, j]] = -mat[[i, j]];
            }
        }
        BlockMatrix {
            grid: self.grid.clone(),
            mat,
        }
    }

    /// Multiply by 𝒮 = diag(1, −1) from the right.
    pub fn s_mul_right(&self) -> BlockMatrix {
        let m = self.grid.site_count();
        let mut mat = self.mat.clone();
        for i in 0..2 * m {
            for j in m..2 * m {
                mat[[i, j]] = -mat[[i, j]];
            }
        }
        BlockMatrix {
            grid: self.grid.clone(),
            mat,
        }
    }

    pub fn hermiticity_violation(&self) -> f64 {
        let n = self.mat.nrows();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.mat[[i, j]] - self.mat[[j, i]].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in operator normalization (Hermitian assembled kernels).
    pub fn eigvalsh(&self) -> Array1<f64> {
        linalg::eigvalsh_scaled(&self.mat, self.grid.cell_volume())
    }

    pub fn min_eig(&self) -> f64 {
        self.eigvalsh().iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn op_norm(&self) -> f64 {
        linalg::op_norm(&self.mat) * self.grid.cell_volume()
    }

    pub fn hs_norm(&self) -> f64 {
        let w = self.grid.cell_volume();
        (w * w * self.mat.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Λ-shaped Hermitian block matrix [[a, b], [b̄, ā]] with a Hermitian and b
/// symmetric (the quadratic form driving both the Γ-form flow and the
/// symplectomorphism evolution).
#[derive(Debug, Clone)]
pub struct BlockHamiltonian {
    a: GridKernel,
    b: GridKernel,
}

impl BlockHamiltonian {
    pub fn new(a: GridKernel, b: GridKernel) -> BlockHamiltonian {
        assert_eq!(a.grid(), b.grid(), "grid mismatch in BlockHamiltonian");
        BlockHamiltonian { a, b }
    }

    pub fn zeros(grid: &Arc<TorusGrid>) -> BlockHamiltonian {
        BlockHamiltonian {
            a: GridKernel::zeros(grid),
            b: GridKernel::zeros(grid),
        }
    }

    pub fn a(&self) -> &GridKernel {
        &self.a
    }

    pub fn b(&self) -> &GridKernel {
        &self.b
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.a.grid()
    }

    /// Structural residual: max of a's hermiticity and b's symmetry defect.
    pub fn structure_violation(&self) -> f64 {
        self.a
            .hermiticity_violation()
            .max(self.b.symmetry_violation())
    }

    pub fn as_block_matrix(&self) -> BlockMatrix {
        BlockMatrix::from_blocks(&self.a, &self.b, &self.b.conj(), &self.a.conj())
    }
}

#[cfg(test)]
mod symplecto_tests {
    use super::*;
    use crate::grid::{make_grid, GridField};
    use rand::SeedableRng;

    #[test]
    fn identity_is_symplectic() {
        let g = make_grid(1, 6, 1.0).unwrap();
        let id = Symplectomorphism::identity(&g);
        assert!(check_symplectic(&id) < 1e-14);
    }

    #[test]
    fn single_mode_squeeze_is_symplectic() {
        let g = make_grid(1, 6, 1.0).unwrap();
        let r = 0.8f64;
        let e0 = GridField::constant(&g, C64::new(1.0 / g.volume().sqrt(), 0.0));
        let p0 = GridKernel::ketbra(&e0, &e0);
        let u = GridKernel::identity(&g).add(&p0.scale(C64::new(r.cosh() - 1.0, 0.0)));
        let v = p0.scale(C64::new(r.sinh(), 0.0));
        let map = Symplectomorphism::from_blocks(u, v);
        assert!(check_symplectic(&map) < 1e-12);
    }

    #[test]
    fn random_symplectomorphism_satisfies_identities() {
        let g = make_grid(1, 8, 1.3).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let map = random_symplectomorphism(&g, &mut rng, 0.4);
        assert!(check_symplectic(&map) < 1e-10, "violation {}", check_symplectic(&map));
        // a perturbed pair is strictly non-symplectic
        let mut bad_v = map.v().clone();
        bad_v.values_mut()[[0, 0]] += C64::new(0.05, 0.0);
        let bad = Symplectomorphism::from_blocks(map.u().clone(), bad_v);
        assert!(check_symplectic(&bad) > 1e-4);
    }

    #[test]
    fn inverse_and_compose() {
        let g = make_grid(1, 6, 0.9).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let map = random_symplectomorphism(&g, &mut rng, 0.3);
        let inv = map.inverse();
        let prod = map.compose(&inv);
        let idm = Symplectomorphism::identity(&g);
        assert!(prod.u().sub(idm.u()).op_norm() < 1e-10);
        assert!(prod.v().op_norm() < 1e-10);
    }
}

// ---------------------------------------------------------------------------
// Λ(Γ) and the Γ-form of the HFB equations
// ---------------------------------------------------------------------------

/// Λ(Γ) = [[h(γ^φ), k(σ^φ)], [conj k(σ^φ), conj h(γ^φ)]] assembled from a
/// state (the φ contributions enter through γ^φ and σ^φ).
pub fn lambda_of_state(
    rho: &QuasifreeState,
    pot: &PairPotential,
    v_ext: &GridField,
) -> BlockHamiltonian {
    let a = h_op(pot, v_ext, &rho.gamma_phi()).as_kernel();
    let b = k_op(pot, &rho.sigma_phi());
    BlockHamiltonian::new(a, b)
}

/// Right-hand side of the Γ-form equation i∂Γ = 𝒮ΛΓ − ΓΛ𝒮 with
/// 𝒮 = diag(1, −1). Its (0,0) and (0,1) blocks are i∂γ and i∂σ.
pub fn gamma_form_rhs(gamma: &GeneralizedDensityMatrix, lam: &BlockHamiltonian) -> BlockMatrix {
    let g = gamma.block_matrix();
    let l = lam.as_block_matrix();
    let s_lam_g = l.s_mul_left().compose(g);
    let g_lam_s = g.compose(&l.s_mul_right());
    s_lam_g.sub(&g_lam_s)
}

// ---------------------------------------------------------------------------
// Evolution of diagonalizing maps: i∂𝒰*_t = 𝒮Λ_t𝒰*_t
// ---------------------------------------------------------------------------

/// Ceiling on symplectic-identity drift before the evolution aborts.
pub const SYMPLECTIC_VIOLATION_CEILING: f64 = 1e-6;

/// RK4 integration of i∂𝒰*_t = 𝒮Λ(t)𝒰*_t for a time-indexed Λ-path.
/// Internally the adjoint blocks p = u*, r = v* are evolved, which close
/// under the flow:
///
///   ∂p = −i(a p + b r),   ∂r = +i(b̄ p + ā r).
///
/// Returns (t, 𝒰_t) sampled every `record_stride` steps; aborts when the
/// symplectic identities drift past the ceiling.
pub fn evolve_symplectomorphism(
    u0: &Symplectomorphism,
    lambda_at: impl Fn(f64) -> BlockHamiltonian,
    dt: f64,
    t_final: f64,
    record_stride: usize,
) -> Result<Vec<(f64, Symplectomorphism)>> {
    if !(dt > 0.0) || !(t_final >= 0.0) || record_stride == 0 {
        return Err(HfbError::InvalidParameter(
            "evolve_symplectomorphism needs dt > 0, t_final >= 0, record_stride >= 1".into(),
        ));
    }
    let start = check_symplectic(u0);
    if start > 1e-8 {
        return Err(HfbError::InvalidParameter(format!(
            "initial map violates the symplectic identities by {start:.3e}"
        )));
    }

    let mut p = u0.u().adjoint();
    let mut r = u0.v().adjoint();
    let n_steps = (t_final / dt).round() as usize;

    let deriv = |lam: &BlockHamiltonian, p: &GridKernel, r: &GridKernel| {
        let minus_i = C64::new(0.0, -1.0);
        let plus_i = C64::new(0.0, 1.0);
        let dp = lam.a().compose(p).add(&lam.b().compose(r)).scale(minus_i);
        let dr = lam
            .b()
            .conj()
            .compose(p)
            .add(&lam.a().conj().compose(r))
            .scale(plus_i);
        (dp, dr)
    };

    let mut out = Vec::new();
    let push = |t: f64, p: &GridKernel, r: &GridKernel, out: &mut Vec<(f64, Symplectomorphism)>| -> Result<()> {
        let map = Symplectomorphism::from_blocks(p.adjoint(), r.adjoint());
        let violation = check_symplectic(&map);
        if violation > SYMPLECTIC_VIOLATION_CEILING {
            return Err(HfbError::NumericalAbort {
                t,
                reason: format!("symplectic identity violation {violation:.3e} past ceiling"),
            });
        }
        out.push((t, map));
        Ok(())
    };
    push(0.0, &p, &r, &mut out)?;

    for j in 1..=n_steps {
        let t0 = (j - 1) as f64 * dt;
        let lam1 = lambda_at(t0);
        let lam2 = lambda_at(t0 + dt / 2.0);
        let lam4 = lambda_at(t0 + dt);

        let (dp1, dr1) = deriv(&lam1, &p, &r);
        let half = C64::new(dt / 2.0, 0.0);
        let (dp2, dr2) = deriv(&lam2, &p.add(&dp1.scale(half)), &r.add(&dr1.scale(half)));
        let (dp3, dr3) = deriv(&lam2, &p.add(&dp2.scale(half)), &r.add(&dr2.scale(half)));
        let full = C64::new(dt, 0.0);
        let (dp4, dr4) = deriv(&lam4, &p.add(&dp3.scale(full)), &r.add(&dr3.scale(full)));

        let sixth = C64::new(dt / 6.0, 0.0);
        let two = C64::new(2.0, 0.0);
        p = p.add(
            &dp1.add(&dp2.scale(two))
                .add(&dp3.scale(two))
                .add(&dp4)
                .scale(sixth),
        );
        r = r.add(
            &dr1.add(&dr2.scale(two))
                .add(&dr3.scale(two))
                .add(&dr4)
                .scale(sixth),
        );
        if !p.is_finite() || !r.is_finite() {
            return Err(HfbError::NumericalAbort {
                t: j as f64 * dt,
                reason: "non-finite value in symplectomorphism evolution".into(),
            });
        }
        if j % record_stride == 0 || j == n_steps {
            push(j as f64 * dt, &p, &r, &mut out)?;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Constructive diagonalization of Γ
// ---------------------------------------------------------------------------

/// Fixed step of the diagonalization flow. The exponential contraction of
/// the flow makes a fixed step safe and reproducible; 0.01 keeps the RK4
/// transport drift of the accumulated map well below the 10·tol
/// reconstruction budget at tol = 1e−8.
pub const DIAG_FLOW_DT: f64 = 0.01;

#[derive(Debug, Clone)]
pub struct DiagonalizationResult {
    /// γ' = γ_∞, hermitized with its spectrum clipped at 0.
    pub gamma_prime: GridKernel,
    /// Accumulated map with Γ = 𝒰 diag(γ', 1+γ̄') 𝒰*.
    pub map: Symplectomorphism,
    /// ‖Γ − 𝒰 diag(γ', 1+γ̄') 𝒰*‖_HS.
    pub residual: f64,
    /// (t, ‖σ_t‖_HS) per flow step.
    pub sigma_decay: Vec<(f64, f64)>,
    /// γ_t checkpoints near integer flow times (monotonicity diagnostics).
    pub gamma_checkpoints: Vec<(f64, GridKernel)>,
    /// Largest negative eigenvalue clipped from γ_∞.
    pub clip_magnitude: f64,
}

/// Diagonalize Γ = [[γ, σ], [σ̄, 1+γ̄]] ≥ 0 by integrating the contraction
/// flow
///
///   ∂γ_t = −2σ_t σ̄_t,   ∂σ_t = −(σ_t + σ_t γ̄_t + γ_t σ_t),
///
/// which drives ‖σ_t‖_HS ≤ ‖σ₀‖_HS·e^{−t} to zero, while accumulating the
/// diagonalizing map via i∂𝒰*_t = 𝒮Λ_t𝒰*_t with Λ_t = [[0, iσ_t], [−iσ̄_t, 0]].
/// Runs until ‖σ_t‖_HS < tol (t_max = ln(‖σ₀‖/tol) + 10 is guaranteed by the
/// decay bound); returns γ' = γ_∞ with 0 ⪯ γ' ⪯ γ and the map.
pub fn diagonalize_gamma(
    gamma: &GridKernel,
    sigma: &GridKernel,
    tol: f64,
) -> Result<DiagonalizationResult> {
    diagonalize_gamma_with_dt(gamma, sigma, tol, DIAG_FLOW_DT)
}

pub fn diagonalize_gamma_with_dt(
    gamma: &GridKernel,
    sigma: &GridKernel,
    tol: f64,
    dt: f64,
) -> Result<DiagonalizationResult> {
    if !(tol > 0.0) || !(dt > 0.0) {
        return Err(HfbError::InvalidParameter(
            "diagonalize_gamma needs tol > 0 and dt > 0".into(),
        ));
    }
    let grid = gamma.grid().clone();
    let gm = GeneralizedDensityMatrix::from_blocks(gamma, sigma);
    let scale = gamma.op_norm().max(1.0);
    if gm.min_eig() < -1e-9 * scale {
        return Err(HfbError::Inadmissible(
            "Γ is not positive semidefinite".into(),
            -gm.min_eig(),
        ));
    }

    let mut g = gamma.hermitize();
    let mut s = sigma.symmetrize();
    let mut p = GridKernel::identity(&grid);
    let mut r = GridKernel::zeros(&grid);

    let sigma0_hs = s.hs_norm();
    let mut decay = vec![(0.0, sigma0_hs)];
    let t_max = if sigma0_hs > tol {
        (sigma0_hs / tol).ln() + 10.0
    } else {
        0.0
    };
    let max_steps = (t_max / dt).ceil() as usize;

    // flow derivative of (γ, σ, p, r)
    let deriv = |g: &GridKernel, s: &GridKernel, p: &GridKernel, r: &GridKernel| {
        let dg = s.compose(&s.conj()).scale(C64::new(-2.0, 0.0));
        let ds = s
            .add(&s.compose(&g.conj()))
            .add(&g.compose(s))
            .scale(C64::new(-1.0, 0.0));
        // Λ_t = [[0, iσ], [−iσ̄, 0]]: ∂p = σ r, ∂r = σ̄ p
        let dp = s.compose(r);
        let dr = s.conj().compose(p);
        (dg, ds, dp, dr)
    };

    let mut t = 0.0;
    let mut checkpoints: Vec<(f64, GridKernel)> = vec![(0.0, g.clone())];
    let mut next_checkpoint = 1.0;
    let mut converged = s.hs_norm() < tol;
    for _ in 0..max_steps {
        if converged {
            break;
        }
        let c = |x: f64| C64::new(x, 0.0);
        let (dg1, ds1, dp1, dr1) = deriv(&g, &s, &p, &r);
        let (dg2, ds2, dp2, dr2) = deriv(
            &g.add(&dg1.scale(c(dt / 2.0))),
            &s.add(&ds1.scale(c(dt / 2.0))),
            &p.add(&dp1.scale(c(dt / 2.0))),
            &r.add(&dr1.scale(c(dt / 2.0))),
        );
        let (dg3, ds3, dp3, dr3) = deriv(
            &g.add(&dg2.scale(c(dt / 2.0))),
            &s.add(&ds2.scale(c(dt / 2.0))),
            &p.add(&dp2.scale(c(dt / 2.0))),
            &r.add(&dr2.scale(c(dt / 2.0))),
        );
        let (dg4, ds4, dp4, dr4) = deriv(
            &g.add(&dg3.scale(c(dt))),
            &s.add(&ds3.scale(c(dt))),
            &p.add(&dp3.scale(c(dt))),
            &r.add(&dr3.scale(c(dt))),
        );
        let sixth = c(dt / 6.0);
        let two = c(2.0);
        g = g.add(&dg1.add(&dg2.scale(two)).add(&dg3.scale(two)).add(&dg4).scale(sixth));
        s = s.add(&ds1.add(&ds2.scale(two)).add(&ds3.scale(two)).add(&ds4).scale(sixth));
        p = p.add(&dp1.add(&dp2.scale(two)).add(&dp3.scale(two)).add(&dp4).scale(sixth));
        r = r.add(&dr1.add(&dr2.scale(two)).add(&dr3.scale(two)).add(&dr4).scale(sixth));
        t += dt;
        let hs = s.hs_norm();
        decay.push((t, hs));
        if t + 1e-9 >= next_checkpoint && next_checkpoint <= 6.0 {
            checkpoints.push((t, g.clone()));
            next_checkpoint += 1.0;
        }
        if !hs.is_finite() {
            return Err(HfbError::NumericalAbort {
                t,
                reason: "non-finite pairing norm in diagonalization flow".into(),
            });
        }
        converged = hs < tol;
    }
    if !converged {
        return Err(HfbError::NonConvergence(format!(
            "diagonalization flow did not reach ‖σ‖ < {tol:.1e} within t = {t_max:.2}"
        )));
    }

    let (gamma_prime, clip_magnitude) = g.clip_psd();
    let map = Symplectomorphism::from_blocks(p.adjoint(), r.adjoint());
    let reconstructed = GeneralizedDensityMatrix::from_diag_and_map(&gamma_prime, &map);
    let residual = reconstructed
        .block_matrix()
        .sub(GeneralizedDensityMatrix::from_blocks(gamma, sigma).block_matrix())
        .hs_norm();

    Ok(DiagonalizationResult {
        gamma_prime,
        map,
        residual,
        sigma_decay: decay,
        gamma_checkpoints: checkpoints,
        clip_magnitude,
    })
}

// ---------------------------------------------------------------------------
// Stationary quasiparticle modes (translation-invariant contact problem)
// ---------------------------------------------------------------------------

/// One quasiparticle mode of the per-k 2×2 eigenvalue problem
///   a_k u − b v = E u,  ā_k v − b̄ u = −E v,  a_k = |k|² + c_h, b = c_k.
#[derive(Debug, Clone)]
pub struct BogoliubovMode {
    /// Dual-lattice vector k.
    pub k: Vec<f64>,
    /// Quasiparticle energy √(a_k² − |b|²) for stable modes; for unstable
    /// modes (a_k < |b|) the growth rate √(|b|² − a_k²).
    pub energy: f64,
    /// Hyperbolically normalized amplitudes, |u|² − |v|² = 1, for stable
    /// gapped modes. At a gapless mode (a_k = |b|) normalization is
    /// impossible; the unnormalized eigenvector (1, b̄/a) is stored and
    /// `gapless` is set.
    pub u: C64,
    pub v: C64,
    /// a_k ≥ |b| (real energy). Instability is data, not an error.
    pub stable: bool,
    pub gapless: bool,
}

/// Solve the per-mode problem with explicit contact-mode constants
/// a_k = |k|² + c_h and b = c_k.
pub fn bogoliubov_modes_with(c_h: f64, c_k: C64, grid: &Arc<TorusGrid>) -> Vec<BogoliubovMode> {
    (0..grid.site_count())
        .map(|flat| {
            let a = grid.mode_sq(flat) + c_h;
            let b = c_k;
            let e2 = a * a - b.norm_sqr();
            let scale = (a * a).max(b.norm_sqr()).max(1.0);
            let gapless = e2.abs() <= 1e-12 * scale;
            let stable = gapless || e2 > 0.0;
            let (energy, u, v) = if gapless {
                let v = if a.abs() > 0.0 {
                    b.conj() / a
                } else {
                    C64::new(0.0, 0.0)
                };
                (0.0, C64::new(1.0, 0.0), v)
            } else if stable {
                let e = e2.sqrt();
                let u = ((a + e) / (2.0 * e)).sqrt();
                let v = b.conj() / (2.0 * e * (a + e)).sqrt();
                (e, C64::new(u, 0.0), v)
            } else {
                ((-e2).sqrt(), C64::new(1.0, 0.0), C64::new(0.0, 0.0))
            };
            BogoliubovMode {
                k: grid.mode(flat),
                energy,
                u,
                v,
                stable,
                gapless,
            }
        })
        .collect()
}

/// Contact-mode quasiparticle spectrum for a homogeneous gas with total
/// density `n_total` and condensate density `n0`: with the stationary
/// chemical potential μ = g(2·n_total − n0) this gives a_k = |k|² + g·n0 and
/// b = g·n0 — gapless at k = 0 with the phonon dispersion
/// E_k = √(|k|²(|k|² + 2g·n0)).
pub fn bogoliubov_modes(
    n_total: f64,
    n0: f64,
    g: f64,
    grid: &Arc<TorusGrid>,
) -> Vec<BogoliubovMode> {
    let mu = g * (2.0 * n_total - n0);
    let c_h = 2.0 * g * n_total - mu;
    let c_k = C64::new(g * n0, 0.0);
    bogoliubov_modes_with(c_h, c_k, grid)
}

/// Assemble the translation-invariant (γ, σ) of a quasifree state built
/// from per-mode amplitudes (u_k, v_k) with occupations N_k:
/// γ̂(k) = N_k|u_k|² + (1+N_k)|v_k|², σ̂(k) = u_k·conj(v_k)·(1+2N_k).
pub fn assemble_from_modes(
    grid: &Arc<TorusGrid>,
    amplitudes: &[(C64, C64)],
    occupations: &[f64],
) -> (GridKernel, GridKernel) {
    assert_eq!(amplitudes.len(), grid.site_count());
    assert_eq!(occupations.len(), grid.site_count());
    let m = grid.site_count();
    let mut gamma_hat = Array1::<C64>::zeros(m);
    let mut sigma_hat = Array1::<C64>::zeros(m);
    for i in 0..m {
        let (u, v) = amplitudes[i];
        let n = occupations[i];
        gamma_hat[i] = C64::new(n * u.norm_sqr() + (1.0 + n) * v.norm_sqr(), 0.0);
        sigma_hat[i] = u * v.conj() * (1.0 + 2.0 * n);
    }
    (
        GridKernel::from_symbol(grid, &gamma_hat),
        GridKernel::from_symbol(grid, &sigma_hat),
    )
}

/// Mode-table CSV (kx.., E, Re u, Im u, Re v, Im v, stable flag).
pub fn modes_to_csv(modes: &[BogoliubovMode], dim: usize) -> String {
    let mut header: Vec<String> = (0..dim).map(|a| format!("k{a}")).collect();
    header.extend(
        ["E", "re_u", "im_u", "re_v", "im_v", "stable"]
            .iter()
            .map(|s| s.to_string()),
    );
    let mut out = header.join(",");
    out.push('\n');
    for m in modes {
        let mut row: Vec<String> = m.k.iter().map(|&x| crate::dynamics::fmt_g17(x)).collect();
        row.push(crate::dynamics::fmt_g17(m.energy));
        row.push(crate::dynamics::fmt_g17(m.u.re));
        row.push(crate::dynamics::fmt_g17(m.u.im));
        row.push(crate::dynamics::fmt_g17(m.v.re));
        row.push(crate::dynamics::fmt_g17(m.v.im));
        row.push(if m.stable { "1".into() } else { "0".into() });
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
