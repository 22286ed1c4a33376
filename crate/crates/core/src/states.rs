//! Quasifree-state data model: the triple (φ, γ, σ), admissibility checks,
//! the generalized one-particle density matrix Γ, and the Wick-expansion
//! correlation machinery.
//!
//! A quasifree state is determined by its first and second truncated
//! expectations
//!
//!   φ(x) = ω(ψ(x)),
//!   γ(x; y) = ω(ψ*(y)ψ(x)) − ω(ψ*(y))ω(ψ(x)),
//!   σ(x, y) = ω(ψ(x)ψ(y)) − ω(ψ(x))ω(ψ(y)),
//!
//! with γ Hermitian positive semidefinite and σ symmetric. Positivity of
//! Γ = [[γ, σ], [σ̄, 1+γ̄]] is the CCR constraint tying γ and σ together; on
//! the grid the identity block is the delta Δx^{−d}δ_{xy} and the CCR reads
//! [ψ(x), ψ*(y)] = Δx^{−d}δ_{xy}.

use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{HfbError, Result};
use crate::grid::{from_fourier, GridField, GridKernel, TorusGrid};
use crate::symplectic::{random_symplectomorphism, BlockMatrix, Symplectomorphism};

/// Relative PSD tolerance: eigenvalues above −(this)·‖·‖_op count as
/// non-negative.
pub const PSD_TOL_REL: f64 = 1e-10;
/// Absolute tolerance for Hermiticity / symmetry of the kernels.
pub const STRUCTURE_TOL: f64 = 1e-12;

/// The quasifree-state triple (φ, γ, σ).
#[derive(Debug, Clone)]
pub struct QuasifreeState {
    phi: GridField,
    gamma: GridKernel,
    sigma: GridKernel,
}

impl QuasifreeState {
    pub fn new(phi: GridField, gamma: GridKernel, sigma: GridKernel) -> Result<QuasifreeState> {
        if phi.grid() != gamma.grid() || phi.grid() != sigma.grid() {
            return Err(HfbError::ShapeMismatch {
                context: "QuasifreeState::new",
                expected: format!("{:?}", phi.grid()),
                got: "mismatched grids".into(),
            });
        }
        Ok(QuasifreeState { phi, gamma, sigma })
    }

    /// The Fock vacuum: φ = 0, γ = 0, σ = 0.
    pub fn vacuum(grid: &Arc<TorusGrid>) -> QuasifreeState {
        QuasifreeState {
            phi: GridField::zeros(grid),
            gamma: GridKernel::zeros(grid),
            sigma: GridKernel::zeros(grid),
        }
    }

    /// Pure condensate in a single grid mode: φ = amplitude·e^{ik·x}.
    pub fn plane_wave(grid: &Arc<TorusGrid>, mode_int: &[i64], amplitude: C64) -> QuasifreeState {
        QuasifreeState {
            phi: GridField::plane_wave(grid, mode_int).scale(amplitude),
            gamma: GridKernel::zeros(grid),
            sigma: GridKernel::zeros(grid),
        }
    }

    /// Single-mode squeezed state on the normalized constant mode:
    /// γ = sinh²r·P₀ and σ = cosh r·sinh r·e₀⊗e₀ (a pure quasifree state,
    /// saturating the Schur inequality).
    pub fn squeezed(grid: &Arc<TorusGrid>, r: f64) -> QuasifreeState {
        let e0 = GridField::constant(grid, C64::new(1.0 / grid.volume().sqrt(), 0.0));
        let p0 = GridKernel::ketbra(&e0, &e0);
        QuasifreeState {
            phi: GridField::zeros(grid),
            gamma: p0.scale(C64::new(r.sinh() * r.sinh(), 0.0)),
            sigma: GridKernel::sym_outer(&e0, &e0).scale(C64::new(r.cosh() * r.sinh(), 0.0)),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.phi.grid()
    }

    pub fn phi(&self) -> &GridField {
        &self.phi
    }

    pub fn gamma(&self) -> &GridKernel {
        &self.gamma
    }

    pub fn sigma(&self) -> &GridKernel {
        &self.sigma
    }

    pub fn into_parts(self) -> (GridField, GridKernel, GridKernel) {
        (self.phi, self.gamma, self.sigma)
    }

    /// γ^φ = γ + |φ⟩⟨φ|.
    pub fn gamma_phi(&self) -> GridKernel {
        self.gamma.add(&GridKernel::ketbra(&self.phi, &self.phi))
    }

    /// σ^φ = σ + φ⊗φ.
    pub fn sigma_phi(&self) -> GridKernel {
        self.sigma.add(&GridKernel::sym_outer(&self.phi, &self.phi))
    }

    pub fn is_finite(&self) -> bool {
        self.phi.is_finite() && self.gamma.is_finite() && self.sigma.is_finite()
    }

    /// Hermitize γ, clip its negative eigenvalues at 0, symmetrize σ.
    /// Explicit repair for integrator drift; nothing in the crate applies it
    /// silently.
    pub fn repair(&self) -> QuasifreeState {
        let (gamma, _) = self.gamma.clip_psd();
        QuasifreeState {
            phi: self.phi.clone(),
            gamma,
            sigma: self.sigma.symmetrize(),
        }
    }
}

// ---------------------------------------------------------------------------
// Admissibility
// ---------------------------------------------------------------------------

/// Per-invariant worst violations of the positivity/symmetry constraints on
/// a quasifree state. All entries are ≥ 0; zero means the invariant holds
/// exactly.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    /// max |γ(x,y) − conj(γ(y,x))|.
    pub gamma_hermiticity: f64,
    /// max(0, −λ_min(γ)).
    pub gamma_negativity: f64,
    /// max |σ(x,y) − σ(y,x)|.
    pub sigma_symmetry: f64,
    /// max(0, −λ_min(γ − σ(1+γ̄)^{−1}σ*)); infinite if 1+γ̄ is singular.
    pub schur_negativity: f64,
    /// max(0, ½‖σ‖²_HS − ‖γ‖_op(1 + Tr γ)).
    pub trace_bound_excess: f64,
    /// ‖γ‖_op, the scale used for the relative PSD tolerances.
    pub gamma_op_norm: f64,
}

impl AdmissibilityReport {
    /// Largest violation normalized against its tolerance scale.
    pub fn max_violation(&self) -> f64 {
        self.gamma_hermiticity
            .max(self.gamma_negativity)
            .max(self.sigma_symmetry)
            .max(self.schur_negativity)
            .max(self.trace_bound_excess)
    }

    pub fn is_admissible(&self) -> bool {
        let psd_tol = PSD_TOL_REL * self.gamma_op_norm.max(1.0);
        let structure_tol = STRUCTURE_TOL * self.gamma_op_norm.max(1.0);
        self.gamma_hermiticity <= structure_tol
            && self.sigma_symmetry <= structure_tol
            && self.gamma_negativity <= psd_tol
            && self.schur_negativity <= psd_tol
            && self.trace_bound_excess <= PSD_TOL_REL * (1.0 + self.gamma_op_norm)
    }
}

/// Evaluate the five admissibility invariants of Γ ≥ 0.
pub fn check_admissible(rho: &QuasifreeState) -> AdmissibilityReport {
    let gamma = rho.gamma();
    let sigma = rho.sigma();
    let gamma_hermiticity = gamma.hermiticity_violation();
    let sigma_symmetry = sigma.symmetry_violation();
    let gamma_op_norm = gamma.op_norm();
    let gamma_negativity = (-gamma.min_eig()).max(0.0);

    // Schur complement γ − σ(1+γ̄)^{−1}σ*
    let id = GridKernel::identity(rho.grid());
    let one_plus = id.add(&gamma.conj()).hermitize();
    let schur_negativity = if one_plus.min_eig() <= 0.0 {
        f64::INFINITY
    } else {
        let inv = one_plus.inv_hermitian();
        let schur = gamma.sub(&sigma.compose(&inv).compose(&sigma.adjoint()));
        (-schur.hermitize().min_eig()).max(0.0)
    };

    // ½‖σ‖²_HS ≤ ‖γ‖_op (1 + Tr γ)
    let hs = sigma.hs_norm();
    let bound = gamma_op_norm * (1.0 + gamma.trace().re);
    let trace_bound_excess = (0.5 * hs * hs - bound).max(0.0);

    AdmissibilityReport {
        gamma_hermiticity,
        gamma_negativity,
        sigma_symmetry,
        schur_negativity,
        trace_bound_excess,
        gamma_op_norm,
    }
}

/// Check admissibility, returning an error carrying the report when the
/// state fails.
pub fn require_admissible(rho: &QuasifreeState) -> Result<AdmissibilityReport> {
    let report = check_admissible(rho);
    if report.is_admissible() {
        Ok(report)
    } else {
        Err(HfbError::Inadmissible(
            format!("{report:?}"),
            report.max_violation(),
        ))
    }
}

// ---------------------------------------------------------------------------
// Generalized one-particle density matrix
// ---------------------------------------------------------------------------

/// Γ = [[γ, σ], [σ̄, 1+γ̄]] assembled as a dense 2M×2M kernel; the identity
/// block is the grid delta Δx^{−d}δ_{xy}.
#[derive(Debug, Clone)]
pub struct GeneralizedDensityMatrix {
    inner: BlockMatrix,
}

impl GeneralizedDensityMatrix {
    /// Assemble from kernels without admissibility gating (used internally
    /// and by diagnostics that watch inadmissible drift).
    pub fn from_blocks(gamma: &GridKernel, sigma: &GridKernel) -> GeneralizedDensityMatrix {
        let id = GridKernel::identity(gamma.grid());
        let lower_right = id.add(&gamma.conj());
        GeneralizedDensityMatrix {
            inner: BlockMatrix::from_blocks(gamma, sigma, &sigma.conj(), &lower_right),
        }
    }

    /// Γ' = diag(γ', 1 + γ̄') for a diagonalized density γ'.
    pub fn from_diagonalized(gamma_prime: &GridKernel) -> GeneralizedDensityMatrix {
        let grid = gamma_prime.grid();
        let id = GridKernel::identity(grid);
        GeneralizedDensityMatrix {
            inner: BlockMatrix::from_blocks(
                gamma_prime,
                &GridKernel::zeros(grid),
                &GridKernel::zeros(grid),
                &id.add(&gamma_prime.conj()),
            ),
        }
    }

    /// Reconstruct Γ = 𝒰 diag(γ', 1+γ̄') 𝒰*.
    pub fn from_diag_and_map(
        gamma_prime: &GridKernel,
        map: &Symplectomorphism,
    ) -> GeneralizedDensityMatrix {
        let gp = GeneralizedDensityMatrix::from_diagonalized(gamma_prime);
        GeneralizedDensityMatrix {
            inner: map.conjugate_gamma(&gp.inner),
        }
    }

    pub fn block_matrix(&self) -> &BlockMatrix {
        &self.inner
    }

    pub fn gamma_block(&self) -> GridKernel {
        self.inner.block(0, 0)
    }

    pub fn sigma_block(&self) -> GridKernel {
        self.inner.block(0, 1)
    }

    pub fn hermiticity_violation(&self) -> f64 {
        self.inner.hermiticity_violation()
    }

    pub fn min_eig(&self) -> f64 {
        self.inner.min_eig()
    }
}

/// Assemble Γ from an admissible state (errors on inadmissible input).
pub fn build_gamma_matrix(rho: &QuasifreeState) -> Result<GeneralizedDensityMatrix> {
    require_admissible(rho)?;
    Ok(GeneralizedDensityMatrix::from_blocks(
        rho.gamma(),
        rho.sigma(),
    ))
}

// ---------------------------------------------------------------------------
// Wick expectations
// ---------------------------------------------------------------------------

/// Field-operator flavor in a correlation monomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Annihilate,
    Create,
}

/// One factor ψ^♯(x_site) of a correlation monomial.
#[derive(Debug, Clone, Copy)]
pub struct FieldOp {
    pub site: usize,
    pub flavor: Flavor,
}

impl FieldOp {
    pub fn annihilate(site: usize) -> FieldOp {
        FieldOp {
            site,
            flavor: Flavor::Annihilate,
        }
    }

    pub fn create(site: usize) -> FieldOp {
        FieldOp {
            site,
            flavor: Flavor::Create,
        }
    }
}

/// First moment ω(ψ^♯(x)).
fn first_moment(rho: &QuasifreeState, op: FieldOp) -> C64 {
    match op.flavor {
        Flavor::Annihilate => rho.phi.values()[op.site],
        Flavor::Create => rho.phi.values()[op.site].conj(),
    }
}

/// Truncated two-point function ω^T(ψ^♯₁ψ^♯₂) in the given operator order;
/// the (ψ, ψ*) case carries the CCR delta Δx^{−d}δ_{xy}.
fn truncated_two(rho: &QuasifreeState, a: FieldOp, b: FieldOp) -> C64 {
    use Flavor::*;
    let (i, j) = (a.site, b.site);
    match (a.flavor, b.flavor) {
        (Annihilate, Annihilate) => rho.sigma.values()[[i, j]],
        (Create, Create) => rho.sigma.values()[[j, i]].conj(),
        (Create, Annihilate) => rho.gamma.values()[[j, i]],
        (Annihilate, Create) => {
            let mut z = rho.gamma.values()[[i, j]];
            if i == j {
                z += C64::new(1.0 / rho.grid().cell_volume(), 0.0);
            }
            z
        }
    }
}

/// Full two-point function ω(ψ^♯₁ψ^♯₂) = ω^T + ω(ψ^♯₁)ω(ψ^♯₂).
fn full_two(rho: &QuasifreeState, a: FieldOp, b: FieldOp) -> C64 {
    truncated_two(rho, a, b) + first_moment(rho, a) * first_moment(rho, b)
}

/// Expectation ω(ψ^♯(x₁)⋯ψ^♯(xₙ)) of a monomial of length 1–4, evaluated
/// with the quasifree Wick expansion: the 3- and 4-point cases use the
/// pairing sums over full two-point functions with the −2·∏ω(ψᵢ^♯)
/// correction.
pub fn wick_expectation(rho: &QuasifreeState, ops: &[FieldOp]) -> Result<C64> {
    if ops.is_empty() || ops.len() > 4 {
        return Err(HfbError::InvalidParameter(format!(
            "wick_expectation supports monomials of length 1..=4, got {}",
            ops.len()
        )));
    }
    let m = rho.grid().site_count();
    if let Some(bad) = ops.iter().find(|o| o.site >= m) {
        return Err(HfbError::InvalidParameter(format!(
            "field operator site {} out of range (grid has {m} sites)",
            bad.site
        )));
    }
    Ok(match ops.len() {
        1 => first_moment(rho, ops[0]),
        2 => full_two(rho, ops[0], ops[1]),
        3 => {
            let m1 = first_moment(rho, ops[0]);
            let m2 = first_moment(rho, ops[1]);
            let m3 = first_moment(rho, ops[2]);
            m1 * full_two(rho, ops[1], ops[2])
                + m2 * full_two(rho, ops[0], ops[2])
                + m3 * full_two(rho, ops[0], ops[1])
                - 2.0 * m1 * m2 * m3
        }
        4 => {
            let prod: C64 = ops.iter().map(|&o| first_moment(rho, o)).product();
            full_two(rho, ops[0], ops[1]) * full_two(rho, ops[2], ops[3])
                + full_two(rho, ops[0], ops[2]) * full_two(rho, ops[1], ops[3])
                + full_two(rho, ops[0], ops[3]) * full_two(rho, ops[1], ops[2])
                - 2.0 * prod
        }
        _ => unreachable!(),
    })
}

// ---------------------------------------------------------------------------
// Random admissible states
// ---------------------------------------------------------------------------

/// Seeded random admissible state: Γ = 𝒰 diag(γ', 1+γ̄') 𝒰* with a random
/// positive diagonal γ', a random symplectomorphism 𝒰, and a random φ.
/// `scale = 0` produces the vacuum; equal seeds give bit-identical states.
pub fn sample_random_state(grid: &Arc<TorusGrid>, seed: u64, scale: f64) -> QuasifreeState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = grid.site_count();
    let w = grid.cell_volume();

    // random positive diagonal γ' (kernel of diag(d_i) is d_i/Δx^d)
    let mut gp = GridKernel::zeros(grid);
    for i in 0..m {
        gp.values_mut()[[i, i]] = C64::new(scale * rng.gen::<f64>() / w, 0.0);
    }

    let map = random_symplectomorphism(grid, &mut rng, 0.5 * scale);
    let gamma_mat = GeneralizedDensityMatrix::from_diag_and_map(&gp, &map);
    let gamma = gamma_mat.gamma_block().hermitize();
    let sigma = gamma_mat.sigma_block().symmetrize();

    let mut phi = GridField::zeros(grid);
    for i in 0..m {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        phi.values_mut()[i] = C64::new(re, im) * 0.3 * scale;
    }

    QuasifreeState { phi, gamma, sigma }
}

/// Knobs for the smooth sampler: thermal occupation scale, squeezing scale,
/// condensate amplitude and the spectral cutoff k_c of the e^{−|k|²/k_c²}
/// damping.
#[derive(Debug, Clone, Copy)]
pub struct SmoothStateSpec {
    pub occupation: f64,
    pub squeeze: f64,
    pub condensate: f64,
    pub mode_cutoff: f64,
}

/// Seeded random admissible state that is smooth on the grid: a thermal
/// occupation spectrum with per-mode squeezing, both damped by
/// e^{−|k|²/k_c²}, plus a condensate built from the low modes. Used as
/// initial data for the conservation runs, where spectral smoothness keeps
/// the explicit integrator in its accuracy regime.
pub fn sample_smooth_state(
    grid: &Arc<TorusGrid>,
    seed: u64,
    scale: f64,
    mode_cutoff: f64,
) -> QuasifreeState {
    sample_smooth_state_spec(
        grid,
        seed,
        &SmoothStateSpec {
            occupation: scale,
            squeeze: 0.6 * scale,
            condensate: 0.5 * scale,
            mode_cutoff,
        },
    )
}

/// `sample_smooth_state` with the occupation/squeeze/condensate scales set
/// independently.
pub fn sample_smooth_state_spec(
    grid: &Arc<TorusGrid>,
    seed: u64,
    spec: &SmoothStateSpec,
) -> QuasifreeState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mode_cutoff = spec.mode_cutoff;
    let m = grid.site_count();
    let n = grid.points_per_side();
    let d = grid.dim();

    let damp = |flat: usize| (-grid.mode_sq(flat) / (mode_cutoff * mode_cutoff)).exp();

    // per-mode data assigned pairwise so that k and −k carry equal values
    let mut occ = vec![0.0f64; m];
    let mut sq_r = vec![0.0f64; m];
    let mut sq_phase = vec![0.0f64; m];
    let mut visited = vec![false; m];
    for flat in 0..m {
        if visited[flat] {
            continue;
        }
        let neg = negate_index(n, d, flat);
        let nk = spec.occupation * (0.5 + 0.5 * rng.gen::<f64>()) * damp(flat);
        let rk = spec.squeeze * rng.gen::<f64>() * damp(flat);
        let th = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
        for &ix in [flat, neg].iter() {
            occ[ix] = nk;
            sq_r[ix] = rk;
            sq_phase[ix] = th;
            visited[ix] = true;
        }
    }

    let mut gamma_hat = Array1::<C64>::zeros(m);
    let mut sigma_hat = Array1::<C64>::zeros(m);
    for flat in 0..m {
        let (c, s) = (sq_r[flat].cosh(), sq_r[flat].sinh());
        let nk = occ[flat];
        gamma_hat[flat] = C64::new(nk * c * c + (1.0 + nk) * s * s, 0.0);
        // u = cosh r, v = e^{iθ} sinh r → σ̂ = u·conj(v)·(1+2N)
        sigma_hat[flat] = C64::from_polar(c * s * (1.0 + 2.0 * nk), -sq_phase[flat]);
    }
    let gamma = GridKernel::from_symbol(grid, &gamma_hat).hermitize();
    let sigma = GridKernel::from_symbol(grid, &sigma_hat).symmetrize();

    // condensate from the low modes
    let mut phi_hat = GridField::zeros(grid);
    let vol = grid.volume();
    for flat in 0..m {
        if grid.mode_sq(flat) <= mode_cutoff * mode_cutoff {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            phi_hat.values_mut()[flat] =
                C64::new(re, im) * spec.condensate * damp(flat) * vol;
        }
    }
    let phi = from_fourier(&phi_hat);

    QuasifreeState { phi, gamma, sigma }
}

/// Flat index with all per-axis digits negated mod N (index of −k, or of −x).
fn negate_index(n: usize, d: usize, flat: usize) -> usize {
    let mut rest = flat;
    let mut digits = vec![0usize; d];
    for axis in (0..d).rev() {
        digits[axis] = rest % n;
        rest /= n;
    }
    let mut out = 0usize;
    for axis in 0..d {
        out = out * n + (n - digits[axis]) % n;
    }
    out
}
