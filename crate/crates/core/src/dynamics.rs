//! Time integration of the HFB equations
//!
//!   i∂φ = h(γ)φ + k(σ^φ)φ̄,
//!   i∂γ = [h(γ^φ), γ] + k(σ^φ)σ* − σ k(σ^φ)*,
//!   i∂σ = [h(γ^φ), σ]₊ + [k(σ^φ), γ]₊ + k(σ^φ),
//!
//! with [A,B]₊ = ABᵀ + BAᵀ, γ^φ = γ + |φ⟩⟨φ|, σ^φ = σ + φ⊗φ.
//!
//! The default scheme is classical RK4 on the full right-hand side. A Strang
//! splitting is offered for V = 0, where the kinetic half-steps are applied
//! as exact spectral phases; the pairing source k[σ] sits in the nonlinear
//! stage because it is not Fourier-diagonal, so no exact exponential of the
//! full linear part is available.

use num_complex::Complex64 as C64;

use crate::error::{HfbError, Result};
use crate::grid::{GridField, GridKernel};
use crate::meanfield::{b_op, k_op, laplacian_kernel, PairPotential};
use crate::observables::{energy, particle_number};
use crate::states::{check_admissible, GeneralizedDensityMatrix, QuasifreeState};
use crate::symplectic::{check_symplectic, BlockHamiltonian, Symplectomorphism};

/// Time-derivative triple (∂φ, ∂γ, ∂σ). ∂γ is Hermitian and ∂σ symmetric
/// when evaluated on an admissible state (so i·∂γ is an anti-Hermitian
/// generator, matching the commutator structure of the γ equation).
#[derive(Debug, Clone)]
pub struct HfbRhs {
    pub dphi: GridField,
    pub dgamma: GridKernel,
    pub dsigma: GridKernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Rk4,
    StrangSplit,
}

#[derive(Debug, Clone)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub t_final: f64,
    /// Record observables every this many steps (≥ 1).
    pub output_stride: usize,
    /// Re-hermitize γ, clip its spectrum at 0 and re-symmetrize σ after each
    /// step. Off by default: structural drift is a diagnostic, not noise.
    pub repair_drift: bool,
    /// Keep per-record state snapshots in the trajectory.
    pub store_snapshots: bool,
}

impl IntegratorConfig {
    pub fn rk4(dt: f64, t_final: f64) -> IntegratorConfig {
        IntegratorConfig {
            dt,
            scheme: Scheme::Rk4,
            t_final,
            output_stride: 1,
            repair_drift: false,
            store_snapshots: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(HfbError::InvalidParameter(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(HfbError::InvalidParameter(format!(
                "t_final must be >= 0, got {}",
                self.t_final
            )));
        }
        if self.output_stride == 0 {
            return Err(HfbError::InvalidParameter("output_stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Hard ceiling on structural violations before the integrator aborts.
pub const VIOLATION_CEILING: f64 = 1e-4;

/// Entry gate for the integrators: initial data must be admissible up to
/// the integration ceiling (restart states carry O(dt⁴) positivity drift;
/// genuinely inadmissible Γ₀ is refused, its dynamics being mathematically
/// open).
fn gate_initial_state(rho0: &QuasifreeState) -> Result<()> {
    let report = check_admissible(rho0);
    let scale = report.gamma_op_norm.max(1.0);
    if report.max_violation() > VIOLATION_CEILING * scale {
        return Err(HfbError::Inadmissible(
            format!("{report:?}"),
            report.max_violation(),
        ));
    }
    Ok(())
}

/// Per-record observables along a trajectory.
#[derive(Debug, Clone)]
pub struct ObservableRecord {
    pub step: usize,
    pub t: f64,
    pub particle_number: f64,
    pub energy: f64,
    pub min_eig_gamma_matrix: f64,
    pub herm_violation: f64,
    pub symm_violation: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<ObservableRecord>,
    /// (t, state) pairs at record points when snapshot storage is on.
    pub snapshots: Vec<(f64, QuasifreeState)>,
    pub final_state: QuasifreeState,
}

impl Trajectory {
    /// CSV export with 17-significant-digit floats (round-trip exact).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,N,E,min_eig_Gamma,herm_violation,symm_violation\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                fmt_g17(r.t),
                fmt_g17(r.particle_number),
                fmt_g17(r.energy),
                fmt_g17(r.min_eig_gamma_matrix),
                fmt_g17(r.herm_violation),
                fmt_g17(r.symm_violation)
            ));
        }
        out
    }
}

/// 17 significant digits, round-trip exact for f64.
pub fn fmt_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Cached per-run pieces (the dense kinetic kernel is reused across stages).
pub(crate) struct HfbContext {
    pot: PairPotential,
    v_ext: GridField,
    kinetic: GridKernel,
}

impl HfbContext {
    pub(crate) fn new(grid: &std::sync::Arc<crate::grid::TorusGrid>, pot: &PairPotential, v_ext: &GridField) -> HfbContext {
        HfbContext {
            pot: pot.clone(),
            v_ext: v_ext.clone(),
            kinetic: laplacian_kernel(grid),
        }
    }

    /// Λ(Γ) blocks a = h(γ^φ), b = k(σ^φ) together with the pieces needed
    /// for the φ equation.
    fn lambda(&self, rho: &QuasifreeState, include_kinetic: bool) -> BlockHamiltonian {
        let gamma_phi = rho.gamma_phi();
        let sigma_phi = rho.sigma_phi();
        let b = b_op(&self.pot, &gamma_phi);
        let mut a = b
            .nonlocal()
            .add(&GridKernel::mult_operator(&b.multiplication().add(&self.v_ext)));
        if include_kinetic {
            a = a.add(&self.kinetic);
        }
        let k = k_op(&self.pot, &sigma_phi);
        BlockHamiltonian::new(a, k)
    }

    fn rhs(&self, rho: &QuasifreeState, include_kinetic: bool) -> (HfbRhs, BlockHamiltonian) {
        let lam = self.lambda(rho, include_kinetic);
        let gamma = rho.gamma();
        let sigma = rho.sigma();
        let k = lam.b();

        // i∂φ = h(γ)φ + k(σ^φ)φ̄  (h with plain γ, not γ^φ)
        let b_plain = b_op(&self.pot, gamma);
        let mut hphi = b_plain
            .multiplication()
            .add(&self.v_ext)
            .mul_pointwise(rho.phi())
            .add(&b_plain.nonlocal().apply(rho.phi()));
        if include_kinetic {
            hphi = hphi.add(&self.kinetic.apply(rho.phi()));
        }
        let iphi = hphi.add(&k.apply(&rho.phi().conj()));

        // i∂γ = [a, γ] + kσ* − σk*
        let a = lam.a();
        let igamma = a
            .compose(gamma)
            .sub(&gamma.compose(a))
            .add(&k.compose(&sigma.adjoint()))
            .sub(&sigma.compose(&k.adjoint()));

        // i∂σ = [a, σ]₊ + [k, γ]₊ + k
        let isigma = a
            .compose(&sigma.transpose())
            .add(&sigma.compose(&a.transpose()))
            .add(&k.compose(&gamma.transpose()))
            .add(&gamma.compose(&k.transpose()))
            .add(k);

        let minus_i = C64::new(0.0, -1.0);
        (
            HfbRhs {
                dphi: iphi.scale(minus_i),
                dgamma: igamma.scale(minus_i),
                dsigma: isigma.scale(minus_i),
            },
            lam,
        )
    }
}

/// Right-hand side ∂_t(φ, γ, σ) of the HFB equations.
pub fn hfb_rhs(rho: &QuasifreeState, pot: &PairPotential, v_ext: &GridField) -> Result<HfbRhs> {
    check_shapes(rho, v_ext)?;
    let ctx = HfbContext::new(rho.grid(), pot, v_ext);
    Ok(ctx.rhs(rho, true).0)
}

fn check_shapes(rho: &QuasifreeState, v_ext: &GridField) -> Result<()> {
    if rho.grid() != v_ext.grid() {
        return Err(HfbError::ShapeMismatch {
            context: "hfb_rhs",
            expected: format!("{:?}", rho.grid()),
            got: format!("{:?}", v_ext.grid()),
        });
    }
    Ok(())
}

fn axpy(y: &QuasifreeState, k: &HfbRhs, c: f64) -> QuasifreeState {
    let c = C64::new(c, 0.0);
    QuasifreeState::new(
        y.phi().add(&k.dphi.scale(c)),
        y.gamma().add(&k.dgamma.scale(c)),
        y.sigma().add(&k.dsigma.scale(c)),
    )
    .expect("axpy preserves shapes")
}

fn rhs_axpy(a: &HfbRhs, b: &HfbRhs, c: f64) -> HfbRhs {
    let c = C64::new(c, 0.0);
    HfbRhs {
        dphi: a.dphi.add(&b.dphi.scale(c)),
        dgamma: a.dgamma.add(&b.dgamma.scale(c)),
        dsigma: a.dsigma.add(&b.dsigma.scale(c)),
    }
}

fn rk4_step(ctx: &HfbContext, y: &QuasifreeState, dt: f64, include_kinetic: bool) -> QuasifreeState {
    let k1 = ctx.rhs(y, include_kinetic).0;
    let k2 = ctx.rhs(&axpy(y, &k1, dt / 2.0), include_kinetic).0;
    let k3 = ctx.rhs(&axpy(y, &k2, dt / 2.0), include_kinetic).0;
    let k4 = ctx.rhs(&axpy(y, &k3, dt), include_kinetic).0;
    let mut incr = rhs_axpy(&k1, &k2, 2.0);
    incr = rhs_axpy(&incr, &k3, 2.0);
    incr = rhs_axpy(&incr, &k4, 1.0);
    axpy(y, &incr, dt / 6.0)
}

// ---------------------------------------------------------------------------
// Exact kinetic propagator (Strang splitting, V = 0)
// ---------------------------------------------------------------------------

/// Exact propagator exp(−i·dt·(−Δ)) applied per component:
/// φ ← Eφ, γ ← EγE*, σ ← EσEᵀ, built from the spectral phases
/// e^{−i·dt·|k|²}. Unitary, so ‖φ‖, Tr γ and ‖σ‖_HS are preserved to
/// roundoff.
pub struct LinearPropagator {
    propagator: GridKernel,
}

impl LinearPropagator {
    /// Restricted to V = 0 (the only case where the kinetic part is exactly
    /// diagonal in Fourier space).
    pub fn new(
        dt: f64,
        grid: &std::sync::Arc<crate::grid::TorusGrid>,
        v_ext: &GridField,
    ) -> Result<LinearPropagator> {
        if v_ext.max_abs() > 0.0 {
            return Err(HfbError::Unsupported(
                "the exact kinetic propagator requires V = 0".into(),
            ));
        }
        let symbol = crate::grid::laplacian_symbol(grid)
            .mapv(|k2| C64::from_polar(1.0, -dt * k2));
        Ok(LinearPropagator {
            propagator: GridKernel::from_symbol(grid, &symbol),
        })
    }

    pub fn apply(&self, rho: &QuasifreeState) -> QuasifreeState {
        let e = &self.propagator;
        QuasifreeState::new(
            e.apply(rho.phi()),
            e.compose(rho.gamma()).compose(&e.adjoint()),
            e.compose(rho.sigma()).compose(&e.transpose()),
        )
        .expect("propagator preserves shapes")
    }
}

/// One step of the configured scheme.
pub fn step(
    rho: &QuasifreeState,
    pot: &PairPotential,
    v_ext: &GridField,
    cfg: &IntegratorConfig,
) -> Result<QuasifreeState> {
    cfg.validate()?;
    check_shapes(rho, v_ext)?;
    let ctx = HfbContext::new(rho.grid(), pot, v_ext);
    let next = match cfg.scheme {
        Scheme::Rk4 => rk4_step(&ctx, rho, cfg.dt, true),
        Scheme::StrangSplit => {
            let half = LinearPropagator::new(cfg.dt / 2.0, rho.grid(), v_ext)?;
            let a = half.apply(rho);
            let b = rk4_step(&ctx, &a, cfg.dt, false);
            half.apply(&b)
        }
    };
    if !next.is_finite() {
        return Err(HfbError::NumericalAbort {
            t: cfg.dt,
            reason: "non-finite value after one step".into(),
        });
    }
    Ok(next)
}

fn make_record(
    step_idx: usize,
    t: f64,
    rho: &QuasifreeState,
    pot: &PairPotential,
    v_ext: &GridField,
) -> ObservableRecord {
    let gm = GeneralizedDensityMatrix::from_blocks(rho.gamma(), rho.sigma());
    ObservableRecord {
        step: step_idx,
        t,
        particle_number: particle_number(rho),
        energy: energy(rho, pot, v_ext),
        min_eig_gamma_matrix: gm.min_eig(),
        herm_violation: rho.gamma().hermiticity_violation(),
        symm_violation: rho.sigma().symmetry_violation(),
    }
}

/// Integrate from an admissible initial state, recording observables every
/// `output_stride` steps. Aborts on NaN and when structural violations pass
/// the hard ceiling.
pub fn evolve(
    rho0: &QuasifreeState,
    pot: &PairPotential,
    v_ext: &GridField,
    cfg: &IntegratorConfig,
) -> Result<Trajectory> {
    evolve_with_observer(rho0, pot, v_ext, cfg, |_| {})
}

/// As `evolve`, invoking the observer at every record point.
pub fn evolve_with_observer(
    rho0: &QuasifreeState,
    pot: &PairPotential,
    v_ext: &GridField,
    cfg: &IntegratorConfig,
    mut observer: impl FnMut(&ObservableRecord),
) -> Result<Trajectory> {
    cfg.validate()?;
    check_shapes(rho0, v_ext)?;
    gate_initial_state(rho0)?;

    let n_steps = (cfg.t_final / cfg.dt).round() as usize;
    let ctx = HfbContext::new(rho0.grid(), pot, v_ext);
    let strang_half = match cfg.scheme {
        Scheme::StrangSplit => Some(LinearPropagator::new(cfg.dt / 2.0, rho0.grid(), v_ext)?),
        Scheme::Rk4 => None,
    };

    let mut state = rho0.clone();
    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    let mut record = |idx: usize, t: f64, s: &QuasifreeState, recs: &mut Vec<ObservableRecord>, snaps: &mut Vec<(f64, QuasifreeState)>| -> Result<()> {
        let r = make_record(idx, t, s, pot, v_ext);
        if r.herm_violation > VIOLATION_CEILING
            || r.symm_violation > VIOLATION_CEILING
            || r.min_eig_gamma_matrix < -VIOLATION_CEILING
        {
            return Err(HfbError::NumericalAbort {
                t,
                reason: format!(
                    "admissibility violation past ceiling: herm {:.3e}, symm {:.3e}, min eig {:.3e}",
                    r.herm_violation, r.symm_violation, r.min_eig_gamma_matrix
                ),
            });
        }
        observer(&r);
        recs.push(r);
        if cfg.store_snapshots {
            snaps.push((t, s.clone()));
        }
        Ok(())
    };

    record(0, 0.0, &state, &mut records, &mut snapshots)?;
    for j in 1..=n_steps {
        let t = j as f64 * cfg.dt;
        state = match cfg.scheme {
            Scheme::Rk4 => rk4_step(&ctx, &state, cfg.dt, true),
            Scheme::StrangSplit => {
                let half = strang_half.as_ref().unwrap();
                let a = half.apply(&state);
                let b = rk4_step(&ctx, &a, cfg.dt, false);
                half.apply(&b)
            }
        };
        if !state.is_finite() {
            return Err(HfbError::NumericalAbort {
                t,
                reason: "non-finite value during integration".into(),
            });
        }
        if cfg.repair_drift {
            state = state.repair();
        }
        if j % cfg.output_stride == 0 || j == n_steps {
            record(j, t, &state, &mut records, &mut snapshots)?;
        }
    }

    Ok(Trajectory {
        records,
        snapshots,
        final_state: state,
    })
}

// ---------------------------------------------------------------------------
// Joint state + symplectomorphism transport
// ---------------------------------------------------------------------------

/// Evolve the state and a diagonalizing symplectomorphism together:
/// i∂𝒰*_t = 𝒮Λ(Γ_t)𝒰*_t driven by the Λ of the jointly integrated state
/// (the RK4 stages share Λ between the two equations). With
/// 𝒰₀* Γ'₀ 𝒰₀ = Γ₀, the transport identity Γ_t = 𝒰_t* Γ'₀ 𝒰_t holds up to
/// integration error.
pub fn evolve_with_transport(
    rho0: &QuasifreeState,
    u0: &Symplectomorphism,
    pot: &PairPotential,
    v_ext: &GridField,
    cfg: &IntegratorConfig,
) -> Result<(Trajectory, Vec<(f64, Symplectomorphism)>)> {
    cfg.validate()?;
    check_shapes(rho0, v_ext)?;
    gate_initial_state(rho0)?;
    if cfg.scheme != Scheme::Rk4 {
        return Err(HfbError::Unsupported(
            "joint transport integration supports the rk4 scheme only".into(),
        ));
    }
    let start_violation = check_symplectic(u0);
    if start_violation > 1e-8 {
        return Err(HfbError::InvalidParameter(format!(
            "initial map violates the symplectic identities by {start_violation:.3e}"
        )));
    }

    let ctx = HfbContext::new(rho0.grid(), pot, v_ext);
    let n_steps = (cfg.t_final / cfg.dt).round() as usize;

    // evolve p = u*, r = v* (the adjoint blocks close under the flow):
    //   ∂p = −i(a p + b r),  ∂r = +i(b̄ p + ā r)
    let mut p = u0.u().adjoint();
    let mut r = u0.v().adjoint();
    let mut state = rho0.clone();

    let deriv = |lam: &BlockHamiltonian, p: &GridKernel, r: &GridKernel| -> (GridKernel, GridKernel) {
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

    let mut maps = Vec::new();
    let push_map = |t: f64, p: &GridKernel, r: &GridKernel, maps: &mut Vec<(f64, Symplectomorphism)>| -> Result<()> {
        let map = Symplectomorphism::from_blocks(p.adjoint(), r.adjoint());
        let violation = check_symplectic(&map);
        if violation > 1e-6 {
            return Err(HfbError::NumericalAbort {
                t,
                reason: format!("symplectic identity violation {violation:.3e} past ceiling"),
            });
        }
        maps.push((t, map));
        Ok(())
    };
    push_map(0.0, &p, &r, &mut maps)?;

    let mut records = Vec::new();
    let mut snapshots = Vec::new();
    records.push(make_record(0, 0.0, &state, pot, v_ext));
    if cfg.store_snapshots {
        snapshots.push((0.0, state.clone()));
    }

    for j in 1..=n_steps {
        let t = j as f64 * cfg.dt;
        let dt = cfg.dt;

        let (k1, lam1) = ctx.rhs(&state, true);
        let (dp1, dr1) = deriv(&lam1, &p, &r);

        let y2 = axpy(&state, &k1, dt / 2.0);
        let p2 = p.add(&dp1.scale(C64::new(dt / 2.0, 0.0)));
        let r2 = r.add(&dr1.scale(C64::new(dt / 2.0, 0.0)));
        let (k2, lam2) = ctx.rhs(&y2, true);
        let (dp2, dr2) = deriv(&lam2, &p2, &r2);

        let y3 = axpy(&state, &k2, dt / 2.0);
        let p3 = p.add(&dp2.scale(C64::new(dt / 2.0, 0.0)));
        let r3 = r.add(&dr2.scale(C64::new(dt / 2.0, 0.0)));
        let (k3, lam3) = ctx.rhs(&y3, true);
        let (dp3, dr3) = deriv(&lam3, &p3, &r3);

        let y4 = axpy(&state, &k3, dt);
        let p4 = p.add(&dp3.scale(C64::new(dt, 0.0)));
        let r4 = r.add(&dr3.scale(C64::new(dt, 0.0)));
        let (k4, lam4) = ctx.rhs(&y4, true);
        let (dp4, dr4) = deriv(&lam4, &p4, &r4);

        let mut incr = rhs_axpy(&k1, &k2, 2.0);
        incr = rhs_axpy(&incr, &k3, 2.0);
        incr = rhs_axpy(&incr, &k4, 1.0);
        state = axpy(&state, &incr, dt / 6.0);

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

        if !state.is_finite() || !p.is_finite() || !r.is_finite() {
            return Err(HfbError::NumericalAbort {
                t,
                reason: "non-finite value during joint integration".into(),
            });
        }
        if j % cfg.output_stride == 0 || j == n_steps {
            records.push(make_record(j, t, &state, pot, v_ext));
            if cfg.store_snapshots {
                snapshots.push((t, state.clone()));
            }
            push_map(t, &p, &r, &mut maps)?;
        }
    }

    Ok((
        Trajectory {
            records,
            snapshots,
            final_state: state,
        },
        maps,
    ))
}
