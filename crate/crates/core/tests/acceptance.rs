//! Acceptance suite: one test per structural guarantee of the solver, each
//! printing a `criterion NN: PASS/FAIL` line with the measured numbers
//! (run with `--nocapture` to see them). Criteria:
//!
//!  1. conservation of 𝒩 and ℰ with 4th-order drift reduction
//!  2. gauge-sector closure (φ = σ = 0 preserved exactly)
//!  3. positivity of Γ along the flow
//!  4. symplectic identities + transport along the trajectory
//!  5. diagonalization flow: decay envelope, residual, uniqueness
//!  6. Wick expectations vs. the partition-expansion oracle
//!  7. Hamiltonian-structure functional and its gradients
//!  8. critical density (series route vs. quadrature route)
//!  9. BEC emergence in the L → ∞ sweep
//! 10. stationarity of the finite-L Gibbs state under the flow
//! 11. quasiparticle mode identities and reconstruction

use std::time::Instant;

use num_complex::Complex64 as C64;

use hfb_core::dynamics::{
    evolve, evolve_with_transport, IntegratorConfig, Scheme,
};
use hfb_core::gibbs::{
    assemble_gibbs_state, condensate_fraction, continuum_sum_dim, critical_density,
    gamma_half_integer, mode_occupations, solve_mu, solve_mu_infinity, thermodynamic_sweep,
    GibbsParams,
};
use hfb_core::grid::{make_grid, GridField, GridKernel, TorusGrid};
use hfb_core::meanfield::PairPotential;
use hfb_core::observables::{
    energy, gradient_check, hamiltonian_functional, reconstruct_gamma_sigma,
};
use hfb_core::states::{
    build_gamma_matrix, check_admissible, sample_random_state, sample_smooth_state_spec,
    wick_expectation, FieldOp, Flavor, GeneralizedDensityMatrix, QuasifreeState, SmoothStateSpec,
};
use hfb_core::symplectic::{
    assemble_from_modes, bogoliubov_modes, bogoliubov_modes_with, check_symplectic,
    diagonalize_gamma, random_symplectomorphism, Symplectomorphism,
};

/// Criterion-1 configuration, shared by criteria 2–4: d = 1, N = 64, L = π,
/// contact g = 1, seed-fixed smooth random admissible initial state. A cold
/// state excites transients in the stiff σ pair modes (z = λ·dt reaches
/// 2.05 at the pinned dt = 1e−3, near the RK4 stability edge), which damp
/// at an effective order below 4; the state is therefore relaxed onto the
/// slow manifold by a short warm-up run at the same dt and structurally
/// repaired before the measured runs.
fn conservation_setup() -> (
    std::sync::Arc<TorusGrid>,
    PairPotential,
    GridField,
    QuasifreeState,
) {
    let grid = make_grid(1, 64, std::f64::consts::PI).unwrap();
    let pot = PairPotential::contact(1.0).unwrap();
    let v_ext = GridField::zeros(&grid);
    let spec = SmoothStateSpec {
        occupation: 3.0,
        squeeze: 0.08,
        condensate: 0.10,
        mode_cutoff: 4.0,
    };
    let raw = sample_smooth_state_spec(&grid, 2024, &spec);
    let warm = IntegratorConfig {
        output_stride: 100,
        ..IntegratorConfig::rk4(1e-3, 0.2)
    };
    let rho0 = evolve(&raw, &pot, &v_ext, &warm)
        .unwrap()
        .final_state
        .repair();
    (grid, pot, v_ext, rho0)
}

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} ({detail})",
        if pass { "PASS" } else { "FAIL" }
    );
}

#[test]
fn criterion_01_conservation_with_order_four_drift() {
    let t0 = Instant::now();
    let (_grid, pot, v_ext, rho0) = conservation_setup();
    let rep = check_admissible(&rho0);
    assert!(
        rep.max_violation() <= 1e-8 * rep.gamma_op_norm.max(1.0),
        "initial state admissibility: {rep:?}"
    );

    let drifts = |dt: f64| -> (f64, f64) {
        let cfg = IntegratorConfig {
            output_stride: 50,
            ..IntegratorConfig::rk4(dt, 1.0)
        };
        let traj = evolve(&rho0, &pot, &v_ext, &cfg).unwrap();
        let n0 = traj.records[0].particle_number;
        let e0 = traj.records[0].energy;
        let dn = traj
            .records
            .iter()
            .map(|r| (r.particle_number - n0).abs() / n0.abs())
            .fold(0.0, f64::max);
        let de = traj
            .records
            .iter()
            .map(|r| (r.energy - e0).abs() / e0.abs())
            .fold(0.0, f64::max);
        (dn, de)
    };

    let (dn1, de1) = drifts(1e-3);
    let (dn2, de2) = drifts(5e-4);
    let elapsed = t0.elapsed().as_secs_f64();

    let ratio_n = dn1 / dn2.max(1e-300);
    let ratio_e = de1 / de2.max(1e-300);
    let pass = dn1 <= 1e-8 && de1 <= 1e-6 && ratio_n >= 12.0 && ratio_e >= 12.0;
    report(
        "01 conservation",
        pass,
        &format!(
            "N drift {dn1:.2e} (≤1e-8), E drift {de1:.2e} (≤1e-6), halving ratios N {ratio_n:.1}x, E {ratio_e:.1}x (≥12x), {elapsed:.1}s"
        ),
    );
    assert!(dn1 <= 1e-8, "particle-number drift {dn1:.3e}");
    assert!(de1 <= 1e-6, "energy drift {de1:.3e}");
    assert!(ratio_n >= 12.0, "N drift halving ratio {ratio_n:.2}");
    assert!(ratio_e >= 12.0, "E drift halving ratio {ratio_e:.2}");
    #[cfg(not(debug_assertions))]
    assert!(elapsed <= 60.0, "runtime {elapsed:.1}s exceeds 60s");
}

#[test]
fn criterion_02_gauge_sector_closure() {
    let (grid, pot, v_ext, rho_full) = conservation_setup();
    // same setup with φ₀ = 0, σ₀ = 0
    let rho0 = QuasifreeState::new(
        GridField::zeros(&grid),
        rho_full.gamma().clone(),
        GridKernel::zeros(&grid),
    )
    .unwrap();
    let cfg = IntegratorConfig {
        output_stride: 100,
        store_snapshots: true,
        ..IntegratorConfig::rk4(1e-3, 1.0)
    };
    let traj = evolve(&rho0, &pot, &v_ext, &cfg).unwrap();
    let mut max_phi = 0.0f64;
    let mut max_sigma = 0.0f64;
    for (_, s) in &traj.snapshots {
        max_phi = max_phi.max(s.phi().norm());
        max_sigma = max_sigma.max(s.sigma().hs_norm());
    }
    let pass = max_phi <= 1e-13 && max_sigma <= 1e-13;
    report(
        "02 gauge closure",
        pass,
        &format!("max‖φ_t‖ {max_phi:.2e}, max‖σ_t‖ {max_sigma:.2e} (≤1e-13)"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_gamma_positivity_along_flow() {
    let (_grid, pot, v_ext, rho0) = conservation_setup();
    let cfg = IntegratorConfig {
        output_stride: 50,
        ..IntegratorConfig::rk4(1e-3, 1.0)
    };
    let traj = evolve(&rho0, &pot, &v_ext, &cfg).unwrap();
    let worst = traj
        .records
        .iter()
        .map(|r| r.min_eig_gamma_matrix)
        .fold(f64::INFINITY, f64::min);
    let pass = worst >= -1e-8;
    report(
        "03 gamma positivity",
        pass,
        &format!("min eig Γ_t {worst:.2e} (≥ -1e-8)"),
    );
    assert!(pass);
}

#[test]
fn criterion_04_symplectic_transport() {
    let (_grid, pot, v_ext, rho0) = conservation_setup();

    // diagonalize Γ₀ = U_d Γ'₀ U_d*, then evolve 𝒰_t from 𝒰₀ = U_d* so that
    // 𝒰₀* Γ'₀ 𝒰₀ = Γ₀
    let diag = diagonalize_gamma(rho0.gamma(), rho0.sigma(), 1e-8).unwrap();
    let gamma0p = &diag.gamma_prime;
    let u0 = diag.map.adjoint();

    let cfg = IntegratorConfig {
        output_stride: 100,
        store_snapshots: true,
        ..IntegratorConfig::rk4(1e-3, 1.0)
    };
    let (traj, maps) = evolve_with_transport(&rho0, &u0, &pot, &v_ext, &cfg).unwrap();

    let mut worst_violation = 0.0f64;
    for (_, map) in &maps {
        worst_violation = worst_violation.max(check_symplectic(map));
    }

    // W_t = 𝒮𝒰_t𝒮 satisfies W_t Γ_t W_t* = Γ'₀
    let gamma0p_block = GeneralizedDensityMatrix::from_diagonalized(gamma0p);
    let mut worst_transport = 0.0f64;
    for ((_, map), (_, state)) in maps.iter().zip(traj.snapshots.iter()) {
        let w = map.s_conjugate();
        let gm = GeneralizedDensityMatrix::from_blocks(state.gamma(), state.sigma());
        let moved = w.conjugate_gamma(gm.block_matrix());
        let residual = moved.sub(gamma0p_block.block_matrix()).hs_norm();
        worst_transport = worst_transport.max(residual);
    }

    let pass = worst_violation <= 1e-8 && worst_transport <= 1e-6;
    report(
        "04 symplectic transport",
        pass,
        &format!(
            "identity residuals {worst_violation:.2e} (≤1e-8), ‖U_tΓ_tU_t* − Γ'₀‖ {worst_transport:.2e} (≤1e-6)"
        ),
    );
    assert!(worst_violation <= 1e-8, "identity residual {worst_violation:.3e}");
    assert!(worst_transport <= 1e-6, "transport residual {worst_transport:.3e}");
}

#[test]
fn criterion_05_diagonalization_flow() {
    let tol = 1e-8;
    // 20 seeded random admissible Γ on grids of up to 64 sites
    let cases: Vec<(usize, usize)> = vec![
        (1, 8),
        (1, 8),
        (1, 12),
        (1, 12),
        (1, 16),
        (1, 16),
        (1, 16),
        (2, 4),
        (2, 4),
        (2, 4),
        (1, 24),
        (1, 24),
        (1, 32),
        (1, 32),
        (1, 32),
        (2, 6),
        (2, 6),
        (1, 48),
        (1, 64),
        (2, 8),
    ];
    assert_eq!(cases.len(), 20);

    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(777);
    let mut worst_envelope = 0.0f64; // max of ‖σ_t‖/(‖σ₀‖e^{−t})
    let mut worst_residual = 0.0f64;
    let mut worst_spectrum_dev = 0.0f64;
    for (idx, &(d, n)) in cases.iter().enumerate() {
        let grid = make_grid(d, n, 1.0 + 0.1 * d as f64).unwrap();
        let rho = sample_random_state(&grid, 9000 + idx as u64, 0.35);
        let res = diagonalize_gamma(rho.gamma(), rho.sigma(), tol).unwrap();

        let s0 = res.sigma_decay[0].1;
        for &(t, hs) in &res.sigma_decay {
            for probe in [1.0, 2.0, 3.0] {
                if (t - probe).abs() < 5e-3 && s0 > 0.0 {
                    worst_envelope = worst_envelope.max(hs / (s0 * (-t).exp()));
                }
            }
        }
        worst_residual = worst_residual.max(res.residual);

        // uniqueness: random unitary pre-rotation leaves the spectrum fixed
        let wmat = hfb_core::linalg::random_unitary(grid.site_count(), &mut rng);
        let wk = GridKernel::from_values(&grid, wmat.mapv(|z| z / grid.cell_volume())).unwrap();
        let g_rot = wk.compose(rho.gamma()).compose(&wk.adjoint()).hermitize();
        let s_rot = wk
            .compose(rho.sigma())
            .compose(&wk.transpose())
            .symmetrize();
        let res_rot = diagonalize_gamma(&g_rot, &s_rot, tol).unwrap();
        let s1 = res.gamma_prime.eigvalsh();
        let s2 = res_rot.gamma_prime.eigvalsh();
        for (a, b) in s1.iter().zip(s2.iter()) {
            worst_spectrum_dev = worst_spectrum_dev.max((a - b).abs());
        }
    }

    let pass = worst_envelope <= 1.05 && worst_residual <= 10.0 * tol && worst_spectrum_dev <= 1e-8;
    report(
        "05 diagonalization flow",
        pass,
        &format!(
            "decay envelope {worst_envelope:.3} (≤1.05), residual {worst_residual:.2e} (≤{:.0e}), spectrum dev {worst_spectrum_dev:.2e} (≤1e-8)",
            10.0 * tol
        ),
    );
    assert!(worst_envelope <= 1.05, "decay envelope {worst_envelope}");
    assert!(worst_residual <= 10.0 * tol, "residual {worst_residual:.3e}");
    assert!(worst_spectrum_dev <= 1e-8, "spectrum deviation {worst_spectrum_dev:.3e}");
}

/// Independent partition-expansion oracle (ordered-subset partitions,
/// truncated expectations of order > 2 vanish).
mod oracle {
    use super::*;

    pub fn first_moment(rho: &QuasifreeState, op: FieldOp) -> C64 {
        match op.flavor {
            Flavor::Annihilate => rho.phi().values()[op.site],
            Flavor::Create => rho.phi().values()[op.site].conj(),
        }
    }

    pub fn truncated_two(rho: &QuasifreeState, a: FieldOp, b: FieldOp) -> C64 {
        let (i, j) = (a.site, b.site);
        match (a.flavor, b.flavor) {
            (Flavor::Annihilate, Flavor::Annihilate) => rho.sigma().values()[[i, j]],
            (Flavor::Create, Flavor::Create) => rho.sigma().values()[[j, i]].conj(),
            (Flavor::Create, Flavor::Annihilate) => rho.gamma().values()[[j, i]],
            (Flavor::Annihilate, Flavor::Create) => {
                let mut z = rho.gamma().values()[[i, j]];
                if i == j {
                    z += C64::new(1.0 / rho.grid().cell_volume(), 0.0);
                }
                z
            }
        }
    }

    fn partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
        if items.is_empty() {
            return vec![vec![]];
        }
        let first = items[0];
        let rest = &items[1..];
        let mut out = Vec::new();
        for mut p in partitions(rest) {
            for b in 0..p.len() {
                let mut q = p.clone();
                q[b].insert(0, first);
                out.push(q);
            }
            p.insert(0, vec![first]);
            out.push(p);
        }
        out
    }

    pub fn wick(rho: &QuasifreeState, ops: &[FieldOp]) -> C64 {
        let idx: Vec<usize> = (0..ops.len()).collect();
        let mut total = C64::new(0.0, 0.0);
        'parts: for p in partitions(&idx) {
            let mut prod = C64::new(1.0, 0.0);
            for block in &p {
                let mut sorted = block.clone();
                sorted.sort_unstable();
                prod *= match sorted.len() {
                    1 => first_moment(rho, ops[sorted[0]]),
                    2 => truncated_two(rho, ops[sorted[0]], ops[sorted[1]]),
                    _ => continue 'parts,
                };
            }
            total += prod;
        }
        total
    }
}

#[test]
fn criterion_06_wick_oracle() {
    let grid = make_grid(1, 4, 0.8).unwrap();
    let m = grid.site_count();
    let mut worst_rel = 0.0f64;
    let mut worst_odd = 0.0f64;
    for seed in 0..50u64 {
        let rho = sample_random_state(&grid, 4000 + seed, 0.7);
        assert!(check_admissible(&rho).is_admissible(), "seed {seed}");

        let tuples: Vec<Vec<usize>> = vec![
            vec![0, 1],
            vec![seed as usize % m, (seed as usize + 2) % m],
            vec![0, 1, 3],
            vec![2, 2, 1],
            vec![0, 1, 2, 3],
            vec![3, 1, 3, 0],
        ];
        for sites in &tuples {
            let nops = sites.len();
            for mask in 0..(1usize << nops) {
                let ops: Vec<FieldOp> = (0..nops)
                    .map(|i| {
                        if mask >> i & 1 == 0 {
                            FieldOp::annihilate(sites[i])
                        } else {
                            FieldOp::create(sites[i])
                        }
                    })
                    .collect();
                let got = wick_expectation(&rho, &ops).unwrap();
                let want = oracle::wick(&rho, &ops);
                worst_rel = worst_rel.max((got - want).norm() / want.norm().max(1.0));
            }
        }

        // all 3-point correlators with φ = 0 vanish identically
        let nophi =
            QuasifreeState::new(GridField::zeros(&grid), rho.gamma().clone(), rho.sigma().clone())
                .unwrap();
        for sites in [[0usize, 1, 2], [3, 2, 3]] {
            for mask in 0..8usize {
                let ops: Vec<FieldOp> = (0..3)
                    .map(|i| {
                        if mask >> i & 1 == 0 {
                            FieldOp::annihilate(sites[i])
                        } else {
                            FieldOp::create(sites[i])
                        }
                    })
                    .collect();
                worst_odd = worst_odd.max(wick_expectation(&nophi, &ops).unwrap().norm());
            }
        }
    }
    let pass = worst_rel <= 1e-11 && worst_odd == 0.0;
    report(
        "06 wick oracle",
        pass,
        &format!("max relative deviation {worst_rel:.2e} (≤1e-11), odd correlators {worst_odd:.1e} (= 0)"),
    );
    assert!(worst_rel <= 1e-11);
    assert!(worst_odd == 0.0);
}

#[test]
fn criterion_07_hamiltonian_structure() {
    use rand::{Rng, SeedableRng};
    let grid = make_grid(1, 4, 1.0).unwrap(); // 4 sites; a 2-d case below has 16
    let mut worst_grad = 0.0f64;
    let mut worst_identity = 0.0f64;

    let mut run_case = |grid: &std::sync::Arc<TorusGrid>, pot: &PairPotential, seed: u64| {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let v_ext = GridField::from_fn(grid, |x| C64::new(0.1 * x[0], 0.0));
        let map = random_symplectomorphism(grid, &mut rng, 0.3);
        let mut gamma0p = GridKernel::zeros(grid);
        for i in 0..grid.site_count() {
            gamma0p.values_mut()[[i, i]] =
                C64::new(rng.gen::<f64>() * 0.7 / grid.cell_volume(), 0.0);
        }
        let mut phi = GridField::zeros(grid);
        for i in 0..grid.site_count() {
            phi.values_mut()[i] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.4;
        }

        let rep = gradient_check(&phi, &map, &gamma0p, pot, &v_ext, 1e-5).unwrap();
        worst_grad = worst_grad.max(rep.max());

        let (gamma, sigma) = reconstruct_gamma_sigma(map.u(), map.v(), &gamma0p);
        let rho =
            QuasifreeState::new(phi.clone(), gamma.hermitize(), sigma.symmetrize()).unwrap();
        let e = energy(&rho, pot, &v_ext);
        let h = hamiltonian_functional(&phi, &map, &gamma0p, pot, &v_ext).unwrap();
        worst_identity = worst_identity.max((h - e).abs() / (1.0 + e.abs()));
    };

    let contact = PairPotential::contact(0.8).unwrap();
    for seed in [1u64, 2, 3] {
        run_case(&grid, &contact, seed);
    }
    // 16-site 2-d case with a grid-sampled interaction
    let grid2 = make_grid(2, 4, 1.0).unwrap();
    let v = GridField::from_fn(&grid2, |x| {
        let pi = std::f64::consts::PI;
        C64::new(
            (pi * x[0]).cos() * 0.5 + (pi * x[1]).cos() * 0.3 + 1.0,
            0.0,
        )
    });
    let gridpot = PairPotential::from_grid_function(&v).unwrap();
    run_case(&grid2, &gridpot, 4);
    // γ₀' → 0 limit (pure condensate)
    {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let v_ext = GridField::zeros(&grid);
        let map = random_symplectomorphism(&grid, &mut rng, 0.25);
        let mut phi = GridField::zeros(&grid);
        for i in 0..grid.site_count() {
            phi.values_mut()[i] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.5;
        }
        let rep =
            gradient_check(&phi, &map, &GridKernel::zeros(&grid), &contact, &v_ext, 1e-5).unwrap();
        worst_grad = worst_grad.max(rep.max());
    }

    let pass = worst_grad <= 1e-6 && worst_identity <= 1e-10;
    report(
        "07 hamiltonian structure",
        pass,
        &format!(
            "max FD gradient deviation {worst_grad:.2e} (≤1e-6), 𝓗 = ℰ identity {worst_identity:.2e} (≤1e-10)"
        ),
    );
    assert!(worst_grad <= 1e-6, "gradient deviation {worst_grad:.3e}");
    assert!(worst_identity <= 1e-10, "functional identity {worst_identity:.3e}");
}

#[test]
fn criterion_08_critical_density_dual_route() {
    // independent series route: plain ζ(3/2) partial sum with integral tail,
    // exact Γ(3/2), explicit angular factor
    let mut zeta_series = 0.0;
    let terms = 10_000_000usize;
    for j in 1..terms {
        zeta_series += (j as f64).powf(-1.5);
    }
    zeta_series += 2.0 * (terms as f64).powf(-0.5);
    let gamma_32 = 0.5 * std::f64::consts::PI.sqrt(); // Γ(3/2)
    let omega_half = std::f64::consts::PI.powf(1.5) / gamma_32; // Ω₃/2
    let series_route =
        zeta_series * gamma_32 * omega_half / (2.0 * std::f64::consts::PI).powi(3);

    let implemented = critical_density(1.0, 3).unwrap();
    let series_dev = (implemented - series_route).abs();

    // independent quadrature route: S_∞ at μ = g·n equals n_c
    let quad_route = continuum_sum_dim(1.0 * 0.1, 1.0, 0.1, 1.0, 3).unwrap();
    let quad_rel = (quad_route - implemented).abs() / implemented;

    let pass = series_dev <= 1e-6 && quad_rel <= 1e-8;
    report(
        "08 critical density (dual route)",
        pass,
        &format!(
            "n_c = {implemented:.8}, series route dev {series_dev:.2e} (≤1e-6 abs), quadrature route dev {quad_rel:.2e} (≤1e-8 rel)"
        ),
    );
    assert!(series_dev <= 1e-6);
    assert!(quad_rel <= 1e-8);

    // scaling and d = 4 exact value
    let nc4 = critical_density(1.0, 4).unwrap();
    assert!((nc4 - 1.0 / 96.0).abs() < 1e-13);
    let ncb4 = critical_density(4.0, 3).unwrap();
    assert!((ncb4 - implemented / 8.0).abs() < 1e-14);
}

#[test]
fn criterion_08_critical_density_literal_value() {
    // The stated target 0.0093335 comes from evaluating the source's printed
    // closed form ζ(d/2)Γ(d/2)/(2π)^d·β^{−d/2}, which drops the angular
    // factor Ω_d/2 = π^{d/2}/Γ(d/2) of the radial reduction. The defining
    // integral (2π)^{−3}∫dk/(e^{k²}−1) evaluates to ζ(3/2)/(4π)^{3/2}
    // ≈ 0.0586; the implementation follows the integral (the lattice sums
    // and the condensation sweep are only consistent with that value), so
    // this literal check is expected to fail and is kept as the faithful
    // record of the stated target.
    let implemented = critical_density(1.0, 3).unwrap();
    let printed_form = hfb_core::gibbs::zeta(1.5) * gamma_half_integer(3)
        / (2.0 * std::f64::consts::PI).powi(3);
    let dev = (implemented - 0.0093335).abs();
    let pass = dev <= 1e-6;
    report(
        "08 critical density (literal 0.0093335)",
        pass,
        &format!(
            "implemented n_c = {implemented:.8}, stated 0.0093335 (= printed closed form {printed_form:.8}), |Δ| = {dev:.3e} (≤1e-6)"
        ),
    );
    assert!(
        pass,
        "critical_density(1, 3) = {implemented:.8} vs literal 0.0093335 (printed-form value {printed_form:.8}); \
         the defining integral gives ζ(3/2)/(4π)^{{3/2}} ≈ 0.0586 — see the dual-route criterion"
    );
}

#[test]
fn criterion_09_bec_emergence() {
    let t0 = Instant::now();
    let beta = 1.0;
    let g = 1.0;
    let nc = critical_density(beta, 3).unwrap();

    // super-critical: n = 2 n_c, L-sweep up to N = 32 per side
    let n_super = 2.0 * nc;
    let rows = thermodynamic_sweep(
        beta,
        n_super,
        g,
        3,
        &[(6.0, 24), (12.0, 32), (18.0, 32), (24.0, 32)],
        1e-10,
    )
    .unwrap();
    let zmf = rows.last().unwrap().zero_mode_fraction;
    let mut gaps_shrink = true;
    let mut prev_gap = f64::INFINITY;
    for r in &rows {
        let gap = (g * n_super - r.mu).abs();
        if gap >= prev_gap {
            gaps_shrink = false;
        }
        prev_gap = gap;
    }
    let frac_ok = (zmf - 0.5).abs() <= 0.1 * 0.5;

    // predicted thermodynamic fraction
    let grid3 = make_grid(3, 4, 1.0).unwrap();
    let frac_pred =
        condensate_fraction(&GibbsParams::new(beta, n_super, g, &grid3).unwrap()).unwrap();

    // sub-critical: n = n_c/2, μ_L Cauchy toward the quadrature μ_∞
    let n_sub = 0.5 * nc;
    let rows_sub = thermodynamic_sweep(
        beta,
        n_sub,
        g,
        3,
        &[(4.0, 16), (8.0, 32), (12.0, 48), (16.0, 64)],
        1e-10,
    )
    .unwrap();
    let mut cauchy = true;
    let mut prev_gap = f64::INFINITY;
    for w in rows_sub.windows(2) {
        let gap = (w[1].mu - w[0].mu).abs();
        if gap >= prev_gap {
            cauchy = false;
        }
        prev_gap = gap;
    }
    let mu_inf = solve_mu_infinity(beta, n_sub, g, 3).unwrap();
    let mu_dev = (rows_sub.last().unwrap().mu - mu_inf).abs();
    let elapsed = t0.elapsed().as_secs_f64();

    let pass = frac_ok && gaps_shrink && cauchy && mu_dev <= 1e-4;
    report(
        "09 bec emergence",
        pass,
        &format!(
            "zero-mode fraction {zmf:.4} (0.5 ±10%, predicted {frac_pred:.3}), μ gaps shrink {gaps_shrink}, sub-critical Cauchy {cauchy}, |μ_L − μ_∞| {mu_dev:.2e} (≤1e-4), {elapsed:.1}s"
        ),
    );
    assert!(frac_ok, "zero-mode fraction {zmf}");
    assert!(gaps_shrink, "gn − μ_L not shrinking monotonically");
    assert!(cauchy, "sub-critical μ_L gaps not shrinking");
    assert!(mu_dev <= 1e-4, "μ deviation {mu_dev:.3e}");
    #[cfg(not(debug_assertions))]
    assert!(elapsed <= 120.0, "runtime {elapsed:.1}s exceeds 120s");
}

#[test]
fn criterion_10_gibbs_stationarity() {
    // finite-L Gibbs state evolved under the contact flow for T = 0.5;
    // the kinetic half-steps are exact spectral phases, so stationarity is
    // probed without large-number commutator cancellations
    let grid = make_grid(1, 64, std::f64::consts::PI).unwrap();
    let beta = 0.25;
    let n = 1.0;
    let g = 1.0;
    let params = GibbsParams::new(beta, n, g, &grid).unwrap();
    let sol = solve_mu(&params, 1e-12).unwrap();
    let rho0 = assemble_gibbs_state(&sol, &grid);
    assert!(check_admissible(&rho0).is_admissible());

    let pot = PairPotential::contact(g).unwrap();
    let v_ext = GridField::zeros(&grid);
    let cfg = IntegratorConfig {
        scheme: Scheme::StrangSplit,
        output_stride: 100,
        ..IntegratorConfig::rk4(1e-3, 0.5)
    };
    let traj = evolve(&rho0, &pot, &v_ext, &cfg).unwrap();

    let occ0 = mode_occupations(rho0.gamma());
    let occ1 = mode_occupations(traj.final_state.gamma());
    let top = occ0.iter().map(|z| z.re).fold(0.0, f64::max);
    let mut worst_rel = 0.0f64; // modes carrying meaningful occupation
    let mut worst_abs = 0.0f64; // all modes, relative to the top occupation
    for i in 0..grid.site_count() {
        let d = (occ1[i] - occ0[i]).norm();
        worst_abs = worst_abs.max(d / top);
        if occ0[i].re >= 1e-5 * top {
            worst_rel = worst_rel.max(d / occ0[i].re);
        }
    }
    let pass = worst_rel <= 1e-8 && worst_abs <= 1e-8;
    report(
        "10 gibbs stationarity",
        pass,
        &format!(
            "max relative Δγ̂(k) {worst_rel:.2e} on occupied modes (≤1e-8), max Δγ̂/γ̂(0) {worst_abs:.2e} over all modes"
        ),
    );
    assert!(worst_rel <= 1e-8, "occupied-mode drift {worst_rel:.3e}");
    assert!(worst_abs <= 1e-8, "absolute drift {worst_abs:.3e}");
}

#[test]
fn criterion_11_bogoliubov_modes() {
    let grid = make_grid(1, 16, 1.5).unwrap();

    // per-mode hyperbolic normalization on all stable gapped modes
    let mut worst_norm = 0.0f64;
    for modes in [
        bogoliubov_modes_with(1.1, C64::new(0.6, 0.2), &grid),
        bogoliubov_modes(0.8, 0.6, 1.2, &grid),
    ] {
        for m in &modes {
            assert!(m.stable, "homogeneous repulsive data has no unstable modes");
            if !m.gapless {
                worst_norm = worst_norm.max((m.u.norm_sqr() - m.v.norm_sqr() - 1.0).abs());
            }
        }
    }

    // reconstruction identities round-trip through an assembled state
    let modes = bogoliubov_modes_with(1.1, C64::new(0.6, 0.2), &grid);
    let beta = 1.3;
    let occ: Vec<f64> = modes
        .iter()
        .map(|m| {
            if m.energy > 0.0 {
                1.0 / ((beta * m.energy).exp() - 1.0)
            } else {
                0.5
            }
        })
        .collect();
    let amps: Vec<(C64, C64)> = modes.iter().map(|m| (m.u, m.v)).collect();
    let (gamma, sigma) = assemble_from_modes(&grid, &amps, &occ);
    let vol = grid.volume();
    let want_gamma: f64 = modes
        .iter()
        .zip(&occ)
        .map(|(m, &n)| n * m.u.norm_sqr() + (1.0 + n) * m.v.norm_sqr())
        .sum::<f64>()
        / vol;
    let want_sigma: C64 = modes
        .iter()
        .zip(&occ)
        .map(|(m, &n)| m.u * m.v.conj() * (1.0 + 2.0 * n))
        .sum::<C64>()
        / vol;
    let mut worst_recon = 0.0f64;
    for i in 0..grid.site_count() {
        worst_recon = worst_recon
            .max((gamma.values()[[i, i]].re - want_gamma).abs() / (1.0 + want_gamma.abs()));
        worst_recon = worst_recon
            .max((sigma.values()[[i, i]] - want_sigma).norm() / (1.0 + want_sigma.norm()));
    }
    let rho = QuasifreeState::new(GridField::zeros(&grid), gamma, sigma).unwrap();
    assert!(check_admissible(&rho).is_admissible());
    assert!(build_gamma_matrix(&rho).is_ok());

    // stationary phases leave the diagonals t-independent
    let mut worst_phase = 0.0f64;
    for t in [0.4, 1.1, 2.9] {
        let amps_t: Vec<(C64, C64)> = modes
            .iter()
            .map(|m| {
                let ph = C64::from_polar(1.0, -t * m.energy);
                (m.u * ph, m.v * ph)
            })
            .collect();
        let (gt, st) = assemble_from_modes(&grid, &amps_t, &occ);
        for i in 0..grid.site_count() {
            worst_phase = worst_phase
                .max((gt.values()[[i, i]].re - want_gamma).abs() / (1.0 + want_gamma.abs()));
            worst_phase =
                worst_phase.max((st.values()[[i, i]] - want_sigma).norm() / (1.0 + want_sigma.norm()));
        }
    }

    let pass = worst_norm <= 1e-10 && worst_recon <= 1e-10 && worst_phase <= 1e-10;
    report(
        "11 bogoliubov modes",
        pass,
        &format!(
            "|u|²−|v|²−1 dev {worst_norm:.2e}, reconstruction {worst_recon:.2e}, phase invariance {worst_phase:.2e} (all ≤1e-10)"
        ),
    );
    assert!(worst_norm <= 1e-10);
    assert!(worst_recon <= 1e-10);
    assert!(worst_phase <= 1e-10);
}

#[test]
fn capstone_random_symplectomorphism_respects_identities() {
    // shared infrastructure sanity for criteria 4, 5 and 7
    use rand::SeedableRng;
    let grid = make_grid(1, 8, 1.0).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let map = random_symplectomorphism(&grid, &mut rng, 0.5);
    assert!(check_symplectic(&map) < 1e-10);
    let id = Symplectomorphism::identity(&grid);
    assert!(check_symplectic(&id) == 0.0 || check_symplectic(&id) < 1e-14);
}
