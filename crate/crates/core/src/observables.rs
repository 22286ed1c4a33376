//! Conserved functionals of the HFB flow: particle number 𝒩, energy ℰ, and
//! the Hamiltonian-structure functional 𝓗_{γ₀'} on (φ, u, v) together with
//! its closed-form gradients.

use num_complex::Complex64 as C64;

use crate::error::{HfbError, Result};
use crate::grid::{GridField, GridKernel};
use crate::meanfield::{b_op, h_op, k_op, laplacian_kernel, PairPotential};
use crate::states::QuasifreeState;
use crate::symplectic::{check_symplectic, Symplectomorphism};

/// Tr[A·B] = Δx^{2d} Σ_{x,y} A(x,y) B(y,x) without forming the product.
fn trace_product(a: &GridKernel, b: &GridKernel) -> C64 {
    assert_eq!(a.grid(), b.grid(), "grid mismatch in trace_product");
    let w = a.grid().cell_volume();
    let av = a.values();
    let bv = b.values();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..av.nrows() {
        for j in 0..av.ncols() {
            acc += av[[i, j]] * bv[[j, i]];
        }
    }
    acc * (w * w)
}

/// Particle number 𝒩 = ∫ (γ(x;x) + |φ(x)|²) dx.
pub fn particle_number(rho: &QuasifreeState) -> f64 {
    let w = rho.grid().cell_volume();
    let gamma_diag: C64 = rho.gamma().values().diag().sum();
    let phi_sq: f64 = rho.phi().values().iter().map(|z| z.norm_sqr()).sum();
    (gamma_diag * w).re + phi_sq * w
}

/// Energy as a complex number (the imaginary part is a numerical residue,
/// ≤ 1e−12·|ℰ| for admissible states).
pub fn energy_complex(rho: &QuasifreeState, pot: &PairPotential, v_ext: &GridField) -> C64 {
    let grid = rho.grid();
    let gamma = rho.gamma();
    let phi = rho.phi();
    let gamma_phi = rho.gamma_phi();
    let sigma_phi = rho.sigma_phi();

    // Tr[h(γ + |φ⟩⟨φ|)] with the bare one-body operator h = −Δ + V
    let kinetic = laplacian_kernel(grid);
    let mut e = trace_product(&kinetic, &gamma_phi);
    let w = grid.cell_volume();
    for i in 0..grid.site_count() {
        e += v_ext.values()[i] * gamma_phi.values()[[i, i]] * w;
    }

    // Tr[b[|φ⟩⟨φ|] γ]
    let b_phi = b_op(pot, &GridKernel::ketbra(phi, phi));
    e += trace_with_one_body(&b_phi.multiplication().clone(), b_phi.nonlocal(), gamma);

    // ½ Tr[b[γ] γ]
    let b_gamma = b_op(pot, gamma);
    e += 0.5 * trace_with_one_body(&b_gamma.multiplication().clone(), b_gamma.nonlocal(), gamma);

    // ½ ∬ v(x−y) |σ(x,y) + φ(x)φ(y)|² dx dy
    match pot {
        PairPotential::Grid { v, .. } => {
            let mut acc = 0.0;
            let sv = sigma_phi.values();
            for i in 0..grid.site_count() {
                for j in 0..grid.site_count() {
                    let vij = v.values()[grid.displacement_index(i, j)].re;
                    acc += vij * sv[[i, j]].norm_sqr();
                }
            }
            e += C64::new(0.5 * acc * w * w, 0.0);
        }
        PairPotential::Contact { g } => {
            let wfield = sigma_phi.diagonal();
            let acc: f64 = wfield.values().iter().map(|z| z.norm_sqr()).sum();
            e += C64::new(0.5 * g * acc * w, 0.0);
        }
    }
    e
}

fn trace_with_one_body(mult: &GridField, nonlocal: &GridKernel, gamma: &GridKernel) -> C64 {
    let w = gamma.grid().cell_volume();
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..gamma.dim() {
        acc += mult.values()[i] * gamma.values()[[i, i]] * w;
    }
    acc + trace_product(nonlocal, gamma)
}

/// Energy ℰ(φ, γ, σ) = Tr[h(γ+|φ⟩⟨φ|)] + Tr[b[|φ⟩⟨φ|]γ] + ½Tr[b[γ]γ]
///                     + ½∬v(x−y)|σ(x,y)+φ(x)φ(y)|² dx dy.
pub fn energy(rho: &QuasifreeState, pot: &PairPotential, v_ext: &GridField) -> f64 {
    energy_complex(rho, pot, v_ext).re
}

/// Reconstruct (γ, σ) from a diagonalizing pair:
/// γ = u*γ₀'u + vᵀ(1+γ̄₀')v̄ and σ = u*γ₀'v + vᵀ(1+γ̄₀')ū.
pub fn reconstruct_gamma_sigma(
    u: &GridKernel,
    v: &GridKernel,
    gamma0p: &GridKernel,
) -> (GridKernel, GridKernel) {
    let id = GridKernel::identity(gamma0p.grid());
    let one_plus = id.add(&gamma0p.conj());
    let us = u.adjoint();
    let vt = v.transpose();
    let gamma = us
        .compose(gamma0p)
        .compose(u)
        .add(&vt.compose(&one_plus).compose(&v.conj()));
    let sigma = us
        .compose(gamma0p)
        .compose(v)
        .add(&vt.compose(&one_plus).compose(&u.conj()));
    (gamma, sigma)
}

/// The quadratic-form functional
///
///   𝓗_{γ₀'}(φ, u, v) = ⟨φ, hφ⟩ + Tr[γ_rec (h + b[|φ⟩⟨φ|])]
///                      + ½ Tr[γ_rec b[γ_rec]] + ½ Tr[k(σ_rec^φ) (σ_rec^φ)*]
///
/// with (γ_rec, σ_rec) reconstructed from (u, v, γ₀'). Along an HFB
/// trajectory it equals the energy ℰ(φ_t, γ_t, σ_t).
pub fn hamiltonian_functional(
    phi: &GridField,
    map: &Symplectomorphism,
    gamma0p: &GridKernel,
    pot: &PairPotential,
    v_ext: &GridField,
) -> Result<f64> {
    let violation = check_symplectic(map);
    if violation > 1e-8 {
        return Err(HfbError::InvalidParameter(format!(
            "(u, v) violate the symplectomorphism identities by {violation:.3e}"
        )));
    }
    if gamma0p.min_eig() < -1e-10 * gamma0p.op_norm().max(1.0) {
        return Err(HfbError::InvalidParameter(
            "γ₀' must be positive semidefinite".into(),
        ));
    }
    Ok(hamiltonian_functional_unchecked(phi, map.u(), map.v(), gamma0p, pot, v_ext).re)
}

/// 𝓗 evaluated without the symplectic gate (finite-difference probes step
/// off the group, so the gradient checker needs the raw functional).
pub fn hamiltonian_functional_unchecked(
    phi: &GridField,
    u: &GridKernel,
    v: &GridKernel,
    gamma0p: &GridKernel,
    pot: &PairPotential,
    v_ext: &GridField,
) -> C64 {
    let grid = phi.grid();
    let (gamma, sigma) = reconstruct_gamma_sigma(u, v, gamma0p);
    let sigma_phi = sigma.add(&GridKernel::sym_outer(phi, phi));

    // ⟨φ, hφ⟩
    let kinetic = laplacian_kernel(grid);
    let hphi = kinetic
        .apply(phi)
        .add(&v_ext.mul_pointwise(phi));
    let mut h = phi.inner(&hphi);

    // Tr[γ_rec (h + b[|φ⟩⟨φ|])]
    h += trace_product(&kinetic, &gamma);
    let w = grid.cell_volume();
    for i in 0..grid.site_count() {
        h += v_ext.values()[i] * gamma.values()[[i, i]] * w;
    }
    let b_phi = b_op(pot, &GridKernel::ketbra(phi, phi));
    h += trace_with_one_body(&b_phi.multiplication().clone(), b_phi.nonlocal(), &gamma);

    // ½ Tr[γ_rec b[γ_rec]]
    let b_gamma = b_op(pot, &gamma);
    h += 0.5 * trace_with_one_body(&b_gamma.multiplication().clone(), b_gamma.nonlocal(), &gamma);

    // ½ Tr[k(σ^φ) (σ^φ)*]
    let k = k_op(pot, &sigma_phi);
    h += 0.5 * trace_product(&k, &sigma_phi.adjoint());
    h
}

/// Closed-form gradients of 𝓗_{γ₀'} (the right-hand sides matched by the
/// finite-difference check):
///
///   ∂𝓗/∂⟨φ| = h(γ)φ + k(σ^φ)φ̄,
///   ∂𝓗/∂u*  = γ₀' u h(t) + (½+γ₀') v k̄(t),
///   ∂𝓗/∂v*  = (1+γ₀') v h̄(t) + (½+γ₀') u k(t),
///
/// with h(t) = h(γ^φ) and k(t) = k(σ^φ) built from the reconstructed state.
pub fn hamiltonian_gradients(
    phi: &GridField,
    u: &GridKernel,
    v: &GridKernel,
    gamma0p: &GridKernel,
    pot: &PairPotential,
    v_ext: &GridField,
) -> (GridField, GridKernel, GridKernel) {
    let grid = phi.grid();
    let (gamma, sigma) = reconstruct_gamma_sigma(u, v, gamma0p);
    let gamma_phi = gamma.add(&GridKernel::ketbra(phi, phi));
    let sigma_phi = sigma.add(&GridKernel::sym_outer(phi, phi));
    let h_t = h_op(pot, v_ext, &gamma_phi).as_kernel();
    let k_t = k_op(pot, &sigma_phi);

    let g_phi = h_op(pot, v_ext, &gamma)
        .apply(phi)
        .add(&k_t.apply(&phi.conj()));

    let id = GridKernel::identity(grid);
    let half_plus = gamma0p.add(&id.scale(C64::new(0.5, 0.0)));
    let one_plus = gamma0p.add(&id);
    let g_u = gamma0p
        .compose(u)
        .compose(&h_t)
        .add(&half_plus.compose(v).compose(&k_t.conj()));
    let g_v = one_plus
        .compose(v)
        .compose(&h_t.conj())
        .add(&half_plus.compose(u).compose(&k_t));
    (g_phi, g_u, g_v)
}

/// Worst relative deviations of central finite differences of 𝓗_{γ₀'} from
/// the closed-form gradients.
#[derive(Debug, Clone)]
pub struct GradientReport {
    pub phi_max_rel_dev: f64,
    pub u_max_rel_dev: f64,
    pub v_max_rel_dev: f64,
}

impl GradientReport {
    pub fn max(&self) -> f64 {
        self.phi_max_rel_dev
            .max(self.u_max_rel_dev)
            .max(self.v_max_rel_dev)
    }
}

/// Compare finite-difference Wirtinger partials of 𝓗_{γ₀'} (central
/// differences with the given step) against the closed forms. The Wirtinger
/// convention is ∂/∂z̄ = ½(∂/∂Re + i ∂/∂Im); the Δx^d trace weights of the
/// pairings are divided out so both sides are plain kernels/fields.
pub fn gradient_check(
    phi: &GridField,
    map: &Symplectomorphism,
    gamma0p: &GridKernel,
    pot: &PairPotential,
    v_ext: &GridField,
    fd_step: f64,
) -> Result<GradientReport> {
    let violation = check_symplectic(map);
    if violation > 1e-8 {
        return Err(HfbError::InvalidParameter(format!(
            "(u, v) violate the symplectomorphism identities by {violation:.3e}"
        )));
    }
    let grid = phi.grid();
    let w = grid.cell_volume();
    let u = map.u();
    let v = map.v();
    let (g_phi, g_u, g_v) = hamiltonian_gradients(phi, u, v, gamma0p, pot, v_ext);

    let eval = |phi: &GridField, u: &GridKernel, v: &GridKernel| -> f64 {
        hamiltonian_functional_unchecked(phi, u, v, gamma0p, pot, v_ext).re
    };

    // φ block: ∂𝓗/∂conj(φ_x) = Δx^d · (∂𝓗/∂⟨φ|)(x)
    let scale_phi = g_phi.max_abs().max(1e-12);
    let mut phi_dev = 0.0f64;
    for i in 0..grid.site_count() {
        let probe = |dre: f64, dim: f64| {
            let mut p = phi.clone();
            p.values_mut()[i] += C64::new(dre, dim);
            eval(&p, u, v)
        };
        let d_re = (probe(fd_step, 0.0) - probe(-fd_step, 0.0)) / (2.0 * fd_step);
        let d_im = (probe(0.0, fd_step) - probe(0.0, -fd_step)) / (2.0 * fd_step);
        let fd = C64::new(d_re, d_im) * 0.5 / w;
        phi_dev = phi_dev.max((fd - g_phi.values()[i]).norm() / scale_phi);
    }

    // u, v blocks: ∂𝓗/∂conj(u_ij) = Δx^{2d} · (∂𝓗/∂u*)(i,j)
    let block_dev = |target: &GridKernel, which_u: bool| -> f64 {
        let scale = target.max_abs().max(1e-12);
        let mut worst = 0.0f64;
        for i in 0..grid.site_count() {
            for j in 0..grid.site_count() {
                let probe = |dre: f64, dim: f64| {
                    let mut ku = u.clone();
                    let mut kv = v.clone();
                    if which_u {
                        ku.values_mut()[[i, j]] += C64::new(dre, dim);
                    } else {
                        kv.values_mut()[[i, j]] += C64::new(dre, dim);
                    }
                    eval(phi, &ku, &kv)
                };
                let d_re = (probe(fd_step, 0.0) - probe(-fd_step, 0.0)) / (2.0 * fd_step);
                let d_im = (probe(0.0, fd_step) - probe(0.0, -fd_step)) / (2.0 * fd_step);
                let fd = C64::new(d_re, d_im) * 0.5 / (w * w);
                worst = worst.max((fd - target.values()[[i, j]]).norm() / scale);
            }
        }
        worst
    };
    let u_dev = block_dev(&g_u, true);
    let v_dev = block_dev(&g_v, false);

    Ok(GradientReport {
        phi_max_rel_dev: phi_dev,
        u_max_rel_dev: u_dev,
        v_max_rel_dev: v_dev,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use crate::states::{sample_random_state, QuasifreeState};
    use crate::symplectic::random_symplectomorphism;
    use rand::SeedableRng;

    #[test]
    fn particle_number_basics() {
        let g = make_grid(1, 8, 1.0).unwrap();
        assert_eq!(particle_number(&QuasifreeState::vacuum(&g)), 0.0);

        // constant φ ≡ c on volume |Λ| → |c|²·|Λ|
        let c = C64::new(0.4, -0.7);
        let rho = QuasifreeState::new(
            GridField::constant(&g, c),
            GridKernel::zeros(&g),
            GridKernel::zeros(&g),
        )
        .unwrap();
        assert!((particle_number(&rho) - c.norm_sqr() * g.volume()).abs() < 1e-13);

        // random admissible state: Tr γ by the eigenvalue-sum oracle
        let rho = sample_random_state(&g, 13, 0.6);
        let eig_sum: f64 = rho.gamma().eigvalsh().iter().sum();
        let want = eig_sum + rho.phi().norm().powi(2);
        assert!((particle_number(&rho) - want).abs() < 1e-10 * (1.0 + want.abs()));
    }

    #[test]
    fn energy_of_vacuum_and_free_plane_wave() {
        let pi = std::f64::consts::PI;
        let g = make_grid(1, 8, pi).unwrap();
        let pot = PairPotential::contact(0.0).unwrap();
        let v0 = GridField::zeros(&g);
        assert_eq!(energy(&QuasifreeState::vacuum(&g), &pot, &v0), 0.0);

        // v = 0, V = 0, φ = A e^{ik₀x}: ℰ = |k₀|²·𝒩
        let rho = QuasifreeState::plane_wave(&g, &[2], C64::new(0.3, 0.1));
        let n = particle_number(&rho);
        let e = energy(&rho, &pot, &v0);
        assert!((e - 4.0 * n).abs() < 1e-12 * (1.0 + e.abs()));
    }

    #[test]
    fn contact_energy_matches_delta_form_oracle() {
        // independent transcription: Tr[h(γ+|φ⟩⟨φ|)] + g∫(2n|φ|² + n² + ½|w|²)
        let g = make_grid(1, 8, 1.3).unwrap();
        let gc = 0.8;
        let pot = PairPotential::contact(gc).unwrap();
        let v_ext = GridField::from_fn(&g, |x| C64::new(0.3 * (x[0]).cos(), 0.0));
        for seed in [1u64, 5, 9] {
            let rho = sample_random_state(&g, seed, 0.7);
            let e = energy_complex(&rho, &pot, &v_ext);
            assert!(e.im.abs() <= 1e-12 * (1.0 + e.re.abs()), "im = {:e}", e.im);

            let w = g.cell_volume();
            let kin = laplacian_kernel(&g);
            let gphi = rho.gamma_phi();
            let mut oracle = trace_product(&kin, &gphi).re;
            for i in 0..g.site_count() {
                oracle += (v_ext.values()[i] * gphi.values()[[i, i]]).re * w;
            }
            let nf = rho.gamma().diagonal();
            let wf = rho.sigma_phi().diagonal();
            for i in 0..g.site_count() {
                let n_x = nf.values()[i].re;
                let phi2 = rho.phi().values()[i].norm_sqr();
                oracle += gc * w * (2.0 * n_x * phi2 + n_x * n_x + 0.5 * wf.values()[i].norm_sqr());
            }
            assert!(
                (e.re - oracle).abs() < 1e-12 * (1.0 + oracle.abs()),
                "seed {seed}: {} vs {}",
                e.re,
                oracle
            );
        }
    }

    #[test]
    fn energy_is_gauge_invariant() {
        let g = make_grid(1, 6, 1.0).unwrap();
        let l = g.half_length();
        let v = GridField::from_fn(&g, |x| {
            C64::new((std::f64::consts::PI * x[0] / l).cos(), 0.0)
        });
        let pot = PairPotential::from_grid_function(&v).unwrap();
        let v_ext = GridField::from_fn(&g, |x| C64::new(0.2 * x[0] * x[0], 0.0));
        let rho = sample_random_state(&g, 21, 0.7);
        let e0 = energy(&rho, &pot, &v_ext);
        for theta in [std::f64::consts::PI / 7.0, std::f64::consts::PI / 3.0] {
            let rot = QuasifreeState::new(
                rho.phi().scale(C64::from_polar(1.0, theta)),
                rho.gamma().clone(),
                rho.sigma().scale(C64::from_polar(1.0, 2.0 * theta)),
            )
            .unwrap();
            let e1 = energy(&rot, &pot, &v_ext);
            assert!((e0 - e1).abs() < 1e-11 * (1.0 + e0.abs()), "θ={theta}: {e0} vs {e1}");
        }
    }

    #[test]
    fn functional_reduces_to_energy_at_identity() {
        let g = make_grid(1, 6, 1.1).unwrap();
        let pot = PairPotential::contact(0.9).unwrap();
        let v_ext = GridField::from_fn(&g, |x| C64::new(0.1 * x[0], 0.0));
        let rho = sample_random_state(&g, 3, 0.5);
        // u = 1, v = 0, γ₀' = γ → 𝓗 = ℰ(φ, γ, 0)
        let map = Symplectomorphism::identity(&g);
        let gamma0p = rho.gamma().hermitize();
        let h = hamiltonian_functional(rho.phi(), &map, &gamma0p, &pot, &v_ext).unwrap();
        let rho_nosigma = QuasifreeState::new(
            rho.phi().clone(),
            gamma0p.clone(),
            GridKernel::zeros(&g),
        )
        .unwrap();
        let e = energy(&rho_nosigma, &pot, &v_ext);
        assert!((h - e).abs() < 1e-11 * (1.0 + e.abs()), "{h} vs {e}");

        // all-zero inputs → 0
        let z = hamiltonian_functional(
            &GridField::zeros(&g),
            &Symplectomorphism::identity(&g),
            &GridKernel::zeros(&g),
            &pot,
            &v_ext,
        )
        .unwrap();
        // u = 1 leaves the vacuum untouched, so only the vacuum energy remains
        assert!(z.abs() < 1e-14);
    }

    #[test]
    fn functional_matches_energy_under_reconstruction() {
        let g = make_grid(1, 4, 0.9).unwrap();
        let pot = PairPotential::contact(1.1).unwrap();
        let v_ext = GridField::zeros(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        let map = random_symplectomorphism(&g, &mut rng, 0.4);
        // positive diagonal γ₀'
        let mut gamma0p = GridKernel::zeros(&g);
        for i in 0..g.site_count() {
            use rand::Rng;
            gamma0p.values_mut()[[i, i]] =
                C64::new(rng.gen::<f64>() * 0.8 / g.cell_volume(), 0.0);
        }
        let phi = {
            let mut f = GridField::zeros(&g);
            use rand::Rng;
            for i in 0..g.site_count() {
                f.values_mut()[i] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.5;
            }
            f
        };
        let (gamma, sigma) = reconstruct_gamma_sigma(map.u(), map.v(), &gamma0p);
        let rho = QuasifreeState::new(phi.clone(), gamma.hermitize(), sigma.symmetrize()).unwrap();
        let e = energy(&rho, &pot, &v_ext);
        let h = hamiltonian_functional(&phi, &map, &gamma0p, &pot, &v_ext).unwrap();
        assert!(
            (h - e).abs() <= 1e-10 * (1.0 + e.abs()),
            "𝓗 = {h}, ℰ = {e}"
        );
    }

    #[test]
    fn finite_difference_gradients_agree() {
        let g = make_grid(1, 4, 1.0).unwrap();
        let pot = PairPotential::contact(0.7).unwrap();
        let v_ext = GridField::from_fn(&g, |x| C64::new(0.15 * x[0], 0.0));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let map = random_symplectomorphism(&g, &mut rng, 0.3);
        let mut gamma0p = GridKernel::zeros(&g);
        for i in 0..g.site_count() {
            use rand::Rng;
            gamma0p.values_mut()[[i, i]] =
                C64::new(rng.gen::<f64>() * 0.6 / g.cell_volume(), 0.0);
        }
        let phi = {
            use rand::Rng;
            let mut f = GridField::zeros(&g);
            for i in 0..g.site_count() {
                f.values_mut()[i] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * 0.4;
            }
            f
        };
        let rep = gradient_check(&phi, &map, &gamma0p, &pot, &v_ext, 1e-5).unwrap();
        assert!(rep.max() <= 1e-6, "{rep:?}");

        // γ₀' → 0: pure-condensate (Gross-Pitaevskii-type) limit
        let rep0 = gradient_check(&phi, &map, &GridKernel::zeros(&g), &pot, &v_ext, 1e-5).unwrap();
        assert!(rep0.max() <= 1e-6, "{rep0:?}");

        // zero state: all partials vanish
        let (gp, gu, gv) = hamiltonian_gradients(
            &GridField::zeros(&g),
            Symplectomorphism::identity(&g).u(),
            Symplectomorphism::identity(&g).v(),
            &GridKernel::zeros(&g),
            &pot,
            &v_ext,
        );
        assert!(gp.max_abs() < 1e-14);
        assert!(gu.max_abs() < 1e-14);
        assert!(gv.max_abs() < 1e-14);
    }
}
