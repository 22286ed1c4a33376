//! Translation- and gauge-invariant Gibbs fixed point of the contact-mode
//! HFB system on the torus, and the emergence of Bose-Einstein condensation
//! in the thermodynamic limit.
//!
//! With φ = 0, σ = 0 (gauge invariance) and translation invariance, the
//! fixed point reduces to the mode equation
//!
//!   n = S_L(μ) := |Λ_L|^{−1} Σ_{k∈Λ_L*} 1/(e^{β(k²+gn−μ)} − 1),  μ < gn,
//!
//! solved for μ at fixed density n (the density-canonical formulation: the
//! g·n mean-field shift uses the prescribed total density). S_L is strictly
//! increasing with a pole at μ = gn, so bracketing bisection is
//! unconditionally safe. As L → ∞ the sums become the integral S_∞ and the
//! zero mode absorbs the excess density max{0, n − n_c}, with the critical
//! density
//!
//!   n_c = (2π)^{−d} ∫ dk/(e^{βk²} − 1) = ζ(d/2)·(4πβ)^{−d/2},  d ≥ 3.
//!
//! (The radial reduction carries the angular factor Ω_d/2 = π^{d/2}/Γ(d/2);
//! the ζΓ product then collapses to ζ(d/2)/(4π)^{d/2}. The series and the
//! quadrature route are cross-checked against each other in the tests.)

use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{HfbError, Result};
use crate::grid::{GridField, GridKernel, TorusGrid};
use crate::states::QuasifreeState;

#[derive(Debug, Clone)]
pub struct GibbsParams {
    /// Inverse temperature β > 0.
    pub beta: f64,
    /// Target total density n > 0.
    pub n: f64,
    /// Contact coupling g ≥ 0.
    pub g: f64,
    pub grid: Arc<TorusGrid>,
}

impl GibbsParams {
    pub fn new(beta: f64, n: f64, g: f64, grid: &Arc<TorusGrid>) -> Result<GibbsParams> {
        if !(beta > 0.0) || !(n > 0.0) || !(g >= 0.0) {
            return Err(HfbError::InvalidParameter(format!(
                "Gibbs parameters need beta > 0, n > 0, g >= 0; got ({beta}, {n}, {g})"
            )));
        }
        Ok(GibbsParams {
            beta,
            n,
            g,
            grid: grid.clone(),
        })
    }
}

/// Finite-L Gibbs solution at fixed density.
#[derive(Debug, Clone)]
pub struct GibbsSolution {
    /// Chemical potential, strictly below g·n.
    pub mu: f64,
    /// γ̂_L(k) = 1/(e^{β(k²+gn−μ)} − 1) per mode (grid mode order).
    pub gamma_hat: Array1<f64>,
    /// |Λ_L|^{−1} Σ_k γ̂_L(k), equal to n within the solver tolerance.
    pub density_check: f64,
    /// Zero-mode occupation fraction |Λ_L|^{−1}·γ̂_L(0)/n (the finite-L
    /// condensate fraction).
    pub condensate_fraction: f64,
}

/// Iterate |k|² over the grid's dual lattice without materializing it.
fn for_each_mode_sq(grid: &TorusGrid, mut f: impl FnMut(f64)) {
    let n = grid.points_per_side();
    let d = grid.dim();
    let dk = grid.mode_spacing();
    let half = (n / 2) as i64;
    let mut digits = vec![0usize; d];
    loop {
        let mut k2 = 0.0;
        for &j in digits.iter() {
            let m = (j as i64 - half) as f64 * dk;
            k2 += m * m;
        }
        f(k2);
        // odometer increment
        let mut axis = d;
        loop {
            if axis == 0 {
                return;
            }
            axis -= 1;
            digits[axis] += 1;
            if digits[axis] < n {
                break;
            }
            digits[axis] = 0;
        }
    }
}

/// Lattice mode sum S_L(μ) = |Λ_L|^{−1} Σ_k 1/(e^{β(k²+gn−μ)} − 1).
pub fn lattice_sum(mu: f64, params: &GibbsParams) -> Result<f64> {
    let shift = params.g * params.n - mu;
    if !(shift > 0.0) {
        return Err(HfbError::InvalidParameter(format!(
            "lattice_sum requires μ < g·n (zero-mode divergence); gn − μ = {shift}"
        )));
    }
    let beta = params.beta;
    let mut acc = 0.0f64;
    for_each_mode_sq(&params.grid, |k2| {
        acc += 1.0 / ((beta * (k2 + shift)).exp() - 1.0);
    });
    Ok(acc / params.grid.volume())
}

/// Solve n = S_L(μ) for the unique μ_L(n) < g·n by bracketing bisection on
/// the gap Δ = g·n − μ (S_L is strictly increasing in μ with a pole at gn
/// and limit 0 at −∞); |S_L(μ) − n| ≤ tol·n on return.
pub fn solve_mu(params: &GibbsParams, tol: f64) -> Result<GibbsSolution> {
    if !(tol > 0.0) {
        return Err(HfbError::InvalidParameter("tol must be > 0".into()));
    }
    let gn = params.g * params.n;
    let s_of_gap = |gap: f64| lattice_sum(gn - gap, params).expect("gap > 0");

    // bracket: S decreases in the gap; expand until it straddles n
    let mut lo = 1.0 / params.beta; // gap where S is (usually) below n
    let mut hi = lo;
    let mut guard = 0;
    while s_of_gap(lo) < params.n {
        lo *= 0.1;
        guard += 1;
        if guard > 400 {
            return Err(HfbError::NonConvergence(
                "could not bracket μ from below".into(),
            ));
        }
    }
    guard = 0;
    while s_of_gap(hi) > params.n {
        hi *= 10.0;
        guard += 1;
        if guard > 400 {
            return Err(HfbError::NonConvergence(
                "could not bracket μ from above".into(),
            ));
        }
    }

    // bisection on the gap (lo: S ≥ n, hi: S ≤ n)
    let mut s_mid = s_of_gap(lo);
    let mut mid = lo;
    for _ in 0..400 {
        mid = 0.5 * (lo + hi);
        s_mid = s_of_gap(mid);
        if (s_mid - params.n).abs() <= tol * params.n {
            break;
        }
        if s_mid > params.n {
            lo = mid;
        } else {
            hi = mid;
        }
        if (hi - lo) <= f64::EPSILON * hi {
            break;
        }
    }
    let mu = gn - mid;

    let grid = &params.grid;
    let m = grid.site_count();
    let mut gamma_hat = Array1::<f64>::zeros(m);
    for flat in 0..m {
        gamma_hat[flat] = 1.0 / ((params.beta * (grid.mode_sq(flat) + mid)).exp() - 1.0);
    }
    let density_check = gamma_hat.sum() / grid.volume();
    let condensate_fraction = gamma_hat[grid.zero_mode_index()] / grid.volume() / params.n;
    let _ = s_mid;
    Ok(GibbsSolution {
        mu,
        gamma_hat,
        density_check,
        condensate_fraction,
    })
}

// ---------------------------------------------------------------------------
// ζ, Γ and the critical density
// ---------------------------------------------------------------------------

/// ζ(s) for s > 1 by direct summation with an Euler-Maclaurin tail
/// (absolute accuracy far below 1e−12 for s ≥ 3/2).
pub fn zeta(s: f64) -> f64 {
    let n = 2000usize;
    let mut sum = 0.0;
    for j in 1..n {
        sum += (j as f64).powf(-s);
    }
    let nf = n as f64;
    sum + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s * nf.powf(-s - 1.0) / 12.0
        - s * (s + 1.0) * (s + 2.0) * nf.powf(-s - 3.0) / 720.0
}

/// Γ(d/2) for integer d ≥ 1 (exact half-integer/integer closed forms).
pub fn gamma_half_integer(d: usize) -> f64 {
    if d % 2 == 0 {
        // Γ(m) = (m−1)!
        let m = d / 2;
        (1..m).map(|j| j as f64).product()
    } else {
        // Γ(m + 1/2) = (2m)!/(4^m m!)·√π
        let m = (d - 1) / 2;
        let mut val = std::f64::consts::PI.sqrt();
        for j in 1..=m {
            val *= (j as f64) - 0.5;
        }
        val
    }
}

/// Critical density n_c = (2π)^{−d}∫dk/(e^{βk²}−1), evaluated through the
/// radial reduction (Ω_d/2)·Γ(d/2)·ζ(d/2)·β^{−d/2}/(2π)^d = ζ(d/2)/(4πβ)^{d/2}.
/// Requires d ≥ 3 (the Bose integral diverges below).
pub fn critical_density(beta: f64, d: usize) -> Result<f64> {
    if d < 3 {
        return Err(HfbError::InvalidParameter(format!(
            "critical density requires d >= 3, got {d}"
        )));
    }
    if !(beta > 0.0) {
        return Err(HfbError::InvalidParameter("beta must be > 0".into()));
    }
    let s = d as f64 / 2.0;
    let omega_half = std::f64::consts::PI.powf(s) / gamma_half_integer(d); // Ω_d/2
    Ok(zeta(s) * gamma_half_integer(d) * omega_half
        / (2.0 * std::f64::consts::PI).powi(d as i32)
        * beta.powf(-s))
}

/// Thermodynamic-limit condensate fraction max{0, n − n_c}/n.
pub fn condensate_fraction(params: &GibbsParams) -> Result<f64> {
    let d = params.grid.dim();
    let nc = critical_density(params.beta, d)?;
    Ok((params.n - nc).max(0.0) / params.n)
}

// ---------------------------------------------------------------------------
// Continuum mode integral
// ---------------------------------------------------------------------------

fn adaptive_simpson(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    rel_tol: f64,
    abs_floor: f64,
    depth: usize,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * (rel_tol * whole.abs() + abs_floor) {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, rel_tol, abs_floor * 0.5, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, rel_tol, abs_floor * 0.5, depth - 1)
}

fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    adaptive_simpson(
        &f,
        a,
        b,
        fa,
        fm,
        fb,
        whole,
        rel_tol,
        whole.abs() * rel_tol * 1e-3 + 1e-300,
        48,
    )
}

/// Continuum mode integral S_∞(μ) = (2π)^{−d}∫_{ℝ^d} dk/(e^{β(k²+gn−μ)}−1),
/// reduced radially and evaluated by adaptive quadrature (relative accuracy
/// ~1e−10). Defined for μ ≤ g·n and d ≥ 3; S_∞(gn) = n_c.
pub fn continuum_sum(mu: f64, params: &GibbsParams) -> Result<f64> {
    let d = params.grid.dim();
    continuum_sum_dim(mu, params.beta, params.n, params.g, d)
}

/// As `continuum_sum` with the dimension passed explicitly (no grid needed).
pub fn continuum_sum_dim(mu: f64, beta: f64, n: f64, g: f64, d: usize) -> Result<f64> {
    if d < 3 {
        return Err(HfbError::InvalidParameter(format!(
            "continuum sum requires d >= 3, got {d}"
        )));
    }
    let shift = g * n - mu;
    if shift < 0.0 {
        return Err(HfbError::InvalidParameter(format!(
            "continuum sum requires μ ≤ g·n, got gn − μ = {shift}"
        )));
    }
    let df = d as f64;
    let integrand = move |r: f64| -> f64 {
        if r < 1e-300 {
            // limit at the origin: r^{d−1}/(e^{β(r²+Δ)}−1)
            return if shift > 0.0 {
                0.0
            } else if d == 3 {
                // r²/(βr² + O(r⁴)) → 1/β
                1.0 / beta
            } else {
                0.0
            };
        }
        let x = beta * (r * r + shift);
        // e^x − 1 loses accuracy for tiny x; exp_m1 keeps the 1/x pole exact
        r.powi(d as i32 - 1) / x.exp_m1()
    };
    let r_max = (80.0 / beta).sqrt() + shift.sqrt().min(10.0);
    let radial = integrate(integrand, 0.0, r_max, 1e-11);
    let omega_d = 2.0 * std::f64::consts::PI.powf(df / 2.0) / gamma_half_integer(d);
    Ok(radial * omega_d / (2.0 * std::f64::consts::PI).powi(d as i32))
}

/// Thermodynamic-limit chemical potential: the root of n = S_∞(μ) for
/// n < n_c, and g·n at or above the critical density.
pub fn solve_mu_infinity(beta: f64, n: f64, g: f64, d: usize) -> Result<f64> {
    let nc = critical_density(beta, d)?;
    let gn = g * n;
    if n >= nc {
        return Ok(gn);
    }
    let s_of_gap = |gap: f64| continuum_sum_dim(gn - gap, beta, n, g, d).expect("gap >= 0");
    let mut lo = 0.0; // S(0) = n_c > n
    let mut hi = 1.0 / beta;
    let mut guard = 0;
    while s_of_gap(hi) > n {
        hi *= 10.0;
        guard += 1;
        if guard > 200 {
            return Err(HfbError::NonConvergence("could not bracket μ_∞".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let s = s_of_gap(mid);
        if (s - n).abs() <= 1e-12 * n {
            return Ok(gn - mid);
        }
        if s > n {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(1e-300) {
            break;
        }
    }
    Ok(gn - 0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
// Thermodynamic sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub l: f64,
    pub points_per_side: usize,
    pub mu: f64,
    pub n_check: f64,
    pub zero_mode_fraction: f64,
    /// S_∞(μ_L) − n (quadrature at the lattice μ; shrinks sub-critically,
    /// tends to n_c − n super-critically).
    pub s_inf_residual: f64,
}

/// Per-L Gibbs solves over an ascending list of torus sizes (each with its
/// own mode count per side so the Brillouin cutoff πN/(2L) stays large).
pub fn thermodynamic_sweep(
    beta: f64,
    n: f64,
    g: f64,
    dim: usize,
    points: &[(f64, usize)],
    tol: f64,
) -> Result<Vec<SweepRow>> {
    if dim < 3 {
        return Err(HfbError::InvalidParameter(
            "the thermodynamic sweep requires d >= 3".into(),
        ));
    }
    if points.is_empty() {
        return Err(HfbError::InvalidParameter("empty L list".into()));
    }
    for w in points.windows(2) {
        if w[1].0 <= w[0].0 {
            return Err(HfbError::InvalidParameter("L list must be ascending".into()));
        }
    }
    let mut rows = Vec::with_capacity(points.len());
    for &(l, n_side) in points {
        let grid = TorusGrid::new(dim, n_side, l)?;
        let params = GibbsParams::new(beta, n, g, &grid)?;
        let sol = solve_mu(&params, tol)?;
        let s_inf = continuum_sum_dim(sol.mu.min(g * n), beta, n, g, dim)?;
        rows.push(SweepRow {
            l,
            points_per_side: n_side,
            mu: sol.mu,
            n_check: sol.density_check,
            zero_mode_fraction: sol.condensate_fraction,
            s_inf_residual: s_inf - n,
        });
    }
    Ok(rows)
}

/// Sweep CSV (header `L,mu_L,n_check,zero_mode_fraction,s_inf_residual`).
pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("L,mu_L,n_check,zero_mode_fraction,s_inf_residual\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            crate::dynamics::fmt_g17(r.l),
            crate::dynamics::fmt_g17(r.mu),
            crate::dynamics::fmt_g17(r.n_check),
            crate::dynamics::fmt_g17(r.zero_mode_fraction),
            crate::dynamics::fmt_g17(r.s_inf_residual)
        ));
    }
    out
}

/// JSON summary of a sweep (schema shipped in-repo).
#[derive(Debug, Clone, Serialize)]
pub struct GibbsSummary {
    pub beta: f64,
    pub n: f64,
    pub g: f64,
    pub dim: usize,
    pub n_c: f64,
    pub condensate_fraction_predicted: f64,
    pub mu_infinity: f64,
    pub largest_l: f64,
    pub mu_at_largest_l: f64,
    pub zero_mode_fraction_at_largest_l: f64,
}

pub fn summarize_sweep(
    beta: f64,
    n: f64,
    g: f64,
    dim: usize,
    rows: &[SweepRow],
) -> Result<GibbsSummary> {
    let nc = critical_density(beta, dim)?;
    let last = rows
        .last()
        .ok_or_else(|| HfbError::InvalidParameter("empty sweep".into()))?;
    Ok(GibbsSummary {
        beta,
        n,
        g,
        dim,
        n_c: nc,
        condensate_fraction_predicted: (n - nc).max(0.0) / n,
        mu_infinity: solve_mu_infinity(beta, n, g, dim)?,
        largest_l: last.l,
        mu_at_largest_l: last.mu,
        zero_mode_fraction_at_largest_l: last.zero_mode_fraction,
    })
}

// ---------------------------------------------------------------------------
// Assembled Gibbs state
// ---------------------------------------------------------------------------

/// Build the translation-invariant quasifree state (φ = 0, σ = 0, γ from
/// γ̂_L) of a finite-L Gibbs solution.
pub fn assemble_gibbs_state(sol: &GibbsSolution, grid: &Arc<TorusGrid>) -> QuasifreeState {
    let symbol = sol.gamma_hat.mapv(|x| C64::new(x, 0.0));
    let gamma = GridKernel::from_symbol(grid, &symbol).hermitize();
    QuasifreeState::new(
        GridField::zeros(grid),
        gamma,
        GridKernel::zeros(grid),
    )
    .expect("shape consistency by construction")
}

/// Momentum occupations γ̂(k) = ⟨e_k, γ e_k⟩ of an arbitrary kernel, in the
/// grid mode order (reads back the Gibbs spectrum after evolution).
pub fn mode_occupations(gamma: &GridKernel) -> Array1<C64> {
    let grid = gamma.grid();
    let m = grid.site_count();
    let mut out = Array1::zeros(m);
    for flat in 0..m {
        let mode_int = grid.mode_int(flat);
        let e_k = GridField::plane_wave(grid, &mode_int)
            .scale(C64::new(1.0 / grid.volume().sqrt(), 0.0));
        out[flat] = e_k.inner(&gamma.apply(&e_k));
    }
    out
}
