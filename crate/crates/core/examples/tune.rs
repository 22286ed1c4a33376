use hfb_core::dynamics::*;
use hfb_core::gibbs::*;
use hfb_core::grid::*;
use hfb_core::meanfield::PairPotential;
use hfb_core::states::*;
use hfb_core::symplectic::*;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_default();
    if which == "e" {
        let grid = make_grid(1, 64, std::f64::consts::PI).unwrap();
        let pot = PairPotential::contact(1.0).unwrap();
        let v0 = GridField::zeros(&grid);
        let args: Vec<f64> = std::env::args().skip(2).map(|a| a.parse().unwrap()).collect();
        let spec = SmoothStateSpec {
            occupation: args.get(0).copied().unwrap_or(1.2),
            squeeze: args.get(1).copied().unwrap_or(0.12),
            condensate: args.get(2).copied().unwrap_or(0.12),
            mode_cutoff: args.get(3).copied().unwrap_or(3.0),
        };
        let mut rho0 = sample_smooth_state_spec(&grid, 2024, &spec);
        if std::env::var("WARM").is_ok() {
            let warm = IntegratorConfig { output_stride: 100, ..IntegratorConfig::rk4(1e-3, 0.2) };
            rho0 = evolve(&rho0, &pot, &v0, &warm).unwrap().final_state;
            println!("warmed");
        }
        println!("N = {}", hfb_core::observables::particle_number(&rho0));
        for dt in [1e-3, 5e-4, 2.5e-4] {
            let cfg = IntegratorConfig { output_stride: (0.1 / dt) as usize, ..IntegratorConfig::rk4(dt, 1.0) };
            let traj = evolve(&rho0, &pot, &v0, &cfg).unwrap();
            let e0 = traj.records[0].energy;
            let de = traj.records.iter().map(|r| (r.energy - e0).abs() / e0.abs()).fold(0.0, f64::max);
            let de_final = (traj.records.last().unwrap().energy - e0).abs() / e0.abs();
            let dn = traj.records.iter().map(|r| (r.particle_number - traj.records[0].particle_number).abs() / traj.records[0].particle_number).fold(0.0, f64::max);
            let me = traj.records.iter().map(|r| r.min_eig_gamma_matrix).fold(f64::INFINITY, f64::min);
            let series: Vec<String> = traj.records.iter().step_by(2).map(|r| format!("{:+.1e}", (r.energy - e0) / e0.abs())).collect();
            println!("dt {dt}: maxE {de:.2e} final {de_final:.2e} maxN {dn:.2e} mineig {me:.2e}  [{}]", series.join(" "));
        }
    } else if which == "a" {
        // criterion 1/3 tuning
        for (scale, cutoff) in [(0.3, 2.0), (0.6, 2.5), (0.8, 3.0), (1.2, 3.5)] {
            let grid = make_grid(1, 64, std::f64::consts::PI).unwrap();
            let pot = PairPotential::contact(1.0).unwrap();
            let v0 = GridField::zeros(&grid);
            let rho0 = sample_smooth_state(&grid, 2024, scale, cutoff);
            let mut out = vec![];
            for dt in [1e-3, 5e-4] {
                let cfg = IntegratorConfig { output_stride: 100, ..IntegratorConfig::rk4(dt, 1.0) };
                let traj = evolve(&rho0, &pot, &v0, &cfg).unwrap();
                let n0 = traj.records[0].particle_number;
                let e0 = traj.records[0].energy;
                let dn = traj.records.iter().map(|r| (r.particle_number - n0).abs() / n0).fold(0.0, f64::max);
                let de = traj.records.iter().map(|r| (r.energy - e0).abs() / e0.abs()).fold(0.0, f64::max);
                let me = traj.records.iter().map(|r| r.min_eig_gamma_matrix).fold(f64::INFINITY, f64::min);
                out.push((dn, de, me));
            }
            println!(
                "scale {scale} cutoff {cutoff}: N {:.2e} ratio {:.1}, E {:.2e} ratio {:.1}, mineig {:.2e} / {:.2e}",
                out[0].0, out[0].0 / out[1].0, out[0].1, out[0].1 / out[1].1, out[0].2, out[1].2
            );
        }
    } else if which == "b" {
        for _ in [0] {
            let grid = make_grid(1, 64, std::f64::consts::PI).unwrap();
            let pot = PairPotential::contact(1.0).unwrap();
            let v0 = GridField::zeros(&grid);
            let spec = SmoothStateSpec { occupation: 3.0, squeeze: 0.08, condensate: 0.10, mode_cutoff: 4.0 };
            let raw = sample_smooth_state_spec(&grid, 2024, &spec);
            let warm = IntegratorConfig { output_stride: 100, ..IntegratorConfig::rk4(1e-3, 0.2) };
            let rho0 = evolve(&raw, &pot, &v0, &warm).unwrap().final_state.repair();
            let scale = 0.0;
            let t0 = std::time::Instant::now();
            let diag = diagonalize_gamma(rho0.gamma(), rho0.sigma(), 1e-9).unwrap();
            println!(
                "scale {scale}: sigma0 {:.3}, residual {:.2e}, check {:.2e}, clip {:.1e}, {:.1}s",
                diag.sigma_decay[0].1,
                diag.residual,
                check_symplectic(&diag.map),
                diag.clip_magnitude,
                t0.elapsed().as_secs_f64()
            );
        }
    } else if which == "c" {
        let nc = critical_density(1.0, 3).unwrap();
        let n_super = 2.0 * nc;
        for (l, n) in [(8.0, 32usize), (12.0, 32), (16.0, 32), (20.0, 32), (24.0, 32), (28.0, 32)] {
            let rows = thermodynamic_sweep(1.0, n_super, 1.0, 3, &[(l, n)], 1e-10).unwrap();
            println!("L={l} N={n}: fraction {:.4}, mu {:.6}, gn {:.6}", rows[0].zero_mode_fraction, rows[0].mu, n_super);
        }
    }
}
