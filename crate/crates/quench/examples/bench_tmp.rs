use quench::{minimize, Grid, Params, ProfileSpec, Smoothing, SolverOptions};
use std::time::Instant;

fn main() {
    let prm = Params::new(3.0, 0.5).unwrap();
    let suite = SolverOptions {
        smoothing: Smoothing::geometric(1e-2, 1e-6, 0.1).unwrap(),
        max_iters_per_stage: 250,
        grad_tol: 1e-5,
        energy_tol: 1e-12,
        finish_sweeps: 2500,
        ..SolverOptions::default()
    };

    for n in [513usize, 1025] {
        let g = Grid::line(0.0, 1.0, n).unwrap();
        let spec = ProfileSpec::new(&prm, 0.25);
        let bnd = spec.boundary_on(&g);
        let t = Instant::now();
        let r = minimize(&prm, &bnd, &suite).unwrap();
        let exact = spec.field_on(&g);
        let sup_err = (0..g.num_nodes())
            .map(|i| (r.field.get(i) - exact.get(i)).abs())
            .fold(0.0f64, f64::max);
        let iters: usize = r.stages.iter().map(|s| s.iterations).sum();
        eprintln!(
            "1d n={n}: {:?} conv={} kkt={:.2e} stage_iters={iters} finish={} sup_err={:.2e}",
            t.elapsed(),
            r.converged,
            r.kkt,
            r.finish_sweeps,
            sup_err
        );
    }
    for (nx, ny) in [(131usize, 66usize), (261, 131)] {
        let g = Grid::rect((0.0, 2.0), (0.0, 1.0), nx, ny).unwrap();
        let spec = ProfileSpec::new(&prm, 1.0);
        let bnd = spec.boundary_on(&g);
        let t = Instant::now();
        let r = minimize(&prm, &bnd, &suite).unwrap();
        let exact = spec.field_on(&g);
        let sup_err = (0..g.num_nodes())
            .map(|i| (r.field.get(i) - exact.get(i)).abs())
            .fold(0.0f64, f64::max);
        let iters: usize = r.stages.iter().map(|s| s.iterations).sum();
        eprintln!(
            "2d {nx}x{ny}: {:?} conv={} kkt={:.2e} stage_iters={iters} finish={} sup_err={:.2e}",
            t.elapsed(),
            r.converged,
            r.kkt,
            r.finish_sweeps,
            sup_err
        );
    }
}
