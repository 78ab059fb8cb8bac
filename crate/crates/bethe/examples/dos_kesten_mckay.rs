//! Density of states: resolvent smoothing vs exact diagonalization vs the
//! Kesten–McKay closed form.
//!
//! ```bash
//! cargo run --release -p bethe --example dos_kesten_mckay
//! ```

use bethe::ergodic::{DisorderSpec, Distribution};
use bethe::lattice::LatticeContext;
use bethe::spectral::{
    cauchy_smooth_atoms, default_grid, dos_eigen, dos_resolvent, kesten_mckay,
    root_spectral_atoms,
};

fn main() {
    let ctx = LatticeContext::new(2).unwrap();

    println!("== free Laplacian, kappa = 2: resolvent DOS vs Kesten-McKay ==");
    let spec = DisorderSpec::zero(1);
    let grid = default_grid(2, 0.0, 1024);
    let dos = dos_resolvent(&ctx, &spec, 30, 0.02, &grid, 1).unwrap();
    println!("grid mass before normalization: {:.6}", dos.raw_mass);
    println!("{:>6}  {:>10}  {:>10}", "E", "estimate", "closed");
    for e in [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 2.83] {
        let i = grid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs()))
            .unwrap()
            .0;
        println!("{e:>6.2}  {:>10.5}  {:>10.5}", dos.density[i], kesten_mckay(e, 2));
    }

    println!("\n== exact-diagonalization estimator (root spectral atoms) ==");
    let atoms = root_spectral_atoms(&ctx, &spec, 6, 0).unwrap();
    println!("ball(6) root measure has {} atoms:", atoms.len());
    for (lambda, weight) in &atoms {
        println!("  E = {lambda:>7.4}, weight = {weight:.4}");
    }
    let smoothed = cauchy_smooth_atoms(&atoms, &grid, 0.05);
    let i0 = grid.len() / 2;
    println!(
        "Cauchy-smoothed atoms at E ~ 0: {:.5} (vs Kesten-McKay {:.5})",
        smoothed[i0],
        kesten_mckay(grid[i0], 2)
    );

    println!("\n== disordered DOS (uniform on [-1,1], 16 realizations) ==");
    let dspec = DisorderSpec::new(Distribution::Uniform { c: 1.0 }, 7).unwrap();
    let dgrid = default_grid(2, 1.0, 256);
    let ddos = dos_resolvent(&ctx, &dspec, 5, 0.1, &dgrid, 16).unwrap();
    println!("{:>6}  {:>10}  {:>10}", "E", "disordered", "free");
    for e in [0.0, 1.0, 2.0, 3.0] {
        let i = dgrid
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs()))
            .unwrap()
            .0;
        println!("{e:>6.2}  {:>10.5}  {:>10.5}", ddos.density[i], kesten_mckay(e, 2));
    }

    let histo = dos_eigen(&ctx, &dspec, 4, 16, 64).unwrap();
    println!(
        "\neigen-histogram estimator: {} bins, raw mass {:.4}, eta = {} (exact atoms)",
        histo.energies.len(),
        histo.raw_mass,
        histo.eta
    );

    println!("\n== kappa = 1 degenerates to the arcsine law ==");
    let c1 = LatticeContext::new(1).unwrap();
    let grid1 = default_grid(1, 0.0, 512);
    let dos1 = dos_resolvent(&c1, &DisorderSpec::zero(0), 30, 0.02, &grid1, 1).unwrap();
    for e in [0.0, 1.0, 1.8] {
        let i = grid1
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs()))
            .unwrap()
            .0;
        let arcsine = 1.0 / (std::f64::consts::PI * (4.0 - e * e).sqrt());
        println!("E = {e}: estimate {:.5} vs 1/(pi sqrt(4-E^2)) = {arcsine:.5}", dos1.density[i]);
    }
}
