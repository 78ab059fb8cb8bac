//! Density of states and the log-energy (Thouless) integral.
//!
//! The density of states n is the disorder-averaged spectral measure of H_ω
//! at a single vertex: ∫ f dn = 𝔼⟨δ₀, f(H_ω) δ₀⟩. Two estimators:
//!
//! - [`dos_resolvent`] — (1/π)·Im G(E+iη; 0, 0) through the rooted
//!   recursion split at the root, averaged over realizations. For
//!   constant-potential specs the recursion is iterated to its fixed point
//!   (the infinite-volume value); disordered specs use the depth-2L tree
//!   recursion per realization, volume-doubled per the enlargement
//!   convention.
//! - [`dos_eigen`] — exact diagonalization of the ball, eigenvalues
//!   weighted by their root overlap |⟨δ₀, ψ_k⟩|²; per realization the
//!   weights sum to exactly 1. Serves as the oracle for the resolvent
//!   estimator.
//!
//! For the free Laplacian the density is the Kesten–McKay form
//! (κ+1)/(2π) · √(4κ−E²)/((κ+1)²−E²) on [−2√κ, 2√κ], which degenerates to
//! the arcsine law at κ = 1. The Thouless-like term 𝓛_T(z) = ∫ log|E−z| dn(E)
//! is evaluated by adaptive Gauss–Legendre after the substitution
//! E = 2√κ cos θ (the edge square roots become smooth), with the log
//! singularity subtracted against the closed form
//! ∫₀^π log|a cosθ − z| dθ = π·log(|z+√(z²−a²)|/2); its closed-form
//! derivative is ((κ−1)/2)·z/((1+κ)²−z²).

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ergodic::DisorderSpec;
use crate::green::{self, GreenError};
use crate::lattice::{LatticeContext, VertexLabel};
use crate::numerics::{adaptive_gl, pairwise_sum_rows};
use crate::operator::{assemble, OperatorError, Region};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Green(#[from] GreenError),
    #[error("smoothing scale eta must be > 0, got {0}")]
    BadEta(f64),
    #[error("need radius >= 2, got {0}")]
    RadiusTooSmall(u32),
    #[error("need at least 1 sample")]
    NoSamples,
    #[error("energy grid needs at least 2 ascending points")]
    BadGrid,
    #[error("input measure has mass {mass}, outside 1 +- {tol}")]
    NotNormalized { mass: f64, tol: f64 },
    #[error("disordered recursion at depth {depth} costs ~{vertices} vertices per grid point, above the guard")]
    DisorderedDepthGuard { depth: u32, vertices: u128 },
    #[error("derivative pole at z = +-(kappa+1)")]
    DerivativePole,
}

/// Density-of-states estimate on an energy grid.
///
/// `density` is normalized to unit trapezoidal mass over the grid;
/// `raw_mass` records the pre-normalization mass (smoothing kernels lose
/// Cauchy tail mass past the grid ends). `eta = 0` marks exact-eigen mode.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DosEstimate {
    pub kappa: u32,
    pub energies: Vec<f64>,
    pub density: Vec<f64>,
    pub eta: f64,
    pub radius: u32,
    pub samples: u64,
    pub seed: u64,
    pub raw_mass: f64,
}

impl DosEstimate {
    /// Trapezoidal mass of the stored (normalized) density.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.energies, &self.density)
    }

    /// Normalized cumulative distribution on the grid nodes.
    pub fn cdf(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.energies.len());
        let mut acc = 0.0;
        out.push(0.0);
        for i in 1..self.energies.len() {
            acc += 0.5
                * (self.density[i] + self.density[i - 1])
                * (self.energies[i] - self.energies[i - 1]);
            out.push(acc);
        }
        let total = *out.last().unwrap();
        if total > 0.0 {
            for v in &mut out {
                *v /= total;
            }
        }
        out
    }

    /// Kolmogorov distance between normalized CDFs, compared on this grid.
    pub fn kolmogorov_distance(&self, other: &DosEstimate) -> f64 {
        let a = self.cdf();
        let b_grid = other.cdf();
        let mut worst = 0.0f64;
        for (i, &e) in self.energies.iter().enumerate() {
            let b = interp(&other.energies, &b_grid, e);
            worst = worst.max((a[i] - b).abs());
        }
        worst
    }
}

fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..x.len() {
        acc += 0.5 * (y[i] + y[i - 1]) * (x[i] - x[i - 1]);
    }
    acc
}

fn interp(x: &[f64], y: &[f64], at: f64) -> f64 {
    if at <= x[0] {
        return y[0];
    }
    if at >= *x.last().unwrap() {
        return *y.last().unwrap();
    }
    let idx = x.partition_point(|&v| v < at);
    let (x0, x1) = (x[idx - 1], x[idx]);
    let t = if x1 > x0 { (at - x0) / (x1 - x0) } else { 0.0 };
    y[idx - 1] * (1.0 - t) + y[idx] * t
}

/// Default 1024-point grid on [−(κ+1)−C−0.5, (κ+1)+C+0.5].
pub fn default_grid(kappa: u32, support_bound: f64, points: usize) -> Vec<f64> {
    let lo = -((kappa + 1) as f64) - support_bound - 0.5;
    let hi = -lo;
    (0..points)
        .map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64)
        .collect()
}

/// Which finite-volume discipline the resolvent estimator uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResolventMode {
    /// Iterate the recursion to its fixed point (constant potential only);
    /// the infinite-volume limit the finite radii approximate.
    Converged,
    /// Depth 2L (enlargement 𝔢(L) = L), the default for disorder.
    Doubled,
    /// Depth exactly L: the literal finite-volume measure, the mode the
    /// eigen-estimator cross-check compares against.
    Finite,
}

/// Resolvent-smoothed DOS: density(E) = avg_ω (1/π)·Im G_ω(E+iη; 0, 0).
///
/// Constant-potential specs evaluate at the recursion fixed point;
/// disordered specs run the exact rooted tree recursion at depth 2L.
pub fn dos_resolvent(
    ctx: &LatticeContext,
    spec: &DisorderSpec,
    radius: u32,
    eta: f64,
    grid: &[f64],
    samples: u64,
) -> Result<DosEstimate, SpectralError> {
    let mode = if spec.distribution.constant_value().is_some() {
        ResolventMode::Converged
    } else {
        ResolventMode::Doubled
    };
    dos_resolvent_with_mode(ctx, spec, radius, eta, grid, samples, mode)
}

/// [`dos_resolvent`] with an explicit finite-volume discipline.
pub fn dos_resolvent_with_mode(
    ctx: &LatticeContext,
    spec: &DisorderSpec,
    radius: u32,
    eta: f64,
    grid: &[f64],
    samples: u64,
    mode: ResolventMode,
) -> Result<DosEstimate, SpectralError> {
    if eta <= 0.0 {
        return Err(SpectralError::BadEta(eta));
    }
    if radius < 2 {
        return Err(SpectralError::RadiusTooSmall(radius));
    }
    if samples == 0 {
        return Err(SpectralError::NoSamples);
    }
    if grid.len() < 2 || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SpectralError::BadGrid);
    }
    let kappa = ctx.kappa();
    let depth = match mode {
        ResolventMode::Doubled => 2 * radius,
        _ => radius,
    };

    let rows: Vec<Vec<f64>> = if let Some(c) = spec.distribution.constant_value() {
        // fixed point of M = 1/(c - z - kappa M); one row, samples identical
        let row: Vec<f64> = grid
            .iter()
            .map(|&e| {
                let z = Complex64::new(e, eta);
                let g = match mode {
                    ResolventMode::Converged => {
                        let m = green::m_free_closed(z - Complex64::new(c, 0.0), kappa)
                            .expect("Im z > 0");
                        (Complex64::new(c, 0.0) - z - m * (kappa + 1) as f64).inv()
                    }
                    _ => {
                        let m = green::m_constant_finite(z, kappa, c, depth);
                        (Complex64::new(c, 0.0) - z - m * (kappa + 1) as f64).inv()
                    }
                };
                g.im / std::f64::consts::PI
            })
            .collect();
        vec![row; samples as usize]
    } else {
        let per_point = (kappa as u128 + 1) * subtree_cost(kappa, depth);
        if per_point > 3_000_000 {
            return Err(SpectralError::DisorderedDepthGuard {
                depth,
                vertices: per_point,
            });
        }
        (0..samples)
            .into_par_iter()
            .map(|s| {
                let omega = spec.realization(s);
                grid.iter()
                    .map(|&e| {
                        let z = Complex64::new(e, eta);
                        let g = green::rooted_green_at_root(ctx, &omega, z, depth)
                            .expect("Im z > 0 and guarded depth");
                        g.im / std::f64::consts::PI
                    })
                    .collect()
            })
            .collect()
    };

    let summed = pairwise_sum_rows(&rows);
    let mut density: Vec<f64> = summed.iter().map(|v| v / samples as f64).collect();
    let raw_mass = trapezoid(grid, &density);
    if raw_mass > 0.0 {
        for d in &mut density {
            *d /= raw_mass;
        }
    }
    Ok(DosEstimate {
        kappa,
        energies: grid.to_vec(),
        density,
        eta,
        radius,
        samples,
        seed: spec.master_seed,
        raw_mass,
    })
}

fn subtree_cost(kappa: u32, depth: u32) -> u128 {
    let k = kappa as u128;
    if k == 1 {
        depth as u128
    } else {
        (k.saturating_pow(depth) - 1) / (k - 1)
    }
}

/// Spectral atoms (λ_k, |⟨δ_x, ψ_k⟩|²) of the ball-L operator at a vertex.
pub fn vertex_spectral_atoms(
    ctx: &LatticeContext,
    spec: &DisorderSpec,
    radius: u32,
    sample: u64,
    at: &VertexLabel,
) -> Result<Vec<(f64, f64)>, SpectralError> {
    let region = Region::ball(ctx, radius)?;
    let idx = region
        .index_of(at)
        .ok_or_else(|| OperatorError::NotInRegion(at.label_string()))?;
    let op = assemble(ctx, &region, &spec.realization(sample));
    let (vals, vecs) = op.eigen_decomposition()?;
    Ok(vals
        .iter()
        .enumerate()
        .map(|(k, &l)| (l, vecs[(idx, k)] * vecs[(idx, k)]))
        .collect())
}

/// Root spectral atoms of the ball-L operator.
pub fn root_spectral_atoms(
    ctx: &LatticeContext,
    spec: &DisorderSpec,
    radius: u32,
    sample: u64,
) -> Result<Vec<(f64, f64)>, SpectralError> {
    vertex_spectral_atoms(ctx, spec, radius, sample, &VertexLabel::root())
}

/// Cauchy-smoothed density of an atomic measure on a grid.
pub fn cauchy_smooth_atoms(atoms: &[(f64, f64)], grid: &[f64], eta: f64) -> Vec<f64> {
    grid.iter()
        .map(|&e| {
            atoms
                .iter()
                .map(|&(l, w)| w * (eta / std::f64::consts::PI) / ((e - l) * (e - l) + eta * eta))
                .sum()
        })
        .collect()
}

/// Exact-diagonalization DOS: histogram of eigenvalues weighted by root
/// overlap, averaged over realizations. Weights sum to 1 per realization.
pub fn dos_eigen(
    ctx: &LatticeContext,
    spec: &DisorderSpec,
    radius: u32,
    samples: u64,
    bins: usize,
) -> Result<DosEstimate, SpectralError> {
    if samples == 0 {
        return Err(SpectralError::NoSamples);
    }
    if bins < 2 {
        return Err(SpectralError::BadGrid);
    }
    let kappa = ctx.kappa();
    let support = spec.distribution.support_bound();
    let lo = -((kappa + 1) as f64) - support - 0.5;
    let hi = -lo;
    let width = (hi - lo) / bins as f64;
    let rows: Vec<Vec<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let atoms = root_spectral_atoms(ctx, spec, radius, s)?;
            let mut row = vec![0.0; bins];
            for (l, w) in atoms {
                let b = (((l - lo) / width) as usize).min(bins - 1);
                row[b] += w / width;
            }
            Ok(row)
        })
        .collect::<Result<_, SpectralError>>()?;
    let summed = pairwise_sum_rows(&rows);
    let mut density: Vec<f64> = summed.iter().map(|v| v / samples as f64).collect();
    let energies: Vec<f64> = (0..bins).map(|i| lo + (i as f64 + 0.5) * width).collect();
    let raw_mass = trapezoid(&energies, &density);
    if raw_mass > 0.0 {
        for d in &mut density {
            *d /= raw_mass;
        }
    }
    Ok(DosEstimate {
        kappa,
        energies,
        density,
        eta: 0.0,
        radius,
        samples,
        seed: spec.master_seed,
        raw_mass,
    })
}

/// Kesten–McKay density of the free Laplacian:
/// (κ+1)/(2π) · √(4κ−E²)/((κ+1)²−E²) for |E| ≤ 2√κ, else 0.
pub fn kesten_mckay(e: f64, kappa: u32) -> f64 {
    let k = kappa as f64;
    let s = 4.0 * k - e * e;
    if s <= 0.0 {
        return 0.0;
    }
    (k + 1.0) / (2.0 * std::f64::consts::PI) * s.sqrt() / ((k + 1.0) * (k + 1.0) - e * e)
}

/// Input measure of the Thouless integral.
#[derive(Debug, Clone, Copy)]
pub enum SpectralMeasure<'a> {
    /// The analytic free-Laplacian density for connectivity κ.
    KestenMckay { kappa: u32 },
    /// A grid estimate (must carry unit mass).
    Grid(&'a DosEstimate),
}

/// Kesten–McKay weight after E = 2√κ cos θ: smooth on [0, π] uniformly in κ.
fn km_theta_weight(theta: f64, kappa: u32) -> f64 {
    let k = kappa as f64;
    let s = theta.sin();
    let c = theta.cos();
    (k + 1.0) / (2.0 * std::f64::consts::PI) * 4.0 * k * s * s
        / ((k + 1.0) * (k + 1.0) - 4.0 * k * c * c)
}

/// ∫₀^π log|a cosθ − z| dθ = π · log(|z + √(z²−a²)|/2), the branch of the
/// square root with |z + √(z²−a²)| ≥ a.
fn log_kernel_closed(a: f64, z: Complex64) -> f64 {
    let disc = (z * z - Complex64::new(a * a, 0.0)).sqrt();
    let big = ((z + disc).norm()).max((z - disc).norm());
    std::f64::consts::PI * (big / 2.0).ln()
}

const QUAD_TOL: f64 = 1e-11;

/// 𝓛_T(z) = ∫ log|E−z| dn(E), the Thouless-like term.
///
/// Real-axis z engage the singularity-split quadrature (subtraction of the
/// log kernel against its closed form at the singular angle).
pub fn thouless_integral(measure: SpectralMeasure, z: Complex64) -> Result<f64, SpectralError> {
    match measure {
        SpectralMeasure::KestenMckay { kappa } => Ok(thouless_integral_km(z, kappa)),
        SpectralMeasure::Grid(dos) => {
            let mass = dos.mass();
            if (mass - 1.0).abs() > 5e-3 {
                return Err(SpectralError::NotNormalized { mass, tol: 5e-3 });
            }
            Ok(thouless_integral_grid(dos, z))
        }
    }
}

fn thouless_integral_km(z: Complex64, kappa: u32) -> f64 {
    let a = 2.0 * (kappa as f64).sqrt();
    let log_abs = move |theta: f64| {
        let e = a * theta.cos();
        ((e - z.re) * (e - z.re) + z.im * z.im).sqrt().max(1e-300).ln()
    };
    let weight = move |theta: f64| km_theta_weight(theta, kappa);
    let singular = z.re.abs() < a && z.im.abs() < 0.1;
    if !singular {
        return adaptive_gl(&|t| weight(t) * log_abs(t), 0.0, std::f64::consts::PI, QUAD_TOL);
    }
    // subtract the singular kernel at theta0 = acos(Re z / a)
    let theta0 = (z.re / a).acos();
    let w0 = weight(theta0);
    let smooth = |t: f64| (weight(t) - w0) * log_abs(t);
    let mut total = adaptive_gl(&smooth, 0.0, theta0, QUAD_TOL)
        + adaptive_gl(&smooth, theta0, std::f64::consts::PI, QUAD_TOL);
    total += w0 * log_kernel_closed(a, z);
    total
}

fn thouless_integral_grid(dos: &DosEstimate, z: Complex64) -> f64 {
    let lo = dos.energies[0];
    let hi = *dos.energies.last().unwrap();
    let dens = |e: f64| interp(&dos.energies, &dos.density, e);
    let log_abs =
        move |e: f64| ((e - z.re) * (e - z.re) + z.im * z.im).sqrt().max(1e-300).ln();
    let mut total = 0.0;
    if z.re > lo && z.re < hi && z.im.abs() < 0.1 {
        let d0 = dens(z.re);
        let smooth = |e: f64| (dens(e) - d0) * log_abs(e);
        total += adaptive_gl(&smooth, lo, z.re, 1e-9) + adaptive_gl(&smooth, z.re, hi, 1e-9);
        // closed-form integral of (1/2)log((E-re)^2 + im^2) over [lo, hi]
        total += d0 * log_kernel_segment(lo - z.re, hi - z.re, z.im);
    } else {
        total += adaptive_gl(&|e| dens(e) * log_abs(e), lo, z.re.clamp(lo, hi), 1e-9);
        total += adaptive_gl(&|e| dens(e) * log_abs(e), z.re.clamp(lo, hi), hi, 1e-9);
    }
    total
}

/// ∫ log√(t²+η²) dt over [t0, t1] in closed form.
fn log_kernel_segment(t0: f64, t1: f64, eta: f64) -> f64 {
    let anti = |t: f64| {
        let r2 = t * t + eta * eta;
        0.5 * t * r2.max(1e-300).ln() - t
            + if eta != 0.0 {
                eta * (t / eta).atan()
            } else {
                0.0
            }
    };
    anti(t1) - anti(t0)
}

/// Closed-form derivative of the free Thouless term:
/// d𝓛_T/dz = ((κ−1)/2) · z / ((1+κ)² − z²). Identically 0 at κ = 1.
pub fn thouless_derivative_closed(z: Complex64, kappa: u32) -> Result<Complex64, SpectralError> {
    let k1 = (kappa + 1) as f64;
    let denom = Complex64::new(k1 * k1, 0.0) - z * z;
    if denom.norm() < 1e-12 {
        return Err(SpectralError::DerivativePole);
    }
    Ok(z * ((kappa as f64 - 1.0) / 2.0) / denom)
}

/// Central-difference derivative of the Kesten–McKay Thouless term along
/// the real axis at height η (η = 0 uses the singularity-split quadrature).
pub fn thouless_derivative_numeric(kappa: u32, e: f64, eta: f64, h: f64) -> f64 {
    let up = thouless_integral_km(Complex64::new(e + h, eta), kappa);
    let dn = thouless_integral_km(Complex64::new(e - h, eta), kappa);
    (up - dn) / (2.0 * h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ergodic::Distribution;

    fn ctx(k: u32) -> LatticeContext {
        LatticeContext::new(k).unwrap()
    }

    #[test]
    fn kesten_mckay_values() {
        let v = kesten_mckay(0.0, 2.0 as u32 as u32);
        let expected = (2.0f64).sqrt() / (3.0 * std::f64::consts::PI);
        assert!((v - expected).abs() < 1e-12, "{v} vs {expected}");
        assert_eq!(kesten_mckay(3.0, 2), 0.0);
        assert_eq!(kesten_mckay(-2.9, 2), 0.0);
    }

    #[test]
    fn kesten_mckay_unit_mass() {
        for kappa in [1u32, 2, 3, 4] {
            let mass = adaptive_gl(
                &|t: f64| km_theta_weight(t, kappa),
                0.0,
                std::f64::consts::PI,
                1e-12,
            );
            assert!((mass - 1.0).abs() < 1e-8, "kappa={kappa}: mass={mass}");
            // and the theta weight really is KM after substitution
            let a = 2.0 * (kappa as f64).sqrt();
            let th: f64 = 1.1;
            let e = a * th.cos();
            let km_dE = kesten_mckay(e, kappa) * a * th.sin();
            assert!((km_theta_weight(th, kappa) - km_dE).abs() < 1e-12);
        }
    }

    #[test]
    fn dos_resolvent_free_hits_kesten_mckay_at_zero() {
        let c = ctx(2);
        let spec = DisorderSpec::zero(1);
        let grid = default_grid(2, 0.0, 1024);
        let dos = dos_resolvent(&c, &spec, 30, 0.02, &grid, 1).unwrap();
        assert!((dos.mass() - 1.0).abs() < 5e-3);
        let i0 = grid
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .unwrap()
            .0;
        let km0 = kesten_mckay(0.0, 2);
        assert!(
            (dos.density[i0] - km0).abs() < 0.005,
            "density(0) = {} vs {km0}",
            dos.density[i0]
        );
        for d in &dos.density {
            assert!(*d >= 0.0);
        }
    }

    #[test]
    fn dos_resolvent_chain_matches_smoothed_arcsine() {
        // independent oracle: Cauchy-convolved arcsine law by quadrature
        let c = ctx(1);
        let spec = DisorderSpec::zero(0);
        let eta = 0.05;
        let grid: Vec<f64> = (0..31).map(|i| -3.0 + 6.0 * i as f64 / 30.0).collect();
        let dos = dos_resolvent(&c, &spec, 10, eta, &grid, 1).unwrap();
        for (i, &e) in grid.iter().enumerate() {
            let smoothed = adaptive_gl(
                &|t: f64| {
                    let x = 2.0 * t.cos();
                    (1.0 / std::f64::consts::PI)
                        * (eta / std::f64::consts::PI)
                        / ((e - x) * (e - x) + eta * eta)
                },
                0.0,
                std::f64::consts::PI,
                1e-11,
            );
            assert!(
                (dos.density[i] * dos.raw_mass - smoothed).abs() < 1e-8,
                "E={e}: {} vs {smoothed}",
                dos.density[i] * dos.raw_mass
            );
        }
    }

    #[test]
    fn dos_eigen_point_mass_at_constant() {
        let c = ctx(2);
        let spec = DisorderSpec::new(Distribution::Constant { c: 1.5 }, 0).unwrap();
        let atoms = root_spectral_atoms(&c, &spec, 0, 0).unwrap();
        assert_eq!(atoms.len(), 1);
        assert!((atoms[0].0 - 1.5).abs() < 1e-12);
        assert!((atoms[0].1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn eigen_atom_weights_sum_to_one() {
        let c = ctx(2);
        let spec = DisorderSpec::new(Distribution::Uniform { c: 1.0 }, 4).unwrap();
        let atoms = root_spectral_atoms(&c, &spec, 4, 0).unwrap();
        let total: f64 = atoms.iter().map(|(_, w)| w).sum();
        assert!((total - 1.0).abs() < 1e-10, "weights sum to {total}");
        for (_, w) in &atoms {
            assert!(*w >= -1e-15);
        }
    }

    #[test]
    fn estimator_consistency_kolmogorov() {
        // matched finite volume: the recursion route must reproduce the
        // dense-eigensolver route as a smoothed measure
        let c = ctx(2);
        let spec = DisorderSpec::zero(0);
        let eta = 0.05;
        let grid = default_grid(2, 0.0, 1024);
        let res = dos_resolvent_with_mode(&c, &spec, 6, eta, &grid, 1, ResolventMode::Finite)
            .unwrap();
        let atoms = root_spectral_atoms(&c, &spec, 6, 0).unwrap();
        let smoothed = cauchy_smooth_atoms(&atoms, &grid, eta);
        let raw_mass = trapezoid(&grid, &smoothed);
        let eigen_like = DosEstimate {
            kappa: 2,
            energies: grid.clone(),
            density: smoothed.iter().map(|d| d / raw_mass).collect(),
            eta,
            radius: 6,
            samples: 1,
            seed: 0,
            raw_mass,
        };
        let ks = res.kolmogorov_distance(&eigen_like);
        assert!(ks <= 0.03, "Kolmogorov distance {ks}");
    }

    #[test]
    fn dos_root_choice_immaterial() {
        // covariance: the disorder-averaged local measure is vertex
        // independent; compare smoothed estimates at the root and at (0,0)
        // of a larger ball within the Monte-Carlo error bars
        let c = ctx(2);
        let spec = DisorderSpec::new(Distribution::Uniform { c: 1.0 }, 9).unwrap();
        let probes = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let eta = 0.3;
        let samples = 32;
        let child = VertexLabel::new(&c, vec![0]).unwrap();
        let mut at_root = vec![Vec::new(); probes.len()];
        let mut at_child = vec![Vec::new(); probes.len()];
        for s in 0..samples {
            let a = root_spectral_atoms(&c, &spec, 4, s).unwrap();
            let b = vertex_spectral_atoms(&c, &spec, 5, s, &child).unwrap();
            for (i, rows) in at_root.iter_mut().enumerate() {
                rows.push(cauchy_smooth_atoms(&a, &probes[i..=i], eta)[0]);
            }
            for (i, rows) in at_child.iter_mut().enumerate() {
                rows.push(cauchy_smooth_atoms(&b, &probes[i..=i], eta)[0]);
            }
        }
        for (i, &e) in probes.iter().enumerate() {
            let (ma, sa) = crate::numerics::mean_stderr(&at_root[i]);
            let (mb, sb) = crate::numerics::mean_stderr(&at_child[i]);
            let combined = (sa * sa + sb * sb).sqrt();
            assert!(
                (ma - mb).abs() <= 3.5 * combined + 2e-3,
                "E={e}: root {ma}+-{sa} vs child {mb}+-{sb}"
            );
        }
    }

    #[test]
    fn thouless_integral_unit_mass_asymptotics() {
        let z = Complex64::new(1.0e6, 0.0);
        for kappa in [1, 2, 3] {
            let v = thouless_integral(SpectralMeasure::KestenMckay { kappa }, z).unwrap();
            assert!((v - z.re.ln()).abs() < 1e-5, "kappa={kappa}: {v}");
        }
    }

    #[test]
    fn thouless_integral_symmetric_in_e() {
        for e in [0.5, 1.3, 2.0] {
            let a = thouless_integral(
                SpectralMeasure::KestenMckay { kappa: 2 },
                Complex64::new(e, 1e-3),
            )
            .unwrap();
            let b = thouless_integral(
                SpectralMeasure::KestenMckay { kappa: 2 },
                Complex64::new(-e, 1e-3),
            )
            .unwrap();
            assert!((a - b).abs() < 1e-9, "E={e}: {a} vs {b}");
        }
    }

    #[test]
    fn thouless_integral_chain_vanishes_inside_spectrum() {
        // equilibrium potential of [-2, 2] has zero log-capacity inside
        for e in [0.0, 0.45, 0.5, 0.55, 1.0] {
            let v = thouless_integral(
                SpectralMeasure::KestenMckay { kappa: 1 },
                Complex64::new(e, 0.0),
            )
            .unwrap();
            assert!(v.abs() < 1e-9, "E={e}: {v}");
        }
    }

    #[test]
    fn thouless_derivative_closed_examples() {
        let d = thouless_derivative_closed(Complex64::new(1.0, 0.0), 2).unwrap();
        assert!((d.re - 0.0625).abs() < 1e-15);
        for z in [Complex64::new(0.3, 0.0), Complex64::new(1.7, 0.2)] {
            let d1 = thouless_derivative_closed(z, 1).unwrap();
            assert_eq!(d1, Complex64::new(0.0, 0.0));
            let dp = thouless_derivative_closed(z, 3).unwrap();
            let dm = thouless_derivative_closed(-z, 3).unwrap();
            assert!((dp + dm).norm() < 1e-14, "odd symmetry");
        }
        assert!(matches!(
            thouless_derivative_closed(Complex64::new(3.0, 0.0), 2),
            Err(SpectralError::DerivativePole)
        ));
    }

    #[test]
    fn thouless_derivative_matches_quadrature() {
        // kappa 2, 3 at eta = 1e-3; kappa 1 at the real axis
        for kappa in [2u32, 3] {
            for e in [0.5, 1.0, 1.5] {
                let num = thouless_derivative_numeric(kappa, e, 1e-3, 0.05);
                let closed = thouless_derivative_closed(Complex64::new(e, 0.0), kappa)
                    .unwrap()
                    .re;
                assert!(
                    (num - closed).abs() < 1e-3,
                    "kappa={kappa} E={e}: {num} vs {closed}"
                );
            }
        }
        for e in [0.5, 1.0, 1.5] {
            let num = thouless_derivative_numeric(1, e, 0.0, 0.05);
            assert!(num.abs() < 1e-6, "kappa=1 E={e}: {num}");
        }
    }

    #[test]
    fn grid_measure_must_be_normalized() {
        let dos = DosEstimate {
            kappa: 2,
            energies: vec![-1.0, 0.0, 1.0],
            density: vec![0.1, 0.1, 0.1],
            eta: 0.05,
            radius: 4,
            samples: 1,
            seed: 0,
            raw_mass: 0.2,
        };
        assert!(matches!(
            thouless_integral(SpectralMeasure::Grid(&dos), Complex64::new(0.0, 1.0)),
            Err(SpectralError::NotNormalized { .. })
        ));
    }

    #[test]
    fn grid_thouless_tracks_analytic() {
        let c = ctx(2);
        let spec = DisorderSpec::zero(0);
        let grid = default_grid(2, 0.0, 2048);
        let dos = dos_resolvent(&c, &spec, 10, 0.01, &grid, 1).unwrap();
        for e in [0.0, 1.0] {
            let z = Complex64::new(e, 0.05);
            let a = thouless_integral(SpectralMeasure::Grid(&dos), z).unwrap();
            let b = thouless_integral(SpectralMeasure::KestenMckay { kappa: 2 }, z).unwrap();
            assert!((a - b).abs() < 5e-3, "E={e}: grid {a} vs analytic {b}");
        }
    }
}
