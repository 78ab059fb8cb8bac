//! Shared numerical utilities: counter-based hashing for disorder sampling,
//! Gauss–Legendre quadrature, and order-fixed reductions.

use num_complex::Complex64;

/// Avalanche finalizer (splitmix64). Bijective on u64.
#[inline]
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Counter-based hash of (seed, stream, label bytes). Stateless and
/// platform-stable; the basis of volume/order/thread-independent disorder.
pub fn hash64(seed: u64, stream: u64, bytes: &[u8]) -> u64 {
    // FNV-1a absorption, splitmix finalization
    let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ splitmix64(seed) ^ splitmix64(stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(h)
}

/// Map a hash to the unit interval [0, 1) with 53-bit resolution.
#[inline]
pub fn unit_from_hash(h: u64) -> f64 {
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Fixed pairwise summation tree keyed by index: the reduction order is a
/// function of the slice length only, so parallel producers that fill slots
/// by index reduce to bit-identical results at any worker count.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        2 => values[0] + values[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
        }
    }
}

/// Pairwise reduction of equal-length rows (columnwise), same ordering
/// guarantee as [`pairwise_sum`].
pub fn pairwise_sum_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    match rows.len() {
        0 => Vec::new(),
        1 => rows[0].clone(),
        n => {
            let mid = n / 2;
            let a = pairwise_sum_rows(&rows[..mid]);
            let b = pairwise_sum_rows(&rows[mid..]);
            a.iter().zip(b.iter()).map(|(x, y)| x + y).collect()
        }
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(values) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&sq) / (n as f64 - 1.0);
    (mean, (var / n as f64).sqrt())
}

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1],
/// computed by Newton iteration on the Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // evaluate P_n and P_n' at x
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let pk = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = pk;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Adaptive Gauss–Legendre integration of `f` over [a, b]: recursive
/// bisection until the 15/31-point estimates agree within `tol` per panel.
pub fn adaptive_gl<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    let (x15, w15) = gauss_legendre(15);
    let (x31, w31) = gauss_legendre(31);
    fn panel<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        tol: f64,
        depth: usize,
        coarse: &(Vec<f64>, Vec<f64>),
        fine: &(Vec<f64>, Vec<f64>),
    ) -> f64 {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let eval = |rule: &(Vec<f64>, Vec<f64>)| -> f64 {
            rule.0
                .iter()
                .zip(rule.1.iter())
                .map(|(&x, &w)| w * f(mid + half * x))
                .sum::<f64>()
                * half
        };
        let c = eval(coarse);
        let d = eval(fine);
        if (c - d).abs() <= tol || depth >= 40 {
            d
        } else {
            panel(f, a, mid, tol * 0.5, depth + 1, coarse, fine)
                + panel(f, mid, b, tol * 0.5, depth + 1, coarse, fine)
        }
    }
    panel(f, a, b, tol, 0, &(x15, w15), &(x31, w31))
}

/// Gauss–Legendre sum of a complex integrand over [a, b] with `n` nodes.
pub fn gl_complex<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, n: usize) -> Complex64 {
    let (x, w) = gauss_legendre(n);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    x.iter()
        .zip(w.iter())
        .map(|(&xi, &wi)| f(mid + half * xi) * wi)
        .sum::<Complex64>()
        * half
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_stream_separated() {
        let a = hash64(7, 0, b"0,1");
        assert_eq!(a, hash64(7, 0, b"0,1"));
        assert_ne!(a, hash64(8, 0, b"0,1"));
        assert_ne!(a, hash64(7, 1, b"0,1"));
        assert_ne!(a, hash64(7, 0, b"0,2"));
        let u = unit_from_hash(a);
        assert!((0.0..1.0).contains(&u));
    }

    #[test]
    fn pairwise_matches_naive() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let naive: f64 = xs.iter().sum();
        assert!((pairwise_sum(&xs) - naive).abs() < 1e-9);
    }

    #[test]
    fn gl_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree-15 polynomial must be exact for 8 nodes
        let val: f64 = x
            .iter()
            .zip(w.iter())
            .map(|(&xi, &wi)| wi * xi.powi(14))
            .sum();
        assert!((val - 2.0 / 15.0).abs() < 1e-13, "got {val}");
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        // integral of ln|x| over [-1, 1] = -2
        let f = |x: f64| x.abs().max(1e-300).ln();
        let v = adaptive_gl(&f, -1.0, 1.0, 1e-10);
        assert!((v + 2.0).abs() < 1e-8, "got {v}");
    }

    #[test]
    fn mean_stderr_basics() {
        let (m, s) = mean_stderr(&[2.0, 4.0, 6.0, 8.0]);
        assert!((m - 5.0).abs() < 1e-15);
        assert!((s - (20.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-12);
    }
}
