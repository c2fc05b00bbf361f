//! Small shared numerical helpers: deterministic sphere sampling,
//! orthonormalization, and 1-D golden-section minimization.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// Deterministic RNG derived from a base seed and a stream index, so that
/// parallel workers draw identical streams regardless of scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Deterministic low-discrepancy sample of the unit sphere in `dim`
/// dimensions. Dimension 1 returns `±1`, dimension 2 a uniform angle grid,
/// dimension 3 a Fibonacci sphere; higher dimensions fall back to a fixed
/// seeded Gaussian stream (seed folded from `salt` only, never wall time).
pub fn unit_sphere_samples(dim: usize, n: usize, salt: u64) -> Vec<DVector<f64>> {
    assert!(dim >= 1);
    match dim {
        1 => vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![-1.0])],
        2 => (0..n)
            .map(|i| {
                let theta = 2.0 * std::f64::consts::PI * (i as f64) / (n as f64);
                DVector::from_vec(vec![theta.cos(), theta.sin()])
            })
            .collect(),
        3 => {
            // Fibonacci lattice on S^2.
            (0..n)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / (n as f64);
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = 2.0 * std::f64::consts::PI * (i as f64) / GOLDEN_RATIO;
                    DVector::from_vec(vec![r * phi.cos(), r * phi.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = stream_rng(0xF1B0_u64, salt);
            (0..n).map(|_| random_unit_vector(dim, &mut rng)).collect()
        }
    }
}

/// Standard Gaussian sample via Box-Muller (avoids a rand_distr dependency).
pub fn gaussian(rng: &mut impl Rng) -> f64 {
    loop {
        let u1: f64 = rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        if u1 > f64::MIN_POSITIVE {
            return (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
        }
    }
}

pub fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| gaussian(rng));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// Gram-Schmidt step: component of `v` orthogonal to the given columns,
/// normalized. Returns `None` when the residual is numerically zero.
pub fn orthonormal_complement_step(
    v: &DVector<f64>,
    basis: &[DVector<f64>],
) -> Option<DVector<f64>> {
    let mut w = v.clone();
    for _ in 0..2 {
        for b in basis {
            let c = w.dot(b);
            w -= b * c;
        }
    }
    let n = w.norm();
    if n < 1e-10 {
        None
    } else {
        Some(w / n)
    }
}

/// Orthonormal basis of the orthogonal complement of `basis` in R^dim.
pub fn orthogonal_complement(basis: &[DVector<f64>], dim: usize) -> Vec<DVector<f64>> {
    let mut out: Vec<DVector<f64>> = Vec::new();
    let mut all: Vec<DVector<f64>> = basis.to_vec();
    for i in 0..dim {
        let e = DVector::from_fn(dim, |j, _| if j == i { 1.0 } else { 0.0 });
        if let Some(w) = orthonormal_complement_step(&e, &all) {
            all.push(w.clone());
            out.push(w);
        }
        if all.len() == dim {
            break;
        }
    }
    out
}

/// Golden-section minimization of `f` on `[a, b]`; returns `(x, f(x))`.
pub fn golden_section_min(
    mut a: f64,
    mut b: f64,
    iters: usize,
    f: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let inv_phi = 1.0 / GOLDEN_RATIO;
    let mut c = b - (b - a) * inv_phi;
    let mut d = a + (b - a) * inv_phi;
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - (b - a) * inv_phi;
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + (b - a) * inv_phi;
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Least-squares line fit `y ≈ slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (slope, my - slope * mx)
}

/// Pearson correlation of two samples; 0 when either is constant.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Stable order-independent hash of a float matrix, for tie-breaking and
/// report identifiers.
pub fn hash_floats(values: impl IntoIterator<Item = f64>) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in values {
        let bits = v.to_bits();
        h ^= bits;
        h = h.wrapping_mul(0x1000_0000_01b3);
    }
    h
}

/// Dense matrix of pairwise applications of `f` (symmetric, zero diagonal).
pub fn symmetric_matrix(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let v = f(i, j);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}
