//! Independent reference solvers used by the integration tests.

#![allow(dead_code)]

use rand::Rng;

/// Exact minimizer of `Σ w_r (z_r − y_r)²` over nondecreasing `z` in
/// `[lo, hi]` for positive weights, by enumerating every split of the index
/// range into consecutive level sets. Each level set of the optimum sits at
/// its clipped weighted mean, so the optimum is among the candidates.
pub fn isotonic_by_enumeration(y: &[f64], w: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let n = y.len();
    assert!((1..=16).contains(&n));
    assert!(w.iter().all(|&v| v > 0.0));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << (n - 1)) {
        let mut z = vec![0.0; n];
        let mut start = 0;
        for end in 1..=n {
            let cut = end == n || mask & (1 << (end - 1)) != 0;
            if cut {
                let sw: f64 = w[start..end].iter().sum();
                let swy: f64 = (start..end).map(|i| w[i] * y[i]).sum();
                let v = (swy / sw).clamp(lo, hi);
                z[start..end].iter_mut().for_each(|x| *x = v);
                start = end;
            }
        }
        if z.windows(2).any(|p| p[1] < p[0]) {
            continue;
        }
        let obj: f64 = (0..n).map(|i| w[i] * (z[i] - y[i]).powi(2)).sum();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, z));
        }
    }
    best.expect("the all-pooled candidate is always feasible").1
}

/// `αᵀ G α − 2 cᵀ α` with row-major `G`.
pub fn quadratic(gram: &[f64], c: &[f64], alpha: &[f64]) -> f64 {
    let d = c.len();
    let mut q = 0.0;
    for i in 0..d {
        for j in 0..d {
            q += alpha[i] * gram[i * d + j] * alpha[j];
        }
        q -= 2.0 * c[i] * alpha[i];
    }
    q
}

/// Minimum of the quadratic over the simplex points whose coordinates are
/// multiples of `1/steps`.
pub fn simplex_grid_min(gram: &[f64], c: &[f64], steps: usize) -> f64 {
    let d = c.len();
    let mut best = f64::INFINITY;
    let mut counts = vec![0usize; d];
    fn rec(k: usize, left: usize, counts: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if k + 1 == counts.len() {
            counts[k] = left;
            f(counts);
            return;
        }
        for v in 0..=left {
            counts[k] = v;
            rec(k + 1, left - v, counts, f);
        }
    }
    let mut alpha = vec![0.0; d];
    rec(0, steps, &mut counts, &mut |ct| {
        for (a, &k) in alpha.iter_mut().zip(ct) {
            *a = k as f64 / steps as f64;
        }
        let v = quadratic(gram, c, &alpha);
        if v < best {
            best = v;
        }
    });
    best
}

/// Least-squares style Gram problem `G = BᵀB/k`, `c = Bᵀy/k`, with an
/// occasional duplicated column to make `G` singular.
pub fn random_gram<R: Rng>(rng: &mut R, dim: usize) -> (Vec<f64>, Vec<f64>) {
    let k = 12;
    let mut b: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..k).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    if dim > 1 && rng.random_bool(0.2) {
        b[dim - 1] = b[0].clone();
    }
    let y: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut g = vec![0.0; dim * dim];
    let mut c = vec![0.0; dim];
    for i in 0..dim {
        for j in 0..dim {
            g[i * dim + j] = (0..k).map(|r| b[i][r] * b[j][r]).sum::<f64>() / k as f64;
        }
        c[i] = (0..k).map(|r| b[i][r] * y[r]).sum::<f64>() / k as f64;
    }
    (g, c)
}
