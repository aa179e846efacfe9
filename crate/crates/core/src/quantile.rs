//! Probability measures on a compact interval, stored as quantile functions
//! sampled on a uniform midpoint probability grid.
//!
//! In one dimension the 2-Wasserstein geometry is flat in quantile
//! coordinates: distances are L² distances between quantile functions,
//! barycenters are pointwise averages, and the optimal map from `mu` to
//! `nu` is `Q_nu ∘ F_mu`.

use serde::{Deserialize, Serialize};

use crate::error::{MtdrError, Result};

/// Relative width of the band outside the domain that is clamped rather
/// than rejected.
pub const CLAMP_TOLERANCE: f64 = 1e-9;

/// The compact support interval `[s0, s1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub s0: f64,
    pub s1: f64,
}

impl Domain {
    pub fn new(s0: f64, s1: f64) -> Result<Self> {
        if !(s0.is_finite() && s1.is_finite() && s0 < s1) {
            return Err(MtdrError::InvalidDomain { s0, s1 });
        }
        Ok(Domain { s0, s1 })
    }

    pub fn unit() -> Self {
        Domain { s0: 0.0, s1: 1.0 }
    }

    pub fn width(&self) -> f64 {
        self.s1 - self.s0
    }

    /// Absolute clamp band `ε = 1e-9 · (s1 − s0)`.
    pub fn tolerance(&self) -> f64 {
        CLAMP_TOLERANCE * self.width()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.s0 && x <= self.s1
    }

    /// Clamp `x` into the domain if it lies within the tolerance band.
    pub fn clamp_checked(&self, x: f64) -> Result<f64> {
        let tol = self.tolerance();
        if !x.is_finite() || x < self.s0 - tol || x > self.s1 + tol {
            return Err(self.out_of_domain(x));
        }
        Ok(x.clamp(self.s0, self.s1))
    }

    pub(crate) fn out_of_domain(&self, value: f64) -> MtdrError {
        MtdrError::OutOfDomain {
            value,
            s0: self.s0,
            s1: self.s1,
        }
    }

    /// Map the domain affinely onto `[0, 1]`.
    pub fn to_unit(&self, x: f64) -> f64 {
        (x - self.s0) / self.width()
    }

    pub fn from_unit(&self, u: f64) -> f64 {
        self.s0 + u * self.width()
    }
}

/// Midpoint probability grid `p_r = (r + ½) / t`, `r = 0..t`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbGrid {
    t: usize,
}

impl ProbGrid {
    pub fn new(t: usize) -> Result<Self> {
        if t < 2 {
            return Err(MtdrError::InvalidGrid(format!("grid size {t} < 2")));
        }
        Ok(ProbGrid { t })
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Spacing `Δp = 1/t`.
    pub fn step(&self) -> f64 {
        1.0 / self.t as f64
    }

    #[inline]
    pub fn level(&self, r: usize) -> f64 {
        (r as f64 + 0.5) / self.t as f64
    }

    pub fn levels(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.t).map(|r| self.level(r))
    }
}

/// A distribution on `domain`, given by its quantile function at the levels
/// of `grid`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileGrid {
    domain: Domain,
    grid: ProbGrid,
    q: Vec<f64>,
}

impl QuantileGrid {
    /// Validate and wrap a quantile vector. Values within the clamp band
    /// outside the domain are clamped, and decreases no larger than the
    /// band (rounding at flat stretches) are leveled.
    pub fn new(domain: Domain, grid: ProbGrid, mut q: Vec<f64>) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(MtdrError::InvalidQuantiles(format!(
                "{} values for a grid of size {}",
                q.len(),
                grid.len()
            )));
        }
        for v in q.iter_mut() {
            *v = domain.clamp_checked(*v)?;
        }
        let tol = domain.tolerance();
        for r in 1..q.len() {
            if q[r] < q[r - 1] {
                if q[r - 1] - q[r] > tol {
                    return Err(MtdrError::InvalidQuantiles(format!(
                        "decreasing at level {}: {} > {}",
                        r - 1,
                        q[r - 1],
                        q[r]
                    )));
                }
                q[r] = q[r - 1];
            }
        }
        Ok(QuantileGrid { domain, grid, q })
    }

    /// Tabulate `f` at the grid levels.
    pub fn from_fn(domain: Domain, grid: ProbGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let q = grid.levels().map(f).collect();
        Self::new(domain, grid, q)
    }

    /// Uniform distribution on the whole domain.
    pub fn uniform(domain: Domain, grid: ProbGrid) -> Self {
        let q = grid.levels().map(|p| domain.from_unit(p)).collect();
        QuantileGrid { domain, grid, q }
    }

    /// Linear-interpolation empirical quantile of raw samples.
    pub fn from_samples(samples: &[f64], domain: Domain, grid: ProbGrid) -> Result<Self> {
        if samples.is_empty() {
            return Err(MtdrError::EmptySample);
        }
        let mut sorted = samples
            .iter()
            .map(|&x| domain.clamp_checked(x))
            .collect::<Result<Vec<_>>>()?;
        sorted.sort_by(f64::total_cmp);
        let q = grid
            .levels()
            .map(|p| empirical_quantile(&sorted, p))
            .collect();
        Ok(QuantileGrid { domain, grid, q })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn grid(&self) -> ProbGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.q
    }

    pub fn into_values(self) -> Vec<f64> {
        self.q
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    /// True when the values increase strictly.
    pub fn is_strictly_increasing(&self) -> bool {
        self.q.windows(2).all(|w| w[1] > w[0])
    }

    pub fn check_compatible(&self, other: &QuantileGrid) -> Result<()> {
        if self.grid != other.grid || self.domain != other.domain {
            return Err(MtdrError::GridMismatch(format!(
                "t={} on [{}, {}] vs t={} on [{}, {}]",
                self.grid.len(),
                self.domain.s0,
                self.domain.s1,
                other.grid.len(),
                other.domain.s0,
                other.domain.s1
            )));
        }
        Ok(())
    }

    /// Piecewise-linear quantile function through `(0, s0)`, `(p_r, q_r)`
    /// and `(1, s1)`. `u` is clamped to `[0, 1]`.
    pub fn quantile_at(&self, u: f64) -> f64 {
        let t = self.q.len();
        let tf = t as f64;
        let p_first = 0.5 / tf;
        let p_last = (tf - 0.5) / tf;
        if u <= p_first {
            let u = u.max(0.0);
            return self.domain.s0 + (self.q[0] - self.domain.s0) * (u / p_first);
        }
        if u >= p_last {
            let u = u.min(1.0);
            return self.q[t - 1] + (self.domain.s1 - self.q[t - 1]) * ((u - p_last) / p_first);
        }
        let pos = u * tf - 0.5;
        let r = (pos.floor() as usize).min(t - 2);
        let frac = pos - r as f64;
        self.q[r] + frac * (self.q[r + 1] - self.q[r])
    }

    /// Right-continuous inverse of [`quantile_at`](Self::quantile_at),
    /// with the convention `F(x) = 0` for `x ≤ s0` and `F(x) = 1` for
    /// `x ≥ s1`.
    pub fn cdf(&self, x: f64) -> f64 {
        let Domain { s0, s1 } = self.domain;
        if x <= s0 {
            return 0.0;
        }
        if x >= s1 {
            return 1.0;
        }
        let t = self.q.len();
        let tf = t as f64;
        // Augmented knot i: i = 0 is (0, s0), i = r + 1 is (p_r, q_r),
        // i = t + 1 is (1, s1). `i` below is the last knot with value <= x.
        let i = self.q.partition_point(|&v| v <= x);
        let (x_lo, p_lo) = if i == 0 {
            (s0, 0.0)
        } else {
            (self.q[i - 1], (i as f64 - 0.5) / tf)
        };
        let (x_hi, p_hi) = if i == t {
            (s1, 1.0)
        } else {
            (self.q[i], (i as f64 + 0.5) / tf)
        };
        let f = p_lo + (x - x_lo) / (x_hi - x_lo) * (p_hi - p_lo);
        f.clamp(0.0, 1.0)
    }

    /// Probability mass of `[a, b]`, i.e. `F(b) − F(a)`.
    pub fn interval_mass(&self, a: f64, b: f64) -> Result<f64> {
        if a > b {
            return Err(MtdrError::InvalidParameter(format!(
                "interval [{a}, {b}] has a > b"
            )));
        }
        let a = self.domain.clamp_checked(a)?;
        let b = self.domain.clamp_checked(b)?;
        Ok(self.cdf(b) - self.cdf(a))
    }

    /// Squared 2-Wasserstein distance (Riemann sum over the grid).
    pub fn wasserstein_sq(&self, other: &QuantileGrid) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(sq_distance(&self.q, &other.q) * self.grid.step())
    }

    pub fn wasserstein(&self, other: &QuantileGrid) -> Result<f64> {
        Ok(self.wasserstein_sq(other)?.sqrt())
    }
}

pub(crate) fn sq_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Linear interpolation of sorted order statistics at level `p`, using the
/// 1-based position `h = p·(m − 1) + 1`.
pub fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let m = sorted.len();
    if m == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (m - 1) as f64;
    let lo = (h.floor() as usize).min(m - 2);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
}

/// Empirical quantile grid from raw samples; see [`QuantileGrid::from_samples`].
pub fn quantile_from_samples(
    samples: &[f64],
    domain: Domain,
    grid: ProbGrid,
) -> Result<QuantileGrid> {
    QuantileGrid::from_samples(samples, domain, grid)
}

/// 2-Wasserstein distance between two measures on the same grid.
pub fn wasserstein_distance(mu: &QuantileGrid, nu: &QuantileGrid) -> Result<f64> {
    mu.wasserstein(nu)
}

/// Weighted Wasserstein barycenter: the pointwise weighted average of the
/// quantile vectors.
pub fn frechet_mean(measures: &[QuantileGrid], lambda: &[f64]) -> Result<QuantileGrid> {
    let first = measures.first().ok_or(MtdrError::Empty("measure list"))?;
    if lambda.len() != measures.len() {
        return Err(MtdrError::DimensionMismatch(format!(
            "{} weights for {} measures",
            lambda.len(),
            measures.len()
        )));
    }
    if lambda.iter().any(|&l| !(l >= 0.0)) {
        return Err(MtdrError::InvalidWeights("negative or NaN weight".into()));
    }
    let total: f64 = lambda.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(MtdrError::InvalidWeights(format!(
            "weights sum to {total}, not 1"
        )));
    }
    let mut q = vec![0.0; first.len()];
    for (mu, &l) in measures.iter().zip(lambda) {
        first.check_compatible(mu)?;
        for (acc, &v) in q.iter_mut().zip(&mu.q) {
            *acc += l * v;
        }
    }
    QuantileGrid::new(first.domain, first.grid, q)
}

/// Equal-weight barycenter.
pub fn frechet_mean_uniform(measures: &[QuantileGrid]) -> Result<QuantileGrid> {
    let n = measures.len();
    if n == 0 {
        return Err(MtdrError::Empty("measure list"));
    }
    let mut lambda = vec![1.0 / n as f64; n];
    // Absorb the rounding residual so the weights sum to one.
    let residual = 1.0 - lambda.iter().sum::<f64>();
    lambda[0] += residual;
    frechet_mean(measures, &lambda)
}

/// Optimal transport map `T_{mu→nu}(x) = Q_nu(F_mu(x))`, pinned at the
/// domain endpoints.
pub fn ot_map_eval(mu: &QuantileGrid, nu: &QuantileGrid, x: f64) -> Result<f64> {
    mu.check_compatible(nu)?;
    let d = mu.domain;
    if !d.contains(x) {
        return Err(d.out_of_domain(x));
    }
    Ok(ot_map_unchecked(mu, nu, x))
}

#[inline]
pub(crate) fn ot_map_unchecked(mu: &QuantileGrid, nu: &QuantileGrid, x: f64) -> f64 {
    let d = mu.domain;
    if x <= d.s0 {
        d.s0
    } else if x >= d.s1 {
        d.s1
    } else {
        nu.quantile_at(mu.cdf(x))
    }
}

/// Mass of `[a, b]` under `mu`.
pub fn interval_mass(mu: &QuantileGrid, a: f64, b: f64) -> Result<f64> {
    mu.interval_mass(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit(t: usize) -> (Domain, ProbGrid) {
        (Domain::unit(), ProbGrid::new(t).unwrap())
    }

    fn random_grid(rng: &mut ChaCha8Rng, t: usize) -> QuantileGrid {
        let (d, g) = unit(t);
        let mut q: Vec<f64> = (0..t).map(|_| rng.random::<f64>()).collect();
        q.sort_by(f64::total_cmp);
        QuantileGrid::new(d, g, q).unwrap()
    }

    #[test]
    fn empirical_quantile_two_points() {
        let s = [0.2, 0.8];
        let got: Vec<f64> = [0.25, 0.5, 0.75]
            .iter()
            .map(|&p| empirical_quantile(&s, p))
            .collect();
        for (g, e) in got.iter().zip([0.35, 0.5, 0.65]) {
            assert!((g - e).abs() < 1e-15, "{g} vs {e}");
        }
    }

    #[test]
    fn constant_sample_gives_constant_quantiles() {
        let (d, g) = unit(50);
        let q = quantile_from_samples(&[0.3; 17], d, g).unwrap();
        assert!(q.values().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn uniform_samples_recover_identity() {
        let (d, g) = unit(1000);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s: Vec<f64> = (0..100_000).map(|_| rng.random::<f64>()).collect();
        let q = quantile_from_samples(&s, d, g).unwrap();
        let err = g
            .levels()
            .zip(q.values())
            .map(|(p, v)| (p - v).abs())
            .fold(0.0, f64::max);
        assert!(err < 0.01, "max error {err}");
    }

    #[test]
    fn sample_errors() {
        let (d, g) = unit(10);
        assert!(matches!(
            quantile_from_samples(&[], d, g),
            Err(MtdrError::EmptySample)
        ));
        assert!(matches!(
            quantile_from_samples(&[0.5, 1.5], d, g),
            Err(MtdrError::OutOfDomain { .. })
        ));
        // Inside the clamp band is fine.
        let q = quantile_from_samples(&[-1e-12, 1.0 + 1e-12], d, g).unwrap();
        assert_eq!(q, quantile_from_samples(&[0.0, 1.0], d, g).unwrap());
    }

    #[test]
    fn wasserstein_examples() {
        let (d, g) = unit(1000);
        let u1 = QuantileGrid::uniform(d, g);
        assert_eq!(wasserstein_distance(&u1, &u1).unwrap(), 0.0);

        let d2 = Domain::new(0.0, 3.0).unwrap();
        let a = QuantileGrid::from_fn(d2, g, |p| p).unwrap();
        let b = QuantileGrid::from_fn(d2, g, |p| p + 0.7).unwrap();
        assert!((wasserstein_distance(&a, &b).unwrap() - 0.7).abs() < 1e-12);

        let u2 = QuantileGrid::from_fn(d2, g, |p| 2.0 * p).unwrap();
        let w = wasserstein_distance(&a, &u2).unwrap();
        assert!((w - 1.0 / 3f64.sqrt()).abs() < 1e-3, "{w}");

        let other = QuantileGrid::uniform(d, ProbGrid::new(10).unwrap());
        assert!(matches!(
            wasserstein_distance(&u1, &other),
            Err(MtdrError::GridMismatch(_))
        ));
    }

    #[test]
    fn frechet_mean_examples() {
        let (_, g) = unit(200);
        let d2 = Domain::new(0.0, 2.0).unwrap();
        let a = QuantileGrid::from_fn(d2, g, |p| p).unwrap();
        let b = QuantileGrid::from_fn(d2, g, |p| 2.0 * p).unwrap();
        assert_eq!(frechet_mean(std::slice::from_ref(&a), &[1.0]).unwrap(), a);
        let m = frechet_mean(&[a.clone(), b], &[0.5, 0.5]).unwrap();
        for (p, v) in g.levels().zip(m.values()) {
            assert!((v - 1.5 * p).abs() < 1e-15);
        }
        let ca = QuantileGrid::from_fn(d2, g, |_| 0.4).unwrap();
        let cb = QuantileGrid::from_fn(d2, g, |_| 1.4).unwrap();
        let m = frechet_mean(&[ca, cb], &[0.25, 0.75]).unwrap();
        assert!(m.values().iter().all(|&v| (v - 1.15).abs() < 1e-15));

        assert!(frechet_mean(std::slice::from_ref(&a), &[0.9]).is_err());
        assert!(frechet_mean(&[], &[]).is_err());
    }

    #[test]
    fn frechet_mean_minimizes_weighted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = 40;
        let ms: Vec<_> = (0..5).map(|_| random_grid(&mut rng, t)).collect();
        let mut lam: Vec<f64> = (0..5).map(|_| rng.random::<f64>()).collect();
        let s: f64 = lam.iter().sum();
        lam.iter_mut().for_each(|l| *l /= s);
        let s: f64 = lam.iter().sum();
        lam[0] += 1.0 - s;
        let mean = frechet_mean(&ms, &lam).unwrap();
        let obj = |b: &QuantileGrid| -> f64 {
            ms.iter()
                .zip(&lam)
                .map(|(m, l)| l * b.wasserstein_sq(m).unwrap())
                .sum()
        };
        let base = obj(&mean);
        for _ in 0..200 {
            let mut q: Vec<f64> = mean
                .values()
                .iter()
                .map(|v| v + 0.05 * (rng.random::<f64>() - 0.5))
                .collect();
            q.sort_by(f64::total_cmp);
            q.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
            let b = QuantileGrid::new(mean.domain(), mean.grid(), q).unwrap();
            assert!(obj(&b) >= base - 1e-12);
        }
    }

    #[test]
    fn ot_map_examples() {
        let (d, g) = unit(1000);
        let u = QuantileGrid::uniform(d, g);
        let sq = QuantileGrid::from_fn(d, g, |p| p * p).unwrap();
        for &x in &[0.0, 0.1, 0.37, 0.5, 0.91, 1.0] {
            assert!((ot_map_eval(&sq, &sq, x).unwrap() - x).abs() < 1e-3);
            assert!((ot_map_eval(&u, &sq, x).unwrap() - x * x).abs() < 1e-3);
        }
        assert_eq!(ot_map_eval(&sq, &u, 0.0).unwrap(), 0.0);
        assert_eq!(ot_map_eval(&sq, &u, 1.0).unwrap(), 1.0);
        assert!(ot_map_eval(&u, &sq, 1.2).is_err());
    }

    #[test]
    fn ot_map_pushes_mu_to_nu() {
        let (d, g) = unit(500);
        let mu = QuantileGrid::from_fn(d, g, |p| p.powf(1.5)).unwrap();
        let nu = QuantileGrid::from_fn(d, g, |p| 1.0 - (1.0 - p).powi(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut ys: Vec<f64> = (0..100_000)
            .map(|_| {
                let x = mu.quantile_at(rng.random::<f64>());
                ot_map_eval(&mu, &nu, x).unwrap()
            })
            .collect();
        ys.sort_by(f64::total_cmp);
        // Kolmogorov distance between empirical law of T(x) and nu.
        let m = ys.len() as f64;
        let ks = ys
            .iter()
            .enumerate()
            .map(|(i, &y)| {
                let f = nu.cdf(y);
                (f - i as f64 / m).abs().max((f - (i + 1) as f64 / m).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "ks = {ks}");
    }

    #[test]
    fn interval_mass_examples() {
        let (d, g) = unit(1000);
        let u = QuantileGrid::uniform(d, g);
        assert_eq!(interval_mass(&u, 0.0, 1.0).unwrap(), 1.0);
        assert!((interval_mass(&u, 0.2, 0.5).unwrap() - 0.3).abs() < 1e-3);
        assert_eq!(interval_mass(&u, 0.4, 0.4).unwrap(), 0.0);
        assert!(interval_mass(&u, 0.5, 0.4).is_err());
    }

    #[test]
    fn cdf_handles_atoms_and_flats() {
        let (d, g) = unit(4);
        // Levels 0.125, 0.375, 0.625, 0.875.
        let q = QuantileGrid::new(d, g, vec![0.0, 0.5, 0.5, 1.0]).unwrap();
        assert_eq!(q.cdf(0.0), 0.0);
        assert!((q.cdf(0.5) - 0.625).abs() < 1e-15);
        assert!(q.cdf(0.4999) < 0.375);
        assert_eq!(q.cdf(1.0), 1.0);
        assert!((q.interval_mass(0.0, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn metric_axioms(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t = 1 + rng.random_range(2..60);
            let a = random_grid(&mut rng, t);
            let b = random_grid(&mut rng, t);
            let c = random_grid(&mut rng, t);
            let ab = a.wasserstein(&b).unwrap();
            prop_assert_eq!(ab, b.wasserstein(&a).unwrap());
            prop_assert!(ab <= a.wasserstein(&c).unwrap() + c.wasserstein(&b).unwrap() + 1e-12);
            prop_assert_eq!(a.wasserstein(&a).unwrap(), 0.0);
        }

        #[test]
        fn interval_mass_partition(seed in 0u64..10_000, cuts in 1usize..20) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = random_grid(&mut rng, 30);
            let mut pts: Vec<f64> = (0..cuts).map(|_| rng.random::<f64>()).collect();
            pts.push(0.0);
            pts.push(1.0);
            pts.sort_by(f64::total_cmp);
            let total: f64 = pts.windows(2).map(|w| mu.interval_mass(w[0], w[1]).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn ot_map_is_monotone(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mu = random_grid(&mut rng, 25);
            let nu = random_grid(&mut rng, 25);
            let mut xs: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
            xs.sort_by(f64::total_cmp);
            let ys: Vec<f64> = xs.iter().map(|&x| ot_map_eval(&mu, &nu, x).unwrap()).collect();
            prop_assert!(ys.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        }
    }
}
