//! Beta laws: exact quantiles for data generation and a Gamma-ratio sampler.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::error::{MtdrError, Result};

const QUANTILE_TOL: f64 = 1e-12;

/// `Beta(a, b)` on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaLaw {
    a: f64,
    b: f64,
    ln_norm: f64,
}

impl BetaLaw {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
            return Err(MtdrError::InvalidParameter(format!(
                "beta shape ({a}, {b})"
            )));
        }
        Ok(BetaLaw {
            a,
            b,
            ln_norm: ln_beta(a, b),
        })
    }

    pub fn shape(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            0.0
        } else if x >= 1.0 {
            1.0
        } else {
            beta_reg(self.a, self.b, x)
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        ((self.a - 1.0) * x.ln() + (self.b - 1.0) * (-x).ln_1p() - self.ln_norm).exp()
    }

    pub fn quantile(&self, u: f64) -> f64 {
        self.quantile_bracketed(u, 0.0, 1.0)
    }

    /// Quantiles at nondecreasing levels; each solve starts from the
    /// previous root.
    pub fn quantiles_sorted(&self, levels: &[f64]) -> Vec<f64> {
        let mut lo = 0.0;
        levels
            .iter()
            .map(|&u| {
                let x = self.quantile_bracketed(u, lo, 1.0);
                lo = x;
                x
            })
            .collect()
    }

    /// Safeguarded Newton iteration inside a shrinking bracket, falling back
    /// to bisection whenever a step leaves it.
    fn quantile_bracketed(&self, u: f64, mut lo: f64, mut hi: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        let mut x = 0.5 * (lo + hi);
        for _ in 0..200 {
            let f = self.cdf(x) - u;
            if f == 0.0 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= QUANTILE_TOL {
                break;
            }
            let d = self.pdf(x);
            let newton = if d > 0.0 { x - f / d } else { f64::NAN };
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - x).abs() <= 0.25 * QUANTILE_TOL {
                return next;
            }
            x = next;
        }
        0.5 * (lo + hi)
    }
}

/// `m` draws from `Beta(a, b)` as `G_a / (G_a + G_b)` with Gamma variates.
pub fn sample_beta<R: Rng + ?Sized>(a: f64, b: f64, m: usize, rng: &mut R) -> Result<Vec<f64>> {
    BetaLaw::new(a, b)?;
    if m == 0 {
        return Err(MtdrError::InvalidParameter(
            "sample size must be positive".into(),
        ));
    }
    let ga = Gamma::new(a, 1.0).map_err(|e| MtdrError::InvalidParameter(e.to_string()))?;
    let gb = Gamma::new(b, 1.0).map_err(|e| MtdrError::InvalidParameter(e.to_string()))?;
    let mut out = Vec::with_capacity(m);
    while out.len() < m {
        let x = ga.sample(rng);
        let y = gb.sample(rng);
        let v = x / (x + y);
        // Reject the rare underflow to an endpoint so draws stay interior.
        if v > 0.0 && v < 1.0 {
            out.push(v);
        }
    }
    Ok(out)
}
