//! Admissible transport maps: nondecreasing piecewise-linear functions on
//! a uniform node grid, pinned to the identity at the domain endpoints.

use serde::{Deserialize, Serialize};

use crate::error::{MtdrError, Result};
use crate::quantile::{Domain, QuantileGrid};

/// Uniform partition of the domain into `t` cells `I_r` of width `h`, with
/// node `x_r` at the midpoint of `I_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeGrid {
    domain: Domain,
    t: usize,
}

impl NodeGrid {
    pub fn new(domain: Domain, t: usize) -> Result<Self> {
        if t < 2 {
            return Err(MtdrError::InvalidGrid(format!("node count {t} < 2")));
        }
        Ok(NodeGrid { domain, t })
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Cell width `h = (s1 − s0)/t`.
    pub fn width(&self) -> f64 {
        self.domain.width() / self.t as f64
    }

    #[inline]
    pub fn node(&self, r: usize) -> f64 {
        self.domain.s0 + (r as f64 + 0.5) * self.width()
    }

    /// Left edge of cell `r`; `edge(t)` is `s1`.
    #[inline]
    pub fn edge(&self, r: usize) -> f64 {
        if r == self.t {
            self.domain.s1
        } else {
            self.domain.s0 + r as f64 * self.width()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.t).map(|r| self.node(r)).collect()
    }
}

/// A map `T: S → S` stored by its values `z_r = T(x_r)` at the nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotoneMap {
    grid: NodeGrid,
    z: Vec<f64>,
}

impl MonotoneMap {
    /// Values within the clamp band are clamped and decreases within it
    /// leveled; anything else that is out of the domain or decreasing is
    /// rejected.
    pub fn new(grid: NodeGrid, mut z: Vec<f64>) -> Result<Self> {
        if z.len() != grid.len() {
            return Err(MtdrError::DimensionMismatch(format!(
                "{} map values for {} nodes",
                z.len(),
                grid.len()
            )));
        }
        let d = grid.domain;
        for v in z.iter_mut() {
            *v = d.clamp_checked(*v)?;
        }
        let tol = d.tolerance();
        for r in 1..z.len() {
            if z[r] < z[r - 1] {
                if z[r - 1] - z[r] > tol {
                    return Err(MtdrError::InvalidParameter(format!(
                        "map decreases at node {}: {} > {}",
                        r - 1,
                        z[r - 1],
                        z[r]
                    )));
                }
                z[r] = z[r - 1];
            }
        }
        Ok(MonotoneMap { grid, z })
    }

    pub fn identity(grid: NodeGrid) -> Self {
        MonotoneMap {
            grid,
            z: grid.nodes(),
        }
    }

    /// Sample `f` at the nodes.
    pub fn from_fn(grid: NodeGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let z = (0..grid.len()).map(|r| f(grid.node(r))).collect();
        Self::new(grid, z)
    }

    pub fn grid(&self) -> NodeGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.z
    }

    pub fn eval(&self, x: f64) -> Result<f64> {
        let d = self.grid.domain;
        if !d.contains(x) {
            return Err(d.out_of_domain(x));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Piecewise-linear interpolation through `(s0, s0)`, `(x_r, z_r)` and
    /// `(s1, s1)`. Arguments outside the domain are clamped.
    #[inline]
    pub fn eval_unchecked(&self, x: f64) -> f64 {
        self.evaluator().eval(x)
    }

    /// Evaluate at every element of `xs`.
    pub fn eval_many(&self, xs: &[f64]) -> Vec<f64> {
        let e = self.evaluator();
        xs.iter().map(|&x| e.eval(x)).collect()
    }

    #[inline]
    fn evaluator(&self) -> Evaluator<'_> {
        let Domain { s0, s1 } = self.grid.domain;
        let t = self.z.len();
        let h = self.grid.width();
        Evaluator {
            z: &self.z,
            s0,
            s1,
            inv_h: 1.0 / h,
            inv_half: 2.0 / h,
            last_node: self.grid.node(t - 1),
            last: (t - 1) as f64,
        }
    }

    /// `T(inner(x))`. The inner value may overshoot the domain by the clamp
    /// band.
    pub fn compose_through(&self, inner: impl Fn(f64) -> f64, x: f64) -> Result<f64> {
        let y = self.grid.domain.clamp_checked(inner(x))?;
        Ok(self.eval_unchecked(y))
    }

    /// Normalized L² distance on the domain, `sqrt(Σ (z1 − z2)² h / |S|)`.
    pub fn l2_distance(&self, other: &MonotoneMap) -> Result<f64> {
        if self.grid != other.grid {
            return Err(MtdrError::GridMismatch(
                "maps live on different node grids".into(),
            ));
        }
        let w = self.grid.width() / self.grid.domain.width();
        Ok((crate::quantile::sq_distance(&self.z, &other.z) * w).sqrt())
    }

    /// Quantile grid of `T # mu`, namely `T ∘ Q_mu`.
    pub fn pushforward(&self, mu: &QuantileGrid) -> Result<QuantileGrid> {
        if mu.domain() != self.grid.domain {
            return Err(MtdrError::GridMismatch(
                "measure and map live on different domains".into(),
            ));
        }
        let q = mu
            .values()
            .iter()
            .map(|&v| self.eval_unchecked(v))
            .collect();
        QuantileGrid::new(mu.domain(), mu.grid(), q)
    }

    /// Convex combination `(1 − λ)·self + λ·other`, still admissible.
    pub(crate) fn blend(&mut self, other: &[f64], lambda: f64) {
        for (a, &b) in self.z.iter_mut().zip(other) {
            *a += lambda * (b - *a);
        }
        // Guard against rounding pushing neighbours out of order.
        for r in 1..self.z.len() {
            if self.z[r] < self.z[r - 1] {
                self.z[r] = self.z[r - 1];
            }
        }
    }
}

/// Constants of one map hoisted out of repeated evaluation.
struct Evaluator<'a> {
    z: &'a [f64],
    s0: f64,
    s1: f64,
    inv_h: f64,
    inv_half: f64,
    last_node: f64,
    last: f64,
}

impl Evaluator<'_> {
    #[inline(always)]
    fn eval(&self, x: f64) -> f64 {
        let z = self.z;
        let pos = (x - self.s0) * self.inv_h - 0.5;
        if pos <= 0.0 {
            if x <= self.s0 {
                return self.s0;
            }
            let frac = ((x - self.s0) * self.inv_half).min(1.0);
            return (self.s0 + frac * (z[0] - self.s0)).min(z[0]);
        }
        if pos >= self.last {
            if x >= self.s1 {
                return self.s1;
            }
            let t = z.len();
            let frac = ((x - self.last_node) * self.inv_half).clamp(0.0, 1.0);
            return (z[t - 1] + frac * (self.s1 - z[t - 1])).min(self.s1);
        }
        let r = (pos as usize).min(z.len() - 2);
        let frac = pos - r as f64;
        (z[r] + frac * (z[r + 1] - z[r])).min(z[r + 1])
    }
}

pub fn map_eval(map: &MonotoneMap, x: f64) -> Result<f64> {
    map.eval(x)
}

pub fn compose_through(map: &MonotoneMap, inner: impl Fn(f64) -> f64, x: f64) -> Result<f64> {
    map.compose_through(inner, x)
}

pub fn map_l2_distance(a: &MonotoneMap, b: &MonotoneMap) -> Result<f64> {
    a.l2_distance(b)
}

pub fn pushforward(map: &MonotoneMap, mu: &QuantileGrid) -> Result<QuantileGrid> {
    map.pushforward(mu)
}
