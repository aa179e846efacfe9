use crate::error::{MtdrError, Result};

/// `min Σ w_r (z_r − y_r)²` over nondecreasing `z` with `lo ≤ z_r ≤ hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct IsotonicProblem {
    pub y: Vec<f64>,
    pub w: Vec<f64>,
    pub lo: f64,
    pub hi: f64,
    /// Minimum increment between consecutive values. Applied by shifting the
    /// targets, so the box is enforced after the shift is undone.
    pub min_step: f64,
}

impl IsotonicProblem {
    pub fn new(y: Vec<f64>, w: Vec<f64>, lo: f64, hi: f64) -> Self {
        IsotonicProblem {
            y,
            w,
            lo,
            hi,
            min_step: 0.0,
        }
    }

    pub fn objective(&self, z: &[f64]) -> f64 {
        self.y
            .iter()
            .zip(&self.w)
            .zip(z)
            .map(|((y, w), z)| w * (z - y) * (z - y))
            .sum()
    }

    fn validate(&self) -> Result<()> {
        if self.y.len() != self.w.len() {
            return Err(MtdrError::DimensionMismatch(format!(
                "{} targets, {} weights",
                self.y.len(),
                self.w.len()
            )));
        }
        if self.y.is_empty() {
            return Err(MtdrError::Empty("isotonic targets"));
        }
        if !(self.lo <= self.hi) {
            return Err(MtdrError::InvalidParameter(format!(
                "box [{}, {}] is empty",
                self.lo, self.hi
            )));
        }
        if self.w.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
            return Err(MtdrError::InvalidWeights(
                "isotonic weights must be finite and >= 0".into(),
            ));
        }
        if !self.w.iter().any(|&w| w > 0.0) {
            return Err(MtdrError::DegenerateWeights);
        }
        if let Some(r) = self
            .y
            .iter()
            .zip(&self.w)
            .position(|(y, &w)| w > 0.0 && !y.is_finite())
        {
            return Err(MtdrError::NonFinite(format!("isotonic target {r}")));
        }
        if !(self.min_step >= 0.0) {
            return Err(MtdrError::InvalidParameter("min_step must be >= 0".into()));
        }
        Ok(())
    }
}

struct Block {
    wy: f64,
    w: f64,
    // Kept separately so that a singleton reproduces its target exactly.
    mean: f64,
    // Index into the positive-weight subsequence where the block starts.
    start: usize,
}

impl Block {
    fn mean(&self) -> f64 {
        self.mean
    }
}

/// Pool-adjacent-violators on the positive-weight entries, zero-weight
/// entries copied from the nearest positive-weight neighbour, then clipped
/// to the box.
pub fn weighted_isotonic(prob: &IsotonicProblem) -> Result<Vec<f64>> {
    prob.validate()?;
    let n = prob.y.len();
    let step = prob.min_step;
    let shift = |r: usize| step * r as f64;

    let active: Vec<usize> = (0..n).filter(|&r| prob.w[r] > 0.0).collect();
    let mut blocks: Vec<Block> = Vec::with_capacity(active.len());
    for (k, &r) in active.iter().enumerate() {
        let w = prob.w[r];
        let target = prob.y[r] - shift(r);
        let mut b = Block {
            wy: w * target,
            w,
            mean: target,
            start: k,
        };
        while let Some(prev) = blocks.last() {
            if prev.mean() <= b.mean() {
                break;
            }
            let prev = blocks.pop().unwrap();
            let (wy, w) = (prev.wy + b.wy, prev.w + b.w);
            b = Block {
                wy,
                w,
                mean: wy / w,
                start: prev.start,
            };
        }
        blocks.push(b);
    }

    let mut fitted = vec![0.0; active.len()];
    for (bi, b) in blocks.iter().enumerate() {
        let end = blocks.get(bi + 1).map_or(active.len(), |nb| nb.start);
        let m = b.mean();
        fitted[b.start..end].iter_mut().for_each(|v| *v = m);
    }

    // Zero-weight positions take the value of the nearest active index
    // (ties to the left), which keeps the sequence nondecreasing.
    let mut z = vec![0.0; n];
    let mut next = 0usize;
    for (r, out) in z.iter_mut().enumerate() {
        while next < active.len() && active[next] < r {
            next += 1;
        }
        let k = if next < active.len() && active[next] == r {
            next
        } else if next == 0 {
            0
        } else if next == active.len() {
            active.len() - 1
        } else if r - active[next - 1] <= active[next] - r {
            next - 1
        } else {
            next
        };
        *out = (fitted[k] + shift(r)).clamp(prob.lo, prob.hi);
    }
    Ok(z)
}
