use serde::{Deserialize, Serialize};

use crate::error::{MtdrError, Result};

/// A point of the probability simplex `Δ^p` (length `p + 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimplexWeights(Vec<f64>);

impl SimplexWeights {
    pub fn new(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() {
            return Err(MtdrError::Empty("simplex weights"));
        }
        if alpha.iter().any(|&a| !(a >= 0.0) || !a.is_finite()) {
            return Err(MtdrError::InvalidWeights(format!(
                "{alpha:?} has a negative entry"
            )));
        }
        let s: f64 = alpha.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(MtdrError::InvalidWeights(format!("{alpha:?} sums to {s}")));
        }
        Ok(SimplexWeights(alpha))
    }

    /// Equal weights over `len` components.
    pub fn uniform(len: usize) -> Self {
        SimplexWeights(vec![1.0 / len as f64; len])
    }

    /// The vertex `e_index`.
    pub fn vertex(len: usize, index: usize) -> Self {
        let mut a = vec![0.0; len];
        a[index] = 1.0;
        SimplexWeights(a)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Euclidean distance to another weight vector.
    pub fn l2_distance(&self, other: &SimplexWeights) -> f64 {
        crate::quantile::sq_distance(&self.0, &other.0).sqrt()
    }

    pub(crate) fn from_projected(v: Vec<f64>) -> Self {
        SimplexWeights(v)
    }
}

impl std::ops::Index<usize> for SimplexWeights {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Euclidean projection onto the probability simplex by sorting and
/// thresholding.
pub fn simplex_project(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let candidate = (cumsum - 1.0) / (i as f64 + 1.0);
        if ui - candidate > 0.0 {
            tau = candidate;
        }
    }
    v.iter().map(|&x| (x - tau).max(0.0)).collect()
}

/// `min_α αᵀGα − 2cᵀα` over `Δ^p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexLsProblem {
    dim: usize,
    gram: Vec<f64>,
    c: Vec<f64>,
}

impl SimplexLsProblem {
    /// `gram` is row-major `dim × dim`.
    pub fn new(gram: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let dim = c.len();
        if dim == 0 || gram.len() != dim * dim {
            return Err(MtdrError::DimensionMismatch(format!(
                "gram of {} entries for {} coefficients",
                gram.len(),
                dim
            )));
        }
        if gram.iter().chain(&c).any(|v| !v.is_finite()) {
            return Err(MtdrError::NonFinite("gram matrix or linear term".into()));
        }
        let mut gram = gram;
        // Symmetrize to remove assembly rounding.
        for i in 0..dim {
            for j in (i + 1)..dim {
                let m = 0.5 * (gram[i * dim + j] + gram[j * dim + i]);
                gram[i * dim + j] = m;
                gram[j * dim + i] = m;
            }
        }
        Ok(SimplexLsProblem { dim, gram, c })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn objective(&self, alpha: &[f64]) -> f64 {
        let d = self.dim;
        let mut quad = 0.0;
        for i in 0..d {
            let row: f64 = (0..d).map(|j| self.gram[i * d + j] * alpha[j]).sum();
            quad += alpha[i] * row;
        }
        quad - 2.0 * self.c.iter().zip(alpha).map(|(c, a)| c * a).sum::<f64>()
    }

    fn gradient(&self, alpha: &[f64], out: &mut [f64]) {
        let d = self.dim;
        for (i, o) in out.iter_mut().enumerate().take(d) {
            let row: f64 = (0..d).map(|j| self.gram[i * d + j] * alpha[j]).sum();
            *o = 2.0 * (row - self.c[i]);
        }
    }

    /// Largest eigenvalue of the Gram matrix by power iteration.
    fn max_eigenvalue(&self) -> f64 {
        let d = self.dim;
        let mut v = vec![1.0 / (d as f64).sqrt(); d];
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w: Vec<f64> = (0..d)
                .map(|i| (0..d).map(|j| self.gram[i * d + j] * v[j]).sum())
                .collect();
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm == 0.0 {
                return 0.0;
            }
            let next = norm;
            v = w.into_iter().map(|x| x / norm).collect();
            if (next - lambda).abs() <= 1e-12 * next {
                lambda = next;
                break;
            }
            lambda = next;
        }
        // Power iteration underestimates; Gershgorin caps the overshoot.
        let gersh = (0..d)
            .map(|i| (0..d).map(|j| self.gram[i * d + j].abs()).sum::<f64>())
            .fold(0.0, f64::max);
        (lambda * 1.01).min(gersh).max(lambda)
    }
}

const PG_TOL: f64 = 1e-10;
const MAX_ITER: usize = 100_000;

/// Accelerated projected gradient with adaptive restart, step `1/L` where
/// `L = 2 λ_max(G)` is the gradient's Lipschitz constant.
pub fn simplex_least_squares(prob: &SimplexLsProblem) -> Result<SimplexWeights> {
    simplex_least_squares_from(prob, None)
}

/// Same as [`simplex_least_squares`], warm-started at `start`.
pub fn simplex_least_squares_from(
    prob: &SimplexLsProblem,
    start: Option<&SimplexWeights>,
) -> Result<SimplexWeights> {
    let d = prob.dim;
    if d == 1 {
        return Ok(SimplexWeights(vec![1.0]));
    }
    let lips = 2.0 * prob.max_eigenvalue();
    if !lips.is_finite() {
        return Err(MtdrError::NonFinite("gram eigenvalue".into()));
    }
    if lips <= f64::MIN_POSITIVE {
        // Linear objective: best vertex.
        let best = (0..d)
            .max_by(|&a, &b| prob.c[a].total_cmp(&prob.c[b]))
            .unwrap();
        return Ok(SimplexWeights::vertex(d, best));
    }
    let step = 1.0 / lips;

    let mut x = match start {
        Some(s) if s.len() == d => s.0.clone(),
        _ => vec![1.0 / d as f64; d],
    };
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let mut grad = vec![0.0; d];
    let mut f_x = prob.objective(&x);

    for _ in 0..MAX_ITER {
        prob.gradient(&y, &mut grad);
        let trial: Vec<f64> = y.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
        let x_next = simplex_project(&trial);
        let f_next = prob.objective(&x_next);

        if f_next > f_x {
            if momentum == 1.0 {
                // A plain projected step failed to descend: rounding floor.
                break;
            }
            // Restart momentum from the last iterate.
            momentum = 1.0;
            y.clone_from(&x);
            continue;
        }

        let m_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / m_next;
        for i in 0..d {
            y[i] = x_next[i] + beta * (x_next[i] - x[i]);
        }
        momentum = m_next;
        x = x_next;
        f_x = f_next;

        // Gradient mapping at the current iterate.
        prob.gradient(&x, &mut grad);
        let probe: Vec<f64> = x.iter().zip(&grad).map(|(v, g)| v - step * g).collect();
        let px = simplex_project(&probe);
        let gm = x
            .iter()
            .zip(&px)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
            * lips;
        if gm < PG_TOL {
            break;
        }
    }
    Ok(SimplexWeights(x))
}
