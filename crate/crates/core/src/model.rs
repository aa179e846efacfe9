//! The regression model `Γ_θ` with `θ = α ⊙ T`, its loss, empirical risk
//! and the predictive semi-norm.
//!
//! A prediction is the weighted Wasserstein barycenter of the transported
//! predictors `T_j # ξ_j` (with `ξ_0` the fixed reference), which in
//! quantile coordinates is `Σ_j α_j T_j ∘ Q_{ξ_j}`.

use crate::error::{MtdrError, Result};
use crate::monotone::{MonotoneMap, NodeGrid};
use crate::par::{self, Execution};
use crate::quantile::{Domain, ProbGrid, QuantileGrid};
pub use crate::solvers::SimplexWeights;

/// One observation: `p` predictor distributions and, for training, the
/// response distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject {
    pub id: String,
    pub predictors: Vec<QuantileGrid>,
    pub response: Option<QuantileGrid>,
}

impl Subject {
    pub fn new(
        id: impl Into<String>,
        predictors: Vec<QuantileGrid>,
        response: Option<QuantileGrid>,
    ) -> Self {
        Subject {
            id: id.into(),
            predictors,
            response,
        }
    }

    pub fn response(&self) -> Result<&QuantileGrid> {
        self.response.as_ref().ok_or_else(|| {
            MtdrError::InvalidParameter(format!("subject {} has no response", self.id))
        })
    }
}

/// A validated collection of subjects sharing `p`, domain and grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    subjects: Vec<Subject>,
    p: usize,
    domain: Domain,
    grid: ProbGrid,
}

impl DataSet {
    pub fn new(subjects: Vec<Subject>) -> Result<Self> {
        let first = subjects.first().ok_or(MtdrError::Empty("data set"))?;
        let p = first.predictors.len();
        let probe = first
            .predictors
            .first()
            .or(first.response.as_ref())
            .ok_or_else(|| {
                MtdrError::InvalidParameter("subject without any distribution".into())
            })?;
        let (domain, grid) = (probe.domain(), probe.grid());
        for s in &subjects {
            if s.predictors.len() != p {
                return Err(MtdrError::DimensionMismatch(format!(
                    "subject {} has {} predictors, expected {p}",
                    s.id,
                    s.predictors.len()
                )));
            }
            for q in s.predictors.iter().chain(s.response.as_ref()) {
                probe.check_compatible(q)?;
            }
        }
        Ok(DataSet {
            subjects,
            p,
            domain,
            grid,
        })
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    /// Number of distributional predictors.
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn grid(&self) -> ProbGrid {
        self.grid
    }

    pub fn has_responses(&self) -> bool {
        self.subjects.iter().all(|s| s.response.is_some())
    }

    pub fn responses(&self) -> Result<Vec<&QuantileGrid>> {
        self.subjects.iter().map(|s| s.response()).collect()
    }

    /// Copy without subject `index`.
    pub fn without(&self, index: usize) -> Result<DataSet> {
        let rest: Vec<Subject> = self
            .subjects
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != index)
            .map(|(_, s)| s.clone())
            .collect();
        DataSet::new(rest)
    }

    /// Reorder the predictor columns: new column `c` is old column `perm[c]`.
    pub fn permute_predictors(&self, perm: &[usize]) -> Result<DataSet> {
        if perm.len() != self.p {
            return Err(MtdrError::DimensionMismatch("permutation length".into()));
        }
        let subjects = self
            .subjects
            .iter()
            .map(|s| Subject {
                id: s.id.clone(),
                predictors: perm.iter().map(|&j| s.predictors[j].clone()).collect(),
                response: s.response.clone(),
            })
            .collect();
        DataSet::new(subjects)
    }
}

/// Fitted (or true) parameter `θ = α ⊙ T` together with its reference `ξ_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct MtdrModel {
    reference: QuantileGrid,
    maps: Vec<MonotoneMap>,
    weights: SimplexWeights,
}

impl MtdrModel {
    /// `maps[0]` acts on the reference, `maps[j]` on predictor `j`.
    pub fn new(
        reference: QuantileGrid,
        maps: Vec<MonotoneMap>,
        weights: SimplexWeights,
    ) -> Result<Self> {
        if maps.is_empty() || maps.len() != weights.len() {
            return Err(MtdrError::DimensionMismatch(format!(
                "{} maps for {} weights",
                maps.len(),
                weights.len()
            )));
        }
        let grid = maps[0].grid();
        if grid.domain() != reference.domain() {
            return Err(MtdrError::GridMismatch(
                "reference and maps on different domains".into(),
            ));
        }
        if maps.iter().any(|m| m.grid() != grid) {
            return Err(MtdrError::GridMismatch(
                "maps on different node grids".into(),
            ));
        }
        Ok(MtdrModel {
            reference,
            maps,
            weights,
        })
    }

    /// All maps the identity.
    pub fn identity(
        reference: QuantileGrid,
        nodes: NodeGrid,
        weights: SimplexWeights,
    ) -> Result<Self> {
        let maps = vec![MonotoneMap::identity(nodes); weights.len()];
        Self::new(reference, maps, weights)
    }

    pub fn p(&self) -> usize {
        self.maps.len() - 1
    }

    pub fn domain(&self) -> Domain {
        self.reference.domain()
    }

    pub fn prob_grid(&self) -> ProbGrid {
        self.reference.grid()
    }

    pub fn node_grid(&self) -> NodeGrid {
        self.maps[0].grid()
    }

    pub fn reference(&self) -> &QuantileGrid {
        &self.reference
    }

    pub fn maps(&self) -> &[MonotoneMap] {
        &self.maps
    }

    pub fn weights(&self) -> &SimplexWeights {
        &self.weights
    }

    pub(crate) fn maps_mut(&mut self) -> &mut [MonotoneMap] {
        &mut self.maps
    }

    pub(crate) fn set_weights(&mut self, w: SimplexWeights) {
        self.weights = w;
    }

    pub fn with_weights(&self, weights: SimplexWeights) -> Result<MtdrModel> {
        MtdrModel::new(self.reference.clone(), self.maps.clone(), weights)
    }

    pub fn with_maps(&self, maps: Vec<MonotoneMap>) -> Result<MtdrModel> {
        MtdrModel::new(self.reference.clone(), maps, self.weights.clone())
    }

    fn check_predictors(&self, predictors: &[QuantileGrid]) -> Result<()> {
        if predictors.len() != self.p() {
            return Err(MtdrError::DimensionMismatch(format!(
                "{} predictors for a model with p = {}",
                predictors.len(),
                self.p()
            )));
        }
        for q in predictors {
            self.reference.check_compatible(q)?;
        }
        Ok(())
    }

    /// Quantile vector of `Γ_θ(ξ)` without validation.
    pub(crate) fn predict_values(&self, predictors: &[QuantileGrid]) -> Vec<f64> {
        let alpha = self.weights.as_slice();
        let mut out = vec![0.0; self.reference.len()];
        let inputs = std::iter::once(&self.reference).chain(predictors);
        for ((map, &a), xi) in self.maps.iter().zip(alpha).zip(inputs) {
            if a == 0.0 {
                continue;
            }
            for (o, v) in out.iter_mut().zip(map.eval_many(xi.values())) {
                *o += a * v;
            }
        }
        out
    }

    /// `Q_{Γ(ξ)} = Σ_j α_j T_j ∘ Q_{ξ_j}`.
    pub fn predict(&self, predictors: &[QuantileGrid]) -> Result<QuantileGrid> {
        self.check_predictors(predictors)?;
        let q = self.predict_values(predictors);
        QuantileGrid::new(self.domain(), self.prob_grid(), q)
    }

    /// Squared Wasserstein distance between the response and the prediction.
    pub fn loss(&self, predictors: &[QuantileGrid], response: &QuantileGrid) -> Result<f64> {
        let pred = self.predict(predictors)?;
        response.wasserstein_sq(&pred)
    }

    /// Mean loss over the subjects.
    pub fn empirical_risk(&self, data: &DataSet) -> Result<f64> {
        self.empirical_risk_with(data, Execution::default())
    }

    pub fn empirical_risk_with(&self, data: &DataSet, exec: Execution) -> Result<f64> {
        if data.is_empty() {
            return Err(MtdrError::Empty("data set"));
        }
        let losses = par::map_slice(data.subjects(), exec, |s| {
            self.loss(&s.predictors, s.response()?)
        });
        let mut total = 0.0;
        for l in losses {
            total += l?;
        }
        Ok(total / data.len() as f64)
    }

    /// Predictions for every subject, in order.
    pub fn predict_all(&self, data: &DataSet) -> Result<Vec<QuantileGrid>> {
        par::map_slice(data.subjects(), Execution::default(), |s| {
            self.predict(&s.predictors)
        })
        .into_iter()
        .collect()
    }
}

/// Empirical predictive semi-norm `‖θ_A − θ_B‖_P` over the predictors of
/// `sample`: the root mean squared L² distance between the two models'
/// predicted quantile functions.
pub fn predictive_seminorm(a: &MtdrModel, b: &MtdrModel, sample: &DataSet) -> Result<f64> {
    if a.p() != b.p() || a.prob_grid() != b.prob_grid() || a.domain() != b.domain() {
        return Err(MtdrError::DimensionMismatch(
            "models do not share structure".into(),
        ));
    }
    if sample.is_empty() {
        return Err(MtdrError::Empty("predictor sample"));
    }
    let sq = par::map_slice(
        sample.subjects(),
        Execution::default(),
        |s| -> Result<f64> {
            let pa = a.predict(&s.predictors)?;
            let pb = b.predict(&s.predictors)?;
            pa.wasserstein_sq(&pb)
        },
    );
    let mut total = 0.0;
    for v in sq {
        total += v?;
    }
    Ok((total / sample.len() as f64).sqrt())
}

/// Free-function forms of the model methods.
pub fn predict(model: &MtdrModel, predictors: &[QuantileGrid]) -> Result<QuantileGrid> {
    model.predict(predictors)
}

pub fn loss(
    model: &MtdrModel,
    predictors: &[QuantileGrid],
    response: &QuantileGrid,
) -> Result<f64> {
    model.loss(predictors, response)
}

pub fn empirical_risk(model: &MtdrModel, data: &DataSet) -> Result<f64> {
    model.empirical_risk(data)
}
