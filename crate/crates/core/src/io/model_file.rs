//! JSON persistence of fitted models.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MtdrError, Result};
use crate::fit::FitReport;
use crate::model::MtdrModel;
use crate::monotone::{MonotoneMap, NodeGrid};
use crate::quantile::{Domain, ProbGrid, QuantileGrid};
use crate::solvers::SimplexWeights;

pub const FORMAT_VERSION: u32 = 1;

/// Midpoint grid description: levels `(r + ½)/t` or nodes at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub kind: String,
    pub t: usize,
}

impl GridSpec {
    fn midpoint(t: usize) -> Self {
        GridSpec {
            kind: "midpoint".into(),
            t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub domain: Domain,
    pub t: usize,
    pub prob_grid: GridSpec,
    pub node_grid: GridSpec,
    pub alpha: Vec<f64>,
    pub maps: Vec<Vec<f64>>,
    pub reference_quantiles: Vec<f64>,
    pub fit_report: Option<FitReport>,
}

impl ModelFile {
    pub fn new(model: &MtdrModel, report: Option<&FitReport>) -> Self {
        let t = model.prob_grid().len();
        ModelFile {
            format_version: FORMAT_VERSION,
            domain: model.domain(),
            t,
            prob_grid: GridSpec::midpoint(t),
            node_grid: GridSpec::midpoint(model.node_grid().len()),
            alpha: model.weights().as_slice().to_vec(),
            maps: model.maps().iter().map(|m| m.values().to_vec()).collect(),
            reference_quantiles: model.reference().values().to_vec(),
            fit_report: report.cloned(),
        }
    }

    pub fn to_model(&self) -> Result<MtdrModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(MtdrError::InvalidParameter(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        for g in [&self.prob_grid, &self.node_grid] {
            if g.kind != "midpoint" {
                return Err(MtdrError::InvalidGrid(format!(
                    "unknown grid kind `{}`",
                    g.kind
                )));
            }
        }
        if self.prob_grid.t != self.t {
            return Err(MtdrError::GridMismatch("prob_grid.t differs from t".into()));
        }
        let domain = Domain::new(self.domain.s0, self.domain.s1)?;
        let pg = ProbGrid::new(self.t)?;
        let ng = NodeGrid::new(domain, self.node_grid.t)?;
        let reference = QuantileGrid::new(domain, pg, self.reference_quantiles.clone())?;
        let maps = self
            .maps
            .iter()
            .map(|z| MonotoneMap::new(ng, z.clone()))
            .collect::<Result<Vec<_>>>()?;
        MtdrModel::new(reference, maps, SimplexWeights::new(self.alpha.clone())?)
    }
}

pub fn save_model(path: &Path, model: &MtdrModel, report: Option<&FitReport>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&ModelFile::new(model, report))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<(MtdrModel, Option<FitReport>)> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile = serde_json::from_str(&text)?;
    Ok((file.to_model()?, file.fit_report))
}
