//! Reference selection and leave-one-out cross-validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MtdrError, Result};
use crate::fit::{fit, FitConfig};
use crate::model::DataSet;
use crate::par;
use crate::quantile::{frechet_mean_uniform, QuantileGrid};

/// How the reference distribution is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceChoice {
    /// Uniform on the domain.
    Uniform,
    /// Fréchet mean of the training responses.
    Frechet,
    /// Empirical quantiles of the given draws.
    Samples(Vec<f64>),
}

impl ReferenceChoice {
    /// `uniform`, `frechet`, or the path of a CSV file with a `value` column.
    pub fn parse(arg: &str) -> Result<Self> {
        match arg {
            "uniform" => Ok(ReferenceChoice::Uniform),
            "frechet" => Ok(ReferenceChoice::Frechet),
            path => Self::from_file(Path::new(path)),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_path(path)?;
        let col = rdr
            .headers()?
            .iter()
            .position(|h| h == "value")
            .ok_or_else(|| MtdrError::Parse {
                path: path.display().to_string(),
                row: 1,
                message: "reference file needs a `value` column".into(),
            })?;
        let mut values = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let row = rec.position().map_or(0, |p| p.line());
            let field = rec.get(col).unwrap_or("");
            let v: f64 = field.parse().map_err(|_| MtdrError::Parse {
                path: path.display().to_string(),
                row,
                message: format!("non-numeric value `{field}`"),
            })?;
            values.push(v);
        }
        Ok(ReferenceChoice::Samples(values))
    }

    pub fn resolve(&self, data: &DataSet) -> Result<QuantileGrid> {
        match self {
            ReferenceChoice::Uniform => Ok(QuantileGrid::uniform(data.domain(), data.grid())),
            ReferenceChoice::Frechet => {
                let responses: Vec<QuantileGrid> = data.responses()?.into_iter().cloned().collect();
                frechet_mean_uniform(&responses)
            }
            ReferenceChoice::Samples(v) => {
                QuantileGrid::from_samples(v, data.domain(), data.grid())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoocvReport {
    pub subject_ids: Vec<String>,
    /// `d_W(η_i, η̂_i)` with subject `i` held out.
    pub distances: Vec<f64>,
    pub awd: f64,
    /// Fitted weights of each fold.
    pub fold_alpha: Vec<Vec<f64>>,
}

/// Fit one model per held-out subject on the remaining ones. A Fréchet
/// reference is recomputed from each training fold.
pub fn loocv(
    data: &DataSet,
    p: usize,
    reference: &ReferenceChoice,
    cfg: &FitConfig,
) -> Result<LoocvReport> {
    if data.len() < 2 {
        return Err(MtdrError::InvalidParameter(
            "cross-validation needs two subjects".into(),
        ));
    }
    let inner = FitConfig {
        execution: par::Execution::Sequential,
        ..cfg.clone()
    };
    let folds = par::map_range(data.len(), cfg.execution, |i| -> Result<(f64, Vec<f64>)> {
        let train = data.without(i)?;
        let xi0 = reference.resolve(&train)?;
        let (model, _) = fit(&train, p, &xi0, &inner, None)?;
        let held = &data.subjects()[i];
        let d = model
            .predict(&held.predictors)?
            .wasserstein(held.response()?)?;
        Ok((d, model.weights().as_slice().to_vec()))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (distances, fold_alpha): (Vec<f64>, Vec<Vec<f64>>) = folds.into_iter().unzip();
    let awd = distances.iter().sum::<f64>() / distances.len() as f64;
    Ok(LoocvReport {
        subject_ids: data.subjects().iter().map(|s| s.id.clone()).collect(),
        distances,
        awd,
        fold_alpha,
    })
}
