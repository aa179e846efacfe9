//! Long-format sample files, model persistence and leave-one-out
//! cross-validation.
//!
//! Sample files are CSV with header `subject_id,variable,value`, where
//! `variable` is `response` or `pred1` … `predP`.

mod loocv;
mod model_file;

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MtdrError, Result};
use crate::model::{DataSet, Subject};
use crate::quantile::{Domain, ProbGrid, QuantileGrid};

pub use loocv::{loocv, LoocvReport, ReferenceChoice};
pub use model_file::{load_model, save_model, ModelFile, FORMAT_VERSION};

/// Raw draws of one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawSubject {
    pub id: String,
    /// `predictors[j]` holds the draws of `pred{j+1}`.
    pub predictors: Vec<Vec<f64>>,
    pub response: Option<Vec<f64>>,
}

impl RawSubject {
    pub fn to_subject(&self, domain: Domain, grid: ProbGrid) -> Result<Subject> {
        let preds = self
            .predictors
            .iter()
            .map(|s| QuantileGrid::from_samples(s, domain, grid))
            .collect::<Result<Vec<_>>>()?;
        let response = self
            .response
            .as_ref()
            .map(|s| QuantileGrid::from_samples(s, domain, grid))
            .transpose()?;
        Ok(Subject::new(self.id.clone(), preds, response))
    }
}

#[derive(Debug, Deserialize)]
struct Row {
    subject_id: String,
    variable: String,
    value: String,
}

enum Variable {
    Response,
    Predictor(usize),
}

fn parse_variable(name: &str, p: usize) -> Option<Variable> {
    if name == "response" {
        return Some(Variable::Response);
    }
    let j: usize = name.strip_prefix("pred")?.parse().ok()?;
    (1..=p).contains(&j).then_some(Variable::Predictor(j - 1))
}

/// Parse long-format samples. Subjects keep their order of first
/// appearance; values are checked against `domain`.
pub fn read_samples<R: Read>(
    reader: R,
    source: &str,
    domain: Domain,
    p: usize,
    require_response: bool,
) -> Result<Vec<RawSubject>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != ["subject_id", "variable", "value"] {
        return Err(MtdrError::Parse {
            path: source.to_string(),
            row: 1,
            message: "header must be `subject_id,variable,value`".into(),
        });
    }
    let mut order: Vec<RawSubject> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec.position().map_or(0, |pos| pos.line());
        let err = |message: String| MtdrError::Parse {
            path: source.to_string(),
            row,
            message,
        };
        let r: Row = rec
            .deserialize(Some(&headers))
            .map_err(|e| err(e.to_string()))?;
        let var = parse_variable(&r.variable, p)
            .ok_or_else(|| err(format!("unknown variable `{}` for p = {p}", r.variable)))?;
        let value: f64 = r
            .value
            .parse()
            .map_err(|_| err(format!("non-numeric value `{}`", r.value)))?;
        if !value.is_finite() {
            return Err(err(format!("non-finite value `{}`", r.value)));
        }
        let value = domain.clamp_checked(value).map_err(|_| {
            err(format!(
                "value {value} outside [{}, {}]",
                domain.s0, domain.s1
            ))
        })?;
        let slot = *index.entry(r.subject_id.clone()).or_insert_with(|| {
            order.push(RawSubject {
                id: r.subject_id.clone(),
                predictors: vec![Vec::new(); p],
                response: None,
            });
            order.len() - 1
        });
        let subj = &mut order[slot];
        match var {
            Variable::Response => subj.response.get_or_insert_with(Vec::new).push(value),
            Variable::Predictor(j) => subj.predictors[j].push(value),
        }
    }
    if order.is_empty() {
        return Err(MtdrError::Empty("sample file"));
    }
    for s in &order {
        for (j, v) in s.predictors.iter().enumerate() {
            if v.is_empty() {
                return Err(MtdrError::MissingVariable {
                    subject: s.id.clone(),
                    variable: format!("pred{}", j + 1),
                });
            }
        }
        if require_response && s.response.is_none() {
            return Err(MtdrError::MissingVariable {
                subject: s.id.clone(),
                variable: "response".into(),
            });
        }
    }
    Ok(order)
}

pub fn read_samples_file(
    path: &Path,
    domain: Domain,
    p: usize,
    require_response: bool,
) -> Result<Vec<RawSubject>> {
    let f = std::fs::File::open(path)?;
    read_samples(
        std::io::BufReader::new(f),
        &path.display().to_string(),
        domain,
        p,
        require_response,
    )
}

pub fn to_dataset(raw: &[RawSubject], domain: Domain, grid: ProbGrid) -> Result<DataSet> {
    let subjects = raw
        .iter()
        .map(|r| r.to_subject(domain, grid))
        .collect::<Result<Vec<_>>>()?;
    DataSet::new(subjects)
}

/// Read a long-format file with responses and build quantile grids.
pub fn ingest(path: &Path, domain: Domain, grid: ProbGrid, p: usize) -> Result<DataSet> {
    to_dataset(&read_samples_file(path, domain, p, true)?, domain, grid)
}

/// As [`ingest`], but responses may be absent.
pub fn ingest_predictors(path: &Path, domain: Domain, grid: ProbGrid, p: usize) -> Result<DataSet> {
    to_dataset(&read_samples_file(path, domain, p, false)?, domain, grid)
}

/// Write raw draws in long format. Values use the shortest representation
/// that parses back to the same `f64`.
pub fn write_samples<W: Write>(writer: W, raw: &[RawSubject]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["subject_id", "variable", "value"])?;
    for s in raw {
        for (j, v) in s.predictors.iter().enumerate() {
            let name = format!("pred{}", j + 1);
            for x in v {
                w.write_record([s.id.as_str(), name.as_str(), x.to_string().as_str()])?;
            }
        }
        if let Some(v) = &s.response {
            for x in v {
                w.write_record([s.id.as_str(), "response", x.to_string().as_str()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_samples_file(path: &Path, raw: &[RawSubject]) -> Result<()> {
    let f = std::fs::File::create(path)?;
    write_samples(std::io::BufWriter::new(f), raw)
}

/// Long-format predictions: `subject_id,p,quantile`.
pub fn write_predictions<W: Write>(
    writer: W,
    ids: &[String],
    preds: &[QuantileGrid],
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["subject_id", "p", "quantile"])?;
    for (id, q) in ids.iter().zip(preds) {
        for (p, v) in q.grid().levels().zip(q.values()) {
            w.write_record([id.as_str(), p.to_string().as_str(), v.to_string().as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}
