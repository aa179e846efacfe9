//! Single- and multi-predictor scenarios and the replication driver.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, g_unit, rmse, BetaLaw, NoiseSpec};
use crate::error::{MtdrError, Result};
use crate::fit::{fit, FitConfig};
use crate::io::RawSubject;
use crate::model::{predictive_seminorm, DataSet, MtdrModel, Subject};
use crate::monotone::{MonotoneMap, NodeGrid};
use crate::par;
use crate::quantile::{Domain, ProbGrid, QuantileGrid};
use crate::solvers::SimplexWeights;

/// A data-generating design on `[0, 1]` with reference `U[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub alpha_star: SimplexWeights,
    /// `g` index of each true map, reference first.
    pub map_star: Vec<i32>,
    /// Both Beta shapes of predictor `j` are drawn from `U[lo, hi]`.
    pub beta_ranges: Vec<(f64, f64)>,
    pub n: usize,
    pub m: usize,
    pub reps: usize,
    pub seed: u64,
    pub test_fraction: f64,
    pub noise: NoiseSpec,
    pub t: usize,
    /// Use exact quantile grids instead of empirical ones from `m` draws.
    pub exact: bool,
}

impl ScenarioSpec {
    /// `T_0 = g_4`, `T_1 = g_3`, shapes from `U[1, 5]`, `K = ±3`.
    pub fn single(alpha1: f64, n: usize, m: usize) -> Result<Self> {
        Ok(ScenarioSpec {
            alpha_star: SimplexWeights::new(vec![1.0 - alpha1, alpha1])?,
            map_star: vec![4, 3],
            beta_ranges: vec![(1.0, 5.0)],
            n,
            m,
            reps: 30,
            seed: 0,
            test_fraction: 0.3,
            noise: NoiseSpec::magnitude(3)?,
            t: 1000,
            exact: false,
        })
    }

    /// Adds `T_2 = g_{−5}` with shapes from `U[2, 6]`.
    pub fn multi(alpha: [f64; 3], n: usize, m: usize) -> Result<Self> {
        Ok(ScenarioSpec {
            alpha_star: SimplexWeights::new(alpha.to_vec())?,
            map_star: vec![4, 3, -5],
            beta_ranges: vec![(1.0, 5.0), (2.0, 6.0)],
            ..Self::single(0.5, n, m)?
        })
    }

    pub fn p(&self) -> usize {
        self.beta_ranges.len()
    }

    pub fn n_test(&self) -> usize {
        (self.test_fraction * self.n as f64).ceil() as usize
    }

    pub fn validate(&self) -> Result<()> {
        let p = self.p();
        if self.alpha_star.len() != p + 1 || self.map_star.len() != p + 1 {
            return Err(MtdrError::DimensionMismatch(format!(
                "{} weights and {} maps for p = {p}",
                self.alpha_star.len(),
                self.map_star.len()
            )));
        }
        if self.n == 0 || self.m == 0 || self.reps == 0 {
            return Err(MtdrError::InvalidParameter(
                "n, m and reps must be positive".into(),
            ));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction.is_finite()) {
            return Err(MtdrError::InvalidParameter(
                "test fraction must be positive".into(),
            ));
        }
        if self.t < 2 {
            return Err(MtdrError::InvalidParameter("t must be at least 2".into()));
        }
        for &(lo, hi) in &self.beta_ranges {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(MtdrError::InvalidParameter(format!(
                    "beta range [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    /// The true model with maps sampled at the nodes.
    pub fn truth(&self) -> Result<MtdrModel> {
        let d = Domain::unit();
        let nodes = NodeGrid::new(d, self.t)?;
        let reference = QuantileGrid::uniform(d, ProbGrid::new(self.t)?);
        let maps = self
            .map_star
            .iter()
            .map(|&k| MonotoneMap::from_fn(nodes, |x| g_unit(k, x)))
            .collect::<Result<Vec<_>>>()?;
        MtdrModel::new(reference, maps, self.alpha_star.clone())
    }
}

/// One simulated replication.
#[derive(Debug, Clone)]
pub struct GeneratedData {
    pub train: DataSet,
    pub test: DataSet,
    /// Test predictors and responses with exact quantile grids.
    pub test_exact: DataSet,
    pub truth: MtdrModel,
    /// Raw draws behind `train` and `test`; empty for exact designs.
    pub raw_train: Vec<RawSubject>,
    pub raw_test: Vec<RawSubject>,
}

struct Draw {
    observed: Subject,
    exact: Subject,
    raw: Option<RawSubject>,
}

fn sorted_uniforms(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    let mut u: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
    u.sort_by(f64::total_cmp);
    u
}

fn draw_subject(spec: &ScenarioSpec, id: String, seed: u64, want_exact: bool) -> Result<Draw> {
    let d = Domain::unit();
    let grid = ProbGrid::new(spec.t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let laws = spec
        .beta_ranges
        .iter()
        .map(|&(lo, hi)| {
            let a = rng.random_range(lo..=hi);
            let b = rng.random_range(lo..=hi);
            BetaLaw::new(a, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let k = spec.noise.draw(&mut rng);
    let alpha = spec.alpha_star.as_slice();
    // Response quantile at a level `v`, given each predictor's quantile there.
    let respond = |v: f64, q: &[f64]| {
        let mut s = alpha[0] * g_unit(spec.map_star[0], v);
        for (j, &x) in q.iter().enumerate() {
            s += alpha[j + 1] * g_unit(spec.map_star[j + 1], x);
        }
        g_unit(k, s.clamp(0.0, 1.0))
    };
    let quantiles_at = |levels: &[f64]| -> (Vec<Vec<f64>>, Vec<f64>) {
        let q: Vec<Vec<f64>> = laws.iter().map(|l| l.quantiles_sorted(levels)).collect();
        let mut buf = vec![0.0; laws.len()];
        let eta = levels
            .iter()
            .enumerate()
            .map(|(r, &v)| {
                for (b, qj) in buf.iter_mut().zip(&q) {
                    *b = qj[r];
                }
                respond(v, &buf)
            })
            .collect();
        (q, eta)
    };

    let exact = if want_exact || spec.exact {
        let levels: Vec<f64> = grid.levels().collect();
        let (q, eta) = quantiles_at(&levels);
        let preds = q
            .into_iter()
            .map(|v| QuantileGrid::new(d, grid, v))
            .collect::<Result<Vec<_>>>()?;
        Some(Subject::new(
            id.clone(),
            preds,
            Some(QuantileGrid::new(d, grid, eta)?),
        ))
    } else {
        None
    };

    if spec.exact {
        let exact = exact.expect("computed above");
        return Ok(Draw {
            observed: exact.clone(),
            exact,
            raw: None,
        });
    }

    let predictor_samples: Vec<Vec<f64>> = laws
        .iter()
        .map(|l| l.quantiles_sorted(&sorted_uniforms(&mut rng, spec.m)))
        .collect();
    let w = sorted_uniforms(&mut rng, spec.m);
    let (_, response_samples) = quantiles_at(&w);
    let preds = predictor_samples
        .iter()
        .map(|s| QuantileGrid::from_samples(s, d, grid))
        .collect::<Result<Vec<_>>>()?;
    let response = QuantileGrid::from_samples(&response_samples, d, grid)?;
    let observed = Subject::new(id.clone(), preds, Some(response));
    Ok(Draw {
        exact: exact.unwrap_or_else(|| observed.clone()),
        observed,
        raw: Some(RawSubject {
            id,
            predictors: predictor_samples,
            response: Some(response_samples),
        }),
    })
}

/// Draw `n` training and `⌈test_fraction·n⌉` test subjects.
pub fn generate_dataset<R: Rng + ?Sized>(
    spec: &ScenarioSpec,
    rng: &mut R,
) -> Result<GeneratedData> {
    spec.validate()?;
    let base: u64 = rng.random();
    let n = spec.n;
    let total = n + spec.n_test();
    let draws = par::map_range(total, par::Execution::default(), |i| {
        let id = if i < n {
            format!("train{i}")
        } else {
            format!("test{}", i - n)
        };
        draw_subject(spec, id, derive_seed(base, i as u64), i >= n)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut train = Vec::with_capacity(n);
    let mut test = Vec::with_capacity(total - n);
    let mut test_exact = Vec::with_capacity(total - n);
    let mut raw_train = Vec::new();
    let mut raw_test = Vec::new();
    for (i, dr) in draws.into_iter().enumerate() {
        if i < n {
            train.push(dr.observed);
            raw_train.extend(dr.raw);
        } else {
            test.push(dr.observed);
            test_exact.push(dr.exact);
            raw_test.extend(dr.raw);
        }
    }
    Ok(GeneratedData {
        train: DataSet::new(train)?,
        test: DataSet::new(test)?,
        test_exact: DataSet::new(test_exact)?,
        truth: spec.truth()?,
        raw_train,
        raw_test,
    })
}

/// Extra work per replication.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationOptions {
    /// Also fit the single-map transport model (weights fixed at the first
    /// predictor's vertex) and record its test RMSE.
    pub with_ot: bool,
}

/// Error metrics of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepResult {
    pub theta_seminorm_err: f64,
    /// `|α̂_1 − α_1*|` for one predictor, the ℓ² norm otherwise.
    pub alpha_err: f64,
    /// `None` where the true weight is zero and the map is not identified.
    pub map_l2_errs: Vec<Option<f64>>,
    pub rmse: f64,
    pub rmse_ot: Option<f64>,
    pub alpha_hat: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Largest rise of any fit's objective trace, relative to its start.
    pub max_relative_rise: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    /// Sample standard deviation; zero for a single replication.
    pub sd: f64,
}

impl MetricSummary {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MetricSummary { mean, sd }
    }

    /// Standard error of the mean.
    pub fn se(&self, reps: usize) -> f64 {
        self.sd / (reps as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub spec: ScenarioSpec,
    pub theta: MetricSummary,
    pub alpha: MetricSummary,
    pub maps: Vec<Option<MetricSummary>>,
    pub rmse: MetricSummary,
    pub rmse_ot: Option<MetricSummary>,
    pub replications: Vec<RepResult>,
}

impl ReplicationSummary {
    /// Rows `metric,mean,sd`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,mean,sd\n");
        let mut row = |name: &str, m: &MetricSummary| {
            out.push_str(&format!("{name},{},{}\n", m.mean, m.sd));
        };
        row("theta_seminorm_err", &self.theta);
        row("alpha_err", &self.alpha);
        for (j, m) in self.maps.iter().enumerate() {
            if let Some(m) = m {
                row(&format!("map{j}_l2_err"), m);
            }
        }
        row("rmse", &self.rmse);
        if let Some(m) = &self.rmse_ot {
            row("rmse_ot", m);
        }
        out
    }

    pub fn all_descending(&self, rel_slack: f64) -> bool {
        self.replications
            .iter()
            .all(|r| r.max_relative_rise <= rel_slack)
    }
}

fn max_relative_rise(trace: &[f64]) -> f64 {
    let start = trace.first().copied().unwrap_or(0.0);
    if start <= 0.0 {
        return 0.0;
    }
    trace
        .windows(2)
        .map(|w| (w[1] - w[0]) / start)
        .fold(0.0, f64::max)
}

/// The data of replication `rep` under `spec.seed`, as used by
/// [`run_replications`].
pub fn generate_replication(spec: &ScenarioSpec, rep: usize) -> Result<GeneratedData> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, rep as u64));
    generate_dataset(spec, &mut rng)
}

fn replicate(
    spec: &ScenarioSpec,
    cfg: &FitConfig,
    opts: ReplicationOptions,
    rep: usize,
) -> Result<RepResult> {
    let data = generate_replication(spec, rep)?;
    let p = spec.p();
    let truth = &data.truth;
    let cfg = FitConfig {
        seed: derive_seed(spec.seed, rep as u64),
        ..cfg.clone()
    };
    let (model, report) = fit(&data.train, p, truth.reference(), &cfg, None)?;
    let mut rise = max_relative_rise(&report.objective_trace);

    let theta = predictive_seminorm(&model, truth, &data.test_exact)?;
    let alpha_err = if p == 1 {
        (model.weights()[1] - truth.weights()[1]).abs()
    } else {
        model.weights().l2_distance(truth.weights())
    };
    let map_l2_errs = (0..=p)
        .map(|j| {
            if truth.weights()[j] > 0.0 {
                model.maps()[j].l2_distance(&truth.maps()[j]).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let actual: Vec<QuantileGrid> = data.test.responses()?.into_iter().cloned().collect();
    let rmse_val = rmse(&model.predict_all(&data.test)?, &actual)?;
    let rmse_ot = if opts.with_ot {
        let fixed = SimplexWeights::vertex(p + 1, 1);
        let (ot, ot_report) = fit(&data.train, p, truth.reference(), &cfg, Some(&fixed))?;
        rise = rise.max(max_relative_rise(&ot_report.objective_trace));
        Some(rmse(&ot.predict_all(&data.test)?, &actual)?)
    } else {
        None
    };
    Ok(RepResult {
        theta_seminorm_err: theta,
        alpha_err,
        map_l2_errs,
        rmse: rmse_val,
        rmse_ot,
        alpha_hat: model.weights().as_slice().to_vec(),
        iterations: report.iterations,
        converged: report.converged,
        max_relative_rise: rise,
    })
}

pub fn run_replications(spec: &ScenarioSpec, cfg: &FitConfig) -> Result<ReplicationSummary> {
    run_replications_with(spec, cfg, ReplicationOptions::default())
}

/// Fit `spec.reps` independent replications; replication `r` uses a seed
/// derived from `(spec.seed, r)`, so results do not depend on scheduling.
pub fn run_replications_with(
    spec: &ScenarioSpec,
    cfg: &FitConfig,
    opts: ReplicationOptions,
) -> Result<ReplicationSummary> {
    spec.validate()?;
    if cfg.t != spec.t {
        return Err(MtdrError::GridMismatch(format!(
            "scenario t = {} but fit t = {}",
            spec.t, cfg.t
        )));
    }
    let reps = par::map_range(spec.reps, cfg.execution, |r| replicate(spec, cfg, opts, r))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let col =
        |f: &dyn Fn(&RepResult) -> f64| MetricSummary::of(&reps.iter().map(f).collect::<Vec<_>>());
    let maps = (0..=spec.p())
        .map(|j| {
            let v: Vec<f64> = reps.iter().filter_map(|r| r.map_l2_errs[j]).collect();
            (!v.is_empty()).then(|| MetricSummary::of(&v))
        })
        .collect();
    let rmse_ot = opts
        .with_ot
        .then(|| col(&|r: &RepResult| r.rmse_ot.unwrap_or(f64::NAN)));
    Ok(ReplicationSummary {
        spec: spec.clone(),
        theta: col(&|r| r.theta_seminorm_err),
        alpha: col(&|r| r.alpha_err),
        maps,
        rmse: col(&|r| r.rmse),
        rmse_ot,
        replications: reps,
    })
}
