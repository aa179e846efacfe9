//! Alternating fitter: backfitting of the transport maps by weighted
//! isotonic regression, then a simplex least-squares update of the weights.
//!
//! The map step works on the spatial node grid (change of variables through
//! the optimal maps between predictors), the weight step and the reported
//! objective on the probability grid. Each accepted map update is scaled by
//! an exact line search on the probability-grid objective, so the recorded
//! trajectory never increases.

use serde::{Deserialize, Serialize};

use crate::error::{MtdrError, Result};
use crate::model::{DataSet, MtdrModel};
use crate::monotone::{MonotoneMap, NodeGrid};
use crate::par::{self, Execution};
use crate::quantile::QuantileGrid;
use crate::solvers::SimplexWeights;
use crate::solvers::{
    simplex_least_squares_from, weighted_isotonic, IsotonicProblem, SimplexLsProblem,
};

/// Tuning knobs for [`fit`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Probability levels and spatial nodes.
    pub t: usize,
    pub max_outer_iter: usize,
    /// Stop once the relative objective decrease of an outer sweep is below this.
    pub rel_tol: f64,
    /// Maps whose weight is below this are frozen for the sweep.
    pub alpha_floor: f64,
    /// Minimum increment between consecutive node values of a fitted map.
    pub min_slope: f64,
    /// Master seed for harnesses built on top of the fitter.
    pub seed: u64,
    pub execution: Execution,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            t: 1000,
            max_outer_iter: 200,
            rel_tol: 1e-8,
            alpha_floor: 1e-8,
            min_slope: 0.0,
            seed: 0,
            execution: Execution::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.t < 2 {
            return Err(MtdrError::InvalidParameter(format!("t = {} < 2", self.t)));
        }
        if !(self.rel_tol > 0.0) || !(self.alpha_floor > 0.0) {
            return Err(MtdrError::InvalidParameter(
                "tolerances must be positive".into(),
            ));
        }
        if !(self.min_slope >= 0.0) {
            return Err(MtdrError::InvalidParameter("min_slope must be >= 0".into()));
        }
        Ok(())
    }
}

/// Trace of a fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    /// Empirical risk after initialization, then after every outer sweep.
    pub objective_trace: Vec<f64>,
    pub final_objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl FitReport {
    /// True when no step of the trace rises by more than `rel_slack` times
    /// the initial objective.
    pub fn is_nonincreasing(&self, rel_slack: f64) -> bool {
        let slack = rel_slack * self.objective_trace.first().copied().unwrap_or(0.0);
        self.objective_trace
            .windows(2)
            .all(|w| w[1] <= w[0] + slack)
    }
}

/// Quantities of the map-`k` subproblem that depend only on the data.
struct SubjectBlock {
    /// `ξ_k`-mass of each node cell.
    mass: Vec<f64>,
    /// `T_{ξ_k → η}(x_r)`.
    target: Vec<f64>,
    /// `T_{ξ_k → ξ_j}(x_r)` for `j ≠ k`; empty at `j = k`.
    inner: Vec<Vec<f64>>,
}

struct Design<'a> {
    data: &'a DataSet,
    reference: &'a QuantileGrid,
    nodes: NodeGrid,
    exec: Execution,
}

impl<'a> Design<'a> {
    fn input(&self, j: usize, i: usize) -> &'a QuantileGrid {
        if j == 0 {
            self.reference
        } else {
            &self.data.subjects()[i].predictors[j - 1]
        }
    }

    fn response(&self, i: usize) -> &'a QuantileGrid {
        self.data.subjects()[i]
            .response
            .as_ref()
            .expect("responses checked on entry")
    }

    fn n(&self) -> usize {
        self.data.len()
    }

    fn dim(&self) -> usize {
        self.data.p() + 1
    }

    fn block(&self, k: usize, i: usize) -> SubjectBlock {
        let t = self.nodes.len();
        let xi_k = self.input(k, i);
        let edges: Vec<f64> = (0..=t).map(|r| xi_k.cdf(self.nodes.edge(r))).collect();
        let mass = edges.windows(2).map(|w| w[1] - w[0]).collect();
        let levels: Vec<f64> = (0..t).map(|r| xi_k.cdf(self.nodes.node(r))).collect();
        let eta = self.response(i);
        let target = levels.iter().map(|&u| eta.quantile_at(u)).collect();
        let inner = (0..self.dim())
            .map(|j| {
                if j == k {
                    Vec::new()
                } else {
                    let xi_j = self.input(j, i);
                    levels.iter().map(|&u| xi_j.quantile_at(u)).collect()
                }
            })
            .collect();
        SubjectBlock {
            mass,
            target,
            inner,
        }
    }

    fn blocks(&self, k: usize) -> Vec<SubjectBlock> {
        par::map_range(self.n(), self.exec, |i| self.block(k, i))
    }

    /// Aggregate the per-subject node targets into one isotonic problem.
    fn isotonic_problem(
        &self,
        blocks: &[SubjectBlock],
        maps: &[MonotoneMap],
        alpha: &[f64],
        k: usize,
        min_step: f64,
    ) -> IsotonicProblem {
        let t = self.nodes.len();
        let parts = par::map_slice(blocks, self.exec, |b| {
            let mut y = b.target.clone();
            for (j, map) in maps.iter().enumerate() {
                if j != k && alpha[j] != 0.0 {
                    for (y, v) in y.iter_mut().zip(map.eval_many(&b.inner[j])) {
                        *y -= alpha[j] * v;
                    }
                }
            }
            for (y, &w) in y.iter_mut().zip(&b.mass) {
                *y = w * *y / alpha[k];
            }
            y
        });
        let mut sum_wy = vec![0.0; t];
        let mut sum_w = vec![0.0; t];
        for (part, b) in parts.iter().zip(blocks) {
            for r in 0..t {
                sum_wy[r] += part[r];
                sum_w[r] += b.mass[r];
            }
        }
        let n = blocks.len() as f64;
        let y = sum_wy
            .iter()
            .zip(&sum_w)
            .map(|(&wy, &w)| if w > 0.0 { wy / w } else { 0.0 })
            .collect();
        let w = sum_w.iter().map(|&w| w / n).collect();
        let d = self.nodes.domain();
        let mut prob = IsotonicProblem::new(y, w, d.s0, d.s1);
        prob.min_step = min_step;
        prob
    }
}

/// Weighted isotonic subproblem for map `k` at the model's current state.
///
/// For `k = 0` the "predictor" of every subject is the model's reference.
pub fn assemble_tk_subproblem(
    model: &MtdrModel,
    data: &DataSet,
    k: usize,
    alpha_floor: f64,
) -> Result<IsotonicProblem> {
    check_inputs(data, model.reference(), model.p())?;
    if k > model.p() {
        return Err(MtdrError::DimensionMismatch(format!(
            "map index {k} > p = {}",
            model.p()
        )));
    }
    let alpha = model.weights().as_slice();
    if alpha[k] < alpha_floor {
        return Err(MtdrError::WeightTooSmall {
            index: k,
            value: alpha[k],
        });
    }
    let design = Design {
        data,
        reference: model.reference(),
        nodes: model.node_grid(),
        exec: Execution::default(),
    };
    let blocks = design.blocks(k);
    Ok(design.isotonic_problem(&blocks, model.maps(), alpha, k, 0.0))
}

fn check_inputs(data: &DataSet, reference: &QuantileGrid, p: usize) -> Result<()> {
    if data.is_empty() {
        return Err(MtdrError::Empty("data set"));
    }
    if data.p() != p {
        return Err(MtdrError::DimensionMismatch(format!(
            "data has {} predictors, expected {p}",
            data.p()
        )));
    }
    if !data.has_responses() {
        return Err(MtdrError::InvalidParameter(
            "every training subject needs a response".into(),
        ));
    }
    reference.check_compatible(data.subjects()[0].response()?)?;
    Ok(())
}

/// Mutable state of the alternating procedure.
struct State<'a> {
    design: Design<'a>,
    model: MtdrModel,
    /// `basis[j][i][r] = T_j(Q_{ξ_ji}(p_r))`.
    basis: Vec<Vec<Vec<f64>>>,
    /// `pred[i][r] = Σ_j α_j basis[j][i][r]`.
    pred: Vec<Vec<f64>>,
    objective: f64,
}

impl<'a> State<'a> {
    fn new(design: Design<'a>, model: MtdrModel) -> Self {
        let mut s = State {
            basis: Vec::new(),
            pred: Vec::new(),
            objective: 0.0,
            design,
            model,
        };
        s.basis = (0..s.design.dim())
            .map(|j| s.basis_for(j, &s.model.maps()[j]))
            .collect();
        s.refresh_prediction();
        s
    }

    fn basis_for(&self, j: usize, map: &MonotoneMap) -> Vec<Vec<f64>> {
        par::map_range(self.design.n(), self.design.exec, |i| {
            map.eval_many(self.design.input(j, i).values())
        })
    }

    fn refresh_prediction(&mut self) {
        let alpha = self.model.weights().as_slice().to_vec();
        let basis = &self.basis;
        let design = &self.design;
        let t = design.reference.len();
        self.pred = par::map_range(design.n(), design.exec, |i| {
            let mut out = vec![0.0; t];
            for (j, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    for (o, &b) in out.iter_mut().zip(&basis[j][i]) {
                        *o += a * b;
                    }
                }
            }
            out
        });
        self.objective = self.risk();
    }

    fn risk(&self) -> f64 {
        let design = &self.design;
        let per = par::map_range(design.n(), design.exec, |i| {
            crate::quantile::sq_distance(design.response(i).values(), &self.pred[i])
        });
        let step = design.reference.grid().step();
        per.iter().sum::<f64>() * step / design.n() as f64
    }

    /// Backfit map `k`; returns the line-search step actually taken.
    fn map_step(&mut self, k: usize, blocks: &[SubjectBlock], min_step: f64) -> Result<f64> {
        let alpha = self.model.weights().as_slice().to_vec();
        let prob = self
            .design
            .isotonic_problem(blocks, self.model.maps(), &alpha, k, min_step);
        let z = weighted_isotonic(&prob)?;
        let candidate = MonotoneMap::new(self.design.nodes, z)?;
        let new_basis = self.basis_for(k, &candidate);

        // Exact line search of the quadratic risk along old -> candidate.
        let design = &self.design;
        let basis_k = &self.basis[k];
        let pred = &self.pred;
        let ak = alpha[k];
        let parts = par::map_range(design.n(), design.exec, |i| {
            let eta = design.response(i).values();
            let mut num = 0.0;
            let mut den = 0.0;
            for r in 0..eta.len() {
                let d = ak * (new_basis[i][r] - basis_k[i][r]);
                num += (eta[r] - pred[i][r]) * d;
                den += d * d;
            }
            (num, den)
        });
        let (num, den) = parts
            .iter()
            .fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
        if !(den > 0.0) || !(num > 0.0) {
            return Ok(0.0);
        }
        let lambda = (num / den).min(1.0);
        let before = self.objective;
        let target = candidate.values().to_vec();
        self.model.maps_mut()[k].blend(&target, lambda);
        let map = self.model.maps()[k].clone();
        self.basis[k] = self.basis_for(k, &map);
        self.refresh_prediction();
        if !self.objective.is_finite() {
            return Err(MtdrError::NonFinite("objective".into()));
        }
        debug_assert!(self.objective <= before * (1.0 + 1e-12) + 1e-300);
        Ok(lambda)
    }

    fn gram_problem(&self) -> Result<SimplexLsProblem> {
        let d = self.design.dim();
        let design = &self.design;
        let basis = &self.basis;
        let parts = par::map_range(design.n(), design.exec, |i| {
            let eta = design.response(i).values();
            let mut g = vec![0.0; d * d];
            let mut c = vec![0.0; d];
            for a in 0..d {
                let ba = &basis[a][i];
                c[a] = ba.iter().zip(eta).map(|(x, y)| x * y).sum();
                for b in a..d {
                    let v: f64 = ba.iter().zip(&basis[b][i]).map(|(x, y)| x * y).sum();
                    g[a * d + b] = v;
                    g[b * d + a] = v;
                }
            }
            (g, c)
        });
        let mut g = vec![0.0; d * d];
        let mut c = vec![0.0; d];
        for (pg, pc) in &parts {
            g.iter_mut().zip(pg).for_each(|(a, b)| *a += b);
            c.iter_mut().zip(pc).for_each(|(a, b)| *a += b);
        }
        let scale = design.reference.grid().step() / design.n() as f64;
        g.iter_mut().for_each(|v| *v *= scale);
        c.iter_mut().for_each(|v| *v *= scale);
        SimplexLsProblem::new(g, c)
    }

    fn weight_step(&mut self) -> Result<()> {
        let prob = self.gram_problem()?;
        let current = self.model.weights().clone();
        let next = simplex_least_squares_from(&prob, Some(&current))?;
        let before = self.objective;
        self.model.set_weights(normalized(next));
        self.refresh_prediction();
        if self.objective > before {
            self.model.set_weights(current);
            self.refresh_prediction();
        }
        if !self.objective.is_finite() {
            return Err(MtdrError::NonFinite("objective".into()));
        }
        Ok(())
    }
}

fn normalized(w: SimplexWeights) -> SimplexWeights {
    let s: f64 = w.as_slice().iter().sum();
    SimplexWeights::from_projected(w.as_slice().iter().map(|v| v / s).collect())
}

/// Fit the model by the alternating procedure.
///
/// Maps start at the identity and the weights at the simplex least-squares
/// solution for identity maps, unless `fixed_weights` is given, in which
/// case the weights never change and only maps with positive weight are
/// fitted (with `α = (0, 1)` this is the single-map transport regression).
pub fn fit(
    data: &DataSet,
    p: usize,
    reference: &QuantileGrid,
    cfg: &FitConfig,
    fixed_weights: Option<&SimplexWeights>,
) -> Result<(MtdrModel, FitReport)> {
    cfg.validate()?;
    check_inputs(data, reference, p)?;
    if data.grid().len() != cfg.t {
        return Err(MtdrError::GridMismatch(format!(
            "data grid has t = {}, config has t = {}",
            data.grid().len(),
            cfg.t
        )));
    }
    if !reference.is_strictly_increasing() {
        return Err(MtdrError::InvalidParameter(
            "reference quantiles must be strictly increasing".into(),
        ));
    }
    if let Some(w) = fixed_weights {
        if w.len() != p + 1 {
            return Err(MtdrError::DimensionMismatch(format!(
                "{} fixed weights for p = {p}",
                w.len()
            )));
        }
    }

    let nodes = NodeGrid::new(data.domain(), cfg.t)?;
    let design = Design {
        data,
        reference,
        nodes,
        exec: cfg.execution,
    };
    let start = fixed_weights
        .cloned()
        .unwrap_or_else(|| SimplexWeights::uniform(p + 1));
    let model = MtdrModel::identity(reference.clone(), nodes, start)?;
    let mut state = State::new(design, model);
    if fixed_weights.is_none() {
        state.weight_step()?;
    }

    let blocks: Vec<Vec<SubjectBlock>> = (0..=p).map(|k| state.design.blocks(k)).collect();

    let mut trace = vec![state.objective];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < cfg.max_outer_iter {
        iterations += 1;
        let before = state.objective;
        for (k, blk) in blocks.iter().enumerate() {
            if state.model.weights()[k] < cfg.alpha_floor {
                continue;
            }
            state.map_step(k, blk, cfg.min_slope)?;
        }
        if fixed_weights.is_none() {
            state.weight_step()?;
        }
        trace.push(state.objective);
        if before <= 0.0 || before - state.objective <= cfg.rel_tol * before {
            converged = true;
            break;
        }
    }

    let report = FitReport {
        final_objective: state.objective,
        objective_trace: trace,
        iterations,
        converged,
    };
    Ok((state.model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::unit_setup;
    use crate::model::Subject;
    use crate::quantile::Domain;
    use crate::simulation::g_map;

    fn beta_like(a: f64, b: f64) -> impl Fn(f64) -> f64 {
        // Kumaraswamy quantile: closed form and strictly increasing.
        move |p: f64| (1.0 - (1.0 - p).powf(1.0 / b)).powf(1.0 / a)
    }

    #[test]
    fn noiseless_intercept_recovers_map_at_nodes() {
        let (d, pg, ng) = unit_setup(200);
        let xi0 = QuantileGrid::uniform(d, pg);
        let truth = MonotoneMap::from_fn(ng, |x| g_map(3, x).unwrap()).unwrap();
        let eta = truth.pushforward(&xi0).unwrap();
        let data = DataSet::new(vec![Subject::new("s", vec![], Some(eta))]).unwrap();
        let model = MtdrModel::identity(xi0, ng, SimplexWeights::new(vec![1.0]).unwrap()).unwrap();
        let prob = assemble_tk_subproblem(&model, &data, 0, 1e-8).unwrap();
        for r in 0..200 {
            assert!((prob.y[r] - truth.values()[r]).abs() < 1e-12, "node {r}");
        }
        let z = weighted_isotonic(&prob).unwrap();
        for (r, (a, b)) in z.iter().zip(truth.values()).enumerate() {
            assert!((a - b).abs() < 1e-12, "node {r}");
        }
    }

    #[test]
    fn two_subject_targets_average() {
        // p = 1, alpha = (0.5, 0.5), identity maps, both subjects share the
        // predictor, so node masses agree and targets average.
        let (d, pg, ng) = unit_setup(50);
        let u = QuantileGrid::uniform(d, pg);
        let e1 = QuantileGrid::from_fn(d, pg, |p| p * p).unwrap();
        let e2 = QuantileGrid::from_fn(d, pg, |p| p.sqrt()).unwrap();
        let data = DataSet::new(vec![
            Subject::new("a", vec![u.clone()], Some(e1.clone())),
            Subject::new("b", vec![u.clone()], Some(e2.clone())),
        ])
        .unwrap();
        let model =
            MtdrModel::identity(u.clone(), ng, SimplexWeights::new(vec![0.5, 0.5]).unwrap())
                .unwrap();
        let prob = assemble_tk_subproblem(&model, &data, 1, 1e-8).unwrap();
        for r in 0..50 {
            let x = ng.node(r);
            let y1 = (e1.quantile_at(x) - 0.5 * x) / 0.5;
            let y2 = (e2.quantile_at(x) - 0.5 * x) / 0.5;
            assert!((prob.y[r] - 0.5 * (y1 + y2)).abs() < 1e-12);
            assert!((prob.w[r] - 1.0 / 50.0).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_residual_targets() {
        let (d, pg, ng) = unit_setup(40);
        let u = QuantileGrid::uniform(d, pg);
        let c = 0.3;
        let eta = QuantileGrid::from_fn(d, pg, |_| c).unwrap();
        let data = DataSet::new(vec![Subject::new("a", vec![], Some(eta))]).unwrap();
        let model = MtdrModel::identity(u, ng, SimplexWeights::new(vec![1.0]).unwrap()).unwrap();
        let prob = assemble_tk_subproblem(&model, &data, 0, 1e-8).unwrap();
        for (y, w) in prob.y.iter().zip(&prob.w) {
            if *w > 0.0 {
                assert!((y - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn weight_floor_is_enforced() {
        let (d, pg, ng) = unit_setup(20);
        let u = QuantileGrid::uniform(d, pg);
        let data = DataSet::new(vec![Subject::new("a", vec![u.clone()], Some(u.clone()))]).unwrap();
        let model = MtdrModel::identity(u, ng, SimplexWeights::vertex(2, 1)).unwrap();
        assert!(matches!(
            assemble_tk_subproblem(&model, &data, 0, 1e-8),
            Err(MtdrError::WeightTooSmall { index: 0, .. })
        ));
    }

    fn noiseless_single(n: usize, t: usize, alpha1: f64) -> (DataSet, MtdrModel) {
        let (d, pg, ng) = unit_setup(t);
        let xi0 = QuantileGrid::uniform(d, pg);
        let truth = MtdrModel::new(
            xi0.clone(),
            vec![
                MonotoneMap::from_fn(ng, |x| g_map(4, x).unwrap()).unwrap(),
                MonotoneMap::from_fn(ng, |x| g_map(3, x).unwrap()).unwrap(),
            ],
            SimplexWeights::new(vec![1.0 - alpha1, alpha1]).unwrap(),
        )
        .unwrap();
        let subjects = (0..n)
            .map(|i| {
                let a = 1.0 + 4.0 * ((i * 37 % n) as f64 + 0.5) / n as f64;
                let b = 1.0 + 4.0 * ((i * 61 % n) as f64 + 0.5) / n as f64;
                let xi = QuantileGrid::from_fn(d, pg, beta_like(a, b)).unwrap();
                let eta = truth.predict(std::slice::from_ref(&xi)).unwrap();
                Subject::new(format!("s{i}"), vec![xi], Some(eta))
            })
            .collect();
        (DataSet::new(subjects).unwrap(), truth)
    }

    #[test]
    fn noiseless_recovery_single_predictor() {
        let (data, truth) = noiseless_single(100, 400, 0.5);
        let cfg = FitConfig {
            t: 400,
            ..FitConfig::default()
        };
        let (model, report) = fit(&data, 1, truth.reference(), &cfg, None).unwrap();
        assert!(report.is_nonincreasing(1e-6));
        let da = (model.weights()[1] - 0.5).abs();
        assert!(da < 0.01, "alpha error {da}");
        for j in 0..2 {
            let e = model.maps()[j].l2_distance(&truth.maps()[j]).unwrap();
            assert!(e < 0.02, "map {j} error {e}");
        }
        let theta = crate::model::predictive_seminorm(&model, &truth, &data).unwrap();
        assert!(theta < 5e-3, "theta error {theta}");
    }

    #[test]
    fn fixed_weights_keep_alpha() {
        let (data, truth) = noiseless_single(40, 200, 1.0);
        let cfg = FitConfig {
            t: 200,
            ..FitConfig::default()
        };
        let fixed = SimplexWeights::vertex(2, 1);
        let (model, report) = fit(&data, 1, truth.reference(), &cfg, Some(&fixed)).unwrap();
        assert_eq!(model.weights(), &fixed);
        assert_eq!(model.maps()[0], MonotoneMap::identity(model.node_grid()));
        assert!(report.final_objective < 1e-6, "{}", report.final_objective);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let (data, truth) = noiseless_single(30, 100, 0.4);
        let mut cfg = FitConfig {
            t: 100,
            max_outer_iter: 15,
            ..FitConfig::default()
        };
        let (a, ra) = fit(&data, 1, truth.reference(), &cfg, None).unwrap();
        cfg.execution = Execution::Sequential;
        let (b, rb) = fit(&data, 1, truth.reference(), &cfg, None).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
    }

    #[test]
    fn input_errors() {
        let (data, truth) = noiseless_single(5, 50, 0.5);
        let cfg = FitConfig {
            t: 50,
            ..FitConfig::default()
        };
        assert!(fit(&data, 2, truth.reference(), &cfg, None).is_err());
        let wrong_t = FitConfig::default();
        assert!(fit(&data, 1, truth.reference(), &wrong_t, None).is_err());
        let flat = QuantileGrid::from_fn(Domain::unit(), data.grid(), |_| 0.5).unwrap();
        assert!(fit(&data, 1, &flat, &cfg, None).is_err());
        let bad = SimplexWeights::uniform(3);
        assert!(fit(&data, 1, truth.reference(), &cfg, Some(&bad)).is_err());
    }
}
