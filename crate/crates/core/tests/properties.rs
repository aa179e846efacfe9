use mtdr::simulation::g_map;
use mtdr::{
    predictive_seminorm, DataSet, Domain, MonotoneMap, MtdrModel, NodeGrid, ProbGrid, QuantileGrid,
    SimplexWeights, Subject,
};
use proptest::prelude::*;

const T: usize = 24;

fn increments(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(0.0f64..1.0, len)
}

/// A nondecreasing vector in [s0, s1] built from cumulative increments.
fn monotone(inc: &[f64], domain: Domain) -> Vec<f64> {
    let total: f64 = inc.iter().sum::<f64>() + 1.0;
    let mut acc = 0.5;
    inc.iter()
        .map(|v| {
            acc += v;
            domain.from_unit(acc / total)
        })
        .collect()
}

fn domain() -> impl Strategy<Value = Domain> {
    (-5.0f64..5.0, 0.1f64..10.0).prop_map(|(a, w)| Domain::new(a, a + w).unwrap())
}

fn weights(len: usize) -> impl Strategy<Value = SimplexWeights> {
    proptest::collection::vec(0.0f64..1.0, len).prop_map(|v| {
        let s: f64 = v.iter().sum();
        if s > 0.0 {
            SimplexWeights::new(v.iter().map(|x| x / s).collect()).unwrap()
        } else {
            SimplexWeights::uniform(v.len())
        }
    })
}

fn model(d: Domain, maps: &[Vec<f64>], ref_inc: &[f64], w: SimplexWeights) -> MtdrModel {
    let nodes = NodeGrid::new(d, T).unwrap();
    let grid = ProbGrid::new(T).unwrap();
    let mut r = monotone(ref_inc, d);
    // Strictly increasing reference.
    for (i, v) in r.iter_mut().enumerate() {
        *v = (*v + d.from_unit((i as f64 + 0.5) / T as f64)) / 2.0;
    }
    let reference = QuantileGrid::new(d, grid, r).unwrap();
    let maps = maps
        .iter()
        .map(|inc| MonotoneMap::new(nodes, monotone(inc, d)).unwrap())
        .collect();
    MtdrModel::new(reference, maps, w).unwrap()
}

fn subjects(d: Domain, preds: &[Vec<Vec<f64>>]) -> DataSet {
    let grid = ProbGrid::new(T).unwrap();
    DataSet::new(
        preds
            .iter()
            .enumerate()
            .map(|(i, ps)| {
                let q = ps
                    .iter()
                    .map(|inc| QuantileGrid::new(d, grid, monotone(inc, d)).unwrap())
                    .collect();
                Subject::new(i.to_string(), q, None)
            })
            .collect(),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn maps_are_monotone_and_pinned(d in domain(), inc in increments(T), xs in proptest::collection::vec(0.0f64..1.0, 1..40)) {
        let map = MonotoneMap::new(NodeGrid::new(d, T).unwrap(), monotone(&inc, d)).unwrap();
        prop_assert_eq!(map.eval(d.s0).unwrap(), d.s0);
        prop_assert_eq!(map.eval(d.s1).unwrap(), d.s1);
        let mut xs: Vec<f64> = xs.iter().map(|u| d.from_unit(*u)).collect();
        xs.sort_by(f64::total_cmp);
        let ys = map.eval_many(&xs);
        prop_assert!(ys.windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(ys.iter().all(|y| d.contains(*y)));
        for (x, y) in xs.iter().zip(&ys) {
            prop_assert_eq!(map.eval(*x).unwrap(), *y);
        }
    }

    #[test]
    fn pushforward_is_a_valid_quantile_grid(d in domain(), inc in increments(T), q in increments(T)) {
        let map = MonotoneMap::new(NodeGrid::new(d, T).unwrap(), monotone(&inc, d)).unwrap();
        let mu = QuantileGrid::new(d, ProbGrid::new(T).unwrap(), monotone(&q, d)).unwrap();
        let pushed = map.pushforward(&mu).unwrap();
        prop_assert!(pushed.values().windows(2).all(|w| w[1] >= w[0]));
        prop_assert!(pushed.values().iter().all(|v| d.contains(*v)));
    }

    #[test]
    fn predictions_are_valid_for_any_model_state(
        d in domain(),
        maps in proptest::collection::vec(increments(T), 3),
        r in increments(T),
        w in weights(3),
        preds in proptest::collection::vec(proptest::collection::vec(increments(T), 2), 1..5),
    ) {
        let m = model(d, &maps, &r, w);
        let data = subjects(d, &preds);
        for q in m.predict_all(&data).unwrap() {
            prop_assert!(q.values().windows(2).all(|w| w[1] >= w[0]));
            prop_assert!(q.values().iter().all(|v| d.contains(*v)));
        }
    }

    #[test]
    fn predictive_seminorm_is_a_symmetric_seminorm(
        maps_a in proptest::collection::vec(increments(T), 2),
        maps_b in proptest::collection::vec(increments(T), 2),
        maps_c in proptest::collection::vec(increments(T), 2),
        r in increments(T),
        wa in weights(2), wb in weights(2), wc in weights(2),
        preds in proptest::collection::vec(proptest::collection::vec(increments(T), 1), 1..5),
    ) {
        let d = Domain::unit();
        let a = model(d, &maps_a, &r, wa);
        let b = model(d, &maps_b, &r, wb);
        let c = model(d, &maps_c, &r, wc);
        let data = subjects(d, &preds);
        let ab = predictive_seminorm(&a, &b, &data).unwrap();
        prop_assert_eq!(ab, predictive_seminorm(&b, &a, &data).unwrap());
        prop_assert_eq!(predictive_seminorm(&a, &a, &data).unwrap(), 0.0);
        let ac = predictive_seminorm(&a, &c, &data).unwrap();
        let cb = predictive_seminorm(&c, &b, &data).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn perturbation_maps_are_monotone_and_pinned(k in -20i32..=20, xs in proptest::collection::vec(0.0f64..=1.0, 2..30)) {
        let mut xs = xs;
        xs.sort_by(f64::total_cmp);
        let ys: Vec<f64> = xs.iter().map(|x| g_map(k, *x).unwrap()).collect();
        prop_assert!(ys.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        prop_assert!((g_map(k, 0.0).unwrap()).abs() < 1e-15);
        prop_assert!((g_map(k, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn weights_permute_with_predictors(
        maps in proptest::collection::vec(increments(T), 3),
        r in increments(T),
        w in weights(3),
        preds in proptest::collection::vec(proptest::collection::vec(increments(T), 2), 1..4),
    ) {
        let d = Domain::unit();
        let m = model(d, &maps, &r, w.clone());
        let swapped_model = m
            .with_maps(vec![m.maps()[0].clone(), m.maps()[2].clone(), m.maps()[1].clone()])
            .unwrap()
            .with_weights(SimplexWeights::new(vec![w[0], w[2], w[1]]).unwrap())
            .unwrap();
        let data = subjects(d, &preds);
        let swapped = data.permute_predictors(&[1, 0]).unwrap();
        let a = m.predict_all(&data).unwrap();
        let b = swapped_model.predict_all(&swapped).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.wasserstein(y).unwrap() < 1e-12);
        }
    }
}
