//! Synthetic age-at-death style data: two left-skewed predictor
//! distributions per unit (two earlier cohorts) and a response built from
//! them by the regression model, observed through raw samples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, g_unit, BetaLaw, NoiseSpec};
use crate::error::Result;
use crate::io::RawSubject;
use crate::model::{DataSet, Subject};
use crate::quantile::{Domain, ProbGrid, QuantileGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MortalitySpec {
    pub n: usize,
    pub m: usize,
    pub t: usize,
    pub seed: u64,
    pub domain: Domain,
    pub noise: NoiseSpec,
    /// Reference, first and second predictor weights.
    pub alpha: [f64; 3],
}

impl Default for MortalitySpec {
    fn default() -> Self {
        MortalitySpec {
            n: 34,
            m: 1000,
            t: 200,
            seed: 2010,
            domain: Domain { s0: 0.0, s1: 110.0 },
            noise: NoiseSpec::magnitude(16).expect("symmetric"),
            alpha: [0.1, 0.8, 0.1],
        }
    }
}

/// Returns the observed data set and the raw draws it was built from.
pub fn mortality_like(spec: &MortalitySpec) -> Result<(DataSet, Vec<RawSubject>)> {
    let d = spec.domain;
    let grid = ProbGrid::new(spec.t)?;
    let alpha = crate::solvers::SimplexWeights::new(spec.alpha.to_vec())?;
    let alpha = alpha.as_slice();
    let mut subjects = Vec::with_capacity(spec.n);
    let mut raw = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, i as u64));
        let male = BetaLaw::new(rng.random_range(6.0..9.0), rng.random_range(1.8..2.6))?;
        let female = BetaLaw::new(rng.random_range(8.0..11.0), rng.random_range(1.8..2.4))?;
        let k = spec.noise.draw(&mut rng);
        let draws = |law: &BetaLaw, rng: &mut ChaCha8Rng| {
            let mut u: Vec<f64> = (0..spec.m).map(|_| rng.random::<f64>()).collect();
            u.sort_by(f64::total_cmp);
            (law.quantiles_sorted(&u), u)
        };
        let (xm, _) = draws(&male, &mut rng);
        let (xf, _) = draws(&female, &mut rng);
        let (qm, w) = draws(&male, &mut rng);
        let qf = female.quantiles_sorted(&w);
        let eta: Vec<f64> = w
            .iter()
            .zip(qm.iter().zip(&qf))
            .map(|(&v, (&a, &b))| {
                let s =
                    alpha[0] * g_unit(2, v) + alpha[1] * g_unit(-1, a) + alpha[2] * g_unit(1, b);
                d.from_unit(g_unit(k, s.clamp(0.0, 1.0)))
            })
            .collect();
        let xm: Vec<f64> = xm.into_iter().map(|x| d.from_unit(x)).collect();
        let xf: Vec<f64> = xf.into_iter().map(|x| d.from_unit(x)).collect();
        let id = format!("unit{:02}", i + 1);
        subjects.push(Subject::new(
            id.clone(),
            vec![
                QuantileGrid::from_samples(&xm, d, grid)?,
                QuantileGrid::from_samples(&xf, d, grid)?,
            ],
            Some(QuantileGrid::from_samples(&eta, d, grid)?),
        ));
        raw.push(RawSubject {
            id,
            predictors: vec![xm, xf],
            response: Some(eta),
        });
    }
    Ok((DataSet::new(subjects)?, raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_determinism() {
        let spec = MortalitySpec {
            m: 100,
            ..MortalitySpec::default()
        };
        let (a, ra) = mortality_like(&spec).unwrap();
        let (b, _) = mortality_like(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 34);
        assert_eq!(a.p(), 2);
        assert_eq!(ra.len(), 34);
        for s in a.subjects() {
            // Most mass sits at old ages.
            let median = s.predictors[0].quantile_at(0.5);
            assert!(median > 55.0 && median < 105.0, "{median}");
        }
    }
}
