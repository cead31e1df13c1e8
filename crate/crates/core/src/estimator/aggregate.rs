use std::collections::BTreeSet;
use std::io::Write;

use rayon::prelude::*;

use super::prepared::PreparedObservation;
use super::{penalty, Candidate, PriorSpec};
use crate::coeffs::{format_real, CoefficientMap};
use crate::error::{Error, Result};
use crate::multiindex::Support;
use crate::sequence::SequenceObservation;

/// Largest candidate family `exact_aggregate` will enumerate by default.
pub const DEFAULT_CANDIDATE_CEILING: u64 = 1_000_000;

/// Candidates with normalized log-weights (`logsumexp = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedEnsemble {
    pub candidates: Vec<Candidate>,
    pub log_weights: Vec<f64>,
}

impl WeightedEnsemble {
    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// Position of the heaviest candidate; the earliest one wins ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.log_weights.iter().enumerate() {
            if w > self.log_weights[best] {
                best = i;
            }
        }
        best
    }

    /// `candidate_id,m,s_max,t_vector,log_weight`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["candidate_id", "m", "s_max", "t_vector", "log_weight"])?;
        for (i, (c, lw)) in self.candidates.iter().zip(&self.log_weights).enumerate() {
            w.write_record([
                i.to_string(),
                c.m().to_string(),
                c.s_max().to_string(),
                c.to_string(),
                format_real(*lw),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub ensemble: WeightedEnsemble,
    pub estimate: CoefficientMap,
}

/// Stable `log Σ exp(x_i)`; `-∞` when every term is `-∞`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// The data-independent part of the aggregate: candidates, their prior
/// log-masses and penalties, ready to be applied to many observations.
#[derive(Debug, Clone)]
pub struct AggregationPlan {
    candidates: Vec<Candidate>,
    /// `log π_c − pen_c / (4ε²)`
    offsets: Vec<f64>,
    pool: Vec<Support>,
    epsilon: f64,
}

impl AggregationPlan {
    pub fn new(candidates: Vec<Candidate>, prior: &PriorSpec, epsilon: f64) -> Result<Self> {
        if candidates.is_empty() {
            return Err(Error::Domain("empty candidate set".into()));
        }
        let temp = 4.0 * epsilon * epsilon;
        let offsets = candidates
            .par_iter()
            .map(|c| prior.log_prior(c) - penalty(c, epsilon) / temp)
            .collect();
        let pool: BTreeSet<Support> = candidates
            .iter()
            .flat_map(|c| c.structure().supports().iter().copied())
            .collect();
        Ok(AggregationPlan {
            candidates,
            offsets,
            pool: pool.into_iter().collect(),
            epsilon,
        })
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    /// Distinct supports used by the candidates.
    pub fn pool(&self) -> &[Support] {
        &self.pool
    }

    pub fn prepare(&self, obs: &SequenceObservation) -> PreparedObservation {
        PreparedObservation::new(obs, &self.pool)
    }

    /// Normalized log-weights and the aggregate estimate.
    pub fn run(&self, obs: &SequenceObservation) -> Result<(Vec<f64>, CoefficientMap)> {
        if obs.epsilon != self.epsilon {
            return Err(Error::Domain(format!(
                "plan built for ε={} applied to an observation with ε={}",
                self.epsilon, obs.epsilon
            )));
        }
        let prep = self.prepare(obs);
        let temp = 4.0 * self.epsilon * self.epsilon;
        let mut lw: Vec<f64> = self
            .candidates
            .par_iter()
            .zip(&self.offsets)
            .map(|(c, off)| off - prep.residual(c) / temp)
            .collect();
        let lse = log_sum_exp(&lw);
        if !lse.is_finite() {
            return Err(Error::Domain("no candidate has positive weight".into()));
        }
        lw.iter_mut().for_each(|w| *w -= lse);
        let mut acc = prep.accumulator();
        for (c, w) in self.candidates.iter().zip(&lw) {
            acc.add(c, w.exp());
        }
        Ok((lw, acc.finish()))
    }

    pub fn estimate(&self, obs: &SequenceObservation) -> Result<CoefficientMap> {
        self.run(obs).map(|r| r.1)
    }
}

/// The exponentially weighted aggregate over an explicit candidate list,
/// with weights `∝ exp{−(|Y − θ̂_c|² + pen_c)/(4ε²)} π_c`.
pub fn exact_aggregate(
    obs: &SequenceObservation,
    candidates: Vec<Candidate>,
    prior: &PriorSpec,
) -> Result<Aggregate> {
    let plan = AggregationPlan::new(candidates, prior, obs.epsilon)?;
    let (log_weights, estimate) = plan.run(obs)?;
    Ok(Aggregate {
        ensemble: WeightedEnsemble {
            candidates: plan.candidates,
            log_weights,
        },
        estimate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::{projection_estimate, CandidateSpace};
    use crate::model::FamilyRule;
    use crate::multiindex::{enumerate_indices, IndexBox, MultiIndex};
    use crate::rng::GaussianField;
    use crate::sequence::observe_on;

    fn s(c: &[usize]) -> Support {
        Support::from_coords(c).unwrap()
    }

    fn obs(eps: f64, seed: u64) -> SequenceObservation {
        let idx = enumerate_indices(&IndexBox::full(3, 2)).unwrap();
        let truth = CoefficientMap::from_pairs(
            3,
            [
                (MultiIndex::axis(3, 1, 1), 0.5),
                (MultiIndex::axis(3, 3, -2), 0.3),
            ],
        )
        .unwrap();
        observe_on(&truth, eps, 2, idx, seed, &GaussianField { seed }).unwrap()
    }

    #[test]
    fn singleton_gets_everything() {
        let o = obs(0.2, 1);
        let c = Candidate::from_pairs(3, 1, FamilyRule::Disjoint, vec![(s(&[1]), 2)]).unwrap();
        let agg = exact_aggregate(&o, vec![c.clone()], &PriorSpec::new(3, 3)).unwrap();
        assert_eq!(agg.ensemble.log_weights, vec![0.0]);
        assert_eq!(agg.estimate, projection_estimate(&o, &c));
    }

    #[test]
    fn empty_set_is_an_error() {
        assert!(matches!(
            exact_aggregate(&obs(0.2, 1), vec![], &PriorSpec::new(3, 3)),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn symmetric_pair_splits_evenly() {
        // pure noise with Y_(1,0,0) and Y_(0,1,0) equal: {1}=1 and {2}=1 tie
        let y = vec![
            (MultiIndex::zero(3), 0.1),
            (MultiIndex::axis(3, 1, 1), 0.4),
            (MultiIndex::axis(3, 2, 1), 0.4),
        ];
        let o = SequenceObservation::from_entries(3, 0.2, 1, 0, y).unwrap();
        let a = Candidate::from_pairs(3, 1, FamilyRule::Disjoint, vec![(s(&[1]), 1)]).unwrap();
        let b = Candidate::from_pairs(3, 1, FamilyRule::Disjoint, vec![(s(&[2]), 1)]).unwrap();
        let agg = exact_aggregate(&o, vec![a, b], &PriorSpec::new(3, 2)).unwrap();
        let w = agg.ensemble.weights();
        assert!((w[0] - 0.5).abs() < 1e-15 && (w[1] - 0.5).abs() < 1e-15);
        assert_eq!(agg.ensemble.argmax(), 0);
    }

    /// Spreadsheet-style evaluation of the weights for two candidates.
    #[test]
    fn two_candidate_hand_weights() {
        let y = vec![
            (MultiIndex::zero(1), 1.0),
            (MultiIndex::new(vec![1]), 0.5),
            (MultiIndex::new(vec![-1]), -0.2),
        ];
        let eps = 0.5;
        let o = SequenceObservation::from_entries(1, eps, 1, 0, y).unwrap();
        let c0 = Candidate::constant(1);
        let c1 = Candidate::from_pairs(1, 1, FamilyRule::Disjoint, vec![(s(&[1]), 1)]).unwrap();
        let prior = PriorSpec::new(1, 2);
        let agg = exact_aggregate(&o, vec![c0, c1], &prior).unwrap();
        // H_1 = 1.75; π_0 = 1/1.75; π_1 = 2^{-1}/(1.75·2·1)
        let r0: f64 = 0.25 + 0.04;
        let (p0, p1): (f64, f64) = (2.0 * 0.25, 2.0 * 0.25 * 3.0);
        let u0 = (-(r0 + p0) / 1.0).exp() / 1.75;
        let u1 = (-p1 / 1.0f64).exp() * 0.5 / (1.75 * 2.0);
        let w = agg.ensemble.weights();
        assert!((w[0] - u0 / (u0 + u1)).abs() < 1e-12);
        assert!((w[1] - u1 / (u0 + u1)).abs() < 1e-12);
        let want1 = 0.5 * w[1];
        assert!((agg.estimate.get(&MultiIndex::new(vec![1])) - want1).abs() < 1e-12);
    }

    #[test]
    fn weights_normalized_and_hull() {
        let o = obs(0.3, 9);
        let sp = CandidateSpace::new(3, 2, 2, 2, FamilyRule::Unrestricted).unwrap();
        let all = sp.enumerate(DEFAULT_CANDIDATE_CEILING).unwrap();
        let agg = exact_aggregate(&o, all.clone(), &PriorSpec::from_epsilon(3, 0.3, 2)).unwrap();
        let sum: f64 = agg.ensemble.weights().iter().sum();
        assert!((sum - 1.0).abs() < 1e-10);
        for (j, y) in o.entries() {
            let v = agg.estimate.get(j);
            let (lo, hi) = (y.min(0.0), y.max(0.0));
            assert!(v >= lo && v <= hi, "{j}");
        }
    }

    #[test]
    fn shift_equivariance() {
        let o = obs(0.3, 9);
        let sp = CandidateSpace::new(3, 1, 3, 2, FamilyRule::Disjoint).unwrap();
        let all = sp.enumerate(DEFAULT_CANDIDATE_CEILING).unwrap();
        let prior = PriorSpec::from_epsilon(3, 0.3, 2);
        let a = exact_aggregate(&o, all.clone(), &prior).unwrap().estimate;
        let mut shifted = o.clone();
        shifted.shift_constant(1.25);
        let b = exact_aggregate(&shifted, all, &prior).unwrap().estimate;
        let zero = MultiIndex::zero(3);
        assert_eq!(b.get(&zero), a.get(&zero) + 1.25);
        for (j, v) in &a {
            if !j.is_zero() {
                assert_eq!(b.get(j), *v);
            }
        }
    }

    #[test]
    fn csv_dump_shape() {
        let o = obs(0.3, 2);
        let sp = CandidateSpace::new(3, 2, 1, 1, FamilyRule::Disjoint).unwrap();
        let agg = exact_aggregate(&o, sp.enumerate(100).unwrap(), &PriorSpec::new(3, 2)).unwrap();
        let mut buf = Vec::new();
        agg.ensemble.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("candidate_id,m,s_max,t_vector,log_weight")
        );
        assert!(lines.next().unwrap().starts_with("0,0,0,const,"));
        assert_eq!(text.lines().count(), 1 + agg.ensemble.candidates.len());
    }
}
