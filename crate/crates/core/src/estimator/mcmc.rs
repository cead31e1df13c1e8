use std::collections::{BTreeMap, HashMap};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::prepared::PreparedObservation;
use super::{penalty, Candidate, CandidateSpace, PriorSpec};
use crate::coeffs::CoefficientMap;
use crate::error::{Error, Result};
use crate::multiindex::Support;
use crate::rng::chacha;
use crate::sequence::SequenceObservation;

/// Chain length, burn-in and move probabilities of the Metropolis–Hastings
/// sampler over `(t, η)`.
#[derive(Debug, Clone, PartialEq)]
pub struct McmcConfig {
    /// Post-burn-in steps averaged into the estimate.
    pub steps: u64,
    pub burn_in: u64,
    /// Add or remove one support.
    pub p_toggle: f64,
    /// Replace one support by a uniformly drawn one.
    pub p_swap: f64,
    /// Move one bandwidth by ±1.
    pub p_bandwidth: f64,
    /// Batches used for the batch-means standard error.
    pub batches: u64,
    pub seed: u64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            steps: 100_000,
            burn_in: 10_000,
            p_toggle: 0.4,
            p_swap: 0.2,
            p_bandwidth: 0.4,
            batches: 20,
            seed: 0,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::Domain(
                "the chain needs at least one post-burn-in step".into(),
            ));
        }
        let p = [self.p_toggle, self.p_swap, self.p_bandwidth];
        if p.iter().any(|&x| !(x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
            return Err(Error::Parameter(format!(
                "move probabilities must be nonnegative and sum to 1, got {p:?}"
            )));
        }
        if self.batches == 0 {
            return Err(Error::Parameter("batches must be positive".into()));
        }
        Ok(())
    }
}

type State = Vec<(Support, u32)>;

/// Metropolis–Hastings chain targeting the aggregate's weights on a
/// candidate space.
pub struct McmcChain<'a> {
    space: &'a CandidateSpace,
    prior: &'a PriorSpec,
    prep: PreparedObservation,
    pool: Vec<Support>,
    config: McmcConfig,
    rng: ChaCha8Rng,
    state: State,
    log_target: f64,
    cache: HashMap<State, f64>,
    accepted: u64,
    proposed: u64,
}

impl<'a> McmcChain<'a> {
    /// Starts at the constant candidate.
    pub fn new(
        obs: &SequenceObservation,
        space: &'a CandidateSpace,
        prior: &'a PriorSpec,
        config: McmcConfig,
    ) -> Result<Self> {
        config.validate()?;
        if obs.d != space.d {
            return Err(Error::Domain(format!(
                "observation has d={}, space has d={}",
                obs.d, space.d
            )));
        }
        let pool = space.pool();
        let prep = PreparedObservation::new(obs, &pool);
        let rng = chacha(config.seed);
        let mut chain = McmcChain {
            space,
            prior,
            prep,
            pool,
            config,
            rng,
            state: Vec::new(),
            log_target: 0.0,
            cache: HashMap::new(),
            accepted: 0,
            proposed: 0,
        };
        chain.log_target = chain
            .target(&Vec::new())
            .expect("constant candidate is valid");
        Ok(chain)
    }

    fn candidate(&self, state: &State) -> Option<Candidate> {
        if state.is_empty() {
            return Some(Candidate::constant(self.space.d));
        }
        if state.len() > self.space.m_max {
            return None;
        }
        Candidate::from_pairs(
            self.space.d,
            self.space.s_max,
            self.space.rule,
            state.clone(),
        )
        .ok()
    }

    /// Unnormalized log weight, or `None` outside the space.
    fn target(&mut self, state: &State) -> Option<f64> {
        if let Some(&v) = self.cache.get(state) {
            return Some(v);
        }
        let c = self.candidate(state)?;
        let eps = self.prep.epsilon();
        let v = self.prior.log_prior(&c)
            - (self.prep.residual(&c) + penalty(&c, eps)) / (4.0 * eps * eps);
        self.cache.insert(state.clone(), v);
        Some(v)
    }

    /// Proposal and `log q(x|y) − log q(y|x)`.
    fn propose(&mut self) -> Option<(State, f64)> {
        let u: f64 = self.rng.random();
        let n = self.pool.len();
        let g = (self.space.cutoff as f64 + 1.0).ln();
        let mut next = self.state.clone();
        if u < self.config.p_toggle {
            let v = self.pool[self.rng.random_range(0..n)];
            match next.iter().position(|p| p.0 == v) {
                Some(i) => {
                    next.remove(i);
                    Some((next, -g))
                }
                None => {
                    let t = self.rng.random_range(0..=self.space.cutoff);
                    let at = next.partition_point(|p| p.0 < v);
                    next.insert(at, (v, t));
                    Some((next, g))
                }
            }
        } else if u < self.config.p_toggle + self.config.p_swap {
            if next.is_empty() {
                return None;
            }
            let l = self.rng.random_range(0..next.len());
            let v = self.pool[self.rng.random_range(0..n)];
            if next.iter().any(|p| p.0 == v) {
                return None;
            }
            let t = next.remove(l).1;
            let at = next.partition_point(|p| p.0 < v);
            next.insert(at, (v, t));
            Some((next, 0.0))
        } else {
            if next.is_empty() {
                return None;
            }
            let l = self.rng.random_range(0..next.len());
            let up: bool = self.rng.random();
            let t = next[l].1;
            next[l].1 = match (up, t) {
                (true, t) if t < self.space.cutoff => t + 1,
                (false, t) if t > 0 => t - 1,
                _ => return None,
            };
            Some((next, 0.0))
        }
    }

    /// One Metropolis–Hastings transition.
    pub fn step(&mut self) {
        self.proposed += 1;
        let Some((next, log_q_ratio)) = self.propose() else {
            return;
        };
        let Some(lt) = self.target(&next) else { return };
        let log_alpha = lt - self.log_target + log_q_ratio;
        if log_alpha >= 0.0 || self.rng.random::<f64>().ln() < log_alpha {
            self.state = next;
            self.log_target = lt;
            self.accepted += 1;
        }
    }

    pub fn current(&self) -> Candidate {
        self.candidate(&self.state)
            .expect("chain stays in the space")
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct McmcResult {
    /// Post-burn-in average of the visited projection estimates.
    pub estimate: CoefficientMap,
    /// Visit counts per candidate, in candidate order of their support/bandwidth lists.
    pub visits: Vec<(Candidate, u64)>,
    pub acceptance_rate: f64,
    /// Batch-means standard error of each coefficient of `estimate`.
    pub stderr: CoefficientMap,
    /// `sqrt(Σ_j stderr_j²)`
    pub stderr_l2: f64,
    pub config: McmcConfig,
}

impl McmcResult {
    /// Visit frequencies, normalized.
    pub fn frequencies(&self) -> Vec<(Candidate, f64)> {
        let total = self.config.steps as f64;
        self.visits
            .iter()
            .map(|(c, n)| (c.clone(), *n as f64 / total))
            .collect()
    }
}

/// Runs one chain and averages projection estimates over the post-burn-in
/// trajectory.
pub fn mcmc_aggregate(
    obs: &SequenceObservation,
    space: &CandidateSpace,
    prior: &PriorSpec,
    config: McmcConfig,
) -> Result<McmcResult> {
    let mut chain = McmcChain::new(obs, space, prior, config.clone())?;
    for _ in 0..config.burn_in {
        chain.step();
    }
    let batches = config.batches.min(config.steps);
    let per = config.steps / batches;
    let mut counts: Vec<BTreeMap<State, u64>> = vec![BTreeMap::new(); batches as usize];
    for k in 0..config.steps {
        chain.step();
        let b = (k / per).min(batches - 1) as usize;
        *counts[b].entry(chain.state.clone()).or_insert(0) += 1;
    }

    let mut total: BTreeMap<State, u64> = BTreeMap::new();
    for c in &counts {
        for (s, n) in c {
            *total.entry(s.clone()).or_insert(0) += n;
        }
    }
    let average = |hist: &BTreeMap<State, u64>| {
        let len: u64 = hist.values().sum();
        let mut acc = chain.prep.accumulator();
        for (s, n) in hist {
            acc.add(
                &chain.candidate(s).expect("visited"),
                *n as f64 / len as f64,
            );
        }
        acc.finish()
    };
    let estimate = average(&total);
    let batch_means: Vec<CoefficientMap> = counts.iter().map(&average).collect();

    let mut stderr = CoefficientMap::new(obs.d);
    let mut stderr_sq = 0.0;
    if batches >= 2 {
        let b = batches as f64;
        for j in estimate.indices() {
            let mean = batch_means.iter().map(|m| m.get(j)).sum::<f64>() / b;
            let var = batch_means
                .iter()
                .map(|m| (m.get(j) - mean).powi(2))
                .sum::<f64>()
                / (b - 1.0);
            let se2 = var / b;
            stderr_sq += se2;
            stderr.insert(j.clone(), se2.sqrt())?;
        }
    }
    let visits = total
        .into_iter()
        .map(|(s, n)| (chain.candidate(&s).expect("visited"), n))
        .collect();
    Ok(McmcResult {
        estimate,
        visits,
        acceptance_rate: chain.acceptance_rate(),
        stderr,
        stderr_l2: stderr_sq.sqrt(),
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::exact_aggregate;
    use crate::model::FamilyRule;
    use crate::multiindex::{enumerate_indices, IndexBox, MultiIndex};
    use crate::rng::GaussianField;
    use crate::sequence::observe_on;

    fn obs() -> SequenceObservation {
        let idx = enumerate_indices(&IndexBox::full(3, 2)).unwrap();
        let truth = CoefficientMap::from_pairs(
            3,
            [
                (MultiIndex::axis(3, 1, 1), 0.6),
                (MultiIndex::axis(3, 2, 2), -0.4),
            ],
        )
        .unwrap();
        observe_on(&truth, 0.3, 2, idx, 3, &GaussianField { seed: 3 }).unwrap()
    }

    #[test]
    fn zero_steps_rejected() {
        let sp = CandidateSpace::new(3, 1, 3, 2, FamilyRule::Disjoint).unwrap();
        let prior = PriorSpec::new(3, 3);
        let cfg = McmcConfig {
            steps: 0,
            ..McmcConfig::default()
        };
        assert!(matches!(
            mcmc_aggregate(&obs(), &sp, &prior, cfg),
            Err(Error::Domain(_))
        ));
        let cfg = McmcConfig {
            p_swap: 0.5,
            ..McmcConfig::default()
        };
        assert!(mcmc_aggregate(&obs(), &sp, &prior, cfg).is_err());
    }

    #[test]
    fn singleton_space_never_moves() {
        let sp = CandidateSpace::new(3, 1, 0, 2, FamilyRule::Disjoint).unwrap();
        let prior = PriorSpec::new(3, 3);
        let cfg = McmcConfig {
            steps: 2000,
            burn_in: 100,
            ..McmcConfig::default()
        };
        let r = mcmc_aggregate(&obs(), &sp, &prior, cfg).unwrap();
        assert_eq!(r.visits.len(), 1);
        assert_eq!(r.acceptance_rate, 0.0);
        let o = obs();
        assert_eq!(
            r.estimate,
            crate::estimator::projection_estimate(&o, &Candidate::constant(3))
        );
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let sp = CandidateSpace::new(3, 1, 3, 2, FamilyRule::Disjoint).unwrap();
        let prior = PriorSpec::new(3, 3);
        let cfg = McmcConfig {
            steps: 5000,
            burn_in: 500,
            seed: 17,
            ..McmcConfig::default()
        };
        let a = mcmc_aggregate(&obs(), &sp, &prior, cfg.clone()).unwrap();
        let b = mcmc_aggregate(&obs(), &sp, &prior, cfg).unwrap();
        assert_eq!(a.visits, b.visits);
        assert_eq!(a.estimate, b.estimate);
    }

    #[test]
    fn visits_approach_exact_weights() {
        let o = obs();
        let sp = CandidateSpace::new(3, 1, 3, 2, FamilyRule::Disjoint).unwrap();
        let prior = PriorSpec::from_epsilon(3, o.epsilon, 2);
        let exact = exact_aggregate(&o, sp.enumerate(1000).unwrap(), &prior).unwrap();
        let cfg = McmcConfig {
            steps: 200_000,
            burn_in: 5_000,
            seed: 5,
            ..McmcConfig::default()
        };
        let r = mcmc_aggregate(&o, &sp, &prior, cfg).unwrap();
        let freq: HashMap<Candidate, f64> = r.frequencies().into_iter().collect();
        let tv: f64 = exact
            .ensemble
            .candidates
            .iter()
            .zip(exact.ensemble.weights())
            .map(|(c, w)| (w - freq.get(c).copied().unwrap_or(0.0)).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.05, "tv {tv}");
        let dist = r.estimate.squared_distance(&exact.estimate).sqrt();
        assert!(
            dist <= 3.0 * r.stderr_l2 + 1e-12,
            "dist {dist} se {}",
            r.stderr_l2
        );
    }

    #[test]
    fn overlap_rule_chain_stays_admissible() {
        let sp = CandidateSpace::new(4, 2, 3, 1, FamilyRule::OverlapAtMostOne).unwrap();
        let prior = PriorSpec::new(4, 2);
        let idx = enumerate_indices(&IndexBox::full(4, 1)).unwrap();
        let o = observe_on(
            &CoefficientMap::new(4),
            0.3,
            1,
            idx,
            1,
            &GaussianField { seed: 1 },
        )
        .unwrap();
        let cfg = McmcConfig {
            steps: 3000,
            burn_in: 0,
            ..McmcConfig::default()
        };
        let r = mcmc_aggregate(&o, &sp, &prior, cfg).unwrap();
        assert!(r.visits.iter().all(|(c, _)| sp.contains(c)));
    }
}
