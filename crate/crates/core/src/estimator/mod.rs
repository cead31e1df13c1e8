//! Projection estimators indexed by `(t, η)`, their exponentially weighted
//! aggregate, and a Metropolis–Hastings approximation of the aggregate.

mod aggregate;
mod bandwidth;
mod mcmc;
mod prepared;
mod prior;
mod space;

use std::fmt;

pub use aggregate::{
    exact_aggregate, log_sum_exp, Aggregate, AggregationPlan, WeightedEnsemble,
    DEFAULT_CANDIDATE_CEILING,
};
pub use bandwidth::{int_part, oracle_bandwidth, oracle_candidate};
pub use mcmc::{mcmc_aggregate, McmcChain, McmcConfig, McmcResult};
pub use prepared::{PreparedObservation, WeightAccumulator};
pub use prior::PriorSpec;
pub use space::CandidateSpace;

use crate::coeffs::CoefficientMap;
use crate::error::{Error, Result};
use crate::model::{FamilyRule, Structure};
use crate::multiindex::{MultiIndex, Support};
use crate::sequence::SequenceObservation;

/// A weak estimator: a structure with one cut-off level per support.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Candidate {
    structure: Structure,
    t: Vec<u32>,
}

impl Candidate {
    /// `t[ℓ]` is the bandwidth of `structure.supports()[ℓ]` (sorted order).
    pub fn new(structure: Structure, t: Vec<u32>) -> Result<Self> {
        if t.len() != structure.m() {
            return Err(Error::Domain(format!(
                "bandwidth vector has length {}, structure has {} supports",
                t.len(),
                structure.m()
            )));
        }
        Ok(Candidate { structure, t })
    }

    /// Builds a candidate from `(support, bandwidth)` pairs in any order.
    pub fn from_pairs(
        d: usize,
        s: usize,
        rule: FamilyRule,
        mut pairs: Vec<(Support, u32)>,
    ) -> Result<Self> {
        pairs.sort_by_key(|a| a.0);
        let (supports, t): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        Candidate::new(Structure::new(d, s, supports, rule)?, t)
    }

    /// The constant estimator `θ̂ = (Y_0, 0, 0, …)`.
    pub fn constant(d: usize) -> Self {
        Candidate {
            structure: Structure::constant(d),
            t: Vec::new(),
        }
    }

    pub fn structure(&self) -> &Structure {
        &self.structure
    }

    pub fn bandwidths(&self) -> &[u32] {
        &self.t
    }

    pub fn m(&self) -> usize {
        self.structure.m()
    }

    /// Largest support size, which fixes the prior stratum.
    pub fn s_max(&self) -> usize {
        self.structure.max_support_size()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Support, u32)> + '_ {
        self.structure
            .supports()
            .iter()
            .copied()
            .zip(self.t.iter().copied())
    }

    /// Whether the weak estimator keeps `Y_j`.
    pub fn keeps(&self, j: &MultiIndex) -> bool {
        if j.is_zero() {
            return true;
        }
        let (mask, norm) = (j.support(), j.sup_norm());
        self.pairs()
            .any(|(v, t)| mask.is_subset_of(v) && norm >= 1 && norm <= t)
    }

    pub fn supports_pairwise_disjoint(&self) -> bool {
        let s = self.structure.supports();
        s.iter()
            .enumerate()
            .all(|(a, v)| s[a + 1..].iter().all(|w| !v.intersects(*w)))
    }
}

impl fmt::Display for Candidate {
    /// `{1}=2 {2,3}=0`, or `const` for the constant candidate.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.structure.is_constant() {
            return f.write_str("const");
        }
        for (i, (v, t)) in self.pairs().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{v}={t}")?;
        }
        Ok(())
    }
}

/// `θ̂_{t,η}`: keeps `Y_0` and every `Y_j` with `supp(j) ⊆ V_ℓ` and
/// `1 ≤ |j|_∞ ≤ t_ℓ` for some `ℓ`; everything else is zero.
pub fn projection_estimate(obs: &SequenceObservation, cand: &Candidate) -> CoefficientMap {
    let mut out = CoefficientMap::new(obs.d);
    for (j, y) in obs.entries() {
        if cand.keeps(j) {
            out.insert(j.clone(), *y).expect("dimension checked");
        }
    }
    out
}

/// `pen(t, η) = 2ε² ∏_{V ∈ supp(η)} (2 t_V + 1)^{|V|}`.
pub fn penalty(cand: &Candidate, epsilon: f64) -> f64 {
    let prod: f64 = cand
        .pairs()
        .map(|(v, t)| (2.0 * t as f64 + 1.0).powi(v.len() as i32))
        .product();
    2.0 * epsilon * epsilon * prod
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiindex::{enumerate_indices, IndexBox};
    use crate::rng::GaussianField;
    use crate::sequence::observe_on;

    fn s(c: &[usize]) -> Support {
        Support::from_coords(c).unwrap()
    }

    fn cand(d: usize, sup: &[&[usize]], t: &[u32]) -> Candidate {
        let pairs = sup.iter().zip(t).map(|(c, &t)| (s(c), t)).collect();
        Candidate::from_pairs(d, 3, FamilyRule::Unrestricted, pairs).unwrap()
    }

    fn noisy_obs(d: usize, cutoff: u32) -> SequenceObservation {
        let idx = enumerate_indices(&IndexBox::full(d, cutoff)).unwrap();
        observe_on(
            &CoefficientMap::new(d),
            0.5,
            cutoff,
            idx,
            1,
            &GaussianField { seed: 1 },
        )
        .unwrap()
    }

    #[test]
    fn zero_bandwidths_keep_only_the_constant() {
        let obs = noisy_obs(2, 2);
        let est = projection_estimate(&obs, &cand(2, &[&[1], &[2]], &[0, 0]));
        assert_eq!(est.len(), 1);
        assert_eq!(est.get(&MultiIndex::zero(2)), obs.y0());
        let c = projection_estimate(&obs, &Candidate::constant(2));
        assert_eq!(c, est);
    }

    #[test]
    fn single_axis_filter() {
        let obs = noisy_obs(2, 2);
        let est = projection_estimate(&obs, &cand(2, &[&[1]], &[1]));
        let kept: Vec<&MultiIndex> = est.indices().filter(|j| !j.is_zero()).collect();
        assert_eq!(
            kept,
            vec![&MultiIndex::new(vec![-1, 0]), &MultiIndex::new(vec![1, 0])]
        );
    }

    #[test]
    fn full_pass_filter() {
        let obs = noisy_obs(2, 2);
        let est = projection_estimate(&obs, &cand(2, &[&[1, 2]], &[2]));
        assert_eq!(est, obs.as_coefficients());
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty(&Candidate::constant(3), 0.3), 2.0 * 0.09);
        assert_eq!(penalty(&cand(3, &[&[1], &[2]], &[0, 0]), 0.5), 0.5);
        assert!((penalty(&cand(2, &[&[1, 2]], &[1]), 0.1) - 0.18).abs() < 1e-15);
        // ε = 1 is outside the model but the formula is total
        assert_eq!(penalty(&cand(2, &[&[1], &[2]], &[1, 2]), 1.0), 30.0);
    }

    #[test]
    fn display_format() {
        assert_eq!(
            cand(3, &[&[2, 3], &[1]], &[4, 0]).to_string(),
            "{1}=0 {2,3}=4"
        );
        assert_eq!(Candidate::constant(2).to_string(), "const");
    }

    #[test]
    fn length_mismatch_rejected() {
        let st = Structure::new(2, 1, vec![s(&[1])], FamilyRule::Disjoint).unwrap();
        assert!(Candidate::new(st, vec![1, 2]).is_err());
    }
}
