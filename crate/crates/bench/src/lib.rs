//! Fixed inputs shared by the benchmarks.

use compound_core::model::sample_sobolev_model;
use compound_core::multiindex::enumerate_union;
use compound_core::rng::GaussianField;
use compound_core::sequence::observe_on;
use compound_core::{
    CandidateSpace, FamilyRule, PriorSpec, SequenceObservation, Structure, Support,
};

pub struct Fixture {
    pub obs: SequenceObservation,
    pub space: CandidateSpace,
    pub prior: PriorSpec,
}

/// A two-atom model in dimension `d` observed over every box of the
/// candidate pool.
pub fn fixture(d: usize, m_max: usize, cutoff: u32, epsilon: f64) -> Fixture {
    let supports = vec![
        Support::from_coords(&[1]).unwrap(),
        Support::from_coords(&[2]).unwrap(),
    ];
    let st = Structure::new(d, 1, supports, FamilyRule::Disjoint).unwrap();
    let model = sample_sobolev_model(&st, 2.0, 1.0, cutoff, 1.0, 0.3, 42).unwrap();
    let space = CandidateSpace::new(d, 1, m_max, cutoff, FamilyRule::Disjoint).unwrap();
    let idx = enumerate_union(d, cutoff, &space.pool()).unwrap();
    let obs = observe_on(
        &model.flatten(),
        epsilon,
        cutoff,
        idx,
        7,
        &GaussianField { seed: 7 },
    )
    .unwrap();
    let prior = PriorSpec::from_epsilon(d, epsilon, cutoff);
    Fixture { obs, space, prior }
}
