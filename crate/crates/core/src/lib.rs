//! Simulation and estimation toolkit for compound functional models
//! `f = f̄ + Σ_V f_V` observed through the Gaussian sequence model.

#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod basis;
pub mod bounds;
pub mod coeffs;
pub mod error;
pub mod estimator;
pub mod model;
pub mod multiindex;
pub mod risk;
pub mod rng;
pub mod sequence;

pub use coeffs::CoefficientMap;
pub use error::{Error, Result};
pub use estimator::{Candidate, CandidateSpace, McmcConfig, PriorSpec, WeightedEnsemble};
pub use model::{CompoundFunction, FamilyRule, Structure};
pub use multiindex::{IndexBox, MultiIndex, Support};
pub use sequence::SequenceObservation;
