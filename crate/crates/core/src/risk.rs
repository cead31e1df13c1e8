//! Monte-Carlo risk, closed-form rates and bounds, and log-log rate fits.

use std::f64::consts::E;
use std::fmt;

use rand::Rng;
use rayon::prelude::*;

use crate::coeffs::CoefficientMap;
use crate::error::{Error, Result};
use crate::estimator::{
    int_part, mcmc_aggregate, oracle_candidate, projection_estimate, AggregationPlan, Candidate,
    CandidateSpace, McmcConfig, PriorSpec,
};
use crate::model::{compose, CompoundFunction, Structure};
use crate::multiindex::{enumerate_union, IndexBox, MultiIndex, Support};
use crate::rng::{chacha, derive_seed, GaussianField};
use crate::sequence::{check_epsilon, observe_on, SequenceObservation};

#[derive(Debug, Clone, PartialEq)]
pub struct RiskReport {
    pub epsilon: f64,
    pub replicates: usize,
    pub mean_mise: f64,
    pub stderr: f64,
    /// Truth energy outside the observed index set; already part of `mean_mise`.
    pub tail_energy: f64,
}

/// `Σ_j (θ̂_j − θ_j)² + tail`.
pub fn mise(estimate: &CoefficientMap, truth: &CoefficientMap, tail_energy: f64) -> f64 {
    estimate.squared_distance(truth) + tail_energy
}

/// Pairwise summation, deterministic for a given slice.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        return xs.iter().sum();
    }
    let (a, b) = xs.split_at(xs.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean and normal-approximation standard error.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    (mean, (pairwise_sum(&dev) / (n - 1.0) / n).sqrt())
}

/// Which estimator a risk run evaluates.
#[derive(Debug, Clone, PartialEq)]
pub enum EstimatorSpec {
    /// `θ̂ = (Y_0, 0, …)`.
    Constant,
    Projection(Candidate),
    /// Projection on the true structure with the oracle bandwidths of the
    /// bias-variance trade-off.
    OracleBandwidth {
        structure: Structure,
        beta: f64,
        radius: f64,
    },
    Aggregate(CandidateSpace),
    Mcmc(CandidateSpace, McmcConfig),
}

impl EstimatorSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::Constant => "constant",
            EstimatorSpec::Projection(_) => "projection",
            EstimatorSpec::OracleBandwidth { .. } => "oracle-bandwidth",
            EstimatorSpec::Aggregate(_) => "exact",
            EstimatorSpec::Mcmc(..) => "mcmc",
        }
    }

    /// Supports whose boxes make up the observation index set.
    fn supports(&self, d: usize) -> Vec<Support> {
        match self {
            EstimatorSpec::Constant => vec![],
            EstimatorSpec::Projection(c) => c.structure().supports().to_vec(),
            EstimatorSpec::OracleBandwidth { structure, .. } => structure.supports().to_vec(),
            EstimatorSpec::Aggregate(sp) | EstimatorSpec::Mcmc(sp, _) => {
                debug_assert_eq!(sp.d, d);
                sp.pool()
            }
        }
    }
}

enum Ready<'a> {
    Fixed(Candidate),
    Plan(AggregationPlan),
    Chain(&'a CandidateSpace, PriorSpec, &'a McmcConfig),
}

impl Ready<'_> {
    fn estimate(&self, obs: &SequenceObservation, seed: u64) -> Result<CoefficientMap> {
        match self {
            Ready::Fixed(c) => Ok(projection_estimate(obs, c)),
            Ready::Plan(p) => p.estimate(obs),
            Ready::Chain(sp, prior, cfg) => {
                let cfg = McmcConfig {
                    seed: derive_seed(seed, 1),
                    ..(*cfg).clone()
                };
                Ok(mcmc_aggregate(obs, sp, prior, cfg)?.estimate)
            }
        }
    }
}

/// The index set an experiment observes, the truth restricted to it, and
/// the truth energy left outside.
#[derive(Debug, Clone)]
pub struct ObservationDesign {
    pub cutoff: u32,
    pub indices: Vec<MultiIndex>,
    pub truth: CoefficientMap,
    pub tail_energy: f64,
}

impl ObservationDesign {
    pub fn new(model: &CompoundFunction, supports: &[Support], cutoff: u32) -> Result<Self> {
        let indices = enumerate_union(model.d, cutoff, supports)?;
        let full = model.flatten();
        let mut truth = CoefficientMap::new(model.d);
        let mut tail = 0.0;
        for (j, &v) in &full {
            if indices.binary_search(j).is_ok() {
                truth.insert(j.clone(), v)?;
            } else {
                tail += v * v;
            }
        }
        Ok(ObservationDesign {
            cutoff,
            indices,
            truth,
            tail_energy: tail,
        })
    }

    /// Replicate `r` of the experiment seeded by `seed`.
    pub fn observe(&self, epsilon: f64, seed: u64, r: u64) -> Result<SequenceObservation> {
        let s = derive_seed(seed, r);
        observe_on(
            &self.truth,
            epsilon,
            self.cutoff,
            self.indices.clone(),
            s,
            &GaussianField { seed: s },
        )
    }
}

/// Per-replicate MISE values of an estimator, in replicate order.
pub fn replicate_mises(
    model: &CompoundFunction,
    spec: &EstimatorSpec,
    epsilon: f64,
    replicates: usize,
    seed: u64,
    cutoff: u32,
) -> Result<(Vec<f64>, f64)> {
    check_epsilon(epsilon)?;
    let design = ObservationDesign::new(model, &spec.supports(model.d), cutoff)?;
    let ready = match spec {
        EstimatorSpec::Constant => Ready::Fixed(Candidate::constant(model.d)),
        EstimatorSpec::Projection(c) => Ready::Fixed(c.clone()),
        EstimatorSpec::OracleBandwidth {
            structure,
            beta,
            radius,
        } => Ready::Fixed(oracle_candidate(
            structure, *beta, *radius, epsilon, cutoff,
        )?),
        EstimatorSpec::Aggregate(sp) => {
            let prior = PriorSpec::from_epsilon(model.d, epsilon, sp.cutoff);
            Ready::Plan(AggregationPlan::new(
                sp.enumerate(crate::estimator::DEFAULT_CANDIDATE_CEILING)?,
                &prior,
                epsilon,
            )?)
        }
        EstimatorSpec::Mcmc(sp, cfg) => {
            cfg.validate()?;
            Ready::Chain(
                sp,
                PriorSpec::from_epsilon(model.d, epsilon, sp.cutoff),
                cfg,
            )
        }
    };
    let values = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let obs = design.observe(epsilon, seed, r)?;
            let est = ready.estimate(&obs, obs.seed)?;
            Ok(mise(&est, &design.truth, design.tail_energy))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok((values, design.tail_energy))
}

/// Monte-Carlo estimate of `E‖f̂ − f‖²` over independent replicates.
pub fn mc_risk(
    model: &CompoundFunction,
    spec: &EstimatorSpec,
    epsilon: f64,
    replicates: usize,
    seed: u64,
    cutoff: u32,
) -> Result<RiskReport> {
    if replicates < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 replicates, got {replicates}"
        )));
    }
    let (values, tail) = replicate_mises(model, spec, epsilon, replicates, seed, cutoff)?;
    let (mean, se) = mean_stderr(&values);
    Ok(RiskReport {
        epsilon,
        replicates,
        mean_mise: mean,
        stderr: se,
        tail_energy: tail,
    })
}

/// Empirical check of `E‖f̂_ε − f‖² ≤ min_c {E‖f̂_c − f‖² + 4ε² log π_c⁻¹}`.
#[derive(Debug, Clone)]
pub struct OracleReport {
    pub aggregate: RiskReport,
    /// Mean MISE of every candidate, over the same replicates.
    pub candidate_mise: Vec<f64>,
    pub log_prior: Vec<f64>,
    pub candidates: Vec<Candidate>,
    /// Position of the minimizing candidate.
    pub best: usize,
    /// `min_c {mean MISE_c + 4ε² log π_c⁻¹}`
    pub bound: f64,
}

impl OracleReport {
    /// Whether the aggregate risk is within `k` standard errors of the bound.
    pub fn holds(&self, k: f64) -> bool {
        self.aggregate.mean_mise <= self.bound + k * self.aggregate.stderr
    }
}

pub fn oracle_inequality(
    model: &CompoundFunction,
    space: &CandidateSpace,
    epsilon: f64,
    replicates: usize,
    seed: u64,
) -> Result<OracleReport> {
    check_epsilon(epsilon)?;
    if replicates < 2 {
        return Err(Error::Parameter(format!(
            "need at least 2 replicates, got {replicates}"
        )));
    }
    let design = ObservationDesign::new(model, &space.pool(), space.cutoff)?;
    let prior = PriorSpec::from_epsilon(model.d, epsilon, space.cutoff);
    let candidates = space.enumerate(crate::estimator::DEFAULT_CANDIDATE_CEILING)?;
    let log_prior: Vec<f64> = candidates.iter().map(|c| prior.log_prior(c)).collect();
    let plan = AggregationPlan::new(candidates.clone(), &prior, epsilon)?;
    let truth_at: Vec<f64> = design.indices.iter().map(|j| design.truth.get(j)).collect();

    let per_rep = (0..replicates as u64)
        .into_par_iter()
        .map(|r| {
            let obs = design.observe(epsilon, seed, r)?;
            let agg = mise(&plan.estimate(&obs)?, &design.truth, design.tail_energy);
            let cands: Vec<f64> = candidates
                .iter()
                .map(|c| {
                    let err: f64 = obs
                        .entries()
                        .iter()
                        .zip(&truth_at)
                        .map(|((j, y), t)| if c.keeps(j) { (y - t) * (y - t) } else { t * t })
                        .sum();
                    err + design.tail_energy
                })
                .collect();
            Ok((agg, cands))
        })
        .collect::<Result<Vec<_>>>()?;

    let agg: Vec<f64> = per_rep.iter().map(|p| p.0).collect();
    let (mean, se) = mean_stderr(&agg);
    let candidate_mise: Vec<f64> = (0..candidates.len())
        .map(|c| {
            let col: Vec<f64> = per_rep.iter().map(|p| p.1[c]).collect();
            pairwise_sum(&col) / replicates as f64
        })
        .collect();
    let eps2 = epsilon * epsilon;
    let mut best = 0;
    let mut bound = f64::INFINITY;
    for (c, (m, lp)) in candidate_mise.iter().zip(&log_prior).enumerate() {
        let v = m - 4.0 * eps2 * lp;
        if v < bound {
            bound = v;
            best = c;
        }
    }
    Ok(OracleReport {
        aggregate: RiskReport {
            epsilon,
            replicates,
            mean_mise: mean,
            stderr: se,
            tail_energy: design.tail_energy,
        },
        candidate_mise,
        log_prior,
        candidates,
        best,
        bound,
    })
}

/// Which term of the rate is the larger one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// `m L^{s/(2β+s)} ε^{4β/(2β+s)}`
    Bias,
    /// `m s ε² log(d/(s m^{1/s}))`
    Variance,
    /// Both exceed `L`.
    Clamp,
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Bias => "bias",
            Branch::Variance => "variance",
            Branch::Clamp => "clamp",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateValue {
    pub value: f64,
    pub branch: Branch,
    /// `d/(s m^{1/s}) ≤ 1`: the logarithm was clamped at zero.
    pub log_clamped: bool,
}

/// `max{m L^{s/(2β+s)} ε^{4β/(2β+s)}, m s ε² log(d/(s m^{1/s}))} ∧ L`.
pub fn theoretical_rate(
    beta: f64,
    radius: f64,
    epsilon: f64,
    s: usize,
    m: usize,
    d: usize,
) -> RateValue {
    let (sf, mf) = (s as f64, m as f64);
    let first =
        mf * radius.powf(sf / (2.0 * beta + sf)) * epsilon.powf(4.0 * beta / (2.0 * beta + sf));
    let arg = d as f64 / (sf * mf.powf(1.0 / sf));
    let log_clamped = !(arg > 1.0);
    let second = mf * sf * epsilon * epsilon * arg.ln().max(0.0);
    let top = first.max(second);
    let branch = if radius < top {
        Branch::Clamp
    } else if first >= second {
        Branch::Bias
    } else {
        Branch::Variance
    };
    RateValue {
        value: top.min(radius),
        branch,
        log_clamped,
    }
}

/// `m ε² {(2k+1)^s + 4 log(2ε⁻²) + 4s log(2e³d/(s m^{1/s}))}`.
pub fn tensor_class_bound(k: u32, s: usize, m: usize, d: usize, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let inv = 1.0 / (epsilon * epsilon);
    if k as f64 >= inv {
        return Err(Error::Parameter(format!(
            "precondition k < ε⁻² violated: k={k}, ε⁻²={inv}"
        )));
    }
    if m == 0 {
        return Ok(0.0);
    }
    if s == 0 {
        return Err(Error::Parameter("s must be positive when m > 0".into()));
    }
    let (sf, mf) = (s as f64, m as f64);
    let brace = (2.0 * k as f64 + 1.0).powi(s as i32)
        + 4.0 * (2.0 * inv).ln()
        + 4.0 * sf * (2.0 * E.powi(3) * d as f64 / (sf * mf.powf(1.0 / sf))).ln();
    Ok(mf * epsilon * epsilon * brace)
}

/// `2 C_* 3^{2β∧s} m L^{s/(2β+s)} ε^{4β/(2β+s)}`.
pub fn oracle_bandwidth_bound(
    beta: f64,
    radius: f64,
    epsilon: f64,
    s: usize,
    m: usize,
    c_star: f64,
) -> f64 {
    let sf = s as f64;
    2.0 * c_star
        * 3f64.powf((2.0 * beta).min(sf))
        * m as f64
        * radius.powf(sf / (2.0 * beta + sf))
        * epsilon.powf(4.0 * beta / (2.0 * beta + sf))
}

#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionCheck {
    pub name: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl PreconditionCheck {
    fn ge(name: &'static str, lhs: f64, rhs: f64) -> Self {
        PreconditionCheck {
            name,
            lhs,
            rhs,
            holds: lhs >= rhs,
        }
    }

    fn gt(name: &'static str, lhs: f64, rhs: f64) -> Self {
        PreconditionCheck {
            name,
            lhs,
            rhs,
            holds: lhs > rhs,
        }
    }
}

/// `L ≥ ε²` and `log ε⁻² ≥ log(L)/(2β)`.
pub fn bandwidth_preconditions(beta: f64, radius: f64, epsilon: f64) -> Vec<PreconditionCheck> {
    let eps2 = epsilon * epsilon;
    vec![
        PreconditionCheck::ge("L >= eps^2", radius, eps2),
        PreconditionCheck::ge(
            "log(eps^-2) >= log(L)/(2 beta)",
            (1.0 / eps2).ln(),
            radius.ln() / (2.0 * beta),
        ),
    ]
}

/// `log ε⁻² ≥ log(L)/(2β)` and `L > ε² log(e ε⁻²)^{(2β+s)/s}`.
pub fn minimax_preconditions(
    beta: f64,
    radius: f64,
    epsilon: f64,
    s: usize,
) -> Vec<PreconditionCheck> {
    let eps2 = epsilon * epsilon;
    let sf = s as f64;
    vec![
        PreconditionCheck::ge(
            "log(eps^-2) >= log(L)/(2 beta)",
            (1.0 / eps2).ln(),
            radius.ln() / (2.0 * beta),
        ),
        PreconditionCheck::gt(
            "L > eps^2 log(e eps^-2)^((2 beta + s)/s)",
            radius,
            eps2 * (E / eps2).ln().powf((2.0 * beta + sf) / sf),
        ),
    ]
}

/// Least-squares fit of `log(mean_mise)` on `log ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `4β/(2β+s)`
    pub target_exponent: f64,
    pub points: usize,
    /// `log10(ε_max/ε_min)`
    pub span_decades: f64,
}

pub fn rate_fit(reports: &[RiskReport], beta: f64, s: usize) -> Result<RateFit> {
    let mut eps: Vec<f64> = reports.iter().map(|r| r.epsilon).collect();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 4 {
        return Err(Error::Domain(format!(
            "rate fit needs at least 4 distinct ε values, got {}",
            eps.len()
        )));
    }
    if let Some(r) = reports.iter().find(|r| !(r.mean_mise > 0.0)) {
        return Err(Error::Domain(format!(
            "nonpositive risk {} at ε={}",
            r.mean_mise, r.epsilon
        )));
    }
    let x: Vec<f64> = reports.iter().map(|r| r.epsilon.ln()).collect();
    let y: Vec<f64> = reports.iter().map(|r| r.mean_mise.ln()).collect();
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        target_exponent: 4.0 * beta / (2.0 * beta + s as f64),
        points: reports.len(),
        span_decades: (eps[eps.len() - 1] / eps[0]).log10(),
    })
}

/// The common branch of a grid, or an error naming the first change.
pub fn single_branch(grid: &[(f64, Branch)]) -> Result<Branch> {
    let Some(&(_, first)) = grid.first() else {
        return Err(Error::Domain("empty ε grid".into()));
    };
    if let Some(&(eps, b)) = grid.iter().find(|g| g.1 != first) {
        return Err(Error::Domain(format!(
            "rate branch changes from {first} to {b} at ε={eps}; refusing to fit one power law across it"
        )));
    }
    Ok(first)
}

/// Hardest-case atoms for noise level `ε`: every coefficient in
/// `{0 < |j|_∞ ≤ T}` of each support box has magnitude of order `ε`, with
/// `T = [(L/ε²)^{1/(2β+|V|)}]`, then the atom is rescaled onto the
/// ellipsoid boundary. Signs are Rademacher draws from `seed`.
pub fn least_favorable_model(
    structure: &Structure,
    beta: f64,
    radius: f64,
    epsilon: f64,
    seed: u64,
) -> Result<CompoundFunction> {
    check_epsilon(epsilon)?;
    let d = structure.d();
    let mut atoms = Vec::with_capacity(structure.m());
    for (k, &v) in structure.supports().iter().enumerate() {
        let t = int_part((radius / (epsilon * epsilon)).powf(1.0 / (2.0 * beta + v.len() as f64)))
            .max(1) as u32;
        let mut rng = chacha(derive_seed(seed, k as u64));
        let mut coeffs = CoefficientMap::new(d);
        for j in crate::multiindex::enumerate_indices(&IndexBox::new(d, t, Some(v)))? {
            if !j.is_zero() {
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                coeffs.insert(j, sign * epsilon)?;
            }
        }
        let form = crate::model::sobolev_form(&coeffs, beta);
        atoms.push((v, coeffs.scaled((radius / form).sqrt())));
    }
    let mut f = compose(0.0, structure, atoms)?;
    f.smoothness = Some((beta, radius));
    Ok(f)
}
