use std::f64::consts::{E, LN_2};
use std::io::Write;

use num_bigint::BigUint;
use rand::Rng;
use rayon::prelude::*;

use super::codes::{varshamov_gilbert, HypercubeCode};
use super::combinatorics::{
    count_b, count_b_middle_bound, count_m, count_m_bound, h_d, partition_count,
    partition_lower_bound, partition_upper_bound, structure_bound, to_f64,
};
use super::families::{block_family_tau, sign_family, sign_family_recommended, BlockFamily};
use super::packing::{
    enumerate_partitions, greedy_packing, is_maximal, packing_log_bound, rho, PackingSet,
    PARTITION_CEILING,
};
use crate::coeffs::{format_real, CoefficientMap};
use crate::error::{Error, Result};
use crate::model::SobolevBall;
use crate::sequence::{check_epsilon, kl_divergence};

/// Relative slack on floating-point bound comparisons.
pub const BOUND_TOL: f64 = 1e-9;
/// Absolute slack on identities that hold exactly in real arithmetic.
pub const IDENTITY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub passed: bool,
}

impl CheckResult {
    /// `lhs ≤ rhs` up to [`BOUND_TOL`] relative.
    pub fn le(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        let passed = lhs <= rhs + BOUND_TOL * rhs.abs().max(f64::MIN_POSITIVE);
        CheckResult {
            name: name.into(),
            lhs,
            rhs,
            passed,
        }
    }

    /// `|lhs − rhs| ≤ tol`.
    pub fn close(name: impl Into<String>, lhs: f64, rhs: f64, tol: f64) -> Self {
        CheckResult {
            name: name.into(),
            lhs,
            rhs,
            passed: (lhs - rhs).abs() <= tol,
        }
    }

    pub fn flag(name: impl Into<String>, ok: bool) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        CheckResult {
            name: name.into(),
            lhs: v,
            rhs: 1.0,
            passed: ok,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    pub fn push(&mut self, c: CheckResult) {
        self.checks.push(c);
    }

    pub fn extend(&mut self, other: CheckReport) {
        self.checks.extend(other.checks);
    }

    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn len(&self) -> usize {
        self.checks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.checks.is_empty()
    }

    /// `check_name,lhs,rhs,passed`
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["check_name", "lhs", "rhs", "passed"])?;
        for c in &self.checks {
            w.write_record([
                c.name.as_str(),
                &format_real(c.lhs),
                &format_real(c.rhs),
                if c.passed { "true" } else { "false" },
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Number of size-`m` collections of distinct subsets of `{1..d}` with at
/// most `s` elements, by walking the collections one at a time.
fn brute_count_b(d: usize, s: usize, m: usize) -> u64 {
    let subsets: Vec<u32> = (0u32..1 << d)
        .filter(|x| x.count_ones() as usize <= s)
        .collect();
    fn rec(n: usize, start: usize, left: usize) -> u64 {
        if left == 0 {
            return 1;
        }
        (start..n).map(|i| rec(n, i + 1, left - 1)).sum()
    }
    rec(subsets.len(), 0, m)
}

/// Closed-form partition counts, the partition-count sandwich, `M_{d,s}` and
/// `|B^d_{s,m}|` bounds, and `H_d ≤ e`.
pub fn counting_suite(
    max_d_partitions: usize,
    max_d_structures: usize,
    max_s: usize,
    max_m: usize,
    max_d_h: u64,
) -> Result<CheckReport> {
    let mut r = CheckReport::default();
    for d in 1..=max_d_partitions {
        for s in 1..=d {
            for m in 1..=d / s {
                let (du, su, mu) = (d as u64, s as u64, m as u64);
                let exact = partition_count(du, su, mu)?;
                let listed = enumerate_partitions(d, s, m, PARTITION_CEILING)?.len();
                let tag = format!("d={d};s={s};m={m}");
                r.push(CheckResult::close(
                    format!("partition_count[{tag}]"),
                    listed as f64,
                    to_f64(&exact),
                    0.0,
                ));
                let c = to_f64(&exact);
                r.push(CheckResult::le(
                    format!("partition_lower[{tag}]"),
                    partition_lower_bound(du, su, mu),
                    c,
                ));
                r.push(CheckResult::le(
                    format!("partition_upper[{tag}]"),
                    c,
                    partition_upper_bound(du, su, mu),
                ));
            }
        }
    }
    for d in 1..=max_d_structures {
        for s in 1..=max_s.min(d) {
            let (du, su) = (d as u64, s as u64);
            let big_m = count_m(du, su)?;
            let listed = (0u32..1 << d)
                .filter(|x| x.count_ones() as usize <= s)
                .count();
            r.push(CheckResult::close(
                format!("count_m[d={d};s={s}]"),
                listed as f64,
                to_f64(&big_m),
                0.0,
            ));
            r.push(CheckResult::le(
                format!("count_m_bound[d={d};s={s}]"),
                to_f64(&big_m),
                count_m_bound(du, su),
            ));
            for m in 1..=max_m {
                let mu = m as u64;
                let tag = format!("d={d};s={s};m={m}");
                let exact = count_b(du, su, mu)?;
                let brute = brute_count_b(d, s, m);
                r.push(CheckResult::flag(
                    format!("count_b_exhaustive[{tag}]"),
                    exact == BigUint::from(brute),
                ));
                let b = brute as f64;
                r.push(CheckResult::le(
                    format!("count_b_middle[{tag}]"),
                    b,
                    count_b_middle_bound(du, su, mu)?,
                ));
                r.push(CheckResult::le(
                    format!("count_b_upper[{tag}]"),
                    b,
                    structure_bound(du, su, mu),
                ));
            }
        }
    }
    for d in 1..=max_d_h {
        r.push(CheckResult::le(format!("h_d_le_e[d={d}]"), h_d(d), E));
    }
    Ok(r)
}

/// Identity of indiscernibles, symmetry and the triangle inequality for
/// `ρ`, exhaustively over triples, for every shape with `d ≤ max_d`.
pub fn rho_metric_suite(max_d: usize) -> Result<CheckReport> {
    let mut r = CheckReport::default();
    for d in 1..=max_d {
        for s in 1..=d {
            for m in 1..=d / s {
                let all = enumerate_partitions(d, s, m, PARTITION_CEILING)?;
                let n = all.len();
                let dist: Vec<f64> = (0..n * n)
                    .map(|k| rho(&all[k / n], &all[k % n]).expect("same shape"))
                    .collect();
                let at = |i: usize, j: usize| dist[i * n + j];
                let mut ident = 0u64;
                let mut sym = 0u64;
                for i in 0..n {
                    for j in 0..n {
                        if (at(i, j) == 0.0) != (i == j) {
                            ident += 1;
                        }
                        if at(i, j) != at(j, i) {
                            sym += 1;
                        }
                    }
                }
                let tri: u64 = (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let mut bad = 0u64;
                        for j in 0..n {
                            for k in 0..n {
                                if at(i, k) > at(i, j) + at(j, k) + IDENTITY_TOL {
                                    bad += 1;
                                }
                            }
                        }
                        bad
                    })
                    .sum();
                let tag = format!("d={d};s={s};m={m}");
                r.push(CheckResult::close(
                    format!("rho_identity[{tag}]"),
                    ident as f64,
                    0.0,
                    0.0,
                ));
                r.push(CheckResult::close(
                    format!("rho_symmetry[{tag}]"),
                    sym as f64,
                    0.0,
                    0.0,
                ));
                r.push(CheckResult::close(
                    format!("rho_triangle[{tag}]"),
                    tri as f64,
                    0.0,
                    0.0,
                ));
            }
        }
    }
    Ok(r)
}

/// Separation, maximality and the log-size lower bound (when positive).
pub fn packing_suite(
    packing: &PackingSet,
    d: usize,
    s: usize,
    m: usize,
    ceiling: u64,
) -> Result<CheckReport> {
    let mut r = CheckReport::default();
    let tag = format!("d={d};s={s};m={m};theta={}", format_real(packing.theta));
    if packing.elements.len() > 1 {
        r.push(CheckResult::le(
            format!("packing_separation[{tag}]"),
            packing.theta,
            packing.min_separation(),
        ));
    }
    r.push(CheckResult::flag(
        format!("packing_maximal[{tag}]"),
        is_maximal(packing, d, s, m, ceiling)?,
    ));
    let bound = packing_log_bound(d, s, m);
    if bound > 0.0 {
        r.push(CheckResult::le(
            format!("packing_log_size[{tag}]"),
            bound,
            (packing.elements.len() as f64).ln(),
        ));
    }
    Ok(r)
}

/// Size, zero word and exhaustive minimum distance of a greedy code.
pub fn code_suite(code: &HypercubeCode) -> CheckReport {
    let mut r = CheckReport::default();
    let n = code.n;
    r.push(CheckResult::le(
        format!("code_size[n={n}]"),
        2f64.powf(n as f64 / 8.0),
        code.len() as f64,
    ));
    r.push(CheckResult::flag(
        format!("code_zero_word[n={n}]"),
        code.words.first() == Some(&0),
    ));
    if let Some(dmin) = code.realized_min_distance() {
        r.push(CheckResult::le(
            format!("code_min_distance[n={n}]"),
            n.div_ceil(8) as f64,
            dmin as f64,
        ));
    }
    r
}

/// Largest `t` for which the pairwise checks of the sign-coefficient family
/// stay exhaustive (code length 13, 4096 words).
pub const SIGN_FAMILY_MAX_T: u32 = 6;

/// The sign-coefficient family at the recommended `γ` for `t`, where `t` is
/// the recommended bandwidth clamped to `[4, SIGN_FAMILY_MAX_T]`.
pub fn sign_family_suite(
    epsilon: f64,
    beta: f64,
    d: usize,
) -> Result<(CheckReport, HypercubeCode)> {
    check_epsilon(epsilon)?;
    let s = 1;
    let (t_rec, _) = sign_family_recommended(epsilon, beta, s);
    let t = t_rec.clamp(4, SIGN_FAMILY_MAX_T);
    let e = 2.0 * beta + s as f64;
    let gamma = ((2.0 * t as f64 + 1.0).powf(e) + 64.0 / (epsilon * epsilon * LN_2)).powf(-0.5);
    let fam = sign_family(gamma, t, s, beta, d)?;
    let tag = format!("t={t};t_rec={t_rec};beta={}", format_real(beta));
    let mut r = code_suite(&fam.code);
    r.push(CheckResult::close(
        format!("sign_family_distance_law[{tag}]"),
        fam.distance_law_error(),
        0.0,
        IDENTITY_TOL,
    ));
    let norm_err = fam
        .members
        .iter()
        .enumerate()
        .map(|(k, f)| {
            (f.flatten().sum_squares() - gamma * gamma * fam.code.words[k].count_ones() as f64)
                .abs()
        })
        .fold(0.0, f64::max);
    r.push(CheckResult::close(
        format!("sign_family_norm[{tag}]"),
        norm_err,
        0.0,
        IDENTITY_TOL,
    ));
    r.push(CheckResult::le(
        format!("sign_family_membership[{tag}]"),
        fam.max_sobolev_form(),
        1.0,
    ));
    r.push(CheckResult::close(
        format!("sign_family_zero_member[{tag}]"),
        fam.members[0].flatten().sum_squares(),
        0.0,
        0.0,
    ));
    let (kl, budget) = fam.kl_budget(epsilon);
    r.push(CheckResult::le(
        format!("sign_family_kl_budget[{tag};eps={}]", format_real(epsilon)),
        kl,
        budget,
    ));
    Ok((r, fam.code))
}

/// Distance and KL identities, ball membership and the KL budget for the
/// sign family over a packing.
pub fn block_family_suite(
    packing: &PackingSet,
    epsilon: f64,
    beta: f64,
    radius: f64,
    seed: u64,
) -> Result<CheckReport> {
    check_epsilon(epsilon)?;
    let probe = BlockFamily::new(0.0, packing)?;
    let (m, s) = (probe.m(), probe.s());
    let d = packing.elements[0].d();
    let k = packing.elements.len();
    let tau = block_family_tau(epsilon, m, s, k, radius);
    let fam = BlockFamily::new(tau, packing)?;
    let mut rng = crate::rng::chacha(seed);
    let ones = vec![1i8; m * s];
    let omegas: Vec<Vec<i8>> = std::iter::once(ones.clone())
        .chain((0..3).map(|_| {
            (0..m * s)
                .map(|_| if rng.random::<bool>() { 1 } else { -1 })
                .collect()
        }))
        .collect();
    let zero = CoefficientMap::new(d);
    let mut members = Vec::new();
    for kk in 0..k {
        for om in &omegas {
            members.push((kk, om.clone(), fam.member(kk, om)?));
        }
    }
    let mut dist_err: f64 = 0.0;
    let mut general_err: f64 = 0.0;
    let mut kl_err: f64 = 0.0;
    let mut ball_ok = true;
    let want_kl = tau * tau / (2.0 * epsilon * epsilon);
    let flat: Vec<CoefficientMap> = members.iter().map(|(_, _, f)| f.flatten()).collect();
    for (a, (ka, oa, fa)) in members.iter().enumerate() {
        kl_err = kl_err.max((kl_divergence(&flat[a], &zero, epsilon) - want_kl).abs());
        for at in &fa.atoms {
            ball_ok &= SobolevBall::new(at.support, beta, radius)?.contains(&at.coeffs, BOUND_TOL);
        }
        for (b, (kb, ob, _)) in members.iter().enumerate() {
            let got = flat[a].squared_distance(&flat[b]);
            general_err =
                general_err.max((got - fam.predicted_distance_sq(*ka, oa, *kb, ob)).abs());
            if *oa == ones && *ob == ones {
                let r = rho(&packing.elements[*ka], &packing.elements[*kb])?;
                dist_err = dist_err.max((got - 2.0 * tau * tau * r).abs());
            }
        }
    }
    let tag = format!("d={d};s={s};m={m};eps={}", format_real(epsilon));
    let mut r = CheckReport::default();
    r.push(CheckResult::close(
        format!("block_family_distance_identity[{tag}]"),
        dist_err,
        0.0,
        IDENTITY_TOL,
    ));
    r.push(CheckResult::close(
        format!("block_family_distance_general[{tag}]"),
        general_err,
        0.0,
        IDENTITY_TOL,
    ));
    r.push(CheckResult::close(
        format!("block_family_kl_identity[{tag}]"),
        kl_err,
        0.0,
        IDENTITY_TOL,
    ));
    r.push(CheckResult::flag(
        format!("block_family_membership[{tag}]"),
        ball_ok,
    ));
    let budget = ((m * s) as f64 * LN_2 + (k as f64).ln()) / 16.0;
    r.push(CheckResult::le(
        format!("block_family_kl_budget[{tag}]"),
        want_kl,
        budget,
    ));
    Ok(r)
}

/// Inputs of a full verification run.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyConfig {
    pub d: usize,
    pub s: usize,
    pub m: usize,
    pub theta: f64,
    pub epsilon: f64,
    pub beta: f64,
    pub radius: f64,
    pub seed: u64,
    pub ceiling: u64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            d: 4,
            s: 2,
            m: 2,
            theta: 0.125,
            epsilon: 0.2,
            beta: 1.0,
            radius: 1.0,
            seed: 0,
            ceiling: PARTITION_CEILING,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOutput {
    pub report: CheckReport,
    pub packing: PackingSet,
    pub code: HypercubeCode,
}

/// Every suite: counting, `ρ` metric, the packing for `(d, s, m, ϑ)`, greedy
/// codes, and both function families.
pub fn verify_bounds(cfg: &VerifyConfig) -> Result<VerifyOutput> {
    if cfg.s == 0 || cfg.m == 0 || cfg.m * cfg.s > cfg.d {
        return Err(Error::Domain(format!(
            "need s, m ≥ 1 and ms ≤ d, got d={}, s={}, m={}",
            cfg.d, cfg.s, cfg.m
        )));
    }
    let packing = greedy_packing(cfg.d, cfg.s, cfg.m, cfg.theta, cfg.ceiling)?;
    let mut report = counting_suite(8, 6, 2, 3, 50)?;
    report.extend(rho_metric_suite(8)?);
    report.extend(packing_suite(&packing, cfg.d, cfg.s, cfg.m, cfg.ceiling)?);
    report.extend(code_suite(&varshamov_gilbert(9)?));
    let (p1, code) = sign_family_suite(cfg.epsilon, cfg.beta, cfg.d)?;
    report.extend(p1);
    report.extend(block_family_suite(
        &packing,
        cfg.epsilon,
        cfg.beta,
        cfg.radius,
        cfg.seed,
    )?);
    Ok(VerifyOutput {
        report,
        packing,
        code,
    })
}
