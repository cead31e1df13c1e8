use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;

use compound_core::bounds::packing::PARTITION_CEILING;
use compound_core::bounds::verify::{verify_bounds as run_checks, VerifyConfig};
use compound_core::coeffs::format_real;
use compound_core::estimator::{exact_aggregate, mcmc_aggregate, DEFAULT_CANDIDATE_CEILING};
use compound_core::model::sample_sobolev_model;
use compound_core::multiindex::enumerate_union;
use compound_core::risk::{
    bandwidth_preconditions, least_favorable_model, mc_risk, minimax_preconditions, rate_fit,
    single_branch, theoretical_rate, EstimatorSpec, RiskReport,
};
use compound_core::rng::{derive_seed, GaussianField};
use compound_core::sequence::observe_on;
use compound_core::{
    CandidateSpace, CompoundFunction, McmcConfig, PriorSpec, SequenceObservation, Structure,
    Support,
};

use crate::config::{check_blocks, check_eps, check_shape, Mode, ModelKind, RunConfig};
use crate::error::CliError;
use crate::manifest::Manifest;

const MODEL_KEYS: [&str; 10] = [
    "d",
    "s",
    "m",
    "beta",
    "L",
    "cutoff",
    "family-rule",
    "seed",
    "mean",
    "model",
];

fn out_dir(c: &RunConfig) -> Result<&Path, CliError> {
    fs::create_dir_all(&c.out).map_err(|e| CliError::io(&c.out, e))?;
    Ok(&c.out)
}

/// Writes `name` inside `dir` through an in-memory buffer.
fn emit(
    dir: &Path,
    name: &str,
    manifest: &mut Manifest,
    fill: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    let p = dir.join(name);
    fs::write(&p, buf).map_err(|e| CliError::io(&p, e))?;
    manifest.outputs.push(name.to_string());
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::from(compound_core::Error::from(e))
}

/// `m` consecutive blocks `{1..s}, {s+1..2s}, …`.
fn block_structure(c: &RunConfig) -> Result<Structure, CliError> {
    let supports = (0..c.m)
        .map(|l| Support::from_coords(&((l * c.s + 1)..=((l + 1) * c.s)).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Structure::new(c.d, c.s, supports, c.family_rule)?)
}

fn record_checks(man: &mut Manifest, c: &RunConfig, eps: f64, cutoff: u32) {
    man.check("0 < eps < 1", eps, 1.0, eps > 0.0 && eps < 1.0);
    man.preconditions(&bandwidth_preconditions(c.beta, c.radius, eps));
    man.preconditions(&minimax_preconditions(c.beta, c.radius, eps, c.s));
    let inv = 1.0 / (eps * eps);
    man.check("cutoff < eps^-2", cutoff as f64, inv, (cutoff as f64) < inv);
    let arg = c.d as f64 / (c.s as f64 * (c.m as f64).powf(1.0 / c.s as f64));
    man.check("d/(s m^(1/s)) > 1", arg, 1.0, arg > 1.0);
}

fn build_model(c: &RunConfig, eps: f64, cutoff: u32) -> Result<CompoundFunction, CliError> {
    let structure = block_structure(c)?;
    Ok(match c.model {
        ModelKind::Sobolev => {
            sample_sobolev_model(&structure, c.beta, c.radius, cutoff, 1.0, c.mean, c.seed)?
        }
        ModelKind::LeastFavorable => {
            let mut f = least_favorable_model(&structure, c.beta, c.radius, eps, c.seed)?;
            f.mean = c.mean;
            f
        }
    })
}

fn support_label(v: Support) -> String {
    v.coords()
        .iter()
        .map(|c| c.to_string())
        .collect::<Vec<_>>()
        .join("+")
}

pub fn simulate(c: &RunConfig) -> Result<(), CliError> {
    check_shape(c)?;
    check_blocks(c)?;
    check_eps("epsilon", c.epsilon)?;
    let cutoff = c.cutoff_or_default();
    let mut keys = MODEL_KEYS.to_vec();
    keys.push("epsilon");
    let mut man = Manifest::new("simulate", c.entries(&keys));
    record_checks(&mut man, c, c.epsilon, cutoff);

    let model = build_model(c, c.epsilon, cutoff)?;
    let pool = CandidateSpace::new(c.d, c.s, c.m, cutoff, c.family_rule)?.pool();
    let indices = enumerate_union(c.d, cutoff, &pool)?;
    let noise_seed = derive_seed(c.seed, 1);
    let obs = observe_on(
        &model.flatten(),
        c.epsilon,
        cutoff,
        indices,
        noise_seed,
        &GaussianField { seed: noise_seed },
    )?;

    let dir = out_dir(c)?;
    let structure = block_structure(c)?;
    emit(dir, "structure.txt", &mut man, |b| {
        b.extend_from_slice(structure.to_text().as_bytes());
        Ok(())
    })?;
    emit(dir, "atoms.csv", &mut man, |b| {
        let mut w = csv::Writer::from_writer(b);
        let mut header = vec!["support".to_string()];
        header.extend((1..=c.d).map(|i| format!("j_{i}")));
        header.push("theta".into());
        w.write_record(&header).map_err(csv_err)?;
        let mut row = vec!["mean".to_string()];
        row.extend((0..c.d).map(|_| "0".to_string()));
        row.push(format_real(model.mean));
        w.write_record(&row).map_err(csv_err)?;
        for a in &model.atoms {
            for (j, v) in &a.coeffs {
                let mut row = vec![support_label(a.support)];
                row.extend(j.entries().iter().map(|e| e.to_string()));
                row.push(format_real(*v));
                w.write_record(&row).map_err(csv_err)?;
            }
        }
        w.flush()
            .map_err(|e| CliError::from(compound_core::Error::from(e)))?;
        Ok(())
    })?;
    emit(dir, "observation.csv", &mut man, |b| Ok(obs.write_csv(b)?))?;

    for (v, form) in model.sobolev_certificates(c.beta) {
        let ok = form <= c.radius * (1.0 + 1e-9);
        println!(
            "sobolev certificate {}: form = {} <= L = {} : {}",
            v,
            format_real(form),
            format_real(c.radius),
            if ok { "ok" } else { "VIOLATED" }
        );
        man.check(
            format!("sobolev form of {} <= L", support_label(v)),
            form,
            c.radius,
            ok,
        );
    }
    man.result("observed_indices", obs.len());
    man.result("noise_seed", noise_seed);
    man.write(dir)
}

pub fn estimate(c: &RunConfig) -> Result<(), CliError> {
    let path = c
        .obs
        .as_ref()
        .ok_or_else(|| CliError::validation("estimate needs --obs <observation.csv>"))?;
    let file =
        File::open(path).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let obs = SequenceObservation::read_csv(BufReader::new(file))?;
    let d = obs.d;
    if c.s == 0 || c.s > d {
        return Err(CliError::validation(format!(
            "s = {} violates 1 <= s <= d = {d}",
            c.s
        )));
    }
    let cutoff = c.cutoff.unwrap_or(obs.cutoff);
    if cutoff == 0 || cutoff > obs.cutoff {
        return Err(CliError::validation(format!(
            "cutoff = {cutoff} violates 1 <= cutoff <= observed cutoff {}",
            obs.cutoff
        )));
    }
    let mut keys = vec!["s", "m", "family-rule", "mode"];
    if c.mode == Mode::Mcmc {
        keys.extend(["steps", "burn-in", "seed"]);
    }
    let mut cfg = c.entries(&keys);
    cfg.insert("d".into(), d.to_string());
    cfg.insert("cutoff".into(), cutoff.to_string());
    cfg.insert("epsilon".into(), format_real(obs.epsilon));
    cfg.insert(
        "obs".into(),
        path.file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default(),
    );
    let mut man = Manifest::new("estimate", cfg);
    man.check("0 < eps < 1", obs.epsilon, 1.0, true);
    let inv = 1.0 / (obs.epsilon * obs.epsilon);
    man.check("cutoff < eps^-2", cutoff as f64, inv, (cutoff as f64) < inv);

    let space = CandidateSpace::new(d, c.s, c.m, cutoff, c.family_rule)?;
    let prior = PriorSpec::from_epsilon(d, obs.epsilon, cutoff);
    let dir = out_dir(c)?;
    match c.mode {
        Mode::Exact => {
            let cands = space.enumerate(DEFAULT_CANDIDATE_CEILING)?;
            let agg = exact_aggregate(&obs, cands, &prior)?;
            emit(dir, "estimate.csv", &mut man, |b| {
                Ok(agg.estimate.write_csv(b, "theta_hat")?)
            })?;
            emit(dir, "ensemble.csv", &mut man, |b| {
                Ok(agg.ensemble.write_csv(b)?)
            })?;
            let top = agg.ensemble.argmax();
            man.result("candidates", agg.ensemble.candidates.len());
            man.result("top_candidate", &agg.ensemble.candidates[top]);
            man.result("top_weight", format_real(agg.ensemble.weights()[top]));
        }
        Mode::Mcmc => {
            let mc = McmcConfig {
                steps: c.steps,
                burn_in: c.burn_in,
                seed: c.seed,
                ..McmcConfig::default()
            };
            let res = mcmc_aggregate(&obs, &space, &prior, mc)?;
            emit(dir, "estimate.csv", &mut man, |b| {
                Ok(res.estimate.write_csv(b, "theta_hat")?)
            })?;
            emit(dir, "estimate_stderr.csv", &mut man, |b| {
                Ok(res.stderr.write_csv(b, "stderr")?)
            })?;
            emit(dir, "chain.csv", &mut man, |b| {
                let mut w = csv::Writer::from_writer(b);
                w.write_record(["candidate", "visits", "frequency"])
                    .map_err(csv_err)?;
                for ((cand, n), (_, f)) in res.visits.iter().zip(res.frequencies()) {
                    w.write_record([cand.to_string(), n.to_string(), format_real(f)])
                        .map_err(csv_err)?;
                }
                w.flush()
                    .map_err(|e| CliError::from(compound_core::Error::from(e)))?;
                Ok(())
            })?;
            man.result("acceptance_rate", format_real(res.acceptance_rate));
            man.result("stderr_l2", format_real(res.stderr_l2));
            man.result("distinct_visited", res.visits.len());
        }
    }
    man.write(dir)
}

pub fn benchmark(c: &RunConfig) -> Result<(), CliError> {
    check_shape(c)?;
    check_blocks(c)?;
    if c.eps_grid.len() < 4 {
        return Err(CliError::validation(format!(
            "eps-grid has {} points; the rate fit needs at least 4",
            c.eps_grid.len()
        )));
    }
    for &e in &c.eps_grid {
        check_eps("eps-grid value", e)?;
    }
    let mut sorted = c.eps_grid.clone();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(CliError::validation("eps-grid values must be distinct"));
    }
    if c.replicates < 2 {
        return Err(CliError::validation(format!(
            "replicates = {} violates replicates >= 2",
            c.replicates
        )));
    }
    let arg = c.d as f64 / (c.s as f64 * (c.m as f64).powf(1.0 / c.s as f64));
    if !(arg > 1.0) {
        return Err(CliError::validation(format!(
            "d/(s m^(1/s)) = {arg} violates d/(s m^(1/s)) > 1"
        )));
    }
    let cutoff = c.cutoff_or_default();
    let rates: Vec<_> = c
        .eps_grid
        .iter()
        .map(|&e| (e, theoretical_rate(c.beta, c.radius, e, c.s, c.m, c.d)))
        .collect();
    let branch = single_branch(
        &rates
            .iter()
            .map(|(e, r)| (*e, r.branch))
            .collect::<Vec<_>>(),
    )
    .map_err(|e| CliError::validation(e.to_string()))?;

    let mut keys = MODEL_KEYS.to_vec();
    keys.extend(["eps-grid", "replicates", "mode"]);
    if c.mode == Mode::Mcmc {
        keys.extend(["steps", "burn-in"]);
    }
    let mut man = Manifest::new("benchmark", c.entries(&keys));
    for &e in &c.eps_grid {
        record_checks(&mut man, c, e, cutoff);
    }

    let space = CandidateSpace::new(c.d, c.s, c.m, cutoff, c.family_rule)?;
    let spec = match c.mode {
        Mode::Exact => {
            space.count(DEFAULT_CANDIDATE_CEILING)?;
            EstimatorSpec::Aggregate(space)
        }
        Mode::Mcmc => EstimatorSpec::Mcmc(
            space,
            McmcConfig {
                steps: c.steps,
                burn_in: c.burn_in,
                seed: c.seed,
                ..McmcConfig::default()
            },
        ),
    };
    let mut reports: Vec<RiskReport> = Vec::with_capacity(c.eps_grid.len());
    for (i, &e) in c.eps_grid.iter().enumerate() {
        let model = build_model(c, e, cutoff)?;
        reports.push(mc_risk(
            &model,
            &spec,
            e,
            c.replicates,
            derive_seed(c.seed, i as u64),
            cutoff,
        )?);
    }
    let fit = rate_fit(&reports, c.beta, c.s)?;

    let dir = out_dir(c)?;
    emit(dir, "risk.csv", &mut man, |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record([
            "epsilon",
            "replicates",
            "mean_mise",
            "stderr",
            "tail_energy",
            "active_branch",
            "theoretical_rate",
        ])
        .map_err(csv_err)?;
        for (r, (_, rate)) in reports.iter().zip(&rates) {
            w.write_record([
                format_real(r.epsilon),
                r.replicates.to_string(),
                format_real(r.mean_mise),
                format_real(r.stderr),
                format_real(r.tail_energy),
                rate.branch.to_string(),
                format_real(rate.value),
            ])
            .map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| CliError::from(compound_core::Error::from(e)))?;
        Ok(())
    })?;
    emit(dir, "rate_fit.txt", &mut man, |b| {
        use std::io::Write;
        let lines = [
            ("slope", format_real(fit.slope)),
            ("intercept", format_real(fit.intercept)),
            ("r_squared", format_real(fit.r_squared)),
            ("target_exponent", format_real(fit.target_exponent)),
            (
                "slope_minus_target",
                format_real(fit.slope - fit.target_exponent),
            ),
            ("points", fit.points.to_string()),
            ("span_decades", format_real(fit.span_decades)),
            ("branch", branch.to_string()),
        ];
        for (k, v) in lines {
            writeln!(b, "{k} = {v}").map_err(|e| CliError::io(Path::new("rate_fit.txt"), e))?;
        }
        Ok(())
    })?;
    emit(dir, "loglog.csv", &mut man, |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record([
            "log_epsilon",
            "log_mean_mise",
            "log_theoretical_rate",
            "log_fitted",
        ])
        .map_err(csv_err)?;
        for (r, (_, rate)) in reports.iter().zip(&rates) {
            let x = r.epsilon.ln();
            w.write_record([
                format_real(x),
                format_real(r.mean_mise.ln()),
                format_real(rate.value.ln()),
                format_real(fit.intercept + fit.slope * x),
            ])
            .map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| CliError::from(compound_core::Error::from(e)))?;
        Ok(())
    })?;
    println!(
        "slope {} (target {}), r^2 {}, branch {}",
        format_real(fit.slope),
        format_real(fit.target_exponent),
        format_real(fit.r_squared),
        branch
    );
    man.result("slope", format_real(fit.slope));
    man.result("target_exponent", format_real(fit.target_exponent));
    man.write(dir)
}

pub fn verify_bounds(c: &RunConfig) -> Result<(), CliError> {
    check_shape(c)?;
    check_blocks(c)?;
    check_eps("epsilon", c.epsilon)?;
    if !(c.theta > 0.0 && c.theta <= 1.0) {
        return Err(CliError::validation(format!(
            "theta = {} violates 0 < theta <= 1",
            c.theta
        )));
    }
    let vc = VerifyConfig {
        d: c.d,
        s: c.s,
        m: c.m,
        theta: c.theta,
        epsilon: c.epsilon,
        beta: c.beta,
        radius: c.radius,
        seed: c.seed,
        ceiling: PARTITION_CEILING,
    };
    let out = run_checks(&vc)?;
    let mut man = Manifest::new(
        "verify-bounds",
        c.entries(&["d", "s", "m", "theta", "epsilon", "beta", "L", "seed"]),
    );
    man.check("0 < eps < 1", c.epsilon, 1.0, true);
    let dir = out_dir(c)?;
    emit(dir, "checks.csv", &mut man, |b| {
        Ok(out.report.write_csv(b)?)
    })?;
    emit(dir, "packing.txt", &mut man, |b| {
        Ok(out.packing.write_dump(b)?)
    })?;
    emit(dir, "code.txt", &mut man, |b| Ok(out.code.write_dump(b)?))?;
    let failed: Vec<&str> = out.report.failures().map(|f| f.name.as_str()).collect();
    man.result("checks", out.report.len());
    man.result("failed", failed.len());
    man.result("packing_size", out.packing.elements.len());
    man.result("code_size", out.code.len());
    man.write(dir)?;
    println!("{} checks, {} failed", out.report.len(), failed.len());
    if !failed.is_empty() {
        return Err(CliError::check_failed(format!(
            "failed checks: {}",
            failed.join(", ")
        )));
    }
    Ok(())
}
