use std::fmt;

use anyhow::Context;
use bosegas::decomposition::{clustering_scan, decompose_two_point, verify_mixing_identity};
use bosegas::pathspace::{
    euclidean_correlation, markov_identity_check, matsubara_sum, sample_field, samples_to_csv, trace_condition_check,
    validate_sampler, ModePath, ModeTable, TraceCutoffs,
};
use bosegas::quasilocal::{consistency_check, projective_marginals, pushforward_check};
use bosegas::suite::{gaussian_grid, run_one, SuiteConfig};
use bosegas::thermo::{condensate_density, solve_fugacity_auto};
use bosegas::{
    detect_bec, ChiMode, ComponentLabel, FormChoice, FormContext, ModeIndex, ModelParams, PathSpaceSpec, ProjectiveChain,
    RegExponents, StateOptions, TestFunction, TraceVerdict, Verdict,
};
use num_complex::Complex64;
use serde_json::json;

use crate::config::*;
use crate::report::{Checks, Outcome};

/// Bad flags or config values; maps to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

fn json_only(format: Format, command: &str) -> anyhow::Result<()> {
    if format == Format::Csv {
        return Err(usage(format!("`{command}` has no CSV output")));
    }
    Ok(())
}

fn gaussian(spec: &[f64]) -> anyhow::Result<TestFunction> {
    let [re, im, sigma] = spec else { return Err(usage("a Gaussian takes re,im,sigma")) };
    Ok(TestFunction::gaussian(3, Complex64::new(*re, *im), *sigma)?)
}

fn form_context(beta: f64, rho_bar: f64, s: f64) -> anyhow::Result<FormContext> {
    let crit = condensate_density(beta, rho_bar, 3, s)?;
    Ok(FormContext::new(beta, 0.0, 3, s, crit.n0)?)
}

pub fn thermo(cfg: &ThermoConfig, format: Format) -> anyhow::Result<Outcome> {
    json_only(format, "thermo")?;
    let params = ModelParams::new(cfg.d, cfg.s, cfg.beta, cfg.mu, cfg.rho_bar, cfg.l_chain.first().copied().unwrap_or(1.0))?;
    let crit = condensate_density(cfg.beta, cfg.rho_bar, cfg.d, cfg.s)?;
    let mut checks = Checks::default();
    checks.at_most("rho_c_relative_error", crit.rho_c_error / crit.rho_c, cfg.tol);
    let mut boxes = Vec::new();
    for &l in &cfg.l_chain {
        let (sol, y_minus_one) = solve_fugacity_auto(&params.with_l(l), l)?;
        checks.at_most(format!("density_residual_L{l}"), sol.residual / cfg.rho_bar, cfg.tol);
        boxes.push(json!({ "solution": sol, "y_minus_one": y_minus_one }));
    }
    let rel = (cfg.rho_bar - crit.rho_c) / crit.rho_c;
    let verdict = if cfg.mu < 0.0 || rel < -bosegas::order_param::BOUNDARY_TOL {
        Verdict::NoBec
    } else if rel > bosegas::order_param::BOUNDARY_TOL {
        Verdict::Bec
    } else {
        Verdict::Inconclusive
    };
    Ok(Outcome { results: json!({ "critical": crit, "boxes": boxes, "verdict": verdict }), checks, csv: None, timing: None })
}

pub fn order_param(cfg: &OrderParamConfig, format: Format) -> anyhow::Result<Outcome> {
    let params = ModelParams::new(cfg.d, cfg.s, cfg.beta, cfg.mu, cfg.rho_bar, cfg.l_chain.first().copied().unwrap_or(1.0))?;
    let trace = detect_bec(&params, &cfg.l_chain)?;
    let mut checks = Checks::default();
    checks.flag("verdicts_agree", trace.o0_verdict == trace.o1_verdict && trace.o1_verdict == trace.thermo_verdict);
    checks.flag("conclusive", trace.verdict != Verdict::Inconclusive);
    let csv = (format == Format::Csv).then(|| {
        let mut out = String::from("l,volume,y_v,a0,a1,o0,o1\n");
        for p in &trace.points {
            out.push_str(&format!("{},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n", p.l, p.volume, p.y_v, p.a0, p.a1, p.o0, p.o1));
        }
        out
    });
    Ok(Outcome { results: serde_json::to_value(&trace)?, checks, csv, timing: None })
}

pub fn mixing(cfg: &MixingConfig, format: Format) -> anyhow::Result<Outcome> {
    json_only(format, "mixing")?;
    let ctx = form_context(cfg.beta, cfg.rho_bar, cfg.s)?;
    let grid = gaussian_grid(cfg.grid, cfg.seed);
    let mut checks = Checks::default();
    let mut rows = Vec::new();
    for (i, f) in grid.iter().enumerate() {
        let mode = match cfg.mode.as_str() {
            "quadrature" => ChiMode::Quadrature { tol: 1e-12, max_order: 256 },
            "mc" => ChiMode::MonteCarlo { n: cfg.samples, seed: cfg.seed.wrapping_add(i as u64) },
            other => return Err(usage(format!("unknown mode `{other}` (quadrature|mc)"))),
        };
        let rep = verify_mixing_identity(f, &ctx, mode)?;
        match rep.z_scores {
            Some([zr, zi]) => checks.at_most(format!("z_score_{i}"), zr.max(zi), cfg.sigmas),
            None => checks.at_most(format!("gap_{i}"), rep.abs_gap, cfg.tol),
        }
        rows.push(rep);
    }
    Ok(Outcome { results: json!({ "n0": ctx.n0, "reports": rows }), checks, csv: None, timing: None })
}

pub fn decompose(cfg: &DecomposeConfig, format: Format) -> anyhow::Result<Outcome> {
    json_only(format, "decompose")?;
    let ctx = form_context(cfg.beta, cfg.rho_bar, cfg.s)?;
    let (f, g) = (gaussian(&cfg.f)?, gaussian(&cfg.g)?);
    let rep = decompose_two_point(cfg.lambda, &f, cfg.nu, &g, &ctx, &StateOptions::default(), cfg.chi_tol)?;
    let mut checks = Checks::default();
    checks.at_most("gap", rep.gap, rep.tolerance);
    Ok(Outcome { results: serde_json::to_value(&rep)?, checks, csv: None, timing: None })
}

pub fn clustering(cfg: &ClusteringConfig, format: Format) -> anyhow::Result<Outcome> {
    let ctx = form_context(cfg.beta, cfg.rho_bar, cfg.s)?;
    let (f, g) = (gaussian(&cfg.f)?, gaussian(&cfg.g)?);
    let form = match cfg.form.as_str() {
        "bec" => FormChoice::Bec,
        "nonzero" => FormChoice::Nonzero,
        "component" => FormChoice::Component(ComponentLabel::new(cfg.r, cfg.theta)?),
        other => return Err(usage(format!("unknown form `{other}` (bec|nonzero|component)"))),
    };
    let scan = clustering_scan(&f, &g, &form, 1.0, 1.0, &cfg.u, &ctx, &StateOptions::default())?;
    let last = scan.rows.last().context("empty u list")?;
    let mut checks = Checks::default();
    if scan.limit_gap > cfg.ratio_tol * scan.gap_at_zero {
        // Non-factorizing: the gap must settle on the explicit limit.
        checks.at_most("distance_to_limit", (last.two_point - scan.limit).norm(), cfg.limit_tol);
    } else {
        checks.at_most("gap_ratio", last.gap / scan.gap_at_zero, cfg.ratio_tol);
    }
    let csv = (format == Format::Csv).then(|| {
        let mut out = String::from("u,re,im,gap\n");
        for r in &scan.rows {
            out.push_str(&format!("{},{:.17e},{:.17e},{:.17e}\n", r.u, r.two_point.re, r.two_point.im, r.gap));
        }
        out
    });
    Ok(Outcome { results: serde_json::to_value(&scan)?, checks, csv, timing: None })
}

fn regularizer(cfg: &PathspaceConfig) -> anyhow::Result<RegExponents> {
    let std = RegExponents::standard(cfg.s).unwrap_or(RegExponents { r: 1.0, u: 2.0, a: 1.0 });
    Ok(RegExponents { r: cfg.reg_r.unwrap_or(std.r), u: cfg.reg_u.unwrap_or(std.u), a: cfg.reg_a.unwrap_or(std.a) })
}

pub fn pathspace(cfg: &PathspaceConfig, format: Format) -> anyhow::Result<Outcome> {
    let mut checks = Checks::default();
    if format == Format::Csv && cfg.check != "sample" {
        return Err(usage("CSV output is only available for --check sample"));
    }
    let results = match cfg.check.as_str() {
        "matsubara" => {
            let mut rows = Vec::new();
            for &t in &cfg.t {
                let rep = matsubara_sum(t, cfg.eps, cfg.beta, cfg.n_max)?;
                checks.at_most(format!("relative_gap_t{t}"), rep.relative_gap, 1e-4);
                rows.push(rep);
            }
            serde_json::to_value(rows)?
        }
        "trace" => {
            let reg = regularizer(cfg)?;
            let rep = trace_condition_check(cfg.d, cfg.s, reg, cfg.beta, TraceCutoffs::default())?;
            // The constraints are sufficient, not necessary.
            let consistent = if rep.constraints.all() { rep.verdict == TraceVerdict::Converged } else { rep.verdict != TraceVerdict::Inconclusive };
            checks.flag("verdict_consistent", consistent);
            serde_json::to_value(rep)?
        }
        "markov" => {
            let path = ModePath::matsubara(cfg.beta, cfg.eps, cfg.mode_n, Complex64::new(1.0, 0.0))?;
            let rep = markov_identity_check(&path, cfg.grid_points)?;
            checks.at_most("composition", rep.composition_gap, cfg.tol);
            checks.at_most("q_identity", rep.q_identity_gap / rep.q_f.max(1.0), cfg.tol);
            checks.at_most("idempotency", rep.idempotency_gap, cfg.tol);
            checks.at_most("reflection", rep.reflection_gap, cfg.tol);
            serde_json::to_value(rep)?
        }
        "correlation" => {
            let spec = PathSpaceSpec::new(
                cfg.beta,
                cfg.s,
                1,
                cfg.mu.min(-0.5),
                std::f64::consts::TAU,
                1,
                vec![ModeIndex(vec![-1]), ModeIndex(vec![0]), ModeIndex(vec![1])],
                RegExponents { r: 1.0, u: 2.0, a: 1.0 },
            )?;
            let times: Vec<f64> = cfg.t.iter().map(|t| t.clamp(0.0, cfg.beta / 2.0)).collect();
            let g_list: Vec<Vec<f64>> = (0..times.len()).map(|i| vec![0.7 - 0.2 * i as f64, 0.3, -0.2 + 0.1 * i as f64]).collect();
            let rep = euclidean_correlation(&times, &g_list, &spec)?;
            checks.at_most("gap", rep.gap, cfg.tol);
            json!({ "times": times, "g": g_list, "report": rep })
        }
        "sample" => {
            let spec = PathSpaceSpec::cube(cfg.beta, cfg.s, cfg.d, cfg.l, cfg.n_mats, cfg.k_max_index, regularizer(cfg)?)?;
            if format == Format::Csv {
                let samples = sample_field(&spec, cfg.seed, cfg.samples)?;
                let csv = samples_to_csv(&spec, &samples)?;
                return Ok(Outcome { results: json!({ "n_samples": cfg.samples }), checks, csv: Some(csv), timing: None });
            }
            let table = ModeTable::new(&spec)?;
            let (f, g) = (table.unit(0), table.unit(table.len().min(2) - 1));
            let rep = validate_sampler(&spec, &f, &g, cfg.shift, cfg.seed, cfg.samples)?;
            for (name, c) in rep.comparisons() {
                checks.at_most(format!("z_{name}"), c.z_score, cfg.sigmas);
            }
            serde_json::to_value(rep)?
        }
        other => return Err(usage(format!("unknown check `{other}` (matsubara|trace|markov|correlation|sample)"))),
    };
    Ok(Outcome { results, checks, csv: None, timing: None })
}

pub fn quasilocal(cfg: &QuasilocalConfig, format: Format) -> anyhow::Result<Outcome> {
    json_only(format, "quasilocal")?;
    let chain = ProjectiveChain::from_spec(cfg.beta, cfg.s, cfg.d, cfg.n_mats, cfg.k_max, &cfg.chain)?;
    let grid: Vec<_> = (0..cfg.grid).map(|i| chain.random_vector(0, 6, cfg.seed.wrapping_add(i as u64))).collect();
    let consistency = consistency_check(&chain, &grid, cfg.seed)?;
    let marginals = projective_marginals(&chain, &grid)?;
    let mut checks = Checks::default();
    checks.at_most("algebraic", consistency.max_gap, cfg.tol);
    checks.at_most("marginals", marginals.max_gap, cfg.tol);
    let mut push = Vec::new();
    for level in 0..chain.levels() - 1 {
        let f = chain.embed_to(&grid[0], level)?;
        let rep = pushforward_check(&chain, &f, cfg.seed.wrapping_add(level as u64), cfg.samples)?;
        checks.at_most(format!("pushforward_z_level{level}"), rep.char_re.z_score.max(rep.char_im.z_score), cfg.sigmas);
        push.push(rep);
    }
    Ok(Outcome { results: json!({ "chain": chain, "consistency": consistency, "marginals": marginals, "pushforward": push }), checks, csv: None, timing: None })
}

pub fn all(cfg: &AllConfig, format: Format) -> anyhow::Result<Outcome> {
    json_only(format, "all")?;
    let suite = SuiteConfig { seed: cfg.seed, mixing_samples: cfg.mixing_samples, samples: cfg.samples, sigmas: cfg.sigmas };
    let ids: Vec<u8> = match &cfg.only {
        None => (1..=13).collect(),
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<u8>().map_err(|_| usage(format!("bad criterion id `{s}`"))))
            .collect::<anyhow::Result<_>>()?,
    };
    let mut checks = Checks::default();
    let mut results = Vec::new();
    let mut runtimes = serde_json::Map::new();
    for id in ids {
        let r = run_one(id, &suite).ok_or_else(|| usage(format!("no criterion {id}")))?;
        eprintln!("{}", r.summary_line());
        checks.flag(format!("criterion_{id:02}"), r.passed);
        runtimes.insert(format!("criterion_{id:02}"), json!(r.runtime_s));
        let mut v = serde_json::to_value(&r)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("runtime_s");
            if let Some(c) = obj.get_mut("checks").and_then(|c| c.as_object_mut()) {
                c.remove("runtime");
            }
        }
        results.push(v);
    }
    Ok(Outcome { results: json!(results), checks, csv: None, timing: Some(json!(runtimes)) })
}
