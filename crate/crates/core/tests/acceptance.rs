//! Runs every acceptance criterion, prints one PASS/FAIL line each and
//! cross-checks the frozen reference values against local oracles. Built
//! without the libtest harness so the summary is always printed.

use bosegas::suite::{run_all, CriterionResult, SuiteConfig};

/// Criteria that fail by analysis rather than by defect; see README.
const KNOWN_FAILURES: &[u8] = &[7];

/// ζ(s) by direct summation with an integral tail, independent of the crate.
fn zeta(s: f64) -> f64 {
    let n = 200_000u64;
    let head: f64 = (1..=n).rev().map(|k| (k as f64).powf(-s)).sum();
    head + (n as f64 + 0.5).powf(1.0 - s) / (s - 1.0)
}

/// ∫_0^∞ e^{-t - a t²/4} dt by composite Simpson on [0, 60].
fn laplace_gaussian(a: f64) -> f64 {
    let m = 600_000;
    let h = 60.0 / m as f64;
    let f = |t: f64| (-t - 0.25 * a * t * t).exp();
    let mut acc = f(0.0) + f(60.0);
    for i in 1..m {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    acc * h / 3.0
}

fn metric(r: &CriterionResult, key: &str) -> f64 {
    *r.metrics.get(key).unwrap_or_else(|| panic!("criterion {} lacks metric {key}", r.id))
}

fn main() {
    let results = run_all(&SuiteConfig::default());
    for r in &results {
        println!("{}", r.summary_line());
        for (k, v) in &r.metrics {
            println!("    {k} = {v:.6e}");
        }
    }

    let rho_c_s2 = zeta(1.5) * (4.0 * std::f64::consts::PI).powf(-1.5);
    let rho_c_s1 = zeta(3.0) / std::f64::consts::PI.powi(2);
    assert!((rho_c_s2 - 0.058_643_6).abs() < 1e-7);
    assert!((rho_c_s1 - 0.121_793_8).abs() < 1e-7);

    let c2 = &results[1];
    assert!(((metric(c2, "rho_c_s2") - rho_c_s2) / rho_c_s2).abs() < 1e-6);
    assert!(((metric(c2, "rho_c_s1") - rho_c_s1) / rho_c_s1).abs() < 1e-6);

    // With ρ̄ = 2ρ_c the condensate density is ρ_c.
    let c3 = &results[2];
    let o1_ref = laplace_gaussian(2.0 * rho_c_s2);
    assert!((metric(c3, "o1_oracle") - o1_ref).abs() < 1e-9, "o1 oracle {o1_ref}");

    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!("failed criteria: {failed:?} (known: {KNOWN_FAILURES:?})");
    assert_eq!(results.len(), 13);
    let unexpected: Vec<u8> = failed.iter().copied().filter(|id| !KNOWN_FAILURES.contains(id)).collect();
    if !unexpected.is_empty() {
        eprintln!("unexpected failures: {unexpected:?}");
        std::process::exit(1);
    }
    println!("acceptance: {} of {} criteria pass", results.len() - failed.len(), results.len());
}
