//! Order parameters o⁽⁰⁾ and o⁽¹⁾ along volume chains, the BEC verdict,
//! and the norm/commutator bounds tied to the center.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forms::FormContext;
use crate::model::{ModelParams, TestFunction};
use crate::numerics::quad::{integrate_real, QuadOptions};
use crate::numerics::special::laplace_gaussian;
use crate::states::{mean_functional, ComponentLabel};
use crate::thermo::{condensate_density, solve_fugacity_auto, CriticalData};

/// ∫₀^∞ e^{-t} exp(-t²A/4) dt = sqrt(π/A) e^{1/A} erfc(1/√A).
pub fn order_parameter_value(a: f64) -> Result<f64> {
    if !(a >= 0.0) || a.is_infinite() {
        return Err(invalid("order-parameter coefficient must be finite and non-negative"));
    }
    Ok(laplace_gaussian(a))
}

/// Coefficient A of the defining integral: (y+1)/(y−1) for # = 0 and
/// (y+1)N₀(y)/V for # = 1.
pub fn order_parameter_coefficient(sharpness: u8, y_v: f64, volume: f64) -> Result<f64> {
    let delta = y_v - 1.0;
    if !(delta > 0.0) {
        return Err(Error::Numerical(format!("fugacity y_V = {y_v} is not above 1")));
    }
    match sharpness {
        0 => Ok((y_v + 1.0) / delta),
        1 => Ok((y_v + 1.0) / (delta * volume)),
        _ => Err(invalid("probe sharpness must be 0 or 1")),
    }
}

/// Finite-volume data of both order parameters at one side length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainPoint {
    pub l: f64,
    pub volume: f64,
    pub y_v: f64,
    pub a0: f64,
    pub a1: f64,
    pub o0: f64,
    pub o1: f64,
}

pub fn order_parameter_finite_l(params: &ModelParams, l: f64) -> Result<ChainPoint> {
    let p = params.with_l(l);
    let (sol, delta) = solve_fugacity_auto(&p, l)?;
    if !(delta > 0.0) {
        return Err(Error::Numerical(format!("fugacity y_V − 1 = {delta} at L = {l}")));
    }
    let volume = p.volume();
    // (y+1)/(y−1) from δ = y − 1 keeps precision as y ↓ 1.
    let a0 = (2.0 + delta) / delta;
    let a1 = a0 / volume;
    Ok(ChainPoint { l, volume, y_v: sol.y_v, a0, a1, o0: laplace_gaussian(a0), o1: laplace_gaussian(a1) })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Bec,
    NoBec,
    Inconclusive,
}

/// Verdicts and limits extracted from a geometric L-chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderParameterTrace {
    pub points: Vec<ChainPoint>,
    pub critical: CriticalData,
    /// Growth exponent of A₀ against V over the last chain step.
    pub a0_exponent: f64,
    /// Growth exponent of A₁ against V over the last chain step.
    pub a1_exponent: f64,
    pub o0_verdict: Verdict,
    pub o1_verdict: Verdict,
    pub thermo_verdict: Verdict,
    pub verdict: Verdict,
    /// o⁽¹⁾ at A_∞ = (y_∞ + 1) n₀ from the infinite-volume thermodynamics.
    pub o1_limit: f64,
    pub a1_limit: f64,
    /// Richardson extrapolation of A₁ (1/L and 1/L² terms removed) and its o⁽¹⁾.
    pub a1_richardson: Option<f64>,
    pub o1_richardson: Option<f64>,
    /// |o⁽¹⁾(L_{i+1}) − o⁽¹⁾(L_i)|.
    pub o1_cauchy_gaps: Vec<f64>,
    pub o1_increasing: bool,
    /// |o⁽¹⁾(L) − o1_limit| strictly decreasing along the chain.
    pub o1_approaches_limit: bool,
    pub y_decreasing: bool,
    pub diagnostics: Vec<String>,
}

/// Relative distance to ρ_c below which the thermodynamic verdict is
/// reported as inconclusive.
pub const BOUNDARY_TOL: f64 = 1e-9;

fn growth_exponent(a: &ChainPoint, b: &ChainPoint, pick: fn(&ChainPoint) -> f64) -> f64 {
    (pick(b) / pick(a)).ln() / (b.volume / a.volume).ln()
}

pub fn detect_bec(params: &ModelParams, l_chain: &[f64]) -> Result<OrderParameterTrace> {
    params.validate()?;
    if l_chain.len() < 3 {
        return Err(invalid("order-parameter chain needs at least 3 volumes"));
    }
    if l_chain.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("chain side lengths must increase"));
    }
    let points: Vec<ChainPoint> =
        l_chain.par_iter().map(|&l| order_parameter_finite_l(params, l)).collect::<Result<Vec<_>>>()?;
    let critical = condensate_density(params.beta, params.rho_bar, params.d, params.s)?;
    let y_inf = critical.y_inf;

    let n = points.len();
    let (prev, last) = (&points[n - 2], &points[n - 1]);
    let a0_exponent = growth_exponent(prev, last, |p| p.a0);
    let a1_exponent = growth_exponent(prev, last, |p| p.a1);
    let o0_decreasing = points.windows(2).all(|w| w[1].o0 < w[0].o0);

    let o0_verdict = if a0_exponent > 0.5 && o0_decreasing { Verdict::Bec } else { Verdict::NoBec };
    let o1_verdict = if a1_exponent > -0.5 { Verdict::Bec } else { Verdict::NoBec };
    let rel = (params.rho_bar - critical.rho_c) / critical.rho_c;
    let thermo_verdict = if rel > BOUNDARY_TOL {
        Verdict::Bec
    } else if rel < -BOUNDARY_TOL {
        Verdict::NoBec
    } else {
        Verdict::Inconclusive
    };

    let mut diagnostics = Vec::new();
    let verdict = if o0_verdict == o1_verdict && o1_verdict == thermo_verdict {
        thermo_verdict
    } else {
        diagnostics.push(format!(
            "verdicts disagree: o0 {o0_verdict:?} (A0 exponent {a0_exponent:.3}), o1 {o1_verdict:?} (A1 exponent {a1_exponent:.3}), thermo {thermo_verdict:?} (relative excess {rel:.3e})"
        ));
        Verdict::Inconclusive
    };

    let a1_limit = (y_inf + 1.0) * critical.n0;
    let o1_limit = laplace_gaussian(a1_limit);
    let o1_increasing = points.windows(2).all(|w| w[1].o1 > w[0].o1);
    let o1_approaches_limit = points.windows(2).all(|w| (w[1].o1 - o1_limit).abs() < (w[0].o1 - o1_limit).abs());
    if !o1_approaches_limit {
        diagnostics.push("o1 trace does not approach its infinite-volume value monotonically".into());
    }
    let y_decreasing = points.windows(2).all(|w| w[1].y_v < w[0].y_v);
    if !y_decreasing {
        diagnostics.push("y_V is not strictly decreasing along the chain".into());
    }

    let geometric = l_chain.windows(2).all(|w| ((w[1] / w[0]) - 2.0).abs() < 1e-12);
    let a1_richardson = if geometric {
        let r1: Vec<f64> = points.windows(2).map(|w| 2.0 * w[1].a1 - w[0].a1).collect();
        Some((4.0 * r1[r1.len() - 1] - r1[r1.len() - 2]) / 3.0)
    } else {
        None
    };
    let o1_richardson = a1_richardson.map(|a| laplace_gaussian(a.max(0.0)));
    let o1_cauchy_gaps = points.windows(2).map(|w| (w[1].o1 - w[0].o1).abs()).collect();

    Ok(OrderParameterTrace {
        points,
        critical,
        a0_exponent,
        a1_exponent,
        o0_verdict,
        o1_verdict,
        thermo_verdict,
        verdict,
        o1_limit,
        a1_limit,
        a1_richardson,
        o1_richardson,
        o1_cauchy_gaps,
        o1_increasing,
        o1_approaches_limit,
        y_decreasing,
        diagnostics,
    })
}

/// V^{-1/2} ‖f‖₁ / λ², the bound on ‖[R(1, b_L⁽⁰⁾), R(λ, f)]‖.
pub fn commutator_bound(l: f64, d: u32, f: &TestFunction, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(invalid("λ = 0 is not a resolvent parameter"));
    }
    commutator_bound_from_norm(l.powi(d as i32), f.l1_norm_bound()?, lambda)
}

pub fn commutator_bound_from_norm(volume: f64, l1_norm: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 {
        return Err(invalid("λ = 0 is not a resolvent parameter"));
    }
    if !(volume > 0.0) || !(l1_norm >= 0.0) {
        return Err(invalid("need V > 0 and ‖f‖₁ ≥ 0"));
    }
    Ok(l1_norm / (volume.sqrt() * lambda * lambda))
}

/// ℓ_{β,r,θ}(b_L⁽⁰⁾), using b̂_L⁽⁰⁾(0) = (2π)^{-d/2} V^{1/2}.
fn probe_mean(label: &ComponentLabel, l: f64, ctx: &FormContext) -> f64 {
    let v = l.powi(ctx.d as i32);
    let b0 = (2.0 * PI).powf(-(ctx.d as f64) / 2.0) * v.sqrt();
    mean_functional(label, Complex64::new(b0, 0.0), ctx.c_const())
}

/// 1/|1 − iℓ(b_L⁽⁰⁾)| on the fiber (r, θ).
pub fn fiber_norm_bound(label: &ComponentLabel, l: f64, ctx: &FormContext) -> f64 {
    let ell = probe_mean(label, l, ctx);
    1.0 / (1.0 + ell * ell).sqrt()
}

fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..64 {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let m = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = m;
    }
    0.5 * (a + b)
}

/// χ-average of [`fiber_norm_bound`]. The θ-average of
/// (1 + m cos²θ)^{-1/2} is 1/AGM(√(1+m), 1); the r-integral is adaptive.
pub fn fiber_norm_bound_chi_average(l: f64, ctx: &FormContext) -> Result<f64> {
    let v = l.powi(ctx.d as i32);
    let b = ctx.c_const() * v / (2.0 * PI).powi(ctx.d as i32);
    let mut breaks = vec![0.0];
    let mut x = 1e-8_f64.max(1e-3 / b.max(1e-300));
    while x < 60.0 {
        breaks.push(x);
        x *= 4.0;
    }
    breaks.push(60.0);
    let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_evals: 2_000_000 };
    let r = integrate_real(|r| (-r).exp() / agm((1.0 + b * r).sqrt(), 1.0), &breaks, &opts);
    if !r.converged {
        return Err(Error::Numerical("fiber-bound average did not converge".into()));
    }
    Ok(r.value.re)
}

/// F(r, θ) = 1/(i z), z = 1 − i a √r cos θ, a = 2√c.
pub fn central_element(label: &ComponentLabel, ctx: &FormContext) -> Complex64 {
    let a = 2.0 * ctx.c_const().sqrt();
    let z = Complex64::new(1.0, -a * label.r.sqrt() * label.theta.cos());
    Complex64::new(0.0, 1.0).inv() * z.inv()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::integrate;
    use crate::thermo::critical_density;
    use proptest::prelude::*;

    fn ctx() -> FormContext {
        FormContext::new(1.0, 0.0, 3, 2.0, 0.058_646).unwrap()
    }

    #[test]
    fn closed_form_values() {
        assert_eq!(order_parameter_value(0.0).unwrap(), 1.0);
        assert!((order_parameter_value(1.0).unwrap() - 0.757_872_156_141_312_1).abs() < 1e-14);
        assert!(order_parameter_value(-1.0).is_err());
        assert!(order_parameter_coefficient(0, 1.0, 8.0).is_err());
        assert!((order_parameter_coefficient(1, 3.0, 4.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn closed_form_matches_adaptive_quadrature() {
        for a in [0.05, 0.117_291, 1.0, 7.5, 300.0] {
            let q = integrate(|t| Complex64::new((-t - 0.25 * a * t * t).exp(), 0.0), &[0.0, 1.0, 4.0, 12.0, 50.0], &QuadOptions::default());
            let v = order_parameter_value(a).unwrap();
            assert!(((q.value.re - v) / v).abs() < 1e-10, "{a}");
        }
    }

    #[test]
    fn chain_verdicts_in_both_phases() {
        let rho_c = critical_density(1.0, 3, 2.0).unwrap().0;
        let chain = [4.0, 8.0, 16.0];
        let bec = detect_bec(&ModelParams::new(3, 2.0, 1.0, 0.0, 2.0 * rho_c, 4.0).unwrap(), &chain).unwrap();
        assert_eq!(bec.verdict, Verdict::Bec, "{:?}", bec.diagnostics);
        // A₁ decreases toward 2n₀ from above, so o⁽¹⁾ increases toward its limit.
        assert!(bec.o1_increasing && bec.o1_approaches_limit && bec.y_decreasing);
        assert!(bec.o1_limit < 1.0);
        assert!((bec.a1_limit - 2.0 * rho_c).abs() < 1e-9);
        assert!(bec.o1_cauchy_gaps[1] < bec.o1_cauchy_gaps[0]);
        let no = detect_bec(&ModelParams::new(3, 2.0, 1.0, 0.0, 0.5 * rho_c, 4.0).unwrap(), &chain).unwrap();
        assert_eq!(no.verdict, Verdict::NoBec, "{:?}", no.diagnostics);
        assert!(no.o1_increasing && no.o1_approaches_limit && (no.o1_limit - 1.0).abs() < 1e-15);
        assert!(detect_bec(&ModelParams::new(3, 2.0, 1.0, 0.0, 0.5 * rho_c, 4.0).unwrap(), &[4.0, 8.0]).is_err());
    }

    #[test]
    fn commutator_bound_examples() {
        assert!((commutator_bound_from_norm(100.0, 1.0, 1.0).unwrap() - 0.1).abs() < 1e-15);
        let f = TestFunction::gaussian(3, Complex64::new(1.0, 0.0), 1.0).unwrap();
        let a = commutator_bound(4.0, 3, &f, 1.0).unwrap();
        let b = commutator_bound(8.0, 3, &f, 1.0).unwrap();
        assert!((b / a - 8f64.powf(-0.5)).abs() < 1e-14);
        let c = commutator_bound(4.0, 3, &f, 2.0).unwrap();
        assert!((c / a - 0.25).abs() < 1e-15);
        assert!(commutator_bound(4.0, 3, &f, 0.0).is_err());
    }

    #[test]
    fn fiber_bound_examples() {
        let c = ctx();
        let zero = ComponentLabel::new(0.0, 0.3).unwrap();
        assert_eq!(fiber_norm_bound(&zero, 16.0, &c), 1.0);
        let side = ComponentLabel::new(2.0, PI / 2.0).unwrap();
        for l in [4.0, 8.0, 16.0] {
            assert!((fiber_norm_bound(&side, l, &c) - 1.0).abs() < 1e-15);
        }
        let one = ComponentLabel::new(1.0, 0.0).unwrap();
        let vals: Vec<f64> = [4.0, 8.0, 16.0].iter().map(|&l| fiber_norm_bound(&one, l, &c)).collect();
        assert!(vals[0] > vals[1] && vals[1] > vals[2]);
        let v = 16f64.powi(3);
        let asym = (c.c_const() * v / (2.0 * PI).powi(3)).powf(-0.5);
        assert!((vals[2] / asym - 1.0).abs() < 5e-3);
    }

    #[test]
    fn fiber_bound_average_matches_2d_quadrature_and_decays() {
        let c = ctx();
        let avg = fiber_norm_bound_chi_average(2.0, &c).unwrap();
        // Brute force: adaptive in r of a trapezoid θ-average.
        let b = c.c_const() * 8.0 / (2.0 * PI).powi(3);
        let m = 4096;
        let inner = |r: f64| (0..m).map(|j| 1.0 / (1.0 + b * r * (2.0 * PI * j as f64 / m as f64).cos().powi(2)).sqrt()).sum::<f64>() / m as f64;
        let brute = integrate_real(|r| (-r).exp() * inner(r), &[0.0, 0.1, 1.0, 5.0, 60.0], &QuadOptions { abs_tol: 1e-12, rel_tol: 1e-10, max_evals: 200_000 });
        assert!((avg - brute.value.re).abs() < 1e-8, "{avg} vs {}", brute.value.re);
        let big = fiber_norm_bound_chi_average(16.0, &c).unwrap();
        assert!(big < avg && big > 0.0);
    }

    #[test]
    fn central_element_examples() {
        let c = ctx();
        let f0 = central_element(&ComponentLabel::new(0.0, 1.0).unwrap(), &c);
        assert!((f0 - Complex64::new(0.0, -1.0)).norm() < 1e-15);
        let a = 2.0 * c.c_const().sqrt();
        let r = (1.0 / a).powi(2);
        let f = central_element(&ComponentLabel::new(r, 0.0).unwrap(), &c);
        assert!((f.norm() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn central_element_bounded_and_reflected(r in 0.0f64..50.0, theta in 0.0f64..std::f64::consts::TAU) {
            let c = ctx();
            let f = central_element(&ComponentLabel::new(r, theta).unwrap(), &c);
            let g = central_element(&ComponentLabel::new(r, theta + PI).unwrap(), &c);
            prop_assert!(f.norm() <= 1.0 + 1e-15);
            // z(θ+π) = conj z(θ), so F(θ+π) = −conj F(θ).
            prop_assert!((g + f.conj()).norm() < 1e-12);
        }

        #[test]
        fn order_parameter_in_unit_interval(a in 0.0f64..1e6) {
            let v = order_parameter_value(a).unwrap();
            prop_assert!(v > 0.0 && v <= 1.0);
        }
    }
}
