//! Quasi-free state expectations: Weyl characteristic values and resolvent
//! one- and two-point functions for the non-zero mode state, the BEC state
//! and the component states ψ_{r,θ}, plus the four-point positivity
//! combination.
//!
//! Resolvent values are `prefactor^n · raw`, where `raw` is the Laplace
//! integral ∫₀^{sgn λ·∞} e^{-λs} ψ(W(sf)) ds (and its two-variable analogue)
//! and `prefactor` is ±i.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forms::{q_nonzero_pair, FormContext};
use crate::model::TestFunction;
use crate::numerics::quad::{gauss_laguerre_cached, gauss_legendre_cached};

/// Fiber label (r, θ) of a component state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentLabel {
    pub r: f64,
    pub theta: f64,
}

impl ComponentLabel {
    pub fn new(r: f64, theta: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() || !theta.is_finite() {
            return Err(invalid("component label needs finite r ≥ 0 and finite θ"));
        }
        Ok(Self { r, theta: theta.rem_euclid(TAU) })
    }
}

/// Which state an expectation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FormChoice {
    Nonzero,
    Bec,
    Component(ComponentLabel),
}

/// ℓ_{β,r,θ}(f) = sqrt(c r) Re(e^{iθ} f̂(0)).
pub fn mean_functional(label: &ComponentLabel, f_hat_zero: Complex64, c: f64) -> f64 {
    (c * label.r).sqrt() * (Complex64::from_polar(1.0, label.theta) * f_hat_zero).re
}

/// A state value with its quadrature error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Expectation {
    pub value: Complex64,
    pub quadrature_error: f64,
    pub converged: bool,
}

/// Evaluation settings for resolvent expectations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateOptions {
    /// Unit prefactor of the resolvent, +i or −i.
    pub prefactor: Complex64,
    /// Agreement required between successive Gauss–Laguerre orders,
    /// relative to the resolvent norm bound.
    pub tol: f64,
    pub min_order: usize,
    pub max_order: usize,
}

impl Default for StateOptions {
    fn default() -> Self {
        Self { prefactor: Complex64::new(0.0, 1.0), tol: 1e-11, min_order: 16, max_order: 512 }
    }
}

impl StateOptions {
    fn validate(&self) -> Result<()> {
        if (self.prefactor.re.abs() > 0.0) || (self.prefactor.im.abs() != 1.0) {
            return Err(invalid("resolvent prefactor must be +i or -i"));
        }
        if self.min_order < 2 || self.max_order < self.min_order {
            return Err(invalid("bad Gauss-Laguerre order range"));
        }
        Ok(())
    }
}

/// Scalar data of a pair (f, g) from which every quasi-free expectation
/// follows: q_nonzero values, Im⟨f,g⟩ and the zero-momentum amplitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairData {
    pub q_f: f64,
    pub q_g: f64,
    /// Re q_nonzero(f, g).
    pub q_fg: f64,
    /// Im⟨f, g⟩.
    pub sigma: f64,
    pub f0: Complex64,
    pub g0: Complex64,
    pub c: f64,
    pub in_l1: bool,
}

/// Exponent coefficients of ψ(W(sf + tg)) for a given state:
/// exp(-¼(s²q_f + t²q_g + 2st q_fg) + i(s ℓ_f + t ℓ_g)).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub q_f: f64,
    pub q_g: f64,
    pub q_fg: f64,
    pub sigma: f64,
    pub l_f: f64,
    pub l_g: f64,
}

impl PairData {
    pub fn new(f: &TestFunction, g: &TestFunction, ctx: &FormContext) -> Result<Self> {
        let q_f = q_nonzero_pair(f, f, ctx)?.value.re;
        let q_g = q_nonzero_pair(g, g, ctx)?.value.re;
        let q_fg = q_nonzero_pair(f, g, ctx)?.value.re;
        let sigma = f.inner(g)?.im;
        Ok(Self { q_f, q_g, q_fg, sigma, f0: f.f_hat_zero, g0: g.f_hat_zero, c: ctx.c_const(), in_l1: f.in_l1 && g.in_l1 })
    }

    /// Data for a single function (g = 0).
    pub fn single(f: &TestFunction, ctx: &FormContext) -> Result<Self> {
        let q_f = q_nonzero_pair(f, f, ctx)?.value.re;
        let zero = Complex64::new(0.0, 0.0);
        Ok(Self { q_f, q_g: 0.0, q_fg: 0.0, sigma: 0.0, f0: f.f_hat_zero, g0: zero, c: ctx.c_const(), in_l1: f.in_l1 })
    }

    /// Swaps the roles of f and g.
    pub fn swapped(&self) -> Self {
        Self { q_f: self.q_g, q_g: self.q_f, sigma: -self.sigma, f0: self.g0, g0: self.f0, ..*self }
    }

    pub fn exponents(&self, form: &FormChoice) -> Result<Exponents> {
        let base = Exponents { q_f: self.q_f, q_g: self.q_g, q_fg: self.q_fg, sigma: self.sigma, l_f: 0.0, l_g: 0.0 };
        if matches!(form, FormChoice::Nonzero) {
            return Ok(base);
        }
        if !self.in_l1 {
            return Err(Error::Domain("condensate terms need integrable test functions".into()));
        }
        Ok(match form {
            FormChoice::Nonzero => base,
            FormChoice::Bec => Exponents {
                q_f: base.q_f + self.c * self.f0.norm_sqr(),
                q_g: base.q_g + self.c * self.g0.norm_sqr(),
                q_fg: base.q_fg + self.c * (self.f0.conj() * self.g0).re,
                ..base
            },
            FormChoice::Component(label) => Exponents {
                l_f: mean_functional(label, self.f0, self.c),
                l_g: mean_functional(label, self.g0, self.c),
                ..base
            },
        })
    }
}

/// ψ(W(tf)) = exp(-t² q(f)/4) e^{i t ℓ(f)}.
pub fn weyl_from_exponents(e: &Exponents, t: f64) -> Complex64 {
    Complex64::new(-0.25 * t * t * e.q_f, t * e.l_f).exp()
}

pub fn weyl_expectation(f: &TestFunction, form: &FormChoice, t: f64, ctx: &FormContext) -> Result<Expectation> {
    let e = PairData::single(f, ctx)?.exponents(form)?;
    Ok(Expectation { value: weyl_from_exponents(&e, t), quadrature_error: 0.0, converged: true })
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda == 0.0 || !lambda.is_finite() {
        Err(invalid("resolvent parameter must be finite and nonzero"))
    } else {
        Ok(())
    }
}

fn orders(opts: &StateOptions) -> Vec<usize> {
    let mut v = vec![opts.min_order];
    while *v.last().unwrap() * 2 <= opts.max_order {
        v.push(v.last().unwrap() * 2);
    }
    v
}

/// Raw one-point Laplace integral ∫₀^{sgn λ·∞} e^{-λs} ψ(W(sf)) ds; with
/// s = x/λ it becomes (1/λ)∫₀^∞ e^{-x} exp(-x²q/(4λ²) + i x ℓ/λ) dx.
pub fn one_point_raw(lambda: f64, e: &Exponents, opts: &StateOptions) -> Result<Expectation> {
    check_lambda(lambda)?;
    opts.validate()?;
    let a = 0.25 * e.q_f / (lambda * lambda);
    let b = e.l_f / lambda;
    let eval = |n: usize| {
        let rule = gauss_laguerre_cached(n);
        let mut acc = Complex64::new(0.0, 0.0);
        for (x, w) in rule.nodes.iter().zip(&rule.weights) {
            acc += w * Complex64::new(-a * x * x, b * x).exp();
        }
        acc / lambda
    };
    adaptive_orders(eval, 1.0 / lambda.abs(), opts)
}

/// Raw two-point integral over s ∈ (0, sgn λ·∞), t ∈ (0, sgn μ·∞) of
/// exp(-(ist/2)σ - λs - μt - ¼q(sf+tg) + i(sℓ_f + tℓ_g)).
///
/// After s = x/λ, t = y/μ the weight is e^{-x-y}. The split x = uw,
/// y = u(1-w) gives ∫₀¹dw ∫₀^∞ u e^{-u} exp(u²P(w) + iuL(w)) du, evaluated
/// on a Gauss–Legendre × Gauss–Laguerre grid. Unlike a tensor Laguerre
/// grid in (x, y) this stays accurate when λμ < 0, where sf + tg can
/// vanish along a ray and the Gaussian damping disappears there.
pub fn two_point_raw(lambda: f64, mu: f64, e: &Exponents, opts: &StateOptions) -> Result<Expectation> {
    check_lambda(lambda)?;
    check_lambda(mu)?;
    opts.validate()?;
    let lm = lambda * mu;
    let af = 0.25 * e.q_f / (lambda * lambda);
    let ag = 0.25 * e.q_g / (mu * mu);
    let cross = Complex64::new(-0.5 * e.q_fg / lm, -0.5 * e.sigma / lm);
    let bf = e.l_f / lambda;
    let bg = e.l_g / mu;
    let eval = |n: usize| {
        let radial = gauss_laguerre_cached(n);
        let split = gauss_legendre_cached(n);
        let rows: Vec<Complex64> = split
            .nodes
            .par_iter()
            .zip(split.weights.par_iter())
            .map(|(&z, &wz)| {
                let w = 0.5 * (z + 1.0);
                let v = 1.0 - w;
                let p = Complex64::new(-af * w * w - ag * v * v, 0.0) + cross * (w * v);
                let l = bf * w + bg * v;
                let mut acc = Complex64::new(0.0, 0.0);
                for (&u, &wu) in radial.nodes.iter().zip(&radial.weights) {
                    acc += wu * u * (p * (u * u) + Complex64::new(0.0, l * u)).exp();
                }
                acc * (0.5 * wz)
            })
            .collect();
        rows.into_iter().sum::<Complex64>() / lm
    };
    adaptive_orders(eval, 1.0 / lm.abs(), opts)
}

fn adaptive_orders<F: Fn(usize) -> Complex64>(eval: F, scale: f64, opts: &StateOptions) -> Result<Expectation> {
    let mut prev: Option<Complex64> = None;
    let mut last = Expectation { value: Complex64::new(0.0, 0.0), quadrature_error: f64::INFINITY, converged: false };
    for n in orders(opts) {
        let v = eval(n);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::Numerical(format!("non-finite Gauss-Laguerre sum at order {n}")));
        }
        if let Some(p) = prev {
            let err = (v - p).norm();
            last = Expectation { value: v, quadrature_error: err, converged: err <= opts.tol * scale };
            if last.converged {
                return Ok(last);
            }
        }
        prev = Some(v);
    }
    Ok(last)
}

/// ψ(R(λ, f)) = prefactor · raw.
pub fn resolvent_one_point(lambda: f64, f: &TestFunction, form: &FormChoice, ctx: &FormContext, opts: &StateOptions) -> Result<Expectation> {
    let e = PairData::single(f, ctx)?.exponents(form)?;
    let raw = one_point_raw(lambda, &e, opts)?;
    Ok(Expectation { value: opts.prefactor * raw.value, ..raw })
}

/// ψ(R(λ, f) R(μ, g)) = prefactor² · raw.
pub fn resolvent_two_point(
    lambda: f64,
    f: &TestFunction,
    mu: f64,
    g: &TestFunction,
    form: &FormChoice,
    ctx: &FormContext,
    opts: &StateOptions,
) -> Result<Expectation> {
    let data = PairData::new(f, g, ctx)?;
    two_point_from_data(lambda, mu, &data, form, opts)
}

pub fn two_point_from_data(lambda: f64, mu: f64, data: &PairData, form: &FormChoice, opts: &StateOptions) -> Result<Expectation> {
    let raw = two_point_raw(lambda, mu, &data.exponents(form)?, opts)?;
    Ok(Expectation { value: opts.prefactor * opts.prefactor * raw.value, ..raw })
}

/// The positivity combination
/// |ψ(R_f R_g)|² + |ψ(R_f* R_g)|² + ψ(R_g* R_g) ψ(R_f* R_f), with
/// R(λ,f)* = R(-λ,f).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourPoint {
    pub value: f64,
    pub first: f64,
    pub second: f64,
    pub third: f64,
    /// ψ(R_g* R_g) and ψ(R_f* R_f), each real and non-negative.
    pub norms: [f64; 2],
    pub quadrature_error: f64,
    pub converged: bool,
}

pub fn fourpoint_positivity(
    lambda: f64,
    f: &TestFunction,
    mu: f64,
    g: &TestFunction,
    form: &FormChoice,
    ctx: &FormContext,
    opts: &StateOptions,
) -> Result<FourPoint> {
    let fg = PairData::new(f, g, ctx)?;
    let ff = PairData::new(f, f, ctx)?;
    let gg = PairData::new(g, g, ctx)?;
    fourpoint_from_data(lambda, mu, &fg, &ff, &gg, form, opts)
}

pub fn fourpoint_from_data(
    lambda: f64,
    mu: f64,
    fg: &PairData,
    ff: &PairData,
    gg: &PairData,
    form: &FormChoice,
    opts: &StateOptions,
) -> Result<FourPoint> {
    let a = two_point_from_data(lambda, mu, fg, form, opts)?;
    let b = two_point_from_data(-lambda, mu, fg, form, opts)?;
    let nf = two_point_from_data(-lambda, lambda, ff, form, opts)?;
    let ng = two_point_from_data(-mu, mu, gg, form, opts)?;
    let first = a.value.norm_sqr();
    let second = b.value.norm_sqr();
    let third = ng.value.re * nf.value.re;
    let parts = [a, b, nf, ng];
    Ok(FourPoint {
        value: first + second + third,
        first,
        second,
        third,
        norms: [ng.value.re, nf.value.re],
        quadrature_error: parts.iter().map(|p| p.quadrature_error).sum(),
        converged: parts.iter().all(|p| p.converged),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::quad::{integrate, QuadOptions};
    use crate::numerics::special::laplace_gaussian;
    use proptest::prelude::*;

    fn expo(q: f64, l: f64) -> Exponents {
        Exponents { q_f: q, q_g: 0.0, q_fg: 0.0, sigma: 0.0, l_f: l, l_g: 0.0 }
    }

    fn ctx() -> FormContext {
        FormContext::new(1.0, 0.0, 3, 2.0, 0.058_646).unwrap()
    }

    #[test]
    fn weyl_examples() {
        assert_eq!(weyl_from_exponents(&expo(7.0, 1.0), 0.0), Complex64::new(1.0, 0.0));
        let v = weyl_from_exponents(&expo(4.0, 0.0), 1.0);
        assert!((v.re - (-1f64).exp()).abs() < 1e-15);
        let f = TestFunction::gaussian(3, Complex64::new(0.7, 0.0), 1.0).unwrap();
        let label = ComponentLabel::new(1.3, std::f64::consts::FRAC_PI_2).unwrap();
        let w = weyl_expectation(&f, &FormChoice::Component(label), 1.0, &ctx()).unwrap();
        assert!(w.value.im.abs() < 1e-15);
        let z = weyl_expectation(&TestFunction::zero(3), &FormChoice::Bec, 1.0, &ctx()).unwrap();
        assert_eq!(z.value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn one_point_matches_erfc_closed_form() {
        let o = StateOptions::default();
        let v = one_point_raw(1.0, &expo(4.0, 0.0), &o).unwrap();
        assert!(v.converged);
        assert!((v.value.re - 0.545_641_360_765_047).abs() < 1e-10);
        for (lam, q) in [(0.5, 0.3), (2.0, 7.0), (-1.5, 2.0)] {
            let v = one_point_raw(lam, &expo(q, 0.0), &o).unwrap();
            let exact = laplace_gaussian(q / (lam * lam)) / lam;
            assert!((v.value.re - exact).abs() < 1e-10 / lam.abs(), "{lam} {q}");
        }
        let free = one_point_raw(1.0, &expo(0.0, 0.0), &o).unwrap();
        assert!((free.value - 1.0).norm() < 1e-14);
        assert!(one_point_raw(0.0, &expo(1.0, 0.0), &o).is_err());
    }

    #[test]
    fn one_point_with_phase_matches_adaptive_quadrature() {
        let o = StateOptions::default();
        let (q, l) = (1.7, 2.3);
        let v = one_point_raw(1.0, &expo(q, l), &o).unwrap();
        let r = integrate(|s| Complex64::new(-s - 0.25 * q * s * s, l * s).exp(), &[0.0, 2.0, 5.0, 10.0, 40.0], &QuadOptions::default());
        assert!((v.value - r.value).norm() < 1e-10);
    }

    #[test]
    fn negative_lambda_conjugates() {
        let o = StateOptions::default();
        let f = TestFunction::gaussian(3, Complex64::new(0.8, 0.0), 0.9).unwrap();
        let a = resolvent_one_point(1.0, &f, &FormChoice::Bec, &ctx(), &o).unwrap();
        let b = resolvent_one_point(-1.0, &f, &FormChoice::Bec, &ctx(), &o).unwrap();
        assert!((a.value.conj() - b.value).norm() < 1e-12);
        assert!(a.value.norm() <= 1.0);
    }

    /// 1-D oracle for f = g: ∫∫ e^{-λs-μt-q(s+t)²/4} = ∫₀^∞ e^{-qu²/4} k(u) du.
    fn diagonal_oracle(lambda: f64, mu: f64, q: f64) -> f64 {
        let k = |u: f64| {
            if (lambda - mu).abs() < 1e-12 {
                u * (-lambda * u).exp()
            } else {
                ((-mu * u).exp() - (-lambda * u).exp()) / (lambda - mu)
            }
        };
        integrate(|u| Complex64::new((-0.25 * q * u * u).exp() * k(u), 0.0), &[0.0, 1.0, 3.0, 8.0, 20.0, 60.0], &QuadOptions::default())
            .value
            .re
    }

    #[test]
    fn two_point_real_gaussian_matches_oracle() {
        let o = StateOptions::default();
        let f = TestFunction::gaussian(3, Complex64::new(0.6, 0.0), 1.0).unwrap();
        let data = PairData::new(&f, &f, &ctx()).unwrap();
        assert_eq!(data.sigma, 0.0);
        for (lam, mu) in [(1.0, 1.0), (0.7, 1.9)] {
            let e = data.exponents(&FormChoice::Bec).unwrap();
            let raw = two_point_raw(lam, mu, &e, &o).unwrap();
            assert!(raw.converged);
            let oracle = diagonal_oracle(lam, mu, e.q_f);
            assert!(raw.value.im.abs() < 1e-14 && raw.value.re > 0.0);
            assert!((raw.value.re - oracle).abs() < 1e-9, "{} vs {oracle}", raw.value.re);
            let v = two_point_from_data(lam, mu, &data, &FormChoice::Bec, &o).unwrap();
            assert!((v.value + raw.value).norm() < 1e-15);
        }
    }

    #[test]
    fn two_point_with_vanishing_argument_factorizes() {
        let o = StateOptions::default();
        let f = TestFunction::gaussian(3, Complex64::new(0.6, 0.2), 0.8).unwrap();
        let zero = TestFunction::zero(3);
        let two = resolvent_two_point(1.3, &f, 0.9, &zero, &FormChoice::Bec, &ctx(), &o).unwrap();
        let one = resolvent_one_point(1.3, &f, &FormChoice::Bec, &ctx(), &o).unwrap();
        let unit = o.prefactor / 0.9;
        assert!((two.value - one.value * unit).norm() < 1e-10);
    }

    #[test]
    fn component_fibers_at_antipodes_conjugate() {
        let o = StateOptions::default();
        let f = TestFunction::gaussian(3, Complex64::new(0.6, 0.0), 1.0).unwrap();
        let g = TestFunction::gaussian(3, Complex64::new(-0.3, 0.0), 0.5).unwrap();
        let data = PairData::new(&f, &g, &ctx()).unwrap();
        let a = ComponentLabel::new(0.8, 0.4).unwrap();
        let b = ComponentLabel::new(0.8, 0.4 + std::f64::consts::PI).unwrap();
        let va = two_point_from_data(1.0, 1.5, &data, &FormChoice::Component(a), &o).unwrap();
        let vb = two_point_from_data(1.0, 1.5, &data, &FormChoice::Component(b), &o).unwrap();
        assert!((va.value.conj() - vb.value).norm() < 1e-12);
    }

    #[test]
    fn fourpoint_free_case_is_three() {
        let o = StateOptions::default();
        let z = TestFunction::zero(3);
        let p = fourpoint_positivity(1.0, &z, 1.0, &z, &FormChoice::Nonzero, &ctx(), &o).unwrap();
        assert!((p.value - 3.0).abs() < 1e-13);
        assert!((p.third - 1.0).abs() < 1e-13);
    }

    #[test]
    fn fourpoint_third_term_bounded_by_one_point_product() {
        // ψ(R(λ,f)*R(λ,f)) ≥ |ψ(R(λ,f))|² by Cauchy–Schwarz.
        let o = StateOptions::default();
        let f = TestFunction::gaussian(3, Complex64::new(0.9, 0.3), 0.7).unwrap();
        let g = TestFunction::gaussians(
            3,
            vec![crate::model::GaussianTerm { c: Complex64::new(0.4, -0.2), sigma: 1.2, center: vec![0.5, 0.0, 0.0] }],
        )
        .unwrap();
        let p = fourpoint_positivity(1.0, &f, 0.8, &g, &FormChoice::Bec, &ctx(), &o).unwrap();
        assert!(p.converged && p.value >= 0.0 && p.third > 0.0);
        let of = resolvent_one_point(1.0, &f, &FormChoice::Bec, &ctx(), &o).unwrap().value.norm_sqr();
        let og = resolvent_one_point(0.8, &g, &FormChoice::Bec, &ctx(), &o).unwrap().value.norm_sqr();
        assert!(p.norms[1] >= of - 1e-10 && p.norms[0] >= og - 1e-10);
    }

    #[test]
    fn adjoint_product_matches_closed_form() {
        // ψ(R(λ,f)* R(λ,f)) = ∫₀^∞ e^{-λu} √(π/q) erf(u√q/2) du = laplace_gaussian(q/λ²)/λ².
        let o = StateOptions::default();
        for (lam, q) in [(1.0, 0.5), (0.6, 3.0), (2.0, 9.0)] {
            let e = Exponents { q_f: q, q_g: q, q_fg: q, sigma: 0.0, l_f: 0.0, l_g: 0.0 };
            let raw = two_point_raw(-lam, lam, &e, &o).unwrap();
            assert!(raw.converged);
            let v = -raw.value;
            let exact = laplace_gaussian(q / (lam * lam)) / (lam * lam);
            assert!((v.re - exact).abs() < 1e-10 && v.im.abs() < 1e-12, "{v} vs {exact}");
        }
    }

    #[test]
    fn bad_prefactor_rejected() {
        let o = StateOptions { prefactor: Complex64::new(1.0, 0.0), ..StateOptions::default() };
        assert!(one_point_raw(1.0, &expo(1.0, 0.0), &o).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn one_point_bounded_by_inverse_lambda(lam in prop_oneof![-4.0f64..-0.2, 0.2f64..4.0], q in 0.0f64..20.0, l in -5.0f64..5.0) {
            let v = one_point_raw(lam, &expo(q, l), &StateOptions::default()).unwrap();
            prop_assert!(v.value.norm() <= 1.0 / lam.abs() + 1e-10);
        }

        #[test]
        fn resolvent_scaling(lam in 0.3f64..3.0, nu in 0.2f64..5.0, q in 0.1f64..10.0, l in -2.0f64..2.0) {
            let o = StateOptions::default();
            let base = one_point_raw(lam, &expo(q, l), &o).unwrap().value;
            // ν R(νλ, νf): q scales by ν², ℓ by ν.
            let scaled = one_point_raw(nu * lam, &expo(nu * nu * q, nu * l), &o).unwrap().value * nu;
            prop_assert!((base - scaled).norm() < 1e-8);
        }

        #[test]
        fn gauge_covariance(theta in 0.0f64..TAU, theta0 in 0.0f64..TAU, r in 0.0f64..5.0, re in -1.0f64..1.0, im in -1.0f64..1.0) {
            let c = ctx();
            let f = TestFunction::gaussian(3, Complex64::new(re, im), 0.8).unwrap();
            let data = PairData::single(&f, &c).unwrap();
            let rotated = PairData::single(&f.rotated(theta0), &c).unwrap();
            let a = rotated.exponents(&FormChoice::Component(ComponentLabel::new(r, theta).unwrap())).unwrap();
            let b = data.exponents(&FormChoice::Component(ComponentLabel::new(r, theta + theta0).unwrap())).unwrap();
            prop_assert!((a.l_f - b.l_f).abs() < 1e-12);
            prop_assert!((a.q_f - b.q_f).abs() < 1e-12 * a.q_f.max(1.0));
        }
    }
}
