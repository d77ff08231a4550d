//! The quadratic forms of the free Bose gas: the condensate form q₀, the
//! thermal form q_nonzero built from K = coth(β(h−μ)/2) on lattices and in
//! the continuum, their sum q_bec, and cross terms with a time shift.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{GaussianTerm, LatticeFunction, ModelParams, TestFunction};
use crate::numerics::quad::{integrate, QuadOptions, QuadResult};
use crate::numerics::special::{coth_half, ln_sphere_mean_exp, sphere_area};
use crate::thermo::CriticalData;

/// Inputs shared by every form evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormContext {
    pub beta: f64,
    pub mu: f64,
    pub d: u32,
    pub s: f64,
    pub n0: f64,
    pub quad: QuadOptions,
}

impl FormContext {
    pub fn new(beta: f64, mu: f64, d: u32, s: f64, n0: f64) -> Result<Self> {
        if !(beta > 0.0) || !(s > 0.0) || d == 0 {
            return Err(invalid("need beta > 0, s > 0, d ≥ 1"));
        }
        if !(mu <= 0.0) {
            return Err(invalid("mu must be non-positive"));
        }
        if !(n0 >= 0.0) {
            return Err(invalid("n0 must be non-negative"));
        }
        let quad = QuadOptions { abs_tol: 1e-14, rel_tol: 1e-12, max_evals: 8_000_000 };
        Ok(Self { beta, mu, d, s, n0, quad })
    }

    /// Context of the infinite-volume state for the given parameters.
    pub fn from_params(params: &ModelParams, critical: &CriticalData) -> Result<Self> {
        Self::new(params.beta, params.mu, params.d, params.s, critical.n0)
    }

    /// c(ρ̄, β) = 2(2π)^d n₀.
    pub fn c_const(&self) -> f64 {
        2.0 * (2.0 * PI).powi(self.d as i32) * self.n0
    }

    /// K(k) = coth(β(h(k) − μ)/2) as a function of h.
    pub fn kernel(&self, h: f64) -> f64 {
        coth_half(self.beta * (h - self.mu))
    }

    pub fn with_n0(&self, n0: f64) -> Self {
        Self { n0, ..*self }
    }
}

/// A diagonal form value with its numerical error / tail estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FormValue {
    pub value: f64,
    pub tail_estimate: f64,
}

/// A sesquilinear (complex) form value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossValue {
    pub value: Complex64,
    pub error: f64,
    pub converged: bool,
}

impl From<QuadResult> for CrossValue {
    fn from(r: QuadResult) -> Self {
        Self { value: r.value, error: r.error, converged: r.converged }
    }
}

fn require_l1(f: &TestFunction) -> Result<()> {
    if f.in_l1 {
        Ok(())
    } else {
        Err(Error::Domain("q₀ needs an integrable test function (f ∉ D₀)".into()))
    }
}

/// q₀(f) = 2(2π)^d n₀ |f̂(0)|².
pub fn q_zero(f: &TestFunction, ctx: &FormContext) -> Result<FormValue> {
    require_l1(f)?;
    Ok(FormValue { value: ctx.c_const() * f.f_hat_zero.norm_sqr(), tail_estimate: 0.0 })
}

/// q₀(f, g) = c conj(f̂(0)) ĝ(0).
pub fn q_zero_cross(f: &TestFunction, g: &TestFunction, ctx: &FormContext) -> Result<Complex64> {
    require_l1(f)?;
    require_l1(g)?;
    Ok(ctx.c_const() * f.f_hat_zero.conj() * g.f_hat_zero)
}

fn check_mu(mu: f64) -> Result<()> {
    if mu <= 0.0 {
        Ok(())
    } else {
        Err(invalid("mu must be non-positive"))
    }
}

/// ((2π)^d/V) Σ_{k≠0} coth(β(h(k)−μ)/2) conj(f_k) g_k.
pub fn q_nonzero_lattice_cross(f: &LatticeFunction, g: &LatticeFunction, beta: f64, mu: f64, s: f64) -> Result<Complex64> {
    check_mu(mu)?;
    if f.d != g.d || f.l0 != g.l0 || f.m != g.m {
        return Err(invalid("lattice functions live on different boxes"));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (j, a) in &f.coeffs {
        if j.is_zero() {
            continue;
        }
        if let Some(b) = g.coeffs.get(j) {
            acc += coth_half(beta * (f.energy(j, s) - mu)) * a.conj() * b;
        }
    }
    Ok(acc * f.cell())
}

/// Lattice q_nonzero; the k = 0 coefficient never enters.
pub fn q_nonzero_lattice(f: &LatticeFunction, beta: f64, mu: f64, s: f64) -> Result<FormValue> {
    let v = q_nonzero_lattice_cross(f, f, beta, mu, s)?;
    Ok(FormValue { value: v.re, tail_estimate: 0.0 })
}

/// Local form q_{0,μ,L} + q_{nonzero,μ,L}, including the k = 0 mode.
/// Requires μ < 0 whenever f₀ ≠ 0.
pub fn q_local_lattice(f: &LatticeFunction, beta: f64, mu: f64, s: f64) -> Result<FormValue> {
    check_mu(mu)?;
    let f0 = f.at(&crate::model::ModeIndex::zero(f.d));
    let zero = if f0.norm() == 0.0 {
        0.0
    } else if mu < 0.0 {
        f.cell() * coth_half(-beta * mu) * f0.norm_sqr()
    } else {
        return Err(Error::Domain("singular zero mode: μ = 0 with nonzero f₀".into()));
    };
    let rest = q_nonzero_lattice(f, beta, mu, s)?;
    Ok(FormValue { value: zero + rest.value, tail_estimate: 0.0 })
}

/// Lattice q_nonzero of the continuum descriptor sampled with cutoff
/// `k_max` on the box of side `l`; the tail estimate is the change under
/// doubling the cutoff.
pub fn q_nonzero_sampled(f: &TestFunction, l: f64, k_max: f64, ctx: &FormContext) -> Result<FormValue> {
    let lat = crate::model::build_lattice(ctx.d, l, k_max)?;
    let wide = crate::model::build_lattice(ctx.d, l, 2.0 * k_max)?;
    let a = q_nonzero_lattice(&f.sample_on(&lat)?, ctx.beta, ctx.mu, ctx.s)?.value;
    let b = q_nonzero_lattice(&f.sample_on(&wide)?, ctx.beta, ctx.mu, ctx.s)?.value;
    Ok(FormValue { value: a, tail_estimate: (b - a).abs() })
}

/// One product term conj(c_j) d_l exp(-σ|k-a|² - τ|k-b|²) rewritten as
/// coeff · exp(-offset - α κ² + 2κ k̂·w) with v = |w|.
struct PairTerm {
    coeff: Complex64,
    alpha: f64,
    v: f64,
    offset: f64,
}

fn pair_terms(f: &[GaussianTerm], g: &[GaussianTerm]) -> Vec<PairTerm> {
    let mut out = Vec::with_capacity(f.len() * g.len());
    for a in f {
        for b in g {
            let alpha = a.sigma + b.sigma;
            let w: Vec<f64> = a.center.iter().zip(&b.center).map(|(x, y)| a.sigma * x + b.sigma * y).collect();
            let v = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            let offset = a.sigma * a.center.iter().map(|x| x * x).sum::<f64>()
                + b.sigma * b.center.iter().map(|x| x * x).sum::<f64>();
            let coeff = a.c.conj() * b.c;
            if coeff.norm() > 0.0 {
                out.push(PairTerm { coeff, alpha, v, offset });
            }
        }
    }
    out
}

/// Angular average of conj(f̂) ĝ over the sphere of radius κ.
fn angular_profile(terms: &[PairTerm], d: u32, kappa: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for t in terms {
        let e = -t.offset - t.alpha * kappa * kappa + ln_sphere_mean_exp(d, 2.0 * kappa * t.v);
        acc += t.coeff * e.exp();
    }
    acc
}

/// Radius beyond which every pair term is below e^{-46} of its peak.
fn radial_extent(terms: &[PairTerm]) -> f64 {
    terms.iter().map(|t| t.v / t.alpha + (46.0 / t.alpha).sqrt()).fold(0.0, f64::max)
}

/// ∫_{ℝ^d} w(|k|) conj(f̂(k)) ĝ(k) dk for Gaussian sums, as a radial
/// integral of the analytic angular average. With `phase = Some((u, s))`
/// the panels are laid out uniformly in κ^s so each carries a bounded
/// share of the oscillation e^{iuκ^s}.
fn radial_integral<W>(f: &[GaussianTerm], g: &[GaussianTerm], d: u32, weight: W, phase: Option<(f64, f64)>, opts: &QuadOptions) -> QuadResult
where
    W: Fn(f64) -> Complex64,
{
    let terms = pair_terms(f, g);
    if terms.is_empty() {
        return QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0, evals: 0, converged: true };
    }
    let area = sphere_area(d);
    let k_hi = radial_extent(&terms);
    let breaks: Vec<f64> = match phase {
        Some((u, s)) if u != 0.0 => {
            let total_phase = u.abs() * k_hi.powf(s);
            let n = ((total_phase / (0.5 * PI)).ceil() as usize).max(16);
            (0..=n).map(|i| k_hi * (i as f64 / n as f64).powf(1.0 / s)).collect()
        }
        _ => {
            let mut b = vec![0.0];
            for p in (1..=6).rev() {
                b.push(k_hi / 4f64.powi(p));
            }
            for i in 1..=16 {
                b.push(k_hi * i as f64 / 16.0);
            }
            b.sort_by(f64::total_cmp);
            b.dedup();
            b
        }
    };
    integrate(
        |kappa| {
            let radial = area * kappa.powi(d as i32 - 1);
            weight(kappa) * angular_profile(&terms, d, kappa) * radial
        },
        &breaks,
        opts,
    )
}

fn continuum<'a>(f: &'a TestFunction) -> Result<&'a [GaussianTerm]> {
    f.terms().ok_or_else(|| invalid("continuum descriptor required"))
}

fn check_convergent(f: &TestFunction, g: &TestFunction, ctx: &FormContext) -> Result<()> {
    let singular = ctx.mu == 0.0 && (ctx.d as f64 - ctx.s) <= 0.0;
    if singular && f.f_hat_zero.norm() > 0.0 && g.f_hat_zero.norm() > 0.0 {
        return Err(Error::Divergent(format!(
            "∫ coth(βh/2)|f̂|² diverges at k = 0 for d = {} ≤ s = {} with f̂(0) ≠ 0",
            ctx.d, ctx.s
        )));
    }
    Ok(())
}

/// ∫ K(k) conj(f̂(k)) ĝ(k) e^{iuh(k)} dk.
pub fn q_cross(f: &TestFunction, g: &TestFunction, ctx: &FormContext, u: f64) -> Result<CrossValue> {
    let (a, b) = (continuum(f)?, continuum(g)?);
    check_convergent(f, g, ctx)?;
    let s = ctx.s;
    let r = radial_integral(
        a,
        b,
        ctx.d,
        |kappa| {
            let h = kappa.powf(s);
            ctx.kernel(h) * Complex64::from_polar(1.0, u * h)
        },
        Some((u, s)),
        &ctx.quad,
    );
    Ok(r.into())
}

/// q_nonzero(f) = ∫ K |f̂|² dk by radial quadrature.
pub fn q_nonzero_continuum(f: &TestFunction, ctx: &FormContext) -> Result<FormValue> {
    let r = q_cross(f, f, ctx, 0.0)?;
    if !r.converged {
        return Err(Error::Numerical(format!("q_nonzero quadrature did not converge (error {:e})", r.error)));
    }
    Ok(FormValue { value: r.value.re, tail_estimate: r.error })
}

/// ⟨f, e^{iuh} g⟩ = ∫ conj(f̂) ĝ e^{iuh} dk. At u = 0 the closed Gaussian
/// product formula is used instead of quadrature.
pub fn inner_shifted(f: &TestFunction, g: &TestFunction, ctx: &FormContext, u: f64) -> Result<CrossValue> {
    if u == 0.0 {
        return Ok(CrossValue { value: f.inner(g)?, error: 0.0, converged: true });
    }
    let (a, b) = (continuum(f)?, continuum(g)?);
    let s = ctx.s;
    let r = radial_integral(a, b, ctx.d, |kappa| Complex64::from_polar(1.0, u * kappa.powf(s)), Some((u, s)), &ctx.quad);
    Ok(r.into())
}

/// q_nonzero(f, g): continuum quadrature when both descriptors exist,
/// otherwise the lattice sum.
pub fn q_nonzero_pair(f: &TestFunction, g: &TestFunction, ctx: &FormContext) -> Result<CrossValue> {
    if f.terms().is_some() && g.terms().is_some() {
        let r = q_cross(f, g, ctx, 0.0)?;
        if !r.converged {
            return Err(Error::Numerical(format!("q_nonzero quadrature did not converge (error {:e})", r.error)));
        }
        return Ok(r);
    }
    match (&f.lattice, &g.lattice) {
        (Some(a), Some(b)) => {
            Ok(CrossValue { value: q_nonzero_lattice_cross(a, b, ctx.beta, ctx.mu, ctx.s)?, error: 0.0, converged: true })
        }
        _ => Err(invalid("no common representation for q_nonzero")),
    }
}

/// Diagonal q_nonzero with the same dispatch as [`q_nonzero_pair`].
pub fn q_nonzero(f: &TestFunction, ctx: &FormContext) -> Result<FormValue> {
    let v = q_nonzero_pair(f, f, ctx)?;
    Ok(FormValue { value: v.value.re, tail_estimate: v.error })
}

/// q_bec = q₀ + q_nonzero.
pub fn q_bec(f: &TestFunction, ctx: &FormContext) -> Result<FormValue> {
    let a = q_zero(f, ctx)?;
    let b = q_nonzero(f, ctx)?;
    Ok(FormValue { value: a.value + b.value, tail_estimate: a.tail_estimate + b.tail_estimate })
}
