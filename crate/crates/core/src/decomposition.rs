//! The χ-measure e^{-r}dr ⊗ dθ/2π, the mixing identity
//! exp(-¼q₀(f)) = ∫ e^{iℓ_{r,θ}(f)} dχ, the direct-integral decomposition
//! of two-point functions, gauge orbits, clustering scans and the two-stage
//! Monte Carlo check.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forms::{inner_shifted, q_cross, q_zero, FormContext};
use crate::model::TestFunction;
use crate::numerics::quad::gauss_laguerre_cached;
use crate::numerics::rng::{run_sharded, McComparison, Moments};
use crate::states::{
    mean_functional, one_point_raw, two_point_from_data, two_point_raw, weyl_from_exponents, ComponentLabel, Expectation,
    FormChoice, PairData, StateOptions,
};

/// How a χ-expectation is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChiMode {
    /// Gauss–Laguerre in r × trapezoid in θ, doubling both orders from
    /// 16 up to `max_order` until successive values agree to `tol`.
    Quadrature { tol: f64, max_order: usize },
    MonteCarlo { n: usize, seed: u64 },
}

impl ChiMode {
    pub fn quadrature() -> Self {
        ChiMode::Quadrature { tol: 1e-12, max_order: 256 }
    }
}

/// A χ-expectation. For quadrature `error` is the last order-doubling
/// change; for Monte Carlo `std_error` holds the real and imaginary
/// standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiEstimate {
    pub value: Complex64,
    pub error: f64,
    pub std_error: Option<[f64; 2]>,
    pub nodes: usize,
    pub converged: bool,
}

fn chi_rule_sum<F>(integrand: &F, n: usize) -> Complex64
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    let rule = gauss_laguerre_cached(n);
    // An even θ-count keeps θ ↦ θ + π exact on the grid, so half-integer
    // powers of r from √r cos θ cancel node by node.
    let m = n + n % 2;
    let rows: Vec<Complex64> = rule
        .nodes
        .par_iter()
        .zip(rule.weights.par_iter())
        .map(|(&r, &w)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..m {
                acc += integrand(r, TAU * j as f64 / m as f64);
            }
            acc * (w / m as f64)
        })
        .collect();
    rows.into_iter().sum()
}

/// ∫ F(r, θ) dχ(r, θ).
pub fn chi_expect<F>(integrand: F, mode: ChiMode) -> Result<ChiEstimate>
where
    F: Fn(f64, f64) -> Complex64 + Sync,
{
    match mode {
        ChiMode::Quadrature { tol, max_order } => {
            if max_order < 16 {
                return Err(invalid("χ quadrature needs max_order ≥ 16"));
            }
            let mut n = 16;
            let mut prev = chi_rule_sum(&integrand, n);
            let mut out = ChiEstimate { value: prev, error: f64::INFINITY, std_error: None, nodes: n * n, converged: false };
            while 2 * n <= max_order {
                n *= 2;
                let v = chi_rule_sum(&integrand, n);
                let err = (v - prev).norm();
                out = ChiEstimate { value: v, error: err, std_error: None, nodes: n * n, converged: err <= tol * v.norm().max(1.0) };
                if out.converged {
                    break;
                }
                prev = v;
            }
            if !(out.value.re.is_finite() && out.value.im.is_finite()) {
                return Err(Error::Numerical("non-finite χ quadrature".into()));
            }
            Ok(out)
        }
        ChiMode::MonteCarlo { n, seed } => {
            if n < 100 {
                return Err(invalid("Monte Carlo χ-expectation needs at least 100 samples"));
            }
            let shards = run_sharded(seed, n, |rng, count| {
                let (mut re, mut im) = (Moments::default(), Moments::default());
                for _ in 0..count {
                    let (r, theta) = sample_chi(rng);
                    let v = integrand(r, theta);
                    re.push(v.re);
                    im.push(v.im);
                }
                (re, im)
            });
            let (mut re, mut im) = (Moments::default(), Moments::default());
            for (a, b) in &shards {
                re.merge(a);
                im.merge(b);
            }
            Ok(ChiEstimate {
                value: Complex64::new(re.mean(), im.mean()),
                error: 0.0,
                std_error: Some([re.std_error(), im.std_error()]),
                nodes: n,
                converged: true,
            })
        }
    }
}

/// One draw from χ: r = −ln(1 − u) ~ Exp(1), θ uniform on [0, 2π).
pub fn sample_chi<R: Rng + ?Sized>(rng: &mut R) -> (f64, f64) {
    let u: f64 = rng.gen();
    let v: f64 = rng.gen();
    (-(-u).ln_1p(), TAU * v)
}

/// Both sides of the mixing identity and their gaps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixingReport {
    pub lhs: Complex64,
    pub rhs: f64,
    pub abs_gap: f64,
    pub quadrature_error: f64,
    /// Monte Carlo mode: (|Re gap|/s.e., |Im gap|/s.e.).
    pub z_scores: Option<[f64; 2]>,
    pub std_error: Option<[f64; 2]>,
}

impl MixingReport {
    /// Pass rule: quadrature gap ≤ `tol`, or every MC z-score ≤ `sigmas`.
    pub fn passes(&self, tol: f64, sigmas: f64) -> bool {
        match self.z_scores {
            Some(z) => z[0] <= sigmas && z[1] <= sigmas,
            None => self.abs_gap <= tol,
        }
    }
}

fn z_pair(estimate: Complex64, reference: Complex64, se: [f64; 2]) -> [f64; 2] {
    let z = |gap: f64, s: f64| if gap == 0.0 { 0.0 } else { gap / s };
    [z((estimate.re - reference.re).abs(), se[0]), z((estimate.im - reference.im).abs(), se[1])]
}

/// ∫ e^{iℓ_{r,θ}(f)} dχ against exp(-¼q₀(f)).
pub fn verify_mixing_identity(f: &TestFunction, ctx: &FormContext, mode: ChiMode) -> Result<MixingReport> {
    let rhs = (-0.25 * q_zero(f, ctx)?.value).exp();
    let (f0, c) = (f.f_hat_zero, ctx.c_const());
    let est = chi_expect(
        |r, theta| {
            let label = ComponentLabel { r, theta };
            Complex64::new(0.0, mean_functional(&label, f0, c)).exp()
        },
        mode,
    )?;
    let reference = Complex64::new(rhs, 0.0);
    Ok(MixingReport {
        lhs: est.value,
        rhs,
        abs_gap: (est.value - reference).norm(),
        quadrature_error: est.error,
        z_scores: est.std_error.map(|se| z_pair(est.value, reference, se)),
        std_error: est.std_error,
    })
}

/// ψ_bec two-point computed directly and as a χ-average of component
/// two-points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub direct: Expectation,
    pub decomposed: Expectation,
    pub gap: f64,
    pub tolerance: f64,
    /// χ-nodes whose component two-point missed its own tolerance. These sit
    /// at large r where the weight e^{-r} makes them irrelevant.
    pub unconverged_nodes: usize,
}

impl DecompositionReport {
    pub fn passes(&self) -> bool {
        self.direct.converged && self.decomposed.converged && self.gap <= self.tolerance
    }
}

pub fn decompose_two_point(
    lambda: f64,
    f: &TestFunction,
    mu: f64,
    g: &TestFunction,
    ctx: &FormContext,
    opts: &StateOptions,
    chi_tol: f64,
) -> Result<DecompositionReport> {
    let data = PairData::new(f, g, ctx)?;
    decompose_from_data(lambda, mu, &data, opts, chi_tol)
}

pub fn decompose_from_data(lambda: f64, mu: f64, data: &PairData, opts: &StateOptions, chi_tol: f64) -> Result<DecompositionReport> {
    let direct = two_point_from_data(lambda, mu, data, &FormChoice::Bec, opts)?;
    // Nodes with large r carry weight below e^{-100}; capping the inner order
    // keeps them from dominating the cost.
    let inner = StateOptions { max_order: opts.max_order.min(128), ..*opts };
    let failures = std::sync::atomic::AtomicUsize::new(0);
    let est = chi_expect(
        |r, theta| {
            let label = ComponentLabel { r, theta };
            match two_point_from_data(lambda, mu, data, &FormChoice::Component(label), &inner) {
                Ok(v) => {
                    if !v.converged {
                        failures.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    }
                    v.value
                }
                Err(_) => {
                    failures.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                    Complex64::new(f64::NAN, f64::NAN)
                }
            }
        },
        ChiMode::Quadrature { tol: chi_tol, max_order: 128 },
    )?;
    let unconverged_nodes = failures.load(std::sync::atomic::Ordering::Relaxed);
    let decomposed = Expectation { value: est.value, quadrature_error: est.error, converged: est.converged };
    let gap = (direct.value - decomposed.value).norm();
    let tolerance = 1e-5 / (lambda * mu).abs();
    Ok(DecompositionReport { direct, decomposed, gap, tolerance, unconverged_nodes })
}

/// max over the grid of |ψ_{r,θ}(W(e^{iθ₀}f)) − ψ_{r,θ+θ₀}(W(f))|, also
/// over one-point resolvents at λ = 1.
pub fn gauge_orbit_check(label: &ComponentLabel, theta0: f64, f_grid: &[TestFunction], ctx: &FormContext, opts: &StateOptions) -> Result<f64> {
    let shifted = ComponentLabel::new(label.r, label.theta + theta0)?;
    let mut worst = 0.0f64;
    for f in f_grid {
        let data = PairData::single(f, ctx)?;
        let rotated = PairData::single(&f.rotated(theta0), ctx)?;
        let a = rotated.exponents(&FormChoice::Component(*label))?;
        let b = data.exponents(&FormChoice::Component(shifted))?;
        worst = worst.max((weyl_from_exponents(&a, 1.0) - weyl_from_exponents(&b, 1.0)).norm());
        let ra = one_point_raw(1.0, &a, opts)?;
        let rb = one_point_raw(1.0, &b, opts)?;
        worst = worst.max((ra.value - rb.value).norm());
    }
    Ok(worst)
}

/// |∫ψ_{r,θ}(W(e^{iθ₀}f)) dχ − ∫ψ_{r,θ}(W(f)) dχ|, each side by χ-quadrature.
pub fn chi_averaged_gauge_deviation(f: &TestFunction, theta0: f64, ctx: &FormContext) -> Result<f64> {
    let data = PairData::single(f, ctx)?;
    let rotated = PairData::single(&f.rotated(theta0), ctx)?;
    let side = |d: &PairData| {
        chi_expect(
            |r, theta| match d.exponents(&FormChoice::Component(ComponentLabel { r, theta })) {
                Ok(e) => weyl_from_exponents(&e, 1.0),
                Err(_) => Complex64::new(f64::NAN, 0.0),
            },
            ChiMode::quadrature(),
        )
    };
    Ok((side(&rotated)?.value - side(&data)?.value).norm())
}

/// One row of a clustering scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusteringRow {
    pub u: f64,
    pub two_point: Complex64,
    pub gap: f64,
    pub converged: bool,
}

/// |ψ(R(λ,f) α_u(R(μ,g))) − ψ(R(λ,f)) ψ(R(μ,g))| along a time-shift scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringScan {
    pub product: Complex64,
    pub gap_at_zero: f64,
    pub rows: Vec<ClusteringRow>,
    /// u → ∞ two-point: for ψ_bec the non-factorized double integral with
    /// only the q₀ cross term left; for other states the product.
    pub limit: Complex64,
    pub limit_gap: f64,
    pub gaps_decreasing: bool,
}

/// Pair data of (f, e^{iuh} g): the q_nonzero cross term and Im⟨f, g⟩
/// acquire the phase, ĝ(0) and q(g) do not (h(0) = 0).
pub fn shifted_pair(f: &TestFunction, g: &TestFunction, ctx: &FormContext, u: f64) -> Result<(PairData, bool)> {
    let mut data = PairData::new(f, g, ctx)?;
    if u == 0.0 {
        return Ok((data, true));
    }
    let cross = q_cross(f, g, ctx, u)?;
    let inner = inner_shifted(f, g, ctx, u)?;
    data.q_fg = cross.value.re;
    data.sigma = inner.value.im;
    Ok((data, cross.converged && inner.converged))
}

pub fn clustering_scan(
    f: &TestFunction,
    g: &TestFunction,
    form: &FormChoice,
    lambda: f64,
    mu: f64,
    u_list: &[f64],
    ctx: &FormContext,
    opts: &StateOptions,
) -> Result<ClusteringScan> {
    if u_list.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("time shifts must increase"));
    }
    let (base, _) = shifted_pair(f, g, ctx, 0.0)?;
    let one_f = one_point_raw(lambda, &base.exponents(form)?, opts)?;
    let one_g = one_point_raw(mu, &base.swapped().exponents(form)?, opts)?;
    let product = opts.prefactor * opts.prefactor * one_f.value * one_g.value;
    let at_zero = two_point_from_data(lambda, mu, &base, form, opts)?;
    let rows = u_list
        .iter()
        .map(|&u| {
            let (data, ok) = shifted_pair(f, g, ctx, u)?;
            let v = two_point_from_data(lambda, mu, &data, form, opts)?;
            Ok(ClusteringRow { u, two_point: v.value, gap: (v.value - product).norm(), converged: ok && v.converged })
        })
        .collect::<Result<Vec<_>>>()?;
    let limit = match form {
        FormChoice::Bec => {
            let mut e = base.exponents(&FormChoice::Nonzero)?;
            e.q_f += base.c * base.f0.norm_sqr();
            e.q_g += base.c * base.g0.norm_sqr();
            e.q_fg = base.c * (base.f0.conj() * base.g0).re;
            e.sigma = 0.0;
            opts.prefactor * opts.prefactor * two_point_raw(lambda, mu, &e, opts)?.value
        }
        _ => product,
    };
    let gaps_decreasing = rows.windows(2).all(|w| w[1].gap < w[0].gap);
    Ok(ClusteringScan {
        product,
        gap_at_zero: (at_zero.value - product).norm(),
        rows,
        limit,
        limit_gap: (limit - product).norm(),
        gaps_decreasing,
    })
}

/// Two-stage (χ, then Gaussian) vs single-stage sampling of the field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicRow {
    pub reference: f64,
    pub two_stage: Complex64,
    pub single_stage: Complex64,
    pub std_error: [f64; 2],
    pub z_scores: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErgodicReport {
    pub n_samples: usize,
    pub seed: u64,
    pub rows: Vec<ErgodicRow>,
    pub max_z: f64,
}

impl ErgodicReport {
    pub fn passes(&self, sigmas: f64) -> bool {
        self.max_z <= sigmas
    }
}

/// Draws (r, θ) ~ χ and then Φ(f) ~ N(ℓ_{r,θ}(f), q_nonzero(f)/2), and
/// compares the empirical mean of e^{iΦ(f)} with exp(-¼q_bec(f)). The
/// single-stage sampler draws the same variates but uses
/// Φ(f) ~ N(0, q_bec(f)/2); when f̂(0) = 0 the two coincide sample by sample.
pub fn ergodic_mc_check(f_grid: &[TestFunction], ctx: &FormContext, n_samples: usize, seed: u64) -> Result<ErgodicReport> {
    if n_samples < 10_000 {
        return Err(invalid("ergodic check needs at least 1e4 samples"));
    }
    let c = ctx.c_const();
    let mut rows = Vec::with_capacity(f_grid.len());
    for (idx, f) in f_grid.iter().enumerate() {
        let data = PairData::single(f, ctx)?;
        let q_nz = data.q_f;
        let q_bec = data.exponents(&FormChoice::Bec)?.q_f;
        let f0 = data.f0;
        let stream = seed.wrapping_add((idx as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let shards = run_sharded(stream, n_samples, |rng, count| {
            let mut m = [Moments::default(), Moments::default(), Moments::default(), Moments::default()];
            for _ in 0..count {
                let (r, theta) = sample_chi(rng);
                let xi: f64 = rng.sample(StandardNormal);
                let ell = mean_functional(&ComponentLabel { r, theta }, f0, c);
                let two = ell + (0.5 * q_nz).sqrt() * xi;
                let one = (0.5 * q_bec).sqrt() * xi;
                m[0].push(two.cos());
                m[1].push(two.sin());
                m[2].push(one.cos());
                m[3].push(one.sin());
            }
            m
        });
        let mut tot = [Moments::default(), Moments::default(), Moments::default(), Moments::default()];
        for s in &shards {
            for k in 0..4 {
                tot[k].merge(&s[k]);
            }
        }
        let reference = (-0.25 * q_bec).exp();
        let re = McComparison::new(&tot[0], reference);
        let im = McComparison::new(&tot[1], 0.0);
        rows.push(ErgodicRow {
            reference,
            two_stage: Complex64::new(re.estimate, im.estimate),
            single_stage: Complex64::new(tot[2].mean(), tot[3].mean()),
            std_error: [re.std_error, im.std_error],
            z_scores: [re.z_score, im.z_score],
        });
    }
    let max_z = rows.iter().flat_map(|r| r.z_scores).fold(0.0, f64::max);
    Ok(ErgodicReport { n_samples, seed, rows, max_z })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::GaussianTerm;
    use std::f64::consts::PI;

    fn ctx() -> FormContext {
        FormContext::new(1.0, 0.0, 3, 2.0, 0.058_646).unwrap()
    }

    /// A function with c|f̂(0)|² = 1.
    fn unit_condensate(ctx: &FormContext, phase: f64) -> TestFunction {
        let amp = 1.0 / ctx.c_const().sqrt();
        TestFunction::gaussian(3, Complex64::from_polar(amp, phase), 1.0).unwrap()
    }

    #[test]
    fn chi_is_a_probability_measure() {
        let one = chi_expect(|_, _| Complex64::new(1.0, 0.0), ChiMode::quadrature()).unwrap();
        assert!((one.value - 1.0).norm() < 1e-12);
        let mean_r = chi_expect(|r, _| Complex64::new(r, 0.0), ChiMode::quadrature()).unwrap();
        assert!((mean_r.value - 1.0).norm() < 1e-12);
        let mc = chi_expect(|r, _| Complex64::new(r, 0.0), ChiMode::MonteCarlo { n: 100_000, seed: 3 }).unwrap();
        assert!((mc.value.re - 1.0).abs() < 4.0 * mc.std_error.unwrap()[0]);
        assert!(chi_expect(|_, _| Complex64::new(1.0, 0.0), ChiMode::MonteCarlo { n: 99, seed: 1 }).is_err());
    }

    #[test]
    fn mixing_identity_examples() {
        let c = ctx();
        let f = unit_condensate(&c, 0.0);
        let rep = verify_mixing_identity(&f, &c, ChiMode::quadrature()).unwrap();
        assert!((rep.rhs - (-0.25f64).exp()).abs() < 1e-12);
        assert!((rep.rhs - 0.778_801).abs() < 1e-6);
        assert!(rep.abs_gap < 1e-8);
        let g = unit_condensate(&c, PI / 2.0);
        let rep_i = verify_mixing_identity(&g, &c, ChiMode::quadrature()).unwrap();
        assert!((rep_i.lhs - rep.lhs).norm() < 1e-12);
        let mut z = f.clone();
        z.f_hat_zero = Complex64::new(0.0, 0.0);
        let rep0 = verify_mixing_identity(&z, &c, ChiMode::quadrature()).unwrap();
        assert!(rep0.abs_gap < 1e-14);
        let mc = verify_mixing_identity(&f, &c, ChiMode::MonteCarlo { n: 200_000, seed: 11 }).unwrap();
        assert!(mc.passes(0.0, 4.0), "{:?}", mc.z_scores);
    }

    #[test]
    fn decomposition_reduces_without_condensate() {
        let c = ctx().with_n0(0.0);
        let f = TestFunction::gaussian(3, Complex64::new(0.5, 0.1), 1.0).unwrap();
        let g = TestFunction::gaussian(3, Complex64::new(0.3, 0.0), 0.7).unwrap();
        let rep = decompose_two_point(1.0, &f, 1.2, &g, &c, &StateOptions::default(), 1e-10).unwrap();
        assert!(rep.gap < 1e-10, "{}", rep.gap);
    }

    #[test]
    fn decomposition_matches_bec_two_point() {
        let c = ctx();
        let f = TestFunction::gaussian(3, Complex64::new(0.4, 0.0), 1.0).unwrap();
        let rep = decompose_two_point(1.0, &f, 1.0, &f, &c, &StateOptions::default(), 1e-9).unwrap();
        assert!(rep.passes(), "{rep:?}");
    }

    #[test]
    fn gauge_orbit_closes() {
        let c = ctx();
        let grid = vec![
            TestFunction::gaussian(3, Complex64::new(0.5, 0.2), 1.0).unwrap(),
            TestFunction::gaussians(3, vec![GaussianTerm { c: Complex64::new(0.1, -0.4), sigma: 0.6, center: vec![0.2, 0.0, 0.1] }]).unwrap(),
        ];
        let o = StateOptions::default();
        let label = ComponentLabel::new(1.4, 0.7).unwrap();
        assert_eq!(gauge_orbit_check(&label, 0.0, &grid, &c, &o).unwrap(), 0.0);
        assert!(gauge_orbit_check(&label, TAU, &grid, &c, &o).unwrap() < 1e-12);
        assert!(gauge_orbit_check(&label, 1.1, &grid, &c, &o).unwrap() < 1e-12);
        // θ₀ = π flips ℓ for real f̂(0).
        let f = TestFunction::gaussian(3, Complex64::new(0.5, 0.0), 1.0).unwrap();
        let d = PairData::single(&f, &c).unwrap();
        let a = d.exponents(&FormChoice::Component(label)).unwrap().l_f;
        let b = d.exponents(&FormChoice::Component(ComponentLabel::new(1.4, 0.7 + PI).unwrap())).unwrap().l_f;
        assert!((a + b).abs() < 1e-14);
        assert!(chi_averaged_gauge_deviation(&grid[0], 0.9, &c).unwrap() < 1e-10);
    }

    #[test]
    fn clustering_restored_on_kernel_of_q0() {
        let c = ctx();
        let terms = |a: f64| {
            vec![
                GaussianTerm::centered(Complex64::new(a, 0.0), 1.0, 3),
                GaussianTerm::centered(Complex64::new(-a, 0.0), 2.0, 3),
            ]
        };
        let f = TestFunction::gaussians(3, terms(1.0)).unwrap();
        let g = TestFunction::gaussians(3, terms(0.7)).unwrap();
        assert_eq!(f.f_hat_zero.norm(), 0.0);
        let scan = clustering_scan(&f, &g, &FormChoice::Bec, 1.0, 1.0, &[10.0, 100.0, 1000.0], &c, &StateOptions::default()).unwrap();
        assert!(scan.gaps_decreasing);
        assert!(scan.rows[2].gap < 1e-3 * scan.gap_at_zero.max(1e-300) || scan.rows[2].gap < 1e-8);
        assert!(scan.limit_gap < 1e-12);
    }

    #[test]
    fn bec_limit_gap_persists() {
        let c = ctx();
        let f = TestFunction::gaussian(3, Complex64::new(1.0, 0.0), 1.0).unwrap();
        let g = TestFunction::gaussian(3, Complex64::new(0.5, 0.0), 0.6).unwrap();
        let scan = clustering_scan(&f, &g, &FormChoice::Bec, 1.0, 1.0, &[10.0, 100.0, 1000.0], &c, &StateOptions::default()).unwrap();
        assert!(scan.limit_gap > 1e-3);
        let last = scan.rows.last().unwrap();
        assert!((last.two_point - scan.limit).norm() < (scan.rows[0].two_point - scan.limit).norm());
    }

    #[test]
    fn ergodic_two_stage_matches_and_reduces() {
        let c = ctx();
        let f = unit_condensate(&c, 0.3);
        let rep = ergodic_mc_check(&[f], &c, 100_000, 5).unwrap();
        assert!(rep.passes(4.0), "{rep:?}");
        let k = TestFunction::gaussians(
            3,
            vec![GaussianTerm::centered(Complex64::new(1.0, 0.0), 1.0, 3), GaussianTerm::centered(Complex64::new(-1.0, 0.0), 2.0, 3)],
        )
        .unwrap();
        let rep0 = ergodic_mc_check(&[k], &c, 20_000, 9).unwrap();
        assert_eq!(rep0.rows[0].two_stage, rep0.rows[0].single_stage);
        assert!(ergodic_mc_check(&[], &c, 100, 1).is_err());
    }
}
