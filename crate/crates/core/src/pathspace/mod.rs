//! Gaussian β-periodic path space: Matsubara covariance, the sharp-time
//! kernel, the trace-type condition for the regularizer, Markov
//! projections, field sampling and the Euclidean correlation identity.

mod markov;
mod sampler;

pub use markov::*;
pub use sampler::*;

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::ModeIndex;
use crate::numerics::quad::{integrate_real, uniform_breaks, QuadOptions};
use crate::numerics::special::{coth_half, sphere_area};

/// Exponents (r, u, a) of the regularizer
/// B(ω, k) = (1 + ω²)^r (1 + |k|²)^u / (|k|^{2a} ∧ 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegExponents {
    pub r: f64,
    pub u: f64,
    pub a: f64,
}

/// Which of the three sufficient exponent constraints hold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceConstraints {
    /// r > 1/2
    pub temporal: bool,
    /// 2(u + s) > d
    pub ultraviolet: bool,
    /// a > s − d/2
    pub infrared: bool,
}

impl TraceConstraints {
    pub fn all(&self) -> bool {
        self.temporal && self.ultraviolet && self.infrared
    }
}

impl RegExponents {
    /// The choice r = 1, u = 2 with a = 0 for s = 1 and a = 1 for s = 2
    /// (three dimensions).
    pub fn standard(s: f64) -> Result<Self> {
        let a = if s == 1.0 {
            0.0
        } else if s == 2.0 {
            1.0
        } else {
            return Err(invalid(format!("no standard regularizer for s = {s}")));
        };
        Ok(Self { r: 1.0, u: 2.0, a })
    }

    pub fn constraints(&self, d: u32, s: f64) -> TraceConstraints {
        TraceConstraints {
            temporal: self.r > 0.5,
            ultraviolet: 2.0 * (self.u + s) > d as f64,
            infrared: self.a > s - 0.5 * d as f64,
        }
    }

    /// B(ω, k)^{-1}.
    pub fn inverse_weight(&self, omega: f64, k: f64) -> f64 {
        k.powf(2.0 * self.a).min(1.0) / ((1.0 + omega * omega).powf(self.r) * (1.0 + k * k).powf(self.u))
    }
}

/// A finite truncation of the path space: Matsubara frequencies
/// ω_n = 2πn/β with |n| ≤ n_mats and a symmetric set of box momenta
/// k = (2π/L) j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathSpaceSpec {
    pub beta: f64,
    pub s: f64,
    pub d: u32,
    pub mu: f64,
    pub l: f64,
    pub n_mats: u32,
    pub k_grid: Vec<ModeIndex>,
    pub reg: RegExponents,
}

/// One Fourier mode (ω_n, k) of the path space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathMode {
    pub n: i64,
    pub k: ModeIndex,
    pub omega: f64,
    pub eps: f64,
    /// C(ω, k) = 1/(ω² + ε(k)²)
    pub cov: f64,
    /// (−n, −k) = (n, k)
    pub self_conjugate: bool,
}

impl PathSpaceSpec {
    pub fn new(beta: f64, s: f64, d: u32, mu: f64, l: f64, n_mats: u32, k_grid: Vec<ModeIndex>, reg: RegExponents) -> Result<Self> {
        let spec = Self { beta, s, d, mu, l, n_mats, k_grid, reg };
        spec.validate()?;
        Ok(spec)
    }

    /// Cube of integer indices |j_i| ≤ `k_max_index`.
    pub fn cube(beta: f64, s: f64, d: u32, l: f64, n_mats: u32, k_max_index: i64, reg: RegExponents) -> Result<Self> {
        let mut grid = vec![Vec::<i64>::new()];
        for _ in 0..d {
            grid = grid
                .into_iter()
                .flat_map(|p| {
                    (-k_max_index..=k_max_index).map(move |j| {
                        let mut q = p.clone();
                        q.push(j);
                        q
                    })
                })
                .collect();
        }
        Self::new(beta, s, d, 0.0, l, n_mats, grid.into_iter().map(ModeIndex).collect(), reg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) || !(self.s > 0.0) || !(self.l > 0.0) || self.d == 0 {
            return Err(invalid("beta, s, L and d must be positive"));
        }
        if !(self.mu <= 0.0) {
            return Err(invalid("mu must be non-positive"));
        }
        if self.n_mats < 1 {
            return Err(invalid("at least one Matsubara frequency is required"));
        }
        if self.k_grid.is_empty() {
            return Err(invalid("empty momentum grid"));
        }
        let set: std::collections::BTreeSet<_> = self.k_grid.iter().collect();
        for j in &self.k_grid {
            if j.0.len() != self.d as usize {
                return Err(invalid(format!("mode {:?} does not have {} components", j.0, self.d)));
            }
            if !set.contains(&j.neg()) {
                return Err(invalid(format!("momentum grid is not symmetric: {:?} lacks its negative", j.0)));
            }
        }
        Ok(())
    }

    pub fn constraints(&self) -> TraceConstraints {
        self.reg.constraints(self.d, self.s)
    }

    pub fn momentum_norm(&self, j: &ModeIndex) -> f64 {
        TAU / self.l * (j.norm_sq() as f64).sqrt()
    }

    /// ε(k) = |k|^s − μ.
    pub fn energy(&self, j: &ModeIndex) -> f64 {
        let k = self.momentum_norm(j);
        let h = if k == 0.0 { 0.0 } else { k.powf(self.s) };
        h - self.mu
    }

    pub fn omega(&self, n: i64) -> f64 {
        TAU * n as f64 / self.beta
    }

    /// One representative per conjugate pair {(n, k), (−n, −k)}; the
    /// singular mode (0, 0) with ε = 0 is left out.
    pub fn modes(&self) -> Vec<PathMode> {
        let mut out = Vec::new();
        let n_max = self.n_mats as i64;
        for n in -n_max..=n_max {
            for k in &self.k_grid {
                let key = (n, k.clone());
                let partner = (-n, k.neg());
                if partner < key {
                    continue;
                }
                let omega = self.omega(n);
                let eps = self.energy(k);
                if omega == 0.0 && eps == 0.0 {
                    continue;
                }
                out.push(PathMode { n, k: k.clone(), omega, eps, cov: 1.0 / (omega * omega + eps * eps), self_conjugate: partner == key });
            }
        }
        out
    }
}

/// G(Δ; ε, β) = (e^{−|Δ|ε} + e^{−(β−|Δ|)ε}) / (2ε(1 − e^{−βε})), with Δ
/// reduced to [0, β] by periodicity.
pub fn sharp_time_kernel(delta: f64, eps: f64, beta: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::Domain(format!("sharp-time kernel needs ε > 0, got {eps}")));
    }
    let t = delta.abs().rem_euclid(beta);
    Ok(((-t * eps).exp() + (-(beta - t) * eps).exp()) / (-2.0 * eps * (-beta * eps).exp_m1()))
}

/// Truncated Matsubara sum against the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatsubaraReport {
    pub t: f64,
    pub truncated: f64,
    pub closed_form: f64,
    pub gap: f64,
    pub relative_gap: f64,
}

/// (1/β) Σ_{|n|≤N} e^{iω_n t}/(ω_n² + ε²) against G(t; ε, β).
pub fn matsubara_sum(t: f64, eps: f64, beta: f64, n_max: u64) -> Result<MatsubaraReport> {
    if !(eps > 0.0) {
        return Err(Error::Domain("ε = 0 is the singular zero mode".into()));
    }
    if !(beta > 0.0) || t.abs() > beta {
        return Err(invalid("need β > 0 and |t| ≤ β"));
    }
    // Summed from the tail inward so the small terms are not swamped.
    let mut acc = 0.0;
    for n in (1..=n_max).rev() {
        let w = TAU * n as f64 / beta;
        acc += 2.0 * (w * t).cos() / (w * w + eps * eps);
    }
    let truncated = (acc + 1.0 / (eps * eps)) / beta;
    let closed_form = sharp_time_kernel(t, eps, beta)?;
    let gap = (truncated - closed_form).abs();
    Ok(MatsubaraReport { t, truncated, closed_form, gap, relative_gap: gap / closed_form.abs() })
}

/// G(0; ε, β) = coth(βε/2)/(2ε).
pub fn kernel_at_zero(eps: f64, beta: f64) -> f64 {
    coth_half(beta * eps) / (2.0 * eps)
}

/// Σ_k G(|t₁ − t₂|; ε(k), β) conj(g₁_k) g₂_k over `spec.k_grid`.
pub fn sharp_time_inner(t1: f64, g1: &[num_complex::Complex64], t2: f64, g2: &[num_complex::Complex64], spec: &PathSpaceSpec) -> Result<num_complex::Complex64> {
    if g1.len() != spec.k_grid.len() || g2.len() != spec.k_grid.len() {
        return Err(invalid("coefficient vectors must match the momentum grid"));
    }
    let mut acc = num_complex::Complex64::new(0.0, 0.0);
    for (idx, j) in spec.k_grid.iter().enumerate() {
        let w = g1[idx].conj() * g2[idx];
        if w == num_complex::Complex64::new(0.0, 0.0) {
            continue;
        }
        let eps = spec.energy(j);
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("support touches ε = 0 at mode {:?}", j.0)));
        }
        acc += w * sharp_time_kernel(t1 - t2, eps, spec.beta)?;
    }
    Ok(acc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceVerdict {
    Converged,
    Diverging,
    Inconclusive,
}

/// Partial sums of Σ_n ∫ T(ω_n, k) dk over growing cutoffs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceReport {
    pub d: u32,
    pub s: f64,
    pub reg: RegExponents,
    pub constraints: TraceConstraints,
    /// (N_j, K_j): |n| ≤ N_j and 1/K_j ≤ |k| ≤ K_j.
    pub cutoffs: Vec<(u64, f64)>,
    pub partial_sums: Vec<f64>,
    pub increments: Vec<f64>,
    pub ratios: Vec<f64>,
    pub verdict: TraceVerdict,
}

/// Cutoff sequence for [`trace_condition_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceCutoffs {
    pub n0: u64,
    pub k0: f64,
    pub levels: usize,
}

impl Default for TraceCutoffs {
    fn default() -> Self {
        Self { n0: 4, k0: 2.0, levels: 9 }
    }
}

/// T(ω, k) = (|k|^{2a} ∧ 1) / ((ω² + |k|^{2s})(1 + ω²)^r (1 + |k|²)^u).
pub fn trace_integrand(omega: f64, k: f64, s: f64, reg: &RegExponents) -> f64 {
    reg.inverse_weight(omega, k) / (omega * omega + k.powf(2.0 * s))
}

/// Doubles the frequency cutoff and the momentum cutoffs at both ends
/// together. Converged when the last three increment ratios are at most
/// 3/4, diverging when they are all at least 0.9.
pub fn trace_condition_check(d: u32, s: f64, reg: RegExponents, beta: f64, cutoffs: TraceCutoffs) -> Result<TraceReport> {
    if cutoffs.levels < 4 || cutoffs.n0 < 1 || !(cutoffs.k0 > 1.0) {
        return Err(invalid("need at least 4 levels, n0 ≥ 1 and k0 > 1"));
    }
    let levels = cutoffs.levels;
    let k_cut: Vec<f64> = (0..levels).map(|j| cutoffs.k0 * 2f64.powi(j as i32)).collect();
    let n_cut: Vec<u64> = (0..levels).map(|j| cutoffs.n0 << j).collect();
    // Shells in ln|k|: index 0 is the core [1/K₀, K₀]; level j adds
    // [1/K_j, 1/K_{j-1}] and [K_{j-1}, K_j].
    let mut shells: Vec<Vec<(f64, f64)>> = vec![vec![(-k_cut[0].ln(), k_cut[0].ln())]];
    for j in 1..levels {
        shells.push(vec![(-k_cut[j].ln(), -k_cut[j - 1].ln()), (k_cut[j - 1].ln(), k_cut[j].ln())]);
    }
    let area = sphere_area(d);
    let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-12, max_evals: 200_000 };
    let dim = d as f64;
    let radial = |omega: f64, x0: f64, x1: f64| -> f64 {
        let panels = ((x1 - x0) / 0.5).ceil().max(1.0) as usize;
        let r = integrate_real(
            |x| {
                let k = x.exp();
                trace_integrand(omega, k, s, &reg) * k.powf(dim)
            },
            &uniform_breaks(x0, x1, panels),
            &opts,
        );
        area * r.value.re
    };
    let n_top = *n_cut.last().unwrap();
    // per_n[n][j]: ∫ over shell j at frequency ω_n.
    let per_n: Vec<Vec<f64>> = (0..=n_top)
        .into_par_iter()
        .map(|n| {
            let omega = TAU * n as f64 / beta;
            shells.iter().map(|sh| sh.iter().map(|&(a, b)| radial(omega, a, b)).sum()).collect()
        })
        .collect();
    let mut partial_sums = Vec::with_capacity(levels);
    for j in 0..levels {
        let mut acc = 0.0;
        for n in 0..=n_cut[j] {
            let mult = if n == 0 { 1.0 } else { 2.0 };
            acc += mult * per_n[n as usize][..=j].iter().sum::<f64>();
        }
        partial_sums.push(acc);
    }
    let increments: Vec<f64> = partial_sums.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = increments.windows(2).map(|w| w[1] / w[0]).collect();
    let tail = &ratios[ratios.len().saturating_sub(3)..];
    let verdict = if tail.iter().all(|&r| r <= 0.75) {
        TraceVerdict::Converged
    } else if tail.iter().all(|&r| r >= 0.9) {
        TraceVerdict::Diverging
    } else {
        TraceVerdict::Inconclusive
    };
    Ok(TraceReport {
        d,
        s,
        reg,
        constraints: reg.constraints(d, s),
        cutoffs: n_cut.into_iter().zip(k_cut).collect(),
        partial_sums,
        increments,
        ratios,
        verdict,
    })
}

/// Bose occupation 1/(e^x − 1) at βε = x.
pub(crate) fn occupation(x: f64) -> f64 {
    1.0 / x.exp_m1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn matsubara_closed_forms() {
        let r0 = matsubara_sum(0.0, 1.0, 1.0, 10_000).unwrap();
        assert!((r0.closed_form - 1.081_977).abs() < 1e-6);
        assert!((r0.closed_form - 0.5 / (0.5f64).tanh()).abs() < 1e-14);
        assert!(r0.relative_gap < 1e-4);
        let r1 = matsubara_sum(0.5, 1.0, 1.0, 10_000).unwrap();
        let oracle = (-0.5f64).exp() / (1.0 - (-1.0f64).exp());
        assert!((r1.closed_form - oracle).abs() < 1e-14);
        assert!((r1.closed_form - 0.959_517_4).abs() < 1e-6);
        assert!(r1.relative_gap < 1e-4);
        assert!(matsubara_sum(0.0, 0.0, 1.0, 10).is_err());
    }

    #[test]
    fn matsubara_gap_halves() {
        for t in [0.0, 0.25, 0.5] {
            let gaps: Vec<f64> = (0..4).map(|j| matsubara_sum(t, 1.0, 1.0, 10_000 << j).unwrap().gap).collect();
            for w in gaps.windows(2) {
                assert!(w[1] <= 0.5 * w[0] * (1.0 + 1e-3), "t = {t}: {gaps:?}");
            }
        }
    }

    #[test]
    fn sharp_time_inner_reductions() {
        let spec = PathSpaceSpec::new(1.0, 1.0, 1, 0.0, TAU, 4, vec![ModeIndex(vec![1]), ModeIndex(vec![-1])], RegExponents { r: 1.0, u: 2.0, a: 0.0 }).unwrap();
        // ε = 1 on both modes.
        let one = num_complex::Complex64::new(1.0, 0.0);
        let zero = num_complex::Complex64::new(0.0, 0.0);
        let g = vec![one, zero];
        let v = sharp_time_inner(0.3, &g, 0.3, &g, &spec).unwrap();
        assert!((v.re - 1.081_977).abs() < 1e-6);
        let w = sharp_time_inner(0.0, &g, 1.0, &g, &spec).unwrap();
        assert!((w - v).norm() < 1e-14);
        let big = sharp_time_kernel(0.7, 1.0, 200.0).unwrap();
        assert!((big - (-0.7f64).exp() / 2.0).abs() < 1e-14);
    }

    #[test]
    fn trace_verdicts() {
        let ok1 = trace_condition_check(3, 1.0, RegExponents::standard(1.0).unwrap(), 1.0, TraceCutoffs::default()).unwrap();
        assert_eq!(ok1.verdict, TraceVerdict::Converged, "{:?}", ok1.ratios);
        let ok2 = trace_condition_check(3, 2.0, RegExponents::standard(2.0).unwrap(), 1.0, TraceCutoffs::default()).unwrap();
        assert_eq!(ok2.verdict, TraceVerdict::Converged, "{:?}", ok2.ratios);
        let bad = trace_condition_check(3, 2.0, RegExponents { r: 1.0, u: 2.0, a: 0.5 }, 1.0, TraceCutoffs::default()).unwrap();
        assert_eq!(bad.verdict, TraceVerdict::Diverging, "{:?}", bad.ratios);
        assert!(!bad.constraints.infrared);
        // The exponent constraints are sufficient only: at r = 1/2 the
        // frequency sum still converges because the k-integral adds ω⁻².
        let edge = trace_condition_check(3, 1.0, RegExponents { r: 0.5, u: 2.0, a: 0.0 }, 1.0, TraceCutoffs::default()).unwrap();
        assert!(!edge.constraints.temporal);
        assert_eq!(edge.verdict, TraceVerdict::Converged);
    }

    #[test]
    fn modes_pair_up() {
        let spec = PathSpaceSpec::cube(1.0, 2.0, 3, 4.0, 2, 1, RegExponents::standard(2.0).unwrap()).unwrap();
        let modes = spec.modes();
        // 5 × 27 modes, minus the singular one, in conjugate pairs.
        assert_eq!(modes.len(), (5 * 27 - 1) / 2);
        assert!(modes.iter().all(|m| !m.self_conjugate));
        assert!(PathSpaceSpec::new(1.0, 2.0, 1, 0.0, 1.0, 1, vec![ModeIndex(vec![1])], RegExponents::standard(2.0).unwrap()).is_err());
    }

    proptest! {
        #[test]
        fn kernel_reflection_and_origin(eps in 0.05f64..20.0, beta in 0.1f64..5.0, frac in 0.0f64..1.0) {
            let d = frac * beta;
            let a = sharp_time_kernel(d, eps, beta).unwrap();
            let b = sharp_time_kernel(beta - d, eps, beta).unwrap();
            prop_assert!((a - b).abs() <= 1e-14 * a.abs());
            let g0 = sharp_time_kernel(0.0, eps, beta).unwrap();
            prop_assert!((g0 - kernel_at_zero(eps, beta)).abs() <= 1e-14 * g0);
        }
    }
}
