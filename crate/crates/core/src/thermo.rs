//! Grand-canonical thermodynamics of the free Bose gas: finite-volume
//! particle numbers, the fugacity solve, and the infinite-volume critical
//! density and condensate density.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{shell_counts, LatticeModes, ModelParams};
use crate::numerics::quad::{integrate_real, QuadOptions};
use crate::numerics::special::{bose, compensated_sum, sphere_area};

/// βh(k) beyond which the lattice cutoff is considered converged.
const CUTOFF_EXPONENT: f64 = 40.0;

/// Particle-number decomposition at a given fugacity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleNumber {
    pub n_v: f64,
    pub n_0: f64,
    pub n_remainder: f64,
    /// Change of N_V when the cutoff is doubled (0 if not estimated).
    pub tail_estimate: f64,
}

/// Solution of ρ_V(β, y_V) = ρ̄ on one box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermoSolution {
    pub l: f64,
    pub y_v: f64,
    pub n_v: f64,
    pub n_0: f64,
    pub rho_v: f64,
    /// |ρ_V - ρ̄| at the returned fugacity.
    pub residual: f64,
    pub tail_estimate: f64,
}

/// Infinite-volume data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub rho_c: f64,
    pub rho_c_error: f64,
    pub beta_c: f64,
    pub n0: f64,
    pub y_inf: f64,
}

/// Radial lattice sum grouped by |j|² shells; immutable and cheap to
/// evaluate repeatedly inside a root finder.
#[derive(Debug, Clone)]
pub struct ShellSum {
    /// (βh, multiplicity) for every nonzero shell.
    shells: Vec<(f64, f64)>,
}

impl ShellSum {
    /// All modes with |j|² ≤ n_sq_max on a box of side `l`.
    pub fn new(params: &ModelParams, l: f64, n_sq_max: i64) -> Self {
        let counts = shell_counts(params.d, n_sq_max);
        Self::from_counts(params, l, &counts)
    }

    /// Shells of an explicit lattice.
    pub fn from_lattice(params: &ModelParams, lattice: &LatticeModes) -> Self {
        let mut counts: BTreeMap<i64, (f64, u64)> = BTreeMap::new();
        for j in &lattice.modes {
            let e = counts.entry(j.norm_sq()).or_insert((lattice.energy(j, params.s), 0));
            e.1 += 1;
        }
        let shells = counts
            .iter()
            .filter(|(&n2, _)| n2 > 0)
            .map(|(_, &(h, c))| (params.beta * h, c as f64))
            .collect();
        Self { shells }
    }

    fn from_counts(params: &ModelParams, l: f64, counts: &BTreeMap<i64, u64>) -> Self {
        let a2 = (2.0 * PI / l).powi(2);
        let shells = counts
            .iter()
            .filter(|(&n2, _)| n2 > 0)
            .map(|(&n2, &c)| (params.beta * (a2 * n2 as f64).powf(0.5 * params.s), c as f64))
            .collect();
        Self { shells }
    }

    /// Σ_{k≠0} 1/(y e^{βh} - 1) with ln y supplied.
    pub fn remainder(&self, ln_y: f64) -> f64 {
        compensated_sum(self.shells.iter().map(|&(x, c)| c * bose(x, ln_y)))
    }

    /// d/dy of the remainder sum times y, i.e. -Σ e^{x+ln y}/(e^{x+ln y}-1)².
    pub fn remainder_log_derivative(&self, ln_y: f64) -> f64 {
        -compensated_sum(self.shells.iter().map(|&(x, c)| {
            let b = bose(x, ln_y);
            c * b * (1.0 + b)
        }))
    }
}

/// Shell radius² that puts βh above the convergence threshold.
pub fn converged_n_sq_max(params: &ModelParams, l: f64) -> i64 {
    let k_max = (CUTOFF_EXPONENT / params.beta).powf(1.0 / params.s);
    let n_max = k_max * l / (2.0 * PI);
    (n_max * n_max).ceil() as i64 + 1
}

/// N_V = Σ_k 1/(y e^{βh(k)} - 1) over the lattice, with N_0 = 1/(y-1).
pub fn mean_particle_number(params: &ModelParams, lattice: &LatticeModes, y: f64) -> Result<ParticleNumber> {
    if !(y > 1.0) {
        return Err(Error::Domain(format!("fugacity must exceed 1 (zero mode diverges), got {y}")));
    }
    if !lattice.contains_zero() {
        return Err(invalid("lattice must contain the zero mode"));
    }
    let ln_y = (y - 1.0).ln_1p();
    let sum = ShellSum::from_lattice(params, lattice);
    let n_0 = 1.0 / (y - 1.0);
    let n_remainder = sum.remainder(ln_y);
    let doubled = crate::model::build_lattice_scaled(lattice.d, lattice.l0, lattice.m, 2.0 * lattice.k_max)?;
    let tail_estimate = ShellSum::from_lattice(params, &doubled).remainder(ln_y) - n_remainder;
    Ok(ParticleNumber { n_v: n_0 + n_remainder, n_0, n_remainder, tail_estimate })
}

/// Relative tolerance on the density residual of the fugacity solve.
pub const FUGACITY_RTOL: f64 = 1e-13;

/// Solves ρ_V(β, y) = ρ̄ on the given shells by bisection in ln(y - 1).
///
/// The map y ↦ ρ_V is strictly decreasing on (1, ∞) and diverges as
/// y ↓ 1, so a bracket always exists; the upper end is doubled until
/// ρ_V falls below ρ̄.
pub fn solve_on_shells(params: &ModelParams, l: f64, shells: &ShellSum) -> Result<(f64, f64)> {
    let v = l.powi(params.d as i32);
    let target = params.rho_bar * v;
    // N(δ) with y = 1 + δ
    let count = |delta: f64| -> f64 { 1.0 / delta + shells.remainder(delta.ln_1p()) };
    let mut lo = (1.0 / target).min(1.0) * 1e-3;
    while count(lo) < target {
        lo *= 1e-3;
        if lo < 1e-300 {
            return Err(Error::Bracket("density cannot be reached near y = 1".into()));
        }
    }
    let mut hi = (1.0 / target).max(1.0);
    while count(hi) > target {
        hi *= 2.0;
        if !hi.is_finite() || hi > 1e300 {
            return Err(Error::Bracket(format!("no upper bracket up to y = {hi}")));
        }
    }
    let tol = FUGACITY_RTOL * target;
    for _ in 0..400 {
        let mid = (lo * hi).sqrt();
        let n = count(mid);
        if (n - target).abs() <= tol {
            return Ok((mid, n));
        }
        if n > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
    }
    let mid = (lo * hi).sqrt();
    Ok((mid, count(mid)))
}

/// Fugacity on the box of side `params.l` using the given lattice.
pub fn solve_fugacity(params: &ModelParams, lattice: &LatticeModes) -> Result<ThermoSolution> {
    params.validate()?;
    let l = lattice.side();
    let shells = ShellSum::from_lattice(params, lattice);
    let (delta, n_v) = solve_on_shells(params, l, &shells)?;
    let v = lattice.volume();
    let doubled = crate::model::build_lattice_scaled(lattice.d, lattice.l0, lattice.m, 2.0 * lattice.k_max)?;
    let tail = ShellSum::from_lattice(params, &doubled).remainder(delta.ln_1p()) - shells.remainder(delta.ln_1p());
    Ok(ThermoSolution {
        l,
        y_v: 1.0 + delta,
        n_v,
        n_0: 1.0 / delta,
        rho_v: n_v / v,
        residual: (n_v / v - params.rho_bar).abs(),
        tail_estimate: tail,
    })
}

/// Fugacity on a box of side `l` with an automatically converged cutoff.
/// Returns the solution together with y - 1 at full precision.
pub fn solve_fugacity_auto(params: &ModelParams, l: f64) -> Result<(ThermoSolution, f64)> {
    params.validate()?;
    let n_sq = converged_n_sq_max(params, l);
    let shells = ShellSum::new(params, l, n_sq);
    let (delta, n_v) = solve_on_shells(params, l, &shells)?;
    let wide = ShellSum::new(params, l, 4 * n_sq);
    let ln_y = delta.ln_1p();
    let tail = wide.remainder(ln_y) - shells.remainder(ln_y);
    let v = l.powi(params.d as i32);
    let sol = ThermoSolution {
        l,
        y_v: 1.0 + delta,
        n_v,
        n_0: 1.0 / delta,
        rho_v: n_v / v,
        residual: (n_v / v - params.rho_bar).abs(),
        tail_estimate: tail,
    };
    Ok((sol, delta))
}

/// ∫_0^∞ x^{a-1} / (y e^x - 1) dx given ln y ≥ 0, a > 1 (a > 0 if y > 1).
///
/// Below x = 30 the integrand is integrated directly after x = t² (which
/// removes the x^{-1/2}-type endpoint behaviour); above, the Bose factor
/// is replaced by its geometric series, integrated term by term as
/// incomplete Gamma tails.
fn bose_integral(a: f64, ln_y: f64, opts: &QuadOptions) -> (f64, f64) {
    const SWITCH: f64 = 30.0;
    let ts = SWITCH.sqrt();
    let near = integrate_real(
        |t| {
            let x = t * t;
            2.0 * t * x.powf(a - 1.0) * bose(x, ln_y)
        },
        &[0.0, 0.25 * ts, 0.5 * ts, ts],
        opts,
    );
    // ∫_30^∞ x^{a-1} Σ_m y^{-m} e^{-mx} dx
    let mut far = 0.0;
    let mut far_err = 0.0;
    for m in 1..=20 {
        let mf = m as f64;
        let tail = upper_gamma_tail(a, mf * SWITCH) / mf.powf(a) * (-mf * ln_y).exp();
        far += tail;
        if tail < 1e-18 * far.abs() {
            break;
        }
        far_err = tail;
    }
    (near.value.re + far, near.error + far_err * 1e-3)
}

/// Γ(a, z) = ∫_z^∞ x^{a-1} e^{-x} dx for z ≥ 30, by quadrature of the
/// shifted integrand e^{-z} ∫_0^∞ (z+u)^{a-1} e^{-u} du.
fn upper_gamma_tail(a: f64, z: f64) -> f64 {
    let rule = crate::numerics::quad::gauss_laguerre(48);
    let s: f64 = rule.nodes.iter().zip(&rule.weights).map(|(u, w)| w * (z + u).powf(a - 1.0)).sum();
    (-z).exp() * s
}

/// ρ(β, y) = (2π)^{-d} ∫ dk / (y e^{β|k|^s} - 1) for y ≥ 1.
///
/// Radial substitution x = β κ^s gives
/// ρ = (2π)^{-d} |S^{d-1}| s^{-1} β^{-d/s} ∫_0^∞ x^{d/s-1}/(y e^x - 1) dx.
pub fn continuum_density(beta: f64, y: f64, d: u32, s: f64) -> Result<(f64, f64)> {
    if !(beta > 0.0) || !(s > 0.0) || d == 0 {
        return Err(invalid("need beta > 0, s > 0, d ≥ 1"));
    }
    if !(y >= 1.0) {
        return Err(Error::Domain(format!("fugacity below 1: {y}")));
    }
    let a = d as f64 / s;
    if y == 1.0 && a <= 1.0 {
        return Err(Error::Divergent(format!(
            "critical density diverges for d/s = {a} ≤ 1 (no condensation in this regime)"
        )));
    }
    let prefactor = (2.0 * PI).powi(-(d as i32)) * sphere_area(d) / s * beta.powf(-a);
    let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_evals: 2_000_000 };
    let (v, e) = bose_integral(a, (y - 1.0).ln_1p(), &opts);
    Ok((prefactor * v, prefactor * e))
}

/// ρ_c(β) = ρ(β, 1).
pub fn critical_density(beta: f64, d: u32, s: f64) -> Result<(f64, f64)> {
    continuum_density(beta, 1.0, d, s)
}

/// n₀ = max(0, ρ̄ - ρ_c), the critical inverse temperature and the
/// limiting fugacity.
pub fn condensate_density(beta: f64, rho_bar: f64, d: u32, s: f64) -> Result<CriticalData> {
    if !(rho_bar > 0.0) {
        return Err(invalid("rho_bar must be positive"));
    }
    let (rho_c, rho_c_error) = critical_density(beta, d, s)?;
    let n0 = (rho_bar - rho_c).max(0.0);
    let beta_c = critical_beta(rho_bar, d, s)?;
    let y_inf = if rho_bar >= rho_c { 1.0 } else { limit_fugacity(beta, rho_bar, d, s)? };
    Ok(CriticalData { rho_c, rho_c_error, beta_c, n0, y_inf })
}

/// Solves ρ_c(β) = ρ̄ by bisection in ln β after bracketing.
pub fn critical_beta(rho_bar: f64, d: u32, s: f64) -> Result<f64> {
    let f = |b: f64| -> Result<f64> { Ok(critical_density(b, d, s)?.0 - rho_bar) };
    let (mut lo, mut hi) = (1.0f64, 1.0f64);
    // ρ_c decreases in β
    let mut scanned = 0;
    while f(lo)? < 0.0 {
        lo /= 2.0;
        scanned += 1;
        if scanned > 200 {
            return Err(Error::Bracket(format!("beta_c below {lo}")));
        }
    }
    while f(hi)? > 0.0 {
        hi *= 2.0;
        scanned += 1;
        if scanned > 400 {
            return Err(Error::Bracket(format!("beta_c above {hi}")));
        }
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

/// Limit fugacity y_∞: 1 when ρ̄ ≥ ρ_c, otherwise the y > 1 with
/// ρ(β, y) = ρ̄.
pub fn limit_fugacity(beta: f64, rho_bar: f64, d: u32, s: f64) -> Result<f64> {
    if rho_bar >= critical_density(beta, d, s)?.0 {
        return Ok(1.0);
    }
    let f = |delta: f64| -> Result<f64> { Ok(continuum_density(beta, 1.0 + delta, d, s)?.0 - rho_bar) };
    let mut lo = 1e-12;
    if f(lo)? < 0.0 {
        return Ok(1.0 + lo);
    }
    let mut hi = 1.0;
    while f(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::Bracket("no upper fugacity bracket".into()));
        }
    }
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok(1.0 + (lo * hi).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_lattice;

    fn zeta(s: f64) -> f64 {
        // Independent oracle: direct sum with Euler-Maclaurin tail.
        let n = 10_000usize;
        let mut sum = 0.0;
        for k in (1..n).rev() {
            sum += (k as f64).powf(-s);
        }
        let nf = n as f64;
        sum + nf.powf(1.0 - s) / (s - 1.0) + 0.5 * nf.powf(-s) + s / 12.0 * nf.powf(-s - 1.0)
    }

    #[test]
    fn particle_number_examples() {
        let p = ModelParams::new(1, 2.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let zero_only = build_lattice(1, 1.0, 0.5).unwrap();
        let n = mean_particle_number(&p, &zero_only, 2.0).unwrap();
        assert!((n.n_v - 1.0).abs() < 1e-15 && (n.n_0 - 1.0).abs() < 1e-15);
        assert!(mean_particle_number(&p, &zero_only, 1.0).is_err());

        // {0, ±k₁} with β h(k₁) = 1: L = 2π, s = 2, β = 1.
        let lat = build_lattice(1, 2.0 * PI, 1.5).unwrap();
        let n = mean_particle_number(&p, &lat, 1.5).unwrap();
        assert!((n.n_0 - 2.0).abs() < 1e-14);
        let expected = 2.0 / (1.5 * 1f64.exp() - 1.0);
        assert!((n.n_remainder - expected).abs() < 1e-14);
        assert!((n.n_remainder - 0.649_894_462_745_379_8).abs() < 1e-14);
    }

    #[test]
    fn fugacity_examples_on_zero_lattice() {
        let lat = build_lattice(1, 1.0, 0.5).unwrap();
        let p = ModelParams::new(1, 2.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let sol = solve_fugacity(&p, &lat).unwrap();
        assert!((sol.y_v - 2.0).abs() < 1e-12);
        let p10 = ModelParams { rho_bar: 10.0, ..p };
        let sol = solve_fugacity(&p10, &lat).unwrap();
        assert!((sol.y_v - 1.1).abs() < 1e-12);
    }

    #[test]
    fn critical_density_matches_series_oracles() {
        let (r2, _) = critical_density(1.0, 3, 2.0).unwrap();
        let oracle2 = zeta(1.5) * (4.0 * PI).powf(-1.5);
        assert!(((r2 - oracle2) / oracle2).abs() < 1e-9, "{r2} vs {oracle2}");
        let (r1, _) = critical_density(1.0, 3, 1.0).unwrap();
        let oracle1 = zeta(3.0) / (PI * PI);
        assert!(((r1 - oracle1) / oracle1).abs() < 1e-9, "{r1} vs {oracle1}");
        assert!(critical_density(1.0, 2, 2.0).is_err());
    }

    #[test]
    fn condensate_density_examples() {
        let (rc, _) = critical_density(1.0, 3, 2.0).unwrap();
        let data = condensate_density(1.0, 2.0 * rc, 3, 2.0).unwrap();
        assert!((data.n0 - rc).abs() < 1e-15);
        assert_eq!(data.y_inf, 1.0);
        // β_c for ρ̄ = 2ρ_c(1): ρ_c(β) = ρ_c(1) β^{-3/2}
        assert!((data.beta_c - 2f64.powf(-2.0 / 3.0)).abs() < 1e-10);
        let boundary = condensate_density(1.0, rc, 3, 2.0).unwrap();
        assert_eq!(boundary.n0, 0.0);
        assert!((boundary.beta_c - 1.0).abs() < 1e-10);
        let below = condensate_density(1.0, 0.5 * rc, 3, 2.0).unwrap();
        assert!(below.y_inf > 1.0);
        let (back, _) = continuum_density(1.0, below.y_inf, 3, 2.0).unwrap();
        assert!((back - 0.5 * rc).abs() < 1e-12);
    }

    #[test]
    fn fugacity_decreases_along_volume_chain() {
        let (rc, _) = critical_density(1.0, 3, 2.0).unwrap();
        let p = ModelParams::new(3, 2.0, 1.0, 0.0, 2.0 * rc, 4.0).unwrap();
        let ys: Vec<f64> = [4.0, 8.0, 16.0].iter().map(|&l| solve_fugacity_auto(&p, l).unwrap().0.y_v).collect();
        assert!(ys[0] > ys[1] && ys[1] > ys[2] && ys[2] > 1.0);
    }
}
