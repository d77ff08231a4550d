//! Model parameters, momentum lattices, the dispersion relation and the
//! Gaussian family of test functions.
//!
//! Conventions: the Fourier transform is unitary, so a position-space
//! function with integral `I` has `f̂(0) = (2π)^{-d/2} I`. Lattice
//! coefficients are samples `f_k = f̂(k)`, and the lattice pairing is the
//! Riemann sum `((2π)^d / V) Σ_k conj(f_k) g_k`.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Physical configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub d: u32,
    pub s: f64,
    pub beta: f64,
    pub mu: f64,
    pub rho_bar: f64,
    #[serde(rename = "L")]
    pub l: f64,
}

impl ModelParams {
    pub fn new(d: u32, s: f64, beta: f64, mu: f64, rho_bar: f64, l: f64) -> Result<Self> {
        let p = Self { d, s, beta, mu, rho_bar, l };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(invalid("d must be a positive integer"));
        }
        if !(self.s > 0.0) {
            return Err(invalid(format!("s must be positive, got {}", self.s)));
        }
        if !(self.beta > 0.0) {
            return Err(invalid(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.mu <= 0.0) {
            return Err(invalid(format!("mu must be non-positive, got {}", self.mu)));
        }
        if !(self.rho_bar > 0.0) {
            return Err(invalid(format!("rho_bar must be positive, got {}", self.rho_bar)));
        }
        if !(self.l > 0.0) {
            return Err(invalid(format!("L must be positive, got {}", self.l)));
        }
        Ok(())
    }

    /// V = L^d, always recomputed.
    pub fn volume(&self) -> f64 {
        self.l.powi(self.d as i32)
    }

    pub fn with_l(&self, l: f64) -> Self {
        Self { l, ..*self }
    }
}

/// Integer multi-index `j` of the momentum `k = (2π/L) j`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex(pub Vec<i64>);

impl ModeIndex {
    pub fn zero(d: u32) -> Self {
        Self(vec![0; d as usize])
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&j| j == 0)
    }

    pub fn norm_sq(&self) -> i64 {
        self.0.iter().map(|j| j * j).sum()
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|j| -j).collect())
    }

    pub fn scaled(&self, m: i64) -> Self {
        Self(self.0.iter().map(|j| j * m).collect())
    }
}

/// |k|^s, with h(0) = 0.
pub fn dispersion(k: &[f64], s: f64) -> f64 {
    let n2: f64 = k.iter().map(|x| x * x).sum();
    if n2 == 0.0 {
        0.0
    } else {
        n2.powf(0.5 * s)
    }
}

/// Modes of (2π/L)Zᵈ inside a ball of radius `k_max`.
///
/// The side is stored as `L = m · l0` so that lattices along a chain of
/// commensurate boxes compute |k|² from the same integer ratio
/// `|j|² / m²`, which makes shared modes bit-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeModes {
    pub d: u32,
    pub l0: f64,
    pub m: u64,
    pub k_max: f64,
    pub modes: Vec<ModeIndex>,
}

impl LatticeModes {
    pub fn side(&self) -> f64 {
        self.l0 * self.m as f64
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.d as i32)
    }

    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.side()
    }

    pub fn contains_zero(&self) -> bool {
        self.modes.iter().any(ModeIndex::is_zero)
    }

    pub fn contains(&self, j: &ModeIndex) -> bool {
        self.modes.binary_search(j).is_ok()
    }

    /// |k|² for index `j`.
    pub fn k_sq(&self, j: &ModeIndex) -> f64 {
        k_sq_from(j.norm_sq(), self.m, self.l0)
    }

    pub fn momentum(&self, j: &ModeIndex) -> Vec<f64> {
        let a = self.spacing();
        j.0.iter().map(|&x| a * x as f64).collect()
    }

    /// h(k) = |k|^s for index `j`.
    pub fn energy(&self, j: &ModeIndex, s: f64) -> f64 {
        let k2 = self.k_sq(j);
        if k2 == 0.0 {
            0.0
        } else {
            k2.powf(0.5 * s)
        }
    }
}

fn k_sq_from(norm_sq: i64, m: u64, l0: f64) -> f64 {
    let base = 2.0 * PI / l0;
    base * base * (norm_sq as f64 / (m as f64 * m as f64))
}

/// All modes of (2π/L)Zᵈ with |k| ≤ k_max, sorted lexicographically.
pub fn build_lattice(d: u32, l: f64, k_max: f64) -> Result<LatticeModes> {
    build_lattice_scaled(d, l, 1, k_max)
}

/// Lattice for the box of side `m · l0`.
pub fn build_lattice_scaled(d: u32, l0: f64, m: u64, k_max: f64) -> Result<LatticeModes> {
    if d == 0 {
        return Err(invalid("d must be a positive integer"));
    }
    if !(l0 > 0.0) || m == 0 {
        return Err(invalid("box side must be positive"));
    }
    if !(k_max >= 0.0) {
        return Err(invalid(format!("k_max must be non-negative, got {k_max}")));
    }
    let side = l0 * m as f64;
    let n_max = (k_max / (2.0 * PI / side) * (1.0 + 1e-12)).floor() as i64;
    let limit = k_max * k_max * (1.0 + 1e-12);
    let mut modes = Vec::new();
    let mut idx = vec![-n_max; d as usize];
    loop {
        let j = ModeIndex(idx.clone());
        if k_sq_from(j.norm_sq(), m, l0) <= limit {
            modes.push(j);
        }
        // odometer increment
        let mut pos = d as usize;
        loop {
            if pos == 0 {
                modes.sort();
                return Ok(LatticeModes { d, l0, m, k_max, modes });
            }
            pos -= 1;
            if idx[pos] < n_max {
                idx[pos] += 1;
                break;
            }
            idx[pos] = -n_max;
        }
    }
}

/// Multiplicity of each value of |j|² among integer points with
/// |j|² ≤ `n_sq_max`, for fast evaluation of radial lattice sums.
pub fn shell_counts(d: u32, n_sq_max: i64) -> BTreeMap<i64, u64> {
    let n_max = (n_sq_max as f64).sqrt().floor() as i64;
    // Build counts dimension by dimension: counts_{d}(n) = Σ_j counts_{d-1}(n - j²).
    let mut counts: BTreeMap<i64, u64> = BTreeMap::new();
    counts.insert(0, 1);
    for _ in 0..d {
        let mut next: BTreeMap<i64, u64> = BTreeMap::new();
        for (&n, &c) in &counts {
            for j in -n_max..=n_max {
                let v = n + j * j;
                if v <= n_sq_max {
                    *next.entry(v).or_insert(0) += c;
                }
            }
        }
        counts = next;
    }
    counts
}

/// One term `c · exp(-σ |k - k₀|²)` of a Gaussian test function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(from = "GaussianTermRepr", into = "GaussianTermRepr")]
pub struct GaussianTerm {
    pub c: Complex64,
    pub sigma: f64,
    pub center: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GaussianTermRepr {
    re_c: f64,
    im_c: f64,
    sigma: f64,
    center: Vec<f64>,
}

impl From<GaussianTermRepr> for GaussianTerm {
    fn from(r: GaussianTermRepr) -> Self {
        Self { c: Complex64::new(r.re_c, r.im_c), sigma: r.sigma, center: r.center }
    }
}

impl From<GaussianTerm> for GaussianTermRepr {
    fn from(t: GaussianTerm) -> Self {
        Self { re_c: t.c.re, im_c: t.c.im, sigma: t.sigma, center: t.center }
    }
}

impl GaussianTerm {
    pub fn centered(c: Complex64, sigma: f64, d: u32) -> Self {
        Self { c, sigma, center: vec![0.0; d as usize] }
    }

    pub fn eval(&self, k: &[f64]) -> Complex64 {
        let r2: f64 = k.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        self.c * (-self.sigma * r2).exp()
    }

    /// Position-space L¹ norm of this term, (2π)^{d/2} |c|.
    pub fn l1_norm(&self) -> f64 {
        (2.0 * PI).powf(self.center.len() as f64 / 2.0) * self.c.norm()
    }
}

/// Lattice coefficients attached to a box.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeFunction {
    pub d: u32,
    pub l0: f64,
    pub m: u64,
    pub coeffs: BTreeMap<ModeIndex, Complex64>,
}

impl LatticeFunction {
    pub fn new(lattice: &LatticeModes, coeffs: BTreeMap<ModeIndex, Complex64>) -> Result<Self> {
        for j in coeffs.keys() {
            if j.0.len() != lattice.d as usize {
                return Err(invalid("mode index has wrong dimension"));
            }
        }
        Ok(Self { d: lattice.d, l0: lattice.l0, m: lattice.m, coeffs })
    }

    pub fn side(&self) -> f64 {
        self.l0 * self.m as f64
    }

    pub fn volume(&self) -> f64 {
        self.side().powi(self.d as i32)
    }

    pub fn k_sq(&self, j: &ModeIndex) -> f64 {
        k_sq_from(j.norm_sq(), self.m, self.l0)
    }

    pub fn energy(&self, j: &ModeIndex, s: f64) -> f64 {
        let k2 = self.k_sq(j);
        if k2 == 0.0 {
            0.0
        } else {
            k2.powf(0.5 * s)
        }
    }

    /// Cell weight (2π)^d / V of the Riemann sum.
    pub fn cell(&self) -> f64 {
        (2.0 * PI).powi(self.d as i32) / self.volume()
    }

    pub fn at(&self, j: &ModeIndex) -> Complex64 {
        self.coeffs.get(j).copied().unwrap_or_default()
    }

    fn same_box(&self, other: &Self) -> bool {
        self.d == other.d && self.l0 == other.l0 && self.m == other.m
    }

    /// ((2π)^d / V) Σ_k conj(f_k) g_k.
    pub fn pairing(&self, other: &Self) -> Result<Complex64> {
        if !self.same_box(other) {
            return Err(invalid("lattice functions live on different boxes"));
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, a) in &self.coeffs {
            if let Some(b) = other.coeffs.get(j) {
                acc += a.conj() * b;
            }
        }
        Ok(acc * self.cell())
    }
}

/// Test function: Gaussian continuum descriptor and/or lattice
/// coefficients, plus f̂(0) and the D₀-domain flag.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub d: u32,
    pub lattice: Option<LatticeFunction>,
    pub continuum: Option<Vec<GaussianTerm>>,
    pub f_hat_zero: Complex64,
    pub in_l1: bool,
}

impl TestFunction {
    /// Finite sum of Gaussians in momentum space.
    pub fn gaussians(d: u32, terms: Vec<GaussianTerm>) -> Result<Self> {
        for t in &terms {
            if t.center.len() != d as usize {
                return Err(invalid("Gaussian center has wrong dimension"));
            }
            if !(t.sigma > 0.0) {
                return Err(invalid("Gaussian width must be positive"));
            }
        }
        let zero = vec![0.0; d as usize];
        let f_hat_zero = terms.iter().map(|t| t.eval(&zero)).sum();
        Ok(Self { d, lattice: None, continuum: Some(terms), f_hat_zero, in_l1: true })
    }

    /// Single centered Gaussian `c · exp(-σ|k|²)`.
    pub fn gaussian(d: u32, c: Complex64, sigma: f64) -> Result<Self> {
        Self::gaussians(d, vec![GaussianTerm::centered(c, sigma, d)])
    }

    /// The zero function (as an empty Gaussian sum).
    pub fn zero(d: u32) -> Self {
        Self { d, lattice: None, continuum: Some(Vec::new()), f_hat_zero: Complex64::new(0.0, 0.0), in_l1: true }
    }

    /// Lattice-only function. A finite mode sum is a trigonometric
    /// polynomial on the box, hence integrable there.
    pub fn from_lattice(lf: LatticeFunction) -> Self {
        let f_hat_zero = lf.at(&ModeIndex::zero(lf.d));
        Self { d: lf.d, lattice: Some(lf), continuum: None, f_hat_zero, in_l1: true }
    }

    /// Marks the function as lying outside D₀ (not integrable).
    pub fn outside_l1(mut self) -> Self {
        self.in_l1 = false;
        self
    }

    pub fn terms(&self) -> Option<&[GaussianTerm]> {
        self.continuum.as_deref()
    }

    /// f̂(k) from the continuum descriptor.
    pub fn eval_hat(&self, k: &[f64]) -> Result<Complex64> {
        let terms = self.terms().ok_or_else(|| invalid("no continuum descriptor"))?;
        Ok(terms.iter().map(|t| t.eval(k)).sum())
    }

    /// Samples the continuum descriptor at every lattice mode.
    pub fn sample_on(&self, lattice: &LatticeModes) -> Result<LatticeFunction> {
        let mut coeffs = BTreeMap::new();
        for j in &lattice.modes {
            coeffs.insert(j.clone(), self.eval_hat(&lattice.momentum(j))?);
        }
        LatticeFunction::new(lattice, coeffs)
    }

    /// Attaches sampled lattice coefficients to a continuum function.
    pub fn with_lattice(mut self, lattice: &LatticeModes) -> Result<Self> {
        self.lattice = Some(self.sample_on(lattice)?);
        Ok(self)
    }

    /// Multiplies every coefficient by `z`.
    pub fn scaled(&self, z: Complex64) -> Self {
        let mut out = self.clone();
        if let Some(ts) = out.continuum.as_mut() {
            for t in ts.iter_mut() {
                t.c *= z;
            }
        }
        if let Some(lf) = out.lattice.as_mut() {
            for v in lf.coeffs.values_mut() {
                *v *= z;
            }
        }
        out.f_hat_zero *= z;
        out
    }

    /// Gauge rotation f ↦ e^{iθ₀} f.
    pub fn rotated(&self, theta0: f64) -> Self {
        self.scaled(Complex64::from_polar(1.0, theta0))
    }

    /// Sum of two continuum functions.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        match (self.terms(), other.terms()) {
            (Some(a), Some(b)) if self.d == other.d => {
                let mut ts = a.to_vec();
                ts.extend_from_slice(b);
                let mut out = Self::gaussians(self.d, ts)?;
                out.in_l1 = self.in_l1 && other.in_l1;
                Ok(out)
            }
            _ => Err(invalid("sum needs two continuum functions of equal dimension")),
        }
    }

    /// Upper bound on the position-space L¹ norm: Σ_j (2π)^{d/2}|c_j|.
    /// Exact for a single Gaussian term.
    pub fn l1_norm_bound(&self) -> Result<f64> {
        if !self.in_l1 {
            return Err(Error::Domain("function is not integrable".into()));
        }
        match (self.terms(), &self.lattice) {
            (Some(ts), _) => Ok(ts.iter().map(GaussianTerm::l1_norm).sum()),
            (None, Some(lf)) => {
                // Σ_k f_k e^{ikx} (2π)^{d/2}/V on the box: bounded by Σ|f_k| (2π)^{d/2}.
                Ok((2.0 * PI).powf(lf.d as f64 / 2.0) * lf.coeffs.values().map(|c| c.norm()).sum::<f64>())
            }
            (None, None) => Err(invalid("empty test function")),
        }
    }

    /// ⟨f, g⟩ = ∫ conj(f̂) ĝ dk. Continuum data use the closed Gaussian
    /// product formula; otherwise the lattice Riemann sum.
    pub fn inner(&self, other: &Self) -> Result<Complex64> {
        if self.d != other.d {
            return Err(invalid("dimension mismatch"));
        }
        if let (Some(a), Some(b)) = (self.terms(), other.terms()) {
            let d = self.d as f64;
            let mut acc = Complex64::new(0.0, 0.0);
            for s in a {
                for t in b {
                    let w = s.sigma + t.sigma;
                    let dist2: f64 = s.center.iter().zip(&t.center).map(|(x, y)| (x - y) * (x - y)).sum();
                    acc += s.c.conj() * t.c * (PI / w).powf(d / 2.0) * (-s.sigma * t.sigma / w * dist2).exp();
                }
            }
            return Ok(acc);
        }
        match (&self.lattice, &other.lattice) {
            (Some(a), Some(b)) => a.pairing(b),
            _ => Err(invalid("no common representation for the pairing")),
        }
    }
}

/// Normalized indicator probe of the box, b^{(#)}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroModeProbe {
    pub sharpness: u8,
    pub l: f64,
    pub d: u32,
    pub fourier_at_zero: f64,
}

/// Probe b^{(#)} = V^{-(1+#)/2} 1_{[0,L]^d}; its only nonzero lattice
/// coefficient is f̂(0) = (2π)^{-d/2} V^{(1-#)/2}.
pub fn probe(sharpness: u8, l: f64, d: u32) -> Result<ZeroModeProbe> {
    if sharpness > 1 {
        return Err(invalid("probe sharpness must be 0 or 1"));
    }
    if !(l > 0.0) || d == 0 {
        return Err(invalid("probe needs L > 0 and d ≥ 1"));
    }
    let v = l.powi(d as i32);
    let fourier_at_zero = (2.0 * PI).powf(-(d as f64) / 2.0) * v.powf((1.0 - sharpness as f64) / 2.0);
    Ok(ZeroModeProbe { sharpness, l, d, fourier_at_zero })
}

impl ZeroModeProbe {
    pub fn volume(&self) -> f64 {
        self.l.powi(self.d as i32)
    }

    /// Position-space amplitude V^{-(1+#)/2}.
    pub fn amplitude(&self) -> f64 {
        self.volume().powf(-(1.0 + self.sharpness as f64) / 2.0)
    }

    pub fn l2_norm(&self) -> f64 {
        self.amplitude() * self.volume().sqrt()
    }

    pub fn integral(&self) -> f64 {
        self.amplitude() * self.volume()
    }

    /// The probe as a lattice function supported at k = 0.
    pub fn to_test_function(&self) -> TestFunction {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(ModeIndex::zero(self.d), Complex64::new(self.fourier_at_zero, 0.0));
        TestFunction::from_lattice(LatticeFunction { d: self.d, l0: self.l, m: 1, coeffs })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion(&[1.0, 0.0, 0.0], 2.0), 1.0);
        assert_eq!(dispersion(&[0.0, 0.0, 0.0], 1.0), 0.0);
        assert!((dispersion(&[3.0, 4.0, 0.0], 1.0) - 5.0).abs() < 1e-15);
    }

    #[test]
    fn lattice_examples() {
        let one_d = build_lattice(1, 2.0 * PI, 2.5).unwrap();
        let idx: Vec<i64> = one_d.modes.iter().map(|j| j.0[0]).collect();
        assert_eq!(idx, vec![-2, -1, 0, 1, 2]);

        let only_zero = build_lattice(1, 2.0 * PI, 0.5).unwrap();
        assert_eq!(only_zero.modes, vec![ModeIndex(vec![0])]);
        assert!(build_lattice(1, 1.0, -0.1).is_err());

        let cube = build_lattice(3, 1.0, 2.0 * PI).unwrap();
        assert_eq!(cube.modes.len(), 7);
        assert!(cube.contains_zero());
        for j in &cube.modes {
            assert!(cube.contains(&j.neg()));
        }
    }

    #[test]
    fn shell_counts_match_enumeration() {
        let counts = shell_counts(3, 9);
        assert_eq!(counts[&0], 1);
        assert_eq!(counts[&1], 6);
        assert_eq!(counts[&2], 12);
        assert_eq!(counts[&3], 8);
        assert_eq!(counts.get(&7), None);
        let total: u64 = counts.values().sum();
        let lat = build_lattice(3, 2.0 * PI, 3.0).unwrap();
        assert_eq!(total as usize, lat.modes.len());
    }

    #[test]
    fn probe_examples() {
        let c = (2.0 * PI).powf(-1.5);
        assert!((probe(1, 7.3, 3).unwrap().fourier_at_zero - 0.063_493_635_934_240_97).abs() < 1e-15);
        assert!((probe(0, 1.0, 3).unwrap().fourier_at_zero - c).abs() < 1e-16);
        assert!((probe(0, 2.0, 3).unwrap().fourier_at_zero - 0.179_587_122_125_166_56).abs() < 1e-14);
        let p0 = probe(0, 3.0, 3).unwrap();
        let p1 = probe(1, 3.0, 3).unwrap();
        assert!((p0.l2_norm() - 1.0).abs() < 1e-14);
        assert!((p1.integral() - 1.0).abs() < 1e-14);
        assert!((p1.l2_norm() - 27.0f64.powf(-0.5)).abs() < 1e-15);
        // consistency of f̂(0) with the position-space integral
        assert!((p1.fourier_at_zero - c * p1.integral()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_f_hat_zero_and_inner() {
        let t = GaussianTerm { c: Complex64::new(2.0, 1.0), sigma: 0.7, center: vec![0.3, -0.2, 0.1] };
        let f = TestFunction::gaussians(3, vec![t.clone()]).unwrap();
        assert_eq!(f.f_hat_zero, t.eval(&[0.0, 0.0, 0.0]));
        // ⟨f,f⟩ = |c|² (π/(2σ))^{3/2}
        let n = f.inner(&f).unwrap();
        assert!((n.re - 5.0 * (PI / 1.4).powf(1.5)).abs() < 1e-12);
        assert!(n.im.abs() < 1e-15);
    }
}
