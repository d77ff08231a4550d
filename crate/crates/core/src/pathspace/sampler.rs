//! Gaussian field sampling on a truncated mode set and the Euclidean
//! correlation identity.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{occupation, sharp_time_inner, PathMode, PathSpaceSpec};
use crate::error::{invalid, Error, Result};
use crate::model::ModeIndex;
use crate::numerics::rng::{run_sharded, McComparison, Moments};

/// One draw of the truncated field: a coefficient per representative mode.
/// Partners follow from a_{−n,−k} = conj(a_{n,k}).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSample {
    pub coeffs: Vec<Complex64>,
}

/// Test vector on the representative modes of a spec. The field pairing is
/// Φ(f) = Σ_m Re(conj(f_m) a_m), so Var Φ(f) = q(f)/2 with
/// q(f) = Σ_m C_m |f_m|² (only Re f_m counts on self-conjugate modes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeVector {
    pub coeffs: Vec<Complex64>,
}

/// Representative modes with an index for reflection and translation.
#[derive(Debug, Clone)]
pub struct ModeTable {
    pub modes: Vec<PathMode>,
    index: BTreeMap<(i64, ModeIndex), usize>,
}

impl ModeTable {
    pub fn new(spec: &PathSpaceSpec) -> Result<Self> {
        spec.validate()?;
        let modes = spec.modes();
        let index = modes.iter().enumerate().map(|(i, m)| ((m.n, m.k.clone()), i)).collect();
        Ok(Self { modes, index })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Coefficient of the full (reality-extended) vector at (n, k).
    fn full_coeff(&self, f: &ModeVector, n: i64, k: &ModeIndex) -> Complex64 {
        if let Some(&i) = self.index.get(&(n, k.clone())) {
            return f.coeffs[i];
        }
        match self.index.get(&(-n, k.neg())) {
            Some(&i) => f.coeffs[i].conj(),
            None => Complex64::new(0.0, 0.0),
        }
    }

    pub fn q(&self, f: &ModeVector) -> f64 {
        self.modes.iter().zip(&f.coeffs).map(|(m, c)| m.cov * if m.self_conjugate { c.re * c.re } else { c.norm_sqr() }).sum()
    }

    /// ⟨f, C g⟩ restricted to representatives, real part.
    pub fn covariance(&self, f: &ModeVector, g: &ModeVector) -> f64 {
        self.modes
            .iter()
            .zip(f.coeffs.iter().zip(&g.coeffs))
            .map(|(m, (a, b))| m.cov * if m.self_conjugate { a.re * b.re } else { (a.conj() * b).re })
            .sum()
    }

    /// (u_t f)(s) = f(s − t): f_{n,k} ↦ e^{−iω_n t} f_{n,k}.
    pub fn translate(&self, f: &ModeVector, t: f64) -> ModeVector {
        ModeVector { coeffs: self.modes.iter().zip(&f.coeffs).map(|(m, c)| c * Complex64::from_polar(1.0, -m.omega * t)).collect() }
    }

    /// (rf)(s) = f(−s): f_{n,k} ↦ f_{−n,k}.
    pub fn reflect(&self, f: &ModeVector) -> ModeVector {
        ModeVector { coeffs: self.modes.iter().map(|m| self.full_coeff(f, -m.n, &m.k)).collect() }
    }

    pub fn pair(&self, f: &ModeVector, a: &FieldSample) -> f64 {
        f.coeffs.iter().zip(&a.coeffs).map(|(x, y)| (x.conj() * y).re).sum()
    }

    pub fn unit(&self, i: usize) -> ModeVector {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.len()];
        coeffs[i] = Complex64::new(1.0, 0.0);
        ModeVector { coeffs }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> FieldSample {
        FieldSample {
            coeffs: self
                .modes
                .iter()
                .map(|m| {
                    let sd = (0.5 * m.cov).sqrt();
                    let xi: f64 = rng.sample(StandardNormal);
                    let eta: f64 = rng.sample(StandardNormal);
                    if m.self_conjugate {
                        Complex64::new(sd * xi, 0.0)
                    } else {
                        Complex64::new(sd * xi, sd * eta)
                    }
                })
                .collect(),
        }
    }
}

fn require_regular(spec: &PathSpaceSpec) -> Result<()> {
    let c = spec.constraints();
    if !c.all() {
        return Err(Error::Domain(format!("regularizer exponents violate the trace constraints: {c:?}")));
    }
    Ok(())
}

/// `n` independent draws, deterministic in (spec, seed).
pub fn sample_field(spec: &PathSpaceSpec, seed: u64, n: usize) -> Result<Vec<FieldSample>> {
    require_regular(spec)?;
    let table = ModeTable::new(spec)?;
    Ok(run_sharded(seed, n, |rng, count| (0..count).map(|_| table.draw(rng)).collect::<Vec<_>>()).into_iter().flatten().collect())
}

/// CSV with columns n, k-index components, re, im; every mode of the full
/// reality-extended set is listed for each sample.
pub fn samples_to_csv(spec: &PathSpaceSpec, samples: &[FieldSample]) -> Result<String> {
    let table = ModeTable::new(spec)?;
    let mut out = String::from("sample,n");
    for i in 0..spec.d {
        let _ = write!(out, ",k{i}");
    }
    out.push_str(",re,im\n");
    for (idx, s) in samples.iter().enumerate() {
        for (m, c) in table.modes.iter().zip(&s.coeffs) {
            let mut line = |n: i64, k: &ModeIndex, v: Complex64| {
                let _ = write!(out, "{idx},{n}");
                for j in &k.0 {
                    let _ = write!(out, ",{j}");
                }
                let _ = writeln!(out, ",{:.17e},{:.17e}", v.re, v.im);
            };
            line(m.n, &m.k, *c);
            if !m.self_conjugate {
                line(-m.n, &m.k.neg(), c.conj());
            }
        }
    }
    Ok(out)
}

/// Empirical moments of the sampled field against the analytic values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerReport {
    pub n_samples: usize,
    pub seed: u64,
    /// E Φ(f)² against q(f)/2
    pub variance: McComparison,
    /// E Φ(f)Φ(g) against ½⟨f, C g⟩
    pub covariance: McComparison,
    /// E cos Φ(f) against e^{−q(f)/4}
    pub char_re: McComparison,
    /// E sin Φ(f) against 0
    pub char_im: McComparison,
    /// E[cos Φ(f) − cos Φ(u_t f)] against 0
    pub translation: McComparison,
    /// E[cos Φ(f) − cos Φ(r f)] against 0
    pub reflection: McComparison,
}

impl SamplerReport {
    pub fn comparisons(&self) -> [(&'static str, &McComparison); 6] {
        [
            ("variance", &self.variance),
            ("covariance", &self.covariance),
            ("char_re", &self.char_re),
            ("char_im", &self.char_im),
            ("translation", &self.translation),
            ("reflection", &self.reflection),
        ]
    }

    pub fn passes(&self, sigmas: f64) -> bool {
        self.comparisons().iter().all(|(_, c)| c.within(sigmas))
    }
}

pub fn validate_sampler(spec: &PathSpaceSpec, f: &ModeVector, g: &ModeVector, shift: f64, seed: u64, n: usize) -> Result<SamplerReport> {
    require_regular(spec)?;
    let table = ModeTable::new(spec)?;
    if f.coeffs.len() != table.len() || g.coeffs.len() != table.len() {
        return Err(invalid("test vectors must match the mode table"));
    }
    if n < 1000 {
        return Err(invalid("sampler validation needs at least 1000 samples"));
    }
    let ft = table.translate(f, shift);
    let fr = table.reflect(f);
    let shards = run_sharded(seed, n, |rng, count| {
        let mut m = [Moments::default(); 6];
        for _ in 0..count {
            let a = table.draw(rng);
            let (pf, pg) = (table.pair(f, &a), table.pair(g, &a));
            m[0].push(pf * pf);
            m[1].push(pf * pg);
            m[2].push(pf.cos());
            m[3].push(pf.sin());
            m[4].push(pf.cos() - table.pair(&ft, &a).cos());
            m[5].push(pf.cos() - table.pair(&fr, &a).cos());
        }
        m
    });
    let mut tot = [Moments::default(); 6];
    for s in &shards {
        for k in 0..6 {
            tot[k].merge(&s[k]);
        }
    }
    let q = table.q(f);
    Ok(SamplerReport {
        n_samples: n,
        seed,
        variance: McComparison::new(&tot[0], 0.5 * q),
        covariance: McComparison::new(&tot[1], 0.5 * table.covariance(f, g)),
        char_re: McComparison::new(&tot[2], (-0.25 * q).exp()),
        char_im: McComparison::new(&tot[3], 0.0),
        translation: McComparison::new(&tot[4], 0.0),
        reflection: McComparison::new(&tot[5], 0.0),
    })
}

/// Both sides of the imaginary-time correlation identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EuclideanReport {
    /// exp(−¼ Σ_{j,l} ⟨j_{t_j} g_j, C j_{t_l} g_l⟩)
    pub gaussian_side: f64,
    /// exp(−¼ Σ_{j,l} Σ_k g_j g_l [(1 + n_k)e^{−|Δ|ε} + n_k e^{|Δ|ε}]/(2ε))
    pub thermal_side: f64,
    pub gap: f64,
}

/// Gaussian side through the sharp-time kernel; thermal side through the
/// imaginary-time ordered two-point function of a mode with Bose
/// occupation n_k = 1/(e^{βε} − 1).
pub fn euclidean_correlation(times: &[f64], g_list: &[Vec<f64>], spec: &PathSpaceSpec) -> Result<EuclideanReport> {
    if times.len() != g_list.len() || times.is_empty() {
        return Err(invalid("one coefficient vector per time is required"));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(invalid("times must be increasing"));
    }
    if times.iter().any(|&t| !(0.0..=0.5 * spec.beta).contains(&t)) {
        return Err(invalid("times must lie in [0, β/2]"));
    }
    let complex: Vec<Vec<Complex64>> = g_list.iter().map(|g| g.iter().map(|&x| Complex64::new(x, 0.0)).collect()).collect();
    let mut gauss = 0.0;
    for (tj, gj) in times.iter().zip(&complex) {
        for (tl, gl) in times.iter().zip(&complex) {
            gauss += sharp_time_inner(*tj, gj, *tl, gl, spec)?.re;
        }
    }
    let mut thermal = 0.0;
    for (idx, k) in spec.k_grid.iter().enumerate() {
        let eps = spec.energy(k);
        let weight: f64 = g_list.iter().map(|g| g[idx].abs()).sum();
        if weight == 0.0 {
            continue;
        }
        if !(eps > 0.0) {
            return Err(Error::Domain(format!("support touches ε = 0 at mode {:?}", k.0)));
        }
        let occ = occupation(spec.beta * eps);
        for (tj, gj) in times.iter().zip(g_list) {
            for (tl, gl) in times.iter().zip(g_list) {
                let d = (tj - tl).abs();
                thermal += gj[idx] * gl[idx] * ((1.0 + occ) * (-d * eps).exp() + occ * (d * eps).exp()) / (2.0 * eps);
            }
        }
    }
    let gaussian_side = (-0.25 * gauss).exp();
    let thermal_side = (-0.25 * thermal).exp();
    Ok(EuclideanReport { gaussian_side, thermal_side, gap: (gaussian_side - thermal_side).abs() })
}
