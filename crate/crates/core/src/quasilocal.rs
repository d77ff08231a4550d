//! Projective system of finite-volume path spaces: zero-padding embeddings
//! between commensurate boxes, restriction projections, and consistency of
//! covariances, characteristic functionals and marginals along a chain.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{build_lattice_scaled, LatticeModes, ModeIndex};
use crate::numerics::rng::{run_sharded, McComparison, Moments};

/// Box of side L_from embedded in the box of side L_to = m · L_from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingStep {
    pub l_from: f64,
    pub l_to: f64,
    pub m: u64,
}

/// A Matsubara frequency index paired with a box momentum index.
pub type PathKey = (i64, ModeIndex);

/// Coefficients of a path-space test vector at one level of a chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelVector {
    pub level: usize,
    pub coeffs: BTreeMap<PathKey, Complex64>,
}

impl LevelVector {
    pub fn pairing(&self, other: &Self) -> Complex64 {
        self.coeffs.iter().filter_map(|(k, a)| other.coeffs.get(k).map(|b| a.conj() * b)).sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }
}

/// Levels L_n = L₀ · m₁ ⋯ m_n sharing β, s, the Matsubara cutoff and the
/// momentum cutoff |k| ≤ k_max.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectiveChain {
    pub beta: f64,
    pub s: f64,
    pub d: u32,
    pub l0: f64,
    pub n_mats: u32,
    pub k_max: f64,
    pub multipliers: Vec<u64>,
    #[serde(skip)]
    lattices: Vec<LatticeModes>,
}

impl ProjectiveChain {
    pub fn new(beta: f64, s: f64, d: u32, l0: f64, n_mats: u32, k_max: f64, multipliers: Vec<u64>) -> Result<Self> {
        if !(beta > 0.0) || !(s > 0.0) || n_mats < 1 {
            return Err(invalid("need β > 0, s > 0 and at least one Matsubara frequency"));
        }
        if multipliers.is_empty() || multipliers.iter().any(|&m| m == 0) {
            return Err(invalid("a chain needs at least one step with integer multipliers m ≥ 1"));
        }
        let mut lattices = Vec::with_capacity(multipliers.len() + 1);
        let mut cum = 1u64;
        lattices.push(build_lattice_scaled(d, l0, cum, k_max)?);
        for &m in &multipliers {
            cum = cum.checked_mul(m).ok_or_else(|| invalid("box multiplier overflow"))?;
            lattices.push(build_lattice_scaled(d, l0, cum, k_max)?);
        }
        Ok(Self { beta, s, d, l0, n_mats, k_max, multipliers, lattices })
    }

    /// Parses "L0,m1,m2,…".
    pub fn from_spec(beta: f64, s: f64, d: u32, n_mats: u32, k_max: f64, chain: &str) -> Result<Self> {
        let parts: Vec<&str> = chain.split(',').map(str::trim).collect();
        if parts.len() < 2 {
            return Err(invalid("chain needs L0 and at least one multiplier"));
        }
        let l0: f64 = parts[0].parse().map_err(|_| invalid(format!("bad L0 '{}'", parts[0])))?;
        let ms = parts[1..].iter().map(|p| p.parse::<u64>().map_err(|_| invalid(format!("bad multiplier '{p}'")))).collect::<Result<Vec<_>>>()?;
        Self::new(beta, s, d, l0, n_mats, k_max, ms)
    }

    pub fn levels(&self) -> usize {
        self.lattices.len()
    }

    pub fn lattice(&self, level: usize) -> &LatticeModes {
        &self.lattices[level]
    }

    pub fn side(&self, level: usize) -> f64 {
        self.lattices[level].side()
    }

    pub fn steps(&self) -> Vec<EmbeddingStep> {
        (0..self.multipliers.len()).map(|i| EmbeddingStep { l_from: self.side(i), l_to: self.side(i + 1), m: self.multipliers[i] }).collect()
    }

    pub fn omega(&self, n: i64) -> f64 {
        TAU * n as f64 / self.beta
    }

    /// C(ω_n, k_j) = 1/(ω_n² + |k_j|^{2s}); infinite on the singular mode.
    pub fn covariance(&self, level: usize, key: &PathKey) -> f64 {
        let w = self.omega(key.0);
        let eps = self.lattices[level].energy(&key.1, self.s);
        1.0 / (w * w + eps * eps)
    }

    /// Representatives of {(n, j), (−n, −j)} at a level, singular mode excluded.
    pub fn representatives(&self, level: usize) -> Vec<PathKey> {
        let nm = self.n_mats as i64;
        let mut out = Vec::new();
        for n in -nm..=nm {
            for j in &self.lattices[level].modes {
                if n == 0 && j.is_zero() {
                    continue;
                }
                let key = (n, j.clone());
                if key <= (-n, j.neg()) {
                    out.push(key);
                }
            }
        }
        out
    }

    fn check_key(&self, level: usize, key: &PathKey) -> Result<()> {
        if key.0.unsigned_abs() > self.n_mats as u64 || !self.lattices[level].contains(&key.1) {
            return Err(Error::ModeOutside(key.1 .0.clone()));
        }
        Ok(())
    }

    /// q_{C,L}(f) = Σ C(ω, k)|f|².
    pub fn q(&self, f: &LevelVector) -> Result<f64> {
        let mut acc = 0.0;
        for (key, c) in &f.coeffs {
            if key.0 == 0 && key.1.is_zero() {
                return Err(Error::Domain("the singular mode (0, 0) is carried by the χ fiber".into()));
            }
            acc += self.covariance(f.level, key) * c.norm_sqr();
        }
        Ok(acc)
    }

    /// ι: copy onto the scaled indices j ↦ m j of the next level.
    pub fn embed(&self, f: &LevelVector) -> Result<LevelVector> {
        let level = f.level;
        if level + 1 >= self.levels() {
            return Err(invalid(format!("level {level} has no successor")));
        }
        let m = self.multipliers[level] as i64;
        let mut coeffs = BTreeMap::new();
        for (key, c) in &f.coeffs {
            self.check_key(level, key)?;
            coeffs.insert((key.0, key.1.scaled(m)), *c);
        }
        Ok(LevelVector { level: level + 1, coeffs })
    }

    /// π: keep the modes shared with the previous level.
    pub fn project(&self, g: &LevelVector) -> Result<LevelVector> {
        let level = g.level;
        if level == 0 || level >= self.levels() {
            return Err(invalid(format!("level {level} has no predecessor")));
        }
        let m = self.multipliers[level - 1] as i64;
        let coeffs = g
            .coeffs
            .iter()
            .filter(|(k, _)| k.1 .0.iter().all(|x| x % m == 0))
            .map(|(k, c)| ((k.0, ModeIndex(k.1 .0.iter().map(|x| x / m).collect())), *c))
            .collect();
        Ok(LevelVector { level: level - 1, coeffs })
    }

    /// u_t: f_{n,j} ↦ e^{−iω_n t} f_{n,j}.
    pub fn translate(&self, f: &LevelVector, t: f64) -> LevelVector {
        LevelVector { level: f.level, coeffs: f.coeffs.iter().map(|(k, c)| (k.clone(), c * Complex64::from_polar(1.0, -self.omega(k.0) * t))).collect() }
    }

    /// r: f_{n,j} ↦ f_{−n,j} (as a map on all keys).
    pub fn reflect(&self, f: &LevelVector) -> LevelVector {
        LevelVector { level: f.level, coeffs: f.coeffs.iter().map(|(k, c)| ((-k.0, k.1.clone()), *c)).collect() }
    }

    /// Random test vector on `n_modes` representatives of a level.
    pub fn random_vector(&self, level: usize, n_modes: usize, seed: u64) -> LevelVector {
        let reps = self.representatives(level);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = BTreeMap::new();
        while coeffs.len() < n_modes.min(reps.len()) {
            let key = reps[rng.gen_range(0..reps.len())].clone();
            // Multiples of 1/8 keep sums and products exact.
            let re = rng.gen_range(-8i32..=8) as f64 / 8.0;
            let im = rng.gen_range(-8i32..=8) as f64 / 8.0;
            coeffs.insert(key, Complex64::new(re, im));
        }
        LevelVector { level, coeffs }
    }

    /// Reduces `g` down to `level` through successive projections.
    pub fn project_to(&self, g: &LevelVector, level: usize) -> Result<LevelVector> {
        let mut cur = g.clone();
        while cur.level > level {
            cur = self.project(&cur)?;
        }
        Ok(cur)
    }

    pub fn embed_to(&self, f: &LevelVector, level: usize) -> Result<LevelVector> {
        let mut cur = f.clone();
        while cur.level < level {
            cur = self.embed(&cur)?;
        }
        Ok(cur)
    }
}

fn vec_gap(a: &LevelVector, b: &LevelVector) -> (f64, Option<PathKey>) {
    let mut worst = (0.0, None);
    let keys: std::collections::BTreeSet<&PathKey> = a.coeffs.keys().chain(b.coeffs.keys()).collect();
    let zero = Complex64::new(0.0, 0.0);
    for k in keys {
        let g = (a.coeffs.get(k).unwrap_or(&zero) - b.coeffs.get(k).unwrap_or(&zero)).norm();
        if g > worst.0 {
            worst = (g, Some(k.clone()));
        }
    }
    worst
}

/// Worst gaps of the algebraic checks for one embedding step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub step: EmbeddingStep,
    /// |‖ιf‖² − ‖f‖²|
    pub norm_gap: f64,
    /// |⟨ιf, g⟩ − ⟨f, πg⟩|
    pub adjoint_gap: f64,
    /// ‖πιf − f‖∞
    pub retraction_gap: f64,
    /// ‖ιπ(ιπg) − ιπg‖∞
    pub idempotency_gap: f64,
    /// |q_{L_to}(ιf) − q_{L_from}(f)|
    pub intertwining_gap: f64,
    /// |exp(−¼q_{L_to}(ιf)) − exp(−¼q_{L_from}(f))|
    pub char_fn_gap: f64,
    /// ‖u_t ι f − ι u_t f‖∞ and ‖r ι f − ι r f‖∞
    pub translation_gap: f64,
    pub reflection_gap: f64,
    /// ‖π π g − π_{two steps} g‖∞ when a following step exists
    pub composition_gap: Option<f64>,
    pub offending_mode: Option<PathKey>,
}

impl StepReport {
    pub fn max_gap(&self) -> f64 {
        [
            self.norm_gap,
            self.adjoint_gap,
            self.retraction_gap,
            self.idempotency_gap,
            self.intertwining_gap,
            self.char_fn_gap,
            self.translation_gap,
            self.reflection_gap,
            self.composition_gap.unwrap_or(0.0),
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyReport {
    pub levels: usize,
    pub steps: Vec<StepReport>,
    pub max_gap: f64,
}

impl ConsistencyReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_gap <= tol
    }
}

/// Algebraic consistency along the chain. `f_grid` holds level-0 test
/// vectors; level-n vectors are their embeddings, and the `g` partners are
/// random vectors drawn at each upper level from `seed`.
pub fn consistency_check(chain: &ProjectiveChain, f_grid: &[LevelVector], seed: u64) -> Result<ConsistencyReport> {
    if chain.levels() < 2 {
        return Err(invalid("a chain needs at least two levels"));
    }
    if f_grid.iter().any(|f| f.level != 0) {
        return Err(invalid("test vectors must live at the lowest level"));
    }
    let steps = chain.steps();
    let reports = steps
        .par_iter()
        .enumerate()
        .map(|(lvl, step)| -> Result<StepReport> {
            let mut rep = StepReport {
                step: *step,
                norm_gap: 0.0,
                adjoint_gap: 0.0,
                retraction_gap: 0.0,
                idempotency_gap: 0.0,
                intertwining_gap: 0.0,
                char_fn_gap: 0.0,
                translation_gap: 0.0,
                reflection_gap: 0.0,
                composition_gap: None,
                offending_mode: None,
            };
            let n_g = (chain.representatives(lvl + 1).len() / 3).clamp(1, 64);
            for (idx, f0) in f_grid.iter().enumerate() {
                let f = chain.embed_to(f0, lvl)?;
                let g = chain.random_vector(lvl + 1, n_g, seed.wrapping_add((lvl * 1000 + idx) as u64));
                let ef = chain.embed(&f)?;
                rep.norm_gap = rep.norm_gap.max((ef.norm_sq() - f.norm_sq()).abs());
                rep.adjoint_gap = rep.adjoint_gap.max((ef.pairing(&g) - f.pairing(&chain.project(&g)?)).norm());
                let (gap, key) = vec_gap(&chain.project(&ef)?, &f);
                if gap > rep.retraction_gap {
                    rep.retraction_gap = gap;
                    rep.offending_mode = key;
                }
                let p = chain.embed(&chain.project(&g)?)?;
                let pp = chain.embed(&chain.project(&p)?)?;
                rep.idempotency_gap = rep.idempotency_gap.max(vec_gap(&pp, &p).0);
                let (q_hi, q_lo) = (chain.q(&ef)?, chain.q(&f)?);
                rep.intertwining_gap = rep.intertwining_gap.max((q_hi - q_lo).abs());
                rep.char_fn_gap = rep.char_fn_gap.max(((-0.25 * q_hi).exp() - (-0.25 * q_lo).exp()).abs());
                let t = 0.37 * chain.beta;
                rep.translation_gap = rep.translation_gap.max(vec_gap(&chain.translate(&ef, t), &chain.embed(&chain.translate(&f, t))?).0);
                rep.reflection_gap = rep.reflection_gap.max(vec_gap(&chain.reflect(&ef), &chain.embed(&chain.reflect(&f))?).0);
                if lvl + 2 < chain.levels() {
                    let h = chain.random_vector(lvl + 2, n_g, seed.wrapping_add((lvl * 1000 + idx + 500) as u64));
                    let two = chain.project(&chain.project(&h)?)?;
                    let m = (chain.multipliers[lvl] * chain.multipliers[lvl + 1]) as i64;
                    let direct = LevelVector {
                        level: lvl,
                        coeffs: h
                            .coeffs
                            .iter()
                            .filter(|(k, _)| k.1 .0.iter().all(|x| x % m == 0))
                            .map(|(k, c)| ((k.0, ModeIndex(k.1 .0.iter().map(|x| x / m).collect())), *c))
                            .collect(),
                    };
                    let gap = vec_gap(&two, &direct).0;
                    rep.composition_gap = Some(rep.composition_gap.unwrap_or(0.0).max(gap));
                }
            }
            Ok(rep)
        })
        .collect::<Result<Vec<_>>>()?;
    let max_gap = reports.iter().map(StepReport::max_gap).fold(0.0, f64::max);
    Ok(ConsistencyReport { levels: chain.levels(), steps: reports, max_gap })
}

/// Empirical check that the level-(n+1) Gaussian pushed through π has the
/// level-n characteristic functional at `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushforwardReport {
    pub level: usize,
    pub n_samples: usize,
    pub seed: u64,
    pub char_re: McComparison,
    pub char_im: McComparison,
}

impl PushforwardReport {
    pub fn passes(&self, sigmas: f64) -> bool {
        self.char_re.within(sigmas) && self.char_im.within(sigmas)
    }
}

/// Draws every representative mode at level n+1 with a = √(C/2)(ξ + iη),
/// projects to level n, and averages e^{iΦ(f)} with
/// Φ(f) = Σ Re(conj f a) against exp(−¼ q_{C,L_n}(f)).
pub fn pushforward_check(chain: &ProjectiveChain, f: &LevelVector, seed: u64, n_samples: usize) -> Result<PushforwardReport> {
    let level = f.level;
    if level + 1 >= chain.levels() {
        return Err(invalid("pushforward needs a higher level"));
    }
    let reps = chain.representatives(level + 1);
    let covs: Vec<f64> = reps.iter().map(|k| chain.covariance(level + 1, k)).collect();
    let self_conj: Vec<bool> = reps.iter().map(|k| *k == (-k.0, k.1.neg())).collect();
    for k in f.coeffs.keys() {
        if *k > (-k.0, k.1.neg()) {
            return Err(invalid("test vector must be supported on representatives"));
        }
    }
    let q = chain.q(f)?;
    let shards = run_sharded(seed, n_samples, |rng, count| {
        let (mut re, mut im) = (Moments::default(), Moments::default());
        for _ in 0..count {
            let field = LevelVector {
                level: level + 1,
                coeffs: reps
                    .iter()
                    .zip(covs.iter().zip(&self_conj))
                    .map(|(k, (c, sc))| {
                        let sd = (0.5 * c).sqrt();
                        let xi: f64 = rng.sample(StandardNormal);
                        let eta: f64 = rng.sample(StandardNormal);
                        (k.clone(), if *sc { Complex64::new(sd * xi, 0.0) } else { Complex64::new(sd * xi, sd * eta) })
                    })
                    .collect(),
            };
            let low = chain.project(&field).expect("level checked above");
            let phi: f64 = f.coeffs.iter().map(|(k, c)| low.coeffs.get(k).map_or(0.0, |a| (c.conj() * a).re)).sum();
            re.push(phi.cos());
            im.push(phi.sin());
        }
        (re, im)
    });
    let (mut re, mut im) = (Moments::default(), Moments::default());
    for (a, b) in &shards {
        re.merge(a);
        im.merge(b);
    }
    Ok(PushforwardReport { level, n_samples, seed, char_re: McComparison::new(&re, (-0.25 * q).exp()), char_im: McComparison::new(&im, 0.0) })
}

/// Covariance matrices ½Re⟨ι f_a, C ι f_b⟩ of a cylinder family at every
/// level of the chain, and their largest deviation from level 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalsReport {
    pub matrices: Vec<Vec<Vec<f64>>>,
    pub max_gap: f64,
}

pub fn projective_marginals(chain: &ProjectiveChain, cylinder: &[LevelVector]) -> Result<MarginalsReport> {
    if cylinder.iter().any(|f| f.level != 0) {
        return Err(invalid("cylinder functions must live at the lowest level"));
    }
    let mut matrices = Vec::with_capacity(chain.levels());
    for level in 0..chain.levels() {
        let lifted = cylinder.iter().map(|f| chain.embed_to(f, level)).collect::<Result<Vec<_>>>()?;
        let mut m = vec![vec![0.0; lifted.len()]; lifted.len()];
        for (a, fa) in lifted.iter().enumerate() {
            for (b, fb) in lifted.iter().enumerate() {
                let mut acc = 0.0;
                for (k, ca) in &fa.coeffs {
                    if let Some(cb) = fb.coeffs.get(k) {
                        acc += chain.covariance(level, k) * (ca.conj() * cb).re;
                    }
                }
                m[a][b] = 0.5 * acc;
            }
        }
        matrices.push(m);
    }
    let max_gap = matrices
        .iter()
        .flat_map(|m| m.iter().zip(&matrices[0]).flat_map(|(r, r0)| r.iter().zip(r0).map(|(x, y)| (x - y).abs())))
        .fold(0.0, f64::max);
    Ok(MarginalsReport { matrices, max_gap })
}
