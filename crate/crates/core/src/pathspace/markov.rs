//! Single-mode paths on the circle S_β = [−β/2, β/2], the interval and
//! point projections, and the Markov identities at K = {0, β/2}.
//!
//! Paths are piecewise sums of exponentials a·e^{κs}. Matsubara modes
//! (κ = iω_n) and the sinh interpolants (κ = ±ε) both fit this form, so
//! projections stay exact and q(f) = ∫ |f'|² + ε²|f|² ds has a closed form
//! on every piece.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::numerics::special::exprel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpTerm {
    pub amp: Complex64,
    pub rate: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub lo: f64,
    pub hi: f64,
    pub terms: Vec<ExpTerm>,
}

impl Segment {
    fn eval(&self, s: f64) -> Complex64 {
        self.terms.iter().map(|t| t.amp * (t.rate * s).exp()).sum()
    }

    fn q(&self, eps: f64) -> f64 {
        let len = self.hi - self.lo;
        let mut acc = Complex64::new(0.0, 0.0);
        for a in &self.terms {
            for b in &self.terms {
                let kappa = a.rate.conj() + b.rate;
                let integral = (kappa * self.lo).exp() * len * exprel(kappa * len);
                acc += a.amp.conj() * b.amp * (a.rate.conj() * b.rate + eps * eps) * integral;
            }
        }
        acc.re
    }
}

/// Adds `c · sinh((s + shift)ε)` to a term list.
fn push_sinh(terms: &mut Vec<ExpTerm>, c: Complex64, shift: f64, eps: f64) {
    let e = Complex64::new(eps, 0.0);
    terms.push(ExpTerm { amp: 0.5 * c * (shift * eps).exp(), rate: e });
    terms.push(ExpTerm { amp: -0.5 * c * (-shift * eps).exp(), rate: -e });
}

fn merge_terms(terms: Vec<ExpTerm>) -> Vec<ExpTerm> {
    let mut out: Vec<ExpTerm> = Vec::new();
    for t in terms {
        match out.iter_mut().find(|o| o.rate == t.rate) {
            Some(o) => o.amp += t.amp,
            None => out.push(t),
        }
    }
    out.retain(|t| t.amp != Complex64::new(0.0, 0.0));
    out
}

/// A path of a single mode with energy ε on S_β.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModePath {
    pub beta: f64,
    pub eps: f64,
    pub segments: Vec<Segment>,
}

impl ModePath {
    fn check(beta: f64, eps: f64) -> Result<()> {
        if !(beta > 0.0) || !(eps > 0.0) {
            return Err(invalid("mode paths need β > 0 and ε > 0"));
        }
        Ok(())
    }

    pub fn from_terms(beta: f64, eps: f64, terms: Vec<ExpTerm>) -> Result<Self> {
        Self::check(beta, eps)?;
        Ok(Self { beta, eps, segments: vec![Segment { lo: -0.5 * beta, hi: 0.5 * beta, terms: merge_terms(terms) }] })
    }

    /// amp · e^{iω_n s}.
    pub fn matsubara(beta: f64, eps: f64, n: i64, amp: Complex64) -> Result<Self> {
        let omega = std::f64::consts::TAU * n as f64 / beta;
        Self::from_terms(beta, eps, vec![ExpTerm { amp, rate: Complex64::new(0.0, omega) }])
    }

    pub fn constant(beta: f64, eps: f64, c: Complex64) -> Result<Self> {
        Self::from_terms(beta, eps, vec![ExpTerm { amp: c, rate: Complex64::new(0.0, 0.0) }])
    }

    fn wrap(&self, s: f64) -> f64 {
        let h = 0.5 * self.beta;
        if (-h..=h).contains(&s) {
            s
        } else {
            (s + h).rem_euclid(self.beta) - h
        }
    }

    pub fn eval(&self, s: f64) -> Complex64 {
        let s = self.wrap(s);
        let seg = self.segments.iter().find(|g| s <= g.hi).unwrap_or_else(|| self.segments.last().unwrap());
        seg.eval(s)
    }

    /// Values on the periodic grid s_j = −β/2 + jβ/M, j < M.
    pub fn sample(&self, m: usize) -> Vec<Complex64> {
        grid(self.beta, m).into_iter().map(|s| self.eval(s)).collect()
    }

    /// q(f) = ∫ |f'|² + ε²|f|² ds, exact piece by piece.
    pub fn q(&self) -> f64 {
        self.segments.iter().map(|g| g.q(self.eps)).sum()
    }

    fn segment_at(&self, s: f64) -> &Segment {
        self.segments.iter().find(|g| g.lo <= s && s <= g.hi).unwrap_or_else(|| self.segments.last().unwrap())
    }

    fn combine(&self, other: &Self, sign: f64) -> Result<Self> {
        if self.beta != other.beta || self.eps != other.eps {
            return Err(invalid("paths live on different circles"));
        }
        let mut cuts: Vec<f64> = self.segments.iter().chain(&other.segments).flat_map(|g| [g.lo, g.hi]).collect();
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let mut segments = Vec::new();
        for w in cuts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            let mut terms = self.segment_at(mid).terms.clone();
            terms.extend(other.segment_at(mid).terms.iter().map(|t| ExpTerm { amp: sign * t.amp, rate: t.rate }));
            segments.push(Segment { lo: w[0], hi: w[1], terms: merge_terms(terms) });
        }
        Ok(Self { beta: self.beta, eps: self.eps, segments })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    /// (rf)(s) = f(−s).
    pub fn reflect(&self) -> Self {
        let mut segments: Vec<Segment> = self
            .segments
            .iter()
            .map(|g| Segment { lo: -g.hi, hi: -g.lo, terms: g.terms.iter().map(|t| ExpTerm { amp: t.amp, rate: -t.rate }).collect() })
            .collect();
        segments.reverse();
        Self { segments, ..*self }
    }

    /// Restriction of the pieces to [lo, hi].
    fn clip(&self, lo: f64, hi: f64) -> Vec<Segment> {
        self.segments
            .iter()
            .filter(|g| g.hi > lo && g.lo < hi)
            .map(|g| Segment { lo: g.lo.max(lo), hi: g.hi.min(hi), terms: g.terms.clone() })
            .collect()
    }
}

fn grid(beta: f64, m: usize) -> Vec<f64> {
    (0..m).map(|j| -0.5 * beta + beta * j as f64 / m as f64).collect()
}

/// e^{[t₁,t₂]}: f on [t₁, t₂] and the sinh interpolation of f(t₁), f(t₂)
/// across the complementary arc. With t₁ = t₂ this is the point
/// projection e^t.
pub fn interval_projection(path: &ModePath, t1: f64, t2: f64) -> Result<ModePath> {
    let h = 0.5 * path.beta;
    if !(-h <= t1 && t1 <= t2 && t2 <= h) {
        return Err(invalid(format!("need −β/2 ≤ t₁ ≤ t₂ ≤ β/2, got [{t1}, {t2}]")));
    }
    if t1 == -h && t2 == h {
        return Ok(path.clone());
    }
    let (beta, eps) = (path.beta, path.eps);
    let (f1, f2) = (path.eval(t1), path.eval(t2));
    let denom = ((beta + t1 - t2) * eps).sinh();
    let mut segments = Vec::new();
    if t1 > -h {
        let mut terms = Vec::new();
        push_sinh(&mut terms, f1 / denom, beta - t2, eps);
        push_sinh(&mut terms, -f2 / denom, -t1, eps);
        segments.push(Segment { lo: -h, hi: t1, terms: merge_terms(terms) });
    }
    if t2 > t1 {
        segments.extend(path.clip(t1, t2));
    }
    if t2 < h {
        let mut terms = Vec::new();
        push_sinh(&mut terms, f1 / denom, -t2, eps);
        push_sinh(&mut terms, -f2 / denom, -beta - t1, eps);
        segments.push(Segment { lo: t2, hi: h, terms: merge_terms(terms) });
    }
    Ok(ModePath { beta, eps, segments })
}

pub fn point_projection(path: &ModePath, t: f64) -> Result<ModePath> {
    interval_projection(path, t, t)
}

/// Kernel of e^t: cosh((|s − t| − β/2)ε)/cosh(βε/2).
pub fn point_kernel(s: f64, t: f64, beta: f64, eps: f64) -> f64 {
    let d = (s - t).abs().rem_euclid(beta);
    ((d - 0.5 * beta) * eps).cosh() / (0.5 * beta * eps).cosh()
}

/// Harmonic interpolation of the values at the sorted points of a finite
/// set K ⊂ S_β along each arc between neighbours.
pub fn harmonic_projection(path: &ModePath, points: &[f64]) -> Result<ModePath> {
    let h = 0.5 * path.beta;
    if points.is_empty() || points.windows(2).any(|w| !(w[1] > w[0])) || points[0] < -h || *points.last().unwrap() >= h {
        return Err(invalid("points must be sorted, distinct and in [−β/2, β/2)"));
    }
    let (beta, eps) = (path.beta, path.eps);
    let vals: Vec<Complex64> = points.iter().map(|&p| path.eval(p)).collect();
    // Arc [a, b] with end values (fa, fb), written in the variable s + shift.
    let arc = |a: f64, b: f64, fa: Complex64, fb: Complex64, lo: f64, hi: f64, shift: f64| {
        let den = ((b - a) * eps).sinh();
        let mut terms = Vec::new();
        // sinh((b − s')ε) = −sinh((s' − b)ε), s' = s + shift
        push_sinh(&mut terms, -fa / den, shift - b, eps);
        push_sinh(&mut terms, fb / den, shift - a, eps);
        Segment { lo, hi, terms: merge_terms(terms) }
    };
    let m = points.len();
    let mut segments = Vec::new();
    let (p_first, p_last) = (points[0], points[m - 1]);
    let (v_first, v_last) = (vals[0], vals[m - 1]);
    if p_first > -h {
        segments.push(arc(p_last, p_first + beta, v_last, v_first, -h, p_first, beta));
    }
    for i in 0..m - 1 {
        segments.push(arc(points[i], points[i + 1], vals[i], vals[i + 1], points[i], points[i + 1], 0.0));
    }
    segments.push(arc(p_last, p_first + beta, v_last, v_first, p_last, h, 0.0));
    Ok(ModePath { beta, eps, segments })
}

/// Interval projection on the periodic grid s_j = −β/2 + jβ/M; t₁ and t₂
/// must be grid points (t₂ = β/2 is identified with −β/2).
pub fn interval_projection_sampled(values: &[Complex64], t1: f64, t2: f64, beta: f64, eps: f64) -> Result<Vec<Complex64>> {
    let m = values.len();
    if m < 2 {
        return Err(invalid("grid too small"));
    }
    let h = 0.5 * beta;
    let index = |t: f64| -> Result<usize> {
        let x = (t + h) / beta * m as f64;
        let j = x.round();
        if (x - j).abs() > 1e-9 {
            return Err(invalid(format!("t = {t} is not a grid point")));
        }
        Ok(j as usize % m)
    };
    let (f1, f2) = (values[index(t1)?], values[index(t2)?]);
    if !(-h <= t1 && t1 <= t2 && t2 <= h) {
        return Err(invalid("need −β/2 ≤ t₁ ≤ t₂ ≤ β/2"));
    }
    let denom = ((beta + t1 - t2) * eps).sinh();
    Ok(grid(beta, m)
        .into_iter()
        .zip(values)
        .map(|(s, &v)| {
            let inside = (t1 <= s && s <= t2) || (t1 <= s + beta && s + beta <= t2);
            if inside {
                v
            } else if s < t1 {
                (((s + beta - t2) * eps).sinh() * f1 - ((s - t1) * eps).sinh() * f2) / denom
            } else {
                (((s - t2) * eps).sinh() * f1 - ((s - beta - t1) * eps).sinh() * f2) / denom
            }
        })
        .collect())
}

/// Markov identities for I = [−β/2, 0], J = [0, β/2], K = {0, β/2}.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkovReport {
    pub grid_points: usize,
    /// max over the grid of |e_J e_I f − e_K f|
    pub composition_gap: f64,
    /// |q((1−e_I)f) + q((1−e_J)e_I f) − q((1−e_K)f)|
    pub q_identity_gap: f64,
    /// Same left side against q((1−e_J)f).
    pub q_identity_gap_with_j: f64,
    /// max over the grid of |e_I e_I f − e_I f| for the sampled projection
    pub idempotency_gap: f64,
    /// max over the grid of |r e₀ f − e₀ f|
    pub reflection_gap: f64,
    pub q_f: f64,
}

impl MarkovReport {
    pub fn passes(&self, tol: f64) -> bool {
        let scale = self.q_f.max(1.0);
        self.composition_gap <= tol && self.q_identity_gap <= tol * scale && self.idempotency_gap <= tol && self.reflection_gap <= tol
    }
}

fn max_gap(a: &ModePath, b: &ModePath, m: usize) -> f64 {
    a.sample(m).iter().zip(b.sample(m)).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn markov_identity_check(path: &ModePath, grid_points: usize) -> Result<MarkovReport> {
    if grid_points < 64 || grid_points % 2 != 0 {
        return Err(Error::InvalidParameter("the time grid needs an even number of at least 64 points".into()));
    }
    let h = 0.5 * path.beta;
    let e_i = interval_projection(path, -h, 0.0)?;
    let e_j_e_i = interval_projection(&e_i, 0.0, h)?;
    let e_k = harmonic_projection(path, &[-h, 0.0])?;
    let e_j = interval_projection(path, 0.0, h)?;
    let lhs = path.sub(&e_i)?.q() + e_i.sub(&e_j_e_i)?.q();
    let rhs_k = path.sub(&e_k)?.q();
    let rhs_j = path.sub(&e_j)?.q();
    let samples = path.sample(grid_points);
    let once = interval_projection_sampled(&samples, -h, 0.0, path.beta, path.eps)?;
    let twice = interval_projection_sampled(&once, -h, 0.0, path.beta, path.eps)?;
    let idempotency_gap = once.iter().zip(&twice).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    let e0 = point_projection(path, 0.0)?;
    Ok(MarkovReport {
        grid_points,
        composition_gap: max_gap(&e_j_e_i, &e_k, grid_points),
        q_identity_gap: (lhs - rhs_k).abs(),
        q_identity_gap_with_j: (lhs - rhs_j).abs(),
        idempotency_gap,
        reflection_gap: max_gap(&e0.reflect(), &e0, grid_points),
        q_f: path.q(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mode(n: i64) -> ModePath {
        ModePath::matsubara(1.0, 1.3, n, Complex64::new(1.0, 0.0)).unwrap()
    }

    #[test]
    fn q_of_a_mode_is_exact() {
        let beta = 1.0;
        let eps = 1.3;
        let f = mode(1);
        let w = std::f64::consts::TAU;
        assert!((f.q() - beta * (w * w + eps * eps)).abs() < 1e-12);
        let c = ModePath::constant(beta, eps, Complex64::new(2.0, 0.0)).unwrap();
        assert!((c.q() - 4.0 * eps * eps).abs() < 1e-13);
    }

    #[test]
    fn interval_projection_examples() {
        let f = mode(1);
        let p = interval_projection(&f, -0.2, 0.3).unwrap();
        for s in [-0.2, -0.1, 0.0, 0.25, 0.3] {
            assert!((p.eval(s) - f.eval(s)).norm() < 1e-14);
        }
        // Continuity across the ends and across ±β/2.
        assert!((p.eval(-0.5) - p.eval(0.5)).norm() < 1e-13);
        let again = interval_projection(&p, -0.2, 0.3).unwrap();
        assert!(max_gap(&p, &again, 512) < 1e-13);
        // Zero boundary values give zero outside.
        let g = ModePath::matsubara(1.0, 1.3, 2, Complex64::new(1.0, 0.0)).unwrap().sub(&ModePath::constant(1.0, 1.3, Complex64::new(1.0, 0.0)).unwrap()).unwrap();
        let z = interval_projection(&g, -0.5, 0.0).unwrap();
        assert!(z.eval(0.25).norm() < 1e-14);
    }

    #[test]
    fn point_projection_matches_corrected_kernel() {
        let (beta, eps) = (1.0, 1.3);
        let f = mode(1);
        let t = 0.1;
        let p = point_projection(&f, t).unwrap();
        for s in [-0.5, -0.3, 0.1, 0.2, 0.45] {
            let direct = point_kernel(s, t, beta, eps) * f.eval(t);
            assert!((p.eval(s) - direct).norm() < 1e-13);
            // Exponential form with e^{βε} in place of e^{β−ε}.
            let d = (s - t).abs();
            let num = (-d * eps).exp() * ((beta * eps).exp() - 1.0) + (d * eps).exp() * (1.0 - (-beta * eps).exp());
            let den = (beta * eps).exp() - (-beta * eps).exp();
            assert!((num / den - point_kernel(s, t, beta, eps)).abs() < 1e-14);
        }
    }

    #[test]
    fn markov_identities_hold() {
        for n in [0, 1, -1, 3] {
            let rep = markov_identity_check(&mode(n), 512).unwrap();
            assert!(rep.passes(1e-10), "n = {n}: {rep:?}");
        }
        let rep = markov_identity_check(&mode(1), 512).unwrap();
        assert!(rep.q_identity_gap_with_j > 1e-3);
        let c = ModePath::constant(1.0, 1.3, Complex64::new(1.0, 0.0)).unwrap();
        let rep_c = markov_identity_check(&c, 64).unwrap();
        assert!(rep_c.passes(1e-12));
        assert!(markov_identity_check(&c, 32).is_err());
    }

    proptest! {
        #[test]
        fn projection_is_orthogonal_in_q(n in -3i64..4, re in -1.0f64..1.0, im in -1.0f64..1.0, a in -0.45f64..0.0, b in 0.05f64..0.45) {
            let f = ModePath::matsubara(1.0, 0.7, n, Complex64::new(re, im)).unwrap()
                .add(&ModePath::constant(1.0, 0.7, Complex64::new(0.3, 0.0)).unwrap()).unwrap();
            let p = interval_projection(&f, a, b).unwrap();
            let rest = f.sub(&p).unwrap();
            prop_assert!((p.q() + rest.q() - f.q()).abs() <= 1e-10 * f.q().max(1.0));
        }
    }
}
