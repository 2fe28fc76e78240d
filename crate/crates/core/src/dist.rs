//! Bounded-support categorical random variables.
//!
//! A [`CategoricalDist`] is a probability vector over `N` equispaced atoms
//! `v_min + i * delta`. Reward-to-go, cost-to-go and whole-path cost
//! distributions all use this representation. Every operation returns a new
//! value; inputs are never mutated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance on the input mass accepted by [`CategoricalDist::new`].
pub const INPUT_MASS_TOLERANCE: f64 = 1e-6;

/// Slack used when comparing tail probabilities against `alpha`.
const TAIL_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("probability vector is empty")]
    Empty,
    #[error("negative or non-finite probability {value} at atom {index}")]
    InvalidMass { index: usize, value: f64 },
    #[error("probability vector has zero total mass")]
    ZeroMass,
    #[error("total mass {0} is not within normalization tolerance of 1")]
    NotNormalized(f64),
    #[error("atom spacing must be positive and finite, got {0}")]
    BadDelta(f64),
    #[error("v_min must be finite, got {0}")]
    BadOrigin(f64),
    #[error("atom spacings differ: {0} vs {1}")]
    DeltaMismatch(f64, f64),
    #[error("supports differ")]
    SupportMismatch,
    #[error("risk level alpha must lie in (0, 1], got {0}")]
    BadAlpha(f64),
    #[error("clamped output must have at least one atom")]
    EmptyOutput,
}

/// How [`CategoricalDist::convolve`] sizes its output support.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvolveMode {
    /// Support grows to `N1 + N2 - 1` atoms; no mass is moved.
    Exact,
    /// Output has exactly this many atoms; overflow pools in the top atom.
    Clamped(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDist", into = "RawDist")]
pub struct CategoricalDist {
    v_min: f64,
    delta: f64,
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawDist {
    v_min: f64,
    delta: f64,
    probs: Vec<f64>,
}

impl TryFrom<RawDist> for CategoricalDist {
    type Error = DistError;

    fn try_from(raw: RawDist) -> Result<Self, Self::Error> {
        CategoricalDist::new(raw.v_min, raw.delta, raw.probs)
    }
}

impl From<CategoricalDist> for RawDist {
    fn from(d: CategoricalDist) -> Self {
        RawDist {
            v_min: d.v_min,
            delta: d.delta,
            probs: d.probs,
        }
    }
}

fn check_grid(v_min: f64, delta: f64) -> Result<(), DistError> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(DistError::BadDelta(delta));
    }
    if !v_min.is_finite() {
        return Err(DistError::BadOrigin(v_min));
    }
    Ok(())
}

/// Rescales to unit mass. Vectors already within rounding of one are kept
/// bit-for-bit so serialized distributions reload unchanged.
fn normalize(mut probs: Vec<f64>) -> Vec<f64> {
    let total: f64 = probs.iter().sum();
    if total > 0.0 && (total - 1.0).abs() > 1e-12 {
        probs.iter_mut().for_each(|p| *p /= total);
    }
    probs
}

impl CategoricalDist {
    /// Builds a validated distribution. Inputs whose mass is within
    /// [`INPUT_MASS_TOLERANCE`] of one are renormalized.
    pub fn new(v_min: f64, delta: f64, probs: Vec<f64>) -> Result<Self, DistError> {
        check_grid(v_min, delta)?;
        if probs.is_empty() {
            return Err(DistError::Empty);
        }
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(DistError::InvalidMass { index, value });
        }
        let total: f64 = probs.iter().sum();
        if total == 0.0 {
            return Err(DistError::ZeroMass);
        }
        if (total - 1.0).abs() > INPUT_MASS_TOLERANCE {
            return Err(DistError::NotNormalized(total));
        }
        Ok(Self {
            v_min,
            delta,
            probs: normalize(probs),
        })
    }

    /// Builds a distribution from arbitrary nonnegative weights.
    pub fn from_weights(v_min: f64, delta: f64, weights: Vec<f64>) -> Result<Self, DistError> {
        let total: f64 = weights.iter().filter(|w| w.is_finite()).sum();
        if weights.is_empty() {
            return Err(DistError::Empty);
        }
        if total <= 0.0 {
            return Err(DistError::ZeroMass);
        }
        Self::new(v_min, delta, weights.into_iter().map(|w| w / total).collect())
    }

    /// All mass on atom `index` of an `n`-atom support.
    pub fn point_mass(v_min: f64, delta: f64, n: usize, index: usize) -> Self {
        assert!(index < n, "atom index {index} out of range for {n} atoms");
        let mut probs = vec![0.0; n];
        probs[index] = 1.0;
        Self { v_min, delta, probs }
    }

    /// Uniform mass over all `n` atoms.
    pub fn uniform(v_min: f64, delta: f64, n: usize) -> Self {
        assert!(n > 0);
        Self {
            v_min,
            delta,
            probs: vec![1.0 / n as f64; n],
        }
    }

    pub fn v_min(&self) -> f64 {
        self.v_min
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn atom(&self, i: usize) -> f64 {
        self.v_min + i as f64 * self.delta
    }

    pub fn v_max(&self) -> f64 {
        self.atom(self.len() - 1)
    }

    /// True when every atom index and spacing matches.
    pub fn same_support(&self, other: &Self) -> bool {
        self.len() == other.len()
            && (self.delta - other.delta).abs() <= 1e-12 * self.delta.max(other.delta)
            && (self.v_min - other.v_min).abs() <= 1e-12 * self.delta.max(1.0)
    }

    /// Index range `[first, last]` of atoms carrying positive mass.
    fn mass_range(&self) -> (usize, usize) {
        let first = self.probs.iter().position(|&p| p > 0.0).unwrap_or(0);
        let last = self.probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        (first, last)
    }

    /// Accumulated right shift by `i` atoms: mass at atom `j` moves to
    /// `min(j + i, N - 1)`, so overflow pools in the top atom.
    pub fn shift_clamped(&self, i: usize) -> Self {
        let n = self.len();
        let mut probs = vec![0.0; n];
        for (j, &p) in self.probs.iter().enumerate() {
            probs[(j.saturating_add(i)).min(n - 1)] += p;
        }
        Self {
            v_min: self.v_min,
            delta: self.delta,
            probs,
        }
    }

    /// Right shift by a fractional number of atoms. Each atom's mass is split
    /// linearly between the two neighbouring target atoms, then clamped to the
    /// top atom. Integral `amount` reduces to [`Self::shift_clamped`].
    pub fn shift_projected(&self, amount: f64) -> Self {
        assert!(
            amount >= 0.0 && amount.is_finite(),
            "shift must be a nonnegative finite amount"
        );
        let whole = amount.floor();
        let frac = amount - whole;
        let whole = whole as usize;
        if frac < 1e-12 {
            return self.shift_clamped(whole);
        }
        let n = self.len();
        let mut probs = vec![0.0; n];
        for (j, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let lo = (j + whole).min(n - 1);
            let hi = (j + whole + 1).min(n - 1);
            probs[lo] += p * (1.0 - frac);
            probs[hi] += p * frac;
        }
        Self {
            v_min: self.v_min,
            delta: self.delta,
            probs,
        }
    }

    /// Distribution of the sum of independent draws from `self` and `other`.
    pub fn convolve(&self, other: &Self, mode: ConvolveMode) -> Result<Self, DistError> {
        if (self.delta - other.delta).abs() > 1e-12 * self.delta.max(other.delta) {
            return Err(DistError::DeltaMismatch(self.delta, other.delta));
        }
        let n_out = match mode {
            ConvolveMode::Exact => self.len() + other.len() - 1,
            ConvolveMode::Clamped(0) => return Err(DistError::EmptyOutput),
            ConvolveMode::Clamped(n) => n,
        };
        let mut probs = vec![0.0; n_out];
        let (a0, a1) = self.mass_range();
        let (b0, b1) = other.mass_range();
        for i in a0..=a1 {
            let p = self.probs[i];
            if p == 0.0 {
                continue;
            }
            for j in b0..=b1 {
                let q = other.probs[j];
                if q == 0.0 {
                    continue;
                }
                probs[(i + j).min(n_out - 1)] += p * q;
            }
        }
        Ok(Self {
            v_min: self.v_min + other.v_min,
            delta: self.delta,
            probs: normalize(probs),
        })
    }

    /// Same values on a support resized to `n` atoms (overflow pooled on top).
    pub fn resized(&self, n: usize) -> Self {
        assert!(n > 0);
        let mut probs = vec![0.0; n];
        for (j, &p) in self.probs.iter().enumerate() {
            probs[j.min(n - 1)] += p;
        }
        Self {
            v_min: self.v_min,
            delta: self.delta,
            probs,
        }
    }

    /// Drops trailing zero-mass atoms (keeps at least one).
    pub fn trimmed(&self) -> Self {
        let (_, last) = self.mass_range();
        Self {
            v_min: self.v_min,
            delta: self.delta,
            probs: self.probs[..=last].to_vec(),
        }
    }

    pub fn expectation(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, &p)| p * self.atom(i)).sum()
    }

    /// Index of the smallest atom `k` carrying mass with `Pr(X > atom_k) <= alpha`.
    fn var_index(&self, alpha: f64) -> Result<usize, DistError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(DistError::BadAlpha(alpha));
        }
        // tail = Pr(X > atom_k), accumulated from the top to avoid 1 - cdf cancellation
        let (_, last) = self.mass_range();
        let mut index = last;
        let mut tail = 0.0;
        for k in (0..=last).rev() {
            if tail > alpha + TAIL_EPS {
                break;
            }
            if self.probs[k] > 0.0 {
                index = k;
            }
            tail += self.probs[k];
        }
        Ok(index)
    }

    /// Value at risk: the smallest atom of the support whose exceedance
    /// probability is at most `alpha`.
    pub fn var_alpha(&self, alpha: f64) -> Result<f64, DistError> {
        Ok(self.atom(self.var_index(alpha)?))
    }

    /// Conditional value at risk `E[X | X >= VaR_alpha(X)]`.
    ///
    /// At `alpha = 1` the VaR is the lowest supported atom, so this is exactly the mean.
    pub fn cvar_alpha(&self, alpha: f64) -> Result<f64, DistError> {
        let k = self.var_index(alpha)?;
        if k == self.mass_range().0 {
            return Ok(self.expectation());
        }
        let (mut mass, mut weighted) = (0.0, 0.0);
        for (i, &p) in self.probs.iter().enumerate().skip(k) {
            mass += p;
            weighted += p * self.atom(i);
        }
        Ok(weighted / mass)
    }

    /// `KL(p || q)`; `f64::INFINITY` when `q` misses mass that `p` has.
    pub fn kl_divergence(p: &Self, q: &Self) -> Result<f64, DistError> {
        if !p.same_support(q) {
            return Err(DistError::SupportMismatch);
        }
        Ok(kl_slices(&p.probs, &q.probs))
    }
}

/// `KL(p || q)` over raw probability vectors of equal length, with
/// `0 ln 0 = 0` and `f64::INFINITY` on an absolute-continuity failure.
pub fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    debug_assert_eq!(p.len(), q.len());
    let mut kl = 0.0;
    for (&pi, &qi) in p.iter().zip(q) {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return f64::INFINITY;
        }
        kl += pi * (pi / qi).ln();
    }
    kl.max(0.0)
}

/// Empirical CVaR of a sample set: mean of the worst `ceil(alpha * n)` samples.
pub fn empirical_cvar(samples: &[f64], alpha: f64) -> Option<f64> {
    if samples.is_empty() || !(alpha > 0.0 && alpha <= 1.0) {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let k = ((alpha * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
    Some(sorted[..k].iter().sum::<f64>() / k as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(probs: &[f64]) -> CategoricalDist {
        CategoricalDist::new(0.0, 1.0, probs.to_vec()).unwrap()
    }

    #[test]
    fn construction_errors() {
        assert_eq!(CategoricalDist::new(0.0, 1.0, vec![]), Err(DistError::Empty));
        assert_eq!(CategoricalDist::new(0.0, 1.0, vec![0.0, 0.0]), Err(DistError::ZeroMass));
        assert!(matches!(
            CategoricalDist::new(0.0, 1.0, vec![0.5, 0.6]),
            Err(DistError::NotNormalized(_))
        ));
        assert!(matches!(
            CategoricalDist::new(0.0, 1.0, vec![1.5, -0.5]),
            Err(DistError::InvalidMass { index: 1, .. })
        ));
        assert!(matches!(
            CategoricalDist::new(0.0, 0.0, vec![1.0]),
            Err(DistError::BadDelta(_))
        ));
        let u = d(&[1.0 / 3.0; 3]);
        assert_eq!(u.len(), 3);
        assert!((u.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn near_unit_mass_is_renormalized() {
        let x = d(&[0.5, 0.5 + 5e-7]);
        assert!((x.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn shift_matches_accumulated_right_shift() {
        let p = [0.1, 0.2, 0.05, 0.15, 0.2, 0.1, 0.2];
        let s = d(&p).shift_clamped(2);
        let expected = [0.0, 0.0, 0.1, 0.2, 0.05, 0.15, 0.2 + 0.1 + 0.2];
        for (a, b) in s.probs().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(d(&p).shift_clamped(0), d(&p));
        let small = d(&[0.2, 0.3, 0.5]).shift_clamped(1);
        assert_eq!(small.probs(), &[0.0, 0.2, 0.8]);
    }

    #[test]
    fn fractional_shift_preserves_mean_away_from_the_top() {
        let x = d(&[0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);
        let s = x.shift_projected(std::f64::consts::SQRT_2);
        assert!((s.expectation() - (x.expectation() + std::f64::consts::SQRT_2)).abs() < 1e-12);
        assert_eq!(x.shift_projected(2.0), x.shift_clamped(2));
    }

    #[test]
    fn convolution_examples() {
        let a = CategoricalDist::point_mass(0.0, 1.0, 4, 3);
        let b = CategoricalDist::point_mass(0.0, 1.0, 5, 4);
        let c = a.convolve(&b, ConvolveMode::Exact).unwrap();
        assert_eq!(c.expectation(), 7.0);
        assert_eq!(c.probs()[7], 1.0);

        let u = d(&[0.5, 0.5]);
        let uu = u.convolve(&u, ConvolveMode::Exact).unwrap();
        assert_eq!(uu.probs(), &[0.25, 0.5, 0.25]);

        let p3 = CategoricalDist::point_mass(0.0, 1.0, 4, 3);
        let p2 = CategoricalDist::point_mass(0.0, 1.0, 4, 2);
        let clamped = p3.convolve(&p2, ConvolveMode::Clamped(4)).unwrap();
        assert_eq!(clamped.probs(), &[0.0, 0.0, 0.0, 1.0]);

        let other = CategoricalDist::point_mass(0.0, 0.5, 2, 0);
        assert!(matches!(
            u.convolve(&other, ConvolveMode::Exact),
            Err(DistError::DeltaMismatch(..))
        ));
    }

    #[test]
    fn expectation_examples() {
        assert!((d(&[1.0 / 3.0; 3]).expectation() - 1.0).abs() < 1e-12);
        assert_eq!(CategoricalDist::point_mass(0.0, 1.0, 6, 5).expectation(), 5.0);
        let two = CategoricalDist::new(0.0, 10.0, vec![0.2, 0.8]).unwrap();
        assert!((two.expectation() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn var_and_cvar_examples() {
        let u = d(&[1.0 / 3.0; 3]);
        assert_eq!(u.var_alpha(1.0 / 3.0).unwrap(), 1.0);
        assert!((u.cvar_alpha(1.0 / 3.0).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(u.var_alpha(1.0).unwrap(), 0.0);
        assert_eq!(u.cvar_alpha(1.0).unwrap(), u.expectation());

        let m = CategoricalDist::point_mass(0.0, 1.0, 8, 5);
        for alpha in [0.01, 0.1, 0.5, 1.0] {
            assert_eq!(m.var_alpha(alpha).unwrap(), 5.0);
            assert_eq!(m.cvar_alpha(alpha).unwrap(), 5.0);
        }
        assert_eq!(u.cvar_alpha(0.0), Err(DistError::BadAlpha(0.0)));
        assert_eq!(u.var_alpha(1.5), Err(DistError::BadAlpha(1.5)));
    }

    #[test]
    fn kl_examples() {
        let p = d(&[0.5, 0.5]);
        assert_eq!(CategoricalDist::kl_divergence(&p, &p).unwrap(), 0.0);
        let q0 = d(&[0.0, 1.0]);
        assert_eq!(CategoricalDist::kl_divergence(&p, &q0).unwrap(), f64::INFINITY);
        let q = d(&[0.25, 0.75]);
        let kl = CategoricalDist::kl_divergence(&p, &q).unwrap();
        let expected = 0.5 * 2f64.ln() + 0.5 * (2.0f64 / 3.0).ln();
        assert!((kl - expected).abs() < 1e-12);
        assert!((kl - 0.1438).abs() < 1e-4);
        let three = d(&[0.2, 0.3, 0.5]);
        assert_eq!(
            CategoricalDist::kl_divergence(&p, &three),
            Err(DistError::SupportMismatch)
        );
    }

    #[test]
    fn empirical_cvar_takes_the_worst_tail() {
        let xs = [1.0, 5.0, 3.0, 2.0, 4.0, 0.0, 9.0, 7.0, 6.0, 8.0];
        assert_eq!(empirical_cvar(&xs, 0.1), Some(9.0));
        assert_eq!(empirical_cvar(&xs, 0.5), Some((9.0 + 8.0 + 7.0 + 6.0 + 5.0) / 5.0));
        assert_eq!(empirical_cvar(&xs, 1.0), Some(4.5));
        assert_eq!(empirical_cvar(&[], 0.5), None);
    }

    #[test]
    fn json_round_trip_validates() {
        let u = d(&[0.25, 0.5, 0.25]);
        let text = serde_json::to_string(&u).unwrap();
        assert!(text.contains("\"v_min\""));
        let back: CategoricalDist = serde_json::from_str(&text).unwrap();
        assert_eq!(back, u);
        assert!(serde_json::from_str::<CategoricalDist>(r#"{"v_min":0,"delta":1,"probs":[0.5,0.6]}"#).is_err());
    }
}
