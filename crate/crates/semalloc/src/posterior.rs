//! Width posteriors over evidence-compatible constituents.
//!
//! Evidence with `f` distinct observed types is compatible with constituent
//! widths `w` in `[f, K]`. Two posteriors over that range are provided: the
//! exact form built from log-Pochhammer ratios, and the Stirling-dominant
//! approximation whose count dependence collapses to `f` and
//! `S = sum(ln n_j)`. Both are computed entirely in log space.

use crate::inductive::{log_pochhammer, EvidenceCounts, InductiveParams};
use crate::math::{ln_binomial, ln_gamma, log_sum_exp};
use crate::{Error, Result};

/// A normalized probability vector over constituent widths `[f_min, K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WidthPosterior {
    f_min: usize,
    probs: Vec<f64>,
}

impl WidthPosterior {
    /// Builds from unnormalized log-masses indexed by `w = f_min..=K`.
    fn from_log_masses(f_min: usize, log_masses: &[f64]) -> Result<Self> {
        let norm = log_sum_exp(log_masses)?;
        if !norm.is_finite() {
            return Err(Error::Domain("width posterior has no finite mass".into()));
        }
        let probs = log_masses.iter().map(|lm| (lm - norm).exp()).collect();
        Ok(Self { f_min, probs })
    }

    /// Uniform posterior over widths `[f_min, k]`; used for the
    /// zero-evidence receiver convention.
    pub fn uniform(f_min: usize, k: usize) -> Result<Self> {
        if f_min < 1 || k < f_min {
            return Err(Error::Domain(format!("invalid width range [{f_min}, {k}]")));
        }
        let n = k - f_min + 1;
        Ok(Self {
            f_min,
            probs: vec![1.0 / n as f64; n],
        })
    }

    /// Smallest width in the support.
    pub fn f_min(&self) -> usize {
        self.f_min
    }

    /// Largest width in the support.
    pub fn k(&self) -> usize {
        self.f_min + self.probs.len() - 1
    }

    /// Probabilities indexed by `w - f_min`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of width `w` (zero outside the support).
    pub fn prob(&self, w: usize) -> f64 {
        if w < self.f_min || w > self.k() {
            0.0
        } else {
            self.probs[w - self.f_min]
        }
    }

    /// Expands both posteriors onto the union of their width ranges,
    /// zero-padding outside each support.
    fn aligned(&self, other: &Self) -> (Vec<f64>, Vec<f64>) {
        let lo = self.f_min.min(other.f_min);
        let hi = self.k().max(other.k());
        let mut a = Vec::with_capacity(hi - lo + 1);
        let mut b = Vec::with_capacity(hi - lo + 1);
        for w in lo..=hi {
            a.push(self.prob(w));
            b.push(other.prob(w));
        }
        (a, b)
    }
}

fn check_posterior_inputs(
    evidence: &EvidenceCounts,
    params: &InductiveParams,
) -> Result<(usize, usize, f64)> {
    let f = evidence.f();
    let k = evidence.k();
    if f == 0 {
        return Err(Error::Domain("no evidence: f = 0".into()));
    }
    if !params.lambda.is_finite() || params.lambda <= 0.0 {
        return Err(Error::Domain(format!(
            "posterior requires lambda > 0, got {}",
            params.lambda
        )));
    }
    let alpha = params.alpha.resolve(evidence);
    Ok((f, k, alpha))
}

/// Exact width posterior.
///
/// For each `w` in `[f, K]` the unnormalized log-mass is
/// `ln pi(alpha, w*lambda/K) + sum_j ln pi(n_j, lambda/w)` over observed
/// types, plus `ln C(K-f, w-f)` when `multiplicity` is on (one term per
/// constituent sharing that width, which makes the normalizer run over all
/// compatible constituents rather than one representative per width).
pub fn exact_posterior(
    evidence: &EvidenceCounts,
    params: &InductiveParams,
    multiplicity: bool,
) -> Result<WidthPosterior> {
    let (f, k, alpha) = check_posterior_inputs(evidence, params)?;
    let lambda = params.lambda;
    let positives: Vec<u64> = evidence
        .counts()
        .iter()
        .copied()
        .filter(|&n| n > 0)
        .collect();

    let mut log_masses = Vec::with_capacity(k - f + 1);
    for w in f..=k {
        let wf = w as f64;
        let mut lm = log_pochhammer(alpha, wf * lambda / k as f64)?;
        for &n in &positives {
            lm += log_pochhammer(n as f64, lambda / wf)?;
        }
        if multiplicity {
            lm += ln_binomial((k - f) as u64, (w - f) as u64);
        }
        log_masses.push(lm);
    }
    WidthPosterior::from_log_masses(f, &log_masses)
}

/// Count statistics the approximate posterior actually depends on.
#[derive(Debug, Clone, Copy)]
pub struct StirlingStats {
    /// Number of positive-count types.
    pub f: usize,
    /// Sum of `ln n_j` over positive counts (real-valued counts allowed).
    pub log_count_sum: f64,
}

impl StirlingStats {
    pub fn from_evidence(evidence: &EvidenceCounts) -> Self {
        Self {
            f: evidence.f(),
            log_count_sum: evidence.log_count_sum(),
        }
    }

    /// From a real-valued count vector; zero entries are excluded exactly
    /// as integer zeros are.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        let mut f = 0usize;
        let mut s = 0.0;
        for &v in values {
            if v < 0.0 {
                return Err(Error::Domain(format!("negative count {v}")));
            }
            if v > 0.0 {
                f += 1;
                s += v.ln();
            }
        }
        Ok(Self {
            f,
            log_count_sum: s,
        })
    }
}

/// Stirling-approximated width posterior.
///
/// The mass at width `w` is proportional to `1 / D(w)` (times
/// `C(K-f, w-f)` under `multiplicity`), where
///
/// ```text
/// D(w) = sum_{i=0}^{K-f} exp( ln C(K-f, i)
///                           + ln G(w l/K) - ln G((f+i) l/K)
///                           + ((f+i-w) l/K) ln alpha
///                           + f [ln G(l/w) - ln G(l/(f+i))]
///                           + beta_i(w) S )
/// ```
///
/// with `beta_i(w) = (1/(f+i) - 1/w) l` and `S = sum ln n_j`. Every term
/// splits into a `w`-only part `A(w)` and an `i`-only part `G_i`, so
/// `ln D(w) = A(w) + ln sum exp(G_i)`: one log-sum-exp over `i` shared by
/// all widths. A test pins this against the literal double loop.
pub fn stirling_posterior(
    evidence: &EvidenceCounts,
    params: &InductiveParams,
    multiplicity: bool,
) -> Result<WidthPosterior> {
    let (_, k, alpha) = check_posterior_inputs(evidence, params)?;
    let stats = StirlingStats::from_evidence(evidence);
    stirling_posterior_from_stats(&stats, k, params.lambda, alpha, multiplicity)
}

/// Stirling posterior from pre-extracted count statistics. This is the
/// entry point the allocation objective uses for real-valued allocations.
pub fn stirling_posterior_from_stats(
    stats: &StirlingStats,
    k: usize,
    lambda: f64,
    alpha: f64,
    multiplicity: bool,
) -> Result<WidthPosterior> {
    let f = stats.f;
    if f == 0 {
        return Err(Error::Domain("no evidence: f = 0".into()));
    }
    if k < f {
        return Err(Error::Domain(format!("K={k} smaller than f={f}")));
    }
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::Domain(format!(
            "posterior requires lambda > 0, got {lambda}"
        )));
    }
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::Domain(format!("alpha must be >= 0, got {alpha}")));
    }
    if alpha == 0.0 && k > f {
        // Every i != w - f carries a nonzero exponent on alpha.
        return Err(Error::Domain(
            "alpha = 0 with a nonzero exponent in the width sum".into(),
        ));
    }

    let s = stats.log_count_sum;
    let kf = k as f64;
    let ff = f as f64;
    let ln_alpha = if k > f { alpha.ln() } else { 0.0 };

    // i-only part of each D(w) term; shared by every width.
    let g: Vec<f64> = (0..=(k - f))
        .map(|i| {
            let fi = (f + i) as f64;
            ln_binomial((k - f) as u64, i as u64) - ln_gamma(fi * lambda / kf)
                + (fi * lambda / kf) * ln_alpha
                - ff * ln_gamma(lambda / fi)
                + lambda * s / fi
        })
        .collect();
    let lse_g = log_sum_exp(&g)?;

    let mut log_masses = Vec::with_capacity(k - f + 1);
    for w in f..=k {
        let wf = w as f64;
        // w-only part of each D(w) term.
        let a = ln_gamma(wf * lambda / kf) - (wf * lambda / kf) * ln_alpha
            + ff * ln_gamma(lambda / wf)
            - lambda * s / wf;
        let ln_d = a + lse_g;
        let mut lm = -ln_d;
        if multiplicity {
            lm += ln_binomial((k - f) as u64, (w - f) as u64);
        }
        log_masses.push(lm);
    }
    WidthPosterior::from_log_masses(f, &log_masses)
}

fn cosine_distance_slices(a: &[f64], b: &[f64]) -> Result<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Domain("cosine distance of a zero vector".into()));
    }
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 1.0))
}

/// `1 - cos(p, q)` with supports aligned on the width index over the union
/// of supports, zero-padded.
pub fn cosine_distance(p: &WidthPosterior, q: &WidthPosterior) -> Result<f64> {
    let (a, b) = p.aligned(q);
    cosine_distance_slices(&a, &b)
}

/// Cosine distance between two raw non-negative vectors of equal length.
pub fn cosine_distance_vectors(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    cosine_distance_slices(a, b)
}

/// `KL(p || q)` in nats over aligned supports. Returns `+inf` when `p` has
/// mass where `q` has none; that value is the absolute-continuity flag.
pub fn kl_divergence(p: &WidthPosterior, q: &WidthPosterior) -> f64 {
    let (a, b) = p.aligned(q);
    let mut acc = 0.0;
    for (pi, qi) in a.iter().zip(&b) {
        if *pi > 0.0 {
            if *qi <= 0.0 {
                return f64::INFINITY;
            }
            acc += pi * (pi / qi).ln();
        }
    }
    acc.max(0.0)
}

pub use crate::math::log_sum_exp as logsumexp;
