//! Inductive logical probability primitives.
//!
//! Observations are instances of integer type indices `0..K`. An evidence
//! set is summarized by its per-type counts `n_j`; the number of distinct
//! observed types `f` and the total count `l` drive every formula here.

use crate::math::ln_gamma;
use crate::{Error, Result};

/// Per-type observation counts over a fixed universe of `K` types.
///
/// The vector is dense: index `j` holds `n_j`, and `K` is the length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvidenceCounts {
    counts: Vec<u64>,
}

impl EvidenceCounts {
    /// Wraps a dense count vector. `K` must be positive.
    pub fn new(counts: Vec<u64>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyInput("EvidenceCounts requires K >= 1"));
        }
        Ok(Self { counts })
    }

    /// An all-zero evidence set over `k` types.
    pub fn empty(k: usize) -> Result<Self> {
        Self::new(vec![0; k])
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total number of types `K`.
    pub fn k(&self) -> usize {
        self.counts.len()
    }

    /// Number of distinct observed types (`n_j > 0`).
    pub fn f(&self) -> usize {
        self.counts.iter().filter(|&&n| n > 0).count()
    }

    /// Total observation count `l`.
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Indices with positive counts, ascending.
    pub fn observed_types(&self) -> Vec<usize> {
        (0..self.counts.len())
            .filter(|&j| self.counts[j] > 0)
            .collect()
    }

    /// Adds per-type counts in place. Never decreases `f` or `l`.
    pub fn add_counts(&mut self, delta: &[u64]) -> Result<()> {
        if delta.len() != self.counts.len() {
            return Err(Error::LengthMismatch {
                left: self.counts.len(),
                right: delta.len(),
            });
        }
        for (n, d) in self.counts.iter_mut().zip(delta) {
            *n += d;
        }
        Ok(())
    }

    /// Sum of `ln n_j` over observed types; the count statistic the
    /// approximate posterior depends on.
    pub fn log_count_sum(&self) -> f64 {
        self.counts
            .iter()
            .filter(|&&n| n > 0)
            .map(|&n| (n as f64).ln())
            .sum()
    }
}

/// How the inductive generalization coefficient `alpha` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AlphaMode {
    /// A fixed non-negative coefficient.
    Fixed(f64),
    /// Derived from the evidence as its total observation count `l`.
    FromEvidence,
}

impl AlphaMode {
    /// Resolves the coefficient against a concrete evidence set.
    pub fn resolve(&self, evidence: &EvidenceCounts) -> f64 {
        match self {
            Self::Fixed(a) => *a,
            Self::FromEvidence => evidence.total() as f64,
        }
    }
}

/// Prior coefficients of the inductive posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InductiveParams {
    /// Prior coefficient `lambda`, treated as a scalar constant.
    pub lambda: f64,
    pub alpha: AlphaMode,
}

impl InductiveParams {
    pub fn new(lambda: f64, alpha: AlphaMode) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
        }
        if let AlphaMode::Fixed(a) = alpha {
            if !a.is_finite() || a < 0.0 {
                return Err(Error::Domain(format!("alpha must be >= 0, got {a}")));
            }
        }
        Ok(Self { lambda, alpha })
    }

    /// Prior coefficient for a width-`w` constituent. Constant today; this
    /// accessor is the single place a width-dependent `lambda(w)` would go.
    pub fn lambda_for_width(&self, _width: usize) -> f64 {
        self.lambda
    }
}

/// Degree of confirmation of a statement instantiating a width-`w`
/// constituent: `(l_g + lambda/w) / (l + lambda)`.
pub fn confirmation(l: u64, l_g: u64, w: u64, lambda: f64) -> Result<f64> {
    if l_g > l {
        return Err(Error::Domain(format!(
            "confirming count l_g={l_g} exceeds total l={l}"
        )));
    }
    if w < 1 {
        return Err(Error::Domain("width must be >= 1".into()));
    }
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    if l == 0 && lambda == 0.0 {
        return Err(Error::Domain(
            "degenerate denominator: l = 0 and lambda = 0".into(),
        ));
    }
    Ok((l_g as f64 + lambda / w as f64) / (l as f64 + lambda))
}

/// Semantic informativeness of evidence: `1 - confirmation`.
pub fn cont_information(l: u64, l_g: u64, w: u64, lambda: f64) -> Result<f64> {
    Ok(1.0 - confirmation(l, l_g, w, lambda)?)
}

/// `ln pi(a, x) = ln Gamma(x + a) - ln Gamma(x)`, the log of the shifted
/// factorial. Computed via log-gamma, never the raw product.
pub fn log_pochhammer(a: f64, x: f64) -> Result<f64> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::Domain(format!(
            "pochhammer base must be positive, got {x}"
        )));
    }
    if !a.is_finite() || a < 0.0 {
        return Err(Error::Domain(format!(
            "pochhammer shift must be >= 0, got {a}"
        )));
    }
    if a == 0.0 {
        return Ok(0.0);
    }
    Ok(ln_gamma(x + a) - ln_gamma(x))
}

/// Total number of attributive-constituent types expressible with the
/// given predicate and entity counts: `4^(p * e^2) / 2`.
pub fn attributive_capacity(num_predicates: u64, num_entities: u64) -> Result<u64> {
    if num_predicates < 1 || num_entities < 1 {
        return Err(Error::Domain(
            "predicate and entity counts must be >= 1".into(),
        ));
    }
    let exponent = num_predicates
        .checked_mul(num_entities)
        .and_then(|v| v.checked_mul(num_entities))
        .ok_or_else(|| Error::Overflow("predicate-entity exponent".into()))?;
    // 4^e / 2 = 2^(2e - 1)
    let bits = exponent
        .checked_mul(2)
        .and_then(|v| v.checked_sub(1))
        .ok_or_else(|| Error::Overflow("capacity exponent".into()))?;
    if bits >= 64 {
        return Err(Error::Overflow(format!(
            "4^{exponent}/2 does not fit in 64 bits"
        )));
    }
    Ok(1u64 << bits)
}
