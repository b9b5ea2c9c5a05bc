//! Receiver state and m-ary MAP hypothesis selection.

use crate::allocation::Allocation;
use crate::inductive::{EvidenceCounts, InductiveParams};
use crate::posterior::{stirling_posterior, WidthPosterior};
use crate::{Error, Result};

/// A candidate world model: a categorical distribution over the `K`
/// attributive types.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub id: usize,
    dist: Vec<f64>,
}

impl Hypothesis {
    pub fn new(id: usize, dist: Vec<f64>) -> Result<Self> {
        if dist.is_empty() {
            return Err(Error::EmptyInput("hypothesis distribution"));
        }
        if dist.iter().any(|&p| !p.is_finite() || p < 0.0) {
            return Err(Error::Domain("hypothesis has invalid entries".into()));
        }
        let sum: f64 = dist.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "hypothesis distribution sums to {sum}"
            )));
        }
        Ok(Self { id, dist })
    }

    pub fn dist(&self) -> &[f64] {
        &self.dist
    }
}

/// Accumulated receiver evidence with a lazily refreshed width posterior.
#[derive(Debug, Clone)]
pub struct ReceiverState {
    received: EvidenceCounts,
    history: Vec<Allocation>,
    posterior: Option<WidthPosterior>,
}

impl ReceiverState {
    /// A fresh receiver over `k` types with no evidence.
    pub fn new(k: usize) -> Result<Self> {
        Ok(Self {
            received: EvidenceCounts::empty(k)?,
            history: Vec::new(),
            posterior: None,
        })
    }

    pub fn received(&self) -> &EvidenceCounts {
        &self.received
    }

    pub fn history(&self) -> &[Allocation] {
        &self.history
    }

    /// Ingests a message (dense over the `K` types) over the error-free
    /// channel: counts accumulate and the cached posterior goes stale.
    pub fn ingest(&mut self, msg: &Allocation) -> Result<()> {
        self.received.add_counts(msg.counts())?;
        self.history.push(msg.clone());
        self.posterior = None;
        Ok(())
    }

    /// The width posterior of the received evidence, recomputed only when
    /// stale. A receiver with no evidence has no posterior.
    pub fn posterior(
        &mut self,
        params: &InductiveParams,
        multiplicity: bool,
    ) -> Result<&WidthPosterior> {
        if self.posterior.is_none() {
            self.posterior = Some(stirling_posterior(&self.received, params, multiplicity)?);
        }
        Ok(self.posterior.as_ref().expect("just computed"))
    }
}

/// Multinomial log-scores with a uniform hypothesis prior.
///
/// `score_i = sum_j n_j ln dist_i(j) + ln(1/H)`; a hypothesis with zero
/// mass on an observed type scores `-inf`.
pub fn score_hypotheses(received: &EvidenceCounts, hypotheses: &[Hypothesis]) -> Result<Vec<f64>> {
    score_hypotheses_smoothed(received, hypotheses, 0.0)
}

/// As [`score_hypotheses`], with optional additive smoothing `epsilon`
/// applied to every hypothesis entry before taking logs (`0.0` disables
/// it and keeps `-inf` meaningful).
pub fn score_hypotheses_smoothed(
    received: &EvidenceCounts,
    hypotheses: &[Hypothesis],
    epsilon: f64,
) -> Result<Vec<f64>> {
    if hypotheses.is_empty() {
        return Err(Error::EmptyInput("hypothesis set"));
    }
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::Domain(format!("negative smoothing {epsilon}")));
    }
    let log_prior = -(hypotheses.len() as f64).ln();
    let mut scores = Vec::with_capacity(hypotheses.len());
    for hyp in hypotheses {
        if hyp.dist.len() != received.k() {
            return Err(Error::LengthMismatch {
                left: hyp.dist.len(),
                right: received.k(),
            });
        }
        let mut score = log_prior;
        for (&n, &p) in received.counts().iter().zip(&hyp.dist) {
            if n == 0 {
                continue;
            }
            let p = p + epsilon;
            if p <= 0.0 {
                score = f64::NEG_INFINITY;
                break;
            }
            score += n as f64 * p.ln();
        }
        scores.push(score);
    }
    Ok(scores)
}

/// Argmax over log-scores; ties resolve to the lowest index. Errors when
/// every hypothesis is inconsistent (all scores `-inf`).
pub fn map_select(scores: &[f64]) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::EmptyInput("score vector"));
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, &s) in scores.iter().enumerate() {
        if s == f64::NEG_INFINITY {
            continue;
        }
        let better = match best {
            None => true,
            Some((_, b)) => s > b,
        };
        if better {
            best = Some((i, s));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoConsistentHypothesis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn alloc(counts: Vec<u64>) -> Allocation {
        let b = counts.iter().sum();
        Allocation::new(counts, b).unwrap()
    }

    #[test]
    fn ingest_accumulates() {
        let mut state = ReceiverState::new(3).unwrap();
        state.ingest(&alloc(vec![2, 0, 3])).unwrap();
        assert_eq!(state.received().counts(), &[2, 0, 3]);
        assert_eq!(state.received().f(), 2);
        assert_eq!(state.received().total(), 5);

        state.ingest(&alloc(vec![1, 1, 0])).unwrap();
        state.ingest(&alloc(vec![1, 1, 0])).unwrap();
        assert_eq!(state.received().counts(), &[4, 2, 3]);
        assert_eq!(state.history().len(), 3);
    }

    #[test]
    fn ingest_order_does_not_matter() {
        let msgs = [
            alloc(vec![1, 0, 2]),
            alloc(vec![0, 3, 0]),
            alloc(vec![2, 1, 1]),
        ];
        let mut fwd = ReceiverState::new(3).unwrap();
        for m in &msgs {
            fwd.ingest(m).unwrap();
        }
        let mut rev = ReceiverState::new(3).unwrap();
        for m in msgs.iter().rev() {
            rev.ingest(m).unwrap();
        }
        assert_eq!(fwd.received(), rev.received());
    }

    #[test]
    fn posterior_refreshes_after_ingest() {
        let params = InductiveParams::new(1.0, crate::inductive::AlphaMode::FromEvidence).unwrap();
        let mut state = ReceiverState::new(5).unwrap();
        state.ingest(&alloc(vec![2, 1, 0, 0, 0])).unwrap();
        let before = state.posterior(&params, true).unwrap().clone();
        state.ingest(&alloc(vec![0, 0, 4, 0, 0])).unwrap();
        let after = state.posterior(&params, true).unwrap().clone();
        assert_ne!(before.f_min(), after.f_min());
    }

    #[test]
    fn scores_equal_without_evidence() {
        let received = EvidenceCounts::empty(2).unwrap();
        let hyps = vec![
            Hypothesis::new(0, vec![0.9, 0.1]).unwrap(),
            Hypothesis::new(1, vec![0.1, 0.9]).unwrap(),
        ];
        let scores = score_hypotheses(&received, &hyps).unwrap();
        assert_eq!(scores[0], scores[1]);
    }

    #[test]
    fn likelihood_separates_hypotheses() {
        let received = EvidenceCounts::new(vec![3, 0]).unwrap();
        let hyps = vec![
            Hypothesis::new(0, vec![0.9, 0.1]).unwrap(),
            Hypothesis::new(1, vec![0.1, 0.9]).unwrap(),
        ];
        let scores = score_hypotheses(&received, &hyps).unwrap();
        assert!(scores[0] > scores[1]);
        assert!((scores[0] - scores[1] - 3.0 * (0.9f64 / 0.1).ln()).abs() < 1e-12);
    }

    #[test]
    fn duplicate_hypotheses_score_identically() {
        let received = EvidenceCounts::new(vec![2, 5]).unwrap();
        let h = Hypothesis::new(0, vec![0.4, 0.6]).unwrap();
        let hyps = vec![h.clone(), Hypothesis::new(1, h.dist().to_vec()).unwrap()];
        let scores = score_hypotheses(&received, &hyps).unwrap();
        assert_eq!(scores[0], scores[1]);
    }

    #[test]
    fn zero_mass_on_observed_type_is_neg_inf() {
        let received = EvidenceCounts::new(vec![1, 1]).unwrap();
        let hyps = vec![Hypothesis::new(0, vec![1.0, 0.0]).unwrap()];
        let scores = score_hypotheses(&received, &hyps).unwrap();
        assert_eq!(scores[0], f64::NEG_INFINITY);
        assert!(matches!(
            map_select(&scores),
            Err(Error::NoConsistentHypothesis)
        ));
        // Smoothing rescues it.
        let smoothed = score_hypotheses_smoothed(&received, &hyps, 1e-6).unwrap();
        assert!(smoothed[0].is_finite());
    }

    #[test]
    fn map_select_contract() {
        assert_eq!(map_select(&[-5.0]).unwrap(), 0);
        assert_eq!(map_select(&[-1.0, -1.0, -3.0]).unwrap(), 0);
        assert_eq!(map_select(&[-5.0, -2.0, -9.0]).unwrap(), 1);
        assert!(map_select(&[]).is_err());
    }

    #[test]
    fn map_select_shift_invariant() {
        let scores = [-3.0, -1.5, -2.0];
        let shifted: Vec<f64> = scores.iter().map(|s| s + 123.0).collect();
        assert_eq!(map_select(&scores).unwrap(), map_select(&shifted).unwrap());
    }

    #[test]
    fn map_accuracy_grows_with_sample_size() {
        // Evidence drawn from the true hypothesis; accuracy over seeded
        // episodes must be non-decreasing (within 3 sigma) on the grid.
        let k = 6;
        let dists = [
            vec![0.4, 0.2, 0.1, 0.1, 0.1, 0.1],
            vec![0.1, 0.4, 0.2, 0.1, 0.1, 0.1],
            vec![0.1, 0.1, 0.4, 0.2, 0.1, 0.1],
        ];
        let hyps: Vec<Hypothesis> = dists
            .iter()
            .enumerate()
            .map(|(i, d)| Hypothesis::new(i, d.clone()).unwrap())
            .collect();

        let episodes = 200;
        let mut accs = Vec::new();
        for &samples in &[10usize, 100, 1000] {
            let mut correct = 0;
            for ep in 0..episodes {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + ep);
                let truth = (ep % 3) as usize;
                let mut counts = vec![0u64; k];
                for _ in 0..samples {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    for (j, &p) in dists[truth].iter().enumerate() {
                        acc += p;
                        if u < acc {
                            counts[j] += 1;
                            break;
                        }
                    }
                }
                let received = EvidenceCounts::new(counts).unwrap();
                let scores = score_hypotheses(&received, &hyps).unwrap();
                if map_select(&scores).unwrap() == truth {
                    correct += 1;
                }
            }
            accs.push(correct as f64 / episodes as f64);
        }
        for w in accs.windows(2) {
            let sigma = (w[0] * (1.0 - w[0]) / episodes as f64).sqrt();
            assert!(w[1] >= w[0] - 3.0 * sigma, "accuracy dropped: {accs:?}");
        }
    }
}
