//! Single-round budget allocation.
//!
//! Given per-type capacities `n_j` and a budget `B`, the continuous
//! optimum of the alignment objective is the truncated water-filling
//! allocation `min(theta, n_j)` where the water level `theta` exhausts the
//! budget. Integer messages are obtained by largest-remainder rounding,
//! which keeps every coordinate within 1 of the continuous solution.

use crate::inductive::{EvidenceCounts, InductiveParams};
use crate::posterior::{stirling_posterior_from_stats, StirlingStats, WidthPosterior};
use crate::{Error, Result};

/// Hard cap on the number of integer allocations the brute-force oracle
/// will enumerate.
pub const ENUMERATION_LIMIT: u64 = 1_000_000;

/// An integer per-type message: counts summing to the budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    counts: Vec<u64>,
    budget: u64,
}

impl Allocation {
    /// Wraps a count vector whose sum must equal `budget`.
    pub fn new(counts: Vec<u64>, budget: u64) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total != budget {
            return Err(Error::Domain(format!(
                "allocation sums to {total}, budget is {budget}"
            )));
        }
        Ok(Self { counts, budget })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Checks the pairing invariant against a capacity vector.
    pub fn respects_caps(&self, caps: &[u64]) -> bool {
        self.counts.len() == caps.len() && self.counts.iter().zip(caps).all(|(a, c)| a <= c)
    }
}

/// The continuous truncated water-filling solution.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousAllocation {
    values: Vec<f64>,
    water_level: f64,
}

impl ContinuousAllocation {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn water_level(&self) -> f64 {
        self.water_level
    }
}

fn check_budget(caps: &[u64], budget: u64) -> Result<u64> {
    if caps.is_empty() {
        return Err(Error::EmptyInput("capacity vector"));
    }
    if budget == 0 {
        return Err(Error::Domain("budget must be positive".into()));
    }
    let total: u64 = caps.iter().sum();
    if budget > total {
        return Err(Error::Infeasible {
            budget,
            capacity: total,
        });
    }
    Ok(total)
}

/// Water level `theta` with `sum_j min(theta, caps_j) = B`.
///
/// Solved on the piecewise-linear segments between sorted capacities in
/// `O(f log f)`. When the budget equals total capacity, `theta` is the
/// largest capacity.
pub fn water_level(caps: &[u64], budget: u64) -> Result<f64> {
    let total = check_budget(caps, budget)?;
    if budget == total {
        return Ok(*caps.iter().max().expect("non-empty") as f64);
    }
    let mut sorted: Vec<u64> = caps.to_vec();
    sorted.sort_unstable();
    let f = sorted.len();
    // Below sorted[idx], idx types are saturated and (f - idx) still rise
    // with theta: sum(theta) = prefix + (f - idx) * theta.
    let mut prefix: u64 = 0;
    for (idx, &cap) in sorted.iter().enumerate() {
        let active = (f - idx) as f64;
        let theta = (budget - prefix) as f64 / active;
        if theta <= cap as f64 {
            return Ok(theta);
        }
        prefix += cap;
    }
    // budget < total guarantees a segment above; unreachable.
    unreachable!("water level not found for a feasible budget")
}

/// Continuous allocation `min(theta, caps_j)` at the budget-exhausting
/// water level.
pub fn truncated_water_fill(caps: &[u64], budget: u64) -> Result<ContinuousAllocation> {
    let theta = water_level(caps, budget)?;
    let values = caps.iter().map(|&c| theta.min(c as f64)).collect();
    Ok(ContinuousAllocation {
        values,
        water_level: theta,
    })
}

/// Largest-remainder rounding of a continuous allocation.
///
/// Floors every entry, then hands the remaining units out by descending
/// fractional part; ties prefer the larger capacity, then the lower index.
/// No entry exceeds its capacity and the result sums to the budget
/// exactly, so every coordinate lands within 1 of the continuous value.
pub fn round_allocation(
    cont: &ContinuousAllocation,
    caps: &[u64],
    budget: u64,
) -> Result<Allocation> {
    if cont.values.len() != caps.len() {
        return Err(Error::LengthMismatch {
            left: cont.values.len(),
            right: caps.len(),
        });
    }
    let total: f64 = cont.values.iter().sum();
    if (total - budget as f64).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "continuous allocation sums to {total}, budget is {budget}"
        )));
    }

    let mut counts: Vec<u64> = Vec::with_capacity(caps.len());
    let mut fracs: Vec<f64> = Vec::with_capacity(caps.len());
    for (&v, &cap) in cont.values.iter().zip(caps) {
        let mut floor = v.floor();
        let mut frac = v - floor;
        // Snap values that are integer up to fp noise.
        if frac > 1.0 - 1e-9 {
            floor += 1.0;
            frac = 0.0;
        } else if frac < 1e-9 {
            frac = 0.0;
        }
        let floor = (floor as u64).min(cap);
        counts.push(floor);
        fracs.push(frac);
    }

    let assigned: u64 = counts.iter().sum();
    if assigned > budget {
        return Err(Error::Domain("floors exceed budget".into()));
    }
    let mut remaining = budget - assigned;

    // Candidate order: larger fractional part first, then larger capacity,
    // then lower index.
    let mut order: Vec<usize> = (0..caps.len()).collect();
    order.sort_by(|&a, &b| {
        fracs[b]
            .partial_cmp(&fracs[a])
            .expect("fractional parts are finite")
            .then(caps[b].cmp(&caps[a]))
            .then(a.cmp(&b))
    });

    while remaining > 0 {
        let mut progressed = false;
        for &idx in &order {
            if remaining == 0 {
                break;
            }
            if counts[idx] < caps[idx] {
                counts[idx] += 1;
                remaining -= 1;
                progressed = true;
            }
        }
        if !progressed {
            return Err(Error::Infeasible {
                budget,
                capacity: caps.iter().sum(),
            });
        }
    }
    Allocation::new(counts, budget)
}

/// Water-fill then round: the integer allocation strategies emit.
pub fn integer_water_fill(caps: &[u64], budget: u64) -> Result<Allocation> {
    let cont = truncated_water_fill(caps, budget)?;
    round_allocation(&cont, caps, budget)
}

/// Maximum and cumulative absolute deviation between an integer allocation
/// and the continuous solution it was rounded from.
pub fn rounding_error_report(
    alloc: &Allocation,
    cont: &ContinuousAllocation,
) -> Result<(f64, f64)> {
    if alloc.counts.len() != cont.values.len() {
        return Err(Error::LengthMismatch {
            left: alloc.counts.len(),
            right: cont.values.len(),
        });
    }
    let mut linf: f64 = 0.0;
    let mut l1: f64 = 0.0;
    for (&a, &v) in alloc.counts.iter().zip(&cont.values) {
        let d = (a as f64 - v).abs();
        linf = linf.max(d);
        l1 += d;
    }
    Ok((linf, l1))
}

/// Alignment objective `sum_w p_t(w) * p_r(w)` for an integer message.
///
/// Both sides are per-constituent posteriors: no width-multiplicity
/// factor enters here (the inner-product objective is over constituent
/// values, and the water-filling dominance property holds for exactly
/// that form). The receiver side is built from the message's positive
/// entries; zero entries are excluded and set the receiver's minimal
/// width.
pub fn alignment_objective(
    alloc: &Allocation,
    p_t: &WidthPosterior,
    params: &InductiveParams,
    k: usize,
) -> Result<f64> {
    let values: Vec<f64> = alloc.counts.iter().map(|&n| n as f64).collect();
    alignment_objective_values(&values, p_t, params, k)
}

/// Alignment objective for a real-valued allocation; this is the form the
/// continuous water-filling point is scored with.
pub fn alignment_objective_values(
    values: &[f64],
    p_t: &WidthPosterior,
    params: &InductiveParams,
    k: usize,
) -> Result<f64> {
    let stats = StirlingStats::from_values(values)?;
    if stats.f == 0 {
        return Err(Error::Domain("allocation has no positive entry".into()));
    }
    let total: f64 = values.iter().sum();
    let alpha = match params.alpha {
        crate::inductive::AlphaMode::Fixed(a) => a,
        crate::inductive::AlphaMode::FromEvidence => total,
    };
    let p_r = stirling_posterior_from_stats(&stats, k, params.lambda, alpha, false)?;
    let lo = p_t.f_min().min(p_r.f_min());
    let hi = p_t.k().max(p_r.k());
    let mut acc = 0.0;
    for w in lo..=hi {
        acc += p_t.prob(w) * p_r.prob(w);
    }
    Ok(acc)
}

/// Counts the integer allocations satisfying the budget and capacity
/// constraints, saturating at the guard.
fn count_feasible(caps: &[u64], budget: u64, limit: u64) -> u64 {
    // DP over types: ways[b] = number of prefixes summing to b.
    let mut ways = vec![0u64; budget as usize + 1];
    ways[0] = 1;
    for &cap in caps {
        let mut next = vec![0u64; budget as usize + 1];
        for b in 0..=budget as usize {
            if ways[b] == 0 {
                continue;
            }
            let hi = (cap as usize).min(budget as usize - b);
            for take in 0..=hi {
                let cell = &mut next[b + take];
                *cell = cell.saturating_add(ways[b]);
                if *cell > limit {
                    *cell = limit + 1;
                }
            }
        }
        ways = next;
    }
    ways[budget as usize]
}

/// Exhaustive search for the objective-maximizing integer allocation.
///
/// Enumerates in lexicographic order so ties resolve to the smallest
/// vector. Errors when the feasible set exceeds [`ENUMERATION_LIMIT`].
pub fn brute_force_best(
    caps: &[u64],
    budget: u64,
    p_t: &WidthPosterior,
    params: &InductiveParams,
    k: usize,
) -> Result<(Allocation, f64)> {
    check_budget(caps, budget)?;
    let count = count_feasible(caps, budget, ENUMERATION_LIMIT);
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }

    let f = caps.len();
    let suffix_caps: Vec<u64> = {
        let mut s = vec![0u64; f + 1];
        for i in (0..f).rev() {
            s[i] = s[i + 1] + caps[i];
        }
        s
    };

    // Depth-first lexicographic enumeration with capacity pruning.
    struct Scan<'a> {
        caps: &'a [u64],
        suffix_caps: Vec<u64>,
        p_t: &'a WidthPosterior,
        params: &'a InductiveParams,
        k: usize,
        current: Vec<u64>,
        best: Option<(Vec<u64>, f64)>,
    }

    impl Scan<'_> {
        fn recurse(&mut self, idx: usize, remaining: u64) -> Result<()> {
            if idx == self.caps.len() {
                if remaining == 0 {
                    let total = self.current.iter().sum();
                    let alloc = Allocation::new(self.current.clone(), total)?;
                    let obj = alignment_objective(&alloc, self.p_t, self.params, self.k)?;
                    let better = match &self.best {
                        None => true,
                        Some((_, b)) => obj > *b,
                    };
                    if better {
                        self.best = Some((self.current.clone(), obj));
                    }
                }
                return Ok(());
            }
            if self.suffix_caps[idx] < remaining {
                return Ok(());
            }
            let hi = self.caps[idx].min(remaining);
            for take in 0..=hi {
                self.current[idx] = take;
                self.recurse(idx + 1, remaining - take)?;
            }
            self.current[idx] = 0;
            Ok(())
        }
    }

    let mut scan = Scan {
        caps,
        suffix_caps,
        p_t,
        params,
        k,
        current: vec![0u64; f],
        best: None,
    };
    scan.recurse(0, budget)?;

    let (counts, obj) = scan.best.ok_or(Error::NoFeasibleCandidate)?;
    Ok((Allocation::new(counts, budget)?, obj))
}

/// Transmitter-side per-constituent posterior from a capacity vector
/// treated as evidence over `k` types. This is the `p_t` the alignment
/// objective expects.
pub fn transmitter_posterior(
    caps: &[u64],
    params: &InductiveParams,
    k: usize,
) -> Result<WidthPosterior> {
    let mut counts = vec![0u64; k];
    for (j, &c) in caps.iter().enumerate() {
        counts[j] = c;
    }
    let ev = EvidenceCounts::new(counts)?;
    crate::posterior::stirling_posterior(&ev, params, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inductive::AlphaMode;
    use proptest::prelude::*;

    fn params() -> InductiveParams {
        InductiveParams::new(1.0, AlphaMode::FromEvidence).unwrap()
    }

    #[test]
    fn water_level_hand_case() {
        let theta = water_level(&[2, 5, 9], 9).unwrap();
        assert!((theta - 3.5).abs() < 1e-9);
    }

    #[test]
    fn water_level_symmetric_interior() {
        // All capacities clear the level, so everyone gets B/f.
        let theta = water_level(&[10, 10, 10, 10], 8).unwrap();
        assert!((theta - 2.0).abs() < 1e-9);
        let cont = truncated_water_fill(&[10, 10, 10, 10], 8).unwrap();
        for &v in cont.values() {
            assert!((v - 2.0).abs() < 1e-9);
        }
    }

    #[test]
    fn water_level_budget_equals_capacity() {
        let cont = truncated_water_fill(&[1, 2, 3], 6).unwrap();
        assert_eq!(cont.values(), &[1.0, 2.0, 3.0]);
        assert!(cont.water_level() >= 3.0);
    }

    #[test]
    fn water_level_rejects_bad_budgets() {
        assert!(matches!(
            water_level(&[1, 2], 4),
            Err(Error::Infeasible { .. })
        ));
        assert!(matches!(water_level(&[1, 2], 0), Err(Error::Domain(_))));
    }

    #[test]
    fn truncated_water_fill_hand_case() {
        let cont = truncated_water_fill(&[2, 5, 9], 9).unwrap();
        let want = [2.0, 3.5, 3.5];
        for (v, w) in cont.values().iter().zip(&want) {
            assert!((v - w).abs() < 1e-9);
        }
    }

    #[test]
    fn truncated_water_fill_symmetric() {
        let cont = truncated_water_fill(&[10, 10, 10], 6).unwrap();
        assert_eq!(cont.values(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn truncated_water_fill_zero_capacity_type() {
        let cont = truncated_water_fill(&[0, 4], 4).unwrap();
        assert_eq!(cont.values(), &[0.0, 4.0]);
    }

    #[test]
    fn round_allocation_tie_prefers_larger_capacity() {
        let cont = truncated_water_fill(&[2, 5, 9], 9).unwrap();
        let alloc = round_allocation(&cont, &[2, 5, 9], 9).unwrap();
        assert_eq!(alloc.counts(), &[2, 3, 4]);
    }

    #[test]
    fn round_allocation_integer_input_unchanged() {
        let cont = ContinuousAllocation {
            values: vec![1.0, 4.0, 2.0],
            water_level: 4.0,
        };
        let alloc = round_allocation(&cont, &[3, 5, 2], 7).unwrap();
        assert_eq!(alloc.counts(), &[1, 4, 2]);
    }

    #[test]
    fn rounding_error_report_values() {
        let cont = ContinuousAllocation {
            values: vec![2.0, 3.5, 3.5],
            water_level: 3.5,
        };
        let alloc = Allocation::new(vec![2, 3, 4], 9).unwrap();
        let (linf, l1) = rounding_error_report(&alloc, &cont).unwrap();
        assert!((linf - 0.5).abs() < 1e-12);
        assert!((l1 - 1.0).abs() < 1e-12);

        let same = Allocation::new(vec![2, 4, 3], 9).unwrap();
        let cont2 = ContinuousAllocation {
            values: vec![2.0, 4.0, 3.0],
            water_level: 4.0,
        };
        assert_eq!(rounding_error_report(&same, &cont2).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn alignment_objective_point_masses() {
        // K = f on both sides: both posteriors are the same point mass.
        let pr = params();
        let p_t = transmitter_posterior(&[4, 6], &pr, 2).unwrap();
        let alloc = Allocation::new(vec![2, 1], 3).unwrap();
        let obj = alignment_objective(&alloc, &p_t, &pr, 2).unwrap();
        assert!((obj - 1.0).abs() < 1e-12);
    }

    #[test]
    fn alignment_objective_permutation_invariant() {
        let pr = params();
        let p_t = transmitter_posterior(&[5, 3, 8], &pr, 6).unwrap();
        let a = Allocation::new(vec![1, 2, 3], 6).unwrap();
        let b = Allocation::new(vec![3, 1, 2], 6).unwrap();
        let oa = alignment_objective(&a, &p_t, &pr, 6).unwrap();
        let ob = alignment_objective(&b, &p_t, &pr, 6).unwrap();
        assert_eq!(oa, ob);
    }

    /// Direct evaluation of the objective coded independently of the
    /// implementation path: the receiver mass at each width is the full
    /// per-width double sum, normalized, then dotted with `p_t`.
    fn objective_direct(alloc: &[u64], p_t: &WidthPosterior, k: usize, lambda: f64) -> f64 {
        use crate::math::{ln_binomial, ln_gamma, log_sum_exp};
        let f = alloc.iter().filter(|&&n| n > 0).count();
        let s: f64 = alloc
            .iter()
            .filter(|&&n| n > 0)
            .map(|&n| (n as f64).ln())
            .sum();
        let alpha = alloc.iter().sum::<u64>() as f64;
        let mut log_masses = Vec::new();
        for w in f..=k {
            let terms: Vec<f64> = (0..=(k - f))
                .map(|i| {
                    let fi = (f + i) as f64;
                    let wf = w as f64;
                    let beta = (1.0 / fi - 1.0 / wf) * lambda;
                    ln_binomial((k - f) as u64, i as u64) + ln_gamma(wf * lambda / k as f64)
                        - ln_gamma(fi * lambda / k as f64)
                        + ((fi - wf) * lambda / k as f64) * alpha.ln()
                        + f as f64 * (ln_gamma(lambda / wf) - ln_gamma(lambda / fi))
                        + beta * s
                })
                .collect();
            log_masses.push(-log_sum_exp(&terms).unwrap());
        }
        let norm = log_sum_exp(&log_masses).unwrap();
        let mut acc = 0.0;
        for (offset, lm) in log_masses.iter().enumerate() {
            acc += p_t.prob(f + offset) * (lm - norm).exp();
        }
        acc
    }

    #[test]
    fn alignment_objective_matches_direct_evaluation() {
        let pr = params();
        let p_t = transmitter_posterior(&[3, 5, 2], &pr, 6).unwrap();
        for alloc in [[2u64, 1, 1], [1, 2, 1], [0, 2, 2], [4, 0, 0]] {
            let a = Allocation::new(alloc.to_vec(), 4).unwrap();
            let got = alignment_objective(&a, &p_t, &pr, 6).unwrap();
            let want = objective_direct(&alloc, &p_t, 6, 1.0);
            assert!(
                (got - want).abs() < 1e-10,
                "alloc {alloc:?}: got {got}, want {want}"
            );
        }
    }

    #[test]
    fn brute_force_forced_allocation() {
        let pr = params();
        let p_t = transmitter_posterior(&[3, 3], &pr, 4).unwrap();
        let (best, _) = brute_force_best(&[3, 3], 6, &p_t, &pr, 4).unwrap();
        assert_eq!(best.counts(), &[3, 3]);
    }

    #[test]
    fn brute_force_symmetric_budget_split() {
        let pr = params();
        let p_t = transmitter_posterior(&[10, 10], &pr, 4).unwrap();
        let (best, _) = brute_force_best(&[10, 10], 4, &p_t, &pr, 4).unwrap();
        assert_eq!(best.counts(), &[2, 2]);
    }

    #[test]
    fn water_fill_close_to_enumerated_optimum() {
        let caps = [1u64, 4, 4];
        let pr = params();
        let p_t = transmitter_posterior(&caps, &pr, 6).unwrap();
        let (best, _) = brute_force_best(&caps, 5, &p_t, &pr, 6).unwrap();
        let wf = integer_water_fill(&caps, 5).unwrap();
        for (a, b) in wf.counts().iter().zip(best.counts()) {
            assert!((*a as i64 - *b as i64).abs() <= 1);
        }
    }

    #[test]
    fn enumeration_guard_trips() {
        let caps = vec![30u64; 12];
        let pr = params();
        let p_t = transmitter_posterior(&caps, &pr, 14).unwrap();
        assert!(matches!(
            brute_force_best(&caps, 90, &p_t, &pr, 14),
            Err(Error::EnumerationLimit { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn rounding_respects_budget_caps_and_lemma_bounds(
            caps in proptest::collection::vec(0u64..30, 1..12),
            budget_frac in 0.01f64..1.0,
        ) {
            let total: u64 = caps.iter().sum();
            prop_assume!(total > 0);
            let budget = ((total as f64 * budget_frac).ceil() as u64).clamp(1, total);
            let cont = truncated_water_fill(&caps, budget).unwrap();
            let sum: f64 = cont.values().iter().sum();
            prop_assert!((sum - budget as f64).abs() < 1e-9);

            let alloc = round_allocation(&cont, &caps, budget).unwrap();
            prop_assert_eq!(alloc.counts().iter().sum::<u64>(), budget);
            prop_assert!(alloc.respects_caps(&caps));
            let (linf, l1) = rounding_error_report(&alloc, &cont).unwrap();
            prop_assert!(linf <= 1.0 + 1e-9);
            prop_assert!(l1 <= caps.len() as f64 + 1e-9);
        }

        #[test]
        fn symmetric_case_is_uniform(
            f in 1usize..10,
            budget in 1u64..40,
        ) {
            // Capacities comfortably above B/f give the exact uniform split.
            let per = (budget as f64 / f as f64).ceil() as u64 + 1;
            let caps = vec![per.max(1); f];
            prop_assume!(budget <= caps.iter().sum::<u64>());
            let cont = truncated_water_fill(&caps, budget).unwrap();
            for &v in cont.values() {
                prop_assert!((v - budget as f64 / f as f64).abs() < 1e-9);
            }
        }

        #[test]
        fn permutation_equivariance(
            caps in proptest::collection::vec(1u64..20, 2..8),
            budget_frac in 0.1f64..1.0,
        ) {
            let total: u64 = caps.iter().sum();
            let budget = ((total as f64 * budget_frac) as u64).clamp(1, total);
            let cont = truncated_water_fill(&caps, budget).unwrap();
            let mut rev = caps.clone();
            rev.reverse();
            let cont_rev = truncated_water_fill(&rev, budget).unwrap();
            for (i, &v) in cont.values().iter().enumerate() {
                let j = caps.len() - 1 - i;
                prop_assert!((v - cont_rev.values()[j]).abs() < 1e-9);
            }
        }
    }
}
