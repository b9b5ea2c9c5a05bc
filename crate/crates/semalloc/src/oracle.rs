//! Brute-force check suites for the allocation optimizer.
//!
//! Two hard properties are exercised: the continuous truncated
//! water-filling point dominates every feasible integer allocation on the
//! alignment objective, and largest-remainder rounding keeps every
//! coordinate within 1 of the continuous solution (cumulative error at
//! most `f`) while hitting the budget under the capacity caps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::allocation::{
    alignment_objective_values, brute_force_best, round_allocation, rounding_error_report,
    transmitter_posterior, truncated_water_fill,
};
use crate::inductive::{AlphaMode, InductiveParams};
use crate::{Error, Result};

/// Outcome counters of one oracle run.
#[derive(Debug, Clone, Default)]
pub struct OracleReport {
    pub dominance_checked: u64,
    pub dominance_violations: u64,
    /// Largest `best_integer_objective - continuous_objective` observed;
    /// dominance holds while this stays within tolerance.
    pub worst_gap: f64,
    pub rounding_checked: u64,
    pub rounding_violations: u64,
}

pub const DOMINANCE_TOLERANCE: f64 = 1e-9;

fn check_dominance_instance(
    caps: &[u64],
    budget: u64,
    k: usize,
    report: &mut OracleReport,
) -> Result<()> {
    let params = InductiveParams::new(1.0, AlphaMode::FromEvidence)?;
    let p_t = transmitter_posterior(caps, &params, k)?;
    let cont = truncated_water_fill(caps, budget)?;
    let obj_cont = alignment_objective_values(cont.values(), &p_t, &params, k)?;
    let (_, obj_best) = brute_force_best(caps, budget, &p_t, &params, k)?;
    let gap = obj_best - obj_cont;
    report.dominance_checked += 1;
    if gap > report.worst_gap {
        report.worst_gap = gap;
    }
    if gap > DOMINANCE_TOLERANCE {
        report.dominance_violations += 1;
    }
    Ok(())
}

/// Exhaustive dominance grid: every capacity vector with `f <= max_f`
/// entries in `[0, max_cap]` (at least one positive), every feasible
/// budget up to `max_b`.
pub fn dominance_grid(max_f: usize, max_b: u64, max_cap: u64) -> Result<OracleReport> {
    let mut report = OracleReport::default();
    for f in 1..=max_f {
        let k = f + 4;
        let mut caps = vec![0u64; f];
        loop {
            let total: u64 = caps.iter().sum();
            if total > 0 {
                for budget in 1..=max_b.min(total) {
                    check_dominance_instance(&caps, budget, k, &mut report)?;
                }
            }
            // Odometer increment over the capacity grid.
            let mut pos = 0;
            loop {
                if pos == f {
                    break;
                }
                if caps[pos] < max_cap {
                    caps[pos] += 1;
                    break;
                }
                caps[pos] = 0;
                pos += 1;
            }
            if pos == f {
                break;
            }
        }
    }
    Ok(report)
}

/// Seeded random dominance instances within the same bounds.
pub fn dominance_random(
    max_f: usize,
    max_b: u64,
    max_cap: u64,
    instances: usize,
    seed: u64,
) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport::default();
    let mut produced = 0;
    while produced < instances {
        let f = rng.gen_range(1..=max_f);
        let caps: Vec<u64> = (0..f).map(|_| rng.gen_range(0..=max_cap)).collect();
        let total: u64 = caps.iter().sum();
        if total == 0 {
            continue;
        }
        let budget = rng.gen_range(1..=max_b.min(total));
        let k = f + rng.gen_range(1..=6);
        check_dominance_instance(&caps, budget, k, &mut report)?;
        produced += 1;
    }
    Ok(report)
}

/// Randomized rounding-bound instances: budget exact, caps respected,
/// `linf <= 1`, `l1 <= f`.
pub fn rounding_random(instances: usize, seed: u64) -> Result<OracleReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = OracleReport::default();
    let mut produced = 0;
    while produced < instances {
        let f = rng.gen_range(1..=12);
        let caps: Vec<u64> = (0..f).map(|_| rng.gen_range(0..=50u64)).collect();
        let total: u64 = caps.iter().sum();
        if total == 0 {
            continue;
        }
        let budget = rng.gen_range(1..=total);
        let cont = truncated_water_fill(&caps, budget)?;
        let alloc = round_allocation(&cont, &caps, budget)?;
        let (linf, l1) = rounding_error_report(&alloc, &cont)?;
        report.rounding_checked += 1;
        let budget_ok = alloc.counts().iter().sum::<u64>() == budget;
        let caps_ok = alloc.respects_caps(&caps);
        if !budget_ok || !caps_ok || linf > 1.0 + 1e-9 || l1 > f as f64 + 1e-9 {
            report.rounding_violations += 1;
        }
        produced += 1;
    }
    Ok(report)
}

/// The full oracle suite backing the `oracle-check` command: exhaustive
/// dominance grid, seeded random dominance instances, and `instances*100`
/// rounding-bound instances.
pub fn run_oracle_checks(
    max_f: usize,
    max_b: u64,
    max_cap: u64,
    instances: usize,
    seed: u64,
) -> Result<OracleReport> {
    if instances == 0 {
        return Err(Error::Config("instances must be positive".into()));
    }
    let mut report = dominance_grid(max_f, max_b, max_cap)?;
    let random = dominance_random(max_f, max_b, max_cap, instances, seed)?;
    report.dominance_checked += random.dominance_checked;
    report.dominance_violations += random.dominance_violations;
    report.worst_gap = report.worst_gap.max(random.worst_gap);

    let rounding = rounding_random(instances.saturating_mul(100), seed ^ 0xABCD)?;
    report.rounding_checked = rounding.rounding_checked;
    report.rounding_violations = rounding.rounding_violations;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_suite_is_clean() {
        let report = rounding_random(2000, 11).unwrap();
        assert_eq!(report.rounding_checked, 2000);
        assert_eq!(report.rounding_violations, 0);
    }

    #[test]
    fn small_dominance_grid_is_clean() {
        let report = dominance_grid(2, 4, 3).unwrap();
        assert!(report.dominance_checked > 0);
        assert_eq!(
            report.dominance_violations, 0,
            "worst gap {}",
            report.worst_gap
        );
    }
}
