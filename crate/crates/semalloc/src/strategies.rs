//! Transmitter policies.
//!
//! All strategies operate on the transmitter's observed-type slots: a
//! capacity vector of available counts plus the cumulative counts already
//! sent. Every policy returns a feasible budget-exact [`Allocation`].

use rand::Rng;

use crate::allocation::{integer_water_fill, Allocation};
use crate::inductive::cont_information;
use crate::{Error, Result};

/// Norm used when matching candidate messages against an ideal target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Norm {
    L1,
    L2,
    Linf,
}

impl Norm {
    pub fn eval(&self, v: &[f64]) -> f64 {
        match self {
            Self::L1 => v.iter().map(|x| x.abs()).sum(),
            Self::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
            Self::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
        }
    }
}

/// Transmitter bookkeeping: the full pool of per-type counts and what has
/// been sent so far.
#[derive(Debug, Clone)]
pub struct TransmitterState {
    pool: Vec<u64>,
    sent: Vec<u64>,
    round: usize,
}

impl TransmitterState {
    pub fn new(pool: Vec<u64>) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::EmptyInput("transmitter pool"));
        }
        let sent = vec![0; pool.len()];
        Ok(Self {
            pool,
            sent,
            round: 0,
        })
    }

    pub fn pool(&self) -> &[u64] {
        &self.pool
    }

    pub fn sent(&self) -> &[u64] {
        &self.sent
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Remaining capacity per type: `r_j = n_j - sent_j`.
    pub fn remaining(&self) -> Vec<u64> {
        self.pool
            .iter()
            .zip(&self.sent)
            .map(|(&n, &s)| n - s)
            .collect()
    }

    /// Records a transmitted message and advances the round counter.
    pub fn record(&mut self, msg: &Allocation) -> Result<()> {
        if msg.counts().len() != self.pool.len() {
            return Err(Error::LengthMismatch {
                left: msg.counts().len(),
                right: self.pool.len(),
            });
        }
        for ((s, &m), &n) in self.sent.iter_mut().zip(msg.counts()).zip(&self.pool) {
            if *s + m > n {
                return Err(Error::Domain(format!(
                    "message exceeds remaining capacity ({} + {m} > {n})",
                    *s
                )));
            }
            *s += m;
        }
        self.round += 1;
        Ok(())
    }
}

/// A predefined set of budget-`B` candidate messages.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    messages: Vec<Allocation>,
}

impl CandidatePool {
    /// Every message must be feasible against the pool capacities in
    /// isolation and share one budget.
    pub fn new(messages: Vec<Allocation>, caps: &[u64]) -> Result<Self> {
        if messages.is_empty() {
            return Err(Error::EmptyInput("candidate pool"));
        }
        let budget = messages[0].budget();
        for msg in &messages {
            if msg.budget() != budget {
                return Err(Error::Domain("candidate budgets differ".into()));
            }
            if !msg.respects_caps(caps) {
                return Err(Error::Domain("candidate exceeds pool capacity".into()));
            }
        }
        Ok(Self { messages })
    }

    pub fn messages(&self) -> &[Allocation] {
        &self.messages
    }

    pub fn len(&self) -> usize {
        self.messages.len()
    }

    pub fn is_empty(&self) -> bool {
        self.messages.is_empty()
    }
}

/// The long-horizon plan: a cumulative target and its per-round schedule.
#[derive(Debug, Clone)]
pub struct WfLongPlan {
    pub target: Allocation,
    pub schedule: Vec<Allocation>,
}

/// Plans the whole horizon at once: water-fill the cumulative budget
/// `T * B` against the full pool, then split the target into `T` per-round
/// messages by repeatedly water-filling the residual target.
///
/// The schedule's concatenation equals the target exactly.
pub fn wf_long_plan(pool: &[u64], rounds: usize, budget: u64) -> Result<WfLongPlan> {
    if rounds == 0 {
        return Err(Error::Domain("rounds must be positive".into()));
    }
    let total_budget = budget
        .checked_mul(rounds as u64)
        .ok_or_else(|| Error::Overflow("cumulative budget".into()))?;
    let target = integer_water_fill(pool, total_budget)?;

    let mut residual: Vec<u64> = target.counts().to_vec();
    let mut schedule = Vec::with_capacity(rounds);
    for _ in 0..rounds {
        let step = integer_water_fill(&residual, budget)?;
        for (r, &s) in residual.iter_mut().zip(step.counts()) {
            *r -= s;
        }
        schedule.push(step);
    }
    debug_assert!(residual.iter().all(|&r| r == 0));
    Ok(WfLongPlan { target, schedule })
}

/// Myopic per-round water-filling against the remaining capacities.
pub fn wf_greedy_round(state: &TransmitterState, budget: u64) -> Result<Allocation> {
    integer_water_fill(&state.remaining(), budget)
}

/// Cont-information-greedy selection: `B` sequential picks, each taking
/// the capacity-positive type whose next instance is most informative to
/// the receiver — equivalently, the type the receiver has seen least.
///
/// `receiver_counts` are the receiver's per-type counts on the same slots;
/// the receiver's distinct-type width is frozen at round start for all
/// picks. Ties go to the lowest type index.
pub fn scld_round(
    state: &TransmitterState,
    receiver_counts: &[u64],
    budget: u64,
    lambda: f64,
) -> Result<Allocation> {
    let remaining = state.remaining();
    if receiver_counts.len() != remaining.len() {
        return Err(Error::LengthMismatch {
            left: receiver_counts.len(),
            right: remaining.len(),
        });
    }
    let available: u64 = remaining.iter().sum();
    if available < budget {
        return Err(Error::Infeasible {
            budget,
            capacity: available,
        });
    }

    // Width of the receiver's minimal constituent at round start; a fresh
    // receiver has none yet, and any positive stand-in leaves the argmax
    // unchanged since only l_g varies across candidates.
    let f_r = receiver_counts.iter().filter(|&&n| n > 0).count() as u64;
    let width = f_r.max(1);

    let mut picks = vec![0u64; remaining.len()];
    let mut l: u64 = receiver_counts.iter().sum();
    for _ in 0..budget {
        let mut best: Option<(usize, f64)> = None;
        for j in 0..remaining.len() {
            if picks[j] >= remaining[j] {
                continue;
            }
            let l_g = receiver_counts[j] + picks[j];
            let cont = if l == 0 && lambda == 0.0 {
                // Degenerate confirmation denominator; all candidates are
                // equally informative, which the index tie-break handles.
                0.0
            } else {
                cont_information(l, l_g, width, lambda)?
            };
            let better = match best {
                None => true,
                Some((_, b)) => cont > b,
            };
            if better {
                best = Some((j, cont));
            }
        }
        let (j, _) = best.ok_or(Error::NoFeasibleCandidate)?;
        picks[j] += 1;
        l += 1;
    }
    Allocation::new(picks, budget)
}

/// Uniform draws without replacement from the multiset of remaining
/// constituent instances.
pub fn random_free_round<R: Rng>(
    state: &TransmitterState,
    budget: u64,
    rng: &mut R,
) -> Result<Allocation> {
    let mut remaining = state.remaining();
    let mut available: u64 = remaining.iter().sum();
    if available < budget {
        return Err(Error::Infeasible {
            budget,
            capacity: available,
        });
    }
    let mut picks = vec![0u64; remaining.len()];
    for _ in 0..budget {
        let mut target = rng.gen_range(0..available);
        for j in 0..remaining.len() {
            if target < remaining[j] {
                picks[j] += 1;
                remaining[j] -= 1;
                available -= 1;
                break;
            }
            target -= remaining[j];
        }
    }
    Allocation::new(picks, budget)
}

/// Uniform choice among unused chunks; marks the chosen chunk used and
/// returns its index.
pub fn random_chunk_round<R: Rng>(
    pool: &CandidatePool,
    used: &mut [bool],
    rng: &mut R,
) -> Result<usize> {
    if used.len() != pool.len() {
        return Err(Error::LengthMismatch {
            left: used.len(),
            right: pool.len(),
        });
    }
    let unused: Vec<usize> = (0..used.len()).filter(|&i| !used[i]).collect();
    if unused.is_empty() {
        return Err(Error::PoolExhausted);
    }
    let idx = unused[rng.gen_range(0..unused.len())];
    used[idx] = true;
    Ok(idx)
}

fn deviation(sum: &[u64], target: &[u64], norm: Norm) -> f64 {
    let diff: Vec<f64> = sum
        .iter()
        .zip(target)
        .map(|(&a, &b)| a as f64 - b as f64)
        .collect();
    norm.eval(&diff)
}

fn cumulative_feasible(sum: &[u64], msg: &Allocation, caps: &[u64]) -> bool {
    sum.iter()
        .zip(msg.counts())
        .zip(caps)
        .all(|((&s, &m), &c)| s + m <= c)
}

/// Exhaustive/greedy subset selection: picks `t_prime` candidate messages
/// whose sum best matches the cumulative water-filling target, under
/// cumulative capacity constraints.
///
/// Exhaustive search runs when `C(M, T')` stays under `1e5`; otherwise a
/// greedy build with one pass of pairwise swap improvement. Ties resolve
/// by index order in both paths.
pub fn select_subset_longterm(
    pool: &CandidatePool,
    t_prime: usize,
    caps: &[u64],
    target: &Allocation,
    norm: Norm,
) -> Result<Vec<usize>> {
    let m = pool.len();
    if t_prime > m {
        return Err(Error::Domain(format!(
            "subset size {t_prime} exceeds pool size {m}"
        )));
    }
    if t_prime == 0 {
        return Ok(Vec::new());
    }

    const EXHAUSTIVE_LIMIT: u64 = 100_000;
    let combos = crate::math::binomial_u64(m as u64, t_prime as u64);

    if combos <= EXHAUSTIVE_LIMIT {
        // Lexicographic combination enumeration; first strict improvement
        // wins, so ties keep the smallest index set.
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut indices: Vec<usize> = (0..t_prime).collect();
        loop {
            let mut sum = vec![0u64; caps.len()];
            let mut feasible = true;
            for &i in &indices {
                for (s, &c) in sum.iter_mut().zip(pool.messages()[i].counts()) {
                    *s += c;
                }
            }
            for (s, &c) in sum.iter().zip(caps) {
                if *s > c {
                    feasible = false;
                    break;
                }
            }
            if feasible {
                let d = deviation(&sum, target.counts(), norm);
                let better = match &best {
                    None => true,
                    Some((_, b)) => d < *b,
                };
                if better {
                    best = Some((indices.clone(), d));
                }
            }
            // Advance to the next combination.
            let mut i = t_prime;
            loop {
                if i == 0 {
                    return best.map(|(s, _)| s).ok_or(Error::NoFeasibleCandidate);
                }
                i -= 1;
                if indices[i] != i + m - t_prime {
                    break;
                }
            }
            indices[i] += 1;
            for j in i + 1..t_prime {
                indices[j] = indices[j - 1] + 1;
            }
        }
    }

    // Greedy build.
    let mut selected: Vec<usize> = Vec::with_capacity(t_prime);
    let mut in_use = vec![false; m];
    let mut sum = vec![0u64; caps.len()];
    for _ in 0..t_prime {
        let mut best: Option<(usize, f64)> = None;
        for (i, msg) in pool.messages().iter().enumerate() {
            if in_use[i] || !cumulative_feasible(&sum, msg, caps) {
                continue;
            }
            let mut trial = sum.clone();
            for (s, &c) in trial.iter_mut().zip(msg.counts()) {
                *s += c;
            }
            let d = deviation(&trial, target.counts(), norm);
            let better = match best {
                None => true,
                Some((_, b)) => d < b,
            };
            if better {
                best = Some((i, d));
            }
        }
        let (i, _) = best.ok_or(Error::NoFeasibleCandidate)?;
        in_use[i] = true;
        for (s, &c) in sum.iter_mut().zip(pool.messages()[i].counts()) {
            *s += c;
        }
        selected.push(i);
    }

    // One round of pairwise swap improvement.
    for slot in selected.iter_mut() {
        let current = deviation(&sum, target.counts(), norm);
        let mut best_swap: Option<(usize, f64)> = None;
        for (cand, msg) in pool.messages().iter().enumerate() {
            if in_use[cand] {
                continue;
            }
            let out = *slot;
            let mut trial = sum.clone();
            let mut ok = true;
            for ((s, &rm), &add) in trial
                .iter_mut()
                .zip(pool.messages()[out].counts())
                .zip(msg.counts())
            {
                let v = *s - rm + add;
                *s = v;
            }
            for (s, &c) in trial.iter().zip(caps) {
                if *s > c {
                    ok = false;
                    break;
                }
            }
            if !ok {
                continue;
            }
            let d = deviation(&trial, target.counts(), norm);
            if d < current - 1e-12 {
                let better = match best_swap {
                    None => true,
                    Some((_, b)) => d < b,
                };
                if better {
                    best_swap = Some((cand, d));
                }
            }
        }
        if let Some((cand, _)) = best_swap {
            let out = *slot;
            for ((s, &rm), &add) in sum
                .iter_mut()
                .zip(pool.messages()[out].counts())
                .zip(pool.messages()[cand].counts())
            {
                *s = *s - rm + add;
            }
            in_use[out] = false;
            in_use[cand] = true;
            *slot = cand;
        }
    }

    Ok(selected)
}

/// Greedy per-round pick: the unused, capacity-feasible message whose
/// addition brings the cumulative allocation closest to the step target.
/// Ties go to the lowest index.
pub fn select_greedy_per_round(
    pool: &CandidatePool,
    used: &[bool],
    sent: &[u64],
    step_target: &Allocation,
    caps: &[u64],
    norm: Norm,
) -> Result<usize> {
    if used.len() != pool.len() {
        return Err(Error::LengthMismatch {
            left: used.len(),
            right: pool.len(),
        });
    }
    let mut best: Option<(usize, f64)> = None;
    for (i, msg) in pool.messages().iter().enumerate() {
        if used[i] || !cumulative_feasible(sent, msg, caps) {
            continue;
        }
        let trial: Vec<u64> = sent
            .iter()
            .zip(msg.counts())
            .map(|(&s, &c)| s + c)
            .collect();
        let d = deviation(&trial, step_target.counts(), norm);
        let better = match best {
            None => true,
            Some((_, b)) => d < b,
        };
        if better {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::NoFeasibleCandidate)
}
