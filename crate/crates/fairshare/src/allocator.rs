//! Single-epoch solver: lexicographic max-min fairness on weight-normalized
//! cumulative allocations, by progressive filling.
//!
//! Every user starts at her guaranteed floor. A common level λ rises; a user
//! whose normalized cumulative position (R_i + r_i)/w_i sits at λ grows along
//! with it. Users freeze when they hit their demand cap or when a resource
//! they use saturates; the fill continues with the rest until everyone is
//! frozen. All comparisons are exact, so ties (simultaneous saturations,
//! demand caps meeting saturations) are resolved deterministically.

use crate::model::{guarantee, Demand, UserEpochType};
use crate::rational::Rational;
use num_traits::Zero;
use thiserror::Error;

/// Everything the solver needs for one epoch: the (reported-scale) cumulative
/// allocations entering the epoch, the reported types, weights, the floor
/// share α, and the epoch's scalar capacity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochInput {
    pub cumulative: Vec<Rational>,
    pub types: Vec<UserEpochType>,
    pub weights: Vec<Rational>,
    pub alpha: Rational,
    pub capacity: Rational,
}

impl EpochInput {
    fn num_users(&self) -> usize {
        self.types.len()
    }

    fn num_resources(&self) -> usize {
        self.types.first().map_or(0, |ty| ty.ratios.len())
    }

    /// The floor of user `i` under this input's α, weights, and capacity.
    pub fn floor(&self, user: usize) -> Rational {
        let w_sum: Rational = self.weights.iter().sum();
        guarantee(
            &self.types[user].demand,
            &self.weights[user],
            &w_sum,
            &self.alpha,
            &self.capacity,
        )
    }
}

/// Why a user stopped growing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FrozenReason {
    /// Frozen at the guaranteed floor before any growth happened (a resource
    /// was already saturated by the floors alone).
    Floor,
    /// Reached the reported demand cap.
    DemandCap,
    /// A resource this user consumes saturated (smallest such resource index).
    SaturatedResource(usize),
    /// Placeholder for "never frozen" — unreachable for valid inputs, kept as
    /// a defensive sentinel.
    Unconstrained,
}

/// One epoch's solution, with the evidence needed by the optimality checks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochAllocation {
    /// Allocation per user, in dominant-resource units of her reported type.
    pub allocations: Vec<Rational>,
    /// Usage per resource: Σ_i r_i·a_iq.
    pub usage: Vec<Rational>,
    /// Resource indices with usage exactly equal to capacity, ascending.
    pub saturated: Vec<usize>,
    /// Per-user freeze cause.
    pub frozen: Vec<FrozenReason>,
}

/// Snapshot of the fill after one event, for inspection in tests: the level
/// just processed, the users still able to grow, and per-resource headroom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FillState {
    pub level: Rational,
    pub active: Vec<usize>,
    pub remaining: Vec<Rational>,
}

#[derive(Debug, Error)]
pub enum AllocError {
    #[error("input shape mismatch: {0}")]
    Shape(String),
    #[error("floors exceed capacity on resource {resource}")]
    InfeasibleFloors { resource: usize },
    #[error("solver invariant broken: {0}")]
    Internal(&'static str),
}

/// The constraint band applied at level λ: `max(floor, min(demand, w·λ − R))`.
/// Nondecreasing and piecewise-linear in λ; unbounded demand never caps.
pub fn clamp_allocation(input: &EpochInput, user: usize, level: &Rational) -> Rational {
    let raw = &input.weights[user] * level - &input.cumulative[user];
    let capped = input.types[user].demand.cap(&raw);
    let floor = input.floor(user);
    if capped < floor {
        floor
    } else {
        capped
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Status {
    Active,
    Frozen,
}

struct Fill<'a> {
    input: &'a EpochInput,
    floors: Vec<Rational>,
    r: Vec<Rational>,
    status: Vec<Status>,
    frozen: Vec<FrozenReason>,
    usage: Vec<Rational>,
    saturated: Vec<bool>,
}

impl<'a> Fill<'a> {
    fn new(input: &'a EpochInput) -> Result<Self, AllocError> {
        let n = input.num_users();
        let m = input.num_resources();
        if input.cumulative.len() != n || input.weights.len() != n {
            return Err(AllocError::Shape(format!(
                "{} types, {} cumulative entries, {} weights",
                n,
                input.cumulative.len(),
                input.weights.len()
            )));
        }
        if m == 0 || input.types.iter().any(|ty| ty.ratios.len() != m) {
            return Err(AllocError::Shape("inconsistent ratio vector lengths".into()));
        }
        let w_sum: Rational = input.weights.iter().sum();
        let floors: Vec<Rational> = (0..n)
            .map(|i| {
                guarantee(
                    &input.types[i].demand,
                    &input.weights[i],
                    &w_sum,
                    &input.alpha,
                    &input.capacity,
                )
            })
            .collect();
        let r = floors.clone();
        Ok(Fill {
            input,
            floors,
            r,
            status: vec![Status::Active; n],
            frozen: vec![FrozenReason::Unconstrained; n],
            usage: vec![Rational::zero(); m],
            saturated: vec![false; m],
        })
    }

    fn recompute_usage(&mut self) {
        let m = self.input.num_resources();
        for q in 0..m {
            self.usage[q] = self
                .r
                .iter()
                .zip(&self.input.types)
                .map(|(r, ty)| r * &ty.ratios[q])
                .sum();
        }
    }

    fn freeze(&mut self, user: usize, reason: FrozenReason) {
        self.status[user] = Status::Frozen;
        self.frozen[user] = reason;
    }

    fn at_demand(&self, user: usize) -> bool {
        matches!(&self.input.types[user].demand, Demand::Finite(d) if &self.r[user] == d)
    }

    /// Normalized level at which user `i` starts growing from her floor.
    fn start_level(&self, user: usize) -> Rational {
        (&self.input.cumulative[user] + &self.floors[user]) / &self.input.weights[user]
    }

    /// Freezes every active user touching a saturated resource. `initial` is
    /// true during the pre-growth sweep, where the cause is the floor itself.
    fn freeze_on_saturation(&mut self, initial: bool) {
        let n = self.input.num_users();
        for i in 0..n {
            if self.status[i] != Status::Active {
                continue;
            }
            let touched = self.input.types[i]
                .ratios
                .iter()
                .enumerate()
                .find(|(q, a)| self.saturated[*q] && !a.is_zero())
                .map(|(q, _)| q);
            if let Some(q) = touched {
                let reason = if self.at_demand(i) {
                    FrozenReason::DemandCap
                } else if initial {
                    FrozenReason::Floor
                } else {
                    FrozenReason::SaturatedResource(q)
                };
                self.freeze(i, reason);
            }
        }
    }

    fn mark_new_saturations(&mut self) -> bool {
        let mut any = false;
        for q in 0..self.input.num_resources() {
            if !self.saturated[q] && self.usage[q] == self.input.capacity {
                self.saturated[q] = true;
                any = true;
            }
        }
        any
    }

    fn snapshot(&self, level: &Rational) -> FillState {
        FillState {
            level: level.clone(),
            active: (0..self.input.num_users())
                .filter(|&i| self.status[i] == Status::Active)
                .collect(),
            remaining: self
                .usage
                .iter()
                .map(|u| &self.input.capacity - u)
                .collect(),
        }
    }

    fn into_allocation(self) -> Result<EpochAllocation, AllocError> {
        if self
            .frozen
            .iter()
            .any(|f| matches!(f, FrozenReason::Unconstrained))
        {
            return Err(AllocError::Internal("user left unfrozen"));
        }
        let saturated = (0..self.input.num_resources())
            .filter(|&q| self.saturated[q])
            .collect();
        Ok(EpochAllocation {
            allocations: self.r,
            usage: self.usage,
            saturated,
            frozen: self.frozen,
        })
    }
}

/// Solves one epoch. See the module docs for the algorithm; the output is
/// independent of the processing order of simultaneous events.
pub fn allocate_epoch(input: &EpochInput) -> Result<EpochAllocation, AllocError> {
    allocate_epoch_traced(input).map(|(alloc, _)| alloc)
}

/// Like [`allocate_epoch`], also returning the [`FillState`] after the initial
/// sweep and after each processed event, for tests and diagnostics.
pub fn allocate_epoch_traced(
    input: &EpochInput,
) -> Result<(EpochAllocation, Vec<FillState>), AllocError> {
    let mut fill = Fill::new(input)?;
    let n = input.num_users();
    let mut states = Vec::new();

    // Users already satisfied by their floor never grow.
    for i in 0..n {
        if fill.status[i] == Status::Active && fill.at_demand(i) {
            fill.freeze(i, FrozenReason::DemandCap);
        }
    }
    fill.recompute_usage();
    for q in 0..input.num_resources() {
        if fill.usage[q] > input.capacity {
            return Err(AllocError::InfeasibleFloors { resource: q });
        }
    }
    // Floors alone may already saturate a resource (α = 1 instances).
    if fill.mark_new_saturations() {
        fill.freeze_on_saturation(true);
    }
    let initial_level = (0..n)
        .filter(|&i| fill.status[i] == Status::Active)
        .map(|i| fill.start_level(i))
        .min()
        .unwrap_or_else(Rational::zero);
    states.push(fill.snapshot(&initial_level));

    let mut level = initial_level;
    loop {
        let active: Vec<usize> = (0..n)
            .filter(|&i| fill.status[i] == Status::Active)
            .collect();
        if active.is_empty() {
            break;
        }
        let growing: Vec<usize> = active
            .iter()
            .copied()
            .filter(|&i| fill.start_level(i) <= level)
            .collect();
        if growing.is_empty() {
            // Jump to the next start event; no allocation changes in between.
            level = active
                .iter()
                .map(|&i| fill.start_level(i))
                .min()
                .expect("active nonempty");
            continue;
        }

        // Next event: a parked user starts, a grower hits her demand cap, or
        // a resource saturates. All candidates are strictly above `level`.
        let mut next: Option<Rational> = None;
        let mut consider = |cand: Rational| {
            if next.as_ref().is_none_or(|best| &cand < best) {
                next = Some(cand);
            }
        };
        for &i in &active {
            let start = fill.start_level(i);
            if start > level {
                consider(start);
            }
        }
        for &i in &growing {
            if let Demand::Finite(d) = &input.types[i].demand {
                consider((&input.cumulative[i] + d) / &input.weights[i]);
            }
        }
        for q in 0..input.num_resources() {
            let slope: Rational = growing
                .iter()
                .map(|&i| &input.weights[i] * &input.types[i].ratios[q])
                .sum();
            if slope.is_zero() {
                continue;
            }
            if fill.saturated[q] {
                return Err(AllocError::Internal("grower on a saturated resource"));
            }
            consider(&level + (&input.capacity - &fill.usage[q]) / slope);
        }
        let next = next.ok_or(AllocError::Internal("no event candidate"))?;
        if next <= level {
            return Err(AllocError::Internal("level failed to advance"));
        }

        for &i in &growing {
            fill.r[i] = clamp_growing(input, i, &fill.floors[i], &next);
        }
        fill.recompute_usage();
        level = next;

        if fill.mark_new_saturations() {
            fill.freeze_on_saturation(false);
        }
        for &i in &growing {
            if fill.status[i] == Status::Active && fill.at_demand(i) {
                fill.freeze(i, FrozenReason::DemandCap);
            }
        }
        states.push(fill.snapshot(&level));
    }

    let alloc = fill.into_allocation()?;
    debug_assert!(alloc
        .usage
        .iter()
        .all(|u| u <= &input.capacity));
    Ok((alloc, states))
}

/// `clamp_allocation` with the floor precomputed (hot path).
fn clamp_growing(input: &EpochInput, user: usize, floor: &Rational, level: &Rational) -> Rational {
    let raw = &input.weights[user] * level - &input.cumulative[user];
    let capped = input.types[user].demand.cap(&raw);
    if &capped < floor {
        floor.clone()
    } else {
        capped
    }
}

/// A user whose allocation could provably be raised: either no resource she
/// uses is saturated, or on every saturated resource she touches some other
/// user above her floor sits strictly higher (listed in `blockers`).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BottleneckViolation {
    pub user: usize,
    /// For each saturated resource the user touches: (resource, a strictly
    /// higher user who is above her own floor there). Empty means the user
    /// touches no saturated resource at all.
    pub blockers: Vec<(usize, usize)>,
}

/// Certifies max-min optimality: every user short of her demand must sit at a
/// bottleneck — a saturated resource she uses where nobody flexible (above
/// floor) sits strictly higher in normalized cumulative position. Returns the
/// violating users; empty output certifies the allocation.
pub fn check_bottleneck_optimality(
    input: &EpochInput,
    alloc: &EpochAllocation,
) -> Vec<BottleneckViolation> {
    let n = input.num_users();
    let level =
        |i: usize| (&input.cumulative[i] + &alloc.allocations[i]) / &input.weights[i];
    let w_sum: Rational = input.weights.iter().sum();
    let floor = |i: usize| {
        guarantee(
            &input.types[i].demand,
            &input.weights[i],
            &w_sum,
            &input.alpha,
            &input.capacity,
        )
    };
    let mut violations = Vec::new();
    for i in 0..n {
        let unmet = match &input.types[i].demand {
            Demand::Finite(d) => &alloc.allocations[i] < d,
            Demand::Unbounded => true,
        };
        if !unmet {
            continue;
        }
        let my_level = level(i);
        let mut blockers = Vec::new();
        let mut certified = false;
        for &q in &alloc.saturated {
            if input.types[i].ratios[q].is_zero() {
                continue;
            }
            let higher_flexible = (0..n).find(|&j| {
                j != i
                    && !input.types[j].ratios[q].is_zero()
                    && alloc.allocations[j] > floor(j)
                    && level(j) > my_level
            });
            match higher_flexible {
                None => {
                    certified = true;
                    break;
                }
                Some(j) => blockers.push((q, j)),
            }
        }
        if !certified {
            violations.push(BottleneckViolation { user: i, blockers });
        }
    }
    violations
}

/// A feasible two-user transfer that would improve the allocation in the
/// lexicographic max-min order, found by [`find_transfer_improvement`].
#[derive(Clone, Debug)]
pub struct TransferImprovement {
    pub gainer: usize,
    pub payer: usize,
    pub epsilon: Rational,
    pub payer_decrease: Rational,
}

/// Brute-force cross-check of optimality on small inputs: tries raising each
/// user by each ε from `epsilons` while lowering a single other user just
/// enough to restore feasibility, and reports a transfer whose resulting
/// sorted normalized-cumulative vector beats the solver's lexicographically.
/// Returns `None` when no improving transfer exists (optimality evidence).
pub fn find_transfer_improvement(
    input: &EpochInput,
    alloc: &EpochAllocation,
    epsilons: &[Rational],
) -> Option<TransferImprovement> {
    let n = input.num_users();
    let m = input.num_resources();
    let w_sum: Rational = input.weights.iter().sum();
    let floor: Vec<Rational> = (0..n)
        .map(|i| {
            guarantee(
                &input.types[i].demand,
                &input.weights[i],
                &w_sum,
                &input.alpha,
                &input.capacity,
            )
        })
        .collect();
    let base = sorted_levels(input, &alloc.allocations);
    for gainer in 0..n {
        for eps in epsilons {
            let raised = &alloc.allocations[gainer] + eps;
            if let Demand::Finite(d) = &input.types[gainer].demand {
                if &raised > d {
                    continue;
                }
            }
            for payer in 0..n {
                if payer == gainer {
                    continue;
                }
                // Smallest decrease of `payer` restoring every capacity.
                let mut decrease = Rational::zero();
                let mut feasible = true;
                for q in 0..m {
                    let overflow = &alloc.usage[q] + eps * &input.types[gainer].ratios[q]
                        - &input.capacity;
                    if overflow <= Rational::zero() {
                        continue;
                    }
                    let a_payer = &input.types[payer].ratios[q];
                    if a_payer.is_zero() {
                        feasible = false;
                        break;
                    }
                    let needed = overflow / a_payer;
                    if needed > decrease {
                        decrease = needed;
                    }
                }
                if !feasible {
                    continue;
                }
                let lowered = &alloc.allocations[payer] - &decrease;
                if lowered < floor[payer] {
                    continue;
                }
                let mut candidate = alloc.allocations.clone();
                candidate[gainer] = raised.clone();
                candidate[payer] = lowered;
                if sorted_levels(input, &candidate) > base {
                    return Some(TransferImprovement {
                        gainer,
                        payer,
                        epsilon: eps.clone(),
                        payer_decrease: decrease,
                    });
                }
            }
        }
    }
    None
}

/// Normalized cumulative positions sorted ascending — the max-min objective.
/// Lexicographic comparison of these vectors orders allocations by fairness.
fn sorted_levels(input: &EpochInput, allocations: &[Rational]) -> Vec<Rational> {
    let mut levels: Vec<Rational> = allocations
        .iter()
        .enumerate()
        .map(|(i, r)| (&input.cumulative[i] + r) / &input.weights[i])
        .collect();
    levels.sort();
    levels
}
