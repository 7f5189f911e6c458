//! Strategic analysis: how much can a user (or coalition) gain by lying?
//!
//! The central quantity is the per-epoch ratio γ^t between the coalition's
//! cumulative utility under a deviation and under truthful play, and its
//! maximum γ* over epochs. [`search_best_deviation`] looks for the most
//! profitable under-report on a multiplier grid; [`search_overreport`] does
//! the same over a grid extended with inflated demands and perturbed ratio
//! vectors; [`interval_analysis`] extracts the epoch intervals in which a
//! deviator is ahead of her truthful self.

use crate::engine::{run, truthful_trace, EngineError, Trace};
use crate::model::{Demand, ReportOverride, ReportProfile, Scenario};
use crate::rational::{format_rational, rat, Rational};
use num_traits::Zero;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use thiserror::Error;

/// A demand report expressed relative to the true demand.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Multiplier {
    /// Report `factor` times the true demand. Factor 0 on an unbounded true
    /// demand reports 0; any positive factor leaves unbounded unbounded.
    Times(Rational),
    /// Report unbounded demand outright.
    Unbounded,
}

impl Multiplier {
    pub fn apply(&self, demand: &Demand) -> Demand {
        match self {
            Multiplier::Times(c) => match demand {
                Demand::Finite(d) => Demand::finite(c * d),
                Demand::Unbounded if c.is_zero() => Demand::finite(Rational::zero()),
                Demand::Unbounded => Demand::Unbounded,
            },
            Multiplier::Unbounded => Demand::Unbounded,
        }
    }
}

impl fmt::Display for Multiplier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Multiplier::Times(c) => write!(f, "{}", format_rational(c)),
            Multiplier::Unbounded => write!(f, "unbounded"),
        }
    }
}

/// Search-space description for the deviation searches.
#[derive(Clone, Debug)]
pub struct SearchConfig {
    /// Demand-multiplier grid tried at every (member, epoch) slot.
    pub multipliers: Vec<Multiplier>,
    /// Epochs whose reports may deviate (`None` = every epoch).
    pub epochs: Option<Vec<usize>>,
    /// Exhaustive enumeration is used when the profile count stays within
    /// this budget; larger spaces fall back to seeded random sampling.
    pub budget: u64,
    /// Number of profiles drawn in sampling mode.
    pub samples: u64,
    /// Seed for sampling mode.
    pub seed: u64,
    /// Refuse to fall back to sampling: error out when over budget.
    pub require_exhaustive: bool,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            multipliers: vec![
                Multiplier::Times(rat(0, 1)),
                Multiplier::Times(rat(1, 4)),
                Multiplier::Times(rat(1, 2)),
                Multiplier::Times(rat(3, 4)),
                Multiplier::Times(rat(1, 1)),
            ],
            epochs: None,
            budget: 1_000_000,
            samples: 10_000,
            seed: 0,
            require_exhaustive: false,
        }
    }
}

/// The result of comparing one deviation against truthful play.
#[derive(Clone, Debug)]
pub struct DeviationOutcome {
    pub coalition: Vec<usize>,
    /// γ^t per epoch: coalition cumulative utility ratio, `None` where the
    /// truthful denominator is zero (the ratio is undefined there).
    pub gamma: Vec<Option<Rational>>,
    /// Largest defined γ^t, `None` when no epoch has a defined ratio.
    pub gamma_max: Option<Rational>,
    /// First epoch attaining `gamma_max` (0-based).
    pub best_epoch: Option<usize>,
    pub truthful: Trace,
    pub deviated: Trace,
}

#[derive(Debug, Error)]
pub enum StrategyError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("coalition must be nonempty")]
    EmptyCoalition,
    #[error("coalition member {user} out of range (n = {num_users})")]
    CoalitionOutOfRange { user: usize, num_users: usize },
    #[error("target epoch {epoch} out of range (T = {num_epochs})")]
    EpochOutOfRange { epoch: usize, num_epochs: usize },
    #[error("multiplier grid must be nonempty")]
    EmptyGrid,
    #[error(
        "exhaustive search requires {profiles} profile evaluations, over the budget of {budget}"
    )]
    BudgetExceeded { profiles: u128, budget: u64 },
}

fn gamma_series(
    truthful: &Trace,
    deviated: &Trace,
    coalition: &[usize],
) -> (Vec<Option<Rational>>, Option<Rational>, Option<usize>) {
    let mut gamma = Vec::with_capacity(truthful.num_epochs());
    let mut best: Option<(Rational, usize)> = None;
    for t in 0..truthful.num_epochs() {
        let denominator: Rational = coalition
            .iter()
            .map(|&i| truthful.cumulative_utility(i, t))
            .sum();
        if denominator.is_zero() {
            gamma.push(None);
            continue;
        }
        let numerator: Rational = coalition
            .iter()
            .map(|&i| deviated.cumulative_utility(i, t))
            .sum();
        let ratio = numerator / denominator;
        if best.as_ref().is_none_or(|(b, _)| &ratio > b) {
            best = Some((ratio.clone(), t));
        }
        gamma.push(Some(ratio));
    }
    let (gamma_max, best_epoch) = match best {
        Some((g, t)) => (Some(g), Some(t)),
        None => (None, None),
    };
    (gamma, gamma_max, best_epoch)
}

/// Replays the scenario truthfully and under `profile`, and reports the
/// coalition's utility-ratio series and its maximum.
pub fn incentive_ratio(
    scenario: &Scenario,
    profile: &ReportProfile,
) -> Result<DeviationOutcome, StrategyError> {
    if profile.coalition.is_empty() {
        return Err(StrategyError::EmptyCoalition);
    }
    let truthful = truthful_trace(scenario)?;
    let deviated = run(scenario, profile)?;
    let (gamma, gamma_max, best_epoch) = gamma_series(&truthful, &deviated, &profile.coalition);
    Ok(DeviationOutcome {
        coalition: profile.coalition.clone(),
        gamma,
        gamma_max,
        best_epoch,
        truthful,
        deviated,
    })
}

/// One (member, epoch) slot's options: a demand multiplier and, for
/// multi-resource scenarios in the over-report search, a ratio variant.
struct SlotSpace {
    multipliers: Vec<Multiplier>,
    ratio_variants: usize,
}

impl SlotSpace {
    fn options(&self) -> usize {
        self.multipliers.len() * self.ratio_variants
    }

    fn decode(&self, digit: usize) -> (&Multiplier, usize) {
        (
            &self.multipliers[digit % self.multipliers.len()],
            digit / self.multipliers.len(),
        )
    }
}

/// A reported ratio vector derived from the true one. Variant 0 is truthful;
/// 1 reports every ratio as 1; 2 halves the first entry strictly inside
/// (0, 1) — all keep the dominant entry at 1, so every variant is a valid
/// report. Variants that change nothing collapse to the truthful vector.
fn ratio_variant(true_ratios: &[Rational], variant: usize) -> Option<Vec<Rational>> {
    match variant {
        0 => None,
        1 => {
            let ones = vec![rat(1, 1); true_ratios.len()];
            (ones != true_ratios).then_some(ones)
        }
        2 => {
            let target = true_ratios
                .iter()
                .position(|a| !a.is_zero() && a < &rat(1, 1))?;
            let mut out = true_ratios.to_vec();
            out[target] = &out[target] / rat(2, 1);
            Some(out)
        }
        _ => unreachable!("ratio variant out of range"),
    }
}

struct SearchSpace<'a> {
    scenario: &'a Scenario,
    coalition: Vec<usize>,
    /// (member, epoch) in lexicographic slot order.
    slots: Vec<(usize, usize)>,
    space: SlotSpace,
}

impl<'a> SearchSpace<'a> {
    fn new(
        scenario: &'a Scenario,
        coalition: &[usize],
        config: &SearchConfig,
        ratio_variants: usize,
        multipliers: Vec<Multiplier>,
    ) -> Result<Self, StrategyError> {
        if coalition.is_empty() {
            return Err(StrategyError::EmptyCoalition);
        }
        if multipliers.is_empty() {
            return Err(StrategyError::EmptyGrid);
        }
        let mut coalition = coalition.to_vec();
        coalition.sort_unstable();
        coalition.dedup();
        for &user in &coalition {
            if user >= scenario.num_users() {
                return Err(StrategyError::CoalitionOutOfRange {
                    user,
                    num_users: scenario.num_users(),
                });
            }
        }
        let epochs: Vec<usize> = match &config.epochs {
            Some(list) => {
                let mut list = list.clone();
                list.sort_unstable();
                list.dedup();
                for &epoch in &list {
                    if epoch >= scenario.num_epochs() {
                        return Err(StrategyError::EpochOutOfRange {
                            epoch,
                            num_epochs: scenario.num_epochs(),
                        });
                    }
                }
                list
            }
            None => (0..scenario.num_epochs()).collect(),
        };
        let slots: Vec<(usize, usize)> = coalition
            .iter()
            .flat_map(|&i| epochs.iter().map(move |&t| (i, t)))
            .collect();
        Ok(SearchSpace {
            scenario,
            coalition,
            slots,
            space: SlotSpace {
                multipliers,
                ratio_variants,
            },
        })
    }

    fn total_profiles(&self) -> Option<u128> {
        let options = self.space.options() as u128;
        let mut total: u128 = 1;
        for _ in &self.slots {
            total = total.checked_mul(options)?;
        }
        Some(total)
    }

    /// Decodes an exhaustive-enumeration index into per-slot digits, first
    /// slot most significant, so index order is lexicographic digit order.
    fn digits_of(&self, mut index: u128) -> Vec<usize> {
        let options = self.space.options() as u128;
        let mut digits = vec![0usize; self.slots.len()];
        for d in digits.iter_mut().rev() {
            *d = (index % options) as usize;
            index /= options;
        }
        digits
    }

    /// Builds the report profile selected by `digits`, omitting overrides
    /// that change nothing.
    fn profile(&self, digits: &[usize]) -> ReportProfile {
        let mut reports = Vec::new();
        for (&(user, epoch), &digit) in self.slots.iter().zip(digits) {
            let (multiplier, variant) = self.space.decode(digit);
            let truth = self.scenario.type_of(user, epoch);
            let reported_demand = multiplier.apply(&truth.demand);
            let demand = (reported_demand != truth.demand).then_some(reported_demand);
            let ratios = ratio_variant(&truth.ratios, variant);
            if demand.is_some() || ratios.is_some() {
                reports.push(ReportOverride {
                    user,
                    epoch,
                    ratios,
                    demand,
                });
            }
        }
        ReportProfile {
            coalition: self.coalition.clone(),
            reports,
        }
    }

    /// Whether `digits` encodes at least one strict demand over-report or a
    /// changed ratio vector.
    fn qualifies_as_overreport(&self, digits: &[usize]) -> bool {
        self.slots.iter().zip(digits).any(|(&(user, epoch), &digit)| {
            let (multiplier, variant) = self.space.decode(digit);
            let truth = self.scenario.type_of(user, epoch);
            multiplier.apply(&truth.demand) > truth.demand
                || ratio_variant(&truth.ratios, variant).is_some()
        })
    }

    /// Evaluates digit vectors in parallel and returns the best, preferring
    /// larger γ* and, on ties, lexicographically smaller digits — a total
    /// order, so the parallel reduction is deterministic.
    fn best<I>(&self, candidates: I) -> Result<Option<DeviationOutcome>, StrategyError>
    where
        I: ParallelIterator<Item = Vec<usize>>,
    {
        let truthful = truthful_trace(self.scenario)?;
        let best = candidates
            .map(|digits| {
                let profile = self.profile(&digits);
                let deviated = run(self.scenario, &profile)?;
                let (_, gamma_max, _) = gamma_series(&truthful, &deviated, &self.coalition);
                Ok::<_, StrategyError>((gamma_max, digits))
            })
            .try_reduce_with(|a, b| {
                Ok(if a.0 > b.0 || (a.0 == b.0 && a.1 < b.1) {
                    a
                } else {
                    b
                })
            })
            .transpose()?;
        let Some((_, digits)) = best else {
            return Ok(None);
        };
        let profile = self.profile(&digits);
        let deviated = run(self.scenario, &profile)?;
        let (gamma, gamma_max, best_epoch) = gamma_series(&truthful, &deviated, &self.coalition);
        Ok(Some(DeviationOutcome {
            coalition: self.coalition.clone(),
            gamma,
            gamma_max,
            best_epoch,
            truthful,
            deviated,
        }))
    }

    /// All digit vectors, exhaustively or sampled, per the config's budget.
    fn run_search(
        &self,
        config: &SearchConfig,
        filter_overreport: bool,
    ) -> Result<Option<DeviationOutcome>, StrategyError> {
        let total = self.total_profiles();
        let exhaustive = total.is_some_and(|t| t <= u128::from(config.budget));
        if !exhaustive && config.require_exhaustive {
            return Err(StrategyError::BudgetExceeded {
                profiles: total.unwrap_or(u128::MAX),
                budget: config.budget,
            });
        }
        if exhaustive {
            let total = total.expect("within budget") as u64;
            self.best(
                (0..total)
                    .into_par_iter()
                    .map(|k| self.digits_of(u128::from(k)))
                    .filter(|digits| {
                        !filter_overreport || self.qualifies_as_overreport(digits)
                    }),
            )
        } else {
            // Sampling is sequential and seeded, so the candidate list — and
            // with the deterministic reduction, the result — is reproducible.
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            let options = self.space.options();
            let mut candidates = Vec::with_capacity(config.samples as usize);
            let mut attempts: u64 = 0;
            let attempt_cap = config.samples.saturating_mul(64).max(1024);
            while (candidates.len() as u64) < config.samples && attempts < attempt_cap {
                attempts += 1;
                let digits: Vec<usize> =
                    (0..self.slots.len()).map(|_| rng.gen_range(0..options)).collect();
                if filter_overreport && !self.qualifies_as_overreport(&digits) {
                    continue;
                }
                candidates.push(digits);
            }
            self.best(candidates.into_par_iter())
        }
    }
}

/// Searches the under-report grid for the coalition's most profitable
/// deviation. Exhaustive when the profile space fits the budget, otherwise
/// seeded sampling; deterministic either way given the config.
pub fn search_best_deviation(
    scenario: &Scenario,
    coalition: &[usize],
    config: &SearchConfig,
) -> Result<DeviationOutcome, StrategyError> {
    let space = SearchSpace::new(scenario, coalition, config, 1, config.multipliers.clone())?;
    let outcome = space.run_search(config, false)?;
    // The identity profile is always in the space, so a best always exists.
    outcome.ok_or(StrategyError::EmptyGrid)
}

/// Searches for the most profitable deviation among profiles containing at
/// least one strict demand over-report or perturbed ratio vector. The grid
/// is the config's extended with ×2 and unbounded demand multipliers, and —
/// for multi-resource scenarios — all-ones and halved-entry ratio variants.
/// Returns `None` when no such profile exists (every option is the truth).
pub fn search_overreport(
    scenario: &Scenario,
    coalition: &[usize],
    config: &SearchConfig,
) -> Result<Option<DeviationOutcome>, StrategyError> {
    let mut multipliers = config.multipliers.clone();
    for extra in [Multiplier::Times(rat(2, 1)), Multiplier::Unbounded] {
        if !multipliers.contains(&extra) {
            multipliers.push(extra);
        }
    }
    let ratio_variants = if scenario.num_resources() > 1 { 3 } else { 1 };
    let space = SearchSpace::new(scenario, coalition, config, ratio_variants, multipliers)?;
    space.run_search(config, true)
}

/// One maximal run of epochs in which the deviator's cumulative allocation
/// strictly exceeds her truthful one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Interval {
    /// First epoch strictly above (0-based).
    pub start: usize,
    /// First later epoch strictly below; `None` when the run never closes.
    pub end: Option<usize>,
    /// Epoch inside the run maximizing R̂/R, skipping epochs with R = 0;
    /// `None` when R = 0 throughout the run.
    pub best_epoch: Option<usize>,
    /// The maximized ratio at `best_epoch`.
    pub best_ratio: Option<Rational>,
}

/// The interval decomposition of a deviation, plus the per-epoch diagnostic
/// series f^t = min((r − r̂)⁺, (R − R̂)⁺).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalAnalysis {
    pub user: usize,
    pub intervals: Vec<Interval>,
    pub f: Vec<Rational>,
}

impl IntervalAnalysis {
    /// Interval start epochs, ascending.
    pub fn starts(&self) -> Vec<usize> {
        self.intervals.iter().map(|iv| iv.start).collect()
    }

    /// Recorded interval end epochs, ascending (unclosed runs contribute
    /// nothing).
    pub fn ends(&self) -> Vec<usize> {
        self.intervals.iter().filter_map(|iv| iv.end).collect()
    }
}

/// Decomposes a deviation into the intervals where `user` is ahead of her
/// truthful self. A run opens at the first epoch with R̂ > R while no run is
/// open, and closes at the first later epoch with R̂ < R; epochs of exact
/// equality neither open nor close a run. Both traces must replay the same
/// scenario.
pub fn interval_analysis(truthful: &Trace, deviated: &Trace, user: usize) -> IntervalAnalysis {
    assert_eq!(truthful.num_epochs(), deviated.num_epochs());
    let epochs = truthful.num_epochs();
    let mut intervals: Vec<Interval> = Vec::new();
    let mut open: Option<Interval> = None;
    let mut f = Vec::with_capacity(epochs);
    for t in 0..epochs {
        let truth_cum = truthful.cumulative(user, t);
        let dev_cum = deviated.cumulative(user, t);
        match &mut open {
            None => {
                if dev_cum > truth_cum {
                    let mut interval = Interval {
                        start: t,
                        end: None,
                        best_epoch: None,
                        best_ratio: None,
                    };
                    update_best(&mut interval, t, truth_cum, dev_cum);
                    open = Some(interval);
                }
            }
            Some(interval) => {
                if dev_cum < truth_cum {
                    interval.end = Some(t);
                    intervals.push(open.take().expect("interval open"));
                } else if dev_cum > truth_cum {
                    update_best(interval, t, truth_cum, dev_cum);
                }
            }
        }
        let r_gap = &truthful.epochs[t].allocations[user] - &deviated.epochs[t].allocations[user];
        let cum_gap = truth_cum - dev_cum;
        f.push(positive_part(r_gap).min(positive_part(cum_gap)));
    }
    if let Some(interval) = open {
        intervals.push(interval);
    }
    // Strict interleaving start < end < next start is forced by the state
    // machine; assert it as the structural contract of the output.
    for pair in intervals.windows(2) {
        let end = pair[0].end.expect("only the last interval may be open");
        assert!(pair[0].start < end && end < pair[1].start);
    }
    IntervalAnalysis {
        user,
        intervals,
        f,
    }
}

fn update_best(interval: &mut Interval, t: usize, truth_cum: &Rational, dev_cum: &Rational) {
    if truth_cum.is_zero() {
        return;
    }
    let ratio = dev_cum / truth_cum;
    if interval
        .best_ratio
        .as_ref()
        .is_none_or(|best| &ratio > best)
    {
        interval.best_ratio = Some(ratio);
        interval.best_epoch = Some(t);
    }
}

fn positive_part(x: Rational) -> Rational {
    if x < Rational::zero() {
        Rational::zero()
    } else {
        x
    }
}
