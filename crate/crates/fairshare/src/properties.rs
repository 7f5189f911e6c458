//! Executable checkers for the solver's fairness and incentive guarantees:
//! envy-freeness, sharing incentives, Pareto efficiency, over-report
//! futility, paired-history ordering, and utility-gain upper bounds. Each
//! checker returns a structured report carrying the minimum slack over
//! everything it quantified and, on failure, a concrete counterexample.

use crate::allocator::{allocate_epoch, AllocError, EpochInput};
use crate::engine::Trace;
use crate::model::{Scenario, UserEpochType};
use crate::rational::{format_rational, rat, Rational};
use crate::strategy::{
    search_best_deviation, search_overreport, DeviationOutcome, SearchConfig, StrategyError,
};
use num_traits::{One, Signed, Zero};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PropertyError {
    #[error("ρ undefined for zero-ratio instance")]
    ZeroRatioRho,
    #[error("ρ needs another user and a positive ratio to compare against")]
    RhoDegenerate,
    #[error("user index {user} out of range for {num_users} users")]
    UserOutOfRange { user: usize, num_users: usize },
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

/// A concrete witness of a failed check, precise enough to replay.
#[derive(Clone, Debug)]
pub struct Counterexample {
    /// Named index positions localizing the violation, e.g.
    /// `[("user", 0), ("epoch", 2)]`.
    pub location: Vec<(&'static str, usize)>,
    /// The side of the violated inequality that was guaranteed to be larger.
    pub lhs: Option<Rational>,
    /// The benchmark it fell short of.
    pub rhs: Option<Rational>,
    /// The violated claim in words, with exact values.
    pub description: String,
    /// JSON of the scenario that produced the violation, when one exists.
    pub scenario: Option<String>,
}

/// Outcome of one property check.
#[derive(Clone, Debug)]
pub struct PropertyReport {
    pub name: &'static str,
    pub pass: bool,
    /// How many quantified inequalities were actually evaluated; zero means
    /// the check passed vacuously.
    pub checked: usize,
    /// Minimum margin over every evaluated inequality (negative on failure).
    pub min_slack: Option<Rational>,
    pub counterexample: Option<Counterexample>,
    pub detail: String,
}

impl PropertyReport {
    fn vacuous(name: &'static str, detail: String) -> Self {
        PropertyReport {
            name,
            pass: true,
            checked: 0,
            min_slack: None,
            counterexample: None,
            detail,
        }
    }
}

/// The largest weighted ratio advantage user `i` holds over any other user
/// on any resource she uses in any epoch:
/// `max over k ≠ i, q, t with a_iq^t > 0 of w_i·a_iq^t / (w_k·a_kq^t)`.
///
/// Errors if any other user has a zero ratio on a resource-epoch where user
/// `i` has a positive one, since the quotient is then unbounded.
pub fn rho(scenario: &Scenario, user: usize) -> Result<Rational, PropertyError> {
    let n = scenario.num_users();
    if user >= n {
        return Err(PropertyError::UserOutOfRange {
            user,
            num_users: n,
        });
    }
    let own_weight = &scenario.weights[user];
    let mut best: Option<Rational> = None;
    for t in 0..scenario.num_epochs() {
        for (q, own_ratio) in scenario.type_of(user, t).ratios.iter().enumerate() {
            if own_ratio.is_zero() {
                continue;
            }
            for k in 0..n {
                if k == user {
                    continue;
                }
                let other_ratio = &scenario.type_of(k, t).ratios[q];
                if other_ratio.is_zero() {
                    return Err(PropertyError::ZeroRatioRho);
                }
                let value = own_weight * own_ratio / (&scenario.weights[k] * other_ratio);
                if best.as_ref().is_none_or(|b| &value > b) {
                    best = Some(value);
                }
            }
        }
    }
    best.ok_or(PropertyError::RhoDegenerate)
}

/// Verifies that no user ever prefers another user's accumulated bundles:
/// for every ordered pair (i, j) and epoch t, user i's cumulative utility
/// must cover what she could have extracted from user j's per-epoch
/// allocations, rescaled by the weight quotient and her worst exchange rate
/// `min over q with a_iq > 0 of a_jq/a_iq`, and capped by her demand.
///
/// Expects a truthful trace.
pub fn check_envy_freeness(scenario: &Scenario, trace: &Trace) -> PropertyReport {
    debug_assert!(trace.profile.is_truthful());
    const NAME: &str = "envy-freeness";
    let n = scenario.num_users();
    let mut checked = 0usize;
    let mut min_slack: Option<Rational> = None;
    let mut counterexample = None;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let mut benchmark = Rational::zero();
            for t in 0..trace.num_epochs() {
                let own = scenario.type_of(i, t);
                // Worst exchange rate from j's bundle shape into i's: the
                // first resource i needs that j's bundle under-supplies
                // limits how much of it i could consume.
                let exchange = own
                    .ratios
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| !a.is_zero())
                    .map(|(q, a)| &scenario.type_of(j, t).ratios[q] / a)
                    .min();
                if let Some(exchange) = exchange {
                    let claim = &trace.epochs[t].allocations[j] * &scenario.weights[i]
                        / &scenario.weights[j]
                        * exchange;
                    benchmark += own.demand.cap(&claim);
                }
                let slack = trace.cumulative_utility(i, t) - &benchmark;
                checked += 1;
                if slack.is_negative() && counterexample.is_none() {
                    counterexample = Some(Counterexample {
                        location: vec![("user", i), ("envies", j), ("epoch", t)],
                        lhs: Some(trace.cumulative_utility(i, t).clone()),
                        rhs: Some(benchmark.clone()),
                        description: format!(
                            "user {i} holds cumulative utility {} through epoch {t} but \
                             values user {j}'s bundles at {}",
                            format_rational(trace.cumulative_utility(i, t)),
                            format_rational(&benchmark),
                        ),
                        scenario: Some(scenario.to_json_string()),
                    });
                }
                if min_slack.as_ref().is_none_or(|m| &slack < m) {
                    min_slack = Some(slack);
                }
            }
        }
    }
    PropertyReport {
        name: NAME,
        pass: counterexample.is_none(),
        checked,
        min_slack,
        counterexample,
        detail: format!("{checked} ordered user pairs × epochs compared"),
    }
}

/// Verifies that each user's final utility is at least α times what the
/// per-epoch fair-share bundle `capacity·w_i/Σw` would have been worth to
/// her, summed over all epochs. Expects a truthful trace.
pub fn check_sharing_incentives(scenario: &Scenario, trace: &Trace) -> PropertyReport {
    debug_assert!(trace.profile.is_truthful());
    const NAME: &str = "sharing-incentives";
    let weight_sum = scenario.weight_sum();
    let mut checked = 0usize;
    let mut min_slack: Option<Rational> = None;
    let mut counterexample = None;
    for i in 0..scenario.num_users() {
        let mut fair_share_value = Rational::zero();
        for t in 0..scenario.num_epochs() {
            let share = &scenario.capacities[t] * &scenario.weights[i] / &weight_sum;
            fair_share_value += scenario.type_of(i, t).demand.cap(&share);
        }
        let benchmark = &scenario.alpha * fair_share_value;
        let total = trace.final_utility(i);
        let slack = &total - &benchmark;
        checked += 1;
        if slack.is_negative() && counterexample.is_none() {
            counterexample = Some(Counterexample {
                location: vec![("user", i)],
                lhs: Some(total.clone()),
                rhs: Some(benchmark.clone()),
                description: format!(
                    "user {i} ends with utility {} but the α-scaled fair-share bundle \
                     is worth {}",
                    format_rational(&total),
                    format_rational(&benchmark),
                ),
                scenario: Some(scenario.to_json_string()),
            });
        }
        if min_slack.as_ref().is_none_or(|m| &slack < m) {
            min_slack = Some(slack);
        }
    }
    PropertyReport {
        name: NAME,
        pass: counterexample.is_none(),
        checked,
        min_slack,
        counterexample,
        detail: format!("{checked} users compared against the α-scaled fair share"),
    }
}

/// Verifies per epoch, per user: either the reported demand is fully met or
/// some resource the user's reported ratios touch is used to exactly the
/// epoch's capacity. Works on any trace, truthful or not.
pub fn check_pareto(scenario: &Scenario, trace: &Trace) -> PropertyReport {
    const NAME: &str = "pareto-efficiency";
    let mut checked = 0usize;
    let mut counterexample = None;
    for t in 0..trace.num_epochs() {
        let record = &trace.epochs[t];
        for i in 0..scenario.num_users() {
            let reported = trace.profile.reported_type(scenario, i, t);
            let r = &record.allocations[i];
            let satisfied = reported.demand.as_finite().is_some_and(|d| r == d);
            let blocked = reported
                .ratios
                .iter()
                .enumerate()
                .any(|(q, a)| !a.is_zero() && record.usage[q] == scenario.capacities[t]);
            checked += 1;
            if !(satisfied || blocked) && counterexample.is_none() {
                let wanted = reported
                    .demand
                    .as_finite()
                    .map(format_rational)
                    .unwrap_or_else(|| "unbounded".into());
                counterexample = Some(Counterexample {
                    location: vec![("user", i), ("epoch", t)],
                    lhs: Some(r.clone()),
                    rhs: reported.demand.as_finite().cloned(),
                    description: format!(
                        "user {i} got {} of a reported demand of {wanted} in epoch {t} \
                         with no resource she uses at capacity",
                        format_rational(r),
                    ),
                    scenario: Some(scenario.to_json_string()),
                });
            }
        }
    }
    PropertyReport {
        name: NAME,
        pass: counterexample.is_none(),
        checked,
        min_slack: None,
        counterexample,
        detail: format!(
            "{checked} user-epoch cells; every shortfall pinned on a saturated resource"
        ),
    }
}

/// Verifies that over-reporting cannot beat under-reporting: the best
/// utility factor among profiles that exaggerate a demand or distort a
/// ratio vector must not exceed the best among pure demand reductions, at
/// matching grid resolution. Both values are recorded in the report.
pub fn check_no_overreport(
    scenario: &Scenario,
    coalition: &[usize],
    config: &SearchConfig,
) -> Result<PropertyReport, PropertyError> {
    const NAME: &str = "no-overreport-advantage";
    let fmt = |gamma: &Option<Rational>| {
        gamma
            .as_ref()
            .map(format_rational)
            .unwrap_or_else(|| "undefined".into())
    };
    let under = search_best_deviation(scenario, coalition, config)?;
    let Some(over) = search_overreport(scenario, coalition, config)? else {
        return Ok(PropertyReport::vacuous(
            NAME,
            format!(
                "no qualifying over-report exists; best under-report gamma = {}",
                fmt(&under.gamma_max)
            ),
        ));
    };
    let pass = over.gamma_max <= under.gamma_max;
    let min_slack = match (&under.gamma_max, &over.gamma_max) {
        (Some(u), Some(o)) => Some(u - o),
        _ => None,
    };
    let detail = format!(
        "best under-report gamma = {}; best over-report gamma = {}",
        fmt(&under.gamma_max),
        fmt(&over.gamma_max),
    );
    let counterexample = (!pass).then(|| Counterexample {
        location: coalition.iter().map(|&u| ("member", u)).collect(),
        lhs: under.gamma_max.clone(),
        rhs: over.gamma_max.clone(),
        description: format!(
            "an over-report reaches gamma = {} while the best under-report stops at {}",
            fmt(&over.gamma_max),
            fmt(&under.gamma_max),
        ),
        scenario: Some(scenario.to_json_string()),
    });
    Ok(PropertyReport {
        name: NAME,
        pass,
        checked: 1,
        min_slack,
        counterexample,
        detail,
    })
}

/// One side of a paired single-epoch comparison: the cumulative state the
/// epoch starts from and the reported types it runs under.
#[derive(Clone, Debug)]
pub struct EpochSide {
    pub cumulative: Vec<Rational>,
    pub types: Vec<UserEpochType>,
}

/// Two runs of the same epoch (same weights, floor share, and capacity)
/// from different histories and reports, for [`check_more_less`].
#[derive(Clone, Debug)]
pub struct PairedEpoch {
    pub weights: Vec<Rational>,
    pub alpha: Rational,
    pub capacity: Rational,
    pub left: EpochSide,
    pub right: EpochSide,
}

/// Runs both sides of a paired epoch and, wherever the outcome pattern
/// "user i gets strictly more on the right despite demanding no more, while
/// user j gets strictly less despite demanding no less" occurs with all
/// ratios of i and j positive, asserts the histories explain it. With a
/// single resource the conclusion is two-sided: user i entered the left run
/// at least as far ahead as j (per weight) and the right run at most as
/// far. With several resources, saturation patterns allow a user to be
/// passed over even from behind, and only the per-weight drift ordering
/// `(right_i − left_i)/w_i ≤ (right_j − left_j)/w_j` is guaranteed. Pairs
/// where the pattern never occurs make the check vacuous, which the report
/// counts separately via `checked == 0`.
pub fn check_more_less(pair: &PairedEpoch) -> Result<PropertyReport, PropertyError> {
    const NAME: &str = "more-less-ordering";
    let n = pair.weights.len();
    let run = |side: &EpochSide| -> Result<Vec<Rational>, PropertyError> {
        let output = allocate_epoch(&EpochInput {
            cumulative: side.cumulative.clone(),
            types: side.types.clone(),
            weights: pair.weights.clone(),
            alpha: pair.alpha.clone(),
            capacity: pair.capacity.clone(),
        })?;
        Ok(output.allocations)
    };
    let left = run(&pair.left)?;
    let right = run(&pair.right)?;
    let single_resource = pair
        .left
        .types
        .first()
        .map(|ty| ty.ratios.len() == 1)
        .unwrap_or(true);
    let positive = |side: &EpochSide, user: usize| {
        side.types[user].ratios.iter().all(|a| a.is_positive())
    };
    let mut checked = 0usize;
    let mut min_slack: Option<Rational> = None;
    let mut counterexample = None;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let triggered = left[i] < right[i]
                && pair.right.types[i].demand <= pair.left.types[i].demand
                && left[j] > right[j]
                && pair.left.types[j].demand <= pair.right.types[j].demand
                && positive(&pair.left, i)
                && positive(&pair.right, i)
                && positive(&pair.left, j)
                && positive(&pair.right, j);
            if !triggered {
                continue;
            }
            checked += 1;
            let left_i = &pair.left.cumulative[i] / &pair.weights[i];
            let left_j = &pair.left.cumulative[j] / &pair.weights[j];
            let right_i = &pair.right.cumulative[i] / &pair.weights[i];
            let right_j = &pair.right.cumulative[j] / &pair.weights[j];
            let slack = if single_resource {
                (&left_i - &left_j).min(&right_j - &right_i)
            } else {
                (&right_j - &left_j) - (&right_i - &left_i)
            };
            if slack.is_negative() && counterexample.is_none() {
                counterexample = Some(Counterexample {
                    location: vec![("gainer", i), ("loser", j)],
                    lhs: None,
                    rhs: None,
                    description: format!(
                        "user {i} gained and user {j} lost between runs, yet the \
                         entering per-weight totals were left ({}, {}) and right \
                         ({}, {}), which do not order them accordingly",
                        format_rational(&left_i),
                        format_rational(&left_j),
                        format_rational(&right_i),
                        format_rational(&right_j),
                    ),
                    scenario: None,
                });
            }
            if min_slack.as_ref().is_none_or(|m| &slack < m) {
                min_slack = Some(slack);
            }
        }
    }
    let detail = if checked == 0 {
        "vacuous: no ordered pair matched the gain/loss pattern".to_string()
    } else {
        format!("{checked} ordered pairs matched the gain/loss pattern")
    };
    Ok(PropertyReport {
        name: NAME,
        pass: counterexample.is_none(),
        checked,
        min_slack,
        counterexample,
        detail,
    })
}

/// Checks a deviation outcome against the sharpest utility-gain bound that
/// covers the scenario's shape:
///
/// - one resource, solo deviator i: `1 + max over j ≠ i of w_i/(w_i+w_j)`
///   (which is 3/2 under equal weights);
/// - one resource, coalition of two or more: 2;
/// - several resources, solo deviator i with every needed ratio positive:
///   `1 + ρ_i`.
///
/// Shapes outside these (zero ratios with several resources, multi-resource
/// coalitions, or ratio scales below the usual normalization) yield a
/// passing report stating that no bound applies.
pub fn check_upper_bounds(outcome: &DeviationOutcome, scenario: &Scenario) -> PropertyReport {
    const NAME: &str = "incentive-upper-bound";
    let no_bound = |why: &str| {
        PropertyReport::vacuous(NAME, format!("no bound applies ({why})"))
    };
    if scenario.subnormal_ratios {
        return no_bound("ratio scales below the usual normalization");
    }
    let coalition = &outcome.coalition;
    if coalition.is_empty() {
        return no_bound("empty coalition");
    }
    let bound_and_label: Option<(Rational, String)> = if scenario.num_resources() == 1 {
        if coalition.len() > 1 {
            Some((rat(2, 1), "coalition bound 2".to_string()))
        } else {
            let i = coalition[0];
            let own = &scenario.weights[i];
            (0..scenario.num_users())
                .filter(|&j| j != i)
                .map(|j| own / (own + &scenario.weights[j]))
                .max()
                .map(|advantage| {
                    let bound = Rational::one() + advantage;
                    let label = format!(
                        "solo bound 1 + max w_i/(w_i+w_j) = {}",
                        format_rational(&bound)
                    );
                    (bound, label)
                })
        }
    } else if coalition.len() == 1 {
        match rho(scenario, coalition[0]) {
            Ok(rho_value) => {
                let bound = Rational::one() + &rho_value;
                let label = format!(
                    "ratio-advantage solo bound 1 + rho = {} with rho = {}",
                    format_rational(&bound),
                    format_rational(&rho_value),
                );
                Some((bound, label))
            }
            Err(PropertyError::ZeroRatioRho) => {
                return no_bound("zero ratios with several resources");
            }
            Err(_) => return no_bound("rho is undefined here"),
        }
    } else {
        None
    };
    let Some((bound, label)) = bound_and_label else {
        return no_bound("no covered shape matches");
    };
    let Some(gamma) = &outcome.gamma_max else {
        return PropertyReport::vacuous(
            NAME,
            format!("{label}; the utility factor is undefined at every epoch"),
        );
    };
    let slack = &bound - gamma;
    let pass = !slack.is_negative();
    let counterexample = (!pass).then(|| Counterexample {
        location: coalition.iter().map(|&u| ("member", u)).collect(),
        lhs: Some(bound.clone()),
        rhs: Some(gamma.clone()),
        description: format!(
            "gamma_max = {} exceeds the applicable bound {}",
            format_rational(gamma),
            format_rational(&bound),
        ),
        scenario: Some(scenario.to_json_string()),
    });
    PropertyReport {
        name: NAME,
        pass,
        checked: 1,
        min_slack: Some(slack),
        counterexample,
        detail: format!(
            "{label}; gamma_max = {}; margin = {}",
            format_rational(gamma),
            format_rational(&(&bound - gamma)),
        ),
    }
}
