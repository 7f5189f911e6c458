//! Benchmark instance generators: families of scenarios with a designated
//! deviation whose payoff is known in closed form, plus a seeded random
//! scenario generator for the property suites.
//!
//! Each generator returns the scenario, the deviation profile, and the
//! predicted utility factor of that deviation, so a replay can be checked
//! against the prediction exactly in rational arithmetic.

use crate::model::{
    validate_scenario, Demand, ReportOverride, ReportProfile, Scenario, UserEpochType,
};
use crate::rational::{format_rational, rat, to_decimal, Rational};
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A generated scenario bundled with its designated deviation, the predicted
/// utility factor of that deviation, and a human-readable provenance note.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratedInstance {
    pub scenario: Scenario,
    pub deviation: ReportProfile,
    pub predicted_ratio: Rational,
    pub notes: String,
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("slack requirement violated: {0}")]
    SlackViolated(String),
}

fn finite_unit(demand: Rational) -> UserEpochType {
    UserEpochType {
        ratios: vec![rat(1, 1)],
        demand: Demand::finite(demand),
    }
}

/// Three users share 8 units of one resource for three epochs. User 0's
/// demands are (8, 8, 8), user 1's (8, 0, 8), user 2's (0, 8, 0). Zeroing
/// the epoch-1 report raises user 0's total utility from 9 to 10.
pub fn gen_example_10_9() -> GeneratedInstance {
    let demands = [[8, 8, 8], [8, 0, 8], [0, 8, 0]];
    let scenario = Scenario {
        weights: vec![rat(1, 1); 3],
        alpha: rat(0, 1),
        capacities: vec![rat(8, 1); 3],
        users: demands
            .iter()
            .map(|row| row.iter().map(|&d| finite_unit(rat(d, 1))).collect())
            .collect(),
        positive_ratios: true,
        subnormal_ratios: false,
    };
    validate_scenario(&scenario).expect("fixed instance is valid");
    let deviation = ReportProfile {
        coalition: vec![0],
        reports: vec![ReportOverride {
            user: 0,
            epoch: 0,
            ratios: None,
            demand: Some(Demand::finite(rat(0, 1))),
        }],
    };
    GeneratedInstance {
        scenario,
        deviation,
        predicted_ratio: rat(10, 9),
        notes: "example-10-9: 3 users share 8 units of one resource for 3 epochs; \
                user 0 reports zero demand in epoch 1 and multiplies her total \
                utility by 10/9."
            .into(),
    }
}

/// A single-resource family whose designated under-report approaches the
/// factor √2 as the phase lengths grow.
///
/// The schedule has four phases over `3m + k` epochs and `1 + m + k` users
/// (the deviator, m phase partners, k middle partners), with every epoch's
/// capacity equal to its largest demand. The cumulative demand levels
/// `L_1 ≤ … ≤ L_m` solve `L_{i+1} = 2·L_i − L_{i−1}/2 − 1/2` with `L_0 = 0`
/// and `3·L_m − L_{m−1} = 2`, which normalizes the deviator's truthful total
/// to exactly 1; the recursion is solved exactly in rationals by linearity
/// in the unknown `L_1`. The deviation reports zero demand through phase 2.
pub fn gen_sqrt2(m: usize, k: usize) -> Result<GeneratedInstance, InstanceError> {
    if m < 1 || k < 1 {
        return Err(InstanceError::InvalidParams(
            "sqrt2 requires m >= 1 and k >= 1".into(),
        ));
    }
    // L_i = hom[i]·c + par[i]: homogeneous and particular solutions of the
    // recursion, with c = L_1 fixed by the terminal condition.
    let mut hom = vec![Rational::zero(), Rational::one()];
    let mut par = vec![Rational::zero(), Rational::zero()];
    for i in 1..m {
        hom.push(rat(2, 1) * &hom[i] - &hom[i - 1] / rat(2, 1));
        par.push(rat(2, 1) * &par[i] - &par[i - 1] / rat(2, 1) - rat(1, 2));
    }
    let pivot = rat(3, 1) * &hom[m] - &hom[m - 1];
    if pivot.is_zero() {
        return Err(InstanceError::InvalidParams(
            "demand schedule solve is singular".into(),
        ));
    }
    let c = (rat(2, 1) + &par[m - 1] - rat(3, 1) * &par[m]) / pivot;
    let levels: Vec<Rational> = hom
        .iter()
        .zip(&par)
        .map(|(h, p)| h * &c + p)
        .collect();
    // steps[i] = L_{i+1} − L_i; positivity is what makes the schedule a
    // valid demand sequence, so verify it instead of assuming it.
    let steps: Vec<Rational> = levels.windows(2).map(|w| &w[1] - &w[0]).collect();
    if let Some(i) = steps.iter().position(|s| !s.is_positive()) {
        return Err(InstanceError::InvalidParams(format!(
            "demand schedule is not strictly increasing at step {i}"
        )));
    }
    let last_step = &steps[m - 1];
    debug_assert!(&levels[m] + last_step / rat(2, 1) == Rational::one());

    let n = 1 + m + k;
    let mut capacities: Vec<Rational> = Vec::with_capacity(3 * m + k);
    let mut users: Vec<Vec<UserEpochType>> = vec![Vec::new(); n];
    let push_epoch = |capacities: &mut Vec<Rational>,
                          users: &mut Vec<Vec<UserEpochType>>,
                          cap: &Rational,
                          participants: &[usize]| {
        capacities.push(cap.clone());
        for (i, row) in users.iter_mut().enumerate() {
            let demand = if participants.contains(&i) {
                cap.clone()
            } else {
                Rational::zero()
            };
            row.push(finite_unit(demand));
        }
    };
    // Phase 1: partner i builds up a lead of L_i, alone.
    for i in 1..=m {
        push_epoch(&mut capacities, &mut users, &levels[i], &[i]);
    }
    // Phase 2: the deviator contests each step against partner i. These are
    // the epochs the designated deviation zeroes out.
    let deviation_epochs: Vec<usize> = (m..2 * m).collect();
    for i in 1..=m {
        push_epoch(&mut capacities, &mut users, &steps[i - 1], &[0, i]);
    }
    // Phase 3: k epochs against fresh middle partners.
    for j in 1..=k {
        push_epoch(&mut capacities, &mut users, &levels[m], &[0, m + j]);
    }
    // Phase 4: wind-down against the partners in reverse, shrinking caps.
    push_epoch(&mut capacities, &mut users, last_step, &[0, m]);
    for i in (1..m).rev() {
        let cap = &levels[m] - &levels[i] + last_step / rat(2, 1);
        debug_assert!(
            cap == (&levels[i] + &steps[i - 1]) - (&levels[i + 1] + &steps[i])
        );
        if !cap.is_positive() {
            return Err(InstanceError::InvalidParams(format!(
                "wind-down capacity for partner {i} is not positive"
            )));
        }
        push_epoch(&mut capacities, &mut users, &cap, &[0, i]);
    }

    let scenario = Scenario {
        weights: vec![rat(1, 1); n],
        alpha: rat(0, 1),
        capacities,
        users,
        positive_ratios: true,
        subnormal_ratios: false,
    };
    validate_scenario(&scenario).expect("schedule construction is valid");
    let deviation = ReportProfile {
        coalition: vec![0],
        reports: deviation_epochs
            .iter()
            .map(|&epoch| ReportOverride {
                user: 0,
                epoch,
                ratios: None,
                demand: Some(Demand::finite(Rational::zero())),
            })
            .collect(),
    };
    let pow2k = Rational::new(1.into(), num_bigint::BigInt::from(2).pow(k as u32));
    let predicted_ratio =
        (&levels[1] + &steps[0] - &levels[m] * pow2k) / (&levels[m] + last_step / rat(2, 1));
    let notes = format!(
        "sqrt2 m={m} k={k}: single-resource schedule in four phases with {n} users; \
         user 0 reports zero demand through phase 2; predicted utility factor \
         {} ≈ {} (approaches sqrt(2) for large m and k).",
        format_rational(&predicted_ratio),
        to_decimal(&predicted_ratio, 6),
    );
    Ok(GeneratedInstance {
        scenario,
        deviation,
        predicted_ratio,
        notes,
    })
}

/// Closed-form predicted factor of the [`gen_multi_lower`] deviation:
/// `(1/(w·ε)) / (1/(1+w·ε) + δ/(w·ε·(w+δ)))`, which approaches
/// `1 + 1/(w·ε)` as `δ → 0`.
pub fn multi_lower_predicted(eps: &Rational, delta: &Rational, w: &Rational) -> Rational {
    let rho = Rational::one() / (w * eps);
    &rho / (Rational::one() / (Rational::one() + w * eps) + delta * &rho / (w + delta))
}

/// A two-resource, two-epoch instance where zeroing the epoch-1 report pays
/// almost the theoretical maximum factor `1 + 1/(w·ε)`.
///
/// User 0 (weight 1, ratios `(1, δ)`) and user 1 (weight `w`, ratios
/// `(ε, 1)`) have unbounded demands; `n1` filler users demand only in epoch
/// 1 and `n2` only in epoch 2, sized so that in the deviated replay the
/// contested resource stays slack while the fillers soak up the rest. Both
/// filler-count requirements are checked exactly and violations are
/// rejected, naming the failed requirement.
pub fn gen_multi_lower(
    eps: Rational,
    delta: Rational,
    w: Rational,
    n1: usize,
    n2: usize,
) -> Result<GeneratedInstance, InstanceError> {
    if !(delta.is_positive() && delta <= eps && eps < Rational::one()) {
        return Err(InstanceError::InvalidParams(
            "multi-lower requires 0 < delta <= eps < 1".into(),
        ));
    }
    if !w.is_positive() {
        return Err(InstanceError::InvalidParams(
            "multi-lower requires w > 0".into(),
        ));
    }
    let one = Rational::one();
    let n1_bound = (&one + &w * &eps) / (&w * &eps);
    if Rational::from_integer(n1.into()) < n1_bound {
        return Err(InstanceError::SlackViolated(format!(
            "n1 = {n1} is too small: keeping the second resource unsaturated in the \
             deviated first epoch needs n1 >= (1 + w*eps)/(w*eps) = {}",
            format_rational(&n1_bound)
        )));
    }
    let n2_bound = (&one - &delta) * (&w + &delta) / (&w * &delta * (&one - &eps));
    if Rational::from_integer(n2.into()) < n2_bound {
        return Err(InstanceError::SlackViolated(format!(
            "n2 = {n2} is too small: keeping the first resource unsaturated in the \
             deviated second epoch needs n2 >= (1-delta)*(w+delta)/(w*delta*(1-eps)) = {}",
            format_rational(&n2_bound)
        )));
    }
    let n = 2 + n1 + n2;
    let mut weights = vec![w.clone(); n];
    weights[0] = one.clone();
    let capacities = vec![
        &one + Rational::from_integer(n1.into()) * &w / (&one + &w * &eps),
        &delta / (&w * &eps)
            + Rational::from_integer(n2.into()) * &delta / (&eps * (&w + &delta)),
    ];
    let filler1_demand = &w / (&one + &w * &eps);
    let filler2_demand = &delta / (&eps * (&w + &delta));
    let unbounded = |ratios: Vec<Rational>| UserEpochType {
        ratios,
        demand: Demand::Unbounded,
    };
    let capped = |ratios: Vec<Rational>, demand: Rational| UserEpochType {
        ratios,
        demand: Demand::finite(demand),
    };
    let mut users = Vec::with_capacity(n);
    users.push(vec![
        unbounded(vec![one.clone(), delta.clone()]),
        unbounded(vec![one.clone(), delta.clone()]),
    ]);
    users.push(vec![
        unbounded(vec![eps.clone(), one.clone()]),
        unbounded(vec![eps.clone(), one.clone()]),
    ]);
    for _ in 0..n1 {
        users.push(vec![
            capped(vec![one.clone(), eps.clone()], filler1_demand.clone()),
            capped(vec![one.clone(), eps.clone()], Rational::zero()),
        ]);
    }
    for _ in 0..n2 {
        users.push(vec![
            capped(vec![eps.clone(), one.clone()], Rational::zero()),
            capped(vec![eps.clone(), one.clone()], filler2_demand.clone()),
        ]);
    }
    let scenario = Scenario {
        weights,
        alpha: rat(0, 1),
        capacities,
        users,
        positive_ratios: true,
        subnormal_ratios: false,
    };
    validate_scenario(&scenario).expect("construction is valid");
    let deviation = ReportProfile {
        coalition: vec![0],
        reports: vec![ReportOverride {
            user: 0,
            epoch: 0,
            ratios: None,
            demand: Some(Demand::finite(Rational::zero())),
        }],
    };
    let predicted_ratio = multi_lower_predicted(&eps, &delta, &w);
    let notes = format!(
        "multi-lower eps={} delta={} w={} n1={n1} n2={n2}: 2 resources, 2 epochs, \
         {n} users; user 0 reports zero demand in epoch 1; predicted utility \
         factor {} ≈ {} (approaches 1 + 1/(w*eps) as delta shrinks).",
        format_rational(&eps),
        format_rational(&delta),
        format_rational(&w),
        format_rational(&predicted_ratio),
        to_decimal(&predicted_ratio, 6),
    );
    Ok(GeneratedInstance {
        scenario,
        deviation,
        predicted_ratio,
        notes,
    })
}

/// An instance with zero ratio entries where OVER-reporting pays a factor
/// that grows linearly with the resource count.
///
/// One deviator needs nothing in epoch 1 but every resource except the
/// second thereafter; n² bulk users want resources 1 and 2 in epoch 1 only;
/// m−2 stragglers each dominate one later resource. Over-reporting demand 1
/// in epoch 1 buys the deviator worthless credit (her true utility there is
/// 0) and with it priority over every later epoch, whose capacity she then
/// takes whole instead of splitting.
pub fn gen_zero_ratio_overreport(n: usize) -> Result<GeneratedInstance, InstanceError> {
    if n < 3 {
        return Err(InstanceError::InvalidParams(
            "zero-ratio requires n >= 3".into(),
        ));
    }
    let n_i64 = i64::try_from(n)
        .ok()
        .filter(|v| v.checked_pow(3).is_some())
        .ok_or_else(|| InstanceError::InvalidParams("n is too large".into()))?;
    let n2 = n_i64 * n_i64;
    let n3 = n2 * n_i64;
    let m = usize::try_from(2 + n3 / (n2 + 1)).expect("small").max(3);
    let num_users = 1 + n * n + (m - 2);
    let num_epochs = m - 1;
    let group_count = i64::try_from(m - 2).expect("small");

    let deviator_ratios = {
        let mut r = vec![rat(1, 1); m];
        r[1] = rat(0, 1);
        r
    };
    let bulk_ratios = {
        let mut r = vec![rat(0, 1); m];
        r[0] = rat(1, 1);
        r[1] = rat(1, 1) - rat(1, n3);
        r
    };
    let straggler_ratios = |i: usize| {
        let mut r = vec![rat(0, 1); m];
        r[1] = rat(1, n_i64 * group_count);
        r[i + 1] = rat(1, 1);
        r
    };

    let mut users: Vec<Vec<UserEpochType>> = Vec::with_capacity(num_users);
    let epoch_demand = |active: bool| {
        if active {
            rat(1, n2)
        } else {
            rat(0, 1)
        }
    };
    // The deviator: nothing in epoch 1, 1/n² every epoch after.
    users.push(
        (0..num_epochs)
            .map(|t| UserEpochType {
                ratios: deviator_ratios.clone(),
                demand: Demand::finite(if t == 0 { rat(0, 1) } else { rat(1, n2) }),
            })
            .collect(),
    );
    // Bulk users: demand 1 in epoch 1, nothing after.
    for _ in 0..n * n {
        users.push(
            (0..num_epochs)
                .map(|t| UserEpochType {
                    ratios: bulk_ratios.clone(),
                    demand: Demand::finite(if t == 0 { rat(1, 1) } else { rat(0, 1) }),
                })
                .collect(),
        );
    }
    // Straggler i: demand 1 in epoch 1, then 1/n² in epoch i+1 only.
    for i in 1..=(m - 2) {
        users.push(
            (0..num_epochs)
                .map(|t| UserEpochType {
                    ratios: straggler_ratios(i),
                    demand: if t == 0 {
                        Demand::finite(rat(1, 1))
                    } else {
                        Demand::finite(epoch_demand(i == t))
                    },
                })
                .collect(),
        );
    }
    let mut capacities = vec![rat(1, n2); num_epochs];
    capacities[0] = rat(1, 1);
    let scenario = Scenario {
        weights: vec![rat(1, 1); num_users],
        alpha: rat(0, 1),
        capacities,
        users,
        positive_ratios: false,
        subnormal_ratios: false,
    };
    validate_scenario(&scenario).expect("construction is valid");
    let deviation = ReportProfile {
        coalition: vec![0],
        reports: vec![ReportOverride {
            user: 0,
            epoch: 0,
            ratios: None,
            demand: Some(Demand::finite(rat(1, 1))),
        }],
    };
    // Truthful total: (2/n²)(1 − 2^{−(m−2)}); deviated useful total:
    // (m−2)/n². Their quotient:
    let halving = Rational::new(1.into(), num_bigint::BigInt::from(2).pow((m - 2) as u32));
    let predicted_ratio =
        Rational::from_integer(group_count.into()) / (rat(2, 1) * (Rational::one() - halving));
    let notes = format!(
        "zero-ratio n={n}: {m} resources, {num_epochs} epochs, {num_users} users; \
         user 0 needs nothing in epoch 1 but over-reports demand 1 there, buying \
         priority over every later epoch; predicted utility factor {} ≈ {} \
         (grows linearly with the resource count).",
        format_rational(&predicted_ratio),
        to_decimal(&predicted_ratio, 6),
    );
    Ok(GeneratedInstance {
        scenario,
        deviation,
        predicted_ratio,
        notes,
    })
}

/// The two-user distilled form of [`gen_multi_lower`]: one resource, two
/// epochs, ratio scales below the usual normalization (user 0's epoch-2
/// ratio is δ, user 1's epoch-1 ratio is ε), capacities `(1, δ/ε)`, both
/// demands unbounded. Zeroing user 0's epoch-1 report pays
/// `(1/ε) / (1/(1+ε) + (δ/ε)/(1+δ))`, approaching `1 + 1/ε` as `δ → 0`.
pub fn gen_two_user_sketch(
    eps: Rational,
    delta: Rational,
) -> Result<GeneratedInstance, InstanceError> {
    if !(delta.is_positive() && delta <= Rational::one()) {
        return Err(InstanceError::InvalidParams(
            "two-user-sketch requires 0 < delta <= 1".into(),
        ));
    }
    if !(eps.is_positive() && eps < Rational::one()) {
        return Err(InstanceError::InvalidParams(
            "two-user-sketch requires 0 < eps < 1".into(),
        ));
    }
    let unbounded = |ratio: Rational| UserEpochType {
        ratios: vec![ratio],
        demand: Demand::Unbounded,
    };
    let scenario = Scenario {
        weights: vec![rat(1, 1); 2],
        alpha: rat(0, 1),
        capacities: vec![Rational::one(), &delta / &eps],
        users: vec![
            vec![unbounded(Rational::one()), unbounded(delta.clone())],
            vec![unbounded(eps.clone()), unbounded(Rational::one())],
        ],
        positive_ratios: true,
        subnormal_ratios: true,
    };
    validate_scenario(&scenario).expect("construction is valid");
    let deviation = ReportProfile {
        coalition: vec![0],
        reports: vec![ReportOverride {
            user: 0,
            epoch: 0,
            ratios: None,
            demand: Some(Demand::finite(Rational::zero())),
        }],
    };
    let one = Rational::one();
    let predicted_ratio = (&one / &eps)
        / (&one / (&one + &eps) + (&delta / &eps) / (&one + &delta));
    let notes = format!(
        "two-user-sketch eps={} delta={}: one resource, two epochs, ratio scales \
         below the usual normalization; user 0 reports zero demand in epoch 1; \
         predicted utility factor {} ≈ {} (approaches 1 + 1/eps as delta shrinks).",
        format_rational(&eps),
        format_rational(&delta),
        format_rational(&predicted_ratio),
        to_decimal(&predicted_ratio, 6),
    );
    Ok(GeneratedInstance {
        scenario,
        deviation,
        predicted_ratio,
        notes,
    })
}

/// Shape and value ranges for [`random_scenario`].
#[derive(Clone, Debug)]
pub struct RandomConfig {
    pub num_users: usize,
    pub num_resources: usize,
    pub num_epochs: usize,
    /// Floor share α, drawn uniformly from these.
    pub alphas: Vec<Rational>,
    /// Per-user weight, drawn uniformly from these.
    pub weights: Vec<Rational>,
    /// Finite demands are drawn as j/2 for j in 0..=max_demand_halves.
    pub max_demand_halves: i64,
    /// Percent chance (0..=100) that a (user, epoch) demand is unbounded.
    pub unbounded_percent: u8,
    /// Draw every ratio strictly positive.
    pub positive_ratios: bool,
    /// Per-epoch capacity, drawn uniformly from these.
    pub capacities: Vec<Rational>,
}

impl Default for RandomConfig {
    fn default() -> Self {
        RandomConfig {
            num_users: 3,
            num_resources: 1,
            num_epochs: 4,
            alphas: vec![rat(0, 1), rat(1, 2), rat(1, 1)],
            weights: vec![rat(1, 1)],
            max_demand_halves: 16,
            unbounded_percent: 10,
            positive_ratios: true,
            capacities: vec![rat(2, 1), rat(4, 1), rat(8, 1)],
        }
    }
}

/// Deterministic pseudo-random scenario: the same config and seed always
/// produce the same scenario. Ratios are drawn from the grid {0,…,4}/4 (or
/// {1,…,4}/4 when positivity is forced) with one entry pinned to 1, so
/// single-resource scenarios have all ratios exactly 1.
pub fn random_scenario(config: &RandomConfig, seed: u64) -> Scenario {
    assert!(
        config.num_users >= 1 && config.num_resources >= 1 && config.num_epochs >= 1,
        "random_scenario needs at least one user, resource, and epoch"
    );
    assert!(
        !config.alphas.is_empty() && !config.weights.is_empty() && !config.capacities.is_empty(),
        "random_scenario needs nonempty draw pools"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alpha = config.alphas[rng.gen_range(0..config.alphas.len())].clone();
    let weights: Vec<Rational> = (0..config.num_users)
        .map(|_| config.weights[rng.gen_range(0..config.weights.len())].clone())
        .collect();
    let capacities: Vec<Rational> = (0..config.num_epochs)
        .map(|_| config.capacities[rng.gen_range(0..config.capacities.len())].clone())
        .collect();
    let users: Vec<Vec<UserEpochType>> = (0..config.num_users)
        .map(|_| {
            (0..config.num_epochs)
                .map(|_| {
                    let ratios = if config.num_resources == 1 {
                        vec![rat(1, 1)]
                    } else {
                        let low = if config.positive_ratios { 1 } else { 0 };
                        let mut ratios: Vec<Rational> = (0..config.num_resources)
                            .map(|_| rat(rng.gen_range(low..=4), 4))
                            .collect();
                        let dominant = rng.gen_range(0..config.num_resources);
                        ratios[dominant] = rat(1, 1);
                        ratios
                    };
                    let demand = if rng.gen_range(0..100u8) < config.unbounded_percent {
                        Demand::Unbounded
                    } else {
                        Demand::finite(rat(rng.gen_range(0..=config.max_demand_halves), 2))
                    };
                    UserEpochType { ratios, demand }
                })
                .collect()
        })
        .collect();
    let scenario = Scenario {
        weights,
        alpha,
        capacities,
        users,
        positive_ratios: config.positive_ratios || config.num_resources == 1,
        subnormal_ratios: false,
    };
    validate_scenario(&scenario).expect("random_scenario constructs valid scenarios");
    scenario
}
