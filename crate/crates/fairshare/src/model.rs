//! Problem data and its invariants: per-epoch Leontief types, scenarios,
//! report profiles, validation, the per-epoch guaranteed floor, and the
//! conversion of per-resource capacities to the canonical scalar form.
//!
//! Conventions: each user's ratio vector is normalized so its maximum entry is
//! exactly 1 (the dominant resource); allocations are measured in units of the
//! dominant resource. All indices in this API are 0-based.

use crate::rational::{
    format_rational, serde_rational, serde_rational_vec, serde_rational_vec_opt, Rational,
};
use num_traits::{One, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::cmp::Ordering;
use std::fmt;
use thiserror::Error;

/// A per-epoch demand cap on the dominant resource: a nonnegative rational, or
/// unbounded ("take as much as the mechanism will give").
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Demand {
    Finite(Rational),
    Unbounded,
}

impl Demand {
    pub fn finite(x: Rational) -> Self {
        Demand::Finite(x)
    }

    pub fn is_unbounded(&self) -> bool {
        matches!(self, Demand::Unbounded)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Demand::Finite(d) if d.is_zero())
    }

    pub fn as_finite(&self) -> Option<&Rational> {
        match self {
            Demand::Finite(d) => Some(d),
            Demand::Unbounded => None,
        }
    }

    /// `min(self, x)` — caps a candidate amount by the demand.
    pub fn cap(&self, x: &Rational) -> Rational {
        match self {
            Demand::Finite(d) if d < x => d.clone(),
            _ => x.clone(),
        }
    }
}

impl PartialOrd for Demand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Unbounded compares greater than every finite value.
impl Ord for Demand {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Demand::Unbounded, Demand::Unbounded) => Ordering::Equal,
            (Demand::Unbounded, Demand::Finite(_)) => Ordering::Greater,
            (Demand::Finite(_), Demand::Unbounded) => Ordering::Less,
            (Demand::Finite(a), Demand::Finite(b)) => a.cmp(b),
        }
    }
}

impl fmt::Display for Demand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Demand::Finite(d) => write!(f, "{}", format_rational(d)),
            Demand::Unbounded => write!(f, "unbounded"),
        }
    }
}

impl Serialize for Demand {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Demand::Finite(d) => s.serialize_str(&format_rational(d)),
            Demand::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

impl<'de> Deserialize<'de> for Demand {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Text(String),
            Int(i64),
        }
        match Raw::deserialize(d)? {
            Raw::Text(s) if s == "unbounded" => Ok(Demand::Unbounded),
            Raw::Text(s) => crate::rational::parse_rational(&s)
                .map(Demand::Finite)
                .map_err(serde::de::Error::custom),
            Raw::Int(i) => Ok(Demand::Finite(Rational::from_integer(i.into()))),
        }
    }
}

/// One user's Leontief type in one epoch: resource ratios and a demand cap.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserEpochType {
    #[serde(with = "serde_rational_vec")]
    pub ratios: Vec<Rational>,
    pub demand: Demand,
}

impl UserEpochType {
    pub fn max_ratio(&self) -> Rational {
        self.ratios.iter().max().cloned().unwrap_or_else(Rational::zero)
    }
}

/// The full game: weights, the floor share α, one scalar capacity per epoch
/// (every resource has the same total after normalization), and the n×T grid
/// of true types. A user absent in an epoch is encoded with demand 0.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub weights: Vec<Rational>,
    pub alpha: Rational,
    pub capacities: Vec<Rational>,
    /// `users[i][t]` is user i's type in epoch t.
    pub users: Vec<Vec<UserEpochType>>,
    /// Declared promise that every ratio is strictly positive (checked by
    /// [`validate_scenario`]); several theorem bounds require it.
    pub positive_ratios: bool,
    /// Relaxes the max-ratio-equals-1 invariant to 0 < max ≤ 1. Needed only
    /// for hand-crafted instances whose mechanics depend on sub-unit dominant
    /// ratios; everything else should stay in canonical form.
    pub subnormal_ratios: bool,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn num_epochs(&self) -> usize {
        self.capacities.len()
    }

    pub fn num_resources(&self) -> usize {
        self.users
            .first()
            .and_then(|row| row.first())
            .map_or(0, |ty| ty.ratios.len())
    }

    pub fn weight_sum(&self) -> Rational {
        self.weights.iter().sum()
    }

    pub fn type_of(&self, user: usize, epoch: usize) -> &UserEpochType {
        &self.users[user][epoch]
    }

    /// True iff every ratio of every user and epoch is strictly positive
    /// (computed from the data, independent of the declared flag).
    pub fn all_ratios_positive(&self) -> bool {
        self.users
            .iter()
            .flatten()
            .all(|ty| ty.ratios.iter().all(|a| a > &Rational::zero()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let file: ScenarioFile = serde_json::from_str(text)?;
        file.into_scenario()
    }
}

/// On-disk scenario format. `n`, `m`, and `T` are stored redundantly and
/// checked against the arrays on load; rationals travel as "p/q" strings.
#[derive(Serialize, Deserialize)]
struct ScenarioFile {
    n: usize,
    m: usize,
    #[serde(rename = "T")]
    epochs: usize,
    #[serde(with = "serde_rational")]
    alpha: Rational,
    #[serde(with = "serde_rational_vec")]
    weights: Vec<Rational>,
    #[serde(with = "serde_rational_vec")]
    capacities: Vec<Rational>,
    users: Vec<Vec<UserEpochType>>,
    #[serde(default, skip_serializing_if = "is_false")]
    positive_ratios: bool,
    #[serde(default, skip_serializing_if = "is_false")]
    subnormal_ratios: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        ScenarioFile {
            n: s.num_users(),
            m: s.num_resources(),
            epochs: s.num_epochs(),
            alpha: s.alpha.clone(),
            weights: s.weights.clone(),
            capacities: s.capacities.clone(),
            users: s.users.clone(),
            positive_ratios: s.positive_ratios,
            subnormal_ratios: s.subnormal_ratios,
        }
    }
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ModelError> {
        let scenario = Scenario {
            weights: self.weights,
            alpha: self.alpha,
            capacities: self.capacities,
            users: self.users,
            positive_ratios: self.positive_ratios,
            subnormal_ratios: self.subnormal_ratios,
        };
        if scenario.num_users() != self.n {
            return Err(ModelError::Shape(format!(
                "n mismatch: header says {}, users array has {}",
                self.n,
                scenario.num_users()
            )));
        }
        if scenario.num_resources() != self.m {
            return Err(ModelError::Shape(format!(
                "m mismatch: header says {}, ratio vectors have {}",
                self.m,
                scenario.num_resources()
            )));
        }
        if scenario.num_epochs() != self.epochs {
            return Err(ModelError::Shape(format!(
                "T mismatch: header says {}, capacities array has {}",
                self.epochs,
                scenario.num_epochs()
            )));
        }
        Ok(scenario)
    }
}

/// A sparse override of one user's reported type in one epoch. `None` fields
/// fall back to the truth.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportOverride {
    pub user: usize,
    pub epoch: usize,
    #[serde(
        default,
        with = "serde_rational_vec_opt",
        skip_serializing_if = "Option::is_none"
    )]
    pub ratios: Option<Vec<Rational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<Demand>,
}

/// A joint deviation: the coalition of misreporting users plus their per-epoch
/// reported types. Users outside the coalition always report truthfully; the
/// coalition also scopes the utility sums in incentive-ratio computations.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportProfile {
    pub coalition: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reports: Vec<ReportOverride>,
}

impl ReportProfile {
    /// The truthful profile: empty coalition, no overrides.
    pub fn truthful() -> Self {
        ReportProfile::default()
    }

    pub fn is_truthful(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn lookup(&self, user: usize, epoch: usize) -> Option<&ReportOverride> {
        self.reports
            .iter()
            .find(|o| o.user == user && o.epoch == epoch)
    }

    /// The type user `user` reports in `epoch`: the truth with any override
    /// fields applied on top.
    pub fn reported_type(&self, scenario: &Scenario, user: usize, epoch: usize) -> UserEpochType {
        let truth = scenario.type_of(user, epoch);
        match self.lookup(user, epoch) {
            None => truth.clone(),
            Some(o) => UserEpochType {
                ratios: o.ratios.clone().unwrap_or_else(|| truth.ratios.clone()),
                demand: o.demand.clone().unwrap_or_else(|| truth.demand.clone()),
            },
        }
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("profile serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("user count must be at least 2 (got {0})")]
    TooFewUsers(usize),
    #[error("epoch count must be at least 1")]
    NoEpochs,
    #[error("resource count must be at least 1")]
    NoResources,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("weights strictly positive: weight of user {user} is {value}")]
    NonPositiveWeight { user: usize, value: String },
    #[error("alpha must lie in [0, 1] (got {0})")]
    AlphaOutOfRange(String),
    #[error("capacity must be strictly positive (epoch {epoch})")]
    NonPositiveCapacity { epoch: usize },
    #[error("ratio out of range [0, 1] (user {user}, epoch {epoch}, resource {resource})")]
    RatioOutOfRange {
        user: usize,
        epoch: usize,
        resource: usize,
    },
    #[error("max ratio must equal 1 (user {user}, epoch {epoch})")]
    MaxRatioNotOne { user: usize, epoch: usize },
    #[error("max ratio must be positive (user {user}, epoch {epoch})")]
    MaxRatioNotPositive { user: usize, epoch: usize },
    #[error("demand must be nonnegative (user {user}, epoch {epoch})")]
    NegativeDemand { user: usize, epoch: usize },
    #[error(
        "positive-ratios flag set but ratio is zero (user {user}, epoch {epoch}, resource {resource})"
    )]
    PositiveRatiosViolated {
        user: usize,
        epoch: usize,
        resource: usize,
    },
    #[error("invalid report profile: {0}")]
    Profile(String),
    #[error("floors exceed capacity (epoch {epoch}, resource {resource}); alpha > 1 or corrupt data")]
    FloorsInfeasible { epoch: usize, resource: usize },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Checks every scenario invariant; `Ok(())` leaves the scenario usable as-is.
///
/// Beyond per-field ranges this verifies the floor-feasibility property: the
/// α-floors alone never exceed any resource capacity (they sum to at most α𝓡
/// because ratios are ≤ 1), so the epoch solver always has a feasible start.
pub fn validate_scenario(s: &Scenario) -> Result<(), ModelError> {
    let n = s.num_users();
    if n < 2 {
        return Err(ModelError::TooFewUsers(n));
    }
    let t_len = s.num_epochs();
    if t_len == 0 {
        return Err(ModelError::NoEpochs);
    }
    let m = s.num_resources();
    if m == 0 {
        return Err(ModelError::NoResources);
    }
    if s.weights.len() != n {
        return Err(ModelError::Shape(format!(
            "{} weights for {} users",
            s.weights.len(),
            n
        )));
    }
    for (i, w) in s.weights.iter().enumerate() {
        if w <= &Rational::zero() {
            return Err(ModelError::NonPositiveWeight {
                user: i,
                value: format_rational(w),
            });
        }
    }
    if s.alpha < Rational::zero() || s.alpha > Rational::one() {
        return Err(ModelError::AlphaOutOfRange(format_rational(&s.alpha)));
    }
    for (t, cap) in s.capacities.iter().enumerate() {
        if cap <= &Rational::zero() {
            return Err(ModelError::NonPositiveCapacity { epoch: t });
        }
    }
    for (i, row) in s.users.iter().enumerate() {
        if row.len() != t_len {
            return Err(ModelError::Shape(format!(
                "user {} has {} epochs, capacities have {}",
                i,
                row.len(),
                t_len
            )));
        }
        for (t, ty) in row.iter().enumerate() {
            validate_type(ty, s, i, t, m)?;
        }
    }
    // Floor feasibility: sum of guaranteed floors per resource fits, exactly.
    let w_sum = s.weight_sum();
    for t in 0..t_len {
        let cap = &s.capacities[t];
        for q in 0..m {
            let mut used = Rational::zero();
            for i in 0..n {
                let ty = s.type_of(i, t);
                let g = guarantee(&ty.demand, &s.weights[i], &w_sum, &s.alpha, cap);
                used += g * &ty.ratios[q];
            }
            if &used > cap {
                return Err(ModelError::FloorsInfeasible {
                    epoch: t,
                    resource: q,
                });
            }
        }
    }
    Ok(())
}

fn validate_type(
    ty: &UserEpochType,
    s: &Scenario,
    user: usize,
    epoch: usize,
    m: usize,
) -> Result<(), ModelError> {
    if ty.ratios.len() != m {
        return Err(ModelError::Shape(format!(
            "user {} epoch {} has {} ratios, expected {}",
            user,
            epoch,
            ty.ratios.len(),
            m
        )));
    }
    for (q, a) in ty.ratios.iter().enumerate() {
        if a < &Rational::zero() || a > &Rational::one() {
            return Err(ModelError::RatioOutOfRange {
                user,
                epoch,
                resource: q,
            });
        }
        if s.positive_ratios && a.is_zero() {
            return Err(ModelError::PositiveRatiosViolated {
                user,
                epoch,
                resource: q,
            });
        }
    }
    let max = ty.max_ratio();
    if s.subnormal_ratios {
        if max.is_zero() {
            return Err(ModelError::MaxRatioNotPositive { user, epoch });
        }
    } else if !max.is_one() {
        return Err(ModelError::MaxRatioNotOne { user, epoch });
    }
    if let Demand::Finite(d) = &ty.demand {
        if d < &Rational::zero() {
            return Err(ModelError::NegativeDemand { user, epoch });
        }
    }
    Ok(())
}

/// Checks a report profile against a scenario: coalition indices in range and
/// duplicate-free, overrides only for coalition members and valid epochs, and
/// overridden types as well-formed as the scenario demands.
pub fn validate_profile(profile: &ReportProfile, scenario: &Scenario) -> Result<(), ModelError> {
    let n = scenario.num_users();
    let t_len = scenario.num_epochs();
    let m = scenario.num_resources();
    let mut seen = vec![false; n];
    for &i in &profile.coalition {
        if i >= n {
            return Err(ModelError::Profile(format!(
                "coalition user {i} out of range (n = {n})"
            )));
        }
        if seen[i] {
            return Err(ModelError::Profile(format!("duplicate coalition user {i}")));
        }
        seen[i] = true;
    }
    for o in &profile.reports {
        if o.user >= n || !seen[o.user] {
            return Err(ModelError::Profile(format!(
                "override for user {} who is not in the coalition",
                o.user
            )));
        }
        if o.epoch >= t_len {
            return Err(ModelError::Profile(format!(
                "override epoch {} out of range (T = {})",
                o.epoch, t_len
            )));
        }
        let reported = profile.reported_type(scenario, o.user, o.epoch);
        validate_type(&reported, scenario, o.user, o.epoch, m)?;
    }
    Ok(())
}

/// The guaranteed per-epoch floor: `min(demand, α·capacity·w_i/Σw)`.
/// With unbounded demand the fair-share term alone applies.
pub fn guarantee(
    demand: &Demand,
    weight: &Rational,
    weight_sum: &Rational,
    alpha: &Rational,
    capacity: &Rational,
) -> Rational {
    let share = alpha * capacity * weight / weight_sum;
    demand.cap(&share)
}

/// Converts per-resource capacities `per_resource[t][q]` into the canonical
/// scalar-capacity form: every epoch's capacity becomes 𝓡 = min over q, each
/// resource's units are rescaled by 𝓡/C_q, and each user's ratio vector is
/// re-normalized to max 1 with the demand scaled by the same factor. The
/// demanded amount of every resource in original units is preserved exactly.
///
/// The input scenario's own `capacities` field is ignored and replaced.
pub fn normalize_capacities(
    per_resource: &[Vec<Rational>],
    scenario: &Scenario,
) -> Result<Scenario, ModelError> {
    let t_len = scenario.num_epochs();
    let m = scenario.num_resources();
    if per_resource.len() != t_len {
        return Err(ModelError::Shape(format!(
            "{} capacity rows for {} epochs",
            per_resource.len(),
            t_len
        )));
    }
    let mut capacities = Vec::with_capacity(t_len);
    let mut users = scenario.users.clone();
    for (t, row) in per_resource.iter().enumerate() {
        if row.len() != m {
            return Err(ModelError::Shape(format!(
                "epoch {} has {} capacities, expected {}",
                t,
                row.len(),
                m
            )));
        }
        if row.iter().any(|cap| cap <= &Rational::zero()) {
            return Err(ModelError::NonPositiveCapacity { epoch: t });
        }
        let pooled = row.iter().min().expect("m >= 1").clone();
        for (i, user_row) in users.iter_mut().enumerate() {
            let ty = &mut user_row[t];
            // Unit change: one original unit of resource q is 𝓡/C_q new units.
            let rescaled: Vec<Rational> = ty
                .ratios
                .iter()
                .zip(row)
                .map(|(a, c)| a * &pooled / c)
                .collect();
            let max = rescaled.iter().max().expect("m >= 1").clone();
            if max.is_zero() {
                // All-zero ratios can only come from an invalid input type.
                return Err(ModelError::MaxRatioNotPositive { user: i, epoch: t });
            }
            ty.ratios = rescaled.iter().map(|a| a / &max).collect();
            if let Demand::Finite(d) = &ty.demand {
                ty.demand = Demand::Finite(d * &max);
            }
        }
        capacities.push(pooled);
    }
    Ok(Scenario {
        weights: scenario.weights.clone(),
        alpha: scenario.alpha.clone(),
        capacities,
        users,
        positive_ratios: scenario.positive_ratios,
        subnormal_ratios: false,
    })
}
