//! Multi-epoch replay: runs a scenario under truthful or misreported types,
//! carrying cumulative allocations across epochs and scoring true utilities.
//!
//! The allocator only ever sees reports — reported ratios, reported demands,
//! and the running total of what those reports earned. True types enter
//! exclusively through utility accounting: a user who misreports receives a
//! bundle shaped for the reported type, and only the largest fraction of it
//! usable under her true ratios, capped by her true demand, counts.

use crate::allocator::{allocate_epoch, AllocError, EpochInput, FrozenReason};
use crate::model::{ReportProfile, Scenario, UserEpochType};
use crate::rational::{format_rational, to_decimal, Rational};
use num_traits::{One, Zero};
use std::io::Write;
use thiserror::Error;

/// Everything recorded about one epoch of a replay.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EpochRecord {
    /// Allocations received this epoch, in reported dominant-resource units.
    pub allocations: Vec<Rational>,
    /// Cumulative allocations through this epoch.
    pub cumulative: Vec<Rational>,
    /// Ratio penalties: the largest fraction of the received bundle usable
    /// under the true ratios (1 when ratios were reported truthfully).
    pub penalties: Vec<Rational>,
    /// True utilities this epoch.
    pub utilities: Vec<Rational>,
    /// Cumulative true utilities through this epoch.
    pub cumulative_utilities: Vec<Rational>,
    /// Per-resource usage.
    pub usage: Vec<Rational>,
    /// Saturated resources, ascending.
    pub saturated: Vec<usize>,
    /// Why each user's fill stopped.
    pub frozen: Vec<FrozenReason>,
}

/// A full replay, self-describing: one record per epoch plus the report
/// profile that produced it (truthful when the profile is empty).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub profile: ReportProfile,
    pub epochs: Vec<EpochRecord>,
}

impl Trace {
    pub fn num_epochs(&self) -> usize {
        self.epochs.len()
    }

    pub fn num_users(&self) -> usize {
        self.epochs.first().map_or(0, |e| e.allocations.len())
    }

    /// Cumulative allocation of `user` after `epoch` (0-based).
    pub fn cumulative(&self, user: usize, epoch: usize) -> &Rational {
        &self.epochs[epoch].cumulative[user]
    }

    /// Cumulative true utility of `user` after `epoch` (0-based).
    pub fn cumulative_utility(&self, user: usize, epoch: usize) -> &Rational {
        &self.epochs[epoch].cumulative_utilities[user]
    }

    /// Final cumulative allocation of `user`.
    pub fn final_cumulative(&self, user: usize) -> Rational {
        self.epochs
            .last()
            .map_or_else(Rational::zero, |e| e.cumulative[user].clone())
    }

    /// Final cumulative true utility of `user`.
    pub fn final_utility(&self, user: usize) -> Rational {
        self.epochs
            .last()
            .map_or_else(Rational::zero, |e| e.cumulative_utilities[user].clone())
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Alloc(#[from] AllocError),
    #[error("trace export failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("trace export failed: {0}")]
    Io(#[from] std::io::Error),
}

/// The largest multiple of the true ratio vector that fits inside one unit of
/// the reported bundle: min over the true positive support of â_q/a_q.
///
/// Truthful reports give exactly 1. A report of 0 on a truly needed resource
/// makes the bundle useless — the returned 0 is the degenerate-report flag.
/// Under canonical normalization (max ratio 1) the result never exceeds 1;
/// reported bundles that oversupply some resource simply waste the excess.
pub fn ratio_penalty(true_ratios: &[Rational], reported_ratios: &[Rational]) -> Rational {
    assert_eq!(true_ratios.len(), reported_ratios.len());
    true_ratios
        .iter()
        .zip(reported_ratios)
        .filter(|(a, _)| !a.is_zero())
        .map(|(a, reported)| reported / a)
        .min()
        .unwrap_or_else(Rational::one)
}

/// Replays the scenario with the profile's reports in force, one allocation
/// round per epoch. Pure: identical inputs yield identical traces.
///
/// Both inputs must already be validated; the replay trusts them.
pub fn run(scenario: &Scenario, profile: &ReportProfile) -> Result<Trace, EngineError> {
    let n = scenario.num_users();
    let mut cumulative = vec![Rational::zero(); n];
    let mut cumulative_utilities = vec![Rational::zero(); n];
    let mut epochs = Vec::with_capacity(scenario.num_epochs());
    for t in 0..scenario.num_epochs() {
        let types: Vec<UserEpochType> = (0..n)
            .map(|i| profile.reported_type(scenario, i, t))
            .collect();
        let input = EpochInput {
            cumulative,
            types,
            weights: scenario.weights.clone(),
            alpha: scenario.alpha.clone(),
            capacity: scenario.capacities[t].clone(),
        };
        let alloc = allocate_epoch(&input)?;
        let mut penalties = Vec::with_capacity(n);
        let mut utilities = Vec::with_capacity(n);
        for i in 0..n {
            let truth = scenario.type_of(i, t);
            let lambda = ratio_penalty(&truth.ratios, &input.types[i].ratios);
            let useful = &alloc.allocations[i] * &lambda;
            let u = truth.demand.cap(&useful);
            cumulative_utilities[i] = &cumulative_utilities[i] + &u;
            penalties.push(lambda);
            utilities.push(u);
        }
        cumulative = input
            .cumulative
            .iter()
            .zip(&alloc.allocations)
            .map(|(c, r)| c + r)
            .collect();
        epochs.push(EpochRecord {
            allocations: alloc.allocations,
            cumulative: cumulative.clone(),
            penalties,
            utilities,
            cumulative_utilities: cumulative_utilities.clone(),
            usage: alloc.usage,
            saturated: alloc.saturated,
            frozen: alloc.frozen,
        });
    }
    Ok(Trace {
        profile: profile.clone(),
        epochs,
    })
}

/// [`run`] with the empty (truthful) profile.
pub fn truthful_trace(scenario: &Scenario) -> Result<Trace, EngineError> {
    run(scenario, &ReportProfile::truthful())
}

/// Writes the trace as CSV with one row per (epoch, user), each rational in
/// both exact `p/q` form and 12-significant-digit decimal. Indices 0-based.
pub fn write_trace_csv<W: Write>(trace: &Trace, writer: W) -> Result<(), EngineError> {
    let mut out = csv::Writer::from_writer(writer);
    out.write_record([
        "epoch",
        "user",
        "r",
        "r_decimal",
        "R",
        "R_decimal",
        "lambda_hat",
        "lambda_hat_decimal",
        "u",
        "u_decimal",
        "U",
        "U_decimal",
    ])?;
    for (t, rec) in trace.epochs.iter().enumerate() {
        for i in 0..rec.allocations.len() {
            let dual = |x: &Rational| [format_rational(x), to_decimal(x, 12)];
            let [r, r_dec] = dual(&rec.allocations[i]);
            let [cum, cum_dec] = dual(&rec.cumulative[i]);
            let [lam, lam_dec] = dual(&rec.penalties[i]);
            let [u, u_dec] = dual(&rec.utilities[i]);
            let [cu, cu_dec] = dual(&rec.cumulative_utilities[i]);
            out.write_record([
                t.to_string(),
                i.to_string(),
                r,
                r_dec,
                cum,
                cum_dec,
                lam,
                lam_dec,
                u,
                u_dec,
                cu,
                cu_dec,
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
