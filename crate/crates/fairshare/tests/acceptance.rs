//! Acceptance run: one test per numbered criterion. Each test prints a
//! single `criterion N: PASS/FAIL` line (visible with `--nocapture`),
//! asserts every value it claims, and enforces its runtime budget where one
//! is stated. Criterion 3 is reported honestly as FAIL: its pinned filler
//! counts are rejected by the generator's feasibility requirements, and the
//! corrected-parameter diagnostics that follow it demonstrate the bound.

use fairshare::allocator::{
    allocate_epoch, check_bottleneck_optimality, find_transfer_improvement, EpochInput,
};
use fairshare::engine::{truthful_trace, Trace};
use fairshare::instances::{
    gen_example_10_9, gen_multi_lower, gen_sqrt2, gen_zero_ratio_overreport, random_scenario,
    GeneratedInstance, RandomConfig,
};
use fairshare::model::{Demand, ReportOverride, ReportProfile, Scenario};
use fairshare::properties::{
    check_envy_freeness, check_no_overreport, check_pareto, check_sharing_incentives,
    check_upper_bounds, rho,
};
use fairshare::rational::{format_rational, rat, to_decimal};
use fairshare::strategy::{
    incentive_ratio, interval_analysis, search_best_deviation, DeviationOutcome, SearchConfig,
};
use fairshare::Rational;
use num_traits::{One, Zero};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::LazyLock;
use std::time::{Duration, Instant};

fn stamp(criterion: u32, status: &str, message: &str, started: Instant, limit: Option<Duration>) {
    let elapsed = started.elapsed();
    match limit {
        Some(limit) => {
            println!(
                "criterion {criterion}: {status} — {message} ({elapsed:.2?} within {limit:?})"
            );
            assert!(
                elapsed < limit,
                "criterion {criterion} exceeded its runtime budget: {elapsed:?} >= {limit:?}"
            );
        }
        None => println!("criterion {criterion}: {status} — {message} ({elapsed:.2?})"),
    }
}

/// 500 single-resource, equal-weight scenarios with n ≤ 4 and T ≤ 4.
static SUITE_SINGLE: LazyLock<Vec<Scenario>> = LazyLock::new(|| {
    (0..500u64)
        .map(|seed| {
            let config = RandomConfig {
                num_users: 2 + (seed as usize % 3),
                num_epochs: 1 + (seed as usize % 4),
                ..RandomConfig::default()
            };
            random_scenario(&config, seed)
        })
        .collect()
});

/// 200 multi-resource, positive-ratio, weighted scenarios.
static SUITE_MULTI: LazyLock<Vec<Scenario>> = LazyLock::new(|| {
    (0..200u64)
        .map(|seed| {
            let config = RandomConfig {
                num_users: 2 + (seed as usize % 3),
                num_epochs: 1 + (seed as usize % 2),
                num_resources: 2 + (seed as usize % 2),
                weights: vec![rat(1, 1), rat(2, 1)],
                ..RandomConfig::default()
            };
            random_scenario(&config, 10_000 + seed)
        })
        .collect()
});

/// 200 weighted single-resource scenarios for pair-coalition searches.
static SUITE_WEIGHTED: LazyLock<Vec<Scenario>> = LazyLock::new(|| {
    (0..200u64)
        .map(|seed| {
            let config = RandomConfig {
                num_users: 2 + (seed as usize % 3),
                num_epochs: 1 + (seed as usize % 3),
                weights: vec![rat(1, 1), rat(2, 1), rat(3, 1)],
                ..RandomConfig::default()
            };
            random_scenario(&config, 20_000 + seed)
        })
        .collect()
});

/// The four-phase family at m = k ∈ {2, 5, 10, 25}, each replayed once and
/// checked against its predicted factor; shared by criteria 2, 7, 8, and 9.
static SQRT2_GRID: LazyLock<Vec<(usize, GeneratedInstance, DeviationOutcome)>> =
    LazyLock::new(|| {
        [2usize, 5, 10, 25]
            .iter()
            .map(|&mk| {
                let instance = gen_sqrt2(mk, mk).unwrap();
                let outcome = incentive_ratio(&instance.scenario, &instance.deviation).unwrap();
                assert_eq!(
                    outcome.gamma_max.as_ref(),
                    Some(&instance.predicted_ratio),
                    "replayed factor must equal the closed form at m=k={mk}"
                );
                (mk, instance, outcome)
            })
            .collect()
    });

/// The corrected-parameter two-resource instances used by criteria 3, 7, 8.
static MULTI_LOWER_FEASIBLE: LazyLock<Vec<GeneratedInstance>> = LazyLock::new(|| {
    vec![
        gen_multi_lower(rat(1, 2), rat(1, 1000), rat(1, 1), 1000, 2000).unwrap(),
        gen_multi_lower(rat(1, 4), rat(1, 1000), rat(2, 1), 1000, 1333).unwrap(),
    ]
});

fn rows(values: [[i64; 3]; 3]) -> Vec<Vec<Rational>> {
    values
        .iter()
        .map(|row| row.iter().map(|&v| rat(v, 1)).collect())
        .collect()
}

fn epoch_allocations(trace: &Trace) -> Vec<Vec<Rational>> {
    trace.epochs.iter().map(|e| e.allocations.clone()).collect()
}

#[test]
fn criterion_1_shared_link_table_replay() {
    let started = Instant::now();
    let instance = gen_example_10_9();
    let outcome = incentive_ratio(&instance.scenario, &instance.deviation).unwrap();
    assert_eq!(
        epoch_allocations(&outcome.truthful),
        rows([[4, 4, 0], [2, 0, 6], [3, 5, 0]])
    );
    assert_eq!(
        epoch_allocations(&outcome.deviated),
        rows([[0, 8, 0], [4, 0, 4], [6, 2, 0]])
    );
    assert_eq!(outcome.truthful.final_utility(0), rat(9, 1));
    assert_eq!(outcome.deviated.final_utility(0), rat(10, 1));
    assert_eq!(outcome.gamma_max, Some(rat(10, 9)));
    stamp(
        1,
        "PASS",
        "replayed allocations match both table columns exactly; user 1 totals 9 truthful vs 10 deviated",
        started,
        Some(Duration::from_secs(1)),
    );
}

#[test]
fn criterion_2_sqrt2_family_converges_from_below() {
    let started = Instant::now();
    let gammas: Vec<&Rational> = SQRT2_GRID
        .iter()
        .map(|(_, _, outcome)| outcome.gamma_max.as_ref().unwrap())
        .collect();
    for pair in gammas.windows(2) {
        assert!(pair[0] <= pair[1], "factor must be nondecreasing in m=k");
    }
    let at_25 = gammas.last().unwrap();
    assert!(**at_25 >= rat(140, 100));
    assert!(**at_25 <= rat(141421356, 100000000) + rat(1, 1000000));
    stamp(
        2,
        "PASS",
        &format!(
            "replayed factor equals the predicted rational at every m=k in {{2,5,10,25}}, is \
             nondecreasing, and reaches {} ≈ {} at 25, inside [1.40, 1.41421356+1e-6]",
            format_rational(at_25),
            to_decimal(at_25, 10)
        ),
        started,
        Some(Duration::from_secs(30)),
    );
}

#[test]
fn criterion_3_two_resource_bound_pinned_parameters_are_infeasible() {
    let started = Instant::now();
    // The stated parameters request n2 = 1000 second-epoch fillers, but the
    // construction needs enough of them to keep the first resource slack in
    // the deviated second epoch: n2 >= (1-δ)(w+δ)/(wδ(1-ε)), which is
    // 1999998/1000 ≈ 2000 at (ε=1/2, w=1) and 666333/500 ≈ 1332.7 at
    // (ε=1/4, w=2). Both pinned points are therefore rejected, and the
    // criterion cannot pass as stated; the diagnostics below demonstrate the
    // bound at the smallest feasible filler counts.
    let pinned = gen_multi_lower(rat(1, 2), rat(1, 1000), rat(1, 1), 1000, 1000);
    let pinned_err = pinned.err().expect("pinned parameters must be rejected");
    assert!(pinned_err.to_string().contains("n2 = 1000"));
    let also = gen_multi_lower(rat(1, 4), rat(1, 1000), rat(2, 1), 1000, 1000);
    let also_err = also.err().expect("second pinned point must be rejected");
    assert!(also_err.to_string().contains("n2 = 1000"));
    stamp(
        3,
        "FAIL",
        &format!(
            "unattainable as stated: {pinned_err}; the second point (ε=1/4, w=2) is rejected \
             for the same reason with threshold 666333/500"
        ),
        started,
        None,
    );

    // Feasible diagnostics: the same construction at corrected filler
    // counts reproduces its closed form exactly and sits within 0.01 of the
    // ceiling 1 + ρ₁ = 3 in both parameterizations.
    for (instance, expected, margin) in [
        (&MULTI_LOWER_FEASIBLE[0], rat(3003, 1004), rat(9, 1004)),
        (&MULTI_LOWER_FEASIBLE[1], rat(2001, 668), rat(3, 668)),
    ] {
        assert_eq!(instance.predicted_ratio, expected);
        assert_eq!(rho(&instance.scenario, 0).unwrap(), rat(2, 1));
        let outcome = incentive_ratio(&instance.scenario, &instance.deviation).unwrap();
        assert_eq!(outcome.gamma_max, Some(expected.clone()));
        let gap = rat(3, 1) - &expected;
        assert_eq!(gap, margin);
        assert!(gap < rat(1, 100));
        println!(
            "criterion 3 diagnostic: corrected fillers → replay factor {} = closed form \
             exactly; 3 − factor = {} < 1/100",
            format_rational(&expected),
            format_rational(&margin),
        );
    }
    let elapsed = started.elapsed();
    assert!(elapsed < Duration::from_secs(30));
    println!("criterion 3 diagnostics finished in {elapsed:.2?} (within 30s)");
}

#[test]
fn criterion_4_linear_overreport_table_replay() {
    let started = Instant::now();
    let instance = gen_zero_ratio_overreport(10).unwrap();
    let outcome = incentive_ratio(&instance.scenario, &instance.deviation).unwrap();
    // Truthful column: nothing in epoch 1, then the halving series.
    let mut truthful_column = vec![rat(0, 1)];
    for t in 0..9 {
        truthful_column.push(rat(1, 100 * (1 << t)));
    }
    for (t, expected) in truthful_column.iter().enumerate() {
        assert_eq!(&outcome.truthful.epochs[t].allocations[0], expected);
    }
    assert_eq!(outcome.truthful.final_utility(0), rat(511, 25600));
    // Deviated column: the epoch-1 over-report buys 1/101 of worthless
    // credit, then the whole capacity of every later epoch.
    assert_eq!(outcome.deviated.epochs[0].allocations[0], rat(1, 101));
    assert_eq!(outcome.deviated.epochs[0].allocations[101], rat(11, 101));
    assert!(outcome.deviated.epochs[0].utilities[0].is_zero());
    for t in 1..10 {
        assert_eq!(outcome.deviated.epochs[t].allocations[0], rat(1, 100));
    }
    assert_eq!(outcome.deviated.final_utility(0), rat(9, 100));
    // Factor 2304/511 ≈ 4.51, beyond the (m−2)/2 = 9/2 threshold.
    assert_eq!(outcome.gamma_max, Some(rat(2304, 511)));
    assert!(outcome.gamma_max >= Some(rat(9, 2)));
    stamp(
        4,
        "PASS",
        "replayed traces match both table columns; utility factor 2304/511 ≥ (m−2)/2 = 9/2",
        started,
        Some(Duration::from_secs(10)),
    );
}

fn max_gamma(a: Option<Rational>, b: Option<Rational>) -> Option<Rational> {
    if a > b {
        a
    } else {
        b
    }
}

#[test]
fn criterion_5_upper_bound_conformance_suites() {
    let started = Instant::now();
    let exhaustive = SearchConfig {
        require_exhaustive: true,
        ..SearchConfig::default()
    };

    // Suite 1: single-resource equal weights, every user as solo deviator,
    // exhaustive grid {0, 1/4, 1/2, 3/4, 1}.
    let single_max = SUITE_SINGLE
        .par_iter()
        .map(|scenario| {
            let mut best: Option<Rational> = None;
            for user in 0..scenario.num_users() {
                let outcome = search_best_deviation(scenario, &[user], &exhaustive).unwrap();
                assert!(
                    outcome.gamma_max <= Some(rat(3, 2)),
                    "solo factor above 3/2: {:?}",
                    outcome.gamma_max
                );
                let report = check_upper_bounds(&outcome, scenario);
                assert!(report.pass, "{:?}", report.counterexample);
                best = max_gamma(best, outcome.gamma_max);
            }
            best
        })
        .reduce(|| None, max_gamma);

    // Suite 2: multi-resource positive ratios, user 1 as solo deviator,
    // bounded by 1 + ρ₁.
    SUITE_MULTI.par_iter().for_each(|scenario| {
        let outcome = search_best_deviation(scenario, &[0], &exhaustive).unwrap();
        let bound = Rational::one() + rho(scenario, 0).unwrap();
        assert!(
            outcome.gamma_max <= Some(bound),
            "solo factor above 1 + rho"
        );
        let report = check_upper_bounds(&outcome, scenario);
        assert!(report.pass, "{:?}", report.counterexample);
    });

    // Suite 3: weighted single resource; the {1,2} pair coalition is
    // bounded by 2 and every solo deviator by her weighted bound.
    let pair_max = SUITE_WEIGHTED
        .par_iter()
        .map(|scenario| {
            let pair = search_best_deviation(scenario, &[0, 1], &exhaustive).unwrap();
            assert!(pair.gamma_max <= Some(rat(2, 1)), "pair factor above 2");
            let report = check_upper_bounds(&pair, scenario);
            assert!(report.pass, "{:?}", report.counterexample);
            for user in 0..scenario.num_users() {
                let solo = search_best_deviation(scenario, &[user], &exhaustive).unwrap();
                let report = check_upper_bounds(&solo, scenario);
                assert!(report.pass, "{:?}", report.counterexample);
            }
            pair.gamma_max
        })
        .reduce(|| None, max_gamma);

    let fmt = |g: &Option<Rational>| {
        g.as_ref()
            .map(format_rational)
            .unwrap_or_else(|| "undefined".into())
    };
    stamp(
        5,
        "PASS",
        &format!(
            "500 single-resource equal-weight scenarios: max solo factor {} ≤ 3/2; 200 \
             multi-resource scenarios within 1 + ρ₁; 200 weighted scenarios: max pair \
             factor {} ≤ 2 and every solo within its weighted bound",
            fmt(&single_max),
            fmt(&pair_max),
        ),
        started,
        Some(Duration::from_secs(600)),
    );
}

#[test]
fn criterion_6_overreports_never_beat_underreports_except_zero_ratio() {
    let started = Instant::now();
    SUITE_SINGLE.par_iter().for_each(|scenario| {
        for user in 0..scenario.num_users() {
            let report =
                check_no_overreport(scenario, &[user], &SearchConfig::default()).unwrap();
            assert!(report.pass, "{}: {:?}", report.detail, report.counterexample);
        }
    });
    SUITE_MULTI.par_iter().for_each(|scenario| {
        let report = check_no_overreport(scenario, &[0], &SearchConfig::default()).unwrap();
        assert!(report.pass, "{}: {:?}", report.detail, report.counterexample);
    });
    SUITE_WEIGHTED
        .par_iter()
        .enumerate()
        .for_each(|(index, scenario)| {
            // The pair coalition's extended grid outgrows the exhaustive
            // budget at T = 3, so cap the budget and sample the over side
            // deterministically.
            let config = SearchConfig {
                budget: 20_000,
                samples: 400,
                seed: 20_000 + index as u64,
                ..SearchConfig::default()
            };
            let report = check_no_overreport(scenario, &[0, 1], &config).unwrap();
            assert!(report.pass, "{}: {:?}", report.detail, report.counterexample);
            for user in 0..scenario.num_users() {
                let report =
                    check_no_overreport(scenario, &[user], &SearchConfig::default()).unwrap();
                assert!(report.pass, "{}: {:?}", report.detail, report.counterexample);
            }
        });

    // The zero-ratio instance is the asserted expected exception: restricted
    // to the first epoch the over grid is exhaustive and finds exactly the
    // designated factor, and a sampled run over the full grid agrees that
    // over-reporting wins.
    let zero = gen_zero_ratio_overreport(10).unwrap();
    let restricted = SearchConfig {
        epochs: Some(vec![0]),
        ..SearchConfig::default()
    };
    let report = check_no_overreport(&zero.scenario, &[0], &restricted).unwrap();
    assert!(!report.pass, "the zero-ratio exception must fail this check");
    let witness = report.counterexample.unwrap();
    assert_eq!(witness.rhs, Some(rat(2304, 511)));
    let sampled = SearchConfig {
        samples: 64,
        seed: 7,
        ..SearchConfig::default()
    };
    let full = check_no_overreport(&zero.scenario, &[0], &sampled).unwrap();
    assert!(!full.pass, "sampled full-grid run must agree: {}", full.detail);
    stamp(
        6,
        "PASS",
        "over-report optimum ≤ under-report optimum on all 900 positive-ratio scenarios \
         (solos and pair coalitions); zero-ratio exception asserted at factor 2304/511",
        started,
        None,
    );
}

#[test]
fn criterion_7_fairness_suites_on_all_truthful_traces() {
    let started = Instant::now();
    let fairness = |scenario: &Scenario| {
        let trace = truthful_trace(scenario).unwrap();
        let envy = check_envy_freeness(scenario, &trace);
        assert!(envy.pass, "envy: {:?}", envy.counterexample);
        let sharing = check_sharing_incentives(scenario, &trace);
        assert!(sharing.pass, "sharing: {:?}", sharing.counterexample);
        let pareto = check_pareto(scenario, &trace);
        assert!(pareto.pass, "pareto: {:?}", pareto.counterexample);
    };
    let mut alphas_seen = std::collections::BTreeSet::new();
    let mut scenarios: Vec<&Scenario> = Vec::new();
    scenarios.extend(SUITE_SINGLE.iter());
    scenarios.extend(SUITE_MULTI.iter());
    scenarios.extend(SUITE_WEIGHTED.iter());
    for scenario in &scenarios {
        alphas_seen.insert(format_rational(&scenario.alpha));
    }
    assert!(
        ["0", "1/2", "1"]
            .iter()
            .all(|a| alphas_seen.contains(&a.to_string())),
        "the random pools must exercise α ∈ {{0, 1/2, 1}}; saw {alphas_seen:?}"
    );
    scenarios.par_iter().for_each(|scenario| fairness(scenario));

    let example = gen_example_10_9();
    fairness(&example.scenario);
    for (_, instance, _) in SQRT2_GRID.iter() {
        fairness(&instance.scenario);
    }
    for instance in MULTI_LOWER_FEASIBLE.iter() {
        fairness(&instance.scenario);
    }
    let zero = gen_zero_ratio_overreport(10).unwrap();
    fairness(&zero.scenario);
    let count = scenarios.len() + 2 + SQRT2_GRID.len() + MULTI_LOWER_FEASIBLE.len();
    stamp(
        7,
        "PASS",
        &format!(
            "envy-freeness, α-sharing (α ∈ {{0, 1/2, 1}}), and Pareto checks hold on all \
             {count} truthful traces from criteria 1–5"
        ),
        started,
        None,
    );
}

/// Replays a trace epoch by epoch through the solver, asserting determinism
/// and an empty bottleneck-certificate violation list at every epoch.
fn certify_trace(scenario: &Scenario, trace: &Trace) -> usize {
    let n = scenario.num_users();
    let mut cumulative = vec![Rational::zero(); n];
    let mut certified = 0usize;
    for (t, record) in trace.epochs.iter().enumerate() {
        let input = EpochInput {
            cumulative: cumulative.clone(),
            types: (0..n)
                .map(|u| trace.profile.reported_type(scenario, u, t))
                .collect(),
            weights: scenario.weights.clone(),
            alpha: scenario.alpha.clone(),
            capacity: scenario.capacities[t].clone(),
        };
        let alloc = allocate_epoch(&input).unwrap();
        assert_eq!(alloc.allocations, record.allocations, "replay must be deterministic");
        let violations = check_bottleneck_optimality(&input, &alloc);
        assert!(violations.is_empty(), "uncertified epoch {t}: {violations:?}");
        for (c, r) in cumulative.iter_mut().zip(&alloc.allocations) {
            *c += r;
        }
        certified += 1;
    }
    certified
}

#[test]
fn criterion_8_solver_certification_and_perturbation_oracle() {
    let started = Instant::now();
    let epochs_certified: usize = [&SUITE_SINGLE, &SUITE_MULTI, &SUITE_WEIGHTED]
        .into_iter()
        .flat_map(|suite| suite.iter())
        .collect::<Vec<_>>()
        .par_iter()
        .map(|scenario| certify_trace(scenario, &truthful_trace(scenario).unwrap()))
        .sum();

    let mut instance_epochs = 0usize;
    let example = gen_example_10_9();
    let zero = gen_zero_ratio_overreport(10).unwrap();
    let mut pairs: Vec<(&Scenario, &ReportProfile)> = vec![
        (&example.scenario, &example.deviation),
        (&zero.scenario, &zero.deviation),
    ];
    for (_, instance, _) in SQRT2_GRID.iter() {
        pairs.push((&instance.scenario, &instance.deviation));
    }
    for instance in MULTI_LOWER_FEASIBLE.iter() {
        pairs.push((&instance.scenario, &instance.deviation));
    }
    for (scenario, deviation) in pairs {
        let outcome = incentive_ratio(scenario, deviation).unwrap();
        instance_epochs += certify_trace(scenario, &outcome.truthful);
        instance_epochs += certify_trace(scenario, &outcome.deviated);
    }

    // Tiny-instance perturbation oracle: no ε-transfer in the grid k/120
    // improves the sorted normalized totals lexicographically.
    let epsilons: Vec<Rational> = (1..=12).map(|k| rat(k, 120)).collect();
    (0..1000u64).into_par_iter().for_each(|seed| {
        let config = RandomConfig {
            num_users: 1 + (seed as usize % 3),
            num_resources: 1 + (seed as usize % 2),
            num_epochs: 1,
            capacities: vec![rat(2, 1), rat(4, 1)],
            positive_ratios: seed % 2 == 0,
            max_demand_halves: 8,
            ..RandomConfig::default()
        };
        let scenario = random_scenario(&config, 40_000 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let input = EpochInput {
            cumulative: (0..scenario.num_users())
                .map(|_| rat(rng.gen_range(0..=8), 2))
                .collect(),
            types: (0..scenario.num_users())
                .map(|u| scenario.type_of(u, 0).clone())
                .collect(),
            weights: scenario.weights.clone(),
            alpha: scenario.alpha.clone(),
            capacity: scenario.capacities[0].clone(),
        };
        let alloc = allocate_epoch(&input).unwrap();
        assert!(check_bottleneck_optimality(&input, &alloc).is_empty());
        let improvement = find_transfer_improvement(&input, &alloc, &epsilons);
        assert!(
            improvement.is_none(),
            "seed {seed}: lexicographic improvement found: {improvement:?}"
        );
    });
    stamp(
        8,
        "PASS",
        &format!(
            "bottleneck certificate empty on every solver output ({epochs_certified} suite \
             epochs + {instance_epochs} instance epochs); perturbation oracle found no \
             improvement over 1000 seeds"
        ),
        started,
        None,
    );
}

#[test]
fn criterion_9_interval_structure_of_the_sqrt2_traces() {
    let started = Instant::now();
    let assert_interval_laws = |truthful: &Trace, deviated: &Trace| -> (usize, usize) {
        let analysis = interval_analysis(truthful, deviated, 0);
        // Strict interleaving: s₀ < e₀ < s₁ < e₁ < …, with only the last
        // interval allowed to stay open.
        let mut previous: Option<usize> = None;
        for (index, interval) in analysis.intervals.iter().enumerate() {
            assert!(previous.is_none_or(|p| p < interval.start));
            previous = Some(interval.start);
            match interval.end {
                Some(end) => {
                    assert!(interval.start < end);
                    previous = Some(end);
                }
                None => assert_eq!(
                    index + 1,
                    analysis.intervals.len(),
                    "only the final interval may be open"
                ),
            }
        }
        // At every recorded end the shortfall equals the cumulative gap.
        let mut closed = 0usize;
        for interval in &analysis.intervals {
            if let Some(end) = interval.end {
                let gap = truthful.cumulative(0, end) - deviated.cumulative(0, end);
                assert_eq!(analysis.f[end], gap, "shortfall identity at the interval end");
                closed += 1;
            }
        }
        (analysis.intervals.len(), closed)
    };

    for (mk, _, outcome) in SQRT2_GRID.iter() {
        let (intervals, closed) = assert_interval_laws(&outcome.truthful, &outcome.deviated);
        let diag: Vec<String> = interval_analysis(&outcome.truthful, &outcome.deviated, 0)
            .intervals
            .iter()
            .map(|interval| {
                format!(
                    "[start t={}, end {}, peak {} at t={}]",
                    interval.start + 1,
                    interval
                        .end
                        .map(|e| format!("t={}", e + 1))
                        .unwrap_or_else(|| "open".into()),
                    interval
                        .best_ratio
                        .as_ref()
                        .map(format_rational)
                        .unwrap_or_else(|| "-".into()),
                    interval.best_epoch.map(|t| t + 1).unwrap_or(0),
                )
            })
            .collect();
        println!(
            "criterion 9 diagnostic (asymptotics reported, not asserted): m=k={mk}: \
             {intervals} interval(s), {closed} closed: {}",
            diag.join(" ")
        );
    }

    // The designated deviations leave their final interval open (the
    // deviator finishes ahead), so the end-of-run identity would be checked
    // vacuously. Sweep 256 mixed profiles of the m=k=2 construction — a set
    // bit over-reports an even epoch (unbounded demand, pulling the user
    // ahead) and under-reports an odd one (zero demand, dropping her back) —
    // to exercise recorded ends non-vacuously.
    let instance = &SQRT2_GRID[0].1;
    let epochs = instance.scenario.num_epochs();
    let mut profiles_with_closed_intervals = 0usize;
    for mask in 0u32..(1 << epochs) {
        let reports: Vec<ReportOverride> = (0..epochs)
            .filter(|t| mask & (1 << t) != 0)
            .map(|epoch| ReportOverride {
                user: 0,
                epoch,
                ratios: None,
                demand: Some(if epoch % 2 == 0 {
                    Demand::Unbounded
                } else {
                    Demand::finite(rat(0, 1))
                }),
            })
            .collect();
        let profile = ReportProfile {
            coalition: vec![0],
            reports,
        };
        let outcome = incentive_ratio(&instance.scenario, &profile).unwrap();
        let (_, closed) = assert_interval_laws(&outcome.truthful, &outcome.deviated);
        if closed > 0 {
            profiles_with_closed_intervals += 1;
        }
    }
    assert!(
        profiles_with_closed_intervals > 0,
        "the 256-profile sweep must exercise recorded interval ends"
    );
    stamp(
        9,
        "PASS",
        &format!(
            "interleaving and the end-of-interval shortfall identity hold on every \
             designated trace and on all 256 swept profiles ({profiles_with_closed_intervals} \
             of which close an interval)"
        ),
        started,
        None,
    );
}
