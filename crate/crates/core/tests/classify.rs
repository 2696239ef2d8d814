use itertools::Itertools;
use num::Zero;
use proptest::prelude::*;
use weakmean::classify::*;
use weakmean::orbitstats::{segment_stat, Schedule};
use weakmean::rational::{int, ratio};
use weakmean::spaces::{distance, StatePoint};
use weakmean::systems::{orbit_segment, SystemDescriptor};
use weakmean::Rational;

/// Small budgets so each probe runs in well under a second.
fn small(system: &SystemDescriptor, seed: u64, hi: u32) -> ProbeConfig {
    let mut c = ProbeConfig::default_for(system);
    c.schedule = Schedule::geometric(4, hi);
    c.centers = 2;
    c.samples_per_ball = 3;
    c.delta_grid = vec![ratio(1, 16), ratio(1, 64)];
    c.seed = seed;
    c
}

fn check_witnesses(system: &SystemDescriptor, v: &ProbeVerdict) -> Result<(), TestCaseError> {
    for w in &v.witnesses {
        let sx = orbit_segment(system, &w.x, w.n).unwrap();
        let sy = orbit_segment(system, &w.y, w.n).unwrap();
        prop_assert_eq!(&segment_stat(&w.stat, &sx, &sy).unwrap(), &w.value);
        prop_assert!(&w.value.value - &w.value.bound > w.threshold);
        let d = distance(&system.space(), &w.x, &w.y).unwrap();
        prop_assert!(d.value < &w.radius * int(2));
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn sensitivity_witnesses_recompute(seed in any::<u64>()) {
        for sys in [SystemDescriptor::doubling(), SystemDescriptor::full_shift(2)] {
            let config = small(&sys, seed, 7);
            for mode in [SensitivityMode::StrongMean, SensitivityMode::StrongInMean] {
                let v = estimate_sensitivity_constant(&sys, &config, mode).unwrap();
                prop_assert_eq!(v.verdict == VerdictKind::SensitiveWitnessed, v.achieved_constant.is_some());
                check_witnesses(&sys, &v)?;
            }
        }
    }

    #[test]
    fn in_mean_readings_dominate(seed in any::<u64>()) {
        for sys in [SystemDescriptor::doubling(), SystemDescriptor::tent(), SystemDescriptor::full_shift(2)] {
            let r = check_mean_vs_in_mean_agreement(&sys, &small(&sys, seed, 7)).unwrap();
            if let Some(c) = &r.strong_mean.achieved_constant {
                let d = r.strong_in_mean.achieved_constant.as_ref();
                prop_assert!(d.is_some_and(|d| d >= c), "mean {} vs in-mean {:?}", c, d);
            }
            prop_assert_eq!(r.agree, r.strong_mean.verdict == r.strong_in_mean.verdict);
        }
    }

    #[test]
    fn point_probe_witnesses_recompute(seed in any::<u64>()) {
        let sys = SystemDescriptor::doubling();
        let config = small(&sys, seed, 7);
        let x = weakmean::systems::typical_point(&sys, seed).unwrap();
        for v in [
            probe_weak_mean_equicontinuous_point(&sys, &x, &config).unwrap(),
            probe_equicontinuous_in_mean_point(&sys, &x, &config).unwrap(),
            probe_density_t_equicontinuity(&sys, &x, &ratio(1, 2), &config).unwrap(),
        ] {
            prop_assert_eq!(v.verdict, VerdictKind::SensitiveWitnessed);
            check_witnesses(&sys, &v)?;
        }
    }

    #[test]
    fn probes_are_deterministic(seed in any::<u64>()) {
        let sys = SystemDescriptor::full_shift(2);
        let config = small(&sys, seed, 6);
        prop_assert_eq!(dichotomy_report(&sys, &config).unwrap(), dichotomy_report(&sys, &config).unwrap());
        let kind = TupleKind::MeanTuple;
        prop_assert_eq!(search_sensitive_tuples(&sys, &config, kind).unwrap(), search_sensitive_tuples(&sys, &config, kind).unwrap());
    }
}

/// `min_σ #{k in A : σ(k) in B}` over all permutations of `1..=n`.
fn brute_joint(a: &[bool], b: &[bool]) -> usize {
    let n = a.len();
    (0..n).permutations(n).map(|s| (0..n).filter(|&k| a[k] && b[s[k]]).count()).min().unwrap()
}

#[test]
fn tuple_frequencies_match_enumeration() {
    let sys = SystemDescriptor::full_shift(2);
    for seed in 0..4 {
        let mut config = small(&sys, seed, 8);
        config.schedule = Schedule(vec![2, 4, 8]);
        config.eps_grid = vec![ratio(1, 2), ratio(1, 4)];
        for kind in [TupleKind::InMeanTuple, TupleKind::MeanTuple] {
            let report = search_sensitive_tuples(&sys, &config, kind).unwrap();
            assert!(!report.diagnostics.is_empty());
            for d in &report.diagnostics {
                for rec in &d.per_eps {
                    for w in &rec.witnesses {
                        let inside = |y: &StatePoint, x: &StatePoint| {
                            let seg = orbit_segment(&sys, y, w.n).unwrap();
                            seg.states
                                .iter()
                                .map(|p| {
                                    let dist = distance(&sys.space(), p, x).unwrap();
                                    dist.value + dist.bound < rec.eps
                                })
                                .collect::<Vec<_>>()
                        };
                        let a = inside(&w.y1, &d.x1);
                        let b = inside(&w.y2, &d.x2);
                        let visits = (a.iter().filter(|v| **v).count(), b.iter().filter(|v| **v).count());
                        assert_eq!(visits, w.visits);
                        assert_eq!(w.frequency, ratio(brute_joint(&a, &b) as i64, w.n as i64));
                    }
                }
            }
        }
    }
}

#[test]
fn rotation_sits_on_the_equicontinuous_side() {
    let sys = SystemDescriptor::rotation(ratio(5, 13));
    let r = dichotomy_report(&sys, &small(&sys, 1, 8)).unwrap();
    assert_eq!(r.side, Side::EquicontinuousSide);
    assert_eq!(r.in_mean_side, Side::EquicontinuousSide);
    assert!(r.achieved_constant.is_none());
    let t = search_sensitive_tuples(&sys, &small(&sys, 1, 8), TupleKind::MeanTuple).unwrap();
    assert!(t.candidates.is_empty());
}

#[test]
fn constant_observable_is_always_consistent() {
    let sys = SystemDescriptor::doubling();
    let mut config = small(&sys, 3, 7);
    config.observables = vec![weakmean::orbitstats::Observable::Constant { value: ratio(1, 2) }];
    let x = StatePoint::circle(ratio(1, 3));
    let f = weakmean::orbitstats::Observable::Constant { value: ratio(1, 2) };
    let r = probe_observable_equicontinuity(&sys, &x, &f, &config, ObservableMode::Mean).unwrap();
    assert_eq!(r.probe.verdict, VerdictKind::EquicontinuousConsistent);
}

#[test]
fn density_equivalence_agrees_on_small_budgets() {
    for sys in [SystemDescriptor::rotation(ratio(2, 7)), SystemDescriptor::full_shift(2)] {
        let r = check_density_equivalence(&sys, &small(&sys, 5, 7)).unwrap();
        assert!(r.agree || r.inconclusive, "{:?}", r.rows);
    }
}

#[test]
fn config_validation_rejects_bad_grids() {
    let sys = SystemDescriptor::doubling();
    let mut c = ProbeConfig::default_for(&sys);
    c.eps_grid = vec![Rational::zero()];
    assert!(c.validate().is_err());
    let mut c = ProbeConfig::default_for(&sys);
    c.t_grid = vec![ratio(3, 2)];
    assert!(c.validate().is_err());
    let mut c = ProbeConfig::default_for(&sys);
    c.samplers.clear();
    assert!(c.validate().is_err());
}
