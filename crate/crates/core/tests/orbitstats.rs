use num::{Signed, Zero};
use proptest::prelude::*;
use weakmean::orbitstats::*;
use weakmean::rational::{int, ratio};
use weakmean::spaces::StatePoint;
use weakmean::systems::{orbit_segment, typical_point, OrbitSegment, SystemDescriptor};
use weakmean::Rational;

fn system() -> impl Strategy<Value = SystemDescriptor> {
    prop_oneof![
        (1i64..50).prop_map(|p| SystemDescriptor::rotation(ratio(p, 51))),
        Just(SystemDescriptor::golden_rotation()),
        Just(SystemDescriptor::doubling()),
        Just(SystemDescriptor::tent()),
        Just(SystemDescriptor::full_shift(2)),
        Just(SystemDescriptor::product(SystemDescriptor::rotation(ratio(1, 3)), SystemDescriptor::doubling())),
    ]
}

fn pair(n: usize) -> impl Strategy<Value = OrbitPair> {
    (system(), any::<u64>(), any::<u64>()).prop_map(move |(sys, a, b)| {
        OrbitPair::generate(&sys, &typical_point(&sys, a).unwrap(), &typical_point(&sys, b).unwrap(), n).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn weak_mean_is_the_smallest_matching(p in pair(24), n in 1usize..=24) {
        let w = p.stat(&SegmentStatKind::WeakMean, n).unwrap().value;
        let b = p.stat(&SegmentStatKind::Besicovitch, n).unwrap().value;
        let s = p.stat(&SegmentStatKind::SupPerm, n).unwrap().value;
        prop_assert!(Rational::zero() <= w && w <= b && b <= s && s <= p.space().diameter());
    }

    #[test]
    fn exceedance_sandwich(p in pair(24), n in 1usize..=24, e in 1i64..20) {
        let eps = ratio(e, 40);
        let w = p.stat(&SegmentStatKind::WeakMean, n).unwrap().value;
        let ex = p.stat(&SegmentStatKind::Exceedance { eps: eps.clone() }, n).unwrap().value;
        prop_assert!(&eps * &ex <= w);
        prop_assert!(w <= p.space().diameter() * &ex + &eps);
        let bex = p.stat(&SegmentStatKind::BesicovitchExceedance { eps }, n).unwrap().value;
        prop_assert!(ex <= bex);
    }

    #[test]
    fn shift_stability(sys in system(), a in any::<u64>(), b in any::<u64>(), n in prop::sample::select(vec![16usize, 64])) {
        let x = typical_point(&sys, a).unwrap();
        let y = typical_point(&sys, b).unwrap();
        let seg_x = orbit_segment(&sys, &x, n + 1).unwrap();
        let seg_tx = shifted(&seg_x, n);
        let seg_y = orbit_segment(&sys, &y, n).unwrap();
        let f0 = segment_stat(&SegmentStatKind::WeakMean, &seg_x.prefix(n), &seg_y).unwrap();
        let f1 = segment_stat(&SegmentStatKind::WeakMean, &seg_tx, &seg_y).unwrap();
        let slack = sys.space().diameter() / int(n as i64) + &f0.bound + &f1.bound;
        prop_assert!((&f1.value - &f0.value).abs() <= slack);
    }

    #[test]
    fn weak_mean_is_symmetric(p in pair(16), n in 1usize..=16) {
        let q = OrbitPair::new(p.y(), p.x()).unwrap();
        prop_assert_eq!(p.stat(&SegmentStatKind::WeakMean, n).unwrap(), q.stat(&SegmentStatKind::WeakMean, n).unwrap());
    }

    #[test]
    fn observable_sandwich_and_contraction(p in pair(20), d in 1i64..16) {
        let delta = ratio(d, 32);
        let f = Observable::Coordinate;
        let report = stat_sandwich_check(p.x(), p.y(), &f, &delta).unwrap();
        prop_assert!(report.holds(), "{:?}", report);
        let obs = p.stat(&SegmentStatKind::Observable { f }, p.len()).unwrap();
        let w = p.stat(&SegmentStatKind::WeakMean, p.len()).unwrap();
        prop_assert!(obs.value <= w.value + obs.bound + w.bound);
    }

    #[test]
    fn limit_summary_reads_the_tail(values in prop::collection::vec(0i64..100, 3..10), tail in 1usize..4, tol in 0i64..20) {
        let schedule = Schedule((1..=values.len()).map(|k| k * 4).collect());
        let tail = tail.min(values.len());
        let tolerance = ratio(tol, 100);
        let est = estimate_limit(|n| Ok(StatValue::exact(ratio(values[n / 4 - 1], 100))), &schedule, tail, &tolerance).unwrap();
        let tv = &values[values.len() - tail..];
        let (hi, lo) = (*tv.iter().max().unwrap(), *tv.iter().min().unwrap());
        prop_assert_eq!(&est.limsup_estimate, &ratio(hi, 100));
        prop_assert_eq!(&est.liminf_estimate, &ratio(lo, 100));
        prop_assert_eq!(est.converged, hi - lo <= tol);
    }

    #[test]
    fn densities_count_members(mut idx in prop::collection::btree_set(1usize..200, 0..60), lo in 2u32..5) {
        let horizon = 256;
        idx.retain(|&k| k < horizon);
        let v: Vec<usize> = idx.iter().copied().collect();
        let view = IntegerSetView::indices(horizon, v.clone()).unwrap();
        let schedule = Schedule::geometric(lo, 8);
        let up = upper_density(&view, &schedule, 2).unwrap();
        for s in &up.samples {
            let count = v.iter().filter(|&&k| k < s.n).count();
            prop_assert_eq!(&s.value, &ratio(count as i64, s.n as i64));
        }
        let low = lower_density(&view.complement(), &schedule, 2).unwrap();
        prop_assert_eq!(low.liminf_estimate, int(1) - up.limsup_estimate);
    }
}

/// The segment of `T x`: states `T^(k+1) x` for `k = 1..=n`.
fn shifted(seg: &OrbitSegment, n: usize) -> OrbitSegment {
    OrbitSegment { system: seg.system.clone(), base: seg.state(1).clone(), states: seg.states[1..=n].to_vec() }
}

#[test]
fn rational_rotation_weak_mean_vanishes_on_full_periods() {
    let sys = SystemDescriptor::rotation(ratio(1, 8));
    let p = OrbitPair::generate(&sys, &StatePoint::circle(int(0)), &StatePoint::circle(ratio(3, 8)), 64).unwrap();
    assert!(p.stat(&SegmentStatKind::WeakMean, 64).unwrap().value.is_zero());
    assert_eq!(p.stat(&SegmentStatKind::Besicovitch, 64).unwrap().value, ratio(3, 8));
}

#[test]
fn stat_kinds_use_camel_case_fields() {
    let k: SegmentStatKind =
        serde_json::from_str(r#"{"kind": "observableExceedance", "f": {"type": "coordinate"}, "eps": "1/4"}"#).unwrap();
    assert_eq!(k, SegmentStatKind::ObservableExceedance { f: Observable::Coordinate, eps: ratio(1, 4) });
    let text = serde_json::to_string(&SegmentStatKind::BesicovitchExceedance { eps: ratio(1, 3) }).unwrap();
    assert_eq!(text, r#"{"kind":"besicovitchExceedance","eps":{"num":"1","den":"3"}}"#);
}

#[test]
fn short_schedule_is_rejected() {
    let err = estimate_limit(|_| Ok(StatValue::exact(int(0))), &Schedule(vec![4, 8]), 3, &ratio(1, 100));
    assert!(err.is_err());
}
