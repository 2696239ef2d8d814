use num::Zero;
use proptest::prelude::*;
use weakmean::rational::{parse, ratio};
use weakmean::spaces::*;
use weakmean::Rational;

fn unit() -> impl Strategy<Value = Rational> {
    (0i64..1000, 1i64..1000).prop_map(|(p, q)| ratio(p % q, q))
}

fn word(k: u32) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..k, 0..12)
}

fn stream(k: u32) -> impl Strategy<Value = SymbolStream> {
    (word(k), prop::collection::vec(0..k, 1..5), any::<u64>(), any::<bool>()).prop_map(move |(prefix, tail, seed, periodic)| {
        if periodic {
            SymbolStream::periodic(k, prefix, tail).unwrap()
        } else {
            SymbolStream::seeded(k, prefix, seed).unwrap()
        }
    })
}

fn exact_points() -> impl Strategy<Value = (SpaceDescriptor, [StatePoint; 3])> {
    prop_oneof![
        (unit(), unit(), unit()).prop_map(|(a, b, c)| (
            SpaceDescriptor::circle(),
            [StatePoint::circle(a), StatePoint::circle(b), StatePoint::circle(c)]
        )),
        (unit(), unit(), unit()).prop_map(|(a, b, c)| (
            SpaceDescriptor::interval(),
            [StatePoint::interval(a), StatePoint::interval(b), StatePoint::interval(c)]
        )),
    ]
}

proptest! {
    #[test]
    fn exact_metric_laws((space, [a, b, c]) in exact_points()) {
        let d = |p: &StatePoint, q: &StatePoint| distance(&space, p, q).unwrap();
        prop_assert!(d(&a, &a).value.is_zero());
        prop_assert_eq!(d(&a, &b).clone(), d(&b, &a));
        prop_assert!(d(&a, &c).value <= d(&a, &b).value + d(&b, &c).value);
        prop_assert!(d(&a, &b).value <= space.diameter());
        prop_assert!(d(&a, &b).bound.is_zero());
    }

    #[test]
    fn symbolic_metric_laws_within_truncation(x in stream(3), y in stream(3), z in stream(3)) {
        let space = SpaceDescriptor::symbolic(3);
        let [x, y, z] = [x, y, z].map(StatePoint::Symbolic);
        let d = |p: &StatePoint, q: &StatePoint| distance(&space, p, q).unwrap();
        let slack = space.truncation_bound() * ratio(2, 1);
        prop_assert!(d(&x, &x).value.is_zero());
        prop_assert_eq!(d(&x, &y).value, d(&y, &x).value);
        prop_assert!(d(&x, &z).value <= d(&x, &y).value + d(&y, &z).value + slack);
        prop_assert!(d(&x, &y).value <= space.diameter());
    }

    #[test]
    fn ball_samples_stay_inside(c in unit(), r in 1i64..64, seed in any::<u64>(), depth in 0u32..12) {
        let radius = ratio(r, 128);
        for space in [SpaceDescriptor::circle(), SpaceDescriptor::interval()] {
            let center = if space == SpaceDescriptor::circle() { StatePoint::circle(c.clone()) } else { StatePoint::interval(c.clone()) };
            for strategy in [SampleStrategy::Uniform, SampleStrategy::Dyadic { depth }, SampleStrategy::RandomStream] {
                if let Some(y) = sample_in_ball(&space, &center, &radius, &strategy, seed).unwrap() {
                    let d = distance(&space, &center, &y).unwrap();
                    prop_assert!(&d.value + &d.bound < radius, "{:?} outside ball of {:?}", y, center);
                }
            }
        }
    }

    #[test]
    fn symbolic_ball_samples_stay_inside(x in stream(2), m in 1u32..10, seed in any::<u64>()) {
        let space = SpaceDescriptor::symbolic(2);
        let center = StatePoint::Symbolic(x);
        let radius = ratio(1, 1 << m);
        for strategy in [SampleStrategy::Uniform, SampleStrategy::RandomStream, SampleStrategy::PeriodicTail { period: 2, prefix: 0 }] {
            if let Some(y) = sample_in_ball(&space, &center, &radius, &strategy, seed).unwrap() {
                let d = distance(&space, &center, &y).unwrap();
                prop_assert!(d.value < radius);
            }
        }
    }

    #[test]
    fn points_round_trip_through_json(a in unit(), s in stream(4)) {
        let points = [
            StatePoint::circle(a.clone()),
            StatePoint::interval(a),
            StatePoint::Symbolic(s.clone()),
            StatePoint::product(StatePoint::Symbolic(s.shift()), StatePoint::circle(ratio(1, 3))),
        ];
        for p in points {
            let text = serde_json::to_string(&p).unwrap();
            prop_assert_eq!(serde_json::from_str::<StatePoint>(&text).unwrap(), p);
        }
    }

    #[test]
    fn shift_by_matches_repeated_shift(s in stream(3), k in 0u64..20) {
        let mut t = s.clone();
        for _ in 0..k {
            t = t.shift();
        }
        prop_assert_eq!(t.window(16), s.shift_by(k).window(16));
    }

    #[test]
    fn rational_text_round_trips(p in -1000i64..1000, q in 1i64..1000) {
        let r = ratio(p, q);
        prop_assert_eq!(parse(&r.to_string()), Some(r));
    }
}

#[test]
fn product_distance_adds_components() {
    let space = SpaceDescriptor::product(SpaceDescriptor::circle(), SpaceDescriptor::interval());
    let a = StatePoint::product(StatePoint::circle(ratio(1, 10)), StatePoint::interval(ratio(1, 2)));
    let b = StatePoint::product(StatePoint::circle(ratio(9, 10)), StatePoint::interval(ratio(1, 4)));
    assert_eq!(distance(&space, &a, &b).unwrap().value, ratio(1, 5) + ratio(1, 4));
    assert_eq!(space.diameter(), ratio(3, 2));
}

#[test]
fn mismatched_points_are_rejected() {
    let err = distance(&SpaceDescriptor::circle(), &StatePoint::circle(ratio(1, 2)), &StatePoint::interval(ratio(1, 2)));
    assert!(err.is_err());
}

#[test]
fn decimal_and_fraction_parsing() {
    assert_eq!(parse("0.15"), Some(ratio(3, 20)));
    assert_eq!(parse(" 3/8 "), Some(ratio(3, 8)));
    assert_eq!(parse("-2"), Some(ratio(-2, 1)));
    assert_eq!(parse("1/0"), None);
    assert_eq!(parse("x"), None);
}
