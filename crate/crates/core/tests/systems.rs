use num::Zero;
use proptest::prelude::*;
use weakmean::rational::{frac, int, ratio};
use weakmean::spaces::{Coordinate, SampleStrategy, StatePoint, StreamRule, SymbolStream};
use weakmean::systems::*;
use weakmean::Rational;

fn unit() -> impl Strategy<Value = Rational> {
    (0i64..997, 1i64..997).prop_map(|(p, q)| ratio(p % q, q))
}

fn angle() -> impl Strategy<Value = Rational> {
    (2i64..997).prop_flat_map(|q| (1..q).prop_map(move |p| ratio(p, q)))
}

fn exact(p: &StatePoint) -> Rational {
    match p {
        StatePoint::Circle(Coordinate::Exact(r)) | StatePoint::Interval(Coordinate::Exact(r)) => r.clone(),
        other => panic!("expected an exact point, got {other:?}"),
    }
}

proptest! {
    #[test]
    fn rotation_orbit_is_arithmetic(x in unit(), a in angle(), n in 1usize..200) {
        let sys = SystemDescriptor::rotation(a.clone());
        let seg = orbit_segment(&sys, &StatePoint::circle(x.clone()), n).unwrap();
        for k in 1..=n {
            prop_assert_eq!(exact(seg.state(k)), frac(&(&x + &a * int(k as i64))));
        }
    }

    #[test]
    fn fast_path_agrees_with_stepping(x in unit(), a in angle(), n in 1usize..64) {
        let sys = SystemDescriptor::rotation(a);
        let seg = orbit_segment(&sys, &StatePoint::circle(x.clone()), n).unwrap();
        let mut cur = StatePoint::circle(x);
        for k in 1..=n {
            cur = step(&sys, &cur).unwrap();
            prop_assert_eq!(seg.state(k), &cur);
        }
    }

    #[test]
    fn doubling_on_rationals(x in unit(), n in 1usize..40) {
        let sys = SystemDescriptor::doubling();
        let y = iterate(&sys, &StatePoint::circle(x.clone()), n).unwrap();
        prop_assert_eq!(exact(&y), frac(&(x * Rational::from_integer(num::BigInt::from(1u8) << n))));
    }

    #[test]
    fn tent_stays_in_unit_interval(x in unit(), n in 1usize..40) {
        let seg = orbit_segment(&SystemDescriptor::tent(), &StatePoint::interval(x), n).unwrap();
        for p in &seg.states {
            let v = exact(p);
            prop_assert!(v >= Rational::zero() && v <= int(1));
        }
    }

    #[test]
    fn extending_equals_generating_longer(seed in any::<u64>(), n in 1usize..40, m in 0usize..40) {
        for sys in [SystemDescriptor::golden_rotation(), SystemDescriptor::doubling(), SystemDescriptor::full_shift(3)] {
            let x = typical_point(&sys, seed).unwrap();
            let mut seg = orbit_segment(&sys, &x, n).unwrap();
            seg.extend(m).unwrap();
            prop_assert_eq!(seg, orbit_segment(&sys, &x, n + m).unwrap());
        }
    }

    #[test]
    fn shift_orbit_is_shifted_stream(prefix in prop::collection::vec(0u32..2, 0..8), seed in any::<u64>(), n in 1usize..30) {
        let s = SymbolStream::new(2, prefix, StreamRule::Seeded { seed }).unwrap();
        let seg = orbit_segment(&SystemDescriptor::full_shift(2), &StatePoint::Symbolic(s.clone()), n).unwrap();
        for k in 1..=n {
            match seg.state(k) {
                StatePoint::Symbolic(t) => prop_assert_eq!(t.window(12), s.shift_by(k as u64).window(12)),
                other => prop_assert!(false, "unexpected state {:?}", other),
            }
        }
    }

    #[test]
    fn sampled_points_are_deterministic(seed in any::<u64>()) {
        for sys in [SystemDescriptor::doubling(), SystemDescriptor::tent(), SystemDescriptor::full_shift(2), SystemDescriptor::sturmian(golden_angle())] {
            for strategy in [SampleStrategy::Uniform, SampleStrategy::RandomStream] {
                prop_assert_eq!(sample_point(&sys, &strategy, seed).unwrap(), sample_point(&sys, &strategy, seed).unwrap());
            }
            prop_assert_eq!(typical_point(&sys, seed).unwrap(), typical_point(&sys, seed).unwrap());
        }
    }
}

#[test]
fn product_steps_componentwise() {
    let sys = SystemDescriptor::product(SystemDescriptor::rotation(ratio(1, 3)), SystemDescriptor::doubling());
    let p = StatePoint::product(StatePoint::circle(ratio(1, 2)), StatePoint::circle(ratio(3, 8)));
    let q = iterate(&sys, &p, 2).unwrap();
    assert_eq!(q, StatePoint::product(StatePoint::circle(ratio(1, 6)), StatePoint::circle(ratio(1, 2))));
}

#[test]
fn invalid_descriptors_are_rejected() {
    assert!(SystemDescriptor::full_shift(1).validate().is_err());
    assert!(orbit_segment(&SystemDescriptor::doubling(), &StatePoint::circle(int(0)), 0).is_err());
    assert!(step(&SystemDescriptor::doubling(), &StatePoint::interval(int(0))).is_err());
}

#[test]
fn descriptors_round_trip_through_json() {
    for sys in [
        SystemDescriptor::golden_rotation(),
        SystemDescriptor::doubling(),
        SystemDescriptor::tent(),
        SystemDescriptor::full_shift(3),
        SystemDescriptor::sturmian(ratio(2, 5)),
        SystemDescriptor::product(SystemDescriptor::doubling(), SystemDescriptor::full_shift(2)),
    ] {
        let text = serde_json::to_string(&sys).unwrap();
        assert_eq!(serde_json::from_str::<SystemDescriptor>(&text).unwrap(), sys);
    }
}
