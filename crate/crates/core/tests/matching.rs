use itertools::Itertools;
use num::Zero;
use proptest::prelude::*;
use weakmean::matching::*;
use weakmean::rational::{int, ratio};
use weakmean::spaces::circle_metric;
use weakmean::Rational;

fn rat() -> impl Strategy<Value = Rational> {
    (0i64..40, prop::sample::select(vec![1i64, 2, 3, 4, 7, 8, 16])).prop_map(|(p, q)| ratio(p, q))
}

fn unit() -> impl Strategy<Value = Rational> {
    (0i64..64, prop::sample::select(vec![2i64, 5, 8, 10, 64, 97])).prop_map(|(p, q)| ratio(p % q, q))
}

fn matrix(max_n: usize) -> impl Strategy<Value = CostMatrix> {
    (1..=max_n).prop_flat_map(|n| prop::collection::vec(rat(), n * n)).prop_map(|v| {
        let n = (v.len() as f64).sqrt() as usize;
        CostMatrix::from_fn(n, |i, j| v[i * n + j].clone()).unwrap()
    })
}

fn seq_pair(max_n: usize) -> impl Strategy<Value = (Vec<Rational>, Vec<Rational>)> {
    (1..=max_n).prop_flat_map(|n| (prop::collection::vec(unit(), n), prop::collection::vec(unit(), n)))
}

fn line_matrix(xs: &[Rational], ys: &[Rational]) -> CostMatrix {
    CostMatrix::from_fn(xs.len(), |i, j| {
        let d = &xs[i] - &ys[j];
        if d < Rational::zero() {
            -d
        } else {
            d
        }
    })
    .unwrap()
}

fn circle_matrix(xs: &[Rational], ys: &[Rational]) -> CostMatrix {
    CostMatrix::from_fn(xs.len(), |i, j| circle_metric(&xs[i], &ys[j])).unwrap()
}

fn brute_exceedance(c: &CostMatrix, t: &Rational) -> usize {
    let n = c.n();
    (0..n)
        .permutations(n)
        .map(|p| p.iter().enumerate().filter(|(i, &j)| c.entry(*i, j) > *t).count())
        .min()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn min_and_max_match_enumeration(c in matrix(7)) {
        let min = solve_min_assignment(&c).unwrap();
        let max = solve_max_assignment(&c).unwrap();
        prop_assert_eq!(&min.total_cost, &brute_force_assignment(&c, Mode::Min).unwrap().total_cost);
        prop_assert_eq!(&max.total_cost, &brute_force_assignment(&c, Mode::Max).unwrap().total_cost);
        prop_assert!(min.is_bijection() && max.is_bijection());
        prop_assert_eq!(c.permutation_cost(&min.permutation), min.total_cost.clone());
        prop_assert_eq!(&min.mean_cost * int(c.n() as i64), min.total_cost.clone());
    }

    #[test]
    fn min_bounded_by_trace_and_transpose_invariant(c in matrix(12)) {
        let min = solve_min_assignment(&c).unwrap();
        prop_assert!(min.total_cost <= c.trace());
        prop_assert_eq!(min.total_cost, solve_min_assignment(&c.transpose()).unwrap().total_cost);
    }

    #[test]
    fn matched_sums_satisfy_triangle_inequality(
        (xs, ys, zs) in (1usize..=10).prop_flat_map(|n| (
            prop::collection::vec(unit(), n),
            prop::collection::vec(unit(), n),
            prop::collection::vec(unit(), n),
        ))
    ) {
        for build in [line_matrix, circle_matrix] {
            let xz = solve_min_assignment(&build(&xs, &zs)).unwrap().total_cost;
            let xy = solve_min_assignment(&build(&xs, &ys)).unwrap().total_cost;
            let yz = solve_min_assignment(&build(&ys, &zs)).unwrap().total_cost;
            prop_assert!(xz <= xy + yz);
        }
    }

    #[test]
    fn sorted_line_agrees_with_solver((xs, ys) in seq_pair(64)) {
        let c = line_matrix(&xs, &ys);
        let fast = solve_sorted_line(&xs, &ys).unwrap();
        prop_assert_eq!(&fast.total_cost, &solve_min_assignment(&c).unwrap().total_cost);
        prop_assert_eq!(c.permutation_cost(&fast.permutation), fast.total_cost.clone());
        let fast_max = solve_sorted_line_max(&xs, &ys).unwrap();
        prop_assert_eq!(fast_max.total_cost, solve_max_assignment(&c).unwrap().total_cost);
    }

    #[test]
    fn sorted_circle_agrees_with_solver((xs, ys) in seq_pair(64)) {
        let c = circle_matrix(&xs, &ys);
        let fast = solve_sorted_circle(&xs, &ys).unwrap();
        prop_assert_eq!(&fast.total_cost, &solve_min_assignment(&c).unwrap().total_cost);
        prop_assert_eq!(c.permutation_cost(&fast.permutation), fast.total_cost.clone());
        prop_assert!(fast.is_bijection());
        let fast_max = solve_sorted_circle_max(&xs, &ys).unwrap();
        prop_assert_eq!(&fast_max.total_cost, &solve_max_assignment(&c).unwrap().total_cost);
        prop_assert_eq!(c.permutation_cost(&fast_max.permutation), fast_max.total_cost);
        prop_assert!(solve_sorted_circle_checked(&xs, &ys).is_ok());
    }

    #[test]
    fn threshold_matching_matches_enumeration(c in matrix(7), t in rat()) {
        prop_assert_eq!(min_exceedance_count(&c, &t).unwrap(), brute_exceedance(&c, &t));
    }

    #[test]
    fn sorted_exceedance_agrees_with_matrix((xs, ys) in seq_pair(40), t in unit()) {
        prop_assert_eq!(
            min_exceedance_sorted_line(&xs, &ys, &t).unwrap(),
            min_exceedance_count(&line_matrix(&xs, &ys), &t).unwrap()
        );
        prop_assert_eq!(
            min_exceedance_sorted_circle(&xs, &ys, &t).unwrap(),
            min_exceedance_count(&circle_matrix(&xs, &ys), &t).unwrap()
        );
    }

    #[test]
    fn exceedance_non_increasing_in_threshold(c in matrix(10), a in rat(), b in rat()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(min_exceedance_count(&c, &hi).unwrap() <= min_exceedance_count(&c, &lo).unwrap());
    }
}

#[test]
fn joint_visit_closed_forms_match_enumeration() {
    for n in 1..=8usize {
        let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
        for a in 0..=n {
            for b in 0..=n {
                // A = {0..a-1}, B = {0..b-1}
                let counts = perms.iter().map(|p| (0..a).filter(|&i| p[i] < b).count());
                let (lo, hi) = counts.minmax().into_option().unwrap();
                assert_eq!(min_joint_visit_count(a, b, n).unwrap(), lo, "min a={a} b={b} n={n}");
                assert_eq!(max_joint_visit_count(a, b, n).unwrap(), hi, "max a={a} b={b} n={n}");
            }
        }
    }
    assert!(min_joint_visit_count(5, 1, 4).is_err());
}

#[test]
fn documented_instances() {
    let m = |rows: &[&[i64]]| CostMatrix::new(rows.iter().map(|r| r.iter().map(|&v| int(v)).collect()).collect()).unwrap();
    let c = m(&[&[0, 1, 2], &[1, 0, 1], &[2, 1, 0]]);
    assert_eq!(solve_min_assignment(&c).unwrap().permutation, vec![0, 1, 2]);
    assert_eq!(solve_max_assignment(&c).unwrap().total_cost, int(4));
    let sw = m(&[&[2, 1], &[1, 2]]);
    assert_eq!(solve_min_assignment(&sw).unwrap().permutation, vec![1, 0]);
    assert_eq!(solve_max_assignment(&sw).unwrap().permutation, vec![0, 1]);

    let r = solve_sorted_line(&[ratio(1, 10), ratio(9, 10)], &[ratio(8, 10), ratio(2, 10)]).unwrap();
    assert_eq!((r.permutation, r.total_cost, r.mean_cost), (vec![1, 0], ratio(1, 5), ratio(1, 10)));
    let r = solve_sorted_line(&vec![int(0); 3], &vec![int(1); 3]).unwrap();
    assert_eq!(r.total_cost, int(3));

    let r = solve_sorted_circle(&[int(0), ratio(1, 2)], &[ratio(1, 2), int(0)]).unwrap();
    assert!(r.total_cost.is_zero());
    let r = solve_sorted_circle(&[ratio(95, 100), ratio(45, 100)], &[ratio(5, 100), ratio(55, 100)]).unwrap();
    assert_eq!(r.total_cost, ratio(1, 5));
    let r = solve_sorted_circle(&[int(0)], &[ratio(1, 2)]).unwrap();
    assert_eq!(r.total_cost, ratio(1, 2));

    let e = CostMatrix::new(vec![vec![ratio(1, 2), ratio(1, 10)], vec![ratio(1, 10), ratio(1, 2)]]).unwrap();
    assert_eq!(min_exceedance_count(&e, &ratio(1, 5)).unwrap(), 0);
    assert_eq!(min_exceedance_count(&m(&[&[1, 1], &[1, 1]]), &ratio(1, 2)).unwrap(), 2);
    assert_eq!(min_exceedance_count(&c, &c.max_entry()).unwrap(), 0);
    assert_eq!(min_joint_visit_count(3, 2, 4).unwrap(), 1);
    assert_eq!(max_joint_visit_count(3, 2, 4).unwrap(), 2);
    assert_eq!(solve_min_assignment(&m(&[&[7]])).unwrap().total_cost, int(7));
}

#[test]
fn rejects_bad_input() {
    assert!(CostMatrix::new(vec![]).is_err());
    assert!(CostMatrix::new(vec![vec![int(1), int(2)]]).is_err());
    assert!(CostMatrix::new(vec![vec![int(-1)]]).is_err());
    assert!(solve_sorted_line(&[int(0)], &[]).is_err());
    let big = CostMatrix::from_fn(10, |_, _| int(1)).unwrap();
    assert!(brute_force_assignment(&big, Mode::Min).is_err());
}
