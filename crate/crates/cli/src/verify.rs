//! Built-in invariant suite. Each check draws seeded random instances, runs
//! them through an [`AssignmentSolver`] where a solver is involved, and
//! compares against an independent oracle.

use itertools::Itertools;
use num::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use weakmean::matching::{self, brute_force_assignment, CostMatrix, Matching, Mode};
use weakmean::orbitstats::{stat_sandwich_check, Observable, OrbitPair, SegmentStatKind};
use weakmean::rational::{int, ratio, Rational};
use weakmean::spaces::{SampleStrategy, StatePoint};
use weakmean::systems::{self, orbit_segment, OrbitSegment, SystemDescriptor};

use crate::config::VerifyLevel;

/// The solver entry points the suite exercises. Swappable so the suite
/// itself can be tested against a faulty implementation.
pub trait AssignmentSolver: Sync {
    fn min_assignment(&self, c: &CostMatrix) -> weakmean::Result<Matching>;
    fn max_assignment(&self, c: &CostMatrix) -> weakmean::Result<Matching>;
    fn min_exceedance(&self, c: &CostMatrix, t: &Rational) -> weakmean::Result<usize>;
}

/// The library's solvers.
pub struct CoreSolver;

impl AssignmentSolver for CoreSolver {
    fn min_assignment(&self, c: &CostMatrix) -> weakmean::Result<Matching> {
        matching::solve_min_assignment(c)
    }
    fn max_assignment(&self, c: &CostMatrix) -> weakmean::Result<Matching> {
        matching::solve_max_assignment(c)
    }
    fn min_exceedance(&self, c: &CostMatrix, t: &Rational) -> weakmean::Result<usize> {
        matching::min_exceedance_count(c, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Check {
    SolverOracle,
    FastPath,
    PseudometricLaws,
    ExceedanceSandwich,
    ShiftStability,
    ObservableSandwich,
    JointVisitClosedForm,
}

impl Check {
    pub const ALL: [Check; 7] = [
        Check::SolverOracle,
        Check::FastPath,
        Check::PseudometricLaws,
        Check::ExceedanceSandwich,
        Check::ShiftStability,
        Check::ObservableSandwich,
        Check::JointVisitClosedForm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::SolverOracle => "solver oracle equivalence",
            Check::FastPath => "fast-path equivalence",
            Check::PseudometricLaws => "symmetry and triangle inequality",
            Check::ExceedanceSandwich => "exceedance sandwich",
            Check::ShiftStability => "shift stability",
            Check::ObservableSandwich => "observable sandwich and contraction",
            Check::JointVisitClosedForm => "joint-visit closed form",
        }
    }
}

/// Instance counts per check.
#[derive(Debug, Clone, Copy)]
pub struct Budget {
    pub matrices_per_n: usize,
    pub fast_path_per_n: usize,
    pub triples: usize,
    pub shift_pairs: usize,
    pub observable_evals: usize,
}

impl Budget {
    pub fn for_level(level: VerifyLevel) -> Self {
        match level {
            VerifyLevel::Quick => Budget { matrices_per_n: 20, fast_path_per_n: 20, triples: 60, shift_pairs: 30, observable_evals: 200 },
            VerifyLevel::Full => Budget { matrices_per_n: 100, fast_path_per_n: 100, triples: 200, shift_pairs: 100, observable_evals: 200 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CheckResult {
    pub check: Check,
    pub name: String,
    pub evaluations: usize,
    pub passed: bool,
    /// First violation, naming the invariant and the instance.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VerifyReport {
    pub level: VerifyLevel,
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

pub fn run_verify(level: VerifyLevel, seed: u64) -> VerifyReport {
    run_verify_with(level, seed, &CoreSolver)
}

pub fn run_verify_with(level: VerifyLevel, seed: u64, solver: &dyn AssignmentSolver) -> VerifyReport {
    let budget = Budget::for_level(level);
    let checks: Vec<CheckResult> = Check::ALL.iter().map(|&c| run_check(c, &budget, seed, solver)).collect();
    VerifyReport { level, seed, passed: checks.iter().all(|c| c.passed), checks }
}

/// Counts evaluations and keeps the first failure.
struct Tally {
    evaluations: usize,
    failure: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Tally { evaluations: 0, failure: None }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.evaluations += 1;
        if !ok && self.failure.is_none() {
            self.failure = Some(what());
        }
    }

    fn error(&mut self, e: weakmean::Error) {
        self.check(false, || format!("error: {e}"));
    }
}

pub fn run_check(check: Check, budget: &Budget, seed: u64, solver: &dyn AssignmentSolver) -> CheckResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (check as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut t = Tally::new();
    let outcome = match check {
        Check::SolverOracle => solver_oracle(&mut rng, budget, solver, &mut t),
        Check::FastPath => fast_path(&mut rng, budget, solver, &mut t),
        Check::PseudometricLaws => pseudometric_laws(&mut rng, budget, solver, &mut t),
        Check::ExceedanceSandwich => exceedance_sandwich(&mut rng, budget, solver, &mut t),
        Check::ShiftStability => shift_stability(&mut rng, budget, &mut t),
        Check::ObservableSandwich => observable_sandwich(&mut rng, budget, &mut t),
        Check::JointVisitClosedForm => joint_visits(&mut t),
    };
    if let Err(e) = outcome {
        t.error(e);
    }
    let failure = t.failure.map(|f| format!("{}: {f}", check.name()));
    CheckResult { check, name: check.name().to_string(), evaluations: t.evaluations, passed: failure.is_none(), failure }
}

fn random_rational(rng: &mut ChaCha8Rng) -> Rational {
    const DENS: [i64; 7] = [1, 2, 3, 4, 7, 8, 16];
    ratio(rng.gen_range(0..40), DENS[rng.gen_range(0..DENS.len())])
}

fn random_unit(rng: &mut ChaCha8Rng) -> Rational {
    let q = [2i64, 5, 8, 10, 64, 97][rng.gen_range(0..6)];
    ratio(rng.gen_range(0..q), q)
}

/// Threshold-count oracle: the minimum over all permutations of the number
/// of entries above `t`.
fn brute_exceedance(c: &CostMatrix, t: &Rational) -> weakmean::Result<usize> {
    let indicator = CostMatrix::from_fn(c.n(), |i, j| if c.entry(i, j) > *t { Rational::one() } else { Rational::zero() })?;
    let total = brute_force_assignment(&indicator, Mode::Min)?.total_cost;
    Ok(total.to_integer().try_into().expect("count fits"))
}

fn solver_oracle(rng: &mut ChaCha8Rng, b: &Budget, solver: &dyn AssignmentSolver, t: &mut Tally) -> weakmean::Result<()> {
    for n in 2..=7 {
        for _ in 0..b.matrices_per_n {
            let c = CostMatrix::from_fn(n, |_, _| random_rational(rng))?;
            let min = solver.min_assignment(&c)?.total_cost;
            let oracle = brute_force_assignment(&c, Mode::Min)?.total_cost;
            t.check(min == oracle, || format!("n = {n}: min assignment {min} != enumeration {oracle}"));
            let max = solver.max_assignment(&c)?.total_cost;
            let oracle = brute_force_assignment(&c, Mode::Max)?.total_cost;
            t.check(max == oracle, || format!("n = {n}: max assignment {max} != enumeration {oracle}"));
            for _ in 0..5 {
                let eps = random_rational(rng);
                let got = solver.min_exceedance(&c, &eps)?;
                let want = brute_exceedance(&c, &eps)?;
                t.check(got == want, || format!("n = {n}, eps = {eps}: exceedance {got} != enumeration {want}"));
            }
        }
    }
    Ok(())
}

fn fast_path(rng: &mut ChaCha8Rng, b: &Budget, solver: &dyn AssignmentSolver, t: &mut Tally) -> weakmean::Result<()> {
    for n in [8usize, 16, 32, 64] {
        for _ in 0..b.fast_path_per_n {
            let xs: Vec<Rational> = (0..n).map(|_| random_unit(rng)).collect();
            let ys: Vec<Rational> = (0..n).map(|_| random_unit(rng)).collect();
            let line = CostMatrix::from_fn(n, |i, j| (&xs[i] - &ys[j]).abs())?;
            let circle = CostMatrix::from_fn(n, |i, j| weakmean::spaces::circle_metric(&xs[i], &ys[j]))?;
            let fast = matching::solve_sorted_line(&xs, &ys)?.total_cost;
            let slow = solver.min_assignment(&line)?.total_cost;
            t.check(fast == slow, || format!("n = {n}: sorted line {fast} != assignment {slow}"));
            let fast = matching::solve_sorted_circle(&xs, &ys)?.total_cost;
            let slow = solver.min_assignment(&circle)?.total_cost;
            t.check(fast == slow, || format!("n = {n}: sorted circle {fast} != assignment {slow}"));
        }
    }
    Ok(())
}

/// One system per space kind, with a point sampler that keeps orbits exact
/// where the space allows it.
fn random_system(rng: &mut ChaCha8Rng, kind: usize) -> SystemDescriptor {
    match kind % 4 {
        0 => {
            if rng.gen() {
                SystemDescriptor::rotation(ratio(rng.gen_range(1..50), 50))
            } else {
                SystemDescriptor::doubling()
            }
        }
        1 => SystemDescriptor::tent(),
        2 => SystemDescriptor::full_shift(rng.gen_range(2..4)),
        _ => SystemDescriptor::product(SystemDescriptor::rotation(ratio(rng.gen_range(1..50), 50)), SystemDescriptor::full_shift(2)),
    }
}

fn random_point(system: &SystemDescriptor, rng: &mut ChaCha8Rng) -> weakmean::Result<StatePoint> {
    let strategy = match rng.gen_range(0..3) {
        0 => SampleStrategy::Uniform,
        1 => SampleStrategy::Dyadic { depth: rng.gen_range(1..12) },
        _ => SampleStrategy::PeriodicTail { period: rng.gen_range(1..4), prefix: rng.gen_range(0..4) },
    };
    systems::sample_point(system, &strategy, rng.gen())
}

fn random_segments(rng: &mut ChaCha8Rng, kind: usize, count: usize, n: usize) -> weakmean::Result<(SystemDescriptor, Vec<OrbitSegment>)> {
    let system = random_system(rng, kind);
    let segs = (0..count)
        .map(|_| random_point(&system, rng).and_then(|p| orbit_segment(&system, &p, n)))
        .collect::<weakmean::Result<Vec<_>>>()?;
    Ok((system, segs))
}

/// `min_σ Σ d(x_i, y_σ(i))` through the solver under test.
fn matched_total(solver: &dyn AssignmentSolver, a: &OrbitSegment, b: &OrbitSegment) -> weakmean::Result<Rational> {
    let pair = OrbitPair::new(a, b)?;
    let n = pair.len();
    let c = CostMatrix::from_fn(n, |i, j| pair.distance(i + 1, j + 1))?;
    Ok(solver.min_assignment(&c)?.total_cost)
}

fn pseudometric_laws(rng: &mut ChaCha8Rng, b: &Budget, solver: &dyn AssignmentSolver, t: &mut Tally) -> weakmean::Result<()> {
    for k in 0..b.triples {
        let n = rng.gen_range(3..=10);
        let (system, segs) = random_segments(rng, k, 3, n)?;
        let slack = int(2) * system.space().truncation_bound();
        let (a, bb, c) = (&segs[0], &segs[1], &segs[2]);
        let ab = matched_total(solver, a, bb)?;
        let ba = matched_total(solver, bb, a)?;
        t.check(ab == ba, || format!("{}: F({ab}) != F({ba}) under swap", system.name()));
        let ac = matched_total(solver, a, c)?;
        let bc = matched_total(solver, bb, c)?;
        let nn = int(n as i64);
        t.check(&ac / &nn <= (&ab + &bc) / &nn + &slack, || format!("{}: triangle {ac} > {ab} + {bc}", system.name()));
    }
    Ok(())
}

fn exceedance_sandwich(rng: &mut ChaCha8Rng, b: &Budget, solver: &dyn AssignmentSolver, t: &mut Tally) -> weakmean::Result<()> {
    let mut k = 0;
    while t.evaluations < 500.max(b.triples * 3) {
        let n = rng.gen_range(3..=10);
        let (system, segs) = random_segments(rng, k, 2, n)?;
        k += 1;
        let pair = OrbitPair::new(&segs[0], &segs[1])?;
        let c = CostMatrix::from_fn(n, |i, j| pair.distance(i + 1, j + 1))?;
        let nn = int(n as i64);
        let f = solver.min_assignment(&c)?.total_cost / &nn;
        let diam = system.space().diameter();
        for eps in [ratio(1, 20), ratio(1, 8), ratio(1, 4), ratio(1, 2)] {
            let e = int(solver.min_exceedance(&c, &eps)? as i64) / &nn;
            let ok = &eps * &e <= f && f <= &diam * &e + &eps;
            t.check(ok, || format!("{}: {eps}·{e} <= {f} <= {diam}·{e} + {eps} fails", system.name()));
        }
    }
    Ok(())
}

fn shift_stability(rng: &mut ChaCha8Rng, b: &Budget, t: &mut Tally) -> weakmean::Result<()> {
    for k in 0..b.shift_pairs {
        let system = match k % 3 {
            0 => SystemDescriptor::rotation(ratio(rng.gen_range(1..97), 97)),
            1 => SystemDescriptor::doubling(),
            _ => SystemDescriptor::tent(),
        };
        let x = random_point(&system, rng)?;
        let y = random_point(&system, rng)?;
        let tx = systems::step(&system, &x)?;
        let diam = system.space().diameter();
        for n in [16usize, 64, 256] {
            let base = OrbitPair::generate(&system, &x, &y, n)?.stat(&SegmentStatKind::WeakMean, n)?.value;
            let shifted = OrbitPair::generate(&system, &tx, &y, n)?.stat(&SegmentStatKind::WeakMean, n)?.value;
            let gap = (&shifted - &base).abs();
            t.check(gap <= &diam / int(n as i64), || format!("{} n = {n}: |{shifted} - {base}| > diam/n", system.name()));
        }
    }
    Ok(())
}

fn observable_sandwich(rng: &mut ChaCha8Rng, b: &Budget, t: &mut Tally) -> weakmean::Result<()> {
    let mut k = 0;
    while t.evaluations < 2 * b.observable_evals {
        let system = match k % 3 {
            0 => SystemDescriptor::rotation(ratio(rng.gen_range(1..97), 97)),
            1 => SystemDescriptor::doubling(),
            _ => SystemDescriptor::full_shift(2),
        };
        k += 1;
        let n = rng.gen_range(4..=24);
        let space = system.space();
        let x = orbit_segment(&system, &random_point(&system, rng)?, n)?;
        let y = orbit_segment(&system, &random_point(&system, rng)?, n)?;
        let anchor = random_point(&system, rng)?;
        let f = match rng.gen_range(0..3) {
            0 => Observable::Coordinate,
            1 => Observable::DistanceTo { point: anchor },
            _ => Observable::SmoothedIndicator { point: anchor, q: int(rng.gen_range(1..9)) },
        };
        let delta = ratio(rng.gen_range(1..10), 20);
        let r = stat_sandwich_check(&x, &y, &f, &delta)?;
        let (lo, hi) = f.range(&space);
        let nn = int(n as i64);
        let count = int(r.exceedances as i64);
        // With values in an interval of width <= 1 the upper side is Δ + δ(n - Δ).
        let unit_upper = &count + &delta * (&nn - &count);
        t.check(r.holds() && (&hi - &lo > Rational::one() || r.middle <= unit_upper), || {
            format!("{}: {} <= {} <= {} fails for {}", system.name(), r.lower, r.middle, r.upper, f.name())
        });
        let pair = OrbitPair::new(&x, &y)?;
        let obs = pair.stat(&SegmentStatKind::Observable { f: Observable::Coordinate }, n)?;
        let wm = pair.stat(&SegmentStatKind::WeakMean, n)?;
        let lip = Observable::Coordinate.lipschitz();
        t.check(&obs.value - &obs.bound <= &lip * (&wm.value + &wm.bound), || {
            format!("{}: coordinate statistic {} exceeds {} · weak mean {}", system.name(), obs.value, lip, wm.value)
        });
    }
    Ok(())
}

fn joint_visits(t: &mut Tally) -> weakmean::Result<()> {
    for n in 1..=8usize {
        let perms: Vec<Vec<usize>> = (0..n).permutations(n).collect();
        for a in 0..=n {
            for b in 0..=n {
                let counts = perms.iter().map(|p| (0..a).filter(|&i| p[i] < b).count());
                let (lo, hi) = counts.minmax().into_option().expect("n >= 1");
                let min = matching::min_joint_visit_count(a, b, n)?;
                let max = matching::max_joint_visit_count(a, b, n)?;
                t.check(min == lo && max == hi, || format!("a = {a}, b = {b}, n = {n}: ({min}, {max}) != ({lo}, {hi})"));
            }
        }
    }
    Ok(())
}
