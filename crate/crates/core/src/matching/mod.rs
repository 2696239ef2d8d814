//! Exact solvers for the optimization over permutations that sits inside
//! every orbit pseudometric: min/max-cost assignment, threshold matching,
//! sort-based fast paths for line and circle metrics, and the closed forms
//! for joint visit counts.
//!
//! Indices are 0-based: a [`Matching`] maps row `i` to column
//! `permutation[i]`.

mod bipartite;
mod hungarian;
mod sorted;

use itertools::Itertools;
use num::{BigInt, One, Signed};

use crate::error::{Error, Result};
use crate::rational::{common_scale, fits_i128, max_abs, Rational, Scalar};


/// Largest `n` accepted by [`brute_force_assignment`].
pub const BRUTE_FORCE_MAX: usize = 9;

#[derive(Debug, Clone, PartialEq, Eq)]
enum Cells {
    Small(Vec<i128>),
    Large(Vec<BigInt>),
}

/// Square matrix of non-negative exact costs.
///
/// Entries are stored as integers over one common denominator, in `i128`
/// whenever every solver's intermediate values provably fit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostMatrix {
    n: usize,
    scale: BigInt,
    cells: Cells,
}

impl CostMatrix {
    pub fn new(rows: Vec<Vec<Rational>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(Error::NotSquare { row, len: r.len(), n });
            }
        }
        let (scale, nums) = common_scale(rows.iter().flatten());
        Self::from_scaled(n, scale, nums)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Rational) -> Result<Self> {
        let rows = (0..n).map(|i| (0..n).map(|j| f(i, j)).collect()).collect();
        Self::new(rows)
    }

    /// Builds from integer numerators over a shared positive `scale`.
    pub(crate) fn from_scaled(n: usize, scale: BigInt, nums: Vec<BigInt>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        debug_assert!(scale.is_positive());
        debug_assert_eq!(nums.len(), n * n);
        if let Some(pos) = nums.iter().position(|v| v.is_negative()) {
            return Err(Error::NegativeCost { row: pos / n, col: pos % n });
        }
        let cells = if fits_i128(&max_abs(&nums), 8 * (n + 2)) {
            Cells::Small(nums.iter().map(|v| i128::from_big(v).expect("checked")).collect())
        } else {
            Cells::Large(nums)
        };
        Ok(CostMatrix { n, scale, cells })
    }

    pub(crate) fn from_scaled_i128(n: usize, scale: BigInt, nums: Vec<i128>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptyMatrix);
        }
        let max = nums.iter().map(|v| v.unsigned_abs()).max().unwrap_or(0);
        if let Some(pos) = nums.iter().position(|v| *v < 0) {
            return Err(Error::NegativeCost { row: pos / n, col: pos % n });
        }
        if fits_i128(&BigInt::from(max), 8 * (n + 2)) {
            Ok(CostMatrix { n, scale, cells: Cells::Small(nums) })
        } else {
            Ok(CostMatrix { n, scale, cells: Cells::Large(nums.into_iter().map(BigInt::from).collect()) })
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, i: usize, j: usize) -> Rational {
        let num = match &self.cells {
            Cells::Small(v) => BigInt::from(v[i * self.n + j]),
            Cells::Large(v) => v[i * self.n + j].clone(),
        };
        Rational::new(num, self.scale.clone())
    }

    pub fn rows(&self) -> Vec<Vec<Rational>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.entry(i, j)).collect()).collect()
    }

    pub fn transpose(&self) -> CostMatrix {
        let n = self.n;
        let cells = match &self.cells {
            Cells::Small(v) => Cells::Small((0..n * n).map(|k| v[(k % n) * n + k / n]).collect()),
            Cells::Large(v) => Cells::Large((0..n * n).map(|k| v[(k % n) * n + k / n].clone()).collect()),
        };
        CostMatrix { n, scale: self.scale.clone(), cells }
    }

    pub fn trace(&self) -> Rational {
        (0..self.n).map(|i| self.entry(i, i)).sum()
    }

    pub fn max_entry(&self) -> Rational {
        let num = match &self.cells {
            Cells::Small(v) => BigInt::from(*v.iter().max().expect("n >= 1")),
            Cells::Large(v) => v.iter().max().expect("n >= 1").clone(),
        };
        Rational::new(num, self.scale.clone())
    }

    /// Sum of the entries selected by `perm`.
    pub fn permutation_cost(&self, perm: &[usize]) -> Rational {
        let num: BigInt = match &self.cells {
            Cells::Small(v) => perm.iter().enumerate().map(|(i, &j)| BigInt::from(v[i * self.n + j])).sum(),
            Cells::Large(v) => perm.iter().enumerate().map(|(i, &j)| &v[i * self.n + j]).sum(),
        };
        Rational::new(num, self.scale.clone())
    }

    /// Largest integer `t` with `entry <= threshold  <=>  numerator <= t`.
    fn scaled_threshold(&self, threshold: &Rational) -> BigInt {
        (threshold * Rational::from_integer(self.scale.clone())).floor().to_integer()
    }
}

/// A permutation together with its exact total and mean cost.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matching {
    pub permutation: Vec<usize>,
    pub total_cost: Rational,
    pub mean_cost: Rational,
}

impl Matching {
    pub(crate) fn new(permutation: Vec<usize>, total_cost: Rational) -> Self {
        let n = permutation.len();
        let mean_cost = &total_cost / Rational::from_integer(BigInt::from(n));
        Matching { permutation, total_cost, mean_cost }
    }

    fn from_matrix(cost: &CostMatrix, permutation: Vec<usize>) -> Self {
        let total = cost.permutation_cost(&permutation);
        Matching::new(permutation, total)
    }

    pub fn is_bijection(&self) -> bool {
        let mut seen = vec![false; self.permutation.len()];
        for &j in &self.permutation {
            if j >= seen.len() || seen[j] {
                return false;
            }
            seen[j] = true;
        }
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Min,
    Max,
}

pub fn solve_min_assignment(cost: &CostMatrix) -> Result<Matching> {
    let perm = match &cost.cells {
        Cells::Small(v) => hungarian::min_assignment(cost.n, v),
        Cells::Large(v) => hungarian::min_assignment(cost.n, v),
    };
    Ok(Matching::from_matrix(cost, perm))
}

/// Maximum-cost assignment, solved as a minimum over `max_entry - cost`.
pub fn solve_max_assignment(cost: &CostMatrix) -> Result<Matching> {
    let perm = match &cost.cells {
        Cells::Small(v) => {
            let top = *v.iter().max().expect("n >= 1");
            let flipped: Vec<i128> = v.iter().map(|c| top - c).collect();
            hungarian::min_assignment(cost.n, &flipped)
        }
        Cells::Large(v) => {
            let top = v.iter().max().expect("n >= 1").clone();
            let flipped: Vec<BigInt> = v.iter().map(|c| &top - c).collect();
            hungarian::min_assignment(cost.n, &flipped)
        }
    };
    Ok(Matching::from_matrix(cost, perm))
}

/// Exhaustive enumeration of all `n!` permutations; ground truth for tests.
pub fn brute_force_assignment(cost: &CostMatrix, mode: Mode) -> Result<Matching> {
    let n = cost.n;
    if n > BRUTE_FORCE_MAX {
        return Err(Error::TooLarge { n, max: BRUTE_FORCE_MAX });
    }
    let mut best: Option<(Vec<usize>, Rational)> = None;
    for perm in (0..n).permutations(n) {
        let c = cost.permutation_cost(&perm);
        let better = match (&best, mode) {
            (None, _) => true,
            (Some((_, b)), Mode::Min) => c < *b,
            (Some((_, b)), Mode::Max) => c > *b,
        };
        if better {
            best = Some((perm, c));
        }
    }
    let (perm, total) = best.expect("n >= 1");
    Ok(Matching::new(perm, total))
}

fn check_pair(xs: &[Rational], ys: &[Rational]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch { left: xs.len(), right: ys.len() });
    }
    if xs.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    Ok(())
}

/// Scaled coordinates for the sort-based paths. `extra` values (thresholds)
/// join the common denominator; the scale is forced even so that antipodes
/// stay integral.
struct Scaled {
    scale: BigInt,
    xs: Vec<BigInt>,
    ys: Vec<BigInt>,
    extra: Vec<BigInt>,
}

impl Scaled {
    fn new(xs: &[Rational], ys: &[Rational], extra: &[Rational]) -> Self {
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        let all: Vec<&Rational> = xs.iter().chain(ys).chain(extra).chain(std::iter::once(&half)).collect();
        let (scale, mut nums) = common_scale(all.iter().copied());
        nums.pop();
        let extra_v = nums.split_off(xs.len() + ys.len());
        let ys_v = nums.split_off(xs.len());
        Scaled { scale, xs: nums, ys: ys_v, extra: extra_v }
    }

    fn small(&self) -> Option<(i128, Vec<i128>, Vec<i128>, Vec<i128>)> {
        let n = self.xs.len();
        let mut max = self.scale.abs();
        for v in self.xs.iter().chain(&self.ys).chain(&self.extra) {
            if v.abs() > max {
                max = v.abs();
            }
        }
        if !fits_i128(&max, 4 * (n + 2)) {
            return None;
        }
        let cv = |v: &[BigInt]| v.iter().map(|x| i128::from_big(x).expect("checked")).collect::<Vec<_>>();
        Some((i128::from_big(&self.scale).expect("checked"), cv(&self.xs), cv(&self.ys), cv(&self.extra)))
    }

    fn total(&self, t: BigInt) -> Rational {
        Rational::new(t, self.scale.clone())
    }
}

/// Rank pairing of the sorted sequences under the cost `|x - y|`.
pub fn solve_sorted_line(xs: &[Rational], ys: &[Rational]) -> Result<Matching> {
    check_pair(xs, ys)?;
    let s = Scaled::new(xs, ys, &[]);
    let (perm, total) = match s.small() {
        Some((_, a, b, _)) => {
            let (p, t) = sorted::line_min(&a, &b);
            (p, BigInt::from(t))
        }
        None => sorted::line_min(&s.xs, &s.ys),
    };
    Ok(Matching::new(perm, s.total(total)))
}

/// Maximum of `Σ |x_i - y_σ(i)|`, attained by the anti-monotone pairing.
pub fn solve_sorted_line_max(xs: &[Rational], ys: &[Rational]) -> Result<Matching> {
    check_pair(xs, ys)?;
    let s = Scaled::new(xs, ys, &[]);
    let (perm, total) = match s.small() {
        Some((_, a, b, _)) => {
            let (p, t) = sorted::line_max(&a, &b);
            (p, BigInt::from(t))
        }
        None => sorted::line_max(&s.xs, &s.ys),
    };
    Ok(Matching::new(perm, s.total(total)))
}

fn check_circle(xs: &[Rational], ys: &[Rational]) -> Result<()> {
    let one = Rational::one();
    for v in xs.iter().chain(ys) {
        if v.is_negative() || *v >= one {
            return Err(Error::InvalidPoint(format!("circle coordinate {v} outside [0, 1)")));
        }
    }
    Ok(())
}

fn circle_min_scaled<T: Scalar>(xs: &[T], ys: &[T], scale: &T) -> Option<(Vec<usize>, T)> {
    match sorted::circle_min(xs, ys, scale) {
        sorted::CircleOutcome::Certified(p, t) => Some((p, t)),
        sorted::CircleOutcome::Unverified => None,
    }
}

fn circle_matrix(xs: &[Rational], ys: &[Rational]) -> Result<CostMatrix> {
    CostMatrix::from_fn(xs.len(), |i, j| crate::spaces::circle_metric(&xs[i], &ys[j]))
}

/// Minimum matched geodesic cost on the circle `[0, 1)`.
///
/// Sorts both sequences and pairs them by rank up to a cyclic shift. The
/// shift is certified optimal by comparison with the exact circle transport
/// cost; if no shift attains it the general solver is used instead.
pub fn solve_sorted_circle(xs: &[Rational], ys: &[Rational]) -> Result<Matching> {
    check_pair(xs, ys)?;
    check_circle(xs, ys)?;
    let s = Scaled::new(xs, ys, &[]);
    let found = match s.small() {
        Some((scale, a, b, _)) => circle_min_scaled(&a, &b, &scale).map(|(p, t)| (p, BigInt::from(t))),
        None => circle_min_scaled(&s.xs, &s.ys, &s.scale),
    };
    match found {
        Some((perm, total)) => Ok(Matching::new(perm, s.total(total))),
        None => solve_min_assignment(&circle_matrix(xs, ys)?),
    }
}

/// Maximum matched geodesic cost on the circle, using
/// `d(a, b) = 1/2 - d(a, b + 1/2)`.
pub fn solve_sorted_circle_max(xs: &[Rational], ys: &[Rational]) -> Result<Matching> {
    check_pair(xs, ys)?;
    check_circle(xs, ys)?;
    let n = xs.len();
    let s = Scaled::new(xs, ys, &[]);
    let antipode = |v: &BigInt| (v + (&s.scale >> 1usize)) % &s.scale;
    let ys_anti: Vec<BigInt> = s.ys.iter().map(antipode).collect();
    let s_anti = Scaled { scale: s.scale.clone(), xs: s.xs.clone(), ys: ys_anti, extra: vec![] };
    let found = match s_anti.small() {
        Some((scale, a, b, _)) => circle_min_scaled(&a, &b, &scale).map(|(p, t)| (p, BigInt::from(t))),
        None => circle_min_scaled(&s_anti.xs, &s_anti.ys, &s_anti.scale),
    };
    match found {
        Some((perm, min_anti)) => {
            let half_n = BigInt::from(n) * (&s.scale >> 1usize);
            Ok(Matching::new(perm, s.total(half_n - min_anti)))
        }
        None => solve_max_assignment(&circle_matrix(xs, ys)?),
    }
}

/// Re-runs the circle fast path against the general solver and fails on any
/// difference in total cost.
pub fn solve_sorted_circle_checked(xs: &[Rational], ys: &[Rational]) -> Result<Matching> {
    let fast = solve_sorted_circle(xs, ys)?;
    let general = solve_min_assignment(&circle_matrix(xs, ys)?)?;
    if fast.total_cost != general.total_cost {
        return Err(Error::InvariantViolation(format!(
            "circle fast path {} disagrees with assignment solver {}",
            fast.total_cost, general.total_cost
        )));
    }
    Ok(fast)
}

/// `min_σ #{i : cost[i][σ(i)] > threshold}`, i.e. `n` minus a maximum
/// matching over the admissible edges `cost <= threshold`.
pub fn min_exceedance_count(cost: &CostMatrix, threshold: &Rational) -> Result<usize> {
    if threshold.is_negative() {
        return Err(Error::NegativeThreshold);
    }
    let n = cost.n;
    let t = cost.scaled_threshold(threshold);
    let adj: Vec<Vec<(usize, usize)>> = match &cost.cells {
        Cells::Small(v) => {
            let t = i128::from_big(&t).unwrap_or(i128::MAX);
            (0..n).map(|i| runs((0..n).map(|j| v[i * n + j] <= t))).collect()
        }
        Cells::Large(v) => (0..n).map(|i| runs((0..n).map(|j| v[i * n + j] <= t))).collect(),
    };
    Ok(n - bipartite::max_matching(n, &adj))
}

fn runs(admissible: impl Iterator<Item = bool>) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut len = 0;
    for (j, ok) in admissible.enumerate() {
        match (ok, start) {
            (true, None) => start = Some(j),
            (false, Some(s)) => {
                out.push((s, j));
                start = None;
            }
            _ => {}
        }
        len = j + 1;
    }
    if let Some(s) = start {
        out.push((s, len));
    }
    out
}

/// [`min_exceedance_count`] for the line cost `|x - y|` without building
/// the matrix.
pub fn min_exceedance_sorted_line(xs: &[Rational], ys: &[Rational], threshold: &Rational) -> Result<usize> {
    check_pair(xs, ys)?;
    if threshold.is_negative() {
        return Err(Error::NegativeThreshold);
    }
    let s = Scaled::new(xs, ys, std::slice::from_ref(threshold));
    let matched = match s.small() {
        Some((_, a, b, e)) => sorted::line_within(&a, &b, &e[0]),
        None => sorted::line_within(&s.xs, &s.ys, &s.extra[0]),
    };
    Ok(xs.len() - matched)
}

/// [`min_exceedance_count`] for the circle metric; admissible neighbours of
/// each point form at most two windows of the sorted partner sequence.
pub fn min_exceedance_sorted_circle(xs: &[Rational], ys: &[Rational], threshold: &Rational) -> Result<usize> {
    check_pair(xs, ys)?;
    check_circle(xs, ys)?;
    if threshold.is_negative() {
        return Err(Error::NegativeThreshold);
    }
    let s = Scaled::new(xs, ys, std::slice::from_ref(threshold));
    fn run<T: Scalar>(xs: &[T], ys: &[T], eps: &T, scale: &T) -> usize {
        let mut b = ys.to_vec();
        b.sort();
        let adj = sorted::circle_windows(xs, &b, eps, scale);
        bipartite::max_matching(b.len(), &adj)
    }
    let matched = match s.small() {
        Some((scale, a, b, e)) => run(&a, &b, &e[0], &scale),
        None => run(&s.xs, &s.ys, &s.extra[0], &s.scale),
    };
    Ok(xs.len() - matched)
}

fn check_counts(a: usize, b: usize, n: usize) -> Result<()> {
    for count in [a, b] {
        if count > n {
            return Err(Error::CountExceedsN { count, n });
        }
    }
    Ok(())
}

/// `min_σ #{i ∈ A : σ(i) ∈ B}` over bijections of `{1..n}` for `|A| = a`,
/// `|B| = b`: `max(0, a + b - n)`.
pub fn min_joint_visit_count(a: usize, b: usize, n: usize) -> Result<usize> {
    check_counts(a, b, n)?;
    Ok((a + b).saturating_sub(n))
}

/// `max_σ #{i ∈ A : σ(i) ∈ B}`: `min(a, b)`.
pub fn max_joint_visit_count(a: usize, b: usize, n: usize) -> Result<usize> {
    check_counts(a, b, n)?;
    Ok(a.min(b))
}
