//! Per-`n` statistics of pairs of orbit segments, limit estimates on
//! `n`-schedules, and densities of integer sets.
//!
//! Every statistic is an exact rational together with a truncation bound
//! (zero unless some state is only known through a truncated expansion or
//! a symbol window).

use std::sync::{Arc, Mutex};

use num::{BigInt, One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{self, CostMatrix};
use crate::rational::{common_scale, int, parts, pow2_inv, ratio, Rational};
use crate::spaces::{self, circle_metric, window_distance_scaled, Coordinate, SpaceDescriptor, StatePoint};
use crate::systems::{orbit_segment, OrbitSegment, SystemDescriptor};

/// A real-valued function on a space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Observable {
    Constant {
        #[serde(with = "parts")]
        value: Rational,
    },
    /// Circle: `d(p, 0)`. Interval: `p`. Sequences: `Σ a_i/(k-1) 2^-(i+1)`.
    /// Products: sum over components. 1-Lipschitz in every case.
    Coordinate,
    DistanceTo { point: StatePoint },
    /// `min(1, q · d(·, point))`.
    SmoothedIndicator {
        point: StatePoint,
        #[serde(with = "parts")]
        q: Rational,
    },
}

impl Observable {
    pub fn name(&self) -> String {
        match self {
            Observable::Constant { value } => format!("constant({value})"),
            Observable::Coordinate => "coordinate".into(),
            Observable::DistanceTo { .. } => "distanceTo".into(),
            Observable::SmoothedIndicator { q, .. } => format!("smoothedIndicator({q})"),
        }
    }

    /// Declared Lipschitz constant.
    pub fn lipschitz(&self) -> Rational {
        match self {
            Observable::Constant { .. } => Rational::zero(),
            Observable::Coordinate | Observable::DistanceTo { .. } => Rational::one(),
            Observable::SmoothedIndicator { q, .. } => q.clone(),
        }
    }

    /// Closed interval containing every value.
    pub fn range(&self, space: &SpaceDescriptor) -> (Rational, Rational) {
        match self {
            Observable::Constant { value } => (value.clone(), value.clone()),
            Observable::Coordinate => (Rational::zero(), coordinate_max(space)),
            Observable::DistanceTo { .. } => (Rational::zero(), space.diameter()),
            Observable::SmoothedIndicator { .. } => (Rational::zero(), Rational::one()),
        }
    }

    pub fn validate(&self, space: &SpaceDescriptor) -> Result<()> {
        match self {
            Observable::DistanceTo { point } => space.check(point),
            Observable::SmoothedIndicator { point, q } => {
                if q.is_negative() {
                    return Err(Error::InvalidConfig(format!("smoothing factor {q} < 0")));
                }
                space.check(point)
            }
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, space: &SpaceDescriptor, p: &StatePoint) -> Result<StatValue> {
        match self {
            Observable::Constant { value } => Ok(StatValue::exact(value.clone())),
            Observable::Coordinate => coordinate(space, p),
            Observable::DistanceTo { point } => {
                let d = spaces::distance(space, p, point)?;
                Ok(StatValue { value: d.value, bound: d.bound })
            }
            Observable::SmoothedIndicator { point, q } => {
                let d = spaces::distance(space, p, point)?;
                let v = (q * &d.value).min(Rational::one());
                Ok(StatValue { value: v, bound: q * d.bound })
            }
        }
    }
}

fn coordinate_max(space: &SpaceDescriptor) -> Rational {
    match space {
        SpaceDescriptor::Circle { .. } => ratio(1, 2),
        SpaceDescriptor::Interval { .. } | SpaceDescriptor::Symbolic { .. } => Rational::one(),
        SpaceDescriptor::Product { left, right } => coordinate_max(left) + coordinate_max(right),
    }
}

fn coordinate(space: &SpaceDescriptor, p: &StatePoint) -> Result<StatValue> {
    space.check(p)?;
    match (space, p) {
        (SpaceDescriptor::Circle { depth }, StatePoint::Circle(c)) => {
            let (v, b) = c.evaluate(*depth);
            Ok(StatValue { value: circle_metric(&v, &Rational::zero()), bound: b })
        }
        (SpaceDescriptor::Interval { depth }, StatePoint::Interval(c)) => {
            let (v, b) = c.evaluate(*depth);
            Ok(StatValue { value: v, bound: b })
        }
        (SpaceDescriptor::Symbolic { alphabet, depth }, StatePoint::Symbolic(s)) => {
            let num = s.window(*depth).into_iter().fold(BigInt::zero(), |acc, a| (acc << 1usize) + a);
            // num = Σ a_i 2^(K-1-i); divide by (k-1) 2^K
            let den = BigInt::from(alphabet - 1) << *depth as usize;
            Ok(StatValue { value: Rational::new(num, den), bound: pow2_inv(*depth) })
        }
        (SpaceDescriptor::Product { left, right }, StatePoint::Product(a, b)) => {
            let l = coordinate(left, a)?;
            let r = coordinate(right, b)?;
            Ok(StatValue { value: l.value + r.value, bound: l.bound + r.bound })
        }
        _ => unreachable!("checked above"),
    }
}

/// An exact statistic with its truncation bound: the untruncated quantity
/// lies in `[value - bound, value + bound]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatValue {
    #[serde(with = "parts")]
    pub value: Rational,
    #[serde(with = "parts")]
    pub bound: Rational,
}

impl StatValue {
    pub fn exact(value: Rational) -> Self {
        StatValue { value, bound: Rational::zero() }
    }

    /// Sound test of `true value <= t`.
    pub fn certainly_le(&self, t: &Rational) -> bool {
        &self.value + &self.bound <= *t
    }

    /// Sound test of `true value > t`.
    pub fn certainly_gt(&self, t: &Rational) -> bool {
        &self.value - &self.bound > *t
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum SegmentStatKind {
    /// `min_σ (1/n) Σ d(T^i x, T^σ(i) y)`.
    WeakMean,
    /// `(1/n) Σ d(T^i x, T^i y)`.
    Besicovitch,
    /// `max_σ (1/n) Σ d(T^i x, T^σ(i) y)`.
    SupPerm,
    /// `min_σ #{i : d(T^i x, T^σ(i) y) > eps} / n`.
    Exceedance {
        #[serde(with = "parts")]
        eps: Rational,
    },
    /// `#{i : d(T^i x, T^i y) > eps} / n`.
    BesicovitchExceedance {
        #[serde(with = "parts")]
        eps: Rational,
    },
    /// `min_σ (1/n) Σ |f(T^i x) - f(T^σ(i) y)|`.
    Observable { f: Observable },
    /// `min_σ #{i : |f(T^i x) - f(T^σ(i) y)| > eps} / n`.
    ObservableExceedance {
        f: Observable,
        #[serde(with = "parts")]
        eps: Rational,
    },
}

impl SegmentStatKind {
    pub fn label(&self) -> String {
        match self {
            SegmentStatKind::WeakMean => "weakMean".into(),
            SegmentStatKind::Besicovitch => "besicovitch".into(),
            SegmentStatKind::SupPerm => "supPerm".into(),
            SegmentStatKind::Exceedance { eps } => format!("exceedance({eps})"),
            SegmentStatKind::BesicovitchExceedance { eps } => format!("besicovitchExceedance({eps})"),
            SegmentStatKind::Observable { f } => format!("observable({})", f.name()),
            SegmentStatKind::ObservableExceedance { f, eps } => format!("observableExceedance({}, {eps})", f.name()),
        }
    }

    fn check(&self, space: &SpaceDescriptor) -> Result<()> {
        match self {
            SegmentStatKind::Exceedance { eps } | SegmentStatKind::BesicovitchExceedance { eps } if eps.is_negative() => {
                Err(Error::NegativeThreshold)
            }
            SegmentStatKind::ObservableExceedance { eps, .. } if eps.is_negative() => Err(Error::NegativeThreshold),
            SegmentStatKind::Observable { f } | SegmentStatKind::ObservableExceedance { f, .. } => f.validate(space),
            _ => Ok(()),
        }
    }
}

fn refs(v: &[StatePoint]) -> Vec<&StatePoint> {
    v.iter().collect()
}

/// Distance data of one component of the phase space along both orbits.
#[derive(Debug, Clone)]
enum Coords {
    Scalar { circle: bool, xs: Vec<Rational>, ys: Vec<Rational>, bound: Rational },
    Windows { xs: Vec<Packed>, ys: Vec<Packed>, depth: u32 },
    Product(Box<Coords>, Box<Coords>),
}

#[derive(Debug, Clone)]
enum Packed {
    Binary(u128),
    Symbols(Vec<u32>),
}

fn pack(alphabet: u32, w: Vec<u32>) -> Packed {
    if alphabet == 2 {
        Packed::Binary(w.iter().fold(0u128, |acc, &b| (acc << 1) | b as u128))
    } else {
        Packed::Symbols(w)
    }
}

fn packed_distance(a: &Packed, b: &Packed) -> i128 {
    match (a, b) {
        (Packed::Binary(a), Packed::Binary(b)) => (a ^ b) as i128,
        (Packed::Symbols(a), Packed::Symbols(b)) => window_distance_scaled(a, b),
        _ => unreachable!("both sides share an alphabet"),
    }
}

impl Coords {
    fn build(space: &SpaceDescriptor, xs: &[&StatePoint], ys: &[&StatePoint]) -> Result<Coords> {
        match space {
            SpaceDescriptor::Circle { depth } | SpaceDescriptor::Interval { depth } => {
                let circle = matches!(space, SpaceDescriptor::Circle { .. });
                let mut bound = Rational::zero();
                let mut coord = |p: &StatePoint| -> Result<Rational> {
                    let c = match p {
                        StatePoint::Circle(c) | StatePoint::Interval(c) => c,
                        _ => return Err(Error::SpaceMismatch(format!("{} state in a {} space", p.kind_name(), space.kind_name()))),
                    };
                    if let Coordinate::Expansion(_) = c {
                        bound = pow2_inv(*depth);
                    }
                    let (v, _) = c.evaluate(*depth);
                    Ok(if circle && v >= Rational::one() { v - Rational::one() } else { v })
                };
                let xv = xs.iter().map(|p| coord(p)).collect::<Result<Vec<_>>>()?;
                let yv = ys.iter().map(|p| coord(p)).collect::<Result<Vec<_>>>()?;
                Ok(Coords::Scalar { circle, xs: xv, ys: yv, bound })
            }
            SpaceDescriptor::Symbolic { alphabet, depth } => {
                let win = |p: &&StatePoint| match p {
                    StatePoint::Symbolic(s) => Ok(pack(*alphabet, s.window(*depth))),
                    _ => Err(Error::SpaceMismatch(format!("{} state in a symbolic space", p.kind_name()))),
                };
                Ok(Coords::Windows {
                    xs: xs.iter().map(win).collect::<Result<_>>()?,
                    ys: ys.iter().map(win).collect::<Result<_>>()?,
                    depth: *depth,
                })
            }
            SpaceDescriptor::Product { left, right } => {
                let split = |v: &[&StatePoint]| -> Result<(Vec<StatePoint>, Vec<StatePoint>)> {
                    v.iter()
                        .map(|p| match p {
                            StatePoint::Product(a, b) => Ok(((**a).clone(), (**b).clone())),
                            _ => Err(Error::SpaceMismatch(format!("{} state in a product space", p.kind_name()))),
                        })
                        .collect::<Result<Vec<_>>>()
                        .map(|v| v.into_iter().unzip())
                };
                let (xl, xr) = split(xs)?;
                let (yl, yr) = split(ys)?;
                Ok(Coords::Product(
                    Box::new(Coords::build(left, &refs(&xl), &refs(&yl))?),
                    Box::new(Coords::build(right, &refs(&xr), &refs(&yr))?),
                ))
            }
        }
    }

    fn bound(&self) -> Rational {
        match self {
            Coords::Scalar { bound, .. } => bound.clone(),
            Coords::Windows { depth, .. } => pow2_inv(*depth),
            Coords::Product(a, b) => a.bound() + b.bound(),
        }
    }

    /// Common denominator of every distance value of this component.
    fn scale(&self) -> BigInt {
        match self {
            Coords::Scalar { xs, ys, .. } => common_scale(xs.iter().chain(ys.iter())).0,
            Coords::Windows { depth, .. } => BigInt::one() << *depth as usize,
            Coords::Product(a, b) => num::integer::lcm(a.scale(), b.scale()),
        }
    }

    /// Distances of all pairs `(i, j)`, `i, j < n`, as numerators over `scale`.
    fn matrix_nums(&self, n: usize, scale: &BigInt) -> Vec<BigInt> {
        match self {
            Coords::Scalar { circle, xs, ys, .. } => {
                let s = Rational::from_integer(scale.clone());
                let xi: Vec<BigInt> = xs[..n].iter().map(|v| (v * &s).to_integer()).collect();
                let yi: Vec<BigInt> = ys[..n].iter().map(|v| (v * &s).to_integer()).collect();
                let mut out = Vec::with_capacity(n * n);
                for a in &xi {
                    for b in &yi {
                        let d = (a - b).abs();
                        if *circle {
                            let w = scale - &d;
                            out.push(if w < d { w } else { d });
                        } else {
                            out.push(d);
                        }
                    }
                }
                out
            }
            Coords::Windows { xs, ys, depth } => {
                let factor = scale / (BigInt::one() << *depth as usize);
                let mut out = Vec::with_capacity(n * n);
                for a in &xs[..n] {
                    for b in &ys[..n] {
                        out.push(BigInt::from(packed_distance(a, b)) * &factor);
                    }
                }
                out
            }
            Coords::Product(a, b) => {
                let l = a.matrix_nums(n, scale);
                let r = b.matrix_nums(n, scale);
                l.into_iter().zip(r).map(|(u, v)| u + v).collect()
            }
        }
    }

    /// `d(x_i, y_j)`.
    fn dist(&self, i: usize, j: usize) -> Rational {
        match self {
            Coords::Scalar { circle: true, xs, ys, .. } => circle_metric(&xs[i], &ys[j]),
            Coords::Scalar { xs, ys, .. } => (&xs[i] - &ys[j]).abs(),
            Coords::Windows { xs, ys, depth } => {
                Rational::new(BigInt::from(packed_distance(&xs[i], &ys[j])), BigInt::one() << *depth as usize)
            }
            Coords::Product(a, b) => a.dist(i, j) + b.dist(i, j),
        }
    }

    fn cost_matrix(&self, n: usize) -> Result<CostMatrix> {
        if let Coords::Windows { xs, ys, depth } = self {
            let nums = xs[..n].iter().flat_map(|a| ys[..n].iter().map(move |b| packed_distance(a, b))).collect();
            return CostMatrix::from_scaled_i128(n, BigInt::one() << *depth as usize, nums);
        }
        let scale = self.scale();
        let nums = self.matrix_nums(n, &scale);
        CostMatrix::from_scaled(n, scale, nums)
    }
}

/// Two equally long orbit segments of one system, with everything the
/// statistics need precomputed. Statistics at `n` use the first `n` states.
#[derive(Debug, Clone)]
pub struct OrbitPair {
    space: SpaceDescriptor,
    x: Arc<OrbitSegment>,
    y: Arc<OrbitSegment>,
    coords: Coords,
    identical: bool,
    /// `f` values along both full segments, filled on first use.
    observed: Arc<Mutex<Vec<(Observable, Arc<ObservedValues>)>>>,
}

#[derive(Debug)]
struct ObservedValues {
    fx: Vec<Rational>,
    fy: Vec<Rational>,
    /// `bound_prefix[i]`: largest evaluation bound among the first `i + 1` terms.
    bound_prefix: Vec<Rational>,
}

impl OrbitPair {
    pub fn new(x: &OrbitSegment, y: &OrbitSegment) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
        }
        if x.system.space() != y.system.space() {
            return Err(Error::SpaceMismatch(format!("{} against {}", x.system.name(), y.system.name())));
        }
        let space = x.system.space();
        let xs: Vec<&StatePoint> = x.states.iter().collect();
        let ys: Vec<&StatePoint> = y.states.iter().collect();
        let coords = Coords::build(&space, &xs, &ys)?;
        Ok(OrbitPair {
            space,
            identical: x.states == y.states,
            x: Arc::new(x.clone()),
            y: Arc::new(y.clone()),
            coords,
            observed: Arc::default(),
        })
    }

    /// Generates both orbits of length `n` and pairs them.
    pub fn generate(system: &SystemDescriptor, x: &StatePoint, y: &StatePoint, n: usize) -> Result<Self> {
        let sx = orbit_segment(system, x, n)?;
        let sy = orbit_segment(system, y, n)?;
        Self::new(&sx, &sy)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn space(&self) -> &SpaceDescriptor {
        &self.space
    }

    pub fn x(&self) -> &OrbitSegment {
        &self.x
    }

    pub fn y(&self) -> &OrbitSegment {
        &self.y
    }

    /// Per-term distance truncation bound.
    pub fn term_bound(&self) -> Rational {
        if self.identical {
            Rational::zero()
        } else {
            self.coords.bound()
        }
    }

    /// `d(T^i x, T^j y)`, 1-based, truncated.
    pub fn distance(&self, i: usize, j: usize) -> Rational {
        self.coords.dist(i - 1, j - 1)
    }

    fn check_n(&self, n: usize) -> Result<()> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidSchedule(format!("statistic at n = {n} on segments of length {}", self.len())));
        }
        Ok(())
    }

    fn scalar(&self) -> Option<(bool, &[Rational], &[Rational])> {
        match &self.coords {
            Coords::Scalar { circle, xs, ys, .. } => Some((*circle, xs, ys)),
            _ => None,
        }
    }

    /// `min_σ Σ_{i<=n} d(T^i x, T^σ(i) y)`, truncated.
    pub fn min_total(&self, n: usize) -> Result<Rational> {
        self.check_n(n)?;
        Ok(match self.scalar() {
            Some((true, xs, ys)) => matching::solve_sorted_circle(&xs[..n], &ys[..n])?.total_cost,
            Some((false, xs, ys)) => matching::solve_sorted_line(&xs[..n], &ys[..n])?.total_cost,
            None => matching::solve_min_assignment(&self.coords.cost_matrix(n)?)?.total_cost,
        })
    }

    pub fn max_total(&self, n: usize) -> Result<Rational> {
        self.check_n(n)?;
        Ok(match self.scalar() {
            Some((true, xs, ys)) => matching::solve_sorted_circle_max(&xs[..n], &ys[..n])?.total_cost,
            Some((false, xs, ys)) => matching::solve_sorted_line_max(&xs[..n], &ys[..n])?.total_cost,
            None => matching::solve_max_assignment(&self.coords.cost_matrix(n)?)?.total_cost,
        })
    }

    /// `min_σ #{i <= n : d(T^i x, T^σ(i) y) > eps}` on truncated distances.
    pub fn min_exceedance(&self, n: usize, eps: &Rational) -> Result<usize> {
        self.check_n(n)?;
        let eps = if eps.is_negative() { Rational::zero() } else { eps.clone() };
        match self.scalar() {
            Some((true, xs, ys)) => matching::min_exceedance_sorted_circle(&xs[..n], &ys[..n], &eps),
            Some((false, xs, ys)) => matching::min_exceedance_sorted_line(&xs[..n], &ys[..n], &eps),
            None => matching::min_exceedance_count(&self.coords.cost_matrix(n)?, &eps),
        }
    }

    fn diagonal_exceedance(&self, n: usize, eps: &Rational) -> usize {
        (0..n).filter(|&i| self.coords.dist(i, i) > *eps).count()
    }

    fn observed(&self, f: &Observable) -> Result<Arc<ObservedValues>> {
        if let Some((_, v)) = self.observed.lock().expect("observable cache").iter().find(|(g, _)| g == f) {
            return Ok(v.clone());
        }
        let fx = self.x.states.iter().map(|p| f.evaluate(&self.space, p)).collect::<Result<Vec<_>>>()?;
        let fy = self.y.states.iter().map(|p| f.evaluate(&self.space, p)).collect::<Result<Vec<_>>>()?;
        let mut bound_prefix = Vec::with_capacity(fx.len());
        let mut b = Rational::zero();
        for (u, v) in fx.iter().zip(&fy) {
            b = b.max(u.bound.clone()).max(v.bound.clone());
            bound_prefix.push(b.clone());
        }
        let values = Arc::new(ObservedValues {
            fx: fx.into_iter().map(|v| v.value).collect(),
            fy: fy.into_iter().map(|v| v.value).collect(),
            bound_prefix,
        });
        self.observed.lock().expect("observable cache").push((f.clone(), values.clone()));
        Ok(values)
    }

    fn observable_values(&self, f: &Observable, n: usize) -> Result<(Vec<Rational>, Vec<Rational>, Rational)> {
        let v = self.observed(f)?;
        Ok((v.fx[..n].to_vec(), v.fy[..n].to_vec(), v.bound_prefix[n - 1].clone()))
    }

    /// Bounds an exceedance count whose thresholds are only known to within
    /// `b`: `count(eps + b) <= true <= count(eps - b)`.
    fn exceedance_value(&self, n: usize, eps: &Rational, b: &Rational, count: impl Fn(&Rational) -> Result<usize>) -> Result<StatValue> {
        let c = count(eps)?;
        let nn = int(n as i64);
        if b.is_zero() {
            return Ok(StatValue::exact(int(c as i64) / nn));
        }
        let lo = count(&(eps + b))?;
        let hi = count(&(eps - b).max(Rational::zero()))?;
        let spread = (c - lo).max(hi - c);
        Ok(StatValue { value: int(c as i64) / &nn, bound: int(spread as i64) / nn })
    }

    pub fn stat(&self, kind: &SegmentStatKind, n: usize) -> Result<StatValue> {
        self.check_n(n)?;
        kind.check(&self.space)?;
        let nn = int(n as i64);
        let b = self.term_bound();
        match kind {
            SegmentStatKind::WeakMean => Ok(StatValue { value: self.min_total(n)? / nn, bound: b }),
            SegmentStatKind::SupPerm => Ok(StatValue { value: self.max_total(n)? / nn, bound: b }),
            SegmentStatKind::Besicovitch => {
                let total: Rational = (0..n).map(|i| self.coords.dist(i, i)).sum();
                Ok(StatValue { value: total / nn, bound: b })
            }
            SegmentStatKind::Exceedance { eps } => self.exceedance_value(n, eps, &b, |e| self.min_exceedance(n, e)),
            SegmentStatKind::BesicovitchExceedance { eps } => {
                self.exceedance_value(n, eps, &b, |e| Ok(self.diagonal_exceedance(n, e)))
            }
            SegmentStatKind::Observable { f } => {
                let (fx, fy, fb) = self.observable_values(f, n)?;
                let total = matching::solve_sorted_line(&fx, &fy)?.total_cost;
                let bound = if self.identical { Rational::zero() } else { fb * ratio(2, 1) };
                Ok(StatValue { value: total / nn, bound })
            }
            SegmentStatKind::ObservableExceedance { f, eps } => {
                let (fx, fy, fb) = self.observable_values(f, n)?;
                let bound = if self.identical { Rational::zero() } else { fb * ratio(2, 1) };
                self.exceedance_value(n, eps, &bound, |e| matching::min_exceedance_sorted_line(&fx, &fy, e))
            }
        }
    }
}

/// One statistic on two segments of equal length, at that full length.
pub fn segment_stat(kind: &SegmentStatKind, seg_x: &OrbitSegment, seg_y: &OrbitSegment) -> Result<StatValue> {
    let pair = OrbitPair::new(seg_x, seg_y)?;
    pair.stat(kind, pair.len())
}

/// The three sides of `δ·Δ <= min_σ Σ |f diff| <= w·Δ + δ·(n - Δ)`, where
/// `Δ = min_σ #{|f diff| > δ}` and `w` is the width of the range of `f`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SandwichReport {
    pub n: usize,
    #[serde(with = "parts")]
    pub delta: Rational,
    pub exceedances: usize,
    #[serde(with = "parts")]
    pub lower: Rational,
    #[serde(with = "parts")]
    pub middle: Rational,
    #[serde(with = "parts")]
    pub upper: Rational,
}

impl SandwichReport {
    pub fn holds(&self) -> bool {
        self.lower <= self.middle && self.middle <= self.upper
    }
}

pub fn stat_sandwich_check(seg_x: &OrbitSegment, seg_y: &OrbitSegment, f: &Observable, delta: &Rational) -> Result<SandwichReport> {
    if !delta.is_positive() {
        return Err(Error::InvalidConfig(format!("sandwich threshold {delta} must be positive")));
    }
    let pair = OrbitPair::new(seg_x, seg_y)?;
    f.validate(&pair.space)?;
    let n = pair.len();
    let (fx, fy, _) = pair.observable_values(f, n)?;
    let middle = matching::solve_sorted_line(&fx, &fy)?.total_cost;
    let count = matching::min_exceedance_sorted_line(&fx, &fy, delta)?;
    let (lo, hi) = f.range(&pair.space);
    let width = hi - lo;
    let cnt = int(count as i64);
    let report = SandwichReport {
        n,
        delta: delta.clone(),
        exceedances: count,
        lower: delta * &cnt,
        middle,
        upper: width * &cnt + delta * int((n - count) as i64),
    };
    if !report.holds() {
        return Err(Error::InvariantViolation(format!(
            "observable sandwich violated: {} <= {} <= {} fails",
            report.lower, report.middle, report.upper
        )));
    }
    Ok(report)
}

/// Strictly increasing sequence of positive horizons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Schedule(pub Vec<usize>);

impl Schedule {
    /// `{2^lo, …, 2^hi}`.
    pub fn geometric(lo: u32, hi: u32) -> Self {
        Schedule((lo..=hi).map(|e| 1usize << e).collect())
    }

    pub fn validate(&self, tail_window: usize) -> Result<()> {
        if self.0.is_empty() {
            return Err(Error::InvalidSchedule("empty schedule".into()));
        }
        if self.0[0] == 0 {
            return Err(Error::InvalidSchedule("schedule entries must be positive".into()));
        }
        if self.0.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSchedule("schedule must be strictly increasing".into()));
        }
        if tail_window == 0 || tail_window > self.0.len() {
            return Err(Error::InvalidSchedule(format!(
                "tail window {tail_window} must lie in 1..={}",
                self.0.len()
            )));
        }
        Ok(())
    }

    pub fn max(&self) -> usize {
        self.0.last().copied().unwrap_or(0)
    }

    /// Parses `"lo..hi"` (powers of two) or a comma-separated list.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((lo, hi)) = s.split_once("..") {
            let bad = || Error::InvalidSchedule(format!("bad exponent range {s:?}"));
            let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
            let hi: u32 = hi.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            if lo > hi || hi > 30 {
                return Err(bad());
            }
            return Ok(Schedule::geometric(lo, hi));
        }
        s.split(',')
            .map(|t| t.trim().parse::<usize>().map_err(|_| Error::InvalidSchedule(format!("bad schedule entry {t:?}"))))
            .collect::<Result<Vec<_>>>()
            .map(Schedule)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Sample {
    pub n: usize,
    #[serde(with = "parts")]
    pub value: Rational,
    #[serde(with = "parts")]
    pub bound: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LimitEstimate {
    pub schedule: Schedule,
    pub samples: Vec<Sample>,
    #[serde(with = "parts")]
    pub limsup_estimate: Rational,
    #[serde(with = "parts")]
    pub liminf_estimate: Rational,
    /// Largest truncation bound among the tail samples.
    #[serde(with = "parts")]
    pub bound: Rational,
    pub tail_window: usize,
    #[serde(with = "parts")]
    pub tolerance: Rational,
    pub converged: bool,
}

impl LimitEstimate {
    fn from_samples(schedule: &Schedule, samples: Vec<Sample>, tail_window: usize, tolerance: &Rational) -> Self {
        let tail = &samples[samples.len() - tail_window..];
        let limsup = tail.iter().map(|s| &s.value).max().cloned().expect("non-empty tail");
        let liminf = tail.iter().map(|s| &s.value).min().cloned().expect("non-empty tail");
        let bound = tail.iter().map(|s| &s.bound).max().cloned().expect("non-empty tail");
        LimitEstimate {
            converged: &limsup - &liminf <= *tolerance,
            schedule: schedule.clone(),
            samples,
            limsup_estimate: limsup,
            liminf_estimate: liminf,
            bound,
            tail_window,
            tolerance: tolerance.clone(),
        }
    }

    pub fn limsup(&self) -> StatValue {
        StatValue { value: self.limsup_estimate.clone(), bound: self.bound.clone() }
    }

    pub fn liminf(&self) -> StatValue {
        StatValue { value: self.liminf_estimate.clone(), bound: self.bound.clone() }
    }
}

/// Evaluates `stat_fn` along `schedule` (in parallel, collected in order)
/// and summarizes the last `tail_window` samples.
pub fn estimate_limit<F>(stat_fn: F, schedule: &Schedule, tail_window: usize, tolerance: &Rational) -> Result<LimitEstimate>
where
    F: Fn(usize) -> Result<StatValue> + Sync,
{
    schedule.validate(tail_window)?;
    let samples = schedule
        .0
        .par_iter()
        .map(|&n| stat_fn(n).map(|v| Sample { n, value: v.value, bound: v.bound }))
        .collect::<Result<Vec<_>>>()?;
    Ok(LimitEstimate::from_samples(schedule, samples, tail_window, tolerance))
}

/// A yes/no reading of a limit estimate against a tolerance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Verdict {
    pub consistent: bool,
    pub estimate: LimitEstimate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PairRelation {
    /// `limsup F_n <= tolerance`.
    pub weakly_mean_asymptotic: Verdict,
    /// `liminf F_n <= tolerance`.
    pub weakly_mean_proximal: Verdict,
    /// `liminf max_σ (1/n) Σ d <= tolerance`.
    pub strong_mean_proximal: Verdict,
}

pub fn pair_relation(
    system: &SystemDescriptor,
    x: &StatePoint,
    y: &StatePoint,
    schedule: &Schedule,
    tail_window: usize,
    tolerance: &Rational,
) -> Result<PairRelation> {
    schedule.validate(tail_window)?;
    let pair = OrbitPair::generate(system, x, y, schedule.max())?;
    let wm = estimate_limit(|n| pair.stat(&SegmentStatKind::WeakMean, n), schedule, tail_window, tolerance)?;
    let sp = estimate_limit(|n| pair.stat(&SegmentStatKind::SupPerm, n), schedule, tail_window, tolerance)?;
    Ok(PairRelation {
        weakly_mean_asymptotic: Verdict { consistent: wm.limsup().certainly_le(tolerance), estimate: wm.clone() },
        weakly_mean_proximal: Verdict { consistent: wm.liminf().certainly_le(tolerance), estimate: wm },
        strong_mean_proximal: Verdict { consistent: sp.liminf().certainly_le(tolerance), estimate: sp },
    })
}

/// A subset of `{0, …, horizon-1}`.
#[derive(Clone)]
pub enum IntegerSetView {
    Predicate { horizon: usize, contains: Arc<dyn Fn(usize) -> bool + Send + Sync> },
    Indices { horizon: usize, sorted: Vec<usize> },
}

impl std::fmt::Debug for IntegerSetView {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            IntegerSetView::Predicate { horizon, .. } => write!(f, "Predicate {{ horizon: {horizon} }}"),
            IntegerSetView::Indices { horizon, sorted } => {
                write!(f, "Indices {{ horizon: {horizon}, len: {} }}", sorted.len())
            }
        }
    }
}

impl IntegerSetView {
    pub fn predicate(horizon: usize, contains: impl Fn(usize) -> bool + Send + Sync + 'static) -> Self {
        IntegerSetView::Predicate { horizon, contains: Arc::new(contains) }
    }

    pub fn indices(horizon: usize, mut v: Vec<usize>) -> Result<Self> {
        v.sort_unstable();
        v.dedup();
        if v.last().is_some_and(|&m| m >= horizon) {
            return Err(Error::InvalidSchedule(format!("index beyond horizon {horizon}")));
        }
        Ok(IntegerSetView::Indices { horizon, sorted: v })
    }

    pub fn horizon(&self) -> usize {
        match self {
            IntegerSetView::Predicate { horizon, .. } | IntegerSetView::Indices { horizon, .. } => *horizon,
        }
    }

    pub fn complement(&self) -> IntegerSetView {
        let this = self.clone();
        IntegerSetView::predicate(self.horizon(), move |k| !this.contains(k))
    }

    pub fn contains(&self, k: usize) -> bool {
        match self {
            IntegerSetView::Predicate { contains, .. } => contains(k),
            IntegerSetView::Indices { sorted, .. } => sorted.binary_search(&k).is_ok(),
        }
    }

    /// `#(F ∩ [0, n-1])`.
    pub fn count_below(&self, n: usize) -> usize {
        match self {
            IntegerSetView::Predicate { contains, .. } => (0..n).filter(|&k| contains(k)).count(),
            IntegerSetView::Indices { sorted, .. } => sorted.partition_point(|&k| k < n),
        }
    }
}

fn density(view: &IntegerSetView, schedule: &Schedule, tail_window: usize) -> Result<LimitEstimate> {
    schedule.validate(tail_window)?;
    if schedule.max() > view.horizon() {
        return Err(Error::InvalidSchedule(format!(
            "schedule reaches {} beyond the horizon {}",
            schedule.max(),
            view.horizon()
        )));
    }
    estimate_limit(
        |n| Ok(StatValue::exact(int(view.count_below(n) as i64) / int(n as i64))),
        schedule,
        tail_window,
        &Rational::zero(),
    )
}

/// `#(F ∩ [0, n-1]) / n` on the schedule; the upper density estimate is
/// `limsup_estimate`.
pub fn upper_density(view: &IntegerSetView, schedule: &Schedule, tail_window: usize) -> Result<LimitEstimate> {
    density(view, schedule, tail_window)
}

/// Same samples as [`upper_density`]; the lower density estimate is
/// `liminf_estimate`.
pub fn lower_density(view: &IntegerSetView, schedule: &Schedule, tail_window: usize) -> Result<LimitEstimate> {
    density(view, schedule, tail_window)
}

/// Flat record for CSV export.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StatRecord {
    pub pair_id: String,
    pub stat_kind: String,
    pub n: usize,
    #[serde(with = "parts")]
    pub value: Rational,
    #[serde(with = "parts")]
    pub bound: Rational,
}

pub fn records(pair_id: &str, kind: &SegmentStatKind, est: &LimitEstimate) -> Vec<StatRecord> {
    est.samples
        .iter()
        .map(|s| StatRecord {
            pair_id: pair_id.to_string(),
            stat_kind: kind.label(),
            n: s.n,
            value: s.value.clone(),
            bound: s.bound.clone(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stat_function() {
        let s = Schedule::geometric(4, 8);
        let e = estimate_limit(|_| Ok(StatValue::exact(ratio(1, 3))), &s, 3, &Rational::zero()).unwrap();
        assert_eq!((e.limsup_estimate.clone(), e.liminf_estimate.clone()), (ratio(1, 3), ratio(1, 3)));
        assert!(e.converged);
    }

    #[test]
    fn reciprocal_decay() {
        let f = |n: usize| Ok(StatValue::exact(ratio(1, n as i64)));
        let e = estimate_limit(f, &Schedule::geometric(4, 10), 3, &ratio(1, 100)).unwrap();
        assert_eq!(e.limsup_estimate, ratio(1, 256));
        assert!(e.converged);
        let e = estimate_limit(f, &Schedule::geometric(4, 8), 3, &ratio(1, 100)).unwrap();
        assert!(!e.converged);
    }

    #[test]
    fn schedule_errors() {
        let f = |_: usize| Ok(StatValue::exact(Rational::zero()));
        assert!(estimate_limit(f, &Schedule(vec![]), 1, &Rational::zero()).is_err());
        assert!(estimate_limit(f, &Schedule(vec![4, 4]), 1, &Rational::zero()).is_err());
        assert!(estimate_limit(f, &Schedule(vec![4, 8]), 3, &Rational::zero()).is_err());
        assert_eq!(Schedule::parse("4..6").unwrap(), Schedule(vec![16, 32, 64]));
        assert_eq!(Schedule::parse("3, 9").unwrap(), Schedule(vec![3, 9]));
    }

    #[test]
    fn even_numbers_density() {
        let v = IntegerSetView::predicate(1 << 12, |k| k % 2 == 0);
        let s = Schedule::geometric(4, 12);
        let u = upper_density(&v, &s, 3).unwrap();
        assert_eq!(u.limsup_estimate, ratio(1, 2));
        assert_eq!(lower_density(&v, &s, 3).unwrap().liminf_estimate, ratio(1, 2));
        let empty = IntegerSetView::indices(100, vec![]).unwrap();
        let e = upper_density(&empty, &Schedule(vec![10, 50, 100]), 3).unwrap();
        assert_eq!((e.limsup_estimate, e.liminf_estimate), (Rational::zero(), Rational::zero()));
        assert!(upper_density(&empty, &Schedule(vec![200]), 1).is_err());
    }

    #[test]
    fn symbolic_coordinate() {
        let space = SpaceDescriptor::Symbolic { alphabet: 3, depth: 4 };
        let s = crate::spaces::SymbolStream::periodic(3, vec![2, 0, 1], vec![0]).unwrap();
        let v = Observable::Coordinate.evaluate(&space, &StatePoint::Symbolic(s)).unwrap();
        // 2/2·1/2 + 1/2·1/8
        assert_eq!(v.value, ratio(1, 2) + ratio(1, 16));
    }
}
