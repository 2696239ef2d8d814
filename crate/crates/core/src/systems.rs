//! Dynamical maps and orbit segments, all in exact arithmetic.

use num::{BigInt, One, Signed};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{frac, parts, pow2_inv, ratio, Rational};
use crate::spaces::{
    self, rng_for, Coordinate, SampleStrategy, SpaceDescriptor, StatePoint, StreamRule, SymbolStream, DEFAULT_DEPTH,
};

/// Fibonacci numbers `F_87` and `F_88`.
const FIB_87: u64 = 679_891_637_638_612_258;
const FIB_88: u64 = 1_100_087_778_366_101_931;

/// `F_87 / F_88`, a convergent of `(√5 - 1)/2` with denominator above `10^18`.
pub fn golden_angle() -> Rational {
    Rational::new(BigInt::from(FIB_87), BigInt::from(FIB_88))
}

fn default_depth() -> u32 {
    DEFAULT_DEPTH
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum SystemDescriptor {
    /// `x ↦ x + angle mod 1` on the circle.
    Rotation {
        #[serde(with = "parts")]
        angle: Rational,
        #[serde(default = "default_depth")]
        depth: u32,
    },
    /// `x ↦ 2x mod 1` on the circle.
    Doubling {
        #[serde(default = "default_depth")]
        depth: u32,
    },
    /// `x ↦ 2x` on `[0, 1/2]`, `2 - 2x` on `[1/2, 1]`.
    Tent {
        #[serde(default = "default_depth")]
        depth: u32,
    },
    /// Left shift on `{0..alphabet-1}^ℕ`.
    FullShift {
        alphabet: u32,
        #[serde(default = "default_depth")]
        depth: u32,
    },
    /// Left shift on the orbit closure of the rotation coding by `angle`.
    Sturmian {
        #[serde(with = "parts")]
        angle: Rational,
        #[serde(default = "default_depth")]
        depth: u32,
    },
    Product {
        left: Box<SystemDescriptor>,
        right: Box<SystemDescriptor>,
    },
}

impl SystemDescriptor {
    pub fn rotation(angle: Rational) -> Self {
        SystemDescriptor::Rotation { angle, depth: DEFAULT_DEPTH }
    }

    pub fn golden_rotation() -> Self {
        Self::rotation(golden_angle())
    }

    pub fn doubling() -> Self {
        SystemDescriptor::Doubling { depth: DEFAULT_DEPTH }
    }

    pub fn tent() -> Self {
        SystemDescriptor::Tent { depth: DEFAULT_DEPTH }
    }

    pub fn full_shift(alphabet: u32) -> Self {
        SystemDescriptor::FullShift { alphabet, depth: DEFAULT_DEPTH }
    }

    pub fn sturmian(angle: Rational) -> Self {
        SystemDescriptor::Sturmian { angle, depth: DEFAULT_DEPTH }
    }

    pub fn product(left: SystemDescriptor, right: SystemDescriptor) -> Self {
        SystemDescriptor::Product { left: Box::new(left), right: Box::new(right) }
    }

    pub fn space(&self) -> SpaceDescriptor {
        match self {
            SystemDescriptor::Rotation { depth, .. } | SystemDescriptor::Doubling { depth } => {
                SpaceDescriptor::Circle { depth: *depth }
            }
            SystemDescriptor::Tent { depth } => SpaceDescriptor::Interval { depth: *depth },
            SystemDescriptor::FullShift { alphabet, depth } => {
                SpaceDescriptor::Symbolic { alphabet: *alphabet, depth: *depth }
            }
            SystemDescriptor::Sturmian { depth, .. } => SpaceDescriptor::Symbolic { alphabet: 2, depth: *depth },
            SystemDescriptor::Product { left, right } => SpaceDescriptor::product(left.space(), right.space()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_angle = |a: &Rational| {
            if !a.is_positive() || *a >= Rational::one() {
                Err(Error::InvalidSystem(format!("angle {a} outside (0, 1)")))
            } else {
                Ok(())
            }
        };
        match self {
            SystemDescriptor::Rotation { angle, .. } | SystemDescriptor::Sturmian { angle, .. } => check_angle(angle)?,
            SystemDescriptor::Product { left, right } => {
                left.validate()?;
                right.validate()?;
            }
            _ => {}
        }
        self.space().validate().map_err(|e| Error::InvalidSystem(e.to_string()))
    }

    pub fn name(&self) -> String {
        match self {
            SystemDescriptor::Rotation { angle, .. } => format!("rotation({angle})"),
            SystemDescriptor::Doubling { .. } => "doubling".into(),
            SystemDescriptor::Tent { .. } => "tent".into(),
            SystemDescriptor::FullShift { alphabet, .. } => format!("fullShift({alphabet})"),
            SystemDescriptor::Sturmian { angle, .. } => format!("sturmian({angle})"),
            SystemDescriptor::Product { left, right } => format!("{} x {}", left.name(), right.name()),
        }
    }

    /// A point of the system's phase space with the given circle/base
    /// coordinate: the rotation coding for Sturmian systems.
    pub fn point_at(&self, x: Rational) -> Result<StatePoint> {
        match self {
            SystemDescriptor::Rotation { .. } | SystemDescriptor::Doubling { .. } => Ok(StatePoint::circle(x)),
            SystemDescriptor::Tent { .. } => Ok(StatePoint::interval(x)),
            SystemDescriptor::Sturmian { angle, .. } => {
                Ok(StatePoint::Symbolic(SymbolStream::sturmian(angle.clone(), frac(&x))?))
            }
            _ => Err(Error::Unsupported(format!("{} has no scalar coordinate", self.name()))),
        }
    }
}

pub fn step(system: &SystemDescriptor, p: &StatePoint) -> Result<StatePoint> {
    system.space().check(p)?;
    step_unchecked(system, p)
}

fn step_unchecked(system: &SystemDescriptor, p: &StatePoint) -> Result<StatePoint> {
    match (system, p) {
        (SystemDescriptor::Rotation { angle, .. }, StatePoint::Circle(c)) => match c {
            Coordinate::Exact(x) => Ok(StatePoint::Circle(Coordinate::Exact(frac(&(x + angle))))),
            Coordinate::Expansion(_) => {
                Err(Error::Unsupported("rotation of a point given by a binary expansion".into()))
            }
        },
        (SystemDescriptor::Doubling { .. }, StatePoint::Circle(c)) => Ok(StatePoint::Circle(match c {
            Coordinate::Exact(x) => Coordinate::Exact(frac(&(x * ratio(2, 1)))),
            Coordinate::Expansion(e) => Coordinate::Expansion(e.doubled()),
        })),
        (SystemDescriptor::Tent { .. }, StatePoint::Interval(c)) => Ok(StatePoint::Interval(match c {
            Coordinate::Exact(x) => {
                let two = ratio(2, 1);
                if *x <= ratio(1, 2) {
                    Coordinate::Exact(x * two)
                } else {
                    Coordinate::Exact(&two - x * &two)
                }
            }
            Coordinate::Expansion(e) => Coordinate::Expansion(e.tented()),
        })),
        (SystemDescriptor::FullShift { .. } | SystemDescriptor::Sturmian { .. }, StatePoint::Symbolic(s)) => {
            Ok(StatePoint::Symbolic(s.shift()))
        }
        (SystemDescriptor::Product { left, right }, StatePoint::Product(a, b)) => {
            Ok(StatePoint::product(step_unchecked(left, a)?, step_unchecked(right, b)?))
        }
        _ => Err(Error::SpaceMismatch(format!("{} point for {}", p.kind_name(), system.name()))),
    }
}

/// `T^k x` for `k = 1..=n`. The base point itself is not a state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrbitSegment {
    pub system: SystemDescriptor,
    pub base: StatePoint,
    pub states: Vec<StatePoint>,
}

impl OrbitSegment {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// `T^k x`, 1-based.
    pub fn state(&self, k: usize) -> &StatePoint {
        &self.states[k - 1]
    }

    /// Leading sub-segment of length `n`.
    pub fn prefix(&self, n: usize) -> OrbitSegment {
        OrbitSegment { system: self.system.clone(), base: self.base.clone(), states: self.states[..n].to_vec() }
    }

    /// Appends `extra` more states.
    pub fn extend(&mut self, extra: usize) -> Result<()> {
        let mut cur = self.states.last().cloned().unwrap_or_else(|| self.base.clone());
        self.states.reserve(extra);
        if let (SystemDescriptor::Rotation { angle, .. }, StatePoint::Circle(Coordinate::Exact(x))) = (&self.system, &cur) {
            // Integer walk over the common denominator: one reduction per state.
            let den = num::integer::lcm(x.denom().clone(), angle.denom().clone());
            let mut num = x.numer() * (&den / x.denom());
            let inc = angle.numer() * (&den / angle.denom());
            for _ in 0..extra {
                num += &inc;
                if num >= den {
                    num -= &den;
                }
                self.states.push(StatePoint::Circle(Coordinate::Exact(Rational::new(num.clone(), den.clone()))));
            }
            return Ok(());
        }
        for _ in 0..extra {
            cur = step_unchecked(&self.system, &cur)?;
            self.states.push(cur.clone());
        }
        Ok(())
    }
}

pub fn orbit_segment(system: &SystemDescriptor, x: &StatePoint, n: usize) -> Result<OrbitSegment> {
    if n == 0 {
        return Err(Error::InvalidSchedule("orbit segment of length 0".into()));
    }
    system.validate()?;
    system.space().check(x)?;
    let mut seg = OrbitSegment { system: system.clone(), base: x.clone(), states: Vec::new() };
    seg.extend(n)?;
    Ok(seg)
}

/// `T^n x`.
pub fn iterate(system: &SystemDescriptor, x: &StatePoint, n: usize) -> Result<StatePoint> {
    system.space().check(x)?;
    let mut cur = x.clone();
    for _ in 0..n {
        cur = step_unchecked(system, &cur)?;
    }
    Ok(cur)
}

/// `c_i = 1[x + i·angle mod 1 ∈ [1 - angle, 1)]` for `i = 0..n-1`.
pub fn sturmian_code(angle: &Rational, x: &Rational, n: usize) -> Result<Vec<u32>> {
    if !angle.is_positive() || *angle >= Rational::one() {
        return Err(Error::InvalidSystem(format!("angle {angle} outside (0, 1)")));
    }
    Ok(SymbolStream::sturmian(angle.clone(), frac(x))?.symbols(0, n))
}

/// Draws a point of the system's phase space. Sturmian systems take a base
/// angle coordinate from `strategy` on the circle and code it; every other
/// system samples its space directly.
pub fn sample_point(system: &SystemDescriptor, strategy: &SampleStrategy, seed: u64) -> Result<StatePoint> {
    match system {
        SystemDescriptor::Sturmian { angle, .. } => {
            let base = match spaces::sample_point(&SpaceDescriptor::circle(), strategy, seed)? {
                StatePoint::Circle(Coordinate::Exact(x)) => x,
                StatePoint::Circle(c) => c.evaluate(DEFAULT_DEPTH).0,
                _ => unreachable!("circle sampler returns circle points"),
            };
            Ok(StatePoint::Symbolic(SymbolStream::sturmian(angle.clone(), frac(&base))?))
        }
        SystemDescriptor::Product { left, right } => {
            let mut rng = rng_for(seed);
            let l = sample_point(left, strategy, rng.gen())?;
            let r = sample_point(right, strategy, rng.gen())?;
            Ok(StatePoint::product(l, r))
        }
        _ => spaces::sample_point(&system.space(), strategy, seed),
    }
}

/// Draws `y` in the open ball of radius `radius` around `center`, staying
/// inside the system's phase space: Sturmian points are perturbed through
/// their rotation coordinate, other systems use the space's samplers.
pub fn sample_in_ball(
    system: &SystemDescriptor,
    center: &StatePoint,
    radius: &Rational,
    strategy: &SampleStrategy,
    seed: u64,
) -> Result<Option<StatePoint>> {
    let space = system.space();
    space.check(center)?;
    match (system, center) {
        (SystemDescriptor::Sturmian { angle, depth }, StatePoint::Symbolic(s)) => {
            let StreamRule::Sturmian { x, .. } = s.rule() else {
                return spaces::sample_in_ball(&space, center, radius, strategy, seed);
            };
            if !is_pure_coding(s) {
                return spaces::sample_in_ball(&space, center, radius, strategy, seed);
            }
            let x0 = frac(&(x + angle * Rational::from_integer(BigInt::from(s.offset()))));
            let mut rng = rng_for(seed);
            // Shrink the perturbation until the codings agree long enough.
            let mut eta = radius.clone() * pow2_inv(4);
            for _ in 0..(*depth + 16) {
                let u = Rational::new(BigInt::from(rng.gen_range(1u64..1 << 20)), BigInt::from(1u64 << 20));
                let sign = if rng.gen::<bool>() { Rational::one() } else { -Rational::one() };
                let x1 = frac(&(&x0 + sign * &u * &eta));
                let y = StatePoint::Symbolic(SymbolStream::sturmian(angle.clone(), x1)?);
                let d = spaces::distance(&space, center, &y)?;
                if &d.value + &d.bound < *radius {
                    return Ok(Some(y));
                }
                eta *= ratio(1, 2);
            }
            Ok(None)
        }
        (SystemDescriptor::Product { left, right }, StatePoint::Product(a, b)) => {
            let half = radius / ratio(2, 1);
            let mut rng = rng_for(seed);
            let l = sample_in_ball(left, a, &half, strategy, rng.gen())?;
            let r = sample_in_ball(right, b, &half, strategy, rng.gen())?;
            Ok(l.zip(r).map(|(l, r)| StatePoint::product(l, r)))
        }
        (SystemDescriptor::Rotation { .. }, _) if *strategy == SampleStrategy::RandomStream => {
            spaces::sample_in_ball(&space, center, radius, &SampleStrategy::Uniform, seed)
        }
        _ => spaces::sample_in_ball(&space, center, radius, strategy, seed),
    }
}

/// A generic point: exact uniform draws for rotations, shifts and Sturmian
/// codings, random binary expansions for the doubling and tent maps (whose
/// exact rational orbits are eventually periodic).
pub fn typical_point(system: &SystemDescriptor, seed: u64) -> Result<StatePoint> {
    match system {
        SystemDescriptor::Doubling { .. } | SystemDescriptor::Tent { .. } => {
            sample_point(system, &SampleStrategy::RandomStream, seed)
        }
        SystemDescriptor::Product { left, right } => {
            let mut rng = rng_for(seed);
            Ok(StatePoint::product(typical_point(left, rng.gen())?, typical_point(right, rng.gen())?))
        }
        _ => sample_point(system, &SampleStrategy::Uniform, seed),
    }
}

/// Whether `s` is a shifted rotation coding with no explicit prefix.
fn is_pure_coding(s: &SymbolStream) -> bool {
    let StreamRule::Sturmian { angle, x } = s.rule() else { return false };
    let probe = SymbolStream::sturmian(angle.clone(), x.clone()).map(|t| t.shift_by(s.offset()));
    matches!(probe, Ok(t) if t == *s)
}
