//! Compact metric spaces used by the systems: the circle `[0, 1)` with its
//! geodesic metric, the interval `[0, 1]`, one-sided sequence spaces over
//! `{0..k-1}` with `d(a, b) = Σ [a_i != b_i] 2^-(i+1)`, and binary products
//! with the sum metric.
//!
//! Points are exact. Circle and interval points are either rationals or
//! lazily generated binary expansions; sequence-space distances and
//! expansion coordinates are evaluated to a truncation depth `K` and carry
//! the error bound `2^-K`.

use std::sync::Arc;

use num::{BigInt, One, Signed, ToPrimitive, Zero};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{frac, parts, pow2_inv, ratio, Rational};

pub const DEFAULT_DEPTH: u32 = 64;
/// Windows are packed into `i128` numerators, so depth stays below 127.
pub const MAX_DEPTH: u32 = 120;
/// Denominator exponent of uniformly drawn coordinates.
pub const UNIFORM_BITS: u32 = 64;

fn default_depth() -> u32 {
    DEFAULT_DEPTH
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum SpaceDescriptor {
    /// `[0, 1)` with `min(|a - b|, 1 - |a - b|)`. `depth` truncates points
    /// backed by binary expansions.
    Circle {
        #[serde(default = "default_depth")]
        depth: u32,
    },
    Interval {
        #[serde(default = "default_depth")]
        depth: u32,
    },
    Symbolic {
        alphabet: u32,
        #[serde(default = "default_depth")]
        depth: u32,
    },
    Product {
        left: Box<SpaceDescriptor>,
        right: Box<SpaceDescriptor>,
    },
}

impl SpaceDescriptor {
    pub fn circle() -> Self {
        SpaceDescriptor::Circle { depth: DEFAULT_DEPTH }
    }

    pub fn interval() -> Self {
        SpaceDescriptor::Interval { depth: DEFAULT_DEPTH }
    }

    pub fn symbolic(alphabet: u32) -> Self {
        SpaceDescriptor::Symbolic { alphabet, depth: DEFAULT_DEPTH }
    }

    pub fn product(left: SpaceDescriptor, right: SpaceDescriptor) -> Self {
        SpaceDescriptor::Product { left: Box::new(left), right: Box::new(right) }
    }

    pub fn validate(&self) -> Result<()> {
        let check_depth = |d: u32| {
            if d == 0 || d > MAX_DEPTH {
                Err(Error::SpaceMismatch(format!("truncation depth {d} outside 1..={MAX_DEPTH}")))
            } else {
                Ok(())
            }
        };
        match self {
            SpaceDescriptor::Circle { depth } | SpaceDescriptor::Interval { depth } => check_depth(*depth),
            SpaceDescriptor::Symbolic { alphabet, depth } => {
                if *alphabet < 2 {
                    return Err(Error::SpaceMismatch(format!("alphabet size {alphabet} < 2")));
                }
                check_depth(*depth)
            }
            SpaceDescriptor::Product { left, right } => {
                left.validate()?;
                right.validate()
            }
        }
    }

    /// Declared diameter. For sequence spaces this is the truncated series
    /// plus its tail bound, `(1 - 2^-K) + 2^-K = 1`.
    pub fn diameter(&self) -> Rational {
        match self {
            SpaceDescriptor::Circle { .. } => ratio(1, 2),
            SpaceDescriptor::Interval { .. } => Rational::one(),
            SpaceDescriptor::Symbolic { depth, .. } => (Rational::one() - pow2_inv(*depth)) + pow2_inv(*depth),
            SpaceDescriptor::Product { left, right } => left.diameter() + right.diameter(),
        }
    }

    /// Worst-case truncation error of one distance evaluation.
    pub fn truncation_bound(&self) -> Rational {
        match self {
            SpaceDescriptor::Circle { depth } | SpaceDescriptor::Interval { depth } => pow2_inv(*depth),
            SpaceDescriptor::Symbolic { depth, .. } => pow2_inv(*depth),
            SpaceDescriptor::Product { left, right } => left.truncation_bound() + right.truncation_bound(),
        }
    }

    pub fn check(&self, p: &StatePoint) -> Result<()> {
        match (self, p) {
            (SpaceDescriptor::Circle { .. }, StatePoint::Circle(c)) => match c {
                Coordinate::Exact(r) if r.is_negative() || *r >= Rational::one() => {
                    Err(Error::InvalidPoint(format!("circle coordinate {r} outside [0, 1)")))
                }
                _ => Ok(()),
            },
            (SpaceDescriptor::Interval { .. }, StatePoint::Interval(c)) => match c {
                Coordinate::Exact(r) if r.is_negative() || *r > Rational::one() => {
                    Err(Error::InvalidPoint(format!("interval coordinate {r} outside [0, 1]")))
                }
                _ => Ok(()),
            },
            (SpaceDescriptor::Symbolic { alphabet, .. }, StatePoint::Symbolic(s)) => {
                if s.alphabet != *alphabet {
                    return Err(Error::SpaceMismatch(format!(
                        "stream over {} symbols in a space over {alphabet}",
                        s.alphabet
                    )));
                }
                s.validate()
            }
            (SpaceDescriptor::Product { left, right }, StatePoint::Product(l, r)) => {
                left.check(l)?;
                right.check(r)
            }
            _ => Err(Error::SpaceMismatch(format!("{} point in a {} space", p.kind_name(), self.kind_name()))),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            SpaceDescriptor::Circle { .. } => "circle",
            SpaceDescriptor::Interval { .. } => "interval",
            SpaceDescriptor::Symbolic { .. } => "symbolic",
            SpaceDescriptor::Product { .. } => "product",
        }
    }
}

/// Rule producing the symbols of a stream after its explicit prefix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum StreamRule {
    /// The word `tail` repeated forever.
    Periodic { tail: Vec<u32> },
    /// Counter-based pseudo-random symbols: symbol `r` is derived from the
    /// `r`-th output word of a ChaCha8 stream keyed by `seed`, so any
    /// position can be read without materializing earlier ones.
    Seeded { seed: u64 },
    /// Coding of the rotation orbit `x + r·angle mod 1`: symbol 1 on
    /// `[1 - angle, 1)`, symbol 0 on `[0, 1 - angle)`.
    Sturmian {
        #[serde(with = "parts")]
        angle: Rational,
        #[serde(with = "parts")]
        x: Rational,
    },
}

impl StreamRule {
    fn fill(&self, alphabet: u32, start: u64, out: &mut Vec<u32>, len: usize) {
        match self {
            StreamRule::Periodic { tail } => {
                let p = tail.len() as u64;
                out.extend((0..len as u64).map(|i| tail[((start + i) % p) as usize]));
            }
            StreamRule::Seeded { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_word_pos(start as u128);
                out.extend((0..len).map(|_| rng.next_u32() % alphabet));
            }
            StreamRule::Sturmian { angle, x } => {
                let cut = Rational::one() - angle;
                let mut v = frac(&(x + angle * Rational::from_integer(BigInt::from(start))));
                for _ in 0..len {
                    out.push(u32::from(v >= cut));
                    v += angle;
                    if v >= Rational::one() {
                        v -= Rational::one();
                    }
                }
            }
        }
    }
}

/// A one-sided symbol sequence: explicit prefix, then a rule, read from
/// position `offset` on. Shifting only bumps the offset, so extending a
/// stream is deterministic and idempotent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolStream {
    pub alphabet: u32,
    prefix: Arc<[u32]>,
    rule: Arc<StreamRule>,
    offset: u64,
}

impl SymbolStream {
    pub fn new(alphabet: u32, prefix: Vec<u32>, rule: StreamRule) -> Result<Self> {
        let s = SymbolStream { alphabet, prefix: prefix.into(), rule: Arc::new(rule), offset: 0 };
        s.validate()?;
        Ok(s)
    }

    pub fn periodic(alphabet: u32, prefix: Vec<u32>, tail: Vec<u32>) -> Result<Self> {
        Self::new(alphabet, prefix, StreamRule::Periodic { tail })
    }

    pub fn seeded(alphabet: u32, prefix: Vec<u32>, seed: u64) -> Result<Self> {
        Self::new(alphabet, prefix, StreamRule::Seeded { seed })
    }

    pub fn sturmian(angle: Rational, x: Rational) -> Result<Self> {
        Self::new(2, vec![], StreamRule::Sturmian { angle, x })
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphabet < 2 {
            return Err(Error::InvalidPoint(format!("alphabet size {} < 2", self.alphabet)));
        }
        if let Some(s) = self.prefix.iter().find(|&&s| s >= self.alphabet) {
            return Err(Error::InvalidPoint(format!("symbol {s} outside alphabet of size {}", self.alphabet)));
        }
        match &*self.rule {
            StreamRule::Periodic { tail } => {
                if tail.is_empty() {
                    return Err(Error::InvalidPoint("empty periodic tail".into()));
                }
                if let Some(s) = tail.iter().find(|&&s| s >= self.alphabet) {
                    return Err(Error::InvalidPoint(format!("symbol {s} outside alphabet of size {}", self.alphabet)));
                }
            }
            StreamRule::Seeded { .. } => {}
            StreamRule::Sturmian { angle, x } => {
                if self.alphabet != 2 {
                    return Err(Error::InvalidPoint("Sturmian coding is binary".into()));
                }
                if !angle.is_positive() || *angle >= Rational::one() {
                    return Err(Error::InvalidPoint(format!("Sturmian angle {angle} outside (0, 1)")));
                }
                if x.is_negative() || *x >= Rational::one() {
                    return Err(Error::InvalidPoint(format!("Sturmian base {x} outside [0, 1)")));
                }
            }
        }
        Ok(())
    }

    pub fn rule(&self) -> &StreamRule {
        &self.rule
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    /// Symbols `start .. start + len` of the (shifted) stream.
    pub fn symbols(&self, start: u64, len: usize) -> Vec<u32> {
        let mut out = Vec::with_capacity(len);
        let abs = self.offset + start;
        let plen = self.prefix.len() as u64;
        let mut taken = 0usize;
        if abs < plen {
            let from = abs as usize;
            let to = (plen as usize).min(from + len);
            out.extend_from_slice(&self.prefix[from..to]);
            taken = to - from;
        }
        if taken < len {
            let rule_start = (abs + taken as u64).saturating_sub(plen);
            self.rule.fill(self.alphabet, rule_start, &mut out, len - taken);
        }
        out
    }

    pub fn symbol(&self, i: u64) -> u32 {
        self.symbols(i, 1)[0]
    }

    pub fn window(&self, depth: u32) -> Vec<u32> {
        self.symbols(0, depth as usize)
    }

    /// The stream with its first symbol dropped.
    pub fn shift(&self) -> SymbolStream {
        self.shift_by(1)
    }

    pub fn shift_by(&self, k: u64) -> SymbolStream {
        SymbolStream { offset: self.offset + k, ..self.clone() }
    }

    /// Keeps the first `m` symbols of this stream and continues with `rule`.
    pub fn with_tail(&self, m: usize, rule: StreamRule) -> Result<SymbolStream> {
        SymbolStream::new(self.alphabet, self.symbols(0, m), rule)
    }
}

/// A real number in `[0, 1]` given by a lazily generated binary expansion
/// `0.b₁b₂…`, optionally with every bit complemented.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryExpansion {
    pub stream: SymbolStream,
    pub complement: bool,
}

impl BinaryExpansion {
    pub fn new(stream: SymbolStream) -> Result<Self> {
        if stream.alphabet != 2 {
            return Err(Error::InvalidPoint("binary expansion needs a binary stream".into()));
        }
        Ok(BinaryExpansion { stream, complement: false })
    }

    pub fn bits(&self, len: usize) -> Vec<u32> {
        let flip = u32::from(self.complement);
        self.stream.symbols(0, len).into_iter().map(|b| b ^ flip).collect()
    }

    /// `Σ_{i<depth} b_{i+1} 2^-(i+1)`; the true value lies in
    /// `[v, v + 2^-depth]`.
    pub fn truncated(&self, depth: u32) -> Rational {
        let mut num = BigInt::zero();
        for b in self.bits(depth as usize) {
            num <<= 1usize;
            if b == 1 {
                num += 1u32;
            }
        }
        Rational::new(num, BigInt::one() << depth as usize)
    }

    /// `2x mod 1`.
    pub fn doubled(&self) -> BinaryExpansion {
        BinaryExpansion { stream: self.stream.shift(), complement: self.complement }
    }

    /// The tent map: `0.0w ↦ 0.w`, `0.1w ↦ 1 - 0.w`.
    pub fn tented(&self) -> BinaryExpansion {
        let first = self.bits(1)[0];
        BinaryExpansion { stream: self.stream.shift(), complement: self.complement ^ (first == 1) }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Coordinate {
    Exact(Rational),
    Expansion(BinaryExpansion),
}

impl Coordinate {
    /// Value truncated to `depth` bits and the width of the enclosure.
    pub fn evaluate(&self, depth: u32) -> (Rational, Rational) {
        match self {
            Coordinate::Exact(r) => (r.clone(), Rational::zero()),
            Coordinate::Expansion(e) => (e.truncated(depth), pow2_inv(depth)),
        }
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Coordinate::Exact(_))
    }

    /// First `m` bits of the binary expansion.
    fn leading_bits(&self, m: usize) -> Vec<u32> {
        match self {
            Coordinate::Expansion(e) => e.bits(m),
            Coordinate::Exact(r) => {
                let scaled = (r * Rational::from_integer(BigInt::one() << m)).floor().to_integer();
                let top = (BigInt::one() << m) - 1u32;
                let scaled = if scaled > top { top } else { scaled };
                (0..m).map(|i| u32::from(((&scaled >> (m - 1 - i)) & BigInt::one()).is_one())).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "PointRepr", try_from = "PointRepr")]
pub enum StatePoint {
    Circle(Coordinate),
    Interval(Coordinate),
    Symbolic(SymbolStream),
    Product(Box<StatePoint>, Box<StatePoint>),
}

impl StatePoint {
    pub fn circle(r: Rational) -> Self {
        StatePoint::Circle(Coordinate::Exact(frac(&r)))
    }

    pub fn interval(r: Rational) -> Self {
        StatePoint::Interval(Coordinate::Exact(r))
    }

    pub fn product(l: StatePoint, r: StatePoint) -> Self {
        StatePoint::Product(Box::new(l), Box::new(r))
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            StatePoint::Circle(_) => "circle",
            StatePoint::Interval(_) => "interval",
            StatePoint::Symbolic(_) => "symbolic",
            StatePoint::Product(..) => "product",
        }
    }
}

/// Geodesic distance on the unit-circumference circle.
pub fn circle_metric(a: &Rational, b: &Rational) -> Rational {
    let d = (a - b).abs();
    let d = frac(&d);
    let wrap = Rational::one() - &d;
    if wrap < d {
        wrap
    } else {
        d
    }
}

/// `Σ_{i<K} [a_i != b_i] 2^(K-1-i)`: the sequence metric over `2^-K`.
pub(crate) fn window_distance_scaled(a: &[u32], b: &[u32]) -> i128 {
    let k = a.len();
    let mut num = 0i128;
    for i in 0..k {
        if a[i] != b[i] {
            num |= 1i128 << (k - 1 - i);
        }
    }
    num
}

/// A distance value and the half-width of its enclosure: the untruncated
/// distance lies in `[value - bound, value + bound]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Distance {
    pub value: Rational,
    pub bound: Rational,
}

pub fn distance(space: &SpaceDescriptor, a: &StatePoint, b: &StatePoint) -> Result<Distance> {
    space.check(a)?;
    space.check(b)?;
    distance_unchecked(space, a, b)
}

fn distance_unchecked(space: &SpaceDescriptor, a: &StatePoint, b: &StatePoint) -> Result<Distance> {
    match (space, a, b) {
        (SpaceDescriptor::Circle { depth }, StatePoint::Circle(x), StatePoint::Circle(y)) => {
            let (u, e1) = x.evaluate(*depth);
            let (v, e2) = y.evaluate(*depth);
            Ok(Distance { value: circle_metric(&frac(&u), &frac(&v)), bound: e1.max(e2) })
        }
        (SpaceDescriptor::Interval { depth }, StatePoint::Interval(x), StatePoint::Interval(y)) => {
            let (u, e1) = x.evaluate(*depth);
            let (v, e2) = y.evaluate(*depth);
            Ok(Distance { value: (u - v).abs(), bound: e1.max(e2) })
        }
        (SpaceDescriptor::Symbolic { depth, .. }, StatePoint::Symbolic(x), StatePoint::Symbolic(y)) => {
            let num = window_distance_scaled(&x.window(*depth), &y.window(*depth));
            Ok(Distance {
                value: Rational::new(BigInt::from(num), BigInt::one() << *depth as usize),
                bound: pow2_inv(*depth),
            })
        }
        (SpaceDescriptor::Product { left, right }, StatePoint::Product(a1, a2), StatePoint::Product(b1, b2)) => {
            let l = distance_unchecked(left, a1, b1)?;
            let r = distance_unchecked(right, a2, b2)?;
            Ok(Distance { value: l.value + r.value, bound: l.bound + r.bound })
        }
        _ => Err(Error::SpaceMismatch(format!(
            "{} and {} points in a {} space",
            a.kind_name(),
            b.kind_name(),
            space.kind_name()
        ))),
    }
}

pub fn diameter(space: &SpaceDescriptor) -> Rational {
    space.diameter()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum SampleStrategy {
    /// Circle/interval: `k / 2^64`. Sequence spaces: a seeded stream.
    Uniform,
    /// Circle/interval: `k / 2^depth`. Sequence spaces: a random word of
    /// length `depth` followed by zeros.
    Dyadic { depth: u32 },
    /// `p / q`.
    RationalGrid { q: u64 },
    /// A random prefix of `prefix` symbols, then a random word of length
    /// `period` repeated. On the circle/interval this is the rational with
    /// that eventually periodic binary expansion.
    PeriodicTail {
        period: usize,
        #[serde(default)]
        prefix: usize,
    },
    /// Circle/interval: a point backed by an infinite random binary
    /// expansion. Sequence spaces: same as `Uniform`.
    RandomStream,
}

pub(crate) fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform_unit(rng: &mut ChaCha8Rng) -> Rational {
    let k: u64 = rng.gen();
    Rational::new(BigInt::from(k), BigInt::one() << UNIFORM_BITS as usize)
}

/// Value of the binary word `prefix` followed by `tail` repeated forever.
fn eventually_periodic_value(prefix: &[u32], tail: &[u32]) -> Rational {
    let word = |w: &[u32]| w.iter().fold(BigInt::zero(), |acc, &b| (acc << 1usize) + BigInt::from(b));
    let m = prefix.len();
    let p = tail.len();
    let tail_val = Rational::new(word(tail), (BigInt::one() << p) - 1u32);
    (Rational::from_integer(word(prefix)) + tail_val) / Rational::from_integer(BigInt::one() << m)
}

fn random_word(rng: &mut ChaCha8Rng, alphabet: u32, len: usize) -> Vec<u32> {
    (0..len).map(|_| rng.gen_range(0..alphabet)).collect()
}

/// Deterministic in `(space, strategy, seed)`.
pub fn sample_point(space: &SpaceDescriptor, strategy: &SampleStrategy, seed: u64) -> Result<StatePoint> {
    space.validate()?;
    let mut rng = rng_for(seed);
    let unsupported = || Err(Error::Unsupported(format!("{strategy:?} sampling on a {} space", space.kind_name())));
    match space {
        SpaceDescriptor::Circle { .. } | SpaceDescriptor::Interval { .. } => {
            let is_circle = matches!(space, SpaceDescriptor::Circle { .. });
            let wrap = |r: Rational| {
                if is_circle {
                    StatePoint::Circle(Coordinate::Exact(frac(&r)))
                } else {
                    StatePoint::Interval(Coordinate::Exact(r))
                }
            };
            match strategy {
                SampleStrategy::Uniform => Ok(wrap(uniform_unit(&mut rng))),
                SampleStrategy::Dyadic { depth } => {
                    let den = BigInt::one() << *depth as usize;
                    let extra = u64::from(!is_circle);
                    let k = rng.gen_range(0..(1u128 << (*depth).min(126)) + extra as u128);
                    Ok(wrap(Rational::new(BigInt::from(k), den)))
                }
                SampleStrategy::RationalGrid { q } => {
                    if *q == 0 {
                        return unsupported();
                    }
                    let top = if is_circle { *q } else { *q + 1 };
                    let p = rng.gen_range(0..top);
                    Ok(wrap(ratio(p as i64, *q as i64)))
                }
                SampleStrategy::PeriodicTail { period, prefix } => {
                    if *period == 0 {
                        return unsupported();
                    }
                    let pre = random_word(&mut rng, 2, *prefix);
                    let tail = random_word(&mut rng, 2, *period);
                    Ok(wrap(eventually_periodic_value(&pre, &tail)))
                }
                SampleStrategy::RandomStream => {
                    let e = BinaryExpansion::new(SymbolStream::seeded(2, vec![], rng.gen())?)?;
                    Ok(if is_circle {
                        StatePoint::Circle(Coordinate::Expansion(e))
                    } else {
                        StatePoint::Interval(Coordinate::Expansion(e))
                    })
                }
            }
        }
        SpaceDescriptor::Symbolic { alphabet, .. } => match strategy {
            SampleStrategy::Uniform | SampleStrategy::RandomStream => {
                Ok(StatePoint::Symbolic(SymbolStream::seeded(*alphabet, vec![], rng.gen())?))
            }
            SampleStrategy::Dyadic { depth } => {
                let pre = random_word(&mut rng, *alphabet, *depth as usize);
                Ok(StatePoint::Symbolic(SymbolStream::periodic(*alphabet, pre, vec![0])?))
            }
            SampleStrategy::PeriodicTail { period, prefix } => {
                if *period == 0 {
                    return unsupported();
                }
                let pre = random_word(&mut rng, *alphabet, *prefix);
                let tail = random_word(&mut rng, *alphabet, *period);
                Ok(StatePoint::Symbolic(SymbolStream::periodic(*alphabet, pre, tail)?))
            }
            SampleStrategy::RationalGrid { .. } => unsupported(),
        },
        SpaceDescriptor::Product { left, right } => {
            let l = sample_point(left, strategy, rng.gen())?;
            let r = sample_point(right, strategy, rng.gen())?;
            Ok(StatePoint::product(l, r))
        }
    }
}

/// `{0, 1/2^depth, …, (2^depth - 1)/2^depth}`.
pub fn dyadic_grid(depth: u32) -> Vec<Rational> {
    let den = BigInt::one() << depth as usize;
    (0u64..(1u64 << depth)).map(|k| Rational::new(BigInt::from(k), den.clone())).collect()
}

/// Smallest `m` with `2^-m < radius`.
pub(crate) fn prefix_depth(radius: &Rational) -> usize {
    let mut m = 0usize;
    while pow2_inv(m as u32) >= *radius {
        m += 1;
    }
    m
}

/// Draws a point `y` with `d(center, y) < radius`, structured according to
/// `strategy`. Returns `None` when the strategy has no point in the ball.
pub fn sample_in_ball(
    space: &SpaceDescriptor,
    center: &StatePoint,
    radius: &Rational,
    strategy: &SampleStrategy,
    seed: u64,
) -> Result<Option<StatePoint>> {
    space.check(center)?;
    if !radius.is_positive() {
        return Ok(None);
    }
    let mut rng = rng_for(seed);
    let m = prefix_depth(radius);
    let candidate = match (space, center) {
        (SpaceDescriptor::Circle { .. }, StatePoint::Circle(c)) | (SpaceDescriptor::Interval { .. }, StatePoint::Interval(c)) => {
            let is_circle = matches!(space, SpaceDescriptor::Circle { .. });
            let exact = |r: Rational| {
                if is_circle {
                    StatePoint::Circle(Coordinate::Exact(frac(&r)))
                } else {
                    StatePoint::Interval(Coordinate::Exact(r))
                }
            };
            match strategy {
                SampleStrategy::Uniform => match c {
                    Coordinate::Exact(x) => {
                        let k: u64 = rng.gen_range(1..u64::MAX);
                        let u = Rational::new(BigInt::from(k), BigInt::one() << UNIFORM_BITS as usize);
                        let mut y = x + radius * (u * ratio(2, 1) - Rational::one());
                        if !is_circle {
                            y = y.clamp(Rational::zero(), Rational::one());
                        }
                        Some(exact(y))
                    }
                    Coordinate::Expansion(_) => Some(expansion_point(is_circle, c.leading_bits(m), rng.gen())?),
                },
                SampleStrategy::RandomStream => Some(expansion_point(is_circle, c.leading_bits(m), rng.gen())?),
                SampleStrategy::Dyadic { depth } => {
                    let m2 = m.max(*depth as usize) + rng.gen_range(0..3usize);
                    Some(exact(eventually_periodic_value(&c.leading_bits(m2), &[0])))
                }
                SampleStrategy::PeriodicTail { period, .. } => {
                    if *period == 0 {
                        return Ok(None);
                    }
                    let tail = random_word(&mut rng, 2, *period);
                    Some(exact(eventually_periodic_value(&c.leading_bits(m), &tail)))
                }
                SampleStrategy::RationalGrid { q } => {
                    if *q == 0 {
                        return Ok(None);
                    }
                    let (x, _) = c.evaluate(MAX_DEPTH);
                    let qq = Rational::from_integer(BigInt::from(*q));
                    let p = (x * &qq).round();
                    Some(exact(p / qq))
                }
            }
        }
        (SpaceDescriptor::Symbolic { alphabet, .. }, StatePoint::Symbolic(s)) => match strategy {
            SampleStrategy::Uniform | SampleStrategy::RandomStream => {
                Some(StatePoint::Symbolic(s.with_tail(m, StreamRule::Seeded { seed: rng.gen() })?))
            }
            SampleStrategy::Dyadic { depth } => {
                let m2 = m.max(*depth as usize) + rng.gen_range(0..3usize);
                Some(StatePoint::Symbolic(s.with_tail(m2, StreamRule::Periodic { tail: vec![0] })?))
            }
            SampleStrategy::PeriodicTail { period, .. } => {
                if *period == 0 {
                    return Ok(None);
                }
                let tail = random_word(&mut rng, *alphabet, *period);
                Some(StatePoint::Symbolic(s.with_tail(m, StreamRule::Periodic { tail })?))
            }
            SampleStrategy::RationalGrid { .. } => None,
        },
        (SpaceDescriptor::Product { left, right }, StatePoint::Product(a, b)) => {
            let half = radius / ratio(2, 1);
            let l = sample_in_ball(left, a, &half, strategy, rng.gen())?;
            let r = sample_in_ball(right, b, &half, strategy, rng.gen())?;
            match (l, r) {
                (Some(l), Some(r)) => Some(StatePoint::product(l, r)),
                _ => None,
            }
        }
        _ => return Err(Error::SpaceMismatch(format!("{} center in a {} space", center.kind_name(), space.kind_name()))),
    };
    match candidate {
        Some(y) => {
            space.check(&y)?;
            let d = distance_unchecked(space, center, &y)?;
            Ok((d.value < *radius).then_some(y))
        }
        None => Ok(None),
    }
}

fn expansion_point(is_circle: bool, prefix: Vec<u32>, seed: u64) -> Result<StatePoint> {
    let e = BinaryExpansion::new(SymbolStream::seeded(2, prefix, seed)?)?;
    Ok(if is_circle {
        StatePoint::Circle(Coordinate::Expansion(e))
    } else {
        StatePoint::Interval(Coordinate::Expansion(e))
    })
}

// ---------------------------------------------------------------------------
// JSON representation

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct StreamRepr {
    #[serde(default = "two")]
    alphabet: u32,
    #[serde(default)]
    prefix: Vec<u32>,
    rule: StreamRule,
    #[serde(default, skip_serializing_if = "is_zero")]
    offset: u64,
}

fn two() -> u32 {
    2
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

impl From<&SymbolStream> for StreamRepr {
    fn from(s: &SymbolStream) -> Self {
        StreamRepr { alphabet: s.alphabet, prefix: s.prefix.to_vec(), rule: (*s.rule).clone(), offset: s.offset }
    }
}

impl TryFrom<StreamRepr> for SymbolStream {
    type Error = Error;
    fn try_from(r: StreamRepr) -> Result<Self> {
        Ok(SymbolStream::new(r.alphabet, r.prefix, r.rule)?.shift_by(r.offset))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PointRepr {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    num: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    den: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    expansion: Option<StreamRepr>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    complement: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alphabet: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prefix: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rule: Option<StreamRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    offset: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<Box<PointRepr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<Box<PointRepr>>,
}

impl PointRepr {
    fn empty(kind: &str) -> Self {
        PointRepr {
            kind: kind.to_string(),
            num: None,
            den: None,
            expansion: None,
            complement: false,
            alphabet: None,
            prefix: None,
            rule: None,
            offset: None,
            left: None,
            right: None,
        }
    }

    fn coordinate(kind: &str, c: &Coordinate) -> Self {
        let mut r = PointRepr::empty(kind);
        match c {
            Coordinate::Exact(q) => {
                r.num = Some(q.numer().to_string());
                r.den = Some(q.denom().to_string());
            }
            Coordinate::Expansion(e) => {
                r.expansion = Some(StreamRepr::from(&e.stream));
                r.complement = e.complement;
            }
        }
        r
    }

    fn to_coordinate(&self) -> Result<Coordinate> {
        if let Some(s) = &self.expansion {
            let stream = SymbolStream::try_from(s.clone())?;
            let mut e = BinaryExpansion::new(stream)?;
            e.complement = self.complement;
            return Ok(Coordinate::Expansion(e));
        }
        let num: BigInt = self
            .num
            .as_deref()
            .ok_or_else(|| Error::InvalidPoint(format!("{} point needs num/den or expansion", self.kind)))?
            .trim()
            .parse()
            .map_err(|_| Error::InvalidPoint("bad numerator".into()))?;
        let den: BigInt = self
            .den
            .as_deref()
            .unwrap_or("1")
            .trim()
            .parse()
            .map_err(|_| Error::InvalidPoint("bad denominator".into()))?;
        if den.is_zero() {
            return Err(Error::InvalidPoint("zero denominator".into()));
        }
        Ok(Coordinate::Exact(Rational::new(num, den)))
    }
}

impl From<StatePoint> for PointRepr {
    fn from(p: StatePoint) -> Self {
        match &p {
            StatePoint::Circle(c) => PointRepr::coordinate("circle", c),
            StatePoint::Interval(c) => PointRepr::coordinate("interval", c),
            StatePoint::Symbolic(s) => {
                let mut r = PointRepr::empty("symbolic");
                r.alphabet = Some(s.alphabet);
                r.prefix = Some(s.prefix.to_vec());
                r.rule = Some((*s.rule).clone());
                r.offset = (s.offset != 0).then_some(s.offset);
                r
            }
            StatePoint::Product(a, b) => {
                let mut r = PointRepr::empty("product");
                r.left = Some(Box::new(PointRepr::from((**a).clone())));
                r.right = Some(Box::new(PointRepr::from((**b).clone())));
                r
            }
        }
    }
}

impl TryFrom<PointRepr> for StatePoint {
    type Error = Error;

    fn try_from(r: PointRepr) -> Result<Self> {
        match r.kind.as_str() {
            "circle" => Ok(StatePoint::Circle(r.to_coordinate()?)),
            "interval" => Ok(StatePoint::Interval(r.to_coordinate()?)),
            "symbolic" => {
                let rule = r.rule.ok_or_else(|| Error::InvalidPoint("symbolic point needs a rule".into()))?;
                let s = SymbolStream::new(r.alphabet.unwrap_or(2), r.prefix.unwrap_or_default(), rule)?;
                Ok(StatePoint::Symbolic(s.shift_by(r.offset.unwrap_or(0))))
            }
            "product" => {
                let l = r.left.ok_or_else(|| Error::InvalidPoint("product point needs left".into()))?;
                let rt = r.right.ok_or_else(|| Error::InvalidPoint("product point needs right".into()))?;
                Ok(StatePoint::product(StatePoint::try_from(*l)?, StatePoint::try_from(*rt)?))
            }
            other => Err(Error::InvalidPoint(format!("unknown point kind {other:?}"))),
        }
    }
}

/// Approximate coordinate for display; exact for rational points.
pub fn approx_coordinate(c: &Coordinate) -> f64 {
    let (v, _) = c.evaluate(53);
    v.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::int;

    fn circ(a: i64, b: i64) -> StatePoint {
        StatePoint::circle(ratio(a, b))
    }

    #[test]
    fn circle_distance_wraps() {
        let s = SpaceDescriptor::circle();
        let d = distance(&s, &circ(9, 10), &circ(1, 10)).unwrap();
        assert_eq!(d.value, ratio(1, 5));
        assert_eq!(d.bound, int(0));
    }

    #[test]
    fn interval_identity() {
        let s = SpaceDescriptor::interval();
        let p = StatePoint::interval(ratio(3, 7));
        assert_eq!(distance(&s, &p, &p).unwrap().value, int(0));
    }

    #[test]
    fn symbolic_first_coordinate_differs() {
        let s = SpaceDescriptor::Symbolic { alphabet: 2, depth: 8 };
        let a = StatePoint::Symbolic(SymbolStream::periodic(2, vec![0], vec![1]).unwrap());
        let b = StatePoint::Symbolic(SymbolStream::periodic(2, vec![], vec![1]).unwrap());
        let d = distance(&s, &a, &b).unwrap();
        assert_eq!(d.value, ratio(1, 2));
        assert_eq!(d.bound, ratio(1, 256));
    }

    #[test]
    fn diameters() {
        assert_eq!(SpaceDescriptor::circle().diameter(), ratio(1, 2));
        assert_eq!(SpaceDescriptor::interval().diameter(), int(1));
        assert_eq!(
            SpaceDescriptor::product(SpaceDescriptor::circle(), SpaceDescriptor::interval()).diameter(),
            ratio(3, 2)
        );
        assert_eq!(SpaceDescriptor::symbolic(2).diameter(), int(1));
    }

    #[test]
    fn kind_mismatch_is_an_error() {
        let s = SpaceDescriptor::circle();
        let p = StatePoint::interval(ratio(1, 2));
        assert!(matches!(distance(&s, &p, &p), Err(Error::SpaceMismatch(_))));
        assert!(matches!(distance(&s, &circ(1, 2), &StatePoint::circle(int(0))), Ok(_)));
        let bad = StatePoint::Circle(Coordinate::Exact(int(1)));
        assert!(distance(&s, &bad, &bad).is_err());
    }

    #[test]
    fn dyadic_grid_depth_three() {
        let g = dyadic_grid(3);
        assert_eq!(g, (0..8).map(|k| ratio(k, 8)).collect::<Vec<_>>());
    }

    #[test]
    fn sampling_is_deterministic() {
        for space in [SpaceDescriptor::circle(), SpaceDescriptor::symbolic(3)] {
            for strat in [SampleStrategy::Uniform, SampleStrategy::Dyadic { depth: 5 }] {
                assert_eq!(sample_point(&space, &strat, 11).unwrap(), sample_point(&space, &strat, 11).unwrap());
            }
        }
    }

    #[test]
    fn periodic_tail_one_is_constant() {
        let s = SpaceDescriptor::symbolic(2);
        let p = sample_point(&s, &SampleStrategy::PeriodicTail { period: 1, prefix: 0 }, 3).unwrap();
        let StatePoint::Symbolic(st) = p else { panic!() };
        let w = st.window(64);
        assert!(w.iter().all(|&b| b == w[0]));
        let zeros = SymbolStream::periodic(2, vec![], vec![0]).unwrap();
        assert_eq!(zeros.shift(), zeros.shift_by(1));
        assert!(zeros.window(64).iter().all(|&b| b == 0));
    }

    #[test]
    fn eventually_periodic_values() {
        // 0.0(01) = 1/6
        assert_eq!(eventually_periodic_value(&[0], &[0, 1]), ratio(1, 6));
        assert_eq!(eventually_periodic_value(&[1, 1], &[0]), ratio(3, 4));
    }

    #[test]
    fn expansion_maps() {
        let e = BinaryExpansion::new(SymbolStream::periodic(2, vec![1, 0, 1], vec![0]).unwrap()).unwrap();
        assert_eq!(e.truncated(8), ratio(5, 8));
        assert_eq!(e.doubled().truncated(8), ratio(1, 4));
        // tent(5/8) = 3/4, now a complemented tail 0.10111...
        let t = e.tented().truncated(8);
        assert!(t <= ratio(3, 4) && ratio(3, 4) <= t + pow2_inv(8));
    }

    #[test]
    fn leading_bits_of_rationals() {
        assert_eq!(Coordinate::Exact(ratio(5, 8)).leading_bits(4), vec![1, 0, 1, 0]);
        assert_eq!(Coordinate::Exact(int(1)).leading_bits(2), vec![1, 1]);
    }

    #[test]
    fn ball_samples_stay_inside() {
        let s = SpaceDescriptor::circle();
        let c = sample_point(&s, &SampleStrategy::RandomStream, 9).unwrap();
        let r = ratio(1, 100);
        for (i, strat) in [
            SampleStrategy::Uniform,
            SampleStrategy::Dyadic { depth: 0 },
            SampleStrategy::PeriodicTail { period: 3, prefix: 0 },
            SampleStrategy::RandomStream,
        ]
        .iter()
        .enumerate()
        {
            let y = sample_in_ball(&s, &c, &r, strat, i as u64).unwrap().unwrap();
            assert!(distance(&s, &c, &y).unwrap().value < r);
        }
    }

    #[test]
    fn json_round_trip_forms() {
        let p = circ(3, 8);
        let v = serde_json::to_value(&p).unwrap();
        assert_eq!(v, serde_json::json!({"kind": "circle", "num": "3", "den": "8"}));
        let s = StatePoint::Symbolic(SymbolStream::periodic(2, vec![0, 1], vec![1]).unwrap().shift());
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<StatePoint>(&text).unwrap(), s);
        let bad = serde_json::from_str::<StatePoint>(r#"{"kind":"torus"}"#);
        assert!(bad.is_err());
    }
}
