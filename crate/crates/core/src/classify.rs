//! Finite-scale probes for equicontinuity, sensitivity and sensitive tuples.
//!
//! Every "for all ε there is δ" statement is read on finite grids, balls are
//! sampled rather than enumerated, and a limit that has not settled on the
//! schedule tail yields `Inconclusive` instead of a guess.

use std::collections::BTreeMap;

use num::{BigInt, One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matching::{max_joint_visit_count, min_joint_visit_count};
use crate::orbitstats::{estimate_limit, LimitEstimate, Observable, OrbitPair, Sample, Schedule, SegmentStatKind, StatValue};
use crate::rational::{common_scale, int, parts, parts_opt, parts_vec, ratio, Rational};
use crate::spaces::{self, Coordinate, SampleStrategy, SpaceDescriptor, StatePoint, SymbolStream};
use crate::systems::{self, orbit_segment, OrbitSegment, SystemDescriptor};

/// How candidate points are drawn inside a ball.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum Sampler {
    Uniform,
    Dyadic {
        depth: u32,
    },
    RationalGrid {
        q: u64,
    },
    PeriodicTail {
        period: usize,
        #[serde(default)]
        prefix: usize,
    },
    RandomStream,
    /// Fixed candidates. Those outside the ball are dropped.
    Adversarial {
        points: Vec<StatePoint>,
    },
}

impl Sampler {
    fn strategy(&self) -> Option<SampleStrategy> {
        Some(match self {
            Sampler::Uniform => SampleStrategy::Uniform,
            Sampler::Dyadic { depth } => SampleStrategy::Dyadic { depth: *depth },
            Sampler::RationalGrid { q } => SampleStrategy::RationalGrid { q: *q },
            Sampler::PeriodicTail { period, prefix } => SampleStrategy::PeriodicTail { period: *period, prefix: *prefix },
            Sampler::RandomStream => SampleStrategy::RandomStream,
            Sampler::Adversarial { .. } => return None,
        })
    }
}

/// A candidate tuple `(x1, x2)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnchorPair {
    pub x1: StatePoint,
    pub x2: StatePoint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeConfig {
    #[serde(with = "parts_vec")]
    pub eps_grid: Vec<Rational>,
    #[serde(with = "parts_vec")]
    pub delta_grid: Vec<Rational>,
    pub schedule: Schedule,
    pub tail_window: usize,
    #[serde(with = "parts")]
    pub tolerance: Rational,
    pub samplers: Vec<Sampler>,
    pub samples_per_ball: usize,
    /// Number of sampled ball centers, on top of `center_points`.
    pub centers: usize,
    #[serde(default)]
    pub center_points: Vec<StatePoint>,
    #[serde(with = "parts_vec")]
    pub sensitivity_candidates: Vec<Rational>,
    /// First horizon of the late window used by the in-mean tests. Defaults
    /// to the middle of the schedule and is capped at the start of the tail.
    #[serde(default)]
    pub late_start: Option<usize>,
    #[serde(with = "parts_vec")]
    pub t_grid: Vec<Rational>,
    #[serde(default)]
    pub anchors: Vec<AnchorPair>,
    /// Observables for the cross-check. Empty means the default registry.
    #[serde(default)]
    pub observables: Vec<Observable>,
    pub seed: u64,
}

impl ProbeConfig {
    /// Defaults sized for the system: `2^4..2^12` on the circle and interval,
    /// `2^4..2^8` when a sequence space forces the general solver.
    pub fn default_for(system: &SystemDescriptor) -> Self {
        let hi = if uses_general_solver(&system.space()) { 8 } else { 12 };
        ProbeConfig {
            eps_grid: vec![ratio(1, 5), ratio(1, 10), ratio(1, 20)],
            delta_grid: vec![ratio(1, 16), ratio(1, 64), ratio(1, 256)],
            schedule: Schedule::geometric(4, hi),
            tail_window: 3,
            tolerance: ratio(1, 100),
            samplers: vec![
                Sampler::Uniform,
                Sampler::Dyadic { depth: 0 },
                Sampler::PeriodicTail { period: 1, prefix: 0 },
                Sampler::RandomStream,
            ],
            samples_per_ball: 8,
            centers: 4,
            center_points: vec![],
            sensitivity_candidates: vec![ratio(1, 4), ratio(1, 5), ratio(3, 20), ratio(1, 10), ratio(1, 20), ratio(1, 50)],
            late_start: None,
            t_grid: vec![int(0), ratio(1, 2), ratio(9, 10), ratio(99, 100)],
            anchors: default_anchors(system),
            observables: vec![],
            seed: 0,
        }
    }

    /// Checks everything except the schedule, whose defects make probes
    /// inconclusive rather than failing.
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: &[Rational]| {
            if v.is_empty() {
                return Err(Error::InvalidConfig(format!("{name} is empty")));
            }
            if v.iter().any(|r| *r <= Rational::zero()) {
                return Err(Error::InvalidConfig(format!("{name} entries must be positive")));
            }
            Ok(())
        };
        positive("epsGrid", &self.eps_grid)?;
        positive("deltaGrid", &self.delta_grid)?;
        positive("sensitivityCandidates", &self.sensitivity_candidates)?;
        if self.tolerance < Rational::zero() {
            return Err(Error::InvalidConfig("tolerance must be non-negative".into()));
        }
        if self.t_grid.iter().any(|t| *t < Rational::zero() || *t > Rational::one()) {
            return Err(Error::InvalidConfig("t values must lie in [0, 1]".into()));
        }
        if self.samplers.is_empty() {
            return Err(Error::InvalidConfig("no samplers".into()));
        }
        Ok(())
    }

    /// The late window start, never after the first tail sample so that
    /// in-mean readings dominate limsup readings.
    pub fn effective_late_start(&self) -> usize {
        let s = &self.schedule.0;
        if s.is_empty() {
            return 0;
        }
        let tail_start = s[s.len().saturating_sub(self.tail_window.max(1))];
        self.late_start.unwrap_or(s[s.len() / 2]).min(tail_start)
    }
}

fn uses_general_solver(space: &SpaceDescriptor) -> bool {
    !matches!(space, SpaceDescriptor::Circle { .. } | SpaceDescriptor::Interval { .. })
}

/// A fixed, simple point of the space: `0` or the all-zeros sequence.
pub fn reference_point(space: &SpaceDescriptor) -> StatePoint {
    match space {
        SpaceDescriptor::Circle { .. } => StatePoint::circle(int(0)),
        SpaceDescriptor::Interval { .. } => StatePoint::interval(int(0)),
        SpaceDescriptor::Symbolic { alphabet, .. } => constant_stream(*alphabet, 0),
        SpaceDescriptor::Product { left, right } => StatePoint::product(reference_point(left), reference_point(right)),
    }
}

fn constant_stream(alphabet: u32, symbol: u32) -> StatePoint {
    StatePoint::Symbolic(SymbolStream::periodic(alphabet, vec![], vec![symbol]).expect("valid constant stream"))
}

/// `(0, 1/3)` on the circle and interval, the two extreme constant
/// sequences on a shift, componentwise on products.
pub fn default_anchors(system: &SystemDescriptor) -> Vec<AnchorPair> {
    fn pair(space: &SpaceDescriptor) -> (StatePoint, StatePoint) {
        match space {
            SpaceDescriptor::Circle { .. } => (StatePoint::circle(int(0)), StatePoint::circle(ratio(1, 3))),
            SpaceDescriptor::Interval { .. } => (StatePoint::interval(int(0)), StatePoint::interval(ratio(1, 3))),
            SpaceDescriptor::Symbolic { alphabet, .. } => (constant_stream(*alphabet, 0), constant_stream(*alphabet, alphabet - 1)),
            SpaceDescriptor::Product { left, right } => {
                let (a1, a2) = pair(left);
                let (b1, b2) = pair(right);
                (StatePoint::product(a1, b1), StatePoint::product(a2, b2))
            }
        }
    }
    let (x1, x2) = pair(&system.space());
    vec![AnchorPair { x1, x2 }]
}

/// Constant, coordinate, distance to the reference point and a steep
/// smoothed indicator of the reference point.
pub fn default_observables(space: &SpaceDescriptor) -> Vec<Observable> {
    let p = reference_point(space);
    vec![
        Observable::Constant { value: int(0) },
        Observable::Coordinate,
        Observable::DistanceTo { point: p.clone() },
        Observable::SmoothedIndicator { point: p, q: int(8) },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum VerdictKind {
    EquicontinuousConsistent,
    SensitiveWitnessed,
    Inconclusive,
}

/// A concrete pair and horizon at which the statistic certainly exceeds
/// `threshold`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Witness {
    pub x: StatePoint,
    pub y: StatePoint,
    pub n: usize,
    pub stat: SegmentStatKind,
    pub value: StatValue,
    #[serde(with = "parts")]
    pub threshold: Rational,
    #[serde(with = "parts")]
    pub radius: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CellStatus {
    /// Every sample certainly below the threshold.
    Admissible,
    /// Some sample certainly above the threshold.
    Violated,
    /// Neither, or no samples.
    Open,
}

/// One `(ε, ball)` cell of a probe.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CellRecord {
    #[serde(with = "parts_opt")]
    pub eps: Option<Rational>,
    #[serde(with = "parts")]
    pub threshold: Rational,
    pub center: usize,
    #[serde(with = "parts")]
    pub radius: Rational,
    pub samples: usize,
    /// Largest certified upper reading in the cell.
    #[serde(with = "parts_opt")]
    pub max_upper: Option<Rational>,
    /// Largest certified lower reading in the cell.
    #[serde(with = "parts_opt")]
    pub max_lower: Option<Rational>,
    pub all_converged: bool,
    pub status: CellStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeVerdict {
    pub verdict: VerdictKind,
    pub witnesses: Vec<Witness>,
    #[serde(with = "parts_opt")]
    pub achieved_constant: Option<Rational>,
    pub diagnostics: Vec<CellRecord>,
    pub notes: Vec<String>,
    pub config: ProbeConfig,
}

impl ProbeVerdict {
    fn inconclusive(config: &ProbeConfig, note: String) -> Self {
        ProbeVerdict {
            verdict: VerdictKind::Inconclusive,
            witnesses: vec![],
            achieved_constant: None,
            diagnostics: vec![],
            notes: vec![note],
            config: config.clone(),
        }
    }
}

// Sampling

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn mix(seed: u64, tags: &[u64]) -> u64 {
    tags.iter().fold(splitmix(seed), |h, &t| splitmix(h ^ splitmix(t)))
}

const CENTER_TAG: u64 = 1;
const BALL_TAG: u64 = 2;

/// Explicit centers first, then `config.centers` typical points.
pub fn probe_centers(system: &SystemDescriptor, config: &ProbeConfig) -> Result<Vec<StatePoint>> {
    let space = system.space();
    let mut out = Vec::with_capacity(config.center_points.len() + config.centers);
    for p in &config.center_points {
        space.check(p)?;
        out.push(p.clone());
    }
    for i in 0..config.centers {
        out.push(systems::typical_point(system, mix(config.seed, &[CENTER_TAG, i as u64]))?);
    }
    Ok(out)
}

/// Candidates in the open ball `B(center, radius)`, in sampler order.
fn ball_samples(
    system: &SystemDescriptor,
    center: &StatePoint,
    radius: &Rational,
    config: &ProbeConfig,
    tags: [u64; 2],
) -> Result<Vec<StatePoint>> {
    let strategies: Vec<SampleStrategy> = config.samplers.iter().filter_map(Sampler::strategy).collect();
    let mut out = vec![];
    if !strategies.is_empty() {
        for k in 0..config.samples_per_ball {
            let seed = mix(config.seed, &[BALL_TAG, tags[0], tags[1], k as u64]);
            let strategy = &strategies[k % strategies.len()];
            if let Some(y) = systems::sample_in_ball(system, center, radius, strategy, seed)? {
                out.push(y);
            }
        }
    }
    let space = system.space();
    for s in &config.samplers {
        if let Sampler::Adversarial { points } = s {
            for p in points {
                space.check(p)?;
                if spaces::distance(&space, center, p)?.value < *radius {
                    out.push(p.clone());
                }
            }
        }
    }
    Ok(out)
}

// Per-pair evaluation

#[derive(Debug, Clone)]
struct PairEval {
    x: StatePoint,
    y: StatePoint,
    est: LimitEstimate,
}

#[derive(Debug, Clone, Copy)]
enum Aggregate {
    /// Tail of the schedule: the limsup estimate.
    Limsup,
    /// Maximum over the horizons `n >= from`.
    RunningMax { from: usize },
}

/// `upper` bounds the aggregated quantity from above, `lower` from below.
/// `settled` is false only for a limsup whose tail has not converged.
struct Reading {
    upper: Rational,
    lower: Rational,
    settled: bool,
    witness: Sample,
}

fn best_sample<'a>(samples: impl Iterator<Item = &'a Sample>) -> Option<&'a Sample> {
    let mut best: Option<&Sample> = None;
    for s in samples {
        if best.map_or(true, |b| &s.value - &s.bound > &b.value - &b.bound) {
            best = Some(s);
        }
    }
    best
}

impl PairEval {
    fn reading(&self, agg: Aggregate) -> Reading {
        match agg {
            Aggregate::Limsup => {
                let est = &self.est;
                let tail = &est.samples[est.samples.len() - est.tail_window..];
                let lower = if est.converged {
                    &est.limsup_estimate - &est.bound
                } else {
                    &est.liminf_estimate - &est.bound
                };
                Reading {
                    upper: &est.limsup_estimate + &est.bound,
                    lower,
                    settled: est.converged,
                    witness: best_sample(tail.iter()).expect("non-empty tail").clone(),
                }
            }
            Aggregate::RunningMax { from } => {
                let late: Vec<&Sample> = self.est.samples.iter().filter(|s| s.n >= from).collect();
                let late = if late.is_empty() { self.est.samples.iter().collect() } else { late };
                let upper = late.iter().map(|s| &s.value + &s.bound).max().expect("non-empty schedule");
                let witness = best_sample(late.into_iter()).expect("non-empty schedule").clone();
                Reading { upper, lower: &witness.value - &witness.bound, settled: true, witness }
            }
        }
    }
}

/// Samples per `(center, radius)` ball, paired with the center.
struct BallTable {
    centers: Vec<StatePoint>,
    balls: Vec<Vec<Vec<StatePoint>>>,
}

impl BallTable {
    fn build(system: &SystemDescriptor, centers: Vec<StatePoint>, config: &ProbeConfig) -> Result<Self> {
        let balls = centers
            .iter()
            .enumerate()
            .map(|(c, x)| {
                config
                    .delta_grid
                    .iter()
                    .enumerate()
                    .map(|(r, delta)| ball_samples(system, x, delta, config, [c as u64, r as u64]))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(BallTable { centers, balls })
    }

    fn is_empty(&self) -> bool {
        self.balls.iter().flatten().all(|b| b.is_empty())
    }

    /// Estimates each of `kinds` for every (center, sample) pair, generating
    /// each pair's orbits once. One table per kind, in table order.
    fn evaluate(&self, system: &SystemDescriptor, kinds: &[SegmentStatKind], config: &ProbeConfig) -> Result<Vec<Vec<Vec<Vec<PairEval>>>>> {
        let jobs: Vec<(usize, usize, &StatePoint)> = self
            .balls
            .iter()
            .enumerate()
            .flat_map(|(c, radii)| radii.iter().enumerate().flat_map(move |(r, ys)| ys.iter().map(move |y| (c, r, y))))
            .collect();
        let n = config.schedule.max();
        let evals = jobs
            .par_iter()
            .map(|&(c, _, y)| {
                let x = &self.centers[c];
                let pair = OrbitPair::generate(system, x, y, n)?;
                kinds
                    .iter()
                    .map(|kind| {
                        let est = estimate_limit(|m| pair.stat(kind, m), &config.schedule, config.tail_window, &config.tolerance)?;
                        Ok(PairEval { x: x.clone(), y: y.clone(), est })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let empty: Vec<Vec<Vec<PairEval>>> = self.balls.iter().map(|radii| radii.iter().map(|_| vec![]).collect()).collect();
        let mut out = vec![empty; kinds.len()];
        for ((c, r, _), per_kind) in jobs.into_iter().zip(evals) {
            for (k, e) in per_kind.into_iter().enumerate() {
                out[k][c][r].push(e);
            }
        }
        Ok(out)
    }
}

/// Shared preamble: validates the config and decides whether the probe can
/// run at all.
fn precheck(system: &SystemDescriptor, config: &ProbeConfig) -> Result<Option<String>> {
    system.validate()?;
    config.validate()?;
    if let Err(e) = config.schedule.validate(config.tail_window) {
        return Ok(Some(format!("schedule unusable ({e})")));
    }
    let has_adversarial = config.samplers.iter().any(|s| matches!(s, Sampler::Adversarial { .. }));
    if config.samples_per_ball == 0 && !has_adversarial {
        return Ok(Some("empty sample budget".into()));
    }
    Ok(None)
}

// Point probes

/// One ε of a point probe: the statistic to estimate and the threshold the
/// aggregated reading must stay below.
#[derive(Debug, Clone)]
struct Criterion {
    eps: Rational,
    kind: SegmentStatKind,
    threshold: Rational,
    /// Readings equal to the threshold count as admissible.
    inclusive: bool,
    /// The statistic can never exceed the threshold, so convergence is moot.
    trivial: bool,
}

fn weak_mean_criteria(system: &SystemDescriptor, config: &ProbeConfig) -> Vec<Criterion> {
    let diam = system.space().diameter();
    config
        .eps_grid
        .iter()
        .map(|e| Criterion {
            eps: e.clone(),
            kind: SegmentStatKind::WeakMean,
            threshold: e.clone(),
            inclusive: false,
            trivial: diam < *e,
        })
        .collect()
}

fn observable_criteria(system: &SystemDescriptor, f: &Observable, scale: &Rational, config: &ProbeConfig) -> Vec<Criterion> {
    let (lo, hi) = f.range(&system.space());
    config
        .eps_grid
        .iter()
        .map(|e| {
            let threshold = e * scale;
            Criterion {
                eps: e.clone(),
                kind: SegmentStatKind::Observable { f: f.clone() },
                trivial: &hi - &lo < threshold,
                threshold,
                inclusive: false,
            }
        })
        .collect()
}

fn density_criteria(t: &Rational, config: &ProbeConfig) -> Vec<Criterion> {
    let threshold = Rational::one() - t + &config.tolerance;
    config
        .eps_grid
        .iter()
        .map(|e| Criterion {
            eps: e.clone(),
            kind: SegmentStatKind::Exceedance { eps: e.clone() },
            trivial: threshold >= Rational::one(),
            threshold: threshold.clone(),
            inclusive: true,
        })
        .collect()
}

/// Evaluated tables keyed by statistic label, so criteria sharing a
/// statistic share the orbit work.
type EvalCache = BTreeMap<String, Vec<Vec<Vec<PairEval>>>>;

fn fill_cache(system: &SystemDescriptor, table: &BallTable, criteria: &[&[Criterion]], config: &ProbeConfig, cache: &mut EvalCache) -> Result<()> {
    let mut missing: BTreeMap<String, SegmentStatKind> = BTreeMap::new();
    for c in criteria.iter().copied().flatten() {
        let label = c.kind.label();
        if !cache.contains_key(&label) {
            missing.insert(label, c.kind.clone());
        }
    }
    if missing.is_empty() {
        return Ok(());
    }
    let kinds: Vec<SegmentStatKind> = missing.values().cloned().collect();
    let tables = table.evaluate(system, &kinds, config)?;
    cache.extend(missing.into_keys().zip(tables));
    Ok(())
}

/// Reads a point probe for table center `center` off cached evaluations.
fn judge_point(
    criteria: &[Criterion],
    cache: &EvalCache,
    center: usize,
    agg: Aggregate,
    config: &ProbeConfig,
) -> ProbeVerdict {
    let mut diagnostics = vec![];
    let mut all_admit = true;
    let mut witnessed: Option<(Rational, Vec<Witness>)> = None;
    for c in criteria {
        let evals = &cache[&c.kind.label()][center];
        let mut admits = false;
        let mut every_violated = true;
        let mut cell_witnesses = vec![];
        for (r, pairs) in evals.iter().enumerate() {
            let readings: Vec<Reading> = pairs.iter().map(|p| p.reading(agg)).collect();
            let below = |x: &Reading| if c.inclusive { x.upper <= c.threshold } else { x.upper < c.threshold };
            let settled = c.trivial || readings.iter().all(|x| x.settled);
            let violator = readings.iter().position(|x| x.lower > c.threshold);
            let status = if readings.is_empty() {
                CellStatus::Open
            } else if let Some(i) = violator {
                let w = &readings[i].witness;
                cell_witnesses.push(Witness {
                    x: pairs[i].x.clone(),
                    y: pairs[i].y.clone(),
                    n: w.n,
                    stat: c.kind.clone(),
                    value: StatValue { value: w.value.clone(), bound: w.bound.clone() },
                    threshold: c.threshold.clone(),
                    radius: config.delta_grid[r].clone(),
                });
                CellStatus::Violated
            } else if settled && readings.iter().all(below) {
                CellStatus::Admissible
            } else {
                CellStatus::Open
            };
            admits |= status == CellStatus::Admissible;
            every_violated &= status == CellStatus::Violated;
            diagnostics.push(CellRecord {
                eps: Some(c.eps.clone()),
                threshold: c.threshold.clone(),
                center,
                radius: config.delta_grid[r].clone(),
                samples: readings.len(),
                max_upper: readings.iter().map(|x| x.upper.clone()).max(),
                max_lower: readings.iter().map(|x| x.lower.clone()).max(),
                all_converged: readings.iter().all(|x| x.settled),
                status,
            });
        }
        all_admit &= admits;
        if every_violated && !evals.is_empty() && witnessed.as_ref().map_or(true, |(t, _)| c.threshold > *t) {
            witnessed = Some((c.threshold.clone(), cell_witnesses));
        }
    }
    let (verdict, achieved_constant, witnesses) = match (all_admit, witnessed) {
        (true, _) => (VerdictKind::EquicontinuousConsistent, None, vec![]),
        (false, Some((t, w))) => (VerdictKind::SensitiveWitnessed, Some(t), w),
        (false, None) => (VerdictKind::Inconclusive, None, vec![]),
    };
    ProbeVerdict { verdict, witnesses, achieved_constant, diagnostics, notes: vec![], config: config.clone() }
}

fn point_probe(
    system: &SystemDescriptor,
    x: &StatePoint,
    config: &ProbeConfig,
    criteria: &[Criterion],
    agg: Aggregate,
) -> Result<ProbeVerdict> {
    if let Some(note) = precheck(system, config)? {
        return Ok(ProbeVerdict::inconclusive(config, note));
    }
    system.space().check(x)?;
    let table = BallTable::build(system, vec![x.clone()], config)?;
    if table.is_empty() {
        return Ok(ProbeVerdict::inconclusive(config, "no samples landed in any ball".into()));
    }
    let mut cache = EvalCache::new();
    fill_cache(system, &table, &[criteria], config, &mut cache)?;
    Ok(judge_point(criteria, &cache, 0, agg, config))
}

/// For each ε, looks for a δ with every sampled `y` in `B(x, δ)` having a
/// converged limsup of `F_n(x, y)` certainly below ε.
pub fn probe_weak_mean_equicontinuous_point(system: &SystemDescriptor, x: &StatePoint, config: &ProbeConfig) -> Result<ProbeVerdict> {
    point_probe(system, x, config, &weak_mean_criteria(system, config), Aggregate::Limsup)
}

/// As the weak-mean probe, reading the maximum of `F_n` over the whole
/// schedule instead of the tail.
pub fn probe_equicontinuous_in_mean_point(system: &SystemDescriptor, x: &StatePoint, config: &ProbeConfig) -> Result<ProbeVerdict> {
    point_probe(system, x, config, &weak_mean_criteria(system, config), Aggregate::RunningMax { from: 0 })
}

/// Per ε, looks for a δ with every sampled pair having limsup exceedance
/// frequency at most `1 - t + tolerance`.
pub fn probe_density_t_equicontinuity(system: &SystemDescriptor, x: &StatePoint, t: &Rational, config: &ProbeConfig) -> Result<ProbeVerdict> {
    if *t < Rational::zero() || *t > Rational::one() {
        return Err(Error::InvalidConfig(format!("t = {t} outside [0, 1]")));
    }
    point_probe(system, x, config, &density_criteria(t, config), Aggregate::Limsup)
}

// Sensitivity constant

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum SensitivityMode {
    /// Converged limsup of `F_n` (or a tail entirely above the candidate).
    StrongMean,
    /// Some `n >= N` on the schedule.
    StrongInMean,
}

fn sensitivity_aggregate(mode: SensitivityMode, config: &ProbeConfig) -> Aggregate {
    match mode {
        SensitivityMode::StrongMean => Aggregate::Limsup,
        SensitivityMode::StrongInMean => Aggregate::RunningMax { from: config.effective_late_start() },
    }
}

fn judge_sensitivity(evals: &[Vec<Vec<PairEval>>], mode: SensitivityMode, config: &ProbeConfig) -> ProbeVerdict {
    let agg = sensitivity_aggregate(mode, config);
    let mut diagnostics = vec![];
    // Best pair per ball, by certified lower reading.
    let mut bests: Vec<Option<(Rational, Witness)>> = vec![];
    let mut settled = true;
    for (c, radii) in evals.iter().enumerate() {
        for (r, pairs) in radii.iter().enumerate() {
            let readings: Vec<Reading> = pairs.iter().map(|p| p.reading(agg)).collect();
            settled &= readings.iter().all(|x| x.settled);
            let best = readings.iter().enumerate().max_by(|a, b| a.1.lower.cmp(&b.1.lower).then(b.0.cmp(&a.0)));
            bests.push(best.map(|(i, x)| {
                let w = &x.witness;
                (
                    x.lower.clone(),
                    Witness {
                        x: pairs[i].x.clone(),
                        y: pairs[i].y.clone(),
                        n: w.n,
                        stat: SegmentStatKind::WeakMean,
                        value: StatValue { value: w.value.clone(), bound: w.bound.clone() },
                        threshold: Rational::zero(),
                        radius: config.delta_grid[r].clone(),
                    },
                )
            }));
            diagnostics.push(CellRecord {
                eps: None,
                threshold: Rational::zero(),
                center: c,
                radius: config.delta_grid[r].clone(),
                samples: readings.len(),
                max_upper: readings.iter().map(|x| x.upper.clone()).max(),
                max_lower: readings.iter().map(|x| x.lower.clone()).max(),
                all_converged: readings.iter().all(|x| x.settled),
                status: CellStatus::Open,
            });
        }
    }
    let mut notes = vec![];
    let any_empty = bests.iter().any(Option::is_none);
    let achieved = config
        .sensitivity_candidates
        .iter()
        .filter(|c| **c > config.tolerance)
        .filter(|c| !any_empty && bests.iter().all(|b| b.as_ref().is_some_and(|(v, _)| v > *c)))
        .max()
        .cloned();
    for (d, b) in diagnostics.iter_mut().zip(&bests) {
        if let (Some(c), Some((v, _))) = (&achieved, b) {
            d.threshold = c.clone();
            d.status = if v > c { CellStatus::Violated } else { CellStatus::Open };
        }
    }
    let (verdict, witnesses) = match &achieved {
        Some(c) => (
            VerdictKind::SensitiveWitnessed,
            bests
                .into_iter()
                .flatten()
                .map(|(_, mut w)| {
                    w.threshold = c.clone();
                    w
                })
                .collect(),
        ),
        None if any_empty => {
            notes.push("some ball has no samples".into());
            (VerdictKind::Inconclusive, vec![])
        }
        None if !settled => {
            notes.push("some limsup estimates did not converge".into());
            (VerdictKind::Inconclusive, vec![])
        }
        None => (VerdictKind::EquicontinuousConsistent, vec![]),
    };
    ProbeVerdict { verdict, witnesses, achieved_constant: achieved, diagnostics, notes, config: config.clone() }
}

/// Largest candidate `c` such that every probed ball holds a pair whose
/// reading certainly exceeds `c`. Balls are `B(center, δ)` over the sampled
/// centers and the δ grid. Pairs are (center, sample).
pub fn estimate_sensitivity_constant(system: &SystemDescriptor, config: &ProbeConfig, mode: SensitivityMode) -> Result<ProbeVerdict> {
    let (mean, in_mean) = sensitivity_both(system, config)?;
    Ok(match mode {
        SensitivityMode::StrongMean => mean,
        SensitivityMode::StrongInMean => in_mean,
    })
}

fn sensitivity_both(system: &SystemDescriptor, config: &ProbeConfig) -> Result<(ProbeVerdict, ProbeVerdict)> {
    if let Some(note) = precheck(system, config)? {
        return Ok((ProbeVerdict::inconclusive(config, note.clone()), ProbeVerdict::inconclusive(config, note)));
    }
    let table = BallTable::build(system, probe_centers(system, config)?, config)?;
    if table.centers.is_empty() || table.is_empty() {
        let note = "no ball centers or samples".to_string();
        return Ok((ProbeVerdict::inconclusive(config, note.clone()), ProbeVerdict::inconclusive(config, note)));
    }
    let evals = table.evaluate(system, &[SegmentStatKind::WeakMean], config)?.remove(0);
    Ok((
        judge_sensitivity(&evals, SensitivityMode::StrongMean, config),
        judge_sensitivity(&evals, SensitivityMode::StrongInMean, config),
    ))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AgreementReport {
    pub strong_mean: ProbeVerdict,
    pub strong_in_mean: ProbeVerdict,
    pub agree: bool,
    /// Set when the two verdicts differ: a finite-scale artifact, not a
    /// counterexample.
    pub resolution_insufficient: bool,
}

/// Runs both sensitivity modes on the same balls and compares verdicts.
pub fn check_mean_vs_in_mean_agreement(system: &SystemDescriptor, config: &ProbeConfig) -> Result<AgreementReport> {
    let (strong_mean, strong_in_mean) = sensitivity_both(system, config)?;
    let agree = strong_mean.verdict == strong_in_mean.verdict;
    Ok(AgreementReport { strong_mean, strong_in_mean, agree, resolution_insufficient: !agree })
}

// Tuples

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum TupleKind {
    /// Uniform `c > 0` over balls, limsup over the tail.
    MeanTuple,
    /// Uniform `c > 0` over balls, a single horizon.
    InMeanTuple,
    /// Pairs merely closer than τ, a single horizon.
    WeakInMeanTuple,
    /// Some pair per ball with positive limsup frequency.
    DensityTuple,
}

impl TupleKind {
    fn uses_tail(self) -> bool {
        matches!(self, TupleKind::MeanTuple | TupleKind::DensityTuple)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TupleWitness {
    pub y1: StatePoint,
    pub y2: StatePoint,
    /// Ball radius, or the closeness τ for weak in-mean tuples.
    #[serde(with = "parts")]
    pub radius: Rational,
    pub n: usize,
    /// `|A|` and `|B|` at `n`.
    pub visits: (usize, usize),
    /// `min_σ #joint visits / n`.
    #[serde(with = "parts")]
    pub frequency: Rational,
    /// `max_σ #joint visits / n`, for comparison.
    #[serde(with = "parts")]
    pub max_frequency: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TupleEpsRecord {
    #[serde(with = "parts")]
    pub eps: Rational,
    /// Minimum over probed balls of the best pair's frequency.
    #[serde(with = "parts")]
    pub frequency: Rational,
    /// The same with the max-over-σ count.
    #[serde(with = "parts")]
    pub max_frequency: Rational,
    /// Best pair per ball.
    pub witnesses: Vec<TupleWitness>,
}

/// An anchor that passed every ε with frequency lower bound `c > 0`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TupleCandidate {
    pub x1: StatePoint,
    pub x2: StatePoint,
    #[serde(with = "parts")]
    pub frequency_lower_bound: Rational,
    pub per_eps: Vec<TupleEpsRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnchorDiagnostic {
    pub x1: StatePoint,
    pub x2: StatePoint,
    pub passed: bool,
    pub per_eps: Vec<TupleEpsRecord>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TupleSearchReport {
    pub kind: TupleKind,
    pub candidates: Vec<TupleCandidate>,
    pub diagnostics: Vec<AnchorDiagnostic>,
    pub config: ProbeConfig,
}

/// Upper readings of `d(T^i y, x)` for `i = 1..N`. Exact scalar orbits are
/// kept as integer numerators over one common scale.
enum Distances {
    Scaled { scale: BigInt, nums: Vec<BigInt> },
    General(Vec<Rational>),
}

fn exact_scalar(p: &StatePoint) -> Option<&Rational> {
    match p {
        StatePoint::Circle(Coordinate::Exact(r)) | StatePoint::Interval(Coordinate::Exact(r)) => Some(r),
        _ => None,
    }
}

fn orbit_distances(space: &SpaceDescriptor, seg: &OrbitSegment, anchor: &StatePoint) -> Result<Distances> {
    let circle = matches!(space, SpaceDescriptor::Circle { .. });
    if circle || matches!(space, SpaceDescriptor::Interval { .. }) {
        let vals: Option<Vec<&Rational>> = seg.states.iter().map(exact_scalar).collect();
        if let (Some(vals), Some(a)) = (vals, exact_scalar(anchor)) {
            let (scale, nums) = common_scale(vals.into_iter().chain(std::iter::once(a)));
            let (an, xs) = nums.split_last().expect("anchor included");
            let nums = xs
                .iter()
                .map(|u| {
                    let d = (u - an).abs();
                    if circle {
                        let w = &scale - &d;
                        d.min(w)
                    } else {
                        d
                    }
                })
                .collect();
            return Ok(Distances::Scaled { scale, nums });
        }
    }
    let general = seg.states.iter().map(|s| spaces::distance(space, s, anchor).map(|d| d.value + d.bound)).collect::<Result<_>>()?;
    Ok(Distances::General(general))
}

/// Certain visit counts to `B(anchor, eps)` at each schedule horizon.
fn visit_counts(dists: &Distances, eps: &Rational, schedule: &Schedule) -> Vec<usize> {
    let inside: Vec<bool> = match dists {
        Distances::Scaled { scale, nums } => {
            let rhs = eps.numer() * scale;
            nums.iter().map(|d| d * eps.denom() < rhs).collect()
        }
        Distances::General(upper) => upper.iter().map(|d| d < eps).collect(),
    };
    let mut counts = Vec::with_capacity(schedule.0.len());
    let mut acc = 0;
    let mut i = 0;
    for &n in &schedule.0 {
        while i < n {
            acc += inside[i] as usize;
            i += 1;
        }
        counts.push(acc);
    }
    counts
}

/// Joint-visit frequency of a pair with per-horizon visit counts.
fn pair_frequency(a: &[usize], b: &[usize], kind: TupleKind, config: &ProbeConfig) -> Result<(Rational, Rational, usize, (usize, usize))> {
    let s = &config.schedule.0;
    let from = if kind.uses_tail() { s.len() - config.tail_window } else { 0 };
    let mut best: Option<(Rational, Rational, usize, (usize, usize))> = None;
    for k in from..s.len() {
        let n = s[k];
        let f = ratio(min_joint_visit_count(a[k], b[k], n)? as i64, n as i64);
        let g = ratio(max_joint_visit_count(a[k], b[k], n)? as i64, n as i64);
        if best.as_ref().map_or(true, |(bf, bg, ..)| (&f, &g) > (bf, bg)) {
            best = Some((f, g, n, (a[k], b[k])));
        }
    }
    Ok(best.expect("non-empty schedule"))
}

/// Point pools and the pairs inside each: balls for the ball-based kinds,
/// closeness levels for weak in-mean tuples.
struct TuplePools {
    points: Vec<StatePoint>,
    /// Per pool: its radius and the ordered index pairs it admits.
    pools: Vec<(Rational, Vec<(usize, usize)>)>,
}

fn tuple_pools(system: &SystemDescriptor, config: &ProbeConfig, kind: TupleKind) -> Result<TuplePools> {
    let space = system.space();
    let table = BallTable::build(system, probe_centers(system, config)?, config)?;
    let mut points = vec![];
    let mut balls: Vec<(usize, Vec<usize>)> = vec![];
    for (c, radii) in table.balls.iter().enumerate() {
        for (r, ys) in radii.iter().enumerate() {
            let mut idx = vec![points.len()];
            points.push(table.centers[c].clone());
            for y in ys {
                idx.push(points.len());
                points.push(y.clone());
            }
            balls.push((r, idx));
        }
    }
    let ordered = |idx: &[usize]| -> Vec<(usize, usize)> {
        idx.iter().flat_map(|&i| idx.iter().filter(move |&&j| j != i).map(move |&j| (i, j))).collect()
    };
    let pools = if kind == TupleKind::WeakInMeanTuple {
        config
            .delta_grid
            .iter()
            .enumerate()
            .map(|(r, tau)| {
                let mut pairs = vec![];
                for (_, idx) in balls.iter().filter(|(br, _)| *br == r) {
                    for (i, j) in ordered(idx) {
                        if spaces::distance(&space, &points[i], &points[j])?.value < *tau {
                            pairs.push((i, j));
                        }
                    }
                }
                Ok((tau.clone(), pairs))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        balls.iter().map(|(r, idx)| (config.delta_grid[*r].clone(), ordered(idx))).collect()
    };
    Ok(TuplePools { points, pools })
}

/// Searches the configured anchors for sensitive tuples of the given kind.
pub fn search_sensitive_tuples(system: &SystemDescriptor, config: &ProbeConfig, kind: TupleKind) -> Result<TupleSearchReport> {
    if config.anchors.is_empty() {
        return Err(Error::InvalidConfig("empty anchor grid".into()));
    }
    let space = system.space();
    for a in &config.anchors {
        space.check(&a.x1)?;
        space.check(&a.x2)?;
    }
    let mut report = TupleSearchReport { kind, candidates: vec![], diagnostics: vec![], config: config.clone() };
    if let Some(note) = precheck(system, config)? {
        for a in &config.anchors {
            report.diagnostics.push(AnchorDiagnostic {
                x1: a.x1.clone(),
                x2: a.x2.clone(),
                passed: false,
                per_eps: vec![],
                note: Some(note.clone()),
            });
        }
        return Ok(report);
    }
    let pools = tuple_pools(system, config, kind)?;
    let n = config.schedule.max();
    let orbits = pools.points.par_iter().map(|p| orbit_segment(system, p, n)).collect::<Result<Vec<_>>>()?;
    for a in &config.anchors {
        let sep = spaces::distance(&space, &a.x1, &a.x2)?;
        if sep.value <= sep.bound {
            report.diagnostics.push(AnchorDiagnostic {
                x1: a.x1.clone(),
                x2: a.x2.clone(),
                passed: false,
                per_eps: vec![],
                note: Some("anchors not separated beyond the truncation bound".into()),
            });
            continue;
        }
        let dists = orbits
            .par_iter()
            .map(|seg| Ok((orbit_distances(&space, seg, &a.x1)?, orbit_distances(&space, seg, &a.x2)?)))
            .collect::<Result<Vec<_>>>()?;
        let mut per_eps = vec![];
        for eps in &config.eps_grid {
            let counts: Vec<(Vec<usize>, Vec<usize>)> = dists
                .iter()
                .map(|(d1, d2)| (visit_counts(d1, eps, &config.schedule), visit_counts(d2, eps, &config.schedule)))
                .collect();
            let mut floor: Option<(Rational, Rational)> = None;
            let mut witnesses = vec![];
            for (radius, pairs) in &pools.pools {
                let mut best: Option<TupleWitness> = None;
                for &(i, j) in pairs {
                    let (f, g, m, visits) = pair_frequency(&counts[i].0, &counts[j].1, kind, config)?;
                    if best.as_ref().map_or(true, |b| (&f, &g) > (&b.frequency, &b.max_frequency)) {
                        best = Some(TupleWitness {
                            y1: pools.points[i].clone(),
                            y2: pools.points[j].clone(),
                            radius: radius.clone(),
                            n: m,
                            visits,
                            frequency: f,
                            max_frequency: g,
                        });
                    }
                }
                let (f, g) = best.as_ref().map_or((Rational::zero(), Rational::zero()), |b| (b.frequency.clone(), b.max_frequency.clone()));
                floor = Some(match floor {
                    None => (f, g),
                    Some((f0, g0)) => (f0.min(f), g0.min(g)),
                });
                witnesses.extend(best);
            }
            let (frequency, max_frequency) = floor.unwrap_or((Rational::zero(), Rational::zero()));
            per_eps.push(TupleEpsRecord { eps: eps.clone(), frequency, max_frequency, witnesses });
        }
        let c = per_eps.iter().map(|r| r.frequency.clone()).min().unwrap_or_else(Rational::zero);
        let passed = c > Rational::zero();
        report.diagnostics.push(AnchorDiagnostic {
            x1: a.x1.clone(),
            x2: a.x2.clone(),
            passed,
            per_eps: per_eps.clone(),
            note: None,
        });
        if passed {
            report.candidates.push(TupleCandidate { x1: a.x1.clone(), x2: a.x2.clone(), frequency_lower_bound: c, per_eps });
        }
    }
    Ok(report)
}

// Density equivalence

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityCell {
    #[serde(with = "parts")]
    pub t: Rational,
    pub verdict: VerdictKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DensityRow {
    pub center: StatePoint,
    pub weak_mean: VerdictKind,
    pub density: Vec<DensityCell>,
    pub agree: bool,
    pub inconclusive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DensityEquivalenceReport {
    pub rows: Vec<DensityRow>,
    pub agree: bool,
    pub inconclusive: bool,
    pub config: ProbeConfig,
}

/// Compares the weak-mean point probe with the density-t probes (t < 1) on
/// shared samples at every center. Equicontinuity must hold for every t,
/// and sensitivity must show at some t.
pub fn check_density_equivalence(system: &SystemDescriptor, config: &ProbeConfig) -> Result<DensityEquivalenceReport> {
    let ts: Vec<Rational> = config.t_grid.iter().filter(|t| **t < Rational::one()).cloned().collect();
    let centers = probe_centers(system, config)?;
    let skip = precheck(system, config)?;
    let mut rows = vec![];
    if skip.is_none() {
        let table = BallTable::build(system, centers, config)?;
        let wm = weak_mean_criteria(system, config);
        let mut cache = EvalCache::new();
        let dens: Vec<Vec<Criterion>> = ts.iter().map(|t| density_criteria(t, config)).collect();
        let mut all: Vec<&[Criterion]> = vec![&wm];
        all.extend(dens.iter().map(Vec::as_slice));
        fill_cache(system, &table, &all, config, &mut cache)?;
        for (c, center) in table.centers.iter().enumerate() {
            let w = judge_point(&wm, &cache, c, Aggregate::Limsup, config).verdict;
            let density: Vec<DensityCell> = ts
                .iter()
                .zip(&dens)
                .map(|(t, d)| DensityCell { t: t.clone(), verdict: judge_point(d, &cache, c, Aggregate::Limsup, config).verdict })
                .collect();
            let (agree, inconclusive) = density_agreement(w, &density);
            rows.push(DensityRow { center: center.clone(), weak_mean: w, density, agree, inconclusive });
        }
    }
    let inconclusive = rows.is_empty() || rows.iter().any(|r| r.inconclusive);
    Ok(DensityEquivalenceReport { agree: rows.iter().all(|r| r.agree), inconclusive, rows, config: config.clone() })
}

fn density_agreement(weak_mean: VerdictKind, density: &[DensityCell]) -> (bool, bool) {
    let any = |k: VerdictKind| density.iter().any(|d| d.verdict == k);
    match weak_mean {
        VerdictKind::EquicontinuousConsistent => (!any(VerdictKind::SensitiveWitnessed), any(VerdictKind::Inconclusive)),
        VerdictKind::SensitiveWitnessed => {
            let shown = any(VerdictKind::SensitiveWitnessed);
            let all_consistent = density.iter().all(|d| d.verdict == VerdictKind::EquicontinuousConsistent);
            (!all_consistent, !shown && !all_consistent)
        }
        VerdictKind::Inconclusive => (true, true),
    }
}

// Observables

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ObservableMode {
    Mean,
    InMean,
}

/// One registered observable checked against the weak-mean verdict.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CrossCheck {
    pub observable: Observable,
    #[serde(with = "parts")]
    pub lipschitz: Rational,
    /// Verdict with thresholds scaled by the Lipschitz constant.
    pub verdict: VerdictKind,
    /// `d_f^n <= L · F_n` on every sampled pair and horizon.
    pub contraction_holds: bool,
    /// Weak-mean consistency implies f-consistency here.
    pub implication_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObservableReport {
    pub observable: Observable,
    pub mode: ObservableMode,
    pub probe: ProbeVerdict,
    pub weak_mean: VerdictKind,
    pub cross_checks: Vec<CrossCheck>,
}

/// The point probe with `d_f^n` in place of `F_n`, plus a cross-check of
/// every registered observable against the weak-mean verdict on the same
/// samples.
pub fn probe_observable_equicontinuity(
    system: &SystemDescriptor,
    x: &StatePoint,
    f: &Observable,
    config: &ProbeConfig,
    mode: ObservableMode,
) -> Result<ObservableReport> {
    let space = system.space();
    f.validate(&space)?;
    let agg = match mode {
        ObservableMode::Mean => Aggregate::Limsup,
        ObservableMode::InMean => Aggregate::RunningMax { from: 0 },
    };
    let registry = if config.observables.is_empty() { default_observables(&space) } else { config.observables.clone() };
    for g in &registry {
        g.validate(&space)?;
    }
    if let Some(note) = precheck(system, config)? {
        return Ok(ObservableReport {
            observable: f.clone(),
            mode,
            probe: ProbeVerdict::inconclusive(config, note),
            weak_mean: VerdictKind::Inconclusive,
            cross_checks: vec![],
        });
    }
    space.check(x)?;
    let table = BallTable::build(system, vec![x.clone()], config)?;
    let main = observable_criteria(system, f, &Rational::one(), config);
    let wm = weak_mean_criteria(system, config);
    let mut cache = EvalCache::new();
    let crits: Vec<Vec<Criterion>> = registry.iter().map(|g| observable_criteria(system, g, &lipschitz_scale(g), config)).collect();
    let mut all: Vec<&[Criterion]> = vec![&main, &wm];
    all.extend(crits.iter().map(Vec::as_slice));
    fill_cache(system, &table, &all, config, &mut cache)?;
    let probe = judge_point(&main, &cache, 0, agg, config);
    let weak_mean = judge_point(&wm, &cache, 0, agg, config).verdict;
    let f_table = &cache[&SegmentStatKind::WeakMean.label()];
    let mut cross_checks = vec![];
    for (g, crit) in registry.into_iter().zip(crits) {
        let lip = g.lipschitz();
        let verdict = judge_point(&crit, &cache, 0, agg, config).verdict;
        let g_table = &cache[&crit[0].kind.label()];
        let contraction_holds = g_table.iter().flatten().flatten().zip(f_table.iter().flatten().flatten()).all(|(pg, pf)| {
            pg.est.samples.iter().zip(&pf.est.samples).all(|(sg, sf)| &sg.value - &sg.bound <= &lip * (&sf.value + &sf.bound))
        });
        let implication_holds = weak_mean != VerdictKind::EquicontinuousConsistent || verdict == VerdictKind::EquicontinuousConsistent;
        cross_checks.push(CrossCheck { observable: g, lipschitz: lip, verdict, contraction_holds, implication_holds });
    }
    Ok(ObservableReport { observable: f.clone(), mode, probe, weak_mean, cross_checks })
}

/// Threshold scale for the cross-check: the Lipschitz constant, or 1 for
/// constant observables whose statistic is identically 0.
fn lipschitz_scale(g: &Observable) -> Rational {
    let l = g.lipschitz();
    if l.is_zero() {
        Rational::one()
    } else {
        l
    }
}

// Dichotomy

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Side {
    EquicontinuousSide,
    SensitiveSide,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CenterEvidence {
    pub center: StatePoint,
    pub weak_mean: VerdictKind,
    pub in_mean: VerdictKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DichotomyReport {
    /// Mean dichotomy: almost weakly mean equicontinuous or strong mean
    /// sensitive.
    pub side: Side,
    /// In-mean dichotomy: almost weakly equicontinuous in the mean or
    /// strong sensitive in the mean.
    pub in_mean_side: Side,
    #[serde(with = "parts_opt")]
    pub achieved_constant: Option<Rational>,
    #[serde(with = "parts_opt")]
    pub in_mean_constant: Option<Rational>,
    pub centers: Vec<CenterEvidence>,
    pub strong_mean: ProbeVerdict,
    pub strong_in_mean: ProbeVerdict,
    pub notes: Vec<String>,
    pub config: ProbeConfig,
}

fn side(sensitivity: &ProbeVerdict, points: impl Iterator<Item = VerdictKind>) -> Side {
    let points: Vec<VerdictKind> = points.collect();
    match sensitivity.verdict {
        VerdictKind::SensitiveWitnessed => Side::SensitiveSide,
        VerdictKind::EquicontinuousConsistent
            if !points.is_empty() && points.iter().all(|v| *v == VerdictKind::EquicontinuousConsistent) =>
        {
            Side::EquicontinuousSide
        }
        _ => Side::Inconclusive,
    }
}

/// Point probes at the sampled centers plus the sensitivity search, all on
/// one set of ball samples, folded into one verdict per dichotomy.
pub fn dichotomy_report(system: &SystemDescriptor, config: &ProbeConfig) -> Result<DichotomyReport> {
    let empty = |note: String| DichotomyReport {
        side: Side::Inconclusive,
        in_mean_side: Side::Inconclusive,
        achieved_constant: None,
        in_mean_constant: None,
        centers: vec![],
        strong_mean: ProbeVerdict::inconclusive(config, note.clone()),
        strong_in_mean: ProbeVerdict::inconclusive(config, note.clone()),
        notes: vec![note],
        config: config.clone(),
    };
    if let Some(note) = precheck(system, config)? {
        return Ok(empty(note));
    }
    let table = BallTable::build(system, probe_centers(system, config)?, config)?;
    if table.centers.is_empty() || table.is_empty() {
        return Ok(empty("no ball centers or samples".into()));
    }
    let wm = weak_mean_criteria(system, config);
    let mut cache = EvalCache::new();
    fill_cache(system, &table, &[&wm], config, &mut cache)?;
    let evals = &cache[&SegmentStatKind::WeakMean.label()];
    let strong_mean = judge_sensitivity(evals, SensitivityMode::StrongMean, config);
    let strong_in_mean = judge_sensitivity(evals, SensitivityMode::StrongInMean, config);
    let centers: Vec<CenterEvidence> = table
        .centers
        .iter()
        .enumerate()
        .map(|(c, x)| CenterEvidence {
            center: x.clone(),
            weak_mean: judge_point(&wm, &cache, c, Aggregate::Limsup, config).verdict,
            in_mean: judge_point(&wm, &cache, c, Aggregate::RunningMax { from: 0 }, config).verdict,
        })
        .collect();
    Ok(DichotomyReport {
        side: side(&strong_mean, centers.iter().map(|c| c.weak_mean)),
        in_mean_side: side(&strong_in_mean, centers.iter().map(|c| c.in_mean)),
        achieved_constant: strong_mean.achieved_constant.clone(),
        in_mean_constant: strong_in_mean.achieved_constant.clone(),
        centers,
        strong_mean,
        strong_in_mean,
        notes: vec![],
        config: config.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(system: &SystemDescriptor) -> ProbeConfig {
        ProbeConfig { schedule: Schedule::geometric(4, 8), centers: 1, samples_per_ball: 4, ..ProbeConfig::default_for(system) }
    }

    #[test]
    fn mix_is_order_sensitive() {
        assert_ne!(mix(1, &[2, 3]), mix(1, &[3, 2]));
        assert_eq!(mix(1, &[2, 3]), mix(1, &[2, 3]));
    }

    #[test]
    fn short_schedule_is_inconclusive() {
        let sys = SystemDescriptor::golden_rotation();
        let cfg = ProbeConfig { schedule: Schedule(vec![16, 32]), ..quick(&sys) };
        let v = probe_weak_mean_equicontinuous_point(&sys, &StatePoint::circle(int(0)), &cfg).unwrap();
        assert_eq!(v.verdict, VerdictKind::Inconclusive);
    }

    #[test]
    fn zero_budget_is_inconclusive() {
        let sys = SystemDescriptor::doubling();
        let cfg = ProbeConfig { samples_per_ball: 0, ..quick(&sys) };
        assert_eq!(dichotomy_report(&sys, &cfg).unwrap().side, Side::Inconclusive);
    }

    #[test]
    fn density_t_zero_is_trivially_consistent() {
        let sys = SystemDescriptor::doubling();
        let x = systems::typical_point(&sys, 3).unwrap();
        let v = probe_density_t_equicontinuity(&sys, &x, &int(0), &quick(&sys)).unwrap();
        assert_eq!(v.verdict, VerdictKind::EquicontinuousConsistent);
    }

    #[test]
    fn late_start_capped_at_tail() {
        let sys = SystemDescriptor::doubling();
        let cfg = ProbeConfig { late_start: Some(1 << 20), ..ProbeConfig::default_for(&sys) };
        assert_eq!(cfg.effective_late_start(), 1 << 10);
    }

    #[test]
    fn empty_anchor_grid_is_an_error() {
        let sys = SystemDescriptor::full_shift(2);
        let cfg = ProbeConfig { anchors: vec![], ..quick(&sys) };
        assert!(search_sensitive_tuples(&sys, &cfg, TupleKind::MeanTuple).is_err());
    }
}
