//! Experiment configuration: one JSON document, with defaults for every
//! field except `system` and `task`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use weakmean::classify::{ObservableMode, ProbeConfig, SensitivityMode, TupleKind};
use weakmean::orbitstats::{Observable, Schedule, SegmentStatKind};
use weakmean::rational::{parts, ratio, Rational};
use weakmean::spaces::{SampleStrategy, StatePoint};
use weakmean::systems::{self, SystemDescriptor};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Metric,
    Density,
    Probe,
    TupleSearch,
    Dichotomy,
    Verify,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemDescriptor,
    pub task: Task,
    #[serde(default)]
    pub seed: u64,
    /// Horizons for metric tasks. Probe tasks take theirs from `probe`.
    #[serde(default)]
    pub schedule: Option<Schedule>,
    #[serde(default = "default_tail_window")]
    pub tail_window: usize,
    #[serde(default = "default_tolerance", with = "parts")]
    pub tolerance: Rational,
    #[serde(default)]
    pub pairs: Vec<PairSpec>,
    #[serde(default = "default_stats")]
    pub stats: Vec<SegmentStatKind>,
    /// Overrides merged into the system's default probe configuration.
    #[serde(default)]
    pub probe: Map<String, Value>,
    #[serde(default)]
    pub probe_task: ProbeTask,
    #[serde(default)]
    pub point: Option<PointSpec>,
    #[serde(default = "default_tuple_kind")]
    pub tuple_kind: TupleKind,
    #[serde(default)]
    pub density: DensitySpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub verify_level: VerifyLevel,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_tail_window() -> usize {
    3
}

fn default_tolerance() -> Rational {
    ratio(1, 100)
}

fn default_stats() -> Vec<SegmentStatKind> {
    vec![SegmentStatKind::WeakMean]
}

fn default_tuple_kind() -> TupleKind {
    TupleKind::MeanTuple
}

/// A point given explicitly, as a typical point of the system, or drawn
/// with a sampling strategy.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Typical { typical: u64 },
    Sampled { sample: SampleStrategy, seed: u64 },
    Explicit(StatePoint),
}

impl PointSpec {
    pub fn resolve(&self, system: &SystemDescriptor) -> Result<StatePoint, CliError> {
        let p = match self {
            PointSpec::Typical { typical } => systems::typical_point(system, *typical)?,
            PointSpec::Sampled { sample, seed } => systems::sample_point(system, sample, *seed)?,
            PointSpec::Explicit(p) => {
                system.space().check(p)?;
                p.clone()
            }
        };
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairSpec {
    pub id: String,
    pub x: PointSpec,
    pub y: PointSpec,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum ProbeTask {
    #[default]
    WeakMean,
    InMean,
    DensityT {
        #[serde(with = "parts")]
        t: Rational,
    },
    Observable {
        f: Observable,
        mode: ObservableMode,
    },
    Sensitivity {
        mode: SensitivityMode,
    },
    Agreement,
    DensityEquivalence,
}

impl ProbeTask {
    /// Whether the probe runs at a single point.
    pub fn needs_point(&self) -> bool {
        matches!(
            self,
            ProbeTask::WeakMean | ProbeTask::InMean | ProbeTask::DensityT { .. } | ProbeTask::Observable { .. }
        )
    }
}

/// Integer sets for the density task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", rename_all_fields = "camelCase")]
pub enum DensitySpec {
    /// `∪_{k <= max_exp} [base^k, 2·base^k)`. The default schedule is the
    /// block endpoints.
    PowerBlocks { base: usize, max_exp: u32 },
    Indices { horizon: usize, indices: Vec<usize> },
}

impl Default for DensitySpec {
    fn default() -> Self {
        DensitySpec::PowerBlocks { base: 4, max_exp: 10 }
    }
}

/// Parameter grid for the sweep task: explicit systems, or the rotations
/// by the convergents `F_k / F_{k+1}` of the golden angle.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub systems: Vec<SystemDescriptor>,
    #[serde(default)]
    pub rotation_convergents: usize,
}

impl SweepSpec {
    pub fn grid(&self) -> Vec<SystemDescriptor> {
        let mut out = self.systems.clone();
        let (mut a, mut b) = (1i64, 2i64);
        for _ in 0..self.rotation_convergents {
            out.push(SystemDescriptor::rotation(ratio(a, b)));
            (a, b) = (b, a + b);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "camelCase")]
pub enum VerifyLevel {
    #[default]
    Quick,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "camelCase")]
pub enum Format {
    #[default]
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

impl ExperimentConfig {
    /// Parses a JSON document. Errors carry serde's line and column.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| CliError::Config(format!("{e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.system.validate()?;
        if let Some(s) = &self.schedule {
            s.validate(self.tail_window)?;
        }
        if self.task == Task::Metric && self.pairs.is_empty() {
            return Err(CliError::Config("metric task needs at least one pair".into()));
        }
        if self.task == Task::Probe && self.probe_task.needs_point() && self.point.is_none() {
            return Err(CliError::Config("probe task needs a point".into()));
        }
        self.probe_config()?;
        Ok(())
    }

    /// The system's default probe configuration with `probe` merged over it,
    /// seeded from the experiment seed unless `probe.seed` is given.
    pub fn probe_config(&self) -> Result<ProbeConfig, CliError> {
        self.probe_config_for(&self.system)
    }

    pub fn probe_config_for(&self, system: &SystemDescriptor) -> Result<ProbeConfig, CliError> {
        let mut base = ProbeConfig::default_for(system);
        base.seed = self.seed;
        let Value::Object(mut merged) = serde_json::to_value(&base)? else {
            unreachable!("a struct serializes to an object");
        };
        for (k, v) in &self.probe {
            if !merged.contains_key(k) {
                return Err(CliError::Config(format!("unknown probe field {k:?}")));
            }
            merged.insert(k.clone(), v.clone());
        }
        let cfg: ProbeConfig = serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Config(format!("probe: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Metric schedule: the explicit one, else `2^4..2^12`.
    pub fn metric_schedule(&self) -> Schedule {
        self.schedule.clone().unwrap_or_else(|| Schedule::geometric(4, 12))
    }

    /// Canonical JSON of the parsed config, output paths excluded.
    pub fn canonical_json(&self) -> Result<String, CliError> {
        let mut c = self.clone();
        c.output = OutputSpec::default();
        Ok(serde_json::to_string(&c)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(r#"{"system":{"kind":"doubling"},"task":"dichotomy"}"#).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.tail_window, 3);
        assert_eq!(cfg.probe_config().unwrap().samples_per_ball, 8);
    }

    #[test]
    fn probe_overrides_merge() {
        let cfg = ExperimentConfig::from_json(
            r#"{"system":{"kind":"doubling"},"task":"dichotomy","probe":{"samplesPerBall":0,"centers":2}}"#,
        )
        .unwrap();
        let p = cfg.probe_config().unwrap();
        assert_eq!((p.samples_per_ball, p.centers), (0, 2));
        let bad = r#"{"system":{"kind":"doubling"},"task":"dichotomy","probe":{"bogus":1}}"#;
        assert!(matches!(ExperimentConfig::from_json(bad), Err(CliError::Config(_))));
    }

    #[test]
    fn malformed_json_reports_line() {
        let err = ExperimentConfig::from_json("{\n\"system\": {\"kind\": \"doubling\"},\n\"task\": }").unwrap_err();
        assert!(err.to_string().contains("line 3"), "{err}");
    }

    #[test]
    fn missing_task_is_rejected() {
        assert!(ExperimentConfig::from_json(r#"{"system":{"kind":"doubling"}}"#).is_err());
    }

    #[test]
    fn convergent_grid() {
        let g = SweepSpec { systems: vec![], rotation_convergents: 3 }.grid();
        assert_eq!(g, vec![
            SystemDescriptor::rotation(ratio(1, 2)),
            SystemDescriptor::rotation(ratio(2, 3)),
            SystemDescriptor::rotation(ratio(3, 5)),
        ]);
    }
}
