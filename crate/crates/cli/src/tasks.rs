//! Task drivers: each turns a config into a payload and CSV rows.

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use weakmean::classify::{self, ProbeVerdict};
use weakmean::orbitstats::{estimate_limit, lower_density, records, upper_density, IntegerSetView, OrbitPair, Schedule};
use weakmean::rational::{int, parts, Rational};
use weakmean::systems::SystemDescriptor;

use crate::config::{DensitySpec, ExperimentConfig, ProbeTask, Task};
use crate::record::{CsvRow, ResultRecord};
use crate::verify;
use crate::CliError;

pub struct Outcome {
    pub record: ResultRecord,
    pub rows: Vec<CsvRow>,
    /// A verdict-level failure (verify only).
    pub failed: bool,
}

pub fn run(config: &ExperimentConfig) -> Result<Outcome, CliError> {
    config.validate()?;
    let (payload, rows, schedule, failed) = match config.task {
        Task::Metric => {
            let (p, r, s) = metric(config)?;
            (p, r, Some(s), false)
        }
        Task::Density => {
            let (p, r, s) = density(config)?;
            (p, r, Some(s), false)
        }
        Task::Probe => {
            let (p, r) = probe(config)?;
            (p, r, Some(config.probe_config()?.schedule), false)
        }
        Task::TupleSearch => {
            let (p, r) = tuple_search(config)?;
            (p, r, Some(config.probe_config()?.schedule), false)
        }
        Task::Dichotomy => {
            let report = classify::dichotomy_report(&config.system, &config.probe_config()?)?;
            let rows = witness_rows(&report.strong_mean);
            (serde_json::to_value(&report)?, rows, Some(config.probe_config()?.schedule), false)
        }
        Task::Sweep => {
            let (p, r) = sweep(config)?;
            (p, r, None, false)
        }
        Task::Verify => {
            let report = verify::run_verify(config.verify_level, config.seed);
            let rows = report
                .checks
                .iter()
                .map(|c| CsvRow::new(c.check.name(), "passed", c.evaluations, &int(c.passed as i64)))
                .collect();
            (serde_json::to_value(&report)?, rows, None, !report.passed)
        }
    };
    Ok(Outcome { record: ResultRecord::new(config, payload, schedule)?, rows, failed })
}

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct StatEntry<'a> {
    stat_kind: String,
    kind: &'a weakmean::orbitstats::SegmentStatKind,
    estimate: weakmean::orbitstats::LimitEstimate,
}

fn metric(config: &ExperimentConfig) -> Result<(Value, Vec<CsvRow>, Schedule), CliError> {
    let schedule = config.metric_schedule();
    schedule.validate(config.tail_window)?;
    let mut rows = vec![];
    let mut pairs = vec![];
    for spec in &config.pairs {
        let x = spec.x.resolve(&config.system)?;
        let y = spec.y.resolve(&config.system)?;
        let pair = OrbitPair::generate(&config.system, &x, &y, schedule.max())?;
        let mut stats = vec![];
        for kind in &config.stats {
            let est = estimate_limit(|n| pair.stat(kind, n), &schedule, config.tail_window, &config.tolerance)?;
            rows.extend(records(&spec.id, kind, &est).iter().map(CsvRow::from));
            stats.push(StatEntry { stat_kind: kind.label(), kind, estimate: est });
        }
        pairs.push(json!({ "id": spec.id, "x": x, "y": y, "stats": stats }));
    }
    Ok((json!({ "pairs": pairs }), rows, schedule))
}

/// `(view, default schedule)` for a density spec.
pub fn density_view(spec: &DensitySpec) -> Result<(IntegerSetView, Option<Schedule>), CliError> {
    match spec {
        DensitySpec::PowerBlocks { base, max_exp } => {
            if *base < 2 {
                return Err(CliError::Config("power-block base must be at least 2".into()));
            }
            let starts: Vec<usize> = (0..=*max_exp)
                .map(|k| base.checked_pow(k).filter(|s| s.checked_mul(2).is_some()))
                .collect::<Option<_>>()
                .ok_or_else(|| CliError::Config("power blocks overflow".into()))?;
            let horizon = 2 * starts.last().expect("max_exp >= 0");
            let mut ends: Vec<usize> = starts.iter().flat_map(|&s| [s, 2 * s]).filter(|&n| n > 0).collect();
            ends.sort_unstable();
            ends.dedup();
            let view = IntegerSetView::predicate(horizon, move |k| starts.iter().any(|&s| s <= k && k < 2 * s));
            Ok((view, Some(Schedule(ends))))
        }
        DensitySpec::Indices { horizon, indices } => Ok((IntegerSetView::indices(*horizon, indices.clone())?, None)),
    }
}

fn density(config: &ExperimentConfig) -> Result<(Value, Vec<CsvRow>, Schedule), CliError> {
    let (view, default_schedule) = density_view(&config.density)?;
    let schedule = config
        .schedule
        .clone()
        .or(default_schedule)
        .ok_or_else(|| CliError::Config("density over explicit indices needs a schedule".into()))?;
    let upper = upper_density(&view, &schedule, config.tail_window)?;
    let lower = lower_density(&view, &schedule, config.tail_window)?;
    let rows = upper.samples.iter().map(|s| CsvRow::new("set", "density", s.n, &s.value)).collect();
    #[derive(Serialize)]
    struct R(#[serde(with = "parts")] Rational);
    let payload = json!({
        "set": config.density,
        "upperDensity": R(upper.limsup_estimate.clone()),
        "lowerDensity": R(lower.liminf_estimate.clone()),
        "upper": upper,
        "lower": lower,
    });
    Ok((payload, rows, schedule))
}

fn witness_rows(v: &ProbeVerdict) -> Vec<CsvRow> {
    v.witnesses.iter().enumerate().map(|(i, w)| CsvRow::new(&format!("witness{i}"), &w.stat.label(), w.n, &w.value.value)).collect()
}

fn probe(config: &ExperimentConfig) -> Result<(Value, Vec<CsvRow>), CliError> {
    let pc = config.probe_config()?;
    let sys = &config.system;
    let point = || -> Result<_, CliError> { config.point.as_ref().expect("validated").resolve(sys) };
    Ok(match &config.probe_task {
        ProbeTask::WeakMean => verdict_out(classify::probe_weak_mean_equicontinuous_point(sys, &point()?, &pc)?)?,
        ProbeTask::InMean => verdict_out(classify::probe_equicontinuous_in_mean_point(sys, &point()?, &pc)?)?,
        ProbeTask::DensityT { t } => verdict_out(classify::probe_density_t_equicontinuity(sys, &point()?, t, &pc)?)?,
        ProbeTask::Sensitivity { mode } => verdict_out(classify::estimate_sensitivity_constant(sys, &pc, *mode)?)?,
        ProbeTask::Observable { f, mode } => {
            let r = classify::probe_observable_equicontinuity(sys, &point()?, f, &pc, *mode)?;
            let rows = witness_rows(&r.probe);
            (serde_json::to_value(&r)?, rows)
        }
        ProbeTask::Agreement => {
            let r = classify::check_mean_vs_in_mean_agreement(sys, &pc)?;
            let mut rows = witness_rows(&r.strong_mean);
            rows.extend(witness_rows(&r.strong_in_mean));
            (serde_json::to_value(&r)?, rows)
        }
        ProbeTask::DensityEquivalence => (serde_json::to_value(classify::check_density_equivalence(sys, &pc)?)?, vec![]),
    })
}

fn verdict_out(v: ProbeVerdict) -> Result<(Value, Vec<CsvRow>), CliError> {
    let rows = witness_rows(&v);
    Ok((serde_json::to_value(&v)?, rows))
}

fn tuple_search(config: &ExperimentConfig) -> Result<(Value, Vec<CsvRow>), CliError> {
    let pc = config.probe_config()?;
    let report = classify::search_sensitive_tuples(&config.system, &pc, config.tuple_kind)?;
    let n = pc.schedule.max();
    let rows = report
        .diagnostics
        .iter()
        .enumerate()
        .flat_map(|(i, d)| d.per_eps.iter().map(move |e| CsvRow::new(&format!("anchor{i}"), &format!("tupleFrequency({})", e.eps), n, &e.frequency)))
        .collect();
    Ok((serde_json::to_value(&report)?, rows))
}

/// Dichotomy reports over the sweep grid, in grid order.
fn sweep(config: &ExperimentConfig) -> Result<(Value, Vec<CsvRow>), CliError> {
    let grid: Vec<SystemDescriptor> = config.sweep.grid();
    let reports = grid
        .par_iter()
        .map(|sys| -> Result<_, CliError> { Ok(classify::dichotomy_report(sys, &config.probe_config_for(sys)?)?) })
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = vec![];
    let mut summary = vec![];
    for (i, (sys, r)) in grid.iter().zip(&reports).enumerate() {
        let c = r.achieved_constant.clone().unwrap_or_default();
        rows.push(CsvRow::new(&format!("system{i}"), "achievedConstant", r.config.schedule.max(), &c));
        summary.push(json!({ "system": sys, "name": sys.name(), "side": r.side, "inMeanSide": r.in_mean_side }));
    }
    Ok((json!({ "rows": summary, "reports": reports }), rows))
}
