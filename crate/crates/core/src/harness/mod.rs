//! Monte Carlo experiment engine and outage statistics.
//!
//! Trials run in parallel; each derives its channels and scheduler
//! randomness from counter-based streams keyed by the trial index, and the
//! results are collected in trial order before any reduction. Output is
//! therefore independent of the thread count.

pub mod config;
pub mod output;
pub mod presets;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_realization, RngStreams, Scenario};
use crate::criteria::{Criterion, CriterionKind};
use crate::error::{Error, Result};
use crate::precoding::PowerPolicy;
use crate::schedulers::{
    run_scheduler, Aggregate, CapacitySettings, GroupLayout, ScheduleOptions, SchedulerKind,
    DEFAULT_EXHAUSTIVE_LIMIT,
};

pub use output::{OutputFormat, OutputSpec};
pub use presets::{figure_preset, PRESET_NAMES};

/// Environment variable that overrides the worker thread count.
pub const THREADS_ENV: &str = "HETSCHED_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub label: String,
    pub scenario: Scenario,
    pub schedulers: Vec<SchedulerKind>,
    /// Criteria for the schedulers that take one; the others run once.
    pub criteria: Vec<CriterionKind>,
    pub power_policy: PowerPolicy,
    pub outage_level: f64,
    pub group_layout: GroupLayout,
    pub exhaustive_limit: usize,
    pub aggregate: Aggregate,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
}

impl ExperimentSpec {
    pub fn new(label: impl Into<String>, scenario: Scenario) -> Self {
        Self {
            label: label.into(),
            scenario,
            schedulers: Vec::new(),
            criteria: Vec::new(),
            power_policy: PowerPolicy::Waterfilling,
            outage_level: 0.10,
            group_layout: GroupLayout::Minimal,
            exhaustive_limit: DEFAULT_EXHAUSTIVE_LIMIT,
            aggregate: Aggregate::PerGroupAverage,
            output: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        if !(self.outage_level > 0.0 && self.outage_level < 1.0) {
            return Err(Error::Config(format!(
                "outage_level must lie in (0, 1), got {}",
                self.outage_level
            )));
        }
        if self.schedulers.is_empty() {
            return Err(Error::Config("at least one scheduler is required".into()));
        }
        if self.schedulers.iter().any(|s| s.uses_criterion()) && self.criteria.is_empty() {
            return Err(Error::Config(
                "criterion-driven schedulers need at least one criterion".into(),
            ));
        }
        if let GroupLayout::FixedSize(0) = self.group_layout {
            return Err(Error::Config("group size must be >= 1".into()));
        }
        if self.scenario.snr_db.is_empty() {
            return Err(Error::Config("snr_db must list at least one point".into()));
        }
        Ok(())
    }

    /// Every (scheduler, criterion) combination, in output order.
    pub fn runs(&self) -> Vec<RunKey> {
        let mut out = Vec::new();
        for &scheduler in &self.schedulers {
            if scheduler.uses_criterion() {
                for &criterion in &self.criteria {
                    out.push(RunKey {
                        scheduler,
                        criterion: Some(criterion),
                    });
                }
            } else {
                out.push(RunKey {
                    scheduler,
                    criterion: None,
                });
            }
        }
        out
    }

    /// `P_T / (M_T σ²)`: the power of one mode when all transmit dimensions
    /// are in use.
    pub fn per_mode_snr(&self, snr_db: f64) -> f64 {
        10f64.powf(snr_db / 10.0) / self.scenario.transmit_antennas as f64
    }

    fn options(&self, snr_db: f64) -> ScheduleOptions {
        ScheduleOptions {
            layout: self.group_layout,
            exhaustive_limit: self.exhaustive_limit,
            aggregate: self.aggregate,
            capacity: CapacitySettings {
                policy: self.power_policy,
                transmit_power: self.scenario.noise_variance * 10f64.powf(snr_db / 10.0),
                noise_variance: self.scenario.noise_variance,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunKey {
    pub scheduler: SchedulerKind,
    pub criterion: Option<CriterionKind>,
}

impl RunKey {
    pub fn criterion_name(&self) -> &'static str {
        self.criterion.map_or("none", CriterionKind::name)
    }
}

/// Result of one trial for every run.
#[derive(Debug, Clone)]
struct TrialOutcome {
    /// `[run][snr]`
    capacity: Vec<Vec<f64>>,
    /// `[run][snr]`
    comparisons: Vec<Vec<u64>>,
    /// `[run][snr]`
    groups: Vec<Vec<usize>>,
}

/// Raw per-trial results.
#[derive(Debug, Clone)]
pub struct ExperimentSamples {
    pub runs: Vec<RunKey>,
    pub snr_db: Vec<f64>,
    /// `[run][snr][trial]`
    pub capacity: Vec<Vec<Vec<f64>>>,
    /// `[run][snr][trial]`
    pub comparisons: Vec<Vec<Vec<u64>>>,
    /// `[run][snr][trial]`
    pub groups: Vec<Vec<Vec<usize>>>,
}

impl ExperimentSamples {
    pub fn run_index(&self, scheduler: SchedulerKind, criterion: Option<CriterionKind>) -> Option<usize> {
        self.runs
            .iter()
            .position(|r| r.scheduler == scheduler && r.criterion == criterion)
    }

    pub fn snr_index(&self, snr_db: f64) -> Option<usize> {
        self.snr_db.iter().position(|&s| s == snr_db)
    }

    pub fn trial_capacities(&self, run: usize, snr: usize) -> &[f64] {
        &self.capacity[run][snr]
    }
}

fn run_trial(spec: &ExperimentSpec, runs: &[RunKey], trial: u64) -> Result<TrialOutcome> {
    let realization = generate_realization(&spec.scenario, trial)?;
    let streams = RngStreams::new(spec.scenario.seed);
    let snrs = &spec.scenario.snr_db;
    let mut outcome = TrialOutcome {
        capacity: Vec::with_capacity(runs.len()),
        comparisons: Vec::with_capacity(runs.len()),
        groups: Vec::with_capacity(runs.len()),
    };
    for (index, run) in runs.iter().enumerate() {
        let kind = run.criterion.unwrap_or(CriterionKind::FrobeniusNorm);
        let mut caps = Vec::with_capacity(snrs.len());
        let mut comps = Vec::with_capacity(snrs.len());
        let mut groups = Vec::with_capacity(snrs.len());
        let mut fixed = None;
        for &snr in snrs {
            let options = spec.options(snr);
            if fixed.is_none() || run.scheduler.depends_on_snr() || kind.depends_on_snr() {
                let mut criterion = Criterion::new(kind, streams.scheduler(trial, 2 * index))
                    .with_snr(spec.per_mode_snr(snr));
                let mut rng = streams.scheduler(trial, 2 * index + 1);
                fixed = Some(run_scheduler(run.scheduler, &realization, &mut criterion, &options, &mut rng)?);
            }
            let arrangement = fixed.as_ref().expect("scheduled above");
            let mut per_group = Vec::with_capacity(arrangement.groups.len());
            for group in &arrangement.groups {
                per_group.push(options.capacity.group_capacity(&realization, group)?);
            }
            let value = if run.scheduler.is_grouping() {
                spec.aggregate.combine(&per_group)
            } else {
                per_group.iter().sum()
            };
            caps.push(value);
            comps.push(arrangement.comparisons);
            groups.push(arrangement.groups.len());
        }
        outcome.capacity.push(caps);
        outcome.comparisons.push(comps);
        outcome.groups.push(groups);
    }
    Ok(outcome)
}

/// Runs every trial and returns the raw samples.
pub fn run_experiment_samples(spec: &ExperimentSpec) -> Result<ExperimentSamples> {
    spec.validate().map_err(|e| with_label(spec, e))?;
    let runs = spec.runs();
    log::info!(
        "{}: {} trials, {} runs, {} SNR points",
        spec.label,
        spec.scenario.trials,
        runs.len(),
        spec.scenario.snr_db.len()
    );
    let outcomes: Vec<Result<TrialOutcome>> = (0..spec.scenario.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(spec, &runs, t))
        .collect();
    let snr_count = spec.scenario.snr_db.len();
    let trials = spec.scenario.trials;
    let mut samples = ExperimentSamples {
        runs: runs.clone(),
        snr_db: spec.scenario.snr_db.clone(),
        capacity: vec![vec![Vec::with_capacity(trials); snr_count]; runs.len()],
        comparisons: vec![vec![Vec::with_capacity(trials); snr_count]; runs.len()],
        groups: vec![vec![Vec::with_capacity(trials); snr_count]; runs.len()],
    };
    for outcome in outcomes {
        let outcome = outcome.map_err(|e| with_label(spec, e))?;
        for r in 0..runs.len() {
            for s in 0..snr_count {
                samples.capacity[r][s].push(outcome.capacity[r][s]);
                samples.comparisons[r][s].push(outcome.comparisons[r][s]);
                samples.groups[r][s].push(outcome.groups[r][s]);
            }
        }
    }
    Ok(samples)
}

fn with_label(spec: &ExperimentSpec, source: Error) -> Error {
    Error::Experiment {
        label: spec.label.clone(),
        source: Box::new(source),
    }
}

/// One row of results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageRecord {
    pub scheduler: SchedulerKind,
    /// Criterion name, `none` for criterion-free schedulers.
    pub criterion: String,
    pub snr_db: f64,
    pub outage_capacity: f64,
    pub mean_capacity: f64,
    pub trials: usize,
    pub comparisons_mean: f64,
    /// Mean number of groups per arrangement.
    pub groups_mean: f64,
    pub scenario: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutageSummary {
    pub label: String,
    pub spec: ExperimentSpec,
    pub records: Vec<OutageRecord>,
}

/// Mean computed over the sorted samples, so it does not depend on the
/// order in which trials finished.
pub fn sorted_mean(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

/// Empirical quantile with linear interpolation between order statistics:
/// position `h = (n - 1) · level` in the sorted samples.
pub fn outage_quantile(samples: &[f64], level: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidParameter("no samples".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level must lie in (0, 1), got {level}")));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidParameter("samples contain NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * level;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Bootstrap standard error of the `level` quantile.
pub fn bootstrap_quantile_se(samples: &[f64], level: f64, resamples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stats = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; samples.len()];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = *samples.choose(&mut rng).ok_or(Error::InvalidParameter("no samples".into()))?;
        }
        stats.push(outage_quantile(&buf, level)?);
    }
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (stats.len() - 1).max(1) as f64;
    Ok(var.sqrt())
}

/// Bootstrap standard error of the difference of two paired quantiles,
/// resampling trials jointly.
pub fn bootstrap_paired_quantile_diff_se(
    a: &[f64],
    b: &[f64],
    level: f64,
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::InvalidParameter("paired samples must be nonempty and equal length".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = a.len();
    let mut stats = Vec::with_capacity(resamples);
    let mut ra = vec![0.0; n];
    let mut rb = vec![0.0; n];
    for _ in 0..resamples {
        for i in 0..n {
            let j = rand::Rng::random_range(&mut rng, 0..n);
            ra[i] = a[j];
            rb[i] = b[j];
        }
        stats.push(outage_quantile(&ra, level)? - outage_quantile(&rb, level)?);
    }
    let mean = stats.iter().sum::<f64>() / stats.len() as f64;
    let var = stats.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (stats.len() - 1).max(1) as f64;
    Ok(var.sqrt())
}

/// Reduces raw samples to outage statistics.
pub fn summarize(spec: &ExperimentSpec, samples: &ExperimentSamples) -> Result<OutageSummary> {
    let mut records = Vec::new();
    for (r, run) in samples.runs.iter().enumerate() {
        for (s, &snr) in samples.snr_db.iter().enumerate() {
            let caps = &samples.capacity[r][s];
            let trials = caps.len();
            let comps: u64 = samples.comparisons[r][s].iter().sum();
            let groups: usize = samples.groups[r][s].iter().sum();
            records.push(OutageRecord {
                scheduler: run.scheduler,
                criterion: run.criterion_name().to_string(),
                snr_db: snr,
                outage_capacity: outage_quantile(caps, spec.outage_level)?,
                mean_capacity: sorted_mean(caps),
                trials,
                comparisons_mean: comps as f64 / trials as f64,
                groups_mean: groups as f64 / trials as f64,
                scenario: spec.label.clone(),
            });
        }
    }
    Ok(OutageSummary {
        label: spec.label.clone(),
        spec: spec.clone(),
        records,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<OutageSummary> {
    let samples = run_experiment_samples(spec)?;
    summarize(spec, &samples)
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        },
    }
}
