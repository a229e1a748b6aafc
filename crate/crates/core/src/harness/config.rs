//! TOML experiment configuration.
//!
//! ```toml
//! [scenario]
//! transmit_antennas = 6
//! snr_db = [0, 10, 20, 30, 40]   # P_T/σ² points
//! trials = 2000
//! seed = 7
//! # optional: noise_variance, transmit_power, path_loss_exponent,
//! # reference_distance, redraw_per_trial
//!
//! [users]
//! antennas = [1, 1, 1, 2, 3, 4]  # one entry per user
//! # or: count = 20, max_antennas = 2 (uniform on 1..=max_antennas)
//! distance = "random"             # number, [low, high] or "random"
//! receive_correlation = 0.3
//! transmit_correlation = [0.0, 0.5]
//!
//! [experiment]
//! label = "mixed"
//! schedulers = ["conventional-grouping", "exhaustive-grouping"]
//! criteria = ["grouping-oriented", "largest-principal-angle"]
//! # optional: power_policy, outage_level, group_size (omit for the
//! # fewest feasible groups), exhaustive_limit, aggregate, output, format
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{ExperimentSpec, OutputFormat, OutputSpec};
use crate::channel::{Antennas, Draw, Scenario, UserProfile};
use crate::criteria::CriterionKind;
use crate::error::{Error, Result};
use crate::precoding::PowerPolicy;
use crate::schedulers::{Aggregate, GroupLayout, SchedulerKind, DEFAULT_EXHAUSTIVE_LIMIT};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    scenario: ScenarioSection,
    users: UsersSection,
    experiment: ExperimentSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    transmit_antennas: usize,
    snr_db: Option<Vec<f64>>,
    trials: Option<usize>,
    seed: Option<u64>,
    noise_variance: Option<f64>,
    transmit_power: Option<f64>,
    path_loss_exponent: Option<f64>,
    reference_distance: Option<f64>,
    redraw_per_trial: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DrawValue {
    Fixed(f64),
    Range([f64; 2]),
    Word(String),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UsersSection {
    antennas: Option<Vec<usize>>,
    count: Option<usize>,
    max_antennas: Option<usize>,
    distance: Option<DrawValue>,
    receive_correlation: Option<DrawValue>,
    transmit_correlation: Option<DrawValue>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    label: Option<String>,
    schedulers: Vec<String>,
    #[serde(default)]
    criteria: Vec<String>,
    power_policy: Option<String>,
    outage_level: Option<f64>,
    group_size: Option<usize>,
    exhaustive_limit: Option<usize>,
    aggregate: Option<String>,
    output: Option<PathBuf>,
    format: Option<String>,
}

fn draw(value: Option<DrawValue>, default: Draw, key: &str) -> Result<Draw> {
    match value {
        None => Ok(default),
        Some(DrawValue::Fixed(v)) => Ok(Draw::Fixed(v)),
        Some(DrawValue::Range([low, high])) => Ok(Draw::Uniform { low, high }),
        Some(DrawValue::Word(w)) if w == "random" => Ok(default),
        Some(DrawValue::Word(w)) => Err(Error::Config(format!(
            "users.{key}: expected a number, [low, high] or \"random\", got {w:?}"
        ))),
    }
}

fn parse_aggregate(s: &str) -> Result<Aggregate> {
    match s {
        "per-group-average" => Ok(Aggregate::PerGroupAverage),
        "period-total" => Ok(Aggregate::PeriodTotal),
        other => Err(Error::Config(format!(
            "unknown aggregate {other:?}; expected per-group-average or period-total"
        ))),
    }
}

/// Parses a configuration document into a validated spec.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

    let u = file.users;
    let antennas: Vec<Antennas> = match (u.antennas, u.count, u.max_antennas) {
        (Some(list), None, None) => list.into_iter().map(Antennas::Fixed).collect(),
        (None, Some(count), Some(max)) => vec![Antennas::UniformUpTo(max); count],
        _ => {
            return Err(Error::Config(
                "users: give either `antennas` or both `count` and `max_antennas`".into(),
            ))
        }
    };
    let template = UserProfile::randomized(0, Antennas::Fixed(1));
    let distance = draw(u.distance, template.distance, "distance")?;
    let receive = draw(u.receive_correlation, template.receive_correlation, "receive_correlation")?;
    let transmit = draw(u.transmit_correlation, template.transmit_correlation, "transmit_correlation")?;
    let users = antennas
        .into_iter()
        .enumerate()
        .map(|(id, antennas)| UserProfile {
            id,
            antennas,
            distance,
            receive_correlation: receive,
            transmit_correlation: transmit,
        })
        .collect();

    let s = file.scenario;
    let mut scenario = Scenario::new(s.transmit_antennas, users);
    if let Some(v) = s.snr_db {
        scenario.snr_db = v;
    }
    if let Some(v) = s.trials {
        scenario.trials = v;
    }
    if let Some(v) = s.seed {
        scenario.seed = v;
    }
    if let Some(v) = s.noise_variance {
        scenario.noise_variance = v;
    }
    if let Some(v) = s.transmit_power {
        scenario.transmit_power = v;
    }
    if let Some(v) = s.path_loss_exponent {
        scenario.path_loss_exponent = v;
    }
    if let Some(v) = s.reference_distance {
        scenario.reference_distance = v;
    }
    if let Some(v) = s.redraw_per_trial {
        scenario.redraw_per_trial = v;
    }

    let e = file.experiment;
    let mut spec = ExperimentSpec::new(e.label.unwrap_or_else(|| "experiment".into()), scenario);
    spec.schedulers = e
        .schedulers
        .iter()
        .map(|s| s.parse::<SchedulerKind>())
        .collect::<Result<_>>()?;
    spec.criteria = e
        .criteria
        .iter()
        .map(|s| s.parse::<CriterionKind>())
        .collect::<Result<_>>()?;
    if let Some(p) = e.power_policy {
        spec.power_policy = p.parse::<PowerPolicy>()?;
    }
    if let Some(v) = e.outage_level {
        spec.outage_level = v;
    }
    spec.group_layout = match e.group_size {
        Some(g) => GroupLayout::FixedSize(g),
        None => GroupLayout::Minimal,
    };
    spec.exhaustive_limit = e.exhaustive_limit.unwrap_or(DEFAULT_EXHAUSTIVE_LIMIT);
    if let Some(a) = e.aggregate {
        spec.aggregate = parse_aggregate(&a)?;
    }
    spec.output = match (e.output, e.format) {
        (Some(path), format) => {
            let format = match format {
                Some(f) => f.parse::<OutputFormat>()?,
                None => OutputFormat::from_path(&path),
            };
            Some(OutputSpec { path, format })
        }
        (None, Some(_)) => {
            return Err(Error::Config("experiment.format given without experiment.output".into()))
        }
        (None, None) => None,
    };
    spec.validate()?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"
[scenario]
transmit_antennas = 6
snr_db = [10, 30]
trials = 5
seed = 3

[users]
antennas = [1, 1, 1, 2, 3, 4]
distance = [300.0, 500.0]
receive_correlation = 0.2

[experiment]
schedulers = ["conventional-grouping", "exhaustive-grouping"]
criteria = ["grouping-oriented"]
group_size = 2
"#;

    #[test]
    fn parses_basic() {
        let spec = parse_config(BASIC).unwrap();
        assert_eq!(spec.scenario.users.len(), 6);
        assert_eq!(spec.scenario.users[3].antennas, Antennas::Fixed(2));
        assert_eq!(spec.scenario.users[0].distance, Draw::Uniform { low: 300.0, high: 500.0 });
        assert_eq!(spec.scenario.users[0].receive_correlation, Draw::Fixed(0.2));
        assert_eq!(spec.group_layout, GroupLayout::FixedSize(2));
        assert_eq!(spec.scenario.snr_db, vec![10.0, 30.0]);
    }

    #[test]
    fn unknown_key_rejected() {
        let text = BASIC.replace("seed = 3", "seed = 3\ncolour = 1");
        assert!(matches!(parse_config(&text), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_scheduler_rejected() {
        let text = BASIC.replace("\"exhaustive-grouping\"", "\"magic\"");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn uniform_antennas() {
        let text = BASIC.replace("antennas = [1, 1, 1, 2, 3, 4]", "count = 20\nmax_antennas = 2");
        let spec = parse_config(&text).unwrap();
        assert_eq!(spec.scenario.users.len(), 20);
        assert_eq!(spec.scenario.users[7].antennas, Antennas::UniformUpTo(2));
    }
}
