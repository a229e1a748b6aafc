//! Built-in experiments mirroring the published figures.

use super::ExperimentSpec;
use crate::channel::{Antennas, Scenario, UserProfile};
use crate::criteria::CriterionKind;
use crate::error::{Error, Result};
use crate::schedulers::{GroupLayout, SchedulerKind};

pub const PRESET_NAMES: [&str; 6] = ["fig3", "fig4", "fig5", "fig6", "fig7", "fig8"];

/// Trials per SNR point at desk scale.
pub const DESK_TRIALS: usize = 2000;
/// Trials per SNR point in figure-fidelity mode.
pub const FIDELITY_TRIALS: usize = 20000;

/// User counts swept by `fig6`.
pub const FIG6_USER_COUNTS: [usize; 5] = [4, 8, 12, 16, 20];
/// Largest `fig6` pool that still runs the exhaustive comparator.
pub const FIG6_EXHAUSTIVE_MAX: usize = 8;

const MIXED: [usize; 6] = [1, 1, 1, 2, 3, 4];

fn one_or_two(count: usize) -> Scenario {
    let users = (0..count)
        .map(|id| UserProfile::randomized(id, Antennas::UniformUpTo(2)))
        .collect();
    Scenario::new(12, users)
}

fn greedy_criteria() -> Vec<CriterionKind> {
    vec![
        CriterionKind::SelectionFull,
        CriterionKind::SelectionSimplified,
        CriterionKind::LargestPrincipalAngle,
        CriterionKind::ProjectedNorm,
    ]
}

/// Experiments for the named figure. Most figures are a single experiment;
/// `fig4` has one per antenna configuration and `fig6` one per user count.
pub fn figure_preset(name: &str) -> Result<Vec<ExperimentSpec>> {
    let specs = match name {
        "fig3" => {
            let mut spec = ExperimentSpec::new("fig3", Scenario::with_antennas(6, &MIXED));
            spec.schedulers = vec![SchedulerKind::ConventionalGrouping, SchedulerKind::ExhaustiveGrouping];
            spec.criteria = vec![
                CriterionKind::LargestPrincipalAngle,
                CriterionKind::Collinearity,
                CriterionKind::Chordal,
                CriterionKind::GeometricalAngle,
                CriterionKind::GroupingOriented,
                CriterionKind::Random,
            ];
            vec![spec]
        }
        "fig4" => {
            let configs: [(&str, [usize; 6]); 3] = [
                ("fig4-1-2-3-4-4-4", [1, 2, 3, 4, 4, 4]),
                ("fig4-2-2-2-2-2-2", [2; 6]),
                ("fig4-1-2-3-4-5-6", [1, 2, 3, 4, 5, 6]),
            ];
            configs
                .iter()
                .map(|(label, antennas)| {
                    let mut spec = ExperimentSpec::new(*label, Scenario::with_antennas(12, antennas));
                    spec.schedulers = vec![SchedulerKind::ConventionalGrouping];
                    spec.criteria = vec![CriterionKind::LargestPrincipalAngle, CriterionKind::GroupingOriented];
                    spec
                })
                .collect()
        }
        "fig5" => {
            let mut spec = ExperimentSpec::new("fig5", one_or_two(20));
            spec.schedulers = vec![SchedulerKind::GreedySelection, SchedulerKind::Random];
            spec.criteria = greedy_criteria();
            vec![spec]
        }
        "fig6" => FIG6_USER_COUNTS
            .iter()
            .map(|&k| {
                let mut scenario = one_or_two(k);
                scenario.snr_db = vec![30.0];
                let mut spec = ExperimentSpec::new(format!("fig6-k{k}"), scenario);
                spec.schedulers = vec![SchedulerKind::GreedySelection];
                if k <= FIG6_EXHAUSTIVE_MAX {
                    spec.schedulers.push(SchedulerKind::ExhaustiveSelection);
                }
                spec.criteria = greedy_criteria();
                spec
            })
            .collect(),
        "fig7" | "fig8" => {
            let mut spec = ExperimentSpec::new(name, Scenario::with_antennas(6, &MIXED));
            spec.group_layout = GroupLayout::FixedSize(2);
            spec.schedulers = vec![SchedulerKind::Algorithm1GroupMin, SchedulerKind::Algorithm2DofMax];
            if name == "fig7" {
                spec.schedulers.push(SchedulerKind::ExhaustiveGrouping);
                spec.criteria = vec![CriterionKind::SelectionSimplified];
            } else {
                spec.schedulers.push(SchedulerKind::ConventionalGrouping);
                spec.criteria = vec![CriterionKind::LargestPrincipalAngle];
            }
            vec![spec]
        }
        other => {
            return Err(Error::UnknownPreset {
                name: other.to_string(),
                valid: PRESET_NAMES.join(", "),
            })
        }
    };
    Ok(specs)
}

/// Applies the common overrides to every experiment of a preset.
pub fn apply_overrides(specs: &mut [ExperimentSpec], trials: Option<usize>, seed: Option<u64>) {
    for spec in specs {
        if let Some(t) = trials {
            spec.scenario.trials = t;
        }
        if let Some(s) = seed {
            spec.scenario.seed = s;
        }
    }
}
