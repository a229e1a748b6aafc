//! User selection and grouping algorithms.
//!
//! Every scheduler returns a [`GroupingArrangement`]. Selection schedulers
//! produce a single group; grouping schedulers assign every user to exactly
//! one group. `comparisons` counts criterion evaluations on BD-feasible
//! candidates.

pub mod partition;

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, UserChannel};
use crate::criteria::{argmax_by_score, Criterion, CriterionKind, SubsetView};
use crate::error::{Error, Result};
use crate::precoding::{group_sum_capacity, PowerPolicy};

pub use partition::{GroupLayout, Partition};

/// Largest pool the exhaustive schedulers accept by default.
pub const DEFAULT_EXHAUSTIVE_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    GreedySelection,
    #[serde(rename = "algorithm1-group-min")]
    Algorithm1GroupMin,
    #[serde(rename = "algorithm2-dof-max")]
    Algorithm2DofMax,
    ConventionalGrouping,
    ExhaustiveSelection,
    ExhaustiveGrouping,
    Random,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 7] = [
        SchedulerKind::GreedySelection,
        SchedulerKind::Algorithm1GroupMin,
        SchedulerKind::Algorithm2DofMax,
        SchedulerKind::ConventionalGrouping,
        SchedulerKind::ExhaustiveSelection,
        SchedulerKind::ExhaustiveGrouping,
        SchedulerKind::Random,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SchedulerKind::GreedySelection => "greedy-selection",
            SchedulerKind::Algorithm1GroupMin => "algorithm1-group-min",
            SchedulerKind::Algorithm2DofMax => "algorithm2-dof-max",
            SchedulerKind::ConventionalGrouping => "conventional-grouping",
            SchedulerKind::ExhaustiveSelection => "exhaustive-selection",
            SchedulerKind::ExhaustiveGrouping => "exhaustive-grouping",
            SchedulerKind::Random => "random",
        }
    }

    /// Whether the scheduler is driven by a criterion.
    pub fn uses_criterion(self) -> bool {
        matches!(
            self,
            SchedulerKind::GreedySelection
                | SchedulerKind::Algorithm1GroupMin
                | SchedulerKind::Algorithm2DofMax
                | SchedulerKind::ConventionalGrouping
        )
    }

    /// Whether the decision depends on the transmit power.
    pub fn depends_on_snr(self) -> bool {
        matches!(
            self,
            SchedulerKind::ExhaustiveSelection | SchedulerKind::ExhaustiveGrouping
        )
    }

    /// Whether the scheduler serves every user across several groups.
    pub fn is_grouping(self) -> bool {
        matches!(
            self,
            SchedulerKind::Algorithm1GroupMin
                | SchedulerKind::Algorithm2DofMax
                | SchedulerKind::ConventionalGrouping
                | SchedulerKind::ExhaustiveGrouping
        )
    }
}

impl std::fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for SchedulerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchedulerKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let valid: Vec<&str> = SchedulerKind::ALL.iter().map(|k| k.name()).collect();
                Error::Config(format!("unknown scheduler {s:?}; valid: {}", valid.join(", ")))
            })
    }
}

/// Users split into groups, by index into the realization.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct GroupingArrangement {
    pub groups: Vec<Vec<usize>>,
    pub comparisons: u64,
}

impl GroupingArrangement {
    pub fn single(group: Vec<usize>, comparisons: u64) -> Self {
        Self {
            groups: vec![group],
            comparisons,
        }
    }

    pub fn scheduled(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.groups.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    /// Every group fits the BD dimensionality constraint and no user
    /// appears twice.
    pub fn is_valid(&self, realization: &ChannelRealization) -> bool {
        let all = self.scheduled();
        let distinct = all.windows(2).all(|w| w[0] != w[1]);
        let in_range = all.iter().all(|&u| u < realization.len());
        distinct
            && in_range
            && self.groups.iter().all(|g| {
                !g.is_empty()
                    && g.iter().map(|&u| realization.user(u).rank()).sum::<usize>()
                        <= realization.transmit_antennas
            })
    }

    /// Whether every user of the realization is served exactly once.
    pub fn covers(&self, realization: &ChannelRealization) -> bool {
        self.scheduled() == (0..realization.len()).collect::<Vec<_>>()
    }
}

/// Indices ordered by Frobenius norm, largest first, ties to the lowest index.
pub fn frobenius_order(realization: &ChannelRealization) -> Vec<usize> {
    let mut order: Vec<usize> = (0..realization.len()).collect();
    order.sort_by(|&a, &b| {
        let (na, nb) = (realization.user(a).frobenius_norm(), realization.user(b).frobenius_norm());
        nb.total_cmp(&na).then(a.cmp(&b))
    });
    order
}

fn members<'a>(realization: &'a ChannelRealization, group: &[usize]) -> Vec<&'a UserChannel> {
    group.iter().map(|&u| realization.user(u)).collect()
}

fn load(realization: &ChannelRealization, group: &[usize]) -> usize {
    group.iter().map(|&u| realization.user(u).rank()).sum()
}

fn nonempty(realization: &ChannelRealization) -> Result<()> {
    if realization.is_empty() {
        Err(Error::InvalidParameter("empty user pool".into()))
    } else {
        Ok(())
    }
}

/// Adds users to `group` by criterion until no remaining candidate fits.
fn fill_group<R: Rng>(
    realization: &ChannelRealization,
    group: &mut Vec<usize>,
    pool: &mut Vec<usize>,
    criterion: &mut Criterion<R>,
    comparisons: &mut u64,
) -> Result<()> {
    let m_t = realization.transmit_antennas;
    loop {
        let view = SubsetView::new(members(realization, group), m_t)?;
        let used = load(realization, group);
        let mut scored = Vec::new();
        for (pos, &u) in pool.iter().enumerate() {
            let user = realization.user(u);
            if used + user.rank() > m_t {
                continue;
            }
            *comparisons += 1;
            scored.push((pos, criterion.goodness(user, &view)?, u));
        }
        match argmax_by_score(scored) {
            Some(pos) => group.push(pool.remove(pos)),
            None => return Ok(()),
        }
    }
}

/// Greedy selection: start from the strongest user, then add the best
/// fitting candidate until none fits.
pub fn greedy_select<R: Rng>(
    realization: &ChannelRealization,
    criterion: &mut Criterion<R>,
) -> Result<GroupingArrangement> {
    nonempty(realization)?;
    let mut pool = frobenius_order(realization);
    let mut group = vec![pool.remove(0)];
    let mut comparisons = 0;
    pool.sort_unstable();
    fill_group(realization, &mut group, &mut pool, criterion, &mut comparisons)?;
    Ok(GroupingArrangement::single(group, comparisons))
}

/// Initial group count `min(⌊Σ M_R / M_T⌋, K)`, at least one.
pub fn initial_group_count(realization: &ChannelRealization) -> usize {
    let antennas: usize = realization.users.iter().map(UserChannel::receive_antennas).sum();
    (antennas / realization.transmit_antennas.max(1))
        .min(realization.len())
        .max(1)
}

/// Group-number minimization: seed the groups with the strongest users, then
/// let each remaining user, strongest first, join the group it fits best.
/// A user that fits nowhere opens a new group.
pub fn schedule_algorithm1<R: Rng>(
    realization: &ChannelRealization,
    criterion: &mut Criterion<R>,
) -> Result<GroupingArrangement> {
    nonempty(realization)?;
    let m_t = realization.transmit_antennas;
    let order = frobenius_order(realization);
    let seeds = initial_group_count(realization);
    let mut groups: Vec<Vec<usize>> = order[..seeds].iter().map(|&u| vec![u]).collect();
    let mut views: Vec<Option<SubsetView>> = (0..seeds).map(|_| None).collect();
    let mut comparisons = 0;
    for &u in &order[seeds..] {
        let user = realization.user(u);
        let mut scored = Vec::new();
        for (g, group) in groups.iter().enumerate() {
            if load(realization, group) + user.rank() > m_t {
                continue;
            }
            if views[g].is_none() {
                views[g] = Some(SubsetView::new(members(realization, group), m_t)?);
            }
            comparisons += 1;
            let score = criterion.goodness(user, views[g].as_ref().expect("view built above"))?;
            scored.push((g, score, g));
        }
        match argmax_by_score(scored) {
            Some(g) => {
                groups[g].push(u);
                views[g] = None;
            }
            None => {
                groups.push(vec![u]);
                views.push(None);
            }
        }
    }
    Ok(GroupingArrangement {
        groups,
        comparisons,
    })
}

/// Degree-of-freedom maximization: fill one group completely before opening
/// the next.
pub fn schedule_algorithm2<R: Rng>(
    realization: &ChannelRealization,
    criterion: &mut Criterion<R>,
) -> Result<GroupingArrangement> {
    nonempty(realization)?;
    let mut pool: Vec<usize> = (0..realization.len()).collect();
    let mut groups = Vec::new();
    let mut comparisons = 0;
    while !pool.is_empty() {
        let first = *pool
            .iter()
            .min_by(|&&a, &&b| {
                let (na, nb) =
                    (realization.user(a).frobenius_norm(), realization.user(b).frobenius_norm());
                nb.total_cmp(&na).then(a.cmp(&b))
            })
            .expect("pool is nonempty");
        pool.retain(|&u| u != first);
        let mut group = vec![first];
        fill_group(realization, &mut group, &mut pool, criterion, &mut comparisons)?;
        groups.push(group);
    }
    Ok(GroupingArrangement {
        groups,
        comparisons,
    })
}

fn guard_size(realization: &ChannelRealization, limit: usize) -> Result<()> {
    if realization.len() > limit {
        return Err(Error::CombinatorialBlowUp {
            users: realization.len(),
            limit,
        });
    }
    Ok(())
}

fn feasible_partitions(
    realization: &ChannelRealization,
    layout: GroupLayout,
    limit: usize,
) -> Result<Vec<Partition>> {
    nonempty(realization)?;
    guard_size(realization, limit)?;
    if let GroupLayout::FixedSize(0) = layout {
        return Err(Error::InvalidParameter("group size must be >= 1".into()));
    }
    let ranks: Vec<usize> = realization.users.iter().map(UserChannel::rank).collect();
    let found = partition::partitions(&ranks, realization.transmit_antennas, layout);
    if found.is_empty() {
        return Err(Error::NoFeasibleArrangement {
            users: realization.len(),
        });
    }
    Ok(found)
}

fn group_key(group: &[usize]) -> u64 {
    group.iter().fold(0u64, |m, &u| m | (1 << u))
}

/// Conventional grouping: over every feasible partition, score each group by
/// its worst member against the rest of the group, score the partition by
/// its worst group, and keep the best partition. With the random criterion a
/// feasible partition is drawn uniformly instead.
pub fn schedule_conventional<R: Rng>(
    realization: &ChannelRealization,
    layout: GroupLayout,
    criterion: &mut Criterion<R>,
    limit: usize,
    rng: &mut impl Rng,
) -> Result<GroupingArrangement> {
    let candidates = feasible_partitions(realization, layout, limit)?;
    if criterion.kind() == CriterionKind::Random {
        let pick = rng.random_range(0..candidates.len());
        return Ok(GroupingArrangement {
            groups: candidates[pick].clone(),
            comparisons: 0,
        });
    }
    let m_t = realization.transmit_antennas;
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut comparisons = 0;
    let mut best: Option<(usize, f64)> = None;
    for (index, part) in candidates.iter().enumerate() {
        let mut worst = f64::INFINITY;
        for group in part {
            let key = group_key(group);
            let score = match cache.get(&key) {
                Some(&s) => s,
                None => {
                    let mut s = f64::INFINITY;
                    for (i, &u) in group.iter().enumerate() {
                        let rest: Vec<usize> =
                            group.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).collect();
                        let view = SubsetView::new(members(realization, &rest), m_t)?;
                        comparisons += 1;
                        s = s.min(criterion.goodness(realization.user(u), &view)?);
                    }
                    cache.insert(key, s);
                    s
                }
            };
            worst = worst.min(score);
        }
        if best.is_none_or(|(_, b)| worst > b) {
            best = Some((index, worst));
        }
    }
    let (index, _) = best.expect("at least one partition");
    Ok(GroupingArrangement {
        groups: candidates[index].clone(),
        comparisons,
    })
}

/// Power and noise settings for capacity-driven schedulers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacitySettings {
    pub policy: PowerPolicy,
    pub transmit_power: f64,
    pub noise_variance: f64,
}

impl CapacitySettings {
    pub fn group_capacity(&self, realization: &ChannelRealization, group: &[usize]) -> Result<f64> {
        group_sum_capacity(
            &members(realization, group),
            realization.transmit_antennas,
            self.policy,
            self.transmit_power,
            self.noise_variance,
        )
    }
}

/// How the capacities of several groups combine into one figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Aggregate {
    /// Mean sum rate per group (per time slot).
    #[default]
    PerGroupAverage,
    /// Sum over all groups of the scheduling period.
    PeriodTotal,
}

impl Aggregate {
    pub fn combine(self, capacities: &[f64]) -> f64 {
        let total: f64 = capacities.iter().sum();
        match self {
            Aggregate::PerGroupAverage if !capacities.is_empty() => total / capacities.len() as f64,
            _ => total,
        }
    }
}

/// The feasible subset with the largest sum capacity.
pub fn exhaustive_select(
    realization: &ChannelRealization,
    settings: &CapacitySettings,
    limit: usize,
) -> Result<GroupingArrangement> {
    nonempty(realization)?;
    guard_size(realization, limit)?;
    let k = realization.len();
    let m_t = realization.transmit_antennas;
    let mut best: Option<(Vec<usize>, f64)> = None;
    for mask in 1u64..(1 << k) {
        let group: Vec<usize> = (0..k).filter(|&u| mask >> u & 1 == 1).collect();
        if load(realization, &group) > m_t {
            continue;
        }
        let c = settings.group_capacity(realization, &group)?;
        if best.as_ref().is_none_or(|(_, b)| c > *b) {
            best = Some((group, c));
        }
    }
    let (group, _) = best.expect("every single user is feasible");
    Ok(GroupingArrangement::single(group, 0))
}

/// The feasible partition with the largest aggregate capacity.
pub fn exhaustive_grouping(
    realization: &ChannelRealization,
    layout: GroupLayout,
    settings: &CapacitySettings,
    aggregate: Aggregate,
    limit: usize,
) -> Result<GroupingArrangement> {
    let candidates = feasible_partitions(realization, layout, limit)?;
    let mut cache: HashMap<u64, f64> = HashMap::new();
    let mut best: Option<(usize, f64)> = None;
    for (index, part) in candidates.iter().enumerate() {
        let mut caps = Vec::with_capacity(part.len());
        for group in part {
            let key = group_key(group);
            let c = match cache.get(&key) {
                Some(&c) => c,
                None => {
                    let c = settings.group_capacity(realization, group)?;
                    cache.insert(key, c);
                    c
                }
            };
            caps.push(c);
        }
        let value = aggregate.combine(&caps);
        if best.is_none_or(|(_, b)| value > b) {
            best = Some((index, value));
        }
    }
    let (index, _) = best.expect("at least one partition");
    Ok(GroupingArrangement {
        groups: candidates[index].clone(),
        comparisons: 0,
    })
}

/// Random feasible fill: visit users in random order, keep each that fits.
pub fn random_schedule(
    realization: &ChannelRealization,
    rng: &mut impl Rng,
) -> Result<GroupingArrangement> {
    nonempty(realization)?;
    let m_t = realization.transmit_antennas;
    let mut order: Vec<usize> = (0..realization.len()).collect();
    order.shuffle(rng);
    let mut group = Vec::new();
    let mut used = 0;
    for u in order {
        let r = realization.user(u).rank();
        if used + r <= m_t {
            group.push(u);
            used += r;
        }
    }
    group.sort_unstable();
    Ok(GroupingArrangement::single(group, 0))
}

/// Everything a scheduler run may need beyond the realization.
#[derive(Debug, Clone, Copy)]
pub struct ScheduleOptions {
    pub layout: GroupLayout,
    pub exhaustive_limit: usize,
    pub aggregate: Aggregate,
    pub capacity: CapacitySettings,
}

/// Runs `kind` with `criterion` (ignored by criterion-free schedulers).
pub fn run_scheduler<R: Rng>(
    kind: SchedulerKind,
    realization: &ChannelRealization,
    criterion: &mut Criterion<R>,
    options: &ScheduleOptions,
    rng: &mut impl Rng,
) -> Result<GroupingArrangement> {
    match kind {
        SchedulerKind::GreedySelection => greedy_select(realization, criterion),
        SchedulerKind::Algorithm1GroupMin => schedule_algorithm1(realization, criterion),
        SchedulerKind::Algorithm2DofMax => schedule_algorithm2(realization, criterion),
        SchedulerKind::ConventionalGrouping => schedule_conventional(
            realization,
            options.layout,
            criterion,
            options.exhaustive_limit,
            rng,
        ),
        SchedulerKind::ExhaustiveSelection => {
            exhaustive_select(realization, &options.capacity, options.exhaustive_limit)
        }
        SchedulerKind::ExhaustiveGrouping => exhaustive_grouping(
            realization,
            options.layout,
            &options.capacity,
            options.aggregate,
            options.exhaustive_limit,
        ),
        SchedulerKind::Random => random_schedule(realization, rng),
    }
}
