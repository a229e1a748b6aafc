//! Enumeration of BD-feasible partitions of a user pool.
//!
//! Users are identified by their index into `ranks`. Groups come out with
//! members ascending and groups ordered by their smallest member, so every
//! unordered partition is produced exactly once and in a fixed order.

use serde::{Deserialize, Serialize};

/// How a pool is split into groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GroupLayout {
    /// Groups of `G` users; one smaller residual group when `K mod G ≠ 0`.
    FixedSize(usize),
    /// The fewest groups for which a feasible partition exists.
    Minimal,
}

impl Default for GroupLayout {
    fn default() -> Self {
        GroupLayout::Minimal
    }
}

impl std::fmt::Display for GroupLayout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GroupLayout::FixedSize(g) => write!(f, "fixed-size-{g}"),
            GroupLayout::Minimal => f.write_str("minimal"),
        }
    }
}

pub type Partition = Vec<Vec<usize>>;

struct Search<'a> {
    ranks: &'a [usize],
    capacity: usize,
    groups: Vec<Vec<usize>>,
    loads: Vec<usize>,
    out: Vec<Partition>,
}

impl Search<'_> {
    /// `remaining.len()` is always a multiple of `size` plus `residual`.
    fn fixed(&mut self, remaining: &[usize], size: usize, residual: usize) {
        let Some((&first, rest)) = remaining.split_first() else {
            self.out.push(self.groups.clone());
            return;
        };
        let mut options = Vec::with_capacity(2);
        if remaining.len() >= size + residual {
            options.push((size, residual));
        }
        if residual > 0 {
            options.push((residual, 0));
        }
        for (block, next_residual) in options {
            let mut chosen = vec![first];
            self.choose(rest, 0, block - 1, &mut chosen, self.ranks[first], size, next_residual);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn choose(
        &mut self,
        pool: &[usize],
        start: usize,
        need: usize,
        chosen: &mut Vec<usize>,
        load: usize,
        size: usize,
        residual: usize,
    ) {
        if load > self.capacity {
            return;
        }
        if need == 0 {
            let remaining: Vec<usize> =
                pool.iter().copied().filter(|u| !chosen.contains(u)).collect();
            self.groups.push(chosen.clone());
            self.fixed(&remaining, size, residual);
            self.groups.pop();
            return;
        }
        for i in start..pool.len() {
            if pool.len() - i < need {
                break;
            }
            chosen.push(pool[i]);
            self.choose(pool, i + 1, need - 1, chosen, load + self.ranks[pool[i]], size, residual);
            chosen.pop();
        }
    }

    fn blocks(&mut self, user: usize, count: usize) {
        let n = self.ranks.len();
        if user == n {
            if self.groups.len() == count {
                self.out.push(self.groups.clone());
            }
            return;
        }
        // Not enough users left to open the missing groups.
        if n - user < count - self.groups.len() {
            return;
        }
        let r = self.ranks[user];
        for g in 0..self.groups.len() {
            if self.loads[g] + r <= self.capacity {
                self.groups[g].push(user);
                self.loads[g] += r;
                self.blocks(user + 1, count);
                self.loads[g] -= r;
                self.groups[g].pop();
            }
        }
        if self.groups.len() < count && r <= self.capacity {
            self.groups.push(vec![user]);
            self.loads.push(r);
            self.blocks(user + 1, count);
            self.loads.pop();
            self.groups.pop();
        }
    }
}

/// All partitions into groups of `size` (plus one residual group) whose
/// rank sums stay within `capacity`.
pub fn fixed_size_partitions(ranks: &[usize], capacity: usize, size: usize) -> Vec<Partition> {
    assert!(size >= 1, "group size must be >= 1");
    let mut search = Search {
        ranks,
        capacity,
        groups: Vec::new(),
        loads: Vec::new(),
        out: Vec::new(),
    };
    let all: Vec<usize> = (0..ranks.len()).collect();
    search.fixed(&all, size, ranks.len() % size);
    search.out
}

/// All feasible partitions into exactly `count` nonempty groups.
pub fn partitions_with_count(ranks: &[usize], capacity: usize, count: usize) -> Vec<Partition> {
    let mut search = Search {
        ranks,
        capacity,
        groups: Vec::new(),
        loads: Vec::new(),
        out: Vec::new(),
    };
    if count >= 1 && count <= ranks.len() {
        search.blocks(0, count);
    }
    search.out
}

/// Feasible partitions using the fewest groups.
pub fn minimal_partitions(ranks: &[usize], capacity: usize) -> Vec<Partition> {
    if ranks.is_empty() {
        return Vec::new();
    }
    let total: usize = ranks.iter().sum();
    let start = total.div_ceil(capacity.max(1)).max(1);
    for count in start..=ranks.len() {
        let found = partitions_with_count(ranks, capacity, count);
        if !found.is_empty() {
            return found;
        }
    }
    Vec::new()
}

pub fn partitions(ranks: &[usize], capacity: usize, layout: GroupLayout) -> Vec<Partition> {
    match layout {
        GroupLayout::FixedSize(g) => fixed_size_partitions(ranks, capacity, g),
        GroupLayout::Minimal => minimal_partitions(ranks, capacity),
    }
}
