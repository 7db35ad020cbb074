//! Polling schedules: evaluation, whole-population statistics and search.
//!
//! The cost of a schedule is the sum over nodes of the budget each node
//! gets when conditioned on every node polled before it. The first node
//! always sends all `n` bits.
//!
//! Under the min rule a schedule's cost is `n` plus the weight of the
//! spanning tree formed by each node's cheapest edge back into its prefix,
//! so the optimum is `n` plus the minimum spanning tree weight of the
//! complete graph weighted by pairwise budgets. A Prim order attains it,
//! which is what [`Strategy::GreedyPrim`] builds.
//!
//! "Average" cost means the mean over uniformly random schedules.
//!
//! Parallel work is split into fixed units (schedule prefixes, or fixed
//! blocks of sample indices) and merged in unit order, so results never
//! depend on the worker count.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::correlation::{BitBudget, ConditioningRule, CostTable, ModelSpec};
use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// Largest node count accepted by exhaustive enumeration (10! schedules).
pub const EXHAUSTIVE_LIMIT: usize = 10;

/// Random permutations per parallel work unit.
const SAMPLE_BLOCK: u64 = 1024;

/// A polling order: position `k` holds the `k`-th node polled.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule(Vec<NodeId>);

impl Schedule {
    /// Validates that `order` is a permutation of `0..node_count`.
    pub fn new(order: Vec<NodeId>, node_count: usize) -> Result<Self> {
        if order.len() != node_count {
            return Err(Error::MalformedSchedule(format!(
                "expected {node_count} nodes, got {}",
                order.len()
            )));
        }
        let mut seen = vec![false; node_count];
        for &id in &order {
            match seen.get_mut(id) {
                None => {
                    return Err(Error::MalformedSchedule(format!(
                        "node {id} out of range for {node_count} nodes"
                    )))
                }
                Some(true) => {
                    return Err(Error::MalformedSchedule(format!("node {id} appears twice")))
                }
                Some(s) => *s = true,
            }
        }
        Ok(Self(order))
    }

    pub fn identity(node_count: usize) -> Self {
        Self((0..node_count).collect())
    }

    pub fn order(&self) -> &[NodeId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `k`-th uniformly random permutation of the stream keyed by `seed`.
    ///
    /// Each index draws from its own ChaCha8 stream and is shuffled with
    /// Fisher-Yates, so sample `k` is the same regardless of how samples
    /// are distributed across workers.
    pub fn random(node_count: usize, seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        let mut order: Vec<NodeId> = (0..node_count).collect();
        order.shuffle(&mut rng);
        Self(order)
    }
}

impl fmt::Display for Schedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, id) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{id}")?;
        }
        Ok(())
    }
}

/// Per-node budgets of one schedule evaluation, in polling order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitReport {
    pub per_node: Vec<(NodeId, BitBudget)>,
    pub total: u64,
}

impl BitReport {
    fn from_budgets(per_node: Vec<(NodeId, BitBudget)>) -> Self {
        let total = per_node.iter().map(|(_, b)| b.0 as u64).sum();
        Self { per_node, total }
    }

    /// Node paying the most bits (earliest in polling order on ties).
    pub fn worst_node(&self) -> Option<(NodeId, BitBudget)> {
        self.per_node
            .iter()
            .copied()
            .reduce(|a, b| if b.1 > a.1 { b } else { a })
    }
}

/// Computes every node's budget along `schedule`.
pub fn evaluate(
    model: &ModelSpec,
    rule: ConditioningRule,
    topology: &Topology,
    schedule: &Schedule,
) -> Result<BitReport> {
    let table = CostTable::new(*model, rule, topology)?;
    evaluate_with(&table, schedule.order())
}

pub(crate) fn evaluate_with(table: &CostTable, order: &[NodeId]) -> Result<BitReport> {
    Schedule::new(order.to_vec(), table.len())?;
    let mut agg = vec![table.empty(); table.len()];
    let mut per_node = Vec::with_capacity(order.len());
    for (k, &v) in order.iter().enumerate() {
        per_node.push((v, BitBudget(table.budget(agg[v], k))));
        for &u in &order[k + 1..] {
            agg[u] = table.extend(agg[u], u, v);
        }
    }
    Ok(BitReport::from_budgets(per_node))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsMode {
    /// All `N!` schedules; requires `N <= EXHAUSTIVE_LIMIT`.
    Exhaustive,
    /// `count` random schedules drawn from the seeded stream.
    Sampled { count: u64, seed: u64 },
}

/// Summary of schedule totals over a population of schedules.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleStats {
    pub mean_total: f64,
    pub min_total: u64,
    pub max_total: u64,
    pub argmin: Schedule,
    pub argmax: Schedule,
    pub sample_count: u64,
    pub exhaustive: bool,
}

pub fn schedule_stats(
    model: &ModelSpec,
    rule: ConditioningRule,
    topology: &Topology,
    mode: StatsMode,
) -> Result<ScheduleStats> {
    let table = CostTable::new(*model, rule, topology)?;
    let summary = match mode {
        StatsMode::Exhaustive => {
            check_exhaustive(topology.len())?;
            enumerate(&table)
        }
        StatsMode::Sampled { count, seed } => {
            if count == 0 {
                return Err(Error::InvalidParameter("sample count must be positive".into()));
            }
            sample(&table, count, seed)
        }
    };
    Ok(ScheduleStats {
        mean_total: summary.sum as f64 / summary.count as f64,
        min_total: summary.min.0,
        max_total: summary.max.0,
        argmin: Schedule(summary.min.1),
        argmax: Schedule(summary.max.1),
        sample_count: summary.count,
        exhaustive: matches!(mode, StatsMode::Exhaustive),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    Minimize,
    Maximize,
}

impl FromStr for Objective {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" | "minimize" => Ok(Self::Minimize),
            "max" | "maximize" => Ok(Self::Maximize),
            other => Err(Error::InvalidParameter(format!("unknown objective `{other}`"))),
        }
    }
}

impl fmt::Display for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Minimize => "minimize",
            Self::Maximize => "maximize",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strategy {
    /// Exhaustive search; the first optimum in lexicographic order wins.
    BruteForce,
    /// Prim-order construction from every start node. Only exact for the
    /// min rule with [`Objective::Minimize`]; `force` runs it as a
    /// heuristic for other combinations.
    GreedyPrim { force: bool },
    /// Best of `count` seeded random schedules.
    RandomRestart { count: u64, seed: u64 },
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::BruteForce => f.write_str("brute_force"),
            Self::GreedyPrim { .. } => f.write_str("greedy_prim"),
            Self::RandomRestart { count, seed } => {
                write!(f, "random_restart(count={count},seed={seed})")
            }
        }
    }
}

pub fn optimize(
    model: &ModelSpec,
    rule: ConditioningRule,
    topology: &Topology,
    objective: Objective,
    strategy: Strategy,
) -> Result<(Schedule, BitReport)> {
    let table = CostTable::new(*model, rule, topology)?;
    let order = match strategy {
        Strategy::BruteForce => {
            check_exhaustive(topology.len())?;
            let s = enumerate(&table);
            match objective {
                Objective::Minimize => s.min.1,
                Objective::Maximize => s.max.1,
            }
        }
        Strategy::GreedyPrim { force } => {
            if !force && (rule != ConditioningRule::Min || objective != Objective::Minimize) {
                return Err(Error::InvalidCombination(format!(
                    "greedy_prim is only exact for the min rule when minimizing \
                     (got rule={rule}, objective={objective}); force it to run as a heuristic"
                )));
            }
            greedy_prim(&table, objective)
        }
        Strategy::RandomRestart { count, seed } => {
            if count == 0 {
                return Err(Error::InvalidParameter("restart count must be positive".into()));
            }
            let s = sample(&table, count, seed);
            match objective {
                Objective::Minimize => s.min.1,
                Objective::Maximize => s.max.1,
            }
        }
    };
    let report = evaluate_with(&table, &order)?;
    Ok((Schedule(order), report))
}

fn check_exhaustive(count: usize) -> Result<()> {
    if count > EXHAUSTIVE_LIMIT {
        Err(Error::TooManyNodes {
            count,
            limit: EXHAUSTIVE_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Running totals over a population of schedules. Ties keep the schedule
/// seen first.
#[derive(Debug, Clone)]
struct Summary {
    sum: u128,
    count: u64,
    min: (u64, Vec<NodeId>),
    max: (u64, Vec<NodeId>),
}

impl Summary {
    fn empty() -> Self {
        Self {
            sum: 0,
            count: 0,
            min: (u64::MAX, Vec::new()),
            max: (0, Vec::new()),
        }
    }

    fn record(&mut self, total: u64, order: &[NodeId]) {
        self.sum += total as u128;
        self.count += 1;
        if total < self.min.0 || self.min.1.is_empty() {
            self.min = (total, order.to_vec());
        }
        if total > self.max.0 || self.max.1.is_empty() {
            self.max = (total, order.to_vec());
        }
    }

    /// Appends `later`, which covers schedules ordered after `self`'s.
    fn merge(mut self, later: Summary) -> Self {
        if later.count == 0 {
            return self;
        }
        if self.count == 0 {
            return later;
        }
        self.sum += later.sum;
        self.count += later.count;
        if later.min.0 < self.min.0 {
            self.min = later.min;
        }
        if later.max.0 > self.max.0 {
            self.max = later.max;
        }
        self
    }
}

/// Depth-first enumeration of all schedules in lexicographic order,
/// parallelised over fixed-length prefixes.
fn enumerate(table: &CostTable) -> Summary {
    let size = table.len();
    let prefix_len = size.min(2);
    let prefixes: Vec<Vec<NodeId>> = if prefix_len == 2 {
        (0..size)
            .flat_map(|a| (0..size).filter(move |&b| b != a).map(move |b| vec![a, b]))
            .collect()
    } else {
        (0..size).map(|a| vec![a]).collect()
    };

    let partials: Vec<Summary> = prefixes
        .par_iter()
        .map(|prefix| {
            let mut walker = Walker::new(table);
            for &v in prefix {
                walker.push(v);
            }
            let mut summary = Summary::empty();
            walker.descend(&mut summary);
            summary
        })
        .collect();

    partials.into_iter().fold(Summary::empty(), Summary::merge)
}

/// Incremental DFS state: one aggregate vector per depth.
struct Walker<'a> {
    table: &'a CostTable,
    order: Vec<NodeId>,
    used: Vec<bool>,
    aggs: Vec<Vec<f64>>,
    partial: Vec<u64>,
}

impl<'a> Walker<'a> {
    fn new(table: &'a CostTable) -> Self {
        let size = table.len();
        Self {
            table,
            order: Vec::with_capacity(size),
            used: vec![false; size],
            aggs: vec![vec![table.empty(); size]],
            partial: vec![0],
        }
    }

    fn push(&mut self, v: NodeId) {
        let depth = self.order.len();
        let current = &self.aggs[depth];
        let cost = self.table.budget(current[v], depth) as u64;
        let next: Vec<f64> = current
            .iter()
            .enumerate()
            .map(|(u, &a)| {
                if self.used[u] || u == v {
                    a
                } else {
                    self.table.extend(a, u, v)
                }
            })
            .collect();
        let total = self.partial[depth] + cost;
        self.aggs.push(next);
        self.partial.push(total);
        self.order.push(v);
        self.used[v] = true;
    }

    fn pop(&mut self) {
        let v = self.order.pop().expect("pop on empty walker");
        self.used[v] = false;
        self.aggs.pop();
        self.partial.pop();
    }

    fn descend(&mut self, summary: &mut Summary) {
        let size = self.table.len();
        if self.order.len() == size {
            summary.record(self.partial[size], &self.order);
            return;
        }
        for v in 0..size {
            if !self.used[v] {
                self.push(v);
                self.descend(summary);
                self.pop();
            }
        }
    }
}

fn sample(table: &CostTable, count: u64, seed: u64) -> Summary {
    let blocks = count.div_ceil(SAMPLE_BLOCK);
    let partials: Vec<Summary> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut summary = Summary::empty();
            let end = ((b + 1) * SAMPLE_BLOCK).min(count);
            for index in b * SAMPLE_BLOCK..end {
                let s = Schedule::random(table.len(), seed, index);
                let total = evaluate_with(table, &s.0).expect("valid permutation").total;
                summary.record(total, &s.0);
            }
            summary
        })
        .collect();
    partials.into_iter().fold(Summary::empty(), Summary::merge)
}

/// Prim-order construction from each start; lowest start id and lowest
/// attaching node id win ties.
fn greedy_prim(table: &CostTable, objective: Objective) -> Vec<NodeId> {
    let size = table.len();
    let better = |a: u64, b: u64| match objective {
        Objective::Minimize => a < b,
        Objective::Maximize => a > b,
    };
    let mut best: Option<(u64, Vec<NodeId>)> = None;
    for start in 0..size {
        let mut agg = vec![table.empty(); size];
        let mut used = vec![false; size];
        let mut order = Vec::with_capacity(size);
        let mut total = 0u64;
        let mut next = Some(start);
        while let Some(v) = next {
            total += table.budget(agg[v], order.len()) as u64;
            used[v] = true;
            order.push(v);
            for u in 0..size {
                if !used[u] {
                    agg[u] = table.extend(agg[u], u, v);
                }
            }
            next = None;
            let mut pick_cost = 0u64;
            for u in (0..size).filter(|&u| !used[u]) {
                let c = table.budget(agg[u], order.len()) as u64;
                if next.is_none() || better(c, pick_cost) {
                    next = Some(u);
                    pick_cost = c;
                }
            }
        }
        if best.as_ref().is_none_or(|(t, _)| better(total, *t)) {
            best = Some((total, order));
        }
    }
    best.map(|(_, o)| o).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collinear() -> Topology {
        Topology::from_records([(0, 0.0, 0.0), (1, 1.0, 0.0), (2, 2.0, 0.0)]).unwrap()
    }

    fn m1() -> ModelSpec {
        ModelSpec::power_law(5, 1.0, 1.0).unwrap()
    }

    fn budgets(r: &BitReport) -> Vec<u32> {
        r.per_node.iter().map(|(_, b)| b.0).collect()
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedule::new(vec![0, 1, 2], 3).is_ok());
        assert!(Schedule::new(vec![0, 0, 2], 3).is_err());
        assert!(Schedule::new(vec![0, 1], 3).is_err());
        assert!(Schedule::new(vec![0, 1, 3], 3).is_err());
    }

    #[test]
    fn collinear_schedule_dependence() {
        let t = collinear();
        let a = evaluate(&m1(), ConditioningRule::Min, &t, &Schedule::new(vec![0, 1, 2], 3).unwrap())
            .unwrap();
        assert_eq!(budgets(&a), vec![5, 1, 1]);
        assert_eq!(a.total, 7);
        let b = evaluate(&m1(), ConditioningRule::Min, &t, &Schedule::new(vec![0, 2, 1], 3).unwrap())
            .unwrap();
        assert_eq!(budgets(&b), vec![5, 2, 1]);
        assert_eq!(b.total, 8);
        assert_eq!(b.worst_node(), Some((0, BitBudget(5))));
    }

    #[test]
    fn two_nodes_any_order() {
        let t = Topology::from_records([(0, 0.0, 0.0), (1, 1.2, 0.0)]).unwrap();
        for order in [vec![0, 1], vec![1, 0]] {
            let r = evaluate(&m1(), ConditioningRule::Min, &t, &Schedule::new(order, 2).unwrap())
                .unwrap();
            assert_eq!(r.total, 7);
        }
        let s = schedule_stats(&m1(), ConditioningRule::Min, &t, StatsMode::Exhaustive).unwrap();
        assert_eq!(s.min_total, s.max_total);
        assert_eq!(s.mean_total, 7.0);
        assert_eq!(s.sample_count, 2);
    }

    #[test]
    fn single_node() {
        let t = Topology::from_records([(0, 0.0, 0.0)]).unwrap();
        let m = ModelSpec::gaussian(7, 1.0, 1.0).unwrap();
        for rule in [ConditioningRule::Min, ConditioningRule::Max, ConditioningRule::Additive] {
            let r = evaluate(&m, rule, &t, &Schedule::identity(1)).unwrap();
            assert_eq!(r.total, 7);
            let (s, r) = optimize(&m, rule, &t, Objective::Minimize, Strategy::BruteForce).unwrap();
            assert_eq!(s.order(), &[0]);
            assert_eq!(r.total, 7);
        }
    }

    #[test]
    fn exhaustive_stats_collinear() {
        let s = schedule_stats(&m1(), ConditioningRule::Min, &collinear(), StatsMode::Exhaustive)
            .unwrap();
        assert_eq!((s.min_total, s.max_total), (7, 8));
        assert_eq!(s.sample_count, 6);
        assert!(s.exhaustive);
        assert_eq!(s.argmin.order(), &[0, 1, 2]);
        assert_eq!(s.argmax.order(), &[0, 2, 1]);
        // orders 012, 210, 102, 120 cost 7; 021, 201 cost 8
        assert!((s.mean_total - 44.0 / 6.0).abs() < 1e-12);
    }

    #[test]
    fn exhaustive_limit() {
        let recs: Vec<_> = (0..11).map(|i| (i, i as f64, 0.0)).collect();
        let t = Topology::from_records(recs).unwrap();
        assert!(matches!(
            schedule_stats(&m1(), ConditioningRule::Min, &t, StatsMode::Exhaustive),
            Err(Error::TooManyNodes { count: 11, limit: 10 })
        ));
        assert!(matches!(
            optimize(&m1(), ConditioningRule::Min, &t, Objective::Minimize, Strategy::BruteForce),
            Err(Error::TooManyNodes { .. })
        ));
    }

    #[test]
    fn sampled_is_deterministic() {
        let t = collinear();
        let mode = StatsMode::Sampled { count: 1000, seed: 42 };
        let a = schedule_stats(&m1(), ConditioningRule::Min, &t, mode).unwrap();
        let b = schedule_stats(&m1(), ConditioningRule::Min, &t, mode).unwrap();
        assert_eq!(a, b);
        assert!(!a.exhaustive);
        assert_eq!(a.sample_count, 1000);
        assert!(a.min_total as f64 <= a.mean_total && a.mean_total <= a.max_total as f64);
        assert!(schedule_stats(
            &m1(),
            ConditioningRule::Min,
            &t,
            StatsMode::Sampled { count: 0, seed: 1 }
        )
        .is_err());
    }

    #[test]
    fn random_schedules_are_permutations() {
        for index in 0..50 {
            let s = Schedule::random(9, 3, index);
            assert!(Schedule::new(s.order().to_vec(), 9).is_ok());
        }
        assert_eq!(Schedule::random(9, 3, 4), Schedule::random(9, 3, 4));
        assert_ne!(Schedule::random(9, 3, 4), Schedule::random(9, 3, 5));
    }

    #[test]
    fn greedy_guard() {
        let t = collinear();
        let m2 = ModelSpec::gaussian(5, 1.0, 1.0).unwrap();
        let err = optimize(
            &m2,
            ConditioningRule::Max,
            &t,
            Objective::Minimize,
            Strategy::GreedyPrim { force: false },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidCombination(_)));
        let err = optimize(
            &m1(),
            ConditioningRule::Min,
            &t,
            Objective::Maximize,
            Strategy::GreedyPrim { force: false },
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidCombination(_)));
        let (s, r) = optimize(
            &m2,
            ConditioningRule::Additive,
            &t,
            Objective::Minimize,
            Strategy::GreedyPrim { force: true },
        )
        .unwrap();
        assert_eq!(s.len(), 3);
        assert!(r.total >= 5);
    }

    #[test]
    fn greedy_collinear() {
        let (s, r) = optimize(
            &m1(),
            ConditioningRule::Min,
            &collinear(),
            Objective::Minimize,
            Strategy::GreedyPrim { force: false },
        )
        .unwrap();
        assert_eq!(s.order(), &[0, 1, 2]);
        assert_eq!(r.total, 7);
    }

    #[test]
    fn random_restart_finds_collinear_optimum() {
        let (_, r) = optimize(
            &m1(),
            ConditioningRule::Min,
            &collinear(),
            Objective::Minimize,
            Strategy::RandomRestart { count: 64, seed: 9 },
        )
        .unwrap();
        assert_eq!(r.total, 7);
        let (_, r) = optimize(
            &m1(),
            ConditioningRule::Min,
            &collinear(),
            Objective::Maximize,
            Strategy::RandomRestart { count: 64, seed: 9 },
        )
        .unwrap();
        assert_eq!(r.total, 8);
    }
}
