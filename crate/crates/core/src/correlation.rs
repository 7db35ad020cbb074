//! Distance-driven bit budgets.
//!
//! Two pairwise models map an inter-node distance `d` to the number of bits
//! a node must send once a neighbour's reading is known:
//!
//! * [`Variant::PowerLaw`]: `alpha * ceil(d^beta)`, saturating at `n`.
//! * [`Variant::Gaussian`]: `ceil(n * (1 - alpha * exp(-beta * d^2)))`.
//!
//! A node conditioned on several already-transmitted nodes uses one of the
//! [`ConditioningRule`]s. Every budget is clamped to `[0, n]` and rounded up
//! to whole bits.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::topology::{NodeId, Topology};

/// Largest supported reading width. Readings are carried in a `u64`.
pub const MAX_WIDTH: u32 = 63;

/// Values this close to an integer are snapped onto it before the ceiling.
pub const CEIL_SNAP: f64 = 1e-9;

/// Number of bits a node transmits; always within `[0, n]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BitBudget(pub u32);

impl BitBudget {
    pub fn bits(self) -> u32 {
        self.0
    }
}

impl fmt::Display for BitBudget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Pairwise correlation model and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// Staircase model, `alpha * ceil(d^beta)` capped at `n`.
    PowerLaw { alpha: f64, beta: f64 },
    /// Exponential model, `ceil(n * (1 - alpha * exp(-beta d^2)))`.
    Gaussian { alpha: f64, beta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    n: u32,
    variant: Variant,
}

impl ModelSpec {
    pub fn new(n: u32, variant: Variant) -> Result<Self> {
        if n == 0 || n > MAX_WIDTH {
            return Err(Error::InvalidParameter(format!(
                "n must be in 1..={MAX_WIDTH}, got {n}"
            )));
        }
        let (alpha, beta, a_name, b_name) = match variant {
            Variant::PowerLaw { alpha, beta } => (alpha, beta, "alpha1", "beta1"),
            Variant::Gaussian { alpha, beta } => (alpha, beta, "alpha2", "beta2"),
        };
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "{a_name} must be positive, got {alpha}"
            )));
        }
        if !beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "{b_name} must be finite, got {beta}"
            )));
        }
        Ok(Self { n, variant })
    }

    pub fn power_law(n: u32, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(n, Variant::PowerLaw { alpha, beta })
    }

    pub fn gaussian(n: u32, alpha: f64, beta: f64) -> Result<Self> {
        Self::new(n, Variant::Gaussian { alpha, beta })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Budget of a node whose single conditioning neighbour is `d` away.
    pub fn pairwise_bits(&self, d: f64) -> Result<BitBudget> {
        if !d.is_finite() || d < 0.0 {
            return Err(Error::Domain(format!(
                "distance must be finite and non-negative, got {d}"
            )));
        }
        let n = self.n as f64;
        let raw = match self.variant {
            Variant::PowerLaw { alpha, beta } => {
                if d == 0.0 && beta < 0.0 {
                    return Err(Error::Domain(format!(
                        "0^{beta} is singular for a negative exponent"
                    )));
                }
                let steps = snap_ceil(d.powf(beta));
                snap_ceil(alpha * steps)
            }
            Variant::Gaussian { alpha, beta } => {
                snap_ceil(n * (1.0 - alpha * gaussian_term(beta, d)))
            }
        };
        Ok(self.clamp(raw))
    }

    /// Budget of node `i` given that every node in `prior` has transmitted.
    ///
    /// An empty `prior` yields the full width `n`. Additive sums are taken
    /// in slice order.
    pub fn conditioned_bits(
        &self,
        rule: ConditioningRule,
        topology: &Topology,
        i: NodeId,
        prior: &[NodeId],
    ) -> Result<BitBudget> {
        self.check_rule(rule)?;
        topology.check(i)?;
        for &j in prior {
            topology.check(j)?;
            if j == i {
                return Err(Error::NodeInPrior(i));
            }
        }
        if prior.is_empty() {
            return Ok(BitBudget(self.n));
        }
        match rule {
            ConditioningRule::Min | ConditioningRule::Max => {
                let mut budgets = prior
                    .iter()
                    .map(|&j| self.pairwise_bits(topology.dist(i, j)));
                let first = budgets.next().expect("non-empty prior")?;
                budgets.try_fold(first, |acc, b| {
                    let b = b?;
                    Ok(if rule == ConditioningRule::Min {
                        acc.min(b)
                    } else {
                        acc.max(b)
                    })
                })
            }
            ConditioningRule::Additive => {
                let Variant::Gaussian { beta, .. } = self.variant else {
                    unreachable!("checked by check_rule")
                };
                let sum = prior
                    .iter()
                    .fold(0.0, |acc, &j| acc + gaussian_term(beta, topology.dist(i, j)));
                Ok(self.additive_budget(sum))
            }
        }
    }

    /// Rejects rule/model pairs that have no defined meaning.
    pub fn check_rule(&self, rule: ConditioningRule) -> Result<()> {
        match (rule, self.variant) {
            (ConditioningRule::Additive, Variant::PowerLaw { .. }) => {
                Err(Error::InvalidCombination(
                    "the additive rule requires the Gaussian (model 2) parameters".into(),
                ))
            }
            _ => Ok(()),
        }
    }

    fn additive_budget(&self, term_sum: f64) -> BitBudget {
        let Variant::Gaussian { alpha, .. } = self.variant else {
            unreachable!("additive rule only pairs with the Gaussian model")
        };
        let n = self.n as f64;
        self.clamp(snap_ceil(n * (1.0 - alpha * term_sum)))
    }

    fn clamp(&self, raw: f64) -> BitBudget {
        if raw.is_nan() || raw <= 0.0 {
            BitBudget(0)
        } else if raw >= self.n as f64 {
            BitBudget(self.n)
        } else {
            BitBudget(raw as u32)
        }
    }

    /// N x N matrix of pairwise budgets. The diagonal is reported as 0.
    pub fn budget_matrix(&self, topology: &Topology) -> Result<Vec<Vec<BitBudget>>> {
        let n = topology.len();
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            Ok(BitBudget(0))
                        } else {
                            self.pairwise_bits(topology.dist(i, j))
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.variant {
            Variant::PowerLaw { alpha, beta } => {
                write!(f, "model=1 n={} alpha={alpha} beta={beta}", self.n)
            }
            Variant::Gaussian { alpha, beta } => {
                write!(f, "model=2 n={} alpha={alpha} beta={beta}", self.n)
            }
        }
    }
}

#[inline]
fn gaussian_term(beta: f64, d: f64) -> f64 {
    (-beta * d * d).exp()
}

/// Ceiling that first snaps values within [`CEIL_SNAP`] of an integer onto
/// that integer, so `3.0000000000000004` and `2.9999999999` both give 3.
pub fn snap_ceil(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() <= CEIL_SNAP {
        r
    } else {
        x.ceil()
    }
}

/// How a node's budget is derived from several already-transmitted nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditioningRule {
    /// Nearest prior node decides: minimum pairwise budget.
    Min,
    /// Farthest prior node decides: maximum pairwise budget.
    Max,
    /// Sum of Gaussian correlation terms over all prior nodes.
    Additive,
}

impl fmt::Display for ConditioningRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Min => "min",
            Self::Max => "max",
            Self::Additive => "additive",
        })
    }
}

impl FromStr for ConditioningRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "min" => Ok(Self::Min),
            "max" => Ok(Self::Max),
            "additive" | "sum" => Ok(Self::Additive),
            other => Err(Error::InvalidParameter(format!(
                "unknown rule `{other}` (expected min, max or additive)"
            ))),
        }
    }
}

/// Precomputed per-pair quantities for incremental evaluation along a
/// schedule. Each node carries an aggregate over the prior set that is
/// updated as nodes are appended.
#[derive(Debug, Clone)]
pub(crate) struct CostTable {
    model: ModelSpec,
    rule: ConditioningRule,
    size: usize,
    /// Pairwise budgets (Min/Max) or Gaussian terms (Additive).
    pair: Vec<f64>,
}

impl CostTable {
    pub(crate) fn new(model: ModelSpec, rule: ConditioningRule, topology: &Topology) -> Result<Self> {
        model.check_rule(rule)?;
        let size = topology.len();
        let mut pair = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                if i == j {
                    continue;
                }
                let d = topology.dist(i, j);
                pair[i * size + j] = match rule {
                    ConditioningRule::Min | ConditioningRule::Max => {
                        model.pairwise_bits(d)?.0 as f64
                    }
                    ConditioningRule::Additive => {
                        let Variant::Gaussian { beta, .. } = model.variant else {
                            unreachable!()
                        };
                        gaussian_term(beta, d)
                    }
                };
            }
        }
        Ok(Self {
            model,
            rule,
            size,
            pair,
        })
    }

    pub(crate) fn len(&self) -> usize {
        self.size
    }

    /// Aggregate for a node with an empty prior set.
    pub(crate) fn empty(&self) -> f64 {
        match self.rule {
            ConditioningRule::Min => f64::INFINITY,
            ConditioningRule::Max => f64::NEG_INFINITY,
            ConditioningRule::Additive => 0.0,
        }
    }

    /// Folds node `j` into the prior-set aggregate of node `i`.
    #[inline]
    pub(crate) fn extend(&self, agg: f64, i: NodeId, j: NodeId) -> f64 {
        let v = self.pair[i * self.size + j];
        match self.rule {
            ConditioningRule::Min => agg.min(v),
            ConditioningRule::Max => agg.max(v),
            ConditioningRule::Additive => agg + v,
        }
    }

    /// Budget for an aggregate over a prior set of `prior_len` nodes.
    #[inline]
    pub(crate) fn budget(&self, agg: f64, prior_len: usize) -> u32 {
        if prior_len == 0 {
            return self.model.n;
        }
        match self.rule {
            ConditioningRule::Min | ConditioningRule::Max => agg as u32,
            ConditioningRule::Additive => self.model.additive_budget(agg).0,
        }
    }
}
