//! End-to-end gathering over synthetic spatially correlated fields.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::{self, Reading};
use crate::correlation::{snap_ceil, BitBudget, ConditioningRule, CostTable, ModelSpec};
use crate::error::{Error, Result};
use crate::schedule::{BitReport, Schedule};
use crate::topology::{NodeId, Topology};

/// One reading per node plus the parameters that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorField {
    pub readings: Vec<Reading>,
    pub seed: u64,
    pub smoothness: f64,
}

impl SensorField {
    /// Wraps explicit values, e.g. for replaying recorded data.
    pub fn from_values(values: &[u64], width: u32) -> Result<Self> {
        let readings = values
            .iter()
            .map(|&v| Reading::new(v, width))
            .collect::<Result<_>>()?;
        Ok(Self {
            readings,
            seed: 0,
            smoothness: f64::NAN,
        })
    }

    pub fn len(&self) -> usize {
        self.readings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.readings.is_empty()
    }
}

/// Generates a field whose neighbouring readings differ by at most
/// `ceil(smoothness * d)`.
///
/// Node 0 gets a uniform value in `[0, 2^n)`. The remaining nodes are
/// visited by increasing distance from node 0 and each draws a uniform
/// offset in `[-w, w]`, `w = ceil(smoothness * d)`, from its nearest
/// already-assigned node; results are clipped to the valid range.
/// All ties go to the lowest node id.
pub fn generate_field(topology: &Topology, n: u32, smoothness: f64, seed: u64) -> Result<SensorField> {
    if !smoothness.is_finite() || smoothness < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "smoothness must be finite and non-negative, got {smoothness}"
        )));
    }
    // validates the width
    Reading::new(0, n)?;
    let span: u64 = 1 << n;
    let size = topology.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut values: Vec<Option<u64>> = vec![None; size];
    values[0] = Some(rng.gen_range(0..span));

    let mut visit: Vec<NodeId> = (1..size).collect();
    visit.sort_by(|&a, &b| topology.dist(0, a).total_cmp(&topology.dist(0, b)).then(a.cmp(&b)));

    let mut assigned = vec![0];
    for &v in &visit {
        let (anchor, d) = nearest(topology, v, &assigned);
        let width = snap_ceil(smoothness * d).min(span as f64) as i128;
        let offset = if width == 0 { 0 } else { rng.gen_range(-width..=width) };
        let base = values[anchor].expect("anchor assigned") as i128;
        values[v] = Some((base + offset).clamp(0, span as i128 - 1) as u64);
        assigned.push(v);
    }

    let readings = values
        .into_iter()
        .map(|v| Reading::new(v.expect("every node assigned"), n))
        .collect::<Result<_>>()?;
    Ok(SensorField {
        readings,
        seed,
        smoothness,
    })
}

/// Nearest node in `candidates` to `v`, lowest id on ties.
fn nearest(topology: &Topology, v: NodeId, candidates: &[NodeId]) -> (NodeId, f64) {
    candidates
        .iter()
        .map(|&j| (j, topology.dist(v, j)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty candidate set")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatherResult {
    pub bit_report: BitReport,
    /// Indexed by node id.
    pub reconstructed: Vec<Reading>,
    pub exact_count: usize,
    pub max_abs_error: u64,
}

/// Polls nodes in schedule order; each sends the low bits its budget allows
/// and is decoded against the reconstructed reading of its nearest prior
/// node. Decoding errors propagate into later references.
pub fn gather(
    model: &ModelSpec,
    rule: ConditioningRule,
    topology: &Topology,
    schedule: &Schedule,
    field: &SensorField,
) -> Result<GatherResult> {
    if field.len() != topology.len() {
        return Err(Error::SizeMismatch {
            field: field.len(),
            topology: topology.len(),
        });
    }
    if let Some(r) = field.readings.iter().find(|r| r.width() != model.n()) {
        return Err(Error::Width(format!(
            "field readings are {} bits but the model uses n={}",
            r.width(),
            model.n()
        )));
    }
    let table = CostTable::new(*model, rule, topology)?;
    let order = Schedule::new(schedule.order().to_vec(), topology.len())?;
    let order = order.order();

    let mut agg = vec![table.empty(); topology.len()];
    let mut reconstructed: Vec<Option<Reading>> = vec![None; topology.len()];
    let mut per_node = Vec::with_capacity(order.len());

    for (k, &v) in order.iter().enumerate() {
        let budget = BitBudget(table.budget(agg[v], k));
        for &u in &order[k + 1..] {
            agg[u] = table.extend(agg[u], u, v);
        }
        let truth = field.readings[v];
        let codeword = codec::encode(truth, budget)?;
        let decoded = if k == 0 {
            codec::decode(truth, codeword)?
        } else {
            let (anchor, _) = nearest(topology, v, &order[..k]);
            let reference = reconstructed[anchor].expect("prior node reconstructed");
            codec::decode(reference, codeword)?
        };
        reconstructed[v] = Some(decoded);
        per_node.push((v, budget));
    }

    let reconstructed: Vec<Reading> = reconstructed
        .into_iter()
        .map(|r| r.expect("every node polled"))
        .collect();
    let errors = reconstructed
        .iter()
        .zip(&field.readings)
        .map(|(a, b)| a.value().abs_diff(b.value()));
    let exact_count = errors.clone().filter(|&e| e == 0).count();
    let max_abs_error = errors.max().unwrap_or(0);
    let total = per_node.iter().map(|(_, b)| b.0 as u64).sum();

    Ok(GatherResult {
        bit_report: BitReport { per_node, total },
        reconstructed,
        exact_count,
        max_abs_error,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub smoothness: f64,
    pub seed: u64,
    pub total_bits: u64,
    pub exact_count: usize,
    pub max_abs_error: u64,
}

/// Runs `generate_field` + `gather` for every `(smoothness, seed)` pair,
/// smoothness-major.
pub fn fidelity_sweep(
    model: &ModelSpec,
    rule: ConditioningRule,
    topology: &Topology,
    schedule: &Schedule,
    smoothness: &[f64],
    seeds: &[u64],
) -> Result<Vec<SweepRow>> {
    if smoothness.is_empty() || seeds.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one smoothness and one seed".into()));
    }
    let cases: Vec<(f64, u64)> = smoothness
        .iter()
        .flat_map(|&l| seeds.iter().map(move |&s| (l, s)))
        .collect();
    cases
        .par_iter()
        .map(|&(l, seed)| {
            let field = generate_field(topology, model.n(), l, seed)?;
            let res = gather(model, rule, topology, schedule, &field)?;
            Ok(SweepRow {
                smoothness: l,
                seed,
                total_bits: res.bit_report.total,
                exact_count: res.exact_count,
                max_abs_error: res.max_abs_error,
            })
        })
        .collect()
}

pub const SWEEP_HEADER: &str = "L\tseed\ttotal_bits\texact_count\tmax_abs_error";

pub fn write_sweep_tsv<W: Write>(rows: &[SweepRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.smoothness, r.seed, r.total_bits, r.exact_count, r.max_abs_error
        )?;
    }
    Ok(())
}
