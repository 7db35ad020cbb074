//! Node placements and the derived pairwise distance matrix.
//!
//! Positions are 2-D and unitless. Coincident nodes are allowed.

use std::fs::File;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};

/// Dense node index in `[0, N)`.
pub type NodeId = usize;

/// A single `(id, x, y)` input row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositionRecord {
    pub id: NodeId,
    pub x: f64,
    pub y: f64,
}

impl PositionRecord {
    pub fn new(id: NodeId, x: f64, y: f64) -> Self {
        Self { id, x, y }
    }
}

impl From<(NodeId, f64, f64)> for PositionRecord {
    fn from((id, x, y): (NodeId, f64, f64)) -> Self {
        Self { id, x, y }
    }
}

/// Immutable set of node positions with a fully populated distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<(f64, f64)>,
    distances: Vec<f64>,
}

impl Topology {
    /// Builds a topology from records. Row numbers in errors are 1-based
    /// indices into `records`.
    pub fn from_records<I, R>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: Into<PositionRecord>,
    {
        let rows = records
            .into_iter()
            .enumerate()
            .map(|(i, r)| (i as u64 + 1, r.into()));
        Self::assemble(rows)
    }

    /// Parses comma-separated text with header `id,x,y`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);

        let headers = rdr.headers().map_err(csv_error)?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names != ["id", "x", "y"] {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `id,x,y`, found `{}`", names.join(",")),
            });
        }

        let mut rows = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(csv_error)?;
            let line = record.position().map_or(0, |p| p.line());
            let field = |k: usize| record.get(k).unwrap_or("");
            let id: NodeId = field(0).parse().map_err(|_| Error::Parse {
                line,
                message: format!("invalid node id `{}`", field(0)),
            })?;
            let coord = |k: usize| {
                field(k).parse::<f64>().map_err(|_| Error::Parse {
                    line,
                    message: format!("invalid coordinate `{}`", field(k)),
                })
            };
            rows.push((line, PositionRecord::new(id, coord(1)?, coord(2)?)));
        }
        Self::assemble(rows)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(File::open(path)?)
    }

    fn assemble(rows: impl IntoIterator<Item = (u64, PositionRecord)>) -> Result<Self> {
        let mut slots: Vec<Option<(f64, f64)>> = Vec::new();
        for (line, rec) in rows {
            if !rec.x.is_finite() || !rec.y.is_finite() {
                return Err(Error::NonFinite { line, id: rec.id });
            }
            if rec.id >= slots.len() {
                slots.resize(rec.id + 1, None);
            }
            if slots[rec.id].is_some() {
                return Err(Error::DuplicateId { line, id: rec.id });
            }
            slots[rec.id] = Some((rec.x, rec.y));
        }
        if slots.is_empty() {
            return Err(Error::EmptyTopology);
        }
        let count = slots.len();
        let positions = slots
            .into_iter()
            .enumerate()
            .map(|(id, p)| p.ok_or(Error::IdGap { count, missing: id }))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::with_positions(positions))
    }

    fn with_positions(positions: Vec<(f64, f64)>) -> Self {
        let n = positions.len();
        let mut distances = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (xi, yi) = positions[i];
                let (xj, yj) = positions[j];
                let d = (xi - xj).hypot(yi - yj);
                distances[i * n + j] = d;
                distances[j * n + i] = d;
            }
        }
        Self {
            positions,
            distances,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    /// Always false for a constructed topology; kept for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[(f64, f64)] {
        &self.positions
    }

    pub fn position(&self, i: NodeId) -> Result<(f64, f64)> {
        self.check(i)?;
        Ok(self.positions[i])
    }

    /// Stored distance between `i` and `j`.
    pub fn distance(&self, i: NodeId, j: NodeId) -> Result<f64> {
        self.check(i)?;
        self.check(j)?;
        Ok(self.dist(i, j))
    }

    /// Unchecked lookup for hot loops; panics on out-of-range ids.
    #[inline]
    pub(crate) fn dist(&self, i: NodeId, j: NodeId) -> f64 {
        self.distances[i * self.len() + j]
    }

    pub fn check(&self, i: NodeId) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                id: i,
                count: self.len(),
            })
        }
    }

    /// Row `i` of the distance matrix.
    pub fn distances_from(&self, i: NodeId) -> Result<&[f64]> {
        self.check(i)?;
        let n = self.len();
        Ok(&self.distances[i * n..(i + 1) * n])
    }
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line());
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }
}
