use crate::error::Result;
use crate::streamgen::{DriftKind, DriftSpec};

use super::LabelQuery;

/// Source of true drift types for queried meta-samples.
pub trait Oracle: Send {
    /// `Some` answers the query immediately; `None` leaves it pending for an
    /// asynchronous answer through the queue.
    fn ask(&mut self, query: &LabelQuery) -> Result<Option<DriftKind>>;
}

/// Answers from the known drift schedule of a synthetic stream.
///
/// A window is labelled with the type of the drift whose transition midpoint
/// falls inside it, and normal otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthOracle {
    drifts: Vec<DriftSpec>,
}

impl GroundTruthOracle {
    pub fn new(drifts: &[DriftSpec]) -> Self {
        Self {
            drifts: drifts.iter().filter(|d| d.kind != DriftKind::Normal).copied().collect(),
        }
    }

    /// True class of the `extent` elements ending just before `offset`.
    pub fn label(&self, offset: usize, extent: usize) -> DriftKind {
        let start = offset.saturating_sub(extent);
        self.drifts
            .iter()
            .find(|d| (start..offset).contains(&(d.position + d.width / 2)))
            .map_or(DriftKind::Normal, |d| d.kind)
    }
}

impl Oracle for GroundTruthOracle {
    fn ask(&mut self, query: &LabelQuery) -> Result<Option<DriftKind>> {
        let s = &query.meta_sample;
        let extent = (s.gaps.len() + 1) * s.window_size;
        Ok(Some(self.label(s.source.offset, extent)))
    }
}

/// Leaves every query to a human answering through the label service.
#[derive(Debug, Clone, Copy, Default)]
pub struct ServiceOracle;

impl Oracle for ServiceOracle {
    fn ask(&mut self, _query: &LabelQuery) -> Result<Option<DriftKind>> {
        Ok(None)
    }
}
