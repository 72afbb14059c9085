//! The query queue shared between the detection loop and label consumers.

use std::fmt;
use std::sync::{Arc, Mutex, MutexGuard};

use serde::{Deserialize, Serialize};

use crate::metafeat::MetaSample;
use crate::streamgen::DriftKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStatus {
    Pending,
    Answered,
    Expired,
}

impl QueryStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QueryStatus::Pending => "pending",
            QueryStatus::Answered => "answered",
            QueryStatus::Expired => "expired",
        }
    }
}

impl fmt::Display for QueryStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A meta-sample waiting for its true drift type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelQuery {
    pub id: u64,
    pub meta_sample: MetaSample,
    /// Window means the gaps were computed from, oldest first.
    pub window_means: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub entropy: f64,
    /// Stream timestamp of the emission that raised the query.
    pub issued_at: usize,
    /// Emission index, used for expiry.
    pub emission: usize,
    pub status: QueryStatus,
    /// Set exactly when `status` is answered.
    pub label: Option<DriftKind>,
    /// Whether the detection loop has folded the label in.
    #[serde(default)]
    pub applied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelError {
    NotFound,
    NotPending(QueryStatus),
}

impl fmt::Display for LabelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LabelError::NotFound => f.write_str("no such query"),
            LabelError::NotPending(s) => write!(f, "query is {s}"),
        }
    }
}

impl std::error::Error for LabelError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSummary {
    pub class: DriftKind,
    pub probabilities: Vec<f64>,
    pub entropy: f64,
}

/// What the detection loop last published.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatusSnapshot {
    /// Trace elements consumed.
    pub position: usize,
    pub emissions: usize,
    pub alarms: usize,
    pub budget: Option<usize>,
    pub budget_spent: usize,
    pub budget_remaining: Option<usize>,
    pub window_means: Vec<f64>,
    pub last_prediction: Option<PredictionSummary>,
}

#[derive(Debug, Default)]
struct Inner {
    queries: Vec<LabelQuery>,
    status: StatusSnapshot,
}

/// Cloneable handle; all clones share one queue.
#[derive(Debug, Clone, Default)]
pub struct QueryQueue {
    inner: Arc<Mutex<Inner>>,
}

impl QueryQueue {
    pub fn new(budget: Option<usize>) -> Self {
        let queue = Self::default();
        {
            let mut inner = queue.lock();
            inner.status.budget = budget;
            inner.status.budget_remaining = budget;
        }
        queue
    }

    fn lock(&self) -> MutexGuard<'_, Inner> {
        // A panicking holder cannot leave the queue half-updated: every
        // mutation below is a single assignment or push.
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Appends a pending query and charges the budget; returns its id.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn enqueue(
        &self,
        meta_sample: MetaSample,
        window_means: Vec<f64>,
        probabilities: Vec<f64>,
        entropy: f64,
        issued_at: usize,
        emission: usize,
    ) -> u64 {
        let mut inner = self.lock();
        let id = inner.queries.len() as u64;
        inner.queries.push(LabelQuery {
            id,
            meta_sample,
            window_means,
            probabilities,
            entropy,
            issued_at,
            emission,
            status: QueryStatus::Pending,
            label: None,
            applied: false,
        });
        let status = &mut inner.status;
        status.budget_spent += 1;
        status.budget_remaining = status.budget.map(|b| b.saturating_sub(status.budget_spent));
        id
    }

    /// Records the answer to a pending query.
    pub fn answer(&self, id: u64, class: DriftKind) -> Result<(), LabelError> {
        let mut inner = self.lock();
        let q = usize::try_from(id)
            .ok()
            .and_then(|i| inner.queries.get_mut(i))
            .ok_or(LabelError::NotFound)?;
        if q.status != QueryStatus::Pending {
            return Err(LabelError::NotPending(q.status));
        }
        q.status = QueryStatus::Answered;
        q.label = Some(class);
        Ok(())
    }

    /// Answered queries not yet applied, oldest first; marks them applied.
    pub(crate) fn take_answered(&self) -> Vec<LabelQuery> {
        let mut inner = self.lock();
        inner
            .queries
            .iter_mut()
            .filter(|q| q.status == QueryStatus::Answered && !q.applied)
            .map(|q| {
                q.applied = true;
                q.clone()
            })
            .collect()
    }

    /// Expires pending queries issued `horizon` or more emissions before
    /// `emission`; returns their ids.
    pub(crate) fn expire(&self, emission: usize, horizon: usize) -> Vec<u64> {
        let mut inner = self.lock();
        inner
            .queries
            .iter_mut()
            .filter(|q| q.status == QueryStatus::Pending && emission >= q.emission + horizon)
            .map(|q| {
                q.status = QueryStatus::Expired;
                q.id
            })
            .collect()
    }

    pub fn get(&self, id: u64) -> Option<LabelQuery> {
        let inner = self.lock();
        usize::try_from(id).ok().and_then(|i| inner.queries.get(i)).cloned()
    }

    /// Queries with the given status (all when `None`), oldest first.
    pub fn list(&self, status: Option<QueryStatus>) -> Vec<LabelQuery> {
        self.lock()
            .queries
            .iter()
            .filter(|q| status.is_none_or(|s| q.status == s))
            .cloned()
            .collect()
    }

    pub fn pending(&self) -> Vec<LabelQuery> {
        self.list(Some(QueryStatus::Pending))
    }

    pub fn len(&self) -> usize {
        self.lock().queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn status(&self) -> StatusSnapshot {
        self.lock().status.clone()
    }

    pub(crate) fn update_status(&self, f: impl FnOnce(&mut StatusSnapshot)) {
        f(&mut self.lock().status);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metafeat::SampleSource;

    fn push(q: &QueryQueue, emission: usize) -> u64 {
        let sample = MetaSample {
            gaps: vec![0.0; 3],
            label: None,
            window_size: 2,
            source: SampleSource::default(),
        };
        q.enqueue(sample, vec![0.1; 4], vec![0.25; 4], 4f64.ln(), emission * 2, emission)
    }

    #[test]
    fn answer_transitions_once() {
        let q = QueryQueue::new(Some(5));
        let id = push(&q, 0);
        assert_eq!(q.answer(id, DriftKind::Sudden), Ok(()));
        assert_eq!(
            q.answer(id, DriftKind::Normal),
            Err(LabelError::NotPending(QueryStatus::Answered))
        );
        assert_eq!(q.answer(99, DriftKind::Normal), Err(LabelError::NotFound));
        assert_eq!(q.get(id).unwrap().label, Some(DriftKind::Sudden));
    }

    #[test]
    fn pending_lists_in_issue_order() {
        let q = QueryQueue::new(None);
        let ids: Vec<u64> = (0..3).map(|e| push(&q, e)).collect();
        q.answer(ids[1], DriftKind::Gradual).unwrap();
        let pending: Vec<u64> = q.pending().iter().map(|x| x.id).collect();
        assert_eq!(pending, vec![ids[0], ids[2]]);
    }

    #[test]
    fn budget_accounting() {
        let q = QueryQueue::new(Some(5));
        push(&q, 0);
        push(&q, 1);
        let s = q.status();
        assert_eq!((s.budget_spent, s.budget_remaining), (2, Some(3)));
    }

    #[test]
    fn expiry_after_horizon() {
        let q = QueryQueue::new(None);
        let a = push(&q, 0);
        let b = push(&q, 5);
        assert!(q.expire(9, 10).is_empty());
        assert_eq!(q.expire(10, 10), vec![a]);
        assert_eq!(q.answer(a, DriftKind::Normal), Err(LabelError::NotPending(QueryStatus::Expired)));
        q.answer(b, DriftKind::Normal).unwrap();
        assert!(q.expire(100, 10).is_empty());
    }

    #[test]
    fn answered_labels_are_taken_once() {
        let q = QueryQueue::new(None);
        let a = push(&q, 0);
        push(&q, 1);
        q.answer(a, DriftKind::Incremental).unwrap();
        let taken = q.take_answered();
        assert_eq!(taken.len(), 1);
        assert_eq!(taken[0].id, a);
        assert!(q.take_answered().is_empty());
    }

    #[test]
    fn concurrent_double_submit_records_one_label() {
        let q = QueryQueue::new(None);
        let id = push(&q, 0);
        let handles: Vec<_> = (0..8)
            .map(|i| {
                let q = q.clone();
                std::thread::spawn(move || q.answer(id, DriftKind::ALL[i % 4]).is_ok())
            })
            .collect();
        let wins = handles.into_iter().map(|h| h.join().unwrap()).filter(|&ok| ok).count();
        assert_eq!(wins, 1);
    }

    #[test]
    fn query_round_trips_through_json() {
        let q = QueryQueue::new(None);
        let id = push(&q, 3);
        q.answer(id, DriftKind::Gradual).unwrap();
        let query = q.get(id).unwrap();
        let text = serde_json::to_string(&query).unwrap();
        assert!(text.contains("\"status\":\"answered\""));
        assert_eq!(serde_json::from_str::<LabelQuery>(&text).unwrap(), query);
    }
}
