//! Event records shared by the broadcast and transactional runs.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Emit,
    Deliver,
    Lost,
    Blocked,
    Sync,
    Sample,
    Request,
    Reply,
    Commit,
    Abort,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Emit => "emit",
            EventKind::Deliver => "deliver",
            EventKind::Lost => "lost",
            EventKind::Blocked => "blocked",
            EventKind::Sync => "sync",
            EventKind::Sample => "sample",
            EventKind::Request => "request",
            EventKind::Reply => "reply",
            EventKind::Commit => "commit",
            EventKind::Abort => "abort",
        }
    }
}

/// One row of an event trace. `node` indexes the run's clock list.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    pub epoch: f64,
    pub node: usize,
    pub kind: EventKind,
    pub offset_estimate: Option<f64>,
    pub residual_error: Option<f64>,
    pub lamport: Option<u64>,
}

impl TraceEvent {
    pub fn new(epoch: f64, node: usize, kind: EventKind) -> Self {
        Self {
            epoch,
            node,
            kind,
            offset_estimate: None,
            residual_error: None,
            lamport: None,
        }
    }

    pub fn lamport(mut self, stamp: u64) -> Self {
        self.lamport = Some(stamp);
        self
    }

    pub fn estimate(mut self, offset: f64, residual: Option<f64>) -> Self {
        self.offset_estimate = Some(offset);
        self.residual_error = residual;
        self
    }
}
