//! Communication event log.
//!
//! CSV columns: `round,model,sender,receiver,payload,kind` where sender and
//! receiver are `server` or `client<k>`, `payload` is the message size in
//! parameters (0 for aggregation events) and `kind` is one of `broadcast`,
//! `upload`, `aggregate`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Node {
    Server,
    Client(usize),
}

impl std::fmt::Display for Node {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Node::Server => f.write_str("server"),
            Node::Client(k) => write!(f, "client{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EventKind {
    /// Server sends a model to a client.
    Broadcast,
    /// Client returns a trained model to the server.
    Upload,
    /// Server combines client models.
    Aggregate,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Broadcast => "broadcast",
            EventKind::Upload => "upload",
            EventKind::Aggregate => "aggregate",
        }
    }

    pub fn is_message(self) -> bool {
        !matches!(self, EventKind::Aggregate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub round: usize,
    pub model: usize,
    pub sender: Node,
    pub receiver: Node,
    pub payload: usize,
    pub kind: EventKind,
}

pub fn write_events<W: Write>(events: &[Event], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["round", "model", "sender", "receiver", "payload", "kind"])?;
    for e in events {
        w.write_record([
            e.round.to_string(),
            e.model.to_string(),
            e.sender.to_string(),
            e.receiver.to_string(),
            e.payload.to_string(),
            e.kind.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Model-sized messages per round, indexed by round.
pub fn messages_per_round(events: &[Event], rounds: usize) -> Vec<usize> {
    let mut counts = vec![0; rounds];
    for e in events.iter().filter(|e| e.kind.is_message()) {
        counts[e.round] += 1;
    }
    counts
}
