//! The system-wide event trace.
//!
//! Every component, companion and conduit appends to one sink. Appends are
//! serialized through a single lock, so `seq` is a strict total order that is
//! consistent with each thread's local emission order.

use std::fmt::{self, Debug, Write as _};

use parking_lot::Mutex;

use crate::ids::{ContextId, EnvelopeId, ObjectId};

const DIGEST_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EventKind {
    SendBegin,
    SendEnd,
    ReceiveBegin,
    ReceiveEnd,
    Reply,
    Step,
    StateChange,
    Custom,
    Start,
    Stop,
    ForcedStop,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::SendBegin => "send_begin",
            EventKind::SendEnd => "send_end",
            EventKind::ReceiveBegin => "receive_begin",
            EventKind::ReceiveEnd => "receive_end",
            EventKind::Reply => "reply",
            EventKind::Step => "step",
            EventKind::StateChange => "state_change",
            EventKind::Custom => "custom",
            EventKind::Start => "start",
            EventKind::Stop => "stop",
            EventKind::ForcedStop => "forced_stop",
        }
    }

    /// Events produced by connector endpoints rather than component logic.
    pub fn is_connector_event(self) -> bool {
        matches!(
            self,
            EventKind::SendBegin
                | EventKind::SendEnd
                | EventKind::ReceiveBegin
                | EventKind::ReceiveEnd
                | EventKind::Reply
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    /// Assigned by the sink; 1-based, gap free.
    pub seq: u64,
    pub source: ObjectId,
    pub kind: EventKind,
    pub payload_digest: String,
    pub envelope: Option<EnvelopeId>,
    /// Context that executed the emission, if it ran on a managed context.
    pub context: Option<ContextId>,
}

impl TraceEvent {
    pub fn new(source: ObjectId, kind: EventKind) -> Self {
        TraceEvent {
            seq: 0,
            source,
            kind,
            payload_digest: String::new(),
            envelope: None,
            context: None,
        }
    }

    pub fn with_digest(mut self, digest: impl Into<String>) -> Self {
        self.payload_digest = sanitize(&digest.into());
        self
    }

    pub fn with_envelope(mut self, envelope: EnvelopeId) -> Self {
        self.envelope = Some(envelope);
        self
    }

    /// One export line: `seq \t source \t kind \t payload_digest`.
    pub fn export_line(&self) -> String {
        format!(
            "{}\t{}\t{}\t{}",
            self.seq, self.source, self.kind, self.payload_digest
        )
    }
}

/// Short single-line rendering of a payload for the trace.
pub fn digest<T: Debug + ?Sized>(value: &T) -> String {
    let mut s = String::new();
    let _ = write!(s, "{value:?}");
    sanitize(&s)
}

fn sanitize(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len().min(DIGEST_LIMIT));
    let mut last_space = false;
    for ch in raw.chars() {
        let ch = if ch.is_whitespace() { ' ' } else { ch };
        if ch == ' ' && last_space {
            continue;
        }
        last_space = ch == ' ';
        out.push(ch);
        if out.len() >= DIGEST_LIMIT {
            out.push('…');
            break;
        }
    }
    out.trim().to_owned()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("trace sink is closed")]
pub struct SinkClosed;

#[derive(Default)]
struct SinkState {
    events: Vec<TraceEvent>,
    closed: bool,
}

/// Single serialized append point for trace events.
#[derive(Default)]
pub struct TraceSink {
    state: Mutex<SinkState>,
}

impl TraceSink {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn emit(&self, mut event: TraceEvent) -> Result<u64, SinkClosed> {
        let mut state = self.state.lock();
        if state.closed {
            return Err(SinkClosed);
        }
        let seq = state.events.len() as u64 + 1;
        event.seq = seq;
        state.events.push(event);
        Ok(seq)
    }

    pub fn len(&self) -> usize {
        self.state.lock().events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn snapshot(&self) -> SystemTrace {
        SystemTrace {
            events: self.state.lock().events.clone(),
        }
    }

    pub fn close(&self) -> SystemTrace {
        let mut state = self.state.lock();
        state.closed = true;
        SystemTrace {
            events: state.events.clone(),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.state.lock().closed
    }
}

/// An append-only, ordered record of what happened during a run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SystemTrace {
    pub events: Vec<TraceEvent>,
}

impl SystemTrace {
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter()
    }

    pub fn by_source(&self, source: ObjectId) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.source == source)
    }

    pub fn by_kind(&self, kind: EventKind) -> impl Iterator<Item = &TraceEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn by_envelope(&self, envelope: EnvelopeId) -> impl Iterator<Item = &TraceEvent> {
        self.events
            .iter()
            .filter(move |e| e.envelope == Some(envelope))
    }

    /// First event matching `pred` with `seq` strictly greater than `after`.
    pub fn first_after(
        &self,
        after: u64,
        mut pred: impl FnMut(&TraceEvent) -> bool,
    ) -> Option<&TraceEvent> {
        self.events.iter().find(|e| e.seq > after && pred(e))
    }

    /// Line-oriented, tab-separated export. No timestamps: `seq` is the
    /// ordering authority, so exports diff cleanly.
    pub fn export(&self) -> String {
        let mut out = String::new();
        for event in &self.events {
            out.push_str(&event.export_line());
            out.push('\n');
        }
        out
    }
}
