//! The four connector stereotypes, each built from conduit(s) plus a sender
//! and a receiver endpoint.
//!
//! | kind                 | conduits | sender                  | receiver        |
//! |----------------------|----------|-------------------------|-----------------|
//! | message buffer       | 1        | [`BufferSender`]        | [`BufferReceiver`] |
//! | message queue        | 1        | [`QueueSender`]         | [`QueueReceiver`] |
//! | buffer and reply     | 1        | [`ReplySender`]         | [`ReplyReceiver`] |
//! | queue and callback   | 2        | [`CallbackSender`]      | [`CallbackReceiver`] |
//!
//! Components only ever hold endpoints. Payloads are moved into the conduit
//! on send and moved out on receive, so a sender keeps no access to a
//! message once it is handed over:
//!
//! ```compile_fail
//! use comet::connectors::make_buffer;
//! use comet::runtime::Runtime;
//!
//! let rt = Runtime::new();
//! let (mut tx, _rx, _) = make_buffer::<Vec<u8>>(&rt).unwrap();
//! let payload = vec![1, 2, 3];
//! tx.send(payload).unwrap();
//! println!("{:?}", payload); // moved into the conduit
//! ```

mod buffer;
mod callback;
pub(crate) mod conduit;
pub(crate) mod oneshot;
mod queue;
mod registry;
mod reply;

use std::fmt::Debug;
use std::sync::Arc;

pub use buffer::{make_buffer, BufferConnector, BufferReceiver, BufferSender};
pub use callback::{
    make_callback, CallbackConnector, CallbackEnds, CallbackReceiver, CallbackSender,
};
pub use queue::{make_queue, QueueConnector, QueueReceiver, QueueSender};
pub use registry::{
    ConnectorFactory, ConnectorKind, ConnectorObject, MessageTypes, OneWay, RoundTrip,
    UnknownConnectorKind,
};
pub use reply::{make_reply, ReplyConnector, ReplyEnds, ReplyReceiver, ReplySender};

use crate::error::ConnectorError;
use crate::ids::{ClientId, EnvelopeId, ObjectId};

/// Default capacity for queue-based connectors whose description omits one.
pub const DEFAULT_CAPACITY: usize = 16;

/// Anything that can travel through a connector.
pub trait Message: Debug + Send + 'static {}

impl<T: Debug + Send + 'static> Message for T {}

/// A payload in transit, owned by exactly one party at a time.
#[derive(Debug)]
pub struct Envelope<T> {
    pub id: EnvelopeId,
    pub payload: T,
    /// Present only on callback connectors.
    pub sender: Option<ClientId>,
    /// Per-sender-endpoint counter.
    pub seq: u64,
}

/// Snapshot of a conduit's instrumentation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConduitStats {
    pub len: usize,
    pub capacity: usize,
    /// Largest length ever observed under the conduit lock.
    pub high_water: usize,
    pub blocked_senders: usize,
    pub blocked_receivers: usize,
}

pub(crate) trait Occupancy {
    fn len(&self) -> usize;
    fn capacity(&self) -> usize;
    fn high_water(&self) -> usize;
}

pub trait Probe: Send + Sync {
    fn stats(&self) -> ConduitStats;
}

impl<S: Occupancy + Send + 'static> Probe for conduit::Conduit<S> {
    fn stats(&self) -> ConduitStats {
        let g = self.lock();
        ConduitStats {
            len: g.data.len(),
            capacity: g.data.capacity(),
            high_water: g.data.high_water(),
            blocked_senders: self.blocked(conduit::Side::Send),
            blocked_receivers: self.blocked(conduit::Side::Receive),
        }
    }
}

/// Observer-side view of one conduit. Gives no access to its contents.
#[derive(Clone)]
pub struct ConduitHandle {
    pub id: ObjectId,
    pub kind: ConnectorKind,
    probe: Arc<dyn Probe>,
}

impl ConduitHandle {
    pub(crate) fn new(id: ObjectId, kind: ConnectorKind, probe: Arc<dyn Probe>) -> Self {
        ConduitHandle { id, kind, probe }
    }

    pub fn stats(&self) -> ConduitStats {
        self.probe.stats()
    }
}

impl Debug for ConduitHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConduitHandle")
            .field("id", &self.id)
            .field("kind", &self.kind)
            .finish()
    }
}

/// Receiving side of a one-way connector.
pub trait Inbound<T> {
    fn receive(&mut self) -> Result<T, ConnectorError>;
}

/// Sending side of a one-way connector.
pub trait Outbound<T> {
    fn send(&mut self, msg: T) -> Result<(), ConnectorError>;
}

fn check_capacity(capacity: usize) -> Result<usize, ConnectorError> {
    if capacity == 0 {
        Err(ConnectorError::InvalidCapacity(capacity))
    } else {
        Ok(capacity)
    }
}

fn envelope_digest<T: Debug>(id: EnvelopeId, payload: &T) -> String {
    format!("{id} {}", crate::runtime::digest(payload))
}

fn panic_text(panic: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else {
        "handler panicked".to_owned()
    }
}
