//! Message queue: asynchronous, bounded FIFO, no reply.
//!
//! A producer is suspended only while the queue is full; a consumer only
//! while it is empty.

use std::collections::VecDeque;
use std::sync::Arc;

use super::conduit::{Conduit, Side};
use super::{
    check_capacity, envelope_digest, ConduitHandle, ConnectorKind, Envelope, Inbound, Message,
    Occupancy, Outbound,
};
use crate::error::ConnectorError;
use crate::runtime::{EventKind, Runtime};

pub(crate) struct QueueItems<T> {
    pub(crate) items: VecDeque<Envelope<T>>,
    pub(crate) capacity: usize,
    pub(crate) high_water: usize,
}

impl<T> QueueItems<T> {
    pub(crate) fn new(capacity: usize) -> Self {
        QueueItems {
            items: VecDeque::new(),
            capacity,
            high_water: 0,
        }
    }

    pub(crate) fn is_full(&self) -> bool {
        self.items.len() >= self.capacity
    }

    pub(crate) fn push(&mut self, envelope: Envelope<T>) {
        debug_assert!(!self.is_full());
        self.items.push_back(envelope);
        self.high_water = self.high_water.max(self.items.len());
    }
}

impl<T> Occupancy for QueueItems<T> {
    fn len(&self) -> usize {
        self.items.len()
    }
    fn capacity(&self) -> usize {
        self.capacity
    }
    fn high_water(&self) -> usize {
        self.high_water
    }
}

type Shared<T> = Arc<Conduit<QueueItems<T>>>;

/// Connector object for a message queue. Any number of senders, one receiver.
pub struct QueueConnector<T: Message> {
    name: String,
    conduit: Shared<T>,
    receiver_taken: bool,
}

impl<T: Message> QueueConnector<T> {
    pub fn new(runtime: &Runtime, name: &str, capacity: usize) -> Result<Self, ConnectorError> {
        let capacity = check_capacity(capacity)?;
        Ok(QueueConnector {
            name: name.to_owned(),
            conduit: Conduit::new(runtime, name, name, QueueItems::new(capacity)),
            receiver_taken: false,
        })
    }

    /// Untraced queue private to one component.
    pub(crate) fn internal(runtime: &Runtime, capacity: usize) -> Self {
        QueueConnector {
            name: "internal".to_owned(),
            conduit: Conduit::internal(runtime, QueueItems::new(capacity)),
            receiver_taken: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sender(&mut self) -> Result<QueueSender<T>, ConnectorError> {
        Ok(QueueSender::attach(&self.conduit))
    }

    pub fn receiver(&mut self) -> Result<QueueReceiver<T>, ConnectorError> {
        if std::mem::replace(&mut self.receiver_taken, true) {
            return Err(ConnectorError::EndpointTaken {
                connector: self.name.clone(),
                end: "receiver",
            });
        }
        self.conduit.attach(Side::Receive);
        Ok(QueueReceiver {
            conduit: Arc::clone(&self.conduit),
        })
    }

    pub fn handle(&self) -> ConduitHandle {
        ConduitHandle::new(
            self.conduit.id,
            ConnectorKind::MessageQueue,
            self.conduit.clone(),
        )
    }
}

/// Create a queue connector with one sender and the receiver.
pub fn make_queue<T: Message>(
    runtime: &Runtime,
    capacity: usize,
) -> Result<(QueueSender<T>, QueueReceiver<T>, ConduitHandle), ConnectorError> {
    let mut connector = QueueConnector::new(runtime, "queue", capacity)?;
    Ok((
        connector.sender()?,
        connector.receiver()?,
        connector.handle(),
    ))
}

pub struct QueueSender<T> {
    conduit: Shared<T>,
    seq: u64,
}

impl<T: Message> QueueSender<T> {
    fn attach(conduit: &Shared<T>) -> Self {
        conduit.attach(Side::Send);
        QueueSender {
            conduit: Arc::clone(conduit),
            seq: 0,
        }
    }

    /// Append `msg`; waits only while the queue is at capacity.
    pub fn send(&mut self, msg: T) -> Result<(), ConnectorError> {
        let c = &self.conduit;
        c.check_stop()?;
        let id = c.runtime.next_envelope();
        c.emit(EventKind::SendBegin, Some(id), || envelope_digest(id, &msg));
        let mut g = c.lock();
        c.wait(
            &mut g,
            Side::Send,
            |s| !s.data.is_full(),
            |s| s.receivers == 0,
        )?;
        self.seq += 1;
        g.data.push(Envelope {
            id,
            payload: msg,
            sender: None,
            seq: self.seq,
        });
        c.emit(EventKind::SendEnd, Some(id), || id.to_string());
        c.notify();
        Ok(())
    }
}

impl<T: Message> Clone for QueueSender<T> {
    /// Another sender endpoint on the same queue.
    fn clone(&self) -> Self {
        QueueSender::attach(&self.conduit)
    }
}

impl<T: Message> Outbound<T> for QueueSender<T> {
    fn send(&mut self, msg: T) -> Result<(), ConnectorError> {
        QueueSender::send(self, msg)
    }
}

impl<T> Drop for QueueSender<T> {
    fn drop(&mut self) {
        self.conduit.detach(Side::Send);
    }
}

pub struct QueueReceiver<T> {
    conduit: Shared<T>,
}

impl<T: Message> QueueReceiver<T> {
    /// Take the oldest message, waiting while the queue is empty.
    pub fn receive(&mut self) -> Result<T, ConnectorError> {
        let c = &self.conduit;
        c.check_stop()?;
        c.emit(EventKind::ReceiveBegin, None, String::new);
        let mut g = c.lock();
        c.wait(
            &mut g,
            Side::Receive,
            |s| !s.data.items.is_empty(),
            |s| s.senders == 0,
        )?;
        let envelope = g.data.items.pop_front().expect("wait condition: non-empty");
        c.emit(EventKind::ReceiveEnd, Some(envelope.id), || {
            envelope_digest(envelope.id, &envelope.payload)
        });
        c.notify();
        Ok(envelope.payload)
    }

    /// Take the oldest message if there is one. Never blocks and works after
    /// the stop signal, so a consumer can drain on its way out.
    pub fn try_receive(&mut self) -> Option<T> {
        let c = &self.conduit;
        let mut g = c.lock();
        let envelope = g.data.items.pop_front()?;
        c.emit(EventKind::ReceiveEnd, Some(envelope.id), || {
            envelope_digest(envelope.id, &envelope.payload)
        });
        c.notify();
        Some(envelope.payload)
    }

    /// Everything currently queued, oldest first.
    pub fn drain(&mut self) -> Vec<T> {
        std::iter::from_fn(|| self.try_receive()).collect()
    }

    pub fn len(&self) -> usize {
        self.conduit.lock().data.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl<T: Message> Inbound<T> for QueueReceiver<T> {
    fn receive(&mut self) -> Result<T, ConnectorError> {
        QueueReceiver::receive(self)
    }
}

impl<T> Drop for QueueReceiver<T> {
    fn drop(&mut self) {
        self.conduit.detach(Side::Receive);
    }
}
