//! Message buffer: synchronous, one-slot, no reply.
//!
//! The sender places its message only when the cell is empty and then waits
//! until the receiver has removed it again, so `send` returns only after
//! the hand-over happened.

use std::sync::Arc;

use super::conduit::{Conduit, Side};
use super::{
    envelope_digest, ConduitHandle, ConnectorKind, Envelope, Inbound, Message, Occupancy, Outbound,
};
use crate::error::ConnectorError;
use crate::runtime::{EventKind, Runtime};

pub(crate) struct BufferCell<T> {
    cell: Option<Envelope<T>>,
    high_water: usize,
}

impl<T> Occupancy for BufferCell<T> {
    fn len(&self) -> usize {
        usize::from(self.cell.is_some())
    }
    fn capacity(&self) -> usize {
        1
    }
    fn high_water(&self) -> usize {
        self.high_water
    }
}

type Shared<T> = Arc<Conduit<BufferCell<T>>>;

/// Connector object for a message buffer: owns the conduit and mints the
/// single sender and single receiver endpoint.
pub struct BufferConnector<T: Message> {
    name: String,
    conduit: Shared<T>,
    sender_taken: bool,
    receiver_taken: bool,
}

impl<T: Message> BufferConnector<T> {
    pub fn new(runtime: &Runtime, name: &str) -> Self {
        let conduit = Conduit::new(
            runtime,
            name,
            name,
            BufferCell {
                cell: None,
                high_water: 0,
            },
        );
        BufferConnector {
            name: name.to_owned(),
            conduit,
            sender_taken: false,
            receiver_taken: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sender(&mut self) -> Result<BufferSender<T>, ConnectorError> {
        if std::mem::replace(&mut self.sender_taken, true) {
            return Err(ConnectorError::EndpointTaken {
                connector: self.name.clone(),
                end: "sender",
            });
        }
        self.conduit.attach(Side::Send);
        Ok(BufferSender {
            conduit: Arc::clone(&self.conduit),
            seq: 0,
        })
    }

    pub fn receiver(&mut self) -> Result<BufferReceiver<T>, ConnectorError> {
        if std::mem::replace(&mut self.receiver_taken, true) {
            return Err(ConnectorError::EndpointTaken {
                connector: self.name.clone(),
                end: "receiver",
            });
        }
        self.conduit.attach(Side::Receive);
        Ok(BufferReceiver {
            conduit: Arc::clone(&self.conduit),
        })
    }

    pub fn handle(&self) -> ConduitHandle {
        ConduitHandle::new(
            self.conduit.id,
            ConnectorKind::MessageBuffer,
            self.conduit.clone(),
        )
    }
}

/// Create a buffer connector with fresh endpoints.
pub fn make_buffer<T: Message>(
    runtime: &Runtime,
) -> Result<(BufferSender<T>, BufferReceiver<T>, ConduitHandle), ConnectorError> {
    let mut connector = BufferConnector::new(runtime, "buffer");
    Ok((
        connector.sender()?,
        connector.receiver()?,
        connector.handle(),
    ))
}

pub struct BufferSender<T> {
    conduit: Shared<T>,
    seq: u64,
}

impl<T: Message> BufferSender<T> {
    /// Hand `msg` to the receiver and wait for the rendezvous.
    pub fn send(&mut self, msg: T) -> Result<(), ConnectorError> {
        let c = &self.conduit;
        c.check_stop()?;
        let id = c.runtime.next_envelope();
        c.emit(EventKind::SendBegin, Some(id), || envelope_digest(id, &msg));
        let mut g = c.lock();
        c.wait(
            &mut g,
            Side::Send,
            |s| s.data.cell.is_none(),
            |s| s.receivers == 0,
        )?;
        self.seq += 1;
        g.data.cell = Some(Envelope {
            id,
            payload: msg,
            sender: None,
            seq: self.seq,
        });
        g.data.high_water = g.data.high_water.max(1);
        c.notify();
        // Rendezvous: the cell no longer holds our envelope.
        c.wait(
            &mut g,
            Side::Send,
            |s| s.data.cell.as_ref().map(|e| e.id) != Some(id),
            |s| s.receivers == 0,
        )?;
        c.emit(EventKind::SendEnd, Some(id), || id.to_string());
        Ok(())
    }
}

impl<T: Message> Outbound<T> for BufferSender<T> {
    fn send(&mut self, msg: T) -> Result<(), ConnectorError> {
        BufferSender::send(self, msg)
    }
}

impl<T> Drop for BufferSender<T> {
    fn drop(&mut self) {
        self.conduit.detach(Side::Send);
    }
}

pub struct BufferReceiver<T> {
    conduit: Shared<T>,
}

impl<T: Message> BufferReceiver<T> {
    pub fn receive(&mut self) -> Result<T, ConnectorError> {
        let c = &self.conduit;
        c.check_stop()?;
        c.emit(EventKind::ReceiveBegin, None, String::new);
        let mut g = c.lock();
        c.wait(
            &mut g,
            Side::Receive,
            |s| s.data.cell.is_some(),
            |s| s.senders == 0,
        )?;
        let envelope = g.data.cell.take().expect("wait condition: cell occupied");
        // Emitted under the lock so it precedes the sender's send_end.
        c.emit(EventKind::ReceiveEnd, Some(envelope.id), || {
            envelope_digest(envelope.id, &envelope.payload)
        });
        c.notify();
        Ok(envelope.payload)
    }

    pub fn is_empty(&self) -> bool {
        self.conduit.lock().data.cell.is_none()
    }
}

impl<T: Message> Inbound<T> for BufferReceiver<T> {
    fn receive(&mut self) -> Result<T, ConnectorError> {
        BufferReceiver::receive(self)
    }
}

impl<T> Drop for BufferReceiver<T> {
    fn drop(&mut self) {
        self.conduit.detach(Side::Receive);
    }
}
