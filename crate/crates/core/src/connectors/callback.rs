//! Message queue and callback: asynchronous request, reply routed back by
//! client identity.
//!
//! Two independent conduits: a bounded FIFO carrying `(request, client)`
//! and a callback table holding one FIFO of replies per client.

use std::collections::{HashMap, VecDeque};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use super::conduit::{Conduit, Side};
use super::queue::QueueItems;
use super::{
    check_capacity, envelope_digest, panic_text, ConduitHandle, ConnectorKind, Envelope, Message,
    Occupancy,
};
use crate::error::ConnectorError;
use crate::ids::ClientId;
use crate::runtime::{EventKind, Runtime};

pub(crate) struct CallbackTable<Rep> {
    replies: HashMap<ClientId, VecDeque<Envelope<Result<Rep, String>>>>,
    high_water: usize,
}

impl<Rep> CallbackTable<Rep> {
    fn has_answer_for(&self, client: ClientId) -> bool {
        self.replies.get(&client).is_some_and(|q| !q.is_empty())
    }
}

impl<Rep> Occupancy for CallbackTable<Rep> {
    fn len(&self) -> usize {
        self.replies.values().map(VecDeque::len).sum()
    }
    fn capacity(&self) -> usize {
        usize::MAX
    }
    fn high_water(&self) -> usize {
        self.high_water
    }
}

type SendConduit<Req> = Arc<Conduit<QueueItems<Req>>>;
type CbConduit<Rep> = Arc<Conduit<CallbackTable<Rep>>>;

pub struct CallbackConnector<Req: Message, Rep: Message> {
    name: String,
    send: SendConduit<Req>,
    callbacks: CbConduit<Rep>,
    runtime: Runtime,
    receiver_taken: bool,
}

impl<Req: Message, Rep: Message> CallbackConnector<Req, Rep> {
    pub fn new(runtime: &Runtime, name: &str, capacity: usize) -> Result<Self, ConnectorError> {
        let capacity = check_capacity(capacity)?;
        let send = Conduit::new(
            runtime,
            name,
            &format!("{name}.send"),
            QueueItems::new(capacity),
        );
        let callbacks = Conduit::new(
            runtime,
            name,
            &format!("{name}.callback"),
            CallbackTable {
                replies: HashMap::new(),
                high_water: 0,
            },
        );
        Ok(CallbackConnector {
            name: name.to_owned(),
            send,
            callbacks,
            runtime: runtime.clone(),
            receiver_taken: false,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// A new sender endpoint with its own [`ClientId`].
    pub fn sender(&mut self) -> Result<CallbackSender<Req, Rep>, ConnectorError> {
        self.send.attach(Side::Send);
        Ok(CallbackSender {
            client: self.runtime.next_client(),
            send: Arc::clone(&self.send),
            callbacks: Arc::clone(&self.callbacks),
            seq: 0,
        })
    }

    pub fn receiver(&mut self) -> Result<CallbackReceiver<Req, Rep>, ConnectorError> {
        if std::mem::replace(&mut self.receiver_taken, true) {
            return Err(ConnectorError::EndpointTaken {
                connector: self.name.clone(),
                end: "receiver",
            });
        }
        self.send.attach(Side::Receive);
        self.callbacks.attach(Side::Receive);
        Ok(CallbackReceiver {
            send: Arc::clone(&self.send),
            callbacks: Arc::clone(&self.callbacks),
        })
    }

    /// Send conduit first, then the callback conduit.
    pub fn handles(&self) -> [ConduitHandle; 2] {
        [
            ConduitHandle::new(
                self.send.id,
                ConnectorKind::QueueAndCallback,
                self.send.clone(),
            ),
            ConduitHandle::new(
                self.callbacks.id,
                ConnectorKind::QueueAndCallback,
                self.callbacks.clone(),
            ),
        ]
    }
}

/// The connector is returned too, for adding more clients.
pub type CallbackEnds<Req, Rep> = (
    CallbackSender<Req, Rep>,
    CallbackReceiver<Req, Rep>,
    CallbackConnector<Req, Rep>,
);

pub fn make_callback<Req: Message, Rep: Message>(
    runtime: &Runtime,
    capacity: usize,
) -> Result<CallbackEnds<Req, Rep>, ConnectorError> {
    let mut connector = CallbackConnector::new(runtime, "callback", capacity)?;
    Ok((connector.sender()?, connector.receiver()?, connector))
}

pub struct CallbackSender<Req, Rep> {
    client: ClientId,
    send: SendConduit<Req>,
    callbacks: CbConduit<Rep>,
    seq: u64,
}

impl<Req: Message, Rep: Message> CallbackSender<Req, Rep> {
    pub fn client_id(&self) -> ClientId {
        self.client
    }

    /// Enqueue `msg` tagged with this endpoint's identity and return without
    /// waiting for the reply. Waits only while the send queue is full.
    pub fn send(&mut self, msg: Req) -> Result<(), ConnectorError> {
        let c = &self.send;
        c.check_stop()?;
        let id = c.runtime.next_envelope();
        let client = self.client;
        c.emit(EventKind::SendBegin, Some(id), || {
            format!("{} from {client}", envelope_digest(id, &msg))
        });
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
            sender: Some(client),
            seq: self.seq,
        });
        c.emit(EventKind::SendEnd, Some(id), || id.to_string());
        c.notify();
        Ok(())
    }

    /// Oldest reply addressed to this endpoint; waits until one arrives.
    pub fn accept(&mut self) -> Result<Rep, ConnectorError> {
        let c = &self.callbacks;
        c.check_stop()?;
        let client = self.client;
        c.emit(EventKind::ReceiveBegin, None, || client.to_string());
        let mut g = c.lock();
        c.wait(
            &mut g,
            Side::Receive,
            |s| s.data.has_answer_for(client),
            |s| s.receivers == 0,
        )?;
        let reply = g
            .data
            .replies
            .get_mut(&client)
            .and_then(VecDeque::pop_front)
            .expect("wait condition: answer present");
        debug_assert_eq!(reply.sender, Some(client));
        c.emit(EventKind::ReceiveEnd, Some(reply.id), || {
            format!("{} to {client}", envelope_digest(reply.id, &reply.payload))
        });
        c.notify();
        reply.payload.map_err(ConnectorError::HandlerFault)
    }

    /// Non-blocking check of the `has_answer_for` wait condition.
    pub fn has_answer(&self) -> bool {
        self.callbacks.lock().data.has_answer_for(self.client)
    }
}

impl<Req, Rep> Drop for CallbackSender<Req, Rep> {
    fn drop(&mut self) {
        self.send.detach(Side::Send);
    }
}

pub struct CallbackReceiver<Req, Rep> {
    send: SendConduit<Req>,
    callbacks: CbConduit<Rep>,
}

impl<Req: Message, Rep: Message> CallbackReceiver<Req, Rep> {
    /// Dequeue one request, answer it, route the reply to its sender.
    pub fn serve(&mut self, handler: impl FnOnce(Req) -> Rep) -> Result<(), ConnectorError> {
        self.try_serve(|_, req| Ok(handler(req)))
    }

    /// Like [`serve`](Self::serve); the handler also sees the requesting
    /// client and may report failure, which becomes a fault reply.
    pub fn try_serve(
        &mut self,
        handler: impl FnOnce(ClientId, Req) -> Result<Rep, String>,
    ) -> Result<(), ConnectorError> {
        let request = {
            let c = &self.send;
            c.check_stop()?;
            c.emit(EventKind::ReceiveBegin, None, String::new);
            let mut g = c.lock();
            c.wait(
                &mut g,
                Side::Receive,
                |s| !s.data.items.is_empty(),
                |s| s.senders == 0,
            )?;
            let request = g.data.items.pop_front().expect("wait condition: non-empty");
            c.emit(EventKind::ReceiveEnd, Some(request.id), || {
                envelope_digest(request.id, &request.payload)
            });
            c.notify();
            request
        };
        let client = request
            .sender
            .expect("callback requests carry their client");
        let request_id = request.id;
        let outcome = catch_unwind(AssertUnwindSafe(|| handler(client, request.payload)))
            .unwrap_or_else(|panic| Err(panic_text(panic)));
        let c = &self.callbacks;
        let mut g = c.lock();
        let id = c.runtime.next_envelope();
        c.emit(EventKind::Reply, Some(id), || {
            format!(
                "{id} re {request_id} to {client} {}",
                crate::runtime::digest(&outcome)
            )
        });
        g.data
            .replies
            .entry(client)
            .or_default()
            .push_back(Envelope {
                id,
                payload: outcome,
                sender: Some(client),
                seq: 0,
            });
        let len = g.data.len();
        g.data.high_water = g.data.high_water.max(len);
        c.notify();
        Ok(())
    }

    pub fn pending(&self) -> usize {
        self.send.lock().data.items.len()
    }
}

impl<Req, Rep> Drop for CallbackReceiver<Req, Rep> {
    fn drop(&mut self) {
        self.send.detach(Side::Receive);
        self.callbacks.detach(Side::Receive);
    }
}
