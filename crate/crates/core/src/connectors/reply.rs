//! Message buffer and reply: synchronous request with reply.
//!
//! The requester is blocked for the whole round trip. A failing service
//! handler produces a fault reply instead of leaving the requester waiting.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use super::conduit::{Conduit, Side};
use super::{
    envelope_digest, panic_text, ConduitHandle, ConnectorKind, Envelope, Message, Occupancy,
};
use crate::error::ConnectorError;
use crate::ids::EnvelopeId;
use crate::runtime::{EventKind, Runtime};

pub(crate) struct ReplyCells<Req, Rep> {
    request: Option<Envelope<Req>>,
    reply: Option<Envelope<Result<Rep, String>>>,
    /// Request currently awaiting its reply.
    outstanding: Option<EnvelopeId>,
    high_water: usize,
}

impl<Req, Rep> Occupancy for ReplyCells<Req, Rep> {
    fn len(&self) -> usize {
        usize::from(self.request.is_some()) + usize::from(self.reply.is_some())
    }
    fn capacity(&self) -> usize {
        2
    }
    fn high_water(&self) -> usize {
        self.high_water
    }
}

type Shared<Req, Rep> = Arc<Conduit<ReplyCells<Req, Rep>>>;

pub struct ReplyConnector<Req: Message, Rep: Message> {
    name: String,
    conduit: Shared<Req, Rep>,
    sender_taken: bool,
    receiver_taken: bool,
}

impl<Req: Message, Rep: Message> ReplyConnector<Req, Rep> {
    pub fn new(runtime: &Runtime, name: &str) -> Self {
        ReplyConnector {
            name: name.to_owned(),
            conduit: Conduit::new(
                runtime,
                name,
                name,
                ReplyCells {
                    request: None,
                    reply: None,
                    outstanding: None,
                    high_water: 0,
                },
            ),
            sender_taken: false,
            receiver_taken: false,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn sender(&mut self) -> Result<ReplySender<Req, Rep>, ConnectorError> {
        if std::mem::replace(&mut self.sender_taken, true) {
            return Err(ConnectorError::EndpointTaken {
                connector: self.name.clone(),
                end: "sender",
            });
        }
        self.conduit.attach(Side::Send);
        Ok(ReplySender {
            conduit: Arc::clone(&self.conduit),
            seq: 0,
        })
    }

    pub fn receiver(&mut self) -> Result<ReplyReceiver<Req, Rep>, ConnectorError> {
        if std::mem::replace(&mut self.receiver_taken, true) {
            return Err(ConnectorError::EndpointTaken {
                connector: self.name.clone(),
                end: "receiver",
            });
        }
        self.conduit.attach(Side::Receive);
        Ok(ReplyReceiver {
            conduit: Arc::clone(&self.conduit),
        })
    }

    pub fn handle(&self) -> ConduitHandle {
        ConduitHandle::new(
            self.conduit.id,
            ConnectorKind::BufferAndReply,
            self.conduit.clone(),
        )
    }
}

pub type ReplyEnds<Req, Rep> = (
    ReplySender<Req, Rep>,
    ReplyReceiver<Req, Rep>,
    ConduitHandle,
);

pub fn make_reply<Req: Message, Rep: Message>(
    runtime: &Runtime,
) -> Result<ReplyEnds<Req, Rep>, ConnectorError> {
    let mut connector = ReplyConnector::new(runtime, "reply");
    Ok((
        connector.sender()?,
        connector.receiver()?,
        connector.handle(),
    ))
}

pub struct ReplySender<Req, Rep> {
    conduit: Shared<Req, Rep>,
    seq: u64,
}

impl<Req: Message, Rep: Message> ReplySender<Req, Rep> {
    /// Place `msg` and wait for the service's reply.
    ///
    /// `&mut self` plus the blocking round trip gives at most one
    /// outstanding request per endpoint.
    pub fn request(&mut self, msg: Req) -> Result<Rep, ConnectorError> {
        let c = &self.conduit;
        c.check_stop()?;
        let id = c.runtime.next_envelope();
        c.emit(EventKind::SendBegin, Some(id), || envelope_digest(id, &msg));
        let mut g = c.lock();
        c.wait(
            &mut g,
            Side::Send,
            |s| s.data.request.is_none() && s.data.outstanding.is_none(),
            |s| s.receivers == 0,
        )?;
        self.seq += 1;
        g.data.request = Some(Envelope {
            id,
            payload: msg,
            sender: None,
            seq: self.seq,
        });
        g.data.outstanding = Some(id);
        g.data.high_water = g.data.high_water.max(g.data.len());
        c.notify();
        let waited = c.wait(
            &mut g,
            Side::Send,
            |s| s.data.reply.is_some(),
            |s| s.receivers == 0,
        );
        if let Err(e) = waited {
            // Give up on this round trip; a late reply is discarded by serve.
            g.data.outstanding = None;
            if g.data.request.as_ref().map(|r| r.id) == Some(id) {
                g.data.request = None;
            }
            c.notify();
            return Err(e);
        }
        let reply = g.data.reply.take().expect("wait condition: reply present");
        g.data.outstanding = None;
        c.emit(EventKind::ReceiveEnd, Some(reply.id), || {
            envelope_digest(reply.id, &reply.payload)
        });
        c.emit(EventKind::SendEnd, Some(id), || id.to_string());
        c.notify();
        reply.payload.map_err(ConnectorError::HandlerFault)
    }
}

impl<Req, Rep> Drop for ReplySender<Req, Rep> {
    fn drop(&mut self) {
        self.conduit.detach(Side::Send);
    }
}

pub struct ReplyReceiver<Req, Rep> {
    conduit: Shared<Req, Rep>,
}

impl<Req: Message, Rep: Message> ReplyReceiver<Req, Rep> {
    /// Take one request, answer it with `handler`, deposit the reply.
    /// A panicking handler yields a fault reply.
    pub fn serve(&mut self, handler: impl FnOnce(Req) -> Rep) -> Result<(), ConnectorError> {
        self.try_serve(|req| Ok(handler(req)))
    }

    /// Like [`serve`](Self::serve), with handlers that report failure as `Err`.
    pub fn try_serve(
        &mut self,
        handler: impl FnOnce(Req) -> Result<Rep, String>,
    ) -> Result<(), ConnectorError> {
        let c = &self.conduit;
        c.check_stop()?;
        c.emit(EventKind::ReceiveBegin, None, String::new);
        let request = {
            let mut g = c.lock();
            c.wait(
                &mut g,
                Side::Receive,
                |s| s.data.request.is_some(),
                |s| s.senders == 0,
            )?;
            let request = g
                .data
                .request
                .take()
                .expect("wait condition: request present");
            c.emit(EventKind::ReceiveEnd, Some(request.id), || {
                envelope_digest(request.id, &request.payload)
            });
            c.notify();
            request
        };
        let request_id = request.id;
        let outcome = catch_unwind(AssertUnwindSafe(|| handler(request.payload)))
            .unwrap_or_else(|panic| Err(panic_text(panic)));
        let mut g = c.lock();
        if g.data.outstanding != Some(request_id) {
            // Requester gave up (stop or disconnect); nobody is waiting.
            return Ok(());
        }
        let id = c.runtime.next_envelope();
        c.emit(EventKind::Reply, Some(id), || {
            format!("{id} re {request_id} {}", crate::runtime::digest(&outcome))
        });
        g.data.reply = Some(Envelope {
            id,
            payload: outcome,
            sender: None,
            seq: 0,
        });
        g.data.high_water = g.data.high_water.max(g.data.len());
        c.notify();
        Ok(())
    }
}

impl<Req, Rep> Drop for ReplyReceiver<Req, Rep> {
    fn drop(&mut self) {
        self.conduit.detach(Side::Receive);
    }
}
