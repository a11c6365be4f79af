//! Untraced single-use reply slot for component-internal queries.

use std::fmt;
use std::sync::Arc;

use super::conduit::{Conduit, Side};
use crate::error::ConnectorError;
use crate::runtime::Runtime;

type Slot<T> = Arc<Conduit<Option<T>>>;

pub(crate) fn oneshot<T: Send + 'static>(
    runtime: &Runtime,
) -> (OneshotSender<T>, OneshotReceiver<T>) {
    let slot: Slot<T> = Conduit::internal(runtime, None);
    slot.attach(Side::Send);
    slot.attach(Side::Receive);
    (
        OneshotSender {
            slot: Arc::clone(&slot),
        },
        OneshotReceiver { slot },
    )
}

pub(crate) struct OneshotSender<T: Send + 'static> {
    slot: Slot<T>,
}

impl<T: Send + 'static> OneshotSender<T> {
    pub fn send(self, value: T) {
        let mut g = self.slot.lock();
        g.data = Some(value);
        self.slot.notify();
    }
}

impl<T: Send + 'static> fmt::Debug for OneshotSender<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("OneshotSender")
    }
}

impl<T: Send + 'static> Drop for OneshotSender<T> {
    fn drop(&mut self) {
        self.slot.detach(Side::Send);
    }
}

pub(crate) struct OneshotReceiver<T: Send + 'static> {
    slot: Slot<T>,
}

impl<T: Send + 'static> OneshotReceiver<T> {
    pub fn receive(self) -> Result<T, ConnectorError> {
        let mut g = self.slot.lock();
        self.slot.wait(
            &mut g,
            Side::Receive,
            |s| s.data.is_some(),
            |s| s.senders == 0,
        )?;
        Ok(g.data.take().expect("wait condition: value present"))
    }
}

impl<T: Send + 'static> Drop for OneshotReceiver<T> {
    fn drop(&mut self) {
        self.slot.detach(Side::Receive);
    }
}
