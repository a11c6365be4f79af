//! Shared, mutually exclusive conduit state with wait conditions.
//!
//! A conduit is the only object reachable from two contexts. Callers never
//! touch the lock or condition variable directly: they state a predicate and
//! [`Conduit::wait`] blocks until it holds, the system stops, or the other
//! side has gone away.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use parking_lot::{Condvar, Mutex, MutexGuard};

use crate::error::ConnectorError;
use crate::ids::{EnvelopeId, ObjectClass, ObjectId};
use crate::runtime::{EventKind, Runtime, TraceEvent, Wake};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Side {
    Send = 0,
    Receive = 1,
}

pub(crate) struct Ends<S> {
    pub data: S,
    pub senders: usize,
    pub receivers: usize,
}

pub(crate) struct Conduit<S> {
    pub id: ObjectId,
    pub runtime: Runtime,
    traced: bool,
    state: Mutex<Ends<S>>,
    cond: Condvar,
    blocked: [AtomicUsize; 2],
}

impl<S: Send + 'static> Wake for Conduit<S> {
    fn wake(&self) {
        let _guard = self.state.lock();
        self.cond.notify_all();
    }
}

impl<S: Send + 'static> Conduit<S> {
    /// A traced conduit registered with the runtime under `connector`.
    pub fn new(runtime: &Runtime, connector: &str, label: &str, data: S) -> Arc<Self> {
        let id = runtime.register_conduit(connector, label);
        Self::watch_stop(runtime, Arc::new(Self::build(runtime, id, true, data)))
    }

    /// Untraced plumbing private to a component (not a design-level conduit).
    pub fn internal(runtime: &Runtime, data: S) -> Arc<Self> {
        let id = ObjectId::new(ObjectClass::Conduit, 0);
        Self::watch_stop(runtime, Arc::new(Self::build(runtime, id, false, data)))
    }

    // Registered only once the Arc is live: the signal prunes dead entries.
    fn watch_stop(runtime: &Runtime, conduit: Arc<Self>) -> Arc<Self> {
        let as_wake: Arc<dyn Wake> = conduit.clone();
        runtime.stop_signal().register(Arc::downgrade(&as_wake));
        conduit
    }

    fn build(runtime: &Runtime, id: ObjectId, traced: bool, data: S) -> Self {
        Conduit {
            id,
            runtime: runtime.clone(),
            traced,
            state: Mutex::new(Ends {
                data,
                senders: 0,
                receivers: 0,
            }),
            cond: Condvar::new(),
            blocked: [AtomicUsize::new(0), AtomicUsize::new(0)],
        }
    }
}

impl<S> Conduit<S> {
    pub fn lock(&self) -> MutexGuard<'_, Ends<S>> {
        self.state.lock()
    }

    pub fn check_stop(&self) -> Result<(), ConnectorError> {
        if self.runtime.is_stopping() {
            Err(ConnectorError::Stopped)
        } else {
            Ok(())
        }
    }

    /// Block until `ready` holds. Fails with `Stopped` once the stop signal
    /// fires and with `Disconnected` when `abandoned` reports that the
    /// condition can no longer become true.
    pub fn wait(
        &self,
        guard: &mut MutexGuard<'_, Ends<S>>,
        side: Side,
        mut ready: impl FnMut(&Ends<S>) -> bool,
        mut abandoned: impl FnMut(&Ends<S>) -> bool,
    ) -> Result<(), ConnectorError> {
        loop {
            if ready(guard) {
                return Ok(());
            }
            if self.runtime.is_stopping() {
                return Err(ConnectorError::Stopped);
            }
            if abandoned(guard) {
                return Err(ConnectorError::Disconnected);
            }
            let counter = &self.blocked[side as usize];
            counter.fetch_add(1, Ordering::SeqCst);
            self.cond.wait(guard);
            counter.fetch_sub(1, Ordering::SeqCst);
        }
    }

    pub fn notify(&self) {
        self.cond.notify_all();
    }

    pub fn blocked(&self, side: Side) -> usize {
        self.blocked[side as usize].load(Ordering::SeqCst)
    }

    pub fn emit(
        &self,
        kind: EventKind,
        envelope: Option<EnvelopeId>,
        digest: impl FnOnce() -> String,
    ) {
        if !self.traced {
            return;
        }
        let mut event = TraceEvent::new(self.id, kind).with_digest(digest());
        event.envelope = envelope;
        let _ = self.runtime.emit(event);
    }

    pub fn attach(&self, side: Side) {
        let mut g = self.state.lock();
        match side {
            Side::Send => g.senders += 1,
            Side::Receive => g.receivers += 1,
        }
    }

    pub fn detach(&self, side: Side) {
        let mut g = self.state.lock();
        match side {
            Side::Send => g.senders -= 1,
            Side::Receive => g.receivers -= 1,
        }
        self.cond.notify_all();
    }
}
