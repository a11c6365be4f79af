//! Execution contexts, component lifecycle and the system trace.
//!
//! Every active component is confined to its own thread of control. Passive
//! components borrow the context of their host. The only objects reachable
//! from more than one context are conduits, which live in
//! [`crate::connectors`].

mod stop;
mod trace;

use std::any::Any;
use std::cell::Cell;
use std::collections::BTreeMap;
use std::fmt;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{mpsc, Arc};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use parking_lot::{Condvar, Mutex};

pub(crate) use stop::{StopSignal, Wake};
pub use trace::{digest, EventKind, SinkClosed, SystemTrace, TraceEvent, TraceSink};

use crate::error::{BehaviorError, ConnectorError, RuntimeError};
use crate::ids::{ContextId, ObjectClass, ObjectId};

/// Grace period used by [`Runtime::shutdown_default`].
pub const DEFAULT_GRACE: Duration = Duration::from_secs(2);

thread_local! {
    static CURRENT_CONTEXT: Cell<Option<ContextId>> = const { Cell::new(None) };
}

/// The execution context the calling thread is confined to, if any.
pub fn current_context() -> Option<ContextId> {
    CURRENT_CONTEXT.with(Cell::get)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoleStereotype {
    Io,
    Control,
    Algorithm,
    Entity,
    Coordinator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConcurrencyType {
    EventDriven,
    DemandDriven,
    Periodic,
    Passive,
}

impl ConcurrencyType {
    pub fn is_active(self) -> bool {
        self != ConcurrencyType::Passive
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {what} `{value}`")]
pub struct UnknownStereotype {
    pub what: &'static str,
    pub value: String,
}

macro_rules! keyword_enum {
    ($ty:ident, $what:literal, { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($ty::$variant => $text),+ }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $ty {
            type Err = UnknownStereotype;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($ty::$variant),)+
                    _ => Err(UnknownStereotype { what: $what, value: s.to_owned() }),
                }
            }
        }
    };
}

keyword_enum!(RoleStereotype, "role", {
    Io => "io",
    Control => "control",
    Algorithm => "algorithm",
    Entity => "entity",
    Coordinator => "coordinator",
});

keyword_enum!(ConcurrencyType, "concurrency type", {
    EventDriven => "event_driven",
    DemandDriven => "demand_driven",
    Periodic => "periodic",
    Passive => "passive",
});

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ContextStatus {
    Created,
    Running,
    Stopped,
}

/// What the runtime needs to know to place a component.
#[derive(Debug, Clone)]
pub struct ComponentDecl {
    pub name: String,
    pub role: RoleStereotype,
    pub concurrency: ConcurrencyType,
    /// Host component for passive declarations.
    pub host: Option<ObjectId>,
}

impl ComponentDecl {
    pub fn active(
        name: impl Into<String>,
        role: RoleStereotype,
        concurrency: ConcurrencyType,
    ) -> Self {
        ComponentDecl {
            name: name.into(),
            role,
            concurrency,
            host: None,
        }
    }

    pub fn passive(name: impl Into<String>, host: &ComponentHandle) -> Self {
        ComponentDecl {
            name: name.into(),
            role: RoleStereotype::Entity,
            concurrency: ConcurrencyType::Passive,
            host: Some(host.id),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum End {
    Sender,
    Receiver,
}

impl End {
    pub fn as_str(self) -> &'static str {
        match self {
            End::Sender => "sender",
            End::Receiver => "receiver",
        }
    }
}

impl fmt::Display for End {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A component port bound to one end of a named connector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Binding {
    pub port: String,
    pub connector: String,
    pub end: End,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentHandle {
    pub id: ObjectId,
    pub name: String,
    pub context: ContextId,
    pub role: RoleStereotype,
    pub concurrency: ConcurrencyType,
    /// Companion object and context reserved for periodic components.
    pub companion: Option<(ObjectId, ContextId)>,
}

impl ComponentHandle {
    pub fn is_passive(&self) -> bool {
        self.concurrency == ConcurrencyType::Passive
    }
}

/// The main loop of an active component.
pub trait Behavior: Send + 'static {
    fn run(self: Box<Self>, scope: &ComponentScope) -> Result<(), BehaviorError>;
}

impl<F> Behavior for F
where
    F: FnOnce(&ComponentScope) -> Result<(), BehaviorError> + Send + 'static,
{
    fn run(self: Box<Self>, scope: &ComponentScope) -> Result<(), BehaviorError> {
        (*self)(scope)
    }
}

/// Handed to a behavior while it runs on its context.
pub struct ComponentScope {
    runtime: Runtime,
    id: ObjectId,
    name: String,
    context: ContextId,
    companion: Option<(ObjectId, ContextId)>,
}

impl ComponentScope {
    pub fn id(&self) -> ObjectId {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn context(&self) -> ContextId {
        self.context
    }

    pub fn runtime(&self) -> &Runtime {
        &self.runtime
    }

    /// Append an event attributed to this component. Emissions after the
    /// sink closed are dropped.
    pub fn emit(&self, kind: EventKind, digest: impl Into<String>) {
        let _ = self
            .runtime
            .emit(TraceEvent::new(self.id, kind).with_digest(digest));
    }

    pub fn is_stopping(&self) -> bool {
        self.runtime.is_stopping()
    }

    pub fn sleep(&self, period: Duration) -> Result<(), ConnectorError> {
        self.runtime.sleep(period)
    }

    /// Run `body` on the companion context reserved for this component.
    /// Used by periodic components to host their pacemaker.
    pub fn spawn_companion<F>(&self, body: F) -> Result<(), RuntimeError>
    where
        F: FnOnce(&ComponentScope) -> Result<(), BehaviorError> + Send + 'static,
    {
        let (companion_id, companion_ctx) =
            self.companion.ok_or(RuntimeError::NoCompanion(self.id))?;
        let scope = ComponentScope {
            runtime: self.runtime.clone(),
            id: companion_id,
            name: format!("{}.pacemaker", self.name),
            context: companion_ctx,
            companion: None,
        };
        self.runtime.launch(scope, Box::new(body))
    }
}

struct ComponentRecord {
    handle: ComponentHandle,
    behavior: Option<Box<dyn Behavior>>,
}

struct ContextRecord {
    owner: ObjectId,
    status: ContextStatus,
    thread: Option<JoinHandle<()>>,
    companion: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConduitRecord {
    pub id: ObjectId,
    pub connector: String,
    pub label: String,
}

#[derive(Default)]
struct Registry {
    next_object: u32,
    next_context: u32,
    components: BTreeMap<ObjectId, ComponentRecord>,
    contexts: BTreeMap<ContextId, ContextRecord>,
    conduits: BTreeMap<ObjectId, ConduitRecord>,
    final_trace: Option<SystemTrace>,
}

impl Registry {
    fn object(&mut self, class: ObjectClass) -> ObjectId {
        self.next_object += 1;
        ObjectId::new(class, self.next_object)
    }

    fn context(&mut self, owner: ObjectId, companion: bool) -> ContextId {
        self.next_context += 1;
        let id = ContextId(self.next_context);
        self.contexts.insert(
            id,
            ContextRecord {
                owner,
                status: ContextStatus::Created,
                thread: None,
                companion,
            },
        );
        id
    }
}

struct Inner {
    trace: TraceSink,
    stop: StopSignal,
    registry: Mutex<Registry>,
    status_changed: Condvar,
    next_envelope: AtomicU64,
    next_client: AtomicU64,
}

/// One running system: its contexts, conduits, stop signal and trace.
///
/// Cloning yields another handle to the same system.
#[derive(Clone)]
pub struct Runtime {
    inner: Arc<Inner>,
}

impl Default for Runtime {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Debug for Runtime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Runtime")
            .field("events", &self.inner.trace.len())
            .field("stopping", &self.is_stopping())
            .finish()
    }
}

impl Runtime {
    pub fn new() -> Self {
        Runtime {
            inner: Arc::new(Inner {
                trace: TraceSink::new(),
                stop: StopSignal::default(),
                registry: Mutex::new(Registry::default()),
                status_changed: Condvar::new(),
                next_envelope: AtomicU64::new(0),
                next_client: AtomicU64::new(0),
            }),
        }
    }

    // ---- trace -------------------------------------------------------

    /// Append an event, tagging it with the calling thread's context.
    pub fn emit(&self, mut event: TraceEvent) -> Result<u64, SinkClosed> {
        event.context = current_context();
        self.inner.trace.emit(event)
    }

    pub fn trace(&self) -> SystemTrace {
        self.inner.trace.snapshot()
    }

    // ---- stop signal -------------------------------------------------

    pub fn is_stopping(&self) -> bool {
        self.inner.stop.is_set()
    }

    /// Fire the stop signal without waiting for contexts to finish.
    pub fn signal_stop(&self) {
        self.inner.stop.trigger();
    }

    pub fn sleep(&self, period: Duration) -> Result<(), ConnectorError> {
        if self.inner.stop.sleep(period) {
            Ok(())
        } else {
            Err(ConnectorError::Stopped)
        }
    }

    pub(crate) fn stop_signal(&self) -> &StopSignal {
        &self.inner.stop
    }

    // ---- identities --------------------------------------------------

    pub(crate) fn next_envelope(&self) -> crate::ids::EnvelopeId {
        crate::ids::EnvelopeId(self.inner.next_envelope.fetch_add(1, Ordering::Relaxed) + 1)
    }

    pub(crate) fn next_client(&self) -> crate::ids::ClientId {
        crate::ids::ClientId(self.inner.next_client.fetch_add(1, Ordering::Relaxed) + 1)
    }

    pub(crate) fn register_conduit(&self, connector: &str, label: &str) -> ObjectId {
        let mut reg = self.inner.registry.lock();
        let id = reg.object(ObjectClass::Conduit);
        reg.conduits.insert(
            id,
            ConduitRecord {
                id,
                connector: connector.to_owned(),
                label: label.to_owned(),
            },
        );
        id
    }

    /// Conduits created for the connector called `connector`, in creation order.
    pub fn conduits_of(&self, connector: &str) -> Vec<ObjectId> {
        self.inner
            .registry
            .lock()
            .conduits
            .values()
            .filter(|c| c.connector == connector)
            .map(|c| c.id)
            .collect()
    }

    pub fn conduits(&self) -> Vec<ConduitRecord> {
        self.inner
            .registry
            .lock()
            .conduits
            .values()
            .cloned()
            .collect()
    }

    /// Human-readable name of a component, companion or conduit.
    pub fn label(&self, id: ObjectId) -> Option<String> {
        let reg = self.inner.registry.lock();
        match id.class {
            ObjectClass::Conduit => reg.conduits.get(&id).map(|c| c.label.clone()),
            ObjectClass::Component => reg.components.get(&id).map(|c| c.handle.name.clone()),
            ObjectClass::Companion => reg
                .components
                .values()
                .find(|c| c.handle.companion.map(|(p, _)| p) == Some(id))
                .map(|c| format!("{}.pacemaker", c.handle.name)),
        }
    }

    // ---- components --------------------------------------------------

    /// Create a component. Active declarations get a fresh context in status
    /// `Created`; passive ones share their host's context.
    pub fn spawn_component(
        &self,
        decl: ComponentDecl,
        bindings: &[Binding],
    ) -> Result<ComponentHandle, RuntimeError> {
        let mut reg = self.inner.registry.lock();
        if reg.final_trace.is_some() {
            return Err(RuntimeError::ShutDown);
        }
        for binding in bindings {
            if !reg
                .conduits
                .values()
                .any(|c| c.connector == binding.connector)
            {
                return Err(RuntimeError::UnknownConduit(binding.connector.clone()));
            }
        }
        let passive = !decl.concurrency.is_active();
        let host_context = match (passive, decl.host) {
            (true, None) => return Err(RuntimeError::HostRequired(decl.name)),
            (false, Some(_)) => return Err(RuntimeError::UnexpectedHost(decl.name)),
            (true, Some(host)) => match reg.components.get(&host) {
                Some(rec) if !rec.handle.is_passive() => Some(rec.handle.context),
                _ => {
                    return Err(RuntimeError::HostNotActive {
                        component: decl.name,
                        host,
                    })
                }
            },
            (false, None) => None,
        };
        let id = reg.object(ObjectClass::Component);
        let context = match host_context {
            Some(ctx) => ctx,
            None => reg.context(id, false),
        };
        let companion = if decl.concurrency == ConcurrencyType::Periodic {
            let pid = reg.object(ObjectClass::Companion);
            let pctx = reg.context(pid, true);
            Some((pid, pctx))
        } else {
            None
        };
        let handle = ComponentHandle {
            id,
            name: decl.name,
            context,
            role: decl.role,
            concurrency: decl.concurrency,
            companion,
        };
        reg.components.insert(
            id,
            ComponentRecord {
                handle: handle.clone(),
                behavior: None,
            },
        );
        Ok(handle)
    }

    pub fn attach_behavior(
        &self,
        handle: &ComponentHandle,
        behavior: Box<dyn Behavior>,
    ) -> Result<(), RuntimeError> {
        let mut reg = self.inner.registry.lock();
        let status = reg.contexts.get(&handle.context).map(|c| c.status);
        let rec = reg
            .components
            .get_mut(&handle.id)
            .ok_or(RuntimeError::UnknownComponent(handle.id))?;
        if rec.handle.is_passive() {
            return Err(RuntimeError::PassiveBehavior(handle.id));
        }
        if status != Some(ContextStatus::Created) {
            return Err(RuntimeError::AlreadyStarted(handle.id));
        }
        rec.behavior = Some(behavior);
        Ok(())
    }

    /// Launch the main loop of every active component in `handles`.
    ///
    /// Returns once every loop has been launched and has emitted its `start`
    /// event; it does not wait for the loops to finish.
    pub fn start_all(&self, handles: &[ComponentHandle]) -> Result<(), RuntimeError> {
        let mut launches = Vec::new();
        {
            let mut reg = self.inner.registry.lock();
            if reg.final_trace.is_some() {
                return Err(RuntimeError::ShutDown);
            }
            for h in handles.iter().filter(|h| !h.is_passive()) {
                let rec = reg
                    .components
                    .get(&h.id)
                    .ok_or(RuntimeError::UnknownComponent(h.id))?;
                if reg.contexts.get(&h.context).map(|c| c.status) != Some(ContextStatus::Created) {
                    return Err(RuntimeError::AlreadyStarted(h.id));
                }
                if rec.behavior.is_none() {
                    return Err(RuntimeError::NoBehavior(h.id));
                }
            }
            for h in handles.iter().filter(|h| !h.is_passive()) {
                let rec = reg.components.get_mut(&h.id).expect("checked above");
                let behavior = rec.behavior.take().expect("checked above");
                let scope = ComponentScope {
                    runtime: self.clone(),
                    id: h.id,
                    name: h.name.clone(),
                    context: h.context,
                    companion: h.companion,
                };
                launches.push((scope, behavior));
            }
        }
        for (scope, behavior) in launches {
            self.launch(scope, behavior)?;
        }
        Ok(())
    }

    fn launch(
        &self,
        scope: ComponentScope,
        behavior: Box<dyn Behavior>,
    ) -> Result<(), RuntimeError> {
        let ctx = scope.context;
        {
            let mut reg = self.inner.registry.lock();
            match reg.contexts.get_mut(&ctx) {
                Some(rec) if rec.status == ContextStatus::Created => {
                    rec.status = ContextStatus::Running
                }
                Some(_) => return Err(RuntimeError::AlreadyStarted(scope.id)),
                None => return Err(RuntimeError::UnknownComponent(scope.id)),
            }
        }
        let (ack_tx, ack_rx) = mpsc::channel();
        let runtime = self.clone();
        let thread = thread::Builder::new()
            .name(scope.name.clone())
            .spawn(move || {
                CURRENT_CONTEXT.with(|c| c.set(Some(ctx)));
                scope.emit(EventKind::Start, scope.name.clone());
                let _ = ack_tx.send(());
                let outcome = catch_unwind(AssertUnwindSafe(|| behavior.run(&scope)));
                let digest = match outcome {
                    Ok(Ok(())) => "completed".to_owned(),
                    Ok(Err(e)) if e.is_shutdown() => e.to_string(),
                    Ok(Err(e)) => format!("error: {e}"),
                    Err(panic) => format!("panic: {}", panic_message(&*panic)),
                };
                scope.emit(EventKind::Stop, digest);
                runtime.mark_stopped(ctx);
            })
            .expect("spawn context thread");
        self.inner
            .registry
            .lock()
            .contexts
            .get_mut(&ctx)
            .expect("registered")
            .thread = Some(thread);
        let _ = ack_rx.recv();
        Ok(())
    }

    fn mark_stopped(&self, ctx: ContextId) {
        let mut reg = self.inner.registry.lock();
        if let Some(rec) = reg.contexts.get_mut(&ctx) {
            rec.status = ContextStatus::Stopped;
        }
        self.inner.status_changed.notify_all();
    }

    pub fn status(&self, handle: &ComponentHandle) -> Option<ContextStatus> {
        self.context_status(handle.context)
    }

    pub fn context_status(&self, ctx: ContextId) -> Option<ContextStatus> {
        self.inner
            .registry
            .lock()
            .contexts
            .get(&ctx)
            .map(|c| c.status)
    }

    pub fn context_of(&self, component: ObjectId) -> Option<ContextId> {
        let reg = self.inner.registry.lock();
        if let Some(rec) = reg.components.get(&component) {
            return Some(rec.handle.context);
        }
        reg.components.values().find_map(|c| {
            c.handle
                .companion
                .filter(|(p, _)| *p == component)
                .map(|(_, ctx)| ctx)
        })
    }

    pub fn components(&self) -> Vec<ComponentHandle> {
        self.inner
            .registry
            .lock()
            .components
            .values()
            .map(|c| c.handle.clone())
            .collect()
    }

    /// Number of contexts dedicated to components (companions excluded).
    pub fn component_context_count(&self) -> usize {
        self.inner
            .registry
            .lock()
            .contexts
            .values()
            .filter(|c| !c.companion)
            .count()
    }

    pub fn companion_context_count(&self) -> usize {
        self.inner
            .registry
            .lock()
            .contexts
            .values()
            .filter(|c| c.companion)
            .count()
    }

    /// Block until every listed component's context has stopped, or the
    /// timeout elapses. Returns whether they all stopped.
    pub fn wait_stopped(&self, handles: &[ComponentHandle], timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let mut reg = self.inner.registry.lock();
        loop {
            let done = handles.iter().all(|h| {
                reg.contexts
                    .get(&h.context)
                    .is_none_or(|c| c.status == ContextStatus::Stopped)
            });
            if done {
                return true;
            }
            if self
                .inner
                .status_changed
                .wait_until(&mut reg, deadline)
                .timed_out()
            {
                return false;
            }
        }
    }

    /// Tear down components that were created but never started.
    pub fn discard(&self, handles: &[ComponentHandle]) {
        let mut reg = self.inner.registry.lock();
        for h in handles {
            if let Some(rec) = reg.components.get_mut(&h.id) {
                rec.behavior = None;
            }
            for ctx in std::iter::once(h.context).chain(h.companion.map(|(_, c)| c)) {
                if let Some(rec) = reg.contexts.get_mut(&ctx) {
                    if rec.status == ContextStatus::Created {
                        rec.status = ContextStatus::Stopped;
                    }
                }
            }
        }
        self.inner.status_changed.notify_all();
    }

    /// Record `forced_stop` for every context still running, then shut down.
    pub fn abort(&self, grace: Duration) -> SystemTrace {
        {
            let reg = self.inner.registry.lock();
            for rec in reg.contexts.values() {
                if rec.status == ContextStatus::Running {
                    let _ = self.inner.trace.emit(
                        TraceEvent::new(rec.owner, EventKind::ForcedStop).with_digest("aborted"),
                    );
                }
            }
        }
        self.shutdown(grace)
    }

    pub fn shutdown_default(&self) -> SystemTrace {
        self.shutdown(DEFAULT_GRACE)
    }

    /// Signal every component to stop at its next wait point, wait up to
    /// `grace` for contexts to finish, mark stragglers stopped with a
    /// `forced_stop` event, close the trace and return it.
    ///
    /// Idempotent: later calls return the same trace.
    pub fn shutdown(&self, grace: Duration) -> SystemTrace {
        if let Some(trace) = self.inner.registry.lock().final_trace.clone() {
            return trace;
        }
        self.inner.stop.trigger();
        let deadline = Instant::now() + grace;
        let mut reg = self.inner.registry.lock();
        if let Some(trace) = reg.final_trace.clone() {
            return trace;
        }
        loop {
            let running = reg
                .contexts
                .values()
                .any(|c| c.status == ContextStatus::Running);
            if !running {
                break;
            }
            if self
                .inner
                .status_changed
                .wait_until(&mut reg, deadline)
                .timed_out()
            {
                break;
            }
        }
        let mut finished = Vec::new();
        for rec in reg.contexts.values_mut() {
            match rec.status {
                ContextStatus::Running => {
                    let _ = self.inner.trace.emit(
                        TraceEvent::new(rec.owner, EventKind::ForcedStop)
                            .with_digest("grace period elapsed"),
                    );
                    rec.status = ContextStatus::Stopped;
                    // Detach: the thread may still be executing non-blocking code.
                    rec.thread = None;
                }
                ContextStatus::Created => rec.status = ContextStatus::Stopped,
                ContextStatus::Stopped => finished.extend(rec.thread.take()),
            }
        }
        let trace = self.inner.trace.close();
        reg.final_trace = Some(trace.clone());
        self.inner.status_changed.notify_all();
        drop(reg);
        for t in finished {
            let _ = t.join();
        }
        trace
    }

    pub fn is_shut_down(&self) -> bool {
        self.inner.registry.lock().final_trace.is_some()
    }
}

fn panic_message(panic: &(dyn Any + Send)) -> String {
    if let Some(s) = panic.downcast_ref::<&str>() {
        (*s).to_owned()
    } else if let Some(s) = panic.downcast_ref::<String>() {
        s.clone()
    } else {
        "opaque panic payload".to_owned()
    }
}
