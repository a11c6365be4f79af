//! Turning a validated architecture into runtime objects.
//!
//! Order of creation: every conduit, then active components from the
//! outermost controller inwards (coordinator, control, algorithm, io), then
//! passive components on their hosts. Behaviors come from a registry keyed
//! by component name; nothing is started.

use std::any::{type_name, Any};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use super::model::{ArchitectureSpec, ComponentSpec};
use super::traceability::TraceabilityMap;
use super::validate::{has_errors, validate, Finding};
use crate::connectors::{
    BufferConnector, BufferReceiver, BufferSender, CallbackConnector, CallbackReceiver,
    CallbackSender, ConduitHandle, ConnectorKind, ConnectorObject, Message, MessageTypes,
    QueueConnector, QueueReceiver, QueueSender, ReplyConnector, ReplyReceiver, ReplySender,
};
use crate::error::{ConnectorError, RuntimeError};
use crate::ids::ObjectId;
use crate::runtime::{
    Behavior, Binding, ComponentDecl, ComponentHandle, End, RoleStereotype, Runtime,
};

/// What a factory produces for one component.
pub enum Built {
    Active(Box<dyn Behavior>),
    /// State for a passive component, later claimed by its host through
    /// [`Wiring::take_passive`].
    Passive(Box<dyn Any + Send>),
}

impl Built {
    pub fn active(behavior: impl Behavior) -> Self {
        Built::Active(Box::new(behavior))
    }

    pub fn passive<T: Any + Send>(state: T) -> Self {
        Built::Passive(Box::new(state))
    }
}

impl fmt::Debug for Built {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Built::Active(_) => "Built::Active",
            Built::Passive(_) => "Built::Passive",
        })
    }
}

/// Supplies the behavior of one named component.
pub trait BehaviorFactory: Send + Sync {
    fn build(&self, wiring: &mut Wiring<'_>) -> Result<Built, WiringError>;
}

impl<F> BehaviorFactory for F
where
    F: Fn(&mut Wiring<'_>) -> Result<Built, WiringError> + Send + Sync,
{
    fn build(&self, wiring: &mut Wiring<'_>) -> Result<Built, WiringError> {
        self(wiring)
    }
}

/// Component name → behavior factory.
#[derive(Clone, Default)]
pub struct BehaviorRegistry {
    factories: BTreeMap<String, Arc<dyn BehaviorFactory>>,
}

impl BehaviorRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: &str, factory: impl BehaviorFactory + 'static) -> &mut Self {
        self.factories.insert(name.to_owned(), Arc::new(factory));
        self
    }

    pub fn get(&self, name: &str) -> Option<&dyn BehaviorFactory> {
        self.factories.get(name).map(|f| f.as_ref())
    }

    pub fn contains(&self, name: &str) -> bool {
        self.factories.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

impl fmt::Debug for BehaviorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.factories.keys()).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WiringError {
    #[error("`{component}` has no port `{port}`")]
    UnknownPort { component: String, port: String },
    #[error("port `{component}.{port}` is bound as {found}, not {expected}")]
    WrongEnd {
        component: String,
        port: String,
        expected: End,
        found: End,
    },
    #[error(
        "port `{component}.{port}` is bound to {found} connector `{connector}`, not {expected}"
    )]
    WrongKind {
        component: String,
        port: String,
        connector: String,
        expected: ConnectorKind,
        found: ConnectorKind,
    },
    #[error("connector `{connector}` does not carry {wanted} (port `{component}.{port}`)")]
    TypeMismatch {
        component: String,
        port: String,
        connector: String,
        wanted: &'static str,
    },
    #[error("port `{component}.{port}` was declared but never claimed by its behavior")]
    UnusedPort { component: String, port: String },
    #[error("port `{component}.{port}` claimed twice")]
    PortClaimed { component: String, port: String },
    #[error("`{component}` has no parameter `{key}`")]
    MissingParam { component: String, key: String },
    #[error("parameter `{component}.{key}` = `{value}`: {message}")]
    BadParam {
        component: String,
        key: String,
        value: String,
        message: String,
    },
    #[error("`{component}` cannot take passive `{passive}`: {reason}")]
    Passive {
        component: String,
        passive: String,
        reason: String,
    },
    #[error("connector `{connector}`: {source}")]
    Endpoint {
        connector: String,
        source: ConnectorError,
    },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, thiserror::Error)]
pub enum InstantiateError {
    #[error("architecture has {} error finding(s); first: {}", .0.iter().filter(|f| f.is_error()).count(), .0.iter().find(|f| f.is_error()).map(ToString::to_string).unwrap_or_default())]
    Invalid(Vec<Finding>),
    #[error("no behavior registered for {}", .0.join(", "))]
    MissingBehavior(Vec<String>),
    #[error("connector `{connector}`: no message type registered under `{tag}`")]
    UnknownMessageType { connector: String, tag: String },
    #[error("connector `{connector}`: message type `{tag}` cannot build a {kind} connector")]
    UnsupportedKind {
        connector: String,
        tag: String,
        kind: ConnectorKind,
    },
    #[error("connector `{connector}`: {source}")]
    Connector {
        connector: String,
        source: ConnectorError,
    },
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error(transparent)]
    Wiring(#[from] WiringError),
    #[error("factory for `{0}` returned the wrong kind of behavior (active vs passive)")]
    WrongShape(String),
}

/// Everything a factory needs to build one component.
pub struct Wiring<'a> {
    spec: &'a ComponentSpec,
    handle: &'a ComponentHandle,
    host: Option<&'a ComponentHandle>,
    runtime: &'a Runtime,
    connectors: &'a mut BTreeMap<String, Box<dyn ConnectorObject>>,
    passives: &'a mut BTreeMap<String, (ObjectId, Box<dyn Any + Send>)>,
    claimed: BTreeSet<String>,
}

impl<'a> Wiring<'a> {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn spec(&self) -> &ComponentSpec {
        self.spec
    }

    pub fn handle(&self) -> &ComponentHandle {
        self.handle
    }

    /// Host of a passive component.
    pub fn host(&self) -> Option<&ComponentHandle> {
        self.host
    }

    pub fn runtime(&self) -> &Runtime {
        self.runtime
    }

    pub fn param<T: FromStr>(&self, key: &str) -> Result<T, WiringError>
    where
        T::Err: fmt::Display,
    {
        let value = self
            .spec
            .params
            .get(key)
            .ok_or_else(|| WiringError::MissingParam {
                component: self.spec.name.clone(),
                key: key.to_owned(),
            })?;
        value.parse().map_err(|e: T::Err| WiringError::BadParam {
            component: self.spec.name.clone(),
            key: key.to_owned(),
            value: value.clone(),
            message: e.to_string(),
        })
    }

    pub fn param_or<T: FromStr>(&self, key: &str, default: T) -> Result<T, WiringError>
    where
        T::Err: fmt::Display,
    {
        if self.spec.params.contains_key(key) {
            self.param(key)
        } else {
            Ok(default)
        }
    }

    /// Claim the state built for passive component `name`, which must be
    /// hosted by this component.
    pub fn take_passive<T: Any + Send>(&mut self, name: &str) -> Result<T, WiringError> {
        let err = |reason: String| WiringError::Passive {
            component: self.spec.name.clone(),
            passive: name.to_owned(),
            reason,
        };
        match self.passives.get(name) {
            None => return Err(err("no such passive component, or already claimed".into())),
            Some((host, _)) if *host != self.handle.id => {
                return Err(err("it is hosted by another component".into()))
            }
            Some((_, state)) if !state.is::<T>() => {
                return Err(err(format!("its state is not a {}", type_name::<T>())))
            }
            Some(_) => {}
        }
        let (_, state) = self.passives.remove(name).expect("checked above");
        Ok(*state.downcast::<T>().expect("checked above"))
    }

    fn endpoint<C: 'static, E>(
        &mut self,
        port: &str,
        end: End,
        kind: ConnectorKind,
        get: impl FnOnce(&mut C) -> Result<E, ConnectorError>,
    ) -> Result<E, WiringError> {
        let component = || self.spec.name.clone();
        let binding = self
            .spec
            .binding(port)
            .ok_or_else(|| WiringError::UnknownPort {
                component: component(),
                port: port.to_owned(),
            })?;
        if binding.end != end {
            return Err(WiringError::WrongEnd {
                component: component(),
                port: port.to_owned(),
                expected: end,
                found: binding.end,
            });
        }
        if self.claimed.contains(port) {
            return Err(WiringError::PortClaimed {
                component: component(),
                port: port.to_owned(),
            });
        }
        let obj = self
            .connectors
            .get_mut(&binding.connector)
            .expect("bindings are validated before wiring");
        if obj.kind() != kind {
            return Err(WiringError::WrongKind {
                component: component(),
                port: port.to_owned(),
                connector: binding.connector.clone(),
                expected: kind,
                found: obj.kind(),
            });
        }
        let concrete =
            obj.as_any_mut()
                .downcast_mut::<C>()
                .ok_or_else(|| WiringError::TypeMismatch {
                    component: component(),
                    port: port.to_owned(),
                    connector: binding.connector.clone(),
                    wanted: type_name::<C>(),
                })?;
        let e = get(concrete).map_err(|source| WiringError::Endpoint {
            connector: binding.connector.clone(),
            source,
        })?;
        self.claimed.insert(port.to_owned());
        Ok(e)
    }

    pub fn buffer_sender<T: Message>(
        &mut self,
        port: &str,
    ) -> Result<BufferSender<T>, WiringError> {
        self.endpoint(
            port,
            End::Sender,
            ConnectorKind::MessageBuffer,
            BufferConnector::<T>::sender,
        )
    }

    pub fn buffer_receiver<T: Message>(
        &mut self,
        port: &str,
    ) -> Result<BufferReceiver<T>, WiringError> {
        self.endpoint(
            port,
            End::Receiver,
            ConnectorKind::MessageBuffer,
            BufferConnector::<T>::receiver,
        )
    }

    pub fn queue_sender<T: Message>(&mut self, port: &str) -> Result<QueueSender<T>, WiringError> {
        self.endpoint(
            port,
            End::Sender,
            ConnectorKind::MessageQueue,
            QueueConnector::<T>::sender,
        )
    }

    pub fn queue_receiver<T: Message>(
        &mut self,
        port: &str,
    ) -> Result<QueueReceiver<T>, WiringError> {
        self.endpoint(
            port,
            End::Receiver,
            ConnectorKind::MessageQueue,
            QueueConnector::<T>::receiver,
        )
    }

    pub fn reply_sender<Req: Message, Rep: Message>(
        &mut self,
        port: &str,
    ) -> Result<ReplySender<Req, Rep>, WiringError> {
        self.endpoint(
            port,
            End::Sender,
            ConnectorKind::BufferAndReply,
            ReplyConnector::<Req, Rep>::sender,
        )
    }

    pub fn reply_receiver<Req: Message, Rep: Message>(
        &mut self,
        port: &str,
    ) -> Result<ReplyReceiver<Req, Rep>, WiringError> {
        self.endpoint(
            port,
            End::Receiver,
            ConnectorKind::BufferAndReply,
            ReplyConnector::<Req, Rep>::receiver,
        )
    }

    pub fn callback_sender<Req: Message, Rep: Message>(
        &mut self,
        port: &str,
    ) -> Result<CallbackSender<Req, Rep>, WiringError> {
        self.endpoint(
            port,
            End::Sender,
            ConnectorKind::QueueAndCallback,
            CallbackConnector::<Req, Rep>::sender,
        )
    }

    pub fn callback_receiver<Req: Message, Rep: Message>(
        &mut self,
        port: &str,
    ) -> Result<CallbackReceiver<Req, Rep>, WiringError> {
        self.endpoint(
            port,
            End::Receiver,
            ConnectorKind::QueueAndCallback,
            CallbackConnector::<Req, Rep>::receiver,
        )
    }

    fn check_all_claimed(&self) -> Result<(), WiringError> {
        match self
            .spec
            .bindings
            .iter()
            .find(|b| !self.claimed.contains(&b.port))
        {
            Some(b) => Err(WiringError::UnusedPort {
                component: self.spec.name.clone(),
                port: b.port.clone(),
            }),
            None => Ok(()),
        }
    }
}

/// A system built from an architecture, ready for [`Instance::start`].
pub struct Instance {
    pub runtime: Runtime,
    /// Every component in creation order.
    pub handles: Vec<ComponentHandle>,
    pub map: TraceabilityMap,
    pub conduits: BTreeMap<String, Vec<ConduitHandle>>,
}

impl Instance {
    pub fn handle(&self, name: &str) -> Option<&ComponentHandle> {
        self.handles.iter().find(|h| h.name == name)
    }

    pub fn active_handles(&self) -> Vec<ComponentHandle> {
        self.handles
            .iter()
            .filter(|h| !h.is_passive())
            .cloned()
            .collect()
    }

    /// Step three: launch every active component.
    pub fn start(&self) -> Result<(), RuntimeError> {
        self.runtime.start_all(&self.handles)
    }

    pub fn conduit_count(&self) -> usize {
        self.conduits.values().map(Vec::len).sum()
    }
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Instance")
            .field("handles", &self.handles)
            .field("map", &self.map)
            .finish()
    }
}

fn creation_rank(role: RoleStereotype) -> u8 {
    match role {
        RoleStereotype::Coordinator => 0,
        RoleStereotype::Control => 1,
        RoleStereotype::Algorithm => 2,
        RoleStereotype::Io => 3,
        RoleStereotype::Entity => 4,
    }
}

/// Build the runtime objects for `spec` on `runtime`.
///
/// On any error the components created so far are discarded and no
/// behavior has started.
pub fn instantiate(
    spec: &ArchitectureSpec,
    types: &MessageTypes,
    registry: &BehaviorRegistry,
    runtime: &Runtime,
) -> Result<Instance, InstantiateError> {
    let findings = validate(spec);
    if has_errors(&findings) {
        return Err(InstantiateError::Invalid(findings));
    }
    let missing: Vec<String> = spec
        .components
        .iter()
        .filter(|c| !registry.contains(&c.name))
        .map(|c| c.name.clone())
        .collect();
    if !missing.is_empty() {
        return Err(InstantiateError::MissingBehavior(missing));
    }
    for c in &spec.connectors {
        let factory =
            types
                .get(&c.message)
                .ok_or_else(|| InstantiateError::UnknownMessageType {
                    connector: c.name.clone(),
                    tag: c.message.clone(),
                })?;
        if !factory.supports(c.kind) {
            return Err(InstantiateError::UnsupportedKind {
                connector: c.name.clone(),
                tag: c.message.clone(),
                kind: c.kind,
            });
        }
    }

    let mut map = TraceabilityMap::default();

    // 1. Conduits.
    let mut connectors = BTreeMap::new();
    let mut conduits = BTreeMap::new();
    for c in &spec.connectors {
        let factory = types.get(&c.message).expect("checked above");
        let obj = factory
            .build(runtime, &c.name, c.kind, c.capacity)
            .map_err(|source| InstantiateError::Connector {
                connector: c.name.clone(),
                source,
            })?;
        map.declare(&c.name);
        for h in obj.conduits() {
            map.insert(&c.name, h.id);
        }
        conduits.insert(c.name.clone(), obj.conduits());
        connectors.insert(c.name.clone(), obj);
    }

    // 2. Components: active outermost-first, then passive.
    let mut order: Vec<&ComponentSpec> = spec.components.iter().collect();
    order.sort_by_key(|c| (c.is_passive(), creation_rank(c.role)));
    let mut handles: Vec<ComponentHandle> = Vec::new();
    let result = build_components(
        spec,
        &order,
        registry,
        runtime,
        &mut connectors,
        &mut handles,
        &mut map,
    );
    match result {
        Ok(()) => Ok(Instance {
            runtime: runtime.clone(),
            handles,
            map,
            conduits,
        }),
        Err(e) => {
            runtime.discard(&handles);
            Err(e)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn build_components(
    spec: &ArchitectureSpec,
    order: &[&ComponentSpec],
    registry: &BehaviorRegistry,
    runtime: &Runtime,
    connectors: &mut BTreeMap<String, Box<dyn ConnectorObject>>,
    handles: &mut Vec<ComponentHandle>,
    map: &mut TraceabilityMap,
) -> Result<(), InstantiateError> {
    for c in order {
        let decl = match &c.host {
            Some(host) => {
                let host = handles
                    .iter()
                    .find(|h| &h.name == host)
                    .expect("validated: host is an active component created earlier");
                ComponentDecl {
                    role: c.role,
                    ..ComponentDecl::passive(c.name.clone(), host)
                }
            }
            None => ComponentDecl::active(c.name.clone(), c.role, c.concurrency),
        };
        let bindings: Vec<Binding> = c
            .bindings
            .iter()
            .map(|b| Binding {
                port: b.port.clone(),
                connector: b.connector.clone(),
                end: b.end,
            })
            .collect();
        let handle = runtime.spawn_component(decl, &bindings)?;
        map.insert(&c.name, handle.id);
        if let Some((pid, _)) = handle.companion {
            map.insert(&c.name, pid);
        }
        handles.push(handle);
    }

    // 3. Behaviors: passive state first so hosts can claim it.
    let mut passives = BTreeMap::new();
    let mut actives = Vec::new();
    for pass in [true, false] {
        for c in order.iter().filter(|c| c.is_passive() == pass) {
            let handle = handles
                .iter()
                .find(|h| h.name == c.name)
                .expect("created above");
            let host = c
                .host
                .as_ref()
                .and_then(|h| handles.iter().find(|x| &x.name == h));
            let mut wiring = Wiring {
                spec: c,
                handle,
                host,
                runtime,
                connectors,
                passives: &mut passives,
                claimed: BTreeSet::new(),
            };
            let built = registry
                .get(&c.name)
                .expect("checked above")
                .build(&mut wiring)?;
            wiring.check_all_claimed()?;
            match (built, pass) {
                (Built::Passive(state), true) => {
                    let host = host.expect("validated").id;
                    passives.insert(c.name.clone(), (host, state));
                }
                (Built::Active(behavior), false) => actives.push((handle.clone(), behavior)),
                _ => return Err(InstantiateError::WrongShape(c.name.clone())),
            }
        }
    }
    debug_assert!(spec.components.len() == handles.len());
    for (handle, behavior) in actives {
        runtime.attach_behavior(&handle, behavior)?;
    }
    Ok(())
}
