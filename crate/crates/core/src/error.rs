use crate::ids::ObjectId;

/// Failure of a connector operation.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConnectorError {
    /// The system stop signal fired while waiting (or before the call).
    #[error("stopped")]
    Stopped,
    /// Every endpoint on the other side has been dropped, so the wait
    /// condition can never become true.
    #[error("peer endpoints are gone")]
    Disconnected,
    /// The service handler failed; the requester receives this in place of
    /// a reply.
    #[error("service handler failed: {0}")]
    HandlerFault(String),
    #[error("capacity must be at least 1, got {0}")]
    InvalidCapacity(usize),
    #[error("connector `{connector}` already has its {end} endpoint")]
    EndpointTaken {
        connector: String,
        end: &'static str,
    },
}

impl ConnectorError {
    /// True for the two ways a wait ends without a protocol failure.
    pub fn is_shutdown(&self) -> bool {
        matches!(self, ConnectorError::Stopped | ConnectorError::Disconnected)
    }
}

/// Outcome of a component's main loop.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BehaviorError {
    #[error(transparent)]
    Connector(#[from] ConnectorError),
    #[error("{0}")]
    Failed(String),
}

impl BehaviorError {
    pub fn is_shutdown(&self) -> bool {
        matches!(self, BehaviorError::Connector(e) if e.is_shutdown())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuntimeError {
    #[error("binding references unknown conduit `{0}`")]
    UnknownConduit(String),
    #[error("passive component `{0}` requires an active host")]
    HostRequired(String),
    #[error("host {host} of `{component}` is not an active component")]
    HostNotActive { component: String, host: ObjectId },
    #[error("active component `{0}` cannot have a host")]
    UnexpectedHost(String),
    #[error("component {0} has already been started")]
    AlreadyStarted(ObjectId),
    #[error("component {0} has no behavior attached")]
    NoBehavior(ObjectId),
    #[error("passive component {0} cannot run a behavior")]
    PassiveBehavior(ObjectId),
    #[error("unknown component {0}")]
    UnknownComponent(ObjectId),
    #[error("component {0} has no companion context")]
    NoCompanion(ObjectId),
    #[error("component {0} is passive and has no context of its own")]
    Passive(ObjectId),
    #[error("runtime has been shut down")]
    ShutDown,
}
