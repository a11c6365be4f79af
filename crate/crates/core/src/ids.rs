//! Opaque identifiers shared by the runtime, connectors and architecture layers.

use std::fmt;
use std::str::FromStr;

/// What kind of runtime object an [`ObjectId`] names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ObjectClass {
    /// A component object (active or passive).
    Component,
    /// A companion context attached to a component, e.g. a pacemaker.
    Companion,
    /// A conduit: the shared state inside a connector.
    Conduit,
}

impl ObjectClass {
    fn prefix(self) -> char {
        match self {
            ObjectClass::Component => 'c',
            ObjectClass::Companion => 'p',
            ObjectClass::Conduit => 'k',
        }
    }
}

/// Identifier of a runtime object. Rendered as `c3`, `p4` or `k7`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObjectId {
    pub class: ObjectClass,
    pub index: u32,
}

impl ObjectId {
    pub fn new(class: ObjectClass, index: u32) -> Self {
        ObjectId { class, index }
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.class.prefix(), self.index)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed object id `{0}`")]
pub struct ParseIdError(pub String);

impl FromStr for ObjectId {
    type Err = ParseIdError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut chars = s.chars();
        let class = match chars.next() {
            Some('c') => ObjectClass::Component,
            Some('p') => ObjectClass::Companion,
            Some('k') => ObjectClass::Conduit,
            _ => return Err(ParseIdError(s.to_owned())),
        };
        let index = chars
            .as_str()
            .parse()
            .map_err(|_| ParseIdError(s.to_owned()))?;
        Ok(ObjectId { class, index })
    }
}

/// Identifier of an execution context (one thread of control).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContextId(pub u32);

impl fmt::Display for ContextId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ctx{}", self.0)
    }
}

/// Identity of a callback sender endpoint; replies are routed by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClientId(pub u64);

impl fmt::Display for ClientId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "client{}", self.0)
    }
}

/// System-wide unique identity of one message in transit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EnvelopeId(pub u64);

impl fmt::Display for EnvelopeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}
