//! Connector kinds and the message-type registry used to build connectors
//! from a declarative description.
//!
//! An architecture names each connector's message type with a tag. The
//! [`MessageTypes`] registry maps that tag to a [`ConnectorFactory`] that
//! knows the concrete Rust payload types and can build any supported kind.

use std::any::Any;
use std::collections::BTreeMap;
use std::fmt;
use std::marker::PhantomData;
use std::str::FromStr;
use std::sync::Arc;

use super::{
    BufferConnector, CallbackConnector, ConduitHandle, Message, QueueConnector, ReplyConnector,
    DEFAULT_CAPACITY,
};
use crate::error::ConnectorError;
use crate::runtime::Runtime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ConnectorKind {
    MessageBuffer,
    MessageQueue,
    BufferAndReply,
    QueueAndCallback,
}

impl ConnectorKind {
    pub const ALL: [ConnectorKind; 4] = [
        ConnectorKind::MessageBuffer,
        ConnectorKind::MessageQueue,
        ConnectorKind::BufferAndReply,
        ConnectorKind::QueueAndCallback,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConnectorKind::MessageBuffer => "message_buffer",
            ConnectorKind::MessageQueue => "message_queue",
            ConnectorKind::BufferAndReply => "buffer_and_reply",
            ConnectorKind::QueueAndCallback => "queue_and_callback",
        }
    }

    /// Conduit objects one connector of this kind is made of.
    pub fn conduit_count(self) -> usize {
        match self {
            ConnectorKind::QueueAndCallback => 2,
            _ => 1,
        }
    }

    pub fn is_queue_based(self) -> bool {
        matches!(
            self,
            ConnectorKind::MessageQueue | ConnectorKind::QueueAndCallback
        )
    }

    pub fn has_reply(self) -> bool {
        matches!(
            self,
            ConnectorKind::BufferAndReply | ConnectorKind::QueueAndCallback
        )
    }

    /// Kinds that admit exactly one sender endpoint.
    pub fn single_sender(self) -> bool {
        !self.is_queue_based()
    }
}

impl fmt::Display for ConnectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown connector kind `{0}`")]
pub struct UnknownConnectorKind(pub String);

impl FromStr for ConnectorKind {
    type Err = UnknownConnectorKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConnectorKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| UnknownConnectorKind(s.to_owned()))
    }
}

/// A built connector, type-erased so it can sit in a name-keyed table until
/// components claim their endpoints.
pub trait ConnectorObject: Send {
    fn kind(&self) -> ConnectorKind;
    fn name(&self) -> &str;
    fn conduits(&self) -> Vec<ConduitHandle>;
    fn as_any_mut(&mut self) -> &mut dyn Any;
}

macro_rules! connector_object {
    ($ty:ident <$($p:ident),+>, $kind:expr, |$this:ident| $conduits:expr) => {
        impl<$($p: Message),+> ConnectorObject for $ty<$($p),+> {
            fn kind(&self) -> ConnectorKind {
                $kind
            }
            fn name(&self) -> &str {
                $ty::name(self)
            }
            fn conduits(&self) -> Vec<ConduitHandle> {
                let $this = self;
                $conduits
            }
            fn as_any_mut(&mut self) -> &mut dyn Any {
                self
            }
        }
    };
}

connector_object!(BufferConnector<T>, ConnectorKind::MessageBuffer, |c| vec![
    c.handle()
]);
connector_object!(QueueConnector<T>, ConnectorKind::MessageQueue, |c| vec![
    c.handle()
]);
connector_object!(ReplyConnector<Req, Rep>, ConnectorKind::BufferAndReply, |c| vec![c.handle()]);
connector_object!(CallbackConnector<Req, Rep>, ConnectorKind::QueueAndCallback, |c| c
    .handles()
    .to_vec());

/// Builds connectors for one message type.
pub trait ConnectorFactory: Send + Sync {
    /// Rust payload type(s), for diagnostics.
    fn payload_types(&self) -> String;
    fn supports(&self, kind: ConnectorKind) -> bool;
    fn build(
        &self,
        runtime: &Runtime,
        name: &str,
        kind: ConnectorKind,
        capacity: Option<usize>,
    ) -> Result<Box<dyn ConnectorObject>, ConnectorError>;
}

/// Factory for one-way payload `T`: message buffers and message queues.
pub struct OneWay<T>(PhantomData<fn() -> T>);

impl<T> Default for OneWay<T> {
    fn default() -> Self {
        OneWay(PhantomData)
    }
}

impl<T: Message> ConnectorFactory for OneWay<T> {
    fn payload_types(&self) -> String {
        std::any::type_name::<T>().to_owned()
    }

    fn supports(&self, kind: ConnectorKind) -> bool {
        !kind.has_reply()
    }

    fn build(
        &self,
        runtime: &Runtime,
        name: &str,
        kind: ConnectorKind,
        capacity: Option<usize>,
    ) -> Result<Box<dyn ConnectorObject>, ConnectorError> {
        match kind {
            ConnectorKind::MessageBuffer => Ok(Box::new(BufferConnector::<T>::new(runtime, name))),
            ConnectorKind::MessageQueue => Ok(Box::new(QueueConnector::<T>::new(
                runtime,
                name,
                capacity.unwrap_or(DEFAULT_CAPACITY),
            )?)),
            _ => unreachable!("checked by supports()"),
        }
    }
}

/// Factory for request type `Req` answered with `Rep`: buffer-and-reply and
/// queue-and-callback connectors.
pub struct RoundTrip<Req, Rep>(PhantomData<fn() -> (Req, Rep)>);

impl<Req, Rep> Default for RoundTrip<Req, Rep> {
    fn default() -> Self {
        RoundTrip(PhantomData)
    }
}

impl<Req: Message, Rep: Message> ConnectorFactory for RoundTrip<Req, Rep> {
    fn payload_types(&self) -> String {
        format!(
            "{} -> {}",
            std::any::type_name::<Req>(),
            std::any::type_name::<Rep>()
        )
    }

    fn supports(&self, kind: ConnectorKind) -> bool {
        kind.has_reply()
    }

    fn build(
        &self,
        runtime: &Runtime,
        name: &str,
        kind: ConnectorKind,
        capacity: Option<usize>,
    ) -> Result<Box<dyn ConnectorObject>, ConnectorError> {
        match kind {
            ConnectorKind::BufferAndReply => {
                Ok(Box::new(ReplyConnector::<Req, Rep>::new(runtime, name)))
            }
            ConnectorKind::QueueAndCallback => Ok(Box::new(CallbackConnector::<Req, Rep>::new(
                runtime,
                name,
                capacity.unwrap_or(DEFAULT_CAPACITY),
            )?)),
            _ => unreachable!("checked by supports()"),
        }
    }
}

/// Message-type tag → connector factory.
#[derive(Clone, Default)]
pub struct MessageTypes {
    factories: BTreeMap<String, Arc<dyn ConnectorFactory>>,
}

impl MessageTypes {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, tag: &str, factory: impl ConnectorFactory + 'static) -> &mut Self {
        self.factories.insert(tag.to_owned(), Arc::new(factory));
        self
    }

    pub fn one_way<T: Message>(&mut self, tag: &str) -> &mut Self {
        self.register(tag, OneWay::<T>::default())
    }

    pub fn round_trip<Req: Message, Rep: Message>(&mut self, tag: &str) -> &mut Self {
        self.register(tag, RoundTrip::<Req, Rep>::default())
    }

    pub fn get(&self, tag: &str) -> Option<&dyn ConnectorFactory> {
        self.factories.get(tag).map(|f| f.as_ref())
    }

    pub fn tags(&self) -> impl Iterator<Item = &str> {
        self.factories.keys().map(String::as_str)
    }
}

impl fmt::Debug for MessageTypes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.factories.iter().map(|(k, v)| (k, v.payload_types())))
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_keywords_round_trip() {
        for kind in ConnectorKind::ALL {
            assert_eq!(kind.as_str().parse::<ConnectorKind>().unwrap(), kind);
        }
        assert!("pipe".parse::<ConnectorKind>().is_err());
    }

    #[test]
    fn callback_kind_is_two_conduits() {
        let rt = Runtime::new();
        let mut types = MessageTypes::new();
        types.round_trip::<u32, u32>("num");
        let f = types.get("num").unwrap();
        let obj = f
            .build(&rt, "rpc", ConnectorKind::QueueAndCallback, Some(8))
            .unwrap();
        assert_eq!(obj.conduits().len(), 2);
        assert_ne!(obj.conduits()[0].id, obj.conduits()[1].id);
        assert_eq!(rt.conduits_of("rpc").len(), 2);
    }

    #[test]
    fn factories_only_support_matching_kinds() {
        let one = OneWay::<u8>::default();
        let two = RoundTrip::<u8, u8>::default();
        assert!(one.supports(ConnectorKind::MessageBuffer));
        assert!(one.supports(ConnectorKind::MessageQueue));
        assert!(!one.supports(ConnectorKind::BufferAndReply));
        assert!(two.supports(ConnectorKind::QueueAndCallback));
        assert!(!two.supports(ConnectorKind::MessageQueue));
    }

    #[test]
    fn zero_capacity_is_rejected_through_factory() {
        let rt = Runtime::new();
        let err = OneWay::<u8>::default()
            .build(&rt, "q", ConnectorKind::MessageQueue, Some(0))
            .err()
            .unwrap();
        assert_eq!(err, ConnectorError::InvalidCapacity(0));
    }
}
