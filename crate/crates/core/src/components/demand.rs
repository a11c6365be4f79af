//! Demand-driven components: woken by each message from a producer.

use std::marker::PhantomData;

use crate::connectors::{Inbound, Message};
use crate::error::BehaviorError;
use crate::runtime::{Behavior, ComponentScope, EventKind};

/// Receive and handle messages one at a time, in arrival order, until the
/// inbox reports stop or disconnect. Emits one `step` event per message.
pub fn demand_loop<T, I, F>(
    inbox: &mut I,
    mut handler: F,
    scope: &ComponentScope,
) -> Result<(), BehaviorError>
where
    I: Inbound<T>,
    F: FnMut(T, &ComponentScope) -> Result<(), BehaviorError>,
{
    let mut handled = 0u64;
    loop {
        let msg = inbox.receive()?;
        handler(msg, scope)?;
        handled += 1;
        scope.emit(EventKind::Step, format!("handled {handled}"));
    }
}

pub struct DemandDriven<T, I, F> {
    inbox: I,
    handler: F,
    _msg: PhantomData<fn(T)>,
}

impl<T, I, F> DemandDriven<T, I, F>
where
    T: Message,
    I: Inbound<T> + Send + 'static,
    F: FnMut(T, &ComponentScope) -> Result<(), BehaviorError> + Send + 'static,
{
    pub fn new(inbox: I, handler: F) -> Self {
        DemandDriven {
            inbox,
            handler,
            _msg: PhantomData,
        }
    }
}

impl<T, I, F> Behavior for DemandDriven<T, I, F>
where
    T: Message,
    I: Inbound<T> + Send + 'static,
    F: FnMut(T, &ComponentScope) -> Result<(), BehaviorError> + Send + 'static,
{
    fn run(self: Box<Self>, scope: &ComponentScope) -> Result<(), BehaviorError> {
        let DemandDriven {
            mut inbox, handler, ..
        } = *self;
        demand_loop(&mut inbox, handler, scope)
    }
}
