//! The bank server: one context serving every ATM's requests in arrival
//! order over the shared queue-and-callback connector.

use comet::connectors::CallbackReceiver;
use comet::runtime::{Behavior, ComponentScope, EventKind};
use comet::BehaviorError;

use crate::bank::Bank;
use crate::devices::{Outcome, Outcomes};
use crate::messages::{ServerRequest, ServerResponse};

pub struct Server {
    pub bank: Bank,
    pub requests: CallbackReceiver<ServerRequest, ServerResponse>,
    pub outcomes: Outcomes,
}

impl Behavior for Server {
    fn run(self: Box<Self>, scope: &ComponentScope) -> Result<(), BehaviorError> {
        let Server {
            mut bank,
            mut requests,
            outcomes,
        } = *self;
        let mut served = 0u64;
        let ended = loop {
            if let Err(e) = requests.try_serve(|_, req| bank.handle(req)) {
                break e;
            }
            served += 1;
            scope.emit(EventKind::Step, format!("served {served}"));
        };
        let _ = outcomes.send(Outcome::FinalStore(bank));
        Err(ended.into())
    }
}
