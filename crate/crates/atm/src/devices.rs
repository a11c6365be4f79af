//! Simulated I/O devices driven by scenario scripts.
//!
//! Devices report what physically happened (cash out, paper out, card back)
//! on an [`Outcomes`] channel so a run can be checked afterwards. The
//! channel is harness instrumentation, not part of the design.

use std::collections::VecDeque;
use std::sync::mpsc::Sender;

use comet::components::{EventSource, ScriptedSource};
use comet::connectors::{BufferReceiver, BufferSender, ReplyReceiver};
use comet::runtime::{Behavior, ComponentScope, EventKind};
use comet::BehaviorError;

use crate::bank::Bank;
use crate::messages::{
    CardInserted, Cents, Dispense, Receipt, ReturnCard, ScreenInput, ScreenPrompt,
};
use crate::scenario::ScreenStep;

/// Something observable that happened during a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Dispensed {
        atm: String,
        amount: Cents,
    },
    Printed {
        atm: String,
        receipt: Receipt,
    },
    CardReturned {
        atm: String,
        card: String,
    },
    /// The ATM is back to idle after serving `card`.
    SessionEnded {
        atm: String,
        card: String,
    },
    LogLine(String),
    /// The server's store as it was when the server stopped.
    FinalStore(Bank),
}

pub type Outcomes = Sender<Outcome>;

/// Inserts each scripted card, then waits for it to come back.
pub struct CardReader {
    pub atm: String,
    pub source: ScriptedSource,
    pub inserted: BufferSender<CardInserted>,
    pub returned: BufferReceiver<ReturnCard>,
    pub outcomes: Outcomes,
}

impl Behavior for CardReader {
    fn run(self: Box<Self>, scope: &ComponentScope) -> Result<(), BehaviorError> {
        let CardReader {
            atm,
            mut source,
            mut inserted,
            mut returned,
            outcomes,
        } = *self;
        let mut card = String::new();
        while let Some(event) = source.next_event(scope)? {
            match (event.name.as_str(), event.arg(0)) {
                ("insert_card", Some(c)) => {
                    card = c.to_owned();
                    inserted.send(CardInserted { card: card.clone() })?;
                }
                ("take_card", _) => {
                    let ReturnCard = returned.receive()?;
                    scope.emit(EventKind::Custom, format!("card {card} taken"));
                    let _ = outcomes.send(Outcome::CardReturned {
                        atm: atm.clone(),
                        card: card.clone(),
                    });
                }
                _ => {
                    return Err(BehaviorError::Failed(format!(
                        "card reader cannot `{event}`"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Answers the ATM's prompts from the customer's scripted inputs, one
/// session at a time. Out of input, it answers `Cancel`; at `Goodbye` it
/// drops whatever the customer did not get to enter.
pub struct Touchscreen {
    pub sessions: VecDeque<VecDeque<ScreenStep>>,
    pub input: ReplyReceiver<ScreenPrompt, ScreenInput>,
}

impl Touchscreen {
    pub fn new(
        sessions: Vec<Vec<ScreenStep>>,
        input: ReplyReceiver<ScreenPrompt, ScreenInput>,
    ) -> Self {
        Touchscreen {
            sessions: sessions.into_iter().map(VecDeque::from).collect(),
            input,
        }
    }
}

impl Behavior for Touchscreen {
    fn run(self: Box<Self>, _scope: &ComponentScope) -> Result<(), BehaviorError> {
        let Touchscreen {
            mut sessions,
            mut input,
        } = *self;
        loop {
            input.try_serve(|prompt| match prompt {
                ScreenPrompt::Goodbye => {
                    sessions.pop_front();
                    Ok(ScreenInput::Ack)
                }
                ScreenPrompt::EnterPin | ScreenPrompt::ChooseTransaction { .. } => {
                    match sessions.front_mut().and_then(VecDeque::pop_front) {
                        Some(ScreenStep::Input(i)) => Ok(i),
                        Some(ScreenStep::Fault) => Err("touchscreen fault".to_owned()),
                        None => Ok(ScreenInput::Cancel),
                    }
                }
            })?;
        }
    }
}

pub struct CashDispenser {
    pub atm: String,
    pub cash: BufferReceiver<Dispense>,
    pub outcomes: Outcomes,
}

impl Behavior for CashDispenser {
    fn run(self: Box<Self>, scope: &ComponentScope) -> Result<(), BehaviorError> {
        let CashDispenser {
            atm,
            mut cash,
            outcomes,
        } = *self;
        loop {
            let d = cash.receive()?;
            scope.emit(EventKind::Custom, format!("dispensed {}", d.amount));
            let _ = outcomes.send(Outcome::Dispensed {
                atm: atm.clone(),
                amount: d.amount,
            });
        }
    }
}

pub struct ReceiptPrinter {
    pub atm: String,
    pub paper: BufferReceiver<Receipt>,
    pub outcomes: Outcomes,
}

impl Behavior for ReceiptPrinter {
    fn run(self: Box<Self>, scope: &ComponentScope) -> Result<(), BehaviorError> {
        let ReceiptPrinter {
            atm,
            mut paper,
            outcomes,
        } = *self;
        loop {
            let receipt = paper.receive()?;
            scope.emit(
                EventKind::Custom,
                format!("printed {} lines", receipt.lines.len()),
            );
            let _ = outcomes.send(Outcome::Printed {
                atm: atm.clone(),
                receipt,
            });
        }
    }
}
