//! The state-dependent ATM controller.
//!
//! Each card-inserted message starts one session. The session's working
//! data lives in a [`Transaction`] held by the ATM's passive entity, so it
//! is only ever touched on the ATM's own context and only exists between
//! card insertion and card return.

use comet::components::{demand_loop, PassiveEntity};
use comet::connectors::{BufferReceiver, BufferSender, CallbackSender, QueueSender, ReplySender};
use comet::runtime::{Behavior, ComponentScope, EventKind};
use comet::{BehaviorError, ConnectorError};

use crate::devices::{Outcome, Outcomes};
use crate::messages::*;
use crate::state::{AtmState, StateMachine};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub card: String,
    pub entered_pin: Option<String>,
    pub accounts: Vec<String>,
    pub selected_account: Option<String>,
    pub amount: Option<Cents>,
    pub phase: AtmState,
}

impl Transaction {
    fn new(card: String) -> Self {
        Transaction {
            card,
            entered_pin: None,
            accounts: Vec::new(),
            selected_account: None,
            amount: None,
            phase: AtmState::Idle,
        }
    }
}

pub type TransactionEntity = PassiveEntity<Option<Transaction>>;

pub struct AtmPorts {
    pub card_in: BufferReceiver<CardInserted>,
    pub card_out: BufferSender<ReturnCard>,
    pub screen: ReplySender<ScreenPrompt, ScreenInput>,
    pub printer: BufferSender<Receipt>,
    pub dispenser: BufferSender<Dispense>,
    pub log: QueueSender<LogRecord>,
    pub bank: CallbackSender<ServerRequest, ServerResponse>,
}

pub struct AtmController {
    name: String,
    card_out: BufferSender<ReturnCard>,
    screen: ReplySender<ScreenPrompt, ScreenInput>,
    printer: BufferSender<Receipt>,
    dispenser: BufferSender<Dispense>,
    log: QueueSender<LogRecord>,
    bank: CallbackSender<ServerRequest, ServerResponse>,
    transaction: TransactionEntity,
    machine: StateMachine,
    outcomes: Outcomes,
}

/// How a session step ended when it did not simply continue.
enum Exit {
    /// Go straight to card ejection.
    Eject,
    Abort(BehaviorError),
}

impl From<BehaviorError> for Exit {
    fn from(e: BehaviorError) -> Self {
        Exit::Abort(e)
    }
}

impl From<ConnectorError> for Exit {
    fn from(e: ConnectorError) -> Self {
        Exit::Abort(e.into())
    }
}

type Step<T> = Result<T, Exit>;

impl AtmController {
    fn txn<R>(&mut self, f: impl FnOnce(&mut Transaction) -> R) -> Result<R, BehaviorError> {
        self.transaction
            .access(|t| t.as_mut().map(f))
            .map_err(|e| BehaviorError::Failed(e.to_string()))?
            .ok_or_else(|| BehaviorError::Failed("no transaction in progress".into()))
    }

    fn go(&mut self, to: AtmState, scope: &ComponentScope) -> Result<(), BehaviorError> {
        let from = self
            .machine
            .go(to)
            .map_err(|e| BehaviorError::Failed(e.to_string()))?;
        if to != AtmState::Idle {
            self.txn(|t| t.phase = to)?;
        }
        scope.emit(EventKind::StateChange, format!("{from} -> {to}"));
        Ok(())
    }

    fn log(&mut self, event: &str, detail: impl Into<String>) -> Result<(), ConnectorError> {
        self.log.send(LogRecord {
            atm: self.name.clone(),
            event: event.to_owned(),
            detail: detail.into(),
        })
    }

    /// A screen fault sends the session to ejection.
    fn ask(&mut self, prompt: ScreenPrompt) -> Step<ScreenInput> {
        match self.screen.request(prompt) {
            Ok(input) => Ok(input),
            Err(ConnectorError::HandlerFault(why)) => {
                self.log("screen_fault", why)?;
                Err(Exit::Eject)
            }
            Err(e) => Err(e.into()),
        }
    }

    /// One callback round trip. A server fault sends the session to ejection.
    fn ask_bank(&mut self, request: ServerRequest) -> Step<ServerResponse> {
        self.bank.send(request)?;
        match self.bank.accept() {
            Ok(r) => Ok(r),
            Err(ConnectorError::HandlerFault(why)) => {
                self.log("server_fault", why)?;
                Err(Exit::Eject)
            }
            Err(e) => Err(e.into()),
        }
    }

    fn session(&mut self, card: CardInserted, scope: &ComponentScope) -> Result<(), BehaviorError> {
        let number = card.card.clone();
        self.transaction
            .access(|t| *t = Some(Transaction::new(card.card)))
            .map_err(|e| BehaviorError::Failed(e.to_string()))?;
        self.go(AtmState::WaitingPin, scope)?;
        match self.interact(scope) {
            Ok(()) | Err(Exit::Eject) => {}
            Err(Exit::Abort(e)) => return Err(e),
        }
        self.go(AtmState::Ejecting, scope)?;
        match self.screen.request(ScreenPrompt::Goodbye) {
            Ok(_) | Err(ConnectorError::HandlerFault(_)) => {}
            Err(e) => return Err(e.into()),
        }
        self.card_out.send(ReturnCard)?;
        self.log("card_returned", number.clone())?;
        self.transaction
            .access(|t| *t = None)
            .map_err(|e| BehaviorError::Failed(e.to_string()))?;
        self.go(AtmState::Idle, scope)?;
        let _ = self.outcomes.send(Outcome::SessionEnded {
            atm: self.name.clone(),
            card: number,
        });
        Ok(())
    }

    /// Everything between card insertion and ejection. Returning (with
    /// `Ok` or `Eject`) means the card should be ejected.
    fn interact(&mut self, scope: &ComponentScope) -> Step<()> {
        let ScreenInput::Pin(pin) = self.ask(ScreenPrompt::EnterPin)? else {
            self.log("cancelled", "at pin entry")?;
            return Err(Exit::Eject);
        };
        self.txn(|t| t.entered_pin = Some(pin.clone()))?;
        self.go(AtmState::Validating, scope)?;
        let card = self.txn(|t| t.card.clone())?;
        let accounts = match self.ask_bank(ServerRequest::ValidatePin {
            card: card.clone(),
            pin,
        })? {
            ServerResponse::PinOk { accounts } => {
                self.log("pin_ok", format!("card {card}"))?;
                accounts
            }
            ServerResponse::PinBad => {
                // Single attempt: a wrong PIN ends the session.
                self.log("pin_bad", format!("card {card}"))?;
                return Err(Exit::Eject);
            }
            other => return Err(unexpected(&other)),
        };
        self.txn(|t| t.accounts = accounts.clone())?;
        self.go(AtmState::Menu, scope)?;
        let choice = self.ask(ScreenPrompt::ChooseTransaction {
            accounts: accounts.clone(),
        })?;
        let linked = |a: &Option<String>| match a {
            None => accounts.first().cloned(),
            Some(a) => accounts.contains(a).then(|| a.clone()),
        };
        match choice {
            ScreenInput::Withdraw { amount, account } => {
                let Some(account) = linked(&account) else {
                    self.log("unknown_account", format!("card {card}"))?;
                    return Err(Exit::Eject);
                };
                self.select(&account, Some(amount), scope)?;
                match self.ask_bank(ServerRequest::Withdraw {
                    account: account.clone(),
                    amount,
                })? {
                    ServerResponse::Ok { new_balance } => {
                        self.log("withdraw", format!("{account} {amount} -> {new_balance}"))?;
                        self.go(AtmState::Dispensing, scope)?;
                        self.dispenser.send(Dispense { amount })?;
                        self.print(
                            scope,
                            vec![
                                format!("card {card}"),
                                format!("withdraw {amount} from {account}"),
                                format!("balance {new_balance}"),
                            ],
                        )
                    }
                    ServerResponse::InsufficientFunds => {
                        self.log("declined", format!("{account} {amount} insufficient funds"))?;
                        Err(Exit::Eject)
                    }
                    ServerResponse::UnknownAccount => {
                        self.log("unknown_account", account)?;
                        Err(Exit::Eject)
                    }
                    other => Err(unexpected(&other)),
                }
            }
            ScreenInput::Balance { account } => {
                let Some(account) = linked(&account) else {
                    self.log("unknown_account", format!("card {card}"))?;
                    return Err(Exit::Eject);
                };
                self.select(&account, None, scope)?;
                match self.ask_bank(ServerRequest::Balance {
                    account: account.clone(),
                })? {
                    ServerResponse::Amount(balance) => {
                        self.log("balance", format!("{account} {balance}"))?;
                        self.print(
                            scope,
                            vec![
                                format!("card {card}"),
                                format!("balance {balance} in {account}"),
                            ],
                        )
                    }
                    ServerResponse::UnknownAccount => {
                        self.log("unknown_account", account)?;
                        Err(Exit::Eject)
                    }
                    other => Err(unexpected(&other)),
                }
            }
            ScreenInput::Transfer { from, to, amount } => {
                let Some(from) = linked(&Some(from)) else {
                    self.log("unknown_account", format!("card {card}"))?;
                    return Err(Exit::Eject);
                };
                self.select(&from, Some(amount), scope)?;
                match self.ask_bank(ServerRequest::Transfer {
                    from: from.clone(),
                    to: to.clone(),
                    amount,
                })? {
                    ServerResponse::Ok { new_balance } => {
                        self.log("transfer", format!("{from} -> {to} {amount}"))?;
                        self.print(
                            scope,
                            vec![
                                format!("card {card}"),
                                format!("transfer {amount} from {from} to {to}"),
                                format!("balance {new_balance}"),
                            ],
                        )
                    }
                    ServerResponse::InsufficientFunds => {
                        self.log("declined", format!("{from} {amount} insufficient funds"))?;
                        Err(Exit::Eject)
                    }
                    ServerResponse::UnknownAccount => {
                        self.log("unknown_account", to)?;
                        Err(Exit::Eject)
                    }
                    other => Err(unexpected(&other)),
                }
            }
            _ => {
                self.log("cancelled", "at menu")?;
                Err(Exit::Eject)
            }
        }
    }

    fn select(&mut self, account: &str, amount: Option<Cents>, scope: &ComponentScope) -> Step<()> {
        self.txn(|t| {
            t.selected_account = Some(account.to_owned());
            t.amount = amount;
        })?;
        self.go(AtmState::Processing, scope)?;
        Ok(())
    }

    fn print(&mut self, scope: &ComponentScope, lines: Vec<String>) -> Step<()> {
        self.go(AtmState::Printing, scope)?;
        self.printer.send(Receipt { lines })?;
        Ok(())
    }
}

fn unexpected(response: &ServerResponse) -> Exit {
    Exit::Abort(BehaviorError::Failed(format!(
        "unexpected server response {response:?}"
    )))
}

/// The ATM's main loop: one session per card-inserted message.
pub struct AtmBehavior {
    card_in: BufferReceiver<CardInserted>,
    controller: AtmController,
}

impl AtmBehavior {
    /// The ATM behavior; `ports.card_in` becomes its inbox.
    pub fn new(
        name: impl Into<String>,
        ports: AtmPorts,
        transaction: TransactionEntity,
        outcomes: Outcomes,
    ) -> Self {
        let AtmPorts {
            card_in,
            card_out,
            screen,
            printer,
            dispenser,
            log,
            bank,
        } = ports;
        AtmBehavior {
            card_in,
            controller: AtmController {
                name: name.into(),
                card_out,
                screen,
                printer,
                dispenser,
                log,
                bank,
                transaction,
                machine: StateMachine::default(),
                outcomes,
            },
        }
    }
}

impl Behavior for AtmBehavior {
    fn run(self: Box<Self>, scope: &ComponentScope) -> Result<(), BehaviorError> {
        let AtmBehavior {
            mut card_in,
            mut controller,
        } = *self;
        demand_loop(
            &mut card_in,
            |card, scope| controller.session(card, scope),
            scope,
        )
    }
}
