//! Scripted customer scenarios.
//!
//! ```text
//! customer insert_card 42
//! customer enter_pin 1234
//! customer choose_withdraw 3000          # optional account id
//! customer take_cash
//! customer take_card
//! ```
//!
//! Other actions: `choose_balance [account]`, `choose_transfer <from> <to>
//! <amount>`, `cancel`, and the injected fault `device screen_fault`,
//! which makes the touchscreen fail its next reply. Each `insert_card`
//! starts a session; everything up to the next one belongs to it.

use std::fmt;

use comet::components::DeviceEvent;

use crate::messages::{Cents, ScreenInput};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actor {
    Customer,
    Device,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    InsertCard(String),
    EnterPin(String),
    ChooseWithdraw {
        amount: Cents,
        account: Option<String>,
    },
    ChooseBalance {
        account: Option<String>,
    },
    ChooseTransfer {
        from: String,
        to: String,
        amount: Cents,
    },
    Cancel,
    TakeCash,
    TakeCard,
    ScreenFault,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioStep {
    pub actor: Actor,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("scenario line {line}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

/// What the touchscreen does when prompted during one session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScreenStep {
    Input(ScreenInput),
    Fault,
}

/// One card's visit: the inserted card and the steps that follow.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub card: String,
    pub steps: Vec<ScenarioStep>,
}

impl Session {
    /// The touchscreen's script for this session.
    pub fn screen_steps(&self) -> Vec<ScreenStep> {
        self.steps
            .iter()
            .filter_map(|s| match &s.action {
                Action::EnterPin(p) => Some(ScreenStep::Input(ScreenInput::Pin(p.clone()))),
                Action::ChooseWithdraw { amount, account } => {
                    Some(ScreenStep::Input(ScreenInput::Withdraw {
                        amount: *amount,
                        account: account.clone(),
                    }))
                }
                Action::ChooseBalance { account } => {
                    Some(ScreenStep::Input(ScreenInput::Balance {
                        account: account.clone(),
                    }))
                }
                Action::ChooseTransfer { from, to, amount } => {
                    Some(ScreenStep::Input(ScreenInput::Transfer {
                        from: from.clone(),
                        to: to.clone(),
                        amount: *amount,
                    }))
                }
                Action::Cancel => Some(ScreenStep::Input(ScreenInput::Cancel)),
                Action::ScreenFault => Some(ScreenStep::Fault),
                Action::InsertCard(_) | Action::TakeCash | Action::TakeCard => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Scenario {
    pub sessions: Vec<Session>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let mut sessions: Vec<Session> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| ScenarioError {
                line: i + 1,
                message,
            };
            let step = parse_step(line).map_err(err)?;
            match (&step.action, sessions.last_mut()) {
                (Action::InsertCard(card), _) => sessions.push(Session {
                    card: card.clone(),
                    steps: Vec::new(),
                }),
                (_, Some(session)) => session.steps.push(step),
                (_, None) => {
                    return Err(err(
                        "the first step must be `customer insert_card <number>`".into(),
                    ))
                }
            }
        }
        Ok(Scenario { sessions })
    }

    /// The same session script `n` times over.
    pub fn repeat(&self, n: usize) -> Scenario {
        Scenario {
            sessions: (0..n).flat_map(|_| self.sessions.iter().cloned()).collect(),
        }
    }

    /// The card reader's script: each session inserts its card, then
    /// takes it back. Taking the card is implied when the scenario omits it.
    pub fn card_reader_events(&self) -> Vec<DeviceEvent> {
        self.sessions
            .iter()
            .flat_map(|s| {
                let mut insert = DeviceEvent::new("insert_card");
                insert.args.push(s.card.clone());
                [insert, DeviceEvent::new("take_card")]
            })
            .collect()
    }

    pub fn screen_sessions(&self) -> Vec<Vec<ScreenStep>> {
        self.sessions.iter().map(Session::screen_steps).collect()
    }

    pub fn cards(&self) -> impl Iterator<Item = &str> {
        self.sessions.iter().map(|s| s.card.as_str())
    }
}

fn parse_step(line: &str) -> Result<ScenarioStep, String> {
    let f: Vec<&str> = line.split_whitespace().collect();
    let actor = match f[0] {
        "customer" => Actor::Customer,
        "device" => Actor::Device,
        other => {
            return Err(format!(
                "unknown actor `{other}` (expected customer or device)"
            ))
        }
    };
    let Some(&name) = f.get(1) else {
        return Err("missing action".into());
    };
    let args = &f[2..];
    let amount = |s: &str| -> Result<Cents, String> {
        s.parse::<Cents>()
            .ok()
            .filter(|a| *a > 0)
            .ok_or_else(|| format!("`{s}` is not a positive amount of cents"))
    };
    let action = match (actor, name, args) {
        (Actor::Customer, "insert_card", [card]) => Action::InsertCard(card.to_string()),
        (Actor::Customer, "enter_pin", [pin]) => Action::EnterPin(pin.to_string()),
        (Actor::Customer, "choose_withdraw", [a]) => Action::ChooseWithdraw {
            amount: amount(a)?,
            account: None,
        },
        (Actor::Customer, "choose_withdraw", [a, acct]) => Action::ChooseWithdraw {
            amount: amount(a)?,
            account: Some(acct.to_string()),
        },
        (Actor::Customer, "choose_balance", []) => Action::ChooseBalance { account: None },
        (Actor::Customer, "choose_balance", [acct]) => Action::ChooseBalance {
            account: Some(acct.to_string()),
        },
        (Actor::Customer, "choose_transfer", [from, to, a]) => Action::ChooseTransfer {
            from: from.to_string(),
            to: to.to_string(),
            amount: amount(a)?,
        },
        (Actor::Customer, "cancel", []) => Action::Cancel,
        (Actor::Customer, "take_cash", []) => Action::TakeCash,
        (Actor::Customer, "take_card", []) => Action::TakeCard,
        (Actor::Device, "screen_fault", []) => Action::ScreenFault,
        (_, name, args) => {
            let known = [
                "insert_card",
                "enter_pin",
                "choose_withdraw",
                "choose_balance",
                "choose_transfer",
                "cancel",
                "take_cash",
                "take_card",
                "screen_fault",
            ];
            return Err(if known.contains(&name) {
                format!("wrong actor or arguments for `{name}`: {}", args.join(" "))
            } else {
                format!("unknown action `{name}`")
            });
        }
    };
    Ok(ScenarioStep { actor, action })
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Action::InsertCard(c) => write!(f, "insert_card {c}"),
            Action::EnterPin(p) => write!(f, "enter_pin {p}"),
            Action::ChooseWithdraw { amount, account } => {
                write!(f, "choose_withdraw {amount}")?;
                account.iter().try_for_each(|a| write!(f, " {a}"))
            }
            Action::ChooseBalance { account } => {
                write!(f, "choose_balance")?;
                account.iter().try_for_each(|a| write!(f, " {a}"))
            }
            Action::ChooseTransfer { from, to, amount } => {
                write!(f, "choose_transfer {from} {to} {amount}")
            }
            Action::Cancel => f.write_str("cancel"),
            Action::TakeCash => f.write_str("take_cash"),
            Action::TakeCard => f.write_str("take_card"),
            Action::ScreenFault => f.write_str("screen_fault"),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.sessions {
            writeln!(f, "customer insert_card {}", s.card)?;
            for step in &s.steps {
                let actor = match step.actor {
                    Actor::Customer => "customer",
                    Actor::Device => "device",
                };
                writeln!(f, "{actor} {}", step.action)?;
            }
        }
        Ok(())
    }
}
