//! The ATM controller's state chart.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AtmState {
    Idle,
    WaitingPin,
    Validating,
    Menu,
    Processing,
    Dispensing,
    Printing,
    Ejecting,
}

use AtmState::*;

/// Every legal transition. Any path that ends a session passes through
/// `Ejecting`, and `Idle` is only re-entered from there.
pub const TRANSITIONS: &[(AtmState, AtmState)] = &[
    (Idle, WaitingPin),
    (WaitingPin, Validating),
    (WaitingPin, Ejecting),
    (Validating, Menu),
    (Validating, Ejecting),
    (Menu, Processing),
    (Menu, Ejecting),
    (Processing, Dispensing),
    (Processing, Printing),
    (Processing, Ejecting),
    (Dispensing, Printing),
    (Dispensing, Ejecting),
    (Printing, Ejecting),
    (Ejecting, Idle),
];

impl AtmState {
    pub const ALL: [AtmState; 8] = [
        Idle, WaitingPin, Validating, Menu, Processing, Dispensing, Printing, Ejecting,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Idle => "idle",
            WaitingPin => "waiting_pin",
            Validating => "validating",
            Menu => "menu",
            Processing => "processing",
            Dispensing => "dispensing",
            Printing => "printing",
            Ejecting => "ejecting",
        }
    }

    pub fn can_go_to(self, next: AtmState) -> bool {
        TRANSITIONS.contains(&(self, next))
    }
}

impl fmt::Display for AtmState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AtmState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AtmState::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| format!("unknown ATM state `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("illegal ATM transition {from} -> {to}")]
pub struct IllegalTransition {
    pub from: AtmState,
    pub to: AtmState,
}

/// Current state plus the transition guard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateMachine {
    state: AtmState,
}

impl Default for StateMachine {
    fn default() -> Self {
        StateMachine { state: Idle }
    }
}

impl StateMachine {
    pub fn state(&self) -> AtmState {
        self.state
    }

    pub fn go(&mut self, to: AtmState) -> Result<AtmState, IllegalTransition> {
        let from = self.state;
        if !from.can_go_to(to) {
            return Err(IllegalTransition { from, to });
        }
        self.state = to;
        Ok(from)
    }
}
