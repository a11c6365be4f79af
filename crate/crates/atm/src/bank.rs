//! Card records, accounts, and the server's request handler.
//!
//! Accounts file, one line per card/account link:
//!
//! ```text
//! card 42 pin 1234 account checking balance 10000
//! card 42 pin 1234 account savings  balance 50000
//! ```
//!
//! A card listed on several lines must carry the same PIN on each; an
//! account listed several times must carry the same balance.

use std::collections::BTreeMap;
use std::fmt;

use crate::messages::{Cents, ServerRequest, ServerResponse};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CardRecord {
    pub card: String,
    pub pin: String,
    pub accounts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("accounts line {line}: {message}")]
pub struct AccountsError {
    pub line: usize,
    pub message: String,
}

/// The server's state: cards and balances.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Bank {
    cards: BTreeMap<String, CardRecord>,
    balances: BTreeMap<String, Cents>,
    min_balance_seen: Option<Cents>,
}

impl Bank {
    pub fn parse(text: &str) -> Result<Self, AccountsError> {
        let mut bank = Bank::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| AccountsError {
                line: i + 1,
                message,
            };
            let f: Vec<&str> = line.split_whitespace().collect();
            let ["card", card, "pin", pin, "account", account, "balance", balance] = f[..] else {
                return Err(err(
                    "expected `card <number> pin <pin> account <id> balance <cents>`".into(),
                ));
            };
            let balance: Cents = balance.parse().ok().filter(|b| *b >= 0).ok_or_else(|| {
                err(format!(
                    "balance `{balance}` is not a non-negative number of cents"
                ))
            })?;
            bank.link(card, pin, account, balance).map_err(err)?;
        }
        Ok(bank)
    }

    /// Add (or extend) a card record and its account.
    pub fn link(
        &mut self,
        card: &str,
        pin: &str,
        account: &str,
        balance: Cents,
    ) -> Result<(), String> {
        if balance < 0 {
            return Err(format!("account `{account}` has a negative balance"));
        }
        match self.balances.get(account) {
            Some(b) if *b != balance => {
                return Err(format!(
                    "account `{account}` listed with balances {b} and {balance}"
                ))
            }
            _ => {}
        }
        let rec = self
            .cards
            .entry(card.to_owned())
            .or_insert_with(|| CardRecord {
                card: card.to_owned(),
                pin: pin.to_owned(),
                accounts: Vec::new(),
            });
        if rec.pin != pin {
            return Err(format!("card `{card}` listed with two different pins"));
        }
        if !rec.accounts.iter().any(|a| a == account) {
            rec.accounts.push(account.to_owned());
        }
        self.balances.insert(account.to_owned(), balance);
        Ok(())
    }

    pub fn card(&self, card: &str) -> Option<&CardRecord> {
        self.cards.get(card)
    }

    pub fn balance(&self, account: &str) -> Option<Cents> {
        self.balances.get(account).copied()
    }

    pub fn balances(&self) -> &BTreeMap<String, Cents> {
        &self.balances
    }

    pub fn total(&self) -> Cents {
        self.balances.values().sum()
    }

    /// Lowest balance left behind by any mutation so far.
    pub fn min_balance_seen(&self) -> Option<Cents> {
        self.min_balance_seen
    }

    /// Serve one request. `Err` means an internal invariant broke (a
    /// negative balance), which the connector reports as a fault.
    pub fn handle(&mut self, request: ServerRequest) -> Result<ServerResponse, String> {
        use ServerResponse as R;
        let response = match request {
            ServerRequest::ValidatePin { card, pin } => match self.cards.get(&card) {
                Some(rec) if rec.pin == pin => R::PinOk {
                    accounts: rec.accounts.clone(),
                },
                _ => R::PinBad,
            },
            ServerRequest::Balance { account } => match self.balances.get(&account) {
                Some(b) => R::Amount(*b),
                None => R::UnknownAccount,
            },
            ServerRequest::Withdraw { account, amount } => {
                let Some(balance) = self.balances.get_mut(&account) else {
                    return Ok(R::UnknownAccount);
                };
                if amount < 0 || amount > *balance {
                    return Ok(R::InsufficientFunds);
                }
                *balance -= amount;
                let new_balance = *balance;
                self.observe(new_balance)?;
                R::Ok { new_balance }
            }
            ServerRequest::Transfer { from, to, amount } => {
                let (Some(&fb), true) = (self.balances.get(&from), self.balances.contains_key(&to))
                else {
                    return Ok(R::UnknownAccount);
                };
                if amount < 0 || amount > fb {
                    return Ok(R::InsufficientFunds);
                }
                if from != to {
                    *self.balances.get_mut(&from).expect("checked") -= amount;
                    *self.balances.get_mut(&to).expect("checked") += amount;
                }
                let new_balance = self.balances[&from];
                self.observe(new_balance)?;
                self.observe(self.balances[&to])?;
                R::Ok { new_balance }
            }
        };
        Ok(response)
    }

    fn observe(&mut self, balance: Cents) -> Result<(), String> {
        self.min_balance_seen = Some(self.min_balance_seen.map_or(balance, |m| m.min(balance)));
        if balance < 0 {
            return Err(format!("overdraft: balance {balance}"));
        }
        Ok(())
    }
}

impl fmt::Display for Bank {
    /// Accounts-file form; round-trips through [`Bank::parse`].
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for rec in self.cards.values() {
            for account in &rec.accounts {
                writeln!(
                    f,
                    "card {} pin {} account {} balance {}",
                    rec.card, rec.pin, account, self.balances[account]
                )?;
            }
        }
        Ok(())
    }
}
