//! A sequential reference model of one ATM, written independently of the
//! concurrent implementation, used as the oracle for end-to-end runs.

#![allow(dead_code)]

use std::collections::BTreeMap;

use atm::messages::Cents;
use atm::scenario::{Action, Scenario};

#[derive(Debug, Default, PartialEq, Eq)]
pub struct Expected {
    pub balances: BTreeMap<String, Cents>,
    pub dispensed: Vec<Cents>,
    pub receipts: usize,
    /// Log event names, in order.
    pub events: Vec<String>,
}

/// Accounts text is parsed by hand here, not with `Bank::parse`.
pub fn reference(accounts: &str, scenario: &Scenario) -> Expected {
    let mut pins: BTreeMap<String, String> = BTreeMap::new();
    let mut linked: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut out = Expected::default();
    for line in accounts
        .lines()
        .map(|l| l.split('#').next().unwrap().trim())
    {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() == 8 {
            pins.insert(f[1].into(), f[3].into());
            linked.entry(f[1].into()).or_default().push(f[5].into());
            out.balances.insert(f[5].into(), f[7].parse().unwrap());
        }
    }
    for s in &scenario.sessions {
        let mut inputs = s
            .steps
            .iter()
            .filter(|st| !matches!(st.action, Action::TakeCash | Action::TakeCard));
        let pin = match inputs.next().map(|st| &st.action) {
            Some(Action::EnterPin(p)) => p.clone(),
            Some(Action::ScreenFault) => {
                out.events.push("screen_fault".into());
                out.events.push("card_returned".into());
                continue;
            }
            _ => {
                out.events.push("cancelled".into());
                out.events.push("card_returned".into());
                continue;
            }
        };
        if pins.get(&s.card) != Some(&pin) {
            out.events.push("pin_bad".into());
            out.events.push("card_returned".into());
            continue;
        }
        out.events.push("pin_ok".into());
        let accounts = &linked[&s.card];
        let pick = |a: &Option<String>| match a {
            None => Some(accounts[0].clone()),
            Some(a) if accounts.contains(a) => Some(a.clone()),
            Some(_) => None,
        };
        match inputs.next().map(|st| &st.action) {
            Some(Action::ChooseWithdraw { amount, account }) => match pick(account) {
                None => out.events.push("unknown_account".into()),
                Some(a) => {
                    let bal = out.balances.get_mut(&a).unwrap();
                    if *amount <= *bal {
                        *bal -= amount;
                        out.events.push("withdraw".into());
                        out.dispensed.push(*amount);
                        out.receipts += 1;
                    } else {
                        out.events.push("declined".into());
                    }
                }
            },
            Some(Action::ChooseBalance { account }) => match pick(account) {
                None => out.events.push("unknown_account".into()),
                Some(_) => {
                    out.events.push("balance".into());
                    out.receipts += 1;
                }
            },
            Some(Action::ChooseTransfer { from, to, amount }) => match pick(&Some(from.clone())) {
                None => out.events.push("unknown_account".into()),
                Some(from) if !out.balances.contains_key(to) => {
                    let _ = from;
                    out.events.push("unknown_account".into());
                }
                Some(from) => {
                    if *amount <= out.balances[&from] {
                        *out.balances.get_mut(&from).unwrap() -= amount;
                        *out.balances.get_mut(to).unwrap() += amount;
                        out.events.push("transfer".into());
                        out.receipts += 1;
                    } else {
                        out.events.push("declined".into());
                    }
                }
            },
            Some(Action::ScreenFault) => out.events.push("screen_fault".into()),
            _ => out.events.push("cancelled".into()),
        }
        out.events.push("card_returned".into());
    }
    out
}

/// The event column of each log line (`seq  atm  event  detail`).
pub fn log_events<'a>(log: &'a [String], atm: &str) -> Vec<&'a str> {
    log.iter()
        .filter_map(|l| {
            let f: Vec<&str> = l.split("  ").collect();
            (f.get(1) == Some(&atm)).then(|| f[2])
        })
        .collect()
}
