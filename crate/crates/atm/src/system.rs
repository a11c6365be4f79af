//! Wiring the ATM architecture to its behaviors, running scenarios, and
//! checking what came out.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::sync::mpsc;
use std::time::{Duration, Instant};

use comet::architecture::{
    instantiate, parse_spec, ArchitectureSpec, BehaviorRegistry, Built, InstantiateError,
    ParseError, TraceabilityMap, Wiring, WiringError,
};
use comet::components::{Periodic, ScriptedSource};
use comet::connectors::MessageTypes;
use comet::ids::ObjectId;
use comet::runtime::{ComponentHandle, EventKind, Runtime, SystemTrace, TraceEvent};
use comet::RuntimeError;

use crate::bank::{AccountsError, Bank};
use crate::controller::{AtmBehavior, AtmPorts, TransactionEntity};
use crate::devices::{CardReader, CashDispenser, Outcome, Outcomes, ReceiptPrinter, Touchscreen};
use crate::log::LogTask;
use crate::messages::*;
use crate::scenario::{Scenario, ScenarioError};
use crate::server::Server;

/// Elements that exist once no matter how many ATMs are attached.
pub const SHARED: [&str; 4] = ["server", "bank", "log", "log_queue"];

/// Every message tag the ATM architecture may use.
pub fn message_types() -> MessageTypes {
    let mut t = MessageTypes::new();
    t.one_way::<CardInserted>("CardInserted")
        .one_way::<ReturnCard>("ReturnCard")
        .one_way::<Receipt>("Receipt")
        .one_way::<Dispense>("Dispense")
        .one_way::<LogRecord>("LogRecord")
        .round_trip::<ScreenPrompt, ScreenInput>("ScreenDialog")
        .round_trip::<ServerRequest, ServerResponse>("ServerDialog");
    t
}

/// Split `atm_3` into (`atm`, 3). Names without a numeric suffix are copy 1.
pub fn base_name(name: &str) -> (&str, usize) {
    match name.rsplit_once('_') {
        Some((base, k)) if !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()) => {
            match k.parse::<usize>() {
                Ok(k) if k >= 2 => (base, k),
                _ => (name, 1),
            }
        }
        _ => (name, 1),
    }
}

fn copy_name(name: &str, k: usize, shared: &[&str]) -> String {
    if k == 1 || shared.contains(&name) {
        name.to_owned()
    } else {
        format!("{name}_{k}")
    }
}

/// `n` copies of everything in `spec` except the `shared` elements. Copy 1
/// keeps the original names; copy k ≥ 2 gets the suffix `_k`, and its
/// bindings and host follow the renaming.
pub fn replicate(spec: &ArchitectureSpec, n: usize, shared: &[&str]) -> ArchitectureSpec {
    let mut out = spec.clone();
    for k in 2..=n {
        for c in &spec.connectors {
            if !shared.contains(&c.name.as_str()) {
                let mut c = c.clone();
                c.name = copy_name(&c.name, k, shared);
                out.connectors.push(c);
            }
        }
        for c in &spec.components {
            if !shared.contains(&c.name.as_str()) {
                let mut c = c.clone();
                c.name = copy_name(&c.name, k, shared);
                c.host = c.host.map(|h| copy_name(&h, k, shared));
                for b in &mut c.bindings {
                    b.connector = copy_name(&b.connector, k, shared);
                }
                out.components.push(c);
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Wall-clock budget for the scenarios; past it the run is aborted.
    pub timeout: Duration,
    /// How long shutdown waits for contexts before forcing them.
    pub grace: Duration,
    /// Seeds the devices' timing jitter. No checked property depends on it.
    pub seed: u64,
    pub jitter: Duration,
    pub log_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            timeout: Duration::from_secs(10),
            grace: Duration::from_secs(2),
            seed: 0,
            jitter: Duration::from_millis(2),
            log_path: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("architecture: {0}")]
    Arch(#[from] ParseError),
    #[error(transparent)]
    Accounts(#[from] AccountsError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("instantiation failed: {0}")]
    Instantiate(#[from] InstantiateError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("{0}")]
    Setup(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConservationReport {
    pub initial: Cents,
    /// Total across accounts when the server stopped; `None` if it never
    /// reported (it was forced to stop).
    pub final_total: Option<Cents>,
    pub dispensed: Cents,
    /// Lowest balance seen after any mutation, or at the start.
    pub min_balance: Option<Cents>,
}

impl ConservationReport {
    pub fn holds(&self) -> bool {
        self.final_total == Some(self.initial - self.dispensed)
            && self.min_balance.is_none_or(|m| m >= 0)
    }
}

impl fmt::Display for ConservationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<Cents>| v.map_or("unknown".to_owned(), |v| v.to_string());
        write!(
            f,
            "initial {} = final {} + dispensed {}: {}; min balance {}",
            self.initial,
            show(self.final_total),
            self.dispensed,
            if self.holds() { "holds" } else { "VIOLATED" },
            show(self.min_balance),
        )
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub spec: ArchitectureSpec,
    pub trace: SystemTrace,
    pub map: TraceabilityMap,
    /// Conduit ids per connector, in creation order.
    pub conduits: BTreeMap<String, Vec<ObjectId>>,
    /// Contexts created for components, companions excluded.
    pub contexts: usize,
    pub log: Vec<String>,
    pub final_store: Option<Bank>,
    /// (atm, amount) in dispensing order.
    pub dispensed: Vec<(String, Cents)>,
    pub receipts: Vec<(String, Receipt)>,
    pub cards_returned: Vec<(String, String)>,
    pub sessions_expected: usize,
    pub sessions_ended: usize,
    pub timed_out: bool,
    /// Components that ended with an error, panicked or had to be forced.
    pub failures: Vec<String>,
    pub conservation: ConservationReport,
    pub elapsed: Duration,
}

impl RunReport {
    pub fn succeeded(&self) -> bool {
        !self.timed_out && self.failures.is_empty() && self.conservation.holds()
    }

    pub fn exit_code(&self) -> i32 {
        if self.succeeded() {
            0
        } else {
            1
        }
    }

    /// Events of `kind` on any conduit of connector `name`.
    pub fn connector_events(&self, name: &str, kind: EventKind) -> Vec<&TraceEvent> {
        let ids = self.conduits.get(name).cloned().unwrap_or_default();
        self.trace
            .iter()
            .filter(|e| e.kind == kind && ids.contains(&e.source))
            .collect()
    }

    pub fn dispensed_total(&self) -> Cents {
        self.dispensed.iter().map(|(_, a)| a).sum()
    }

    /// One line per problem, empty on success.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.timed_out {
            out.push(format!(
                "timed out: {} of {} sessions finished",
                self.sessions_ended, self.sessions_expected
            ));
        }
        out.extend(self.failures.iter().cloned());
        if !self.conservation.holds() {
            out.push(format!("conservation: {}", self.conservation));
        }
        out
    }
}

/// Parse the three input files and run `atms` copies of the ATM, each
/// replaying the same scenario.
pub fn run_scenario(
    arch: &str,
    accounts: &str,
    scenario: &str,
    atms: usize,
    config: &RunConfig,
) -> Result<RunReport, RunError> {
    let spec = parse_spec(arch)?;
    let bank = Bank::parse(accounts)?;
    let scenario = Scenario::parse(scenario)?;
    multi_atm_run(&spec, bank, &vec![scenario; atms.max(1)], config)
}

/// Run one ATM per scenario, all sharing the server and the log.
pub fn multi_atm_run(
    spec: &ArchitectureSpec,
    bank: Bank,
    scenarios: &[Scenario],
    config: &RunConfig,
) -> Result<RunReport, RunError> {
    if scenarios.is_empty() {
        return Err(RunError::Setup(
            "at least one ATM scenario is required".into(),
        ));
    }
    let spec = if scenarios.len() > 1 {
        replicate(spec, scenarios.len(), &SHARED)
    } else {
        spec.clone()
    };
    let (tx, rx) = mpsc::channel();
    let registry = behaviors(&spec, &bank, scenarios, config, &tx)?;
    drop(tx);

    let runtime = Runtime::new();
    let instance = instantiate(&spec, &message_types(), &registry, &runtime)?;
    drop(registry);
    let started = Instant::now();
    instance.start()?;

    let expected: usize = scenarios.iter().map(|s| s.sessions.len()).sum();
    let deadline = started + config.timeout;
    let mut outcomes = Vec::new();
    let mut ended = 0;
    while ended < expected {
        let Some(left) = deadline.checked_duration_since(Instant::now()) else {
            break;
        };
        match rx.recv_timeout(left) {
            Ok(o) => {
                ended += matches!(o, Outcome::SessionEnded { .. }) as usize;
                outcomes.push(o);
            }
            Err(_) => break,
        }
    }
    let readers: Vec<ComponentHandle> = instance
        .handles
        .iter()
        .filter(|h| base_name(&h.name).0 == "card_reader")
        .cloned()
        .collect();
    let left = deadline.saturating_duration_since(Instant::now());
    let finished = ended == expected && runtime.wait_stopped(&readers, left);
    let trace = if finished {
        runtime.shutdown(config.grace)
    } else {
        runtime.abort(config.grace)
    };
    let elapsed = started.elapsed();
    let contexts = runtime.component_context_count();
    outcomes.extend(rx.try_iter());

    let mut report = RunReport {
        failures: failures(&trace, &instance.map),
        spec,
        trace,
        map: instance.map.clone(),
        conduits: instance
            .conduits
            .iter()
            .map(|(k, v)| (k.clone(), v.iter().map(|h| h.id).collect()))
            .collect(),
        contexts,
        log: Vec::new(),
        final_store: None,
        dispensed: Vec::new(),
        receipts: Vec::new(),
        cards_returned: Vec::new(),
        sessions_expected: expected,
        sessions_ended: ended,
        timed_out: !finished,
        conservation: ConservationReport {
            initial: bank.total(),
            final_total: None,
            dispensed: 0,
            min_balance: None,
        },
        elapsed,
    };
    for o in outcomes {
        match o {
            Outcome::Dispensed { atm, amount } => report.dispensed.push((atm, amount)),
            Outcome::Printed { atm, receipt } => report.receipts.push((atm, receipt)),
            Outcome::CardReturned { atm, card } => report.cards_returned.push((atm, card)),
            Outcome::SessionEnded { .. } => {}
            Outcome::LogLine(line) => report.log.push(line),
            Outcome::FinalStore(store) => report.final_store = Some(store),
        }
    }
    let initial_min = bank.balances().values().copied().min();
    report.conservation.dispensed = report.dispensed_total();
    report.conservation.final_total = report.final_store.as_ref().map(Bank::total);
    report.conservation.min_balance = report
        .final_store
        .as_ref()
        .and_then(Bank::min_balance_seen)
        .into_iter()
        .chain(initial_min)
        .min();
    Ok(report)
}

fn failures(trace: &SystemTrace, map: &TraceabilityMap) -> Vec<String> {
    trace
        .iter()
        .filter(|e| match e.kind {
            EventKind::ForcedStop => true,
            EventKind::Stop => {
                e.payload_digest.starts_with("error:") || e.payload_digest.starts_with("panic:")
            }
            _ => false,
        })
        .map(|e| {
            let who = map.backward(e.source).unwrap_or("?");
            format!("{who}: {} ({})", e.kind, e.payload_digest)
        })
        .collect()
}

fn wiring_error(e: impl fmt::Display) -> WiringError {
    WiringError::Other(e.to_string())
}

/// One factory per component in `spec`, chosen by its base name.
fn behaviors(
    spec: &ArchitectureSpec,
    bank: &Bank,
    scenarios: &[Scenario],
    config: &RunConfig,
    outcomes: &Outcomes,
) -> Result<BehaviorRegistry, RunError> {
    let mut registry = BehaviorRegistry::new();
    for c in &spec.components {
        let (base, k) = base_name(&c.name);
        let Some(scenario) = scenarios.get(k - 1) else {
            return Err(RunError::Setup(format!("no scenario for `{}`", c.name)));
        };
        let suffix = if k == 1 {
            String::new()
        } else {
            format!("_{k}")
        };
        let atm = format!("atm{suffix}");
        let tx = outcomes.clone();
        match base {
            "atm" => {
                let transaction = format!("transaction{suffix}");
                registry.register(&c.name, move |w: &mut Wiring| {
                    let ports = AtmPorts {
                        card_in: w.buffer_receiver("card_in")?,
                        card_out: w.buffer_sender("card_out")?,
                        screen: w.reply_sender("screen")?,
                        printer: w.buffer_sender("printer")?,
                        dispenser: w.buffer_sender("dispenser")?,
                        log: w.queue_sender("log")?,
                        bank: w.callback_sender("bank")?,
                    };
                    let txn = w.take_passive::<TransactionEntity>(&transaction)?;
                    Ok(Built::active(AtmBehavior::new(
                        w.name(),
                        ports,
                        txn,
                        tx.clone(),
                    )))
                });
            }
            "transaction" => {
                registry.register(&c.name, |w: &mut Wiring| {
                    let host = w
                        .host()
                        .ok_or_else(|| wiring_error("transaction needs a host"))?;
                    Ok(Built::passive(TransactionEntity::new(None, host)))
                });
            }
            "server" => {
                let bank = bank.clone();
                registry.register(&c.name, move |w: &mut Wiring| {
                    Ok(Built::active(Server {
                        bank: bank.clone(),
                        requests: w.callback_receiver("requests")?,
                        outcomes: tx.clone(),
                    }))
                });
            }
            "card_reader" => {
                let events = scenario.card_reader_events();
                let (seed, jitter) = (config.seed ^ ((k as u64) << 32), config.jitter);
                registry.register(&c.name, move |w: &mut Wiring| {
                    let mut source = ScriptedSource::new(events.clone());
                    if !jitter.is_zero() {
                        source = source.with_jitter(seed, jitter);
                    }
                    Ok(Built::active(CardReader {
                        atm: atm.clone(),
                        source,
                        inserted: w.buffer_sender("inserted")?,
                        returned: w.buffer_receiver("returned")?,
                        outcomes: tx.clone(),
                    }))
                });
            }
            "touchscreen" => {
                let sessions = scenario.screen_sessions();
                registry.register(&c.name, move |w: &mut Wiring| {
                    Ok(Built::active(Touchscreen::new(
                        sessions.clone(),
                        w.reply_receiver("input")?,
                    )))
                });
            }
            "receipt_printer" => {
                registry.register(&c.name, move |w: &mut Wiring| {
                    Ok(Built::active(ReceiptPrinter {
                        atm: atm.clone(),
                        paper: w.buffer_receiver("paper")?,
                        outcomes: tx.clone(),
                    }))
                });
            }
            "cash_dispenser" => {
                registry.register(&c.name, move |w: &mut Wiring| {
                    Ok(Built::active(CashDispenser {
                        atm: atm.clone(),
                        cash: w.buffer_receiver("cash")?,
                        outcomes: tx.clone(),
                    }))
                });
            }
            "log" => {
                let path = config.log_path.clone();
                registry.register(&c.name, move |w: &mut Wiring| {
                    let period = Duration::from_millis(w.param_or("period_ms", 20u64)?);
                    let mut task = LogTask::new(w.queue_receiver("records")?, tx.clone());
                    if let Some(p) = &path {
                        task = task
                            .with_file(p)
                            .map_err(|e| wiring_error(format!("{}: {e}", p.display())))?;
                    }
                    let (periodic, _query) = Periodic::new(w.runtime(), task, period);
                    Ok(Built::active(periodic))
                });
            }
            // Left unregistered: instantiation reports it as missing.
            _ => {}
        }
    }
    Ok(registry)
}

/// Per-element event counts, handy for summaries.
pub fn stream_lengths(report: &RunReport) -> BTreeMap<String, usize> {
    comet::architecture::trace_to_design(&report.map, &report.trace)
        .map(|s| s.into_iter().map(|(k, v)| (k, v.len())).collect())
        .unwrap_or_default()
}
