//! One small runnable system per connector pattern.
//!
//! Each demo runs its components on a fresh runtime and reports the
//! connector events of the resulting trace, so the protocol shows up line
//! by line in seq order.

use std::collections::BTreeMap;
use std::time::Duration;

use comet::components::{Periodic, PeriodicTask};
use comet::connectors::{
    BufferConnector, CallbackConnector, QueueConnector, QueueSender, ReplyConnector,
};
use comet::ids::{ObjectClass, ObjectId};
use comet::runtime::{
    Behavior, ComponentDecl, ComponentHandle, ComponentScope, ConcurrencyType, EventKind,
    RoleStereotype, Runtime, SystemTrace, TraceEvent,
};
use comet::BehaviorError;

const DEADLINE: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemoRun {
    /// Connector events only: `seq \t conduit \t kind \t digest`.
    pub trace: Vec<String>,
    pub summary: Vec<String>,
}

impl DemoRun {
    pub fn render(&self) -> String {
        let mut out = String::new();
        for line in self.trace.iter().chain(&self.summary) {
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

pub trait Demo: Send + Sync {
    fn name(&self) -> &'static str;
    fn about(&self) -> &'static str;
    fn run(&self, n: usize) -> Result<DemoRun, String>;
}

pub struct DemoRegistry {
    demos: Vec<Box<dyn Demo>>,
}

impl DemoRegistry {
    pub fn empty() -> Self {
        DemoRegistry { demos: Vec::new() }
    }

    /// One demo per connector kind, plus the periodic component.
    pub fn standard() -> Self {
        let mut r = DemoRegistry::empty();
        r.register(Box::new(BufferDemo))
            .register(Box::new(QueueDemo))
            .register(Box::new(ReplyDemo))
            .register(Box::new(CallbackDemo))
            .register(Box::new(PeriodicDemo));
        r
    }

    /// A demo with the same name replaces the earlier one.
    pub fn register(&mut self, demo: Box<dyn Demo>) -> &mut Self {
        self.demos.retain(|d| d.name() != demo.name());
        self.demos.push(demo);
        self
    }

    pub fn get(&self, name: &str) -> Option<&dyn Demo> {
        self.demos
            .iter()
            .find(|d| d.name() == name)
            .map(|d| d.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.demos.iter().map(|d| d.name()).collect()
    }
}

fn spawn(
    rt: &Runtime,
    name: &str,
    role: RoleStereotype,
    behavior: impl Behavior,
) -> Result<ComponentHandle, String> {
    let h = rt
        .spawn_component(
            ComponentDecl::active(name, role, ConcurrencyType::EventDriven),
            &[],
        )
        .map_err(|e| e.to_string())?;
    rt.attach_behavior(&h, Box::new(behavior))
        .map_err(|e| e.to_string())?;
    Ok(h)
}

/// Wait for `finishers` to end by themselves, then stop everything else.
fn finish(rt: &Runtime, finishers: &[ComponentHandle]) -> Result<SystemTrace, String> {
    if !rt.wait_stopped(finishers, DEADLINE) {
        rt.abort(Duration::from_millis(200));
        return Err("demo did not finish in time".into());
    }
    let trace = rt.shutdown_default();
    let failed: Vec<&TraceEvent> = trace
        .by_kind(EventKind::Stop)
        .filter(|e| {
            e.payload_digest.starts_with("error:") || e.payload_digest.starts_with("panic:")
        })
        .collect();
    match failed.first() {
        Some(e) => Err(format!("{} stopped with {}", e.source, e.payload_digest)),
        None => Ok(trace),
    }
}

fn connector_lines(rt: &Runtime, trace: &SystemTrace) -> Vec<String> {
    let labels: BTreeMap<ObjectId, String> =
        rt.conduits().into_iter().map(|c| (c.id, c.label)).collect();
    trace
        .iter()
        .filter(|e| e.source.class == ObjectClass::Conduit)
        .map(|e| {
            let label = labels
                .get(&e.source)
                .cloned()
                .unwrap_or_else(|| e.source.to_string());
            format!("{}\t{label}\t{}\t{}", e.seq, e.kind, e.payload_digest)
        })
        .collect()
}

struct BufferDemo;

impl Demo for BufferDemo {
    fn name(&self) -> &'static str {
        "buffer"
    }

    fn about(&self) -> &'static str {
        "producer hands n messages over a one-slot buffer; each send waits for its receive"
    }

    fn run(&self, n: usize) -> Result<DemoRun, String> {
        let rt = Runtime::new();
        let mut buffer = BufferConnector::<usize>::new(&rt, "buffer");
        let mut tx = buffer.sender().map_err(|e| e.to_string())?;
        let mut rx = buffer.receiver().map_err(|e| e.to_string())?;
        let producer = spawn(
            &rt,
            "producer",
            RoleStereotype::Algorithm,
            move |_: &ComponentScope| {
                for i in 0..n {
                    tx.send(i)?;
                }
                Ok(())
            },
        )?;
        let consumer = spawn(
            &rt,
            "consumer",
            RoleStereotype::Algorithm,
            move |_: &ComponentScope| {
                for _ in 0..n {
                    rx.receive()?;
                }
                Ok(())
            },
        )?;
        let handles = [producer, consumer];
        rt.start_all(&handles).map_err(|e| e.to_string())?;
        let trace = finish(&rt, &handles)?;
        Ok(DemoRun {
            trace: connector_lines(&rt, &trace),
            summary: vec![format!("{n} messages handed over one at a time")],
        })
    }
}

const QUEUE_CAPACITY: usize = 2;

struct QueueDemo;

impl Demo for QueueDemo {
    fn name(&self) -> &'static str {
        "queue"
    }

    fn about(&self) -> &'static str {
        "producer runs ahead of a consumer by at most the queue capacity (2)"
    }

    fn run(&self, n: usize) -> Result<DemoRun, String> {
        let rt = Runtime::new();
        let mut queue = QueueConnector::<usize>::new(&rt, "queue", QUEUE_CAPACITY)
            .map_err(|e| e.to_string())?;
        let mut tx = queue.sender().map_err(|e| e.to_string())?;
        let mut rx = queue.receiver().map_err(|e| e.to_string())?;
        let producer = spawn(
            &rt,
            "producer",
            RoleStereotype::Algorithm,
            move |_: &ComponentScope| {
                for i in 0..n {
                    tx.send(i)?;
                }
                Ok(())
            },
        )?;
        let consumer = spawn(
            &rt,
            "consumer",
            RoleStereotype::Algorithm,
            move |_: &ComponentScope| {
                for expected in 0..n {
                    let got = rx.receive()?;
                    if got != expected {
                        return Err(BehaviorError::Failed(format!(
                            "got {got}, expected {expected}"
                        )));
                    }
                }
                Ok(())
            },
        )?;
        let handles = [producer, consumer];
        rt.start_all(&handles).map_err(|e| e.to_string())?;
        let trace = finish(&rt, &handles)?;
        let high_water = queue.handle().stats().high_water;
        if high_water > QUEUE_CAPACITY {
            return Err(format!("queue held {high_water} messages"));
        }
        Ok(DemoRun {
            trace: connector_lines(&rt, &trace),
            summary: vec![format!(
                "{n} messages received in send order; never more than {QUEUE_CAPACITY} queued"
            )],
        })
    }
}

struct ReplyDemo;

impl Demo for ReplyDemo {
    fn name(&self) -> &'static str {
        "reply"
    }

    fn about(&self) -> &'static str {
        "client makes n requests; each waits for the server's reply"
    }

    fn run(&self, n: usize) -> Result<DemoRun, String> {
        let rt = Runtime::new();
        let mut conn = ReplyConnector::<usize, usize>::new(&rt, "reply");
        let mut client = conn.sender().map_err(|e| e.to_string())?;
        let mut server = conn.receiver().map_err(|e| e.to_string())?;
        let asker = spawn(
            &rt,
            "client",
            RoleStereotype::Control,
            move |_: &ComponentScope| {
                for i in 0..n {
                    let answer = client.request(i)?;
                    if answer != i * i {
                        return Err(BehaviorError::Failed(format!(
                            "{i} squared is not {answer}"
                        )));
                    }
                }
                Ok(())
            },
        )?;
        let squarer = spawn(
            &rt,
            "server",
            RoleStereotype::Coordinator,
            move |_: &ComponentScope| {
                for _ in 0..n {
                    server.serve(|x| x * x)?;
                }
                Ok(())
            },
        )?;
        let handles = [asker, squarer];
        rt.start_all(&handles).map_err(|e| e.to_string())?;
        let trace = finish(&rt, &handles)?;
        let summary = trace
            .by_kind(EventKind::Reply)
            .map(|e| {
                let mut words = e.payload_digest.split(' ');
                let reply = words.next().unwrap_or("?");
                let request = words.nth(1).unwrap_or("?");
                format!("pair: request {request} -> reply {reply}")
            })
            .collect();
        Ok(DemoRun {
            trace: connector_lines(&rt, &trace),
            summary,
        })
    }
}

const CLIENTS: usize = 2;

struct CallbackDemo;

impl Demo for CallbackDemo {
    fn name(&self) -> &'static str {
        "callback"
    }

    fn about(&self) -> &'static str {
        "two clients each queue n requests, then collect the replies addressed to them"
    }

    fn run(&self, n: usize) -> Result<DemoRun, String> {
        let rt = Runtime::new();
        let mut conn = CallbackConnector::<String, String>::new(&rt, "callback", 16)
            .map_err(|e| e.to_string())?;
        let mut server = conn.receiver().map_err(|e| e.to_string())?;
        let mut handles = Vec::new();
        for k in 1..=CLIENTS {
            let mut client = conn.sender().map_err(|e| e.to_string())?;
            let name = format!("client_{k}");
            handles.push(spawn(
                &rt,
                &name,
                RoleStereotype::Control,
                move |_: &ComponentScope| {
                    let me = client.client_id().to_string();
                    for i in 0..n {
                        client.send(format!("{me} request {i}"))?;
                    }
                    for i in 0..n {
                        let reply = client.accept()?;
                        if reply != format!("echo {me} request {i}") {
                            return Err(BehaviorError::Failed(format!("{me} got `{reply}`")));
                        }
                    }
                    Ok(())
                },
            )?);
        }
        handles.push(spawn(
            &rt,
            "server",
            RoleStereotype::Coordinator,
            move |_: &ComponentScope| {
                for _ in 0..CLIENTS * n {
                    server.serve(|req| format!("echo {req}"))?;
                }
                Ok(())
            },
        )?);
        rt.start_all(&handles).map_err(|e| e.to_string())?;
        let trace = finish(&rt, &handles)?;
        Ok(DemoRun {
            trace: connector_lines(&rt, &trace),
            summary: callback_pairs(&trace)?,
        })
    }
}

/// Request/reply pairs recovered from the trace, grouped by client. A reply
/// must reach the client it names.
fn callback_pairs(trace: &SystemTrace) -> Result<Vec<String>, String> {
    let mut pairs: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for e in trace.by_kind(EventKind::Reply) {
        // `{reply} re {request} to {client} {outcome}`
        let words: Vec<&str> = e.payload_digest.split(' ').collect();
        let [reply, "re", request, "to", client, ..] = words[..] else {
            return Err(format!("unexpected reply digest `{}`", e.payload_digest));
        };
        let accepted_by = e
            .envelope
            .and_then(|env| {
                trace
                    .by_envelope(env)
                    .find(|a| a.kind == EventKind::ReceiveEnd)
            })
            .map(|a| a.payload_digest.clone())
            .unwrap_or_default();
        if !accepted_by.ends_with(&format!(" to {client}")) {
            return Err(format!(
                "reply {reply} for {client} was accepted as `{accepted_by}`"
            ));
        }
        pairs
            .entry(client.to_owned())
            .or_default()
            .push(format!("pair {client}: request {request} -> reply {reply}"));
    }
    Ok(pairs.into_values().flatten().collect())
}

struct Ticker {
    steps: usize,
    until: usize,
    out: QueueSender<String>,
}

impl PeriodicTask for Ticker {
    fn step(&mut self, _: &ComponentScope) -> Result<(), BehaviorError> {
        self.steps += 1;
        self.out.send(format!("tick {}", self.steps))?;
        Ok(())
    }

    fn is_done(&self) -> bool {
        self.steps >= self.until
    }
}

struct PeriodicDemo;

impl Demo for PeriodicDemo {
    fn name(&self) -> &'static str {
        "periodic"
    }

    fn about(&self) -> &'static str {
        "a task steps every 10 ms until it has stepped n times, reporting each tick on a queue"
    }

    fn run(&self, n: usize) -> Result<DemoRun, String> {
        let rt = Runtime::new();
        let mut ticks =
            QueueConnector::<String>::new(&rt, "ticks", n.max(1)).map_err(|e| e.to_string())?;
        let out = ticks.sender().map_err(|e| e.to_string())?;
        let mut rx = ticks.receiver().map_err(|e| e.to_string())?;
        let ticker = rt
            .spawn_component(
                ComponentDecl::active(
                    "ticker",
                    RoleStereotype::Algorithm,
                    ConcurrencyType::Periodic,
                ),
                &[],
            )
            .map_err(|e| e.to_string())?;
        let task = Ticker {
            steps: 0,
            until: n,
            out,
        };
        let (behavior, mut query) = Periodic::new(&rt, task, Duration::from_millis(10));
        rt.attach_behavior(&ticker, Box::new(behavior))
            .map_err(|e| e.to_string())?;
        let listener = spawn(
            &rt,
            "listener",
            RoleStereotype::Io,
            move |_: &ComponentScope| {
                for _ in 0..n {
                    rx.receive()?;
                }
                Ok(())
            },
        )?;
        rt.start_all(&[ticker.clone(), listener.clone()])
            .map_err(|e| e.to_string())?;
        // The ticker stays up to answer queries, so only the listener ends.
        if !rt.wait_stopped(std::slice::from_ref(&listener), DEADLINE) {
            rt.abort(Duration::from_millis(200));
            return Err("demo did not finish in time".into());
        }
        let done = query.is_done().map_err(|e| e.to_string())?;
        let trace = finish(&rt, &[listener])?;
        let steps = trace
            .by_source(ticker.id)
            .filter(|e| e.kind == EventKind::Step)
            .count();
        Ok(DemoRun {
            trace: connector_lines(&rt, &trace),
            summary: vec![format!("{steps} steps; done: {done}")],
        })
    }
}
