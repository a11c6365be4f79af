use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use super::*;
use crate::connectors::{make_buffer, make_queue, QueueSender};
use crate::error::{BehaviorError, ConnectorError};
use crate::runtime::{
    Behavior, ComponentDecl, ComponentHandle, ComponentScope, ConcurrencyType, EventKind,
    RoleStereotype, Runtime, SystemTrace,
};

fn spawn(
    rt: &Runtime,
    name: &str,
    cc: ConcurrencyType,
    behavior: Box<dyn Behavior>,
) -> ComponentHandle {
    let role = match cc {
        ConcurrencyType::EventDriven | ConcurrencyType::Periodic => RoleStereotype::Io,
        _ => RoleStereotype::Control,
    };
    let h = rt
        .spawn_component(ComponentDecl::active(name, role, cc), &[])
        .unwrap();
    rt.attach_behavior(&h, behavior).unwrap();
    h
}

fn steps(trace: &SystemTrace, h: &ComponentHandle) -> usize {
    trace
        .by_source(h.id)
        .filter(|e| e.kind == EventKind::Step)
        .count()
}

// ---- periodic -----------------------------------------------------------

struct CountTo {
    n: u64,
    done_at: u64,
    stopped: Option<mpsc::Sender<u64>>,
}

impl PeriodicTask for CountTo {
    fn step(&mut self, _: &ComponentScope) -> Result<(), BehaviorError> {
        self.n += 1;
        Ok(())
    }

    fn is_done(&self) -> bool {
        self.n >= self.done_at
    }

    fn on_stop(&mut self, _: &ComponentScope) {
        if let Some(tx) = self.stopped.take() {
            let _ = tx.send(self.n);
        }
    }
}

fn count_to(done_at: u64) -> CountTo {
    CountTo {
        n: 0,
        done_at,
        stopped: None,
    }
}

#[test]
fn periodic_stops_scheduling_once_done() {
    let rt = Runtime::new();
    let period = Duration::from_millis(10);
    let (behavior, mut query) = Periodic::new(&rt, count_to(3), period);
    let h = spawn(&rt, "ticker", ConcurrencyType::Periodic, Box::new(behavior));
    rt.start_all(std::slice::from_ref(&h)).unwrap();

    let deadline = Instant::now() + Duration::from_secs(5);
    while !query.is_done().unwrap() {
        assert!(Instant::now() < deadline);
        thread::sleep(period);
    }
    // Give a would-be fourth step ample time to show up.
    thread::sleep(period * 5);
    assert_eq!(query.status().unwrap().step_count, 3);
    let trace = rt.shutdown_default();
    assert_eq!(steps(&trace, &h), 3);
    let digests: Vec<_> = trace
        .by_source(h.id)
        .filter(|e| e.kind == EventKind::Step)
        .map(|e| e.payload_digest.as_str())
        .collect();
    assert_eq!(digests, ["step 1", "step 2", "step 3"]);
}

#[test]
fn pacemaker_runs_on_its_own_context() {
    let rt = Runtime::new();
    let (behavior, mut q) = Periodic::new(&rt, count_to(2), Duration::from_millis(5));
    let h = spawn(&rt, "ticker", ConcurrencyType::Periodic, Box::new(behavior));
    rt.start_all(std::slice::from_ref(&h)).unwrap();
    let (pid, pctx) = h.companion.unwrap();
    let deadline = Instant::now() + Duration::from_secs(5);
    while !q.is_done().unwrap() {
        assert!(Instant::now() < deadline);
        thread::sleep(Duration::from_millis(5));
    }
    let trace = rt.shutdown_default();
    let pace_start = trace
        .by_source(pid)
        .find(|e| e.kind == EventKind::Start)
        .expect("pacemaker started");
    assert_eq!(pace_start.context, Some(pctx));
    assert_ne!(pctx, h.context);
    for e in trace.by_source(h.id).filter(|e| e.kind == EventKind::Step) {
        assert_eq!(e.context, Some(h.context));
    }
}

#[test]
fn is_done_query_is_answered_while_pacemaker_sleeps() {
    let rt = Runtime::new();
    let period = Duration::from_millis(400);
    let (behavior, mut query) = Periodic::new(&rt, count_to(u64::MAX), period);
    let h = spawn(&rt, "slow", ConcurrencyType::Periodic, Box::new(behavior));
    rt.start_all(std::slice::from_ref(&h)).unwrap();
    // The pacemaker is now inside its first 400 ms sleep.
    for _ in 0..5 {
        let t = Instant::now();
        assert!(!query.is_done().unwrap());
        assert!(t.elapsed() < period / 10, "query took {:?}", t.elapsed());
    }
    rt.shutdown_default();
}

#[test]
fn already_done_task_never_steps() {
    let rt = Runtime::new();
    let (tx, rx) = mpsc::channel();
    let task = CountTo {
        n: 0,
        done_at: 0,
        stopped: Some(tx),
    };
    let (behavior, mut query) = Periodic::new(&rt, task, Duration::from_millis(5));
    let h = spawn(&rt, "idle", ConcurrencyType::Periodic, Box::new(behavior));
    rt.start_all(std::slice::from_ref(&h)).unwrap();
    assert_eq!(
        query.status().unwrap(),
        PeriodicStatus {
            step_count: 0,
            is_done: true
        }
    );
    thread::sleep(Duration::from_millis(30));
    let trace = rt.shutdown_default();
    assert_eq!(steps(&trace, &h), 0);
    assert_eq!(rx.recv().unwrap(), 0, "on_stop runs on shutdown");
}

#[test]
fn on_stop_runs_when_stop_precedes_the_first_step() {
    let rt = Runtime::new();
    let (tx, rx) = mpsc::channel();
    let task = CountTo {
        n: 0,
        done_at: u64::MAX,
        stopped: Some(tx),
    };
    let (behavior, _query) = Periodic::new(&rt, task, Duration::from_secs(60));
    let h = spawn(&rt, "late", ConcurrencyType::Periodic, Box::new(behavior));
    rt.signal_stop();
    rt.start_all(&[h]).unwrap();
    rt.shutdown_default();
    assert_eq!(rx.recv_timeout(Duration::from_secs(1)), Ok(0));
}

#[test]
fn query_after_shutdown_reports_stop() {
    let rt = Runtime::new();
    let (behavior, mut query) = Periodic::new(&rt, count_to(u64::MAX), Duration::from_millis(5));
    let h = spawn(&rt, "p", ConcurrencyType::Periodic, Box::new(behavior));
    rt.start_all(&[h]).unwrap();
    rt.shutdown_default();
    assert_eq!(query.is_done(), Err(ConnectorError::Stopped));
}

// ---- demand-driven ------------------------------------------------------

#[test]
fn demand_component_handles_queued_messages_in_order() {
    let rt = Runtime::new();
    let (mut tx, rx, _) = make_queue::<&'static str>(&rt, 8).unwrap();
    for m in ["a", "b", "c"] {
        tx.send(m).unwrap();
    }
    let (seen_tx, seen_rx) = mpsc::channel();
    let behavior = DemandDriven::new(rx, move |m, _: &ComponentScope| {
        seen_tx.send(m).unwrap();
        Ok(())
    });
    let h = spawn(
        &rt,
        "ctl",
        ConcurrencyType::DemandDriven,
        Box::new(behavior),
    );
    rt.start_all(std::slice::from_ref(&h)).unwrap();
    let seen: Vec<_> = (0..3).map(|_| seen_rx.recv().unwrap()).collect();
    assert_eq!(seen, ["a", "b", "c"]);
    let trace = rt.shutdown_default();
    assert_eq!(steps(&trace, &h), 3);
}

#[test]
fn demand_component_exits_on_stop_while_blocked() {
    let rt = Runtime::new();
    let (_tx, rx, qh) = make_queue::<u32>(&rt, 8).unwrap();
    let h = spawn(
        &rt,
        "ctl",
        ConcurrencyType::DemandDriven,
        Box::new(DemandDriven::new(rx, |_, _: &ComponentScope| Ok(()))),
    );
    rt.start_all(std::slice::from_ref(&h)).unwrap();
    let deadline = Instant::now() + Duration::from_secs(5);
    while qh.stats().blocked_receivers == 0 {
        assert!(Instant::now() < deadline);
        thread::sleep(Duration::from_millis(1));
    }
    let trace = rt.shutdown_default();
    let stop = trace
        .by_source(h.id)
        .find(|e| e.kind == EventKind::Stop)
        .unwrap();
    assert_eq!(stop.payload_digest, "stopped");
    assert_eq!(steps(&trace, &h), 0);
}

#[test]
fn demand_handler_calls_never_overlap() {
    let rt = Runtime::new();
    let (tx, rx, _) = make_queue::<u32>(&rt, 4).unwrap();
    let h = spawn(
        &rt,
        "ctl",
        ConcurrencyType::DemandDriven,
        Box::new(DemandDriven::new(rx, |m, s: &ComponentScope| {
            s.emit(EventKind::Custom, format!("begin {m}"));
            s.emit(EventKind::Custom, format!("end {m}"));
            Ok(())
        })),
    );
    rt.start_all(std::slice::from_ref(&h)).unwrap();
    let producers: Vec<_> = (0..4)
        .map(|p| {
            let mut tx: QueueSender<u32> = tx.clone();
            thread::spawn(move || {
                for i in 0..25 {
                    tx.send(p * 100 + i).unwrap();
                }
            })
        })
        .collect();
    for p in producers {
        p.join().unwrap();
    }
    drop(tx);
    assert!(rt.wait_stopped(std::slice::from_ref(&h), Duration::from_secs(5)));
    let trace = rt.shutdown_default();
    let mine: Vec<_> = trace
        .by_source(h.id)
        .filter(|e| matches!(e.kind, EventKind::Custom | EventKind::Step))
        .collect();
    assert_eq!(mine.len(), 300);
    for chunk in mine.chunks(3) {
        let m = chunk[0].payload_digest.strip_prefix("begin ").unwrap();
        assert_eq!(chunk[1].payload_digest, format!("end {m}"));
        assert_eq!(chunk[2].kind, EventKind::Step);
    }
}

// ---- event-driven I/O ---------------------------------------------------

fn run_io(script: &str) -> (SystemTrace, Vec<String>, crate::ids::ObjectId) {
    let rt = Runtime::new();
    let (tx, mut rx, bh) = make_buffer::<String>(&rt).unwrap();
    let source = ScriptedSource::parse(script).unwrap();
    let h = spawn(
        &rt,
        "reader",
        ConcurrencyType::EventDriven,
        Box::new(EventDriven::new(source, tx, |e: DeviceEvent| {
            Ok(Some(e.name))
        })),
    );
    let drain = thread::spawn(move || {
        let mut got = Vec::new();
        while let Ok(m) = rx.receive() {
            got.push(m);
        }
        got
    });
    rt.start_all(std::slice::from_ref(&h)).unwrap();
    assert!(rt.wait_stopped(std::slice::from_ref(&h), Duration::from_secs(5)));
    let got = drain.join().unwrap();
    (rt.shutdown_default(), got, bh.id)
}

#[test]
fn scripted_card_insertion_sends_one_message() {
    let (trace, got, conduit) = run_io("0 card_inserted 1234\n");
    assert_eq!(got, ["card_inserted"]);
    assert_eq!(
        trace
            .by_source(conduit)
            .filter(|e| e.kind == EventKind::SendEnd)
            .count(),
        1
    );
}

#[test]
fn empty_script_sends_nothing() {
    let (trace, got, conduit) = run_io("# nothing here\n");
    assert!(got.is_empty());
    assert!(trace
        .by_source(conduit)
        .all(|e| e.kind == EventKind::ReceiveBegin));
}

#[test]
fn n_events_give_n_send_ends() {
    let script: String = (0..25).map(|i| format!("{} tick {i}\n", i % 2)).collect();
    let (trace, got, conduit) = run_io(&script);
    assert_eq!(got.len(), 25);
    assert_eq!(
        trace
            .by_source(conduit)
            .filter(|e| e.kind == EventKind::SendEnd)
            .count(),
        25
    );
}

#[test]
fn translate_may_drop_events() {
    let rt = Runtime::new();
    let (tx, mut rx, _) = make_queue::<u32>(&rt, 16).unwrap();
    let source = ScriptedSource::parse("0 key 1\n0 noise\n0 key 2\n").unwrap();
    let h = spawn(
        &rt,
        "keys",
        ConcurrencyType::EventDriven,
        Box::new(EventDriven::new(source, tx, |e: DeviceEvent| {
            Ok(match e.name.as_str() {
                "key" => Some(e.arg(0).unwrap().parse().unwrap()),
                _ => None,
            })
        })),
    );
    rt.start_all(std::slice::from_ref(&h)).unwrap();
    assert!(rt.wait_stopped(std::slice::from_ref(&h), Duration::from_secs(5)));
    assert_eq!(rx.drain(), [1, 2]);
    rt.shutdown_default();
}

#[test]
fn timer_source_is_reproducible_per_seed() {
    let rt = Runtime::new();
    let (tx, mut rx, _) = make_queue::<String>(&rt, 16).unwrap();
    let source = TimerSource::new("tick", Duration::from_millis(2), 5, 7);
    let h = spawn(
        &rt,
        "clock",
        ConcurrencyType::EventDriven,
        Box::new(EventDriven::new(source, tx, |e: DeviceEvent| {
            Ok(Some(format!("{}{}", e.name, e.arg(0).unwrap())))
        })),
    );
    rt.start_all(std::slice::from_ref(&h)).unwrap();
    assert!(rt.wait_stopped(std::slice::from_ref(&h), Duration::from_secs(5)));
    assert_eq!(rx.drain(), ["tick1", "tick2", "tick3", "tick4", "tick5"]);
    rt.shutdown_default();
}

// ---- passive entity -----------------------------------------------------

#[test]
fn entity_access_on_host_context() {
    let rt = Runtime::new();
    let host = rt
        .spawn_component(
            ComponentDecl::active(
                "atm",
                RoleStereotype::Control,
                ConcurrencyType::DemandDriven,
            ),
            &[],
        )
        .unwrap();
    let mut entity = PassiveEntity::new(100i64, &host);
    let (tx, rx) = mpsc::channel();
    rt.attach_behavior(
        &host,
        Box::new(move |_: &ComponentScope| {
            let ok = entity.access(|b| {
                *b -= 30;
                "ok"
            });
            let same = entity.access(|b| *b);
            tx.send((ok, same, entity.max_reentrancy(), entity.access_count()))
                .unwrap();
            Ok(())
        }),
    )
    .unwrap();
    rt.start_all(&[host]).unwrap();
    let (ok, same, depth, count) = rx.recv().unwrap();
    assert_eq!(ok, Ok("ok"));
    assert_eq!(same, Ok(70));
    assert_eq!(depth, 1);
    assert_eq!(count, 2);
    rt.shutdown_default();
}

#[test]
fn entity_access_from_foreign_context_is_rejected() {
    let rt = Runtime::new();
    let host = rt
        .spawn_component(
            ComponentDecl::active(
                "atm",
                RoleStereotype::Control,
                ConcurrencyType::DemandDriven,
            ),
            &[],
        )
        .unwrap();
    let mut entity = PassiveEntity::new(100i64, &host);
    let err = entity.access(|b| *b).unwrap_err();
    assert_eq!(err.host, host.context);
    assert_eq!(err.found, None);
    assert_eq!(entity.access_count(), 0);
    assert_eq!(entity.into_inner(), 100);
}
