//! A small design driven end to end through the public API: parse, check,
//! instantiate, run, then map the trace back onto the design.

use std::sync::mpsc;
use std::time::Duration;

use comet::architecture::{
    instantiate, parse_spec, trace_to_design, validate, BehaviorRegistry, Built, Wiring,
};
use comet::components::{parse_script, DemandDriven, EventDriven, PassiveEntity, ScriptedSource};
use comet::connectors::MessageTypes;
use comet::runtime::{ComponentScope, EventKind, Runtime};
use comet::BehaviorError;

const DESIGN: &str = "
connector readings {
    kind message_queue
    capacity 4
    message reading
}

connector archive {
    kind buffer_and_reply
    message filing
}

component sensor {
    role io
    concurrency event_driven
    bind out -> readings as sender
}

component averager {
    role algorithm
    concurrency demand_driven
    bind in -> readings as receiver
    bind file -> archive as sender
}

component totals {
    role entity
    concurrency passive
    host averager
}

component archivist {
    role coordinator
    concurrency demand_driven
    bind in -> archive as receiver
}
";

const SCRIPT: &str = "
0 reading 10
0 reading 20
1 reading 30
0 reading 40
0 reading 50
";

fn types() -> MessageTypes {
    let mut t = MessageTypes::new();
    t.one_way::<i64>("reading")
        .round_trip::<i64, usize>("filing");
    t
}

fn registry(filed: mpsc::Sender<(i64, usize)>) -> BehaviorRegistry {
    let mut reg = BehaviorRegistry::new();
    reg.register("sensor", |w: &mut Wiring<'_>| {
        let out = w.queue_sender::<i64>("out")?;
        let source = ScriptedSource::new(parse_script(SCRIPT).unwrap());
        Ok(Built::active(EventDriven::new(source, out, |e| {
            e.arg(0)
                .and_then(|v| v.parse::<i64>().ok())
                .map(Some)
                .ok_or_else(|| BehaviorError::Failed(format!("bad reading `{e}`")))
        })))
    });
    reg.register("totals", |w: &mut Wiring<'_>| {
        Ok(Built::passive(PassiveEntity::new(
            (0i64, 0i64),
            w.host().unwrap(),
        )))
    });
    reg.register("averager", move |w: &mut Wiring<'_>| {
        let filed = filed.clone();
        let inbox = w.queue_receiver::<i64>("in")?;
        let mut file = w.reply_sender::<i64, usize>("file")?;
        let mut totals = w.take_passive::<PassiveEntity<(i64, i64)>>("totals")?;
        Ok(Built::active(DemandDriven::new(
            inbox,
            move |v: i64, _: &ComponentScope| {
                let mean = totals
                    .access(|(sum, n)| {
                        *sum += v;
                        *n += 1;
                        *sum / *n
                    })
                    .map_err(|e| BehaviorError::Failed(e.to_string()))?;
                // Reported once the reply is in hand, so it is traced.
                let number = file.request(mean)?;
                let _ = filed.send((mean, number));
                Ok(())
            },
        )))
    });
    reg.register("archivist", |w: &mut Wiring<'_>| {
        let mut inbox = w.reply_receiver::<i64, usize>("in")?;
        Ok(Built::active(move |_: &ComponentScope| {
            let mut count = 0;
            loop {
                inbox.serve(|_| {
                    count += 1;
                    count
                })?;
            }
        }))
    });
    reg
}

#[test]
fn design_runs_and_its_trace_maps_back_onto_it() {
    let spec = parse_spec(DESIGN).unwrap();
    assert!(validate(&spec).is_empty(), "{:?}", validate(&spec));
    let rt = Runtime::new();
    let (tx, rx) = mpsc::channel();
    let inst = instantiate(&spec, &types(), &registry(tx), &rt).unwrap();
    assert_eq!(rt.component_context_count(), 3);
    assert_eq!(inst.conduits["readings"].len(), 1);
    assert_eq!(inst.conduits["archive"].len(), 1);

    inst.start().unwrap();
    let filed: Vec<(i64, usize)> = (0..5)
        .map(|_| rx.recv_timeout(Duration::from_secs(5)).unwrap())
        .collect();
    // Running means of 10, 20, 30, 40, 50, filed in arrival order.
    assert_eq!(filed, [(10, 1), (15, 2), (20, 3), (25, 4), (30, 5)]);

    let sensor = inst.handle("sensor").unwrap().clone();
    assert!(rt.wait_stopped(&[sensor], Duration::from_secs(5)));
    let trace = rt.shutdown_default();

    let streams = trace_to_design(&inst.map, &trace).unwrap();
    assert_eq!(streams.values().map(Vec::len).sum::<usize>(), trace.len());
    let sent = streams["readings"]
        .iter()
        .filter(|e| e.kind == EventKind::SendEnd)
        .count();
    assert_eq!(sent, 5);
    let replies = streams["archive"]
        .iter()
        .filter(|e| e.kind == EventKind::Reply)
        .count();
    assert_eq!(replies, 5);
    assert!(streams["totals"].is_empty());
    assert!(streams["sensor"]
        .iter()
        .any(|e| e.kind == EventKind::Stop && e.payload_digest == "completed"));
}

#[test]
fn export_is_one_numbered_tab_separated_line_per_event() {
    let spec = parse_spec(DESIGN).unwrap();
    let rt = Runtime::new();
    let (tx, rx) = mpsc::channel();
    let inst = instantiate(&spec, &types(), &registry(tx), &rt).unwrap();
    inst.start().unwrap();
    for _ in 0..5 {
        rx.recv_timeout(Duration::from_secs(5)).unwrap();
    }
    let trace = rt.shutdown_default();
    let export = trace.export();
    assert_eq!(export.lines().count(), trace.len());
    for (i, (line, event)) in export.lines().zip(trace.iter()).enumerate() {
        let fields: Vec<&str> = line.split('\t').collect();
        assert_eq!(fields.len(), 4, "{line}");
        assert_eq!(fields[0], (i + 1).to_string());
        assert_eq!(fields[2], event.kind.as_str());
        assert_eq!(fields[1], event.source.to_string());
    }
}
