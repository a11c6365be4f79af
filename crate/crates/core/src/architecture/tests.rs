use std::sync::mpsc;
use std::time::Duration;

use proptest::prelude::*;

use super::*;
use crate::components::{DemandDriven, PassiveEntity};
use crate::connectors::{ConnectorKind, MessageTypes};
use crate::runtime::{
    ComponentScope, ConcurrencyType, ContextStatus, End, EventKind, RoleStereotype, Runtime,
    SystemTrace,
};

const PIPE: &str = "
# smallest closed design
connector link {
    kind message_buffer
    message text
}

component producer {
    role io
    concurrency event_driven
    bind out -> link as sender
    param count = 3
}

component consumer {
    role control
    concurrency demand_driven
    bind in -> link as receiver
}
";

fn text_types() -> MessageTypes {
    let mut t = MessageTypes::new();
    t.one_way::<String>("text");
    t
}

fn pipe_registry(seen: mpsc::Sender<String>) -> BehaviorRegistry {
    let mut reg = BehaviorRegistry::new();
    reg.register("producer", |w: &mut Wiring<'_>| {
        let mut out = w.buffer_sender::<String>("out")?;
        let count: usize = w.param("count")?;
        Ok(Built::active(move |_: &ComponentScope| {
            for i in 0..count {
                out.send(format!("m{i}"))?;
            }
            Ok(())
        }))
    });
    reg.register("consumer", move |w: &mut Wiring<'_>| {
        let inbox = w.buffer_receiver::<String>("in")?;
        let seen = seen.clone();
        Ok(Built::active(DemandDriven::new(
            inbox,
            move |m: String, _: &ComponentScope| {
                let _ = seen.send(m);
                Ok(())
            },
        )))
    });
    reg
}

// ---- parsing --------------------------------------------------------------

#[test]
fn minimal_document_parses() {
    let spec = parse_spec(PIPE).unwrap();
    assert_eq!(spec.components.len(), 2);
    assert_eq!(spec.connectors.len(), 1);
    let link = spec.connector("link").unwrap();
    assert_eq!(link.kind, ConnectorKind::MessageBuffer);
    assert_eq!(link.capacity, None);
    let producer = spec.component("producer").unwrap();
    assert_eq!(producer.params["count"], "3");
    assert_eq!(producer.bindings[0].end, End::Sender);
    assert!(validate(&spec).is_empty());
}

#[test]
fn undeclared_connector_is_reported_at_its_line() {
    let text = "component a {\n    role control\n    concurrency demand_driven\n    bind in -> q9 as receiver\n}\n";
    match parse_spec(text).unwrap_err() {
        ParseError::DanglingReference {
            name, line, col, ..
        } => {
            assert_eq!(name, "q9");
            assert_eq!(line, 4);
            assert_eq!(col, 16);
        }
        other => panic!("{other}"),
    }
}

#[test]
fn undeclared_host_is_dangling() {
    let text = "component t { role entity\n concurrency passive\n host nobody }";
    let err = parse_spec(text).unwrap_err();
    assert!(matches!(err, ParseError::DanglingReference { ref name, .. } if name == "nobody"));
    assert_eq!(err.line(), 3);
}

#[test]
fn duplicate_names_are_rejected_across_kinds() {
    let text = "connector x { kind message_queue\n message m }\ncomponent x { role io\n concurrency event_driven }";
    match parse_spec(text).unwrap_err() {
        ParseError::DuplicateName {
            name,
            line,
            first_line,
            ..
        } => {
            assert_eq!((name.as_str(), line, first_line), ("x", 3, 1));
        }
        other => panic!("{other}"),
    }
}

#[test]
fn syntax_errors_carry_position() {
    let cases = [
        ("connector a { kind pipe\n message m }", 1, 20),
        ("connector a {\n  kind message_queue\n}", 3, 1),
        (
            "component a {\n  role io\n  concurrency event_driven\n  bind p => c as sender\n}",
            4,
            11,
        ),
        ("widget a {}", 1, 1),
        (
            "connector a { kind message_queue\n kind message_queue\n message m }",
            2,
            2,
        ),
        (
            "component a { role io\n concurrency event_driven\n param k = 1\n param k = 2 }",
            4,
            8,
        ),
        (
            "connector a { kind message_queue\n capacity lots\n message m }",
            2,
            11,
        ),
        ("connector a { kind message_queue\n message m", 2, 1),
        ("connector a $ {}", 1, 13),
    ];
    for (text, line, col) in cases {
        let err = parse_spec(text).unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }), "{text:?}: {err}");
        assert_eq!((err.line(), err.col()), (line, col), "{text:?}: {err}");
    }
}

#[test]
fn forward_references_are_allowed() {
    let text = "
        component c { role control
                      concurrency demand_driven
                      bind in -> later as receiver }
        component t { role entity
                      concurrency passive
                      host c }
        connector later { kind message_queue
                          capacity 2
                          message m }";
    let spec = parse_spec(text).unwrap();
    assert_eq!(spec.component("t").unwrap().host.as_deref(), Some("c"));
}

// ---- printing -------------------------------------------------------------

#[test]
fn printer_is_canonical() {
    let spec = parse_spec(PIPE).unwrap();
    let printed = spec.to_string();
    assert_eq!(
        printed,
        "connector link {\n    kind message_buffer\n    message text\n}\n\n\
         component producer {\n    role io\n    concurrency event_driven\n    bind out -> link as sender\n    param count = 3\n}\n\n\
         component consumer {\n    role control\n    concurrency demand_driven\n    bind in -> link as receiver\n}\n"
    );
    assert_eq!(parse_spec(&printed).unwrap().to_string(), printed);
}

fn arb_spec() -> impl Strategy<Value = ArchitectureSpec> {
    let ident = "[a-z][a-z0-9_]{0,6}";
    let value = "[A-Za-z0-9_.:/-]{1,8}";
    let connector = (
        ident,
        prop::sample::select(ConnectorKind::ALL.to_vec()),
        prop::option::of(1usize..5_000_000),
        ident,
    );
    let component = (
        ident,
        prop::sample::select(RoleStereotype::ALL.to_vec()),
        prop::sample::select(ConcurrencyType::ALL.to_vec()),
        prop::collection::vec((ident, any::<prop::sample::Index>(), any::<bool>()), 0..4),
        prop::collection::btree_map(ident, value, 0..3),
        any::<prop::sample::Index>(),
    );
    (
        prop::collection::vec(connector, 1..5),
        prop::collection::vec(component, 1..6),
    )
        .prop_map(|(connectors, components)| {
            let connectors: Vec<ConnectorSpec> = connectors
                .into_iter()
                .enumerate()
                .map(|(i, (name, kind, capacity, message))| ConnectorSpec {
                    name: format!("k{i}_{name}"),
                    kind,
                    capacity,
                    message,
                })
                .collect();
            let names: Vec<String> = (0..components.len())
                .map(|i| format!("c{i}_{}", components[i].0))
                .collect();
            let components = components
                .into_iter()
                .enumerate()
                .map(
                    |(i, (_, role, concurrency, binds, params, host))| ComponentSpec {
                        name: names[i].clone(),
                        role,
                        concurrency,
                        host: (concurrency == ConcurrencyType::Passive)
                            .then(|| names[host.index(names.len())].clone()),
                        bindings: binds
                            .into_iter()
                            .enumerate()
                            .map(|(j, (port, conn, sender))| BindingSpec {
                                port: format!("p{j}_{port}"),
                                connector: conn.get(&connectors).name.clone(),
                                end: if sender { End::Sender } else { End::Receiver },
                            })
                            .collect(),
                        params,
                    },
                )
                .collect();
            ArchitectureSpec {
                connectors,
                components,
            }
        })
}

proptest! {
    #[test]
    fn parse_print_round_trip(spec in arb_spec()) {
        let text = spec.to_string();
        prop_assert_eq!(parse_spec(&text).unwrap(), spec);
    }
}

// ---- validation -----------------------------------------------------------

fn errors(spec: &ArchitectureSpec) -> Vec<String> {
    validate(spec)
        .into_iter()
        .filter(Finding::is_error)
        .map(|f| f.to_string())
        .collect()
}

#[test]
fn buffer_with_two_senders_is_an_error() {
    let spec = parse_spec(&format!(
        "{PIPE}\ncomponent second {{ role io\n concurrency event_driven\n bind out -> link as sender }}"
    ))
    .unwrap();
    let errs = errors(&spec);
    assert_eq!(errs.len(), 1, "{errs:?}");
    assert!(
        errs[0].contains("buffer permits exactly one sender"),
        "{}",
        errs[0]
    );
    assert!(errs[0].starts_with("error: link:"));
}

#[test]
fn queue_allows_many_senders_but_one_receiver() {
    let mut spec = parse_spec(PIPE).unwrap();
    spec.connectors[0].kind = ConnectorKind::MessageQueue;
    spec.components.push(
        ComponentSpec::new("second", RoleStereotype::Io, ConcurrencyType::EventDriven).bind(
            "out",
            "link",
            End::Sender,
        ),
    );
    assert!(errors(&spec).is_empty());
    spec.components.push(
        ComponentSpec::new(
            "rival",
            RoleStereotype::Control,
            ConcurrencyType::DemandDriven,
        )
        .bind("in", "link", End::Receiver),
    );
    let errs = errors(&spec);
    assert_eq!(errs.len(), 1);
    assert!(errs[0].contains("exactly one receiver"));
}

#[test]
fn passive_without_host_is_an_error() {
    let mut spec = parse_spec(PIPE).unwrap();
    spec.components.push(ComponentSpec::new(
        "transaction",
        RoleStereotype::Entity,
        ConcurrencyType::Passive,
    ));
    let errs = errors(&spec);
    assert_eq!(errs, ["error: transaction: passive component has no host"]);
}

#[test]
fn host_rules() {
    let mut spec = parse_spec(PIPE).unwrap();
    spec.components.push(
        ComponentSpec::new("t1", RoleStereotype::Entity, ConcurrencyType::Passive)
            .hosted_by("consumer"),
    );
    assert!(errors(&spec).is_empty());
    spec.components.push(
        ComponentSpec::new("t2", RoleStereotype::Entity, ConcurrencyType::Passive).hosted_by("t1"),
    );
    spec.components[0].host = Some("consumer".into());
    let errs = errors(&spec);
    assert_eq!(errs.len(), 2, "{errs:?}");
    assert!(errs
        .iter()
        .any(|e| e.contains("t2") && e.contains("must be active")));
    assert!(errs
        .iter()
        .any(|e| e.contains("producer") && e.contains("only passive")));
}

#[test]
fn unbound_connector_ends_are_errors() {
    let mut spec = parse_spec(PIPE).unwrap();
    spec.components.pop();
    let errs = errors(&spec);
    assert_eq!(errs, ["error: link: connector has no receiver binding"]);
}

#[test]
fn capacity_rules() {
    let mut spec = parse_spec(PIPE).unwrap();
    spec.connectors[0].capacity = Some(4);
    assert!(errors(&spec)[0].contains("only allowed on queue-based"));

    spec.connectors[0].kind = ConnectorKind::MessageQueue;
    assert!(errors(&spec).is_empty());

    spec.connectors[0].capacity = Some(0);
    assert!(errors(&spec)[0].contains("at least 1"));

    spec.connectors[0].capacity = Some(LARGE_CAPACITY + 1);
    let findings = validate(&spec);
    assert!(!has_errors(&findings));
    assert_eq!(findings.len(), 1);
    assert_eq!(findings[0].severity, Severity::Warning);
}

#[test]
fn passive_components_have_no_ports() {
    let mut spec = parse_spec(PIPE).unwrap();
    spec.components.push(
        ComponentSpec::new("t", RoleStereotype::Entity, ConcurrencyType::Passive)
            .hosted_by("consumer")
            .bind("peek", "link", End::Receiver),
    );
    assert!(errors(&spec).iter().any(|e| e.contains("no ports")));
}

// ---- instantiation --------------------------------------------------------

#[test]
fn producer_consumer_instantiates_and_runs() {
    let spec = parse_spec(PIPE).unwrap();
    let rt = Runtime::new();
    let (tx, rx) = mpsc::channel();
    let inst = instantiate(&spec, &text_types(), &pipe_registry(tx), &rt).unwrap();

    assert_eq!(rt.component_context_count(), 2);
    assert_eq!(rt.conduits().len(), 1);
    assert_eq!(inst.conduit_count(), spec.conduit_count());
    assert_eq!(inst.map.names().count(), 3);
    assert!(inst.map.len() >= 3);
    assert!(inst.map.is_consistent());
    // Nothing runs until the caller starts it.
    for h in &inst.handles {
        assert_eq!(rt.status(h), Some(ContextStatus::Created));
    }

    inst.start().unwrap();
    let got: Vec<String> = (0..3).map(|_| rx.recv().unwrap()).collect();
    assert_eq!(got, ["m0", "m1", "m2"]);
    let producer = inst.handle("producer").unwrap().clone();
    assert!(rt.wait_stopped(&[producer], Duration::from_secs(5)));
    let trace = rt.shutdown_default();

    let streams = trace_to_design(&inst.map, &trace).unwrap();
    assert_eq!(
        streams.keys().map(String::as_str).collect::<Vec<_>>(),
        ["consumer", "link", "producer"]
    );
    assert_eq!(streams.values().map(Vec::len).sum::<usize>(), trace.len());
    assert!(streams["link"].iter().all(|e| e.kind.is_connector_event()));
    assert_eq!(
        streams["link"]
            .iter()
            .filter(|e| e.kind == EventKind::ReceiveEnd)
            .count(),
        3
    );
}

#[test]
fn missing_behavior_creates_nothing() {
    let spec = parse_spec(PIPE).unwrap();
    let rt = Runtime::new();
    let mut partial = BehaviorRegistry::new();
    partial.register("producer", |_: &mut Wiring<'_>| {
        Ok(Built::active(|_: &ComponentScope| Ok(())))
    });
    match instantiate(&spec, &text_types(), &partial, &rt) {
        Err(InstantiateError::MissingBehavior(names)) => assert_eq!(names, ["consumer"]),
        other => panic!("{other:?}"),
    }
    assert!(rt.components().is_empty());
    assert_eq!(rt.component_context_count(), 0);
    assert!(rt.trace().is_empty());
}

#[test]
fn wiring_failure_tears_down_created_components() {
    let spec = parse_spec(PIPE).unwrap();
    let rt = Runtime::new();
    let mut reg = BehaviorRegistry::new();
    reg.register("consumer", |w: &mut Wiring<'_>| {
        // Wrong end: the port is a receiver.
        let _ = w.buffer_sender::<String>("in")?;
        unreachable!()
    });
    reg.register("producer", |_: &mut Wiring<'_>| {
        Ok(Built::active(|_: &ComponentScope| Ok(())))
    });
    let err = instantiate(&spec, &text_types(), &reg, &rt).unwrap_err();
    assert!(
        matches!(err, InstantiateError::Wiring(WiringError::WrongEnd { .. })),
        "{err}"
    );
    let handles = rt.components();
    assert_eq!(handles.len(), 2);
    for h in &handles {
        assert_eq!(rt.status(h), Some(ContextStatus::Stopped));
    }
    assert!(rt.start_all(&handles).is_err());
}

#[test]
fn unclaimed_port_is_an_error() {
    let spec = parse_spec(PIPE).unwrap();
    let rt = Runtime::new();
    let (tx, _rx) = mpsc::channel();
    let mut reg = pipe_registry(tx);
    reg.register("producer", |_: &mut Wiring<'_>| {
        Ok(Built::active(|_: &ComponentScope| Ok(())))
    });
    let err = instantiate(&spec, &text_types(), &reg, &rt).unwrap_err();
    assert!(
        matches!(err, InstantiateError::Wiring(WiringError::UnusedPort { ref port, .. }) if port == "out")
    );
}

#[test]
fn payload_type_mismatch_is_reported() {
    let spec = parse_spec(PIPE).unwrap();
    let rt = Runtime::new();
    let (tx, _rx) = mpsc::channel();
    let mut reg = pipe_registry(tx);
    reg.register("producer", |w: &mut Wiring<'_>| {
        let _ = w.buffer_sender::<u64>("out")?;
        unreachable!()
    });
    let err = instantiate(&spec, &text_types(), &reg, &rt).unwrap_err();
    assert!(
        matches!(
            err,
            InstantiateError::Wiring(WiringError::TypeMismatch { .. })
        ),
        "{err}"
    );
}

#[test]
fn unknown_message_tag_is_reported_before_creation() {
    let spec = parse_spec(PIPE).unwrap();
    let rt = Runtime::new();
    let (tx, _rx) = mpsc::channel();
    let err = instantiate(&spec, &MessageTypes::new(), &pipe_registry(tx), &rt).unwrap_err();
    assert!(matches!(err, InstantiateError::UnknownMessageType { .. }));
    assert!(rt.conduits().is_empty());
}

#[test]
fn invalid_spec_is_refused() {
    let mut spec = parse_spec(PIPE).unwrap();
    spec.components.pop();
    let rt = Runtime::new();
    let (tx, _rx) = mpsc::channel();
    let err = instantiate(&spec, &text_types(), &pipe_registry(tx), &rt).unwrap_err();
    assert!(matches!(err, InstantiateError::Invalid(_)));
}

const HOSTED: &str = "
connector jobs { kind message_queue
                 capacity 4
                 message num }
connector rpc { kind queue_and_callback
                message ask }
component boss { role coordinator
                 concurrency demand_driven
                 bind serve -> rpc as receiver }
component worker { role io
                   concurrency periodic
                   bind out -> jobs as sender
                   param period_ms = 5 }
component ledger { role entity
                   concurrency passive
                   host clerk }
component clerk { role control
                  concurrency demand_driven
                  bind in -> jobs as receiver
                  bind ask -> rpc as sender }
";

fn hosted_registry() -> (BehaviorRegistry, mpsc::Receiver<i64>) {
    let (tx, rx) = mpsc::channel();
    let mut reg = BehaviorRegistry::new();
    reg.register("ledger", |w: &mut Wiring<'_>| {
        Ok(Built::passive(PassiveEntity::new(0i64, w.host().unwrap())))
    });
    reg.register("clerk", move |w: &mut Wiring<'_>| {
        let mut ledger = w.take_passive::<PassiveEntity<i64>>("ledger")?;
        let mut inbox = w.queue_receiver::<u32>("in")?;
        let mut ask = w.callback_sender::<u32, u32>("ask")?;
        let tx = tx.clone();
        Ok(Built::active(move |_: &ComponentScope| {
            let n = inbox.receive()?;
            ask.send(n)?;
            let doubled = ask.accept()?;
            let total = ledger
                .access(|s| {
                    *s += i64::from(doubled);
                    *s
                })
                .map_err(|e| crate::error::BehaviorError::Failed(e.to_string()))?;
            let _ = tx.send(total);
            Ok(())
        }))
    });
    reg.register("boss", |w: &mut Wiring<'_>| {
        let mut serve = w.callback_receiver::<u32, u32>("serve")?;
        Ok(Built::active(move |_: &ComponentScope| loop {
            serve.serve(|n| n * 2)?;
        }))
    });
    reg.register("worker", |w: &mut Wiring<'_>| {
        let mut out = w.queue_sender::<u32>("out")?;
        let period: u64 = w.param("period_ms")?;
        Ok(Built::active(move |s: &ComponentScope| {
            s.sleep(Duration::from_millis(period))?;
            out.send(21)?;
            Ok(())
        }))
    });
    (reg, rx)
}

fn num_types() -> MessageTypes {
    let mut t = MessageTypes::new();
    t.one_way::<u32>("num").round_trip::<u32, u32>("ask");
    t
}

#[test]
fn structural_counts_follow_the_design() {
    let spec = parse_spec(HOSTED).unwrap();
    assert!(!has_errors(&validate(&spec)));
    let rt = Runtime::new();
    let (reg, rx) = hosted_registry();
    let inst = instantiate(&spec, &num_types(), &reg, &rt).unwrap();

    // Contexts: one per active component; callback connector is two conduits.
    assert_eq!(rt.component_context_count(), spec.active_count());
    assert_eq!(rt.component_context_count(), 3);
    assert_eq!(rt.conduits().len(), 3);
    assert_eq!(inst.conduits["rpc"].len(), 2);

    // Passive entity shares its host's context.
    let clerk = inst.handle("clerk").unwrap();
    let ledger = inst.handle("ledger").unwrap();
    assert_eq!(ledger.context, clerk.context);

    // Outermost controller first, passive last.
    let order: Vec<_> = inst.handles.iter().map(|h| h.name.as_str()).collect();
    assert_eq!(order, ["boss", "clerk", "worker", "ledger"]);

    // Periodic component's companion is traced back to it.
    let worker = inst.handle("worker").unwrap();
    let (pid, _) = worker.companion.unwrap();
    assert_eq!(inst.map.backward(pid), Some("worker"));
    assert!(inst.map.is_consistent());
    for id in inst.map.objects() {
        assert!(rt.label(id).is_some(), "{id} is a real runtime object");
    }

    inst.start().unwrap();
    assert_eq!(rx.recv_timeout(Duration::from_secs(5)).unwrap(), 42);
    let trace = rt.shutdown_default();
    let streams = trace_to_design(&inst.map, &trace).unwrap();
    assert_eq!(streams.values().map(Vec::len).sum::<usize>(), trace.len());
    assert!(
        streams["ledger"].is_empty(),
        "passive entities emit nothing"
    );
}

#[test]
fn passive_state_only_goes_to_its_host() {
    let spec = parse_spec(HOSTED).unwrap();
    let rt = Runtime::new();
    let (mut reg, _rx) = hosted_registry();
    reg.register("boss", |w: &mut Wiring<'_>| {
        let _ = w.take_passive::<PassiveEntity<i64>>("ledger")?;
        unreachable!()
    });
    let err = instantiate(&spec, &num_types(), &reg, &rt).unwrap_err();
    assert!(
        matches!(err, InstantiateError::Wiring(WiringError::Passive { .. })),
        "{err}"
    );
}

// ---- traceability ---------------------------------------------------------

#[test]
fn empty_trace_gives_empty_streams() {
    let spec = parse_spec(PIPE).unwrap();
    let rt = Runtime::new();
    let (tx, _rx) = mpsc::channel();
    let inst = instantiate(&spec, &text_types(), &pipe_registry(tx), &rt).unwrap();
    let streams = trace_to_design(&inst.map, &SystemTrace::default()).unwrap();
    assert_eq!(streams.len(), 3);
    assert!(streams.values().all(Vec::is_empty));
}

#[test]
fn foreign_object_in_trace_is_unknown() {
    let map = TraceabilityMap::default();
    let rt = Runtime::new();
    let stranger = rt
        .spawn_component(
            crate::runtime::ComponentDecl::active(
                "x",
                RoleStereotype::Io,
                ConcurrencyType::EventDriven,
            ),
            &[],
        )
        .unwrap();
    rt.emit(crate::runtime::TraceEvent::new(
        stranger.id,
        EventKind::Custom,
    ))
    .unwrap();
    let err = trace_to_design(&map, &rt.trace()).unwrap_err();
    assert_eq!(err.id, stranger.id);
    assert_eq!(err.seq, 1);
}
