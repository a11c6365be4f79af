//! Structural checks on a parsed architecture.

use std::collections::BTreeSet;
use std::fmt;

use super::model::ArchitectureSpec;
use crate::connectors::ConnectorKind;
use crate::runtime::{End, RoleStereotype};

/// Capacities above this are accepted but flagged as "unbounded in intent".
pub const LARGE_CAPACITY: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Finding {
    pub severity: Severity,
    /// The component or connector the finding is about.
    pub subject: String,
    pub message: String,
}

impl Finding {
    fn error(subject: &str, message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Error,
            subject: subject.to_owned(),
            message: message.into(),
        }
    }

    fn warning(subject: &str, message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Warning,
            subject: subject.to_owned(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let level = match self.severity {
            Severity::Warning => "warning",
            Severity::Error => "error",
        };
        write!(f, "{level}: {}: {}", self.subject, self.message)
    }
}

fn kind_phrase(kind: ConnectorKind) -> &'static str {
    match kind {
        ConnectorKind::MessageBuffer => "message buffer",
        ConnectorKind::MessageQueue => "message queue",
        ConnectorKind::BufferAndReply => "buffer and reply",
        ConnectorKind::QueueAndCallback => "queue and callback",
    }
}

/// All findings, errors and warnings alike. Empty iff the spec is clean.
pub fn validate(spec: &ArchitectureSpec) -> Vec<Finding> {
    let mut out = Vec::new();

    let mut seen = BTreeSet::new();
    let names = spec
        .connectors
        .iter()
        .map(|c| &c.name)
        .chain(spec.components.iter().map(|c| &c.name));
    for name in names {
        if !seen.insert(name) {
            out.push(Finding::error(name, "name declared more than once"));
        }
    }

    for c in &spec.connectors {
        let senders = spec.bindings_to(&c.name, End::Sender).count();
        let receivers = spec.bindings_to(&c.name, End::Receiver).count();
        let phrase = kind_phrase(c.kind);
        if senders == 0 {
            out.push(Finding::error(&c.name, "connector has no sender binding"));
        }
        if receivers == 0 {
            out.push(Finding::error(&c.name, "connector has no receiver binding"));
        }
        if c.kind.single_sender() && senders > 1 {
            out.push(Finding::error(
                &c.name,
                format!("{phrase} permits exactly one sender, found {senders}"),
            ));
        }
        if receivers > 1 {
            out.push(Finding::error(
                &c.name,
                format!("{phrase} permits exactly one receiver, found {receivers}"),
            ));
        }
        match c.capacity {
            Some(_) if !c.kind.is_queue_based() => out.push(Finding::error(
                &c.name,
                format!("capacity is only allowed on queue-based connectors, not {phrase}"),
            )),
            Some(0) => out.push(Finding::error(&c.name, "capacity must be at least 1")),
            Some(n) if n > LARGE_CAPACITY => out.push(Finding::warning(
                &c.name,
                format!("capacity {n} is effectively unbounded"),
            )),
            _ => {}
        }
    }

    for c in &spec.components {
        let mut ports = BTreeSet::new();
        for b in &c.bindings {
            if !ports.insert(&b.port) {
                out.push(Finding::error(
                    &c.name,
                    format!("port `{}` bound twice", b.port),
                ));
            }
            if spec.connector(&b.connector).is_none() {
                out.push(Finding::error(
                    &c.name,
                    format!(
                        "port `{}` references undeclared connector `{}`",
                        b.port, b.connector
                    ),
                ));
            }
        }
        match (c.is_passive(), &c.host) {
            (true, None) => out.push(Finding::error(&c.name, "passive component has no host")),
            (false, Some(_)) => out.push(Finding::error(
                &c.name,
                "only passive components may name a host",
            )),
            (true, Some(host)) => match spec.component(host) {
                None => out.push(Finding::error(
                    &c.name,
                    format!("host `{host}` is not a declared component"),
                )),
                Some(h) if h.is_passive() => out.push(Finding::error(
                    &c.name,
                    format!("host `{host}` is passive; a host must be active"),
                )),
                Some(_) => {}
            },
            (false, None) => {}
        }
        if c.is_passive() && !c.bindings.is_empty() {
            out.push(Finding::error(
                &c.name,
                "passive components have no ports; they are reached through their host",
            ));
        }
        if c.is_passive() != (c.role == RoleStereotype::Entity) {
            out.push(Finding::warning(
                &c.name,
                format!(
                    "role {} with concurrency {} is unusual: entities are passive",
                    c.role, c.concurrency
                ),
            ));
        }
    }
    out
}

pub fn has_errors(findings: &[Finding]) -> bool {
    findings.iter().any(Finding::is_error)
}
