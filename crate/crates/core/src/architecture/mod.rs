//! Declarative architecture descriptions, their validation, and mechanical
//! instantiation into runtime objects.
//!
//! # Format
//!
//! UTF-8 text made of `connector` and `component` blocks, in any order.
//! One property per line; `#` starts a comment.
//!
//! ```text
//! connector jobs {
//!     kind message_queue          # message_buffer | message_queue |
//!                                 # buffer_and_reply | queue_and_callback
//!     capacity 8                  # queue-based kinds only; default 16
//!     message job                 # tag looked up in the MessageTypes registry
//! }
//!
//! component producer {
//!     role io                     # io | control | algorithm | entity | coordinator
//!     concurrency event_driven    # event_driven | demand_driven | periodic | passive
//!     bind out -> jobs as sender
//!     param rate_ms = 10
//! }
//!
//! component consumer {
//!     role control
//!     concurrency demand_driven
//!     bind in -> jobs as receiver
//! }
//! ```
//!
//! Passive components name their active host with `host <component>` and
//! have no ports. Names share one namespace across connectors and
//! components and match `[A-Za-z_][A-Za-z0-9_]*`.
//!
//! ```
//! use comet::architecture::{parse_spec, validate};
//!
//! let spec = parse_spec("
//!     connector link { kind message_buffer
//!                      message text }
//!     component a { role io
//!                   concurrency event_driven
//!                   bind out -> link as sender }
//!     component b { role control
//!                   concurrency demand_driven
//!                   bind in -> link as receiver }
//! ").unwrap();
//! assert_eq!(spec.components.len(), 2);
//! assert!(validate(&spec).is_empty());
//! assert_eq!(parse_spec(&spec.to_string()).unwrap(), spec);
//! ```

mod instantiate;
mod model;
mod parse;
mod traceability;
mod validate;

pub use instantiate::{
    instantiate, BehaviorFactory, BehaviorRegistry, Built, Instance, InstantiateError, Wiring,
    WiringError,
};
pub use model::{ArchitectureSpec, BindingSpec, ComponentSpec, ConnectorSpec};
pub use parse::{is_identifier, parse_spec, ParseError};
pub use traceability::{trace_to_design, TraceabilityMap, UnknownObject};
pub use validate::{has_errors, validate, Finding, Severity, LARGE_CAPACITY};

#[cfg(test)]
mod tests;
