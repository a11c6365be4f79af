//! Message-passing concurrency built from stereotyped components and
//! connectors.
//!
//! * [`runtime`]: execution contexts that confine components, lifecycle,
//!   and the system trace.
//! * [`connectors`]: message buffer, message queue, buffer-and-reply and
//!   queue-and-callback connectors, each a set of conduits plus endpoints.
//! * [`components`]: reusable loops for event-driven, demand-driven,
//!   periodic and passive components.
//! * [`architecture`]: a textual architecture description, its validation,
//!   and mechanical instantiation into a runnable system.

pub mod architecture;
pub mod components;
pub mod connectors;
pub mod error;
pub mod ids;
pub mod runtime;

pub use error::{BehaviorError, ConnectorError, RuntimeError};
