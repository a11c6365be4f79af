//! Reusable behaviors for the concurrency types: event-driven I/O,
//! demand-driven services, periodic tasks and passive entities.

mod demand;
mod entity;
mod io;
mod periodic;

pub use demand::{demand_loop, DemandDriven};
pub use entity::{PassiveEntity, WrongContext};
pub use io::{
    io_loop, parse_script, DeviceEvent, EventDriven, EventSource, ScriptError, ScriptedSource,
    TimerSource,
};
pub use periodic::{Periodic, PeriodicQuery, PeriodicStatus, PeriodicTask};

#[cfg(test)]
mod tests;
