//! Periodic components: a task plus a pacemaker on a separate context.
//!
//! The pacemaker does the sleeping. Between steps the task's own context is
//! idle and answers queries such as [`PeriodicQuery::is_done`] at once,
//! instead of being stuck inside a sleep.
//!
//! Scheduling is fixed-delay: after each step the task asks the pacemaker
//! for another notification, which arrives one period after the request.

use std::fmt;
use std::time::Duration;

use crate::connectors::oneshot::{oneshot, OneshotSender};
use crate::connectors::{QueueConnector, QueueReceiver, QueueSender};
use crate::error::{BehaviorError, ConnectorError};
use crate::runtime::{Behavior, ComponentScope, EventKind, Runtime};

/// The job a periodic component performs.
pub trait PeriodicTask: Send + 'static {
    /// One iteration.
    fn step(&mut self, scope: &ComponentScope) -> Result<(), BehaviorError>;

    /// Once true, no further steps are scheduled.
    fn is_done(&self) -> bool {
        false
    }

    /// Called on the task's context when the component is stopping.
    fn on_stop(&mut self, _scope: &ComponentScope) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PeriodicStatus {
    pub step_count: u64,
    pub is_done: bool,
}

enum Command {
    Notify,
    Query(OneshotSender<PeriodicStatus>),
}

impl fmt::Debug for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Command::Notify => f.write_str("Notify"),
            Command::Query(_) => f.write_str("Query"),
        }
    }
}

#[derive(Debug)]
enum Pace {
    Schedule,
    Finish,
}

/// Behavior for a component with concurrency type `periodic`.
pub struct Periodic<T> {
    task: T,
    period: Duration,
    inbox: QueueReceiver<Command>,
    notify: QueueSender<Command>,
    runtime: Runtime,
}

/// Cross-context query handle for a periodic task. Cloning gives another
/// independent handle.
#[derive(Clone)]
pub struct PeriodicQuery {
    inbox: QueueSender<Command>,
    runtime: Runtime,
}

const INBOX_CAPACITY: usize = 64;

impl<T: PeriodicTask> Periodic<T> {
    pub fn new(runtime: &Runtime, task: T, period: Duration) -> (Self, PeriodicQuery) {
        let mut inbox = QueueConnector::internal(runtime, INBOX_CAPACITY);
        let receiver = inbox.receiver().expect("fresh connector");
        let notify = inbox.sender().expect("queue senders are unlimited");
        let query = PeriodicQuery {
            inbox: inbox.sender().expect("queue senders are unlimited"),
            runtime: runtime.clone(),
        };
        (
            Periodic {
                task,
                period,
                inbox: receiver,
                notify,
                runtime: runtime.clone(),
            },
            query,
        )
    }
}

impl PeriodicQuery {
    pub fn status(&mut self) -> Result<PeriodicStatus, ConnectorError> {
        let (tx, rx) = oneshot(&self.runtime);
        self.inbox.send(Command::Query(tx))?;
        rx.receive()
    }

    pub fn is_done(&mut self) -> Result<bool, ConnectorError> {
        Ok(self.status()?.is_done)
    }
}

impl<T: PeriodicTask> Behavior for Periodic<T> {
    fn run(self: Box<Self>, scope: &ComponentScope) -> Result<(), BehaviorError> {
        let Periodic {
            mut task,
            period,
            mut inbox,
            notify,
            runtime,
        } = *self;

        let outcome = drive(&mut task, period, &mut inbox, notify, &runtime, scope);
        // Runs on every exit path, including a stop that lands before the
        // first step, so tasks can flush what they hold.
        task.on_stop(scope);
        outcome
    }
}

fn drive<T: PeriodicTask>(
    task: &mut T,
    period: Duration,
    inbox: &mut QueueReceiver<Command>,
    mut notify: QueueSender<Command>,
    runtime: &Runtime,
    scope: &ComponentScope,
) -> Result<(), BehaviorError> {
    let mut pace = QueueConnector::<Pace>::internal(runtime, 1);
    let mut pace_tx = pace.sender()?;
    let mut pace_rx = pace.receiver()?;
    scope
        .spawn_companion(move |pacemaker| loop {
            match pace_rx.receive()? {
                Pace::Schedule => {
                    pacemaker.sleep(period)?;
                    notify.send(Command::Notify)?;
                }
                Pace::Finish => return Ok(()),
            }
        })
        .map_err(|e| BehaviorError::Failed(e.to_string()))?;

    let mut status = PeriodicStatus {
        step_count: 0,
        is_done: task.is_done(),
    };
    pace_tx.send(if status.is_done {
        Pace::Finish
    } else {
        Pace::Schedule
    })?;

    loop {
        match inbox.receive()? {
            Command::Query(reply) => reply.send(status),
            Command::Notify if status.is_done => {}
            Command::Notify => {
                task.step(scope)?;
                status.step_count += 1;
                scope.emit(EventKind::Step, format!("step {}", status.step_count));
                // Latched: a task never becomes undone.
                status.is_done = task.is_done();
                pace_tx.send(if status.is_done {
                    Pace::Finish
                } else {
                    Pace::Schedule
                })?;
            }
        }
    }
}
