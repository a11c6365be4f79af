//! Event-driven I/O components and the simulated devices that drive them.
//!
//! A script is line based: `<delay_ms> <event_name> [<arg>...]`. Blank lines
//! and `#` comments are ignored.

use std::collections::VecDeque;
use std::fmt;
use std::marker::PhantomData;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::connectors::{Message, Outbound};
use crate::error::{BehaviorError, ConnectorError};
use crate::runtime::{Behavior, ComponentScope};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeviceEvent {
    pub delay: Duration,
    pub name: String,
    pub args: Vec<String>,
}

impl DeviceEvent {
    pub fn new(name: impl Into<String>) -> Self {
        DeviceEvent {
            delay: Duration::ZERO,
            name: name.into(),
            args: Vec::new(),
        }
    }

    pub fn arg(&self, i: usize) -> Option<&str> {
        self.args.get(i).map(String::as_str)
    }
}

impl fmt::Display for DeviceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}  {}", self.delay.as_millis(), self.name)?;
        for a in &self.args {
            write!(f, "  {a}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("script line {line}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub message: String,
}

pub fn parse_script(text: &str) -> Result<Vec<DeviceEvent>, ScriptError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let delay = fields.next().expect("non-empty line");
        let delay: u64 = delay.parse().map_err(|_| ScriptError {
            line: i + 1,
            message: format!("delay `{delay}` is not a whole number of milliseconds"),
        })?;
        let name = fields.next().ok_or_else(|| ScriptError {
            line: i + 1,
            message: "missing event name".into(),
        })?;
        events.push(DeviceEvent {
            delay: Duration::from_millis(delay),
            name: name.to_owned(),
            args: fields.map(str::to_owned).collect(),
        });
    }
    Ok(events)
}

/// Where an I/O component's events come from.
pub trait EventSource: Send {
    /// Wait for the next event. `Ok(None)` when the source is exhausted.
    fn next_event(&mut self, scope: &ComponentScope)
        -> Result<Option<DeviceEvent>, ConnectorError>;
}

/// Replays a fixed list of events, honoring their delays, optionally with
/// seeded jitter added to each delay.
pub struct ScriptedSource {
    events: VecDeque<DeviceEvent>,
    jitter: Option<(ChaCha8Rng, Duration)>,
}

impl ScriptedSource {
    pub fn new(events: impl IntoIterator<Item = DeviceEvent>) -> Self {
        ScriptedSource {
            events: events.into_iter().collect(),
            jitter: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self, ScriptError> {
        Ok(Self::new(parse_script(text)?))
    }

    /// Add up to `max` extra delay before each event, drawn from `seed`.
    pub fn with_jitter(mut self, seed: u64, max: Duration) -> Self {
        self.jitter = Some((ChaCha8Rng::seed_from_u64(seed), max));
        self
    }

    pub fn remaining(&self) -> usize {
        self.events.len()
    }
}

impl EventSource for ScriptedSource {
    fn next_event(
        &mut self,
        scope: &ComponentScope,
    ) -> Result<Option<DeviceEvent>, ConnectorError> {
        let Some(event) = self.events.pop_front() else {
            return Ok(None);
        };
        let extra = match &mut self.jitter {
            Some((rng, max)) if !max.is_zero() => {
                Duration::from_micros(rng.gen_range(0..=max.as_micros() as u64))
            }
            _ => Duration::ZERO,
        };
        let wait = event.delay + extra;
        if !wait.is_zero() {
            scope.sleep(wait)?;
        } else if scope.is_stopping() {
            return Err(ConnectorError::Stopped);
        }
        Ok(Some(event))
    }
}

/// Emits `count` events named `name` every `interval`, with seeded jitter.
pub struct TimerSource {
    name: String,
    interval: Duration,
    remaining: usize,
    rng: ChaCha8Rng,
    jitter: Duration,
    emitted: usize,
}

impl TimerSource {
    pub fn new(name: impl Into<String>, interval: Duration, count: usize, seed: u64) -> Self {
        TimerSource {
            name: name.into(),
            interval,
            remaining: count,
            rng: ChaCha8Rng::seed_from_u64(seed),
            jitter: interval / 4,
            emitted: 0,
        }
    }
}

impl EventSource for TimerSource {
    fn next_event(
        &mut self,
        scope: &ComponentScope,
    ) -> Result<Option<DeviceEvent>, ConnectorError> {
        if self.remaining == 0 {
            return Ok(None);
        }
        let extra = Duration::from_micros(self.rng.gen_range(0..=self.jitter.as_micros() as u64));
        scope.sleep(self.interval + extra)?;
        self.remaining -= 1;
        self.emitted += 1;
        Ok(Some(DeviceEvent {
            delay: self.interval,
            name: self.name.clone(),
            args: vec![self.emitted.to_string()],
        }))
    }
}

/// For each source event, `translate` may produce one outbound message,
/// which is sent on `output`. Ends when the source is exhausted.
pub fn io_loop<T, S, O, F>(
    source: &mut S,
    mut translate: F,
    output: &mut O,
    scope: &ComponentScope,
) -> Result<(), BehaviorError>
where
    S: EventSource + ?Sized,
    O: Outbound<T>,
    F: FnMut(DeviceEvent) -> Result<Option<T>, BehaviorError>,
{
    while let Some(event) = source.next_event(scope)? {
        if let Some(msg) = translate(event)? {
            output.send(msg)?;
        }
    }
    Ok(())
}

pub struct EventDriven<T, S, O, F> {
    source: S,
    output: O,
    translate: F,
    _msg: PhantomData<fn() -> T>,
}

impl<T, S, O, F> EventDriven<T, S, O, F>
where
    T: Message,
    S: EventSource + 'static,
    O: Outbound<T> + Send + 'static,
    F: FnMut(DeviceEvent) -> Result<Option<T>, BehaviorError> + Send + 'static,
{
    pub fn new(source: S, output: O, translate: F) -> Self {
        EventDriven {
            source,
            output,
            translate,
            _msg: PhantomData,
        }
    }
}

impl<T, S, O, F> Behavior for EventDriven<T, S, O, F>
where
    T: Message,
    S: EventSource + 'static,
    O: Outbound<T> + Send + 'static,
    F: FnMut(DeviceEvent) -> Result<Option<T>, BehaviorError> + Send + 'static,
{
    fn run(self: Box<Self>, scope: &ComponentScope) -> Result<(), BehaviorError> {
        let EventDriven {
            mut source,
            mut output,
            translate,
            ..
        } = *self;
        io_loop(&mut source, translate, &mut output, scope)
    }
}
