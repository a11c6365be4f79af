//! The periodic log: each step moves every queued record to the
//! append-only log, one line per record: `seq  atm  event  detail`.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use comet::components::PeriodicTask;
use comet::connectors::QueueReceiver;
use comet::runtime::ComponentScope;
use comet::BehaviorError;

use crate::devices::{Outcome, Outcomes};
use crate::messages::LogRecord;

pub fn format_line(seq: u64, r: &LogRecord) -> String {
    format!("{seq}  {}  {}  {}", r.atm, r.event, r.detail)
}

pub struct LogTask {
    records: QueueReceiver<LogRecord>,
    file: Option<File>,
    outcomes: Outcomes,
    seq: u64,
}

impl LogTask {
    pub fn new(records: QueueReceiver<LogRecord>, outcomes: Outcomes) -> Self {
        LogTask {
            records,
            file: None,
            outcomes,
            seq: 0,
        }
    }

    /// Also append every line to `path`, truncating it first.
    pub fn with_file(mut self, path: &Path) -> io::Result<Self> {
        self.file = Some(File::create(path)?);
        Ok(self)
    }

    /// Write out everything queued right now. Never blocks on the queue.
    pub fn drain(&mut self) -> io::Result<usize> {
        let records = self.records.drain();
        let mut text = String::new();
        for r in &records {
            self.seq += 1;
            let line = format_line(self.seq, r);
            text.push_str(&line);
            text.push('\n');
            let _ = self.outcomes.send(Outcome::LogLine(line));
        }
        if let Some(f) = &mut self.file {
            f.write_all(text.as_bytes())?;
            f.flush()?;
        }
        Ok(records.len())
    }
}

impl PeriodicTask for LogTask {
    fn step(&mut self, _scope: &ComponentScope) -> Result<(), BehaviorError> {
        self.drain()
            .map(drop)
            .map_err(|e| BehaviorError::Failed(format!("log write failed: {e}")))
    }

    fn on_stop(&mut self, _scope: &ComponentScope) {
        let _ = self.drain();
    }
}
