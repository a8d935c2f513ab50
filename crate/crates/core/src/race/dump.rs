//! Trajectory dumps, one record per global event.
//!
//! JSON lines: `{"time":1.5,"agent":0,"values":[2,1]}`
//!
//! CSV: header `time,agent,v0,v1,...` then one row per event. Agents are
//! numbered from 0. Times are written with Rust's shortest round-trip `f64`
//! formatting, so reading a dump back reproduces the times bit-exactly.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::engine::RaceVisitor;
use super::trajectory::{RaceEvent, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DumpFormat {
    Jsonl,
    Csv,
}

#[derive(Serialize, Deserialize, Debug, PartialEq)]
pub struct EventRecord {
    pub time: f64,
    pub agent: usize,
    pub values: Vec<u64>,
}

/// Streams events to a writer as the race runs. The first I/O error stops
/// further writes and is kept for [`DumpVisitor::finish`].
pub struct DumpVisitor<W: Write> {
    writer: W,
    format: DumpFormat,
    wrote_header: bool,
    error: Option<io::Error>,
}

impl<W: Write> DumpVisitor<W> {
    pub fn new(writer: W, format: DumpFormat) -> Self {
        DumpVisitor {
            writer,
            format,
            wrote_header: false,
            error: None,
        }
    }

    fn write_event(&mut self, event: &RaceEvent, values: &[u64]) -> io::Result<()> {
        match self.format {
            DumpFormat::Jsonl => {
                let rec = EventRecord {
                    time: event.time,
                    agent: event.agent,
                    values: values.to_vec(),
                };
                serde_json::to_writer(&mut self.writer, &rec)?;
                self.writer.write_all(b"\n")
            }
            DumpFormat::Csv => {
                if !self.wrote_header {
                    write_csv_header(&mut self.writer, values.len())?;
                    self.wrote_header = true;
                }
                write!(self.writer, "{},{}", event.time, event.agent)?;
                for v in values {
                    write!(self.writer, ",{v}")?;
                }
                self.writer.write_all(b"\n")
            }
        }
    }

    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.writer.flush()?;
        Ok(self.writer)
    }
}

impl<W: Write> RaceVisitor for DumpVisitor<W> {
    fn on_event(&mut self, event: &RaceEvent, values: &[u64]) {
        if self.error.is_none() {
            if let Err(e) = self.write_event(event, values) {
                self.error = Some(e);
            }
        }
    }
}

fn write_csv_header<W: Write>(w: &mut W, agents: usize) -> io::Result<()> {
    w.write_all(b"time,agent")?;
    for a in 0..agents {
        write!(w, ",v{a}")?;
    }
    w.write_all(b"\n")
}

/// Write a recorded trajectory in the given format.
pub fn write_trajectory<W: Write>(traj: &Trajectory, writer: W, format: DumpFormat) -> io::Result<W> {
    let mut dump = DumpVisitor::new(writer, format);
    if format == DumpFormat::Csv {
        write_csv_header(&mut dump.writer, traj.num_agents())?;
        dump.wrote_header = true;
    }
    let mut values = traj.initial_values().to_vec();
    for e in traj.events() {
        values[e.agent] += 1;
        dump.on_event(e, &values);
    }
    dump.finish()
}
