//! JSON Lines trace: a header line followed by one record per event,
//! stall or iteration report, in emission order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::biwheel::IterationReport;
use crate::config::BiWheelConfig;
use crate::error::{Error, Result};
use crate::stream::{Role, StreamKind, TermEvent};

pub const ENGINE: &str = concat!("biwheel ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub engine: String,
    pub index_fingerprint: String,
    pub config: BiWheelConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub stream: String,
    pub kind: StreamKind,
    #[serde(flatten)]
    pub event: TermEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StallRecord {
    pub step: u64,
    pub stream: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Record {
    Header(TraceHeader),
    Event(EventRecord),
    Stall(StallRecord),
    Report(IterationReport),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub records: Vec<Record>,
}

impl Trace {
    pub fn new(header: TraceHeader) -> Self {
        Trace {
            header,
            records: Vec::new(),
        }
    }

    pub fn events(&self) -> impl Iterator<Item = &EventRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Event(e) => Some(e),
            _ => None,
        })
    }

    pub fn reports(&self) -> impl Iterator<Item = &IterationReport> {
        self.records.iter().filter_map(|r| match r {
            Record::Report(rep) => Some(rep),
            _ => None,
        })
    }

    pub fn stalls(&self) -> impl Iterator<Item = &StallRecord> {
        self.records.iter().filter_map(|r| match r {
            Record::Stall(s) => Some(s),
            _ => None,
        })
    }

    /// Events of one stream, in order.
    pub fn stream_events<'a>(
        &'a self,
        stream: &'a str,
    ) -> impl Iterator<Item = &'a TermEvent> + 'a {
        self.events()
            .filter(move |e| e.stream == stream)
            .map(|e| &e.event)
    }

    /// Stream ids in order of first appearance.
    pub fn stream_ids(&self, kind: StreamKind) -> Vec<String> {
        let mut ids: Vec<String> = Vec::new();
        for e in self.events().filter(|e| e.kind == kind) {
            if !ids.contains(&e.stream) {
                ids.push(e.stream.clone());
            }
        }
        ids
    }

    pub fn to_jsonl(&self) -> String {
        let mut out =
            serde_json::to_string(&Record::Header(self.header.clone())).expect("header serializes");
        out.push('\n');
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses a trace; errors name the 1-based record (line) number.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let bad = |record: usize, message: String| Error::Trace { record, message };
        let header = match lines.next() {
            None => return Err(bad(1, "empty trace".into())),
            Some((n, line)) => match serde_json::from_str::<Record>(line) {
                Ok(Record::Header(h)) => h,
                Ok(_) => return Err(bad(n + 1, "first record must be the header".into())),
                Err(e) => return Err(bad(n + 1, e.to_string())),
            },
        };
        let mut trace = Trace::new(header);
        let mut last_step: Option<u64> = None;
        for (n, line) in lines {
            let record: Record =
                serde_json::from_str(line).map_err(|e| bad(n + 1, e.to_string()))?;
            let step = match &record {
                Record::Header(_) => return Err(bad(n + 1, "duplicate header".into())),
                Record::Event(e) => Some(e.event.step),
                Record::Stall(s) => Some(s.step),
                Record::Report(_) => None,
            };
            if let Some(step) = step {
                if last_step.is_some_and(|prev| step <= prev) {
                    return Err(bad(n + 1, format!("step {step} is out of order")));
                }
                last_step = Some(step);
            }
            trace.records.push(record);
        }
        Ok(trace)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    /// Human-readable listing of every OAS stream.
    pub fn render_oas(&self) -> String {
        let mut out = String::new();
        for id in self.stream_ids(StreamKind::Oas) {
            let _ = writeln!(out, "{id}:");
            for e in self.stream_events(&id) {
                let mark = match e.role {
                    Role::Support => "",
                    Role::Interleave => "  [interleave]",
                    Role::Summary => "  [summary]",
                    Role::Annotation => "  [annotation]",
                };
                let _ = writeln!(out, "  {:>5}  {}{}", e.step, e.term, mark);
            }
        }
        out
    }
}
