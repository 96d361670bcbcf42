//! The `fairride-log/1` event log.
//!
//! One JSON object per line, UTF-8, `\n`-terminated. The first line is the
//! [`RunHeader`]; every following line is an [`Event`] tagged by `kind`.
//! Timestamps never decrease along the file. Within one epoch, events are
//! ordered by timestamp, then arrivals, then per-taxi events by taxi id (a
//! taxi's own events stay in the order they happened), then final
//! unmatched notices.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ids::{Epoch, NodeId, RequestId, Seconds, TaxiId};
use crate::matching::PolicyKind;
use crate::simulator::SimConfig;

pub const FORMAT_VERSION: &str = "fairride-log/1";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("event appended before the header")]
    EventBeforeHeader,
    #[error("header written twice")]
    HeaderTwice,
    #[error("event at t={ts} follows an event at t={last}")]
    OutOfOrder { ts: Seconds, last: Seconds },
    #[error("unsupported log format {0:?}; expected {FORMAT_VERSION:?}")]
    UnsupportedVersion(String),
    #[error("log is empty; expected a header line")]
    MissingHeader,
    #[error("truncated record at byte offset {offset}")]
    Truncated { offset: u64 },
    #[error("malformed record at byte offset {offset}: {message}")]
    Malformed { offset: u64, message: String },
    #[error("cannot encode record: {0}")]
    Encode(#[from] serde_json::Error),
}

/// Path and SHA-256 of an input file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

impl FileDigest {
    pub fn of_path(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref();
        let mut hasher = Sha256::new();
        let mut file = File::open(path)?;
        let mut buf = [0u8; 64 * 1024];
        loop {
            let n = file.read(&mut buf)?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
        }
        let path = std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
        Ok(Self {
            path: path.display().to_string(),
            sha256: hex::encode(hasher.finalize()),
        })
    }

    /// `Ok(true)` when the file at `path` hashes to the recorded digest.
    pub fn matches(&self, path: impl AsRef<Path>) -> io::Result<bool> {
        Ok(Self::of_path(path)?.sha256 == self.sha256)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigests {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nodes: Option<FileDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edges: Option<FileDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zones: Option<FileDigest>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub demand: Option<FileDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub format: String,
    pub policy: PolicyKind,
    pub seed: u64,
    pub config: SimConfig,
    pub inputs: InputDigests,
}

impl RunHeader {
    pub fn new(config: SimConfig, inputs: InputDigests) -> Self {
        Self {
            format: FORMAT_VERSION.to_string(),
            policy: config.policy,
            seed: config.seed,
            config,
            inputs,
        }
    }

    pub fn epoch_length(&self) -> Seconds {
        self.config.constraints.epoch_length
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    RequestArrived {
        ts: Seconds,
        request_id: RequestId,
        pickup: NodeId,
        dropoff: NodeId,
        arrival_epoch: Epoch,
        fare: f64,
        /// Shortest-path time from pickup to dropoff.
        direct_s: Seconds,
    },
    Matched {
        ts: Seconds,
        request_id: RequestId,
        taxi_id: TaxiId,
        epoch: Epoch,
    },
    Pickup {
        ts: Seconds,
        request_id: RequestId,
        taxi_id: TaxiId,
    },
    Dropoff {
        ts: Seconds,
        request_id: RequestId,
        taxi_id: TaxiId,
    },
    UnmatchedFinal {
        ts: Seconds,
        request_id: RequestId,
        epoch: Epoch,
    },
    /// Taxi state at the start of `epoch`, before that epoch's dispatch.
    Position {
        ts: Seconds,
        taxi_id: TaxiId,
        epoch: Epoch,
        node: NodeId,
        /// Far end of the edge being travelled, if mid-edge.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        toward: Option<NodeId>,
        progress_s: Seconds,
        n_onboard: u32,
    },
}

impl Event {
    pub fn ts(&self) -> Seconds {
        match *self {
            Event::RequestArrived { ts, .. }
            | Event::Matched { ts, .. }
            | Event::Pickup { ts, .. }
            | Event::Dropoff { ts, .. }
            | Event::UnmatchedFinal { ts, .. }
            | Event::Position { ts, .. } => ts,
        }
    }

    pub fn taxi(&self) -> Option<TaxiId> {
        match *self {
            Event::Matched { taxi_id, .. }
            | Event::Pickup { taxi_id, .. }
            | Event::Dropoff { taxi_id, .. }
            | Event::Position { taxi_id, .. } => Some(taxi_id),
            Event::RequestArrived { .. } | Event::UnmatchedFinal { .. } => None,
        }
    }

    /// Secondary ordering key within equal timestamps.
    pub(crate) fn order_group(&self) -> (u8, u32) {
        match self {
            Event::RequestArrived { .. } => (0, 0),
            Event::UnmatchedFinal { .. } => (2, 0),
            _ => (1, self.taxi().map_or(0, |t| t.0)),
        }
    }
}

/// Destination for a run's header and events.
pub trait EventSink {
    fn begin(&mut self, header: &RunHeader) -> Result<(), LogError>;

    fn append(&mut self, event: &Event) -> Result<(), LogError>;

    fn flush(&mut self) -> Result<(), LogError> {
        Ok(())
    }
}

/// Tracks the syntactic ordering rule shared by every sink.
#[derive(Debug, Default)]
struct OrderGuard {
    started: bool,
    last_ts: Seconds,
}

impl OrderGuard {
    fn begin(&mut self) -> Result<(), LogError> {
        if self.started {
            return Err(LogError::HeaderTwice);
        }
        self.started = true;
        Ok(())
    }

    fn check(&mut self, event: &Event) -> Result<(), LogError> {
        if !self.started {
            return Err(LogError::EventBeforeHeader);
        }
        let ts = event.ts();
        if ts < self.last_ts {
            return Err(LogError::OutOfOrder { ts, last: self.last_ts });
        }
        self.last_ts = ts;
        Ok(())
    }
}

/// A complete log held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub events: Vec<Event>,
}

/// In-memory sink producing a [`RunLog`].
#[derive(Debug, Default)]
pub struct RunLogBuilder {
    guard: OrderGuard,
    header: Option<RunHeader>,
    events: Vec<Event>,
}

impl RunLogBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn finish(self) -> Result<RunLog, LogError> {
        Ok(RunLog {
            header: self.header.ok_or(LogError::MissingHeader)?,
            events: self.events,
        })
    }
}

impl EventSink for RunLogBuilder {
    fn begin(&mut self, header: &RunHeader) -> Result<(), LogError> {
        self.guard.begin()?;
        self.header = Some(header.clone());
        Ok(())
    }

    fn append(&mut self, event: &Event) -> Result<(), LogError> {
        self.guard.check(event)?;
        self.events.push(event.clone());
        Ok(())
    }
}

/// Streams records to a writer as they are appended.
pub struct RunLogWriter<W: Write> {
    guard: OrderGuard,
    out: BufWriter<W>,
}

impl<W: Write> RunLogWriter<W> {
    pub fn new(out: W) -> Self {
        Self {
            guard: OrderGuard::default(),
            out: BufWriter::new(out),
        }
    }

    fn line<T: Serialize>(&mut self, value: &T) -> Result<(), LogError> {
        serde_json::to_writer(&mut self.out, value)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn into_inner(mut self) -> Result<W, LogError> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| LogError::Io(e.into_error()))
    }
}

impl RunLogWriter<File> {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, LogError> {
        Ok(Self::new(File::create(path)?))
    }
}

impl<W: Write> EventSink for RunLogWriter<W> {
    fn begin(&mut self, header: &RunHeader) -> Result<(), LogError> {
        self.guard.begin()?;
        self.line(header)
    }

    fn append(&mut self, event: &Event) -> Result<(), LogError> {
        self.guard.check(event)?;
        self.line(event)
    }

    fn flush(&mut self) -> Result<(), LogError> {
        self.out.flush()?;
        Ok(())
    }
}

impl RunLog {
    pub fn write_to(&self, out: impl Write) -> Result<(), LogError> {
        let mut w = RunLogWriter::new(out);
        w.begin(&self.header)?;
        for e in &self.events {
            w.append(e)?;
        }
        w.into_inner()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("in-memory write of an ordered log");
        buf
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<(), LogError> {
        self.write_to(File::create(path)?)
    }

    pub fn read_from(input: impl Read) -> Result<RunLog, LogError> {
        let reader = RunLogReader::new(BufReader::new(input))?;
        let header = reader.header().clone();
        let events = reader.collect::<Result<Vec<_>, _>>()?;
        Ok(RunLog { header, events })
    }

    /// Reads as many events as parse cleanly. A bad header is still an error;
    /// a bad event ends the read and is returned alongside the prefix.
    pub fn read_recovering(input: impl Read) -> Result<(RunLog, Option<LogError>), LogError> {
        let reader = RunLogReader::new(BufReader::new(input))?;
        let header = reader.header().clone();
        let mut events = Vec::new();
        for item in reader {
            match item {
                Ok(e) => events.push(e),
                Err(e) => return Ok((RunLog { header, events }, Some(e))),
            }
        }
        Ok((RunLog { header, events }, None))
    }
}

pub fn read_runlog(path: impl AsRef<Path>) -> Result<RunLog, LogError> {
    RunLog::read_from(File::open(path)?)
}

/// Streaming reader: the header is parsed eagerly, events lazily.
pub struct RunLogReader<R: BufRead> {
    input: R,
    header: RunHeader,
    offset: u64,
    line: String,
    failed: bool,
}

impl RunLogReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, LogError> {
        Self::new(BufReader::new(File::open(path)?))
    }
}

impl<R: BufRead> RunLogReader<R> {
    pub fn new(mut input: R) -> Result<Self, LogError> {
        let mut line = String::new();
        let n = input.read_line(&mut line)?;
        if n == 0 {
            return Err(LogError::MissingHeader);
        }
        if !line.ends_with('\n') {
            return Err(LogError::Truncated { offset: 0 });
        }
        let value: serde_json::Value = serde_json::from_str(&line).map_err(|e| LogError::Malformed {
            offset: 0,
            message: e.to_string(),
        })?;
        match value.get("format").and_then(|f| f.as_str()) {
            Some(FORMAT_VERSION) => {}
            Some(other) => return Err(LogError::UnsupportedVersion(other.to_string())),
            None => return Err(LogError::UnsupportedVersion(String::new())),
        }
        let header: RunHeader = serde_json::from_value(value).map_err(|e| LogError::Malformed {
            offset: 0,
            message: e.to_string(),
        })?;
        Ok(Self {
            input,
            header,
            offset: n as u64,
            line,
            failed: false,
        })
    }

    pub fn header(&self) -> &RunHeader {
        &self.header
    }
}

impl<R: BufRead> Iterator for RunLogReader<R> {
    type Item = Result<Event, LogError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        self.line.clear();
        let start = self.offset;
        let result = match self.input.read_line(&mut self.line) {
            Ok(0) => return None,
            Ok(n) => {
                self.offset += n as u64;
                if !self.line.ends_with('\n') {
                    Err(LogError::Truncated { offset: start })
                } else {
                    serde_json::from_str(&self.line).map_err(|e| LogError::Malformed {
                        offset: start,
                        message: e.to_string(),
                    })
                }
            }
            Err(e) => Err(LogError::Io(e)),
        };
        self.failed = result.is_err();
        Some(result)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> RunHeader {
        RunHeader::new(SimConfig::default(), InputDigests::default())
    }

    fn arrival(ts: Seconds, id: u64) -> Event {
        Event::RequestArrived {
            ts,
            request_id: RequestId(id),
            pickup: NodeId(1),
            dropoff: NodeId(3),
            arrival_epoch: (ts / 60) as Epoch,
            fare: 3.94,
            direct_s: 180,
        }
    }

    fn three_event_log() -> RunLog {
        RunLog {
            header: header(),
            events: vec![
                arrival(0, 1),
                Event::Matched {
                    ts: 0,
                    request_id: RequestId(1),
                    taxi_id: TaxiId(0),
                    epoch: 0,
                },
                Event::Position {
                    ts: 60,
                    taxi_id: TaxiId(0),
                    epoch: 1,
                    node: NodeId(1),
                    toward: Some(NodeId(2)),
                    progress_s: 60,
                    n_onboard: 1,
                },
            ],
        }
    }

    #[test]
    fn header_then_arrival_is_valid_prefix() {
        let mut b = RunLogBuilder::new();
        b.begin(&header()).unwrap();
        b.append(&arrival(0, 1)).unwrap();
        assert_eq!(b.finish().unwrap().events.len(), 1);
    }

    #[test]
    fn event_before_header_is_rejected() {
        let mut w = RunLogWriter::new(Vec::new());
        assert!(matches!(w.append(&arrival(0, 1)), Err(LogError::EventBeforeHeader)));
        let mut b = RunLogBuilder::new();
        assert!(matches!(b.append(&arrival(0, 1)), Err(LogError::EventBeforeHeader)));
    }

    #[test]
    fn decreasing_timestamp_is_rejected() {
        let mut b = RunLogBuilder::new();
        b.begin(&header()).unwrap();
        b.append(&arrival(120, 1)).unwrap();
        assert!(matches!(
            b.append(&arrival(60, 2)),
            Err(LogError::OutOfOrder { ts: 60, last: 120 })
        ));
    }

    #[test]
    fn unknown_request_is_accepted_at_append() {
        let mut b = RunLogBuilder::new();
        b.begin(&header()).unwrap();
        b.append(&Event::Pickup {
            ts: 0,
            request_id: RequestId(77),
            taxi_id: TaxiId(0),
        })
        .unwrap();
    }

    #[test]
    fn round_trip_three_events() {
        let log = three_event_log();
        let bytes = log.to_bytes();
        let back = RunLog::read_from(bytes.as_slice()).unwrap();
        assert_eq!(back, log);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn truncated_last_line_reports_offset_and_keeps_prefix() {
        let bytes = three_event_log().to_bytes();
        let cut = bytes.len() - 10;
        let last_start = bytes[..bytes.len() - 1].iter().rposition(|&b| b == b'\n').unwrap() + 1;
        let err = RunLog::read_from(&bytes[..cut]).unwrap_err();
        assert!(
            matches!(err, LogError::Truncated { offset } if offset == last_start as u64),
            "{err}"
        );
        let (partial, err) = RunLog::read_recovering(&bytes[..cut]).unwrap();
        assert_eq!(partial.events.len(), 2);
        assert!(err.is_some());
    }

    #[test]
    fn unsupported_version_is_rejected() {
        let mut text = String::from_utf8(three_event_log().to_bytes()).unwrap();
        text = text.replacen(FORMAT_VERSION, "99", 1);
        let err = RunLog::read_from(text.as_bytes()).unwrap_err();
        assert!(matches!(err, LogError::UnsupportedVersion(ref v) if v == "99"), "{err}");
    }

    #[test]
    fn empty_file_has_no_header() {
        assert!(matches!(RunLog::read_from(&b""[..]), Err(LogError::MissingHeader)));
    }

    #[test]
    fn digest_of_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        std::fs::write(&p, b"abc").unwrap();
        let d = FileDigest::of_path(&p).unwrap();
        assert_eq!(
            d.sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert!(d.matches(&p).unwrap());
        std::fs::write(&p, b"abd").unwrap();
        assert!(!d.matches(&p).unwrap());
    }
}
