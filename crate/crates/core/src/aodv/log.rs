//! Per-node event log. One line per event:
//!
//! ```text
//! time kind origin dst hop_count dest_seq note
//! ```
//!
//! Absent fields are written as `-`. The final line of a complete log has
//! kind `END` and `lines=<n>` in its note, where `n` counts the lines before
//! it.

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use crate::sim::SimTime;
use crate::{Error, NodeId, Result};

macro_rules! log_kinds {
    ($($variant:ident => $text:literal),* $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum LogKind {
            $($variant),*
        }

        impl LogKind {
            pub const ALL: &'static [LogKind] = &[$(LogKind::$variant),*];

            pub fn as_str(self) -> &'static str {
                match self {
                    $(LogKind::$variant => $text),*
                }
            }
        }

        impl FromStr for LogKind {
            type Err = String;
            fn from_str(s: &str) -> std::result::Result<Self, String> {
                match s {
                    $($text => Ok(LogKind::$variant),)*
                    other => Err(format!("unknown event kind `{other}`")),
                }
            }
        }
    };
}

log_kinds! {
    RreqSent => "RREQ_SENT",
    RreqRecv => "RREQ_RECV",
    RreqFwd => "RREQ_FWD",
    RreqDup => "RREQ_DUP",
    RrepSent => "RREP_SENT",
    RrepRecv => "RREP_RECV",
    RrepFwd => "RREP_FWD",
    RerrSent => "RERR_SENT",
    RerrRecv => "RERR_RECV",
    RerrFwd => "RERR_FWD",
    DataOrig => "DATA_ORIG",
    DataRecv => "DATA_RECV",
    DataFwd => "DATA_FWD",
    DataDrop => "DATA_DROP",
    DiscInit => "DISC_INIT",
    RouteAdd => "ROUTE_ADD",
    RouteInvalid => "ROUTE_INVALID",
    RouteUpdate => "ROUTE_UPDATE",
    NbrAdd => "NBR_ADD",
    NbrDel => "NBR_DEL",
    LinkBreak => "LINK_BREAK",
    Window => "WINDOW",
    End => "END",
}

impl fmt::Display for LogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub time: SimTime,
    pub kind: LogKind,
    pub origin: Option<NodeId>,
    pub dst: Option<NodeId>,
    pub hop_count: Option<u32>,
    pub dest_seq: Option<u64>,
    /// Comma-separated `key=value` pairs without spaces, or empty.
    pub note: String,
}

impl LogRecord {
    pub fn new(time: SimTime, kind: LogKind) -> Self {
        LogRecord {
            time,
            kind,
            origin: None,
            dst: None,
            hop_count: None,
            dest_seq: None,
            note: String::new(),
        }
    }

    pub fn origin(mut self, n: NodeId) -> Self {
        self.origin = Some(n);
        self
    }

    pub fn dst(mut self, n: NodeId) -> Self {
        self.dst = Some(n);
        self
    }

    pub fn hops(mut self, h: u32) -> Self {
        self.hop_count = Some(h);
        self
    }

    pub fn seq(mut self, s: u64) -> Self {
        self.dest_seq = Some(s);
        self
    }

    pub fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    /// Looks up `key` in the note.
    pub fn note_value(&self, key: &str) -> Option<&str> {
        self.note.split(',').find_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            (k == key).then_some(v)
        })
    }

    pub fn note_f64(&self, key: &str) -> Option<f64> {
        self.note_value(key).and_then(|v| v.parse().ok())
    }

    pub fn parse_line(line: &str) -> std::result::Result<Self, String> {
        let cols: Vec<&str> = line.split(' ').collect();
        if cols.len() != 7 {
            return Err(format!("expected 7 columns, found {}", cols.len()));
        }
        let time = parse_time(cols[0])?;
        let kind = cols[1].parse()?;
        fn opt<T: FromStr>(s: &str) -> std::result::Result<Option<T>, String> {
            if s == "-" {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| format!("bad field `{s}`"))
            }
        }
        Ok(LogRecord {
            time,
            kind,
            origin: opt(cols[2])?,
            dst: opt(cols[3])?,
            hop_count: opt(cols[4])?,
            dest_seq: opt(cols[5])?,
            note: if cols[6] == "-" {
                String::new()
            } else {
                cols[6].to_string()
            },
        })
    }
}

fn parse_time(s: &str) -> std::result::Result<SimTime, String> {
    let (secs, frac) = s.split_once('.').unwrap_or((s, "0"));
    let secs: u64 = secs.parse().map_err(|_| format!("bad time `{s}`"))?;
    if frac.len() > 6 || !frac.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("bad time `{s}`"));
    }
    let micros: u64 = format!("{frac:0<6}").parse().map_err(|_| format!("bad time `{s}`"))?;
    Ok(SimTime(secs * 1_000_000 + micros))
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn col<T: fmt::Display>(f: &mut fmt::Formatter<'_>, v: &Option<T>) -> fmt::Result {
            match v {
                Some(v) => write!(f, " {v}"),
                None => f.write_str(" -"),
            }
        }
        write!(f, "{} {}", self.time, self.kind)?;
        col(f, &self.origin)?;
        col(f, &self.dst)?;
        col(f, &self.hop_count)?;
        col(f, &self.dest_seq)?;
        if self.note.is_empty() {
            f.write_str(" -")
        } else {
            write!(f, " {}", self.note)
        }
    }
}

/// Append-only event log of one node.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NodeLog {
    pub records: Vec<LogRecord>,
}

impl NodeLog {
    pub fn push(&mut self, r: LogRecord) {
        self.records.push(r);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn count(&self, kind: LogKind) -> usize {
        self.records.iter().filter(|r| r.kind == kind).count()
    }

    /// Renders the log including the `END` trailer.
    pub fn render(&self, end: SimTime) -> String {
        let mut out = String::with_capacity(self.records.len() * 40);
        for r in &self.records {
            let _ = writeln!(out, "{r}");
        }
        let trailer = LogRecord::new(end, LogKind::End).note(format!("lines={}", self.records.len()));
        let _ = writeln!(out, "{trailer}");
        out
    }

    /// Parses a rendered log, rejecting it if the trailer is missing or
    /// disagrees with the line count.
    pub fn parse(text: &str, path: &Path) -> Result<NodeLog> {
        let mut records = Vec::new();
        let mut ended = false;
        for (i, line) in text.lines().enumerate() {
            if ended {
                return Err(Error::parse(path, i + 1, "content after END trailer"));
            }
            let r = LogRecord::parse_line(line).map_err(|e| Error::parse(path, i + 1, e))?;
            if r.kind == LogKind::End {
                let n: usize = r
                    .note_value("lines")
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse(path, i + 1, "END trailer without line count"))?;
                if n != records.len() {
                    return Err(Error::TruncatedLog(path.to_path_buf()));
                }
                ended = true;
            } else {
                records.push(r);
            }
        }
        if !ended {
            return Err(Error::TruncatedLog(path.to_path_buf()));
        }
        Ok(NodeLog { records })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trips_through_text() {
        let r = LogRecord::new(SimTime(12_345_678), LogKind::RrepRecv)
            .origin(3)
            .dst(7)
            .hops(2)
            .seq(110)
            .note("delta=100");
        let line = r.to_string();
        assert_eq!(line, "12.345678 RREP_RECV 3 7 2 110 delta=100");
        assert_eq!(LogRecord::parse_line(&line).unwrap(), r);

        let bare = LogRecord::new(SimTime(1), LogKind::NbrAdd);
        assert_eq!(bare.to_string(), "0.000001 NBR_ADD - - - - -");
        assert_eq!(LogRecord::parse_line(&bare.to_string()).unwrap(), bare);
    }

    #[test]
    fn every_kind_parses_back() {
        for k in LogKind::ALL {
            assert_eq!(k.as_str().parse::<LogKind>().unwrap(), *k);
        }
    }

    #[test]
    fn truncated_log_is_rejected() {
        let mut log = NodeLog::default();
        log.push(LogRecord::new(SimTime(0), LogKind::DataOrig));
        log.push(LogRecord::new(SimTime(5), LogKind::DataOrig));
        let text = log.render(SimTime(10));
        let p = Path::new("node.log");
        assert_eq!(NodeLog::parse(&text, p).unwrap(), log);

        let cut: String = text.lines().take(2).map(|l| format!("{l}\n")).collect();
        assert!(matches!(NodeLog::parse(&cut, p), Err(Error::TruncatedLog(_))));
        let lying = text.replace("lines=2", "lines=3");
        assert!(matches!(NodeLog::parse(&lying, p), Err(Error::TruncatedLog(_))));
    }

    #[test]
    fn note_lookup() {
        let r = LogRecord::new(SimTime(0), LogKind::Window).note("start=10.000000,nbrs=4");
        assert_eq!(r.note_value("nbrs"), Some("4"));
        assert_eq!(r.note_f64("start"), Some(10.0));
        assert_eq!(r.note_value("missing"), None);
    }
}
