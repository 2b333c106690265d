//! Line-oriented corpus I/O.
//!
//! The on-disk corpus format is JSONL: one session per line, shaped as
//! `{"id": "...", "source": "...", "dialog": ["utterance", ...]}`.
//! Reading is streaming — one line is resident at a time — so corpus-sized
//! files never need to fit in memory.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{DialogueSession, Utterance};
use crate::error::{Error, Result};

/// Supported corpus encodings. JSONL is currently the only one; converting
/// other corpus layouts into it is out of scope for this crate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CorpusFormat {
    #[default]
    Jsonl,
}

#[derive(Serialize, Deserialize)]
struct SessionRecord {
    id: String,
    source: String,
    dialog: Vec<String>,
}

/// Streaming session reader over any buffered byte source.
///
/// Each `next()` yields one parsed session or one error. In lenient mode
/// (`strict = false`) the reader keeps going after a malformed line, so a
/// caller can count or log bad records and still consume the rest. In strict
/// mode the first error ends the stream.
pub struct SessionReader<R> {
    reader: R,
    strict: bool,
    line: usize,
    bytes_read: u64,
    done: bool,
    buf: String,
}

impl<R: BufRead> SessionReader<R> {
    pub fn from_reader(reader: R, strict: bool) -> Self {
        SessionReader { reader, strict, line: 0, bytes_read: 0, done: false, buf: String::new() }
    }

    /// Bytes consumed from the underlying reader so far.
    pub fn bytes_read(&self) -> u64 {
        self.bytes_read
    }

    /// 1-based number of the most recently read line.
    pub fn line(&self) -> usize {
        self.line
    }

    fn parse_line(&self) -> Result<DialogueSession> {
        let record: SessionRecord = serde_json::from_str(self.buf.trim_end())
            .map_err(|e| Error::record(self.line, e.to_string()))?;
        record_to_session(record, self.line)
    }
}

fn record_to_session(record: SessionRecord, line: usize) -> Result<DialogueSession> {
    if record.dialog.is_empty() {
        return Err(Error::record(line, format!("session {}: empty dialog", record.id)));
    }
    let mut utterances = Vec::with_capacity(record.dialog.len());
    for (i, text) in record.dialog.into_iter().enumerate() {
        utterances.push(Utterance::new(text).map_err(|_| {
            Error::record(line, format!("session {}: utterance {i} is blank", record.id))
        })?);
    }
    DialogueSession::new(record.id, record.source, utterances)
        .map_err(|e| Error::record(line, e.to_string()))
}

impl<R: BufRead> Iterator for SessionReader<R> {
    type Item = Result<DialogueSession>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            self.buf.clear();
            match self.reader.read_line(&mut self.buf) {
                Ok(0) => {
                    self.done = true;
                    return None;
                }
                Ok(n) => {
                    self.line += 1;
                    self.bytes_read += n as u64;
                    if self.buf.trim().is_empty() {
                        continue; // tolerate blank lines between records
                    }
                    let parsed = self.parse_line();
                    if parsed.is_err() && self.strict {
                        self.done = true;
                    }
                    return Some(parsed);
                }
                Err(e) => {
                    self.done = true;
                    return Some(Err(Error::record(self.line + 1, e.to_string())));
                }
            }
        }
    }
}

/// Open a corpus file for streaming reads.
pub fn read_sessions(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    strict: bool,
) -> Result<SessionReader<BufReader<File>>> {
    let CorpusFormat::Jsonl = format;
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(SessionReader::from_reader(BufReader::new(file), strict))
}

/// Read a whole corpus into memory. In lenient mode malformed records are
/// logged and skipped; in strict mode the first error is returned.
pub fn collect_sessions(
    path: impl AsRef<Path>,
    format: CorpusFormat,
    strict: bool,
) -> Result<Vec<DialogueSession>> {
    let path = path.as_ref();
    let mut sessions = Vec::new();
    for item in read_sessions(path, format, strict)? {
        match item {
            Ok(s) => sessions.push(s),
            Err(e) if !strict => log::warn!("{}: skipping record: {e}", path.display()),
            Err(e) => return Err(e),
        }
    }
    Ok(sessions)
}

/// Streaming session writer; one canonical JSONL record per session.
pub struct SessionWriter<W: Write> {
    writer: W,
    /// Label used in error messages (a path, or e.g. `<stdout>`).
    label: PathBuf,
}

impl<W: Write> SessionWriter<W> {
    pub fn new(writer: W, label: impl Into<PathBuf>) -> Self {
        SessionWriter { writer, label: label.into() }
    }

    pub fn write(&mut self, session: &DialogueSession) -> Result<()> {
        let record = SessionRecord {
            id: session.id().to_string(),
            source: session.source().to_string(),
            dialog: session.utterances().iter().map(|u| u.text().to_string()).collect(),
        };
        let json = serde_json::to_string(&record)
            .map_err(|e| Error::Record { line: 0, message: e.to_string() })?;
        writeln!(self.writer, "{json}").map_err(|e| Error::io(&self.label, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush().map_err(|e| Error::io(&self.label, e))
    }
}

/// Read a simple list file: one entry per line, `#`-prefixed comment lines
/// and blank lines ignored, surrounding whitespace trimmed.
pub fn load_line_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(raw
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(String::from)
        .collect())
}

/// Write sessions to a JSONL file.
pub fn write_sessions<'a>(
    path: impl AsRef<Path>,
    sessions: impl IntoIterator<Item = &'a DialogueSession>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = SessionWriter::new(BufWriter::new(file), path);
    for session in sessions {
        writer.write(session)?;
    }
    writer.finish()
}
