//! Tag and event-log files.
//!
//! PTAG: the bytes `PTAG`, a little-endian u16 version (1), then 9-byte
//! records of channel code (u8) and time in ps (u64 LE), sorted by time.
//! CSV: header `channel,time_ps`, one tag per line. Event logs are CSV with
//! header `kind,time_ps,store_ps,ddg2_ps,ddg1_ps`, empty fields where a
//! kind has no such time.

use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};

use photosync_core::sim::{Channel, LogEntry, RecordSink, TimeTag};

pub const MAGIC: &[u8; 4] = b"PTAG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: u64 = 6;
pub const RECORD_LEN: u64 = 9;
pub const TAG_CSV_HEADER: &str = "channel,time_ps";
pub const LOG_CSV_HEADER: &str = "kind,time_ps,store_ps,ddg2_ps,ddg1_ps";

#[derive(Debug, thiserror::Error)]
pub enum FormatError {
    #[error("byte {offset}: {message}")]
    Binary { offset: u64, message: String },
    #[error("line {line}: {message}")]
    Text { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn binary(offset: u64, message: impl Into<String>) -> FormatError {
    FormatError::Binary {
        offset,
        message: message.into(),
    }
}

fn text(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Text {
        line,
        message: message.into(),
    }
}

/// Tag file encodings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagFormat {
    Ptag,
    Csv,
}

impl TagFormat {
    /// Guesses the format from the first bytes of a file.
    pub fn sniff(head: &[u8]) -> TagFormat {
        if head.starts_with(MAGIC) {
            TagFormat::Ptag
        } else {
            TagFormat::Csv
        }
    }
}

/// Streams tags into a writer in either encoding.
pub struct TagWriter<W: Write> {
    out: BufWriter<W>,
    format: TagFormat,
    last: u64,
    written: u64,
}

impl<W: Write> TagWriter<W> {
    pub fn new(out: W, format: TagFormat) -> io::Result<Self> {
        let mut out = BufWriter::with_capacity(1 << 20, out);
        match format {
            TagFormat::Ptag => {
                out.write_all(MAGIC)?;
                out.write_all(&VERSION.to_le_bytes())?;
            }
            TagFormat::Csv => writeln!(out, "{TAG_CSV_HEADER}")?,
        }
        Ok(TagWriter {
            out,
            format,
            last: 0,
            written: 0,
        })
    }

    pub fn write(&mut self, tag: TimeTag) -> io::Result<()> {
        if tag.time < self.last {
            return Err(io::Error::new(
                io::ErrorKind::InvalidInput,
                "tags must be written in time order",
            ));
        }
        self.last = tag.time;
        self.written += 1;
        match self.format {
            TagFormat::Ptag => {
                let mut rec = [0u8; 9];
                rec[0] = tag.channel.code();
                rec[1..].copy_from_slice(&tag.time.to_le_bytes());
                self.out.write_all(&rec)
            }
            TagFormat::Csv => writeln!(self.out, "{},{}", tag.channel.code(), tag.time),
        }
    }

    pub fn written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| e.into_error())
    }
}

/// Streams log entries as CSV.
pub struct LogWriter<W: Write> {
    out: BufWriter<W>,
}

impl<W: Write> LogWriter<W> {
    pub fn new(out: W) -> io::Result<Self> {
        let mut out = BufWriter::new(out);
        writeln!(out, "{LOG_CSV_HEADER}")?;
        Ok(LogWriter { out })
    }

    pub fn write(&mut self, e: &LogEntry) -> io::Result<()> {
        let opt = |t: Option<u64>| t.map(|t| t.to_string()).unwrap_or_default();
        match *e {
            LogEntry::Ddg2Accept { time } => writeln!(self.out, "ddg2,{time},,,"),
            LogEntry::Ddg1Accept { time, ddg2_time } => {
                writeln!(self.out, "ddg1,{time},,{},", opt(ddg2_time))
            }
            LogEntry::PcStore { time } => writeln!(self.out, "store,{time},,,"),
            LogEntry::PcRetrieve {
                time,
                store_time,
                ddg2_time,
                ddg1_time,
            } => writeln!(
                self.out,
                "retrieve,{time},{store_time},{},{ddg1_time}",
                opt(ddg2_time)
            ),
        }
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        self.out.into_inner().map_err(|e| e.into_error())
    }
}

/// A [`RecordSink`] that writes tags and, optionally, the event log.
///
/// The first I/O error stops writing and is returned by [`FileSink::finish`].
pub struct FileSink<T: Write, L: Write> {
    pub tags: TagWriter<T>,
    pub log: Option<LogWriter<L>>,
    error: Option<io::Error>,
}

impl<T: Write, L: Write> FileSink<T, L> {
    pub fn new(tags: TagWriter<T>, log: Option<LogWriter<L>>) -> Self {
        FileSink {
            tags,
            log,
            error: None,
        }
    }

    pub fn finish(self) -> io::Result<(T, Option<L>)> {
        if let Some(e) = self.error {
            return Err(e);
        }
        let t = self.tags.finish()?;
        let l = self.log.map(LogWriter::finish).transpose()?;
        Ok((t, l))
    }
}

impl<T: Write, L: Write> RecordSink for FileSink<T, L> {
    fn tag(&mut self, tag: TimeTag) {
        if self.error.is_none() {
            if let Err(e) = self.tags.write(tag) {
                self.error = Some(e);
            }
        }
    }

    fn log(&mut self, entry: LogEntry) {
        if let (None, Some(log)) = (&self.error, &mut self.log) {
            if let Err(e) = log.write(&entry) {
                self.error = Some(e);
            }
        }
    }
}

/// Iterator over the tags of a PTAG or CSV stream.
pub struct TagReader<R: Read> {
    input: BufReader<R>,
    format: TagFormat,
    offset: u64,
    line: usize,
    last: u64,
    buf: String,
}

impl<R: Read> TagReader<R> {
    /// Detects the format and checks the header.
    pub fn new(input: R) -> Result<Self, FormatError> {
        let mut input = BufReader::with_capacity(1 << 20, input);
        let head = input.fill_buf()?;
        let format = TagFormat::sniff(head);
        let mut r = TagReader {
            input,
            format,
            offset: 0,
            line: 0,
            last: 0,
            buf: String::new(),
        };
        match format {
            TagFormat::Ptag => {
                let mut h = [0u8; HEADER_LEN as usize];
                let n = read_full(&mut r.input, &mut h)?;
                if n < h.len() {
                    return Err(binary(n as u64, "truncated header"));
                }
                let v = u16::from_le_bytes([h[4], h[5]]);
                if v != VERSION {
                    return Err(binary(4, format!("unsupported version {v}")));
                }
                r.offset = HEADER_LEN;
            }
            TagFormat::Csv => {
                if let Some(first) = r.next_line()? {
                    if first.trim() != TAG_CSV_HEADER {
                        return Err(text(1, format!("expected header `{TAG_CSV_HEADER}`")));
                    }
                }
            }
        }
        Ok(r)
    }

    pub fn format(&self) -> TagFormat {
        self.format
    }

    fn next_line(&mut self) -> io::Result<Option<String>> {
        self.buf.clear();
        if self.input.read_line(&mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line += 1;
        Ok(Some(self.buf.trim_end_matches(['\n', '\r']).to_string()))
    }

    fn read_tag(&mut self) -> Result<Option<TimeTag>, FormatError> {
        let tag = match self.format {
            TagFormat::Ptag => {
                let mut rec = [0u8; RECORD_LEN as usize];
                let n = read_full(&mut self.input, &mut rec)?;
                if n == 0 {
                    return Ok(None);
                }
                let at = self.offset;
                if n < rec.len() {
                    return Err(binary(
                        at,
                        format!("truncated record ({n} of {RECORD_LEN} bytes)"),
                    ));
                }
                self.offset += RECORD_LEN;
                let channel = Channel::from_code(rec[0])
                    .ok_or_else(|| binary(at, format!("unknown channel code {}", rec[0])))?;
                let time = u64::from_le_bytes(rec[1..].try_into().expect("8 bytes"));
                if time < self.last {
                    return Err(binary(at, "tags are not sorted by time"));
                }
                TimeTag { channel, time }
            }
            TagFormat::Csv => {
                let line = loop {
                    match self.next_line()? {
                        None => return Ok(None),
                        Some(l) if l.trim().is_empty() => continue,
                        Some(l) => break l,
                    }
                };
                let n = self.line;
                let (c, t) = line
                    .split_once(',')
                    .ok_or_else(|| text(n, "expected `channel,time_ps`"))?;
                let channel = parse_channel(c.trim())
                    .ok_or_else(|| text(n, format!("unknown channel `{}`", c.trim())))?;
                let time: u64 = t
                    .trim()
                    .parse()
                    .map_err(|_| text(n, format!("bad time `{}`", t.trim())))?;
                if time < self.last {
                    return Err(text(n, "tags are not sorted by time"));
                }
                TimeTag { channel, time }
            }
        };
        self.last = tag.time;
        Ok(Some(tag))
    }
}

impl<R: Read> Iterator for TagReader<R> {
    type Item = Result<TimeTag, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_tag().transpose()
    }
}

fn parse_channel(s: &str) -> Option<Channel> {
    if let Ok(code) = s.parse::<u8>() {
        return Channel::from_code(code);
    }
    Channel::ALL.into_iter().find(|c| c.name() == s)
}

fn read_full(r: &mut impl Read, buf: &mut [u8]) -> io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..]) {
            Ok(0) => break,
            Ok(k) => n += k,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(n)
}

/// Iterator over the entries of an event-log CSV stream.
pub struct LogReader<R: Read> {
    input: BufReader<R>,
    line: usize,
    buf: String,
}

impl<R: Read> LogReader<R> {
    pub fn new(input: R) -> Result<Self, FormatError> {
        let mut r = LogReader {
            input: BufReader::new(input),
            line: 0,
            buf: String::new(),
        };
        if let Some(h) = r.next_line()? {
            if h.trim() != LOG_CSV_HEADER {
                return Err(text(1, format!("expected header `{LOG_CSV_HEADER}`")));
            }
        }
        Ok(r)
    }

    fn next_line(&mut self) -> io::Result<Option<String>> {
        self.buf.clear();
        if self.input.read_line(&mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line += 1;
        Ok(Some(self.buf.trim_end_matches(['\n', '\r']).to_string()))
    }

    fn read_entry(&mut self) -> Result<Option<LogEntry>, FormatError> {
        let l = loop {
            match self.next_line()? {
                None => return Ok(None),
                Some(l) if l.trim().is_empty() => continue,
                Some(l) => break l,
            }
        };
        let n = self.line;
        let f: Vec<&str> = l.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(text(n, "expected 5 fields"));
        }
        let num = |s: &str| -> Result<u64, FormatError> {
            s.parse().map_err(|_| text(n, format!("bad time `{s}`")))
        };
        let opt = |s: &str| -> Result<Option<u64>, FormatError> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let time = num(f[1])?;
        Ok(Some(match f[0] {
            "ddg2" => LogEntry::Ddg2Accept { time },
            "ddg1" => LogEntry::Ddg1Accept {
                time,
                ddg2_time: opt(f[3])?,
            },
            "store" => LogEntry::PcStore { time },
            "retrieve" => LogEntry::PcRetrieve {
                time,
                store_time: num(f[2])?,
                ddg2_time: opt(f[3])?,
                ddg1_time: num(f[4])?,
            },
            k => return Err(text(n, format!("unknown entry kind `{k}`"))),
        }))
    }
}

impl<R: Read> Iterator for LogReader<R> {
    type Item = Result<LogEntry, FormatError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_entry().transpose()
    }
}

/// Feeds tags and log entries to a sink in time order (log entries first on ties).
pub fn replay<S, T, L>(tags: T, log: L, sink: &mut S) -> Result<(), FormatError>
where
    S: RecordSink,
    T: Iterator<Item = Result<TimeTag, FormatError>>,
    L: Iterator<Item = Result<LogEntry, FormatError>>,
{
    let mut log = log.peekable();
    for tag in tags {
        let tag = tag?;
        while let Some(e) = log.next_if(|e| e.as_ref().map_or(true, |e| e.time() <= tag.time)) {
            sink.log(e?);
        }
        sink.tag(tag);
    }
    for e in log {
        sink.log(e?);
    }
    Ok(())
}

/// Encodes tags into an in-memory buffer.
pub fn encode(tags: &[TimeTag], format: TagFormat) -> io::Result<Vec<u8>> {
    let mut w = TagWriter::new(Vec::new(), format)?;
    for t in tags {
        w.write(*t)?;
    }
    w.finish()
}

/// Decodes a complete tag stream.
pub fn decode(bytes: &[u8]) -> Result<Vec<TimeTag>, FormatError> {
    TagReader::new(bytes)?.collect()
}
