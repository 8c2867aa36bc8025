//! Device backends, the 4-byte wire frame, the event log format and the
//! live MIDI byte source.

use crate::layout::ActuatorSite;
use crate::timeline::DeviceCommand;
use serde::Deserialize;
use std::fmt::Write as _;
use std::io::{self, Read, Write};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;
use thiserror::Error;

pub const SYNC: u8 = 0xA5;
pub const FRAME_LEN: usize = 4;
pub const SERIAL_BAUD: u32 = 115_200;
pub const LOG_HEADER: &str = "#tactile-log v1";

const CRC8_TABLE: [u8; 256] = {
    let mut table = [0u8; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = i as u8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x80 != 0 { (crc << 1) ^ 0x07 } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
};

/// CRC-8, polynomial 0x07, init 0x00, no reflection, no final xor.
pub fn crc8(bytes: &[u8]) -> u8 {
    bytes.iter().fold(0, |crc, &b| CRC8_TABLE[usize::from(crc ^ b)])
}

/// `[SYNC, site id, intensity, crc8(id, intensity)]`
pub fn encode_frame(site: ActuatorSite, intensity: u8) -> [u8; FRAME_LEN] {
    let id = site.id();
    [SYNC, id, intensity, crc8(&[id, intensity])]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum FrameError {
    #[error("frame must start with 0xA5, found {0:#04x}")]
    BadSync(u8),
    #[error("site id {0} out of range")]
    BadSite(u8),
    #[error("crc mismatch: frame carries {found:#04x}, expected {expected:#04x}")]
    BadCrc { found: u8, expected: u8 },
}

pub fn decode_frame(frame: &[u8; FRAME_LEN]) -> Result<(ActuatorSite, u8), FrameError> {
    let [sync, id, intensity, crc] = *frame;
    if sync != SYNC {
        return Err(FrameError::BadSync(sync));
    }
    let site = ActuatorSite::from_id(id).ok_or(FrameError::BadSite(id))?;
    let expected = crc8(&[id, intensity]);
    if crc != expected {
        return Err(FrameError::BadCrc { found: crc, expected });
    }
    Ok((site, intensity))
}

/// Receiver-side frame recovery from an unreliable byte stream.
///
/// Slides one byte at a time until four buffered bytes form a valid frame.
#[derive(Debug, Default, Clone)]
pub struct FrameScanner {
    buf: Vec<u8>,
    skipped: u64,
}

impl FrameScanner {
    pub fn new() -> Self {
        Self::default()
    }

    /// Bytes dropped while searching for a frame boundary.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    pub fn push(&mut self, bytes: &[u8]) -> Vec<(ActuatorSite, u8)> {
        self.buf.extend_from_slice(bytes);
        let mut out = Vec::new();
        let mut pos = 0;
        while self.buf.len() - pos >= FRAME_LEN {
            let frame: [u8; FRAME_LEN] = self.buf[pos..pos + FRAME_LEN].try_into().unwrap();
            match decode_frame(&frame) {
                Ok(decoded) => {
                    out.push(decoded);
                    pos += FRAME_LEN;
                }
                Err(_) => {
                    self.skipped += 1;
                    pos += 1;
                }
            }
        }
        self.buf.drain(..pos);
        out
    }
}

/// Sink for device commands. One writer per instance.
pub trait Backend {
    fn send(&mut self, cmd: &DeviceCommand) -> io::Result<()>;

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

/// Discards commands, counting them.
#[derive(Debug, Default, Clone)]
pub struct NullBackend {
    pub sent: usize,
}

impl Backend for NullBackend {
    fn send(&mut self, _cmd: &DeviceCommand) -> io::Result<()> {
        self.sent += 1;
        Ok(())
    }
}

/// Keeps every command in memory.
#[derive(Debug, Default, Clone)]
pub struct CaptureBackend {
    pub commands: Vec<DeviceCommand>,
}

impl Backend for CaptureBackend {
    fn send(&mut self, cmd: &DeviceCommand) -> io::Result<()> {
        self.commands.push(*cmd);
        Ok(())
    }
}

/// Writes wire frames to a byte sink, typically a serial port.
#[derive(Debug)]
pub struct FrameBackend<W: Write> {
    out: W,
}

impl<W: Write> FrameBackend<W> {
    pub fn new(out: W) -> Self {
        FrameBackend { out }
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Backend for FrameBackend<W> {
    fn send(&mut self, cmd: &DeviceCommand) -> io::Result<()> {
        self.out.write_all(&encode_frame(cmd.site, cmd.intensity))?;
        self.out.flush()
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Streams the event log format; the header is written on construction.
#[derive(Debug)]
pub struct LogBackend<W: Write> {
    out: W,
}

impl<W: Write> LogBackend<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{LOG_HEADER}")?;
        Ok(LogBackend { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> Backend for LogBackend<W> {
    fn send(&mut self, cmd: &DeviceCommand) -> io::Result<()> {
        writeln!(self.out, "{}", log_line(cmd))
    }

    fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }
}

/// Forwards raw MIDI bytes unchanged, for firmware that expects plain MIDI.
#[derive(Debug)]
pub struct MidiPassthrough<W: Write> {
    out: W,
}

impl<W: Write> MidiPassthrough<W> {
    pub fn new(out: W) -> Self {
        MidiPassthrough { out }
    }

    pub fn forward(&mut self, bytes: &[u8]) -> io::Result<()> {
        self.out.write_all(bytes)?;
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

fn log_line(cmd: &DeviceCommand) -> String {
    format!(
        "{{\"t\":{:.6},\"site\":\"{}\",\"intensity\":{}}}",
        cmd.t,
        cmd.site.name(),
        cmd.intensity
    )
}

/// Renders commands in the log format: header line, then one JSON object
/// per command in input order.
pub fn write_log(commands: &[DeviceCommand]) -> String {
    let mut out = String::with_capacity(16 + commands.len() * 48);
    out.push_str(LOG_HEADER);
    out.push('\n');
    for cmd in commands {
        let _ = writeln!(out, "{}", log_line(cmd));
    }
    out
}

#[derive(Debug, Error, PartialEq)]
pub enum LogError {
    #[error("missing `{LOG_HEADER}` header line")]
    MissingHeader,
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct LogRecord {
    t: f64,
    site: String,
    intensity: u8,
}

/// Parses the log format back into commands. Blank lines are ignored.
pub fn read_log(text: &str) -> Result<Vec<DeviceCommand>, LogError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == LOG_HEADER => {}
        _ => return Err(LogError::MissingHeader),
    }
    let mut out = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| LogError::BadLine { line: i + 1, message };
        let rec: LogRecord = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        let site = rec.site.parse::<ActuatorSite>().map_err(|e| bad(e.to_string()))?;
        if !rec.t.is_finite() || rec.t < 0.0 {
            return Err(bad(format!("time {} is not a non-negative number", rec.t)));
        }
        out.push(DeviceCommand {
            t: rec.t,
            site,
            intensity: rec.intensity,
        });
    }
    Ok(out)
}

/// Chunk capacity of the reader-to-consumer queue.
pub const SOURCE_QUEUE_DEPTH: usize = 64;
const READ_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SourceEvent {
    Data(Vec<u8>),
    /// Always the last event. `error` is set when the source failed.
    End { error: Option<String> },
}

/// Live MIDI byte source read on its own thread.
///
/// Chunks arrive in order through a bounded queue; a full queue blocks the
/// reader. Read timeouts are retried so serial ports can poll `cancel`.
pub struct MidiSource {
    pub events: Receiver<SourceEvent>,
    cancel: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
}

impl MidiSource {
    pub fn cancel_flag(&self) -> Arc<AtomicBool> {
        Arc::clone(&self.cancel)
    }

    pub fn cancel(&self) {
        self.cancel.store(true, Ordering::Relaxed);
    }
}

impl Drop for MidiSource {
    fn drop(&mut self) {
        self.cancel();
        // a reader blocked in read() on a silent source cannot be joined
        if let Some(h) = self.handle.take() {
            if h.is_finished() {
                let _ = h.join();
            }
        }
    }
}

pub fn read_midi_source<R: Read + Send + 'static>(mut reader: R) -> MidiSource {
    let (tx, rx) = mpsc::sync_channel(SOURCE_QUEUE_DEPTH);
    let cancel = Arc::new(AtomicBool::new(false));
    let flag = Arc::clone(&cancel);
    let handle = std::thread::spawn(move || {
        let mut buf = [0u8; READ_CHUNK];
        let end = loop {
            if flag.load(Ordering::Relaxed) {
                break SourceEvent::End { error: None };
            }
            match reader.read(&mut buf) {
                Ok(0) => break SourceEvent::End { error: None },
                Ok(n) => {
                    if tx.send(SourceEvent::Data(buf[..n].to_vec())).is_err() {
                        return;
                    }
                }
                Err(e) if matches!(e.kind(), io::ErrorKind::Interrupted | io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock) => {}
                Err(e) => break SourceEvent::End { error: Some(e.to_string()) },
            }
        };
        let _ = tx.send(end);
    });
    MidiSource {
        events: rx,
        cancel,
        handle: Some(handle),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::ActuatorSite::*;
    use proptest::prelude::*;

    /// Shift-register CRC-8/0x07, one bit at a time.
    fn crc8_bitwise(bytes: &[u8]) -> u8 {
        let mut reg: u16 = 0;
        for &b in bytes {
            for bit in (0..8).rev() {
                let top = (reg >> 7) & 1;
                let input = u16::from(b >> bit) & 1;
                reg = (reg << 1) & 0xFF;
                if top ^ input == 1 {
                    reg ^= 0x07;
                }
            }
        }
        reg as u8
    }

    #[test]
    fn crc_check_value() {
        assert_eq!(crc8_bitwise(b"123456789"), 0xF4);
        assert_eq!(crc8(b"123456789"), 0xF4);
    }

    #[test]
    fn table_matches_bitwise() {
        for a in 0..=255u8 {
            for b in [0u8, 1, 0x7F, 0xFF] {
                assert_eq!(crc8(&[a, b]), crc8_bitwise(&[a, b]));
            }
        }
    }

    #[test]
    fn golden_frames() {
        assert_eq!(encode_frame(TipThumb, 0), [0xA5, 0x00, 0x00, 0x00]);
        assert_eq!(encode_frame(Hypothenar, 255), [0xA5, 0x09, 0xFF, crc8_bitwise(&[0x09, 0xFF])]);
        assert_eq!(encode_frame(Hypothenar, 255)[3], 0x4E);
    }

    #[test]
    fn exhaustive_round_trip() {
        for site in ActuatorSite::ALL {
            for i in 0..=255u8 {
                assert_eq!(decode_frame(&encode_frame(site, i)), Ok((site, i)));
            }
        }
    }

    #[test]
    fn decode_rejects_corruption() {
        assert_eq!(decode_frame(&[0x00, 0, 0, 0]), Err(FrameError::BadSync(0)));
        assert_eq!(decode_frame(&[0xA5, 10, 0, crc8(&[10, 0])]), Err(FrameError::BadSite(10)));
        assert!(matches!(decode_frame(&[0xA5, 1, 2, 0]), Err(FrameError::BadCrc { .. })));
    }

    #[test]
    fn log_format() {
        assert_eq!(write_log(&[]), "#tactile-log v1\n");
        let cmd = DeviceCommand {
            t: 0.5,
            site: TipRing,
            intensity: 170,
        };
        assert_eq!(
            write_log(&[cmd]),
            "#tactile-log v1\n{\"t\":0.500000,\"site\":\"TipRing\",\"intensity\":170}\n"
        );
    }

    #[test]
    fn log_backend_matches_write_log() {
        let commands = vec![
            DeviceCommand { t: 0.0, site: Thenar, intensity: 90 },
            DeviceCommand { t: 1.25, site: Thenar, intensity: 0 },
        ];
        let mut backend = LogBackend::new(Vec::new()).unwrap();
        for c in &commands {
            backend.send(c).unwrap();
        }
        assert_eq!(String::from_utf8(backend.into_inner()).unwrap(), write_log(&commands));
    }

    #[test]
    fn log_round_trip_and_errors() {
        let commands = vec![
            DeviceCommand { t: 0.125, site: McpUlnar, intensity: 7 },
            DeviceCommand { t: 3.0, site: McpUlnar, intensity: 0 },
        ];
        assert_eq!(read_log(&write_log(&commands)).unwrap(), commands);
        assert_eq!(read_log(""), Err(LogError::MissingHeader));
        let bad = "#tactile-log v1\n{\"t\":0.1,\"site\":\"Elbow\",\"intensity\":1}\n";
        assert!(matches!(read_log(bad), Err(LogError::BadLine { line: 2, .. })));
    }

    #[test]
    fn frame_backend_bytes() {
        let mut b = FrameBackend::new(Vec::new());
        b.send(&DeviceCommand { t: 0.0, site: TipThumb, intensity: 0 }).unwrap();
        assert_eq!(b.into_inner(), vec![0xA5, 0, 0, 0]);
    }

    #[test]
    fn passthrough_is_verbatim() {
        let mut p = MidiPassthrough::new(Vec::new());
        p.forward(&[144, 72, 100]).unwrap();
        p.forward(&[128, 72, 0]).unwrap();
        assert_eq!(p.into_inner(), vec![144, 72, 100, 128, 72, 0]);
    }

    #[test]
    fn source_delivers_in_order_then_ends() {
        let data: Vec<u8> = (0..5000u32).map(|i| (i % 251) as u8).collect();
        let src = read_midi_source(io::Cursor::new(data.clone()));
        let mut got = Vec::new();
        loop {
            match src.events.recv().unwrap() {
                SourceEvent::Data(chunk) => got.extend(chunk),
                SourceEvent::End { error } => {
                    assert_eq!(error, None);
                    break;
                }
            }
        }
        assert_eq!(got, data);
    }

    #[test]
    fn empty_source_ends_cleanly() {
        let src = read_midi_source(io::empty());
        assert_eq!(src.events.recv().unwrap(), SourceEvent::End { error: None });
    }

    struct Unplugged;

    impl Read for Unplugged {
        fn read(&mut self, _buf: &mut [u8]) -> io::Result<usize> {
            Err(io::Error::new(io::ErrorKind::BrokenPipe, "device gone"))
        }
    }

    #[test]
    fn disconnect_surfaces_as_end() {
        let src = read_midi_source(Unplugged);
        match src.events.recv().unwrap() {
            SourceEvent::End { error: Some(msg) } => assert!(msg.contains("device gone")),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn lcs(a: &[(ActuatorSite, u8)], b: &[(ActuatorSite, u8)]) -> usize {
        let mut dp = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                dp[i][j] = if a[i - 1] == b[j - 1] {
                    dp[i - 1][j - 1] + 1
                } else {
                    dp[i - 1][j].max(dp[i][j - 1])
                };
            }
        }
        dp[a.len()][b.len()]
    }

    proptest! {
        #[test]
        fn scanner_recovers_from_short_noise(
            frames in proptest::collection::vec((0u8..10, any::<u8>()), 1..40),
            noise in proptest::collection::vec(any::<u8>(), 1..4),
            at in any::<proptest::sample::Index>(),
            split in any::<proptest::sample::Index>(),
        ) {
            let sent: Vec<(ActuatorSite, u8)> = frames
                .iter()
                .map(|&(s, i)| (ActuatorSite::from_id(s).unwrap(), i))
                .collect();
            let mut stream: Vec<u8> = sent.iter().flat_map(|&(s, i)| encode_frame(s, i)).collect();
            let pos = at.index(stream.len() + 1);
            stream.splice(pos..pos, noise);

            let cut = split.index(stream.len() + 1);
            let mut scanner = FrameScanner::new();
            let mut got = scanner.push(&stream[..cut]);
            got.extend(scanner.push(&stream[cut..]));
            prop_assert!(sent.len() - lcs(&sent, &got) <= 3);
        }
    }
}
