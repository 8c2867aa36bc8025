//! Standard MIDI File (SMF 1.0) reading, plus a small writer used to build
//! fixtures and to round-trip parsed documents.

use super::{MessageKind, MidiMessage, TimedEvent};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmfFormat {
    SingleTrack,
    MultiTrack,
    MultiSequence,
}

impl SmfFormat {
    fn from_u16(v: u16) -> Option<SmfFormat> {
        match v {
            0 => Some(SmfFormat::SingleTrack),
            1 => Some(SmfFormat::MultiTrack),
            2 => Some(SmfFormat::MultiSequence),
            _ => None,
        }
    }

    fn as_u16(self) -> u16 {
        match self {
            SmfFormat::SingleTrack => 0,
            SmfFormat::MultiTrack => 1,
            SmfFormat::MultiSequence => 2,
        }
    }
}

/// Errors raised while reading an SMF. Every variant names the byte offset
/// where parsing stopped.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmfError {
    #[error("byte {offset}: missing MThd header tag")]
    BadHeaderTag { offset: usize },
    #[error("byte {offset}: header chunk shorter than 6 bytes")]
    BadHeaderLength { offset: usize },
    #[error("byte {offset}: chunk or event runs past the end of the file")]
    Truncated { offset: usize },
    #[error("byte {offset}: variable-length quantity longer than 4 bytes")]
    VlqOverflow { offset: usize },
    #[error("byte {offset}: unsupported SMF format {format}")]
    BadFormat { offset: usize, format: u16 },
    #[error("byte {offset}: SMPTE time division is not supported")]
    SmpteDivision { offset: usize },
    #[error("byte {offset}: ticks per quarter note must be positive")]
    ZeroDivision { offset: usize },
    #[error("byte {offset}: file declares no tracks")]
    NoTracks { offset: usize },
    #[error("byte {offset}: data byte with no running status")]
    MissingStatus { offset: usize },
    #[error("byte {offset}: status byte {status:#04x} is not valid inside a track")]
    UnexpectedStatus { offset: usize, status: u8 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmfDocument {
    pub format: SmfFormat,
    pub ticks_per_quarter: u16,
    /// Per-track events on absolute ticks.
    pub tracks: Vec<Vec<TimedEvent>>,
    /// `(tick, microseconds per quarter)` in file order.
    pub tempo_changes: Vec<(u64, u32)>,
    /// Meta and SysEx events that were skipped.
    pub skipped_events: usize,
}

impl SmfDocument {
    /// Number of Note On messages across all tracks.
    pub fn note_count(&self) -> usize {
        self.tracks
            .iter()
            .flatten()
            .filter(|e| e.message.is_note_on())
            .count()
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    end: usize,
}

impl<'a> Cursor<'a> {
    fn u8(&mut self) -> Result<u8, SmfError> {
        if self.pos >= self.end {
            return Err(SmfError::Truncated { offset: self.pos });
        }
        let b = self.bytes[self.pos];
        self.pos += 1;
        Ok(b)
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], SmfError> {
        if self.end - self.pos < n {
            return Err(SmfError::Truncated { offset: self.pos });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn vlq(&mut self) -> Result<u32, SmfError> {
        let start = self.pos;
        let mut value: u32 = 0;
        for _ in 0..4 {
            let b = self.u8()?;
            value = (value << 7) | u32::from(b & 0x7F);
            if b & 0x80 == 0 {
                return Ok(value);
            }
        }
        Err(SmfError::VlqOverflow { offset: start })
    }
}

fn be_u16(b: &[u8]) -> u16 {
    u16::from_be_bytes([b[0], b[1]])
}

fn be_u32(b: &[u8]) -> u32 {
    u32::from_be_bytes([b[0], b[1], b[2], b[3]])
}

/// Parses a complete Standard MIDI File.
///
/// Channel events become [`TimedEvent`]s on absolute ticks, tempo meta
/// events are collected, and every other meta or SysEx event is skipped and
/// counted. Unknown chunk types are ignored.
pub fn parse_smf(bytes: &[u8]) -> Result<SmfDocument, SmfError> {
    if bytes.len() < 4 || &bytes[..4] != b"MThd" {
        return Err(SmfError::BadHeaderTag { offset: 0 });
    }
    if bytes.len() < 8 {
        return Err(SmfError::Truncated { offset: 4 });
    }
    let header_len = be_u32(&bytes[4..8]) as usize;
    if header_len < 6 {
        return Err(SmfError::BadHeaderLength { offset: 4 });
    }
    if bytes.len() - 8 < header_len {
        return Err(SmfError::Truncated { offset: 8 });
    }
    let raw_format = be_u16(&bytes[8..10]);
    let format = SmfFormat::from_u16(raw_format).ok_or(SmfError::BadFormat {
        offset: 8,
        format: raw_format,
    })?;
    let declared_tracks = be_u16(&bytes[10..12]) as usize;
    let division = be_u16(&bytes[12..14]);
    if division & 0x8000 != 0 {
        return Err(SmfError::SmpteDivision { offset: 12 });
    }
    if division == 0 {
        return Err(SmfError::ZeroDivision { offset: 12 });
    }
    if declared_tracks == 0 {
        return Err(SmfError::NoTracks { offset: 10 });
    }

    let mut doc = SmfDocument {
        format,
        ticks_per_quarter: division,
        tracks: Vec::with_capacity(declared_tracks),
        tempo_changes: Vec::new(),
        skipped_events: 0,
    };

    let mut pos = 8 + header_len;
    while doc.tracks.len() < declared_tracks {
        if bytes.len() - pos < 8 {
            return Err(SmfError::Truncated { offset: pos });
        }
        let tag = &bytes[pos..pos + 4];
        let len = be_u32(&bytes[pos + 4..pos + 8]) as usize;
        let body = pos + 8;
        if bytes.len() - body < len {
            return Err(SmfError::Truncated { offset: pos + 4 });
        }
        if tag == b"MTrk" {
            let index = doc.tracks.len();
            let track = parse_track(bytes, body, body + len, index, &mut doc)?;
            doc.tracks.push(track);
        }
        pos = body + len;
    }
    Ok(doc)
}

fn parse_track(
    bytes: &[u8],
    start: usize,
    end: usize,
    track_index: usize,
    doc: &mut SmfDocument,
) -> Result<Vec<TimedEvent>, SmfError> {
    let mut cur = Cursor {
        bytes,
        pos: start,
        end,
    };
    let mut events = Vec::new();
    let mut tick: u64 = 0;
    let mut running: Option<u8> = None;

    while cur.pos < cur.end {
        tick += u64::from(cur.vlq()?);
        let at = cur.pos;
        let lead = cur.u8()?;
        match lead {
            0xFF => {
                running = None;
                let kind = cur.u8()?;
                let len = cur.vlq()? as usize;
                let data = cur.take(len)?;
                match kind {
                    0x2F => break,
                    0x51 if len == 3 => {
                        let uspq = u32::from_be_bytes([0, data[0], data[1], data[2]]);
                        doc.tempo_changes.push((tick, uspq));
                    }
                    _ => doc.skipped_events += 1,
                }
            }
            0xF0 | 0xF7 => {
                running = None;
                let len = cur.vlq()? as usize;
                cur.take(len)?;
                doc.skipped_events += 1;
            }
            0xF1..=0xFE => {
                return Err(SmfError::UnexpectedStatus {
                    offset: at,
                    status: lead,
                })
            }
            _ => {
                let (status, first) = if lead & 0x80 != 0 {
                    running = Some(lead);
                    (lead, cur.u8()?)
                } else {
                    let s = running.ok_or(SmfError::MissingStatus { offset: at })?;
                    (s, lead)
                };
                let second = if MessageKind::from_status(status).data_len() == 2 {
                    cur.u8()?
                } else {
                    0
                };
                events.push(TimedEvent {
                    tick,
                    message: MidiMessage::from_status(status, first, second),
                    track_index,
                });
            }
        }
    }
    Ok(events)
}

fn write_vlq(out: &mut Vec<u8>, mut value: u32) {
    let mut buf = [0u8; 4];
    let mut n = 0;
    loop {
        buf[n] = (value & 0x7F) as u8;
        n += 1;
        value >>= 7;
        if value == 0 || n == 4 {
            break;
        }
    }
    for i in (0..n).rev() {
        out.push(if i > 0 { buf[i] | 0x80 } else { buf[i] });
    }
}

/// Serializes a document as an SMF. Tempo changes are written into the
/// first track ahead of channel events on the same tick. Skipped events
/// are not reproduced.
pub fn encode_smf(doc: &SmfDocument) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(b"MThd");
    out.extend_from_slice(&6u32.to_be_bytes());
    out.extend_from_slice(&doc.format.as_u16().to_be_bytes());
    out.extend_from_slice(&(doc.tracks.len() as u16).to_be_bytes());
    out.extend_from_slice(&doc.ticks_per_quarter.to_be_bytes());

    for (index, track) in doc.tracks.iter().enumerate() {
        // (tick, order class, bytes)
        let mut items: Vec<(u64, u8, Vec<u8>)> = Vec::new();
        if index == 0 {
            for &(tick, uspq) in &doc.tempo_changes {
                let b = uspq.to_be_bytes();
                items.push((tick, 0, vec![0xFF, 0x51, 0x03, b[1], b[2], b[3]]));
            }
        }
        for e in track {
            let bytes = e.message.to_bytes();
            if !bytes.is_empty() {
                items.push((e.tick, 1, bytes));
            }
        }
        items.sort_by_key(|(tick, class, _)| (*tick, *class));

        let mut body = Vec::new();
        let mut last = 0u64;
        for (tick, _, bytes) in items {
            write_vlq(&mut body, (tick - last) as u32);
            body.extend_from_slice(&bytes);
            last = tick;
        }
        body.extend_from_slice(&[0x00, 0xFF, 0x2F, 0x00]);

        out.extend_from_slice(b"MTrk");
        out.extend_from_slice(&(body.len() as u32).to_be_bytes());
        out.extend_from_slice(&body);
    }
    out
}

/// Merges all tracks into one time-ordered list.
///
/// Events are ordered by `(tick, track_index, position in track)`, except
/// that within one tick a Note Off is moved ahead of a Note On for the same
/// `(channel, note)` so back-to-back notes across tracks never collapse to
/// zero length.
pub fn merge_tracks(doc: &SmfDocument) -> Vec<TimedEvent> {
    let mut all: Vec<(u64, usize, usize, TimedEvent)> = doc
        .tracks
        .iter()
        .enumerate()
        .flat_map(|(t, track)| track.iter().enumerate().map(move |(i, e)| (e.tick, t, i, *e)))
        .collect();
    all.sort_by_key(|&(tick, t, i, _)| (tick, t, i));
    let sorted: Vec<TimedEvent> = all.into_iter().map(|(_, _, _, e)| e).collect();

    let mut out = Vec::with_capacity(sorted.len());
    for group in sorted.chunk_by(|a, b| a.tick == b.tick) {
        let key = |pos: usize, e: &TimedEvent| -> (usize, u8, usize) {
            if e.message.is_note_off() {
                let first_on = group[..pos].iter().position(|o| {
                    o.message.is_note_on()
                        && o.message.channel == e.message.channel
                        && o.message.data1 == e.message.data1
                });
                if let Some(p) = first_on {
                    return (p, 0, pos);
                }
            }
            (pos, 1, pos)
        };
        let mut keyed: Vec<_> = group.iter().enumerate().map(|(p, e)| (key(p, e), *e)).collect();
        keyed.sort_by_key(|(k, _)| *k);
        out.extend(keyed.into_iter().map(|(_, e)| e));
    }
    out
}
