//! MIDI decoding: live byte streams, Standard MIDI Files and tempo maps.
//!
//! Status bytes follow the MIDI 1.0 standard. In particular `0xB0 | channel`
//! is Control Change; a status of `146` (`0x92`) is a Note On on channel 2.

mod smf;
mod stream;
mod tempo;

pub use smf::{encode_smf, merge_tracks, parse_smf, SmfDocument, SmfError, SmfFormat};
pub use stream::StreamDecoder;
pub use tempo::{build_tempo_map, ticks_to_seconds, TempoMap, DEFAULT_TEMPO_USPQ};

use std::fmt;

/// Channel message kinds. Anything that is not a channel voice message
/// ends up as `SystemOther`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageKind {
    NoteOff,
    NoteOn,
    PolyPressure,
    ControlChange,
    ProgramChange,
    ChannelPressure,
    PitchBend,
    SystemOther,
}

impl MessageKind {
    /// Kind encoded by the high nibble of a channel status byte.
    pub fn from_status(status: u8) -> MessageKind {
        match status & 0xF0 {
            0x80 => MessageKind::NoteOff,
            0x90 => MessageKind::NoteOn,
            0xA0 => MessageKind::PolyPressure,
            0xB0 => MessageKind::ControlChange,
            0xC0 => MessageKind::ProgramChange,
            0xD0 => MessageKind::ChannelPressure,
            0xE0 => MessageKind::PitchBend,
            _ => MessageKind::SystemOther,
        }
    }

    /// Number of data bytes following a channel status of this kind.
    pub fn data_len(self) -> usize {
        match self {
            MessageKind::ProgramChange | MessageKind::ChannelPressure => 1,
            MessageKind::SystemOther => 0,
            _ => 2,
        }
    }

    fn status_nibble(self) -> u8 {
        match self {
            MessageKind::NoteOff => 0x80,
            MessageKind::NoteOn => 0x90,
            MessageKind::PolyPressure => 0xA0,
            MessageKind::ControlChange => 0xB0,
            MessageKind::ProgramChange => 0xC0,
            MessageKind::ChannelPressure => 0xD0,
            MessageKind::PitchBend => 0xE0,
            MessageKind::SystemOther => 0xF0,
        }
    }
}

/// A decoded channel message. `data2` is 0 for one-data-byte kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MidiMessage {
    pub kind: MessageKind,
    pub channel: u8,
    pub data1: u8,
    pub data2: u8,
}

impl MidiMessage {
    /// Builds a message from a channel status byte and its data bytes.
    /// A Note On with velocity 0 is normalized to Note Off.
    pub fn from_status(status: u8, data1: u8, data2: u8) -> MidiMessage {
        let mut kind = MessageKind::from_status(status);
        let data2 = if kind.data_len() == 2 { data2 & 0x7F } else { 0 };
        if kind == MessageKind::NoteOn && data2 == 0 {
            kind = MessageKind::NoteOff;
        }
        MidiMessage {
            kind,
            channel: status & 0x0F,
            data1: data1 & 0x7F,
            data2,
        }
    }

    pub fn note_on(channel: u8, note: u8, velocity: u8) -> MidiMessage {
        MidiMessage::from_status(0x90 | (channel & 0x0F), note, velocity)
    }

    pub fn note_off(channel: u8, note: u8) -> MidiMessage {
        MidiMessage::from_status(0x80 | (channel & 0x0F), note, 0)
    }

    pub fn is_note_on(&self) -> bool {
        self.kind == MessageKind::NoteOn
    }

    pub fn is_note_off(&self) -> bool {
        self.kind == MessageKind::NoteOff
    }

    /// Raw wire bytes for this message (without running status).
    /// `SystemOther` has no channel form and encodes to nothing.
    pub fn to_bytes(&self) -> Vec<u8> {
        if self.kind == MessageKind::SystemOther {
            return Vec::new();
        }
        let status = self.kind.status_nibble() | (self.channel & 0x0F);
        match self.kind.data_len() {
            1 => vec![status, self.data1],
            _ => vec![status, self.data1, self.data2],
        }
    }
}

/// A message placed on a track's absolute tick axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimedEvent {
    pub tick: u64,
    pub message: MidiMessage,
    pub track_index: usize,
}

/// How octave numbers are printed in note names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoteNaming {
    /// Electric-piano convention where note 72 is C4.
    #[default]
    C4Is72,
    /// Common convention where note 60 (middle C) is C4.
    C4Is60,
}

const PITCH_NAMES: [&str; 12] = [
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B",
];

/// Human-readable name of a note number, e.g. `E4` for 76 under
/// [`NoteNaming::C4Is72`].
pub fn note_name(note: u8, naming: NoteNaming) -> String {
    let shift = match naming {
        NoteNaming::C4Is72 => 2,
        NoteNaming::C4Is60 => 1,
    };
    let octave = i32::from(note / 12) - shift;
    format!("{}{}", PITCH_NAMES[usize::from(note % 12)], octave)
}

/// Inverse of [`note_name`]; also accepts flats (`Eb4`) and lowercase.
pub fn parse_note_name(name: &str, naming: NoteNaming) -> Option<u8> {
    let name = name.trim();
    let mut chars = name.chars();
    let letter = chars.next()?.to_ascii_uppercase();
    let base: i32 = match letter {
        'C' => 0,
        'D' => 2,
        'E' => 4,
        'F' => 5,
        'G' => 7,
        'A' => 9,
        'B' => 11,
        _ => return None,
    };
    let rest = chars.as_str();
    let (accidental, octave) = match rest.as_bytes().first() {
        Some(b'#') => (1, &rest[1..]),
        Some(b'b') => (-1, &rest[1..]),
        _ => (0, rest),
    };
    let octave: i32 = octave.parse().ok()?;
    let shift = match naming {
        NoteNaming::C4Is72 => 2,
        NoteNaming::C4Is60 => 1,
    };
    u8::try_from((octave + shift) * 12 + base + accidental)
        .ok()
        .filter(|&n| n <= 127)
}

impl fmt::Display for MidiMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:?} ch{} {} {}",
            self.kind, self.channel, self.data1, self.data2
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn note_on_zero_velocity_is_note_off() {
        let m = MidiMessage::from_status(0x93, 60, 0);
        assert_eq!(m.kind, MessageKind::NoteOff);
        assert_eq!(m.channel, 3);
    }

    #[test]
    fn status_146_is_note_on_channel_2() {
        let m = MidiMessage::from_status(146, 1, 100);
        assert_eq!(m.kind, MessageKind::NoteOn);
        assert_eq!(m.channel, 2);
        assert_eq!((m.data1, m.data2), (1, 100));
    }

    #[test]
    fn control_change_uses_0xb0() {
        let m = MidiMessage::from_status(0xB0, 1, 100);
        assert_eq!(m.kind, MessageKind::ControlChange);
    }

    #[test]
    fn one_byte_kinds_store_zero() {
        let m = MidiMessage::from_status(0xC5, 12, 99);
        assert_eq!(m.kind, MessageKind::ProgramChange);
        assert_eq!(m.data2, 0);
        assert_eq!(m.to_bytes(), vec![0xC5, 12]);
    }

    #[test]
    fn note_names() {
        assert_eq!(note_name(72, NoteNaming::C4Is72), "C4");
        assert_eq!(note_name(74, NoteNaming::C4Is72), "D4");
        assert_eq!(note_name(76, NoteNaming::C4Is72), "E4");
        assert_eq!(note_name(60, NoteNaming::C4Is60), "C4");
        assert_eq!(note_name(75, NoteNaming::C4Is60), "D#5");
        assert_eq!(note_name(0, NoteNaming::C4Is72), "C-2");
    }

    #[test]
    fn note_names_parse_back() {
        for naming in [NoteNaming::C4Is72, NoteNaming::C4Is60] {
            for n in 0..=127u8 {
                assert_eq!(parse_note_name(&note_name(n, naming), naming), Some(n));
            }
        }
        assert_eq!(parse_note_name("eb4", NoteNaming::C4Is72), Some(75));
        assert_eq!(parse_note_name("Cb-2", NoteNaming::C4Is72), None);
        assert_eq!(parse_note_name("H2", NoteNaming::C4Is72), None);
        assert_eq!(parse_note_name("G9", NoteNaming::C4Is72), None);
    }
}
