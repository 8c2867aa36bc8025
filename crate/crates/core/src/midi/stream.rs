use super::{MessageKind, MidiMessage};

/// Incremental decoder for a raw MIDI byte stream (serial bridge, stdin).
///
/// Handles running status, skips system real-time bytes without touching
/// running status, and drops SysEx and system common messages. Data bytes
/// that arrive with no status in effect are discarded and counted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StreamDecoder {
    running_status: Option<u8>,
    pending: Vec<u8>,
    in_sysex: bool,
    system_common_remaining: u8,
    discarded: u64,
}

impl StreamDecoder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of bytes dropped because they could not belong to a message.
    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    /// True when a partial channel message is buffered.
    pub fn has_pending(&self) -> bool {
        !self.pending.is_empty()
    }

    /// Decodes `bytes`, returning every channel message completed by them.
    /// Incomplete trailing data is kept for the next call.
    pub fn decode(&mut self, bytes: &[u8]) -> Vec<MidiMessage> {
        let mut out = Vec::new();
        for &b in bytes {
            if let Some(m) = self.push(b) {
                out.push(m);
            }
        }
        out
    }

    /// Feeds one byte.
    pub fn push(&mut self, byte: u8) -> Option<MidiMessage> {
        match byte {
            // real-time: transparent
            0xF8..=0xFF => None,
            0xF0 => {
                self.reset_status();
                self.in_sysex = true;
                None
            }
            0xF7 => {
                self.reset_status();
                None
            }
            0xF1..=0xF6 => {
                self.reset_status();
                self.system_common_remaining = match byte {
                    0xF1 | 0xF3 => 1,
                    0xF2 => 2,
                    _ => 0,
                };
                None
            }
            0x80..=0xEF => {
                self.reset_status();
                self.running_status = Some(byte);
                None
            }
            _ => self.push_data(byte),
        }
    }

    fn reset_status(&mut self) {
        self.discarded += self.pending.len() as u64;
        self.pending.clear();
        self.running_status = None;
        self.in_sysex = false;
        self.system_common_remaining = 0;
    }

    fn push_data(&mut self, byte: u8) -> Option<MidiMessage> {
        if self.in_sysex {
            return None;
        }
        if self.system_common_remaining > 0 {
            self.system_common_remaining -= 1;
            return None;
        }
        let Some(status) = self.running_status else {
            self.discarded += 1;
            return None;
        };
        self.pending.push(byte);
        let needed = MessageKind::from_status(status).data_len();
        if self.pending.len() < needed {
            return None;
        }
        let data2 = if needed == 2 { self.pending[1] } else { 0 };
        let msg = MidiMessage::from_status(status, self.pending[0], data2);
        self.pending.clear();
        Some(msg)
    }
}
