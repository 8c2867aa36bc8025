//! Incremental renderer for live MIDI input.
//!
//! Notes are open-ended until their Note Off, so sustained layers hold
//! their level until released while tap trains and drum hits run on fixed
//! deadlines. The caller drives time: [`LiveEngine::handle`] on every
//! message and [`LiveEngine::advance`] whenever [`LiveEngine::next_deadline`]
//! passes.

use crate::layout::ActuatorSite;
use crate::mapping::{
    map_bassline_note, map_chord_note, map_melody_note, map_percussion, Diagnostics, HapticEvent, MappingProfile,
    NoteSpan, Role,
};
use crate::midi::MidiMessage;
use crate::timeline::DeviceCommand;

#[derive(Debug, Clone, Copy)]
struct Contribution {
    /// `(channel, note)` of the owning note; `None` for drum hits.
    key: Option<(u8, u8)>,
    site: ActuatorSite,
    intensity: u8,
    start: f64,
    end: f64,
}

#[derive(Debug, Clone)]
pub struct LiveEngine {
    profile: MappingProfile,
    active: Vec<Contribution>,
    levels: [u8; 10],
    diag: Diagnostics,
    /// Melody notes absent from the finger table.
    unmapped_notes: u64,
    gestures: u64,
}

impl LiveEngine {
    pub fn new(profile: MappingProfile) -> Self {
        LiveEngine {
            profile,
            active: Vec::new(),
            levels: [0; 10],
            diag: Diagnostics::default(),
            unmapped_notes: 0,
            gestures: 0,
        }
    }

    pub fn diagnostics(&self) -> &Diagnostics {
        &self.diag
    }

    pub fn unmapped_notes(&self) -> u64 {
        self.unmapped_notes
    }

    /// Gestures started so far.
    pub fn gestures(&self) -> u64 {
        self.gestures
    }

    /// Applies one message received at `t` and returns the level changes.
    pub fn handle(&mut self, t: f64, msg: &MidiMessage) -> Vec<DeviceCommand> {
        if msg.is_note_on() {
            self.note_on(t, msg);
        } else if msg.is_note_off() {
            self.note_off(t, msg.channel, msg.data1);
        }
        self.advance(t)
    }

    fn note_on(&mut self, t: f64, msg: &MidiMessage) {
        let role = match self.profile.role(msg.channel) {
            Some(r) => r,
            None => {
                self.diag.unassigned_channels.insert(msg.channel);
                return;
            }
        };
        let key = (msg.channel, msg.data1);
        if role != Role::Percussion && self.active.iter().any(|c| c.key == Some(key) && c.end.is_infinite()) {
            self.diag.retriggered_notes += 1;
            self.note_off(t, msg.channel, msg.data1);
        }
        let span = NoteSpan {
            note: msg.data1,
            velocity: msg.data2,
            t_on: t,
            duration: f64::INFINITY,
        };
        let events: Vec<HapticEvent> = match role {
            Role::Ignore => return,
            Role::Melody => match map_melody_note(&span, &self.profile, &mut self.diag) {
                Ok(ev) => ev,
                Err(_) => {
                    self.unmapped_notes += 1;
                    return;
                }
            },
            Role::Chords => vec![map_chord_note(&span, &self.profile, &mut self.diag)],
            Role::Bassline => vec![map_bassline_note(&span, &self.profile, &mut self.diag)],
            Role::Percussion => map_percussion(msg.data1, msg.data2, t, &self.profile, &mut self.diag),
        };
        if events.is_empty() {
            return;
        }
        self.gestures += 1;
        let owner = (role != Role::Percussion).then_some(key);
        self.active.extend(events.into_iter().map(|e| Contribution {
            key: owner,
            site: e.site,
            intensity: e.intensity,
            start: e.t_on,
            end: e.end(),
        }));
    }

    fn note_off(&mut self, t: f64, channel: u8, note: u8) {
        let key = Some((channel, note));
        let mut matched = false;
        self.active.retain_mut(|c| {
            if c.key != key {
                return true;
            }
            matched = true;
            c.end = c.end.min(t);
            c.start < t
        });
        if !matched && self.profile.role(channel) != Some(Role::Percussion) {
            self.diag.unmatched_note_offs += 1;
        }
    }

    /// Brings every site to its level at `t`.
    pub fn advance(&mut self, t: f64) -> Vec<DeviceCommand> {
        self.active.retain(|c| c.end > t);
        let mut target = [0u8; 10];
        for c in self.active.iter().filter(|c| c.start <= t) {
            let slot = &mut target[usize::from(c.site.id())];
            *slot = (*slot).max(c.intensity);
        }
        let mut out = Vec::new();
        for site in ActuatorSite::ALL {
            let i = usize::from(site.id());
            if target[i] != self.levels[i] {
                self.levels[i] = target[i];
                out.push(DeviceCommand {
                    t,
                    site,
                    intensity: target[i],
                });
            }
        }
        out
    }

    /// Earliest future start or finite end among pending contributions.
    pub fn next_deadline(&self, now: f64) -> Option<f64> {
        self.active
            .iter()
            .flat_map(|c| [c.start, c.end])
            .filter(|&x| x > now && x.is_finite())
            .min_by(f64::total_cmp)
    }

    /// Drops everything and switches every lit site off.
    pub fn release_all(&mut self, t: f64) -> Vec<DeviceCommand> {
        self.active.clear();
        self.advance(t)
    }
}
