use super::{
    map_bassline_note, map_chord_note, map_melody_note, map_percussion, Diagnostics, HapticEvent,
    MappingError, MappingProfile, NoteSpan, Role,
};
use crate::midi::{MessageKind, TempoMap, TimedEvent};
use crate::timeline::HapticTimeline;
use std::collections::BTreeMap;

#[derive(Debug, Clone, PartialEq)]
pub struct Rendered {
    pub timeline: HapticTimeline,
    pub diagnostics: Diagnostics,
}

struct OpenNote {
    onset_order: usize,
    t_on: f64,
    velocity: u8,
    role: Role,
}

struct PendingNote {
    onset_order: usize,
    role: Role,
    span: NoteSpan,
}

/// Turns a merged, time-ordered event list into a haptic timeline.
///
/// Note On/Off pairs are matched per `(channel, note)`; drum hits map at
/// their onset. Gesture ids are dense and follow onset order, so repeated
/// renders of the same input are identical.
pub fn render_timeline(
    events: &[TimedEvent],
    tempo: &TempoMap,
    ticks_per_quarter: u16,
    profile: &MappingProfile,
) -> Result<Rendered, MappingError> {
    let mut diag = Diagnostics::default();
    let mut open: BTreeMap<(u8, u8), OpenNote> = BTreeMap::new();
    let mut pending: Vec<PendingNote> = Vec::new();
    let mut onsets = 0usize;
    let mut song_end = 0.0f64;

    let close = |note: OpenNote, key: (u8, u8), t_off: f64, pending: &mut Vec<PendingNote>| {
        pending.push(PendingNote {
            onset_order: note.onset_order,
            role: note.role,
            span: NoteSpan {
                note: key.1,
                velocity: note.velocity,
                t_on: note.t_on,
                duration: t_off - note.t_on,
            },
        });
    };

    for ev in events {
        let msg = ev.message;
        if !matches!(msg.kind, MessageKind::NoteOn | MessageKind::NoteOff) {
            continue;
        }
        let t = tempo.seconds_at(ticks_per_quarter, ev.tick);
        song_end = song_end.max(t);
        let role = match profile.role(msg.channel) {
            Some(r) => r,
            None => {
                diag.unassigned_channels.insert(msg.channel);
                Role::Ignore
            }
        };
        let key = (msg.channel, msg.data1);
        match (msg.kind, role) {
            (_, Role::Ignore) => {}
            (MessageKind::NoteOn, Role::Percussion) => {
                pending.push(PendingNote {
                    onset_order: onsets,
                    role,
                    span: NoteSpan {
                        note: msg.data1,
                        velocity: msg.data2,
                        t_on: t,
                        duration: profile.percussion.duration_ms / 1000.0,
                    },
                });
                onsets += 1;
            }
            (MessageKind::NoteOff, Role::Percussion) => {}
            (MessageKind::NoteOn, _) => {
                if let Some(prev) = open.remove(&key) {
                    diag.retriggered_notes += 1;
                    close(prev, key, t, &mut pending);
                }
                open.insert(
                    key,
                    OpenNote {
                        onset_order: onsets,
                        t_on: t,
                        velocity: msg.data2,
                        role,
                    },
                );
                onsets += 1;
            }
            (_, _) => match open.remove(&key) {
                Some(note) => close(note, key, t, &mut pending),
                None => diag.unmatched_note_offs += 1,
            },
        }
    }
    for (key, note) in std::mem::take(&mut open) {
        diag.unclosed_notes += 1;
        close(note, key, song_end, &mut pending);
    }

    pending.sort_by_key(|p| p.onset_order);
    let mut out: Vec<HapticEvent> = Vec::new();
    let mut gesture_id = 0u64;
    for p in pending {
        if p.role != Role::Percussion && p.span.duration <= 0.0 {
            diag.zero_length_notes += 1;
            continue;
        }
        let mapped = match p.role {
            Role::Melody => map_melody_note(&p.span, profile, &mut diag)?,
            Role::Chords => vec![map_chord_note(&p.span, profile, &mut diag)],
            Role::Bassline => vec![map_bassline_note(&p.span, profile, &mut diag)],
            Role::Percussion => map_percussion(p.span.note, p.span.velocity, p.span.t_on, profile, &mut diag),
            Role::Ignore => Vec::new(),
        };
        if mapped.is_empty() {
            continue;
        }
        out.extend(mapped.into_iter().map(|e| HapticEvent { gesture_id, ..e }));
        gesture_id += 1;
    }

    Ok(Rendered {
        timeline: HapticTimeline::new(out),
        diagnostics: diag,
    })
}
