#![allow(dead_code)]

//! Source of the checked-in MIDI fixtures under `assets/midi/`.
//!
//! The three study melodies are our own transcriptions in the C
//! five-finger position (C D E F G = notes 72 74 76 77 79 = fingers 1-5),
//! not copies of any published score.

use tactile_core::midi::{MidiMessage, SmfDocument, SmfFormat, TimedEvent};

pub const TPQ: u16 = 480;
const Q: u64 = TPQ as u64;

/// `(note, length in ticks)`; note 0 is a rest.
fn monophonic(channel: u8, velocity: u8, line: &[(u8, u64)], track_index: usize) -> Vec<TimedEvent> {
    let mut out = Vec::new();
    let mut tick = 0;
    for &(note, len) in line {
        if note != 0 {
            out.push(TimedEvent { tick, message: MidiMessage::note_on(channel, note, velocity), track_index });
            out.push(TimedEvent { tick: tick + len, message: MidiMessage::note_off(channel, note), track_index });
        }
        tick += len;
    }
    // offs before ons at shared ticks
    out.sort_by_key(|e| (e.tick, e.message.is_note_on()));
    out
}

fn single_track(events: Vec<TimedEvent>, tempo_changes: Vec<(u64, u32)>) -> SmfDocument {
    SmfDocument {
        format: SmfFormat::SingleTrack,
        ticks_per_quarter: TPQ,
        tracks: vec![events],
        tempo_changes,
        skipped_events: 0,
    }
}

/// E-D#-E-D#-E B-D-C-A in sixteenths at 120 bpm, final A an eighth.
pub fn fur_elise_opening() -> SmfDocument {
    let s = Q / 4;
    let line = [(76, s), (75, s), (76, s), (75, s), (76, s), (71, s), (74, s), (72, s), (69, 2 * s)];
    single_track(monophonic(0, 80, &line, 0), vec![])
}

/// Stepwise climb and fall in 4/4 at 100 bpm.
pub fn music_land() -> SmfDocument {
    let line = [
        (72, Q), (74, Q), (76, Q), (77, Q),
        (79, Q), (79, Q), (79, 2 * Q),
        (77, Q), (76, Q), (74, Q), (72, Q),
        (76, 2 * Q), (72, 2 * Q),
    ];
    single_track(monophonic(0, 80, &line, 0), vec![(0, 600_000)])
}

/// Broken-chord figures in 3/4 at 120 bpm.
pub fn patterns() -> SmfDocument {
    let line = [
        (72, Q), (76, Q), (79, Q),
        (79, 2 * Q), (76, Q),
        (74, Q), (77, Q), (79, Q),
        (79, 3 * Q),
        (79, Q), (76, Q), (72, Q),
        (74, 2 * Q), (72, Q),
    ];
    single_track(monophonic(0, 80, &line, 0), vec![])
}

/// Repeated-note eighths with held cadences at 132 bpm.
pub fn traffic_cop() -> SmfDocument {
    let e = Q / 2;
    let line = [
        (79, e), (79, e), (79, e), (79, e), (77, Q), (76, Q),
        (74, e), (74, e), (74, e), (74, e), (72, 2 * Q),
        (76, e), (77, e), (79, e), (77, e), (76, Q), (74, Q),
        (72, e), (0, e), (72, e), (0, e), (72, 2 * Q),
    ];
    single_track(monophonic(0, 80, &line, 0), vec![(0, 454_545)])
}

/// Two bars of kick, snare and closed hat on channel 10.
pub fn drum_groove() -> SmfDocument {
    let e = Q / 2;
    let mut events = Vec::new();
    let mut hit = |tick: u64, note: u8, velocity: u8| {
        events.push(TimedEvent { tick, message: MidiMessage::note_on(9, note, velocity), track_index: 0 });
        events.push(TimedEvent { tick: tick + e / 2, message: MidiMessage::note_off(9, note), track_index: 0 });
    };
    for bar in 0..2u64 {
        let start = bar * 4 * Q;
        for step in 0..8 {
            hit(start + step * e, 42, 70);
        }
        hit(start, 36, 120);
        hit(start + 2 * Q, 36, 110);
        hit(start + Q, 38, 100);
        hit(start + 3 * Q, 38, 100);
    }
    events.sort_by_key(|ev| (ev.tick, ev.message.is_note_on(), ev.message.data1));
    single_track(events, vec![])
}

/// Melody, arpeggiated chords, bass and drums on separate tracks.
pub fn layered_demo() -> SmfDocument {
    let s = Q / 4;
    let melody = [(76, s), (75, s), (76, s), (75, s), (76, s), (71, s), (74, s), (72, s), (69, 2 * s), (0, 6 * s)];
    let chords = [(45, 2 * s), (52, 2 * s), (57, 2 * s), (0, 2 * s), (48, 2 * s), (52, 2 * s), (55, 2 * s)];
    let bass = [(45, 4 * Q)];
    let drums = [(36, s), (0, 3 * s), (38, s), (0, 3 * s), (36, s), (0, 3 * s), (38, s)];
    SmfDocument {
        format: SmfFormat::MultiTrack,
        ticks_per_quarter: TPQ,
        tracks: vec![
            monophonic(0, 96, &melody, 0),
            monophonic(1, 70, &chords, 1),
            monophonic(2, 90, &bass, 2),
            monophonic(9, 110, &drums, 3),
        ],
        tempo_changes: vec![],
        skipped_events: 0,
    }
}

pub const STUDY_SONGS: [&str; 3] = ["music-land", "patterns", "traffic-cop"];

pub fn all() -> Vec<(&'static str, SmfDocument)> {
    vec![
        ("fur-elise-opening", fur_elise_opening()),
        ("music-land", music_land()),
        ("patterns", patterns()),
        ("traffic-cop", traffic_cop()),
        ("drum-groove", drum_groove()),
        ("layered-demo", layered_demo()),
    ]
}
