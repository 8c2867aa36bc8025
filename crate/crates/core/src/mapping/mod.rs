//! Music to haptics mapping.
//!
//! Melody goes to the fingertips (finger scripts or the chromatic circle
//! with rabbit-illusion tap trains), chords to the three knuckle sites,
//! bass lines to the thenar/hypothenar pads and drums to site groups
//! chosen by drum register.

mod rabbit;
mod render;

pub use rabbit::rabbit_train;
pub use render::{render_timeline, Rendered};

use crate::layout::{ActuatorSite, ChromaticCircle};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use thiserror::Error;

/// Octave numbering used for intensity bands: note 72 starts octave 4.
pub fn octave_index(note: u8) -> i32 {
    i32::from(note / 12) - 2
}

pub const MIDDLE_OCTAVE: i32 = 4;
pub const UPPER_OCTAVE: i32 = 5;

/// Lowest and highest frequency the ERM motors render perceptibly.
pub const ERM_MIN_HZ: f64 = 50.0;
pub const ERM_MAX_HZ: f64 = 150.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MelodyMode {
    FingerScript,
    ChromaticCircle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Melody,
    Chords,
    Bassline,
    Percussion,
    Ignore,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sequencing {
    /// A and B taps interleaved as evenly as possible.
    Alternating,
    /// All A taps, then all B taps.
    Saltation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VelocityLaw {
    /// Velocity 1..=127 spread linearly across the octave's band.
    BandLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OctaveBand {
    pub lo: u8,
    pub hi: u8,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabbitParams {
    pub tap_count: u32,
    pub inter_tap_ms: f64,
    pub tap_duration_ms: f64,
    pub sequencing: Sequencing,
}

impl Default for RabbitParams {
    fn default() -> Self {
        RabbitParams {
            tap_count: 4,
            inter_tap_ms: 60.0,
            tap_duration_ms: 40.0,
            sequencing: Sequencing::Alternating,
        }
    }
}

/// The 24-semitone pitch window shared by the chord and bass layers and the
/// linear pitch to frequency law over it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BassWindow {
    pub base_note: u8,
    pub span_semitones: u8,
    pub base_freq_hz: f64,
    pub top_freq_hz: f64,
}

impl Default for BassWindow {
    fn default() -> Self {
        BassWindow {
            base_note: 45,
            span_semitones: 24,
            base_freq_hz: ERM_MIN_HZ,
            top_freq_hz: ERM_MAX_HZ,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PercussionHit {
    pub site: ActuatorSite,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PercussionTable {
    pub duration_ms: f64,
    pub entries: BTreeMap<u8, Vec<PercussionHit>>,
}

impl Default for PercussionTable {
    fn default() -> Self {
        use ActuatorSite::*;
        let full = |sites: &[ActuatorSite]| -> Vec<PercussionHit> {
            sites.iter().map(|&site| PercussionHit { site, scale: 1.0 }).collect()
        };
        let mut entries = BTreeMap::new();
        for note in [35, 36] {
            entries.insert(note, full(&[Thenar, Hypothenar, McpCenter]));
        }
        for note in [38, 40] {
            entries.insert(note, full(&[TipIndex, TipMiddle, McpCenter]));
        }
        entries.insert(42, full(&[TipRing]));
        for note in [44, 46, 51, 59] {
            entries.insert(note, full(&[TipLittle]));
        }
        for note in [49, 57] {
            entries.insert(note, full(&ActuatorSite::TIPS));
        }
        for note in [41, 43] {
            entries.insert(note, full(&[McpUlnar]));
        }
        for note in [45, 47] {
            entries.insert(note, full(&[McpCenter]));
        }
        for note in [48, 50] {
            entries.insert(note, full(&[McpRadial]));
        }
        PercussionTable {
            duration_ms: 50.0,
            entries,
        }
    }
}

/// All mapping policy for one render.
#[derive(Debug, Clone, PartialEq)]
pub struct MappingProfile {
    pub melody_mode: MelodyMode,
    /// Note number to piano finger 1..=5.
    pub finger_table: BTreeMap<u8, u8>,
    pub octave_bands: BTreeMap<i32, OctaveBand>,
    pub circle: ChromaticCircle,
    pub bass: BassWindow,
    /// Knuckle sites for the low, middle and high thirds of the window.
    pub chord_sites: [ActuatorSite; 3],
    /// Pads for the lower and upper halves of the window.
    pub bass_sites: [ActuatorSite; 2],
    pub percussion: PercussionTable,
    pub rabbit: RabbitParams,
    pub channel_roles: BTreeMap<u8, Role>,
    pub velocity_law: VelocityLaw,
}

/// Right-hand fingering of the Für Elise opening, E-D#-E-D#-E B-D-C-A.
pub fn fur_elise_fingering() -> BTreeMap<u8, u8> {
    BTreeMap::from([(76, 4), (75, 3), (71, 1), (74, 3), (72, 2), (69, 1)])
}

pub fn default_octave_bands() -> BTreeMap<i32, OctaveBand> {
    BTreeMap::from([
        (MIDDLE_OCTAVE, OctaveBand { lo: 85, hi: 170 }),
        (UPPER_OCTAVE, OctaveBand { lo: 170, hi: 255 }),
    ])
}

pub fn default_channel_roles() -> BTreeMap<u8, Role> {
    BTreeMap::from([
        (0, Role::Melody),
        (1, Role::Chords),
        (2, Role::Bassline),
        (9, Role::Percussion),
    ])
}

impl Default for MappingProfile {
    fn default() -> Self {
        MappingProfile {
            melody_mode: MelodyMode::FingerScript,
            finger_table: fur_elise_fingering(),
            octave_bands: default_octave_bands(),
            circle: ChromaticCircle::default(),
            bass: BassWindow::default(),
            chord_sites: [ActuatorSite::McpUlnar, ActuatorSite::McpCenter, ActuatorSite::McpRadial],
            bass_sites: [ActuatorSite::Hypothenar, ActuatorSite::Thenar],
            percussion: PercussionTable::default(),
            rabbit: RabbitParams::default(),
            channel_roles: default_channel_roles(),
            velocity_law: VelocityLaw::BandLinear,
        }
    }
}

impl MappingProfile {
    /// Role for a channel; `None` when the channel is not listed.
    pub fn role(&self, channel: u8) -> Option<Role> {
        self.channel_roles.get(&channel).copied()
    }
}

/// One vibration pulse on one site.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HapticEvent {
    pub t_on: f64,
    pub duration: f64,
    pub site: ActuatorSite,
    pub intensity: u8,
    /// Groups the events born of one musical note. Mappers emit 0; the
    /// renderer stamps the real id.
    pub gesture_id: u64,
}

impl HapticEvent {
    pub fn end(&self) -> f64 {
        self.t_on + self.duration
    }
}

/// A note with resolved timing, as handed to the mappers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoteSpan {
    pub note: u8,
    pub velocity: u8,
    pub t_on: f64,
    pub duration: f64,
}

/// Non-fatal findings collected while mapping.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Diagnostics {
    /// Melody notes whose octave had no band and were clamped to the nearest.
    pub unbanded_octaves: u64,
    /// Chord/bass notes outside the pitch window, clamped to its edge.
    pub window_clamped: u64,
    pub unmapped_percussion: u64,
    pub unmatched_note_offs: u64,
    /// Notes still sounding at the end of the song.
    pub unclosed_notes: u64,
    /// Note On for a note that was already sounding.
    pub retriggered_notes: u64,
    pub zero_length_notes: u64,
    /// Channels with events but no configured role.
    pub unassigned_channels: BTreeSet<u8>,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        *self == Diagnostics::default()
    }
}

impl fmt::Display for Diagnostics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let counters = [
            ("melody notes clamped to nearest octave band", self.unbanded_octaves),
            ("notes clamped to the bass window", self.window_clamped),
            ("unmapped percussion notes", self.unmapped_percussion),
            ("note-offs without a note-on", self.unmatched_note_offs),
            ("notes closed at end of song", self.unclosed_notes),
            ("retriggered notes", self.retriggered_notes),
            ("zero-length notes dropped", self.zero_length_notes),
        ];
        let mut first = true;
        for (label, n) in counters.iter().filter(|(_, n)| *n > 0) {
            if !first {
                writeln!(f)?;
            }
            first = false;
            write!(f, "{n} {label}")?;
        }
        if !self.unassigned_channels.is_empty() {
            if !first {
                writeln!(f)?;
            }
            let list: Vec<String> = self.unassigned_channels.iter().map(|c| c.to_string()).collect();
            write!(f, "ignored unassigned channels: {}", list.join(", "))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MappingError {
    #[error("frequency {0} Hz is outside the ERM band 50-150 Hz")]
    FrequencyOutOfRange(f64),
    #[error("semitone index {index} is outside the window span 0..={span}")]
    SemitoneOutOfRange { index: i32, span: u8 },
    #[error("note {0} has no entry in the finger table")]
    UnmappedNote(u8),
}

/// Drive intensity for an ERM frequency: 1.7 units per Hz, so 50, 100 and
/// 150 Hz land on 85, 170 and 255.
pub fn frequency_to_intensity(freq_hz: f64) -> Result<u8, MappingError> {
    if !(ERM_MIN_HZ..=ERM_MAX_HZ).contains(&freq_hz) {
        return Err(MappingError::FrequencyOutOfRange(freq_hz));
    }
    Ok((1.7 * freq_hz).round().min(255.0) as u8)
}

/// Frequency of a semitone inside the bass window (linear in semitones).
pub fn bass_pitch_to_frequency(semitone_index: i32, profile: &MappingProfile) -> Result<f64, MappingError> {
    let w = &profile.bass;
    if semitone_index < 0 || semitone_index > i32::from(w.span_semitones) {
        return Err(MappingError::SemitoneOutOfRange {
            index: semitone_index,
            span: w.span_semitones,
        });
    }
    let step = (w.top_freq_hz - w.base_freq_hz) / f64::from(w.span_semitones);
    Ok(w.base_freq_hz + f64::from(semitone_index) * step)
}

/// Intensity for a melody note: its octave's band, scanned linearly by
/// velocity. Octaves with no band borrow the nearest configured one.
pub fn octave_band_intensity(note: u8, velocity: u8, profile: &MappingProfile, diag: &mut Diagnostics) -> u8 {
    let octave = octave_index(note);
    let band = match profile.octave_bands.get(&octave) {
        Some(b) => *b,
        None => {
            diag.unbanded_octaves += 1;
            profile
                .octave_bands
                .iter()
                .min_by_key(|(k, _)| (**k - octave).abs())
                .map(|(_, b)| *b)
                .expect("profile has at least one octave band")
        }
    };
    let v = f64::from(velocity.clamp(1, 127));
    let span = f64::from(band.hi) - f64::from(band.lo);
    band.lo + (span * (v - 1.0) / 126.0).round() as u8
}

pub fn map_melody_note(
    span: &NoteSpan,
    profile: &MappingProfile,
    diag: &mut Diagnostics,
) -> Result<Vec<HapticEvent>, MappingError> {
    match profile.melody_mode {
        MelodyMode::FingerScript => {
            let finger = *profile
                .finger_table
                .get(&span.note)
                .ok_or(MappingError::UnmappedNote(span.note))?;
            let site = ActuatorSite::fingertip(finger).ok_or(MappingError::UnmappedNote(span.note))?;
            let intensity = octave_band_intensity(span.note, span.velocity, profile, diag);
            Ok(vec![HapticEvent {
                t_on: span.t_on,
                duration: span.duration,
                site,
                intensity,
                gesture_id: 0,
            }])
        }
        MelodyMode::ChromaticCircle => {
            let intensity = octave_band_intensity(span.note, span.velocity, profile, diag);
            let pos = profile.circle.locate(span.note % 12);
            if pos.from == pos.to {
                return Ok(vec![HapticEvent {
                    t_on: span.t_on,
                    duration: span.duration,
                    site: pos.from,
                    intensity,
                    gesture_id: 0,
                }]);
            }
            Ok(rabbit_train(
                pos.from,
                pos.to,
                pos.fraction,
                span.t_on,
                span.duration,
                intensity,
                &profile.rabbit,
            ))
        }
    }
}

fn window_index(note: u8, profile: &MappingProfile, diag: &mut Diagnostics) -> i32 {
    let raw = i32::from(note) - i32::from(profile.bass.base_note);
    let span = i32::from(profile.bass.span_semitones);
    if !(0..=span).contains(&raw) {
        diag.window_clamped += 1;
    }
    raw.clamp(0, span)
}

fn window_intensity(index: i32, profile: &MappingProfile) -> u8 {
    let freq = bass_pitch_to_frequency(index, profile).expect("index clamped to window");
    // a profile may widen the frequency range past the ERM band
    frequency_to_intensity(freq.clamp(ERM_MIN_HZ, ERM_MAX_HZ)).expect("clamped to ERM band")
}

/// Chord tone on the knuckle line: window thirds pick the site, pitch
/// picks the intensity.
pub fn map_chord_note(span: &NoteSpan, profile: &MappingProfile, diag: &mut Diagnostics) -> HapticEvent {
    let index = window_index(span.note, profile, diag);
    let width = i32::from(profile.bass.span_semitones);
    let third = if 3 * index < width {
        0
    } else if 3 * index > 2 * width {
        2
    } else {
        1
    };
    HapticEvent {
        t_on: span.t_on,
        duration: span.duration,
        site: profile.chord_sites[third],
        intensity: window_intensity(index, profile),
        gesture_id: 0,
    }
}

/// Bass-line note on the palm pads: lower half of the window on the first
/// pad, upper half (midpoint included) on the second.
pub fn map_bassline_note(span: &NoteSpan, profile: &MappingProfile, diag: &mut Diagnostics) -> HapticEvent {
    let index = window_index(span.note, profile, diag);
    let upper = 2 * index >= i32::from(profile.bass.span_semitones);
    HapticEvent {
        t_on: span.t_on,
        duration: span.duration,
        site: profile.bass_sites[usize::from(upper)],
        intensity: window_intensity(index, profile),
        gesture_id: 0,
    }
}

/// Fixed-length hits for one drum note, one per mapped site, ordered by
/// site id. Unknown drum notes produce nothing.
pub fn map_percussion(
    gm_note: u8,
    velocity: u8,
    t_on: f64,
    profile: &MappingProfile,
    diag: &mut Diagnostics,
) -> Vec<HapticEvent> {
    let Some(hits) = profile.percussion.entries.get(&gm_note) else {
        diag.unmapped_percussion += 1;
        return Vec::new();
    };
    let base = (f64::from(velocity.min(127)) * 255.0 / 127.0).round();
    let mut events: Vec<HapticEvent> = hits
        .iter()
        .map(|hit| HapticEvent {
            t_on,
            duration: profile.percussion.duration_ms / 1000.0,
            site: hit.site,
            intensity: (base * hit.scale.clamp(0.0, 1.0)).round() as u8,
            gesture_id: 0,
        })
        .collect();
    events.sort_by_key(|e| e.site.id());
    events
}
