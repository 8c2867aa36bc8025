//! JSON mapping profiles: schema, validation and the built-in presets.
//!
//! Every section is optional and falls back to [`MappingProfile::default`].
//! `melody.finger_table`, `melody.octave_bands` and `percussion.table`
//! replace the default tables wholesale; `channels` entries are merged
//! over the default channel roles.

use crate::layout::{ActuatorSite, ChromaticCircle};
use crate::mapping::{
    MappingProfile, MelodyMode, OctaveBand, PercussionHit, Role, Sequencing, VelocityLaw, MIDDLE_OCTAVE,
    UPPER_OCTAVE, ERM_MAX_HZ, ERM_MIN_HZ,
};
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable listing extra directories searched for `<name>.json`.
pub const PROFILE_PATH_VAR: &str = "TACTILE_PROFILE_PATH";

pub const PRESETS: [(&str, &str); 3] = [
    ("fur-elise", include_str!("../presets/fur-elise.json")),
    ("thompson-study", include_str!("../presets/thompson-study.json")),
    ("gm-drums", include_str!("../presets/gm-drums.json")),
];

pub const MAX_TAP_COUNT: u32 = 16;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("cannot read profile {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no profile file or preset named `{0}`")]
    NotFound(String),
}

fn invalid(path: impl Into<String>, message: impl Into<String>) -> ProfileError {
    ProfileError::Invalid {
        path: path.into(),
        message: message.into(),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    pub layout: Option<LayoutSection>,
    pub melody: Option<MelodySection>,
    pub bass: Option<BassSection>,
    pub percussion: Option<PercussionSection>,
    pub rabbit: Option<RabbitSection>,
    pub channels: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayoutSection {
    /// Pitch class (0..=11) to fingertip site name.
    pub circle: Option<BTreeMap<String, String>>,
    /// Knuckle sites for the low, middle and high thirds of the pitch window.
    pub chord_sites: Option<Vec<String>>,
    /// Pads for the lower and upper halves of the pitch window.
    pub bass_sites: Option<Vec<String>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MelodySection {
    pub mode: Option<String>,
    /// MIDI note to piano finger 1..=5.
    pub finger_table: Option<BTreeMap<String, u8>>,
    /// `"middle"`, `"upper"` or an octave index, to `[lo, hi]`.
    pub octave_bands: Option<BTreeMap<String, [u8; 2]>>,
    pub velocity_law: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BassSection {
    pub base_note: Option<u8>,
    pub span: Option<u8>,
    pub freq_range: Option<[f64; 2]>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PercussionSection {
    pub duration_ms: Option<f64>,
    /// GM note to the sites it drives.
    pub table: Option<BTreeMap<String, Vec<HitEntry>>>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
pub enum HitEntry {
    Site(String),
    Scaled { site: String, scale: f64 },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RabbitSection {
    pub tap_count: Option<u32>,
    pub inter_tap_ms: Option<f64>,
    pub tap_duration_ms: Option<f64>,
    pub sequencing: Option<String>,
}

fn site(path: &str, name: &str) -> Result<ActuatorSite, ProfileError> {
    name.parse().map_err(|_| invalid(path, format!("unknown site `{name}`")))
}

fn int_key<T: std::str::FromStr + PartialOrd + std::fmt::Display>(
    path: &str,
    key: &str,
    lo: T,
    hi: T,
) -> Result<T, ProfileError> {
    match key.trim().parse::<T>() {
        Ok(v) if v >= lo && v <= hi => Ok(v),
        _ => Err(invalid(path, format!("key `{key}` must be an integer in {lo}..={hi}"))),
    }
}

fn positive(path: &str, v: f64) -> Result<f64, ProfileError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(invalid(path, format!("must be a positive number, got {v}")))
    }
}

fn lower_snake(s: &str) -> String {
    s.trim().to_ascii_lowercase().replace(['-', ' '], "_")
}

impl ProfileDocument {
    pub fn parse(text: &str) -> Result<ProfileDocument, ProfileError> {
        if text.trim().is_empty() {
            return Ok(ProfileDocument::default());
        }
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            invalid(if path == "." { "(document)".into() } else { path }, e.into_inner().to_string())
        })
    }

    /// Validates every section and applies it over the defaults.
    pub fn into_profile(self) -> Result<MappingProfile, ProfileError> {
        let mut p = MappingProfile::default();

        if let Some(layout) = self.layout {
            if let Some(circle) = layout.circle {
                let mut anchors = Vec::new();
                for (k, name) in &circle {
                    let path = format!("layout.circle.{k}");
                    anchors.push((int_key::<u8>(&path, k, 0, 11)?, site(&path, name)?));
                }
                p.circle = ChromaticCircle::new(&anchors).map_err(|e| invalid("layout.circle", e.to_string()))?;
            }
            if let Some(names) = layout.chord_sites {
                p.chord_sites = fixed_sites::<3>("layout.chord_sites", &names)?;
            }
            if let Some(names) = layout.bass_sites {
                p.bass_sites = fixed_sites::<2>("layout.bass_sites", &names)?;
            }
        }

        if let Some(melody) = self.melody {
            if let Some(mode) = melody.mode {
                p.melody_mode = match lower_snake(&mode).as_str() {
                    "finger_script" => MelodyMode::FingerScript,
                    "chromatic_circle" => MelodyMode::ChromaticCircle,
                    _ => return Err(invalid("melody.mode", "expected `finger_script` or `chromatic_circle`")),
                };
            }
            if let Some(table) = melody.finger_table {
                p.finger_table.clear();
                for (k, finger) in &table {
                    let path = format!("melody.finger_table.{k}");
                    let note = int_key::<u8>(&path, k, 0, 127)?;
                    if !(1..=5).contains(finger) {
                        return Err(invalid(path, format!("finger {finger} outside 1..=5")));
                    }
                    p.finger_table.insert(note, *finger);
                }
            }
            if let Some(bands) = melody.octave_bands {
                p.octave_bands.clear();
                for (k, [lo, hi]) in &bands {
                    let path = format!("melody.octave_bands.{k}");
                    let octave = match k.as_str() {
                        "middle" => MIDDLE_OCTAVE,
                        "upper" => UPPER_OCTAVE,
                        _ => int_key::<i32>(&path, k, -2, 8)?,
                    };
                    if lo > hi {
                        return Err(invalid(path, format!("band [{lo}, {hi}] is reversed")));
                    }
                    if p.octave_bands.insert(octave, OctaveBand { lo: *lo, hi: *hi }).is_some() {
                        return Err(invalid(path, format!("octave {octave} listed twice")));
                    }
                }
            }
            if let Some(law) = melody.velocity_law {
                p.velocity_law = match lower_snake(&law).as_str() {
                    "band_linear" => VelocityLaw::BandLinear,
                    _ => return Err(invalid("melody.velocity_law", "expected `band_linear`")),
                };
            }
        }

        if let Some(bass) = self.bass {
            if let Some(n) = bass.base_note {
                if n > 127 {
                    return Err(invalid("bass.base_note", "must be a MIDI note 0..=127"));
                }
                p.bass.base_note = n;
            }
            if let Some(span) = bass.span {
                if span == 0 {
                    return Err(invalid("bass.span", "must be at least 1 semitone"));
                }
                p.bass.span_semitones = span;
            }
            if u16::from(p.bass.base_note) + u16::from(p.bass.span_semitones) > 127 {
                return Err(invalid("bass", "base_note + span exceeds note 127"));
            }
            if let Some([lo, hi]) = bass.freq_range {
                let in_range = |f: f64| (ERM_MIN_HZ..=ERM_MAX_HZ).contains(&f);
                if !(in_range(lo) && in_range(hi) && lo < hi) {
                    return Err(invalid(
                        "bass.freq_range",
                        format!("need {ERM_MIN_HZ} <= lo < hi <= {ERM_MAX_HZ} Hz, got [{lo}, {hi}]"),
                    ));
                }
                p.bass.base_freq_hz = lo;
                p.bass.top_freq_hz = hi;
            }
        }

        if let Some(perc) = self.percussion {
            if let Some(d) = perc.duration_ms {
                p.percussion.duration_ms = positive("percussion.duration_ms", d)?;
            }
            if let Some(table) = perc.table {
                p.percussion.entries.clear();
                for (k, hits) in &table {
                    let path = format!("percussion.table.{k}");
                    let note = int_key::<u8>(&path, k, 0, 127)?;
                    let mut parsed = Vec::with_capacity(hits.len());
                    for (i, hit) in hits.iter().enumerate() {
                        let hit_path = format!("{path}.{i}");
                        let (name, scale) = match hit {
                            HitEntry::Site(name) => (name, 1.0),
                            HitEntry::Scaled { site, scale } => (site, *scale),
                        };
                        if !(0.0..=1.0).contains(&scale) {
                            return Err(invalid(hit_path, format!("scale {scale} outside 0..=1")));
                        }
                        let s = site(&hit_path, name)?;
                        if parsed.iter().any(|h: &PercussionHit| h.site == s) {
                            return Err(invalid(hit_path, format!("site {s} listed twice")));
                        }
                        parsed.push(PercussionHit { site: s, scale });
                    }
                    p.percussion.entries.insert(note, parsed);
                }
            }
        }

        if let Some(r) = self.rabbit {
            if let Some(n) = r.tap_count {
                if !(1..=MAX_TAP_COUNT).contains(&n) {
                    return Err(invalid("rabbit.tap_count", format!("must be in 1..={MAX_TAP_COUNT}")));
                }
                p.rabbit.tap_count = n;
            }
            if let Some(v) = r.inter_tap_ms {
                p.rabbit.inter_tap_ms = positive("rabbit.inter_tap_ms", v)?;
            }
            if let Some(v) = r.tap_duration_ms {
                p.rabbit.tap_duration_ms = positive("rabbit.tap_duration_ms", v)?;
            }
            if let Some(s) = r.sequencing {
                p.rabbit.sequencing = match lower_snake(&s).as_str() {
                    "alternating" => Sequencing::Alternating,
                    "saltation" => Sequencing::Saltation,
                    _ => return Err(invalid("rabbit.sequencing", "expected `alternating` or `saltation`")),
                };
            }
        }

        if let Some(channels) = self.channels {
            for (k, role) in &channels {
                let path = format!("channels.{k}");
                let ch = int_key::<u8>(&path, k, 0, 15)?;
                p.channel_roles.insert(ch, parse_role(&path, role)?);
            }
        }

        Ok(p)
    }
}

fn fixed_sites<const N: usize>(path: &str, names: &[String]) -> Result<[ActuatorSite; N], ProfileError> {
    if names.len() != N {
        return Err(invalid(path, format!("expected {N} sites, got {}", names.len())));
    }
    let mut out = [ActuatorSite::TipThumb; N];
    for (i, name) in names.iter().enumerate() {
        out[i] = site(&format!("{path}.{i}"), name)?;
    }
    Ok(out)
}

pub fn parse_role(path: &str, s: &str) -> Result<Role, ProfileError> {
    Ok(match lower_snake(s).as_str() {
        "melody" => Role::Melody,
        "chords" => Role::Chords,
        "bassline" => Role::Bassline,
        "percussion" => Role::Percussion,
        "ignore" => Role::Ignore,
        _ => return Err(invalid(path, format!("unknown role `{s}`"))),
    })
}

pub fn parse_profile(text: &str) -> Result<MappingProfile, ProfileError> {
    ProfileDocument::parse(text)?.into_profile()
}

pub fn preset(name: &str) -> Option<MappingProfile> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_profile(text).expect("built-in presets are valid"))
}

/// Resolves `arg` as a file path, then as `<arg>.json` in each directory
/// of `TACTILE_PROFILE_PATH`, then as a built-in preset name.
pub fn load_profile(arg: &str) -> Result<MappingProfile, ProfileError> {
    let search = std::env::var_os(PROFILE_PATH_VAR);
    load_profile_from(arg, search.as_deref().map(|s| std::env::split_paths(s).collect()).unwrap_or_default())
}

pub fn load_profile_from(arg: &str, search: Vec<PathBuf>) -> Result<MappingProfile, ProfileError> {
    let direct = Path::new(arg);
    if direct.is_file() {
        return read_file(direct);
    }
    for dir in search {
        let candidate = dir.join(format!("{arg}.json"));
        if candidate.is_file() {
            return read_file(&candidate);
        }
    }
    preset(arg).ok_or_else(|| ProfileError::NotFound(arg.to_string()))
}

fn read_file(path: &Path) -> Result<MappingProfile, ProfileError> {
    let text = std::fs::read_to_string(path).map_err(|source| ProfileError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_profile(&text)
}
