//! The ten palm actuator sites and the chromatic circle that places twelve
//! pitch classes around the five fingertips.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// One actuator position under the right palm. The numeric id is the
/// firmware address used on the wire and never changes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActuatorSite {
    TipThumb,
    TipIndex,
    TipMiddle,
    TipRing,
    TipLittle,
    McpRadial,
    McpCenter,
    McpUlnar,
    Thenar,
    Hypothenar,
}

impl ActuatorSite {
    pub const ALL: [ActuatorSite; 10] = [
        ActuatorSite::TipThumb,
        ActuatorSite::TipIndex,
        ActuatorSite::TipMiddle,
        ActuatorSite::TipRing,
        ActuatorSite::TipLittle,
        ActuatorSite::McpRadial,
        ActuatorSite::McpCenter,
        ActuatorSite::McpUlnar,
        ActuatorSite::Thenar,
        ActuatorSite::Hypothenar,
    ];

    pub const TIPS: [ActuatorSite; 5] = [
        ActuatorSite::TipThumb,
        ActuatorSite::TipIndex,
        ActuatorSite::TipMiddle,
        ActuatorSite::TipRing,
        ActuatorSite::TipLittle,
    ];

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn from_id(id: u8) -> Option<ActuatorSite> {
        Self::ALL.get(usize::from(id)).copied()
    }

    /// Canonical name, as written in logs and profiles.
    pub fn name(self) -> &'static str {
        match self {
            ActuatorSite::TipThumb => "TipThumb",
            ActuatorSite::TipIndex => "TipIndex",
            ActuatorSite::TipMiddle => "TipMiddle",
            ActuatorSite::TipRing => "TipRing",
            ActuatorSite::TipLittle => "TipLittle",
            ActuatorSite::McpRadial => "McpRadial",
            ActuatorSite::McpCenter => "McpCenter",
            ActuatorSite::McpUlnar => "McpUlnar",
            ActuatorSite::Thenar => "Thenar",
            ActuatorSite::Hypothenar => "Hypothenar",
        }
    }

    pub fn group(self) -> SiteGroup {
        site_group(self)
    }

    /// Fingertip for a piano finger number (1 = thumb ... 5 = little).
    pub fn fingertip(finger: u8) -> Option<ActuatorSite> {
        finger
            .checked_sub(1)
            .and_then(|i| Self::TIPS.get(usize::from(i)).copied())
    }
}

impl fmt::Display for ActuatorSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown actuator site `{0}`")]
pub struct UnknownSite(pub String);

impl FromStr for ActuatorSite {
    type Err = UnknownSite;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .iter()
            .copied()
            .find(|site| site.name() == s)
            .ok_or_else(|| UnknownSite(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteGroup {
    /// The five fingertips.
    Tips,
    /// The three metacarpophalangeal sites.
    Middle,
    /// Thenar and hypothenar pads.
    Bass,
}

pub fn site_group(site: ActuatorSite) -> SiteGroup {
    use ActuatorSite::*;
    match site {
        TipThumb | TipIndex | TipMiddle | TipRing | TipLittle => SiteGroup::Tips,
        McpRadial | McpCenter | McpUlnar => SiteGroup::Middle,
        Thenar | Hypothenar => SiteGroup::Bass,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CircleError {
    #[error("pitch class {0} is outside 0..=11")]
    PitchClass(u8),
    #[error("anchor site {0} is not a fingertip")]
    NotFingertip(ActuatorSite),
    #[error("site {0} anchors more than one pitch class")]
    DuplicateSite(ActuatorSite),
    #[error("pitch class {0} is anchored twice")]
    DuplicatePitchClass(u8),
    #[error("a chromatic circle needs at least two anchors, got {0}")]
    TooFewAnchors(usize),
}

/// Twelve equally spaced pitch classes on a circle, some pinned to
/// fingertips. Pitch classes between two anchors are rendered as a tap
/// train across those anchors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChromaticCircle {
    slots: [Option<ActuatorSite>; 12],
}

/// Where a pitch class sits relative to its surrounding anchors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirclePosition {
    /// Nearest anchor at or below the pitch class (counter-clockwise).
    pub from: ActuatorSite,
    /// Nearest anchor above it (clockwise); equals `from` when anchored.
    pub to: ActuatorSite,
    /// Normalized arc position from `from` to `to`.
    pub fraction: f64,
}

impl ChromaticCircle {
    pub fn new(anchors: &[(u8, ActuatorSite)]) -> Result<ChromaticCircle, CircleError> {
        let mut slots = [None; 12];
        let mut used = Vec::new();
        for &(pc, site) in anchors {
            if pc >= 12 {
                return Err(CircleError::PitchClass(pc));
            }
            if site.group() != SiteGroup::Tips {
                return Err(CircleError::NotFingertip(site));
            }
            if used.contains(&site) {
                return Err(CircleError::DuplicateSite(site));
            }
            if slots[usize::from(pc)].is_some() {
                return Err(CircleError::DuplicatePitchClass(pc));
            }
            used.push(site);
            slots[usize::from(pc)] = Some(site);
        }
        if used.len() < 2 {
            return Err(CircleError::TooFewAnchors(used.len()));
        }
        Ok(ChromaticCircle { slots })
    }

    /// Anchors as `(pitch class, site)` in pitch-class order.
    pub fn anchors(&self) -> Vec<(u8, ActuatorSite)> {
        self.slots
            .iter()
            .enumerate()
            .filter_map(|(pc, s)| s.map(|site| (pc as u8, site)))
            .collect()
    }

    pub fn locate(&self, pitch_class: u8) -> CirclePosition {
        locate_pitch_class(self, pitch_class)
    }
}

impl Default for ChromaticCircle {
    /// C, D#, F, G#, A# on thumb through little finger.
    fn default() -> Self {
        ChromaticCircle::new(&[
            (0, ActuatorSite::TipThumb),
            (3, ActuatorSite::TipIndex),
            (5, ActuatorSite::TipMiddle),
            (8, ActuatorSite::TipRing),
            (10, ActuatorSite::TipLittle),
        ])
        .expect("default circle is valid")
    }
}

pub fn locate_pitch_class(circle: &ChromaticCircle, pitch_class: u8) -> CirclePosition {
    let pc = usize::from(pitch_class % 12);
    if let Some(site) = circle.slots[pc] {
        return CirclePosition {
            from: site,
            to: site,
            fraction: 0.0,
        };
    }
    // construction guarantees at least two anchors, so both searches hit
    let back = (1..12)
        .find(|d| circle.slots[(pc + 12 - d) % 12].is_some())
        .expect("anchor below");
    let ahead = (1..12)
        .find(|d| circle.slots[(pc + d) % 12].is_some())
        .expect("anchor above");
    CirclePosition {
        from: circle.slots[(pc + 12 - back) % 12].unwrap(),
        to: circle.slots[(pc + ahead) % 12].unwrap(),
        fraction: back as f64 / (back + ahead) as f64,
    }
}
