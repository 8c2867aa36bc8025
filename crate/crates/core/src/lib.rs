//! Rendering engine that turns MIDI into vibrotactile commands for a
//! ten-actuator palm layout.

pub mod eval;
pub mod layout;
pub mod live;
pub mod mapping;
pub mod midi;
pub mod profile;
pub mod timeline;
pub mod transport;
