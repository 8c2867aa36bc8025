#![allow(dead_code)]

pub mod songs;

use std::path::PathBuf;
use tactile_core::mapping::{render_timeline, MappingProfile, Rendered};
use tactile_core::midi::{build_tempo_map, merge_tracks, parse_smf, SmfDocument};

pub fn asset(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/midi").join(format!("{name}.mid"))
}

pub fn load(name: &str) -> SmfDocument {
    parse_smf(&std::fs::read(asset(name)).unwrap()).unwrap()
}

pub fn render(doc: &SmfDocument, profile: &MappingProfile) -> Rendered {
    let events = merge_tracks(doc);
    render_timeline(&events, &build_tempo_map(doc), doc.ticks_per_quarter, profile).unwrap()
}
