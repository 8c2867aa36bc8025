mod support;

use support::{asset, songs};
use tactile_core::midi::{encode_smf, parse_smf};

#[test]
fn checked_in_fixtures_match_their_source() {
    for (name, doc) in songs::all() {
        let on_disk = std::fs::read(asset(name)).unwrap();
        assert_eq!(on_disk, encode_smf(&doc), "{name}.mid is stale; rerun the write_fixtures example");
    }
}

#[test]
fn fixtures_parse_back_exactly() {
    for (name, doc) in songs::all() {
        let parsed = parse_smf(&std::fs::read(asset(name)).unwrap()).unwrap();
        assert_eq!(parsed.note_count(), doc.note_count(), "{name}");
        assert_eq!(parsed.tracks, doc.tracks, "{name}");
        assert_eq!(parsed.tempo_changes, doc.tempo_changes, "{name}");
    }
}

#[test]
fn expected_note_counts() {
    let counts: Vec<(&str, usize)> = songs::all().iter().map(|(n, d)| (*n, d.note_count())).collect();
    assert_eq!(
        counts,
        vec![
            ("fur-elise-opening", 9),
            ("music-land", 13),
            ("patterns", 14),
            ("traffic-cop", 20),
            ("drum-groove", 24),
            ("layered-demo", 20),
        ]
    );
}
