//! Regenerates `assets/midi/*.mid` from the song definitions.
//!
//! cargo run -p tactile-core --example write_fixtures

#[path = "../tests/support/songs.rs"]
mod songs;

use std::path::PathBuf;
use tactile_core::midi::encode_smf;

fn main() -> std::io::Result<()> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets/midi");
    std::fs::create_dir_all(&dir)?;
    for (name, doc) in songs::all() {
        let path = dir.join(format!("{name}.mid"));
        std::fs::write(&path, encode_smf(&doc))?;
        println!("wrote {} ({} notes)", path.display(), doc.note_count());
    }
    Ok(())
}
