//! Regenerates the bundled synthetic fixture.
//!
//! cargo run -p vulnidx-core --example write_fixture -- crates/core/fixtures/synthetic

use std::path::PathBuf;

use vulnidx::synthetic::{SyntheticFixture, FIXTURE_SEED};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir: PathBuf = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/synthetic")));
    std::fs::create_dir_all(&dir)?;
    SyntheticFixture::generate(FIXTURE_SEED).write(&dir)?;
    println!("wrote {}", dir.display());
    Ok(())
}
