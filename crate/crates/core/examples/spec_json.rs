//! Writes a bundled fixture as a spec JSON file to start a custom
//! architecture from, then reads it back and reports its slot structure.
//!
//! cargo run --example spec_json -- resnet18 > my-net.json

use widthsearch::arch::{fixtures, param_count, ArchitectureSpec};

fn main() -> widthsearch::Result<()> {
    let name = std::env::args().nth(1).unwrap_or_else(|| "plain-cnn".into());
    let spec = fixtures::by_name(&name)?;
    let text = spec.to_json();
    println!("{text}");

    let back = ArchitectureSpec::from_json(&text)?;
    back.validate()?;
    let base = back.uniform_schedule(16);
    eprintln!(
        "{name}: {} slots, {} conv layers, boundaries {:?}, {} params at width 16",
        back.slot_count(),
        back.schedule_len(),
        back.segment_boundaries(),
        param_count(&back, &base)?
    );
    Ok(())
}
