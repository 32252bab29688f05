//! Writes the posterior CSV and SVG files for all three 30-bin experiments.
//!
//! cargo run --example figure_presets -- [OUT_DIR]

use std::path::PathBuf;

use msb_prior::cli::presets::PresetName;
use msb_prior::cli::write_figure;
use msb_prior::Result;

fn main() -> Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("figures"));
    for name in PresetName::ALL {
        for path in write_figure(name, &dir.join(name.as_str()))? {
            println!("{}", path.display());
        }
    }
    Ok(())
}
