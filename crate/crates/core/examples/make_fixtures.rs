//! Writes a synthetic content/style pair, its conditional model and a
//! transfer config into the directory given as the first argument.
//!
//! ```text
//! cargo run --example make_fixtures -- fixtures
//! cargo run --bin ssp -- --config fixtures/transfer.json
//! ```

use std::fs;
use std::path::PathBuf;

use ssp::io::write_raw;
use ssp::synthetic::{content_image, default_shape, pair_model, style_image};

fn main() -> ssp::Result<()> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "fixtures".into()));
    let seed: u64 = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(1);
    fs::create_dir_all(&dir)?;
    let shape = default_shape();
    let content = content_image(shape, seed);
    let style = style_image(shape, seed);
    write_raw(dir.join("content.sspg"), &content)?;
    write_raw(dir.join("style.sspg"), &style)?;
    fs::write(
        dir.join("model.json"),
        pair_model(&content, &style, 0.5)?.to_json(),
    )?;
    let config = serde_json::json!({
        "command": "transfer",
        "model_file": dir.join("model.json"),
        "content": dir.join("content.sspg"),
        "style": dir.join("style.sspg"),
        "output_dir": dir.join("out"),
        "seed": seed,
    });
    fs::write(
        dir.join("transfer.json"),
        serde_json::to_string_pretty(&config).unwrap(),
    )?;
    println!("{}", dir.display());
    Ok(())
}
