//! Regenerates `fixtures/xor/`.

use std::fs;
use std::path::Path;

use bitwise_nn_cli::fixtures::{xor_idx, xor_model};

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/xor");
    fs::create_dir_all(&dir)?;
    let (images, labels) = xor_idx();
    for split in ["train", "t10k"] {
        fs::write(dir.join(format!("{split}-images-idx3-ubyte")), &images)?;
        fs::write(dir.join(format!("{split}-labels-idx1-ubyte")), &labels)?;
    }
    xor_model().save(&dir.join("xor.bnnf"))?;
    Ok(())
}
