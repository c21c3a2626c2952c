//! Plot-ready output: JSON summaries and CSV error samples.

use robinv_core::Result;
use serde::Serialize;
use std::fs;
use std::io::Write;
use std::path::Path;

/// One row per draw: `signal,draw,error`. Float formatting uses the shortest
/// round-trip representation, so a fixed seed reproduces the file byte for
/// byte.
pub fn write_error_csv(path: &Path, samples: &[Vec<f64>]) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "signal,draw,error")?;
    for (i, per_signal) in samples.iter().enumerate() {
        for (j, err) in per_signal.iter().enumerate() {
            writeln!(file, "{i},{j},{err}")?;
        }
    }
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path)?;
    Ok(())
}
