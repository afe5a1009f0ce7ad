use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use lensflow_core::geometry::Diagnostics;
use lensflow_core::blowup::ConvergenceRow;
use serde::Serialize;

/// Writes `bytes` to a temporary file next to `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes).with_context(|| format!("writing {}", path.display()))?;
    tmp.as_file().sync_all().with_context(|| format!("syncing {}", path.display()))?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing JSON")?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

pub fn diagnostics_csv(rows: &[Diagnostics]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

#[derive(Serialize)]
struct BlowupRecord {
    i: usize,
    lambda: f64,
    hausdorff: f64,
    density_gap_rms: f64,
}

pub fn blowup_csv(rows: &[ConvergenceRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for (i, r) in rows.iter().enumerate() {
        w.serialize(BlowupRecord {
            i,
            lambda: r.lambda,
            hausdorff: r.hausdorff,
            density_gap_rms: r.density_gap_rms,
        })?;
    }
    Ok(w.into_inner()?)
}
