//! Shared pieces of the `ddz` binary: position inspection, the action-space
//! table and the HTTP game service.

pub mod inspect;
pub mod service;

use ddz_core::actions::category_counts;

/// Environment variable naming the directory searched for a default
/// checkpoint.
pub const CHECKPOINT_DIR_ENV: &str = "DDZ_CHECKPOINT_DIR";

/// Newest `ckpt_<frames>.bin` in `dir`, by frame count.
pub fn latest_checkpoint(dir: &std::path::Path) -> Option<std::path::PathBuf> {
    std::fs::read_dir(dir)
        .ok()?
        .filter_map(|e| {
            let path = e.ok()?.path();
            let name = path.file_name()?.to_str()?;
            let frames: u64 = name.strip_prefix("ckpt_")?.strip_suffix(".bin")?.parse().ok()?;
            Some((frames, path))
        })
        .max_by_key(|(f, _)| *f)
        .map(|(_, p)| p)
}

/// The action-space size table: one row per category plus the total.
pub fn category_table() -> String {
    let counts = category_counts();
    let mut out = format!("{:<20}{:>7}\n", "category", "count");
    for (c, n) in &counts {
        out.push_str(&format!("{:<20}{:>7}\n", c.name(), n));
    }
    out.push_str(&format!("{:<20}{:>7}\n", "total", counts.iter().map(|(_, n)| n).sum::<usize>()));
    out
}
