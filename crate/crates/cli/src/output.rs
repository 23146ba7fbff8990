//! Deterministic output files: CSV with 17-significant-digit floats and
//! `\n` line endings, written atomically (temp file in the target directory,
//! then rename), plus the run manifest.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

/// 17 significant digits: exact binary64 round-trip.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `contents` to `dir/name` atomically and returns the final path.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> io::Result<PathBuf> {
    let final_path = dir.join(name);
    let tmp_path = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp_path)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp_path, &final_path)?;
    Ok(final_path)
}

/// Builds a CSV body from a header and rows of preformatted cells.
pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// The run manifest: resolved config echo, artifact version, command,
/// wall time, produced files, and the invariant summary. Written last and
/// atomically, so a manifest on disk certifies a completed run.
pub struct Manifest {
    pub command: String,
    pub config_echo: Vec<(String, String)>,
    pub warnings: Vec<String>,
    pub outputs: Vec<PathBuf>,
    pub invariants: Vec<(String, bool)>,
    pub notes: Vec<String>,
    pub wall_time: Duration,
}

impl Manifest {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("artifact_version = {}\n", env!("CARGO_PKG_VERSION")));
        out.push_str(&format!("command = {}\n", self.command));
        out.push_str(&format!("wall_time_s = {:.3}\n", self.wall_time.as_secs_f64()));
        for f in &self.outputs {
            out.push_str(&format!("output = {}\n", f.display()));
        }
        for (name, ok) in &self.invariants {
            out.push_str(&format!("invariant.{name} = {}\n", if *ok { "pass" } else { "fail" }));
        }
        for w in &self.warnings {
            out.push_str(&format!("warning = {w}\n"));
        }
        for n in &self.notes {
            out.push_str(&format!("note = {n}\n"));
        }
        out.push_str("\n# resolved configuration\n");
        for (k, v) in &self.config_echo {
            out.push_str(&format!("{k} = {v}\n"));
        }
        out
    }

    pub fn write(&self, dir: &Path) -> io::Result<PathBuf> {
        write_atomic(dir, "manifest.txt", &self.render())
    }
}
