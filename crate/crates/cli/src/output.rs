//! CSV and manifest writing.
//!
//! A CSV goes to `<out>.partial` while it is being produced and is renamed
//! to `<out>` only after the trailing completeness marker is written.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use crate::config::Config;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const COMPLETE_MARKER: &str = "# complete";

/// `# nbldpc <version> command=<cmd> seed=<seed> config=<sha256>`
pub fn header_comment(cfg: &Config) -> String {
    let seed = if cfg.has("seed") { cfg.raw("seed") } else { "none" };
    format!(
        "# nbldpc {VERSION} command={} seed={seed} config={}",
        cfg.command(),
        cfg.hash()
    )
}

/// Resolved configuration in a form `--config` accepts again. Worker count
/// is recorded as a comment since it does not affect results.
pub fn manifest_text(cfg: &Config, workers: usize) -> String {
    format!(
        "# nbldpc {VERSION} manifest\n# workers = {workers}\n# config = {}\n{}",
        cfg.hash(),
        cfg.canonical()
    )
}

fn side_path(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn manifest_path(out: &Path) -> PathBuf {
    side_path(out, ".manifest")
}

/// Writes the manifest next to `out`, or to stderr when there is no file.
pub fn emit_manifest(out: Option<&Path>, cfg: &Config, workers: usize) -> Result<()> {
    let text = manifest_text(cfg, workers);
    match out {
        Some(path) => {
            let m = manifest_path(path);
            std::fs::write(&m, text).with_context(|| format!("writing {}", m.display()))
        }
        None => {
            eprint!("{text}");
            Ok(())
        }
    }
}

enum Target {
    File {
        writer: BufWriter<File>,
        partial: PathBuf,
        path: PathBuf,
    },
    Stdout(io::Stdout),
}

/// Row-at-a-time CSV writer.
pub struct CsvSink {
    target: Target,
}

impl CsvSink {
    pub fn create(out: Option<&Path>, cfg: &Config, columns: &str) -> Result<Self> {
        let target = match out {
            Some(path) => {
                let partial = side_path(path, ".partial");
                let file = File::create(&partial).with_context(|| format!("creating {}", partial.display()))?;
                Target::File {
                    writer: BufWriter::new(file),
                    partial,
                    path: path.to_path_buf(),
                }
            }
            None => Target::Stdout(io::stdout()),
        };
        let mut sink = CsvSink { target };
        sink.line(&header_comment(cfg))?;
        sink.line(columns)?;
        Ok(sink)
    }

    fn line(&mut self, s: &str) -> Result<()> {
        match &mut self.target {
            Target::File { writer, .. } => {
                writer.write_all(s.as_bytes())?;
                writer.write_all(b"\n")?;
                // Rows can take minutes each; keep the partial file current.
                writer.flush()?;
            }
            Target::Stdout(out) => {
                let mut lock = out.lock();
                lock.write_all(s.as_bytes())?;
                lock.write_all(b"\n")?;
                lock.flush()?;
            }
        }
        Ok(())
    }

    pub fn row(&mut self, s: &str) -> Result<()> {
        self.line(s)
    }

    /// Appends the completeness marker and moves the file into place.
    pub fn finish(mut self) -> Result<()> {
        self.line(COMPLETE_MARKER)?;
        if let Target::File { writer, partial, path } = self.target {
            let file = writer.into_inner().map_err(|e| e.into_error())?;
            file.sync_all()?;
            drop(file);
            std::fs::rename(&partial, &path)
                .with_context(|| format!("renaming {} to {}", partial.display(), path.display()))?;
        }
        Ok(())
    }
}

/// Writes a whole non-CSV artifact through a temporary file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let partial = side_path(path, ".partial");
    std::fs::write(&partial, contents).with_context(|| format!("writing {}", partial.display()))?;
    std::fs::rename(&partial, path).with_context(|| format!("renaming to {}", path.display()))?;
    Ok(())
}
