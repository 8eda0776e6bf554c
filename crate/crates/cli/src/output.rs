use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::ValueEnum;
use serde::Serialize;

pub const OUT_DIR_VAR: &str = "BATCHLAB_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Json,
}

/// Where and how a command writes its result.
#[derive(Debug, Clone)]
pub struct Output {
    pub format: Format,
    pub out: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

impl Output {
    /// Relative artifact paths land under `BATCHLAB_OUT_DIR` when it is set.
    pub fn artifact_path(&self, path: &Path) -> PathBuf {
        match &self.out_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    pub fn emit<T: Serialize>(&self, value: &T, table: impl FnOnce(&T) -> String) -> anyhow::Result<()> {
        let text = match self.format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(value)?;
                s.push('\n');
                s
            }
            Format::Table => table(value),
        };
        match &self.out {
            Some(path) => {
                let path = self.artifact_path(path);
                write_atomic(&path, text.as_bytes())?;
                tracing::info!(path = %path.display(), "wrote output");
                Ok(())
            }
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                stdout.flush()?;
                Ok(())
            }
        }
    }
}

/// Writes to a temporary file beside `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// Left-aligned first column, right-aligned others.
pub fn table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut width: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let mut s = String::new();
        for (k, cell) in cells.enumerate().take(cols) {
            if k == 0 {
                s.push_str(&format!("{cell:<w$}", w = width[0]));
            } else {
                s.push_str(&format!("  {cell:>w$}", w = width[k]));
            }
        }
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    let mut out = line(&mut headers.iter().copied());
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }

    #[test]
    fn out_dir_applies_to_relative_paths() {
        let o = Output {
            format: Format::Json,
            out: None,
            out_dir: Some("/data".into()),
        };
        assert_eq!(o.artifact_path(Path::new("a.json")), Path::new("/data/a.json"));
        assert_eq!(o.artifact_path(Path::new("/tmp/a.json")), Path::new("/tmp/a.json"));
    }

    #[test]
    fn columns_align() {
        let t = table(&["state", "pi"], &[vec!["(0,0,0)".into(), "0.5".into()]]);
        assert_eq!(t, "state     pi\n(0,0,0)  0.5\n");
    }
}
