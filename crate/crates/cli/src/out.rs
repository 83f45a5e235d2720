//! Output writers: comma-separated tables and structured-text summaries with
//! stable ordering and fixed float formatting, so identical runs produce
//! identical bytes.

use anyhow::{Context, Result};
use std::path::{Path, PathBuf};

/// Fixed-width scientific formatting used in every table.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root)
            .with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn write(&self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.root.join(name);
        std::fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Builds a CSV with a header row.
pub struct Table {
    lines: Vec<String>,
}

impl Table {
    pub fn new(header: &str) -> Self {
        Table { lines: vec![header.to_string()] }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.lines.push(cells.join(","));
    }

    pub fn finish(self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

/// Structured-text summary: `key: value` lines in insertion order.
pub struct Summary {
    lines: Vec<String>,
}

impl Summary {
    pub fn new(command: &str) -> Self {
        Summary { lines: vec!["melnikov run summary v1".into(), format!("command: {command}")] }
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        self.lines.push(format!("{key}: {value}"));
    }

    pub fn finish(self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}
