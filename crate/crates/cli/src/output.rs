use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
    seed: Option<u64>,
    versions: Versions,
    outputs: &'a [String],
}

#[derive(Serialize)]
struct Versions {
    pdmcount: &'static str,
    cli: &'static str,
}

/// Collects output files and writes them into one directory.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn record(&mut self, name: &str) {
        self.written.push(name.to_string());
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.text(name, &(text + "\n"))
    }

    pub fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.record(name);
        Ok(())
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        self.record(name);
        Ok(())
    }

    /// Writes `manifest.json` listing everything written so far.
    pub fn manifest<C: Serialize>(mut self, command: &str, config: &C, seed: Option<u64>) -> Result<()> {
        let mut outputs = self.written.clone();
        outputs.push("manifest.json".into());
        let m = Manifest {
            command,
            config,
            seed,
            versions: Versions { pdmcount: pdmcount_version(), cli: env!("CARGO_PKG_VERSION") },
            outputs: &outputs,
        };
        self.json("manifest.json", &m)
    }
}

fn pdmcount_version() -> &'static str {
    // Both crates share the workspace version.
    env!("CARGO_PKG_VERSION")
}

/// Plain-text table with right-aligned columns after the first.
pub fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let cols = header.len();
    let width: Vec<usize> =
        (0..cols).map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0)).collect();
    let line = |cells: &[String]| {
        let mut s = String::new();
        for (j, c) in cells.iter().enumerate() {
            if j == 0 {
                s.push_str(&format!("{c:<w$}", w = width[0]));
            } else {
                s.push_str(&format!("  {c:>w$}", w = width[j]));
            }
        }
        s.trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
    out.push('\n');
    for r in rows {
        out.push_str(&line(r));
    }
    out
}

pub fn num(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v:.3}"),
        Some(_) => "nan".into(),
        None => "-".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_table() {
        let t = table(&["a".into(), "value".into()], &[vec!["long name".into(), "1.000".into()]]);
        assert_eq!(t, "a          value\n----------------\nlong name  1.000\n");
    }

    #[test]
    fn three_decimals() {
        assert_eq!(num(Some(-0.0048)), "-0.005");
        assert_eq!(num(None), "-");
    }
}
