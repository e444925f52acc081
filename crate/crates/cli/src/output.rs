//! CSV emission with a manifest of every file written.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// Output directory that remembers what it wrote.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    files: Vec<PathBuf>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating output directory {}", root.display()))?;
        Ok(OutputDir {
            root: root.to_owned(),
            files: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Writes `name` with a one-line header followed by `rows`.
    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator,
        R::Item: AsRef<[u8]>,
    {
        let path = self.root.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
        self.files.push(path.clone());
        Ok(path)
    }

    pub fn into_files(self) -> Vec<PathBuf> {
        self.files
    }
}

/// Shortest round-trip decimal form, so reruns are byte-identical.
pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn nums(vs: impl IntoIterator<Item = f64>) -> Vec<String> {
    vs.into_iter().map(num).collect()
}

/// Files written by one experiment and its headline numbers.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    pub name: String,
    pub files: Vec<PathBuf>,
    pub metrics: Vec<(String, f64)>,
}

impl ExperimentReport {
    pub fn new(name: &str) -> Self {
        ExperimentReport {
            name: name.to_owned(),
            ..Default::default()
        }
    }

    pub fn push(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.push((key.into(), value));
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }
}

impl fmt::Display for ExperimentReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "[{}]", self.name)?;
        for (k, v) in &self.metrics {
            writeln!(f, "  {k} = {v}")?;
        }
        writeln!(f, "  files:")?;
        for p in &self.files {
            writeln!(f, "    {}", p.display())?;
        }
        Ok(())
    }
}
