//! Tab-separated corpus manifests.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::{DadlError, Result};

pub const MANIFEST_HEADER: &str = "path\tsubject\tpose\tillum";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    /// 1-based line number in the source file.
    pub line: usize,
    pub path: String,
    pub subject: String,
    pub pose: String,
    pub illum: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub rows: Vec<ManifestRow>,
}

fn first_seen<'a>(it: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for s in it {
        if !out.iter().any(|o| o == s) {
            out.push(s.to_string());
        }
    }
    out
}

impl Manifest {
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let header = lines.next().map(|(_, l)| l.trim_end_matches('\r')).unwrap_or("");
        if header != MANIFEST_HEADER {
            return Err(DadlError::Manifest {
                line: 1,
                reason: format!("expected header {MANIFEST_HEADER:?}"),
            });
        }
        let mut rows = Vec::new();
        let mut seen: HashMap<(String, String, String), usize> = HashMap::new();
        for (i, raw) in lines {
            let line = i + 1;
            let text = raw.trim_end_matches('\r');
            if text.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = text.split('\t').collect();
            if fields.len() != 4 || fields.iter().any(|f| f.is_empty()) {
                return Err(DadlError::Manifest {
                    line,
                    reason: "expected 4 non-empty tab-separated fields".into(),
                });
            }
            let key = (fields[1].to_string(), fields[2].to_string(), fields[3].to_string());
            if seen.insert(key.clone(), line).is_some() {
                return Err(DadlError::DuplicateCell {
                    row: line,
                    subject: key.0,
                    pose: key.1,
                    illum: key.2,
                });
            }
            rows.push(ManifestRow {
                line,
                path: fields[0].to_string(),
                subject: key.0,
                pose: key.1,
                illum: key.2,
            });
        }
        Ok(Self { rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| DadlError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn render(&self) -> String {
        let mut out = String::from(MANIFEST_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{}\t{}\t{}\t{}\n", r.path, r.subject, r.pose, r.illum));
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render()).map_err(|e| DadlError::io(path, e))
    }

    pub fn push(&mut self, path: &str, subject: &str, pose: &str, illum: &str) {
        self.rows.push(ManifestRow {
            line: self.rows.len() + 2,
            path: path.into(),
            subject: subject.into(),
            pose: pose.into(),
            illum: illum.into(),
        });
    }

    /// Subject labels in order of first appearance.
    pub fn subjects(&self) -> Vec<String> {
        first_seen(self.rows.iter().map(|r| r.subject.as_str()))
    }

    pub fn poses(&self) -> Vec<String> {
        first_seen(self.rows.iter().map(|r| r.pose.as_str()))
    }

    pub fn illums(&self) -> Vec<String> {
        first_seen(self.rows.iter().map(|r| r.illum.as_str()))
    }
}
