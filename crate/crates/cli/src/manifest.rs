//! Ground-truth manifest (`SEMMANIFEST 1`).
//!
//! ```text
//! SEMMANIFEST 1
//! MAP map.semmap
//! QUERY path tile heading cam_x cam_y kept dropped spurious
//! ```
//!
//! Paths are relative to the manifest's directory.

use std::fmt::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub path: String,
    pub tile: usize,
    pub heading: f64,
    pub camera: (f64, f64),
    pub kept: usize,
    pub dropped: usize,
    pub spurious: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Manifest {
    pub map: Option<String>,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut out = String::from("SEMMANIFEST 1\n");
        if let Some(map) = &self.map {
            writeln!(out, "MAP {map}").unwrap();
        }
        for e in &self.entries {
            writeln!(
                out,
                "QUERY {} {} {} {} {} {} {} {}",
                e.path, e.tile, e.heading, e.camera.0, e.camera.1, e.kept, e.dropped, e.spurious
            )
            .unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
        match lines.next() {
            Some((_, l)) if l.trim() == "SEMMANIFEST 1" => {}
            _ => bail!("line 1: expected `SEMMANIFEST 1`"),
        }
        let mut manifest = Manifest::default();
        for (i, line) in lines {
            let line_no = i + 1;
            let toks: Vec<&str> = line.split_whitespace().collect();
            match toks.as_slice() {
                ["MAP", path] => manifest.map = Some(path.to_string()),
                ["QUERY", path, rest @ ..] if rest.len() == 7 => {
                    let f = |k: usize| -> Result<f64> {
                        rest[k].parse().map_err(|_| anyhow!("line {line_no}: bad number `{}`", rest[k]))
                    };
                    let u = |k: usize| -> Result<usize> {
                        rest[k].parse().map_err(|_| anyhow!("line {line_no}: bad count `{}`", rest[k]))
                    };
                    manifest.entries.push(ManifestEntry {
                        path: path.to_string(),
                        tile: u(0)?,
                        heading: f(1)?,
                        camera: (f(2)?, f(3)?),
                        kept: u(4)?,
                        dropped: u(5)?,
                        spurious: u(6)?,
                    });
                }
                _ => bail!("line {line_no}: unrecognised manifest record"),
            }
        }
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf)> {
        let text = crate::output::read(path)?;
        let manifest = Self::parse(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((manifest, base))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let m = Manifest {
            map: Some("map.semmap".into()),
            entries: vec![ManifestEntry {
                path: "queries/q000.semq".into(),
                tile: 17,
                heading: 0.785,
                camera: (120.5, 33.0),
                kept: 12,
                dropped: 1,
                spurious: 0,
            }],
        };
        assert_eq!(Manifest::parse(&m.to_text()).unwrap(), m);
    }

    #[test]
    fn short_record_rejected() {
        let err = Manifest::parse("SEMMANIFEST 1\nQUERY q.semq 3 0 0\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }
}
