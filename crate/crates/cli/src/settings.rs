//! Run configuration assembled from a config file, `--set` overrides and
//! dedicated flags, in that order of precedence (later wins).

use std::collections::BTreeSet;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use semloc_core::{RunConfig, TileIndex};

pub struct Settings {
    pub config: RunConfig,
    /// Keys given explicitly by any source.
    pub explicit: BTreeSet<String>,
}

impl Settings {
    pub fn load(file: Option<&Path>, sets: &[String], flags: &[(&str, String)]) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(path) = file {
            let text = crate::output::read(path)?;
            RunConfig::parse(&text).with_context(|| format!("in {}", path.display()))?;
            for line in text.lines() {
                let line = line.split('#').next().unwrap_or("").trim();
                if let Some((k, v)) = line.split_once('=') {
                    pairs.push((k.trim().to_string(), v.trim().to_string()));
                }
            }
        }
        for s in sets {
            let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{s}`"))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        pairs.extend(flags.iter().map(|(k, v)| (k.to_string(), v.clone())));

        let mut config = RunConfig::default();
        let mut explicit = BTreeSet::new();
        for (k, v) in pairs {
            config.set(&k, &v).with_context(|| format!("setting `{k}`"))?;
            explicit.insert(k);
        }
        Ok(Self { config, explicit })
    }

    /// Refuses to match when the configuration names a descriptor layout or
    /// tiling that differs from the one the index was built with.
    pub fn check_compatible(&self, index: &TileIndex) -> Result<()> {
        let layout_keys = ["sectors", "ring_radii", "sigmas"];
        if layout_keys.iter().any(|k| self.explicit.contains(*k)) {
            let layout = self.config.layout()?;
            if layout != index.layout {
                bail!(
                    "configured layout ({} sectors, radii {:?}, sigmas {:?}) does not match the index ({} sectors, radii {:?}, sigmas {:?})",
                    layout.n_sectors,
                    layout.ring_radii,
                    layout.sigmas,
                    index.layout.n_sectors,
                    index.layout.ring_radii,
                    index.layout.sigmas
                );
            }
        }
        for (key, want, have) in [
            ("tile_side", self.config.tile_side, index.grid.side),
            ("tile_stride", self.config.tile_stride, index.grid.stride),
        ] {
            if self.explicit.contains(key) && (want - have).abs() > 1e-9 {
                bail!("configured {key} {want} does not match the index ({have})");
            }
        }
        Ok(())
    }
}

/// Collects `(key, value)` pairs for the flags that were given.
#[derive(Default)]
pub struct Flags(pub Vec<(&'static str, String)>);

impl Flags {
    pub fn opt<T: ToString>(&mut self, key: &'static str, value: &Option<T>) -> &mut Self {
        if let Some(v) = value {
            self.0.push((key, v.to_string()));
        }
        self
    }

    pub fn on(&mut self, key: &'static str, set: bool) -> &mut Self {
        if set {
            self.0.push((key, "true".into()));
        }
        self
    }
}
