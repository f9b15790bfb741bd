//! Pipeline configuration: defaults, flat `key = value` config files, and
//! key-based overrides shared by the CLI flags.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::align::IcpParams;
use crate::error::{Error, Result};
use crate::features::PoolGrid;
use crate::magnify::MagnifyConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierKind {
    Svm,
    Hmm,
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierKind::Svm => "svm",
            ClassifierKind::Hmm => "hmm",
        })
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "svm" => Ok(ClassifierKind::Svm),
            "hmm" => Ok(ClassifierKind::Hmm),
            other => Err(Error::config(format!(
                "classifier must be `svm` or `hmm`, got `{other}`"
            ))),
        }
    }
}

/// End-to-end settings. The defaults are the reference configuration:
/// 200 curves of 50 samples, amplification 10 with attenuation 1 over 4
/// pyramid levels in the 0.3-0.4 Hz band at 25 fps, and 10-fold
/// cross-validation.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub curves: usize,
    pub samples: usize,
    pub crop_radius: f64,
    pub magnify: MagnifyConfig,
    pub classifier: ClassifierKind,
    /// HMM state count.
    pub states: usize,
    pub pool: PoolGrid,
    pub folds: usize,
    pub seed: u64,
    pub icp: IcpParams,
    /// Optional explicit nose-tip coordinates, bypassing detection.
    pub nose: Option<[f64; 3]>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            curves: 200,
            samples: 50,
            crop_radius: 126.8,
            magnify: MagnifyConfig::default(),
            classifier: ClassifierKind::Hmm,
            states: 3,
            pool: PoolGrid::default(),
            folds: 10,
            seed: 42,
            icp: IcpParams::default(),
            nose: None,
        }
    }
}

impl PipelineConfig {
    /// Applies one `key = value` override.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::config(format!("invalid {what} value `{value}`"));
        match key {
            "curves" => self.curves = value.parse().map_err(|_| bad("curves"))?,
            "samples" => self.samples = value.parse().map_err(|_| bad("samples"))?,
            "crop_radius" => self.crop_radius = value.parse().map_err(|_| bad("crop_radius"))?,
            "zeta" => self.magnify.zeta = value.parse().map_err(|_| bad("zeta"))?,
            "gamma" => self.magnify.gamma = value.parse().map_err(|_| bad("gamma"))?,
            "levels" => self.magnify.levels = value.parse().map_err(|_| bad("levels"))?,
            "band_lo" => self.magnify.band.0 = value.parse().map_err(|_| bad("band_lo"))?,
            "band_hi" => self.magnify.band.1 = value.parse().map_err(|_| bad("band_hi"))?,
            "rate" => {
                self.magnify.sample_rate = value.parse().map_err(|_| bad("rate"))?;
            }
            "classifier" => self.classifier = value.parse()?,
            "states" => self.states = value.parse().map_err(|_| bad("states"))?,
            "pool" => self.pool = parse_pool(value)?,
            "folds" => self.folds = value.parse().map_err(|_| bad("folds"))?,
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            other => {
                return Err(Error::config(format!("unknown config key `{other}`")));
            }
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = PipelineConfig::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::config(format!("config line {} is not `key = value`", i + 1))
            })?;
            self.apply(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_text(&fs::read_to_string(path)?)
    }
}

/// Parses `AxR` pooling layouts such as `20x5`.
pub fn parse_pool(value: &str) -> Result<PoolGrid> {
    let (a, r) = value
        .split_once(['x', 'X'])
        .ok_or_else(|| Error::config(format!("pool must look like `20x5`, got `{value}`")))?;
    Ok(PoolGrid {
        angle_blocks: a
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("invalid pool `{value}`")))?,
        radius_blocks: r
            .trim()
            .parse()
            .map_err(|_| Error::config(format!("invalid pool `{value}`")))?,
    })
}
