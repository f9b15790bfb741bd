//! Eulerian spatio-temporal magnification of a DSF sequence.
//!
//! Per frame the grid is decomposed into a spatial pyramid; every pyramid
//! coefficient's time series is band-pass filtered (uniformly across
//! levels), scaled by the amplification factor, collapsed, and added back to
//! the original frame. In-band sinusoidal components therefore gain exactly
//! `1 + zeta * gamma` at bin frequencies while out-of-band content passes
//! through unchanged. Negative outputs are clamped to zero since the fields
//! are deformation magnitudes.

use serde::{Deserialize, Serialize};

use crate::bandpass::TemporalBandpass;
use crate::dsf::{DsfField, DsfSequence};
use crate::error::{Error, Result};
use crate::pyramid::{build_pyramid, collapse_pyramid, max_levels, Pyramid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnifyConfig {
    /// Pyramid level count.
    pub levels: usize,
    /// Amplification factor.
    pub zeta: f64,
    /// Attenuation rate in [0, 1].
    pub gamma: f64,
    /// Pass band (f_lo, f_hi) in Hz.
    pub band: (f64, f64),
    /// Sample rate in frames per second.
    pub sample_rate: f64,
    /// Optional per-level amplification override (length must equal
    /// `levels`); `None` applies `zeta` uniformly.
    pub zeta_per_level: Option<Vec<f64>>,
}

impl Default for MagnifyConfig {
    fn default() -> Self {
        MagnifyConfig {
            levels: 4,
            zeta: 10.0,
            gamma: 1.0,
            band: (0.3, 0.4),
            sample_rate: 25.0,
            zeta_per_level: None,
        }
    }
}

impl MagnifyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 1 {
            return Err(Error::config("levels must be at least 1"));
        }
        if self.zeta < 0.0 {
            return Err(Error::config("zeta must be nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config("gamma must lie in [0, 1]"));
        }
        if self.sample_rate <= 0.0 {
            return Err(Error::config("sample rate must be positive"));
        }
        let (lo, hi) = self.band;
        if !(lo > 0.0 && lo < hi && hi <= self.sample_rate / 2.0) {
            return Err(Error::config(format!(
                "band ({lo}, {hi}) must satisfy 0 < f_lo < f_hi <= rate/2 = {}",
                self.sample_rate / 2.0
            )));
        }
        if let Some(z) = &self.zeta_per_level {
            if z.len() != self.levels {
                return Err(Error::config(format!(
                    "zeta_per_level has {} entries for {} levels",
                    z.len(),
                    self.levels
                )));
            }
            if z.iter().any(|v| *v < 0.0) {
                return Err(Error::config("zeta_per_level entries must be nonnegative"));
            }
        }
        Ok(())
    }

    fn level_gain(&self, level: usize) -> f64 {
        let zeta = self
            .zeta_per_level
            .as_ref()
            .map_or(self.zeta, |z| z[level]);
        zeta * self.gamma
    }
}

#[derive(Debug, Clone)]
pub struct Magnified {
    pub sequence: DsfSequence,
    /// Number of entries clamped to zero after amplification.
    pub clamp_count: usize,
}

pub fn magnify_sequence(seq: &DsfSequence, cfg: &MagnifyConfig) -> Result<Magnified> {
    cfg.validate()?;
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    if (seq.sample_rate as f64 - cfg.sample_rate).abs() > f64::EPSILON {
        return Err(Error::config(format!(
            "config sample rate {} does not match sequence rate {}",
            cfg.sample_rate, seq.sample_rate
        )));
    }
    let (rows, cols) = seq.dims();
    let feasible = max_levels(rows, cols);
    if cfg.levels > feasible {
        return Err(Error::TooManyPyramidLevels {
            requested: cfg.levels,
            max: feasible,
        });
    }
    for (i, frame) in seq.frames.iter().enumerate() {
        if frame.grid.dims() != (rows, cols) {
            return Err(Error::dimension(format!(
                "frame {} has dims {:?}, expected {:?}",
                i,
                frame.grid.dims(),
                (rows, cols)
            )));
        }
    }

    let n = seq.len();
    // Step 1: spatial decomposition of every frame.
    let mut stacks: Vec<Pyramid> = Vec::with_capacity(n);
    for frame in &seq.frames {
        stacks.push(build_pyramid(&frame.grid, cfg.levels)?);
    }

    // Step 2 + 3: filter each coefficient's time series and amplify.
    // The filter is uniform across spatial levels.
    let filter = TemporalBandpass::new(n, cfg.sample_rate, cfg.band.0, cfg.band.1);
    let mut series = vec![0.0; n];
    for level in 0..cfg.levels {
        let gain = cfg.level_gain(level);
        let cells = stacks[0].levels[level].len();
        for cell in 0..cells {
            for (t, stack) in stacks.iter().enumerate() {
                series[t] = stack.levels[level].values()[cell];
            }
            let filtered = filter.apply(&series);
            for (t, stack) in stacks.iter_mut().enumerate() {
                stack.levels[level].values_mut()[cell] = gain * filtered[t];
            }
        }
    }

    // Step 4: collapse the amplified stacks and add back to the originals.
    let mut clamp_count = 0usize;
    let mut frames = Vec::with_capacity(n);
    for (frame, stack) in seq.frames.iter().zip(&stacks) {
        let delta = collapse_pyramid(stack)?;
        let mut grid = frame.grid.add(&delta);
        for v in grid.values_mut() {
            if *v < 0.0 {
                *v = 0.0;
                clamp_count += 1;
            }
        }
        frames.push(DsfField {
            grid,
            frame_index: frame.frame_index,
        });
    }

    Ok(Magnified {
        sequence: DsfSequence {
            frames,
            sample_rate: seq.sample_rate,
        },
        clamp_count,
    })
}
