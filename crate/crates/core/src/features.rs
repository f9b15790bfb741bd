//! Feature construction from DSF sequences: the time-mean deformation
//! vector for the SVM, and block-pooled per-frame vectors for the HMM.

use serde::{Deserialize, Serialize};

use crate::dsf::DsfSequence;
use crate::error::{Error, Result};
use crate::grid::Grid;

/// Time-averaged deformation, flattened angle-major (`index = alpha * T + r`).
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFeature {
    pub values: Vec<f64>,
}

pub fn mean_deformation(seq: &DsfSequence) -> Result<MeanFeature> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    let (rows, cols) = seq.dims();
    let mut values = vec![0.0; rows * cols];
    for frame in &seq.frames {
        for (acc, v) in values.iter_mut().zip(frame.grid.values()) {
            *acc += v;
        }
    }
    let n = seq.len() as f64;
    for v in &mut values {
        *v /= n;
    }
    Ok(MeanFeature { values })
}

/// Spatial pooling layout: the DSF grid is partitioned into
/// `angle_blocks x radius_blocks` balanced blocks and each block averaged.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoolGrid {
    pub angle_blocks: usize,
    pub radius_blocks: usize,
}

impl Default for PoolGrid {
    fn default() -> Self {
        PoolGrid {
            angle_blocks: 20,
            radius_blocks: 5,
        }
    }
}

impl PoolGrid {
    pub fn dim(&self) -> usize {
        self.angle_blocks * self.radius_blocks
    }
}

/// Balanced partition of `n` items into `blocks` ranges (sizes differ by at
/// most one, none empty for `blocks <= n`).
fn block_bounds(n: usize, blocks: usize, b: usize) -> (usize, usize) {
    (b * n / blocks, (b + 1) * n / blocks)
}

pub fn pool_grid(grid: &Grid, pool: &PoolGrid) -> Result<Vec<f64>> {
    let (rows, cols) = grid.dims();
    if pool.angle_blocks > rows || pool.radius_blocks > cols {
        return Err(Error::PoolTooLarge {
            pool_angles: pool.angle_blocks,
            pool_radii: pool.radius_blocks,
            angles: rows,
            radii: cols,
        });
    }
    let mut out = Vec::with_capacity(pool.dim());
    for ab in 0..pool.angle_blocks {
        let (r0, r1) = block_bounds(rows, pool.angle_blocks, ab);
        for rb in 0..pool.radius_blocks {
            let (c0, c1) = block_bounds(cols, pool.radius_blocks, rb);
            let mut sum = 0.0;
            for r in r0..r1 {
                for c in c0..c1 {
                    sum += grid.get(r, c);
                }
            }
            out.push(sum / ((r1 - r0) * (c1 - c0)) as f64);
        }
    }
    Ok(out)
}

/// Per-frame pooled feature vectors for HMM observations.
pub fn frame_features(seq: &DsfSequence, pool: &PoolGrid) -> Result<Vec<Vec<f64>>> {
    if seq.is_empty() {
        return Err(Error::EmptySequence);
    }
    seq.frames.iter().map(|f| pool_grid(&f.grid, pool)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsf::DsfField;

    fn seq_of(grids: Vec<Grid>) -> DsfSequence {
        DsfSequence {
            frames: grids
                .into_iter()
                .enumerate()
                .map(|(frame_index, grid)| DsfField { grid, frame_index })
                .collect(),
            sample_rate: 25,
        }
    }

    #[test]
    fn single_frame_mean_is_the_frame_flattened() {
        let g = Grid::from_fn(2, 3, |r, c| (r * 3 + c) as f64);
        let seq = seq_of(vec![g.clone()]);
        let mean = mean_deformation(&seq).unwrap();
        assert_eq!(mean.values, g.values());
    }

    #[test]
    fn mean_averages_entrywise() {
        let a = Grid::from_vec(1, 2, vec![0.0, 4.0]);
        let b = Grid::from_vec(1, 2, vec![2.0, 0.0]);
        let mean = mean_deformation(&seq_of(vec![a, b])).unwrap();
        assert_eq!(mean.values, vec![1.0, 2.0]);
    }

    #[test]
    fn zero_sequence_gives_zero_vector() {
        let seq = seq_of(vec![Grid::zeros(3, 4), Grid::zeros(3, 4)]);
        assert!(mean_deformation(&seq).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mean_commutes_with_scaling() {
        let a = Grid::from_fn(3, 3, |r, c| (r + c) as f64);
        let b = Grid::from_fn(3, 3, |r, c| (r * c) as f64);
        let seq = seq_of(vec![a.clone(), b.clone()]);
        let scaled = seq_of(vec![a.scale(3.0), b.scale(3.0)]);
        let m1 = mean_deformation(&seq).unwrap();
        let m2 = mean_deformation(&scaled).unwrap();
        for (x, y) in m1.values.iter().zip(&m2.values) {
            assert_eq!(x * 3.0, *y);
        }
    }

    #[test]
    fn full_grid_pool_is_scalar_mean() {
        let g = Grid::from_fn(4, 6, |r, c| (r * 6 + c) as f64);
        let pooled = pool_grid(
            &g,
            &PoolGrid {
                angle_blocks: 1,
                radius_blocks: 1,
            },
        )
        .unwrap();
        assert_eq!(pooled, vec![g.mean()]);
    }

    #[test]
    fn identity_pool_flattens() {
        let g = Grid::from_fn(3, 4, |r, c| (r * 4 + c) as f64);
        let pooled = pool_grid(
            &g,
            &PoolGrid {
                angle_blocks: 3,
                radius_blocks: 4,
            },
        )
        .unwrap();
        assert_eq!(pooled, g.values());
    }

    #[test]
    fn constant_block_pools_to_its_value() {
        let g = Grid::from_fn(4, 4, |r, _| if r < 2 { 7.0 } else { 1.0 });
        let pooled = pool_grid(
            &g,
            &PoolGrid {
                angle_blocks: 2,
                radius_blocks: 1,
            },
        )
        .unwrap();
        assert_eq!(pooled, vec![7.0, 1.0]);
    }

    #[test]
    fn oversized_pool_is_an_error() {
        let g = Grid::zeros(2, 2);
        assert!(matches!(
            pool_grid(
                &g,
                &PoolGrid {
                    angle_blocks: 3,
                    radius_blocks: 1
                }
            ),
            Err(Error::PoolTooLarge { .. })
        ));
    }

    #[test]
    fn default_pool_is_100_dims_on_paper_grid() {
        let g = Grid::zeros(200, 50);
        let pooled = pool_grid(&g, &PoolGrid::default()).unwrap();
        assert_eq!(pooled.len(), 100);
    }
}
