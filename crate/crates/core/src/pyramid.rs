//! Spatial pyramid decomposition of DSF grids with exact reconstruction.
//!
//! Levels 0..l-2 hold the residual between a Gaussian level and the
//! upsampled next-coarser level; the last level is the coarsest Gaussian.
//! `collapse` therefore inverts `build` to round-off. Blur is the separable
//! 5-tap binomial [1,4,6,4,1]/16 with replicated edges, which keeps constant
//! grids constant; downsampling keeps every other sample with ceil-halved
//! dimensions.

use crate::error::{Error, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub struct Pyramid {
    /// `levels[0]` is the finest residual, the last entry the coarsest
    /// Gaussian level.
    pub levels: Vec<Grid>,
}

/// Largest level count for which the coarsest level keeps both dimensions
/// at least 2.
pub fn max_levels(rows: usize, cols: usize) -> usize {
    let mut l = 1;
    let (mut r, mut c) = (rows, cols);
    while r.div_ceil(2) >= 2 && c.div_ceil(2) >= 2 {
        r = r.div_ceil(2);
        c = c.div_ceil(2);
        l += 1;
    }
    l
}

pub fn build_pyramid(grid: &Grid, levels: usize) -> Result<Pyramid> {
    assert!(levels >= 1, "pyramid needs at least one level");
    let feasible = max_levels(grid.rows(), grid.cols());
    if levels > feasible {
        return Err(Error::TooManyPyramidLevels {
            requested: levels,
            max: feasible,
        });
    }
    let mut gaussians = vec![grid.clone()];
    for _ in 1..levels {
        let blurred = blur(gaussians.last().unwrap());
        gaussians.push(downsample(&blurred));
    }
    let mut out = Vec::with_capacity(levels);
    for k in 0..levels - 1 {
        let up = upsample(&gaussians[k + 1], gaussians[k].rows(), gaussians[k].cols());
        out.push(gaussians[k].sub(&up));
    }
    out.push(gaussians[levels - 1].clone());
    Ok(Pyramid { levels: out })
}

pub fn collapse_pyramid(pyramid: &Pyramid) -> Result<Grid> {
    let levels = &pyramid.levels;
    assert!(!levels.is_empty(), "cannot collapse an empty pyramid");
    for k in 0..levels.len() - 1 {
        let expect = (levels[k].rows().div_ceil(2), levels[k].cols().div_ceil(2));
        if levels[k + 1].dims() != expect {
            return Err(Error::dimension(format!(
                "pyramid level {} has dims {:?}, expected {:?}",
                k + 1,
                levels[k + 1].dims(),
                expect
            )));
        }
    }
    let mut acc = levels.last().unwrap().clone();
    for k in (0..levels.len() - 1).rev() {
        let up = upsample(&acc, levels[k].rows(), levels[k].cols());
        acc = levels[k].add(&up);
    }
    Ok(acc)
}

/// Separable binomial blur with replicated edges.
pub fn blur(grid: &Grid) -> Grid {
    const K: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];
    let (rows, cols) = grid.dims();
    let clamp = |i: isize, n: usize| -> usize { i.clamp(0, n as isize - 1) as usize };
    let mut tmp = Grid::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut v = 0.0;
            for (o, w) in K.iter().enumerate() {
                v += w * grid.get(r, clamp(c as isize + o as isize - 2, cols));
            }
            tmp.set(r, c, v);
        }
    }
    let mut out = Grid::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            let mut v = 0.0;
            for (o, w) in K.iter().enumerate() {
                v += w * tmp.get(clamp(r as isize + o as isize - 2, rows), c);
            }
            out.set(r, c, v);
        }
    }
    out
}

fn downsample(grid: &Grid) -> Grid {
    let rows = grid.rows().div_ceil(2);
    let cols = grid.cols().div_ceil(2);
    Grid::from_fn(rows, cols, |r, c| grid.get(r * 2, c * 2))
}

/// Doubles each sample then smooths, producing the requested dimensions.
fn upsample(grid: &Grid, rows: usize, cols: usize) -> Grid {
    let dup = Grid::from_fn(rows, cols, |r, c| {
        grid.get((r / 2).min(grid.rows() - 1), (c / 2).min(grid.cols() - 1))
    });
    blur(&dup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_grid(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Grid {
        Grid::from_fn(rows, cols, |_, _| rng.random_range(-5.0..5.0))
    }

    #[test]
    fn single_level_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let g = random_grid(&mut rng, 6, 9);
        let p = build_pyramid(&g, 1).unwrap();
        assert_eq!(p.levels.len(), 1);
        assert_eq!(p.levels[0], g);
        assert_eq!(collapse_pyramid(&p).unwrap(), g);
    }

    #[test]
    fn constant_grid_has_zero_details() {
        let g = Grid::from_fn(16, 12, |_, _| 3.25);
        let p = build_pyramid(&g, 3).unwrap();
        for level in &p.levels[..2] {
            for v in level.values() {
                assert!(v.abs() < 1e-9, "detail {v}");
            }
        }
        for v in p.levels[2].values() {
            assert!((v - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn level_dimensions_follow_ceil_halving() {
        // Independent application of the ceil-halving rule is the oracle.
        let g = Grid::zeros(200, 50);
        let p = build_pyramid(&g, 4).unwrap();
        let mut expect = (200usize, 50usize);
        for level in &p.levels {
            assert_eq!(level.dims(), expect);
            expect = (expect.0.div_ceil(2), expect.1.div_ceil(2));
        }
        assert_eq!(p.levels[3].dims(), (25, 7));
    }

    #[test]
    fn collapse_inverts_build() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let g = random_grid(&mut rng, 64, 32);
            for levels in 1..=4 {
                let p = build_pyramid(&g, levels).unwrap();
                let back = collapse_pyramid(&p).unwrap();
                let worst = g
                    .values()
                    .iter()
                    .zip(back.values())
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0f64, f64::max);
                assert!(worst < 1e-9, "levels {levels}: max abs err {worst}");
            }
        }
    }

    #[test]
    fn zero_pyramid_collapses_to_zero() {
        let p = Pyramid {
            levels: vec![Grid::zeros(8, 8), Grid::zeros(4, 4), Grid::zeros(2, 2)],
        };
        let g = collapse_pyramid(&p).unwrap();
        assert!(g.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn too_many_levels_reports_feasible_maximum() {
        let g = Grid::zeros(8, 8);
        match build_pyramid(&g, 5) {
            Err(Error::TooManyPyramidLevels { requested: 5, max }) => {
                assert_eq!(max, 3); // 8 -> 4 -> 2
            }
            other => panic!("expected level error, got {other:?}"),
        }
    }

    #[test]
    fn mismatched_levels_fail_collapse() {
        let p = Pyramid {
            levels: vec![Grid::zeros(8, 8), Grid::zeros(3, 3)],
        };
        assert!(collapse_pyramid(&p).is_err());
    }
}
