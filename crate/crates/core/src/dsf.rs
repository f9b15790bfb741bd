//! Dense Scalar Fields: per-frame deformation magnitude on the
//! (angle, radius) grid, and the per-sequence time series.
//!
//! Entry (alpha, r) is the Euclidean norm of the r-th sample of the shooting
//! field between the SRVFs of the corresponding radial curves of the
//! reference and current frames.

use crate::curves::CurveFan;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::srvf::{shooting_vector, srvf_of_curve};

#[derive(Debug, Clone, PartialEq)]
pub struct DsfField {
    pub grid: Grid,
    pub frame_index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DsfSequence {
    pub frames: Vec<DsfField>,
    /// Sample rate in frames per second.
    pub sample_rate: u32,
}

impl DsfSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.frames.first().map_or((0, 0), |f| f.grid.dims())
    }
}

/// Deformation field between two fans sharing the same grid. Degenerate
/// curves on either side yield a zero row.
pub fn dsf_between(fan_ref: &CurveFan, fan_t: &CurveFan) -> Result<DsfField> {
    if fan_ref.dims() != fan_t.dims() {
        return Err(Error::dimension(format!(
            "curve fans differ: {:?} vs {:?}",
            fan_ref.dims(),
            fan_t.dims()
        )));
    }
    let (num_curves, samples) = fan_ref.dims();
    let mut grid = Grid::zeros(num_curves, samples);
    for (k, (c_ref, c_t)) in fan_ref.curves.iter().zip(&fan_t.curves).enumerate() {
        let q_ref = srvf_of_curve(c_ref);
        let q_t = srvf_of_curve(c_t);
        if q_ref.is_zero() || q_t.is_zero() {
            continue; // flagged degenerate curve: zero row
        }
        let field = shooting_vector(&q_ref, &q_t)?;
        let row = grid.row_mut(k);
        for (r, v) in field.values.iter().enumerate() {
            row[r] = v.norm();
        }
    }
    Ok(DsfField {
        grid,
        frame_index: 0,
    })
}

/// DSF time series of a fan sequence against its first frame. Frame 0 is the
/// self-comparison and is identically zero.
pub fn dsf_sequence(frames: &[CurveFan], sample_rate: u32) -> Result<DsfSequence> {
    if frames.is_empty() {
        return Err(Error::EmptySequence);
    }
    let reference = &frames[0];
    for (i, fan) in frames.iter().enumerate() {
        if fan.dims() != reference.dims() {
            return Err(Error::dimension(format!(
                "fan {} has dims {:?}, expected {:?}",
                i,
                fan.dims(),
                reference.dims()
            ))
            .at_frame(i));
        }
    }
    let fields = frames
        .iter()
        .enumerate()
        .map(|(i, fan)| {
            dsf_between(reference, fan)
                .map(|mut f| {
                    f.frame_index = i;
                    f
                })
                .map_err(|e| e.at_frame(i))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DsfSequence {
        frames: fields,
        sample_rate,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::curves::RadialCurve;
    use nalgebra::{Point3, Vector3};

    /// Fan of straight rays; `elevation` tilts every ray out of the xy-plane,
    /// so fans with different elevations differ in shape (not just scale).
    pub fn ray_fan(
        origin: Point3<f64>,
        elevation: f64,
        num_curves: usize,
        samples: usize,
    ) -> CurveFan {
        let curves = (0..num_curves)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / num_curves as f64;
                let dir = Vector3::new(angle.cos(), angle.sin(), elevation);
                RadialCurve {
                    angle,
                    points: (0..samples)
                        .map(|i| origin + dir * (i as f64 / (samples - 1) as f64))
                        .collect(),
                    degenerate: false,
                }
            })
            .collect();
        CurveFan { origin, curves }
    }

    #[test]
    fn identical_fans_give_zero_grid() {
        let fan = ray_fan(Point3::origin(), 0.2, 4, 10);
        let field = dsf_between(&fan, &fan).unwrap();
        assert!(field.grid.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_has_feature_vector_dimensions() {
        let fan = ray_fan(Point3::origin(), 0.2, 200, 50);
        let field = dsf_between(&fan, &fan).unwrap();
        assert_eq!(field.grid.dims(), (200, 50));
        assert_eq!(field.grid.len(), 10_000);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = ray_fan(Point3::origin(), 0.2, 2, 10);
        let b = ray_fan(Point3::origin(), 0.2, 3, 10);
        assert!(dsf_between(&a, &b).is_err());
    }

    #[test]
    fn degenerate_curve_yields_zero_row() {
        let fan_ref = ray_fan(Point3::origin(), 0.2, 2, 10);
        let mut fan_t = ray_fan(Point3::origin(), 0.35, 2, 10);
        fan_t.curves[0] = RadialCurve::constant(0.0, Point3::origin(), 10);
        let field = dsf_between(&fan_ref, &fan_t).unwrap();
        assert!(field.grid.row(0).iter().all(|&v| v == 0.0));
        assert!(field.grid.row(1).iter().any(|&v| v > 0.0));
    }

    #[test]
    fn sequence_frame_zero_is_zero_and_constant_sequence_is_zero() {
        let fan = ray_fan(Point3::origin(), 0.2, 3, 8);
        let seq = dsf_sequence(&vec![fan.clone(), fan.clone(), fan.clone()], 25).unwrap();
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.sample_rate, 25);
        for frame in &seq.frames {
            assert!(frame.grid.values().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn single_frame_sequence_is_one_zero_field() {
        let fan = ray_fan(Point3::origin(), 0.2, 2, 8);
        let seq = dsf_sequence(&[fan], 25).unwrap();
        assert_eq!(seq.len(), 1);
        assert!(seq.frames[0].grid.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn translation_invariance() {
        let shift = Vector3::new(5.0, -3.0, 2.0);
        let a = dsf_between(
            &ray_fan(Point3::origin(), 0.2, 4, 12),
            &ray_fan(Point3::origin(), 0.3, 4, 12),
        )
        .unwrap();
        let b = dsf_between(
            &ray_fan(Point3::origin() + shift, 0.2, 4, 12),
            &ray_fan(Point3::origin() + shift, 0.3, 4, 12),
        )
        .unwrap();
        for (x, y) in a.grid.values().iter().zip(b.grid.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn scale_invariance() {
        let scale = |fan: &CurveFan, s: f64| CurveFan {
            origin: Point3::from(fan.origin.coords * s),
            curves: fan
                .curves
                .iter()
                .map(|c| RadialCurve {
                    angle: c.angle,
                    points: c.points.iter().map(|p| Point3::from(p.coords * s)).collect(),
                    degenerate: c.degenerate,
                })
                .collect(),
        };
        let f1 = ray_fan(Point3::origin(), 0.2, 3, 12);
        let f2 = ray_fan(Point3::origin(), 0.28, 3, 12);
        let base = dsf_between(&f1, &f2).unwrap();
        assert!(base.grid.max() > 0.0);
        for s in [0.1, 10.0] {
            let scaled = dsf_between(&scale(&f1, s), &scale(&f2, s)).unwrap();
            for (a, b) in base.grid.values().iter().zip(scaled.grid.values()) {
                assert!((a - b).abs() < 1e-7, "scale {s}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn dsf_is_symmetric_on_constant_speed_fans() {
        // Straight rays have exactly constant speed, for which the entrywise
        // symmetry of the shooting-field norms is exact.
        let f1 = ray_fan(Point3::origin(), 0.2, 3, 12);
        let f2 = ray_fan(Point3::origin(), 0.33, 3, 12);
        let ab = dsf_between(&f1, &f2).unwrap();
        let ba = dsf_between(&f2, &f1).unwrap();
        assert!(ab.grid.max() > 0.0);
        for (a, b) in ab.grid.values().iter().zip(ba.grid.values()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
