//! Square-root velocity representation of radial curves and great-circle
//! geometry on the unit hypersphere of SRVFs.
//!
//! A curve `beta: [0,1] -> R^3` maps to `q(t) = beta_dot(t) / sqrt(|beta_dot(t)|)`,
//! sampled on the uniform grid and projected to unit L2 norm. Distances and
//! shooting vectors between unit SRVFs use the closed-form great-circle
//! solution; no energy minimization is involved.

use nalgebra::Vector3;

use crate::curves::RadialCurve;
use crate::error::{Error, Result};

/// Speeds below this are treated as zero when forming q.
pub const EPS_SPEED: f64 = 1e-12;
/// Geodesic lengths below this collapse to the zero-field limit.
pub const EPS_THETA: f64 = 1e-8;
/// Inner products within this of +-1 snap to the exact endpoint, so that
/// self-comparison is exactly 0 and antipodal pairs exactly pi. Without the
/// snap, a one-ulp rounding of the inner product is amplified by arccos to
/// a spurious distance of order 1e-8.
pub const INNER_SNAP: f64 = 1e-12;

/// Discrete SRVF: `values[i] = q(i / (T-1))`. Unit L2 norm under uniform
/// quadrature weights `1/T`, except for the flagged all-zero representation
/// of a fully degenerate curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Srvf {
    pub values: Vec<Vector3<f64>>,
}

impl Srvf {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Discrete L2 norm with uniform weights 1/T.
    pub fn l2_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// Discrete L2 inner product with uniform weights 1/T.
    pub fn inner(&self, other: &Srvf) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        let sum: f64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.dot(b))
            .sum();
        sum / self.len() as f64
    }

    /// The all-zero SRVF marks a degenerate (constant) curve.
    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| v.norm_squared() == 0.0)
    }
}

/// Initial velocity of the geodesic from one unit SRVF toward another;
/// `theta` is the geodesic length. The discrete L2 norm of `values` equals
/// `theta` (analytic identity on the hypersphere).
#[derive(Debug, Clone, PartialEq)]
pub struct ShootingField {
    pub values: Vec<Vector3<f64>>,
    pub theta: f64,
}

/// Computes the SRVF of a curve: finite-difference derivative (central in
/// the interior, one-sided at the ends), pointwise square-root scaling, then
/// projection to unit L2 norm. A curve with an all-zero derivative yields the
/// flagged zero SRVF.
pub fn srvf_of_curve(curve: &RadialCurve) -> Srvf {
    let t = curve.points.len();
    assert!(t >= 2, "SRVF needs at least two samples");
    if curve.degenerate {
        return Srvf {
            values: vec![Vector3::zeros(); t],
        };
    }
    let dt = 1.0 / (t - 1) as f64;
    let p = &curve.points;
    let mut values = Vec::with_capacity(t);
    for i in 0..t {
        let velocity = if i == 0 {
            (p[1] - p[0]) / dt
        } else if i == t - 1 {
            (p[t - 1] - p[t - 2]) / dt
        } else {
            (p[i + 1] - p[i - 1]) / (2.0 * dt)
        };
        let speed = velocity.norm();
        if speed < EPS_SPEED {
            values.push(Vector3::zeros());
        } else {
            values.push(velocity / speed.sqrt());
        }
    }
    let mut q = Srvf { values };
    let norm = q.l2_norm();
    if norm < EPS_SPEED {
        // Fully degenerate: every sample had (near-)zero speed.
        for v in &mut q.values {
            *v = Vector3::zeros();
        }
        return q;
    }
    for v in &mut q.values {
        *v /= norm;
    }
    q
}

/// Great-circle distance between two unit SRVFs; the inner product is
/// clamped to [-1, 1] so round-off never produces NaN.
pub fn geodesic_distance(q1: &Srvf, q2: &Srvf) -> f64 {
    clamped_acos(q1.inner(q2))
}

/// Arccos with endpoint snapping (see [`INNER_SNAP`]) and clamping.
pub fn clamped_acos(inner: f64) -> f64 {
    if inner >= 1.0 - INNER_SNAP {
        0.0
    } else if inner <= -1.0 + INNER_SNAP {
        std::f64::consts::PI
    } else {
        inner.acos()
    }
}

/// Shooting vector of the geodesic from `q1` to `q2` per the great-circle
/// closed form. Below `EPS_THETA` the analytic zero-field limit is returned;
/// an antipodal pair (theta within `EPS_THETA` of pi) is an error because
/// the geodesic is not unique there.
pub fn shooting_vector(q1: &Srvf, q2: &Srvf) -> Result<ShootingField> {
    if q1.len() != q2.len() {
        return Err(Error::dimension(format!(
            "SRVF lengths differ: {} vs {}",
            q1.len(),
            q2.len()
        )));
    }
    let theta = geodesic_distance(q1, q2);
    if theta < EPS_THETA {
        return Ok(ShootingField {
            values: vec![Vector3::zeros(); q1.len()],
            theta: 0.0,
        });
    }
    if theta > std::f64::consts::PI - EPS_THETA {
        return Err(Error::AntipodalPair);
    }
    let coeff = theta / theta.sin();
    let cos_theta = theta.cos();
    let values = q1
        .values
        .iter()
        .zip(&q2.values)
        .map(|(a, b)| (b - a * cos_theta) * coeff)
        .collect();
    Ok(ShootingField { values, theta })
}

impl ShootingField {
    /// Discrete L2 norm with uniform weights 1/T.
    pub fn l2_norm(&self) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.norm_squared()).sum();
        (sum / self.values.len() as f64).sqrt()
    }
}
