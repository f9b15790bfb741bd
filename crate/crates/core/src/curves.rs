//! Radial-curve parameterization of a facial surface.
//!
//! A surface is approximated by a fan of curves emanating from the nose tip:
//! curve `k` is the intersection of the mesh with the half-plane through the
//! origin that contains the face-normal axis, rotated to angle
//! `alpha_k = 2*pi*k / num_curves` from the reference direction. Each cut is
//! chained from triangle/plane segment intersections and resampled to a fixed
//! number of points, uniform in arc length.

use nalgebra::{Matrix3, Point3, Vector3};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// One resampled radial curve. `points[0]` is the fan origin; a curve whose
/// cut produced no surface intersection is the constant curve at the origin
/// with `degenerate` set.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialCurve {
    pub angle: f64,
    pub points: Vec<Point3<f64>>,
    pub degenerate: bool,
}

impl RadialCurve {
    pub fn constant(angle: f64, origin: Point3<f64>, samples: usize) -> Self {
        RadialCurve {
            angle,
            points: vec![origin; samples],
            degenerate: true,
        }
    }

    pub fn samples(&self) -> usize {
        self.points.len()
    }

    pub fn arc_length(&self) -> f64 {
        polyline_length(&self.points)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveFan {
    pub origin: Point3<f64>,
    pub curves: Vec<RadialCurve>,
}

impl CurveFan {
    pub fn num_curves(&self) -> usize {
        self.curves.len()
    }

    pub fn samples_per_curve(&self) -> usize {
        self.curves.first().map_or(0, RadialCurve::samples)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.num_curves(), self.samples_per_curve())
    }
}

/// Orthonormal cutting frame: `axis` is the out-of-face direction contained
/// in every cutting half-plane, `reference` the in-plane direction of the
/// angle-zero curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtractionFrame {
    axis: Vector3<f64>,
    reference: Vector3<f64>,
}

impl ExtractionFrame {
    /// The canonical frame of an aligned face: axis +z, reference +x.
    pub fn canonical() -> Self {
        ExtractionFrame {
            axis: Vector3::z(),
            reference: Vector3::x(),
        }
    }

    /// Builds a frame from an axis and a rough reference direction; the
    /// reference is re-orthogonalized against the axis.
    pub fn new(axis: Vector3<f64>, reference: Vector3<f64>) -> Result<Self> {
        let axis = axis
            .try_normalize(1e-12)
            .ok_or_else(|| Error::config("extraction axis must be a nonzero vector"))?;
        let proj = reference - axis * reference.dot(&axis);
        let reference = proj
            .try_normalize(1e-12)
            .ok_or_else(|| Error::config("reference direction is parallel to the axis"))?;
        Ok(ExtractionFrame { axis, reference })
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis
    }

    pub fn reference(&self) -> Vector3<f64> {
        self.reference
    }

    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Self {
        ExtractionFrame {
            axis: rotation * self.axis,
            reference: rotation * self.reference,
        }
    }
}

pub fn polyline_length(points: &[Point3<f64>]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Resamples a polyline to `samples` points uniform in arc length along the
/// source polyline, keeping both endpoints.
pub fn resample_uniform(points: &[Point3<f64>], samples: usize) -> Vec<Point3<f64>> {
    assert!(samples >= 2, "resampling needs at least two samples");
    assert!(!points.is_empty(), "cannot resample an empty polyline");
    let mut cumulative = Vec::with_capacity(points.len());
    cumulative.push(0.0);
    for w in points.windows(2) {
        let last = *cumulative.last().unwrap();
        cumulative.push(last + (w[1] - w[0]).norm());
    }
    let total = *cumulative.last().unwrap();
    if total <= 0.0 {
        return vec![points[0]; samples];
    }
    let mut out = Vec::with_capacity(samples);
    let mut seg = 0usize;
    for i in 0..samples {
        let target = total * i as f64 / (samples - 1) as f64;
        while seg + 1 < cumulative.len() - 1 && cumulative[seg + 1] < target {
            seg += 1;
        }
        let seg_len = cumulative[seg + 1] - cumulative[seg];
        let t = if seg_len > 0.0 {
            ((target - cumulative[seg]) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[seg] + (points[seg + 1] - points[seg]) * t);
    }
    // Endpoints are exact regardless of rounding in the walk.
    out[0] = points[0];
    out[samples - 1] = *points.last().unwrap();
    out
}

/// Extracts the indexed fan of radial curves from a mesh.
///
/// Angles with no surface intersection yield the flagged constant curve at
/// the origin rather than failing the whole fan.
pub fn extract_radial_curves(
    mesh: &TriMesh,
    origin: &Point3<f64>,
    frame: &ExtractionFrame,
    num_curves: usize,
    samples: usize,
) -> Result<CurveFan> {
    assert!(num_curves >= 1, "need at least one curve");
    assert!(samples >= 2, "need at least two samples per curve");
    if mesh.vertices.len() < 3 {
        return Err(Error::dimension(format!(
            "curve extraction needs a mesh with at least 3 vertices, got {}",
            mesh.vertices.len()
        )));
    }

    let slicer = Slicer::new(mesh, origin, frame, num_curves);
    let curves = (0..num_curves)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / num_curves as f64;
            slicer.cut(k, angle, samples)
        })
        .collect();
    Ok(CurveFan {
        origin: *origin,
        curves,
    })
}

/// Per-frame slicing state: projected vertex coordinates and an angular
/// bucket index so each cut only inspects nearby faces.
struct Slicer<'m> {
    mesh: &'m TriMesh,
    origin: Point3<f64>,
    e1: Vector3<f64>,
    e2: Vector3<f64>,
    /// In-plane coordinates of each vertex relative to the origin.
    c1: Vec<f64>,
    c2: Vec<f64>,
    /// Faces bucketed by the cut angles they can intersect.
    buckets: Vec<Vec<usize>>,
    /// Faces that may intersect any cut (apex-adjacent or wide).
    always: Vec<usize>,
    scale: f64,
}

impl<'m> Slicer<'m> {
    fn new(
        mesh: &'m TriMesh,
        origin: &Point3<f64>,
        frame: &ExtractionFrame,
        num_buckets: usize,
    ) -> Self {
        let e1 = frame.reference();
        let e2 = frame.axis().cross(&e1);
        let n = mesh.vertices.len();
        let mut c1 = Vec::with_capacity(n);
        let mut c2 = Vec::with_capacity(n);
        let mut beta = Vec::with_capacity(n);
        let mut rho = Vec::with_capacity(n);
        let mut scale = 0.0f64;
        for v in &mesh.vertices {
            let w = v - origin;
            let x = w.dot(&e1);
            let y = w.dot(&e2);
            c1.push(x);
            c2.push(y);
            let r = x.hypot(y);
            rho.push(r);
            beta.push(y.atan2(x).rem_euclid(2.0 * std::f64::consts::PI));
            scale = scale.max(w.norm());
        }
        let rho_eps = 1e-9 * (scale + 1.0);

        let two_pi = 2.0 * std::f64::consts::PI;
        let bucket_width = two_pi / num_buckets as f64;
        let mut buckets = vec![Vec::new(); num_buckets];
        let mut always = Vec::new();
        'faces: for (f_idx, face) in mesh.faces.iter().enumerate() {
            for &vi in face {
                if rho[vi] < rho_eps {
                    always.push(f_idx);
                    continue 'faces;
                }
            }
            // Minimal covering arc of the three vertex angles.
            let mut angles = [beta[face[0]], beta[face[1]], beta[face[2]]];
            angles.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            let gaps = [
                angles[1] - angles[0],
                angles[2] - angles[1],
                two_pi - (angles[2] - angles[0]),
            ];
            let (largest_gap_at, largest_gap) = gaps
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, g)| (i, *g))
                .unwrap();
            let width = two_pi - largest_gap;
            if width > std::f64::consts::PI {
                always.push(f_idx);
                continue;
            }
            // Arc start: the angle following the largest gap.
            let lo = match largest_gap_at {
                0 => angles[1],
                1 => angles[2],
                _ => angles[0],
            };
            // Mark buckets covering [lo, lo+width], one bucket of margin.
            let first = (lo / bucket_width).floor() as isize - 1;
            let last = ((lo + width) / bucket_width).ceil() as isize + 1;
            for b in first..=last {
                let idx = b.rem_euclid(num_buckets as isize) as usize;
                if buckets[idx].last() != Some(&f_idx) {
                    buckets[idx].push(f_idx);
                }
            }
        }

        Slicer {
            mesh,
            origin: *origin,
            e1,
            e2,
            c1,
            c2,
            buckets,
            always,
            scale,
        }
    }

    fn cut(&self, bucket: usize, angle: f64, samples: usize) -> RadialCurve {
        let (sin_a, cos_a) = angle.sin_cos();
        let dir = self.e1 * cos_a + self.e2 * sin_a;
        // Signed in-plane distance from the cut plane and coordinate along
        // the cut direction, from the precomputed vertex projections.
        let s = |vi: usize| self.c2[vi] * cos_a - self.c1[vi] * sin_a;
        let u = |p: &Point3<f64>| (p - self.origin).dot(&dir);

        let mut segments: Vec<(Point3<f64>, Point3<f64>)> = Vec::new();
        let mut consider = |face: &[usize; 3]| {
            let sv = [s(face[0]), s(face[1]), s(face[2])];
            let neg = sv.iter().filter(|v| **v < 0.0).count();
            if neg == 0 || neg == 3 {
                return;
            }
            let mut pts: Vec<Point3<f64>> = Vec::with_capacity(2);
            for (ia, ib) in [(0, 1), (1, 2), (2, 0)] {
                if (sv[ia] < 0.0) != (sv[ib] < 0.0) {
                    pts.push(self.edge_crossing(face[ia], face[ib], sv[ia], sv[ib]));
                }
            }
            if pts.len() != 2 {
                return;
            }
            if let Some(seg) = self.clip_to_half_plane(pts[0], pts[1], &u) {
                segments.push(seg);
            }
        };

        for &f in &self.always {
            consider(&self.mesh.faces[f]);
        }
        for &f in &self.buckets[bucket % self.buckets.len()] {
            consider(&self.mesh.faces[f]);
        }

        let min_len = 1e-12 * (self.scale + 1.0);
        segments.retain(|(a, b)| (b - a).norm() > min_len);
        if segments.is_empty() {
            return RadialCurve::constant(angle, self.origin, samples);
        }

        let chain = chain_segments(&segments, &self.origin, self.scale);
        let mut polyline = chain;
        if (polyline[0] - self.origin).norm() > 1e-9 * (self.scale + 1.0) {
            polyline.insert(0, self.origin);
        } else {
            polyline[0] = self.origin;
        }
        if polyline_length(&polyline) <= 0.0 {
            return RadialCurve::constant(angle, self.origin, samples);
        }
        RadialCurve {
            angle,
            points: resample_uniform(&polyline, samples),
            degenerate: false,
        }
    }

    /// Canonical crossing point on the edge (vi, vj): computed in a fixed
    /// vertex-index order so adjacent faces produce bit-identical points.
    fn edge_crossing(&self, vi: usize, vj: usize, si: f64, sj: f64) -> Point3<f64> {
        let (a, b, sa, sb) = if vi < vj {
            (vi, vj, si, sj)
        } else {
            (vj, vi, sj, si)
        };
        let t = sa / (sa - sb);
        let pa = self.mesh.vertices[a];
        let pb = self.mesh.vertices[b];
        pa + (pb - pa) * t
    }

    fn clip_to_half_plane(
        &self,
        p1: Point3<f64>,
        p2: Point3<f64>,
        u: &impl Fn(&Point3<f64>) -> f64,
    ) -> Option<(Point3<f64>, Point3<f64>)> {
        let u1 = u(&p1);
        let u2 = u(&p2);
        if u1 < 0.0 && u2 < 0.0 {
            return None;
        }
        if u1 >= 0.0 && u2 >= 0.0 {
            return Some((p1, p2));
        }
        let t = u1 / (u1 - u2);
        let crossing = p1 + (p2 - p1) * t;
        if u1 >= 0.0 {
            Some((p1, crossing))
        } else {
            Some((crossing, p2))
        }
    }
}

/// Chains intersection segments into a polyline by endpoint proximity,
/// starting from the endpoint nearest the origin.
fn chain_segments(
    segments: &[(Point3<f64>, Point3<f64>)],
    origin: &Point3<f64>,
    scale: f64,
) -> Vec<Point3<f64>> {
    let join_tol = 1e-7 * (scale + 1.0);
    let dup_tol = 1e-12 * (scale + 1.0);
    let mut used = vec![false; segments.len()];

    // Start with the segment endpoint nearest the origin.
    let mut start = (0usize, false, f64::INFINITY);
    for (i, (a, b)) in segments.iter().enumerate() {
        let da = (a - origin).norm_squared();
        let db = (b - origin).norm_squared();
        if da < start.2 {
            start = (i, false, da);
        }
        if db < start.2 {
            start = (i, true, db);
        }
    }
    let (i0, flipped, _) = start;
    used[i0] = true;
    let (a, b) = segments[i0];
    let mut chain = if flipped { vec![b, a] } else { vec![a, b] };

    loop {
        let cur = *chain.last().unwrap();
        let mut best: Option<(usize, bool, f64)> = None;
        for (i, (a, b)) in segments.iter().enumerate() {
            if used[i] {
                continue;
            }
            let da = (a - cur).norm_squared();
            let db = (b - cur).norm_squared();
            let (flip, d) = if da <= db { (false, da) } else { (true, db) };
            if best.map_or(true, |(_, _, bd)| d < bd) {
                best = Some((i, flip, d));
            }
        }
        match best {
            Some((i, flip, d)) if d.sqrt() <= join_tol => {
                used[i] = true;
                let (a, b) = segments[i];
                let next = if flip { a } else { b };
                if (next - cur).norm() > dup_tol {
                    chain.push(next);
                }
            }
            _ => break,
        }
    }
    chain
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::TriMesh;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    /// Flat disk in the z=0 plane: rings of vertices around the center,
    /// triangulated ring to ring.
    pub fn disk(radius: f64, rings: usize, segments: usize) -> TriMesh {
        let mut vertices = vec![Point3::new(0.0, 0.0, 0.0)];
        for ring in 1..=rings {
            let r = radius * ring as f64 / rings as f64;
            for seg in 0..segments {
                let a = 2.0 * PI * seg as f64 / segments as f64;
                vertices.push(Point3::new(r * a.cos(), r * a.sin(), 0.0));
            }
        }
        let mut faces = Vec::new();
        let idx = |ring: usize, seg: usize| -> usize {
            if ring == 0 {
                0
            } else {
                1 + (ring - 1) * segments + (seg % segments)
            }
        };
        for seg in 0..segments {
            faces.push([idx(0, 0), idx(1, seg), idx(1, seg + 1)]);
        }
        for ring in 1..rings {
            for seg in 0..segments {
                faces.push([idx(ring, seg), idx(ring + 1, seg), idx(ring + 1, seg + 1)]);
                faces.push([idx(ring, seg), idx(ring + 1, seg + 1), idx(ring, seg + 1)]);
            }
        }
        TriMesh { vertices, faces }
    }

    #[test]
    fn flat_disk_cuts_are_straight_uniform_rays() {
        let mesh = disk(1.0, 4, 16);
        let origin = Point3::new(0.0, 0.0, 0.0);
        let fan =
            extract_radial_curves(&mesh, &origin, &ExtractionFrame::canonical(), 4, 5).unwrap();
        assert_eq!(fan.num_curves(), 4);
        for (k, curve) in fan.curves.iter().enumerate() {
            assert!(!curve.degenerate, "curve {k} degenerate");
            let alpha = PI / 2.0 * k as f64;
            assert_abs_diff_eq!(curve.angle, alpha, epsilon = 1e-12);
            let dir = Vector3::new(alpha.cos(), alpha.sin(), 0.0);
            for (j, p) in curve.points.iter().enumerate() {
                let expected = origin + dir * (j as f64 / 4.0);
                assert_abs_diff_eq!(p, &expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn degenerate_angles_are_flagged_constant() {
        // A thin wedge only covers angles near zero; most cuts miss it.
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.05, 0.0),
            Point3::new(1.0, -0.05, 0.0),
        ];
        let mesh = TriMesh {
            vertices,
            faces: vec![[0, 1, 2]],
        };
        let origin = Point3::new(0.0, 0.0, 0.0);
        let fan =
            extract_radial_curves(&mesh, &origin, &ExtractionFrame::canonical(), 4, 5).unwrap();
        assert!(!fan.curves[0].degenerate);
        assert!(fan.curves[1].degenerate, "pi/2 cut should miss the wedge");
        assert_eq!(fan.curves[1].points, vec![origin; 5]);
        assert!(fan.curves[2].degenerate);
        assert!(fan.curves[3].degenerate);
    }

    #[test]
    fn resample_is_idempotent_on_uniform_polylines() {
        // A polyline with equal chord lengths must be a fixed point.
        let points: Vec<Point3<f64>> = (0..17)
            .map(|i| {
                let t = i as f64 * 0.25;
                Point3::new(t.cos(), t.sin(), 0.3 * t)
            })
            .collect();
        // Chords of this helix sampling are equal by construction.
        let resampled = resample_uniform(&points, 17);
        for (a, b) in points.iter().zip(&resampled) {
            assert!((a - b).norm() < 1e-9, "moved by {}", (a - b).norm());
        }
    }

    #[test]
    fn resample_targets_exact_arc_positions() {
        // Independent oracle: walk the source polyline to arc position s.
        fn point_at_arc(points: &[Point3<f64>], s: f64) -> Point3<f64> {
            let mut remaining = s;
            for w in points.windows(2) {
                let len = (w[1] - w[0]).norm();
                if remaining <= len {
                    return w[0] + (w[1] - w[0]) * (remaining / len).clamp(0.0, 1.0);
                }
                remaining -= len;
            }
            *points.last().unwrap()
        }
        let points = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(1.0, 2.0, 0.0),
            Point3::new(1.5, 2.0, 1.0),
        ];
        let total = polyline_length(&points);
        let out = resample_uniform(&points, 9);
        for (i, p) in out.iter().enumerate() {
            let expect = point_at_arc(&points, total * i as f64 / 8.0);
            assert_abs_diff_eq!(p, &expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn rotation_equivariance() {
        let mesh = disk(1.0, 4, 16);
        let origin = Point3::new(0.0, 0.0, 0.0);
        let frame = ExtractionFrame::canonical();
        let fan = extract_radial_curves(&mesh, &origin, &frame, 8, 7).unwrap();

        let rot = nalgebra::Rotation3::from_euler_angles(0.4, -0.3, 0.7).into_inner();
        let rotated_mesh = TriMesh {
            vertices: mesh.vertices.iter().map(|v| Point3::from(rot * v.coords)).collect(),
            faces: mesh.faces.clone(),
        };
        let rotated_origin = Point3::from(rot * origin.coords);
        let rotated_fan = extract_radial_curves(
            &rotated_mesh,
            &rotated_origin,
            &frame.rotated(&rot),
            8,
            7,
        )
        .unwrap();

        for (c, rc) in fan.curves.iter().zip(&rotated_fan.curves) {
            assert_eq!(c.degenerate, rc.degenerate);
            for (p, rp) in c.points.iter().zip(&rc.points) {
                let expected = Point3::from(rot * p.coords);
                assert!((rp - expected).norm() < 1e-6);
            }
        }
    }
}
