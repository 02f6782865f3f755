//! Edge-length metrics on a fixed mesh, with areas and angle-defect curvature.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;
use crate::sphere::chord_or_arccos;

const TRIANGLE_SLACK: f64 = 1e-10;

/// How triangle angles and areas are derived from edge lengths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AngleConvention {
    /// Spherical law of cosines; areas are spherical excesses.
    IntrinsicSpherical,
    /// Planar law of cosines; areas by Heron's formula.
    Euclidean,
}

/// Per-vertex real values; finite and sized to a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexField {
    values: Vec<f64>,
}

impl VertexField {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "vertex field value {i} is not finite"
            )));
        }
        Ok(Self { values })
    }

    pub fn zeros(n: usize) -> Self {
        Self { values: vec![0.0; n] }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self { values: vec![c; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_len(&self, mesh: &SurfaceMesh) -> Result<()> {
        if self.values.len() == mesh.vertex_count() {
            Ok(())
        } else {
            Err(Error::FieldMeshMismatch {
                field: self.values.len(),
                mesh: mesh.vertex_count(),
            })
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<usize> for VertexField {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Positive edge lengths indexed by the mesh's edge ids.
#[derive(Clone, Debug)]
pub struct DiscreteMetric {
    lengths: Vec<f64>,
    convention: AngleConvention,
}

impl DiscreteMetric {
    /// Validates positivity and the strict triangle inequality on every face.
    pub fn new(mesh: &SurfaceMesh, lengths: Vec<f64>, convention: AngleConvention) -> Result<Self> {
        if lengths.len() != mesh.edge_count() {
            return Err(Error::InvalidParameter(format!(
                "metric has {} lengths for {} edges",
                lengths.len(),
                mesh.edge_count()
            )));
        }
        let metric = Self { lengths, convention };
        for f in 0..mesh.face_count() {
            let slack = metric.face_slack(mesh, f);
            if !(slack > TRIANGLE_SLACK) {
                return Err(Error::DegenerateTriangle { face: f, slack });
            }
        }
        Ok(metric)
    }

    /// Like [`DiscreteMetric::new`] but reports every offending face.
    pub(crate) fn new_listing_violations(
        mesh: &SurfaceMesh,
        lengths: Vec<f64>,
        convention: AngleConvention,
    ) -> Result<Self> {
        let metric = Self { lengths, convention };
        let bad: Vec<usize> = (0..mesh.face_count())
            .filter(|&f| !(metric.face_slack(mesh, f) > TRIANGLE_SLACK))
            .collect();
        if bad.is_empty() {
            Ok(metric)
        } else {
            Err(Error::TriangleViolation { faces: bad })
        }
    }

    pub fn convention(&self) -> AngleConvention {
        self.convention
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn length(&self, edge: usize) -> f64 {
        self.lengths[edge]
    }

    /// Same lengths read under another convention.
    pub fn with_convention(&self, mesh: &SurfaceMesh, convention: AngleConvention) -> Result<Self> {
        Self::new(mesh, self.lengths.clone(), convention)
    }

    pub fn require_convention(&self, convention: AngleConvention) -> Result<()> {
        if self.convention == convention {
            Ok(())
        } else {
            Err(Error::ConventionMismatch(format!(
                "expected {convention:?}, metric is {:?}",
                self.convention
            )))
        }
    }

    /// Lengths opposite corners 0, 1, 2 of face `f`.
    pub fn face_lengths(&self, mesh: &SurfaceMesh, f: usize) -> [f64; 3] {
        mesh.topology().face_edges[f].map(|e| self.lengths[e])
    }

    fn face_slack(&self, mesh: &SurfaceMesh, f: usize) -> f64 {
        let [a, b, c] = self.face_lengths(mesh, f);
        let s = (b + c - a).min(a + c - b).min(a + b - c);
        if self.convention == AngleConvention::IntrinsicSpherical {
            // Spherical triangles additionally need perimeter below 2π.
            s.min(2.0 * PI - (a + b + c))
        } else {
            s
        }
    }

    /// Smallest triangle-inequality slack over all faces.
    pub fn min_triangle_slack(&self, mesh: &SurfaceMesh) -> f64 {
        (0..mesh.face_count())
            .map(|f| self.face_slack(mesh, f))
            .fold(f64::INFINITY, f64::min)
    }

    /// Interior angles at corners 0, 1, 2.
    pub fn face_angles(&self, mesh: &SurfaceMesh, f: usize) -> [f64; 3] {
        let l = self.face_lengths(mesh, f);
        match self.convention {
            AngleConvention::Euclidean => euclidean_angles(l),
            AngleConvention::IntrinsicSpherical => spherical_angles(l),
        }
    }

    pub fn face_area(&self, mesh: &SurfaceMesh, f: usize) -> f64 {
        let l = self.face_lengths(mesh, f);
        match self.convention {
            AngleConvention::Euclidean => heron_area(l),
            AngleConvention::IntrinsicSpherical => spherical_excess(l),
        }
    }

    pub fn face_areas(&self, mesh: &SurfaceMesh) -> Vec<f64> {
        (0..mesh.face_count()).map(|f| self.face_area(mesh, f)).collect()
    }
}

/// Geodesic lengths of the embedded mesh, read with spherical angles.
pub fn induced_metric(mesh: &SurfaceMesh) -> Result<DiscreteMetric> {
    induced_metric_with(mesh, AngleConvention::IntrinsicSpherical)
}

pub fn induced_metric_with(mesh: &SurfaceMesh, convention: AngleConvention) -> Result<DiscreteMetric> {
    let lengths = mesh
        .topology()
        .edges
        .iter()
        .map(|&[a, b]| chord_or_arccos(mesh.vertex(a), mesh.vertex(b)))
        .collect();
    DiscreteMetric::new(mesh, lengths, convention)
}

/// Barycentric dual areas: a third of each incident face's area.
pub fn vertex_dual_areas(mesh: &SurfaceMesh, metric: &DiscreteMetric) -> VertexField {
    dual_areas_from_faces(mesh, &metric.face_areas(mesh))
}

pub(crate) fn dual_areas_from_faces(mesh: &SurfaceMesh, face_areas: &[f64]) -> VertexField {
    let mut a = vec![0.0; mesh.vertex_count()];
    for (face, &fa) in mesh.faces().iter().zip(face_areas) {
        for &v in face {
            a[v] += fa / 3.0;
        }
    }
    VertexField { values: a }
}

pub fn total_area(mesh: &SurfaceMesh, metric: &DiscreteMetric) -> f64 {
    pairwise_sum(&metric.face_areas(mesh))
}

/// Discrete scalar curvature s = 2K per vertex, so that Σ s_i A_i = 4πχ.
///
/// In spherical mode each face carries curvature K = 1 in addition to the
/// vertex defects, which contributes 2·A_i.
pub fn angle_defect_curvature(mesh: &SurfaceMesh, metric: &DiscreteMetric) -> Result<VertexField> {
    mesh.require_closed()?;
    let defects = angle_defects(mesh, metric);
    let areas = vertex_dual_areas(mesh, metric);
    let values = defects
        .iter()
        .zip(areas.values())
        .map(|(&d, &a)| match metric.convention {
            AngleConvention::Euclidean => 2.0 * d / a,
            AngleConvention::IntrinsicSpherical => 2.0 * (d + a) / a,
        })
        .collect();
    Ok(VertexField { values })
}

/// 2π minus the interior angle sum at each vertex.
pub fn angle_defects(mesh: &SurfaceMesh, metric: &DiscreteMetric) -> Vec<f64> {
    let mut sums = vec![0.0; mesh.vertex_count()];
    for (f, face) in mesh.faces().iter().enumerate() {
        let ang = metric.face_angles(mesh, f);
        for k in 0..3 {
            sums[face[k]] += ang[k];
        }
    }
    sums.into_iter().map(|s| 2.0 * PI - s).collect()
}

/// Σ s_i A_i.
pub fn total_scalar_curvature(mesh: &SurfaceMesh, metric: &DiscreteMetric) -> Result<f64> {
    let s = angle_defect_curvature(mesh, metric)?;
    let a = vertex_dual_areas(mesh, metric);
    let terms: Vec<f64> = s.values().iter().zip(a.values()).map(|(s, a)| s * a).collect();
    Ok(pairwise_sum(&terms))
}

/// Deterministic pairwise summation.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= 16 {
        values.iter().sum()
    } else {
        let (l, r) = values.split_at(values.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}

/// Angles opposite each length, from the half-angle formula.
pub fn euclidean_angles([a, b, c]: [f64; 3]) -> [f64; 3] {
    let s = 0.5 * (a + b + c);
    let (sa, sb, sc) = (s - a, s - b, s - c);
    let half = |x: f64, y: f64, z: f64| 2.0 * (y * z).sqrt().atan2((s * x).sqrt());
    [half(sa, sb, sc), half(sb, sa, sc), half(sc, sa, sb)]
}

/// Spherical half-angle formula for the angles opposite each side.
pub fn spherical_angles([a, b, c]: [f64; 3]) -> [f64; 3] {
    let s = 0.5 * (a + b + c);
    let (ss, sa, sb, sc) = (s.sin(), (s - a).sin(), (s - b).sin(), (s - c).sin());
    let half = |x: f64, y: f64, z: f64| 2.0 * (y * z).sqrt().atan2((ss * x).sqrt());
    [half(sa, sb, sc), half(sb, sa, sc), half(sc, sa, sb)]
}

/// Heron's formula in the numerically stable sorted form.
pub fn heron_area(l: [f64; 3]) -> f64 {
    let mut s = l;
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    0.25 * ((a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c))).max(0.0).sqrt()
}

/// Spherical excess by L'Huilier's formula.
pub fn spherical_excess([a, b, c]: [f64; 3]) -> f64 {
    let s = 0.5 * (a + b + c);
    let t = (0.5 * s).tan() * (0.5 * (s - a)).tan() * (0.5 * (s - b)).tan() * (0.5 * (s - c)).tan();
    4.0 * t.max(0.0).sqrt().atan()
}

/// cot of the angles opposite each length, planar law.
pub fn euclidean_cotangents([a, b, c]: [f64; 3]) -> [f64; 3] {
    let area4 = 4.0 * heron_area([a, b, c]);
    let (a2, b2, c2) = (a * a, b * b, c * c);
    [
        (b2 + c2 - a2) / area4,
        (a2 + c2 - b2) / area4,
        (a2 + b2 - c2) / area4,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::euler_characteristic;
    use crate::sphere::{coords_from_slice, Coords};
    use crate::zoo::{clifford_torus, great_sphere};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn octant_triangle_excess() {
        let e = spherical_excess([FRAC_PI_2; 3]);
        assert!((e - FRAC_PI_2).abs() < 1e-14);
        let ang = spherical_angles([FRAC_PI_2; 3]);
        for a in ang {
            assert!((a - FRAC_PI_2).abs() < 1e-14);
        }
    }

    #[test]
    fn excess_matches_angle_sum() {
        for l in [[0.3, 0.4, 0.5], [1.0, 1.2, 0.7], [0.01, 0.012, 0.015]] {
            let [a, b, c] = spherical_angles(l);
            assert!((a + b + c - PI - spherical_excess(l)).abs() < 1e-13);
        }
    }

    #[test]
    fn euclidean_right_triangle() {
        let ang = euclidean_angles([3.0, 4.0, 5.0]);
        assert!((ang[2] - FRAC_PI_2).abs() < 1e-15);
        assert!((heron_area([3.0, 4.0, 5.0]) - 6.0).abs() < 1e-14);
        let cot = euclidean_cotangents([3.0, 4.0, 5.0]);
        assert!((cot[0] - 4.0 / 3.0).abs() < 1e-14);
        assert!(cot[2].abs() < 1e-15);
    }

    #[test]
    fn octahedron_lengths_and_area() {
        let v: Vec<Coords> = [
            [1.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, -1.0, 0.0],
            [0.0, 0.0, 1.0],
            [0.0, 0.0, -1.0],
        ]
        .iter()
        .map(|p| coords_from_slice(&[p[0], p[1], p[2], 0.0]))
        .collect();
        let faces = vec![
            [0, 2, 4],
            [2, 1, 4],
            [1, 3, 4],
            [3, 0, 4],
            [2, 0, 5],
            [1, 2, 5],
            [3, 1, 5],
            [0, 3, 5],
        ];
        let m = SurfaceMesh::from_coords("oct", 3, &v, faces, true).unwrap();
        let g = induced_metric(&m).unwrap();
        assert!(g.lengths().iter().all(|l| (l - FRAC_PI_2).abs() < 1e-15));
        assert!((total_area(&m, &g) - 4.0 * PI).abs() < 1e-13);
        let s = angle_defect_curvature(&m, &g).unwrap();
        assert!(s.values().iter().all(|s| (s - 2.0).abs() < 1e-13));
    }

    #[test]
    fn gauss_bonnet_both_conventions() {
        for mesh in [great_sphere(2), clifford_torus(12, 10).unwrap()] {
            let chi = euler_characteristic(&mesh) as f64;
            for conv in [AngleConvention::Euclidean, AngleConvention::IntrinsicSpherical] {
                let g = induced_metric_with(&mesh, conv).unwrap();
                let total = total_scalar_curvature(&mesh, &g).unwrap();
                assert!((total - 4.0 * PI * chi).abs() < 1e-9, "{conv:?}: {total}");
            }
        }
    }

    #[test]
    fn flat_torus_has_zero_curvature() {
        let mesh = clifford_torus(16, 16).unwrap();
        let g = induced_metric_with(&mesh, AngleConvention::Euclidean).unwrap();
        let s = angle_defect_curvature(&mesh, &g).unwrap();
        assert!(s.max_abs() < 1e-10);
    }

    #[test]
    fn dual_areas_sum_to_total() {
        let mesh = great_sphere(2);
        let g = induced_metric(&mesh).unwrap();
        let a = vertex_dual_areas(&mesh, &g);
        assert!(a.values().iter().all(|&x| x > 0.0));
        let sum: f64 = a.values().iter().sum();
        assert!((sum - total_area(&mesh, &g)).abs() < 1e-12);
    }

    #[test]
    fn conventions_do_not_mix() {
        let mesh = great_sphere(0);
        let g = induced_metric(&mesh).unwrap();
        assert!(g.require_convention(AngleConvention::Euclidean).is_err());
        assert!(g.require_convention(AngleConvention::IntrinsicSpherical).is_ok());
    }

    #[test]
    fn degenerate_lengths_are_rejected() {
        let mesh = great_sphere(0);
        let mut l = induced_metric(&mesh).unwrap().lengths().to_vec();
        l[0] = 10.0;
        assert!(matches!(
            DiscreteMetric::new(&mesh, l, AngleConvention::Euclidean),
            Err(Error::DegenerateTriangle { .. })
        ));
    }

    #[test]
    fn vertex_field_rejects_nan() {
        assert!(VertexField::new(vec![0.0, f64::NAN]).is_err());
    }
}
