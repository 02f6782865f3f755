//! Discrete mean curvature, second fundamental form and Gauss-equation
//! residuals for surfaces in S^d.
//!
//! Sign convention: the mean curvature vector points toward the center of
//! curvature. A geodesic sphere of radius ρ in S³ has ‖H‖ = 2·cot ρ with H
//! pointing toward its center.

use nalgebra::{SMatrix, SVector, SymmetricEigen};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::SurfaceMesh;
use crate::metric::{
    angle_defect_curvature, dual_areas_from_faces, euclidean_cotangents, heron_area, induced_metric,
    induced_metric_with, vertex_dual_areas, AngleConvention, DiscreteMetric, VertexField,
};
use crate::sphere::{chord_or_arccos, cross4, log_coords, AmbientMatrix, Coords, TangentVector};

const MAX_CONDITION: f64 = 1e8;
const MIN_NEIGHBORS: usize = 5;

/// Orthonormal basis of the fitted surface tangent plane at a vertex.
pub type TangentFrame = [Coords; 2];

/// Neighborhood used by the quadric fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Stencil {
    OneRing,
    #[default]
    TwoRing,
}

/// Per-vertex extrinsic quantities of an embedded closed surface.
#[derive(Clone, Debug)]
pub struct ExtrinsicField {
    pub mean_curvature: Vec<TangentVector>,
    pub alpha_sq: Vec<f64>,
    /// Intrinsic-spherical angle-defect scalar curvature.
    pub scalar_curvature: Vec<f64>,
    /// s − (2 + ‖H‖² − ‖α‖²).
    pub residual: Vec<f64>,
    /// Intrinsic-spherical barycentric dual areas.
    pub dual_areas: Vec<f64>,
    pub frames: Vec<TangentFrame>,
}

impl ExtrinsicField {
    pub fn vertex_count(&self) -> usize {
        self.alpha_sq.len()
    }

    pub fn mean_curvature_norms(&self) -> Vec<f64> {
        self.mean_curvature.iter().map(TangentVector::norm).collect()
    }

    pub fn max_mean_curvature(&self) -> f64 {
        self.mean_curvature.iter().map(TangentVector::norm).fold(0.0, f64::max)
    }

    /// Area-weighted mean of ‖H‖.
    pub fn mean_mean_curvature(&self) -> f64 {
        let total: f64 = self.dual_areas.iter().sum();
        self.mean_curvature
            .iter()
            .zip(&self.dual_areas)
            .map(|(h, a)| h.norm() * a)
            .sum::<f64>()
            / total
    }

    pub fn median_alpha_sq(&self) -> f64 {
        weighted_median(&self.alpha_sq, &self.dual_areas)
    }

    pub fn residual_summary(&self) -> ResidualSummary {
        ResidualSummary::new(&self.residual, &self.dual_areas)
    }
}

/// Summary statistics of a per-vertex residual.
#[derive(Clone, Copy, Debug)]
pub struct ResidualSummary {
    pub max_abs: f64,
    /// Area-weighted median of |residual|.
    pub median_abs: f64,
}

impl ResidualSummary {
    pub fn new(values: &[f64], weights: &[f64]) -> Self {
        let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        Self {
            max_abs: abs.iter().copied().fold(0.0, f64::max),
            median_abs: weighted_median(&abs, weights),
        }
    }
}

/// Smallest value at which the cumulative weight reaches half the total.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for &i in &idx {
        acc += weights[i];
        if acc >= 0.5 * total {
            return values[i];
        }
    }
    idx.last().map_or(f64::NAN, |&i| values[i])
}

fn require_surface_in_3_sphere_or_higher(mesh: &SurfaceMesh) -> Result<()> {
    if mesh.dimension() < 3 {
        return Err(Error::UnsupportedDimension(mesh.dimension()));
    }
    mesh.require_closed()
}

fn log_at(p: &Coords, q: &Coords) -> Coords {
    log_coords(p, q, chord_or_arccos(p, q))
}

/// Tangent planes from the area-weighted average of incident face planes,
/// lifted to T_x S^d by the logarithm map.
pub fn tangent_frames(mesh: &SurfaceMesh) -> Vec<TangentFrame> {
    let topo = mesh.topology();
    (0..mesh.vertex_count())
        .into_par_iter()
        .map(|i| {
            let x = mesh.vertex(i);
            let mut m = AmbientMatrix::zeros();
            for &f in &topo.vertex_faces[i] {
                let face = mesh.faces()[f];
                let others: Vec<usize> = face.iter().copied().filter(|&v| v != i).collect();
                let u = log_at(x, mesh.vertex(others[0]));
                let w = log_at(x, mesh.vertex(others[1]));
                let un = u.norm();
                let e = u / un;
                let wp = w - e * e.dot(&w);
                let wn = wp.norm();
                let g = wp / wn;
                let weight = 0.5 * un * wn;
                m += (e * e.transpose() + g * g.transpose()) * weight;
            }
            top_two_eigenvectors(&m)
        })
        .collect()
}

fn top_two_eigenvectors(m: &AmbientMatrix) -> TangentFrame {
    let eig = SymmetricEigen::new(*m);
    let mut order: Vec<usize> = (0..6).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let e1: Coords = eig.eigenvectors.column(order[0]).into();
    let e2: Coords = eig.eigenvectors.column(order[1]).into();
    [e1, e2]
}

/// Removes the components along x and the tangent frame.
fn normal_part(v: &Coords, x: &Coords, frame: &TangentFrame) -> Coords {
    let mut r = v - x * x.dot(v);
    for e in frame {
        r -= e * e.dot(&r);
    }
    r
}

/// Applies the cotangent Laplacian (Σ_j w_ij (x_j − x_i)) to the vertex
/// positions, with cotangents from planar angles on geodesic lengths.
/// Also returns the planar barycentric dual areas.
pub fn cotangent_laplacian_of_positions(
    mesh: &SurfaceMesh,
    metric: &DiscreteMetric,
) -> (Vec<Coords>, Vec<f64>) {
    let n = mesh.vertex_count();
    let mut lx = vec![Coords::zeros(); n];
    let mut face_areas = Vec::with_capacity(mesh.face_count());
    for (f, face) in mesh.faces().iter().enumerate() {
        let l = metric.face_lengths(mesh, f);
        face_areas.push(heron_area(l));
        let cot = euclidean_cotangents(l);
        for k in 0..3 {
            // Corner k is opposite edge (a, b).
            let a = face[(k + 1) % 3];
            let b = face[(k + 2) % 3];
            let w = 0.5 * cot[k];
            let d = mesh.vertex(b) - mesh.vertex(a);
            lx[a] += d * w;
            lx[b] -= d * w;
        }
    }
    let areas = dual_areas_from_faces(mesh, &face_areas).into_values();
    (lx, areas)
}

fn mean_curvature_with_frames(
    mesh: &SurfaceMesh,
    frames: &[TangentFrame],
) -> Result<Vec<TangentVector>> {
    let metric = induced_metric_with(mesh, AngleConvention::Euclidean)?;
    let (lx, areas) = cotangent_laplacian_of_positions(mesh, &metric);
    Ok((0..mesh.vertex_count())
        .map(|i| {
            let x = mesh.vertex(i);
            let h = lx[i] / areas[i] + x * 2.0;
            let hn = normal_part(&h, x, &frames[i]);
            TangentVector::project(mesh.vertices()[i], &hn)
        })
        .collect())
}

/// H_i = P_N((L x)_i / A_i + 2 x_i), projected off the sphere normal and the
/// fitted tangent plane.
pub fn mean_curvature_vector(mesh: &SurfaceMesh) -> Result<Vec<TangentVector>> {
    require_surface_in_3_sphere_or_higher(mesh)?;
    let frames = tangent_frames(mesh);
    mean_curvature_with_frames(mesh, &frames)
}

/// Mean curvature on a mesh that may have boundary; values at boundary
/// vertices are not meaningful.
pub(crate) fn mean_curvature_allowing_boundary(mesh: &SurfaceMesh) -> Result<Vec<TangentVector>> {
    let frames = tangent_frames(mesh);
    mean_curvature_with_frames(mesh, &frames)
}

fn ring(mesh: &SurfaceMesh, i: usize, stencil: Stencil) -> Vec<usize> {
    let nb = &mesh.topology().vertex_neighbors;
    match stencil {
        Stencil::OneRing => nb[i].clone(),
        Stencil::TwoRing => {
            let mut out: Vec<usize> = nb[i]
                .iter()
                .flat_map(|&j| std::iter::once(j).chain(nb[j].iter().copied()))
                .filter(|&j| j != i)
                .collect();
            out.sort_unstable();
            out.dedup();
            out
        }
    }
}

type Normal5 = SMatrix<f64, 5, 5>;

/// Weighted least-squares quadric fit; returns ‖α‖² or the condition number
/// on failure.
fn fit_alpha_sq(
    x: &Coords,
    frame: &TangentFrame,
    points: impl Iterator<Item = Coords>,
) -> std::result::Result<f64, f64> {
    let lifted: Vec<Coords> = points.map(|q| log_at(x, &q)).collect();
    let radius = lifted.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut ata = Normal5::zeros();
    let mut atb = SMatrix::<f64, 5, 6>::zeros();
    for v in &lifted {
        let dist = v.norm();
        let w = 1.0 / dist;
        let a = frame[0].dot(v) / radius;
        let b = frame[1].dot(v) / radius;
        let r = v - frame[0] * (a * radius) - frame[1] * (b * radius);
        let basis = SVector::<f64, 5>::new(a, b, 0.5 * a * a, a * b, 0.5 * b * b);
        ata += basis * basis.transpose() * w;
        atb += basis * r.transpose() * w;
    }
    let eig = SymmetricEigen::new(ata);
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    let condition = if min > 0.0 { max / min } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(condition);
    }
    let coeffs = ata
        .cholesky()
        .map(|c| c.solve(&atb))
        .ok_or(f64::INFINITY)?;
    let sq = |row: usize| coeffs.row(row).norm_squared();
    Ok((sq(2) + 2.0 * sq(3) + sq(4)) / radius.powi(4))
}

fn alpha_sq_at(
    mesh: &SurfaceMesh,
    i: usize,
    frame: &TangentFrame,
    stencil: Stencil,
) -> Result<f64> {
    let x = mesh.vertex(i);
    let mut attempts = vec![stencil];
    if stencil == Stencil::OneRing {
        attempts.push(Stencil::TwoRing);
    }
    let mut last = Error::InsufficientNeighborhood { vertex: i, neighbors: 0 };
    for s in attempts {
        let nbrs = ring(mesh, i, s);
        if nbrs.len() < MIN_NEIGHBORS {
            last = Error::InsufficientNeighborhood {
                vertex: i,
                neighbors: nbrs.len(),
            };
            continue;
        }
        match fit_alpha_sq(x, frame, nbrs.iter().map(|&j| *mesh.vertex(j))) {
            Ok(a) => return Ok(a),
            Err(condition) => last = Error::IllConditionedFit { vertex: i, condition },
        }
    }
    Err(last)
}

fn alpha_sq_with_frames(
    mesh: &SurfaceMesh,
    frames: &[TangentFrame],
    stencil: Stencil,
) -> Result<Vec<f64>> {
    (0..mesh.vertex_count())
        .into_par_iter()
        .map(|i| alpha_sq_at(mesh, i, &frames[i], stencil))
        .collect()
}

/// ‖α‖² per vertex from a quadric fit over the default two-ring stencil.
pub fn second_fundamental_norm(mesh: &SurfaceMesh) -> Result<Vec<f64>> {
    second_fundamental_norm_with(mesh, Stencil::default())
}

/// One-ring fits fall back to the two-ring when under-determined or
/// ill-conditioned.
pub fn second_fundamental_norm_with(mesh: &SurfaceMesh, stencil: Stencil) -> Result<Vec<f64>> {
    require_surface_in_3_sphere_or_higher(mesh)?;
    let frames = tangent_frames(mesh);
    alpha_sq_with_frames(mesh, &frames, stencil)
}

/// All extrinsic fields in one pass.
pub fn compute_extrinsic(mesh: &SurfaceMesh) -> Result<ExtrinsicField> {
    require_surface_in_3_sphere_or_higher(mesh)?;
    let frames = tangent_frames(mesh);
    let mean_curvature = mean_curvature_with_frames(mesh, &frames)?;
    let alpha_sq = alpha_sq_with_frames(mesh, &frames, Stencil::default())?;
    let metric = induced_metric(mesh)?;
    let scalar_curvature = angle_defect_curvature(mesh, &metric)?.into_values();
    let dual_areas = vertex_dual_areas(mesh, &metric).into_values();
    let residual = scalar_curvature
        .iter()
        .zip(&mean_curvature)
        .zip(&alpha_sq)
        .map(|((s, h), a)| s - (2.0 + h.norm() * h.norm() - a))
        .collect();
    Ok(ExtrinsicField {
        mean_curvature,
        alpha_sq,
        scalar_curvature,
        residual,
        dual_areas,
        frames,
    })
}

/// Pointwise Gauss-equation residual with its summary.
pub fn gauss_equation_residual(mesh: &SurfaceMesh) -> Result<(VertexField, ResidualSummary)> {
    let ext = compute_extrinsic(mesh)?;
    let summary = ext.residual_summary();
    Ok((VertexField::new(ext.residual)?, summary))
}

/// Unit normals of a co-oriented surface in S³, from the fitted tangent
/// frames with sign fixed by the face orientation.
pub fn discrete_unit_normals(mesh: &SurfaceMesh) -> Result<Vec<TangentVector>> {
    if mesh.dimension() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: mesh.dimension(),
        });
    }
    if !mesh.orientable() {
        return Err(Error::NonOrientableSource);
    }
    let frames = tangent_frames(mesh);
    let topo = mesh.topology();
    Ok((0..mesh.vertex_count())
        .map(|i| {
            let x = mesh.vertex(i);
            let mut oriented = Coords::zeros();
            for &f in &topo.vertex_faces[i] {
                let face = mesh.faces()[f];
                let k = face.iter().position(|&v| v == i).expect("incident face");
                let b = mesh.vertex(face[(k + 1) % 3]);
                let c = mesh.vertex(face[(k + 2) % 3]);
                oriented += cross4(x, b, c);
            }
            let mut n = cross4(x, &frames[i][0], &frames[i][1]);
            n /= n.norm();
            if n.dot(&oriented) < 0.0 {
                n = -n;
            }
            TangentVector::project(mesh.vertices()[i], &n)
        })
        .collect())
}
