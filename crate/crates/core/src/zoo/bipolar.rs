use nalgebra::SymmetricEigen;

use crate::error::{Error, Result};
use crate::mesh::{weld_with_map, SurfaceMesh};
use crate::sphere::{coords_from_slice, AmbientMatrix, Coords, TangentVector};

/// Bipolar image of a co-oriented surface in S³.
pub struct BipolarSurface {
    pub mesh: SurfaceMesh,
    /// Dimension of the linear span of the image vertices in R⁶.
    pub span_rank: usize,
    /// Source vertices per image vertex.
    pub cover_degree: usize,
}

/// ψ ∧ ν in Λ²R⁴ ≅ R⁶, components ordered (01, 02, 03, 12, 13, 23).
pub fn wedge(p: &Coords, n: &Coords) -> Coords {
    let c = |i: usize, j: usize| p[i] * n[j] - p[j] * n[i];
    coords_from_slice(&[c(0, 1), c(0, 2), c(0, 3), c(1, 2), c(1, 3), c(2, 3)])
}

/// Maps every vertex to ψ ∧ ν in S⁵ and welds coincident images.
///
/// The result's orientability is read off the welded combinatorics.
pub fn bipolar(mesh: &SurfaceMesh, normals: &[TangentVector]) -> Result<BipolarSurface> {
    if mesh.dimension() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            found: mesh.dimension(),
        });
    }
    if !mesh.orientable() {
        return Err(Error::NonOrientableSource);
    }
    if normals.len() != mesh.vertex_count() {
        return Err(Error::FieldMeshMismatch {
            field: normals.len(),
            mesh: mesh.vertex_count(),
        });
    }
    for (n, p) in normals.iter().zip(mesh.vertices()) {
        let inner = n.vec().dot(p.coords());
        if (n.norm() - 1.0).abs() > 1e-8 || inner.abs() > 1e-8 {
            return Err(Error::NonOrientableSource);
        }
    }
    let coords: Vec<Coords> = normals
        .iter()
        .zip(mesh.vertices())
        .map(|(n, p)| {
            let w = wedge(p.coords(), n.vec());
            w / w.norm()
        })
        .collect();
    let welded = weld_with_map(&coords, mesh.faces(), 1e-9)?;
    let cover_degree = coords.len() / welded.coords.len();
    if cover_degree * welded.coords.len() != coords.len()
        || cover_degree * welded.faces.len() != mesh.face_count()
    {
        return Err(Error::WeldFailure(format!(
            "bipolar image has {} vertices and {} faces for {} and {} in the source",
            welded.coords.len(),
            welded.faces.len(),
            coords.len(),
            mesh.face_count()
        )));
    }
    let span_rank = span_rank(&welded.coords);
    let out = SurfaceMesh::from_coords_detect(
        format!("bipolar_{}", mesh.name()),
        5,
        &welded.coords,
        welded.faces,
    )?;
    Ok(BipolarSurface {
        mesh: out,
        span_rank,
        cover_degree,
    })
}

/// Numerical rank of the second-moment matrix of a point set.
pub fn span_rank(points: &[Coords]) -> usize {
    let mut m = AmbientMatrix::zeros();
    for p in points {
        m += p * p.transpose();
    }
    let eig = SymmetricEigen::new(m);
    let max = eig.eigenvalues.max();
    eig.eigenvalues.iter().filter(|&&v| v > 1e-10 * max).count()
}
