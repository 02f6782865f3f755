use crate::error::{Error, Result};
use crate::mesh::{refine, weld, SurfaceMesh};
use crate::sphere::{coords_from_slice, Coords};

/// Regular icosahedron on the great S² = {x₄ = 0} of S³.
pub fn icosahedron() -> SurfaceMesh {
    let p = 0.5 * (1.0 + 5f64.sqrt());
    let raw = [
        [-1.0, p, 0.0],
        [1.0, p, 0.0],
        [-1.0, -p, 0.0],
        [1.0, -p, 0.0],
        [0.0, -1.0, p],
        [0.0, 1.0, p],
        [0.0, -1.0, -p],
        [0.0, 1.0, -p],
        [p, 0.0, -1.0],
        [p, 0.0, 1.0],
        [-p, 0.0, -1.0],
        [-p, 0.0, 1.0],
    ];
    let coords: Vec<Coords> = raw
        .iter()
        .map(|v| coords_from_slice(&[v[0], v[1], v[2], 0.0]))
        .collect();
    let faces = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    SurfaceMesh::from_coords("icosahedron", 3, &coords, faces, true).expect("icosahedron is valid")
}

/// Subdivided icosahedron: 20·4^level faces, vertices in the great S² of S³.
pub fn great_sphere(level: u32) -> SurfaceMesh {
    let mut m = icosahedron();
    for _ in 0..level {
        m = refine(&m);
    }
    m.with_name(format!("great_sphere_l{level}"))
}

/// Unit 3-vectors and faces of the level-`level` icosphere.
pub fn icosphere_coords(level: u32) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let m = great_sphere(level);
    let v = m.vertices().iter().map(|p| [p.coords()[0], p.coords()[1], p.coords()[2]]).collect();
    (v, m.faces().to_vec())
}

/// Sphere of geodesic radius ρ about e₄ in S³.
pub fn geodesic_sphere(radius: f64, level: u32) -> Result<SurfaceMesh> {
    if !(radius > 0.0 && radius < std::f64::consts::PI) {
        return Err(Error::InvalidParameter(format!(
            "geodesic radius {radius} outside (0, π)"
        )));
    }
    let (v, faces) = icosphere_coords(level);
    let (s, c) = radius.sin_cos();
    let coords: Vec<Coords> = v
        .iter()
        .map(|p| coords_from_slice(&[s * p[0], s * p[1], s * p[2], c]))
        .collect();
    SurfaceMesh::from_coords(format!("geodesic_sphere_l{level}"), 3, &coords, faces, true)
}

/// Jacobi sweeps of umbrella relaxation applied to the icosphere before the
/// Veronese map.
pub const VERONESE_RELAXATION_SWEEPS: usize = 50;

/// Moves every vertex halfway toward the normalized mean of its neighbours,
/// `sweeps` times. Commutes with the antipodal map.
fn relax_on_sphere(mesh: &SurfaceMesh, sweeps: usize) -> Vec<Coords> {
    let neighbors = &mesh.topology().vertex_neighbors;
    let mut v: Vec<Coords> = mesh.vertices().iter().map(|p| *p.coords()).collect();
    for _ in 0..sweeps {
        v = neighbors
            .iter()
            .zip(&v)
            .map(|(nb, p)| {
                let mean = nb.iter().map(|&j| v[j]).sum::<Coords>() / nb.len() as f64;
                ((p + mean) * 0.5).normalize()
            })
            .collect();
    }
    v
}

/// Veronese ℙ²(ℝ) in S⁴: the quadratic Veronese map of a relaxed icosphere
/// with antipodal vertices identified.
///
/// Relaxation removes the spacing kinks along the icosahedron's edges,
/// where the cotangent mean curvature is otherwise not pointwise consistent.
pub fn veronese_rp2(level: u32) -> Result<SurfaceMesh> {
    if level < 1 {
        return Err(Error::InvalidParameter("Veronese level must be at least 1".into()));
    }
    let sphere = great_sphere(level);
    let v = relax_on_sphere(&sphere, VERONESE_RELAXATION_SWEEPS);
    let faces = sphere.faces().to_vec();
    let s3 = 3f64.sqrt();
    let coords: Vec<Coords> = v
        .iter()
        .map(|p| {
            let (x, y, z) = (p[0], p[1], p[2]);
            let c = coords_from_slice(&[
                s3 * x * y,
                s3 * x * z,
                s3 * y * z,
                0.5 * s3 * (x * x - y * y),
                0.5 * (x * x + y * y - 2.0 * z * z),
            ]);
            c / c.norm()
        })
        .collect();
    let (welded, wfaces) = weld(&coords, &faces, 1e-9)?;
    if 2 * welded.len() != coords.len() || 2 * wfaces.len() != faces.len() {
        return Err(Error::WeldFailure(format!(
            "antipodal matching left {} of {} vertices and {} of {} faces",
            welded.len(),
            coords.len(),
            wfaces.len(),
            faces.len()
        )));
    }
    SurfaceMesh::from_coords(format!("veronese_l{level}"), 4, &welded, wfaces, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::euler_characteristic;
    use crate::metric::{induced_metric, total_area};
    use std::f64::consts::PI;

    #[test]
    fn icosphere_counts() {
        let m = great_sphere(1);
        assert_eq!(icosahedron().face_count(), 20);
        assert_eq!(m.face_count(), 80);
        assert_eq!(euler_characteristic(&m), 2);
        assert!(m.orientable());
    }

    #[test]
    fn veronese_topology() {
        let m = veronese_rp2(2).unwrap();
        assert_eq!(euler_characteristic(&m), 1);
        assert!(!m.orientable());
        assert!(m.is_closed());
        assert_eq!(m.dimension(), 4);
        assert!(veronese_rp2(0).is_err());
    }

    #[test]
    fn veronese_map_is_unit() {
        let (v, _) = icosphere_coords(2);
        let s3 = 3f64.sqrt();
        for &[x, y, z] in &v {
            let n2 = 3.0 * (x * x * y * y + x * x * z * z + y * y * z * z)
                + 0.75 * (x * x - y * y).powi(2)
                + 0.25 * (x * x + y * y - 2.0 * z * z).powi(2);
            assert!((n2 - 1.0).abs() < 1e-14, "{n2} {s3}");
        }
    }

    #[test]
    fn veronese_area_converges() {
        let a = |l| {
            let m = veronese_rp2(l).unwrap();
            (total_area(&m, &induced_metric(&m).unwrap()) - 6.0 * PI).abs()
        };
        let (e3, e4) = (a(3), a(4));
        assert!(e4 < e3 / 3.0, "{e3} {e4}");
    }

    #[test]
    fn geodesic_sphere_area() {
        let m = geodesic_sphere(PI / 4.0, 4).unwrap();
        let area = total_area(&m, &induced_metric(&m).unwrap());
        let exact = 4.0 * PI * (PI / 4.0).sin().powi(2);
        assert!((area - exact).abs() / exact < 1e-3);
        assert!(geodesic_sphere(0.0, 1).is_err());
    }
}
