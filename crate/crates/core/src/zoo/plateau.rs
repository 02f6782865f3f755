//! Plateau problems for geodesic polygons and assembly of closed surfaces by
//! Schwarz reflection across the polygon's edges.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrinsic::mean_curvature_allowing_boundary;
use crate::mesh::{euler_characteristic, weld, SurfaceMesh};
use crate::metric::{heron_area, induced_metric, total_area};
use crate::sphere::{
    chord_or_arccos, coords_from_slice, AmbientPoint, Coords, SphereIsometry,
};

const MIN_QUALITY: f64 = 0.05;
const GROUP_CAP: usize = 4096;

/// Plateau problem as stored in a configuration file.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PlateauConfig {
    #[serde(default)]
    pub name: Option<String>,
    /// Free-form note on where the polygon comes from.
    #[serde(default)]
    pub provenance: Option<String>,
    pub boundary_vertices: Vec<Vec<f64>>,
    /// One (d+1)×(d+1) matrix per polygon edge, fixing that edge.
    pub generators: Vec<Vec<Vec<f64>>>,
    pub expected_genus: u32,
    pub tol: f64,
    pub max_iter: usize,
    /// Grid cells per polygon edge of the initial disk.
    #[serde(default = "default_subdivisions")]
    pub subdivisions: usize,
    /// Height of the bubble added to the initial disk.
    #[serde(default)]
    pub lift: f64,
}

fn default_subdivisions() -> usize {
    16
}

impl PlateauConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn generators(&self) -> Result<Vec<SphereIsometry>> {
        self.generators.iter().map(|m| SphereIsometry::from_rows(m)).collect()
    }

    pub fn problem(&self) -> Result<PlateauProblem> {
        if !(self.tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidProblem(
                "tol must be positive and max_iter nonzero".into(),
            ));
        }
        let dim = self
            .boundary_vertices
            .first()
            .map(|v| v.len().saturating_sub(1))
            .ok_or_else(|| Error::InvalidProblem("empty boundary".into()))?;
        let corners = self
            .boundary_vertices
            .iter()
            .map(|v| {
                if v.len() != dim + 1 {
                    return Err(Error::DimensionMismatch {
                        expected: dim,
                        found: v.len().saturating_sub(1),
                    });
                }
                AmbientPoint::new(dim, coords_from_slice(v))
            })
            .collect::<Result<Vec<_>>>()?;
        let disk = disk_from_polygon(&corners, self.subdivisions, self.lift)?;
        PlateauProblem::new(corners, disk, self.generators()?)
    }
}

/// A geodesic polygon with an initial spanning disk and the half-turns
/// about its edges.
#[derive(Clone, Debug)]
pub struct PlateauProblem {
    boundary: Vec<AmbientPoint>,
    interior_init: SurfaceMesh,
    reflection_generators: Vec<SphereIsometry>,
}

fn slerp(a: &Coords, b: &Coords, t: f64) -> Coords {
    let d = chord_or_arccos(a, b);
    if d < 1e-15 {
        return *a;
    }
    let s = d.sin();
    a * (((1.0 - t) * d).sin() / s) + b * ((t * d).sin() / s)
}

/// Distance of `p` from the great circle through `a` and `b`, and whether
/// it lies on the arc between them.
fn arc_deviation(a: &Coords, b: &Coords, p: &Coords) -> (f64, f64) {
    let e1 = *a;
    let f = b - a * a.dot(b);
    let e2 = f / f.norm();
    let off = (p - e1 * e1.dot(p) - e2 * e2.dot(p)).norm();
    let excess = chord_or_arccos(a, p) + chord_or_arccos(p, b) - chord_or_arccos(a, b);
    (off, excess)
}

impl PlateauProblem {
    /// Validates that the initial disk's boundary runs along the polygon's
    /// arcs and that generator i is an involution fixing edge i.
    pub fn new(
        boundary: Vec<AmbientPoint>,
        interior_init: SurfaceMesh,
        reflection_generators: Vec<SphereIsometry>,
    ) -> Result<Self> {
        let n = boundary.len();
        if n < 3 {
            return Err(Error::InvalidProblem("polygon needs at least 3 vertices".into()));
        }
        let dim = interior_init.dimension();
        if boundary.iter().any(|p| p.dim() != dim) {
            return Err(Error::InvalidProblem("polygon and disk dimensions differ".into()));
        }
        for i in 0..n {
            let d = chord_or_arccos(boundary[i].coords(), boundary[(i + 1) % n].coords());
            if !(d > 1e-8 && d < std::f64::consts::PI - 1e-8) {
                return Err(Error::InvalidProblem(format!(
                    "edge {i} has length {d}; arcs must be unique geodesics"
                )));
            }
        }
        if interior_init.boundary_loops().len() != 1 {
            return Err(Error::InvalidProblem(format!(
                "initial surface must be a disk, found {} boundary loops",
                interior_init.boundary_loops().len()
            )));
        }
        if euler_characteristic(&interior_init) != 1 {
            return Err(Error::InvalidProblem("initial surface is not a disk".into()));
        }
        let on_some_arc = |p: &Coords| {
            (0..n).any(|i| {
                let (off, excess) =
                    arc_deviation(boundary[i].coords(), boundary[(i + 1) % n].coords(), p);
                off < 1e-10 && excess < 1e-10
            })
        };
        let lp = &interior_init.boundary_loops()[0];
        for (k, &v) in lp.iter().enumerate() {
            let p = interior_init.vertex(v);
            let q = interior_init.vertex(lp[(k + 1) % lp.len()]);
            let mid = (p + q).normalize();
            if !on_some_arc(p) || !on_some_arc(&mid) {
                return Err(Error::InvalidProblem(format!(
                    "boundary vertex {v} or the edge after it leaves the polygon arcs"
                )));
            }
        }
        if reflection_generators.len() != n {
            return Err(Error::InvalidProblem(format!(
                "{} generators for {n} edges",
                reflection_generators.len()
            )));
        }
        for (i, g) in reflection_generators.iter().enumerate() {
            if g.dim() != dim {
                return Err(Error::InvalidProblem(format!("generator {i} has wrong dimension")));
            }
            if g.compose(g).distance(&SphereIsometry::identity(dim)) > 1e-10 {
                return Err(Error::InvalidProblem(format!("generator {i} is not an involution")));
            }
            for p in [&boundary[i], &boundary[(i + 1) % n]] {
                if (g.apply_coords(p.coords()) - p.coords()).norm() > 1e-10 {
                    return Err(Error::InvalidProblem(format!(
                        "generator {i} does not fix edge {i}"
                    )));
                }
            }
        }
        Ok(Self {
            boundary,
            interior_init,
            reflection_generators,
        })
    }

    pub fn boundary(&self) -> &[AmbientPoint] {
        &self.boundary
    }

    pub fn interior_init(&self) -> &SurfaceMesh {
        &self.interior_init
    }

    pub fn generators(&self) -> &[SphereIsometry] {
        &self.reflection_generators
    }
}

/// Unit vectors orthogonal to all `points`, for lifting a degenerate patch.
fn complement_directions(dim: usize, points: &[Coords]) -> Vec<Coords> {
    let mut basis: Vec<Coords> = Vec::new();
    let add = |v: Coords, basis: &mut Vec<Coords>| -> bool {
        let mut r = v;
        for b in basis.iter() {
            r -= b * b.dot(&r);
        }
        let n = r.norm();
        if n > 1e-9 {
            basis.push(r / n);
            true
        } else {
            false
        }
    };
    for p in points {
        add(*p, &mut basis);
    }
    let span = basis.len();
    for i in 0..=dim {
        let mut e = Coords::zeros();
        e[i] = 1.0;
        add(e, &mut basis);
    }
    basis.split_off(span)
}

/// Coons-patch disk spanning a geodesic quadrilateral, on an `n × n` grid
/// with diagonals pointing toward the center.
///
/// A positive `lift` adds the bubble b = 16·lift·s(1−s)t(1−t) along b·e + b²·f,
/// with e, f orthogonal to the corners; it is needed when the polygon lies
/// on a single great circle.
pub fn disk_from_polygon(corners: &[AmbientPoint], n: usize, lift: f64) -> Result<SurfaceMesh> {
    if corners.len() != 4 {
        return Err(Error::InvalidProblem(format!(
            "initial disks are built for quadrilaterals, got {} corners",
            corners.len()
        )));
    }
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidProblem("subdivisions must be even and at least 2".into()));
    }
    let dim = corners[0].dim();
    let [p0, q0, p1, q1] = [0, 1, 2, 3].map(|i| *corners[i].coords());
    let lift_dirs = complement_directions(dim, &[p0, q0, p1, q1]);
    if lift != 0.0 && lift_dirs.is_empty() {
        return Err(Error::InvalidProblem(
            "polygon spans the ambient space; no lift direction".into(),
        ));
    }
    let mut coords = Vec::with_capacity((n + 1) * (n + 1));
    for i in 0..=n {
        let s = i as f64 / n as f64;
        for j in 0..=n {
            let t = j as f64 / n as f64;
            let bottom = slerp(&p0, &q0, s);
            let top = slerp(&q1, &p1, s);
            let left = slerp(&p0, &q1, t);
            let right = slerp(&q0, &p1, t);
            let bilinear = p0 * ((1.0 - s) * (1.0 - t))
                + q0 * (s * (1.0 - t))
                + p1 * (s * t)
                + q1 * ((1.0 - s) * t);
            let mut c = bottom * (1.0 - t) + top * t + left * (1.0 - s) + right * s - bilinear;
            if lift != 0.0 {
                let b = 16.0 * lift * s * (1.0 - s) * t * (1.0 - t);
                c += lift_dirs[0] * b;
                if let Some(f) = lift_dirs.get(1) {
                    c += f * (b * b);
                }
            }
            let norm = c.norm();
            if norm < 1e-8 {
                return Err(Error::InvalidProblem(format!(
                    "initial disk degenerates at (s, t) = ({s}, {t}); add a lift"
                )));
            }
            // Boundary points are exact slerps.
            let on_edge = i == 0 || i == n || j == 0 || j == n;
            coords.push(if on_edge {
                if j == 0 {
                    bottom
                } else if j == n {
                    top
                } else if i == 0 {
                    left
                } else {
                    right
                }
            } else {
                c / norm
            });
        }
    }
    let id = |i: usize, j: usize| i * (n + 1) + j;
    let h = n / 2;
    let mut faces = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i < h) == (j < h) {
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            } else {
                faces.push([a, b, d]);
                faces.push([b, c, d]);
            }
        }
    }
    SurfaceMesh::from_coords("plateau_disk", dim, &coords, faces, true)
}

/// Converged (or best) Plateau solution.
#[derive(Clone, Debug)]
pub struct PlateauSolution {
    pub mesh: SurfaceMesh,
    /// Max interior ‖H‖.
    pub residual: f64,
    pub iterations: usize,
    pub initial_area: f64,
    pub final_area: f64,
}

/// Smallest 4√3·A/Σℓ² over faces, with planar areas on chord lengths.
fn min_quality(mesh: &SurfaceMesh) -> f64 {
    mesh.faces()
        .iter()
        .map(|f| {
            let l = [0, 1, 2].map(|k| (mesh.vertex(f[(k + 1) % 3]) - mesh.vertex(f[(k + 2) % 3])).norm());
            let denom: f64 = l.iter().map(|x| x * x).sum();
            4.0 * 3f64.sqrt() * heron_area(l) / denom
        })
        .fold(f64::INFINITY, f64::min)
}

fn spherical_area(mesh: &SurfaceMesh) -> Option<f64> {
    induced_metric(mesh).ok().map(|g| total_area(mesh, &g))
}

/// Jacobi mean-curvature descent on total spherical area with the boundary
/// held fixed and a backtracking step size.
pub fn solve_plateau(problem: &PlateauProblem, tol: f64, max_iter: usize) -> Result<PlateauSolution> {
    let mut mesh = problem.interior_init.clone();
    let interior: Vec<bool> = mesh.boundary_mask().iter().map(|b| !b).collect();
    if min_quality(&mesh) < MIN_QUALITY {
        return Err(Error::InvalidProblem("initial disk has triangles below quality 0.05".into()));
    }
    let initial_area = spherical_area(&mesh)
        .ok_or_else(|| Error::InvalidProblem("initial disk has degenerate triangles".into()))?;
    let min_edge = mesh
        .topology()
        .edges
        .iter()
        .map(|&[a, b]| chord_or_arccos(mesh.vertex(a), mesh.vertex(b)))
        .fold(f64::INFINITY, f64::min);
    let tau_max = 0.5 * min_edge * min_edge;
    let mut tau = 0.1 * min_edge * min_edge;
    let mut area = initial_area;
    let residual_of = |h: &[crate::sphere::TangentVector]| {
        h.iter()
            .zip(&interior)
            .filter(|(_, &i)| i)
            .map(|(h, _)| h.norm())
            .fold(0.0, f64::max)
    };
    let mut h = mean_curvature_allowing_boundary(&mesh)?;
    let mut residual = residual_of(&h);
    let mut iterations = 0;
    while residual >= tol {
        if iterations >= max_iter || tau < 1e-14 * min_edge * min_edge {
            return Err(Error::StalledDescent { residual, iterations });
        }
        iterations += 1;
        let moved: Vec<AmbientPoint> = mesh
            .vertices()
            .iter()
            .zip(&h)
            .zip(&interior)
            .map(|((p, hv), &inner)| {
                if inner {
                    AmbientPoint::normalized_unchecked(p.dim(), p.coords() + hv.vec() * tau)
                } else {
                    *p
                }
            })
            .collect();
        let trial = mesh.with_vertices(moved)?;
        let accepted = match spherical_area(&trial) {
            Some(a) if a <= area * (1.0 + 1e-12) && min_quality(&trial) >= MIN_QUALITY => {
                area = a;
                true
            }
            _ => false,
        };
        if accepted {
            mesh = trial;
            h = mean_curvature_allowing_boundary(&mesh)?;
            residual = residual_of(&h);
            tau = (tau * 1.1).min(tau_max);
        } else {
            tau *= 0.5;
        }
    }
    Ok(PlateauSolution {
        mesh: mesh.with_name("plateau_patch"),
        residual,
        iterations,
        initial_area,
        final_area: area,
    })
}

/// Finite group generated by `generators`, identity first.
pub fn generate_group(generators: &[SphereIsometry]) -> Result<Vec<SphereIsometry>> {
    let dim = generators
        .first()
        .map(SphereIsometry::dim)
        .ok_or_else(|| Error::InvalidProblem("no generators".into()))?;
    let mut group = vec![SphereIsometry::identity(dim)];
    let mut next = 0;
    while next < group.len() {
        let g = group[next];
        next += 1;
        for r in generators {
            let h = r.compose(&g);
            if !group.iter().any(|e| e.distance(&h) < 1e-9) {
                if group.len() >= GROUP_CAP {
                    return Err(Error::InvalidProblem(format!(
                        "reflection group exceeds {GROUP_CAP} elements"
                    )));
                }
                group.push(h);
            }
        }
    }
    Ok(group)
}

/// Orbit of `patch` under the group generated by `generators`, welded into a
/// closed orientable surface of the given genus.
pub fn assemble_by_reflection(
    patch: &SurfaceMesh,
    generators: &[SphereIsometry],
    expected_genus: u32,
) -> Result<SurfaceMesh> {
    let group = generate_group(generators)?;
    let nv = patch.vertex_count();
    let mut coords = Vec::with_capacity(nv * group.len());
    let mut faces = Vec::with_capacity(patch.face_count() * group.len());
    for (c, g) in group.iter().enumerate() {
        coords.extend(patch.vertices().iter().map(|p| g.apply_coords(p.coords())));
        faces.extend(patch.faces().iter().map(|f| f.map(|v| v + c * nv)));
    }
    let (coords, faces) = weld(&coords, &faces, 1e-6)?;
    let expected = 2 - 2 * expected_genus as i64;
    let mesh = SurfaceMesh::from_coords_detect(
        format!("reflection_genus{expected_genus}"),
        patch.dimension(),
        &coords,
        faces,
    )
    .map_err(|e| Error::WeldFailure(e.to_string()))?;
    if !mesh.is_closed() {
        return Err(Error::WeldFailure(format!(
            "assembled surface still has {} boundary loop(s)",
            mesh.boundary_loops().len()
        )));
    }
    let found = euler_characteristic(&mesh);
    if found != expected {
        return Err(Error::WrongEuler { expected, found });
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::reflection_across_great_circle;
    use std::f64::consts::PI;

    fn e(i: usize) -> Coords {
        let mut c = Coords::zeros();
        c[i] = 1.0;
        c
    }

    fn hemisphere_problem(n: usize) -> PlateauProblem {
        let corners: Vec<AmbientPoint> =
            [e(0), e(1), -e(0), -e(1)].iter().map(|c| AmbientPoint::new(3, *c).unwrap()).collect();
        let disk = disk_from_polygon(&corners, n, 0.6).unwrap();
        let r = reflection_across_great_circle(3, [e(0), e(1)]).unwrap();
        PlateauProblem::new(corners, disk, vec![r, r, r, r]).unwrap()
    }

    #[test]
    fn hemisphere_from_great_circle() {
        let problem = hemisphere_problem(8);
        let sol = solve_plateau(&problem, 1e-6, 20_000).unwrap();
        assert!(sol.residual < 1e-6);
        assert!(sol.final_area <= sol.initial_area);
        assert!((sol.final_area - 2.0 * PI).abs() < 0.1, "{}", sol.final_area);
        let r = reflection_across_great_circle(3, [e(0), e(1)]).unwrap();
        let sphere = assemble_by_reflection(&sol.mesh, &[r], 0).unwrap();
        assert_eq!(euler_characteristic(&sphere), 2);
        assert!(sphere.is_closed());
    }

    #[test]
    fn wrong_genus_is_reported() {
        let problem = hemisphere_problem(4);
        let r = reflection_across_great_circle(3, [e(0), e(1)]).unwrap();
        let err = assemble_by_reflection(problem.interior_init(), &[r], 1).unwrap_err();
        assert!(matches!(err, Error::WrongEuler { expected: 0, found: 2 }));
    }

    #[test]
    fn group_of_two_half_turns() {
        let a = reflection_across_great_circle(3, [e(0), e(1)]).unwrap();
        let b = reflection_across_great_circle(3, [e(0), e(2)]).unwrap();
        assert_eq!(generate_group(&[a, b]).unwrap().len(), 4);
    }

    #[test]
    fn invalid_generators_are_rejected() {
        let corners: Vec<AmbientPoint> =
            [e(0), e(1), -e(0), -e(1)].iter().map(|c| AmbientPoint::new(3, *c).unwrap()).collect();
        let disk = disk_from_polygon(&corners, 4, 0.6).unwrap();
        let wrong = reflection_across_great_circle(3, [e(2), e(3)]).unwrap();
        assert!(PlateauProblem::new(corners, disk, vec![wrong; 4]).is_err());
    }

    #[test]
    fn flat_polygon_without_lift_is_degenerate() {
        let corners: Vec<AmbientPoint> =
            [e(0), e(1), -e(0), -e(1)].iter().map(|c| AmbientPoint::new(3, *c).unwrap()).collect();
        assert!(disk_from_polygon(&corners, 4, 0.0).is_err());
    }
}
