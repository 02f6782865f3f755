//! Triangulated surfaces with vertices on S^d.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::sphere::{AmbientPoint, Coords};

const UNIT_TOL: f64 = 1e-12;

/// Edge/face incidence derived once per mesh.
#[derive(Clone, Debug)]
pub struct Topology {
    /// Sorted vertex pairs.
    pub edges: Vec<[usize; 2]>,
    /// `face_edges[f][k]` is the edge opposite corner `k` of face `f`.
    pub face_edges: Vec<[usize; 3]>,
    /// One or two incident faces per edge.
    pub edge_faces: Vec<Vec<usize>>,
    pub vertex_faces: Vec<Vec<usize>>,
    /// Sorted one-ring neighbors.
    pub vertex_neighbors: Vec<Vec<usize>>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl Topology {
    fn build(vertex_count: usize, faces: &[[usize; 3]]) -> Self {
        let mut edges = Vec::new();
        let mut edge_index = HashMap::with_capacity(faces.len() * 3 / 2 + 1);
        let mut edge_faces: Vec<Vec<usize>> = Vec::new();
        let mut face_edges = Vec::with_capacity(faces.len());
        let mut vertex_faces = vec![Vec::new(); vertex_count];
        for (f, face) in faces.iter().enumerate() {
            let mut fe = [0usize; 3];
            for k in 0..3 {
                let a = face[(k + 1) % 3];
                let b = face[(k + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_faces.push(Vec::new());
                    edges.len() - 1
                });
                edge_faces[e].push(f);
                fe[k] = e;
                vertex_faces[face[k]].push(f);
            }
            face_edges.push(fe);
        }
        let mut vertex_neighbors = vec![Vec::new(); vertex_count];
        for &[a, b] in &edges {
            vertex_neighbors[a].push(b);
            vertex_neighbors[b].push(a);
        }
        for n in &mut vertex_neighbors {
            n.sort_unstable();
        }
        Self {
            edges,
            face_edges,
            edge_faces,
            vertex_faces,
            vertex_neighbors,
            edge_index,
        }
    }

    pub fn edge_between(&self, a: usize, b: usize) -> Option<usize> {
        self.edge_index.get(&(a.min(b), a.max(b))).copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }
}

/// A triangulated surface in S^d; immutable after construction.
#[derive(Clone, Debug)]
pub struct SurfaceMesh {
    name: String,
    dimension: usize,
    vertices: Vec<AmbientPoint>,
    faces: Vec<[usize; 3]>,
    boundary_loops: Vec<Vec<usize>>,
    orientable: bool,
    topology: Arc<Topology>,
}

impl SurfaceMesh {
    /// Validates every structural invariant, including that the declared
    /// boundary loops and orientability match the face data.
    pub fn new(
        name: impl Into<String>,
        dimension: usize,
        vertices: Vec<AmbientPoint>,
        faces: Vec<[usize; 3]>,
        boundary_loops: Vec<Vec<usize>>,
        orientable: bool,
    ) -> Result<Self> {
        let topology = validate(dimension, &vertices, &faces)?;
        let computed = boundary_loops_of(&faces, &topology)?;
        if !same_loops(&computed, &boundary_loops) {
            return Err(Error::InvalidMesh(
                "declared boundary loops do not match the boundary edges".into(),
            ));
        }
        let (consistent, _) = orient(&faces, &topology);
        match (orientable, consistent) {
            (true, None) => {
                return Err(Error::InvalidMesh(
                    "declared orientable but no consistent orientation exists".into(),
                ))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidMesh(
                    "declared non-orientable but a consistent orientation exists".into(),
                ))
            }
            _ => {}
        }
        if orientable && !is_consistently_oriented(&faces, &topology) {
            return Err(Error::InvalidMesh(
                "orientable mesh faces are not consistently oriented".into(),
            ));
        }
        Ok(Self {
            name: name.into(),
            dimension,
            vertices,
            faces,
            boundary_loops,
            orientable,
            topology: Arc::new(topology),
        })
    }

    /// Builder entry point: derives boundary loops, and when the surface is
    /// declared orientable, flips faces into a consistent orientation.
    /// The declaration is always checked against the combinatorics.
    pub fn from_faces(
        name: impl Into<String>,
        dimension: usize,
        vertices: Vec<AmbientPoint>,
        faces: Vec<[usize; 3]>,
        orientable: bool,
    ) -> Result<Self> {
        let topology = validate(dimension, &vertices, &faces)?;
        let (oriented, _) = orient(&faces, &topology);
        let faces = match (orientable, oriented) {
            (true, Some(f)) => f,
            (true, None) => {
                return Err(Error::InvalidMesh(
                    "declared orientable but no consistent orientation exists".into(),
                ))
            }
            (false, Some(_)) => {
                return Err(Error::InvalidMesh(
                    "declared non-orientable but a consistent orientation exists".into(),
                ))
            }
            (false, None) => faces,
        };
        let topology = Topology::build(vertices.len(), &faces);
        let boundary_loops = boundary_loops_of(&faces, &topology)?;
        Ok(Self {
            name: name.into(),
            dimension,
            vertices,
            faces,
            boundary_loops,
            orientable,
            topology: Arc::new(topology),
        })
    }

    /// Builds from raw padded coordinates, normalizing each vertex.
    pub fn from_coords(
        name: impl Into<String>,
        dimension: usize,
        coords: &[Coords],
        faces: Vec<[usize; 3]>,
        orientable: bool,
    ) -> Result<Self> {
        let vertices = coords
            .iter()
            .map(|c| {
                let n = c.norm();
                if !(n > 1e-14) {
                    return Err(Error::ZeroVector { norm: n });
                }
                AmbientPoint::new(dimension, c / n)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_faces(name, dimension, vertices, faces, orientable)
    }

    /// Builds from raw coordinates and determines orientability from the
    /// combinatorics.
    pub fn from_coords_detect(
        name: impl Into<String>,
        dimension: usize,
        coords: &[Coords],
        faces: Vec<[usize; 3]>,
    ) -> Result<Self> {
        let probe = Topology::build(coords.len(), &faces);
        let orientable = orient(&faces, &probe).0.is_some();
        Self::from_coords(name, dimension, coords, faces, orientable)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn vertices(&self) -> &[AmbientPoint] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> &Coords {
        self.vertices[i].coords()
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn boundary_loops(&self) -> &[Vec<usize>] {
        &self.boundary_loops
    }

    pub fn is_closed(&self) -> bool {
        self.boundary_loops.is_empty()
    }

    pub fn orientable(&self) -> bool {
        self.orientable
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_count(&self) -> usize {
        self.topology.edges.len()
    }

    /// Mask of vertices lying on a boundary loop.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.vertices.len()];
        for l in &self.boundary_loops {
            for &v in l {
                mask[v] = true;
            }
        }
        mask
    }

    pub fn require_closed(&self) -> Result<()> {
        if self.is_closed() {
            Ok(())
        } else {
            Err(Error::NotClosed {
                loops: self.boundary_loops.len(),
            })
        }
    }

    /// Same combinatorics, new vertex positions (e.g. after a flow or an
    /// isometry).
    pub fn with_vertices(&self, vertices: Vec<AmbientPoint>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::FieldMeshMismatch {
                field: vertices.len(),
                mesh: self.vertices.len(),
            });
        }
        for v in &vertices {
            if v.dim() != self.dimension {
                return Err(Error::DimensionMismatch {
                    expected: self.dimension,
                    found: v.dim(),
                });
            }
        }
        Ok(Self {
            name: self.name.clone(),
            dimension: self.dimension,
            vertices,
            faces: self.faces.clone(),
            boundary_loops: self.boundary_loops.clone(),
            orientable: self.orientable,
            topology: Arc::clone(&self.topology),
        })
    }

    /// Vertex positions as rows, for serialization.
    pub fn vertex_rows(&self) -> Vec<Vec<f64>> {
        self.vertices.iter().map(|v| v.as_slice().to_vec()).collect()
    }
}

/// V − E + F.
pub fn euler_characteristic(mesh: &SurfaceMesh) -> i64 {
    mesh.vertex_count() as i64 - mesh.edge_count() as i64 + mesh.face_count() as i64
}

fn validate(dimension: usize, vertices: &[AmbientPoint], faces: &[[usize; 3]]) -> Result<Topology> {
    if !(2..=5).contains(&dimension) {
        return Err(Error::UnsupportedDimension(dimension));
    }
    if faces.is_empty() {
        return Err(Error::InvalidMesh("mesh has no faces".into()));
    }
    for (i, v) in vertices.iter().enumerate() {
        if v.dim() != dimension {
            return Err(Error::DimensionMismatch {
                expected: dimension,
                found: v.dim(),
            });
        }
        let dev = (v.coords().norm() - 1.0).abs();
        if dev > UNIT_TOL {
            return Err(Error::InvalidMesh(format!(
                "vertex {i} is off the sphere by {dev:e}"
            )));
        }
    }
    let mut referenced = vec![false; vertices.len()];
    for (f, face) in faces.iter().enumerate() {
        for &v in face {
            if v >= vertices.len() {
                return Err(Error::InvalidMesh(format!(
                    "face {f} references missing vertex {v}"
                )));
            }
            referenced[v] = true;
        }
        if face[0] == face[1] || face[1] == face[2] || face[0] == face[2] {
            return Err(Error::InvalidMesh(format!("face {f} is degenerate: {face:?}")));
        }
    }
    if let Some(v) = referenced.iter().position(|r| !r) {
        return Err(Error::InvalidMesh(format!("vertex {v} is unreferenced")));
    }
    let topology = Topology::build(vertices.len(), faces);
    for (e, fs) in topology.edge_faces.iter().enumerate() {
        if fs.len() > 2 {
            return Err(Error::InvalidMesh(format!(
                "edge {:?} is shared by {} faces",
                topology.edges[e],
                fs.len()
            )));
        }
    }
    let mut seen = HashMap::new();
    for (f, face) in faces.iter().enumerate() {
        let mut key = *face;
        key.sort_unstable();
        if let Some(g) = seen.insert(key, f) {
            return Err(Error::InvalidMesh(format!("faces {g} and {f} coincide")));
        }
    }
    Ok(topology)
}

/// Whether edge (a, b) appears as a directed edge a→b in `face`.
fn has_directed(face: &[usize; 3], a: usize, b: usize) -> bool {
    (0..3).any(|k| face[k] == a && face[(k + 1) % 3] == b)
}

fn is_consistently_oriented(faces: &[[usize; 3]], topo: &Topology) -> bool {
    topo.edge_faces.iter().enumerate().all(|(e, fs)| {
        if fs.len() < 2 {
            return true;
        }
        let [a, b] = topo.edges[e];
        has_directed(&faces[fs[0]], a, b) != has_directed(&faces[fs[1]], a, b)
    })
}

/// Attempts a consistent orientation by breadth-first propagation.
/// Returns the reoriented faces, or `None` if the surface is non-orientable,
/// together with the number of connected components.
fn orient(faces: &[[usize; 3]], topo: &Topology) -> (Option<Vec<[usize; 3]>>, usize) {
    let mut out = faces.to_vec();
    let mut visited = vec![false; faces.len()];
    let mut components = 0;
    for start in 0..faces.len() {
        if visited[start] {
            continue;
        }
        components += 1;
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(f) = queue.pop_front() {
            for &e in &topo.face_edges[f] {
                let [a, b] = topo.edges[e];
                for &g in &topo.edge_faces[e] {
                    if g == f {
                        continue;
                    }
                    let f_ab = has_directed(&out[f], a, b);
                    if visited[g] {
                        if f_ab == has_directed(&out[g], a, b) {
                            return (None, components);
                        }
                    } else {
                        if f_ab == has_directed(&out[g], a, b) {
                            out[g].swap(1, 2);
                        }
                        visited[g] = true;
                        queue.push_back(g);
                    }
                }
            }
        }
    }
    (Some(out), components)
}

/// Traces boundary edges into loops following face orientation where possible.
fn boundary_loops_of(faces: &[[usize; 3]], topo: &Topology) -> Result<Vec<Vec<usize>>> {
    let mut next: HashMap<usize, usize> = HashMap::new();
    for (e, fs) in topo.edge_faces.iter().enumerate() {
        if fs.len() != 1 {
            continue;
        }
        let [a, b] = topo.edges[e];
        let (from, to) = if has_directed(&faces[fs[0]], a, b) {
            (a, b)
        } else {
            (b, a)
        };
        if next.insert(from, to).is_some() {
            return Err(Error::InvalidMesh(format!(
                "vertex {from} is a non-manifold boundary vertex"
            )));
        }
    }
    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut used = std::collections::HashSet::new();
    let mut loops = Vec::new();
    for s in starts {
        if used.contains(&s) {
            continue;
        }
        let mut lp = vec![s];
        used.insert(s);
        let mut cur = s;
        loop {
            let n = *next.get(&cur).ok_or_else(|| {
                Error::InvalidMesh("boundary chain does not close into a loop".into())
            })?;
            if n == s {
                break;
            }
            if !used.insert(n) {
                return Err(Error::InvalidMesh("boundary loops intersect".into()));
            }
            lp.push(n);
            cur = n;
        }
        loops.push(lp);
    }
    Ok(loops)
}

/// Loops agree up to rotation and direction.
fn same_loops(a: &[Vec<usize>], b: &[Vec<usize>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let canon = |l: &Vec<usize>| -> Vec<usize> {
        let n = l.len();
        let mut best: Option<Vec<usize>> = None;
        for dir in [false, true] {
            for s in 0..n {
                let c: Vec<usize> = (0..n)
                    .map(|i| {
                        if dir {
                            l[(s + n - i) % n]
                        } else {
                            l[(s + i) % n]
                        }
                    })
                    .collect();
                if best.as_ref().is_none_or(|b| c < *b) {
                    best = Some(c);
                }
            }
        }
        best.unwrap_or_default()
    };
    let mut ca: Vec<_> = a.iter().map(canon).collect();
    let mut cb: Vec<_> = b.iter().map(canon).collect();
    ca.sort();
    cb.sort();
    ca == cb
}

/// 1→4 midpoint subdivision; midpoints are re-projected to the sphere.
pub fn refine(mesh: &SurfaceMesh) -> SurfaceMesh {
    let topo = &mesh.topology;
    let nv = mesh.vertex_count();
    let mut vertices = mesh.vertices.clone();
    for &[a, b] in &topo.edges {
        let mid = mesh.vertex(a) + mesh.vertex(b);
        // Antipodal endpoints never occur on a valid (triangle-inequality) mesh.
        vertices.push(AmbientPoint::normalized_unchecked(mesh.dimension, mid));
    }
    let mid = |a: usize, b: usize| nv + topo.edge_between(a, b).expect("edge exists");
    let mut faces = Vec::with_capacity(mesh.faces.len() * 4);
    for &[a, b, c] in &mesh.faces {
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        faces.push([a, ab, ca]);
        faces.push([ab, b, bc]);
        faces.push([ca, bc, c]);
        faces.push([ab, bc, ca]);
    }
    let boundary_loops = mesh
        .boundary_loops
        .iter()
        .map(|l| {
            let n = l.len();
            (0..n)
                .flat_map(|i| [l[i], mid(l[i], l[(i + 1) % n])])
                .collect()
        })
        .collect();
    let topology = Topology::build(vertices.len(), &faces);
    SurfaceMesh {
        name: mesh.name.clone(),
        dimension: mesh.dimension,
        vertices,
        faces,
        boundary_loops,
        orientable: mesh.orientable,
        topology: Arc::new(topology),
    }
}

/// Merges vertices closer than `tol` (Euclidean) and drops faces that
/// become duplicates of an earlier face. A face collapsing onto a repeated
/// vertex is a weld failure.
pub fn weld(
    coords: &[Coords],
    faces: &[[usize; 3]],
    tol: f64,
) -> Result<(Vec<Coords>, Vec<[usize; 3]>)> {
    weld_with_map(coords, faces, tol).map(|w| (w.coords, w.faces))
}

/// Result of [`weld_with_map`].
#[derive(Clone, Debug)]
pub struct Welded {
    pub coords: Vec<Coords>,
    pub faces: Vec<[usize; 3]>,
    /// New index of every input vertex.
    pub map: Vec<usize>,
}

/// [`weld`] that also reports where each input vertex went.
pub fn weld_with_map(coords: &[Coords], faces: &[[usize; 3]], tol: f64) -> Result<Welded> {
    let n = coords.len();
    // Sweep along a fixed generic direction.
    let dir = Coords::from_column_slice(&[
        0.573_462_211,
        0.412_890_541,
        0.389_107_223,
        0.341_773_889,
        0.327_155_013,
        0.351_632_007,
    ])
    .normalize();
    let keys: Vec<f64> = coords.iter().map(|c| c.dot(&dir)).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]).then(a.cmp(&b)));

    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if keys[j] - keys[i] > tol {
                break;
            }
            if (coords[i] - coords[j]).norm() <= tol {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    let (lo, hi) = (ri.min(rj), ri.max(rj));
                    parent[hi] = lo;
                }
            }
        }
    }
    let mut new_index = vec![usize::MAX; n];
    let mut out_coords = Vec::new();
    for i in 0..n {
        let r = find(&mut parent, i);
        if new_index[r] == usize::MAX {
            new_index[r] = out_coords.len();
            out_coords.push(coords[r]);
        }
        new_index[i] = new_index[r];
    }
    let mut seen = std::collections::HashSet::new();
    let mut out_faces = Vec::new();
    for (f, face) in faces.iter().enumerate() {
        let mapped = face.map(|v| new_index[v]);
        if mapped[0] == mapped[1] || mapped[1] == mapped[2] || mapped[0] == mapped[2] {
            return Err(Error::WeldFailure(format!("face {f} collapsed while welding")));
        }
        let mut key = mapped;
        key.sort_unstable();
        if seen.insert(key) {
            out_faces.push(mapped);
        }
    }
    Ok(Welded {
        coords: out_coords,
        faces: out_faces,
        map: new_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::coords_from_slice;

    fn octahedron() -> SurfaceMesh {
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
        SurfaceMesh::from_coords("octahedron", 3, &v, faces, true).unwrap()
    }

    #[test]
    fn octahedron_topology() {
        let m = octahedron();
        assert_eq!(euler_characteristic(&m), 2);
        assert!(m.is_closed());
        assert_eq!(m.edge_count(), 12);
    }

    #[test]
    fn refine_quadruples_faces_and_keeps_euler() {
        let m = octahedron();
        let r = refine(&m);
        assert_eq!(r.face_count(), 32);
        assert_eq!(euler_characteristic(&r), 2);
        assert!(r.vertices().iter().all(|v| (v.coords().norm() - 1.0).abs() < 1e-15));
        assert!(is_consistently_oriented(r.faces(), r.topology()));
    }

    #[test]
    fn boundary_loops_are_subdivided() {
        // Upper half of the octahedron: a disk bounded by the equator.
        let m = octahedron();
        let coords: Vec<Coords> = m.vertices()[..5].iter().map(|v| *v.coords()).collect();
        let faces = m.faces()[..4].to_vec();
        let disk = SurfaceMesh::from_coords("cap", 3, &coords, faces, true).unwrap();
        assert_eq!(disk.boundary_loops().len(), 1);
        assert_eq!(disk.boundary_loops()[0].len(), 4);
        assert_eq!(euler_characteristic(&disk), 1);
        let r = refine(&disk);
        assert_eq!(r.boundary_loops()[0].len(), 8);
        assert_eq!(euler_characteristic(&r), 1);
        // The subdivided loop agrees with the one traced from the faces.
        let traced = boundary_loops_of(r.faces(), r.topology()).unwrap();
        assert!(same_loops(&traced, r.boundary_loops()));
    }

    #[test]
    fn inconsistent_declarations_are_rejected() {
        let m = octahedron();
        let coords: Vec<Coords> = m.vertices().iter().map(|v| *v.coords()).collect();
        let err = SurfaceMesh::from_coords("x", 3, &coords, m.faces().to_vec(), false);
        assert!(err.is_err());
        let mut faces = m.faces().to_vec();
        faces[0].swap(1, 2);
        let verts = m.vertices().to_vec();
        assert!(SurfaceMesh::new("x", 3, verts, faces, vec![], true).is_err());
    }

    #[test]
    fn degenerate_and_unreferenced_are_rejected() {
        let m = octahedron();
        let mut coords: Vec<Coords> = m.vertices().iter().map(|v| *v.coords()).collect();
        let mut faces = m.faces().to_vec();
        faces[0] = [0, 0, 4];
        assert!(SurfaceMesh::from_coords("x", 3, &coords, faces, true).is_err());
        coords.push(coords_from_slice(&[0.0, 0.0, 0.0, 1.0]));
        assert!(SurfaceMesh::from_coords("x", 3, &coords, m.faces().to_vec(), true).is_err());
    }

    #[test]
    fn weld_merges_antipodal_images() {
        // Quotient of the refined octahedron by x → −x, via coordinates that
        // agree on antipodes: V=9, E=24, F=16, χ=1.
        let m = refine(&octahedron());
        let coords: Vec<Coords> = m
            .vertices()
            .iter()
            .map(|v| {
                let c = v.coords();
                let s = if c[0] + 2.0 * c[1] + 3.0 * c[2] < 0.0 { -1.0 } else { 1.0 };
                c * s
            })
            .collect();
        let (wc, wf) = weld(&coords, m.faces(), 1e-9).unwrap();
        assert_eq!(wc.len(), 9);
        assert_eq!(wf.len(), 16);
    }
}
