//! Builders for the minimal surfaces studied by the library.

mod bipolar;
mod lawson;
mod plateau;
mod spheres;

pub use bipolar::{bipolar, BipolarSurface};
pub use lawson::{clifford_torus, lawson_tau, lawson_tau_with_normals, LawsonTorus, ParametricPatch};
pub use plateau::{
    assemble_by_reflection, disk_from_polygon, generate_group, solve_plateau, PlateauConfig,
    PlateauProblem, PlateauSolution,
};
pub use spheres::{geodesic_sphere, great_sphere, icosahedron, icosphere_coords, veronese_rp2};

/// Which diagonal splits each grid quad.
#[derive(Clone, Copy)]
pub(crate) enum Diagonal {
    /// (i, j)–(i+1, j+1).
    Rising,
    /// (i+1, j)–(i, j+1).
    Falling,
}

/// Triangulates a periodic `nu × nv` grid with vertex index `i * nv + j`.
pub(crate) fn periodic_grid_faces(
    nu: usize,
    nv: usize,
    diagonal: impl Fn(usize, usize) -> Diagonal,
) -> Vec<[usize; 3]> {
    let id = |i: usize, j: usize| (i % nu) * nv + (j % nv);
    let mut faces = Vec::with_capacity(2 * nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            match diagonal(i, j) {
                Diagonal::Rising => {
                    faces.push([a, b, c]);
                    faces.push([a, c, d]);
                }
                Diagonal::Falling => {
                    faces.push([a, b, d]);
                    faces.push([b, c, d]);
                }
            }
        }
    }
    faces
}
