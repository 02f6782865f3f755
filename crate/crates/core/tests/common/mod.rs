//! Checks shared by the property suite and the acceptance run. Each returns
//! the worst deviation it saw so callers can compare against a tolerance.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spherelab::flow::run_uniformization;
use spherelab::sphere::{exp_map, geodesic_distance, log_map, reflection_across_great_circle};
use spherelab::{compute_extrinsic, evaluate_functionals, AmbientPoint, Coords, SphereIsometry, SurfaceMesh};

pub const ROUND_TRIP_TOL: f64 = 1e-10;
pub const INVOLUTION_TOL: f64 = 1e-12;
pub const WIRING_TOL: f64 = 1e-12;
pub const EQUIVARIANCE_TOL: f64 = 1e-9;
pub const CONSERVATION_TOL: f64 = 1e-9;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_point(dim: usize, rng: &mut impl Rng) -> AmbientPoint {
    loop {
        let c = Coords::from_fn(|i, _| if i <= dim { rng.random_range(-1.0..1.0) } else { 0.0 });
        let n = c.norm();
        if n > 1e-3 && n <= 1.0 {
            return AmbientPoint::new(dim, c / n).unwrap();
        }
    }
}

/// Orthonormal pair spanning a random plane through the origin.
pub fn random_plane(dim: usize, rng: &mut impl Rng) -> [Coords; 2] {
    let a = *random_point(dim, rng).coords();
    loop {
        let b = *random_point(dim, rng).coords();
        let b = b - a * a.dot(&b);
        if b.norm() > 1e-3 {
            return [a, b.normalize()];
        }
    }
}

/// Product of a few half-turns about random great circles.
pub fn random_isometry(dim: usize, rng: &mut impl Rng) -> SphereIsometry {
    let mut g = SphereIsometry::identity(dim);
    for _ in 0..4 {
        let r = reflection_across_great_circle(dim, random_plane(dim, rng)).unwrap();
        g = r.compose(&g);
    }
    g
}

/// |exp_p(log_p q) − q| and |‖log_p q‖ − d(p, q)| for a non-antipodal pair.
pub fn exp_log_error(p: &AmbientPoint, q: &AmbientPoint) -> f64 {
    let Ok(v) = log_map(p, q) else {
        return 0.0;
    };
    let back = exp_map(p, &v);
    let e1 = (back.coords() - q.coords()).norm();
    let e2 = (v.norm() - geodesic_distance(p, q)).abs();
    e1.max(e2)
}

/// Deviation of a half-turn from an involution that fixes its circle and
/// preserves distances.
pub fn reflection_error(plane: [Coords; 2], x: &AmbientPoint, y: &AmbientPoint) -> f64 {
    let dim = x.dim();
    let r = reflection_across_great_circle(dim, plane).unwrap();
    let twice = (r.apply(&r.apply(x)).coords() - x.coords()).norm();
    let on_circle = AmbientPoint::new(dim, (plane[0] * 0.6 + plane[1] * 0.8).normalize()).unwrap();
    let fixed = (r.apply(&on_circle).coords() - on_circle.coords()).norm();
    let isometric = (geodesic_distance(&r.apply(x), &r.apply(y)) - geodesic_distance(x, y)).abs();
    twice.max(fixed).max(isometric)
}

/// Relative violation of S = W − D, W = 2Θ + Ψ and D = Θ + Π.
pub fn wiring_error(mesh: &SurfaceMesh) -> f64 {
    let ext = compute_extrinsic(mesh).unwrap();
    let r = evaluate_functionals(mesh, &ext).unwrap();
    r.identity_defect() / r.willmore.abs().max(1.0)
}

/// After moving the mesh by `g`: change in ‖α‖² and the Gauss residual, and
/// mismatch between the new H and g applied to the old H.
pub fn equivariance_error(mesh: &SurfaceMesh, g: &SphereIsometry) -> f64 {
    let moved = mesh
        .with_vertices(mesh.vertices().iter().map(|p| g.apply(p)).collect())
        .unwrap();
    let before = compute_extrinsic(mesh).unwrap();
    let after = compute_extrinsic(&moved).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..mesh.vertex_count() {
        worst = worst
            .max((before.alpha_sq[i] - after.alpha_sq[i]).abs())
            .max((before.residual[i] - after.residual[i]).abs());
        let mapped = g.apply_tangent(&before.mean_curvature[i]);
        worst = worst.max((mapped.vec() - after.mean_curvature[i].vec()).norm());
    }
    worst
}

/// Worst relative area drift and Gauss–Bonnet error along a uniformization run.
pub fn conservation_error(mesh: &SurfaceMesh) -> f64 {
    let result = run_uniformization(mesh, 1e-6, 5000).unwrap();
    let trace = &result.trace;
    trace.max_area_drift().max(trace.max_gauss_bonnet_error())
}
