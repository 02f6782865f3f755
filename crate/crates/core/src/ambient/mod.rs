//! Ambient extension of a conformal factor and the flow of its gradient.
//!
//! The factor u on a surface is extended to a tube by closest-point
//! projection and a smooth radial cutoff. Particles follow the gradient of
//! the extension by fourth-order Runge–Kutta with re-projection. Reports
//! compare the flowed surface with the conformally scaled one.

mod bvh;
mod tube;

pub use tube::{default_epsilon, evaluate_tube_field, Bump, SurfaceProjection, TubeField, MAX_EPSILON};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extrinsic::{mean_curvature_vector, weighted_median};
use crate::io::fmt_f64;
use crate::mesh::SurfaceMesh;
use crate::metric::{induced_metric, induced_metric_with, pairwise_sum, AngleConvention, DiscreteMetric, VertexField};
use crate::sphere::{chord_or_arccos, AmbientPoint, Coords};
use crate::flow::conformal_lengths;

/// Particles closer than this to the surface count as lying on it.
pub const ON_SURFACE: f64 = 1e-12;

/// Largest number of logged positions per particle, not counting the start.
pub const MAX_LOGGED_STEPS: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParticleTag {
    OnSurface,
    InTube,
    Outside,
}

impl ParticleTag {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::OnSurface => "on_surface",
            Self::InTube => "in_tube",
            Self::Outside => "outside",
        }
    }

    /// Classification by distance to the surface relative to the tube radius.
    pub fn classify(distance: f64, epsilon: f64) -> Self {
        if distance < ON_SURFACE {
            Self::OnSurface
        } else if distance < 2.0 * epsilon {
            Self::InTube
        } else {
            Self::Outside
        }
    }
}

#[derive(Clone, Debug)]
pub struct Particle {
    pub position: AmbientPoint,
    pub tag: ParticleTag,
}

/// Logged `(t, x)` samples of one particle.
pub type Trajectory = Vec<(f64, Coords)>;

/// Particles with their logged trajectories, one `(t, x)` list per particle.
#[derive(Clone, Debug)]
pub struct ParticleEnsemble {
    pub particles: Vec<Particle>,
    pub trajectories: Vec<Trajectory>,
    /// Largest snap-back distance applied to an on-surface particle.
    pub max_surface_correction: f64,
}

impl ParticleEnsemble {
    pub fn new(particles: Vec<Particle>) -> Self {
        let trajectories = particles.iter().map(|p| vec![(0.0, *p.position.coords())]).collect();
        Self {
            particles,
            trajectories,
            max_surface_correction: 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    /// Mesh vertices as on-surface particles.
    pub fn from_vertices(mesh: &SurfaceMesh) -> Self {
        Self::new(
            mesh.vertices()
                .iter()
                .map(|p| Particle {
                    position: *p,
                    tag: ParticleTag::OnSurface,
                })
                .collect(),
        )
    }

    /// Seeded random particles: `counts` on the surface, in the tube shell
    /// and outside the tube, in that order.
    pub fn sample(field: &TubeField, counts: [usize; 3], seed: u64) -> Result<Self> {
        let mesh = field.mesh();
        let dim = mesh.dimension();
        let eps = field.epsilon();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut particles = Vec::with_capacity(counts.iter().sum());
        for _ in 0..counts[0] {
            let (p, _) = random_surface_point(mesh, &mut rng);
            particles.push(Particle {
                position: AmbientPoint::normalized_unchecked(dim, p),
                tag: ParticleTag::OnSurface,
            });
        }
        let mut remaining = counts[1];
        let mut attempts = 0;
        while remaining > 0 {
            attempts += 1;
            if attempts > 1000 * counts[1] {
                return Err(Error::InvalidParameter("cannot place particles in the tube".into()));
            }
            let (p, face) = random_surface_point(mesh, &mut rng);
            let Some(n) = normal_direction(mesh, face, dim, &mut rng) else {
                continue;
            };
            let delta = eps * rng.random_range(0.05..1.95);
            let x = (p * delta.cos() + n * delta.sin()).normalize();
            let d = field.distance_to_surface(&x);
            if ParticleTag::classify(d, eps) == ParticleTag::InTube {
                particles.push(Particle {
                    position: AmbientPoint::normalized_unchecked(dim, x),
                    tag: ParticleTag::InTube,
                });
                remaining -= 1;
            }
        }
        let mut remaining = counts[2];
        let mut attempts = 0;
        while remaining > 0 {
            attempts += 1;
            if attempts > 10000 * counts[2] {
                return Err(Error::InvalidParameter("no room outside the tube".into()));
            }
            let x = random_unit(dim, &mut rng);
            if field.distance_to_surface(&x) >= 2.0 * eps {
                particles.push(Particle {
                    position: AmbientPoint::normalized_unchecked(dim, x),
                    tag: ParticleTag::Outside,
                });
                remaining -= 1;
            }
        }
        Ok(Self::new(particles))
    }

    pub fn positions(&self) -> Vec<Coords> {
        self.particles.iter().map(|p| *p.position.coords()).collect()
    }

    /// Largest distance any particle of `tag` travelled from its start.
    pub fn max_displacement(&self, tag: ParticleTag) -> f64 {
        self.particles
            .iter()
            .zip(&self.trajectories)
            .filter(|(p, _)| p.tag == tag)
            .map(|(p, traj)| (p.position.coords() - traj[0].1).norm())
            .fold(0.0, f64::max)
    }

    /// `particle_id,tag,t,x0..x_d` rows for every logged position.
    pub fn trajectory_csv(&self) -> String {
        let dim = self.particles.first().map_or(0, |p| p.position.dim());
        let mut out = String::from("particle_id,tag,t");
        for k in 0..=dim {
            out.push_str(&format!(",x{k}"));
        }
        out.push('\n');
        for (id, (p, traj)) in self.particles.iter().zip(&self.trajectories).enumerate() {
            for (t, x) in traj {
                out.push_str(&format!("{id},{},{}", p.tag.as_str(), fmt_f64(*t)));
                for k in 0..=dim {
                    out.push(',');
                    out.push_str(&fmt_f64(x[k]));
                }
                out.push('\n');
            }
        }
        out
    }
}

fn random_surface_point(mesh: &SurfaceMesh, rng: &mut ChaCha8Rng) -> (Coords, usize) {
    let face = rng.random_range(0..mesh.face_count());
    let [a, b, c] = mesh.faces()[face];
    let (r1, r2): (f64, f64) = (rng.random(), rng.random());
    let s = r1.sqrt();
    let p = mesh.vertex(a) * (1.0 - s) + mesh.vertex(b) * (s * (1.0 - r2)) + mesh.vertex(c) * (s * r2);
    (p.normalize(), face)
}

fn random_in_ball(dim: usize, rng: &mut ChaCha8Rng) -> Coords {
    loop {
        let c = Coords::from_fn(|i, _| if i <= dim { rng.random_range(-1.0..1.0) } else { 0.0 });
        let n = c.norm();
        if n > 1e-3 && n <= 1.0 {
            return c;
        }
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Coords {
    random_in_ball(dim, rng).normalize()
}

/// Random unit vector orthogonal to the span of the face's vertices.
fn normal_direction(mesh: &SurfaceMesh, face: usize, dim: usize, rng: &mut ChaCha8Rng) -> Option<Coords> {
    let mut basis: Vec<Coords> = Vec::with_capacity(3);
    for &v in &mesh.faces()[face] {
        let mut e = *mesh.vertex(v);
        for b in &basis {
            e -= b * b.dot(&e);
        }
        basis.push(e.normalize());
    }
    let mut n = random_in_ball(dim, rng);
    for b in &basis {
        n -= b * b.dot(&n);
    }
    (n.norm() > 1e-6).then(|| n.normalize())
}

/// Advances every particle from the schedule's start to `t_end` by RK4 on
/// the sphere, re-projecting each stage. Returns `StepTooLarge` when `dt`
/// exceeds [`TubeField::max_step`].
///
/// The extended field is only piecewise smooth: stages that straddle a face
/// edge mix velocities from two face planes, which moves surface particles
/// off the surface by O(dt) per unit time. Particles tagged on-surface are
/// therefore snapped back to their closest surface point after each step,
/// and the largest such correction is kept in
/// [`ParticleEnsemble::max_surface_correction`].
pub fn integrate_palais_flow(
    field: &TubeField,
    ensemble: &ParticleEnsemble,
    t_end: f64,
    dt: f64,
) -> Result<ParticleEnsemble> {
    let bound = field.max_step();
    if !(dt > 0.0) || dt > bound {
        return Err(Error::StepTooLarge { dt, bound });
    }
    let t0 = field.start_time();
    let span = t_end - t0;
    let steps = if span > 0.0 { (span / dt).ceil() as usize } else { 0 };
    let h = if steps > 0 { span / steps as f64 } else { 0.0 };
    let stride = steps.div_ceil(MAX_LOGGED_STEPS).max(1);
    let moved: Vec<(Coords, Trajectory, f64)> = ensemble
        .particles
        .par_iter()
        .map(|p| -> Result<_> {
            let mut x = *p.position.coords();
            let mut log = vec![(t0, x)];
            let mut correction: f64 = 0.0;
            for k in 0..steps {
                let t = t0 + k as f64 * h;
                let next = rk4_step(field, &x, t, h)?;
                let moved = next != x;
                x = next;
                if moved && p.tag == ParticleTag::OnSurface {
                    if let Some(proj) = field.closest_point(&x, 2.0 * field.epsilon()) {
                        correction = correction.max(proj.distance);
                        x = proj.point.normalize();
                    }
                }
                if (k + 1) % stride == 0 || k + 1 == steps {
                    log.push((t + h, x));
                }
            }
            Ok((x, log, correction))
        })
        .collect::<Result<_>>()?;
    let mut particles = Vec::with_capacity(moved.len());
    let mut trajectories = Vec::with_capacity(moved.len());
    let mut max_surface_correction = ensemble.max_surface_correction;
    for (p, (x, log, correction)) in ensemble.particles.iter().zip(moved) {
        max_surface_correction = max_surface_correction.max(correction);
        let dim = p.position.dim();
        particles.push(Particle {
            position: AmbientPoint::new(dim, x).unwrap_or_else(|_| AmbientPoint::normalized_unchecked(dim, x)),
            tag: p.tag,
        });
        trajectories.push(log);
    }
    Ok(ParticleEnsemble {
        particles,
        trajectories,
        max_surface_correction,
    })
}

fn rk4_step(field: &TubeField, x: &Coords, t: f64, h: f64) -> Result<Coords> {
    let velocity = |y: &Coords, s: f64| field.evaluate_coords(y, s).map(|(_, g)| g);
    let k1 = velocity(x, t)?;
    let k2 = velocity(&(x + k1 * (0.5 * h)).normalize(), t + 0.5 * h)?;
    let k3 = velocity(&(x + k2 * (0.5 * h)).normalize(), t + 0.5 * h)?;
    let k4 = velocity(&(x + k3 * h).normalize(), t + h)?;
    let zero = Coords::zeros();
    if k1 == zero && k2 == zero && k3 == zero && k4 == zero {
        return Ok(*x);
    }
    Ok((x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)).normalize())
}

/// On-surface comparison of the flowed surface with the conformally scaled one.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct ConformalityReport {
    pub max_conformality_residual: f64,
    pub median_conformality_residual: f64,
    /// `None` when the flowed mesh has degenerate triangles.
    pub max_H_after: Option<f64>,
    pub surface_fixing_error: f64,
}

/// Compares flowed edge lengths against e^{(u_i+u_j)/2}·(original length),
/// recomputes mean curvature on the flowed mesh and measures how far the
/// flowed vertices lie from the original surface.
pub fn conformality_residual(
    field: &TubeField,
    flowed: &SurfaceMesh,
    u: &VertexField,
) -> Result<ConformalityReport> {
    let mesh = field.mesh();
    u.check_len(mesh)?;
    if flowed.vertex_count() != mesh.vertex_count() || flowed.faces() != mesh.faces() {
        return Err(Error::InvalidMesh("flowed mesh must share the source connectivity".into()));
    }
    let original = induced_metric(mesh)?;
    let face_areas = original.face_areas(mesh);
    let topo = mesh.topology();
    let mut residuals = Vec::with_capacity(topo.edge_count());
    let mut weights = Vec::with_capacity(topo.edge_count());
    for (e, &[a, b]) in topo.edges.iter().enumerate() {
        let target = (0.5 * (u[a] + u[b])).exp() * original.length(e);
        let after = chord_or_arccos(flowed.vertex(a), flowed.vertex(b));
        residuals.push((after / target - 1.0).abs());
        weights.push(topo.edge_faces[e].iter().map(|&f| face_areas[f]).sum::<f64>() / 3.0);
    }
    let max_h = match mean_curvature_vector(flowed) {
        Ok(h) => Some(h.iter().map(|h| h.norm()).fold(0.0, f64::max)),
        Err(Error::DegenerateTriangle { .. }) => None,
        Err(e) => return Err(e),
    };
    let fixing = flowed
        .vertices()
        .par_iter()
        .map(|p| field.distance_to_surface(p.coords()))
        .reduce(|| 0.0, f64::max);
    Ok(ConformalityReport {
        max_conformality_residual: residuals.iter().copied().fold(0.0, f64::max),
        median_conformality_residual: weighted_median(&residuals, &weights),
        max_H_after: max_h,
        surface_fixing_error: fixing,
    })
}

/// |∫(e^{2u} − 1) dμ| / area, with e^{2u} dμ realised as the face areas of
/// the conformally scaled planar metric.
pub fn integral_identity_residual(mesh: &SurfaceMesh, u: &VertexField) -> Result<f64> {
    let base: DiscreteMetric = induced_metric_with(mesh, AngleConvention::Euclidean)?;
    let scaled = conformal_lengths(mesh, &base, u)?;
    let before = base.face_areas(mesh);
    let after = scaled.face_areas(mesh);
    let diff: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
    Ok(pairwise_sum(&diff).abs() / pairwise_sum(&before))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::clifford_torus;

    fn torus() -> SurfaceMesh {
        clifford_torus(16, 16).unwrap()
    }

    fn wavy(mesh: &SurfaceMesh, amp: f64) -> VertexField {
        VertexField::new(mesh.vertices().iter().map(|p| amp * p.as_slice()[0]).collect()).unwrap()
    }

    #[test]
    fn zero_field_fixes_everything() {
        let mesh = torus();
        let n = mesh.vertex_count();
        let field = TubeField::new(
            mesh.clone(),
            vec![(0.0, VertexField::zeros(n)), (1.0, VertexField::zeros(n))],
            0.1,
        )
        .unwrap();
        let ens = ParticleEnsemble::sample(&field, [10, 10, 10], 1).unwrap();
        let out = integrate_palais_flow(&field, &ens, 1.0, 0.1).unwrap();
        assert_eq!(out.positions(), ens.positions());
        let verts = integrate_palais_flow(&field, &ParticleEnsemble::from_vertices(&mesh), 1.0, 0.1).unwrap();
        let flowed = mesh.with_vertices(verts.particles.iter().map(|p| p.position).collect()).unwrap();
        let report = conformality_residual(&field, &flowed, &VertexField::zeros(n)).unwrap();
        assert!(report.max_conformality_residual < 1e-14);
        assert!(report.surface_fixing_error < 1e-14);
    }

    #[test]
    fn outside_particles_do_not_move_and_surface_is_kept() {
        let mesh = torus();
        let u = wavy(&mesh, 0.2);
        let n = mesh.vertex_count();
        let field = TubeField::new(mesh, vec![(0.0, VertexField::zeros(n)), (1.0, u)], 0.08).unwrap();
        let ens = ParticleEnsemble::sample(&field, [20, 20, 20], 2).unwrap();
        let dt = field.max_step().min(0.05);
        let out = integrate_palais_flow(&field, &ens, 1.0, dt).unwrap();
        assert_eq!(out.max_displacement(ParticleTag::Outside), 0.0);
        assert!(out.max_displacement(ParticleTag::OnSurface) > 0.0);
        assert!(out.max_displacement(ParticleTag::InTube) > 0.0);
        assert!(out.max_surface_correction < 1e-4);
        for p in &out.particles {
            assert!((p.position.coords().norm() - 1.0).abs() < 1e-12);
            if p.tag == ParticleTag::OnSurface {
                let d = field.distance_to_surface(p.position.coords());
                assert!(d < 1e-6, "{d}");
            }
        }
        let csv = out.trajectory_csv();
        assert!(csv.starts_with("particle_id,tag,t,x0,x1,x2,x3\n"));
    }

    #[test]
    fn step_bound_is_enforced() {
        let mesh = torus();
        let u = wavy(&mesh, 0.2);
        let field = TubeField::stationary(mesh, u, 0.08).unwrap();
        let ens = ParticleEnsemble::sample(&field, [2, 0, 0], 3).unwrap();
        let too_big = 2.0 * field.max_step();
        assert!(matches!(
            integrate_palais_flow(&field, &ens, 1.0, too_big),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn constant_factor_is_the_control_case() {
        let mesh = torus();
        let n = mesh.vertex_count();
        let c = 0.1;
        let field = TubeField::stationary(mesh.clone(), VertexField::constant(n, c), 0.1).unwrap();
        let out = integrate_palais_flow(&field, &ParticleEnsemble::from_vertices(&mesh), 1.0, 0.01).unwrap();
        let flowed = mesh.with_vertices(out.particles.iter().map(|p| p.position).collect()).unwrap();
        let report = conformality_residual(&field, &flowed, &VertexField::constant(n, c)).unwrap();
        let expected = 1.0 - (-c).exp();
        assert!((report.max_conformality_residual - expected).abs() < 1e-12);
        assert!((report.median_conformality_residual - expected).abs() < 1e-12);
        assert!(report.surface_fixing_error < 1e-12);
    }

    #[test]
    fn reversed_flow_returns_particles() {
        let mesh = clifford_torus(32, 32).unwrap();
        let u = wavy(&mesh, 0.1);
        let n = mesh.vertex_count();
        let field = TubeField::new(mesh, vec![(0.0, VertexField::zeros(n)), (1.0, u)], 0.08).unwrap();
        let ens = ParticleEnsemble::sample(&field, [20, 0, 0], 7).unwrap();
        let dt = field.max_step().min(0.01);
        let fwd = integrate_palais_flow(&field, &ens, 1.0, dt).unwrap();
        let back = integrate_palais_flow(&field.reversed(), &ParticleEnsemble::new(fwd.particles.clone()), 1.0, dt).unwrap();
        for (a, b) in back.positions().iter().zip(ens.positions()) {
            assert!((a - b).norm() < 1e-5, "{}", (a - b).norm());
        }
    }

    #[test]
    fn identity_residual_vanishes_for_constant_zero() {
        let mesh = torus();
        let r = integral_identity_residual(&mesh, &VertexField::zeros(mesh.vertex_count())).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn report_field_names() {
        let r = ConformalityReport {
            max_conformality_residual: 0.0,
            median_conformality_residual: 0.0,
            max_H_after: Some(0.0),
            surface_fixing_error: 0.0,
        };
        let json = serde_json::to_string(&r).unwrap();
        for key in ["max_conformality_residual", "median_conformality_residual", "max_H_after", "surface_fixing_error"] {
            assert!(json.contains(key));
        }
    }
}
