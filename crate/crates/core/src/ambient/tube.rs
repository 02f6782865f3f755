use nalgebra::{Matrix3, Vector3};

use super::bvh::BoxTree;
use crate::error::{Error, Result};
use crate::extrinsic::second_fundamental_norm;
use crate::flow::FlowTrace;
use crate::mesh::SurfaceMesh;
use crate::metric::VertexField;
use crate::sphere::{AmbientPoint, Coords, TangentVector};

/// Largest admissible tube radius.
pub const MAX_EPSILON: f64 = 0.25;

/// Faces whose distances agree to this are treated as tied.
const TIE_DISTANCE: f64 = 1e-9;
/// Tied faces may disagree on u by at most this much.
const TIE_DISAGREEMENT: f64 = 1e-6;

/// C² cutoff: 1 on [0, ε], 0 on [2ε, ∞), quintic smoothstep in between.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub epsilon: f64,
}

impl Bump {
    pub fn value(&self, d: f64) -> f64 {
        let t = (d - self.epsilon) / self.epsilon;
        if t <= 0.0 {
            1.0
        } else if t >= 1.0 {
            0.0
        } else {
            1.0 - t * t * t * (10.0 + t * (-15.0 + 6.0 * t))
        }
    }

    pub fn derivative(&self, d: f64) -> f64 {
        let t = (d - self.epsilon) / self.epsilon;
        if t <= 0.0 || t >= 1.0 {
            0.0
        } else {
            -30.0 * t * t * (1.0 - t) * (1.0 - t) / self.epsilon
        }
    }

    /// sup |b′| = 15/(8ε).
    pub fn max_slope(&self) -> f64 {
        15.0 / (8.0 * self.epsilon)
    }
}

/// Nearest point of the radially projected triangle of `face`.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceProjection {
    pub face: usize,
    /// Geodesic distance from the query point.
    pub distance: f64,
    /// Barycentric weights over the face's vertices.
    pub weights: [f64; 3],
    /// Unit closest point.
    pub point: Coords,
}

/// Projection of a point onto the cone spanned by a subset of face vertices.
#[derive(Clone, Copy, Debug)]
struct ConeFit {
    face: usize,
    active: [bool; 3],
    beta: [f64; 3],
    gram_inverse: Matrix3<f64>,
    foot: Coords,
    normal_offset: f64,
    foot_norm: f64,
    distance: f64,
}

const SUBSETS: [[bool; 3]; 7] = [
    [true, true, true],
    [false, true, true],
    [true, false, true],
    [true, true, false],
    [true, false, false],
    [false, true, false],
    [false, false, true],
];

fn fit_subset(face: usize, x: &Coords, verts: &[Coords; 3], active: [bool; 3]) -> Option<ConeFit> {
    let mut gram = Matrix3::identity();
    let mut rhs = Vector3::zeros();
    for a in 0..3 {
        if !active[a] {
            continue;
        }
        rhs[a] = verts[a].dot(x);
        for b in 0..3 {
            if active[b] {
                gram[(a, b)] = verts[a].dot(&verts[b]);
            }
        }
    }
    let gram_inverse = gram.try_inverse()?;
    let beta_vec = gram_inverse * rhs;
    let beta = [beta_vec[0], beta_vec[1], beta_vec[2]];
    if (0..3).any(|a| active[a] && beta[a] < -1e-12) {
        return None;
    }
    let foot: Coords = (0..3).filter(|&a| active[a]).map(|a| verts[a] * beta[a]).sum();
    let foot_norm = foot.norm();
    let total: f64 = beta.iter().sum();
    if foot_norm < 1e-12 || total <= 0.0 {
        return None;
    }
    let normal_offset = (x - foot).norm();
    Some(ConeFit {
        face,
        active,
        beta,
        gram_inverse,
        foot,
        normal_offset,
        foot_norm,
        distance: normal_offset.atan2(foot_norm),
    })
}

/// Nonnegative least squares over the cone of the face, by active sets.
fn fit_face(face: usize, x: &Coords, verts: &[Coords; 3]) -> Option<ConeFit> {
    if let Some(fit) = fit_subset(face, x, verts, SUBSETS[0]) {
        return Some(fit);
    }
    let mut best: Option<ConeFit> = None;
    for &active in &SUBSETS[1..] {
        if let Some(fit) = fit_subset(face, x, verts, active) {
            if best.is_none_or(|b| fit.distance < b.distance - 1e-15) {
                best = Some(fit);
            }
        }
    }
    best
}

impl ConeFit {
    fn weights(&self) -> [f64; 3] {
        let total: f64 = self.beta.iter().sum();
        self.beta.map(|b| b / total)
    }

    fn interpolate(&self, u: [f64; 3]) -> f64 {
        let w = self.weights();
        w[0] * u[0] + w[1] * u[1] + w[2] * u[2]
    }

    fn point(&self) -> Coords {
        self.foot / self.foot_norm
    }

    /// Ambient gradient of the interpolated value, before tangent projection.
    fn value_gradient(&self, verts: &[Coords; 3], u: [f64; 3]) -> Coords {
        let total: f64 = self.beta.iter().sum();
        let value = self.interpolate(u);
        let mut grad = Coords::zeros();
        for (a, &ua) in u.iter().enumerate() {
            if !self.active[a] {
                continue;
            }
            let mut row = Coords::zeros();
            for (b, vb) in verts.iter().enumerate() {
                if self.active[b] {
                    row += vb * self.gram_inverse[(a, b)];
                }
            }
            grad += row * ((ua - value) / total);
        }
        grad
    }

    /// Ambient gradient of the geodesic distance; requires a nonzero offset.
    fn distance_gradient(&self, x: &Coords) -> Coords {
        let (r, q) = (self.normal_offset, self.foot_norm);
        let dr = (x - self.foot) / r;
        let dq = self.foot / q;
        (dr * q - dq * r) / (r * r + q * q)
    }
}

/// Conformal factor extended off a surface: constant along normals in the
/// inner ε-tube, cut off smoothly to zero at 2ε, linear in time between
/// schedule snapshots.
#[derive(Clone, Debug)]
pub struct TubeField {
    mesh: SurfaceMesh,
    schedule: Vec<(f64, VertexField)>,
    bump: Bump,
    tree: BoxTree,
    vertex_cache: Vec<[Coords; 3]>,
}

impl TubeField {
    pub fn new(mesh: SurfaceMesh, schedule: Vec<(f64, VertexField)>, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= MAX_EPSILON) {
            return Err(Error::InvalidParameter(format!(
                "tube radius {epsilon} outside (0, {MAX_EPSILON}]"
            )));
        }
        if schedule.is_empty() {
            return Err(Error::InvalidParameter("empty u schedule".into()));
        }
        if schedule.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidParameter("schedule times must increase".into()));
        }
        for (_, u) in &schedule {
            u.check_len(&mesh)?;
        }
        let vertex_cache: Vec<[Coords; 3]> = mesh
            .faces()
            .iter()
            .map(|f| f.map(|v| *mesh.vertex(v)))
            .collect();
        let boxes: Vec<(Coords, Coords)> = vertex_cache.iter().map(face_box).collect();
        Ok(Self {
            tree: BoxTree::new(&boxes),
            mesh,
            schedule,
            bump: Bump { epsilon },
            vertex_cache,
        })
    }

    /// Tube over a time-independent factor.
    pub fn stationary(mesh: SurfaceMesh, u: VertexField, epsilon: f64) -> Result<Self> {
        Self::new(mesh, vec![(0.0, u)], epsilon)
    }

    /// Tube over the log-factor schedule of a uniformization run.
    pub fn from_trace(mesh: SurfaceMesh, trace: &FlowTrace, epsilon: Option<f64>) -> Result<Self> {
        let epsilon = match epsilon {
            Some(e) => e,
            None => default_epsilon(&mesh)?,
        };
        Self::new(mesh, trace.schedule.clone(), epsilon)
    }

    pub fn mesh(&self) -> &SurfaceMesh {
        &self.mesh
    }

    pub fn epsilon(&self) -> f64 {
        self.bump.epsilon
    }

    pub fn bump(&self) -> Bump {
        self.bump
    }

    pub fn schedule(&self) -> &[(f64, VertexField)] {
        &self.schedule
    }

    pub fn start_time(&self) -> f64 {
        self.schedule[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.schedule[self.schedule.len() - 1].0
    }

    /// Same tube with time reversed and the field negated, so that its flow
    /// undoes the original one.
    pub fn reversed(&self) -> Self {
        let (t0, t1) = (self.start_time(), self.end_time());
        let schedule = self
            .schedule
            .iter()
            .rev()
            .map(|(t, u)| {
                let neg = VertexField::new(u.values().iter().map(|v| -v).collect())
                    .expect("negation keeps values finite");
                (t0 + t1 - t, neg)
            })
            .collect();
        Self {
            schedule,
            ..self.clone()
        }
    }

    fn time_weights(&self, t: f64) -> (usize, f64) {
        let last = self.schedule.len() - 1;
        if t <= self.schedule[0].0 {
            return (0, 0.0);
        }
        if t >= self.schedule[last].0 {
            return (last, 0.0);
        }
        let k = self.schedule.partition_point(|(s, _)| *s <= t) - 1;
        let (t0, t1) = (self.schedule[k].0, self.schedule[k + 1].0);
        (k, (t - t0) / (t1 - t0))
    }

    fn vertex_u(&self, (k, w): (usize, f64), v: usize) -> f64 {
        let a = self.schedule[k].1[v];
        if w == 0.0 {
            a
        } else {
            (1.0 - w) * a + w * self.schedule[k + 1].1[v]
        }
    }

    fn face_u(&self, tw: (usize, f64), face: usize) -> [f64; 3] {
        self.mesh.faces()[face].map(|v| self.vertex_u(tw, v))
    }

    /// u at time t, interpolated linearly between snapshots.
    pub fn u_at(&self, t: f64) -> VertexField {
        let tw = self.time_weights(t);
        VertexField::new((0..self.mesh.vertex_count()).map(|v| self.vertex_u(tw, v)).collect())
            .expect("interpolation keeps values finite")
    }

    /// Nearest face fit within `max_distance`, and every face tied with it.
    fn nearest(&self, x: &Coords, max_distance: f64) -> Vec<ConeFit> {
        let mut best = f64::INFINITY;
        let mut found: Vec<ConeFit> = Vec::new();
        let bound = |best: f64| {
            let d = max_distance.min(best + TIE_DISTANCE);
            2.0 * (0.5 * d.min(std::f64::consts::PI)).sin()
        };
        let cell = std::cell::Cell::new(best);
        self.tree.search(
            x,
            || bound(cell.get()),
            |face| {
                if let Some(fit) = fit_face(face, x, &self.vertex_cache[face]) {
                    if fit.distance <= max_distance && fit.distance <= best + TIE_DISTANCE {
                        best = best.min(fit.distance);
                        cell.set(best);
                        found.push(fit);
                    }
                }
            },
        );
        found.retain(|f| f.distance <= best + TIE_DISTANCE);
        found.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.face.cmp(&b.face)));
        found
    }

    /// Closest surface point, or `None` beyond `max_distance`.
    pub fn closest_point(&self, x: &Coords, max_distance: f64) -> Option<SurfaceProjection> {
        self.nearest(x, max_distance).first().map(|fit| SurfaceProjection {
            face: fit.face,
            distance: fit.distance,
            weights: fit.weights(),
            point: fit.point(),
        })
    }

    /// Geodesic distance from `x` to the surface.
    pub fn distance_to_surface(&self, x: &Coords) -> f64 {
        self.closest_point(x, std::f64::consts::PI).map_or(std::f64::consts::PI, |p| p.distance)
    }

    /// Value and ambient (untangent-projected) gradient at `x`.
    pub(crate) fn evaluate_coords(&self, x: &Coords, t: f64) -> Result<(f64, Coords)> {
        let fits = self.nearest(x, 2.0 * self.bump.epsilon);
        let Some(fit) = fits.first() else {
            return Ok((0.0, Coords::zeros()));
        };
        let cutoff = self.bump.value(fit.distance);
        if cutoff == 0.0 {
            return Ok((0.0, Coords::zeros()));
        }
        let tw = self.time_weights(t);
        let u = self.face_u(tw, fit.face);
        let value = fit.interpolate(u);
        let corners = self.mesh.faces()[fit.face];
        for other in &fits[1..] {
            // Neighbouring faces agree on their shared vertices; near-ties
            // between them only reflect how flat the pair is.
            if self.mesh.faces()[other.face].iter().any(|v| corners.contains(v)) {
                continue;
            }
            let v = other.interpolate(self.face_u(tw, other.face));
            if (v - value).abs() > TIE_DISAGREEMENT {
                return Err(Error::ClosestPointAmbiguous {
                    faces: [fit.face, other.face],
                    disagreement: (v - value).abs(),
                });
            }
        }
        let mut grad = fit.value_gradient(&self.vertex_cache[fit.face], u) * cutoff;
        let slope = self.bump.derivative(fit.distance);
        if slope != 0.0 {
            grad += fit.distance_gradient(x) * (value * slope);
        }
        grad -= x * grad.dot(x);
        Ok((value * cutoff, grad))
    }

    /// Upper estimate of the field's gradient norm over all times.
    ///
    /// Per snapshot: twice the largest in-plane gradient of the piecewise
    /// linear u, magnified by the radial projection, plus max|u|·sup|b′|.
    pub fn gradient_bound(&self) -> f64 {
        let mut bound: f64 = 0.0;
        for (_, u) in &self.schedule {
            let mut tangential: f64 = 0.0;
            for (f, verts) in self.vertex_cache.iter().enumerate() {
                let vals = self.mesh.faces()[f].map(|v| u[v]);
                let (g, qmin) = planar_gradient(verts, vals);
                tangential = tangential.max(g / (qmin * qmin));
            }
            let normal = u.max_abs() * self.bump.max_slope();
            bound = bound.max(2.0 * tangential / (2.0 * self.bump.epsilon).cos() + normal);
        }
        bound
    }

    /// Largest admissible RK4 step, ε/(4·gradient bound).
    pub fn max_step(&self) -> f64 {
        let g = self.gradient_bound();
        if g == 0.0 {
            f64::INFINITY
        } else {
            self.bump.epsilon / (4.0 * g)
        }
    }
}

/// Norm of the in-plane gradient of the linear interpolant on the chordal
/// triangle, and a lower bound on the triangle's distance from the origin.
fn planar_gradient(verts: &[Coords; 3], u: [f64; 3]) -> (f64, f64) {
    let e1 = verts[1] - verts[0];
    let e2 = verts[2] - verts[0];
    let (g11, g12, g22) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
    let det = g11 * g22 - g12 * g12;
    let (d1, d2) = (u[1] - u[0], u[2] - u[0]);
    let a = (g22 * d1 - g12 * d2) / det;
    let b = (g11 * d2 - g12 * d1) / det;
    let grad = e1 * a + e2 * b;
    let chord = e1.norm().max(e2.norm()).max((verts[2] - verts[1]).norm());
    (grad.norm(), (1.0 - chord * chord / 3.0).max(1e-6).sqrt())
}

/// Box containing the radial projection of the chordal triangle.
fn face_box(verts: &[Coords; 3]) -> (Coords, Coords) {
    let (_, qmin) = planar_gradient(verts, [0.0; 3]);
    let mut lo = Coords::repeat(f64::INFINITY);
    let mut hi = Coords::repeat(f64::NEG_INFINITY);
    for v in verts {
        for p in [*v, v / qmin] {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
    }
    (lo, hi)
}

/// ε = ½ / max_i ‖α_i‖, capped at [`MAX_EPSILON`].
pub fn default_epsilon(mesh: &SurfaceMesh) -> Result<f64> {
    let alpha_sq = second_fundamental_norm(mesh)?;
    let max_alpha = alpha_sq.iter().fold(0.0_f64, |m, &a| m.max(a.max(0.0).sqrt()));
    Ok(if max_alpha > 0.0 { (0.5 / max_alpha).min(MAX_EPSILON) } else { MAX_EPSILON })
}

/// Extended factor and its tangent gradient at `x` and time `t`.
pub fn evaluate_tube_field(
    field: &TubeField,
    x: &AmbientPoint,
    t: f64,
) -> Result<(f64, TangentVector)> {
    if x.dim() != field.mesh.dimension() {
        return Err(Error::DimensionMismatch {
            expected: field.mesh.dimension(),
            found: x.dim(),
        });
    }
    let (value, grad) = field.evaluate_coords(x.coords(), t)?;
    Ok((value, TangentVector::project(*x, &grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::exp_map;
    use crate::zoo::clifford_torus;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wavy_field(eps: f64) -> TubeField {
        let mesh = clifford_torus(24, 24).unwrap();
        let u: Vec<f64> = mesh
            .vertices()
            .iter()
            .map(|p| 0.3 * p.as_slice()[0] - 0.2 * p.as_slice()[3] * p.as_slice()[1])
            .collect();
        TubeField::stationary(mesh, VertexField::new(u).unwrap(), eps).unwrap()
    }

    #[test]
    fn bump_profile() {
        let b = Bump { epsilon: 0.1 };
        assert_eq!(b.value(0.05), 1.0);
        assert_eq!(b.value(0.2), 0.0);
        assert_eq!(b.value(0.25), 0.0);
        assert!((b.value(0.15) - 0.5).abs() < 1e-15);
        let h = 1e-7;
        for d in [0.11, 0.13, 0.17, 0.19] {
            let fd = (b.value(d + h) - b.value(d - h)) / (2.0 * h);
            assert!((fd - b.derivative(d)).abs() < 1e-6);
            assert!(b.derivative(d) <= 0.0 && b.derivative(d).abs() <= b.max_slope());
        }
    }

    #[test]
    fn surface_points_take_vertex_values() {
        let f = wavy_field(0.1);
        for v in 0..20 {
            let x = f.mesh().vertices()[v];
            let (val, grad) = evaluate_tube_field(&f, &x, 0.0).unwrap();
            assert!((val - f.schedule()[0].1[v]).abs() < 1e-12);
            assert!(grad.vec().dot(x.coords()).abs() < 1e-14);
        }
    }

    #[test]
    fn gradient_on_surface_is_tangent_to_face() {
        let f = wavy_field(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let face = rng.random_range(0..f.mesh().face_count());
            let w: [f64; 3] = [rng.random(), rng.random(), rng.random()];
            let verts = f.vertex_cache[face];
            let p = (verts[0] * w[0] + verts[1] * w[1] + verts[2] * w[2]).normalize();
            let (_, g) = f.evaluate_coords(&p, 0.0).unwrap();
            let proj = f.closest_point(&p, 0.1).unwrap();
            let vs = f.vertex_cache[proj.face];
            let mut normal_part = g;
            let mut basis: Vec<Coords> = Vec::new();
            for v in vs {
                let mut e = v;
                for b in &basis {
                    e -= b * b.dot(&e);
                }
                basis.push(e.normalize());
            }
            for b in &basis {
                normal_part -= b * b.dot(&g);
            }
            assert!(normal_part.norm() < 1e-12 * (1.0 + g.norm()));
        }
    }

    #[test]
    fn field_vanishes_beyond_twice_epsilon() {
        let f = wavy_field(0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut outside = 0;
        for _ in 0..400 {
            let x = loop {
                let c = Coords::from_fn(|i, _| if i < 4 { rng.random_range(-1.0..1.0) } else { 0.0 });
                if c.norm() > 0.1 && c.norm() <= 1.0 {
                    break c.normalize();
                }
            };
            let d = f.distance_to_surface(&x);
            let (v, g) = f.evaluate_coords(&x, 0.0).unwrap();
            if d >= 0.1 {
                outside += 1;
                assert_eq!((v, g.norm()), (0.0, 0.0));
            }
        }
        assert!(outside > 10);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let f = wavy_field(0.1);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h: f64 = 1e-6;
        let mut checked = 0;
        while checked < 100 {
            let face = rng.random_range(0..f.mesh().face_count());
            let verts = f.vertex_cache[face];
            let p = (verts[0] + verts[1] + verts[2]).normalize();
            let base = AmbientPoint::new(3, p).unwrap();
            let dir = Coords::from_fn(|i, _| if i < 4 { rng.random_range(-1.0..1.0) } else { 0.0 });
            let n = TangentVector::project(base, &dir);
            let n = n.vec() / n.norm();
            let x = exp_map(&base, &TangentVector::project(base, &(n * rng.random_range(0.0..0.2))));
            let (_, g) = evaluate_tube_field(&f, &x, 0.0).unwrap();
            let mut worst: f64 = 0.0;
            for _ in 0..3 {
                let e = Coords::from_fn(|i, _| if i < 4 { rng.random_range(-1.0..1.0) } else { 0.0 });
                let e = TangentVector::project(x, &e);
                let e = e.vec() / e.norm();
                let plus = (x.coords() * h.cos() + e * h.sin()).normalize();
                let minus = (x.coords() * h.cos() - e * h.sin()).normalize();
                let fd = (f.evaluate_coords(&plus, 0.0).unwrap().0
                    - f.evaluate_coords(&minus, 0.0).unwrap().0)
                    / (2.0 * h);
                worst = worst.max((fd - g.vec().dot(&e)).abs());
            }
            assert!(worst < 1e-5 * g.norm().max(1e-3), "{worst} vs {}", g.norm());
            checked += 1;
        }
    }

    #[test]
    fn schedule_interpolates_linearly() {
        let mesh = clifford_torus(8, 8).unwrap();
        let n = mesh.vertex_count();
        let f = TubeField::new(
            mesh,
            vec![(0.0, VertexField::zeros(n)), (2.0, VertexField::constant(n, 1.0))],
            0.1,
        )
        .unwrap();
        assert_eq!(f.u_at(0.5)[3], 0.25);
        assert_eq!(f.u_at(5.0)[3], 1.0);
        let r = f.reversed();
        assert_eq!(r.u_at(0.0)[0], -1.0);
        assert_eq!(r.u_at(1.5)[0], -0.25);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mesh = clifford_torus(8, 8).unwrap();
        let n = mesh.vertex_count();
        assert!(TubeField::stationary(mesh.clone(), VertexField::zeros(n), 0.0).is_err());
        assert!(TubeField::stationary(mesh.clone(), VertexField::zeros(n + 1), 0.1).is_err());
        assert!(TubeField::new(mesh, vec![], 0.1).is_err());
    }
}
