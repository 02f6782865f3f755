use std::f64::consts::{PI, TAU};

use super::{periodic_grid_faces, Diagonal};
use crate::error::{Error, Result};
use crate::extrinsic::mean_curvature_vector;
use crate::mesh::{SurfaceMesh, Welded};
use crate::quadrature::integrate;
use crate::sphere::{coords_from_slice, cross4, Coords, TangentVector};

type MapFn = Box<dyn Fn(f64, f64) -> Coords + Send + Sync>;
type PartialsFn = Box<dyn Fn(f64, f64) -> [Coords; 2] + Send + Sync>;

/// A doubly periodic map of the plane into S^d.
pub struct ParametricPatch {
    dim: usize,
    periods: [f64; 2],
    map: MapFn,
    partials: Option<PartialsFn>,
}

impl ParametricPatch {
    pub fn new(
        dim: usize,
        periods: [f64; 2],
        map: impl Fn(f64, f64) -> Coords + Send + Sync + 'static,
    ) -> Self {
        Self {
            dim,
            periods,
            map: Box::new(map),
            partials: None,
        }
    }

    pub fn with_partials(
        mut self,
        partials: impl Fn(f64, f64) -> [Coords; 2] + Send + Sync + 'static,
    ) -> Self {
        self.partials = Some(Box::new(partials));
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn periods(&self) -> [f64; 2] {
        self.periods
    }

    pub fn eval(&self, x: f64, y: f64) -> Coords {
        (self.map)(x, y)
    }

    pub fn partials(&self, x: f64, y: f64) -> Option<[Coords; 2]> {
        self.partials.as_ref().map(|p| p(x, y))
    }

    /// Checks ‖map‖ = 1 within 1e−12 on a `samples × samples` grid.
    pub fn check_unit(&self, samples: usize) -> Result<()> {
        for i in 0..samples {
            for j in 0..samples {
                let x = self.periods[0] * i as f64 / samples as f64;
                let y = self.periods[1] * j as f64 / samples as f64;
                let deviation = (self.eval(x, y).norm() - 1.0).abs();
                if deviation > 1e-12 {
                    return Err(Error::NotUnit { deviation });
                }
            }
        }
        Ok(())
    }

    /// (cos x, sin x, cos y, sin y)/√2.
    pub fn clifford() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(3, [TAU, TAU], move |x, y| {
            coords_from_slice(&[r * x.cos(), r * x.sin(), r * y.cos(), r * y.sin()])
        })
        .with_partials(move |x, y| {
            [
                coords_from_slice(&[-r * x.sin(), r * x.cos(), 0.0, 0.0]),
                coords_from_slice(&[0.0, 0.0, -r * y.sin(), r * y.cos()]),
            ]
        })
    }

    /// (cos mx cos y, sin mx cos y, cos kx sin y, sin kx sin y).
    pub fn lawson(m: u32, k: u32) -> Self {
        let (m, k) = (m as f64, k as f64);
        Self::new(3, [TAU, TAU], move |x, y| {
            let (sy, cy) = y.sin_cos();
            coords_from_slice(&[
                (m * x).cos() * cy,
                (m * x).sin() * cy,
                (k * x).cos() * sy,
                (k * x).sin() * sy,
            ])
        })
        .with_partials(move |x, y| {
            let (sy, cy) = y.sin_cos();
            let (smx, cmx) = (m * x).sin_cos();
            let (skx, ckx) = (k * x).sin_cos();
            [
                coords_from_slice(&[-m * smx * cy, m * cmx * cy, -k * skx * sy, k * ckx * sy]),
                coords_from_slice(&[-cmx * sy, -smx * sy, ckx * cy, skx * cy]),
            ]
        })
    }
}

/// Clifford torus on an `nu × nv` periodic grid.
pub fn clifford_torus(nu: usize, nv: usize) -> Result<SurfaceMesh> {
    if nu < 8 || nv < 8 {
        return Err(Error::InvalidParameter(format!(
            "Clifford grid {nu}×{nv} is below the 8×8 minimum"
        )));
    }
    let patch = ParametricPatch::clifford();
    let mut coords = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        for j in 0..nv {
            coords.push(patch.eval(TAU * i as f64 / nu as f64, TAU * j as f64 / nv as f64));
        }
    }
    let faces = periodic_grid_faces(nu, nv, |_, _| Diagonal::Rising);
    SurfaceMesh::from_coords(format!("clifford_{nu}x{nv}"), 3, &coords, faces, true)
}

/// Conformal coordinate w(y) = ∫₀^y dt/√(m² cos² t + k² sin² t).
struct ConformalCoordinate {
    m2: f64,
    k2: f64,
    /// w(π).
    half_period: f64,
}

impl ConformalCoordinate {
    fn new(m: u32, k: u32) -> Self {
        let (m2, k2) = ((m * m) as f64, (k * k) as f64);
        let mut c = Self {
            m2,
            k2,
            half_period: 0.0,
        };
        c.half_period = c.w(PI);
        c
    }

    fn speed(&self, y: f64) -> f64 {
        let (s, c) = y.sin_cos();
        (self.m2 * c * c + self.k2 * s * s).sqrt()
    }

    fn w(&self, y: f64) -> f64 {
        if y == 0.0 {
            return 0.0;
        }
        integrate(|t| 1.0 / self.speed(t), 0.0, y, 1e-15)
    }

    /// Inverse of w on the whole line, using w(y + π) = w(y) + w(π).
    fn y(&self, w: f64) -> f64 {
        let n = (w / self.half_period).floor();
        let r = w - n * self.half_period;
        let (mut lo, mut hi) = (0.0, PI);
        let mut y = PI * r / self.half_period;
        for _ in 0..100 {
            let f = self.w(y) - r;
            if f.abs() < 1e-15 {
                break;
            }
            if f > 0.0 {
                hi = y;
            } else {
                lo = y;
            }
            let next = y - f * self.speed(y);
            y = if next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        }
        n * PI + y
    }
}

/// A Lawson surface with the data used to certify it.
pub struct LawsonTorus {
    pub mesh: SurfaceMesh,
    /// Analytic unit normals in S³ (orientable surfaces only).
    pub normals: Option<Vec<TangentVector>>,
    /// w(π) of the conformal coordinate.
    pub conformal_half_period: f64,
    pub max_mean_curvature: f64,
    pub certification_bound: f64,
}

/// Constant in the certification bound max ‖H‖ ≤ C·h², h the longest edge.
pub const MINIMALITY_CONSTANT: f64 = 4.0;

/// Lawson surface τ_{m,k}: a torus when m and k are both odd, a Klein
/// bottle otherwise.
pub fn lawson_tau(m: u32, k: u32, nu: usize, nv: usize) -> Result<SurfaceMesh> {
    lawson_tau_with_normals(m, k, nu, nv).map(|t| t.mesh)
}

/// Builds τ_{m,k} on an `nu × nv` grid in the conformal coordinates
/// (x, w) ∈ [0, 2π) × [0, 2w(π)), quotients by the parity-dependent
/// deck group and certifies max ‖H‖ ≤ [`MINIMALITY_CONSTANT`]·h².
///
/// For a torus `nu` must be a multiple of 4 and `nv` of 8, which makes the
/// grid compatible with the bipolar identification; otherwise `nu` must be
/// even and `nv` a multiple of 4. The quotient identifies grid vertices by
/// index, so vertices of different sheets that meet where the immersion
/// crosses itself stay distinct.
pub fn lawson_tau_with_normals(m: u32, k: u32, nu: usize, nv: usize) -> Result<LawsonTorus> {
    if m == 0 || k == 0 || gcd(m, k) != 1 {
        return Err(Error::InvalidParameter(format!(
            "τ_{{m,k}} needs coprime positive m, k; got ({m}, {k})"
        )));
    }
    let torus = m % 2 == 1 && k % 2 == 1;
    let (nu_mult, nv_mult) = if torus { (4, 8) } else { (2, 4) };
    if nu < 8 || nv < 8 || !nu.is_multiple_of(nu_mult) || !nv.is_multiple_of(nv_mult) {
        return Err(Error::InvalidParameter(format!(
            "τ_{{{m},{k}}} grid {nu}×{nv} must be at least 8×8 with nu divisible by {nu_mult} and nv by {nv_mult}"
        )));
    }
    let conformal = ConformalCoordinate::new(m, k);
    let patch = ParametricPatch::lawson(m, k);
    let ys: Vec<f64> = (0..nv)
        .map(|j| conformal.y(2.0 * conformal.half_period * j as f64 / nv as f64))
        .collect();
    let mut coords = Vec::with_capacity(nu * nv);
    let mut normals = Vec::with_capacity(nu * nv);
    for i in 0..nu {
        let x = TAU * i as f64 / nu as f64;
        for &y in &ys {
            let p = patch.eval(x, y);
            let [px, py] = patch.partials(x, y).expect("Lawson patch has partials");
            let n = cross4(&p, &px, &py);
            coords.push(p);
            normals.push(n / n.norm());
        }
    }
    // Diagonal blocks along w chosen so each deck transformation maps the
    // triangulation onto itself.
    let (block, offset) = if torus {
        (nv / 4, nv / 8)
    } else if m.is_multiple_of(2) {
        (nv / 2, 0)
    } else {
        (nv / 2, nv / 4)
    };
    let faces = periodic_grid_faces(nu, nv, |_, j| {
        if ((j + nv - offset) % nv / block).is_multiple_of(2) {
            Diagonal::Rising
        } else {
            Diagonal::Falling
        }
    });
    // Deck transformation x → x + π combined with y → y + π (torus),
    // y → −y (m even) or y → π − y (k even).
    let deck = |v: usize| {
        let (i, j) = (v / nv, v % nv);
        let j = if torus {
            (j + nv / 2) % nv
        } else if m.is_multiple_of(2) {
            (nv - j) % nv
        } else {
            (nv + nv / 2 - j) % nv
        };
        ((i + nu / 2) % nu) * nv + j
    };
    let welded = quotient_by_involution(&coords, &faces, deck)?;
    if 2 * welded.faces.len() != faces.len() {
        return Err(Error::WeldFailure(format!(
            "τ_{{{m},{k}}} quotient kept {} of {} faces, expected half",
            welded.faces.len(),
            faces.len()
        )));
    }
    let mesh = SurfaceMesh::from_coords(
        format!("lawson_tau_{m}_{k}_{nu}x{nv}"),
        3,
        &welded.coords,
        welded.faces,
        torus,
    )?;
    let normals = torus.then(|| {
        let mut out = vec![Coords::zeros(); mesh.vertex_count()];
        for (old, &new) in welded.map.iter().enumerate() {
            out[new] = normals[old];
        }
        out.iter()
            .zip(mesh.vertices())
            .map(|(n, p)| TangentVector::project(*p, n))
            .collect::<Vec<_>>()
    });
    let h = mean_curvature_vector(&mesh)?;
    let max_h = h.iter().map(TangentVector::norm).fold(0.0, f64::max);
    let h_max = max_edge_length(&mesh);
    let bound = MINIMALITY_CONSTANT * h_max * h_max;
    if max_h > bound {
        return Err(Error::NotMinimalAtResolution { max_h, bound });
    }
    Ok(LawsonTorus {
        mesh,
        normals,
        conformal_half_period: conformal.half_period,
        max_mean_curvature: max_h,
        certification_bound: bound,
    })
}

/// Identifies each vertex with its image under a fixed-point-free
/// involution and drops the faces that become duplicates.
fn quotient_by_involution(coords: &[Coords], faces: &[[usize; 3]], deck: impl Fn(usize) -> usize) -> Result<Welded> {
    let mut map = vec![usize::MAX; coords.len()];
    let mut out_coords = Vec::with_capacity(coords.len() / 2);
    for v in 0..coords.len() {
        let image = deck(v);
        if image == v || deck(image) != v || (coords[v] - coords[image]).norm() > 1e-9 {
            return Err(Error::WeldFailure(format!("vertex {v} is not paired by the deck map")));
        }
        if map[v] == usize::MAX {
            map[v] = out_coords.len();
            map[image] = out_coords.len();
            out_coords.push(coords[v.min(image)]);
        }
    }
    let mut seen = std::collections::HashSet::new();
    let mut out_faces = Vec::with_capacity(faces.len() / 2);
    for (f, face) in faces.iter().enumerate() {
        let mapped = face.map(|v| map[v]);
        if mapped[0] == mapped[1] || mapped[1] == mapped[2] || mapped[0] == mapped[2] {
            return Err(Error::WeldFailure(format!("face {f} collapsed in the quotient")));
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
        map,
    })
}

pub(crate) fn max_edge_length(mesh: &SurfaceMesh) -> f64 {
    mesh.topology()
        .edges
        .iter()
        .map(|&[a, b]| crate::sphere::chord_or_arccos(mesh.vertex(a), mesh.vertex(b)))
        .fold(0.0, f64::max)
}

fn gcd(a: u32, b: u32) -> u32 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extrinsic::compute_extrinsic;
    use crate::functionals::evaluate_functionals;
    use crate::mesh::euler_characteristic;
    use crate::metric::{angle_defect_curvature, induced_metric, total_area};

    #[test]
    fn patches_are_unit() {
        ParametricPatch::clifford().check_unit(64).unwrap();
        ParametricPatch::lawson(3, 1).check_unit(64).unwrap();
    }

    #[test]
    fn lawson_partials_match_finite_differences() {
        let p = ParametricPatch::lawson(3, 1);
        let h = 1e-6;
        for &(x, y) in &[(0.3, 1.1), (2.0, -0.4), (5.5, 3.0)] {
            let [px, py] = p.partials(x, y).unwrap();
            let fx = (p.eval(x + h, y) - p.eval(x - h, y)) / (2.0 * h);
            let fy = (p.eval(x, y + h) - p.eval(x, y - h)) / (2.0 * h);
            assert!((px - fx).norm() < 1e-8);
            assert!((py - fy).norm() < 1e-8);
        }
    }

    #[test]
    fn clifford_axis_edge_length() {
        let mesh = clifford_torus(16, 16).unwrap();
        let g = induced_metric(&mesh).unwrap();
        let e = mesh.topology().edge_between(0, 16).unwrap();
        let h = TAU / 16.0;
        let exact = ((1.0 + h.cos()) / 2.0).acos();
        assert!((g.length(e) - exact).abs() < 1e-14);
        assert!((g.length(e) - h / 2f64.sqrt()).abs() < h.powi(3));
    }

    #[test]
    fn clifford_is_a_torus() {
        let mesh = clifford_torus(8, 10).unwrap();
        assert_eq!(euler_characteristic(&mesh), 0);
        assert!(mesh.orientable());
        assert!(clifford_torus(4, 10).is_err());
    }

    #[test]
    fn conformal_coordinate_inverts() {
        let c = ConformalCoordinate::new(3, 1);
        for &w in &[0.0, 0.3, 1.0, c.half_period, 2.5, -0.7] {
            let y = c.y(w);
            let n = (y / PI).floor();
            assert!((n * c.half_period + c.w(y - n * PI) - w).abs() < 1e-12);
        }
        // w(π) = (2/3)·K(2√2/3) for τ_{3,1}.
        let (_, kk) = crate::quadrature::elliptic_agm(2.0 * 2f64.sqrt() / 3.0).unwrap();
        assert!((c.half_period - 2.0 / 3.0 * kk).abs() < 1e-12);
    }

    #[test]
    fn tau_11_matches_clifford_class() {
        let t = lawson_tau(1, 1, 64, 64).unwrap();
        let c = clifford_torus(32, 32).unwrap();
        assert_eq!(euler_characteristic(&t), 0);
        let ta = total_area(&t, &induced_metric(&t).unwrap());
        let ca = total_area(&c, &induced_metric(&c).unwrap());
        assert!((ta - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 5e-3);
        assert!((ca - 2.0 * PI * PI).abs() / (2.0 * PI * PI) < 5e-3);
        let rt = evaluate_functionals(&t, &compute_extrinsic(&t).unwrap()).unwrap();
        let rc = evaluate_functionals(&c, &compute_extrinsic(&c).unwrap()).unwrap();
        assert!((rt.willmore - rc.willmore).abs() / rc.willmore < 1e-2);
        assert!((rt.pi_ - rc.pi_).abs() / rc.pi_ < 2e-2);
    }

    #[test]
    fn tau_31_is_a_torus_with_varying_curvature() {
        let t = lawson_tau_with_normals(3, 1, 64, 40).unwrap();
        assert_eq!(euler_characteristic(&t.mesh), 0);
        assert!(t.mesh.orientable());
        assert!(t.max_mean_curvature <= t.certification_bound);
        let s = angle_defect_curvature(&t.mesh, &induced_metric(&t.mesh).unwrap()).unwrap();
        let (lo, hi) = s
            .values()
            .iter()
            .fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
        assert!(hi - lo > 0.5);
        let normals = t.normals.unwrap();
        for (n, p) in normals.iter().zip(t.mesh.vertices()) {
            assert!((n.norm() - 1.0).abs() < 1e-12);
            assert!(n.vec().dot(p.coords()).abs() < 1e-12);
        }
    }

    #[test]
    fn klein_bottle_cases() {
        for (m, k) in [(2, 1), (1, 2)] {
            for (nu, nv) in [(30, 24), (32, 24)] {
                let t = lawson_tau(m, k, nu, nv).unwrap();
                assert_eq!(euler_characteristic(&t), 0);
                assert!(!t.orientable());
            }
        }
    }

    #[test]
    fn sheets_stay_apart_at_the_triple_curve() {
        // With 3 | nu the grid is invariant under x → x + 2π/3, so the
        // three sheets through sin y = 0 share vertex positions.
        let t = lawson_tau(3, 1, 48, 32).unwrap();
        assert_eq!(t.vertex_count(), 48 * 32 / 2);
        assert_eq!(euler_characteristic(&t), 0);
        let p = t.vertex(0);
        let copies = t.vertices().iter().filter(|q| (q.coords() - p).norm() < 1e-12).count();
        assert_eq!(copies, 3);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(lawson_tau(2, 4, 32, 32).is_err());
        assert!(lawson_tau(3, 1, 30, 32).is_err());
        assert!(lawson_tau(0, 1, 32, 32).is_err());
    }
}
