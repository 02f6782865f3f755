//! Primitives on the round unit sphere S^d ⊂ R^{d+1}.
//!
//! Every point carries its sphere dimension `d`. Coordinates live in a
//! fixed-size 6-vector; entries past index `d` are always zero, which keeps
//! arithmetic allocation-free for d ≤ 5. Combining objects of different
//! dimension panics: it is a programming error, not a recoverable one.

use nalgebra::{SMatrix, SVector};

use crate::error::{Error, Result};

/// Largest supported ambient Euclidean dimension (S^5 ⊂ R^6).
pub const MAX_AMBIENT: usize = 6;

/// Zero-padded ambient coordinates.
pub type Coords = SVector<f64, MAX_AMBIENT>;

/// Zero-padded ambient linear map.
pub type AmbientMatrix = SMatrix<f64, MAX_AMBIENT, MAX_AMBIENT>;

const UNIT_TOL: f64 = 1e-12;
const TANGENT_TOL: f64 = 1e-10;
const SMALL_ARC: f64 = 1e-4;

fn check_dim(dim: usize) -> Result<()> {
    if (1..MAX_AMBIENT).contains(&dim) {
        Ok(())
    } else {
        Err(Error::UnsupportedDimension(dim))
    }
}

/// Builds padded coordinates from a slice of at most six reals.
pub fn coords_from_slice(values: &[f64]) -> Coords {
    assert!(values.len() <= MAX_AMBIENT, "too many coordinates");
    let mut c = Coords::zeros();
    c.as_mut_slice()[..values.len()].copy_from_slice(values);
    c
}

/// A point of S^d.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AmbientPoint {
    dim: usize,
    coords: Coords,
}

impl AmbientPoint {
    /// Wraps coordinates that are already unit length (within 1e-12).
    pub fn new(dim: usize, coords: Coords) -> Result<Self> {
        check_dim(dim)?;
        if !is_padded(&coords, dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: MAX_AMBIENT - 1,
            });
        }
        let deviation = (coords.norm() - 1.0).abs();
        if deviation > UNIT_TOL {
            return Err(Error::NotUnit { deviation });
        }
        Ok(Self { dim, coords })
    }

    /// Normalizes without validation; `coords` must be nonzero and padded.
    pub(crate) fn normalized_unchecked(dim: usize, coords: Coords) -> Self {
        Self {
            dim,
            coords: coords / coords.norm(),
        }
    }

    /// The basis vector e_{index} of S^dim.
    pub fn basis(dim: usize, index: usize) -> Self {
        assert!(index <= dim && dim < MAX_AMBIENT);
        let mut coords = Coords::zeros();
        coords[index] = 1.0;
        Self { dim, coords }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coords(&self) -> &Coords {
        &self.coords
    }

    /// The d+1 meaningful coordinates.
    pub fn as_slice(&self) -> &[f64] {
        &self.coords.as_slice()[..self.dim + 1]
    }

    pub fn antipode(&self) -> Self {
        Self {
            dim: self.dim,
            coords: -self.coords,
        }
    }
}

/// A vector tangent to S^d at `base`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TangentVector {
    base: AmbientPoint,
    vec: Coords,
}

impl TangentVector {
    /// Checks ⟨vec, base⟩ = 0 within 1e-10.
    pub fn new(base: AmbientPoint, vec: Coords) -> Result<Self> {
        let inner = vec.dot(&base.coords);
        if inner.abs() > TANGENT_TOL {
            return Err(Error::NotTangent { inner });
        }
        if !is_padded(&vec, base.dim) {
            return Err(Error::DimensionMismatch {
                expected: base.dim,
                found: MAX_AMBIENT - 1,
            });
        }
        Ok(Self { base, vec })
    }

    /// Orthogonal projection of an arbitrary ambient vector onto T_base S^d.
    pub fn project(base: AmbientPoint, v: &Coords) -> Self {
        let p = base.coords;
        let mut vec = v - p * v.dot(&p);
        for c in vec.iter_mut().skip(base.dim + 1) {
            *c = 0.0;
        }
        Self { base, vec }
    }

    pub fn zero(base: AmbientPoint) -> Self {
        Self {
            base,
            vec: Coords::zeros(),
        }
    }

    pub fn base(&self) -> &AmbientPoint {
        &self.base
    }

    pub fn vec(&self) -> &Coords {
        &self.vec
    }

    pub fn norm(&self) -> f64 {
        self.vec.norm()
    }

    pub fn dot(&self, other: &TangentVector) -> f64 {
        assert_same_dim(self.base.dim, other.base.dim);
        self.vec.dot(&other.vec)
    }
}

fn assert_same_dim(a: usize, b: usize) {
    assert_eq!(a, b, "mixing sphere dimensions S^{a} and S^{b}");
}

/// Normalizes `v` onto S^{len-1}.
pub fn project_to_sphere(v: &[f64]) -> Result<AmbientPoint> {
    if v.is_empty() || v.len() > MAX_AMBIENT {
        return Err(Error::UnsupportedDimension(v.len().saturating_sub(1)));
    }
    let c = coords_from_slice(v);
    let norm = c.norm();
    if !(norm > 1e-14) {
        return Err(Error::ZeroVector { norm });
    }
    let dim = v.len() - 1;
    check_dim(dim)?;
    Ok(AmbientPoint {
        dim,
        coords: c / norm,
    })
}

/// Great-circle distance in [0, π].
///
/// Short arcs use the chord length, where arccos loses roughly half the
/// significant digits.
pub fn geodesic_distance(p: &AmbientPoint, q: &AmbientPoint) -> f64 {
    assert_same_dim(p.dim, q.dim);
    chord_or_arccos(&p.coords, &q.coords)
}

pub(crate) fn chord_or_arccos(p: &Coords, q: &Coords) -> f64 {
    let d = p.dot(q).clamp(-1.0, 1.0).acos();
    if d < SMALL_ARC {
        2.0 * (0.5 * (p - q).norm()).min(1.0).asin()
    } else {
        d
    }
}

/// Inverse of [`exp_map`]: the initial velocity of the unit-time geodesic from p to q.
pub fn log_map(p: &AmbientPoint, q: &AmbientPoint) -> Result<TangentVector> {
    assert_same_dim(p.dim, q.dim);
    let distance = geodesic_distance(p, q);
    if distance >= std::f64::consts::PI - 1e-8 {
        return Err(Error::AntipodalPair { distance });
    }
    Ok(TangentVector {
        base: *p,
        vec: log_coords(&p.coords, &q.coords, distance),
    })
}

pub(crate) fn log_coords(p: &Coords, q: &Coords, distance: f64) -> Coords {
    let v = q - p * p.dot(q);
    let n = v.norm();
    if n == 0.0 || distance == 0.0 {
        Coords::zeros()
    } else {
        v * (distance / n)
    }
}

/// Riemannian exponential: follows the great circle from p with velocity v for unit time.
pub fn exp_map(p: &AmbientPoint, v: &TangentVector) -> AmbientPoint {
    assert_same_dim(p.dim, v.base.dim);
    let theta = v.vec.norm();
    if theta == 0.0 {
        return *p;
    }
    let c = p.coords * theta.cos() + v.vec * (theta.sin() / theta);
    AmbientPoint::normalized_unchecked(p.dim, c)
}

/// Splits `v` into its part in span(frame) and the orthogonal remainder.
pub fn split_tangent_normal(
    frame: &[TangentVector],
    v: &TangentVector,
) -> Result<(TangentVector, TangentVector)> {
    let k = frame.len();
    for f in frame {
        assert_same_dim(f.base.dim, v.base.dim);
    }
    let mut gram = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut rhs = nalgebra::DVector::<f64>::zeros(k);
    for i in 0..k {
        rhs[i] = frame[i].vec.dot(&v.vec);
        for j in 0..k {
            gram[(i, j)] = frame[i].vec.dot(&frame[j].vec);
        }
    }
    let gram_det = if k == 0 { 1.0 } else { gram.determinant() };
    if gram_det < 1e-12 {
        return Err(Error::DegenerateFrame { gram_det });
    }
    let coeffs = gram
        .lu()
        .solve(&rhs)
        .ok_or(Error::DegenerateFrame { gram_det })?;
    let mut tangential = Coords::zeros();
    for i in 0..k {
        tangential += frame[i].vec * coeffs[i];
    }
    let normal = v.vec - tangential;
    Ok((
        TangentVector {
            base: v.base,
            vec: tangential,
        },
        TangentVector {
            base: v.base,
            vec: normal,
        },
    ))
}

/// An orthogonal map of R^{d+1}, acting on S^d.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SphereIsometry {
    dim: usize,
    matrix: AmbientMatrix,
}

impl SphereIsometry {
    /// Validates orthogonality of the leading (d+1)×(d+1) block within 1e-12.
    pub fn new(dim: usize, matrix: AmbientMatrix) -> Result<Self> {
        check_dim(dim)?;
        let n = dim + 1;
        let mut m = AmbientMatrix::zeros();
        m.view_mut((0, 0), (n, n))
            .copy_from(&matrix.view((0, 0), (n, n)));
        let deviation = orthogonality_deviation(&m, n);
        if deviation > 1e-12 {
            return Err(Error::NotOrthogonal { deviation });
        }
        Ok(Self { dim, matrix: m })
    }

    /// Builds from row-major rows of length d+1.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if !(2..=MAX_AMBIENT).contains(&n) || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(format!(
                "isometry must be a square matrix of size 2..=6, got {n} rows"
            )));
        }
        let mut m = AmbientMatrix::zeros();
        for (i, row) in rows.iter().enumerate() {
            for (j, &x) in row.iter().enumerate() {
                m[(i, j)] = x;
            }
        }
        Self::new(n - 1, m)
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = AmbientMatrix::zeros();
        for i in 0..=dim {
            m[(i, i)] = 1.0;
        }
        Self { dim, matrix: m }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &AmbientMatrix {
        &self.matrix
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        let n = self.dim + 1;
        (0..n)
            .map(|i| (0..n).map(|j| self.matrix[(i, j)]).collect())
            .collect()
    }

    pub fn apply(&self, p: &AmbientPoint) -> AmbientPoint {
        assert_same_dim(self.dim, p.dim);
        AmbientPoint::normalized_unchecked(self.dim, self.matrix * p.coords)
    }

    pub fn apply_coords(&self, c: &Coords) -> Coords {
        self.matrix * c
    }

    pub fn apply_tangent(&self, v: &TangentVector) -> TangentVector {
        TangentVector {
            base: self.apply(&v.base),
            vec: self.matrix * v.vec,
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &SphereIsometry) -> SphereIsometry {
        assert_same_dim(self.dim, other.dim);
        SphereIsometry {
            dim: self.dim,
            matrix: self.matrix * other.matrix,
        }
    }

    pub fn inverse(&self) -> SphereIsometry {
        SphereIsometry {
            dim: self.dim,
            matrix: self.matrix.transpose(),
        }
    }

    /// Largest entrywise difference.
    pub fn distance(&self, other: &SphereIsometry) -> f64 {
        (self.matrix - other.matrix).abs().max()
    }

    pub fn determinant(&self) -> f64 {
        let n = self.dim + 1;
        self.matrix
            .view((0, 0), (n, n))
            .clone_owned()
            .determinant()
    }
}

fn is_padded(c: &Coords, dim: usize) -> bool {
    c.iter().skip(dim + 1).all(|&x| x == 0.0)
}

fn orthogonality_deviation(m: &AmbientMatrix, n: usize) -> f64 {
    let prod = m.transpose() * m;
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - target).abs());
        }
    }
    dev
}

/// The isometry fixing the great circle span(basis) ∩ S^d pointwise and
/// negating its orthogonal complement (rotation by π about that circle).
pub fn reflection_across_great_circle(dim: usize, basis: [Coords; 2]) -> Result<SphereIsometry> {
    check_dim(dim)?;
    let [a, b] = basis;
    let deviation = (a.norm_squared() - 1.0)
        .abs()
        .max((b.norm_squared() - 1.0).abs())
        .max(a.dot(&b).abs());
    if deviation > 1e-10 {
        return Err(Error::NonOrthonormalBasis { deviation });
    }
    if !is_padded(&a, dim) || !is_padded(&b, dim) {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: MAX_AMBIENT - 1,
        });
    }
    let mut m = (a * a.transpose() + b * b.transpose()) * 2.0;
    for i in 0..=dim {
        m[(i, i)] -= 1.0;
    }
    Ok(SphereIsometry { dim, matrix: m })
}

/// Unit vector orthogonal to three vectors of R^4, oriented so that
/// det[a, b, c, n] > 0.
pub fn cross4(a: &Coords, b: &Coords, c: &Coords) -> Coords {
    let m = |i: usize, j: usize, k: usize| {
        a[i] * (b[j] * c[k] - b[k] * c[j]) - a[j] * (b[i] * c[k] - b[k] * c[i])
            + a[k] * (b[i] * c[j] - b[j] * c[i])
    };
    // Cofactor expansion of det[a, b, c, e_l] along the last column.
    coords_from_slice(&[-m(1, 2, 3), m(0, 2, 3), -m(0, 1, 3), m(0, 1, 2)])
}
