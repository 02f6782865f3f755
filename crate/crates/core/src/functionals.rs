//! Integrated extrinsic functionals and σ-invariants.
//!
//! For a surface in a unit sphere the integrands are
//! Θ = ∫2, Ψ = ∫‖H‖², Π = ∫‖α‖², and
//! W = 2Θ + Ψ, D = Θ + Π, S = W − D.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extrinsic::ExtrinsicField;
use crate::io::fmt_f64;
use crate::mesh::{euler_characteristic, SurfaceMesh};
use crate::metric::pairwise_sum;

/// Values of the functionals on one surface.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct FunctionalReport {
    pub area: f64,
    pub theta: f64,
    pub psi: f64,
    #[serde(rename = "pi")]
    pub pi_: f64,
    pub willmore: f64,
    pub dfun: f64,
    pub total_scalar: f64,
    /// Σ s_i A_i computed directly from the angle defects.
    pub total_scalar_direct: f64,
    pub euler: i64,
    pub orientable: bool,
}

impl FunctionalReport {
    /// Largest violation of the wiring identities.
    pub fn identity_defect(&self) -> f64 {
        let a = (self.total_scalar - (self.willmore - self.dfun)).abs();
        let b = (self.willmore - (2.0 * self.theta + self.psi)).abs();
        let c = (self.dfun - (self.theta + self.pi_)).abs();
        let d = (self.theta - 2.0 * self.area).abs();
        a.max(b).max(c).max(d)
    }

    pub fn sigma(&self) -> Result<SigmaReport> {
        sigma_of_class(self.willmore, self.euler)
    }
}

/// Quadrature of the functionals against the intrinsic dual areas.
pub fn evaluate_functionals(mesh: &SurfaceMesh, ext: &ExtrinsicField) -> Result<FunctionalReport> {
    if ext.vertex_count() != mesh.vertex_count() {
        return Err(Error::FieldMeshMismatch {
            field: ext.vertex_count(),
            mesh: mesh.vertex_count(),
        });
    }
    mesh.require_closed()?;
    let a = &ext.dual_areas;
    let weighted = |f: &dyn Fn(usize) -> f64| -> f64 {
        let terms: Vec<f64> = (0..a.len()).map(|i| f(i) * a[i]).collect();
        pairwise_sum(&terms)
    };
    let area = pairwise_sum(a);
    let theta = 2.0 * area;
    let psi = weighted(&|i| ext.mean_curvature[i].norm().powi(2));
    let pi_ = weighted(&|i| ext.alpha_sq[i]);
    let willmore = 2.0 * theta + psi;
    let dfun = theta + pi_;
    let report = FunctionalReport {
        area,
        theta,
        psi,
        pi_,
        willmore,
        dfun,
        total_scalar: willmore - dfun,
        total_scalar_direct: weighted(&|i| ext.scalar_curvature[i]),
        euler: euler_characteristic(mesh),
        orientable: mesh.orientable(),
    };
    debug_assert!(report.identity_defect() <= 1e-9 * report.willmore.abs().max(1.0));
    Ok(report)
}

/// σ-invariant bookkeeping for a conformal class with Willmore energy `willmore`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SigmaReport {
    /// a([g]) = W/4.
    pub class_area_a: f64,
    /// (4πχ)²/a.
    pub s2a: f64,
    /// 8πχ/√W; carries the sign of χ.
    pub sigma_class: f64,
    pub bounds_ok: bool,
}

/// σ = 8πχ/√W ≤ 4√π.
pub fn sigma_of_class(willmore: f64, euler: i64) -> Result<SigmaReport> {
    if !(willmore > 0.0) {
        return Err(Error::NonpositiveWillmore(willmore));
    }
    let chi = euler as f64;
    let a = willmore / 4.0;
    let sigma = 8.0 * PI * chi / willmore.sqrt();
    Ok(SigmaReport {
        class_area_a: a,
        s2a: (4.0 * PI * chi).powi(2) / a,
        sigma_class: sigma,
        bounds_ok: sigma <= 4.0 * PI.sqrt() + 1e-9,
    })
}

/// One row of the Willmore-range table.
#[derive(Clone, Debug, Serialize)]
pub struct TableRow {
    pub name: String,
    pub report: FunctionalReport,
    pub sigma: SigmaReport,
    /// 16π ≤ W < 32π, with relative slack `tol` at the lower end.
    pub in_range: bool,
    /// Smallest W among rows of the same (χ, orientability) class.
    pub distinguished: bool,
}

/// Willmore-range table with σ ordering checks.
#[derive(Clone, Debug, Serialize)]
pub struct WillmoreTable {
    pub rows: Vec<TableRow>,
    /// σ of the sphere class dominates every other class.
    pub sphere_sigma_maximal: bool,
    /// σ(ℙ²) > σ of every class with χ ≤ 0 in the table.
    pub nonorientable_order_ok: bool,
}

/// Builds the table; rows are grouped by (χ, orientability) and the
/// minimal-W row of each group flagged as its distinguished class.
pub fn willmore_table(reports: &[(String, FunctionalReport)], tol: f64) -> Result<WillmoreTable> {
    let lo = 16.0 * PI;
    let hi = 32.0 * PI;
    let mut rows = Vec::with_capacity(reports.len());
    for (name, report) in reports {
        let w = report.willmore;
        rows.push(TableRow {
            name: name.clone(),
            report: *report,
            sigma: report.sigma()?,
            in_range: w >= lo * (1.0 - tol) && w < hi,
            distinguished: false,
        });
    }
    for i in 0..rows.len() {
        let key = (rows[i].report.euler, rows[i].report.orientable);
        let best = rows
            .iter()
            .enumerate()
            .filter(|(_, r)| (r.report.euler, r.report.orientable) == key)
            .min_by(|a, b| a.1.report.willmore.total_cmp(&b.1.report.willmore))
            .map(|(j, _)| j);
        rows[i].distinguished = best == Some(i);
    }
    let sig = |r: &TableRow| r.sigma.sigma_class;
    let spheres: Vec<&TableRow> = rows.iter().filter(|r| r.report.euler == 2).collect();
    let others: Vec<&TableRow> = rows.iter().filter(|r| r.report.euler != 2).collect();
    let sphere_sigma_maximal = spheres
        .iter()
        .all(|s| others.iter().all(|o| sig(s) > sig(o)));
    let rp2: Vec<&TableRow> = rows
        .iter()
        .filter(|r| r.report.euler == 1 && !r.report.orientable)
        .collect();
    let nonorientable_order_ok = rp2.iter().all(|p| {
        rows.iter()
            .filter(|r| r.report.euler <= 0)
            .all(|o| sig(p) > sig(o))
    });
    Ok(WillmoreTable {
        rows,
        sphere_sigma_maximal,
        nonorientable_order_ok,
    })
}

pub const TABLE_HEADER: &str = "name,area,theta,psi,pi,willmore,dfun,total_scalar,euler,sigma,bounds_ok";

/// One CSV line in [`TABLE_HEADER`] order.
pub fn csv_row(name: &str, r: &FunctionalReport, s: &SigmaReport) -> String {
    format!(
        "{name},{},{},{},{},{},{},{},{},{},{}",
        fmt_f64(r.area),
        fmt_f64(r.theta),
        fmt_f64(r.psi),
        fmt_f64(r.pi_),
        fmt_f64(r.willmore),
        fmt_f64(r.dfun),
        fmt_f64(r.total_scalar),
        r.euler,
        fmt_f64(s.sigma_class),
        s.bounds_ok
    )
}

pub fn table_csv(table: &WillmoreTable) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for row in &table.rows {
        out.push_str(&csv_row(&row.name, &row.report, &row.sigma));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::extrinsic::compute_extrinsic;
    use crate::zoo::{clifford_torus, great_sphere};

    #[test]
    fn sigma_examples() {
        let s = sigma_of_class(16.0 * PI, 2).unwrap();
        assert!((s.sigma_class - 4.0 * PI.sqrt()).abs() < 1e-12);
        assert!(s.bounds_ok);
        assert!((s.s2a - s.sigma_class.powi(2)).abs() < 1e-10);
        let t = sigma_of_class(8.0 * PI * PI, 0).unwrap();
        assert_eq!(t.sigma_class, 0.0);
        let p = sigma_of_class(24.0 * PI, 1).unwrap();
        assert!((p.sigma_class - 4.0 / 6f64.sqrt() * PI.sqrt()).abs() < 1e-12);
        assert!(sigma_of_class(0.0, 2).is_err());
        assert!(sigma_of_class(-1.0, 2).is_err());
    }

    #[test]
    fn negative_euler_keeps_sign() {
        let s = sigma_of_class(90.0, -2).unwrap();
        assert!(s.sigma_class < 0.0);
        assert!((s.s2a - s.sigma_class.powi(2)).abs() < 1e-10);
    }

    #[test]
    fn report_identities() {
        let mesh = clifford_torus(20, 20).unwrap();
        let ext = compute_extrinsic(&mesh).unwrap();
        let r = evaluate_functionals(&mesh, &ext).unwrap();
        assert!(r.identity_defect() < 1e-12);
        assert_eq!(r.euler, 0);
        assert!((r.total_scalar_direct).abs() < 1e-9);
    }

    #[test]
    fn mismatched_field_is_rejected() {
        let a = great_sphere(1);
        let b = great_sphere(2);
        let ext = compute_extrinsic(&b).unwrap();
        assert!(matches!(
            evaluate_functionals(&a, &ext),
            Err(Error::FieldMeshMismatch { .. })
        ));
    }

    #[test]
    fn table_flags() {
        let mesh = great_sphere(3);
        let r = evaluate_functionals(&mesh, &compute_extrinsic(&mesh).unwrap()).unwrap();
        let torus = clifford_torus(32, 32).unwrap();
        let t = evaluate_functionals(&torus, &compute_extrinsic(&torus).unwrap()).unwrap();
        let table = willmore_table(&[("sphere".into(), r), ("clifford".into(), t)], 1e-3).unwrap();
        assert!(table.rows.iter().all(|r| r.in_range && r.distinguished));
        assert!(table.sphere_sigma_maximal);
        let csv = table_csv(&table);
        assert!(csv.starts_with(TABLE_HEADER));
        assert_eq!(csv.lines().count(), 3);
    }
}
