//! Area-preserving discrete conformal flow toward constant scalar curvature.
//!
//! Lengths evolve as ℓ̃_ij = e^{(u_i+u_j)/2} ℓ_ij with planar triangles, and
//! the log-factors follow u ← u + dt·(s̄ − s) followed by the additive shift
//! that restores the initial area. Here s̄ = 4πχ/a.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::io::fmt_f64;
use crate::mesh::{euler_characteristic, SurfaceMesh};
use crate::metric::{
    angle_defect_curvature, induced_metric_with, pairwise_sum, total_area, vertex_dual_areas,
    AngleConvention, DiscreteMetric, VertexField,
};

/// Scales every edge by the geometric mean of its endpoint factors e^u.
pub fn conformal_lengths(
    mesh: &SurfaceMesh,
    base: &DiscreteMetric,
    u: &VertexField,
) -> Result<DiscreteMetric> {
    u.check_len(mesh)?;
    let lengths = mesh
        .topology()
        .edges
        .iter()
        .zip(base.lengths())
        .map(|(&[a, b], &l)| (0.5 * (u[a] + u[b])).exp() * l)
        .collect();
    DiscreteMetric::new_listing_violations(mesh, lengths, base.convention())
}

/// One point of the flow.
#[derive(Clone, Debug)]
pub struct FlowState {
    pub u: VertexField,
    pub metric: DiscreteMetric,
    pub curvature: VertexField,
    pub time: f64,
    pub area: f64,
    /// max_i |s_i − s̄|.
    pub curvature_dev: f64,
    /// Σ (s_i − s̄)² A_i.
    pub lyapunov: f64,
    pub total_scalar: f64,
}

impl FlowState {
    fn evaluate(
        mesh: &SurfaceMesh,
        u: VertexField,
        metric: DiscreteMetric,
        time: f64,
        target: f64,
    ) -> Result<Self> {
        let curvature = angle_defect_curvature(mesh, &metric)?;
        let areas = vertex_dual_areas(mesh, &metric);
        let dev: Vec<f64> = curvature.values().iter().map(|s| s - target).collect();
        let curvature_dev = dev.iter().fold(0.0, |m: f64, d| m.max(d.abs()));
        let lyapunov = pairwise_sum(
            &dev.iter()
                .zip(areas.values())
                .map(|(d, a)| d * d * a)
                .collect::<Vec<_>>(),
        );
        let total_scalar = pairwise_sum(
            &curvature
                .values()
                .iter()
                .zip(areas.values())
                .map(|(s, a)| s * a)
                .collect::<Vec<_>>(),
        );
        Ok(Self {
            area: pairwise_sum(&metric.face_areas(mesh)),
            u,
            metric,
            curvature,
            time,
            curvature_dev,
            lyapunov,
            total_scalar,
        })
    }

    /// u ≡ 0 on the induced lengths read with planar triangles.
    pub fn initial(mesh: &SurfaceMesh, target: f64) -> Result<Self> {
        let metric = induced_metric_with(mesh, AngleConvention::Euclidean)?;
        Self::evaluate(mesh, VertexField::zeros(mesh.vertex_count()), metric, 0.0, target)
    }
}

/// One explicit Euler step followed by exact area renormalization to `area`.
pub fn flow_step(
    mesh: &SurfaceMesh,
    base: &DiscreteMetric,
    state: &FlowState,
    dt: f64,
    target: f64,
    area: f64,
) -> Result<FlowState> {
    base.require_convention(AngleConvention::Euclidean)?;
    let stepped: Vec<f64> = state
        .u
        .values()
        .iter()
        .zip(state.curvature.values())
        .map(|(u, s)| u + dt * (target - s))
        .collect();
    let trial = conformal_lengths(mesh, base, &VertexField::new(stepped.clone())?)?;
    let shift = 0.5 * (area / total_area(mesh, &trial)).ln();
    let u = VertexField::new(stepped.into_iter().map(|u| u + shift).collect())?;
    let metric = conformal_lengths(mesh, base, &u)?;
    FlowState::evaluate(mesh, u, metric, state.time + dt, target)
}

/// One accepted step of the trace.
#[derive(Clone, Copy, Debug)]
pub struct FlowSample {
    pub step: usize,
    pub time: f64,
    pub dt: f64,
    pub area: f64,
    pub curvature_dev: f64,
    pub total_scalar: f64,
    pub willmore_proxy: f64,
    pub lyapunov: f64,
    pub min_triangle_slack: f64,
}

/// Time series of a uniformization run and the log-factor schedule.
#[derive(Clone, Debug)]
pub struct FlowTrace {
    pub samples: Vec<FlowSample>,
    /// 4πχ/a.
    pub target: f64,
    pub euler: i64,
    pub initial_area: f64,
    /// (time, u) snapshots, thinned to at most [`MAX_SNAPSHOTS`] entries;
    /// always contains the initial and final states.
    pub schedule: Vec<(f64, VertexField)>,
}

pub const MAX_SNAPSHOTS: usize = 512;

pub const TRACE_HEADER: &str = "step,time,dt,area,curvature_dev,total_scalar,willmore_proxy,lyapunov";

impl FlowTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRACE_HEADER);
        out.push('\n');
        for s in &self.samples {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                s.step,
                fmt_f64(s.time),
                fmt_f64(s.dt),
                fmt_f64(s.area),
                fmt_f64(s.curvature_dev),
                fmt_f64(s.total_scalar),
                fmt_f64(s.willmore_proxy),
                fmt_f64(s.lyapunov)
            ));
        }
        out
    }

    pub fn final_sample(&self) -> &FlowSample {
        self.samples.last().expect("trace has the initial sample")
    }

    /// Largest relative area deviation from the initial area.
    pub fn max_area_drift(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| ((s.area - self.initial_area) / self.initial_area).abs())
            .fold(0.0, f64::max)
    }

    /// Largest |Σ s_i A_i − 4πχ|.
    pub fn max_gauss_bonnet_error(&self) -> f64 {
        let exact = 4.0 * PI * self.euler as f64;
        self.samples
            .iter()
            .map(|s| (s.total_scalar - exact).abs())
            .fold(0.0, f64::max)
    }

    /// Largest relative change of the Willmore proxy 4·area.
    pub fn max_willmore_drift(&self) -> f64 {
        let w0 = self.samples[0].willmore_proxy;
        self.samples
            .iter()
            .map(|s| ((s.willmore_proxy - w0) / w0).abs())
            .fold(0.0, f64::max)
    }

    pub fn lyapunov_nonincreasing(&self) -> bool {
        self.samples
            .windows(2)
            .all(|w| w[1].lyapunov <= w[0].lyapunov * (1.0 + 1e-12) + 1e-300)
    }

    fn record(&mut self, time: f64, u: &VertexField) {
        self.schedule.push((time, u.clone()));
        if self.schedule.len() > MAX_SNAPSHOTS {
            let last = self.schedule.pop().expect("nonempty");
            let thinned: Vec<_> = self.schedule.iter().step_by(2).cloned().collect();
            self.schedule = thinned;
            self.schedule.push(last);
        }
    }

    fn replace_last(&mut self, time: f64, u: &VertexField) {
        if self.schedule.len() > 1 {
            self.schedule.pop();
        }
        self.record(time, u);
    }
}

/// Outcome of a converged run.
#[derive(Clone, Debug)]
pub struct FlowResult {
    pub trace: FlowTrace,
    pub u: VertexField,
    pub state: FlowState,
}

/// Runs the flow until max_i |s_i − s̄| < `tol`.
///
/// Step size starts at 0.1/max|s̄ − s|, halves on a triangle violation or a
/// Lyapunov increase, and grows by 1.2 after 5 consecutive accepted steps.
pub fn run_uniformization(mesh: &SurfaceMesh, tol: f64, max_steps: usize) -> Result<FlowResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance {tol} must be positive")));
    }
    mesh.require_closed()?;
    let base = induced_metric_with(mesh, AngleConvention::Euclidean)?;
    let area = total_area(mesh, &base);
    let euler = euler_characteristic(mesh);
    let target = if euler == 0 { 0.0 } else { 4.0 * PI * euler as f64 / area };
    let mut state = FlowState::initial(mesh, target)?;
    let mut trace = FlowTrace {
        samples: Vec::new(),
        target,
        euler,
        initial_area: area,
        schedule: Vec::new(),
    };
    let sample = |step: usize, dt: f64, s: &FlowState| FlowSample {
        step,
        time: s.time,
        dt,
        area: s.area,
        curvature_dev: s.curvature_dev,
        total_scalar: s.total_scalar,
        willmore_proxy: 4.0 * s.area,
        lyapunov: s.lyapunov,
        min_triangle_slack: s.metric.min_triangle_slack(mesh),
    };
    trace.samples.push(sample(0, 0.0, &state));
    trace.record(0.0, &state.u);
    let mut dt = if state.curvature_dev > 0.0 { 0.1 / state.curvature_dev } else { 0.1 };
    let mut streak = 0;
    let mut steps = 0;
    let mut attempts = 0;
    while state.curvature_dev >= tol {
        if steps >= max_steps || attempts >= 20 * max_steps.max(1) || dt < 1e-300 {
            return Err(Error::NonConvergence {
                curvature_dev: state.curvature_dev,
                steps,
                trace: Box::new(trace),
            });
        }
        attempts += 1;
        match flow_step(mesh, &base, &state, dt, target, area) {
            Ok(next) if next.lyapunov <= state.lyapunov => {
                state = next;
                steps += 1;
                trace.samples.push(sample(steps, dt, &state));
                trace.record(state.time, &state.u);
                streak += 1;
                if streak >= 5 {
                    dt *= 1.2;
                    streak = 0;
                }
            }
            Ok(_) | Err(Error::TriangleViolation { .. }) => {
                dt *= 0.5;
                streak = 0;
            }
            Err(e) => return Err(e),
        }
    }
    trace.replace_last(state.time, &state.u);
    Ok(FlowResult {
        trace,
        u: state.u.clone(),
        state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{clifford_torus, great_sphere, icosahedron};

    #[test]
    fn zero_factor_is_identity() {
        let mesh = great_sphere(1);
        let base = induced_metric_with(&mesh, AngleConvention::Euclidean).unwrap();
        let g = conformal_lengths(&mesh, &base, &VertexField::zeros(mesh.vertex_count())).unwrap();
        assert_eq!(g.lengths(), base.lengths());
    }

    #[test]
    fn constant_factor_scales() {
        let mesh = great_sphere(1);
        let base = induced_metric_with(&mesh, AngleConvention::Euclidean).unwrap();
        let c = 0.3;
        let g = conformal_lengths(&mesh, &base, &VertexField::constant(mesh.vertex_count(), c)).unwrap();
        for (a, b) in g.lengths().iter().zip(base.lengths()) {
            assert!((a - b * c.exp()).abs() < 1e-14);
        }
        let ratio = total_area(&mesh, &g) / total_area(&mesh, &base);
        assert!((ratio - (2.0 * c).exp()).abs() < 1e-12);
    }

    #[test]
    fn violations_are_listed() {
        let mesh = great_sphere(1);
        let base = induced_metric_with(&mesh, AngleConvention::Euclidean).unwrap();
        let mut u = vec![0.0; mesh.vertex_count()];
        let [_, b, c] = mesh.faces()[0];
        u[b] = 5.0;
        u[c] = -5.0;
        match conformal_lengths(&mesh, &base, &VertexField::new(u).unwrap()) {
            Err(Error::TriangleViolation { faces }) => assert!(!faces.is_empty()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn icosahedron_converges_immediately() {
        let r = run_uniformization(&icosahedron(), 1e-8, 10).unwrap();
        assert!(r.trace.samples.len() <= 3);
        assert!((r.trace.target - 4.0 * PI * 2.0 / r.trace.initial_area).abs() < 1e-15);
    }

    #[test]
    fn flat_torus_stays_put() {
        let mesh = clifford_torus(12, 12).unwrap();
        let r = run_uniformization(&mesh, 1e-8, 10).unwrap();
        assert_eq!(r.trace.target, 0.0);
        assert!(r.u.max_abs() < 1e-12);
        let base = induced_metric_with(&mesh, AngleConvention::Euclidean).unwrap();
        let s0 = FlowState::initial(&mesh, 0.0).unwrap();
        let s1 = flow_step(&mesh, &base, &s0, 0.1, 0.0, s0.area).unwrap();
        assert!(s1.u.max_abs() < 1e-12);
    }

    #[test]
    fn sphere_flow_conserves() {
        let r = run_uniformization(&great_sphere(2), 1e-6, 5000).unwrap();
        let t = &r.trace;
        assert!(t.max_area_drift() < 1e-9);
        assert!(t.max_gauss_bonnet_error() < 1e-9);
        assert!(t.max_willmore_drift() < 1e-9);
        assert!(t.lyapunov_nonincreasing());
        assert!((t.target * t.initial_area - 8.0 * PI).abs() < 1e-12);
        assert!((t.target - 2.0).abs() < 5e-2);
        let csv = t.to_csv();
        assert!(csv.starts_with(TRACE_HEADER));
        assert_eq!(csv.lines().count(), t.samples.len() + 1);
    }

    #[test]
    fn spherical_base_is_rejected() {
        let mesh = great_sphere(0);
        let base = crate::metric::induced_metric(&mesh).unwrap();
        let s0 = FlowState::initial(&mesh, 0.0).unwrap();
        assert!(matches!(
            flow_step(&mesh, &base, &s0, 0.1, 0.0, 1.0),
            Err(Error::ConventionMismatch(_))
        ));
    }
}
