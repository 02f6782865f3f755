//! Command-line front end: build surfaces, measure them, run the
//! uniformization flow and its ambient counterpart, and tabulate results.

pub mod config;
pub mod error;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use spherelab::ambient::{
    conformality_residual, default_epsilon, integral_identity_residual, integrate_palais_flow, ConformalityReport,
    ParticleEnsemble, ParticleTag, TubeField,
};
use spherelab::extrinsic::gauss_equation_residual;
use spherelab::flow::{run_uniformization, FlowTrace};
use spherelab::functionals::{csv_row, table_csv, willmore_table, TABLE_HEADER};
use spherelab::io::{read_mesh, to_json_string, write_mesh};
use spherelab::zoo::{
    assemble_by_reflection, bipolar, clifford_torus, geodesic_sphere, great_sphere, lawson_tau,
    lawson_tau_with_normals, solve_plateau, veronese_rp2, PlateauConfig,
};
use spherelab::{compute_extrinsic, euler_characteristic, evaluate_functionals, SurfaceMesh, VertexField};

pub use config::{BuilderArgs, RunConfig, SurfaceSource};
pub use error::CliError;

/// Particle placement seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_240_401;

#[derive(Debug, Parser)]
#[command(name = "spherelab", version, about = "Discrete minimal surfaces in round spheres")]
pub struct Cli {
    /// Upper bound on worker threads.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a surface and write its mesh file.
    Build(BuildArgs),
    /// Evaluate the functionals and the σ report of a mesh.
    Measure(MeasureArgs),
    /// Run the area-preserving uniformization flow.
    Flow(FlowArgs),
    /// Integrate the ambient gradient flow of an extended conformal factor.
    Ambient(AmbientArgs),
    /// Willmore table over several mesh files.
    Table(TableArgs),
}

#[derive(Debug, Args)]
pub struct BuildArgs {
    /// One of great-sphere, geodesic-sphere, veronese, clifford, lawson, bipolar, xi.
    pub builder: String,
    #[arg(long)]
    pub level: Option<u32>,
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long)]
    pub nu: Option<usize>,
    #[arg(long)]
    pub nv: Option<usize>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub k: Option<u32>,
    /// Plateau configuration for the xi builder.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Mesh file to write; defaults to `<mesh name>.json`.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    pub mesh: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    /// Write here instead of standard output.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlowArgs {
    pub mesh: PathBuf,
    /// Stop once max |s − s̄| falls below this.
    #[arg(long, default_value_t = 1e-4)]
    pub tol: f64,
    #[arg(long, default_value_t = 50_000)]
    pub max_steps: usize,
    /// Receives trace.csv, schedule.json and summary.json.
    #[arg(long, default_value = "flow_out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct AmbientArgs {
    pub mesh: PathBuf,
    /// schedule.json written by `flow`.
    #[arg(long, conflicts_with = "zero")]
    pub schedule: Option<PathBuf>,
    /// Use u ≡ 0 on [0, 1] instead of a schedule.
    #[arg(long)]
    pub zero: bool,
    /// Tube radius in radians; defaults to half the focal-distance estimate.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Time step; defaults to the tube bound.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time; defaults to the end of the schedule.
    #[arg(long)]
    pub t_end: Option<f64>,
    /// Particles on the surface, in the tube and outside it.
    #[arg(long, value_delimiter = ',', default_values_t = [100usize, 100, 100])]
    pub particles: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Receives trajectories.csv and report.json.
    #[arg(long, default_value = "ambient_out")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    #[arg(required = true)]
    pub meshes: Vec<PathBuf>,
    /// Relative slack on the lower Willmore bound.
    #[arg(long, default_value_t = 2e-3)]
    pub tol: f64,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: Format,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// u snapshots in time, as written by `flow`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ScheduleFile {
    pub times: Vec<f64>,
    pub u: Vec<Vec<f64>>,
}

impl ScheduleFile {
    pub fn from_trace(trace: &FlowTrace) -> Self {
        Self {
            times: trace.schedule.iter().map(|(t, _)| *t).collect(),
            u: trace.schedule.iter().map(|(_, u)| u.values().to_vec()).collect(),
        }
    }

    pub fn into_schedule(self) -> Result<Vec<(f64, VertexField)>, CliError> {
        if self.times.len() != self.u.len() {
            return Err(CliError::Validation("schedule times and fields differ in length".into()));
        }
        self.times
            .into_iter()
            .zip(self.u)
            .map(|(t, u)| Ok((t, VertexField::new(u)?)))
            .collect()
    }
}

#[derive(Debug, Serialize)]
struct FlowSummary {
    converged: bool,
    steps: usize,
    final_time: f64,
    final_curvature_dev: f64,
    target_curvature: f64,
    euler: i64,
    initial_area: f64,
    max_area_drift: f64,
    max_gauss_bonnet_error: f64,
    max_willmore_drift: f64,
    lyapunov_nonincreasing: bool,
}

impl FlowSummary {
    fn new(trace: &FlowTrace, converged: bool) -> Self {
        let last = trace.final_sample();
        Self {
            converged,
            steps: last.step,
            final_time: last.time,
            final_curvature_dev: last.curvature_dev,
            target_curvature: trace.target,
            euler: trace.euler,
            initial_area: trace.initial_area,
            max_area_drift: trace.max_area_drift(),
            max_gauss_bonnet_error: trace.max_gauss_bonnet_error(),
            max_willmore_drift: trace.max_willmore_drift(),
            lyapunov_nonincreasing: trace.lyapunov_nonincreasing(),
        }
    }
}

#[derive(Debug, Serialize)]
struct AmbientReport {
    #[serde(flatten)]
    conformality: ConformalityReport,
    integral_identity_residual: f64,
    epsilon: f64,
    dt: f64,
    t_end: f64,
    seed: u64,
    outside_max_displacement: f64,
    surface_max_distance: f64,
    max_surface_correction: f64,
    /// Particles dropped because their closest surface point became ambiguous.
    ambiguous_particles: usize,
}

#[derive(Debug, Serialize)]
struct MeasureRecord {
    name: String,
    functionals: spherelab::FunctionalReport,
    sigma: spherelab::SigmaReport,
    gauss_residual_median: f64,
    max_mean_curvature: f64,
    median_alpha_sq: f64,
}

/// Parses nothing; runs an already parsed command line.
pub fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Validation("--threads must be at least 1".into()));
        }
        // A second call in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Build(a) => cmd_build(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Flow(a) => cmd_flow(a),
        Command::Ambient(a) => cmd_ambient(a),
        Command::Table(a) => cmd_table(a),
    }
}

/// Builds the surface named by `source`.
pub fn build_surface(source: &SurfaceSource) -> Result<SurfaceMesh, CliError> {
    Ok(match source {
        SurfaceSource::GreatSphere { level } => great_sphere(*level),
        SurfaceSource::GeodesicSphere { radius, level } => geodesic_sphere(*radius, *level)?,
        SurfaceSource::Veronese { level } => veronese_rp2(*level)?,
        SurfaceSource::Clifford { nu, nv } => clifford_torus(*nu, *nv)?,
        SurfaceSource::Lawson { m, k, nu, nv } => lawson_tau(*m, *k, *nu, *nv)?,
        SurfaceSource::Bipolar { m, k, nu, nv } => {
            let tau = lawson_tau_with_normals(*m, *k, *nu, *nv)?;
            let normals = tau.normals.as_ref().ok_or(spherelab::Error::NonOrientableSource)?;
            bipolar(&tau.mesh, normals)?.mesh
        }
        SurfaceSource::Xi { config } => {
            let cfg = PlateauConfig::read(config)?;
            let problem = cfg.problem()?;
            let sol = solve_plateau(&problem, cfg.tol, cfg.max_iter)?;
            let mesh = assemble_by_reflection(&sol.mesh, problem.generators(), cfg.expected_genus)?;
            match &cfg.name {
                Some(name) => mesh.with_name(name.clone()),
                None => mesh,
            }
        }
        SurfaceSource::File { path } => read_mesh(path)?,
    })
}

fn load(path: &Path) -> Result<SurfaceMesh, CliError> {
    if !path.exists() {
        return Err(CliError::Io(format!("mesh file {} does not exist", path.display())));
    }
    Ok(read_mesh(path)?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))
}

fn cmd_build(a: BuildArgs) -> Result<(), CliError> {
    let args = BuilderArgs {
        level: a.level,
        radius: a.radius,
        nu: a.nu,
        nv: a.nv,
        m: a.m,
        k: a.k,
        config: a.config,
    };
    let config = RunConfig::new("build", SurfaceSource::from_builder(&a.builder, &args)?, a.out).validate()?;
    let mesh = build_surface(&config.surface)?;
    let out = config.output.clone().unwrap_or_else(|| PathBuf::from(format!("{}.json", mesh.name())));
    write_mesh(&mesh, &out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    println!(
        "{} ({}): chi {} V {} E {} F {} orientable {} -> {}",
        mesh.name(),
        config.surface.refinement(),
        euler_characteristic(&mesh),
        mesh.vertex_count(),
        mesh.edge_count(),
        mesh.face_count(),
        mesh.orientable(),
        out.display()
    );
    Ok(())
}

fn measure_record(mesh: &SurfaceMesh) -> Result<MeasureRecord, CliError> {
    let ext = compute_extrinsic(mesh)?;
    let functionals = evaluate_functionals(mesh, &ext)?;
    let (_, summary) = gauss_equation_residual(mesh)?;
    Ok(MeasureRecord {
        name: mesh.name().to_string(),
        sigma: functionals.sigma()?,
        functionals,
        gauss_residual_median: summary.median_abs,
        max_mean_curvature: ext.max_mean_curvature(),
        median_alpha_sq: ext.median_alpha_sq(),
    })
}

fn cmd_measure(a: MeasureArgs) -> Result<(), CliError> {
    let config = RunConfig::new("measure", SurfaceSource::File { path: a.mesh.clone() }, a.out).validate()?;
    let mesh = load(&a.mesh)?;
    let record = measure_record(&mesh)?;
    let text = match a.format {
        Format::Csv => format!("{TABLE_HEADER}\n{}\n", csv_row(&record.name, &record.functionals, &record.sigma)),
        Format::Json => to_json_string(&record)?,
    };
    emit(config.output.as_deref(), &text)
}

fn cmd_flow(a: FlowArgs) -> Result<(), CliError> {
    let config = RunConfig::new("flow", SurfaceSource::File { path: a.mesh.clone() }, Some(a.out_dir))
        .tolerance("tol", a.tol)
        .validate()?;
    if a.max_steps == 0 {
        return Err(CliError::Validation("flow --max-steps must be at least 1".into()));
    }
    let mesh = load(&a.mesh)?;
    let dir = config.output.expect("flow always has an output directory");
    create_dir(&dir)?;
    let (trace, failure) = match run_uniformization(&mesh, a.tol, a.max_steps) {
        Ok(result) => (result.trace, None),
        Err(spherelab::Error::NonConvergence { curvature_dev, steps, trace }) => (
            *trace,
            Some(CliError::Numerical(format!(
                "flow did not converge: curvature deviation {curvature_dev:e} after {steps} steps"
            ))),
        ),
        Err(e) => return Err(e.into()),
    };
    let summary = FlowSummary::new(&trace, failure.is_none());
    emit(Some(&dir.join("trace.csv")), &trace.to_csv())?;
    emit(Some(&dir.join("schedule.json")), &to_json_string(&ScheduleFile::from_trace(&trace))?)?;
    emit(Some(&dir.join("summary.json")), &to_json_string(&summary)?)?;
    println!(
        "{}: converged {} steps {} curvature_dev {} target {} area_drift {}",
        mesh.name(),
        summary.converged,
        summary.steps,
        spherelab::io::fmt_f64(summary.final_curvature_dev),
        spherelab::io::fmt_f64(summary.target_curvature),
        spherelab::io::fmt_f64(summary.max_area_drift)
    );
    failure.map_or(Ok(()), Err)
}

/// Integrates the ensemble; on an ambiguous closest point, integrates the
/// particles one by one and drops those that fail.
fn integrate_dropping_ambiguous(
    field: &TubeField,
    ensemble: &ParticleEnsemble,
    t_end: f64,
    dt: f64,
) -> Result<(ParticleEnsemble, usize), CliError> {
    match integrate_palais_flow(field, ensemble, t_end, dt) {
        Ok(out) => Ok((out, 0)),
        Err(spherelab::Error::ClosestPointAmbiguous { .. }) => {
            let mut kept = Vec::new();
            let mut dropped = 0;
            for p in &ensemble.particles {
                let single = ParticleEnsemble::new(vec![p.clone()]);
                match integrate_palais_flow(field, &single, t_end, dt) {
                    Ok(out) => kept.push(out),
                    Err(spherelab::Error::ClosestPointAmbiguous { .. }) => dropped += 1,
                    Err(e) => return Err(e.into()),
                }
            }
            let mut merged = ParticleEnsemble::new(Vec::new());
            for out in kept {
                merged.particles.extend(out.particles);
                merged.trajectories.extend(out.trajectories);
                merged.max_surface_correction = merged.max_surface_correction.max(out.max_surface_correction);
            }
            Ok((merged, dropped))
        }
        Err(e) => Err(e.into()),
    }
}

fn cmd_ambient(a: AmbientArgs) -> Result<(), CliError> {
    let mut config = RunConfig::new("ambient", SurfaceSource::File { path: a.mesh.clone() }, Some(a.out_dir));
    if let Some(eps) = a.epsilon {
        config = config.tolerance("epsilon", eps);
    }
    if let Some(dt) = a.dt {
        config = config.tolerance("dt", dt);
    }
    let config = config.validate()?;
    if a.schedule.is_none() && !a.zero {
        return Err(CliError::Validation("ambient needs --schedule or --zero".into()));
    }
    let counts: [usize; 3] = a
        .particles
        .as_slice()
        .try_into()
        .map_err(|_| CliError::Validation("--particles takes three counts: surface,tube,outside".into()))?;
    let mesh = load(&a.mesh)?;
    let schedule = match &a.schedule {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
            serde_json_from_str(&text)?.into_schedule()?
        }
        None => vec![(0.0, VertexField::zeros(mesh.vertex_count())), (1.0, VertexField::zeros(mesh.vertex_count()))],
    };
    let epsilon = match a.epsilon {
        Some(e) => e,
        None => default_epsilon(&mesh)?,
    };
    let field = TubeField::new(mesh.clone(), schedule, epsilon)?;
    let t_end = a.t_end.unwrap_or_else(|| field.end_time());
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(CliError::Validation(format!("--t-end must be finite and non-negative, got {t_end}")));
    }
    // A static field imposes no step bound.
    let dt = a.dt.unwrap_or_else(|| field.max_step().min(t_end.max(f64::MIN_POSITIVE)));
    let ensemble = ParticleEnsemble::sample(&field, counts, a.seed)?;
    let (out, ambiguous) = integrate_dropping_ambiguous(&field, &ensemble, t_end, dt)?;
    let vertices = integrate_palais_flow(&field, &ParticleEnsemble::from_vertices(&mesh), t_end, dt)?;
    let flowed = mesh.with_vertices(vertices.particles.iter().map(|p| p.position).collect())?;
    let u_end = field.u_at(t_end);
    let conformality = conformality_residual(&field, &flowed, &u_end)?;
    let surface_max_distance = out
        .particles
        .iter()
        .filter(|p| p.tag == ParticleTag::OnSurface)
        .map(|p| field.distance_to_surface(p.position.coords()))
        .fold(0.0, f64::max);
    let report = AmbientReport {
        conformality,
        integral_identity_residual: integral_identity_residual(&mesh, &u_end)?,
        epsilon,
        dt,
        t_end,
        seed: a.seed,
        outside_max_displacement: out.max_displacement(ParticleTag::Outside),
        surface_max_distance,
        max_surface_correction: out.max_surface_correction.max(vertices.max_surface_correction),
        ambiguous_particles: ambiguous,
    };
    let dir = config.output.expect("ambient always has an output directory");
    create_dir(&dir)?;
    emit(Some(&dir.join("trajectories.csv")), &out.trajectory_csv())?;
    emit(Some(&dir.join("report.json")), &to_json_string(&report)?)?;
    println!(
        "{}: outside displacement {} surface distance {} median conformality residual {} ambiguous particles {}",
        mesh.name(),
        spherelab::io::fmt_f64(report.outside_max_displacement),
        spherelab::io::fmt_f64(report.surface_max_distance),
        spherelab::io::fmt_f64(report.conformality.median_conformality_residual),
        ambiguous
    );
    Ok(())
}

fn serde_json_from_str(text: &str) -> Result<ScheduleFile, CliError> {
    serde_json::from_str(text).map_err(|e| CliError::Io(format!("malformed schedule: {e}")))
}

fn cmd_table(a: TableArgs) -> Result<(), CliError> {
    let first = a.meshes[0].clone();
    let config = RunConfig::new("table", SurfaceSource::File { path: first }, a.out)
        .tolerance("tol", a.tol)
        .validate()?;
    let mut reports = Vec::with_capacity(a.meshes.len());
    for path in &a.meshes {
        let mesh = load(path)?;
        let ext = compute_extrinsic(&mesh)?;
        reports.push((mesh.name().to_string(), evaluate_functionals(&mesh, &ext)?));
    }
    let table = willmore_table(&reports, a.tol)?;
    let text = match a.format {
        Format::Csv => table_csv(&table),
        Format::Json => to_json_string(&table)?,
    };
    emit(config.output.as_deref(), &text)
}
