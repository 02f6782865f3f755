//! Validated run configuration, built from parsed arguments before any
//! computation starts.

use std::path::PathBuf;

use crate::error::CliError;

/// What to build, by builder name and its parameters.
#[derive(Clone, Debug, PartialEq)]
pub enum SurfaceSource {
    GreatSphere { level: u32 },
    GeodesicSphere { radius: f64, level: u32 },
    Veronese { level: u32 },
    Clifford { nu: usize, nv: usize },
    Lawson { m: u32, k: u32, nu: usize, nv: usize },
    Bipolar { m: u32, k: u32, nu: usize, nv: usize },
    Xi { config: PathBuf },
    File { path: PathBuf },
}

pub const BUILDERS: [&str; 7] = ["great-sphere", "geodesic-sphere", "veronese", "clifford", "lawson", "bipolar", "xi"];

/// Builder parameters as given on the command line; unset ones fall back
/// to per-builder defaults.
#[derive(Clone, Debug, Default)]
pub struct BuilderArgs {
    pub level: Option<u32>,
    pub radius: Option<f64>,
    pub nu: Option<usize>,
    pub nv: Option<usize>,
    pub m: Option<u32>,
    pub k: Option<u32>,
    pub config: Option<PathBuf>,
}

impl SurfaceSource {
    /// Rejects unknown builder names and incomplete parameter sets.
    pub fn from_builder(name: &str, args: &BuilderArgs) -> Result<Self, CliError> {
        let level = args.level.unwrap_or(4);
        let grid = || (args.nu.unwrap_or(64), args.nv.unwrap_or(64));
        let lawson = || {
            let (nu, nv) = (args.nu.unwrap_or(48), args.nv.unwrap_or(24));
            (args.m.unwrap_or(3), args.k.unwrap_or(1), nu, nv)
        };
        Ok(match name {
            "great-sphere" => Self::GreatSphere { level },
            "geodesic-sphere" => {
                let radius = args.radius.unwrap_or(std::f64::consts::FRAC_PI_4);
                if !(radius > 0.0 && radius < std::f64::consts::PI) {
                    return Err(CliError::Validation(format!("radius {radius} must lie in (0, pi)")));
                }
                Self::GeodesicSphere { radius, level }
            }
            "veronese" => Self::Veronese { level },
            "clifford" => {
                let (nu, nv) = grid();
                Self::Clifford { nu, nv }
            }
            "lawson" => {
                let (m, k, nu, nv) = lawson();
                Self::Lawson { m, k, nu, nv }
            }
            "bipolar" => {
                let (m, k, nu, nv) = lawson();
                Self::Bipolar { m, k, nu, nv }
            }
            "xi" => Self::Xi {
                config: args
                    .config
                    .clone()
                    .ok_or_else(|| CliError::Validation("builder xi needs --config".into()))?,
            },
            other => {
                return Err(CliError::Validation(format!(
                    "unknown builder '{other}' (expected one of: {})",
                    BUILDERS.join(", ")
                )))
            }
        })
    }

    /// Refinement level or grid size, for logs.
    pub fn refinement(&self) -> String {
        match self {
            Self::GreatSphere { level } | Self::GeodesicSphere { level, .. } | Self::Veronese { level } => {
                format!("level {level}")
            }
            Self::Clifford { nu, nv } | Self::Lawson { nu, nv, .. } | Self::Bipolar { nu, nv, .. } => {
                format!("{nu}x{nv}")
            }
            Self::Xi { .. } | Self::File { .. } => "from file".into(),
        }
    }
}

/// Command, surface, tolerances and output location of one run.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub command: &'static str,
    pub surface: SurfaceSource,
    pub tolerances: Vec<(&'static str, f64)>,
    pub output: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: &'static str, surface: SurfaceSource, output: Option<PathBuf>) -> Self {
        Self {
            command,
            surface,
            tolerances: Vec::new(),
            output,
        }
    }

    pub fn tolerance(mut self, name: &'static str, value: f64) -> Self {
        self.tolerances.push((name, value));
        self
    }

    /// Every tolerance must be positive and finite.
    pub fn validate(self) -> Result<Self, CliError> {
        for (name, value) in &self.tolerances {
            if !(value.is_finite() && *value > 0.0) {
                return Err(CliError::Validation(format!("{} --{name} must be positive, got {value}", self.command)));
            }
        }
        Ok(self)
    }
}
