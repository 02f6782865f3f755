//! Mesh files and full-precision number formatting.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mesh::SurfaceMesh;
use crate::sphere::{coords_from_slice, AmbientPoint, MAX_AMBIENT};

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// JSON formatter writing every float with 17 significant digits.
#[derive(Default)]
pub struct ExactFormatter(serde_json::ser::PrettyFormatter<'static>);

impl serde_json::ser::Formatter for ExactFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> std::io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes to pretty JSON with exact floats.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ExactFormatter::default());
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

/// On-disk mesh document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshFile {
    pub name: String,
    pub dimension: usize,
    pub vertices: Vec<Vec<f64>>,
    pub faces: Vec<[usize; 3]>,
    pub boundary_loops: Vec<Vec<usize>>,
    pub orientable: bool,
}

impl From<&SurfaceMesh> for MeshFile {
    fn from(mesh: &SurfaceMesh) -> Self {
        Self {
            name: mesh.name().to_string(),
            dimension: mesh.dimension(),
            vertices: mesh.vertex_rows(),
            faces: mesh.faces().to_vec(),
            boundary_loops: mesh.boundary_loops().to_vec(),
            orientable: mesh.orientable(),
        }
    }
}

impl MeshFile {
    /// Validates and builds the mesh. Stored coordinates must already be unit.
    pub fn into_mesh(self) -> Result<SurfaceMesh> {
        let vertices = self
            .vertices
            .iter()
            .map(|row| {
                if row.len() != self.dimension + 1 || row.len() > MAX_AMBIENT {
                    return Err(crate::Error::DimensionMismatch {
                        expected: self.dimension,
                        found: row.len().saturating_sub(1),
                    });
                }
                AmbientPoint::new(self.dimension, coords_from_slice(row))
            })
            .collect::<Result<Vec<_>>>()?;
        SurfaceMesh::new(
            self.name,
            self.dimension,
            vertices,
            self.faces,
            self.boundary_loops,
            self.orientable,
        )
    }
}

pub fn mesh_to_json(mesh: &SurfaceMesh) -> Result<String> {
    to_json_string(&MeshFile::from(mesh))
}

pub fn mesh_from_json(text: &str) -> Result<SurfaceMesh> {
    serde_json::from_str::<MeshFile>(text)?.into_mesh()
}

pub fn write_mesh(mesh: &SurfaceMesh, path: &Path) -> Result<()> {
    std::fs::write(path, mesh_to_json(mesh)?)?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<SurfaceMesh> {
    mesh_from_json(&std::fs::read_to_string(path)?)
}
