//! JSON documents: input networks, solved fields and tiled surfaces.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::network::PlanarComplex;
use crate::solver::{self, HarmonicField, SolveStats};
use crate::tiler::FlatSurface;

pub const SCHEMA_VERSION: u32 = 1;

/// Per-edge conductances, or one value for every edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Conductance {
    Uniform(f64),
    PerEdge(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InputDocument {
    pub schema_version: u32,
    pub vertices: Vec<Point>,
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<Vec<usize>>,
    pub outer_boundary: Vec<usize>,
    pub inner_boundaries: Vec<Vec<usize>>,
    pub conductance: Conductance,
    pub k: f64,
}

impl InputDocument {
    pub fn from_complex(complex: &PlanarComplex, k: f64) -> Self {
        InputDocument {
            schema_version: SCHEMA_VERSION,
            vertices: complex.coords.clone(),
            edges: complex.edges().to_vec(),
            faces: complex.faces().to_vec(),
            outer_boundary: complex.outer().to_vec(),
            inner_boundaries: complex.inner().to_vec(),
            conductance: Conductance::PerEdge(complex.conductance.clone()),
            k,
        }
    }

    /// Builds the complex and runs full validation.
    pub fn to_complex(&self) -> Result<PlanarComplex> {
        let cond = match &self.conductance {
            Conductance::Uniform(c) => vec![*c; self.edges.len()],
            Conductance::PerEdge(v) => v.clone(),
        };
        if !(self.k.is_finite() && self.k > 0.0) {
            return Err(Error::Malformed(format!("k = {} must be positive and finite", self.k)));
        }
        let complex = PlanarComplex::new(
            self.vertices.clone(),
            self.edges.clone(),
            self.faces.clone(),
            self.outer_boundary.clone(),
            self.inner_boundaries.clone(),
            cond,
        )?;
        complex.validate().into_result()?;
        Ok(complex)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDocument {
    pub schema_version: u32,
    pub k: f64,
    pub values: Vec<f64>,
    pub residual: f64,
    pub energy: f64,
    /// Sum of the Laplacian over each boundary cycle, outer first.
    pub boundary_fluxes: Vec<f64>,
    pub stats: SolveStats,
}

impl FieldDocument {
    pub fn new(complex: &PlanarComplex, field: &HarmonicField) -> Self {
        FieldDocument {
            schema_version: SCHEMA_VERSION,
            k: field.k(),
            values: field.values.clone(),
            residual: field.residual,
            energy: solver::energy(&field.values, complex),
            boundary_fluxes: solver::boundary_fluxes(&field.values, complex),
            stats: field.stats.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceDocument {
    pub schema_version: u32,
    pub mode: String,
    pub k: f64,
    /// Size of the input the surface was built from.
    pub vertices: usize,
    pub edges: usize,
    pub surface: FlatSurface,
}

impl SurfaceDocument {
    /// Index ranges and the shape of the gluing tree. Geometric identities
    /// are left to the audit.
    pub fn check_structure(&self) -> Result<()> {
        let s = &self.surface;
        let n = s.cylinders.len();
        let bad = |msg: String| Err(Error::Malformed(msg));
        if n == 0 {
            return bad("surface has no cylinders".into());
        }
        for (i, c) in s.cylinders.iter().enumerate() {
            if c.id != i {
                return bad(format!("cylinder at position {i} has id {}", c.id));
            }
            if !(c.circumference.is_finite() && c.circumference > 0.0 && c.height.is_finite() && c.height > 0.0) {
                return bad(format!("cylinder {i} has circumference {} and height {}", c.circumference, c.height));
            }
            match (&c.glue, i) {
                (None, 0) => {}
                (Some(g), _) if g.parent < i => {}
                _ => return bad(format!("cylinder {i} is not glued under an earlier cylinder")),
            }
            for r in c.rects.iter().chain(&c.flat_rects) {
                if r.cylinder != i || r.edge >= self.edges {
                    return bad(format!("rectangle of edge {} in cylinder {i} has bad ids", r.edge));
                }
                if ![r.s, r.y, r.width, r.height].iter().all(|x| x.is_finite()) {
                    return bad(format!("rectangle of edge {} in cylinder {i} is not finite", r.edge));
                }
            }
        }
        for p in &s.singular_points {
            if p.vertex >= self.vertices || p.cylinder >= n || p.children.iter().any(|&c| c >= n) {
                return bad(format!("singular point at vertex {} has bad ids", p.vertex));
            }
        }
        Ok(())
    }
}

fn check_version(v: u32, what: &str) -> Result<()> {
    if v == SCHEMA_VERSION {
        Ok(())
    } else {
        Err(Error::Malformed(format!("{what} has schema_version {v}, expected {SCHEMA_VERSION}")))
    }
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Malformed(e.to_string()))
}

pub fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("documents serialize");
    s.push('\n');
    s
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Malformed(format!("{}: {e}", path.display())))
}

pub fn read_input(path: &Path) -> Result<InputDocument> {
    let doc: InputDocument = from_json(&read_text(path)?)?;
    check_version(doc.schema_version, "input")?;
    Ok(doc)
}

pub fn read_surface(path: &Path) -> Result<SurfaceDocument> {
    let doc: SurfaceDocument = from_json(&read_text(path)?)?;
    check_version(doc.schema_version, "surface")?;
    doc.check_structure()?;
    Ok(doc)
}

pub fn read_field(path: &Path) -> Result<FieldDocument> {
    let doc: FieldDocument = from_json(&read_text(path)?)?;
    check_version(doc.schema_version, "field")?;
    Ok(doc)
}

pub fn write<T: Serialize>(path: &Path, doc: &T) -> Result<()> {
    std::fs::write(path, to_json(doc)).map_err(|e| Error::Malformed(format!("cannot write {}: {e}", path.display())))
}
