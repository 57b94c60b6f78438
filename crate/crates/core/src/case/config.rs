//! The case document as written on disk and its conversion to solver
//! inputs. Quantities stay strings until [`CaseFile::resolve`], which
//! collects every problem together with its key path.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::units::{parse_quantity, Dimension};
use crate::error::{Error, Result};
use crate::fv::{ConvectionScheme, Scheme, ThermalCondition, TimeScheme, VelocityCondition};
use crate::geometry::RigidMotion;
use crate::mesh::{Adjacency, AnnulusSpec, BoxSpec, PatchKind};
use crate::rheology::{ArrheniusShift, MaterialProps, PowerLawModel};
use crate::solver::{Physics, SolverConfig};
use crate::stencil::{Enrichment, RadiusLimit, StencilCriteria};
use crate::Vec3;

type Quantity = String;
type Vector = [String; 3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseFile {
    pub mesh: MeshSection,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub surfaces: Vec<SurfaceSection>,
    pub material: MaterialSection,
    pub rheology: RheologySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<SourcesSection>,
    pub initial: InitialSection,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub boundary: BTreeMap<String, BoundarySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ib: Option<IbSection>,
    pub solver: SolverSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MeshSection {
    /// Path of an `ibflow-mesh` file, relative to the case file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// `box` or `annulus`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub divisions: Option<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic: Option<[bool; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_radius: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_radius: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radial: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuthal: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axial: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centre: Option<Vector>,
    /// Patch name to `wall`, `inflow`, `outflow` or `symmetry`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub patches: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MotionSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_velocity: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<Vector>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfaceSection {
    pub name: String,
    /// `cylinder`, `sphere`, `box` or `stl`.
    pub shape: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centre: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Quantity>,
    /// Axial range of a cylinder measured from its centre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extent: Option<[Quantity; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subdivisions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub invert: bool,
    /// Displace the surface with its motion instead of only imposing the
    /// wall velocity.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub moves: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MaterialSection {
    pub density: Quantity,
    pub specific_heat: Quantity,
    pub conductivity: Quantity,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RheologySection {
    pub consistency: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shear_rate_floor: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viscosity_min: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viscosity_max: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation_temperature: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_temperature: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SourcesSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub body_force: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heat_source: Option<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vector>,
    pub temperature: Quantity,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BoundarySection {
    /// `fixed`, `zero_gradient` or `symmetry`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion: Option<MotionSection>,
    /// `insulated` or a temperature.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IbSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_level: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius_diameters: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_angle: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_cap: Option<usize>,
    /// `face` or `vertex`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub adjacency: Option<String>,
    /// `never`, `on_starvation` or `always`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enrichment: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverSection {
    pub dt: Quantity,
    pub end_time: Quantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_correctors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ib_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub velocity_relaxation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pressure_relaxation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature_relaxation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relax_final: Option<bool>,
    /// Pressure diffusivity from `D − Σ a_nb` instead of `D`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistent: Option<bool>,
    /// `upwind` or `central_limited`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convection: Option<String>,
    /// `euler` or `bdf2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_scheme: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dim: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve_temperature: Option<bool>,
    /// Relative velocity change per step below which the run stops.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steady_tolerance: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stall_window: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProbeSection {
    pub name: String,
    pub point: Vector,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SectionAverageSection {
    pub name: String,
    /// One of [`SectionField`]'s names.
    pub field: String,
    /// `x`, `y` or `z`.
    pub axis: String,
    pub stations: Vec<Quantity>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SurfaceReportSection {
    pub surface: String,
    /// Origin of the sampling rays.
    pub centre: Vector,
    /// Normal of the plane the rays sweep.
    pub axis: [f64; 3],
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<String>,
    /// Steps between VTK snapshots; 0 keeps only the first and last.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vtk_interval: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub probes: Vec<ProbeSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sections: Vec<SectionAverageSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub surface_reports: Vec<SurfaceReportSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchmarkSection {
    /// `taylor_couette` or `power_law_channel`.
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centre: Option<Vector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner_radius: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer_radius: Option<Quantity>,
    /// Rate of the inner cylinder; the outer one is at rest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angular_velocity: Option<Quantity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<Quantity>,
    /// Axis along which the flow is driven.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flow_axis: Option<String>,
    /// Axis normal to the channel walls.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_axis: Option<String>,
}

impl CaseFile {
    /// Parses a case document. Unknown keys are errors, all reported at once.
    pub fn parse(text: &str) -> Result<CaseFile> {
        let de = toml::Deserializer::new(text);
        let mut unknown = Vec::new();
        let parsed: std::result::Result<CaseFile, _> = serde_ignored::deserialize(de, |path| {
            unknown.push(format!("{path}: unknown key"));
        });
        match parsed {
            Ok(c) if unknown.is_empty() => Ok(c),
            Ok(_) => Err(Error::Config(unknown)),
            Err(e) => {
                unknown.push(e.to_string().trim().replace('\n', " "));
                Err(Error::Config(unknown))
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(vec![e.to_string()]))
    }

    /// Converts to SI inputs; `base` resolves relative file paths.
    pub fn resolve(&self, base: &Path) -> Result<Case> {
        let mut e = Errors::default();
        let mesh = resolve_mesh(&self.mesh, base, &mut e);
        let surfaces = self
            .surfaces
            .iter()
            .enumerate()
            .map(|(i, s)| resolve_surface(s, &format!("surfaces[{i}]"), base, &mut e))
            .collect::<Vec<_>>();
        let mut names = std::collections::BTreeSet::new();
        for s in &self.surfaces {
            if !names.insert(s.name.as_str()) {
                e.push("surfaces", format!("duplicate surface name '{}'", s.name));
            }
        }
        let physics = resolve_physics(self, &mut e);
        let initial_velocity =
            self.initial.velocity.as_ref().map_or(Vec3::zeros(), |v| e.vector("initial.velocity", v, Dimension::Velocity));
        let initial_temperature = e.positive("initial.temperature", &self.initial.temperature, Dimension::Temperature);
        let boundary = self
            .boundary
            .iter()
            .map(|(name, b)| (name.clone(), resolve_boundary(b, &format!("boundary.{name}"), &mut e)))
            .collect();
        let (criteria, degree) = resolve_ib(self.ib.as_ref(), &mut e);
        let solver = resolve_solver(&self.solver, degree, &mut e);
        let output = resolve_output(self.output.as_ref(), &self.surfaces, base, &mut e);
        let benchmark = self.benchmark.as_ref().map(|b| resolve_benchmark(b, &mut e));
        if let Some(Benchmark::PowerLawChannel { .. }) = benchmark {
            if physics.body_force == Vec3::zeros() {
                e.push("benchmark", "power_law_channel needs a non-zero sources.body_force".into());
            }
        }
        e.finish()?;
        Ok(Case {
            mesh,
            surfaces,
            physics,
            initial_velocity,
            initial_temperature,
            boundary,
            criteria,
            solver,
            output,
            benchmark,
        })
    }
}

/// Error collector keyed by path.
#[derive(Default)]
struct Errors(Vec<String>);

impl Errors {
    fn push(&mut self, path: &str, msg: String) {
        self.0.push(format!("{path}: {msg}"));
    }

    fn quantity(&mut self, path: &str, text: &str, dim: Dimension) -> f64 {
        parse_quantity(text, dim).unwrap_or_else(|m| {
            self.push(path, m);
            f64::NAN
        })
    }

    fn positive(&mut self, path: &str, text: &str, dim: Dimension) -> f64 {
        let v = self.quantity(path, text, dim);
        if v.is_finite() && v <= 0.0 {
            self.push(path, format!("must be positive, got {v}"));
        }
        v
    }

    fn vector(&mut self, path: &str, v: &Vector, dim: Dimension) -> Vec3 {
        let c: Vec<f64> = v.iter().enumerate().map(|(i, s)| self.quantity(&format!("{path}[{i}]"), s, dim)).collect();
        Vec3::new(c[0], c[1], c[2])
    }

    fn required<'a, T>(&mut self, path: &str, v: &'a Option<T>) -> Option<&'a T> {
        if v.is_none() {
            self.push(path, "is required".into());
        }
        v.as_ref()
    }

    fn choice<T: Copy>(&mut self, path: &str, text: &str, options: &[(&str, T)]) -> Option<T> {
        let hit = options.iter().find(|o| o.0 == text).map(|o| o.1);
        if hit.is_none() {
            let names: Vec<&str> = options.iter().map(|o| o.0).collect();
            self.push(path, format!("'{text}' is not one of {}", names.join(", ")));
        }
        hit
    }

    fn finish(self) -> Result<()> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self.0))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Box(BoxSpec),
    Annulus(AnnulusSpec),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshDef {
    pub source: MeshSource,
    pub patch_kinds: BTreeMap<String, PatchKind>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Cylinder { centre: Vec3, axis: Vec3, radius: f64, extent: [f64; 2], segments: usize },
    Sphere { centre: Vec3, radius: f64, subdivisions: usize },
    Cuboid { min: Vec3, max: Vec3 },
    Stl(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDef {
    pub name: String,
    pub shape: Shape,
    pub invert: bool,
    pub moves: bool,
    pub motion: RigidMotion,
    pub temperature: Option<f64>,
}

/// Overrides of the generator defaults for one patch.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryDef {
    pub velocity: Option<VelocityCondition>,
    pub thermal: Option<ThermalCondition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionField {
    VelocityX,
    VelocityY,
    VelocityZ,
    Speed,
    Pressure,
    Temperature,
    Viscosity,
    ShearRate,
    /// Integral of the axial velocity over the cut rather than its mean.
    FlowRate,
}

pub const SECTION_FIELDS: &[(&str, SectionField)] = &[
    ("u_x", SectionField::VelocityX),
    ("u_y", SectionField::VelocityY),
    ("u_z", SectionField::VelocityZ),
    ("speed", SectionField::Speed),
    ("p", SectionField::Pressure),
    ("T", SectionField::Temperature),
    ("mu", SectionField::Viscosity),
    ("shear_rate", SectionField::ShearRate),
    ("flow_rate", SectionField::FlowRate),
];

#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub point: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionDef {
    pub name: String,
    pub field: SectionField,
    pub axis: usize,
    pub stations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceReportDef {
    pub surface: String,
    pub centre: Vec3,
    pub axis: Vec3,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputDef {
    pub directory: PathBuf,
    pub vtk_interval: usize,
    pub probes: Vec<Probe>,
    pub sections: Vec<SectionDef>,
    pub surface_reports: Vec<SurfaceReportDef>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Benchmark {
    TaylorCouette { centre: Vec3, inner_radius: f64, outer_radius: f64, angular_velocity: f64 },
    PowerLawChannel { centre: Vec3, half_width: f64, flow_axis: usize, wall_axis: usize },
}

/// A validated case in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Case {
    pub mesh: MeshDef,
    pub surfaces: Vec<SurfaceDef>,
    pub physics: Physics,
    pub initial_velocity: Vec3,
    pub initial_temperature: f64,
    pub boundary: BTreeMap<String, BoundaryDef>,
    pub criteria: StencilCriteria,
    pub solver: SolverConfig,
    pub output: OutputDef,
    pub benchmark: Option<Benchmark>,
}

const AXES: &[(&str, usize)] = &[("x", 0), ("y", 1), ("z", 2)];

fn resolve_mesh(m: &MeshSection, base: &Path, e: &mut Errors) -> MeshDef {
    let patch_kinds = m
        .patches
        .iter()
        .filter_map(|(name, kind)| match PatchKind::parse(kind) {
            Some(k) => Some((name.clone(), k)),
            None => {
                e.push(&format!("mesh.patches.{name}"), format!("'{kind}' is not one of wall, inflow, outflow, symmetry"));
                None
            }
        })
        .collect();
    let placeholder = MeshSource::File(PathBuf::new());
    let source = match (&m.file, &m.generator) {
        (Some(_), Some(_)) | (None, None) => {
            e.push("mesh", "exactly one of 'file' and 'generator' must be given".into());
            placeholder
        }
        (Some(f), None) => MeshSource::File(base.join(f)),
        (None, Some(g)) => match g.as_str() {
            "box" => {
                let min = e.required("mesh.min", &m.min).map(|v| e.vector("mesh.min", v, Dimension::Length));
                let max = e.required("mesh.max", &m.max).map(|v| e.vector("mesh.max", v, Dimension::Length));
                let divisions = e.required("mesh.divisions", &m.divisions).copied();
                if let Some(d) = divisions {
                    if d.iter().any(|&n| n == 0) {
                        e.push("mesh.divisions", "every division count must be at least 1".into());
                    }
                }
                if let (Some(a), Some(b)) = (min, max) {
                    if (0..3).any(|k| !(b[k] > a[k])) {
                        e.push("mesh.max", "must exceed mesh.min on every axis".into());
                    }
                }
                if let Some(g) = m.grading {
                    if g.iter().any(|&r| !(r > 0.0)) {
                        e.push("mesh.grading", "ratios must be positive".into());
                    }
                }
                match (min, max, divisions) {
                    (Some(min), Some(max), Some(divisions)) => MeshSource::Box(BoxSpec {
                        min,
                        max,
                        divisions,
                        grading: m.grading.unwrap_or([1.0; 3]),
                        periodic: m.periodic.unwrap_or([false; 3]),
                    }),
                    _ => placeholder,
                }
            }
            "annulus" => {
                let ri = e.required("mesh.inner_radius", &m.inner_radius).map(|q| e.positive("mesh.inner_radius", q, Dimension::Length));
                let ro = e.required("mesh.outer_radius", &m.outer_radius).map(|q| e.positive("mesh.outer_radius", q, Dimension::Length));
                let radial = e.required("mesh.radial", &m.radial).copied();
                let azimuthal = e.required("mesh.azimuthal", &m.azimuthal).copied();
                if let (Some(a), Some(b)) = (ri, ro) {
                    if !(b > a) {
                        e.push("mesh.outer_radius", "must exceed mesh.inner_radius".into());
                    }
                }
                if radial == Some(0) {
                    e.push("mesh.radial", "must be at least 1".into());
                }
                if azimuthal.is_some_and(|n| n < 3) {
                    e.push("mesh.azimuthal", "must be at least 3".into());
                }
                if m.axial == Some(0) {
                    e.push("mesh.axial", "must be at least 1".into());
                }
                let depth = m.depth.as_ref().map_or(1.0, |q| e.positive("mesh.depth", q, Dimension::Length));
                let centre = m.centre.as_ref().map_or(Vec3::zeros(), |v| e.vector("mesh.centre", v, Dimension::Length));
                match (ri, ro, radial, azimuthal) {
                    (Some(inner_radius), Some(outer_radius), Some(radial), Some(azimuthal)) => MeshSource::Annulus(AnnulusSpec {
                        inner_radius,
                        outer_radius,
                        radial,
                        azimuthal,
                        axial: m.axial.unwrap_or(1),
                        depth,
                        centre,
                    }),
                    _ => placeholder,
                }
            }
            other => {
                e.push("mesh.generator", format!("'{other}' is not one of box, annulus"));
                placeholder
            }
        },
    };
    MeshDef { source, patch_kinds }
}

fn resolve_motion(m: Option<&MotionSection>, path: &str, e: &mut Errors) -> RigidMotion {
    let Some(m) = m else { return RigidMotion::default() };
    let axis = m.axis.map_or(Vec3::z(), |a| Vec3::new(a[0], a[1], a[2]));
    let anchor = m.anchor.as_ref().map_or(Vec3::zeros(), |v| e.vector(&format!("{path}.anchor"), v, Dimension::Length));
    let omega = m
        .angular_velocity
        .as_ref()
        .map_or(0.0, |q| e.quantity(&format!("{path}.angular_velocity"), q, Dimension::AngularVelocity));
    let translation =
        m.translation.as_ref().map_or(Vec3::zeros(), |v| e.vector(&format!("{path}.translation"), v, Dimension::Velocity));
    RigidMotion::new(axis, anchor, omega, translation).unwrap_or_else(|err| {
        e.push(&format!("{path}.axis"), err.to_string());
        RigidMotion::default()
    })
}

fn resolve_surface(s: &SurfaceSection, path: &str, base: &Path, e: &mut Errors) -> SurfaceDef {
    let centre = s.centre.as_ref().map_or(Vec3::zeros(), |v| e.vector(&format!("{path}.centre"), v, Dimension::Length));
    let radius = |e: &mut Errors| {
        e.required(&format!("{path}.radius"), &s.radius)
            .map_or(f64::NAN, |q| e.positive(&format!("{path}.radius"), q, Dimension::Length))
    };
    let shape = match s.shape.as_str() {
        "cylinder" => {
            let radius = radius(e);
            let extent = match e.required(&format!("{path}.extent"), &s.extent) {
                Some([a, b]) => {
                    let a = e.quantity(&format!("{path}.extent[0]"), a, Dimension::Length);
                    let b = e.quantity(&format!("{path}.extent[1]"), b, Dimension::Length);
                    if !(b > a) {
                        e.push(&format!("{path}.extent"), "upper end must exceed lower end".into());
                    }
                    [a, b]
                }
                None => [0.0, 1.0],
            };
            let axis = s.axis.map_or(Vec3::z(), |a| Vec3::new(a[0], a[1], a[2]));
            if !(axis.norm() > 0.0) {
                e.push(&format!("{path}.axis"), "must be non-zero".into());
            }
            let segments = s.segments.unwrap_or(128);
            if segments < 3 {
                e.push(&format!("{path}.segments"), "must be at least 3".into());
            }
            Shape::Cylinder { centre, axis, radius, extent, segments }
        }
        "sphere" => Shape::Sphere { centre, radius: radius(e), subdivisions: s.subdivisions.unwrap_or(3) },
        "box" => {
            let min = e.required(&format!("{path}.min"), &s.min).map_or(Vec3::zeros(), |v| e.vector(&format!("{path}.min"), v, Dimension::Length));
            let max = e.required(&format!("{path}.max"), &s.max).map_or(Vec3::repeat(1.0), |v| e.vector(&format!("{path}.max"), v, Dimension::Length));
            Shape::Cuboid { min, max }
        }
        "stl" => Shape::Stl(e.required(&format!("{path}.file"), &s.file).map_or(PathBuf::new(), |f| base.join(f))),
        other => {
            e.push(&format!("{path}.shape"), format!("'{other}' is not one of cylinder, sphere, box, stl"));
            Shape::Cuboid { min: Vec3::zeros(), max: Vec3::repeat(1.0) }
        }
    };
    let motion = resolve_motion(s.motion.as_ref(), &format!("{path}.motion"), e);
    let temperature = s.temperature.as_ref().map(|q| e.positive(&format!("{path}.temperature"), q, Dimension::Temperature));
    SurfaceDef { name: s.name.clone(), shape, invert: s.invert, moves: s.moves, motion, temperature }
}

fn resolve_physics(c: &CaseFile, e: &mut Errors) -> Physics {
    let m = &c.material;
    let material = MaterialProps {
        density: e.positive("material.density", &m.density, Dimension::Density),
        specific_heat: e.positive("material.specific_heat", &m.specific_heat, Dimension::SpecificHeat),
        conductivity: e.positive("material.conductivity", &m.conductivity, Dimension::Conductivity),
    };
    let r = &c.rheology;
    let exponent = r.exponent.unwrap_or(1.0);
    if !(exponent > 0.0 && exponent <= 1.0) {
        e.push("rheology.exponent", format!("must lie in (0, 1], got {exponent}"));
    }
    let rheology = PowerLawModel {
        consistency: e.positive("rheology.consistency", &r.consistency, Dimension::Consistency),
        exponent,
        shear_rate_floor: r
            .shear_rate_floor
            .as_ref()
            .map_or(PowerLawModel::DEFAULT_FLOOR, |q| e.positive("rheology.shear_rate_floor", q, Dimension::ShearRate)),
        viscosity_min: r
            .viscosity_min
            .as_ref()
            .map_or(PowerLawModel::DEFAULT_MIN, |q| e.positive("rheology.viscosity_min", q, Dimension::Viscosity)),
        viscosity_max: r
            .viscosity_max
            .as_ref()
            .map_or(PowerLawModel::DEFAULT_MAX, |q| e.positive("rheology.viscosity_max", q, Dimension::Viscosity)),
    };
    if rheology.viscosity_min > rheology.viscosity_max {
        e.push("rheology.viscosity_max", "must not be below rheology.viscosity_min".into());
    }
    let shift = match (&r.activation_temperature, &r.reference_temperature) {
        (None, None) => ArrheniusShift::none(),
        (Some(a), Some(t)) => ArrheniusShift {
            activation_temperature: e.quantity("rheology.activation_temperature", a, Dimension::ActivationTemperature),
            reference_temperature: e.positive("rheology.reference_temperature", t, Dimension::Temperature),
        },
        _ => {
            e.push("rheology", "activation_temperature and reference_temperature go together".into());
            ArrheniusShift::none()
        }
    };
    let (body_force, heat_source) = match &c.sources {
        Some(s) => (
            s.body_force.as_ref().map_or(Vec3::zeros(), |v| e.vector("sources.body_force", v, Dimension::ForceDensity)),
            s.heat_source.as_ref().map_or(0.0, |q| e.quantity("sources.heat_source", q, Dimension::SpecificPower)),
        ),
        None => (Vec3::zeros(), 0.0),
    };
    Physics { material, rheology, shift, body_force, heat_source }
}

fn resolve_boundary(b: &BoundarySection, path: &str, e: &mut Errors) -> BoundaryDef {
    let velocity = b.velocity.as_deref().and_then(|v| {
        e.choice(&format!("{path}.velocity"), v, &[("fixed", 0), ("zero_gradient", 1), ("symmetry", 2)])
    });
    if b.motion.is_some() && velocity.is_some_and(|v| v != 0) {
        e.push(&format!("{path}.motion"), "only applies to fixed velocity".into());
    }
    let velocity = match velocity {
        Some(0) => Some(VelocityCondition::Fixed(resolve_motion(b.motion.as_ref(), &format!("{path}.motion"), e))),
        Some(1) => Some(VelocityCondition::ZeroGradient),
        Some(2) => Some(VelocityCondition::Symmetry),
        _ if b.motion.is_some() => Some(VelocityCondition::Fixed(resolve_motion(b.motion.as_ref(), &format!("{path}.motion"), e))),
        _ => None,
    };
    let thermal = b.temperature.as_deref().map(|t| {
        if t.trim() == "insulated" {
            ThermalCondition::Insulated
        } else {
            ThermalCondition::Fixed(e.positive(&format!("{path}.temperature"), t, Dimension::Temperature))
        }
    });
    BoundaryDef { velocity, thermal }
}

fn resolve_ib(ib: Option<&IbSection>, e: &mut Errors) -> (StencilCriteria, usize) {
    let mut c = StencilCriteria::default();
    let Some(ib) = ib else { return (c, 2) };
    let degree = ib.degree.unwrap_or(2);
    if degree > 2 {
        e.push("ib.degree", format!("must be 0, 1 or 2, got {degree}"));
    }
    if let Some(l) = ib.max_level {
        if l == 0 {
            e.push("ib.max_level", "must be at least 1".into());
        }
        c.max_level = l;
    }
    match (&ib.radius, ib.radius_diameters) {
        (Some(_), Some(_)) => e.push("ib", "give at most one of radius and radius_diameters".into()),
        (Some(q), None) => c.radius = RadiusLimit::Absolute(e.positive("ib.radius", q, Dimension::Length)),
        (None, Some(k)) => {
            if !(k > 0.0) {
                e.push("ib.radius_diameters", "must be positive".into());
            }
            c.radius = RadiusLimit::OwnerDiameters(k)
        }
        (None, None) => {}
    }
    if let Some(q) = &ib.fov_angle {
        c.fov_angle = e.quantity("ib.fov_angle", q, Dimension::Angle);
        if !(c.fov_angle > 0.0 && c.fov_angle <= std::f64::consts::PI) {
            e.push("ib.fov_angle", "must lie in (0, 180 deg]".into());
        }
    }
    if ib.points_cap == Some(0) {
        e.push("ib.points_cap", "must be at least 1".into());
    }
    c.points_cap = ib.points_cap;
    if let Some(a) = &ib.adjacency {
        c.adjacency = e.choice("ib.adjacency", a, &[("face", Adjacency::Face), ("vertex", Adjacency::Vertex)]).unwrap_or(c.adjacency);
    }
    if let Some(a) = &ib.enrichment {
        c.enrichment = e
            .choice(
                "ib.enrichment",
                a,
                &[("never", Enrichment::Never), ("on_starvation", Enrichment::OnStarvation), ("always", Enrichment::Always)],
            )
            .unwrap_or(c.enrichment);
    }
    (c, degree)
}

fn resolve_solver(s: &SolverSection, degree: usize, e: &mut Errors) -> SolverConfig {
    let d = SolverConfig::default();
    let dt = e.positive("solver.dt", &s.dt, Dimension::Time);
    let end_time = e.quantity("solver.end_time", &s.end_time, Dimension::Time);
    if end_time < 0.0 {
        e.push("solver.end_time", "must not be negative".into());
    }
    let scheme = Scheme {
        convection: s
            .convection
            .as_deref()
            .and_then(|c| {
                e.choice(
                    "solver.convection",
                    c,
                    &[("upwind", ConvectionScheme::Upwind), ("central_limited", ConvectionScheme::CentralLimited)],
                )
            })
            .unwrap_or_default(),
        time: s
            .time_scheme
            .as_deref()
            .and_then(|t| e.choice("solver.time_scheme", t, &[("euler", TimeScheme::Euler), ("bdf2", TimeScheme::Bdf2)]))
            .unwrap_or_default(),
        gradient: Default::default(),
    };
    let dim = s.dim.unwrap_or(false);
    let cfg = SolverConfig {
        dt,
        end_time,
        outer_iterations: s.outer_iterations.unwrap_or(d.outer_iterations),
        pressure_correctors: s.pressure_correctors.unwrap_or(d.pressure_correctors),
        outer_tolerance: s.outer_tolerance.unwrap_or(d.outer_tolerance),
        momentum_tolerance: s.momentum_tolerance.unwrap_or(d.momentum_tolerance),
        pressure_tolerance: s.pressure_tolerance.unwrap_or(d.pressure_tolerance),
        temperature_tolerance: s.temperature_tolerance.unwrap_or(d.temperature_tolerance),
        ib_tolerance: s.ib_tolerance.unwrap_or(d.ib_tolerance),
        velocity_relaxation: s.velocity_relaxation.unwrap_or(d.velocity_relaxation),
        pressure_relaxation: s.pressure_relaxation.unwrap_or(d.pressure_relaxation),
        temperature_relaxation: s.temperature_relaxation.unwrap_or(d.temperature_relaxation),
        scheme,
        degree: if dim { 0 } else { degree },
        dim,
        solve_temperature: s.solve_temperature.unwrap_or(false),
        steady_tolerance: s.steady_tolerance,
        stall_window: s.stall_window.unwrap_or(d.stall_window),
        relax_final: s.relax_final.unwrap_or(false),
        consistent: s.consistent.unwrap_or(false),
    };
    if dt.is_finite() && end_time.is_finite() {
        if let Err(Error::Config(list)) = cfg.validate() {
            for m in list {
                e.push("solver", m);
            }
        }
    }
    cfg
}

fn resolve_output(o: Option<&OutputSection>, surfaces: &[SurfaceSection], base: &Path, e: &mut Errors) -> OutputDef {
    let Some(o) = o else {
        return OutputDef {
            directory: base.join("output"),
            vtk_interval: 0,
            probes: vec![],
            sections: vec![],
            surface_reports: vec![],
        };
    };
    let probes = o
        .probes
        .iter()
        .enumerate()
        .map(|(i, p)| Probe { name: p.name.clone(), point: e.vector(&format!("output.probes[{i}].point"), &p.point, Dimension::Length) })
        .collect();
    let sections = o
        .sections
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let path = format!("output.sections[{i}]");
            SectionDef {
                name: s.name.clone(),
                field: e.choice(&format!("{path}.field"), &s.field, SECTION_FIELDS).unwrap_or(SectionField::Speed),
                axis: e.choice(&format!("{path}.axis"), &s.axis, AXES).unwrap_or(0),
                stations: s
                    .stations
                    .iter()
                    .enumerate()
                    .map(|(k, q)| e.quantity(&format!("{path}.stations[{k}]"), q, Dimension::Length))
                    .collect(),
            }
        })
        .collect();
    let surface_reports = o
        .surface_reports
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let path = format!("output.surface_reports[{i}]");
            if !surfaces.iter().any(|s| s.name == r.surface) {
                e.push(&format!("{path}.surface"), format!("no surface named '{}'", r.surface));
            }
            if r.samples == 0 {
                e.push(&format!("{path}.samples"), "must be at least 1".into());
            }
            let axis = Vec3::new(r.axis[0], r.axis[1], r.axis[2]);
            if !(axis.norm() > 0.0) {
                e.push(&format!("{path}.axis"), "must be non-zero".into());
            }
            SurfaceReportDef {
                surface: r.surface.clone(),
                centre: e.vector(&format!("{path}.centre"), &r.centre, Dimension::Length),
                axis,
                samples: r.samples,
            }
        })
        .collect();
    OutputDef {
        directory: base.join(o.directory.as_deref().unwrap_or("output")),
        vtk_interval: o.vtk_interval.unwrap_or(0),
        probes,
        sections,
        surface_reports,
    }
}

fn resolve_benchmark(b: &BenchmarkSection, e: &mut Errors) -> Benchmark {
    let centre = b.centre.as_ref().map_or(Vec3::zeros(), |v| e.vector("benchmark.centre", v, Dimension::Length));
    let len = |e: &mut Errors, key: &str, v: &Option<Quantity>| {
        let path = format!("benchmark.{key}");
        e.required(&path, v).map_or(f64::NAN, |q| e.positive(&path, q, Dimension::Length))
    };
    match b.kind.as_str() {
        "taylor_couette" => {
            let inner_radius = len(e, "inner_radius", &b.inner_radius);
            let outer_radius = len(e, "outer_radius", &b.outer_radius);
            if !(outer_radius > inner_radius) && outer_radius.is_finite() && inner_radius.is_finite() {
                e.push("benchmark.outer_radius", "must exceed benchmark.inner_radius".into());
            }
            let angular_velocity = e
                .required("benchmark.angular_velocity", &b.angular_velocity)
                .map_or(f64::NAN, |q| e.quantity("benchmark.angular_velocity", q, Dimension::AngularVelocity));
            Benchmark::TaylorCouette { centre, inner_radius, outer_radius, angular_velocity }
        }
        "power_law_channel" => {
            let half_width = len(e, "half_width", &b.half_width);
            let flow_axis = b.flow_axis.as_deref().map_or(Some(0), |a| e.choice("benchmark.flow_axis", a, AXES)).unwrap_or(0);
            let wall_axis = b.wall_axis.as_deref().map_or(Some(1), |a| e.choice("benchmark.wall_axis", a, AXES)).unwrap_or(1);
            if flow_axis == wall_axis {
                e.push("benchmark.wall_axis", "must differ from benchmark.flow_axis".into());
            }
            Benchmark::PowerLawChannel { centre, half_width, flow_axis, wall_axis }
        }
        other => {
            e.push("benchmark.kind", format!("'{other}' is not one of taylor_couette, power_law_channel"));
            Benchmark::TaylorCouette { centre, inner_radius: 0.0, outer_radius: 0.0, angular_velocity: 0.0 }
        }
    }
}
