//! Building solver inputs from a [`Case`] and driving a run with its
//! outputs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{Case, CaseFile, MeshSource, SectionField, Shape};
use super::reports::{
    active_cells, benchmark_report, exchange_check, field_values, locate_cell, section_average, section_integral,
    surface_report, BenchmarkReport, ExchangeCheck, BENCHMARK_CSV_HEADER, SURFACE_CSV_HEADER,
};
use crate::error::{Error, Result};
use crate::fv::{BoundaryConditions, FieldSet, PatchCondition};
use crate::geometry::stl::read_stl;
use crate::geometry::{ImmersedBody, TriSurface};
use crate::mesh::io::{read_mesh, write_vtk, CellData};
use crate::mesh::{annular_grid, build_structured_grid, Mesh};
use crate::solver::{write_residual_csv, BodySetup, Solver, StepReport};

/// Command-line adjustments applied on top of the case file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub degree: Option<usize>,
    /// Force the diffuse-interface limit (degree 0).
    pub dim: bool,
    pub out: Option<PathBuf>,
}

/// Reads, parses and resolves a case file; relative paths are taken from
/// its directory.
pub fn load_case(path: &Path) -> Result<Case> {
    let text = fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    CaseFile::parse(&text)?.resolve(base)
}

impl Case {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(p) = o.degree {
            self.solver.degree = p;
        }
        if o.dim {
            self.solver.dim = true;
            self.solver.degree = 0;
        }
        if let Some(out) = &o.out {
            self.output.directory = out.clone();
        }
    }

    /// Generates or reads the mesh, applies patch kinds and checks every
    /// reference to patches and points against it.
    pub fn build_mesh(&self) -> Result<Mesh> {
        let mut mesh = match &self.mesh.source {
            MeshSource::Box(spec) => build_structured_grid(spec)?,
            MeshSource::Annulus(spec) => annular_grid(spec)?,
            MeshSource::File(path) => read_mesh(path)?,
        };
        let mut errs = Vec::new();
        for (name, kind) in &self.mesh.patch_kinds {
            if mesh.set_patch_kind(name, *kind).is_err() {
                errs.push(format!("mesh.patches.{name}: the mesh has no such patch"));
            }
        }
        for name in self.boundary.keys() {
            if mesh.patch_by_name(name).is_none() {
                let known: Vec<&str> = mesh.patches().iter().map(|p| p.name.as_str()).collect();
                errs.push(format!("boundary.{name}: the mesh has no such patch (patches: {})", known.join(", ")));
            }
        }
        for (i, p) in self.output.probes.iter().enumerate() {
            if locate_cell(&mesh, &p.point).is_none() {
                errs.push(format!("output.probes[{i}].point: lies outside the mesh"));
            }
        }
        if errs.is_empty() {
            Ok(mesh)
        } else {
            Err(Error::Config(errs))
        }
    }

    pub fn boundary_conditions(&self, mesh: &Mesh) -> Result<BoundaryConditions> {
        let mut bcs = BoundaryConditions::from_kinds(mesh);
        for (name, b) in &self.boundary {
            let (i, _) = mesh
                .patch_by_name(name)
                .ok_or_else(|| Error::Config(vec![format!("boundary.{name}: the mesh has no such patch")]))?;
            let cur = bcs.patches[i].clone();
            bcs.patches[i] = PatchCondition {
                velocity: b.velocity.clone().unwrap_or(cur.velocity),
                thermal: b.thermal.unwrap_or(cur.thermal),
            };
        }
        Ok(bcs)
    }

    pub fn body_setups(&self) -> Result<Vec<BodySetup>> {
        self.surfaces
            .iter()
            .map(|s| {
                let surface = match &s.shape {
                    Shape::Cylinder { centre, axis, radius, extent, segments } => {
                        TriSurface::cylinder(*centre, *axis, *radius, extent[0], extent[1], *segments)?
                    }
                    Shape::Sphere { centre, radius, subdivisions } => TriSurface::icosphere(*centre, *radius, *subdivisions)?,
                    Shape::Cuboid { min, max } => TriSurface::cuboid(*min, *max)?,
                    Shape::Stl(path) => read_stl(path)?,
                };
                let mut body = ImmersedBody::new(&s.name, surface).with_motion(s.motion);
                if s.invert {
                    body = body.inverted();
                }
                Ok(BodySetup { body, moves: s.moves, temperature: s.temperature })
            })
            .collect()
    }

    pub fn build_solver(&self) -> Result<Solver> {
        let mesh = self.build_mesh()?;
        let bcs = self.boundary_conditions(&mesh)?;
        let bodies = self.body_setups()?;
        let mu0 = self.physics.rheology.consistency;
        let fields = FieldSet::uniform(&mesh, self.initial_velocity, self.initial_temperature, mu0);
        Solver::new(mesh, bcs, self.physics.clone(), self.solver.clone(), bodies, self.criteria.clone(), fields)
    }
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub steps: usize,
    pub time: f64,
    pub reports: Vec<StepReport>,
    pub benchmark: Option<BenchmarkReport>,
    pub exchange: Option<ExchangeCheck>,
    pub ib_replay_error: f64,
    pub files: Vec<PathBuf>,
}

pub const STEPS_CSV_HEADER: &str = "step,time,outer_iterations,converged,heating_power,max_imbalance,velocity_change,flagged_rows";
pub const PROBES_CSV_HEADER: &str = "time,probe,u_x,u_y,u_z,p,T,mu,shear_rate";
pub const SECTIONS_CSV_HEADER: &str = "time,section,field,axis,station,value";
pub const SNAPSHOTS_CSV_HEADER: &str = "step,time,file";
pub const EXCHANGE_CSV_HEADER: &str = "partition,peer,send,receive";

fn create(path: &Path, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    files.push(path.to_path_buf());
    Ok(BufWriter::new(File::create(path)?))
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

struct Outputs<'a> {
    case: &'a Case,
    dir: PathBuf,
    probe_cells: Vec<usize>,
    probes: BufWriter<File>,
    sections: BufWriter<File>,
    steps: BufWriter<File>,
    snapshots: BufWriter<File>,
    last_snapshot: Option<usize>,
    files: Vec<PathBuf>,
}

impl<'a> Outputs<'a> {
    fn new(case: &'a Case, solver: &Solver) -> Result<Self> {
        let dir = case.output.directory.clone();
        fs::create_dir_all(dir.join("vtk"))?;
        let mut files = Vec::new();
        let mut probes = create(&dir.join("probes.csv"), &mut files)?;
        writeln!(probes, "{PROBES_CSV_HEADER}")?;
        let mut sections = create(&dir.join("sections.csv"), &mut files)?;
        writeln!(sections, "{SECTIONS_CSV_HEADER}")?;
        let mut steps = create(&dir.join("steps.csv"), &mut files)?;
        writeln!(steps, "{STEPS_CSV_HEADER}")?;
        let mut snapshots = create(&dir.join("snapshots.csv"), &mut files)?;
        writeln!(snapshots, "{SNAPSHOTS_CSV_HEADER}")?;
        let probe_cells = case.output.probes.iter().map(|p| locate_cell(&solver.mesh, &p.point).unwrap_or(0)).collect();
        Ok(Outputs { case, dir, probe_cells, probes, sections, steps, snapshots, last_snapshot: None, files })
    }

    fn probes(&mut self, s: &Solver) -> Result<()> {
        let fs = s.fields();
        for (p, &c) in self.case.output.probes.iter().zip(&self.probe_cells) {
            let u = fs.u[c];
            writeln!(
                self.probes,
                "{:e},{},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
                s.time(),
                p.name,
                u.x,
                u.y,
                u.z,
                fs.p[c],
                fs.t[c],
                fs.mu[c],
                fs.shear_rate[c]
            )?;
        }
        Ok(())
    }

    fn snapshot(&mut self, s: &Solver) -> Result<()> {
        let step = s.state.step;
        if self.last_snapshot == Some(step) {
            return Ok(());
        }
        self.last_snapshot = Some(step);
        let name = format!("fields_{step:06}.vtk");
        let path = self.dir.join("vtk").join(&name);
        let fs = s.fields();
        let labels: Vec<i32> = s.labels().iter().map(|l| l.code()).collect();
        let heating = s.heating();
        let mut w = create(&path, &mut self.files)?;
        write_vtk(
            &s.mesh,
            &[
                CellData::Vector("U", &fs.u),
                CellData::Scalar("p", &fs.p),
                CellData::Scalar("T", &fs.t),
                CellData::Scalar("mu", &fs.mu),
                CellData::Scalar("shear_rate", &fs.shear_rate),
                CellData::Scalar("heating", &heating),
                CellData::Integer("label", &labels),
            ],
            &mut w,
        )?;
        w.flush()?;
        writeln!(self.snapshots, "{step},{:e},vtk/{name}", s.time())?;
        let active = active_cells(&s.labels());
        for sec in &self.case.output.sections {
            let values = field_values(fs, sec.field, sec.axis);
            let res = if sec.field == SectionField::FlowRate {
                section_integral(&s.mesh, &values, &active, sec.axis, &sec.stations)
            } else {
                section_average(&s.mesh, &values, &active, sec.axis, &sec.stations)
            };
            let field = super::config::SECTION_FIELDS.iter().find(|f| f.1 == sec.field).map_or("", |f| f.0);
            for (st, v) in sec.stations.iter().zip(res) {
                writeln!(self.sections, "{:e},{},{field},{},{st:e},{}", s.time(), sec.name, ["x", "y", "z"][sec.axis], opt(v))?;
            }
        }
        Ok(())
    }

    fn step(&mut self, s: &Solver, r: &StepReport) -> Result<()> {
        writeln!(
            self.steps,
            "{},{:e},{},{},{:e},{:e},{:e},{}",
            s.state.step,
            r.time,
            r.outer_iterations,
            r.converged,
            r.heating_power,
            r.max_imbalance,
            r.velocity_change,
            r.flagged_rows
        )?;
        self.probes(s)?;
        let every = self.case.output.vtk_interval;
        if every > 0 && s.state.step % every == 0 {
            self.snapshot(s)?;
        }
        Ok(())
    }

    fn finish(mut self, s: &Solver, exchange: Option<&ExchangeCheck>) -> Result<(Vec<PathBuf>, Option<BenchmarkReport>)> {
        self.snapshot(s)?;
        let mut w = create(&self.dir.join("residuals.csv"), &mut self.files)?;
        write_residual_csv(&s.state.residuals, &mut w)?;
        w.flush()?;
        for rep in &self.case.output.surface_reports {
            let Some(index) = self.case.surfaces.iter().position(|b| b.name == rep.surface) else { continue };
            let mut w = create(&self.dir.join(format!("surface_{}.csv", rep.surface)), &mut self.files)?;
            writeln!(w, "{SURFACE_CSV_HEADER}")?;
            for x in surface_report(s, index, &rep.centre, &rep.axis, rep.samples) {
                writeln!(
                    w,
                    "{:e},{:e},{:e},{:e},{:e},{},{},{},{}",
                    x.angle,
                    x.point.x,
                    x.point.y,
                    x.point.z,
                    x.wall_speed,
                    opt(x.speed),
                    opt(x.shear_rate),
                    opt(x.viscosity),
                    opt(x.temperature)
                )?;
            }
            w.flush()?;
        }
        let bench = self.case.benchmark.as_ref().map(|b| benchmark_report(s, b));
        if let Some(b) = &bench {
            let mut w = create(&self.dir.join("benchmark.csv"), &mut self.files)?;
            writeln!(w, "{BENCHMARK_CSV_HEADER}")?;
            writeln!(w, "{},{:e},{:e},{}", b.kind, b.l2_relative, b.max_abs, b.cells)?;
            w.flush()?;
        }
        if let Some(x) = exchange {
            let mut w = create(&self.dir.join("exchange.csv"), &mut self.files)?;
            writeln!(w, "{EXCHANGE_CSV_HEADER}")?;
            for (p, peers) in x.map.partitions.iter().enumerate() {
                for e in peers {
                    writeln!(w, "{p},{},{},{}", e.peer, e.send.len(), e.receive.len())?;
                }
            }
            w.flush()?;
        }
        for w in [&mut self.probes, &mut self.sections, &mut self.steps, &mut self.snapshots] {
            w.flush()?;
        }
        Ok((self.files, bench))
    }
}

/// Runs a case to its end time (or steady state), writing snapshots and
/// CSV reports into the output directory. With `partitions` the stencil
/// exchange is planned and replayed on simulated partitions as well.
pub fn run_case(case: &Case, partitions: Option<usize>) -> Result<RunSummary> {
    let mut solver = case.build_solver()?;
    let mut out = Outputs::new(case, &solver)?;
    out.probes(&solver)?;
    out.snapshot(&solver)?;
    let exchange = partitions.map(|n| {
        let stencils = solver.ib.as_ref().map_or(&[][..], |ib| &ib.stencils[..]);
        let field: Vec<f64> = solver.fields().u.iter().map(|u| u.x).collect();
        exchange_check(&solver.mesh, stencils, n.max(1), &field)
    });
    let reports = solver.run(|s, r| out.step(s, r))?;
    let (files, benchmark) = out.finish(&solver, exchange.as_ref())?;
    Ok(RunSummary {
        steps: reports.len(),
        time: solver.time(),
        reports,
        benchmark,
        exchange,
        ib_replay_error: solver.ib_replay_error(),
        files,
    })
}
