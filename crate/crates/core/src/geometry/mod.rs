//! Immersed surfaces, the solid / IB / fluid partition of the mesh, IB
//! projection points, and rigid-body kinematics.

mod bvh;
pub mod stl;
mod surface;

use rayon::prelude::*;

pub use bvh::{Aabb, Bvh};
pub use surface::{closest_on_triangle, ClosestPoint, Containment, Feature, TriSurface};

use crate::error::{Error, Result};
use crate::mesh::{Adjacency, Mesh};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CellLabel {
    Fluid,
    Ib,
    Solid,
}

impl CellLabel {
    /// Integer code used in VTK exports: 0 fluid, 1 IB, 2 solid.
    pub fn code(self) -> i32 {
        match self {
            CellLabel::Fluid => 0,
            CellLabel::Ib => 1,
            CellLabel::Solid => 2,
        }
    }
}

/// Rigid motion: translation plus rotation about an axis through `anchor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidMotion {
    pub axis: Vec3,
    pub anchor: Vec3,
    /// Angular velocity, rad/s.
    pub omega: f64,
    pub translation: Vec3,
}

impl Default for RigidMotion {
    fn default() -> Self {
        RigidMotion {
            axis: Vec3::z(),
            anchor: Vec3::zeros(),
            omega: 0.0,
            translation: Vec3::zeros(),
        }
    }
}

impl RigidMotion {
    pub fn new(axis: Vec3, anchor: Vec3, omega: f64, translation: Vec3) -> Result<Self> {
        let n = axis.norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::InvalidInput("rotation axis must be a non-zero vector".into()));
        }
        Ok(RigidMotion { axis: axis / n, anchor, omega, translation })
    }

    pub fn rotation(axis: Vec3, anchor: Vec3, omega: f64) -> Result<Self> {
        Self::new(axis, anchor, omega, Vec3::zeros())
    }

    /// Anchor position at `time` (the axis is carried by the translation).
    pub fn anchor_at(&self, time: f64) -> Vec3 {
        self.anchor + self.translation * time
    }

    /// Velocity of the material point currently at `point`.
    pub fn boundary_velocity(&self, point: &Vec3, time: f64) -> Vec3 {
        self.translation + (self.axis * self.omega).cross(&(point - self.anchor_at(time)))
    }

    /// Maps a point of the reference configuration to its position at `time`.
    pub fn transform(&self, point: &Vec3, time: f64) -> Vec3 {
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_unchecked(self.axis), self.omega * time);
        self.anchor_at(time) + rot * (point - self.anchor)
    }

    pub fn is_static(&self) -> bool {
        self.omega == 0.0 && self.translation == Vec3::zeros()
    }
}

/// One immersed surface. With `invert` the solid lies outside the surface,
/// for flows contained inside it.
#[derive(Debug, Clone)]
pub struct ImmersedBody {
    pub name: String,
    pub surface: TriSurface,
    pub invert: bool,
    pub motion: RigidMotion,
}

impl ImmersedBody {
    pub fn new(name: &str, surface: TriSurface) -> Self {
        ImmersedBody { name: name.to_string(), surface, invert: false, motion: RigidMotion::default() }
    }

    pub fn inverted(mut self) -> Self {
        self.invert = true;
        self
    }

    pub fn with_motion(mut self, motion: RigidMotion) -> Self {
        self.motion = motion;
        self
    }

    /// Boundary points count as solid for both orientations.
    pub fn is_solid(&self, p: &Vec3) -> bool {
        match self.surface.containment(p) {
            Containment::OnBoundary => true,
            Containment::Inside => !self.invert,
            Containment::Outside => self.invert,
        }
    }

    /// The body placed at `time` by its rigid motion.
    pub fn at_time(&self, time: f64) -> Result<ImmersedBody> {
        let surface = if self.motion.is_static() {
            self.surface.clone()
        } else {
            self.surface.map_vertices(|v| self.motion.transform(v, time))?
        };
        Ok(ImmersedBody { surface, ..self.clone() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub labels: Vec<CellLabel>,
    pub ib_cells: Vec<usize>,
    /// Body that claims each solid cell.
    pub solid_body: Vec<Option<usize>>,
    pub adjacency: Adjacency,
    /// Non-fatal findings, such as a surface lying outside the mesh.
    pub warnings: Vec<String>,
}

impl Classification {
    pub fn label(&self, c: usize) -> CellLabel {
        self.labels[c]
    }

    pub fn count(&self, l: CellLabel) -> usize {
        self.labels.iter().filter(|&&x| x == l).count()
    }

    pub fn codes(&self) -> Vec<i32> {
        self.labels.iter().map(|l| l.code()).collect()
    }

    /// Position of a cell in `ib_cells`, if it is an IB cell.
    pub fn ib_position(&self, c: usize) -> Option<usize> {
        self.ib_cells.binary_search(&c).ok()
    }

    /// Checks the partition rules against the mesh adjacency.
    pub fn check(&self, mesh: &Mesh) -> Result<()> {
        for c in 0..mesh.n_cells() {
            let solid_nb = mesh
                .neighbours(c, self.adjacency)
                .iter()
                .any(|&n| self.labels[n] == CellLabel::Solid);
            match self.labels[c] {
                CellLabel::Ib if !solid_nb => {
                    return Err(Error::InvalidInput(format!("IB cell {c} has no solid neighbour")))
                }
                CellLabel::Fluid if solid_nb => {
                    return Err(Error::InvalidInput(format!("fluid cell {c} touches a solid cell")))
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Labels cells: SOLID when the centre is in a body's solid region, IB when
/// not solid but adjacent to a solid cell, FLUID otherwise.
pub fn classify_cells(mesh: &Mesh, bodies: &[ImmersedBody], mode: Adjacency) -> Classification {
    let mut warnings = Vec::new();
    let (mmin, mmax) = mesh.bounds();
    for b in bodies {
        let (smin, smax) = b.surface.bounds();
        let disjoint = (0..3).any(|k| smax[k] < mmin[k] || smin[k] > mmax[k]);
        if disjoint && !b.invert {
            warnings.push(format!("surface '{}' lies entirely outside the mesh bounding box", b.name));
        }
    }
    let solid_body: Vec<Option<usize>> = mesh
        .centres()
        .par_iter()
        .map(|x| bodies.iter().position(|b| b.is_solid(x)))
        .collect();
    let mut labels = vec![CellLabel::Fluid; mesh.n_cells()];
    for c in 0..mesh.n_cells() {
        if solid_body[c].is_some() {
            labels[c] = CellLabel::Solid;
        } else if mesh.neighbours(c, mode).iter().any(|&n| solid_body[n].is_some()) {
            labels[c] = CellLabel::Ib;
        }
    }
    let ib_cells = (0..mesh.n_cells()).filter(|&c| labels[c] == CellLabel::Ib).collect();
    Classification { labels, ib_cells, solid_body, adjacency: mode, warnings }
}

/// Projection of a point on an immersed surface.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IbPoint {
    /// IB cell whose centre was projected.
    pub cell: usize,
    /// Index of the body holding the projection.
    pub body: usize,
    pub point: Vec3,
    /// Unit normal pointing into the solid.
    pub normal: Vec3,
    pub distance: f64,
}

/// Closest point on the surface with the normal turned toward the solid.
pub fn project_to_surface(surface: &TriSurface, point: &Vec3, invert: bool) -> (Vec3, Vec3, f64) {
    let cp = surface.closest_point(point);
    let n = if invert { cp.normal } else { -cp.normal };
    (cp.point, n, cp.distance)
}

/// IB points for every IB cell. Each cell projects on the nearest body among
/// those that own one of its solid neighbours.
pub fn ib_points(mesh: &Mesh, cls: &Classification, bodies: &[ImmersedBody]) -> Vec<IbPoint> {
    cls.ib_cells
        .par_iter()
        .map(|&c| {
            let x = mesh.centre(c);
            let mut owners: Vec<usize> = mesh
                .neighbours(c, cls.adjacency)
                .iter()
                .filter_map(|&n| cls.solid_body[n])
                .collect();
            owners.sort_unstable();
            owners.dedup();
            let mut best: Option<IbPoint> = None;
            for b in owners {
                let (p, n, d) = project_to_surface(&bodies[b].surface, &x, bodies[b].invert);
                if best.map_or(true, |q| d < q.distance) {
                    best = Some(IbPoint { cell: c, body: b, point: p, normal: n, distance: d });
                }
            }
            best.expect("IB cell has a solid neighbour")
        })
        .collect()
}

/// Gear rates of a planetary arrangement with sun radius `R_s`, planet
/// radius `R_p` and ring radius `R_s + 2 R_p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlanetaryKinematics {
    pub sun_radius: f64,
    pub planet_radius: f64,
    pub ring_radius: f64,
    pub sun_rate: f64,
    pub carrier_rate: f64,
    pub planet_rate: f64,
    /// Rates seen from the carrier frame.
    pub relative_sun: f64,
    pub relative_ring: f64,
    pub relative_planet: f64,
}

pub fn planetary_kinematics(sun_radius: f64, planet_radius: f64, sun_rate: f64) -> Result<PlanetaryKinematics> {
    if !(sun_radius > 0.0 && planet_radius > 0.0) {
        return Err(Error::InvalidGeometry("planetary radii must be positive".into()));
    }
    let carrier = sun_rate * sun_radius / (2.0 * (sun_radius + planet_radius));
    let planet = -carrier * (sun_radius + planet_radius) / planet_radius;
    Ok(PlanetaryKinematics {
        sun_radius,
        planet_radius,
        ring_radius: sun_radius + 2.0 * planet_radius,
        sun_rate,
        carrier_rate: carrier,
        planet_rate: planet,
        relative_sun: sun_rate - carrier,
        relative_ring: -carrier,
        relative_planet: planet - carrier,
    })
}

/// Rotation matrix about a unit axis, used by tests and motion audits.
pub fn rotation_matrix(axis: &Vec3, angle: f64) -> Mat3 {
    *nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(*axis), angle).matrix()
}
