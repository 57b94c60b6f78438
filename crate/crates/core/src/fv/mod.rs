//! Finite-volume operators on the polyhedral mesh: cell gradients, the
//! divergence and compact Laplacian matrices, the Rhie–Chow stabilization
//! matrix, and assembly of the momentum and temperature systems.

mod gradient;
mod momentum;
mod operators;
mod temperature;

pub use gradient::{face_gradient, gauss_gradient, least_squares_gradient, least_squares_vector_gradient};
pub use momentum::{assemble_momentum, MomentumInputs, MomentumSystem};
pub use operators::{
    boundary_divergence, divergence, divergence_matrices, laplacian_coefficient, laplacian_matrix,
    rhie_chow_matrix,
};
pub use temperature::{assemble_temperature, boundary_heat_loss, ScalarSystem, TemperatureInputs};

use crate::error::{Error, Result};
use crate::geometry::RigidMotion;
use crate::mesh::{Mesh, PatchKind};
use crate::Vec3;

/// Cell-centred state plus face volumetric fluxes.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSet {
    /// m/s
    pub u: Vec<Vec3>,
    /// Kinematic pressure, Pa/(kg/m³).
    pub p: Vec<f64>,
    /// K
    pub t: Vec<f64>,
    /// Dynamic viscosity, Pa·s.
    pub mu: Vec<f64>,
    /// 1/s
    pub shear_rate: Vec<f64>,
    /// Volumetric face flux, m³/s, positive owner to neighbour.
    pub phi: Vec<f64>,
}

impl FieldSet {
    pub fn uniform(mesh: &Mesh, u: Vec3, t: f64, mu: f64) -> Self {
        let n = mesh.n_cells();
        let mut fs = FieldSet {
            u: vec![u; n],
            p: vec![0.0; n],
            t: vec![t; n],
            mu: vec![mu; n],
            shear_rate: vec![0.0; n],
            phi: vec![0.0; mesh.n_faces()],
        };
        for f in 0..mesh.n_internal_faces() {
            fs.phi[f] = u.dot(&mesh.face_area(f));
        }
        fs
    }

    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let n = mesh.n_cells();
        for (name, len) in [
            ("u", self.u.len()),
            ("p", self.p.len()),
            ("T", self.t.len()),
            ("mu", self.mu.len()),
            ("shear rate", self.shear_rate.len()),
        ] {
            if len != n {
                return Err(Error::InvalidInput(format!("field {name} has {len} entries for {n} cells")));
            }
        }
        if self.phi.len() != mesh.n_faces() {
            return Err(Error::InvalidInput("flux length does not match face count".into()));
        }
        if let Some(c) = self.t.iter().position(|&t| !(t > 0.0)) {
            return Err(Error::InvalidInput(format!("non-positive temperature {} in cell {c}", self.t[c])));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ConvectionScheme {
    #[default]
    Upwind,
    /// Van Leer limited central differencing as a deferred correction on
    /// top of upwind.
    CentralLimited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    #[default]
    Euler,
    Bdf2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientScheme {
    #[default]
    LeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Scheme {
    pub convection: ConvectionScheme,
    pub time: TimeScheme,
    pub gradient: GradientScheme,
}

#[derive(Debug, Clone, PartialEq)]
pub enum VelocityCondition {
    /// Prescribed rigid-body velocity; walls at rest use the zero motion.
    Fixed(RigidMotion),
    ZeroGradient,
    /// Zero normal velocity, zero tangential traction.
    Symmetry,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThermalCondition {
    Insulated,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchCondition {
    pub velocity: VelocityCondition,
    pub thermal: ThermalCondition,
}

/// Conditions per mesh patch, same order as `Mesh::patches`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConditions {
    pub patches: Vec<PatchCondition>,
}

impl BoundaryConditions {
    /// Walls and inflows at rest, zero-gradient outflows, insulated.
    pub fn from_kinds(mesh: &Mesh) -> Self {
        let patches = mesh
            .patches()
            .iter()
            .map(|p| PatchCondition {
                velocity: match p.kind {
                    PatchKind::Wall | PatchKind::Inflow => VelocityCondition::Fixed(RigidMotion::default()),
                    PatchKind::Outflow => VelocityCondition::ZeroGradient,
                    PatchKind::Symmetry => VelocityCondition::Symmetry,
                },
                thermal: ThermalCondition::Insulated,
            })
            .collect();
        BoundaryConditions { patches }
    }

    pub fn set(&mut self, mesh: &Mesh, patch: &str, cond: PatchCondition) -> Result<()> {
        let (i, _) = mesh
            .patch_by_name(patch)
            .ok_or_else(|| Error::InvalidInput(format!("unknown patch '{patch}'")))?;
        self.patches[i] = cond;
        Ok(())
    }

    fn condition(&self, mesh: &Mesh, f: usize) -> &PatchCondition {
        &self.patches[mesh.face_patch(f).expect("boundary face without patch")]
    }

    pub fn velocity_condition(&self, mesh: &Mesh, f: usize) -> &VelocityCondition {
        &self.condition(mesh, f).velocity
    }

    pub fn thermal_condition(&self, mesh: &Mesh, f: usize) -> ThermalCondition {
        self.condition(mesh, f).thermal
    }

    /// Velocity on boundary face `f` given the adjacent cell value.
    pub fn face_velocity(&self, mesh: &Mesh, f: usize, u_cell: &Vec3, time: f64) -> Vec3 {
        match self.velocity_condition(mesh, f) {
            VelocityCondition::Fixed(m) => m.boundary_velocity(&mesh.face_centre(f), time),
            VelocityCondition::ZeroGradient => *u_cell,
            VelocityCondition::Symmetry => {
                let n = mesh.face_area(f).normalize();
                u_cell - n * n.dot(u_cell)
            }
        }
    }

    pub fn face_temperature(&self, mesh: &Mesh, f: usize, t_cell: f64) -> f64 {
        match self.thermal_condition(mesh, f) {
            ThermalCondition::Insulated => t_cell,
            ThermalCondition::Fixed(t) => t,
        }
    }

    /// Pressure is fixed (to zero) on outflow patches only.
    pub fn pressure_fixed(&self, mesh: &Mesh, f: usize) -> bool {
        matches!(self.velocity_condition(mesh, f), VelocityCondition::ZeroGradient)
    }

    /// Kinematic boundary pressure.
    pub fn face_pressure(&self, mesh: &Mesh, f: usize, p_cell: f64) -> f64 {
        if self.pressure_fixed(mesh, f) {
            0.0
        } else {
            p_cell
        }
    }

    pub fn has_pressure_outlet(&self) -> bool {
        self.patches.iter().any(|p| p.velocity == VelocityCondition::ZeroGradient)
    }

    /// Flux through boundary faces with prescribed velocity; other faces get
    /// zero (symmetry) or keep their current value (outflow).
    pub fn apply_boundary_fluxes(&self, mesh: &Mesh, phi: &mut [f64], time: f64) {
        for f in mesh.n_internal_faces()..mesh.n_faces() {
            match self.velocity_condition(mesh, f) {
                VelocityCondition::Fixed(m) => {
                    phi[f] = m.boundary_velocity(&mesh.face_centre(f), time).dot(&mesh.face_area(f))
                }
                VelocityCondition::Symmetry => phi[f] = 0.0,
                VelocityCondition::ZeroGradient => {}
            }
        }
    }
}

/// Boundary-face distance coefficient `|S|² / (S·d)` with `d` from the
/// owner centre to the face centre.
pub fn boundary_coefficient(mesh: &Mesh, f: usize) -> f64 {
    let s = mesh.face_area(f);
    let d = mesh.face_centre(f) - mesh.centre(mesh.face(f).owner);
    s.norm_squared() / s.dot(&d).abs().max(1e-300)
}
