//! Finite-volume solver for incompressible, temperature-dependent,
//! generalized-Newtonian flow around rigid bodies described by triangulated
//! surfaces and imposed with a weighted-least-squares immersed boundary.
//!
//! Modules, bottom-up:
//! - [`mesh`]: polyhedral topology, geometry and generators.
//! - [`geometry`]: immersed surfaces, cell classification, projections, kinematics.
//! - [`stencil`]: extended IB stencils and the partition exchange map.
//! - [`wls`]: weighted-least-squares fits and the IB correction operator.
//! - [`rheology`]: shear rate, power-law viscosity, Arrhenius shift, heating.
//! - [`fv`]: collocated finite-volume operators and assembly.
//! - [`solver`]: the IB-consistent PIMPLE time loop.
//! - [`case`]: case configuration, CLI driver, outputs and reports.

pub mod case;
pub mod error;
pub mod fv;
pub mod geometry;
pub mod linalg;
pub mod mesh;
pub mod rheology;
pub mod solver;
pub mod stencil;
pub mod wls;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
