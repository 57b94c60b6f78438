use super::gradient::least_squares_gradient;
use super::momentum::limited_correction;
use super::operators::laplacian_coefficient;
use super::{boundary_coefficient, BoundaryConditions, ConvectionScheme, Scheme, ThermalCondition, TimeScheme, VelocityCondition};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::Mesh;

pub struct TemperatureInputs<'a> {
    pub mesh: &'a Mesh,
    pub bcs: &'a BoundaryConditions,
    pub scheme: Scheme,
    pub density: f64,
    pub specific_heat: f64,
    pub conductivity: f64,
    pub phi: &'a [f64],
    pub t: &'a [f64],
    pub t_old: &'a [f64],
    pub t_old2: Option<&'a [f64]>,
    /// Volumetric heat release per cell, W/m³ (viscous heating plus sources).
    pub heating: &'a [f64],
    pub dt: f64,
}

/// `A x = b` for a cell scalar.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarSystem {
    pub matrix: CsrMatrix,
    pub source: Vec<f64>,
}

impl ScalarSystem {
    /// Replaces row `cell` by `a_ii x = a_ii value`.
    pub fn impose(&mut self, cell: usize, value: f64) {
        self.matrix.clear_off_diagonal(cell);
        self.source[cell] = self.matrix.get(cell, cell) * value;
    }
}

/// Conservative form `ρ c_p (∂T/∂t + ∇·(u T)) − ∇·(k ∇T) = q`. Convective
/// face fluxes enter the two adjacent rows with opposite signs, so the
/// column sums of the convective part vanish and the global energy balance
/// holds exactly on insulated, closed domains.
pub fn assemble_temperature(inp: &TemperatureInputs<'_>) -> Result<ScalarSystem> {
    let mesh = inp.mesh;
    let n = mesh.n_cells();
    if inp.t.len() != n || inp.t_old.len() != n || inp.heating.len() != n {
        return Err(Error::InvalidInput("temperature inputs do not match mesh size".into()));
    }
    let rc = inp.density * inp.specific_heat;
    let k = inp.conductivity;
    let mut a = TripletBuilder::with_capacity(n, n, n + 4 * mesh.n_internal_faces());
    let mut b = vec![0.0; n];
    for i in 0..n {
        a.push(i, i, 0.0);
    }
    let grad = if inp.scheme.convection == ConvectionScheme::CentralLimited {
        least_squares_gradient(mesh, inp.t, |f| inp.bcs.face_temperature(mesh, f, inp.t[mesh.face(f).owner]))
    } else {
        Vec::new()
    };

    for f in 0..mesh.n_internal_faces() {
        let face = mesh.face(f);
        let (o, nb) = (face.owner, face.neighbour.unwrap());
        if o == nb {
            continue;
        }
        let d = k * laplacian_coefficient(mesh, f);
        a.push(o, o, d);
        a.push(o, nb, -d);
        a.push(nb, nb, d);
        a.push(nb, o, -d);
        let flux = rc * inp.phi[f];
        if flux >= 0.0 {
            a.push(o, o, flux);
            a.push(nb, o, -flux);
        } else {
            a.push(o, nb, flux);
            a.push(nb, nb, -flux);
        }
        if !grad.is_empty() && flux != 0.0 {
            let delta = mesh.face_delta(f);
            let (up, down, dv) = if flux > 0.0 { (o, nb, delta) } else { (nb, o, -delta) };
            let corr = flux * limited_correction(inp.t[up], inp.t[down], &grad[up], &dv);
            b[o] -= corr;
            b[nb] += corr;
        }
    }

    for f in mesh.n_internal_faces()..mesh.n_faces() {
        let o = mesh.face(f).owner;
        let flux = rc * inp.phi[f];
        match inp.bcs.thermal_condition(mesh, f) {
            ThermalCondition::Fixed(tb) => {
                let d = k * boundary_coefficient(mesh, f);
                a.push(o, o, d);
                b[o] += d * tb;
                if flux > 0.0 {
                    a.push(o, o, flux);
                } else {
                    b[o] -= flux * tb;
                }
            }
            ThermalCondition::Insulated => {
                if flux > 0.0 {
                    a.push(o, o, flux);
                } else if flux < 0.0 {
                    // Inflow through an insulated patch carries the inflow
                    // temperature, taken as the cell value.
                    let inflow = !matches!(inp.bcs.velocity_condition(mesh, f), VelocityCondition::Symmetry);
                    if inflow {
                        b[o] -= flux * inp.t[o];
                    }
                }
            }
        }
    }

    let bdf2 = inp.scheme.time == TimeScheme::Bdf2 && inp.t_old2.is_some();
    for i in 0..n {
        let v = mesh.volume(i);
        let m = rc * v / inp.dt;
        if bdf2 {
            a.push(i, i, 1.5 * m);
            b[i] += m * (2.0 * inp.t_old[i] - 0.5 * inp.t_old2.unwrap()[i]);
        } else {
            a.push(i, i, m);
            b[i] += m * inp.t_old[i];
        }
        b[i] += inp.heating[i] * v;
    }
    Ok(ScalarSystem { matrix: a.build(), source: b })
}

/// Total convective plus conductive heat leaving through boundary faces, W.
pub fn boundary_heat_loss(inp: &TemperatureInputs<'_>, t: &[f64]) -> f64 {
    let mesh = inp.mesh;
    let rc = inp.density * inp.specific_heat;
    let mut q = 0.0;
    for f in mesh.n_internal_faces()..mesh.n_faces() {
        let o = mesh.face(f).owner;
        let tb = inp.bcs.face_temperature(mesh, f, t[o]);
        q += rc * inp.phi[f] * tb;
        if let ThermalCondition::Fixed(tf) = inp.bcs.thermal_condition(mesh, f) {
            q -= inp.conductivity * boundary_coefficient(mesh, f) * (tf - t[o]);
        }
    }
    q
}
