//! The individual stages of one pressure-velocity sweep.

use crate::error::{Error, Result};
use crate::fv::{gauss_gradient, laplacian_coefficient, laplacian_matrix, BoundaryConditions, MomentumSystem, VelocityCondition};
use crate::geometry::CellLabel;
use crate::linalg::{krylov_solve, CsrMatrix, SolveControls, SolveReport};
use crate::mesh::Mesh;
use crate::wls::InterpOperator;
use crate::Vec3;

/// Solves `A u = b + extra` per component starting from `u0`.
pub fn momentum_predictor(
    sys: &MomentumSystem,
    extra: &[Vec3],
    u0: &[Vec3],
    controls: &SolveControls,
) -> Result<(Vec<Vec3>, Vec<SolveReport>)> {
    let mut out = u0.to_vec();
    let mut reports = Vec::with_capacity(3);
    for k in 0..3 {
        let a = sys.matrix(k);
        let rhs: Vec<f64> = sys.source.iter().zip(extra).map(|(s, e)| s[k] + e[k]).collect();
        let mut x: Vec<f64> = u0.iter().map(|v| v[k]).collect();
        let rep = krylov_solve(&a, &rhs, &mut x, controls)?;
        if !rep.converged {
            return Err(Error::Solver {
                reason: format!("momentum component {k} did not converge in {} iterations", rep.iterations),
                history: rep.history.iter().rev().take(10).rev().copied().collect(),
            });
        }
        for (o, v) in out.iter_mut().zip(&x) {
            o[k] = *v;
        }
        reports.push(rep);
    }
    Ok((out, reports))
}

/// `D⁻¹ (H u + b)`, then one application of the IB correction when an
/// operator and datum are given.
pub fn intermediate_velocity(sys: &MomentumSystem, u13: &[Vec3], ib: Option<(&InterpOperator, &[Vec3])>) -> Vec<Vec3> {
    let hbya = sys.hbya(u13, None);
    match ib {
        Some((op, g)) => op.correct_vector(g, &hbya),
        None => hbya,
    }
}

/// Cell pressure diffusivity `ρ V / D` for kinematic pressure.
pub fn pressure_diffusivity(mesh: &Mesh, diag: &[f64], density: f64) -> Result<Vec<f64>> {
    if let Some(i) = diag.iter().position(|d| !(*d > 0.0) || !d.is_finite()) {
        return Err(Error::Assembly(format!("momentum diagonal {} in cell {i} is not positive", diag[i])));
    }
    Ok(diag.iter().zip(mesh.volumes()).map(|(d, v)| density * v / d).collect())
}

/// IB-consistent diffusivity `S κ`: unchanged on fluid cells, zero on solid
/// cells, the S-row combination of member diffusivities on IB cells. IB rows
/// whose combination is not positive keep the plain value and are returned
/// as flagged.
pub fn ib_pressure_diffusivity(op: &InterpOperator, kappa: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut out = kappa.to_vec();
    let mut flagged = Vec::new();
    for (c, l) in op.labels().iter().enumerate() {
        match l {
            CellLabel::Fluid => {}
            CellLabel::Solid => out[c] = 0.0,
            CellLabel::Ib => {
                let k: f64 = op.s.row(c).map(|(j, s)| s * kappa[j]).sum();
                if k > 0.0 {
                    out[c] = k;
                } else {
                    flagged.push(c);
                }
            }
        }
    }
    (out, flagged)
}

/// Face fluxes of the interpolated velocity; prescribed-velocity patches
/// use their datum, symmetry patches carry nothing, outflow patches take
/// the owner value.
pub fn predicted_flux(mesh: &Mesh, bcs: &BoundaryConditions, u: &[Vec3], time: f64) -> Vec<f64> {
    let mut phi = vec![0.0; mesh.n_faces()];
    for (f, pf) in phi.iter_mut().enumerate().take(mesh.n_internal_faces()) {
        let face = mesh.face(f);
        let w = mesh.face_weight(f);
        *pf = (u[face.owner] * w + u[face.neighbour.unwrap()] * (1.0 - w)).dot(&mesh.face_area(f));
    }
    for (f, pf) in phi.iter_mut().enumerate().skip(mesh.n_internal_faces()) {
        let o = mesh.face(f).owner;
        *pf = match bcs.velocity_condition(mesh, f) {
            VelocityCondition::Fixed(m) => m.boundary_velocity(&mesh.face_centre(f), time).dot(&mesh.face_area(f)),
            VelocityCondition::Symmetry => 0.0,
            VelocityCondition::ZeroGradient => u[o].dot(&mesh.face_area(f)),
        };
    }
    phi
}

/// Assembled pressure operator with its bookkeeping.
#[derive(Debug, Clone)]
pub struct PressureOperator {
    pub matrix: CsrMatrix,
    /// Rows with no coupling at all (deep inside a body), replaced by identity.
    pub inactive: Vec<bool>,
    /// Cell whose diagonal is doubled to fix the gauge on closed domains.
    pub reference: Option<usize>,
}

/// Compact Laplacian `R(κ)` with fixed outflow faces, identity rows for
/// uncoupled cells and, when `reference` is given, the single-cell pin.
pub fn pressure_operator(mesh: &Mesh, bcs: &BoundaryConditions, kappa: &[f64], reference: Option<usize>) -> PressureOperator {
    let mut matrix = laplacian_matrix(mesh, kappa, |f| bcs.pressure_fixed(mesh, f));
    let mut diag = matrix.diagonal();
    let inactive: Vec<bool> = diag.iter().map(|d| *d == 0.0).collect();
    for (d, &off) in diag.iter_mut().zip(&inactive) {
        if off {
            *d = 1.0;
        }
    }
    let reference = reference.filter(|&r| !inactive[r]);
    if let Some(r) = reference {
        diag[r] *= 2.0;
    }
    matrix.set_diagonal(&diag).expect("Laplacian stores diagonals");
    PressureOperator { matrix, inactive, reference }
}

#[derive(Debug, Clone)]
pub struct PressureSolution {
    pub p: Vec<f64>,
    /// Face fluxes after the pressure correction.
    pub phi: Vec<f64>,
    pub report: SolveReport,
}

/// Solves `R(κ) p = −Σ_f φ*_f` and corrects the face fluxes with the compact
/// pressure gradient. The right-hand side of a pinned (closed) system must
/// sum to zero over the coupled cells.
pub fn pressure_solve(
    mesh: &Mesh,
    bcs: &BoundaryConditions,
    op: &PressureOperator,
    kappa: &[f64],
    phi_star: &[f64],
    p0: &[f64],
    controls: &SolveControls,
) -> Result<PressureSolution> {
    let n = mesh.n_cells();
    let mut rhs = vec![0.0; n];
    for f in 0..mesh.n_faces() {
        let face = mesh.face(f);
        rhs[face.owner] -= phi_star[f];
        if let Some(nb) = face.neighbour {
            rhs[nb] += phi_star[f];
        }
    }
    for (r, &off) in rhs.iter_mut().zip(&op.inactive) {
        if off {
            *r = 0.0;
        }
    }
    if !bcs.has_pressure_outlet() {
        let imbalance: f64 = rhs.iter().sum();
        let scale: f64 = phi_star.iter().map(|v| v.abs()).sum::<f64>();
        let tolerance = 1e-9 * scale + 1e-300;
        if imbalance.abs() > tolerance {
            return Err(Error::Compatibility { imbalance: imbalance.abs(), tolerance });
        }
        if let Some(r) = op.reference {
            // The pinned value is zero.
            rhs[r] -= imbalance;
        }
    }
    let mut p: Vec<f64> = p0.iter().zip(&op.inactive).map(|(v, &off)| if off { 0.0 } else { *v }).collect();
    if let Some(r) = op.reference {
        // Start from the gauge so that the initial residual is meaningful.
        let shift = p[r];
        for v in p.iter_mut() {
            *v -= shift;
        }
    }
    let report = krylov_solve(&op.matrix, &rhs, &mut p, controls)?;
    if !report.converged {
        return Err(Error::Solver {
            reason: format!("pressure did not converge in {} iterations", report.iterations),
            history: report.history.iter().rev().take(10).rev().copied().collect(),
        });
    }
    let phi = corrected_flux(mesh, bcs, kappa, phi_star, &p);
    Ok(PressureSolution { p, phi, report })
}

/// `φ = φ* − κ_f c_f (p_N − p_P)` on internal and fixed-pressure faces.
pub fn corrected_flux(mesh: &Mesh, bcs: &BoundaryConditions, kappa: &[f64], phi_star: &[f64], p: &[f64]) -> Vec<f64> {
    let mut phi = phi_star.to_vec();
    for (f, pf) in phi.iter_mut().enumerate() {
        let face = mesh.face(f);
        let o = face.owner;
        match face.neighbour {
            Some(nb) => {
                let w = mesh.face_weight(f);
                let kf = w * kappa[o] + (1.0 - w) * kappa[nb];
                *pf -= kf * laplacian_coefficient(mesh, f) * (p[nb] - p[o]);
            }
            None if bcs.pressure_fixed(mesh, f) => {
                *pf -= kappa[o] * crate::fv::boundary_coefficient(mesh, f) * (0.0 - p[o]);
            }
            None => {}
        }
    }
    phi
}

/// Kinematic pressure gradient (Green–Gauss).
pub fn pressure_gradient(mesh: &Mesh, bcs: &BoundaryConditions, p: &[f64]) -> Vec<Vec3> {
    gauss_gradient(mesh, p, |f| bcs.face_pressure(mesh, f, p[mesh.face(f).owner]))
}

/// `u = u^{2/3} − κ ∇p`, followed on IB rows by the fixed-point solve of
/// `u = S_g g + S u` when an operator is given.
pub fn final_correction(
    mesh: &Mesh,
    bcs: &BoundaryConditions,
    u23: &[Vec3],
    kappa: &[f64],
    p: &[f64],
    ib: Option<(&InterpOperator, &[Vec3])>,
    tol: f64,
) -> Result<Vec<Vec3>> {
    let gp = pressure_gradient(mesh, bcs, p);
    let u: Vec<Vec3> = u23.iter().zip(&gp).zip(kappa).map(|((u, g), k)| u - g * *k).collect();
    match ib {
        Some((op, g)) => op.solve_fixed_point_vector(g, &u, tol),
        None => Ok(u),
    }
}

/// Cellwise `Σ_f φ_f`.
pub fn flux_divergence(mesh: &Mesh, phi: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_cells()];
    for (f, v) in phi.iter().enumerate() {
        let face = mesh.face(f);
        out[face.owner] += v;
        if let Some(nb) = face.neighbour {
            out[nb] -= v;
        }
    }
    out
}
