//! Segregated PIMPLE time stepping with immersed-boundary corrections.
//!
//! One outer iteration: update the viscosity, assemble momentum, replace IB
//! rows by the interpolation relation and solid rows by the body velocity,
//! predict, then for each pressure
//! corrector form `u* = D⁻¹(H u + b)` corrected once by the IB operator,
//! solve the pressure equation with diffusivity `S κ` (or the plain `κ` in
//! diffuse mode), correct fluxes and velocities, and finally solve the
//! temperature with viscous heating.

mod checkpoint;
mod steps;
#[cfg(test)]
mod tests;

use std::io::Write;

pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_HEADER};
pub use steps::{
    corrected_flux, final_correction, flux_divergence, ib_pressure_diffusivity, intermediate_velocity,
    momentum_predictor, predicted_flux, pressure_diffusivity, pressure_gradient, pressure_operator, pressure_solve,
    PressureOperator, PressureSolution,
};

use crate::error::{Error, Result};
use crate::fv::{
    assemble_momentum, assemble_temperature, least_squares_vector_gradient, BoundaryConditions, FieldSet,
    MomentumInputs, MomentumSystem, Scheme, TemperatureInputs, ThermalCondition,
};
use crate::geometry::{classify_cells, ib_points, CellLabel, Classification, ImmersedBody, IbPoint};
use crate::linalg::{krylov_solve, Preconditioner, SolveControls};
use crate::mesh::Mesh;
use crate::rheology::{shear_rate, viscosity, viscous_heating, ArrheniusShift, MaterialProps, PowerLawModel};
use crate::stencil::{build_stencils, Stencil, StencilCriteria};
use crate::wls::{DatumSource, InterpOperator, PolyBasis};
use crate::{Mat3, Vec3};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub end_time: f64,
    /// Outer (PIMPLE) iterations per step.
    pub outer_iterations: usize,
    pub pressure_correctors: usize,
    /// The outer loop stops early once the momentum initial residuals fall
    /// below this value.
    pub outer_tolerance: f64,
    pub momentum_tolerance: f64,
    pub pressure_tolerance: f64,
    pub temperature_tolerance: f64,
    /// Tolerance of the IB fixed-point solve in the final correction.
    pub ib_tolerance: f64,
    pub velocity_relaxation: f64,
    pub pressure_relaxation: f64,
    pub temperature_relaxation: f64,
    pub scheme: Scheme,
    /// Polynomial degree of the IB approximators.
    pub degree: usize,
    /// Diffuse-interface mode: the pressure equation and the final
    /// correction are left unmodified.
    pub dim: bool,
    pub solve_temperature: bool,
    /// Stop once the largest relative velocity change over a step is below
    /// this value.
    pub steady_tolerance: Option<f64>,
    /// Consecutive non-decreasing outer residuals that count as a stall.
    pub stall_window: usize,
    /// Also relax the last outer iteration of each step (steady,
    /// SIMPLE-like marching with large time steps).
    pub relax_final: bool,
    /// Consistent (SIMPLEC-type) pressure diffusivity `ρ V / (D − Σ a_nb)`.
    /// Needed once the viscous part of the diagonal dwarfs the time term,
    /// where `ρ V / D` badly underestimates the response of smooth modes.
    pub consistent: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            dt: 1e-3,
            end_time: 1e-2,
            outer_iterations: 1,
            pressure_correctors: 2,
            outer_tolerance: 1e-6,
            momentum_tolerance: 1e-10,
            pressure_tolerance: 1e-10,
            temperature_tolerance: 1e-12,
            ib_tolerance: 1e-12,
            velocity_relaxation: 0.7,
            pressure_relaxation: 0.3,
            temperature_relaxation: 1.0,
            scheme: Scheme::default(),
            degree: 2,
            dim: false,
            solve_temperature: false,
            steady_tolerance: None,
            stall_window: 5,
            relax_final: false,
            consistent: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            errs.push(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.end_time >= 0.0) {
            errs.push(format!("end time must be non-negative, got {}", self.end_time));
        }
        if self.outer_iterations == 0 || self.pressure_correctors == 0 {
            errs.push("outer iterations and pressure correctors must be at least 1".into());
        }
        for (name, v) in [
            ("momentum tolerance", self.momentum_tolerance),
            ("pressure tolerance", self.pressure_tolerance),
            ("temperature tolerance", self.temperature_tolerance),
            ("IB tolerance", self.ib_tolerance),
            ("outer tolerance", self.outer_tolerance),
        ] {
            if !(v > 0.0) {
                errs.push(format!("{name} must be positive, got {v}"));
            }
        }
        for (name, v) in [
            ("velocity relaxation", self.velocity_relaxation),
            ("pressure relaxation", self.pressure_relaxation),
            ("temperature relaxation", self.temperature_relaxation),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                errs.push(format!("{name} must lie in (0, 1], got {v}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Physics {
    pub material: MaterialProps,
    pub rheology: PowerLawModel,
    pub shift: ArrheniusShift,
    /// N/m³
    pub body_force: Vec3,
    /// Specific heat source, W/kg.
    pub heat_source: f64,
}

/// An immersed body plus how it is treated over time.
#[derive(Debug, Clone)]
pub struct BodySetup {
    /// Reference configuration; its motion gives the wall velocity.
    pub body: ImmersedBody,
    /// When set the surface is displaced by its motion every step;
    /// otherwise only the wall velocity is applied (for bodies of
    /// revolution spinning about their axis).
    pub moves: bool,
    /// Wall temperature; `None` leaves temperature uncorrected on the body.
    pub temperature: Option<f64>,
}

/// Classification, stencils and operator for the current surface position.
#[derive(Debug, Clone)]
pub struct IbState {
    pub bodies: Vec<ImmersedBody>,
    pub classification: Classification,
    pub ib_points: Vec<IbPoint>,
    pub stencils: Vec<Stencil>,
    pub operator: InterpOperator,
}

impl IbState {
    pub fn build(
        mesh: &Mesh,
        bodies: Vec<ImmersedBody>,
        degree: usize,
        criteria: &StencilCriteria,
        bcs: &BoundaryConditions,
    ) -> Result<Self> {
        let cls = classify_cells(mesh, &bodies, criteria.adjacency);
        for w in &cls.warnings {
            log::warn!("{w}");
        }
        let pts = ib_points(mesh, &cls, &bodies);
        let active = mesh.degenerate_axes().map(|d| !d);
        let basis = PolyBasis::with_active_axes(degree, active);
        let dirichlet: Vec<bool> = (0..mesh.n_faces())
            .map(|f| {
                f >= mesh.n_internal_faces()
                    && matches!(bcs.velocity_condition(mesh, f), crate::fv::VelocityCondition::Fixed(_))
            })
            .collect();
        let stencils = build_stencils(mesh, &cls, &pts, criteria, basis.n_coeffs(), &dirichlet)?;
        let operator = InterpOperator::build(mesh, &cls, &pts, &stencils, &basis)?;
        Ok(IbState { bodies, classification: cls, ib_points: pts, stencils, operator })
    }

    pub fn labels(&self) -> &[CellLabel] {
        &self.classification.labels
    }

    /// Body velocity at every datum location.
    pub fn velocity_datum(&self, mesh: &Mesh, bcs: &BoundaryConditions, setups: &[BodySetup], u: &[Vec3], time: f64) -> Vec<Vec3> {
        self.operator
            .layout
            .sources
            .iter()
            .map(|s| match *s {
                DatumSource::IbPoint(k) => {
                    let p = &self.ib_points[k];
                    setups[p.body].body.motion.boundary_velocity(&p.point, time)
                }
                DatumSource::SolidCell(c) => {
                    let b = self.classification.solid_body[c].unwrap_or(0);
                    setups[b].body.motion.boundary_velocity(&mesh.centre(c), time)
                }
                DatumSource::ConformingFace(f) => bcs.face_velocity(mesh, f, &u[mesh.face(f).owner], time),
            })
            .collect()
    }

    /// Wall temperatures at every datum location, when all bodies have one.
    pub fn temperature_datum(&self, mesh: &Mesh, bcs: &BoundaryConditions, setups: &[BodySetup], t: &[f64]) -> Option<Vec<f64>> {
        let temps: Option<Vec<f64>> = setups.iter().map(|s| s.temperature).collect();
        let temps = temps?;
        Some(
            self.operator
                .layout
                .sources
                .iter()
                .map(|s| match *s {
                    DatumSource::IbPoint(k) => temps[self.ib_points[k].body],
                    DatumSource::SolidCell(c) => temps[self.classification.solid_body[c].unwrap_or(0)],
                    DatumSource::ConformingFace(f) => bcs.face_temperature(mesh, f, t[mesh.face(f).owner]),
                })
                .collect(),
        )
    }
}

/// Plain `ρ V / D` on cells that carry flow, zero inside bodies where the
/// velocity is prescribed.
pub fn unmodified_diffusivity(base: &[f64], labels: &[CellLabel]) -> Vec<f64> {
    base.iter().zip(labels).map(|(k, l)| if *l == CellLabel::Solid { 0.0 } else { *k }).collect()
}

/// One line of the residual log.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualRecord {
    pub time: f64,
    pub iteration: usize,
    pub equation: &'static str,
    pub initial: f64,
    pub final_: f64,
}

pub const RESIDUAL_CSV_HEADER: &str = "time,iter,eq,initial,final";

pub fn write_residual_csv(records: &[ResidualRecord], w: &mut impl Write) -> Result<()> {
    writeln!(w, "{RESIDUAL_CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{:.9e},{},{},{:.6e},{:.6e}", r.time, r.iteration, r.equation, r.initial, r.final_)?;
    }
    Ok(())
}

/// Time-level data plus the intermediates of the latest sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeLoopState {
    pub time: f64,
    pub step: usize,
    /// Fields at the current time level.
    pub fields: FieldSet,
    /// Previous time level (for second-order time stepping).
    pub u_prev: Option<Vec<Vec3>>,
    pub t_prev: Option<Vec<f64>>,
    /// Predicted velocity of the latest sweep.
    pub u_predicted: Vec<Vec3>,
    /// `D⁻¹(H u + b)` after the IB correction.
    pub u_intermediate: Vec<Vec3>,
    /// Incremented at each momentum assembly; the intermediates belong to it.
    pub epoch: u64,
    pub residuals: Vec<ResidualRecord>,
}

impl TimeLoopState {
    pub fn new(fields: FieldSet) -> Self {
        let n = fields.u.len();
        TimeLoopState {
            time: 0.0,
            step: 0,
            fields,
            u_prev: None,
            t_prev: None,
            u_predicted: vec![Vec3::zeros(); n],
            u_intermediate: vec![Vec3::zeros(); n],
            epoch: 0,
            residuals: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub time: f64,
    pub outer_iterations: usize,
    pub converged: bool,
    /// Total volumetric heat release integrated over the domain, W.
    pub heating_power: f64,
    /// Largest `|Σ_f φ_f|` over non-solid cells.
    pub max_imbalance: f64,
    /// Largest relative velocity change over the step.
    pub velocity_change: f64,
    /// IB rows whose pressure diffusivity fell back to the plain value.
    pub flagged_rows: usize,
}

pub struct Solver {
    pub mesh: Mesh,
    pub bcs: BoundaryConditions,
    pub physics: Physics,
    pub config: SolverConfig,
    pub bodies: Vec<BodySetup>,
    pub criteria: StencilCriteria,
    pub ib: Option<IbState>,
    pub state: TimeLoopState,
}

impl Solver {
    pub fn new(
        mesh: Mesh,
        bcs: BoundaryConditions,
        physics: Physics,
        config: SolverConfig,
        bodies: Vec<BodySetup>,
        criteria: StencilCriteria,
        fields: FieldSet,
    ) -> Result<Self> {
        config.validate()?;
        physics.rheology.validate()?;
        fields.validate(&mesh)?;
        if bcs.patches.len() != mesh.patches().len() {
            return Err(Error::InvalidInput("one boundary condition per patch is required".into()));
        }
        let ib = if bodies.is_empty() {
            None
        } else {
            let now = bodies.iter().map(|b| b.body.clone()).collect();
            Some(IbState::build(&mesh, now, config.degree, &criteria, &bcs)?)
        };
        let mut solver = Solver { mesh, bcs, physics, config, bodies, criteria, ib, state: TimeLoopState::new(fields) };
        solver.update_viscosity()?;
        if let Some(ib) = &solver.ib {
            let g = ib.velocity_datum(&solver.mesh, &solver.bcs, &solver.bodies, &solver.state.fields.u, 0.0);
            solver.state.fields.u = ib.operator.correct_vector(&g, &solver.state.fields.u);
        }
        let mut phi = predicted_flux(&solver.mesh, &solver.bcs, &solver.state.fields.u, 0.0);
        solver.bcs.apply_boundary_fluxes(&solver.mesh, &mut phi, 0.0);
        solver.state.fields.phi = phi;
        Ok(solver)
    }

    pub fn fields(&self) -> &FieldSet {
        &self.state.fields
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    pub fn labels(&self) -> Vec<CellLabel> {
        match &self.ib {
            Some(ib) => ib.labels().to_vec(),
            None => vec![CellLabel::Fluid; self.mesh.n_cells()],
        }
    }

    fn velocity_gradient(&self, u: &[Vec3], time: f64) -> Vec<Mat3> {
        least_squares_vector_gradient(&self.mesh, u, |f| {
            self.bcs.face_velocity(&self.mesh, f, &u[self.mesh.face(f).owner], time)
        })
    }

    /// Cell velocity gradients of the current state.
    pub fn velocity_gradients(&self) -> Vec<Mat3> {
        self.velocity_gradient(&self.state.fields.u, self.state.time)
    }

    /// Recomputes shear rate and viscosity from the current velocity and
    /// temperature.
    pub fn update_viscosity(&mut self) -> Result<()> {
        let grad = self.velocity_gradient(&self.state.fields.u, self.state.time);
        let fs = &mut self.state.fields;
        for (i, g) in grad.iter().enumerate() {
            fs.shear_rate[i] = shear_rate(g);
            fs.mu[i] = viscosity(&self.physics.rheology, &self.physics.shift, fs.shear_rate[i], fs.t[i])?;
        }
        Ok(())
    }

    /// Volumetric heat release per cell for the current fields.
    pub fn heating(&self) -> Vec<f64> {
        let fs = &self.state.fields;
        let grad = self.velocity_gradient(&fs.u, self.state.time);
        let rho = self.physics.material.density;
        (0..self.mesh.n_cells())
            .map(|i| {
                viscous_heating(fs.mu[i], &grad[i]) + rho * self.physics.heat_source - fs.u[i].dot(&self.physics.body_force)
            })
            .collect()
    }

    fn gauge_cell(&self) -> Option<usize> {
        if self.bcs.has_pressure_outlet() {
            return None;
        }
        match &self.ib {
            Some(ib) => ib.labels().iter().position(|l| *l == CellLabel::Fluid).or(Some(0)),
            None => Some(0),
        }
    }

    /// Moves surfaces to `time`, rebuilding the IB data when any label
    /// changes. Cells that leave the solid take the IB interpolation of the
    /// current field.
    fn move_surfaces(&mut self, time: f64) -> Result<()> {
        if !self.bodies.iter().any(|b| b.moves) || self.ib.is_none() {
            return Ok(());
        }
        let now: Vec<ImmersedBody> = self
            .bodies
            .iter()
            .map(|b| if b.moves { b.body.at_time(time) } else { Ok(b.body.clone()) })
            .collect::<Result<_>>()?;
        let cls = classify_cells(&self.mesh, &now, self.criteria.adjacency);
        let old = self.ib.as_ref().unwrap();
        if cls.labels == old.classification.labels {
            return Ok(());
        }
        let old_labels = old.classification.labels.clone();
        let fresh = IbState::build(&self.mesh, now, self.config.degree, &self.criteria, &self.bcs)?;
        let g = fresh.velocity_datum(&self.mesh, &self.bcs, &self.bodies, &self.state.fields.u, time);
        let interp = fresh.operator.correct_vector(&g, &self.state.fields.u);
        for c in 0..self.mesh.n_cells() {
            if old_labels[c] == CellLabel::Solid && fresh.labels()[c] != CellLabel::Solid {
                self.state.fields.u[c] = interp[c];
            }
        }
        log::info!("t = {time}: IB data rebuilt ({} IB cells)", fresh.ib_points.len());
        self.ib = Some(fresh);
        Ok(())
    }

    fn momentum_controls(&self) -> SolveControls {
        SolveControls { preconditioner: Preconditioner::Ilu0, ..SolveControls::bicgstab(self.config.momentum_tolerance) }
    }

    fn pressure_controls(&self) -> SolveControls {
        SolveControls { preconditioner: Preconditioner::Ilu0, max_iter: 5000, ..SolveControls::cg(self.config.pressure_tolerance) }
    }

    /// Cell pressure diffusivities for the assembled system: the plain
    /// `ρ V / D` and the one the pressure equation uses.
    pub fn pressure_diffusivities(&self, sys: &MomentumSystem) -> Result<(Vec<f64>, Vec<f64>, usize)> {
        let base = pressure_diffusivity(&self.mesh, &self.pressure_diagonal(sys), self.physics.material.density)?;
        match (&self.ib, self.config.dim) {
            (Some(ib), false) => {
                let (k, flagged) = ib_pressure_diffusivity(&ib.operator, &base);
                Ok((base, k, flagged.len()))
            }
            (Some(ib), true) => {
                let k = unmodified_diffusivity(&base, ib.labels());
                Ok((base, k, 0))
            }
            (None, _) => {
                let k = base.clone();
                Ok((base, k, 0))
            }
        }
    }

    /// Diagonal behind the pressure diffusivity. In consistent mode fluid
    /// rows use `D̄ − Σ a_nb` where that is positive.
    fn pressure_diagonal(&self, sys: &MomentumSystem) -> Vec<f64> {
        let mean = sys.mean_diagonal();
        if !self.config.consistent {
            return mean;
        }
        let labels = self.labels();
        sys.consistent_diagonal()
            .into_iter()
            .zip(mean)
            .zip(labels)
            .map(|((c, d), l)| if l == CellLabel::Fluid && c > 0.0 { c } else { d })
            .collect()
    }

    fn assemble(&self, u_old: &[Vec3], time: f64) -> Result<MomentumSystem> {
        let fs = &self.state.fields;
        assemble_momentum(&MomentumInputs {
            mesh: &self.mesh,
            bcs: &self.bcs,
            scheme: self.config.scheme,
            density: self.physics.material.density,
            mu: &fs.mu,
            phi: &fs.phi,
            u: &fs.u,
            u_old,
            u_old2: self.state.u_prev.as_deref(),
            body_force: self.physics.body_force,
            dt: self.config.dt,
            time,
        })
    }

    /// Replaces IB rows by the interpolation relation `u = S_g g + S u`
    /// (implicit in the member cells) and solid rows by the body velocity.
    /// The pressure source of those rows is dropped.
    fn impose_body_rows(&self, sys: &mut MomentumSystem, extra: &mut [Vec3], g: &[Vec3]) {
        let Some(ib) = &self.ib else { return };
        let n = self.mesh.n_cells();
        let datum_part = ib.operator.correct_vector(g, &vec![Vec3::zeros(); n]);
        let mut rows = Vec::new();
        for (c, l) in ib.labels().iter().enumerate() {
            match l {
                CellLabel::Fluid => continue,
                CellLabel::Ib => rows.push((c, ib.operator.s.row(c).collect(), datum_part[c])),
                CellLabel::Solid => rows.push((c, Vec::new(), datum_part[c])),
            }
            extra[c] = Vec3::zeros();
        }
        sys.impose_relations(&rows);
    }

    /// Pressure operator of the next sweep for the current state, as used by
    /// the configured mode and as the unmodified algorithm would build it.
    pub fn pressure_operators(&self) -> Result<(PressureOperator, PressureOperator)> {
        let time = self.state.time + self.config.dt;
        let mut sys = self.assemble(&self.state.fields.u, time)?;
        if let Some(ib) = &self.ib {
            let g = ib.velocity_datum(&self.mesh, &self.bcs, &self.bodies, &self.state.fields.u, time);
            let mut extra = vec![Vec3::zeros(); self.mesh.n_cells()];
            self.impose_body_rows(&mut sys, &mut extra, &g);
        }
        let (base, kappa, _) = self.pressure_diffusivities(&sys)?;
        let plain = match &self.ib {
            Some(ib) => unmodified_diffusivity(&base, ib.labels()),
            None => base,
        };
        let gauge = self.gauge_cell();
        Ok((
            pressure_operator(&self.mesh, &self.bcs, &kappa, gauge),
            pressure_operator(&self.mesh, &self.bcs, &plain, gauge),
        ))
    }

    /// Advances one time step.
    pub fn step(&mut self) -> Result<StepReport> {
        let dt = self.config.dt;
        let time = self.state.time + dt;
        self.move_surfaces(time)?;
        let n = self.mesh.n_cells();
        let rho = self.physics.material.density;
        let u_old = self.state.fields.u.clone();
        let t_old = self.state.fields.t.clone();
        let mut history: Vec<f64> = Vec::new();
        let mut converged = false;
        let mut outer_done = 0;
        let mut heating_power = 0.0;
        let mut flagged_rows = 0;
        let max_outer = self.config.outer_iterations;
        self.bcs.apply_boundary_fluxes(&self.mesh, &mut self.state.fields.phi, time);

        for outer in 0..max_outer {
            outer_done = outer + 1;
            self.update_viscosity()?;
            let mut sys = self.assemble(&u_old, time)?;
            self.state.epoch += 1;

            let labels = self.labels();
            let g = self
                .ib
                .as_ref()
                .map(|ib| ib.velocity_datum(&self.mesh, &self.bcs, &self.bodies, &self.state.fields.u, time));

            // Momentum residual of the current iterate on free rows.
            let gp = pressure_gradient(&self.mesh, &self.bcs, &self.state.fields.p);
            let mut extra: Vec<Vec3> = gp.iter().zip(self.mesh.volumes()).map(|(g, v)| -g * (rho * v)).collect();
            let res = sys.residual(&self.state.fields.u, &extra);
            let mut num = 0.0;
            let mut den = 0.0;
            for i in 0..n {
                if labels[i] == CellLabel::Fluid {
                    num += res[i].norm_squared();
                    den += (sys.source[i] + extra[i]).norm_squared() + sys.diag[i].component_mul(&self.state.fields.u[i]).norm_squared();
                }
            }
            let outer_res = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
            history.push(outer_res);
            let last = outer + 1 == max_outer || (outer > 0 && outer_res < self.config.outer_tolerance);
            if outer > 0 && outer_res < self.config.outer_tolerance {
                converged = true;
            }

            let relax = !last || self.config.relax_final;
            if relax {
                sys.relax(self.config.velocity_relaxation, &self.state.fields.u);
            }
            if let Some(g) = &g {
                self.impose_body_rows(&mut sys, &mut extra, g);
            }

            let (u13, reports) = momentum_predictor(&sys, &extra, &self.state.fields.u, &self.momentum_controls())?;
            for (k, r) in reports.iter().enumerate() {
                self.state.residuals.push(ResidualRecord {
                    time,
                    iteration: outer + 1,
                    equation: ["Ux", "Uy", "Uz"][k],
                    initial: r.normalized_initial(),
                    final_: if r.rhs_norm > 0.0 { r.final_residual / r.rhs_norm } else { r.final_residual },
                });
            }
            self.state.u_predicted = u13.clone();

            let (base, kappa, flagged) = self.pressure_diffusivities(&sys)?;
            flagged_rows = flagged;
            let pop = pressure_operator(&self.mesh, &self.bcs, &kappa, self.gauge_cell());
            let ib_arg = match (&self.ib, &g) {
                (Some(ib), Some(g)) => Some((&ib.operator, g.as_slice())),
                _ => None,
            };
            let final_ib = if self.config.dim { None } else { ib_arg };
            let mut u = u13;
            let p_prev = self.state.fields.p.clone();
            let mut p = p_prev.clone();
            let shift = if self.config.consistent {
                let least: Vec<f64> = sys.diag.iter().map(|d| d.min()).collect();
                let plain = pressure_diffusivity(&self.mesh, &least, rho)?;
                let labels = self.labels();
                Some((0..n).map(|i| if labels[i] == CellLabel::Fluid { base[i] - plain[i] } else { 0.0 }).collect::<Vec<f64>>())
            } else {
                None
            };
            for _ in 0..self.config.pressure_correctors {
                let mut u23 = intermediate_velocity(&sys, &u, ib_arg);
                let mut phi_star = predicted_flux(&self.mesh, &self.bcs, &u23, time);
                if let Some(shift) = &shift {
                    // Hand the part of the current pressure gradient that
                    // the larger diffusivity takes back out to the
                    // intermediate field, on faces through the compact
                    // difference. The shift vanishes off fluid rows.
                    let p_now = &self.state.fields.p;
                    let negated: Vec<f64> = shift.iter().map(|k| -k).collect();
                    phi_star = corrected_flux(&self.mesh, &self.bcs, &negated, &phi_star, p_now);
                    let gp = pressure_gradient(&self.mesh, &self.bcs, p_now);
                    let volumes = self.mesh.volumes();
                    for i in (0..n).filter(|&i| shift[i] != 0.0) {
                        let own = (rho * volumes[i]) * Vec3::repeat(1.0).component_div(&sys.diag[i]);
                        u23[i] += (Vec3::repeat(base[i]) - own).component_mul(&gp[i]);
                    }
                }
                let sol = pressure_solve(&self.mesh, &self.bcs, &pop, &kappa, &phi_star, &p, &self.pressure_controls())?;
                self.state.residuals.push(ResidualRecord {
                    time,
                    iteration: outer + 1,
                    equation: "p",
                    initial: sol.report.normalized_initial(),
                    final_: if sol.report.rhs_norm > 0.0 { sol.report.final_residual / sol.report.rhs_norm } else { sol.report.final_residual },
                });
                self.state.fields.phi = sol.phi;
                p = sol.p;
                let p_used: Vec<f64> = if !relax {
                    p.clone()
                } else {
                    let a = self.config.pressure_relaxation;
                    p_prev.iter().zip(&p).map(|(o, v)| o + a * (v - o)).collect()
                };
                u = final_correction(&self.mesh, &self.bcs, &u23, &base, &p_used, final_ib, self.config.ib_tolerance)?;
                self.state.u_intermediate = u23;
                self.state.fields.p = p_used;
            }
            self.state.fields.u = u;

            if self.config.solve_temperature {
                heating_power = self.solve_temperature(&t_old, time, outer + 1)?;
            }

            let w = self.config.stall_window;
            if !converged && w > 0 && history.len() > w {
                let tail = &history[history.len() - w - 1..];
                if tail.windows(2).all(|p| p[1] >= p[0]) {
                    return Err(Error::StepStalled { time, residuals: history });
                }
            }
            if converged {
                break;
            }
        }
        if !self.config.solve_temperature {
            let q = self.heating();
            heating_power = q.iter().zip(self.mesh.volumes()).map(|(a, v)| a * v).sum();
        }

        let labels = self.labels();
        let div = flux_divergence(&self.mesh, &self.state.fields.phi);
        let max_imbalance = (0..n)
            .filter(|&i| labels[i] != CellLabel::Solid)
            .map(|i| div[i].abs())
            .fold(0.0, f64::max);
        let mut du: f64 = 0.0;
        let mut umax: f64 = 0.0;
        for i in 0..n {
            du = du.max((self.state.fields.u[i] - u_old[i]).norm());
            umax = umax.max(self.state.fields.u[i].norm());
        }
        let velocity_change = if umax > 0.0 { du / umax } else { du };

        self.state.u_prev = Some(u_old);
        self.state.t_prev = Some(t_old);
        self.state.time = time;
        self.state.step += 1;
        Ok(StepReport {
            time,
            outer_iterations: outer_done,
            converged: converged || max_outer == 1,
            heating_power,
            max_imbalance,
            velocity_change,
            flagged_rows,
        })
    }

    /// Solves the temperature equation with heating from the current
    /// velocity; returns the total heat release.
    fn solve_temperature(&mut self, t_old: &[f64], time: f64, iteration: usize) -> Result<f64> {
        let heating = self.heating();
        let total: f64 = heating.iter().zip(self.mesh.volumes()).map(|(a, v)| a * v).sum();
        let mat = &self.physics.material;
        let fs = &self.state.fields;
        let mut sys = assemble_temperature(&TemperatureInputs {
            mesh: &self.mesh,
            bcs: &self.bcs,
            scheme: self.config.scheme,
            density: mat.density,
            specific_heat: mat.specific_heat,
            conductivity: mat.conductivity,
            phi: &fs.phi,
            t: &fs.t,
            t_old,
            t_old2: self.state.t_prev.as_deref(),
            heating: &heating,
            dt: self.config.dt,
        })?;
        let datum = self
            .ib
            .as_ref()
            .and_then(|ib| ib.temperature_datum(&self.mesh, &self.bcs, &self.bodies, &fs.t).map(|g| (ib, g)));
        if let Some((ib, g)) = &datum {
            let lagged = ib.operator.correct_field(g, &fs.t);
            for (c, l) in ib.labels().iter().enumerate() {
                if *l != CellLabel::Fluid {
                    sys.impose(c, lagged[c]);
                }
            }
        }
        let a = self.config.temperature_relaxation;
        if a < 1.0 {
            let d = sys.matrix.diagonal();
            let relaxed: Vec<f64> = d.iter().map(|v| v / a).collect();
            for i in 0..d.len() {
                sys.source[i] += (relaxed[i] - d[i]) * fs.t[i];
            }
            sys.matrix.set_diagonal(&relaxed)?;
        }
        let mut t = fs.t.clone();
        let controls = SolveControls { preconditioner: Preconditioner::Ilu0, ..SolveControls::bicgstab(self.config.temperature_tolerance) };
        let rep = krylov_solve(&sys.matrix, &sys.source, &mut t, &controls)?;
        if !rep.converged {
            return Err(Error::Solver { reason: "temperature did not converge".into(), history: rep.history });
        }
        if let Some((ib, g)) = &datum {
            t = ib.operator.solve_fixed_point(g, &t, self.config.ib_tolerance)?;
        }
        if let Some(i) = t.iter().position(|v| !(*v > 0.0)) {
            return Err(Error::InvalidInput(format!("temperature became non-positive in cell {i}")));
        }
        self.state.residuals.push(ResidualRecord {
            time,
            iteration,
            equation: "T",
            initial: rep.normalized_initial(),
            final_: if rep.rhs_norm > 0.0 { rep.final_residual / rep.rhs_norm } else { rep.final_residual },
        });
        self.state.fields.t = t;
        Ok(total)
    }

    /// Steps until the end time (or the steady criterion), calling
    /// `observer` after each step.
    pub fn run(&mut self, mut observer: impl FnMut(&Solver, &StepReport) -> Result<()>) -> Result<Vec<StepReport>> {
        let mut reports = Vec::new();
        let eps = 1e-9 * self.config.dt;
        while self.state.time + eps < self.config.end_time {
            let rep = self.step()?;
            observer(self, &rep)?;
            let steady = self.config.steady_tolerance.is_some_and(|tol| rep.velocity_change < tol);
            reports.push(rep);
            if steady {
                break;
            }
        }
        Ok(reports)
    }

    /// Re-evaluates `S_g g + S u` on the final velocity; returns the largest
    /// deviation over IB cells.
    pub fn ib_replay_error(&self) -> f64 {
        let Some(ib) = &self.ib else { return 0.0 };
        let u = &self.state.fields.u;
        let g = ib.velocity_datum(&self.mesh, &self.bcs, &self.bodies, u, self.state.time);
        let replay = ib.operator.correct_vector(&g, u);
        ib.operator.rows.iter().map(|r| (replay[r.cell] - u[r.cell]).norm()).fold(0.0, f64::max)
    }

    /// Temperature of fixed-temperature patches, for reporting.
    pub fn patch_temperature(&self, patch: usize) -> Option<f64> {
        match self.bcs.patches[patch].thermal {
            ThermalCondition::Fixed(t) => Some(t),
            ThermalCondition::Insulated => None,
        }
    }
}
