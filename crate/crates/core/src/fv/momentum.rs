use super::gradient::{face_gradient, least_squares_vector_gradient};
use super::operators::laplacian_coefficient;
use super::{boundary_coefficient, BoundaryConditions, ConvectionScheme, Scheme, TimeScheme, VelocityCondition};
use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::Mesh;
use crate::{Mat3, Vec3};

pub struct MomentumInputs<'a> {
    pub mesh: &'a Mesh,
    pub bcs: &'a BoundaryConditions,
    pub scheme: Scheme,
    pub density: f64,
    /// Cell dynamic viscosity.
    pub mu: &'a [f64],
    /// Volumetric face flux used to linearize convection.
    pub phi: &'a [f64],
    /// Current iterate, for explicit corrections.
    pub u: &'a [Vec3],
    pub u_old: &'a [Vec3],
    /// Second time level back, used by BDF2 when available.
    pub u_old2: Option<&'a [Vec3]>,
    /// N/m³
    pub body_force: Vec3,
    pub dt: f64,
    /// Time level being assembled.
    pub time: f64,
}

/// Linearized momentum system `D u − H u = b` per component. The off-diagonal
/// part (which is `−H`) is shared; diagonals differ only through symmetry
/// patches. The pressure gradient is not part of `b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentumSystem {
    /// Off-diagonal coefficients with an explicit zero diagonal in every row.
    pub off: CsrMatrix,
    pub diag: Vec<Vec3>,
    pub source: Vec<Vec3>,
}

impl MomentumSystem {
    pub fn n_cells(&self) -> usize {
        self.diag.len()
    }

    /// Full matrix of component `k`.
    pub fn matrix(&self, k: usize) -> CsrMatrix {
        let mut a = self.off.clone();
        let d: Vec<f64> = self.diag.iter().map(|v| v[k]).collect();
        a.set_diagonal(&d).expect("momentum pattern stores diagonals");
        a
    }

    /// Component-averaged diagonal, used for the pressure diffusivity.
    pub fn mean_diagonal(&self) -> Vec<f64> {
        self.diag.iter().map(|d| (d.x + d.y + d.z) / 3.0).collect()
    }

    /// Smallest component diagonal less the neighbour coefficients,
    /// `min_k D_k − Σ a_nb`. Symmetry patches only ever add to one
    /// component, so the smallest one is the plain transport diagonal.
    pub fn consistent_diagonal(&self) -> Vec<f64> {
        self.diag
            .iter()
            .map(|d| d.min())
            .enumerate()
            .map(|(i, d)| d + self.off.row(i).filter(|&(j, _)| j != i).map(|(_, v)| v).sum::<f64>())
            .collect()
    }

    /// `H u`.
    pub fn h_apply(&self, u: &[Vec3]) -> Vec<Vec3> {
        let mut out = vec![Vec3::zeros(); u.len()];
        for k in 0..3 {
            let uk: Vec<f64> = u.iter().map(|v| v[k]).collect();
            for (o, v) in out.iter_mut().zip(self.off.mul_vec(&uk)) {
                o[k] = -v;
            }
        }
        out
    }

    /// `(H u + b + extra) / D` componentwise.
    pub fn hbya(&self, u: &[Vec3], extra: Option<&[Vec3]>) -> Vec<Vec3> {
        let h = self.h_apply(u);
        (0..self.n_cells())
            .map(|i| {
                let mut r = h[i] + self.source[i];
                if let Some(e) = extra {
                    r += e[i];
                }
                r.component_div(&self.diag[i])
            })
            .collect()
    }

    /// Implicit under-relaxation towards `u_prev`.
    pub fn relax(&mut self, alpha: f64, u_prev: &[Vec3]) {
        if alpha >= 1.0 {
            return;
        }
        for i in 0..self.n_cells() {
            let d_new = self.diag[i] / alpha;
            self.source[i] += (d_new - self.diag[i]).component_mul(&u_prev[i]);
            self.diag[i] = d_new;
        }
    }

    /// Replaces row `cell` by `D u = D value`, keeping the assembled diagonal.
    pub fn impose(&mut self, cell: usize, value: Vec3) {
        self.off.clear_off_diagonal(cell);
        self.source[cell] = self.diag[cell].component_mul(&value);
    }

    /// Replaces each listed row by the implicit relation
    /// `u_c = value + Σ_j s_j u_j`, scaled by the mean assembled diagonal
    /// of the row so that `D⁻¹(H u + b)` evaluates the relation.
    pub fn impose_relations(&mut self, rows: &[(usize, Vec<(usize, f64)>, Vec3)]) {
        let n = self.n_cells();
        let mut replaced = vec![None; n];
        for (k, r) in rows.iter().enumerate() {
            replaced[r.0] = Some(k);
        }
        let mut b = TripletBuilder::with_capacity(n, n, self.off.nnz() + rows.iter().map(|r| r.1.len()).sum::<usize>());
        for i in 0..n {
            b.push(i, i, 0.0);
            match replaced[i] {
                None => {
                    for (j, v) in self.off.row(i) {
                        if j != i {
                            b.push(i, j, v);
                        }
                    }
                }
                Some(k) => {
                    let (_, coeffs, value) = &rows[k];
                    let d = (self.diag[i].x + self.diag[i].y + self.diag[i].z) / 3.0;
                    let mut own = 0.0;
                    for &(j, s) in coeffs {
                        if j == i {
                            own += s;
                        } else {
                            b.push(i, j, -d * s);
                        }
                    }
                    self.diag[i] = Vec3::repeat(d * (1.0 - own));
                    self.source[i] = value * d;
                }
            }
        }
        self.off = b.build();
    }

    /// `b + extra − A u` per cell.
    pub fn residual(&self, u: &[Vec3], extra: &[Vec3]) -> Vec<Vec3> {
        let h = self.h_apply(u);
        (0..self.n_cells())
            .map(|i| h[i] + self.source[i] + extra[i] - self.diag[i].component_mul(&u[i]))
            .collect()
    }
}

fn van_leer(r: f64) -> f64 {
    (r + r.abs()) / (1.0 + r.abs())
}

/// Limited face value minus the upwind value for a flux from `up` to `down`.
pub(crate) fn limited_correction(u_up: f64, u_down: f64, grad_up: &Vec3, d_up_down: &Vec3) -> f64 {
    let jump = u_down - u_up;
    if jump.abs() <= 1e-300 {
        return 0.0;
    }
    let r = 2.0 * grad_up.dot(d_up_down) / jump - 1.0;
    0.5 * van_leer(r) * jump
}

/// Face flux of the explicit stress part `μ (∇uᵀ − (∇·u) I)`. The trace
/// vanishes for incompressible flow; leaving it out keeps the explicit term
/// from acting on a component through its own normal derivative, which is
/// unstable once `μ Δt / h²` is large.
fn transpose_stress(g: &Mat3, s: &Vec3, mu: f64) -> Vec3 {
    (g.transpose() * s - s * g.trace()) * mu
}

pub fn assemble_momentum(inp: &MomentumInputs<'_>) -> Result<MomentumSystem> {
    let mesh = inp.mesh;
    let n = mesh.n_cells();
    if inp.u.len() != n || inp.u_old.len() != n || inp.mu.len() != n || inp.phi.len() != mesh.n_faces() {
        return Err(Error::InvalidInput("momentum inputs do not match mesh size".into()));
    }
    if !(inp.dt > 0.0) {
        return Err(Error::InvalidInput(format!("time step must be positive, got {}", inp.dt)));
    }
    let rho = inp.density;
    let grad: Vec<Mat3> = least_squares_vector_gradient(mesh, inp.u, |f| {
        inp.bcs.face_velocity(mesh, f, &inp.u[mesh.face(f).owner], inp.time)
    });

    let mut off = TripletBuilder::with_capacity(n, n, n + 2 * mesh.n_internal_faces());
    for i in 0..n {
        off.push(i, i, 0.0);
    }
    let mut diag = vec![0.0; n];
    let mut diag_extra = vec![Vec3::zeros(); n];
    let mut source = vec![Vec3::zeros(); n];

    for f in 0..mesh.n_internal_faces() {
        let face = mesh.face(f);
        let (o, nb) = (face.owner, face.neighbour.unwrap());
        if o == nb {
            continue;
        }
        let w = mesh.face_weight(f);
        let s = mesh.face_area(f);
        let delta = mesh.face_delta(f);
        let coef = laplacian_coefficient(mesh, f);
        let mu_f = w * inp.mu[o] + (1.0 - w) * inp.mu[nb];
        let a = mu_f * coef;
        diag[o] += a;
        diag[nb] += a;
        off.push(o, nb, -a);
        off.push(nb, o, -a);

        let flux = rho * inp.phi[f];
        if flux >= 0.0 {
            diag[o] += flux;
            off.push(nb, o, -flux);
        } else {
            off.push(o, nb, flux);
            diag[nb] -= flux;
        }

        let gf = face_gradient(mesh, &grad, f);
        let k = s - delta * coef;
        let mut explicit = transpose_stress(&gf, &s, mu_f);
        if k.norm() > 1e-12 * s.norm() {
            explicit += gf * k * mu_f;
        }
        if inp.scheme.convection == ConvectionScheme::CentralLimited && flux != 0.0 {
            let (up, down, d) = if flux > 0.0 { (o, nb, delta) } else { (nb, o, -delta) };
            let gu = grad[up];
            let mut corr = Vec3::zeros();
            for c in 0..3 {
                corr[c] = limited_correction(inp.u[up][c], inp.u[down][c], &gu.row(c).transpose(), &d);
            }
            explicit -= corr * flux;
        }
        source[o] += explicit;
        source[nb] -= explicit;
    }

    for f in mesh.n_internal_faces()..mesh.n_faces() {
        let o = mesh.face(f).owner;
        let s = mesh.face_area(f);
        let a = inp.mu[o] * boundary_coefficient(mesh, f);
        match inp.bcs.velocity_condition(mesh, f) {
            VelocityCondition::Fixed(m) => {
                let ub = m.boundary_velocity(&mesh.face_centre(f), inp.time);
                diag[o] += a;
                source[o] += ub * a;
                source[o] -= ub * (rho * ub.dot(&s));
                source[o] += transpose_stress(&grad[o], &s, inp.mu[o]);
            }
            VelocityCondition::ZeroGradient => {
                let flux = rho * inp.phi[f];
                if flux > 0.0 {
                    diag[o] += flux;
                } else {
                    source[o] -= inp.u[o] * flux;
                }
                source[o] += transpose_stress(&grad[o], &s, inp.mu[o]);
            }
            VelocityCondition::Symmetry => {
                let nrm = s.normalize();
                let u = inp.u[o];
                for c in 0..3 {
                    diag_extra[o][c] += a * nrm[c] * nrm[c];
                    let cross: f64 = (0..3).filter(|&k| k != c).map(|k| nrm[k] * u[k]).sum();
                    source[o][c] -= a * nrm[c] * cross;
                }
            }
        }
    }

    let bdf2 = inp.scheme.time == TimeScheme::Bdf2 && inp.u_old2.is_some();
    for i in 0..n {
        let v = mesh.volume(i);
        let m = rho * v / inp.dt;
        if bdf2 {
            let old2 = inp.u_old2.unwrap()[i];
            diag[i] += 1.5 * m;
            source[i] += (inp.u_old[i] * 2.0 - old2 * 0.5) * m;
        } else {
            diag[i] += m;
            source[i] += inp.u_old[i] * m;
        }
        source[i] += inp.body_force * v;
    }

    let diag: Vec<Vec3> = diag.iter().zip(&diag_extra).map(|(d, e)| Vec3::repeat(*d) + e).collect();
    Ok(MomentumSystem { off: off.build(), diag, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fv::{BoundaryConditions, PatchCondition, ThermalCondition};
    use crate::geometry::RigidMotion;
    use crate::mesh::{build_structured_grid, BoxSpec};

    fn inputs<'a>(
        mesh: &'a Mesh,
        bcs: &'a BoundaryConditions,
        mu: &'a [f64],
        phi: &'a [f64],
        u: &'a [Vec3],
        dt: f64,
    ) -> MomentumInputs<'a> {
        MomentumInputs {
            mesh,
            bcs,
            scheme: Scheme::default(),
            density: 1.0,
            mu,
            phi,
            u,
            u_old: u,
            u_old2: None,
            body_force: Vec3::zeros(),
            dt,
            time: 0.0,
        }
    }

    #[test]
    fn one_dimensional_diffusion_row() {
        let m = build_structured_grid(&BoxSpec::new(Vec3::zeros(), Vec3::new(5.0, 2.0, 3.0), [5, 1, 1])).unwrap();
        let bcs = BoundaryConditions::from_kinds(&m);
        let mu = vec![0.5; 5];
        let phi = vec![0.0; m.n_faces()];
        let u = vec![Vec3::zeros(); 5];
        let sys = assemble_momentum(&inputs(&m, &bcs, &mu, &phi, &u, f64::INFINITY)).unwrap();
        // Interior row: −μA/δ, Σ, −μA/δ with A = 6, δ = 1. The y and z walls
        // add μ A / (h/2) each to the diagonal.
        let a = sys.matrix(0);
        assert!((a.get(2, 1) + 3.0).abs() < 1e-12);
        assert!((a.get(2, 3) + 3.0).abs() < 1e-12);
        let side = 2.0 * 0.5 * 3.0 / 1.0 + 2.0 * 0.5 * 2.0 / 1.5;
        assert!((a.get(2, 2) - (6.0 + side)).abs() < 1e-12, "{}", a.get(2, 2));
    }

    #[test]
    fn steady_uniform_flow_in_a_periodic_box_is_an_equilibrium() {
        let mut spec = BoxSpec::unit([4, 4, 4]);
        spec.periodic = [true, true, true];
        let m = build_structured_grid(&spec).unwrap();
        let bcs = BoundaryConditions::from_kinds(&m);
        let u0 = Vec3::new(1.0, 0.3, -0.2);
        let fs = crate::fv::FieldSet::uniform(&m, u0, 300.0, 0.1);
        let mut scheme = Scheme::default();
        for conv in [ConvectionScheme::Upwind, ConvectionScheme::CentralLimited] {
            scheme.convection = conv;
            let mut inp = inputs(&m, &bcs, &fs.mu, &fs.phi, &fs.u, 0.1);
            inp.scheme = scheme;
            let sys = assemble_momentum(&inp).unwrap();
            for r in sys.residual(&fs.u, &vec![Vec3::zeros(); m.n_cells()]) {
                assert!(r.norm() < 1e-12);
            }
        }
    }

    #[test]
    fn moving_wall_enters_the_source() {
        let m = build_structured_grid(&BoxSpec::unit([3, 3, 1])).unwrap();
        let mut bcs = BoundaryConditions::from_kinds(&m);
        let lid = RigidMotion::new(Vec3::z(), Vec3::zeros(), 0.0, Vec3::new(2.0, 0.0, 0.0)).unwrap();
        bcs.set(&m, "ymax", PatchCondition { velocity: VelocityCondition::Fixed(lid), thermal: ThermalCondition::Insulated })
            .unwrap();
        let mu = vec![1.0; 9];
        let phi = vec![0.0; m.n_faces()];
        let u = vec![Vec3::zeros(); 9];
        let sys = assemble_momentum(&inputs(&m, &bcs, &mu, &phi, &u, f64::INFINITY)).unwrap();
        // Top row cells see μ |S| / (h/2) · 2 in x.
        let top = (0..9).filter(|&c| m.centre(c).y > 0.6).collect::<Vec<_>>();
        for c in top {
            let expect = 1.0 * (1.0 / 3.0) / (1.0 / 6.0) * 2.0;
            assert!((sys.source[c].x - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn relaxation_preserves_the_solution() {
        let m = build_structured_grid(&BoxSpec::unit([3, 2, 2])).unwrap();
        let bcs = BoundaryConditions::from_kinds(&m);
        let mu = vec![1.0; m.n_cells()];
        let phi = vec![0.0; m.n_faces()];
        let u: Vec<Vec3> = m.centres().iter().map(|x| Vec3::new(x.y, x.x, 0.0)).collect();
        let mut sys = assemble_momentum(&inputs(&m, &bcs, &mu, &phi, &u, 0.5)).unwrap();
        let r0 = sys.residual(&u, &vec![Vec3::zeros(); m.n_cells()]);
        sys.relax(0.7, &u);
        let r1 = sys.residual(&u, &vec![Vec3::zeros(); m.n_cells()]);
        for (a, b) in r0.iter().zip(&r1) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
