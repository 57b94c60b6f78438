//! Preconditioned Krylov solvers: conjugate gradients for symmetric positive
//! definite systems, BiCGSTAB for general ones.

use super::sparse::{dot, norm2, CsrMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Preconditioner {
    None,
    #[default]
    Jacobi,
    /// Incomplete LU with zero fill. On symmetric matrices this is the
    /// incomplete Cholesky factorization in `L D Lᵀ` form.
    Ilu0,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KrylovMethod {
    /// Conjugate gradients (SPD path: pressure, temperature).
    Cg,
    /// BiCGSTAB (general path: momentum, IB fixed point).
    #[default]
    BiCgStab,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveControls {
    pub method: KrylovMethod,
    pub preconditioner: Preconditioner,
    /// Stop when `‖r‖₂ ≤ rel_tol · ‖b‖₂` ...
    pub rel_tol: f64,
    /// ... or when `‖r‖₂ ≤ abs_tol`.
    pub abs_tol: f64,
    pub max_iter: usize,
}

impl Default for SolveControls {
    fn default() -> Self {
        Self {
            method: KrylovMethod::BiCgStab,
            preconditioner: Preconditioner::Jacobi,
            rel_tol: 1e-10,
            abs_tol: 0.0,
            max_iter: 2000,
        }
    }
}

impl SolveControls {
    pub fn cg(rel_tol: f64) -> Self {
        Self {
            method: KrylovMethod::Cg,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn bicgstab(rel_tol: f64) -> Self {
        Self {
            method: KrylovMethod::BiCgStab,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub rhs_norm: f64,
    pub converged: bool,
    pub history: Vec<f64>,
}

impl SolveReport {
    /// Initial residual normalized by the right-hand side (or 1 when b = 0).
    pub fn normalized_initial(&self) -> f64 {
        if self.rhs_norm > 0.0 {
            self.initial_residual / self.rhs_norm
        } else {
            self.initial_residual
        }
    }
}

enum Precond {
    Identity,
    Jacobi(Vec<f64>),
    Ilu(Ilu0),
}

impl Precond {
    fn new(a: &CsrMatrix, kind: Preconditioner) -> Result<Self> {
        Ok(match kind {
            Preconditioner::None => Precond::Identity,
            Preconditioner::Jacobi => {
                let d = a.diagonal();
                if let Some(i) = d.iter().position(|v| *v == 0.0 || !v.is_finite()) {
                    return Err(Error::Solver {
                        reason: format!("zero or non-finite diagonal at row {i}"),
                        history: vec![],
                    });
                }
                Precond::Jacobi(d.iter().map(|v| 1.0 / v).collect())
            }
            Preconditioner::Ilu0 => Precond::Ilu(Ilu0::factor(a)?),
        })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Identity => z.copy_from_slice(r),
            Precond::Jacobi(inv) => {
                for ((zi, ri), di) in z.iter_mut().zip(r).zip(inv) {
                    *zi = ri * di;
                }
            }
            Precond::Ilu(f) => f.solve(r, z),
        }
    }
}

struct Ilu0 {
    lu: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.nrows();
        let mut lu = a.clone();
        let rp = lu.row_ptr().to_vec();
        let ci = lu.col_idx().to_vec();
        let mut diag_pos = vec![usize::MAX; n];
        for i in 0..n {
            for k in rp[i]..rp[i + 1] {
                if ci[k] == i {
                    diag_pos[i] = k;
                }
            }
            if diag_pos[i] == usize::MAX {
                return Err(Error::Solver {
                    reason: format!("ILU(0): missing diagonal at row {i}"),
                    history: vec![],
                });
            }
        }
        let mut col_pos = vec![usize::MAX; n];
        let vals = lu.values_mut();
        for i in 0..n {
            for k in rp[i]..rp[i + 1] {
                col_pos[ci[k]] = k;
            }
            for k in rp[i]..rp[i + 1] {
                let j = ci[k];
                if j >= i {
                    break;
                }
                let pivot = vals[diag_pos[j]];
                if pivot == 0.0 {
                    return Err(Error::Solver {
                        reason: format!("ILU(0): zero pivot at row {j}"),
                        history: vec![],
                    });
                }
                let lij = vals[k] / pivot;
                vals[k] = lij;
                for m in (diag_pos[j] + 1)..rp[j + 1] {
                    let p = col_pos[ci[m]];
                    if p != usize::MAX {
                        vals[p] -= lij * vals[m];
                    }
                }
            }
            for k in rp[i]..rp[i + 1] {
                col_pos[ci[k]] = usize::MAX;
            }
            if vals[diag_pos[i]] == 0.0 {
                return Err(Error::Solver {
                    reason: format!("ILU(0): zero pivot at row {i}"),
                    history: vec![],
                });
            }
        }
        Ok(Self { lu, diag_pos })
    }

    fn solve(&self, r: &[f64], z: &mut [f64]) {
        let n = r.len();
        let rp = self.lu.row_ptr();
        let ci = self.lu.col_idx();
        let v = self.lu.values();
        for i in 0..n {
            let mut acc = r[i];
            for k in rp[i]..self.diag_pos[i] {
                acc -= v[k] * z[ci[k]];
            }
            z[i] = acc;
        }
        for i in (0..n).rev() {
            let mut acc = z[i];
            for k in (self.diag_pos[i] + 1)..rp[i + 1] {
                acc -= v[k] * z[ci[k]];
            }
            z[i] = acc / v[self.diag_pos[i]];
        }
    }
}

/// Solve `A x = b` starting from the initial guess in `x`.
///
/// Reaching `max_iter` is not an error; the report says whether the stopping
/// rule was met. Breakdown (vanishing inner products) is an error.
pub fn krylov_solve(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    controls: &SolveControls,
) -> Result<SolveReport> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() || b.len() != x.len() {
        return Err(Error::InvalidInput(format!(
            "krylov_solve: matrix {}x{}, rhs {}, x {}",
            a.nrows(),
            a.ncols(),
            b.len(),
            x.len()
        )));
    }
    let pc = Precond::new(a, controls.preconditioner)?;
    match controls.method {
        KrylovMethod::Cg => cg(a, b, x, controls, &pc),
        KrylovMethod::BiCgStab => bicgstab(a, b, x, controls, &pc),
    }
}

fn residual(a: &CsrMatrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    let ax = a.mul_vec(x);
    b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect()
}

fn target(controls: &SolveControls, bnorm: f64) -> f64 {
    (controls.rel_tol * bnorm).max(controls.abs_tol)
}

fn cg(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    controls: &SolveControls,
    pc: &Precond,
) -> Result<SolveReport> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut r = residual(a, b, x);
    let r0 = norm2(&r);
    let tol = target(controls, bnorm);
    let mut history = vec![r0];
    if r0 <= tol {
        return Ok(SolveReport {
            iterations: 0,
            initial_residual: r0,
            final_residual: r0,
            rhs_norm: bnorm,
            converged: true,
            history,
        });
    }
    let mut z = vec![0.0; n];
    pc.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rnorm = r0;
    for it in 1..=controls.max_iter {
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap == 0.0 || !pap.is_finite() {
            return Err(Error::Solver {
                reason: format!("CG breakdown (pAp = {pap:e}) at iteration {it}"),
                history: tail(&history),
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rnorm = norm2(&r);
        history.push(rnorm);
        if rnorm <= tol {
            return Ok(SolveReport {
                iterations: it,
                initial_residual: r0,
                final_residual: rnorm,
                rhs_norm: bnorm,
                converged: true,
                history,
            });
        }
        pc.apply(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Ok(SolveReport {
        iterations: controls.max_iter,
        initial_residual: r0,
        final_residual: rnorm,
        rhs_norm: bnorm,
        converged: false,
        history,
    })
}

fn bicgstab(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    controls: &SolveControls,
    pc: &Precond,
) -> Result<SolveReport> {
    let n = b.len();
    let bnorm = norm2(b);
    let mut r = residual(a, b, x);
    let r0n = norm2(&r);
    let tol = target(controls, bnorm);
    let mut history = vec![r0n];
    if r0n <= tol {
        return Ok(SolveReport {
            iterations: 0,
            initial_residual: r0n,
            final_residual: r0n,
            rhs_norm: bnorm,
            converged: true,
            history,
        });
    }
    let r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut rnorm = r0n;
    let breakdown = |what: &str, it: usize, history: &[f64]| Error::Solver {
        reason: format!("BiCGSTAB breakdown ({what}) at iteration {it}"),
        history: tail(history),
    };
    for it in 1..=controls.max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            return Err(breakdown("rho = 0", it, &history));
        }
        if it == 1 {
            p.copy_from_slice(&r);
        } else {
            let beta = (rho_new / rho) * (alpha / omega);
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
        }
        rho = rho_new;
        pc.apply(&p, &mut y);
        a.mul_vec_into(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 || !rv.is_finite() {
            return Err(breakdown("r̂·v = 0", it, &history));
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        let snorm = norm2(&s);
        if snorm <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            history.push(snorm);
            return Ok(SolveReport {
                iterations: it,
                initial_residual: r0n,
                final_residual: snorm,
                rhs_norm: bnorm,
                converged: true,
                history,
            });
        }
        pc.apply(&s, &mut z);
        a.mul_vec_into(&z, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 || !tt.is_finite() {
            return Err(breakdown("t·t = 0", it, &history));
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        rnorm = norm2(&r);
        history.push(rnorm);
        if rnorm <= tol {
            return Ok(SolveReport {
                iterations: it,
                initial_residual: r0n,
                final_residual: rnorm,
                rhs_norm: bnorm,
                converged: true,
                history,
            });
        }
        if omega == 0.0 {
            return Err(breakdown("omega = 0", it, &history));
        }
    }
    Ok(SolveReport {
        iterations: controls.max_iter,
        initial_residual: r0n,
        final_residual: rnorm,
        rhs_norm: bnorm,
        converged: false,
        history,
    })
}

fn tail(h: &[f64]) -> Vec<f64> {
    h[h.len().saturating_sub(8)..].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::TripletBuilder;

    fn laplacian_1d(n: usize) -> CsrMatrix {
        let mut b = TripletBuilder::new(n, n);
        for i in 0..n {
            b.push(i, i, 2.0);
            if i > 0 {
                b.push(i, i - 1, -1.0);
            }
            if i + 1 < n {
                b.push(i, i + 1, -1.0);
            }
        }
        b.build()
    }

    #[test]
    fn identity_returns_rhs() {
        let a = CsrMatrix::identity(5);
        let rhs = vec![1.0, -2.0, 3.0, 0.5, 7.0];
        for method in [KrylovMethod::Cg, KrylovMethod::BiCgStab] {
            let mut x = vec![0.0; 5];
            let c = SolveControls {
                method,
                ..SolveControls::default()
            };
            let rep = krylov_solve(&a, &rhs, &mut x, &c).unwrap();
            assert!(rep.converged);
            assert_eq!(x, rhs);
        }
    }

    #[test]
    fn ilu_on_tridiagonal_is_exact() {
        // ILU(0) of a tridiagonal matrix has no dropped fill.
        let a = laplacian_1d(20);
        let rhs: Vec<f64> = (0..20).map(|i| (i as f64).sin()).collect();
        let mut x = vec![0.0; 20];
        let c = SolveControls {
            method: KrylovMethod::Cg,
            preconditioner: Preconditioner::Ilu0,
            rel_tol: 1e-14,
            ..SolveControls::default()
        };
        let rep = krylov_solve(&a, &rhs, &mut x, &c).unwrap();
        assert!(rep.iterations <= 2, "iterations {}", rep.iterations);
    }

    #[test]
    fn looser_tolerance_never_needs_more_iterations() {
        let a = laplacian_1d(60);
        let rhs = vec![1.0; 60];
        let mut last = usize::MAX;
        for tol in [1e-12, 1e-9, 1e-6, 1e-3] {
            let mut x = vec![0.0; 60];
            let rep = krylov_solve(&a, &rhs, &mut x, &SolveControls::cg(tol)).unwrap();
            assert!(rep.iterations <= last);
            last = rep.iterations;
        }
    }

    #[test]
    fn non_square_is_rejected() {
        let a = TripletBuilder::new(2, 3).build();
        let mut x = vec![0.0; 2];
        assert!(krylov_solve(&a, &[1.0, 1.0], &mut x, &SolveControls::default()).is_err());
    }
}
