//! Polynomial bases, the weight kernel and weighted least-squares fits.

use nalgebra::{DMatrix, DVector};

use crate::stencil::PrincipalDirections;
use crate::Vec3;

/// Condition estimate above which the fit drops one degree.
pub const CONDITION_LIMIT: f64 = 1e10;

pub fn n_coeffs(degree: usize) -> usize {
    (degree + 1) * (degree + 2) * (degree + 3) / 6
}

/// Total-degree monomial basis in graded-lexicographic order. Axes marked
/// inactive (one-cell-thick directions) carry no monomials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyBasis {
    degree: usize,
    active: [bool; 3],
    exponents: Vec<[u32; 3]>,
}

impl PolyBasis {
    pub fn new(degree: usize) -> Self {
        Self::with_active_axes(degree, [true; 3])
    }

    pub fn with_active_axes(degree: usize, active: [bool; 3]) -> Self {
        let mut exponents = Vec::new();
        for d in 0..=degree as u32 {
            for a in (0..=d).rev() {
                for b in (0..=d - a).rev() {
                    let c = d - a - b;
                    let e = [a, b, c];
                    if (0..3).all(|k| active[k] || e[k] == 0) {
                        exponents.push(e);
                    }
                }
            }
        }
        PolyBasis { degree, active, exponents }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn active_axes(&self) -> [bool; 3] {
        self.active
    }

    pub fn exponents(&self) -> &[[u32; 3]] {
        &self.exponents
    }

    pub fn n_coeffs(&self) -> usize {
        self.exponents.len()
    }

    pub fn reduced(&self) -> Option<PolyBasis> {
        (self.degree > 0).then(|| PolyBasis::with_active_axes(self.degree - 1, self.active))
    }

    pub fn eval(&self, x: &Vec3) -> Vec<f64> {
        self.exponents
            .iter()
            .map(|e| x.x.powi(e[0] as i32) * x.y.powi(e[1] as i32) * x.z.powi(e[2] as i32))
            .collect()
    }
}

/// Monomial values at `x` for the full 3D basis of degree `p`.
pub fn eval_basis(p: usize, x: &Vec3) -> Vec<f64> {
    PolyBasis::new(p).eval(x)
}

/// Weights for the observations: the IB point first with weight 1, then
/// `1/(1 + (d/d0)^2)` where `d` is the anisotropic distance to the IB point
/// and `d0` the smallest such distance among the observations.
pub fn compute_weights(pd: &PrincipalDirections, p_ib: &Vec3, observations: &[Vec3]) -> Vec<f64> {
    let d: Vec<f64> = observations.iter().map(|p| pd.distance(p_ib, p)).collect();
    let d0 = d.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w = Vec::with_capacity(d.len() + 1);
    w.push(1.0);
    for dj in d {
        let wj = if d0 > 0.0 {
            1.0 / (1.0 + (dj / d0).powi(2))
        } else if dj == 0.0 {
            1.0
        } else {
            0.0
        };
        w.push(wj.clamp(0.0, 1.0));
    }
    w
}

/// Linear map from observation values to polynomial coefficients, in the
/// local coordinates `(x − centre)/scale`.
#[derive(Debug, Clone)]
pub struct WlsFit {
    pub basis: PolyBasis,
    pub requested_degree: usize,
    pub centre: Vec3,
    pub scale: f64,
    /// `n_coeffs × n_observations`.
    pub map: DMatrix<f64>,
    /// Diagonal ratio of the pivoted triangular factor.
    pub condition: f64,
}

impl WlsFit {
    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn local(&self, x: &Vec3) -> Vec3 {
        (x - self.centre) / self.scale
    }

    pub fn coefficients(&self, values: &[f64]) -> Vec<f64> {
        (&self.map * DVector::from_column_slice(values)).iter().copied().collect()
    }

    /// Row `s` with `value(x) = s · observations`.
    pub fn evaluation_row(&self, x: &Vec3) -> Vec<f64> {
        let p = self.basis.eval(&self.local(x));
        let row = DVector::from_vec(p).transpose() * &self.map;
        row.iter().copied().collect()
    }

    pub fn evaluate(&self, x: &Vec3, values: &[f64]) -> f64 {
        self.evaluation_row(x).iter().zip(values).map(|(a, b)| a * b).sum()
    }
}

/// Pivoted-QR solution of `min ‖W^{1/2}(y − Aβ)‖`. Too few observations or a
/// condition estimate above [`CONDITION_LIMIT`] drops the degree, down to 0.
pub fn fit_wls(basis: &PolyBasis, points: &[Vec3], weights: &[f64], centre: Vec3, scale: f64) -> WlsFit {
    assert_eq!(points.len(), weights.len());
    let n = points.len();
    let requested = basis.degree();
    let mut basis = basis.clone();
    let local: Vec<Vec3> = points.iter().map(|x| (x - centre) / scale).collect();
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    loop {
        let m = basis.n_coeffs();
        if n >= m {
            let mut a = DMatrix::zeros(n, m);
            for (i, x) in local.iter().enumerate() {
                for (j, v) in basis.eval(x).into_iter().enumerate() {
                    a[(i, j)] = sw[i] * v;
                }
            }
            let qr = a.col_piv_qr();
            let r = qr.r();
            let diag: Vec<f64> = (0..m).map(|i| r[(i, i)].abs()).collect();
            let dmax = diag.iter().copied().fold(0.0, f64::max);
            let dmin = diag.iter().copied().fold(f64::INFINITY, f64::min);
            let condition = if dmin > 0.0 { dmax / dmin } else { f64::INFINITY };
            if condition <= CONDITION_LIMIT || basis.degree() == 0 {
                if let Some(map) = pivoted_map(&qr, &sw, m) {
                    return WlsFit { basis, requested_degree: requested, centre, scale, map, condition };
                }
            }
        }
        match basis.reduced() {
            Some(b) => basis = b,
            None => break,
        }
    }
    // Degree 0 with every weight zero: plain mean.
    let map = DMatrix::from_element(1, n, 1.0 / n as f64);
    WlsFit { basis, requested_degree: requested, centre, scale, map, condition: f64::INFINITY }
}

fn pivoted_map(qr: &nalgebra::linalg::ColPivQR<f64, nalgebra::Dyn, nalgebra::Dyn>, sw: &[f64], m: usize) -> Option<DMatrix<f64>> {
    // A P = Q R, so β = P R⁻¹ Qᵀ W^{1/2} y.
    let q = qr.q();
    let r = qr.r();
    let mut qt = q.transpose();
    for (j, s) in sw.iter().enumerate() {
        qt.column_mut(j).scale_mut(*s);
    }
    let mut x = r.solve_upper_triangular(&qt)?;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    qr.p().inv_permute_rows(&mut x);
    debug_assert_eq!(x.nrows(), m);
    Some(x)
}
