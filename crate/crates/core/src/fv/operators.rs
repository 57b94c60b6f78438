use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, TripletBuilder};
use crate::mesh::Mesh;
use crate::Vec3;

/// Component blocks of the divergence matrix over internal faces:
/// `(B U)_i = Σ_c (B_c U_c)_i = Σ_f S_f · u_f` with linear face interpolation.
/// Boundary faces enter through [`boundary_divergence`].
pub fn divergence_matrices(mesh: &Mesh) -> [CsrMatrix; 3] {
    let n = mesh.n_cells();
    let mut b = [
        TripletBuilder::new(n, n),
        TripletBuilder::new(n, n),
        TripletBuilder::new(n, n),
    ];
    for f in 0..mesh.n_internal_faces() {
        let face = mesh.face(f);
        let (o, nb) = (face.owner, face.neighbour.unwrap());
        let w = mesh.face_weight(f);
        let s = mesh.face_area(f);
        for (c, bc) in b.iter_mut().enumerate() {
            bc.push(o, o, s[c] * w);
            bc.push(o, nb, s[c] * (1.0 - w));
            bc.push(nb, o, -s[c] * w);
            bc.push(nb, nb, -s[c] * (1.0 - w));
        }
    }
    b.map(TripletBuilder::build)
}

/// Boundary-face part of the divergence for given face values.
pub fn boundary_divergence(mesh: &Mesh, face_value: impl Fn(usize) -> Vec3) -> Vec<f64> {
    let mut out = vec![0.0; mesh.n_cells()];
    for f in mesh.n_internal_faces()..mesh.n_faces() {
        out[mesh.face(f).owner] += face_value(f).dot(&mesh.face_area(f));
    }
    out
}

/// Cellwise `Σ_f S_f · u_f` (not divided by volume).
pub fn divergence(mesh: &Mesh, u: &[Vec3], face_value: impl Fn(usize) -> Vec3) -> Vec<f64> {
    let mut out = boundary_divergence(mesh, face_value);
    for f in 0..mesh.n_internal_faces() {
        let face = mesh.face(f);
        let (o, nb) = (face.owner, face.neighbour.unwrap());
        let w = mesh.face_weight(f);
        let flux = (u[o] * w + u[nb] * (1.0 - w)).dot(&mesh.face_area(f));
        out[o] += flux;
        out[nb] -= flux;
    }
    out
}

/// Orthogonal part `|S|² / (S·d)` of the face-normal gradient coefficient.
pub fn laplacian_coefficient(mesh: &Mesh, f: usize) -> f64 {
    let s = mesh.face_area(f);
    let d = mesh.face_delta(f);
    s.norm_squared() / s.dot(&d).abs().max(1e-300)
}

pub(crate) fn face_kappa(mesh: &Mesh, kappa: &[f64], f: usize) -> f64 {
    let face = mesh.face(f);
    match face.neighbour {
        Some(n) => {
            let w = mesh.face_weight(f);
            w * kappa[face.owner] + (1.0 - w) * kappa[n]
        }
        None => kappa[face.owner],
    }
}

/// Compact Laplacian in stiffness form, `(R p)_i = Σ_f κ_f c_f (p_i − p_j)`,
/// with κ interpolated linearly from cell values. Boundary faces for which
/// `fixed(f)` holds add a Dirichlet coupling to the owner diagonal; all other
/// boundary faces are zero-gradient. Every row stores its diagonal.
pub fn laplacian_matrix(mesh: &Mesh, kappa: &[f64], fixed: impl Fn(usize) -> bool) -> CsrMatrix {
    let n = mesh.n_cells();
    let mut b = TripletBuilder::with_capacity(n, n, n + 4 * mesh.n_internal_faces());
    for i in 0..n {
        b.push(i, i, 0.0);
    }
    for f in 0..mesh.n_internal_faces() {
        let face = mesh.face(f);
        let (o, nb) = (face.owner, face.neighbour.unwrap());
        let a = face_kappa(mesh, kappa, f) * laplacian_coefficient(mesh, f);
        if o == nb {
            continue;
        }
        b.push(o, o, a);
        b.push(o, nb, -a);
        b.push(nb, nb, a);
        b.push(nb, o, -a);
    }
    for f in mesh.n_internal_faces()..mesh.n_faces() {
        if fixed(f) {
            let o = mesh.face(f).owner;
            b.push(o, o, kappa[o] * super::boundary_coefficient(mesh, f));
        }
    }
    b.build()
}

/// Rhie–Chow stabilization `C = R(V/D) − B D⁻¹ Bᵀ` over internal faces for a
/// cellwise momentum diagonal `D`: the compact Laplacian minus the wide one,
/// which annihilates constants and is non-zero on checkerboard modes.
pub fn rhie_chow_matrix(mesh: &Mesh, diag: &[f64]) -> Result<CsrMatrix> {
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::Assembly(format!("momentum diagonal {} in cell {i} is not positive", diag[i])));
    }
    let kappa: Vec<f64> = diag.iter().zip(mesh.volumes()).map(|(d, v)| v / d).collect();
    let inv: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let mut c = laplacian_matrix(mesh, &kappa, |_| false);
    for bc in divergence_matrices(mesh) {
        let scaled_t = bc.transpose().scale_rows(&inv);
        let prod = bc.matmul(&scaled_t)?;
        c = c.add_scaled(1.0, &prod, -1.0)?;
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_structured_grid, BoxSpec};

    fn line4() -> Mesh {
        build_structured_grid(&BoxSpec::new(Vec3::zeros(), Vec3::new(4.0, 1.0, 1.0), [4, 1, 1])).unwrap()
    }

    #[test]
    fn divergence_of_linear_fields() {
        let m = build_structured_grid(&BoxSpec::unit([4, 5, 3])).unwrap();
        let uniform = vec![Vec3::new(1.0, -2.0, 0.5); m.n_cells()];
        for d in divergence(&m, &uniform, |_| Vec3::new(1.0, -2.0, 0.5)) {
            assert!(d.abs() < 1e-14);
        }
        let f = |x: &Vec3| Vec3::new(x.x, -x.y, 0.0);
        let u: Vec<Vec3> = m.centres().iter().map(f).collect();
        for d in divergence(&m, &u, |fc| f(&m.face_centre(fc))) {
            assert!(d.abs() < 1e-14);
        }
        let g = |x: &Vec3| Vec3::new(x.x, 0.0, 0.0);
        let u: Vec<Vec3> = m.centres().iter().map(g).collect();
        for (c, d) in divergence(&m, &u, |fc| g(&m.face_centre(fc))).iter().enumerate() {
            assert!((d - m.volume(c)).abs() < 1e-14);
        }
    }

    #[test]
    fn matrix_form_matches_direct_divergence() {
        let m = build_structured_grid(&BoxSpec::unit([3, 3, 2])).unwrap();
        let u: Vec<Vec3> = m.centres().iter().map(|x| Vec3::new(x.y * x.y, x.x * x.z, 1.0 - x.x)).collect();
        let b = divergence_matrices(&m);
        let mut bu = vec![0.0; m.n_cells()];
        for (c, bc) in b.iter().enumerate() {
            let uc: Vec<f64> = u.iter().map(|v| v[c]).collect();
            for (o, v) in bu.iter_mut().zip(bc.mul_vec(&uc)) {
                *o += v;
            }
        }
        let zero = divergence(&m, &u, |_| Vec3::zeros());
        for (a, b) in bu.iter().zip(&zero) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn laplacian_rows_sum_to_zero_and_one_dimensional_stencil() {
        let m = line4();
        let r = laplacian_matrix(&m, &vec![2.0; 4], |_| false);
        for i in 0..4 {
            assert!(r.row(i).map(|(_, v)| v).sum::<f64>().abs() < 1e-14);
        }
        assert!((r.get(1, 0) + 2.0).abs() < 1e-12);
        assert!((r.get(1, 1) - 4.0).abs() < 1e-12);
        assert!((r.get(1, 2) + 2.0).abs() < 1e-12);
        assert!(r.asymmetry() < 1e-14);
        // A fixed boundary face adds κ |S| / (h/2) to the owner diagonal.
        let rf = laplacian_matrix(&m, &vec![2.0; 4], |f| m.face_patch(f).map(|p| m.patches()[p].name == "xmax") == Some(true));
        assert!((rf.get(3, 3) - (2.0 + 4.0)).abs() < 1e-12);
    }

    #[test]
    fn rhie_chow_hand_computed_line() {
        let m = line4();
        let c = rhie_chow_matrix(&m, &[1.0; 4]).unwrap();
        let expected = [
            [0.5, -0.75, 0.25, 0.0],
            [-0.75, 1.5, -1.0, 0.25],
            [0.25, -1.0, 1.5, -0.75],
            [0.0, 0.25, -0.75, 0.5],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((c.get(i, j) - expected[i][j]).abs() < 1e-14, "({i},{j}) {}", c.get(i, j));
            }
        }
    }

    #[test]
    fn rhie_chow_annihilates_constants_not_checkerboards() {
        let m = build_structured_grid(&BoxSpec::unit([6, 6, 1])).unwrap();
        let c = rhie_chow_matrix(&m, &vec![3.0; m.n_cells()]).unwrap();
        assert!(c.asymmetry() < 1e-12);
        for v in c.mul_vec(&vec![1.0; m.n_cells()]) {
            assert!(v.abs() < 1e-12);
        }
        let chk: Vec<f64> = (0..m.n_cells())
            .map(|i| {
                let x = m.centre(i);
                if ((x.x * 6.0) as i64 + (x.y * 6.0) as i64) % 2 == 0 { 1.0 } else { -1.0 }
            })
            .collect();
        let cc = c.mul_vec(&chk);
        assert!(cc.iter().map(|v| v.abs()).fold(0.0, f64::max) > 1e-3);
        assert!(rhie_chow_matrix(&m, &vec![0.0; m.n_cells()]).is_err());
    }
}
