use rayon::prelude::*;

use crate::mesh::Mesh;
use crate::{Mat3, Vec3};

fn pseudo_inverse(m: &Mat3) -> Mat3 {
    match m.try_inverse() {
        Some(inv) if inv.iter().all(|v| v.is_finite()) && m.determinant().abs() > 1e-12 * m.norm().powi(3) => inv,
        _ => m.pseudo_inverse(1e-12 * m.norm()).unwrap_or_else(|_| Mat3::zeros()),
    }
}

/// Weighted least-squares cell gradient over face neighbours (periodic
/// images included) and boundary face centres. `boundary(f)` gives the value
/// on boundary face `f`.
pub fn least_squares_gradient(mesh: &Mesh, values: &[f64], boundary: impl Fn(usize) -> f64 + Sync) -> Vec<Vec3> {
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let xc = mesh.centre(c);
            let mut m = Mat3::zeros();
            let mut rhs = Vec3::zeros();
            for &f in mesh.cell_faces(c) {
                let (d, dv) = match mesh.neighbour_centre_for(c, f) {
                    Some(xn) => {
                        let face = mesh.face(f);
                        let other = if face.owner == c { face.neighbour.unwrap() } else { face.owner };
                        (xn - xc, values[other] - values[c])
                    }
                    None => (mesh.face_centre(f) - xc, boundary(f) - values[c]),
                };
                let w = 1.0 / d.norm_squared().max(1e-300);
                m += d * d.transpose() * w;
                rhs += d * (dv * w);
            }
            pseudo_inverse(&m) * rhs
        })
        .collect()
}

/// Row-wise least-squares gradient of a vector field: `G[(i, j)] = ∂u_i/∂x_j`.
pub fn least_squares_vector_gradient(
    mesh: &Mesh,
    values: &[Vec3],
    boundary: impl Fn(usize) -> Vec3 + Sync,
) -> Vec<Mat3> {
    let mut out = vec![Mat3::zeros(); mesh.n_cells()];
    for i in 0..3 {
        let comp: Vec<f64> = values.iter().map(|v| v[i]).collect();
        let g = least_squares_gradient(mesh, &comp, |f| boundary(f)[i]);
        for (o, gi) in out.iter_mut().zip(g) {
            o.set_row(i, &gi.transpose());
        }
    }
    out
}

/// Green–Gauss gradient with linearly interpolated face values.
pub fn gauss_gradient(mesh: &Mesh, values: &[f64], boundary: impl Fn(usize) -> f64 + Sync) -> Vec<Vec3> {
    (0..mesh.n_cells())
        .into_par_iter()
        .map(|c| {
            let mut g = Vec3::zeros();
            for &f in mesh.cell_faces(c) {
                let face = mesh.face(f);
                let vf = match face.neighbour {
                    Some(n) => {
                        let w = mesh.face_weight(f);
                        w * values[face.owner] + (1.0 - w) * values[n]
                    }
                    None => boundary(f),
                };
                g += mesh.outward_area(c, f) * vf;
            }
            g / mesh.volume(c)
        })
        .collect()
}

/// Linear interpolation of cell gradients to face `f`; boundary faces take
/// the owner gradient.
pub fn face_gradient<T>(mesh: &Mesh, grads: &[T], f: usize) -> T
where
    T: Copy + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let face = mesh.face(f);
    match face.neighbour {
        Some(n) => {
            let w = mesh.face_weight(f);
            grads[face.owner] * w + grads[n] * (1.0 - w)
        }
        None => grads[face.owner],
    }
}
