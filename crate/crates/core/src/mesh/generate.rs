//! Hexahedral mesh generators: graded boxes and body-fitted annuli.

use super::{polygon_geometry, Face, Mesh, Patch, PatchKind};
use crate::error::{Error, Result};
use crate::Vec3;

/// Axis-aligned box with per-axis divisions, geometric grading and optional
/// periodicity. Boundary patches are named `xmin`, `xmax`, `ymin`, ... and
/// tagged `wall` until re-tagged.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSpec {
    pub min: Vec3,
    pub max: Vec3,
    pub divisions: [usize; 3],
    /// Ratio of last to first cell width along each axis.
    pub grading: [f64; 3],
    pub periodic: [bool; 3],
}

impl BoxSpec {
    pub fn unit(divisions: [usize; 3]) -> Self {
        Self {
            min: Vec3::zeros(),
            max: Vec3::repeat(1.0),
            divisions,
            grading: [1.0; 3],
            periodic: [false; 3],
        }
    }

    pub fn new(min: Vec3, max: Vec3, divisions: [usize; 3]) -> Self {
        Self {
            min,
            max,
            divisions,
            grading: [1.0; 3],
            periodic: [false; 3],
        }
    }
}

/// Node coordinates of a graded 1D partition of `[a, b]` into `n` cells whose
/// last/first width ratio is `grading`.
pub(crate) fn graded_nodes(a: f64, b: f64, n: usize, grading: f64) -> Vec<f64> {
    let len = b - a;
    if n == 1 || (grading - 1.0).abs() < 1e-15 {
        return (0..=n).map(|i| a + len * i as f64 / n as f64).collect();
    }
    let r = grading.powf(1.0 / (n as f64 - 1.0));
    let w0 = len * (r - 1.0) / (r.powi(n as i32) - 1.0);
    let mut nodes = Vec::with_capacity(n + 1);
    let mut x = a;
    let mut w = w0;
    nodes.push(a);
    for _ in 0..n {
        x += w;
        w *= r;
        nodes.push(x);
    }
    nodes[n] = b;
    nodes
}

const AXIS_NAMES: [[&str; 2]; 3] = [["xmin", "xmax"], ["ymin", "ymax"], ["zmin", "zmax"]];

pub fn build_structured_grid(spec: &BoxSpec) -> Result<Mesh> {
    for a in 0..3 {
        if !(spec.max[a] - spec.min[a] > 0.0) || !spec.max[a].is_finite() || !spec.min[a].is_finite() {
            return Err(Error::InvalidGeometry(format!(
                "box extent along axis {a} is not positive: [{}, {}]",
                spec.min[a], spec.max[a]
            )));
        }
        if spec.divisions[a] == 0 {
            return Err(Error::InvalidInput(format!("divisions along axis {a} must be >= 1")));
        }
        if !(spec.grading[a] > 0.0) || !spec.grading[a].is_finite() {
            return Err(Error::InvalidInput(format!("grading along axis {a} must be > 0")));
        }
        if spec.periodic[a] && spec.divisions[a] < 2 {
            return Err(Error::InvalidInput(format!(
                "periodic axis {a} needs at least 2 divisions"
            )));
        }
    }
    let [nx, ny, nz] = spec.divisions;
    let nodes: Vec<Vec<f64>> = (0..3)
        .map(|a| graded_nodes(spec.min[a], spec.max[a], spec.divisions[a], spec.grading[a]))
        .collect();
    let vid = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let cid = |i: usize, j: usize, k: usize| i + nx * (j + ny * k);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Vec3::new(nodes[0][i], nodes[1][j], nodes[2][k]));
            }
        }
    }

    let mut faces = Vec::new();
    let mut periodic = Vec::new();
    let mut boundary: [[Vec<usize>; 2]; 3] = Default::default();
    let len = spec.max - spec.min;

    // Loops are ordered so that the right-hand normal points along +axis.
    let x_loop = |i, j, k| vec![vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)];
    let y_loop = |i, j, k| vec![vid(i, j, k), vid(i, j, k + 1), vid(i + 1, j, k + 1), vid(i + 1, j, k)];
    let z_loop = |i, j, k| vec![vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)];

    for k in 0..nz {
        for j in 0..ny {
            for i in 0..=nx {
                let lp = x_loop(i, j, k);
                push_axis_face(
                    &mut faces, &mut periodic, &mut boundary[0], lp, i, nx, spec.periodic[0],
                    Vec3::new(-len.x, 0.0, 0.0),
                    |ii| cid(ii, j, k),
                );
            }
        }
    }
    for k in 0..nz {
        for j in 0..=ny {
            for i in 0..nx {
                let lp = y_loop(i, j, k);
                push_axis_face(
                    &mut faces, &mut periodic, &mut boundary[1], lp, j, ny, spec.periodic[1],
                    Vec3::new(0.0, -len.y, 0.0),
                    |jj| cid(i, jj, k),
                );
            }
        }
    }
    for k in 0..=nz {
        for j in 0..ny {
            for i in 0..nx {
                let lp = z_loop(i, j, k);
                push_axis_face(
                    &mut faces, &mut periodic, &mut boundary[2], lp, k, nz, spec.periodic[2],
                    Vec3::new(0.0, 0.0, -len.z),
                    |kk| cid(i, j, kk),
                );
            }
        }
    }

    let mut patches = Vec::new();
    for a in 0..3 {
        if spec.periodic[a] {
            continue;
        }
        for side in 0..2 {
            patches.push(Patch {
                name: AXIS_NAMES[a][side].to_string(),
                faces: std::mem::take(&mut boundary[a][side]),
                kind: PatchKind::Wall,
            });
        }
    }
    Mesh::from_topology(vertices, faces, patches, periodic)
}

/// One face normal to an axis at node index `idx` (of `n` cells). `cell(i)`
/// maps a cell index along the axis to the global id.
#[allow(clippy::too_many_arguments)]
fn push_axis_face(
    faces: &mut Vec<Face>,
    periodic: &mut Vec<(usize, Vec3)>,
    boundary: &mut [Vec<usize>; 2],
    mut lp: Vec<usize>,
    idx: usize,
    n: usize,
    is_periodic: bool,
    wrap_shift: Vec3,
    cell: impl Fn(usize) -> usize,
) {
    if idx > 0 && idx < n {
        faces.push(Face {
            vertices: lp,
            owner: cell(idx - 1),
            neighbour: Some(cell(idx)),
        });
    } else if idx == n && is_periodic {
        faces.push(Face {
            vertices: lp,
            owner: cell(n - 1),
            neighbour: Some(cell(0)),
        });
        periodic.push((faces.len() - 1, wrap_shift));
    } else if idx == 0 && is_periodic {
        // covered by the idx == n face
    } else if idx == 0 {
        lp.reverse();
        faces.push(Face {
            vertices: lp,
            owner: cell(0),
            neighbour: None,
        });
        boundary[0].push(faces.len() - 1);
    } else {
        faces.push(Face {
            vertices: lp,
            owner: cell(n - 1),
            neighbour: None,
        });
        boundary[1].push(faces.len() - 1);
    }
}

/// Body-fitted annulus between two coaxial circles (axis +z), extruded over
/// `depth`. Patches: `inner`, `outer` (walls), `zmin`, `zmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnulusSpec {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub radial: usize,
    pub azimuthal: usize,
    pub axial: usize,
    pub depth: f64,
    pub centre: Vec3,
}

impl AnnulusSpec {
    pub fn new(inner_radius: f64, outer_radius: f64, radial: usize, azimuthal: usize) -> Self {
        Self {
            inner_radius,
            outer_radius,
            radial,
            azimuthal,
            axial: 1,
            depth: 1.0,
            centre: Vec3::zeros(),
        }
    }
}

pub fn annular_grid(spec: &AnnulusSpec) -> Result<Mesh> {
    let (ri, ro) = (spec.inner_radius, spec.outer_radius);
    if !(ri > 0.0 && ro > ri && ro.is_finite()) {
        return Err(Error::InvalidGeometry(format!(
            "annulus requires 0 < inner_radius < outer_radius, got {ri} and {ro}"
        )));
    }
    if !(spec.depth > 0.0) {
        return Err(Error::InvalidGeometry("annulus depth must be positive".into()));
    }
    if spec.radial == 0 || spec.azimuthal < 3 || spec.axial == 0 {
        return Err(Error::InvalidInput(
            "annulus needs radial >= 1, azimuthal >= 3, axial >= 1".into(),
        ));
    }
    let (nr, nt, nz) = (spec.radial, spec.azimuthal, spec.axial);
    let vid = |i: usize, j: usize, k: usize| i + (nr + 1) * ((j % nt) + nt * k);
    let cid = |i: usize, j: usize, k: usize| i + nr * ((j % nt) + nt * k);
    let mut vertices = Vec::with_capacity((nr + 1) * nt * (nz + 1));
    for k in 0..=nz {
        let z = spec.centre.z + spec.depth * k as f64 / nz as f64;
        for j in 0..nt {
            let th = std::f64::consts::TAU * j as f64 / nt as f64;
            for i in 0..=nr {
                let r = ri + (ro - ri) * i as f64 / nr as f64;
                vertices.push(Vec3::new(spec.centre.x + r * th.cos(), spec.centre.y + r * th.sin(), z));
            }
        }
    }
    let mut faces: Vec<Face> = Vec::new();
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    let mut zmin = Vec::new();
    let mut zmax = Vec::new();
    // radial-normal faces
    for k in 0..nz {
        for j in 0..nt {
            for i in 0..=nr {
                let lp = vec![vid(i, j, k), vid(i, j + 1, k), vid(i, j + 1, k + 1), vid(i, j, k + 1)];
                if i == 0 {
                    faces.push(Face { vertices: lp, owner: cid(0, j, k), neighbour: None });
                    inner.push(faces.len() - 1);
                } else if i == nr {
                    faces.push(Face { vertices: lp, owner: cid(nr - 1, j, k), neighbour: None });
                    outer.push(faces.len() - 1);
                } else {
                    faces.push(Face { vertices: lp, owner: cid(i - 1, j, k), neighbour: Some(cid(i, j, k)) });
                }
            }
        }
    }
    // azimuthal-normal faces
    for k in 0..nz {
        for j in 0..nt {
            for i in 0..nr {
                let lp = vec![vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j, k + 1), vid(i, j, k + 1)];
                let prev = (j + nt - 1) % nt;
                let (o, n) = if j == 0 { (cid(i, j, k), cid(i, prev, k)) } else { (cid(i, prev, k), cid(i, j, k)) };
                faces.push(Face { vertices: lp, owner: o.min(n), neighbour: Some(o.max(n)) });
            }
        }
    }
    // axial-normal faces
    for k in 0..=nz {
        for j in 0..nt {
            for i in 0..nr {
                let lp = vec![vid(i, j, k), vid(i + 1, j, k), vid(i + 1, j + 1, k), vid(i, j + 1, k)];
                if k == 0 {
                    faces.push(Face { vertices: lp, owner: cid(i, j, 0), neighbour: None });
                    zmin.push(faces.len() - 1);
                } else if k == nz {
                    faces.push(Face { vertices: lp, owner: cid(i, j, nz - 1), neighbour: None });
                    zmax.push(faces.len() - 1);
                } else {
                    faces.push(Face { vertices: lp, owner: cid(i, j, k - 1), neighbour: Some(cid(i, j, k)) });
                }
            }
        }
    }
    orient_faces(&vertices, &mut faces, nr * nt * nz);
    let patches = vec![
        Patch { name: "inner".into(), faces: inner, kind: PatchKind::Wall },
        Patch { name: "outer".into(), faces: outer, kind: PatchKind::Wall },
        Patch { name: "zmin".into(), faces: zmin, kind: PatchKind::Wall },
        Patch { name: "zmax".into(), faces: zmax, kind: PatchKind::Wall },
    ];
    Mesh::from_topology(vertices, faces, patches, vec![])
}

/// Flip vertex loops whose area vector points into their owner cell.
fn orient_faces(vertices: &[Vec3], faces: &mut [Face], n_cells: usize) {
    let mut sum = vec![Vec3::zeros(); n_cells];
    let mut cnt = vec![0usize; n_cells];
    for f in faces.iter() {
        let c = f.vertices.iter().map(|&v| vertices[v]).sum::<Vec3>() / f.vertices.len() as f64;
        for cell in std::iter::once(f.owner).chain(f.neighbour) {
            sum[cell] += c;
            cnt[cell] += 1;
        }
    }
    for f in faces.iter_mut() {
        let (a, c) = polygon_geometry(f.vertices.iter().map(|&v| vertices[v]));
        let oc = sum[f.owner] / cnt[f.owner] as f64;
        if a.dot(&(c - oc)) < 0.0 {
            f.vertices.reverse();
        }
    }
}
