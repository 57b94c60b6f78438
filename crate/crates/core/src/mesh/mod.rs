//! Polyhedral finite-volume mesh: topology, geometric measures and adjacency.
//!
//! Faces are stored internal-first. Every internal face has an owner and a
//! neighbour and its area vector points from owner to neighbour; boundary
//! faces have an owner only and point outward. Periodic connections are
//! internal faces whose neighbour sees the face translated by a shift vector.

mod generate;
pub mod io;

pub use generate::{annular_grid, build_structured_grid, AnnulusSpec, BoxSpec};

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PatchKind {
    Wall,
    Inflow,
    Outflow,
    Symmetry,
}

impl PatchKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            PatchKind::Wall => "wall",
            PatchKind::Inflow => "inflow",
            PatchKind::Outflow => "outflow",
            PatchKind::Symmetry => "symmetry",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "wall" => PatchKind::Wall,
            "inflow" => PatchKind::Inflow,
            "outflow" => PatchKind::Outflow,
            "symmetry" => PatchKind::Symmetry,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub name: String,
    pub faces: Vec<usize>,
    pub kind: PatchKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub vertices: Vec<usize>,
    pub owner: usize,
    pub neighbour: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Adjacency {
    /// Cells sharing a face.
    #[default]
    Face,
    /// Cells sharing at least one vertex (superset of face adjacency).
    Vertex,
}

/// Immutable polyhedral mesh with precomputed geometry.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<Face>,
    n_internal: usize,
    patches: Vec<Patch>,
    /// Translation from the owner-side face position to the neighbour side;
    /// zero except on periodic faces.
    face_shift: Vec<Vec3>,
    cells: Vec<Vec<usize>>,
    face_area: Vec<Vec3>,
    face_centre: Vec<Vec3>,
    face_patch: Vec<Option<usize>>,
    centres: Vec<Vec3>,
    volumes: Vec<f64>,
    diameters: Vec<f64>,
    face_neighbours: Vec<Vec<usize>>,
    vertex_neighbours: Vec<Vec<usize>>,
}

impl Mesh {
    /// Build a mesh from raw topology. Faces may be given in any order; they
    /// are reordered internal-first (patch faces keep patch order).
    pub fn from_topology(
        vertices: Vec<Vec3>,
        faces: Vec<Face>,
        patches: Vec<Patch>,
        periodic: Vec<(usize, Vec3)>,
    ) -> Result<Self> {
        let nf = faces.len();
        let mut shift_in = vec![Vec3::zeros(); nf];
        for (f, s) in periodic {
            if f >= nf {
                return Err(Error::Index { index: f, len: nf });
            }
            shift_in[f] = s;
        }
        let n_cells = faces
            .iter()
            .flat_map(|f| std::iter::once(f.owner).chain(f.neighbour))
            .max()
            .map_or(0, |m| m + 1);
        if n_cells == 0 {
            return Err(Error::InvalidGeometry("mesh has no cells".into()));
        }
        for (i, f) in faces.iter().enumerate() {
            if f.vertices.len() < 3 {
                return Err(Error::InvalidGeometry(format!("face {i} has fewer than 3 vertices")));
            }
            if let Some(&v) = f.vertices.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Index { index: v, len: vertices.len() });
            }
            if f.neighbour == Some(f.owner) {
                return Err(Error::InvalidGeometry(format!("face {i} owner equals neighbour")));
            }
        }

        // Patch membership must be a partition of the boundary faces.
        let mut patch_of = vec![None; nf];
        for (pi, p) in patches.iter().enumerate() {
            for &f in &p.faces {
                if f >= nf {
                    return Err(Error::Index { index: f, len: nf });
                }
                if faces[f].neighbour.is_some() {
                    return Err(Error::InvalidGeometry(format!(
                        "internal face {f} listed in patch '{}'",
                        p.name
                    )));
                }
                if patch_of[f].is_some() {
                    return Err(Error::InvalidGeometry(format!("face {f} belongs to two patches")));
                }
                patch_of[f] = Some(pi);
            }
        }
        if let Some(f) = (0..nf).find(|&f| faces[f].neighbour.is_none() && patch_of[f].is_none()) {
            return Err(Error::InvalidGeometry(format!("boundary face {f} is in no patch")));
        }

        // Reorder: internal faces first, then patch by patch.
        let mut order: Vec<usize> = (0..nf).filter(|&f| faces[f].neighbour.is_some()).collect();
        let n_internal = order.len();
        for p in &patches {
            order.extend(p.faces.iter().copied());
        }
        let mut new_index = vec![0; nf];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let faces_sorted: Vec<Face> = order.iter().map(|&f| faces[f].clone()).collect();
        let face_shift: Vec<Vec3> = order.iter().map(|&f| shift_in[f]).collect();
        let patches: Vec<Patch> = patches
            .into_iter()
            .map(|p| Patch {
                faces: p.faces.iter().map(|&f| new_index[f]).collect(),
                ..p
            })
            .collect();

        let mut mesh = Mesh {
            vertices,
            faces: faces_sorted,
            n_internal,
            patches,
            face_shift,
            cells: vec![Vec::new(); n_cells],
            face_area: Vec::new(),
            face_centre: Vec::new(),
            face_patch: vec![None; nf],
            centres: Vec::new(),
            volumes: Vec::new(),
            diameters: Vec::new(),
            face_neighbours: Vec::new(),
            vertex_neighbours: Vec::new(),
        };
        for (pi, p) in mesh.patches.iter().enumerate() {
            for &f in &p.faces {
                mesh.face_patch[f] = Some(pi);
            }
        }
        for (fi, f) in mesh.faces.iter().enumerate() {
            mesh.cells[f.owner].push(fi);
            if let Some(n) = f.neighbour {
                mesh.cells[n].push(fi);
            }
        }
        mesh.compute_geometry()?;
        mesh.compute_adjacency();
        Ok(mesh)
    }

    fn compute_geometry(&mut self) -> Result<()> {
        let nf = self.faces.len();
        self.face_area = Vec::with_capacity(nf);
        self.face_centre = Vec::with_capacity(nf);
        for f in &self.faces {
            let (a, c) = polygon_geometry(f.vertices.iter().map(|&v| self.vertices[v]));
            self.face_area.push(a);
            self.face_centre.push(c);
        }
        let nc = self.cells.len();
        self.centres = vec![Vec3::zeros(); nc];
        self.volumes = vec![0.0; nc];
        self.diameters = vec![0.0; nc];
        for c in 0..nc {
            if self.cells[c].len() < 4 {
                return Err(Error::InvalidGeometry(format!("cell {c} has fewer than 4 faces")));
            }
            // Pyramid decomposition about the mean of face centres.
            let sides: Vec<(Vec3, Vec3)> = self.cells[c]
                .iter()
                .map(|&f| (self.outward_area(c, f), self.face_centre_for(c, f)))
                .collect();
            let est = sides.iter().map(|s| s.1).sum::<Vec3>() / sides.len() as f64;
            let mut vol = 0.0;
            let mut centroid = Vec3::zeros();
            for (s, fc) in &sides {
                let pv = s.dot(&(fc - est)) / 3.0;
                vol += pv;
                centroid += pv * (0.75 * fc + 0.25 * est);
            }
            if vol <= 0.0 || !vol.is_finite() {
                return Err(Error::InvalidGeometry(format!("cell {c} has non-positive volume {vol:e}")));
            }
            self.volumes[c] = vol;
            self.centres[c] = centroid / vol;
            let pts = self.cell_vertex_positions(c);
            let mut d2: f64 = 0.0;
            for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    d2 = d2.max((pts[i] - pts[j]).norm_squared());
                }
            }
            self.diameters[c] = d2.sqrt();
        }
        Ok(())
    }

    fn compute_adjacency(&mut self) {
        let nc = self.cells.len();
        let mut fnb: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); nc];
        for f in &self.faces[..self.n_internal] {
            let n = f.neighbour.unwrap();
            fnb[f.owner].insert(n);
            fnb[n].insert(f.owner);
        }
        let mut vertex_cells: Vec<Vec<usize>> = vec![Vec::new(); self.vertices.len()];
        for c in 0..nc {
            let mut vs: Vec<usize> = self.cells[c]
                .iter()
                .flat_map(|&f| self.faces[f].vertices.iter().copied())
                .collect();
            vs.sort_unstable();
            vs.dedup();
            for v in vs {
                vertex_cells[v].push(c);
            }
        }
        let mut vnb: Vec<BTreeSet<usize>> = fnb.clone();
        for cells in &vertex_cells {
            for &a in cells {
                for &b in cells {
                    if a != b {
                        vnb[a].insert(b);
                    }
                }
            }
        }
        self.face_neighbours = fnb.into_iter().map(|s| s.into_iter().collect()).collect();
        self.vertex_neighbours = vnb.into_iter().map(|s| s.into_iter().collect()).collect();
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_internal_faces(&self) -> usize {
        self.n_internal
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    pub fn cell_faces(&self, c: usize) -> &[usize] {
        &self.cells[c]
    }

    pub fn patches(&self) -> &[Patch] {
        &self.patches
    }

    pub fn patch_by_name(&self, name: &str) -> Option<(usize, &Patch)> {
        self.patches.iter().enumerate().find(|(_, p)| p.name == name)
    }

    /// Re-tag a patch's boundary-condition kind.
    pub fn set_patch_kind(&mut self, name: &str, kind: PatchKind) -> Result<()> {
        let p = self
            .patches
            .iter_mut()
            .find(|p| p.name == name)
            .ok_or_else(|| Error::InvalidInput(format!("no patch named '{name}'")))?;
        p.kind = kind;
        Ok(())
    }

    pub fn face_patch(&self, f: usize) -> Option<usize> {
        self.face_patch[f]
    }

    pub fn face_shift(&self, f: usize) -> Vec3 {
        self.face_shift[f]
    }

    pub fn is_periodic_face(&self, f: usize) -> bool {
        self.face_shift[f] != Vec3::zeros()
    }

    pub fn periodic_faces(&self) -> Vec<(usize, Vec3)> {
        (0..self.n_internal)
            .filter(|&f| self.is_periodic_face(f))
            .map(|f| (f, self.face_shift[f]))
            .collect()
    }

    /// Area vector, owner to neighbour (outward on boundary faces).
    pub fn face_area(&self, f: usize) -> Vec3 {
        self.face_area[f]
    }

    pub fn face_centre(&self, f: usize) -> Vec3 {
        self.face_centre[f]
    }

    /// Area vector oriented outward from `cell`.
    pub fn outward_area(&self, cell: usize, f: usize) -> Vec3 {
        if self.faces[f].owner == cell {
            self.face_area[f]
        } else {
            -self.face_area[f]
        }
    }

    /// Face centre as seen from `cell` (accounts for periodic shifts).
    pub fn face_centre_for(&self, cell: usize, f: usize) -> Vec3 {
        if self.faces[f].owner == cell {
            self.face_centre[f]
        } else {
            self.face_centre[f] + self.face_shift[f]
        }
    }

    /// Centre of the cell across internal face `f` from `cell`, expressed in
    /// `cell`'s frame (periodic images are translated back).
    pub fn neighbour_centre_for(&self, cell: usize, f: usize) -> Option<Vec3> {
        let face = &self.faces[f];
        let n = face.neighbour?;
        Some(if face.owner == cell {
            self.centres[n] - self.face_shift[f]
        } else {
            self.centres[face.owner] + self.face_shift[f]
        })
    }

    /// Owner-to-neighbour centre vector of an internal face.
    pub fn face_delta(&self, f: usize) -> Vec3 {
        let face = &self.faces[f];
        match face.neighbour {
            Some(n) => self.centres[n] - self.face_shift[f] - self.centres[face.owner],
            None => self.face_centre[f] - self.centres[face.owner],
        }
    }

    /// Linear interpolation weight of the owner value at face `f`.
    pub fn face_weight(&self, f: usize) -> f64 {
        let face = &self.faces[f];
        match face.neighbour {
            Some(n) => {
                let s = self.face_area[f];
                let kn = self.centres[n] - self.face_shift[f];
                let dn = s.dot(&(kn - self.face_centre[f]));
                let dp = s.dot(&(self.face_centre[f] - self.centres[face.owner]));
                let w = dn / (dn + dp);
                if w.is_finite() {
                    w
                } else {
                    0.5
                }
            }
            None => 1.0,
        }
    }

    pub fn centres(&self) -> &[Vec3] {
        &self.centres
    }

    pub fn centre(&self, c: usize) -> Vec3 {
        self.centres[c]
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn volume(&self, c: usize) -> f64 {
        self.volumes[c]
    }

    pub fn diameters(&self) -> &[f64] {
        &self.diameters
    }

    pub fn diameter(&self, c: usize) -> f64 {
        self.diameters[c]
    }

    /// Global mesh size `h = max h_i`.
    pub fn h(&self) -> f64 {
        self.diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn total_volume(&self) -> f64 {
        self.volumes.iter().sum()
    }

    pub fn mean_face_area(&self) -> f64 {
        self.face_area.iter().map(|a| a.norm()).sum::<f64>() / self.faces.len() as f64
    }

    /// Vertex positions of a cell, periodic faces taken on the cell's side.
    pub fn cell_vertex_positions(&self, c: usize) -> Vec<Vec3> {
        let mut seen: Vec<(usize, bool)> = Vec::new();
        let mut out = Vec::new();
        for &f in &self.cells[c] {
            let shifted = self.faces[f].owner != c && self.is_periodic_face(f);
            for &v in &self.faces[f].vertices {
                if !seen.contains(&(v, shifted)) {
                    seen.push((v, shifted));
                    out.push(if shifted {
                        self.vertices[v] + self.face_shift[f]
                    } else {
                        self.vertices[v]
                    });
                }
            }
        }
        out
    }

    /// Axis-aligned bounding box of all vertices.
    pub fn bounds(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    pub fn cell_bounds(&self, c: usize) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for p in self.cell_vertex_positions(c) {
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        (lo, hi)
    }

    /// Neighbours of `cell` under the given adjacency; excludes the cell itself.
    pub fn cell_neighbours(&self, cell: usize, mode: Adjacency) -> Result<&[usize]> {
        if cell >= self.cells.len() {
            return Err(Error::Index {
                index: cell,
                len: self.cells.len(),
            });
        }
        Ok(match mode {
            Adjacency::Face => &self.face_neighbours[cell],
            Adjacency::Vertex => &self.vertex_neighbours[cell],
        })
    }

    pub fn neighbours(&self, cell: usize, mode: Adjacency) -> &[usize] {
        match mode {
            Adjacency::Face => &self.face_neighbours[cell],
            Adjacency::Vertex => &self.vertex_neighbours[cell],
        }
    }

    /// Largest `|Σ_f S_f|` over cells, relative to the cell's total face area.
    pub fn max_closure_error(&self) -> f64 {
        (0..self.n_cells())
            .map(|c| {
                let mut sum = Vec3::zeros();
                let mut scale = 0.0;
                for &f in &self.cells[c] {
                    let s = self.outward_area(c, f);
                    sum += s;
                    scale += s.norm();
                }
                sum.norm() / scale
            })
            .fold(0.0, f64::max)
    }

    /// Axes along which every cell centre has the same coordinate (one-cell
    /// thick directions of quasi-2D meshes).
    pub fn degenerate_axes(&self) -> [bool; 3] {
        let (lo, hi) = self.bounds();
        let mut out = [false; 3];
        for (a, o) in out.iter_mut().enumerate() {
            let c0 = self.centres[0][a];
            let tol = 1e-9 * (hi[a] - lo[a]).abs().max(f64::MIN_POSITIVE);
            *o = self.centres.iter().all(|c| (c[a] - c0).abs() <= tol);
        }
        out
    }
}

/// Area vector and centroid of a planar or mildly warped polygon.
fn polygon_geometry(points: impl Iterator<Item = Vec3>) -> (Vec3, Vec3) {
    let pts: Vec<Vec3> = points.collect();
    let n = pts.len();
    if n == 3 {
        let a = 0.5 * (pts[1] - pts[0]).cross(&(pts[2] - pts[0]));
        return (a, (pts[0] + pts[1] + pts[2]) / 3.0);
    }
    let mid = pts.iter().sum::<Vec3>() / n as f64;
    let mut area = Vec3::zeros();
    let mut centre = Vec3::zeros();
    let mut wsum = 0.0;
    let mut tris = Vec::with_capacity(n);
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let s = 0.5 * (b - a).cross(&(mid - a));
        tris.push((s, (a + b + mid) / 3.0));
        area += s;
    }
    let nhat = area.normalize();
    for (s, c) in tris {
        let w = s.dot(&nhat);
        centre += w * c;
        wsum += w;
    }
    (area, centre / wsum)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_cube_single_cell() {
        let m = build_structured_grid(&BoxSpec::unit([1, 1, 1])).unwrap();
        assert_eq!(m.n_cells(), 1);
        assert!((m.volume(0) - 1.0).abs() < 1e-14);
        assert!((m.centre(0) - Vec3::new(0.5, 0.5, 0.5)).norm() < 1e-14);
        assert!((m.diameter(0) - 3f64.sqrt()).abs() < 1e-14);
        assert!(m.max_closure_error() < 1e-14);
    }

    #[test]
    fn eight_equal_cells() {
        let m = build_structured_grid(&BoxSpec::unit([2, 2, 2])).unwrap();
        assert_eq!(m.n_cells(), 8);
        for v in m.volumes() {
            assert!((v - 0.125).abs() < 1e-14);
        }
        assert!((m.total_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn internal_faces_point_owner_to_neighbour() {
        let m = build_structured_grid(&BoxSpec::unit([3, 2, 2])).unwrap();
        for f in 0..m.n_internal_faces() {
            assert!(m.face_area(f).dot(&m.face_delta(f)) > 0.0);
        }
        for f in m.n_internal_faces()..m.n_faces() {
            let o = m.face(f).owner;
            assert!(m.face_area(f).dot(&(m.face_centre(f) - m.centre(o))) > 0.0);
        }
    }

    #[test]
    fn out_of_range_cell_is_index_error() {
        let m = build_structured_grid(&BoxSpec::unit([2, 2, 2])).unwrap();
        assert!(matches!(
            m.cell_neighbours(8, Adjacency::Face),
            Err(Error::Index { index: 8, len: 8 })
        ));
    }

    #[test]
    fn boundary_face_without_patch_is_rejected() {
        let m = build_structured_grid(&BoxSpec::unit([1, 1, 1])).unwrap();
        let mut patches = m.patches().to_vec();
        patches.pop();
        let r = Mesh::from_topology(m.vertices().to_vec(), m.faces().to_vec(), patches, vec![]);
        assert!(matches!(r, Err(Error::InvalidGeometry(_))));
    }

    #[test]
    fn quasi_two_dimensional_axis_detected() {
        let m = build_structured_grid(&BoxSpec::unit([4, 3, 1])).unwrap();
        assert_eq!(m.degenerate_axes(), [false, false, true]);
    }
}
