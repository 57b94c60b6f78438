//! Extended stencils of IB cells: connectivity levels, distance and
//! field-of-view filters, the anisotropic points cap and boundary-point
//! enrichment. The partition exchange planner lives in [`exchange`].

pub mod exchange;

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result, StencilDiagnostics};
use crate::geometry::{CellLabel, Classification, IbPoint};
use crate::mesh::{Adjacency, Mesh};
use crate::{Mat3, Vec3};

pub use exchange::{build_exchange_map, recursive_bisection, simulate_gather, ExchangeMap, PeerExchange};

/// Upper bound on the centre-to-centre distance between owner and member.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusLimit {
    /// Metres.
    Absolute(f64),
    /// Multiple of the owner cell diameter.
    OwnerDiameters(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Enrichment {
    Never,
    /// Only when the cell members alone cannot support the requested basis.
    OnStarvation,
    Always,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StencilCriteria {
    pub max_level: usize,
    pub radius: RadiusLimit,
    /// Half-angle of the acceptance cone around the fluid-pointing normal.
    pub fov_angle: f64,
    /// Member cap; `None` means twice the number of basis coefficients.
    pub points_cap: Option<usize>,
    pub adjacency: Adjacency,
    pub enrichment: Enrichment,
}

impl Default for StencilCriteria {
    fn default() -> Self {
        StencilCriteria {
            max_level: 2,
            radius: RadiusLimit::OwnerDiameters(3.0),
            fov_angle: 2.0 * std::f64::consts::PI / 3.0,
            points_cap: None,
            adjacency: Adjacency::Face,
            enrichment: Enrichment::OnStarvation,
        }
    }
}

impl StencilCriteria {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.max_level < 1 {
            errs.push("stencil connectivity level must be at least 1".to_string());
        }
        let r = match self.radius {
            RadiusLimit::Absolute(r) | RadiusLimit::OwnerDiameters(r) => r,
        };
        if !(r > 0.0) {
            errs.push("stencil radius must be positive".to_string());
        }
        if !(self.fov_angle > 0.0 && self.fov_angle <= std::f64::consts::PI) {
            errs.push("field-of-view angle must lie in (0, pi]".to_string());
        }
        if self.points_cap == Some(0) {
            errs.push("points cap must be at least 1".to_string());
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidInput(errs.join("; ")))
        }
    }

    pub fn radius_for(&self, mesh: &Mesh, cell: usize) -> f64 {
        match self.radius {
            RadiusLimit::Absolute(r) => r,
            RadiusLimit::OwnerDiameters(k) => k * mesh.diameter(cell),
        }
    }
}

/// Orthonormal frame and length scales of a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrincipalDirections {
    /// Rows are the principal directions.
    pub frame: Mat3,
    /// Lengths along each direction, metres.
    pub scales: Vec3,
    /// Set when the cell was too flat and an isotropic metric was used.
    pub isotropic_fallback: bool,
}

impl PrincipalDirections {
    pub fn new(frame: Mat3, scales: Vec3) -> Result<Self> {
        if scales.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidInput(format!("principal scales must be positive, got {scales:?}")));
        }
        if (frame * frame.transpose() - Mat3::identity()).norm() > 1e-10 {
            return Err(Error::InvalidInput("principal frame is not orthonormal".into()));
        }
        Ok(PrincipalDirections { frame, scales, isotropic_fallback: false })
    }

    pub fn isotropic(scale: f64) -> Self {
        PrincipalDirections { frame: Mat3::identity(), scales: Vec3::repeat(scale), isotropic_fallback: false }
    }

    /// `‖Λ⁻¹ T (a − b)‖`.
    pub fn distance(&self, a: &Vec3, b: &Vec3) -> f64 {
        (self.frame * (a - b)).component_div(&self.scales).norm()
    }
}

/// Anisotropic distance between an IB point and a point.
pub fn anisotropic_distance(pd: &PrincipalDirections, p_ib: &Vec3, p: &Vec3) -> Result<f64> {
    if pd.scales.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::InvalidInput("singular principal scales".into()));
    }
    Ok(pd.distance(p_ib, p))
}

/// Eigen-frame of the vertex covariance about the cell centre. Scales are
/// `2·sqrt(eigenvalue)`, which gives the side lengths of a box cell.
pub fn principal_directions(mesh: &Mesh, cell: usize) -> PrincipalDirections {
    let c = mesh.centre(cell);
    let pts = mesh.cell_vertex_positions(cell);
    let mut cov = Mat3::zeros();
    for p in &pts {
        let d = p - c;
        cov += d * d.transpose();
    }
    cov /= pts.len() as f64;
    let eig = nalgebra::SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let lmax = eig.eigenvalues[order[0]];
    let lmin = eig.eigenvalues[order[2]];
    if !(lmax > 0.0) || lmin <= 1e-12 * lmax {
        let mut pd = PrincipalDirections::isotropic(mesh.diameter(cell).max(f64::MIN_POSITIVE));
        pd.isotropic_fallback = true;
        return pd;
    }
    let mut frame = Mat3::zeros();
    let mut scales = Vec3::zeros();
    for (row, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        // Fix the sign so the frame does not depend on the eigensolver.
        let lead = (0..3).max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs())).unwrap();
        if v[lead] < 0.0 {
            v = -v;
        }
        frame.set_row(row, &v.transpose());
        scales[row] = 2.0 * eig.eigenvalues[k].sqrt();
    }
    PrincipalDirections { frame, scales, isotropic_fallback: false }
}

/// Translation that brings neighbour `n` next to `cell` when they are linked
/// through a periodic face (zero otherwise).
fn periodic_offset(mesh: &Mesh, cell: usize, n: usize) -> Vec3 {
    let mut periodic = None;
    for &f in mesh.cell_faces(cell) {
        let face = mesh.face(f);
        let other = if face.owner == cell { face.neighbour } else { Some(face.owner) };
        if other == Some(n) {
            if !mesh.is_periodic_face(f) {
                return Vec3::zeros();
            }
            periodic.get_or_insert(f);
        }
    }
    match periodic {
        Some(f) => mesh.neighbour_centre_for(cell, f).unwrap() - mesh.centre(n),
        None => Vec3::zeros(),
    }
}

/// Cells within `level` adjacency steps of `cell`, with their centres as seen
/// from `cell` (periodic images translated), in breadth-first order.
pub fn connectivity_with_positions(mesh: &Mesh, cell: usize, level: usize, mode: Adjacency) -> Vec<(usize, Vec3)> {
    let mut visited: std::collections::HashMap<usize, Vec3> = std::collections::HashMap::new();
    visited.insert(cell, Vec3::zeros());
    let mut out = vec![(cell, mesh.centre(cell))];
    let mut queue = VecDeque::from([(cell, 0usize)]);
    while let Some((a, d)) = queue.pop_front() {
        if d == level {
            continue;
        }
        let oa = visited[&a];
        for &n in mesh.neighbours(a, mode) {
            if visited.contains_key(&n) {
                continue;
            }
            let on = oa + periodic_offset(mesh, a, n);
            visited.insert(n, on);
            out.push((n, mesh.centre(n) + on));
            queue.push_back((n, d + 1));
        }
    }
    out
}

/// `K^level` of a cell: the cell itself at level 0, then neighbours of the
/// previous level added recursively.
pub fn connectivity_stencil(mesh: &Mesh, cell: usize, level: usize, mode: Adjacency) -> BTreeSet<usize> {
    connectivity_with_positions(mesh, cell, level, mode).into_iter().map(|(c, _)| c).collect()
}

/// Field-of-view predicate: angle between `k − p_ib` and the fluid-pointing
/// direction `−n_ib` is at most `angle`.
pub fn in_field_of_view(k: &Vec3, p_ib: &Vec3, n_ib: &Vec3, angle: f64) -> bool {
    let d = k - p_ib;
    let len = d.norm();
    if len == 0.0 {
        return true;
    }
    // Small slack so that a full cone (angle = π) accepts everything.
    (-n_ib).dot(&d) / len >= angle.cos() - 1e-14
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundarySource {
    /// Centre of a boundary face on a Dirichlet patch.
    ConformingFace(usize),
    /// IB point (index into the IB point list) of another immersed surface.
    SurfacePoint(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryObservation {
    pub position: Vec3,
    pub source: BoundarySource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub owner: usize,
    /// Index of the IB point in the IB point list.
    pub ib: usize,
    pub ib_point: Vec3,
    pub ib_normal: Vec3,
    pub members: Vec<usize>,
    /// Member centres in the owner's frame.
    pub positions: Vec<Vec3>,
    pub boundary: Vec<BoundaryObservation>,
    pub pd: PrincipalDirections,
    pub diagnostics: StencilDiagnostics,
    pub removed_by_cap: usize,
}

impl Stencil {
    pub fn n_observations(&self) -> usize {
        self.members.len() + self.boundary.len()
    }
}

/// Filters the connectivity stencil of the IB cell by solidity, distance and
/// field of view. The owner cell is never a member.
pub fn build_extended_stencil(
    mesh: &Mesh,
    cls: &Classification,
    ib_index: usize,
    ib: &IbPoint,
    criteria: &StencilCriteria,
) -> Result<Stencil> {
    let owner = ib.cell;
    if cls.label(owner) != CellLabel::Ib {
        return Err(Error::InvalidInput(format!("cell {owner} is not an IB cell")));
    }
    let r = criteria.radius_for(mesh, owner);
    let kc = mesh.centre(owner);
    let mut diag = StencilDiagnostics::default();
    let mut members = Vec::new();
    let mut positions = Vec::new();
    for (c, pos) in connectivity_with_positions(mesh, owner, criteria.max_level, criteria.adjacency) {
        if c == owner {
            continue;
        }
        diag.candidates += 1;
        if cls.label(c) == CellLabel::Solid {
            diag.removed_solid += 1;
        } else if (pos - kc).norm() > r {
            diag.removed_distance += 1;
        } else if !in_field_of_view(&pos, &ib.point, &ib.normal, criteria.fov_angle) {
            diag.removed_field_of_view += 1;
        } else {
            members.push(c);
            positions.push(pos);
        }
    }
    Ok(Stencil {
        owner,
        ib: ib_index,
        ib_point: ib.point,
        ib_normal: ib.normal,
        members,
        positions,
        boundary: Vec::new(),
        pd: principal_directions(mesh, owner),
        diagnostics: diag,
        removed_by_cap: 0,
    })
}

/// Keeps the `n_cap` members nearest to the IB point in the anisotropic
/// metric; ties go to the lower cell id.
pub fn apply_points_cap(stencil: &Stencil, n_cap: usize, pd: &PrincipalDirections) -> Stencil {
    if stencil.members.len() <= n_cap {
        return stencil.clone();
    }
    let mut idx: Vec<usize> = (0..stencil.members.len()).collect();
    let dist: Vec<f64> = stencil.positions.iter().map(|p| pd.distance(&stencil.ib_point, p)).collect();
    idx.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(stencil.members[a].cmp(&stencil.members[b])));
    idx.truncate(n_cap);
    // Keep the original (breadth-first) order among the survivors.
    idx.sort_unstable();
    let mut out = stencil.clone();
    out.members = idx.iter().map(|&i| stencil.members[i]).collect();
    out.positions = idx.iter().map(|&i| stencil.positions[i]).collect();
    out.removed_by_cap = stencil.removed_by_cap + stencil.members.len() - n_cap;
    out
}

/// Adds Dirichlet boundary-face centres and other surfaces' IB points that
/// lie within the stencil radius and the field-of-view cone.
pub fn enrich_with_boundary_points(
    mesh: &Mesh,
    cls: &Classification,
    stencil: &Stencil,
    criteria: &StencilCriteria,
    dirichlet_faces: &[bool],
    ib_points: &[IbPoint],
) -> Stencil {
    let owner = stencil.owner;
    let r = criteria.radius_for(mesh, owner);
    let kc = mesh.centre(owner);
    let own_body = ib_points[stencil.ib].body;
    let accept = |p: &Vec3| (p - kc).norm() <= r && in_field_of_view(p, &stencil.ib_point, &stencil.ib_normal, criteria.fov_angle);
    let near = connectivity_with_positions(mesh, owner, criteria.max_level, criteria.adjacency);
    let mut out = stencil.clone();
    let mut seen_faces = BTreeSet::new();
    for &(c, pos) in &near {
        if cls.label(c) == CellLabel::Solid {
            continue;
        }
        let shift = pos - mesh.centre(c);
        for &f in mesh.cell_faces(c) {
            if f < mesh.n_internal_faces() || !dirichlet_faces.get(f).copied().unwrap_or(false) {
                continue;
            }
            let p = mesh.face_centre(f) + shift;
            if accept(&p) && seen_faces.insert(f) {
                out.boundary.push(BoundaryObservation { position: p, source: BoundarySource::ConformingFace(f) });
            }
        }
    }
    let near_cells: std::collections::HashMap<usize, Vec3> =
        near.iter().map(|&(c, pos)| (c, pos - mesh.centre(c))).collect();
    for (k, q) in ib_points.iter().enumerate() {
        if q.body == own_body {
            continue;
        }
        if let Some(shift) = near_cells.get(&q.cell) {
            let p = q.point + shift;
            if accept(&p) {
                out.boundary.push(BoundaryObservation { position: p, source: BoundarySource::SurfacePoint(k) });
            }
        }
    }
    out
}

/// Full stencil pipeline for every IB point: filters, optional enrichment,
/// then the points cap. `n_coeffs` is the basis size at the requested degree.
pub fn build_stencils(
    mesh: &Mesh,
    cls: &Classification,
    ib_points: &[IbPoint],
    criteria: &StencilCriteria,
    n_coeffs: usize,
    dirichlet_faces: &[bool],
) -> Result<Vec<Stencil>> {
    criteria.validate()?;
    let cap = criteria.points_cap.unwrap_or(2 * n_coeffs).max(1);
    ib_points
        .par_iter()
        .enumerate()
        .map(|(k, ib)| {
            let mut s = build_extended_stencil(mesh, cls, k, ib, criteria)?;
            let starving = s.members.len() + 1 < n_coeffs || s.members.is_empty();
            let enrich = match criteria.enrichment {
                Enrichment::Never => false,
                Enrichment::OnStarvation => starving,
                Enrichment::Always => true,
            };
            if enrich {
                s = enrich_with_boundary_points(mesh, cls, &s, criteria, dirichlet_faces, ib_points);
            }
            if s.n_observations() == 0 {
                return Err(Error::StencilStarvation { cell: ib.cell, diagnostics: s.diagnostics });
            }
            let pd = s.pd;
            Ok(apply_points_cap(&s, cap, &pd))
        })
        .collect()
}

/// Structured-text audit of the stencils: one block per IB cell.
pub fn stencil_audit(stencils: &[Stencil]) -> String {
    let mut s = String::new();
    writeln!(s, "# ibflow stencil audit, {} IB cells", stencils.len()).unwrap();
    for st in stencils {
        let d = &st.diagnostics;
        writeln!(
            s,
            "cell {} ib_point {} {} {} normal {} {} {}",
            st.owner, st.ib_point.x, st.ib_point.y, st.ib_point.z, st.ib_normal.x, st.ib_normal.y, st.ib_normal.z
        )
        .unwrap();
        writeln!(
            s,
            "  candidates {} removed_solid {} removed_distance {} removed_field_of_view {} removed_cap {}",
            d.candidates, d.removed_solid, d.removed_distance, d.removed_field_of_view, st.removed_by_cap
        )
        .unwrap();
        let ids: Vec<String> = st.members.iter().map(|m| m.to_string()).collect();
        writeln!(s, "  members {}: {}", st.members.len(), ids.join(" ")).unwrap();
        if !st.boundary.is_empty() {
            let b: Vec<String> = st
                .boundary
                .iter()
                .map(|o| match o.source {
                    BoundarySource::ConformingFace(f) => format!("face:{f}"),
                    BoundarySource::SurfacePoint(k) => format!("ib:{k}"),
                })
                .collect();
            writeln!(s, "  boundary {}: {}", st.boundary.len(), b.join(" ")).unwrap();
        }
        if st.pd.isotropic_fallback {
            writeln!(s, "  warning: flat owner cell, isotropic metric").unwrap();
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_cells, ib_points, ImmersedBody, TriSurface};
    use crate::mesh::{build_structured_grid, BoxSpec};

    fn bfs_oracle(mesh: &Mesh, cell: usize, level: usize) -> BTreeSet<usize> {
        // Brute force: cells whose grid index distance (Manhattan) is ≤ level.
        let _ = mesh;
        let n = 5;
        let (i0, j0, k0) = (cell % n, (cell / n) % n, cell / (n * n));
        (0..n * n * n)
            .filter(|&c| {
                let (i, j, k) = (c % n, (c / n) % n, c / (n * n));
                i.abs_diff(i0) + j.abs_diff(j0) + k.abs_diff(k0) <= level
            })
            .collect()
    }

    #[test]
    fn connectivity_levels() {
        let m = build_structured_grid(&BoxSpec::unit([5, 5, 5])).unwrap();
        let centre = 62;
        assert_eq!(connectivity_stencil(&m, centre, 0, Adjacency::Face), BTreeSet::from([centre]));
        let k1 = connectivity_stencil(&m, centre, 1, Adjacency::Face);
        assert_eq!(k1.len(), 7);
        for level in 0..4 {
            assert_eq!(connectivity_stencil(&m, centre, level, Adjacency::Face), bfs_oracle(&m, centre, level));
        }
    }

    #[test]
    fn anisotropic_distance_examples() {
        let pd = PrincipalDirections::new(Mat3::identity(), Vec3::new(10.0, 1.0, 1.0)).unwrap();
        let o = Vec3::zeros();
        assert!((pd.distance(&Vec3::new(10.0, 0.0, 0.0), &o) - 1.0).abs() < 1e-15);
        assert!((pd.distance(&Vec3::new(0.0, 1.0, 0.0), &o) - 1.0).abs() < 1e-15);
        assert_eq!(pd.distance(&o, &o), 0.0);
        let iso = PrincipalDirections::isotropic(1.0);
        let p = Vec3::new(1.0, 2.0, 2.0);
        assert!((anisotropic_distance(&iso, &o, &p).unwrap() - 3.0).abs() < 1e-15);
        assert!(PrincipalDirections::new(Mat3::identity(), Vec3::new(1.0, 0.0, 1.0)).is_err());
    }

    #[test]
    fn box_cell_principal_scales() {
        let m = build_structured_grid(&BoxSpec::new(Vec3::zeros(), Vec3::new(10.0, 1.0, 1.0), [1, 1, 1])).unwrap();
        let pd = principal_directions(&m, 0);
        assert!((pd.scales[0] - 10.0).abs() < 1e-10);
        assert!((pd.scales[1] - 1.0).abs() < 1e-10);
        assert!((pd.scales[2] - 1.0).abs() < 1e-10);
        let cube = build_structured_grid(&BoxSpec::unit([1, 1, 1])).unwrap();
        let pc = principal_directions(&cube, 0);
        assert!((pc.scales - Vec3::repeat(pc.scales[0])).norm() < 1e-12);
    }

    #[test]
    fn full_criteria_reduce_to_connectivity_minus_solid() {
        let m = build_structured_grid(&BoxSpec::unit([8, 8, 8])).unwrap();
        let bodies = [ImmersedBody::new("b", TriSurface::icosphere(Vec3::repeat(0.5), 0.25, 2).unwrap())];
        let cls = classify_cells(&m, &bodies, Adjacency::Face);
        let pts = ib_points(&m, &cls, &bodies);
        let crit = StencilCriteria {
            max_level: 3,
            radius: RadiusLimit::Absolute(1e9),
            fov_angle: std::f64::consts::PI,
            ..Default::default()
        };
        for (k, ib) in pts.iter().enumerate() {
            let s = build_extended_stencil(&m, &cls, k, ib, &crit).unwrap();
            let expect: BTreeSet<usize> = connectivity_stencil(&m, ib.cell, 3, Adjacency::Face)
                .into_iter()
                .filter(|&c| c != ib.cell && cls.label(c) != CellLabel::Solid)
                .collect();
            assert_eq!(s.members.iter().copied().collect::<BTreeSet<_>>(), expect);
            assert_eq!(s.diagnostics.removed_field_of_view, 0);
        }
    }

    #[test]
    fn cap_prefers_stretched_axis_under_anisotropic_metric() {
        // Cells 10 wide in x and 1 tall in y: Euclidean picks y-neighbours,
        // the cell metric treats one cell step alike in both directions.
        let m = build_structured_grid(&BoxSpec::new(Vec3::zeros(), Vec3::new(90.0, 9.0, 1.0), [9, 9, 1])).unwrap();
        let owner = 4 + 9 * 4;
        let pos: Vec<Vec3> = (0..m.n_cells()).map(|c| m.centre(c)).collect();
        let members: Vec<usize> = (0..m.n_cells()).filter(|&c| c != owner).collect();
        let st = Stencil {
            owner,
            ib: 0,
            ib_point: m.centre(owner),
            ib_normal: Vec3::z(),
            positions: members.iter().map(|&c| pos[c]).collect(),
            members,
            boundary: vec![],
            pd: principal_directions(&m, owner),
            diagnostics: StencilDiagnostics::default(),
            removed_by_cap: 0,
        };
        let aniso = apply_points_cap(&st, 4, &st.pd);
        let iso = apply_points_cap(&st, 4, &PrincipalDirections::isotropic(1.0));
        let span_x = |s: &Stencil| s.positions.iter().map(|p| (p.x - 45.0).abs()).fold(0.0, f64::max);
        assert_ne!(aniso.members, iso.members);
        assert!(span_x(&aniso) > span_x(&iso));
        // Full-sort oracle.
        let mut all: Vec<(f64, usize)> = st.members.iter().zip(&st.positions).map(|(&c, p)| (st.pd.distance(&st.ib_point, p), c)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let want: BTreeSet<usize> = all[..4].iter().map(|x| x.1).collect();
        assert_eq!(aniso.members.iter().copied().collect::<BTreeSet<_>>(), want);
    }

    #[test]
    fn two_spheres_in_a_gap_share_points() {
        let m = build_structured_grid(&BoxSpec::new(Vec3::zeros(), Vec3::new(2.0, 1.0, 1.0), [20, 10, 10])).unwrap();
        let bodies = [
            ImmersedBody::new("a", TriSurface::icosphere(Vec3::new(0.62, 0.5, 0.5), 0.35, 2).unwrap()),
            ImmersedBody::new("b", TriSurface::icosphere(Vec3::new(1.38, 0.5, 0.5), 0.35, 2).unwrap()),
        ];
        let cls = classify_cells(&m, &bodies, Adjacency::Face);
        let pts = ib_points(&m, &cls, &bodies);
        let crit = StencilCriteria { enrichment: Enrichment::Always, ..Default::default() };
        let stencils = build_stencils(&m, &cls, &pts, &crit, 4, &vec![false; m.n_faces()]).unwrap();
        let mut gained = [false; 2];
        for s in &stencils {
            for o in &s.boundary {
                if let BoundarySource::SurfacePoint(k) = o.source {
                    assert_ne!(pts[k].body, pts[s.ib].body);
                    assert!((o.position - m.centre(s.owner)).norm() <= crit.radius_for(&m, s.owner));
                    gained[pts[s.ib].body] = true;
                }
            }
            assert!(s.members.iter().all(|&c| cls.label(c) != CellLabel::Solid));
        }
        assert_eq!(gained, [true, true]);
    }

    #[test]
    fn wall_face_enrichment() {
        let m = build_structured_grid(&BoxSpec::unit([6, 6, 6])).unwrap();
        // A ball touching the x- wall region so some IB cells sit on the wall.
        let bodies = [ImmersedBody::new("b", TriSurface::icosphere(Vec3::new(0.25, 0.5, 0.5), 0.2, 2).unwrap())];
        let cls = classify_cells(&m, &bodies, Adjacency::Face);
        let pts = ib_points(&m, &cls, &bodies);
        let mut dir = vec![false; m.n_faces()];
        let (_, xmin) = m.patch_by_name("xmin").unwrap();
        for &f in &xmin.faces {
            dir[f] = true;
        }
        let crit = StencilCriteria { enrichment: Enrichment::Always, fov_angle: std::f64::consts::PI, ..Default::default() };
        let stencils = build_stencils(&m, &cls, &pts, &crit, 4, &dir).unwrap();
        let mut found = false;
        for s in &stencils {
            let on_wall = m.cell_faces(s.owner).iter().any(|f| xmin.faces.contains(f));
            if on_wall {
                let faces: Vec<usize> = s
                    .boundary
                    .iter()
                    .filter_map(|o| match o.source {
                        BoundarySource::ConformingFace(f) => Some(f),
                        _ => None,
                    })
                    .collect();
                let own = m.cell_faces(s.owner).iter().find(|f| xmin.faces.contains(f)).unwrap();
                assert!(faces.contains(own));
                found = true;
            }
        }
        assert!(found);
    }

    #[test]
    fn audit_lists_each_stencil() {
        let m = build_structured_grid(&BoxSpec::unit([6, 6, 6])).unwrap();
        let bodies = [ImmersedBody::new("b", TriSurface::icosphere(Vec3::repeat(0.5), 0.2, 2).unwrap())];
        let cls = classify_cells(&m, &bodies, Adjacency::Face);
        let pts = ib_points(&m, &cls, &bodies);
        let st = build_stencils(&m, &cls, &pts, &StencilCriteria::default(), 10, &vec![false; m.n_faces()]).unwrap();
        let text = stencil_audit(&st);
        assert_eq!(text.matches("\ncell ").count(), st.len());
    }
}
