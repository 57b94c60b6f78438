//! Closed triangulated surfaces: construction, quality gate, containment and
//! closest-point queries.

use std::collections::{BTreeMap, HashMap};

use super::bvh::{Aabb, Bvh};
use crate::error::{Error, Result};
use crate::Vec3;

/// Result of a point-in-surface test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Containment {
    Inside,
    Outside,
    /// The point lies on the surface to within the query tolerance.
    OnBoundary,
}

impl Containment {
    /// Boundary points are counted as inside.
    pub fn is_inside(self) -> bool {
        !matches!(self, Containment::Outside)
    }
}

/// Which feature of a triangle holds the closest point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feature {
    Face,
    /// Local edge index: 0 = (a,b), 1 = (b,c), 2 = (c,a).
    Edge(u8),
    /// Local vertex index.
    Vertex(u8),
}

#[derive(Debug, Clone, Copy)]
pub struct ClosestPoint {
    pub point: Vec3,
    pub distance: f64,
    pub triangle: usize,
    pub feature: Feature,
    /// Outward pseudo-normal of the feature (angle-weighted at vertices).
    pub normal: Vec3,
}

#[derive(Debug, Clone)]
pub struct TriSurface {
    vertices: Vec<Vec3>,
    triangles: Vec<[usize; 3]>,
    areas: Vec<f64>,
    centroids: Vec<Vec3>,
    normals: Vec<Vec3>,
    edge_normals: HashMap<(usize, usize), Vec3>,
    vertex_normals: Vec<Vec3>,
    bounds: Aabb,
    centroid: Vec3,
    radius: f64,
    bvh: Bvh,
}

enum RayHit {
    Miss,
    Crossing,
    Ambiguous,
    OnSurface,
}

// Skewed ray directions; none is parallel to a coordinate plane.
const RAY_DIRS: [[f64; 3]; 6] = [
    [0.5773, 0.6172, 0.5345],
    [-0.3217, 0.8114, 0.4879],
    [0.7433, -0.2291, 0.6285],
    [-0.6071, -0.5513, 0.5723],
    [0.4112, 0.5019, -0.7609],
    [-0.5381, 0.3343, -0.7737],
];

impl TriSurface {
    /// Builds a surface and applies the quality gate: every triangle must have
    /// positive area, every edge must be shared by exactly two triangles with
    /// opposite orientation, and the area-weighted normals must cancel.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::SurfaceQuality("surface has no triangles".into()));
        }
        let mut bounds = Aabb::empty();
        for v in &vertices {
            if !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()) {
                return Err(Error::SurfaceQuality("non-finite vertex coordinate".into()));
            }
            bounds.grow(v);
        }
        let scale = bounds.diagonal();
        let mut areas = Vec::with_capacity(triangles.len());
        let mut centroids = Vec::with_capacity(triangles.len());
        let mut normals = Vec::with_capacity(triangles.len());
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        let mut total = Vec3::zeros();
        let mut total_area = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= vertices.len()) {
                return Err(Error::SurfaceQuality(format!("triangle {t} references a missing vertex")));
            }
            let [a, b, c] = tri.map(|i| vertices[i]);
            let cr = (b - a).cross(&(c - a));
            let area = 0.5 * cr.norm();
            if area <= 1e-14 * scale * scale || tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::SurfaceQuality(format!("triangle {t} has zero area")));
            }
            areas.push(area);
            centroids.push((a + b + c) / 3.0);
            normals.push(cr / (2.0 * area));
            total += cr * 0.5;
            total_area += area;
            for k in 0..3 {
                let e = (tri[k], tri[(k + 1) % 3]);
                if directed.insert(e, t).is_some() {
                    return Err(Error::SurfaceQuality(format!(
                        "edge ({}, {}) is used twice with the same orientation",
                        e.0, e.1
                    )));
                }
            }
        }
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                return Err(Error::SurfaceQuality(format!("edge ({a}, {b}) is not shared by two triangles")));
            }
        }
        if total.norm() > 1e-8 * total_area {
            return Err(Error::SurfaceQuality(format!(
                "surface is not closed: net area vector {:.3e}",
                total.norm()
            )));
        }

        let mut edge_normals = HashMap::new();
        for (&(a, b), &t) in &directed {
            if a < b {
                let t2 = directed[&(b, a)];
                let n = normals[t] + normals[t2];
                let n = if n.norm() > 0.0 { n.normalize() } else { normals[t] };
                edge_normals.insert((a, b), n);
            }
        }
        let mut vertex_normals = vec![Vec3::zeros(); vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let p = vertices[tri[k]];
                let e1 = (vertices[tri[(k + 1) % 3]] - p).normalize();
                let e2 = (vertices[tri[(k + 2) % 3]] - p).normalize();
                let angle = e1.dot(&e2).clamp(-1.0, 1.0).acos();
                vertex_normals[tri[k]] += normals[t] * angle;
            }
        }
        for n in &mut vertex_normals {
            if n.norm() > 0.0 {
                *n = n.normalize();
            }
        }

        let boxes: Vec<Aabb> = triangles
            .iter()
            .map(|tri| {
                let mut b = Aabb::empty();
                for &i in tri {
                    b.grow(&vertices[i]);
                }
                b
            })
            .collect();
        let bvh = Bvh::build(&boxes);
        let centroid = (bounds.min + bounds.max) * 0.5;
        let radius = vertices.iter().map(|v| (v - centroid).norm()).fold(0.0, f64::max);
        Ok(TriSurface {
            vertices,
            triangles,
            areas,
            centroids,
            normals,
            edge_normals,
            vertex_normals,
            bounds,
            centroid,
            radius,
            bvh,
        })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn centroids(&self) -> &[Vec3] {
        &self.centroids
    }

    pub fn normals(&self) -> &[Vec3] {
        &self.normals
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        (self.bounds.min, self.bounds.max)
    }

    /// Length scale used for on-surface tolerances.
    pub fn scale(&self) -> f64 {
        self.bounds.diagonal()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Enclosed volume from the signed tetrahedra about the origin.
    pub fn enclosed_volume(&self) -> f64 {
        self.triangles
            .iter()
            .map(|t| self.vertices[t[0]].dot(&self.vertices[t[1]].cross(&self.vertices[t[2]])) / 6.0)
            .sum()
    }

    /// Net area vector; zero for a closed surface.
    pub fn net_area_vector(&self) -> Vec3 {
        self.normals.iter().zip(&self.areas).map(|(n, a)| n * *a).sum()
    }

    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Result<TriSurface> {
        TriSurface::new(self.vertices.iter().map(f).collect(), self.triangles.clone())
    }

    pub fn translated(&self, t: Vec3) -> TriSurface {
        self.map_vertices(|v| v + t).expect("translation preserves quality")
    }

    /// Icosahedron refined `subdivisions` times and projected onto a sphere.
    pub fn icosphere(centre: Vec3, radius: f64, subdivisions: usize) -> Result<Self> {
        if radius <= 0.0 {
            return Err(Error::InvalidGeometry("sphere radius must be positive".into()));
        }
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let mut verts: Vec<Vec3> = [
            [-1.0, phi, 0.0],
            [1.0, phi, 0.0],
            [-1.0, -phi, 0.0],
            [1.0, -phi, 0.0],
            [0.0, -1.0, phi],
            [0.0, 1.0, phi],
            [0.0, -1.0, -phi],
            [0.0, 1.0, -phi],
            [phi, 0.0, -1.0],
            [phi, 0.0, 1.0],
            [-phi, 0.0, -1.0],
            [-phi, 0.0, 1.0],
        ]
        .iter()
        .map(|p| Vec3::new(p[0], p[1], p[2]).normalize())
        .collect();
        let mut tris: Vec<[usize; 3]> = vec![
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ];
        for _ in 0..subdivisions {
            let mut mid: HashMap<(usize, usize), usize> = HashMap::new();
            let mut next = Vec::with_capacity(tris.len() * 4);
            let mut midpoint = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
                let key = (a.min(b), a.max(b));
                *mid.entry(key).or_insert_with(|| {
                    verts.push(((verts[a] + verts[b]) * 0.5).normalize());
                    verts.len() - 1
                })
            };
            for [a, b, c] in tris {
                let ab = midpoint(a, b, &mut verts);
                let bc = midpoint(b, c, &mut verts);
                let ca = midpoint(c, a, &mut verts);
                next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            tris = next;
        }
        TriSurface::new(verts.into_iter().map(|v| centre + v * radius).collect(), tris)
    }

    /// Closed circular cylinder along `axis` (unit) from `z0` to `z1`
    /// measured along the axis from `centre`.
    pub fn cylinder(centre: Vec3, axis: Vec3, radius: f64, z0: f64, z1: f64, segments: usize) -> Result<Self> {
        if radius <= 0.0 || z1 <= z0 || segments < 3 {
            return Err(Error::InvalidGeometry(
                "cylinder needs positive radius, z1 > z0 and at least 3 segments".into(),
            ));
        }
        let ez = axis.normalize();
        let helper = if ez.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        let ex = (helper - ez * ez.dot(&helper)).normalize();
        let ey = ez.cross(&ex);
        let mut verts = Vec::with_capacity(2 * segments + 2);
        for z in [z0, z1] {
            for k in 0..segments {
                let th = 2.0 * std::f64::consts::PI * k as f64 / segments as f64;
                verts.push(centre + ez * z + (ex * th.cos() + ey * th.sin()) * radius);
            }
        }
        let bottom = verts.len();
        verts.push(centre + ez * z0);
        let top = verts.len();
        verts.push(centre + ez * z1);
        let mut tris = Vec::with_capacity(4 * segments);
        for k in 0..segments {
            let k1 = (k + 1) % segments;
            let (a, b, c, d) = (k, k1, segments + k1, segments + k);
            tris.push([a, b, c]);
            tris.push([a, c, d]);
            tris.push([bottom, k1, k]);
            tris.push([top, segments + k, segments + k1]);
        }
        TriSurface::new(verts, tris)
    }

    /// Axis-aligned closed box.
    pub fn cuboid(min: Vec3, max: Vec3) -> Result<Self> {
        if (0..3).any(|k| max[k] <= min[k]) {
            return Err(Error::InvalidGeometry("box extent must be positive".into()));
        }
        let v = |i: usize| {
            Vec3::new(
                if i & 1 == 0 { min.x } else { max.x },
                if i & 2 == 0 { min.y } else { max.y },
                if i & 4 == 0 { min.z } else { max.z },
            )
        };
        let verts = (0..8).map(v).collect();
        let quads = [
            [0, 4, 6, 2], // x-
            [1, 3, 7, 5], // x+
            [0, 1, 5, 4], // y-
            [2, 6, 7, 3], // y+
            [0, 2, 3, 1], // z-
            [4, 5, 7, 6], // z+
        ];
        let tris = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
        TriSurface::new(verts, tris)
    }

    fn ray_hit(&self, t: usize, origin: &Vec3, dir: &Vec3) -> RayHit {
        // Möller–Trumbore, with hits near an edge or at a grazing angle
        // flagged so the caller can retry along another direction.
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        let on_tol = 1e-12 * self.scale();
        let e1 = b - a;
        let e2 = c - a;
        let pv = dir.cross(&e2);
        let det = e1.dot(&pv);
        if det.abs() <= 1e-12 * e1.norm() * e2.norm() {
            let dist = (origin - a).dot(&self.normals[t]);
            if dist.abs() > on_tol {
                return RayHit::Miss;
            }
            let q = closest_on_triangle(origin, &a, &b, &c).0;
            return if (q - origin).norm() <= on_tol { RayHit::OnSurface } else { RayHit::Ambiguous };
        }
        let inv = 1.0 / det;
        let s = origin - a;
        let u = s.dot(&pv) * inv;
        let q = s.cross(&e1);
        let v = dir.dot(&q) * inv;
        let tol = 1e-9;
        if u < -tol || v < -tol || u + v > 1.0 + tol {
            return RayHit::Miss;
        }
        let tt = e2.dot(&q) * inv;
        if tt.abs() <= on_tol {
            let q = closest_on_triangle(origin, &a, &b, &c).0;
            if (q - origin).norm() <= on_tol {
                return RayHit::OnSurface;
            }
        }
        if tt <= 0.0 {
            return RayHit::Miss;
        }
        if u < tol || v < tol || u + v > 1.0 - tol {
            RayHit::Ambiguous
        } else {
            RayHit::Crossing
        }
    }

    /// Parity ray cast, retried along other directions when a ray grazes an
    /// edge or vertex. Falls back to the winding number if every direction is
    /// ambiguous.
    pub fn containment(&self, p: &Vec3) -> Containment {
        if !self.bounds.contains(p, 1e-12 * self.scale()) || (p - self.centroid).norm() > self.radius * (1.0 + 1e-12) {
            return Containment::Outside;
        }
        let on_tol = 1e-12 * self.scale();
        for d in RAY_DIRS {
            let dir = Vec3::new(d[0], d[1], d[2]).normalize();
            let mut count = 0usize;
            let mut ambiguous = false;
            let mut on_surface = false;
            self.bvh.ray_candidates(p, &dir, -on_tol, |t| match self.ray_hit(t, p, &dir) {
                RayHit::Miss => {}
                RayHit::Crossing => count += 1,
                RayHit::Ambiguous => ambiguous = true,
                RayHit::OnSurface => on_surface = true,
            });
            if on_surface {
                return Containment::OnBoundary;
            }
            if !ambiguous {
                return if count % 2 == 1 { Containment::Inside } else { Containment::Outside };
            }
        }
        if self.winding_number(p) > 0.5 {
            Containment::Inside
        } else {
            Containment::Outside
        }
    }

    pub fn is_inside(&self, p: &Vec3) -> bool {
        self.containment(p).is_inside()
    }

    /// Generalized winding number: total solid angle over 4π.
    pub fn winding_number(&self, p: &Vec3) -> f64 {
        let mut total = 0.0;
        for tri in &self.triangles {
            let [a, b, c] = tri.map(|i| self.vertices[i] - p);
            let (la, lb, lc) = (a.norm(), b.norm(), c.norm());
            let num = a.dot(&b.cross(&c));
            let den = la * lb * lc + a.dot(&b) * lc + b.dot(&c) * la + c.dot(&a) * lb;
            total += 2.0 * num.atan2(den);
        }
        total / (4.0 * std::f64::consts::PI)
    }

    /// Closest point over all triangles, with the outward pseudo-normal of
    /// the feature that holds it.
    pub fn closest_point(&self, p: &Vec3) -> ClosestPoint {
        let (t, d2) = self
            .bvh
            .nearest(p, |t| {
                let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
                (closest_on_triangle(p, &a, &b, &c).0 - p).norm_squared()
            })
            .expect("surface has triangles");
        let tri = self.triangles[t];
        let [a, b, c] = tri.map(|i| self.vertices[i]);
        let (q, feature) = closest_on_triangle(p, &a, &b, &c);
        let normal = match feature {
            Feature::Face => self.normals[t],
            Feature::Edge(k) => {
                let (i, j) = (tri[k as usize], tri[(k as usize + 1) % 3]);
                self.edge_normals[&(i.min(j), i.max(j))]
            }
            Feature::Vertex(k) => self.vertex_normals[tri[k as usize]],
        };
        ClosestPoint { point: q, distance: d2.sqrt(), triangle: t, feature, normal }
    }

    /// Brute-force closest point, no acceleration.
    pub fn closest_point_linear(&self, p: &Vec3) -> (Vec3, f64) {
        self.triangles
            .iter()
            .map(|tri| {
                let [a, b, c] = tri.map(|i| self.vertices[i]);
                let q = closest_on_triangle(p, &a, &b, &c).0;
                (q, (q - p).norm())
            })
            .min_by(|x, y| x.1.total_cmp(&y.1))
            .unwrap()
    }

    /// Edge-use count per undirected edge, for audits.
    pub fn edge_valence(&self) -> BTreeMap<(usize, usize), usize> {
        let mut m = BTreeMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }
}

/// Closest point on triangle abc to p, following the Voronoi-region walk.
pub fn closest_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> (Vec3, Feature) {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (*a, Feature::Vertex(0));
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (*b, Feature::Vertex(1));
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (a + ab * v, Feature::Edge(0));
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (*c, Feature::Vertex(2));
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (a + ac * w, Feature::Edge(2));
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (b + (c - b) * w, Feature::Edge(1));
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (a + ab * v + ac * w, Feature::Face)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn icosphere_is_closed_and_outward() {
        let s = TriSurface::icosphere(Vec3::zeros(), 1.0, 2).unwrap();
        assert_eq!(s.triangles().len(), 320);
        assert!(s.net_area_vector().norm() <= 1e-8 * s.total_area());
        let v = s.enclosed_volume();
        assert!(v > 0.0 && v < 4.0 / 3.0 * std::f64::consts::PI);
        assert!(s.edge_valence().values().all(|&n| n == 2));
    }

    #[test]
    fn centre_inside_far_point_outside() {
        let s = TriSurface::icosphere(Vec3::zeros(), 1.0, 2).unwrap();
        assert_eq!(s.containment(&Vec3::zeros()), Containment::Inside);
        assert_eq!(s.containment(&Vec3::new(10.0, 0.0, 0.0)), Containment::Outside);
    }

    #[test]
    fn surface_vertex_is_boundary() {
        let s = TriSurface::icosphere(Vec3::zeros(), 1.0, 1).unwrap();
        let v = s.vertices()[3];
        assert_eq!(s.containment(&v), Containment::OnBoundary);
        let c = s.centroids()[7];
        assert_eq!(s.containment(&c), Containment::OnBoundary);
    }

    #[test]
    fn ray_cast_agrees_with_winding_number() {
        let s = TriSurface::icosphere(Vec3::new(0.1, -0.2, 0.05), 0.8, 2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let p = Vec3::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
            let w = s.winding_number(&p);
            assert_eq!(s.is_inside(&p), w > 0.5, "point {p:?} winding {w}");
        }
    }

    #[test]
    fn box_edges_and_vertices_are_handled() {
        let s = TriSurface::cuboid(Vec3::zeros(), Vec3::repeat(1.0)).unwrap();
        // Points whose axis rays would pass exactly through edges and vertices.
        assert!(s.is_inside(&Vec3::new(0.5, 0.5, 0.5)));
        assert!(s.is_inside(&Vec3::new(0.25, 0.25, 0.25)));
        assert!(!s.is_inside(&Vec3::new(1.5, 1.0, 1.0)));
        assert!(!s.is_inside(&Vec3::new(-0.5, 0.5, 0.5)));
    }

    #[test]
    fn closest_point_matches_brute_force() {
        let s = TriSurface::icosphere(Vec3::zeros(), 1.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let cp = s.closest_point(&p);
            let (_, d) = s.closest_point_linear(&p);
            assert!((cp.distance - d).abs() <= 1e-12);
            assert!((cp.normal.norm() - 1.0).abs() <= 1e-12);
        }
        let cp = s.closest_point(&Vec3::new(2.0, 0.0, 0.0));
        // Faceting error of a level-3 icosphere is well under 1%.
        assert!((cp.point.norm() - 1.0).abs() < 1e-2);
    }

    #[test]
    fn projection_is_idempotent() {
        let s = TriSurface::cylinder(Vec3::zeros(), Vec3::z(), 0.5, -1.0, 1.0, 64).unwrap();
        for p in [Vec3::new(1.0, 0.3, 0.2), Vec3::new(0.1, 0.1, 0.0), Vec3::new(0.7, 0.0, 1.5)] {
            let q = s.closest_point(&p).point;
            let q2 = s.closest_point(&q).point;
            assert!((q - q2).norm() <= 1e-12);
        }
    }

    #[test]
    fn open_surface_is_rejected() {
        let verts = vec![Vec3::zeros(), Vec3::x(), Vec3::y()];
        assert!(matches!(TriSurface::new(verts, vec![[0, 1, 2]]), Err(Error::SurfaceQuality(_))));
    }

    #[test]
    fn zero_area_triangle_is_rejected() {
        let s = TriSurface::cuboid(Vec3::zeros(), Vec3::repeat(1.0)).unwrap();
        let mut v = s.vertices().to_vec();
        v[1] = v[0];
        assert!(matches!(TriSurface::new(v, s.triangles().to_vec()), Err(Error::SurfaceQuality(_))));
    }

    #[test]
    fn cylinder_volume_and_orientation() {
        let s = TriSurface::cylinder(Vec3::zeros(), Vec3::z(), 1.0, 0.0, 2.0, 256).unwrap();
        let exact = 2.0 * 0.5 * 256.0 * (2.0 * std::f64::consts::PI / 256.0).sin();
        assert!((s.enclosed_volume() - exact).abs() < 1e-10);
        assert!(s.is_inside(&Vec3::new(0.9, 0.0, 1.0)));
        assert!(!s.is_inside(&Vec3::new(0.0, 0.0, 2.1)));
    }
}
