//! Reductions of solver state: section averages, probes, surface samples,
//! analytic benchmark errors and the simulated partition exchange check.

use std::collections::BTreeSet;

use super::config::{Benchmark, SectionField};
use crate::fv::{least_squares_gradient, FieldSet};
use crate::geometry::{CellLabel, ImmersedBody};
use crate::mesh::Mesh;
use crate::rheology::shift_factor;
use crate::solver::Solver;
use crate::stencil::{build_exchange_map, recursive_bisection, simulate_gather, ExchangeMap, Stencil};
use crate::Vec3;

/// Cell values of a section field; flow rate uses the velocity along `axis`.
pub fn field_values(fields: &FieldSet, field: SectionField, axis: usize) -> Vec<f64> {
    match field {
        SectionField::VelocityX => fields.u.iter().map(|u| u.x).collect(),
        SectionField::VelocityY => fields.u.iter().map(|u| u.y).collect(),
        SectionField::VelocityZ => fields.u.iter().map(|u| u.z).collect(),
        SectionField::Speed => fields.u.iter().map(|u| u.norm()).collect(),
        SectionField::Pressure => fields.p.clone(),
        SectionField::Temperature => fields.t.clone(),
        SectionField::Viscosity => fields.mu.clone(),
        SectionField::ShearRate => fields.shear_rate.clone(),
        SectionField::FlowRate => fields.u.iter().map(|u| u[axis]).collect(),
    }
}

/// Least-squares gradient with boundary values extrapolated from the cell,
/// iterated so that linear fields come out exact.
fn extrapolated_gradient(mesh: &Mesh, values: &[f64]) -> Vec<Vec3> {
    let mut grad = least_squares_gradient(mesh, values, |f| values[mesh.face(f).owner]);
    for _ in 0..30 {
        let g = &grad;
        let next = least_squares_gradient(mesh, values, |f| {
            let c = mesh.face(f).owner;
            values[c] + g[c].dot(&(mesh.face_centre(f) - mesh.centre(c)))
        });
        let change = next.iter().zip(&grad).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = next.iter().map(|a| a.norm()).fold(0.0, f64::max);
        grad = next;
        if change <= 1e-14 * scale.max(1e-300) {
            break;
        }
    }
    grad
}

/// Per station: `(Σ w φ, Σ w)` over the active cells cut by the plane, with
/// `φ` reconstructed at the plane and `w = V / extent` the cut area.
fn section_sums(mesh: &Mesh, values: &[f64], active: &[bool], axis: usize, stations: &[f64]) -> Vec<Option<(f64, f64)>> {
    let grad = extrapolated_gradient(mesh, values);
    let (lo, hi) = mesh.bounds();
    let tol = 1e-12 * (hi[axis] - lo[axis]);
    let bounds: Vec<(f64, f64)> = (0..mesh.n_cells())
        .map(|c| {
            let (a, b) = mesh.cell_bounds(c);
            (a[axis], b[axis])
        })
        .collect();
    stations
        .iter()
        .map(|&s| {
            if s < lo[axis] - tol || s > hi[axis] + tol {
                log::warn!("section station {s} lies outside [{}, {}] along axis {axis}; skipped", lo[axis], hi[axis]);
                return None;
            }
            let (mut num, mut den) = (0.0, 0.0);
            for c in (0..mesh.n_cells()).filter(|&c| active[c]) {
                let (a, b) = bounds[c];
                let inside = (a <= s && s < b) || (s >= hi[axis] - tol && b >= hi[axis] - tol);
                if !inside {
                    continue;
                }
                let w = mesh.volume(c) / (b - a);
                let v = values[c] + grad[c][axis] * (s - mesh.centre(c)[axis]);
                num += w * v;
                den += w;
            }
            (den > 0.0).then_some((num, den))
        })
        .collect()
}

/// Area-weighted mean of `values` over the plane `x[axis] = s` for each
/// station, restricted to `active` cells. Stations outside the mesh are
/// reported in the log and yield `None`.
pub fn section_average(mesh: &Mesh, values: &[f64], active: &[bool], axis: usize, stations: &[f64]) -> Vec<Option<f64>> {
    section_sums(mesh, values, active, axis, stations).into_iter().map(|s| s.map(|(n, d)| n / d)).collect()
}

/// Integral of `values` over the cut, e.g. the volume flow rate for the
/// axial velocity.
pub fn section_integral(mesh: &Mesh, values: &[f64], active: &[bool], axis: usize, stations: &[f64]) -> Vec<Option<f64>> {
    section_sums(mesh, values, active, axis, stations).into_iter().map(|s| s.map(|(n, _)| n)).collect()
}

/// Cell holding `point`: the nearest centre among cells whose bounding box
/// contains it.
pub fn locate_cell(mesh: &Mesh, point: &Vec3) -> Option<usize> {
    let pad = 1e-12 * mesh.h().max(1e-300);
    (0..mesh.n_cells())
        .filter(|&c| {
            let (a, b) = mesh.cell_bounds(c);
            (0..3).all(|k| point[k] >= a[k] - pad && point[k] <= b[k] + pad)
        })
        .min_by(|&a, &b| {
            (mesh.centre(a) - point).norm_squared().total_cmp(&(mesh.centre(b) - point).norm_squared()).then(a.cmp(&b))
        })
}

/// Non-solid cells.
pub fn active_cells(labels: &[CellLabel]) -> Vec<bool> {
    labels.iter().map(|l| *l != CellLabel::Solid).collect()
}

/// First crossing of the ray `origin + t d` with the surface, `t > 0`.
fn ray_hit(body: &ImmersedBody, origin: &Vec3, d: &Vec3) -> Option<Vec3> {
    let v = body.surface.vertices();
    let mut best: Option<f64> = None;
    for t in body.surface.triangles() {
        let (a, b, c) = (v[t[0]], v[t[1]], v[t[2]]);
        let (e1, e2) = (b - a, c - a);
        let p = d.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-14 * e1.norm() * e2.norm() {
            continue;
        }
        let s = origin - a;
        let u = s.dot(&p) / det;
        let q = s.cross(&e1);
        let w = d.dot(&q) / det;
        if u < -1e-12 || w < -1e-12 || u + w > 1.0 + 1e-12 {
            continue;
        }
        let t = e2.dot(&q) / det;
        if t > 0.0 && best.map_or(true, |b| t < b) {
            best = Some(t);
        }
    }
    best.map(|t| origin + d * t)
}

/// Points where rays from `centre`, at evenly spaced angles in the plane
/// normal to `axis`, first meet the surface. Returns `(angle, point)`.
pub fn surface_curve(body: &ImmersedBody, centre: &Vec3, axis: &Vec3, samples: usize) -> Vec<(f64, Vec3)> {
    let ez = axis.normalize();
    let helper = if ez.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let ex = (helper - ez * ez.dot(&helper)).normalize();
    let ey = ez.cross(&ex);
    (0..samples)
        .filter_map(|k| {
            let th = 2.0 * std::f64::consts::PI * (k as f64 + 0.5) / samples as f64;
            let d = ex * th.cos() + ey * th.sin();
            ray_hit(body, centre, &d).map(|p| (th, p))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceSample {
    /// Curve parameter, the ray angle in radians.
    pub angle: f64,
    pub point: Vec3,
    /// Speed of the wall itself at the point.
    pub wall_speed: f64,
    /// Extrapolated flow speed; `None` when no IB point is near.
    pub speed: Option<f64>,
    pub shear_rate: Option<f64>,
    pub viscosity: Option<f64>,
    pub temperature: Option<f64>,
}

pub const SURFACE_CSV_HEADER: &str = "angle,x,y,z,wall_speed,speed,shear_rate,viscosity,temperature";

/// Surface quantities along the sampling curve of body `index`. Velocity
/// (and temperature when the body has a wall temperature) come from the IB
/// approximators; shear rate and viscosity from the IB cell whose IB point
/// is nearest.
pub fn surface_report(solver: &Solver, index: usize, centre: &Vec3, axis: &Vec3, samples: usize) -> Vec<SurfaceSample> {
    let Some(ib) = &solver.ib else { return vec![] };
    let body = &ib.bodies[index];
    let curve = surface_curve(body, centre, axis, samples);
    let pts: Vec<Vec3> = curve.iter().map(|c| c.1).collect();
    let fs = solver.fields();
    let time = solver.time();
    let g = ib.velocity_datum(&solver.mesh, &solver.bcs, &solver.bodies, &fs.u, time);
    let comp: Vec<Vec<Option<f64>>> = (0..3)
        .map(|k| {
            let gk: Vec<f64> = g.iter().map(|v| v[k]).collect();
            let uk: Vec<f64> = fs.u.iter().map(|v| v[k]).collect();
            ib.operator.extrapolate_to_surface(&solver.mesh, &ib.ib_points, &gk, &uk, &pts)
        })
        .collect();
    let temps = ib
        .temperature_datum(&solver.mesh, &solver.bcs, &solver.bodies, &fs.t)
        .map(|gt| ib.operator.extrapolate_to_surface(&solver.mesh, &ib.ib_points, &gt, &fs.t, &pts));
    let nearest = |x: &Vec3| -> Option<usize> {
        ib.ib_points
            .iter()
            .map(|p| (p.cell, (p.point - x).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
            .filter(|(c, d)| *d <= 2.0 * solver.mesh.diameter(*c))
            .map(|(c, _)| c)
    };
    let motion = solver.bodies[index].body.motion;
    curve
        .iter()
        .enumerate()
        .map(|(i, &(angle, point))| {
            let speed = match (comp[0][i], comp[1][i], comp[2][i]) {
                (Some(a), Some(b), Some(c)) => Some(Vec3::new(a, b, c).norm()),
                _ => None,
            };
            let cell = nearest(&point);
            SurfaceSample {
                angle,
                point,
                wall_speed: motion.boundary_velocity(&point, time).norm(),
                speed,
                shear_rate: cell.map(|c| fs.shear_rate[c]),
                viscosity: cell.map(|c| fs.mu[c]),
                temperature: match &temps {
                    Some(t) => t[i],
                    None => cell.map(|c| fs.t[c]),
                },
            }
        })
        .collect()
}

/// Sum of absolute differences between consecutive samples of a profile.
pub fn total_variation(values: &[f64]) -> f64 {
    values.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub kind: &'static str,
    /// Volume-weighted L2 error over fluid cells relative to the exact norm.
    pub l2_relative: f64,
    pub max_abs: f64,
    pub cells: usize,
}

pub const BENCHMARK_CSV_HEADER: &str = "kind,l2_relative,max_abs,cells";

/// Azimuthal Couette speed between a cylinder of radius `ri` turning at
/// `omega` and a resting one of radius `ro`.
pub fn couette_speed(r: f64, ri: f64, ro: f64, omega: f64) -> f64 {
    let a = -omega * ri * ri / (ro * ro - ri * ri);
    let b = omega * ri * ri * ro * ro / (ro * ro - ri * ri);
    a * r + b / r
}

/// Power-law plane Poiseuille velocity at distance `y` from the mid-plane of
/// a channel of half width `h`, driven by force density `f`.
pub fn power_law_channel_speed(y: f64, h: f64, f: f64, consistency: f64, exponent: f64) -> f64 {
    let m = (exponent + 1.0) / exponent;
    (f / consistency).powf(1.0 / exponent) * exponent / (exponent + 1.0) * (h.powf(m) - y.abs().min(h).powf(m))
}

/// Errors of the current velocity against the benchmark's exact solution.
pub fn benchmark_report(solver: &Solver, bench: &Benchmark) -> BenchmarkReport {
    let labels = solver.labels();
    let mesh = &solver.mesh;
    let u = &solver.fields().u;
    let (mut num, mut den, mut max_abs, mut cells) = (0.0, 0.0, 0.0f64, 0);
    let mut add = |c: usize, exact: Vec3| {
        let v = mesh.volume(c);
        let err = (u[c] - exact).norm();
        num += err * err * v;
        den += exact.norm_squared() * v;
        max_abs = max_abs.max(err);
        cells += 1;
    };
    let kind = match *bench {
        Benchmark::TaylorCouette { centre, inner_radius, outer_radius, angular_velocity } => {
            for c in (0..mesh.n_cells()).filter(|&c| labels[c] == CellLabel::Fluid) {
                let d = mesh.centre(c) - centre;
                let r = d.x.hypot(d.y);
                if r <= inner_radius || r >= outer_radius {
                    continue;
                }
                let et = Vec3::new(-d.y / r, d.x / r, 0.0);
                add(c, et * couette_speed(r, inner_radius, outer_radius, angular_velocity));
            }
            "taylor_couette"
        }
        Benchmark::PowerLawChannel { centre, half_width, flow_axis, wall_axis } => {
            let ph = &solver.physics;
            let k = ph.rheology.consistency * shift_factor(&ph.shift, solver.fields().t[0]).unwrap_or(1.0);
            let f = ph.body_force[flow_axis];
            for c in (0..mesh.n_cells()).filter(|&c| labels[c] == CellLabel::Fluid) {
                let y = mesh.centre(c)[wall_axis] - centre[wall_axis];
                let mut e = Vec3::zeros();
                e[flow_axis] = f.signum() * power_law_channel_speed(y, half_width, f.abs(), k, ph.rheology.exponent);
                add(c, e);
            }
            "power_law_channel"
        }
    };
    BenchmarkReport { kind, l2_relative: (num / den.max(1e-300)).sqrt(), max_abs, cells }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExchangeCheck {
    pub assignment: Vec<usize>,
    pub map: ExchangeMap,
    /// Distinct foreign stencil members per partition, summed.
    pub brute_force_count: usize,
    /// Every stencil member value seen by the owning partition equals the
    /// serial value bit for bit.
    pub gathers_match: bool,
}

/// Partitions the mesh, plans the stencil exchange and replays it on
/// `field`.
pub fn exchange_check(mesh: &Mesh, stencils: &[Stencil], n_parts: usize, field: &[f64]) -> ExchangeCheck {
    let assignment = recursive_bisection(mesh, n_parts);
    let map = build_exchange_map(&assignment, n_parts, stencils);
    let ghosts = simulate_gather(&map, &assignment, field);
    let mut foreign: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n_parts];
    let mut gathers_match = true;
    for s in stencils {
        let p = assignment[s.owner];
        for &m in &s.members {
            let seen = if assignment[m] == p {
                Some(field[m])
            } else {
                foreign[p].insert(m);
                ghosts[p].get(&m).copied()
            };
            gathers_match &= seen.map(f64::to_bits) == Some(field[m].to_bits());
        }
    }
    let brute_force_count = foreign.iter().map(|s| s.len()).sum();
    ExchangeCheck { assignment, map, brute_force_count, gathers_match }
}
