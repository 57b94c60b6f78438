//! Weighted-least-squares IB approximators and the correction operator
//! `U_corr = S_g g + S U`. Degree 0 gives the diffuse-interface limit.

mod fit;

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;

pub use fit::{compute_weights, eval_basis, fit_wls, n_coeffs, PolyBasis, WlsFit, CONDITION_LIMIT};

use crate::error::{Error, Result};
use crate::geometry::{CellLabel, Classification, IbPoint};
use crate::linalg::{krylov_solve, CsrMatrix, SolveControls, TripletBuilder};
use crate::mesh::Mesh;
use crate::stencil::{BoundarySource, Stencil};
use crate::Vec3;

/// Where a boundary datum entry comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatumSource {
    /// IB point `k` of the IB point list.
    IbPoint(usize),
    /// Centre of a solid cell (the datum is extended into the body).
    SolidCell(usize),
    /// Centre of a boundary face on a Dirichlet patch.
    ConformingFace(usize),
}

/// Ordering of the datum vector `g`: IB points, then solid cells, then
/// conforming faces referenced by enriched stencils.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatumLayout {
    pub sources: Vec<DatumSource>,
    index: HashMap<DatumSource, usize>,
}

impl DatumLayout {
    fn push(&mut self, s: DatumSource) -> usize {
        if let Some(&i) = self.index.get(&s) {
            return i;
        }
        self.sources.push(s);
        self.index.insert(s, self.sources.len() - 1);
        self.sources.len() - 1
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn position(&self, s: DatumSource) -> Option<usize> {
        self.index.get(&s).copied()
    }

    /// Location of each datum entry.
    pub fn points(&self, mesh: &Mesh, ib_points: &[IbPoint]) -> Vec<Vec3> {
        self.sources
            .iter()
            .map(|s| match *s {
                DatumSource::IbPoint(k) => ib_points[k].point,
                DatumSource::SolidCell(c) => mesh.centre(c),
                DatumSource::ConformingFace(f) => mesh.face_centre(f),
            })
            .collect()
    }
}

/// Coefficients of one IB row.
#[derive(Debug, Clone)]
pub struct IbRow {
    pub cell: usize,
    pub ib: usize,
    pub fit: WlsFit,
    /// Datum column of each observation that is not a cell (IB point first).
    pub datum_columns: Vec<usize>,
    pub members: Vec<usize>,
    /// Coefficient of the own IB datum.
    pub s_ib: f64,
    /// Coefficients of the member cells.
    pub s_members: Vec<f64>,
    /// Coefficients of the enrichment data.
    pub s_boundary: Vec<f64>,
    n_members: usize,
}

impl IbRow {
    fn observation_values(&self, g: &[f64], u: &[f64]) -> Vec<f64> {
        let mut v = Vec::with_capacity(1 + self.n_members + self.datum_columns.len() - 1);
        v.push(g[self.datum_columns[0]]);
        v.extend(self.members.iter().map(|&m| u[m]));
        v.extend(self.datum_columns[1..].iter().map(|&c| g[c]));
        v
    }

    /// Value of the fitted polynomial at `x`.
    pub fn evaluate(&self, x: &Vec3, g: &[f64], u: &[f64]) -> f64 {
        self.fit.evaluate(x, &self.observation_values(g, u))
    }
}

#[derive(Debug, Clone)]
pub struct InterpOperator {
    pub s_g: CsrMatrix,
    pub s: CsrMatrix,
    pub layout: DatumLayout,
    pub rows: Vec<IbRow>,
    labels: Vec<CellLabel>,
}

/// Fits the approximator of every stencil. The basis is centred on the IB
/// point and scaled by the owner diameter.
pub fn fit_stencils(mesh: &Mesh, stencils: &[Stencil], basis: &PolyBasis) -> Vec<WlsFit> {
    stencils
        .par_iter()
        .map(|st| fit_stencil(mesh, st, basis, None))
        .collect()
}

fn observation_points(st: &Stencil) -> Vec<Vec3> {
    let mut pts = Vec::with_capacity(1 + st.n_observations());
    pts.push(st.ib_point);
    pts.extend(st.positions.iter().copied());
    pts.extend(st.boundary.iter().map(|b| b.position));
    pts
}

/// Fit of one stencil; `weights` overrides the kernel when given.
pub fn fit_stencil(mesh: &Mesh, st: &Stencil, basis: &PolyBasis, weights: Option<&[f64]>) -> WlsFit {
    let pts = observation_points(st);
    let w = match weights {
        Some(w) => w.to_vec(),
        None => compute_weights(&st.pd, &st.ib_point, &pts[1..]),
    };
    fit_wls(basis, &pts, &w, st.ib_point, mesh.diameter(st.owner))
}

/// Assembles `(S_g, S)`: identity rows on fluid cells, datum injection on
/// solid cells, and the fitted polynomial evaluated at the cell centre on IB
/// cells.
pub fn build_interp_operator(
    mesh: &Mesh,
    cls: &Classification,
    ib_points: &[IbPoint],
    stencils: &[Stencil],
    fits: &[WlsFit],
) -> Result<InterpOperator> {
    let n = mesh.n_cells();
    if fits.len() != stencils.len() {
        return Err(Error::Assembly(format!("{} stencils but {} fits", stencils.len(), fits.len())));
    }
    let mut by_cell: HashMap<usize, usize> = HashMap::new();
    for (k, st) in stencils.iter().enumerate() {
        by_cell.insert(st.owner, k);
    }
    let mut layout = DatumLayout::default();
    for k in 0..ib_points.len() {
        layout.push(DatumSource::IbPoint(k));
    }
    for c in 0..n {
        if cls.label(c) == CellLabel::Solid {
            layout.push(DatumSource::SolidCell(c));
        }
    }
    for st in stencils {
        for b in &st.boundary {
            if let BoundarySource::ConformingFace(f) = b.source {
                layout.push(DatumSource::ConformingFace(f));
            }
        }
    }
    let mut sg = TripletBuilder::new(n, layout.len());
    let mut s = TripletBuilder::new(n, n);
    let mut rows = Vec::with_capacity(stencils.len());
    for c in 0..n {
        match cls.label(c) {
            CellLabel::Fluid => s.push(c, c, 1.0),
            CellLabel::Solid => sg.push(c, layout.position(DatumSource::SolidCell(c)).unwrap(), 1.0),
            CellLabel::Ib => {
                let k = *by_cell
                    .get(&c)
                    .ok_or_else(|| Error::Assembly(format!("no stencil for IB cell {c}")))?;
                let st = &stencils[k];
                let fit = &fits[k];
                let coeffs = fit.evaluation_row(&mesh.centre(c));
                let m = st.members.len();
                let mut datum_columns = vec![layout.position(DatumSource::IbPoint(st.ib)).unwrap()];
                for b in &st.boundary {
                    datum_columns.push(match b.source {
                        BoundarySource::ConformingFace(f) => layout.position(DatumSource::ConformingFace(f)).unwrap(),
                        BoundarySource::SurfacePoint(q) => layout.position(DatumSource::IbPoint(q)).unwrap(),
                    });
                }
                sg.push(c, datum_columns[0], coeffs[0]);
                for (j, &mc) in st.members.iter().enumerate() {
                    s.push(c, mc, coeffs[1 + j]);
                }
                for (j, &col) in datum_columns[1..].iter().enumerate() {
                    sg.push(c, col, coeffs[1 + m + j]);
                }
                rows.push(IbRow {
                    cell: c,
                    ib: st.ib,
                    fit: fit.clone(),
                    datum_columns,
                    members: st.members.clone(),
                    s_ib: coeffs[0],
                    s_members: coeffs[1..1 + m].to_vec(),
                    s_boundary: coeffs[1 + m..].to_vec(),
                    n_members: m,
                });
            }
        }
    }
    Ok(InterpOperator { s_g: sg.build(), s: s.build(), layout, rows, labels: cls.labels.clone() })
}

impl InterpOperator {
    /// Convenience: fits every stencil with `basis` and assembles.
    pub fn build(
        mesh: &Mesh,
        cls: &Classification,
        ib_points: &[IbPoint],
        stencils: &[Stencil],
        basis: &PolyBasis,
    ) -> Result<Self> {
        let fits = fit_stencils(mesh, stencils, basis);
        build_interp_operator(mesh, cls, ib_points, stencils, &fits)
    }

    pub fn n_cells(&self) -> usize {
        self.s.nrows()
    }

    pub fn labels(&self) -> &[CellLabel] {
        &self.labels
    }

    /// One application: `S_g g + S u`.
    pub fn correct_field(&self, g: &[f64], u: &[f64]) -> Vec<f64> {
        let mut out = self.s.mul_vec(u);
        let add = self.s_g.mul_vec(g);
        for (o, a) in out.iter_mut().zip(add) {
            *o += a;
        }
        out
    }

    pub fn correct_vector(&self, g: &[Vec3], u: &[Vec3]) -> Vec<Vec3> {
        let mut out = vec![Vec3::zeros(); u.len()];
        for k in 0..3 {
            let gk: Vec<f64> = g.iter().map(|v| v[k]).collect();
            let uk: Vec<f64> = u.iter().map(|v| v[k]).collect();
            for (o, v) in out.iter_mut().zip(self.correct_field(&gk, &uk)) {
                o[k] = v;
            }
        }
        out
    }

    /// Solves `x = S_g g + S x` on IB rows with fluid values fixed to `u`,
    /// so IB cells that observe other IB cells see corrected values.
    pub fn solve_fixed_point(&self, g: &[f64], u: &[f64], tol: f64) -> Result<Vec<f64>> {
        let n = self.n_cells();
        let mut out = self.correct_field(g, u);
        let ib: Vec<usize> = self.rows.iter().map(|r| r.cell).collect();
        if ib.is_empty() {
            return Ok(out);
        }
        let mut local = vec![usize::MAX; n];
        for (i, &c) in ib.iter().enumerate() {
            local[c] = i;
        }
        let sgg = self.s_g.mul_vec(g);
        let mut a = TripletBuilder::new(ib.len(), ib.len());
        let mut rhs = vec![0.0; ib.len()];
        for (i, &c) in ib.iter().enumerate() {
            a.push(i, i, 1.0);
            rhs[i] = sgg[c];
            for (col, v) in self.s.row(c) {
                if local[col] != usize::MAX {
                    a.push(i, local[col], -v);
                } else {
                    rhs[i] += v * u[col];
                }
            }
        }
        let a = a.build();
        let mut x: Vec<f64> = ib.iter().map(|&c| out[c]).collect();
        let report = krylov_solve(&a, &rhs, &mut x, &SolveControls::bicgstab(tol))?;
        if !report.converged {
            return Err(Error::Solver {
                reason: "IB fixed-point correction did not converge".into(),
                history: report.history,
            });
        }
        for (i, &c) in ib.iter().enumerate() {
            out[c] = x[i];
        }
        Ok(out)
    }

    pub fn solve_fixed_point_vector(&self, g: &[Vec3], u: &[Vec3], tol: f64) -> Result<Vec<Vec3>> {
        let mut out = vec![Vec3::zeros(); u.len()];
        for k in 0..3 {
            let gk: Vec<f64> = g.iter().map(|v| v[k]).collect();
            let uk: Vec<f64> = u.iter().map(|v| v[k]).collect();
            for (o, v) in out.iter_mut().zip(self.solve_fixed_point(&gk, &uk, tol)?) {
                o[k] = v;
            }
        }
        Ok(out)
    }

    /// Evaluates the approximator of the IB cell whose IB point is nearest to
    /// each sample. Samples with no IB point within two owner diameters are
    /// left unassigned.
    pub fn extrapolate_to_surface(
        &self,
        mesh: &Mesh,
        ib_points: &[IbPoint],
        g: &[f64],
        u: &[f64],
        samples: &[Vec3],
    ) -> Vec<Option<f64>> {
        samples
            .par_iter()
            .map(|x| {
                let (row, d) = self
                    .rows
                    .iter()
                    .map(|r| (r, (ib_points[r.ib].point - x).norm()))
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cell.cmp(&b.0.cell)))?;
                (d <= 2.0 * mesh.diameter(row.cell)).then(|| row.evaluate(x, g, u))
            })
            .collect()
    }

    /// Structured-text dump of IB rows.
    pub fn audit(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# ibflow operator audit, {} IB rows", self.rows.len()).unwrap();
        for r in &self.rows {
            writeln!(
                s,
                "cell {} degree {} requested {} condition {:.6e} s_ib {:.17e}",
                r.cell,
                r.fit.degree(),
                r.fit.requested_degree,
                r.fit.condition,
                r.s_ib
            )
            .unwrap();
            let m: Vec<String> = r.members.iter().zip(&r.s_members).map(|(c, v)| format!("{c}:{v:.17e}")).collect();
            writeln!(s, "  members {}", m.join(" ")).unwrap();
            if !r.s_boundary.is_empty() {
                let b: Vec<String> = r.datum_columns[1..]
                    .iter()
                    .zip(&r.s_boundary)
                    .map(|(c, v)| format!("g{c}:{v:.17e}"))
                    .collect();
                writeln!(s, "  boundary {}", b.join(" ")).unwrap();
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{classify_cells, ib_points, ImmersedBody, TriSurface};
    use crate::mesh::{build_structured_grid, Adjacency, BoxSpec};
    use crate::stencil::{build_stencils, StencilCriteria};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Setup {
        mesh: Mesh,
        cls: Classification,
        pts: Vec<IbPoint>,
        stencils: Vec<Stencil>,
    }

    fn setup(n: usize) -> Setup {
        let mesh = build_structured_grid(&BoxSpec::unit([n, n, n])).unwrap();
        let bodies = [ImmersedBody::new("b", TriSurface::icosphere(Vec3::repeat(0.5), 0.27, 3).unwrap())];
        let cls = classify_cells(&mesh, &bodies, Adjacency::Face);
        let pts = ib_points(&mesh, &cls, &bodies);
        let stencils = build_stencils(&mesh, &cls, &pts, &StencilCriteria::default(), 10, &vec![false; mesh.n_faces()]).unwrap();
        Setup { mesh, cls, pts, stencils }
    }

    #[test]
    fn row_types_follow_labels() {
        let s = setup(8);
        let op = InterpOperator::build(&s.mesh, &s.cls, &s.pts, &s.stencils, &PolyBasis::new(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..s.mesh.n_cells()).map(|_| rng.gen()).collect();
        let g: Vec<f64> = (0..op.layout.len()).map(|_| rng.gen()).collect();
        let out = op.correct_field(&g, &u);
        for c in 0..s.mesh.n_cells() {
            match s.cls.label(c) {
                CellLabel::Fluid => assert_eq!(out[c], u[c]),
                CellLabel::Solid => assert_eq!(out[c], g[op.layout.position(DatumSource::SolidCell(c)).unwrap()]),
                CellLabel::Ib => {}
            }
        }
        // Constant reproduction on every IB row.
        for r in &op.rows {
            let sum = r.s_ib + r.s_members.iter().sum::<f64>() + r.s_boundary.iter().sum::<f64>();
            assert!((sum - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn matrix_matches_per_cell_evaluation() {
        let s = setup(8);
        let op = InterpOperator::build(&s.mesh, &s.cls, &s.pts, &s.stencils, &PolyBasis::new(2)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..s.mesh.n_cells()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g: Vec<f64> = (0..op.layout.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let out = op.correct_field(&g, &u);
        for r in &op.rows {
            let direct = r.evaluate(&s.mesh.centre(r.cell), &g, &u);
            assert!((direct - out[r.cell]).abs() < 1e-12);
        }
    }

    #[test]
    fn linear_field_is_exact_with_trace_datum() {
        let s = setup(10);
        for p in [1, 2] {
            let op = InterpOperator::build(&s.mesh, &s.cls, &s.pts, &s.stencils, &PolyBasis::new(p)).unwrap();
            let f = |x: &Vec3| 0.3 + x.x - 2.0 * x.y + 0.5 * x.z;
            let u: Vec<f64> = s.mesh.centres().iter().map(f).collect();
            let g: Vec<f64> = op.layout.points(&s.mesh, &s.pts).iter().map(f).collect();
            let out = op.correct_field(&g, &u);
            for c in 0..s.mesh.n_cells() {
                assert!((out[c] - u[c]).abs() < 1e-9, "p={p} cell {c}");
            }
            let samples: Vec<Vec3> = s.pts.iter().map(|q| q.point).collect();
            let ex = op.extrapolate_to_surface(&s.mesh, &s.pts, &g, &u, &samples);
            for (x, v) in samples.iter().zip(ex) {
                assert!((v.unwrap() - f(x)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn idempotent_when_members_are_fluid() {
        let s = setup(8);
        let op = InterpOperator::build(&s.mesh, &s.cls, &s.pts, &s.stencils, &PolyBasis::new(1)).unwrap();
        let all_fluid = op.rows.iter().all(|r| r.members.iter().all(|&m| s.cls.label(m) == CellLabel::Fluid));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<f64> = (0..s.mesh.n_cells()).map(|_| rng.gen()).collect();
        let g: Vec<f64> = (0..op.layout.len()).map(|_| rng.gen()).collect();
        let once = op.correct_field(&g, &u);
        let twice = op.correct_field(&g, &once);
        if all_fluid {
            assert_eq!(once, twice);
        }
        // The fixed point satisfies x = S_g g + S x.
        let fp = op.solve_fixed_point(&g, &u, 1e-13).unwrap();
        let again = op.correct_field(&g, &fp);
        for c in 0..fp.len() {
            assert!((fp[c] - again[c]).abs() < 1e-10);
        }
    }

    #[test]
    fn dominant_ib_weight_injects_datum() {
        let s = setup(8);
        let basis = PolyBasis::new(0);
        let fits: Vec<WlsFit> = s
            .stencils
            .iter()
            .map(|st| {
                let mut w = vec![1e-9; 1 + st.n_observations()];
                w[0] = 1.0;
                fit_stencil(&s.mesh, st, &basis, Some(&w))
            })
            .collect();
        let op = build_interp_operator(&s.mesh, &s.cls, &s.pts, &s.stencils, &fits).unwrap();
        for r in &op.rows {
            assert!((r.s_ib - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn missing_fit_is_assembly_error() {
        let s = setup(6);
        let r = build_interp_operator(&s.mesh, &s.cls, &s.pts, &s.stencils, &[]);
        assert!(matches!(r, Err(Error::Assembly(_))));
    }
}
