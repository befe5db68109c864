//! Assembly of the bilinear forms and linear functionals of the three weak
//! problems.
//!
//! Matrices follow the convention rows = test dofs, columns = trial dofs.
//! All volume integrands here are polynomial and the default rules integrate
//! them exactly; data functionals use the same rules, which keeps their
//! quadrature error far below discretization error for smooth data.

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::mesh::Marker;
use crate::quadrature::{edge_default, tri_default, EdgeRule, TriRule};
use crate::spaces::{shape_grads, shapes, CellGeometry, FeSpace};
use crate::CoeffVec;

/// Compressed-row sparse matrix.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Build from (row, col, value) triplets; duplicates are summed and
    /// entries that cancel exactly are dropped.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
    ) -> Self {
        for &(r, c, _) in &triplets {
            assert!(r < nrows && c < ncols, "triplet ({r},{c}) out of bounds");
        }
        triplets.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        let mut i = 0;
        while i < triplets.len() {
            let (r, c, mut v) = triplets[i];
            i += 1;
            while i < triplets.len() && triplets[i].0 == r && triplets[i].1 == c {
                v += triplets[i].2;
                i += 1;
            }
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                col_idx.push(c);
                values.push(v);
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of one row.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[r], self.row_ptr[r + 1]);
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// y = A x.
    pub fn mul_vec(&self, x: &CoeffVec) -> CoeffVec {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in mul_vec");
        let mut y = CoeffVec::zeros(self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
        y
    }

    /// y = A' x.
    pub fn tr_mul_vec(&self, x: &CoeffVec) -> CoeffVec {
        assert_eq!(x.len(), self.nrows, "dimension mismatch in tr_mul_vec");
        let mut y = CoeffVec::zeros(self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                y[*c] += v * x[r];
            }
        }
        y
    }

    /// x' A y.
    pub fn quad_form(&self, x: &CoeffVec, y: &CoeffVec) -> f64 {
        x.dot(&self.mul_vec(y))
    }

    /// Submatrix on the given row and column dof lists (order preserved).
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_pos = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_pos[c] = k;
        }
        let mut triplets = Vec::new();
        for (rk, &r) in rows.iter().enumerate() {
            let (cs, vs) = self.row(r);
            for (c, v) in cs.iter().zip(vs) {
                if col_pos[*c] != usize::MAX {
                    triplets.push((rk, col_pos[*c], *v));
                }
            }
        }
        SparseMatrix::from_triplets(rows.len(), cols.len(), triplets)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals) {
                m[(r, *c)] = *v;
            }
        }
        m
    }

    /// Entrywise sum of two matrices with equal dimensions.
    pub fn add(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for m in [self, other] {
            for r in 0..m.nrows {
                let (cols, vals) = m.row(r);
                for (c, v) in cols.iter().zip(vals) {
                    triplets.push((r, *c, *v));
                }
            }
        }
        SparseMatrix::from_triplets(self.nrows, self.ncols, triplets)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Bilinear form kinds.
///
/// Volume forms: `SymGradHalf` is (1/2) int D(u):D(v) with
/// D_ij = (u_i,j + u_j,i)/2; `CurlCurl` is int (curl u)(curl v) with the
/// scalar 2-D curl u_2,1 - u_1,2; `DivCouple` pairs scalar tests against
/// div of vector trials; `GradGrad` and `Mass` are the gradient and L2
/// Gram forms. Boundary forms integrate along the edges of one marker:
/// `BoundaryMass` the L2 pairing, `BoundaryH1` arclength stiffness plus
/// mass, `BoundaryNormalTrace` pairs scalar trials against the normal
/// component of vector tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FormKind {
    SymGradHalf,
    CurlCurl,
    DivCouple,
    GradGrad,
    Mass,
    BoundaryMass(Marker),
    BoundaryH1(Marker),
    BoundaryNormalTrace(Marker),
}

/// Linear functional kinds; each holds its data function.
pub enum FunctionalKind {
    /// int_Omega F . phi for vector tests.
    DomainLoad(VectorField),
    /// int_Omega f psi for scalar tests.
    DomainScalar(ScalarField),
    /// int_{Gamma_m} t . phi ds for vector tests.
    TractionPair(Marker, VectorField),
    /// int_{Gamma_m} g psi ds for scalar tests.
    NeumannPair(Marker, ScalarField),
    /// int_{Gamma_m} p (phi . nu) ds for vector tests.
    PressureFlux(Marker, ScalarField),
}

/// Assemble a bilinear form; rows = test dofs, columns = trial dofs.
pub fn assemble_matrix(kind: FormKind, trial: &FeSpace, test: &FeSpace) -> Result<SparseMatrix> {
    assemble_matrix_with(kind, trial, test, tri_default(), edge_default())
}

/// Assembly with explicit quadrature rules; used by refinement checks.
pub fn assemble_matrix_with(
    kind: FormKind,
    trial: &FeSpace,
    test: &FeSpace,
    tri: TriRule,
    edge: EdgeRule,
) -> Result<SparseMatrix> {
    if !trial.shares_mesh(test) {
        return Err(Error::Config(
            "trial and test spaces live on different meshes".into(),
        ));
    }
    let (tc, sc) = (trial.kind().components(), test.kind().components());
    let arity_ok = match kind {
        FormKind::SymGradHalf | FormKind::CurlCurl => tc == 2 && sc == 2,
        FormKind::DivCouple => tc == 2 && sc == 1,
        FormKind::GradGrad | FormKind::Mass => tc == sc,
        FormKind::BoundaryMass(_) | FormKind::BoundaryH1(_) => tc == sc,
        FormKind::BoundaryNormalTrace(_) => tc == 1 && sc == 2,
    };
    if !arity_ok {
        return Err(Error::Config(format!(
            "form {kind:?} does not accept {tc}-component trial against {sc}-component test"
        )));
    }
    match kind {
        FormKind::BoundaryMass(m) => return boundary_gram(trial, test, m, edge, false),
        FormKind::BoundaryH1(m) => return boundary_gram(trial, test, m, edge, true),
        FormKind::BoundaryNormalTrace(m) => return boundary_normal_trace(trial, test, m, edge),
        _ => {}
    }

    let mesh = trial.mesh();
    let (td, sd) = (trial.kind().degree(), test.kind().degree());
    let mut triplets = Vec::new();
    for c in 0..mesh.n_cells() {
        let geo = CellGeometry::of(mesh, c);
        let tn = trial.cell_nodes(c);
        let sn = test.cell_nodes(c);
        let mut local = vec![0.0; sn.len() * sc * tn.len() * tc];
        let ncols = tn.len() * tc;
        for (q, &(xi, eta)) in tri.points.iter().enumerate() {
            let w = tri.weights[q] * geo.area;
            let (tg_ref, tn_count) = shape_grads(td, xi, eta);
            let (sg_ref, sn_count) = shape_grads(sd, xi, eta);
            let (tv, _) = shapes(td, xi, eta);
            let (sv, _) = shapes(sd, xi, eta);
            let tg: Vec<[f64; 2]> = tg_ref[..tn_count].iter().map(|&g| geo.grad(g)).collect();
            let sg: Vec<[f64; 2]> = sg_ref[..sn_count].iter().map(|&g| geo.grad(g)).collect();
            match kind {
                FormKind::Mass => {
                    for i in 0..sn_count {
                        for j in 0..tn_count {
                            let v = w * sv[i] * tv[j];
                            for comp in 0..sc {
                                local[(i * sc + comp) * ncols + j * tc + comp] += v;
                            }
                        }
                    }
                }
                FormKind::GradGrad => {
                    for i in 0..sn_count {
                        for j in 0..tn_count {
                            let v = w * (sg[i][0] * tg[j][0] + sg[i][1] * tg[j][1]);
                            for comp in 0..sc {
                                local[(i * sc + comp) * ncols + j * tc + comp] += v;
                            }
                        }
                    }
                }
                FormKind::SymGradHalf => {
                    // (1/2) int D(phi_jb):D(phi_ia)
                    //   = (1/4) int (delta_ab grad_i . grad_j + d_b N_i d_a N_j)
                    for i in 0..sn_count {
                        for j in 0..tn_count {
                            let dot = sg[i][0] * tg[j][0] + sg[i][1] * tg[j][1];
                            for a in 0..2 {
                                for b in 0..2 {
                                    let mut v = sg[i][b] * tg[j][a];
                                    if a == b {
                                        v += dot;
                                    }
                                    local[(i * 2 + a) * ncols + j * 2 + b] += 0.25 * w * v;
                                }
                            }
                        }
                    }
                }
                FormKind::CurlCurl => {
                    // curl(N e_x) = -d_y N, curl(N e_y) = d_x N
                    for i in 0..sn_count {
                        let ci = [-sg[i][1], sg[i][0]];
                        for j in 0..tn_count {
                            let cj = [-tg[j][1], tg[j][0]];
                            for a in 0..2 {
                                for b in 0..2 {
                                    local[(i * 2 + a) * ncols + j * 2 + b] += w * ci[a] * cj[b];
                                }
                            }
                        }
                    }
                }
                FormKind::DivCouple => {
                    // rows scalar tests, columns vector trials: int q div(phi)
                    for i in 0..sn_count {
                        for j in 0..tn_count {
                            for b in 0..2 {
                                local[i * ncols + j * 2 + b] += w * sv[i] * tg[j][b];
                            }
                        }
                    }
                }
                _ => unreachable!(),
            }
        }
        for (i, &snode) in sn.iter().enumerate() {
            for a in 0..sc {
                let row = test.dof(snode, a);
                for (j, &tnode) in tn.iter().enumerate() {
                    for b in 0..tc {
                        let v = local[(i * sc + a) * ncols + j * tc + b];
                        triplets.push((row, trial.dof(tnode, b), v));
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(
        test.n_dofs(),
        trial.n_dofs(),
        triplets,
    ))
}

/// Assemble a linear functional on the test space.
pub fn assemble_functional(kind: &FunctionalKind, test: &FeSpace) -> Result<CoeffVec> {
    assemble_functional_with(kind, test, tri_default(), edge_default())
}

/// Functional assembly with explicit quadrature rules.
pub fn assemble_functional_with(
    kind: &FunctionalKind,
    test: &FeSpace,
    tri: TriRule,
    edge: EdgeRule,
) -> Result<CoeffVec> {
    let sc = test.kind().components();
    let need = match kind {
        FunctionalKind::DomainLoad(_)
        | FunctionalKind::TractionPair(..)
        | FunctionalKind::PressureFlux(..) => 2,
        FunctionalKind::DomainScalar(_) | FunctionalKind::NeumannPair(..) => 1,
    };
    if sc != need {
        return Err(Error::Config(format!(
            "functional needs a {need}-component test space, got {sc}"
        )));
    }
    let mut out = CoeffVec::zeros(test.n_dofs());
    match kind {
        FunctionalKind::DomainLoad(f) => {
            domain_quadrature(
                test,
                tri,
                |x, y| {
                    let (fx, fy) = f(x, y);
                    [fx, fy]
                },
                &mut out,
            );
        }
        FunctionalKind::DomainScalar(f) => {
            domain_quadrature(test, tri, |x, y| [f(x, y), 0.0], &mut out);
        }
        FunctionalKind::TractionPair(m, t) => {
            boundary_quadrature(
                test,
                *m,
                edge,
                |x, y, _| {
                    let (tx, ty) = t(x, y);
                    [tx, ty]
                },
                &mut out,
            )?;
        }
        FunctionalKind::NeumannPair(m, g) => {
            boundary_quadrature(test, *m, edge, |x, y, _| [g(x, y), 0.0], &mut out)?;
        }
        FunctionalKind::PressureFlux(m, p) => {
            boundary_quadrature(
                test,
                *m,
                edge,
                |x, y, nu| {
                    let pv = p(x, y);
                    [pv * nu[0], pv * nu[1]]
                },
                &mut out,
            )?;
        }
    }
    Ok(out)
}

fn domain_quadrature(
    test: &FeSpace,
    tri: TriRule,
    density: impl Fn(f64, f64) -> [f64; 2],
    out: &mut CoeffVec,
) {
    let mesh = test.mesh();
    let sd = test.kind().degree();
    let sc = test.kind().components();
    for c in 0..mesh.n_cells() {
        let geo = CellGeometry::of(mesh, c);
        let nodes = test.cell_nodes(c);
        for (q, &(xi, eta)) in tri.points.iter().enumerate() {
            let w = tri.weights[q] * geo.area;
            let [x, y] = geo.map(xi, eta);
            let d = density(x, y);
            let (sv, count) = shapes(sd, xi, eta);
            for i in 0..count {
                for a in 0..sc {
                    out[test.dof(nodes[i], a)] += w * sv[i] * d[a];
                }
            }
        }
    }
}

/// Values of the 1-D trace basis along one boundary edge at parameter s,
/// ordered [a, b, mid]. These are the restrictions of the 2-D basis.
pub fn edge_shapes(degree: usize, s: f64) -> ([f64; 3], usize) {
    match degree {
        1 => ([1.0 - s, s, 0.0], 2),
        2 => (
            [
                (1.0 - s) * (1.0 - 2.0 * s),
                s * (2.0 * s - 1.0),
                4.0 * s * (1.0 - s),
            ],
            3,
        ),
        _ => unreachable!("only P1 and P2 are supported"),
    }
}

/// Parameter derivatives of the 1-D trace basis.
pub fn edge_shape_derivs(degree: usize, s: f64) -> ([f64; 3], usize) {
    match degree {
        1 => ([-1.0, 1.0, 0.0], 2),
        2 => ([4.0 * s - 3.0, 4.0 * s - 1.0, 4.0 - 8.0 * s], 3),
        _ => unreachable!("only P1 and P2 are supported"),
    }
}

fn boundary_quadrature(
    test: &FeSpace,
    marker: Marker,
    edge: EdgeRule,
    density: impl Fn(f64, f64, [f64; 2]) -> [f64; 2],
    out: &mut CoeffVec,
) -> Result<()> {
    let edges = test.boundary_edges(marker);
    if edges.is_empty() {
        return Err(Error::Config(format!(
            "no boundary edges carry marker Gamma{}",
            marker.index()
        )));
    }
    let sd = test.kind().degree();
    let sc = test.kind().components();
    for be in edges {
        let nu = test.mesh().boundary_normal(be.boundary_idx);
        let pa = test.node_coords(be.a);
        let pb = test.node_coords(be.b);
        let mut nodes = [be.a, be.b, usize::MAX];
        if let Some(m) = be.mid {
            nodes[2] = m;
        }
        for (q, &s) in edge.points.iter().enumerate() {
            let w = edge.weights[q] * be.length;
            let x = pa[0] + s * (pb[0] - pa[0]);
            let y = pa[1] + s * (pb[1] - pa[1]);
            let d = density(x, y, nu);
            let (sv, count) = edge_shapes(sd, s);
            for i in 0..count {
                for a in 0..sc {
                    out[test.dof(nodes[i], a)] += w * sv[i] * d[a];
                }
            }
        }
    }
    Ok(())
}

fn boundary_gram(
    trial: &FeSpace,
    test: &FeSpace,
    marker: Marker,
    edge: EdgeRule,
    with_stiffness: bool,
) -> Result<SparseMatrix> {
    let (td, sd) = (trial.kind().degree(), test.kind().degree());
    let (tc, sc) = (trial.kind().components(), test.kind().components());
    let mut triplets = Vec::new();
    for (be_t, be_s) in test
        .boundary_edges(marker)
        .iter()
        .zip(trial.boundary_edges(marker))
    {
        debug_assert_eq!(be_t.boundary_idx, be_s.boundary_idx);
        let len = be_t.length;
        let t_nodes = [be_s.a, be_s.b, be_s.mid.unwrap_or(usize::MAX)];
        let s_nodes = [be_t.a, be_t.b, be_t.mid.unwrap_or(usize::MAX)];
        for (q, &s) in edge.points.iter().enumerate() {
            let w = edge.weights[q] * len;
            let (sv, s_count) = edge_shapes(sd, s);
            let (tv, t_count) = edge_shapes(td, s);
            let (sdv, _) = edge_shape_derivs(sd, s);
            let (tdv, _) = edge_shape_derivs(td, s);
            for i in 0..s_count {
                for j in 0..t_count {
                    let mut v = sv[i] * tv[j];
                    if with_stiffness {
                        // arclength derivative = parameter derivative / len
                        v += sdv[i] * tdv[j] / (len * len);
                    }
                    for comp in 0..sc.min(tc) {
                        triplets.push((
                            test.dof(s_nodes[i], comp),
                            trial.dof(t_nodes[j], comp),
                            w * v,
                        ));
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(
        test.n_dofs(),
        trial.n_dofs(),
        triplets,
    ))
}

fn boundary_normal_trace(
    trial: &FeSpace,
    test: &FeSpace,
    marker: Marker,
    edge: EdgeRule,
) -> Result<SparseMatrix> {
    let (td, sd) = (trial.kind().degree(), test.kind().degree());
    let mut triplets = Vec::new();
    for (be_t, be_s) in test
        .boundary_edges(marker)
        .iter()
        .zip(trial.boundary_edges(marker))
    {
        let nu = test.mesh().boundary_normal(be_t.boundary_idx);
        let len = be_t.length;
        let t_nodes = [be_s.a, be_s.b, be_s.mid.unwrap_or(usize::MAX)];
        let s_nodes = [be_t.a, be_t.b, be_t.mid.unwrap_or(usize::MAX)];
        for (q, &s) in edge.points.iter().enumerate() {
            let w = edge.weights[q] * len;
            let (sv, s_count) = edge_shapes(sd, s);
            let (tv, t_count) = edge_shapes(td, s);
            for i in 0..s_count {
                for j in 0..t_count {
                    for (a, &nu_a) in nu.iter().enumerate() {
                        triplets.push((
                            test.dof(s_nodes[i], a),
                            trial.dof(t_nodes[j], 0),
                            w * sv[i] * tv[j] * nu_a,
                        ));
                    }
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(
        test.n_dofs(),
        trial.n_dofs(),
        triplets,
    ))
}
