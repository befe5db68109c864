//! Volume norms, discrete fractional boundary norms, and residual
//! extraction of boundary functionals from discrete solutions.
//!
//! The fractional norms are realized spectrally. On each boundary piece the
//! curve mass matrix M and curve H1 matrix A = stiffness + mass define
//! generalized eigenpairs (lambda_k, v_k); the H^{1/2} and H^{-1/2} norms
//! are weighted l2 sums of expansion coefficients with weights
//! lambda^{1/2} and lambda^{-1/2}. This is exact on the discrete trace
//! space and needs no singular quadrature; a Gagliardo double-sum
//! surrogate is kept as a cross-check.
//!
//! Functionals extracted from discrete solutions (normal pressure flux,
//! traction) are paired against test functions that vanish on the other
//! boundary part, so they live on the interior trace set; traces of
//! functions (pressure mismatch on Gamma2) use the closed set.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};

use crate::assembly::{
    assemble_functional, assemble_matrix, edge_shape_derivs, edge_shapes, FormKind, FunctionalKind,
};
use crate::error::{Error, Result};
use crate::field::{ScalarField, TensorField, VectorField};
use crate::mesh::Marker;
use crate::quadrature::{edge_default, tri_refined};
use crate::spaces::{shape_grads, shapes, CellGeometry, FeSpace};
use crate::CoeffVec;

/// Dense boundary eigensolves are refused beyond this many trace dofs.
pub const MAX_TRACE_DOFS: usize = 2000;

/// The L2 norm of a discrete field over the whole domain.
pub fn l2_norm(space: &FeSpace, v: &CoeffVec) -> f64 {
    assert_eq!(v.len(), space.n_dofs(), "coefficient count");
    let m =
        assemble_matrix(FormKind::Mass, space, space).expect("mass form assembles on any space");
    m.quad_form(v, v).max(0.0).sqrt()
}

/// The full H1 norm (L2 part included) of a discrete field.
pub fn h1_norm(space: &FeSpace, v: &CoeffVec) -> f64 {
    assert_eq!(v.len(), space.n_dofs(), "coefficient count");
    let m =
        assemble_matrix(FormKind::Mass, space, space).expect("mass form assembles on any space");
    let k = assemble_matrix(FormKind::GradGrad, space, space)
        .expect("grad form assembles on any space");
    (m.quad_form(v, v) + k.quad_form(v, v)).max(0.0).sqrt()
}

fn fe_values_at(
    space: &FeSpace,
    v: &CoeffVec,
    nodes: &[usize],
    geo: &CellGeometry,
    xi: f64,
    eta: f64,
) -> ([f64; 2], [[f64; 2]; 2]) {
    let comps = space.kind().components();
    let degree = space.kind().degree();
    let (sh, cnt) = shapes(degree, xi, eta);
    let (gr, _) = shape_grads(degree, xi, eta);
    let mut val = [0.0; 2];
    let mut grad = [[0.0; 2]; 2];
    for i in 0..cnt {
        let g = geo.grad(gr[i]);
        for c in 0..comps {
            let coef = v[space.dof(nodes[i], c)];
            val[c] += sh[i] * coef;
            grad[c][0] += g[0] * coef;
            grad[c][1] += g[1] * coef;
        }
    }
    (val, grad)
}

/// Returns (squared L2 error, squared H1 seminorm error) against a closure
/// providing values and gradients, integrated with the refined rule.
fn error_accumulate(
    space: &FeSpace,
    v: &CoeffVec,
    exact: &dyn Fn(f64, f64) -> ([f64; 2], [[f64; 2]; 2]),
) -> (f64, f64) {
    assert_eq!(v.len(), space.n_dofs(), "coefficient count");
    let mesh = space.mesh().clone();
    let rule = tri_refined();
    let comps = space.kind().components();
    let (mut l2, mut semi) = (0.0, 0.0);
    for c in 0..mesh.n_cells() {
        let geo = CellGeometry::of(&mesh, c);
        let nodes = space.cell_nodes(c);
        for (k, &(xi, eta)) in rule.points.iter().enumerate() {
            let w = rule.weights[k] * geo.area;
            let [x, y] = geo.map(xi, eta);
            let (val, grad) = fe_values_at(space, v, &nodes, &geo, xi, eta);
            let (eval, egrad) = exact(x, y);
            for cc in 0..comps {
                let d = val[cc] - eval[cc];
                l2 += w * d * d;
                let dx = grad[cc][0] - egrad[cc][0];
                let dy = grad[cc][1] - egrad[cc][1];
                semi += w * (dx * dx + dy * dy);
            }
        }
    }
    (l2, semi)
}

/// L2 distance between a discrete scalar field and a closed-form one.
pub fn error_l2_scalar(space: &FeSpace, v: &CoeffVec, exact: &ScalarField) -> f64 {
    assert_eq!(space.kind().components(), 1, "scalar space expected");
    let f = |x: f64, y: f64| ([exact(x, y), 0.0], [[0.0; 2]; 2]);
    error_accumulate(space, v, &f).0.sqrt()
}

/// Full H1 distance between a discrete scalar field and a closed-form one.
pub fn error_h1_scalar(
    space: &FeSpace,
    v: &CoeffVec,
    exact: &ScalarField,
    exact_grad: &VectorField,
) -> f64 {
    assert_eq!(space.kind().components(), 1, "scalar space expected");
    let f = |x: f64, y: f64| {
        let (gx, gy) = exact_grad(x, y);
        ([exact(x, y), 0.0], [[gx, gy], [0.0, 0.0]])
    };
    let (l2, semi) = error_accumulate(space, v, &f);
    (l2 + semi).sqrt()
}

/// L2 distance between a discrete vector field and a closed-form one.
pub fn error_l2_vector(space: &FeSpace, v: &CoeffVec, exact: &VectorField) -> f64 {
    assert_eq!(space.kind().components(), 2, "vector space expected");
    let f = |x: f64, y: f64| {
        let (u1, u2) = exact(x, y);
        ([u1, u2], [[0.0; 2]; 2])
    };
    error_accumulate(space, v, &f).0.sqrt()
}

/// Full H1 distance between a discrete vector field and a closed-form one.
pub fn error_h1_vector(
    space: &FeSpace,
    v: &CoeffVec,
    exact: &VectorField,
    exact_grad: &TensorField,
) -> f64 {
    assert_eq!(space.kind().components(), 2, "vector space expected");
    let f = |x: f64, y: f64| {
        let (u1, u2) = exact(x, y);
        ([u1, u2], exact_grad(x, y))
    };
    let (l2, semi) = error_accumulate(space, v, &f);
    (l2 + semi).sqrt()
}

/// Which dofs of a boundary piece a trace object ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceSet {
    /// Every dof on the closed piece, corners included. Traces of functions
    /// live here.
    Closed,
    /// Dofs on the piece but not on the closure of the other piece. Test
    /// functions that vanish on the other part have their trace dofs here,
    /// so extracted functionals use this set.
    Interior,
}

/// Scalar boundary nodes of a marker piece under a trace set, in arclength
/// order.
fn trace_nodes(space: &FeSpace, marker: Marker, set: TraceSet) -> Vec<usize> {
    match set {
        TraceSet::Closed => space
            .boundary_nodes(marker)
            .iter()
            .map(|bn| bn.node)
            .collect(),
        TraceSet::Interior => space
            .interior_boundary_nodes(marker)
            .iter()
            .map(|bn| bn.node)
            .collect(),
    }
}

/// Generalized eigenpairs of the curve (H1, L2) Gram matrices on one
/// boundary piece; the backbone of both fractional norms.
pub struct TraceSpectrum {
    marker: Marker,
    set: TraceSet,
    components: usize,
    nodes: Vec<usize>,
    coords: Vec<[f64; 2]>,
    mass: DMatrix<f64>,
    h1: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    /// Columns are M-orthonormal eigenvectors, eigenvalues ascending.
    eigenvectors: DMatrix<f64>,
}

/// Spectrum on the closed piece (the default for traces of functions).
pub fn trace_spectrum(space: &FeSpace, marker: Marker) -> Result<TraceSpectrum> {
    trace_spectrum_on(space, marker, TraceSet::Closed)
}

/// Spectrum on a chosen trace set of a boundary piece.
pub fn trace_spectrum_on(space: &FeSpace, marker: Marker, set: TraceSet) -> Result<TraceSpectrum> {
    let comps = space.kind().components();
    let nodes = trace_nodes(space, marker, set);
    if nodes.is_empty() {
        return Err(Error::Config(format!(
            "no boundary dofs on Gamma{} with the {:?} trace set",
            marker.index(),
            set
        )));
    }
    if nodes.len() * comps > MAX_TRACE_DOFS {
        return Err(Error::CapExceeded {
            what: "boundary trace dofs",
            got: nodes.len() * comps,
            cap: MAX_TRACE_DOFS,
        });
    }

    let n = nodes.len();
    let mut pos = vec![usize::MAX; space.n_nodes()];
    for (i, &nd) in nodes.iter().enumerate() {
        pos[nd] = i;
    }

    // Edgewise curve mass and stiffness; dropped nodes simply do not
    // scatter, which restricts the closed matrices to the retained span.
    let degree = space.kind().degree();
    let rule = edge_default();
    let mut mass = DMatrix::zeros(n, n);
    let mut stiff = DMatrix::zeros(n, n);
    for be in space.boundary_edges(marker) {
        let mut local = vec![be.a, be.b];
        local.extend(be.mid);
        for (q, &s) in rule.points.iter().enumerate() {
            let w = rule.weights[q];
            let (sh, cnt) = edge_shapes(degree, s);
            let (ds, _) = edge_shape_derivs(degree, s);
            for i in 0..cnt {
                let pi = pos[local[i]];
                if pi == usize::MAX {
                    continue;
                }
                for j in 0..cnt {
                    let pj = pos[local[j]];
                    if pj == usize::MAX {
                        continue;
                    }
                    mass[(pi, pj)] += be.length * w * sh[i] * sh[j];
                    stiff[(pi, pj)] += w * ds[i] * ds[j] / be.length;
                }
            }
        }
    }
    let h1 = &stiff + &mass;

    let chol = Cholesky::new(mass.clone())
        .ok_or_else(|| Error::Numerical("boundary mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let x = l
        .solve_lower_triangular(&h1)
        .ok_or_else(|| Error::Numerical("boundary mass factor is singular".into()))?;
    let b = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Numerical("boundary mass factor is singular".into()))?
        .transpose();
    let b = (&b + &b.transpose()) * 0.5;
    let eig = SymmetricEigen::new(b);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| eig.eigenvalues[p].total_cmp(&eig.eigenvalues[q]));
    let mut eigenvalues = DVector::zeros(n);
    let mut w_mat = DMatrix::zeros(n, n);
    for (k, &p) in order.iter().enumerate() {
        eigenvalues[k] = eig.eigenvalues[p];
        w_mat.set_column(k, &eig.eigenvectors.column(p));
    }
    if eigenvalues[0] < 1.0 - 1e-10 {
        return Err(Error::Numerical(format!(
            "boundary spectrum has eigenvalue {} below 1",
            eigenvalues[0]
        )));
    }
    let eigenvectors = l
        .transpose()
        .solve_upper_triangular(&w_mat)
        .ok_or_else(|| Error::Numerical("boundary mass factor is singular".into()))?;

    let coords = nodes.iter().map(|&nd| space.node_coords(nd)).collect();
    Ok(TraceSpectrum {
        marker,
        set,
        components: comps,
        nodes,
        coords,
        mass,
        h1,
        eigenvalues,
        eigenvectors,
    })
}

impl TraceSpectrum {
    pub fn marker(&self) -> Marker {
        self.marker
    }

    pub fn set(&self) -> TraceSet {
        self.set
    }

    pub fn components(&self) -> usize {
        self.components
    }

    /// Scalar boundary nodes in arclength order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn n_dofs(&self) -> usize {
        self.nodes.len() * self.components
    }

    pub fn mass_matrix(&self) -> &DMatrix<f64> {
        &self.mass
    }

    pub fn h1_matrix(&self) -> &DMatrix<f64> {
        &self.h1
    }

    /// Eigenvalues in ascending order; all at least 1.
    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.eigenvalues
    }

    /// M-orthonormal eigenvector columns matching [`Self::eigenvalues`].
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Trace of a discrete field: its coefficients at the trace dofs.
    pub fn trace_of(&self, space: &FeSpace, v: &CoeffVec) -> Result<CoeffVec> {
        if space.kind().components() != self.components || v.len() != space.n_dofs() {
            return Err(Error::Config("field does not match the trace space".into()));
        }
        let mut g = CoeffVec::zeros(self.n_dofs());
        for (i, &nd) in self.nodes.iter().enumerate() {
            for c in 0..self.components {
                g[i * self.components + c] = v[space.dof(nd, c)];
            }
        }
        Ok(g)
    }

    /// Nodal values of a scalar closure on the trace nodes.
    pub fn interpolate_scalar(&self, f: &ScalarField) -> Result<CoeffVec> {
        if self.components != 1 {
            return Err(Error::Config(
                "scalar interpolation on a vector trace".into(),
            ));
        }
        Ok(CoeffVec::from_fn(self.nodes.len(), |i, _| {
            let [x, y] = self.coords[i];
            f(x, y)
        }))
    }

    /// Per-component expansion coefficients c_k = v_k' M g.
    fn expand(&self, g: &CoeffVec, comp: usize) -> DVector<f64> {
        let n = self.nodes.len();
        let gc = DVector::from_fn(n, |i, _| g[i * self.components + comp]);
        self.eigenvectors.transpose() * (&self.mass * gc)
    }
}

/// Discrete H^{1/2}(Gamma_i) norm of a trace vector over a spectrum's dofs.
pub fn h_half_norm(spec: &TraceSpectrum, g: &CoeffVec) -> Result<f64> {
    if g.len() != spec.n_dofs() {
        return Err(Error::Config(format!(
            "trace has {} coefficients, spectrum has {} dofs",
            g.len(),
            spec.n_dofs()
        )));
    }
    let mut total = 0.0;
    for c in 0..spec.components {
        let coeffs = spec.expand(g, c);
        for k in 0..spec.nodes.len() {
            total += spec.eigenvalues[k].sqrt() * coeffs[k] * coeffs[k];
        }
    }
    Ok(total.sqrt())
}

/// A functional over the trace dofs of one boundary piece: entry (i, c) is
/// its pairing with the basis function of node i, component c.
#[derive(Debug, Clone)]
pub struct BoundaryFunctional {
    pub marker: Marker,
    pub set: TraceSet,
    pub components: usize,
    /// Scalar boundary nodes in arclength order.
    pub nodes: Vec<usize>,
    pub coeffs: CoeffVec,
}

impl BoundaryFunctional {
    pub fn n_dofs(&self) -> usize {
        self.nodes.len() * self.components
    }

    /// Difference of two functionals over the same trace dofs.
    pub fn sub(&self, other: &BoundaryFunctional) -> Result<BoundaryFunctional> {
        if self.marker != other.marker
            || self.set != other.set
            || self.components != other.components
            || self.nodes != other.nodes
        {
            return Err(Error::Config(
                "functionals live on different trace sets".into(),
            ));
        }
        Ok(BoundaryFunctional {
            marker: self.marker,
            set: self.set,
            components: self.components,
            nodes: self.nodes.clone(),
            coeffs: &self.coeffs - &other.coeffs,
        })
    }
}

/// Discrete H^{-1/2}(Gamma_i) norm of a functional.
pub fn h_minus_half_norm(spec: &TraceSpectrum, f: &BoundaryFunctional) -> Result<f64> {
    if f.marker != spec.marker
        || f.set != spec.set
        || f.components != spec.components
        || f.nodes != spec.nodes
    {
        return Err(Error::Config(
            "functional does not match the spectrum's trace set".into(),
        ));
    }
    let mut total = 0.0;
    for c in 0..spec.components {
        let n = spec.nodes.len();
        let fc = DVector::from_fn(n, |i, _| f.coeffs[i * spec.components + c]);
        let d = spec.eigenvectors.transpose() * fc;
        for k in 0..n {
            total += d[k] * d[k] / spec.eigenvalues[k].sqrt();
        }
    }
    Ok(total.sqrt())
}

/// The duality pairing of a functional with a trace vector.
pub fn duality_pairing(f: &BoundaryFunctional, g: &CoeffVec) -> Result<f64> {
    if f.coeffs.len() != g.len() {
        return Err(Error::Config("pairing dimensions differ".into()));
    }
    Ok(f.coeffs.dot(g))
}

/// Restrict a full-space dual vector (pairings with every basis function)
/// to the trace dofs of one boundary piece.
pub fn restrict_to_trace(
    space: &FeSpace,
    marker: Marker,
    set: TraceSet,
    full: &CoeffVec,
) -> Result<BoundaryFunctional> {
    if full.len() != space.n_dofs() {
        return Err(Error::Config("dual vector does not match the space".into()));
    }
    let comps = space.kind().components();
    let nodes = trace_nodes(space, marker, set);
    let mut coeffs = CoeffVec::zeros(nodes.len() * comps);
    for (i, &nd) in nodes.iter().enumerate() {
        for c in 0..comps {
            coeffs[i * comps + c] = full[space.dof(nd, c)];
        }
    }
    Ok(BoundaryFunctional {
        marker,
        set,
        components: comps,
        nodes,
        coeffs,
    })
}

/// Zero-extend a boundary functional to a dual vector over the full space.
/// Inverse of [`restrict_to_trace`] on the trace dofs.
pub fn embed_functional(space: &FeSpace, f: &BoundaryFunctional) -> Result<CoeffVec> {
    if f.components != space.kind().components() {
        return Err(Error::Config(
            "functional components do not match the space".into(),
        ));
    }
    let mut full = CoeffVec::zeros(space.n_dofs());
    for (i, &nd) in f.nodes.iter().enumerate() {
        if nd >= space.n_nodes() {
            return Err(Error::Config("functional node outside the space".into()));
        }
        for c in 0..f.components {
            full[space.dof(nd, c)] = f.coeffs[i * f.components + c];
        }
    }
    Ok(full)
}

/// The discrete normal pressure flux on Gamma1: pairing each interior
/// boundary test function psi with grad p_h . grad psi + (div F) psi.
/// For a pressure solving the Poisson stage this reproduces the Neumann
/// data exactly, by the discrete residual identity.
pub fn pressure_flux_functional(
    space: &FeSpace,
    p_h: &CoeffVec,
    div_f: &ScalarField,
) -> Result<BoundaryFunctional> {
    if space.kind().components() != 1 {
        return Err(Error::Config("pressure flux needs a scalar space".into()));
    }
    if p_h.len() != space.n_dofs() {
        return Err(Error::Config(
            "pressure coefficients do not match the space".into(),
        ));
    }
    let k = assemble_matrix(FormKind::GradGrad, space, space)?;
    let load = assemble_functional(&FunctionalKind::DomainScalar(div_f.clone()), space)?;
    let full = k.mul_vec(p_h) + load;
    restrict_to_trace(space, Marker::Gamma1, TraceSet::Interior, &full)
}

/// The discrete traction on Gamma2: pairing each interior boundary test
/// function phi with the momentum residual of (u_h, p_h) under load F.
pub fn traction_functional(
    velocity: &FeSpace,
    pressure: &FeSpace,
    u_h: &CoeffVec,
    p_h: &CoeffVec,
    f: &VectorField,
) -> Result<BoundaryFunctional> {
    if velocity.kind().components() != 2 || pressure.kind().components() != 1 {
        return Err(Error::Config(
            "traction needs a vector velocity and scalar pressure".into(),
        ));
    }
    if u_h.len() != velocity.n_dofs() || p_h.len() != pressure.n_dofs() {
        return Err(Error::Config(
            "solution coefficients do not match their spaces".into(),
        ));
    }
    let a = assemble_matrix(FormKind::SymGradHalf, velocity, velocity)?;
    let c = assemble_matrix(FormKind::DivCouple, velocity, pressure)?;
    let load = assemble_functional(&FunctionalKind::DomainLoad(f.clone()), velocity)?;
    let full = a.mul_vec(u_h) - c.tr_mul_vec(p_h) - load;
    restrict_to_trace(velocity, Marker::Gamma2, TraceSet::Interior, &full)
}

/// Gagliardo double-sum surrogate of the H^{1/2} norm of a scalar trace
/// over the closed set of a marker piece: the curve L2 norm plus the
/// double integral of |g(x)-g(y)|^2 / |x-y|^2 over distinct edge pairs.
/// Cross-check only; the spectral norm is the library's H^{1/2}.
pub fn gagliardo_half_norm(space: &FeSpace, marker: Marker, g: &CoeffVec) -> Result<f64> {
    if space.kind().components() != 1 {
        return Err(Error::Config(
            "the surrogate is implemented for scalar traces".into(),
        ));
    }
    let nodes = trace_nodes(space, marker, TraceSet::Closed);
    if g.len() != nodes.len() {
        return Err(Error::Config(format!(
            "trace has {} coefficients, Gamma{} has {} nodes",
            g.len(),
            marker.index(),
            nodes.len()
        )));
    }
    let mut pos = vec![usize::MAX; space.n_nodes()];
    for (i, &nd) in nodes.iter().enumerate() {
        pos[nd] = i;
    }

    let degree = space.kind().degree();
    let rule = edge_default();
    // Per-edge quadrature samples: position, weight (with edge length), value.
    let mut samples: Vec<Vec<([f64; 2], f64, f64)>> = Vec::new();
    let mut l2 = 0.0;
    for be in space.boundary_edges(marker) {
        let mut local = vec![be.a, be.b];
        local.extend(be.mid);
        let pa = space.node_coords(be.a);
        let pb = space.node_coords(be.b);
        let mut edge = Vec::with_capacity(rule.points.len());
        for (q, &s) in rule.points.iter().enumerate() {
            let (sh, cnt) = edge_shapes(degree, s);
            let mut val = 0.0;
            for i in 0..cnt {
                val += sh[i] * g[pos[local[i]]];
            }
            let x = pa[0] + s * (pb[0] - pa[0]);
            let y = pa[1] + s * (pb[1] - pa[1]);
            let w = rule.weights[q] * be.length;
            l2 += w * val * val;
            edge.push(([x, y], w, val));
        }
        samples.push(edge);
    }

    let mut double = 0.0;
    for (i, ei) in samples.iter().enumerate() {
        for (j, ej) in samples.iter().enumerate() {
            if i == j {
                continue;
            }
            for &(p, wp, gp) in ei {
                for &(q, wq, gq) in ej {
                    let dx = p[0] - q[0];
                    let dy = p[1] - q[1];
                    let d2 = dx * dx + dy * dy;
                    let diff = gp - gq;
                    double += wp * wq * diff * diff / d2;
                }
            }
        }
    }
    Ok((l2 + double).sqrt())
}
