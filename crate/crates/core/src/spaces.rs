//! Scalar and vector Lagrange spaces (P1, P2) on a triangle mesh.
//!
//! Scalar nodes are numbered vertices first, then edge midpoints (P2 only).
//! A vector space interleaves components: dof = node * components + comp.
//! Boundary nodes are indexed per marker and ordered by arclength along the
//! counterclockwise boundary cycle, which keeps every downstream boundary
//! object stable across runs.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::mesh::{Marker, Mesh};
use crate::CoeffVec;

/// Element family and component count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpaceKind {
    P1Scalar,
    P1Vector,
    P2Scalar,
    P2Vector,
}

impl SpaceKind {
    pub fn degree(self) -> usize {
        match self {
            SpaceKind::P1Scalar | SpaceKind::P1Vector => 1,
            SpaceKind::P2Scalar | SpaceKind::P2Vector => 2,
        }
    }

    pub fn components(self) -> usize {
        match self {
            SpaceKind::P1Scalar | SpaceKind::P2Scalar => 1,
            SpaceKind::P1Vector | SpaceKind::P2Vector => 2,
        }
    }

    /// Scalar nodes per cell.
    pub fn nodes_per_cell(self) -> usize {
        3 * self.degree()
    }
}

/// A scalar node sitting on the boundary, with its arclength coordinate
/// along the counterclockwise boundary cycle.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryNode {
    pub node: usize,
    pub arclength: f64,
}

/// Scalar nodes of one boundary edge, in edge direction.
#[derive(Debug, Clone, Copy)]
pub struct BoundaryEdgeNodes {
    pub a: usize,
    pub b: usize,
    /// Midpoint node for quadratic spaces.
    pub mid: Option<usize>,
    pub length: f64,
    /// Index into `mesh.boundary()`.
    pub boundary_idx: usize,
}

#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Arc<Mesh>,
    kind: SpaceKind,
    n_nodes: usize,
    node_coords: Vec<[f64; 2]>,
    boundary_nodes: [Vec<BoundaryNode>; 2],
    boundary_edges: [Vec<BoundaryEdgeNodes>; 2],
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, kind: SpaceKind) -> Self {
        let nv = mesh.n_vertices();
        let n_nodes = if kind.degree() == 2 {
            nv + mesh.n_edges()
        } else {
            nv
        };
        let mut node_coords = Vec::with_capacity(n_nodes);
        node_coords.extend_from_slice(mesh.vertices());
        if kind.degree() == 2 {
            for e in 0..mesh.n_edges() {
                let [a, b] = mesh.edge(e);
                let (p, q) = (mesh.vertex(a), mesh.vertex(b));
                node_coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            }
        }

        // Arclength of each boundary edge's start along its cycle.
        let mut edge_start = vec![0.0f64; mesh.boundary().len()];
        for cycle in mesh.boundary_cycles() {
            let mut s = 0.0;
            for k in cycle {
                edge_start[k] = s;
                let be = &mesh.boundary()[k];
                s += edge_len(&mesh, be.a, be.b);
            }
        }

        let mut boundary_nodes: [Vec<BoundaryNode>; 2] = [Vec::new(), Vec::new()];
        let mut boundary_edges: [Vec<BoundaryEdgeNodes>; 2] = [Vec::new(), Vec::new()];
        for (k, be) in mesh.boundary().iter().enumerate() {
            let len = edge_len(&mesh, be.a, be.b);
            let s = edge_start[k];
            let slot = be.marker.index() - 1;
            let mid = (kind.degree() == 2).then(|| nv + mesh.boundary_edge_id(k));
            boundary_edges[slot].push(BoundaryEdgeNodes {
                a: be.a,
                b: be.b,
                mid,
                length: len,
                boundary_idx: k,
            });
            boundary_nodes[slot].push(BoundaryNode {
                node: be.a,
                arclength: s,
            });
            if let Some(m) = mid {
                boundary_nodes[slot].push(BoundaryNode {
                    node: m,
                    arclength: s + 0.5 * len,
                });
            }
            boundary_nodes[slot].push(BoundaryNode {
                node: be.b,
                arclength: s + len,
            });
        }
        for list in &mut boundary_nodes {
            list.sort_by(|p, q| {
                p.arclength
                    .total_cmp(&q.arclength)
                    .then(p.node.cmp(&q.node))
            });
            list.dedup_by_key(|bn| bn.node);
        }

        FeSpace {
            mesh,
            kind,
            n_nodes,
            node_coords,
            boundary_nodes,
            boundary_edges,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn kind(&self) -> SpaceKind {
        self.kind
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_dofs(&self) -> usize {
        self.n_nodes * self.kind.components()
    }

    pub fn node_coords(&self, node: usize) -> [f64; 2] {
        self.node_coords[node]
    }

    /// Global dof of `(node, component)`.
    pub fn dof(&self, node: usize, comp: usize) -> usize {
        debug_assert!(comp < self.kind.components());
        node * self.kind.components() + comp
    }

    /// Scalar node ids of cell `c` in reference order: the three vertices,
    /// then (P2) the midpoints of edges (v0,v1), (v1,v2), (v2,v0).
    pub fn cell_nodes(&self, c: usize) -> Vec<usize> {
        let cell = self.mesh.cell(c);
        let mut nodes = vec![cell[0], cell[1], cell[2]];
        if self.kind.degree() == 2 {
            let nv = self.mesh.n_vertices();
            nodes.extend(self.mesh.cell_edge_ids(c).map(|e| nv + e));
        }
        nodes
    }

    /// Boundary nodes of one marker's closure, ordered by arclength.
    pub fn boundary_nodes(&self, marker: Marker) -> &[BoundaryNode] {
        &self.boundary_nodes[marker.index() - 1]
    }

    /// Boundary edges of one marker with their scalar node ids.
    pub fn boundary_edges(&self, marker: Marker) -> &[BoundaryEdgeNodes] {
        &self.boundary_edges[marker.index() - 1]
    }

    /// Boundary nodes interior to a marker: nodes on the marker's closure
    /// that do not also lie on the closure of the other part. These are the
    /// trace nodes of test functions vanishing on the other part.
    pub fn interior_boundary_nodes(&self, marker: Marker) -> Vec<BoundaryNode> {
        let other: Vec<usize> = self
            .boundary_nodes(marker.other())
            .iter()
            .map(|bn| bn.node)
            .collect();
        self.boundary_nodes(marker)
            .iter()
            .copied()
            .filter(|bn| !other.contains(&bn.node))
            .collect()
    }

    /// Nodal interpolation of a scalar field.
    pub fn interpolate_scalar(&self, f: &ScalarField) -> Result<CoeffVec> {
        if self.kind.components() != 1 {
            return Err(Error::Config(
                "interpolate_scalar needs a scalar space".into(),
            ));
        }
        Ok(CoeffVec::from_fn(self.n_nodes, |i, _| {
            let [x, y] = self.node_coords[i];
            f(x, y)
        }))
    }

    /// Nodal interpolation of a vector field.
    pub fn interpolate_vector(&self, f: &VectorField) -> Result<CoeffVec> {
        if self.kind.components() != 2 {
            return Err(Error::Config(
                "interpolate_vector needs a vector space".into(),
            ));
        }
        let mut v = CoeffVec::zeros(self.n_dofs());
        for i in 0..self.n_nodes {
            let [x, y] = self.node_coords[i];
            let (fx, fy) = f(x, y);
            v[self.dof(i, 0)] = fx;
            v[self.dof(i, 1)] = fy;
        }
        Ok(v)
    }

    /// True if two spaces live on the same mesh object.
    pub fn shares_mesh(&self, other: &FeSpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }
}

fn edge_len(mesh: &Mesh, a: usize, b: usize) -> f64 {
    let (p, q) = (mesh.vertex(a), mesh.vertex(b));
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

// ---------------------------------------------------------------------------
// Reference basis
// ---------------------------------------------------------------------------

/// Values of the P1 basis at a reference point.
pub fn p1_shapes(xi: f64, eta: f64) -> [f64; 3] {
    [1.0 - xi - eta, xi, eta]
}

/// Reference gradients of the P1 basis (constant).
pub fn p1_grads() -> [[f64; 2]; 3] {
    [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]
}

/// Values of the P2 basis at a reference point, ordered vertices then edge
/// midpoints of (v0,v1), (v1,v2), (v2,v0).
pub fn p2_shapes(xi: f64, eta: f64) -> [f64; 6] {
    let l = [1.0 - xi - eta, xi, eta];
    [
        l[0] * (2.0 * l[0] - 1.0),
        l[1] * (2.0 * l[1] - 1.0),
        l[2] * (2.0 * l[2] - 1.0),
        4.0 * l[0] * l[1],
        4.0 * l[1] * l[2],
        4.0 * l[2] * l[0],
    ]
}

/// Reference gradients of the P2 basis.
pub fn p2_grads(xi: f64, eta: f64) -> [[f64; 2]; 6] {
    let l = [1.0 - xi - eta, xi, eta];
    let dl = p1_grads();
    let mut g = [[0.0; 2]; 6];
    for i in 0..3 {
        for d in 0..2 {
            g[i][d] = (4.0 * l[i] - 1.0) * dl[i][d];
        }
    }
    let pairs = [(0, 1), (1, 2), (2, 0)];
    for (k, (i, j)) in pairs.into_iter().enumerate() {
        for d in 0..2 {
            g[3 + k][d] = 4.0 * (l[i] * dl[j][d] + l[j] * dl[i][d]);
        }
    }
    g
}

/// Shape values for a given degree, padded to length 6.
pub fn shapes(degree: usize, xi: f64, eta: f64) -> ([f64; 6], usize) {
    match degree {
        1 => {
            let s = p1_shapes(xi, eta);
            ([s[0], s[1], s[2], 0.0, 0.0, 0.0], 3)
        }
        2 => (p2_shapes(xi, eta), 6),
        _ => unreachable!("only P1 and P2 are supported"),
    }
}

/// Reference shape gradients for a given degree, padded to length 6.
pub fn shape_grads(degree: usize, xi: f64, eta: f64) -> ([[f64; 2]; 6], usize) {
    match degree {
        1 => {
            let g = p1_grads();
            ([g[0], g[1], g[2], [0.0; 2], [0.0; 2], [0.0; 2]], 3)
        }
        2 => (p2_grads(xi, eta), 6),
        _ => unreachable!("only P1 and P2 are supported"),
    }
}

/// Affine cell geometry: maps reference coordinates and gradients to the
/// physical cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub inv_jac_t: [[f64; 2]; 2],
    pub area: f64,
}

impl CellGeometry {
    pub fn of(mesh: &Mesh, c: usize) -> Self {
        let [a, b, d] = mesh.cell(c).map(|v| mesh.vertex(v));
        let jac = [[b[0] - a[0], d[0] - a[0]], [b[1] - a[1], d[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv_jac_t = [
            [jac[1][1] / det, -jac[1][0] / det],
            [-jac[0][1] / det, jac[0][0] / det],
        ];
        CellGeometry {
            origin: a,
            jac,
            inv_jac_t,
            area: 0.5 * det,
        }
    }

    pub fn map(&self, xi: f64, eta: f64) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xi + self.jac[0][1] * eta,
            self.origin[1] + self.jac[1][0] * xi + self.jac[1][1] * eta,
        ]
    }

    /// Physical gradient from a reference gradient.
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv_jac_t[0][0] * g[0] + self.inv_jac_t[0][1] * g[1],
            self.inv_jac_t[1][0] * g[0] + self.inv_jac_t[1][1] * g[1],
        ]
    }
}

// ---------------------------------------------------------------------------
// Essential constraints
// ---------------------------------------------------------------------------

/// Which essential condition to build.
pub enum ConstraintKind {
    /// Zero velocity on the closure of Gamma1 (vector spaces).
    NoSlipGamma1,
    /// Zero velocity on the closure of Gamma1 plus zero tangential component
    /// on Gamma2; every Gamma2 edge must be axis aligned. Full Dirichlet
    /// pins win at corner nodes.
    HSpace,
    /// Prescribed values on the closure of Gamma2 (scalar spaces).
    PressureDirichletGamma2(ScalarField),
    /// Zero values on the closure of one marker (scalar spaces); used for
    /// Poincare-type eigenvalue computations.
    ScalarZeroOn(Marker),
}

/// A set of pinned dofs with their values, sorted by dof.
#[derive(Debug, Clone, Default)]
pub struct ConstraintSet {
    entries: Vec<(usize, f64)>,
}

impl ConstraintSet {
    pub fn empty() -> Self {
        ConstraintSet {
            entries: Vec::new(),
        }
    }

    /// Build from raw `(dof, value)` pairs; duplicate dofs must agree.
    pub fn from_pairs(mut pairs: Vec<(usize, f64)>) -> Result<Self> {
        pairs.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 != w[1].1 {
                return Err(Error::Config(format!(
                    "dof {} constrained to both {} and {}",
                    w[0].0, w[0].1, w[1].1
                )));
            }
        }
        pairs.dedup_by_key(|p| p.0);
        Ok(ConstraintSet { entries: pairs })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Dense mask and values over `n` dofs.
    pub fn mask(&self, n: usize) -> (Vec<bool>, Vec<f64>) {
        let mut fixed = vec![false; n];
        let mut values = vec![0.0; n];
        for &(dof, v) in &self.entries {
            assert!(dof < n, "constraint dof {dof} out of range {n}");
            fixed[dof] = true;
            values[dof] = v;
        }
        (fixed, values)
    }
}

/// Build the essential constraints of one kind on a space.
pub fn essential_constraints(space: &FeSpace, kind: &ConstraintKind) -> Result<ConstraintSet> {
    let comps = space.kind().components();
    let mut pairs: Vec<(usize, f64)> = Vec::new();
    match kind {
        ConstraintKind::NoSlipGamma1 => {
            if comps != 2 {
                return Err(Error::Config(
                    "no-slip constraints need a vector space".into(),
                ));
            }
            for bn in space.boundary_nodes(Marker::Gamma1) {
                pairs.push((space.dof(bn.node, 0), 0.0));
                pairs.push((space.dof(bn.node, 1), 0.0));
            }
        }
        ConstraintKind::HSpace => {
            if comps != 2 {
                return Err(Error::Config(
                    "H-space constraints need a vector space".into(),
                ));
            }
            for bn in space.boundary_nodes(Marker::Gamma1) {
                pairs.push((space.dof(bn.node, 0), 0.0));
                pairs.push((space.dof(bn.node, 1), 0.0));
            }
            for be in space.boundary_edges(Marker::Gamma2) {
                let p = space.node_coords(be.a);
                let q = space.node_coords(be.b);
                let (dx, dy) = ((q[0] - p[0]).abs(), (q[1] - p[1]).abs());
                let comp = if dx <= 1e-12 * be.length {
                    1 // vertical edge, tangent (0,1): pin the y component
                } else if dy <= 1e-12 * be.length {
                    0 // horizontal edge, tangent (1,0): pin the x component
                } else {
                    return Err(Error::UnsupportedGeometry(format!(
                        "Gamma2 edge ({:.3},{:.3})-({:.3},{:.3}) is not axis aligned; \
                         the tangential constraint is only implemented for axis-aligned sides",
                        p[0], p[1], q[0], q[1]
                    )));
                };
                let mut nodes = vec![be.a, be.b];
                nodes.extend(be.mid);
                for node in nodes {
                    pairs.push((space.dof(node, comp), 0.0));
                }
            }
        }
        ConstraintKind::PressureDirichletGamma2(pb) => {
            if comps != 1 {
                return Err(Error::Config(
                    "pressure constraints need a scalar space".into(),
                ));
            }
            for bn in space.boundary_nodes(Marker::Gamma2) {
                let [x, y] = space.node_coords(bn.node);
                pairs.push((bn.node, pb(x, y)));
            }
        }
        ConstraintKind::ScalarZeroOn(marker) => {
            if comps != 1 {
                return Err(Error::Config(
                    "scalar constraints need a scalar space".into(),
                ));
            }
            for bn in space.boundary_nodes(*marker) {
                pairs.push((bn.node, 0.0));
            }
        }
    }
    ConstraintSet::from_pairs(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{scalar_const, vector_const};
    use crate::mesh::BcLayout;
    use crate::quadrature::tri_default;
    use std::sync::Arc;

    fn space(n: usize, kind: SpaceKind) -> FeSpace {
        let mesh = Arc::new(Mesh::unit_square(n, BcLayout::channel()).unwrap());
        FeSpace::new(mesh, kind)
    }

    #[test]
    fn dof_counts() {
        assert_eq!(space(1, SpaceKind::P1Scalar).n_dofs(), 4);
        assert_eq!(space(1, SpaceKind::P2Scalar).n_dofs(), 9);
        assert_eq!(space(1, SpaceKind::P2Vector).n_dofs(), 18);
        assert_eq!(space(2, SpaceKind::P1Scalar).n_dofs(), 9);
    }

    #[test]
    fn partition_of_unity_at_quadrature_points() {
        for &(xi, eta) in tri_default().points {
            let s1: f64 = p1_shapes(xi, eta).iter().sum();
            let s2: f64 = p2_shapes(xi, eta).iter().sum();
            assert!((s1 - 1.0).abs() <= 1e-13);
            assert!((s2 - 1.0).abs() <= 1e-13);
            let g2 = p2_grads(xi, eta);
            for d in 0..2 {
                let gs: f64 = g2.iter().map(|g| g[d]).sum();
                assert!(gs.abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn p2_shapes_are_nodal() {
        // node k has reference coordinates: vertices then edge midpoints
        let ref_nodes = [
            (0.0, 0.0),
            (1.0, 0.0),
            (0.0, 1.0),
            (0.5, 0.0),
            (0.5, 0.5),
            (0.0, 0.5),
        ];
        for (k, &(xi, eta)) in ref_nodes.iter().enumerate() {
            let s = p2_shapes(xi, eta);
            for (j, &v) in s.iter().enumerate() {
                let expect = if j == k { 1.0 } else { 0.0 };
                assert!((v - expect).abs() <= 1e-14, "N{j}({xi},{eta}) = {v}");
            }
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let sp = space(2, SpaceKind::P2Scalar);
        let f: ScalarField = Arc::new(|x, y| 1.0 + 2.0 * x - 0.5 * y + x * y);
        let coeffs = sp.interpolate_scalar(&f).unwrap();
        // check at quadrature points of every cell
        for c in 0..sp.mesh().n_cells() {
            let geo = CellGeometry::of(sp.mesh(), c);
            let nodes = sp.cell_nodes(c);
            for &(xi, eta) in tri_default().points {
                let s = p2_shapes(xi, eta);
                let val: f64 = nodes.iter().zip(s).map(|(&n, sv)| coeffs[n] * sv).sum();
                let [x, y] = geo.map(xi, eta);
                assert!((val - f(x, y)).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn boundary_nodes_ordered_by_arclength() {
        let sp = space(2, SpaceKind::P1Scalar);
        for marker in [Marker::Gamma1, Marker::Gamma2] {
            let bn = sp.boundary_nodes(marker);
            assert!(!bn.is_empty());
            for w in bn.windows(2) {
                assert!(w[0].arclength < w[1].arclength);
            }
        }
        // Gamma1 = bottom and top: (n+1) vertices each
        assert_eq!(sp.boundary_nodes(Marker::Gamma1).len(), 6);
    }

    #[test]
    fn interior_boundary_nodes_drop_corners() {
        let sp = space(2, SpaceKind::P1Scalar);
        let interior = sp.interior_boundary_nodes(Marker::Gamma1);
        // bottom/top have 3 vertices each; the 4 corners are shared with Gamma2
        assert_eq!(interior.len(), 2);
        for bn in interior {
            let [x, _] = sp.node_coords(bn.node);
            assert!(x > 0.0 && x < 1.0);
        }
    }

    #[test]
    fn noslip_pins_both_components() {
        let sp = space(2, SpaceKind::P2Vector);
        let set = essential_constraints(&sp, &ConstraintKind::NoSlipGamma1).unwrap();
        // closure of Gamma1 = bottom + top chains: 2 * (3 vertices + 2 midpoints)
        assert_eq!(set.len(), 2 * 2 * 5);
        for &(_, v) in set.entries() {
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn h_space_pins_tangential_component_on_gamma2() {
        let sp = space(2, SpaceKind::P2Vector);
        let set = essential_constraints(&sp, &ConstraintKind::HSpace).unwrap();
        let (fixed, _) = set.mask(sp.n_dofs());
        for bn in sp.boundary_nodes(Marker::Gamma2) {
            let [x, y] = sp.node_coords(bn.node);
            let on_gamma1 = y == 0.0 || y == 1.0;
            // on the vertical sides x=0 and x=1 the tangent is (0,1),
            // so the y component is pinned; x stays free off Gamma1
            assert!(fixed[sp.dof(bn.node, 1)], "y comp free at ({x},{y})");
            assert_eq!(fixed[sp.dof(bn.node, 0)], on_gamma1, "x comp at ({x},{y})");
        }
    }

    #[test]
    fn h_space_rejects_slanted_gamma2() {
        // one triangle: hypotenuse as Gamma2 is not axis aligned
        let vertices = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let cells = vec![[0, 1, 2]];
        let boundary = vec![
            crate::mesh::BoundaryEdge {
                a: 0,
                b: 1,
                marker: Marker::Gamma1,
            },
            crate::mesh::BoundaryEdge {
                a: 1,
                b: 2,
                marker: Marker::Gamma2,
            },
            crate::mesh::BoundaryEdge {
                a: 2,
                b: 0,
                marker: Marker::Gamma1,
            },
        ];
        let mesh = Arc::new(Mesh::new(vertices, cells, boundary).unwrap());
        let sp = FeSpace::new(mesh, SpaceKind::P2Vector);
        let err = essential_constraints(&sp, &ConstraintKind::HSpace).unwrap_err();
        assert!(matches!(err, Error::UnsupportedGeometry(_)));
    }

    #[test]
    fn pressure_dirichlet_uses_boundary_values() {
        let sp = space(2, SpaceKind::P1Scalar);
        let pb: ScalarField = Arc::new(|x, _| 2.0 * (1.0 - x));
        let set = essential_constraints(&sp, &ConstraintKind::PressureDirichletGamma2(pb)).unwrap();
        let (fixed, values) = set.mask(sp.n_dofs());
        // the vertex at (0, 0.5) lies on Gamma2 and must carry the value 2
        let node = (0..sp.n_nodes())
            .find(|&n| sp.node_coords(n) == [0.0, 0.5])
            .unwrap();
        assert!(fixed[node]);
        assert_eq!(values[node], 2.0);
    }

    #[test]
    fn conflicting_values_are_rejected() {
        let err = ConstraintSet::from_pairs(vec![(3, 1.0), (3, 2.0)]).unwrap_err();
        assert!(err.to_string().contains("dof 3"));
        // agreeing duplicates collapse
        let set = ConstraintSet::from_pairs(vec![(3, 1.0), (3, 1.0)]).unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn constraints_are_idempotent() {
        let sp = space(2, SpaceKind::P2Vector);
        let a = essential_constraints(&sp, &ConstraintKind::HSpace).unwrap();
        let b = essential_constraints(&sp, &ConstraintKind::HSpace).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn interpolate_constant_fields() {
        let sp = space(2, SpaceKind::P2Vector);
        let v = sp.interpolate_vector(&vector_const(1.5, -2.0)).unwrap();
        for node in 0..sp.n_nodes() {
            assert_eq!(v[sp.dof(node, 0)], 1.5);
            assert_eq!(v[sp.dof(node, 1)], -2.0);
        }
        let sps = space(2, SpaceKind::P1Scalar);
        assert!(sps.interpolate_vector(&vector_const(0.0, 0.0)).is_err());
        assert!(sp.interpolate_scalar(&scalar_const(0.0)).is_err());
    }
}
