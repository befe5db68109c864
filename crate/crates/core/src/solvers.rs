//! Direct solvers for the three discrete problems.
//!
//! All three reduce to sparse symmetric systems handled by [`crate::ldl`]:
//! the coupled problems s1 and s2 as saddle point systems over the free
//! velocity dofs plus all pressure dofs, the decoupled problem pp as two
//! positive definite solves in sequence. Unknowns are ordered velocity
//! block first and pressure block last, which keeps the unpivoted LDL'
//! factorization well defined; within each block dofs are sorted by node
//! position to contain fill.

use std::fmt;
use std::sync::Arc;

use crate::assembly::{
    assemble_functional, assemble_matrix, FormKind, FunctionalKind, SparseMatrix,
};
use crate::error::{Error, Result};
use crate::field::{ScalarField, VectorField};
use crate::ldl::LdlFactor;
use crate::mesh::{Marker, Mesh};
use crate::spaces::{essential_constraints, ConstraintKind, ConstraintSet, FeSpace, SpaceKind};
use crate::CoeffVec;

/// Which discrete problem a solution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    S1,
    S2,
    Pp,
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Problem::S1 => write!(f, "s1"),
            Problem::S2 => write!(f, "s2"),
            Problem::Pp => write!(f, "pp"),
        }
    }
}

impl std::str::FromStr for Problem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "s1" => Ok(Problem::S1),
            "s2" => Ok(Problem::S2),
            "pp" => Ok(Problem::Pp),
            other => Err(Error::Parse(format!(
                "unknown problem {other}; expected s1, s2 or pp"
            ))),
        }
    }
}

/// Traction data on Gamma2: either a pointwise field integrated against the
/// test functions, or an already assembled coefficient vector over the full
/// velocity space (used when the traction is known only as a functional).
pub enum TractionData {
    Field(VectorField),
    Assembled(CoeffVec),
}

/// Problem data; each solver checks that the fields it needs are present.
/// s1 needs {f, t_b}; s2 needs {f, p_b}; pp needs all five.
pub struct ProblemData {
    pub f: VectorField,
    pub div_f: Option<ScalarField>,
    pub t_b: Option<TractionData>,
    pub g_b: Option<ScalarField>,
    pub p_b: Option<ScalarField>,
}

impl ProblemData {
    /// Data with zero load and no boundary fields.
    pub fn zero() -> Self {
        ProblemData {
            f: crate::field::vector_zero(),
            div_f: None,
            t_b: None,
            g_b: None,
            p_b: None,
        }
    }
}

/// Solver-side diagnostics stored with every solution.
#[derive(Debug, Clone, Copy)]
pub struct SolveDiagnostics {
    /// Relative linear-system residual of the final (reduced) solve.
    pub residual: f64,
    pub positive_pivots: usize,
    pub negative_pivots: usize,
}

/// A discrete velocity/pressure pair with the spaces it lives on.
#[derive(Debug)]
pub struct FieldSolution {
    pub problem: Problem,
    pub velocity_space: FeSpace,
    pub pressure_space: FeSpace,
    pub velocity: CoeffVec,
    pub pressure: CoeffVec,
    pub diagnostics: SolveDiagnostics,
}

const RESIDUAL_TOL: f64 = 1e-10;

/// Relative pivot floor for the saddle well-posedness check. Healthy
/// saddle factorizations keep pivots orders of magnitude above this at
/// desk scale; kernel directions land at roundoff, far below.
const PIVOT_FLOOR: f64 = 1e-10;

/// Solve the traction problem s1.
pub fn solve_s1(mesh: &Arc<Mesh>, data: &ProblemData) -> Result<FieldSolution> {
    let t_b = data
        .t_b
        .as_ref()
        .ok_or_else(|| Error::Config("s1 needs traction data t_b".into()))?;
    let velocity = FeSpace::new(mesh.clone(), SpaceKind::P2Vector);
    let pressure = FeSpace::new(mesh.clone(), SpaceKind::P1Scalar);
    let a = assemble_matrix(FormKind::SymGradHalf, &velocity, &velocity)?;
    let rhs = load_plus_traction(&velocity, &data.f, t_b)?;
    let constraints = essential_constraints(&velocity, &ConstraintKind::NoSlipGamma1)?;
    let (u, p, diagnostics) = saddle_solve(&velocity, &pressure, &a, &rhs, &constraints, false)?;
    Ok(FieldSolution {
        problem: Problem::S1,
        velocity_space: velocity,
        pressure_space: pressure,
        velocity: u,
        pressure: p,
        diagnostics,
    })
}

/// Solve the curl-form problem s2.
pub fn solve_s2(mesh: &Arc<Mesh>, data: &ProblemData) -> Result<FieldSolution> {
    let p_b = data
        .p_b
        .as_ref()
        .ok_or_else(|| Error::Config("s2 needs boundary pressure data p_b".into()))?;
    let velocity = FeSpace::new(mesh.clone(), SpaceKind::P2Vector);
    let pressure = FeSpace::new(mesh.clone(), SpaceKind::P1Scalar);
    let a = assemble_matrix(FormKind::CurlCurl, &velocity, &velocity)?;
    let load = assemble_functional(&FunctionalKind::DomainLoad(data.f.clone()), &velocity)?;
    let flux = assemble_functional(
        &FunctionalKind::PressureFlux(Marker::Gamma2, p_b.clone()),
        &velocity,
    )?;
    let rhs = load - flux;
    let constraints = essential_constraints(&velocity, &ConstraintKind::HSpace)?;
    let (u, p, diagnostics) = saddle_solve(&velocity, &pressure, &a, &rhs, &constraints, true)?;
    Ok(FieldSolution {
        problem: Problem::S2,
        velocity_space: velocity,
        pressure_space: pressure,
        velocity: u,
        pressure: p,
        diagnostics,
    })
}

/// Solve the decoupled pressure-Poisson problem pp: a scalar Poisson solve
/// for the pressure, then a velocity solve with the pressure gradient moved
/// to the right side.
pub fn solve_pp(mesh: &Arc<Mesh>, data: &ProblemData) -> Result<FieldSolution> {
    let div_f = data
        .div_f
        .as_ref()
        .ok_or_else(|| Error::Config("pp needs the divergence div_f of the load".into()))?;
    let g_b = data
        .g_b
        .as_ref()
        .ok_or_else(|| Error::Config("pp needs Neumann data g_b".into()))?;
    let p_b = data
        .p_b
        .as_ref()
        .ok_or_else(|| Error::Config("pp needs boundary pressure data p_b".into()))?;
    let t_b = data
        .t_b
        .as_ref()
        .ok_or_else(|| Error::Config("pp needs traction data t_b".into()))?;

    let velocity = FeSpace::new(mesh.clone(), SpaceKind::P2Vector);
    let pressure = FeSpace::new(mesh.clone(), SpaceKind::P1Scalar);

    // Stage one: grad-grad form with Dirichlet values on closure(Gamma2),
    // tested against functions vanishing there.
    let g = assemble_matrix(FormKind::GradGrad, &pressure, &pressure)?;
    let div_load = assemble_functional(&FunctionalKind::DomainScalar(div_f.clone()), &pressure)?;
    let neumann = assemble_functional(
        &FunctionalKind::NeumannPair(Marker::Gamma1, g_b.clone()),
        &pressure,
    )?;
    let rhs_p = neumann - div_load;
    let p_constraints = essential_constraints(
        &pressure,
        &ConstraintKind::PressureDirichletGamma2(p_b.clone()),
    )?;
    let (p_h, diag_p) = spd_solve(&pressure, &g, &rhs_p, &p_constraints)?;

    // Stage two: velocity with the discrete pressure moved to the right side.
    let a = assemble_matrix(FormKind::SymGradHalf, &velocity, &velocity)?;
    let c = assemble_matrix(FormKind::DivCouple, &velocity, &pressure)?;
    let mut rhs_u = load_plus_traction(&velocity, &data.f, t_b)?;
    rhs_u += c.tr_mul_vec(&p_h);
    let u_constraints = essential_constraints(&velocity, &ConstraintKind::NoSlipGamma1)?;
    let (u_h, diag_u) = spd_solve(&velocity, &a, &rhs_u, &u_constraints)?;

    Ok(FieldSolution {
        problem: Problem::Pp,
        velocity_space: velocity,
        pressure_space: pressure,
        velocity: u_h,
        pressure: p_h,
        diagnostics: SolveDiagnostics {
            residual: diag_p.residual.max(diag_u.residual),
            positive_pivots: diag_p.positive_pivots + diag_u.positive_pivots,
            negative_pivots: diag_p.negative_pivots + diag_u.negative_pivots,
        },
    })
}

/// Direct solve of a general symmetric system in natural order, with the
/// library's residual check.
pub fn factor_solve(a: &SparseMatrix, b: &CoeffVec) -> Result<CoeffVec> {
    let factor = LdlFactor::new_natural(a)?;
    let x = factor.solve(b);
    let residual = relative_residual(a, &x, b);
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "solve residual {residual:.3e} exceeds {RESIDUAL_TOL:.1e}"
        )));
    }
    Ok(x)
}

fn load_plus_traction(velocity: &FeSpace, f: &VectorField, t_b: &TractionData) -> Result<CoeffVec> {
    let mut rhs = assemble_functional(&FunctionalKind::DomainLoad(f.clone()), velocity)?;
    match t_b {
        TractionData::Field(t) => {
            rhs += assemble_functional(
                &FunctionalKind::TractionPair(Marker::Gamma2, t.clone()),
                velocity,
            )?;
        }
        TractionData::Assembled(v) => {
            if v.len() != velocity.n_dofs() {
                return Err(Error::Config(format!(
                    "assembled traction has {} coefficients, velocity space has {} dofs",
                    v.len(),
                    velocity.n_dofs()
                )));
            }
            rhs += v;
        }
    }
    Ok(rhs)
}

fn relative_residual(a: &SparseMatrix, x: &CoeffVec, b: &CoeffVec) -> f64 {
    let r = a.mul_vec(x) - b;
    let scale = a.max_abs() * x.amax() + b.amax();
    if scale == 0.0 {
        r.amax()
    } else {
        r.amax() / scale
    }
}

fn diagonal_entry(m: &SparseMatrix, k: usize) -> f64 {
    let (cols, vals) = m.row(k);
    cols.iter()
        .zip(vals)
        .find(|(c, _)| **c == k)
        .map(|(_, v)| *v)
        .unwrap_or(0.0)
}

/// Free dofs (complement of the constrained set) in increasing order.
fn free_dofs(n: usize, fixed: &[bool]) -> Vec<usize> {
    (0..n).filter(|&d| !fixed[d]).collect()
}

/// Fill-reducing order of the reduced indices `0..free.len()`: sort by the
/// node position (y, then x, then component) of the underlying dof.
fn geometric_order(space: &FeSpace, free: &[usize]) -> Vec<usize> {
    let comps = space.kind().components();
    let mut order: Vec<usize> = (0..free.len()).collect();
    order.sort_by(|&a, &b| {
        let ka = dof_key(space, comps, free[a]);
        let kb = dof_key(space, comps, free[b]);
        ka.0.total_cmp(&kb.0)
            .then(ka.1.total_cmp(&kb.1))
            .then(ka.2.cmp(&kb.2))
    });
    order
}

fn dof_key(space: &FeSpace, comps: usize, dof: usize) -> (f64, f64, usize) {
    let [x, y] = space.node_coords(dof / comps);
    (y, x, dof % comps)
}

/// Reduced right side after moving fixed-dof columns of `a` to the right.
fn eliminate_rhs(a: &SparseMatrix, rhs: &CoeffVec, free: &[usize], values: &[f64]) -> CoeffVec {
    let mut out = CoeffVec::zeros(free.len());
    for (i, &d) in free.iter().enumerate() {
        let (cols, vals) = a.row(d);
        let mut acc = rhs[d];
        for (c, v) in cols.iter().zip(vals) {
            acc -= v * values[*c];
        }
        out[i] = acc;
    }
    out
}

/// Scatter a reduced solution back to the full dof vector, writing the
/// prescribed values bit-exactly on constrained dofs.
fn scatter(n: usize, free: &[usize], reduced: &CoeffVec, constraints: &ConstraintSet) -> CoeffVec {
    let mut full = CoeffVec::zeros(n);
    for (i, &d) in free.iter().enumerate() {
        full[d] = reduced[i];
    }
    for &(d, v) in constraints.entries() {
        full[d] = v;
    }
    full
}

/// Solve A u = rhs on the space with essential constraints eliminated.
fn spd_solve(
    space: &FeSpace,
    a: &SparseMatrix,
    rhs: &CoeffVec,
    constraints: &ConstraintSet,
) -> Result<(CoeffVec, SolveDiagnostics)> {
    let n = space.n_dofs();
    let (fixed, values) = constraints.mask(n);
    let free = free_dofs(n, &fixed);
    let a_red = a.submatrix(&free, &free);
    // the eliminated columns use the full matrix row, minus the free part
    // already present in a_red; fixed values enter through the full row
    let mut rhs_red = CoeffVec::zeros(free.len());
    for (i, &d) in free.iter().enumerate() {
        let (cols, vals) = a.row(d);
        let mut acc = rhs[d];
        for (c, v) in cols.iter().zip(vals) {
            if fixed[*c] {
                acc -= v * values[*c];
            }
        }
        rhs_red[i] = acc;
    }
    let perm = geometric_order(space, &free);
    let factor = LdlFactor::new(&a_red, &perm)?;
    let x = factor.solve(&rhs_red);
    let residual = relative_residual(&a_red, &x, &rhs_red);
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "constrained solve residual {residual:.3e} exceeds {RESIDUAL_TOL:.1e}"
        )));
    }
    let (positive_pivots, negative_pivots) = factor.inertia();
    Ok((
        scatter(n, &free, &x, constraints),
        SolveDiagnostics {
            residual,
            positive_pivots,
            negative_pivots,
        },
    ))
}

/// Solve the saddle system [A B'; B 0] with B = -DivCouple, velocity
/// constraints eliminated, all pressure dofs kept.
///
/// With `augment` the leading block is replaced by A + C'WC, W the inverse
/// pressure mass diagonal. The divergence rows force C u to its prescribed
/// value, so the solution is unchanged, but the shifted block is definite
/// even when A alone is not: the curl-curl form vanishes on discrete
/// gradients that satisfy the boundary conditions, and without the shift
/// the unpivoted factorization runs into those kernel directions.
fn saddle_solve(
    velocity: &FeSpace,
    pressure: &FeSpace,
    a: &SparseMatrix,
    rhs_u: &CoeffVec,
    constraints: &ConstraintSet,
    augment: bool,
) -> Result<(CoeffVec, CoeffVec, SolveDiagnostics)> {
    let nv = velocity.n_dofs();
    let nq = pressure.n_dofs();
    let (fixed, values) = constraints.mask(nv);
    let free = free_dofs(nv, &fixed);
    let nf = free.len();
    let c = assemble_matrix(FormKind::DivCouple, velocity, pressure)?;

    let mut triplets = Vec::new();
    let mut vel_pos = vec![usize::MAX; nv];
    for (i, &d) in free.iter().enumerate() {
        vel_pos[d] = i;
    }
    for (i, &d) in free.iter().enumerate() {
        let (cols, vals) = a.row(d);
        for (col, v) in cols.iter().zip(vals) {
            if vel_pos[*col] != usize::MAX {
                triplets.push((i, vel_pos[*col], *v));
            }
        }
    }
    for k in 0..nq {
        let (cols, vals) = c.row(k);
        for (col, v) in cols.iter().zip(vals) {
            if vel_pos[*col] != usize::MAX {
                // B = -C in both off-diagonal blocks
                triplets.push((nf + k, vel_pos[*col], -v));
                triplets.push((vel_pos[*col], nf + k, -v));
            }
        }
    }

    // divergence rows: -C u_free = C_fixed * fixed values (zero for no-slip,
    // kept general for completeness)
    let mut g_rows = CoeffVec::zeros(nq);
    for k in 0..nq {
        let (cols, vals) = c.row(k);
        let mut acc = 0.0;
        for (col, v) in cols.iter().zip(vals) {
            if fixed[*col] {
                acc += v * values[*col];
            }
        }
        g_rows[k] = acc;
    }

    let mut rhs = CoeffVec::zeros(nf + nq);
    let rhs_vel = eliminate_rhs(a, rhs_u, &free, &values);
    rhs.rows_mut(0, nf).copy_from(&rhs_vel);
    rhs.rows_mut(nf, nq).copy_from(&g_rows);

    if augment {
        let mass = assemble_matrix(FormKind::Mass, pressure, pressure)?;
        let mut row_entries: Vec<(usize, f64)> = Vec::new();
        for k in 0..nq {
            let w = 1.0 / diagonal_entry(&mass, k);
            row_entries.clear();
            let (cols, vals) = c.row(k);
            for (col, v) in cols.iter().zip(vals) {
                if vel_pos[*col] != usize::MAX {
                    row_entries.push((vel_pos[*col], *v));
                }
            }
            for &(i, vi) in &row_entries {
                for &(j, vj) in &row_entries {
                    triplets.push((i, j, w * vi * vj));
                }
                // matching right-side shift: the row C_k u equals -g_rows[k]
                rhs[i] -= w * vi * g_rows[k];
            }
        }
    }

    let k_mat = SparseMatrix::from_triplets(nf + nq, nf + nq, triplets);

    // velocity block ordered before the pressure block, each geometrically
    let mut perm = geometric_order(velocity, &free);
    let all_pressure: Vec<usize> = (0..nq).collect();
    let p_order = geometric_order(pressure, &all_pressure);
    perm.extend(p_order.into_iter().map(|i| nf + i));

    let factor = LdlFactor::new(&k_mat, &perm)?;
    // A consistent saddle system can factor without a pivot breakdown and
    // still be singular: kernel directions show up as sign-scrambled
    // near-zero pivots, and the solve then returns one arbitrary member of
    // the solution set. Inertia plus a pivot floor detects this reliably.
    let (n_pos, n_neg) = factor.inertia();
    let floor = PIVOT_FLOOR * k_mat.max_abs();
    if n_pos != nf || n_neg != nq || factor.min_abs_pivot() <= floor {
        return Err(Error::Numerical(format!(
            "saddle system is singular: inertia ({n_pos}, {n_neg}), expected ({nf}, {nq}), \
             smallest pivot {:.3e}; the operator has a kernel inside the discretely \
             divergence-free constrained space",
            factor.min_abs_pivot()
        )));
    }
    let x = factor.solve(&rhs);
    let residual = relative_residual(&k_mat, &x, &rhs);
    if residual > RESIDUAL_TOL {
        return Err(Error::Numerical(format!(
            "saddle solve residual {residual:.3e} exceeds {RESIDUAL_TOL:.1e}"
        )));
    }

    let u_red = CoeffVec::from_fn(nf, |i, _| x[i]);
    let u = scatter(nv, &free, &u_red, constraints);
    let p = CoeffVec::from_fn(nq, |k, _| x[nf + k]);
    let (positive_pivots, negative_pivots) = factor.inertia();
    Ok((
        u,
        p,
        SolveDiagnostics {
            residual,
            positive_pivots,
            negative_pivots,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{scalar_const, scalar_zero, vector_zero};
    use crate::mesh::BcLayout;

    fn channel_mesh(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::unit_square(n, BcLayout::channel()).unwrap())
    }

    fn poiseuille_traction() -> TractionData {
        TractionData::Field(Arc::new(|x, y| {
            if x < 0.5 {
                (0.5, -(1.0 - 2.0 * y) / 4.0)
            } else {
                (0.0, (1.0 - 2.0 * y) / 4.0)
            }
        }))
    }

    fn ms1_s1_data() -> ProblemData {
        ProblemData {
            f: vector_zero(),
            div_f: Some(scalar_zero()),
            t_b: Some(poiseuille_traction()),
            g_b: Some(scalar_zero()),
            p_b: Some(Arc::new(|x, _| (1.0 - x) / 2.0)),
        }
    }

    fn exact_velocity(space: &FeSpace) -> CoeffVec {
        let u: VectorField = Arc::new(|_, y: f64| (y * (1.0 - y), 0.0));
        space.interpolate_vector(&u).unwrap()
    }

    #[test]
    fn s1_reproduces_poiseuille() {
        let mesh = channel_mesh(4);
        let sol = solve_s1(&mesh, &ms1_s1_data()).unwrap();
        let u_exact = exact_velocity(&sol.velocity_space);
        let p_star: ScalarField = Arc::new(|x: f64, _| (1.0 - x) / 2.0);
        let p_exact = sol.pressure_space.interpolate_scalar(&p_star).unwrap();
        assert!((&sol.velocity - &u_exact).amax() <= 1e-9, "velocity error");
        assert!((&sol.pressure - &p_exact).amax() <= 1e-9, "pressure error");
        assert!(sol.diagnostics.residual <= 1e-10);
        assert_eq!(sol.diagnostics.negative_pivots, sol.pressure.len());
    }

    #[test]
    fn s1_zero_data_gives_zero_solution() {
        let mesh = channel_mesh(3);
        let data = ProblemData {
            t_b: Some(TractionData::Field(vector_zero())),
            ..ProblemData::zero()
        };
        let sol = solve_s1(&mesh, &data).unwrap();
        assert!(sol.velocity.amax() <= 1e-12);
        assert!(sol.pressure.amax() <= 1e-12);
    }

    #[test]
    fn s1_requires_traction_data() {
        let mesh = channel_mesh(2);
        let err = solve_s1(&mesh, &ProblemData::zero()).unwrap_err();
        assert!(err.to_string().contains("t_b"));
    }

    #[test]
    fn all_gamma1_layout_is_rejected_at_mesh_level() {
        let layout = BcLayout::new(
            Marker::Gamma1,
            Marker::Gamma1,
            Marker::Gamma1,
            Marker::Gamma1,
        );
        let err = Mesh::unit_square(4, layout).unwrap_err();
        assert!(err.to_string().contains("Gamma2"));
    }

    #[test]
    fn s2_reproduces_poiseuille_variant() {
        let mesh = channel_mesh(4);
        let data = ProblemData {
            f: vector_zero(),
            div_f: None,
            t_b: None,
            g_b: None,
            p_b: Some(Arc::new(|x, _| 2.0 * (1.0 - x))),
        };
        let sol = solve_s2(&mesh, &data).unwrap();
        let u_exact = exact_velocity(&sol.velocity_space);
        let p_star: ScalarField = Arc::new(|x: f64, _| 2.0 * (1.0 - x));
        let p_exact = sol.pressure_space.interpolate_scalar(&p_star).unwrap();
        assert!((&sol.velocity - &u_exact).amax() <= 1e-9, "velocity error");
        assert!((&sol.pressure - &p_exact).amax() <= 1e-9, "pressure error");
    }

    #[test]
    fn s2_constant_boundary_pressure_gives_rest_state() {
        let mesh = channel_mesh(2);
        let data = ProblemData {
            f: vector_zero(),
            div_f: None,
            t_b: None,
            g_b: None,
            p_b: Some(scalar_const(3.25)),
        };
        let sol = solve_s2(&mesh, &data).unwrap();
        assert!(
            sol.velocity.amax() <= 1e-10,
            "velocity {}",
            sol.velocity.amax()
        );
        let p_err = sol
            .pressure
            .iter()
            .map(|p| (p - 3.25).abs())
            .fold(0.0, f64::max);
        assert!(p_err <= 1e-10, "pressure deviation {p_err}");
    }

    #[test]
    fn pp_matches_s1_on_exact_data() {
        let mesh = channel_mesh(4);
        let data = ms1_s1_data();
        let s1 = solve_s1(&mesh, &data).unwrap();
        let pp = solve_pp(&mesh, &data).unwrap();
        assert!((&s1.velocity - &pp.velocity).amax() <= 1e-9);
        assert!((&s1.pressure - &pp.pressure).amax() <= 1e-9);
    }

    #[test]
    fn pp_zero_poisson_data_reduces_to_traction_problem() {
        let mesh = channel_mesh(3);
        let data = ProblemData {
            f: vector_zero(),
            div_f: Some(scalar_zero()),
            t_b: Some(poiseuille_traction()),
            g_b: Some(scalar_zero()),
            p_b: Some(scalar_zero()),
        };
        let sol = solve_pp(&mesh, &data).unwrap();
        assert!(sol.pressure.amax() <= 1e-12, "pressure must vanish");
        assert!(sol.velocity.amax() > 1e-3, "velocity must not vanish");
    }

    #[test]
    fn discrete_solutions_are_divergence_free() {
        let mesh = channel_mesh(4);
        let s1 = solve_s1(&mesh, &ms1_s1_data()).unwrap();
        let c =
            assemble_matrix(FormKind::DivCouple, &s1.velocity_space, &s1.pressure_space).unwrap();
        assert!(c.mul_vec(&s1.velocity).amax() <= 1e-9);
        let data2 = ProblemData {
            f: vector_zero(),
            div_f: None,
            t_b: None,
            g_b: None,
            p_b: Some(Arc::new(|_, y| 1.0 + y)),
        };
        let s2 = solve_s2(&mesh, &data2).unwrap();
        assert!(c.mul_vec(&s2.velocity).amax() <= 1e-9);
    }

    #[test]
    fn solution_map_is_affine() {
        let mesh = channel_mesh(2);
        let f1 = vector_zero();
        let t1: VectorField = match poiseuille_traction() {
            TractionData::Field(t) => t,
            _ => unreachable!(),
        };
        let f2: VectorField = Arc::new(|x, y| (x * y, -y));
        let t2: VectorField = Arc::new(|_, y| (y, 1.0 - y));
        let make = |f: &VectorField, t: &VectorField| ProblemData {
            f: f.clone(),
            div_f: None,
            t_b: Some(TractionData::Field(t.clone())),
            g_b: None,
            p_b: None,
        };
        let s0 = solve_s1(&mesh, &make(&vector_zero(), &vector_zero())).unwrap();
        let s1 = solve_s1(&mesh, &make(&f1, &t1)).unwrap();
        let s2 = solve_s1(&mesh, &make(&f2, &t2)).unwrap();
        let s12 = solve_s1(
            &mesh,
            &make(
                &crate::field::vector_add(&f1, &f2),
                &crate::field::vector_add(&t1, &t2),
            ),
        )
        .unwrap();
        let udef = (&s12.velocity - &s1.velocity - &s2.velocity + &s0.velocity).amax();
        let pdef = (&s12.pressure - &s1.pressure - &s2.pressure + &s0.pressure).amax();
        assert!(udef <= 1e-10, "velocity affinity defect {udef}");
        assert!(pdef <= 1e-10, "pressure affinity defect {pdef}");
    }

    #[test]
    fn assembled_traction_matches_field_traction() {
        let mesh = channel_mesh(3);
        let field = match poiseuille_traction() {
            TractionData::Field(f) => f,
            _ => unreachable!(),
        };
        let velocity = FeSpace::new(mesh.clone(), SpaceKind::P2Vector);
        let assembled = assemble_functional(
            &FunctionalKind::TractionPair(Marker::Gamma2, field.clone()),
            &velocity,
        )
        .unwrap();
        let mut data = ms1_s1_data();
        data.t_b = Some(TractionData::Assembled(assembled));
        let via_vec = solve_s1(&mesh, &data).unwrap();
        let via_field = solve_s1(&mesh, &ms1_s1_data()).unwrap();
        assert!((&via_vec.velocity - &via_field.velocity).amax() <= 1e-12);
        assert!((&via_vec.pressure - &via_field.pressure).amax() <= 1e-12);
    }

    #[test]
    fn factor_solve_handles_identity_and_rejects_singular() {
        let id = SparseMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let b = CoeffVec::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(factor_solve(&id, &b).unwrap(), b);
        let sing = SparseMatrix::from_triplets(3, 3, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(
            factor_solve(&sing, &b).unwrap_err(),
            Error::Singular { .. }
        ));
    }

    #[test]
    fn constrained_dofs_are_bit_exact() {
        let mesh = channel_mesh(3);
        let sol = solve_s1(&mesh, &ms1_s1_data()).unwrap();
        let constraints =
            essential_constraints(&sol.velocity_space, &ConstraintKind::NoSlipGamma1).unwrap();
        for &(dof, v) in constraints.entries() {
            assert!(
                sol.velocity[dof].to_bits() == v.to_bits(),
                "dof {dof} not pinned"
            );
        }
    }
}
