//! Legacy ASCII VTK output of a solution, sampled at mesh vertices.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::solvers::FieldSolution;

/// Render the mesh alone as a legacy VTK 2.0 unstructured grid: points,
/// cells and cell types, no attached data.
pub fn render_mesh_vtk(mesh: &crate::mesh::Mesh, title: &str) -> String {
    let nv = mesh.n_vertices();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 2.0\n");
    out.push_str(title);
    out.push('\n');
    out.push_str("ASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {nv} double");
    for v in 0..nv {
        let [x, y] = mesh.vertex(v);
        let _ = writeln!(out, "{x} {y} 0");
    }
    let nc = mesh.n_cells();
    let _ = writeln!(out, "CELLS {nc} {}", 4 * nc);
    for c in 0..nc {
        let [a, b, d] = mesh.cell(c);
        let _ = writeln!(out, "3 {a} {b} {d}");
    }
    let _ = writeln!(out, "CELL_TYPES {nc}");
    for _ in 0..nc {
        out.push_str("5\n");
    }
    out
}

/// Render the solution as a legacy VTK 2.0 unstructured grid. Velocity and
/// pressure are sampled at the mesh vertices (the quadratic midpoint values
/// are dropped); the plane is embedded at z = 0.
pub fn render_vtk(sol: &FieldSolution, title: &str) -> String {
    let mesh = sol.velocity_space.mesh();
    let nv = mesh.n_vertices();
    let mut out = render_mesh_vtk(mesh, title);
    let _ = writeln!(out, "POINT_DATA {nv}");
    out.push_str("VECTORS velocity double\n");
    for v in 0..nv {
        let ux = sol.velocity[sol.velocity_space.dof(v, 0)];
        let uy = sol.velocity[sol.velocity_space.dof(v, 1)];
        let _ = writeln!(out, "{ux} {uy} 0");
    }
    out.push_str("SCALARS pressure double 1\nLOOKUP_TABLE default\n");
    for v in 0..nv {
        let _ = writeln!(out, "{}", sol.pressure[v]);
    }
    out
}

/// Write the VTK file atomically.
pub fn write_vtk(path: &Path, sol: &FieldSolution, title: &str) -> Result<()> {
    crate::atomic_write(path, &render_vtk(sol, title))
}
