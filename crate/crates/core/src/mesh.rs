//! Conforming triangle meshes of the unit square with a two-part boundary.
//!
//! The boundary is split into two nonempty parts: `Gamma1` carries the
//! no-slip condition, `Gamma2` the traction / pressure condition. Corner
//! vertices belong to the closure of both parts; which condition wins there
//! is decided downstream when constraints are built.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Boundary part tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Marker {
    Gamma1,
    Gamma2,
}

impl Marker {
    pub fn index(self) -> usize {
        match self {
            Marker::Gamma1 => 1,
            Marker::Gamma2 => 2,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            1 => Ok(Marker::Gamma1),
            2 => Ok(Marker::Gamma2),
            _ => Err(Error::Parse(format!(
                "boundary marker must be 1 or 2, got {i}"
            ))),
        }
    }

    /// The other part.
    pub fn other(self) -> Self {
        match self {
            Marker::Gamma1 => Marker::Gamma2,
            Marker::Gamma2 => Marker::Gamma1,
        }
    }
}

/// Assignment of the four sides of the unit square to boundary parts.
///
/// Sides are listed in counterclockwise order starting at the bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BcLayout {
    pub bottom: Marker,
    pub right: Marker,
    pub top: Marker,
    pub left: Marker,
}

impl BcLayout {
    pub fn new(bottom: Marker, right: Marker, top: Marker, left: Marker) -> Self {
        BcLayout {
            bottom,
            right,
            top,
            left,
        }
    }

    /// Channel layout: no-slip walls at bottom and top, traction/pressure
    /// data on the left and right (flow through the square).
    pub fn channel() -> Self {
        BcLayout {
            bottom: Marker::Gamma1,
            right: Marker::Gamma2,
            top: Marker::Gamma1,
            left: Marker::Gamma2,
        }
    }

    pub fn sides(&self) -> [Marker; 4] {
        [self.bottom, self.right, self.top, self.left]
    }

    /// Both parts must be present somewhere on the boundary.
    pub fn validate(&self) -> Result<()> {
        let sides = self.sides();
        for m in [Marker::Gamma1, Marker::Gamma2] {
            if !sides.contains(&m) {
                return Err(Error::Config(format!(
                    "layout leaves Gamma{} empty; both boundary parts must be nonempty",
                    m.index()
                )));
            }
        }
        Ok(())
    }
}

/// Directed boundary edge `a -> b` (counterclockwise around the domain).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub a: usize,
    pub b: usize,
    pub marker: Marker,
}

/// Triangle mesh with edge adjacency.
///
/// Cells are counterclockwise vertex triples. Undirected edges are numbered
/// in first-encounter order over cells; `cell_edges[c][k]` is the global id
/// of the edge opposite-free local edge k of cell c, where local edges are
/// `(v0,v1)`, `(v1,v2)`, `(v2,v0)`.
#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    boundary: Vec<BoundaryEdge>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[usize; 3]>,
    boundary_edge_ids: Vec<usize>,
}

impl Mesh {
    /// Build a mesh from raw arrays, deriving adjacency and checking the
    /// structural invariants: positive cell areas, conforming edges, a
    /// boundary list that matches exactly the edges with one incident cell,
    /// and both markers nonempty.
    pub fn new(
        vertices: Vec<[f64; 2]>,
        cells: Vec<[usize; 3]>,
        boundary: Vec<BoundaryEdge>,
    ) -> Result<Self> {
        let nv = vertices.len();
        if nv < 3 || cells.is_empty() {
            return Err(Error::Config("mesh needs at least one triangle".into()));
        }
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                if v >= nv {
                    return Err(Error::Config(format!(
                        "cell {c} references vertex {v} >= {nv}"
                    )));
                }
            }
            let a = tri_area(&vertices, *cell);
            if a <= 0.0 {
                return Err(Error::Config(format!(
                    "cell {c} is degenerate or clockwise (signed area {a:.3e})"
                )));
            }
        }

        let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut edge_cells: Vec<u8> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for cell in &cells {
            let mut ids = [0usize; 3];
            for (k, (p, q)) in local_edges(*cell).into_iter().enumerate() {
                let key = (p.min(q), p.max(q));
                let id = *edge_ids.entry(key).or_insert_with(|| {
                    edges.push([key.0, key.1]);
                    edge_cells.push(0);
                    edges.len() - 1
                });
                if edge_cells[id] == 2 {
                    return Err(Error::Config(format!(
                        "edge ({},{}) has more than two incident cells",
                        key.0, key.1
                    )));
                }
                edge_cells[id] += 1;
                ids[k] = id;
            }
            cell_edges.push(ids);
        }

        let mut boundary_edge_ids = Vec::with_capacity(boundary.len());
        let mut seen = vec![false; edges.len()];
        for be in &boundary {
            let key = (be.a.min(be.b), be.a.max(be.b));
            let id = *edge_ids.get(&key).ok_or_else(|| {
                Error::Config(format!(
                    "boundary edge ({},{}) is not a cell edge",
                    be.a, be.b
                ))
            })?;
            if edge_cells[id] != 1 {
                return Err(Error::Config(format!(
                    "boundary edge ({},{}) is interior to the mesh",
                    be.a, be.b
                )));
            }
            if seen[id] {
                return Err(Error::Config(format!(
                    "boundary edge ({},{}) listed twice",
                    be.a, be.b
                )));
            }
            seen[id] = true;
            boundary_edge_ids.push(id);
        }
        for (id, &count) in edge_cells.iter().enumerate() {
            if count == 1 && !seen[id] {
                return Err(Error::Config(format!(
                    "edge ({},{}) lies on the boundary but carries no marker",
                    edges[id][0], edges[id][1]
                )));
            }
        }
        for m in [Marker::Gamma1, Marker::Gamma2] {
            if !boundary.iter().any(|be| be.marker == m) {
                return Err(Error::Config(format!(
                    "Gamma{} is empty; both boundary parts must be nonempty",
                    m.index()
                )));
            }
        }

        Ok(Mesh {
            vertices,
            cells,
            boundary,
            edges,
            cell_edges,
            boundary_edge_ids,
        })
    }

    /// Uniform right-diagonal triangulation of the unit square: `n x n`
    /// squares, each split along the diagonal from its lower-left to its
    /// upper-right corner, `2 n^2` cells in total.
    pub fn unit_square(n: usize, layout: BcLayout) -> Result<Self> {
        if n == 0 {
            return Err(Error::Config(
                "subdivision count n must be at least 1".into(),
            ));
        }
        layout.validate()?;
        let np = n + 1;
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity(np * np);
        for j in 0..np {
            for i in 0..np {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let vid = |i: usize, j: usize| j * np + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10) = (vid(i, j), vid(i + 1, j));
                let (v01, v11) = (vid(i, j + 1), vid(i + 1, j + 1));
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }
        // Counterclockwise boundary cycle starting at the origin corner.
        let mut boundary = Vec::with_capacity(4 * n);
        for i in 0..n {
            boundary.push(BoundaryEdge {
                a: vid(i, 0),
                b: vid(i + 1, 0),
                marker: layout.bottom,
            });
        }
        for j in 0..n {
            boundary.push(BoundaryEdge {
                a: vid(n, j),
                b: vid(n, j + 1),
                marker: layout.right,
            });
        }
        for i in (0..n).rev() {
            boundary.push(BoundaryEdge {
                a: vid(i + 1, n),
                b: vid(i, n),
                marker: layout.top,
            });
        }
        for j in (0..n).rev() {
            boundary.push(BoundaryEdge {
                a: vid(0, j + 1),
                b: vid(0, j),
                marker: layout.left,
            });
        }
        Mesh::new(vertices, cells, boundary)
    }

    /// Uniform refinement: every triangle is split into four using edge
    /// midpoints. Midpoint vertex ids are `old_vertex_count + edge_id`, so
    /// the refined mesh has `V + E` vertices. Boundary markers are inherited
    /// by the two halves of each boundary edge.
    pub fn refine_uniform(&self) -> Mesh {
        let nv = self.vertices.len();
        let mut vertices = self.vertices.clone();
        for e in &self.edges {
            let [a, b] = *e;
            vertices.push([
                0.5 * (self.vertices[a][0] + self.vertices[b][0]),
                0.5 * (self.vertices[a][1] + self.vertices[b][1]),
            ]);
        }
        let mut cells = Vec::with_capacity(4 * self.cells.len());
        for (c, cell) in self.cells.iter().enumerate() {
            let [a, b, d] = *cell;
            let [mab, mbd, mda] = self.cell_edges[c].map(|e| nv + e);
            cells.push([a, mab, mda]);
            cells.push([mab, b, mbd]);
            cells.push([mda, mbd, d]);
            cells.push([mab, mbd, mda]);
        }
        let mut boundary = Vec::with_capacity(2 * self.boundary.len());
        for (k, be) in self.boundary.iter().enumerate() {
            let m = nv + self.boundary_edge_ids[k];
            boundary.push(BoundaryEdge {
                a: be.a,
                b: m,
                marker: be.marker,
            });
            boundary.push(BoundaryEdge {
                a: m,
                b: be.b,
                marker: be.marker,
            });
        }
        Mesh::new(vertices, cells, boundary).expect("refinement preserves mesh invariants")
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }

    pub fn cell(&self, c: usize) -> [usize; 3] {
        self.cells[c]
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edge(&self, e: usize) -> [usize; 2] {
        self.edges[e]
    }

    /// Global edge ids of cell `c`, local edges `(v0,v1)`, `(v1,v2)`, `(v2,v0)`.
    pub fn cell_edge_ids(&self, c: usize) -> [usize; 3] {
        self.cell_edges[c]
    }

    pub fn boundary(&self) -> &[BoundaryEdge] {
        &self.boundary
    }

    /// Global edge id of boundary edge `k` (index into [`Mesh::boundary`]).
    pub fn boundary_edge_id(&self, k: usize) -> usize {
        self.boundary_edge_ids[k]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        tri_area(&self.vertices, self.cells[c])
    }

    /// Mesh spacing: the longest edge.
    pub fn h_max(&self) -> f64 {
        self.edges
            .iter()
            .map(|&[a, b]| dist(self.vertices[a], self.vertices[b]))
            .fold(0.0, f64::max)
    }

    /// Total length of one boundary part.
    pub fn boundary_length(&self, marker: Marker) -> f64 {
        self.boundary
            .iter()
            .filter(|be| be.marker == marker)
            .map(|be| dist(self.vertices[be.a], self.vertices[be.b]))
            .sum()
    }

    /// Boundary edges ordered into counterclockwise cycles.
    ///
    /// Returns indices into [`Mesh::boundary`]. Each cycle starts at the
    /// edge whose start vertex has the smallest id, so the order is stable
    /// across runs.
    pub fn boundary_cycles(&self) -> Vec<Vec<usize>> {
        let mut next: HashMap<usize, usize> = HashMap::new();
        for (k, be) in self.boundary.iter().enumerate() {
            next.insert(be.a, k);
        }
        let mut used = vec![false; self.boundary.len()];
        let mut cycles = Vec::new();
        while let Some(start) = (0..self.boundary.len())
            .filter(|&k| !used[k])
            .min_by_key(|&k| self.boundary[k].a)
        {
            let mut cycle = Vec::new();
            let mut k = start;
            loop {
                used[k] = true;
                cycle.push(k);
                k = match next.get(&self.boundary[k].b) {
                    Some(&k2) if !used[k2] => k2,
                    _ => break,
                };
            }
            cycles.push(cycle);
        }
        cycles
    }

    /// Outward unit normal of boundary edge `k`.
    ///
    /// Boundary edges run counterclockwise around the domain, so the outward
    /// normal is the tangent rotated clockwise by a quarter turn.
    pub fn boundary_normal(&self, k: usize) -> [f64; 2] {
        let be = &self.boundary[k];
        let p = self.vertices[be.a];
        let q = self.vertices[be.b];
        let len = dist(p, q);
        [(q[1] - p[1]) / len, -(q[0] - p[0]) / len]
    }

    /// Serialize in the `mesh2d v1` text format.
    pub fn write_text(&self) -> String {
        let mut out = String::new();
        out.push_str("mesh2d v1\n");
        let _ = writeln!(out, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(out, "{} {}", v[0], v[1]);
        }
        let _ = writeln!(out, "cells {}", self.cells.len());
        for c in &self.cells {
            let _ = writeln!(out, "{} {} {}", c[0], c[1], c[2]);
        }
        let _ = writeln!(out, "boundary {}", self.boundary.len());
        for be in &self.boundary {
            let _ = writeln!(out, "{} {} {}", be.a, be.b, be.marker.index());
        }
        out
    }

    /// Parse the `mesh2d v1` text format and validate the mesh.
    pub fn read_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty mesh file".into()))?;
        if header != "mesh2d v1" {
            return Err(Error::Parse(format!(
                "expected header 'mesh2d v1', got '{header}'"
            )));
        }
        let count = |line: Option<&str>, section: &str| -> Result<usize> {
            let line = line.ok_or_else(|| Error::Parse(format!("missing '{section}' section")))?;
            let rest = line
                .strip_prefix(section)
                .ok_or_else(|| Error::Parse(format!("expected '{section} N', got '{line}'")))?;
            rest.trim()
                .parse()
                .map_err(|_| Error::Parse(format!("bad count in '{line}'")))
        };
        let nv = count(lines.next(), "vertices")?;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated vertex list".into()))?;
            let mut it = line.split_whitespace();
            let x: f64 = parse_num(it.next(), line)?;
            let y: f64 = parse_num(it.next(), line)?;
            vertices.push([x, y]);
        }
        let nc = count(lines.next(), "cells")?;
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated cell list".into()))?;
            let mut it = line.split_whitespace();
            cells.push([
                parse_num::<usize>(it.next(), line)?,
                parse_num::<usize>(it.next(), line)?,
                parse_num::<usize>(it.next(), line)?,
            ]);
        }
        let nb = count(lines.next(), "boundary")?;
        let mut boundary = Vec::with_capacity(nb);
        for _ in 0..nb {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse("truncated boundary list".into()))?;
            let mut it = line.split_whitespace();
            let a = parse_num::<usize>(it.next(), line)?;
            let b = parse_num::<usize>(it.next(), line)?;
            let m = parse_num::<usize>(it.next(), line)?;
            boundary.push(BoundaryEdge {
                a,
                b,
                marker: Marker::from_index(m)?,
            });
        }
        Mesh::new(vertices, cells, boundary)
    }
}

fn parse_num<T: std::str::FromStr>(tok: Option<&str>, line: &str) -> Result<T> {
    tok.and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Parse(format!("malformed line '{line}'")))
}

fn local_edges(cell: [usize; 3]) -> [(usize, usize); 3] {
    let [a, b, c] = cell;
    [(a, b), (b, c), (c, a)]
}

fn tri_area(vertices: &[[f64; 2]], cell: [usize; 3]) -> f64 {
    let [a, b, c] = cell.map(|v| vertices[v]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}
