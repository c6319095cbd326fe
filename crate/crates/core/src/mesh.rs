//! Structured triangulations of a rectangular channel.
//!
//! Nodes are numbered row by row, `node = j * (nx + 1) + i`, and each square
//! cell is split along its bottom-left to top-right diagonal into two
//! counter-clockwise triangles. Boundary edges are stored with the triangle
//! that owns them and the outward unit normal.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Which side of the rectangle a boundary edge lies on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryEdge {
    /// End points, ordered counter-clockwise with respect to `triangle`.
    pub nodes: [usize; 2],
    pub triangle: usize,
    pub normal: [f64; 2],
    pub side: Option<Side>,
}

impl BoundaryEdge {
    pub fn length(&self, mesh: &Mesh) -> f64 {
        distance(mesh.nodes[self.nodes[0]], mesh.nodes[self.nodes[1]])
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_edges: Vec<BoundaryEdge>,
    pub level: usize,
    /// Longest edge of each triangle.
    pub element_sizes: Vec<f64>,
    /// Maximum element size.
    pub h: f64,
    /// Quasi-uniformity ratio `h / min(h_e)`.
    pub quasi_uniformity: f64,
    edge_count: usize,
    on_boundary: Vec<bool>,
    extent: Option<(f64, f64)>,
}

impl Mesh {
    /// Builds a mesh from raw connectivity. Triangles must be counter-clockwise.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("mesh has no triangles".into()));
        }
        let mut element_sizes = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing node")));
            }
            let corners = tri.map(|n| nodes[n]);
            if signed_area(&corners) <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} is degenerate or clockwise"
                )));
            }
            element_sizes.push(element_size(&corners)?);
        }

        // Each undirected edge maps to the (triangle, local edge) pairs sharing it.
        let mut edges: HashMap<(usize, usize), Vec<(usize, [usize; 2])>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                edges.entry((a.min(b), a.max(b))).or_default().push((t, [a, b]));
            }
        }

        let mut boundary_edges = Vec::new();
        for owners in edges.values() {
            match owners.as_slice() {
                [(t, ab)] => {
                    let (pa, pb) = (nodes[ab[0]], nodes[ab[1]]);
                    let len = distance(pa, pb);
                    // Counter-clockwise traversal puts the exterior on the right.
                    let normal = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
                    boundary_edges.push(BoundaryEdge { nodes: *ab, triangle: *t, normal, side: None });
                }
                [_, _] => {}
                _ => {
                    return Err(Error::InvalidMesh(
                        "an edge is shared by more than two triangles".into(),
                    ))
                }
            }
        }
        boundary_edges.sort_by_key(|e| (e.triangle, e.nodes));

        let mut on_boundary = vec![false; nodes.len()];
        for e in &boundary_edges {
            on_boundary[e.nodes[0]] = true;
            on_boundary[e.nodes[1]] = true;
        }

        let h = element_sizes.iter().cloned().fold(0.0, f64::max);
        let h_min = element_sizes.iter().cloned().fold(f64::INFINITY, f64::min);
        Ok(Self {
            nodes,
            triangles,
            boundary_edges,
            level: 0,
            element_sizes,
            h,
            quasi_uniformity: h / h_min,
            edge_count: edges.len(),
            on_boundary,
            extent: None,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_count
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        self.on_boundary[node]
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&n| self.on_boundary[n])
    }

    /// `(L, H)` for meshes produced by [`generate_structured`].
    pub fn extent(&self) -> Option<(f64, f64)> {
        self.extent
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        self.triangles[t].map(|n| self.nodes[n])
    }

    pub fn area(&self, t: usize) -> f64 {
        signed_area(&self.corners(t))
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.area(t)).sum()
    }

    /// Writes the mesh and optional nodal fields as a legacy ASCII VTK file.
    pub fn to_vtk(&self, point_scalars: &[(&str, &[f64])], point_vectors: &[(&str, &[[f64; 2]])]) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# vtk DataFile Version 3.0");
        let _ = writeln!(out, "bvstokes mesh level {}", self.level);
        let _ = writeln!(out, "ASCII");
        let _ = writeln!(out, "DATASET UNSTRUCTURED_GRID");
        let _ = writeln!(out, "POINTS {} double", self.nodes.len());
        for p in &self.nodes {
            let _ = writeln!(out, "{:.16e} {:.16e} 0", p[0], p[1]);
        }
        let n_tri = self.triangles.len();
        let _ = writeln!(out, "CELLS {} {}", n_tri, 4 * n_tri);
        for t in &self.triangles {
            let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
        }
        let _ = writeln!(out, "CELL_TYPES {n_tri}");
        for _ in 0..n_tri {
            let _ = writeln!(out, "5");
        }
        if !point_scalars.is_empty() || !point_vectors.is_empty() {
            let _ = writeln!(out, "POINT_DATA {}", self.nodes.len());
        }
        for (name, values) in point_scalars {
            let _ = writeln!(out, "SCALARS {name} double 1");
            let _ = writeln!(out, "LOOKUP_TABLE default");
            for v in values.iter() {
                let _ = writeln!(out, "{v:.16e}");
            }
        }
        for (name, values) in point_vectors {
            let _ = writeln!(out, "VECTORS {name} double");
            for v in values.iter() {
                let _ = writeln!(out, "{:.16e} {:.16e} 0", v[0], v[1]);
            }
        }
        out
    }
}

/// Number of cell rows at a refinement level: `2 * 2^level`.
pub fn rows_at_level(level: usize) -> usize {
    2usize << level
}

/// Structured triangulation of `(0, length) x (0, height)` with square cells.
pub fn generate_structured(length: f64, height: f64, level: usize) -> Result<Mesh> {
    if !(length > 0.0 && height > 0.0 && length.is_finite() && height.is_finite()) {
        return Err(Error::InvalidMesh(format!(
            "channel dimensions must be positive, got {length} x {height}"
        )));
    }
    if level > 12 {
        return Err(Error::InvalidMesh(format!("refinement level {level} is too large")));
    }
    let ny = rows_at_level(level);
    let nx_real = length / height * ny as f64;
    let nx = nx_real.round();
    if nx < 1.0 || (nx - nx_real).abs() > 1e-9 * nx_real.max(1.0) {
        return Err(Error::InvalidMesh(format!(
            "aspect ratio {length}/{height} gives a non-integer column count {nx_real} for {ny} rows"
        )));
    }
    let nx = nx as usize;
    let dx = length / nx as f64;
    let dy = height / ny as f64;

    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // Snap the far walls so boundary coordinates are exact.
            let x = if i == nx { length } else { i as f64 * dx };
            let y = if j == ny { height } else { j as f64 * dy };
            nodes.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([n00, n10, n11]);
            triangles.push([n00, n11, n01]);
        }
    }

    let mut mesh = Mesh::new(nodes, triangles)?;
    mesh.level = level;
    mesh.extent = Some((length, height));
    let tol = 1e-12 * length.max(height);
    for edge in &mut mesh.boundary_edges {
        let mid = [
            0.5 * (mesh.nodes[edge.nodes[0]][0] + mesh.nodes[edge.nodes[1]][0]),
            0.5 * (mesh.nodes[edge.nodes[0]][1] + mesh.nodes[edge.nodes[1]][1]),
        ];
        edge.side = if mid[1].abs() < tol {
            Some(Side::Bottom)
        } else if (mid[1] - height).abs() < tol {
            Some(Side::Top)
        } else if mid[0].abs() < tol {
            Some(Side::Left)
        } else if (mid[0] - length).abs() < tol {
            Some(Side::Right)
        } else {
            None
        };
    }
    Ok(mesh)
}

/// Element size `h_e`, taken as the longest edge.
pub fn element_size(corners: &[Point; 3]) -> Result<f64> {
    let area = signed_area(corners);
    let longest = (0..3)
        .map(|k| distance(corners[k], corners[(k + 1) % 3]))
        .fold(0.0, f64::max);
    if area.abs() <= 1e-14 * longest * longest || longest == 0.0 {
        return Err(Error::DegenerateTriangle { area });
    }
    Ok(longest)
}

pub fn signed_area(c: &[Point; 3]) -> f64 {
    0.5 * ((c[1][0] - c[0][0]) * (c[2][1] - c[0][1]) - (c[2][0] - c[0][0]) * (c[1][1] - c[0][1]))
}

fn distance(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn centroid(c: &[Point; 3]) -> Point {
        [(c[0][0] + c[1][0] + c[2][0]) / 3.0, (c[0][1] + c[1][1] + c[2][1]) / 3.0]
    }

    #[test]
    fn level_zero_channel_counts() {
        let mesh = generate_structured(5.0, 1.0, 0).unwrap();
        // (n_x + 1)(n_y + 1) nodes and 2 n_x n_y triangles for 10 x 2 cells.
        assert_eq!(mesh.num_nodes(), 11 * 3);
        assert_eq!(mesh.num_triangles(), 40);
        assert_eq!(mesh.boundary_edges.len(), 2 * 10 + 2 * 2);
    }

    #[test]
    fn unit_square_is_quasi_uniform() {
        let mesh = generate_structured(1.0, 1.0, 0).unwrap();
        let first = mesh.element_sizes[0];
        assert!(mesh.element_sizes.iter().all(|&h| h == first));
        assert!((mesh.quasi_uniformity - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn areas_sum_to_channel_area() {
        let mesh = generate_structured(5.0, 1.0, 3).unwrap();
        assert!((mesh.total_area() - 5.0).abs() <= 5.0 * 1e-12);
    }

    #[test]
    fn element_size_examples() {
        let right = [[0.0, 0.0], [0.5, 0.0], [0.0, 0.5]];
        assert!((element_size(&right).unwrap() - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        let eq = [[0.0, 0.0], [1.0, 0.0], [0.5, 3f64.sqrt() / 2.0]];
        assert!((element_size(&eq).unwrap() - 1.0).abs() < 1e-15);
        for level in 0..4 {
            let mesh = generate_structured(5.0, 1.0, level).unwrap();
            let expected = 2f64.sqrt() / (2.0 * f64::from(1u32 << level));
            assert!((mesh.h - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let flat = [[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]];
        assert!(matches!(element_size(&flat), Err(Error::DegenerateTriangle { .. })));
        assert!(Mesh::new(flat.to_vec(), vec![[0, 1, 2]]).is_err());
    }

    #[test]
    fn non_integer_columns_rejected() {
        assert!(generate_structured(1.3, 1.0, 0).is_err());
        assert!(generate_structured(-1.0, 1.0, 0).is_err());
        assert!(generate_structured(2.5, 1.0, 0).is_ok());
    }

    #[test]
    fn refinement_halves_h() {
        let coarse = generate_structured(5.0, 1.0, 1).unwrap();
        let fine = generate_structured(5.0, 1.0, 2).unwrap();
        assert!((fine.h / coarse.h - 0.5).abs() < 1e-12);
    }

    #[test]
    fn topology_and_normals() {
        for level in 0..4 {
            let mesh = generate_structured(5.0, 1.0, level).unwrap();
            let euler = mesh.num_nodes() as i64 - mesh.num_edges() as i64 + mesh.num_triangles() as i64;
            assert_eq!(euler, 1);
            for t in 0..mesh.num_triangles() {
                assert!(mesh.area(t) > 0.0);
            }
            for e in &mesh.boundary_edges {
                let n = e.normal;
                assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-14);
                let c = centroid(&mesh.corners(e.triangle));
                let p = mesh.nodes[e.nodes[0]];
                assert!((p[0] - c[0]) * n[0] + (p[1] - c[1]) * n[1] > 0.0);
                let expected = match e.side.unwrap() {
                    Side::Left => [-1.0, 0.0],
                    Side::Right => [1.0, 0.0],
                    Side::Bottom => [0.0, -1.0],
                    Side::Top => [0.0, 1.0],
                };
                assert!((n[0] - expected[0]).abs() < 1e-14 && (n[1] - expected[1]).abs() < 1e-14);
            }
            for n in mesh.boundary_nodes() {
                let [x, y] = mesh.nodes[n];
                let on_wall = x.abs() < 1e-12 || (x - 5.0).abs() < 1e-12 || y.abs() < 1e-12 || (y - 1.0).abs() < 1e-12;
                assert!(on_wall);
            }
        }
    }

    #[test]
    fn interior_edges_shared_by_two_triangles() {
        let mesh = generate_structured(5.0, 1.0, 1).unwrap();
        // 3 edges per triangle: boundary edges counted once, interior twice.
        let interior = mesh.num_edges() - mesh.boundary_edges.len();
        assert_eq!(3 * mesh.num_triangles(), mesh.boundary_edges.len() + 2 * interior);
    }

    #[test]
    fn vtk_export_layout() {
        let mesh = generate_structured(1.0, 1.0, 0).unwrap();
        let p: Vec<f64> = (0..mesh.num_nodes()).map(|n| n as f64).collect();
        let vtk = mesh.to_vtk(&[("pressure", &p)], &[]);
        assert!(vtk.starts_with("# vtk DataFile Version 3.0"));
        assert!(vtk.contains("POINTS 9 double"));
        assert!(vtk.contains("CELLS 8 32"));
        assert!(vtk.contains("CELL_TYPES 8"));
        assert!(vtk.contains("POINT_DATA 9"));
    }
}
