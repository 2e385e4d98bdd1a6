//! Conforming triangulations of polygonal domains.
//!
//! Cells are stored counterclockwise. Local edge `i` of a cell is the edge
//! opposite local vertex `i`, i.e. `(v1, v2)`, `(v2, v0)`, `(v0, v1)`.
//! Facets are stored once with their vertex pair sorted by global index; the
//! adjacent cell with the lower index is the `plus` side and its outward
//! normal is the facet normal.

mod generate;
mod gmsh;
mod refine;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use generate::{generate_l_shape, generate_l_shape_with, generate_rectangle, DiagonalPattern};
pub use gmsh::{load_gmsh, parse_gmsh, write_gmsh};

pub type Point = [f64; 2];

/// Local vertex pairs of the three edges; edge `i` is opposite vertex `i`.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[1, 2], [2, 0], [0, 1]];

/// One side of a facet: the cell and the local edge index within that cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetSide {
    pub cell: usize,
    pub local: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    /// Sorted global vertex indices; facet bases are parametrized from
    /// `vertices[0]` to `vertices[1]`.
    pub vertices: [usize; 2],
    pub plus: FacetSide,
    pub minus: Option<FacetSide>,
    /// Boundary label; always 0 on interior facets.
    pub tag: i32,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    facets: Vec<Facet>,
    cell_facets: Vec<[usize; 3]>,
}

/// Affine geometry of one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub origin: Point,
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    /// `jacobian^{-T}`, maps reference gradients to physical gradients.
    pub inv_transpose: [[f64; 2]; 2],
    pub det: f64,
    pub area: f64,
    /// Cell diameter (longest edge).
    pub h: f64,
    pub edge_lengths: [f64; 3],
    pub normals: [[f64; 2]; 3],
}

impl CellGeometry {
    pub fn new(v: [Point; 3]) -> Result<Self> {
        let j = [
            [v[1][0] - v[0][0], v[2][0] - v[0][0]],
            [v[1][1] - v[0][1], v[2][1] - v[0][1]],
        ];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        let mut edge_lengths = [0.0; 3];
        let mut normals = [[0.0; 2]; 3];
        for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
            let t = [v[*b][0] - v[*a][0], v[*b][1] - v[*a][1]];
            let len = t[0].hypot(t[1]);
            edge_lengths[e] = len;
            // counterclockwise cell: outward normal is the tangent rotated clockwise
            normals[e] = [t[1] / len, -t[0] / len];
        }
        let h = edge_lengths.iter().cloned().fold(0.0, f64::max);
        if !(det > 1e-14 * h * h) {
            return Err(Error::SingularJacobian { det });
        }
        let inv_transpose = [
            [j[1][1] / det, -j[1][0] / det],
            [-j[0][1] / det, j[0][0] / det],
        ];
        Ok(Self {
            origin: v[0],
            jacobian: j,
            inv_transpose,
            det,
            area: 0.5 * det,
            h,
            edge_lengths,
            normals,
        })
    }

    /// `sqrt(2 |K|)`, the length scale of the penalty and of the discrete
    /// norms. It equals the grid spacing on structured right-triangle meshes.
    pub fn length_measure(&self) -> f64 {
        (2.0 * self.area).sqrt()
    }

    /// Maps reference coordinates to physical coordinates.
    pub fn map(&self, xi: Point) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xi[0] + j[0][1] * xi[1],
            self.origin[1] + j[1][0] * xi[0] + j[1][1] * xi[1],
        ]
    }

    /// Maps a reference gradient to the physical gradient.
    pub fn push_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let m = &self.inv_transpose;
        [
            m[0][0] * g[0] + m[0][1] * g[1],
            m[1][0] * g[0] + m[1][1] * g[1],
        ]
    }
}

impl Mesh {
    /// Builds facet connectivity from counterclockwise cells. `tag_of` labels
    /// each boundary facet given its sorted vertex pair.
    pub fn from_cells(
        vertices: Vec<Point>,
        cells: Vec<[usize; 3]>,
        mut tag_of: impl FnMut([usize; 2]) -> i32,
    ) -> Result<Self> {
        for (c, cell) in cells.iter().enumerate() {
            if cell.iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!(
                    "cell {c} references a missing vertex"
                )));
            }
            let area = signed_area([vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]]);
            if !(area > 0.0) {
                return Err(Error::DegenerateCell { cell: c, area });
            }
        }
        let mut index: HashMap<[usize; 2], usize> = HashMap::with_capacity(cells.len() * 2);
        let mut facets: Vec<Facet> = Vec::with_capacity(cells.len() * 2);
        let mut cell_facets = vec![[0usize; 3]; cells.len()];
        for (c, cell) in cells.iter().enumerate() {
            for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (va, vb) = (cell[*a], cell[*b]);
                let key = [va.min(vb), va.max(vb)];
                let side = FacetSide { cell: c, local: e };
                match index.get(&key) {
                    Some(&f) => {
                        let facet = &mut facets[f];
                        if facet.minus.is_some() {
                            return Err(Error::NonConforming(format!(
                                "edge ({}, {}) is shared by more than two cells",
                                key[0], key[1]
                            )));
                        }
                        facet.minus = Some(side);
                        cell_facets[c][e] = f;
                    }
                    None => {
                        index.insert(key, facets.len());
                        cell_facets[c][e] = facets.len();
                        facets.push(Facet {
                            vertices: key,
                            plus: side,
                            minus: None,
                            tag: 0,
                        });
                    }
                }
            }
        }
        for f in facets.iter_mut().filter(|f| f.minus.is_none()) {
            f.tag = tag_of(f.vertices);
        }
        Ok(Self {
            vertices,
            cells,
            facets,
            cell_facets,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    /// Facet index of each local edge of `cell`.
    pub fn cell_facets(&self, cell: usize) -> [usize; 3] {
        self.cell_facets[cell]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn num_boundary_facets(&self) -> usize {
        self.facets.iter().filter(|f| f.is_boundary()).count()
    }

    pub fn cell_vertices(&self, cell: usize) -> [Point; 3] {
        let c = self.cells[cell];
        [
            self.vertices[c[0]],
            self.vertices[c[1]],
            self.vertices[c[2]],
        ]
    }

    pub fn geometry(&self, cell: usize) -> CellGeometry {
        // cells are validated on construction
        CellGeometry::new(self.cell_vertices(cell)).expect("cell validated at construction")
    }

    /// Whether the facet vertex order agrees with the counterclockwise
    /// traversal of `cell`'s local edge.
    pub fn edge_aligned(&self, cell: usize, local: usize) -> bool {
        let [a, _] = LOCAL_EDGES[local];
        self.cells[cell][a] == self.facets[self.cell_facets[cell][local]].vertices[0]
    }

    /// Outward unit normal of the facet as seen from its plus cell.
    pub fn facet_normal(&self, facet: usize) -> [f64; 2] {
        let side = self.facets[facet].plus;
        self.geometry(side.cell).normals[side.local]
    }

    pub fn facet_length(&self, facet: usize) -> f64 {
        let [a, b] = self.facets[facet].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        (pb[0] - pa[0]).hypot(pb[1] - pa[1])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_cells()).map(|c| self.geometry(c).area).sum()
    }

    pub fn h_max(&self) -> f64 {
        (0..self.num_cells())
            .map(|c| self.geometry(c).h)
            .fold(0.0, f64::max)
    }

    /// Vertices lying on the domain boundary.
    pub fn boundary_vertex_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.vertices.len()];
        for f in self.facets.iter().filter(|f| f.is_boundary()) {
            flags[f.vertices[0]] = true;
            flags[f.vertices[1]] = true;
        }
        flags
    }

    /// Rejects meshes where a vertex lies in the interior of a boundary
    /// facet, which is how a hanging node shows up after facet matching.
    pub fn check_conforming(&self) -> Result<()> {
        let on_boundary = self.boundary_vertex_flags();
        let candidates: Vec<usize> = (0..self.vertices.len())
            .filter(|&v| on_boundary[v])
            .collect();
        for f in self.facets.iter().filter(|f| f.is_boundary()) {
            let [a, b] = f.vertices;
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let t = [pb[0] - pa[0], pb[1] - pa[1]];
            let len2 = t[0] * t[0] + t[1] * t[1];
            for &v in &candidates {
                if v == a || v == b {
                    continue;
                }
                let p = self.vertices[v];
                let d = [p[0] - pa[0], p[1] - pa[1]];
                let s = (d[0] * t[0] + d[1] * t[1]) / len2;
                let cross = d[0] * t[1] - d[1] * t[0];
                if s > 1e-12 && s < 1.0 - 1e-12 && cross.abs() <= 1e-10 * len2 {
                    return Err(Error::NonConforming(format!(
                        "vertex {v} hangs on facet ({a}, {b})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Each triangle split into four congruent children through its edge
    /// midpoints. Boundary tags are inherited by the child facets.
    pub fn uniform_refine(&self) -> Mesh {
        refine::uniform_refine(self)
    }

    pub fn to_json(&self) -> MeshDump {
        MeshDump {
            vertices: self.vertices.clone(),
            cells: self.cells.clone(),
            boundary_tags: self
                .facets
                .iter()
                .filter(|f| f.is_boundary())
                .map(|f| (f.vertices[0], f.vertices[1], f.tag))
                .collect(),
        }
    }

    pub fn from_json(dump: MeshDump) -> Result<Mesh> {
        let tags: HashMap<[usize; 2], i32> = dump
            .boundary_tags
            .iter()
            .map(|&(a, b, t)| ([a.min(b), a.max(b)], t))
            .collect();
        Mesh::from_cells(dump.vertices, dump.cells, |k| {
            tags.get(&k).copied().unwrap_or(0)
        })
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer(file, &self.to_json())?;
        Ok(())
    }
}

/// Native mesh dump: boundary facets are stored as `[a, b, tag]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeshDump {
    pub vertices: Vec<Point>,
    pub cells: Vec<[usize; 3]>,
    pub boundary_tags: Vec<(usize, usize, i32)>,
}

pub fn signed_area(v: [Point; 3]) -> f64 {
    0.5 * ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_square() -> Mesh {
        generate_rectangle(0.0, 0.0, 1.0, 1.0, 1, 1, DiagonalPattern::Right).unwrap()
    }

    #[test]
    fn two_cell_square_connectivity() {
        let m = unit_square();
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_facets(), 5);
        assert_eq!(m.num_boundary_facets(), 4);
        let interior: Vec<_> = m.facets().iter().filter(|f| !f.is_boundary()).collect();
        assert_eq!(interior.len(), 1);
        assert_eq!(interior[0].plus.cell, 0);
        assert_eq!(interior[0].minus.unwrap().cell, 1);
    }

    #[test]
    fn geometry_invariants() {
        let m =
            generate_rectangle(-0.5, -0.5, 1.0, 1.5, 3, 5, DiagonalPattern::Crisscross).unwrap();
        for c in 0..m.num_cells() {
            let g = m.geometry(c);
            assert!(g.h > 0.0);
            assert!((g.det.abs() - 2.0 * g.area).abs() < 1e-14);
            for n in g.normals {
                assert!((n[0].hypot(n[1]) - 1.0).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn interior_normals_antiparallel() {
        let m = generate_rectangle(0.0, 0.0, 2.0, 1.0, 4, 3, DiagonalPattern::Crisscross).unwrap();
        for f in m.facets().iter().filter(|f| !f.is_boundary()) {
            let np = m.geometry(f.plus.cell).normals[f.plus.local];
            let minus = f.minus.unwrap();
            let nm = m.geometry(minus.cell).normals[minus.local];
            assert!((np[0] + nm[0]).abs() < 1e-12 && (np[1] + nm[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_inverted_cell() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let err = Mesh::from_cells(v, vec![[0, 2, 1]], |_| 0).unwrap_err();
        assert!(matches!(err, Error::DegenerateCell { cell: 0, .. }));
    }

    #[test]
    fn detects_hanging_node() {
        // one big triangle on the left, two small ones on the right sharing a
        // midpoint of the big triangle's right edge
        let v = vec![
            [0.0, 0.0],
            [1.0, 0.0],
            [1.0, 1.0],
            [1.0, 0.5],
            [2.0, 0.0],
            [2.0, 1.0],
        ];
        let cells = vec![[0, 1, 2], [1, 4, 3], [3, 4, 5], [3, 5, 2]];
        let m = Mesh::from_cells(v, cells, |_| 0).unwrap();
        assert!(matches!(m.check_conforming(), Err(Error::NonConforming(_))));
        unit_square().check_conforming().unwrap();
    }

    #[test]
    fn json_round_trip() {
        let m = generate_l_shape(2).unwrap();
        let text = serde_json::to_string(&m.to_json()).unwrap();
        let back = Mesh::from_json(serde_json::from_str(&text).unwrap()).unwrap();
        assert_eq!(back.cells(), m.cells());
        assert_eq!(back.facets(), m.facets());
    }
}
