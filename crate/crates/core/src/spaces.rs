//! Global numbering of the four discrete fields: cell velocity `u`, cell
//! pressure `p`, facet velocity `ubar` and facet pressure `pbar`.
//!
//! Cell fields are discontinuous and numbered cell-major. Facet fields are
//! either discontinuous (one private set of `k + 1` nodes per facet) or
//! continuous on the mesh skeleton (vertex nodes shared between facets,
//! `k - 1` private interior nodes per facet). Facet nodes are equispaced and
//! ordered from the facet's lower global vertex to its higher one.
//!
//! The condensed unknown vector is `[ubar (free dofs only) | p | pbar]`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};
use crate::refelem::triangle_dim;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodVariant {
    #[serde(rename = "HDG")]
    Hdg,
    #[serde(rename = "EDG")]
    Edg,
    #[serde(rename = "EDG-HDG")]
    EdgHdg,
}

impl MethodVariant {
    pub const ALL: [MethodVariant; 3] = [
        MethodVariant::Hdg,
        MethodVariant::Edg,
        MethodVariant::EdgHdg,
    ];

    pub fn continuous_facet_velocity(self) -> bool {
        matches!(self, MethodVariant::Edg | MethodVariant::EdgHdg)
    }

    pub fn continuous_facet_pressure(self) -> bool {
        matches!(self, MethodVariant::Edg)
    }

    /// Normal velocity is continuous across facets for these variants.
    pub fn hdiv_conforming(self) -> bool {
        !self.continuous_facet_pressure()
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodVariant::Hdg => "HDG",
            MethodVariant::Edg => "EDG",
            MethodVariant::EdgHdg => "EDG-HDG",
        }
    }
}

impl fmt::Display for MethodVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "hdg" => Ok(MethodVariant::Hdg),
            "edg" => Ok(MethodVariant::Edg),
            "edghdg" => Ok(MethodVariant::EdgHdg),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method variant '{s}'"
            ))),
        }
    }
}

/// Numbering of one facet field.
#[derive(Debug, Clone)]
struct FacetNodes {
    /// `k + 1` node ids per facet, flattened.
    by_facet: Vec<usize>,
    count: usize,
}

impl FacetNodes {
    fn build(mesh: &Mesh, k: usize, continuous: bool) -> Self {
        let nf = mesh.num_facets();
        let mut by_facet = Vec::with_capacity(nf * (k + 1));
        if continuous {
            let nv = mesh.num_vertices();
            for (f, facet) in mesh.facets().iter().enumerate() {
                by_facet.push(facet.vertices[0]);
                by_facet.extend((1..k).map(|j| nv + f * (k - 1) + (j - 1)));
                by_facet.push(facet.vertices[1]);
            }
            Self {
                by_facet,
                count: nv + nf * (k - 1),
            }
        } else {
            by_facet.extend(0..nf * (k + 1));
            Self {
                by_facet,
                count: nf * (k + 1),
            }
        }
    }

    fn facet(&self, f: usize, k: usize) -> &[usize] {
        &self.by_facet[f * (k + 1)..(f + 1) * (k + 1)]
    }
}

#[derive(Debug, Clone)]
pub struct DofMap {
    pub variant: MethodVariant,
    pub degree: usize,
    n_cells: usize,
    velocity_nodes: FacetNodes,
    pressure_nodes: FacetNodes,
    velocity_node_coords: Vec<Point>,
    constrained_node: Vec<bool>,
    /// Condensed index of every facet-velocity dof, `None` when constrained.
    free_index: Vec<Option<usize>>,
    n_free: usize,
    cell_ubar: Vec<usize>,
    cell_pbar: Vec<usize>,
}

pub fn build_dofmap(mesh: &Mesh, k: usize, variant: MethodVariant) -> Result<DofMap> {
    if k == 0 {
        return Err(Error::InvalidArgument(
            "velocity degree must be at least 1 (cell pressure has degree k - 1)".into(),
        ));
    }
    if k > crate::refelem::MAX_BASIS_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "velocity degree {k} is not supported"
        )));
    }
    let velocity_nodes = FacetNodes::build(mesh, k, variant.continuous_facet_velocity());
    let pressure_nodes = FacetNodes::build(mesh, k, variant.continuous_facet_pressure());

    let mut coords = vec![[f64::NAN; 2]; velocity_nodes.count];
    let mut constrained = vec![false; velocity_nodes.count];
    for (f, facet) in mesh.facets().iter().enumerate() {
        let [a, b] = facet.vertices;
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        for (j, &node) in velocity_nodes.facet(f, k).iter().enumerate() {
            let t = j as f64 / k as f64;
            coords[node] = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            if facet.is_boundary() {
                constrained[node] = true;
            }
        }
    }
    // a boundary vertex pins a shared node even on interior facets
    if variant.continuous_facet_velocity() {
        for (v, on) in mesh.boundary_vertex_flags().into_iter().enumerate() {
            if on {
                constrained[v] = true;
            }
        }
    }
    let mut free_index = vec![None; 2 * velocity_nodes.count];
    let mut n_free = 0;
    for node in 0..velocity_nodes.count {
        if !constrained[node] {
            for c in 0..2 {
                free_index[2 * node + c] = Some(n_free);
                n_free += 1;
            }
        }
    }

    let mut cell_ubar = Vec::with_capacity(mesh.num_cells() * 6 * (k + 1));
    let mut cell_pbar = Vec::with_capacity(mesh.num_cells() * 3 * (k + 1));
    for cell in 0..mesh.num_cells() {
        for f in mesh.cell_facets(cell) {
            let vn = velocity_nodes.facet(f, k);
            for c in 0..2 {
                cell_ubar.extend(vn.iter().map(|&n| 2 * n + c));
            }
            cell_pbar.extend_from_slice(pressure_nodes.facet(f, k));
        }
    }

    Ok(DofMap {
        variant,
        degree: k,
        n_cells: mesh.num_cells(),
        velocity_nodes,
        pressure_nodes,
        velocity_node_coords: coords,
        constrained_node: constrained,
        free_index,
        n_free,
        cell_ubar,
        cell_pbar,
    })
}

impl DofMap {
    /// Scalar cell velocity basis size, `dim P_k`.
    pub fn cell_velocity_scalar_dim(&self) -> usize {
        triangle_dim(self.degree)
    }

    /// Cell velocity dofs per cell (both components).
    pub fn local_u(&self) -> usize {
        2 * triangle_dim(self.degree)
    }

    pub fn local_p(&self) -> usize {
        triangle_dim(self.degree - 1)
    }

    pub fn local_ubar(&self) -> usize {
        6 * (self.degree + 1)
    }

    pub fn local_pbar(&self) -> usize {
        3 * (self.degree + 1)
    }

    pub fn num_cells(&self) -> usize {
        self.n_cells
    }

    pub fn n_u(&self) -> usize {
        self.n_cells * self.local_u()
    }

    pub fn n_p(&self) -> usize {
        self.n_cells * self.local_p()
    }

    /// All facet-velocity dofs, constrained ones included.
    pub fn n_ubar(&self) -> usize {
        2 * self.velocity_nodes.count
    }

    pub fn n_pbar(&self) -> usize {
        self.pressure_nodes.count
    }

    pub fn n_ubar_free(&self) -> usize {
        self.n_free
    }

    pub fn n_constrained(&self) -> usize {
        self.n_ubar() - self.n_free
    }

    /// Size of the condensed system.
    pub fn n_condensed(&self) -> usize {
        self.n_free + self.n_p() + self.n_pbar()
    }

    /// Globally coupled unknowns counting constrained facet velocities too.
    pub fn n_global_with_constrained(&self) -> usize {
        self.n_ubar() + self.n_p() + self.n_pbar()
    }

    pub fn cell_u_range(&self, cell: usize) -> std::ops::Range<usize> {
        let n = self.local_u();
        cell * n..(cell + 1) * n
    }

    pub fn cell_p_range(&self, cell: usize) -> std::ops::Range<usize> {
        let n = self.local_p();
        cell * n..(cell + 1) * n
    }

    /// Facet-velocity dofs of a cell, ordered by local edge, then component,
    /// then facet node.
    pub fn cell_ubar(&self, cell: usize) -> &[usize] {
        let n = self.local_ubar();
        &self.cell_ubar[cell * n..(cell + 1) * n]
    }

    /// Facet-pressure dofs of a cell, ordered by local edge, then facet node.
    pub fn cell_pbar(&self, cell: usize) -> &[usize] {
        let n = self.local_pbar();
        &self.cell_pbar[cell * n..(cell + 1) * n]
    }

    pub fn facet_velocity_nodes(&self, facet: usize) -> &[usize] {
        self.velocity_nodes.facet(facet, self.degree)
    }

    pub fn facet_pressure_nodes(&self, facet: usize) -> &[usize] {
        self.pressure_nodes.facet(facet, self.degree)
    }

    pub fn velocity_node_coord(&self, node: usize) -> Point {
        self.velocity_node_coords[node]
    }

    pub fn is_constrained(&self, ubar_dof: usize) -> bool {
        self.constrained_node[ubar_dof / 2]
    }

    pub fn free_ubar_index(&self, ubar_dof: usize) -> Option<usize> {
        self.free_index[ubar_dof]
    }

    pub fn condensed_p(&self, p_dof: usize) -> usize {
        self.n_free + p_dof
    }

    pub fn condensed_pbar(&self, pbar_dof: usize) -> usize {
        self.n_free + self.n_p() + pbar_dof
    }

    /// Condensed indices of a cell's `[ubar | p | pbar]` unknowns in local
    /// order; constrained facet velocities map to `None`.
    pub fn cell_condensed(&self, cell: usize) -> Vec<Option<usize>> {
        let mut out = Vec::with_capacity(self.local_ubar() + self.local_p() + self.local_pbar());
        out.extend(self.cell_ubar(cell).iter().map(|&d| self.free_index[d]));
        out.extend(self.cell_p_range(cell).map(|d| Some(self.condensed_p(d))));
        out.extend(
            self.cell_pbar(cell)
                .iter()
                .map(|&d| Some(self.condensed_pbar(d))),
        );
        out
    }

    /// Unit vector spanning the constant-pressure kernel `(p, pbar) = (1, 1)`
    /// in condensed numbering.
    pub fn pressure_nullspace(&self) -> Vec<f64> {
        let n = self.n_condensed();
        let m = (self.n_p() + self.n_pbar()) as f64;
        let mut v = vec![0.0; n];
        for x in v[self.n_free..].iter_mut() {
            *x = 1.0 / m.sqrt();
        }
        v
    }

    /// Splits a condensed vector into its free `ubar`, `p` and `pbar` parts.
    pub fn split_condensed<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64], &'a [f64]) {
        let (ubar, rest) = x.split_at(self.n_free);
        let (p, pbar) = rest.split_at(self.n_p());
        (ubar, p, pbar)
    }
}

/// Facet-velocity vector holding the nodal interpolant of `g` on the
/// constrained (boundary) nodes and zero elsewhere.
pub fn interpolate_facet(g: impl Fn(Point) -> [f64; 2], dofmap: &DofMap) -> Vec<f64> {
    let mut out = vec![0.0; dofmap.n_ubar()];
    for node in 0..dofmap.velocity_nodes.count {
        if dofmap.constrained_node[node] {
            let v = g(dofmap.velocity_node_coords[node]);
            out[2 * node] = v[0];
            out[2 * node + 1] = v[1];
        }
    }
    out
}

/// Entity counts of a mesh, enough to predict dof counts without building a
/// map.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntityCounts {
    pub cells: usize,
    pub facets: usize,
    pub vertices: usize,
    pub boundary_facets: usize,
    pub boundary_vertices: usize,
}

impl EntityCounts {
    pub fn of(mesh: &Mesh) -> Self {
        Self {
            cells: mesh.num_cells(),
            facets: mesh.num_facets(),
            vertices: mesh.num_vertices(),
            boundary_facets: mesh.num_boundary_facets(),
            boundary_vertices: mesh.boundary_vertex_flags().iter().filter(|&&b| b).count(),
        }
    }
}

/// Predicted sizes of each global field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofCounts {
    pub n_u: usize,
    pub n_p: usize,
    pub n_ubar: usize,
    pub n_ubar_constrained: usize,
    pub n_pbar: usize,
}

impl DofCounts {
    pub fn predict(k: usize, variant: MethodVariant, e: EntityCounts) -> Self {
        let skeleton = |continuous: bool, facets: usize, vertices: usize| {
            if continuous {
                vertices + (k - 1) * facets
            } else {
                (k + 1) * facets
            }
        };
        let cv = variant.continuous_facet_velocity();
        Self {
            n_u: 2 * e.cells * triangle_dim(k),
            n_p: e.cells * triangle_dim(k - 1),
            n_ubar: 2 * skeleton(cv, e.facets, e.vertices),
            n_ubar_constrained: 2 * skeleton(cv, e.boundary_facets, e.boundary_vertices),
            n_pbar: skeleton(variant.continuous_facet_pressure(), e.facets, e.vertices),
        }
    }

    pub fn condensed(&self) -> usize {
        self.n_ubar - self.n_ubar_constrained + self.n_p + self.n_pbar
    }

    pub fn global_with_constrained(&self) -> usize {
        self.n_ubar + self.n_p + self.n_pbar
    }
}
