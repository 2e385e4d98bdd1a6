use super::local::{assemble_local, LocalBlocks, ReferenceData};
use crate::error::{Error, Result};
use crate::krylov::SparseMatrix;
use crate::mesh::{Mesh, Point};
use crate::refelem::{make_quadrature, RefDomain};
use crate::spaces::{interpolate_facet, DofMap};

/// Block operator `[[A_uu, B^T], [B, C]]` stored as per-cell dense blocks,
/// together with the data of the right-hand side.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub dofmap: DofMap,
    pub nu: f64,
    pub alpha: f64,
    pub cells: Vec<LocalBlocks>,
    /// Facet-velocity vector holding the boundary values on constrained dofs.
    pub dirichlet: Vec<f64>,
    /// Facet-pressure load `int_F g.n qbar` on boundary facets.
    pub pbar_load: Vec<f64>,
}

/// Assembles all cell blocks for body force `f` and boundary velocity `g`.
///
/// Boundary data enters twice: its nodal interpolant fixes the constrained
/// facet velocities, and its normal flux loads the facet-pressure equations
/// so that `u_h . n` matches the data on the boundary. The flux load is
/// corrected by a constant multiple of the facet mass so that its total
/// vanishes, which keeps the system compatible with the constant-pressure
/// kernel when quadrature does not integrate `g.n` exactly.
pub fn assemble_global(
    mesh: &Mesh,
    dofmap: &DofMap,
    nu: f64,
    alpha: f64,
    f: &(dyn Fn(Point) -> [f64; 2] + Sync),
    g: &(dyn Fn(Point) -> [f64; 2] + Sync),
) -> Result<BlockSystem> {
    if dofmap.num_cells() != mesh.num_cells() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_cells(),
            got: dofmap.num_cells(),
        });
    }
    let rd = ReferenceData::new(dofmap.degree)?;
    let cells = (0..mesh.num_cells())
        .map(|c| assemble_local(mesh, c, &rd, nu, alpha, Some(f)))
        .collect::<Result<Vec<_>>>()?;
    let dirichlet = interpolate_facet(g, dofmap);
    let pbar_load = boundary_flux_load(mesh, dofmap, &rd, g)?;
    Ok(BlockSystem {
        dofmap: dofmap.clone(),
        nu,
        alpha,
        cells,
        dirichlet,
        pbar_load,
    })
}

fn boundary_flux_load(
    mesh: &Mesh,
    dofmap: &DofMap,
    rd: &ReferenceData,
    g: &(dyn Fn(Point) -> [f64; 2] + Sync),
) -> Result<Vec<f64>> {
    let k = dofmap.degree;
    let rule = make_quadrature(
        RefDomain::Interval,
        (2 * k + 8).min(crate::refelem::MAX_QUADRATURE_DEGREE),
    )?;
    let mut load = vec![0.0; dofmap.n_pbar()];
    let mut mass = vec![0.0; dofmap.n_pbar()];
    for (fi, facet) in mesh
        .facets()
        .iter()
        .enumerate()
        .filter(|(_, f)| f.is_boundary())
    {
        let [a, b] = facet.vertices;
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let n = mesh.facet_normal(fi);
        let len = mesh.facet_length(fi);
        let nodes = dofmap.facet_pressure_nodes(fi);
        for (s, w) in rule.points.iter().zip(&rule.weights) {
            let t = s[0];
            let x = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
            let gv = g(x);
            let flux = gv[0] * n[0] + gv[1] * n[1];
            let psi = rd.facet.eval([t, 0.0]);
            for (&node, v) in nodes.iter().zip(&psi) {
                load[node] += w * len * flux * v;
                mass[node] += w * len * v;
            }
        }
    }
    let total: f64 = load.iter().sum();
    let measure: f64 = mass.iter().sum();
    if measure > 0.0 {
        load.iter_mut()
            .zip(&mass)
            .for_each(|(l, m)| *l -= total * m / measure);
    }
    Ok(load)
}

impl BlockSystem {
    /// Layout of the full unknown vector `[u | ubar | p | pbar]`; `ubar`
    /// includes constrained dofs.
    pub fn full_offsets(&self) -> [usize; 4] {
        let d = &self.dofmap;
        let a = d.n_u();
        let b = a + d.n_ubar();
        let c = b + d.n_p();
        [0, a, b, c]
    }

    pub fn full_dim(&self) -> usize {
        self.full_offsets()[3] + self.dofmap.n_pbar()
    }

    /// Global index in the full layout of each entry of the local `[u | U]`
    /// vector of `cell`.
    pub fn full_local_indices(&self, cell: usize) -> Vec<usize> {
        let d = &self.dofmap;
        let [_, ob, op, oq] = self.full_offsets();
        let mut idx: Vec<usize> = d.cell_u_range(cell).collect();
        idx.extend(d.cell_ubar(cell).iter().map(|&i| ob + i));
        idx.extend(d.cell_p_range(cell).map(|i| op + i));
        idx.extend(d.cell_pbar(cell).iter().map(|&i| oq + i));
        idx
    }

    fn full_triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for (cell, b) in self.cells.iter().enumerate() {
            let idx = self.full_local_indices(cell);
            let nu = b.n_u();
            let bk = b.coupling();
            let ck = b.facet_block();
            for i in 0..nu {
                for j in 0..nu {
                    t.push((idx[i], idx[j], b.a_uu[(i, j)]));
                }
            }
            for r in 0..bk.nrows() {
                for j in 0..nu {
                    let v = bk[(r, j)];
                    if v != 0.0 {
                        t.push((idx[nu + r], idx[j], v));
                        t.push((idx[j], idx[nu + r], v));
                    }
                }
                for s in 0..ck.nrows() {
                    let v = ck[(r, s)];
                    if v != 0.0 {
                        t.push((idx[nu + r], idx[nu + s], v));
                    }
                }
            }
        }
        t
    }

    /// The assembled full operator without boundary conditions.
    pub fn full_operator_raw(&self) -> SparseMatrix {
        let n = self.full_dim();
        SparseMatrix::from_triplets(n, n, &self.full_triplets()).expect("indices from dofmap")
    }

    /// Full right-hand side `[L_u | 0 | 0 | pbar load]` before lifting.
    pub fn full_load(&self) -> Vec<f64> {
        let mut rhs = vec![0.0; self.full_dim()];
        for (cell, b) in self.cells.iter().enumerate() {
            for (i, g) in self.dofmap.cell_u_range(cell).enumerate() {
                rhs[g] = b.load[i];
            }
        }
        let oq = self.full_offsets()[3];
        rhs[oq..].copy_from_slice(&self.pbar_load);
        rhs
    }

    /// Full operator and right-hand side with constrained facet velocities
    /// imposed: their rows become identity rows and their columns are moved
    /// to the right-hand side, which keeps the operator symmetric.
    pub fn full_operator(&self) -> (SparseMatrix, Vec<f64>) {
        let n = self.full_dim();
        let ob = self.full_offsets()[1];
        let constrained: Vec<bool> = (0..n)
            .map(|i| i >= ob && i < ob + self.dofmap.n_ubar() && self.dofmap.is_constrained(i - ob))
            .collect();
        let mut rhs = self.full_load();
        let mut t = Vec::new();
        for (i, j, v) in self.full_triplets() {
            match (constrained[i], constrained[j]) {
                (false, false) => t.push((i, j, v)),
                (false, true) => rhs[i] -= v * self.dirichlet[j - ob],
                _ => {}
            }
        }
        for i in 0..n {
            if constrained[i] {
                t.push((i, i, 1.0));
                rhs[i] = self.dirichlet[i - ob];
            }
        }
        (
            SparseMatrix::from_triplets(n, n, &t).expect("indices from dofmap"),
            rhs,
        )
    }

    /// Sparse `B` with rows `[ubar | p | pbar]` (all facet velocities) and
    /// columns `u`.
    pub fn coupling_matrix(&self) -> SparseMatrix {
        let [_, ob, _, _] = self.full_offsets();
        let full = self.full_operator_raw();
        full.submatrix(ob..self.full_dim(), 0..ob)
    }

    /// Sparse `C = diag(A_ubar_ubar, 0, 0)`.
    pub fn facet_matrix(&self) -> SparseMatrix {
        let [_, ob, _, _] = self.full_offsets();
        let n = self.full_dim();
        self.full_operator_raw().submatrix(ob..n, ob..n)
    }
}
