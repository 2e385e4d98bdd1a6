use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point, LOCAL_EDGES};
use crate::refelem::{
    make_basis, make_quadrature, BasisKind, QuadratureRule, RefDomain, ReferenceBasis, Tabulation,
};

const REF_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Bases, quadrature rules and tabulations shared by every cell for one
/// polynomial degree.
#[derive(Debug, Clone)]
pub struct ReferenceData {
    pub k: usize,
    pub velocity: ReferenceBasis,
    pub pressure: ReferenceBasis,
    pub facet: ReferenceBasis,
    pub cell_rule: QuadratureRule,
    pub load_rule: QuadratureRule,
    pub facet_rule: QuadratureRule,
    cell_tab: Tabulation,
    pressure_vals: Vec<Vec<f64>>,
    load_vals: Vec<Vec<f64>>,
    traces: Vec<Tabulation>,
    facet_fwd: Vec<Vec<f64>>,
    facet_rev: Vec<Vec<f64>>,
}

impl ReferenceData {
    /// Matrix integrals at degree `2k + 2`, loads at `2k + 4`.
    pub fn new(k: usize) -> Result<Self> {
        Self::with_degrees(k, 2 * k + 2, 2 * k + 4)
    }

    pub fn with_degrees(k: usize, matrix_degree: usize, load_degree: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument(
                "velocity degree must be at least 1".into(),
            ));
        }
        let velocity = make_basis(BasisKind::Triangle, k)?;
        let pressure = make_basis(BasisKind::Triangle, k - 1)?;
        let facet = make_basis(BasisKind::Interval, k)?;
        let cell_rule = make_quadrature(RefDomain::Triangle, matrix_degree)?;
        let load_rule = make_quadrature(RefDomain::Triangle, load_degree)?;
        let facet_rule = make_quadrature(RefDomain::Interval, matrix_degree)?;
        let cell_tab = velocity.tabulate(&cell_rule.points);
        let pressure_vals = pressure.tabulate(&cell_rule.points).values;
        let load_vals = velocity.tabulate(&load_rule.points).values;
        let traces = (0..3)
            .map(|e| velocity.tabulate(&edge_points(e, &facet_rule)))
            .collect();
        let facet_fwd = facet_rule
            .points
            .iter()
            .map(|p| facet.eval([p[0], 0.0]))
            .collect();
        let facet_rev = facet_rule
            .points
            .iter()
            .map(|p| facet.eval([1.0 - p[0], 0.0]))
            .collect();
        Ok(Self {
            k,
            velocity,
            pressure,
            facet,
            cell_rule,
            load_rule,
            facet_rule,
            cell_tab,
            pressure_vals,
            load_vals,
            traces,
            facet_fwd,
            facet_rev,
        })
    }

    pub fn nk(&self) -> usize {
        self.velocity.dim()
    }

    pub fn nf(&self) -> usize {
        self.k + 1
    }

    pub fn np(&self) -> usize {
        self.pressure.dim()
    }
}

/// Reference-triangle points of a facet rule laid along local edge `e`.
pub(crate) fn edge_points(e: usize, rule: &QuadratureRule) -> Vec<Point> {
    let [a, b] = LOCAL_EDGES[e];
    let (pa, pb) = (REF_VERTICES[a], REF_VERTICES[b]);
    rule.points
        .iter()
        .map(|s| {
            [
                pa[0] + s[0] * (pb[0] - pa[0]),
                pa[1] + s[0] * (pb[1] - pa[1]),
            ]
        })
        .collect()
}

/// Dense per-cell blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalBlocks {
    pub a_uu: DMatrix<f64>,
    pub a_ubar_u: DMatrix<f64>,
    pub a_ubar_ubar: DMatrix<f64>,
    pub b_pu: DMatrix<f64>,
    pub b_pbar_u: DMatrix<f64>,
    pub load: DVector<f64>,
}

impl LocalBlocks {
    pub fn n_u(&self) -> usize {
        self.a_uu.nrows()
    }

    /// Size of the local `[ubar | p | pbar]` vector.
    pub fn n_coupled(&self) -> usize {
        self.a_ubar_u.nrows() + self.b_pu.nrows() + self.b_pbar_u.nrows()
    }

    /// `Bk = [A_ubar_u; B_pu; B_pbar_u]`.
    pub fn coupling(&self) -> DMatrix<f64> {
        let (nb, np, nq) = (
            self.a_ubar_u.nrows(),
            self.b_pu.nrows(),
            self.b_pbar_u.nrows(),
        );
        let mut m = DMatrix::zeros(nb + np + nq, self.n_u());
        m.rows_mut(0, nb).copy_from(&self.a_ubar_u);
        m.rows_mut(nb, np).copy_from(&self.b_pu);
        m.rows_mut(nb + np, nq).copy_from(&self.b_pbar_u);
        m
    }

    /// `Ck = diag(A_ubar_ubar, 0, 0)`.
    pub fn facet_block(&self) -> DMatrix<f64> {
        let n = self.n_coupled();
        let nb = self.a_ubar_ubar.nrows();
        let mut m = DMatrix::zeros(n, n);
        m.view_mut((0, 0), (nb, nb)).copy_from(&self.a_ubar_ubar);
        m
    }
}

/// Per-cell geometric quantities in the form the kernels need.
struct CellData {
    h: f64,
    /// Physical gradients at the cell rule, `[q][i]`.
    grads: Vec<Vec<[f64; 2]>>,
    weights: Vec<f64>,
    edges: [EdgeData; 3],
}

struct EdgeData {
    normal: [f64; 2],
    /// Physical weights `omega_q * |e|`.
    weights: Vec<f64>,
    /// Normal derivatives of the cell basis, `[q][i]`.
    dn: Vec<Vec<f64>>,
    aligned: bool,
}

fn cell_data(mesh: &Mesh, cell: usize, rd: &ReferenceData) -> Result<CellData> {
    let geom = crate::mesh::CellGeometry::new(mesh.cell_vertices(cell)).map_err(|_| {
        Error::DegenerateCell {
            cell,
            area: crate::mesh::signed_area(mesh.cell_vertices(cell)),
        }
    })?;
    let grads = rd
        .cell_tab
        .grads
        .iter()
        .map(|row| row.iter().map(|&g| geom.push_gradient(g)).collect())
        .collect();
    let weights = rd
        .cell_rule
        .weights
        .iter()
        .map(|w| w * geom.det.abs())
        .collect();
    let edges = std::array::from_fn(|e| {
        let n = geom.normals[e];
        EdgeData {
            normal: n,
            weights: rd
                .facet_rule
                .weights
                .iter()
                .map(|w| w * geom.edge_lengths[e])
                .collect(),
            dn: rd.traces[e]
                .grads
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|&g| {
                            let p = geom.push_gradient(g);
                            p[0] * n[0] + p[1] * n[1]
                        })
                        .collect()
                })
                .collect(),
            aligned: mesh.edge_aligned(cell, e),
        }
    });
    Ok(CellData {
        h: geom.length_measure(),
        grads,
        weights,
        edges,
    })
}

fn check_params(nu: f64, alpha: f64) -> Result<()> {
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "viscosity must be positive, got {nu}"
        )));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "penalty must be non-negative, got {alpha}"
        )));
    }
    Ok(())
}

/// Blocks of `a_h` on one cell: `(A_uu, A_ubar_u, A_ubar_ubar)`.
pub fn assemble_local_a(
    mesh: &Mesh,
    cell: usize,
    rd: &ReferenceData,
    nu: f64,
    alpha: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    check_params(nu, alpha)?;
    let cd = cell_data(mesh, cell, rd)?;
    Ok(local_a(&cd, rd, nu, alpha))
}

fn local_a(
    cd: &CellData,
    rd: &ReferenceData,
    nu: f64,
    alpha: f64,
) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let (nk, nf) = (rd.nk(), rd.nf());
    let pen = nu * alpha / cd.h;
    // scalar blocks, expanded to two components afterwards
    let mut k = DMatrix::<f64>::zeros(nk, nk);
    for (q, w) in cd.weights.iter().enumerate() {
        let g = &cd.grads[q];
        for i in 0..nk {
            for j in 0..nk {
                k[(i, j)] += nu * w * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
            }
        }
    }
    let mut aub = Vec::with_capacity(3);
    let mut abb = Vec::with_capacity(3);
    for (e, ed) in cd.edges.iter().enumerate() {
        let mut m = DMatrix::<f64>::zeros(nf, nk);
        let mut c = DMatrix::<f64>::zeros(nf, nf);
        for (q, ds) in ed.weights.iter().enumerate() {
            let phi = &rd.traces[e].values[q];
            let dn = &ed.dn[q];
            let psi = if ed.aligned {
                &rd.facet_fwd[q]
            } else {
                &rd.facet_rev[q]
            };
            for i in 0..nk {
                for j in 0..nk {
                    k[(i, j)] +=
                        ds * (pen * phi[i] * phi[j] - nu * (phi[i] * dn[j] + dn[i] * phi[j]));
                }
            }
            for i in 0..nf {
                for j in 0..nk {
                    m[(i, j)] += ds * (-pen * psi[i] * phi[j] + nu * psi[i] * dn[j]);
                }
                for j in 0..nf {
                    c[(i, j)] += ds * pen * psi[i] * psi[j];
                }
            }
        }
        aub.push(m);
        abb.push(c);
    }
    let mut a_uu = DMatrix::zeros(2 * nk, 2 * nk);
    let mut a_ubar_u = DMatrix::zeros(6 * nf, 2 * nk);
    let mut a_ubar_ubar = DMatrix::zeros(6 * nf, 6 * nf);
    for c in 0..2 {
        a_uu.view_mut((c * nk, c * nk), (nk, nk)).copy_from(&k);
        for e in 0..3 {
            let r = e * 2 * nf + c * nf;
            a_ubar_u.view_mut((r, c * nk), (nf, nk)).copy_from(&aub[e]);
            a_ubar_ubar.view_mut((r, r), (nf, nf)).copy_from(&abb[e]);
        }
    }
    (a_uu, a_ubar_u, a_ubar_ubar)
}

/// Blocks of `b_h` on one cell: `(B_pu, B_pbar_u)`.
pub fn assemble_local_b(
    mesh: &Mesh,
    cell: usize,
    rd: &ReferenceData,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let cd = cell_data(mesh, cell, rd)?;
    Ok(local_b(&cd, rd))
}

fn local_b(cd: &CellData, rd: &ReferenceData) -> (DMatrix<f64>, DMatrix<f64>) {
    let (nk, nf, np) = (rd.nk(), rd.nf(), rd.np());
    let mut b_pu = DMatrix::zeros(np, 2 * nk);
    for (q, w) in cd.weights.iter().enumerate() {
        let g = &cd.grads[q];
        let pv = &rd.pressure_vals[q];
        for i in 0..np {
            for c in 0..2 {
                for j in 0..nk {
                    b_pu[(i, c * nk + j)] -= w * pv[i] * g[j][c];
                }
            }
        }
    }
    let mut b_pbar_u = DMatrix::zeros(3 * nf, 2 * nk);
    for (e, ed) in cd.edges.iter().enumerate() {
        for (q, ds) in ed.weights.iter().enumerate() {
            let phi = &rd.traces[e].values[q];
            let psi = if ed.aligned {
                &rd.facet_fwd[q]
            } else {
                &rd.facet_rev[q]
            };
            for i in 0..nf {
                for c in 0..2 {
                    for j in 0..nk {
                        b_pbar_u[(e * nf + i, c * nk + j)] += ds * phi[j] * ed.normal[c] * psi[i];
                    }
                }
            }
        }
    }
    (b_pu, b_pbar_u)
}

/// All blocks of one cell. `f` supplies the body force; the load vector is
/// zero without it.
pub fn assemble_local(
    mesh: &Mesh,
    cell: usize,
    rd: &ReferenceData,
    nu: f64,
    alpha: f64,
    f: Option<&(dyn Fn(Point) -> [f64; 2] + Sync)>,
) -> Result<LocalBlocks> {
    check_params(nu, alpha)?;
    let cd = cell_data(mesh, cell, rd)?;
    let (a_uu, a_ubar_u, a_ubar_ubar) = local_a(&cd, rd, nu, alpha);
    let (b_pu, b_pbar_u) = local_b(&cd, rd);
    let nk = rd.nk();
    let mut load = DVector::zeros(2 * nk);
    if let Some(f) = f {
        let geom = mesh.geometry(cell);
        for (q, (p, w)) in rd
            .load_rule
            .points
            .iter()
            .zip(&rd.load_rule.weights)
            .enumerate()
        {
            let fx = f(geom.map(*p));
            let w = w * geom.det.abs();
            for j in 0..nk {
                let phi = rd.load_vals[q][j];
                load[j] += w * fx[0] * phi;
                load[nk + j] += w * fx[1] * phi;
            }
        }
    }
    Ok(LocalBlocks {
        a_uu,
        a_ubar_u,
        a_ubar_ubar,
        b_pu,
        b_pbar_u,
        load,
    })
}
