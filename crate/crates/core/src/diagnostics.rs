//! Dense reference computations for small instances.

use nalgebra::{DMatrix, DVector};

use crate::assembly::BlockSystem;
use crate::condense::{CondensedSystem, DiscreteSolution};
use crate::error::{Error, Result};
use crate::krylov::SparseMatrix;
use crate::mesh::{Mesh, LOCAL_EDGES};
use crate::refelem::{make_basis, make_quadrature, BasisKind, RefDomain};
use crate::solutions::pressure_weights;
use crate::spaces::DofMap;

/// Largest system handled densely.
pub const DENSE_CAP: usize = 500;

fn check_cap(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        return Err(Error::SizeCap { n, cap: DENSE_CAP });
    }
    Ok(())
}

/// Dense LU solve of `a x = b`. With `constraint = Some(c)` the system is
/// bordered as `[[a, c], [c^T, 0]]` so that a one-dimensional kernel is
/// removed and `c . x = 0`.
pub fn dense_solve(a: &SparseMatrix, b: &[f64], constraint: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = a.nrows();
    check_cap(n)?;
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: b.len(),
        });
    }
    let m = n + usize::from(constraint.is_some());
    let mut d = DMatrix::zeros(m, m);
    for (i, j, v) in a.triplets() {
        d[(i, j)] += v;
    }
    let mut rhs = DVector::zeros(m);
    rhs.rows_mut(0, n).copy_from_slice(b);
    if let Some(c) = constraint {
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: c.len(),
            });
        }
        for (i, v) in c.iter().enumerate() {
            d[(i, n)] = *v;
            d[(n, i)] = *v;
        }
    }
    let x = d
        .full_piv_lu()
        .solve(&rhs)
        .ok_or_else(|| Error::Factorization {
            block: "dense",
            msg: "singular matrix".into(),
        })?;
    Ok(x.as_slice()[..n].to_vec())
}

/// Dense solve of the full block system (cell velocity kept) with the mean of
/// the cell pressure fixed to zero.
pub fn dense_solve_full(mesh: &Mesh, sys: &BlockSystem) -> Result<DiscreteSolution> {
    let (a, b) = sys.full_operator();
    let off = sys.full_offsets();
    let mut c = vec![0.0; a.nrows()];
    c[off[2]..off[3]].copy_from_slice(&pressure_weights(mesh, &sys.dofmap)?);
    DiscreteSolution::from_full(&sys.dofmap, &dense_solve(&a, &b, Some(&c))?)
}

/// Dense solve of the condensed system, zero mean cell pressure.
pub fn dense_solve_condensed(mesh: &Mesh, cs: &CondensedSystem) -> Result<Vec<f64>> {
    let d = &cs.dofmap;
    let mut c = vec![0.0; cs.dim()];
    for (i, w) in pressure_weights(mesh, d)?.into_iter().enumerate() {
        c[d.condensed_p(i)] = w;
    }
    dense_solve(&cs.matrix, &cs.rhs, Some(&c))
}

/// Gram matrices of `|||(v, vbar)|||_v` on `[u | free ubar]` and of
/// `|||(q, qbar)|||_p` on `[p | pbar]`, and the matrix of `b_h` between them.
pub struct NormMatrices {
    pub velocity: DMatrix<f64>,
    pub pressure: DMatrix<f64>,
    /// Rows `[p | pbar]`, columns `[u | free ubar]`.
    pub b: DMatrix<f64>,
}

pub fn norm_matrices(mesh: &Mesh, d: &DofMap, alpha: f64) -> Result<NormMatrices> {
    let nv = d.n_u() + d.n_ubar_free();
    let nq = d.n_p() + d.n_pbar();
    check_cap(nv.max(nq))?;
    let k = d.degree;
    let vb = make_basis(BasisKind::Triangle, k)?;
    let pb = make_basis(BasisKind::Triangle, k - 1)?;
    let fb = make_basis(BasisKind::Interval, k)?;
    let cell_rule = make_quadrature(RefDomain::Triangle, 2 * k)?;
    let facet_rule = make_quadrature(RefDomain::Interval, 2 * k)?;
    let (nk, nf) = (vb.dim(), k + 1);
    let mut v = DMatrix::zeros(nv, nv);
    let mut q = DMatrix::zeros(nq, nq);
    let mut b = DMatrix::zeros(nq, nv);
    let free = |i: usize| d.free_ubar_index(i).map(|j| d.n_u() + j);
    for cell in 0..mesh.num_cells() {
        let g = mesh.geometry(cell);
        let h = g.length_measure();
        let ur = d.cell_u_range(cell);
        let pr = d.cell_p_range(cell);
        for (xi, w) in cell_rule.points.iter().zip(&cell_rule.weights) {
            let w = w * g.det.abs();
            let grads: Vec<[f64; 2]> = vb
                .eval_grad(*xi)
                .into_iter()
                .map(|r| g.push_gradient(r))
                .collect();
            let pv = pb.eval(*xi);
            for c in 0..2 {
                for i in 0..nk {
                    for j in 0..nk {
                        let gij = grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1];
                        v[(ur.start + c * nk + i, ur.start + c * nk + j)] += w * gij;
                    }
                    for (a, pa) in pv.iter().enumerate() {
                        b[(pr.start + a, ur.start + c * nk + i)] -= w * pa * grads[i][c];
                    }
                }
            }
            for (a, pa) in pv.iter().enumerate() {
                for (bb, pbv) in pv.iter().enumerate() {
                    q[(pr.start + a, pr.start + bb)] += w * pa * pbv;
                }
            }
        }
        let ubar = d.cell_ubar(cell);
        let pbar = d.cell_pbar(cell);
        for e in 0..3 {
            let [a0, b0] = LOCAL_EDGES[e];
            let refv = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
            let n = g.normals[e];
            let aligned = mesh.edge_aligned(cell, e);
            for (s, w) in facet_rule.points.iter().zip(&facet_rule.weights) {
                let s = s[0];
                let w = w * g.edge_lengths[e];
                let xi = [
                    refv[a0][0] + s * (refv[b0][0] - refv[a0][0]),
                    refv[a0][1] + s * (refv[b0][1] - refv[a0][1]),
                ];
                let phi = vb.eval(xi);
                let psi = fb.eval([if aligned { s } else { 1.0 - s }, 0.0]);
                for c in 0..2 {
                    // (u - ubar) as a combination of local unknowns
                    let mut terms: Vec<(usize, f64)> =
                        (0..nk).map(|i| (ur.start + c * nk + i, phi[i])).collect();
                    for j in 0..nf {
                        if let Some(col) = free(ubar[e * 2 * nf + c * nf + j]) {
                            terms.push((col, -psi[j]));
                        }
                    }
                    for &(r1, a1) in &terms {
                        for &(r2, a2) in &terms {
                            v[(r1, r2)] += alpha / h * w * a1 * a2;
                        }
                    }
                    for j in 0..nf {
                        let row = d.n_p() + pbar[e * nf + j];
                        for i in 0..nk {
                            b[(row, ur.start + c * nk + i)] += w * phi[i] * n[c] * psi[j];
                        }
                    }
                }
                for i in 0..nf {
                    for j in 0..nf {
                        q[(d.n_p() + pbar[e * nf + i], d.n_p() + pbar[e * nf + j])] +=
                            h * w * psi[i] * psi[j];
                    }
                }
            }
        }
    }
    Ok(NormMatrices {
        velocity: v,
        pressure: q,
        b,
    })
}

/// Discrete inf-sup constant of `b_h`: the smallest value over pressures
/// orthogonal to constants of `sup_v b_h(q, v) / (|||v|||_v |||q|||_p)`.
pub fn infsup_probe(mesh: &Mesh, d: &DofMap, alpha: f64) -> Result<f64> {
    let nm = norm_matrices(mesh, d, alpha)?;
    let vchol = nm
        .velocity
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization {
            block: "velocity norm",
            msg: "not positive definite".into(),
        })?;
    let qchol = nm
        .pressure
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Factorization {
            block: "pressure norm",
            msg: "not positive definite".into(),
        })?;
    // B V^{-1} B^T, then congruence with the pressure Gram factor
    let m = &nm.b * vchol.solve(&nm.b.transpose());
    let l = qchol.l();
    let linv_m = l.solve_lower_triangular(&m).expect("triangular factor");
    let c = l
        .solve_lower_triangular(&linv_m.transpose())
        .expect("triangular factor");
    let c = 0.5 * (&c + c.transpose());
    let mut eig: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    // the constant pressure spans the kernel
    Ok(eig.get(1).copied().unwrap_or(0.0).max(0.0).sqrt())
}
