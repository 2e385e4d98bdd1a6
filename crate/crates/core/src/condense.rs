//! Elimination of the cell velocity from the block system and its recovery
//! from the facet and pressure unknowns.

use std::path::Path;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::assembly::BlockSystem;
use crate::error::{Error, Result};
use crate::krylov::{write_vector_market, SparseMatrix};
use crate::spaces::DofMap;

/// All four discrete fields. `ubar` covers every facet-velocity dof,
/// constrained ones included.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSolution {
    pub u: Vec<f64>,
    pub ubar: Vec<f64>,
    pub p: Vec<f64>,
    pub pbar: Vec<f64>,
}

impl DiscreteSolution {
    pub fn zeros(d: &DofMap) -> Self {
        Self {
            u: vec![0.0; d.n_u()],
            ubar: vec![0.0; d.n_ubar()],
            p: vec![0.0; d.n_p()],
            pbar: vec![0.0; d.n_pbar()],
        }
    }

    /// Adds `c` to both pressure fields.
    pub fn shift_pressure(&mut self, c: f64) {
        self.p
            .iter_mut()
            .chain(self.pbar.iter_mut())
            .for_each(|x| *x += c);
    }

    /// Concatenation `[u | ubar | p | pbar]`.
    pub fn to_full(&self) -> Vec<f64> {
        [&self.u[..], &self.ubar, &self.p, &self.pbar].concat()
    }

    pub fn from_full(d: &DofMap, x: &[f64]) -> Result<Self> {
        let n = d.n_u() + d.n_ubar() + d.n_p() + d.n_pbar();
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let (u, rest) = x.split_at(d.n_u());
        let (ubar, rest) = rest.split_at(d.n_ubar());
        let (p, pbar) = rest.split_at(d.n_p());
        Ok(Self {
            u: u.to_vec(),
            ubar: ubar.to_vec(),
            p: p.to_vec(),
            pbar: pbar.to_vec(),
        })
    }
}

#[derive(Debug, Clone)]
struct CellElimination {
    /// `Bk^T`.
    bt: DMatrix<f64>,
    load: DVector<f64>,
    /// Orthonormal basis `Z` of the kernel of the cell divergence `Bp`.
    kernel: DMatrix<f64>,
    /// Factor of `Z^T A Z`.
    reduced: Cholesky<f64, Dyn>,
}

/// Columns spanning the null space of `bp` (full row rank, `m x n`, `m < n`).
fn null_basis(bp: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = bp.shape();
    let eig = SymmetricEigen::new(bp.transpose() * bp);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    DMatrix::from_fn(n, n - m, |r, c| eig.eigenvectors[(r, order[c])])
}

/// Condensed operator `S = C - B A^{-1} B^T` over `[free ubar | p | pbar]`
/// with its right-hand side, plus what back-substitution needs.
#[derive(Debug, Clone)]
pub struct CondensedSystem {
    pub matrix: SparseMatrix,
    pub rhs: Vec<f64>,
    pub dofmap: DofMap,
    dirichlet: Vec<f64>,
    cells: Vec<CellElimination>,
}

pub fn condense(sys: &BlockSystem) -> Result<CondensedSystem> {
    let d = &sys.dofmap;
    let n = d.n_condensed();
    let mut rhs = vec![0.0; n];
    let mut triplets = Vec::new();
    let mut cells = Vec::with_capacity(sys.cells.len());
    for (cell, b) in sys.cells.iter().enumerate() {
        let chol = Cholesky::new(b.a_uu.clone()).ok_or(Error::SingularCellBlock {
            cell,
            alpha: sys.alpha,
        })?;
        let bk = b.coupling();
        let bt = bk.transpose();
        let x = chol.solve(&bt);
        let s = b.facet_block() - &bk * &x;
        let local_rhs = -(&bk * chol.solve(&b.load));
        let idx = d.cell_condensed(cell);
        let ubar = d.cell_ubar(cell);
        for (r, gi) in idx.iter().enumerate() {
            let Some(i) = *gi else { continue };
            rhs[i] += local_rhs[r];
            for (c, gj) in idx.iter().enumerate() {
                match gj {
                    Some(j) => triplets.push((i, *j, s[(r, c)])),
                    // lifting of constrained facet velocities
                    None => rhs[i] -= s[(r, c)] * sys.dirichlet[ubar[c]],
                }
            }
        }
        let np = d.local_p();
        let kernel = null_basis(&bt.columns(d.local_ubar(), np).transpose());
        let reduced = Cholesky::new(kernel.transpose() * &b.a_uu * &kernel).ok_or(
            Error::SingularCellBlock {
                cell,
                alpha: sys.alpha,
            },
        )?;
        cells.push(CellElimination {
            bt,
            load: b.load.clone(),
            kernel,
            reduced,
        });
    }
    for (j, v) in sys.pbar_load.iter().enumerate() {
        rhs[d.condensed_pbar(j)] += v;
    }
    let matrix = SparseMatrix::from_triplets(n, n, &triplets)?;
    Ok(CondensedSystem {
        matrix,
        rhs,
        dofmap: d.clone(),
        dirichlet: sys.dirichlet.clone(),
        cells,
    })
}

impl CondensedSystem {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Block sizes `(free ubar, p, pbar)`.
    pub fn block_sizes(&self) -> [usize; 3] {
        let d = &self.dofmap;
        [d.n_ubar_free(), d.n_p(), d.n_pbar()]
    }

    /// Orthonormal basis of the constant-pressure kernel.
    pub fn nullspace(&self) -> Vec<Vec<f64>> {
        vec![self.dofmap.pressure_nullspace()]
    }

    /// Recovers all fields from a condensed solution vector.
    ///
    /// Facet unknowns and cell pressures are taken from `x`. The cell velocity
    /// is computed in the kernel of the local continuity rows `Bp`, so
    /// `div u_h` vanishes up to rounding even when `x` is an inexact iterate.
    pub fn back_substitute(&self, x: &[f64]) -> Result<DiscreteSolution> {
        let d = &self.dofmap;
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut sol = DiscreteSolution::zeros(d);
        sol.ubar.copy_from_slice(&self.dirichlet);
        for (i, v) in sol.ubar.iter_mut().enumerate() {
            if let Some(j) = d.free_ubar_index(i) {
                *v = x[j];
            }
        }
        let (_, p, pbar) = d.split_condensed(x);
        sol.p.copy_from_slice(p);
        sol.pbar.copy_from_slice(pbar);
        for (cell, e) in self.cells.iter().enumerate() {
            let local: Vec<f64> = d
                .cell_ubar(cell)
                .iter()
                .map(|&i| sol.ubar[i])
                .chain(d.cell_p_range(cell).map(|i| sol.p[i]))
                .chain(d.cell_pbar(cell).iter().map(|&i| sol.pbar[i]))
                .collect();
            let (nb, np) = (d.local_ubar(), d.local_p());
            let mut local = DVector::from_vec(local);
            local.rows_mut(nb, np).fill(0.0);
            let r = &e.load - &e.bt * local;
            let u = &e.kernel * e.reduced.solve(&(e.kernel.transpose() * &r));
            sol.u[d.cell_u_range(cell)].copy_from_slice(u.as_slice());
        }
        Ok(sol)
    }

    /// Writes `S` and the right-hand side as Matrix Market files in `dir`.
    pub fn write_matrix_market(&self, dir: impl AsRef<Path>, stem: &str) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        self.matrix
            .write_matrix_market(dir.join(format!("{stem}.mtx")))?;
        write_vector_market(&self.rhs, dir.join(format!("{stem}_rhs.mtx")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_global;
    use crate::mesh::{generate_rectangle, DiagonalPattern, Point};
    use crate::spaces::{build_dofmap, MethodVariant};

    fn zero(_: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    #[test]
    fn two_cell_hdg_dimension() {
        let mesh = generate_rectangle(0.0, 0.0, 1.0, 1.0, 1, 1, DiagonalPattern::Right).unwrap();
        let d = build_dofmap(&mesh, 1, MethodVariant::Hdg).unwrap();
        let c = condense(&assemble_global(&mesh, &d, 1.0, 6.0, &zero, &zero).unwrap()).unwrap();
        assert_eq!(c.dim(), 16);
    }

    #[test]
    fn condensed_operator_symmetric_with_pressure_kernel() {
        let mesh =
            generate_rectangle(0.0, 0.0, 1.0, 1.0, 3, 3, DiagonalPattern::Crisscross).unwrap();
        for v in MethodVariant::ALL {
            for k in 1..=3 {
                let d = build_dofmap(&mesh, k, v).unwrap();
                let alpha = crate::assembly::penalty_parameter(k, v);
                let c = condense(
                    &assemble_global(&mesh, &d, 1.0, alpha, &zero, &|x| [x[1], 0.0]).unwrap(),
                )
                .unwrap();
                assert!(c.matrix.symmetry_defect() < 1e-12);
                let n = &c.nullspace()[0];
                let sn = c.matrix.mul(n);
                assert!(sn
                    .iter()
                    .all(|x| x.abs() < 1e-10 * c.matrix.get(0, 0).abs().max(1.0)));
            }
        }
    }

    #[test]
    fn zero_data_gives_zero_velocity() {
        let mesh = generate_rectangle(0.0, 0.0, 1.0, 1.0, 2, 2, DiagonalPattern::Right).unwrap();
        let d = build_dofmap(&mesh, 2, MethodVariant::EdgHdg).unwrap();
        let c = condense(&assemble_global(&mesh, &d, 1.0, 16.0, &zero, &zero).unwrap()).unwrap();
        assert!(c.rhs.iter().all(|&x| x == 0.0));
        let s = c.back_substitute(&vec![0.0; c.dim()]).unwrap();
        assert!(s.u.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn tiny_penalty_reports_cell() {
        let mesh = generate_rectangle(0.0, 0.0, 1.0, 1.0, 1, 1, DiagonalPattern::Right).unwrap();
        let d = build_dofmap(&mesh, 2, MethodVariant::Hdg).unwrap();
        let sys = assemble_global(&mesh, &d, 1.0, 0.01, &zero, &zero).unwrap();
        match condense(&sys) {
            Err(Error::SingularCellBlock { cell, alpha }) => {
                assert_eq!(cell, 0);
                assert_eq!(alpha, 0.01);
            }
            other => panic!("{:?}", other.map(|c| c.dim())),
        }
    }

    #[test]
    fn matrix_market_export() {
        let mesh = generate_rectangle(0.0, 0.0, 1.0, 1.0, 1, 1, DiagonalPattern::Right).unwrap();
        let d = build_dofmap(&mesh, 1, MethodVariant::Hdg).unwrap();
        let c = condense(&assemble_global(&mesh, &d, 1.0, 6.0, &zero, &zero).unwrap()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        c.write_matrix_market(dir.path(), "s").unwrap();
        let back = SparseMatrix::read_matrix_market(dir.path().join("s.mtx")).unwrap();
        assert_eq!(back.nrows(), 16);
        assert!(dir.path().join("s_rhs.mtx").exists());
    }

    #[test]
    fn back_substitution_keeps_exact_cell_pressures_and_zero_divergence() {
        use crate::diagnostics::dense_solve_condensed;
        use crate::solutions::{conservation_norms, curl_case, ExactSolution};
        let mesh = generate_rectangle(0.0, 0.0, 1.0, 1.0, 3, 3, DiagonalPattern::Left).unwrap();
        let ex = curl_case(1e-6);
        let f = |x: Point| ex.forcing(x);
        let g = |x: Point| ex.velocity(x);
        for v in MethodVariant::ALL {
            let d = build_dofmap(&mesh, 2, v).unwrap();
            let alpha = crate::assembly::penalty_parameter(2, v);
            let c = condense(&assemble_global(&mesh, &d, ex.nu, alpha, &f, &g).unwrap()).unwrap();
            let x = dense_solve_condensed(&mesh, &c).unwrap();
            let s = c.back_substitute(&x).unwrap();
            let (_, xp, _) = d.split_condensed(&x);
            let scale = xp.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(s
                .p
                .iter()
                .zip(xp)
                .all(|(a, b)| (a - b).abs() <= 1e-9 * scale));
            // a perturbed iterate still yields a pointwise divergence-free field
            let noisy: Vec<f64> = x
                .iter()
                .enumerate()
                .map(|(i, v)| v + 1e-6 * ((i * 7919) % 13) as f64)
                .collect();
            let s = c.back_substitute(&noisy).unwrap();
            let (div, _) = conservation_norms(&mesh, &d, &s).unwrap();
            let umax = s.u.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!(div < 1e-13 * umax, "{v}: {div:e} (|u| {umax:e})");
        }
    }
}
