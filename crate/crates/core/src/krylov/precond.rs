use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::sparse::{SparseColMat, Triplet};
use faer::{MatMut, Side};

use super::SparseMatrix;
use crate::error::{Error, Result};

pub trait Preconditioner {
    fn dim(&self) -> usize;
    /// Writes `z = P^{-1} r`.
    fn apply(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPreconditioner(pub usize);

impl Preconditioner for IdentityPreconditioner {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

/// Sparse Cholesky factorization of a symmetric positive definite matrix.
pub struct SparseCholesky {
    n: usize,
    llt: Option<Llt<usize, f64>>,
}

impl SparseCholesky {
    /// Factorizes `sign * m`, reading its lower triangle. `block` names the
    /// matrix in error messages.
    pub fn new(m: &SparseMatrix, sign: f64, block: &'static str) -> Result<Self> {
        let n = m.nrows();
        if n != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: m.ncols(),
            });
        }
        if n == 0 {
            return Ok(Self { n, llt: None });
        }
        let triplets: Vec<_> = m
            .triplets()
            .filter(|(i, j, _)| i >= j)
            .map(|(i, j, v)| Triplet::new(i, j, sign * v))
            .collect();
        let mat =
            SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &triplets).map_err(|e| {
                Error::Factorization {
                    block,
                    msg: format!("{e:?}"),
                }
            })?;
        let llt = mat
            .sp_cholesky(Side::Lower)
            .map_err(|e| Error::Factorization {
                block,
                msg: format!("{e:?}"),
            })?;
        Ok(Self { n, llt: Some(llt) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        if let Some(llt) = &self.llt {
            llt.solve_in_place(MatMut::from_column_major_slice_mut(x, self.n, 1));
        }
    }
}

/// Block symmetric Gauss-Seidel preconditioner
/// `P = (L + D) D^{-1} (L^T + D)` for a symmetric block matrix `S`, where
/// `L` is the strictly lower block triangle of `S` and `D_i = s_i S_ii` with
/// a sign `s_i` per block chosen so that every `D_i` is positive definite.
pub struct BlockSgsPreconditioner {
    offsets: Vec<usize>,
    diag: Vec<SparseCholesky>,
    /// `blocks[i][j]` is `S_ij` for `i != j`.
    blocks: Vec<Vec<Option<SparseMatrix>>>,
}

impl BlockSgsPreconditioner {
    /// `sizes` partitions the unknowns into contiguous blocks; `signs` gives
    /// the sign applied to each diagonal block before factorization.
    pub fn new(s: &SparseMatrix, sizes: &[usize], signs: &[f64]) -> Result<Self> {
        const NAMES: [&str; 4] = ["block 0", "block 1", "block 2", "block 3"];
        if sizes.len() != signs.len() || sizes.len() > NAMES.len() {
            return Err(Error::InvalidArgument(
                "one sign per block, at most four blocks".into(),
            ));
        }
        let mut offsets = vec![0];
        for &n in sizes {
            offsets.push(offsets.last().unwrap() + n);
        }
        if *offsets.last().unwrap() != s.nrows() {
            return Err(Error::DimensionMismatch {
                expected: s.nrows(),
                got: *offsets.last().unwrap(),
            });
        }
        let range = |i: usize| offsets[i]..offsets[i + 1];
        let nb = sizes.len();
        let mut diag = Vec::with_capacity(nb);
        for i in 0..nb {
            diag.push(SparseCholesky::new(
                &s.submatrix(range(i), range(i)),
                signs[i],
                NAMES[i],
            )?);
        }
        let blocks = (0..nb)
            .map(|i| {
                (0..nb)
                    .map(|j| {
                        if i == j {
                            return None;
                        }
                        let b = s.submatrix(range(i), range(j));
                        (b.nnz() > 0).then_some(b)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            offsets,
            diag,
            blocks,
        })
    }

    /// The standard choice for the condensed Stokes operator: facet velocity
    /// kept, both pressure blocks negated.
    pub fn for_condensed(
        s: &SparseMatrix,
        n_ubar: usize,
        n_p: usize,
        n_pbar: usize,
    ) -> Result<Self> {
        Self::new(s, &[n_ubar, n_p, n_pbar], &[1.0, -1.0, -1.0])
    }

    fn nblocks(&self) -> usize {
        self.diag.len()
    }

    fn off_diag_apply(
        &self,
        i: usize,
        js: impl Iterator<Item = usize>,
        x: &[f64],
        out: &mut [f64],
    ) {
        for j in js {
            if let Some(b) = &self.blocks[i][j] {
                let xj = &x[self.offsets[j]..self.offsets[j + 1]];
                for (r, o) in out.iter_mut().enumerate() {
                    let (c, v) = b.row(r);
                    *o -= c.iter().zip(v).map(|(&k, a)| a * xj[k]).sum::<f64>();
                }
            }
        }
    }
}

impl Preconditioner for BlockSgsPreconditioner {
    fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let nb = self.nblocks();
        let o = &self.offsets;
        // forward sweep: (L + D) y = r, y stored in z
        for i in 0..nb {
            let mut t = r[o[i]..o[i + 1]].to_vec();
            self.off_diag_apply(i, 0..i, z, &mut t);
            self.diag[i].solve_in_place(&mut t);
            z[o[i]..o[i + 1]].copy_from_slice(&t);
        }
        // backward sweep: (L^T + D) z = D y, i.e. z_i = y_i - D_i^{-1} sum_{j>i} S_ij z_j
        for i in (0..nb).rev() {
            let mut t = vec![0.0; o[i + 1] - o[i]];
            self.off_diag_apply(i, i + 1..nb, z, &mut t);
            if t.iter().any(|&v| v != 0.0) {
                self.diag[i].solve_in_place(&mut t);
                for (zi, ti) in z[o[i]..o[i + 1]].iter_mut().zip(&t) {
                    *zi += ti;
                }
            }
        }
    }
}
