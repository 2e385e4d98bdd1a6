use nalgebra::DMatrix;

use super::{triangle_dim, QuadratureRule, RefDomain};
use crate::error::{Error, Result};
use crate::mesh::CellGeometry;

/// Highest polynomial degree with an equispaced nodal basis.
pub const MAX_BASIS_DEGREE: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    /// `P_k` on the reference triangle.
    Triangle,
    /// `P_k` on the reference interval, used for facet spaces.
    Interval,
}

/// Nodal Lagrange basis on equispaced nodes.
///
/// Triangle nodes are `(i/k, j/k)` for `i + j <= k`, ordered by `j` then `i`;
/// interval nodes are `j/k` in increasing order. Degree 0 places its single
/// node at the barycentre.
#[derive(Debug, Clone)]
pub struct ReferenceBasis {
    pub kind: BasisKind,
    pub degree: usize,
    pub nodes: Vec<[f64; 2]>,
    exponents: Vec<(usize, usize)>,
    /// Monomial coefficients of each basis function (column `i` for `phi_i`).
    coeffs: DMatrix<f64>,
}

/// Values and reference gradients, indexed `[point][function]`.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

/// Values and physical gradients at mapped quadrature points, with weights
/// already scaled by `|det J|`.
#[derive(Debug, Clone)]
pub struct PhysicalTabulation {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub grads: Vec<Vec<[f64; 2]>>,
}

pub fn make_basis(kind: BasisKind, degree: usize) -> Result<ReferenceBasis> {
    if degree > MAX_BASIS_DEGREE {
        return Err(Error::InvalidArgument(format!(
            "basis degree {degree} exceeds {MAX_BASIS_DEGREE}"
        )));
    }
    let k = degree;
    let (nodes, exponents): (Vec<[f64; 2]>, Vec<(usize, usize)>) = match kind {
        BasisKind::Triangle => {
            let nodes = if k == 0 {
                vec![[1.0 / 3.0, 1.0 / 3.0]]
            } else {
                (0..=k)
                    .flat_map(|j| {
                        (0..=k - j).map(move |i| [i as f64 / k as f64, j as f64 / k as f64])
                    })
                    .collect()
            };
            let exps = (0..=k)
                .flat_map(|d| (0..=d).map(move |b| (d - b, b)))
                .collect();
            (nodes, exps)
        }
        BasisKind::Interval => {
            let nodes = if k == 0 {
                vec![[0.5, 0.0]]
            } else {
                (0..=k).map(|j| [j as f64 / k as f64, 0.0]).collect()
            };
            ((nodes), (0..=k).map(|a| (a, 0)).collect())
        }
    };
    let n = nodes.len();
    debug_assert_eq!(n, exponents.len());
    let vandermonde = DMatrix::from_fn(n, n, |r, j| monomial(exponents[j], nodes[r]));
    let coeffs = vandermonde.try_inverse().ok_or_else(|| {
        Error::InvalidArgument(format!("singular Vandermonde matrix at degree {k}"))
    })?;
    Ok(ReferenceBasis {
        kind,
        degree,
        nodes,
        exponents,
        coeffs,
    })
}

fn monomial((a, b): (usize, usize), p: [f64; 2]) -> f64 {
    p[0].powi(a as i32) * p[1].powi(b as i32)
}

fn monomial_grad((a, b): (usize, usize), p: [f64; 2]) -> [f64; 2] {
    let dx = if a == 0 {
        0.0
    } else {
        a as f64 * p[0].powi(a as i32 - 1) * p[1].powi(b as i32)
    };
    let dy = if b == 0 {
        0.0
    } else {
        b as f64 * p[0].powi(a as i32) * p[1].powi(b as i32 - 1)
    };
    [dx, dy]
}

impl ReferenceBasis {
    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn expected_dim(kind: BasisKind, k: usize) -> usize {
        match kind {
            BasisKind::Triangle => triangle_dim(k),
            BasisKind::Interval => k + 1,
        }
    }

    pub fn eval(&self, p: [f64; 2]) -> Vec<f64> {
        let m: Vec<f64> = self.exponents.iter().map(|&e| monomial(e, p)).collect();
        (0..self.dim())
            .map(|i| (0..m.len()).map(|j| m[j] * self.coeffs[(j, i)]).sum())
            .collect()
    }

    /// Reference gradients; for the interval basis only component 0 is set.
    pub fn eval_grad(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        let m: Vec<[f64; 2]> = self
            .exponents
            .iter()
            .map(|&e| monomial_grad(e, p))
            .collect();
        (0..self.dim())
            .map(|i| {
                let mut g = [0.0; 2];
                for (j, mj) in m.iter().enumerate() {
                    g[0] += mj[0] * self.coeffs[(j, i)];
                    g[1] += mj[1] * self.coeffs[(j, i)];
                }
                g
            })
            .collect()
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> Tabulation {
        Tabulation {
            values: points.iter().map(|&p| self.eval(p)).collect(),
            grads: points.iter().map(|&p| self.eval_grad(p)).collect(),
        }
    }
}

/// Tabulates a triangle basis at the mapped points of `rule` on the cell
/// described by `geom`.
pub fn push_forward(
    basis: &ReferenceBasis,
    geom: &CellGeometry,
    rule: &QuadratureRule,
) -> Result<PhysicalTabulation> {
    if basis.kind != BasisKind::Triangle || rule.domain != RefDomain::Triangle {
        return Err(Error::InvalidArgument(
            "push_forward needs a triangle basis and rule".into(),
        ));
    }
    if !(geom.det.abs() > 0.0) || !geom.det.is_finite() {
        return Err(Error::SingularJacobian { det: geom.det });
    }
    let tab = basis.tabulate(&rule.points);
    Ok(PhysicalTabulation {
        points: rule.points.iter().map(|&p| geom.map(p)).collect(),
        weights: rule.weights.iter().map(|w| w * geom.det.abs()).collect(),
        values: tab.values,
        grads: tab
            .grads
            .iter()
            .map(|row| row.iter().map(|&g| geom.push_gradient(g)).collect())
            .collect(),
    })
}
