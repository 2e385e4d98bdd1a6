use serde::{Deserialize, Serialize};

use crate::condense::DiscreteSolution;
use crate::error::{Error, Result};
use crate::mesh::{CellGeometry, Mesh, Point, LOCAL_EDGES};
use crate::refelem::{
    make_basis, make_quadrature, BasisKind, QuadratureRule, RefDomain, ReferenceBasis,
};
use crate::spaces::DofMap;

use super::ExactSolution;

const REF_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
/// Levels of graded subdivision around a singular vertex.
const SINGULAR_DEPTH: usize = 16;

/// Discretization errors of one solve. Norms are square roots of the summed
/// squares.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub err_u: f64,
    pub err_p: f64,
    /// `||div u_h||` over the domain.
    pub div_norm: f64,
    /// Normal-velocity jump over interior facets.
    pub jump_norm: f64,
    /// Broken `H^1` norm of `u_h`, the scale for `div_norm`.
    pub u_h1: f64,
    pub triple_v: f64,
    pub triple_vprime: f64,
    pub triple_p: f64,
    pub h_max: f64,
}

/// `log2(coarse / fine)`, the observed order under one uniform refinement.
pub fn convergence_rate(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

struct Evaluator<'a> {
    mesh: &'a Mesh,
    dofmap: &'a DofMap,
    sol: &'a DiscreteSolution,
    velocity: ReferenceBasis,
    pressure: ReferenceBasis,
    facet: ReferenceBasis,
    cell_rule: QuadratureRule,
    facet_rule: QuadratureRule,
}

#[derive(Default)]
struct Sums {
    u: f64,
    p: f64,
    div: f64,
    grad: f64,
    h1: f64,
    penalty: f64,
    flux: f64,
    pbar: f64,
    jump: f64,
}

fn check_sizes(d: &DofMap, s: &DiscreteSolution) -> Result<()> {
    for (expected, got) in [
        (d.n_u(), s.u.len()),
        (d.n_ubar(), s.ubar.len()),
        (d.n_p(), s.p.len()),
        (d.n_pbar(), s.pbar.len()),
    ] {
        if expected != got {
            return Err(Error::DimensionMismatch { expected, got });
        }
    }
    Ok(())
}

fn edge_point(e: usize, s: f64) -> Point {
    let [a, b] = LOCAL_EDGES[e];
    let (pa, pb) = (REF_VERTICES[a], REF_VERTICES[b]);
    [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
}

/// Reference points and weights (reference measure) of a rule refined
/// geometrically towards reference vertex `v`.
fn graded_rule(rule: &QuadratureRule, v: usize) -> Vec<(Point, f64)> {
    let mid = |a: Point, b: Point| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])];
    let mut out = Vec::new();
    let mut tri = [
        REF_VERTICES[v],
        REF_VERTICES[(v + 1) % 3],
        REF_VERTICES[(v + 2) % 3],
    ];
    let mut push = |t: [Point; 3]| {
        let j = [
            [t[1][0] - t[0][0], t[2][0] - t[0][0]],
            [t[1][1] - t[0][1], t[2][1] - t[0][1]],
        ];
        let det = (j[0][0] * j[1][1] - j[0][1] * j[1][0]).abs();
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            out.push((
                [
                    t[0][0] + j[0][0] * p[0] + j[0][1] * p[1],
                    t[0][1] + j[1][0] * p[0] + j[1][1] * p[1],
                ],
                w * det,
            ));
        }
    };
    for level in 0..=SINGULAR_DEPTH {
        let [a, b, c] = tri;
        let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
        if level == SINGULAR_DEPTH {
            push(tri);
            break;
        }
        push([ab, b, bc]);
        push([ca, bc, c]);
        push([ab, bc, ca]);
        tri = [a, ab, ca];
    }
    out
}

impl<'a> Evaluator<'a> {
    fn new(mesh: &'a Mesh, dofmap: &'a DofMap, sol: &'a DiscreteSolution) -> Result<Self> {
        check_sizes(dofmap, sol)?;
        let k = dofmap.degree;
        Ok(Self {
            mesh,
            dofmap,
            sol,
            velocity: make_basis(BasisKind::Triangle, k)?,
            pressure: make_basis(BasisKind::Triangle, k - 1)?,
            facet: make_basis(BasisKind::Interval, k)?,
            cell_rule: make_quadrature(RefDomain::Triangle, 2 * k + 4)?,
            facet_rule: make_quadrature(RefDomain::Interval, 2 * k + 4)?,
        })
    }

    /// `u_h` and its physical gradient at reference point `xi` of `cell`.
    fn velocity(&self, cell: usize, geom: &CellGeometry, xi: Point) -> ([f64; 2], [[f64; 2]; 2]) {
        let nk = self.velocity.dim();
        let r = self.dofmap.cell_u_range(cell);
        let coef = &self.sol.u[r];
        let vals = self.velocity.eval(xi);
        let grads = self.velocity.eval_grad(xi);
        let mut u = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for j in 0..nk {
            let pg = geom.push_gradient(grads[j]);
            for c in 0..2 {
                let a = coef[c * nk + j];
                u[c] += a * vals[j];
                g[c][0] += a * pg[0];
                g[c][1] += a * pg[1];
            }
        }
        (u, g)
    }

    fn pressure(&self, cell: usize, xi: Point) -> f64 {
        let coef = &self.sol.p[self.dofmap.cell_p_range(cell)];
        self.pressure
            .eval(xi)
            .iter()
            .zip(coef)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Facet unknowns on local edge `e` at edge parameter `s`.
    fn facet_values(&self, cell: usize, e: usize, s: f64) -> ([f64; 2], f64) {
        let nf = self.dofmap.degree + 1;
        let t = if self.mesh.edge_aligned(cell, e) {
            s
        } else {
            1.0 - s
        };
        let psi = self.facet.eval([t, 0.0]);
        let ub = &self.dofmap.cell_ubar(cell)[e * 2 * nf..(e + 1) * 2 * nf];
        let pb = &self.dofmap.cell_pbar(cell)[e * nf..(e + 1) * nf];
        let mut u = [0.0; 2];
        let mut p = 0.0;
        for j in 0..nf {
            u[0] += psi[j] * self.sol.ubar[ub[j]];
            u[1] += psi[j] * self.sol.ubar[ub[nf + j]];
            p += psi[j] * self.sol.pbar[pb[j]];
        }
        (u, p)
    }

    fn cell_points(&self, cell: usize, exact: Option<&dyn ExactSolution>) -> Vec<(Point, f64)> {
        let sing = exact.and_then(|e| e.singular_point());
        let verts = self.mesh.cell_vertices(cell);
        let hit = sing.and_then(|s| {
            verts
                .iter()
                .position(|v| (v[0] - s[0]).hypot(v[1] - s[1]) < 1e-12)
        });
        match hit {
            Some(v) => graded_rule(&self.cell_rule, v),
            None => self
                .cell_rule
                .points
                .iter()
                .copied()
                .zip(self.cell_rule.weights.iter().copied())
                .collect(),
        }
    }

    fn accumulate(&self, exact: Option<&dyn ExactSolution>, alpha: f64) -> Result<Sums> {
        let mut s = Sums::default();
        for cell in 0..self.mesh.num_cells() {
            let geom = self.mesh.geometry(cell);
            let det = geom.det.abs();
            for (xi, w) in self.cell_points(cell, exact) {
                let w = w * det;
                let x = geom.map(xi);
                let (u, g) = self.velocity(cell, &geom, xi);
                let p = self.pressure(cell, xi);
                let (ue, ge, pe) = match exact {
                    Some(ex) => (ex.velocity(x), ex.velocity_gradient(x), ex.pressure(x)?),
                    None => ([0.0; 2], [[0.0; 2]; 2], 0.0),
                };
                s.u += w * ((ue[0] - u[0]).powi(2) + (ue[1] - u[1]).powi(2));
                s.p += w * (pe - p).powi(2);
                s.div += w * (g[0][0] + g[1][1]).powi(2);
                let mut gg = 0.0;
                for i in 0..2 {
                    for j in 0..2 {
                        s.h1 += w * g[i][j].powi(2);
                        gg += (ge[i][j] - g[i][j]).powi(2);
                    }
                }
                s.h1 += w * (u[0] * u[0] + u[1] * u[1]);
                s.grad += w * gg;
            }
            let h = geom.length_measure();
            for e in 0..3 {
                let n = geom.normals[e];
                let len = geom.edge_lengths[e];
                for (t, w) in self.facet_rule.points.iter().zip(&self.facet_rule.weights) {
                    let xi = edge_point(e, t[0]);
                    let x = geom.map(xi);
                    let w = w * len;
                    let (u, g) = self.velocity(cell, &geom, xi);
                    let (ub, pb) = self.facet_values(cell, e, t[0]);
                    let (ge, pe) = match exact {
                        Some(ex) => (ex.velocity_gradient(x), ex.pressure(x)?),
                        None => ([[0.0; 2]; 2], 0.0),
                    };
                    s.penalty += alpha / h * w * ((u[0] - ub[0]).powi(2) + (u[1] - ub[1]).powi(2));
                    let dn = |c: usize| (ge[c][0] - g[c][0]) * n[0] + (ge[c][1] - g[c][1]) * n[1];
                    s.flux += h / alpha * w * (dn(0).powi(2) + dn(1).powi(2));
                    s.pbar += h * w * (pe - pb).powi(2);
                }
            }
        }
        s.jump = self.normal_jump();
        Ok(s)
    }

    /// `sum_F int_F [[u_h . n]]^2` over interior facets.
    fn normal_jump(&self) -> f64 {
        let mut total = 0.0;
        for (f, facet) in self.mesh.facets().iter().enumerate() {
            let Some(minus) = facet.minus else { continue };
            let n = self.mesh.facet_normal(f);
            let len = self.mesh.facet_length(f);
            let sides = [facet.plus, minus];
            let geoms = sides.map(|sd| self.mesh.geometry(sd.cell));
            for (t, w) in self.facet_rule.points.iter().zip(&self.facet_rule.weights) {
                let mut jump = 0.0;
                for (i, sd) in sides.iter().enumerate() {
                    // edge parameter runs along the cell's own traversal
                    let s = if self.mesh.edge_aligned(sd.cell, sd.local) {
                        t[0]
                    } else {
                        1.0 - t[0]
                    };
                    let (u, _) = self.velocity(sd.cell, &geoms[i], edge_point(sd.local, s));
                    let sign = if i == 0 { 1.0 } else { -1.0 };
                    jump += sign * (u[0] * n[0] + u[1] * n[1]);
                }
                total += w * len * jump * jump;
            }
        }
        total
    }
}

/// Errors of `sol` against `exact`; `alpha` weighs the facet terms of the
/// triple norms.
pub fn error_norms(
    mesh: &Mesh,
    dofmap: &DofMap,
    sol: &DiscreteSolution,
    exact: &dyn ExactSolution,
    alpha: f64,
) -> Result<ErrorReport> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "penalty must be positive, got {alpha}"
        )));
    }
    let s = Evaluator::new(mesh, dofmap, sol)?.accumulate(Some(exact), alpha)?;
    Ok(ErrorReport {
        err_u: s.u.sqrt(),
        err_p: s.p.sqrt(),
        div_norm: s.div.sqrt(),
        jump_norm: s.jump.sqrt(),
        u_h1: s.h1.sqrt(),
        triple_v: (s.grad + s.penalty).sqrt(),
        triple_vprime: (s.grad + s.penalty + s.flux).sqrt(),
        triple_p: (s.p + s.pbar).sqrt(),
        h_max: mesh.h_max(),
    })
}

/// `(|||v|||_v, |||v|||_v', |||q|||_p)` of a discrete field.
pub fn triple_norms(
    mesh: &Mesh,
    dofmap: &DofMap,
    sol: &DiscreteSolution,
    alpha: f64,
) -> Result<(f64, f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "penalty must be positive, got {alpha}"
        )));
    }
    let s = Evaluator::new(mesh, dofmap, sol)?.accumulate(None, alpha)?;
    Ok((
        (s.grad + s.penalty).sqrt(),
        (s.grad + s.penalty + s.flux).sqrt(),
        (s.p + s.pbar).sqrt(),
    ))
}

/// `(||div u_h||, jump seminorm)` of a discrete field; needs no exact solution.
pub fn conservation_norms(
    mesh: &Mesh,
    dofmap: &DofMap,
    sol: &DiscreteSolution,
) -> Result<(f64, f64)> {
    let s = Evaluator::new(mesh, dofmap, sol)?.accumulate(None, 1.0)?;
    Ok((s.div.sqrt(), s.jump.sqrt()))
}

/// `int_Omega phi_i` for every cell-pressure basis function.
pub fn pressure_weights(mesh: &Mesh, dofmap: &DofMap) -> Result<Vec<f64>> {
    let basis = make_basis(BasisKind::Triangle, dofmap.degree - 1)?;
    let rule = make_quadrature(RefDomain::Triangle, dofmap.degree)?;
    let tab = basis.tabulate(&rule.points);
    let mut out = vec![0.0; dofmap.n_p()];
    for cell in 0..mesh.num_cells() {
        let det = mesh.geometry(cell).det.abs();
        let r = dofmap.cell_p_range(cell);
        for (vals, w) in tab.values.iter().zip(&rule.weights) {
            for (o, v) in out[r.clone()].iter_mut().zip(vals) {
                *o += w * det * v;
            }
        }
    }
    Ok(out)
}

/// Integral of the cell pressure over the domain.
pub fn pressure_integral(mesh: &Mesh, dofmap: &DofMap, p: &[f64]) -> Result<f64> {
    if p.len() != dofmap.n_p() {
        return Err(Error::DimensionMismatch {
            expected: dofmap.n_p(),
            got: p.len(),
        });
    }
    Ok(pressure_weights(mesh, dofmap)?
        .iter()
        .zip(p)
        .map(|(w, x)| w * x)
        .sum())
}

/// Shifts both pressure fields so that the cell pressure has zero mean.
pub fn remove_pressure_mean(
    mesh: &Mesh,
    sol: &mut DiscreteSolution,
    dofmap: &DofMap,
) -> Result<()> {
    let mean = pressure_integral(mesh, dofmap, &sol.p)? / mesh.total_area();
    sol.shift_pressure(-mean);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_l_shape, generate_rectangle, DiagonalPattern};
    use crate::spaces::{build_dofmap, MethodVariant};

    /// Cell and facet nodal interpolant of a polynomial flow.
    pub(crate) fn interpolate(
        mesh: &Mesh,
        d: &DofMap,
        u: impl Fn(Point) -> [f64; 2],
        p: impl Fn(Point) -> f64,
    ) -> DiscreteSolution {
        let k = d.degree;
        let vb = make_basis(BasisKind::Triangle, k).unwrap();
        let pb = make_basis(BasisKind::Triangle, k - 1).unwrap();
        let fb = make_basis(BasisKind::Interval, k).unwrap();
        let mut s = DiscreteSolution::zeros(d);
        for node in 0..d.n_ubar() / 2 {
            let v = u(d.velocity_node_coord(node));
            s.ubar[2 * node] = v[0];
            s.ubar[2 * node + 1] = v[1];
        }
        let nk = vb.dim();
        for cell in 0..mesh.num_cells() {
            let g = mesh.geometry(cell);
            let r = d.cell_u_range(cell);
            for (j, xi) in vb.nodes.iter().enumerate() {
                let v = u(g.map(*xi));
                s.u[r.start + j] = v[0];
                s.u[r.start + nk + j] = v[1];
            }
            for (j, xi) in pb.nodes.iter().enumerate() {
                s.p[d.cell_p_range(cell).start + j] = p(g.map(*xi));
            }
        }
        for (f, facet) in mesh.facets().iter().enumerate() {
            let [a, b] = facet.vertices.map(|v| mesh.vertices()[v]);
            for (j, &node) in d.facet_pressure_nodes(f).iter().enumerate() {
                let t = fb.nodes[j][0];
                s.pbar[node] = p([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
            }
        }
        s
    }

    /// `u = (x^2, -2xy)`, `p = x + y - 1` on the unit square.
    struct Quadratic;
    impl ExactSolution for Quadratic {
        fn name(&self) -> &str {
            "quadratic"
        }
        fn nu(&self) -> f64 {
            1.0
        }
        fn velocity(&self, x: Point) -> [f64; 2] {
            [x[0] * x[0], -2.0 * x[0] * x[1]]
        }
        fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2] {
            [[2.0 * x[0], 0.0], [-2.0 * x[1], -2.0 * x[0]]]
        }
        fn pressure(&self, x: Point) -> Result<f64> {
            Ok(x[0] + x[1] - 1.0)
        }
        fn forcing(&self, _: Point) -> [f64; 2] {
            [-1.0, 3.0]
        }
    }

    #[test]
    fn interpolant_of_polynomial_flow_has_no_error() {
        let mesh =
            generate_rectangle(0.0, 0.0, 1.0, 1.0, 3, 2, DiagonalPattern::Crisscross).unwrap();
        for v in MethodVariant::ALL {
            let d = build_dofmap(&mesh, 2, v).unwrap();
            let ex = Quadratic;
            let s = interpolate(&mesh, &d, |x| ex.velocity(x), |x| ex.pressure(x).unwrap());
            let r = error_norms(&mesh, &d, &s, &ex, 16.0).unwrap();
            assert!(r.err_u < 1e-12 && r.err_p < 1e-12, "{r:?}");
            assert!(r.triple_vprime < 1e-11 && r.triple_p < 1e-12, "{r:?}");
            assert!(r.div_norm < 1e-12 && r.jump_norm < 1e-12);
        }
    }

    #[test]
    fn constant_field_has_zero_velocity_norm() {
        let mesh = generate_rectangle(0.0, 0.0, 1.0, 1.0, 2, 2, DiagonalPattern::Right).unwrap();
        let d = build_dofmap(&mesh, 3, MethodVariant::Hdg).unwrap();
        let s = interpolate(&mesh, &d, |_| [1.5, -0.5], |_| 0.0);
        let (v, vp, p) = triple_norms(&mesh, &d, &s, 36.0).unwrap();
        assert!(v < 1e-12 && vp < 1e-12 && p == 0.0, "{v} {vp} {p}");
    }

    #[test]
    fn jump_detects_discontinuous_normal_velocity() {
        let mesh = generate_rectangle(0.0, 0.0, 1.0, 1.0, 1, 1, DiagonalPattern::Right).unwrap();
        let d = build_dofmap(&mesh, 1, MethodVariant::Hdg).unwrap();
        let mut s = DiscreteSolution::zeros(&d);
        let nk = d.cell_velocity_scalar_dim();
        // cell 0 moves with unit velocity, cell 1 rests
        for j in 0..2 * nk {
            s.u[j] = 1.0;
        }
        let r = error_norms(&mesh, &d, &s, &Quadratic, 6.0).unwrap();
        // diagonal of length sqrt(2), normal (1, -1)/sqrt(2) or its negative
        let normal = mesh
            .facets()
            .iter()
            .enumerate()
            .find(|(_, f)| !f.is_boundary())
            .unwrap()
            .0;
        let n = mesh.facet_normal(normal);
        let expected = ((n[0] + n[1]).powi(2) * 2f64.sqrt()).sqrt();
        assert!(
            (r.jump_norm - expected).abs() < 1e-12,
            "{} {expected}",
            r.jump_norm
        );
    }

    #[test]
    fn graded_rule_integrates_singular_power() {
        let q = make_quadrature(RefDomain::Triangle, 8).unwrap();
        let pts = graded_rule(&q, 0);
        let total: f64 = pts.iter().map(|p| p.1).sum();
        assert!((total - 0.5).abs() < 1e-14);
        // int over the reference triangle of r^{-0.9}: polar integral
        let exact = {
            let g = crate::refelem::gauss_legendre(40);
            let mut s = 0.0;
            for (t, w) in g.0.iter().zip(&g.1) {
                let phi = t * std::f64::consts::FRAC_PI_2;
                let rmax = 1.0 / (phi.cos() + phi.sin());
                s += w * std::f64::consts::FRAC_PI_2 * rmax.powf(1.1) / 1.1;
            }
            s
        };
        let got: f64 = pts
            .iter()
            .map(|(p, w)| w * p[0].hypot(p[1]).powf(-0.9))
            .sum();
        assert!((got - exact).abs() < 1e-3 * exact, "{got} {exact}");
    }

    #[test]
    fn corner_pressure_error_is_finite() {
        let mesh = generate_l_shape(2).unwrap();
        let d = build_dofmap(&mesh, 1, MethodVariant::Hdg).unwrap();
        let s = DiscreteSolution::zeros(&d);
        let r = error_norms(&mesh, &d, &s, &super::super::l_shape_corner(), 6.0).unwrap();
        assert!(r.err_p.is_finite() && r.err_p > 0.0);
    }

    #[test]
    fn mean_removal() {
        let mesh = generate_rectangle(0.0, 0.0, 2.0, 1.0, 2, 2, DiagonalPattern::Left).unwrap();
        let d = build_dofmap(&mesh, 2, MethodVariant::EdgHdg).unwrap();
        let mut s = interpolate(&mesh, &d, |_| [0.0, 0.0], |x| x[0] + 3.0);
        remove_pressure_mean(&mesh, &mut s, &d).unwrap();
        assert!(pressure_integral(&mesh, &d, &s.p).unwrap().abs() < 1e-13);
        assert!((s.pbar[0] - s.p[0]).abs() < 3.0);
    }

    #[test]
    fn rate_of_halving_is_one() {
        assert_eq!(convergence_rate(0.4, 0.2), 1.0);
    }
}
