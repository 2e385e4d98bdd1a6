use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{dot, norm, Preconditioner, SparseMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Minres,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSettings {
    #[serde(rename = "solver")]
    pub kind: SolverKind,
    pub tol: f64,
    pub maxit: usize,
    pub restart: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            kind: SolverKind::Minres,
            tol: 1e-12,
            maxit: 2000,
            restart: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: SolverKind,
    pub iterations: usize,
    /// Relative true residual after each iteration, starting with the initial
    /// guess.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub time_s: f64,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::NAN)
    }
}

/// Removes the components of `v` along an orthonormal `basis`.
pub fn project_nullspace(v: &[f64], basis: &[Vec<f64>]) -> Vec<f64> {
    let mut out = v.to_vec();
    project_in_place(&mut out, basis);
    out
}

fn project_in_place(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let c = dot(v, b);
        v.iter_mut().zip(b).for_each(|(x, bi)| *x -= c * bi);
    }
}

struct Context<'a> {
    a: &'a SparseMatrix,
    b: Vec<f64>,
    bnorm: f64,
    prec: &'a dyn Preconditioner,
    nullspace: &'a [Vec<f64>],
}

impl<'a> Context<'a> {
    fn new(
        a: &'a SparseMatrix,
        rhs: &[f64],
        prec: &'a dyn Preconditioner,
        nullspace: &'a [Vec<f64>],
    ) -> Result<Self> {
        let n = a.nrows();
        for len in [a.ncols(), rhs.len(), prec.dim()]
            .into_iter()
            .chain(nullspace.iter().map(Vec::len))
        {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: len,
                });
            }
        }
        let b = project_nullspace(rhs, nullspace);
        let bnorm = norm(&b);
        Ok(Self {
            a,
            b,
            bnorm,
            prec,
            nullspace,
        })
    }

    /// `z = Pi P^{-1} Pi r`.
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let mut rp = r.to_vec();
        project_in_place(&mut rp, self.nullspace);
        self.prec.apply(&rp, z);
        project_in_place(z, self.nullspace);
    }

    fn relative_residual(&self, x: &[f64], work: &mut [f64]) -> f64 {
        self.a.matvec(x, work);
        let r: f64 = self
            .b
            .iter()
            .zip(work.iter())
            .map(|(b, ax)| (b - ax).powi(2))
            .sum();
        r.sqrt() / self.bnorm
    }
}

/// Iterations without a new best true residual, with the recurrence estimate
/// already below the tolerance, after which MINRES restarts its recurrence
/// from the current iterate.
const MINRES_STALL: usize = 30;

enum CycleEnd {
    Converged,
    Stalled,
    Exhausted,
}

/// Preconditioned MINRES for a symmetric system with a symmetric positive
/// definite preconditioner. The right-hand side, preconditioned vectors and
/// iterate are kept orthogonal to `nullspace`, which must be orthonormal.
/// Convergence is declared on the recomputed relative residual. When the
/// true residual stops improving although the recurrence estimates it below
/// the tolerance, the recurrence is restarted from the current iterate and its recomputed
/// residual; a restart cycle that brings no improvement ends the solve.
pub fn minres(
    a: &SparseMatrix,
    rhs: &[f64],
    prec: &dyn Preconditioner,
    tol: f64,
    maxit: usize,
    nullspace: &[Vec<f64>],
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    let ctx = Context::new(a, rhs, prec, nullspace)?;
    let n = a.nrows();
    let mut x = vec![0.0; n];
    let mut report = SolveReport {
        method: super::SolverKind::Minres,
        iterations: 0,
        residual_history: vec![if ctx.bnorm > 0.0 { 1.0 } else { 0.0 }],
        converged: ctx.bnorm == 0.0,
        time_s: 0.0,
    };
    if report.converged {
        return Ok((x, report));
    }
    let mut best = 1.0;
    loop {
        let before = best;
        let end = minres_cycle(&ctx, &mut x, tol, maxit, &mut report, &mut best)?;
        match end {
            CycleEnd::Converged => {
                report.converged = true;
                break;
            }
            CycleEnd::Exhausted => break,
            CycleEnd::Stalled if best >= before => break,
            CycleEnd::Stalled => log::debug!(
                "minres restart at it {}: residual {best:.3e}",
                report.iterations
            ),
        }
    }
    report.time_s = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// One MINRES recurrence started from `x`, updating it in place.
fn minres_cycle(
    ctx: &Context,
    x: &mut [f64],
    tol: f64,
    maxit: usize,
    report: &mut SolveReport,
    best: &mut f64,
) -> Result<CycleEnd> {
    let a = ctx.a;
    let n = x.len();
    let mut work = vec![0.0; n];
    a.matvec(x, &mut work);
    let mut r1: Vec<f64> = ctx.b.iter().zip(&work).map(|(b, ax)| b - ax).collect();
    project_in_place(&mut r1, ctx.nullspace);
    let mut y = vec![0.0; n];
    ctx.precondition(&r1, &mut y);
    let beta1 = dot(&r1, &y);
    if beta1 < 0.0 {
        return Err(Error::IndefinitePreconditioner(beta1));
    }
    let beta1 = beta1.sqrt();
    let rel0 = norm(&r1) / ctx.bnorm;
    let mut r2 = r1.clone();
    let (mut oldb, mut beta, mut dbar, mut epsln, mut phibar) = (0.0, beta1, 0.0, 0.0, beta1);
    let (mut cs, mut sn) = (-1.0f64, 0.0f64);
    let mut w = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut since_best = 0;

    for itn in 1.. {
        if report.iterations >= maxit {
            return Ok(CycleEnd::Exhausted);
        }
        if beta == 0.0 {
            return Ok(CycleEnd::Stalled);
        }
        let s = 1.0 / beta;
        v.iter_mut().zip(&y).for_each(|(vi, yi)| *vi = s * yi);
        a.matvec(&v, &mut y);
        if itn >= 2 {
            let f = beta / oldb;
            y.iter_mut().zip(&r1).for_each(|(yi, ri)| *yi -= f * ri);
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        y.iter_mut().zip(&r2).for_each(|(yi, ri)| *yi -= f * ri);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        ctx.precondition(&r2, &mut y);
        oldb = beta;
        let bb = dot(&r2, &y);
        if bb < 0.0 {
            return Err(Error::IndefinitePreconditioner(bb));
        }
        beta = bb.sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        let denom = 1.0 / gamma;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) * denom;
            x[i] += phi * w[i];
        }
        report.iterations += 1;
        let rel = ctx.relative_residual(x, &mut work);
        report.residual_history.push(rel);
        log::trace!("minres it {}: rel residual {rel:.3e}", report.iterations);
        if rel <= tol {
            return Ok(CycleEnd::Converged);
        }
        if rel < *best {
            *best = rel;
            since_best = 0;
        } else {
            since_best += 1;
            // the recurrence residual, rescaled to the true residual at the cycle start
            let estimate = rel0 * phibar / beta1;
            if since_best >= MINRES_STALL && estimate <= tol {
                return Ok(CycleEnd::Stalled);
            }
        }
    }
    unreachable!()
}

/// Restarted GMRES with right preconditioning. Preconditioned directions are
/// stored, so the preconditioner may vary between applications.
pub fn gmres_restarted(
    a: &SparseMatrix,
    rhs: &[f64],
    prec: &dyn Preconditioner,
    restart: usize,
    tol: f64,
    maxit: usize,
    nullspace: &[Vec<f64>],
) -> Result<(Vec<f64>, SolveReport)> {
    if restart == 0 {
        return Err(Error::InvalidArgument(
            "GMRES restart length must be positive".into(),
        ));
    }
    let start = Instant::now();
    let ctx = Context::new(a, rhs, prec, nullspace)?;
    let n = a.nrows();
    let mut x = vec![0.0; n];
    let mut report = SolveReport {
        method: super::SolverKind::Gmres,
        iterations: 0,
        residual_history: vec![if ctx.bnorm > 0.0 { 1.0 } else { 0.0 }],
        converged: ctx.bnorm == 0.0,
        time_s: 0.0,
    };
    let mut work = vec![0.0; n];
    let m = restart;

    'outer: while !report.converged && report.iterations < maxit {
        a.matvec(&x, &mut work);
        let r: Vec<f64> = ctx.b.iter().zip(&work).map(|(b, ax)| b - ax).collect();
        let beta = norm(&r);
        if beta == 0.0 {
            report.converged = true;
            break;
        }
        let mut basis: Vec<Vec<f64>> = vec![r.iter().map(|v| v / beta).collect()];
        let mut zs: Vec<Vec<f64>> = Vec::with_capacity(m);
        // Hessenberg columns after rotation (upper triangular part)
        let mut h: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut rot: Vec<(f64, f64)> = Vec::with_capacity(m);
        let mut g = vec![beta];

        for j in 0..m {
            let mut z = vec![0.0; n];
            ctx.precondition(&basis[j], &mut z);
            let mut wv = a.mul(&z);
            let mut col = Vec::with_capacity(j + 2);
            for b in &basis {
                let c = dot(&wv, b);
                wv.iter_mut().zip(b).for_each(|(wi, bi)| *wi -= c * bi);
                col.push(c);
            }
            let hn = norm(&wv);
            col.push(hn);
            for (i, &(c, s)) in rot.iter().enumerate() {
                let (a0, a1) = (col[i], col[i + 1]);
                col[i] = c * a0 + s * a1;
                col[i + 1] = -s * a0 + c * a1;
            }
            let d = col[j].hypot(col[j + 1]);
            let (c, s) = if d == 0.0 {
                (1.0, 0.0)
            } else {
                (col[j] / d, col[j + 1] / d)
            };
            col[j] = d;
            col.pop();
            rot.push((c, s));
            let gj = g[j];
            g[j] = c * gj;
            g.push(-s * gj);
            h.push(col);
            zs.push(z);
            report.iterations += 1;

            let trial = update(&x, &h, &g, &zs);
            let rel = ctx.relative_residual(&trial, &mut work);
            report.residual_history.push(rel);
            log::trace!("gmres it {}: rel residual {rel:.3e}", report.iterations);
            if rel <= tol {
                x = trial;
                report.converged = true;
                break 'outer;
            }
            if hn == 0.0 || report.iterations >= maxit || j + 1 == m {
                x = trial;
                break;
            }
            basis.push(wv.iter().map(|v| v / hn).collect());
        }
    }
    report.time_s = start.elapsed().as_secs_f64();
    Ok((x, report))
}

/// `x + Z y` with `y` solving the rotated triangular least-squares system.
fn update(x: &[f64], h: &[Vec<f64>], g: &[f64], zs: &[Vec<f64>]) -> Vec<f64> {
    let k = h.len();
    let mut y = vec![0.0; k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in i + 1..k {
            s -= h[j][i] * y[j];
        }
        y[i] = if h[i][i] != 0.0 { s / h[i][i] } else { 0.0 };
    }
    let mut out = x.to_vec();
    for (z, yi) in zs.iter().zip(&y) {
        out.iter_mut().zip(z).for_each(|(o, zi)| *o += yi * zi);
    }
    out
}
