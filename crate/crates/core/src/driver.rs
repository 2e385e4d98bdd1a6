//! Assemble, condense, solve and recover in one call.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_global, penalty_parameter};
use crate::condense::{condense, CondensedSystem, DiscreteSolution};
use crate::error::Result;
use crate::krylov::{
    gmres_restarted, minres, BlockSgsPreconditioner, SolveReport, SolverKind, SolverSettings,
};
use crate::mesh::{Mesh, Point};
use crate::solutions::{remove_pressure_mean, ExactSolution};
use crate::spaces::{build_dofmap, DofMap, MethodVariant};

pub type VectorField<'a> = &'a (dyn Fn(Point) -> [f64; 2] + Sync);

/// Wall-clock seconds of each stage.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub assemble: f64,
    pub condense: f64,
    pub solve: f64,
    pub recover: f64,
}

impl Timings {
    pub fn total(&self) -> f64 {
        self.assemble + self.condense + self.solve + self.recover
    }
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub dofmap: DofMap,
    pub alpha: f64,
    pub solution: DiscreteSolution,
    pub report: SolveReport,
    pub timings: Timings,
    pub n_condensed: usize,
}

/// Discrete problem: variant, degree, viscosity and data.
pub struct Problem<'a> {
    pub mesh: &'a Mesh,
    pub variant: MethodVariant,
    pub k: usize,
    pub nu: f64,
    /// Penalty; the variant's default when `None`.
    pub alpha: Option<f64>,
    pub forcing: VectorField<'a>,
    pub boundary: VectorField<'a>,
}

impl Problem<'_> {
    pub fn alpha(&self) -> f64 {
        self.alpha
            .unwrap_or_else(|| penalty_parameter(self.k, self.variant))
    }

    /// Assembled and condensed system, with the time spent on each step.
    pub fn condensed(&self) -> Result<(CondensedSystem, Timings)> {
        let mut t = Timings::default();
        let clock = Instant::now();
        let dofmap = build_dofmap(self.mesh, self.k, self.variant)?;
        let sys = assemble_global(
            self.mesh,
            &dofmap,
            self.nu,
            self.alpha(),
            self.forcing,
            self.boundary,
        )?;
        t.assemble = clock.elapsed().as_secs_f64();
        let clock = Instant::now();
        let cs = condense(&sys)?;
        t.condense = clock.elapsed().as_secs_f64();
        Ok((cs, t))
    }

    pub fn solve(&self, settings: &SolverSettings) -> Result<Outcome> {
        let (cs, timings) = self.condensed()?;
        self.finish(cs, timings, settings)
    }

    /// Solves a system produced by [`Problem::condensed`] and recovers the
    /// full solution.
    pub fn finish(
        &self,
        cs: CondensedSystem,
        mut timings: Timings,
        settings: &SolverSettings,
    ) -> Result<Outcome> {
        let (x, report) = solve_condensed(&cs, settings)?;
        timings.solve = report.time_s;
        let clock = Instant::now();
        let mut solution = cs.back_substitute(&x)?;
        remove_pressure_mean(self.mesh, &mut solution, &cs.dofmap)?;
        timings.recover = clock.elapsed().as_secs_f64();
        Ok(Outcome {
            n_condensed: cs.dim(),
            dofmap: cs.dofmap,
            alpha: self.alpha(),
            solution,
            report,
            timings,
        })
    }
}

/// Krylov solve of a condensed system with the block Gauss-Seidel
/// preconditioner and the constant-pressure kernel projected out. The
/// preconditioner setup is included in the reported time.
pub fn solve_condensed(
    cs: &CondensedSystem,
    settings: &SolverSettings,
) -> Result<(Vec<f64>, SolveReport)> {
    let clock = Instant::now();
    let [nb, np, nq] = cs.block_sizes();
    let prec = BlockSgsPreconditioner::for_condensed(&cs.matrix, nb, np, nq)?;
    let ns = cs.nullspace();
    let (x, mut report) = match settings.kind {
        SolverKind::Minres => minres(
            &cs.matrix,
            &cs.rhs,
            &prec,
            settings.tol,
            settings.maxit,
            &ns,
        )?,
        SolverKind::Gmres => gmres_restarted(
            &cs.matrix,
            &cs.rhs,
            &prec,
            settings.restart,
            settings.tol,
            settings.maxit,
            &ns,
        )?,
    };
    report.time_s = clock.elapsed().as_secs_f64();
    Ok((x, report))
}

/// Solves with the forcing and boundary values of `exact`.
pub fn solve_exact(
    mesh: &Mesh,
    variant: MethodVariant,
    k: usize,
    exact: &dyn ExactSolution,
    alpha: Option<f64>,
    settings: &SolverSettings,
) -> Result<Outcome> {
    let f = |x: Point| exact.forcing(x);
    let g = |x: Point| exact.velocity(x);
    Problem {
        mesh,
        variant,
        k,
        nu: exact.nu(),
        alpha,
        forcing: &f,
        boundary: &g,
    }
    .solve(settings)
}
