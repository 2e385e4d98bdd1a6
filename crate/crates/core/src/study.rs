//! Parameter studies: one solve per (variant, degree, level, viscosity), with
//! error tables written as CSV or JSON.

use std::fmt;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use crate::driver::{Outcome, Problem, Timings, VectorField};
use crate::error::{Error, Result};
use crate::krylov::SolverSettings;
use crate::mesh::{
    generate_l_shape_with, generate_rectangle, load_gmsh, DiagonalPattern, Mesh, Point,
};
use crate::solutions::{
    conservation_norms, curl_case, error_norms, kovasznay, l_shape_corner, lid_driven_bc,
    smooth_case, ExactSolution,
};
use crate::spaces::MethodVariant;

/// Environment variable holding the number of concurrent solves.
pub const WORKERS_ENV: &str = "STOKES_HYBRID_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Case {
    Kovasznay,
    Curl,
    Lshape,
    Cavity,
    Smooth,
}

impl Case {
    pub fn name(self) -> &'static str {
        match self {
            Case::Kovasznay => "kovasznay",
            Case::Curl => "curl",
            Case::Lshape => "lshape",
            Case::Cavity => "cavity",
            Case::Smooth => "smooth",
        }
    }

    fn default_nu(self) -> f64 {
        match self {
            Case::Kovasznay => 1.0 / 40.0,
            _ => 1.0,
        }
    }

    /// Domain `[x0, y0, x1, y1]` of the rectangular cases.
    fn rectangle(self) -> Option<[f64; 4]> {
        match self {
            Case::Kovasznay => Some([-0.5, -0.5, 1.0, 1.5]),
            Case::Curl | Case::Smooth => Some([0.0, 0.0, 1.0, 1.0]),
            Case::Cavity => Some([-1.0, -1.0, 1.0, 1.0]),
            Case::Lshape => None,
        }
    }

    fn exact(self, nu: f64) -> Option<Box<dyn ExactSolution>> {
        match self {
            Case::Kovasznay => Some(Box::new(kovasznay(nu))),
            Case::Curl => Some(Box::new(curl_case(nu))),
            Case::Smooth => Some(Box::new(smooth_case(nu))),
            Case::Lshape => Some(Box::new(l_shape_corner())),
            Case::Cavity => None,
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Level-0 mesh. Generated meshes are regenerated with `2^level` times as many
/// divisions per direction; a Gmsh mesh is refined uniformly `level` times.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeshSource {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    /// Divisions of each unit side of the L-shape.
    pub n: Option<usize>,
    pub pattern: DiagonalPattern,
    pub msh: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub case: Case,
    #[serde(default = "all_variants")]
    pub variants: Vec<MethodVariant>,
    pub degrees: Vec<usize>,
    pub levels: Vec<usize>,
    /// Viscosities; the case default when empty.
    #[serde(default)]
    pub nu: Vec<f64>,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub solver: SolverSettings,
    #[serde(default)]
    pub mesh: MeshSource,
    /// Stem of the output files; the case name when absent.
    #[serde(default)]
    pub output: Option<String>,
    /// Directory receiving every condensed system in Matrix Market format.
    #[serde(default)]
    pub dump_matrices: Option<PathBuf>,
}

fn all_variants() -> Vec<MethodVariant> {
    MethodVariant::ALL.to_vec()
}

impl StudyConfig {
    /// Parses TOML text and applies `key=value` overrides. Dotted keys address
    /// tables (`solver.tol=1e-10`); values are TOML literals, bare words are
    /// taken as strings.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: StudyConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; a relative `mesh.msh` is resolved against the
    /// file's directory.
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml_str(&text, overrides)?;
        if let (Some(msh), Some(dir)) = (&cfg.mesh.msh, path.parent()) {
            if msh.is_relative() {
                cfg.mesh.msh = Some(dir.join(msh));
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.variants.is_empty() {
            return bad("at least one variant is required".into());
        }
        if self.degrees.is_empty() || self.degrees.contains(&0) {
            return bad(format!(
                "degrees must be non-empty and at least 1, got {:?}",
                self.degrees
            ));
        }
        if self.levels.is_empty() {
            return bad("at least one level is required".into());
        }
        if !(self.solver.tol > 0.0) {
            return bad(format!(
                "solver tolerance must be positive, got {}",
                self.solver.tol
            ));
        }
        if self.solver.maxit == 0 || self.solver.restart == 0 {
            return bad("solver maxit and restart must be positive".into());
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) {
                return bad(format!("alpha must be positive, got {a}"));
            }
        }
        if self.nu.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return bad(format!("viscosities must be positive, got {:?}", self.nu));
        }
        if self.case == Case::Lshape && self.nu.iter().any(|&v| v != 1.0) {
            return bad("the lshape case is defined for nu = 1 only".into());
        }
        let m = &self.mesh;
        if m.msh.is_none() {
            if self.case == Case::Lshape && (m.nx.is_some() || m.ny.is_some()) {
                return bad("the lshape mesh takes `n`, not `nx`/`ny`".into());
            }
            if self.case != Case::Lshape && m.n.is_some() {
                return bad("`n` applies to the lshape mesh only".into());
            }
            if [m.nx, m.ny, m.n].contains(&Some(0)) {
                return bad("mesh divisions must be positive".into());
            }
        }
        Ok(())
    }

    pub fn viscosities(&self) -> Vec<f64> {
        if self.nu.is_empty() {
            vec![self.case.default_nu()]
        } else {
            self.nu.clone()
        }
    }

    pub fn stem(&self) -> String {
        self.output
            .clone()
            .unwrap_or_else(|| self.case.name().to_string())
    }

    pub fn mesh_for_level(&self, level: usize) -> Result<Mesh> {
        let m = &self.mesh;
        if let Some(path) = &m.msh {
            let mut mesh = load_gmsh(path)?;
            for _ in 0..level {
                mesh = mesh.uniform_refine();
            }
            return Ok(mesh);
        }
        let scale = 1usize << level;
        match self.case.rectangle() {
            Some([x0, y0, x1, y1]) => {
                let nx = m.nx.unwrap_or(8);
                let ny = m.ny.unwrap_or(nx);
                generate_rectangle(x0, y0, x1, y1, nx * scale, ny * scale, m.pattern)
            }
            None => generate_l_shape_with(m.n.unwrap_or(2) * scale, m.pattern),
        }
    }
}

fn apply_override(table: &mut toml::Table, o: &str) -> Result<()> {
    let (key, raw) = o
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{o}` is not key=value")))?;
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t
            .remove("v")
            .unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields at least one part");
    let mut t = table;
    for p in path {
        let entry = t
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override `{o}`: `{p}` is not a table")))?;
    }
    t.insert(last.to_string(), value);
    Ok(())
}

/// One line of a study table. Error columns are empty for the cavity, rates
/// on the first level of each series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub case: Case,
    pub variant: MethodVariant,
    pub k: usize,
    pub level: usize,
    pub cells: usize,
    pub dofs_condensed: usize,
    pub nu: f64,
    pub err_u: Option<f64>,
    pub rate_u: Option<f64>,
    pub err_p: Option<f64>,
    pub rate_p: Option<f64>,
    pub div_norm: Option<f64>,
    pub jump_norm: Option<f64>,
    pub iters: usize,
    pub time_s: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub row: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StudyResult {
    pub rows: Vec<StudyRow>,
    /// Stage timings, parallel to `rows`.
    pub timings: Vec<Timings>,
    pub failures: Vec<Failure>,
}

impl StudyResult {
    pub fn all_converged(&self) -> bool {
        self.failures.is_empty() && self.rows.iter().all(|r| r.converged)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Job {
    variant: MethodVariant,
    k: usize,
    level: usize,
    nu: f64,
}

struct JobResult {
    row: StudyRow,
    timings: Timings,
    h: f64,
    failure: Option<String>,
}

/// Number of concurrent solves from [`WORKERS_ENV`], default 1.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or(1)
}

/// Runs every solve of the study. Rows are ordered by variant, degree, level
/// and viscosity regardless of the number of workers. A failed solve yields a
/// flagged row and the study continues.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let mut levels = cfg.levels.clone();
    levels.sort_unstable();
    levels.dedup();
    let mut variants = cfg.variants.clone();
    variants.sort_unstable();
    variants.dedup();
    let mut degrees = cfg.degrees.clone();
    degrees.sort_unstable();
    degrees.dedup();
    let mut nus = cfg.viscosities();
    nus.sort_by(f64::total_cmp);
    nus.dedup();

    let meshes = levels
        .iter()
        .map(|&l| cfg.mesh_for_level(l))
        .collect::<Result<Vec<_>>>()?;
    let mut jobs = Vec::new();
    for &variant in &variants {
        for &k in &degrees {
            for (li, _) in levels.iter().enumerate() {
                for &nu in &nus {
                    jobs.push((
                        li,
                        Job {
                            variant,
                            k,
                            level: levels[li],
                            nu,
                        },
                    ));
                }
            }
        }
    }

    let workers = worker_count().min(jobs.len().max(1));
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (jobs, meshes, next) = (&jobs, &meshes, &next);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(li, job)) = jobs.get(i) else { break };
                let r = run_job(cfg, &meshes[li], job);
                if tx.send((i, r)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut results: Vec<Option<JobResult>> = (0..jobs.len()).map(|_| None).collect();
    for (i, r) in rx {
        results[i] = Some(r);
    }

    let mut out = StudyResult::default();
    let mut hs = Vec::with_capacity(jobs.len());
    for (i, r) in results.into_iter().enumerate() {
        let r = r.expect("every job reports back");
        if let Some(reason) = r.failure {
            out.failures.push(Failure { row: i, reason });
        }
        out.rows.push(r.row);
        out.timings.push(r.timings);
        hs.push(r.h);
    }
    fill_rates(&mut out.rows, &hs);
    Ok(out)
}

fn run_job(cfg: &StudyConfig, mesh: &Mesh, job: Job) -> JobResult {
    let mut row = StudyRow {
        case: cfg.case,
        variant: job.variant,
        k: job.k,
        level: job.level,
        cells: mesh.num_cells(),
        dofs_condensed: 0,
        nu: job.nu,
        err_u: None,
        rate_u: None,
        err_p: None,
        rate_p: None,
        div_norm: None,
        jump_norm: None,
        iters: 0,
        time_s: 0.0,
        converged: false,
    };
    let h = mesh.h_max();
    let exact = cfg.case.exact(job.nu);
    match solve_job(cfg, mesh, job, exact.as_deref()) {
        Ok((outcome, errors)) => {
            row.dofs_condensed = outcome.n_condensed;
            row.iters = outcome.report.iterations;
            row.time_s = outcome.timings.total();
            row.converged = outcome.report.converged;
            let [eu, ep, div, jump] = errors;
            (row.err_u, row.err_p, row.div_norm, row.jump_norm) = (eu, ep, div, jump);
            log::info!(
                "{} {} k={} level={} nu={:e}: {} iterations, residual {:.2e}, {:.2} s",
                cfg.case,
                job.variant,
                job.k,
                job.level,
                job.nu,
                row.iters,
                outcome.report.final_residual(),
                row.time_s
            );
            let failure = (!row.converged).then(|| {
                format!(
                    "no convergence after {} iterations (relative residual {:.3e})",
                    row.iters,
                    outcome.report.final_residual()
                )
            });
            JobResult {
                row,
                timings: outcome.timings,
                h,
                failure,
            }
        }
        Err(e) => {
            log::warn!(
                "{} {} k={} level={}: {e}",
                cfg.case,
                job.variant,
                job.k,
                job.level
            );
            JobResult {
                row,
                timings: Timings::default(),
                h,
                failure: Some(e.to_string()),
            }
        }
    }
}

fn solve_job(
    cfg: &StudyConfig,
    mesh: &Mesh,
    job: Job,
    exact: Option<&dyn ExactSolution>,
) -> Result<(Outcome, [Option<f64>; 4])> {
    let zero = |_: Point| [0.0, 0.0];
    let f = |x: Point| exact.map_or([0.0, 0.0], |e| e.forcing(x));
    let g = |x: Point| exact.map_or_else(|| lid_driven_bc(x), |e| e.velocity(x));
    let forcing: VectorField = if exact.is_some() { &f } else { &zero };
    let problem = Problem {
        mesh,
        variant: job.variant,
        k: job.k,
        nu: job.nu,
        alpha: cfg.alpha,
        forcing,
        boundary: &g,
    };
    let (cs, timings) = problem.condensed()?;
    if let Some(dir) = &cfg.dump_matrices {
        std::fs::create_dir_all(dir)?;
        let stem = format!(
            "{}_{}_k{}_l{}_nu{:e}",
            cfg.stem(),
            job.variant,
            job.k,
            job.level,
            job.nu
        );
        cs.write_matrix_market(dir, &stem)?;
    }
    let outcome = problem.finish(cs, timings, &cfg.solver)?;
    let errors = match exact {
        Some(e) => {
            let r = error_norms(mesh, &outcome.dofmap, &outcome.solution, e, outcome.alpha)?;
            [
                Some(r.err_u),
                Some(r.err_p),
                Some(r.div_norm),
                Some(r.jump_norm),
            ]
        }
        None => {
            let (div, jump) = conservation_norms(mesh, &outcome.dofmap, &outcome.solution)?;
            [None, None, Some(div), Some(jump)]
        }
    };
    Ok((outcome, errors))
}

/// Observed order between consecutive levels of the same series.
fn fill_rates(rows: &mut [StudyRow], hs: &[f64]) {
    let rate = |ec: Option<f64>, ef: Option<f64>, hc: f64, hf: f64| match (ec, ef) {
        (Some(c), Some(f)) if c > 0.0 && f > 0.0 && hc > hf => Some((c / f).ln() / (hc / hf).ln()),
        _ => None,
    };
    for i in 0..rows.len() {
        let prev = (0..i).rev().find(|&j| {
            let (a, b) = (&rows[j], &rows[i]);
            a.variant == b.variant && a.k == b.k && a.nu == b.nu && a.level < b.level
        });
        if let Some(j) = prev {
            rows[i].rate_u = rate(rows[j].err_u, rows[i].err_u, hs[j], hs[i]);
            rows[i].rate_p = rate(rows[j].err_p, rows[i].err_p, hs[j], hs[i]);
        }
    }
}

pub fn write_csv<W: Write>(rows: &[StudyRow], w: W) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    wr.write_record(CSV_HEADER)?;
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<StudyRow>> {
    let mut rd = csv::Reader::from_reader(r);
    let header = rd.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(Error::Config(format!("unexpected CSV header {:?}", header)));
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub const CSV_HEADER: [&str; 16] = [
    "case",
    "variant",
    "k",
    "level",
    "cells",
    "dofs_condensed",
    "nu",
    "err_u",
    "rate_u",
    "err_p",
    "rate_p",
    "div_norm",
    "jump_norm",
    "iters",
    "time_s",
    "converged",
];

/// Writes `{dir}/{stem}.{csv|json}` and returns its path.
pub fn emit(
    result: &StudyResult,
    format: Format,
    dir: impl AsRef<Path>,
    stem: &str,
) -> Result<PathBuf> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{}", format.extension()));
    let file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    match format {
        Format::Csv => write_csv(&result.rows, file)?,
        Format::Json => serde_json::to_writer_pretty(file, &result.rows)?,
    }
    Ok(path)
}
