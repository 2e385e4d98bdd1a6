//! Acceptance criteria 1 to 9. Every test prints one `criterion N: PASS|FAIL`
//! line followed by the measurements it was decided on.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Mutex, MutexGuard, OnceLock};
use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use stokes_hybrid::assembly::{assemble_global, penalty_parameter};
use stokes_hybrid::condense::{condense, DiscreteSolution};
use stokes_hybrid::diagnostics::dense_solve_full;
use stokes_hybrid::driver::{solve_exact, Problem};
use stokes_hybrid::krylov::SolverSettings;
use stokes_hybrid::mesh::{generate_rectangle, DiagonalPattern, Mesh, Point};
use stokes_hybrid::refelem::{make_quadrature, RefDomain};
use stokes_hybrid::solutions::{
    curl_case, error_norms, kovasznay, l_shape_corner, smooth_case, triple_norms, ExactSolution,
};
use stokes_hybrid::spaces::{build_dofmap, MethodVariant};
use stokes_hybrid::study::{run_study, Case, StudyConfig, StudyResult, StudyRow};
use stokes_hybrid::Result;

use MethodVariant::{Edg, EdgHdg, Hdg};

const VELOCITY_RATE_TOL: f64 = 0.15;
const PRESSURE_RATE_TOL: f64 = 0.2;
const TABLE_FACTOR: f64 = 3.0;
const KOVASZNAY_BUDGET_S: f64 = 300.0;
const DIV_TOL: f64 = 1e-10;
const JUMP_CONFORMING_MAX: f64 = 1e-10;
const JUMP_EDG_MIN: f64 = 1e-6;
const ROBUST_RATIO_MAX: f64 = 2.0;
const EDG_RATIO_MIN: f64 = 100.0;
const ROBUST_MIN_CELLS: usize = 8192;
const LSHAPE_U_RATE: (f64, f64) = (1.0, 0.25);
const LSHAPE_P_RATE: (f64, f64) = (0.5, 0.25);
const CONDENSATION_TOL: f64 = 1e-9;
const DENSE_CAP: usize = 500;
const ITER_SPREAD_MAX: f64 = 1.5;
const EDG_ITER_FACTOR: f64 = 1.1;
const SIZE_RATIO_MAX: f64 = 0.7;
const TIME_RATIO_MAX: f64 = 1.0;
const SYMMETRY_TOL: f64 = 1e-12;
const QUADRATURE_TOL: f64 = 1e-13;
const PATCH_TOL: f64 = 1e-10;

/// Reference Kovasznay errors: (variant, k, cells, ||u - u_h||, ||p - p_h||).
const TABLE1: [(MethodVariant, usize, usize, f64, f64); 18] = [
    (Hdg, 1, 672, 8.2e-3, 4.2e-2),
    (Hdg, 1, 2688, 2.1e-3, 2.1e-2),
    (Hdg, 1, 10752, 5.3e-4, 1.1e-2),
    (Hdg, 2, 672, 7.1e-4, 2.0e-3),
    (Hdg, 2, 2688, 8.7e-5, 5.2e-4),
    (Hdg, 2, 10752, 1.1e-5, 1.3e-4),
    (Edg, 1, 672, 3.3e-2, 4.3e-2),
    (Edg, 1, 2688, 8.4e-3, 2.1e-2),
    (Edg, 1, 10752, 2.1e-3, 1.1e-2),
    (Edg, 2, 672, 9.0e-4, 2.5e-3),
    (Edg, 2, 2688, 1.1e-4, 7.1e-4),
    (Edg, 2, 10752, 1.4e-5, 1.9e-4),
    (EdgHdg, 1, 672, 3.4e-2, 4.4e-2),
    (EdgHdg, 1, 2688, 8.6e-3, 2.2e-2),
    (EdgHdg, 1, 10752, 2.1e-3, 1.1e-2),
    (EdgHdg, 2, 672, 9.4e-4, 2.7e-3),
    (EdgHdg, 2, 2688, 1.2e-4, 7.5e-4),
    (EdgHdg, 2, 10752, 1.4e-5, 2.0e-4),
];

/// Timed criteria must not overlap with other solves.
fn serial() -> MutexGuard<'static, ()> {
    static LOCK: Mutex<()> = Mutex::new(());
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

fn verdict(n: u32, pass: bool, summary: &str, details: &[String]) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "criterion {n}: {} {summary}",
        if pass { "PASS" } else { "FAIL" }
    );
    for d in details {
        let _ = writeln!(out, "    {d}");
    }
    drop(out);
    assert!(
        pass,
        "criterion {n} failed: {summary}\n{}",
        details.join("\n")
    );
}

fn config(file: &str) -> StudyConfig {
    let path = format!("{}/../../studies/{file}", env!("CARGO_MANIFEST_DIR"));
    StudyConfig::load(&path, &[]).unwrap_or_else(|e| panic!("{path}: {e}"))
}

struct Timed {
    result: StudyResult,
    seconds: f64,
}

fn timed_study(file: &str) -> Timed {
    let clock = Instant::now();
    let result = run_study(&config(file)).unwrap();
    Timed {
        result,
        seconds: clock.elapsed().as_secs_f64(),
    }
}

macro_rules! cached_study {
    ($name:ident, $file:literal) => {
        fn $name() -> &'static Timed {
            static CELL: OnceLock<Timed> = OnceLock::new();
            CELL.get_or_init(|| timed_study($file))
        }
    };
}

cached_study!(kovasznay_study, "kovasznay.toml");
cached_study!(curl_study, "pressure_robustness.toml");
cached_study!(lshape_study, "lshape.toml");
cached_study!(lshape_p4_study, "lshape_p4.toml");
cached_study!(cavity_study, "cavity.toml");

fn series<'a>(rows: &'a [StudyRow], v: MethodVariant, k: usize) -> Vec<&'a StudyRow> {
    rows.iter().filter(|r| r.variant == v && r.k == k).collect()
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.3e}"))
}

#[test]
fn criterion_1_kovasznay_convergence() {
    let _g = serial();
    let study = kovasznay_study();
    let rows = &study.result.rows;
    let mut ok = study.result.all_converged();
    let mut details = vec![format!(
        "study wall time {:.1} s (budget {KOVASZNAY_BUDGET_S} s)",
        study.seconds
    )];
    ok &= study.seconds <= KOVASZNAY_BUDGET_S;
    for v in MethodVariant::ALL {
        for k in [1, 2] {
            let s = series(rows, v, k);
            let last = s.last().expect("rows for every variant and degree");
            let (ru, rp) = (
                last.rate_u.unwrap_or(f64::NAN),
                last.rate_p.unwrap_or(f64::NAN),
            );
            let rates_ok = (ru - (k + 1) as f64).abs() <= VELOCITY_RATE_TOL
                && (rp - k as f64).abs() <= PRESSURE_RATE_TOL;
            ok &= rates_ok;
            details.push(format!(
                "{v} P{k}: finest-pair rates u {ru:.3} (target {}), p {rp:.3} (target {k}) {}",
                k + 1,
                if rates_ok { "ok" } else { "OUT OF RANGE" }
            ));
            for &(_, _, cells, eu, ep) in TABLE1.iter().filter(|t| t.0 == v && t.1 == k) {
                let row = s.iter().min_by_key(|r| r.cells.abs_diff(cells)).unwrap();
                let within = |a: f64, b: f64| a / b <= TABLE_FACTOR && b / a <= TABLE_FACTOR;
                let (mu, mp) = (row.err_u.unwrap(), row.err_p.unwrap());
                let match_ok =
                    row.cells.abs_diff(cells) * 10 <= cells && within(mu, eu) && within(mp, ep);
                ok &= match_ok;
                details.push(format!(
                    "{v} P{k}: {} cells u {mu:.2e} vs {eu:.1e} at {cells}, p {mp:.2e} vs {ep:.1e} {}",
                    row.cells,
                    if match_ok { "ok" } else { "MISMATCH" }
                ));
            }
        }
    }
    verdict(1, ok, "Kovasznay rates and table errors", &details);
}

/// Test-side `||u||_{1}` of an exact solution by tensor Gauss quadrature on
/// `n x n` squares of the bounding box; `inside` drops points off the domain.
fn h1_norm(e: &dyn ExactSolution, b: [f64; 4], inside: impl Fn(Point) -> bool) -> f64 {
    let n = 300;
    let g = [0.5 - 0.5 / 3f64.sqrt(), 0.5 + 0.5 / 3f64.sqrt()];
    let (hx, hy) = ((b[2] - b[0]) / n as f64, (b[3] - b[1]) / n as f64);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            for gx in g {
                for gy in g {
                    let x = [b[0] + (i as f64 + gx) * hx, b[1] + (j as f64 + gy) * hy];
                    if !inside(x) {
                        continue;
                    }
                    let (u, d) = (e.velocity(x), e.velocity_gradient(x));
                    let v =
                        u[0] * u[0] + u[1] * u[1] + d.iter().flatten().map(|a| a * a).sum::<f64>();
                    s += 0.25 * hx * hy * v;
                }
            }
        }
    }
    s.sqrt()
}

fn velocity_scale(case: Case, nu: f64) -> f64 {
    let all = |_: Point| true;
    match case {
        Case::Kovasznay => h1_norm(&kovasznay(nu), [-0.5, -0.5, 1.0, 1.5], all),
        Case::Curl => h1_norm(&curl_case(nu), [0.0, 0.0, 1.0, 1.0], all),
        Case::Smooth => h1_norm(&smooth_case(nu), [0.0, 0.0, 1.0, 1.0], all),
        Case::Lshape => h1_norm(&l_shape_corner(), [-1.0, -1.0, 1.0, 1.0], |x| {
            !(x[0] < 0.0 && x[1] > 0.0)
        }),
        // lid speed at most 1 on a domain of unit-order size
        Case::Cavity => 1.0,
    }
}

#[test]
fn criterion_2_mass_conservation() {
    let _g = serial();
    let studies = [
        kovasznay_study(),
        curl_study(),
        lshape_study(),
        lshape_p4_study(),
        cavity_study(),
    ];
    let mut scales: BTreeMap<(String, u64), f64> = BTreeMap::new();
    let mut ok = true;
    let mut worst: BTreeMap<String, (f64, String)> = BTreeMap::new();
    let mut checked = 0;
    for st in studies {
        for r in st.result.rows.iter().filter(|r| r.converged) {
            let scale = *scales
                .entry((r.case.to_string(), r.nu.to_bits()))
                .or_insert_with(|| velocity_scale(r.case, r.nu));
            let rel = r.div_norm.unwrap() / scale;
            checked += 1;
            ok &= rel <= DIV_TOL;
            let key = format!("{} nu={:e}", r.case, r.nu);
            let label = format!(
                "{} P{} {} cells, |div| {:.2e}, ||u||_1 {:.3e}",
                r.variant,
                r.k,
                r.cells,
                r.div_norm.unwrap(),
                scale
            );
            let e = worst.entry(key).or_insert((0.0, String::new()));
            if rel > e.0 {
                *e = (rel, label);
            }
        }
    }
    let details: Vec<String> = worst
        .iter()
        .map(|(k, (rel, l))| format!("{k}: worst relative {rel:.2e} ({l})"))
        .collect();
    verdict(
        2,
        ok && checked > 0,
        &format!("relative divergence <= {DIV_TOL:e} on {checked} converged runs"),
        &details,
    );
}

#[test]
fn criterion_3_hdiv_dichotomy() {
    let _g = serial();
    let rows = &kovasznay_study().result.rows;
    let coarsest = rows.iter().map(|r| r.level).min().unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for r in rows.iter().filter(|r| r.level == coarsest) {
        let j = r.jump_norm.unwrap();
        let pass = if r.variant.hdiv_conforming() {
            j <= JUMP_CONFORMING_MAX
        } else {
            j >= JUMP_EDG_MIN
        };
        ok &= pass;
        details.push(format!(
            "{} P{} {} cells: normal jump {j:.2e} {}",
            r.variant,
            r.k,
            r.cells,
            if pass { "ok" } else { "WRONG SIDE" }
        ));
    }
    verdict(
        3,
        ok,
        "normal-jump seminorm on the coarsest Kovasznay mesh",
        &details,
    );
}

#[test]
fn criterion_4_pressure_robustness() {
    let _g = serial();
    let rows = &curl_study().result.rows;
    let mut ok = curl_study().result.all_converged();
    let mut details = Vec::new();
    for v in MethodVariant::ALL {
        let s = series(rows, v, 1);
        let at = |nu: f64| {
            s.iter()
                .find(|r| r.nu == nu)
                .expect("both viscosities present")
        };
        let (a, b) = (at(1.0), at(1e-6));
        let ratio = b.err_u.unwrap() / a.err_u.unwrap();
        let pass = a.cells >= ROBUST_MIN_CELLS
            && if v.hdiv_conforming() {
                ratio <= ROBUST_RATIO_MAX
            } else {
                ratio >= EDG_RATIO_MIN
            };
        ok &= pass;
        details.push(format!(
            "{v} P1 {} cells: ||u-u_h|| {:.2e} (nu=1) -> {:.2e} (nu=1e-6), ratio {ratio:.3e} {}",
            a.cells,
            a.err_u.unwrap(),
            b.err_u.unwrap(),
            if pass { "ok" } else { "OUT OF RANGE" }
        ));
    }
    verdict(
        4,
        ok,
        "velocity error ratio between nu = 1e-6 and nu = 1",
        &details,
    );
}

#[test]
fn criterion_5_minimal_regularity() {
    let _g = serial();
    let mut ok = true;
    let mut details = Vec::new();
    for (k, study) in [(1, lshape_study()), (4, lshape_p4_study())] {
        ok &= study.result.all_converged();
        for v in MethodVariant::ALL {
            let s = series(&study.result.rows, v, k);
            let last = s.last().unwrap();
            let (ru, rp) = (
                last.rate_u.unwrap_or(f64::NAN),
                last.rate_p.unwrap_or(f64::NAN),
            );
            let pass = (ru - LSHAPE_U_RATE.0).abs() <= LSHAPE_U_RATE.1
                && (rp - LSHAPE_P_RATE.0).abs() <= LSHAPE_P_RATE.1;
            ok &= pass;
            let all_u: Vec<String> = s.iter().map(|r| fmt_opt(r.rate_u)).collect();
            details.push(format!(
                "{v} P{k}-P{}: last-pair rates u {ru:.3}, p {rp:.3} (u rates by level {}) {}",
                k - 1,
                all_u.join(" "),
                if pass { "ok" } else { "OUT OF RANGE" }
            ));
        }
    }
    verdict(
        5,
        ok,
        "L-shape rates over the last refinement pair",
        &details,
    );
}

/// Structured mesh of the unit square with `n x m` squares, `|n - m| <= 1`,
/// and jittered interior vertices.
fn jittered_mesh(n: usize, m: usize, pattern: DiagonalPattern, jitter: &[f64]) -> Result<Mesh> {
    let base = generate_rectangle(0.0, 0.0, 1.0, 1.0, n, m, pattern)?;
    let boundary = base.boundary_vertex_flags();
    let (hx, hy) = (1.0 / n as f64, 1.0 / m as f64);
    let mut verts = base.vertices().to_vec();
    for (i, v) in verts.iter_mut().enumerate() {
        if !boundary[i] {
            v[0] += jitter[(2 * i) % jitter.len()] * hx;
            v[1] += jitter[(2 * i + 1) % jitter.len()] * hy;
        }
    }
    Mesh::from_cells(verts, base.cells().to_vec(), |_| 1)
}

#[test]
fn criterion_6_condensation_exactness() {
    let _g = serial();
    let patterns = [
        DiagonalPattern::Right,
        DiagonalPattern::Left,
        DiagonalPattern::Crisscross,
    ];
    let strategy = (
        1usize..=4,
        0usize..3,
        0usize..3,
        0usize..3,
        1usize..=2,
        proptest::collection::vec(-0.15f64..0.15, 16),
    );
    let mut runner = TestRunner::new(Config {
        cases: 48,
        failure_persistence: None,
        ..Config::default()
    });
    let worst = Mutex::new((0.0f64, String::new()));
    let tested = Mutex::new(0usize);
    let rejected = Mutex::new(Vec::new());
    let exact = kovasznay(1.0 / 40.0);
    let outcome = runner.run(&strategy, |(nx, dy, pat, var, k, jitter)| {
        let ny = (nx + dy).saturating_sub(1).max(1);
        let variant = MethodVariant::ALL[var];
        let mesh = jittered_mesh(nx, ny, patterns[pat], &jitter).unwrap();
        let d = build_dofmap(&mesh, k, variant).unwrap();
        let full_dim = d.n_u() + d.n_ubar() + d.n_p() + d.n_pbar();
        prop_assume!(full_dim <= DENSE_CAP);
        let f = |x: Point| exact.forcing(x);
        let g = |x: Point| exact.velocity(x);
        let alpha = penalty_parameter(k, variant);
        let sys = assemble_global(&mesh, &d, exact.nu, alpha, &f, &g).unwrap();
        let dense = dense_solve_full(&mesh, &sys).unwrap().to_full();
        let problem = Problem {
            mesh: &mesh,
            variant,
            k,
            nu: exact.nu,
            alpha: None,
            forcing: &f,
            boundary: &g,
        };
        let out = match problem.solve(&SolverSettings::default()) {
            Ok(out) => out,
            // the penalty is below the stability threshold of this cell shape
            Err(e @ stokes_hybrid::Error::SingularCellBlock { .. }) => {
                rejected
                    .lock()
                    .unwrap()
                    .push(format!("{variant} P{k} {nx}x{ny}: {e}"));
                return Err(TestCaseError::reject("singular cell block"));
            }
            Err(e) => panic!("{e}"),
        };
        prop_assert!(out.report.converged);
        let krylov = out.solution.to_full();
        let diff = krylov
            .iter()
            .zip(&dense)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let rel = diff / dense.iter().map(|a| a * a).sum::<f64>().sqrt();
        *tested.lock().unwrap() += 1;
        let mut w = worst.lock().unwrap();
        if rel > w.0 {
            *w = (
                rel,
                format!(
                    "{variant} P{k} {nx}x{ny} {:?}, {full_dim} unknowns",
                    patterns[pat]
                ),
            );
        }
        prop_assert!(
            rel <= CONDENSATION_TOL,
            "relative difference {rel:e} for {}",
            w.1
        );
        Ok(())
    });
    let (rel, label) = worst.into_inner().unwrap();
    let n = tested.into_inner().unwrap();
    let rejected = rejected.into_inner().unwrap();
    let mut details = vec![format!(
        "{n} instances, worst relative difference {rel:.2e} ({label})"
    )];
    details.push(format!(
        "{} instances rejected for a singular cell block",
        rejected.len()
    ));
    details.extend(rejected);
    if let Err(e) = &outcome {
        details.push(format!("{e}"));
    }
    verdict(
        6,
        outcome.is_ok() && n > 0,
        "condensed Krylov solve vs dense full solve",
        &details,
    );
}

#[test]
fn criterion_7_preconditioner_trend() {
    let _g = serial();
    let res = &cavity_study().result;
    let mut ok = res.all_converged();
    let levels: Vec<usize> = {
        let mut l: Vec<usize> = res.rows.iter().map(|r| r.level).collect();
        l.dedup();
        l
    };
    let mut details = vec![format!(
        "levels {:?}, cells {:?}",
        levels,
        series(&res.rows, Hdg, 1)
            .iter()
            .map(|r| r.cells)
            .collect::<Vec<_>>()
    )];
    ok &= levels.len() >= 4;
    for k in [1, 2] {
        for v in MethodVariant::ALL {
            let its: Vec<usize> = series(&res.rows, v, k).iter().map(|r| r.iters).collect();
            let (lo, hi) = (*its.iter().min().unwrap(), *its.iter().max().unwrap());
            let spread = hi as f64 / lo as f64;
            let pass = spread <= ITER_SPREAD_MAX;
            ok &= pass;
            details.push(format!(
                "{v} P{k}: iterations {its:?}, max/min {spread:.2} {}",
                if pass { "ok" } else { "TOO WIDE" }
            ));
        }
        let hdg = series(&res.rows, Hdg, k);
        let edg = series(&res.rows, Edg, k);
        for (h, e) in hdg.iter().zip(&edg) {
            let pass = e.iters as f64 <= EDG_ITER_FACTOR * h.iters as f64;
            ok &= pass;
            if !pass {
                details.push(format!(
                    "P{k} level {}: EDG {} > 1.1 x HDG {}",
                    h.level, e.iters, h.iters
                ));
            }
        }
    }
    verdict(7, ok, "MINRES iteration counts on the cavity", &details);
}

#[test]
fn criterion_8_relative_efficiency() {
    let _g = serial();
    let cfg = config("efficiency.toml");
    let mesh = cfg.mesh_for_level(cfg.levels[0]).unwrap();
    let exact = smooth_case(cfg.viscosities()[0]);
    let reps = 3;
    let mut ok = true;
    let mut details = Vec::new();
    for &k in &cfg.degrees {
        let mut size = BTreeMap::new();
        let mut time = BTreeMap::new();
        for v in MethodVariant::ALL {
            let mut best = f64::INFINITY;
            for _ in 0..reps {
                let out = solve_exact(&mesh, v, k, &exact, None, &cfg.solver).unwrap();
                ok &= out.report.converged;
                best = best.min(out.timings.total());
                size.insert(v, out.n_condensed);
            }
            time.insert(v, best);
        }
        for v in [Edg, EdgHdg] {
            let sr = size[&v] as f64 / size[&Hdg] as f64;
            let tr = time[&v] / time[&Hdg];
            let (sp, tp) = (sr <= SIZE_RATIO_MAX, tr <= TIME_RATIO_MAX);
            ok &= sp && tp;
            details.push(format!(
                "P{k} {} cells {v}: size {} / {} = {sr:.3} {}; time {:.3} s / {:.3} s = {tr:.3} {}",
                mesh.num_cells(),
                size[&v],
                size[&Hdg],
                if sp { "ok" } else { "ABOVE 0.7" },
                time[&v],
                time[&Hdg],
                if tp { "ok" } else { "ABOVE 1.0" }
            ));
        }
    }
    verdict(
        8,
        ok,
        "condensed sizes and end-to-end times relative to HDG",
        &details,
    );
}

/// `u = (x + 2y, 3x - y)`, `p = 0`, or the quadratic flow `u = (x^2, -2xy)`,
/// `p = x + y - 1`.
struct Polynomial {
    quadratic: bool,
}

impl ExactSolution for Polynomial {
    fn name(&self) -> &str {
        "polynomial"
    }
    fn nu(&self) -> f64 {
        1.0
    }
    fn velocity(&self, x: Point) -> [f64; 2] {
        if self.quadratic {
            [x[0] * x[0], -2.0 * x[0] * x[1]]
        } else {
            [x[0] + 2.0 * x[1], 3.0 * x[0] - x[1]]
        }
    }
    fn velocity_gradient(&self, x: Point) -> [[f64; 2]; 2] {
        if self.quadratic {
            [[2.0 * x[0], 0.0], [-2.0 * x[1], -2.0 * x[0]]]
        } else {
            [[1.0, 2.0], [3.0, -1.0]]
        }
    }
    fn pressure(&self, x: Point) -> Result<f64> {
        Ok(if self.quadratic {
            x[0] + x[1] - 1.0
        } else {
            0.0
        })
    }
    fn forcing(&self, _x: Point) -> [f64; 2] {
        if self.quadratic {
            [-2.0 + 1.0, 1.0]
        } else {
            [0.0, 0.0]
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn min_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let n = m.len();
    let a = DMatrix::from_fn(n, n, |i, j| m[i][j]);
    SymmetricEigen::new(a).eigenvalues.min()
}

#[test]
fn criterion_9_invariant_suites() {
    let _g = serial();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    let unit = generate_rectangle(0.0, 0.0, 1.0, 1.0, 2, 2, DiagonalPattern::Crisscross).unwrap();
    let two_cells = generate_rectangle(0.0, 0.0, 1.0, 1.0, 1, 1, DiagonalPattern::Right).unwrap();
    let ex = kovasznay(0.1);
    let f = |x: Point| ex.forcing(x);
    let g = |x: Point| ex.velocity(x);

    // symmetry, nullspace and coercivity of the assembled operators
    let (mut sym, mut kernel, mut min_eig) = (0.0f64, 0.0f64, f64::INFINITY);
    for v in MethodVariant::ALL {
        for k in 1..=3 {
            let d = build_dofmap(&unit, k, v).unwrap();
            let sys = assemble_global(&unit, &d, 1.0, penalty_parameter(k, v), &f, &g).unwrap();
            let (full, _) = sys.full_operator();
            let cs = condense(&sys).unwrap();
            let scale = |m: &stokes_hybrid::krylov::SparseMatrix| {
                m.triplets().map(|t| t.2.abs()).fold(0.0, f64::max)
            };
            sym = sym
                .max(full.symmetry_defect() / scale(&full))
                .max(cs.matrix.symmetry_defect() / scale(&cs.matrix));
            for nvec in cs.nullspace() {
                let r = cs.matrix.mul(&nvec);
                kernel =
                    kernel.max(r.iter().map(|x| x.abs()).fold(0.0, f64::max) / scale(&cs.matrix));
            }
            let d2 = build_dofmap(&two_cells, k, v).unwrap();
            let sys2 =
                assemble_global(&two_cells, &d2, 1.0, penalty_parameter(k, v), &f, &g).unwrap();
            let (full2, _) = sys2.full_operator();
            let nv = sys2.full_offsets()[2];
            let dense = full2.to_dense();
            let block: Vec<Vec<f64>> = dense[..nv].iter().map(|row| row[..nv].to_vec()).collect();
            min_eig = min_eig.min(min_eigenvalue(&block));
        }
    }
    details.push(format!("max relative symmetry defect {sym:.2e}"));
    details.push(format!(
        "max relative |S n| for the pressure kernel {kernel:.2e}"
    ));
    details.push(format!(
        "smallest eigenvalue of the velocity block on two cells {min_eig:.3e}"
    ));
    if sym > SYMMETRY_TOL {
        failures.push("symmetry");
    }
    if kernel > SYMMETRY_TOL {
        failures.push("pressure nullspace");
    }
    if !(min_eig > 0.0) {
        failures.push("coercivity");
    }

    // |||v|||_v <= |||v|||_v' for random discrete fields
    let mut rng_state = 0x2545_f491_4f6c_dd1du64;
    let mut next = move || {
        rng_state ^= rng_state << 13;
        rng_state ^= rng_state >> 7;
        rng_state ^= rng_state << 17;
        (rng_state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
    };
    let mut norm_ok = 0;
    for trial in 0..100 {
        let v = MethodVariant::ALL[trial % 3];
        let k = 1 + trial % 2;
        let d = build_dofmap(&unit, k, v).unwrap();
        let mut s = DiscreteSolution::zeros(&d);
        s.u.iter_mut()
            .chain(s.ubar.iter_mut())
            .for_each(|x| *x = next());
        let (nv, nvp, _) = triple_norms(&unit, &d, &s, penalty_parameter(k, v)).unwrap();
        if nv <= nvp * (1.0 + 1e-14) && nv > 0.0 {
            norm_ok += 1;
        }
    }
    details.push(format!(
        "norm inequality held for {norm_ok} of 100 random fields"
    ));
    if norm_ok != 100 {
        failures.push("norm inequality");
    }

    // quadrature against the closed-form monomial integrals
    let mut qerr = 0.0f64;
    for deg in 0..=20 {
        let tri = make_quadrature(RefDomain::Triangle, deg).unwrap();
        let seg = make_quadrature(RefDomain::Interval, deg).unwrap();
        for a in 0..=deg {
            let exact_seg = 1.0 / (a as f64 + 1.0);
            let got = seg.integrate(|p| p[0].powi(a as i32));
            qerr = qerr.max((got - exact_seg).abs() / exact_seg);
            for b in 0..=deg - a {
                let exact_tri = factorial(a) * factorial(b) / factorial(a + b + 2);
                let got = tri.integrate(|p| p[0].powi(a as i32) * p[1].powi(b as i32));
                qerr = qerr.max((got - exact_tri).abs() / exact_tri);
            }
        }
    }
    details.push(format!(
        "quadrature: max relative monomial error {qerr:.2e} up to degree 20"
    ));
    if qerr > QUADRATURE_TOL {
        failures.push("quadrature exactness");
    }

    // patch tests: polynomial flows inside the discrete space are reproduced
    let mut patch = 0.0f64;
    for (quadratic, k) in [(false, 1), (true, 2)] {
        let flow = Polynomial { quadratic };
        for v in MethodVariant::ALL {
            let out = solve_exact(&unit, v, k, &flow, None, &SolverSettings::default()).unwrap();
            let r = error_norms(&unit, &out.dofmap, &out.solution, &flow, out.alpha).unwrap();
            patch = patch.max(r.err_u).max(r.err_p);
        }
    }
    details.push(format!(
        "patch tests: max velocity/pressure error {patch:.2e}"
    ));
    if patch > PATCH_TOL {
        failures.push("patch test");
    }

    let summary = if failures.is_empty() {
        "all invariant suites hold".to_string()
    } else {
        format!("failing: {}", failures.join(", "))
    };
    verdict(9, failures.is_empty(), &summary, &details);
}
