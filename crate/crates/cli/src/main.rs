use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use stokes_hybrid::mesh::{load_gmsh, Mesh};
use stokes_hybrid::study::{emit, run_study, Format, StudyConfig, StudyRow};

/// Hybridized DG Stokes solver studies.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a TOML config.
    Run {
        config: PathBuf,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = OutputFormat::Csv)]
        format: OutputFormat,
        /// Override a config entry, e.g. `--set solver.tol=1e-10`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Summarize a Gmsh 2.2 ASCII mesh.
    MeshInfo { msh: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

impl From<OutputFormat> for Format {
    fn from(f: OutputFormat) -> Self {
        match f {
            OutputFormat::Csv => Format::Csv,
            OutputFormat::Json => Format::Json,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            format,
            overrides,
        } => run(config, out, format.into(), &overrides),
        Command::MeshInfo { msh } => load_gmsh(&msh).map(|m| {
            print_mesh_info(&m);
            true
        }),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            log::error!("{e}");
            ExitCode::from(2)
        }
    }
}

fn run(
    config: PathBuf,
    out: PathBuf,
    format: Format,
    overrides: &[String],
) -> stokes_hybrid::Result<bool> {
    let cfg = StudyConfig::load(&config, overrides)?;
    let result = run_study(&cfg)?;
    print_table(&result.rows);
    for f in &result.failures {
        let r = &result.rows[f.row];
        log::warn!(
            "{} k={} level={} nu={:e}: {}",
            r.variant,
            r.k,
            r.level,
            r.nu,
            f.reason
        );
    }
    let path = emit(&result, format, &out, &cfg.stem())?;
    log::info!("wrote {}", path.display());
    Ok(result.all_converged())
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.prec$e}"))
}

fn print_table(rows: &[StudyRow]) {
    println!(
        "{:<8} {:>2} {:>3} {:>7} {:>8} {:>8} {:>9} {:>6} {:>9} {:>6} {:>9} {:>9} {:>6} {:>8}",
        "variant",
        "k",
        "lvl",
        "cells",
        "dofs",
        "nu",
        "err_u",
        "rate",
        "err_p",
        "rate",
        "div",
        "jump",
        "iters",
        "time_s"
    );
    for r in rows {
        let rate = |v: Option<f64>| v.map_or_else(|| "-".into(), |x| format!("{x:.2}"));
        println!(
            "{:<8} {:>2} {:>3} {:>7} {:>8} {:>8.1e} {:>9} {:>6} {:>9} {:>6} {:>9} {:>9} {:>6} {:>8.2}{}",
            r.variant.name(),
            r.k,
            r.level,
            r.cells,
            r.dofs_condensed,
            r.nu,
            opt(r.err_u, 2),
            rate(r.rate_u),
            opt(r.err_p, 2),
            rate(r.rate_p),
            opt(r.div_norm, 1),
            opt(r.jump_norm, 1),
            r.iters,
            r.time_s,
            if r.converged { "" } else { "  NOT CONVERGED" }
        );
    }
}

fn print_mesh_info(m: &Mesh) {
    let mut tags = BTreeMap::new();
    for f in m.facets().iter().filter(|f| f.is_boundary()) {
        *tags.entry(f.tag).or_insert(0usize) += 1;
    }
    println!("vertices        {}", m.num_vertices());
    println!("cells           {}", m.num_cells());
    println!("facets          {}", m.num_facets());
    println!("boundary facets {}", m.num_boundary_facets());
    for (tag, n) in tags {
        println!("  tag {tag:<4}      {n}");
    }
    println!("area            {:.6}", m.total_area());
    println!("h_max           {:.6}", m.h_max());
    match m.check_conforming() {
        Ok(()) => println!("conforming      yes"),
        Err(e) => println!("conforming      no ({e})"),
    }
}
