//! Command-line front end for `clustercap`.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use clustercap::cuts::{raw_cut_matrix, CutCache, DEFAULT_NODE_BUDGET};
use clustercap::generate::{generate, GenParams, Shape};
use clustercap::instance::read_instance;
use clustercap::lp::export_lp_text;
use clustercap::models::{build_model, solve_capacity, ModelKind, SolveOptions};
use clustercap::recipe::build_parallel_graph;

pub mod bench;
pub mod verify;

#[derive(Debug, Parser)]
#[command(name = "clustercap", version, about = "Capacity planning for cluster tools with two load locks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Emit the reduced cut matrix (rows of 1 - Pi) as CSV.
    Cuts {
        #[arg(long)]
        chambers: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// All distinct rows before redundancy elimination.
        #[arg(long)]
        raw: bool,
        /// Print the parallelization graph instead.
        #[arg(long)]
        graph: bool,
    },
    /// Generate a benchmark instance.
    Gen {
        #[command(flatten)]
        params: GenArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance and print the solution as JSON.
    Solve {
        #[arg(long, default_value = "generalized")]
        model: ModelKind,
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-check the flow, cut and model routes on an instance.
    Verify {
        instance: PathBuf,
        /// Random allocations per check.
        #[arg(long, default_value_t = 200)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Time the generalized and alternative models; writes a CSV report.
    Bench(bench::BenchArgs),
    /// Write a model in LP text format.
    ExportLp {
        #[arg(long, default_value = "generalized")]
        model: ModelKind,
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, default_value_t = 0)]
    pub sizecat: u8,
    #[arg(long, default_value = "1:1")]
    pub shape: Shape,
    #[arg(long, default_value_t = 0)]
    pub locked: u8,
    #[arg(long, default_value_t = 2)]
    pub density: u8,
    #[arg(long, default_value_t = 3)]
    pub chambers: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl From<&GenArgs> for GenParams {
    fn from(a: &GenArgs) -> Self {
        GenParams {
            sizecat: a.sizecat,
            shape: a.shape,
            locked: a.locked,
            density: a.density,
            chambers: a.chambers,
            seed: a.seed,
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the exit code:
/// 0 on success, 1 on a domain error, 2 on a usage error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn execute(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Cuts { chambers, out, raw, graph } => {
            let text = if graph {
                let g = build_parallel_graph(chambers)?;
                let mut s = String::new();
                for &(a, b) in g.edges() {
                    s.push_str(&format!("{} -- {}\n", g.recipe(a).label(), g.recipe(b).label()));
                }
                s
            } else if raw {
                raw_cut_matrix(chambers, DEFAULT_NODE_BUDGET)?.to_csv()
            } else {
                CutCache::default_location().load_or_build(chambers)?.to_csv()
            };
            emit(out.as_deref(), &text)?;
        }
        Command::Gen { params, out } => {
            let inst = generate(&GenParams::from(&params))?;
            emit(out.as_deref(), &inst.to_json()?)?;
        }
        Command::Solve { model, instance, out } => {
            let inst = read_instance(&instance).with_context(|| format!("reading {}", instance.display()))?;
            let res = solve_capacity(&inst, model, &SolveOptions::default())?;
            let mut text = serde_json::to_string_pretty(&res)?;
            text.push('\n');
            emit(out.as_deref(), &text)?;
        }
        Command::Verify { instance, samples, seed } => {
            let inst = read_instance(&instance).with_context(|| format!("reading {}", instance.display()))?;
            let report = verify::verify_instance(&inst, samples, seed)?;
            for line in &report.lines {
                println!("{line}");
            }
            if !report.passed() {
                println!("FAIL");
                return Ok(1);
            }
            println!("PASS");
        }
        Command::Bench(args) => bench::run(&args)?,
        Command::ExportLp { model, instance, out } => {
            let inst = read_instance(&instance).with_context(|| format!("reading {}", instance.display()))?;
            let cuts = match model {
                ModelKind::Generalized => Some(CutCache::default_location().load_or_build(inst.chambers)?),
                _ => None,
            };
            let built = build_model(&inst, model, cuts.as_ref())?;
            emit(out.as_deref(), &export_lp_text(&built.problem))?;
        }
    }
    Ok(0)
}
