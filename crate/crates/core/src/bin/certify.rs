use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use certify_core::gallery;
use certify_core::run::{run_scenario, RunError, RunOutcome, EXIT_INPUT_ERROR};
use certify_core::scenario::{Check, Scenario};

/// Certify global invertibility of sigma-harmonic mappings of the unit disk.
#[derive(Parser)]
#[command(name = "certify", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files.
    Run {
        /// Scenario JSON files; several run concurrently, each into `<out>/<name>`.
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Built-in scenarios.
    Gallery {
        #[command(subcommand)]
        command: GalleryCommand,
    },
}

#[derive(Subcommand)]
enum GalleryCommand {
    /// Print the gallery names and descriptions.
    List,
    /// Run a gallery scenario.
    Run {
        name: String,
        /// Output directory (default: certify-out/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print a gallery scenario as JSON.
    Show { name: String },
}

#[derive(Args, Clone)]
struct Overrides {
    /// Number of boundary vertices.
    #[arg(long)]
    resolution: Option<usize>,
    /// Which boundary set to check.
    #[arg(long, value_enum)]
    check: Option<CheckArg>,
    /// Write per-vertex fields to fields.csv.
    #[arg(long)]
    dump_fields: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckArg {
    Main,
    Nonconvex,
    All,
}

impl Overrides {
    fn apply(&self, s: &mut Scenario) {
        if let Some(n) = self.resolution {
            s.resolution = n;
        }
        if let Some(c) = self.check {
            let mut checks: Vec<Check> = s.checks.iter().copied().filter(|c| !matches!(c, Check::Main | Check::Nonconvex)).collect();
            match c {
                CheckArg::Main => checks.push(Check::Main),
                CheckArg::Nonconvex => checks.push(Check::Nonconvex),
                CheckArg::All => checks.extend([Check::Main, Check::Nonconvex]),
            }
            checks.sort();
            s.checks = checks;
        }
        if self.dump_fields {
            s.dump_fields = true;
        }
    }
}

fn summarize(outcome: &Result<RunOutcome, RunError>, label: &str) -> i32 {
    match outcome {
        Ok(o) => {
            let main = o.certificates.values().next();
            let min = main.map(|c| c.min_boundary_det).unwrap_or(f64::NAN);
            println!("{}: {:?} (min boundary det DU {:.6e}) -> {}", o.name, o.verdict, min, o.out_dir.display());
            o.exit_code
        }
        Err(e) => {
            eprintln!("{label}: {e}");
            e.exit_code()
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("CERTIFY_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn run_files(paths: &[PathBuf], out: &Path, overrides: &Overrides) -> i32 {
    let batch = paths.len() > 1;
    let results: Vec<(String, Result<RunOutcome, RunError>)> = paths
        .par_iter()
        .map(|path| {
            let label = path.display().to_string();
            let result = Scenario::from_file(path).map_err(RunError::Input).and_then(|mut s| {
                overrides.apply(&mut s);
                let dir = if batch { out.join(&s.name) } else { out.to_path_buf() };
                let base = path.parent().unwrap_or(Path::new("."));
                run_scenario(&s, base, &dir)
            });
            (label, result)
        })
        .collect();
    results.iter().map(|(label, r)| summarize(r, label)).max().unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let code = match cli.command {
        Command::Run { scenarios, out, overrides } => run_files(&scenarios, &out, &overrides),
        Command::Gallery { command } => match command {
            GalleryCommand::List => {
                let mut out = std::io::stdout().lock();
                for e in gallery::GALLERY {
                    // a closed pipe (`| head`) is not an error here
                    if writeln!(out, "{:<20} {}", e.name, e.description).is_err() {
                        break;
                    }
                }
                0
            }
            GalleryCommand::Show { name } => match gallery::find(&name) {
                Some(e) => {
                    let text = serde_json::to_string_pretty(&e.scenario()).expect("scenario serializes");
                    let _ = writeln!(std::io::stdout().lock(), "{text}");
                    0
                }
                None => unknown(&name),
            },
            GalleryCommand::Run { name, out, overrides } => match gallery::find(&name) {
                Some(e) => {
                    let mut s = e.scenario();
                    overrides.apply(&mut s);
                    let out = out.unwrap_or_else(|| PathBuf::from("certify-out").join(&name));
                    summarize(&run_scenario(&s, Path::new("."), &out), &name)
                }
                None => unknown(&name),
            },
        },
    };
    ExitCode::from(code as u8)
}

fn unknown(name: &str) -> i32 {
    eprintln!("unknown gallery scenario `{name}`; known: {}", gallery::names().join(", "));
    EXIT_INPUT_ERROR
}
