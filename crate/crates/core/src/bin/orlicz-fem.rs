//! Command-line front end. Thread count follows `RAYON_NUM_THREADS`; all
//! outputs are independent of it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Parser, Subcommand};

use orlicz_fem::interp::{stability_ratio_report, RatioKind, TestBank};
use orlicz_fem::mesh::{Pattern, SimplicialMesh};
use orlicz_fem::study::{builtin_case, run_convergence, solve_problem_file, CaseSpec, ProblemFile};
use orlicz_fem::weight::{weight_report, BallSampler, Weight};
use orlicz_fem::{NFunction, Result};

#[derive(Parser)]
#[command(name = "orlicz-fem", version, about = "Weighted Orlicz finite element toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Muckenhoupt-type diagnostics of ω = |x − c|^α on the unit square.
    CheckWeight {
        #[arg(long, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, num_args = 2, default_values_t = [0.5, 0.5])]
        center: Vec<f64>,
        /// Exponent of Φ and of the A_p class.
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
        #[arg(long, default_value_t = 500)]
        balls: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Stability and approximation ratio tables of the interpolants (CSV).
    InterpTest {
        /// Table kind, or `all`.
        #[arg(long, default_value = "all")]
        kind: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
        /// Exponent of ω = |x − (½,½)|^α.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        alpha: f64,
        #[arg(long, default_value_t = 4)]
        base: usize,
        #[arg(long, default_value_t = 4)]
        levels: usize,
        #[arg(long, default_value_t = 6)]
        quad_degree: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solves one problem file; writes a JSON report and the FE solution.
    Solve {
        problem: PathBuf,
        #[arg(long, default_value = "solve_report.json")]
        report: PathBuf,
        #[arg(long, default_value = "solution.fe")]
        solution: PathBuf,
    },
    /// Convergence study of a built-in case or a case file.
    Study {
        #[arg(long)]
        case: String,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        quad_degree: Option<usize>,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        #[arg(long, default_value = "table.csv")]
        csv: PathBuf,
    },
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::CheckWeight {
            alpha,
            center,
            p,
            kappa,
            balls,
            seed,
        } => {
            let w = Weight::radial_power([center[0], center[1]], alpha);
            let phi = NFunction::shifted_power(p, kappa)?;
            let sampler = BallSampler::new([0.0, 1.0, 0.0, 1.0], seed).with_balls(balls);
            let r = weight_report(&w, &phi, p, &sampler)?;
            println!("{}", serde_json::to_string_pretty(&r)?);
        }
        Command::InterpTest {
            kind,
            p,
            kappa,
            alpha,
            base,
            levels,
            quad_degree,
            seed,
            out,
        } => {
            let kinds = if kind == "all" {
                RatioKind::ALL.to_vec()
            } else {
                vec![RatioKind::parse(&kind)
                    .ok_or_else(|| orlicz_fem::Error::Parse(format!("unknown table kind '{kind}'")))?]
            };
            let phi = NFunction::shifted_power(p, kappa)?;
            let w = Weight::radial_power([0.5, 0.5], alpha);
            let mesh = Arc::new(SimplicialMesh::structured_rect(base, base, [0.0, 1.0, 0.0, 1.0], Pattern::CrissCross)?);
            let bank = TestBank::unit_square(&mesh, seed);
            let mut csv = String::from("level,h,kind,max_ratio,median_ratio\n");
            for k in kinds {
                for r in stability_ratio_report(k, &phi, &w, &bank, &mesh, levels, quad_degree) {
                    csv.push_str(&format!(
                        "{},{:?},{},{:?},{:?}\n",
                        r.level,
                        r.h,
                        k.name(),
                        r.max_ratio,
                        r.median_ratio
                    ));
                }
            }
            write_or_print(out.as_deref(), &csv)?;
        }
        Command::Solve {
            problem,
            report,
            solution,
        } => {
            let file: ProblemFile = serde_json::from_str(&fs::read_to_string(&problem)?)?;
            let dir = problem.parent().unwrap_or(Path::new("."));
            let s = solve_problem_file(&file, dir)?;
            fs::write(&report, serde_json::to_string_pretty(&s.report)?)?;
            fs::write(&solution, s.u.to_text())?;
            eprintln!(
                "converged: {}, iterations: {}, residual: {:e}",
                s.report.converged, s.report.iterations, s.report.final_residual
            );
        }
        Command::Study {
            case,
            levels,
            quad_degree,
            out,
            csv,
        } => {
            let mut spec: CaseSpec = match builtin_case(&case) {
                Some(c) => c,
                None => serde_json::from_str(&fs::read_to_string(&case).map_err(|_| {
                    orlicz_fem::Error::Parse(format!("'{case}' is neither a built-in case nor a readable file"))
                })?)?,
            };
            if let Some(l) = levels {
                spec.levels = l;
            }
            if let Some(q) = quad_degree {
                spec.quad_degree = q;
            }
            let r = run_convergence(&spec)?;
            fs::write(&out, r.to_json()?)?;
            fs::write(&csv, r.to_csv())?;
            eprint!("{}", r.to_csv());
            if let Some(f) = &r.failure {
                eprintln!("failure: {f}");
            }
            eprintln!("passed: {}", r.passed);
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
