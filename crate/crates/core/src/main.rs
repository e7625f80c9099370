//! Command-line front end: solve games from files, run the brute-force
//! oracle, export LP files, and reproduce the experimental protocol
//! (benchmark grid, timing regression, proportionality sweep).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use leastcore::{
    bench, build_flow_lp, build_p1, build_p2, certify, enumerate_minimal_winning, export_lp_file,
    least_core_bruteforce, least_core_p2, lp::P2SolveError, parse_game, DagOptions, LayeredDag,
    LeastCoreResult, ParsedGame, Rational, Scalar, SolverError, SolverOptions,
};

#[derive(Parser)]
#[command(name = "leastcore", version, about = "Least-core values of weighted voting games")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Keep unreachable DAG vertices (larger models, same optimum).
    #[arg(long, global = true)]
    no_prune: bool,
    /// Solve in exact rational arithmetic (small instances only).
    #[arg(long, global = true)]
    exact: bool,
    /// Certification tolerance.
    #[arg(long, global = true, default_value_t = 1e-6)]
    tol: f64,
    /// Seed for randomized commands.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Wall-clock limit per solve, in seconds.
    #[arg(long, global = true, value_name = "SEC")]
    time_limit: Option<f64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a game file through the DAG pipeline (P2).
    Solve { file: PathBuf },
    /// Brute-force least core over minimal winning coalitions (n <= 20).
    Oracle {
        file: PathBuf,
        /// Also run the P2 pipeline and report the difference.
        #[arg(long)]
        diff: bool,
    },
    /// Write a formulation as an LP-format file.
    Export {
        file: PathBuf,
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Formulation::P2)]
        formulation: Formulation,
        /// Payoff vector for the flow formulation, comma-separated.
        #[arg(long, value_name = "X1,X2,...")]
        x: Option<String>,
    },
    /// Timing grid over random instances; writes a CSV.
    Bench {
        /// Player counts, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40")]
        n: Vec<usize>,
        /// Weight upper bounds, comma-separated.
        #[arg(long, value_delimiter = ',', default_value = "10,20,30,40")]
        u: Vec<u64>,
        #[arg(long, default_value_t = 20)]
        instances: usize,
        #[arg(short, long)]
        out: PathBuf,
        /// Write zeros in the timing columns (byte-identical reruns).
        #[arg(long)]
        no_timing: bool,
    },
    /// Fit ln(time) = b0 + b1 ln n + b2 ln W+ to a bench CSV.
    Regress { csv: PathBuf },
    /// Proportionality sweep: how often is the returned payoff w/W+?
    Prop {
        #[arg(long, value_delimiter = ',', default_value = "10,12,14,16,18")]
        n: Vec<usize>,
        /// Weight draws per n; every integer quota in [W+/4, 3W+/4] is
        /// swept for each draw.
        #[arg(long, default_value_t = 2)]
        draws: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Formulation {
    P1,
    P2,
    Flow,
}

/// Process exit codes: 2 input, 3 solver, 4 size guard, 5 statistics.
enum AppError {
    Input(String),
    Solver(String),
    SizeGuard(String),
    Stats(String),
}

impl AppError {
    fn exit(self) -> ExitCode {
        let (code, label, msg) = match self {
            AppError::Input(m) => (2, "input error", m),
            AppError::Solver(m) => (3, "solver failure", m),
            AppError::SizeGuard(m) => (4, "size guard", m),
            AppError::Stats(m) => (5, "statistics error", m),
        };
        eprintln!("{label}: {msg}");
        ExitCode::from(code)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.exit(),
    }
}

fn run(cli: &Cli) -> Result<(), AppError> {
    match &cli.cmd {
        Cmd::Solve { file } => cmd_solve(cli, file),
        Cmd::Oracle { file, diff } => cmd_oracle(cli, file, *diff),
        Cmd::Export { file, out, formulation, x } => {
            cmd_export(cli, file, out, *formulation, x.as_deref())
        }
        Cmd::Bench { n, u, instances, out, no_timing } => {
            cmd_bench(cli, n, u, *instances, out, *no_timing)
        }
        Cmd::Regress { csv } => cmd_regress(cli, csv),
        Cmd::Prop { n, draws } => cmd_prop(cli, n, *draws),
    }
}

fn load_game(file: &PathBuf) -> Result<ParsedGame, AppError> {
    let text = std::fs::read_to_string(file)
        .map_err(|e| AppError::Input(format!("{}: {e}", file.display())))?;
    parse_game(&text).map_err(|e| AppError::Input(format!("{}: {e}", file.display())))
}

fn build_dag(game: &ParsedGame, no_prune: bool) -> Result<LayeredDag, AppError> {
    let opts = DagOptions::default();
    let dag = match game {
        ParsedGame::Scalar(g) => LayeredDag::build(g, &opts),
        ParsedGame::Vector(g) => LayeredDag::build_vector(g, &opts),
    }
    .map_err(|e| AppError::Input(e.to_string()))?;
    Ok(if no_prune { dag } else { dag.prune() })
}

fn solver_opts<S: Scalar>(cli: &Cli) -> SolverOptions<S> {
    SolverOptions {
        time_limit: cli.time_limit.map(Duration::from_secs_f64),
        ..SolverOptions::default()
    }
}

fn map_p2_err(e: P2SolveError) -> AppError {
    match e {
        P2SolveError::Solver(SolverError::ExactModeCapExceeded { rows, cols, cap }) => {
            AppError::SizeGuard(format!(
                "exact mode supports up to {cap} cells, model is {rows} x {cols}"
            ))
        }
        other => AppError::Solver(other.to_string()),
    }
}

fn rational_str(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

fn witness_str(members: &[usize]) -> String {
    let mut s = String::from("{");
    for (i, p) in members.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        let _ = write!(s, "{p}");
    }
    s.push('}');
    s
}

fn print_result_text<S: Scalar>(
    res: &LeastCoreResult<S>,
    rational: Option<String>,
    build_secs: f64,
    solve_secs: f64,
) {
    match rational {
        Some(r) => println!("eps* = {:.12} (= {r})", res.epsilon_star.to_f64()),
        None => println!("eps* = {:.12}", res.epsilon_star.to_f64()),
    }
    for (i, v) in res.payoff.iter().enumerate() {
        println!("x_{} = {:.12}", i + 1, v.to_f64());
    }
    println!("tight witness: {}", witness_str(&res.tight_witness.members_1based()));
    println!(
        "residuals: sum {:.3e}, negativity {:.3e}, duality gap {:.3e}",
        res.diagnostics.sum_residual.to_f64(),
        res.diagnostics.negativity.to_f64(),
        res.diagnostics.duality_gap.to_f64()
    );
    println!(
        "timings: build {build_secs:.6} s, solve {solve_secs:.6} s, {} iterations",
        res.diagnostics.iterations
    );
}

fn result_json<S: Scalar>(
    res: &LeastCoreResult<S>,
    rational: Option<String>,
    build_secs: f64,
    solve_secs: f64,
    exact: bool,
) -> serde_json::Value {
    json!({
        "epsilon_star": res.epsilon_star.to_f64(),
        "epsilon_star_rational": rational,
        "payoff": res.payoff.iter().map(|v| v.to_f64()).collect::<Vec<_>>(),
        "tight_witness": res.tight_witness.members_1based(),
        "diagnostics": {
            "sum_residual": res.diagnostics.sum_residual.to_f64(),
            "negativity": res.diagnostics.negativity.to_f64(),
            "duality_gap": res.diagnostics.duality_gap.to_f64(),
            "iterations": res.diagnostics.iterations,
        },
        "build_secs": build_secs,
        "solve_secs": solve_secs,
        "exact": exact,
    })
}

fn cmd_solve(cli: &Cli, file: &PathBuf) -> Result<(), AppError> {
    let game = load_game(file)?;
    let t0 = Instant::now();
    let dag = build_dag(&game, cli.no_prune)?;
    let build_secs = t0.elapsed().as_secs_f64();
    let t0 = Instant::now();
    if cli.exact {
        let res = least_core_p2::<Rational>(&dag, &solver_opts(cli)).map_err(map_p2_err)?;
        let solve_secs = t0.elapsed().as_secs_f64();
        let rational = Some(rational_str(&res.epsilon_star));
        if cli.json {
            println!("{}", result_json(&res, rational, build_secs, solve_secs, true));
        } else {
            print_result_text(&res, rational, build_secs, solve_secs);
        }
    } else {
        let res = least_core_p2::<f64>(&dag, &solver_opts(cli)).map_err(map_p2_err)?;
        let solve_secs = t0.elapsed().as_secs_f64();
        let report = certify(&dag, &res.payoff, &res.epsilon_star, &cli.tol);
        if !report.verdict {
            return Err(AppError::Solver(format!(
                "solution failed certification at tolerance {}: worst coalition gap {:.3e}",
                cli.tol, report.worst_coalition_gap
            )));
        }
        if cli.json {
            println!("{}", result_json(&res, None, build_secs, solve_secs, false));
        } else {
            print_result_text(&res, None, build_secs, solve_secs);
        }
    }
    Ok(())
}

const ORACLE_MAX_N: usize = 20;

fn cmd_oracle(cli: &Cli, file: &PathBuf, diff: bool) -> Result<(), AppError> {
    let game = load_game(file)?;
    if game.n() > ORACLE_MAX_N {
        return Err(AppError::SizeGuard(format!(
            "oracle enumerates coalitions and is capped at {ORACLE_MAX_N} players, game has {}",
            game.n()
        )));
    }
    let (brute, minimal) = match &game {
        ParsedGame::Scalar(g) => (
            least_core_bruteforce::<Rational>(g, ORACLE_MAX_N),
            enumerate_minimal_winning(g, ORACLE_MAX_N),
        ),
        ParsedGame::Vector(g) => (
            least_core_bruteforce::<Rational>(g, ORACLE_MAX_N),
            enumerate_minimal_winning(g, ORACLE_MAX_N),
        ),
    };
    let brute = brute.map_err(|e| AppError::Solver(e.to_string()))?;
    let minimal = minimal.map_err(|e| AppError::SizeGuard(e.to_string()))?;
    let pipeline_eps = if diff {
        let dag = build_dag(&game, cli.no_prune)?;
        let res = least_core_p2::<f64>(&dag, &solver_opts(cli)).map_err(map_p2_err)?;
        Some(res.epsilon_star)
    } else {
        None
    };
    if cli.json {
        println!(
            "{}",
            json!({
                "epsilon_star": Scalar::to_f64(&brute.epsilon_star),
                "epsilon_star_rational": rational_str(&brute.epsilon_star),
                "payoff": brute.payoff.iter().map(|v| Scalar::to_f64(v)).collect::<Vec<_>>(),
                "minimal_winning": minimal.iter().map(|c| c.members_1based()).collect::<Vec<_>>(),
                "pipeline_diff": pipeline_eps.map(|p| (p - Scalar::to_f64(&brute.epsilon_star)).abs()),
            })
        );
    } else {
        println!(
            "eps* = {} (= {:.12})",
            rational_str(&brute.epsilon_star),
            Scalar::to_f64(&brute.epsilon_star)
        );
        println!("{} minimal winning coalitions:", minimal.len());
        for c in &minimal {
            println!("  {}", witness_str(&c.members_1based()));
        }
        if let Some(p) = pipeline_eps {
            println!(
                "pipeline eps* = {:.12}, |diff| = {:.3e}",
                p,
                (p - Scalar::to_f64(&brute.epsilon_star)).abs()
            );
        }
    }
    Ok(())
}

fn cmd_export(
    cli: &Cli,
    file: &PathBuf,
    out: &PathBuf,
    formulation: Formulation,
    x: Option<&str>,
) -> Result<(), AppError> {
    let game = load_game(file)?;
    let model = match formulation {
        Formulation::P2 => build_p2::<f64>(&build_dag(&game, cli.no_prune)?),
        Formulation::P1 => {
            let built = match &game {
                ParsedGame::Scalar(g) => build_p1::<f64>(g, ORACLE_MAX_N),
                ParsedGame::Vector(g) => build_p1::<f64>(g, ORACLE_MAX_N),
            };
            built.map_err(|e| AppError::SizeGuard(e.to_string()))?
        }
        Formulation::Flow => {
            let x = x.ok_or_else(|| {
                AppError::Input("the flow formulation needs --x <X1,X2,...>".into())
            })?;
            let x: Vec<f64> = x
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|e| AppError::Input(format!("--x: {e}")))?;
            build_flow_lp(&build_dag(&game, cli.no_prune)?, &x)
                .map_err(|e| AppError::Input(e.to_string()))?
        }
    };
    let text = export_lp_file(&model);
    std::fs::write(out, &text)
        .map_err(|e| AppError::Input(format!("{}: {e}", out.display())))?;
    if cli.json {
        println!(
            "{}",
            json!({
                "path": out.display().to_string(),
                "rows": model.n_rows(),
                "columns": model.n_vars(),
            })
        );
    } else {
        println!(
            "wrote {} ({} rows, {} columns)",
            out.display(),
            model.n_rows(),
            model.n_vars()
        );
    }
    Ok(())
}

fn cmd_bench(
    cli: &Cli,
    n: &[usize],
    u: &[u64],
    instances: usize,
    out: &PathBuf,
    no_timing: bool,
) -> Result<(), AppError> {
    let cfg = bench::BenchConfig {
        n_list: n.to_vec(),
        u_list: u.to_vec(),
        instances,
        seed: cli.seed,
        timed: !no_timing,
    };
    let (rows, failures) = bench::run_bench(&cfg).map_err(|e| AppError::Input(e.to_string()))?;
    let file = std::fs::File::create(out)
        .map_err(|e| AppError::Input(format!("{}: {e}", out.display())))?;
    bench::write_csv(&rows, file).map_err(|e| AppError::Input(e.to_string()))?;
    let means: Vec<&bench::BenchRow> = rows.iter().filter(|r| r.kind == "cell_mean").collect();
    if cli.json {
        println!(
            "{}",
            json!({
                "path": out.display().to_string(),
                "failures": failures,
                "cells": means.iter().map(|r| json!({
                    "n": r.n, "u": r.u, "mean_w_plus": r.w_plus,
                    "mean_build_secs": r.build_secs, "mean_solve_secs": r.solve_secs,
                })).collect::<Vec<_>>(),
            })
        );
    } else {
        println!("wrote {} ({} failures)", out.display(), failures);
        println!("n\tU\tmean W+\tmean build s\tmean solve s");
        for r in means {
            println!(
                "{}\t{}\t{}\t{:.6}\t{:.6}",
                r.n, r.u, r.w_plus, r.build_secs, r.solve_secs
            );
        }
    }
    Ok(())
}

fn cmd_regress(cli: &Cli, csv: &PathBuf) -> Result<(), AppError> {
    let file = std::fs::File::open(csv)
        .map_err(|e| AppError::Input(format!("{}: {e}", csv.display())))?;
    let rows = bench::read_csv(file).map_err(|e| AppError::Input(e.to_string()))?;
    let fit = bench::regress(&rows).map_err(|e| AppError::Stats(e.to_string()))?;
    if cli.json {
        println!(
            "{}",
            json!({
                "beta0": fit.beta[0], "beta1": fit.beta[1], "beta2": fit.beta[2],
                "r_squared": fit.r_squared, "points": fit.points,
            })
        );
    } else {
        println!(
            "ln t = {:.6} + {:.6} ln n + {:.6} ln W+   (R^2 = {:.6}, {} points)",
            fit.beta[0], fit.beta[1], fit.beta[2], fit.r_squared, fit.points
        );
    }
    Ok(())
}

fn cmd_prop(cli: &Cli, n: &[usize], draws: usize) -> Result<(), AppError> {
    if n.is_empty() || draws == 0 {
        return Err(AppError::Input("need at least one n and one draw".into()));
    }
    let rows = bench::prop_experiment(n, draws, cli.seed, cli.tol);
    if cli.json {
        println!(
            "{}",
            json!(rows
                .iter()
                .map(|r| json!({
                    "n": r.n, "instances": r.instances, "proportional": r.proportional,
                    "skipped": r.skipped, "ratio": r.ratio,
                }))
                .collect::<Vec<_>>())
        );
    } else {
        println!("n\tinstances\tproportional\tratio");
        for r in rows {
            println!(
                "{}\t{}\t{}\t{:.1}%",
                r.n,
                r.instances,
                r.proportional,
                100.0 * r.ratio
            );
        }
    }
    Ok(())
}
