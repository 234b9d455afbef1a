//! Command-line driver: problem generation, hierarchy inspection, cycle
//! evaluation, spectral analysis, evolution runs, time-step sweeps, and the
//! hybrid diagonal/AMG solver.

use clap::{Args, Parser, Subcommand};
use flexamg::cycle::{
    assemble_iteration_matrix, dense_eigenvalues, run_solver, FlexProgram, SolveOptions, TolMode,
};
use flexamg::dsl::{emit_program, export_dot, parse_program};
use flexamg::evolve::{evolve, RunConfig};
use flexamg::krylov::{
    hybrid_solve, pcg, reference_solver_program, HybridConfig, Preconditioner,
};
use flexamg::problems::{
    build_anisotropic_poisson, build_timestep_matrix, diagonal_dominance_ratio, random_vector,
    PoissonSpec, TimestepSpec,
};
use flexamg::setup::{build_hierarchy, Hierarchy, HierarchyConfig};
use flexamg::Error;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "flexamg", about = "Flexible AMG cycle design and evaluation")]
struct Cli {
    /// Master seed for stochastic components (default 0).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for population evaluation (default 1).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON run configuration (evolve); explicit flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct HierarchyArgs {
    /// Strength-of-connection threshold.
    #[arg(long, default_value_t = 0.25)]
    theta: f64,
    /// Coarsest-level size cap.
    #[arg(long, default_value_t = 16)]
    coarse_max: usize,
    /// Row-partition block count for hybrid and l1 smoothers.
    #[arg(long, default_value_t = 8)]
    blocks: usize,
}

impl HierarchyArgs {
    fn config(&self, seed: u64) -> HierarchyConfig {
        HierarchyConfig {
            theta: self.theta,
            coarse_size_max: self.coarse_max,
            partition_blocks: self.blocks,
            seed,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write a generated problem as Matrix Market plus a JSON sidecar.
    GenProblem {
        /// poisson:<nd>:<c1>,<c2>,<c3> or timestep:<nd>:<k>
        #[arg(long)]
        problem: String,
        /// Output path (.mtx); the sidecar gets a .json suffix.
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Print per-level rows, nnz, and operator complexity as CSV.
    HierarchyInfo {
        #[arg(long)]
        problem: String,
        #[command(flatten)]
        hier: HierarchyArgs,
    },
    /// Run a solver (reference name or cycle file) and emit solve-stats CSV.
    Eval {
        /// Reference name (default, tuned1..tuned6, tuned) or a .cycle file.
        #[arg(long)]
        solver: String,
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// abs or rel stopping rule.
        #[arg(long, default_value = "abs")]
        tol_mode: String,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        /// Apply the cycle as a CG preconditioner instead of standalone.
        #[arg(long)]
        pcg: bool,
        #[command(flatten)]
        hier: HierarchyArgs,
    },
    /// Iteration-matrix eigenvalues as CSV (re, im), finest size capped.
    Spectrum {
        #[arg(long)]
        solver: String,
        #[arg(long)]
        problem: String,
        #[command(flatten)]
        hier: HierarchyArgs,
    },
    /// DOT rendering of a cycle.
    ExportDot {
        #[arg(long)]
        solver: String,
        /// Problem used to size the hierarchy the cycle runs on.
        #[arg(long, default_value = "poisson:8:1,1,1")]
        problem: String,
        #[arg(short, long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        hier: HierarchyArgs,
    },
    /// Evolve flexible cycles; writes JSONL log, Pareto CSV, and cycles.
    Evolve {
        /// Built-in preset: desk (the laptop-scale parameters).
        #[arg(long)]
        preset: Option<String>,
        /// Output directory (falls back to the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve every step of the surrogate sequence; CSV per step.
    Timesteps {
        #[arg(long)]
        solver: String,
        #[arg(long, default_value_t = 16)]
        nd: usize,
        #[arg(long, default_value_t = 20)]
        kmax: usize,
        #[arg(long, default_value_t = 20.0)]
        dt: f64,
        #[arg(long, default_value_t = 50.0)]
        reaction_scale: f64,
        #[arg(long, default_value_t = 0.7)]
        decay: f64,
        /// amg, diag, or hybrid preconditioning.
        #[arg(long, default_value = "hybrid")]
        mode: String,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 2000)]
        max_iter: usize,
        #[arg(long, default_value_t = 0.65)]
        threshold: f64,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[command(flatten)]
        hier: HierarchyArgs,
    },
    /// Hybrid diagonal-to-AMG solve of a single system.
    Hybrid {
        #[arg(long)]
        solver: String,
        #[arg(long)]
        problem: String,
        #[arg(long, default_value_t = 0.65)]
        threshold: f64,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
        #[arg(long, default_value_t = 2000)]
        max_iter: usize,
        #[command(flatten)]
        hier: HierarchyArgs,
    },
}

/// Exit 2 for validation problems, 1 for runtime failures.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Invalid(_)
        | Error::UnknownSolver(_)
        | Error::InvalidProgram { .. }
        | Error::CapExceeded(_) => 2,
        _ => 1,
    }
}

enum ProblemKind {
    Poisson(PoissonSpec),
    Timestep(TimestepSpec, usize),
}

fn parse_problem(text: &str) -> Result<ProblemKind, Error> {
    let parts: Vec<&str> = text.split(':').collect();
    match parts.as_slice() {
        ["poisson", nd, coeffs] => {
            let nd: usize = nd
                .parse()
                .map_err(|_| Error::Invalid(format!("bad grid size in '{text}'")))?;
            let c: Vec<f64> = coeffs
                .split(',')
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| Error::Invalid(format!("bad coefficients in '{text}'")))?;
            if c.len() != 3 {
                return Err(Error::Invalid(format!(
                    "poisson problem needs 3 coefficients, got {}",
                    c.len()
                )));
            }
            Ok(ProblemKind::Poisson(PoissonSpec::new(c[0], c[1], c[2], nd)?))
        }
        ["timestep", nd, k] => {
            let nd: usize = nd
                .parse()
                .map_err(|_| Error::Invalid(format!("bad grid size in '{text}'")))?;
            let k: usize = k
                .parse()
                .map_err(|_| Error::Invalid(format!("bad step index in '{text}'")))?;
            let spec = TimestepSpec {
                nd,
                k_max: k.max(TimestepSpec::default().k_max),
                ..TimestepSpec::default()
            };
            Ok(ProblemKind::Timestep(spec, k))
        }
        _ => Err(Error::Invalid(format!(
            "problem must be poisson:<nd>:<c1>,<c2>,<c3> or timestep:<nd>:<k>, got '{text}'"
        ))),
    }
}

impl ProblemKind {
    fn build(&self) -> Result<flexamg::sparse::SparseMatrix, Error> {
        match self {
            ProblemKind::Poisson(spec) => build_anisotropic_poisson(spec),
            ProblemKind::Timestep(spec, k) => build_timestep_matrix(spec, *k),
        }
    }

    fn sidecar_json(&self) -> String {
        match self {
            ProblemKind::Poisson(spec) => serde_json::json!({
                "kind": "poisson",
                "nd": spec.nd,
                "c": [spec.c1, spec.c2, spec.c3],
            })
            .to_string(),
            ProblemKind::Timestep(spec, k) => serde_json::json!({
                "kind": "timestep",
                "nd": spec.nd,
                "k": k,
                "k_max": spec.k_max,
                "dt": spec.dt,
                "reaction_scale": spec.reaction_scale,
                "decay": spec.decay,
            })
            .to_string(),
        }
    }
}

/// Resolves a solver argument: a catalog name or a cycle-DSL file, retargeted
/// to the hierarchy.
fn resolve_solver(solver: &str, hierarchy: &Hierarchy) -> Result<FlexProgram, Error> {
    let prog = if Path::new(solver).exists() {
        let text = std::fs::read_to_string(solver)?;
        parse_program(&text)?.retarget(hierarchy.top_level())
    } else {
        reference_solver_program(solver, hierarchy)?
    };
    flexamg::cycle::validate_program(&prog, hierarchy)?;
    Ok(prog)
}

fn tol_mode_of(text: &str) -> Result<TolMode, Error> {
    match text {
        "abs" | "absolute" => Ok(TolMode::Absolute),
        "rel" | "relative" => Ok(TolMode::Relative),
        other => Err(Error::Invalid(format!(
            "tol-mode must be abs or rel, got '{other}'"
        ))),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let seed = cli.seed.unwrap_or(0);
    match cli.command {
        Command::GenProblem { problem, out } => {
            let kind = parse_problem(&problem)?;
            let a = kind.build()?;
            flexamg::mm::write_matrix_to_path(&out, &a)?;
            let sidecar = out.with_extension("json");
            std::fs::write(&sidecar, kind.sidecar_json() + "\n")?;
            println!(
                "wrote {} ({}x{}, {} nnz) and {}",
                out.display(),
                a.nrows(),
                a.ncols(),
                a.nnz(),
                sidecar.display()
            );
            Ok(())
        }
        Command::HierarchyInfo { problem, hier } => {
            let a = parse_problem(&problem)?.build()?;
            let h = build_hierarchy(a, &hier.config(seed))?;
            let fine_nnz = h.finest().a.nnz() as f64;
            println!("level,rows,nnz,op_complexity");
            for l in (0..h.num_levels()).rev() {
                let lvl = h.level(l);
                println!(
                    "{l},{},{},{}",
                    lvl.a.nrows(),
                    lvl.a.nnz(),
                    lvl.a.nnz() as f64 / fine_nnz
                );
            }
            Ok(())
        }
        Command::Eval {
            solver,
            problem,
            tol,
            tol_mode,
            max_iter,
            pcg: use_pcg,
            hier,
        } => {
            let a = parse_problem(&problem)?.build()?;
            let n = a.nrows();
            let h = build_hierarchy(a, &hier.config(seed))?;
            let prog = resolve_solver(&solver, &h)?;
            println!("solver,problem,n,rho,wu_total,converged");
            if use_pcg {
                let b = random_vector(n, seed.wrapping_add(9001));
                let precond = Preconditioner::Amg {
                    program: &prog,
                    hierarchy: &h,
                };
                let res = pcg(&h.finest().a, &b, &vec![0.0; n], &precond, tol, max_iter)?;
                println!(
                    "{solver},\"{problem}\",{},{},{},{}",
                    res.stats.n, res.stats.rho, res.stats.wu_total, res.stats.converged
                );
            } else {
                let opts = SolveOptions {
                    tol,
                    tol_mode: tol_mode_of(&tol_mode)?,
                    max_iter,
                };
                let b = vec![0.0; n];
                let x0 = random_vector(n, seed.wrapping_add(9001));
                let stats = run_solver(&prog, &h, &b, &x0, &opts)?;
                println!(
                    "{solver},\"{problem}\",{},{},{},{}",
                    stats.n, stats.rho, stats.wu_total, stats.converged
                );
            }
            Ok(())
        }
        Command::Spectrum { solver, problem, hier } => {
            let a = parse_problem(&problem)?.build()?;
            let h = build_hierarchy(a, &hier.config(seed))?;
            let prog = resolve_solver(&solver, &h)?;
            let e = assemble_iteration_matrix(&prog, &h)?;
            println!("re,im");
            for (re, im) in dense_eigenvalues(&e)? {
                println!("{re},{im}");
            }
            Ok(())
        }
        Command::ExportDot { solver, problem, out, hier } => {
            let a = parse_problem(&problem)?.build()?;
            let h = build_hierarchy(a, &hier.config(seed))?;
            let prog = resolve_solver(&solver, &h)?;
            let dot = export_dot(&prog);
            match out {
                Some(path) => std::fs::write(path, dot)?,
                None => print!("{dot}"),
            }
            Ok(())
        }
        Command::Evolve { preset, out } => {
            let config = match (&cli.config, preset.as_deref()) {
                (Some(path), _) => {
                    let text = std::fs::read_to_string(path)?;
                    serde_json::from_str::<RunConfig>(&text)
                        .map_err(|e| Error::Invalid(format!("config {}: {e}", path.display())))?
                }
                (None, Some("desk")) => RunConfig::desk(seed),
                (None, Some(other)) => {
                    return Err(Error::Invalid(format!("unknown preset '{other}'")))
                }
                (None, None) => {
                    return Err(Error::Invalid(
                        "evolve needs --preset desk or --config <json>".into(),
                    ))
                }
            };
            let mut params = config.evo.unwrap_or_default();
            if let Some(s) = cli.seed {
                params.seed = s;
            }
            if let Some(w) = cli.workers {
                params.workers = w;
            }
            let grammar = config.grammar.build()?;
            let mut hier_cfg = config.hierarchy;
            hier_cfg.seed = params.seed;
            let problems = config
                .problems
                .iter()
                .map(|spec| spec.instantiate(&hier_cfg))
                .collect::<Result<Vec<_>, _>>()?;
            let out = out
                .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("evolve-out"));
            let result = evolve(&grammar, &problems, &params)?;
            write_evolve_outputs(&out, &result, &problems)?;
            println!(
                "evolved {} generations; front size {}; outputs in {}",
                params.t_max,
                result.front.len(),
                out.display()
            );
            Ok(())
        }
        Command::Timesteps {
            solver,
            nd,
            kmax,
            dt,
            reaction_scale,
            decay,
            mode,
            tol,
            max_iter,
            threshold,
            window,
            hier,
        } => {
            let spec = TimestepSpec {
                nd,
                k_max: kmax,
                dt,
                reaction_scale,
                decay,
            };
            spec.validate()?;
            let hcfg = hier.config(seed);
            println!("k,parity,eta,n,rho,wu_total,converged,switched");
            for k in 1..=kmax {
                let a = build_timestep_matrix(&spec, k)?;
                let n = a.nrows();
                let eta = diagonal_dominance_ratio(&a);
                let b = random_vector(n, seed.wrapping_add(7000 + k as u64));
                let parity = if k % 2 == 1 { "odd" } else { "even" };
                match mode.as_str() {
                    "diag" => {
                        let res = pcg(
                            &a,
                            &b,
                            &vec![0.0; n],
                            &Preconditioner::diagonal_of(&a),
                            tol,
                            max_iter,
                        )?;
                        println!(
                            "{k},{parity},{eta},{},{},{},{},false",
                            res.stats.n, res.stats.rho, res.stats.wu_total,
                            res.stats.converged
                        );
                    }
                    "amg" => {
                        // Hierarchy rebuilt for every step's matrix.
                        let h = build_hierarchy(a.clone(), &hcfg)?;
                        let prog = resolve_solver(&solver, &h)?;
                        let precond = Preconditioner::Amg {
                            program: &prog,
                            hierarchy: &h,
                        };
                        let res = pcg(&a, &b, &vec![0.0; n], &precond, tol, max_iter)?;
                        println!(
                            "{k},{parity},{eta},{},{},{},{},false",
                            res.stats.n, res.stats.rho, res.stats.wu_total,
                            res.stats.converged
                        );
                    }
                    "hybrid" => {
                        // The program shape comes from a hierarchy on this
                        // step's matrix; hybrid_solve rebuilds on switch.
                        let h = build_hierarchy(a.clone(), &hcfg)?;
                        let prog = resolve_solver(&solver, &h)?;
                        let cfg = HybridConfig {
                            convergence_threshold: threshold,
                            check_window: window,
                        };
                        let outcome = hybrid_solve(&a, &b, &prog, &hcfg, &cfg, tol, max_iter)?;
                        println!(
                            "{k},{parity},{eta},{},{},{},{},{}",
                            outcome.stats.n,
                            outcome.stats.rho,
                            outcome.stats.wu_total,
                            outcome.stats.converged,
                            outcome.switched_at.is_some()
                        );
                    }
                    other => {
                        return Err(Error::Invalid(format!(
                            "mode must be amg, diag, or hybrid; got '{other}'"
                        )))
                    }
                }
            }
            Ok(())
        }
        Command::Hybrid {
            solver,
            problem,
            threshold,
            window,
            tol,
            max_iter,
            hier,
        } => {
            let a = parse_problem(&problem)?.build()?;
            let n = a.nrows();
            let hcfg = hier.config(seed);
            let h = build_hierarchy(a.clone(), &hcfg)?;
            let prog = resolve_solver(&solver, &h)?;
            let b = random_vector(n, seed.wrapping_add(9001));
            let cfg = HybridConfig {
                convergence_threshold: threshold,
                check_window: window,
            };
            let outcome = hybrid_solve(&a, &b, &prog, &hcfg, &cfg, tol, max_iter)?;
            println!("problem,switched_at,n,rho,wu_total,converged");
            println!(
                "\"{problem}\",{},{},{},{},{}",
                outcome
                    .switched_at
                    .map_or("never".to_string(), |k| k.to_string()),
                outcome.stats.n,
                outcome.stats.rho,
                outcome.stats.wu_total,
                outcome.stats.converged
            );
            Ok(())
        }
    }
}

fn write_evolve_outputs(
    out_dir: &Path,
    result: &flexamg::evolve::EvolveResult,
    problems: &[flexamg::evolve::ProblemInstance],
) -> Result<(), Error> {
    std::fs::create_dir_all(out_dir)?;
    // Per-generation JSONL: a summary line, then one line per individual.
    let mut log =
        std::io::BufWriter::new(std::fs::File::create(out_dir.join("generations.jsonl"))?);
    for gen in &result.generations {
        writeln!(
            log,
            "{}",
            serde_json::json!({
                "gen": gen.generation,
                "hypervolume": gen.hypervolume,
                "population": gen.individuals.len(),
            })
        )?;
        for ind in &gen.individuals {
            writeln!(
                log,
                "{}",
                serde_json::json!({
                    "gen": gen.generation,
                    "id": ind.id,
                    "genotype": ind.genotype,
                    "fitness": ind.fitness,
                    "n": ind.n,
                    "converged": ind.converged,
                    "wu_total": ind.wu_total,
                })
            )?;
        }
    }
    log.flush()?;
    // Final Pareto front CSV.
    let mut csv = String::from("id,cost_per_iter,rho,n,wu_total\n");
    for &idx in &result.front {
        let ind = &result.population[idx];
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            ind.id, ind.fitness[0], ind.fitness[1], ind.meta.n, ind.meta.wu_total
        ));
    }
    std::fs::write(out_dir.join("pareto.csv"), csv)?;
    // Cycle DSL and DOT per front member, retargeted to the first problem.
    if let Some(problem) = problems.first() {
        let top = problem.hierarchy.top_level();
        for &idx in &result.front {
            let ind = &result.population[idx];
            let prog = ind.program.retarget(top);
            std::fs::write(
                out_dir.join(format!("front_{}.cycle", ind.id)),
                emit_program(&prog),
            )?;
            std::fs::write(
                out_dir.join(format!("front_{}.dot", ind.id)),
                export_dot(&prog),
            )?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
