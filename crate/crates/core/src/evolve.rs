//! Grammar-guided genetic programming over cycle programs: population
//! initialization, fitness evaluation over proxy problems, binary-tournament
//! variation, NSGA-II survival, and deterministic run logging.

use crate::cycle::{cycle_work_units, run_solver, FlexProgram, SolveOptions, TolMode};
use crate::grammar::{genotype_hash, DerivationTree, Grammar};
use crate::krylov::{pcg, Preconditioner};
use crate::nsga::{hypervolume_2d, nsga2_select, rank_population, non_dominated_sort, RankedPoint};
use crate::problems::{
    build_anisotropic_poisson, build_timestep_matrix, random_vector, PoissonSpec, TimestepSpec,
};
use crate::setup::{build_hierarchy, Hierarchy, HierarchyConfig};
use crate::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Reference point for front hypervolume logging (cost/iter, rho).
pub const HYPERVOLUME_REF: [f64; 2] = [1.0e4, 11.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitnessMode {
    /// Deterministic work units per iteration.
    WorkUnits,
    /// Median-of-3 wall-clock seconds per iteration.
    WallClock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    /// Run the cycle as a stationary solver.
    Standalone,
    /// Use the cycle as a CG preconditioner.
    Pcg,
}

/// Evolution parameters; defaults follow the full-scale configuration
/// (mu = lambda = 256, rho0 = 2048, pc = 0.7, t_max = 100).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvoParams {
    pub mu: usize,
    pub lambda: usize,
    pub rho0: usize,
    pub pc: f64,
    pub t_max: usize,
    pub seed: u64,
    /// Chain budget for initial random derivations.
    pub init_max_chain: usize,
    pub fitness_mode: FitnessMode,
    pub workers: usize,
    /// Solver iteration cap during evaluation.
    pub max_iter: usize,
}

impl Default for EvoParams {
    fn default() -> Self {
        Self {
            mu: 256,
            lambda: 256,
            rho0: 2048,
            pc: 0.7,
            t_max: 100,
            seed: 0,
            init_max_chain: 16,
            fitness_mode: FitnessMode::WorkUnits,
            workers: 1,
            max_iter: 100,
        }
    }
}

impl EvoParams {
    /// Laptop-scale preset used by the acceptance experiments.
    pub fn desk(seed: u64) -> Self {
        Self {
            mu: 32,
            lambda: 32,
            rho0: 128,
            t_max: 20,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.mu == 0 || self.lambda == 0 || self.rho0 == 0 {
            return Err(Error::Invalid("population sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.pc) {
            return Err(Error::Invalid(format!("pc={} outside [0,1]", self.pc)));
        }
        Ok(())
    }
}

/// A fully prepared proxy problem: prebuilt hierarchy, right-hand side,
/// initial guess, stopping rule, and how candidates are applied to it.
pub struct ProblemInstance {
    pub name: String,
    pub hierarchy: Hierarchy,
    pub b: Vec<f64>,
    pub x0: Vec<f64>,
    pub tol: f64,
    pub tol_mode: TolMode,
    pub mode: EvalMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMeta {
    /// Mean iteration count over the problem set.
    pub n: f64,
    /// True when every problem converged without breakdown.
    pub converged: bool,
    /// Mean work units to the stopping point.
    pub wu_total: f64,
}

#[derive(Debug, Clone)]
pub struct Individual {
    pub id: u64,
    pub tree: DerivationTree,
    /// Phenotype at the grammar's native depth; retargeted per problem.
    pub program: FlexProgram,
    pub fitness: [f64; 2],
    pub meta: EvalMeta,
}

/// Evaluates one genotype over the problem set: fitness is (mean cost per
/// iteration, mean convergence rate), with diverged or broken-down runs
/// clamped to (+inf, 10).
pub fn evaluate_tree(
    grammar: &Grammar,
    tree: &DerivationTree,
    problems: &[ProblemInstance],
    params: &EvoParams,
) -> ([f64; 2], EvalMeta) {
    let native = grammar.decode_native(tree);
    let mut cost_sum = 0.0;
    let mut rho_sum = 0.0;
    let mut n_sum = 0.0;
    let mut wu_sum = 0.0;
    let mut all_ok = true;
    for problem in problems {
        let prog = native.retarget(problem.hierarchy.top_level());
        let (stats, failed) = match problem.mode {
            EvalMode::Standalone => {
                let opts = SolveOptions {
                    tol: problem.tol,
                    tol_mode: problem.tol_mode,
                    max_iter: params.max_iter,
                };
                match run_solver(&prog, &problem.hierarchy, &problem.b, &problem.x0, &opts) {
                    Ok(stats) => {
                        let failed = stats.diverged;
                        (stats, failed)
                    }
                    Err(_) => {
                        all_ok = false;
                        cost_sum = f64::INFINITY;
                        rho_sum += crate::cycle::DIVERGED_RHO;
                        continue;
                    }
                }
            }
            EvalMode::Pcg => {
                let precond = Preconditioner::Amg {
                    program: &prog,
                    hierarchy: &problem.hierarchy,
                };
                match pcg(
                    &problem.hierarchy.finest().a,
                    &problem.b,
                    &problem.x0,
                    &precond,
                    problem.tol,
                    params.max_iter,
                ) {
                    Ok(res) => {
                        let failed = res.stats.diverged || res.breakdown;
                        (res.stats, failed)
                    }
                    Err(_) => {
                        all_ok = false;
                        cost_sum = f64::INFINITY;
                        rho_sum += crate::cycle::DIVERGED_RHO;
                        continue;
                    }
                }
            }
        };
        let cost = match params.fitness_mode {
            FitnessMode::WorkUnits => cycle_work_units(&prog, &problem.hierarchy),
            FitnessMode::WallClock => {
                timed_cost_per_iter(&prog, problem, params).unwrap_or(f64::INFINITY)
            }
        };
        if failed {
            all_ok = false;
            cost_sum = f64::INFINITY;
            rho_sum += crate::cycle::DIVERGED_RHO;
        } else {
            all_ok &= stats.converged;
            cost_sum += cost;
            rho_sum += stats.rho;
        }
        n_sum += stats.n as f64;
        wu_sum += stats.wu_total;
    }
    let m = problems.len().max(1) as f64;
    (
        [cost_sum / m, rho_sum / m],
        EvalMeta {
            n: n_sum / m,
            converged: all_ok,
            wu_total: wu_sum / m,
        },
    )
}

/// Median-of-3 wall-clock seconds per iteration for one problem.
fn timed_cost_per_iter(
    prog: &FlexProgram,
    problem: &ProblemInstance,
    params: &EvoParams,
) -> Option<f64> {
    let opts = SolveOptions {
        tol: problem.tol,
        tol_mode: problem.tol_mode,
        max_iter: params.max_iter,
    };
    let mut samples = Vec::with_capacity(3);
    for _ in 0..3 {
        let start = std::time::Instant::now();
        let stats = run_solver(prog, &problem.hierarchy, &problem.b, &problem.x0, &opts).ok()?;
        if stats.n == 0 || stats.diverged {
            return None;
        }
        samples.push(start.elapsed().as_secs_f64() / stats.n as f64);
    }
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Some(samples[1])
}

/// Evaluates a population, fanned out over the configured worker pool;
/// results are collected by individual index so the outcome is independent
/// of the worker count.
pub fn evaluate_population(
    grammar: &Grammar,
    trees: &[DerivationTree],
    problems: &[ProblemInstance],
    params: &EvoParams,
) -> Vec<([f64; 2], EvalMeta)> {
    // Wall-clock timing runs single-threaded to keep measurements quiet.
    let workers = match params.fitness_mode {
        FitnessMode::WallClock => 1,
        FitnessMode::WorkUnits => params.workers.max(1),
    };
    if workers == 1 {
        return trees
            .iter()
            .map(|t| evaluate_tree(grammar, t, problems, params))
            .collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("worker pool");
    pool.install(|| {
        use rayon::prelude::*;
        trees
            .par_iter()
            .map(|t| evaluate_tree(grammar, t, problems, params))
            .collect()
    })
}

/// Binary tournament on (non-domination rank, crowding distance), ties
/// broken by stable index.
fn tournament<R: Rng>(ranks: &[RankedPoint], rng: &mut R) -> usize {
    let a = rng.gen_range(0..ranks.len());
    let b = rng.gen_range(0..ranks.len());
    let beats = |x: usize, y: usize| {
        if ranks[x].rank != ranks[y].rank {
            return ranks[x].rank < ranks[y].rank;
        }
        if ranks[x].crowding != ranks[y].crowding {
            return ranks[x].crowding > ranks[y].crowding;
        }
        x < y
    };
    if beats(b, a) {
        b
    } else {
        a
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub hypervolume: f64,
    pub individuals: Vec<LogEntry>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LogEntry {
    pub id: u64,
    pub genotype: String,
    pub fitness: [f64; 2],
    pub n: f64,
    pub converged: bool,
    pub wu_total: f64,
}

#[derive(Debug)]
pub struct EvolveResult {
    pub population: Vec<Individual>,
    /// Indices into `population` forming the final non-dominated front.
    pub front: Vec<usize>,
    pub generations: Vec<GenerationRecord>,
}

/// The G3P loop: grammar-based initialization of rho0 programs, t_max
/// generations of grammar-constrained crossover/mutation with binary
/// tournament parents, and NSGA-II survival to mu.
pub fn evolve(
    grammar: &Grammar,
    problems: &[ProblemInstance],
    params: &EvoParams,
) -> Result<EvolveResult, Error> {
    params.validate()?;
    if problems.is_empty() {
        return Err(Error::Invalid("evolve needs at least one problem".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut next_id: u64 = 0;
    let mut fresh_id = move || {
        let id = next_id;
        next_id += 1;
        id
    };

    let make = |trees: Vec<DerivationTree>,
                evals: Vec<([f64; 2], EvalMeta)>,
                fresh_id: &mut dyn FnMut() -> u64,
                grammar: &Grammar| {
        trees
            .into_iter()
            .zip(evals)
            .map(|(tree, (fitness, meta))| Individual {
                id: fresh_id(),
                program: grammar.decode_native(&tree),
                tree,
                fitness,
                meta,
            })
            .collect::<Vec<_>>()
    };

    let init_trees: Vec<DerivationTree> = (0..params.rho0)
        .map(|_| grammar.random_derivation(params.init_max_chain, &mut rng))
        .collect();
    let init_evals = evaluate_population(grammar, &init_trees, problems, params);
    let mut population = make(init_trees, init_evals, &mut fresh_id, grammar);

    let mut generations = Vec::with_capacity(params.t_max + 1);
    // Non-dominated archive over everything evaluated so far; its
    // hypervolume can only grow, giving a monotone progress measure even
    // when crowding truncation reshapes the population front.
    let mut archive: Vec<[f64; 2]> = Vec::new();
    let record = |generation: usize, pop: &[Individual], archive: &mut Vec<[f64; 2]>| {
        archive.extend(pop.iter().map(|i| i.fitness));
        let fronts = crate::nsga::non_dominated_sort(archive);
        let pruned: Vec<[f64; 2]> = fronts
            .first()
            .map(|f| f.iter().map(|&i| archive[i]).collect())
            .unwrap_or_default();
        *archive = pruned;
        GenerationRecord {
            generation,
            hypervolume: hypervolume_2d(archive, HYPERVOLUME_REF),
            individuals: pop
                .iter()
                .map(|i| LogEntry {
                    id: i.id,
                    genotype: genotype_hash(&i.tree),
                    fitness: i.fitness,
                    n: i.meta.n,
                    converged: i.meta.converged,
                    wu_total: i.meta.wu_total,
                })
                .collect(),
        }
    };
    generations.push(record(0, &population, &mut archive));

    for gen in 0..params.t_max {
        let points: Vec<[f64; 2]> = population.iter().map(|i| i.fitness).collect();
        let ranks = rank_population(&points);
        let mut offspring_trees = Vec::with_capacity(params.lambda);
        for _ in 0..params.lambda {
            if rng.gen_bool(params.pc) {
                let pa = tournament(&ranks, &mut rng);
                let pb = tournament(&ranks, &mut rng);
                let (child, _) =
                    grammar.crossover(&population[pa].tree, &population[pb].tree, &mut rng);
                offspring_trees.push(child);
            } else {
                let p = tournament(&ranks, &mut rng);
                offspring_trees.push(grammar.mutate(&population[p].tree, &mut rng));
            }
        }
        let offspring_evals = evaluate_population(grammar, &offspring_trees, problems, params);
        let offspring = make(offspring_trees, offspring_evals, &mut fresh_id, grammar);

        population.extend(offspring);
        let combined_points: Vec<[f64; 2]> = population.iter().map(|i| i.fitness).collect();
        let keep = nsga2_select(&combined_points, params.mu);
        let mut selected: Vec<Individual> = Vec::with_capacity(keep.len());
        let mut taken: Vec<Option<Individual>> = population.into_iter().map(Some).collect();
        for idx in keep {
            selected.push(taken[idx].take().expect("selection indices unique"));
        }
        population = selected;
        generations.push(record(gen + 1, &population, &mut archive));
    }

    if params.t_max == 0 {
        // No variation requested: reduce the initial population to mu.
        let points: Vec<[f64; 2]> = population.iter().map(|i| i.fitness).collect();
        let keep = nsga2_select(&points, params.mu);
        let mut taken: Vec<Option<Individual>> = population.into_iter().map(Some).collect();
        population = keep
            .into_iter()
            .map(|i| taken[i].take().expect("unique"))
            .collect();
    }

    let points: Vec<[f64; 2]> = population.iter().map(|i| i.fitness).collect();
    let front = non_dominated_sort(&points)
        .into_iter()
        .next()
        .unwrap_or_default();
    Ok(EvolveResult {
        population,
        front,
        generations,
    })
}

// ---------------------------------------------------------------------------
// Run configuration
// ---------------------------------------------------------------------------

/// Problem description as it appears in run-config JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    Poisson {
        nd: usize,
        c: [f64; 3],
        #[serde(default = "default_tol_abs")]
        tol: f64,
        #[serde(default = "default_abs_mode")]
        tol_mode: TolMode,
        #[serde(default = "default_standalone")]
        mode: EvalMode,
        #[serde(default = "default_guess_seed")]
        guess_seed: u64,
    },
    Timestep {
        #[serde(flatten)]
        spec: TimestepSpec,
        /// Which step of the sequence to use.
        k: usize,
        #[serde(default = "default_tol_rel")]
        tol: f64,
        #[serde(default = "default_rel_mode")]
        tol_mode: TolMode,
        #[serde(default = "default_pcg")]
        mode: EvalMode,
        #[serde(default = "default_guess_seed")]
        guess_seed: u64,
    },
}

fn default_tol_abs() -> f64 {
    1e-8
}
fn default_tol_rel() -> f64 {
    1e-6
}
fn default_abs_mode() -> TolMode {
    TolMode::Absolute
}
fn default_rel_mode() -> TolMode {
    TolMode::Relative
}
fn default_standalone() -> EvalMode {
    EvalMode::Standalone
}
fn default_pcg() -> EvalMode {
    EvalMode::Pcg
}
fn default_guess_seed() -> u64 {
    9001
}

impl ProblemSpec {
    /// The acceptance proxy: anisotropic Poisson, zero right-hand side,
    /// random initial guess, absolute tolerance.
    pub fn desk_poisson() -> Self {
        ProblemSpec::Poisson {
            nd: 32,
            c: [1e-3, 1.0, 1.0],
            tol: 1e-8,
            tol_mode: TolMode::Absolute,
            mode: EvalMode::Standalone,
            guess_seed: default_guess_seed(),
        }
    }

    pub fn name(&self) -> String {
        match self {
            ProblemSpec::Poisson { nd, c, .. } => {
                format!("poisson:{nd}:{},{},{}", c[0], c[1], c[2])
            }
            ProblemSpec::Timestep { spec, k, .. } => format!("timestep:{}:{k}", spec.nd),
        }
    }

    /// Builds the matrix, the hierarchy, and the solve vectors.
    pub fn instantiate(&self, hier_cfg: &HierarchyConfig) -> Result<ProblemInstance, Error> {
        match self {
            ProblemSpec::Poisson { nd, c, tol, tol_mode, mode, guess_seed } => {
                let a = build_anisotropic_poisson(&PoissonSpec::new(c[0], c[1], c[2], *nd)?)?;
                let n = a.nrows();
                let hierarchy = build_hierarchy(a, hier_cfg)?;
                let (b, x0) = match mode {
                    // f = 0 with a random guess; the PCG form solves a random
                    // right-hand side from zero.
                    EvalMode::Standalone => (vec![0.0; n], random_vector(n, *guess_seed)),
                    EvalMode::Pcg => (random_vector(n, *guess_seed), vec![0.0; n]),
                };
                Ok(ProblemInstance {
                    name: self.name(),
                    hierarchy,
                    b,
                    x0,
                    tol: *tol,
                    tol_mode: *tol_mode,
                    mode: *mode,
                })
            }
            ProblemSpec::Timestep { spec, k, tol, tol_mode, mode, guess_seed } => {
                let a = build_timestep_matrix(spec, *k)?;
                let n = a.nrows();
                let hierarchy = build_hierarchy(a, hier_cfg)?;
                let (b, x0) = match mode {
                    EvalMode::Standalone => (vec![0.0; n], random_vector(n, *guess_seed)),
                    EvalMode::Pcg => (random_vector(n, *guess_seed), vec![0.0; n]),
                };
                Ok(ProblemInstance {
                    name: self.name(),
                    hierarchy,
                    b,
                    x0,
                    tol: *tol,
                    tol_mode: *tol_mode,
                    mode: *mode,
                })
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrammarConfig {
    #[serde(default = "default_n_flex")]
    pub n_flex: usize,
    #[serde(default)]
    pub include_zero_weight: bool,
}

fn default_n_flex() -> usize {
    crate::cycle::DEFAULT_N_FLEX
}

impl Default for GrammarConfig {
    fn default() -> Self {
        Self {
            n_flex: default_n_flex(),
            include_zero_weight: false,
        }
    }
}

impl GrammarConfig {
    pub fn build(&self) -> Result<Grammar, Error> {
        Grammar::new(self.n_flex, self.include_zero_weight)
    }
}

/// Complete evolve-run description, loadable from one JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub evo: Option<EvoParams>,
    #[serde(default)]
    pub grammar: GrammarConfig,
    #[serde(default)]
    pub hierarchy: HierarchyConfig,
    pub problems: Vec<ProblemSpec>,
    #[serde(default)]
    pub output_dir: Option<String>,
}

impl RunConfig {
    pub fn desk(seed: u64) -> Self {
        Self {
            evo: Some(EvoParams::desk(seed)),
            grammar: GrammarConfig::default(),
            hierarchy: HierarchyConfig::default(),
            problems: vec![ProblemSpec::desk_poisson()],
            output_dir: None,
        }
    }
}
