//! Preconditioned conjugate gradients with AMG cycle preconditioning, the
//! built-in reference-solver catalog, and the diagonal-to-AMG hybrid switch.

use crate::cycle::{
    cycle_work_units, execute_cycle_with_state, residual_rate, CycleState, FlexProgram, Instr,
    SolveStats,
};
use crate::setup::{build_hierarchy, Hierarchy, HierarchyConfig};
use crate::smoother::{Ordering, SmootherKind, SmootherSpec, SmootherVariant};
use crate::sparse::{axpy, dot, norm2, SparseMatrix};
use crate::Error;
use serde::{Deserialize, Serialize};

/// Preconditioner applied once per CG iteration. The AMG form runs exactly
/// one cycle from a zero initial guess, which keeps it a fixed linear
/// operator across the solve.
pub enum Preconditioner<'a> {
    None,
    /// Diagonal (Jacobi) scaling with the given diagonal entries.
    Diagonal(Vec<f64>),
    Amg {
        program: &'a FlexProgram,
        hierarchy: &'a Hierarchy,
    },
}

impl Preconditioner<'_> {
    pub fn diagonal_of(a: &SparseMatrix) -> Self {
        Preconditioner::Diagonal(a.diagonal())
    }

    fn apply(&self, r: &[f64], scratch: &mut Option<CycleState>) -> Result<Vec<f64>, Error> {
        match self {
            Preconditioner::None => Ok(r.to_vec()),
            Preconditioner::Diagonal(d) => {
                Ok(r.iter().zip(d).map(|(ri, di)| ri / di).collect())
            }
            Preconditioner::Amg { program, hierarchy } => {
                let state = scratch.get_or_insert_with(|| CycleState::new(hierarchy));
                let zero = vec![0.0; r.len()];
                execute_cycle_with_state(program, hierarchy, state, &zero, r)
            }
        }
    }

    /// Work units one application costs under the smoothing-only model.
    fn work_units(&self) -> f64 {
        match self {
            Preconditioner::Amg { program, hierarchy } => cycle_work_units(program, hierarchy),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcgResult {
    pub stats: SolveStats,
    /// p'Ap lost positivity to tolerance; the run stopped and is flagged.
    pub breakdown: bool,
    pub x: Vec<f64>,
}

/// Relative tolerance for declaring p'Ap non-positive.
const BREAKDOWN_RTOL: f64 = 1e-14;
const DIVERGENCE_FACTOR: f64 = 1e8;

struct RateMonitor {
    window: usize,
    threshold: f64,
}

struct PcgOutcome {
    x: Vec<f64>,
    history: Vec<f64>,
    converged: bool,
    diverged: bool,
    breakdown: bool,
    monitor_tripped: bool,
}

fn pcg_core(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &Preconditioner,
    threshold: f64,
    max_iter: usize,
    monitor: Option<&RateMonitor>,
) -> Result<PcgOutcome, Error> {
    let mut scratch = None;
    let mut x = x0.to_vec();
    let mut r = a.residual(&x, b);
    let r0n = norm2(&r);
    let mut history = vec![r0n];
    let mut out = PcgOutcome {
        x: Vec::new(),
        history: Vec::new(),
        converged: r0n <= threshold,
        diverged: false,
        breakdown: false,
        monitor_tripped: false,
    };
    if out.converged {
        out.x = x;
        out.history = history;
        return Ok(out);
    }
    let mut z = precond.apply(&r, &mut scratch)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for k in 1..=max_iter {
        let ap = a.spmv(&p);
        let pap = dot(&p, &ap);
        if pap <= BREAKDOWN_RTOL * norm2(&p) * norm2(&ap) {
            out.breakdown = true;
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rn = norm2(&r);
        history.push(rn);
        if rn <= threshold {
            out.converged = true;
            break;
        }
        if !rn.is_finite() || rn > DIVERGENCE_FACTOR * r0n {
            out.diverged = true;
            break;
        }
        if let Some(m) = monitor {
            if k % m.window == 0 {
                let rate = (rn / history[k - m.window]).powf(1.0 / m.window as f64);
                if rate > m.threshold {
                    out.monitor_tripped = true;
                    break;
                }
            }
        }
        z = precond.apply(&r, &mut scratch)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    out.x = x;
    out.history = history;
    Ok(out)
}

/// Preconditioned conjugate gradients to a relative residual tolerance.
pub fn pcg(
    a: &SparseMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &Preconditioner,
    tol_rel: f64,
    max_iter: usize,
) -> Result<PcgResult, Error> {
    let r0 = norm2(&a.residual(x0, b));
    let outcome = pcg_core(a, b, x0, precond, tol_rel * r0, max_iter, None)?;
    let n = outcome.history.len() - 1;
    let rho = if outcome.diverged {
        crate::cycle::DIVERGED_RHO
    } else {
        residual_rate(outcome.history[0], *outcome.history.last().unwrap(), n)
    };
    Ok(PcgResult {
        stats: SolveStats {
            n,
            rho,
            wu_total: precond.work_units() * n as f64,
            converged: outcome.converged,
            diverged: outcome.diverged,
            history: outcome.history,
        },
        breakdown: outcome.breakdown,
        x: outcome.x,
    })
}

// ---------------------------------------------------------------------------
// Reference solver catalog
// ---------------------------------------------------------------------------

/// One row of the built-in V-cycle catalog: pre/post smoother, sweep counts,
/// ordering, and hybrid weights where applicable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceSolver {
    pub name: &'static str,
    pub ordering: Ordering,
    pub pre: (SmootherKind, SmootherVariant),
    pub nu1: usize,
    pub post: (SmootherKind, SmootherVariant),
    pub nu2: usize,
    pub omega_i: f64,
    pub omega_o: f64,
}

const L1: SmootherVariant = SmootherVariant::L1;
const W: SmootherVariant = SmootherVariant::Weighted;

/// Default plus the six tuned V(1,1)-style configurations, and `tuned`
/// (the l1-Jacobi preconditioner baseline) aliasing the tuned4 row.
pub const REFERENCE_SOLVERS: [ReferenceSolver; 8] = [
    ReferenceSolver { name: "default", ordering: Ordering::Lex, pre: (SmootherKind::Gsf, L1), nu1: 1, post: (SmootherKind::Gsb, L1), nu2: 1, omega_i: 1.0, omega_o: 1.0 },
    ReferenceSolver { name: "tuned1", ordering: Ordering::Cf, pre: (SmootherKind::Gsf, L1), nu1: 1, post: (SmootherKind::Gsf, L1), nu2: 1, omega_i: 1.0, omega_o: 1.0 },
    ReferenceSolver { name: "tuned2", ordering: Ordering::Cf, pre: (SmootherKind::Gsf, W), nu1: 1, post: (SmootherKind::Gsf, W), nu2: 1, omega_i: 1.1, omega_o: 0.9 },
    ReferenceSolver { name: "tuned3", ordering: Ordering::Lex, pre: (SmootherKind::Gsf, L1), nu1: 1, post: (SmootherKind::Gsf, L1), nu2: 1, omega_i: 1.0, omega_o: 1.0 },
    ReferenceSolver { name: "tuned4", ordering: Ordering::Cf, pre: (SmootherKind::Jacobi, L1), nu1: 1, post: (SmootherKind::Jacobi, L1), nu2: 1, omega_i: 1.0, omega_o: 1.0 },
    ReferenceSolver { name: "tuned5", ordering: Ordering::Lex, pre: (SmootherKind::Gsf, W), nu1: 1, post: (SmootherKind::Gsf, W), nu2: 1, omega_i: 1.1, omega_o: 0.9 },
    ReferenceSolver { name: "tuned6", ordering: Ordering::Lex, pre: (SmootherKind::Gsf, L1), nu1: 2, post: (SmootherKind::Gsb, L1), nu2: 1, omega_i: 1.0, omega_o: 1.0 },
    ReferenceSolver { name: "tuned", ordering: Ordering::Cf, pre: (SmootherKind::Jacobi, L1), nu1: 1, post: (SmootherKind::Jacobi, L1), nu2: 1, omega_i: 1.0, omega_o: 1.0 },
];

pub fn reference_solver(name: &str) -> Result<&'static ReferenceSolver, Error> {
    let key: String = name
        .to_ascii_lowercase()
        .chars()
        .filter(|c| !c.is_whitespace() && *c != '-' && *c != '_')
        .collect();
    REFERENCE_SOLVERS
        .iter()
        .find(|r| r.name == key)
        .ok_or_else(|| Error::UnknownSolver(name.to_string()))
}

fn smoother_of(row: &ReferenceSolver, pair: (SmootherKind, SmootherVariant)) -> SmootherSpec {
    match pair.1 {
        SmootherVariant::L1 => SmootherSpec::l1(pair.0, row.ordering),
        SmootherVariant::Weighted => match pair.0 {
            SmootherKind::Jacobi => {
                SmootherSpec::jacobi(SmootherVariant::Weighted, row.ordering, row.omega_i)
            }
            kind => SmootherSpec::hybrid(kind, row.ordering, row.omega_i, row.omega_o),
        },
    }
}

/// Expands a catalog row into a full recursive cycle over every level of the
/// hierarchy: nu1 pre-sweeps and nu2 post-sweeps per level, LU at the bottom.
pub fn reference_solver_program(name: &str, hierarchy: &Hierarchy) -> Result<FlexProgram, Error> {
    let row = reference_solver(name)?;
    let top = hierarchy.top_level();
    if top == 0 {
        return Ok(FlexProgram::new(vec![Instr::StdVSolve { level: 0 }], 0, 0));
    }
    let pre = smoother_of(row, row.pre);
    let post = smoother_of(row, row.post);
    let mut instrs = Vec::new();
    for l in (1..=top).rev() {
        for _ in 0..row.nu1 {
            instrs.push(Instr::Relax { level: l, spec: pre });
        }
        instrs.push(Instr::Restrict { from_level: l });
    }
    instrs.push(Instr::StdVSolve { level: 0 });
    for l in 1..=top {
        instrs.push(Instr::CoarseCorrection {
            to_level: l,
            alpha: 1.0,
        });
        for _ in 0..row.nu2 {
            instrs.push(Instr::Relax { level: l, spec: post });
        }
    }
    Ok(FlexProgram::new(instrs, top, 0))
}

// ---------------------------------------------------------------------------
// Hybrid diagonal-to-AMG solver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HybridConfig {
    /// Switch to AMG once the windowed CG rate exceeds this value.
    pub convergence_threshold: f64,
    /// Iterations between rate checks.
    pub check_window: usize,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            convergence_threshold: 0.65,
            check_window: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HybridOutcome {
    pub stats: SolveStats,
    /// Iteration at which the AMG preconditioner took over, if it did.
    pub switched_at: Option<usize>,
    pub breakdown: bool,
    pub x: Vec<f64>,
}

/// Starts with diagonal-preconditioned CG; when the windowed geometric rate
/// degrades past the threshold, builds the AMG hierarchy once and restarts
/// from the current iterate with the cycle preconditioner.
pub fn hybrid_solve(
    a: &SparseMatrix,
    b: &[f64],
    amg_program: &FlexProgram,
    hier_cfg: &HierarchyConfig,
    cfg: &HybridConfig,
    tol_rel: f64,
    max_iter: usize,
) -> Result<HybridOutcome, Error> {
    if !(0.0..=1.0).contains(&cfg.convergence_threshold) {
        return Err(Error::Invalid(format!(
            "convergence threshold {} outside [0, 1]",
            cfg.convergence_threshold
        )));
    }
    let x0 = vec![0.0; b.len()];
    let r0 = norm2(&a.residual(&x0, b));
    let threshold = tol_rel * r0;
    let monitor = RateMonitor {
        window: cfg.check_window.max(1),
        threshold: cfg.convergence_threshold,
    };
    let diag = Preconditioner::diagonal_of(a);
    let phase1 = pcg_core(a, b, &x0, &diag, threshold, max_iter, Some(&monitor))?;
    let n1 = phase1.history.len() - 1;
    if !phase1.monitor_tripped {
        let rho = residual_rate(r0, *phase1.history.last().unwrap(), n1);
        return Ok(HybridOutcome {
            stats: SolveStats {
                n: n1,
                rho,
                wu_total: 0.0,
                converged: phase1.converged,
                diverged: phase1.diverged,
                history: phase1.history,
            },
            switched_at: None,
            breakdown: phase1.breakdown,
            x: phase1.x,
        });
    }
    // Rate degraded: set up AMG once and continue from the current iterate.
    let hierarchy = build_hierarchy(a.clone(), hier_cfg)?;
    let program = amg_program.retarget(hierarchy.top_level());
    let amg = Preconditioner::Amg {
        program: &program,
        hierarchy: &hierarchy,
    };
    let budget = max_iter.saturating_sub(n1);
    let phase2 = pcg_core(a, b, &phase1.x, &amg, threshold, budget, None)?;
    let n2 = phase2.history.len() - 1;
    let mut history = phase1.history;
    history.extend_from_slice(&phase2.history[1..]);
    let n = n1 + n2;
    let rho = if phase2.diverged {
        crate::cycle::DIVERGED_RHO
    } else {
        residual_rate(r0, *history.last().unwrap(), n)
    };
    Ok(HybridOutcome {
        stats: SolveStats {
            n,
            rho,
            wu_total: amg.work_units() * n2 as f64,
            converged: phase2.converged,
            diverged: phase2.diverged,
            history,
        },
        switched_at: Some(n1),
        breakdown: phase2.breakdown,
        x: phase2.x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_anisotropic_poisson, random_vector, PoissonSpec};

    fn poisson(nd: usize, c: [f64; 3]) -> SparseMatrix {
        build_anisotropic_poisson(&PoissonSpec::new(c[0], c[1], c[2], nd).unwrap()).unwrap()
    }

    #[test]
    fn identity_converges_in_one() {
        let a = SparseMatrix::identity(10);
        let b = random_vector(10, 1);
        let res = pcg(&a, &b, &[0.0; 10], &Preconditioner::None, 1e-12, 50).unwrap();
        assert!(res.stats.converged);
        assert_eq!(res.stats.n, 1);
    }

    #[test]
    fn diagonal_preconditioner_exact_in_one() {
        let a = SparseMatrix::from_dense_rows(&[vec![1.0, 0.0], vec![0.0, 4.0]]);
        let res = pcg(
            &a,
            &[1.0, 1.0],
            &[0.0, 0.0],
            &Preconditioner::diagonal_of(&a),
            1e-12,
            10,
        )
        .unwrap();
        assert!(res.stats.converged);
        assert_eq!(res.stats.n, 1);
        assert!((res.x[0] - 1.0).abs() < 1e-12);
        assert!((res.x[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn amg_preconditioning_beats_plain_cg() {
        let a = poisson(16, [1.0, 1.0, 1.0]);
        let h = build_hierarchy(a.clone(), &HierarchyConfig::default()).unwrap();
        let prog = reference_solver_program("default", &h).unwrap();
        let b = random_vector(a.nrows(), 11);
        let x0 = vec![0.0; a.nrows()];
        let plain = pcg(&a, &b, &x0, &Preconditioner::None, 1e-6, 500).unwrap();
        let amg = Preconditioner::Amg { program: &prog, hierarchy: &h };
        let pre = pcg(&a, &b, &x0, &amg, 1e-6, 500).unwrap();
        assert!(pre.stats.converged && plain.stats.converged);
        assert!(
            pre.stats.n < plain.stats.n,
            "AMG {} vs plain {}",
            pre.stats.n,
            plain.stats.n
        );
    }

    #[test]
    fn cg_error_decreases_in_a_norm() {
        let a = poisson(6, [1.0, 0.3, 0.05]);
        let n = a.nrows();
        let xstar = random_vector(n, 5);
        let b = a.spmv(&xstar);
        let mut prev = f64::INFINITY;
        for iters in 1..=12 {
            let res = pcg(
                &a,
                &b,
                &vec![0.0; n],
                &Preconditioner::diagonal_of(&a),
                0.0,
                iters,
            )
            .unwrap();
            let e: Vec<f64> = res.x.iter().zip(&xstar).map(|(x, s)| x - s).collect();
            let anorm = dot(&e, &a.spmv(&e)).sqrt();
            assert!(
                anorm <= prev * (1.0 + 1e-10),
                "A-norm rose at iter {iters}: {anorm} > {prev}"
            );
            prev = anorm;
        }
    }

    #[test]
    fn reference_rows_match_catalog() {
        let d = reference_solver("default").unwrap();
        assert_eq!(d.ordering, Ordering::Lex);
        assert_eq!(d.pre, (SmootherKind::Gsf, L1));
        assert_eq!(d.post, (SmootherKind::Gsb, L1));
        let t6 = reference_solver("tuned 6").unwrap();
        assert_eq!(t6.nu1, 2);
        assert_eq!(t6.nu2, 1);
        assert_eq!(t6.pre, (SmootherKind::Gsf, L1));
        assert_eq!(t6.post, (SmootherKind::Gsb, L1));
        let t4 = reference_solver("tuned-4").unwrap();
        assert_eq!(t4.ordering, Ordering::Cf);
        assert_eq!(t4.pre, (SmootherKind::Jacobi, L1));
        let t2 = reference_solver("tuned2").unwrap();
        assert_eq!(t2.omega_i, 1.1);
        assert_eq!(t2.omega_o, 0.9);
        assert!(reference_solver("nope").is_err());
    }

    #[test]
    fn default_program_is_standard_v_cycle() {
        let a = poisson(8, [1.0, 1.0, 1.0]);
        let h = build_hierarchy(a, &HierarchyConfig::default()).unwrap();
        let prog = reference_solver_program("default", &h).unwrap();
        crate::cycle::validate_program(&prog, &h).unwrap();
        let n = h.finest().a.nrows();
        let b = random_vector(n, 3);
        let mut xa = random_vector(n, 4);
        let mut xb = xa.clone();
        for _ in 0..4 {
            xa = crate::cycle::execute_cycle(&prog, &h, &xa, &b).unwrap();
            xb = crate::cycle::standard_v_cycle(&h, h.top_level(), &xb, &b).unwrap();
            assert_eq!(xa, xb);
        }
    }

    #[test]
    fn symmetric_preconditioner_never_breaks_down() {
        // The default cycle (l1-GSF pre, l1-GSB post) is a symmetric
        // preconditioner on SPD systems; CG must converge cleanly for many
        // right-hand sides.
        let a = poisson(8, [1e-2, 1.0, 1.0]);
        let h = build_hierarchy(a.clone(), &HierarchyConfig::default()).unwrap();
        let prog = reference_solver_program("default", &h).unwrap();
        let precond = Preconditioner::Amg {
            program: &prog,
            hierarchy: &h,
        };
        let n = a.nrows();
        for seed in 0..50 {
            let b = random_vector(n, 40_000 + seed);
            let res = pcg(&a, &b, &vec![0.0; n], &precond, 1e-8, 200).unwrap();
            assert!(!res.breakdown, "breakdown at seed {seed}");
            assert!(res.stats.converged, "no convergence at seed {seed}");
        }
    }

    #[test]
    fn hybrid_threshold_extremes() {
        let spec = crate::problems::TimestepSpec {
            nd: 8,
            k_max: 2,
            ..Default::default()
        };
        let a = crate::problems::build_timestep_matrix(&spec, 1).unwrap();
        let b = random_vector(a.nrows(), 17);
        let h = build_hierarchy(a.clone(), &HierarchyConfig::default()).unwrap();
        let prog = reference_solver_program("default", &h).unwrap();
        // Threshold 1: a convergent run never switches.
        let never = hybrid_solve(
            &a,
            &b,
            &prog,
            &HierarchyConfig::default(),
            &HybridConfig { convergence_threshold: 1.0, check_window: 5 },
            1e-6,
            2000,
        )
        .unwrap();
        assert_eq!(never.switched_at, None);
        assert!(never.stats.converged);
        // Threshold 0: switches at the first check (given it runs that long).
        let always = hybrid_solve(
            &a,
            &b,
            &prog,
            &HierarchyConfig::default(),
            &HybridConfig { convergence_threshold: 0.0, check_window: 5 },
            1e-6,
            2000,
        )
        .unwrap();
        assert_eq!(always.switched_at, Some(5));
        assert!(always.stats.converged);
    }
}
