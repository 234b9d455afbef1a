//! Flexible AMG cycle programs: validated instruction sequences over the top
//! levels of a hierarchy, with an embedded standard V-cycle below the cutoff
//! level, plus the work-unit cost model and iteration-matrix analysis.

use crate::setup::Hierarchy;
use crate::smoother::{apply_smoother, Ordering, SmootherKind, SmootherSpec};
use crate::sparse::{norm2, DenseMatrix, DENSE_CAP};
use crate::Error;
use serde::{Deserialize, Serialize};

/// Maximum number of instructions in a program.
pub const DEPTH_CAP: usize = 256;

/// Number of flexible levels below (and including) the finest, per the
/// grammar's design; the standard V-cycle absorbs everything deeper.
pub const DEFAULT_N_FLEX: usize = 5;

/// One step of a flexible cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Instr {
    /// Apply one smoother sweep at `level`.
    Relax { level: usize, spec: SmootherSpec },
    /// Compute the residual at `from_level`, restrict it one level down, and
    /// zero the coarse iterate.
    Restrict { from_level: usize },
    /// Scaled coarse-grid correction: x_to += alpha * P * x_{to-1}.
    CoarseCorrection { to_level: usize, alpha: f64 },
    /// Run the standard V(1,1) cycle at `level` (a direct LU solve when
    /// `level` is 0).
    StdVSolve { level: usize },
}

/// A validated flexible-cycle program. Execution starts and ends at `l_top`;
/// levels below `l_std` are handled by the embedded standard V-cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexProgram {
    pub instrs: Vec<Instr>,
    pub l_top: usize,
    pub l_std: usize,
}

impl FlexProgram {
    pub fn new(instrs: Vec<Instr>, l_top: usize, l_std: usize) -> Self {
        Self {
            instrs,
            l_top,
            l_std,
        }
    }

    /// Retargets the program onto a hierarchy whose finest level is
    /// `new_top`, preserving the flexible depth below the finest level.
    ///
    /// Shifting deeper than the available levels truncates: descents past
    /// level 0 collapse into the direct solve at level 0, so saved cycles
    /// scale across problem sizes.
    pub fn retarget(&self, new_top: usize) -> FlexProgram {
        if new_top == 0 {
            return FlexProgram::new(vec![Instr::StdVSolve { level: 0 }], 0, 0);
        }
        let delta = new_top as isize - self.l_top as isize;
        let new_l_std = (self.l_std as isize + delta).max(0) as usize;
        if delta == 0 {
            return self.clone();
        }
        let mut out = Vec::with_capacity(self.instrs.len());
        let mut cur = new_top as isize;
        for instr in &self.instrs {
            match *instr {
                Instr::Relax { spec, .. } => {
                    if cur >= 1 {
                        out.push(Instr::Relax {
                            level: cur as usize,
                            spec,
                        });
                    }
                }
                Instr::Restrict { .. } => {
                    if cur > 1 {
                        out.push(Instr::Restrict {
                            from_level: cur as usize,
                        });
                    } else if cur - 1 == 0 {
                        // Crossing into the direct-solve level: the whole
                        // excursion below collapses into one exact solve.
                        out.push(Instr::Restrict { from_level: 1 });
                        out.push(Instr::StdVSolve { level: 0 });
                    }
                    cur -= 1;
                }
                Instr::StdVSolve { .. } => {
                    if cur >= 1 {
                        out.push(Instr::StdVSolve { level: cur as usize });
                    }
                    // At or below level 0 the solve was already emitted when
                    // the walk crossed into level 0.
                }
                Instr::CoarseCorrection { alpha, .. } => {
                    if cur >= 0 && cur + 1 >= 1 {
                        out.push(Instr::CoarseCorrection {
                            to_level: (cur + 1) as usize,
                            alpha,
                        });
                    }
                    cur += 1;
                }
            }
        }
        FlexProgram::new(out, new_top, new_l_std)
    }
}

/// Checks every structural invariant of a program against a hierarchy.
pub fn validate_program(prog: &FlexProgram, hierarchy: &Hierarchy) -> Result<(), Error> {
    let top = hierarchy.top_level();
    if prog.l_top != top {
        return Err(Error::InvalidProgram {
            instr: 0,
            reason: format!(
                "program targets finest level {} but hierarchy has {top}; retarget first",
                prog.l_top
            ),
        });
    }
    if prog.l_std > prog.l_top {
        return Err(Error::InvalidProgram {
            instr: 0,
            reason: format!("l_std {} above l_top {}", prog.l_std, prog.l_top),
        });
    }
    if prog.instrs.len() > DEPTH_CAP {
        return Err(Error::InvalidProgram {
            instr: DEPTH_CAP,
            reason: format!("{} instructions exceed the cap of {DEPTH_CAP}", prog.instrs.len()),
        });
    }
    let mut cur = prog.l_top;
    let mut must_solve = false; // just restricted onto l_std
    for (idx, instr) in prog.instrs.iter().enumerate() {
        let fail = |reason: String| Err(Error::InvalidProgram { instr: idx, reason });
        if must_solve && !matches!(instr, Instr::StdVSolve { .. }) {
            return fail(format!(
                "level {cur} is the standard-cycle cutoff; only StdVSolve may run there"
            ));
        }
        match *instr {
            Instr::Relax { level, spec } => {
                if level != cur {
                    return fail(format!("relax at level {level} but cycle is at {cur}"));
                }
                if level <= prog.l_std && prog.l_std != prog.l_top {
                    return fail(format!("relax not allowed at or below l_std {}", prog.l_std));
                }
                if prog.l_std == prog.l_top {
                    return fail("only StdVSolve may run when l_top == l_std".into());
                }
                if spec.ordering == Ordering::Cf && hierarchy.level(level).cf.is_none() {
                    return fail(format!("level {level} has no C/F marks for CF ordering"));
                }
            }
            Instr::Restrict { from_level } => {
                if from_level != cur {
                    return fail(format!(
                        "restrict from level {from_level} but cycle is at {cur}"
                    ));
                }
                if cur <= prog.l_std {
                    return fail(format!(
                        "restrict below the standard-cycle cutoff {}",
                        prog.l_std
                    ));
                }
                cur -= 1;
                if cur == prog.l_std {
                    must_solve = true;
                }
            }
            Instr::StdVSolve { level } => {
                if level != prog.l_std {
                    return fail(format!(
                        "StdVSolve at level {level}; it may appear only at l_std {}",
                        prog.l_std
                    ));
                }
                if level != cur {
                    return fail(format!("StdVSolve at level {level} but cycle is at {cur}"));
                }
                must_solve = false;
            }
            Instr::CoarseCorrection { to_level, alpha } => {
                if to_level != cur + 1 {
                    return fail(format!(
                        "correction to level {to_level} but cycle is at {cur}"
                    ));
                }
                if to_level > prog.l_top {
                    return fail(format!("correction above the finest level {}", prog.l_top));
                }
                if !alpha.is_finite() {
                    return fail("non-finite correction scaling".into());
                }
                cur += 1;
            }
        }
    }
    if must_solve {
        return Err(Error::InvalidProgram {
            instr: prog.instrs.len(),
            reason: "program ends at the cutoff level without a StdVSolve".into(),
        });
    }
    if cur != prog.l_top {
        return Err(Error::InvalidProgram {
            instr: prog.instrs.len(),
            reason: format!(
                "unbalanced cycle: execution ends at level {cur}, not l_top {}",
                prog.l_top
            ),
        });
    }
    Ok(())
}

/// Per-level work vectors, allocated once per hierarchy and reused.
#[derive(Debug)]
pub struct CycleState {
    x: Vec<Vec<f64>>,
    b: Vec<Vec<f64>>,
}

impl CycleState {
    pub fn new(hierarchy: &Hierarchy) -> Self {
        let x = (0..hierarchy.num_levels())
            .map(|l| vec![0.0; hierarchy.level(l).a.nrows()])
            .collect::<Vec<_>>();
        let b = x.clone();
        Self { x, b }
    }
}

fn smooth(h: &Hierarchy, l: usize, state: &mut CycleState, spec: &SmootherSpec) -> Result<(), Error> {
    let lvl = h.level(l);
    apply_smoother(
        &lvl.a,
        &mut state.x[l],
        &state.b[l],
        spec,
        &lvl.partition,
        &lvl.l1_diag,
        lvl.cf.as_ref(),
    )
}

fn restrict(h: &Hierarchy, l: usize, state: &mut CycleState) {
    let lvl = h.level(l);
    let r = lvl.a.residual(&state.x[l], &state.b[l]);
    let rop = lvl.r.as_ref().expect("restriction exists above level 0");
    rop.spmv_into(&r, &mut state.b[l - 1]);
    state.x[l - 1].iter_mut().for_each(|v| *v = 0.0);
}

fn correct(h: &Hierarchy, l: usize, alpha: f64, state: &mut CycleState) {
    let p = h.level(l).p.as_ref().expect("prolongation exists above level 0");
    let px = p.spmv(&state.x[l - 1]);
    for (xi, pi) in state.x[l].iter_mut().zip(&px) {
        *xi += alpha * pi;
    }
}

fn coarse_solve(h: &Hierarchy, state: &mut CycleState) {
    state.x[0] = h.coarse_lu().solve(&state.b[0]);
}

/// The fixed pre-smoother of the embedded standard V-cycle.
pub fn vcycle_pre_smoother() -> SmootherSpec {
    SmootherSpec::l1(SmootherKind::Gsf, Ordering::Lex)
}

/// The fixed post-smoother of the embedded standard V-cycle.
pub fn vcycle_post_smoother() -> SmootherSpec {
    SmootherSpec::l1(SmootherKind::Gsb, Ordering::Lex)
}

fn v_cycle_recursive(h: &Hierarchy, l: usize, state: &mut CycleState) -> Result<(), Error> {
    if l == 0 {
        coarse_solve(h, state);
        return Ok(());
    }
    smooth(h, l, state, &vcycle_pre_smoother())?;
    restrict(h, l, state);
    v_cycle_recursive(h, l - 1, state)?;
    correct(h, l, 1.0, state);
    smooth(h, l, state, &vcycle_post_smoother())
}

/// One standard V(1,1) application at `level`: l1 hybrid GSF pre-smoothing,
/// l1 hybrid GSB post-smoothing, Gaussian elimination at level 0.
pub fn standard_v_cycle(
    h: &Hierarchy,
    level: usize,
    x: &[f64],
    b: &[f64],
) -> Result<Vec<f64>, Error> {
    let mut state = CycleState::new(h);
    state.x[level].copy_from_slice(x);
    state.b[level].copy_from_slice(b);
    v_cycle_recursive(h, level, &mut state)?;
    Ok(std::mem::take(&mut state.x[level]))
}

/// One application of the flexible cycle with caller-owned state.
pub fn execute_cycle_with_state(
    prog: &FlexProgram,
    h: &Hierarchy,
    state: &mut CycleState,
    x: &[f64],
    b: &[f64],
) -> Result<Vec<f64>, Error> {
    let top = prog.l_top;
    state.x[top].copy_from_slice(x);
    state.b[top].copy_from_slice(b);
    for instr in &prog.instrs {
        match *instr {
            Instr::Relax { level, spec } => smooth(h, level, state, &spec)?,
            Instr::Restrict { from_level } => restrict(h, from_level, state),
            Instr::StdVSolve { level } => v_cycle_recursive(h, level, state)?,
            Instr::CoarseCorrection { to_level, alpha } => correct(h, to_level, alpha, state),
        }
    }
    Ok(state.x[top].clone())
}

/// One application of the flexible cycle.
pub fn execute_cycle(
    prog: &FlexProgram,
    h: &Hierarchy,
    x: &[f64],
    b: &[f64],
) -> Result<Vec<f64>, Error> {
    let mut state = CycleState::new(h);
    execute_cycle_with_state(prog, h, &mut state, x, b)
}

// ---------------------------------------------------------------------------
// Work-unit cost model
// ---------------------------------------------------------------------------

/// Work units of one cycle given per-level operator nnz (coarsest first):
/// each relaxation sweep at level l costs nnz(A_l)/nnz(A_top), a symmetric
/// sweep costs two, and the embedded V-cycle smooths twice per level from
/// its entry level down to 1. Transfers and the direct solve are free here.
pub fn work_units_with_nnz(prog: &FlexProgram, level_nnz: &[f64]) -> f64 {
    let fine = *level_nnz.last().expect("at least one level");
    let ratio = |l: usize| level_nnz[l] / fine;
    let mut wu = 0.0;
    for instr in &prog.instrs {
        match *instr {
            Instr::Relax { level, spec } => wu += spec.sweep_cost() * ratio(level),
            Instr::StdVSolve { level } => {
                for l in 1..=level {
                    wu += 2.0 * ratio(l);
                }
            }
            _ => {}
        }
    }
    wu
}

pub fn cycle_work_units(prog: &FlexProgram, h: &Hierarchy) -> f64 {
    let nnz: Vec<f64> = h.level_nnz().iter().map(|&n| n as f64).collect();
    work_units_with_nnz(prog, &nnz)
}

/// Work units including transfer and coarse-solve costs: restriction and
/// prolongation each cost nnz(P_l)/nnz(A_top) per application, and the LU
/// solve one application of A_0.
pub fn cycle_work_units_with_transfers(prog: &FlexProgram, h: &Hierarchy) -> f64 {
    let nnz: Vec<f64> = h.level_nnz().iter().map(|&n| n as f64).collect();
    let fine = *nnz.last().unwrap();
    let p_nnz = |l: usize| h.level(l).p.as_ref().map_or(0.0, |p| p.nnz() as f64) / fine;
    let mut wu = work_units_with_nnz(prog, &nnz);
    for instr in &prog.instrs {
        match *instr {
            Instr::Restrict { from_level } => wu += p_nnz(from_level),
            Instr::CoarseCorrection { to_level, .. } => wu += p_nnz(to_level),
            Instr::StdVSolve { level } => {
                for l in 1..=level {
                    wu += 2.0 * p_nnz(l);
                }
                wu += nnz[0] / fine;
            }
            _ => {}
        }
    }
    wu
}

// ---------------------------------------------------------------------------
// Iteration-matrix analysis
// ---------------------------------------------------------------------------

/// Dense error-propagation matrix E of one cycle application, column by
/// column from unit error vectors with b = 0.
pub fn assemble_iteration_matrix(prog: &FlexProgram, h: &Hierarchy) -> Result<DenseMatrix, Error> {
    let n = h.finest().a.nrows();
    if n > DENSE_CAP {
        return Err(Error::CapExceeded(format!(
            "iteration matrix needs n <= {DENSE_CAP}, got {n}"
        )));
    }
    validate_program(prog, h)?;
    let b = vec![0.0; n];
    let mut e = DenseMatrix::zeros(n, n);
    let mut state = CycleState::new(h);
    for j in 0..n {
        let mut x = vec![0.0; n];
        x[j] = 1.0;
        let col = execute_cycle_with_state(prog, h, &mut state, &x, &b)?;
        e.set_column(j, &col);
    }
    Ok(e)
}

/// Spectral-radius estimate from restarted power iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    /// False when no restart stagnated within the iteration budget; the
    /// value is then the best estimate seen.
    pub converged: bool,
}

const POWER_RESTARTS: usize = 3;
const POWER_MAX_ITERS: usize = 10_000;
const POWER_RTOL: f64 = 1e-8;

/// Largest |eigenvalue| of a square dense matrix by power iteration with
/// three seeded random restarts, reporting the maximum estimate.
pub fn spectral_radius(e: &DenseMatrix) -> SpectralEstimate {
    assert_eq!(e.nrows(), e.ncols(), "spectral radius of a square matrix");
    let n = e.nrows();
    if n == 0 {
        return SpectralEstimate { value: 0.0, converged: true };
    }
    let mut best = 0.0f64;
    let mut any_converged = false;
    for restart in 0..POWER_RESTARTS {
        let mut x = crate::problems::random_vector(n, 0xC0FFEE + restart as u64);
        let xn = norm2(&x);
        if xn == 0.0 {
            continue;
        }
        x.iter_mut().for_each(|v| *v /= xn);
        let mut prev = f64::NAN;
        let mut est = 0.0;
        let mut stagnated = false;
        for _ in 0..POWER_MAX_ITERS {
            let y = e.matvec(&x);
            let yn = norm2(&y);
            if yn == 0.0 {
                // The start vector was annihilated; 0 is exact here.
                est = 0.0;
                stagnated = true;
                break;
            }
            if !yn.is_finite() {
                break;
            }
            est = yn; // x is unit length, so ||Ex|| estimates the radius
            x = y;
            x.iter_mut().for_each(|v| *v /= yn);
            if prev.is_finite() && (est - prev).abs() <= POWER_RTOL * est.max(f64::MIN_POSITIVE) {
                stagnated = true;
                break;
            }
            prev = est;
        }
        // Only the settled estimate counts; transients of non-normal
        // matrices overshoot the radius toward the operator norm.
        best = best.max(est);
        any_converged |= stagnated;
    }
    SpectralEstimate {
        value: best,
        converged: any_converged,
    }
}

/// All eigenvalues of a dense matrix as (re, im) pairs, sorted by real part
/// then imaginary part. Backed by a Schur decomposition.
pub fn dense_eigenvalues(e: &DenseMatrix) -> Result<Vec<(f64, f64)>, Error> {
    let n = e.nrows();
    if n != e.ncols() {
        return Err(Error::Invalid("eigenvalues of a non-square matrix".into()));
    }
    if n > DENSE_CAP {
        return Err(Error::CapExceeded(format!(
            "eigen decomposition needs n <= {DENSE_CAP}, got {n}"
        )));
    }
    let m = nalgebra::DMatrix::from_fn(n, n, |r, c| e[(r, c)]);
    let eig = m.complex_eigenvalues();
    let mut out: Vec<(f64, f64)> = eig.iter().map(|z| (z.re, z.im)).collect();
    out.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(out)
}

// ---------------------------------------------------------------------------
// Stationary solver driver
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TolMode {
    /// Stop when ||r|| <= tol.
    Absolute,
    /// Stop when ||r|| <= tol * ||r0||.
    Relative,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    pub tol_mode: TolMode,
    pub max_iter: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            tol_mode: TolMode::Absolute,
            max_iter: 100,
        }
    }
}

/// Residual growth factor beyond which a run is declared diverged.
const DIVERGENCE_FACTOR: f64 = 1e8;

/// Convergence-rate value reported for diverged runs.
pub const DIVERGED_RHO: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Iterations performed.
    pub n: usize,
    /// Geometric mean residual reduction (||r_N|| / ||r_0||)^(1/N); 0 when
    /// the initial guess already meets the tolerance, 10 when diverged.
    pub rho: f64,
    pub wu_total: f64,
    pub converged: bool,
    pub diverged: bool,
    /// Residual 2-norms, entry k for iteration k (entry 0 is the start).
    pub history: Vec<f64>,
}

pub fn residual_rate(r0: f64, rn: f64, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (rn / r0).powf(1.0 / n as f64)
}

/// Runs the cycle as a stationary iteration until the tolerance, the
/// iteration cap, or divergence. Divergence is recorded, not an error.
pub fn run_solver(
    prog: &FlexProgram,
    h: &Hierarchy,
    b: &[f64],
    x0: &[f64],
    opts: &SolveOptions,
) -> Result<SolveStats, Error> {
    validate_program(prog, h)?;
    let a = &h.finest().a;
    let wu_per_cycle = cycle_work_units(prog, h);
    let mut x = x0.to_vec();
    let r0 = norm2(&a.residual(&x, b));
    let threshold = match opts.tol_mode {
        TolMode::Absolute => opts.tol,
        TolMode::Relative => opts.tol * r0,
    };
    let mut history = vec![r0];
    if r0 <= threshold {
        return Ok(SolveStats {
            n: 0,
            rho: 0.0,
            wu_total: 0.0,
            converged: true,
            diverged: false,
            history,
        });
    }
    let mut state = CycleState::new(h);
    let mut converged = false;
    let mut diverged = false;
    let mut n = 0;
    for _ in 0..opts.max_iter {
        x = execute_cycle_with_state(prog, h, &mut state, &x, b)?;
        n += 1;
        let rn = norm2(&a.residual(&x, b));
        history.push(rn);
        if !rn.is_finite() || rn > DIVERGENCE_FACTOR * r0 {
            diverged = true;
            break;
        }
        if rn <= threshold {
            converged = true;
            break;
        }
    }
    let rho = if diverged {
        DIVERGED_RHO
    } else {
        residual_rate(r0, *history.last().unwrap(), n)
    };
    Ok(SolveStats {
        n,
        rho,
        wu_total: wu_per_cycle * n as f64,
        converged,
        diverged,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{build_anisotropic_poisson, random_vector, PoissonSpec};
    use crate::setup::{build_hierarchy, HierarchyConfig};
    use crate::smoother::SmootherVariant;
    use crate::sparse::SparseMatrix;

    fn poisson_hierarchy(nd: usize, c: [f64; 3]) -> Hierarchy {
        let spec = PoissonSpec::new(c[0], c[1], c[2], nd).unwrap();
        let a = build_anisotropic_poisson(&spec).unwrap();
        build_hierarchy(a, &HierarchyConfig::default()).unwrap()
    }

    /// Explicit V(1,1) over all levels with LU at the bottom.
    fn default_program(top: usize) -> FlexProgram {
        let mut instrs = Vec::new();
        for l in (1..=top).rev() {
            instrs.push(Instr::Relax {
                level: l,
                spec: vcycle_pre_smoother(),
            });
            instrs.push(Instr::Restrict { from_level: l });
        }
        instrs.push(Instr::StdVSolve { level: 0 });
        for l in 1..=top {
            instrs.push(Instr::CoarseCorrection {
                to_level: l,
                alpha: 1.0,
            });
            instrs.push(Instr::Relax {
                level: l,
                spec: vcycle_post_smoother(),
            });
        }
        FlexProgram::new(instrs, top, 0)
    }

    #[test]
    fn validate_catches_unbalanced() {
        let h = poisson_hierarchy(6, [1.0, 1.0, 1.0]);
        let top = h.top_level();
        assert!(top >= 1);
        let prog = FlexProgram::new(vec![Instr::Restrict { from_level: top }], top, 0);
        match validate_program(&prog, &h) {
            Err(Error::InvalidProgram { reason, .. }) => {
                assert!(reason.contains("cutoff") || reason.contains("unbalanced"), "{reason}")
            }
            other => panic!("expected invalid, got {other:?}"),
        }
    }

    #[test]
    fn validate_accepts_relax_only() {
        let h = poisson_hierarchy(6, [1.0, 1.0, 1.0]);
        let top = h.top_level();
        let prog = FlexProgram::new(
            vec![Instr::Relax {
                level: top,
                spec: vcycle_pre_smoother(),
            }],
            top,
            0,
        );
        validate_program(&prog, &h).unwrap();
    }

    #[test]
    fn validate_rejects_misplaced_vsolve() {
        let h = poisson_hierarchy(6, [1.0, 1.0, 1.0]);
        let top = h.top_level();
        let prog = FlexProgram::new(vec![Instr::StdVSolve { level: top }], top, 0);
        assert!(matches!(
            validate_program(&prog, &h),
            Err(Error::InvalidProgram { .. })
        ));
    }

    #[test]
    fn single_vsolve_wrapper_equals_standard_cycle() {
        let h = poisson_hierarchy(6, [1.0, 1.0, 1.0]);
        let top = h.top_level();
        let prog = FlexProgram::new(vec![Instr::StdVSolve { level: top }], top, top);
        validate_program(&prog, &h).unwrap();
        let n = h.finest().a.nrows();
        let b = random_vector(n, 3);
        let x0 = random_vector(n, 4);
        let via_prog = execute_cycle(&prog, &h, &x0, &b).unwrap();
        let direct = standard_v_cycle(&h, top, &x0, &b).unwrap();
        assert_eq!(via_prog, direct);
    }

    #[test]
    fn default_program_matches_v_cycle_bitwise() {
        let h = poisson_hierarchy(6, [1e-3, 1.0, 1.0]);
        let top = h.top_level();
        let prog = default_program(top);
        validate_program(&prog, &h).unwrap();
        let n = h.finest().a.nrows();
        let b = random_vector(n, 5);
        let mut xa = random_vector(n, 6);
        let mut xb = xa.clone();
        for _ in 0..5 {
            xa = execute_cycle(&prog, &h, &xa, &b).unwrap();
            xb = standard_v_cycle(&h, top, &xb, &b).unwrap();
            assert_eq!(xa, xb);
        }
    }

    #[test]
    fn fixed_point_preserved() {
        let h = poisson_hierarchy(5, [1.0, 1.0, 1.0]);
        let n = h.finest().a.nrows();
        let xstar = random_vector(n, 7);
        let b = h.finest().a.spmv(&xstar);
        let prog = default_program(h.top_level());
        let out = execute_cycle(&prog, &h, &xstar, &b).unwrap();
        let norm_x = norm2(&xstar);
        let diff: f64 = out
            .iter()
            .zip(&xstar)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert!(diff <= 1e-12 * (1.0 + norm_x), "fixed point moved by {diff}");
    }

    #[test]
    fn v_cycle_contracts_error() {
        let h = poisson_hierarchy(8, [1.0, 1.0, 1.0]);
        let n = h.finest().a.nrows();
        let b = vec![0.0; n];
        let mut shrank = 0;
        for seed in 0..50 {
            let e = random_vector(n, 100 + seed);
            let out = standard_v_cycle(&h, h.top_level(), &e, &b).unwrap();
            if norm2(&out) < norm2(&e) {
                shrank += 1;
            }
        }
        assert_eq!(shrank, 50);
    }

    #[test]
    fn work_units_paper_profile() {
        // Level-complexity coefficients, coarsest to finest, including the
        // direct-solve level which never receives smoothing.
        let nnz = [
            2.0e-6, 1.2e-5, 9.5e-5, 7.2e-4, 7.7e-3, 6.5e-2, 3.2e-1, 9.5e-1, 1.9, 1.0,
        ];
        let top = nnz.len() - 1;
        let v11 = default_program(top);
        let wu = work_units_with_nnz(&v11, &nnz);
        assert!((wu - 8.487).abs() < 0.05, "V(1,1) profile gave {wu}");

        // Sweep profile with no smoothing on the second-finest level and four
        // sweeps on the finest: pass straight through level top-1 on the way
        // down and up, smoothing twice extra at the top instead.
        let mut instrs = vec![
            Instr::Relax { level: top, spec: vcycle_pre_smoother() },
            Instr::Relax { level: top, spec: vcycle_pre_smoother() },
            Instr::Restrict { from_level: top },
            Instr::Restrict { from_level: top - 1 },
        ];
        for l in (1..=top - 2).rev() {
            instrs.push(Instr::Relax { level: l, spec: vcycle_pre_smoother() });
            instrs.push(Instr::Restrict { from_level: l });
        }
        instrs.push(Instr::StdVSolve { level: 0 });
        for l in 1..=top - 2 {
            instrs.push(Instr::CoarseCorrection { to_level: l, alpha: 1.0 });
            instrs.push(Instr::Relax { level: l, spec: vcycle_post_smoother() });
        }
        instrs.push(Instr::CoarseCorrection { to_level: top - 1, alpha: 1.0 });
        instrs.push(Instr::CoarseCorrection { to_level: top, alpha: 1.0 });
        instrs.push(Instr::Relax { level: top, spec: vcycle_post_smoother() });
        instrs.push(Instr::Relax { level: top, spec: vcycle_post_smoother() });
        let gp31 = FlexProgram::new(instrs, top, 0);
        let wu31 = work_units_with_nnz(&gp31, &nnz);
        assert!((wu31 - 6.687).abs() < 0.05, "GP-31 profile gave {wu31}");
    }

    #[test]
    fn work_units_zero_for_no_relax() {
        let nnz = [1.0, 10.0];
        let prog = FlexProgram::new(vec![], 1, 0);
        assert_eq!(work_units_with_nnz(&prog, &nnz), 0.0);
    }

    #[test]
    fn spectral_radius_examples() {
        let d = DenseMatrix::from_rows(&[vec![0.5, 0.0], vec![0.0, -0.9]]);
        let est = spectral_radius(&d);
        assert!((est.value - 0.9).abs() < 1e-7, "{est:?}");
        let z = DenseMatrix::zeros(3, 3);
        assert_eq!(spectral_radius(&z).value, 0.0);
    }

    #[test]
    fn spectral_radius_jacobi_laplacian() {
        // Jacobi on the 3-point Laplacian: eigenvalues cos(k pi / 4); the
        // dominant magnitude is cos(pi/4).
        let a = SparseMatrix::from_dense_rows(&[
            vec![2.0, -1.0, 0.0],
            vec![-1.0, 2.0, -1.0],
            vec![0.0, -1.0, 2.0],
        ]);
        let part = crate::sparse::BlockPartition::even(3, 1);
        let l1 = crate::smoother::compute_l1_diagonal(&a, &part);
        let spec = SmootherSpec::jacobi(SmootherVariant::Weighted, Ordering::Lex, 1.0);
        let t = crate::smoother::smoother_error_operator(&a, &spec, &part, &l1, None).unwrap();
        let est = spectral_radius(&t);
        let expect = (std::f64::consts::PI / 4.0).cos();
        assert!((est.value - expect).abs() < 1e-6, "{} vs {expect}", est.value);
    }

    #[test]
    fn iteration_matrix_matches_error_propagation() {
        let h = poisson_hierarchy(3, [1.0, 1.0, 1.0]);
        let prog = default_program(h.top_level());
        let e = assemble_iteration_matrix(&prog, &h).unwrap();
        let n = h.finest().a.nrows();
        let err = random_vector(n, 12);
        let through_cycle = execute_cycle(&prog, &h, &err, &vec![0.0; n]).unwrap();
        let through_matrix = e.matvec(&err);
        for (a, b) in through_cycle.iter().zip(&through_matrix) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn run_solver_rho_formula() {
        assert!((residual_rate(1.0, 1e-8, 8) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn work_units_additive_over_concatenation() {
        let nnz = [1.0, 4.0, 10.0];
        let a = default_program(2);
        let mut b_instrs = vec![Instr::Relax {
            level: 2,
            spec: vcycle_pre_smoother(),
        }];
        b_instrs.extend(a.instrs.clone());
        let b = FlexProgram::new(b_instrs.clone(), 2, 0);
        let mut cat = a.instrs.clone();
        cat.extend(b_instrs);
        let concatenated = FlexProgram::new(cat, 2, 0);
        let sum = work_units_with_nnz(&a, &nnz) + work_units_with_nnz(&b, &nnz);
        assert!((work_units_with_nnz(&concatenated, &nnz) - sum).abs() < 1e-12);
    }

    #[test]
    fn jacobi_only_program_composes_smoother_operator() {
        let h = poisson_hierarchy(3, [1.0, 1.0, 1.0]);
        let top = h.top_level();
        let spec = SmootherSpec::jacobi(SmootherVariant::Weighted, Ordering::Lex, 0.8);
        let prog = FlexProgram::new(
            vec![
                Instr::Relax { level: top, spec },
                Instr::Relax { level: top, spec },
            ],
            top,
            0,
        );
        let e = assemble_iteration_matrix(&prog, &h).unwrap();
        let lvl = h.level(top);
        let t = crate::smoother::smoother_error_operator(
            &lvl.a,
            &spec,
            &lvl.partition,
            &lvl.l1_diag,
            lvl.cf.as_ref(),
        )
        .unwrap();
        let tt = t.matmul(&t);
        assert!(e.sub(&tt).max_abs() < 1e-12);
    }

    #[test]
    fn v_cycle_spectral_radius_at_dense_cap() {
        // 8^3 = 512 unknowns, exactly the analysis cap: the default cycle's
        // radius sits below one and near the measured asymptotic rate.
        let h = poisson_hierarchy(8, [1e-3, 1.0, 1.0]);
        let prog = {
            let top = h.top_level();
            default_program(top)
        };
        let e = assemble_iteration_matrix(&prog, &h).unwrap();
        let radius = spectral_radius(&e);
        assert!(radius.value < 1.0, "default cycle radius {}", radius.value);
        // Measured asymptotic rate from renormalized error propagation.
        let n = h.finest().a.nrows();
        let b = vec![0.0; n];
        let mut err = random_vector(n, 99);
        let mut rate = 1.0;
        for _ in 0..120 {
            let next = execute_cycle(&prog, &h, &err, &b).unwrap();
            let nn = norm2(&next);
            rate = nn;
            err = next;
            err.iter_mut().for_each(|v| *v /= nn);
        }
        assert!(
            radius.value < rate + 0.05,
            "radius {} above measured {rate} + 0.05",
            radius.value
        );
    }

    #[test]
    fn run_solver_exact_start() {
        let h = poisson_hierarchy(4, [1.0, 1.0, 1.0]);
        let n = h.finest().a.nrows();
        let xstar = random_vector(n, 2);
        let b = h.finest().a.spmv(&xstar);
        let prog = default_program(h.top_level());
        let stats = run_solver(&prog, &h, &b, &xstar, &SolveOptions::default()).unwrap();
        assert_eq!(stats.n, 0);
        assert_eq!(stats.rho, 0.0);
        assert!(stats.converged);
    }

    #[test]
    fn run_solver_converges_on_anisotropic() {
        let h = poisson_hierarchy(8, [1e-3, 1.0, 1.0]);
        let n = h.finest().a.nrows();
        let x0 = random_vector(n, 1);
        let b = vec![0.0; n];
        let prog = default_program(h.top_level());
        let stats = run_solver(&prog, &h, &b, &x0, &SolveOptions::default()).unwrap();
        assert!(stats.converged, "{stats:?}");
        assert!(stats.rho < 1.0);
        assert!(stats.wu_total > 0.0);
    }

    #[test]
    fn retarget_shift_and_truncate() {
        // A two-grid program written for a 9-level hierarchy lands on a
        // 3-level one with its shape preserved.
        let deep = default_program(8);
        let shallow = deep.retarget(2);
        assert_eq!(shallow.l_top, 2);
        let h = poisson_hierarchy(6, [1.0, 1.0, 1.0]);
        let re = deep.retarget(h.top_level());
        validate_program(&re, &h).unwrap();
    }

    #[test]
    fn retarget_to_single_level() {
        let prog = default_program(4);
        let single = prog.retarget(0);
        assert_eq!(single.instrs, vec![Instr::StdVSolve { level: 0 }]);
    }

    #[test]
    fn linearity_in_x_and_b() {
        let h = poisson_hierarchy(4, [1.0, 1.0, 1.0]);
        let prog = default_program(h.top_level());
        let n = h.finest().a.nrows();
        let (x1, x2) = (random_vector(n, 21), random_vector(n, 22));
        let (b1, b2) = (random_vector(n, 23), random_vector(n, 24));
        let y1 = execute_cycle(&prog, &h, &x1, &b1).unwrap();
        let y2 = execute_cycle(&prog, &h, &x2, &b2).unwrap();
        let xsum: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| 0.3 * a + 0.7 * b).collect();
        let bsum: Vec<f64> = b1.iter().zip(&b2).map(|(a, b)| 0.3 * a + 0.7 * b).collect();
        let ysum = execute_cycle(&prog, &h, &xsum, &bsum).unwrap();
        for i in 0..n {
            let expect = 0.3 * y1[i] + 0.7 * y2[i];
            assert!((ysum[i] - expect).abs() < 1e-9 * (1.0 + expect.abs()));
        }
    }
}
