//! The smoother menu: weighted Jacobi, hybrid Gauss-Seidel variants with
//! inner/outer relaxation weights, their l1-augmented forms, and
//! lexicographic versus C-F sweep ordering.
//!
//! Hybrid semantics: B is block-diagonal over the row partition, so one sweep
//! freezes off-block values at their sweep-start state (the global
//! Jacobi-like coupling) while each block performs an in-block triangular
//! solve. The outer weight scales the resulting global update.

use crate::setup::CfSplitting;
use crate::sparse::{BlockPartition, DenseMatrix, SparseMatrix};
use crate::Error;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmootherKind {
    Jacobi,
    /// Hybrid Gauss-Seidel, forward in-block order.
    Gsf,
    /// Hybrid Gauss-Seidel, backward in-block order.
    Gsb,
    /// Symmetric: one forward sweep then one backward sweep.
    Gss,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmootherVariant {
    /// Relaxation-weighted form; uses omega (Jacobi) or omega_i/omega_o (GS).
    Weighted,
    /// l1 form: the block diagonal is augmented by off-block row sums and no
    /// relaxation weights apply.
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ordering {
    Lex,
    /// Coarse points first, then fine points.
    Cf,
}

/// Complete description of one relaxation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherSpec {
    pub kind: SmootherKind,
    pub variant: SmootherVariant,
    pub ordering: Ordering,
    /// Jacobi weight; ignored by GS kinds and by the l1 variant.
    #[serde(default = "one")]
    pub omega: f64,
    /// Inner (in-block) relaxation weight for hybrid GS.
    #[serde(default = "one")]
    pub omega_i: f64,
    /// Outer (global update) relaxation weight for hybrid GS.
    #[serde(default = "one")]
    pub omega_o: f64,
    /// Run the C-F sub-sweeps fine-points-first instead.
    #[serde(default)]
    pub cf_reverse: bool,
}

fn one() -> f64 {
    1.0
}

impl SmootherSpec {
    pub fn jacobi(variant: SmootherVariant, ordering: Ordering, omega: f64) -> Self {
        Self {
            kind: SmootherKind::Jacobi,
            variant,
            ordering,
            omega,
            omega_i: 1.0,
            omega_o: 1.0,
            cf_reverse: false,
        }
    }

    pub fn hybrid(
        kind: SmootherKind,
        ordering: Ordering,
        omega_i: f64,
        omega_o: f64,
    ) -> Self {
        Self {
            kind,
            variant: SmootherVariant::Weighted,
            ordering,
            omega: 1.0,
            omega_i,
            omega_o,
            cf_reverse: false,
        }
    }

    pub fn l1(kind: SmootherKind, ordering: Ordering) -> Self {
        Self {
            kind,
            variant: SmootherVariant::L1,
            ordering,
            omega: 1.0,
            omega_i: 1.0,
            omega_o: 1.0,
            cf_reverse: false,
        }
    }

    /// Relaxation sweeps this spec costs in the work-unit model (GSS is two).
    pub fn sweep_cost(&self) -> f64 {
        match self.kind {
            SmootherKind::Gss => 2.0,
            _ => 1.0,
        }
    }
}

/// Per-row l1 augmentation: d_i = sum of |a_ij| over columns outside row i's
/// own partition block. Identically zero for a single-block partition.
#[derive(Debug, Clone, PartialEq)]
pub struct L1Diagonal {
    pub values: Vec<f64>,
}

pub fn compute_l1_diagonal(a: &SparseMatrix, partition: &BlockPartition) -> L1Diagonal {
    assert_eq!(partition.nrows(), a.nrows(), "partition must cover all rows");
    let mut values = vec![0.0; a.nrows()];
    for block in partition.blocks() {
        for i in block.clone() {
            let (cols, vals) = a.row(i);
            values[i] = cols
                .iter()
                .zip(vals)
                .filter(|(&c, _)| !block.contains(&c))
                .map(|(_, &v)| v.abs())
                .sum();
        }
    }
    L1Diagonal { values }
}

/// In-block visiting order of a sub-sweep.
#[derive(Clone, Copy)]
enum Direction {
    Forward,
    Backward,
}

/// One sweep of x <- x + B^{-1}(b - A x) for the given spec.
///
/// For CF ordering the sweep runs as two sub-sweeps over the same B: first
/// the C rows, then the F rows with the updated in-block C values visible
/// (off-block values stay frozen at sweep start).
pub fn apply_smoother(
    a: &SparseMatrix,
    x: &mut [f64],
    b: &[f64],
    spec: &SmootherSpec,
    partition: &BlockPartition,
    l1diag: &L1Diagonal,
    cf_marks: Option<&CfSplitting>,
) -> Result<(), Error> {
    assert_eq!(x.len(), a.nrows(), "smoother: x dimension mismatch");
    assert_eq!(b.len(), a.nrows(), "smoother: b dimension mismatch");
    match spec.kind {
        SmootherKind::Gss => {
            let mut fwd = *spec;
            fwd.kind = SmootherKind::Gsf;
            let mut bwd = *spec;
            bwd.kind = SmootherKind::Gsb;
            apply_smoother(a, x, b, &fwd, partition, l1diag, cf_marks)?;
            apply_smoother(a, x, b, &bwd, partition, l1diag, cf_marks)
        }
        _ => match spec.ordering {
            Ordering::Lex => sweep(a, x, b, spec, partition, l1diag, None, None),
            Ordering::Cf => {
                let marks = cf_marks.ok_or_else(|| {
                    Error::Invalid("C-F ordering requires C/F marks".into())
                })?;
                // C rows first (F first under cf_reverse); the second
                // sub-sweep sees the updated in-block values of the first
                // while off-block values stay frozen at the sweep start.
                let first_coarse = !spec.cf_reverse;
                let start = x.to_vec();
                sweep(a, x, b, spec, partition, l1diag, Some((marks, first_coarse)), None)?;
                sweep(
                    a,
                    x,
                    b,
                    spec,
                    partition,
                    l1diag,
                    Some((marks, !first_coarse)),
                    Some(&start),
                )
            }
        },
    }
}

/// One (sub-)sweep over the rows selected by `cf_filter`:
/// None = all rows; Some((marks, true)) = C rows; Some((marks, false)) = F rows.
///
/// When `frozen` is given, off-block columns read from that snapshot instead
/// of the current x. The correction z never crosses block boundaries inside
/// the triangular solve, so in-block coupling is the only dynamic part.
#[allow(clippy::too_many_arguments)]
fn sweep(
    a: &SparseMatrix,
    x: &mut [f64],
    b: &[f64],
    spec: &SmootherSpec,
    partition: &BlockPartition,
    l1diag: &L1Diagonal,
    cf_filter: Option<(&CfSplitting, bool)>,
    frozen: Option<&[f64]>,
) -> Result<(), Error> {
    let selected = |i: usize| match cf_filter {
        None => true,
        Some((marks, coarse)) => marks.is_coarse(i) == coarse,
    };
    let l1 = spec.variant == SmootherVariant::L1;

    // Residual at sub-sweep start; in-block columns read the current x,
    // off-block columns the frozen sweep-start values when present.
    let r = match frozen {
        None => a.residual(x, b),
        Some(x0) => {
            let mut r = vec![0.0; a.nrows()];
            for block in partition.blocks() {
                for i in block.clone() {
                    let (cols, vals) = a.row(i);
                    let mut acc = b[i];
                    for (&c, &v) in cols.iter().zip(vals) {
                        let xc = if block.contains(&c) { x[c] } else { x0[c] };
                        acc -= v * xc;
                    }
                    r[i] = acc;
                }
            }
            r
        }
    };

    match spec.kind {
        SmootherKind::Jacobi => {
            for i in 0..a.nrows() {
                if !selected(i) {
                    continue;
                }
                let mut d = a.entry(i, i);
                if l1 {
                    d += l1diag.values[i];
                }
                if d == 0.0 {
                    return Err(Error::ZeroDiagonal { row: i });
                }
                let z = if l1 { r[i] / d } else { spec.omega * r[i] / d };
                x[i] += z;
            }
            Ok(())
        }
        SmootherKind::Gsf => block_triangular(a, x, &r, spec, partition, l1diag, &selected, Direction::Forward, l1),
        SmootherKind::Gsb => block_triangular(a, x, &r, spec, partition, l1diag, &selected, Direction::Backward, l1),
        SmootherKind::Gss => unreachable!("GSS is decomposed before sweeping"),
    }
}

/// In-block triangular solve of (D/w_i - L) z = r (forward; U for backward),
/// restricted to the selected rows, followed by the outer-weighted update.
/// The l1 form solves (D + D_l1 - L) z = r with no weights.
#[allow(clippy::too_many_arguments)]
fn block_triangular(
    a: &SparseMatrix,
    x: &mut [f64],
    r: &[f64],
    spec: &SmootherSpec,
    partition: &BlockPartition,
    l1diag: &L1Diagonal,
    selected: &dyn Fn(usize) -> bool,
    dir: Direction,
    l1: bool,
) -> Result<(), Error> {
    let mut z = vec![0.0; a.nrows()];
    for block in partition.blocks() {
        let rows: Box<dyn Iterator<Item = usize>> = match dir {
            Direction::Forward => Box::new(block.clone()),
            Direction::Backward => Box::new(block.clone().rev()),
        };
        for i in rows {
            if !selected(i) {
                continue;
            }
            let (cols, vals) = a.row(i);
            let mut rhs = r[i];
            let mut diag = 0.0;
            for (&c, &v) in cols.iter().zip(vals) {
                if c == i {
                    diag = v;
                    continue;
                }
                if !block.contains(&c) || !selected(c) {
                    continue;
                }
                let visited = match dir {
                    Direction::Forward => c < i,
                    Direction::Backward => c > i,
                };
                if visited {
                    rhs -= v * z[c];
                }
            }
            let d = if l1 {
                diag + l1diag.values[i]
            } else {
                diag / spec.omega_i
            };
            if d == 0.0 {
                return Err(Error::ZeroDiagonal { row: i });
            }
            z[i] = rhs / d;
        }
    }
    let scale = if l1 { 1.0 } else { spec.omega_o };
    for i in 0..x.len() {
        if selected(i) {
            x[i] += scale * z[i];
        }
    }
    Ok(())
}

/// Dense error-propagation operator T with x' - x* = T (x - x*), assembled by
/// sweeping each unit error vector against b = 0.
pub fn smoother_error_operator(
    a: &SparseMatrix,
    spec: &SmootherSpec,
    partition: &BlockPartition,
    l1diag: &L1Diagonal,
    cf_marks: Option<&CfSplitting>,
) -> Result<DenseMatrix, Error> {
    let n = a.nrows();
    if n > crate::sparse::DENSE_CAP {
        return Err(Error::CapExceeded(format!(
            "error operator needs n <= {}, got {n}",
            crate::sparse::DENSE_CAP
        )));
    }
    let b = vec![0.0; n];
    let mut t = DenseMatrix::zeros(n, n);
    for j in 0..n {
        let mut x = vec![0.0; n];
        x[j] = 1.0;
        apply_smoother(a, &mut x, &b, spec, partition, l1diag, cf_marks)?;
        t.set_column(j, &x);
    }
    Ok(t)
}
