//! AMG setup phase: strength of connection, PMIS coarse/fine splitting,
//! direct interpolation, and the Galerkin hierarchy shared by all cycles.
//!
//! The hierarchy is built once per problem and treated as immutable input by
//! the cycle search; levels are indexed 0 (coarsest) through `top_level()`
//! (finest), matching the L..0 grid numbering of the multigrid literature.

use crate::smoother::{compute_l1_diagonal, L1Diagonal};
use crate::sparse::{
    dense_lu_factor, triple_product, BlockPartition, LuFactors, SparseMatrix,
};
use crate::Error;
use serde::{Deserialize, Serialize};

/// Per-row lists of strongly connected columns under the classical
/// negative-coupling criterion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrengthGraph {
    rows: Vec<Vec<usize>>,
}

impl StrengthGraph {
    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Column j is strong for row i iff -a_ij >= theta * max_k(-a_ik), the max
/// taken over negative off-diagonals only. Rows without negative
/// off-diagonals get empty lists.
pub fn strength_of_connection(a: &SparseMatrix, theta: f64) -> StrengthGraph {
    assert_eq!(a.nrows(), a.ncols(), "strength graph needs a square matrix");
    assert!(
        theta > 0.0 && theta < 1.0,
        "strength threshold must lie in (0,1)"
    );
    let mut rows = Vec::with_capacity(a.nrows());
    for i in 0..a.nrows() {
        let (cols, vals) = a.row(i);
        let max_neg = cols
            .iter()
            .zip(vals)
            .filter(|(&c, &v)| c != i && v < 0.0)
            .map(|(_, &v)| -v)
            .fold(0.0f64, f64::max);
        if max_neg == 0.0 {
            rows.push(Vec::new());
            continue;
        }
        let cutoff = theta * max_neg;
        rows.push(
            cols.iter()
                .zip(vals)
                .filter(|(&c, &v)| c != i && v < 0.0 && -v >= cutoff)
                .map(|(&c, _)| c)
                .collect(),
        );
    }
    StrengthGraph { rows }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mark {
    Coarse,
    Fine,
}

/// Coarse/fine labels for one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfSplitting {
    pub marks: Vec<Mark>,
}

impl CfSplitting {
    pub fn num_coarse(&self) -> usize {
        self.marks.iter().filter(|m| **m == Mark::Coarse).count()
    }

    pub fn is_coarse(&self, i: usize) -> bool {
        self.marks[i] == Mark::Coarse
    }
}

/// splitmix64, used for deterministic per-row tie-breaking weights.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn hash01(seed: u64, row: usize) -> f64 {
    splitmix64(seed ^ (row as u64).wrapping_mul(0x9e3779b97f4a7c15)) as f64 / 2f64.powi(64)
}

/// PMIS coarsening: node weight = strong-transpose degree plus a seeded hash
/// fraction; greedy independent-set rounds label every node.
pub fn cf_split_pmis(s: &StrengthGraph, seed: u64) -> CfSplitting {
    let n = s.num_rows();
    // Transpose adjacency: who strongly depends on each node.
    let mut transpose: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for &j in s.row(i) {
            transpose[j].push(i);
        }
    }
    let weights: Vec<f64> = (0..n)
        .map(|i| transpose[i].len() as f64 + hash01(seed, i))
        .collect();

    let mut marks: Vec<Option<Mark>> = vec![None; n];
    // Rows with no strong couplings in either direction are isolated F points.
    for i in 0..n {
        if s.row(i).is_empty() && transpose[i].is_empty() {
            marks[i] = Some(Mark::Fine);
        }
    }

    let beats = |i: usize, j: usize| {
        (weights[i], i) > (weights[j], j)
    };

    let mut unlabeled: Vec<usize> = (0..n).filter(|&i| marks[i].is_none()).collect();
    while !unlabeled.is_empty() {
        // Local maxima among unlabeled symmetrized neighbors become C points.
        let mut selected = Vec::new();
        for &i in &unlabeled {
            let dominated = s
                .row(i)
                .iter()
                .chain(&transpose[i])
                .any(|&j| marks[j].is_none() && beats(j, i));
            if !dominated {
                selected.push(i);
            }
        }
        debug_assert!(!selected.is_empty(), "PMIS round selected no nodes");
        for &i in &selected {
            marks[i] = Some(Mark::Coarse);
        }
        // Nodes that now depend on a C point become F.
        for &i in &unlabeled {
            if marks[i].is_none()
                && s.row(i).iter().any(|&j| marks[j] == Some(Mark::Coarse))
            {
                marks[i] = Some(Mark::Fine);
            }
        }
        unlabeled.retain(|&i| marks[i].is_none());
    }

    CfSplitting {
        marks: marks.into_iter().map(Option::unwrap).collect(),
    }
}

/// Direct interpolation with negative-coupling normalization.
///
/// C-point rows are unit rows. An F-point row i carries, for each strong C
/// neighbor j, the weight
/// `w_ij = -(a_ij * sum_neg_i / sum_strongC_i) / a_ii`,
/// where `sum_neg_i` runs over all negative off-diagonals of row i and
/// `sum_strongC_i` over the strong C neighbors. Isolated F rows are zero.
///
/// F points with strong neighbors but no strong C neighbor are promoted to C
/// and the caller-provided splitting is amended (the promotion is reported).
pub fn build_interpolation(
    a: &SparseMatrix,
    s: &StrengthGraph,
    split: &CfSplitting,
) -> (SparseMatrix, CfSplitting, usize) {
    let n = a.nrows();
    let mut marks = split.marks.clone();
    let mut promoted = 0usize;
    for i in 0..n {
        if marks[i] == Mark::Fine
            && !s.row(i).is_empty()
            && !s.row(i).iter().any(|&j| marks[j] == Mark::Coarse)
        {
            marks[i] = Mark::Coarse;
            promoted += 1;
        }
    }
    let split = CfSplitting { marks };

    let mut coarse_index = vec![usize::MAX; n];
    let mut nc = 0usize;
    for i in 0..n {
        if split.is_coarse(i) {
            coarse_index[i] = nc;
            nc += 1;
        }
    }

    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        if split.is_coarse(i) {
            triplets.push((i, coarse_index[i], 1.0));
            continue;
        }
        let strong_c: Vec<usize> = s
            .row(i)
            .iter()
            .copied()
            .filter(|&j| split.is_coarse(j))
            .collect();
        if strong_c.is_empty() {
            continue; // isolated F row stays zero
        }
        let (cols, vals) = a.row(i);
        let diag = a.entry(i, i);
        let sum_neg: f64 = cols
            .iter()
            .zip(vals)
            .filter(|(&c, &v)| c != i && v < 0.0)
            .map(|(_, &v)| v)
            .sum();
        let sum_strong_c: f64 = strong_c.iter().map(|&j| a.entry(i, j)).sum();
        for &j in &strong_c {
            let w = -(a.entry(i, j) * sum_neg / sum_strong_c) / diag;
            triplets.push((i, coarse_index[j], w));
        }
    }
    let p = SparseMatrix::from_triplets(n, nc, &triplets).expect("interpolation triplets valid");
    (p, split, promoted)
}

/// One level of the hierarchy. Transfer operators and the splitting on level
/// l (for l >= 1) connect it to level l-1.
#[derive(Debug)]
pub struct Level {
    pub a: SparseMatrix,
    /// Prolongation from level l-1 into this level; absent on the coarsest.
    pub p: Option<SparseMatrix>,
    /// Restriction from this level to l-1, stored explicitly as P^T.
    pub r: Option<SparseMatrix>,
    /// C/F marks used when this level was coarsened; absent on the coarsest.
    pub cf: Option<CfSplitting>,
    pub partition: BlockPartition,
    pub l1_diag: L1Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyConfig {
    pub theta: f64,
    pub coarse_size_max: usize,
    pub partition_blocks: usize,
    pub seed: u64,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            theta: 0.25,
            coarse_size_max: 16,
            partition_blocks: 8,
            seed: 0,
        }
    }
}

/// Fixed AMG hierarchy: operators, transfers, partitions, l1 diagonals, and
/// the dense factorization of the coarsest operator.
#[derive(Debug)]
pub struct Hierarchy {
    /// levels[l] is grid level l; 0 is the coarsest.
    levels: Vec<Level>,
    coarse_lu: LuFactors,
    config: HierarchyConfig,
    promotions: usize,
}

/// Coarsening must shrink a level by at least this factor or it is stalled.
const STALL_REDUCTION: f64 = 0.05;

pub fn build_hierarchy(a: SparseMatrix, config: &HierarchyConfig) -> Result<Hierarchy, Error> {
    a.check_spd_symmetry()?;
    if !(config.theta > 0.0 && config.theta < 1.0) {
        return Err(Error::Invalid(format!(
            "theta={} must lie in (0,1)",
            config.theta
        )));
    }

    // Built finest-first, reversed into coarsest-first storage below.
    struct Raw {
        a: SparseMatrix,
        p: Option<SparseMatrix>,
        r: Option<SparseMatrix>,
        cf: Option<CfSplitting>,
    }
    let mut raw = vec![Raw {
        a,
        p: None,
        r: None,
        cf: None,
    }];
    let mut promotions = 0usize;
    loop {
        let fine = &raw.last().unwrap().a;
        let n = fine.nrows();
        if n <= config.coarse_size_max {
            break;
        }
        let s = strength_of_connection(fine, config.theta);
        let split = cf_split_pmis(&s, config.seed.wrapping_add(raw.len() as u64));
        let (p, split, promoted) = build_interpolation(fine, &s, &split);
        promotions += promoted;
        let nc = p.ncols();
        if nc == 0 || ((n - nc) as f64) < STALL_REDUCTION * n as f64 {
            if n > crate::sparse::DENSE_CAP {
                return Err(Error::CoarseningStalled { rows: n });
            }
            break;
        }
        let r = p.transpose();
        let coarse = triple_product(&r, fine, &p)?;
        let top = raw.last_mut().unwrap();
        top.p = Some(p);
        top.r = Some(r);
        top.cf = Some(split);
        raw.push(Raw {
            a: coarse,
            p: None,
            r: None,
            cf: None,
        });
    }

    let coarsest = &raw.last().unwrap().a;
    if coarsest.nrows() > crate::sparse::DENSE_CAP {
        return Err(Error::CoarseningStalled {
            rows: coarsest.nrows(),
        });
    }
    let coarse_lu = dense_lu_factor(&coarsest.to_dense())?;

    // Reverse so that index == level number with 0 the coarsest. The
    // transfers computed while coarsening level l live on level l itself.
    raw.reverse();
    let levels = raw
        .into_iter()
        .map(|rawlvl| {
            let partition = BlockPartition::even(rawlvl.a.nrows(), config.partition_blocks);
            let l1_diag = compute_l1_diagonal(&rawlvl.a, &partition);
            Level {
                a: rawlvl.a,
                p: rawlvl.p,
                r: rawlvl.r,
                cf: rawlvl.cf,
                partition,
                l1_diag,
            }
        })
        .collect();

    Ok(Hierarchy {
        levels,
        coarse_lu,
        config: *config,
        promotions,
    })
}

impl Hierarchy {
    /// Index of the finest level (the spec's L).
    pub fn top_level(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, l: usize) -> &Level {
        &self.levels[l]
    }

    pub fn finest(&self) -> &Level {
        self.levels.last().unwrap()
    }

    pub fn coarse_lu(&self) -> &LuFactors {
        &self.coarse_lu
    }

    pub fn config(&self) -> &HierarchyConfig {
        &self.config
    }

    /// F-to-C promotions applied while building interpolation.
    pub fn promotions(&self) -> usize {
        self.promotions
    }

    /// nnz of each level's operator, coarsest first.
    pub fn level_nnz(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.a.nnz()).collect()
    }

    /// Stable fingerprint over all level structures and values.
    pub fn fingerprint(&self) -> u64 {
        let mut h = 0xcbf29ce484222325u64; // FNV offset basis
        let mut feed = |x: u64| {
            h ^= x;
            h = h.wrapping_mul(0x100000001b3);
        };
        for lvl in &self.levels {
            feed(lvl.a.nrows() as u64);
            for (r, c, v) in lvl.a.iter() {
                feed(r as u64);
                feed(c as u64);
                feed(v.to_bits());
            }
            if let Some(p) = &lvl.p {
                for (r, c, v) in p.iter() {
                    feed(r as u64 ^ 0x5555_5555);
                    feed(c as u64);
                    feed(v.to_bits());
                }
            }
        }
        h
    }
}
