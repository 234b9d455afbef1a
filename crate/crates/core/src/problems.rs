//! Test-problem generators: 3D anisotropic Poisson operators and a synthetic
//! time-step matrix sequence with improving diagonal dominance.

use crate::sparse::SparseMatrix;
use crate::Error;
use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default cap on generated unknowns before builders refuse.
pub const DEFAULT_UNKNOWN_CAP: usize = 4_000_000;

/// Anisotropic Poisson problem on the unit cube: 7-point stencil with
/// per-axis diffusion coefficients and homogeneous Dirichlet boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoissonSpec {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Grid points per dimension; the system has `nd^3` unknowns.
    pub nd: usize,
}

impl PoissonSpec {
    pub fn new(c1: f64, c2: f64, c3: f64, nd: usize) -> Result<Self, Error> {
        let spec = Self { c1, c2, c3, nd };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), Error> {
        for (name, c) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(1e-5..=1.0).contains(&c) {
                return Err(Error::Invalid(format!(
                    "{name}={c} outside the admissible range [1e-5, 1]"
                )));
            }
        }
        if self.nd == 0 {
            return Err(Error::Invalid("nd must be at least 1".into()));
        }
        Ok(())
    }

    pub fn unknowns(&self) -> usize {
        self.nd * self.nd * self.nd
    }
}

/// Synthetic time-step sequence A^(k) = M + dt (K + C^(k)) standing in for a
/// radiation-diffusion / electron-conduction pair: M is the identity mass
/// matrix, K an isotropic 7-point Laplacian, and C^(k) a positive diagonal
/// reaction term that strengthens step by step, so diagonal dominance
/// eta(A^(k)) improves as the sequence progresses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimestepSpec {
    pub nd: usize,
    pub k_max: usize,
    pub dt: f64,
    pub reaction_scale: f64,
    /// Per-step geometric rate of the decaying transient in (0, 1].
    pub decay: f64,
}

impl TimestepSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.nd == 0 {
            return Err(Error::Invalid("nd must be at least 1".into()));
        }
        if self.k_max == 0 {
            return Err(Error::Invalid("k_max must be at least 1".into()));
        }
        if self.dt <= 0.0 {
            return Err(Error::Invalid(format!("dt={} must be positive", self.dt)));
        }
        if self.reaction_scale < 0.0 {
            return Err(Error::Invalid("reaction_scale must be non-negative".into()));
        }
        if !(0.0 < self.decay && self.decay <= 1.0) {
            return Err(Error::Invalid(format!(
                "decay={} must lie in (0, 1]",
                self.decay
            )));
        }
        Ok(())
    }
}

impl Default for TimestepSpec {
    fn default() -> Self {
        Self {
            nd: 16,
            k_max: 20,
            dt: 20.0,
            reaction_scale: 5.0,
            decay: 0.98,
        }
    }
}

fn grid_index(nd: usize, x: usize, y: usize, z: usize) -> usize {
    x + nd * (y + nd * z)
}

/// 7-point finite-difference operator with axis coefficients (c1, c2, c3),
/// x-fastest lexicographic ordering, unit-spacing scaling absorbed.
fn stencil_7pt(nd: usize, c: [f64; 3]) -> SparseMatrix {
    let n = nd * nd * nd;
    let diag = 2.0 * (c[0] + c[1] + c[2]);
    let mut triplets = Vec::with_capacity(7 * n);
    for z in 0..nd {
        for y in 0..nd {
            for x in 0..nd {
                let i = grid_index(nd, x, y, z);
                triplets.push((i, i, diag));
                if x > 0 {
                    triplets.push((i, grid_index(nd, x - 1, y, z), -c[0]));
                }
                if x + 1 < nd {
                    triplets.push((i, grid_index(nd, x + 1, y, z), -c[0]));
                }
                if y > 0 {
                    triplets.push((i, grid_index(nd, x, y - 1, z), -c[1]));
                }
                if y + 1 < nd {
                    triplets.push((i, grid_index(nd, x, y + 1, z), -c[1]));
                }
                if z > 0 {
                    triplets.push((i, grid_index(nd, x, y, z - 1), -c[2]));
                }
                if z + 1 < nd {
                    triplets.push((i, grid_index(nd, x, y, z + 1), -c[2]));
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets).expect("stencil triplets are consistent")
}

pub fn build_anisotropic_poisson(spec: &PoissonSpec) -> Result<SparseMatrix, Error> {
    build_anisotropic_poisson_with_cap(spec, DEFAULT_UNKNOWN_CAP)
}

pub fn build_anisotropic_poisson_with_cap(
    spec: &PoissonSpec,
    cap: usize,
) -> Result<SparseMatrix, Error> {
    spec.validate()?;
    if spec.unknowns() > cap {
        return Err(Error::CapExceeded(format!(
            "{} unknowns exceed the cap of {cap}",
            spec.unknowns()
        )));
    }
    Ok(stencil_7pt(spec.nd, [spec.c1, spec.c2, spec.c3]))
}

/// Builds the k-th system (1-based) of the surrogate sequence.
pub fn build_timestep_matrix(spec: &TimestepSpec, k: usize) -> Result<SparseMatrix, Error> {
    spec.validate()?;
    if k == 0 || k > spec.k_max {
        return Err(Error::Invalid(format!(
            "time step k={k} outside 1..={}",
            spec.k_max
        )));
    }
    let nd = spec.nd;
    let n = nd * nd * nd;
    if n > DEFAULT_UNKNOWN_CAP {
        return Err(Error::CapExceeded(format!(
            "{n} unknowns exceed the cap of {DEFAULT_UNKNOWN_CAP}"
        )));
    }
    let k_matrix = stencil_7pt(nd, [1.0, 1.0, 1.0]);
    // Reaction transient: the gap to the equilibrated state decays
    // geometrically, so the diagonal contribution grows with k from zero at
    // the first (most ill-conditioned) step.
    let ramp = spec.reaction_scale * (1.0 - spec.decay.powi(k as i32 - 1));
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(k_matrix.nnz());
    for (r, c, v) in k_matrix.iter() {
        triplets.push((r, c, spec.dt * v));
    }
    for i in 0..n {
        let reaction = ramp * (1.0 + 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).sin());
        triplets.push((i, i, 1.0 + spec.dt * reaction));
    }
    SparseMatrix::from_triplets(n, n, &triplets)
}

pub fn build_timestep_sequence(spec: &TimestepSpec) -> Result<Vec<SparseMatrix>, Error> {
    (1..=spec.k_max)
        .map(|k| build_timestep_matrix(spec, k))
        .collect()
}

/// eta(A): summed absolute diagonal over summed absolute off-diagonal entries.
/// Returns +infinity when the off-diagonal part vanishes.
pub fn diagonal_dominance_ratio(a: &SparseMatrix) -> f64 {
    assert_eq!(a.nrows(), a.ncols(), "eta is defined for square matrices");
    let mut diag = 0.0;
    let mut off = 0.0;
    for (r, c, v) in a.iter() {
        if r == c {
            diag += v.abs();
        } else {
            off += v.abs();
        }
    }
    if off == 0.0 {
        f64::INFINITY
    } else {
        diag / off
    }
}

/// Seeded uniform vector in [-1, 1] from a portable ChaCha8 stream.
pub fn random_vector(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            // 53 random mantissa bits mapped affinely onto [-1, 1].
            let u = (rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
            2.0 * u - 1.0
        })
        .collect()
}

pub fn zero_vector(n: usize) -> Vec<f64> {
    vec![0.0; n]
}
