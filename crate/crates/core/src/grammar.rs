//! Context-free grammar over flexible AMG cycles, derivation-tree genotypes,
//! and the grammar-constrained variation operators.
//!
//! The grammar describes cycle states backward from the final state: the
//! root is the finished approximation on the finest level, every production
//! names the operation that produced its state, and the chain terminates in
//! the initial guess. Decoding therefore reverses the chain into execution
//! order. State symbols carry the level *offset* below the finest grid
//! (offset 0 = finest); the deepest flexible state admits only the embedded
//! standard V-cycle.

use crate::cycle::{FlexProgram, Instr, DEFAULT_N_FLEX, DEPTH_CAP};
use crate::setup::Hierarchy;
use crate::smoother::{Ordering, SmootherKind, SmootherSpec};
use crate::Error;
use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Cap on state-chain nodes so decoded programs stay under the instruction
/// cap (a chain node emits at most two instructions).
pub const CHAIN_CAP: usize = DEPTH_CAP / 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// Approximation state at the given level offset below the finest grid.
    State(usize),
    SmootherL1,
    SmootherHybrid,
    Order,
    WeightInner,
    WeightOuter,
    WeightJacobi,
    Alpha,
}

/// Productions available to state symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateProduction {
    L1Relax,
    HybridRelax,
    JacobiRelax,
    CoarseGridCorrection,
    Restrict,
    RestrictAndSolve,
    InitialGuess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub symbol: Symbol,
    /// Index into the symbol's production (or terminal) list.
    pub production: usize,
    pub children: Vec<Node>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivationTree {
    pub root: Node,
}

/// The production rules: number of flexible levels and the terminal sets.
#[derive(Debug, Clone)]
pub struct Grammar {
    n_flex: usize,
    weights: Vec<f64>,
}

const L1_KINDS: [SmootherKind; 3] = [SmootherKind::Gsf, SmootherKind::Gsb, SmootherKind::Jacobi];
const HYBRID_KINDS: [SmootherKind; 2] = [SmootherKind::Gsf, SmootherKind::Gsb];
const ORDERINGS: [Ordering; 2] = [Ordering::Lex, Ordering::Cf];

impl Grammar {
    /// Weight terminals 0.1, 0.15, ..., 1.9; `include_zero` prepends 0.
    pub fn new(n_flex: usize, include_zero: bool) -> Result<Self, Error> {
        if n_flex < 2 {
            return Err(Error::Invalid(format!(
                "grammar needs at least 2 flexible levels, got {n_flex}"
            )));
        }
        let mut weights = Vec::new();
        if include_zero {
            weights.push(0.0);
        }
        weights.extend((0..37).map(|k| 0.1 + 0.05 * k as f64));
        Ok(Self { n_flex, weights })
    }

    pub fn standard() -> Self {
        Self::new(DEFAULT_N_FLEX, false).expect("default grammar is valid")
    }

    pub fn n_flex(&self) -> usize {
        self.n_flex
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Offset of the state that admits only the embedded V-cycle.
    fn std_offset(&self) -> usize {
        self.n_flex - 1
    }

    fn state_productions(&self, offset: usize) -> Vec<StateProduction> {
        use StateProduction::*;
        if offset == self.std_offset() {
            vec![RestrictAndSolve]
        } else if offset == 0 {
            vec![L1Relax, HybridRelax, JacobiRelax, CoarseGridCorrection, InitialGuess]
        } else {
            vec![L1Relax, HybridRelax, JacobiRelax, CoarseGridCorrection, Restrict]
        }
    }

    /// Minimal state-chain nodes needed to complete a subtree at `offset`
    /// (restrict straight down, then the initial guess).
    fn min_chain(&self, offset: usize) -> usize {
        offset + 1
    }

    fn terminal_count(&self, symbol: Symbol) -> usize {
        match symbol {
            Symbol::SmootherL1 => L1_KINDS.len(),
            Symbol::SmootherHybrid => HYBRID_KINDS.len(),
            Symbol::Order => ORDERINGS.len(),
            Symbol::WeightInner | Symbol::WeightOuter | Symbol::WeightJacobi | Symbol::Alpha => {
                self.weights.len()
            }
            Symbol::State(_) => unreachable!("state symbols are not terminals"),
        }
    }

    fn random_terminal<R: Rng>(&self, symbol: Symbol, rng: &mut R) -> Node {
        Node {
            symbol,
            production: rng.gen_range(0..self.terminal_count(symbol)),
            children: Vec::new(),
        }
    }

    /// Grow-method derivation: uniform choice among productions completable
    /// within the remaining chain budget; once the budget is tight only the
    /// minimal completion (restrict chain into the initial guess) survives.
    pub fn random_derivation<R: Rng>(&self, max_chain: usize, rng: &mut R) -> DerivationTree {
        let budget = max_chain.clamp(1, CHAIN_CAP);
        DerivationTree {
            root: self.random_state(0, budget, rng),
        }
    }

    fn random_state<R: Rng>(&self, offset: usize, budget: usize, rng: &mut R) -> Node {
        use StateProduction::*;
        let budget = budget.max(self.min_chain(offset));
        let prods = self.state_productions(offset);
        let eligible: Vec<usize> = prods
            .iter()
            .enumerate()
            .filter(|(_, p)| {
                let need = match p {
                    InitialGuess => 1,
                    Restrict | RestrictAndSolve => 1 + self.min_chain(offset - 1),
                    L1Relax | HybridRelax | JacobiRelax => 1 + self.min_chain(offset),
                    CoarseGridCorrection => 1 + self.min_chain(offset + 1),
                };
                need <= budget
            })
            .map(|(i, _)| i)
            .collect();
        let production = eligible[rng.gen_range(0..eligible.len())];
        let children = match prods[production] {
            L1Relax => vec![
                self.random_terminal(Symbol::SmootherL1, rng),
                self.random_terminal(Symbol::Order, rng),
                self.random_state(offset, budget - 1, rng),
            ],
            HybridRelax => vec![
                self.random_terminal(Symbol::SmootherHybrid, rng),
                self.random_terminal(Symbol::WeightInner, rng),
                self.random_terminal(Symbol::WeightOuter, rng),
                self.random_terminal(Symbol::Order, rng),
                self.random_state(offset, budget - 1, rng),
            ],
            JacobiRelax => vec![
                self.random_terminal(Symbol::WeightJacobi, rng),
                self.random_terminal(Symbol::Order, rng),
                self.random_state(offset, budget - 1, rng),
            ],
            CoarseGridCorrection => vec![
                self.random_terminal(Symbol::Alpha, rng),
                self.random_state(offset + 1, budget - 1, rng),
            ],
            Restrict | RestrictAndSolve => vec![self.random_state(offset - 1, budget - 1, rng)],
            InitialGuess => Vec::new(),
        };
        Node {
            symbol: Symbol::State(offset),
            production,
            children,
        }
    }

    fn production_of(&self, node: &Node) -> StateProduction {
        match node.symbol {
            Symbol::State(offset) => self.state_productions(offset)[node.production],
            _ => unreachable!("only state nodes carry state productions"),
        }
    }

    /// Number of state nodes in the subtree.
    pub fn chain_len(&self, node: &Node) -> usize {
        match node.symbol {
            Symbol::State(_) => {
                1 + node
                    .children
                    .iter()
                    .map(|c| self.chain_len(c))
                    .sum::<usize>()
            }
            _ => 0,
        }
    }

    // -----------------------------------------------------------------
    // Decoding
    // -----------------------------------------------------------------

    /// Decodes the genotype at its native depth: finest level `n_flex`,
    /// cutoff level 1. The chain is walked root-first (final state first)
    /// and reversed into execution order.
    pub fn decode_native(&self, tree: &DerivationTree) -> FlexProgram {
        let l_top = self.n_flex;
        let level_of = |offset: usize| l_top - offset;
        let mut ops: Vec<Instr> = Vec::new();
        let mut node = &tree.root;
        loop {
            let offset = match node.symbol {
                Symbol::State(o) => o,
                _ => unreachable!("chain walk visits state nodes only"),
            };
            let prod = self.production_of(node);
            use StateProduction::*;
            match prod {
                L1Relax => {
                    let kind = L1_KINDS[node.children[0].production];
                    let ord = ORDERINGS[node.children[1].production];
                    ops.push(Instr::Relax {
                        level: level_of(offset),
                        spec: SmootherSpec::l1(kind, ord),
                    });
                    node = &node.children[2];
                }
                HybridRelax => {
                    let kind = HYBRID_KINDS[node.children[0].production];
                    let wi = self.weights[node.children[1].production];
                    let wo = self.weights[node.children[2].production];
                    let ord = ORDERINGS[node.children[3].production];
                    ops.push(Instr::Relax {
                        level: level_of(offset),
                        spec: SmootherSpec::hybrid(kind, ord, wi, wo),
                    });
                    node = &node.children[4];
                }
                JacobiRelax => {
                    let w = self.weights[node.children[0].production];
                    let ord = ORDERINGS[node.children[1].production];
                    ops.push(Instr::Relax {
                        level: level_of(offset),
                        spec: SmootherSpec::jacobi(
                            crate::smoother::SmootherVariant::Weighted,
                            ord,
                            w,
                        ),
                    });
                    node = &node.children[2];
                }
                CoarseGridCorrection => {
                    let alpha = self.weights[node.children[0].production];
                    ops.push(Instr::CoarseCorrection {
                        to_level: level_of(offset),
                        alpha,
                    });
                    node = &node.children[1];
                }
                Restrict => {
                    ops.push(Instr::Restrict {
                        from_level: level_of(offset - 1),
                    });
                    node = &node.children[0];
                }
                RestrictAndSolve => {
                    // Emitted solve-first; the reversal at the end leaves the
                    // solve immediately after its restriction.
                    ops.push(Instr::StdVSolve {
                        level: level_of(offset),
                    });
                    ops.push(Instr::Restrict {
                        from_level: level_of(offset - 1),
                    });
                    node = &node.children[0];
                }
                InitialGuess => break,
            }
        }
        ops.reverse();
        FlexProgram::new(ops, l_top, 1)
    }

    /// Decodes and retargets onto the hierarchy's actual depth.
    pub fn genotype_to_program(&self, tree: &DerivationTree, h: &Hierarchy) -> FlexProgram {
        self.decode_native(tree).retarget(h.top_level())
    }

    // -----------------------------------------------------------------
    // Variation
    // -----------------------------------------------------------------

    /// Grammar-constrained subtree crossover: a uniformly random node of
    /// `a`, swapped with a uniformly random node of `b` carrying the same
    /// symbol (states match only at the same level offset). Without a match
    /// the parents pass through unchanged. Oversized children are truncated
    /// at the deepest finest-level state that fits, which becomes an
    /// initial-guess leaf.
    pub fn crossover<R: Rng>(
        &self,
        a: &DerivationTree,
        b: &DerivationTree,
        rng: &mut R,
    ) -> (DerivationTree, DerivationTree) {
        if a == b {
            // Any swap between equal trees at one position is the identity.
            return (a.clone(), b.clone());
        }
        let nodes_a = collect_paths(&a.root);
        let (sym, path_a) = {
            let pick = &nodes_a[rng.gen_range(0..nodes_a.len())];
            (pick.0, pick.1.clone())
        };
        let nodes_b = collect_paths(&b.root);
        let matches: Vec<&(Symbol, Vec<usize>)> =
            nodes_b.iter().filter(|(s, _)| *s == sym).collect();
        if matches.is_empty() {
            return (a.clone(), b.clone());
        }
        let path_b = matches[rng.gen_range(0..matches.len())].1.clone();
        let sub_a = node_at(&a.root, &path_a).clone();
        let sub_b = node_at(&b.root, &path_b).clone();
        let mut child_a = a.clone();
        *node_at_mut(&mut child_a.root, &path_a) = sub_b;
        let mut child_b = b.clone();
        *node_at_mut(&mut child_b.root, &path_b) = sub_a;
        self.truncate(&mut child_a);
        self.truncate(&mut child_b);
        (child_a, child_b)
    }

    /// Replaces a uniformly random node by a fresh derivation of the same
    /// symbol within the remaining chain budget.
    pub fn mutate<R: Rng>(&self, tree: &DerivationTree, rng: &mut R) -> DerivationTree {
        let nodes = collect_paths(&tree.root);
        let (sym, path) = {
            let pick = &nodes[rng.gen_range(0..nodes.len())];
            (pick.0, pick.1.clone())
        };
        let mut out = tree.clone();
        let total = self.chain_len(&out.root);
        let target = node_at_mut(&mut out.root, &path);
        match sym {
            Symbol::State(offset) => {
                let outside = total - self.chain_len(target);
                let budget = CHAIN_CAP.saturating_sub(outside).max(self.min_chain(offset));
                *target = self.random_state(offset, budget, rng);
            }
            _ => {
                *target = self.random_terminal(sym, rng);
            }
        }
        out
    }

    /// Truncates an oversized chain at the deepest finest-level state node
    /// that still fits the budget, turning it into the initial guess.
    fn truncate(&self, tree: &mut DerivationTree) {
        if self.chain_len(&tree.root) <= CHAIN_CAP {
            return;
        }
        // Walk the chain recording the deepest in-budget offset-0 state.
        let mut cut_pos = 1usize; // the root is always an offset-0 state
        {
            let mut node = &tree.root;
            let mut pos = 0usize;
            loop {
                pos += 1;
                if node.symbol == Symbol::State(0) && pos <= CHAIN_CAP {
                    cut_pos = pos;
                }
                match node
                    .children
                    .iter()
                    .find(|c| matches!(c.symbol, Symbol::State(_)))
                {
                    Some(next) => node = next,
                    None => break,
                }
            }
        }
        // Rewalk to the cut node and replace its production with InitialGuess.
        let mut node = &mut tree.root;
        let mut pos = 1usize;
        while pos < cut_pos {
            node = node
                .children
                .iter_mut()
                .find(|c| matches!(c.symbol, Symbol::State(_)))
                .expect("cut position lies on the chain");
            pos += 1;
        }
        debug_assert_eq!(node.symbol, Symbol::State(0));
        let prods = self.state_productions(0);
        node.production = prods
            .iter()
            .position(|p| *p == StateProduction::InitialGuess)
            .expect("finest state always has the initial-guess production");
        node.children.clear();
    }
}

fn collect_paths(root: &Node) -> Vec<(Symbol, Vec<usize>)> {
    let mut out = Vec::new();
    let mut stack = vec![(root, Vec::new())];
    while let Some((node, path)) = stack.pop() {
        out.push((node.symbol, path.clone()));
        for (i, child) in node.children.iter().enumerate() {
            let mut p = path.clone();
            p.push(i);
            stack.push((child, p));
        }
    }
    // Deterministic order regardless of traversal details.
    out.sort_by(|a, b| a.1.cmp(&b.1));
    out
}

fn node_at<'a>(root: &'a Node, path: &[usize]) -> &'a Node {
    path.iter().fold(root, |n, &i| &n.children[i])
}

fn node_at_mut<'a>(root: &'a mut Node, path: &[usize]) -> &'a mut Node {
    path.iter().fold(root, |n, &i| &mut n.children[i])
}

/// Stable content hash of a genotype (hex, 16 chars).
pub fn genotype_hash(tree: &DerivationTree) -> String {
    let bytes = serde_json::to_vec(tree).expect("trees serialize");
    let digest = Sha256::digest(&bytes);
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Search-space size: distinct smoothing sequences per level summed over
/// sweep counts 1..=nu_max, squared for pre/post and raised to the number of
/// levels, alongside the headline simplification m^(2 L nu_max).
pub fn search_space_estimate(levels: u32, m: u32, nu_max: u32) -> (f64, f64) {
    let exact = if m == 1 {
        ((nu_max + 1) as f64).powi(2 * levels as i32)
    } else {
        let per_side: f64 = (1..=nu_max).map(|nu| (m as f64).powi(nu as i32)).sum();
        per_side.powi(2 * levels as i32)
    };
    let simplified = (m as f64).powi((2 * levels * nu_max) as i32);
    (exact, simplified)
}
