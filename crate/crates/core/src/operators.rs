//! Iteration-invariant operators of the linear-algebra CFR formulation.
//!
//! * `A` (|P|×|Σ|): `A[p, σ] = 1` iff `p = ρ(σ)`; converts between
//!   per-sequence and per-node vectors.
//! * `B` (|P|×|Σ⁺|): `A` without the empty-sequence column.
//! * `C` (|J|×|Σ⁺|): `C[j, (j', a)] = 1` iff `j = j'`; sums action blocks.
//! * One [`LevelMatrix`] per depth holding the weighted tree edges.
//! * The payoff matrix `U` (|Σ₁|×|Σ₂|), built once per game.

use std::ops::Range;

use crate::game::{Game, NodeKind, Player};
use crate::sparse::{Backend, SparseError, SparseMatrix, SparseOperator};
use crate::tfsdp::{Tfsdp, TfsdpNode, WeightSource};

/// Weighted edges between depth `d - 1` and depth `d`.
///
/// Both orientations are stored over the local node ranges: `down` is
/// `(L^(d))ᵀ` restricted to children × parents, `up` is `L^(d)` restricted
/// to parents × children. The sparsity pattern never changes; values are
/// gathered from the behavioral strategy on every refresh.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMatrix {
    pub depth: usize,
    pub parents: Range<usize>,
    pub children: Range<usize>,
    pub down: SparseMatrix,
    pub up: SparseMatrix,
    /// Index into the extended weight vector `[b, 1.0]` for each stored
    /// value; `|Σ⁺|` selects the constant 1 of signal edges.
    down_gather: Vec<usize>,
    up_gather: Vec<usize>,
    constant_slot: usize,
}

impl LevelMatrix {
    fn build(tfsdp: &Tfsdp, depth: usize) -> Self {
        let one = tfsdp.num_seqs() - 1;
        let parents = tfsdp.level(depth - 1);
        let children = tfsdp.level(depth);
        let slot = |parent: usize, child: usize| match tfsdp.kind(parent) {
            TfsdpNode::Decision(_) => tfsdp.node_seq(child).expect("action child is a sequence image") - 1,
            _ => one,
        };

        let mut up_offsets = Vec::with_capacity(parents.len() + 1);
        up_offsets.push(0);
        let mut up_cols = Vec::with_capacity(children.len());
        let mut up_gather = Vec::with_capacity(children.len());
        for p in parents.clone() {
            for c in tfsdp.children(p) {
                up_cols.push(c - children.start);
                up_gather.push(slot(p, c));
            }
            up_offsets.push(up_cols.len());
        }

        let down_offsets: Vec<usize> = (0..=children.len()).collect();
        let mut down_cols = Vec::with_capacity(children.len());
        let mut down_gather = Vec::with_capacity(children.len());
        for c in children.clone() {
            let p = tfsdp.parent(c).expect("non-root node has a parent");
            down_cols.push(p - parents.start);
            down_gather.push(slot(p, c));
        }

        let nnz = children.len();
        let up = SparseMatrix::try_new(parents.len(), nnz, up_offsets, up_cols, vec![0.0; nnz])
            .expect("level pattern is valid CSR");
        let down = SparseMatrix::try_new(nnz, parents.len(), down_offsets, down_cols, vec![0.0; nnz])
            .expect("level pattern is valid CSR");
        Self {
            depth,
            parents,
            children,
            down,
            up,
            down_gather,
            up_gather,
            constant_slot: one,
        }
    }

    /// Where the `k`-th stored value of `up` comes from.
    pub fn weight_source(&self, k: usize) -> WeightSource {
        match self.up_gather[k] {
            i if i == self.constant_slot => WeightSource::Constant1,
            i => WeightSource::Action(i),
        }
    }

    /// Writes `b[(j,a)]` into action slots and 1 into signal slots.
    /// `weights` is `b` followed by a trailing 1.0.
    pub fn refresh(&mut self, weights: &[f64], backend: &Backend) -> Result<(), SparseError> {
        backend.gather(weights, &self.up_gather, self.up.values_mut())?;
        backend.gather(weights, &self.down_gather, self.down.values_mut())
    }

    pub fn nnz(&self) -> usize {
        self.up.nnz()
    }

    pub fn heap_bytes(&self) -> usize {
        self.up.heap_bytes()
            + self.down.heap_bytes()
            + (self.up_gather.capacity() + self.down_gather.capacity()) * std::mem::size_of::<usize>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorSet {
    pub a: SparseOperator,
    pub b: SparseOperator,
    pub c: SparseOperator,
    pub levels: Vec<LevelMatrix>,
    pub root: usize,
    /// Uniform behavioral strategy, used where a decision point has no
    /// positive regret.
    pub uniform: Vec<f64>,
    /// `[b, 1.0]`, the source the level values are gathered from.
    weights: Vec<f64>,
}

impl OperatorSet {
    pub fn build(tfsdp: &Tfsdp) -> Self {
        let n_nodes = tfsdp.num_nodes();
        let n_seqs = tfsdp.num_seqs();
        let n_plus = n_seqs - 1;

        // A has one entry per sequence, in the row of its image node.
        let mut a_offsets = Vec::with_capacity(n_nodes + 1);
        let mut a_cols = Vec::with_capacity(n_seqs);
        a_offsets.push(0);
        for p in 0..n_nodes {
            if let Some(s) = tfsdp.node_seq(p) {
                a_cols.push(s);
            }
            a_offsets.push(a_cols.len());
        }
        let b_offsets: Vec<usize> = {
            let mut off = Vec::with_capacity(n_nodes + 1);
            off.push(0);
            for p in 0..n_nodes {
                let has = tfsdp.node_seq(p).is_some_and(|s| s > 0);
                off.push(off[p] + has as usize);
            }
            off
        };
        let b_cols: Vec<usize> = a_cols.iter().filter(|&&s| s > 0).map(|s| s - 1).collect();
        let a = SparseMatrix::try_new(n_nodes, n_seqs, a_offsets, a_cols, vec![1.0; n_seqs])
            .expect("A is valid CSR");
        let b = SparseMatrix::try_new(n_nodes, n_plus, b_offsets, b_cols, vec![1.0; n_plus])
            .expect("B is valid CSR");

        let mut c_offsets = Vec::with_capacity(tfsdp.num_decisions() + 1);
        c_offsets.push(0);
        let mut c_cols = Vec::with_capacity(n_plus);
        let mut uniform = vec![0.0; n_plus];
        for d in tfsdp.decisions() {
            let p = 1.0 / d.num_actions() as f64;
            for s in d.seqs() {
                c_cols.push(s - 1);
                uniform[s - 1] = p;
            }
            c_offsets.push(c_cols.len());
        }
        let c = SparseMatrix::try_new(tfsdp.num_decisions(), n_plus, c_offsets, c_cols, vec![1.0; n_plus])
            .expect("C is valid CSR");

        let levels = (1..=tfsdp.height()).map(|d| LevelMatrix::build(tfsdp, d)).collect();

        Self {
            a: SparseOperator::new(a),
            b: SparseOperator::new(b),
            c: SparseOperator::new(c),
            levels,
            root: tfsdp.root(),
            weights: uniform.iter().copied().chain([1.0]).collect(),
            uniform,
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.a.matrix.rows()
    }

    pub fn num_seqs(&self) -> usize {
        self.a.matrix.cols()
    }

    pub fn num_decisions(&self) -> usize {
        self.c.matrix.rows()
    }

    /// Rewrites every level's values from the behavioral strategy `b`.
    pub fn refresh_levels(&mut self, b: &[f64], backend: &Backend) -> Result<(), SparseError> {
        let n = self.uniform.len();
        if b.len() != n {
            return Err(SparseError::DimensionMismatch { expected: n, got: b.len() });
        }
        backend.map(b, &mut self.weights[..n], |v| v)?;
        for level in &mut self.levels {
            level.refresh(&self.weights, backend)?;
        }
        Ok(())
    }

    pub fn heap_bytes(&self) -> usize {
        self.a.heap_bytes()
            + self.b.heap_bytes()
            + self.c.heap_bytes()
            + self.levels.iter().map(LevelMatrix::heap_bytes).sum::<usize>()
            + self.levels.capacity() * std::mem::size_of::<LevelMatrix>()
            + (self.uniform.capacity() + self.weights.capacity()) * std::mem::size_of::<f64>()
    }
}

pub fn build_operators(tfsdp: &Tfsdp) -> OperatorSet {
    OperatorSet::build(tfsdp)
}

/// Sequence-form payoff matrix for player 1.
///
/// `U[σ₁, σ₂]` sums `chance reach × payoff` over the terminals whose last
/// own sequences are `σ₁` and `σ₂`, so `x₁ᵀ U x₂` is player 1's expected
/// value.
pub fn build_payoff_matrix(game: &Game, tfsdp1: &Tfsdp, tfsdp2: &Tfsdp) -> Result<SparseMatrix, SparseError> {
    let mut triplets = Vec::new();
    let seq_of = |t: &Tfsdp, infoset: &str, action: usize| {
        let j = t.decision_of(infoset).expect("infoset belongs to the decision process");
        t.decision(j).first_seq + action
    };
    let mut stack = vec![(Game::ROOT, 1.0f64, 0usize, 0usize)];
    while let Some((id, reach, s1, s2)) = stack.pop() {
        let node = game.node(id);
        match &node.kind {
            NodeKind::Terminal { payoff } => triplets.push((s1, s2, reach * payoff)),
            NodeKind::Chance => {
                for &c in node.children.iter().rev() {
                    let p = game.node(c).prob.unwrap_or(0.0);
                    stack.push((c, reach * p, s1, s2));
                }
            }
            NodeKind::Decision { player, infoset } => {
                for (a, &c) in node.children.iter().enumerate().rev() {
                    match player {
                        Player::One => stack.push((c, reach, seq_of(tfsdp1, infoset, a), s2)),
                        Player::Two => stack.push((c, reach, s1, seq_of(tfsdp2, infoset, a))),
                    }
                }
            }
        }
    }
    SparseMatrix::from_triplets(tfsdp1.num_seqs(), tfsdp2.num_seqs(), triplets)
}

/// Everything a two-player solve needs that does not change per iteration.
#[derive(Debug, Clone)]
pub struct GameBundle {
    pub tfsdps: [Tfsdp; 2],
    pub payoff: SparseOperator,
}

#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    #[error(transparent)]
    Tfsdp(#[from] crate::tfsdp::TfsdpError),
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

impl GameBundle {
    pub fn new(game: &Game) -> Result<Self, BundleError> {
        let t1 = Tfsdp::build(game, Player::One)?;
        let t2 = Tfsdp::build(game, Player::Two)?;
        let u = build_payoff_matrix(game, &t1, &t2)?;
        Ok(Self {
            tfsdps: [t1, t2],
            payoff: SparseOperator::new(u),
        })
    }

    pub fn tfsdp(&self, player: Player) -> &Tfsdp {
        &self.tfsdps[player.index()]
    }

    /// Total decision-process nodes over both players.
    pub fn num_nodes(&self) -> usize {
        self.tfsdps.iter().map(Tfsdp::num_nodes).sum()
    }

    pub fn heap_bytes(&self) -> usize {
        self.tfsdps.iter().map(Tfsdp::heap_bytes).sum::<usize>() + self.payoff.heap_bytes()
    }
}
