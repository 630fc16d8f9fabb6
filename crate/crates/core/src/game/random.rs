//! Synthetic game generator for scaling experiments.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{decision, terminal, Game, GameBuilder, GameError, NodeId, NodeKind, Player};

/// Default node budget for [`random_game`].
pub const DEFAULT_MAX_NODES: u128 = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomGameParams {
    /// Number of layers below the root, counting the root's layer.
    pub depth: u32,
    pub branching: u32,
    /// Probability that a decision node joins the most recent information
    /// set among the nodes it could legally share one with.
    pub infoset_merge_rate: f64,
    pub seed: u64,
}

impl RandomGameParams {
    /// Exact node count of the generated tree.
    pub fn node_count(&self) -> u128 {
        let b = self.branching as u128;
        let mut total: u128 = 0;
        let mut layer: u128 = 1;
        for _ in 0..=self.depth {
            total = total.saturating_add(layer);
            layer = layer.saturating_mul(b);
        }
        total
    }
}

/// A game with alternating decision and chance layers.
///
/// Layer 0 is a player-1 decision, odd layers are uniform chance nodes, and
/// even layers alternate between the players. Leaves at layer `depth` carry
/// payoffs uniform in `[-1, 1]`. Decision nodes of one player that share the
/// same layer and the same own parent sequence may be merged into a common
/// information set, which keeps perfect recall by construction.
pub fn random_game(depth: u32, branching: u32, infoset_merge_rate: f64, seed: u64) -> Result<Game, GameError> {
    random_game_with_budget(
        RandomGameParams {
            depth,
            branching,
            infoset_merge_rate,
            seed,
        },
        DEFAULT_MAX_NODES,
    )
}

pub fn random_game_with_budget(params: RandomGameParams, max_nodes: u128) -> Result<Game, GameError> {
    if params.depth < 1 || params.branching < 1 {
        return Err(GameError::BadParams(
            "depth and branching must both be at least 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&params.infoset_merge_rate) {
        return Err(GameError::BadParams(
            "infoset merge rate must lie in [0, 1]".into(),
        ));
    }
    let nodes = params.node_count();
    if nodes > max_nodes {
        return Err(GameError::TooLarge {
            nodes,
            budget: max_nodes,
        });
    }

    let mut gen = Generator {
        params,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        builder: GameBuilder::with_capacity(
            format!(
                "random_d{}_b{}_m{}_s{}",
                params.depth, params.branching, params.infoset_merge_rate, params.seed
            ),
            nodes as usize,
        ),
        groups: HashMap::new(),
        next_infoset: [0, 0],
        labels: (0..params.branching).map(|i| format!("a{i}")).collect(),
    };
    let (root_kind, root_infoset) = gen.decision_kind(0, Player::One, None);
    let root = gen.builder.root(root_kind);
    gen.expand(root, 0, Some((Player::One, root_infoset)), [None, None]);
    Ok(gen.builder.finish())
}

/// Own parent sequence of a player: (infoset label id, action).
type OwnSeq = Option<(u64, u32)>;

struct Generator {
    params: RandomGameParams,
    rng: ChaCha8Rng,
    builder: GameBuilder,
    /// (player, layer, parent sequence) -> most recent infoset id in that group
    groups: HashMap<(Player, u32, OwnSeq), u64>,
    next_infoset: [u64; 2],
    labels: Vec<String>,
}

impl Generator {
    fn player_at(layer: u32) -> Option<Player> {
        match layer % 4 {
            0 => Some(Player::One),
            2 => Some(Player::Two),
            _ => None,
        }
    }

    /// Picks the infoset for a new decision node; returns its kind and id.
    fn decision_kind(&mut self, layer: u32, player: Player, parent: OwnSeq) -> (NodeKind, u64) {
        let key = (player, layer, parent);
        let merge = self.rng.gen_bool(self.params.infoset_merge_rate);
        let id = match self.groups.get(&key) {
            Some(&existing) if merge => existing,
            _ => {
                let id = self.next_infoset[player.index()];
                self.next_infoset[player.index()] += 1;
                self.groups.insert(key, id);
                id
            }
        };
        (decision(player, format!("p{}:{}", player.number(), id)), id)
    }

    /// `acting` is the player and infoset id when `node` is a decision node.
    fn expand(&mut self, node: NodeId, layer: u32, acting: Option<(Player, u64)>, own: [OwnSeq; 2]) {
        let child_layer = layer + 1;
        let branching = self.params.branching;
        for i in 0..branching {
            let mut child_own = own;
            let (label, prob) = match acting {
                Some((p, infoset)) => {
                    child_own[p.index()] = Some((infoset, i));
                    (self.labels[i as usize].clone(), None)
                }
                None => (format!("c{i}"), Some(1.0 / branching as f64)),
            };
            let (kind, child_acting) = if child_layer == self.params.depth {
                (terminal(self.rng.gen_range(-1.0..=1.0)), None)
            } else if let Some(p) = Self::player_at(child_layer) {
                let (kind, id) = self.decision_kind(child_layer, p, child_own[p.index()]);
                (kind, Some((p, id)))
            } else {
                (NodeKind::Chance, None)
            };
            let is_leaf = child_layer == self.params.depth;
            let child = self.builder.child(node, label, prob, kind);
            if !is_leaf {
                self.expand(child, child_layer, child_acting, child_own);
            }
        }
    }
}
