use std::collections::HashMap;

use super::{Game, NodeId, NodeKind, Player};

/// The first invariant a game violates, with the offending node.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Violation {
    #[error("game has no nodes")]
    Empty,
    #[error("not a tree (node {node})")]
    NotATree { node: NodeId },
    #[error("terminal node {node} has children")]
    TerminalWithChildren { node: NodeId },
    #[error("node {node} has no children")]
    NoChildren { node: NodeId },
    #[error("node {node} has a probability in [0,1] missing or out of range")]
    BadProbability { node: NodeId },
    #[error("node {node} carries a probability but its parent is not a chance node")]
    UnexpectedProbability { node: NodeId },
    #[error("chance probabilities at node {node} sum to {sum}, not 1")]
    ChanceSum { node: NodeId, sum: f64 },
    #[error("non-finite payoff at node {node}")]
    BadPayoff { node: NodeId },
    #[error("information set {infoset:?} spans both players (node {node})")]
    InfosetSpansPlayers { node: NodeId, infoset: String },
    #[error("information set {infoset:?} has inconsistent actions (node {node})")]
    InfosetActionsDiffer { node: NodeId, infoset: String },
    #[error("perfect recall violated in information set {infoset:?} (node {node})")]
    PerfectRecall { node: NodeId, infoset: String },
}

impl Violation {
    pub fn node(&self) -> Option<NodeId> {
        match self {
            Violation::Empty => None,
            Violation::NotATree { node }
            | Violation::TerminalWithChildren { node }
            | Violation::NoChildren { node }
            | Violation::BadProbability { node }
            | Violation::UnexpectedProbability { node }
            | Violation::ChanceSum { node, .. }
            | Violation::BadPayoff { node }
            | Violation::InfosetSpansPlayers { node, .. }
            | Violation::InfosetActionsDiffer { node, .. }
            | Violation::PerfectRecall { node, .. } => Some(*node),
        }
    }
}

pub const PROB_SUM_TOLERANCE: f64 = 1e-12;

/// Checks every structural invariant of `game` and reports the first one
/// that fails.
pub fn validate_game(game: &Game) -> Result<(), Violation> {
    check_tree(game)?;
    check_nodes(game)?;
    check_infosets(game)
}

fn check_tree(game: &Game) -> Result<(), Violation> {
    if game.nodes.is_empty() {
        return Err(Violation::Empty);
    }
    if game.nodes[Game::ROOT].parent.is_some() {
        return Err(Violation::NotATree { node: Game::ROOT });
    }
    let n = game.nodes.len();
    let mut seen = vec![false; n];
    seen[Game::ROOT] = true;
    let mut stack = vec![Game::ROOT];
    let mut visited = 1usize;
    while let Some(id) = stack.pop() {
        for &c in &game.nodes[id].children {
            if c >= n || seen[c] || game.nodes[c].parent != Some(id) {
                return Err(Violation::NotATree { node: c.min(n - 1) });
            }
            seen[c] = true;
            visited += 1;
            stack.push(c);
        }
    }
    if visited != n {
        let node = seen.iter().position(|s| !s).unwrap_or(0);
        return Err(Violation::NotATree { node });
    }
    Ok(())
}

fn check_nodes(game: &Game) -> Result<(), Violation> {
    for (id, node) in game.nodes.iter().enumerate() {
        let parent_is_chance = node
            .parent
            .is_some_and(|p| matches!(game.nodes[p].kind, NodeKind::Chance));
        match (parent_is_chance, node.prob) {
            (true, Some(p)) if (0.0..=1.0).contains(&p) => {}
            (true, _) => return Err(Violation::BadProbability { node: id }),
            (false, Some(_)) => return Err(Violation::UnexpectedProbability { node: id }),
            (false, None) => {}
        }
        match &node.kind {
            NodeKind::Terminal { payoff } => {
                if !node.children.is_empty() {
                    return Err(Violation::TerminalWithChildren { node: id });
                }
                if !payoff.is_finite() {
                    return Err(Violation::BadPayoff { node: id });
                }
            }
            NodeKind::Decision { .. } => {
                if node.children.is_empty() {
                    return Err(Violation::NoChildren { node: id });
                }
            }
            NodeKind::Chance => {
                if node.children.is_empty() {
                    return Err(Violation::NoChildren { node: id });
                }
                let sum: f64 = node
                    .children
                    .iter()
                    .map(|&c| game.nodes[c].prob.unwrap_or(0.0))
                    .sum();
                if (sum - 1.0).abs() > PROB_SUM_TOLERANCE {
                    return Err(Violation::ChanceSum { node: id, sum });
                }
            }
        }
    }
    Ok(())
}

struct InfosetInfo {
    player: Player,
    first_node: NodeId,
    /// Own (infoset, action) history of the acting player.
    history: Vec<(usize, usize)>,
}

fn check_infosets(game: &Game) -> Result<(), Violation> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut infos: Vec<InfosetInfo> = Vec::new();
    let mut histories: [Vec<(usize, usize)>; 2] = [Vec::new(), Vec::new()];

    // (node, own-history lengths on entry, pending append for the player who
    // acted on the edge into this node)
    let mut stack: Vec<(NodeId, [usize; 2], Option<(Player, usize, usize)>)> =
        vec![(Game::ROOT, [0, 0], None)];
    while let Some((id, lens, pending)) = stack.pop() {
        histories[0].truncate(lens[0]);
        histories[1].truncate(lens[1]);
        if let Some((p, infoset, action)) = pending {
            histories[p.index()].push((infoset, action));
        }
        let node = &game.nodes[id];
        if let NodeKind::Decision { player, infoset } = &node.kind {
            let next = infos.len();
            let idx = *ids.entry(infoset.as_str()).or_insert(next);
            let own = &histories[player.index()];
            if idx == next {
                infos.push(InfosetInfo {
                    player: *player,
                    first_node: id,
                    history: own.clone(),
                });
            } else {
                let info = &infos[idx];
                if info.player != *player {
                    return Err(Violation::InfosetSpansPlayers {
                        node: id,
                        infoset: infoset.clone(),
                    });
                }
                let reference = &game.nodes[info.first_node];
                let same_actions = reference.children.len() == node.children.len()
                    && (0..node.children.len())
                        .all(|i| game.child_label(info.first_node, i) == game.child_label(id, i));
                if !same_actions {
                    return Err(Violation::InfosetActionsDiffer {
                        node: id,
                        infoset: infoset.clone(),
                    });
                }
                if info.history != *own {
                    return Err(Violation::PerfectRecall {
                        node: id,
                        infoset: infoset.clone(),
                    });
                }
            }
            let entry_lens = [histories[0].len(), histories[1].len()];
            for (a, &c) in node.children.iter().enumerate().rev() {
                stack.push((c, entry_lens, Some((*player, idx, a))));
            }
        } else {
            let entry_lens = [histories[0].len(), histories[1].len()];
            for &c in node.children.iter().rev() {
                stack.push((c, entry_lens, None));
            }
        }
    }
    Ok(())
}
