//! Explicit two-player zero-sum extensive-form games.
//!
//! A [`Game`] is a flat arena of [`GameNode`]s rooted at id 0. Only the
//! payoff to player 1 is stored at terminals; player 2 receives its
//! negation.

mod builtin;
mod format;
mod random;
mod validate;

use std::fmt;

pub use builtin::{kuhn_poker, leduc_poker, matching_pennies, rock_paper_scissors};
pub use format::{load_game, save_game};
pub use random::{random_game, random_game_with_budget, RandomGameParams, DEFAULT_MAX_NODES};
pub use validate::{validate_game, Violation};

pub type NodeId = usize;

/// One of the two players.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    /// Zero-based index, handy for `[T; 2]` arrays.
    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    /// The number used in files and on the command line (1 or 2).
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Player::One),
            2 => Some(Player::Two),
            _ => None,
        }
    }

    pub fn opponent(self) -> Self {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeKind {
    Chance,
    Decision { player: Player, infoset: String },
    /// Payoff to player 1.
    Terminal { payoff: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameNode {
    pub kind: NodeKind,
    pub parent: Option<NodeId>,
    /// Action or outcome label on the edge from the parent.
    pub label: Option<String>,
    /// Outcome probability when the parent is a chance node.
    pub prob: Option<f64>,
    pub children: Vec<NodeId>,
}

impl GameNode {
    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, NodeKind::Terminal { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    pub name: String,
    pub nodes: Vec<GameNode>,
}

impl Game {
    pub const ROOT: NodeId = 0;

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &GameNode {
        &self.nodes[id]
    }

    pub fn num_terminals(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_terminal()).count()
    }

    /// Label of the edge `parent -> children[i]`.
    pub fn child_label(&self, id: NodeId, i: usize) -> &str {
        self.nodes[self.nodes[id].children[i]]
            .label
            .as_deref()
            .unwrap_or("")
    }

    /// Rough heap footprint of the node arena.
    pub fn heap_bytes(&self) -> usize {
        let mut total = self.nodes.capacity() * std::mem::size_of::<GameNode>();
        for n in &self.nodes {
            total += n.children.capacity() * std::mem::size_of::<NodeId>();
            total += n.label.as_ref().map_or(0, |s| s.capacity());
            if let NodeKind::Decision { infoset, .. } = &n.kind {
                total += infoset.capacity();
            }
        }
        total
    }
}

/// Incremental construction of a [`Game`]. Children must be added in the
/// order they should appear; ids are handed out sequentially.
#[derive(Debug)]
pub struct GameBuilder {
    name: String,
    nodes: Vec<GameNode>,
}

impl GameBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            nodes: Vec::new(),
        }
    }

    pub fn with_capacity(name: impl Into<String>, capacity: usize) -> Self {
        Self {
            name: name.into(),
            nodes: Vec::with_capacity(capacity),
        }
    }

    /// Creates the root. Must be called exactly once, before any `child`.
    pub fn root(&mut self, kind: NodeKind) -> NodeId {
        assert!(self.nodes.is_empty(), "root already created");
        self.nodes.push(GameNode {
            kind,
            parent: None,
            label: None,
            prob: None,
            children: Vec::new(),
        });
        Game::ROOT
    }

    pub fn child(
        &mut self,
        parent: NodeId,
        label: impl Into<String>,
        prob: Option<f64>,
        kind: NodeKind,
    ) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(GameNode {
            kind,
            parent: Some(parent),
            label: Some(label.into()),
            prob,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn finish(self) -> Game {
        Game {
            name: self.name,
            nodes: self.nodes,
        }
    }
}

pub fn decision(player: Player, infoset: impl Into<String>) -> NodeKind {
    NodeKind::Decision {
        player,
        infoset: infoset.into(),
    }
}

pub fn terminal(payoff: f64) -> NodeKind {
    NodeKind::Terminal { payoff }
}

/// Errors from loading or generating games.
#[derive(Debug, thiserror::Error)]
pub enum GameError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid game: {0}")]
    Invalid(#[from] Violation),
    #[error("game would have {nodes} nodes, exceeding the budget of {budget}")]
    TooLarge { nodes: u128, budget: u128 },
    #[error("invalid generator parameters: {0}")]
    BadParams(String),
}
