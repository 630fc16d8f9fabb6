//! Line-oriented JSON game files.
//!
//! The first non-blank line is a header `{"players":2,"name":...}`; every
//! following line describes one node:
//!
//! ```text
//! {"id":0,"kind":"chance","parent":null,"label_from_parent":null}
//! {"id":1,"kind":"decision","parent":0,"label_from_parent":"J","prob":0.5,"player":1,"infoset":"1:J:"}
//! {"id":2,"kind":"terminal","parent":1,"label_from_parent":"b","payoff":1.0}
//! ```
//!
//! Ids are dense and start at 0 (the root). Children keep ascending id order.

use serde::{Deserialize, Serialize};

use super::{validate_game, Game, GameError, GameNode, NodeKind, Player};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    players: u32,
    name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Kind {
    Chance,
    Decision,
    Terminal,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: usize,
    kind: Kind,
    parent: Option<usize>,
    label_from_parent: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    player: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    infoset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    prob: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    payoff: Option<f64>,
}

pub fn save_game(game: &Game) -> String {
    let mut out = String::with_capacity(game.len() * 64);
    let header = Header {
        players: 2,
        name: game.name.clone(),
    };
    out.push_str(&serde_json::to_string(&header).expect("header serializes"));
    out.push('\n');
    for (id, node) in game.nodes.iter().enumerate() {
        let (kind, player, infoset, payoff) = match &node.kind {
            NodeKind::Chance => (Kind::Chance, None, None, None),
            NodeKind::Decision { player, infoset } => {
                (Kind::Decision, Some(player.number()), Some(infoset.clone()), None)
            }
            NodeKind::Terminal { payoff } => (Kind::Terminal, None, None, Some(*payoff)),
        };
        let record = NodeRecord {
            id,
            kind,
            parent: node.parent,
            label_from_parent: node.label.clone(),
            player,
            infoset,
            prob: node.prob,
            payoff,
        };
        out.push_str(&serde_json::to_string(&record).expect("node serializes"));
        out.push('\n');
    }
    out
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> GameError {
    GameError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn from_json<'a, T: Deserialize<'a>>(text: &'a str, line: usize) -> Result<T, GameError> {
    serde_json::from_str(text).map_err(|e| parse_err(line, e.column(), e.to_string()))
}

/// Parses and validates a game file.
pub fn load_game(text: &str) -> Result<Game, GameError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty());

    let (header_line, header_text) = lines
        .next()
        .ok_or_else(|| parse_err(1, 1, "missing header line"))?;
    let header: Header = from_json(header_text, header_line)?;
    if header.players != 2 {
        return Err(parse_err(
            header_line,
            1,
            format!("only two-player games are supported, got {}", header.players),
        ));
    }

    let mut slots: Vec<Option<(usize, NodeRecord)>> = Vec::new();
    for (line, l) in lines {
        let rec: NodeRecord = from_json(l, line)?;
        if rec.id >= slots.len() {
            slots.resize_with(rec.id + 1, || None);
        }
        if slots[rec.id].is_some() {
            return Err(parse_err(line, 1, format!("duplicate node id {}", rec.id)));
        }
        let id = rec.id;
        slots[id] = Some((line, rec));
    }
    if slots.is_empty() {
        return Err(parse_err(header_line, 1, "game has no nodes"));
    }

    let n = slots.len();
    let mut nodes = Vec::with_capacity(n);
    for (id, slot) in slots.iter().enumerate() {
        let Some((line, rec)) = slot else {
            return Err(parse_err(header_line, 1, format!("node id {id} is missing; ids must be dense")));
        };
        let line = *line;
        let kind = match rec.kind {
            Kind::Chance => {
                if rec.player.is_some() || rec.infoset.is_some() || rec.payoff.is_some() {
                    return Err(parse_err(line, 1, "chance nodes take no player, infoset or payoff"));
                }
                NodeKind::Chance
            }
            Kind::Decision => {
                if rec.payoff.is_some() {
                    return Err(parse_err(line, 1, "decision nodes take no payoff"));
                }
                let number = rec
                    .player
                    .ok_or_else(|| parse_err(line, 1, "decision node needs a player"))?;
                let player = Player::from_number(number)
                    .ok_or_else(|| parse_err(line, 1, format!("player must be 1 or 2, got {number}")))?;
                let infoset = rec
                    .infoset
                    .clone()
                    .ok_or_else(|| parse_err(line, 1, "decision node needs an infoset"))?;
                NodeKind::Decision { player, infoset }
            }
            Kind::Terminal => {
                if rec.player.is_some() || rec.infoset.is_some() {
                    return Err(parse_err(line, 1, "terminal nodes take no player or infoset"));
                }
                let payoff = rec
                    .payoff
                    .ok_or_else(|| parse_err(line, 1, "terminal node needs a payoff"))?;
                NodeKind::Terminal { payoff }
            }
        };
        if let Some(p) = rec.parent {
            if p >= n {
                return Err(parse_err(line, 1, format!("parent {p} does not exist")));
            }
            if p == id {
                return Err(parse_err(line, 1, "node is its own parent"));
            }
        }
        nodes.push(GameNode {
            kind,
            parent: rec.parent,
            label: rec.label_from_parent.clone(),
            prob: rec.prob,
            children: Vec::new(),
        });
    }
    for id in 0..n {
        if let Some(p) = nodes[id].parent {
            nodes[p].children.push(id);
        }
    }

    let game = Game {
        name: header.name,
        nodes,
    };
    validate_game(&game)?;
    Ok(game)
}
