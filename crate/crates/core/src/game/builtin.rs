//! Built-in benchmark games.

use super::{decision, terminal, Game, GameBuilder, NodeId, NodeKind, Player};

const KUHN_CARDS: [&str; 3] = ["J", "Q", "K"];

/// Three-card Kuhn poker with antes of 1 and a single bet size of 1.
///
/// Cards are dealt by two chance nodes (player 1's card, then player 2's),
/// giving 58 tree nodes and 30 terminals.
pub fn kuhn_poker() -> Game {
    let mut b = GameBuilder::with_capacity("kuhn_poker", 58);
    let root = b.root(NodeKind::Chance);
    for (c1, name1) in KUHN_CARDS.iter().enumerate() {
        let deal2 = b.child(root, *name1, Some(1.0 / 3.0), NodeKind::Chance);
        for (c2, name2) in KUHN_CARDS.iter().enumerate() {
            if c1 == c2 {
                continue;
            }
            let first = b.child(deal2, *name2, Some(0.5), decision(Player::One, format!("1:{name1}:")));
            kuhn_betting(&mut b, first, c1, c2, "");
        }
    }
    b.finish()
}

fn kuhn_betting(b: &mut GameBuilder, node: NodeId, c1: usize, c2: usize, history: &str) {
    let showdown = |stake: f64| if c1 > c2 { stake } else { -stake };
    for action in ["p", "b"] {
        let h = format!("{history}{action}");
        let kind = match h.as_str() {
            "p" => decision(Player::Two, format!("2:{}:p", KUHN_CARDS[c2])),
            "b" => decision(Player::Two, format!("2:{}:b", KUHN_CARDS[c2])),
            "pb" => decision(Player::One, format!("1:{}:pb", KUHN_CARDS[c1])),
            "pp" => terminal(showdown(1.0)),
            "bp" => terminal(1.0),
            "bb" | "pbb" => terminal(showdown(2.0)),
            "pbp" => terminal(-1.0),
            _ => unreachable!("kuhn history {h}"),
        };
        let is_decision = matches!(kind, NodeKind::Decision { .. });
        let child = b.child(node, action, None, kind);
        if is_decision {
            kuhn_betting(b, child, c1, c2, &h);
        }
    }
}

const LEDUC_DECK: usize = 6;
const LEDUC_RANKS: [&str; 3] = ["J", "Q", "K"];

fn leduc_card_name(card: usize) -> String {
    let suit = if card % 2 == 0 { 's' } else { 'h' };
    format!("{}{}", LEDUC_RANKS[card / 2], suit)
}

#[derive(Clone)]
struct LeducState {
    cards: [usize; 2],
    public: Option<usize>,
    round: usize,
    /// Chips committed by each player, antes included.
    committed: [f64; 2],
    raises: usize,
    /// Betting in the current round, e.g. "cr".
    round_history: String,
    /// Betting of finished rounds, separated by '/'.
    history: String,
}

impl LeducState {
    fn to_act(&self) -> usize {
        self.round_history.len() % 2
    }

    fn facing_bet(&self) -> bool {
        self.committed[0] != self.committed[1]
    }

    fn infoset(&self, player: usize) -> String {
        let public = self.public.map(leduc_card_name).unwrap_or_default();
        format!(
            "{}:{}:{}:{}{}",
            player + 1,
            leduc_card_name(self.cards[player]),
            public,
            self.history,
            self.round_history
        )
    }

    fn showdown(&self) -> f64 {
        let public = self.public.expect("showdown needs the public card") / 2;
        let r1 = self.cards[0] / 2;
        let r2 = self.cards[1] / 2;
        let score = |r: usize| if r == public { 10 + r } else { r };
        match score(r1).cmp(&score(r2)) {
            std::cmp::Ordering::Greater => self.committed[1],
            std::cmp::Ordering::Less => -self.committed[0],
            std::cmp::Ordering::Equal => 0.0,
        }
    }
}

/// Leduc hold'em: six cards (two suits of J, Q, K), ante 1, two betting
/// rounds with raise sizes 2 and 4 and at most two raises per round.
/// Checking is the only way to decline when no bet is outstanding.
pub fn leduc_poker() -> Game {
    let mut b = GameBuilder::with_capacity("leduc_poker", 9457);
    let root = b.root(NodeKind::Chance);
    for c1 in 0..LEDUC_DECK {
        let deal2 = b.child(
            root,
            leduc_card_name(c1),
            Some(1.0 / LEDUC_DECK as f64),
            NodeKind::Chance,
        );
        for c2 in (0..LEDUC_DECK).filter(|&c| c != c1) {
            let state = LeducState {
                cards: [c1, c2],
                public: None,
                round: 0,
                committed: [1.0, 1.0],
                raises: 0,
                round_history: String::new(),
                history: String::new(),
            };
            let kind = decision(Player::One, state.infoset(0));
            let node = b.child(deal2, leduc_card_name(c2), Some(1.0 / (LEDUC_DECK - 1) as f64), kind);
            leduc_betting(&mut b, node, &state);
        }
    }
    b.finish()
}

fn leduc_betting(b: &mut GameBuilder, node: NodeId, state: &LeducState) {
    let actor = state.to_act();
    let raise_size = if state.round == 0 { 2.0 } else { 4.0 };
    let mut actions = Vec::with_capacity(3);
    if state.facing_bet() {
        actions.push('f');
    }
    actions.push('c');
    if state.raises < 2 {
        actions.push('r');
    }
    for action in actions {
        let mut next = state.clone();
        next.round_history.push(action);
        match action {
            'f' => {
                let payoff = if actor == 0 {
                    -state.committed[0]
                } else {
                    state.committed[1]
                };
                b.child(node, "f", None, terminal(payoff));
            }
            'r' => {
                next.committed[actor] = state.committed[1 - actor] + raise_size;
                next.raises += 1;
                let kind = decision(Player::BOTH[1 - actor], next.infoset(1 - actor));
                let child = b.child(node, "r", None, kind);
                leduc_betting(b, child, &next);
            }
            _ => {
                next.committed[actor] = state.committed[1 - actor];
                // A check by the first actor passes the turn; anything else
                // closes the round.
                let round_over = state.facing_bet() || !state.round_history.is_empty();
                if !round_over {
                    let kind = decision(Player::BOTH[1 - actor], next.infoset(1 - actor));
                    let child = b.child(node, "c", None, kind);
                    leduc_betting(b, child, &next);
                } else if state.round == 1 {
                    b.child(node, "c", None, terminal(next.showdown()));
                } else {
                    let deal = b.child(node, "c", None, NodeKind::Chance);
                    let remaining: Vec<usize> = (0..LEDUC_DECK)
                        .filter(|c| !state.cards.contains(c))
                        .collect();
                    let p = 1.0 / remaining.len() as f64;
                    for public in remaining {
                        let mut round2 = next.clone();
                        round2.public = Some(public);
                        round2.round = 1;
                        round2.raises = 0;
                        round2.history = format!("{}/", next.round_history);
                        round2.round_history.clear();
                        let kind = decision(Player::One, round2.infoset(0));
                        let child = b.child(deal, leduc_card_name(public), Some(p), kind);
                        leduc_betting(b, child, &round2);
                    }
                }
            }
        }
    }
}

/// One-shot matching pennies: player 1 wins 1 on a match, loses 1 otherwise.
pub fn matching_pennies() -> Game {
    simultaneous_matrix_game("matching_pennies", &["H", "T"], &[[1.0, -1.0], [-1.0, 1.0]])
}

/// One-shot rock-paper-scissors with payoffs in {-1, 0, 1}.
pub fn rock_paper_scissors() -> Game {
    simultaneous_matrix_game(
        "rock_paper_scissors",
        &["R", "P", "S"],
        &[[0.0, -1.0, 1.0], [1.0, 0.0, -1.0], [-1.0, 1.0, 0.0]],
    )
}

fn simultaneous_matrix_game<const N: usize>(name: &str, actions: &[&str], payoff: &[[f64; N]]) -> Game {
    let mut b = GameBuilder::new(name);
    let root = b.root(decision(Player::One, "1"));
    for (i, a1) in actions.iter().enumerate() {
        let col = b.child(root, *a1, None, decision(Player::Two, "2"));
        for (j, a2) in actions.iter().enumerate() {
            b.child(col, a2.to_lowercase(), None, terminal(payoff[i][j]));
        }
    }
    b.finish()
}
