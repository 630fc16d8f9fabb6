//! Per-player tree-form sequential decision processes.
//!
//! Extraction rule: every information set of the player becomes a decision
//! point. The node reached by a sequence (the empty sequence included) is
//!
//! * an end node when no further information set of the player follows it,
//! * the decision point itself when exactly one does,
//! * an observation point with one signal per follow-up information set
//!   otherwise.
//!
//! Nodes and sequences are numbered breadth-first, so every depth occupies a
//! contiguous node range and the sequences of a decision point are
//! contiguous. Sequence 0 is the empty sequence and maps to the root.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;
use std::ops::Range;

use crate::game::{Game, NodeId, NodeKind, Player};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfsdpNode {
    /// Decision point, by index into [`Tfsdp::decisions`].
    Decision(usize),
    Observation,
    End,
}

/// Where a level-matrix entry takes its weight from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightSource {
    /// Behavioral probability of this non-empty sequence (index into Σ⁺).
    Action(usize),
    /// Signal edges always carry weight 1.
    Constant1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LevelEdge {
    pub parent: usize,
    pub child: usize,
    pub weight: WeightSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionPoint {
    pub node: usize,
    pub infoset: String,
    pub actions: Vec<String>,
    /// Parent sequence (index into Σ, 0 for the empty sequence).
    pub parent_seq: usize,
    /// Index into Σ of the sequence `(j, actions[0])`.
    pub first_seq: usize,
}

impl DecisionPoint {
    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    /// Σ indices of this decision point's sequences.
    pub fn seqs(&self) -> Range<usize> {
        self.first_seq..self.first_seq + self.actions.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tfsdp {
    player: Player,
    kinds: Vec<TfsdpNode>,
    parents: Vec<Option<usize>>,
    depths: Vec<u32>,
    /// Children of node `p` are the ids `child_offsets[p]..child_offsets[p + 1]`.
    child_offsets: Vec<usize>,
    /// First node id of every depth, plus a trailing `|P|`.
    level_offsets: Vec<usize>,
    /// ρ over Σ.
    seq_node: Vec<usize>,
    /// Decision point owning each sequence (`usize::MAX` for the empty one).
    seq_decision: Vec<usize>,
    node_seq: Vec<Option<usize>>,
    decisions: Vec<DecisionPoint>,
    infoset_index: HashMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TfsdpError {
    #[error("imperfect recall at game node {node}: information set {infoset:?} has conflicting parent sequences")]
    ImperfectRecall { node: NodeId, infoset: String },
    #[error("information set {infoset:?} has inconsistent actions at game node {node}")]
    InconsistentActions { node: NodeId, infoset: String },
}

/// Information set as seen while walking the game tree.
struct RawInfoset {
    label: String,
    actions: Vec<String>,
    parent: Option<(usize, usize)>,
}

enum Pending {
    /// Node reached by a sequence; payload is the follow-up infosets.
    Seq(Vec<usize>),
    /// Decision point reached through an observation signal.
    Signal(usize),
}

struct Builder<'a> {
    t: Tfsdp,
    raw: &'a [RawInfoset],
    raw_of_decision: Vec<usize>,
    /// Observation points awaiting expansion: (node, infosets, parent seq).
    observed: VecDeque<(usize, Vec<usize>, usize)>,
}

impl Builder<'_> {
    /// Appends the node for `what`; `parent_seq` becomes p_j of any decision
    /// point created at or below it.
    fn push_node(&mut self, parent: Option<usize>, depth: u32, what: Pending, parent_seq: usize) -> usize {
        let id = self.t.kinds.len();
        let kind = match what {
            Pending::Signal(i) => self.decision(id, i, parent_seq),
            Pending::Seq(group) => match group.len() {
                0 => TfsdpNode::End,
                1 => self.decision(id, group[0], parent_seq),
                _ => {
                    self.observed.push_back((id, group, parent_seq));
                    TfsdpNode::Observation
                }
            },
        };
        self.t.kinds.push(kind);
        self.t.parents.push(parent);
        self.t.depths.push(depth);
        self.t.node_seq.push(None);
        id
    }

    fn decision(&mut self, node: usize, raw_id: usize, parent_seq: usize) -> TfsdpNode {
        let j = self.t.decisions.len();
        let info = &self.raw[raw_id];
        self.t.decisions.push(DecisionPoint {
            node,
            infoset: info.label.clone(),
            actions: info.actions.clone(),
            parent_seq,
            first_seq: usize::MAX,
        });
        self.t.infoset_index.insert(info.label.clone(), j);
        self.raw_of_decision.push(raw_id);
        TfsdpNode::Decision(j)
    }
}

impl Tfsdp {
    /// Extracts `player`'s decision process from a validated game.
    pub fn build(game: &Game, player: Player) -> Result<Self, TfsdpError> {
        let raw = collect_infosets(game, player)?;

        // Follow-up infosets of every own sequence, in first-seen order.
        let mut root_group = Vec::new();
        let mut groups: Vec<Vec<Vec<usize>>> =
            raw.iter().map(|r| vec![Vec::new(); r.actions.len()]).collect();
        for (i, r) in raw.iter().enumerate() {
            match r.parent {
                None => root_group.push(i),
                Some((pi, a)) => groups[pi][a].push(i),
            }
        }

        let mut b = Builder {
            t: Tfsdp {
                player,
                kinds: Vec::new(),
                parents: Vec::new(),
                depths: Vec::new(),
                child_offsets: Vec::new(),
                level_offsets: Vec::new(),
                seq_node: vec![0],
                seq_decision: vec![usize::MAX],
                node_seq: Vec::new(),
                decisions: Vec::with_capacity(raw.len()),
                infoset_index: HashMap::with_capacity(raw.len()),
            },
            raw: &raw,
            raw_of_decision: Vec::with_capacity(raw.len()),
            observed: VecDeque::new(),
        };
        b.push_node(None, 0, Pending::Seq(root_group), 0);
        b.t.node_seq[0] = Some(0);

        // Breadth-first expansion: nodes are processed in id order, so the
        // children of each node receive consecutive ids.
        let mut p = 0;
        while p < b.t.kinds.len() {
            b.t.child_offsets.push(b.t.kinds.len());
            let depth = b.t.depths[p] + 1;
            match b.t.kinds[p] {
                TfsdpNode::Decision(j) => {
                    let raw_id = b.raw_of_decision[j];
                    b.t.decisions[j].first_seq = b.t.seq_node.len();
                    for a in 0..raw[raw_id].actions.len() {
                        let seq = b.t.seq_node.len();
                        let follow = std::mem::take(&mut groups[raw_id][a]);
                        let child = b.push_node(Some(p), depth, Pending::Seq(follow), seq);
                        b.t.seq_node.push(child);
                        b.t.seq_decision.push(j);
                        b.t.node_seq[child] = Some(seq);
                    }
                }
                TfsdpNode::Observation => {
                    // Observation points are created and expanded in the same order.
                    let (node, infosets, parent_seq) =
                        b.observed.pop_front().expect("observation point has pending signals");
                    debug_assert_eq!(node, p);
                    for i in infosets {
                        b.push_node(Some(p), depth, Pending::Signal(i), parent_seq);
                    }
                }
                TfsdpNode::End => {}
            }
            p += 1;
        }
        let mut t = b.t;
        t.child_offsets.push(t.kinds.len());

        let height = t.depths.last().copied().unwrap_or(0) as usize;
        t.level_offsets = vec![0; height + 2];
        for &d in &t.depths {
            t.level_offsets[d as usize + 1] += 1;
        }
        for d in 1..t.level_offsets.len() {
            t.level_offsets[d] += t.level_offsets[d - 1];
        }
        Ok(t)
    }

    pub fn player(&self) -> Player {
        self.player
    }

    /// |P|
    pub fn num_nodes(&self) -> usize {
        self.kinds.len()
    }

    /// |Σ|, including the empty sequence.
    pub fn num_seqs(&self) -> usize {
        self.seq_node.len()
    }

    /// |J|
    pub fn num_decisions(&self) -> usize {
        self.decisions.len()
    }

    pub fn root(&self) -> usize {
        0
    }

    /// Height k: the largest node depth.
    pub fn height(&self) -> usize {
        self.level_offsets.len() - 2
    }

    /// Degree B: the largest number of children of any node.
    pub fn degree(&self) -> usize {
        self.child_offsets
            .windows(2)
            .map(|w| w[1] - w[0])
            .max()
            .unwrap_or(0)
    }

    pub fn kind(&self, node: usize) -> TfsdpNode {
        self.kinds[node]
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parents[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depths[node] as usize
    }

    pub fn children(&self, node: usize) -> Range<usize> {
        self.child_offsets[node]..self.child_offsets[node + 1]
    }

    /// Node ids at `depth`.
    pub fn level(&self, depth: usize) -> Range<usize> {
        self.level_offsets[depth]..self.level_offsets[depth + 1]
    }

    /// ρ: the node reached by sequence `seq`.
    pub fn seq_node(&self, seq: usize) -> usize {
        self.seq_node[seq]
    }

    /// The sequence whose image under ρ is `node`, if any.
    pub fn node_seq(&self, node: usize) -> Option<usize> {
        self.node_seq[node]
    }

    /// Decision point that owns a non-empty sequence.
    pub fn seq_decision(&self, seq: usize) -> Option<usize> {
        self.seq_decision.get(seq).copied().filter(|&j| j != usize::MAX)
    }

    pub fn decisions(&self) -> &[DecisionPoint] {
        &self.decisions
    }

    pub fn decision(&self, j: usize) -> &DecisionPoint {
        &self.decisions[j]
    }

    /// Decision point of an information set label.
    pub fn decision_of(&self, infoset: &str) -> Option<usize> {
        self.infoset_index.get(infoset).copied()
    }

    /// Human-readable label of a sequence, e.g. `1:J:/b`.
    pub fn seq_label(&self, seq: usize) -> String {
        match self.seq_decision(seq) {
            None => "∅".to_string(),
            Some(j) => {
                let d = &self.decisions[j];
                format!("{}/{}", d.infoset, d.actions[seq - d.first_seq])
            }
        }
    }

    /// Sequence form of a behavioral strategy `b` over Σ⁺.
    pub fn sequence_form(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.num_seqs()];
        x[0] = 1.0;
        for d in &self.decisions {
            let reach = x[d.parent_seq];
            for s in d.seqs() {
                x[s] = reach * b[s - 1];
            }
        }
        x
    }

    /// Behavioral strategy over Σ⁺ of a sequence-form `x`; decision points
    /// reached with zero mass get the uniform strategy.
    pub fn behavioral(&self, x: &[f64]) -> Vec<f64> {
        let mut b = vec![0.0; self.num_seqs() - 1];
        for d in &self.decisions {
            let reach = x[d.parent_seq];
            for s in d.seqs() {
                b[s - 1] = if reach > 0.0 {
                    x[s] / reach
                } else {
                    1.0 / d.num_actions() as f64
                };
            }
        }
        b
    }

    /// Edges grouped by the depth of their child: entry `d - 1` holds the
    /// edges from depth `d - 1` to depth `d`.
    pub fn level_decomposition(&self) -> Vec<Vec<LevelEdge>> {
        (1..=self.height())
            .map(|d| {
                let mut edges = Vec::with_capacity(self.level(d).len());
                for parent in self.level(d - 1) {
                    for child in self.children(parent) {
                        let weight = match self.kinds[parent] {
                            TfsdpNode::Decision(_) => WeightSource::Action(
                                self.node_seq[child].expect("action child is a sequence image") - 1,
                            ),
                            _ => WeightSource::Constant1,
                        };
                        edges.push(LevelEdge { parent, child, weight });
                    }
                }
                edges
            })
            .collect()
    }

    /// One line per node: `id kind depth parent sequence`.
    pub fn debug_dump(&self) -> String {
        let mut out = String::new();
        for p in 0..self.num_nodes() {
            let kind = match self.kinds[p] {
                TfsdpNode::Decision(j) => format!("decision({})", self.decisions[j].infoset),
                TfsdpNode::Observation => "observation".to_string(),
                TfsdpNode::End => "end".to_string(),
            };
            let parent = self.parents[p].map_or("-".to_string(), |q| q.to_string());
            let seq = self.node_seq[p].map_or("-".to_string(), |s| self.seq_label(s));
            let _ = writeln!(out, "{p} {kind} {} {parent} {seq}", self.depths[p]);
        }
        out
    }

    pub fn heap_bytes(&self) -> usize {
        use std::mem::size_of;
        let mut total = self.kinds.capacity() * size_of::<TfsdpNode>()
            + self.parents.capacity() * size_of::<Option<usize>>()
            + self.depths.capacity() * size_of::<u32>()
            + self.child_offsets.capacity() * size_of::<usize>()
            + self.level_offsets.capacity() * size_of::<usize>()
            + self.seq_node.capacity() * size_of::<usize>()
            + self.seq_decision.capacity() * size_of::<usize>()
            + self.node_seq.capacity() * size_of::<Option<usize>>()
            + self.decisions.capacity() * size_of::<DecisionPoint>()
            + self.infoset_index.capacity() * (size_of::<String>() + size_of::<usize>());
        for d in &self.decisions {
            total += 2 * d.infoset.capacity();
            total += d.actions.capacity() * size_of::<String>();
            total += d.actions.iter().map(|a| a.capacity()).sum::<usize>();
        }
        total
    }

    /// Checks the structural invariants; returns a description of the first
    /// failure.
    pub fn check_invariants(&self) -> Result<(), String> {
        let n = self.num_nodes();
        let edges = (0..n).map(|p| self.children(p).len()).sum::<usize>();
        if edges + 1 != n {
            return Err(format!("{edges} edges for {n} nodes"));
        }
        for p in 1..n {
            let Some(q) = self.parents[p] else {
                return Err(format!("node {p} has no parent"));
            };
            if !self.children(q).contains(&p) || self.depths[p] != self.depths[q] + 1 {
                return Err(format!("node {p} is not a child of {q}"));
            }
        }
        let mut image_of = vec![None; n];
        for (s, &p) in self.seq_node.iter().enumerate() {
            if image_of[p].replace(s).is_some() {
                return Err(format!("node {p} is the image of two sequences"));
            }
            if self.node_seq[p] != Some(s) {
                return Err(format!("sequence {s} inverse map broken"));
            }
        }
        if self.seq_node[0] != self.root() {
            return Err("empty sequence must map to the root".into());
        }
        let expected = 1 + self.decisions.iter().map(|d| d.num_actions()).sum::<usize>();
        if expected != self.num_seqs() {
            return Err(format!("|Σ| = {} but 1 + Σ|A_j| = {expected}", self.num_seqs()));
        }
        for (j, d) in self.decisions.iter().enumerate() {
            if self.kinds[d.node] != TfsdpNode::Decision(j) {
                return Err(format!("decision {j} node mismatch"));
            }
            for (a, s) in d.seqs().enumerate() {
                if self.parents[self.seq_node[s]] != Some(d.node) || self.seq_decision[s] != j {
                    return Err(format!("sequence ({j},{a}) is not below its decision point"));
                }
            }
            if d.parent_seq != 0 {
                let target = self.seq_node[d.parent_seq];
                let mut cur = Some(d.node);
                while let Some(c) = cur {
                    if c == target {
                        break;
                    }
                    cur = self.parents[c];
                }
                if cur.is_none() {
                    return Err(format!("parent sequence of decision {j} is not an ancestor"));
                }
            }
        }
        let levels = self.level_decomposition();
        let mut seen = vec![false; n];
        for (i, level) in levels.iter().enumerate() {
            for e in level {
                if self.depths[e.parent] as usize != i || self.depths[e.child] as usize != i + 1 {
                    return Err(format!("edge {e:?} listed at the wrong level"));
                }
                if std::mem::replace(&mut seen[e.child], true) {
                    return Err(format!("edge into {} listed twice", e.child));
                }
            }
        }
        if levels.iter().map(Vec::len).sum::<usize>() + 1 != n {
            return Err("level decomposition does not cover every edge".into());
        }
        Ok(())
    }
}

/// Builds both players' decision processes.
pub fn build_tfsdp(game: &Game, player: Player) -> Result<Tfsdp, TfsdpError> {
    Tfsdp::build(game, player)
}

/// Per-depth edge lists of a decision process.
pub fn level_decomposition(tfsdp: &Tfsdp) -> Vec<Vec<LevelEdge>> {
    tfsdp.level_decomposition()
}

fn collect_infosets(game: &Game, player: Player) -> Result<Vec<RawInfoset>, TfsdpError> {
    let mut raw: Vec<RawInfoset> = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut stack: Vec<(NodeId, Option<(usize, usize)>)> = vec![(Game::ROOT, None)];
    while let Some((id, last)) = stack.pop() {
        let node = game.node(id);
        match &node.kind {
            NodeKind::Decision { player: p, infoset } if *p == player => {
                let i = match index.get(infoset.as_str()) {
                    Some(&i) => {
                        if raw[i].parent != last {
                            return Err(TfsdpError::ImperfectRecall {
                                node: id,
                                infoset: infoset.clone(),
                            });
                        }
                        if raw[i].actions.len() != node.children.len() {
                            return Err(TfsdpError::InconsistentActions {
                                node: id,
                                infoset: infoset.clone(),
                            });
                        }
                        i
                    }
                    None => {
                        let i = raw.len();
                        raw.push(RawInfoset {
                            label: infoset.clone(),
                            actions: (0..node.children.len())
                                .map(|a| game.child_label(id, a).to_string())
                                .collect(),
                            parent: last,
                        });
                        index.insert(infoset.as_str(), i);
                        i
                    }
                };
                for (a, &c) in node.children.iter().enumerate().rev() {
                    stack.push((c, Some((i, a))));
                }
            }
            _ => {
                for &c in node.children.iter().rev() {
                    stack.push((c, last));
                }
            }
        }
    }
    Ok(raw)
}
