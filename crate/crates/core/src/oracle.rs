//! Scalar reference implementations used as ground truth in tests.
//!
//! Everything here walks decision points with plain loops: regret matching
//! per decision point, counterfactual values bottom-up, best responses by
//! maximization, and expected values by walking the game tree.

use crate::game::{Game, NodeKind, Player};
use crate::operators::GameBundle;
use crate::solver::{dcfr_factor, SolverConfig, UpdateMode, Variant};
use crate::sparse::SparseMatrix;
use crate::tfsdp::Tfsdp;

/// Decision points whose parent sequence is `σ`, for every `σ`, in index
/// order.
pub fn followups(tfsdp: &Tfsdp) -> Vec<Vec<usize>> {
    let mut f = vec![Vec::new(); tfsdp.num_seqs()];
    for (j, d) in tfsdp.decisions().iter().enumerate() {
        f[d.parent_seq].push(j);
    }
    f
}

/// Per-decision-point CFR state.
#[derive(Debug, Clone)]
pub struct ScalarCfr {
    variant: Variant,
    gamma: f64,
    next_of: Vec<Vec<usize>>,
    /// `r[j][a]`
    pub regrets: Vec<Vec<f64>>,
    /// `b[j][a]`, the last strategy computed.
    pub behavioral: Vec<Vec<f64>>,
    /// Counterfactual value of each sequence from the last observation.
    pub seq_value: Vec<f64>,
    /// Expected counterfactual value of each decision point.
    pub decision_value: Vec<f64>,
    pub t: u64,
    x: Vec<f64>,
    avg: Vec<f64>,
    avg_total: f64,
}

impl ScalarCfr {
    pub fn new(tfsdp: &Tfsdp, variant: Variant, gamma: f64) -> Self {
        let ds = tfsdp.decisions();
        let behavioral: Vec<Vec<f64>> = ds
            .iter()
            .map(|d| vec![1.0 / d.num_actions() as f64; d.num_actions()])
            .collect();
        let mut s = Self {
            variant,
            gamma,
            next_of: followups(tfsdp),
            regrets: ds.iter().map(|d| vec![0.0; d.num_actions()]).collect(),
            behavioral,
            seq_value: vec![0.0; tfsdp.num_seqs()],
            decision_value: vec![0.0; ds.len()],
            t: 1,
            x: Vec::new(),
            avg: vec![0.0; tfsdp.num_seqs()],
            avg_total: 0.0,
        };
        s.x = s.sequence_form(tfsdp);
        s
    }

    fn sequence_form(&self, tfsdp: &Tfsdp) -> Vec<f64> {
        let mut x = vec![0.0; tfsdp.num_seqs()];
        x[0] = 1.0;
        for (j, d) in tfsdp.decisions().iter().enumerate() {
            for a in 0..d.num_actions() {
                x[d.first_seq + a] = self.behavioral[j][a] * x[d.parent_seq];
            }
        }
        x
    }

    /// Regret matching at every decision point, then the top-down pass.
    pub fn scalar_next_strategy(&mut self, tfsdp: &Tfsdp) -> Vec<f64> {
        for (j, r) in self.regrets.iter().enumerate() {
            let mut norm = 0.0;
            for &v in r {
                norm += if v > 0.0 { v } else { 0.0 };
            }
            let n = r.len() as f64;
            for (a, &v) in r.iter().enumerate() {
                let pos = if v > 0.0 { v } else { 0.0 };
                self.behavioral[j][a] = if norm == 0.0 { 1.0 / n } else { pos / norm };
            }
        }
        self.x = self.sequence_form(tfsdp);
        self.x.clone()
    }

    /// Bottom-up counterfactual values against the last strategy, then the
    /// regret update `r_j += u_j - b_jᵀ u_j`.
    pub fn scalar_observe_utility(&mut self, tfsdp: &Tfsdp, u: &[f64]) {
        let ds = tfsdp.decisions();
        for j in (0..ds.len()).rev() {
            let d = &ds[j];
            let mut v = 0.0;
            for a in 0..d.num_actions() {
                let s = d.first_seq + a;
                let mut below = 0.0;
                for &k in &self.next_of[s] {
                    below += self.decision_value[k];
                }
                self.seq_value[s] = u[s] + below;
                v += self.behavioral[j][a] * self.seq_value[s];
            }
            self.decision_value[j] = v;
        }
        for (j, d) in ds.iter().enumerate() {
            let mut expected = 0.0;
            for a in 0..d.num_actions() {
                expected += self.behavioral[j][a] * self.seq_value[d.first_seq + a];
            }
            for a in 0..d.num_actions() {
                self.regrets[j][a] = (self.regrets[j][a] + self.seq_value[d.first_seq + a]) - expected;
            }
        }
    }

    fn post_process(&mut self) {
        match self.variant {
            Variant::CfrPlus | Variant::PcfrPlus => {
                for r in self.regrets.iter_mut().flatten() {
                    if !(*r > 0.0) {
                        *r = 0.0;
                    }
                }
            }
            Variant::Dcfr { alpha, beta } => {
                let pos = dcfr_factor(self.t, alpha);
                let neg = dcfr_factor(self.t, beta);
                for r in self.regrets.iter_mut().flatten() {
                    if *r > 0.0 {
                        *r *= pos;
                    } else if *r < 0.0 {
                        *r *= neg;
                    }
                }
            }
            Variant::Cfr | Variant::Pcfr => {}
        }
    }

    /// Variant-aware strategy step, folded into the average.
    pub fn next(&mut self, tfsdp: &Tfsdp, prediction: &[f64]) -> Vec<f64> {
        let x = if self.variant.is_predictive() {
            let saved = self.regrets.clone();
            self.scalar_observe_utility(tfsdp, prediction);
            if self.variant == Variant::PcfrPlus {
                self.post_process();
            }
            let x = self.scalar_next_strategy(tfsdp);
            self.regrets = saved;
            x
        } else {
            self.scalar_next_strategy(tfsdp)
        };
        let w = (self.t as f64).powf(self.gamma);
        for (acc, v) in self.avg.iter_mut().zip(&x) {
            *acc += w * v;
        }
        self.avg_total += w;
        x
    }

    pub fn observe(&mut self, tfsdp: &Tfsdp, u: &[f64]) {
        self.scalar_observe_utility(tfsdp, u);
        self.post_process();
    }

    pub fn current(&self) -> &[f64] {
        &self.x
    }

    pub fn average(&self) -> Vec<f64> {
        if self.avg_total > 0.0 {
            self.avg.iter().map(|v| v / self.avg_total).collect()
        } else {
            self.x.clone()
        }
    }

    /// Regrets laid out over Σ⁺, as in the linear-algebra solver.
    pub fn flat_regrets(&self) -> Vec<f64> {
        self.regrets.iter().flatten().copied().collect()
    }
}

/// `U x₂` with a loop over rows.
pub fn payoff_times(u: &SparseMatrix, x2: &[f64]) -> Vec<f64> {
    (0..u.rows())
        .map(|r| {
            let (cols, vals) = u.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x2[*c];
            }
            acc
        })
        .collect()
}

/// `-Uᵀ x₁` accumulated column by column in row order.
pub fn neg_payoff_transpose_times(u: &SparseMatrix, x1: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.cols()];
    for (r, &xr) in x1.iter().enumerate().take(u.rows()) {
        let (cols, vals) = u.row(r);
        for (c, v) in cols.iter().zip(vals) {
            out[*c] += v * xr;
        }
    }
    out.iter_mut().for_each(|v| *v = -*v);
    out
}

/// Two-player driver over [`ScalarCfr`], in lockstep with the main solver.
#[derive(Debug, Clone)]
pub struct ScalarSolver<'a> {
    bundle: &'a GameBundle,
    config: SolverConfig,
    players: [ScalarCfr; 2],
    utilities: [Vec<f64>; 2],
}

impl<'a> ScalarSolver<'a> {
    pub fn new(bundle: &'a GameBundle, config: SolverConfig) -> Self {
        let players = [0, 1].map(|i| ScalarCfr::new(&bundle.tfsdps[i], config.variant, config.gamma));
        let utilities = [0, 1].map(|i| vec![0.0; bundle.tfsdps[i].num_seqs()]);
        Self {
            bundle,
            config,
            players,
            utilities,
        }
    }

    pub fn step(&mut self) {
        let [t1, t2] = &self.bundle.tfsdps;
        let u = &self.bundle.payoff.matrix;
        let [p1, p2] = &mut self.players;
        match self.config.mode {
            UpdateMode::Simultaneous => {
                let x1 = p1.next(t1, &self.utilities[0]);
                let x2 = p2.next(t2, &self.utilities[1]);
                self.utilities = [payoff_times(u, &x2), neg_payoff_transpose_times(u, &x1)];
                p1.observe(t1, &self.utilities[0]);
                p2.observe(t2, &self.utilities[1]);
            }
            UpdateMode::Alternating => {
                self.utilities[0] = payoff_times(u, p2.current());
                p1.observe(t1, &self.utilities[0]);
                let x1 = p1.next(t1, &self.utilities[0]);
                self.utilities[1] = neg_payoff_transpose_times(u, &x1);
                p2.observe(t2, &self.utilities[1]);
                p2.next(t2, &self.utilities[1]);
            }
        }
        p1.t += 1;
        p2.t += 1;
    }

    pub fn player(&self, p: Player) -> &ScalarCfr {
        &self.players[p.index()]
    }

    pub fn current(&self) -> [&[f64]; 2] {
        [self.players[0].current(), self.players[1].current()]
    }

    pub fn average(&self) -> [Vec<f64>; 2] {
        [self.players[0].average(), self.players[1].average()]
    }
}

/// `max_{x ∈ X} xᵀ g` and a pure strategy attaining it.
pub fn scalar_best_response(tfsdp: &Tfsdp, gradient: &[f64]) -> (f64, Vec<f64>) {
    let next_of = followups(tfsdp);
    let ds = tfsdp.decisions();
    let mut value = vec![0.0; ds.len()];
    let mut choice = vec![0usize; ds.len()];
    let seq_value = |s: usize, value: &[f64]| gradient[s] + next_of[s].iter().map(|&k| value[k]).sum::<f64>();
    for j in (0..ds.len()).rev() {
        let d = &ds[j];
        let mut best = f64::NEG_INFINITY;
        for a in 0..d.num_actions() {
            let v = seq_value(d.first_seq + a, &value);
            if v > best {
                best = v;
                choice[j] = a;
            }
        }
        value[j] = best;
    }
    let total = seq_value(0, &value);

    let mut x = vec![0.0; tfsdp.num_seqs()];
    x[0] = 1.0;
    for (j, d) in ds.iter().enumerate() {
        if x[d.parent_seq] > 0.0 {
            x[d.first_seq + choice[j]] = 1.0;
        }
    }
    (total, x)
}

/// Every pure sequence-form strategy, or `None` past `limit` of them.
pub fn pure_strategies(tfsdp: &Tfsdp, limit: usize) -> Option<Vec<Vec<f64>>> {
    let mut out = vec![{
        let mut x = vec![0.0; tfsdp.num_seqs()];
        x[0] = 1.0;
        x
    }];
    // Decision points are ordered parents first, so each partial strategy
    // already knows whether a decision point is reached.
    for d in tfsdp.decisions() {
        let mut grown = Vec::with_capacity(out.len() * d.num_actions());
        for x in out {
            if x[d.parent_seq] > 0.0 {
                for a in 0..d.num_actions() {
                    let mut y = x.clone();
                    y[d.first_seq + a] = 1.0;
                    grown.push(y);
                }
            } else {
                grown.push(x);
            }
            if grown.len() > limit {
                return None;
            }
        }
        out = grown;
    }
    Some(out)
}

/// Best response by exhaustive enumeration of pure strategies.
pub fn brute_force_best_response(tfsdp: &Tfsdp, gradient: &[f64], limit: usize) -> Option<f64> {
    let all = pure_strategies(tfsdp, limit)?;
    Some(
        all.iter()
            .map(|x| x.iter().zip(gradient).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Player 1's expected value of a behavioral profile by walking the game
/// tree. `b1`, `b2` are behavioral strategies over each player's Σ⁺.
pub fn tree_walk_value(game: &Game, bundle: &GameBundle, b1: &[f64], b2: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut stack = vec![(Game::ROOT, 1.0f64)];
    while let Some((id, reach)) = stack.pop() {
        let node = game.node(id);
        match &node.kind {
            NodeKind::Terminal { payoff } => total += reach * payoff,
            NodeKind::Chance => {
                for &c in &node.children {
                    stack.push((c, reach * game.node(c).prob.unwrap_or(0.0)));
                }
            }
            NodeKind::Decision { player, infoset } => {
                let t = bundle.tfsdp(*player);
                let d = t.decision(t.decision_of(infoset).expect("infoset is known"));
                let b = match player {
                    Player::One => b1,
                    Player::Two => b2,
                };
                for (a, &c) in node.children.iter().enumerate() {
                    stack.push((c, reach * b[d.first_seq + a - 1]));
                }
            }
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{decision, kuhn_poker, rock_paper_scissors, terminal, GameBuilder};

    fn single() -> Tfsdp {
        let mut b = GameBuilder::new("one");
        let r = b.root(decision(Player::One, "j"));
        b.child(r, "a", None, terminal(1.0));
        b.child(r, "b", None, terminal(0.0));
        Tfsdp::build(&b.finish(), Player::One).unwrap()
    }

    #[test]
    fn hand_traced_example() {
        let t = single();
        let mut s = ScalarCfr::new(&t, Variant::Cfr, 0.0);
        s.regrets[0] = vec![1.0, 3.0];
        assert_eq!(s.scalar_next_strategy(&t), vec![1.0, 0.25, 0.75]);
        s.scalar_observe_utility(&t, &[0.0, 4.0, 0.0]);
        assert_eq!(s.regrets[0], vec![4.0, 2.0]);
        s.scalar_observe_utility(&t, &[0.0; 3]);
        assert_eq!(s.regrets[0], vec![4.0, 2.0]);
    }

    #[test]
    fn zero_regrets_give_uniform() {
        let t = Tfsdp::build(&kuhn_poker(), Player::One).unwrap();
        let mut s = ScalarCfr::new(&t, Variant::Cfr, 0.0);
        let x = s.scalar_next_strategy(&t);
        let uniform: Vec<f64> = vec![0.5; t.num_seqs() - 1];
        assert_eq!(x, t.sequence_form(&uniform));
    }

    #[test]
    fn observation_point_sums_signals() {
        // Player 1 acts, chance reveals one of two signals, player 1 acts
        // again: the first action's value is the sum over both signals.
        let mut g = GameBuilder::new("obs");
        let r = g.root(decision(Player::One, "root"));
        let c = g.child(r, "go", None, NodeKind::Chance);
        let s1 = g.child(c, "s1", Some(0.5), decision(Player::One, "after1"));
        g.child(s1, "x", None, terminal(2.0));
        let s2 = g.child(c, "s2", Some(0.5), decision(Player::One, "after2"));
        g.child(s2, "x", None, terminal(4.0));
        g.child(r, "stop", None, terminal(0.0));
        let game = g.finish();
        let bundle = GameBundle::new(&game).unwrap();
        let t = bundle.tfsdp(Player::One);
        let mut s = ScalarCfr::new(t, Variant::Cfr, 0.0);
        s.scalar_next_strategy(t);
        // u over Σ: ∅, go, stop, after1/x, after2/x
        s.scalar_observe_utility(t, &[0.0, 0.0, 0.0, 1.0, 2.0]);
        assert_eq!(s.seq_value[1], 3.0);
    }

    #[test]
    fn rps_best_responses() {
        let bundle = GameBundle::new(&rock_paper_scissors()).unwrap();
        let t1 = bundle.tfsdp(Player::One);
        let u = &bundle.payoff.matrix;
        let uniform = vec![1.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        let (v, _) = scalar_best_response(t1, &payoff_times(u, &uniform));
        assert!(v.abs() < 1e-15);
        let rock = vec![1.0, 1.0, 0.0, 0.0];
        let (v, x) = scalar_best_response(t1, &payoff_times(u, &rock));
        assert_eq!(v, 1.0);
        assert_eq!(t1.seq_label(x.iter().skip(1).position(|&p| p == 1.0).unwrap() + 1), "1/P");
    }

    #[test]
    fn kuhn_best_response_matches_enumeration() {
        let bundle = GameBundle::new(&kuhn_poker()).unwrap();
        let [t1, t2] = &bundle.tfsdps;
        let x1 = t1.sequence_form(&vec![0.5; t1.num_seqs() - 1]);
        let x2 = t2.sequence_form(&vec![0.5; t2.num_seqs() - 1]);
        let u = &bundle.payoff.matrix;
        let g1 = payoff_times(u, &x2);
        let g2 = neg_payoff_transpose_times(u, &x1);
        let brute1 = brute_force_best_response(t1, &g1, 1 << 16).unwrap();
        let brute2 = brute_force_best_response(t2, &g2, 1 << 16).unwrap();
        assert!((scalar_best_response(t1, &g1).0 - brute1).abs() < 1e-12);
        assert!((scalar_best_response(t2, &g2).0 - brute2).abs() < 1e-12);
        assert!(brute1 + brute2 > 0.0);
    }

    #[test]
    fn best_response_dominates() {
        let bundle = GameBundle::new(&kuhn_poker()).unwrap();
        let t1 = bundle.tfsdp(Player::One);
        let g: Vec<f64> = (0..t1.num_seqs()).map(|i| ((i * 5) % 7) as f64 - 3.0).collect();
        let (best, _) = scalar_best_response(t1, &g);
        for x in pure_strategies(t1, 1 << 16).unwrap() {
            let v: f64 = x.iter().zip(&g).map(|(a, b)| a * b).sum();
            assert!(v <= best + 1e-12);
        }
    }

    #[test]
    fn tree_walk_matches_payoff_matrix() {
        let game = kuhn_poker();
        let bundle = GameBundle::new(&game).unwrap();
        let [t1, t2] = &bundle.tfsdps;
        let b1: Vec<f64> = (0..t1.num_seqs() - 1).map(|i| if i % 2 == 0 { 0.3 } else { 0.7 }).collect();
        let b2: Vec<f64> = (0..t2.num_seqs() - 1).map(|i| if i % 2 == 0 { 0.9 } else { 0.1 }).collect();
        let x1 = t1.sequence_form(&b1);
        let x2 = t2.sequence_form(&b2);
        let ux2 = payoff_times(&bundle.payoff.matrix, &x2);
        let v: f64 = x1.iter().zip(&ux2).map(|(a, b)| a * b).sum();
        assert!((v - tree_walk_value(&game, &bundle, &b1, &b2)).abs() < 1e-12);
    }
}
