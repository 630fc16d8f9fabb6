use crate::operators::OperatorSet;
use crate::sparse::{ensure_finite, Backend, SparseError};
use crate::tfsdp::Tfsdp;

use super::{dcfr_factor, Variant};

#[derive(Debug, Clone, PartialEq)]
pub struct RegretState {
    /// Cumulative counterfactual regrets over Σ⁺.
    pub r: Vec<f64>,
    /// Most recent behavioral strategy over Σ⁺. The level matrices always
    /// hold these weights between calls.
    pub b_prev: Vec<f64>,
    /// Iteration counter, starting at 1.
    pub t: u64,
    pub avg_accum: Vec<f64>,
    pub avg_weight_total: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
struct Scratch {
    r_pos: Vec<f64>,
    blocks: Vec<f64>,
    spread: Vec<f64>,
    q: Vec<f64>,
    bq: Vec<f64>,
    snapshot: Vec<f64>,
    /// Top-down reach per node, then bottom-up values per node.
    nodes: Vec<f64>,
    x: Vec<f64>,
}

/// One player's CFR-family regret minimizer over its decision process.
#[derive(Debug, Clone)]
pub struct SequenceCfr {
    ops: OperatorSet,
    state: RegretState,
    variant: Variant,
    scratch: Scratch,
}

fn check_len(expected: usize, got: usize) -> Result<(), SparseError> {
    if expected == got {
        Ok(())
    } else {
        Err(SparseError::DimensionMismatch { expected, got })
    }
}

impl SequenceCfr {
    pub fn new(tfsdp: &Tfsdp, variant: Variant, gamma: f64) -> Self {
        let mut ops = OperatorSet::build(tfsdp);
        let n_plus = ops.uniform.len();
        let uniform = ops.uniform.clone();
        ops.refresh_levels(&uniform, &Backend::serial())
            .expect("uniform strategy has the right length");
        let x = tfsdp.sequence_form(&uniform);
        Self {
            state: RegretState {
                r: vec![0.0; n_plus],
                b_prev: uniform,
                t: 1,
                avg_accum: vec![0.0; ops.num_seqs()],
                avg_weight_total: 0.0,
                gamma,
            },
            scratch: Scratch {
                r_pos: vec![0.0; n_plus],
                blocks: vec![0.0; ops.num_decisions()],
                spread: vec![0.0; n_plus],
                q: vec![0.0; n_plus],
                bq: vec![0.0; n_plus],
                snapshot: if variant.is_predictive() { vec![0.0; n_plus] } else { Vec::new() },
                nodes: vec![0.0; ops.num_nodes()],
                x,
            },
            ops,
            variant,
        }
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn state(&self) -> &RegretState {
        &self.state
    }

    /// Overwrites the regrets, e.g. to start from a hand-picked state.
    pub fn set_regrets(&mut self, r: &[f64]) -> Result<(), SparseError> {
        check_len(self.state.r.len(), r.len())?;
        self.state.r.copy_from_slice(r);
        Ok(())
    }

    /// Replaces the stored behavioral strategy and the level weights.
    pub fn set_behavioral(&mut self, b: &[f64], backend: &Backend) -> Result<(), SparseError> {
        check_len(self.state.b_prev.len(), b.len())?;
        self.state.b_prev.copy_from_slice(b);
        self.ops.refresh_levels(b, backend)
    }

    pub fn operators(&self) -> &OperatorSet {
        &self.ops
    }

    /// The most recent sequence-form iterate (uniform before the first).
    pub fn current(&self) -> &[f64] {
        &self.scratch.x
    }

    /// Regret matching on `r`, written into `b_prev`, the levels and `x`.
    fn strategy_from_regrets(&mut self, backend: &Backend) -> Result<(), SparseError> {
        let s = &mut self.scratch;
        let ops = &mut self.ops;
        ensure_finite(&self.state.r)?;
        backend.positive_part(&self.state.r, &mut s.r_pos)?;
        backend.spmv_into(&ops.c.matrix, &s.r_pos, &mut s.blocks)?;
        backend.spmv_t_into(&ops.c, &s.blocks, &mut s.spread)?;
        backend.hadamard_div_or_default(&s.r_pos, &s.spread, &ops.uniform, &mut self.state.b_prev)?;
        ops.refresh_levels(&self.state.b_prev, backend)?;

        let y = &mut s.nodes;
        y[ops.root] = 1.0;
        for level in &ops.levels {
            let (above, below) = y.split_at_mut(level.children.start);
            backend.spmv_into(
                &level.down,
                &above[level.parents.clone()],
                &mut below[..level.children.len()],
            )?;
        }
        backend.spmv_t_into(&ops.a, y, &mut s.x)
    }

    fn accumulate_average(&mut self, backend: &Backend) -> Result<(), SparseError> {
        let w = (self.state.t as f64).powf(self.state.gamma);
        backend.axpy(w, &self.scratch.x, &mut self.state.avg_accum)?;
        self.state.avg_weight_total += w;
        Ok(())
    }

    /// Regret-matching strategy for the current regrets; also folds it into
    /// the running average with weight `t^gamma`.
    pub fn next_strategy(&mut self, backend: &Backend) -> Result<&[f64], SparseError> {
        self.strategy_from_regrets(backend)?;
        self.accumulate_average(backend)?;
        Ok(&self.scratch.x)
    }

    /// Strategy for the regrets obtained by observing the prediction `m`
    /// against the previous behavioral strategy. The regrets are restored
    /// afterwards.
    pub fn next_strategy_predictive(&mut self, m: &[f64], backend: &Backend) -> Result<&[f64], SparseError> {
        if self.scratch.snapshot.len() != self.state.r.len() {
            self.scratch.snapshot = vec![0.0; self.state.r.len()];
        }
        backend.map(&self.state.r, &mut self.scratch.snapshot, |v| v)?;
        self.observe_core(m, backend)?;
        if self.variant == Variant::PcfrPlus {
            backend.map_in_place(&mut self.state.r, floor);
        }
        self.strategy_from_regrets(backend)?;
        backend.map(&self.scratch.snapshot, &mut self.state.r, |v| v)?;
        self.accumulate_average(backend)?;
        Ok(&self.scratch.x)
    }

    /// The variant's strategy step; `prediction` is only used by the
    /// predictive variants, where `None` means a zero prediction.
    pub fn next(&mut self, prediction: Option<&[f64]>, backend: &Backend) -> Result<&[f64], SparseError> {
        if self.variant.is_predictive() {
            match prediction {
                Some(m) => self.next_strategy_predictive(m, backend),
                None => {
                    let zero = vec![0.0; self.ops.num_seqs()];
                    self.next_strategy_predictive(&zero, backend)
                }
            }
        } else {
            self.next_strategy(backend)
        }
    }

    /// `r += q - CᵀC(b ⊙ q)` with `q` the counterfactual values of `u`.
    fn observe_core(&mut self, u: &[f64], backend: &Backend) -> Result<(), SparseError> {
        check_len(self.ops.num_seqs(), u.len())?;
        ensure_finite(u)?;
        let s = &mut self.scratch;
        let ops = &self.ops;

        // Node values: w = A u, then each level adds its weighted children.
        let z = &mut s.nodes;
        backend.spmv_into(&ops.a.matrix, u, z)?;
        for level in ops.levels.iter().rev() {
            let (above, below) = z.split_at_mut(level.children.start);
            backend.spmv_acc(
                &level.up,
                &below[..level.children.len()],
                &mut above[level.parents.clone()],
            )?;
        }
        backend.spmv_t_into(&ops.b, z, &mut s.q)?;

        backend.hadamard_mul(&self.state.b_prev, &s.q, &mut s.bq)?;
        backend.spmv_into(&ops.c.matrix, &s.bq, &mut s.blocks)?;
        backend.spmv_t_into(&ops.c, &s.blocks, &mut s.spread)?;
        backend.add(&self.state.r, &s.q, &mut s.bq)?;
        backend.sub(&s.bq, &s.spread, &mut self.state.r)
    }

    /// Plain CFR regret update.
    pub fn observe_utility(&mut self, u: &[f64], backend: &Backend) -> Result<(), SparseError> {
        self.observe_core(u, backend)
    }

    /// CFR+ update: the plain update followed by flooring at zero.
    pub fn observe_utility_plus(&mut self, u: &[f64], backend: &Backend) -> Result<(), SparseError> {
        self.observe_core(u, backend)?;
        backend.map_in_place(&mut self.state.r, floor);
        Ok(())
    }

    /// DCFR update: the plain update followed by sign-dependent discounting
    /// with the current `t`.
    pub fn observe_utility_dcfr(&mut self, u: &[f64], alpha: f64, beta: f64, backend: &Backend) -> Result<(), SparseError> {
        self.observe_core(u, backend)?;
        let pos = dcfr_factor(self.state.t, alpha);
        let neg = dcfr_factor(self.state.t, beta);
        backend.map_in_place(&mut self.state.r, move |v| discount(v, pos, neg));
        Ok(())
    }

    /// The variant's regret update.
    pub fn observe(&mut self, u: &[f64], backend: &Backend) -> Result<(), SparseError> {
        match self.variant {
            Variant::Cfr | Variant::Pcfr => self.observe_utility(u, backend),
            Variant::CfrPlus | Variant::PcfrPlus => self.observe_utility_plus(u, backend),
            Variant::Dcfr { alpha, beta } => self.observe_utility_dcfr(u, alpha, beta, backend),
        }
    }

    pub fn advance(&mut self) {
        self.state.t += 1;
    }

    /// Normalized weighted average of the iterates so far.
    pub fn average_strategy(&self) -> Vec<f64> {
        let total = self.state.avg_weight_total;
        if total > 0.0 {
            self.state.avg_accum.iter().map(|v| v / total).collect()
        } else {
            self.scratch.x.clone()
        }
    }

    pub fn heap_bytes(&self) -> usize {
        let f = std::mem::size_of::<f64>();
        let s = &self.scratch;
        let st = &self.state;
        self.ops.heap_bytes()
            + f * (st.r.capacity() + st.b_prev.capacity() + st.avg_accum.capacity())
            + f * (s.r_pos.capacity()
                + s.blocks.capacity()
                + s.spread.capacity()
                + s.q.capacity()
                + s.bq.capacity()
                + s.snapshot.capacity()
                + s.nodes.capacity()
                + s.x.capacity())
    }
}

pub(crate) fn floor(v: f64) -> f64 {
    if v > 0.0 {
        v
    } else {
        0.0
    }
}

pub(crate) fn discount(v: f64, pos: f64, neg: f64) -> f64 {
    if v > 0.0 {
        v * pos
    } else if v < 0.0 {
        v * neg
    } else {
        v
    }
}
