use std::time::Instant;

use crate::game::{Game, Player};
use crate::metrics::{exploitability, ConvergenceRecord};
use crate::operators::GameBundle;
use crate::sparse::Backend;

use super::{SequenceCfr, SolverConfig, SolverError, UpdateMode};

/// Both players' minimizers plus the utility plumbing between them.
#[derive(Debug)]
pub struct Solver<'a> {
    bundle: &'a GameBundle,
    backend: &'a Backend,
    config: SolverConfig,
    players: [SequenceCfr; 2],
    /// Last observed utilities, which double as the next predictions.
    utilities: [Vec<f64>; 2],
    iterations: u64,
}

impl<'a> Solver<'a> {
    pub fn new(bundle: &'a GameBundle, config: SolverConfig, backend: &'a Backend) -> Result<Self, SolverError> {
        config.validate()?;
        let players = [0, 1].map(|i| SequenceCfr::new(&bundle.tfsdps[i], config.variant, config.gamma));
        let utilities = [0, 1].map(|i| vec![0.0; bundle.tfsdps[i].num_seqs()]);
        Ok(Self {
            bundle,
            backend,
            config,
            players,
            utilities,
            iterations: 0,
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn backend(&self) -> &Backend {
        self.backend
    }

    pub fn iterations(&self) -> u64 {
        self.iterations
    }

    /// One full iteration for both players.
    pub fn step(&mut self) -> Result<(), SolverError> {
        let be = self.backend;
        let u = &self.bundle.payoff;
        let [p1, p2] = &mut self.players;
        let [u1, u2] = &mut self.utilities;
        match self.config.mode {
            UpdateMode::Simultaneous => {
                p1.next(Some(u1), be)?;
                p2.next(Some(u2), be)?;
                be.spmv_into(&u.matrix, p2.current(), u1)?;
                be.spmv_t_into(u, p1.current(), u2)?;
                be.map_in_place(u2, |v| -v);
                p1.observe(u1, be)?;
                p2.observe(u2, be)?;
            }
            UpdateMode::Alternating => {
                // Each player observes the opponent's latest iterate and
                // then recomputes its own; both start from uniform.
                be.spmv_into(&u.matrix, p2.current(), u1)?;
                p1.observe(u1, be)?;
                p1.next(Some(u1), be)?;
                be.spmv_t_into(u, p1.current(), u2)?;
                be.map_in_place(u2, |v| -v);
                p2.observe(u2, be)?;
                p2.next(Some(u2), be)?;
            }
        }
        p1.advance();
        p2.advance();
        self.iterations += 1;
        Ok(())
    }

    pub fn player(&self, p: Player) -> &SequenceCfr {
        &self.players[p.index()]
    }

    pub fn current(&self) -> [&[f64]; 2] {
        [self.players[0].current(), self.players[1].current()]
    }

    pub fn average(&self) -> [Vec<f64>; 2] {
        [self.players[0].average_strategy(), self.players[1].average_strategy()]
    }

    /// Bytes held by the solver state, including the shared game bundle.
    pub fn heap_bytes(&self) -> usize {
        self.bundle.heap_bytes()
            + self.players.iter().map(SequenceCfr::heap_bytes).sum::<usize>()
            + self.utilities.iter().map(|u| u.capacity() * std::mem::size_of::<f64>()).sum::<usize>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Budget {
    pub iterations: Option<u64>,
    pub seconds: Option<f64>,
}

impl Budget {
    pub fn iterations(n: u64) -> Self {
        Self {
            iterations: Some(n),
            seconds: None,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        match (self.iterations, self.seconds) {
            (None, None) => Err(SolverError::Config("a budget of iterations or seconds is required".into())),
            (Some(0), _) => Err(SolverError::Config("iteration budget must be positive".into())),
            (_, Some(s)) if !(s > 0.0 && s.is_finite()) => {
                Err(SolverError::Config(format!("time budget must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

/// Iterations at which exploitability is recorded. The last iteration of a
/// run is always recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Checkpoints {
    At(Vec<u64>),
    Every(u64),
    /// 1, 2, 5, 10, 20, 50, ...
    OneTwoFive,
}

impl Checkpoints {
    pub fn hits(&self, iteration: u64) -> bool {
        match self {
            Checkpoints::At(list) => list.contains(&iteration),
            Checkpoints::Every(n) => *n > 0 && iteration % n == 0,
            Checkpoints::OneTwoFive => {
                let mut m = iteration;
                while m >= 10 && m % 10 == 0 {
                    m /= 10;
                }
                matches!(m, 1 | 2 | 5)
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            Checkpoints::At(list) => list.is_empty(),
            Checkpoints::Every(n) => *n == 0,
            Checkpoints::OneTwoFive => false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub average: [Vec<f64>; 2],
    pub records: Vec<ConvergenceRecord>,
    pub iterations: u64,
    pub seconds: f64,
}

/// Solves `game` until the budget runs out, recording exploitability at
/// the checkpoints.
pub fn run(
    game: &Game,
    config: SolverConfig,
    budget: Budget,
    checkpoints: &Checkpoints,
    backend: &Backend,
) -> Result<RunOutput, SolverError> {
    let bundle = GameBundle::new(game)?;
    run_bundle(&bundle, config, budget, checkpoints, backend)
}

pub fn run_bundle(
    bundle: &GameBundle,
    config: SolverConfig,
    budget: Budget,
    checkpoints: &Checkpoints,
    backend: &Backend,
) -> Result<RunOutput, SolverError> {
    budget.validate()?;
    if checkpoints.is_empty() {
        return Err(SolverError::Config("checkpoint schedule is empty".into()));
    }
    let mut solver = Solver::new(bundle, config, backend)?;
    let mut records = Vec::new();
    let mut elapsed = 0.0;
    loop {
        let started = Instant::now();
        solver.step()?;
        elapsed += started.elapsed().as_secs_f64();

        let it = solver.iterations();
        let done = budget.iterations.is_some_and(|n| it >= n) || budget.seconds.is_some_and(|s| elapsed >= s);
        if done || checkpoints.hits(it) {
            let [a1, a2] = solver.average();
            let [c1, c2] = solver.current();
            records.push(ConvergenceRecord {
                iteration: it,
                seconds: elapsed,
                exploitability: exploitability(bundle, &a1, &a2)?,
                current_exploitability: exploitability(bundle, c1, c2)?,
                work: backend.work(),
                peak_bytes: solver.heap_bytes(),
            });
        }
        if done {
            break;
        }
    }
    Ok(RunOutput {
        average: solver.average(),
        records,
        iterations: solver.iterations(),
        seconds: elapsed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{kuhn_poker, matching_pennies};
    use crate::solver::Variant;

    #[test]
    fn checkpoint_schedules() {
        let c = Checkpoints::OneTwoFive;
        let hits: Vec<u64> = (1..=120).filter(|&i| c.hits(i)).collect();
        assert_eq!(hits, vec![1, 2, 5, 10, 20, 50, 100]);
        assert!(Checkpoints::Every(10).hits(30));
        assert!(!Checkpoints::Every(10).hits(31));
        assert!(Checkpoints::At(vec![]).is_empty());
    }

    #[test]
    fn budget_rules() {
        assert!(Budget::default().validate().is_err());
        assert!(Budget::iterations(0).validate().is_err());
        assert!(Budget { iterations: None, seconds: Some(0.0) }.validate().is_err());
        assert!(Budget::iterations(3).validate().is_ok());
    }

    #[test]
    fn one_cfr_iteration_averages_to_uniform() {
        let game = kuhn_poker();
        let be = Backend::serial();
        let out = run(
            &game,
            SolverConfig::for_variant(Variant::Cfr),
            Budget::iterations(1),
            &Checkpoints::OneTwoFive,
            &be,
        )
        .unwrap();
        let bundle = GameBundle::new(&game).unwrap();
        for (i, avg) in out.average.iter().enumerate() {
            let t = &bundle.tfsdps[i];
            assert_eq!(avg, &t.sequence_form(&vec![0.5; t.num_seqs() - 1]));
        }
        assert_eq!(out.records.len(), 1);
    }

    #[test]
    fn matching_pennies_cfr_converges() {
        let be = Backend::serial();
        let out = run(
            &matching_pennies(),
            SolverConfig::for_variant(Variant::Cfr),
            Budget::iterations(1000),
            &Checkpoints::At(vec![10, 100, 1000]),
            &be,
        )
        .unwrap();
        let e: Vec<f64> = out.records.iter().map(|r| r.exploitability).collect();
        assert_eq!(e.len(), 3);
        assert!(e[2] <= 0.05, "{e:?}");
        assert!(e[2] <= e[0], "{e:?}");
        assert!(out.records.windows(2).all(|w| w[0].iteration < w[1].iteration));
    }

    #[test]
    fn cfr_plus_keeps_regrets_nonnegative() {
        let bundle = GameBundle::new(&kuhn_poker()).unwrap();
        let be = Backend::serial();
        let mut s = Solver::new(&bundle, SolverConfig::for_variant(Variant::CfrPlus), &be).unwrap();
        for _ in 0..100 {
            s.step().unwrap();
            for p in Player::BOTH {
                assert!(s.player(p).state().r.iter().all(|&v| v >= 0.0));
            }
        }
    }
}
