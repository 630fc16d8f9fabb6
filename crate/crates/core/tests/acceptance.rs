//! Acceptance checks. Prints one `PASS` or `FAIL` line per criterion and
//! exits non-zero if any criterion fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seqcfr::cli::{measure, random_game_for_size};
use seqcfr::game::{kuhn_poker, leduc_poker, random_game, Player};
use seqcfr::metrics::{expected_value, gradients};
use seqcfr::operators::GameBundle;
use seqcfr::oracle::{brute_force_best_response, scalar_best_response, ScalarSolver};
use seqcfr::solver::{run_bundle, Budget, Checkpoints, SequenceCfr, Solver, SolverConfig, UpdateMode, Variant};
use seqcfr::sparse::{Backend, SparseMatrix, SparseOperator};
use seqcfr::tfsdp::Tfsdp;

const ORACLE_TOL: f64 = 1e-10;
const ORACLE_SECONDS: f64 = 60.0;
const POLYTOPE_TOL: f64 = 1e-11;
const POLYTOPE_MIN_CHECKS: usize = 4000;
const IDENTITY_TOL: f64 = 1e-12;
const KUHN_TARGET: f64 = 1e-4;
const KUHN_VALUE: f64 = -1.0 / 18.0;
const KUHN_VALUE_TOL: f64 = 1e-3;
const KUHN_SECONDS: f64 = 120.0;
const KERNEL_REL_TOL: f64 = 1e-12;
const TRAJECTORY_TOL: f64 = 1e-9;
const WORK_R2: f64 = 0.99;
const SPACE_R2: f64 = 0.98;
const SPEEDUP_WORKERS: usize = 8;
const SPEEDUP_MIN: f64 = 1.5;
const SWEEP: [f64; 4] = [1e3, 1e4, 1e5, 1e6];

struct Outcome {
    pass: bool,
    detail: String,
}

fn report(name: &str, o: &Outcome) {
    println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest violation of `x[∅] = 1` and the per-decision-point flow
/// constraints.
fn polytope_violation(t: &Tfsdp, x: &[f64]) -> f64 {
    let mut worst = (x[0] - 1.0).abs();
    for d in t.decisions() {
        let s: f64 = x[d.seqs()].iter().sum();
        worst = worst.max((s - x[d.parent_seq]).abs());
        worst = worst.max(-x[d.seqs()].iter().copied().fold(0.0, f64::min));
    }
    worst
}

fn variants() -> [Variant; 5] {
    [Variant::Cfr, Variant::CfrPlus, Variant::DCFR_DEFAULT, Variant::Pcfr, Variant::PcfrPlus]
}

/// Oracle equivalence and polytope invariants share the same runs.
fn oracle_runs() -> (Outcome, Outcome) {
    let games = [
        ("kuhn", kuhn_poker()),
        ("random(6,3,0.5,1)", random_game(6, 3, 0.5, 1).expect("random game")),
    ];
    let be = Backend::serial();
    let started = Instant::now();
    let mut worst = 0.0f64;
    let mut worst_at = String::new();
    let mut poly_worst = 0.0f64;
    let mut checks = 0usize;
    for (name, game) in &games {
        let bundle = GameBundle::new(game).expect("bundle");
        for variant in variants() {
            for mode in [UpdateMode::Simultaneous, UpdateMode::Alternating] {
                let config = SolverConfig {
                    mode,
                    ..SolverConfig::for_variant(variant)
                };
                let mut la = Solver::new(&bundle, config, &be).expect("solver");
                let mut scalar = ScalarSolver::new(&bundle, config);
                for it in 1..=200 {
                    la.step().expect("step");
                    scalar.step();
                    for p in Player::BOTH {
                        let x = la.current()[p.index()];
                        let d = max_abs_diff(x, scalar.current()[p.index()]);
                        if d > worst {
                            worst = d;
                            worst_at = format!("{name} {variant} {mode} iteration {it} player {p}");
                        }
                        poly_worst = poly_worst.max(polytope_violation(bundle.tfsdp(p), x));
                        checks += 1;
                    }
                }
                let (a, b) = (la.average(), scalar.average());
                for p in 0..2 {
                    worst = worst.max(max_abs_diff(&a[p], &b[p]));
                }
            }
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let equivalence = Outcome {
        pass: worst <= ORACLE_TOL && secs <= ORACLE_SECONDS,
        detail: format!(
            "max |x_la - x_scalar| = {worst:e} (tol {ORACLE_TOL:e}{}), {secs:.2}s (limit {ORACLE_SECONDS}s)",
            if worst_at.is_empty() { String::new() } else { format!(", worst at {worst_at}") }
        ),
    };
    let polytope = Outcome {
        pass: poly_worst <= POLYTOPE_TOL && checks >= POLYTOPE_MIN_CHECKS,
        detail: format!(
            "{checks} strategies checked (need {POLYTOPE_MIN_CHECKS}), worst violation {poly_worst:e} (tol {POLYTOPE_TOL:e})"
        ),
    };
    (equivalence, polytope)
}

fn variant_identities() -> Outcome {
    let bundle = GameBundle::new(&kuhn_poker()).expect("bundle");
    let be = Backend::serial();

    // Clamped DCFR against CFR+, in both modes.
    let mut dcfr_worst = 0.0f64;
    for mode in [UpdateMode::Alternating, UpdateMode::Simultaneous] {
        let plus = SolverConfig {
            variant: Variant::CfrPlus,
            gamma: 1.0,
            mode,
        };
        let clamped = SolverConfig {
            variant: Variant::Dcfr {
                alpha: f64::INFINITY,
                beta: f64::NEG_INFINITY,
            },
            ..plus
        };
        let mut a = Solver::new(&bundle, plus, &be).expect("solver");
        let mut b = Solver::new(&bundle, clamped, &be).expect("solver");
        for _ in 0..50 {
            a.step().expect("step");
            b.step().expect("step");
            for p in 0..2 {
                dcfr_worst = dcfr_worst.max(max_abs_diff(a.current()[p], b.current()[p]));
            }
        }
    }

    // PCFR fed zero predictions against CFR, driven minimizer by minimizer.
    let mut pcfr_worst = 0.0f64;
    let [t1, t2] = &bundle.tfsdps;
    let make = |v| [SequenceCfr::new(t1, v, 0.0), SequenceCfr::new(t2, v, 0.0)];
    let mut cfr = make(Variant::Cfr);
    let mut pcfr = make(Variant::Pcfr);
    for _ in 0..50 {
        for players in [&mut cfr, &mut pcfr] {
            let [p1, p2] = players;
            p1.next(None, &be).expect("next");
            p2.next(None, &be).expect("next");
            let [g1, g2] = gradients(&bundle.payoff, p1.current(), p2.current()).expect("gradients");
            p1.observe(&g1, &be).expect("observe");
            p2.observe(&g2, &be).expect("observe");
            p1.advance();
            p2.advance();
        }
        for p in 0..2 {
            pcfr_worst = pcfr_worst.max(max_abs_diff(cfr[p].current(), pcfr[p].current()));
        }
    }
    Outcome {
        pass: dcfr_worst <= IDENTITY_TOL && pcfr_worst <= IDENTITY_TOL,
        detail: format!(
            "clamped DCFR vs CFR+ {dcfr_worst:e}, zero-prediction PCFR vs CFR {pcfr_worst:e} (tol {IDENTITY_TOL:e}, 50 iterations)"
        ),
    }
}

fn kuhn_convergence() -> Outcome {
    let bundle = GameBundle::new(&kuhn_poker()).expect("bundle");
    let be = Backend::serial();
    let config = SolverConfig {
        variant: Variant::CfrPlus,
        gamma: 1.0,
        mode: UpdateMode::Alternating,
    };
    let started = Instant::now();
    let out = run_bundle(&bundle, config, Budget::iterations(10_000), &Checkpoints::Every(100), &be).expect("run");
    let reached = out.records.iter().find(|r| r.exploitability <= KUHN_TARGET).map(|r| r.iteration);
    let last = out.records.last().expect("records").exploitability;
    let [x1, x2] = &out.average;
    let value = expected_value(&bundle.payoff.matrix, x1, x2).expect("value");

    // Enumeration bounds on the game value: player 1's guaranteed payoff
    // with x1 and the most player 2 concedes with x2.
    let [g1, g2] = gradients(&bundle.payoff, x1, x2).expect("gradients");
    let br1 = brute_force_best_response(bundle.tfsdp(Player::One), &g1, 1 << 20).expect("small game");
    let br2 = brute_force_best_response(bundle.tfsdp(Player::Two), &g2, 1 << 20).expect("small game");
    let upper = br1;
    let lower = -br2;
    let br_agree = (br1 - scalar_best_response(bundle.tfsdp(Player::One), &g1).0).abs() <= 1e-12
        && (br2 - scalar_best_response(bundle.tfsdp(Player::Two), &g2).0).abs() <= 1e-12;
    let brackets = lower - 1e-12 <= KUHN_VALUE && KUHN_VALUE <= upper + 1e-12;
    let secs = started.elapsed().as_secs_f64();
    Outcome {
        pass: reached.is_some()
            && (value - KUHN_VALUE).abs() <= KUHN_VALUE_TOL
            && brackets
            && br_agree
            && secs <= KUHN_SECONDS,
        detail: format!(
            "exploitability {last:e} after 10000 iterations, first <= {KUHN_TARGET:e} at {}; value {value:.6} vs {KUHN_VALUE:.6}; enumeration bounds [{lower:.6}, {upper:.6}]{}; {secs:.2}s",
            reached.map_or("never".to_string(), |i| i.to_string()),
            if br_agree { "" } else { " (enumeration disagrees with best response)" }
        ),
    }
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> SparseMatrix {
    let nnz = rng.gen_range(0..=rows.saturating_mul(3));
    let triplets = (0..nnz)
        .map(|_| (rng.gen_range(0..rows), rng.gen_range(0..cols), rng.gen_range(-10.0..10.0)))
        .collect();
    SparseMatrix::from_triplets(rows, cols, triplets).expect("valid triplets")
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.gen_bool(0.1) { 0.0 } else { rng.gen_range(-5.0..5.0) })
        .collect()
}

fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

fn backend_equivalence() -> Outcome {
    let serial = Backend::serial();
    let parallel = Backend::parallel(SPEEDUP_WORKERS).expect("thread pool");
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let cases = 1000;
    for case in 0..cases {
        // Sizes straddle the threshold where the parallel backend splits work.
        let n = if case % 4 == 0 { rng.gen_range(8_000..40_000) } else { rng.gen_range(1..2_000) };
        let m = rng.gen_range(1..n + 2);
        let x = random_vec(&mut rng, n);
        let y = random_vec(&mut rng, n);
        let mut a = vec![0.0; n];
        let mut b = vec![0.0; n];
        match case % 8 {
            0 | 1 => {
                let mat = random_matrix(&mut rng, n, m);
                let v = random_vec(&mut rng, m);
                serial.spmv_into(&mat, &v, &mut a).unwrap();
                parallel.spmv_into(&mat, &v, &mut b).unwrap();
            }
            2 => {
                let op = SparseOperator::new(random_matrix(&mut rng, m, n));
                let v = random_vec(&mut rng, m);
                serial.spmv_t_into(&op, &v, &mut a).unwrap();
                parallel.spmv_t_into(&op, &v, &mut b).unwrap();
            }
            3 => {
                let mat = random_matrix(&mut rng, n, m);
                let v = random_vec(&mut rng, m);
                a.copy_from_slice(&y);
                b.copy_from_slice(&y);
                serial.spmv_acc(&mat, &v, &mut a).unwrap();
                parallel.spmv_acc(&mat, &v, &mut b).unwrap();
            }
            4 => {
                let fallback = random_vec(&mut rng, n);
                serial.hadamard_div_or_default(&x, &y, &fallback, &mut a).unwrap();
                parallel.hadamard_div_or_default(&x, &y, &fallback, &mut b).unwrap();
            }
            5 => {
                let s: f64 = rng.gen_range(-3.0..3.0);
                a.copy_from_slice(&y);
                b.copy_from_slice(&y);
                serial.axpy(s, &x, &mut a).unwrap();
                parallel.axpy(s, &x, &mut b).unwrap();
                serial.scale(s, &mut a);
                parallel.scale(s, &mut b);
            }
            6 => {
                let f = |be: &Backend, out: &mut [f64]| {
                    let mut t = vec![0.0; n];
                    be.add(&x, &y, &mut t).unwrap();
                    be.hadamard_mul(&t, &x, out).unwrap();
                    be.sub(out, &y, &mut t).unwrap();
                    be.positive_part(&t, out).unwrap();
                };
                f(&serial, &mut a);
                f(&parallel, &mut b);
            }
            _ => {
                let idx: Vec<usize> = (0..n).map(|_| rng.gen_range(0..m)).collect();
                let src = random_vec(&mut rng, m);
                serial.gather(&src, &idx, &mut a).unwrap();
                parallel.gather(&src, &idx, &mut b).unwrap();
            }
        }
        worst = worst.max(rel_diff(&a, &b));
    }

    let mut traj_worst = 0.0f64;
    for (game, iters) in [(kuhn_poker(), 1000), (leduc_poker(), 200)] {
        let bundle = GameBundle::new(&game).expect("bundle");
        for variant in variants() {
            let config = SolverConfig::for_variant(variant);
            let budget = Budget::iterations(iters);
            let cp = Checkpoints::OneTwoFive;
            let s = run_bundle(&bundle, config, budget, &cp, &serial).expect("serial run");
            let p = run_bundle(&bundle, config, budget, &cp, &parallel).expect("parallel run");
            for (rs, rp) in s.records.iter().zip(&p.records) {
                traj_worst = traj_worst.max((rs.exploitability - rp.exploitability).abs());
            }
        }
    }
    Outcome {
        pass: worst <= KERNEL_REL_TOL && traj_worst <= TRAJECTORY_TOL,
        detail: format!(
            "{cases} kernel cases max relative difference {worst:e} (tol {KERNEL_REL_TOL:e}); Kuhn/Leduc exploitability trajectories differ by {traj_worst:e} (tol {TRAJECTORY_TOL:e})"
        ),
    }
}

struct SweepPoint {
    nodes: usize,
    work: f64,
    bytes: f64,
    serial_seconds: f64,
    parallel_seconds: f64,
}

fn sweep() -> Vec<SweepPoint> {
    let serial = Backend::serial();
    let parallel = Backend::parallel(SPEEDUP_WORKERS).expect("thread pool");
    let config = SolverConfig::default();
    SWEEP
        .iter()
        .map(|&target| {
            let (_, bundle) = random_game_for_size(target, 0.5, 1).expect("sweep game");
            let iters = if target >= 1e6 { 10 } else { 30 };
            let s = measure(&bundle, config, &serial, 2, iters).expect("serial measurement");
            let p = measure(&bundle, config, &parallel, 2, iters).expect("parallel measurement");
            SweepPoint {
                nodes: bundle.num_nodes(),
                work: s.work_per_iteration as f64,
                bytes: s.peak_bytes as f64,
                serial_seconds: s.mean,
                parallel_seconds: p.mean,
            }
        })
        .collect()
}

/// Coefficient of determination of the least-squares line `y = a x + b`.
fn r_squared(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let a = sxy / sxx;
    let b = my - a * mx;
    let ss_res: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - a * xi - b).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|yi| (yi - my).powi(2)).sum();
    (1.0 - ss_res / ss_tot, a, b)
}

fn linearity(points: &[SweepPoint], what: &str, y: impl Fn(&SweepPoint) -> f64, need: f64) -> Outcome {
    let xs: Vec<f64> = points.iter().map(|p| p.nodes as f64).collect();
    let ys: Vec<f64> = points.iter().map(y).collect();
    let (r2, a, b) = r_squared(&xs, &ys);
    let pairs: Vec<String> = xs.iter().zip(&ys).map(|(x, y)| format!("{x}:{y}")).collect();
    Outcome {
        pass: r2 >= need,
        detail: format!(
            "{what} = {a:.3}|P| + {b:.1}, R^2 = {r2:.6} (need {need}); |P|:{what} {}",
            pairs.join(" ")
        ),
    }
}

fn speedup(points: &[SweepPoint]) -> Outcome {
    let at = |target: f64| {
        points
            .iter()
            .zip(SWEEP)
            .find(|(_, t)| *t == target)
            .map(|(p, _)| (p.nodes, p.serial_seconds / p.parallel_seconds))
            .expect("sweep point")
    };
    let (small_nodes, small) = at(1e4);
    let (big_nodes, big) = at(1e6);
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    Outcome {
        pass: big_nodes >= 1_000_000 && big >= SPEEDUP_MIN && big > small,
        detail: format!(
            "{SPEEDUP_WORKERS} workers on {cores} available cores: speedup {big:.3} at |P| = {big_nodes} (need {SPEEDUP_MIN}), {small:.3} at |P| = {small_nodes}"
        ),
    }
}

fn cli_trend() -> Outcome {
    let dir = tempfile::tempdir().expect("temp dir");
    let csv = dir.path().join("kuhn.csv");
    let status = Command::new(env!("CARGO_BIN_EXE_seqcfr"))
        .args(["solve", "--game", "kuhn", "--variant", "cfr", "--iters", "1000", "--checkpoints", "100,1000", "--out"])
        .arg(&csv)
        .output()
        .expect("run seqcfr");
    if !status.status.success() {
        return Outcome {
            pass: false,
            detail: format!("seqcfr exited with {}", status.status),
        };
    }
    let text = std::fs::read_to_string(&csv).expect("read CSV");
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let it_col = header.iter().position(|h| *h == "iteration");
    let ex_col = header.iter().position(|h| *h == "exploitability");
    let (Some(it_col), Some(ex_col)) = (it_col, ex_col) else {
        return Outcome {
            pass: false,
            detail: format!("unexpected header {header:?}"),
        };
    };
    let mut at = [None, None];
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let e: f64 = f[ex_col].parse().expect("exploitability column");
        match f[it_col] {
            "100" => at[0] = Some(e),
            "1000" => at[1] = Some(e),
            _ => {}
        }
    }
    match at {
        [Some(e100), Some(e1000)] => Outcome {
            pass: e1000 < e100,
            detail: format!("exploitability {e100:e} at 100, {e1000:e} at 1000"),
        },
        _ => Outcome {
            pass: false,
            detail: "checkpoints 100 and 1000 missing from CSV".into(),
        },
    }
}

fn main() -> ExitCode {
    let mut all = true;
    let mut check = |name: &str, o: Outcome| {
        report(name, &o);
        all &= o.pass;
    };
    let (equivalence, polytope) = oracle_runs();
    check("oracle equivalence", equivalence);
    check("polytope invariants", polytope);
    check("variant identities", variant_identities());
    check("kuhn convergence", kuhn_convergence());
    check("backend equivalence", backend_equivalence());
    let points = sweep();
    check("work linearity", linearity(&points, "work", |p| p.work, WORK_R2));
    check("space linearity", linearity(&points, "bytes", |p| p.bytes, SPACE_R2));
    check("parallel speedup", speedup(&points));
    check("exploitability trend", cli_trend());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
