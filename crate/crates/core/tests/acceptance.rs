//! Acceptance criteria. Each criterion prints one `PASS`/`FAIL` line with the
//! measured quantities and its runtime; the process exits nonzero if any fail.

mod common;

use std::time::{Duration, Instant};

use beliefsum::detector::{run, AlarmMode};
use beliefsum::hmm::STOP_INDEX;
use beliefsum::simulator::{
    alarm_times, evaluate, rollout_policy, sample_day, sample_path, trial_rng, DayProfile,
    EventWindow, ScenarioConfig,
};
use beliefsum::solver::{Action, ValueFunction};
use beliefsum::{
    belief_update, bellman_backup, check_convexity, check_threshold_in_sum, default_transition,
    reduced_update, value_iterate, Belief, CostModel, DetectorConfig, RateLadder, ReducedBelief,
    SimplexGrid, SolverOptions, TransitionModel,
};
use common::{dense_filter, dense_p2, max_abs_diff, random_ladder, random_simplex, shiryaev};
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

struct Outcome {
    pass: bool,
    detail: String,
}

fn person() -> (RateLadder, TransitionModel) {
    (
        RateLadder::new(vec![0.001, 5.0, 10.0, 15.0, 20.0, 25.0, 65.0]).unwrap(),
        default_transition(5, 1.0, 1.0).unwrap(),
    )
}

fn random_counts<R: Rng>(rng: &mut R, rates: &[f64], len: usize) -> Vec<u64> {
    let top = rates[rates.len() - 1] * 1.5 + 5.0;
    (0..len).map(|_| rng.random_range(0..top as u64)).collect()
}

/// Belief over (A, 0, 1..N, N+1) with no stop mass and the given abnormal
/// masses; the normal mass is split at random.
fn random_continue_belief<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let mut b = random_simplex(rng, n + 2);
    b.insert(STOP_INDEX, 0.0);
    b
}

// 1. Full filter against the dense matrix oracle.
fn filter_oracle() -> Outcome {
    let mut rng = trial_rng(101, 0);
    let mut worst: f64 = 0.0;
    for n in 1..=4 {
        for _ in 0..1000 {
            let rates = random_ladder(&mut rng, n);
            let pbar: Vec<Vec<f64>> = (0..n).map(|_| random_simplex(&mut rng, n + 2)).collect();
            let (al, ah) = (rng.random::<f64>(), rng.random::<f64>());
            let belief = random_simplex(&mut rng, n + 3);
            let y = random_counts(&mut rng, &rates, 1)[0];
            let got = belief_update(
                &Belief::new(belief.clone()).unwrap(),
                y,
                &RateLadder::new(rates.clone()).unwrap(),
                &TransitionModel::new(pbar.clone(), al, ah).unwrap(),
            )
            .unwrap();
            let want = dense_filter(&belief, y, &rates, &dense_p2(&pbar, al, ah));
            worst = worst.max(max_abs_diff(got.probs(), &want));
        }
    }
    Outcome {
        pass: worst < 1e-12,
        detail: format!("4000 triples, max |Δπ| = {worst:.3e} (tol 1e-12)"),
    }
}

// 2. Reduced two-coordinate filter against the full filter.
fn reduction_exact() -> Outcome {
    let mut rng = trial_rng(102, 0);
    let mut worst: f64 = 0.0;
    for seq in 0..200 {
        let n = 1 + seq % 5;
        let rates = random_ladder(&mut rng, n);
        let row = random_simplex(&mut rng, n + 2);
        let ladder = RateLadder::new(rates.clone()).unwrap();
        let model = TransitionModel::new(vec![row.clone(); n], 1.0, 1.0).unwrap();
        let mut full = Belief::new(random_continue_belief(&mut rng, n)).unwrap();
        let mut red = ReducedBelief::new(full.low(), full.high()).unwrap();
        for y in random_counts(&mut rng, &rates, 50) {
            full = belief_update(&full, y, &ladder, &model).unwrap();
            red = reduced_update(red, y, &ladder, &row, 1.0, 1.0).unwrap();
            worst = worst
                .max((full.low() - red.q_low()).abs())
                .max((full.high() - red.q_high()).abs());
        }
    }
    Outcome {
        pass: worst < 1e-10,
        detail: format!("200 sequences x 50 steps, max marginal gap = {worst:.3e} (tol 1e-10)"),
    }
}

// 3. Sum sufficiency with leaky abnormal states, then the solver's threshold.
fn sum_sufficiency() -> Outcome {
    const LATTICE: f64 = (1u64 << 40) as f64;
    let mut rng = trial_rng(103, 0);
    let mut worst: f64 = 0.0;
    let mut rounded: f64 = 0.0;
    for seq in 0..200 {
        let n = 1 + seq % 5;
        let rates = random_ladder(&mut rng, n);
        let row = random_simplex(&mut rng, n + 2);
        let ladder = RateLadder::new(rates.clone()).unwrap();
        let mut s: f64 = rng.random();
        for y in random_counts(&mut rng, &rates, 50) {
            // Splits on a 2^-40 lattice so both pairs have bit-identical sums.
            let k = (s * LATTICE).floor() as u64;
            let (i, j) = (rng.random_range(0..=k), rng.random_range(0..=k));
            let split = |i: u64| {
                ReducedBelief::new(i as f64 / LATTICE, (k - i) as f64 / LATTICE).unwrap()
            };
            let ua = reduced_update(split(i), y, &ladder, &row, 0.5, 0.5).unwrap();
            let ub = reduced_update(split(j), y, &ladder, &row, 0.5, 0.5).unwrap();
            worst = worst
                .max((ua.q_low() - ub.q_low()).abs())
                .max((ua.q_high() - ub.q_high()).abs());

            let (u, v) = (rng.random::<f64>(), rng.random::<f64>());
            let pa = ReducedBelief::new(s * u, s * (1.0 - u)).unwrap();
            let pb = ReducedBelief::new(s * v, s * (1.0 - v)).unwrap();
            let qa = reduced_update(pa, y, &ladder, &row, 0.5, 0.5).unwrap();
            let qb = reduced_update(pb, y, &ladder, &row, 0.5, 0.5).unwrap();
            rounded = rounded
                .max((qa.q_low() - qb.q_low()).abs())
                .max((qa.q_high() - qb.q_high()).abs());
            s = ua.sum();
        }
    }
    let (ladder, _) = person();
    let model = default_transition(5, 0.5, 0.5).unwrap();
    let grid = SimplexGrid::new(200).unwrap();
    let cost = CostModel::new(1.0, 0.05).unwrap();
    let sol = value_iterate(&grid, &cost, &ladder, &model, &SolverOptions::default()).unwrap();
    let rep = check_threshold_in_sum(&sol.policy, &grid);
    Outcome {
        pass: worst < 1e-12 && rep.passes && sol.value.converged,
        detail: format!(
            "max pair gap = {worst:.3e} (tol 1e-12, rounded splits {rounded:.1e}); M=200 solve converged={} in {} iterations, \
             threshold-in-sum={} A*={} mixed levels={:?}",
            sol.value.converged,
            sol.value.iterations,
            rep.passes,
            rep.threshold.map_or("n/a".into(), |a| format!("{a:.4}")),
            rep.mixed_levels
        ),
    }
}

// 4. Convex stop regions across a cost sweep.
fn convexity_sweep() -> Outcome {
    let (ladder, model) = person();
    let grid = SimplexGrid::new(200).unwrap();
    let mut converged = 0;
    let mut bad = Vec::new();
    for cf in [0.1, 1.0, 10.0] {
        for cd in [0.1, 1.0, 10.0] {
            let cost = CostModel::new(cf, cd).unwrap();
            let sol =
                value_iterate(&grid, &cost, &ladder, &model, &SolverOptions::default()).unwrap();
            if !sol.value.converged {
                continue;
            }
            converged += 1;
            let rep = check_convexity(&sol.policy, &grid);
            if !rep.convex {
                bad.push(format!("({cf},{cd}): {} violations", rep.violations.len()));
            }
        }
    }
    Outcome {
        pass: converged == 9 && bad.is_empty(),
        detail: format!("M=200, {converged}/9 converged, non-convex: {bad:?}"),
    }
}

// 5. Value iteration soundness and Monte Carlo check of the value.
fn value_iteration_soundness() -> Outcome {
    let (ladder, model) = person();
    let grid = SimplexGrid::new(100).unwrap();
    let cost = CostModel::new(1.0, 0.05).unwrap();
    let opts = SolverOptions::default();

    let mut v = ValueFunction::stop_immediately(&grid, &cost);
    let mut monotone = true;
    for _ in 0..opts.max_iter {
        let next = bellman_backup(&v, &grid, &cost, &ladder, &model).unwrap();
        monotone &= next.values.iter().zip(&v.values).all(|(a, b)| a <= b);
        let done = next.sup_norm_residual < opts.tol;
        v = next;
        if done {
            break;
        }
    }
    let sol = value_iterate(&grid, &cost, &ladder, &model, &opts).unwrap();
    let edge_ok = (0..grid.len())
        .filter(|&k| grid.level(k) == grid.resolution())
        .all(|k| sol.value.values[k] == 0.0 && sol.policy.actions[k] == Action::Stop);

    let mut pick = trial_rng(105, 0);
    let mut worst_z: f64 = 0.0;
    let mut failures = 0;
    let mut truncated = 0;
    for i in 0..20 {
        let k = pick.random_range(0..grid.len());
        let (l, h) = grid.point(k);
        let summary = rollout_policy(
            &sol.operator,
            &sol.value.values,
            &ladder,
            &model,
            ReducedBelief::new(l, h).unwrap(),
            10_000,
            1_000 + i,
            10_000,
        )
        .unwrap();
        truncated += summary.truncated;
        let gap = (summary.mean_cost - sol.value.values[k]).abs();
        let z = if summary.std_error > 0.0 {
            gap / summary.std_error
        } else if gap < 1e-12 {
            0.0
        } else {
            f64::INFINITY
        };
        if z > 2.0 {
            failures += 1;
            println!(
                "    point ({l:.2}, {h:.2}): V = {:.5}, rollout {:.5} ± {:.5} ({z:.2} SE)",
                sol.value.values[k], summary.mean_cost, summary.std_error
            );
        }
        worst_z = worst_z.max(z);
    }
    Outcome {
        pass: monotone && edge_ok && failures == 0,
        detail: format!(
            "monotone={monotone}, s=1 edge zero/stop={edge_ok}, rollouts: {failures}/20 points \
             beyond 2 SE (worst {worst_z:.2} SE, {truncated} truncated)"
        ),
    }
}

// 6. Change-point law and per-state count means of the simulator.
fn simulator_statistics() -> Outcome {
    let (ladder, model) = person();
    let scenario = ScenarioConfig::new(ladder.clone(), model, 200, 106).unwrap();
    let paths = 100_000u64;
    const BINS: usize = 20;
    let mut hist = [0f64; BINS + 1];
    let mut total = 0f64;
    let mut censored = 0;
    let mut sums = [0f64; 7];
    let mut visits = [0f64; 7];
    for t in 0..paths {
        let p = sample_path(&scenario, &mut trial_rng(scenario.seed, t)).unwrap();
        match p.change_point {
            Some(tc) => {
                total += tc as f64;
                hist[(tc as usize).min(BINS + 1) - 1] += 1.0;
            }
            None => censored += 1,
        }
        for (&x, &y) in p.states.iter().zip(&p.counts) {
            sums[x] += y as f64;
            visits[x] += 1.0;
        }
    }
    let q: f64 = 2.0 / 7.0;
    let n = paths as f64;
    let mut chi2 = 0.0;
    for (k, &obs) in hist.iter().enumerate() {
        let prob = if k < BINS {
            q * (1.0 - q).powi(k as i32)
        } else {
            (1.0 - q).powi(BINS as i32)
        };
        chi2 += (obs - n * prob).powi(2) / (n * prob);
    }
    let critical = ChiSquared::new(BINS as f64).unwrap().inverse_cdf(0.99);
    let mean = total / n;
    let mut worst_z: f64 = 0.0;
    for s in 0..7 {
        let rate = ladder.rate(s);
        let z = (sums[s] / visits[s] - rate).abs() / (rate / visits[s]).sqrt();
        worst_z = worst_z.max(z);
    }
    let mean_ok = (mean - 3.5).abs() <= 0.035;
    Outcome {
        pass: censored == 0 && chi2 <= critical && mean_ok && worst_z <= 3.0,
        detail: format!(
            "chi2 = {chi2:.2} (df {BINS}, 1% critical {critical:.2}), mean change point = {mean:.4} \
             (3.5 ± 1%), worst per-state count-mean deviation = {worst_z:.2} SE (limit 3)"
        ),
    }
}

// 7. Threshold monotonicity of alarms and false alarms.
fn detector_monotonicity() -> Outcome {
    let (ladder, model) = person();
    let scenario = ScenarioConfig::new(ladder.clone(), model.clone(), 200, 107).unwrap();
    let det = DetectorConfig::new(ladder, model, 0.5, 0.5)
        .unwrap()
        .with_report_sum(true)
        .with_mode(AlarmMode::StopAtAlarm);
    let thresholds: Vec<f64> = (0..10).map(|k| 0.05 + 0.1 * k as f64).collect();
    let rep = evaluate(&scenario, &det, 1000, &thresholds).unwrap();
    let fa: Vec<f64> = rep.operating_points.iter().map(|p| p.false_alarm_fraction).collect();
    let fa_ok = fa.windows(2).all(|w| w[1] <= w[0]);
    let mut path_violations = 0;
    for t in 0..1000 {
        let p = sample_path(&scenario, &mut trial_rng(scenario.seed, t)).unwrap();
        let alarms = alarm_times(&p.counts, &det, &thresholds).unwrap();
        let never = u64::MAX;
        if alarms.windows(2).any(|w| w[0].unwrap_or(never) > w[1].unwrap_or(never)) {
            path_violations += 1;
        }
    }
    let fa_text: Vec<String> = fa.iter().map(|f| format!("{f:.3}")).collect();
    Outcome {
        pass: fa_ok && path_violations == 0,
        detail: format!(
            "false-alarm fractions [{}], paths with decreasing alarm time: {path_violations}/1000",
            fa_text.join(", ")
        ),
    }
}

// 8. Event day versus no-event days.
fn event_day_protocol() -> Outcome {
    let (ladder, model) = person();
    let det = DetectorConfig::new(ladder.clone(), model.clone(), 0.5, 0.8)
        .unwrap()
        .with_report_sum(true);
    let (start, end) = (500, 2000);
    let event = DayProfile {
        slots: 3000,
        event: Some(EventWindow { start, end, state: 6 }),
    };
    let day = sample_day(&ladder, &model, &event, &mut trial_rng(108, 0)).unwrap();
    let stats: Vec<f64> = run(&day.counts, &det).unwrap().records.iter().map(|r| r.statistic).collect();
    let first = (start..end).find(|&s| stats[s] > 0.8);
    let sustained = first.is_some_and(|f| f <= start + 20 && stats[f..end].iter().all(|&s| s > 0.8));

    let quiet = DayProfile {
        slots: 3000,
        event: None,
    };
    let mut above = 0usize;
    let mut days_with_alarm = 0;
    for d in 0..100 {
        let day = sample_day(&ladder, &model, &quiet, &mut trial_rng(108, 1 + d)).unwrap();
        let out = run(&day.counts, &det).unwrap();
        above += out.records.iter().filter(|r| r.statistic > 0.8).count();
        days_with_alarm += usize::from(out.alarm_step.is_some());
    }
    let fa = above as f64 / 300_000.0;
    Outcome {
        pass: sustained && fa <= 0.05,
        detail: format!(
            "first crossing at slot {} (event starts {start}), sustained through {end}: {sustained}; \
             no-event slots above 0.8: {:.4}% (limit 5%), no-event days with any crossing: {days_with_alarm}/100",
            first.map_or("none".into(), |f| f.to_string()),
            100.0 * fa
        ),
    }
}

// 9. Single normal state, increase-only: the statistic is the Shiryaev posterior.
fn classical_limit() -> Outcome {
    let mut rng = trial_rng(109, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let rates = random_ladder(&mut rng, 1);
        let rho: f64 = rng.random_range(0.001..0.5);
        let ladder = RateLadder::new(rates.clone()).unwrap();
        let model = TransitionModel::new(vec![vec![0.0, 1.0 - rho, rho]], 1.0, 1.0).unwrap();
        let det = DetectorConfig::new(ladder, model, 0.0, 0.99).unwrap();
        let ys = random_counts(&mut rng, &rates, 100);
        let mut masses = (1.0, 0.0);
        for rec in run(&ys, &det).unwrap().records {
            masses = shiryaev(masses, rec.count, rho, rates[1], rates[2]);
            worst = worst.max((rec.statistic - masses.1).abs());
        }
    }
    Outcome {
        pass: worst < 1e-10,
        detail: format!("200 sequences x 100 steps, max |stat - Shiryaev| = {worst:.3e} (tol 1e-10)"),
    }
}

fn main() {
    type Criterion = (&'static str, &'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 9] = [
        ("AC1", "filter matches dense oracle", Duration::from_secs(10), filter_oracle),
        ("AC2", "reduced filter is exact", Duration::from_secs(10), reduction_exact),
        ("AC3", "sum sufficiency and threshold in sum", Duration::from_secs(300), sum_sufficiency),
        ("AC4", "convex stop regions over cost sweep", Duration::from_secs(1800), convexity_sweep),
        ("AC5", "value iteration soundness", Duration::from_secs(1800), value_iteration_soundness),
        ("AC6", "simulator statistics", Duration::from_secs(600), simulator_statistics),
        ("AC7", "detector threshold monotonicity", Duration::from_secs(600), detector_monotonicity),
        ("AC8", "event day protocol", Duration::from_secs(60), event_day_protocol),
        ("AC9", "classical two-state limit", Duration::from_secs(60), classical_limit),
    ];
    let mut failed = 0;
    for (id, name, limit, check) in criteria {
        let t = Instant::now();
        let out = check();
        let elapsed = t.elapsed();
        let in_time = elapsed <= limit;
        let pass = out.pass && in_time;
        failed += usize::from(!pass);
        println!(
            "{} {id} {name}: {} [{:.1}s, limit {}s{}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            limit.as_secs(),
            if in_time { "" } else { ", over time" }
        );
    }
    println!("acceptance: {}/9 criteria passed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
