//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so every criterion reports even when an
//! earlier one fails. The process exits non-zero if any criterion fails.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::Mutex;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hidden_rewards::agent::{
    agent_exploration_prob, measure_pt, scaled_inaccuracy, windowed_rate, AgentKind,
};
use hidden_rewards::bounds::{cdf_uniform_difference, compute_k_tilde};
use hidden_rewards::engine::{
    replicate_seed, run_episode, run_experiment, EpisodeSpec, PrincipalKind,
};
use hidden_rewards::estimator::{brute_force_grid, solve_exact_lp, total_loss};
use hidden_rewards::history::History;
use hidden_rewards::model::{argmax_sum, GameConfig, IncentiveRange, Preset, SearchBox};
use hidden_rewards::principal::{exploration_prob, oracle_incentives, SolveMode};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

const RANGE: IncentiveRange = IncentiveRange {
    lo: -20.0,
    hi: 60.0,
};

fn grid_equivalence() -> Verdict {
    const RES: f64 = 0.05;
    let start = Instant::now();
    let sbox = SearchBox::new(-70.0, 70.0);
    let mut rng = ChaCha8Rng::seed_from_u64(0xACCE);
    let mut worst_ratio: f64 = 0.0;
    let mut bad = Vec::new();
    for inst in 0..50 {
        let t: usize = rng.random_range(2..=8);
        // half the instances are consistent with a hidden s, half use arbitrary choices
        let hidden: Vec<f64> = (0..3)
            .map(|a| {
                if a == 0 {
                    0.0
                } else {
                    rng.random_range(-30.0..30.0)
                }
            })
            .collect();
        let choices: Vec<(Vec<f64>, usize)> = (1..t)
            .map(|_| {
                let pi: Vec<f64> = (0..3).map(|_| rng.random_range(-20.0..60.0)).collect();
                let arm = if inst % 2 == 0 {
                    argmax_sum(&hidden, &pi)
                } else {
                    rng.random_range(0..3)
                };
                (pi, arm)
            })
            .collect();
        let h = History::from_choices(3, RANGE, choices).unwrap();
        let lp = solve_exact_lp(&h, &sbox).unwrap().objective;
        let grid = brute_force_grid(&h, &sbox, RES).unwrap().objective;
        let tol = 2.0 * (t - 1) as f64 * RES + 1e-6;
        let gap = grid - lp;
        worst_ratio = worst_ratio.max(gap.abs() / tol);
        // the grid can never beat the exact optimum by more than rounding
        if gap.abs() > tol || gap < -1e-9 {
            bad.push(format!("instance {inst}: lp {lp} grid {grid}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        bad.is_empty() && secs < 60.0,
        format!(
            "50 instances, worst gap/tolerance {worst_ratio:.2e}, {secs:.1} s{}",
            if bad.is_empty() {
                String::new()
            } else {
                format!(", {bad:?}")
            }
        ),
    )
}

fn zero_loss_identity() -> Verdict {
    let mut cfg = Preset::Table1N5.config();
    cfg.horizon = 100;
    let model = Preset::Table1N5.model();
    let s0 = model.s0();
    let spec = EpisodeSpec {
        principal: PrincipalKind::EpsilonGreedy,
        agent: AgentKind::Perfect,
        solve: SolveMode::Hybrid {
            every: 50,
            subgradient_iters: 20,
        },
    };
    let mut worst_loss: f64 = 0.0;
    let mut worst_obj: f64 = 0.0;
    for i in 0..20 {
        let trace = run_episode(&cfg, &model, &spec, replicate_seed(11, i)).unwrap();
        let h = History::from_choices(
            cfg.n,
            cfg.incentive_range(),
            trace.steps.iter().map(|s| (s.pi.as_slice(), s.chosen_arm)),
        )
        .unwrap();
        worst_loss = worst_loss.max(total_loss(&s0, &h).unwrap());
        worst_obj = worst_obj.max(solve_exact_lp(&h, &cfg.search_box()).unwrap().objective);
    }
    verdict(
        worst_loss == 0.0 && worst_obj == 0.0,
        format!("20 traces of 100 steps: max total_loss(s0) = {worst_loss:e}, max LP objective = {worst_obj:e}"),
    )
}

/// Independent arm scan: pay each arm's gap to the best arm plus the margin
/// and keep the best net value.
fn scan_oracle(theta0: &[f64], s0: &[f64], varsigma: f64) -> (usize, f64, f64) {
    let top = s0.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut best = (0, 0.0, f64::NEG_INFINITY);
    for j in 0..s0.len() {
        let pay = top - s0[j] + varsigma;
        if theta0[j] - pay > best.2 {
            best = (j, pay, theta0[j] - pay);
        }
    }
    best
}

fn oracle_derivation() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    // (preset, pinned 0-based arm, pinned payment before varsigma)
    for (preset, arm, base) in [
        (Preset::Table1N5, 3usize, 10.0),
        (Preset::Table1N10, 7, 30.0),
    ] {
        let cfg = preset.config();
        let model = preset.model();
        let s0 = model.s0();
        let d = oracle_incentives(&model.theta0, &s0, cfg.varsigma, cfg.incentive_range());
        let mut expected = vec![0.0; cfg.n];
        expected[arm] = base + cfg.varsigma;
        let scan = scan_oracle(&model.theta0, &s0, cfg.varsigma);
        let this = d.target_arm == Some(arm)
            && d.pi == expected
            && scan.0 == arm
            && scan.1 == expected[arm];
        ok &= this;
        notes.push(format!(
            "{preset}: arm {} pays {}",
            d.target_arm.map_or(0, |a| a + 1),
            d.pi[arm]
        ));
    }
    verdict(ok, notes.join("; "))
}

fn oracle_self_regret() -> Verdict {
    let spec = EpisodeSpec {
        principal: PrincipalKind::Oracle,
        agent: AgentKind::Perfect,
        solve: SolveMode::Exact,
    };
    let mut worst: f64 = 0.0;
    let mut runs = 0;
    for preset in Preset::ALL {
        for horizon in [10, 1000, 10_000] {
            for seed in [0u64, 1, 0xDEAD_BEEF] {
                let mut cfg = preset.config();
                cfg.horizon = horizon;
                let trace = run_episode(&cfg, &preset.model(), &spec, seed).unwrap();
                let step_worst = trace
                    .steps
                    .iter()
                    .map(|s| s.regret_increment.abs())
                    .fold(0.0, f64::max);
                worst = worst.max(step_worst).max(trace.summary.regret_final.abs());
                runs += 1;
            }
        }
    }
    verdict(
        worst == 0.0,
        format!("{runs} episodes, max |regret| = {worst:e}"),
    )
}

struct SweepPoint {
    horizon: usize,
    linf: Vec<f64>,
    regret: Vec<f64>,
    seconds: f64,
}

struct Sweep {
    points: Vec<SweepPoint>,
    // per replicate of the longest horizon: (t, missed) for every step
    indicators: Vec<Vec<(usize, bool)>>,
}

fn desk_sweep() -> Sweep {
    let model = Preset::Table1N5.model();
    let s0 = model.s0();
    let spec = EpisodeSpec::default();
    let horizons = [1000, 5000, 10_000];
    let mut points = Vec::new();
    let mut indicators = Vec::new();
    for &horizon in &horizons {
        let mut cfg = Preset::Table1N5.config();
        cfg.horizon = horizon;
        cfg.replicates = 5;
        let keep = Mutex::new(Vec::new());
        let start = Instant::now();
        let table = run_experiment(&cfg, &model, &spec, |_, _, trace| {
            if horizon == *horizons.last().unwrap() {
                keep.lock().unwrap().push(measure_pt(trace.choices(), &s0));
            }
            Ok(())
        })
        .unwrap();
        let seconds = start.elapsed().as_secs_f64();
        let ok: Vec<_> = table
            .rows
            .iter()
            .map(|r| r.outcome.as_ref().unwrap())
            .collect();
        points.push(SweepPoint {
            horizon,
            linf: ok.iter().map(|m| m.linf_final.unwrap()).collect(),
            regret: ok.iter().map(|m| m.regret_final).collect(),
            seconds,
        });
        if horizon == *horizons.last().unwrap() {
            indicators = keep.into_inner().unwrap();
        }
    }
    Sweep { points, indicators }
}

fn concentration_trend(sweep: &Sweep) -> Verdict {
    let med: Vec<f64> = sweep
        .points
        .iter()
        .map(|p| median(p.linf.clone()))
        .collect();
    let secs: f64 = sweep.points.iter().map(|p| p.seconds).sum();
    let monotone = med.windows(2).all(|w| w[1] <= w[0]);
    let halved = med[2] <= 0.5 * med[0];
    verdict(
        monotone && halved && secs < 900.0,
        format!(
            "median linf {:.3} / {:.3} / {:.3} (non-increasing: {monotone}, T=1e4 <= half of T=1e3: {halved}), sweep {secs:.0} s",
            med[0], med[1], med[2]
        ),
    )
}

fn regret_sublinearity(sweep: &Sweep) -> Verdict {
    let med: Vec<f64> = sweep
        .points
        .iter()
        .map(|p| median(p.regret.clone()))
        .collect();
    let per_step: Vec<f64> = sweep
        .points
        .iter()
        .zip(&med)
        .map(|(p, r)| r / p.horizon as f64)
        .collect();
    let ratio = med[2] / med[1];
    let decreasing = per_step.windows(2).all(|w| w[1] < w[0]);
    verdict(
        ratio < 2.0 && decreasing,
        format!(
            "median regret {:.0} / {:.0} / {:.0}, ratio 1e4:5e3 = {ratio:.3}, per step {:.2} / {:.2} / {:.2}",
            med[0], med[1], med[2], per_step[0], per_step[1], per_step[2]
        ),
    )
}

fn assumption_two(sweep: &Sweep) -> Verdict {
    let mut scaled = Vec::new();
    for t in [1000usize, 5000, 10_000] {
        let (mut misses, mut total) = (0.0, 0usize);
        for ind in &sweep.indicators {
            let window = ind.iter().filter(|(s, _)| *s > t / 2 && *s <= t).count();
            misses += windowed_rate(ind, t / 2, t).unwrap() * window as f64;
            total += window;
        }
        scaled.push(scaled_inaccuracy(misses / total as f64, t));
    }
    let ok = scaled.windows(2).all(|w| w[1] <= w[0]);
    verdict(
        ok,
        format!(
            "scaled miss rate over (t/2, t] at t = 1e3, 5e3, 1e4: {:.3} / {:.3} / {:.3}",
            scaled[0], scaled[1], scaled[2]
        ),
    )
}

fn formula_units() -> Verdict {
    let mut fails = Vec::new();
    if compute_k_tilde(1.0).unwrap() != 2 {
        fails.push("k_tilde(1)".to_string());
    }
    if compute_k_tilde(2.0).unwrap() != 14 {
        fails.push("k_tilde(2)".to_string());
    }
    let (lo, hi) = (-20.0, 60.0);
    let w = hi - lo;
    if cdf_uniform_difference(0.0, lo, hi) != 0.5 {
        fails.push("cdf(0)".into());
    }
    if cdf_uniform_difference(w, lo, hi) != 1.0 || cdf_uniform_difference(-w, lo, hi) != 0.0 {
        fails.push("cdf(+-W)".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut diffs: Vec<f64> = (0..1_000_000)
        .map(|_| rng.random_range(lo..hi) - rng.random_range(lo..hi))
        .collect();
    diffs.sort_by(|a, b| a.total_cmp(b));
    let m = diffs.len() as f64;
    let sup = diffs
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let f = cdf_uniform_difference(d, lo, hi);
            (f - i as f64 / m).abs().max((f - (i + 1) as f64 / m).abs())
        })
        .fold(0.0, f64::max);
    if sup >= 5e-3 {
        fails.push(format!("Monte Carlo sup error {sup}"));
    }
    verdict(
        fails.is_empty(),
        format!(
            "k_tilde(1) = 2, k_tilde(2) = 14, cdf exact points, MC sup error {sup:.2e}{}",
            if fails.is_empty() {
                String::new()
            } else {
                format!("; failed: {fails:?}")
            }
        ),
    )
}

fn exploration_boundary() -> Verdict {
    let first_below = (1..=1000)
        .find(|&t| exploration_prob(t, 5.0, 0.2) < 1.0)
        .unwrap();
    let pr_ok = (1..=214).all(|t| exploration_prob(t, 5.0, 0.2) == 1.0);
    let pr_next = exploration_prob(215, 5.0, 0.2) < 1.0;
    let ag_ok = (1..=100).all(|t| agent_exploration_prob(t, 10.0) == 1.0);
    verdict(
        pr_ok && pr_next && ag_ok,
        format!(
            "principal: eps = 1 up to t = {}, eps(214) = {:.5}, eps(215) < 1: {pr_next}; agent: eps = 1 for t <= 100: {ag_ok}",
            first_below - 1,
            exploration_prob(214, 5.0, 0.2)
        ),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::TempDir::new().unwrap();
    let cfg_path = dir.path().join("config.json");
    fs::write(&cfg_path, config_json(500, 42)).unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let code = |args: &[&std::ffi::OsStr]| {
        let mut argv: Vec<&std::ffi::OsStr> = vec!["hidden-rewards".as_ref()];
        argv.extend_from_slice(args);
        hidden_rewards_cli::run(argv)
    };
    let ok = ExitCode::SUCCESS;
    if code(&[
        "run".as_ref(),
        "--config".as_ref(),
        cfg_path.as_os_str(),
        "--out".as_ref(),
        first.as_os_str(),
    ]) != ok
    {
        return verdict(false, "first run failed");
    }
    let manifest = first.join("manifest.json");
    if code(&[
        "run".as_ref(),
        "--config".as_ref(),
        manifest.as_os_str(),
        "--out".as_ref(),
        second.as_os_str(),
    ]) != ok
    {
        return verdict(false, "replay from manifest failed");
    }
    let rel = "table1_n5/500/summary.csv";
    let a = fs::read(first.join(rel)).unwrap();
    let b = fs::read(second.join(rel)).unwrap();
    verdict(
        a == b,
        format!("summary.csv {} bytes, identical: {}", a.len(), a == b),
    )
}

fn config_json(horizon: usize, seed: u64) -> String {
    let cfg: GameConfig = Preset::Table1N5.config();
    format!(
        r#"{{"n":{},"T":{horizon},"r_min":{},"r_max":{},"gamma":{},"theta_max":{},"m_pr":{},"w":{},"m_ag":{},"k":{},"varsigma":{},"sigma2_ag":{},"sigma2_pr":{},"buffer_override":"auto","seed":{seed},"replicates":{}}}"#,
        cfg.n,
        cfg.r_min,
        cfg.r_max,
        cfg.gamma,
        cfg.theta_max,
        cfg.m_pr,
        cfg.w,
        cfg.m_ag,
        cfg.k,
        cfg.varsigma,
        cfg.sigma2_ag,
        cfg.sigma2_pr,
        cfg.replicates
    )
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        }
    }
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters from the harness are not supported;
    // answer the listing request so tooling does not hang.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }

    let mut results: Vec<(&str, Verdict)> = vec![
        (
            "estimator matches brute-force grid",
            guarded(grid_equivalence),
        ),
        ("zero loss at the true rewards", guarded(zero_loss_identity)),
        (
            "oracle incentives for both presets",
            guarded(oracle_derivation),
        ),
        (
            "oracle principal has zero regret",
            guarded(oracle_self_regret),
        ),
    ];

    let sweep = panic::catch_unwind(desk_sweep);
    match &sweep {
        Ok(s) => {
            results.push((
                "estimation error shrinks with T",
                guarded(|| concentration_trend(s)),
            ));
            results.push((
                "regret grows sublinearly",
                guarded(|| regret_sublinearity(s)),
            ));
            results.push((
                "agent inaccuracy decays like sqrt(log 2t / t)",
                guarded(|| assumption_two(s)),
            ));
        }
        Err(_) => {
            for name in [
                "estimation error shrinks with T",
                "regret grows sublinearly",
                "agent inaccuracy decays like sqrt(log 2t / t)",
            ] {
                results.push((name, verdict(false, "sweep panicked")));
            }
        }
    }

    results.push(("bounds and distribution formulas", guarded(formula_units)));
    results.push((
        "exploration schedule boundary",
        guarded(exploration_boundary),
    ));
    results.push(("manifest replay is byte-identical", guarded(determinism)));

    println!();
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!v.pass);
        println!("{tag} [{:>2}] {name}: {}", i + 1, v.detail);
    }
    println!(
        "\nacceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
