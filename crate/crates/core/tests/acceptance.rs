//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::path::Path;
use std::time::{Duration, Instant};

use coprl_core::dist::{CategoricalDist, ConvolveMode};
use coprl_core::env::{uniform_free_point, MazeMap};
use coprl_core::geometry::{Point, Rect};
use coprl_core::harness::{
    run_with_backend, trial_endpoints, write_results, Algorithm, CellSummary, ExperimentConfig, StartGoalMode,
    SUMMARY_CSV, TRIALS_CSV,
};
use coprl_core::lower::{Backend, OracleBackend, ValueBackend};
use coprl_core::planner::{plan, PlanRecord, PlannerConfig, SorbGraph};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_dist(rng: &mut ChaCha8Rng, max_n: usize) -> CategoricalDist {
    let n = rng.gen_range(1..=max_n);
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() })
            .collect();
        if let Ok(d) = CategoricalDist::from_weights(rng.gen_range(-3..4) as f64, 1.0, w) {
            return d;
        }
    }
}

fn config_path(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn oracle_for(cfg: &ExperimentConfig) -> Backend {
    let map = coprl_core::env::load_map(&std::fs::read_to_string(&cfg.map).unwrap()).unwrap();
    Backend::Oracle(OracleBackend::build(&map, cfg.grid_res, cfg.eta).unwrap())
}

fn cell(summary: &[CellSummary], alg: Algorithm, k: Option<f64>, alpha: f64) -> &CellSummary {
    summary
        .iter()
        .find(|c| c.algorithm == alg && c.k == k && c.alpha == alpha)
        .expect("cell present")
}

fn median(mut xs: Vec<Duration>) -> f64 {
    xs.sort();
    let n = xs.len();
    (xs[(n - 1) / 2].as_secs_f64() + xs[n / 2].as_secs_f64()) / 2.0
}

fn c1_convolution_oracle() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let a = random_dist(&mut rng, 64);
        let b = random_dist(&mut rng, 64);
        let c = a.convolve(&b, ConvolveMode::Exact).unwrap();
        let mut brute = vec![0.0; a.len() + b.len() - 1];
        for (i, p) in a.probs().iter().enumerate() {
            for (j, q) in b.probs().iter().enumerate() {
                brute[i + j] += p * q;
            }
        }
        ensure(c.len() == brute.len(), || "support size differs".into())?;
        for (x, y) in c.probs().iter().zip(&brute) {
            worst = worst.max((x - y).abs());
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    ensure(worst <= 1e-12, || format!("max deviation {worst:e}"))?;
    ensure(secs < 10.0, || format!("took {secs:.2} s"))?;
    Ok(format!("max deviation {worst:e} over 1000 pairs in {secs:.3} s"))
}

fn c2_shift_figure() -> Outcome {
    let p = [0.05, 0.1, 0.15, 0.2, 0.25, 0.15, 0.1];
    let d = CategoricalDist::new(0.0, 1.0, p.to_vec()).unwrap();
    let got = d.shift_clamped(2);
    let want = [0.0, 0.0, p[0], p[1], p[2], p[3], p[4] + p[5] + p[6]];
    ensure(got.probs() == want, || format!("{:?}", got.probs()))?;
    ensure(got.len() == 7 && got.v_min() == 0.0, || "support changed".into())?;
    Ok("N=7, shift 2 gives [0, 0, p1, p2, p3, p4, p5+p6+p7]".into())
}

fn c3_cvar() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let d = random_dist(&mut rng, 48);
        let e = d.expectation();
        let c1 = d.cvar_alpha(1.0).unwrap();
        ensure((c1 - e).abs() <= 1e-9, || format!("cvar(1) {c1} vs mean {e}"))?;
        let mut prev = f64::INFINITY;
        for k in 1..=99 {
            let c = d.cvar_alpha(k as f64 / 100.0).unwrap();
            ensure(c <= prev, || format!("cvar rose at alpha {}", k as f64 / 100.0))?;
            prev = c;
        }
    }
    let u = CategoricalDist::uniform(0.0, 1.0, 3);
    let c = u.cvar_alpha(1.0 / 3.0).unwrap();
    ensure((c - 1.5).abs() < 1e-12, || format!("uniform{{0,1,2}} at 1/3 gave {c}"))?;
    Ok(format!("1000 dists; uniform{{0,1,2}} at alpha 1/3 = {c}"))
}

fn c4_metric() -> Outcome {
    let b = OracleBackend::build(&MazeMap::four_rooms(), 1.0, 15.0).unwrap();
    let res = b.grid_res();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let near = |s: Point, rng: &mut ChaCha8Rng| -> Option<Point> {
        let r = rng.gen_range(0.0..b.eta());
        let th = rng.gen_range(0.0..std::f64::consts::TAU);
        let t = Point::new(s.x + r * th.cos(), s.y + r * th.sin());
        (b.map().is_free(t) && b.distance(s, t).is_ok()).then_some(t)
    };
    let mut triples = 0;
    while triples < 1000 {
        let s = uniform_free_point(b.map(), &mut rng);
        let (Some(t), u) = (near(s, &mut rng), None::<Point>) else {
            continue;
        };
        let Some(u) = u.or_else(|| near(t, &mut rng)) else {
            continue;
        };
        let d = |a, c| b.distance(a, c);
        let (Ok(st), Ok(tu), Ok(su)) = (d(s, t), d(t, u), d(s, u)) else {
            continue;
        };
        let (ts, ss) = (d(t, s).unwrap(), d(s, s).unwrap());
        ensure(st >= 0.0 && tu >= 0.0 && su >= 0.0, || "negative distance".into())?;
        ensure(ss <= res, || format!("self distance {ss}"))?;
        ensure((st - ts).abs() <= 2.0 * res, || format!("asymmetry {st} vs {ts}"))?;
        ensure(su <= st + tu + 3.0 * res, || format!("triangle {su} > {st} + {tu}"))?;
        triples += 1;
    }
    Ok(format!("{triples} local triples"))
}

struct PlannerRuns {
    certified: usize,
    solutions: usize,
    runs_with_solution: usize,
    anytime_ok: usize,
    runs: usize,
}

/// 100 seeded planner runs per (K, alpha) cell on both hazard maps.
fn hazard_planner_runs() -> Result<PlannerRuns, String> {
    let regions = StartGoalMode::Regions {
        start: Rect::new(2.0, 2.0, 37.0, 37.0),
        goal: Rect::new(43.0, 43.0, 78.0, 78.0),
    };
    let static_b = OracleBackend::build(&MazeMap::four_rooms_static(), 1.0, 15.0).unwrap();
    let stoch_b = OracleBackend::build(&MazeMap::four_rooms_stochastic(), 1.0, 15.0).unwrap();
    let mut cells: Vec<(&OracleBackend, f64, f64)> = [4.0, 7.0, 10.0].iter().map(|&k| (&static_b, k, 1.0)).collect();
    cells.extend([0.9, 0.5, 0.1].iter().map(|&a| (&stoch_b, 10.0, a)));
    let jobs: Vec<_> = cells.iter().flat_map(|&c| (0..100u64).map(move |s| (c, s))).collect();
    let results: Vec<(usize, usize, bool, bool)> = jobs
        .par_iter()
        .map(|&((b, k, alpha), seed)| {
            let (s, g) = trial_endpoints(b, &regions, None, seed).unwrap();
            let out = plan(b, s, g, &PlannerConfig::constrained(k, alpha, 1000, seed)).unwrap();
            let ok = out.solutions.iter().filter(|p| p.cvar_certificate <= k).count();
            let best_ok = out.best.as_ref().is_none_or(|p| p.cvar_certificate <= k);
            let mono = out.best_history.windows(2).all(|w| w[1] >= w[0]);
            (ok + best_ok as usize, out.solutions.len() + 1, mono, out.best.is_some())
        })
        .collect();
    Ok(PlannerRuns {
        certified: results.iter().map(|r| r.0).sum(),
        solutions: results.iter().map(|r| r.1).sum(),
        runs_with_solution: results.iter().filter(|r| r.3).count(),
        anytime_ok: results.iter().filter(|r| r.2).count(),
        runs: results.len(),
    })
}

fn c5_certificates(runs: &PlannerRuns) -> Outcome {
    ensure(runs.certified == runs.solutions, || {
        format!(
            "{} of {} certificates exceed K",
            runs.solutions - runs.certified,
            runs.solutions
        )
    })?;
    Ok(format!(
        "{} certificates within K across {} runs ({} found a path)",
        runs.solutions, runs.runs, runs.runs_with_solution
    ))
}

fn c6_anytime(runs: &PlannerRuns) -> Outcome {
    ensure(runs.anytime_ok == runs.runs, || {
        format!("{} of {} runs regressed", runs.runs - runs.anytime_ok, runs.runs)
    })?;
    Ok(format!(
        "best R nondecreasing in {} of {} runs",
        runs.anytime_ok, runs.runs
    ))
}

fn c7_no_hazard() -> Outcome {
    let t0 = Instant::now();
    let cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
        "map": Path::new(env!("CARGO_MANIFEST_DIR")).join("../../maps/four_rooms.json"),
        "algorithms": ["cop", "sorb"],
        "backend": "oracle",
        "difficulty": [0.9],
        "trials": 100,
        "iterations": 1000,
        "sorb_nodes": 1000
    }))
    .map_err(|e| e.to_string())?;
    let result = run_with_backend(&cfg, &oracle_for(&cfg)).map_err(|e| e.to_string())?;
    let secs = t0.elapsed().as_secs_f64();
    let horizon = result.rows[0].horizon;
    let cop = cell(&result.summary, Algorithm::Cop, None, 1.0).success_rate;
    let sorb = cell(&result.summary, Algorithm::Sorb, None, 1.0).success_rate;
    ensure(horizon == 100, || format!("horizon {horizon}"))?;
    ensure(cop >= 0.95, || format!("CoP success {cop}"))?;
    ensure(sorb <= cop, || format!("SORB {sorb} beats CoP {cop}"))?;
    ensure(secs < 600.0, || format!("took {secs:.0} s"))?;
    Ok(format!("success CoP {cop:.2}, SORB {sorb:.2}; {secs:.1} s"))
}

fn c8_static_trend() -> Outcome {
    let cfg = ExperimentConfig::load(config_path("static_cost.json")).map_err(|e| e.to_string())?;
    let result = run_with_backend(&cfg, &oracle_for(&cfg)).map_err(|e| e.to_string())?;
    let cells: Vec<&CellSummary> = [4.0, 7.0, 10.0]
        .iter()
        .map(|&k| cell(&result.summary, Algorithm::Cop, Some(k), 1.0))
        .collect();
    let success: Vec<f64> = cells.iter().map(|c| c.success_rate).collect();
    let reward: Vec<f64> = cells
        .iter()
        .map(|c| c.mean_negated_reward.unwrap_or(f64::NAN))
        .collect();
    let viol: Vec<f64> = cells.iter().map(|c| c.violation_pct.unwrap_or(f64::NAN)).collect();
    let detail = format!("success {success:?}, mean -R {reward:.2?}, violations {viol:?}%");
    ensure(success.iter().all(|&s| s >= 0.9), || detail.clone())?;
    ensure(reward.windows(2).all(|w| w[1] <= w[0]), || detail.clone())?;
    ensure(viol.iter().all(|&v| v <= 15.0), || detail.clone())?;
    Ok(detail)
}

fn c9_risk_trend() -> Outcome {
    let cfg = ExperimentConfig::load(config_path("stochastic_cost.json")).map_err(|e| e.to_string())?;
    let result = run_with_backend(&cfg, &oracle_for(&cfg)).map_err(|e| e.to_string())?;
    let cells: Vec<&CellSummary> = [0.9, 0.5, 0.1]
        .iter()
        .map(|&a| cell(&result.summary, Algorithm::Cop, Some(10.0), a))
        .collect();
    let ec: Vec<f64> = cells.iter().map(|c| c.expected_cost.unwrap_or(f64::NAN)).collect();
    let viol: Vec<f64> = cells.iter().map(|c| c.violation_pct.unwrap_or(f64::NAN)).collect();
    let detail = format!("alpha 0.9/0.5/0.1: EC {ec:.2?}, violations {viol:?}%");
    ensure(ec.windows(2).all(|w| w[1] <= w[0]), || detail.clone())?;
    ensure(viol.windows(2).all(|w| w[1] <= w[0]), || detail.clone())?;
    Ok(detail)
}

fn c10_scaling() -> Outcome {
    let map = MazeMap::four_rooms_static();
    let b = OracleBackend::build(&map, 1.0, 15.0).unwrap();
    let regions = StartGoalMode::Regions {
        start: Rect::new(2.0, 2.0, 37.0, 37.0),
        goal: Rect::new(43.0, 43.0, 78.0, 78.0),
    };
    let pairs: Vec<(Point, Point)> = (0..10)
        .map(|s| trial_endpoints(&b, &regions, None, s).unwrap())
        .collect();
    // one run plans the whole seed set
    let time_plan = |n: usize| -> Duration {
        let t0 = Instant::now();
        for (seed, &(s, g)) in pairs.iter().enumerate() {
            let cfg = PlannerConfig::constrained(7.0, 1.0, n, seed as u64);
            std::hint::black_box(plan(&b, s, g, &cfg).unwrap());
        }
        t0.elapsed()
    };
    let time_sorb = |n: usize| -> Vec<Duration> {
        pairs
            .iter()
            .enumerate()
            .map(|(seed, &(s, g))| {
                let t0 = Instant::now();
                std::hint::black_box(SorbGraph::build(&b, s, g, n, b.eta(), seed as u64));
                t0.elapsed()
            })
            .collect()
    };
    // first pass fills the oracle's lazily built distance windows
    time_plan(4000);
    time_sorb(4000);
    // interleaved so that load drift hits both sizes alike
    let (mut runs1, mut runs4) = (Vec::new(), Vec::new());
    for _ in 0..10 {
        runs1.push(time_plan(1000));
        runs4.push(time_plan(4000));
    }
    let (p1, p4) = (median(runs1) / 10.0, median(runs4) / 10.0);
    let (s1, s4) = (median(time_sorb(1000)), median(time_sorb(4000)));
    let (rp, rs) = (p4 / p1, s4 / s1);
    let detail = format!(
        "planner {:.1} -> {:.1} ms per plan (x{rp:.2}); SORB graph {:.0} -> {:.0} ms (x{rs:.2})",
        p1 * 1e3,
        p4 * 1e3,
        s1 * 1e3,
        s4 * 1e3
    );
    ensure(rp <= 6.0 && rs >= 12.0, || detail.clone())?;
    Ok(detail)
}

fn c11_determinism() -> Outcome {
    let b = Backend::Oracle(OracleBackend::build(&MazeMap::four_rooms_stochastic(), 1.0, 15.0).unwrap());
    let record = || {
        let cfg = PlannerConfig::constrained(6.0, 0.5, 800, 17);
        let (s, g) = (Point::new(10.0, 10.0), Point::new(60.0, 60.0));
        let out = plan(&b, s, g, &cfg).unwrap();
        PlanRecord::new(s, g, out.best.as_ref(), &cfg).to_json()
    };
    ensure(record() == record(), || "plan JSON differs".into())?;

    let cfg: ExperimentConfig = serde_json::from_value(serde_json::json!({
        "map": "unused",
        "algorithms": ["cop", "sorb", "grl"],
        "backend": "oracle",
        "k": [6],
        "alpha": [0.5],
        "start_goal": {"mode": "regions", "start": [2, 2, 37, 37], "goal": [43, 43, 78, 78]},
        "horizon": 150,
        "trials": 8,
        "iterations": 500,
        "sorb_nodes": 300
    }))
    .map_err(|e| e.to_string())?;
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut files = Vec::new();
    for d in &dirs {
        let result = run_with_backend(&cfg, &b).map_err(|e| e.to_string())?;
        write_results(&result, d.path()).map_err(|e| e.to_string())?;
        files.push((
            std::fs::read(d.path().join(TRIALS_CSV)).unwrap(),
            std::fs::read(d.path().join(SUMMARY_CSV)).unwrap(),
        ));
    }
    ensure(files[0] == files[1], || "CSV output differs".into())?;
    Ok(format!(
        "plan JSON and {} bytes of CSV identical across runs",
        files[0].0.len() + files[0].1.len()
    ))
}

fn main() {
    // timing runs first, before the parallel criteria load the machine
    let mut results: Vec<(u32, &str, Outcome)> = vec![(10, "scaling profile", c10_scaling())];
    results.push((1, "convolution matches enumeration", c1_convolution_oracle()));
    results.push((2, "accumulated right shift", c2_shift_figure()));
    results.push((3, "CVaR correctness", c3_cvar()));
    results.push((4, "distance metric axioms", c4_metric()));
    let runs = hazard_planner_runs();
    results.push((
        5,
        "certificates within K",
        runs.as_ref().map_err(Clone::clone).and_then(c5_certificates),
    ));
    results.push((
        6,
        "anytime monotonicity",
        runs.as_ref().map_err(Clone::clone).and_then(c6_anytime),
    ));
    results.push((7, "no-hazard success", c7_no_hazard()));
    results.push((8, "static-cost trends", c8_static_trend()));
    results.push((9, "stochastic-cost risk trend", c9_risk_trend()));
    results.push((11, "determinism", c11_determinism()));
    results.sort_by_key(|r| r.0);

    let mut failed = 0;
    for (n, name, outcome) in &results {
        match outcome {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    }
    println!("{} of {} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
