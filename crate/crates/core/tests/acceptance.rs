//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::collections::{HashMap, VecDeque};
use std::process::ExitCode;
use std::time::Instant;

use lwcss::experiment::{
    self, CellResult, ExperimentConfig, OracleSpec, ResultRow, Sigma, Variant, WorkloadSpec,
};
use lwcss::oracles::write_prediction_file;
use lwcss::workload::{self, SinglesDenominator};
use lwcss::{
    Admission, ConstantOracle, Error, ExactWindowCounter, Execution, GapTable, ItemKey, LwcssSketch,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

const ALPHAS: [f64; 3] = [0.6, 1.0, 1.4];
const GRID_WINDOWS: [u64; 2] = [256, 1024];
const GRID_EPS: [f64; 2] = [1.0 / 16.0, 1.0 / 32.0];
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn grid_config(alpha: f64, variant: Variant, oracle: OracleSpec) -> ExperimentConfig {
    ExperimentConfig {
        workload: WorkloadSpec::Zipf {
            universe: 10_000,
            length: 50_000,
            alpha,
        },
        window: GRID_WINDOWS[0],
        eps: GRID_EPS.to_vec(),
        variants: vec![variant],
        oracle,
        seeds: SEEDS.to_vec(),
        id_bytes: 8,
        check_guarantee: true,
        execution: Execution::default(),
    }
}

/// Counts guarantee violations and other failures over a grid run.
fn tally(results: Vec<CellResult>, cells: &mut usize, violations: &mut Vec<String>) {
    for r in results {
        *cells += 1;
        if let Err(cell) = r {
            violations.push(cell.to_string());
        }
    }
}

fn desk_config() -> ExperimentConfig {
    ExperimentConfig::desk_default()
}

fn rows(results: Vec<CellResult>) -> Result<Vec<ResultRow>, String> {
    results
        .into_iter()
        .map(|r| r.map_err(|e| e.to_string()))
        .collect()
}

/// Non-increasing up to at most one adjacent inversion smaller than `tol`.
fn non_increasing(xs: &[f64], tol: f64) -> bool {
    let inversions: Vec<f64> = xs
        .windows(2)
        .map(|p| p[1] - p[0])
        .filter(|&d| d > 0.0)
        .collect();
    inversions.is_empty() || (inversions.len() == 1 && inversions[0] < tol)
}

fn wcss_guarantee() -> Outcome {
    let mut cells = 0;
    let mut bad = Vec::new();
    for alpha in ALPHAS {
        let cfg = grid_config(alpha, Variant::Wcss, OracleSpec::Perfect);
        match experiment::window_sweep(&cfg, &GRID_WINDOWS) {
            Ok(results) => tally(results, &mut cells, &mut bad),
            Err(e) => return outcome(false, format!("alpha={alpha}: {e}")),
        }
    }
    outcome(
        bad.is_empty() && cells == 60,
        format!("{cells} cells, {} failing{}", bad.len(), first(&bad)),
    )
}

fn lwcss_guarantee() -> Outcome {
    let oracles = [
        OracleSpec::Perfect,
        OracleSpec::Constant(false),
        OracleSpec::Constant(true),
        OracleSpec::Flip(0.1),
        OracleSpec::Flip(0.5),
        OracleSpec::Gaussian(Sigma::Absolute(1.0)),
        OracleSpec::Gaussian(Sigma::WindowOver(4.0)),
    ];
    let mut cells = 0;
    let mut bad = Vec::new();
    for oracle in &oracles {
        for alpha in ALPHAS {
            let cfg = grid_config(alpha, Variant::Lwcss, oracle.clone());
            match experiment::window_sweep(&cfg, &GRID_WINDOWS) {
                Ok(results) => tally(results, &mut cells, &mut bad),
                Err(e) => return outcome(false, format!("{oracle} alpha={alpha}: {e}")),
            }
        }
    }
    outcome(
        bad.is_empty() && cells == 420,
        format!(
            "{cells} cells over {} oracles, {} failing{}",
            oracles.len(),
            bad.len(),
            first(&bad)
        ),
    )
}

fn first(errors: &[String]) -> String {
    errors
        .first()
        .map_or_else(String::new, |e| format!("; first: {e}"))
}

fn skip_budget() -> Outcome {
    let n = 10_000;
    let mut worst = 0;
    let mut skipped_total = 0;
    for (w, eps) in [(64u64, 0.25), (256, 1.0 / 16.0), (1024, 1.0 / 32.0)] {
        for alpha in ALPHAS {
            let trace = match workload::gen_zipf(10_000, n, alpha, 7) {
                Ok(t) => t,
                Err(e) => return outcome(false, e.to_string()),
            };
            let mut sk = match LwcssSketch::new(w, eps, ConstantOracle::new(false)) {
                Ok(s) => s,
                Err(e) => return outcome(false, e.to_string()),
            };
            // sliding per-item skip counts over every run of W arrivals
            let mut recent: VecDeque<Option<ItemKey>> = VecDeque::with_capacity(w as usize);
            let mut counts: HashMap<ItemKey, u32> = HashMap::new();
            for &x in trace.items() {
                if recent.len() == w as usize {
                    if let Some(old) = recent.pop_front().flatten() {
                        *counts.get_mut(&old).unwrap() -= 1;
                    }
                }
                let skipped = sk.update(x) == Admission::Skipped;
                recent.push_back(skipped.then_some(x));
                if skipped {
                    skipped_total += 1;
                    let c = counts.entry(x).or_default();
                    *c += 1;
                    worst = worst.max(*c);
                }
            }
        }
    }
    outcome(
        worst <= 2 && skipped_total > 0,
        format!("max skips of one item in any window: {worst}, {skipped_total} skips checked"),
    )
}

/// WCSS RMSE at `memory` bytes, interpolated log-log between the two
/// measured configurations whose peak memory brackets it.
fn wcss_rmse_at_memory(curve: &[(u64, f64)], memory: u64) -> Option<f64> {
    let hi = curve.iter().position(|&(m, _)| m >= memory)?;
    let (m1, r1) = curve[hi];
    if m1 == memory || hi == 0 {
        return (m1 == memory).then_some(r1);
    }
    let (m0, r0) = curve[hi - 1];
    let t = ((memory as f64).ln() - (m0 as f64).ln()) / ((m1 as f64).ln() - (m0 as f64).ln());
    Some((r0.ln() + t * (r1.ln() - r0.ln())).exp())
}

fn matched_memory_accuracy() -> Outcome {
    let mut cfg = desk_config();
    let targets = [1.0 / 32.0, 1.0 / 64.0];
    cfg.eps = targets.to_vec();
    cfg.variants = vec![Variant::Lwcss, Variant::WcssMatched];
    let same_k = match experiment::rmse_run(&cfg)
        .map_err(|e| e.to_string())
        .and_then(rows)
    {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    // the wcss memory curve: eps = 4/k gives exactly k blocks for k | W
    let mut curve_cfg = desk_config();
    curve_cfg.variants = vec![Variant::Wcss];
    curve_cfg.eps = [64.0, 128.0, 256.0, 512.0, 1024.0]
        .iter()
        .map(|k| 4.0 / k)
        .collect();
    let curve_rows = match experiment::rmse_run(&curve_cfg)
        .map_err(|e| e.to_string())
        .and_then(rows)
    {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };

    let mut pass = true;
    let mut detail = Vec::new();
    for eps in targets {
        let mut wins = 0;
        let mut same_k_wins = 0;
        let (mut sum_l, mut sum_w) = (0.0, 0.0);
        for &seed in &cfg.seeds {
            let find = |v| {
                same_k
                    .iter()
                    .find(|r| r.variant == v && r.eps == eps && r.seed == seed)
                    .unwrap()
            };
            let (l, w) = (find(Variant::Lwcss), find(Variant::WcssMatched));
            if l.rmse < w.rmse {
                same_k_wins += 1;
            }
            let mut curve: Vec<(u64, f64)> = curve_rows
                .iter()
                .filter(|r| r.seed == seed)
                .map(|r| (r.memory_bytes, r.rmse.unwrap()))
                .collect();
            curve.sort_by_key(|&(m, _)| m);
            let Some(rw) = wcss_rmse_at_memory(&curve, l.memory_bytes) else {
                return outcome(
                    false,
                    format!("lwcss memory {} outside the wcss curve", l.memory_bytes),
                );
            };
            let rl = l.rmse.unwrap();
            sum_l += rl;
            sum_w += rw;
            if rl < rw {
                wins += 1;
            }
        }
        pass &= wins >= 4;
        detail.push(format!(
            "eps=1/{:.0}: lwcss wins {wins}/5 at matched bytes (mean rmse {:.3} vs {:.3}), {same_k_wins}/5 at equal counters",
            1.0 / eps,
            sum_l / 5.0,
            sum_w / 5.0
        ));
    }
    outcome(pass, detail.join("; "))
}

fn singles_trend() -> Outcome {
    let trace = match workload::gen_zipf(100_000, 1_000_000, 1.0, 0) {
        Ok(t) => t,
        Err(e) => return outcome(false, e.to_string()),
    };
    let frames: Vec<usize> = (6..=14).map(|e| 1 << e).collect();
    match experiment::singles_sweep(trace.items(), &frames, SinglesDenominator::Distinct) {
        Ok(r) => {
            let ratios: Vec<f64> = r.iter().map(|&(_, x)| x).collect();
            let shown: Vec<String> = ratios.iter().map(|x| format!("{x:.3}")).collect();
            outcome(
                non_increasing(&ratios, 0.01),
                format!("ratios [{}]", shown.join(", ")),
            )
        }
        Err(e) => outcome(false, e.to_string()),
    }
}

fn window_trend() -> Outcome {
    let mut cfg = desk_config();
    cfg.eps = vec![1.0 / 32.0];
    cfg.variants = vec![Variant::Wcss];
    let windows = [1u64 << 8, 1 << 10, 1 << 12];
    let rows = match experiment::window_sweep(&cfg, &windows)
        .map_err(|e| e.to_string())
        .and_then(rows)
    {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let means: Vec<f64> = windows
        .iter()
        .map(|&w| {
            let xs: Vec<f64> = rows
                .iter()
                .filter(|r| r.window == w)
                .filter_map(|r| r.rmse)
                .collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        })
        .collect();
    let negated: Vec<f64> = means.iter().map(|m| -m).collect();
    let shown: Vec<String> = windows
        .iter()
        .zip(&means)
        .map(|(w, m)| format!("W={w}: {m:.3}"))
        .collect();
    outcome(
        non_increasing(&negated, 0.01),
        format!("mean rmse {}", shown.join(", ")),
    )
}

fn exact_counter_equivalence() -> Outcome {
    let mut mismatches = 0u64;
    let mut checks = 0u64;
    for stream in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(stream);
        let universe = rng.random_range(1..=40u64);
        let items: Vec<ItemKey> = (0..5000)
            .map(|_| ItemKey::from_raw(rng.random_range(0..universe)))
            .collect();
        for w in [1u64, 7, 64] {
            let mut counter = ExactWindowCounter::new(w);
            for (t, &x) in items.iter().enumerate() {
                counter.update(x);
                let lo = (t + 1).saturating_sub(w as usize);
                let probe = ItemKey::from_raw(rng.random_range(0..universe + 1));
                for y in [x, probe] {
                    let naive = items[lo..=t].iter().filter(|&&z| z == y).count() as u64;
                    checks += 1;
                    if counter.query(y) != naive {
                        mismatches += 1;
                    }
                }
            }
        }
    }
    outcome(
        mismatches == 0,
        format!("{checks} queries, {mismatches} mismatches"),
    )
}

fn throughput_direction() -> Outcome {
    let dir = match tempfile::tempdir() {
        Ok(d) => d,
        Err(e) => return outcome(false, e.to_string()),
    };
    let path = dir.path().join("predictions.txt");
    let mut cfg = desk_config();
    cfg.eps = vec![1.0 / 32.0];
    cfg.seeds = vec![0];
    cfg.variants = vec![Variant::Wcss, Variant::Lwcss];
    cfg.oracle = OracleSpec::File(path.clone());

    // the cycled trace equals the trace itself at desk length
    let prepared = cfg.workload.trace(0).and_then(|t| {
        let t = t.cycled(experiment::MIN_TIMED_OPS);
        let gaps = GapTable::build(t.items())?;
        write_prediction_file(&path, &gaps.labels(cfg.window))?;
        Ok::<_, Error>(())
    });
    if let Err(e) = prepared {
        return outcome(false, e.to_string());
    }
    let rows = match experiment::throughput_run(&cfg, experiment::MIN_TIMED_OPS)
        .map_err(|e| e.to_string())
        .and_then(rows)
    {
        Ok(r) => r,
        Err(e) => return outcome(false, e),
    };
    let get = |v| rows.iter().find(|r| r.variant == v).unwrap();
    let (w, l) = (get(Variant::Wcss), get(Variant::Lwcss));
    let (wu, lu) = (w.updates_per_sec.unwrap(), l.updates_per_sec.unwrap());
    let (wq, lq) = (w.queries_per_sec.unwrap(), l.queries_per_sec.unwrap());
    let update_ratio = lu / wu;
    let query_gap = (lq - wq).abs() / wq.max(lq);
    outcome(
        update_ratio >= 0.3,
        format!(
            "updates/s wcss {wu:.0} lwcss {lu:.0} (ratio {update_ratio:.2}); queries/s wcss {wq:.0} lwcss {lq:.0} ({}within 20%)",
            if query_gap <= 0.2 { "" } else { "not " }
        ),
    )
}

type Check = (&'static str, &'static str, fn() -> Outcome);

fn main() -> ExitCode {
    let criteria: [Check; 8] = [
        ("A1", "wcss guarantee at every arrival", wcss_guarantee),
        ("A2", "lwcss guarantee under every oracle", lwcss_guarantee),
        ("A3", "skip budget under constant-false oracle", skip_budget),
        (
            "A4",
            "lwcss beats wcss at matched memory",
            matched_memory_accuracy,
        ),
        ("A5", "singles ratio falls with frame size", singles_trend),
        ("A6", "wcss rmse grows with window", window_trend),
        (
            "A7",
            "exact counter matches naive recount",
            exact_counter_equivalence,
        ),
        ("A8", "throughput direction", throughput_direction),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let o = check();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        if !o.pass {
            failed += 1;
        }
        println!(
            "{verdict} {id} {name}: {} [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
