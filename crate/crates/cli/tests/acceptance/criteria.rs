use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use maxaffine::experiment::{
    run_phase_grid, run_trace_experiment, stats, ExperimentGrid, GridResult, InitMethod, SolverOverrides, TraceConfig,
    TraceResult, TrialSettings,
};
use maxaffine::metrics::relative_error;
use maxaffine::objective::gradient;
use maxaffine::rng::rng_from_seed;
use maxaffine::solvers::cell_least_squares;
use maxaffine::theory::{self, min_eigenvalue_of_rows, worst_subset_min_eig, TheoryInputs};
use maxaffine::{assign_cells, Algorithm, Dataset, ModelParams};
use rand::Rng;

use crate::oracles;
use crate::Outcome;

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Vec<Vec<f64>> {
    (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-scale..scale)).collect()).collect()
}

fn within_budget(start: Instant, budget: Duration) -> (bool, String) {
    let used = start.elapsed();
    (used <= budget, format!("runtime {:.1}s / {}s", used.as_secs_f64(), budget.as_secs()))
}

// 1 ---------------------------------------------------------------------------

/// Central-difference step.
const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-5;
/// Instances whose top-two score gap falls below this are redrawn, so the
/// finite-difference stencil never crosses a cell boundary.
const SAFE_MARGIN: f64 = 1e-3;

pub fn gradient_finite_differences() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(101);
    let mut worst: f64 = 0.0;
    let mut instances = 0;
    while instances < 100 {
        let k = rng.random_range(1..=4);
        let d = rng.random_range(1..=10);
        let n = rng.random_range(1..=50);
        let blocks = random_matrix(&mut rng, k, d + 1, 2.0);
        let xs = random_matrix(&mut rng, n, d, 2.0);
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        if oracles::min_margin(&blocks, &xs) < SAFE_MARGIN {
            continue;
        }
        instances += 1;
        let params = ModelParams::from_blocks(&blocks).unwrap();
        let data = Dataset::from_rows(&xs, ys.clone(), 0.0).unwrap();
        let g = gradient(&params, &data).unwrap();
        let mut diff = 0.0;
        let mut idx = 0;
        for j in 0..k {
            for c in 0..=d {
                let mut plus = blocks.clone();
                let mut minus = blocks.clone();
                plus[j][c] += FD_STEP;
                minus[j][c] -= FD_STEP;
                let fd = (oracles::loss(&plus, &xs, &ys) - oracles::loss(&minus, &xs, &ys)) / (2.0 * FD_STEP);
                diff += (fd - g.as_slice()[idx]).powi(2);
                idx += 1;
            }
        }
        worst = worst.max(diff.sqrt() / g.norm().max(1e-12));
    }
    let (fast, rt) = within_budget(start, Duration::from_secs(10));
    Outcome::new(worst <= FD_TOL && fast, format!("max relative error {worst:.2e} (tol {FD_TOL:e}) over 100 instances; {rt}"))
}

// 2 ---------------------------------------------------------------------------

pub fn oracle_equivalences() -> Outcome {
    let mut rng = rng_from_seed(202);
    let mut failures = Vec::new();

    // cell assignment, including forced ties from duplicated pieces
    let mut assign_ok = true;
    for t in 0..200 {
        let k = rng.random_range(1..=6);
        let d = rng.random_range(1..=6);
        let n = rng.random_range(1..=60);
        let mut blocks = random_matrix(&mut rng, k, d + 1, 1.0);
        if t % 3 == 0 && k > 1 {
            let src = rng.random_range(0..k);
            let dst = rng.random_range(0..k);
            blocks[dst] = blocks[src].clone();
        }
        let xs = random_matrix(&mut rng, n, d, 2.0);
        let params = ModelParams::from_blocks(&blocks).unwrap();
        let data = Dataset::from_rows(&xs, vec![0.0; n], 0.0).unwrap();
        let part = assign_cells(&params, &data).unwrap();
        let expect: Vec<usize> = xs.iter().map(|x| oracles::first_argmax(&blocks, x)).collect();
        assign_ok &= part.assignment == expect;
    }
    if !assign_ok {
        failures.push("assign_cells");
    }

    // relative error against full enumeration, bit for bit
    let mut rel_ok = true;
    for _ in 0..60 {
        let k = rng.random_range(1..=8);
        let d = rng.random_range(1..=3);
        let truth = random_matrix(&mut rng, k, d + 1, 1.0);
        let est = random_matrix(&mut rng, k, d + 1, 1.0);
        let lib = relative_error(&ModelParams::from_blocks(&est).unwrap(), &ModelParams::from_blocks(&truth).unwrap())
            .unwrap()
            .rel_error;
        rel_ok &= lib.to_bits() == oracles::relative_error(&est, &truth).to_bits();
    }
    if !rel_ok {
        failures.push("relative_error");
    }

    // per-cell least squares against a dense normal-equations solve
    let mut ols_worst: f64 = 0.0;
    for _ in 0..50 {
        let d = rng.random_range(1..=10);
        let n = rng.random_range(d + 5..=80);
        let xs = random_matrix(&mut rng, n, d, 2.0);
        let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let data = Dataset::from_rows(&xs, ys.clone(), 0.0).unwrap();
        let rows: Vec<usize> = (0..n).filter(|i| i % 4 != 1).collect();
        let lib = cell_least_squares(&data, &rows);
        let sub_x: Vec<Vec<f64>> = rows.iter().map(|&i| xs[i].clone()).collect();
        let sub_y: Vec<f64> = rows.iter().map(|&i| ys[i]).collect();
        let want = oracles::ols(&sub_x, &sub_y);
        let num: f64 = lib.iter().zip(&want).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = want.iter().map(|v| v * v).sum::<f64>().sqrt();
        ols_worst = ols_worst.max(num / den);
    }
    if ols_worst > 1e-10 {
        failures.push("cell_least_squares");
    }

    // worst-subset eigenvalue: exact against enumeration of the same subsets,
    // and against every admissible size with an independent eigen-solver
    let mut subset_exact = true;
    let mut subset_worst: f64 = 0.0;
    for _ in 0..40 {
        let d = rng.random_range(1..=3);
        let n = rng.random_range(d + 1..=10);
        let alpha = [0.3, 0.5, 0.7, 0.9][rng.random_range(0..4)];
        let xs = random_matrix(&mut rng, n, d, 1.5);
        let data = Dataset::from_rows(&xs, vec![0.0; n], 0.0).unwrap();
        let lib = worst_subset_min_eig(&data, alpha).unwrap();
        let size = (alpha * n as f64).ceil() as usize;
        let same_size = oracles::combinations(n, size)
            .iter()
            .map(|rows| min_eigenvalue_of_rows(&data, rows))
            .fold(f64::INFINITY, f64::min);
        subset_exact &= lib.value.to_bits() == same_size.to_bits();
        let all_sizes = (size..=n)
            .flat_map(|s| oracles::combinations(n, s))
            .map(|rows| oracles::jacobi_min_eigenvalue(oracles::lifted_gram(&xs, &rows)))
            .fold(f64::INFINITY, f64::min);
        subset_worst = subset_worst.max((lib.value - all_sizes).abs() / all_sizes.abs().max(1.0));
    }
    if !subset_exact || subset_worst > 1e-9 {
        failures.push("worst_subset_min_eig");
    }

    Outcome::new(
        failures.is_empty(),
        format!(
            "assign_cells exact: {assign_ok}; relative_error exact: {rel_ok}; OLS max rel err {ols_worst:.1e} (tol 1e-10); \
             subset min-eig exact: {subset_exact}, vs independent eigensolver {subset_worst:.1e}{}",
            if failures.is_empty() { String::new() } else { format!("; failed: {failures:?}") }
        ),
    )
}

// 3 ---------------------------------------------------------------------------

fn perturb_settings(sigma: f64, rho: f64) -> TrialSettings {
    TrialSettings { sigma, init: InitMethod::Perturb { rho }, ..TrialSettings::default() }
}

pub fn noiseless_recovery() -> Outcome {
    let start = Instant::now();
    let cfg = TraceConfig {
        k: 3,
        d: 50,
        n: 6000,
        trials: 50,
        seed: 3,
        algorithms: Algorithm::ALL.to_vec(),
        target_log10: -8.0,
        settings: perturb_settings(0.0, 0.1),
    };
    let res = run_trace_experiment(&cfg).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for a in &res.algorithms {
        let hits = a.trials.iter().filter(|t| t.final_log10 <= -8.0).count();
        pass &= hits >= 45;
        parts.push(format!("{} {hits}/50", a.algorithm));
    }
    let (fast, rt) = within_budget(start, Duration::from_secs(300));
    Outcome::new(pass && fast, format!("trials reaching log10 err <= -8 (need 45): {}; {rt}", parts.join(", ")))
}

// 4 ---------------------------------------------------------------------------

/// Sample sizes `50 * 2^(i/4)`: doubling `d` moves a threshold by exactly four steps.
fn n_axis() -> Vec<usize> {
    (0..16).map(|i| (50.0 * 2f64.powf(i as f64 / 4.0)).round() as usize).collect()
}

fn phase_grid(d: Vec<usize>, k: Vec<usize>) -> ExperimentGrid {
    ExperimentGrid {
        n: n_axis(),
        n_scale: vec![],
        d,
        k,
        trials: 50,
        algorithms: Algorithm::ALL.to_vec(),
        seed: 2024,
        success_log10: -6.0,
        threshold_rate: 0.5,
        settings: TrialSettings {
            stop_log10: Some(-8.0),
            gd: SolverOverrides { max_iters: Some(3000), ..SolverOverrides::default() },
            sgd: SolverOverrides { max_iters: Some(30000), ..SolverOverrides::default() },
            am: SolverOverrides { max_iters: Some(100), ..SolverOverrides::default() },
            ..perturb_settings(0.0, 0.1)
        },
    }
}

/// Rows whose success counts drop by more than one trial anywhere along `n`.
fn non_monotone_rows(res: &GridResult, rows: &[(usize, usize)]) -> Vec<String> {
    let mut bad = Vec::new();
    for &(d, k) in rows {
        for alg in Algorithm::ALL {
            let succ: Vec<usize> = res.row(d, k, alg).iter().map(|c| c.successes).collect();
            let ok = (0..succ.len()).all(|i| (i + 1..succ.len()).all(|j| succ[j] + 1 >= succ[i]));
            if !ok {
                bad.push(format!("{alg}(d={d},k={k}): {succ:?}"));
            }
        }
    }
    bad
}

pub fn phase_transition_shape() -> Outcome {
    let start = Instant::now();
    let by_d = run_phase_grid(&phase_grid(vec![25, 50, 100], vec![3])).unwrap();
    let by_k = run_phase_grid(&phase_grid(vec![50], vec![2, 3, 4])).unwrap();
    let mut notes = Vec::new();
    let mut pass = true;

    let mut bad = non_monotone_rows(&by_d, &[(25, 3), (50, 3), (100, 3)]);
    bad.extend(non_monotone_rows(&by_k, &[(50, 2), (50, 3), (50, 4)]));
    if !bad.is_empty() {
        pass = false;
        notes.push(format!("non-monotone rows {bad:?}"));
    }

    let mut ratio_notes = Vec::new();
    for alg in [Algorithm::Gd, Algorithm::Sgd] {
        let stars: Vec<Option<usize>> = [25, 50, 100].iter().map(|&d| by_d.threshold(d, 3, alg)).collect();
        for w in stars.windows(2) {
            match (w[0], w[1]) {
                (Some(a), Some(b)) => {
                    let r = b as f64 / a as f64;
                    pass &= (1.0..=3.0).contains(&r);
                    ratio_notes.push(format!("{alg} {a}->{b} (x{r:.2})"));
                }
                _ => {
                    pass = false;
                    ratio_notes.push(format!("{alg} missing threshold {stars:?}"));
                }
            }
        }
    }
    notes.push(format!("n*(d) doubling: {}", ratio_notes.join(", ")));

    let mut order = Vec::new();
    let rows = [(&by_d, 25, 3), (&by_d, 50, 3), (&by_d, 100, 3), (&by_k, 50, 2), (&by_k, 50, 3), (&by_k, 50, 4)];
    for (res, d, k) in rows {
        let (s, g, a) = (res.threshold(d, k, Algorithm::Sgd), res.threshold(d, k, Algorithm::Gd), res.threshold(d, k, Algorithm::Am));
        let ok = matches!((s, g), (Some(s), Some(g)) if s <= g);
        pass &= ok;
        order.push(format!("(d={d},k={k}) sgd {s:?} gd {g:?} am {a:?}"));
    }
    notes.push(format!("n*: {}", order.join("; ")));
    let (fast, rt) = within_budget(start, Duration::from_secs(1800));
    notes.push(rt);
    Outcome::new(pass && fast, notes.join("; "))
}

// 5 ---------------------------------------------------------------------------

fn gd_noisy_errors(n: usize) -> Vec<f64> {
    let cfg = TraceConfig {
        k: 3,
        d: 50,
        n,
        trials: 50,
        seed: 5,
        algorithms: vec![Algorithm::Gd],
        target_log10: -6.0,
        settings: TrialSettings {
            gd: SolverOverrides { max_iters: Some(1500), record_every: Some(50), ..SolverOverrides::default() },
            ..perturb_settings(0.1, 0.1)
        },
    };
    run_trace_experiment(&cfg).unwrap().algorithms[0].trials.iter().map(|t| 10f64.powf(t.final_log10)).collect()
}

pub fn noisy_consistency() -> Outcome {
    let start = Instant::now();
    let small = stats::median(&gd_noisy_errors(4000));
    let large = stats::median(&gd_noisy_errors(16000));
    let ratio = small / large;
    let (fast, rt) = within_budget(start, Duration::from_secs(600));
    Outcome::new(
        (2.6..=6.2).contains(&ratio) && fast,
        format!("median rel err n=4000 {small:.3e}, n=16000 {large:.3e}, ratio {ratio:.2} (need [2.6, 6.2]); {rt}"),
    )
}

// 6 ---------------------------------------------------------------------------

/// A median trace has reached its floor once it is within this many decades of it.
const FLOOR_MARGIN: f64 = 0.05;

fn sgd_noisy_trace(m: usize) -> TraceResult {
    let cfg = TraceConfig {
        k: 4,
        d: 50,
        n: 1500,
        trials: 50,
        seed: 6,
        algorithms: vec![Algorithm::Sgd],
        target_log10: -2.0,
        settings: TrialSettings {
            sigma: 0.1,
            batch_size: m,
            // the widest admissible neighborhood, so both batch sizes have a long way to their floors
            init: InitMethod::Perturb { rho: 0.25 },
            sgd: SolverOverrides { max_iters: Some(1000), record_every: Some(1), tol: Some(0.0), ..SolverOverrides::default() },
            ..TrialSettings::default()
        },
    };
    run_trace_experiment(&cfg).unwrap()
}

pub fn batch_size_tradeoff() -> Outcome {
    let start = Instant::now();
    let mut floors = Vec::new();
    let mut reach = Vec::new();
    let mut reach_ms = Vec::new();
    for m in [32, 128] {
        let res = sgd_noisy_trace(m);
        let a = &res.algorithms[0];
        let finals: Vec<f64> = a.trials.iter().map(|t| t.final_log10).collect();
        let floor = stats::median(&finals);
        let hit = a.points.iter().find(|p| p.median_log10 <= floor + FLOOR_MARGIN).unwrap();
        floors.push(floor);
        reach.push(hit.iteration);
        reach_ms.push(hit.mean_time_ms);
    }
    let lower_floor = floors[1] < floors[0];
    let faster = reach[0] < reach[1];
    let (fast, rt) = within_budget(start, Duration::from_secs(600));
    Outcome::new(
        lower_floor && faster && fast,
        format!(
            "median final log10 err m=32 {:.3}, m=128 {:.3} (m=128 lower: {lower_floor}); iterations to floor m=32 {}, \
             m=128 {} (m=32 fewer: {faster}); mean solver time to floor m=32 {:.2}ms, m=128 {:.2}ms; {rt}",
            floors[0], floors[1], reach[0], reach[1], reach_ms[0], reach_ms[1]
        ),
    )
}

// 7 ---------------------------------------------------------------------------

pub fn runtime_ordering() -> Outcome {
    let start = Instant::now();
    let cfg = TraceConfig {
        k: 3,
        d: 200,
        n: 4000,
        trials: 50,
        seed: 7,
        algorithms: Algorithm::ALL.to_vec(),
        target_log10: -6.0,
        settings: TrialSettings { stop_log10: Some(-6.0), ..perturb_settings(0.0, 0.1) },
    };
    let res = run_trace_experiment(&cfg).unwrap();
    let times = |alg: Algorithm| -> Vec<f64> {
        res.algorithms.iter().find(|a| a.algorithm == alg).unwrap().trials.iter().map(|t| t.time_to_target_ms.unwrap_or(f64::INFINITY)).collect()
    };
    let (sgd, gd, am) = (times(Algorithm::Sgd), times(Algorithm::Gd), times(Algorithm::Am));
    let wins = (0..50).filter(|&t| sgd[t] < gd[t] && sgd[t] < am[t]).count();
    let crossing = |alg: Algorithm| {
        let a = res.algorithms.iter().find(|a| a.algorithm == alg).unwrap();
        a.points.iter().find(|p| p.median_log10 <= -6.0).map(|p| p.mean_time_ms)
    };
    let (fast, rt) = within_budget(start, Duration::from_secs(900));
    Outcome::new(
        wins >= 40 && fast,
        format!(
            "SGD first to log10 err -6 in {wins}/50 trials (need 40); median-trace crossing ms: sgd {:?}, gd {:?}, am {:?}; {rt}",
            crossing(Algorithm::Sgd).map(|v| (v * 100.0).round() / 100.0),
            crossing(Algorithm::Gd).map(|v| (v * 100.0).round() / 100.0),
            crossing(Algorithm::Am).map(|v| (v * 100.0).round() / 100.0),
        ),
    )
}

// 8 ---------------------------------------------------------------------------

fn cli(args: &[&str], workers: usize) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_maxaffine"))
        .args(args)
        .env("MAXAFFINE_WORKERS", workers.to_string())
        .output()
        .expect("run maxaffine")
}

/// Directory contents with wall-clock columns and the creation timestamp removed.
fn normalized(dir: &Path) -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    files.sort();
    files
        .into_iter()
        .map(|p| {
            let text = std::fs::read_to_string(&p).unwrap();
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let body = if name.ends_with(".csv") {
                let header: Vec<&str> = text.lines().next().unwrap_or("").split(',').collect();
                let keep: Vec<usize> = (0..header.len()).filter(|&i| !header[i].ends_with("_ms")).collect();
                text.lines()
                    .map(|l| {
                        let f: Vec<&str> = l.split(',').collect();
                        keep.iter().map(|&i| f[i]).collect::<Vec<_>>().join(",")
                    })
                    .collect::<Vec<_>>()
                    .join("\n")
            } else {
                text.lines().filter(|l| !l.trim_start().starts_with("\"created_unix_s\"")).collect::<Vec<_>>().join("\n")
            };
            (name, body)
        })
        .collect()
}

pub fn cli_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    let p = |s: &str| root.join(s).to_string_lossy().into_owned();
    std::fs::write(
        root.join("fit.toml"),
        "algorithm = \"sgd\"\nk = 3\nbatch_size = 32\nmax_iters = 400\nseed = 9\n[init]\nmethod = \"perturb\"\nrho = 0.1\n",
    )
    .unwrap();
    std::fs::write(
        root.join("trace.toml"),
        "k = 2\nd = 8\nn = 300\ntrials = 6\nseed = 4\nsigma = 0.05\n[sgd]\nmax_iters = 2000\n",
    )
    .unwrap();
    std::fs::write(
        root.join("grid.toml"),
        "n = [20, 40, 80]\nd = [5, 10]\nk = [2]\ntrials = 5\nseed = 8\nstop_log10 = -8.0\n[sgd]\nmax_iters = 3000\n",
    )
    .unwrap();
    std::fs::write(
        root.join("diag.toml"),
        "k = 2\nd = 2\nn = 10\nsigma = 0.1\nmc_samples = 20000\nc = 1.0\nc_prime = 1.0\nnu = 0.9\n",
    )
    .unwrap();

    let runs: Vec<(&str, Vec<String>)> = vec![
        ("generate", vec!["generate", "--k", "3", "--d", "6", "--n", "400", "--sigma", "0.1", "--seed", "11"].into_iter().map(String::from).collect()),
        ("fit", vec![]),
        ("trace", vec!["trace".into(), "--config".into(), p("trace.toml")]),
        ("phase-grid", vec!["phase-grid".into(), "--config".into(), p("grid.toml")]),
        ("diagnose", vec![]),
    ];
    let mut mismatches = Vec::new();
    for (name, base) in runs {
        let mut outputs = Vec::new();
        for (rep, workers) in [(0, 1), (1, 1), (2, 3)] {
            let out_dir = root.join(format!("{name}_{rep}"));
            std::fs::create_dir_all(&out_dir).unwrap();
            let od = out_dir.to_string_lossy().into_owned();
            let args: Vec<String> = match name {
                "generate" => base.iter().cloned().chain(["--out".into(), format!("{od}/data.csv")]).collect(),
                "fit" => {
                    let gen = root.join("generate_0");
                    vec![
                        "fit".into(),
                        "--data".into(),
                        gen.join("data.csv").to_string_lossy().into_owned(),
                        "--truth".into(),
                        gen.join("data.json").to_string_lossy().into_owned(),
                        "--config".into(),
                        p("fit.toml"),
                        "--out-dir".into(),
                        od.clone(),
                    ]
                }
                "diagnose" => vec!["diagnose".into(), "--config".into(), p("diag.toml"), "--out".into(), format!("{od}/report.json")],
                _ => base.iter().cloned().chain(["--out-dir".into(), od.clone()]).collect(),
            };
            let argv: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
            let out = cli(&argv, workers);
            if !out.status.success() {
                return Outcome::new(false, format!("`{name}` failed: {}", String::from_utf8_lossy(&out.stderr)));
            }
            outputs.push(normalized(&out_dir));
        }
        if outputs.iter().any(|o| o.is_empty()) {
            mismatches.push(format!("{name}: no output"));
        }
        if outputs[0] != outputs[1] {
            mismatches.push(format!("{name}: rerun differs"));
        }
        if outputs[0] != outputs[2] {
            mismatches.push(format!("{name}: worker count changes output"));
        }
    }
    Outcome::new(
        mismatches.is_empty(),
        if mismatches.is_empty() {
            "generate, fit, trace, phase-grid, diagnose identical across reruns and 1 vs 3 workers \
             (excluding *_ms columns and created_unix_s)"
                .to_string()
        } else {
            mismatches.join("; ")
        },
    )
}

// 9 ---------------------------------------------------------------------------

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

pub fn theory_formulas() -> Outcome {
    let mut rng = rng_from_seed(909);
    let mut worst = [0.0f64; 4];
    for _ in 0..20 {
        let k = rng.random_range(2..=8usize);
        let d = rng.random_range(5..=200usize);
        let n = rng.random_range(2 * d..=50 * d);
        let inputs = TheoryInputs {
            k,
            d,
            n,
            sigma: rng.random_range(0.01..1.0),
            delta: rng.random_range(0.001..0.3),
            pi_min: rng.random_range(0.3..=1.0) / k as f64,
            kappa: rng.random_range(0.5..2.0),
            zeta: rng.random_range(0.3..1.0),
            gamma: 1.0,
            r_const: rng.random_range(0.5..2.0),
        };
        let o = oracles::Rates {
            k: k as f64,
            d: d as f64,
            n: n as f64,
            sigma: inputs.sigma,
            delta: inputs.delta,
            pi_min: inputs.pi_min,
            kappa: inputs.kappa,
            zeta: inputs.zeta,
            r: inputs.r_const,
        };
        let c = rng.random_range(0.1..10.0);
        let c_prime = rng.random_range(0.1..10.0);
        let nu = rng.random_range(0.1..0.99);
        let t = rng.random_range(0..200u32);
        let init_dist = rng.random_range(0.0..5.0);
        let m = rng.random_range(1..=512usize);
        let got = [
            theory::compute_rho(&inputs).unwrap(),
            theory::sample_complexity_gd(&inputs, c).unwrap(),
            theory::gd_error_bound(&inputs, t, init_dist, nu, c_prime).unwrap(),
            theory::sgd_error_floor(&inputs, m, c_prime).unwrap(),
        ];
        let want = [o.rho(), o.sample_complexity(c), o.gd_bound(t, init_dist, nu, c_prime), o.sgd_floor(m as f64, c_prime)];
        for i in 0..4 {
            worst[i] = worst[i].max(rel(got[i], want[i]));
        }
    }
    let pass = worst.iter().all(|&w| w <= 1e-12);
    Outcome::new(
        pass,
        format!(
            "max relative error over 20 inputs: rho {:.1e}, sample complexity {:.1e}, GD bound {:.1e}, SGD floor {:.1e} (tol 1e-12)",
            worst[0], worst[1], worst[2], worst[3]
        ),
    )
}
