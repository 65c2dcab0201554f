use std::path::Path;

use maxaffine::datagen::{estimate_geometry, gen_dataset};
use maxaffine::experiment::{run_phase_grid, run_trace_experiment, stats, ExperimentGrid, TraceConfig, TruthKind};
use maxaffine::io::{self, DatasetSidecar, SCHEMA_VERSION};
use maxaffine::rng::derive_seed;
use maxaffine::theory::{self, MAX_EXHAUSTIVE_N};
use maxaffine::{solvers, CovariateLaw, Error, Result, TheoryInputs};
use serde::Serialize;

use crate::config::{self, DiagnoseConfig, FitConfig};

fn split_path(path: &Path) -> Result<(&Path, String)> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::Input(format!("invalid output path {}", path.display())))?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    Ok((dir, name.to_string()))
}

#[allow(clippy::too_many_arguments)]
pub fn generate(
    k: usize,
    d: usize,
    n: usize,
    sigma: f64,
    law: CovariateLaw,
    truth_kind: TruthKind,
    seed: u64,
    out: &Path,
) -> Result<()> {
    let truth = truth_kind.generate(k, d, derive_seed(seed, &[1]))?;
    let data = gen_dataset(&truth, law, n, sigma, derive_seed(seed, &[2]))?;
    let sidecar = DatasetSidecar { schema_version: SCHEMA_VERSION, k, d, n, sigma, law, seed, truth };
    let (dir, name) = split_path(out)?;
    let (_, side_name) = split_path(&out.with_extension("json"))?;
    io::write_all_or_nothing(dir, &[(name, io::dataset_to_csv(&data)?), (side_name, io::to_json_pretty(&sidecar)?)])
}

pub fn fit(data_path: &Path, truth_path: Option<&Path>, config_path: &Path, out_dir: &Path) -> Result<()> {
    let cfg: FitConfig = config::load(config_path)?;
    let sidecar = truth_path.map(io::read_sidecar).transpose()?;
    let sigma = sidecar.as_ref().map_or(0.0, |s| s.sigma);
    let data = io::read_dataset(data_path, sigma)?;
    if let Some(d) = cfg.d {
        if d != data.d() {
            return Err(Error::Input(format!("config has d={d} but the dataset has d={}", data.d())));
        }
    }
    let truth = sidecar.map(|s| s.truth);
    if let Some(t) = &truth {
        if t.k() != cfg.k || t.d() != data.d() {
            return Err(Error::Input(format!(
                "truth has shape (k={}, d={}), expected (k={}, d={})",
                t.k(),
                t.d(),
                cfg.k,
                data.d()
            )));
        }
    }
    let init = cfg.init.initialize(truth.as_ref(), &data, cfg.k, derive_seed(cfg.seed, &[3]))?;
    let run = solvers::run(&data, &init, &cfg.solver_config(), truth.as_ref())?;
    io::write_all_or_nothing(
        out_dir,
        &[
            ("params.json".into(), io::to_json_pretty(&run.final_params)?),
            ("trace.csv".into(), io::trace_to_csv(&run.trace)?),
        ],
    )
}

#[derive(Serialize)]
struct AlgorithmSummary {
    algorithm: solvers::Algorithm,
    median_final_log10_rel_error: f64,
    p90_final_log10_rel_error: f64,
    diverged: usize,
    reached_target: usize,
}

#[derive(Serialize)]
struct TraceSummary<'a> {
    config: &'a TraceConfig,
    algorithms: Vec<AlgorithmSummary>,
}

pub fn trace(config_path: &Path, out_dir: &Path) -> Result<()> {
    let cfg: TraceConfig = config::load(config_path)?;
    let result = run_trace_experiment(&cfg)?;
    let mut files = Vec::new();
    let mut trials = String::from("algorithm,trial,final_log10_rel_error,iterations,diverged,time_to_target_ms\n");
    let mut summaries = Vec::new();
    for a in &result.algorithms {
        files.push((format!("trace_{}.csv", a.algorithm), io::trace_points_to_csv(&a.points)?));
        for t in &a.trials {
            trials.push_str(&format!(
                "{},{},{},{},{},{}\n",
                a.algorithm,
                t.trial,
                io::fmt_f64(t.final_log10),
                t.iterations,
                t.diverged,
                t.time_to_target_ms.map(io::fmt_f64).unwrap_or_default(),
            ));
        }
        let finals: Vec<f64> = a.trials.iter().map(|t| t.final_log10).collect();
        summaries.push(AlgorithmSummary {
            algorithm: a.algorithm,
            median_final_log10_rel_error: stats::median(&finals),
            p90_final_log10_rel_error: stats::percentile(&finals, 90.0),
            diverged: a.trials.iter().filter(|t| t.diverged).count(),
            reached_target: a.trials.iter().filter(|t| t.time_to_target_ms.is_some()).count(),
        });
    }
    files.push(("trials.csv".into(), trials));
    files.push(("summary.json".into(), io::summary_json(&TraceSummary { config: &cfg, algorithms: summaries })?));
    io::write_all_or_nothing(out_dir, &files)
}

#[derive(Serialize)]
struct GridSummary<'a> {
    config: &'a ExperimentGrid,
    thresholds: &'a [maxaffine::experiment::RowThreshold],
}

pub fn phase_grid(config_path: &Path, out_dir: &Path) -> Result<()> {
    let grid: ExperimentGrid = config::load(config_path)?;
    let result = run_phase_grid(&grid)?;
    io::write_all_or_nothing(
        out_dir,
        &[
            ("grid.csv".into(), io::grid_to_csv(&result)?),
            ("summary.json".into(), io::summary_json(&GridSummary { config: &grid, thresholds: &result.thresholds })?),
        ],
    )
}

#[derive(Serialize)]
struct BoundPoint {
    t: u32,
    value: f64,
}

#[derive(Serialize)]
struct FloorPoint {
    m: usize,
    value: f64,
    batch_branch: f64,
    sample_branch: f64,
}

#[derive(Serialize)]
struct SubsetSection {
    alpha: f64,
    covariates: Vec<Vec<f64>>,
    #[serde(flatten)]
    report: theory::SubsetEigReport,
}

#[derive(Serialize)]
struct DiagnoseReport<'a> {
    config: &'a DiagnoseConfig,
    geometry: maxaffine::GroundTruthGeometry,
    theory_inputs: TheoryInputs,
    rho: f64,
    neighborhood_radius: f64,
    sample_complexity_gd: f64,
    gd_noise_term: f64,
    gd_bound: Vec<BoundPoint>,
    sgd_floors: Vec<FloorPoint>,
    subset_min_eig: Option<SubsetSection>,
}

pub fn diagnose(config_path: &Path, out: &Path) -> Result<()> {
    let cfg: DiagnoseConfig = config::load(config_path)?;
    let truth = cfg.truth.generate(cfg.k, cfg.d, derive_seed(cfg.seed, &[1]))?;
    let geometry = estimate_geometry(&truth, cfg.law, cfg.mc_samples, derive_seed(cfg.seed, &[4]))?;
    let mut inputs = TheoryInputs::new(cfg.k, cfg.d, cfg.n, cfg.sigma, cfg.delta, geometry.pi_min, geometry.kappa);
    inputs.zeta = cfg.zeta.unwrap_or_else(|| cfg.law.nominal_zeta());
    inputs.gamma = cfg.gamma;
    inputs.r_const = cfg.r_const;

    let rho = theory::compute_rho(&inputs)?;
    let radius = rho * geometry.kappa;
    let init_dist = cfg.init_dist.unwrap_or((cfg.k as f64).sqrt() * radius);
    let gd_bound = (0..=cfg.bound_iters)
        .map(|t| Ok(BoundPoint { t, value: theory::gd_error_bound(&inputs, t, init_dist, cfg.nu, cfg.c_prime)? }))
        .collect::<Result<Vec<_>>>()?;
    let sgd_floors = cfg
        .batch_sizes
        .iter()
        .map(|&m| {
            let (batch_branch, sample_branch) = theory::sgd_floor_branches(&inputs, m)?;
            Ok(FloorPoint { m, value: theory::sgd_error_floor(&inputs, m, cfg.c_prime)?, batch_branch, sample_branch })
        })
        .collect::<Result<Vec<_>>>()?;

    let subset_min_eig = if cfg.n <= MAX_EXHAUSTIVE_N {
        let data = gen_dataset(&truth, cfg.law, cfg.n, cfg.sigma, derive_seed(cfg.seed, &[2]))?;
        let report = theory::worst_subset_min_eig(&data, cfg.alpha)?;
        let covariates = (0..data.n()).map(|i| data.x(i).to_vec()).collect();
        Some(SubsetSection { alpha: cfg.alpha, covariates, report })
    } else {
        None
    };

    let report = DiagnoseReport {
        config: &cfg,
        geometry,
        theory_inputs: inputs,
        rho,
        neighborhood_radius: radius,
        sample_complexity_gd: theory::sample_complexity_gd(&inputs, cfg.c)?,
        gd_noise_term: theory::gd_noise_term(&inputs, cfg.c_prime)?,
        gd_bound,
        sgd_floors,
        subset_min_eig,
    };
    let (dir, name) = split_path(out)?;
    io::write_all_or_nothing(dir, &[(name, io::summary_json(&report)?)])
}
