use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use kkmeans::clustering::{brute_force_erm, kernel_lloyd, Assignment, Weights};
use kkmeans::fmt::format_float;
use kkmeans::kernel::{gram_matrix, GramMatrix, Spectrum};
use kkmeans::nystrom::{
    landmark_size, nystrom_embed, nystrom_kkmeans_embedded, sample_landmarks_uniform, LandmarkMode, NystromInit,
    NystromOptions, NystromResult,
};
use kkmeans::rademacher::{check_lower_bound, MAX_EXACT_N};
use kkmeans::risk::{blob_benchmark, run_sweep, CellOptions, MPolicy, Method, Population, SweepConfig};
use kkmeans::rng::{derived, mix};
use kkmeans::seeding::{approximate_erm_restarts, kernel_kmeanspp, ApproxErmOptions};

use crate::config::{ExperimentConfig, NystromParams, OUTPUT_DIR_ENV};
use crate::data::load_points;
use crate::CliError;

const CLUSTER_STREAM: u64 = 0xC1;
const LANDMARK_STREAM: u64 = 0x1A;

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub k: Option<usize>,
    pub method: Option<String>,
    pub m: Option<usize>,
    pub trials: Option<usize>,
    pub methods: Option<Vec<String>>,
    pub reps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    Violation,
}

/// Exit status plus the human-readable report the binary prints.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub status: Status,
    pub report: String,
}

impl Outcome {
    fn new(status: Status, report: String) -> Self {
        Self { status, report }
    }
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Success => 0,
            Status::Violation => 1,
        }
    }
}

/// Flag, then environment, then config, then the working directory.
pub fn output_dir(cfg: &ExperimentConfig, ov: &Overrides) -> PathBuf {
    ov.output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."))
}

fn in_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn write_file(dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

fn required_k(cfg: &ExperimentConfig, ov: &Overrides) -> Result<usize, CliError> {
    ov.k.or(cfg.k).ok_or_else(|| CliError::Config("k is required".into()))
}

fn load_gram(cfg: &ExperimentConfig) -> Result<GramMatrix, CliError> {
    let spec = cfg
        .kernel
        .ok_or_else(|| CliError::Config("[kernel] section is required".into()))?;
    let data = cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::Config("[data] section is required".into()))?;
    let points = load_points(data, cfg.master_seed)?;
    Ok(gram_matrix(&spec, &points)?)
}

fn parse_mode(s: &str) -> Result<LandmarkMode, CliError> {
    LandmarkMode::ALL
        .into_iter()
        .find(|m| m.name() == s)
        .ok_or_else(|| CliError::Config(format!("unknown landmark mode {s:?}")))
}

fn landmark_count(gram: &GramMatrix, k: usize, nys: &NystromParams) -> Result<usize, CliError> {
    if let Some(m) = nys.m {
        if m == 0 || m > gram.n() {
            return Err(kkmeans::Error::MTooLarge { m, n: gram.n() }.into());
        }
        return Ok(m);
    }
    let mode = parse_mode(&nys.mode)?;
    let xi = match mode {
        LandmarkMode::Eigendecay => None,
        _ => Some(Spectrum::of(gram)?.effective_dimension()),
    };
    Ok(landmark_size(gram.n(), k, nys.delta, xi, mode, nys.c_scale)?)
}

fn trace_csv(costs: &[f64]) -> String {
    let mut s = String::from("iteration,cost\n");
    for (i, c) in costs.iter().enumerate() {
        let _ = writeln!(s, "{i},{}", format_float(*c));
    }
    s
}

struct ClusterRun {
    assignment: Assignment,
    cost: f64,
    trace: Vec<f64>,
    iterations: usize,
    converged: bool,
    extra: Vec<(String, String)>,
}

fn best_nystrom(
    gram: &GramMatrix,
    k: usize,
    m: usize,
    cfg: &ExperimentConfig,
) -> Result<(NystromResult, usize, usize), CliError> {
    let mut rng = derived(cfg.master_seed, mix(&[LANDMARK_STREAM]));
    let landmarks = sample_landmarks_uniform(gram.n(), m, &mut rng)?;
    let emb = nystrom_embed(gram, &landmarks, cfg.nystrom.jitter)?;
    let opts = NystromOptions {
        init: NystromInit::KMeansPP,
        jitter: cfg.nystrom.jitter,
        max_iter: cfg.method.max_iter,
        rel_tol: cfg.method.rel_tol,
    };
    let mut best: Option<NystromResult> = None;
    for r in 0..cfg.method.restarts.max(1) {
        let mut rng = derived(cfg.master_seed, mix(&[CLUSTER_STREAM, r as u64]));
        let res = nystrom_kkmeans_embedded(&emb, k, &opts, &mut rng)?;
        if best.as_ref().is_none_or(|b| res.cost_in_h < b.cost_in_h) {
            best = Some(res);
        }
    }
    Ok((best.expect("at least one restart"), emb.m(), emb.rank()))
}

fn run_cluster_method(
    gram: &GramMatrix,
    k: usize,
    method: &str,
    cfg: &ExperimentConfig,
    ov: &Overrides,
) -> Result<ClusterRun, CliError> {
    let p = &cfg.method;
    match method {
        "lloyd" => {
            let mut best: Option<ClusterRun> = None;
            for r in 0..p.restarts.max(1) {
                let mut rng = derived(cfg.master_seed, mix(&[CLUSTER_STREAM, r as u64]));
                let seed = kernel_kmeanspp(gram, k, &mut rng)?;
                let (a, trace) = kernel_lloyd(gram, &seed.induced, p.max_iter, p.rel_tol)?;
                let cost = trace.final_cost();
                if best.as_ref().is_none_or(|b| cost < b.cost) {
                    best = Some(ClusterRun {
                        assignment: a,
                        cost,
                        iterations: trace.iterations,
                        converged: trace.converged,
                        trace: trace.per_iteration_cost,
                        extra: Vec::new(),
                    });
                }
            }
            Ok(best.expect("at least one restart"))
        }
        "brute_force" => {
            let (a, cost) = brute_force_erm(gram, k)?;
            Ok(ClusterRun {
                assignment: a,
                cost,
                trace: vec![cost],
                iterations: 0,
                converged: true,
                extra: Vec::new(),
            })
        }
        "approx_erm" => {
            let mut rng = derived(cfg.master_seed, mix(&[CLUSTER_STREAM]));
            let opts = ApproxErmOptions {
                rounds: p.rounds,
                lloyd_refine: true,
                max_iter: p.max_iter,
                rel_tol: p.rel_tol,
            };
            let (a, cost) = approximate_erm_restarts(gram, k, Weights::Uniform, p.restarts.max(1), &opts, &mut rng)?;
            Ok(ClusterRun {
                assignment: a,
                cost,
                trace: vec![cost],
                iterations: 0,
                converged: true,
                extra: Vec::new(),
            })
        }
        "nystrom" => {
            let mut nys = cfg.nystrom.clone();
            if ov.m.is_some() {
                nys.m = ov.m;
            }
            let m = landmark_count(gram, k, &nys)?;
            let (res, m, rank) = best_nystrom(gram, k, m, cfg)?;
            Ok(ClusterRun {
                assignment: res.assignment,
                cost: res.cost_in_h,
                iterations: res.trace.iterations,
                converged: res.trace.converged,
                trace: res.trace.per_iteration_cost,
                extra: vec![
                    ("m".into(), m.to_string()),
                    ("rank".into(), rank.to_string()),
                    ("cost_projected".into(), format_float(res.cost_projected)),
                ],
            })
        }
        other => Err(CliError::Config(format!(
            "unknown method {other:?} (expected lloyd, brute_force, approx_erm or nystrom)"
        ))),
    }
}

/// Clusters the configured data; writes `assignment.csv`, `cost_trace.csv`, `summary.txt`.
pub fn cmd_cluster(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Outcome, CliError> {
    let k = required_k(cfg, ov)?;
    let gram = load_gram(cfg)?;
    let method = ov.method.clone().unwrap_or_else(|| cfg.method.name.clone());
    let run = in_pool(ov.threads.or(cfg.threads), || {
        run_cluster_method(&gram, k, &method, cfg, ov)
    })??;

    let dir = output_dir(cfg, ov);
    let mut assignment = Vec::new();
    run.assignment
        .write_csv(&mut assignment)
        .map_err(|e| CliError::io(&dir.join("assignment.csv"), e))?;
    write_file(&dir, "assignment.csv", &assignment)?;
    write_file(&dir, "cost_trace.csv", trace_csv(&run.trace).as_bytes())?;

    let mut summary = String::new();
    let _ = writeln!(summary, "method: {method}");
    let _ = writeln!(summary, "n: {}", gram.n());
    let _ = writeln!(summary, "k: {k}");
    let _ = writeln!(summary, "final_cost: {}", format_float(run.cost));
    let _ = writeln!(summary, "iterations: {}", run.iterations);
    let _ = writeln!(summary, "converged: {}", run.converged);
    let sizes: Vec<String> = run.assignment.cluster_sizes().iter().map(|s| s.to_string()).collect();
    let _ = writeln!(summary, "cluster_sizes: {}", sizes.join(" "));
    for (key, value) in &run.extra {
        let _ = writeln!(summary, "{key}: {value}");
    }
    write_file(&dir, "summary.txt", summary.as_bytes())?;
    Ok(Outcome::new(Status::Success, summary))
}

/// Writes the landmark embedding (`embedding.csv`), landmark indices and a summary.
pub fn cmd_nystrom_embed(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Outcome, CliError> {
    let gram = load_gram(cfg)?;
    let mut nys = cfg.nystrom.clone();
    if ov.m.is_some() {
        nys.m = ov.m;
    }
    let k = match nys.m {
        Some(_) => ov.k.or(cfg.k).unwrap_or(1),
        None => required_k(cfg, ov)?,
    };
    let m = landmark_count(&gram, k, &nys)?;
    let mut rng = derived(cfg.master_seed, mix(&[LANDMARK_STREAM]));
    let landmarks = sample_landmarks_uniform(gram.n(), m, &mut rng)?;
    let emb = nystrom_embed(&gram, &landmarks, nys.jitter)?;

    let dir = output_dir(cfg, ov);
    let mut buf = Vec::new();
    emb.write_csv(&mut buf)
        .map_err(|e| CliError::io(&dir.join("embedding.csv"), e))?;
    write_file(&dir, "embedding.csv", &buf)?;
    let mut lm = String::from("landmark_index\n");
    for i in landmarks.indices() {
        let _ = writeln!(lm, "{i}");
    }
    write_file(&dir, "landmarks.csv", lm.as_bytes())?;

    let mean_residual = emb.residuals().iter().sum::<f64>() / emb.n() as f64;
    let mut summary = String::new();
    let _ = writeln!(summary, "n: {}", emb.n());
    let _ = writeln!(summary, "m: {}", emb.m());
    let _ = writeln!(summary, "rank: {}", emb.rank());
    let _ = writeln!(summary, "rank_deficient: {}", emb.is_rank_deficient());
    let _ = writeln!(summary, "mean_residual: {}", format_float(mean_residual));
    write_file(&dir, "summary.txt", summary.as_bytes())?;
    Ok(Outcome::new(Status::Success, summary))
}

pub const RAD_CHECK_HEADER: &str = "k,n,exact,trials,class_rad,class_std_error,class_bound,coord_rad,\
coord_std_error,coord_bound,khintchine_lhs,khintchine_rhs,verdict";

/// Lower-bound verification table over the `(k, n)` grid; `Violation` if any cell fails.
pub fn cmd_rad_check(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Outcome, CliError> {
    let trials = ov.trials.unwrap_or(cfg.lab.trials);
    if trials == 0 {
        return Err(CliError::Config("trials must be >= 1".into()));
    }
    let mut cells = Vec::new();
    for &(k, n) in &cfg.lab.grid {
        if k == 0 || n == 0 {
            eprintln!("skipping cell (k={k}, n={n}): k and n must be positive");
            continue;
        }
        if n % k != 0 {
            eprintln!("skipping cell (k={k}, n={n}): n is not divisible by k");
            continue;
        }
        if n > MAX_EXACT_N {
            eprintln!("notice: cell (k={k}, n={n}) is too large for exact enumeration; using Monte Carlo with {trials} trials");
        }
        cells.push((k, n));
    }
    let seed = cfg.master_seed;
    let checks = in_pool(ov.threads.or(cfg.threads), || {
        cells
            .iter()
            .map(|&(k, n)| check_lower_bound(k, n, trials, mix(&[seed, k as u64, n as u64])))
            .collect::<Result<Vec<_>, _>>()
    })??;

    let mut csv = format!("{RAD_CHECK_HEADER}\n");
    let mut table =
        String::from("   k     n  exact  class_rad  sqrt(kn/2)  coord_rad  3sqrt(n)  khin_lhs  khin_rhs  verdict\n");
    let mut violated = false;
    for c in &checks {
        let verdict = if c.all_ok() { "satisfied" } else { "violated" };
        violated |= !c.all_ok();
        let exact = c.class_rad.exact && c.coord_rad.exact && c.khintchine.exact;
        let used = if exact { 0 } else { trials };
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            c.k,
            c.n,
            exact,
            used,
            format_float(c.class_rad.value),
            format_float(c.class_rad.std_error),
            format_float(c.class_bound),
            format_float(c.coord_rad.value),
            format_float(c.coord_rad.std_error),
            format_float(c.coord_bound),
            format_float(c.khintchine.lhs),
            format_float(c.khintchine.rhs),
            verdict
        );
        let _ = writeln!(
            table,
            "{:>4}  {:>4}  {:>5}  {:>9.4}  {:>10.4}  {:>9.4}  {:>8.4}  {:>8.4}  {:>8.4}  {verdict}",
            c.k,
            c.n,
            exact,
            c.class_rad.value,
            c.class_bound,
            c.coord_rad.value,
            c.coord_bound,
            c.khintchine.lhs,
            c.khintchine.rhs
        );
    }
    write_file(&output_dir(cfg, ov), "rad_check.csv", csv.as_bytes())?;
    let status = if violated { Status::Violation } else { Status::Success };
    Ok(Outcome::new(status, table))
}

fn sweep_policy(nys: &NystromParams) -> Result<MPolicy, CliError> {
    if let Some(m) = nys.m {
        return Ok(MPolicy::Fixed { m });
    }
    match parse_mode(&nys.mode)? {
        LandmarkMode::General => Ok(MPolicy::General {
            c_scale: nys.c_scale,
            delta: nys.delta,
        }),
        LandmarkMode::Eigendecay => Ok(MPolicy::Eigendecay {
            c_scale: nys.c_scale,
            delta: nys.delta,
        }),
        LandmarkMode::LinearK => Err(CliError::Config(
            "risk-scan supports landmark modes general and eigendecay, or a fixed m".into(),
        )),
    }
}

/// Excess-risk sweep on the blob benchmark; writes `report.csv` and `summary.txt`.
/// `Violation` when fewer than 80% of exact-vs-Nyström cells overlap.
pub fn cmd_risk_scan(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Outcome, CliError> {
    let s = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("[sweep] section is required".into()))?;
    let names = ov.methods.clone().unwrap_or_else(|| s.methods.clone());
    let methods = names
        .iter()
        .map(|n| Method::parse(n.trim()).ok_or_else(|| CliError::Config(format!("unknown method {n:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut nys = cfg.nystrom.clone();
    if ov.m.is_some() {
        nys.m = ov.m;
    }
    let sweep = SweepConfig {
        n_values: s.n_values.clone(),
        k_values: s.k_values.clone(),
        methods,
        reps: ov.reps.unwrap_or(s.reps),
        master_seed: cfg.master_seed,
        policy: sweep_policy(&nys)?,
        options: CellOptions {
            erm_restarts: s.erm_restarts,
            nystrom_restarts: s.nystrom_restarts,
            rounds: cfg.method.rounds,
            max_iter: cfg.method.max_iter,
            rel_tol: cfg.method.rel_tol,
            jitter: nys.jitter,
        },
    };
    let pop = Population::new(blob_benchmark(s.blobs, s.spread, s.benchmark_seed))?;
    let report = in_pool(ov.threads.or(cfg.threads), || run_sweep(&pop, &sweep))??;

    let dir = output_dir(cfg, ov);
    let mut csv = Vec::new();
    report
        .write_csv(&mut csv)
        .map_err(|e| CliError::io(&dir.join("report.csv"), e))?;
    write_file(&dir, "report.csv", &csv)?;

    let mut summary = report.summary();
    let (overlap, compared) = report.compare(Method::ExactErmApprox, Method::Nystrom);
    let ok = compared == 0 || 5 * overlap >= 4 * compared;
    if compared > 0 {
        let _ = writeln!(
            summary,
            "exact_vs_nystrom_verdict: {}",
            if ok { "consistent" } else { "inconsistent" }
        );
    }
    write_file(&dir, "summary.txt", summary.as_bytes())?;
    let status = if ok { Status::Success } else { Status::Violation };
    Ok(Outcome::new(status, summary))
}

/// Prints the spectrum, the effective dimension and the landmark count in every mode.
pub fn cmd_spectrum(cfg: &ExperimentConfig, ov: &Overrides) -> Result<Outcome, CliError> {
    let gram = load_gram(cfg)?;
    let k = required_k(cfg, ov)?;
    let spectrum = Spectrum::of(&gram)?;
    let xi = spectrum.effective_dimension();
    let nys = &cfg.nystrom;

    let mut out = String::from("eigenvalues:\n");
    let mut csv = String::from("index,eigenvalue\n");
    for (i, l) in spectrum.eigenvalues().iter().enumerate() {
        let _ = writeln!(out, "  {i:>4}  {}", format_float(*l));
        let _ = writeln!(csv, "{i},{}", format_float(*l));
    }
    let _ = writeln!(out, "xi: {}", format_float(xi));
    let _ = writeln!(
        out,
        "landmark sizes (n={}, k={k}, delta={}, c_scale={}):",
        gram.n(),
        nys.delta,
        nys.c_scale
    );
    let mut sizes = String::from("mode,m\n");
    for mode in LandmarkMode::ALL {
        let m = landmark_size(gram.n(), k, nys.delta, Some(xi), mode, nys.c_scale)?;
        let _ = writeln!(out, "  {:<10}  {m}", mode.name());
        let _ = writeln!(sizes, "{},{m}", mode.name());
    }
    let dir = output_dir(cfg, ov);
    write_file(&dir, "spectrum.csv", csv.as_bytes())?;
    write_file(&dir, "landmark_sizes.csv", sizes.as_bytes())?;
    Ok(Outcome::new(Status::Success, out))
}
