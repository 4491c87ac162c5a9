//! Command-line front end: configuration resolution (defaults, key=value
//! file, flags), subcommand dispatch, deterministic CSV emission and run
//! manifests.
//!
//! Output contract: identical configuration and seed produce byte-identical
//! CSV files, whatever the worker count. Exit codes: 0 success, 2 validation
//! failure, 3 desk-scale cap exceeded, 4 numeric failure.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{ArgAction, Args, Parser, Subcommand};

use divlayer_core::channel::{outage_probability_analytic, snr_linear, SystemConfig};
use divlayer_core::codec::{
    build_miso_codebook, plan_layers, write_codebook_csv, Layer, LayerParams,
};
use divlayer_core::experiments::{
    bc_rate_region, diversity_rows, lemma_suite, outage_monte_carlo, pep_experiment, run_sweep,
};
use divlayer_core::Error as CoreError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "DIVLAYER_WORKERS";
/// Constant-factor slack on the determinant targets. The targets are
/// asymptotic SNR exponents; at desk-scale SNR the diagonal construction
/// sits a dimension-dependent constant (about `n^n`) below them, so the
/// pass rule keeps two orders of slack. Strict positivity and the exponent
/// trend are checked separately by the test suites.
pub const DET_TOL: f64 = 0.99;

#[derive(Parser, Debug)]
#[command(
    name = "divlayer",
    version,
    about = "Layered-diversity link simulator for fading ISI channels"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key=value config file (# comments); flags override file values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Directory for CSV and manifest outputs.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub overrides: ConfigArgs,
}

/// Common run parameters; every flag mirrors a config-file key.
#[derive(Args, Debug, Default, Clone)]
pub struct ConfigArgs {
    /// Transmit antennas.
    #[arg(long, global = true)]
    pub mt: Option<usize>,
    /// Receive antennas.
    #[arg(long, global = true)]
    pub mr: Option<usize>,
    /// Channel memory (taps = nu + 1).
    #[arg(long, global = true)]
    pub nu: Option<usize>,
    /// Block length in symbols.
    #[arg(long, global = true)]
    pub ts: Option<usize>,
    /// Sub-blocks per codeword (derived for multi-antenna runs when omitted).
    #[arg(long, global = true)]
    pub tb: Option<usize>,
    /// Comma-separated SNR grid in dB.
    #[arg(long, global = true, value_name = "DB,DB,...")]
    pub snr_grid_db: Option<String>,
    /// High-priority multiplexing gain.
    #[arg(long, global = true)]
    pub r_h: Option<f64>,
    /// Low-priority multiplexing gain (0 disables the low layer).
    #[arg(long, global = true)]
    pub r_l: Option<f64>,
    /// Power-split offset above the realized high rate.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    /// Run seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Error events to collect per SNR point and layer.
    #[arg(long, global = true)]
    pub min_error_events: Option<u64>,
    /// Trial cap per SNR point.
    #[arg(long, global = true)]
    pub max_trials: Option<u64>,
    /// Disable additive noise (diagnostics).
    #[arg(long, global = true, action = ArgAction::SetTrue)]
    pub noiseless: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Deterministic tap-structure checks over many channel draws.
    LemmaCheck {
        #[arg(long, default_value_t = 10_000)]
        draws: u64,
    },
    /// Analytic vs Monte Carlo outage probabilities over the SNR grid.
    Outage {
        #[arg(long, default_value_t = 1_000_000)]
        draws: u64,
        /// Comma-separated fading depths in (0, 1].
        #[arg(long, default_value = "0.5,1.0")]
        alphas: String,
    },
    /// Monte Carlo SNR sweep with per-layer diversity-slope fits.
    Simulate,
    /// Pairwise-error bound vs Monte Carlo comparison.
    Pep {
        #[arg(long, default_value_t = 100)]
        triples: u64,
        #[arg(long, default_value_t = 100_000)]
        noise_draws: u64,
    },
    /// Build the codebooks (sized at the first SNR grid point) and run the
    /// exhaustive constraint scan.
    CodebookCheck {
        /// Also export the codewords as CSV.
        #[arg(long, action = ArgAction::SetTrue)]
        export: bool,
    },
    /// Superposition rate region for the two typical channels.
    Region {
        #[arg(long, default_value_t = 20.0)]
        snr_db: f64,
        /// Outage level defining the weak (protected) user's channel.
        #[arg(long, default_value_t = 0.01)]
        ph: f64,
        /// Outage level defining the strong user's channel.
        #[arg(long, default_value_t = 0.1)]
        pl: f64,
        /// Power-split grid size.
        #[arg(long, default_value_t = 101)]
        grid: usize,
    },
}

#[derive(Debug)]
pub enum CliError {
    Core(CoreError),
    Config(String),
    Io(std::io::Error),
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Config(msg) => write!(f, "invalid config: {msg}"),
            CliError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

/// Map an error to the documented exit code.
pub fn exit_code(err: &CliError) -> i32 {
    match err {
        CliError::Config(_) => 2,
        CliError::Io(_) => 1,
        CliError::Core(e) => match e {
            CoreError::DeskScaleLimit(_) => 3,
            CoreError::Numeric(_)
            | CoreError::SingularMatrix(_)
            | CoreError::NotHermitian { .. } => 4,
            _ => 2,
        },
    }
}

fn parse_grid(text: &str, key: &str) -> Result<Vec<f64>, CliError> {
    let values: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    values.map_err(|_| CliError::Config(format!("{key}: cannot parse '{text}' as dB list")))
}

fn parse_value<T: std::str::FromStr>(value: &str, key: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| CliError::Config(format!("{key}: cannot parse '{value}'")))
}

/// Resolve the effective configuration: defaults, then file, then flags.
/// Returns the config plus whether `tb` was set explicitly anywhere.
pub fn resolve_config(file: Option<&Path>, args: &ConfigArgs) -> Result<SystemConfig, CliError> {
    let mut cfg = SystemConfig::default();
    let mut tb_explicit = false;

    if let Some(path) = file {
        let text = fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "{}:{}: expected key=value",
                    path.display(),
                    lineno + 1
                ))
            })?;
            let key = key.trim();
            let value = value.trim();
            match key {
                "mt" => cfg.m_t = parse_value(value, key)?,
                "mr" => cfg.m_r = parse_value(value, key)?,
                "nu" => cfg.nu = parse_value(value, key)?,
                "ts" => cfg.t_s = parse_value(value, key)?,
                "tb" => {
                    cfg.t_b = parse_value(value, key)?;
                    tb_explicit = true;
                }
                "snr-grid-db" => cfg.snr_grid_db = parse_grid(value, key)?,
                "r-h" => cfg.r_h = parse_value(value, key)?,
                "r-l" => cfg.r_l = parse_value(value, key)?,
                "delta" => cfg.delta = parse_value(value, key)?,
                "seed" => cfg.seed = parse_value(value, key)?,
                "min-error-events" => cfg.min_error_events = parse_value(value, key)?,
                "max-trials" => cfg.max_trials = parse_value(value, key)?,
                "noiseless" => cfg.noiseless = parse_value(value, key)?,
                other => {
                    return Err(CliError::Config(format!(
                        "{}:{}: unknown key '{other}'",
                        path.display(),
                        lineno + 1
                    )))
                }
            }
        }
    }

    if let Some(v) = args.mt {
        cfg.m_t = v;
    }
    if let Some(v) = args.mr {
        cfg.m_r = v;
    }
    if let Some(v) = args.nu {
        cfg.nu = v;
    }
    if let Some(v) = args.ts {
        cfg.t_s = v;
    }
    if let Some(v) = args.tb {
        cfg.t_b = v;
        tb_explicit = true;
    }
    if let Some(text) = &args.snr_grid_db {
        cfg.snr_grid_db = parse_grid(text, "snr-grid-db")?;
    }
    if let Some(v) = args.r_h {
        cfg.r_h = v;
    }
    if let Some(v) = args.r_l {
        cfg.r_l = v;
    }
    if let Some(v) = args.delta {
        cfg.delta = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = args.min_error_events {
        cfg.min_error_events = v;
    }
    if let Some(v) = args.max_trials {
        cfg.max_trials = v;
    }
    if args.noiseless {
        cfg.noiseless = true;
    }

    // Square diagonal grid unless the user pinned the sub-block count.
    if cfg.m_t > 1 && !tb_explicit && cfg.t_s > cfg.nu {
        cfg.t_b = (cfg.t_s - cfg.nu) * cfg.m_t;
    }
    Ok(cfg)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

fn grid_text(grid: &[f64]) -> String {
    grid.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn config_lines(cfg: &SystemConfig) -> Vec<String> {
    vec![
        format!("mt={}", cfg.m_t),
        format!("mr={}", cfg.m_r),
        format!("nu={}", cfg.nu),
        format!("ts={}", cfg.t_s),
        format!("tb={}", cfg.t_b),
        format!("snr-grid-db={}", grid_text(&cfg.snr_grid_db)),
        format!("r-h={}", cfg.r_h),
        format!("r-l={}", cfg.r_l),
        format!("delta={}", cfg.delta),
        format!("seed={}", cfg.seed),
        format!("min-error-events={}", cfg.min_error_events),
        format!("max-trials={}", cfg.max_trials),
        format!("noiseless={}", cfg.noiseless),
    ]
}

/// Hash of everything that determines the outputs: config, subcommand and its
/// arguments.
fn config_hash(cfg: &SystemConfig, subcommand: &str, extras: &[(String, String)]) -> u64 {
    let mut text = String::new();
    let _ = writeln!(text, "subcommand={subcommand}");
    for line in config_lines(cfg) {
        let _ = writeln!(text, "{line}");
    }
    for (k, v) in extras {
        let _ = writeln!(text, "{k}={v}");
    }
    fnv1a64(text.as_bytes())
}

/// Nine significant digits, scientific.
pub fn fmt9(x: f64) -> String {
    format!("{:.8e}", x)
}

struct RunContext {
    out_dir: PathBuf,
    subcommand: &'static str,
    hash: u64,
    start_unix: u64,
    extras: Vec<(String, String)>,
    files: Vec<String>,
}

impl RunContext {
    fn new(
        out_dir: &Path,
        cfg: &SystemConfig,
        subcommand: &'static str,
        extras: Vec<(String, String)>,
    ) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir)?;
        Ok(RunContext {
            out_dir: out_dir.to_path_buf(),
            subcommand,
            hash: config_hash(cfg, subcommand, &extras),
            start_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            extras,
            files: Vec::new(),
        })
    }

    fn header(&self) -> String {
        format!("# divlayer {VERSION} config={:016x}", self.hash)
    }

    fn write_file(&mut self, name: &str, body: &str) -> Result<PathBuf, CliError> {
        let path = self.out_dir.join(name);
        let mut text = self.header();
        text.push('\n');
        text.push_str(body);
        fs::write(&path, text)?;
        self.files.push(name.to_string());
        Ok(path)
    }

    fn write_manifest(&mut self, cfg: &SystemConfig) -> Result<(), CliError> {
        let end_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut body = String::new();
        let _ = writeln!(body, "subcommand={}", self.subcommand);
        let _ = writeln!(body, "artifact-version={VERSION}");
        let _ = writeln!(body, "config-hash={:016x}", self.hash);
        let _ = writeln!(body, "start-unix={}", self.start_unix);
        let _ = writeln!(body, "end-unix={end_unix}");
        let _ = writeln!(body, "workers={}", effective_workers());
        for line in config_lines(cfg) {
            let _ = writeln!(body, "{line}");
        }
        for (k, v) in &self.extras {
            let _ = writeln!(body, "{k}={v}");
        }
        for f in &self.files {
            let _ = writeln!(body, "output={f}");
        }
        let path = self.out_dir.join("manifest.txt");
        let mut text = self.header();
        text.push('\n');
        text.push_str(&body);
        fs::write(path, text)?;
        Ok(())
    }
}

fn effective_workers() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

fn init_worker_pool() {
    if let Some(n) = std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // Ignore the error when a pool already exists (tests, repeat calls).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
}

fn run_simulate(cfg: &SystemConfig, out_dir: &Path) -> Result<(), CliError> {
    cfg.validate()?;
    let mut ctx = RunContext::new(out_dir, cfg, "simulate", vec![])?;
    let stats = run_sweep(cfg)?;

    let mut sweep = String::from("snr_db,layer,trials,errors,pe,ci_halfwidth\n");
    for p in &stats.points {
        let _ = writeln!(
            sweep,
            "{},{},{},{},{},{}",
            fmt9(p.snr_db),
            p.layer.as_str(),
            p.trials,
            p.errors,
            fmt9(p.pe),
            fmt9(p.ci_halfwidth)
        );
    }
    ctx.write_file("sweep.csv", &sweep)?;

    let rows = diversity_rows(cfg, &stats)?;
    let mut div = String::from("layer,realized_rate,slope,r_squared,bound_lower,bound_upper\n");
    for row in &rows {
        let _ = writeln!(
            div,
            "{},{},{},{},{},{}",
            row.layer.as_str(),
            fmt9(row.realized_rate),
            fmt9(row.slope),
            fmt9(row.r_squared),
            fmt9(row.bound_lower),
            fmt9(row.bound_upper)
        );
    }
    ctx.write_file("diversity.csv", &div)?;
    ctx.write_manifest(cfg)?;

    println!(
        "wrote sweep.csv, diversity.csv, manifest.txt to {}",
        out_dir.display()
    );
    for row in &rows {
        println!(
            "layer {}: slope {:.3} (bounds [{:.3}, {:.3}] at realized rate {:.4})",
            row.layer.as_str(),
            row.slope,
            row.bound_lower,
            row.bound_upper,
            row.realized_rate
        );
    }
    Ok(())
}

fn run_lemma_check(cfg: &SystemConfig, out_dir: &Path, draws: u64) -> Result<(), CliError> {
    cfg.validate()?;
    let extras = vec![("draws".to_string(), draws.to_string())];
    let mut ctx = RunContext::new(out_dir, cfg, "lemma-check", extras)?;
    let report = lemma_suite(cfg, draws)?;

    let mut body = String::from("check,draws,violations\n");
    let _ = writeln!(
        body,
        "good_set_cardinality,{},{}",
        report.draws, report.good_set_violations
    );
    let _ = writeln!(
        body,
        "subset_power_lower_bound,{},{}",
        report.draws, report.subset_bound_violations
    );
    let _ = writeln!(
        body,
        "bin_power_upper_bound,{},{}",
        report.draws, report.upper_bound_violations
    );
    let _ = writeln!(
        body,
        "circulant_diagonalization,{},{}",
        report.draws, report.diagonalization_violations
    );
    ctx.write_file("lemma_check.csv", &body)?;
    ctx.write_manifest(cfg)?;

    println!(
        "max diagonalization residual {:.3e}",
        report.max_diagonalization_residual
    );
    println!("violations,{}", report.total_violations());
    Ok(())
}

fn run_outage(
    cfg: &SystemConfig,
    out_dir: &Path,
    draws: u64,
    alphas: &str,
) -> Result<(), CliError> {
    cfg.validate()?;
    let alphas = parse_grid(alphas, "alphas")?;
    for &a in &alphas {
        if !(a > 0.0 && a <= 1.0) {
            return Err(CliError::Config(format!("alphas: {a} outside (0, 1]")));
        }
    }
    let extras = vec![
        ("draws".to_string(), draws.to_string()),
        (
            "alphas".to_string(),
            alphas
                .iter()
                .map(|a| a.to_string())
                .collect::<Vec<_>>()
                .join(","),
        ),
    ];
    let mut ctx = RunContext::new(out_dir, cfg, "outage", extras)?;

    let mut body = String::from("nu,alpha,snr_db,analytic,empirical,draws\n");
    for &alpha in &alphas {
        for (i, &snr_db) in cfg.snr_grid_db.iter().enumerate() {
            let snr = snr_linear(snr_db);
            let analytic = outage_probability_analytic(alpha, snr, cfg.nu, cfg.m_t, cfg.m_r);
            let empirical = outage_monte_carlo(
                cfg.nu,
                cfg.m_t,
                cfg.m_r,
                cfg.seed.wrapping_add(i as u64),
                draws,
                alpha,
                snr,
            );
            let _ = writeln!(
                body,
                "{},{},{},{},{},{}",
                cfg.nu,
                fmt9(alpha),
                fmt9(snr_db),
                fmt9(analytic),
                fmt9(empirical),
                draws
            );
        }
    }
    ctx.write_file("outage.csv", &body)?;
    ctx.write_manifest(cfg)?;
    println!("wrote outage.csv to {}", out_dir.display());
    Ok(())
}

fn run_pep(
    cfg: &SystemConfig,
    out_dir: &Path,
    triples: u64,
    noise_draws: u64,
) -> Result<(), CliError> {
    cfg.validate()?;
    let extras = vec![
        ("triples".to_string(), triples.to_string()),
        ("noise-draws".to_string(), noise_draws.to_string()),
    ];
    let mut ctx = RunContext::new(out_dir, cfg, "pep", extras)?;
    let cases = pep_experiment(cfg, triples, noise_draws)?;

    let mut body = String::from("pair_id,bound,empirical,trials\n");
    let mut exceed = 0u64;
    for case in &cases {
        let sigma = (case.empirical * (1.0 - case.empirical) / case.trials as f64).sqrt();
        if case.empirical > case.bound + 3.0 * sigma {
            exceed += 1;
        }
        let _ = writeln!(
            body,
            "{},{},{},{}",
            case.pair_id,
            fmt9(case.bound),
            fmt9(case.empirical),
            case.trials
        );
    }
    ctx.write_file("pep.csv", &body)?;
    ctx.write_manifest(cfg)?;
    println!("pep cases {}, bound violations {}", cases.len(), exceed);
    Ok(())
}

fn run_codebook_check(cfg: &SystemConfig, out_dir: &Path, export: bool) -> Result<(), CliError> {
    cfg.validate()?;
    let snr_db = cfg.snr_grid_db[0];
    let snr = snr_linear(snr_db);
    let extras = vec![("codebook-snr-db".to_string(), snr_db.to_string())];
    let mut ctx = RunContext::new(out_dir, cfg, "codebook-check", extras)?;
    let (_, _, beta) = plan_layers(cfg, snr)?;

    let mut body =
        String::from("layer,words,pairs_checked,min_det,det_target,max_frob_sq,frob_cap,pass\n");
    let layers: Vec<Layer> = if cfg.single_layer() {
        vec![Layer::High]
    } else {
        vec![Layer::High, Layer::Low]
    };
    let mut all_pass = true;
    for layer in layers {
        let book = build_miso_codebook(cfg, snr, layer)?;
        let params = LayerParams {
            layer,
            snr,
            power_exponent: match layer {
                Layer::High => 1.0,
                Layer::Low => 1.0 - beta,
            },
            beta: match layer {
                Layer::High => 0.0,
                Layer::Low => beta,
            },
            m_t: cfg.m_t,
            data_len: cfg.data_len(),
            tol: DET_TOL,
        };
        let report = divlayer_core::codec::check_codebook(&book, &params)?;
        all_pass &= report.pass;
        let _ = writeln!(
            body,
            "{},{},{},{},{},{},{},{}",
            layer.as_str(),
            book.len(),
            report.pairs_checked,
            fmt9(report.min_det()),
            fmt9(params.det_target(book.len())),
            fmt9(report.max_frob_h.max(report.max_frob_l)),
            fmt9(params.frobenius_cap()),
            report.pass
        );
        if export {
            let mut csv = Vec::new();
            write_codebook_csv(&book, &mut csv).map_err(CliError::Io)?;
            let name = format!("codebook_{}.csv", layer.as_str().to_lowercase());
            ctx.write_file(&name, &String::from_utf8_lossy(&csv))?;
        }
    }
    ctx.write_file("codebook_check.csv", &body)?;
    ctx.write_manifest(cfg)?;
    println!("codebook constraints pass: {all_pass}");
    Ok(())
}

fn run_region(
    cfg: &SystemConfig,
    out_dir: &Path,
    snr_db: f64,
    ph: f64,
    pl: f64,
    grid: usize,
) -> Result<(), CliError> {
    let extras = vec![
        ("snr-db".to_string(), snr_db.to_string()),
        ("ph".to_string(), ph.to_string()),
        ("pl".to_string(), pl.to_string()),
        ("grid".to_string(), grid.to_string()),
    ];
    let mut ctx = RunContext::new(out_dir, cfg, "region", extras)?;
    let curve = bc_rate_region(snr_db, ph, pl, cfg.m_t, grid)?;

    let mut body = String::from("power_split_a,rate_weak,rate_strong\n");
    for (a, (weak, strong)) in curve.power_split_grid.iter().zip(&curve.points) {
        let _ = writeln!(body, "{},{},{}", fmt9(*a), fmt9(*weak), fmt9(*strong));
    }
    ctx.write_file("region.csv", &body)?;
    ctx.write_manifest(cfg)?;
    println!(
        "gains: weak {:.6} strong {:.6}; wrote region.csv to {}",
        curve.gain_weak,
        curve.gain_strong,
        out_dir.display()
    );
    Ok(())
}

/// Execute a parsed invocation. Returns the process exit code.
pub fn run_cli(cli: Cli) -> i32 {
    init_worker_pool();
    let cfg = match resolve_config(cli.config.as_deref(), &cli.overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    let result = match &cli.command {
        Command::LemmaCheck { draws } => run_lemma_check(&cfg, &cli.out_dir, *draws),
        Command::Outage { draws, alphas } => run_outage(&cfg, &cli.out_dir, *draws, alphas),
        Command::Simulate => run_simulate(&cfg, &cli.out_dir),
        Command::Pep {
            triples,
            noise_draws,
        } => run_pep(&cfg, &cli.out_dir, *triples, *noise_draws),
        Command::CodebookCheck { export } => run_codebook_check(&cfg, &cli.out_dir, *export),
        Command::Region {
            snr_db,
            ph,
            pl,
            grid,
        } => run_region(&cfg, &cli.out_dir, *snr_db, *ph, *pl, *grid),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

/// Parse argv and run; clap itself exits with code 2 on usage errors.
pub fn run() -> i32 {
    run_cli(Cli::parse())
}
