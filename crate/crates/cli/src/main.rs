use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};

use priorcs::design::{design_baseline, design_pwdsmd, DesignParams, DesignReport};
use priorcs::experiments::{default_config, emit_csv, run_case_with_workers, CaseConfig, CaseId};
use priorcs::io::{load_matrix, load_vector, store_matrix, store_vector};
use priorcs::metrics::{mse, mutual_coherence, psnr, welch_bound};
use priorcs::model::{equivalent_dictionary, DesignKind, Dictionary, SensingMatrix};
use priorcs::prior::{average_binary_entropy, average_sparsity, extract_prior, weight_matrix};
use priorcs::recovery::{recover, RecoveryConfig, RecoveryKind};
use priorcs::synthetic::{
    gaussian_matrix, gen_batch_with, gen_dictionary, GroupSpec, SupportModel,
};
use priorcs::{Error, Seed};

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "priorcs",
    version,
    about = "Prior-weighted sensing matrix design and sparse recovery"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design a sensing matrix for a dictionary.
    Design(DesignArgs),
    /// Generate dictionaries, signal batches or priors.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Recover sparse codes from measurements.
    Recover(RecoverArgs),
    /// Run a Monte Carlo case and write its CSV.
    Experiment(ExperimentArgs),
    /// Report scalar quality measures.
    #[command(subcommand)]
    Metrics(MetricsCommand),
}

#[derive(Args)]
struct DesignArgs {
    #[arg(long, value_enum)]
    algo: DesignAlgo,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long)]
    m: usize,
    /// Per-atom usage probabilities, one value per atom.
    #[arg(long)]
    prior: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    tau: f64,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignAlgo {
    Random,
    Dcs,
    Lg,
    Bh,
    Pwdsmd,
}

impl From<DesignAlgo> for DesignKind {
    fn from(a: DesignAlgo) -> Self {
        match a {
            DesignAlgo::Random => DesignKind::Random,
            DesignAlgo::Dcs => DesignKind::Dcs,
            DesignAlgo::Lg => DesignKind::Lg,
            DesignAlgo::Bh => DesignKind::Bh,
            DesignAlgo::Pwdsmd => DesignKind::Pwdsmd,
        }
    }
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Random dictionary with unit-norm columns.
    Dict {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Batch of group-structured sparse signals.
    Batch {
        #[arg(long)]
        dict: PathBuf,
        /// Comma-separated group lengths.
        #[arg(long, value_delimiter = ',', required = true)]
        groups: Vec<usize>,
        #[arg(long)]
        sparsity: usize,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        snr_db: Option<f64>,
        /// Draw exactly round(p K_j) atoms per group instead of Bernoulli supports.
        #[arg(long)]
        exact: bool,
        #[arg(long)]
        seed: u64,
        /// Signals X (N×L).
        #[arg(long)]
        out_x: PathBuf,
        /// Coefficients (K×L).
        #[arg(long)]
        out_alpha: Option<PathBuf>,
    },
    /// Per-atom usage frequencies of a coefficient matrix.
    Prior {
        #[arg(long)]
        alpha: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long, value_enum)]
    algo: RecoverAlgo,
    #[arg(long)]
    phi: PathBuf,
    #[arg(long)]
    dict: PathBuf,
    /// Measurements, M×L.
    #[arg(long)]
    y: PathBuf,
    #[arg(long)]
    prior: Option<PathBuf>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    gbar: Option<f64>,
    #[arg(long)]
    sparsity: usize,
    /// Recovered coefficients, K×L.
    #[arg(long)]
    out: PathBuf,
    /// Reconstructed signals, N×L; defaults to `<out>.xhat`.
    #[arg(long)]
    out_x: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RecoverAlgo {
    Omp,
    Pdomp,
    Lwomp,
}

impl From<RecoverAlgo> for RecoveryKind {
    fn from(a: RecoverAlgo) -> Self {
        match a {
            RecoverAlgo::Omp => RecoveryKind::Omp,
            RecoverAlgo::Pdomp => RecoveryKind::Pdomp,
            RecoverAlgo::Lwomp => RecoveryKind::Lwomp,
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    /// Case id or path to a JSON case configuration.
    #[arg(long)]
    case: String,
    #[arg(long)]
    seed: u64,
    /// Divides dimensions and trial counts; 1 runs at full size.
    #[arg(long, default_value_t = 4)]
    scale: usize,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum MetricsCommand {
    /// Mutual coherence of Φ Ψ (or of `--dict` alone) against the Welch bound.
    Coherence {
        #[arg(long)]
        dict: PathBuf,
        #[arg(long)]
        phi: Option<PathBuf>,
    },
    /// Welch bound for an M×K frame.
    Welch {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        k: usize,
    },
    /// MSE and PSNR between two signal matrices.
    Mse {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        xhat: PathBuf,
    },
    /// Average binary entropy and sparsity of a probability vector.
    Entropy {
        #[arg(long)]
        prior: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult = std::result::Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Design(a) => cmd_design(a),
        Command::Synth(c) => cmd_synth(c),
        Command::Recover(a) => cmd_recover(a),
        Command::Experiment(a) => cmd_experiment(a),
        Command::Metrics(c) => cmd_metrics(c),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::Io { .. } | Error::Parse { .. } | Error::Json(_) => EXIT_IO,
                _ => EXIT_USAGE,
            };
            ExitCode::from(code)
        }
    }
}

fn load_dictionary(path: &Path) -> Result<Dictionary, Failure> {
    Ok(Dictionary::new(load_matrix(path)?)?)
}

fn sidecar_path(out: &Path, ext: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(ext);
    PathBuf::from(s)
}

fn write_report(out: &Path, report: &DesignReport) -> CliResult {
    let path = sidecar_path(out, ".json");
    std::fs::write(&path, report.sidecar_json())
        .map_err(|e| Failure::Lib(Error::Io { path, source: e }))
}

fn cmd_design(a: DesignArgs) -> CliResult {
    let kind = DesignKind::from(a.algo);
    let needs_seed = matches!(
        kind,
        DesignKind::Random | DesignKind::Bh | DesignKind::Pwdsmd
    );
    if needs_seed && a.seed.is_none() {
        return Err(usage(format!(
            "--algo {kind} draws random numbers and needs --seed"
        )));
    }
    if kind == DesignKind::Pwdsmd && a.prior.is_none() {
        return Err(usage("--algo pwdsmd needs --prior"));
    }
    let psi = load_dictionary(&a.dict)?;
    if a.m == 0 || a.m > psi.n() {
        return Err(usage(format!("--m must lie in 1..={}", psi.n())));
    }
    let seed = Seed(a.seed.unwrap_or(0));
    let (phi, report) = if kind == DesignKind::Pwdsmd {
        let xi = load_vector(a.prior.as_ref().expect("checked above"))?;
        let prior = weight_matrix(&xi, a.tau)?;
        let phi0 = SensingMatrix::new(
            gaussian_matrix(a.m, psi.n(), seed.derive("phi0")),
            DesignKind::Random,
        )?;
        design_pwdsmd(&psi, &prior, &phi0)?
    } else {
        let mut params = DesignParams::new(kind, a.m, seed.value());
        params.gamma = a.gamma;
        params.iters = a.iters;
        design_baseline(kind, &psi, &params, seed)?
    };
    store_matrix(phi.entries(), &a.out)?;
    write_report(&a.out, &report)?;
    println!("objective={:?}", report.objective);
    Ok(())
}

fn cmd_synth(c: SynthCommand) -> CliResult {
    match c {
        SynthCommand::Dict { n, k, seed, out } => {
            if n == 0 || k == 0 {
                return Err(usage("--n and --k must be positive"));
            }
            let psi = gen_dictionary(n, k, Seed(seed))?;
            store_matrix(psi.entries(), &out)?;
        }
        SynthCommand::Batch {
            dict,
            groups,
            sparsity,
            trials,
            snr_db,
            exact,
            seed,
            out_x,
            out_alpha,
        } => {
            let psi = load_dictionary(&dict)?;
            let spec = GroupSpec::from_sparsity(groups, sparsity)?;
            spec.validate()?;
            if spec.k() != psi.k() {
                return Err(usage(format!(
                    "groups sum to {} but the dictionary has {} atoms",
                    spec.k(),
                    psi.k()
                )));
            }
            if trials == 0 {
                return Err(usage("--trials must be at least 1"));
            }
            let model = if exact {
                SupportModel::ExactPerGroup
            } else {
                SupportModel::Bernoulli
            };
            let batch = gen_batch_with(&psi, &spec, model, trials, snr_db, Seed(seed))?;
            store_matrix(&batch.signals, &out_x)?;
            if let Some(path) = out_alpha {
                store_matrix(&batch.coefficients, &path)?;
            }
            if !batch.zero_energy_columns.is_empty() {
                eprintln!(
                    "warning: columns {:?} have zero energy and carry no noise",
                    batch.zero_energy_columns
                );
            }
        }
        SynthCommand::Prior { alpha, out } => {
            let xi = extract_prior(&load_matrix(&alpha)?)?;
            store_vector(&xi, &out)?;
            println!("average_sparsity={:?}", average_sparsity(&xi));
        }
    }
    Ok(())
}

fn cmd_recover(a: RecoverArgs) -> CliResult {
    let kind = RecoveryKind::from(a.algo);
    if kind != RecoveryKind::Omp && a.prior.is_none() {
        return Err(usage(format!("--algo {kind} needs --prior")));
    }
    let psi = load_dictionary(&a.dict)?;
    let phi = SensingMatrix::new(load_matrix(&a.phi)?, DesignKind::Random)?;
    let y = load_matrix(&a.y)?;
    if a.sparsity == 0 || a.sparsity > phi.m() {
        return Err(usage(format!(
            "--sparsity must lie in 1..={} (the number of measurements)",
            phi.m()
        )));
    }
    if y.nrows() != phi.m() {
        return Err(usage(format!(
            "measurements have {} rows but phi has {}",
            y.nrows(),
            phi.m()
        )));
    }
    let xi = a.prior.as_ref().map(load_vector).transpose()?;
    let mut cfg = RecoveryConfig::new(a.sparsity);
    if let Some(b) = a.beta {
        cfg = cfg.with_beta(b);
    }
    if let Some(g) = a.gbar {
        cfg = cfg.with_g_bar(g);
    }
    let eq = equivalent_dictionary(&phi, &psi)?;
    let mut alpha = DMatrix::zeros(psi.k(), y.ncols());
    let mut worst = 0.0f64;
    for (l, col) in y.column_iter().enumerate() {
        let y_l: DVector<f64> = col.into_owned();
        let r = recover(kind, &y_l, &eq, xi.as_ref(), &cfg)?;
        worst = worst.max((&y_l - &eq.raw * &r.coefficients).norm());
        alpha.set_column(l, &r.coefficients);
    }
    let x_hat = psi.entries() * &alpha;
    store_matrix(&alpha, &a.out)?;
    let out_x = a.out_x.unwrap_or_else(|| sidecar_path(&a.out, ".xhat"));
    store_matrix(&x_hat, &out_x)?;
    println!("max_residual={worst:?}");
    Ok(())
}

fn cmd_experiment(a: ExperimentArgs) -> CliResult {
    let mut cfg: CaseConfig = match a.case.parse::<CaseId>() {
        Ok(id) => {
            if a.scale == 0 {
                return Err(usage("--scale must be at least 1"));
            }
            default_config(id, a.scale)?
        }
        Err(_) if a.case.ends_with(".json") || Path::new(&a.case).is_file() => {
            let text = std::fs::read_to_string(&a.case).map_err(|e| {
                Failure::Lib(Error::Io {
                    path: PathBuf::from(&a.case),
                    source: e,
                })
            })?;
            serde_json::from_str(&text).map_err(Error::from)?
        }
        Err(_) => return Err(usage(format!("unknown case `{}`", a.case))),
    };
    cfg.master_seed = a.seed;
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if a.workers == 0 {
        return Err(usage("--workers must be at least 1"));
    }
    let result = run_case_with_workers(&cfg, a.workers)?;
    emit_csv(&result, &a.out)?;
    println!("rows={}", result.rows.len());
    Ok(())
}

fn cmd_metrics(c: MetricsCommand) -> CliResult {
    let report = match c {
        MetricsCommand::Coherence { dict, phi } => {
            let psi = load_dictionary(&dict)?;
            let d = match phi {
                Some(p) => {
                    let phi = SensingMatrix::new(load_matrix(&p)?, DesignKind::Random)?;
                    equivalent_dictionary(&phi, &psi)?.raw
                }
                None => psi.entries().clone(),
            };
            serde_json::json!({
                "mu": mutual_coherence(&d)?,
                "welch_bound": welch_bound(d.nrows(), d.ncols()),
            })
        }
        MetricsCommand::Welch { m, k } => serde_json::json!({ "welch_bound": welch_bound(m, k) }),
        MetricsCommand::Mse { x, xhat } => {
            let value = mse(&load_matrix(&x)?, &load_matrix(&xhat)?)?;
            let p = psnr(value);
            serde_json::json!({ "mse": value, "psnr_db": if p.is_finite() { Some(p) } else { None } })
        }
        MetricsCommand::Entropy { prior } => {
            let p = load_vector(&prior)?;
            serde_json::json!({ "abe": average_binary_entropy(&p), "average_sparsity": average_sparsity(&p) })
        }
    };
    println!("{report}");
    Ok(())
}
