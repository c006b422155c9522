//! Seeded Monte Carlo case runners.
//!
//! A case fixes one dictionary for its whole run and sweeps one parameter.
//! At every sweep point each configured sensing matrix is designed once,
//! and every (design, recovery) pair is evaluated on the same test batch,
//! so comparisons between pairs are paired trial by trial.
//!
//! Trials run in parallel but are reduced in trial order, which makes the
//! output independent of the worker count.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{design_baseline, design_pwdsmd, DesignParams, DEFAULT_BH_ITERS};
use crate::error::{Error, Result};
use crate::metrics::support_fraction;
use crate::model::{
    equivalent_dictionary, DesignKind, Dictionary, EquivalentDictionary, SensingMatrix,
};
use crate::prior::{extract_prior, weight_matrix};
use crate::recovery::{
    mean_nonzero_magnitude, recover, RecoveryConfig, RecoveryKind, DEFAULT_BETA,
};
use crate::rng::Seed;
use crate::synthetic::{gaussian_matrix, gen_batch_with, gen_dictionary, GroupSpec, SupportModel};

pub const CSV_HEADER: &str = "sweep_value,design,recovery,mse,e_r,trials,seed,mse_se";

/// Group lengths of the four prior-quality configurations, at full scale.
pub const ENTROPY_GROUPS: [[usize; 4]; 4] = [
    [60, 60, 60, 60],
    [100, 100, 20, 20],
    [160, 50, 20, 10],
    [204, 12, 12, 12],
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseId {
    TauSweep,
    SnrSweep,
    SparsitySweep,
    MSweep,
    BetaSweep,
    SystemCompare,
    SystemSparsity,
    SystemM,
    EntropyCompare,
}

impl CaseId {
    pub const ALL: [CaseId; 9] = [
        CaseId::TauSweep,
        CaseId::SnrSweep,
        CaseId::SparsitySweep,
        CaseId::MSweep,
        CaseId::BetaSweep,
        CaseId::SystemCompare,
        CaseId::SystemSparsity,
        CaseId::SystemM,
        CaseId::EntropyCompare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CaseId::TauSweep => "tau_sweep",
            CaseId::SnrSweep => "snr_sweep",
            CaseId::SparsitySweep => "sparsity_sweep",
            CaseId::MSweep => "m_sweep",
            CaseId::BetaSweep => "beta_sweep",
            CaseId::SystemCompare => "system_compare",
            CaseId::SystemSparsity => "system_sparsity",
            CaseId::SystemM => "system_m",
            CaseId::EntropyCompare => "entropy_compare",
        }
    }
}

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CaseId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown case id `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Tau,
    SnrDb,
    Sparsity,
    M,
    Beta,
    /// Index (1-based) into [`CaseConfig::group_options`].
    Groups,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmPair {
    pub design: DesignKind,
    pub recovery: RecoveryKind,
    /// Overrides the case-wide τ for this pair's design.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl AlgorithmPair {
    pub fn new(design: DesignKind, recovery: RecoveryKind) -> Self {
        AlgorithmPair {
            design,
            recovery,
            tau: None,
            label: None,
        }
    }

    /// The unweighted closed-form design (`τ = 1`).
    pub fn pwdsmd_without_prior(recovery: RecoveryKind) -> Self {
        AlgorithmPair {
            design: DesignKind::Pwdsmd,
            recovery,
            tau: Some(1.0),
            label: Some("pwdsmd_noprior".into()),
        }
    }

    pub fn design_label(&self) -> String {
        self.label
            .clone()
            .unwrap_or_else(|| self.design.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    pub case_id: CaseId,
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub sparsity: usize,
    pub snr_db: Option<f64>,
    pub trials: usize,
    pub group_spec: GroupSpec,
    /// Alternative group layouts for a `groups` sweep.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group_options: Vec<Vec<usize>>,
    pub algorithms: Vec<AlgorithmPair>,
    pub sweep: Sweep,
    pub master_seed: u64,
    pub tau: f64,
    pub beta: f64,
    pub gamma: f64,
    pub bh_iters: usize,
    #[serde(default)]
    pub lg_iters: usize,
    #[serde(default)]
    pub support_model: SupportModel,
}

/// Parameters in force at one sweep point.
#[derive(Debug, Clone, PartialEq)]
struct Point {
    value: f64,
    m: usize,
    sparsity: usize,
    snr_db: Option<f64>,
    tau: f64,
    beta: f64,
    groups: GroupSpec,
}

impl CaseConfig {
    fn point(&self, value: f64) -> Result<Point> {
        let mut p = Point {
            value,
            m: self.m,
            sparsity: self.sparsity,
            snr_db: self.snr_db,
            tau: self.tau,
            beta: self.beta,
            groups: self.group_spec.clone(),
        };
        let as_count = |v: f64, what: &str| -> Result<usize> {
            if v >= 1.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(Error::Config(format!(
                    "{what} sweep value {v} is not a positive integer"
                )))
            }
        };
        match self.sweep.param {
            SweepParam::Tau => p.tau = value,
            SweepParam::SnrDb => p.snr_db = Some(value),
            SweepParam::Beta => p.beta = value,
            SweepParam::M => p.m = as_count(value, "m")?,
            SweepParam::Sparsity => {
                p.sparsity = as_count(value, "sparsity")?;
                p.groups =
                    GroupSpec::from_sparsity(self.group_spec.group_sizes.clone(), p.sparsity)?;
            }
            SweepParam::Groups => {
                let idx = as_count(value, "groups")?;
                let sizes = self.group_options.get(idx - 1).ok_or_else(|| {
                    Error::Config(format!(
                        "groups sweep value {idx} has no matching group option"
                    ))
                })?;
                p.groups = GroupSpec::from_sparsity(sizes.clone(), p.sparsity)?;
            }
        }
        Ok(p)
    }

    /// Rejects configurations that cannot run, before any computation.
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.sweep.values.is_empty() {
            return Err(Error::Config("sweep has no values".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithm pairs configured".into()));
        }
        if self.n == 0 || self.k == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        for &v in &self.sweep.values {
            let p = self.point(v)?;
            if p.groups.k() != self.k {
                return Err(Error::Config(format!(
                    "group sizes sum to {} but k = {}",
                    p.groups.k(),
                    self.k
                )));
            }
            if let Err(Error::InfeasibleGroup { group, prob }) = p.groups.validate() {
                return Err(Error::Config(format!(
                    "sparsity {} needs probability {prob} in group {group} of {:?}",
                    p.sparsity, p.groups.group_sizes
                )));
            }
            if p.m == 0 || p.m > self.n {
                return Err(Error::Config(format!(
                    "m = {} must lie in 1..={}",
                    p.m, self.n
                )));
            }
            if p.sparsity > p.m || p.sparsity > self.k {
                return Err(Error::Config(format!(
                    "sparsity {} exceeds m = {}",
                    p.sparsity, p.m
                )));
            }
            if !(p.tau > 0.0 && p.tau <= 1.0) {
                return Err(Error::Config(format!("tau {} outside (0, 1]", p.tau)));
            }
            if !(p.beta >= 0.0) {
                return Err(Error::Config(format!("beta {} is negative", p.beta)));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!(
                "gamma {} outside [0, 1]",
                self.gamma
            )));
        }
        for a in &self.algorithms {
            if let Some(t) = a.tau {
                if !(t > 0.0 && t <= 1.0) {
                    return Err(Error::Config(format!("tau override {t} outside (0, 1]")));
                }
            }
        }
        Ok(())
    }
}

/// One aggregated (sweep point, algorithm pair) record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub design: String,
    pub recovery: RecoveryKind,
    pub mse: f64,
    pub e_r: f64,
    pub trials: usize,
    pub seed: u64,
    pub mse_se: f64,
    #[serde(skip)]
    pub per_trial_mse: Vec<f64>,
    #[serde(skip)]
    pub per_trial_support: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentResult {
    pub rows: Vec<ResultRow>,
}

impl ExperimentResult {
    pub fn find(
        &self,
        sweep_value: f64,
        design: &str,
        recovery: RecoveryKind,
    ) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.design == design && r.recovery == recovery)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:?},{},{},{:?},{:?},{},{},{:?}",
                r.sweep_value, r.design, r.recovery, r.mse, r.e_r, r.trials, r.seed, r.mse_se
            );
        }
        out
    }
}

pub fn emit_csv(result: &ExperimentResult, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, result.to_csv()).map_err(|e| Error::io(path, e))
}

/// Paired mean difference `a − b` with its standard error.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let n = a.len().min(b.len());
    if n == 0 {
        return (0.0, 0.0);
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_and_se(&diffs)
}

pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

fn round_half_away(v: f64) -> usize {
    v.round().max(0.0) as usize
}

/// Rescales group lengths to sum to `k` (largest remainder, ties to the
/// lowest index), keeping every group nonempty.
pub fn rescale_groups(sizes: &[usize], k: usize) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let exact: Vec<f64> = sizes
        .iter()
        .map(|&s| s as f64 * k as f64 / total as f64)
        .collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut remaining = k.saturating_sub(out.iter().sum());
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &i in order.iter().cycle().take(sizes.len() * 2) {
        if remaining == 0 {
            break;
        }
        out[i] += 1;
        remaining -= 1;
    }
    // keep groups nonempty by borrowing from the largest
    for i in 0..out.len() {
        if out[i] == 0 {
            let donor = (0..out.len())
                .max_by_key(|&j| (out[j], usize::MAX - j))
                .unwrap();
            out[donor] -= 1;
            out[i] = 1;
        }
    }
    out
}

fn scale_counts(values: &[f64], scale: usize) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        let s = round_half_away(v / scale as f64).max(1) as f64;
        if !out.contains(&s) {
            out.push(s);
        }
    }
    out
}

/// Full-scale defaults divided by a desk-scale factor (`scale = 1` keeps
/// M = 50, N = 200, K = 240, S = 12, L = 1000).
pub fn default_config(case_id: CaseId, scale: usize) -> Result<CaseConfig> {
    if scale == 0 {
        return Err(Error::Config("scale factor must be at least 1".into()));
    }
    let div = |v: usize| round_half_away(v as f64 / scale as f64).max(1);
    let (m, n, k, s) = (div(50), div(200), div(240), div(12));
    let trials = div(1000);
    let groups = rescale_groups(&[160, 50, 20, 10], k);

    use DesignKind::*;
    use RecoveryKind::*;
    let six_designs_omp = vec![
        AlgorithmPair::new(Random, Omp),
        AlgorithmPair::new(Dcs, Omp),
        AlgorithmPair::new(Lg, Omp),
        AlgorithmPair::new(Bh, Omp),
        AlgorithmPair::pwdsmd_without_prior(Omp),
        AlgorithmPair::new(Pwdsmd, Omp),
    ];
    let eight_systems: Vec<AlgorithmPair> = [Random, Dcs, Bh, Pwdsmd]
        .into_iter()
        .flat_map(|d| [AlgorithmPair::new(d, Omp), AlgorithmPair::new(d, Pdomp)])
        .collect();
    let m_values = scale_counts(&[40.0, 50.0, 60.0, 70.0], scale);
    let s_values = scale_counts(&[8.0, 12.0, 16.0, 20.0, 24.0], scale);

    let (algorithms, sweep, group_options) = match case_id {
        CaseId::TauSweep => (
            vec![AlgorithmPair::new(Pwdsmd, Omp)],
            Sweep {
                param: SweepParam::Tau,
                values: vec![0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0],
            },
            vec![],
        ),
        CaseId::SnrSweep => (
            six_designs_omp,
            Sweep {
                param: SweepParam::SnrDb,
                values: vec![10.0, 15.0, 20.0, 25.0, 30.0],
            },
            vec![],
        ),
        CaseId::SparsitySweep => (
            six_designs_omp,
            Sweep {
                param: SweepParam::Sparsity,
                values: s_values,
            },
            vec![],
        ),
        CaseId::MSweep => (
            six_designs_omp,
            Sweep {
                param: SweepParam::M,
                values: m_values,
            },
            vec![],
        ),
        CaseId::BetaSweep => (
            vec![
                AlgorithmPair::new(Random, Pdomp),
                AlgorithmPair::new(Pwdsmd, Pdomp),
            ],
            Sweep {
                param: SweepParam::Beta,
                values: vec![1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0],
            },
            vec![],
        ),
        CaseId::SystemCompare => (
            vec![
                AlgorithmPair::new(Pwdsmd, Pdomp),
                AlgorithmPair::new(Random, Lwomp),
            ],
            Sweep {
                param: SweepParam::M,
                values: m_values,
            },
            vec![],
        ),
        CaseId::SystemSparsity => (
            eight_systems,
            Sweep {
                param: SweepParam::Sparsity,
                values: s_values,
            },
            vec![],
        ),
        CaseId::SystemM => (
            eight_systems,
            Sweep {
                param: SweepParam::M,
                values: m_values,
            },
            vec![],
        ),
        CaseId::EntropyCompare => (
            vec![AlgorithmPair::new(Pwdsmd, Pdomp)],
            Sweep {
                param: SweepParam::Groups,
                values: vec![1.0, 2.0, 3.0, 4.0],
            },
            ENTROPY_GROUPS
                .iter()
                .map(|g| rescale_groups(g, k))
                .collect(),
        ),
    };

    Ok(CaseConfig {
        case_id,
        m,
        n,
        k,
        sparsity: s,
        snr_db: Some(20.0),
        trials,
        group_spec: GroupSpec::from_sparsity(groups, s)?,
        group_options,
        algorithms,
        sweep,
        master_seed: 0,
        tau: 0.2,
        beta: DEFAULT_BETA,
        gamma: 0.5,
        bh_iters: DEFAULT_BH_ITERS,
        lg_iters: 0,
        support_model: SupportModel::Bernoulli,
    })
}

struct Designed {
    equivalent: EquivalentDictionary,
    phi: SensingMatrix,
}

/// Runs on the current rayon pool.
pub fn run_case(cfg: &CaseConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let seed = Seed(cfg.master_seed);
    let psi = gen_dictionary(cfg.n, cfg.k, seed.derive("psi"))?;
    let mut rows = Vec::new();
    for &value in &cfg.sweep.values {
        let point = cfg.point(value)?;
        rows.extend(run_point(cfg, &psi, &point, seed)?);
    }
    Ok(ExperimentResult { rows })
}

/// Runs with a dedicated pool of `workers` threads.
pub fn run_case_with_workers(cfg: &CaseConfig, workers: usize) -> Result<ExperimentResult> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    pool.install(|| run_case(cfg))
}

fn run_point(
    cfg: &CaseConfig,
    psi: &Dictionary,
    point: &Point,
    seed: Seed,
) -> Result<Vec<ResultRow>> {
    let train = gen_batch_with(
        psi,
        &point.groups,
        cfg.support_model,
        cfg.trials,
        None,
        seed.derive("train"),
    )?;
    let xi = extract_prior(&train.coefficients)?;
    let g_bar = mean_nonzero_magnitude(&train.coefficients).unwrap_or(1.0);
    let test = gen_batch_with(
        psi,
        &point.groups,
        cfg.support_model,
        cfg.trials,
        point.snr_db,
        seed.derive("test"),
    )?;

    let design_seed = seed.derive("design");
    let phi0 = SensingMatrix::new(
        gaussian_matrix(point.m, cfg.n, design_seed.derive("phi0")),
        DesignKind::Random,
    )?;

    // one design per distinct (kind, τ)
    let mut designs: BTreeMap<(DesignKind, u64), Designed> = BTreeMap::new();
    let mut design_of = Vec::with_capacity(cfg.algorithms.len());
    for pair in &cfg.algorithms {
        let tau = pair.tau.unwrap_or(point.tau);
        let key = (
            pair.design,
            if pair.design == DesignKind::Pwdsmd {
                tau.to_bits()
            } else {
                0
            },
        );
        if let Entry::Vacant(slot) = designs.entry(key) {
            let phi = match pair.design {
                DesignKind::Pwdsmd => {
                    let prior = weight_matrix(&xi, tau)?;
                    design_pwdsmd(psi, &prior, &phi0)?.0
                }
                kind => {
                    let mut params = DesignParams::new(kind, point.m, cfg.master_seed);
                    params.gamma = Some(cfg.gamma);
                    params.iters = Some(if kind == DesignKind::Lg {
                        cfg.lg_iters
                    } else {
                        cfg.bh_iters
                    });
                    design_baseline(kind, psi, &params, design_seed)?.0
                }
            };
            let equivalent = equivalent_dictionary(&phi, psi)?;
            slot.insert(Designed { equivalent, phi });
        }
        design_of.push(key);
    }

    let rcfg = RecoveryConfig {
        sparsity: point.sparsity,
        beta: point.beta,
        g_bar,
        ..RecoveryConfig::new(point.sparsity)
    };
    rcfg.validate()?;

    let n = cfg.n as f64;
    let per_trial: Vec<Vec<(f64, Option<f64>)>> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| -> Result<Vec<(f64, Option<f64>)>> {
            let x = test.signals.column(t).into_owned();
            let mut out = Vec::with_capacity(cfg.algorithms.len());
            let mut measured: BTreeMap<(DesignKind, u64), DVector<f64>> = BTreeMap::new();
            for (pair, key) in cfg.algorithms.iter().zip(&design_of) {
                let designed = &designs[key];
                let y = measured
                    .entry(*key)
                    .or_insert_with(|| designed.phi.entries() * &x)
                    .clone();
                let r = recover(pair.recovery, &y, &designed.equivalent, Some(&xi), &rcfg)?;
                let x_hat = psi.entries() * &r.coefficients;
                let err = (&x - x_hat).norm_squared() / n;
                out.push((err, support_fraction(&test.supports[t], &r.support)));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(cfg.algorithms.len());
    for (a, pair) in cfg.algorithms.iter().enumerate() {
        let errs: Vec<f64> = per_trial.iter().map(|t| t[a].0).collect();
        let fracs: Vec<Option<f64>> = per_trial.iter().map(|t| t[a].1).collect();
        let (mse, mse_se) = mean_and_se(&errs);
        let counted: Vec<f64> = fracs.iter().flatten().copied().collect();
        let e_r = if counted.is_empty() {
            0.0
        } else {
            counted.iter().sum::<f64>() / counted.len() as f64
        };
        rows.push(ResultRow {
            sweep_value: point.value,
            design: pair.design_label(),
            recovery: pair.recovery,
            mse,
            e_r,
            trials: cfg.trials,
            seed: cfg.master_seed,
            mse_se,
            per_trial_mse: errs,
            per_trial_support: fracs,
        });
    }
    Ok(rows)
}
