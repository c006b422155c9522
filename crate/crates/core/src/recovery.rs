//! Greedy sparse recovery.
//!
//! All three algorithms share one loop: pick the unselected atom with the
//! highest score, refit by least squares on the accumulated atoms, update
//! the residual. They differ only in the score:
//!
//! * `omp`: `|D̄(:,i)ᵀ r|`
//! * `pdomp`: `|D̄(:,i)ᵀ r| + ω_k · tan(π ξ(i) − π/2)`, `ω_k = β (S + 1 − k)`
//! * `lw_omp`: `|D(:,i)ᵀ r| + (ḡ/2)(2S − 1) · ln(p(i) / (1 − p(i)))`
//!
//! Exactly `S` atoms are selected; ties go to the lowest index.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{equivalent_dictionary, Dictionary, EquivalentDictionary, SensingMatrix};
use crate::prior::{check_probabilities, ZERO_TOL};

pub const DEFAULT_XI_CLAMP: f64 = 1e-6;
pub const DEFAULT_BETA: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RecoveryConfig {
    pub sparsity: usize,
    pub beta: f64,
    pub g_bar: f64,
    pub xi_clamp: f64,
}

impl RecoveryConfig {
    pub fn new(sparsity: usize) -> Self {
        RecoveryConfig {
            sparsity,
            beta: DEFAULT_BETA,
            g_bar: 1.0,
            xi_clamp: DEFAULT_XI_CLAMP,
        }
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = beta;
        self
    }

    pub fn with_g_bar(mut self, g_bar: f64) -> Self {
        self.g_bar = g_bar;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sparsity == 0 {
            return Err(Error::InvalidParameter(
                "sparsity must be at least 1".into(),
            ));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and >= 0, got {}",
                self.beta
            )));
        }
        if !(self.g_bar >= 0.0) || !self.g_bar.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "g_bar must be finite and >= 0, got {}",
                self.g_bar
            )));
        }
        if !(self.xi_clamp > 0.0 && self.xi_clamp < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "xi_clamp must lie in (0, 0.5), got {}",
                self.xi_clamp
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryResult {
    /// Estimated `α̂` (length K).
    pub coefficients: DVector<f64>,
    /// Selected atoms in selection order.
    pub support: Vec<usize>,
    /// Least-squares weights on the selected atoms of the dictionary the
    /// algorithm worked on, in selection order.
    pub atom_coefficients: Vec<f64>,
    /// `‖r_0‖ … ‖r_S‖`.
    pub residual_norms: Vec<f64>,
    /// Set when some refit hit a rank-deficient atom set.
    pub rank_deficient: bool,
}

impl RecoveryResult {
    pub fn sorted_support(&self) -> Vec<usize> {
        let mut s = self.support.clone();
        s.sort_unstable();
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecoveryKind {
    Omp,
    Pdomp,
    Lwomp,
}

impl RecoveryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecoveryKind::Omp => "omp",
            RecoveryKind::Pdomp => "pdomp",
            RecoveryKind::Lwomp => "lwomp",
        }
    }
}

impl fmt::Display for RecoveryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RecoveryKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "omp" => Ok(RecoveryKind::Omp),
            "pdomp" => Ok(RecoveryKind::Pdomp),
            "lwomp" | "lw-omp" | "lw_omp" => Ok(RecoveryKind::Lwomp),
            other => Err(Error::InvalidParameter(format!(
                "unknown recovery algorithm `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: DVector<f64>,
    pub rank_deficient: bool,
}

/// Minimum-norm least-squares fit of `y` on the columns of `atoms`.
pub fn least_squares_on_support(y: &DVector<f64>, atoms: &DMatrix<f64>) -> Result<LeastSquares> {
    if atoms.nrows() != y.len() {
        return Err(Error::mismatch("least squares", y.len(), atoms.nrows()));
    }
    let cols = atoms.ncols();
    if cols == 0 {
        return Ok(LeastSquares {
            coefficients: DVector::zeros(0),
            rank_deficient: false,
        });
    }
    let svd = atoms.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let eps = sigma_max * atoms.nrows().max(cols) as f64 * f64::EPSILON;
    let rank_deficient = cols > atoms.nrows() || svd.singular_values.iter().any(|&s| s <= eps);
    let coefficients = if sigma_max > 0.0 {
        svd.solve(y, eps)
            .map_err(|e| Error::DegenerateInput(e.to_string()))?
    } else {
        DVector::zeros(cols)
    };
    Ok(LeastSquares {
        coefficients,
        rank_deficient,
    })
}

struct Pursuit {
    support: Vec<usize>,
    weights: DVector<f64>,
    residual_norms: Vec<f64>,
    rank_deficient: bool,
}

/// Shared greedy loop; `bonus(k, i)` is added to `|atoms(:,i)ᵀ r|` at
/// iteration `k` (1-based).
fn pursue(
    y: &DVector<f64>,
    atoms: &DMatrix<f64>,
    s: usize,
    bonus: impl Fn(usize, usize) -> f64,
) -> Result<Pursuit> {
    let (m, k) = atoms.shape();
    if y.len() != m {
        return Err(Error::mismatch("measurement length", m, y.len()));
    }
    if s == 0 || s > m || s > k {
        return Err(Error::InvalidParameter(format!(
            "sparsity {s} must lie in 1..={}",
            m.min(k)
        )));
    }

    let mut selected = vec![false; k];
    let mut support = Vec::with_capacity(s);
    let mut residual = y.clone();
    let mut residual_norms = Vec::with_capacity(s + 1);
    residual_norms.push(residual.norm());
    let mut weights = DVector::zeros(0);
    let mut rank_deficient = false;

    for iter in 1..=s {
        let corr = atoms.tr_mul(&residual);
        let mut best: Option<(usize, f64)> = None;
        for i in 0..k {
            if selected[i] {
                continue;
            }
            let score = corr[i].abs() + bonus(iter, i);
            match best {
                Some((_, b)) if !(score > b) => {}
                _ => best = Some((i, score)),
            }
        }
        let (chosen, _) = best.expect("s <= k leaves a candidate");
        selected[chosen] = true;
        support.push(chosen);

        let xi = atoms.select_columns(support.iter());
        let ls = least_squares_on_support(y, &xi)?;
        rank_deficient |= ls.rank_deficient;
        residual = y - &xi * &ls.coefficients;
        residual_norms.push(residual.norm());
        weights = ls.coefficients;
    }

    Ok(Pursuit {
        support,
        weights,
        residual_norms,
        rank_deficient,
    })
}

/// Scatters the normalized-atom weights onto the support and applies `S_c`.
fn denormalize(p: Pursuit, scale: &DVector<f64>) -> RecoveryResult {
    let mut coefficients = DVector::zeros(scale.len());
    for (&i, &w) in p.support.iter().zip(p.weights.iter()) {
        coefficients[i] = w * scale[i];
    }
    if p.rank_deficient {
        log::warn!("rank-deficient refit on support {:?}", p.support);
    }
    RecoveryResult {
        coefficients,
        atom_coefficients: p.weights.iter().copied().collect(),
        support: p.support,
        residual_norms: p.residual_norms,
        rank_deficient: p.rank_deficient,
    }
}

/// Plain OMP on the normalized equivalent dictionary.
pub fn omp(y: &DVector<f64>, d: &EquivalentDictionary, s: usize) -> Result<RecoveryResult> {
    let p = pursue(y, &d.normalized, s, |_, _| 0.0)?;
    Ok(denormalize(p, &d.scale))
}

/// Plain OMP on an arbitrary (not necessarily normalized) atom matrix;
/// coefficients are the raw least-squares weights.
pub fn omp_raw(y: &DVector<f64>, d: &DMatrix<f64>, s: usize) -> Result<RecoveryResult> {
    let p = pursue(y, d, s, |_, _| 0.0)?;
    Ok(denormalize(p, &DVector::from_element(d.ncols(), 1.0)))
}

/// `tan(π ξ − π/2)` after clamping `ξ` into `[ε, 1 − ε]`.
pub fn probability_penalty(xi: &DVector<f64>, clamp: f64) -> DVector<f64> {
    xi.map(|p| (PI * p.clamp(clamp, 1.0 - clamp) - FRAC_PI_2).tan())
}

pub fn pdomp(
    y: &DVector<f64>,
    phi: &SensingMatrix,
    psi: &Dictionary,
    xi: &DVector<f64>,
    cfg: &RecoveryConfig,
) -> Result<RecoveryResult> {
    let d = equivalent_dictionary(phi, psi)?;
    pdomp_on(y, &d, xi, cfg)
}

/// PDOMP on a precomputed equivalent dictionary.
pub fn pdomp_on(
    y: &DVector<f64>,
    d: &EquivalentDictionary,
    xi: &DVector<f64>,
    cfg: &RecoveryConfig,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    if xi.len() != d.k() {
        return Err(Error::mismatch("xi length", d.k(), xi.len()));
    }
    check_probabilities(xi, "xi")?;
    let penalty = probability_penalty(xi, cfg.xi_clamp);
    let s = cfg.sparsity;
    let beta = cfg.beta;
    let p = pursue(y, &d.normalized, s, |k, i| {
        let omega = beta * (s + 1 - k) as f64;
        omega * penalty[i]
    })?;
    Ok(denormalize(p, &d.scale))
}

/// LW-OMP on the raw (unnormalized) equivalent dictionary.
pub fn lw_omp(
    y: &DVector<f64>,
    d: &DMatrix<f64>,
    p: &DVector<f64>,
    cfg: &RecoveryConfig,
) -> Result<RecoveryResult> {
    cfg.validate()?;
    if p.len() != d.ncols() {
        return Err(Error::mismatch("probability length", d.ncols(), p.len()));
    }
    check_probabilities(p, "p")?;
    let eps = cfg.xi_clamp;
    let weight = 0.5 * cfg.g_bar * (2.0 * cfg.sparsity as f64 - 1.0);
    let log_odds = p.map(|v| {
        let v = v.clamp(eps, 1.0 - eps);
        (v / (1.0 - v)).ln()
    });
    let pursuit = pursue(y, d, cfg.sparsity, |_, i| weight * log_odds[i])?;
    Ok(denormalize(pursuit, &DVector::from_element(d.ncols(), 1.0)))
}

/// Mean magnitude of the nonzero entries of a coefficient matrix.
pub fn mean_nonzero_magnitude(coeffs: &DMatrix<f64>) -> Option<f64> {
    let (sum, count) = coeffs
        .iter()
        .filter(|v| v.abs() > ZERO_TOL)
        .fold((0.0, 0usize), |(s, c), v| (s + v.abs(), c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// Dispatches one recovery by kind; `xi` is the prior for `pdomp` and the
/// probability vector for `lwomp`.
pub fn recover(
    kind: RecoveryKind,
    y: &DVector<f64>,
    d: &EquivalentDictionary,
    xi: Option<&DVector<f64>>,
    cfg: &RecoveryConfig,
) -> Result<RecoveryResult> {
    let need_prior = || xi.ok_or_else(|| Error::InvalidParameter(format!("{kind} needs a prior")));
    match kind {
        RecoveryKind::Omp => {
            cfg.validate()?;
            omp(y, d, cfg.sparsity)
        }
        RecoveryKind::Pdomp => pdomp_on(y, d, need_prior()?, cfg),
        RecoveryKind::Lwomp => lw_omp(y, &d.raw, need_prior()?, cfg),
    }
}
