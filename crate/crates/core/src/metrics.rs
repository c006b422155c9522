//! Recovery quality and dictionary coherence measures.

use std::collections::BTreeSet;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub mse: f64,
    pub e_r: f64,
    pub psnr_db: Option<f64>,
    pub mu: Option<f64>,
}

/// `(1/L) Σ_l ‖x_l − x̂_l‖² / N`.
pub fn mse(x: &DMatrix<f64>, x_hat: &DMatrix<f64>) -> Result<f64> {
    if x.shape() != x_hat.shape() {
        return Err(Error::mismatch(
            "mse",
            format!("{:?}", x.shape()),
            format!("{:?}", x_hat.shape()),
        ));
    }
    let (n, l) = x.shape();
    if n == 0 || l == 0 {
        return Err(Error::EmptyBatch);
    }
    let total: f64 = x
        .column_iter()
        .zip(x_hat.column_iter())
        .map(|(a, b)| (a - b).norm_squared() / n as f64)
        .sum();
    Ok(total / l as f64)
}

/// `|I ∩ Î| / |I|` for one trial; `None` when the true support is empty.
pub fn support_fraction(truth: &[usize], estimate: &[usize]) -> Option<f64> {
    if truth.is_empty() {
        return None;
    }
    let est: BTreeSet<usize> = estimate.iter().copied().collect();
    let truth_set: BTreeSet<usize> = truth.iter().copied().collect();
    let hits = truth_set.iter().filter(|i| est.contains(i)).count();
    Some(hits as f64 / truth_set.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SupportRecovery {
    pub rate: f64,
    pub counted: usize,
    /// Trials left out because their true support was empty.
    pub skipped: Vec<usize>,
}

pub fn support_recovery_rate(
    truth: &[Vec<usize>],
    estimates: &[Vec<usize>],
) -> Result<SupportRecovery> {
    if truth.len() != estimates.len() {
        return Err(Error::mismatch(
            "support lists",
            truth.len(),
            estimates.len(),
        ));
    }
    let mut sum = 0.0;
    let mut counted = 0;
    let mut skipped = Vec::new();
    for (l, (t, e)) in truth.iter().zip(estimates).enumerate() {
        match support_fraction(t, e) {
            Some(f) => {
                sum += f;
                counted += 1;
            }
            None => skipped.push(l),
        }
    }
    if counted == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(SupportRecovery {
        rate: sum / counted as f64,
        counted,
        skipped,
    })
}

/// Peak signal-to-noise ratio for 8-bit data; `+∞` at zero error.
pub fn psnr(mse_value: f64) -> f64 {
    if mse_value <= 0.0 {
        return f64::INFINITY;
    }
    let peak = 255.0f64;
    10.0 * (peak * peak / mse_value).log10()
}

/// Largest normalized inner product between distinct columns.
pub fn mutual_coherence(d: &DMatrix<f64>) -> Result<f64> {
    let k = d.ncols();
    if k < 2 {
        return Err(Error::InvalidParameter(
            "coherence needs at least two columns".into(),
        ));
    }
    let norms: Vec<f64> = d.column_iter().map(|c| c.norm()).collect();
    if let Some(index) = norms.iter().position(|&n| !(n > 0.0)) {
        return Err(Error::DegenerateColumn { index });
    }
    let g = d.tr_mul(d);
    let mut mu = 0.0f64;
    for j in 0..k {
        for i in 0..j {
            mu = mu.max(g[(i, j)].abs() / (norms[i] * norms[j]));
        }
    }
    Ok(mu.min(1.0))
}

/// `sqrt((K − M) / (M (K − 1)))`, the lower bound on the coherence of any M×K frame.
pub fn welch_bound(m: usize, k: usize) -> f64 {
    if m >= k || k < 2 {
        return 0.0;
    }
    let (m, k) = (m as f64, k as f64);
    ((k - m) / (m * (k - 1.0))).sqrt()
}

/// Sufficient condition for OMP to recover every `s`-sparse vector:
/// `s < (1 + 1/μ)/2`.
pub fn omp_guarantee_holds(s: usize, mu: f64) -> bool {
    (s as f64) < 0.5 * (1.0 + mu.recip())
}
