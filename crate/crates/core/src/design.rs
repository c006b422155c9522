//! Sensing-matrix design.
//!
//! The prior-weighted design minimizes
//!
//! ```text
//! f(Φ) = ‖W(ΨᵀΨ − ΨᵀΦᵀΦΨ)W‖_F² = ‖Ψ̂ᵀΨ̂ − Ψ̂ᵀΦᵀΦΨ̂‖_F²,   Ψ̂ = ΨW
//! ```
//!
//! in closed form from the SVD `Ψ̂ = U_Ψ̂ [Σ 0; 0 0] Vᵀ`. The minimum is
//! `Σ_{k>M̄} σ_k⁴` and is attained by `Φ = [Θ̂₁ Θ₂] U_Ψ̂ᵀ`.
//!
//! The baselines (`random`, `dcs`, `lg`, `bh`) are the comparison designs of
//! the experiments.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{frobenius_sq, full_svd, symmetric_eigen_desc};
use crate::metrics::welch_bound;
use crate::model::{
    gram, normalize_columns, DesignKind, Dictionary, GramMatrix, GramSource, SensingMatrix,
};
use crate::prior::PriorProfile;
use crate::rng::Seed;
use crate::synthetic::gaussian_matrix;

/// Singular values below `RANK_TOL · σ_max` are treated as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Default alternating rounds for the `bh` design.
pub const DEFAULT_BH_ITERS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    /// Full N×N left singular basis.
    pub u: DMatrix<f64>,
    /// The `n_bar` positive singular values, nonincreasing.
    pub sigma: DVector<f64>,
    /// Right singular vectors matching `sigma` (K×N̄).
    pub v: DMatrix<f64>,
    pub n_bar: usize,
    pub m_bar: usize,
}

impl SpectralDecomposition {
    pub fn new(a: &DMatrix<f64>, m: usize) -> Result<Self> {
        let (u, s, v) = full_svd(a);
        let sigma_max = s.iter().copied().fold(0.0, f64::max);
        if !(sigma_max > 0.0) {
            return Err(Error::DegenerateInput("matrix has rank zero".into()));
        }
        let n_bar = s.iter().filter(|&&x| x > RANK_TOL * sigma_max).count();
        Ok(SpectralDecomposition {
            u,
            sigma: s.rows(0, n_bar).into_owned(),
            v: v.columns(0, n_bar).into_owned(),
            n_bar,
            m_bar: m.min(n_bar),
        })
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    /// `Σ_{k>M̄} σ_k⁴`, the minimum of the Gram-matching objective.
    pub fn trailing_spectrum_sum(&self) -> f64 {
        self.sigma.iter().skip(self.m_bar).map(|s| s.powi(4)).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub objective: f64,
    pub trailing_spectrum_sum: f64,
    pub theta2_source: String,
    pub iterations: usize,
}

impl DesignReport {
    /// JSON sidecar written next to a designed matrix.
    pub fn sidecar_json(&self) -> String {
        serde_json::json!({
            "objective": self.objective,
            "trailing_spectrum_sum": self.trailing_spectrum_sum,
        })
        .to_string()
    }
}

/// Design parameters as accepted on the command line / in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignParams {
    pub algo: DesignKind,
    pub m: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu_bar: Option<f64>,
    pub seed: u64,
}

impl DesignParams {
    pub fn new(algo: DesignKind, m: usize, seed: u64) -> Self {
        DesignParams {
            algo,
            m,
            tau: None,
            gamma: None,
            iters: None,
            mu_bar: None,
            seed,
        }
    }
}

/// `Ψ̂ = ΨW`.
fn weighted_dictionary(psi: &Dictionary, prior: &PriorProfile) -> Result<DMatrix<f64>> {
    if prior.k() != psi.k() {
        return Err(Error::mismatch("prior length", psi.k(), prior.k()));
    }
    let mut psi_hat = psi.entries().clone();
    for (j, mut col) in psi_hat.column_iter_mut().enumerate() {
        col *= prior.weight[j];
    }
    Ok(psi_hat)
}

pub fn pwdsmd_objective(
    phi: &SensingMatrix,
    psi: &Dictionary,
    prior: &PriorProfile,
) -> Result<f64> {
    if phi.n() != psi.n() {
        return Err(Error::mismatch("objective", psi.n(), phi.n()));
    }
    let psi_hat = weighted_dictionary(psi, prior)?;
    Ok(weighted_residual(phi.entries(), &psi_hat))
}

fn weighted_residual(phi: &DMatrix<f64>, psi_hat: &DMatrix<f64>) -> f64 {
    let target = psi_hat.tr_mul(psi_hat);
    let d = phi * psi_hat;
    frobenius_sq(&(target - d.tr_mul(&d)))
}

/// Orthonormal choices left free by the closed-form solution.
#[derive(Debug, Clone, Default)]
pub struct PwdsmdFreedoms {
    /// M×M; identity when absent.
    pub u: Option<DMatrix<f64>>,
    /// (N̄−M̄)×(N̄−M̄); identity when absent.
    pub v22: Option<DMatrix<f64>>,
}

pub fn design_pwdsmd(
    psi: &Dictionary,
    prior: &PriorProfile,
    phi0: &SensingMatrix,
) -> Result<(SensingMatrix, DesignReport)> {
    design_pwdsmd_with(psi, prior, phi0, &PwdsmdFreedoms::default())
}

pub fn design_pwdsmd_with(
    psi: &Dictionary,
    prior: &PriorProfile,
    phi0: &SensingMatrix,
    freedoms: &PwdsmdFreedoms,
) -> Result<(SensingMatrix, DesignReport)> {
    let (m, n) = (phi0.m(), phi0.n());
    if n != psi.n() {
        return Err(Error::mismatch(
            "initial sensing matrix columns",
            psi.n(),
            n,
        ));
    }
    let psi_hat = weighted_dictionary(psi, prior)?;
    let spec = SpectralDecomposition::new(&psi_hat, m)?;
    let (n_bar, m_bar) = (spec.n_bar, spec.m_bar);

    let u_free = match &freedoms.u {
        Some(u) if u.shape() != (m, m) => {
            return Err(Error::mismatch(
                "U freedom",
                format!("{m}x{m}"),
                format!("{:?}", u.shape()),
            ))
        }
        Some(u) => u.clone(),
        None => DMatrix::identity(m, m),
    };
    let tail = n_bar - m_bar;
    let v22 = match &freedoms.v22 {
        Some(v) if v.shape() != (tail, tail) => {
            return Err(Error::mismatch(
                "V22 freedom",
                format!("{tail}x{tail}"),
                format!("{:?}", v.shape()),
            ))
        }
        Some(v) => v.clone(),
        None => DMatrix::identity(tail, tail),
    };

    // [Σ_Ψ̂(1:M̄,1:M̄) 0; 0 0], M×N̄
    let mut core = DMatrix::zeros(m, n_bar);
    for k in 0..m_bar {
        core[(k, k)] = spec.sigma[k];
    }
    // Ṽ = blockdiag(I_M̄, V22)
    let mut v_tilde = DMatrix::zeros(n_bar, n_bar);
    v_tilde
        .view_mut((0, 0), (m_bar, m_bar))
        .fill_with_identity();
    v_tilde
        .view_mut((m_bar, m_bar), (tail, tail))
        .copy_from(&v22);
    let sigma_inv = DMatrix::from_diagonal(&spec.sigma.map(|s| s.recip()));
    let theta1 = &u_free * core * v_tilde * sigma_inv;

    let null_basis = spec.u.columns(n_bar, n - n_bar);
    let theta2 = phi0.entries() * null_basis;

    let mut theta = DMatrix::zeros(m, n);
    theta.columns_mut(0, n_bar).copy_from(&theta1);
    theta.columns_mut(n_bar, n - n_bar).copy_from(&theta2);
    let phi_opt = theta * spec.u.transpose();

    let objective = weighted_residual(&phi_opt, &psi_hat);
    let report = DesignReport {
        objective,
        trailing_spectrum_sum: spec.trailing_spectrum_sum(),
        theta2_source: if n_bar == n {
            "empty (full-rank weighted dictionary)".to_string()
        } else {
            format!(
                "phi0 projected on the {} trailing left singular vectors",
                n - n_bar
            )
        },
        iterations: 0,
    };
    let phi = SensingMatrix::new(phi_opt, DesignKind::Pwdsmd)?
        .with_param("m", m as f64)
        .with_param("tau", prior.tau)
        .with_objective(objective);
    Ok((phi, report))
}

/// Baseline designs. `pwdsmd` is rejected here, use [`design_pwdsmd`].
///
/// Reported objectives: `random` and `lg` report the unweighted Gram
/// mismatch `‖G_d − G‖_F²`; `dcs` reports its own cost
/// `‖ΨΨᵀ − ΨΨᵀΦᵀΦΨΨᵀ‖_F²`; `bh` reports the trade-off cost at the last
/// ETF target.
pub fn design_baseline(
    kind: DesignKind,
    psi: &Dictionary,
    params: &DesignParams,
    seed: Seed,
) -> Result<(SensingMatrix, DesignReport)> {
    let m = params.m;
    let n = psi.n();
    if m == 0 || m > n {
        return Err(Error::InvalidParameter(format!(
            "m must lie in 1..={n}, got {m}"
        )));
    }
    match kind {
        DesignKind::Random => {
            let phi = gaussian_matrix(m, n, seed.derive("phi0"));
            let spec = SpectralDecomposition::new(psi.entries(), m)?;
            let objective = gram_mismatch(&phi, psi.entries());
            finish(phi, kind, m, objective, spec.trailing_spectrum_sum(), 0)
        }
        DesignKind::Dcs => {
            let spec = SpectralDecomposition::new(psi.entries(), m)?;
            let phi = inverse_spectrum_rows(&spec, m, &DMatrix::identity(spec.n_bar, spec.n_bar));
            let objective = dcs_objective(&phi, psi.entries());
            finish(phi, kind, m, objective, spec.trailing_spectrum_sum(), 0)
        }
        DesignKind::Lg => {
            let spec = SpectralDecomposition::new(psi.entries(), m)?;
            let iters = params.iters.unwrap_or(0);
            let mu_bar = params.mu_bar.unwrap_or_else(|| welch_bound(m, psi.k()));
            let mut v11 = DMatrix::identity(spec.n_bar, spec.n_bar);
            let mut phi = inverse_spectrum_rows(&spec, m, &v11);
            for _ in 0..iters {
                let target = etf_target(&phi, psi, mu_bar)?;
                let c = spec.v.transpose() * &target.entries * &spec.v;
                v11 = symmetric_eigen_desc(&c).1;
                phi = inverse_spectrum_rows(&spec, m, &v11);
            }
            let objective = gram_mismatch(&phi, psi.entries());
            finish(phi, kind, m, objective, spec.trailing_spectrum_sum(), iters)
        }
        DesignKind::Bh => {
            let gamma = params.gamma.unwrap_or(0.5);
            if !(0.0..=1.0).contains(&gamma) {
                return Err(Error::InvalidParameter(format!(
                    "gamma must lie in [0, 1], got {gamma}"
                )));
            }
            let iters = params.iters.unwrap_or(DEFAULT_BH_ITERS);
            let mu_bar = params.mu_bar.unwrap_or_else(|| welch_bound(m, psi.k()));
            let spec = SpectralDecomposition::new(psi.entries(), m)?;
            let g_d = psi.entries().tr_mul(psi.entries());

            let mut phi = gaussian_matrix(m, n, seed.derive("phi0"));
            let mut g_t = etf_target(&phi, psi, mu_bar)?;
            for round in 0..iters {
                if round > 0 {
                    g_t = etf_target(&phi, psi, mu_bar)?;
                }
                let target = (1.0 - gamma) * &g_d + gamma * &g_t.entries;
                phi = psd_pullback(&spec, &target, m);
            }
            let d = &phi * psi.entries();
            let g = d.tr_mul(&d);
            let objective = (1.0 - gamma) * frobenius_sq(&(&g_d - &g))
                + gamma * frobenius_sq(&(&g_t.entries - &g));
            let (phi, report) =
                finish(phi, kind, m, objective, spec.trailing_spectrum_sum(), iters)?;
            Ok((phi.with_param("gamma", gamma), report))
        }
        DesignKind::Pwdsmd => Err(Error::InvalidParameter(
            "pwdsmd is not a baseline design; use design_pwdsmd".into(),
        )),
    }
}

fn finish(
    phi: DMatrix<f64>,
    kind: DesignKind,
    m: usize,
    objective: f64,
    trailing: f64,
    iterations: usize,
) -> Result<(SensingMatrix, DesignReport)> {
    let report = DesignReport {
        objective,
        trailing_spectrum_sum: trailing,
        theta2_source: "n/a".into(),
        iterations,
    };
    let phi = SensingMatrix::new(phi, kind)?
        .with_param("m", m as f64)
        .with_objective(objective);
    Ok((phi, report))
}

/// `[I_M 0] [V11ᵀ Σ⁻¹ 0; 0 0] U_Ψᵀ`; with `V11 = I` this is also the exact
/// minimizer of the `dcs` cost.
fn inverse_spectrum_rows(
    spec: &SpectralDecomposition,
    m: usize,
    v11: &DMatrix<f64>,
) -> DMatrix<f64> {
    let n = spec.n();
    let n_bar = spec.n_bar;
    let sigma_inv = DMatrix::from_diagonal(&spec.sigma.map(|s| s.recip()));
    let block = v11.transpose() * sigma_inv;
    let mut left = DMatrix::zeros(m, n);
    let rows = m.min(n_bar);
    left.view_mut((0, 0), (rows, n_bar))
        .copy_from(&block.rows(0, rows));
    left * spec.u.transpose()
}

/// Best rank-≤M PSD fit of `target` by `ΨᵀΦᵀΦΨ`, solved for `Φ`.
fn psd_pullback(spec: &SpectralDecomposition, target: &DMatrix<f64>, m: usize) -> DMatrix<f64> {
    let n_bar = spec.n_bar;
    let c = spec.v.transpose() * target * &spec.v;
    let (vals, vecs) = symmetric_eigen_desc(&c);
    let mut phi_u1 = DMatrix::zeros(m, n_bar);
    for k in 0..m.min(n_bar) {
        if vals[k] <= 0.0 {
            break;
        }
        let root = vals[k].sqrt();
        for j in 0..n_bar {
            phi_u1[(k, j)] = root * vecs[(j, k)] / spec.sigma[j];
        }
    }
    phi_u1 * spec.u.columns(0, n_bar).transpose()
}

fn etf_target(phi: &DMatrix<f64>, psi: &Dictionary, mu_bar: f64) -> Result<GramMatrix> {
    let (normalized, _) = normalize_columns(&(phi * psi.entries()))?;
    let g = gram(&normalized, GramSource::Equivalent)?;
    Ok(etf_project(&g, mu_bar))
}

fn gram_mismatch(phi: &DMatrix<f64>, psi: &DMatrix<f64>) -> f64 {
    let d = phi * psi;
    frobenius_sq(&(psi.tr_mul(psi) - d.tr_mul(&d)))
}

/// `‖ΨΨᵀ − ΨΨᵀΦᵀΦΨΨᵀ‖_F²`.
pub fn dcs_objective(phi: &DMatrix<f64>, psi: &DMatrix<f64>) -> f64 {
    let pp = psi * psi.transpose();
    let inner = phi * &pp;
    frobenius_sq(&(&pp - inner.tr_mul(&inner)))
}

/// Projects a Gram matrix onto the set with unit diagonal and off-diagonal
/// magnitudes at most `mu_bar`.
pub fn etf_project(g: &GramMatrix, mu_bar: f64) -> GramMatrix {
    let k = g.k();
    let mut out = g.entries.clone();
    for j in 0..k {
        for i in 0..k {
            out[(i, j)] = if i == j {
                1.0
            } else {
                let v = g.entries[(i, j)];
                v.signum() * v.abs().min(mu_bar)
            };
        }
    }
    GramMatrix {
        entries: out,
        source: g.source,
    }
}
