//! Matrix-valued domain types shared by the whole pipeline.
//!
//! A signal `x` of length N is represented in a dictionary `Ψ` (N×K) as
//! `x = Ψα`, compressed by a sensing matrix `Φ` (M×N) to `y = Φx`. The
//! product `D = ΦΨ` is the equivalent dictionary seen by the recovery stage.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on unit column norms.
pub const NORM_TOL: f64 = 1e-12;

/// Column-normalized sparsifying basis `Ψ` (N×K).
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    entries: DMatrix<f64>,
}

impl Dictionary {
    /// Builds a dictionary, rescaling every column to unit norm.
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::DegenerateInput(
                "dictionary must be non-empty".into(),
            ));
        }
        let (normalized, _) = normalize_columns(&entries)?;
        Ok(Dictionary {
            entries: normalized,
        })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    /// Signal dimension N.
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Atom count K.
    pub fn k(&self) -> usize {
        self.entries.ncols()
    }

    pub fn atom(&self, index: usize) -> DVector<f64> {
        self.entries.column(index).into_owned()
    }

    /// `Ψα`.
    pub fn synthesize(&self, coefficients: &DVector<f64>) -> Result<DVector<f64>> {
        if coefficients.len() != self.k() {
            return Err(Error::mismatch("synthesize", self.k(), coefficients.len()));
        }
        Ok(&self.entries * coefficients)
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.entries
    }
}

/// Which procedure produced a sensing matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Random,
    Dcs,
    Lg,
    Bh,
    Pwdsmd,
}

impl DesignKind {
    pub const ALL: [DesignKind; 5] = [
        DesignKind::Random,
        DesignKind::Dcs,
        DesignKind::Lg,
        DesignKind::Bh,
        DesignKind::Pwdsmd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            DesignKind::Random => "random",
            DesignKind::Dcs => "dcs",
            DesignKind::Lg => "lg",
            DesignKind::Bh => "bh",
            DesignKind::Pwdsmd => "pwdsmd",
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DesignKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown design kind `{s}`")))
    }
}

/// Projection `Φ` (M×N) together with the procedure that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingMatrix {
    entries: DMatrix<f64>,
    pub design: DesignKind,
    pub params: BTreeMap<String, f64>,
    pub objective: Option<f64>,
}

impl SensingMatrix {
    /// `M ≤ N` is accepted so that the square (no compression) corner cases
    /// of the designs can be expressed.
    pub fn new(entries: DMatrix<f64>, design: DesignKind) -> Result<Self> {
        let (m, n) = entries.shape();
        if m == 0 || m > n {
            return Err(Error::mismatch(
                "sensing matrix rows",
                format!("1..={n}"),
                m,
            ));
        }
        Ok(SensingMatrix {
            entries,
            design,
            params: BTreeMap::new(),
            objective: None,
        })
    }

    pub fn with_param(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }

    pub fn with_objective(mut self, objective: f64) -> Self {
        debug_assert!(objective >= 0.0);
        self.objective = Some(objective.max(0.0));
        self
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn m(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n(&self) -> usize {
        self.entries.ncols()
    }

    /// `y = Φx`.
    pub fn measure(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n() {
            return Err(Error::mismatch("measure", self.n(), x.len()));
        }
        Ok(&self.entries * x)
    }
}

/// `D = ΦΨ` with its column-normalized form `D̄ = D·S_c`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentDictionary {
    pub raw: DMatrix<f64>,
    pub normalized: DMatrix<f64>,
    /// Diagonal of `S_c`, i.e. reciprocal column norms of `raw`.
    pub scale: DVector<f64>,
}

impl EquivalentDictionary {
    pub fn from_raw(raw: DMatrix<f64>) -> Result<Self> {
        let (normalized, scale) = normalize_columns(&raw)?;
        Ok(EquivalentDictionary {
            raw,
            normalized,
            scale,
        })
    }

    pub fn m(&self) -> usize {
        self.raw.nrows()
    }

    pub fn k(&self) -> usize {
        self.raw.ncols()
    }
}

pub fn equivalent_dictionary(
    phi: &SensingMatrix,
    psi: &Dictionary,
) -> Result<EquivalentDictionary> {
    if phi.n() != psi.n() {
        return Err(Error::mismatch("equivalent dictionary", psi.n(), phi.n()));
    }
    EquivalentDictionary::from_raw(phi.entries() * psi.entries())
}

/// Returns the column-normalized matrix and the reciprocal column norms.
pub fn normalize_columns(d: &DMatrix<f64>) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut normalized = d.clone();
    let mut scale = DVector::zeros(d.ncols());
    for (j, mut col) in normalized.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::DegenerateColumn { index: j });
        }
        col /= norm;
        scale[j] = norm.recip();
    }
    Ok((normalized, scale))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum GramSource {
    Dictionary,
    Equivalent,
}

/// Symmetric PSD matrix `DᵀD`.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub entries: DMatrix<f64>,
    pub source: GramSource,
}

impl GramMatrix {
    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest off-diagonal magnitude.
    pub fn max_off_diagonal(&self) -> f64 {
        let k = self.k();
        let mut best = 0.0f64;
        for j in 0..k {
            for i in 0..k {
                if i != j {
                    best = best.max(self.entries[(i, j)].abs());
                }
            }
        }
        best
    }
}

pub fn gram(d: &DMatrix<f64>, source: GramSource) -> Result<GramMatrix> {
    if d.ncols() == 0 {
        return Err(Error::DegenerateInput(
            "gram of a matrix without columns".into(),
        ));
    }
    let mut g = d.tr_mul(d);
    // exact symmetry
    let k = g.nrows();
    for j in 0..k {
        for i in (j + 1)..k {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(GramMatrix { entries: g, source })
}

/// Sparse coefficient vector `α` with its support `Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSignal {
    pub coefficients: DVector<f64>,
    /// Sorted ascending.
    pub support: Vec<usize>,
    pub sparsity: usize,
}

impl SparseSignal {
    /// Support is taken from the nonzero entries.
    pub fn from_dense(coefficients: DVector<f64>) -> Self {
        let support: Vec<usize> = coefficients
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, _)| i)
            .collect();
        let sparsity = support.len();
        SparseSignal {
            coefficients,
            support,
            sparsity,
        }
    }

    pub fn k(&self) -> usize {
        self.coefficients.len()
    }
}

/// Batch `X = ΨA + E` with L columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalBatch {
    pub signals: DMatrix<f64>,
    pub coefficients: DMatrix<f64>,
    pub noise: DMatrix<f64>,
    pub snr_db: Option<f64>,
    /// Generating supports `{i : b(i) = 1}` per column.
    pub supports: Vec<Vec<usize>>,
    /// Columns where a target SNR was requested but the clean signal had no energy.
    pub zero_energy_columns: Vec<usize>,
}

impl SignalBatch {
    pub fn len(&self) -> usize {
        self.signals.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.ncols() == 0
    }
}
