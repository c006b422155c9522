//! Synthetic problem instances: Gaussian dictionaries, Bernoulli-group sparse
//! coefficients and noisy signals at a target SNR.
//!
//! Each batch column draws from its own child seed, so a column's content
//! depends only on `(seed, column index)`.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dictionary, SignalBatch, SparseSignal};
use crate::prior::check_probabilities;
use crate::rng::Seed;

/// i.i.d. `N(0, 1)` matrix.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: Seed) -> DMatrix<f64> {
    let mut rng = seed.rng();
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
}

pub fn gen_dictionary(n: usize, k: usize, seed: Seed) -> Result<Dictionary> {
    if n == 0 || k == 0 {
        return Err(Error::InvalidParameter(format!(
            "dictionary shape {n}x{k} is empty"
        )));
    }
    Dictionary::new(gaussian_matrix(n, k, seed))
}

/// Contiguous groups of atoms sharing one nonzero probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSpec {
    pub group_sizes: Vec<usize>,
    pub group_probs: Vec<f64>,
    /// Target sparsity when the probabilities were derived from one.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sparsity: Option<usize>,
}

impl GroupSpec {
    /// `p'(j) = (S/J)/K_j`.
    pub fn from_sparsity(group_sizes: Vec<usize>, sparsity: usize) -> Result<Self> {
        if group_sizes.is_empty() || group_sizes.contains(&0) {
            return Err(Error::InvalidParameter(
                "group sizes must be nonempty and positive".into(),
            ));
        }
        let per_group = sparsity as f64 / group_sizes.len() as f64;
        let group_probs = group_sizes.iter().map(|&k| per_group / k as f64).collect();
        Ok(GroupSpec {
            group_sizes,
            group_probs,
            sparsity: Some(sparsity),
        })
    }

    pub fn with_probs(group_sizes: Vec<usize>, group_probs: Vec<f64>) -> Result<Self> {
        if group_sizes.len() != group_probs.len() {
            return Err(Error::mismatch(
                "group spec",
                group_sizes.len(),
                group_probs.len(),
            ));
        }
        if group_sizes.is_empty() || group_sizes.contains(&0) {
            return Err(Error::InvalidParameter(
                "group sizes must be nonempty and positive".into(),
            ));
        }
        if let Some(p) = group_probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "group probability {p} is negative"
            )));
        }
        Ok(GroupSpec {
            group_sizes,
            group_probs,
            sparsity: None,
        })
    }

    pub fn k(&self) -> usize {
        self.group_sizes.iter().sum()
    }

    pub fn groups(&self) -> usize {
        self.group_sizes.len()
    }

    /// Fails if some group needs a probability above one.
    pub fn validate(&self) -> Result<()> {
        for (j, &p) in self.group_probs.iter().enumerate() {
            if p > 1.0 {
                return Err(Error::InfeasibleGroup { group: j, prob: p });
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct GroupSpecRepr {
    group_sizes: Vec<usize>,
    #[serde(default)]
    group_probs: Option<Vec<f64>>,
    #[serde(default)]
    sparsity: Option<usize>,
}

impl<'de> Deserialize<'de> for GroupSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = GroupSpecRepr::deserialize(d)?;
        let spec = match (repr.group_probs, repr.sparsity) {
            (Some(probs), sparsity) => {
                let mut spec = GroupSpec::with_probs(repr.group_sizes, probs);
                if let Ok(s) = spec.as_mut() {
                    s.sparsity = sparsity;
                }
                spec
            }
            (None, Some(s)) => GroupSpec::from_sparsity(repr.group_sizes, s),
            (None, None) => {
                return Err(D::Error::custom(
                    "group spec needs `sparsity` or `group_probs`",
                ))
            }
        };
        spec.map_err(D::Error::custom)
    }
}

/// Per-index probabilities, constant within each group.
pub fn expand_groups(spec: &GroupSpec) -> Result<DVector<f64>> {
    spec.validate()?;
    Ok(DVector::from_iterator(
        spec.k(),
        spec.group_sizes
            .iter()
            .zip(&spec.group_probs)
            .flat_map(|(&k, &p)| std::iter::repeat_n(p, k)),
    ))
}

/// `α(i) = υ(i)·b(i)` with `b(i) ~ Bernoulli(p(i))`, `υ(i) ~ N(0, 1)`.
pub fn gen_sparse(p: &DVector<f64>, seed: Seed) -> Result<SparseSignal> {
    check_probabilities(p, "p")?;
    let mut rng = seed.rng();
    Ok(draw_bernoulli(p, &mut rng))
}

fn draw_bernoulli(p: &DVector<f64>, rng: &mut impl Rng) -> SparseSignal {
    let k = p.len();
    let mut coefficients = DVector::zeros(k);
    let mut support = Vec::new();
    for i in 0..k {
        let u: f64 = rng.random();
        let value: f64 = StandardNormal.sample(rng);
        if u < p[i] {
            coefficients[i] = value;
            support.push(i);
        }
    }
    let sparsity = support.len();
    SparseSignal {
        coefficients,
        support,
        sparsity,
    }
}

/// Places `round(p'(j)·K_j)` nonzeros uniformly at random inside each group.
pub fn gen_sparse_exact(spec: &GroupSpec, seed: Seed) -> Result<SparseSignal> {
    spec.validate()?;
    let mut rng = seed.rng();
    let mut coefficients = DVector::zeros(spec.k());
    let mut support = Vec::new();
    let mut offset = 0;
    for (&size, &p) in spec.group_sizes.iter().zip(&spec.group_probs) {
        let count = ((p * size as f64).round() as usize).min(size);
        let mut picked: Vec<usize> = sample(&mut rng, size, count).into_iter().collect();
        picked.sort_unstable();
        for local in picked {
            let i = offset + local;
            coefficients[i] = StandardNormal.sample(&mut rng);
            support.push(i);
        }
        offset += size;
    }
    let sparsity = support.len();
    Ok(SparseSignal {
        coefficients,
        support,
        sparsity,
    })
}

/// How nonzero positions are drawn for a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SupportModel {
    /// Independent Bernoulli entries.
    #[default]
    Bernoulli,
    /// Fixed count per group.
    ExactPerGroup,
}

pub fn gen_batch(
    psi: &Dictionary,
    p: &DVector<f64>,
    l: usize,
    snr_db: Option<f64>,
    seed: Seed,
) -> Result<SignalBatch> {
    if p.len() != psi.k() {
        return Err(Error::mismatch("probability vector", psi.k(), p.len()));
    }
    check_probabilities(p, "p")?;
    assemble_batch(psi, l, snr_db, seed, |s| {
        Ok(draw_bernoulli(p, &mut s.rng()))
    })
}

/// Batch under either support model.
pub fn gen_batch_with(
    psi: &Dictionary,
    spec: &GroupSpec,
    model: SupportModel,
    l: usize,
    snr_db: Option<f64>,
    seed: Seed,
) -> Result<SignalBatch> {
    match model {
        SupportModel::Bernoulli => gen_batch(psi, &expand_groups(spec)?, l, snr_db, seed),
        SupportModel::ExactPerGroup => {
            if spec.k() != psi.k() {
                return Err(Error::mismatch("group spec", psi.k(), spec.k()));
            }
            assemble_batch(psi, l, snr_db, seed, |s| gen_sparse_exact(spec, s))
        }
    }
}

fn assemble_batch(
    psi: &Dictionary,
    l: usize,
    snr_db: Option<f64>,
    seed: Seed,
    mut draw: impl FnMut(Seed) -> Result<SparseSignal>,
) -> Result<SignalBatch> {
    if l == 0 {
        return Err(Error::EmptyBatch);
    }
    let (n, k) = (psi.n(), psi.k());
    let mut signals = DMatrix::zeros(n, l);
    let mut coefficients = DMatrix::zeros(k, l);
    let mut noise = DMatrix::zeros(n, l);
    let mut supports = Vec::with_capacity(l);
    let mut zero_energy_columns = Vec::new();

    for col in 0..l {
        let col_seed = seed.derive_index(col as u64);
        let alpha = draw(col_seed.derive("alpha"))?;
        let clean = psi.entries() * &alpha.coefficients;
        let e = match snr_db {
            None => DVector::zeros(n),
            Some(snr) => {
                let energy = clean.norm_squared();
                if energy == 0.0 {
                    zero_energy_columns.push(col);
                    DVector::zeros(n)
                } else {
                    let mut rng = col_seed.derive("noise").rng();
                    let g: DVector<f64> =
                        DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                    let target = energy / 10f64.powf(snr / 10.0);
                    let gn = g.norm_squared();
                    if gn == 0.0 {
                        g
                    } else {
                        g * (target / gn).sqrt()
                    }
                }
            }
        };
        signals.set_column(col, &(clean + &e));
        coefficients.set_column(col, &alpha.coefficients);
        noise.set_column(col, &e);
        supports.push(alpha.support);
    }

    Ok(SignalBatch {
        signals,
        coefficients,
        noise,
        snr_db,
        supports,
        zero_energy_columns,
    })
}
