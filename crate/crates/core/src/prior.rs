//! Probability priors over atom usage.
//!
//! `ξ(i)` is the fraction of training columns in which atom `i` is active.
//! The sensing-matrix design turns it into diagonal weights
//! `W(i,i) = τ + (1 − τ)·ξ(i)`, so `τ = 1` switches the prior off.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Entries with magnitude at or below this count as zero.
pub const ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PriorProfile {
    pub xi: DVector<f64>,
    pub tau: f64,
    pub weight: DVector<f64>,
}

impl PriorProfile {
    pub fn k(&self) -> usize {
        self.xi.len()
    }

    /// Prior with every weight equal to one.
    pub fn uniform(k: usize) -> Self {
        weight_matrix(&DVector::from_element(k, 0.5), 1.0).expect("tau = 1 is valid")
    }

    pub fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.weight)
    }
}

/// Per-row nonzero proportion of a K×L coefficient matrix.
pub fn extract_prior(coeffs: &DMatrix<f64>) -> Result<DVector<f64>> {
    let l = coeffs.ncols();
    if l == 0 {
        return Err(Error::EmptyBatch);
    }
    Ok(DVector::from_fn(coeffs.nrows(), |i, _| {
        let count = coeffs.row(i).iter().filter(|v| v.abs() > ZERO_TOL).count();
        count as f64 / l as f64
    }))
}

pub fn weight_matrix(xi: &DVector<f64>, tau: f64) -> Result<PriorProfile> {
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "tau must lie in (0, 1], got {tau}"
        )));
    }
    check_probabilities(xi, "xi")?;
    let weight = xi.map(|p| tau + (1.0 - tau) * p);
    Ok(PriorProfile {
        xi: xi.clone(),
        tau,
        weight,
    })
}

pub(crate) fn check_probabilities(p: &DVector<f64>, name: &str) -> Result<()> {
    if let Some((i, v)) = p
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::InvalidParameter(format!(
            "{name}[{i}] = {v} is not a probability"
        )));
    }
    Ok(())
}

/// Binary entropy in bits, with `H(0) = H(1) = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

pub fn average_binary_entropy(p: &DVector<f64>) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    p.iter().map(|&v| binary_entropy(v)).sum::<f64>() / p.len() as f64
}

/// Expected number of nonzeros, `Σ p(i)`.
pub fn average_sparsity(p: &DVector<f64>) -> f64 {
    p.iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn groups(sizes: &[usize], s: f64) -> DVector<f64> {
        let j = sizes.len() as f64;
        DVector::from_iterator(
            sizes.iter().sum(),
            sizes
                .iter()
                .flat_map(|&k| std::iter::repeat_n((s / j) / k as f64, k)),
        )
    }

    #[test]
    fn extract_counts() {
        let mut a = DMatrix::zeros(3, 10);
        for l in 0..10 {
            a[(1, l)] = 1.5;
        }
        a[(2, 0)] = -1.0;
        a[(2, 4)] = 2.0;
        a[(2, 9)] = 1e-3;
        let xi = extract_prior(&a).unwrap();
        assert_eq!(xi[0], 0.0);
        assert_eq!(xi[1], 1.0);
        assert!((xi[2] - 0.3).abs() < 1e-15);
        assert!(matches!(
            extract_prior(&DMatrix::zeros(3, 0)),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn weights() {
        let xi = DVector::from_vec(vec![0.0, 0.5, 1.0, 0.3]);
        let w = weight_matrix(&xi, 1.0).unwrap();
        assert!(w.weight.iter().all(|&v| v == 1.0));
        let w = weight_matrix(&xi, 0.2).unwrap();
        assert!((w.weight[2] - 1.0).abs() < 1e-15);
        assert!((w.weight[1] - 0.6).abs() < 1e-15);
        assert!((w.weight[0] - 0.2).abs() < 1e-15);
        assert!(weight_matrix(&xi, 0.0).is_err());
        assert!(weight_matrix(&xi, 1.2).is_err());
        assert!(weight_matrix(&DVector::from_vec(vec![1.5]), 0.5).is_err());
    }

    #[test]
    fn entropy_values() {
        assert!((average_binary_entropy(&DVector::from_element(7, 0.5)) - 1.0).abs() < 1e-15);
        assert_eq!(
            average_binary_entropy(&DVector::from_vec(vec![0.0, 1.0, 1.0])),
            0.0
        );
        // Four equal groups at p' = 0.05: the average equals H(0.05) = 0.286397 bits.
        // The published table lists 0.2449 for this configuration.
        let h = average_binary_entropy(&groups(&[60, 60, 60, 60], 12.0));
        assert!((h - binary_entropy(0.05)).abs() < 1e-15);
        assert!((h - 0.286_396_957_115_956).abs() < 1e-12);
    }

    #[test]
    fn table_configurations_decrease() {
        let configs: [&[usize]; 4] = [
            &[60, 60, 60, 60],
            &[100, 100, 20, 20],
            &[160, 50, 20, 10],
            &[204, 12, 12, 12],
        ];
        let h: Vec<f64> = configs
            .iter()
            .map(|c| average_binary_entropy(&groups(c, 12.0)))
            .collect();
        // base-2 values evaluated independently
        let expected = [
            0.286_396_957_115_956,
            0.263_633_265_645_714,
            0.245_333_796_450_783,
            0.215_685_436_723_274,
        ];
        for (a, b) in h.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!(h.windows(2).all(|w| w[0] > w[1]));
    }

    #[test]
    fn sparsity_sums() {
        assert_eq!(average_sparsity(&DVector::zeros(5)), 0.0);
        assert_eq!(average_sparsity(&DVector::from_element(5, 1.0)), 5.0);
        assert!((average_sparsity(&groups(&[160, 50, 20, 10], 12.0)) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn entropy_maximized_at_half() {
        let mut rng = Seed(11).rng();
        let k = 8;
        let top = average_binary_entropy(&DVector::from_element(k, 0.5));
        for _ in 0..1000 {
            let p = DVector::from_fn(k, |_, _| rng.random::<f64>());
            assert!(average_binary_entropy(&p) <= top);
        }
    }

    proptest! {
        #[test]
        fn extract_is_permutation_equivariant(seed in 0u64..10_000) {
            let mut rng = Seed(seed).rng();
            let (k, l) = (6, 9);
            let a = DMatrix::from_fn(k, l, |_, _| if rng.random::<f64>() < 0.4 { rng.random::<f64>() + 0.1 } else { 0.0 });
            let mut perm: Vec<usize> = (0..k).collect();
            for i in (1..k).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let permuted = DMatrix::from_fn(k, l, |i, j| a[(perm[i], j)]);
            let xi = extract_prior(&a).unwrap();
            let xi_p = extract_prior(&permuted).unwrap();
            for i in 0..k {
                prop_assert_eq!(xi_p[i], xi[perm[i]]);
            }
        }

        #[test]
        fn weights_are_monotone(tau in 0.01f64..=1.0, a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
            let w = weight_matrix(&DVector::from_vec(vec![a, b]), tau).unwrap();
            if a >= b {
                prop_assert!(w.weight[0] >= w.weight[1]);
            }
            prop_assert!(w.weight.iter().all(|&v| v >= tau - 1e-15 && v <= 1.0 + 1e-15));
        }
    }
}
