//! Thin helpers over nalgebra's decompositions with the ordering and shape
//! conventions the rest of the crate relies on.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Eigenpairs of a symmetric matrix, eigenvalues nonincreasing.
pub(crate) fn symmetric_eigen_desc(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let sym = 0.5 * (m + m.transpose());
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let values = DVector::from_iterator(order.len(), order.iter().map(|&i| eig.eigenvalues[i]));
    let vectors = eig.eigenvectors.select_columns(order.iter());
    (values, vectors)
}

/// Full SVD with singular values nonincreasing.
///
/// Returns `(U, σ, V)` where `U` is `rows×rows` and `V` is `cols×r`,
/// `r = min(rows, cols)`. A wide or square input is used as-is; a tall input
/// is padded with zero columns so that nalgebra returns a square `U`.
pub(crate) fn full_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let (rows, cols) = a.shape();
    let padded = if cols < rows {
        let mut p = DMatrix::zeros(rows, rows);
        p.columns_mut(0, cols).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested V").transpose();
    let s = svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]).then(i.cmp(&j)));
    let r = rows.min(cols);
    let sigma = DVector::from_iterator(r, order.iter().take(r).map(|&i| s[i]));
    let u_sorted = u.select_columns(order.iter());
    let v_sorted = v
        .select_columns(order.iter().take(r))
        .rows(0, cols)
        .into_owned();
    (u_sorted, sigma, v_sorted)
}

pub(crate) fn frobenius_sq(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|v| v * v).sum()
}
