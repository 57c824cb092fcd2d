//! Graph Laplacians, bottom-of-spectrum eigenpairs, row normalization, and
//! the normalized-cut / Rayleigh-quotient diagnostics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::affinity::AffinityMatrix;
use crate::error::{Error, Result};

/// Degrees below this are treated as isolated vertices.
pub const MIN_DEGREE: f64 = 1e-12;

/// Degree vector, `L = D - W'` and `L̃ = I - D^{-1/2} W' D^{-1/2}`.
#[derive(Debug, Clone)]
pub struct LaplacianBundle {
    pub degree: DVector<f64>,
    pub laplacian: DMatrix<f64>,
    pub normalized: DMatrix<f64>,
}

fn degrees(w: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = w.nrows();
    let d = DVector::from_iterator(n, (0..n).map(|i| w.row(i).sum()));
    if let Some((index, degree)) = d.iter().enumerate().find(|(_, v)| !(**v >= MIN_DEGREE)) {
        return Err(Error::IsolatedVertex { index, degree: *degree });
    }
    Ok(d)
}

pub fn build_laplacian(wp: &AffinityMatrix) -> Result<LaplacianBundle> {
    let w = wp.entries();
    let n = w.nrows();
    let degree = degrees(w)?;
    let inv_sqrt = degree.map(|d| 1.0 / d.sqrt());
    let laplacian = DMatrix::from_fn(n, n, |i, j| if i == j { degree[i] - w[(i, j)] } else { -w[(i, j)] });
    let mut normalized = DMatrix::from_fn(n, n, |i, j| {
        let s = w[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
        if i == j {
            1.0 - s
        } else {
            -s
        }
    });
    // enforce exact symmetry
    for i in 0..n {
        for j in (i + 1)..n {
            let v = normalized[(i, j)];
            normalized[(j, i)] = v;
        }
    }
    Ok(LaplacianBundle { degree, laplacian, normalized })
}

/// Random-walk Laplacian `L'' = I - D^{-1} W`. Diagnostic only: the pipelines
/// use the symmetric form.
pub fn random_walk_laplacian(w: &AffinityMatrix) -> Result<DMatrix<f64>> {
    let m = w.entries();
    let d = degrees(m)?;
    let n = m.nrows();
    Ok(DMatrix::from_fn(n, n, |i, j| {
        let s = m[(i, j)] / d[i];
        if i == j {
            1.0 - s
        } else {
            -s
        }
    }))
}

/// Bottom of the spectrum: `eigenvalues` ascending, eigenvectors as columns of
/// `vectors`, and the row-normalized `normalized` (`T`).
#[derive(Debug, Clone)]
pub struct SpectralEmbedding {
    pub eigenvalues: Vec<f64>,
    pub vectors: DMatrix<f64>,
    pub normalized: DMatrix<f64>,
    /// Rows of `vectors` that were zero and got mapped to `e₁`.
    pub zero_rows: Vec<usize>,
}

impl SpectralEmbedding {
    pub fn from_eigenpairs(eigenvalues: Vec<f64>, vectors: DMatrix<f64>) -> Self {
        let (normalized, zero_rows) = row_normalize(&vectors);
        SpectralEmbedding { eigenvalues, vectors, normalized, zero_rows }
    }

    /// Rows of `T` as points for k-means.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.normalized
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }
}

fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::invalid("matrix must be square"));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > tol {
                return Err(Error::invalid(format!("matrix not symmetric at ({i},{j})")));
            }
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(())
}

/// Flips `v` so its first component with magnitude above 1e-12 is positive.
pub(crate) fn fix_sign(mut v: nalgebra::DVectorViewMut<'_, f64>) {
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-12).copied() {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

/// The `k` algebraically smallest eigenpairs of a symmetric matrix.
///
/// Full dense decomposition, then selection. Ties keep the solver's order,
/// eigenvectors are sign-normalized, so output is deterministic.
pub fn smallest_eigenpairs(m: &DMatrix<f64>, k: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_symmetric(m, 1e-10)?;
    let n = m.nrows();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= {n}, got k = {k}")));
    }
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]).then(a.cmp(&b)));
    let values: Vec<f64> = order[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, k);
    for (c, &i) in order[..k].iter().enumerate() {
        vectors.set_column(c, &eig.eigenvectors.column(i));
        fix_sign(vectors.column_mut(c));
    }
    Ok((values, vectors))
}

/// Scales each row to unit length. Zero rows become `e₁` and are reported.
pub fn row_normalize(u: &DMatrix<f64>) -> (DMatrix<f64>, Vec<usize>) {
    let mut t = u.clone();
    let mut zero = Vec::new();
    for i in 0..t.nrows() {
        let n = t.row(i).norm();
        if n > 0.0 && n.is_finite() {
            t.row_mut(i).iter_mut().for_each(|v| *v /= n);
        } else {
            t.row_mut(i).fill(0.0);
            if t.ncols() > 0 {
                t[(i, 0)] = 1.0;
            }
            zero.push(i);
        }
    }
    (t, zero)
}

/// Normalized cut of the bipartition `side` (true = A, false = B):
/// `Cut(A,B)/Vol(A) + Cut(A,B)/Vol(B)`.
///
/// Its relaxation (`min zᵗL̃z / zᵗz` over `z ⊥ D^{1/2}1`) is what the
/// second-smallest eigenvalue of `L̃` solves, so `ncut ≥ λ₂` on every graph.
pub fn ncut(w: &AffinityMatrix, side: &[bool]) -> Result<f64> {
    let m = w.entries();
    let n = m.nrows();
    if side.len() != n {
        return Err(Error::InvalidPartition(format!("{} labels for {n} vertices", side.len())));
    }
    let (mut cut, mut vol_a, mut vol_b) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let row = m.row(i).sum();
        if side[i] {
            vol_a += row;
        } else {
            vol_b += row;
        }
        for j in 0..n {
            if side[i] && !side[j] {
                cut += m[(i, j)];
            }
        }
    }
    if !side.iter().any(|s| *s) || side.iter().all(|s| *s) {
        return Err(Error::InvalidPartition("both sides must be nonempty".into()));
    }
    if !(vol_a > 0.0 && vol_b > 0.0) {
        return Err(Error::InvalidPartition("a side has zero volume".into()));
    }
    Ok(cut / vol_a + cut / vol_b)
}

/// `zᵗ L z / zᵗ z`.
pub fn rayleigh_quotient(l: &DMatrix<f64>, z: &[f64]) -> Result<f64> {
    if z.len() != l.nrows() || l.nrows() != l.ncols() {
        return Err(Error::invalid("shape mismatch"));
    }
    let z = DVector::from_column_slice(z);
    let zz = z.dot(&z);
    if !(zz > 0.0) {
        return Err(Error::invalid("Rayleigh quotient of the zero vector"));
    }
    Ok((l * &z).dot(&z) / zz)
}

/// Largest `k` eigenvalues (descending) of a symmetric operator given only
/// through `apply(x, out)`, via Lanczos with full reorthogonalization.
pub fn lanczos_largest<F>(n: usize, k: usize, apply: F) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
{
    if k == 0 || k > n {
        return Err(Error::invalid(format!("need 1 <= k <= {n}, got {k}")));
    }
    let max_steps = n.min(400);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_steps);
    let mut alphas = Vec::with_capacity(max_steps);
    let mut betas: Vec<f64> = Vec::with_capacity(max_steps);

    // deterministic start with components along every coordinate
    let mut q: Vec<f64> = (0..n).map(|i| 1.0 + ((i as f64 * 0.618_033_988_75).fract() - 0.5)).collect();
    normalize(&mut q);
    let mut w = vec![0.0; n];
    let mut last = Vec::new();
    for step in 0..max_steps {
        apply(&q, &mut w);
        let alpha = dot(&w, &q);
        basis.push(q.clone());
        alphas.push(alpha);
        // w -= alpha q + beta q_prev, then full reorthogonalization (twice)
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let beta = dot(&w, &w).sqrt();
        let m = alphas.len();
        let check = m >= k && (m % 10 == 0 || beta < 1e-12 || step + 1 == max_steps);
        if check {
            let t = DMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    alphas[i]
                } else if i + 1 == j {
                    betas[i]
                } else if j + 1 == i {
                    betas[j]
                } else {
                    0.0
                }
            });
            let eig = SymmetricEigen::new(t);
            let mut idx: Vec<usize> = (0..m).collect();
            idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let scale = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
            let converged = idx[..k]
                .iter()
                .all(|&i| (beta * eig.eigenvectors[(m - 1, i)]).abs() <= 1e-11 * scale);
            last = idx[..k].iter().map(|&i| eig.eigenvalues[i]).collect();
            if converged || beta < 1e-12 {
                return Ok(last);
            }
        }
        if beta < 1e-12 {
            break;
        }
        betas.push(beta);
        q = w.iter().map(|x| x / beta).collect();
    }
    if last.len() == k {
        Ok(last)
    } else {
        Err(Error::Degenerate("Lanczos terminated before reaching k Ritz values".into()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::affinity::AffinityRole;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn aff(m: DMatrix<f64>) -> AffinityMatrix {
        AffinityMatrix::new(m, AffinityRole::Wprime).unwrap()
    }

    #[test]
    fn all_ones_laplacian() {
        let b = build_laplacian(&aff(DMatrix::from_element(3, 3, 1.0))).unwrap();
        assert_eq!(b.degree, DVector::from_element(3, 3.0));
        let expected = DMatrix::identity(3, 3) - DMatrix::from_element(3, 3, 1.0 / 3.0);
        assert!((&b.normalized - expected).abs().max() < 1e-15);
        let (vals, _) = smallest_eigenpairs(&b.normalized, 3).unwrap();
        assert_abs_diff_eq!(vals[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[2], 1.0, epsilon = 1e-14);
        for i in 0..3 {
            assert_abs_diff_eq!(b.laplacian.row(i).sum(), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn identity_affinity_gives_zero_laplacian() {
        let b = build_laplacian(&aff(DMatrix::identity(2, 2))).unwrap();
        assert!(b.normalized.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn block_diagonal_has_zero_multiplicity_two() {
        let mut w = DMatrix::zeros(6, 6);
        for i in 0..6 {
            for j in 0..6 {
                if (i < 3) == (j < 3) {
                    w[(i, j)] = if i == j { 1.0 } else { 0.5 };
                }
            }
        }
        let b = build_laplacian(&aff(w)).unwrap();
        let (vals, _) = smallest_eigenpairs(&b.normalized, 3).unwrap();
        assert!(vals[0].abs() < 1e-12 && vals[1].abs() < 1e-12);
        assert!(vals[2] > 0.5);
    }

    #[test]
    fn null_vector_of_normalized_laplacian() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut w = DMatrix::from_fn(7, 7, |_, _| rng.random_range(0.0..1.0));
        w = (&w + w.transpose()) * 0.5;
        let b = build_laplacian(&aff(w)).unwrap();
        let z: Vec<f64> = b.degree.iter().map(|d| d.sqrt()).collect();
        let r = &b.normalized * DVector::from_column_slice(&z);
        assert!(r.norm() < 1e-8);
        assert_abs_diff_eq!(rayleigh_quotient(&b.normalized, &z).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn isolated_vertex_is_reported() {
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let w = AffinityMatrix::new(w, AffinityRole::W).unwrap();
        assert!(matches!(build_laplacian(&w), Err(Error::IsolatedVertex { index: 1, .. })));
    }

    #[test]
    fn eigenpairs_examples() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![0.3, 0.1, 0.2]));
        let (vals, vecs) = smallest_eigenpairs(&m, 2).unwrap();
        assert_abs_diff_eq!(vals[0], 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(vals[1], 0.2, epsilon = 1e-15);
        assert_abs_diff_eq!(vecs[(1, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(vecs[(2, 1)], 1.0, epsilon = 1e-15);
        assert!(smallest_eigenpairs(&m, 4).is_err());
        assert!(smallest_eigenpairs(&m, 0).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(smallest_eigenpairs(&asym, 1).is_err());
    }

    #[test]
    fn eigenvectors_have_positive_leading_component() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
        m = &m + m.transpose();
        let (vals, vecs) = smallest_eigenpairs(&m, 4).unwrap();
        for c in 0..4 {
            let first = vecs.column(c).iter().find(|v| v.abs() > 1e-12).copied().unwrap();
            assert!(first > 0.0);
            let r = &m * vecs.column(c) - vecs.column(c) * vals[c];
            assert!(r.norm() < 1e-8 * m.norm());
        }
    }

    #[test]
    fn row_normalize_examples() {
        let u = DMatrix::from_row_slice(3, 2, &[3.0, 4.0, 1.0, 0.0, 0.0, 0.0]);
        let (t, zero) = row_normalize(&u);
        assert_abs_diff_eq!(t[(0, 0)], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(t[(0, 1)], 0.8, epsilon = 1e-15);
        assert_eq!(t[(1, 0)], 1.0);
        assert_eq!((t[(2, 0)], t[(2, 1)]), (1.0, 0.0));
        assert_eq!(zero, vec![2]);
    }

    #[test]
    fn ncut_examples() {
        let mut w = DMatrix::zeros(4, 4);
        w[(0, 1)] = 1.0;
        w[(1, 0)] = 1.0;
        w[(2, 3)] = 1.0;
        w[(3, 2)] = 1.0;
        let w = AffinityMatrix::new(w, AffinityRole::W).unwrap();
        assert_eq!(ncut(&w, &[true, true, false, false]).unwrap(), 0.0);

        let p = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0]);
        let p = AffinityMatrix::new(p, AffinityRole::W).unwrap();
        assert_abs_diff_eq!(ncut(&p, &[true, false, false]).unwrap(), 1.0 + 1.0 / 3.0, epsilon = 1e-15);
        assert!(ncut(&p, &[true, true, true]).is_err());
        assert!(ncut(&p, &[true, false]).is_err());
    }

    #[test]
    fn rayleigh_examples() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.5]));
        assert_abs_diff_eq!(rayleigh_quotient(&m, &[2.0, 0.0]).unwrap(), 1.0, epsilon = 1e-15);
        assert!(rayleigh_quotient(&m, &[0.0, 0.0]).is_err());
        let q = rayleigh_quotient(&m, &[1.0, 1.0]).unwrap();
        assert!((0.5..=1.0).contains(&q));
    }

    #[test]
    fn random_walk_rows_sum_to_zero() {
        let w = aff(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]));
        let l = random_walk_laplacian(&w).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(l.row(i).sum(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 120;
        let mut m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        m = &m + m.transpose();
        let top = lanczos_largest(n, 4, |x, out| {
            let y = &m * DVector::from_column_slice(x);
            out.copy_from_slice(y.as_slice());
        })
        .unwrap();
        let mut all: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        all.sort_by(|a, b| b.total_cmp(a));
        for i in 0..4 {
            assert_abs_diff_eq!(top[i], all[i], epsilon = 1e-8);
        }
    }
}
