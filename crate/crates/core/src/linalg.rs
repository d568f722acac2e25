//! Dense complex linear algebra shared by the analysis modules.
//!
//! Everything here works on small `DMatrix<Complex64>` values (the
//! coordinate dimension of the algebras we deal with rarely exceeds a few
//! hundred) and favours numerical robustness over speed.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// `e^{iθ}`
#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::from_polar(1.0, theta)
}

pub fn identity(n: usize) -> CMatrix {
    CMatrix::identity(n, n)
}

/// Largest singular value.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).into_iter().fold(0.0, f64::max)
}

pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let svd = SVD::new(m.clone(), false, false);
    svd.singular_values.iter().copied().collect()
}

/// Orthonormal basis (columns) of the null space of `m`.
///
/// A singular value counts as zero when it is at most `tol · max(1, σ_max)`.
/// Wide matrices are padded with zero rows so that the full set of right
/// singular vectors is available.
pub fn null_space(m: &CMatrix, tol: f64) -> CMatrix {
    let (rows, cols) = m.shape();
    if cols == 0 {
        return CMatrix::zeros(0, 0);
    }
    let padded = if rows < cols {
        let mut p = CMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = SVD::new(padded, false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let threshold = tol * sigma_max.max(1.0);
    let kept: Vec<usize> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| **s <= threshold)
        .map(|(i, _)| i)
        .collect();
    let mut out = CMatrix::zeros(cols, kept.len());
    for (k, &i) in kept.iter().enumerate() {
        for j in 0..cols {
            out[(j, k)] = v_t[(i, j)].conj();
        }
    }
    canonicalize_columns(&mut out);
    out
}

/// Numerical rank with the same convention as [`null_space`].
pub fn rank(m: &CMatrix, tol: f64) -> usize {
    let sv = singular_values(m);
    let sigma_max = sv.iter().copied().fold(0.0, f64::max);
    let threshold = tol * sigma_max.max(1.0);
    sv.iter().filter(|s| **s > threshold).count()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), CMatrix::zeros(0, 0));
    }
    let h = (m + m.adjoint()) * c64(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (k, &i) in order.iter().enumerate() {
        vectors.set_column(k, &eig.eigenvectors.column(i));
    }
    canonicalize_columns(&mut vectors);
    (values, vectors)
}

pub fn min_hermitian_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigen(m).0.first().copied().unwrap_or(0.0)
}

/// Complex Schur factors `(Q, T)` with `m = Q T Q†`.
///
/// The QR iteration has no exceptional shifts and can stall on permutation
/// matrices; on failure the matrix is conjugated by fixed pseudo-random
/// unitaries and the factorisation retried.
fn schur_with_retries(m: &CMatrix) -> Option<(CMatrix, CMatrix)> {
    let n = m.nrows();
    let attempt = |a: &CMatrix| nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, 1_000 * n.max(10)).map(|s| s.unpack());
    if let Some(f) = attempt(m) {
        return Some(f);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5c4u64);
    for _ in 0..4 {
        let u = random_unitary(n, &mut rng);
        if let Some((q, t)) = attempt(&(u.adjoint() * m * &u)) {
            return Some((u * q, t));
        }
    }
    None
}

/// Haar-distributed unitary from the QR factorisation of a complex Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(n: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re, im)
    });
    let (q, r) = g.qr().unpack();
    let phases = CMatrix::from_fn(n, n, |i, j| {
        let d = r[(i, i)];
        if i != j {
            ZERO
        } else if d.norm() > 0.0 {
            d / d.norm()
        } else {
            ONE
        }
    });
    q * phases
}

/// Eigenvalues and unit-norm right eigenvectors of a general square matrix.
///
/// Eigenvalues come from the complex Schur form; eigenvectors are recovered by
/// back substitution on the triangular factor, perturbing tiny pivots the way
/// the reference LAPACK routine does.
pub fn eigen_decomposition(m: &CMatrix) -> Result<(Vec<C64>, Vec<CVector>)> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!(
            "eigen-decomposition needs a square matrix, got {}x{}",
            n,
            m.ncols()
        )));
    }
    if n == 0 {
        return Ok((Vec::new(), Vec::new()));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numeric("matrix contains non-finite entries".into()));
    }
    let scale = m.norm().max(f64::MIN_POSITIVE);
    let (q, t) = schur_with_retries(m).ok_or_else(|| {
        Error::Numeric(format!(
            "Schur iteration did not converge (n = {n}, condition estimate {:.3e})",
            condition_estimate(m)
        ))
    })?;
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let small = f64::EPSILON * scale;
    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = t[(k, k)];
        let mut y = CVector::zeros(n);
        y[k] = ONE;
        for i in (0..k).rev() {
            let mut acc = ZERO;
            for j in (i + 1)..=k {
                acc += t[(i, j)] * y[j];
            }
            let mut pivot = t[(i, i)] - lambda;
            if pivot.norm() < small {
                pivot = c64(small, 0.0);
            }
            y[i] = -acc / pivot;
        }
        let mut v = &q * y;
        let norm = v.norm();
        if norm > 0.0 {
            v /= c64(norm, 0.0);
        }
        canonicalize_vector(&mut v);
        vectors.push(v);
    }
    Ok((values, vectors))
}

/// `mⁿ` by repeated squaring.
pub fn matrix_power(m: &CMatrix, mut n: usize) -> CMatrix {
    let mut result = CMatrix::identity(m.nrows(), m.ncols());
    let mut base = m.clone();
    while n > 0 {
        if n & 1 == 1 {
            result = &result * &base;
        }
        n >>= 1;
        if n > 0 {
            base = &base * &base;
        }
    }
    result
}

/// `(Σ_{k<n} mᵏ, mⁿ)` by binary splitting, `O(log n)` products.
pub fn geometric_sum(m: &CMatrix, n: usize) -> (CMatrix, CMatrix) {
    let dim = m.nrows();
    if n == 0 {
        return (CMatrix::zeros(dim, dim), CMatrix::identity(dim, dim));
    }
    if n % 2 == 0 {
        let (sum, power) = geometric_sum(m, n / 2);
        (&sum + &power * &sum, &power * &power)
    } else {
        let (sum, power) = geometric_sum(m, n - 1);
        (CMatrix::identity(dim, dim) + m * sum, m * power)
    }
}

/// Ratio of extreme singular values (infinite for singular input).
pub fn condition_estimate(m: &CMatrix) -> f64 {
    let sv = singular_values(m);
    let max = sv.iter().copied().fold(0.0, f64::max);
    let min = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Modified Gram-Schmidt (two passes) of the columns of `vectors` in the inner
/// product `⟨x, y⟩ = y† G x`. Columns whose residual norm drops below
/// `drop_tol` times their original norm are discarded.
pub fn gram_schmidt(vectors: &CMatrix, gram: &CMatrix, drop_tol: f64) -> CMatrix {
    let n = vectors.nrows();
    // Columns that are roundoff relative to the largest one are dropped too.
    let scale = vectors
        .column_iter()
        .map(|c| metric_norm(&c.into_owned(), gram))
        .fold(0.0, f64::max);
    let mut basis: Vec<CVector> = Vec::new();
    for col in vectors.column_iter() {
        let mut v: CVector = col.into_owned();
        if metric_norm(&v, gram) == 0.0 {
            continue;
        }
        for _ in 0..2 {
            for b in &basis {
                let coeff = metric_inner(&v, b, gram);
                v -= b * coeff;
            }
        }
        let norm = metric_norm(&v, gram);
        if norm > drop_tol * scale {
            basis.push(v / c64(norm, 0.0));
        }
    }
    let mut out = CMatrix::zeros(n, basis.len());
    for (k, b) in basis.iter().enumerate() {
        out.set_column(k, b);
    }
    out
}

/// `⟨x, y⟩ = y† G x`
#[inline]
pub fn metric_inner(x: &CVector, y: &CVector, gram: &CMatrix) -> C64 {
    (y.adjoint() * gram * x)[(0, 0)]
}

#[inline]
pub fn metric_norm(x: &CVector, gram: &CMatrix) -> f64 {
    metric_inner(x, x, gram).re.max(0.0).sqrt()
}

/// Rotate every column so that its first entry of (near) maximal modulus is
/// real and positive. Makes basis output independent of solver phase choices.
pub fn canonicalize_columns(m: &mut CMatrix) {
    for mut col in m.column_iter_mut() {
        let mut v: CVector = col.clone_owned();
        canonicalize_vector(&mut v);
        col.copy_from(&v);
    }
}

pub fn canonicalize_vector(v: &mut CVector) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(pivot) = v.iter().find(|z| z.norm() >= max * (1.0 - 1e-8)).copied() {
        let phase = pivot.conj() / pivot.norm();
        *v *= phase;
    }
}

/// Minimal bottleneck cost of a perfect matching between two equally sized
/// multisets of complex numbers, with the matching itself (`b[pairs[i]]`
/// is matched to `a[i]`). Returns `None` when the sizes differ.
pub fn bottleneck_matching(a: &[C64], b: &[C64]) -> Option<(f64, Vec<usize>)> {
    if a.len() != b.len() {
        return None;
    }
    let n = a.len();
    if n == 0 {
        return Some((0.0, Vec::new()));
    }
    let dist: Vec<Vec<f64>> = a
        .iter()
        .map(|x| b.iter().map(|y| (x - y).norm()).collect())
        .collect();
    let mut candidates: Vec<f64> = dist.iter().flatten().copied().collect();
    candidates.sort_by(f64::total_cmp);
    candidates.dedup();
    let (mut lo, mut hi) = (0usize, candidates.len() - 1);
    let mut best = perfect_matching(&dist, candidates[hi]).expect("complete graph matches");
    while lo < hi {
        let mid = (lo + hi) / 2;
        match perfect_matching(&dist, candidates[mid]) {
            Some(m) => {
                best = m;
                hi = mid;
            }
            None => lo = mid + 1,
        }
    }
    if let Some(m) = perfect_matching(&dist, candidates[lo]) {
        best = m;
    }
    let cost = (0..n).map(|i| dist[i][best[i]]).fold(0.0, f64::max);
    Some((cost, best))
}

fn perfect_matching(dist: &[Vec<f64>], threshold: f64) -> Option<Vec<usize>> {
    let n = dist.len();
    let mut match_b: Vec<Option<usize>> = vec![None; n];
    for i in 0..n {
        let mut seen = vec![false; n];
        if !augment(i, dist, threshold, &mut seen, &mut match_b) {
            return None;
        }
    }
    let mut pairs = vec![0; n];
    for (j, m) in match_b.iter().enumerate() {
        pairs[m.expect("perfect matching")] = j;
    }
    Some(pairs)
}

fn augment(
    i: usize,
    dist: &[Vec<f64>],
    threshold: f64,
    seen: &mut [bool],
    match_b: &mut [Option<usize>],
) -> bool {
    for j in 0..dist.len() {
        if dist[i][j] <= threshold && !seen[j] {
            seen[j] = true;
            let free = match match_b[j] {
                None => true,
                Some(k) => augment(k, dist, threshold, seen, match_b),
            };
            if free {
                match_b[j] = Some(i);
                return true;
            }
        }
    }
    false
}

/// Largest principal-angle sine between the column spans of two matrices
/// with orthonormal columns (Euclidean metric). Returns 1 when the
/// dimensions differ.
pub fn subspace_gap(a: &CMatrix, b: &CMatrix) -> f64 {
    if a.ncols() != b.ncols() {
        return 1.0;
    }
    if a.ncols() == 0 {
        return 0.0;
    }
    let pa = a * a.adjoint();
    let pb = b * b.adjoint();
    spectral_norm(&(pa - pb))
}

/// Least-squares slope and intercept of `ys` against `xs`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Smallest `h ≤ max_order` such that every value lies within `tol` of an
/// `h`-th root of unity.
pub fn cyclic_order(values: &[C64], tol: f64, max_order: usize) -> Option<usize> {
    if values.is_empty() {
        return None;
    }
    (1..=max_order).find(|&h| {
        values.iter().all(|z| {
            let k = (z.arg() * h as f64 / std::f64::consts::TAU).round();
            (z - cis(std::f64::consts::TAU * k / h as f64)).norm() <= tol
        })
    })
}

/// Sort key: descending modulus, ties broken by phase in `[0, 2π)`.
/// Moduli and phases are quantised to 1e-9 so that solver jitter cannot
/// reorder numerically equal values.
pub fn spectral_order(values: &[C64]) -> Vec<usize> {
    let key = |z: &C64| {
        let modulus = (z.norm() * 1e9).round() as i64;
        let mut phase = z.arg();
        if phase < 0.0 {
            phase += std::f64::consts::TAU;
        }
        let mut phase_q = (phase * 1e9).round() as i64;
        if phase_q >= (std::f64::consts::TAU * 1e9).round() as i64 || z.norm() < 1e-12 {
            phase_q = 0;
        }
        (-modulus, phase_q)
    };
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by_key(|&i| key(&values[i]));
    order
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cyclic(n: usize) -> CMatrix {
        CMatrix::from_fn(n, n, |i, j| if (i + 1) % n == j { ONE } else { ZERO })
    }

    #[test]
    fn geometric_sum_matches_loop() {
        let m = CMatrix::from_fn(3, 3, |i, j| c64(0.1 * (i + 2 * j) as f64, 0.05 * i as f64));
        for n in [0, 1, 2, 7, 16, 33] {
            let (sum, power) = geometric_sum(&m, n);
            let mut acc = CMatrix::zeros(3, 3);
            let mut p = CMatrix::identity(3, 3);
            for _ in 0..n {
                acc += &p;
                p = &m * p;
            }
            assert!((sum - acc).norm() < 1e-12 && (power - p).norm() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn eigenpairs_of_cycle_are_roots_of_unity() {
        let m = cyclic(5);
        let (vals, vecs) = eigen_decomposition(&m).unwrap();
        for (l, v) in vals.iter().zip(&vecs) {
            assert!(((l.powu(5)) - ONE).norm() < 1e-12);
            assert!((&m * v - v * *l).norm() < 1e-12);
        }
    }

    #[test]
    fn four_cycle_survives_the_schur_retry() {
        let m = cyclic(4);
        let (vals, vecs) = eigen_decomposition(&m).unwrap();
        assert_eq!(vals.len(), 4);
        for (l, v) in vals.iter().zip(&vecs) {
            assert!(((l.powu(4)) - ONE).norm() < 1e-12);
            assert!((&m * v - v * *l).norm() < 1e-12);
        }
    }

    #[test]
    fn eigenvectors_of_identity_are_independent() {
        let (_, vecs) = eigen_decomposition(&identity(4)).unwrap();
        let mut stacked = CMatrix::zeros(4, 4);
        for (k, v) in vecs.iter().enumerate() {
            stacked.set_column(k, v);
        }
        assert_eq!(rank(&stacked, 1e-10), 4);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = CMatrix::from_row_slice(1, 3, &[ONE, ONE, ZERO]);
        let ns = null_space(&m, 1e-12);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-12);
    }

    #[test]
    fn bottleneck_matches_permuted_sets() {
        let a = [c64(1.0, 0.0), c64(-1.0, 0.0), c64(0.0, 0.0)];
        let b = [c64(0.0, 0.0), c64(1.0, 1e-10), c64(-1.0, 0.0)];
        let (cost, pairs) = bottleneck_matching(&a, &b).unwrap();
        assert!(cost <= 1e-10 + 1e-16);
        assert_eq!(pairs, vec![1, 2, 0]);
        assert!(bottleneck_matching(&a, &b[..2]).is_none());
    }

    #[test]
    fn gram_schmidt_drops_dependent_columns() {
        let v = CMatrix::from_column_slice(2, 3, &[ONE, ZERO, ONE, ZERO, ONE, ONE]);
        let out = gram_schmidt(&v, &identity(2), 1e-10);
        assert_eq!(out.ncols(), 2);
        assert!((out.adjoint() * &out - identity(2)).norm() < 1e-12);
    }

    #[test]
    fn gram_schmidt_ignores_roundoff_columns() {
        let v = CMatrix::from_column_slice(2, 2, &[ONE, ONE, c64(1e-17, 0.0), c64(-3e-17, 0.0)]);
        assert_eq!(gram_schmidt(&v, &identity(2), 1e-8).ncols(), 1);
    }

    #[test]
    fn spectral_order_is_modulus_then_phase() {
        let vals = [c64(0.5, 0.0), cis(2.0), c64(1.0, 0.0), cis(-2.0)];
        assert_eq!(spectral_order(&vals), vec![2, 1, 3, 0]);
    }
}
