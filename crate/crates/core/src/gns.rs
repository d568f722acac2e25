//! GNS (φ-metric) representation of channels.
//!
//! For a state φ with support `p_φ` the algebra splits as
//! `K_φ ⊕ L_φ = 𝔄p_φ ⊕ 𝔄p_φ^⊥`, where `L_φ` is the kernel of `‖·‖_φ`. In
//! finite dimension `K_φ` is already complete, so the GNS space is `K_φ`
//! itself with the φ-inner product and `T_φ x = (Tx) p_φ`.

use serde::Serialize;

use crate::algebra::{AlgebraElement, BlockAlgebra, NormalState, PhiMetric, StateFamily};
use crate::channel::ChannelMap;
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{
    bottleneck_matching, eigen_decomposition, gram_schmidt, hermitian_eigen, spectral_norm, spectral_order,
    CMatrix, CVector, C64,
};

/// Support projection of a state and bases of `K_φ` and `L_φ`.
#[derive(Clone, Debug)]
pub struct SupportSplit {
    algebra: BlockAlgebra,
    projection: AlgebraElement,
    /// Per block: orthonormal eigenvectors of `ρᵢ` spanning its support.
    support_vectors: Vec<CMatrix>,
    kernel_vectors: Vec<CMatrix>,
    k_basis: Vec<AlgebraElement>,
    l_basis: Vec<AlgebraElement>,
    compressed_densities: Vec<CMatrix>,
}

/// Spectral projection of `ρ_φ` onto its nonzero eigenvalues, blockwise.
///
/// Eigenvalues below `rank_tol · λ_max` (largest over all blocks) count as zero.
pub fn support_projection(state: &NormalState, rank_tol: f64) -> SupportSplit {
    let algebra = state.algebra().clone();
    let eigen: Vec<(Vec<f64>, CMatrix)> = state.densities().iter().map(hermitian_eigen).collect();
    let lambda_max = eigen
        .iter()
        .flat_map(|(v, _)| v.iter().copied())
        .fold(0.0, f64::max);
    let threshold = rank_tol * lambda_max;
    let mut support_vectors = Vec::new();
    let mut kernel_vectors = Vec::new();
    let mut projection_blocks = Vec::new();
    let mut k_basis = Vec::new();
    let mut l_basis = Vec::new();
    let mut compressed_densities = Vec::new();
    for (b, ((vals, vecs), &n)) in eigen.iter().zip(algebra.block_dims()).enumerate() {
        let support: Vec<usize> = (0..n).filter(|&k| vals[k] > threshold).collect();
        let kernel: Vec<usize> = (0..n).filter(|&k| vals[k] <= threshold).collect();
        let pick = |idx: &[usize]| {
            let mut m = CMatrix::zeros(n, idx.len());
            for (c, &k) in idx.iter().enumerate() {
                m.set_column(c, &vecs.column(k));
            }
            m
        };
        let s = pick(&support);
        let w = pick(&kernel);
        projection_blocks.push(&s * s.adjoint());
        for (vectors, out) in [(&s, &mut k_basis), (&w, &mut l_basis)] {
            for k in 0..vectors.ncols() {
                for r in 0..n {
                    // e_r v_k*
                    let mut block = CMatrix::zeros(n, n);
                    for c in 0..n {
                        block[(r, c)] = vectors[(c, k)].conj();
                    }
                    let mut blocks: Vec<CMatrix> =
                        algebra.block_dims().iter().map(|&m| CMatrix::zeros(m, m)).collect();
                    blocks[b] = block;
                    out.push(algebra.element(blocks).expect("block shapes"));
                }
            }
        }
        if !support.is_empty() {
            compressed_densities.push(s.adjoint() * &state.densities()[b] * &s);
        }
        support_vectors.push(s);
        kernel_vectors.push(w);
    }
    SupportSplit {
        projection: algebra.element(projection_blocks).expect("block shapes"),
        algebra,
        support_vectors,
        kernel_vectors,
        k_basis,
        l_basis,
        compressed_densities,
    }
}

impl SupportSplit {
    /// `p_φ`
    pub fn projection(&self) -> &AlgebraElement {
        &self.projection
    }

    /// Basis of `K_φ = 𝔄p_φ` (rank-one elements `e_r v*` with `v` in the support).
    pub fn k_basis(&self) -> &[AlgebraElement] {
        &self.k_basis
    }

    /// Basis of `L_φ = 𝔄p_φ^⊥`.
    pub fn l_basis(&self) -> &[AlgebraElement] {
        &self.l_basis
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.support_vectors.iter().map(|s| s.ncols()).collect()
    }

    pub fn is_full(&self) -> bool {
        self.kernel_vectors.iter().all(|w| w.ncols() == 0)
    }

    /// The state restricted to its support: a faithful state on
    /// `⊕ M_{rank ρᵢ}` (blocks with zero weight are dropped).
    pub fn compressed_state(&self) -> Result<(BlockAlgebra, NormalState)> {
        let dims: Vec<usize> = self.ranks().into_iter().filter(|&r| r > 0).collect();
        let algebra = BlockAlgebra::new(dims)?;
        let state = NormalState::normalized(&algebra, self.compressed_densities.clone())?;
        Ok((algebra, state))
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }
}

/// Matrix of `T_φ` in a φ-orthonormal basis of `K_φ`.
#[derive(Clone, Debug)]
pub struct GnsOperator {
    matrix: CMatrix,
    basis: CMatrix,
    support_leak: f64,
}

impl GnsOperator {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Basis of `K_φ` as coordinate columns.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    /// `max ‖T l‖_φ` over the unit-norm `L_φ` basis; zero when `L_φ` is invariant.
    pub fn support_leak(&self) -> f64 {
        self.support_leak
    }

    /// Operator norm of `T_φ` on `H_φ`.
    pub fn norm(&self) -> f64 {
        spectral_norm(&self.matrix)
    }
}

/// `T_φ` in the default φ-orthonormal basis (starting with `p_φ`).
///
/// When φ is not faithful, `T` must leave `L_φ` invariant.
pub fn gns_matrix(channel: &ChannelMap, state: &NormalState, tol: &Tolerances) -> Result<GnsOperator> {
    let op = gns_operator_unchecked(channel, state, tol)?;
    if op.support_leak > tol.hypothesis {
        return Err(Error::HypothesisViolated(format!(
            "T does not leave L_φ invariant (leak {:.3e})",
            op.support_leak
        )));
    }
    Ok(op)
}

/// `T_φ` in a caller-supplied basis, which must be φ-orthonormal and span `K_φ`.
pub fn gns_matrix_in_basis(
    channel: &ChannelMap,
    state: &NormalState,
    basis: &[AlgebraElement],
    tol: &Tolerances,
) -> Result<GnsOperator> {
    let split = support_projection(state, tol.support_rank);
    if basis.len() != split.k_basis.len() {
        return Err(Error::Validation(format!(
            "basis has {} elements, K_φ has dimension {}",
            basis.len(),
            split.k_basis.len()
        )));
    }
    let n = channel.algebra().dim();
    let mut columns = CMatrix::zeros(n, basis.len());
    for (k, b) in basis.iter().enumerate() {
        channel.algebra().check(b)?;
        columns.set_column(k, &b.coords());
    }
    let gram = state.gram();
    let overlap = columns.adjoint() * &gram * &columns;
    if (&overlap - CMatrix::identity(basis.len(), basis.len())).norm() > 1e-10 {
        return Err(Error::Validation("basis is not φ-orthonormal".into()));
    }
    let leak = support_leak(channel, state, &split);
    if leak > tol.hypothesis {
        return Err(Error::HypothesisViolated(format!(
            "T does not leave L_φ invariant (leak {leak:.3e})"
        )));
    }
    Ok(GnsOperator {
        matrix: columns.adjoint() * &gram * channel.superoperator() * &columns,
        basis: columns,
        support_leak: leak,
    })
}

fn support_leak(channel: &ChannelMap, state: &NormalState, split: &SupportSplit) -> f64 {
    split
        .l_basis
        .iter()
        .map(|l| {
            let image = channel.apply(l).expect("basis fits");
            state.seminorm(&image).expect("image fits") / l.norm()
        })
        .fold(0.0, f64::max)
}

fn gns_operator_unchecked(channel: &ChannelMap, state: &NormalState, tol: &Tolerances) -> Result<GnsOperator> {
    if channel.algebra() != state.algebra() {
        return Err(Error::Shape("channel and state live on different algebras".into()));
    }
    let split = support_projection(state, tol.support_rank);
    let basis = if state.is_faithful() {
        PhiMetric::new(channel.algebra(), state)?.basis().clone()
    } else {
        let n = channel.algebra().dim();
        let mut candidates = CMatrix::zeros(n, split.k_basis.len() + 1);
        candidates.set_column(0, &split.projection.coords());
        for (k, e) in split.k_basis.iter().enumerate() {
            candidates.set_column(k + 1, &e.coords());
        }
        gram_schmidt(&candidates, &state.gram(), 1e-8)
    };
    if basis.ncols() != split.k_basis.len() {
        return Err(Error::Numeric(format!(
            "φ-orthonormalisation of K_φ produced {} of {} vectors",
            basis.ncols(),
            split.k_basis.len()
        )));
    }
    let gram = state.gram();
    Ok(GnsOperator {
        matrix: basis.adjoint() * &gram * channel.superoperator() * &basis,
        basis,
        support_leak: support_leak(channel, state, &split),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StateContraction {
    /// `‖T_φ‖` on the GNS space.
    pub norm: f64,
    pub support_leak: f64,
    pub pass: bool,
    /// Norm fell in `(1, 1 + tol]` and was accepted as solver jitter.
    pub clamped: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisDiagnostic {
    pub pass: bool,
    pub tolerance: f64,
    pub states: Vec<StateContraction>,
    pub warnings: Vec<String>,
}

impl HypothesisDiagnostic {
    pub fn max_norm(&self) -> f64 {
        self.states.iter().map(|s| s.norm).fold(0.0, f64::max)
    }
}

/// Checks `φ((Tx)*(Tx)) ≤ φ(x*x)` for every φ in the family, i.e. that `T_φ`
/// is a contraction and `L_φ` is invariant.
pub fn verify_hypothesis(channel: &ChannelMap, family: &StateFamily, tol: &Tolerances) -> HypothesisDiagnostic {
    let mut states = Vec::new();
    let mut warnings = Vec::new();
    for (i, state) in family.states().iter().enumerate() {
        let (norm, leak) = match gns_operator_unchecked(channel, state, tol) {
            Ok(op) => (op.norm(), op.support_leak),
            Err(e) => {
                warnings.push(format!("state {i}: {e}"));
                (f64::MAX, f64::MAX)
            }
        };
        let clamped = norm > 1.0 && norm <= 1.0 + tol.hypothesis;
        if clamped {
            warnings.push(format!("state {i}: norm {norm:.17} above 1 within tolerance, accepted"));
        }
        let pass = norm <= 1.0 + tol.hypothesis && leak <= tol.hypothesis;
        states.push(StateContraction {
            norm,
            support_leak: leak,
            pass,
            clamped,
        });
    }
    HypothesisDiagnostic {
        pass: states.iter().all(|s| s.pass),
        tolerance: tol.hypothesis,
        states,
        warnings,
    }
}

/// Peripheral eigenvalues of `T`, `T_*` and `T_φ` with pairwise matchings.
#[derive(Clone, Debug, Serialize)]
pub struct SpectraComparison {
    pub operator: Vec<C64>,
    pub preadjoint: Vec<C64>,
    pub gns: Vec<C64>,
    /// Bottleneck distances: (T, T_*), (T, T_φ), (T_*, T_φ).
    pub distances: [f64; 3],
    /// `preadjoint[matching_preadjoint[i]]` is matched to `operator[i]`.
    pub matching_preadjoint: Vec<usize>,
    pub matching_gns: Vec<usize>,
    pub coincide: bool,
}

/// Compares the peripheral point spectra of `T`, its preadjoint and its GNS
/// extension. Needs a faithful state satisfying the contraction hypothesis.
pub fn compare_peripheral_spectra(
    channel: &ChannelMap,
    state: &NormalState,
    tol: &Tolerances,
    match_tol: f64,
) -> Result<SpectraComparison> {
    if !state.is_faithful() {
        return Err(Error::NotFaithful("spectra comparison needs a faithful state".into()));
    }
    let diag = verify_hypothesis(channel, &StateFamily::single(state.clone()), tol);
    if !diag.pass {
        return Err(Error::HypothesisViolated(format!(
            "T_φ has norm {:.6} > 1; the peripheral spectra need not coincide",
            diag.max_norm()
        )));
    }
    let gns = gns_matrix(channel, state, tol)?;
    let peripheral = |m: &CMatrix| -> Result<Vec<C64>> {
        let (vals, _) = eigen_decomposition(m)?;
        let mut p: Vec<C64> = vals.into_iter().filter(|l| l.norm() >= 1.0 - tol.peripheral).collect();
        let order = spectral_order(&p);
        p = order.into_iter().map(|i| p[i]).collect();
        Ok(p)
    };
    let operator = peripheral(channel.superoperator())?;
    let preadjoint = peripheral(&channel.superoperator().adjoint())?;
    let gns_spec = peripheral(gns.matrix())?;
    let m1 = bottleneck_matching(&operator, &preadjoint);
    let m2 = bottleneck_matching(&operator, &gns_spec);
    let m3 = bottleneck_matching(&preadjoint, &gns_spec);
    let dist = |m: &Option<(f64, Vec<usize>)>| m.as_ref().map_or(f64::INFINITY, |(d, _)| *d);
    let distances = [dist(&m1), dist(&m2), dist(&m3)];
    Ok(SpectraComparison {
        coincide: distances.iter().all(|d| *d <= match_tol),
        matching_preadjoint: m1.map(|m| m.1).unwrap_or_default(),
        matching_gns: m2.map(|m| m.1).unwrap_or_default(),
        operator,
        preadjoint,
        gns: gns_spec,
        distances,
    })
}

/// Coordinates of `x ∈ K_φ` in the GNS basis of `op`.
pub fn gns_coordinates(op: &GnsOperator, state: &NormalState, x: &AlgebraElement) -> CVector {
    op.basis.adjoint() * state.gram() * x.coords()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{amplitude_damping, pauli, KrausOperator};
    use crate::linalg::{c64, ONE, ZERO};

    fn m2() -> BlockAlgebra {
        BlockAlgebra::full_matrix(2).unwrap()
    }

    fn dephasing(p: f64) -> ChannelMap {
        ChannelMap::from_kraus_matrices(
            &m2(),
            vec![CMatrix::identity(2, 2) * c64(p.sqrt(), 0.0), pauli::z() * c64((1.0 - p).sqrt(), 0.0)],
        )
        .unwrap()
    }

    fn three_cycle() -> ChannelMap {
        let alg = BlockAlgebra::commutative(3).unwrap();
        let kraus = (0..3)
            .map(|i| KrausOperator::new(i, (i + 1) % 3, CMatrix::from_element(1, 1, ONE)))
            .collect();
        ChannelMap::from_kraus(&alg, kraus).unwrap()
    }

    fn flip_pinch() -> ChannelMap {
        // T(x) = D(XxX): Kraus E_ii X
        let e00 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        let e11 = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
        ChannelMap::from_kraus_matrices(&m2(), vec![&e00 * pauli::x(), &e11 * pauli::x()]).unwrap()
    }

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn faithful_state_has_full_support() {
        let split = support_projection(&NormalState::tracial(&m2()), 1e-12);
        assert!((split.projection() - &m2().unit()).norm() < 1e-14);
        assert!(split.l_basis().is_empty());
        assert!(split.is_full());
    }

    #[test]
    fn pure_state_kills_second_column() {
        let alg = m2();
        let phi = NormalState::vector_state(&alg, 0, &CVector::from_vec(vec![ONE, ZERO])).unwrap();
        let split = support_projection(&phi, 1e-12);
        let expected = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        assert!((split.projection().block(0) - expected).norm() < 1e-14);
        assert_eq!(split.l_basis().len(), 2);
        for l in split.l_basis() {
            assert!(phi.seminorm(l).unwrap() < 1e-14);
            // supported in the second column
            assert!(l.block(0).column(0).norm() < 1e-14);
        }
        // K ⊥ L in the trace pairing
        for k in split.k_basis() {
            for l in split.l_basis() {
                assert!((&k.adjoint() * l).trace().norm() < 1e-14);
            }
        }
        let p = split.projection();
        assert!((&(p * p) - p).norm() < 1e-14 && (&p.adjoint() - p).norm() < 1e-14);
    }

    #[test]
    fn commutative_point_mass_support() {
        let alg = BlockAlgebra::commutative(2).unwrap();
        let phi = NormalState::from_distribution(&alg, &[1.0, 0.0]).unwrap();
        let split = support_projection(&phi, 1e-12);
        assert_eq!(split.l_basis().len(), 1);
        assert_eq!(split.l_basis()[0].coords()[0], ZERO);
        assert!(split.l_basis()[0].coords()[1].norm() > 0.0);
    }

    #[test]
    fn compression_is_idempotent() {
        let alg = BlockAlgebra::new(vec![2, 1]).unwrap();
        let rho = vec![
            CMatrix::from_row_slice(2, 2, &[c64(0.5, 0.0), c64(0.25, 0.0), c64(0.25, 0.0), c64(0.125, 0.0)]),
            CMatrix::from_element(1, 1, c64(0.375, 0.0)),
        ];
        let phi = NormalState::new(&alg, rho).unwrap();
        let (alg1, phi1) = support_projection(&phi, 1e-12).compressed_state().unwrap();
        assert_eq!(alg1.block_dims(), &[1, 1]);
        assert!(phi1.is_faithful());
        let (alg2, phi2) = support_projection(&phi1, 1e-12).compressed_state().unwrap();
        assert_eq!(alg1, alg2);
        for (a, b) in phi1.densities().iter().zip(phi2.densities()) {
            assert!((a - b).norm() < 1e-14);
        }
    }

    #[test]
    fn identity_gns_matrix_is_identity() {
        let op = gns_matrix(&ChannelMap::identity(&m2()), &NormalState::tracial(&m2()), &tol()).unwrap();
        assert!((op.matrix() - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn dephasing_in_pauli_basis() {
        let alg = m2();
        let basis: Vec<AlgebraElement> = [CMatrix::identity(2, 2), pauli::x(), pauli::y(), pauli::z()]
            .into_iter()
            .map(|m| alg.element(vec![m]).unwrap())
            .collect();
        let op = gns_matrix_in_basis(&dephasing(0.75), &NormalState::tracial(&alg), &basis, &tol()).unwrap();
        let expected = CMatrix::from_diagonal(&CVector::from_vec(vec![ONE, c64(0.5, 0.0), c64(0.5, 0.0), ONE]));
        assert!((op.matrix() - expected).norm() < 1e-12);
    }

    #[test]
    fn three_cycle_in_indicator_basis_is_permutation() {
        let t = three_cycle();
        let alg = t.algebra().clone();
        let basis: Vec<AlgebraElement> = (0..3)
            .map(|i| alg.matrix_unit(i, 0, 0).scale(c64(3f64.sqrt(), 0.0)))
            .collect();
        let op = gns_matrix_in_basis(&t, &NormalState::tracial(&alg), &basis, &tol()).unwrap();
        let m = op.matrix();
        for i in 0..3 {
            for j in 0..3 {
                let expected = if j == (i + 1) % 3 { ONE } else { ZERO };
                assert!((m[(i, j)] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn gns_is_multiplicative() {
        let phi = NormalState::tracial(&m2());
        let a = dephasing(0.3);
        let b = flip_pinch();
        let ab = a.compose(&b).unwrap();
        let ma = gns_matrix(&a, &phi, &tol()).unwrap();
        let mb = gns_matrix(&b, &phi, &tol()).unwrap();
        let mab = gns_matrix(&ab, &phi, &tol()).unwrap();
        assert!((mab.matrix() - ma.matrix() * mb.matrix()).norm() < 1e-10);
    }

    #[test]
    fn non_faithful_compression_uses_support() {
        let t = amplitude_damping(0.3).unwrap();
        let phi = NormalState::vector_state(t.algebra(), 0, &CVector::from_vec(vec![ONE, ZERO])).unwrap();
        let op = gns_matrix(&t, &phi, &tol()).unwrap();
        assert_eq!(op.matrix().nrows(), 2);
        assert!(op.support_leak() < 1e-14);
        assert!(op.norm() <= 1.0 + 1e-12);
    }

    #[test]
    fn non_invariant_kernel_is_a_violation() {
        // dephasing maps e_1 e_1* (in L for |0⟩⟨0|)... use the flip which moves the support
        let t = flip_pinch();
        let phi = NormalState::vector_state(t.algebra(), 0, &CVector::from_vec(vec![ONE, ZERO])).unwrap();
        assert!(matches!(gns_matrix(&t, &phi, &tol()), Err(Error::HypothesisViolated(_))));
        let d = verify_hypothesis(&t, &StateFamily::single(phi), &tol());
        assert!(!d.pass);
    }

    #[test]
    fn hypothesis_pass_and_fail() {
        let phi = NormalState::tracial(&m2());
        let family = StateFamily::single(phi.clone());
        let id = verify_hypothesis(&ChannelMap::identity(&m2()), &family, &tol());
        assert!(id.pass);
        assert!((id.max_norm() - 1.0).abs() < 1e-12);
        let dep = verify_hypothesis(&dephasing(0.75), &family, &tol());
        assert!(dep.pass && dep.max_norm() <= 1.0 + 1e-12);
        let doubled = ChannelMap::from_superoperator(&m2(), CMatrix::identity(4, 4) * c64(2.0, 0.0)).unwrap();
        let d = verify_hypothesis(&doubled, &family, &tol());
        assert!(!d.pass);
        assert!((d.max_norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn faithful_gns_is_similar_to_superoperator() {
        let alg = m2();
        let rho = CMatrix::from_row_slice(2, 2, &[c64(0.7, 0.0), ZERO, ZERO, c64(0.3, 0.0)]);
        let phi = NormalState::new(&alg, vec![rho]).unwrap();
        let t = dephasing(0.6);
        let op = gns_matrix(&t, &phi, &tol()).unwrap();
        let (a, _) = eigen_decomposition(t.superoperator()).unwrap();
        let (b, _) = eigen_decomposition(op.matrix()).unwrap();
        let (d, _) = bottleneck_matching(&a, &b).unwrap();
        assert!(d < 1e-9);
    }

    fn assert_peripheral(t: &ChannelMap, expected: &[C64]) {
        let phi = NormalState::tracial(t.algebra());
        let cmp = compare_peripheral_spectra(t, &phi, &tol(), 1e-9).unwrap();
        assert!(cmp.coincide, "{cmp:?}");
        let (d, _) = bottleneck_matching(&cmp.operator, expected).unwrap();
        assert!(d < 1e-9, "{:?} vs {:?}", cmp.operator, expected);
    }

    #[test]
    fn peripheral_spectra_coincide_on_examples() {
        assert_peripheral(&dephasing(0.75), &[ONE, ONE]);
        let w = C64::from_polar(1.0, std::f64::consts::TAU / 3.0);
        assert_peripheral(&three_cycle(), &[ONE, w, w * w]);
        assert_peripheral(&flip_pinch(), &[ONE, -ONE]);
    }

    #[test]
    fn spectra_comparison_refuses_non_contractions() {
        let doubled = ChannelMap::from_superoperator(&m2(), CMatrix::identity(4, 4) * c64(2.0, 0.0)).unwrap();
        let err = compare_peripheral_spectra(&doubled, &NormalState::tracial(&m2()), &tol(), 1e-9);
        assert!(matches!(err, Err(Error::HypothesisViolated(_))));
    }
}
