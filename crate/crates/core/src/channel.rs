//! Linear maps on a [`BlockAlgebra`], stored as superoperators on the
//! coordinate space with optional Kraus and Choi certificates.
//!
//! Choi convention: `C = Σ_ij E_ij ⊗ T(E_ij)`.

use rand::Rng;
use serde::Serialize;

use crate::algebra::{AlgebraElement, BlockAlgebra, NormalState};
use crate::error::{Error, Result};
use crate::linalg::{c64, hermitian_eigen, null_space, spectral_norm, CMatrix, CVector, ONE};

/// `x ↦ K x K*` from block `in_block` into block `out_block`.
#[derive(Clone, Debug, PartialEq)]
pub struct KrausOperator {
    pub out_block: usize,
    pub in_block: usize,
    pub matrix: CMatrix,
}

impl KrausOperator {
    pub fn new(out_block: usize, in_block: usize, matrix: CMatrix) -> Self {
        Self {
            out_block,
            in_block,
            matrix,
        }
    }

    /// Kraus operator of a single-block algebra.
    pub fn single(matrix: CMatrix) -> Self {
        Self::new(0, 0, matrix)
    }
}

#[derive(Clone, Debug)]
pub struct ChannelMap {
    algebra: BlockAlgebra,
    superoperator: CMatrix,
    kraus: Option<Vec<KrausOperator>>,
    choi: Option<CMatrix>,
    name: String,
    provenance: String,
}

impl ChannelMap {
    pub fn from_superoperator(algebra: &BlockAlgebra, superoperator: CMatrix) -> Result<Self> {
        let n = algebra.dim();
        if superoperator.shape() != (n, n) {
            return Err(Error::Shape(format!(
                "superoperator must be {n}x{n}, got {}x{}",
                superoperator.nrows(),
                superoperator.ncols()
            )));
        }
        if superoperator.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Validation("superoperator has non-finite entries".into()));
        }
        Ok(Self {
            algebra: algebra.clone(),
            superoperator,
            kraus: None,
            choi: None,
            name: String::new(),
            provenance: "superoperator".into(),
        })
    }

    pub fn from_kraus(algebra: &BlockAlgebra, kraus: Vec<KrausOperator>) -> Result<Self> {
        let dims = algebra.block_dims();
        for (k, op) in kraus.iter().enumerate() {
            let (Some(&n_out), Some(&n_in)) = (dims.get(op.out_block), dims.get(op.in_block)) else {
                return Err(Error::Shape(format!("Kraus operator {k} refers to a missing block")));
            };
            if op.matrix.shape() != (n_out, n_in) {
                return Err(Error::Shape(format!(
                    "Kraus operator {k} is {}x{}, expected {n_out}x{n_in}",
                    op.matrix.nrows(),
                    op.matrix.ncols()
                )));
            }
        }
        let n = algebra.dim();
        let mut superoperator = CMatrix::zeros(n, n);
        for (col, e) in algebra.coordinate_basis().iter().enumerate() {
            let image = apply_kraus(algebra, &kraus, e);
            superoperator.set_column(col, &image.coords());
        }
        Ok(Self {
            algebra: algebra.clone(),
            superoperator,
            kraus: Some(kraus),
            choi: None,
            name: String::new(),
            provenance: "kraus".into(),
        })
    }

    /// Kraus form on a single-block algebra.
    pub fn from_kraus_matrices(algebra: &BlockAlgebra, matrices: Vec<CMatrix>) -> Result<Self> {
        if algebra.num_blocks() != 1 {
            return Err(Error::Shape(
                "plain Kraus matrices need a single block; use KrausOperator for direct sums".into(),
            ));
        }
        Self::from_kraus(algebra, matrices.into_iter().map(KrausOperator::single).collect())
    }

    /// Inverse of [`to_choi`](Self::to_choi) on a full matrix algebra.
    pub fn from_choi(algebra: &BlockAlgebra, choi: CMatrix) -> Result<Self> {
        let n = single_block(algebra)?;
        if choi.shape() != (n * n, n * n) {
            return Err(Error::Shape(format!("Choi matrix must be {0}x{0}", n * n)));
        }
        let mut superoperator = CMatrix::zeros(n * n, n * n);
        for i in 0..n {
            for j in 0..n {
                let image = choi.view((i * n, j * n), (n, n)).into_owned();
                let col = algebra.coord_index(0, i, j);
                superoperator.set_column(col, &CVector::from_column_slice(image.as_slice()));
            }
        }
        Ok(Self {
            algebra: algebra.clone(),
            superoperator,
            kraus: None,
            choi: Some(choi),
            name: String::new(),
            provenance: "choi".into(),
        })
    }

    pub fn identity(algebra: &BlockAlgebra) -> Self {
        let n = algebra.dim();
        Self::from_superoperator(algebra, CMatrix::identity(n, n)).expect("square identity")
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn superoperator(&self) -> &CMatrix {
        &self.superoperator
    }

    pub fn kraus(&self) -> Option<&[KrausOperator]> {
        self.kraus.as_deref()
    }

    pub fn stored_choi(&self) -> Option<&CMatrix> {
        self.choi.as_ref()
    }

    pub fn apply(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        self.algebra.check(x)?;
        self.algebra.from_coords(&(&self.superoperator * x.coords()))
    }

    /// `self ∘ other`. Kraus certificates compose when both are present.
    pub fn compose(&self, other: &ChannelMap) -> Result<ChannelMap> {
        if self.algebra != other.algebra {
            return Err(Error::Shape("cannot compose maps on different algebras".into()));
        }
        let superoperator = &self.superoperator * &other.superoperator;
        let kraus = match (&self.kraus, &other.kraus) {
            (Some(outer), Some(inner)) => Some(
                outer
                    .iter()
                    .flat_map(|k| {
                        inner
                            .iter()
                            .filter(move |l| l.out_block == k.in_block)
                            .map(move |l| KrausOperator::new(k.out_block, l.in_block, &k.matrix * &l.matrix))
                    })
                    .collect(),
            ),
            _ => None,
        };
        Ok(ChannelMap {
            algebra: self.algebra.clone(),
            superoperator,
            kraus,
            choi: None,
            name: format!("{}∘{}", self.name, other.name),
            provenance: "composition".into(),
        })
    }

    /// Superoperator of `Tⁿ`.
    pub fn power(&self, n: usize) -> CMatrix {
        let dim = self.algebra.dim();
        let mut acc = CMatrix::identity(dim, dim);
        for _ in 0..n {
            acc = &self.superoperator * acc;
        }
        acc
    }

    /// Choi matrix `Σ_ij E_ij ⊗ T(E_ij)` (single full block only).
    pub fn to_choi(&self) -> Result<CMatrix> {
        single_block(&self.algebra)?;
        Ok(self.block_choi(0, 0))
    }

    /// Choi matrix of the component map `M_{n_in} → M_{n_out}`.
    pub fn block_choi(&self, out_block: usize, in_block: usize) -> CMatrix {
        let dims = self.algebra.block_dims();
        let (n_in, n_out) = (dims[in_block], dims[out_block]);
        let mut choi = CMatrix::zeros(n_in * n_out, n_in * n_out);
        for i in 0..n_in {
            for j in 0..n_in {
                let col = self.algebra.coord_index(in_block, i, j);
                let offset = self.algebra.block_offset(out_block);
                let image = self
                    .superoperator
                    .view((offset, col), (n_out * n_out, 1))
                    .into_owned();
                let block = CMatrix::from_column_slice(n_out, n_out, image.as_slice());
                choi.view_mut((i * n_out, j * n_out), (n_out, n_out)).copy_from(&block);
            }
        }
        choi
    }

    /// CP iff every block-pair Choi matrix is positive semidefinite.
    pub fn is_completely_positive(&self, tol: f64) -> CpDiagnostic {
        let blocks = self.algebra.num_blocks();
        let mut min_eigenvalue = f64::INFINITY;
        let mut worst_pair = (0, 0);
        for out_block in 0..blocks {
            for in_block in 0..blocks {
                let choi = self.block_choi(out_block, in_block);
                let hermiticity = (&choi - choi.adjoint()).norm();
                let min = hermitian_eigen(&choi).0.first().copied().unwrap_or(0.0) - hermiticity;
                if min < min_eigenvalue {
                    min_eigenvalue = min;
                    worst_pair = (out_block, in_block);
                }
            }
        }
        CpDiagnostic {
            completely_positive: min_eigenvalue >= -tol,
            min_choi_eigenvalue: min_eigenvalue,
            worst_block_pair: worst_pair,
        }
    }

    /// Preadjoint `T_*` with `tr((T_*ρ)* x) = tr(ρ* T(x))`; in coordinates
    /// the conjugate transpose of the superoperator.
    pub fn preadjoint(&self) -> ChannelMap {
        ChannelMap {
            algebra: self.algebra.clone(),
            superoperator: self.superoperator.adjoint(),
            kraus: self.kraus.as_ref().map(|ks| {
                ks.iter()
                    .map(|k| KrausOperator::new(k.in_block, k.out_block, k.matrix.adjoint()))
                    .collect()
            }),
            choi: None,
            name: format!("{}_*", self.name),
            provenance: "preadjoint".into(),
        }
    }

    /// `‖T𝟙 − 𝟙‖`
    pub fn unitality_residual(&self) -> f64 {
        let unit = self.algebra.unit();
        (&self.apply(&unit).expect("unit fits") - &unit).norm()
    }

    /// Smallest eigenvalue of `T(x*x) − T(x)*T(x)` over `samples` random `x`
    /// (scaled by `‖x‖²`). Nonnegative for unital CP maps.
    pub fn schwarz_defect<R: Rng + ?Sized>(&self, samples: usize, rng: &mut R) -> f64 {
        let mut worst = f64::INFINITY;
        for _ in 0..samples {
            let x = self.algebra.random_element(rng);
            let tx = self.apply(&x).expect("sample fits");
            let lhs = self.apply(&(&x.adjoint() * &x)).expect("sample fits");
            let diff = &lhs - &(&tx.adjoint() * &tx);
            worst = worst.min(diff.min_eigenvalue() / x.norm().powi(2).max(f64::MIN_POSITIVE));
        }
        worst
    }

    /// Largest discrepancy between the stored representations.
    pub fn representation_coherence(&self) -> f64 {
        let mut worst: f64 = 0.0;
        if let Some(kraus) = &self.kraus {
            let from_kraus = ChannelMap::from_kraus(&self.algebra, kraus.clone()).expect("stored Kraus is valid");
            worst = worst.max((&from_kraus.superoperator - &self.superoperator).norm());
        }
        if let Some(choi) = &self.choi {
            let from_choi = ChannelMap::from_choi(&self.algebra, choi.clone()).expect("stored Choi is valid");
            worst = worst.max((&from_choi.superoperator - &self.superoperator).norm());
        }
        worst
    }

    /// Spectral norm of `[T, S]`.
    pub fn commutator_norm(&self, other: &ChannelMap) -> f64 {
        spectral_norm(&(&self.superoperator * &other.superoperator - &other.superoperator * &self.superoperator))
    }

    /// A normal state with `T_*ρ = ρ`.
    ///
    /// The eigenvalue-1 spectral projection `E` of `T_*` is applied to `𝟙`;
    /// for trace-preserving `T_*` this yields the invariant state of maximal
    /// support.
    pub fn find_invariant_state(&self, null_tol: f64) -> Result<InvariantState> {
        let n = self.algebra.dim();
        let pre = self.superoperator.adjoint();
        let shifted = &pre - CMatrix::identity(n, n);
        let right = null_space(&shifted, null_tol);
        if right.ncols() == 0 {
            return Err(Error::NoInvariantState("1 is not an eigenvalue of the preadjoint".into()));
        }
        let left = null_space(&shifted.adjoint(), null_tol);
        if left.ncols() != right.ncols() {
            return Err(Error::NoInvariantState("eigenvalue 1 of the preadjoint is defective".into()));
        }
        let pairing = left.adjoint() * &right;
        let inverse = pairing
            .try_inverse()
            .ok_or_else(|| Error::NoInvariantState("singular eigenvector pairing".into()))?;
        let projection = &right * inverse * left.adjoint();
        let image = self.algebra.from_coords(&(projection * self.algebra.unit().coords()))?;
        let hermitian = (&image + &image.adjoint()).scale(c64(0.5, 0.0));
        let scale = hermitian.norm();
        if scale == 0.0 || hermitian.min_eigenvalue() < -1e-9 * scale || hermitian.trace().re <= 0.0 {
            return Err(Error::NoInvariantState(
                "fixed space of the preadjoint contains no positive element reachable from 𝟙".into(),
            ));
        }
        let blocks: Vec<CMatrix> = hermitian
            .blocks()
            .iter()
            .map(|m| {
                let (vals, vecs) = hermitian_eigen(m);
                let clipped = nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                    vals.len(),
                    vals.iter().map(|&v| c64(v.max(0.0), 0.0)),
                ));
                &vecs * clipped * vecs.adjoint()
            })
            .collect();
        let state = NormalState::normalized(&self.algebra, blocks)?;
        let faithful = state.is_faithful();
        Ok(InvariantState {
            state,
            fixed_space_dim: right.ncols(),
            faithful,
        })
    }

    /// Per-block residuals `‖(T_*ρ_φ)ᵢ − ρᵢ‖`.
    pub fn check_invariance(&self, state: &NormalState, tol: f64) -> Result<InvarianceDiagnostic> {
        if state.algebra() != &self.algebra {
            return Err(Error::Shape("state lives on a different algebra".into()));
        }
        let rho = state.density_element();
        let image = self
            .algebra
            .from_coords(&(self.superoperator.adjoint() * rho.coords()))?;
        let block_residuals: Vec<f64> = image
            .blocks()
            .iter()
            .zip(rho.blocks())
            .map(|(a, b)| (a - b).norm())
            .collect();
        let max = block_residuals.iter().copied().fold(0.0, f64::max);
        Ok(InvarianceDiagnostic {
            invariant: max <= tol,
            block_residuals,
            max_residual: max,
        })
    }
}

fn single_block(algebra: &BlockAlgebra) -> Result<usize> {
    match algebra.block_dims() {
        [n] => Ok(*n),
        dims => Err(Error::UnsupportedRepresentation(format!(
            "Choi matrices are only defined here for a single full block, algebra has blocks {dims:?}"
        ))),
    }
}

fn apply_kraus(algebra: &BlockAlgebra, kraus: &[KrausOperator], x: &AlgebraElement) -> AlgebraElement {
    let mut blocks: Vec<CMatrix> = algebra
        .block_dims()
        .iter()
        .map(|&n| CMatrix::zeros(n, n))
        .collect();
    for k in kraus {
        blocks[k.out_block] += &k.matrix * x.block(k.in_block) * k.matrix.adjoint();
    }
    algebra.element(blocks).expect("Kraus shapes validated")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CpDiagnostic {
    pub completely_positive: bool,
    pub min_choi_eigenvalue: f64,
    /// `(out, in)` block pair attaining the minimum.
    pub worst_block_pair: (usize, usize),
}

#[derive(Clone, Debug)]
pub struct InvariantState {
    pub state: NormalState,
    /// Dimension of the fixed space of `T_*`.
    pub fixed_space_dim: usize,
    pub faithful: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InvarianceDiagnostic {
    pub invariant: bool,
    pub block_residuals: Vec<f64>,
    pub max_residual: f64,
}

/// Generators of a semigroup; more than one generator is accepted only when
/// they commute.
#[derive(Clone, Debug)]
pub struct SemigroupSpec {
    generators: Vec<ChannelMap>,
    commuting: bool,
}

impl SemigroupSpec {
    pub const COMMUTATOR_TOL: f64 = 1e-10;

    pub fn single(generator: ChannelMap) -> Self {
        Self {
            generators: vec![generator],
            commuting: true,
        }
    }

    pub fn new(generators: Vec<ChannelMap>) -> Result<Self> {
        let first = generators
            .first()
            .ok_or_else(|| Error::Validation("a semigroup needs at least one generator".into()))?;
        if generators.iter().any(|g| g.algebra() != first.algebra()) {
            return Err(Error::Shape("generators act on different algebras".into()));
        }
        for i in 0..generators.len() {
            for j in (i + 1)..generators.len() {
                let norm = generators[i].commutator_norm(&generators[j]);
                if norm >= Self::COMMUTATOR_TOL {
                    return Err(Error::NonCommuting(format!(
                        "generators {i} (`{}`) and {j} (`{}`) have commutator norm {norm:.3e}",
                        generators[i].name(),
                        generators[j].name()
                    )));
                }
            }
        }
        Ok(Self {
            generators,
            commuting: true,
        })
    }

    pub fn generators(&self) -> &[ChannelMap] {
        &self.generators
    }

    pub fn is_commuting(&self) -> bool {
        self.commuting
    }
}

/// Pauli matrices, handy for examples and tests.
pub mod pauli {
    use crate::linalg::{c64, CMatrix, ONE, ZERO};

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO])
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ZERO, c64(0.0, -1.0), c64(0.0, 1.0), ZERO])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE])
    }
}

/// Amplitude damping towards `|0⟩` in the Schrödinger picture; the map
/// returned acts on observables, so its preadjoint drives states to `|0⟩⟨0|`.
pub fn amplitude_damping(gamma: f64) -> Result<ChannelMap> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Validation(format!("damping rate {gamma} outside [0, 1]")));
    }
    let alg = BlockAlgebra::full_matrix(2)?;
    let a0 = CMatrix::from_row_slice(2, 2, &[ONE, c64(0.0, 0.0), c64(0.0, 0.0), c64((1.0 - gamma).sqrt(), 0.0)]);
    let a1 = CMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(gamma.sqrt(), 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
    Ok(ChannelMap::from_kraus_matrices(&alg, vec![a0.adjoint(), a1.adjoint()])?
        .with_name(format!("amplitude_damping({gamma})")))
}

/// `x ↦ xᵀ` on `M_n`, positive but not completely positive.
pub fn transpose_map(n: usize) -> Result<ChannelMap> {
    let alg = BlockAlgebra::full_matrix(n)?;
    let dim = alg.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for i in 0..n {
        for j in 0..n {
            m[(alg.coord_index(0, j, i), alg.coord_index(0, i, j))] = ONE;
        }
    }
    Ok(ChannelMap::from_superoperator(&alg, m)?.with_name("transpose"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::random_complex;
    use crate::linalg::ZERO;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

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

    fn random_kraus(n: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<CMatrix> {
        (0..count)
            .map(|_| CMatrix::from_fn(n, n, |_, _| random_complex(rng)))
            .collect()
    }

    fn three_cycle() -> ChannelMap {
        let alg = BlockAlgebra::commutative(3).unwrap();
        let kraus = (0..3)
            .map(|i| KrausOperator::new(i, (i + 1) % 3, CMatrix::from_element(1, 1, ONE)))
            .collect();
        ChannelMap::from_kraus(&alg, kraus).unwrap()
    }

    #[test]
    fn identity_kraus_gives_identity_superoperator() {
        let t = ChannelMap::from_kraus_matrices(&m2(), vec![CMatrix::identity(2, 2)]).unwrap();
        assert!((t.superoperator() - CMatrix::identity(4, 4)).norm() < 1e-15);
    }

    #[test]
    fn dephasing_halves_x() {
        let t = dephasing(0.75);
        let x = m2().element(vec![pauli::x()]).unwrap();
        let tx = t.apply(&x).unwrap();
        assert!((&tx - &x.scale(c64(0.5, 0.0))).norm() < 1e-15);
    }

    #[test]
    fn unitary_conjugation_preserves_trace_inner_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = CMatrix::from_fn(2, 2, |_, _| random_complex(&mut rng));
        let u = g.qr().q();
        let t = ChannelMap::from_kraus_matrices(&m2(), vec![u]).unwrap();
        let s = t.superoperator();
        assert!((s.adjoint() * s - CMatrix::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn identity_choi_is_unnormalised_entangled_projector() {
        let choi = ChannelMap::identity(&m2()).to_choi().unwrap();
        let mut expected = CMatrix::zeros(4, 4);
        for i in 0..2 {
            for j in 0..2 {
                expected[(i * 2 + i, j * 2 + j)] = ONE;
            }
        }
        assert!((choi - expected).norm() < 1e-15);
    }

    #[test]
    fn completely_depolarising_choi_is_half_identity() {
        let alg = m2();
        let dim = alg.dim();
        let mut s = CMatrix::zeros(dim, dim);
        // T(x) = tr(x)/2 · 𝟙
        for i in 0..2 {
            for k in 0..2 {
                s[(alg.coord_index(0, k, k), alg.coord_index(0, i, i))] = c64(0.5, 0.0);
            }
        }
        let t = ChannelMap::from_superoperator(&alg, s).unwrap();
        let choi = t.to_choi().unwrap();
        assert!((choi - CMatrix::identity(4, 4) * c64(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn choi_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let alg = BlockAlgebra::full_matrix(3).unwrap();
        let t = ChannelMap::from_kraus_matrices(&alg, random_kraus(3, 3, &mut rng)).unwrap();
        let back = ChannelMap::from_choi(&alg, t.to_choi().unwrap()).unwrap();
        assert!((back.superoperator() - t.superoperator()).norm() < 1e-12);
    }

    #[test]
    fn choi_refused_on_direct_sums() {
        let alg = BlockAlgebra::new(vec![1, 2]).unwrap();
        let t = ChannelMap::identity(&alg);
        assert!(matches!(t.to_choi(), Err(Error::UnsupportedRepresentation(_))));
    }

    #[test]
    fn dephasing_choi_spectrum() {
        let d = dephasing(0.75).is_completely_positive(1e-10);
        assert!(d.completely_positive);
        assert!(d.min_choi_eigenvalue.abs() < 1e-12);
        let (vals, _) = hermitian_eigen(&dephasing(0.75).to_choi().unwrap());
        let nonzero: Vec<f64> = vals.into_iter().filter(|v| v.abs() > 1e-12).collect();
        assert_eq!(nonzero.len(), 2);
        assert!((nonzero[0] - 0.5).abs() < 1e-12 && (nonzero[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn transpose_is_not_cp() {
        let d = transpose_map(2).unwrap().is_completely_positive(1e-10);
        assert!(!d.completely_positive);
        assert!((d.min_choi_eigenvalue + 1.0).abs() < 1e-12);
        assert!(ChannelMap::identity(&m2()).is_completely_positive(1e-12).completely_positive);
    }

    #[test]
    fn preadjoint_of_unital_map_preserves_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let alg = m2();
        let t = ChannelMap::from_kraus_matrices(
            &alg,
            vec![pauli::x() * c64(0.6_f64.sqrt(), 0.0), pauli::z() * c64(0.4_f64.sqrt(), 0.0)],
        )
        .unwrap();
        let pre = t.preadjoint();
        for _ in 0..10 {
            let a = alg.random_element(&mut rng);
            let rho = &a * &a.adjoint();
            let image = pre.apply(&rho).unwrap();
            assert!((image.trace() - rho.trace()).norm() < 1e-12);
        }
    }

    #[test]
    fn preadjoint_is_dual_under_trace_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let alg = BlockAlgebra::new(vec![2, 1]).unwrap();
        let kraus = vec![
            KrausOperator::new(0, 0, CMatrix::from_fn(2, 2, |_, _| random_complex(&mut rng))),
            KrausOperator::new(1, 0, CMatrix::from_fn(1, 2, |_, _| random_complex(&mut rng))),
            KrausOperator::new(0, 1, CMatrix::from_fn(2, 1, |_, _| random_complex(&mut rng))),
        ];
        let t = ChannelMap::from_kraus(&alg, kraus).unwrap();
        let pre = t.preadjoint();
        assert!(pre.representation_coherence() < 1e-12);
        let a = alg.random_element(&mut rng);
        let rho = &a * &a.adjoint();
        let x = alg.random_element(&mut rng);
        let lhs = (&pre.apply(&rho).unwrap() * &x).trace();
        let rhs = (&rho * &t.apply(&x).unwrap()).trace();
        assert!((lhs - rhs).norm() < 1e-12);
        assert!((pre.preadjoint().superoperator() - t.superoperator()).norm() < 1e-15);
    }

    #[test]
    fn dephasing_is_self_preadjoint() {
        let t = dephasing(0.75);
        assert!((t.preadjoint().superoperator() - t.superoperator()).norm() < 1e-15);
    }

    #[test]
    fn composition_matches_kraus_composition() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let alg = BlockAlgebra::full_matrix(2).unwrap();
        let a = ChannelMap::from_kraus_matrices(&alg, random_kraus(2, 2, &mut rng)).unwrap();
        let b = ChannelMap::from_kraus_matrices(&alg, random_kraus(2, 3, &mut rng)).unwrap();
        let ab = a.compose(&b).unwrap();
        assert_eq!(ab.kraus().unwrap().len(), 6);
        assert!(ab.representation_coherence() < 1e-12);
    }

    #[test]
    fn unital_maps_fix_maximally_mixed_state() {
        let inv = dephasing(0.75).find_invariant_state(1e-8).unwrap();
        assert!(inv.faithful);
        let rho = &inv.state.densities()[0];
        assert!((rho - CMatrix::identity(2, 2) * c64(0.5, 0.0)).norm() < 1e-12);
        assert_eq!(inv.fixed_space_dim, 2);
    }

    #[test]
    fn three_cycle_invariant_distribution_is_uniform() {
        let inv = three_cycle().find_invariant_state(1e-8).unwrap();
        for rho in inv.state.densities() {
            assert!((rho[(0, 0)] - c64(1.0 / 3.0, 0.0)).norm() < 1e-12);
        }
        assert_eq!(inv.fixed_space_dim, 1);
    }

    #[test]
    fn amplitude_damping_fixes_ground_state_only() {
        let inv = amplitude_damping(0.3).unwrap().find_invariant_state(1e-8).unwrap();
        assert!(!inv.faithful);
        let expected = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
        assert!((&inv.state.densities()[0] - expected).norm() < 1e-10);
    }

    #[test]
    fn scaled_identity_has_no_invariant_state() {
        let alg = m2();
        let t = ChannelMap::from_superoperator(&alg, CMatrix::identity(4, 4) * c64(2.0, 0.0)).unwrap();
        assert!(matches!(t.find_invariant_state(1e-8), Err(Error::NoInvariantState(_))));
    }

    #[test]
    fn invariance_residuals() {
        let d = dephasing(0.75)
            .check_invariance(&NormalState::tracial(&m2()), 1e-12)
            .unwrap();
        assert!(d.invariant && d.max_residual < 1e-15);
        let alg = BlockAlgebra::commutative(3).unwrap();
        let uniform = NormalState::tracial(&alg);
        assert!(three_cycle().check_invariance(&uniform, 1e-12).unwrap().invariant);
        let skewed = NormalState::from_distribution(&alg, &[0.5, 0.3, 0.2]).unwrap();
        let d = three_cycle().check_invariance(&skewed, 1e-12).unwrap();
        // (T_*ρ)_j = ρ_{j-1}: (0.2, 0.5, 0.3) - (0.5, 0.3, 0.2)
        let expected = [0.3, 0.2, 0.1];
        for (r, e) in d.block_residuals.iter().zip(expected) {
            assert!((r - e).abs() < 1e-12);
        }
        assert!(!d.invariant);
    }

    #[test]
    fn kadison_schwarz_holds_for_unital_cp() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let t = dephasing(0.3);
        assert!(t.schwarz_defect(100, &mut rng) >= -1e-10);
    }

    #[test]
    fn non_commuting_generators_are_named() {
        let alg = m2();
        let hadamard = (pauli::x() + pauli::z()) * c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let a = ChannelMap::from_kraus_matrices(&alg, vec![hadamard]).unwrap().with_name("hadamard");
        let b = dephasing(0.75).with_name("dephase");
        let c = dephasing(0.3).with_name("dephase2");
        assert!(SemigroupSpec::new(vec![b.clone(), c]).is_ok());
        let err = SemigroupSpec::new(vec![b, a]).unwrap_err().to_string();
        assert!(err.contains("hadamard") && err.contains("dephase"));
    }

    #[test]
    fn kraus_shape_errors() {
        let alg = BlockAlgebra::new(vec![1, 2]).unwrap();
        let bad = KrausOperator::new(1, 0, CMatrix::zeros(1, 1));
        assert!(matches!(ChannelMap::from_kraus(&alg, vec![bad]), Err(Error::Shape(_))));
        let missing = KrausOperator::new(3, 0, CMatrix::zeros(1, 1));
        assert!(ChannelMap::from_kraus(&alg, vec![missing]).is_err());
    }
}
