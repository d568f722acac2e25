//! Finite-dimensional W*-algebras `⊕ᵢ M_{nᵢ}(ℂ)`, their elements, normal
//! states and the φ-inner-product geometry `⟨x, y⟩_φ = φ(y* x)`.
//!
//! Coordinates: each block is stacked column-major and blocks are
//! concatenated in order, so the coordinate dimension is `N = Σ nᵢ²`.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::Cholesky;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::linalg::{
    c64, gram_schmidt, hermitian_eigen, spectral_norm, CMatrix, CVector, C64, ONE, ZERO,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlockAlgebra {
    block_dims: Vec<usize>,
}

impl BlockAlgebra {
    pub fn new(block_dims: Vec<usize>) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::Shape("an algebra needs at least one block".into()));
        }
        if let Some(i) = block_dims.iter().position(|&n| n == 0) {
            return Err(Error::Shape(format!("block {i} has dimension 0")));
        }
        Ok(Self { block_dims })
    }

    /// `M_n(ℂ)`
    pub fn full_matrix(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    /// `ℂⁿ` as `n` one-dimensional blocks.
    pub fn commutative(n: usize) -> Result<Self> {
        Self::new(vec![1; n])
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    /// Coordinate dimension `Σ nᵢ²`.
    pub fn dim(&self) -> usize {
        self.block_dims.iter().map(|n| n * n).sum()
    }

    /// Sum of block sizes, i.e. the size of the block-diagonal embedding.
    pub fn total_size(&self) -> usize {
        self.block_dims.iter().sum()
    }

    pub fn block_offset(&self, block: usize) -> usize {
        self.block_dims[..block].iter().map(|n| n * n).sum()
    }

    /// Coordinate index of the matrix unit `E_ij` in `block`.
    pub fn coord_index(&self, block: usize, i: usize, j: usize) -> usize {
        let n = self.block_dims[block];
        self.block_offset(block) + j * n + i
    }

    /// Inverse of [`coord_index`](Self::coord_index).
    pub fn coord_location(&self, mut index: usize) -> (usize, usize, usize) {
        for (b, &n) in self.block_dims.iter().enumerate() {
            if index < n * n {
                return (b, index % n, index / n);
            }
            index -= n * n;
        }
        panic!("coordinate index out of range");
    }

    pub fn unit(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self.block_dims.iter().map(|&n| CMatrix::identity(n, n)).collect(),
        }
    }

    pub fn zero(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self.block_dims.iter().map(|&n| CMatrix::zeros(n, n)).collect(),
        }
    }

    pub fn matrix_unit(&self, block: usize, i: usize, j: usize) -> AlgebraElement {
        let mut x = self.zero();
        x.blocks[block][(i, j)] = ONE;
        x
    }

    /// Builds an element from one matrix per block.
    pub fn element(&self, blocks: Vec<CMatrix>) -> Result<AlgebraElement> {
        let x = AlgebraElement { blocks };
        self.check(&x)?;
        Ok(x)
    }

    pub fn from_coords(&self, coords: &CVector) -> Result<AlgebraElement> {
        if coords.len() != self.dim() {
            return Err(Error::Shape(format!(
                "expected {} coordinates, got {}",
                self.dim(),
                coords.len()
            )));
        }
        let mut offset = 0;
        let blocks = self
            .block_dims
            .iter()
            .map(|&n| {
                let m = CMatrix::from_column_slice(n, n, &coords.as_slice()[offset..offset + n * n]);
                offset += n * n;
                m
            })
            .collect();
        Ok(AlgebraElement { blocks })
    }

    /// Matrix units in coordinate order.
    pub fn coordinate_basis(&self) -> Vec<AlgebraElement> {
        (0..self.dim())
            .map(|k| {
                let (b, i, j) = self.coord_location(k);
                self.matrix_unit(b, i, j)
            })
            .collect()
    }

    pub fn check(&self, x: &AlgebraElement) -> Result<()> {
        if x.blocks.len() != self.block_dims.len()
            || x
                .blocks
                .iter()
                .zip(&self.block_dims)
                .any(|(m, &n)| m.shape() != (n, n))
        {
            return Err(Error::Shape(format!(
                "element with blocks {:?} does not belong to algebra {:?}",
                x.block_shapes(),
                self.block_dims
            )));
        }
        Ok(())
    }

    /// Element with i.i.d. standard complex Gaussian entries.
    pub fn random_element<R: Rng + ?Sized>(&self, rng: &mut R) -> AlgebraElement {
        AlgebraElement {
            blocks: self
                .block_dims
                .iter()
                .map(|&n| CMatrix::from_fn(n, n, |_, _| random_complex(rng)))
                .collect(),
        }
    }

    /// Embeds `x` into one block-diagonal matrix of size `Σ nᵢ`.
    pub fn block_diagonal(&self, x: &AlgebraElement) -> CMatrix {
        let size = self.total_size();
        let mut out = CMatrix::zeros(size, size);
        let mut at = 0;
        for m in &x.blocks {
            let n = m.nrows();
            out.view_mut((at, at), (n, n)).copy_from(m);
            at += n;
        }
        out
    }
}

pub(crate) fn random_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// An element of a [`BlockAlgebra`]: one square complex matrix per block.
#[derive(Clone, Debug, PartialEq)]
pub struct AlgebraElement {
    blocks: Vec<CMatrix>,
}

impl AlgebraElement {
    pub fn blocks(&self) -> &[CMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CMatrix {
        &self.blocks[i]
    }

    pub fn block_shapes(&self) -> Vec<usize> {
        self.blocks.iter().map(|m| m.nrows()).collect()
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.blocks.len() == other.blocks.len()
            && self
                .blocks
                .iter()
                .zip(&other.blocks)
                .all(|(a, b)| a.shape() == b.shape())
    }

    pub fn coords(&self) -> CVector {
        let values: Vec<C64> = self.blocks.iter().flat_map(|m| m.iter().copied()).collect();
        CVector::from_vec(values)
    }

    pub fn adjoint(&self) -> Self {
        Self {
            blocks: self.blocks.iter().map(|m| m.adjoint()).collect(),
        }
    }

    /// Blockwise product.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::Shape(format!(
                "cannot multiply blocks {:?} and {:?}",
                self.block_shapes(),
                other.block_shapes()
            )));
        }
        Ok(Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a * b)
                .collect(),
        })
    }

    pub fn try_add(&self, other: &Self) -> Result<Self> {
        if !self.same_shape(other) {
            return Err(Error::Shape("cannot add elements of different algebras".into()));
        }
        Ok(Self {
            blocks: self
                .blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            blocks: self.blocks.iter().map(|m| m * s).collect(),
        }
    }

    /// Frobenius norm of the coordinate vector.
    pub fn norm(&self) -> f64 {
        self.blocks.iter().map(|m| m.norm_squared()).sum::<f64>().sqrt()
    }

    /// C*-norm: the largest block operator norm.
    pub fn operator_norm(&self) -> f64 {
        self.blocks.iter().map(spectral_norm).fold(0.0, f64::max)
    }

    /// Sum of the block traces.
    pub fn trace(&self) -> C64 {
        self.blocks.iter().map(|m| m.trace()).sum()
    }

    pub fn is_self_adjoint(&self, tol: f64) -> bool {
        self.blocks.iter().all(|m| (m - m.adjoint()).norm() <= tol * m.norm().max(1.0))
    }

    /// Smallest eigenvalue of the self-adjoint part, over all blocks.
    pub fn min_eigenvalue(&self) -> f64 {
        self.blocks
            .iter()
            .map(|m| hermitian_eigen(m).0.first().copied().unwrap_or(0.0))
            .fold(f64::INFINITY, f64::min)
    }
}

impl Add for &AlgebraElement {
    type Output = AlgebraElement;
    fn add(self, rhs: Self) -> AlgebraElement {
        self.try_add(rhs).expect("shape mismatch in addition")
    }
}

impl Sub for &AlgebraElement {
    type Output = AlgebraElement;
    fn sub(self, rhs: Self) -> AlgebraElement {
        self.try_add(&(-rhs)).expect("shape mismatch in subtraction")
    }
}

impl Neg for &AlgebraElement {
    type Output = AlgebraElement;
    fn neg(self) -> AlgebraElement {
        self.scale(c64(-1.0, 0.0))
    }
}

impl Mul for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: Self) -> AlgebraElement {
        AlgebraElement::mul(self, rhs).expect("shape mismatch in product")
    }
}

impl Mul<C64> for &AlgebraElement {
    type Output = AlgebraElement;
    fn mul(self, rhs: C64) -> AlgebraElement {
        self.scale(rhs)
    }
}

/// A normal state `φ(x) = Σᵢ tr(ρᵢ xᵢ)` given by block density matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalState {
    algebra: BlockAlgebra,
    densities: Vec<CMatrix>,
    faithful: bool,
}

impl NormalState {
    /// Validates positivity and `φ(𝟙) = 1` (within 1e-9), then renormalises
    /// exactly.
    pub fn new(algebra: &BlockAlgebra, densities: Vec<CMatrix>) -> Result<Self> {
        Self::with_tolerances(algebra, densities, &Tolerances::default())
    }

    pub fn with_tolerances(
        algebra: &BlockAlgebra,
        densities: Vec<CMatrix>,
        tol: &Tolerances,
    ) -> Result<Self> {
        let state = Self::unnormalized(algebra, densities, tol)?;
        let total = state.total_trace();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Validation(format!(
                "density matrices have total trace {total}, expected 1"
            )));
        }
        Ok(state.renormalized(total, tol))
    }

    /// Accepts any nonzero positive family and divides by its total trace.
    pub fn normalized(algebra: &BlockAlgebra, densities: Vec<CMatrix>) -> Result<Self> {
        let tol = Tolerances::default();
        let state = Self::unnormalized(algebra, densities, &tol)?;
        let total = state.total_trace();
        if total <= 0.0 {
            return Err(Error::Validation("density matrices have zero trace".into()));
        }
        Ok(state.renormalized(total, &tol))
    }

    fn unnormalized(algebra: &BlockAlgebra, densities: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        algebra.check(&AlgebraElement {
            blocks: densities.clone(),
        })?;
        let mut hermitian = Vec::with_capacity(densities.len());
        for (i, rho) in densities.into_iter().enumerate() {
            let scale = rho.norm().max(1.0);
            if (&rho - rho.adjoint()).norm() > 1e-10 * scale {
                return Err(Error::Validation(format!("density block {i} is not Hermitian")));
            }
            let h = (&rho + rho.adjoint()) * c64(0.5, 0.0);
            let min = hermitian_eigen(&h).0.first().copied().unwrap_or(0.0);
            if min < -1e-10 * scale {
                return Err(Error::Validation(format!(
                    "density block {i} has negative eigenvalue {min:.3e}"
                )));
            }
            hermitian.push(h);
        }
        let faithful = faithful_blocks(&hermitian, tol.faithful);
        Ok(Self {
            algebra: algebra.clone(),
            densities: hermitian,
            faithful,
        })
    }

    fn renormalized(mut self, total: f64, tol: &Tolerances) -> Self {
        for rho in &mut self.densities {
            *rho /= c64(total, 0.0);
        }
        self.faithful = faithful_blocks(&self.densities, tol.faithful);
        self
    }

    fn total_trace(&self) -> f64 {
        self.densities.iter().map(|m| m.trace().re).sum()
    }

    /// Normalised trace `𝟙 / Σ nᵢ` (uniform distribution in the commutative case).
    pub fn tracial(algebra: &BlockAlgebra) -> Self {
        let d = algebra.total_size() as f64;
        let densities = algebra
            .block_dims()
            .iter()
            .map(|&n| CMatrix::identity(n, n) / c64(d, 0.0))
            .collect();
        Self {
            algebra: algebra.clone(),
            densities,
            faithful: true,
        }
    }

    /// Probability vector on the commutative algebra `ℂⁿ`.
    pub fn from_distribution(algebra: &BlockAlgebra, probabilities: &[f64]) -> Result<Self> {
        if algebra.block_dims().iter().any(|&n| n != 1) || probabilities.len() != algebra.num_blocks() {
            return Err(Error::Shape("distribution needs a commutative algebra of matching size".into()));
        }
        Self::new(
            algebra,
            probabilities
                .iter()
                .map(|&p| CMatrix::from_element(1, 1, c64(p, 0.0)))
                .collect(),
        )
    }

    /// Vector state `x ↦ ⟨ψ, x ψ⟩` on one block.
    pub fn vector_state(algebra: &BlockAlgebra, block: usize, psi: &CVector) -> Result<Self> {
        let mut densities: Vec<CMatrix> = algebra
            .block_dims()
            .iter()
            .map(|&n| CMatrix::zeros(n, n))
            .collect();
        if block >= densities.len() || psi.len() != algebra.block_dims()[block] {
            return Err(Error::Shape("vector does not fit the block".into()));
        }
        densities[block] = psi * psi.adjoint();
        Self::normalized(algebra, densities)
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn densities(&self) -> &[CMatrix] {
        &self.densities
    }

    pub fn is_faithful(&self) -> bool {
        self.faithful
    }

    /// Density matrices viewed as an algebra element (for the trace pairing).
    pub fn density_element(&self) -> AlgebraElement {
        AlgebraElement {
            blocks: self.densities.clone(),
        }
    }

    /// `φ(x)`
    pub fn expect(&self, x: &AlgebraElement) -> Result<C64> {
        self.algebra.check(x)?;
        Ok(self
            .densities
            .iter()
            .zip(&x.blocks)
            .map(|(rho, xb)| (rho * xb).trace())
            .sum())
    }

    /// `⟨x, y⟩_φ = φ(y* x)`
    pub fn inner(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<C64> {
        self.expect(&y.adjoint().mul(x)?)
    }

    /// `‖x‖_φ = φ(x* x)^{1/2}`
    pub fn seminorm(&self, x: &AlgebraElement) -> Result<f64> {
        Ok(self.inner(x, x)?.re.max(0.0).sqrt())
    }

    /// Gram matrix of the coordinate basis: `G_ab = φ(e_a* e_b)`, so that
    /// `⟨x, y⟩_φ = y† G x` in coordinates.
    pub fn gram(&self) -> CMatrix {
        density_gram(&self.algebra, &self.densities)
    }

    /// Convex combination of states on the same algebra.
    pub fn mixture(states: &[NormalState], weights: &[f64]) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::Validation("empty mixture".into()))?;
        if weights.len() != states.len() {
            return Err(Error::Shape("one weight per state required".into()));
        }
        let mut densities: Vec<CMatrix> = first.densities.iter().map(|m| m * ZERO).collect();
        for (s, &w) in states.iter().zip(weights) {
            if s.algebra != first.algebra {
                return Err(Error::Shape("states live on different algebras".into()));
            }
            for (acc, rho) in densities.iter_mut().zip(&s.densities) {
                *acc += rho * c64(w, 0.0);
            }
        }
        Self::normalized(&first.algebra, densities)
    }
}

fn faithful_blocks(densities: &[CMatrix], rel_tol: f64) -> bool {
    densities.iter().all(|rho| {
        let (vals, _) = hermitian_eigen(rho);
        let max = vals.last().copied().unwrap_or(0.0);
        let min = vals.first().copied().unwrap_or(0.0);
        max > 0.0 && min > rel_tol * max
    })
}

/// Gram matrix `G_ab = ω(e_a* e_b)` of the functional `ω(x) = Σ tr(ρᵢxᵢ)`;
/// the `ρᵢ` need not be normalised or positive.
pub fn density_gram(algebra: &BlockAlgebra, densities: &[CMatrix]) -> CMatrix {
    let n_total = algebra.dim();
    let mut g = CMatrix::zeros(n_total, n_total);
    for (b, &n) in algebra.block_dims().iter().enumerate() {
        let rho = &densities[b];
        // e_a = E_ij, e_b = E_kl: E_ji E_kl = δ_ik E_jl, φ(E_jl) = ρ_lj
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let a = algebra.coord_index(b, i, j);
                    let c = algebra.coord_index(b, i, l);
                    g[(a, c)] = rho[(l, j)];
                }
            }
        }
    }
    g
}

/// A family Φ of normal states.
#[derive(Clone, Debug)]
pub struct StateFamily {
    states: Vec<NormalState>,
    jointly_faithful: bool,
}

impl StateFamily {
    pub fn new(states: Vec<NormalState>) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| Error::Validation("a state family cannot be empty".into()))?;
        if states.iter().any(|s| s.algebra != first.algebra) {
            return Err(Error::Shape("states live on different algebras".into()));
        }
        let weights = vec![1.0 / states.len() as f64; states.len()];
        // supp(Σρ) = ∨ supp(ρ)
        let jointly_faithful = NormalState::mixture(&states, &weights)?.is_faithful();
        Ok(Self {
            states,
            jointly_faithful,
        })
    }

    pub fn single(state: NormalState) -> Self {
        let jointly_faithful = state.is_faithful();
        Self {
            states: vec![state],
            jointly_faithful,
        }
    }

    pub fn states(&self) -> &[NormalState] {
        &self.states
    }

    pub fn is_jointly_faithful(&self) -> bool {
        self.jointly_faithful
    }

    /// Uniform average of the family; faithful iff the family is jointly faithful.
    pub fn average(&self) -> NormalState {
        let weights = vec![1.0 / self.states.len() as f64; self.states.len()];
        NormalState::mixture(&self.states, &weights).expect("validated family")
    }
}

/// φ-orthonormal basis of the whole algebra, starting with `𝟙`.
pub fn orthonormal_basis(algebra: &BlockAlgebra, state: &NormalState) -> Result<Vec<AlgebraElement>> {
    let metric = PhiMetric::new(algebra, state)?;
    Ok(metric.basis_elements())
}

/// The GNS geometry of a faithful state, cached in coordinates.
///
/// `basis` holds a φ-orthonormal basis as columns (`B† G B = I`); matrices
/// `M` acting on coordinates become `B⁻¹ M B = B† G M B` in that basis.
#[derive(Clone, Debug)]
pub struct PhiMetric {
    algebra: BlockAlgebra,
    gram: CMatrix,
    basis: CMatrix,
    basis_inv: CMatrix,
}

impl PhiMetric {
    pub fn new(algebra: &BlockAlgebra, state: &NormalState) -> Result<Self> {
        if state.algebra() != algebra {
            return Err(Error::Shape("state lives on a different algebra".into()));
        }
        if !state.is_faithful() {
            return Err(Error::NotFaithful(
                "φ-orthonormal bases need a faithful state; compress with gns::support_projection first"
                    .into(),
            ));
        }
        let gram = state.gram();
        let n = algebra.dim();
        let mut candidates = CMatrix::zeros(n, n + 1);
        candidates.set_column(0, &algebra.unit().coords());
        for k in 0..n {
            candidates[(k, k + 1)] = ONE;
        }
        let basis = gram_schmidt(&candidates, &gram, 1e-8);
        if basis.ncols() != n {
            return Err(Error::Numeric(format!(
                "Gram-Schmidt produced {} of {} basis vectors",
                basis.ncols(),
                n
            )));
        }
        let basis_inv = basis.adjoint() * &gram;
        Ok(Self {
            algebra: algebra.clone(),
            gram,
            basis,
            basis_inv,
        })
    }

    pub fn algebra(&self) -> &BlockAlgebra {
        &self.algebra
    }

    pub fn gram(&self) -> &CMatrix {
        &self.gram
    }

    /// φ-orthonormal basis as coordinate columns.
    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn basis_elements(&self) -> Vec<AlgebraElement> {
        self.basis
            .column_iter()
            .map(|c| self.algebra.from_coords(&c.into_owned()).expect("dimension matches"))
            .collect()
    }

    pub fn inner(&self, x: &CVector, y: &CVector) -> C64 {
        (y.adjoint() * &self.gram * x)[(0, 0)]
    }

    pub fn norm(&self, x: &CVector) -> f64 {
        self.inner(x, x).re.max(0.0).sqrt()
    }

    /// Matrix of a coordinate operator in the φ-orthonormal basis.
    pub fn to_orthonormal(&self, m: &CMatrix) -> CMatrix {
        &self.basis_inv * m * &self.basis
    }

    pub fn from_orthonormal(&self, m: &CMatrix) -> CMatrix {
        &self.basis * m * &self.basis_inv
    }

    /// Operator norm induced by `‖·‖_φ`.
    pub fn operator_norm(&self, m: &CMatrix) -> f64 {
        spectral_norm(&self.to_orthonormal(m))
    }

    /// φ-adjoint `G⁻¹ M† G`.
    pub fn adjoint(&self, m: &CMatrix) -> CMatrix {
        let chol = Cholesky::new(self.gram.clone()).expect("Gram matrix of a faithful state is positive definite");
        chol.solve(&(m.adjoint() * &self.gram))
    }
}
