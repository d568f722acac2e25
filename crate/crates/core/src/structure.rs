//! Structure of the reversible part: the Choi-Effros product, conditional
//! expectation and trace properties of `P`, unitary eigenvectors, the
//! multiplicative domain, and the Perron-Frobenius report.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::{density_gram, random_complex, AlgebraElement, NormalState, StateFamily};
use crate::channel::ChannelMap;
use crate::config::{Tolerances, MAX_GROUP_ORDER};
use crate::decomposition::{cluster_values, eigendecompose, jdlg_split, JdlgSplit, SpectralData};
use crate::error::{Error, Result};
use crate::linalg::{
    bottleneck_matching, c64, cis, cyclic_order, hermitian_eigen, null_space, subspace_gap, CMatrix, CVector, C64,
};

/// Samples are drawn with this many attempts before an eigenvector
/// extraction gives up.
pub const SEED_RETRIES: usize = 8;

/// Tolerance for membership of a product `αβ̄` in the peripheral set.
pub const CLOSURE_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct ClosureEntry {
    pub alpha: usize,
    pub beta: usize,
    /// Index of the distinct eigenvalue closest to `αβ̄`.
    pub matched: usize,
    pub distance: f64,
}

/// Peripheral eigenvalues and their group structure.
#[derive(Clone, Debug, Serialize)]
pub struct PeripheralGroup {
    /// With multiplicity, spectral order.
    pub eigenvalues: Vec<C64>,
    pub distinct: Vec<C64>,
    /// Smallest `h ≤ 64` with every eigenvalue an `h`-th root of unity.
    pub h: Option<usize>,
    pub closure: Vec<ClosureEntry>,
    pub max_closure_distance: f64,
    pub closed: bool,
}

impl PeripheralGroup {
    pub fn new(peripheral: &[C64], cluster_tol: f64) -> Self {
        let distinct: Vec<C64> = cluster_values(peripheral, cluster_tol).into_iter().map(|c| c.0).collect();
        let mut closure = Vec::new();
        for (a, alpha) in distinct.iter().enumerate() {
            for (b, beta) in distinct.iter().enumerate() {
                let target = alpha * beta.conj();
                let (matched, distance) = distinct
                    .iter()
                    .enumerate()
                    .map(|(k, z)| (k, (z - target).norm()))
                    .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best });
                closure.push(ClosureEntry {
                    alpha: a,
                    beta: b,
                    matched,
                    distance,
                });
            }
        }
        let max_closure_distance = closure.iter().map(|c| c.distance).fold(0.0, f64::max);
        Self {
            eigenvalues: peripheral.to_vec(),
            h: cyclic_order(peripheral, 1e-8, MAX_GROUP_ORDER),
            closed: !distinct.is_empty() && max_closure_distance <= CLOSURE_TOL,
            distinct,
            closure,
            max_closure_distance,
        }
    }

    pub fn from_spectral(data: &SpectralData, tol: &Tolerances) -> Self {
        Self::new(&data.peripheral_values(), tol.cluster)
    }

    /// `Γ_h`, the `h`-th roots of unity.
    pub fn roots_of_unity(h: usize) -> Vec<C64> {
        (0..h).map(|k| cis(TAU * k as f64 / h as f64)).collect()
    }
}

fn require_cp(channel: &ChannelMap) -> Result<()> {
    let cp = channel.is_completely_positive(1e-10);
    if !cp.completely_positive {
        return Err(Error::UnsupportedMap(format!(
            "the Choi-Effros product needs a completely positive generator (min Choi eigenvalue {:.3e})",
            cp.min_choi_eigenvalue
        )));
    }
    Ok(())
}

fn in_range(split: &JdlgSplit, x: &AlgebraElement) -> Result<()> {
    let metric = split.metric();
    let v = x.coords();
    let residual = metric.norm(&(split.projection() * &v - &v));
    if residual > 1e-9 * metric.norm(&v).max(1.0) {
        return Err(Error::Validation(format!(
            "element is not in the range of P (residual {residual:.3e})"
        )));
    }
    Ok(())
}

/// `x·y := P(xy)` on the range of a completely positive projection.
#[derive(Clone, Debug)]
pub struct ChoiEffros<'a> {
    split: &'a JdlgSplit,
}

impl<'a> ChoiEffros<'a> {
    pub fn new(split: &'a JdlgSplit, channel: &ChannelMap) -> Result<Self> {
        require_cp(channel)?;
        Ok(Self { split })
    }

    pub fn product(&self, x: &AlgebraElement, y: &AlgebraElement) -> Result<AlgebraElement> {
        in_range(self.split, x)?;
        in_range(self.split, y)?;
        self.split.apply(&x.mul(y)?)
    }

    fn product_unchecked(&self, x: &AlgebraElement, y: &AlgebraElement) -> AlgebraElement {
        self.split.apply(&(x * y)).expect("same algebra")
    }
}

/// `P(xy)` for `x, y ∈ ran P`.
pub fn choi_effros_product(
    split: &JdlgSplit,
    channel: &ChannelMap,
    x: &AlgebraElement,
    y: &AlgebraElement,
) -> Result<AlgebraElement> {
    ChoiEffros::new(split, channel)?.product(x, y)
}

/// Random element of `ran P` with unit φ-norm.
fn sample_reversible<R: Rng + ?Sized>(split: &JdlgSplit, rng: &mut R) -> AlgebraElement {
    let basis = split.reversible_basis();
    let coeffs = CVector::from_fn(basis.ncols(), |_, _| random_complex(rng));
    let mut v = basis * coeffs;
    let norm = split.metric().norm(&v);
    if norm > 0.0 {
        v /= c64(norm, 0.0);
    }
    split.metric().algebra().from_coords(&v).expect("dimension matches")
}

#[derive(Clone, Debug, Serialize)]
pub struct ChoiEffrosDiagnostic {
    /// `max ‖(x·y)·z − x·(y·z)‖`
    pub associativity: f64,
    /// `max ‖(x·y)* − y*·x*‖`
    pub involution: f64,
    /// `min λ_min(x*·x) / ‖x*·x‖` (nonnegative up to rounding).
    pub positivity: f64,
    /// `max ‖x·y − xy‖`: zero exactly when `ran P` is a subalgebra.
    pub product_gap: f64,
}

/// Checks the C*-algebra axioms of the Choi-Effros product on random samples.
pub fn choi_effros_axioms(split: &JdlgSplit, channel: &ChannelMap, samples: usize, seed: u64) -> Result<ChoiEffrosDiagnostic> {
    let ce = ChoiEffros::new(split, channel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut d = ChoiEffrosDiagnostic {
        associativity: 0.0,
        involution: 0.0,
        positivity: f64::INFINITY,
        product_gap: 0.0,
    };
    if split.reversible_dim() == 0 {
        d.positivity = 0.0;
        return Ok(d);
    }
    for _ in 0..samples {
        let x = sample_reversible(split, &mut rng);
        let y = sample_reversible(split, &mut rng);
        let z = sample_reversible(split, &mut rng);
        let xy = ce.product_unchecked(&x, &y);
        let left = ce.product_unchecked(&xy, &z);
        let right = ce.product_unchecked(&x, &ce.product_unchecked(&y, &z));
        d.associativity = d.associativity.max((&left - &right).norm());
        let swapped = ce.product_unchecked(&y.adjoint(), &x.adjoint());
        d.involution = d.involution.max((&xy.adjoint() - &swapped).norm());
        let square = ce.product_unchecked(&x.adjoint(), &x);
        let scale = square.operator_norm().max(f64::MIN_POSITIVE);
        d.positivity = d.positivity.min(square.min_eigenvalue() / scale);
        d.product_gap = d.product_gap.max((&xy - &(&x * &y)).norm());
    }
    Ok(d)
}

#[derive(Clone, Debug, Serialize)]
pub struct ConditionalExpectationDiagnostic {
    /// `‖P^† ρ_φ − ρ_φ‖`: `φ∘P = φ`.
    pub state_residual: f64,
    /// `min ‖P(a*a)‖ / ‖a*a‖` over sampled positive elements.
    pub cone_min: f64,
    pub faithful: bool,
    /// `max ‖P(yxz) − yP(x)z‖` over samples; absent when `P` is not faithful.
    pub residual: Option<f64>,
    /// `max ‖xy − P(xy)‖` over basis pairs of `𝔄_r`.
    pub subalgebra_residual: f64,
    pub subalgebra: bool,
}

/// Tests the bimodule property of `P` over `𝔄_r` and closure of `𝔄_r`
/// under the ordinary product.
pub fn conditional_expectation_check(split: &JdlgSplit, samples: usize, seed: u64) -> ConditionalExpectationDiagnostic {
    let algebra = split.metric().algebra().clone();
    let rho = split.state().density_element().coords();
    let state_residual = (split.projection().adjoint() * &rho - &rho).norm();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cone_min = f64::INFINITY;
    for _ in 0..samples.max(1) {
        let a = algebra.random_element(&mut rng);
        let positive = &a.adjoint() * &a;
        let image = split.apply(&positive).expect("same algebra");
        cone_min = cone_min.min(image.norm() / positive.norm().max(f64::MIN_POSITIVE));
    }
    let faithful = state_residual <= 1e-10 && cone_min > 1e-10;
    let basis = split.reversible_elements();
    let mut subalgebra_residual: f64 = 0.0;
    for x in &basis {
        for y in &basis {
            let xy = x * y;
            subalgebra_residual = subalgebra_residual.max((&xy - &split.apply(&xy).expect("same algebra")).norm());
        }
    }
    let residual = faithful.then(|| {
        let mut worst: f64 = 0.0;
        if split.reversible_dim() == 0 {
            return worst;
        }
        for _ in 0..samples {
            let y = normalized(sample_reversible(split, &mut rng));
            let z = normalized(sample_reversible(split, &mut rng));
            let x = normalized(algebra.random_element(&mut rng));
            let lhs = split.apply(&(&(&y * &x) * &z)).expect("same algebra");
            let rhs = &(&y * &split.apply(&x).expect("same algebra")) * &z;
            worst = worst.max((&lhs - &rhs).norm());
        }
        worst
    });
    ConditionalExpectationDiagnostic {
        state_residual,
        cone_min,
        faithful,
        residual,
        subalgebra: subalgebra_residual <= 1e-8,
        subalgebra_residual,
    }
}

/// Scales to unit operator norm.
fn normalized(x: AlgebraElement) -> AlgebraElement {
    let n = x.operator_norm();
    if n > 0.0 {
        x.scale(c64(1.0 / n, 0.0))
    } else {
        x
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MultiplicativeDomain {
    /// Orthonormal coordinate columns spanning `{x : T(x*y) = T(x)*T(y) ∀y}`.
    #[serde(skip)]
    pub basis: CMatrix,
    /// Same for `{x : T(x*x) = T(x)*T(x)}`, read off the null space of the
    /// positive form `x ↦ φ(T(x*x) − T(x)*T(x))`.
    #[serde(skip)]
    pub quadratic_basis: CMatrix,
    pub dim: usize,
    pub quadratic_dim: usize,
    /// Largest principal-angle sine between the two subspaces.
    pub gap: f64,
    /// Largest `‖T(x*x) − T(x)*T(x)‖` over the returned basis.
    pub member_defect: f64,
    /// Smallest relative defect `φ(T(x*x) − T(x)*T(x)) / ‖x‖²_φ` over random
    /// elements orthogonal to the domain; absent when the domain is everything.
    pub nonmember_defect: Option<f64>,
    /// Minimum eigenvalue seen in the Schwarz spot check.
    pub schwarz_defect: f64,
}

impl MultiplicativeDomain {
    pub fn elements(&self, channel: &ChannelMap) -> Vec<AlgebraElement> {
        self.basis
            .column_iter()
            .map(|c| channel.algebra().from_coords(&c.into_owned()).expect("dimension matches"))
            .collect()
    }
}

/// The multiplicative domain of a Schwarz map, computed from the bilinear
/// characterisation and cross-checked against the quadratic one.
pub fn multiplicative_domain(
    channel: &ChannelMap,
    state: &NormalState,
    tol: &Tolerances,
    seed: u64,
) -> Result<MultiplicativeDomain> {
    if !state.is_faithful() {
        return Err(Error::NotFaithful("the quadratic characterisation needs a faithful state".into()));
    }
    let algebra = channel.algebra();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let schwarz = channel.schwarz_defect(100, &mut rng);
    if schwarz < -1e-10 {
        return Err(Error::UnsupportedMap(format!(
            "T(x*x) − T(x)*T(x) has eigenvalue {schwarz:.3e} < 0; not a Schwarz map"
        )));
    }
    let n = algebra.dim();
    let basis = algebra.coordinate_basis();
    let images: Vec<AlgebraElement> = basis.iter().map(|e| channel.apply(e).expect("fits")).collect();
    // w ↦ [T(w e_k) − T(w) T(e_k)]_k is linear; the domain is {w*}.
    let mut stacked = CMatrix::zeros(n * n, n);
    for (c, w) in basis.iter().enumerate() {
        for (k, e) in basis.iter().enumerate() {
            let defect = &channel.apply(&(w * e)).expect("fits") - &(&images[c] * &images[k]);
            stacked.view_mut((k * n, c), (n, 1)).copy_from(&defect.coords());
        }
    }
    let w_basis = null_space(&stacked, tol.null_space);
    let mut x_basis = CMatrix::zeros(n, w_basis.ncols());
    for (k, col) in w_basis.column_iter().enumerate() {
        let w = algebra.from_coords(&col.into_owned())?;
        x_basis.set_column(k, &w.adjoint().coords());
    }
    // columns of x_basis stay orthonormal: adjoint is an antiunitary on coordinates
    let gram = state.gram();
    let rho_t = algebra.from_coords(&(channel.superoperator().adjoint() * state.density_element().coords()))?;
    let form = density_gram(algebra, rho_t.blocks()) - channel.superoperator().adjoint() * &gram * channel.superoperator();
    let (values, vectors) = hermitian_eigen(&form);
    let scale = values.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let keep: Vec<usize> = (0..n).filter(|&i| values[i] <= 1e-10 * scale).collect();
    let mut quadratic = CMatrix::zeros(n, keep.len());
    for (k, &i) in keep.iter().enumerate() {
        quadratic.set_column(k, &vectors.column(i));
    }
    let gap = subspace_gap(&x_basis, &quadratic);
    let mut member_defect: f64 = 0.0;
    for col in x_basis.column_iter() {
        let x = algebra.from_coords(&col.into_owned())?;
        let tx = channel.apply(&x)?;
        let d = &channel.apply(&(&x.adjoint() * &x))? - &(&tx.adjoint() * &tx);
        member_defect = member_defect.max(d.norm());
    }
    let mut nonmember_defect = None;
    if x_basis.ncols() < n {
        let mut worst = f64::INFINITY;
        let projector = &x_basis * x_basis.adjoint();
        for _ in 0..16 {
            let v = CVector::from_fn(n, |_, _| random_complex(&mut rng));
            let v = &v - &projector * &v;
            let value = (v.adjoint() * &form * &v)[(0, 0)].re;
            let norm_sq = (v.adjoint() * &gram * &v)[(0, 0)].re;
            worst = worst.min(value / norm_sq);
        }
        nonmember_defect = Some(worst);
    }
    Ok(MultiplicativeDomain {
        dim: x_basis.ncols(),
        quadratic_dim: quadratic.ncols(),
        basis: x_basis,
        quadratic_basis: quadratic,
        gap,
        member_defect,
        nonmember_defect,
        schwarz_defect: schwarz,
    })
}

#[derive(Clone, Debug)]
pub struct UnitaryEigenvector {
    pub eigenvalue: C64,
    pub element: AlgebraElement,
    /// `max(‖u*u − 𝟙‖, ‖uu* − 𝟙‖)` in operator norm.
    pub unitarity_residual: f64,
    /// `‖Tu − λu‖`
    pub eigen_residual: f64,
    /// Number of seeds tried before the average was nonzero.
    pub attempts: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct UnitaryEigenvectorReport {
    pub eigenvalue: C64,
    pub coords: Vec<C64>,
    pub unitarity_residual: f64,
    pub eigen_residual: f64,
}

impl From<&UnitaryEigenvector> for UnitaryEigenvectorReport {
    fn from(u: &UnitaryEigenvector) -> Self {
        Self {
            eigenvalue: u.eigenvalue,
            coords: u.element.coords().iter().copied().collect(),
            unitarity_residual: u.unitarity_residual,
            eigen_residual: u.eigen_residual,
        }
    }
}

/// Discrete Haar averages `x_k = (1/h) Σ_{j<h} e^{2πijk/h} Tʲ(Px₀)`, one per
/// character of `Γ_h`, normalised to unitaries.
///
/// The default seed `x₀` is the first φ-orthonormal basis vector not fixed by
/// `T`; characters whose average vanishes are retried with seeded random
/// elements.
pub fn unitary_eigenvectors(
    channel: &ChannelMap,
    split: &JdlgSplit,
    h: usize,
    seed: u64,
) -> Result<Vec<UnitaryEigenvector>> {
    if h == 0 || h > MAX_GROUP_ORDER {
        return Err(Error::Validation(format!("group order {h} outside 1..={MAX_GROUP_ORDER}")));
    }
    let metric = split.metric();
    let algebra = metric.algebra();
    let fixed = split.fixed_projection();
    let fixed_dim = crate::linalg::rank(&fixed, 1e-8);
    if fixed_dim != 1 {
        return Err(Error::Refused {
            axiom: "ergodicity".into(),
            detail: format!("fixed space has dimension {fixed_dim}"),
        });
    }
    let t = channel.superoperator();
    let default_seed = metric
        .basis()
        .column_iter()
        .map(|c| c.into_owned())
        .find(|v| metric.norm(&(t * v - v)) > 1e-8)
        .unwrap_or_else(|| algebra.unit().coords());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds = vec![default_seed];
    for _ in 0..SEED_RETRIES {
        seeds.push(algebra.random_element(&mut rng).coords());
    }
    let mut orbits: Vec<Vec<CVector>> = Vec::new();
    for s in &seeds {
        let mut v = split.projection() * s;
        let mut orbit = Vec::with_capacity(h);
        for _ in 0..h {
            orbit.push(v.clone());
            v = t * v;
        }
        orbits.push(orbit);
    }
    let unit = algebra.unit();
    let mut out = Vec::with_capacity(h);
    for k in 0..h {
        let mut found = None;
        for (attempt, (s, orbit)) in seeds.iter().zip(&orbits).enumerate() {
            let mut x = CVector::zeros(s.len());
            for (j, v) in orbit.iter().enumerate() {
                x += v * cis(TAU * (j * k) as f64 / h as f64);
            }
            x /= c64(h as f64, 0.0);
            let norm = metric.norm(&x);
            if norm > 1e-8 * metric.norm(s).max(f64::MIN_POSITIVE) {
                found = Some((attempt + 1, x / c64(norm, 0.0)));
                break;
            }
        }
        let (attempts, mut u) = found.ok_or_else(|| {
            Error::Numeric(format!(
                "character {k} of Γ_{h} averaged to zero for {} seeds",
                seeds.len()
            ))
        })?;
        crate::linalg::canonicalize_vector(&mut u);
        let element = algebra.from_coords(&u)?;
        let eigenvalue = cis(-TAU * k as f64 / h as f64);
        let unitarity = (&(&element.adjoint() * &element) - &unit)
            .operator_norm()
            .max((&(&element * &element.adjoint()) - &unit).operator_norm());
        let eigen_residual = (&channel.apply(&element)? - &element.scale(eigenvalue)).norm();
        out.push(UnitaryEigenvector {
            eigenvalue,
            element,
            unitarity_residual: unitarity,
            eigen_residual,
            attempts,
        });
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceDiagnostic {
    /// `max |φ(xy) − φ(yx)|` over `𝔄_r` basis pairs.
    pub trace_residual: f64,
    /// `max |φ(u_j* u_k)|` over distinct eigenvectors.
    pub orthogonality_residual: f64,
}

/// Tests that φ restricts to a trace on `𝔄_r` and that unitary
/// eigenvectors for distinct characters are φ-orthogonal.
pub fn trace_check(state: &NormalState, split: &JdlgSplit, eigenvectors: &[UnitaryEigenvector]) -> TraceDiagnostic {
    let basis = split.reversible_elements();
    let mut trace_residual: f64 = 0.0;
    for x in &basis {
        for y in &basis {
            let a = state.expect(&(x * y)).expect("same algebra");
            let b = state.expect(&(y * x)).expect("same algebra");
            trace_residual = trace_residual.max((a - b).norm());
        }
    }
    let mut orthogonality_residual: f64 = 0.0;
    for (j, u) in eigenvectors.iter().enumerate() {
        for (k, v) in eigenvectors.iter().enumerate() {
            if j != k {
                let value = state.expect(&(&u.element.adjoint() * &v.element)).expect("same algebra");
                orthogonality_residual = orthogonality_residual.max(value.norm());
            }
        }
    }
    TraceDiagnostic {
        trace_residual,
        orthogonality_residual,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AutomorphismDiagnostic {
    /// `max ‖T(x∘y) − T(x)∘T(y)‖` with `∘` the ordinary product when `𝔄_r`
    /// is a subalgebra and the Choi-Effros product otherwise.
    pub product_residual: f64,
    /// `max ‖T(x*) − T(x)*‖`
    pub involution_residual: f64,
    pub residual: f64,
    /// Condition number of `T|𝔄_r` in the φ-metric.
    pub restriction_condition: f64,
    pub invertible: bool,
    pub ordinary_product: bool,
}

/// Checks that `T` restricts to a *-automorphism of `𝔄_r`.
pub fn automorphism_check(channel: &ChannelMap, split: &JdlgSplit, ordinary_product: bool) -> AutomorphismDiagnostic {
    let basis = split.reversible_elements();
    let product = |x: &AlgebraElement, y: &AlgebraElement| {
        let xy = x * y;
        if ordinary_product {
            xy
        } else {
            split.apply(&xy).expect("same algebra")
        }
    };
    let images: Vec<AlgebraElement> = basis.iter().map(|x| channel.apply(x).expect("fits")).collect();
    let mut product_residual: f64 = 0.0;
    let mut involution_residual: f64 = 0.0;
    for (i, x) in basis.iter().enumerate() {
        involution_residual = involution_residual
            .max((&channel.apply(&x.adjoint()).expect("fits") - &images[i].adjoint()).norm());
        for (j, y) in basis.iter().enumerate() {
            let lhs = channel.apply(&product(x, y)).expect("fits");
            product_residual = product_residual.max((&lhs - &product(&images[i], &images[j])).norm());
        }
    }
    let restriction_condition = split.restriction_condition();
    AutomorphismDiagnostic {
        residual: product_residual.max(involution_residual),
        product_residual,
        involution_residual,
        invertible: restriction_condition.is_finite(),
        restriction_condition,
        ordinary_product,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RotationResidual {
    pub alpha: C64,
    /// Bottleneck distance between `Sp(T)` and `α·Sp(T)`.
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AxiomCheck {
    pub completely_positive: f64,
    pub unitality: f64,
    pub invariance: f64,
    pub faithful: bool,
}

/// Summary of the peripheral structure of a W*-dynamical system.
#[derive(Clone, Debug, Serialize)]
pub struct StructureReport {
    pub axioms: AxiomCheck,
    pub ergodic: bool,
    pub fixed_dim: usize,
    /// False when claims that need ergodicity were skipped.
    pub complete: bool,
    pub group: PeripheralGroup,
    /// Cyclic order of the peripheral group; reported for ergodic systems.
    pub h: Option<usize>,
    /// Geometric multiplicity 1 for every peripheral eigenvalue.
    pub simple: Option<bool>,
    pub max_peripheral_multiplicity: usize,
    pub rotation: Vec<RotationResidual>,
    pub subalgebra: bool,
    pub conditional_expectation: ConditionalExpectationDiagnostic,
    pub choi_effros: ChoiEffrosDiagnostic,
    pub automorphism: AutomorphismDiagnostic,
    pub trace: Option<TraceDiagnostic>,
    pub unitary_eigenvectors: Vec<UnitaryEigenvectorReport>,
    /// `max ‖T(u_α x) − α u_α T(x)‖` over eigenvectors and sampled `x`.
    pub eigen_relation_residual: Option<f64>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Copy, Debug)]
pub struct StructureOptions {
    pub samples: usize,
    pub seed: u64,
    pub rotation_tol: f64,
}

impl Default for StructureOptions {
    fn default() -> Self {
        Self {
            samples: 64,
            seed: 0,
            rotation_tol: 1e-8,
        }
    }
}

fn refuse(axiom: &str, detail: String) -> Error {
    Error::Refused {
        axiom: axiom.into(),
        detail,
    }
}

/// Checks the W*-dynamical-system axioms (CP, unital, φ invariant and
/// faithful) and assembles the structure report. Non-ergodic systems get a
/// partial report.
pub fn perron_frobenius_report(
    channel: &ChannelMap,
    state: &NormalState,
    tol: &Tolerances,
    options: &StructureOptions,
) -> Result<StructureReport> {
    let cp = channel.is_completely_positive(1e-10);
    if !cp.completely_positive {
        return Err(refuse(
            "complete positivity",
            format!("min Choi eigenvalue {:.3e}", cp.min_choi_eigenvalue),
        ));
    }
    let unitality = channel.unitality_residual();
    if unitality > 1e-10 {
        return Err(refuse("unitality", format!("‖T𝟙 − 𝟙‖ = {unitality:.3e}")));
    }
    let invariance = channel.check_invariance(state, 1e-10)?;
    if !invariance.invariant {
        return Err(refuse(
            "invariance of φ",
            format!("‖T_*ρ − ρ‖ = {:.3e}", invariance.max_residual),
        ));
    }
    if !state.is_faithful() {
        return Err(refuse("faithfulness of φ", "ρ is singular".into()));
    }
    let axioms = AxiomCheck {
        completely_positive: cp.min_choi_eigenvalue,
        unitality,
        invariance: invariance.max_residual,
        faithful: true,
    };
    let family = StateFamily::single(state.clone());
    let split = jdlg_split(channel, &family, tol)?;
    let spectral = eigendecompose(channel, tol)?;
    structure_report_for(channel, &split, &spectral, axioms, tol, options)
}

/// The report for an already computed split.
pub fn structure_report_for(
    channel: &ChannelMap,
    split: &JdlgSplit,
    spectral: &SpectralData,
    axioms: AxiomCheck,
    tol: &Tolerances,
    options: &StructureOptions,
) -> Result<StructureReport> {
    let mut warnings = spectral.warnings.clone();
    let group = PeripheralGroup::from_spectral(spectral, tol);
    let fixed_dim = spectral.fixed_dim();
    let ergodic = fixed_dim == 1;
    let max_peripheral_multiplicity = spectral.clusters.iter().map(|c| c.geometric).max().unwrap_or(0);
    let conditional_expectation = conditional_expectation_check(split, options.samples, options.seed);
    let choi_effros = choi_effros_axioms(split, channel, options.samples, options.seed.wrapping_add(1))?;
    let automorphism = automorphism_check(channel, split, conditional_expectation.subalgebra);
    let mut report = StructureReport {
        axioms,
        ergodic,
        fixed_dim,
        complete: false,
        h: None,
        simple: None,
        max_peripheral_multiplicity,
        rotation: Vec::new(),
        subalgebra: conditional_expectation.subalgebra,
        conditional_expectation,
        choi_effros,
        automorphism,
        trace: None,
        unitary_eigenvectors: Vec::new(),
        eigen_relation_residual: None,
        group,
        warnings: Vec::new(),
    };
    if !ergodic {
        warnings.push(format!(
            "fixed space has dimension {fixed_dim}; subgroup, simplicity and rotation claims need ergodicity and were skipped"
        ));
        report.warnings = warnings;
        return Ok(report);
    }
    report.simple = Some(spectral.clusters.iter().all(|c| c.geometric == 1));
    for &alpha in &report.group.distinct {
        let rotated: Vec<C64> = spectral.eigenvalues.iter().map(|z| z * alpha).collect();
        let residual = bottleneck_matching(&spectral.eigenvalues, &rotated).map_or(f64::INFINITY, |m| m.0);
        report.rotation.push(RotationResidual { alpha, residual });
    }
    report.h = report.group.h;
    match report.h {
        Some(h) => {
            let vectors = unitary_eigenvectors(channel, split, h, options.seed.wrapping_add(2))?;
            report.trace = Some(trace_check(split.state(), split, &vectors));
            let mut rng = ChaCha8Rng::seed_from_u64(options.seed.wrapping_add(3));
            let algebra = channel.algebra();
            let mut worst: f64 = 0.0;
            for u in &vectors {
                for _ in 0..options.samples.clamp(1, 8) {
                    let x = normalized(algebra.random_element(&mut rng));
                    let lhs = channel.apply(&(&u.element * &x))?;
                    let rhs = (&u.element * &channel.apply(&x)?).scale(u.eigenvalue);
                    worst = worst.max((&lhs - &rhs).norm());
                }
            }
            report.eigen_relation_residual = Some(worst);
            report.unitary_eigenvectors = vectors.iter().map(UnitaryEigenvectorReport::from).collect();
            report.complete = true;
        }
        None => warnings.push("peripheral order unresolved up to 64".into()),
    }
    report.warnings = warnings;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::BlockAlgebra;
    use crate::channel::{pauli, transpose_map};
    use crate::corpus;
    use crate::linalg::ONE;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn split_of(e: &corpus::CorpusEntry) -> JdlgSplit {
        jdlg_split(&e.channel, &StateFamily::single(e.state.clone()), &tol()).unwrap()
    }

    fn m2(m: CMatrix) -> AlgebraElement {
        BlockAlgebra::full_matrix(2).unwrap().element(vec![m]).unwrap()
    }

    #[test]
    fn group_detection() {
        let g = PeripheralGroup::new(&PeripheralGroup::roots_of_unity(5), 1e-6);
        assert_eq!(g.h, Some(5));
        assert!(g.closed);
        let irrational = PeripheralGroup::new(&[ONE, cis(1.0), cis(-1.0)], 1e-6);
        assert_eq!(irrational.h, None);
        assert!(!irrational.closed);
    }

    #[test]
    fn choi_effros_examples() {
        let e = corpus::dephasing(0.75).unwrap();
        let split = split_of(&e);
        let one = m2(CMatrix::identity(2, 2));
        let z = m2(pauli::z());
        let p = choi_effros_product(&split, &e.channel, &one, &one).unwrap();
        assert!((&p - &one).norm() < 1e-12);
        let zz = choi_effros_product(&split, &e.channel, &z, &z).unwrap();
        assert!((&zz - &one).norm() < 1e-12);
        let x = m2(pauli::x());
        assert!(matches!(choi_effros_product(&split, &e.channel, &x, &z), Err(Error::Validation(_))));

        let d = corpus::depolarize_to_mixed().unwrap();
        let split = split_of(&d);
        let a = one.scale(c64(2.0, 1.0));
        let b = one.scale(c64(-0.5, 0.0));
        let ab = choi_effros_product(&split, &d.channel, &a, &b).unwrap();
        assert!((&ab - &one.scale(c64(-1.0, -0.5))).norm() < 1e-12);
    }

    #[test]
    fn choi_effros_refuses_non_cp() {
        let t = transpose_map(2).unwrap();
        let family = StateFamily::single(NormalState::tracial(t.algebra()));
        let split = jdlg_split(&t, &family, &tol()).unwrap();
        let one = m2(CMatrix::identity(2, 2));
        assert!(matches!(choi_effros_product(&split, &t, &one, &one), Err(Error::UnsupportedMap(_))));
    }

    #[test]
    fn conditional_expectation_examples() {
        for e in [corpus::dephasing(0.75).unwrap(), corpus::identity(2).unwrap(), corpus::random_unital(3, 5).unwrap()] {
            let d = conditional_expectation_check(&split_of(&e), 32, 1);
            assert!(d.faithful && d.subalgebra, "{}", e.name);
            assert!(d.residual.unwrap() < 1e-8, "{}: {:?}", e.name, d.residual);
        }
    }

    fn assert_subspace(domain: &MultiplicativeDomain, expected: &[CMatrix]) {
        let alg = BlockAlgebra::full_matrix(2).unwrap();
        let mut cols = CMatrix::zeros(4, expected.len());
        for (k, m) in expected.iter().enumerate() {
            cols.set_column(k, &alg.element(vec![m.clone()]).unwrap().coords());
        }
        let q = crate::linalg::gram_schmidt(&cols, &CMatrix::identity(4, 4), 1e-12);
        assert!(subspace_gap(&domain.basis, &q) < 1e-8);
    }

    #[test]
    fn multiplicative_domain_examples() {
        let e = corpus::dephasing(0.75).unwrap();
        let d = multiplicative_domain(&e.channel, &e.state, &tol(), 0).unwrap();
        assert_eq!((d.dim, d.quadratic_dim), (2, 2));
        assert!(d.gap < 1e-8);
        assert_subspace(&d, &[CMatrix::identity(2, 2), pauli::z()]);
        assert!(d.member_defect < 1e-12 && d.nonmember_defect.unwrap() > 0.1);

        let u = corpus::unitary_conj(TAU / 5.0).unwrap();
        let d = multiplicative_domain(&u.channel, &u.state, &tol(), 0).unwrap();
        assert_eq!((d.dim, d.quadratic_dim), (4, 4));

        let dep = corpus::depolarize_to_mixed().unwrap();
        let d = multiplicative_domain(&dep.channel, &dep.state, &tol(), 0).unwrap();
        assert_eq!((d.dim, d.quadratic_dim), (1, 1));
        assert_subspace(&d, &[CMatrix::identity(2, 2)]);
    }

    #[test]
    fn multiplicative_domain_rejects_non_schwarz() {
        let t = transpose_map(2).unwrap();
        let r = multiplicative_domain(&t, &NormalState::tracial(t.algebra()), &tol(), 0);
        assert!(matches!(r, Err(Error::UnsupportedMap(_))));
    }

    #[test]
    fn flip_pinch_eigenvectors() {
        let e = corpus::flip_pinch().unwrap();
        let us = unitary_eigenvectors(&e.channel, &split_of(&e), 2, 0).unwrap();
        assert_eq!(us.len(), 2);
        let one = m2(CMatrix::identity(2, 2));
        assert!((&us[0].element - &one).norm() < 1e-12);
        assert!((us[1].eigenvalue + ONE).norm() < 1e-12);
        // ±Z after phase canonicalisation
        let z = m2(pauli::z());
        assert!((&us[1].element - &z).norm() < 1e-12 || (&us[1].element + &z).norm() < 1e-12);
        for u in &us {
            assert!(u.unitarity_residual < 1e-12 && u.eigen_residual < 1e-12);
        }
    }

    #[test]
    fn cycle_eigenvectors_are_characters() {
        let e = corpus::classical_cycle(3, &[], 0).unwrap();
        let split = split_of(&e);
        let us = unitary_eigenvectors(&e.channel, &split, 3, 0).unwrap();
        let w = cis(TAU / 3.0);
        for (k, u) in us.iter().enumerate() {
            let c = u.element.coords();
            for j in 0..3 {
                assert!((c[j].norm() - 1.0).abs() < 1e-12);
            }
            // consecutive entries differ by a fixed power of ω
            let ratio = c[1] / c[0];
            assert!((0..3).any(|m| (ratio - w.powu(m as u32)).norm() < 1e-12), "k = {k}");
            assert!(u.unitarity_residual < 1e-12);
        }
        let t = trace_check(&e.state, &split, &us);
        assert!(t.trace_residual < 1e-12 && t.orthogonality_residual < 1e-12);
    }

    #[test]
    fn primitive_channel_has_only_unit() {
        let e = corpus::clock_shift_mixture(3).unwrap();
        let us = unitary_eigenvectors(&e.channel, &split_of(&e), 1, 0).unwrap();
        assert_eq!(us.len(), 1);
        assert!(us[0].attempts > 1);
        assert!(us[0].unitarity_residual < 1e-10);
    }

    #[test]
    fn non_ergodic_eigenvectors_refused() {
        let e = corpus::dephasing(0.75).unwrap();
        assert!(matches!(
            unitary_eigenvectors(&e.channel, &split_of(&e), 1, 0),
            Err(Error::Refused { .. })
        ));
    }

    #[test]
    fn automorphism_examples() {
        for e in [corpus::unitary_conj(1.0).unwrap(), corpus::dephasing(0.75).unwrap(), corpus::flip_pinch().unwrap()] {
            let d = automorphism_check(&e.channel, &split_of(&e), true);
            assert!(d.residual < 1e-12, "{}: {}", e.name, d.residual);
            assert!(d.invertible && (d.restriction_condition - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn reports_on_ergodic_examples() {
        let w = cis(TAU / 3.0);
        for (e, h) in [
            (corpus::classical_cycle(3, &[], 0).unwrap(), 3),
            (corpus::flip_pinch().unwrap(), 2),
            (corpus::clock_shift_mixture(3).unwrap(), 1),
        ] {
            let r = perron_frobenius_report(&e.channel, &e.state, &tol(), &StructureOptions::default()).unwrap();
            assert!(r.ergodic && r.complete, "{}", e.name);
            assert_eq!(r.h, Some(h));
            assert!(r.group.closed);
            assert_eq!(r.simple, Some(true));
            assert!(r.rotation.iter().all(|x| x.residual < 1e-8), "{:?}", r.rotation);
            assert!(r.eigen_relation_residual.unwrap() < 1e-10);
            assert!(r.trace.as_ref().unwrap().trace_residual < 1e-12);
        }
        let r = perron_frobenius_report(
            &corpus::classical_cycle(3, &[], 0).unwrap().channel,
            &corpus::classical_cycle(3, &[], 0).unwrap().state,
            &tol(),
            &StructureOptions::default(),
        )
        .unwrap();
        assert!(bottleneck_matching(&r.group.eigenvalues, &[ONE, w, w * w]).unwrap().0 < 1e-12);
    }

    #[test]
    fn partial_report_for_non_ergodic() {
        let e = corpus::dephasing(0.75).unwrap();
        let r = perron_frobenius_report(&e.channel, &e.state, &tol(), &StructureOptions::default()).unwrap();
        assert!(!r.ergodic && !r.complete);
        assert_eq!(r.h, None);
        assert!(r.subalgebra);
        assert!(!r.warnings.is_empty());
    }

    #[test]
    fn axiom_refusals() {
        let t = transpose_map(2).unwrap();
        let err = perron_frobenius_report(&t, &NormalState::tracial(t.algebra()), &tol(), &StructureOptions::default());
        assert!(matches!(err, Err(Error::Refused { ref axiom, .. }) if axiom == "complete positivity"));
        let e = corpus::classical_cycle(3, &[], 0).unwrap();
        let skewed = NormalState::from_distribution(e.channel.algebra(), &[0.5, 0.3, 0.2]).unwrap();
        let err = perron_frobenius_report(&e.channel, &skewed, &tol(), &StructureOptions::default());
        assert!(matches!(err, Err(Error::Refused { ref axiom, .. }) if axiom == "invariance of φ"));
    }
}
