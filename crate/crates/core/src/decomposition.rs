//! The splitting `𝔄 = 𝔄_r ⊕ 𝔄_s` into a reversible part, on which the
//! dynamics acts by φ-isometries, and a stable part, on which orbits decay.
//!
//! `P` is built from the peripheral eigenspaces of `T` written in a
//! φ-orthonormal basis, and checked against Cesàro-type averaging oracles
//! that never look at an eigenvector.

use serde::Serialize;

use crate::algebra::{AlgebraElement, NormalState, PhiMetric, StateFamily};
use crate::channel::{ChannelMap, SemigroupSpec};
use crate::config::{Tolerances, MAX_GROUP_ORDER, NEAR_PERIPHERAL_BAND};
use crate::error::{Error, Result};
use crate::gns::verify_hypothesis;
use crate::linalg::{
    c64, condition_estimate, cyclic_order, eigen_decomposition, geometric_sum, gram_schmidt, linear_fit, matrix_power,
    null_space, rank, spectral_norm, spectral_order, CMatrix, C64, ONE,
};

/// One group of numerically equal peripheral eigenvalues.
#[derive(Clone, Debug, Serialize)]
pub struct PeripheralCluster {
    /// Mean of the members.
    pub value: C64,
    pub algebraic: usize,
    pub geometric: usize,
    /// `rank (T-λ)² < rank (T-λ)`: a Jordan block sits at this eigenvalue.
    pub defective: bool,
}

#[derive(Clone, Debug)]
pub struct SpectralData {
    /// All eigenvalues with algebraic multiplicity, in spectral order.
    pub eigenvalues: Vec<C64>,
    pub eigenvectors: Vec<AlgebraElement>,
    /// `‖T v − λ v‖ / ‖v‖` per eigenpair.
    pub residuals: Vec<f64>,
    /// Indices into `eigenvalues` with `|λ| ≥ 1 − ε_per`.
    pub peripheral: Vec<usize>,
    pub clusters: Vec<PeripheralCluster>,
    pub stable_radius: f64,
    pub warnings: Vec<String>,
}

impl SpectralData {
    pub fn peripheral_values(&self) -> Vec<C64> {
        self.peripheral.iter().map(|&i| self.eigenvalues[i]).collect()
    }

    pub fn defects(&self) -> Vec<C64> {
        self.clusters.iter().filter(|c| c.defective).map(|c| c.value).collect()
    }

    /// Smallest `h` with every peripheral eigenvalue an `h`-th root of unity.
    pub fn group_order(&self) -> Option<usize> {
        cyclic_order(&self.peripheral_values(), 1e-8, MAX_GROUP_ORDER)
    }

    /// Dimension of `{x : Tx = x}`.
    pub fn fixed_dim(&self) -> usize {
        self.clusters
            .iter()
            .filter(|c| (c.value - ONE).norm() < 1e-6)
            .map(|c| c.geometric)
            .sum()
    }
}

/// Groups values closer than `tol` (to the first member of a group).
pub(crate) fn cluster_values(values: &[C64], tol: f64) -> Vec<(C64, usize)> {
    let mut groups: Vec<(C64, Vec<C64>)> = Vec::new();
    for &v in values {
        match groups.iter_mut().find(|(first, _)| (first - v).norm() <= tol) {
            Some((_, members)) => members.push(v),
            None => groups.push((v, vec![v])),
        }
    }
    let mut out: Vec<(C64, usize)> = groups
        .into_iter()
        .map(|(_, m)| (m.iter().sum::<C64>() / m.len() as f64, m.len()))
        .collect();
    let keys: Vec<C64> = out.iter().map(|c| c.0).collect();
    let order = spectral_order(&keys);
    out = order.into_iter().map(|i| out[i]).collect();
    out
}

fn shifted(m: &CMatrix, lambda: C64) -> CMatrix {
    let n = m.nrows();
    m - CMatrix::identity(n, n) * lambda
}

/// Full eigen-decomposition of the superoperator with peripheral tagging.
pub fn eigendecompose(channel: &ChannelMap, tol: &Tolerances) -> Result<SpectralData> {
    let t = channel.superoperator();
    let (values, vectors) = eigen_decomposition(t)?;
    let order = spectral_order(&values);
    let eigenvalues: Vec<C64> = order.iter().map(|&i| values[i]).collect();
    let mut eigenvectors = Vec::with_capacity(values.len());
    let mut residuals = Vec::with_capacity(values.len());
    for &i in &order {
        let v = &vectors[i];
        residuals.push((t * v - v * values[i]).norm() / v.norm().max(f64::MIN_POSITIVE));
        eigenvectors.push(channel.algebra().from_coords(v)?);
    }
    let threshold = 1.0 - tol.peripheral;
    let peripheral: Vec<usize> = (0..eigenvalues.len())
        .filter(|&i| eigenvalues[i].norm() >= threshold)
        .collect();
    let mut warnings = Vec::new();
    let near: Vec<C64> = eigenvalues
        .iter()
        .copied()
        .filter(|z| z.norm() < threshold && z.norm() > 1.0 - NEAR_PERIPHERAL_BAND)
        .collect();
    if !near.is_empty() {
        warnings.push(format!(
            "eigenvalues within {NEAR_PERIPHERAL_BAND:e} of the unit circle but below the peripheral threshold: {near:?}"
        ));
    }
    let worst = residuals.iter().copied().fold(0.0, f64::max);
    if worst > 1e-8 {
        warnings.push(format!("largest eigenpair residual {worst:.3e} exceeds 1e-8"));
    }
    let peripheral_values: Vec<C64> = peripheral.iter().map(|&i| eigenvalues[i]).collect();
    let clusters = cluster_values(&peripheral_values, tol.cluster)
        .into_iter()
        .map(|(value, algebraic)| {
            let a = shifted(t, value);
            let rank1 = rank(&a, tol.null_space);
            let rank2 = rank(&(&a * &a), tol.null_space);
            PeripheralCluster {
                value,
                algebraic,
                geometric: t.nrows() - rank1,
                defective: rank2 < rank1,
            }
        })
        .collect();
    let stable_radius = eigenvalues
        .iter()
        .map(|z| z.norm())
        .filter(|&m| m < threshold)
        .fold(0.0, f64::max);
    Ok(SpectralData {
        eigenvalues,
        eigenvectors,
        residuals,
        peripheral,
        clusters,
        stable_radius,
        warnings,
    })
}

/// Largest non-peripheral eigenvalue modulus; 0 when there is none.
pub fn stable_radius(data: &SpectralData) -> f64 {
    data.stable_radius
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMethod {
    Eigendecomposition,
    AveragingOracle,
}

/// The projection `P` onto `𝔄_r` along `𝔄_s`, with bases of both parts.
#[derive(Clone, Debug)]
pub struct JdlgSplit {
    metric: PhiMetric,
    state: NormalState,
    projection: CMatrix,
    reversible: CMatrix,
    stable: CMatrix,
    clusters: Vec<(C64, CMatrix)>,
    stable_radius: f64,
    group_order: Option<usize>,
    method: SplitMethod,
    symmetrization_shift: f64,
    restriction_condition: f64,
    warnings: Vec<String>,
}

impl JdlgSplit {
    /// `P` as a superoperator on coordinates.
    pub fn projection(&self) -> &CMatrix {
        &self.projection
    }

    /// φ-orthonormal basis of `𝔄_r` as coordinate columns.
    pub fn reversible_basis(&self) -> &CMatrix {
        &self.reversible
    }

    /// φ-orthonormal basis of `𝔄_s` as coordinate columns.
    pub fn stable_basis(&self) -> &CMatrix {
        &self.stable
    }

    pub fn reversible_elements(&self) -> Vec<AlgebraElement> {
        self.elements(&self.reversible)
    }

    pub fn stable_elements(&self) -> Vec<AlgebraElement> {
        self.elements(&self.stable)
    }

    fn elements(&self, m: &CMatrix) -> Vec<AlgebraElement> {
        m.column_iter()
            .map(|c| self.metric.algebra().from_coords(&c.into_owned()).expect("dimension matches"))
            .collect()
    }

    pub fn reversible_dim(&self) -> usize {
        self.reversible.ncols()
    }

    pub fn stable_dim(&self) -> usize {
        self.stable.ncols()
    }

    /// Spectral projections onto the individual peripheral eigenspaces.
    pub fn cluster_projections(&self) -> &[(C64, CMatrix)] {
        &self.clusters
    }

    /// Projection onto `{x : Tx = x}` (zero when 1 is not an eigenvalue).
    pub fn fixed_projection(&self) -> CMatrix {
        let n = self.projection.nrows();
        self.clusters
            .iter()
            .filter(|(v, _)| (v - ONE).norm() < 1e-6)
            .fold(CMatrix::zeros(n, n), |acc, (_, p)| acc + p)
    }

    pub fn stable_radius(&self) -> f64 {
        self.stable_radius
    }

    pub fn group_order(&self) -> Option<usize> {
        self.group_order
    }

    pub fn method(&self) -> SplitMethod {
        self.method
    }

    /// How far φ-symmetrisation moved `P`.
    pub fn symmetrization_shift(&self) -> f64 {
        self.symmetrization_shift
    }

    /// Condition number of `T|𝔄_r` in the φ-metric (1 for an isometry).
    pub fn restriction_condition(&self) -> f64 {
        self.restriction_condition
    }

    pub fn metric(&self) -> &PhiMetric {
        &self.metric
    }

    /// The faithful state whose metric defines the split.
    pub fn state(&self) -> &NormalState {
        &self.state
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn apply(&self, x: &AlgebraElement) -> Result<AlgebraElement> {
        self.metric.algebra().check(x)?;
        self.metric.algebra().from_coords(&(&self.projection * x.coords()))
    }

    /// `‖P² − P‖_φ`
    pub fn idempotency_residual(&self) -> f64 {
        self.metric
            .operator_norm(&(&self.projection * &self.projection - &self.projection))
    }

    /// `‖P − P^♯‖_φ` with `P^♯` the φ-adjoint.
    pub fn symmetry_residual(&self) -> f64 {
        self.metric
            .operator_norm(&(&self.projection - self.metric.adjoint(&self.projection)))
    }

    /// `‖PT − TP‖_φ`
    pub fn commutation_residual(&self, channel: &ChannelMap) -> f64 {
        let t = channel.superoperator();
        self.metric
            .operator_norm(&(&self.projection * t - t * &self.projection))
    }
}

fn check_preconditions(channel: &ChannelMap, family: &StateFamily, tol: &Tolerances) -> Result<(PhiMetric, NormalState)> {
    if family.states()[0].algebra() != channel.algebra() {
        return Err(Error::Shape("states and channel live on different algebras".into()));
    }
    let diag = verify_hypothesis(channel, family, tol);
    if !diag.pass {
        return Err(Error::HypothesisViolated(format!(
            "largest ‖T_φ‖ is {:.6}, support leak {:.3e}",
            diag.max_norm(),
            diag.states.iter().map(|s| s.support_leak).fold(0.0, f64::max)
        )));
    }
    if !family.is_jointly_faithful() {
        return Err(Error::NotFaithful(
            "the splitting needs a faithful state or a jointly faithful family".into(),
        ));
    }
    let state = family.average();
    Ok((PhiMetric::new(channel.algebra(), &state)?, state))
}

/// Computes `P` from the peripheral eigenspaces of `T`.
///
/// Works in a φ-orthonormal basis for the family average; there `T` is a
/// contraction, so each peripheral eigenspace reduces `T` and its spectral
/// projection is orthogonal.
pub fn jdlg_split(channel: &ChannelMap, family: &StateFamily, tol: &Tolerances) -> Result<JdlgSplit> {
    let (metric, state) = check_preconditions(channel, family, tol)?;
    let m = metric.to_orthonormal(channel.superoperator());
    let n = m.nrows();
    let (values, _) = eigen_decomposition(&m)?;
    let threshold = 1.0 - tol.peripheral;
    let peripheral: Vec<C64> = values.iter().copied().filter(|z| z.norm() >= threshold).collect();
    let stable_radius = values
        .iter()
        .map(|z| z.norm())
        .filter(|&r| r < threshold)
        .fold(0.0, f64::max);
    let mut warnings = Vec::new();
    let mut p = CMatrix::zeros(n, n);
    let mut clusters = Vec::new();
    let mut vectors: Vec<CMatrix> = Vec::new();
    let mut shift: f64 = 0.0;
    for (value, multiplicity) in cluster_values(&peripheral, tol.cluster) {
        let a = shifted(&m, value);
        let right = null_space(&a, tol.null_space);
        let left = null_space(&a.adjoint(), tol.null_space);
        if right.ncols() != multiplicity || left.ncols() != multiplicity {
            return Err(Error::Inconsistent(format!(
                "peripheral eigenvalue {value:.6} has algebraic multiplicity {multiplicity} but eigenspace dimension {}; \
                 a contraction cannot have a Jordan block on the unit circle",
                right.ncols()
            )));
        }
        let pairing = left.adjoint() * &right;
        let inverse = pairing
            .try_inverse()
            .ok_or_else(|| Error::Inconsistent(format!("left and right eigenspaces of {value:.6} are orthogonal")))?;
        let oblique = &right * inverse * left.adjoint();
        let symmetric = (&oblique + oblique.adjoint()) * c64(0.5, 0.0);
        shift = shift.max(spectral_norm(&(&symmetric - &oblique)));
        p += &symmetric;
        clusters.push((value, metric.from_orthonormal(&symmetric)));
        vectors.push(right);
    }
    if shift > 1e-6 {
        return Err(Error::Inconsistent(format!(
            "φ-symmetrisation moved the peripheral projection by {shift:.3e}"
        )));
    }
    let total: usize = vectors.iter().map(|v| v.ncols()).sum();
    let mut stacked = CMatrix::zeros(n, total);
    let mut at = 0;
    for v in &vectors {
        stacked.view_mut((0, at), (n, v.ncols())).copy_from(v);
        at += v.ncols();
    }
    let reversible = gram_schmidt(&stacked, &CMatrix::identity(n, n), 1e-8);
    if reversible.ncols() != total {
        return Err(Error::Inconsistent("peripheral eigenvectors are linearly dependent".into()));
    }
    let restriction = reversible.adjoint() * &m * &reversible;
    let restriction_condition = if total == 0 { 1.0 } else { condition_estimate(&restriction) };
    if (restriction_condition - 1.0).abs() > 1e-6 {
        warnings.push(format!(
            "T restricted to the reversible part has condition number {restriction_condition:.9}"
        ));
    }
    let group_order = cyclic_order(&peripheral, 1e-8, MAX_GROUP_ORDER);
    assemble(
        metric,
        state,
        p,
        reversible,
        clusters,
        stable_radius,
        group_order,
        SplitMethod::Eigendecomposition,
        shift,
        restriction_condition,
        warnings,
    )
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    metric: PhiMetric,
    state: NormalState,
    p_orth: CMatrix,
    reversible_orth: CMatrix,
    clusters: Vec<(C64, CMatrix)>,
    stable_radius: f64,
    group_order: Option<usize>,
    method: SplitMethod,
    symmetrization_shift: f64,
    restriction_condition: f64,
    warnings: Vec<String>,
) -> Result<JdlgSplit> {
    let n = p_orth.nrows();
    let stable_orth = if reversible_orth.ncols() == 0 {
        CMatrix::identity(n, n)
    } else {
        null_space(&reversible_orth.adjoint(), 1e-8)
    };
    if reversible_orth.ncols() + stable_orth.ncols() != n {
        return Err(Error::Inconsistent(format!(
            "dim 𝔄_r + dim 𝔄_s = {} + {} ≠ {n}",
            reversible_orth.ncols(),
            stable_orth.ncols()
        )));
    }
    Ok(JdlgSplit {
        projection: metric.from_orthonormal(&p_orth),
        reversible: metric.basis() * &reversible_orth,
        stable: metric.basis() * &stable_orth,
        metric,
        state,
        clusters,
        stable_radius,
        group_order,
        method,
        symmetrization_shift,
        restriction_condition,
        warnings,
    })
}

/// Splitting for a commuting family of generators: `P = P₁P₂⋯P_k`.
///
/// For commuting contractions the per-generator projections commute and the
/// product projects onto the joint reversible part.
pub fn jdlg_split_semigroup(spec: &SemigroupSpec, family: &StateFamily, tol: &Tolerances) -> Result<JdlgSplit> {
    let generators = spec.generators();
    if generators.len() == 1 {
        return jdlg_split(&generators[0], family, tol);
    }
    let splits: Vec<JdlgSplit> = generators
        .iter()
        .map(|g| jdlg_split(g, family, tol))
        .collect::<Result<_>>()?;
    let metric = splits[0].metric.clone();
    let state = splits[0].state.clone();
    let n = metric.algebra().dim();
    let p_orth = splits
        .iter()
        .fold(CMatrix::identity(n, n), |acc, s| acc * metric.to_orthonormal(&s.projection));
    let symmetric = (&p_orth + p_orth.adjoint()) * c64(0.5, 0.0);
    let shift = spectral_norm(&(&symmetric - &p_orth));
    if shift > 1e-6 {
        return Err(Error::Inconsistent(format!(
            "per-generator projections do not commute (product moved by {shift:.3e})"
        )));
    }
    let reversible = range_basis(&symmetric);
    let warnings = splits
        .iter()
        .zip(generators)
        .map(|(s, g)| format!("generator `{}`: cyclic order {:?}", g.name(), s.group_order))
        .collect();
    assemble(
        metric,
        state,
        symmetric,
        reversible,
        Vec::new(),
        splits.iter().map(|s| s.stable_radius).fold(0.0, f64::max),
        None,
        SplitMethod::Eigendecomposition,
        shift,
        1.0,
        warnings,
    )
}

/// Orthonormal basis of the range of a Hermitian near-projection.
fn range_basis(p: &CMatrix) -> CMatrix {
    let (values, vectors) = crate::linalg::hermitian_eigen(p);
    let keep: Vec<usize> = (0..values.len()).filter(|&i| values[i] > 0.5).collect();
    let mut out = CMatrix::zeros(p.nrows(), keep.len());
    for (k, &i) in keep.iter().rev().enumerate() {
        out.set_column(k, &vectors.column(i));
    }
    out
}

/// Splitting whose projection comes from an averaging oracle instead of
/// eigenvectors.
pub fn jdlg_split_from_oracle(
    channel: &ChannelMap,
    family: &StateFamily,
    tol: &Tolerances,
    schedule: OracleSchedule,
) -> Result<JdlgSplit> {
    let (metric, state) = check_preconditions(channel, family, tol)?;
    let order = eigendecompose(channel, tol)?;
    let characters = oracle_characters(&order);
    let p = peripheral_oracle(channel, &characters, schedule)?;
    let p_orth = metric.to_orthonormal(&p);
    let symmetric = (&p_orth + p_orth.adjoint()) * c64(0.5, 0.0);
    let shift = spectral_norm(&(&symmetric - &p_orth));
    let reversible = range_basis(&symmetric);
    assemble(
        metric,
        state,
        symmetric,
        reversible,
        Vec::new(),
        order.stable_radius,
        order.group_order(),
        SplitMethod::AveragingOracle,
        shift,
        1.0,
        Vec::new(),
    )
}

/// How many powers an averaging oracle sums.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum OracleSchedule {
    /// `(1/N) Σ_{n<N} λ̄ⁿTⁿ`
    Cesaro { iterations: usize },
    /// `(1/W) Σ_{n=m}^{m+W-1} λ̄ⁿTⁿ`; exact up to `O(rᵐ)` when `W` is a
    /// multiple of every peripheral period.
    Windowed { burn_in: usize, window: usize },
}

fn check_unimodular(lambda: C64) -> Result<()> {
    if (lambda.norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Validation(format!("averaging character {lambda} is not unimodular")));
    }
    Ok(())
}

/// Twisted Cesàro mean `(1/N) Σ_{n<N} λ̄ⁿTⁿ`.
pub fn averaging_projection_oracle(channel: &ChannelMap, lambda: C64, iterations: usize) -> Result<CMatrix> {
    windowed_projection_oracle(channel, lambda, 0, iterations)
}

/// `(1/W) Σ_{n=m}^{m+W-1} λ̄ⁿTⁿ`, from powers of `T` by binary splitting.
pub fn windowed_projection_oracle(channel: &ChannelMap, lambda: C64, burn_in: usize, window: usize) -> Result<CMatrix> {
    check_unimodular(lambda)?;
    if window == 0 {
        return Err(Error::Validation("averaging window must be positive".into()));
    }
    let twisted = channel.superoperator() * lambda.conj();
    let (sum, _) = geometric_sum(&twisted, window);
    Ok(matrix_power(&twisted, burn_in) * sum / c64(window as f64, 0.0))
}

/// Cesàro mean `(1/N) Σ_{n<N} Tⁿ`, converging to the projection onto `Fix(T)`.
pub fn mean_ergodic_projection(channel: &ChannelMap, iterations: usize) -> CMatrix {
    averaging_projection_oracle(channel, ONE, iterations.max(1)).expect("1 is unimodular")
}

/// Sum of oracle terms over the given characters.
pub fn peripheral_oracle(channel: &ChannelMap, characters: &[C64], schedule: OracleSchedule) -> Result<CMatrix> {
    let dim = channel.algebra().dim();
    let mut acc = CMatrix::zeros(dim, dim);
    for &lambda in characters {
        acc += match schedule {
            OracleSchedule::Cesaro { iterations } => averaging_projection_oracle(channel, lambda, iterations)?,
            OracleSchedule::Windowed { burn_in, window } => {
                windowed_projection_oracle(channel, lambda, burn_in, window)?
            }
        };
    }
    Ok(acc)
}

/// Characters for the oracle: all of `Γ_h` when the order is resolved
/// (absent characters average to zero), otherwise the distinct peripheral
/// eigenvalues projected onto the circle.
pub fn oracle_characters(data: &SpectralData) -> Vec<C64> {
    match data.group_order() {
        Some(h) => (0..h)
            .map(|k| C64::from_polar(1.0, std::f64::consts::TAU * k as f64 / h as f64))
            .collect(),
        None => data.clusters.iter().map(|c| c.value / c.value.norm()).collect(),
    }
}

/// Smallest `m = 2ᵏ ≤ max` with `‖T^{m+period} − T^m‖ ≤ tol`: past it the
/// orbit is periodic to working precision. Uses only powers of `T`.
pub fn periodic_burn_in(channel: &ChannelMap, period: usize, tol: f64, max: usize) -> Option<usize> {
    let t = channel.superoperator();
    let step = matrix_power(t, period);
    let mut m = 1usize;
    let mut power = t.clone();
    while m <= max {
        if (&step * &power - &power).norm() <= tol * power.norm().max(1.0) {
            return Some(m);
        }
        power = &power * &power;
        m *= 2;
    }
    None
}

#[derive(Clone, Debug, Serialize)]
pub struct IsometryDiagnostic {
    pub pass: bool,
    /// `φ(x*x)` per state.
    pub norm_sq: Vec<f64>,
    /// `φ((Tx)*(Tx))` per state.
    pub image_norm_sq: Vec<f64>,
    /// `max |‖Tⁿx‖²_φ − ‖x‖²_φ| / ‖x‖²_φ` over states and `1 ≤ n ≤ depth`.
    pub relative_defect: f64,
    /// Same quantity for `n = 1` only.
    pub first_step_defect: f64,
    /// `max ‖(Tⁿ†GTⁿ − G)x‖ / (‖G‖‖x‖)`: the polarised identity
    /// `⟨Tⁿx, Tⁿy⟩_φ = ⟨x, y⟩_φ` tested against every `y` at once.
    pub polarized_residual: f64,
}

/// Tests whether `x` is a φ-isometric vector for `T, T², …, T^depth`.
pub fn isometry_check(
    x: &AlgebraElement,
    channel: &ChannelMap,
    family: &StateFamily,
    tol: f64,
    depth: usize,
) -> Result<IsometryDiagnostic> {
    channel.algebra().check(x)?;
    let t = channel.superoperator();
    let coords = x.coords();
    let depth = depth.max(1);
    let mut norm_sq = Vec::new();
    let mut image_norm_sq = Vec::new();
    let mut relative_defect: f64 = 0.0;
    let mut first_step_defect: f64 = 0.0;
    let mut polarized: f64 = 0.0;
    for state in family.states() {
        let gram = state.gram();
        let base = crate::linalg::metric_inner(&coords, &coords, &gram).re.max(0.0);
        norm_sq.push(base);
        let gram_norm = spectral_norm(&gram);
        let x_norm = coords.norm();
        let mut power = CMatrix::identity(t.nrows(), t.ncols());
        for n in 1..=depth {
            power = t * power;
            let image = &power * &coords;
            let value = crate::linalg::metric_inner(&image, &image, &gram).re.max(0.0);
            if n == 1 {
                image_norm_sq.push(value);
            }
            let defect = if base > 0.0 {
                (value - base).abs() / base
            } else if value > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            relative_defect = relative_defect.max(defect);
            if n == 1 {
                first_step_defect = first_step_defect.max(defect);
            }
            if x_norm > 0.0 {
                let form = power.adjoint() * &gram * &power - &gram;
                polarized = polarized.max((form * &coords).norm() / (gram_norm * x_norm));
            }
        }
    }
    Ok(IsometryDiagnostic {
        pass: relative_defect <= tol && polarized <= tol,
        norm_sq,
        image_norm_sq,
        relative_defect,
        first_step_defect,
        polarized_residual: polarized,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelDiagnostic {
    /// `‖Px‖_φ`
    pub projection_norm: f64,
    /// `‖Tⁿx‖_φ` for `n = 0..=n_max`.
    pub orbit_norms: Vec<f64>,
    pub min_orbit_norm: f64,
    /// Geometric decay factor fitted to the orbit above the 1e-12 floor.
    pub decay_rate: Option<f64>,
    pub stable: bool,
}

/// Certifies `x ∈ 𝔄_s` by `Px = 0` together with `Tⁿx → 0`.
pub fn kernel_membership(
    x: &AlgebraElement,
    split: &JdlgSplit,
    channel: &ChannelMap,
    tol: f64,
    n_max: usize,
) -> Result<KernelDiagnostic> {
    channel.algebra().check(x)?;
    let metric = split.metric();
    let t = channel.superoperator();
    let mut v = x.coords();
    let norm = metric.norm(&v);
    let projection_norm = metric.norm(&(split.projection() * &v));
    let mut orbit_norms = vec![norm];
    for _ in 0..n_max {
        v = t * v;
        orbit_norms.push(metric.norm(&v));
    }
    let min_orbit_norm = orbit_norms.iter().copied().fold(f64::INFINITY, f64::min);
    let floor = 1e-12 * norm.max(f64::MIN_POSITIVE);
    let (xs, ys): (Vec<f64>, Vec<f64>) = orbit_norms
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > floor)
        .map(|(n, &r)| (n as f64, r.ln()))
        .unzip();
    let decay_rate = linear_fit(&xs, &ys).map(|(slope, _)| slope.exp());
    let stable = if norm == 0.0 {
        true
    } else {
        projection_norm <= tol * norm
            && (min_orbit_norm <= tol * norm || decay_rate.is_some_and(|q| q < 1.0 - 1e-6))
    };
    Ok(KernelDiagnostic {
        projection_norm,
        orbit_norms,
        min_orbit_norm,
        decay_rate,
        stable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::BlockAlgebra;
    use crate::channel::{pauli, KrausOperator};
    use crate::corpus;
    use crate::linalg::{bottleneck_matching, cis, ZERO};
    use std::f64::consts::TAU;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    fn family(e: &corpus::CorpusEntry) -> StateFamily {
        StateFamily::single(e.state.clone())
    }

    fn m2(m: CMatrix) -> AlgebraElement {
        BlockAlgebra::full_matrix(2).unwrap().element(vec![m]).unwrap()
    }

    /// 3-cycle ⊕ 2-point averaging on ℂ⁵.
    fn cycle_plus_average() -> ChannelMap {
        corpus::classical_cycle(3, &[2], 0).unwrap().channel
    }

    #[test]
    fn identity_spectrum() {
        let e = corpus::identity(2).unwrap();
        let s = eigendecompose(&e.channel, &tol()).unwrap();
        assert_eq!(s.peripheral.len(), 4);
        assert_eq!(s.stable_radius, 0.0);
        assert_eq!(stable_radius(&s), 0.0);
        assert!(s.defects().is_empty());
    }

    #[test]
    fn dephasing_spectrum() {
        let e = corpus::dephasing(0.75).unwrap();
        let s = eigendecompose(&e.channel, &tol()).unwrap();
        let expected = [ONE, ONE, c64(0.5, 0.0), c64(0.5, 0.0)];
        assert!(bottleneck_matching(&s.eigenvalues, &expected).unwrap().0 < 1e-12);
        assert_eq!(s.peripheral.len(), 2);
        assert!((s.stable_radius - 0.5).abs() < 1e-12);
        assert!(s.residuals.iter().all(|r| *r < 1e-8));
        assert_eq!(s.fixed_dim(), 2);
    }

    #[test]
    fn cycle_plus_averaging_spectrum() {
        let s = eigendecompose(&cycle_plus_average(), &tol()).unwrap();
        let w = cis(TAU / 3.0);
        let expected = [ONE, w, w * w, ONE, ZERO];
        assert!(bottleneck_matching(&s.eigenvalues, &expected).unwrap().0 < 1e-12);
        assert!(s.stable_radius < 1e-12);
        assert_eq!(s.group_order(), Some(3));
        for (v, l) in s.eigenvectors.iter().zip(&s.eigenvalues) {
            let tv = cycle_plus_average().apply(v).unwrap();
            assert!((&tv - &v.scale(*l)).norm() < 1e-8);
        }
    }

    #[test]
    fn jordan_block_is_flagged() {
        // x ↦ x + tr(x E_01) E_01-ish shear on ℂ²: superoperator [[1,1],[0,1]]
        let alg = BlockAlgebra::commutative(2).unwrap();
        let t = ChannelMap::from_superoperator(&alg, CMatrix::from_row_slice(2, 2, &[ONE, ONE, ZERO, ONE])).unwrap();
        let s = eigendecompose(&t, &tol()).unwrap();
        assert_eq!(s.defects().len(), 1);
        let err = jdlg_split(&t, &StateFamily::single(NormalState::tracial(&alg)), &tol());
        assert!(matches!(err, Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn near_threshold_warning() {
        let alg = BlockAlgebra::commutative(2).unwrap();
        let t = ChannelMap::from_superoperator(
            &alg,
            CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, c64(1.0 - 1e-7, 0.0)]),
        )
        .unwrap();
        let s = eigendecompose(&t, &tol()).unwrap();
        assert_eq!(s.peripheral.len(), 1);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn identity_split() {
        let e = corpus::identity(2).unwrap();
        let split = jdlg_split(&e.channel, &family(&e), &tol()).unwrap();
        assert!((split.projection() - CMatrix::identity(4, 4)).norm() < 1e-12);
        assert_eq!(split.stable_dim(), 0);
        assert_eq!(split.method(), SplitMethod::Eigendecomposition);
    }

    #[test]
    fn dephasing_split_is_pinching() {
        let e = corpus::dephasing(0.75).unwrap();
        let split = jdlg_split(&e.channel, &family(&e), &tol()).unwrap();
        let x = m2(pauli::x());
        let y = m2(pauli::y());
        let z = m2(pauli::z());
        assert!(split.apply(&x).unwrap().norm() < 1e-12);
        assert!(split.apply(&y).unwrap().norm() < 1e-12);
        assert!((&split.apply(&z).unwrap() - &z).norm() < 1e-12);
        let one = m2(CMatrix::identity(2, 2));
        assert!((&split.apply(&one).unwrap() - &one).norm() < 1e-12);
        assert_eq!((split.reversible_dim(), split.stable_dim()), (2, 2));
        assert!(split.idempotency_residual() < 1e-12);
        assert!(split.symmetry_residual() < 1e-12);
        assert!(split.commutation_residual(&e.channel) < 1e-12);
        assert!((split.restriction_condition() - 1.0).abs() < 1e-9);
        assert!((split.stable_radius() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn depolarizing_split() {
        let e = corpus::depolarize_to_mixed().unwrap();
        let split = jdlg_split(&e.channel, &family(&e), &tol()).unwrap();
        assert_eq!(split.reversible_dim(), 1);
        let r = &split.reversible_elements()[0];
        // multiple of 𝟙
        let b = r.block(0);
        assert!(b[(0, 1)].norm() < 1e-12 && (b[(0, 0)] - b[(1, 1)]).norm() < 1e-12);
        for s in split.stable_elements() {
            assert!(s.trace().norm() < 1e-12);
        }
    }

    #[test]
    fn non_faithful_family_is_rejected() {
        let e = corpus::dephasing(0.75).unwrap();
        let alg = BlockAlgebra::full_matrix(2).unwrap();
        let phi = NormalState::vector_state(&alg, 0, &crate::linalg::CVector::from_vec(vec![ONE, ZERO])).unwrap();
        let err = jdlg_split(&e.channel, &StateFamily::single(phi), &tol());
        assert!(matches!(err, Err(Error::NotFaithful(_))));
    }

    #[test]
    fn non_contraction_is_refused() {
        let alg = BlockAlgebra::full_matrix(2).unwrap();
        let t = ChannelMap::from_superoperator(&alg, CMatrix::identity(4, 4) * c64(2.0, 0.0)).unwrap();
        let err = jdlg_split(&t, &StateFamily::single(NormalState::tracial(&alg)), &tol());
        assert!(matches!(err, Err(Error::HypothesisViolated(_))));
    }

    #[test]
    fn oracle_examples() {
        let id = corpus::identity(2).unwrap().channel;
        for n in [1, 7, 100] {
            assert!((averaging_projection_oracle(&id, ONE, n).unwrap() - CMatrix::identity(4, 4)).norm() < 1e-12);
        }
        let dep = corpus::dephasing(0.75).unwrap().channel;
        let avg = averaging_projection_oracle(&dep, ONE, 10_000).unwrap();
        let pinch = jdlg_split(&dep, &StateFamily::single(NormalState::tracial(dep.algebra())), &tol())
            .unwrap()
            .projection()
            .clone();
        let err = (&avg - &pinch).norm();
        assert!(err < 1e-3 && err > 1e-5, "{err}");
        // full period of the 3-cycle cancels exactly
        let cycle = corpus::classical_cycle(3, &[], 0).unwrap().channel;
        let w = cis(TAU / 3.0);
        let q = averaging_projection_oracle(&cycle, w, 3 * 50).unwrap();
        assert!((&q * &q - &q).norm() < 1e-12);
        assert!((crate::linalg::rank(&q, 1e-9)) == 1);
        assert!((cycle.superoperator() * &q - &q * w).norm() < 1e-12);
    }

    #[test]
    fn oracle_rejects_non_unimodular() {
        let id = corpus::identity(2).unwrap().channel;
        assert!(averaging_projection_oracle(&id, c64(0.5, 0.0), 10).is_err());
    }

    #[test]
    fn mean_ergodic_examples() {
        let id = corpus::identity(2).unwrap().channel;
        assert!((mean_ergodic_projection(&id, 50) - CMatrix::identity(4, 4)).norm() < 1e-12);
        let cycle = corpus::classical_cycle(3, &[], 0).unwrap().channel;
        let q = mean_ergodic_projection(&cycle, 300);
        assert!((q - CMatrix::from_element(3, 3, c64(1.0 / 3.0, 0.0))).norm() < 1e-12);
        let dep = corpus::dephasing(0.75).unwrap().channel;
        let q = mean_ergodic_projection(&dep, 100_000);
        let alg = dep.algebra();
        let mut expected = CMatrix::zeros(4, 4);
        expected[(alg.coord_index(0, 0, 0), alg.coord_index(0, 0, 0))] = ONE;
        expected[(alg.coord_index(0, 1, 1), alg.coord_index(0, 1, 1))] = ONE;
        assert!((q - expected).norm() < 1e-4);
    }

    #[test]
    fn windowed_oracle_is_sharp() {
        let e = corpus::classical_cycle(3, &[2, 3], 7).unwrap();
        let split = jdlg_split(&e.channel, &family(&e), &tol()).unwrap();
        let data = eigendecompose(&e.channel, &tol()).unwrap();
        let h = data.group_order().unwrap();
        let burn_in = periodic_burn_in(&e.channel, h, 1e-14, 1 << 20).unwrap();
        let p = peripheral_oracle(&e.channel, &oracle_characters(&data), OracleSchedule::Windowed { burn_in, window: h })
            .unwrap();
        assert!(split.metric().operator_norm(&(p - split.projection())) < 1e-9);
    }

    #[test]
    fn oracle_split_matches() {
        let e = corpus::flip_pinch().unwrap();
        let a = jdlg_split(&e.channel, &family(&e), &tol()).unwrap();
        let b = jdlg_split_from_oracle(&e.channel, &family(&e), &tol(), OracleSchedule::Windowed { burn_in: 1, window: 2 })
            .unwrap();
        assert_eq!(b.method(), SplitMethod::AveragingOracle);
        assert!((a.projection() - b.projection()).norm() < 1e-12);
    }

    #[test]
    fn isometry_examples() {
        let e = corpus::dephasing(0.75).unwrap();
        let f = family(&e);
        let z = isometry_check(&m2(pauli::z()), &e.channel, &f, 1e-8, 1).unwrap();
        assert!(z.pass);
        let x = isometry_check(&m2(pauli::x()), &e.channel, &f, 1e-8, 1).unwrap();
        assert!(!x.pass);
        assert!((x.image_norm_sq[0] - 0.25).abs() < 1e-12 && (x.norm_sq[0] - 1.0).abs() < 1e-12);
        let zero = isometry_check(&m2(CMatrix::zeros(2, 2)), &e.channel, &f, 1e-8, 4).unwrap();
        assert!(zero.pass);
    }

    #[test]
    fn kernel_examples() {
        let e = corpus::dephasing(0.75).unwrap();
        let split = jdlg_split(&e.channel, &family(&e), &tol()).unwrap();
        let x = kernel_membership(&m2(pauli::x()), &split, &e.channel, 1e-8, 64).unwrap();
        assert!(x.stable);
        assert!((x.decay_rate.unwrap() - 0.5).abs() < 1e-9);
        assert!((x.orbit_norms[3] - 0.125).abs() < 1e-12);
        let z = kernel_membership(&m2(pauli::z()), &split, &e.channel, 1e-8, 64).unwrap();
        assert!(!z.stable && (z.projection_norm - 1.0).abs() < 1e-12);
        let zero = kernel_membership(&m2(CMatrix::zeros(2, 2)), &split, &e.channel, 1e-8, 8).unwrap();
        assert!(zero.stable);
    }

    #[test]
    fn commuting_family_split() {
        // dephasing and Z-conjugation commute; joint reversible part is the diagonal
        let alg = BlockAlgebra::full_matrix(2).unwrap();
        let dep = corpus::dephasing(0.75).unwrap().channel;
        let zconj = ChannelMap::from_kraus(&alg, vec![KrausOperator::single(pauli::z())]).unwrap();
        let spec = SemigroupSpec::new(vec![dep, zconj]).unwrap();
        let split = jdlg_split_semigroup(&spec, &StateFamily::single(NormalState::tracial(&alg)), &tol()).unwrap();
        assert_eq!(split.reversible_dim(), 2);
        assert!(split.idempotency_residual() < 1e-12);
    }

    #[test]
    fn corpus_projection_laws() {
        for e in corpus::standard_corpus() {
            let split = jdlg_split(&e.channel, &family(&e), &tol()).unwrap();
            assert!(split.idempotency_residual() < 1e-9, "{}", e.name);
            assert!(split.symmetry_residual() < 1e-9, "{}", e.name);
            assert!(split.commutation_residual(&e.channel) < 1e-9, "{}", e.name);
            assert_eq!(split.reversible_dim(), e.expected.reversible_dim, "{}", e.name);
            assert_eq!(split.reversible_dim() + split.stable_dim(), e.channel.algebra().dim());
        }
    }
}
