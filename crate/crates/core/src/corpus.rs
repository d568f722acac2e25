//! Deterministic test channels with known decompositions.

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{BlockAlgebra, NormalState};
use crate::channel::{pauli, ChannelMap, KrausOperator};
use crate::config::MAX_GROUP_ORDER;
use crate::error::{Error, Result};
use crate::linalg::{c64, cis, cyclic_order, random_unitary, spectral_order, CMatrix, C64, ONE, ZERO};

/// Ground truth attached to a corpus entry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    /// Peripheral eigenvalues with multiplicity, in spectral order.
    pub peripheral: Vec<C64>,
    /// Cyclic order of the peripheral spectrum, when finite.
    pub h: Option<usize>,
    pub reversible_dim: usize,
    pub ergodic: bool,
    /// Known only for entries with a closed form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stable_radius: Option<f64>,
}

impl Expected {
    fn new(mut peripheral: Vec<C64>, ergodic: bool, stable_radius: Option<f64>) -> Self {
        let order = spectral_order(&peripheral);
        peripheral = order.into_iter().map(|i| peripheral[i]).collect();
        Self {
            h: cyclic_order(&peripheral, 1e-8, MAX_GROUP_ORDER),
            reversible_dim: peripheral.len(),
            peripheral,
            ergodic,
            stable_radius,
        }
    }
}

/// Parameters of a named preset; unused fields are ignored.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PresetParams {
    pub h: Option<usize>,
    pub mixing: Vec<usize>,
    pub p: Option<f64>,
    pub theta: Option<f64>,
    pub n: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct CorpusEntry {
    pub name: String,
    pub preset: String,
    pub params: PresetParams,
    pub channel: ChannelMap,
    pub state: NormalState,
    pub expected: Expected,
    pub seed: u64,
}

pub const PRESETS: &[&str] = &[
    "classical_cycle",
    "identity",
    "dephasing",
    "depolarize_to_mixed",
    "flip_pinch",
    "unitary_conj",
    "clock_shift_mixture",
    "random_unital",
];

/// `h`-cycle on `ℂʰ` plus doubly stochastic mixing blocks of the given sizes.
///
/// A mixing block of size `m` is `a·I + (1-a)·J/m`; seed 0 uses `a = 0`
/// (pure averaging), other seeds draw `a ∈ [0.05, 0.6]`.
pub fn classical_cycle(h: usize, mixing: &[usize], seed: u64) -> Result<CorpusEntry> {
    if h == 0 || mixing.contains(&0) {
        return Err(Error::Validation("cycle length and block sizes must be positive".into()));
    }
    let n = h + mixing.iter().sum::<usize>();
    let algebra = BlockAlgebra::commutative(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kraus = Vec::new();
    let mut peripheral: Vec<C64> = (0..h).map(|k| cis(TAU * k as f64 / h as f64)).collect();
    for i in 0..h {
        kraus.push(KrausOperator::new(i, (i + 1) % h, CMatrix::from_element(1, 1, ONE)));
    }
    let mut radius: f64 = 0.0;
    let mut offset = h;
    for &m in mixing {
        let a = if seed == 0 || m == 1 { 0.0 } else { rng.random_range(0.05..=0.6) };
        for i in 0..m {
            for j in 0..m {
                let w = (1.0 - a) / m as f64 + if i == j { a } else { 0.0 };
                if w > 0.0 {
                    kraus.push(KrausOperator::new(offset + i, offset + j, CMatrix::from_element(1, 1, c64(w.sqrt(), 0.0))));
                }
            }
        }
        if m > 1 {
            radius = radius.max(a);
        }
        peripheral.push(ONE);
        offset += m;
    }
    let name = if mixing.is_empty() {
        format!("classical_cycle(h={h})")
    } else {
        format!("classical_cycle(h={h},mixing={mixing:?},seed={seed})")
    };
    let channel = ChannelMap::from_kraus(&algebra, kraus)?
        .with_name(name.clone())
        .with_provenance(format!("corpus:classical_cycle seed={seed}"));
    Ok(CorpusEntry {
        name,
        preset: "classical_cycle".into(),
        params: PresetParams {
            h: Some(h),
            mixing: mixing.to_vec(),
            seed: Some(seed),
            ..Default::default()
        },
        state: NormalState::tracial(&algebra),
        channel,
        expected: Expected::new(peripheral, mixing.is_empty(), Some(radius)),
        seed,
    })
}

fn entry(
    name: String,
    preset: &str,
    params: PresetParams,
    channel: ChannelMap,
    expected: Expected,
    seed: u64,
) -> CorpusEntry {
    let state = NormalState::tracial(channel.algebra());
    let channel = channel
        .with_name(name.clone())
        .with_provenance(format!("corpus:{preset} seed={seed}"));
    CorpusEntry {
        name,
        preset: preset.into(),
        params,
        channel,
        state,
        expected,
        seed,
    }
}

/// The identity map on `M_n`.
pub fn identity(n: usize) -> Result<CorpusEntry> {
    let algebra = BlockAlgebra::full_matrix(n)?;
    let params = PresetParams {
        n: Some(n),
        ..Default::default()
    };
    Ok(entry(
        format!("identity({n})"),
        "identity",
        params,
        ChannelMap::from_kraus_matrices(&algebra, vec![CMatrix::identity(n, n)])?,
        Expected::new(vec![ONE; n * n], n == 1, Some(0.0)),
        0,
    ))
}

/// `x ↦ p·x + (1-p)·ZxZ` on `M₂`.
pub fn dephasing(p: f64) -> Result<CorpusEntry> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Validation(format!("dephasing parameter {p} outside [0, 1]")));
    }
    let algebra = BlockAlgebra::full_matrix(2)?;
    let mut kraus = Vec::new();
    if p > 0.0 {
        kraus.push(CMatrix::identity(2, 2) * c64(p.sqrt(), 0.0));
    }
    if p < 1.0 {
        kraus.push(pauli::z() * c64((1.0 - p).sqrt(), 0.0));
    }
    let coherence = 2.0 * p - 1.0;
    let (peripheral, radius) = if coherence.abs() == 1.0 {
        (vec![ONE, ONE, c64(coherence, 0.0), c64(coherence, 0.0)], 0.0)
    } else {
        (vec![ONE, ONE], coherence.abs())
    };
    Ok(entry(
        format!("dephasing({p})"),
        "dephasing",
        PresetParams {
            p: Some(p),
            ..Default::default()
        },
        ChannelMap::from_kraus_matrices(&algebra, kraus)?,
        Expected::new(peripheral, false, Some(radius)),
        0,
    ))
}

/// `x ↦ tr(x)/2 · 𝟙` on `M₂`.
pub fn depolarize_to_mixed() -> Result<CorpusEntry> {
    let algebra = BlockAlgebra::full_matrix(2)?;
    let kraus = (0..4)
        .map(|k| {
            let mut m = CMatrix::zeros(2, 2);
            m[(k / 2, k % 2)] = c64(std::f64::consts::FRAC_1_SQRT_2, 0.0);
            m
        })
        .collect();
    Ok(entry(
        "depolarize_to_mixed".into(),
        "depolarize_to_mixed",
        PresetParams::default(),
        ChannelMap::from_kraus_matrices(&algebra, kraus)?,
        Expected::new(vec![ONE], true, Some(0.0)),
        0,
    ))
}

/// `x ↦ D(XxX)` with `D` the diagonal pinching on `M₂`.
pub fn flip_pinch() -> Result<CorpusEntry> {
    let algebra = BlockAlgebra::full_matrix(2)?;
    let e00 = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ZERO]);
    let e11 = CMatrix::from_row_slice(2, 2, &[ZERO, ZERO, ZERO, ONE]);
    Ok(entry(
        "flip_pinch".into(),
        "flip_pinch",
        PresetParams::default(),
        ChannelMap::from_kraus_matrices(&algebra, vec![&e00 * pauli::x(), &e11 * pauli::x()])?,
        Expected::new(vec![ONE, -ONE], true, Some(0.0)),
        0,
    ))
}

/// Conjugation by `diag(1, e^{iθ})` on `M₂`.
pub fn unitary_conj(theta: f64) -> Result<CorpusEntry> {
    if !theta.is_finite() {
        return Err(Error::Validation("rotation angle must be finite".into()));
    }
    let algebra = BlockAlgebra::full_matrix(2)?;
    let u = CMatrix::from_row_slice(2, 2, &[ONE, ZERO, ZERO, cis(theta)]);
    Ok(entry(
        format!("unitary_conj({theta})"),
        "unitary_conj",
        PresetParams {
            theta: Some(theta),
            ..Default::default()
        },
        ChannelMap::from_kraus_matrices(&algebra, vec![u])?,
        Expected::new(vec![ONE, ONE, cis(theta), cis(-theta)], false, Some(0.0)),
        0,
    ))
}

/// Clock `C = diag(ωᵏ)` and shift `S|k⟩ = |k+1⟩` on `ℂⁿ`.
pub fn clock_and_shift(n: usize) -> (CMatrix, CMatrix) {
    let clock = CMatrix::from_fn(n, n, |i, j| if i == j { cis(TAU * i as f64 / n as f64) } else { ZERO });
    let shift = CMatrix::from_fn(n, n, |i, j| if i == (j + 1) % n { ONE } else { ZERO });
    (clock, shift)
}

/// Equal mixture of conjugations by `C`, `S` and `CS` on `M_n`.
///
/// The Weyl operator `CᵃSᵇ` is an eigenvector with eigenvalue
/// `(ωᵇ + ωᵃ + ωᵃ⁺ᵇ)/3` up to conjugation, unimodular only for `a = b = 0`.
pub fn clock_shift_mixture(n: usize) -> Result<CorpusEntry> {
    if n < 2 {
        return Err(Error::Validation("clock-shift mixture needs n ≥ 2".into()));
    }
    let algebra = BlockAlgebra::full_matrix(n)?;
    let (clock, shift) = clock_and_shift(n);
    let weight = c64((1.0 / 3.0f64).sqrt(), 0.0);
    let kraus = vec![&clock * weight, &shift * weight, &clock * &shift * weight];
    let w = |k: usize| cis(TAU * k as f64 / n as f64);
    let mut radius: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            if a + b > 0 {
                radius = radius.max(((w(a) + w(b) + w(a + b)) / 3.0).norm());
            }
        }
    }
    Ok(entry(
        format!("clock_shift_mixture({n})"),
        "clock_shift_mixture",
        PresetParams {
            n: Some(n),
            ..Default::default()
        },
        ChannelMap::from_kraus_matrices(&algebra, kraus)?,
        Expected::new(vec![ONE], true, Some(radius)),
        0,
    ))
}

/// Random convex combination of three Haar unitary conjugations on `M_n`.
pub fn random_unital(n: usize, seed: u64) -> Result<CorpusEntry> {
    if n < 2 {
        return Err(Error::Validation("random unital channel needs n ≥ 2".into()));
    }
    let algebra = BlockAlgebra::full_matrix(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw: Vec<f64> = (0..3).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let kraus = raw
        .iter()
        .map(|w| random_unitary(n, &mut rng) * c64((w / total).sqrt(), 0.0))
        .collect();
    Ok(entry(
        format!("random_unital(n={n},seed={seed})"),
        "random_unital",
        PresetParams {
            n: Some(n),
            seed: Some(seed),
            ..Default::default()
        },
        ChannelMap::from_kraus_matrices(&algebra, kraus)?,
        Expected::new(vec![ONE], true, None),
        seed,
    ))
}

/// Builds a preset by name. Missing parameters take their defaults:
/// `h = 3`, `p = 0.75`, `θ = 2π/5`, `n = 2` (`3` for the clock-shift mixture),
/// `seed = 0`.
pub fn preset(name: &str, params: &PresetParams) -> Result<CorpusEntry> {
    let seed = params.seed.unwrap_or(0);
    match name {
        "classical_cycle" => classical_cycle(params.h.unwrap_or(3), &params.mixing, seed),
        "identity" => identity(params.n.unwrap_or(2)),
        "dephasing" => dephasing(params.p.unwrap_or(0.75)),
        "depolarize_to_mixed" => depolarize_to_mixed(),
        "flip_pinch" => flip_pinch(),
        "unitary_conj" => unitary_conj(params.theta.unwrap_or(TAU / 5.0)),
        "clock_shift_mixture" => clock_shift_mixture(params.n.unwrap_or(3)),
        "random_unital" => random_unital(params.n.unwrap_or(2), seed),
        other => Err(Error::UnknownPreset(other.into())),
    }
}

/// The fixed set of entries used by the acceptance suite.
pub fn standard_corpus() -> Vec<CorpusEntry> {
    let mut out = Vec::new();
    for h in 1..=7 {
        out.push(classical_cycle(h, &[], 0).expect("valid"));
    }
    out.push(classical_cycle(2, &[2], 0).expect("valid"));
    out.push(classical_cycle(3, &[2, 3], 7).expect("valid"));
    out.push(classical_cycle(4, &[3], 11).expect("valid"));
    out.push(identity(2).expect("valid"));
    out.push(dephasing(0.75).expect("valid"));
    out.push(dephasing(0.9).expect("valid"));
    out.push(depolarize_to_mixed().expect("valid"));
    out.push(flip_pinch().expect("valid"));
    out.push(unitary_conj(TAU / 5.0).expect("valid"));
    out.push(clock_shift_mixture(2).expect("valid"));
    out.push(clock_shift_mixture(3).expect("valid"));
    out.push(random_unital(2, 1).expect("valid"));
    out.push(random_unital(3, 2).expect("valid"));
    out
}
