//! The asymptotically periodic part `S = T∘P` and the convergence of
//! `Tⁿ − Sⁿ`, Cesàro averages and the mean ergodic limit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::algebra::random_complex;
use crate::channel::ChannelMap;
use crate::decomposition::JdlgSplit;
use crate::error::Result;
use crate::linalg::{c64, geometric_sum, linear_fit, matrix_power, CMatrix, CVector, C64};

pub use crate::decomposition::stable_radius;

/// Distances below this are treated as zero by the tail fit.
pub const FIT_FLOOR: f64 = 1e-12;

/// Threshold for the nilpotent case `‖Tⁿ − Sⁿ‖ ≈ 0`.
pub const NILPOTENT_FLOOR: f64 = 1e-10;

/// `S = T·P` as a superoperator.
pub fn periodic_part(channel: &ChannelMap, split: &JdlgSplit) -> Result<ChannelMap> {
    let s = channel.superoperator() * split.projection();
    Ok(ChannelMap::from_superoperator(channel.algebra(), s)?.with_name(format!("{}∘P", channel.name())))
}

#[derive(Clone, Debug, Serialize)]
pub struct PeriodicDiagnostic {
    /// `‖ST − TS‖_φ`
    pub commutation: f64,
    /// `max(‖SP − S‖_φ, ‖PS − S‖_φ)`
    pub projection: f64,
    /// `‖S(x)‖_φ / ‖x‖_φ` maximised over the stable basis.
    pub stable_kernel: f64,
    /// `‖SʰP − P‖_φ` when the period is known.
    pub period: Option<f64>,
}

pub fn periodic_checks(channel: &ChannelMap, periodic: &ChannelMap, split: &JdlgSplit) -> PeriodicDiagnostic {
    let metric = split.metric();
    let t = channel.superoperator();
    let s = periodic.superoperator();
    let p = split.projection();
    let commutation = metric.operator_norm(&(s * t - t * s));
    let projection = metric
        .operator_norm(&(s * p - s))
        .max(metric.operator_norm(&(p * s - s)));
    let stable_kernel = split
        .stable_basis()
        .column_iter()
        .map(|c| {
            let c = c.into_owned();
            metric.norm(&(s * &c)) / metric.norm(&c)
        })
        .fold(0.0, f64::max);
    let period = split
        .group_order()
        .map(|h| metric.operator_norm(&(matrix_power(s, h) * p - p)));
    PeriodicDiagnostic {
        commutation,
        projection,
        stable_kernel,
        period,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeClass {
    Stable,
    Reversible,
}

/// A vector `x` together with the functional `ψ = ⟨·, y⟩_φ`.
#[derive(Clone, Debug)]
pub struct Probe {
    pub class: ProbeClass,
    pub x: CVector,
    pub y: CVector,
}

#[derive(Clone, Debug, Serialize)]
pub struct CesaroProbe {
    pub class: ProbeClass,
    /// Checkpoints `n = 2ᵏ`.
    pub n: Vec<usize>,
    /// `(1/n) Σ_{k<n} |⟨Tᵏx, ψ⟩|` at each checkpoint.
    pub averages: Vec<f64>,
    /// Log-log slope over the upper half of the checkpoints.
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    /// `‖Tⁿ − Sⁿ‖_φ` for `n = 0..=n_max`.
    pub distances: Vec<f64>,
    pub r_fit: Option<f64>,
    pub stable_radius: f64,
    /// Start of the window the fit and the constant refer to.
    pub transient: usize,
    /// `max_{n ≥ transient} ‖Tⁿ − Sⁿ‖ / rⁿ`; absent when `r = 0`.
    pub constant: Option<f64>,
    /// Largest increase `d_{n+1} − d_n` after the transient.
    pub monotonicity_violation: f64,
    pub probes: Vec<CesaroProbe>,
}

/// Stable probes (random φ-unit vectors of `𝔄_s` tested against
/// themselves) and reversible probes built from the cluster projections of
/// non-fixed peripheral eigenvalues.
pub fn default_probes(split: &JdlgSplit, count: usize, seed: u64) -> Vec<Probe> {
    let metric = split.metric();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random_in = |basis: &CMatrix| {
        let coeffs = CVector::from_fn(basis.ncols(), |_, _| random_complex(&mut rng));
        let v = basis * coeffs;
        let n = metric.norm(&v);
        v / c64(n, 0.0)
    };
    let mut probes = Vec::with_capacity(count);
    let rotating: Vec<&CMatrix> = split
        .cluster_projections()
        .iter()
        .filter(|(lambda, _)| (lambda - C64::new(1.0, 0.0)).norm() > 1e-6)
        .map(|(_, p)| p)
        .collect();
    let stable_count = if rotating.is_empty() { count } else { count.div_ceil(2) };
    if split.stable_dim() > 0 {
        for _ in 0..stable_count {
            let x = random_in(split.stable_basis());
            probes.push(Probe {
                class: ProbeClass::Stable,
                y: x.clone(),
                x,
            });
        }
    }
    if split.reversible_dim() > 0 {
        let mut k = 0;
        while probes.len() < count {
            let x = match rotating.get(k % rotating.len().max(1)) {
                Some(p) => {
                    let range = crate::linalg::gram_schmidt(p, metric.gram(), 1e-8);
                    random_in(&range)
                }
                None => random_in(split.reversible_basis()),
            };
            probes.push(Probe {
                class: ProbeClass::Reversible,
                y: x.clone(),
                x,
            });
            k += 1;
        }
    }
    probes
}

fn cesaro_probe(channel: &ChannelMap, split: &JdlgSplit, probe: &Probe, n_max: usize) -> CesaroProbe {
    let metric = split.metric();
    let t = channel.superoperator();
    let mut v = probe.x.clone();
    let mut sum = 0.0;
    let mut n = Vec::new();
    let mut averages = Vec::new();
    let mut next = 1usize;
    for k in 0..n_max {
        sum += metric.inner(&v, &probe.y).norm();
        v = t * v;
        if k + 1 == next {
            n.push(next);
            averages.push(sum / next as f64);
            next *= 2;
        }
    }
    let half = n.len() / 2;
    let (xs, ys): (Vec<f64>, Vec<f64>) = n[half..]
        .iter()
        .zip(&averages[half..])
        .filter(|(_, a)| **a > 0.0)
        .map(|(n, a)| ((*n as f64).ln(), a.ln()))
        .unzip();
    CesaroProbe {
        class: probe.class,
        slope: linear_fit(&xs, &ys).map(|f| f.0),
        n,
        averages,
    }
}

/// Computes `‖Tⁿ − Sⁿ‖_φ` for `n ≤ n_max`, fits the geometric rate on the
/// upper half of the values above [`FIT_FLOOR`], and runs the Cesàro probes.
pub fn convergence_report(
    channel: &ChannelMap,
    periodic: &ChannelMap,
    split: &JdlgSplit,
    n_max: usize,
    probes: &[Probe],
) -> ConvergenceReport {
    let metric = split.metric();
    let t = channel.superoperator();
    let s = periodic.superoperator();
    let dim = t.nrows();
    let mut tn = CMatrix::identity(dim, dim);
    let mut sn = CMatrix::identity(dim, dim);
    let mut distances = Vec::with_capacity(n_max + 1);
    for _ in 0..=n_max {
        distances.push(metric.operator_norm(&(&tn - &sn)));
        tn = t * tn;
        sn = s * sn;
    }
    let above: Vec<usize> = (1..=n_max).take_while(|&n| distances[n] > FIT_FLOOR).collect();
    let window = &above[above.len() / 2..];
    let r_fit = if window.len() >= 2 {
        let xs: Vec<f64> = window.iter().map(|&n| n as f64).collect();
        let ys: Vec<f64> = window.iter().map(|&n| distances[n].ln()).collect();
        linear_fit(&xs, &ys).map(|f| f.0.exp())
    } else {
        None
    };
    let r = split.stable_radius();
    let transient = match window.first() {
        Some(&n) => n,
        None => (0..=n_max)
            .find(|&n| distances[n..].iter().all(|&d| d <= NILPOTENT_FLOOR))
            .unwrap_or(n_max),
    };
    let constant = (r > 0.0).then(|| {
        (transient..=n_max)
            .map(|n| distances[n] / r.powi(n as i32))
            .filter(|c| c.is_finite())
            .fold(0.0, f64::max)
    });
    let monotonicity_violation = distances[transient..]
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(0.0, f64::max);
    let probes = probes.iter().map(|p| cesaro_probe(channel, split, p, n_max)).collect();
    ConvergenceReport {
        distances,
        r_fit,
        stable_radius: r,
        transient,
        constant,
        monotonicity_violation,
        probes,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanErgodicReport {
    /// Checkpoints `N = 2ᵏ`.
    pub n: Vec<usize>,
    /// `‖A_N − Q‖_φ` with `A_N = (1/N) Σ_{k<N} Tᵏ`.
    pub errors: Vec<f64>,
    /// `N · ‖A_N − Q‖_φ`
    pub scaled: Vec<f64>,
    /// `max(‖TQ − Q‖_φ, ‖QT − Q‖_φ)`
    pub fixed_residual: f64,
    /// Errors at or below this count as converged.
    pub floor: f64,
    pub pass: bool,
}

/// Ratio test for `‖A_N − Q‖ ≤ C/N` over `N = 2^lo, …, 2^hi`.
///
/// `N·e_N` may oscillate (periodic parts make `A_N − Q` depend on `N` mod
/// the period) but must stay bounded: the maximum over the later half of the
/// checkpoints may exceed the maximum over the earlier half by at most 50%.
/// Errors below `floor` count as converged.
pub fn mean_ergodic_report(channel: &ChannelMap, split: &JdlgSplit, lo: u32, hi: u32) -> MeanErgodicReport {
    const FLOOR: f64 = 1e-12;
    let metric = split.metric();
    let t = channel.superoperator();
    let q = split.fixed_projection();
    let fixed_residual = metric
        .operator_norm(&(t * &q - &q))
        .max(metric.operator_norm(&(&q * t - &q)));
    // doubling: Σ_{k<2m} Tᵏ = Σ_{k<m} Tᵏ + Tᵐ Σ_{k<m} Tᵏ
    let (mut acc, mut power) = geometric_sum(t, 1 << lo);
    let mut n = Vec::new();
    let mut errors = Vec::new();
    for k in lo..=hi {
        let count = 1usize << k;
        n.push(count);
        errors.push(metric.operator_norm(&(&acc / c64(count as f64, 0.0) - &q)));
        acc = &acc + &power * &acc;
        power = &power * &power;
    }
    let scaled: Vec<f64> = n.iter().zip(&errors).map(|(&k, e)| k as f64 * e).collect();
    let half = scaled.len() / 2;
    let early = scaled[..half].iter().fold(0.0, |a: f64, &b| a.max(b));
    let late = (half..scaled.len())
        .filter(|&i| errors[i] > FLOOR)
        .map(|i| scaled[i])
        .fold(0.0, f64::max);
    let pass = late <= 1.5 * early;
    MeanErgodicReport {
        n,
        errors,
        scaled,
        fixed_residual,
        floor: FLOOR,
        pass,
    }
}
