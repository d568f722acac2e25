//! Command-line front end: channel spec files in, JSON reports out.
//!
//! Exit codes: 0 success, 1 analysis failure, 2 hypothesis failure, 3 schema
//! or usage error, 4 unknown preset, 5 verification mismatch.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::algebra::{BlockAlgebra, NormalState, StateFamily};
use crate::asymptotics::{
    convergence_report, default_probes, mean_ergodic_report, periodic_checks, periodic_part, ConvergenceReport,
    MeanErgodicReport, PeriodicDiagnostic,
};
use crate::channel::{ChannelMap, KrausOperator};
use crate::config::Tolerances;
use crate::corpus::{self, CorpusEntry, Expected, PresetParams};
use crate::decomposition::{
    eigendecompose, jdlg_split, oracle_characters, peripheral_oracle, periodic_burn_in, JdlgSplit, OracleSchedule,
    PeripheralCluster, SpectralData,
};
use crate::error::Error;
use crate::gns::{compare_peripheral_spectra, verify_hypothesis, HypothesisDiagnostic, SpectraComparison};
use crate::linalg::{bottleneck_matching, CMatrix, C64};
use crate::structure::{multiplicative_domain, perron_frobenius_report, MultiplicativeDomain, StructureOptions, StructureReport};

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_SCHEMA: i32 = 3;
pub const EXIT_UNKNOWN_PRESET: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

/// Tolerance for comparing analysis results with an `expected` block.
pub const VERIFY_TOL: f64 = 1e-8;

/// Window of the period-multiple oracle is capped at this many powers.
const WINDOW_BURN_IN_MAX: usize = 1 << 20;

/// Complex matrix as rows of `[re, im]` pairs.
pub type MatrixRows = Vec<Vec<C64>>;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn schema(message: impl Into<String>) -> Self {
        Self::new(EXIT_SCHEMA, message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Shape(_) | Error::Validation(_) | Error::UnsupportedRepresentation(_) => EXIT_SCHEMA,
            Error::HypothesisViolated(_) | Error::NotFaithful(_) => EXIT_HYPOTHESIS,
            Error::UnknownPreset(_) => EXIT_UNKNOWN_PRESET,
            _ => EXIT_FAILURE,
        };
        Self::new(code, e.to_string())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

pub fn matrix_from_rows(rows: &MatrixRows) -> Result<CMatrix, CliError> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::schema("ragged matrix rows"));
    }
    if rows.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CliError::schema("matrix entries must be finite"));
    }
    Ok(CMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &CMatrix) -> MatrixRows {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgebraSpec {
    pub block_dims: Vec<usize>,
}

/// A bare matrix on a single-block algebra, or a block-addressed operator.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KrausSpec {
    Plain(MatrixRows),
    Block {
        out_block: usize,
        in_block: usize,
        matrix: MatrixRows,
    },
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<KrausSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub choi: Option<MatrixRows>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub superoperator: Option<MatrixRows>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSpec {
    pub blocks: Vec<MatrixRows>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Provenance {
    pub preset: String,
    pub params: PresetParams,
    pub seed: u64,
}

/// Input document, `"schema": 1`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpecFile {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub algebra: AlgebraSpec,
    pub map: MapSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<StateSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Expected>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl ChannelSpecFile {
    pub fn parse(bytes: &[u8]) -> Result<Self, CliError> {
        let spec: Self = serde_json::from_slice(bytes).map_err(|e| CliError::schema(format!("invalid spec: {e}")))?;
        if spec.schema != SCHEMA_VERSION {
            return Err(CliError::schema(format!(
                "unsupported schema {} (expected {SCHEMA_VERSION})",
                spec.schema
            )));
        }
        let given = [spec.map.kraus.is_some(), spec.map.choi.is_some(), spec.map.superoperator.is_some()];
        if given.iter().filter(|&&g| g).count() != 1 {
            return Err(CliError::schema("map needs exactly one of kraus, choi, superoperator"));
        }
        Ok(spec)
    }

    pub fn from_entry(entry: &CorpusEntry) -> Self {
        let channel = &entry.channel;
        let single = channel.algebra().num_blocks() == 1;
        let map = match channel.kraus() {
            Some(ops) => MapSpec {
                kraus: Some(
                    ops.iter()
                        .map(|k| {
                            if single {
                                KrausSpec::Plain(matrix_to_rows(&k.matrix))
                            } else {
                                KrausSpec::Block {
                                    out_block: k.out_block,
                                    in_block: k.in_block,
                                    matrix: matrix_to_rows(&k.matrix),
                                }
                            }
                        })
                        .collect(),
                ),
                ..MapSpec::default()
            },
            None => MapSpec {
                superoperator: Some(matrix_to_rows(channel.superoperator())),
                ..MapSpec::default()
            },
        };
        Self {
            schema: SCHEMA_VERSION,
            name: Some(entry.name.clone()),
            algebra: AlgebraSpec {
                block_dims: channel.algebra().block_dims().to_vec(),
            },
            map,
            states: Some(vec![StateSpec {
                blocks: entry.state.densities().iter().map(matrix_to_rows).collect(),
            }]),
            tolerances: None,
            expected: Some(entry.expected.clone()),
            provenance: Some(Provenance {
                preset: entry.preset.clone(),
                params: entry.params.clone(),
                seed: entry.seed,
            }),
        }
    }

    pub fn algebra(&self) -> Result<BlockAlgebra, CliError> {
        BlockAlgebra::new(self.algebra.block_dims.clone()).map_err(|e| CliError::schema(e.to_string()))
    }

    pub fn channel(&self) -> Result<ChannelMap, CliError> {
        let algebra = self.algebra()?;
        let schema = |e: Error| CliError::schema(e.to_string());
        let channel = if let Some(kraus) = &self.map.kraus {
            let mut ops = Vec::with_capacity(kraus.len());
            for k in kraus {
                ops.push(match k {
                    KrausSpec::Plain(m) => {
                        if algebra.num_blocks() != 1 {
                            return Err(CliError::schema(
                                "bare Kraus matrices need a single block; give out_block/in_block",
                            ));
                        }
                        KrausOperator::single(matrix_from_rows(m)?)
                    }
                    KrausSpec::Block {
                        out_block,
                        in_block,
                        matrix,
                    } => KrausOperator::new(*out_block, *in_block, matrix_from_rows(matrix)?),
                });
            }
            ChannelMap::from_kraus(&algebra, ops).map_err(schema)?
        } else if let Some(choi) = &self.map.choi {
            ChannelMap::from_choi(&algebra, matrix_from_rows(choi)?).map_err(schema)?
        } else {
            let m = self.map.superoperator.as_ref().expect("validated in parse");
            ChannelMap::from_superoperator(&algebra, matrix_from_rows(m)?).map_err(schema)?
        };
        Ok(channel.with_name(self.name.clone().unwrap_or_default()))
    }

    pub fn states(&self) -> Result<Option<Vec<NormalState>>, CliError> {
        let Some(states) = &self.states else {
            return Ok(None);
        };
        let algebra = self.algebra()?;
        let mut out = Vec::with_capacity(states.len());
        for s in states {
            let blocks = s.blocks.iter().map(matrix_from_rows).collect::<Result<Vec<_>, _>>()?;
            out.push(NormalState::new(&algebra, blocks).map_err(|e| CliError::schema(e.to_string()))?);
        }
        if out.is_empty() {
            return Err(CliError::schema("states must not be empty"));
        }
        Ok(Some(out))
    }

    pub fn tolerances(&self, peripheral: Option<f64>) -> Tolerances {
        let mut tol = self.tolerances.unwrap_or_default();
        if let Some(p) = peripheral {
            tol.peripheral = p;
        }
        tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Text,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AnalyzeOptions {
    pub tol_peripheral: Option<f64>,
    pub n_max: usize,
    pub oracle_iters: usize,
    pub probes: usize,
    pub seed: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            tol_peripheral: None,
            n_max: 256,
            oracle_iters: 10_000,
            probes: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Settings {
    pub tolerances: Tolerances,
    pub n_max: usize,
    pub oracle_iters: usize,
    pub probes: usize,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSource {
    Provided,
    Invariant,
    /// No invariant state could be found; the normalised trace was used.
    TracialFallback,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectralSection {
    pub eigenvalues: Vec<C64>,
    pub residuals: Vec<f64>,
    pub peripheral: Vec<C64>,
    pub clusters: Vec<PeripheralCluster>,
    pub stable_radius: f64,
    pub detected_order: Option<usize>,
    pub fixed_dim: usize,
}

impl From<&SpectralData> for SpectralSection {
    fn from(d: &SpectralData) -> Self {
        Self {
            eigenvalues: d.eigenvalues.clone(),
            residuals: d.residuals.clone(),
            peripheral: d.peripheral_values(),
            clusters: d.clusters.clone(),
            stable_radius: d.stable_radius,
            detected_order: d.group_order(),
            fixed_dim: d.fixed_dim(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ProjectionSection {
    pub idempotency: f64,
    pub symmetry: f64,
    pub commutation: f64,
    pub symmetrization_shift: f64,
    /// Condition number of `T` restricted to `𝔄_r`; absent when singular.
    pub restriction_condition: Option<f64>,
    /// `‖[R S]† G [R S] − I‖` for the concatenated bases.
    pub basis_orthonormality: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct WindowedOracle {
    pub burn_in: usize,
    pub window: usize,
    pub distance: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSection {
    pub iterations: usize,
    /// `‖P_eig − P_avg‖_φ`
    pub cesaro_distance: f64,
    pub windowed: Option<WindowedOracle>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Refusal {
    pub kind: String,
    pub detail: String,
}

impl From<Error> for Refusal {
    fn from(e: Error) -> Self {
        match e {
            Error::Refused { axiom, detail } => Self { kind: axiom, detail },
            other => Self {
                kind: "error".into(),
                detail: other.to_string(),
            },
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Analysis {
    pub spectral: SpectralSection,
    /// Cyclic order of the peripheral group, reported for ergodic maps.
    pub h: Option<usize>,
    pub ergodic: bool,
    pub reversible_dim: usize,
    pub stable_dim: usize,
    pub reversible_basis: Vec<Vec<C64>>,
    pub stable_basis: Vec<Vec<C64>>,
    pub projection: ProjectionSection,
    pub oracle: OracleSection,
    pub spectra: Option<SpectraComparison>,
    pub structure: Option<StructureReport>,
    pub structure_refusal: Option<Refusal>,
    pub multiplicative_domain: Option<MultiplicativeDomain>,
    pub multiplicative_domain_refusal: Option<Refusal>,
    pub periodic: PeriodicDiagnostic,
    pub convergence: ConvergenceReport,
    pub mean_ergodic: MeanErgodicReport,
}

/// Output document, `"schema": 1`.
#[derive(Clone, Debug, Serialize)]
pub struct ReportFile {
    pub schema: u32,
    pub tool: ToolInfo,
    /// `sha256:` of the raw input bytes.
    pub input_digest: String,
    pub name: Option<String>,
    pub settings: Settings,
    pub state_source: StateSource,
    pub hypothesis: HypothesisDiagnostic,
    pub analysis: Option<Analysis>,
    pub warnings: Vec<String>,
}

impl ReportFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialises");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "jdlg {} report for {}", self.tool.version, self.name.as_deref().unwrap_or("<unnamed>"));
        let _ = writeln!(s, "input      {}", self.input_digest);
        let _ = writeln!(s, "state      {:?}", self.state_source);
        let _ = writeln!(
            s,
            "hypothesis {} (max ‖T_φ‖ = {:.12})",
            if self.hypothesis.pass { "PASS" } else { "FAIL" },
            self.hypothesis.max_norm()
        );
        if let Some(a) = &self.analysis {
            let _ = writeln!(s, "peripheral {}", format_values(&a.spectral.peripheral));
            let _ = writeln!(s, "h          {}", a.h.map_or("-".into(), |h| h.to_string()));
            let _ = writeln!(s, "ergodic    {}", a.ergodic);
            let _ = writeln!(s, "dim A_r    {}  dim A_s {}", a.reversible_dim, a.stable_dim);
            let _ = writeln!(s, "radius     {:.6e}", a.spectral.stable_radius);
            let _ = writeln!(
                s,
                "P residual idem {:.2e}  sym {:.2e}  comm {:.2e}",
                a.projection.idempotency, a.projection.symmetry, a.projection.commutation
            );
            let _ = writeln!(s, "oracle     {:.2e} ({} iterations)", a.oracle.cesaro_distance, a.oracle.iterations);
            if let Some(r) = a.convergence.r_fit {
                let _ = writeln!(s, "r_fit      {r:.6}");
            }
            if let Some(r) = &a.structure_refusal {
                let _ = writeln!(s, "structure  refused: {} ({})", r.kind, r.detail);
            }
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning    {w}");
        }
        s
    }
}

fn format_values(values: &[C64]) -> String {
    let parts: Vec<String> = values.iter().map(|z| format!("{:.6}{:+.6}i", z.re, z.im)).collect();
    format!("[{}]", parts.join(", "))
}

pub fn digest(bytes: &[u8]) -> String {
    format!("sha256:{}", hex::encode(Sha256::digest(bytes)))
}

fn coordinate_columns(m: &CMatrix) -> Vec<Vec<C64>> {
    m.column_iter().map(|c| c.iter().copied().collect()).collect()
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// The state family: given states, else the invariant state, else the trace.
fn resolve_family(
    spec: &ChannelSpecFile,
    channel: &ChannelMap,
    tol: &Tolerances,
    warnings: &mut Vec<String>,
) -> Result<(StateFamily, StateSource), CliError> {
    if let Some(states) = spec.states()? {
        return Ok((StateFamily::new(states)?, StateSource::Provided));
    }
    match channel.find_invariant_state(tol.null_space) {
        Ok(inv) => {
            if inv.fixed_space_dim > 1 {
                warnings.push(format!(
                    "invariant states form a {}-dimensional space; using the one of maximal support",
                    inv.fixed_space_dim
                ));
            }
            Ok((StateFamily::single(inv.state), StateSource::Invariant))
        }
        Err(e) => {
            warnings.push(format!("{e}; falling back to the normalised trace"));
            Ok((
                StateFamily::single(NormalState::tracial(channel.algebra())),
                StateSource::TracialFallback,
            ))
        }
    }
}

struct Prepared {
    channel: ChannelMap,
    family: StateFamily,
    source: StateSource,
    tol: Tolerances,
    hypothesis: HypothesisDiagnostic,
    warnings: Vec<String>,
}

fn prepare(spec: &ChannelSpecFile, tol_peripheral: Option<f64>) -> Result<Prepared, CliError> {
    let channel = spec.channel()?;
    let tol = spec.tolerances(tol_peripheral);
    let mut warnings = Vec::new();
    let (family, source) = resolve_family(spec, &channel, &tol, &mut warnings)?;
    let mut hypothesis = verify_hypothesis(&channel, &family, &tol);
    if hypothesis.pass && !family.is_jointly_faithful() {
        hypothesis.pass = false;
        hypothesis
            .warnings
            .push("the state family is not jointly faithful".into());
    }
    Ok(Prepared {
        channel,
        family,
        source,
        tol,
        hypothesis,
        warnings,
    })
}

fn analysis(p: &Prepared, opts: &AnalyzeOptions) -> Result<Analysis, CliError> {
    let channel = &p.channel;
    let tol = &p.tol;
    let spectral = eigendecompose(channel, tol)?;
    let split = jdlg_split(channel, &p.family, tol)?;
    let state = split.state().clone();
    let metric = split.metric();

    let characters = oracle_characters(&spectral);
    let cesaro = peripheral_oracle(
        channel,
        &characters,
        OracleSchedule::Cesaro {
            iterations: opts.oracle_iters.max(1),
        },
    )?;
    let windowed = match spectral.group_order() {
        Some(h) => match periodic_burn_in(channel, h, 1e-14, WINDOW_BURN_IN_MAX) {
            Some(burn_in) => {
                let p_win = peripheral_oracle(channel, &characters, OracleSchedule::Windowed { burn_in, window: h })?;
                Some(WindowedOracle {
                    burn_in,
                    window: h,
                    distance: metric.operator_norm(&(p_win - split.projection())),
                })
            }
            None => None,
        },
        None => None,
    };
    let oracle = OracleSection {
        iterations: opts.oracle_iters,
        cesaro_distance: metric.operator_norm(&(cesaro - split.projection())),
        windowed,
    };

    let spectra = compare_peripheral_spectra(channel, &state, tol, 1e-9).ok();
    let structure_options = StructureOptions {
        seed: opts.seed,
        ..StructureOptions::default()
    };
    let (structure, structure_refusal) = match perron_frobenius_report(channel, &state, tol, &structure_options) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(Refusal::from(e))),
    };
    let (multiplicative_domain, multiplicative_domain_refusal) =
        match multiplicative_domain(channel, &state, tol, opts.seed) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(Refusal::from(e))),
        };

    let periodic = periodic_part(channel, &split)?;
    let probes = default_probes(&split, opts.probes, opts.seed);
    let convergence = convergence_report(channel, &periodic, &split, opts.n_max, &probes);
    let mean_ergodic = mean_ergodic_report(channel, &split, 4, 12);

    let ergodic = spectral.fixed_dim() == 1;
    Ok(Analysis {
        h: if ergodic { spectral.group_order() } else { None },
        ergodic,
        reversible_dim: split.reversible_dim(),
        stable_dim: split.stable_dim(),
        reversible_basis: coordinate_columns(split.reversible_basis()),
        stable_basis: coordinate_columns(split.stable_basis()),
        projection: projection_section(channel, &split),
        oracle,
        spectra,
        structure,
        structure_refusal,
        multiplicative_domain,
        multiplicative_domain_refusal,
        periodic: periodic_checks(channel, &periodic, &split),
        convergence,
        mean_ergodic,
        spectral: SpectralSection::from(&spectral),
    })
}

fn projection_section(channel: &ChannelMap, split: &JdlgSplit) -> ProjectionSection {
    let n = channel.algebra().dim();
    let mut stacked = CMatrix::zeros(n, split.reversible_dim() + split.stable_dim());
    stacked.columns_mut(0, split.reversible_dim()).copy_from(split.reversible_basis());
    stacked
        .columns_mut(split.reversible_dim(), split.stable_dim())
        .copy_from(split.stable_basis());
    let gram = stacked.adjoint() * split.metric().gram() * &stacked;
    let k = gram.nrows();
    ProjectionSection {
        idempotency: split.idempotency_residual(),
        symmetry: split.symmetry_residual(),
        commutation: split.commutation_residual(channel),
        symmetrization_shift: split.symmetrization_shift(),
        restriction_condition: finite(split.restriction_condition()),
        basis_orthonormality: (gram - CMatrix::identity(k, k)).norm(),
    }
}

/// Runs the full pipeline. The returned code is 0 or, when the hypothesis
/// fails, 2 (the report then carries the diagnostic only).
pub fn analyze_bytes(bytes: &[u8], opts: &AnalyzeOptions) -> Result<(ReportFile, i32), CliError> {
    let spec = ChannelSpecFile::parse(bytes)?;
    let prepared = prepare(&spec, opts.tol_peripheral)?;
    let code = if prepared.hypothesis.pass { EXIT_OK } else { EXIT_HYPOTHESIS };
    let analysis = if prepared.hypothesis.pass {
        Some(analysis(&prepared, opts)?)
    } else {
        None
    };
    let report = ReportFile {
        schema: SCHEMA_VERSION,
        tool: ToolInfo {
            name: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
        },
        input_digest: digest(bytes),
        name: spec.name.clone(),
        settings: Settings {
            tolerances: prepared.tol,
            n_max: opts.n_max,
            oracle_iters: opts.oracle_iters,
            probes: opts.probes,
            seed: opts.seed,
        },
        state_source: prepared.source,
        hypothesis: prepared.hypothesis,
        analysis,
        warnings: prepared.warnings,
    };
    Ok((report, code))
}

pub fn generate_spec(preset: &str, params: &PresetParams) -> Result<ChannelSpecFile, CliError> {
    Ok(ChannelSpecFile::from_entry(&corpus::preset(preset, params)?))
}

/// Compares the spectral part of the analysis with the `expected` block.
/// Returns the list of mismatches (empty on success).
pub fn verify_bytes(bytes: &[u8], tol_peripheral: Option<f64>) -> Result<Vec<String>, CliError> {
    let spec = ChannelSpecFile::parse(bytes)?;
    let expected = spec
        .expected
        .clone()
        .ok_or_else(|| CliError::schema("spec has no expected block"))?;
    let prepared = prepare(&spec, tol_peripheral)?;
    if !prepared.hypothesis.pass {
        return Err(CliError::new(
            EXIT_HYPOTHESIS,
            format!("hypothesis fails (max ‖T_φ‖ = {:.12})", prepared.hypothesis.max_norm()),
        ));
    }
    let spectral = eigendecompose(&prepared.channel, &prepared.tol)?;
    let split = jdlg_split(&prepared.channel, &prepared.family, &prepared.tol)?;
    let mut mismatches = Vec::new();
    let peripheral = spectral.peripheral_values();
    match bottleneck_matching(&expected.peripheral, &peripheral) {
        Some((d, _)) if d <= VERIFY_TOL => {}
        Some((d, _)) => mismatches.push(format!("peripheral spectrum off by {d:.3e}")),
        None => mismatches.push(format!(
            "peripheral multiset size {} != expected {}",
            peripheral.len(),
            expected.peripheral.len()
        )),
    }
    if spectral.group_order() != expected.h {
        mismatches.push(format!("h = {:?}, expected {:?}", spectral.group_order(), expected.h));
    }
    if split.reversible_dim() != expected.reversible_dim {
        mismatches.push(format!(
            "dim A_r = {}, expected {}",
            split.reversible_dim(),
            expected.reversible_dim
        ));
    }
    let ergodic = spectral.fixed_dim() == 1;
    if ergodic != expected.ergodic {
        mismatches.push(format!("ergodic = {ergodic}, expected {}", expected.ergodic));
    }
    if let Some(r) = expected.stable_radius {
        if (spectral.stable_radius - r).abs() > VERIFY_TOL {
            mismatches.push(format!("stable radius {:.12}, expected {r:.12}", spectral.stable_radius));
        }
    }
    Ok(mismatches)
}

/// Outcome for one file of a directory verification.
#[derive(Clone, Debug)]
pub struct VerifyResult {
    pub path: PathBuf,
    pub code: i32,
    pub message: String,
}

pub fn verify_path(path: &Path, tol_peripheral: Option<f64>) -> VerifyResult {
    let outcome = fs::read(path)
        .map_err(|e| CliError::new(EXIT_SCHEMA, format!("cannot read: {e}")))
        .and_then(|bytes| verify_bytes(&bytes, tol_peripheral));
    let (code, message) = match outcome {
        Ok(m) if m.is_empty() => (EXIT_OK, "ok".to_string()),
        Ok(m) => (EXIT_MISMATCH, m.join("; ")),
        Err(e) => (e.code, e.message),
    };
    VerifyResult {
        path: path.to_path_buf(),
        code,
        message,
    }
}

/// Verifies every `*.json` file in `dir`, in file-name order.
pub fn verify_dir(dir: &Path, jobs: usize, tol_peripheral: Option<f64>) -> Result<Vec<VerifyResult>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::new(EXIT_SCHEMA, format!("cannot read {}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::new(EXIT_FAILURE, e.to_string()))?;
    Ok(pool.install(|| files.par_iter().map(|p| verify_path(p, tol_peripheral)).collect()))
}

#[derive(Parser, Debug)]
#[command(name = "jdlg", version, about = "Reversible/stable splitting of completely positive maps")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Analyse a channel spec and print a report.
    Analyze(AnalyzeArgs),
    /// Write a channel spec for a corpus preset.
    Generate(GenerateArgs),
    /// Check a spec (or a directory of specs) against its expected block.
    Verify(VerifyArgs),
}

#[derive(clap::Args, Debug)]
pub struct AnalyzeArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub tol_peripheral: Option<f64>,
    #[arg(long, default_value_t = 256)]
    pub nmax: usize,
    #[arg(long, default_value_t = 10_000)]
    pub oracle_iters: usize,
    #[arg(long, default_value_t = 8)]
    pub probes: usize,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct GenerateArgs {
    pub preset: String,
    #[arg(long)]
    pub h: Option<usize>,
    /// Comma-separated mixing block sizes for `classical_cycle`.
    #[arg(long, value_delimiter = ',')]
    pub mixing: Vec<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(clap::Args, Debug)]
pub struct VerifyArgs {
    /// A spec file or a directory of `*.json` specs.
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub tol_peripheral: Option<f64>,
}

fn write_output(out: Option<&Path>, text: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError::new(EXIT_FAILURE, format!("{}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_analyze(args: &AnalyzeArgs) -> Result<i32, CliError> {
    if args.nmax < 16 {
        return Err(CliError::schema("--nmax must be at least 16"));
    }
    let bytes = fs::read(&args.input)
        .map_err(|e| CliError::new(EXIT_SCHEMA, format!("{}: {e}", args.input.display())))?;
    let opts = AnalyzeOptions {
        tol_peripheral: args.tol_peripheral,
        n_max: args.nmax,
        oracle_iters: args.oracle_iters,
        probes: args.probes,
        seed: args.seed,
    };
    let (report, code) = analyze_bytes(&bytes, &opts)?;
    let text = match args.format {
        Format::Json => report.to_json(),
        Format::Text => report.to_text(),
    };
    write_output(args.out.as_deref(), &text)?;
    if code == EXIT_HYPOTHESIS {
        eprintln!("hypothesis fails: max ‖T_φ‖ = {:.12}", report.hypothesis.max_norm());
    }
    Ok(code)
}

fn run_generate(args: &GenerateArgs) -> Result<i32, CliError> {
    let params = PresetParams {
        h: args.h,
        mixing: args.mixing.clone(),
        p: args.p,
        theta: args.theta,
        n: args.n,
        seed: args.seed,
    };
    let spec = generate_spec(&args.preset, &params)?;
    let mut text = serde_json::to_string_pretty(&spec).expect("spec serialises");
    text.push('\n');
    write_output(args.out.as_deref(), &text)?;
    Ok(EXIT_OK)
}

fn run_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    let results = if args.input.is_dir() {
        verify_dir(&args.input, args.jobs, args.tol_peripheral)?
    } else {
        vec![verify_path(&args.input, args.tol_peripheral)]
    };
    let mut code = EXIT_OK;
    for r in &results {
        if r.code == EXIT_OK {
            println!("{}: ok", r.path.display());
        } else {
            eprintln!("{}: {}", r.path.display(), r.message);
        }
        code = code.max(r.code);
    }
    Ok(code)
}

/// Parses arguments, runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_SCHEMA } else { EXIT_OK };
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Generate(g) => run_generate(g),
        Command::Verify(v) => run_verify(v),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}
