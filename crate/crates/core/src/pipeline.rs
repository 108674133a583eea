//! Experiment configuration, the two-phase select → forged-VQE driver, exact
//! baselines and result files.
//!
//! A run is described by one JSON [`ExperimentConfig`]. It is validated and
//! resolved (seed propagated, defaults filled) before any compute, and the
//! resolved form is embedded in every JSON output together with its SHA-256
//! hash. CSV and set files carry the hash and seed as a leading `#` comment.
//! Nothing time-dependent is written, so reruns with the same config and seed
//! are byte-identical.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::forging::{
    all_correlators, effective_matrix_identity, quadratic_form, solve_schmidt, von_neumann_entropy, Circuits,
    ForgedState, ForgingPlan, SchmidtVector,
};
use crate::models::{BuiltModel, ModelSpec};
use crate::optimizers::{normalize, projected_gradient_step, AdaBelief, AdaBeliefConfig, Nesterov, DEFAULT_MOMENTUM};
use crate::oracle::{exact_schmidt, ground_state, ranked_pairs, sector_basis, truncated_weight, ExactGroundState, Method};
use crate::pauli::{bipartition, BipartiteTerm, Bitstring};
use crate::rng::{chacha, derive_seed};
use crate::selection::{
    parse_set_file, random_pairs, run_selection, score_against_exact, score_strict, write_set, write_trace, Pair,
    SelectionConfig, SelectionOutcome, Termination,
};
use crate::simulator::{AnsatzKind, CircuitAnsatz, Entangler};

pub const SCHEMA_VERSION: u32 = 1;

pub const RESULT_FILE: &str = "result.json";
pub const EXACT_FILE: &str = "exact.json";
pub const SCORE_FILE: &str = "score.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const SELECTION_TRACE_FILE: &str = "selection.csv";
pub const SET_FILE: &str = "set.txt";
pub const CORRELATOR_FILE: &str = "correlators.csv";
pub const ENTROPY_FILE: &str = "entropy.csv";
pub const FAILURE_FILE: &str = "failure.json";

/// Largest width for which `exact = "auto"` runs the oracle.
pub const AUTO_EXACT_LIMIT: usize = 16;

const STREAM_RANDOM_SET: u64 = 0x5e7;
const STREAM_CIRCUIT: u64 = 0xc1c;
const STREAM_BASELINE: u64 = 0xba5e << 16;

/// Where the `k` basis pairs of the forged state come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSource {
    /// Run the neural selection loop.
    Select {
        #[serde(default)]
        selection: SelectionConfig,
    },
    /// A set file (`σA σB [λ]` per line), relative to the config file.
    File { path: PathBuf },
    /// `k` uniformly random distinct pairs drawn from the run seed; with
    /// `symmetric_pairing` every pair is `(σ, σ)`.
    Random {
        k: usize,
        #[serde(default)]
        symmetric_pairing: bool,
    },
    /// Inline `[σA, σB]` labels.
    Explicit { pairs: Vec<(String, String)> },
}

impl Default for PairSource {
    fn default() -> Self {
        PairSource::Select {
            selection: SelectionConfig::default(),
        }
    }
}

/// Update rule for the Schmidt coefficients in the interleaved phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaOptimizer {
    /// Nesterov momentum with the gradient at the look-ahead point, then
    /// renormalization.
    #[default]
    Nesterov,
    /// Plain gradient step, then renormalization.
    ProjectedGradient,
    /// Exact minimization of `λᵀMλ` on the unit sphere.
    ExactSolve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VqeConfig {
    /// Circuit-only epochs with `λ` frozen at its initial value.
    pub pretrain_epochs: usize,
    /// Interleaved epochs after pretraining.
    pub max_epochs: usize,
    pub circuit_lr: f64,
    pub lambda_lr: f64,
    /// Circuit steps per `λ` step.
    pub lambda_update_period: usize,
    pub lambda_optimizer: LambdaOptimizer,
    pub momentum: f64,
    /// Standard deviation of the normal initial circuit parameters.
    pub init_std: f64,
    /// Number of uniformly random pair sets to run as a baseline.
    pub random_baseline: usize,
}

impl Default for VqeConfig {
    fn default() -> Self {
        Self {
            pretrain_epochs: 1000,
            max_epochs: 1000,
            circuit_lr: 1e-2,
            lambda_lr: 1e-2,
            lambda_update_period: 10,
            lambda_optimizer: LambdaOptimizer::Nesterov,
            momentum: DEFAULT_MOMENTUM,
            init_std: 0.1,
            random_baseline: 0,
        }
    }
}

/// Whether to run the exact oracle for `Δ`, scores and correlators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExactMode {
    /// Only up to [`AUTO_EXACT_LIMIT`] qubits.
    #[default]
    Auto,
    Always,
    Never,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub formats: Vec<OutputFormat>,
    /// Write the `⟨Z_i Z_j⟩` table after a VQE run.
    pub correlators: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            formats: vec![OutputFormat::Json, OutputFormat::Csv],
            correlators: false,
        }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}

fn default_ansatz() -> AnsatzKind {
    AnsatzKind::HardwareEfficient {
        depth: 15,
        entangler: Entangler::Brick,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub model: ModelSpec,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub pairs: PairSource,
    #[serde(default = "default_ansatz")]
    pub ansatz: AnsatzKind,
    #[serde(default)]
    pub vqe: VqeConfig,
    #[serde(default)]
    pub exact: ExactMode,
    #[serde(default)]
    pub outputs: OutputConfig,
    /// Directory relative paths are resolved against; not serialized.
    #[serde(skip)]
    pub base_dir: Option<PathBuf>,
}

fn positive(name: &str, x: f64) -> Result<()> {
    if x.is_finite() && x >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be finite and non-negative, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid experiment config: {e}")))
    }

    /// Reads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        let mut cfg = Self::from_json(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf);
        Ok(cfg)
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        match &self.base_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    /// Overrides the run seed (and the selection seed derived from it).
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_output_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.outputs.dir = dir.into();
        self
    }

    /// Structural checks that need no model construction.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let v = &self.vqe;
        positive("vqe.circuit_lr", v.circuit_lr)?;
        positive("vqe.lambda_lr", v.lambda_lr)?;
        positive("vqe.init_std", v.init_std)?;
        if v.lambda_update_period == 0 {
            return Err(Error::Config("vqe.lambda_update_period must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&v.momentum) {
            return Err(Error::Config(format!("vqe.momentum must lie in [0, 1), got {}", v.momentum)));
        }
        if self.outputs.formats.is_empty() {
            return Err(Error::Config("outputs.formats must name at least one format".into()));
        }
        match &self.pairs {
            PairSource::Select { selection } => selection.validate()?,
            PairSource::Random { k, .. } if *k == 0 => return Err(Error::Config("pairs.k must be at least 1".into())),
            PairSource::Explicit { pairs } if pairs.is_empty() => {
                return Err(Error::Config("pairs.pairs must not be empty".into()))
            }
            _ => {}
        }
        Ok(())
    }

    /// The config as it is embedded in outputs: the selection seed follows
    /// the run seed.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        if let PairSource::Select { selection } = &mut cfg.pairs {
            selection.seed = cfg.seed;
        }
        cfg
    }

    /// SHA-256 (hex) of the resolved config's canonical JSON.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(&self.resolved()).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

/// A validated config together with its built model.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub hash: String,
    pub model: BuiltModel,
    pub terms: Vec<BipartiteTerm>,
}

fn pair_labels(pairs: &[Pair]) -> Vec<(String, String)> {
    pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
}

fn parse_labels(labels: &[(String, String)]) -> Result<Vec<Pair>> {
    labels
        .iter()
        .map(|(a, b)| Ok((a.parse::<Bitstring>()?, b.parse::<Bitstring>()?)))
        .collect()
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let config = config.resolved();
        // Build from the resolved location but embed the path as written.
        let mut spec = config.model.clone();
        if let ModelSpec::ShellModel { path, .. } = &mut spec {
            *path = config.resolve_path(Path::new(path.as_str())).to_string_lossy().into_owned();
        }
        let model = spec.build()?;
        Self::finish(config, model)
    }

    fn finish(config: ExperimentConfig, model: BuiltModel) -> Result<Self> {
        let sector = model.sector.map(|s| (s.ones_a as usize, s.ones_b as usize));
        if let PairSource::Select { selection } = &config.pairs {
            if selection.sector.is_some() && selection.sector != sector {
                return Err(Error::Config(format!(
                    "selection.sector {:?} disagrees with the model sector {sector:?}",
                    selection.sector
                )));
            }
        }
        let terms = bipartition(&model.hamiltonian, &model.bipartition)?;
        CircuitAnsatz::new(config.ansatz, model.bipartition.half_width())?;
        let hash = config.hash();
        Ok(Self {
            config,
            hash,
            model,
            terms,
        })
    }

    pub fn width(&self) -> usize {
        self.model.hamiltonian.width()
    }

    pub fn half_width(&self) -> usize {
        self.model.bipartition.half_width()
    }

    /// Whether pairs are `(σ, σ)`: set by the selection or random pair source
    /// and inherited by the random baseline.
    pub fn symmetric_pairing(&self) -> bool {
        match &self.config.pairs {
            PairSource::Select { selection } => selection.symmetric_pairing,
            PairSource::Random { symmetric_pairing, .. } => *symmetric_pairing,
            PairSource::File { .. } | PairSource::Explicit { .. } => false,
        }
    }

    fn sector(&self) -> Option<(usize, usize)> {
        self.model.sector.map(|s| (s.ones_a as usize, s.ones_b as usize))
    }

    /// Header line for CSV and set files.
    pub fn header(&self) -> String {
        format!("# config_hash={} seed={}", self.hash, self.config.seed)
    }

    /// Whether the configured exact mode runs the oracle for this model.
    pub fn exact_enabled(&self) -> bool {
        match self.config.exact {
            ExactMode::Auto => self.width() <= AUTO_EXACT_LIMIT,
            ExactMode::Always => true,
            ExactMode::Never => false,
        }
    }

    /// Exact ground state (restricted to the model sector if any).
    pub fn exact_ground_state(&self) -> Result<ExactGroundState> {
        match self.model.sector {
            Some(s) => {
                let basis = sector_basis(&self.model.bipartition, s.ones_a, s.ones_b)?;
                ground_state(&self.model.hamiltonian, Some(&basis), Method::Auto)
            }
            None => ground_state(&self.model.hamiltonian, None, Method::Auto),
        }
    }

    fn maybe_exact(&self) -> Result<Option<ExactGroundState>> {
        if self.exact_enabled() {
            Ok(Some(self.exact_ground_state()?))
        } else {
            Ok(None)
        }
    }

    fn selection_config(&self) -> Option<SelectionConfig> {
        match &self.config.pairs {
            PairSource::Select { selection } => {
                let mut s = selection.clone();
                s.sector = self.sector();
                s.seed = self.config.seed;
                Some(s)
            }
            _ => None,
        }
    }

    fn check_pairs(&self, pairs: &[Pair]) -> Result<()> {
        let half = self.half_width();
        let mut seen = std::collections::HashSet::new();
        for (a, b) in pairs {
            if a.width() != half || b.width() != half {
                return Err(Error::Config(format!("pair {a} {b} does not match half width {half}")));
            }
            if let Some((ka, kb)) = self.sector() {
                if a.weight() as usize != ka || b.weight() as usize != kb {
                    return Err(Error::Config(format!("pair {a} {b} lies outside the ({ka}, {kb}) sector")));
                }
            }
            if !seen.insert((*a, *b)) {
                return Err(Error::Config(format!("pair {a} {b} is listed twice")));
            }
        }
        Ok(())
    }

    /// Pairs with coefficients solved (identity circuits) or taken from a
    /// set file, plus the selection outcome when one ran.
    pub fn initial_pairs(&self) -> Result<(Vec<Pair>, Vec<f64>, Option<SelectionOutcome>)> {
        let identity_solve = |pairs: Vec<Pair>| -> Result<(Vec<Pair>, Vec<f64>)> {
            let m = effective_matrix_identity(&pairs, &self.model.hamiltonian, &self.model.bipartition)?;
            let (lambda, _) = solve_schmidt(&m)?;
            Ok((pairs, lambda))
        };
        match &self.config.pairs {
            PairSource::Select { .. } => {
                let cfg = self.selection_config().expect("select source");
                let out = run_selection(&self.model.hamiltonian, &self.model.bipartition, &cfg)?;
                Ok((out.pairs.clone(), out.lambda.clone(), Some(out)))
            }
            PairSource::File { path } => {
                let text = fs::read_to_string(self.config.resolve_path(path))?;
                let (pairs, coeffs) = parse_set_file(&text)?;
                self.check_pairs(&pairs)?;
                match coeffs {
                    Some(mut c) => {
                        normalize(&mut c)?;
                        Ok((pairs, c, None))
                    }
                    None => {
                        let (p, l) = identity_solve(pairs)?;
                        Ok((p, l, None))
                    }
                }
            }
            PairSource::Random { k, .. } => {
                let seed = derive_seed(self.config.seed, STREAM_RANDOM_SET);
                let pairs = random_pairs(self.half_width(), *k, self.sector(), self.symmetric_pairing(), seed)?;
                let (p, l) = identity_solve(pairs)?;
                Ok((p, l, None))
            }
            PairSource::Explicit { pairs } => {
                let pairs = parse_labels(pairs)?;
                self.check_pairs(&pairs)?;
                let (p, l) = identity_solve(pairs)?;
                Ok((p, l, None))
            }
        }
    }

    fn ansatz(&self) -> Result<CircuitAnsatz> {
        CircuitAnsatz::new(self.config.ansatz, self.half_width())
    }

    /// Initial `(Θ_U, Θ_V)`, drawn from the run seed.
    pub fn initial_parameters(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.ansatz()?.n_params();
        let std = self.config.vqe.init_std;
        let mut rng = chacha(derive_seed(self.config.seed, STREAM_CIRCUIT));
        let mut draw = || -> Vec<f64> {
            if std == 0.0 {
                return vec![0.0; n];
            }
            let normal = Normal::new(0.0, std).expect("std validated");
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        };
        let u = draw();
        let v = draw();
        Ok((u, v))
    }
}

/// One VQE epoch: the energy before that epoch's update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub energy: f64,
    pub delta: Option<f64>,
    pub entropy: f64,
    pub pretrain: bool,
}

/// Relative error `|E − E₀| / |E₀|`.
pub fn relative_error(energy: f64, exact: f64) -> f64 {
    ((energy - exact) / exact).abs()
}

/// Final state of a forged VQE run.
#[derive(Debug, Clone, PartialEq)]
pub struct VqeOutcome {
    pub pairs: Vec<Pair>,
    pub lambda: Vec<f64>,
    pub theta_u: Vec<f64>,
    pub theta_v: Vec<f64>,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub trace: Vec<TraceRow>,
}

/// Parameters at the point a run diverged.
#[derive(Debug, Clone, Serialize)]
pub struct FailureDump {
    pub epoch: usize,
    pub energy: f64,
    pub lambda: Vec<f64>,
    pub theta_u: Vec<f64>,
    pub theta_v: Vec<f64>,
    pub message: String,
}

/// Pretraining (circuits only, `λ` frozen) followed by the interleaved phase
/// (`lambda_update_period` AdaBelief circuit steps per `λ` step).
///
/// `on_row` sees every trace row as it is produced. A non-finite energy or
/// gradient stops the run with [`Error::Training`]; the failing parameters are
/// handed to `on_failure` first.
pub fn run_vqe_with(
    exp: &Experiment,
    pairs: Vec<Pair>,
    lambda: Vec<f64>,
    exact_energy: Option<f64>,
    mut on_row: impl FnMut(&TraceRow) -> Result<()>,
    mut on_failure: impl FnMut(&FailureDump) -> Result<()>,
) -> Result<VqeOutcome> {
    let cfg = &exp.config.vqe;
    let ansatz = exp.ansatz()?;
    let plan = ForgingPlan::new(&pairs, &exp.terms)?;
    let (mut theta_u, mut theta_v) = exp.initial_parameters()?;
    let mut lambda = lambda;
    normalize(&mut lambda)?;
    let nu = theta_u.len();
    let mut circuit_opt = AdaBelief::new(2 * nu, AdaBeliefConfig::default());
    let mut lambda_opt = Nesterov::new(lambda.len(), cfg.momentum);
    let mut theta: Vec<f64> = theta_u.iter().chain(&theta_v).copied().collect();

    let total = cfg.pretrain_epochs + cfg.max_epochs;
    let mut trace = Vec::with_capacity(total + 1);
    let circuits = |theta: &[f64]| -> (Vec<f64>, Vec<f64>) { (theta[..nu].to_vec(), theta[nu..].to_vec()) };
    let row_for = |epoch: usize, energy: f64, lambda: &[f64], pretrain: bool| TraceRow {
        epoch,
        energy,
        delta: exact_energy.map(|e0| relative_error(energy, e0)),
        entropy: von_neumann_entropy(lambda),
        pretrain,
    };
    let mut initial_energy = None;

    for epoch in 0..total {
        let pretrain = epoch < cfg.pretrain_epochs;
        (theta_u, theta_v) = circuits(&theta);
        let c = Circuits {
            u: &ansatz,
            theta_u: &theta_u,
            v: &ansatz,
            theta_v: &theta_v,
        };
        let g = plan.energy_and_gradients(&lambda, c)?;
        let grad: Vec<f64> = g.grad_u.iter().chain(&g.grad_v).copied().collect();
        if !g.energy.is_finite() || grad.iter().any(|x| !x.is_finite()) {
            let dump = FailureDump {
                epoch,
                energy: g.energy,
                lambda: lambda.clone(),
                theta_u: theta_u.clone(),
                theta_v: theta_v.clone(),
                message: "non-finite energy or circuit gradient".into(),
            };
            on_failure(&dump)?;
            return Err(Error::Training(format!("VQE diverged at epoch {epoch}: energy {}", g.energy)));
        }
        initial_energy.get_or_insert(g.energy);
        let row = row_for(epoch, g.energy, &lambda, pretrain);
        on_row(&row)?;
        trace.push(row);

        circuit_opt.step(&mut theta, &grad, cfg.circuit_lr)?;
        let interleaved_epoch = epoch + 1 - cfg.pretrain_epochs.min(epoch + 1);
        if !pretrain && interleaved_epoch % cfg.lambda_update_period == 0 {
            (theta_u, theta_v) = circuits(&theta);
            let m = plan.matrix(Circuits {
                u: &ansatz,
                theta_u: &theta_u,
                v: &ansatz,
                theta_v: &theta_v,
            })?;
            let grad_at = |x: &[f64]| -> Vec<f64> {
                let mx = &m * nalgebra::DVector::from_column_slice(x);
                mx.iter().map(|v| 2.0 * v).collect()
            };
            match cfg.lambda_optimizer {
                LambdaOptimizer::Nesterov => {
                    let g = grad_at(&lambda_opt.lookahead(&lambda));
                    lambda_opt.step_projected(&mut lambda, &g, cfg.lambda_lr)?;
                }
                LambdaOptimizer::ProjectedGradient => {
                    let g = grad_at(&lambda);
                    projected_gradient_step(&mut lambda, &g, cfg.lambda_lr)?;
                }
                LambdaOptimizer::ExactSolve => lambda = solve_schmidt(&m)?.0,
            }
        }
    }

    (theta_u, theta_v) = circuits(&theta);
    let m = plan.matrix(Circuits {
        u: &ansatz,
        theta_u: &theta_u,
        v: &ansatz,
        theta_v: &theta_v,
    })?;
    let final_energy = quadratic_form(&m, &lambda);
    if !final_energy.is_finite() {
        return Err(Error::Training("final forged energy is not finite".into()));
    }
    let row = row_for(total, final_energy, &lambda, false);
    on_row(&row)?;
    trace.push(row);
    Ok(VqeOutcome {
        pairs,
        lambda,
        theta_u,
        theta_v,
        initial_energy: initial_energy.unwrap_or(final_energy),
        final_energy,
        trace,
    })
}

/// [`run_vqe_with`] without callbacks.
pub fn run_vqe(exp: &Experiment, pairs: Vec<Pair>, lambda: Vec<f64>, exact_energy: Option<f64>) -> Result<VqeOutcome> {
    run_vqe_with(exp, pairs, lambda, exact_energy, |_| Ok(()), |_| Ok(()))
}

/// Final energies of VQE runs on uniformly random pair sets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSummary {
    pub k: usize,
    pub energies: Vec<f64>,
    pub deltas: Option<Vec<f64>>,
    pub mean_energy: f64,
    pub std_energy: f64,
    pub median_energy: f64,
    pub median_delta: Option<f64>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

pub fn median(xs: &[f64]) -> f64 {
    let mut s = xs.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// VQE on `count` random sets of `k` pairs. Circuit initialization is the
/// same as the main run, so only the pair set differs.
pub fn random_baseline(exp: &Experiment, k: usize, count: usize, exact_energy: Option<f64>) -> Result<BaselineSummary> {
    if count == 0 {
        return Err(Error::Config("a random baseline needs at least one set".into()));
    }
    let mut energies = Vec::with_capacity(count);
    for j in 0..count {
        let seed = derive_seed(exp.config.seed, STREAM_BASELINE + j as u64);
        let pairs = random_pairs(exp.half_width(), k, exp.sector(), exp.symmetric_pairing(), seed)?;
        let m = effective_matrix_identity(&pairs, &exp.model.hamiltonian, &exp.model.bipartition)?;
        let (lambda, _) = solve_schmidt(&m)?;
        energies.push(run_vqe(exp, pairs, lambda, exact_energy)?.final_energy);
    }
    let (mean_energy, std_energy) = mean_std(&energies);
    let deltas: Option<Vec<f64>> = exact_energy.map(|e0| energies.iter().map(|e| relative_error(*e, e0)).collect());
    Ok(BaselineSummary {
        k,
        median_energy: median(&energies),
        median_delta: deltas.as_deref().map(median),
        energies,
        deltas,
        mean_energy,
        std_energy,
    })
}

/// Output directory writer.
struct Outputs<'a> {
    exp: &'a Experiment,
    dir: PathBuf,
}

impl<'a> Outputs<'a> {
    fn new(exp: &'a Experiment) -> Result<Self> {
        let dir = exp.config.outputs.dir.clone();
        fs::create_dir_all(&dir)?;
        Ok(Self { exp, dir })
    }

    fn wants(&self, f: OutputFormat) -> bool {
        self.exp.config.outputs.formats.contains(&f)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// A file that starts with the hash/seed comment line.
    fn commented(&self, name: &str) -> Result<BufWriter<File>> {
        let mut w = BufWriter::new(File::create(self.path(name))?);
        writeln!(w, "{}", self.exp.header())?;
        Ok(w)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }

    fn set_file(&self, pairs: &[Pair], lambda: &[f64]) -> Result<()> {
        let mut w = self.commented(SET_FILE)?;
        write_set(&mut w, pairs, lambda)?;
        w.flush()?;
        Ok(())
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Hits of a pair set against the exact ranking.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub k: usize,
    pub hits: usize,
    pub strict_hits: usize,
    /// Sum of the `k` largest squared Schmidt values of the exact state.
    pub exact_truncated_weight: f64,
    /// Exact top-`k` pairs by amplitude with their squared weights.
    pub exact_top: Vec<(String, String, f64)>,
}

pub fn score_pairs(exp: &Experiment, psi: &ExactGroundState, pairs: &[Pair]) -> Result<Score> {
    let k = pairs.len();
    let ranked = ranked_pairs(psi, &exp.model.bipartition)?;
    let schmidt = exact_schmidt(psi, &exp.model.bipartition)?;
    Ok(Score {
        k,
        hits: score_against_exact(pairs, &ranked, k),
        strict_hits: score_strict(pairs, &ranked, k),
        exact_truncated_weight: truncated_weight(&schmidt.values, k),
        exact_top: ranked.iter().take(k).map(|r| (r.a.to_string(), r.b.to_string(), r.weight)).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub termination: Termination,
    pub iterations: usize,
    pub subspace_energy: f64,
}

/// `result.json` of the `select` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectResult {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub selection: SelectionSummary,
    pub pairs: Vec<(String, String)>,
    pub lambda: Vec<f64>,
    pub exact_energy: Option<f64>,
    pub score: Option<Score>,
}

/// Runs the selection loop and writes `selection.csv`, `set.txt` and
/// `result.json`.
pub fn cmd_select(exp: &Experiment) -> Result<SelectResult> {
    let Some(cfg) = exp.selection_config() else {
        return Err(Error::Config("`select` needs pairs.source = \"select\"".into()));
    };
    let out = Outputs::new(exp)?;
    let outcome = run_selection(&exp.model.hamiltonian, &exp.model.bipartition, &cfg)?;
    let exact = exp.maybe_exact()?;
    let score = exact.as_ref().map(|psi| score_pairs(exp, psi, &outcome.pairs)).transpose()?;
    if out.wants(OutputFormat::Csv) {
        let mut w = out.commented(SELECTION_TRACE_FILE)?;
        write_trace(&mut w, &outcome.state.history)?;
        w.flush()?;
    }
    out.set_file(&outcome.pairs, &outcome.lambda)?;
    let result = SelectResult {
        schema_version: SCHEMA_VERSION,
        command: "select".into(),
        config_hash: exp.hash.clone(),
        seed: exp.config.seed,
        config: exp.config.clone(),
        selection: SelectionSummary {
            termination: outcome.termination,
            iterations: outcome.state.iteration,
            subspace_energy: outcome.energy,
        },
        pairs: pair_labels(&outcome.pairs),
        lambda: outcome.lambda.clone(),
        exact_energy: exact.map(|e| e.energy),
        score,
    };
    if out.wants(OutputFormat::Json) {
        out.json(RESULT_FILE, &result)?;
    }
    Ok(result)
}

/// `result.json` of the `vqe` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub width: usize,
    pub exact_energy: Option<f64>,
    /// False when `Δ` is omitted because the oracle did not run.
    pub delta_available: bool,
    pub selection: Option<SelectionSummary>,
    pub initial_energy: f64,
    pub final_energy: f64,
    pub final_delta: Option<f64>,
    pub final_entropy: f64,
    pub pairs: Vec<(String, String)>,
    pub lambda: Vec<f64>,
    pub theta_u: Vec<f64>,
    pub theta_v: Vec<f64>,
    pub baseline: Option<BaselineSummary>,
    pub trace: Vec<TraceRow>,
}

impl VqeResult {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("invalid VQE result file: {e}")))
    }

    /// The forged state described by this result.
    pub fn forged_state(&self) -> Result<ForgedState> {
        let pairs = parse_labels(&self.pairs)?;
        let schmidt = SchmidtVector::new(pairs, self.lambda.clone())?;
        let half = schmidt.half_widths().0;
        let ansatz = CircuitAnsatz::new(self.config.ansatz, half)?;
        ForgedState::new(schmidt, ansatz.clone(), self.theta_u.clone(), ansatz, self.theta_v.clone())
    }
}

/// Selection (or another pair source), then the forged VQE. Writes
/// `trace.csv` incrementally, `set.txt`, `result.json` and optionally
/// `selection.csv` and `correlators.csv`.
pub fn cmd_vqe(exp: &Experiment) -> Result<VqeResult> {
    let out = Outputs::new(exp)?;
    let exact = exp.maybe_exact()?;
    let exact_energy = exact.as_ref().map(|e| e.energy);
    let (pairs, lambda, selection) = exp.initial_pairs()?;
    if let (Some(sel), true) = (&selection, out.wants(OutputFormat::Csv)) {
        let mut w = out.commented(SELECTION_TRACE_FILE)?;
        write_trace(&mut w, &sel.state.history)?;
        w.flush()?;
    }
    let k = pairs.len();

    let mut trace_writer = if out.wants(OutputFormat::Csv) {
        let mut w = out.commented(TRACE_FILE)?;
        writeln!(w, "epoch,energy,delta,entropy")?;
        Some(w)
    } else {
        None
    };
    let outcome = run_vqe_with(
        exp,
        pairs,
        lambda,
        exact_energy,
        |row| {
            if let Some(w) = trace_writer.as_mut() {
                writeln!(w, "{},{},{},{}", row.epoch, row.energy, opt_num(row.delta), row.entropy)?;
                w.flush()?;
            }
            Ok(())
        },
        |dump| {
            out.json(FAILURE_FILE, dump)?;
            Ok(())
        },
    )?;
    drop(trace_writer);

    let baseline = match exp.config.vqe.random_baseline {
        0 => None,
        n => Some(random_baseline(exp, k, n, exact_energy)?),
    };
    out.set_file(&outcome.pairs, &outcome.lambda)?;

    let result = VqeResult {
        schema_version: SCHEMA_VERSION,
        command: "vqe".into(),
        config_hash: exp.hash.clone(),
        seed: exp.config.seed,
        config: exp.config.clone(),
        width: exp.width(),
        exact_energy,
        delta_available: exact_energy.is_some(),
        selection: selection.map(|s| SelectionSummary {
            termination: s.termination,
            iterations: s.state.iteration,
            subspace_energy: s.energy,
        }),
        initial_energy: outcome.initial_energy,
        final_energy: outcome.final_energy,
        final_delta: exact_energy.map(|e0| relative_error(outcome.final_energy, e0)),
        final_entropy: von_neumann_entropy(&outcome.lambda),
        pairs: pair_labels(&outcome.pairs),
        lambda: outcome.lambda.clone(),
        theta_u: outcome.theta_u.clone(),
        theta_v: outcome.theta_v.clone(),
        baseline,
        trace: outcome.trace.clone(),
    };
    if out.wants(OutputFormat::Json) {
        out.json(RESULT_FILE, &result)?;
    }
    if exp.config.outputs.correlators {
        let state = result.forged_state()?;
        let rows = correlator_table(exp, &state, exact.as_ref())?;
        write_correlators(&out, &rows)?;
    }
    Ok(result)
}

/// One row of the correlator table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorRow {
    pub i: usize,
    pub j: usize,
    pub forged: f64,
    pub exact: Option<f64>,
    pub abs_error: Option<f64>,
}

/// Exact `⟨Z_i Z_j⟩` from full-space amplitudes.
pub fn exact_correlator(psi: &ExactGroundState, i: usize, j: usize) -> f64 {
    let n = psi.width;
    let (bi, bj) = (n - 1 - i, n - 1 - j);
    psi.amplitudes
        .iter()
        .enumerate()
        .map(|(x, a)| {
            let parity = ((x >> bi) ^ (x >> bj)) & 1;
            let w = a.norm_sqr();
            if parity == 0 {
                w
            } else {
                -w
            }
        })
        .sum()
}

pub fn correlator_table(exp: &Experiment, state: &ForgedState, exact: Option<&ExactGroundState>) -> Result<Vec<CorrelatorRow>> {
    let forged = all_correlators(state, &exp.model.bipartition)?;
    Ok(forged
        .into_iter()
        .map(|((i, j), f)| {
            let e = exact.map(|psi| exact_correlator(psi, i, j));
            CorrelatorRow {
                i,
                j,
                forged: f,
                exact: e,
                abs_error: e.map(|e| (f - e).abs()),
            }
        })
        .collect())
}

fn write_correlators(out: &Outputs<'_>, rows: &[CorrelatorRow]) -> Result<()> {
    let mut w = out.commented(CORRELATOR_FILE)?;
    writeln!(w, "i,j,forged,exact,abs_error")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{}", r.i, r.j, r.forged, opt_num(r.exact), opt_num(r.abs_error))?;
    }
    w.flush()?;
    Ok(())
}

/// Correlator table for a finished VQE result; writes `correlators.csv`.
pub fn cmd_correlators(exp: &Experiment, result: &VqeResult) -> Result<Vec<CorrelatorRow>> {
    if result.config.model != exp.config.model || result.config.ansatz != exp.config.ansatz {
        return Err(Error::Config("the result was produced for a different model or ansatz".into()));
    }
    let out = Outputs::new(exp)?;
    let exact = exp.maybe_exact()?;
    let rows = correlator_table(exp, &result.forged_state()?, exact.as_ref())?;
    write_correlators(&out, &rows)?;
    Ok(rows)
}

/// Entropy trace of a finished VQE result; writes `entropy.csv` next to it.
pub fn cmd_entropy(result: &VqeResult, out_dir: impl AsRef<Path>) -> Result<Vec<(usize, f64)>> {
    let rows: Vec<(usize, f64)> = result.trace.iter().map(|r| (r.epoch, r.entropy)).collect();
    fs::create_dir_all(out_dir.as_ref())?;
    let mut w = BufWriter::new(File::create(out_dir.as_ref().join(ENTROPY_FILE))?);
    writeln!(w, "# config_hash={} seed={}", result.config_hash, result.seed)?;
    writeln!(w, "epoch,entropy")?;
    for (e, s) in &rows {
        writeln!(w, "{e},{s}")?;
    }
    w.flush()?;
    Ok(rows)
}

/// `exact.json`: ground energy and Schmidt spectrum of the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactReport {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub width: usize,
    pub energy: f64,
    pub residual: f64,
    /// Descending squared Schmidt values (all of them).
    pub schmidt_weights: Vec<f64>,
    pub entropy: f64,
    /// `(k, Σ_{n≤k} s_n²)` for k = 1, 2, 4, 8, 16.
    pub truncated_weights: Vec<(usize, f64)>,
    pub top_pairs: Vec<(String, String, f64)>,
}

pub fn cmd_exact(exp: &Experiment) -> Result<ExactReport> {
    let out = Outputs::new(exp)?;
    let psi = exp.exact_ground_state()?;
    let schmidt = exact_schmidt(&psi, &exp.model.bipartition)?;
    let weights: Vec<f64> = schmidt.values.iter().map(|s| s * s).collect();
    let ranked = ranked_pairs(&psi, &exp.model.bipartition)?;
    let report = ExactReport {
        schema_version: SCHEMA_VERSION,
        command: "exact".into(),
        config_hash: exp.hash.clone(),
        seed: exp.config.seed,
        config: exp.config.clone(),
        width: exp.width(),
        energy: psi.energy,
        residual: psi.residual(&exp.model.hamiltonian),
        entropy: von_neumann_entropy(&schmidt.values),
        truncated_weights: [1, 2, 4, 8, 16].iter().map(|&k| (k, truncated_weight(&schmidt.values, k))).collect(),
        schmidt_weights: weights,
        top_pairs: ranked.iter().take(16).map(|r| (r.a.to_string(), r.b.to_string(), r.weight)).collect(),
    };
    out.json(EXACT_FILE, &report)?;
    Ok(report)
}

/// `score.json` for a set file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub set_file: String,
    pub exact_energy: f64,
    pub score: Score,
}

pub fn cmd_score(exp: &Experiment, set_file: impl AsRef<Path>) -> Result<ScoreReport> {
    let text = fs::read_to_string(set_file.as_ref())?;
    let (pairs, _) = parse_set_file(&text)?;
    exp.check_pairs(&pairs)?;
    let out = Outputs::new(exp)?;
    let psi = exp.exact_ground_state()?;
    let report = ScoreReport {
        schema_version: SCHEMA_VERSION,
        command: "score".into(),
        config_hash: exp.hash.clone(),
        seed: exp.config.seed,
        set_file: set_file.as_ref().to_string_lossy().into_owned(),
        exact_energy: psi.energy,
        score: score_pairs(exp, &psi, &pairs)?,
    };
    out.json(SCORE_FILE, &report)?;
    Ok(report)
}
