//! End-to-end experiment: generate a task series, run it through a
//! reservoir, fit the readout, forecast, and write the artifacts.
//!
//! Configuration is flat TOML. Composite values use call syntax:
//!
//! ```toml
//! scheme = "static"
//! n_qubits = 4
//! shots = 10000
//! seed = 1
//! operator = "haar(4, 7)"
//! task = "binary_periodic(2, 100)"
//! num_pred = 10
//! readout = 1e-6
//! noise = "none"
//! ```

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::circuit::{render_text, CircuitBuilder};
use crate::codec::{decode_symbol, encode_angle, encode_basis, Alphabet};
use crate::readout::{accuracy, fit_ridge, mse, ReadoutModel, RidgeConfig};
use crate::reservoir::{
    build_incremental_circuits, build_static_circuit, FeatureMatrix, FeatureMode, Incremental,
    PredictionRun, Reservoir, ReservoirHooks, RunOptions, Static,
};
use crate::sim::{haar_random_unitary, RngStream, UnitaryMatrix, MAX_HAAR_QUBITS};
use crate::{Error, Result};

const KEYS: &[&str] = &[
    "scheme",
    "n_qubits",
    "memory",
    "shots",
    "seed",
    "operator",
    "task",
    "train_fraction",
    "num_pred",
    "readout",
    "noise",
    "feature_mode",
];

pub const DEFAULT_SHOTS: usize = 10_000;
pub const DEFAULT_LAMBDA: f64 = 1e-6;
pub const DEFAULT_MEMORY: usize = 3;
pub const DEFAULT_NUM_PRED: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeKind {
    Static,
    Incremental,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSpec {
    /// Haar unitary on the first `k` qubits drawn from stream `(seed, 0)`.
    Haar { k: usize, seed: u64 },
    /// Matrix file; see [`parse_matrix`].
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    /// Repeating block of `period/2` zeros then `period - period/2` ones.
    BinaryPeriodic { period: usize, length: usize },
    /// `0.5 + 0.5·sin(2πt/period)`, snapped to `samples` evenly spaced
    /// levels in `[0, 1]` when `samples >= 2`.
    Sine {
        period: f64,
        length: usize,
        samples: usize,
    },
    /// One value per line.
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scheme: SchemeKind,
    pub n_qubits: usize,
    pub memory: usize,
    pub shots: usize,
    pub seed: u64,
    pub operator: OperatorSpec,
    pub task: TaskSpec,
    pub train_fraction: f64,
    pub num_pred: usize,
    /// Ridge coefficient of the readout.
    pub readout: f64,
    pub noise: Option<f64>,
    pub feature_mode: FeatureMode,
}

impl ExperimentConfig {
    /// Defaults for everything except the task.
    pub fn new(scheme: SchemeKind, n_qubits: usize, task: TaskSpec) -> Self {
        Self {
            scheme,
            n_qubits,
            memory: DEFAULT_MEMORY,
            shots: DEFAULT_SHOTS,
            seed: 0,
            operator: OperatorSpec::Haar { k: n_qubits, seed: 0 },
            task,
            train_fraction: 1.0,
            num_pred: DEFAULT_NUM_PRED,
            readout: DEFAULT_LAMBDA,
            noise: None,
            feature_mode: FeatureMode::Marginal,
        }
    }

    /// Parses config text; relative paths resolve against `base_dir`.
    /// Returns the config and any warnings.
    pub fn parse(text: &str, base_dir: &Path) -> Result<(Self, Vec<String>)> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Parse(e.message().to_string()))?;
        let mut warnings = Vec::new();
        for key in table.keys() {
            if !KEYS.contains(&key.as_str()) {
                return Err(Error::config(key, "unknown key"));
            }
        }

        let scheme = match opt_str(&table, "scheme")?.as_deref() {
            None | Some("static") => SchemeKind::Static,
            Some("incremental") => SchemeKind::Incremental,
            Some(other) => {
                return Err(Error::config("scheme", format!("expected static or incremental, got `{other}`")))
            }
        };
        let n_qubits = opt_uint(&table, "n_qubits")?
            .ok_or_else(|| Error::config("n_qubits", "required"))?;
        if !(1..=crate::sim::MAX_QUBITS as u64).contains(&n_qubits) {
            return Err(Error::config("n_qubits", format!("must be in 1..={}", crate::sim::MAX_QUBITS)));
        }
        let n_qubits = n_qubits as usize;

        let memory = match opt_uint(&table, "memory")? {
            Some(m) if scheme == SchemeKind::Static => {
                warnings.push(format!("`memory` = {m} is ignored by the static scheme"));
                DEFAULT_MEMORY
            }
            Some(0) => return Err(Error::config("memory", "must be at least 1")),
            Some(m) => m as usize,
            None => DEFAULT_MEMORY,
        };
        let shots = match opt_uint(&table, "shots")? {
            Some(0) => return Err(Error::config("shots", "must be at least 1")),
            Some(s) => s as usize,
            None => DEFAULT_SHOTS,
        };
        let seed = opt_uint(&table, "seed")?.unwrap_or(0);

        let operator = match opt_str(&table, "operator")? {
            None => OperatorSpec::Haar { k: n_qubits, seed },
            Some(s) => parse_operator(&s, base_dir)?,
        };
        if let OperatorSpec::Haar { k, .. } = operator {
            if k == 0 || k > n_qubits || k > MAX_HAAR_QUBITS {
                return Err(Error::config(
                    "operator",
                    format!("haar width {k} must be in 1..={}", n_qubits.min(MAX_HAAR_QUBITS)),
                ));
            }
        }

        let task = match opt_str(&table, "task")? {
            None => return Err(Error::config("task", "required")),
            Some(s) => parse_task(&s, base_dir)?,
        };

        let train_fraction = opt_float(&table, "train_fraction")?.unwrap_or(1.0);
        if !(train_fraction > 0.0 && train_fraction <= 1.0) {
            return Err(Error::config("train_fraction", "must be in (0, 1]"));
        }
        let num_pred = match opt_uint(&table, "num_pred")? {
            Some(0) => return Err(Error::config("num_pred", "must be at least 1")),
            Some(n) => n as usize,
            None => DEFAULT_NUM_PRED,
        };
        let readout = opt_float(&table, "readout")?.unwrap_or(DEFAULT_LAMBDA);
        if !readout.is_finite() || readout < 0.0 {
            return Err(Error::config("readout", "ridge lambda must be a finite value >= 0"));
        }
        let noise = match opt_str(&table, "noise")?.as_deref() {
            None | Some("none") => None,
            Some(s) => {
                let args = call_args(s, "depolarizing")
                    .ok_or_else(|| Error::config("noise", format!("expected none or depolarizing(p), got `{s}`")))?;
                let p = single_float(&args).ok_or_else(|| Error::config("noise", "depolarizing takes one probability"))?;
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::config("noise", "probability must be in [0, 1]"));
                }
                Some(p)
            }
        };
        let feature_mode = match opt_str(&table, "feature_mode")?.as_deref() {
            None | Some("marginal") => FeatureMode::Marginal,
            Some("distribution") => FeatureMode::Distribution,
            Some(other) => {
                return Err(Error::config("feature_mode", format!("expected marginal or distribution, got `{other}`")))
            }
        };

        Ok((
            Self {
                scheme,
                n_qubits,
                memory,
                shots,
                seed,
                operator,
                task,
                train_fraction,
                num_pred,
                readout,
                noise,
                feature_mode,
            },
            warnings,
        ))
    }

    /// Every key with its resolved value, in the input syntax.
    pub fn to_toml(&self) -> String {
        let mut out = String::new();
        let scheme = match self.scheme {
            SchemeKind::Static => "static",
            SchemeKind::Incremental => "incremental",
        };
        let _ = writeln!(out, "scheme = \"{scheme}\"");
        let _ = writeln!(out, "n_qubits = {}", self.n_qubits);
        if self.scheme == SchemeKind::Incremental {
            let _ = writeln!(out, "memory = {}", self.memory);
        }
        let _ = writeln!(out, "shots = {}", self.shots);
        let _ = writeln!(out, "seed = {}", self.seed);
        let operator = match &self.operator {
            OperatorSpec::Haar { k, seed } => format!("haar({k}, {seed})"),
            OperatorSpec::File(p) => p.display().to_string(),
        };
        let _ = writeln!(out, "operator = {}", toml_str(&operator));
        let task = match &self.task {
            TaskSpec::BinaryPeriodic { period, length } => format!("binary_periodic({period}, {length})"),
            TaskSpec::Sine { period, length, samples } => format!("sine({period:?}, {length}, {samples})"),
            TaskSpec::File(p) => p.display().to_string(),
        };
        let _ = writeln!(out, "task = {}", toml_str(&task));
        let _ = writeln!(out, "train_fraction = {:?}", self.train_fraction);
        let _ = writeln!(out, "num_pred = {}", self.num_pred);
        let _ = writeln!(out, "readout = {:?}", self.readout);
        let noise = match self.noise {
            None => "none".to_string(),
            Some(p) => format!("depolarizing({p:?})"),
        };
        let _ = writeln!(out, "noise = \"{noise}\"");
        let mode = match self.feature_mode {
            FeatureMode::Marginal => "marginal",
            FeatureMode::Distribution => "distribution",
        };
        let _ = writeln!(out, "feature_mode = \"{mode}\"");
        out
    }

    fn run_options(&self) -> RunOptions {
        RunOptions::new(self.shots, self.seed).with_noise(self.noise)
    }
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn opt_str(table: &toml::Table, key: &str) -> Result<Option<String>> {
    match table.get(key) {
        None => Ok(None),
        Some(toml::Value::String(s)) => Ok(Some(s.trim().to_string())),
        Some(_) => Err(Error::config(key, "expected a string")),
    }
}

fn opt_uint(table: &toml::Table, key: &str) -> Result<Option<u64>> {
    match table.get(key) {
        None => Ok(None),
        Some(toml::Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
        Some(toml::Value::Integer(_)) => Err(Error::config(key, "must be non-negative")),
        Some(_) => Err(Error::config(key, "expected an integer")),
    }
}

fn opt_float(table: &toml::Table, key: &str) -> Result<Option<f64>> {
    match table.get(key) {
        None => Ok(None),
        Some(toml::Value::Float(f)) => Ok(Some(*f)),
        Some(toml::Value::Integer(i)) => Ok(Some(*i as f64)),
        Some(_) => Err(Error::config(key, "expected a number")),
    }
}

/// `name(a, b, ...)` → `["a", "b", ...]`.
fn call_args(s: &str, name: &str) -> Option<Vec<String>> {
    let rest = s.strip_prefix(name)?.trim_start();
    let inner = rest.strip_prefix('(')?.strip_suffix(')')?;
    Some(inner.split(',').map(|a| a.trim().to_string()).collect())
}

fn single_float(args: &[String]) -> Option<f64> {
    match args {
        [a] => a.parse().ok(),
        _ => None,
    }
}

fn resolve(base_dir: &Path, s: &str) -> PathBuf {
    let p = PathBuf::from(s);
    if p.is_absolute() {
        p
    } else {
        base_dir.join(p)
    }
}

fn parse_operator(s: &str, base_dir: &Path) -> Result<OperatorSpec> {
    if let Some(args) = call_args(s, "haar") {
        let bad = || Error::config("operator", "expected haar(k, seed)");
        if args.len() != 2 {
            return Err(bad());
        }
        let k = args[0].parse().map_err(|_| bad())?;
        let seed = args[1].parse().map_err(|_| bad())?;
        return Ok(OperatorSpec::Haar { k, seed });
    }
    let path = resolve(base_dir, s);
    if !path.is_file() {
        return Err(Error::config("operator", format!("matrix file {} not found", path.display())));
    }
    Ok(OperatorSpec::File(path))
}

fn parse_task(s: &str, base_dir: &Path) -> Result<TaskSpec> {
    if let Some(args) = call_args(s, "binary_periodic") {
        let bad = || Error::config("task", "expected binary_periodic(period, length) with period >= 2, length >= 2");
        if args.len() != 2 {
            return Err(bad());
        }
        let period: usize = args[0].parse().map_err(|_| bad())?;
        let length: usize = args[1].parse().map_err(|_| bad())?;
        if period < 2 || length < 2 {
            return Err(bad());
        }
        return Ok(TaskSpec::BinaryPeriodic { period, length });
    }
    if let Some(args) = call_args(s, "sine") {
        let bad = || Error::config("task", "expected sine(period, length, samples) with period > 0, length >= 2");
        if args.len() != 3 {
            return Err(bad());
        }
        let period: f64 = args[0].parse().map_err(|_| bad())?;
        let length: usize = args[1].parse().map_err(|_| bad())?;
        let samples: usize = args[2].parse().map_err(|_| bad())?;
        if period.is_nan() || period <= 0.0 || length < 2 || samples == 1 {
            return Err(bad());
        }
        return Ok(TaskSpec::Sine { period, length, samples });
    }
    let path = resolve(base_dir, s);
    if !path.is_file() {
        return Err(Error::config("task", format!("series file {} not found", path.display())));
    }
    Ok(TaskSpec::File(path))
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<(ExperimentConfig, Vec<String>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    ExperimentConfig::parse(&text, base)
}

/// Parses a unitary from text: one matrix row per line, entries separated
/// by whitespace, each a real number or `re±imi`. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_matrix(text: &str) -> Result<UnitaryMatrix> {
    let rows: Vec<Vec<Complex64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(parse_complex).collect())
        .collect::<Result<_>>()?;
    let d = rows.len();
    if d < 2 || !d.is_power_of_two() || rows.iter().any(|r| r.len() != d) {
        return Err(Error::Parse(format!("matrix must be square with 2^k rows, got {d} rows")));
    }
    UnitaryMatrix::new(d.trailing_zeros() as usize, rows.into_iter().flatten().collect())
}

fn parse_complex(tok: &str) -> Result<Complex64> {
    let bad = || Error::Parse(format!("bad matrix entry `{tok}`"));
    if let Some(body) = tok.strip_suffix('i') {
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'))
            .ok_or_else(bad)?;
        let re: f64 = body[..split].parse().map_err(|_| bad())?;
        let im: f64 = body[split..].parse().map_err(|_| bad())?;
        Ok(Complex64::new(re, im))
    } else {
        tok.parse().map(|re| Complex64::new(re, 0.0)).map_err(|_| bad())
    }
}

/// A generated or loaded series, plus how to encode and decode it.
#[derive(Debug, Clone)]
pub struct TaskSeries {
    /// Known values; generated tasks extend past the configured length on
    /// request.
    pub values: Vec<f64>,
    pub kind: SeriesKind,
}

#[derive(Debug, Clone)]
pub enum SeriesKind {
    Symbols(Alphabet<f64>),
    /// Real values in `[0, 1]`; decoded outputs snap to `levels` evenly
    /// spaced values when given.
    Real { levels: Option<usize> },
}

impl SeriesKind {
    pub fn is_discrete(&self) -> bool {
        match self {
            SeriesKind::Symbols(_) => true,
            SeriesKind::Real { levels } => levels.is_some(),
        }
    }

    pub fn target(&self, x: f64) -> Result<Vec<f64>> {
        match self {
            SeriesKind::Symbols(a) => a.target(&x),
            SeriesKind::Real { .. } => Ok(vec![x]),
        }
    }

    pub fn decode(&self, y: &[f64]) -> Result<f64> {
        match self {
            SeriesKind::Symbols(a) => decode_symbol(y, a),
            SeriesKind::Real { levels } => {
                let v = *y
                    .first()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::Decode(format!("cannot decode {y:?}")))?;
                let v = v.clamp(0.0, 1.0);
                Ok(match levels {
                    Some(l) => snap(v, *l),
                    None => v,
                })
            }
        }
    }

    fn data_qubits(&self) -> usize {
        match self {
            SeriesKind::Symbols(a) => a.k_qubits(),
            SeriesKind::Real { .. } => 1,
        }
    }

    fn encode(&self, x: f64) -> Result<Vec<Complex64>> {
        match self {
            SeriesKind::Symbols(a) => encode_basis(&x, a),
            SeriesKind::Real { .. } => encode_angle(x),
        }
    }
}

fn snap(v: f64, levels: usize) -> f64 {
    let steps = (levels - 1) as f64;
    (v * steps).round() / steps
}

impl TaskSpec {
    /// First `n` values of a generated task. Not available for files.
    pub fn generate(&self, n: usize) -> Option<Vec<f64>> {
        match *self {
            TaskSpec::BinaryPeriodic { period, .. } => {
                let zeros = period / 2;
                Some((0..n).map(|t| if t % period < zeros { 0.0 } else { 1.0 }).collect())
            }
            TaskSpec::Sine { period, samples, .. } => Some(
                (0..n)
                    .map(|t| {
                        let v = 0.5 + 0.5 * (2.0 * PI * t as f64 / period).sin();
                        if samples >= 2 {
                            snap(v, samples)
                        } else {
                            v
                        }
                    })
                    .collect(),
            ),
            TaskSpec::File(_) => None,
        }
    }

    pub fn load(&self) -> Result<TaskSeries> {
        match self {
            TaskSpec::BinaryPeriodic { length, .. } => Ok(TaskSeries {
                values: self.generate(*length).unwrap(),
                kind: SeriesKind::Symbols(Alphabet::new(vec![0.0, 1.0])?),
            }),
            TaskSpec::Sine { length, samples, .. } => Ok(TaskSeries {
                values: self.generate(*length).unwrap(),
                kind: SeriesKind::Real {
                    levels: (*samples >= 2).then_some(*samples),
                },
            }),
            TaskSpec::File(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                let mut values = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    let line = line.trim();
                    if line.is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let field = line.split(',').next_back().unwrap_or(line).trim();
                    match field.parse::<f64>() {
                        Ok(v) if v.is_finite() => values.push(v),
                        _ if values.is_empty() && i == 0 => {} // header
                        _ => return Err(Error::Parse(format!("{}:{}: bad value `{field}`", path.display(), i + 1))),
                    }
                }
                if values.len() < 2 {
                    return Err(Error::Parse(format!("{}: need at least two values", path.display())));
                }
                let kind = if values.iter().all(|v| v.fract() == 0.0) {
                    let mut symbols = values.clone();
                    symbols.sort_by(f64::total_cmp);
                    symbols.dedup();
                    SeriesKind::Symbols(Alphabet::new(symbols)?)
                } else {
                    SeriesKind::Real { levels: None }
                };
                Ok(TaskSeries { values, kind })
            }
        }
    }
}

/// Reservoir used by the experiment runner.
///
/// `during(x)` prepares the encoded value on the data qubits (basis
/// encoding for symbols, angle encoding on qubit 0 for reals) and applies
/// the fixed operator to the first `k` qubits. The static variant then
/// measures every qubit; the incremental variant starts with a Hadamard
/// layer and measures every qubit once in `after`.
#[derive(Debug, Clone)]
pub struct OperatorReservoir {
    pub n_qubits: usize,
    pub operator: Arc<UnitaryMatrix>,
    pub kind: SeriesKind,
    pub scheme: SchemeKind,
}

impl OperatorReservoir {
    pub fn new(n_qubits: usize, operator: UnitaryMatrix, kind: SeriesKind, scheme: SchemeKind) -> Result<Self> {
        if operator.k_qubits() > n_qubits {
            return Err(Error::Validation(format!(
                "{}-qubit operator on a {n_qubits}-qubit reservoir",
                operator.k_qubits()
            )));
        }
        if kind.data_qubits() > n_qubits {
            return Err(Error::Validation(format!(
                "encoding needs {} qubits but the reservoir has {n_qubits}",
                kind.data_qubits()
            )));
        }
        Ok(Self {
            n_qubits,
            operator: Arc::new(operator),
            kind,
            scheme,
        })
    }
}

impl ReservoirHooks<f64> for OperatorReservoir {
    fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    fn before(&self, circuit: &mut CircuitBuilder) -> Result<()> {
        if self.scheme == SchemeKind::Incremental {
            let all = circuit.qubits();
            circuit.add_h_all(&all)?;
        }
        Ok(())
    }

    fn during(&self, circuit: &mut CircuitBuilder, timestep: &f64) -> Result<()> {
        let data: Vec<usize> = (0..self.kind.data_qubits()).collect();
        let targets: Vec<usize> = (0..self.operator.k_qubits()).collect();
        circuit
            .add_prepare(&self.kind.encode(*timestep)?, &data)?
            .add_shared_unitary("U", self.operator.clone(), &targets)?;
        if self.scheme == SchemeKind::Static {
            circuit.measure_all()?;
        }
        Ok(())
    }

    fn after(&self, circuit: &mut CircuitBuilder) -> Result<()> {
        if self.scheme == SchemeKind::Incremental {
            circuit.measure_all()?;
        }
        Ok(())
    }
}

/// Materializes the configured operator.
pub fn build_operator(config: &ExperimentConfig) -> Result<UnitaryMatrix> {
    match &config.operator {
        OperatorSpec::Haar { k, seed } => haar_random_unitary(*k, &mut RngStream::new(*seed, 0)),
        OperatorSpec::File(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            parse_matrix(&text)
        }
    }
}

/// Summary of a finished experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub train_length: usize,
    pub n_features: usize,
    pub num_pred: usize,
    pub train_mse: f64,
    /// Against the true continuation, when one is known.
    pub mse: Option<f64>,
    pub accuracy: Option<f64>,
}

impl Metrics {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "train_length = {}", self.train_length);
        let _ = writeln!(out, "n_features = {}", self.n_features);
        let _ = writeln!(out, "num_pred = {}", self.num_pred);
        let _ = writeln!(out, "train_mse = {:?}", self.train_mse);
        if let Some(m) = self.mse {
            let _ = writeln!(out, "mse = {m:?}");
        }
        if let Some(a) = self.accuracy {
            let _ = writeln!(out, "accuracy = {a:?}");
        }
        out
    }
}

/// Everything an experiment produces, before it is written to disk.
#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub config: ExperimentConfig,
    pub features: FeatureMatrix,
    pub model: ReadoutModel,
    pub predictions: PredictionRun<f64>,
    /// True continuation aligned with `predictions`, possibly shorter.
    pub truth: Vec<f64>,
    pub metrics: Metrics,
    pub circuit_text: String,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Runs the whole pipeline in memory.
///
/// The readout is trained on pairs `(features_t, x_{t+1})` from the
/// training prefix only; forecasts are then produced autoregressively from
/// that prefix.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let task = stage("task", config.task.load())?;
    let operator = stage("operator", build_operator(config))?;
    let hooks = stage(
        "reservoir",
        OperatorReservoir::new(config.n_qubits, operator, task.kind.clone(), config.scheme),
    )?;

    let train_len = ((task.values.len() as f64 * config.train_fraction).round() as usize).clamp(2, task.values.len());
    let train = &task.values[..train_len];
    let truth: Vec<f64> = match config.task.generate(train_len + config.num_pred) {
        Some(all) => all[train_len..].to_vec(),
        None => task.values[train_len..].iter().take(config.num_pred).copied().collect(),
    };

    let opts = config.run_options();
    let circuit_text = stage("render", render_first_circuit(config, &hooks, train))?;

    let (features, predictions, model, train_mse) = match config.scheme {
        SchemeKind::Static => {
            let reservoir = Static::new(&hooks).with_mode(config.feature_mode);
            train_and_predict(&reservoir, &task.kind, train, config, &opts)?
        }
        SchemeKind::Incremental => {
            let reservoir = Incremental::new(&hooks, config.memory).with_mode(config.feature_mode);
            train_and_predict(&reservoir, &task.kind, train, config, &opts)?
        }
    };

    let n = truth.len().min(predictions.predictions.len());
    let (pred_mse, acc) = if n > 0 {
        let p = &predictions.predictions[..n];
        let t = &truth[..n];
        let acc = if task.kind.is_discrete() { Some(accuracy(t, p)?) } else { None };
        (Some(mse(t, p)?), acc)
    } else {
        (None, None)
    };

    Ok(ExperimentOutput {
        config: config.clone(),
        metrics: Metrics {
            train_length: train_len,
            n_features: features.n_cols(),
            num_pred: predictions.num_pred(),
            train_mse,
            mse: pred_mse,
            accuracy: acc,
        },
        features,
        model,
        predictions,
        truth,
        circuit_text,
    })
}

fn train_and_predict<R: Reservoir<f64>>(
    reservoir: &R,
    kind: &SeriesKind,
    train: &[f64],
    config: &ExperimentConfig,
    opts: &RunOptions,
) -> Result<(FeatureMatrix, PredictionRun<f64>, ReadoutModel, f64)> {
    let features = stage("run", reservoir.run(train, opts))?;
    let x = features.to_matrix().rows(0, train.len() - 1).into_owned();
    let targets: Vec<Vec<f64>> = stage("readout", train[1..].iter().map(|&v| kind.target(v)).collect())?;
    let y = DMatrix::from_fn(targets.len(), targets[0].len(), |r, c| targets[r][c]);
    let model = stage(
        "readout",
        fit_ridge(
            &x,
            &y,
            RidgeConfig {
                lambda: config.readout,
                fit_intercept: true,
            },
        ),
    )?;
    let fitted = model.predict(&x)?;
    let train_mse = mse(y.as_slice(), fitted.as_slice())?;
    let predictions = stage(
        "predict",
        reservoir.predict(&model, |y: &[f64]| kind.decode(y), train, config.num_pred, opts),
    )?;
    Ok((features, predictions, model, train_mse))
}

fn render_first_circuit(config: &ExperimentConfig, hooks: &OperatorReservoir, series: &[f64]) -> Result<String> {
    let circuit = match config.scheme {
        SchemeKind::Static => build_static_circuit(hooks, series)?,
        SchemeKind::Incremental => build_incremental_circuits(hooks, &series[..1], config.memory)?.remove(0),
    };
    Ok(render_text(&circuit))
}

/// Renders the circuit built for the first `steps` series values: the
/// whole static circuit, or the incremental window circuit ending at step
/// `steps`.
pub fn dump_circuit(config: &ExperimentConfig, steps: usize) -> Result<String> {
    let task = stage("task", config.task.load())?;
    let operator = stage("operator", build_operator(config))?;
    let hooks = OperatorReservoir::new(config.n_qubits, operator, task.kind, config.scheme)?;
    let steps = steps.clamp(1, task.values.len());
    let series = &task.values[..steps];
    let circuit = match config.scheme {
        SchemeKind::Static => build_static_circuit(&hooks, series)?,
        SchemeKind::Incremental => build_incremental_circuits(&hooks, series, config.memory)?
            .pop()
            .expect("series is non-empty"),
    };
    Ok(render_text(&circuit))
}

pub const ARTIFACTS: &[&str] = &[
    "features.csv",
    "predictions.csv",
    "metrics.txt",
    "circuit.txt",
    "model.txt",
    "config.resolved.toml",
];

/// Writes the artifacts of `output` into `dir`. On failure, files already
/// written are removed.
pub fn write_artifacts(output: &ExperimentOutput, dir: &Path) -> Result<()> {
    let mut features = Vec::new();
    output.features.write_csv(&mut features)?;
    let mut predictions = Vec::new();
    output.predictions.write_csv(&mut predictions)?;
    let contents: [(&str, Vec<u8>); 6] = [
        ("features.csv", features),
        ("predictions.csv", predictions),
        ("metrics.txt", output.metrics.to_text().into_bytes()),
        ("circuit.txt", output.circuit_text.clone().into_bytes()),
        ("model.txt", output.model.dump().into_bytes()),
        ("config.resolved.toml", output.config.to_toml().into_bytes()),
    ];
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, bytes) in contents {
        let path = dir.join(name);
        if let Err(e) = fs::write(&path, bytes) {
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(Error::Io(format!("{}: {e}", path.display())).in_stage("write"));
        }
        written.push(path);
    }
    Ok(())
}
