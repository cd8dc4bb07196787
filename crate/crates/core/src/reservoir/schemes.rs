use crate::circuit::{execute, Circuit, CircuitBuilder, ExecOptions, ShotBatch};
use crate::readout::Estimator;
use crate::sim::mix_seed;
use crate::{Error, Result};

use super::{FeatureMatrix, PredictionRun, Provenance, Reservoir, ReservoirHooks, RunOptions};

/// Decoded layout of the measured clbits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureMode {
    /// One column per clbit: the frequency of 1.
    #[default]
    Marginal,
    /// Full empirical distribution over the clbits (`2^m` columns).
    Distribution,
}

/// Single circuit `before | during(x_0) | … | during(x_{T-1}) | after`.
///
/// Instructions emitted by `during(x_t)` carry tag `t`. Every `during`
/// block must write the same number of clbits.
pub fn build_static_circuit<X, H>(hooks: &H, series: &[X]) -> Result<Circuit>
where
    H: ReservoirHooks<X> + ?Sized,
{
    if series.is_empty() {
        return Err(Error::Scheme("series is empty".into()));
    }
    let mut b = CircuitBuilder::new(hooks.n_qubits())?;
    hooks.before(&mut b)?;
    let mut per_step = None;
    for (t, x) in series.iter().enumerate() {
        b.set_tag(Some(t));
        let start = b.n_clbits();
        hooks.during(&mut b, x)?;
        let written = b.n_clbits() - start;
        match per_step {
            None => per_step = Some(written),
            Some(w) if w != written => {
                return Err(Error::Scheme(format!(
                    "during wrote {w} clbits at step 0 but {written} at step {t}"
                )))
            }
            _ => {}
        }
    }
    b.set_tag(None);
    hooks.after(&mut b)?;
    let mut circuit = b.build();
    circuit.validate()?;
    Ok(circuit)
}

/// Features from one circuit over the whole series: row `t` holds the
/// shot average of each clbit measured by `during(x_t)`.
pub fn run_static<X, H>(hooks: &H, series: &[X], opts: &RunOptions) -> Result<FeatureMatrix>
where
    H: ReservoirHooks<X> + ?Sized,
{
    run_static_with_mode(hooks, series, FeatureMode::Marginal, opts)
}

/// [`run_static`] with a choice of decoded layout. In distribution mode
/// row `t` is the empirical joint distribution of the clbits of step `t`.
pub fn run_static_with_mode<X, H>(
    hooks: &H,
    series: &[X],
    mode: FeatureMode,
    opts: &RunOptions,
) -> Result<FeatureMatrix>
where
    H: ReservoirHooks<X> + ?Sized,
{
    if series.is_empty() {
        return Err(Error::Scheme("series is empty".into()));
    }
    if ShotBatch::footprint(hooks.n_qubits(), opts.shots) > SESSION_BUDGET {
        return run_static_whole(hooks, series, mode, opts);
    }
    let mut session = StaticSession::start(hooks, mode, opts)?;
    let rows = series.iter().map(|x| session.push(x)).collect::<Result<_>>()?;
    // `after` cannot change earlier outcomes, but its hook errors still count
    let mut b = CircuitBuilder::new(hooks.n_qubits())?;
    hooks.after(&mut b)?;
    FeatureMatrix::from_rows(rows, Provenance::Static)
}

fn run_static_whole<X, H>(hooks: &H, series: &[X], mode: FeatureMode, opts: &RunOptions) -> Result<FeatureMatrix>
where
    H: ReservoirHooks<X> + ?Sized,
{
    let circuit = build_static_circuit(hooks, series)?;
    if circuit.clbits_for_tag(0).is_empty() {
        return Err(no_measurement());
    }
    let table = execute(
        &circuit,
        &ExecOptions::new(opts.shots, opts.seed)
            .with_noise(opts.noise)
            .with_raw(mode == FeatureMode::Distribution),
    )?;
    let rows = (0..series.len())
        .map(|t| {
            let clbits = circuit.clbits_for_tag(t);
            Ok(match mode {
                FeatureMode::Marginal => clbits.iter().map(|&c| table.mean(c)).collect(),
                FeatureMode::Distribution => frequencies(table.joint_counts(&clbits)?, opts.shots),
            })
        })
        .collect::<Result<_>>()?;
    FeatureMatrix::from_rows(rows, Provenance::Static)
}

fn no_measurement() -> Error {
    Error::Scheme("static scheme needs a measurement in `during`".into())
}

fn frequencies(counts: Vec<u64>, shots: usize) -> Vec<f64> {
    counts.into_iter().map(|n| n as f64 / shots as f64).collect()
}

/// Live trajectories above this many bytes fall back to whole-circuit
/// execution.
const SESSION_BUDGET: usize = 256 << 20;

/// The static circuit fed one `during` block at a time. Each shot keeps
/// its state and random stream, so the rows equal those of the whole
/// circuit executed at once.
struct StaticSession<'a, H: ?Sized> {
    hooks: &'a H,
    builder: CircuitBuilder,
    batch: ShotBatch,
    mode: FeatureMode,
    shots: usize,
    t: usize,
    width: Option<usize>,
}

impl<'a, H: ?Sized> StaticSession<'a, H> {
    fn start<X>(hooks: &'a H, mode: FeatureMode, opts: &RunOptions) -> Result<Self>
    where
        H: ReservoirHooks<X>,
    {
        let n = hooks.n_qubits();
        let mut builder = CircuitBuilder::new(n)?;
        hooks.before(&mut builder)?;
        let mut batch = ShotBatch::new(n, &ExecOptions::new(opts.shots, opts.seed).with_noise(opts.noise))?;
        checked_segment(&builder, 0)?;
        batch.run(builder.instructions(), &[]);
        Ok(Self {
            hooks,
            builder,
            batch,
            mode,
            shots: opts.shots,
            t: 0,
            width: None,
        })
    }

    fn push<X>(&mut self, x: &X) -> Result<Vec<f64>>
    where
        H: ReservoirHooks<X>,
    {
        let (first, c0) = (self.builder.instructions().len(), self.builder.n_clbits());
        self.builder.set_tag(Some(self.t));
        let res = self.hooks.during(&mut self.builder, x);
        self.builder.set_tag(None);
        res?;
        let clbits: Vec<usize> = (c0..self.builder.n_clbits()).collect();
        match self.width {
            None if clbits.is_empty() => return Err(no_measurement()),
            None => self.width = Some(clbits.len()),
            Some(w) if w != clbits.len() => {
                return Err(Error::Scheme(format!(
                    "during wrote {w} clbits at step 0 but {} at step {}",
                    clbits.len(),
                    self.t
                )))
            }
            _ => {}
        }
        checked_segment(&self.builder, first)?;
        let bits = self.batch.run(&self.builder.instructions()[first..], &clbits);
        self.t += 1;
        let w = clbits.len();
        Ok(match self.mode {
            FeatureMode::Marginal => (0..w)
                .map(|j| bits.iter().skip(j).step_by(w).map(|&b| b as u64).sum::<u64>() as f64 / self.shots as f64)
                .collect(),
            FeatureMode::Distribution => {
                let mut hist = vec![0u64; 1 << w];
                for row in bits.chunks_exact(w) {
                    let idx = row.iter().enumerate().fold(0usize, |acc, (j, &b)| acc | (b as usize) << j);
                    hist[idx] += 1;
                }
                frequencies(hist, self.shots)
            }
        })
    }
}

/// Validates the instructions appended since `first`.
fn checked_segment(builder: &CircuitBuilder, first: usize) -> Result<()> {
    let seg = builder.instructions()[first..].to_vec();
    Circuit::from_parts(builder.n_qubits(), builder.n_clbits(), seg).validate()
}

/// Index range of the window ending at `t` (inclusive).
fn window(t: usize, memory: usize) -> std::ops::Range<usize> {
    (t + 1).saturating_sub(memory)..t + 1
}

struct WindowCircuit {
    circuit: Circuit,
    after_clbits: Vec<usize>,
}

fn build_window<X, H>(hooks: &H, series: &[X], range: std::ops::Range<usize>) -> Result<WindowCircuit>
where
    H: ReservoirHooks<X> + ?Sized,
{
    let mut b = CircuitBuilder::new(hooks.n_qubits())?;
    hooks.before(&mut b)?;
    for t in range {
        b.set_tag(Some(t));
        hooks.during(&mut b, &series[t])?;
    }
    b.set_tag(None);
    let start = b.n_clbits();
    hooks.after(&mut b)?;
    let after_clbits = (start..b.n_clbits()).collect();
    let mut circuit = b.build();
    circuit.validate()?;
    Ok(WindowCircuit {
        circuit,
        after_clbits,
    })
}

/// One circuit per timestep `t`, covering `x_{t-memory+1} … x_t` (clipped
/// at the start of the series). Each starts from `|0…0⟩`.
pub fn build_incremental_circuits<X, H>(hooks: &H, series: &[X], memory: usize) -> Result<Vec<Circuit>>
where
    H: ReservoirHooks<X> + ?Sized,
{
    if memory == 0 {
        return Err(Error::Validation("memory must be at least 1".into()));
    }
    (0..series.len())
        .map(|t| build_window(hooks, series, window(t, memory)).map(|w| w.circuit))
        .collect()
}

/// Features from the moving-window circuits, decoded from the clbits that
/// `after` measures. Window `t` runs with a seed derived from
/// `(opts.seed, t)`, so its row depends only on the inputs inside it.
pub fn run_incremental<X, H>(
    hooks: &H,
    series: &[X],
    memory: usize,
    mode: FeatureMode,
    opts: &RunOptions,
) -> Result<FeatureMatrix>
where
    H: ReservoirHooks<X> + ?Sized,
{
    if memory == 0 {
        return Err(Error::Validation("memory must be at least 1".into()));
    }
    if series.is_empty() {
        return Err(Error::Scheme("series is empty".into()));
    }
    let mut rows = Vec::with_capacity(series.len());
    let mut width = None;
    for t in 0..series.len() {
        let w = build_window(hooks, series, window(t, memory))?;
        if w.after_clbits.is_empty() {
            return Err(Error::Scheme(
                "incremental scheme needs a measurement in `after`".into(),
            ));
        }
        match width {
            None => width = Some(w.after_clbits.len()),
            Some(m) if m != w.after_clbits.len() => {
                return Err(Error::Scheme(format!(
                    "after measured {m} clbits in window 0 but {} in window {t}",
                    w.after_clbits.len()
                )))
            }
            _ => {}
        }
        let exec = ExecOptions::new(opts.shots, mix_seed(opts.seed, t as u64))
            .with_noise(opts.noise)
            .with_raw(mode == FeatureMode::Distribution);
        let table = execute(&w.circuit, &exec)?;
        let row = match mode {
            FeatureMode::Marginal => w.after_clbits.iter().map(|&c| table.mean(c)).collect(),
            FeatureMode::Distribution => table
                .joint_counts(&w.after_clbits)?
                .into_iter()
                .map(|n| n as f64 / opts.shots as f64)
                .collect(),
        };
        rows.push(row);
    }
    FeatureMatrix::from_rows(rows, Provenance::Incremental)
}

/// Prepackaged repeated-measurement reservoir: one circuit for the whole
/// series, measurements in `during`.
#[derive(Debug, Clone)]
pub struct Static<H> {
    pub hooks: H,
    pub mode: FeatureMode,
}

impl<H> Static<H> {
    pub fn new(hooks: H) -> Self {
        Self {
            hooks,
            mode: FeatureMode::Marginal,
        }
    }

    pub fn with_mode(mut self, mode: FeatureMode) -> Self {
        self.mode = mode;
        self
    }
}

impl<X: Clone, H: ReservoirHooks<X>> Reservoir<X> for Static<H> {
    fn run(&self, series: &[X], opts: &RunOptions) -> Result<FeatureMatrix> {
        run_static_with_mode(&self.hooks, series, self.mode, opts)
    }

    /// Same result as re-running the circuit for every step; the live
    /// trajectories are extended instead when they fit in memory.
    fn predict<E, D>(
        &self,
        model: &E,
        decode: D,
        from_series: &[X],
        num_pred: usize,
        opts: &RunOptions,
    ) -> Result<PredictionRun<X>>
    where
        E: Estimator + ?Sized,
        D: Fn(&[f64]) -> Result<X>,
    {
        super::check_predict_args(from_series, num_pred)?;
        if ShotBatch::footprint(self.hooks.n_qubits(), opts.shots) > SESSION_BUDGET {
            return super::predict(|s: &[X]| self.run(s, opts), model, decode, from_series, num_pred);
        }
        let mut session = StaticSession::start(&self.hooks, self.mode, opts)?;
        let mut last = Vec::new();
        for x in from_series {
            last = session.push(x)?;
        }
        let mut b = CircuitBuilder::new(self.hooks.n_qubits())?;
        self.hooks.after(&mut b)?;
        super::predict_with(
            |next: Option<&X>| match next {
                None => Ok(std::mem::take(&mut last)),
                Some(x) => session.push(x),
            },
            model,
            decode,
            num_pred,
        )
    }
}

/// Prepackaged moving-window reservoir: one circuit per timestep over at
/// most `memory` inputs, measurements in `after`.
#[derive(Debug, Clone)]
pub struct Incremental<H> {
    pub hooks: H,
    pub memory: usize,
    pub mode: FeatureMode,
}

impl<H> Incremental<H> {
    pub fn new(hooks: H, memory: usize) -> Self {
        Self {
            hooks,
            memory,
            mode: FeatureMode::Marginal,
        }
    }

    pub fn with_mode(mut self, mode: FeatureMode) -> Self {
        self.mode = mode;
        self
    }
}

impl<X: Clone, H: ReservoirHooks<X>> Reservoir<X> for Incremental<H> {
    fn run(&self, series: &[X], opts: &RunOptions) -> Result<FeatureMatrix> {
        run_incremental(&self.hooks, series, self.memory, self.mode, opts)
    }
}
