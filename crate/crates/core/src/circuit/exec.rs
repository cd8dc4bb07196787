use std::io::Write;

use rayon::prelude::*;

use super::{Circuit, Instruction, Operation};
use crate::sim::{state_checks, zero_state, RngStream, StateVector};
use crate::{Error, Result};

/// Execution parameters for [`execute`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExecOptions {
    pub shots: usize,
    pub seed: u64,
    /// Depolarizing probability applied to every target after each unitary.
    pub noise: Option<f64>,
    /// Keep the per-shot bit matrix in the returned table.
    pub keep_raw: bool,
}

impl ExecOptions {
    pub fn new(shots: usize, seed: u64) -> Self {
        Self {
            shots,
            seed,
            noise: None,
            keep_raw: false,
        }
    }

    pub fn with_noise(mut self, noise: Option<f64>) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_raw(mut self, keep_raw: bool) -> Self {
        self.keep_raw = keep_raw;
        self
    }
}

/// Aggregated measurement record of an execution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotTable {
    shots: usize,
    n_clbits: usize,
    counts: Vec<u64>,
    raw: Option<Vec<Vec<u8>>>,
}

impl ShotTable {
    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn n_clbits(&self) -> usize {
        self.n_clbits
    }

    /// Number of shots in which each clbit read 1.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn mean(&self, clbit: usize) -> f64 {
        self.counts[clbit] as f64 / self.shots as f64
    }

    /// Per-shot bits, `raw[shot][clbit]`, when requested at execution.
    pub fn raw(&self) -> Option<&[Vec<u8>]> {
        self.raw.as_deref()
    }

    /// Histogram over the joint outcomes of `clbits` (bit `j` of the index
    /// is `clbits[j]`). Needs the raw matrix.
    pub fn joint_counts(&self, clbits: &[usize]) -> Result<Vec<u64>> {
        let raw = self
            .raw
            .as_ref()
            .ok_or_else(|| Error::Validation("joint counts need the raw shot matrix".into()))?;
        let mut hist = vec![0u64; 1 << clbits.len()];
        for shot in raw {
            let idx = clbits
                .iter()
                .enumerate()
                .fold(0usize, |acc, (j, &c)| acc | (shot[c] as usize) << j);
            hist[idx] += 1;
        }
        Ok(hist)
    }

    /// Raw shot dump: header `shot,c0,c1,...`, one row per shot.
    pub fn write_raw_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let raw = self
            .raw
            .as_ref()
            .ok_or_else(|| Error::Validation("no raw shot matrix recorded".into()))?;
        let mut header = String::from("shot");
        for c in 0..self.n_clbits {
            header.push_str(&format!(",c{c}"));
        }
        writeln!(out, "{header}")?;
        for (shot, bits) in raw.iter().enumerate() {
            let mut line = shot.to_string();
            for b in bits {
                line.push(',');
                line.push(if *b == 1 { '1' } else { '0' });
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Runs `opts.shots` independent trajectories of a validated circuit.
///
/// Shot `s` draws from `RngStream::new(opts.seed, s)`; counts are integer
/// sums, so the table is identical for any thread count.
pub fn execute(circuit: &Circuit, opts: &ExecOptions) -> Result<ShotTable> {
    if !circuit.is_validated() {
        return Err(Error::Unvalidated);
    }
    if opts.shots == 0 {
        return Err(Error::Validation("shots must be at least 1".into()));
    }
    if let Some(p) = opts.noise {
        state_checks::probability(p)?;
    }

    // Everything before the first stochastic instruction is the same for
    // every shot.
    let mut prefix = zero_state(circuit.n_qubits())?;
    let mut start = 0;
    if opts.noise.is_none() {
        for inst in circuit.instructions() {
            match &inst.op {
                Operation::Unitary { matrix, .. } => {
                    prefix.apply_unitary_unchecked(matrix, &inst.qubits);
                    start += 1;
                }
                _ => break,
            }
        }
    }

    let n_clbits = circuit.n_clbits();
    let run = |shot: usize| {
        let mut rng = RngStream::new(opts.seed, shot as u64);
        run_trajectory(circuit, prefix.clone(), start, opts.noise, &mut rng)
    };

    let (counts, raw) = if opts.keep_raw {
        let raw: Vec<Vec<u8>> = (0..opts.shots).into_par_iter().map(run).collect();
        let mut counts = vec![0u64; n_clbits];
        for bits in &raw {
            for (c, b) in counts.iter_mut().zip(bits) {
                *c += *b as u64;
            }
        }
        (counts, Some(raw))
    } else {
        let counts = (0..opts.shots)
            .into_par_iter()
            .fold(
                || vec![0u64; n_clbits],
                |mut acc, shot| {
                    for (c, b) in acc.iter_mut().zip(run(shot)) {
                        *c += b as u64;
                    }
                    acc
                },
            )
            .reduce(
                || vec![0u64; n_clbits],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        (counts, None)
    };

    Ok(ShotTable {
        shots: opts.shots,
        n_clbits,
        counts,
        raw,
    })
}

fn run_trajectory(
    circuit: &Circuit,
    mut state: StateVector,
    start: usize,
    noise: Option<f64>,
    rng: &mut RngStream,
) -> Vec<u8> {
    let mut bits = vec![0u8; circuit.n_clbits()];
    for inst in &circuit.instructions()[start..] {
        if let Some(outcome) = step(&mut state, inst, noise, rng) {
            for (j, &c) in inst.clbits.iter().enumerate() {
                bits[c] = (outcome >> j & 1) as u8;
            }
        }
    }
    bits
}

/// Applies one instruction; returns the local outcome of a measurement.
fn step(state: &mut StateVector, inst: &Instruction, noise: Option<f64>, rng: &mut RngStream) -> Option<usize> {
    match &inst.op {
        Operation::Unitary { matrix, .. } => {
            state.apply_unitary_unchecked(matrix, &inst.qubits);
            if let Some(p) = noise {
                for &q in &inst.qubits {
                    state.depolarize_unchecked(q, p, rng);
                }
            }
        }
        Operation::Prepare { amps } => state.prepare_unchecked(&inst.qubits, amps, rng),
        Operation::Measure => return Some(state.measure_outcome(&inst.qubits, rng)),
        Operation::Noise { p } => {
            for &q in &inst.qubits {
                state.depolarize_unchecked(q, *p, rng);
            }
        }
    }
    None
}

/// Live trajectories that can be extended instruction by instruction.
///
/// Shot `s` uses the same stream as in [`execute`], so feeding a circuit
/// in pieces reproduces its shots exactly.
pub(crate) struct ShotBatch {
    states: Vec<StateVector>,
    rngs: Vec<RngStream>,
    noise: Option<f64>,
}

impl ShotBatch {
    /// Bytes held by a batch of `shots` states on `n_qubits`.
    pub(crate) fn footprint(n_qubits: usize, shots: usize) -> usize {
        shots.saturating_mul(16usize.saturating_mul(1 << n_qubits.min(40)))
    }

    pub(crate) fn new(n_qubits: usize, opts: &ExecOptions) -> Result<Self> {
        if opts.shots == 0 {
            return Err(Error::Validation("shots must be at least 1".into()));
        }
        if let Some(p) = opts.noise {
            state_checks::probability(p)?;
        }
        let zero = zero_state(n_qubits)?;
        Ok(Self {
            states: vec![zero; opts.shots],
            rngs: (0..opts.shots as u64).map(|s| RngStream::new(opts.seed, s)).collect(),
            noise: opts.noise,
        })
    }

    /// Runs `insts` on every shot. Returns `clbits` read back per shot,
    /// flattened shot-major; clbits not written here read 0.
    pub(crate) fn run(&mut self, insts: &[Instruction], clbits: &[usize]) -> Vec<u8> {
        let width = clbits.len();
        let mut out = vec![0u8; self.states.len() * width];
        let noise = self.noise;
        let body = |((state, rng), row): ((&mut StateVector, &mut RngStream), &mut [u8])| {
            for inst in insts {
                if let Some(outcome) = step(state, inst, noise, rng) {
                    for (j, c) in inst.clbits.iter().enumerate() {
                        if let Some(k) = clbits.iter().position(|x| x == c) {
                            row[k] = (outcome >> j & 1) as u8;
                        }
                    }
                }
            }
        };
        if width == 0 {
            let mut empty: Vec<[u8; 0]> = vec![[]; self.states.len()];
            self.states
                .par_iter_mut()
                .zip(self.rngs.par_iter_mut())
                .zip(empty.par_iter_mut())
                .for_each(|(sr, row)| body((sr, &mut row[..])));
        } else {
            self.states
                .par_iter_mut()
                .zip(self.rngs.par_iter_mut())
                .zip(out.par_chunks_mut(width))
                .for_each(body);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;

    fn validated(b: CircuitBuilder) -> Circuit {
        let mut c = b.build();
        c.validate().unwrap();
        c
    }

    #[test]
    fn refuses_unvalidated() {
        let mut b = CircuitBuilder::new(1).unwrap();
        b.add_h(0).unwrap();
        let c = b.build();
        assert_eq!(execute(&c, &ExecOptions::new(10, 0)), Err(Error::Unvalidated));
    }

    #[test]
    fn rejects_zero_shots() {
        let c = validated(CircuitBuilder::new(1).unwrap());
        assert!(execute(&c, &ExecOptions::new(0, 0)).is_err());
    }

    #[test]
    fn no_measure_gives_empty_table() {
        let mut b = CircuitBuilder::new(1).unwrap();
        b.add_h(0).unwrap();
        let t = execute(&validated(b), &ExecOptions::new(10, 0)).unwrap();
        assert_eq!(t.n_clbits(), 0);
        assert_eq!(t.shots(), 10);
    }

    #[test]
    fn deterministic_basis_state() {
        let mut b = CircuitBuilder::new(2).unwrap();
        b.add_x(1).unwrap();
        b.measure_all().unwrap();
        let t = execute(&validated(b), &ExecOptions::new(100, 1)).unwrap();
        assert_eq!(t.counts(), &[0, 100]);
    }

    #[test]
    fn raw_csv_dump() {
        let mut b = CircuitBuilder::new(2).unwrap();
        b.add_x(0).unwrap();
        b.measure_all().unwrap();
        let t = execute(&validated(b), &ExecOptions::new(2, 0).with_raw(true)).unwrap();
        let mut buf = Vec::new();
        t.write_raw_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "shot,c0,c1\n0,1,0\n1,1,0\n");
        assert_eq!(t.joint_counts(&[0, 1]).unwrap(), vec![0, 2, 0, 0]);
    }

    #[test]
    fn noise_flips_sometimes() {
        let mut b = CircuitBuilder::new(1).unwrap();
        b.add_x(0).unwrap();
        b.measure(&[0]).unwrap();
        let c = validated(b);
        let clean = execute(&c, &ExecOptions::new(2000, 3)).unwrap();
        assert_eq!(clean.counts(), &[2000]);
        let noisy = execute(&c, &ExecOptions::new(2000, 3).with_noise(Some(0.3))).unwrap();
        // X or Y flips back with probability 0.2
        let flipped = 2000 - noisy.counts()[0];
        assert!((300..500).contains(&flipped), "{flipped}");
        assert!(execute(&c, &ExecOptions::new(10, 3).with_noise(Some(2.0))).is_err());
    }
}
