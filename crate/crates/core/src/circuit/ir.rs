use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::sim::{UnitaryMatrix, MAX_QUBITS, UNITARY_TOL};
use crate::{Error, Result};

/// What an instruction does to the state.
#[derive(Debug, Clone, PartialEq)]
pub enum Operation {
    /// A unitary with a display label (`H`, `CX`, `U`, ...).
    Unitary {
        label: String,
        matrix: Arc<UnitaryMatrix>,
    },
    /// Reset the listed qubits and prepare them in `amps`.
    Prepare { amps: Vec<Complex64> },
    /// Projective measurement into the instruction's clbits.
    Measure,
    /// Explicit depolarizing channel on each listed qubit.
    Noise { p: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub op: Operation,
    pub qubits: Vec<usize>,
    /// Non-empty for measurements only.
    pub clbits: Vec<usize>,
    /// Timestep label of the `during` block that emitted the instruction.
    pub tag: Option<usize>,
}

impl Instruction {
    pub fn is_measure(&self) -> bool {
        matches!(self.op, Operation::Measure)
    }
}

/// A problem found by [`Circuit::violations`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    QubitOutOfRange { instruction: usize, qubit: usize },
    DuplicateQubit { instruction: usize, qubit: usize },
    ClbitOutOfRange { instruction: usize, clbit: usize },
    ClbitRewritten { clbit: usize, first: usize, second: usize },
    ArityMismatch { instruction: usize, detail: String },
    NotUnitary { instruction: usize, error: f64 },
    BadPreparation { instruction: usize, detail: String },
    BadNoise { instruction: usize, p: f64 },
    EmptyMeasure { instruction: usize },
    StrayClbits { instruction: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::QubitOutOfRange { instruction, qubit } => {
                write!(f, "instruction {instruction}: qubit {qubit} out of range")
            }
            Violation::DuplicateQubit { instruction, qubit } => {
                write!(f, "instruction {instruction}: qubit {qubit} listed twice")
            }
            Violation::ClbitOutOfRange { instruction, clbit } => {
                write!(f, "instruction {instruction}: clbit {clbit} out of range")
            }
            Violation::ClbitRewritten { clbit, first, second } => write!(
                f,
                "clbit {clbit} written by instructions {first} and {second}"
            ),
            Violation::ArityMismatch { instruction, detail } => {
                write!(f, "instruction {instruction}: {detail}")
            }
            Violation::NotUnitary { instruction, error } => write!(
                f,
                "instruction {instruction}: payload not unitary (max deviation {error:.3e})"
            ),
            Violation::BadPreparation { instruction, detail } => {
                write!(f, "instruction {instruction}: {detail}")
            }
            Violation::BadNoise { instruction, p } => {
                write!(f, "instruction {instruction}: noise probability {p} outside [0, 1]")
            }
            Violation::EmptyMeasure { instruction } => {
                write!(f, "instruction {instruction}: measurement of no qubits")
            }
            Violation::StrayClbits { instruction } => {
                write!(f, "instruction {instruction}: only measurements write clbits")
            }
        }
    }
}

/// Ordered instruction list over `n_qubits` qubits and `n_clbits`
/// classical bits. Must pass [`Circuit::validate`] before execution.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    n_clbits: usize,
    instructions: Vec<Instruction>,
    validated: bool,
}

impl Circuit {
    /// Assembles a circuit without checking it.
    pub fn from_parts(n_qubits: usize, n_clbits: usize, instructions: Vec<Instruction>) -> Self {
        Self {
            n_qubits,
            n_clbits,
            instructions,
            validated: false,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_clbits(&self) -> usize {
        self.n_clbits
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn is_validated(&self) -> bool {
        self.validated
    }

    /// Clbits written by measurements carrying `tag`, in write order.
    pub fn clbits_for_tag(&self, tag: usize) -> Vec<usize> {
        self.instructions
            .iter()
            .filter(|i| i.is_measure() && i.tag == Some(tag))
            .flat_map(|i| i.clbits.iter().copied())
            .collect()
    }

    /// Clbits written by untagged measurements (`before`/`after`).
    pub fn untagged_clbits(&self) -> Vec<usize> {
        self.instructions
            .iter()
            .filter(|i| i.is_measure() && i.tag.is_none())
            .flat_map(|i| i.clbits.iter().copied())
            .collect()
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            out.push(Violation::ArityMismatch {
                instruction: 0,
                detail: format!("circuit width {} outside 1..={MAX_QUBITS}", self.n_qubits),
            });
        }
        let mut writers: HashMap<usize, usize> = HashMap::new();
        // Shared operator payloads are checked once.
        let mut checked: Vec<*const UnitaryMatrix> = Vec::new();
        for (idx, inst) in self.instructions.iter().enumerate() {
            let mut seen = Vec::with_capacity(inst.qubits.len());
            for &q in &inst.qubits {
                if q >= self.n_qubits {
                    out.push(Violation::QubitOutOfRange { instruction: idx, qubit: q });
                } else if seen.contains(&q) {
                    out.push(Violation::DuplicateQubit { instruction: idx, qubit: q });
                }
                seen.push(q);
            }
            if !inst.is_measure() && !inst.clbits.is_empty() {
                out.push(Violation::StrayClbits { instruction: idx });
            }
            match &inst.op {
                Operation::Unitary { matrix, .. } => {
                    if matrix.k_qubits() != inst.qubits.len() {
                        out.push(Violation::ArityMismatch {
                            instruction: idx,
                            detail: format!(
                                "{}-qubit unitary on {} qubits",
                                matrix.k_qubits(),
                                inst.qubits.len()
                            ),
                        });
                    }
                    let ptr = Arc::as_ptr(matrix);
                    if !checked.contains(&ptr) {
                        checked.push(ptr);
                        let err = matrix.unitarity_error();
                        if err.is_nan() || err > UNITARY_TOL {
                            out.push(Violation::NotUnitary { instruction: idx, error: err });
                        }
                    }
                }
                Operation::Prepare { amps } => {
                    if inst.qubits.is_empty() {
                        out.push(Violation::BadPreparation {
                            instruction: idx,
                            detail: "preparation of no qubits".into(),
                        });
                    } else if let Err(e) =
                        crate::sim::state_checks::prepare_target(inst.qubits.len(), amps)
                    {
                        out.push(Violation::BadPreparation {
                            instruction: idx,
                            detail: e.to_string(),
                        });
                    }
                }
                Operation::Measure => {
                    if inst.qubits.is_empty() {
                        out.push(Violation::EmptyMeasure { instruction: idx });
                    }
                    if inst.qubits.len() != inst.clbits.len() {
                        out.push(Violation::ArityMismatch {
                            instruction: idx,
                            detail: format!(
                                "{} qubits measured into {} clbits",
                                inst.qubits.len(),
                                inst.clbits.len()
                            ),
                        });
                    }
                    for &c in &inst.clbits {
                        if c >= self.n_clbits {
                            out.push(Violation::ClbitOutOfRange { instruction: idx, clbit: c });
                        } else if let Some(&first) = writers.get(&c) {
                            out.push(Violation::ClbitRewritten { clbit: c, first, second: idx });
                        } else {
                            writers.insert(c, idx);
                        }
                    }
                }
                Operation::Noise { p } => {
                    if !(0.0..=1.0).contains(p) {
                        out.push(Violation::BadNoise { instruction: idx, p: *p });
                    }
                }
            }
        }
        out
    }

    /// Checks the circuit and marks it executable.
    pub fn validate(&mut self) -> Result<()> {
        let violations = self.violations();
        if violations.is_empty() {
            self.validated = true;
            Ok(())
        } else {
            self.validated = false;
            let text: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
            Err(Error::Validation(text.join("; ")))
        }
    }
}

/// Instruction-appending surface handed to reservoir hooks.
///
/// Gate methods check indices and payloads eagerly and return the builder
/// so calls can be chained with `?`.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    n_qubits: usize,
    n_clbits: usize,
    instructions: Vec<Instruction>,
    written: Vec<bool>,
    tag: Option<usize>,
}

impl CircuitBuilder {
    pub fn new(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "circuit must have 1..={MAX_QUBITS} qubits, got {n_qubits}"
            )));
        }
        Ok(Self {
            n_qubits,
            n_clbits: 0,
            instructions: Vec::new(),
            written: Vec::new(),
            tag: None,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_clbits(&self) -> usize {
        self.n_clbits
    }

    /// All qubit indices, `0..n_qubits`.
    pub fn qubits(&self) -> Vec<usize> {
        (0..self.n_qubits).collect()
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub(crate) fn set_tag(&mut self, tag: Option<usize>) {
        self.tag = tag;
    }

    fn check_targets(&self, targets: &[usize]) -> Result<()> {
        for (i, &q) in targets.iter().enumerate() {
            if q >= self.n_qubits {
                return Err(Error::Index(format!(
                    "qubit {q} out of range for {} qubits",
                    self.n_qubits
                )));
            }
            if targets[..i].contains(&q) {
                return Err(Error::Index(format!("qubit {q} listed twice")));
            }
        }
        Ok(())
    }

    fn push(&mut self, op: Operation, qubits: Vec<usize>, clbits: Vec<usize>) {
        self.instructions.push(Instruction {
            op,
            qubits,
            clbits,
            tag: self.tag,
        });
    }

    /// Appends an arbitrary unitary (checked to `1e-10`).
    pub fn add_unitary(&mut self, u: UnitaryMatrix, targets: &[usize]) -> Result<&mut Self> {
        u.validate()?;
        self.add_shared_unitary("U", Arc::new(u), targets)
    }

    /// Appends a unitary shared with other instructions, e.g. a fixed
    /// reservoir operator reused at every timestep.
    pub fn add_shared_unitary(
        &mut self,
        label: &str,
        u: Arc<UnitaryMatrix>,
        targets: &[usize],
    ) -> Result<&mut Self> {
        self.check_targets(targets)?;
        if u.k_qubits() != targets.len() {
            return Err(Error::Index(format!(
                "{}-qubit unitary given {} targets",
                u.k_qubits(),
                targets.len()
            )));
        }
        self.push(
            Operation::Unitary {
                label: label.to_string(),
                matrix: u,
            },
            targets.to_vec(),
            Vec::new(),
        );
        Ok(self)
    }

    fn named(&mut self, label: &str, u: UnitaryMatrix, targets: &[usize]) -> Result<&mut Self> {
        self.add_shared_unitary(label, Arc::new(u), targets)
    }

    pub fn add_h(&mut self, target: usize) -> Result<&mut Self> {
        self.named("H", UnitaryMatrix::h(), &[target])
    }

    /// Hadamard on each listed qubit.
    pub fn add_h_all(&mut self, targets: &[usize]) -> Result<&mut Self> {
        for &q in targets {
            self.add_h(q)?;
        }
        Ok(self)
    }

    pub fn add_x(&mut self, target: usize) -> Result<&mut Self> {
        self.named("X", UnitaryMatrix::x(), &[target])
    }

    pub fn add_y(&mut self, target: usize) -> Result<&mut Self> {
        self.named("Y", UnitaryMatrix::y(), &[target])
    }

    pub fn add_z(&mut self, target: usize) -> Result<&mut Self> {
        self.named("Z", UnitaryMatrix::z(), &[target])
    }

    pub fn add_rx(&mut self, theta: f64, target: usize) -> Result<&mut Self> {
        self.named("RX", UnitaryMatrix::rx(theta), &[target])
    }

    pub fn add_ry(&mut self, theta: f64, target: usize) -> Result<&mut Self> {
        self.named("RY", UnitaryMatrix::ry(theta), &[target])
    }

    pub fn add_rz(&mut self, theta: f64, target: usize) -> Result<&mut Self> {
        self.named("RZ", UnitaryMatrix::rz(theta), &[target])
    }

    pub fn add_cx(&mut self, control: usize, target: usize) -> Result<&mut Self> {
        self.named("CX", UnitaryMatrix::cx(), &[control, target])
    }

    /// Reset-then-prepare of `targets` into `amps` (norm 1 within `1e-8`).
    pub fn add_prepare(&mut self, amps: &[Complex64], targets: &[usize]) -> Result<&mut Self> {
        self.check_targets(targets)?;
        if targets.is_empty() {
            return Err(Error::Validation("preparation of no qubits".into()));
        }
        crate::sim::state_checks::prepare_target(targets.len(), amps)?;
        self.push(
            Operation::Prepare {
                amps: amps.to_vec(),
            },
            targets.to_vec(),
            Vec::new(),
        );
        Ok(self)
    }

    /// Real-amplitude convenience for [`Self::add_prepare`].
    pub fn add_prepare_real(&mut self, amps: &[f64], targets: &[usize]) -> Result<&mut Self> {
        let amps: Vec<Complex64> = amps.iter().map(|&a| Complex64::new(a, 0.0)).collect();
        self.add_prepare(&amps, targets)
    }

    /// Measures `qubits` into explicit clbits, growing the classical
    /// register as needed. Each clbit may be written once.
    pub fn add_measure(&mut self, qubits: &[usize], clbits: &[usize]) -> Result<&mut Self> {
        self.check_targets(qubits)?;
        if qubits.is_empty() {
            return Err(Error::Validation("measurement of no qubits".into()));
        }
        if qubits.len() != clbits.len() {
            return Err(Error::Validation(format!(
                "{} qubits measured into {} clbits",
                qubits.len(),
                clbits.len()
            )));
        }
        for (i, &c) in clbits.iter().enumerate() {
            if clbits[..i].contains(&c) || self.written.get(c).copied().unwrap_or(false) {
                return Err(Error::Validation(format!("clbit {c} is already written")));
            }
        }
        let top = clbits.iter().max().map_or(0, |c| c + 1);
        if top > self.n_clbits {
            self.n_clbits = top;
            self.written.resize(top, false);
        }
        for &c in clbits {
            self.written[c] = true;
        }
        self.push(Operation::Measure, qubits.to_vec(), clbits.to_vec());
        Ok(self)
    }

    /// Measures `qubits` into freshly allocated clbits.
    pub fn measure(&mut self, qubits: &[usize]) -> Result<&mut Self> {
        let start = self.n_clbits;
        let clbits: Vec<usize> = (start..start + qubits.len()).collect();
        self.add_measure(qubits, &clbits)
    }

    /// Measures every qubit into fresh clbits (one instruction).
    pub fn measure_all(&mut self) -> Result<&mut Self> {
        let all = self.qubits();
        self.measure(&all)
    }

    /// Explicit depolarizing channel on each of `targets`.
    pub fn add_noise(&mut self, p: f64, targets: &[usize]) -> Result<&mut Self> {
        self.check_targets(targets)?;
        crate::sim::state_checks::probability(p)?;
        self.push(Operation::Noise { p }, targets.to_vec(), Vec::new());
        Ok(self)
    }

    /// Finishes the circuit (not yet validated).
    pub fn build(self) -> Circuit {
        Circuit::from_parts(self.n_qubits, self.n_clbits, self.instructions)
    }
}
