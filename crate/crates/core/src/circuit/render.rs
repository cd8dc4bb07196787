use super::{Circuit, Instruction, Operation};

/// ASCII wire diagram, one row per qubit, one column per instruction.
///
/// Cells: `[H]`-style boxes for unitaries (multi-qubit operators show the
/// local target index, CX shows `*` on the control), `[P]` for
/// preparations, `[M:c]` for a measurement into clbit `c`, `[D]` for an
/// explicit noise channel. Qubits spanned but not touched by a multi-qubit
/// instruction show `|`. When any instruction carries a timestep tag, a
/// header row marks where each tagged block starts.
pub fn render_text(circuit: &Circuit) -> String {
    let n = circuit.n_qubits();
    let labels: Vec<String> = (0..n).map(|q| format!("q{q}: ")).collect();
    let pad = labels.iter().map(String::len).max().unwrap_or(0);

    let mut rows: Vec<String> = labels.iter().map(|l| format!("{l:<pad$}-")).collect();
    let tagged = circuit.instructions().iter().any(|i| i.tag.is_some());
    let mut header = " ".repeat(pad + 1);
    let mut last_tag = None;

    for inst in circuit.instructions() {
        let cells = cells(inst, n);
        let width = cells.iter().flatten().map(|c| c.chars().count()).max().unwrap_or(1);
        for (row, cell) in rows.iter_mut().zip(&cells) {
            match cell {
                Some(text) => row.push_str(&center(text, width, '-')),
                None => row.push_str(&"-".repeat(width)),
            }
            row.push('-');
        }
        if tagged {
            let mark = match inst.tag {
                Some(t) if last_tag != Some(t) => format!("t{t}"),
                _ => String::new(),
            };
            last_tag = inst.tag;
            let mark: String = mark.chars().take(width).collect();
            header.push_str(&format!("{mark:<width$} "));
        }
    }

    let mut out = String::new();
    if tagged {
        out.push_str(header.trim_end());
        out.push('\n');
    }
    for row in rows {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

fn cells(inst: &Instruction, n: usize) -> Vec<Option<String>> {
    let mut cells = vec![None; n];
    match &inst.op {
        Operation::Unitary { label, matrix } => {
            if label == "CX" && inst.qubits.len() == 2 {
                cells[inst.qubits[0]] = Some("*".to_string());
                cells[inst.qubits[1]] = Some("[X]".to_string());
            } else if matrix.k_qubits() == 1 {
                cells[inst.qubits[0]] = Some(format!("[{label}]"));
            } else {
                for (j, &q) in inst.qubits.iter().enumerate() {
                    cells[q] = Some(format!("[{label}:{j}]"));
                }
            }
        }
        Operation::Prepare { .. } => {
            for &q in &inst.qubits {
                cells[q] = Some("[P]".to_string());
            }
        }
        Operation::Measure => {
            for (&q, &c) in inst.qubits.iter().zip(&inst.clbits) {
                cells[q] = Some(format!("[M:{c}]"));
            }
        }
        Operation::Noise { .. } => {
            for &q in &inst.qubits {
                cells[q] = Some("[D]".to_string());
            }
        }
    }
    if inst.qubits.len() > 1 {
        let lo = *inst.qubits.iter().min().unwrap();
        let hi = *inst.qubits.iter().max().unwrap();
        for cell in &mut cells[lo + 1..hi] {
            if cell.is_none() {
                *cell = Some("|".to_string());
            }
        }
    }
    cells
}

fn center(text: &str, width: usize, fill: char) -> String {
    let len = text.chars().count();
    let left = (width - len) / 2;
    let right = width - len - left;
    let fill = fill.to_string();
    format!("{}{}{}", fill.repeat(left), text, fill.repeat(right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;

    #[test]
    fn empty_single_wire() {
        let c = CircuitBuilder::new(1).unwrap().build();
        assert_eq!(render_text(&c), "q0: -\n");
    }

    #[test]
    fn h_on_first_wire_only() {
        let mut b = CircuitBuilder::new(2).unwrap();
        b.add_h(0).unwrap();
        assert_eq!(render_text(&b.build()), "q0: -[H]-\nq1: -----\n");
    }

    #[test]
    fn bell_with_measure() {
        let mut b = CircuitBuilder::new(3).unwrap();
        b.add_h(0).unwrap();
        b.add_cx(0, 2).unwrap();
        b.measure(&[0, 2]).unwrap();
        let expected = "\
q0: -[H]--*--[M:0]-
q1: ------|----|---
q2: -----[X]-[M:1]-
";
        assert_eq!(render_text(&b.build()), expected);
    }
}
