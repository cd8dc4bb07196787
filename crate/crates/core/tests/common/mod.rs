//! Reference implementations used as test oracles. Deliberately naive:
//! full-matrix expansion, explicit branch enumeration, dense Gaussian
//! elimination.
#![allow(dead_code)]

use num_complex::Complex64;
use qreservoir::sim::UnitaryMatrix;

pub type Amps = Vec<Complex64>;

pub fn basis(n: usize, index: usize) -> Amps {
    let mut v = vec![Complex64::new(0.0, 0.0); 1 << n];
    v[index] = Complex64::new(1.0, 0.0);
    v
}

/// Local index of `full` on `targets` (bit j ↔ targets[j]).
fn local(full: usize, targets: &[usize]) -> usize {
    targets.iter().enumerate().map(|(j, &q)| (full >> q & 1) << j).sum()
}

/// `U` embedded on `targets` as a full `2^n × 2^n` matrix.
pub fn expand(u: &UnitaryMatrix, targets: &[usize], n: usize) -> Vec<Vec<Complex64>> {
    let dim = 1 << n;
    let mask: usize = targets.iter().map(|&q| 1 << q).sum();
    let mut m = vec![vec![Complex64::new(0.0, 0.0); dim]; dim];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, entry) in row.iter_mut().enumerate() {
            if r & !mask == c & !mask {
                *entry = u.get(local(r, targets), local(c, targets));
            }
        }
    }
    m
}

pub fn apply(u: &UnitaryMatrix, targets: &[usize], state: &Amps) -> Amps {
    let n = state.len().trailing_zeros() as usize;
    expand(u, targets, n)
        .iter()
        .map(|row| row.iter().zip(state).map(|(a, b)| a * b).sum())
        .collect()
}

/// Probability of every full basis outcome.
pub fn probabilities(state: &Amps) -> Vec<f64> {
    state.iter().map(|a| a.norm_sqr()).collect()
}

/// Step of a mid-circuit program.
#[derive(Clone)]
pub enum Step {
    Gate(UnitaryMatrix, Vec<usize>),
    /// Measure one qubit into the next clbit.
    Measure(usize),
}

/// Exact joint distribution over the clbits of `program`, enumerating
/// every branch of every measurement. Index bit k is clbit k.
pub fn branch_distribution(n: usize, program: &[Step]) -> Vec<f64> {
    let n_clbits = program.iter().filter(|s| matches!(s, Step::Measure(_))).count();
    let mut dist = vec![0.0; 1 << n_clbits];
    walk(program, basis(n, 0), 1.0, 0, 0, &mut dist);
    dist
}

fn walk(program: &[Step], state: Amps, weight: f64, outcome: usize, clbit: usize, dist: &mut [f64]) {
    let Some((step, rest)) = program.split_first() else {
        dist[outcome] += weight;
        return;
    };
    match step {
        Step::Gate(u, targets) => walk(rest, apply(u, targets, &state), weight, outcome, clbit, dist),
        Step::Measure(q) => {
            for bit in 0..2usize {
                let mut branch = state.clone();
                for (i, a) in branch.iter_mut().enumerate() {
                    if i >> q & 1 != bit {
                        *a = Complex64::new(0.0, 0.0);
                    }
                }
                let p: f64 = branch.iter().map(|a| a.norm_sqr()).sum();
                if p < 1e-15 {
                    continue;
                }
                let scale = 1.0 / p.sqrt();
                branch.iter_mut().for_each(|a| *a *= scale);
                walk(rest, branch, weight * p, outcome | bit << clbit, clbit + 1, dist);
            }
        }
    }
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (top, bottom) = a.split_at_mut(row);
            for (x, p) in bottom[0][col..].iter_mut().zip(&top[col][col..]) {
                *x -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Least squares with an intercept column via the normal equations.
/// Returns `(weights, intercept)` for a single target.
pub fn normal_equations(x: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, f64) {
    let f = x[0].len();
    let aug: Vec<Vec<f64>> = x.iter().map(|r| r.iter().copied().chain([1.0]).collect()).collect();
    let mut ata = vec![vec![0.0; f + 1]; f + 1];
    let mut aty = vec![0.0; f + 1];
    for (row, &t) in aug.iter().zip(y) {
        for i in 0..=f {
            aty[i] += row[i] * t;
            for j in 0..=f {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    let sol = gauss_solve(ata, aty);
    (sol[..f].to_vec(), sol[f])
}

/// Is `freq` (from `shots` samples) within `k` standard errors of `p`?
/// One count of slack covers outcomes with vanishing probability.
pub fn within_sigma(freq: f64, p: f64, shots: usize, k: f64) -> bool {
    let sigma = (p * (1.0 - p) / shots as f64).sqrt();
    (freq - p).abs() <= k * sigma + 1.0 / shots as f64
}
