mod common;

use num_complex::Complex64;
use proptest::prelude::*;

use qreservoir::sim::{haar_random_unitary, zero_state, RngStream, StateVector, UnitaryMatrix};

const TRIALS: u64 = 100_000;

fn bell() -> StateVector {
    let mut s = zero_state(2).unwrap();
    s.apply_unitary(&UnitaryMatrix::h(), &[0]).unwrap();
    s.apply_unitary(&UnitaryMatrix::cx(), &[0, 1]).unwrap();
    s
}

fn three_sigma(p: f64) -> f64 {
    3.0 * (p * (1.0 - p) / TRIALS as f64).sqrt()
}

#[test]
fn bell_measurement_frequencies() {
    let mut ones = 0u64;
    for trial in 0..TRIALS {
        let mut s = bell();
        let bits = s.measure(&[0, 1], &mut RngStream::new(1, trial)).unwrap();
        assert_eq!(bits[0], bits[1], "trial {trial}");
        ones += bits[0] as u64;
    }
    let f = ones as f64 / TRIALS as f64;
    assert!((f - 0.5).abs() <= three_sigma(0.5), "{f}");
}

#[test]
fn reset_on_bell_branches() {
    let mut q1 = 0u64;
    for trial in 0..TRIALS {
        let mut s = bell();
        let mut rng = RngStream::new(2, trial);
        s.reset(0, &mut rng).unwrap();
        let p = s.born_probabilities(&[0]).unwrap();
        assert!(p[1].abs() < 1e-12);
        // qubit 1 is left in the branch the reset collapsed to
        let p1 = s.born_probabilities(&[1]).unwrap()[1];
        assert!(p1 < 1e-12 || (p1 - 1.0).abs() < 1e-12, "{p1}");
        q1 += (p1 > 0.5) as u64;
    }
    let f = q1 as f64 / TRIALS as f64;
    assert!((f - 0.5).abs() <= three_sigma(0.5), "{f}");
}

#[test]
fn full_depolarizing_flips_two_thirds() {
    let mut ones = 0u64;
    for trial in 0..TRIALS {
        let mut s = zero_state(1).unwrap();
        let mut rng = RngStream::new(3, trial);
        s.apply_depolarizing(0, 1.0, &mut rng).unwrap();
        ones += s.measure(&[0], &mut rng).unwrap()[0] as u64;
    }
    let f = ones as f64 / TRIALS as f64;
    assert!((f - 2.0 / 3.0).abs() <= three_sigma(2.0 / 3.0), "{f}");
}

#[test]
fn depolarizing_keeps_unit_norm() {
    let mut s = zero_state(3).unwrap();
    s.apply_unitary(&haar_random_unitary(3, &mut RngStream::new(4, 0)).unwrap(), &[0, 1, 2])
        .unwrap();
    let mut rng = RngStream::new(4, 1);
    for i in 0..1000 {
        s.apply_depolarizing(i % 3, 0.1, &mut rng).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }
}

/// Random op sequence: (kind, qubit pick, seed).
fn ops() -> impl Strategy<Value = Vec<(u8, usize, u64)>> {
    prop::collection::vec((0u8..5, 0usize..6, any::<u64>()), 1..20)
}

fn distinct_targets(n: usize, k: usize, pick: usize) -> Vec<usize> {
    (0..k).map(|j| (pick + j) % n).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn norm_is_preserved(n in 1usize..=4, ops in ops()) {
        let mut s = zero_state(n).unwrap();
        for (kind, pick, seed) in ops {
            let mut rng = RngStream::new(seed, 0);
            let q = pick % n;
            match kind {
                0 => {
                    let k = 1 + pick % n.min(2);
                    let u = haar_random_unitary(k, &mut rng).unwrap();
                    s.apply_unitary(&u, &distinct_targets(n, k, pick)).unwrap();
                }
                1 => { s.measure(&[q], &mut rng).unwrap(); }
                2 => s.reset(q, &mut rng).unwrap(),
                3 => {
                    let u = haar_random_unitary(1, &mut rng).unwrap();
                    let target: Vec<Complex64> = (0..2).map(|r| u.get(r, 0)).collect();
                    s.prepare(&[q], &target, &mut rng).unwrap();
                }
                _ => s.apply_depolarizing(q, 0.3, &mut rng).unwrap(),
            }
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn embedding_matches_full_expansion(n in 1usize..=3, k in 1usize..=3, pick in 0usize..3, seed in any::<u64>()) {
        let k = k.min(n);
        let targets: Vec<usize> = (0..k).map(|j| (pick + 2 * j) % n).collect();
        let mut seen = targets.clone();
        seen.sort();
        seen.dedup();
        prop_assume!(seen.len() == k);

        let mut s = zero_state(n).unwrap();
        let prep = haar_random_unitary(n, &mut RngStream::new(seed, 1)).unwrap();
        let all: Vec<usize> = (0..n).collect();
        s.apply_unitary(&prep, &all).unwrap();
        let before: Vec<Complex64> = s.amplitudes().to_vec();

        let u = haar_random_unitary(k, &mut RngStream::new(seed, 2)).unwrap();
        s.apply_unitary(&u, &targets).unwrap();
        let expected = common::apply(&u, &targets, &before);
        for (a, e) in s.amplitudes().iter().zip(&expected) {
            prop_assert!((a - e).norm() < 1e-10);
        }
    }

    #[test]
    fn measurement_is_idempotent(seed in any::<u64>()) {
        let mut s = zero_state(3).unwrap();
        let u = haar_random_unitary(3, &mut RngStream::new(seed, 0)).unwrap();
        s.apply_unitary(&u, &[0, 1, 2]).unwrap();
        let mut rng = RngStream::new(seed, 1);
        let first = s.measure(&[2, 0], &mut rng).unwrap();
        for _ in 0..5 {
            prop_assert_eq!(s.measure(&[2, 0], &mut rng).unwrap(), first.clone());
        }
    }

    #[test]
    fn born_probabilities_are_marginals(seed in any::<u64>(), pick in 0usize..3) {
        let mut s = zero_state(3).unwrap();
        let u = haar_random_unitary(3, &mut RngStream::new(seed, 0)).unwrap();
        s.apply_unitary(&u, &[0, 1, 2]).unwrap();
        let full = common::probabilities(&s.amplitudes().to_vec());
        let qs = [pick, (pick + 1) % 3];
        let marg = s.born_probabilities(&qs).unwrap();
        prop_assert!((marg.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        for (l, &p) in marg.iter().enumerate() {
            let oracle: f64 = full
                .iter()
                .enumerate()
                .filter(|(i, _)| (i >> qs[0] & 1) == (l & 1) && (i >> qs[1] & 1) == (l >> 1 & 1))
                .map(|(_, p)| p)
                .sum();
            prop_assert!((p - oracle).abs() < 1e-12);
        }
    }
}
