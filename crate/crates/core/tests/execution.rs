mod common;

use common::{branch_distribution, within_sigma, Step};
use qreservoir::circuit::{execute, Circuit, CircuitBuilder, ExecOptions};
use qreservoir::sim::{haar_random_unitary, RngStream, UnitaryMatrix};

fn validated(b: CircuitBuilder) -> Circuit {
    let mut c = b.build();
    c.validate().unwrap();
    c
}

fn mixed_circuit() -> Circuit {
    let mut b = CircuitBuilder::new(3).unwrap();
    let u = haar_random_unitary(3, &mut RngStream::new(7, 0)).unwrap();
    b.add_h(0).unwrap();
    b.add_unitary(u.clone(), &[0, 1, 2]).unwrap();
    b.measure(&[1]).unwrap();
    b.add_prepare_real(&[0.6, 0.8], &[1]).unwrap();
    b.add_noise(0.2, &[2]).unwrap();
    b.add_unitary(u, &[2, 0, 1]).unwrap();
    b.measure_all().unwrap();
    validated(b)
}

#[test]
fn identical_tables_at_any_thread_count() {
    let c = mixed_circuit();
    let opts = ExecOptions::new(5000, 21).with_noise(Some(0.05)).with_raw(true);
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| execute(&c, &opts).unwrap());
    for threads in [2, 3, 8] {
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| execute(&c, &opts).unwrap());
        assert_eq!(one, many, "{threads} threads");
    }
    // counts agree with the raw matrix and stay within [0, shots]
    let raw = one.raw().unwrap();
    for (c, &n) in one.counts().iter().enumerate() {
        assert!(n <= 5000);
        assert_eq!(n, raw.iter().map(|r| r[c] as u64).sum::<u64>());
    }
}

#[test]
fn different_seeds_differ() {
    let c = mixed_circuit();
    let a = execute(&c, &ExecOptions::new(2000, 1)).unwrap();
    let b = execute(&c, &ExecOptions::new(2000, 2)).unwrap();
    assert_ne!(a, b);
}

#[test]
fn mid_circuit_bell_correlations() {
    // measure qubit 0 of a Bell pair, rotate it, measure both
    let program = vec![
        Step::Gate(UnitaryMatrix::h(), vec![0]),
        Step::Gate(UnitaryMatrix::cx(), vec![0, 1]),
        Step::Measure(0),
        Step::Gate(UnitaryMatrix::ry(0.7), vec![0]),
        Step::Measure(0),
        Step::Measure(1),
    ];
    let exact = branch_distribution(2, &program);
    let mut b = CircuitBuilder::new(2).unwrap();
    b.add_h(0).unwrap().add_cx(0, 1).unwrap().measure(&[0]).unwrap();
    b.add_ry(0.7, 0).unwrap().measure(&[0]).unwrap().measure(&[1]).unwrap();
    let shots = 100_000;
    let t = execute(&validated(b), &ExecOptions::new(shots, 8).with_raw(true)).unwrap();
    let counts = t.joint_counts(&[0, 1, 2]).unwrap();
    for (k, (&n, &p)) in counts.iter().zip(&exact).enumerate() {
        let f = n as f64 / shots as f64;
        assert!(within_sigma(f, p, shots, 4.0), "outcome {k:03b}: {f} vs {p}");
    }
    // the first and last clbits always agree
    assert_eq!(counts[0b100] + counts[0b110] + counts[0b001] + counts[0b011], 0);
}

#[test]
fn unvalidated_circuits_are_refused() {
    let mut b = CircuitBuilder::new(1).unwrap();
    b.add_x(0).unwrap();
    assert!(execute(&b.build(), &ExecOptions::new(1, 0)).is_err());
}
