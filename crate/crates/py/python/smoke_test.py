"""Smoke test for the qreservoir_py extension.

Uses an installed module when there is one; otherwise loads the shared
library from cargo's target directory, e.g. after

    cargo build --release -p qreservoir-py --features extension-module
"""

import importlib.util
import math
import os
import pathlib
import sys
import tempfile


def load():
    try:
        import qreservoir_py

        return qreservoir_py
    except ImportError:
        pass
    root = pathlib.Path(__file__).resolve().parents[3]
    target = pathlib.Path(os.environ.get("CARGO_TARGET_DIR", root / "target"))
    for profile in ("release", "debug"):
        lib = target / profile / "libqreservoir_py.so"
        if lib.exists():
            spec = importlib.util.spec_from_file_location("qreservoir_py", lib)
            module = importlib.util.module_from_spec(spec)
            spec.loader.exec_module(module)
            return module
    sys.exit("qreservoir_py not found; build it with cargo first")


q = load()


def check_statevector():
    s = q.StateVector(2)
    s.apply_unitary(q.UnitaryMatrix.h(), [0])
    s.apply_unitary(q.UnitaryMatrix.cx(), [0, 1])
    probs = s.born_probabilities([0, 1])
    assert all(abs(a - b) < 1e-12 for a, b in zip(probs, [0.5, 0, 0, 0.5])), probs
    bits = s.measure([0, 1], q.RngStream(7))
    assert bits[0] == bits[1]
    assert abs(s.norm_sqr() - 1) < 1e-12


def check_circuit():
    b = q.CircuitBuilder(2)
    b.add_h(0).add_cx(0, 1).measure_all()
    c = b.build()
    assert str(c).startswith("q0:")
    table = q.execute(c, shots=4000, seed=3, keep_raw=True)
    joint = table.joint_counts([0, 1])
    assert joint[1] == joint[2] == 0
    assert abs(table.mean(0) - 0.5) < 0.05


class Reservoir:
    """Bit on qubit 0, fixed Haar operator, measure everything."""

    n_qubits = 3

    def __init__(self):
        self.u = q.haar_random_unitary(3, seed=1)

    def during(self, circuit, x):
        amps = [0, 1] if x == 1 else [1, 0]
        circuit.add_prepare(amps, [0]).add_unitary(self.u, [0, 1, 2]).measure_all()


def check_reservoir():
    series = [0, 1] * 20
    scheme = q.Static(Reservoir(), feature_mode="distribution")
    rows = scheme.run(series, shots=2000, seed=4)
    assert len(rows) == len(series) and len(rows[0]) == 8
    assert all(abs(sum(r) - 1) < 1e-12 for r in rows)

    model = q.fit_ridge(rows[:-1], [[x] for x in series[1:]], lam=1e-6)
    decode = lambda y: int(y[0] > 0.5)
    out = scheme.predict(model, decode, series, num_pred=6, shots=2000, seed=4)
    assert out["predictions"] == [0, 1, 0, 1, 0, 1], out["predictions"]


class WithAfter(Reservoir):
    def during(self, circuit, x):
        amps = [0, 1] if x == 1 else [1, 0]
        circuit.add_prepare(amps, [0]).add_unitary(self.u, [0, 1, 2])

    def after(self, circuit):
        circuit.measure_all()


class Broken(Reservoir):
    def during(self, circuit, x):
        raise RuntimeError("boom")


def check_incremental_and_errors():
    rows = q.Incremental(WithAfter(), memory=2).run([0, 1, 1, 0], shots=500, seed=2)
    assert len(rows) == 4 and len(rows[0]) == 3
    try:
        q.Static(Broken()).run([0, 1], shots=10)
    except RuntimeError as e:
        assert "boom" in str(e)
    else:
        raise AssertionError("hook exception was swallowed")
    try:
        q.StateVector(0)
    except ValueError:
        pass
    else:
        raise AssertionError("zero qubits accepted")


def check_codec_and_experiment():
    a = q.Alphabet(["a", "b", "c"])
    assert a.k_qubits == 2
    assert a.decode(a.target("c")) == "c"
    amp = q.encode_angle(0.5)
    assert abs(abs(amp[0]) ** 2 + abs(amp[1]) ** 2 - 1) < 1e-12

    with tempfile.TemporaryDirectory() as d:
        cfg = pathlib.Path(d) / "exp.toml"
        cfg.write_text(
            'scheme = "static"\nn_qubits = 3\nshots = 500\ntask = "binary_periodic(2, 40)"\nnum_pred = 4\n'
        )
        m = q.run_experiment(str(cfg), out_dir=str(pathlib.Path(d) / "out"))
        assert m["num_pred"] == 4 and 0 <= m["accuracy"] <= 1
        assert (pathlib.Path(d) / "out" / "features.csv").exists()
        assert "[M:" in q.dump_circuit(str(cfg), 2)


for check in (
    check_statevector,
    check_circuit,
    check_reservoir,
    check_incremental_and_errors,
    check_codec_and_experiment,
):
    check()
    print(f"ok  {check.__name__}")
print(f"qreservoir_py {q.__version__}: smoke test passed")
