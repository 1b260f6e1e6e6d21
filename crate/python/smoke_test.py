"""Smoke test for the pyqubofit extension module.

Build and install it first, for example:

    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml
"""

import itertools
import json
import math
import tempfile
from pathlib import Path

import pyqubofit as qf


def check_fit():
    xs, ys = qf.generate("linear", 64, seed=2024)
    basis = qf.Basis.triangular(0.0, 1.0, 2)
    fmt = qf.FixedPointFormat(10, 8)
    classical = qf.fit(xs, ys, basis, fmt)
    tabu = qf.fit(xs, ys, basis, fmt, backend="tabu")
    assert tabu["backend"] == "tabu"
    for a, b in zip(classical["coefficients"], tabu["coefficients"]):
        assert abs(a - b) <= fmt.step, (a, b)
    assert abs(tabu["rmse"] - classical["rmse"]) < 1e-3


def check_qubo():
    xs, ys = qf.generate("quadratic", 32, seed=7)
    fmt = qf.FixedPointFormat(5, 4)
    q = qf.Qubo.for_fit(xs, ys, qf.Basis.triangular(0.0, 1.0, 2), fmt)
    assert q.n == 10
    best = min(
        (q.energy(list(bits)), list(bits)) for bits in itertools.product((0, 1), repeat=q.n)
    )
    bits, energy = qf.solve(q, backend="brute")
    assert math.isclose(energy, best[0], rel_tol=1e-12, abs_tol=1e-12)
    assert len(q.decode(bits)) == 2
    again = qf.Qubo.from_json(q.to_json())
    assert math.isclose(again.energy(bits), energy, rel_tol=1e-12, abs_tol=1e-12)
    couplings, fields, offset = q.to_ising()
    spins = [2 * b - 1 for b in bits]
    ising = offset + sum(h * s for h, s in zip(fields, spins))
    ising += sum(
        couplings[i][j] * spins[i] * spins[j] for i in range(q.n) for j in range(i + 1, q.n)
    )
    assert math.isclose(ising, energy, rel_tol=1e-9, abs_tol=1e-9)


def check_encoding():
    fmt = qf.FixedPointFormat(6, 4)
    values = [fmt.min_value, -0.5, 0.0, 0.8125, fmt.max_value]
    assert fmt.decode(fmt.encode(values), len(values)) == values
    try:
        qf.FixedPointFormat(4, 4)
    except ValueError:
        pass
    else:
        raise AssertionError("invalid format accepted")


def check_dp():
    analytic = qf.analytic_policy()
    assert abs(analytic["total_cost"] - 1.990099) < 1e-6
    grid = qf.dp(json.dumps({"n_states": 50, "grid_actions": 50}), method="grid")
    assert grid["total_cost"] > analytic["total_cost"]


def check_experiment():
    with tempfile.TemporaryDirectory() as out:
        manifest = qf.run_experiment("table1", out, overrides=json.dumps({"n": 32}))
        assert manifest["files"] == ["table1.csv"]
        assert (Path(out) / "table1.manifest.json").exists()
        header = (Path(out) / "table1.csv").read_text().splitlines()[0]
        assert header == "solver,c0,c1,ape_c0,ape_c1,rmse"


if __name__ == "__main__":
    for check in (check_fit, check_qubo, check_encoding, check_dp, check_experiment):
        check()
        print(f"{check.__name__}: ok")
    print(f"pyqubofit {qf.__version__} smoke test passed")
