"""Smoke test for the robust_amp_py extension.

Build and install the module first:

    maturin develop -m crates/py/Cargo.toml      # or
    maturin build -m crates/py/Cargo.toml && pip install target/wheels/*.whl

then run `python python/smoke_test.py`.
"""

import math
import tempfile

import robust_amp_py as ra

CONFIG = """
t = 2
eta = 0.5
seeds = [0]

[ensemble]
n = 40
family = "gaussian"

[problem]
kind = "nnpca"

[denoiser]
kind = "polynomial"
coeffs = [0.0, 1.0]

[corruption]
epsilon = 0.05
adversary = { kind = "rank_one_spike" }

[calibration]
mc_samples = 100
"""


def check_matrices():
    x = ra.sample(50, "gaussian", seed=1)
    assert x.n == 50
    rows = x.to_list()
    assert all(rows[i][j] == rows[j][i] for i in range(50) for j in range(50))
    assert 1.5 < x.op_norm() < 2.5
    again = ra.SymmetricMatrix.from_symmat(x.to_symmat())
    assert again.to_list() == rows

    y, support = ra.corrupt(x, 0.1, "rank_one_spike", seed=2)
    assert len(support) == 5
    outside = [i for i in range(50) if i not in support]
    assert all(y.get(i, j) == x.get(i, j) for i in outside for j in range(50))

    r = ra.sample(64, "rademacher", seed=3)
    z, changed = ra.zero_rowsum(r, seed=3)
    assert all(s == 0.0 for s in z.row_sums())
    assert changed <= 4 * 64**1.5


def check_amp():
    x = ra.sample(400, seed=4)
    iterates = ra.amp(x, 5, "relu")
    assert len(iterates) == 6 and all(len(v) == 400 for v in iterates)
    value = ra.rounded_objective(x, iterates[-1], "nnpca")
    assert 0.5 < value < math.sqrt(2) + 0.2
    assert abs(ra.correlation(iterates[-1], iterates[-1]) - 1.0) < 1e-12


def check_experiment():
    cfg = ra.ExperimentConfig.from_toml(CONFIG)
    assert cfg.validate() == []
    bad = ra.ExperimentConfig.from_toml(CONFIG.replace("n = 40", "n = 0"))
    assert any("ensemble.n" in v for v in bad.validate())

    record = cfg.run_seed(0)
    assert record["schema_version"] == 1 and record["seed"] == 0
    assert 0.0 <= record["corr_raw"] <= 1.0

    with tempfile.TemporaryDirectory() as out:
        cfg.output_dir = out
        records = cfg.run()
        assert records[0] == record

    report = cfg.solve(ra.sample(40, seed=0), 0)
    assert report["verdict"] in ("feasible", "infeasible", "indeterminate")


def main():
    check_matrices()
    check_amp()
    check_experiment()
    print("robust_amp_py smoke test: ok")


if __name__ == "__main__":
    main()
