"""Smoke test for the `replica_portfolio` extension module.

Builds the extension with cargo, loads it from a temporary directory and
exercises each exported function once:

    python3 python/smoke_test.py
"""

import importlib
import json
import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def load_module():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "replica-portfolio-py"],
        cwd=ROOT,
        check=True,
    )
    built = ROOT / "target" / "release" / "libreplica_portfolio_py.so"
    tmp = pathlib.Path(tempfile.mkdtemp())
    shutil.copy(built, tmp / "replica_portfolio.so")
    sys.path.insert(0, str(tmp))
    return importlib.import_module("replica_portfolio")


def close(a, b, tol=1e-10):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    rp = load_module()

    m = rp.pareto_moments((1.0, 2.0, 2.0), (1.0, 2.0, 2.0))
    assert close(m.m_v1, 0.4375), m
    r_star, s_star, s_r1, s_inf = rp.sharpe_triple(m, 2.0)
    assert close(r_star, 4.0 / 3.0)
    assert close(s_star**2, s_r1**2 + s_inf**2, 1e-12)

    p = rp.predict(m, 2.0, 1.5)
    assert close(p["sharpe"], 1.5 / math.sqrt(2.0 * p["epsilon"]))
    assert p["kappa"] == 2.0 and p["kappa_prime"] == 4.0
    r_max, r_min = rp.dual_return_bounds(m, 2.0, rp.epsilon_min(m, 2.0, 1.5))
    assert close(r_max, 1.5)

    draws = rp.sample_bounded_pareto(1.0, 2.0, 2.0, 20000, 7)
    assert all(1.0 <= x <= 2.0 for x in draws)
    assert draws == rp.sample_bounded_pareto(1.0, 2.0, 2.0, 20000, 7)

    means = [1.0, 1.2, 1.5, 0.9, 1.1]
    variances = [1.0, 2.0, 0.5, 1.5, 1.0]
    x = rp.generate_market(means, variances, 10, 3)
    w, eps, k, theta = rp.solve_min_risk(x, means, variances, 1.2)
    assert close(sum(w), 5.0) and close(sum(a * b for a, b in zip(w, means)), 6.0)
    assert close(eps, 0.5 * (k + 1.2 * theta), 1e-8)
    w_or = rp.solve_or_portfolio(means, variances, 1.2)
    assert close(sum(w_or), 5.0)

    try:
        rp.epsilon_min(m, 0.5, 1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha <= 1 must raise ValueError")

    cfg = {
        "n_assets": 40, "n_periods": 80, "n_trials": 4, "seed": 5,
        "hyper": {"model": {
            "mean_dist": {"kind": "bounded_pareto", "lower": 1.0, "upper": 2.0, "power": 2.0},
            "ratio_dist": {"kind": "bounded_pareto", "lower": 1.0, "upper": 2.0, "power": 2.0},
            "coupling": "product"}},
        "r_grid": [1.2, 1.4],
    }
    summary = json.loads(rp.run_experiment(json.dumps(cfg)))
    assert [row["n_ok"] for row in summary["rows"]] == [4, 4]
    assert summary["moments"]["m_v1"] == m.m_v1

    print(f"replica_portfolio {rp.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
