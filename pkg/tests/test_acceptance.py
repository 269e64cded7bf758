"""Acceptance suite: ten criteria at their stated tolerances.

Each test prints one ``[PASS]`` or ``[FAIL]`` line (visible without ``-s``)
before asserting. Run alone with::

    pytest tests/test_acceptance.py -v
"""

from __future__ import annotations

import subprocess
import sys
import time

import numpy as np
import pytest

from eotmix import verify as V
from eotmix.bcd import FitSettings, fit
from eotmix.core import GmmParams
from eotmix.errors import EmptyComponent
from eotmix.mixture import sample_gmm

TRIALS = 200


@pytest.fixture
def announce(capsys):
    def _announce(number: int, title: str, passed: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {number:2d} {title}: {detail}")

    return _announce


def by_name(records):
    return {r.name: r for r in records}


@pytest.fixture(scope="module")
def identity_records():
    return by_name(V.check_variational_identities(0, 500))


@pytest.fixture(scope="module")
def em_records():
    return by_name(V.check_em_equivalence(0, 50))


TRUTH = GmmParams([[-5.0, 0.0], [5.0, 0.0]], np.eye(2), [0.4, 0.6])


def separated_fit():
    data = sample_gmm(TRUTH, 2000, seed=0)
    return data, fit(data, 2, FitSettings(seed=0))


def test_01_identity(announce):
    t0 = time.perf_counter()
    rec = by_name(V.check_identity_nll(0, TRIALS))["identity_nll"]
    elapsed = time.perf_counter() - t0
    ok = rec.instances_run == TRIALS and rec.max_residual <= 1e-8 and elapsed <= 10.0
    announce(1, "nll/n equals semi-relaxed value", ok,
             f"max |diff| {rec.max_residual:.2e} over {rec.instances_run} instances, {elapsed:.2f} s")
    assert ok


def test_02_upper_bound(announce):
    recs = by_name(V.check_upper_bound(0, TRIALS))
    violation = recs["upper_bound"].max_residual
    marginal = recs["sinkhorn_marginal"].max_residual
    ok = violation <= 1e-7 and marginal <= 1e-9 and recs["upper_bound"].instances_run == TRIALS
    announce(2, "Sinkhorn OT bounds nll/n from above", ok,
             f"max violation {violation:.2e}, max marginal residual {marginal:.2e}, "
             f"min gap {recs['upper_bound'].observations['min_gap']:.2e}")
    assert ok


def test_03_min_over_weights(announce):
    recs = by_name(V.check_min_over_pi_equality(0, TRIALS, K=2))
    sides = recs["min_over_pi_equality"].max_residual
    grid = recs["min_over_pi_grid"].max_residual
    ok = sides <= 1e-7 and grid <= 1e-6 and recs["min_over_pi_grid"].instances_run == TRIALS
    announce(3, "minimized sides agree (K=2)", ok, f"sides {sides:.2e}, vs 1e-4 grid {grid:.2e}")
    assert ok


def test_04_gibbs_principle(announce, identity_records):
    beats = identity_records["gibbs_max_property"].max_residual
    argmax = identity_records["gibbs_grid_argmax"].max_residual
    equal = identity_records["gibbs_equality"].max_residual
    ok = beats <= 1e-12 and argmax <= 1e-6 and equal <= 1e-10
    announce(4, "Gibbs variational principle", ok,
             f"random-point violation {beats:.2e}, grid argmax {argmax:.2e}, value vs logsumexp {equal:.2e}")
    assert ok


def test_05_kl_split(announce, identity_records):
    rec = identity_records["kl_decomposition"]
    ok = rec.instances_run == 500 and rec.max_residual <= 1e-10
    announce(5, "three-term KL decomposition", ok,
             f"max |sum - total| {rec.max_residual:.2e} over {rec.instances_run} instances")
    assert ok


def test_06_em_equals_bcd(announce, em_records):
    p = em_records["em_equivalence_params"]
    l = em_records["em_equivalence_nll"]
    ok = p.instances_run == 50 and p.max_residual <= 1e-10 and l.max_residual <= 1e-9
    announce(6, "EM and BCD trajectories coincide", ok,
             f"params {p.max_residual:.2e}, nll {l.max_residual:.2e} over {p.instances_run} starts x 20 sweeps")
    assert ok


def test_07_monotone(announce, em_records):
    worst = em_records["nll_monotonicity"].max_residual
    fits = 0
    trajectories = []
    _, report = separated_fit()
    trajectories.append((report.initial_nll,) + report.nll_trajectory)
    for t in range(50):
        params, data = V.random_instance(t)
        try:
            r = fit(data, params.n_components, FitSettings(seed=t, max_sweeps=200))
        except EmptyComponent:
            continue
        trajectories.append((r.initial_nll,) + r.nll_trajectory)
    for traj in trajectories:
        fits += 1
        worst = max(worst, float(np.max(np.diff(traj), initial=0.0)))
    ok = worst <= 1e-9
    announce(7, "NLL never increases", ok,
             f"max per-step increase {worst:.2e} over {fits} fits and {em_records['nll_monotonicity'].instances_run} paired runs")
    assert ok


def test_08_m_step_stationarity(announce):
    (rec,) = V.check_m_step_stationarity(0, 50)
    ok = rec.instances_run == 50 and rec.max_residual <= 1e-4
    announce(8, "M-step is stationary", ok, f"max |finite-difference gradient| {rec.max_residual:.2e}")
    assert ok


def test_09_estimation(announce):
    t0 = time.perf_counter()
    _, report = separated_fit()
    elapsed = time.perf_counter() - t0
    p = report.final_params
    order = np.argsort(p.means[:, 0])
    mean_err = float(np.max(np.abs(p.means[order] - TRUTH.means)))
    weight_err = float(np.max(np.abs(p.weights.weights[order] - TRUTH.weights.weights)))
    cov_err = float(np.max(np.abs(p.covariance - TRUTH.covariance)))
    ok = mean_err <= 0.2 and weight_err <= 0.05 and cov_err <= 0.15 and elapsed <= 5.0
    announce(9, "recovers a separated 2-component mixture", ok,
             f"means {mean_err:.3f}, weights {weight_err:.3f}, covariance {cov_err:.3f}, "
             f"{report.sweeps_used} sweeps, {elapsed:.2f} s")
    assert ok


def run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "eotmix.cli", *args], cwd=cwd, capture_output=True, text=True
    )


def test_10_cli_determinism(announce, tmp_path):
    model = tmp_path / "model.ini"
    model.write_text(
        "[model]\nschema_version = 1\ncomponents = 2\ndimension = 2\nweights = 0.4, 0.6\n"
        "mean_1 = -5, 0\nmean_2 = 5, 0\ncovariance_1 = 1, 0\ncovariance_2 = 0, 1\n"
    )
    commands = {
        "sample": (["sample", "--model", str(model), "--n", "500", "--seed", "3", "--out", "data.csv"], ["data.csv"]),
        "fit": (["fit", "--data", "data.csv", "--k", "2", "--seed", "1", "--tol", "1e-8",
                 "--out-model", "fit.ini", "--out-report", "report.ini"], ["fit.ini", "report.ini"]),
        "eval": (["eval", "--data", "data.csv", "--model", "fit.ini"], []),
        "verify": (["verify", "--out", "verify.ini"], ["verify.ini"]),
    }
    runs = []
    for tag in ("first", "second"):
        cwd = tmp_path / tag
        cwd.mkdir()
        outputs = {}
        for name, (args, files) in commands.items():
            proc = run_cli(args, cwd)
            outputs[name] = (proc.returncode, proc.stdout, tuple((cwd / f).read_bytes() for f in files))
        runs.append(outputs)
    codes = {name: runs[0][name][0] for name in commands}
    identical = all(runs[0][name] == runs[1][name] for name in commands)
    ok = identical and all(code == 0 for code in codes.values())
    announce(10, "CLI reruns are byte-identical", ok, f"identical={identical}, exit codes {codes}")
    assert ok
