"""The numba engine and the pure-numpy fallback must be interchangeable."""

import subprocess
import sys

import numpy as np
import pytest

from oracles import make_svm_problem

from newsmkl import _smo


def _run_engine(engine, ts, C, tol=1e-8):
    y = ts.labels
    Q = np.ascontiguousarray((y[:, None] * y[None, :]) * ts.gram.values)
    alpha = np.zeros(ts.size)
    grad = -np.ones(ts.size)
    n_iter, violation, converged = _smo.get_engine(engine)(Q, y, alpha, grad, C, tol, 10_000_000)
    obj = 0.5 * (float(alpha.sum()) - float(alpha @ grad))
    return alpha, obj, n_iter, converged


@pytest.mark.skipif(_smo.active_engine() != "numba", reason="numba engine unavailable")
class TestEngineParity:
    def test_identical_iterates_and_objective(self):
        for seed in range(8):
            ts, C = make_svm_problem(seed)
            a_nb, obj_nb, it_nb, conv_nb = _run_engine("numba", ts, C)
            a_np, obj_np, it_np, conv_np = _run_engine("numpy", ts, C)
            assert conv_nb and conv_np
            assert it_nb == it_np
            np.testing.assert_array_equal(a_nb, a_np)
            assert obj_nb == obj_np


def test_env_flag_selects_numpy_path():
    code = (
        "import os; os.environ['NEWSMKL_DISABLE_NUMBA'] = '1';"
        "from newsmkl import _smo; print(_smo.active_engine())"
    )
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert out.stdout.strip() == "numpy"


def test_active_engine_solves_through_wrapper():
    ts, C = make_svm_problem(3)
    y = ts.labels
    Q = np.ascontiguousarray((y[:, None] * y[None, :]) * ts.gram.values)
    alpha = np.zeros(ts.size)
    grad = -np.ones(ts.size)
    n_iter, violation, converged = _smo.solve(Q, y, alpha, grad, C, 1e-6, 10_000_000)
    assert converged and violation <= 1e-6
