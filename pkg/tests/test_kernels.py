"""Backend parity: the compiled kernels must pick the same pivots as the
numpy reference on arbitrary inputs, and whole solves must agree."""

import numpy as np
import pytest

from sdoplan import _kernels_py
from sdoplan import kernels
from sdoplan.lp import LpProblem
from sdoplan.simplex import solve

compiled = kernels.available_backends().get("compiled")
needs_compiled = pytest.mark.skipif(compiled is None,
                                    reason="compiled kernels not built")


def random_state(rng, n):
    d = rng.normal(size=n)
    status = rng.choice([0, 1, 2, 3, 4], size=n).astype(np.int8)
    inv_scale = rng.uniform(0.1, 1.0, size=n)
    return d, status, inv_scale


@needs_compiled
def test_choose_entering_parity():
    rng = np.random.default_rng(0)
    for trial in range(300):
        n = int(rng.integers(1, 40))
        d, status, inv_scale = random_state(rng, n)
        for bland in (False, True):
            a = _kernels_py.choose_entering(d, status, inv_scale, 1e-7,
                                            bland)
            b = compiled.choose_entering(d, status, inv_scale, 1e-7, bland)
            assert a == b


@needs_compiled
def test_ratio_test_parity():
    rng = np.random.default_rng(1)
    for trial in range(300):
        m = int(rng.integers(0, 30))
        x = rng.normal(size=m)
        lo = x - np.abs(rng.normal(size=m))
        up = x + np.abs(rng.normal(size=m))
        lo[rng.random(m) < 0.3] = -np.inf
        up[rng.random(m) < 0.3] = np.inf
        w = rng.normal(size=m)
        w[rng.random(m) < 0.2] = 0.0
        sigma = float(rng.choice([-1.0, 1.0]))
        gap = float(rng.choice([np.inf, abs(rng.normal()) * 2]))
        a = _kernels_py.ratio_test(x, lo, up, w, sigma, gap, 1e-9)
        b = compiled.ratio_test(x, lo, up, w, sigma, gap, 1e-9)
        assert a[1] == b[1] and a[2] == b[2]
        assert a[0] == b[0] or np.isclose(a[0], b[0], rtol=0, atol=0)


@needs_compiled
def test_update_inverse_parity():
    rng = np.random.default_rng(2)
    for trial in range(100):
        m = int(rng.integers(1, 25))
        base = rng.normal(size=(m, m)) + np.eye(m) * 3
        binv_a = np.asfortranarray(np.linalg.inv(base))
        binv_b = binv_a.copy(order="F")
        w = rng.normal(size=m)
        row = int(rng.integers(0, m))
        if abs(w[row]) < 1e-3:
            w[row] = 1.0
        _kernels_py.update_inverse(binv_a, w, row)
        compiled.update_inverse(binv_b, w, row)
        assert np.array_equal(binv_a, binv_b)


@needs_compiled
def test_full_solve_agrees_across_backends():
    rng = np.random.default_rng(3)
    for trial in range(40):
        m, n = int(rng.integers(2, 10)), int(rng.integers(2, 10))
        A = rng.normal(size=(m, n))
        rel = rng.choice(["<=", ">=", "="], m, p=[0.5, 0.3, 0.2])
        x0 = rng.uniform(0.1, 1.0, n)
        b = A @ x0 + np.where(rel == "<=", 0.3,
                              np.where(rel == ">=", -0.3, 0.0))
        prob = LpProblem(rng.uniform(0.0, 1.0, n), A, rel, b)
        out_py = solve(prob, kernels_module=_kernels_py)
        out_cy = solve(prob, kernels_module=compiled)
        assert out_py.status == out_cy.status
        assert out_py.canonical_bytes() == out_cy.canonical_bytes()


def test_backend_selection_api():
    names = kernels.available_backends()
    assert "python" in names
    current = kernels.backend_name()
    kernels.set_backend("python")
    assert kernels.backend_name() == "python"
    kernels.set_backend(current)
    with pytest.raises(ValueError):
        kernels.set_backend("nonsense")
