import importlib
import os
import subprocess
import sys

import numpy as np
import pytest

from entmeter import _backend, _fallback

try:
    compiled = _backend.load("cython")
except ImportError:  # extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def test_default_backend_is_reported():
    assert _backend.BACKEND in ("cython", "python")
    assert _backend.load("python") is _fallback


def test_env_var_forces_fallback():
    env = dict(os.environ, ENTMETER_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from entmeter import BACKEND; print(BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_ext
def test_pair_project_parity(rng):
    psi = rng.standard_normal((3, 4, 2, 4, 5)) + 1j * rng.standard_normal((3, 4, 2, 4, 5))
    for sign in (1, -1):
        assert np.array_equal(compiled.pair_project(psi, sign), _fallback.pair_project(psi, sign))
    with pytest.raises(ValueError):
        compiled.pair_project(np.zeros((1, 2, 1, 3, 1), complex), 1)


@needs_ext
def test_concurrence_rows_parity(rng):
    rows = rng.standard_normal((1000, 4)) + 1j * rng.standard_normal((1000, 4))
    assert np.array_equal(compiled.concurrence_rows(rows), _fallback.concurrence_rows(rows))


@needs_ext
@pytest.mark.parametrize("m", [1, 2, 4, 6])
def test_givens_descent_parity(rng, m):
    amps = rng.standard_normal((m, 4)) + 1j * rng.standard_normal((m, 4))
    moves = rng.random((5000, 4))
    a, b = amps.copy(), amps.copy()
    assert compiled.givens_descent(a, moves, 0.5) == _fallback.givens_descent(b, moves, 0.5)
    assert np.array_equal(a, b)


@needs_ext
def test_descent_preserves_ensemble(rng):
    amps = rng.standard_normal((5, 4)) + 1j * rng.standard_normal((5, 4))
    before = amps.T @ amps.conj()
    total, _ = compiled.givens_descent(amps, rng.random((3000, 4)), 0.5)
    assert np.allclose(amps.T @ amps.conj(), before, atol=1e-12)
    assert total == pytest.approx(_fallback.concurrence_rows(amps).sum(), abs=1e-12)


def test_fallback_package_works_end_to_end():
    code = (
        "from entmeter import states, concurrence_pure, BACKEND;"
        "from entmeter.oracles import convex_roof_search;"
        "print(BACKEND, round(concurrence_pure(states.singlet()), 12),"
        " round(convex_roof_search(states.werner(0.8), iterations=2000), 4))"
    )
    env = dict(os.environ, ENTMETER_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["python", "1.0", "0.7"]
