"""Closed-form and brute-force references used to calibrate and certify everything else.

Nothing here goes through the invariant-observable machinery, so these values
stay independent of the code they check.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from ._backend import kernels
from .tensorkit import (
    DensityOperator,
    LayoutError,
    StateVector,
    haar_random_unitary,
    hermitian_eigensystem,
    psd_sqrt,
    schmidt_coefficients,
)

_SIGMA_Y = np.array([[0, -1j], [1j, 0]])
_YY = np.kron(_SIGMA_Y, _SIGMA_Y)

#: G-concurrence conventions. ``normalized``: d * (prod mu)^(1/d), mu the reduced
#: eigenvalues (squared Schmidt coefficients), maximal state -> 1. ``squared``:
#: (prod mu)^(1/d), which is what the raw invariant observables produce.
#: ``amplitude``: (prod lambda)^(1/d) with lambda the Schmidt coefficients themselves.
G_CONVENTIONS = ("normalized", "squared", "amplitude")


def _matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityOperator) else np.asarray(rho, dtype=np.complex128)


def wootters_concurrence(rho) -> float:
    """Two-qubit concurrence ``max(0, l1 - l2 - l3 - l4)``.

    The ``l_i`` are the square roots of the eigenvalues of ``sqrt(rho) rho~ sqrt(rho)``,
    ``rho~ = (sy⊗sy) rho* (sy⊗sy)``. That matrix is ``S S^dagger`` with
    ``S = sqrt(rho) (sy⊗sy) sqrt(rho)*``, so the ``l_i`` are taken as singular values
    of ``S``; square-rooting tiny eigenvalues would turn 1e-16 noise into 1e-8 errors.
    """
    m = _matrix(rho)
    if m.shape != (4, 4):
        raise LayoutError(f"Wootters formula needs a 4x4 density matrix, got {m.shape}")
    root = psd_sqrt(m)
    lam = np.linalg.svd(root @ _YY @ root.conj(), compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def ckw_tangle(psi) -> float:
    """Three-tangle ``4 |d1 - 2 d2 + 4 d3|`` from Cayley's hyperdeterminant."""
    amps = psi.amplitudes if isinstance(psi, StateVector) else np.asarray(psi, dtype=np.complex128)
    if amps.size != 8 or (isinstance(psi, StateVector) and psi.layout.dims != (2, 2, 2)):
        raise LayoutError("three-tangle needs a three-qubit state")
    a = amps.reshape(2, 2, 2)
    a000, a001, a010, a011 = a[0, 0, 0], a[0, 0, 1], a[0, 1, 0], a[0, 1, 1]
    a100, a101, a110, a111 = a[1, 0, 0], a[1, 0, 1], a[1, 1, 0], a[1, 1, 1]
    d1 = a000**2 * a111**2 + a001**2 * a110**2 + a010**2 * a101**2 + a100**2 * a011**2
    d2 = (
        a000 * a111 * a011 * a100
        + a000 * a111 * a101 * a010
        + a000 * a111 * a110 * a001
        + a011 * a100 * a101 * a010
        + a011 * a100 * a110 * a001
        + a101 * a010 * a110 * a001
    )
    d3 = a000 * a110 * a101 * a011 + a111 * a001 * a010 * a100
    return float(4.0 * abs(d1 - 2.0 * d2 + 4.0 * d3))


def schmidt_g_concurrence(psi: StateVector, convention: str = "normalized") -> float:
    """G-concurrence of a ``d x d`` pure state from its Schmidt spectrum; see ``G_CONVENTIONS``."""
    dims = psi.layout.dims
    if len(dims) != 2 or dims[0] != dims[1]:
        raise LayoutError(f"G-concurrence needs a d x d bipartite state, got dims {dims}")
    if convention not in G_CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}; pick one of {G_CONVENTIONS}")
    d = dims[0]
    lam = schmidt_coefficients(psi, [0])
    if convention == "amplitude":
        return float(np.prod(lam) ** (1.0 / d))
    g = float(np.prod(lam**2) ** (1.0 / d))
    return d * g if convention == "normalized" else g


def negativity(rho, bipartition=None) -> float:
    """Sum of the absolute values of the negative eigenvalues of the partial transpose.

    ``bipartition`` lists the legs to transpose; by default the last leg.
    """
    if isinstance(rho, DensityOperator):
        layout = rho.layout
        m = rho.matrix
    else:
        raise TypeError("negativity needs a DensityOperator")
    n = len(layout.legs)
    flip = [n - 1] if bipartition is None else sorted({layout.index(k) for k in bipartition})
    dims = layout.dims
    t = m.reshape(dims + dims)
    axes = list(range(2 * n))
    for i in flip:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    pt = np.transpose(t, axes).reshape(m.shape)
    ev = hermitian_eigensystem(pt)[0]
    return float(-ev[ev < 0].sum())


def reduced_entropy(psi: StateVector, bipartition=None) -> float:
    """Entanglement entropy (natural log) across ``bipartition`` (default: first leg)."""
    lam = schmidt_coefficients(psi, [0] if bipartition is None else bipartition)
    p = lam**2 / np.sum(lam**2)
    p = p[p > 1e-300]
    return float(max(0.0, -(p * np.log(p)).sum()))


def pure_concurrence_rows(rows: np.ndarray) -> np.ndarray:
    """Homogeneous 2x2 concurrence ``2 |a00 a11 - a01 a10|`` of each amplitude row."""
    return kernels.concurrence_rows(np.ascontiguousarray(rows, dtype=np.complex128))


def _is_concurrence_2x2(fn) -> bool:
    return fn is pure_concurrence_rows or fn == "concurrence"


def convex_roof_search(
    rho,
    pure_monotone: Callable[[np.ndarray], np.ndarray] | str = "concurrence",
    m: int | None = None,
    iterations: int = 10_000,
    rng: np.random.Generator | None = None,
    round_length: int = 2000,
    initial_step: float = 0.5,
) -> float:
    """Upper estimate of the convex roof ``inf sum_i M(psi_i)`` over decompositions of ``rho``.

    Decompositions are parametrized by subnormalized rows ``psi_i = sum_j U_ij sqrt(mu_j) e_j``
    with ``U`` an ``m x r`` isometry. Each round starts from a Haar-random ``U`` and
    greedily applies random two-row unitary mixings (which keep ``sum |psi_i><psi_i| = rho``
    exactly), adapting the mixing angle. Rounds have a fixed length, so with a
    fixed seed the result is nonincreasing in ``iterations``.

    ``pure_monotone`` maps an ``(m, D)`` array of subnormalized amplitude rows to
    ``m`` values and must be homogeneous of degree one in ``|psi|^2``. The
    default ``"concurrence"`` (2x2 only) runs in the compiled kernel.
    """
    rng = np.random.default_rng() if rng is None else rng
    mat = _matrix(rho)
    w, v = hermitian_eigensystem(mat)
    keep = w > 1e-12 * max(1.0, w.max())
    mu, basis = w[keep], v[:, keep]
    r = int(keep.sum())
    m = r + 2 if m is None else int(m)
    if m < r:
        raise ValueError(f"ensemble size {m} is below rank {r}")
    if iterations < 1:
        raise ValueError("iterations must be positive")
    rows_from = (np.sqrt(mu)[:, None] * basis.T)  # r x D
    if r == 1 and m == 1:
        rows = rows_from.copy()
        return float(_evaluate(pure_monotone, rows).sum())

    fast = _is_concurrence_2x2(pure_monotone)
    if fast and mat.shape != (4, 4):
        raise LayoutError("the built-in concurrence objective is 2x2 only")

    best = math.inf
    done = 0
    while done < iterations:
        length = min(round_length, iterations - done)
        u = haar_random_unitary(m, rng)[:, :r]
        amps = np.ascontiguousarray(u @ rows_from, dtype=np.complex128)
        moves = rng.random((length, 4))
        if fast:
            kernels.givens_descent(amps, moves, initial_step)
            value = float(pure_concurrence_rows(amps).sum())
        else:
            value = _generic_descent(amps, moves, initial_step, pure_monotone)
        best = min(best, value)
        done += length
    return best


def _evaluate(fn, rows: np.ndarray) -> np.ndarray:
    if _is_concurrence_2x2(fn):
        return pure_concurrence_rows(rows)
    return np.asarray(fn(rows), dtype=np.float64)


def _generic_descent(amps: np.ndarray, moves: np.ndarray, step: float, fn) -> float:
    m = amps.shape[0]
    vals = _evaluate(fn, amps)
    total = float(vals.sum())
    for u0, u1, u2, u3 in moves.tolist():
        i = int(u0 * m)
        k = int(u1 * (m - 1))
        if k >= i:
            k += 1
        th = step * (2.0 * u2 - 1.0)
        ph = 2.0 * math.pi * u3
        c, s = math.cos(th), math.sin(th)
        e = complex(math.cos(ph), math.sin(ph))
        ni = c * amps[i] - s * e * amps[k]
        nk = s * e.conjugate() * amps[i] + c * amps[k]
        ci, ck = _evaluate(fn, np.stack([ni, nk]))
        new = total - vals[i] - vals[k] + ci + ck
        if new < total:
            amps[i], amps[k] = ni, nk
            vals[i], vals[k] = ci, ck
            total = new
            step = min(step * 1.5, math.pi / 2)
        else:
            step = max(step * 0.95, 1e-7)
    return float(_evaluate(fn, amps).sum())


def werner_concurrence(p: float) -> float:
    """Wootters concurrence of the Werner state with singlet weight ``p``."""
    return max(0.0, (3 * p - 1) / 2)
