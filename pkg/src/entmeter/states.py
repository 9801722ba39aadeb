"""Named reference states: ``singlet``, ``bell``, ``ghz``, ``w``, ``maxent3``, ``maxent4``,
``werner:P``, ``product:DxD[xD...]``, ``maxmixed:DxD``, ``maxent:D``."""

from __future__ import annotations

import math

import numpy as np

from .tensorkit import DensityOperator, LegLayout, StateVector


def singlet() -> StateVector:
    return StateVector(np.array([0, 1, -1, 0]) / math.sqrt(2), (2, 2))


def bell() -> StateVector:
    return StateVector(np.array([1, 0, 0, 1]) / math.sqrt(2), (2, 2))


def ghz(n: int = 3) -> StateVector:
    v = np.zeros(2**n)
    v[0] = v[-1] = 1 / math.sqrt(2)
    return StateVector(v, (2,) * n)


def w_state(n: int = 3) -> StateVector:
    v = np.zeros(2**n)
    for k in range(n):
        v[1 << k] = 1 / math.sqrt(n)
    return StateVector(v, (2,) * n)


def max_entangled(d: int) -> StateVector:
    return StateVector(np.eye(d).reshape(-1) / math.sqrt(d), (d, d))


def schmidt_state(coeffs, d: int | None = None) -> StateVector:
    """``sum_i c_i |ii>`` in a ``d x d`` space (``d`` defaults to ``len(coeffs)``)."""
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    d = len(coeffs) if d is None else d
    m = np.zeros((d, d), dtype=np.complex128)
    m[np.arange(len(coeffs)), np.arange(len(coeffs))] = coeffs
    return StateVector(m.reshape(-1) / np.linalg.norm(coeffs), (d, d))


def product(dims) -> StateVector:
    v = np.zeros(math.prod(dims))
    v[0] = 1.0
    return StateVector(v, tuple(dims))


def max_mixed(dims) -> DensityOperator:
    D = math.prod(dims)
    return DensityOperator(np.eye(D) / D, LegLayout.from_dims(tuple(dims)))


def werner(p: float) -> DensityOperator:
    """``p |psi-><psi-| + (1 - p) I/4``."""
    s = singlet().amplitudes
    return DensityOperator(p * np.outer(s, s.conj()) + (1 - p) * np.eye(4) / 4, (2, 2))


def _dims(text: str) -> tuple[int, ...]:
    return tuple(int(x) for x in text.lower().split("x"))


def named(name: str) -> StateVector | DensityOperator:
    """Resolve a built-in state name; raises ``KeyError`` if unknown."""
    key, _, arg = name.strip().partition(":")
    key = key.lower()
    try:
        if key == "singlet":
            return singlet()
        if key == "bell":
            return bell()
        if key == "ghz":
            return ghz(int(arg) if arg else 3)
        if key == "w":
            return w_state(int(arg) if arg else 3)
        if key in ("maxent3", "maxent4"):
            return max_entangled(int(key[-1]))
        if key == "maxent":
            return max_entangled(int(arg))
        if key == "werner":
            p = float(arg)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"Werner weight {p} outside [0, 1]")
            return werner(p)
        if key == "product":
            return product(_dims(arg or "2x2"))
        if key == "maxmixed":
            return max_mixed(_dims(arg or "2x2"))
    except ValueError as exc:
        raise KeyError(f"bad argument in state name {name!r}: {exc}") from exc
    raise KeyError(f"unknown state name {name!r}")
