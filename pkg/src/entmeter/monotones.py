"""Pure-state entanglement monotones as roots of multi-copy invariant-observable expectations.

Each monotone is ``calibration * <psi|^{⊗n} A_n |psi>^{⊗n} ** (1/n)``. The raw
observables reproduce elementary symmetric functions of the reduced spectrum
(e.g. ``mu1 mu2`` for two copies, ``det rho_A`` for the 3x3 and 4x4 cases), so
the calibration constant is fixed by evaluating one anchor state against its
closed-form oracle, never by hand.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable

from . import oracles, states
from .invariants import ObservableSpec, Term, expectation, one, p_minus, p_plus
from .tensorkit import LayoutError, LegLayout, StateVector

NEGATIVE_TOL = 1e-10
#: Raw expectations at or below this (times ``|psi|^(2n)``) are roundoff and read as 0.
#: The n-th root would otherwise turn 1e-17 noise into 1e-6 (3 copies) or 1e-4 (4 copies).
ZERO_FLOOR = 1e-14


class NegativeExpectationError(ValueError):
    """Expectation fell below ``-NEGATIVE_TOL``; the observable is not a valid monotone here."""


def concurrence_spec() -> ObservableSpec:
    return ObservableSpec(2, (Term(1.0, (p_minus("A", 0, 1), p_minus("B", 0, 1))),))


def tangle_spec() -> ObservableSpec:
    factors = (
        p_minus("A", 0, 1),
        p_minus("A", 2, 3),
        p_minus("B", 0, 2),
        p_minus("B", 1, 3),
        p_minus("C", 0, 1),
        p_minus("C", 2, 3),
    )
    return ObservableSpec(4, (Term(1.0, factors),))


def g_concurrence_3x3_spec() -> ObservableSpec:
    b = (p_minus("B", 0, 1), one("B", 2))
    return ObservableSpec(
        3,
        (
            Term(1.0, (one("A", 0), p_minus("A", 1, 2)) + b),
            Term(-1.0 / 3.0, (one("A", 0), p_plus("A", 1, 2)) + b),
        ),
    )


def g_concurrence_4x4_spec() -> ObservableSpec:
    # the second subsystem carries both remaining placements: copies (1,3) and (2,4)
    b = (p_minus("B", 0, 2), p_minus("B", 1, 3))
    return ObservableSpec(
        4,
        (
            Term(1.0, (p_minus("A", 0, 1), p_minus("A", 2, 3)) + b),
            Term(-1.0 / 3.0, (p_plus("A", 0, 1), p_plus("A", 2, 3)) + b),
        ),
    )


@dataclass(frozen=True)
class MonotoneDefinition:
    name: str
    spec: ObservableSpec
    dims: tuple[int, ...]
    anchor: Callable[[], StateVector] = field(repr=False, compare=False)
    oracle: Callable[[StateVector], float] = field(repr=False, compare=False)

    @property
    def n_copies(self) -> int:
        return self.spec.n_copies

    @property
    def root_exponent(self) -> float:
        return 1.0 / self.spec.n_copies

    @property
    def calibration(self) -> float:
        return _calibration(self.name)

    @property
    def layout(self) -> LegLayout:
        return LegLayout.from_dims(self.dims)


def _gconc_normalized(psi: StateVector) -> float:
    return oracles.schmidt_g_concurrence(psi, "normalized")


MONOTONES: dict[str, MonotoneDefinition] = {
    "concurrence": MonotoneDefinition(
        "concurrence", concurrence_spec(), (2, 2), states.singlet,
        lambda psi: oracles.wootters_concurrence(psi.density()),
    ),
    "tangle": MonotoneDefinition("tangle", tangle_spec(), (2, 2, 2), states.ghz, oracles.ckw_tangle),
    "gconc3": MonotoneDefinition(
        "gconc3", g_concurrence_3x3_spec(), (3, 3), lambda: states.max_entangled(3), _gconc_normalized
    ),
    "gconc4": MonotoneDefinition(
        "gconc4", g_concurrence_4x4_spec(), (4, 4), lambda: states.max_entangled(4), _gconc_normalized
    ),
}


def raw_expectation(defn: MonotoneDefinition, psi: StateVector) -> float:
    """``<psi|^{⊗n} A_n |psi>^{⊗n}`` without root or calibration."""
    if psi.layout.dims != defn.dims or len(psi.layout.copies) != 1:
        raise LayoutError(f"{defn.name} needs a single-copy state with dims {defn.dims}, got {psi.layout.dims}")
    return expectation(defn.spec, psi)


def _root(value: float, n: int, scale: float = 1.0) -> float:
    if value < -NEGATIVE_TOL * scale:
        raise NegativeExpectationError(f"expectation {value:.3e} is negative")
    if value <= ZERO_FLOOR * scale:
        return 0.0
    return value ** (1.0 / n)


@functools.lru_cache(maxsize=None)
def _calibration(name: str) -> float:
    defn = MONOTONES[name]
    anchor = defn.anchor()
    raw = _root(raw_expectation(defn, anchor), defn.n_copies)
    return defn.oracle(anchor) / raw


def evaluate_monotone(defn: MonotoneDefinition | str, psi: StateVector, raw: bool = False) -> float:
    """``calibration * expectation ** (1/n)``; with ``raw=True`` the calibration is skipped.

    Subnormalized inputs are accepted; the result then scales with ``|psi|^2``.
    """
    if isinstance(defn, str):
        defn = MONOTONES[defn]
    value = _root(raw_expectation(defn, psi), defn.n_copies, psi.norm ** (2 * defn.n_copies))
    return value if raw else defn.calibration * value


def _check_dims(psi: StateVector, dims: tuple[int, ...], what: str) -> None:
    if psi.layout.dims != dims:
        raise LayoutError(f"{what} needs subsystem dimensions {dims}, got {psi.layout.dims}")


def concurrence_pure(psi: StateVector, raw: bool = False) -> float:
    """Two-copy concurrence of a bipartite pure state.

    The observable works for any ``dA x dB``; the calibration (factor 2) is the one
    that makes the singlet evaluate to 1, so on qubits this is the Wootters value.
    """
    if len(psi.layout.legs) != 2:
        raise LayoutError(f"concurrence needs two subsystems, got {len(psi.layout.legs)}")
    defn = MONOTONES["concurrence"]
    value = _root(expectation(defn.spec, psi), 2, psi.norm**4)
    return value if raw else defn.calibration * value


def tangle_pure(psi: StateVector, raw: bool = False) -> float:
    """Four-copy tangle observable of a three-qubit state, scaled so that GHZ gives 1.

    On every three-qubit state the calibrated value equals the square root of the
    hyperdeterminant three-tangle, ``tangle_pure(psi) ** 2 == ckw_tangle(psi)``.
    """
    _check_dims(psi, (2, 2, 2), "tangle")
    return evaluate_monotone(MONOTONES["tangle"], psi, raw)


def g_concurrence_3x3(psi: StateVector, raw: bool = False) -> float:
    _check_dims(psi, (3, 3), "3x3 G-concurrence")
    return evaluate_monotone(MONOTONES["gconc3"], psi, raw)


def g_concurrence_4x4(psi: StateVector, raw: bool = False) -> float:
    """Four-copy G-concurrence of a 4x4 state; evaluated matrix-free on the 65536-dim space."""
    _check_dims(psi, (4, 4), "4x4 G-concurrence")
    return evaluate_monotone(MONOTONES["gconc4"], psi, raw)


PURE_MONOTONES: dict[str, Callable[..., float]] = {
    "concurrence": concurrence_pure,
    "tangle": tangle_pure,
    "gconc3": g_concurrence_3x3,
    "gconc4": g_concurrence_4x4,
}
