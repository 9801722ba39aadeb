"""Permutation operators, swap-eigenspace projectors and local-unitary-invariant observables.

Observables are kept symbolic as :class:`ObservableSpec` (weighted sums of
products of ``P+``/``P-``/identity factors placed on ``(subsystem, copy pair)``
legs). They are turned into matrices only on request (:func:`realize`) and are
otherwise applied leg by leg, which is what makes the 4-copy 4x4 case
(65536-dimensional states) tractable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .tensorkit import (
    DENSE_CAP,
    DenseCapExceeded,
    DensityOperator,
    LayoutError,
    Leg,
    LegLayout,
    StateVector,
    apply_to_tensor,
    haar_random_unitary,
    kron_all,
    project_pair,
)

# Past this size the n-copy purification would exceed ~1 GiB.
_MAX_BATCH_ELEMENTS = 1 << 26
_TWIRL_DENSE_MAX = 512


class Kind(str, Enum):
    SYM = "SYM"
    ANTISYM = "ANTISYM"
    IDENTITY = "IDENTITY"


@dataclass(frozen=True)
class ProjectorFactor:
    kind: Kind
    subsystem: str
    copies: tuple[int, ...]

    def __post_init__(self):
        kind = Kind(self.kind)
        copies = tuple(int(c) for c in self.copies)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "copies", copies)
        if kind is Kind.IDENTITY:
            if len(copies) != 1:
                raise ValueError("IDENTITY factor acts on a single copy")
        elif len(copies) != 2 or copies[0] == copies[1]:
            raise ValueError(f"{kind.value} factor needs two distinct copies, got {copies}")

    @property
    def legs(self) -> list[tuple[int, str]]:
        return [(c, self.subsystem) for c in self.copies]


def p_minus(subsystem: str, i: int, j: int) -> ProjectorFactor:
    return ProjectorFactor(Kind.ANTISYM, subsystem, (i, j))


def p_plus(subsystem: str, i: int, j: int) -> ProjectorFactor:
    return ProjectorFactor(Kind.SYM, subsystem, (i, j))


def one(subsystem: str, copy: int) -> ProjectorFactor:
    return ProjectorFactor(Kind.IDENTITY, subsystem, (copy,))


@dataclass(frozen=True)
class Term:
    coeff: float
    factors: tuple[ProjectorFactor, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "coeff", float(self.coeff))
        object.__setattr__(self, "factors", tuple(self.factors))
        legs = [leg for f in self.factors for leg in f.legs]
        if len(set(legs)) != len(legs):
            raise ValueError(f"factors of one term overlap on legs {legs}")


@dataclass(frozen=True)
class ObservableSpec:
    """Real-weighted sum of products of projector factors on an ``n_copies`` space."""

    n_copies: int
    terms: tuple[Term, ...]

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if self.n_copies < 1:
            raise ValueError("n_copies must be positive")
        for t in self.terms:
            for f in t.factors:
                if any(not 0 <= c < self.n_copies for c in f.copies):
                    raise ValueError(f"factor {f} refers to a copy outside 0..{self.n_copies - 1}")

    @classmethod
    def identity(cls, n_copies: int = 1) -> ObservableSpec:
        return cls(n_copies, (Term(1.0),))

    @property
    def subsystems(self) -> set[str]:
        return {f.subsystem for t in self.terms for f in t.factors}

    def scaled(self, c: float) -> ObservableSpec:
        return ObservableSpec(self.n_copies, tuple(Term(c * t.coeff, t.factors) for t in self.terms))

    def sites(self) -> list[tuple[str, tuple[int, int]]]:
        """Distinct two-leg measurement sites used by SYM/ANTISYM factors, in first-seen order."""
        seen: dict[tuple[str, tuple[int, int]], None] = {}
        for t in self.terms:
            for f in t.factors:
                if f.kind is not Kind.IDENTITY:
                    seen.setdefault((f.subsystem, tuple(sorted(f.copies))), None)
        return list(seen)

    def to_dict(self) -> dict:
        return {
            "n_copies": self.n_copies,
            "terms": [
                {
                    "coeff": t.coeff,
                    "factors": [
                        {"kind": f.kind.value, "subsystem": f.subsystem, "copies": list(f.copies)}
                        for f in t.factors
                    ],
                }
                for t in self.terms
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ObservableSpec:
        terms = []
        for t in data["terms"]:
            factors = tuple(ProjectorFactor(f["kind"], f["subsystem"], tuple(f["copies"])) for f in t["factors"])
            terms.append(Term(t["coeff"], factors))
        return cls(int(data["n_copies"]), tuple(terms))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> ObservableSpec:
        return cls.from_dict(json.loads(text))


# -- permutations and projectors ------------------------------------------------


def _inverse(perm: Sequence[int]) -> list[int]:
    inv = [0] * len(perm)
    for src, dst in enumerate(perm):
        inv[dst] = src
    return inv


def permutation_operator(perm: Sequence[int], d: int, n: int | None = None) -> np.ndarray:
    """Operator on ``h^{⊗n}`` moving the factor in slot ``i`` to slot ``perm[i]``."""
    n = len(perm) if n is None else n
    if sorted(perm) != list(range(n)):
        raise ValueError(f"{perm} is not a permutation of {n} items")
    D = d**n
    eye = np.eye(D, dtype=np.complex128).reshape((d,) * n + (D,))
    axes = _inverse(perm) + [n]
    return np.transpose(eye, axes).reshape(D, D)


def swap_operator(d: int) -> np.ndarray:
    return permutation_operator((1, 0), d)


def sym_projector(d: int) -> np.ndarray:
    swap = swap_operator(d)
    return 0.5 * (swap + swap @ swap)


def antisym_projector(d: int) -> np.ndarray:
    swap = swap_operator(d)
    return 0.5 * (swap @ swap - swap)


# -- evaluation -----------------------------------------------------------------


def _check_layout(spec: ObservableSpec, layout: LegLayout) -> None:
    if len(layout.copies) != spec.n_copies:
        raise LayoutError(f"observable acts on {spec.n_copies} copies, layout has {len(layout.copies)}")
    missing = spec.subsystems - set(layout.subsystems)
    if missing:
        raise LayoutError(f"subsystems {sorted(missing)} are not in the layout")


def _apply_term(term: Term, tensor: np.ndarray, layout: LegLayout) -> np.ndarray:
    out = tensor
    for f in term.factors:
        if f.kind is Kind.IDENTITY:
            continue
        a = layout.index((f.copies[0], f.subsystem))
        b = layout.index((f.copies[1], f.subsystem))
        out = project_pair(out, a, b, 1 if f.kind is Kind.SYM else -1)
    return term.coeff * out


def apply_spec(spec: ObservableSpec, tensor: np.ndarray, layout: LegLayout) -> np.ndarray:
    """Matrix-free action on a tensor shaped ``layout.dims + batch``."""
    out = np.zeros_like(tensor, dtype=np.complex128)
    for term in spec.terms:
        out += _apply_term(term, tensor, layout)
    return out


def realize(spec: ObservableSpec, layout: LegLayout) -> np.ndarray:
    """Dense matrix of ``spec`` on ``layout`` (total dimension at most ``DENSE_CAP``)."""
    _check_layout(spec, layout)
    D = layout.total_dim
    if D > DENSE_CAP:
        raise DenseCapExceeded(f"dimension {D} exceeds the dense cap {DENSE_CAP}")
    eye = np.eye(D, dtype=np.complex128).reshape(layout.dims + (D,))
    return apply_spec(spec, eye, layout).reshape(D, D)


def _copy_layout(layouts: Sequence[LegLayout]) -> LegLayout:
    legs = []
    for c, lay in enumerate(layouts):
        legs.extend(Leg(c, l.subsystem, l.dim) for l in lay.single_copy().legs)
    return LegLayout(tuple(legs))


def n_copy_purification(inp, n_copies: int) -> tuple[np.ndarray, LegLayout]:
    """Columns ``X`` with ``X X^dagger`` equal to the n-copy input, and its layout.

    ``inp`` may be a single-copy state or density (replicated ``n_copies`` times),
    a list of ``n_copies`` single-copy states or densities (taken as a product),
    or one state/density already carrying an ``n_copies`` layout.
    """
    if isinstance(inp, (StateVector, DensityOperator)):
        if len(inp.layout.copies) == n_copies:
            cols = inp.amplitudes[:, None] if isinstance(inp, StateVector) else inp.ensemble()
            return cols, inp.layout
        if len(inp.layout.copies) != 1:
            raise LayoutError(f"input spans {len(inp.layout.copies)} copies, observable needs {n_copies}")
        items = [inp] * n_copies
    else:
        items = list(inp)
        if len(items) != n_copies:
            raise LayoutError(f"{len(items)} copies supplied, observable needs {n_copies}")
    blocks = [it.amplitudes[:, None] if isinstance(it, StateVector) else it.ensemble() for it in items]
    layout = _copy_layout([it.layout for it in items])
    size = layout.total_dim * math.prod(b.shape[1] for b in blocks)
    if size > _MAX_BATCH_ELEMENTS:
        raise DenseCapExceeded(f"n-copy purification needs {size} entries")
    return kron_all(blocks), layout


def expectation_columns(spec: ObservableSpec, cols: np.ndarray, layout: LegLayout) -> np.ndarray:
    """``<x|A|x>`` for each column ``x`` of ``cols`` (real parts)."""
    _check_layout(spec, layout)
    t = cols.reshape(layout.dims + (cols.shape[1],))
    at = apply_spec(spec, t, layout).reshape(cols.shape)
    return np.einsum("ij,ij->j", cols.conj(), at).real


def expectation(spec: ObservableSpec, inp) -> float:
    """``Tr A (x_1 ⊗ ... ⊗ x_n)`` evaluated matrix-free; see :func:`n_copy_purification`."""
    cols, layout = n_copy_purification(inp, spec.n_copies)
    return float(expectation_columns(spec, cols, layout).sum())


def expectation_dense(spec: ObservableSpec, inp) -> float:
    """Same as :func:`expectation` through the dense matrix; a cross-check for small systems."""
    cols, layout = n_copy_purification(inp, spec.n_copies)
    a = realize(spec, layout)
    return float(np.trace(cols.conj().T @ a @ cols).real)


# -- invariance certification ---------------------------------------------------


def _local_unitary_apply(tensor: np.ndarray, layout: LegLayout, unitaries: dict, dagger: bool) -> np.ndarray:
    out = tensor
    for pos, leg in enumerate(layout.legs):
        u = unitaries[leg.subsystem]
        out = apply_to_tensor(u.conj().T if dagger else u, [pos], out)
    return out


def twirl_invariance_check(
    observable,
    layout: LegLayout,
    n_samples: int,
    rng: np.random.Generator,
    n_probes: int = 4,
) -> float:
    """Largest deviation of ``U A U^dagger`` from ``A`` over Haar-random local ``U``.

    ``U`` applies one Haar unitary per subsystem to every copy of that subsystem.
    Up to ``_TWIRL_DENSE_MAX`` dimensions the deviation is the largest entry of
    ``U A U^dagger - A``; above that it is the largest residual norm
    ``||(U A U^dagger - A) x||`` over Haar-random unit probe vectors.
    ``observable`` is an :class:`ObservableSpec` or a dense matrix.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    D = layout.total_dim
    dims = {l.subsystem: l.dim for l in layout.legs}
    if isinstance(observable, ObservableSpec):
        _check_layout(observable, layout)

        def apply_a(t):
            return apply_spec(observable, t, layout)
    else:
        mat = np.asarray(observable, dtype=np.complex128)
        if mat.shape != (D, D):
            raise LayoutError(f"operator of shape {mat.shape} for layout of dimension {D}")

        def apply_a(t):
            return (mat @ t.reshape(D, -1)).reshape(t.shape)

    dense = D <= _TWIRL_DENSE_MAX
    if dense:
        probes = np.eye(D, dtype=np.complex128)
    else:
        probes = rng.standard_normal((D, n_probes)) + 1j * rng.standard_normal((D, n_probes))
        probes /= np.linalg.norm(probes, axis=0)
    x = probes.reshape(layout.dims + (probes.shape[1],))
    ax = apply_a(x)
    worst = 0.0
    for _ in range(n_samples):
        us = {s: haar_random_unitary(d, rng) for s, d in dims.items()}
        y = _local_unitary_apply(x, layout, us, dagger=True)
        y = _local_unitary_apply(apply_a(y), layout, us, dagger=False)
        diff = (y - ax).reshape(D, -1)
        dev = np.abs(diff).max() if dense else np.linalg.norm(diff, axis=0).max()
        worst = max(worst, float(dev))
    return worst
