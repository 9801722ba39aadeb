"""Dense complex linear algebra over multi-copy composite Hilbert spaces.

Every vector and operator carries a :class:`LegLayout` naming its tensor legs by
``(copy, subsystem)``. Flattening is row-major with the first declared leg
slowest, which is exactly the ordering produced by ``np.kron``; every module
relies on this single convention.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ._backend import kernels

#: Largest total dimension for which dense operators are built.
DENSE_CAP = 4096
HERMITIAN_TOL = 1e-10
PSD_FLOOR = -1e-8


class LayoutError(ValueError):
    """Leg structure of an input does not fit the requested operation."""


class NotHermitianError(ValueError):
    pass


class NotPSDError(ValueError):
    pass


class DenseCapExceeded(ValueError):
    """A dense operator above :data:`DENSE_CAP` was requested; use a matrix-free path."""


@dataclass(frozen=True)
class Leg:
    copy: int
    subsystem: str
    dim: int


@dataclass(frozen=True)
class LegLayout:
    legs: tuple[Leg, ...]

    def __post_init__(self):
        legs = tuple(Leg(int(l.copy), str(l.subsystem), int(l.dim)) for l in self.legs)
        object.__setattr__(self, "legs", legs)
        if not legs:
            raise LayoutError("layout needs at least one leg")
        keys = [(l.copy, l.subsystem) for l in legs]
        if len(set(keys)) != len(keys):
            raise LayoutError(f"duplicate (copy, subsystem) legs in {keys}")
        for l in legs:
            if l.dim < 1:
                raise LayoutError(f"leg {l} has dimension < 1")

    @classmethod
    def from_dims(cls, dims: Sequence[int], labels: Sequence[str] | None = None, copy: int = 0) -> LegLayout:
        """Single-copy layout with subsystems labelled A, B, C, ... unless given."""
        if labels is None:
            labels = [chr(ord("A") + i) for i in range(len(dims))]
        return cls(tuple(Leg(copy, lab, d) for lab, d in zip(labels, dims)))

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(l.dim for l in self.legs)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    @property
    def copies(self) -> tuple[int, ...]:
        return tuple(sorted({l.copy for l in self.legs}))

    @property
    def subsystems(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for l in self.legs:
            seen.setdefault(l.subsystem, None)
        return tuple(seen)

    def index(self, key) -> int:
        """Axis position of a leg given as an int position or a ``(copy, subsystem)`` pair."""
        if isinstance(key, (int, np.integer)):
            if not 0 <= key < len(self.legs):
                raise LayoutError(f"leg position {key} out of range")
            return int(key)
        copy, sub = key
        for pos, l in enumerate(self.legs):
            if l.copy == copy and l.subsystem == sub:
                return pos
        raise LayoutError(f"no leg ({copy}, {sub!r}) in layout")

    def single_copy(self) -> LegLayout:
        """Layout of one copy, relabelled as copy 0. Requires identical copies."""
        per_copy = self._per_copy()
        first = per_copy[self.copies[0]]
        return LegLayout(tuple(Leg(0, s, d) for s, d in first))

    def _per_copy(self) -> dict[int, list[tuple[str, int]]]:
        out: dict[int, list[tuple[str, int]]] = {}
        for l in self.legs:
            out.setdefault(l.copy, []).append((l.subsystem, l.dim))
        return out

    def is_uniform(self) -> bool:
        per_copy = self._per_copy()
        structures = {tuple(v) for v in per_copy.values()}
        return len(structures) == 1

    def replicate(self, n: int) -> LegLayout:
        """n-copy layout of a single-copy layout, copy-major (matches ``kron`` of copies)."""
        base = self.single_copy()
        return LegLayout(tuple(Leg(c, l.subsystem, l.dim) for c in range(n) for l in base.legs))

    def to_list(self) -> list[dict]:
        return [{"copy": l.copy, "subsystem": l.subsystem, "dim": l.dim} for l in self.legs]

    @classmethod
    def from_list(cls, items: Iterable[dict]) -> LegLayout:
        return cls(tuple(Leg(int(it["copy"]), str(it["subsystem"]), int(it["dim"])) for it in items))


def _as_layout(layout) -> LegLayout:
    if isinstance(layout, LegLayout):
        return layout
    return LegLayout.from_dims(tuple(layout))


@dataclass(frozen=True, eq=False)
class StateVector:
    """Pure (possibly subnormalized) state. ``amplitudes`` is flat and read-only."""

    amplitudes: np.ndarray
    layout: LegLayout

    def __post_init__(self):
        layout = _as_layout(self.layout)
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.size != layout.total_dim:
            raise LayoutError(f"{amps.size} amplitudes for layout of dimension {layout.total_dim}")
        nrm = np.linalg.norm(amps)
        if not 0.0 < nrm <= 1.0 + 1e-9:
            raise ValueError(f"state norm {nrm} outside (0, 1]")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "layout", layout)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def density(self) -> DensityOperator:
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout)

    def normalized(self) -> StateVector:
        return StateVector(self.amplitudes / self.norm, self.layout)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    matrix: np.ndarray
    layout: LegLayout

    def __post_init__(self):
        layout = _as_layout(self.layout)
        mat = np.array(self.matrix, dtype=np.complex128)
        D = layout.total_dim
        if mat.shape != (D, D):
            raise LayoutError(f"matrix of shape {mat.shape} for layout of dimension {D}")
        if np.abs(mat - mat.conj().T).max() > HERMITIAN_TOL:
            raise NotHermitianError("density operator is not Hermitian")
        tr = np.trace(mat).real
        if not 0.0 < tr <= 1.0 + 1e-9:
            raise ValueError(f"density trace {tr} outside (0, 1]")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)
        object.__setattr__(self, "layout", layout)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def purity(self) -> float:
        return float(np.vdot(self.matrix, self.matrix).real)

    def check(self) -> None:
        """Raise if an eigenvalue falls below the PSD floor."""
        if np.linalg.eigvalsh(self.matrix).min() < PSD_FLOOR:
            raise NotPSDError("density operator has a negative eigenvalue")

    def ensemble(self, tol: float = 1e-14) -> np.ndarray:
        """Columns ``sqrt(w_k) v_k`` of the eigen-decomposition, so ``rho = X X^dagger``."""
        w, v = hermitian_eigensystem(self.matrix)
        w = np.clip(w, 0.0, None)
        keep = w > tol * max(1.0, w.max(initial=0.0))
        return v[:, keep] * np.sqrt(w[keep])


# -- basic operations ---------------------------------------------------------


def kron(a, b) -> np.ndarray:
    return np.kron(np.asarray(a), np.asarray(b))


def kron_all(ops: Sequence) -> np.ndarray:
    out = np.asarray(ops[0])
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def tensor_states(states: Sequence[StateVector]) -> StateVector:
    """Product state of several single-copy states, copies numbered in order."""
    legs = []
    for c, st in enumerate(states):
        legs.extend(Leg(c, l.subsystem, l.dim) for l in st.layout.single_copy().legs)
    return StateVector(kron_all([s.amplitudes for s in states]), LegLayout(tuple(legs)))


def tensor_densities(rhos: Sequence[DensityOperator]) -> DensityOperator:
    legs = []
    for c, r in enumerate(rhos):
        legs.extend(Leg(c, l.subsystem, l.dim) for l in r.layout.single_copy().legs)
    return DensityOperator(kron_all([r.matrix for r in rhos]), LegLayout(tuple(legs)))


def _copy_permutation_axes(layout: LegLayout, perm: Sequence[int]) -> list[int]:
    copies = layout.copies
    if sorted(perm) != list(range(len(copies))):
        raise LayoutError(f"{perm} is not a permutation of {len(copies)} copies")
    if not layout.is_uniform():
        raise LayoutError("copies have mismatched subsystem structure")
    rank = {c: r for r, c in enumerate(copies)}
    inverse = [0] * len(perm)
    for src, dst in enumerate(perm):
        inverse[dst] = src
    # output leg k holds the content of the leg with the same subsystem on copy perm^-1(c_k)
    axes = []
    for l in layout.legs:
        src_copy = copies[inverse[rank[l.copy]]]
        axes.append(layout.index((src_copy, l.subsystem)))
    return axes


def permute_legs(state: StateVector, perm: Sequence[int]) -> StateVector:
    """Move the content of copy ``i`` to copy slot ``perm[i]``.

    With this convention ``permute_legs(permute_legs(s, p), q)`` equals
    ``permute_legs(s, [q[p[i]] for i in ...])``. The cyclic permutation
    ``(1, 2, 0)`` sends ``a⊗b⊗c`` to ``c⊗a⊗b``.
    """
    axes = _copy_permutation_axes(state.layout, perm)
    return StateVector(np.transpose(state.tensor(), axes).reshape(-1), state.layout)


def partial_trace(rho: DensityOperator, keep) -> DensityOperator:
    """Trace out every leg not in ``keep`` (positions or ``(copy, subsystem)`` keys)."""
    layout = rho.layout
    keep_pos = sorted({layout.index(k) for k in keep})
    if not keep_pos:
        raise LayoutError("keep set is empty")
    n = len(layout.legs)
    dims = layout.dims
    t = rho.matrix.reshape(dims + dims)
    letters = [chr(ord("a") + i) for i in range(2 * n)]
    row = letters[:n]
    col = [row[i] if i not in keep_pos else letters[n + i] for i in range(n)]
    out = [row[i] for i in keep_pos] + [col[i] for i in keep_pos]
    red = np.einsum("".join(row + col) + "->" + "".join(out), t)
    d = math.prod(dims[i] for i in keep_pos)
    return DensityOperator(red.reshape(d, d), LegLayout(tuple(layout.legs[i] for i in keep_pos)))


def apply_to_tensor(op, axes: Sequence[int], tensor: np.ndarray) -> np.ndarray:
    """Apply ``op`` to the given axes of ``tensor``; extra axes are left untouched."""
    axes = list(axes)
    dims = [tensor.shape[a] for a in axes]
    k = len(axes)
    op = np.asarray(op, dtype=np.complex128).reshape(dims + dims)
    moved = np.tensordot(op, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(moved, list(range(k)), axes)


def apply_to_legs(op, target_legs: Sequence, state: StateVector) -> StateVector:
    """Matrix-free ``(op on target_legs ⊗ identity elsewhere) |state>``."""
    layout = state.layout
    axes = [layout.index(t) for t in target_legs]
    if len(set(axes)) != len(axes):
        raise LayoutError("target legs repeat")
    need = math.prod(layout.dims[a] for a in axes)
    if np.shape(op) != (need, need):
        raise LayoutError(f"operator of shape {np.shape(op)} for target legs of dimension {need}")
    out = apply_to_tensor(op, axes, state.tensor())
    return StateVector(out.reshape(-1), layout)


def project_pair(tensor: np.ndarray, ax1: int, ax2: int, sign: int) -> np.ndarray:
    """Apply ``(1 + sign * SWAP_{ax1,ax2}) / 2`` to a tensor via the compiled kernel."""
    if ax1 == ax2:
        raise LayoutError("pair projector needs two distinct axes")
    i, j = sorted((ax1, ax2))
    shape = tensor.shape
    five = (
        math.prod(shape[:i]),
        shape[i],
        math.prod(shape[i + 1 : j]),
        shape[j],
        math.prod(shape[j + 1 :]),
    )
    return kernels.pair_project(tensor.reshape(five), int(sign)).reshape(shape)


def schmidt_coefficients(psi: StateVector, bipartition) -> np.ndarray:
    """Schmidt coefficients (descending) across ``bipartition``.

    ``bipartition`` is either the legs of the first block or a pair of blocks that
    together cover every leg exactly once.
    """
    layout = psi.layout
    if len(bipartition) == 2 and all(isinstance(b, (list, tuple, set, frozenset)) for b in bipartition):
        first = [layout.index(k) for k in bipartition[0]]
        second = [layout.index(k) for k in bipartition[1]]
    else:
        first = [layout.index(k) for k in bipartition]
        second = [i for i in range(len(layout.legs)) if i not in first]
    if not first or not second or sorted(first + second) != list(range(len(layout.legs))):
        raise LayoutError("bipartition must split the legs into two nonempty blocks")
    t = np.transpose(psi.tensor(), first + second)
    da = math.prod(layout.dims[i] for i in first)
    return np.linalg.svd(t.reshape(da, -1), compute_uv=False)


def check_hermitian(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    h = np.asarray(h, dtype=np.complex128)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise NotHermitianError(f"operator of shape {h.shape} is not square")
    if h.size and np.abs(h - h.conj().T).max() > tol:
        raise NotHermitianError("operator is not Hermitian")
    return h


def hermitian_eigensystem(h) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvector columns."""
    h = check_hermitian(h)
    return np.linalg.eigh(0.5 * (h + h.conj().T))


def psd_sqrt(rho) -> np.ndarray:
    w, v = hermitian_eigensystem(rho)
    if w.size and w.min() < PSD_FLOOR:
        raise NotPSDError(f"eigenvalue {w.min():.3e} below {PSD_FLOOR}")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def haar_random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary from the QR decomposition of a complex Ginibre matrix."""
    z = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def random_state(layout, rng: np.random.Generator) -> StateVector:
    layout = _as_layout(layout)
    D = layout.total_dim
    v = rng.standard_normal(D) + 1j * rng.standard_normal(D)
    return StateVector(v / np.linalg.norm(v), layout)


def random_density(layout, rank: int | None, rng: np.random.Generator) -> DensityOperator:
    """Unit-trace density operator of the requested rank (full rank if ``rank`` is None)."""
    layout = _as_layout(layout)
    D = layout.total_dim
    rank = D if rank is None else int(rank)
    if not 1 <= rank <= D:
        raise ValueError(f"rank {rank} outside [1, {D}]")
    g = rng.standard_normal((D, rank)) + 1j * rng.standard_normal((D, rank))
    rho = g @ g.conj().T
    return DensityOperator(rho / np.trace(rho).real, layout)


def apply_local_unitaries(state: StateVector, unitaries: dict) -> StateVector:
    """Apply ``unitaries[subsystem]`` to every leg of that subsystem (all copies)."""
    t = state.tensor()
    for pos, leg in enumerate(state.layout.legs):
        u = unitaries.get(leg.subsystem)
        if u is not None:
            t = apply_to_tensor(u, [pos], t)
    return StateVector(t.reshape(-1), state.layout)


# -- state files --------------------------------------------------------------


def _floats(xs) -> str:
    return "[" + ", ".join(format(float(x), ".17g") for x in xs) + "]"


def state_to_json(state: StateVector | DensityOperator) -> str:
    if isinstance(state, StateVector):
        kind, flat = "pure", state.amplitudes
    else:
        kind, flat = "density", state.matrix.reshape(-1)
    legs = json.dumps(state.layout.to_list())
    return (
        f'{{"kind": "{kind}", "legs": {legs},\n'
        f' "re": {_floats(flat.real)},\n "im": {_floats(flat.imag)}}}\n'
    )


def state_from_dict(data: dict) -> StateVector | DensityOperator:
    try:
        kind = data["kind"]
        layout = LegLayout.from_list(data["legs"])
        re = np.asarray(data["re"], dtype=np.float64).reshape(-1)
        im = np.asarray(data.get("im", np.zeros_like(re)), dtype=np.float64).reshape(-1)
    except (KeyError, TypeError) as exc:
        raise LayoutError(f"malformed state document: {exc}") from exc
    if re.shape != im.shape:
        raise LayoutError("re and im have different lengths")
    values = re + 1j * im
    D = layout.total_dim
    if kind == "pure":
        return StateVector(values, layout)
    if kind == "density":
        if values.size != D * D:
            raise LayoutError(f"{values.size} entries for a {D}x{D} density matrix")
        return DensityOperator(values.reshape(D, D), layout)
    raise LayoutError(f"unknown state kind {kind!r}")


def save_state(path, state) -> None:
    with open(path, "w") as fh:
        fh.write(state_to_json(state))


def load_state(path) -> StateVector | DensityOperator:
    with open(path) as fh:
        return state_from_dict(json.load(fh))
