"""Simulation of imperfect n-copy preparation and shot-based collective measurements.

A flawed source emits ``psi_i`` with probability ``p_i``; copies that wait for the
collective measurement decohere under local storage channels. Measurements are
simulated shot by shot from the exact Born distribution of the observable's
outcomes, so estimates carry honest shot noise.
"""

from __future__ import annotations

import functools
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import oracles, states
from .invariants import (
    Kind,
    ObservableSpec,
    expectation,
    n_copy_purification,
    realize,
)
from .mixedbounds import BoundConfig, BoundReport, inequality_audit, v_operator
from .monotones import MONOTONES
from .tensorkit import (
    DensityOperator,
    LayoutError,
    LegLayout,
    StateVector,
    apply_to_tensor,
    hermitian_eigensystem,
    kron_all,
    project_pair,
    state_from_dict,
)

#: Largest n-copy dimension sampled through the dense eigendecomposition.
SAMPLING_DENSE_CAP = 1024
CHANNEL_KINDS = ("identity", "depolarizing", "dephasing")
STORAGE_MODES = ("sequential", "parallel")


@dataclass(frozen=True)
class SourceModel:
    ensemble: tuple[tuple[float, StateVector], ...]
    label: str = ""

    def __post_init__(self):
        ens = tuple((float(p), psi) for p, psi in self.ensemble)
        object.__setattr__(self, "ensemble", ens)
        if not ens:
            raise ValueError("empty ensemble")
        if any(p < 0 for p, _ in ens) or abs(sum(p for p, _ in ens) - 1.0) > 1e-12:
            raise ValueError("ensemble probabilities must be nonnegative and sum to 1")
        if any(abs(psi.norm - 1.0) > 1e-10 for _, psi in ens):
            raise ValueError("ensemble states must be normalized")
        if len({psi.layout for _, psi in ens}) != 1:
            raise LayoutError("ensemble states must share one layout")

    @property
    def layout(self) -> LegLayout:
        return self.ensemble[0][1].layout

    @classmethod
    def pure(cls, psi: StateVector, label: str = "") -> SourceModel:
        return cls(((1.0, psi),), label)


def effective_density(source: SourceModel) -> DensityOperator:
    m = sum(p * np.outer(psi.amplitudes, psi.amplitudes.conj()) for p, psi in source.ensemble)
    return DensityOperator(m, source.layout)


def emission_average(source: SourceModel, n: int) -> np.ndarray:
    """Probability-weighted sum over every n-fold emission string of its product projector."""
    projectors = [(p, np.outer(psi.amplitudes, psi.amplitudes.conj())) for p, psi in source.ensemble]
    total = 0
    for string in itertools.product(projectors, repeat=n):
        weight = math.prod(p for p, _ in string)
        total = total + weight * kron_all([proj for _, proj in string])
    return total


def sample_emissions(source: SourceModel, n: int, n_strings: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``n_strings`` random n-fold emission strings, shape ``(n_strings, n)``."""
    probs = np.array([p for p, _ in source.ensemble])
    return rng.choice(len(probs), size=(n_strings, n), p=probs)


# -- storage ----------------------------------------------------------------------


def _weyl(d: int, a: int, b: int) -> np.ndarray:
    shift = np.roll(np.eye(d), a, axis=0)
    clock = np.diag(np.exp(2j * np.pi * b * np.arange(d) / d))
    return shift @ clock


@dataclass(frozen=True)
class StorageChannel:
    """Local noise applied to every subsystem for each storage step.

    ``steps`` is the number of channel applications per waiting slot. In
    ``sequential`` mode copy ``k`` of ``n`` (0-based) waits ``n - 1 - k`` slots; in
    ``parallel`` mode every copy gets ``steps`` applications.
    """

    kind: str = "identity"
    q: float = 0.0
    steps: int = 1
    mode: str = "sequential"

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise ValueError(f"channel kind must be one of {CHANNEL_KINDS}")
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"channel strength {self.q} outside [0, 1]")
        if self.steps < 0:
            raise ValueError("steps must be nonnegative")
        if self.mode not in STORAGE_MODES:
            raise ValueError(f"mode must be one of {STORAGE_MODES}")

    def kraus(self, d: int) -> list[np.ndarray]:
        return list(_kraus(self.kind, self.q, d))

    def completeness_defect(self, d: int) -> float:
        acc = sum(k.conj().T @ k for k in self.kraus(d))
        return float(np.abs(acc - np.eye(d)).max())

    def to_dict(self) -> dict:
        return {"kind": self.kind, "q": self.q, "steps": self.steps, "mode": self.mode}


@functools.lru_cache(maxsize=None)
def _kraus(kind: str, q: float, d: int) -> tuple[np.ndarray, ...]:
    if kind == "identity" or q == 0.0:
        return (np.eye(d, dtype=np.complex128),)
    if kind == "depolarizing":
        # rho -> (1 - q) rho + q Tr(rho) I/d via the d^2 Weyl operators
        ops = [math.sqrt(1.0 - q + q / d**2) * np.eye(d, dtype=np.complex128)]
        ops += [math.sqrt(q) / d * _weyl(d, a, b) for a in range(d) for b in range(d) if (a, b) != (0, 0)]
        return tuple(ops)
    ops = [math.sqrt(1.0 - q) * np.eye(d, dtype=np.complex128)]
    for k in range(d):
        proj = np.zeros((d, d), dtype=np.complex128)
        proj[k, k] = math.sqrt(q)
        ops.append(proj)
    return tuple(ops)


def depolarizing_channel(q: float, steps: int = 1, mode: str = "sequential") -> StorageChannel:
    return StorageChannel("depolarizing", q, steps, mode)


def dephasing_channel(q: float, steps: int = 1, mode: str = "sequential") -> StorageChannel:
    return StorageChannel("dephasing", q, steps, mode)


def apply_storage(rho: DensityOperator, channel: StorageChannel, steps: int) -> DensityOperator:
    """Apply ``channel`` ``steps`` times to every subsystem of ``rho``, one subsystem at a time."""
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if steps == 0 or channel.kind == "identity" or channel.q == 0.0:
        return rho
    layout = rho.layout
    n = len(layout.legs)
    t = rho.matrix.reshape(layout.dims + layout.dims)
    for _ in range(steps):
        for pos, leg in enumerate(layout.legs):
            ops = channel.kraus(leg.dim)
            if len(ops) == 1:
                continue
            t = sum(apply_to_tensor(k.conj(), [n + pos], apply_to_tensor(k, [pos], t)) for k in ops)
    m = t.reshape(rho.matrix.shape)
    return DensityOperator(0.5 * (m + m.conj().T), layout)


# -- experiment configuration -----------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    source: SourceModel
    channel: StorageChannel = StorageChannel()
    n_copies: int = 2
    observable: ObservableSpec = field(default_factory=lambda: v_operator(BoundConfig()))
    shots: int = 100_000
    seed: int = 0
    alpha1: float | None = None
    monotone: str = "concurrence"
    audit_trials: int = 2000

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be at least 1")
        if self.n_copies != self.observable.n_copies:
            raise ValueError(f"n_copies={self.n_copies} but the observable acts on {self.observable.n_copies}")

    @classmethod
    def from_dict(cls, data: dict) -> ExperimentConfig:
        src = data["source"]
        ensemble = []
        for item in src["ensemble"]:
            st = item["state"]
            st = states.named(st) if isinstance(st, str) else state_from_dict(st)
            if not isinstance(st, StateVector):
                raise LayoutError("ensemble members must be pure states")
            ensemble.append((float(item.get("p", 1.0)), st))
        source = SourceModel(tuple(ensemble), src.get("label", ""))
        channel = StorageChannel(**data.get("channel", {}))
        alpha1 = data.get("alpha1")
        if "observable" in data:
            observable = ObservableSpec.from_dict(data["observable"])
        else:
            alpha1 = 0.5 if alpha1 is None else float(alpha1)
            observable = v_operator(BoundConfig(alpha1))
        return cls(
            source=source,
            channel=channel,
            n_copies=int(data.get("n_copies", observable.n_copies)),
            observable=observable,
            shots=int(data.get("shots", 100_000)),
            seed=int(data.get("seed", 0)),
            alpha1=alpha1,
            monotone=data.get("monotone", "concurrence"),
            audit_trials=int(data.get("audit_trials", 2000)),
        )

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def storage_steps(channel: StorageChannel, n: int) -> list[int]:
    if channel.mode == "parallel":
        return [channel.steps] * n
    return [(n - 1 - k) * channel.steps for k in range(n)]


def prepare_copies(config: ExperimentConfig) -> list[DensityOperator]:
    rho = effective_density(config.source)
    return [apply_storage(rho, config.channel, s) for s in storage_steps(config.channel, config.n_copies)]


# -- shot sampling ----------------------------------------------------------------------


def _dense_distribution(spec: ObservableSpec, cols: np.ndarray, layout: LegLayout):
    w, v = hermitian_eigensystem(realize(spec, layout))
    weights = (np.abs(v.conj().T @ cols) ** 2).sum(axis=1)
    keys = np.round(w / 1e-9).astype(np.int64)
    values, probs = [], []
    for key in np.unique(keys):
        sel = keys == key
        values.append(float(w[sel].mean()))
        probs.append(float(weights[sel].sum()))
    return np.array(values), np.array(probs)


def _factorwise_distribution(spec: ObservableSpec, cols: np.ndarray, layout: LegLayout):
    sites = spec.sites()
    legs = [leg for sub, pair in sites for leg in ((pair[0], sub), (pair[1], sub))]
    if len(set(legs)) != len(legs):
        raise ValueError("factorwise sampling needs measurement sites on disjoint legs")
    axes = [(layout.index((pair[0], sub)), layout.index((pair[1], sub))) for sub, pair in sites]
    t0 = cols.reshape(layout.dims + (cols.shape[1],))
    outcomes, probs = [], []

    def descend(t, k, prefix):
        if k == len(sites):
            outcomes.append(prefix)
            probs.append(float(np.vdot(t, t).real))
            return
        for sign in (1, -1):
            descend(project_pair(t, axes[k][0], axes[k][1], sign), k + 1, prefix + (sign,))

    descend(t0, 0, ())
    index = {site: k for k, site in enumerate(sites)}
    values = []
    for out in outcomes:
        total = 0.0
        for term in spec.terms:
            hit = all(
                f.kind is Kind.IDENTITY
                or out[index[(f.subsystem, tuple(sorted(f.copies)))]] == (1 if f.kind is Kind.SYM else -1)
                for f in term.factors
            )
            total += term.coeff if hit else 0.0
        values.append(total)
    return np.array(values), np.array(probs)


def outcome_distribution(observable: ObservableSpec, copies, method: str = "auto"):
    """Distinct measurement values and their Born probabilities on the given copies."""
    cols, layout = n_copy_purification(copies, observable.n_copies)
    if method == "auto":
        method = "dense" if layout.total_dim <= SAMPLING_DENSE_CAP else "factorwise"
    if method == "dense":
        values, probs = _dense_distribution(observable, cols, layout)
    elif method == "factorwise":
        values, probs = _factorwise_distribution(observable, cols, layout)
    else:
        raise ValueError(f"unknown sampling method {method!r}")
    probs = np.clip(probs, 0.0, None)
    return values, probs / probs.sum()


def sample_expectation(observable: ObservableSpec, copies, shots: int, rng: np.random.Generator,
                       method: str = "auto", batches: int = 1) -> tuple[float, float]:
    """Shot estimate of ``Tr (⊗ rho_i) A`` and its standard error ``std / sqrt(shots)``.

    With ``batches > 1`` the shots are split over independent child streams of
    ``rng`` and the outcome counts are pooled before computing mean and variance.
    """
    if shots < 1:
        raise ValueError("shots must be at least 1")
    if batches < 1:
        raise ValueError("batches must be at least 1")
    values, probs = outcome_distribution(observable, copies, method)
    if batches == 1:
        counts = rng.multinomial(shots, probs)
    else:
        sizes = np.full(batches, shots // batches)
        sizes[: shots % batches] += 1
        counts = sum(child.multinomial(int(k), probs) for child, k in zip(rng.spawn(batches), sizes))
    mean = float(counts @ values) / shots
    if shots == 1:
        return mean, math.nan
    var = float(counts @ (values - mean) ** 2) / (shots - 1)
    return mean, math.sqrt(var / shots)


# -- full protocol ----------------------------------------------------------------------


@functools.lru_cache(maxsize=32)
def _audit(spec_json: str, monotone: str, trials: int):
    spec = ObservableSpec.from_json(spec_json)
    return inequality_audit(spec, MONOTONES[monotone], trials, np.random.default_rng(20240))


def run_experiment(config: ExperimentConfig, chain_tol: float = 1e-9) -> BoundReport:
    """Prepare noisy copies, measure the observable with shot noise and compare with oracles.

    ``geometric_mean_ok`` (2x2 concurrence only) checks
    ``C(rho)^n >= prod_i C(rho_i) >= Tr (⊗ rho_i) V`` with the Wootters oracle.
    """
    rng = np.random.default_rng(config.seed)
    spec = config.observable
    n = spec.n_copies
    pristine = effective_density(config.source)
    copies = prepare_copies(config)
    estimate, stderr = sample_expectation(spec, copies, config.shots, rng)
    exact = expectation(spec, copies)
    bound = max(estimate, 0.0) ** (1.0 / n)
    bound_stderr = stderr / n * estimate ** (1.0 / n - 1.0) if estimate > 0 else None

    two_qubit = pristine.layout.dims == (2, 2) and config.monotone == "concurrence"
    oracle = copy_oracles = chain_ok = None
    if two_qubit:
        oracle = oracles.wootters_concurrence(pristine)
        copy_oracles = [oracles.wootters_concurrence(r) for r in copies]
        product = math.prod(copy_oracles)
        chain_ok = bool(oracle**n + chain_tol >= product and product + chain_tol >= exact)

    certified, violations = False, None
    mono = MONOTONES.get(config.monotone)
    if config.audit_trials > 0 and mono is not None and mono.dims == pristine.layout.dims:
        audit = _audit(spec.to_json(), config.monotone, config.audit_trials)
        certified, violations = audit.certified, audit.violations

    return BoundReport(
        bound=bound,
        raw_trace=exact,
        alpha1=config.alpha1,
        oracle=oracle,
        certified=certified,
        violations=violations,
        extra={
            "label": config.source.label,
            "n_copies": n,
            "shots": config.shots,
            "estimate": estimate,
            "stderr": stderr,
            "bound_stderr": bound_stderr,
            "exact_bound": max(exact, 0.0) ** (1.0 / n),
            "storage_steps": storage_steps(config.channel, n),
            "copy_oracles": copy_oracles,
            "geometric_mean_ok": chain_ok,
        },
    )


def random_source(layout, rng: np.random.Generator, n_states: int | None = None) -> SourceModel:
    """Ensemble of 1-4 Haar states with Dirichlet weights, for tests and sweeps."""
    from .tensorkit import random_state

    k = int(rng.integers(1, 5)) if n_states is None else n_states
    p = rng.dirichlet(np.ones(k))
    p = p / p.sum()
    p[-1] = 1.0 - p[:-1].sum()
    return SourceModel(tuple((float(pi), random_state(layout, rng)) for pi in p), "random")
