import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entmeter import oracles, states
from entmeter.invariants import ObservableSpec, expectation
from entmeter.mixedbounds import BoundConfig, concurrence_lower_bound, generic_bound, v_operator
from entmeter.monotones import MONOTONES
from entmeter.source_sim import (
    ExperimentConfig,
    SourceModel,
    StorageChannel,
    apply_storage,
    dephasing_channel,
    depolarizing_channel,
    effective_density,
    emission_average,
    outcome_distribution,
    prepare_copies,
    random_source,
    run_experiment,
    sample_emissions,
    sample_expectation,
)
from entmeter.tensorkit import (
    LayoutError,
    StateVector,
    kron_all,
    partial_trace,
    random_density,
    random_state,
)

ZERO = StateVector([1, 0], (2,))
ONE = StateVector([0, 1], (2,))


def test_effective_density_examples():
    psi = states.singlet()
    single = effective_density(SourceModel.pure(psi))
    assert np.allclose(single.matrix, np.outer(psi.amplitudes, psi.amplitudes.conj()))
    mix = effective_density(SourceModel(((0.5, ZERO), (0.5, ONE))))
    assert np.allclose(mix.matrix, np.eye(2) / 2)


def test_emission_average_two_elements(rng):
    src = SourceModel(((0.3, random_state((2, 2), rng)), (0.7, random_state((2, 2), rng))))
    rho = effective_density(src).matrix
    assert np.abs(emission_average(src, 2) - np.kron(rho, rho)).max() <= 1e-12


def test_emission_sampling_converges(rng):
    src = SourceModel(((0.25, ZERO), (0.75, ONE)))
    idx = sample_emissions(src, 2, 40_000, rng)
    assert idx.shape == (40_000, 2)
    # fraction of "both ONE" strings estimates p_1^2
    frac = np.mean((idx == 1).all(axis=1))
    assert abs(frac - 0.5625) < 5 * np.sqrt(0.5625 * 0.4375 / 40_000)


def test_source_validation(rng):
    with pytest.raises(ValueError):
        SourceModel(((0.5, ZERO), (0.4, ONE)))
    with pytest.raises(ValueError):
        SourceModel(((1.0, StateVector([0.5, 0], (2,))),))
    with pytest.raises(LayoutError):
        SourceModel(((0.5, ZERO), (0.5, states.singlet())))
    with pytest.raises(ValueError):
        SourceModel(())


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["depolarizing", "dephasing"]), st.floats(0.0, 1.0), st.integers(2, 5))
def test_kraus_completeness(kind, q, d):
    assert StorageChannel(kind, q).completeness_defect(d) <= 1e-12


@pytest.mark.parametrize("q", [-0.01, 1.01])
def test_channel_strength_range(q):
    with pytest.raises(ValueError):
        depolarizing_channel(q)
    with pytest.raises(ValueError):
        dephasing_channel(q)


def test_channel_field_checks():
    with pytest.raises(ValueError):
        StorageChannel("amplitude-damping", 0.1)
    with pytest.raises(ValueError):
        StorageChannel("dephasing", 0.1, mode="staggered")


def test_zero_strength_is_identity(rng):
    rho = random_density((2, 3), None, rng)
    for ch in (depolarizing_channel(0.0), dephasing_channel(0.0)):
        assert np.allclose(apply_storage(rho, ch, 3).matrix, rho.matrix, atol=1e-15)
    assert np.array_equal(apply_storage(rho, depolarizing_channel(0.4), 0).matrix, rho.matrix)


def test_full_depolarizing_gives_maximally_mixed_marginal(rng):
    rho = random_density((2, 2), None, rng)
    out = apply_storage(rho, depolarizing_channel(1.0), 1)
    assert np.allclose(partial_trace(out, [0]).matrix, np.eye(2) / 2, atol=1e-14)


def test_qudit_depolarizing_closed_form(rng):
    rho = random_density((3,), None, rng)
    out = apply_storage(rho, depolarizing_channel(0.3), 1)
    assert np.allclose(out.matrix, 0.7 * rho.matrix + 0.3 * np.eye(3) / 3, atol=1e-14)


def test_dephasing_closed_form(rng):
    rho = random_density((3,), None, rng)
    out = apply_storage(rho, dephasing_channel(0.4), 1)
    assert np.allclose(out.matrix, 0.6 * rho.matrix + 0.4 * np.diag(np.diag(rho.matrix)), atol=1e-14)


def test_storage_acts_locally(rng):
    # channel on each subsystem equals the Kraus sum with operators K_a ⊗ K_b
    rho = random_density((2, 2), None, rng)
    ch = dephasing_channel(0.35)
    ks = ch.kraus(2)
    ref = sum(kron_all([a, b]) @ rho.matrix @ kron_all([a, b]).conj().T for a in ks for b in ks)
    assert np.allclose(apply_storage(rho, ch, 1).matrix, ref, atol=1e-14)


def test_storage_preserves_trace(rng):
    rho = random_density((2, 3), None, rng)
    assert apply_storage(rho, depolarizing_channel(0.2), 4).trace == pytest.approx(1.0, abs=1e-13)


def test_singlet_concurrence_decays_with_storage():
    rho = states.singlet().density()
    ch = depolarizing_channel(0.1)
    values = [oracles.wootters_concurrence(apply_storage(rho, ch, s)) for s in range(12)]
    assert all(b <= a + 1e-12 for a, b in zip(values, values[1:]))
    assert oracles.wootters_concurrence(apply_storage(rho, ch, 60)) == pytest.approx(0.0, abs=1e-12)


def test_local_channels_never_increase_concurrence():
    rng = np.random.default_rng(99)
    for _ in range(1000):
        rho = random_density((2, 2), int(rng.integers(1, 5)), rng)
        ch = StorageChannel(str(rng.choice(["depolarizing", "dephasing"])), float(rng.random()))
        before = oracles.wootters_concurrence(rho)
        assert oracles.wootters_concurrence(apply_storage(rho, ch, 1)) <= before + 1e-10


def _config(source, channel=StorageChannel(), n=2, **kw):
    return ExperimentConfig(source, channel, n, kw.pop("observable", v_operator()), **kw)


def test_prepare_copies_identity_channel():
    copies = prepare_copies(_config(SourceModel.pure(states.singlet())))
    assert np.array_equal(copies[0].matrix, copies[1].matrix)


def test_prepare_copies_sequential_indexing():
    src = SourceModel.pure(states.singlet())
    ch = depolarizing_channel(0.2)
    first, second = prepare_copies(_config(src, ch))
    rho = effective_density(src)
    assert np.allclose(first.matrix, apply_storage(rho, ch, 1).matrix)
    assert np.allclose(second.matrix, rho.matrix)


def test_prepare_copies_parallel_mode():
    src = SourceModel.pure(states.singlet())
    ch = depolarizing_channel(0.2, steps=2, mode="parallel")
    copies = prepare_copies(_config(src, ch))
    ref = apply_storage(effective_density(src), depolarizing_channel(0.2), 2)
    assert all(np.allclose(c.matrix, ref.matrix) for c in copies)


def test_noisy_copies_never_beat_pristine_entanglement(rng):
    for _ in range(30):
        src = random_source((2, 2), rng)
        ch = StorageChannel(str(rng.choice(["depolarizing", "dephasing"])), float(rng.random()), int(rng.integers(1, 4)))
        copies = prepare_copies(_config(src, ch))
        bound = max(expectation(v_operator(), copies), 0.0) ** 0.5
        assert bound <= oracles.wootters_concurrence(effective_density(src)) + 1e-9


def test_identity_channel_bound_matches_mixed_bound(rng):
    src = random_source((2, 2), rng)
    copies = prepare_copies(_config(src))
    rep = generic_bound(copies, v_operator())
    assert rep.bound == pytest.approx(concurrence_lower_bound(effective_density(src)).bound, abs=1e-12)


def test_identity_observable_is_deterministic(rng):
    rho = random_density((2, 2), None, rng)
    est, err = sample_expectation(ObservableSpec.identity(2), [rho, rho], 1000, rng)
    assert est == pytest.approx(1.0)
    assert err == 0.0


def test_shots_must_be_positive(rng):
    rho = random_density((2, 2), None, rng)
    with pytest.raises(ValueError):
        sample_expectation(v_operator(), [rho, rho], 0, rng)
    with pytest.raises(ValueError):
        _config(SourceModel.pure(states.singlet()), shots=0)


def test_config_copy_count_must_match():
    with pytest.raises(ValueError):
        _config(SourceModel.pure(states.singlet()), n=3)


def test_dense_and_factorwise_agree(rng):
    rho = random_density((2, 2), None, rng)
    for spec in (v_operator(), MONOTONES["concurrence"].spec):
        means = []
        for method in ("dense", "factorwise"):
            values, probs = outcome_distribution(spec, [rho, rho], method)
            assert probs.sum() == pytest.approx(1.0)
            means.append(float(values @ probs))
        assert means[0] == pytest.approx(means[1], abs=1e-12)
        assert means[0] == pytest.approx(expectation(spec, rho), abs=1e-12)


def test_factorwise_on_large_observable(rng):
    psi = random_state((3, 3), rng)
    spec = MONOTONES["gconc3"].spec
    values, probs = outcome_distribution(spec, psi)
    assert float(values @ probs) == pytest.approx(expectation(spec, psi), abs=1e-12)


def test_estimate_within_five_sigma(rng):
    rho = random_density((2, 2), 2, rng)
    est, err = sample_expectation(v_operator(), [rho, rho], 100_000, rng)
    assert abs(est - expectation(v_operator(), rho)) <= 5 * err


def test_estimator_consistency_over_repeats():
    rng = np.random.default_rng(2024)
    rho = random_density((2, 2), 3, rng)
    exact = expectation(v_operator(), rho)
    hits = 0
    for _ in range(300):
        est, err = sample_expectation(v_operator(), [rho, rho], 2000, rng)
        hits += abs(est - exact) <= 5 * err
    assert hits / 300 >= 0.99


def test_stderr_scaling():
    rng = np.random.default_rng(5)
    rho = random_density((2, 2), 2, rng)
    small = np.mean([sample_expectation(v_operator(), [rho, rho], 5000, rng)[1] for _ in range(20)])
    big = np.mean([sample_expectation(v_operator(), [rho, rho], 20_000, rng)[1] for _ in range(20)])
    assert small / big == pytest.approx(2.0, rel=0.05)


def test_batched_sampling(rng):
    rho = random_density((2, 2), 2, rng)
    est, err = sample_expectation(v_operator(), [rho, rho], 50_001, rng, batches=7)
    assert abs(est - expectation(v_operator(), rho)) <= 5 * err
    with pytest.raises(ValueError):
        sample_expectation(v_operator(), [rho, rho], 10, rng, batches=0)


def test_pristine_singlet_experiment():
    rep = run_experiment(_config(SourceModel.pure(states.singlet()), shots=100_000, seed=11))
    extra = rep.to_dict()
    assert abs(rep.bound - 1.0) <= 3 * extra["bound_stderr"]
    assert extra["exact_bound"] == pytest.approx(1.0, abs=1e-9)
    assert rep.oracle == pytest.approx(1.0)
    assert rep.certified


def test_fully_depolarized_copies_clamp_to_zero():
    src = SourceModel.pure(states.singlet())
    ch = StorageChannel("depolarizing", 1.0, mode="parallel")
    rep = run_experiment(_config(src, ch, shots=10_000))
    assert rep.raw_trace < 0
    assert rep.to_dict()["exact_bound"] == 0.0
    assert rep.extra["copy_oracles"] == [0.0, 0.0]


def test_geometric_mean_flag_on_random_configs(rng):
    for _ in range(25):
        src = random_source((2, 2), rng)
        ch = depolarizing_channel(float(rng.random() * 0.5), int(rng.integers(1, 4)))
        rep = run_experiment(_config(src, ch, shots=1000, seed=int(rng.integers(1 << 30))))
        assert rep.extra["geometric_mean_ok"] is True


def test_config_from_json(tmp_path):
    doc = {
        "source": {"label": "flawed", "ensemble": [{"p": 0.9, "state": "singlet"}, {"p": 0.1, "state": "product:2x2"}]},
        "channel": {"kind": "dephasing", "q": 0.05},
        "alpha1": 0.25,
        "shots": 5000,
        "seed": 3,
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(doc))
    cfg = ExperimentConfig.load(path)
    assert cfg.observable == v_operator(BoundConfig(0.25))
    assert cfg.channel.kind == "dephasing"
    rep = run_experiment(cfg)
    assert rep.alpha1 == 0.25
    assert rep.extra["label"] == "flawed"
    doc["observable"] = MONOTONES["concurrence"].spec.to_dict()
    cfg2 = ExperimentConfig.from_dict(doc)
    assert cfg2.observable.n_copies == 2
