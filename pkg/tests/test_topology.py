"""Network bookkeeping, the shared layer engine, and model serialization."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import oracle_event_counts
from tdekws.dynamics import LifParams
from tdekws.topology import (
    LIF,
    LIFREC,
    TDE,
    EventLog,
    NetworkSpec,
    ParameterSet,
    balance_hidden_size,
    connection_count,
    enumerate_tde_pairs,
    forward_timestep,
    full_tde_spec,
    gamma_from_raw,
    init_hidden_state,
    load_model,
    pair_index_arrays,
    run_network,
    save_model,
    softplus,
    softplus_inv,
    tde_spec,
    trainable_parameter_count,
)

CELL = LifParams(alpha=0.6, beta=0.7, threshold=1.0, dt=0.015)


def small_spec(kind, rng, n_l0=6, n_l1=5, n_l2=4):
    if kind == TDE:
        pool = enumerate_tde_pairs(n_l0)
        idx = rng.choice(len(pool), size=n_l1, replace=False)
        return tde_spec([pool[i] for i in idx], n_l0=n_l0, n_l2=n_l2)
    return NetworkSpec(kind=kind, n_l1=n_l1, n_l0=n_l0, n_l2=n_l2)


def make_params(spec, rng, scale=2.5):
    # weights big enough that random rasters produce spikes in both layers
    w2 = rng.uniform(-1.0, 1.0, (spec.n_l2, spec.n_l1)) * scale / np.sqrt(spec.n_l1)
    if spec.kind == TDE:
        tau = rng.uniform(0.01, 0.1, spec.n_l1)
        return ParameterSet(CELL, CELL, CELL, w2=w2, tau_g_raw=softplus_inv(tau))
    w1 = rng.uniform(0.0, 1.0, (spec.n_l1, spec.n_l0)) * scale / np.sqrt(spec.n_l0)
    w_rec = None
    if spec.kind == LIFREC:
        w_rec = (
            rng.uniform(-1.0, 1.0, (spec.n_l1, spec.n_l1)) * scale / np.sqrt(spec.n_l1)
        )
    return ParameterSet(CELL, CELL, CELL, w2=w2, w1=w1, w_rec=w_rec)


def test_enumerate_pairs_row_major():
    pairs = enumerate_tde_pairs(3)
    assert pairs == [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
    full = enumerate_tde_pairs(32)
    assert len(full) == 32 * 31 == 992
    assert len(set(full)) == 992
    assert all(a != b for a, b in full)
    assert full[:3] == [(0, 1), (0, 2), (0, 3)]


def test_connection_count_formulas():
    # TDE cell: 2 afferents + 11 readout fanout = 13 connections each
    assert connection_count(full_tde_spec()) == 992 * 13 == 12896
    assert connection_count(tde_spec(enumerate_tde_pairs(32)[:540])) == 7020
    assert connection_count(tde_spec(enumerate_tde_pairs(32)[:186])) == 2418
    assert connection_count(NetworkSpec(kind=LIF, n_l1=300)) == 43 * 300
    assert connection_count(NetworkSpec(kind=LIF, n_l1=163)) == 7009
    assert connection_count(NetworkSpec(kind=LIFREC, n_l1=94)) == 43 * 94 + 94 * 94
    assert connection_count(NetworkSpec(kind=LIFREC, n_l1=65)) == 7020
    assert connection_count(NetworkSpec(kind=LIFREC, n_l1=32)) == 2400


def test_balance_matches_reference_sizes():
    assert balance_hidden_size(12896, LIFREC) == 94
    assert balance_hidden_size(12896, LIF) == 300
    assert balance_hidden_size(7020, LIFREC) == 65
    assert balance_hidden_size(7020, LIF) == 163
    assert balance_hidden_size(2418, LIFREC) == 32
    assert balance_hidden_size(2418, LIF) == 56


def test_balance_tie_prefers_smaller():
    # lifrec counts at n=10 and n=11 are 530 and 594; 562 is equidistant
    assert abs(connection_count(NetworkSpec(kind=LIFREC, n_l1=10)) - 562) == 32
    assert abs(connection_count(NetworkSpec(kind=LIFREC, n_l1=11)) - 562) == 32
    assert balance_hidden_size(562, LIFREC) == 10


def test_balance_rejects_tiny_targets():
    with pytest.raises(ValueError):
        balance_hidden_size(10, LIF)
    with pytest.raises(ValueError):
        balance_hidden_size(43, LIFREC)
    with pytest.raises(ValueError):
        balance_hidden_size(7020, TDE)


@given(target=st.integers(44, 20000))
@settings(max_examples=40, deadline=None)
def test_balance_is_the_closest_size(target):
    for kind in (LIF, LIFREC):
        best = balance_hidden_size(target, kind)
        err = abs(connection_count(NetworkSpec(kind=kind, n_l1=best)) - target)
        for n in range(1, best + 3):
            other = abs(connection_count(NetworkSpec(kind=kind, n_l1=n)) - target)
            assert err <= other
            if other == err:  # ties resolve to the smaller network
                assert best <= n


def test_trainable_parameter_counts():
    assert trainable_parameter_count(tde_spec(enumerate_tde_pairs(32)[:540])) == 6480
    assert trainable_parameter_count(NetworkSpec(kind=LIFREC, n_l1=65)) == 7020
    assert trainable_parameter_count(NetworkSpec(kind=LIF, n_l1=163)) == 7009


def test_spec_validation():
    with pytest.raises(ValueError):
        NetworkSpec(kind="gru", n_l1=4)
    with pytest.raises(ValueError):
        NetworkSpec(kind=TDE, n_l1=4)  # pairs missing
    with pytest.raises(ValueError):
        NetworkSpec(kind=TDE, n_l1=3, tde_pairs=((0, 1), (1, 2)))
    with pytest.raises(ValueError):
        tde_spec([(0, 0)])
    with pytest.raises(ValueError):
        tde_spec([(0, 1), (0, 1)])
    with pytest.raises(ValueError):
        tde_spec([(0, 32)])
    with pytest.raises(ValueError):
        NetworkSpec(kind=LIF, n_l1=4, tde_pairs=((0, 1),))
    with pytest.raises(ValueError):
        NetworkSpec(kind=LIF, n_l1=0)


def test_parameter_validation():
    rng = np.random.default_rng(0)
    spec = small_spec(LIFREC, rng)
    params = make_params(spec, rng)
    params.validate_for(spec)
    with pytest.raises(ValueError):
        params.validate_for(NetworkSpec(kind=LIFREC, n_l1=spec.n_l1 + 1,
                                        n_l0=spec.n_l0, n_l2=spec.n_l2))
    with pytest.raises(ValueError):
        params.validate_for(NetworkSpec(kind=LIF, n_l1=spec.n_l1,
                                        n_l0=spec.n_l0, n_l2=spec.n_l2))
    tde = small_spec(TDE, rng)
    with pytest.raises(ValueError):
        make_params(tde, rng).validate_for(
            NetworkSpec(kind=LIF, n_l1=tde.n_l1, n_l0=tde.n_l0, n_l2=tde.n_l2)
        )
    with pytest.raises(ValueError):
        ParameterSet(CELL, CELL, CELL, w2=np.zeros((tde.n_l2, tde.n_l1))
                     ).validate_for(tde)


def test_pair_index_arrays_follow_pair_order():
    spec = tde_spec([(3, 1), (0, 2), (2, 5)], n_l0=6, n_l2=4)
    fac, trig = pair_index_arrays(spec)
    assert fac.tolist() == [3, 0, 2]
    assert trig.tolist() == [1, 2, 5]


def test_softplus_inverse_round_trip():
    y = np.logspace(-3, 1, 25)
    np.testing.assert_allclose(softplus(softplus_inv(y)), y, rtol=1e-12)
    # gamma from a 30 ms gain tau at a 15 ms step is exp(-1/2)
    raw = softplus_inv(np.array([0.030]))
    np.testing.assert_allclose(
        gamma_from_raw(raw, dt=0.015), np.exp(-0.5), rtol=1e-12
    )


@pytest.mark.parametrize("kind", [TDE, LIF, LIFREC])
def test_forward_timestep_matches_run_network(kind):
    rng = np.random.default_rng(7)
    spec = small_spec(kind, rng)
    params = make_params(spec, rng)
    raster = (rng.random((spec.n_l0, 40)) < 0.4).astype(np.uint8)
    res = run_network(spec, params, raster)
    assert res.l1_spikes.sum() > 0 and res.l2_spikes.sum() > 0
    hidden = init_hidden_state(spec)
    out = init_hidden_state(NetworkSpec(kind=LIF, n_l1=spec.n_l2, n_l0=spec.n_l1))
    for t in range(raster.shape[1]):
        hidden, out, s1, s2 = forward_timestep(
            spec, params, raster[:, t].astype(float), hidden, out
        )
        np.testing.assert_array_equal(s1, res.l1_spikes[:, t])
        np.testing.assert_array_equal(s2, res.l2_spikes[:, t])


def test_forward_timestep_rejects_wrong_state_kind():
    rng = np.random.default_rng(3)
    spec = small_spec(TDE, rng)
    params = make_params(spec, rng)
    lif_state = init_hidden_state(NetworkSpec(kind=LIF, n_l1=spec.n_l1,
                                              n_l0=spec.n_l0, n_l2=spec.n_l2))
    out = init_hidden_state(NetworkSpec(kind=LIF, n_l1=spec.n_l2, n_l0=spec.n_l1))
    with pytest.raises(TypeError):
        forward_timestep(spec, params, np.zeros(spec.n_l0), lif_state, out)


def test_lifrec_with_zero_recurrence_matches_lif():
    rng = np.random.default_rng(11)
    rec_spec = small_spec(LIFREC, rng)
    rec_params = make_params(rec_spec, rng)
    rec_params.w_rec[:] = 0.0
    lif_spec = NetworkSpec(kind=LIF, n_l1=rec_spec.n_l1, n_l0=rec_spec.n_l0,
                           n_l2=rec_spec.n_l2)
    lif_params = ParameterSet(CELL, CELL, CELL, w2=rec_params.w2.copy(),
                              w1=rec_params.w1.copy())
    raster = (rng.random((rec_spec.n_l0, 30)) < 0.5).astype(np.uint8)
    a = run_network(rec_spec, rec_params, raster)
    b = run_network(lif_spec, lif_params, raster)
    np.testing.assert_array_equal(a.l1_spikes, b.l1_spikes)
    np.testing.assert_array_equal(a.l2_spikes, b.l2_spikes)
    # recurrent deliveries are still charged for the wired connections
    extra = a.l1_spikes.sum() * rec_spec.n_l1
    assert a.event_log.input_events[1] == b.event_log.input_events[1] + extra


@pytest.mark.parametrize("kind", [TDE, LIF, LIFREC])
def test_run_network_deterministic_and_pure(kind):
    rng = np.random.default_rng(23)
    spec = small_spec(kind, rng)
    params = make_params(spec, rng)
    raster = (rng.random((spec.n_l0, 25)) < 0.4).astype(np.uint8)
    before = raster.copy()
    a = run_network(spec, params, raster)
    b = run_network(spec, params, raster)
    np.testing.assert_array_equal(raster, before)
    np.testing.assert_array_equal(a.l1_spikes, b.l1_spikes)
    np.testing.assert_array_equal(a.l2_spikes, b.l2_spikes)
    assert a.event_log.input_events.tolist() == b.event_log.input_events.tolist()


def test_run_network_rejects_bad_raster():
    rng = np.random.default_rng(1)
    spec = small_spec(LIF, rng)
    params = make_params(spec, rng)
    with pytest.raises(ValueError):
        run_network(spec, params, np.zeros((spec.n_l0 + 1, 10)))
    with pytest.raises(ValueError):
        run_network(spec, params, np.zeros(spec.n_l0))


@pytest.mark.parametrize("kind", [TDE, LIF, LIFREC])
@pytest.mark.parametrize("seed", [0, 1, 2])
def test_event_log_matches_per_spike_walk(kind, seed):
    rng = np.random.default_rng(seed)
    spec = small_spec(kind, rng, n_l0=8, n_l1=7, n_l2=5)
    params = make_params(spec, rng)
    raster = (rng.random((spec.n_l0, 35)) < 0.35).astype(np.uint8)
    res = run_network(spec, params, raster)
    want_in, want_out = oracle_event_counts(
        kind, spec.tde_pairs, spec.n_l0, spec.n_l1, spec.n_l2,
        raster, res.l1_spikes, res.l2_spikes,
    )
    np.testing.assert_array_equal(res.event_log.input_events, want_in)
    np.testing.assert_array_equal(res.event_log.output_spikes, want_out)
    assert res.event_log.n_samples == 1


def test_event_log_merge():
    a = EventLog(np.array([0, 5, 7]), np.array([3, 2, 1]), 2)
    b = EventLog(np.array([0, 1, 1]), np.array([4, 0, 9]), 3)
    m = a.merge(b)
    assert m.input_events.tolist() == [0, 6, 8]
    assert m.output_spikes.tolist() == [7, 2, 10]
    assert m.n_samples == 5
    assert m.total_spikes() == 19


@pytest.mark.parametrize("kind", [TDE, LIF, LIFREC])
def test_model_round_trip(kind, tmp_path):
    rng = np.random.default_rng(5)
    spec = small_spec(kind, rng)
    params = make_params(spec, rng)
    path = tmp_path / "model.json"
    save_model(path, spec, params)
    spec2, params2 = load_model(path)
    assert spec2 == spec
    np.testing.assert_array_equal(params2.w2, params.w2)
    for name in ("w1", "w_rec", "tau_g_raw"):
        a, b = getattr(params, name), getattr(params2, name)
        assert (a is None) == (b is None)
        if a is not None:
            np.testing.assert_array_equal(a, b)
    assert params2.l1_params == params.l1_params
    raster = (rng.random((spec.n_l0, 20)) < 0.4).astype(np.uint8)
    np.testing.assert_array_equal(
        run_network(spec, params, raster).l2_spikes,
        run_network(spec2, params2, raster).l2_spikes,
    )


def test_model_load_rejects_other_formats(tmp_path):
    rng = np.random.default_rng(5)
    spec = small_spec(LIF, rng)
    path = tmp_path / "model.json"
    save_model(path, spec, make_params(spec, rng))
    doc = json.loads(path.read_text())
    assert doc["format"] == "tdekws-model-v1"
    doc["format"] = "something-else"
    path.write_text(json.dumps(doc))
    with pytest.raises(ValueError):
        load_model(path)
