import numpy as np
import pytest
from hypothesis import given, strategies as st

from gssmp.levy import (JumpSpec, LevyModel, ModelError, as_seed_sequence, child_seed, event_batch, simulate,
                        simulate_many, values_at)


def test_pure_drift_is_exact():
    p = simulate(LevyModel(1, drift=[0.7]), 3.0, seed=1)
    ts = np.linspace(0, 3.0, 11)
    assert np.allclose(p.evaluate(ts)[:, 0], 0.7 * ts, rtol=0, atol=1e-15)
    assert not p.killed


def test_jump_path_is_continuous_between_breakpoints():
    m = LevyModel(2, drift=[0.1, -0.2], jumps=(JumpSpec(2.0, [0.5, -1.0]), JumpSpec(1.0, [-0.3, 0.2])))
    p = simulate(m, 5.0, seed=3)
    assert p.check() < 1e-12
    jumps = (p.right - p.left)[p.jump_mask()]
    known = np.array([[0.5, -1.0], [-0.3, 0.2]])
    for j in jumps:
        assert np.min(np.abs(known - j).max(axis=1)) < 1e-12


def test_same_seed_same_path():
    m = LevyModel(1, jumps=(JumpSpec(3.0, [1.0]),), diffusion=0.5)
    a, b = simulate(m, 2.0, seed=11), simulate(m, 2.0, seed=11)
    assert np.array_equal(a.times, b.times) and np.array_equal(a.right, b.right)
    c = simulate(m, 2.0, seed=12)
    assert not np.array_equal(a.right, c.right)


def test_prefix_consistency_in_horizon():
    m = LevyModel(1, drift=[0.2], jumps=(JumpSpec(1.5, [-0.4]),))
    short, long = simulate(m, 2.0, seed=5), simulate(m, 8.0, seed=5)
    ts = np.linspace(0, 2.0, 17)
    assert np.allclose(short.evaluate(ts), long.evaluate(ts), atol=1e-14)


def test_mean_increment_matches_monte_carlo():
    m = LevyModel(1, drift=[0.3], jumps=(JumpSpec(2.0, [0.5]), JumpSpec(1.0, [-1.0])))
    x = values_at(simulate_many(m, 1.0, 4000, seed=2), 1.0)[:, 0]
    se = x.std(ddof=1) / np.sqrt(x.size)
    assert abs(x.mean() - m.mean_increment()[0]) < 4 * se


def test_brownian_variance():
    m = LevyModel(1, diffusion=2.0)
    x = values_at(simulate_many(m, 1.0, 4000, seed=9), 1.0)[:, 0]
    assert abs(x.var(ddof=1) - 2.0) < 0.15


def test_killing_rate():
    m = LevyModel(1, base_kill_rate=1.5)
    kt = np.array([simulate(m, 50.0, seed=i).end for i in range(2000)])
    assert abs(kt.mean() - 1 / 1.5) < 4 * kt.std() / np.sqrt(kt.size)


def test_kill_coupled_jump_not_applied():
    m = LevyModel(1, jumps=(JumpSpec(1.0, [2.0], kill_prob=1.0),))
    p = simulate(m, 100.0, seed=4)
    assert p.killed
    assert np.allclose(p.kill_jump, [2.0])
    assert np.allclose(p.end_value, 0.0)


def test_event_batch_matches_simulate():
    m = LevyModel(2, jumps=(JumpSpec(2.0, [1.0, 0.0]), JumpSpec(1.0, [0.0, 1.0])))
    offsets, times, types, _, _ = event_batch(m, 3.0, 5, seed=8)
    ss = as_seed_sequence(8)
    for i in range(5):
        p = simulate(m, 3.0, child_seed(ss, i))
        assert np.array_equal(p.times[1:], times[offsets[i]:offsets[i + 1]])


@pytest.mark.parametrize("bad", [
    dict(dim=3),
    dict(dim=1, drift=[1.0, 2.0]),
    dict(dim=2, diffusion=[[1.0, 0.0], [0.0, -1.0]]),
    dict(dim=1, base_kill_rate=-1.0),
])
def test_invalid_models(bad):
    with pytest.raises(ModelError):
        LevyModel(**bad)


def test_invalid_jump():
    with pytest.raises(ModelError):
        JumpSpec(0.0, [1.0])
    with pytest.raises(ModelError):
        JumpSpec(1.0, [1.0], kill_prob=1.5)


def test_roundtrip_dict():
    m = LevyModel(2, drift=[0.1, 0.2], diffusion=[[1.0, 0.2], [0.2, 0.5]],
                  jumps=(JumpSpec(1.0, [1.0, -1.0], 0.25),), base_kill_rate=0.3)
    m2 = LevyModel.from_dict(m.to_dict())
    assert m2.to_dict() == m.to_dict()


@given(rate=st.floats(0.1, 5.0), size=st.floats(-2.0, 2.0), drift=st.floats(-1.0, 1.0),
       seed=st.integers(0, 2 ** 32 - 1))
def test_jump_count_times_size_plus_drift(rate, size, drift, seed):
    m = LevyModel(1, drift=[drift], jumps=(JumpSpec(rate, [size]),))
    p = simulate(m, 2.0, seed=seed)
    n_jumps = len(p.times) - 1
    assert np.isclose(p.end_value[0], drift * 2.0 + n_jumps * size, atol=1e-12)
