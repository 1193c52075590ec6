import numpy as np
import pytest
from hypothesis import given, strategies as st

from gssmp.levy import JumpSpec, LevyModel, simulate
from gssmp.paths import from_chords
from gssmp.timechange import (BeyondLifetime, LifetimeStatus, StructureError, TimeChange, exp_integral,
                              lifetime)


def test_drift_closed_form():
    xi = simulate(LevyModel(1, drift=[0.4]), 2.0)
    tc = TimeChange(xi, 1.5)
    t = np.linspace(0, 2.0, 9)
    assert np.allclose(tc(t), np.expm1(0.6 * t) / 0.6, rtol=1e-14)
    y = tc(t)
    assert np.allclose(tc.invert(y), t, atol=1e-14)


def test_alpha_zero_is_identity():
    xi = simulate(LevyModel(1, jumps=(JumpSpec(2.0, [1.0]),)), 3.0, seed=1)
    tc = TimeChange(xi, 0.0, scale=2.0)
    assert tc.total == pytest.approx(6.0)
    assert lifetime(tc).status is LifetimeStatus.DIVERGENT


def test_deterministic_lifetime():
    life = lifetime(TimeChange(simulate(LevyModel(1, drift=[1.0]), 1.0), -1.0))
    assert life.status is LifetimeStatus.CONVERGED and life.value == pytest.approx(1.0, abs=1e-15)


def test_killed_lifetime():
    xi = simulate(LevyModel(1, base_kill_rate=2.0), 100.0, seed=3)
    life = lifetime(TimeChange(xi, 0.5))
    assert life.status is LifetimeStatus.KILLED and life.finite
    with pytest.raises(BeyondLifetime):
        TimeChange(xi, 0.5).invert(life.value * 1.01)


def test_1d_only():
    with pytest.raises(StructureError):
        TimeChange(simulate(LevyModel(2), 1.0), 1.0)


def test_exp_integral_jump_weighting():
    # eta jumps by 1 at t=1 while xi jumps from 0 to 2 there: weight uses xi(1-) = 0
    xi = from_chords([0.0, 1.0], [[0.0], [0.0]], [[0.0], [2.0]], 2.0, end_value=[2.0])
    eta = from_chords([0.0, 1.0], [[0.0], [0.0]], [[0.0], [1.0]], 2.0, end_value=[1.0])
    assert exp_integral(xi, eta, 1.0, 1.5) == pytest.approx(1.0)


def _riemann(xi, alpha, t, n=200_000):
    s = (np.arange(n) + 0.5) * t / n
    return np.exp(alpha * xi.evaluate(s)[:, 0]).sum() * t / n


@given(alpha=st.sampled_from([-1.0, -0.3, 0.5, 1.0]), seed=st.integers(0, 10 ** 6))
def test_matches_midpoint_oracle(alpha, seed):
    xi = simulate(LevyModel(1, drift=[0.2], jumps=(JumpSpec(1.0, [-0.5]),)), 1.0, seed=seed)
    tc = TimeChange(xi, alpha)
    assert tc(1.0) == pytest.approx(_riemann(xi, alpha, 1.0), rel=1e-4)


@given(alpha=st.floats(-2, 2), seed=st.integers(0, 10 ** 6), frac=st.floats(0, 1))
def test_invert_is_inverse(alpha, seed, frac):
    xi = simulate(LevyModel(1, drift=[-0.1], jumps=(JumpSpec(2.0, [0.7]),)), 2.0, seed=seed)
    tc = TimeChange(xi, alpha)
    target = frac * tc.total
    s = tc.invert(target)
    assert 0 <= s <= xi.end
    assert tc(s) == pytest.approx(target, rel=1e-12, abs=1e-14)


@given(seed=st.integers(0, 10 ** 6))
def test_monotone(seed):
    xi = simulate(LevyModel(1, jumps=(JumpSpec(3.0, [1.0]), JumpSpec(3.0, [-1.0]))), 2.0, seed=seed)
    assert np.all(np.diff(TimeChange(xi, 1.0)(np.linspace(0, 2, 50))) > 0)
