"""Small worked examples with hand-computed answers, one block per module."""
import numpy as np
import pytest

from gssmp.canonical import (Classification, build_g_1d, build_g_2d_commutative, canonicalize, classify,
                             commutator_Y0, jacobian2, verify_homomorphism)
from gssmp.invariance import (additive, fragmentation_components, get_components, lamperti_components, pssmp,
                              star, t_law)
from gssmp.lamperti import SelfSimilarProcessSpec, build_trajectory, lifetime_law_sample, recover_driver
from gssmp.levy import JumpSpec, LevyModel, as_seed_sequence, child_seed, simulate, simulate_many, values_at
from gssmp.paths import CEMETERY, from_chords, left_value_at, value_at
from gssmp.psi import get_psi
from gssmp.stats import ks_compare, mc_check
from gssmp.tgroup import levy_on_T, t_compose, t_inverse
from gssmp.timechange import LifetimeStatus, TimeChange, exp_integral, lifetime

E = np.e

# -- Lévy paths ----------------------------------------------------------------------


def test_drift_path_single_segment():
    p = simulate(LevyModel(1, drift=[1.0]), 2.0)
    assert len(p.times) == 1
    assert value_at(p, 0.5)[0] == 0.5 and left_value_at(p, 1.0)[0] == 1.0


def test_compound_poisson_mean():
    x = values_at(simulate_many(LevyModel(1, jumps=(JumpSpec(1.0, [1.0]),)), 1.0, 20_000, seed=1), 1.0)[:, 0]
    assert mc_check(x, 1.0)["passed"]


def test_killed_fraction():
    m = LevyModel(1, base_kill_rate=2.0)
    killed = np.array([simulate(m, 1.0, seed=s).killed for s in range(20_000)])
    assert mc_check(killed.astype(float), 1 - np.exp(-2.0))["passed"]


def test_breakpoint_conventions():
    m = LevyModel(1, jumps=(JumpSpec(3.0, [1.0]),), base_kill_rate=0.5)
    p = next(q for q in (simulate(m, 5.0, seed=s) for s in range(100)) if len(q.times) > 1 and q.killed)
    t1 = p.times[1]
    assert value_at(p, t1)[0] == p.right[1, 0] and left_value_at(p, t1)[0] == p.left[1, 0]
    mid = 0.5 * (p.times[0] + p.times[1])
    assert np.array_equal(value_at(p, mid), left_value_at(p, mid))
    assert value_at(p, p.end + 1.0) is CEMETERY


def test_increment_stationarity():
    m = LevyModel(1, drift=[0.2], jumps=(JumpSpec(2.0, [0.5]), JumpSpec(1.0, [-1.0])), diffusion=0.3)
    ss = as_seed_sequence(3)
    inc, fresh = [], []
    for i in range(4000):
        p = simulate(m, 1.5, child_seed(ss, i))
        inc.append(p.evaluate(1.5)[0] - p.evaluate(1.0)[0])
        fresh.append(simulate(m, 0.5, child_seed(ss, 10 ** 6 + i)).evaluate(0.5)[0])
    assert ks_compare(np.array(inc), np.array(fresh))["passed"]


def test_kill_monotone_in_rate():
    for seed in range(50):
        slow = simulate(LevyModel(1, drift=[0.1], base_kill_rate=0.5), 100.0, seed)
        fast = simulate(LevyModel(1, drift=[0.1], base_kill_rate=2.0), 100.0, seed)
        assert fast.end <= slow.end


# -- exponential functionals ---------------------------------------------------------


def test_piecewise_constant_functional():
    xi = from_chords([0.0, 1.0], [[0.0], [0.0]], [[0.0], [1.0]], 2.0, end_value=[1.0])
    assert TimeChange(xi, 1.0).total == pytest.approx(1 + E, rel=1e-15)


def test_closed_form_inverse():
    tc = TimeChange(simulate(LevyModel(1, drift=[1.0]), 5.0), -1.0)
    assert tc.invert(1 - np.exp(-2.0)) == pytest.approx(2.0, abs=1e-12)
    assert TimeChange(simulate(LevyModel(1), 1.0), 0.0).invert(0.7) == pytest.approx(0.7, abs=1e-15)


def test_invert_round_trip_many():
    xi = simulate(LevyModel(1, drift=[0.3], jumps=(JumpSpec(2.0, [-0.8]),)), 3.0, seed=5)
    tc = TimeChange(xi, 0.8)
    t = np.random.default_rng(0).uniform(0, 3.0, 1000)
    assert np.max(np.abs(tc.invert(tc(t)) - t)) < 1e-10


def test_exp_integral_examples():
    zero = simulate(LevyModel(1), 2.0)
    eta = simulate(LevyModel(1, drift=[0.4], jumps=(JumpSpec(2.0, [1.0]),)), 2.0, seed=1)
    xi0 = from_chords(eta.times, np.zeros(len(eta.times)), np.zeros(len(eta.times)), 2.0, end_value=[0.0])
    assert exp_integral(xi0, eta, 1.0, 1.7) == pytest.approx(eta.evaluate(1.7)[0], abs=1e-14)
    ramp = simulate(LevyModel(1, drift=[1.0]), 2.0)
    unit = simulate(LevyModel(1, drift=[1.0]), 2.0)
    assert exp_integral(ramp, unit, -1.0, 1.0) == pytest.approx(1 - np.exp(-1.0), rel=1e-14)
    xi = from_chords([0.0, 0.5], [[0.0], [0.5]], [[0.0], [0.5]], 1.0, end_value=[1.0])
    jump = from_chords([0.0, 0.5], [[0.0], [0.0]], [[0.0], [2.0]], 1.0, end_value=[2.0])
    assert exp_integral(xi, jump, 1.0, 1.0) == pytest.approx(2 * np.exp(0.5), rel=1e-14)
    assert zero.end == 2.0


def test_prefactor_is_exactly_proportional():
    xi = simulate(LevyModel(1, jumps=(JumpSpec(3.0, [0.4]),)), 2.0, seed=4)
    a, b = TimeChange(xi, 0.7), TimeChange(xi, 0.7, scale=0.25)
    assert np.array_equal(b.cumulative, 0.25 * a.cumulative)


def test_exp_integral_linear_in_eta():
    m = LevyModel(2, jumps=(JumpSpec(2.0, [0.5, 1.0]), JumpSpec(1.0, [-0.2, 0.0]), JumpSpec(1.0, [0.0, -2.0])))
    p = simulate(m, 2.0, seed=6)
    xi, eta = p.component(0), p.component(1)
    jumps = eta.right[:, 0] - eta.left[:, 0]
    mask = np.arange(len(jumps)) % 2 == 0

    def part(keep):
        r = np.cumsum(np.where(keep, jumps, 0.0))
        return from_chords(p.times, r - np.where(keep, jumps, 0.0), r, 2.0, end_value=[r[-1]])
    total = exp_integral(xi, eta, 1.0, 2.0)
    assert exp_integral(xi, part(mask), 1.0, 2.0) + exp_integral(xi, part(~mask), 1.0, 2.0) == pytest.approx(
        total, rel=1e-13, abs=1e-14)


def test_killed_lifetime_matches_riemann():
    xi = simulate(LevyModel(1, drift=[0.5], jumps=(JumpSpec(1.0, [-0.5]),), base_kill_rate=0.7), 50.0, seed=3)
    life = lifetime(TimeChange(xi, 1.0))
    n = 400_000
    s = (np.arange(n) + 0.5) * xi.end / n
    ref = np.exp(xi.evaluate(s)[:, 0]).sum() * xi.end / n
    assert life.status is LifetimeStatus.KILLED and life.value == pytest.approx(ref, rel=1e-4)


# -- Lamperti ------------------------------------------------------------------------


def test_trivial_clock_2d_identity():
    drv = LevyModel(2, drift=[0.1, 0.2], jumps=(JumpSpec(1.0, [-0.4, 0.5]),))
    spec = SelfSimilarProcessSpec(get_psi("identity", dim=2), drv, 0.0, beta=0.0, start=[1.0, -2.0])
    tr = build_trajectory(spec, 2.0, seed=3)
    for t in (0.3, 1.0, 1.9):
        assert np.allclose(tr.value_at(t), tr.driver.evaluate(t) + [1.0, -2.0], atol=1e-14)


def test_trivial_clock_recovery_is_g_of_X():
    spec = SelfSimilarProcessSpec(get_psi("exp"), LevyModel(1, drift=[0.1], jumps=(JumpSpec(1.0, [0.5]),)), 0.0)
    tr = build_trajectory(spec, 2.0, seed=1)
    rec = recover_driver(tr, pssmp(0.0), np.log)
    assert np.array_equal(rec.times, tr.path.times)
    assert np.allclose(rec.right, np.log(tr.path.right), atol=1e-15)


def test_deterministic_lifetime_law():
    spec = SelfSimilarProcessSpec(get_psi("exp"), LevyModel(1, drift=[1.0]), -1.0)
    samples, excluded = lifetime_law_sample(spec, 10, seed=0)
    assert excluded == 0 and np.allclose(samples, 1.0, atol=1e-14)


# -- invariance components -----------------------------------------------------------


def test_star_examples():
    assert star(pssmp(), 2.0, 3.0) == 6.0
    assert np.allclose(star(t_law(), [1.0, 2.0], [3.0, 4.0]), [4.0, 2 + 4 * E])
    comp = fragmentation_components()
    x = np.array([0.7, 0.2])
    assert np.allclose(star(comp, comp.y0, x), x)


# -- canonical maps ------------------------------------------------------------------


def test_jacobian_examples():
    assert np.allclose(jacobian2(t_law(), np.array([0.5, 1.0])), np.diag([1.0, np.exp(0.5)]))
    assert jacobian2(pssmp(), 3.0) == pytest.approx(3.0)
    assert np.allclose(jacobian2(fragmentation_components(), np.array([1.0, 0.0])), np.eye(2))


def test_commutator_examples():
    assert np.allclose(commutator_Y0(additive(2)), 0.0, atol=1e-12)
    assert np.linalg.norm(commutator_Y0(get_components("additive@exp_exp"))) < 1e-5
    assert classify(fragmentation_components(0.5)) is Classification.NONCOMMUTATIVE


def test_additive_gives_identity():
    g = build_g_1d(additive(1))
    assert np.allclose(g(np.array([[-2.0], [0.5], [3.0]])), [[-2.0], [0.5], [3.0]], atol=1e-12)
    assert g.alpha == pytest.approx(0.0, abs=1e-14)
    g2 = build_g_2d_commutative(additive(2))
    assert np.allclose(g2.M, np.eye(2)) and g2.alpha == pytest.approx(0.0, abs=1e-14)
    assert verify_homomorphism(g2) < 1e-12


def test_tanh_pushforward_gives_psi_inverse():
    psi = get_psi("tanh")
    comp = lamperti_components(psi, 0.0)
    g = build_g_1d(comp)
    y = np.array([[-0.9], [-0.3], [0.2], [0.8]])
    slope = float(psi.jac(np.zeros(1))[0, 0])
    assert np.allclose(g(y), slope * psi.inv(y), atol=1e-8)


def test_canonical_map_anchors():
    g = canonicalize(get_components("additive@exp_exp", rate=[0.3, -0.4]))
    assert np.array_equal(g(g.y0[None]), np.zeros((1, 2)))
    assert np.allclose(g.jacobian(g.y0[None])[0], g.M, atol=1e-6)
    assert verify_homomorphism(build_g_1d(pssmp(0.5))) < 1e-8


# -- the group T ---------------------------------------------------------------------


def test_t_examples():
    assert np.allclose(t_compose([1.0, 2.0], [3.0, 4.0]), [4.0, 2 + 4 * E])
    assert np.allclose(t_compose([0.0, 0.0], [0.3, -0.7]), [0.3, -0.7])
    a, b, c = [1.0, 2.0], [3.0, 4.0], [5.0, 6.0]
    assert np.allclose(t_compose(t_compose(a, b), c), t_compose(a, t_compose(b, c)), rtol=1e-14)
    assert np.allclose(t_inverse([0.0, 5.0]), [0.0, -5.0])
    assert np.allclose(t_inverse([1.0, E]), [-1.0, -1.0])


def test_levy_on_T_with_zero_eta():
    p = simulate(LevyModel(2, drift=[0.2, 0.0], jumps=(JumpSpec(2.0, [0.5, 0.0]),)), 2.0, seed=2)
    Y = levy_on_T(p)
    assert np.allclose(Y.path.right[:, 1], 0.0) and np.array_equal(Y.path.right[:, 0], p.right[:, 0])
