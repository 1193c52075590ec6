"""The numba and numpy kernels agree, and the batch kernels reproduce the per-path references."""
import numpy as np
import pytest

from gssmp import _accel
from gssmp import fragmentation as F
from gssmp.levy import JumpSpec, LevyModel, as_seed_sequence, child_seed
from gssmp.tgroup import functionals

needs_numba = pytest.mark.skipif(not _accel.HAVE_NUMBA, reason="numba not installed")

NUS = {
    "binary": F.binary(),
    "dissipative": F.half_dissipative(),
    "mixed": F.DislocationMeasure((((0.6, 0.3), 1.0), ((0.5, 0.25, 0.25), 0.5)), erosion=0.2),
}


@needs_numba
@pytest.mark.parametrize("name", NUS)
@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
@pytest.mark.parametrize("sampler", [F.sample_direct, F.sample_via_levy])
def test_backends_agree_fragmentation(name, alpha, sampler):
    a = sampler(NUS[name], alpha, 1.0, 300, seed=1, backend="numba")
    b = sampler(NUS[name], alpha, 1.0, 300, seed=1, backend="numpy")
    assert np.array_equal(a.status, b.status) and np.array_equal(a.events, b.events)
    for f in ("y_probe", "z_probe", "death_time", "dissipated"):
        assert np.allclose(getattr(a, f), getattr(b, f), rtol=1e-12, atol=1e-14), f


@needs_numba
def test_backends_agree_tgroup():
    m = LevyModel(2, drift=[0.1, 0.5], jumps=(JumpSpec(1.0, [0.3, 0.4]), JumpSpec(0.2, [1.5, 2.0])))
    a = functionals(m, 1.0, [0.5, 1.0, 2.0], 500, seed=2, backend="numba")
    b = functionals(m, 1.0, [0.5, 1.0, 2.0], 500, seed=2, backend="numpy")
    for x, y in zip(a, b):
        assert np.allclose(x, y, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("name", ["binary", "dissipative"])
@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
def test_direct_kernel_matches_reference(name, alpha):
    nu, ss = NUS[name], as_seed_sequence(3)
    batch = F.sample_direct(nu, alpha, 1.0, 40, seed=ss, t_probe=1.0, t_end=10.0)
    for i in range(40):
        ref = F.simulate_direct(nu, alpha, 1.0, 10.0, child_seed(ss, i))
        assert batch.censored_death(10.0)[i] == pytest.approx(min(ref.death_time, 10.0), rel=1e-12)
        assert batch.dissipated[i] == pytest.approx(ref.dissipated, rel=1e-12, abs=1e-15)
        if ref.death_time > 1.0:
            assert np.allclose(batch.y_probe[i], ref.path.evaluate(1.0)[0], rtol=1e-12)


@pytest.mark.parametrize("name", ["binary", "dissipative"])
@pytest.mark.parametrize("alpha", [-0.5, 0.0, 1.0])
def test_levy_kernel_matches_reference(name, alpha):
    nu, ss = NUS[name], as_seed_sequence(4)
    batch = F.sample_via_levy(nu, alpha, 1.0, 40, seed=ss, t_probe=1.0, t_end=10.0)
    for i in range(40):
        ref = F.simulate_via_levy(nu, alpha, 1.0, 10.0, child_seed(ss, i))
        assert batch.censored_death(10.0)[i] == pytest.approx(min(ref.death_time, 10.0), rel=1e-12)
        assert batch.dissipated[i] == pytest.approx(ref.dissipated, rel=1e-12, abs=1e-15)
        if ref.death_time > 1.0:
            assert np.allclose(batch.y_probe[i], ref.path.evaluate(1.0)[0], rtol=1e-12)


@pytest.mark.parametrize("flag,expected", [("0", "numpy"), ("1", "numba" if _accel.HAVE_NUMBA else "numpy")])
def test_environment_switch(flag, expected):
    import os
    import subprocess
    import sys

    env = {**os.environ, "GSSMP_NUMBA": flag}
    out = subprocess.run([sys.executable, "-c", "from gssmp._accel import backend_name; print(backend_name())"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
