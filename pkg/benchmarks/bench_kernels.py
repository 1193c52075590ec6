"""Time the numba and numpy kernels on the same inputs.

Usage::

    python benchmarks/bench_kernels.py [--n 20000] [--repeat 3]

Each case is run once to warm up (numba compilation), then timed
``--repeat`` times; the best time is reported together with the maximum
difference between the two backends.  The end-to-end samplers spend most
of their time deriving one seed stream per replica, so the kernels are also
timed alone on pre-drawn inputs.
"""
import argparse
import time

import numpy as np

from gssmp import _accel
from gssmp import fragmentation as F
from gssmp import kernels
from gssmp.levy import JumpSpec, LevyModel, event_batch
from gssmp.tgroup import functionals

TGROUP_MODEL = LevyModel(2, drift=[0.1, 0.5], jumps=(JumpSpec(1.0, [0.3, 0.4]), JumpSpec(0.5, [-0.2, 1.0]),
                                                     JumpSpec(0.2, [1.5, 2.0])))


def _direct_kernel(nu, n):
    """One block of 64 events per row of the direct route, on fixed uniforms."""
    U = np.random.default_rng(0).random((n, F.BLOCK, 4))
    cumw, starts, cummass, sums = nu.tables()
    params = (0.5, nu.total_rate, nu.erosion, cumw, starts, cummass, sums, 1.0, 10.0, F.FLOOR_RATIO, F.EVENT_CAP)
    rows = np.arange(n)

    def run(backend):
        S, K = kernels.new_state(n, 1.0)
        kernels.direct_step(rows, U, S, K, params, backend)
        return S
    return run


def _tgroup_kernel(n):
    offsets, times, types, _, _ = event_batch(TGROUP_MODEL, 2.0, n, seed=1)
    _, disp, _ = TGROUP_MODEL.jump_table()
    a, b = disp[types, 0], disp[types, 1]
    q = np.array([0.5, 1.0, 2.0])
    return lambda backend: kernels.tgroup_functionals(offsets, times, a, b, TGROUP_MODEL.drift, 1.0, q, backend)[1]


def _cases(n):
    nu = F.DislocationMeasure((((0.6, 0.3), 1.0), ((0.5, 0.25, 0.25), 0.5)), erosion=0.2)
    return {
        "kernel direct": _direct_kernel(nu, n),
        "kernel tgroup": _tgroup_kernel(n),
        "frag direct": lambda b: F.sample_direct(nu, 0.5, 1.0, n, seed=1, backend=b).y_probe,
        "frag levy": lambda b: F.sample_via_levy(nu, 0.5, 1.0, n, seed=1, backend=b).y_probe,
        "tgroup": lambda b: functionals(TGROUP_MODEL, 1.0, [0.5, 1.0, 2.0], n, seed=1, backend=b)[1],
    }


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--n", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not _accel.HAVE_NUMBA:
        raise SystemExit("numba is not installed; nothing to compare")
    print(f"{'case':<16}{'numpy [s]':>11}{'numba [s]':>11}{'speedup':>9}{'max diff':>11}")
    for name, fn in _cases(args.n).items():
        fn("numba")  # compile
        t_np, a = _best(lambda: fn("numpy"), args.repeat)
        t_nb, b = _best(lambda: fn("numba"), args.repeat)
        diff = float(np.max(np.abs(a - b)))
        print(f"{name:<16}{t_np:>11.3f}{t_nb:>11.3f}{t_np / t_nb:>9.1f}{diff:>11.1e}")


if __name__ == "__main__":
    main()
