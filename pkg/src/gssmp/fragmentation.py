"""Tagged fragment of a self-similar fragmentation with a finite dislocation measure.

Two routes produce the mass ``Y`` of a tagged fragment and the mass ``Z`` it
has dissipated so far:

* the direct, event driven route: a fragment of mass ``y`` splits at rate
  ``y**alpha * nu(P_1)``, the new tagged fragment is piece ``i`` with
  probability ``x_i`` and the tagged point is lost with probability
  ``1 - sum(x)``;
* the Lévy route: a bivariate compound Poisson pair ``(xi, eta)`` with
  kill-coupled jumps, time changed by ``phi_x(t) = x**-alpha int exp(alpha xi)``.

Erosion at rate ``c`` shrinks the tagged mass like ``exp(-c t)`` in the
intrinsic clock and kills the tagged point at rate ``c`` in the same clock.

Both routes are available as per-path references returning full paths and
as batch samplers that run the kernels in :mod:`gssmp.kernels`.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from . import kernels
from .kernels import (ALIVE_AT_END, CAPPED, DEAD, FLOOR, K_EVENTS, K_PROBED, K_STATUS, RUNNING,
                      S_DEATH, S_XI, S_Y, S_YP, S_Z, S_ZEND, S_ZP)
from .levy import (JUMP_STREAM, KILL_STREAM, JumpSpec, LevyModel, as_seed_sequence, base_kill_time,
                   child_seed, simulate)
from .paths import CadlagPath
from .stats import ks_critical, ks_statistic
from .timechange import TimeChange, exp_integral, exp_integral_path

FLOOR_RATIO = 1e-12
EVENT_CAP = 10 ** 6
BLOCK = 64

STATUS_NAMES = {RUNNING: "running", DEAD: "dead", FLOOR: "floor", ALIVE_AT_END: "alive", CAPPED: "capped"}


@dataclass(frozen=True)
class MassPartition:
    """Nonincreasing masses in ``[0, 1]`` with sum at most one (zeros dropped)."""

    masses: Tuple[float, ...]

    def __post_init__(self):
        m = np.asarray(self.masses, dtype=float).ravel()
        if m.size == 0:
            raise ValueError("a mass partition needs at least one mass")
        if np.any(m < 0) or np.any(m > 1) or not np.all(np.isfinite(m)):
            raise ValueError("masses must lie in [0, 1]")
        if np.any(np.diff(m) > 0):
            raise ValueError("masses must be nonincreasing")
        if m.sum() > 1 + 1e-12:
            raise ValueError(f"masses sum to {m.sum()} > 1")
        object.__setattr__(self, "masses", tuple(float(v) for v in m[m > 0]))

    @property
    def total(self):
        return float(sum(self.masses))

    @property
    def dissipated(self):
        return max(0.0, 1.0 - self.total)


@dataclass(frozen=True)
class DislocationMeasure:
    """Finite measure ``sum_k w_k delta_{x^(k)}`` plus an erosion coefficient."""

    atoms: Tuple[Tuple[MassPartition, float], ...]
    erosion: float = 0.0

    def __post_init__(self):
        atoms = []
        for part, w in self.atoms:
            part = part if isinstance(part, MassPartition) else MassPartition(tuple(part))
            if not (np.isfinite(w) and w > 0):
                raise ValueError("atom weights must be positive")
            if part.masses == (1.0,):
                raise ValueError("the trivial partition (1, 0, ...) cannot carry mass")
            atoms.append((part, float(w)))
        if not atoms:
            raise ValueError("a dislocation measure needs at least one atom")
        if not self.erosion >= 0:
            raise ValueError("erosion must be nonnegative")
        object.__setattr__(self, "atoms", tuple(atoms))
        object.__setattr__(self, "erosion", float(self.erosion))

    @property
    def total_rate(self):
        return float(sum(w for _, w in self.atoms))

    @property
    def kill_rate(self):
        """``int (1 - sum x) nu(dx)``."""
        return float(sum(w * p.dissipated for p, w in self.atoms))

    @classmethod
    def from_dict(cls, d):
        atoms = [(MassPartition(tuple(a["masses"])), a["weight"]) for a in d["atoms"]]
        return cls(tuple(atoms), d.get("erosion", 0.0))

    def to_dict(self):
        return {"atoms": [{"masses": list(p.masses), "weight": w} for p, w in self.atoms],
                "erosion": self.erosion}

    def tables(self):
        """Flat arrays used by the direct kernel."""
        w = np.array([w for _, w in self.atoms])
        starts = np.zeros(len(self.atoms) + 1, dtype=np.int64)
        cm = []
        for j, (p, _) in enumerate(self.atoms):
            cm.append(np.cumsum(p.masses))
            starts[j + 1] = starts[j] + len(p.masses)
        sums = np.array([p.total for p, _ in self.atoms])
        return np.cumsum(w), starts, np.concatenate(cm), sums


def binary():
    """``delta_{(1/2, 1/2)}`` with unit rate."""
    return DislocationMeasure(((MassPartition((0.5, 0.5)), 1.0),))


def half_dissipative():
    """``delta_{(1/2)}`` with unit rate: half the mass is lost at each split."""
    return DislocationMeasure(((MassPartition((0.5,)), 1.0),))


def levy_measure_Pi(nu):
    """The bivariate Lévy model ``(xi, eta)`` of the tagged fragment.

    Each atom ``x`` of weight ``w`` gives, for every piece, a jump
    ``(-log x_i, 1 - sum x)`` at rate ``w x_i``, and one kill-coupled jump
    ``(0, 1 - sum x)`` at rate ``w (1 - sum x)``.  Erosion adds drift ``(c, c)``
    and base killing rate ``c``.
    """
    jumps: List[JumpSpec] = []
    for part, w in nu.atoms:
        loss = part.dissipated
        for x in part.masses:
            jumps.append(JumpSpec(w * x, (-np.log(x), loss)))
        if loss > 0:
            jumps.append(JumpSpec(w * loss, (0.0, loss), kill_prob=1.0))
    c = nu.erosion
    return LevyModel(2, drift=(c, c), jumps=tuple(jumps), base_kill_rate=c)


@dataclass(frozen=True, eq=False)
class TaggedPath:
    """A ``(Y, Z)`` path with its termination status.

    ``dissipated`` is ``Z`` at the end of the path, including the mass
    accounted for at the killing event.
    """

    path: CadlagPath
    status: str
    events: int
    dissipated: float

    @property
    def death_time(self):
        return self.path.end if self.status in ("dead", "floor") else np.inf


def _check(alpha, x0, horizon):
    if not x0 > 0:
        raise ValueError("x0 must be positive")
    if not np.isfinite(alpha):
        raise ValueError("alpha must be finite")
    if not horizon > 0:
        raise ValueError("horizon must be positive")


def simulate_direct(nu, alpha, x0=1.0, horizon=1.0, seed=0, cap=EVENT_CAP):
    """Event-driven simulation of the tagged fragment.

    Uniforms are read in blocks of four per event (waiting time, erosion
    death, atom, piece), from ``default_rng(seed)``.  Between events ``Y``
    decays and ``Z`` accrues the eroded mass; the returned path holds exact
    values at event times and chords in between.
    """
    _check(alpha, x0, horizon)
    rng = np.random.default_rng(as_seed_sequence(seed))
    lam, c = nu.total_rate, nu.erosion
    rate = lam + c
    cumw, starts, cummass, sums = nu.tables()
    floor = FLOOR_RATIO * x0
    t, y, z = 0.0, float(x0), 0.0
    times, left, right = [0.0], [(y, z)], [(y, z)]
    status, events = None, 0
    while status is None:
        for u in rng.random((BLOCK, 4)):
            s = -np.log1p(-u[0]) / rate
            ya = y ** (-alpha)
            t_next = t + ya * s * float(kernels._expm1_ratio_np(np.array(alpha * c * s)))
            if t_next > horizon:
                se = float(kernels._clock_solve_np(horizon - t, ya, alpha * c))
                end_val = (y * np.exp(-c * se), z - y * np.expm1(-c * se))
                status, t_end, pre = "alive", horizon, end_val
                break
            z -= y * np.expm1(-c * s)
            y *= np.exp(-c * s)
            t = t_next
            events += 1
            before = (y, z)
            if u[1] * rate >= lam:
                status, t_end, pre, end_val = "dead", t, before, (0.0, z)
                break
            j = min(int(np.searchsorted(cumw, u[2] * cumw[-1], side="right")), len(sums) - 1)
            z += y * (1.0 - sums[j])
            cm = cummass[starts[j]:starts[j + 1]]
            i = int(np.searchsorted(cm, u[3], side="right"))
            if i >= cm.size:
                status, t_end, pre, end_val = "dead", t, before, (0.0, z)
                break
            y *= cm[i] - (cm[i - 1] if i else 0.0)
            if y < floor:
                status, t_end, pre, end_val = "floor", t, before, (0.0, z)
                break
            times.append(t)
            left.append(before)
            right.append((y, z))
            if events >= cap:
                status, t_end, pre, end_val = "capped", t, (y, z), (y, z)
                break
    return _tagged(times, left, right, t_end, status, events, pre, end_val)


def _tagged(times, left, right, end, status, events, pre_end, final):
    """Assemble a ``TaggedPath``; ``pre_end`` is the left limit at ``end`` and ``final`` the value there."""
    times = np.asarray(times, dtype=float)
    left, right = np.asarray(left, dtype=float), np.asarray(right, dtype=float)
    killed = status in ("dead", "floor")
    seg_end = np.append(times[1:], end)
    nxt = np.vstack([left[1:], [pre_end]])
    dur = seg_end - times
    with np.errstate(invalid="ignore", divide="ignore"):
        slopes = np.where(dur[:, None] > 0, (nxt - right) / dur[:, None], 0.0)
    kill_jump = np.asarray(final, dtype=float) - np.asarray(pre_end, dtype=float) if killed else None
    path = CadlagPath(times, left, right, slopes, float(end), killed, kill_jump=kill_jump)
    return TaggedPath(path, status, events, float(final[1]))


def simulate_via_levy(nu, alpha, x0=1.0, horizon=1.0, seed=0, cap=EVENT_CAP):
    """The Lévy-route tagged fragment ``(x e^{-xi(phi^-1 t)}, x int e^{-xi(s-)} d eta(s))``.

    The driver is simulated by ``levy.simulate`` on a doubling horizon (paths
    are prefix consistent) until the clock passes ``horizon``, the driver is
    killed, the mass falls below the floor or the event cap is reached.
    """
    _check(alpha, x0, horizon)
    model = levy_measure_Pi(nu)
    scale = float(x0) ** (-alpha)
    xi_floor = -np.log(FLOOR_RATIO)
    H = 1.0
    while True:
        pair = simulate(model, H, seed)
        xi = pair.component(0)
        tc = TimeChange(xi, alpha, scale)
        n_ev = len(pair.times) - 1
        over = np.nonzero(pair.right[:, 0] > xi_floor)[0]
        if pair.killed or tc.total >= horizon or over.size or n_ev >= cap:
            break
        H *= 2.0
    eta = pair.component(1)
    Zp = exp_integral_path(xi, eta, -1.0)
    clock = tc.cumulative[:-1]
    cands = [(float(horizon), 0, "alive")]
    if pair.killed:
        cands.append((float(tc.total), 1, "dead"))
    if over.size:
        cands.append((float(clock[over[0]]), 2, "floor"))
    if n_ev >= cap:
        cands.append((float(clock[cap]), 3, "capped"))
    end, _, status = min(cands)
    Y = lambda v: x0 * np.exp(-v)
    if status == "alive":
        stop = int(np.searchsorted(clock, horizon, side="right"))
        s = float(tc.invert(horizon))
        pre = final = (Y(float(xi.evaluate(s)[0])), x0 * exp_integral(xi, eta, -1.0, s))
    elif status == "dead":
        stop = len(pair.times)
        pre = (Y(float(xi.end_value[0])), x0 * float(Zp.end_value[0]))
        final = (0.0, x0 * exp_integral(xi, eta, -1.0, pair.end))
    elif status == "floor":
        stop = int(over[0])
        pre = (Y(pair.left[stop, 0]), x0 * Zp.left[stop, 0])
        final = (0.0, x0 * Zp.right[stop, 0])
    else:
        stop = cap + 1
        pre = final = (Y(pair.right[cap, 0]), x0 * Zp.right[cap, 0])
    left = np.column_stack([Y(pair.left[:stop, 0]), x0 * Zp.left[:stop, 0]])
    right = np.column_stack([Y(pair.right[:stop, 0]), x0 * Zp.right[:stop, 0]])
    events = stop - 1 + (1 if status in ("dead", "floor") and (status == "floor" or pair.kill_jump is not None) else 0)
    return _tagged(clock[:stop], left, right, end, status, events, pre, final)


# -- batch samplers -------------------------------------------------------------------


@dataclass
class TaggedSample:
    """Batch results: values at ``t_probe``, death times and final dissipation."""

    y_probe: np.ndarray
    z_probe: np.ndarray
    death_time: np.ndarray
    dissipated: np.ndarray
    status: np.ndarray
    events: np.ndarray

    def censored_death(self, t_end):
        """Death times with survivors set to ``t_end``."""
        d = np.where(np.isin(self.status, (DEAD, FLOOR)), self.death_time, t_end)
        return np.minimum(d, t_end)

    def status_counts(self):
        return {STATUS_NAMES[k]: int(np.count_nonzero(self.status == k)) for k in STATUS_NAMES if k != RUNNING}


def _run(n, width, rngs, step, S, K):
    U = np.zeros((n, BLOCK, width))
    rows = np.arange(n)
    while rows.size:
        for r in rows:
            U[r] = rngs[r].random((BLOCK, width))
        step(rows, U, S, K)
        rows = rows[K[rows, K_STATUS] == RUNNING]


def _finish(S, K, z_final, t_probe):
    status = K[:, K_STATUS].copy()
    unprobed = K[:, K_PROBED] == 0
    S[unprobed, S_YP] = 0.0
    S[unprobed, S_ZP] = z_final[unprobed]
    return TaggedSample(S[:, S_YP].copy(), S[:, S_ZP].copy(), S[:, S_DEATH].copy(), z_final, status,
                        K[:, K_EVENTS].copy())


def sample_direct(nu, alpha, x0=1.0, n=1000, seed=0, t_probe=1.0, t_end=None, cap=EVENT_CAP, backend=None):
    """Batch version of ``simulate_direct``; replica ``i`` uses child seed ``i``.

    Replica ``i`` reproduces ``simulate_direct(..., seed=child_seed(seed, i))``.
    """
    t_end = 10.0 * t_probe if t_end is None else float(t_end)
    if not 0 <= t_probe <= t_end:
        raise ValueError("need 0 <= t_probe <= t_end")
    ss = as_seed_sequence(seed)
    rngs = [np.random.default_rng(child_seed(ss, i)) for i in range(n)]
    cumw, starts, cummass, sums = nu.tables()
    params = (float(alpha), nu.total_rate, nu.erosion, cumw, starts, cummass, sums,
              float(t_probe), t_end, FLOOR_RATIO * x0, int(cap))
    S, K = kernels.new_state(n, float(x0))
    _run(n, 4, rngs, lambda r, U, S, K: kernels.direct_step(r, U, S, K, params, backend), S, K)
    alive = K[:, K_STATUS] == ALIVE_AT_END
    z_final = np.where(alive, S[:, S_ZEND], S[:, S_Z])
    return _finish(S, K, z_final, t_probe)


def sample_via_levy(nu, alpha, x0=1.0, n=1000, seed=0, t_probe=1.0, t_end=None, cap=EVENT_CAP, backend=None):
    """Batch version of ``simulate_via_levy`` on the same random streams.

    Replica ``i`` reads the jump and killing streams that
    ``levy.simulate(..., seed=child_seed(seed, i))`` would read.
    """
    t_end = 10.0 * t_probe if t_end is None else float(t_end)
    if not 0 <= t_probe <= t_end:
        raise ValueError("need 0 <= t_probe <= t_end")
    model = levy_measure_Pi(nu)
    ss = as_seed_sequence(seed)
    children = [child_seed(ss, i) for i in range(n)]
    rngs = [np.random.default_rng(child_seed(ch, JUMP_STREAM)) for ch in children]
    base = np.full(n, np.inf)
    if model.base_kill_rate > 0:
        for i, ch in enumerate(children):
            base[i] = base_kill_time(np.random.default_rng(child_seed(ch, KILL_STREAM)), model.base_kill_rate)
    rates, disp, kp = model.jump_table()
    params = (base, float(alpha), float(x0) ** (-alpha), float(x0), model.jump_rate, nu.erosion,
              np.cumsum(rates), disp[:, 0].copy(), disp[:, 1].copy(), kp.astype(float),
              float(t_probe), t_end, -np.log(FLOOR_RATIO), int(cap))
    S, K = kernels.new_state(n, float(x0))
    _run(n, 3, rngs, lambda r, U, S, K: kernels.levy_step(r, U, S, K, params, backend), S, K)
    alive = K[:, K_STATUS] == ALIVE_AT_END
    z_final = np.where(alive, S[:, S_ZEND], x0 * S[:, S_Z])
    return _finish(S, K, z_final, t_probe)


def equivalence_test(nu, alpha, x0=1.0, t_probe=1.0, n=10 ** 4, seed=0, alpha_levy=None, level=0.01,
                     backend=None):
    """Two-sample KS comparison of the direct and Lévy routes.

    Compares ``Y(t_probe)``, ``Z(t_probe)`` and the death time censored at
    ``10 t_probe``.  ``alpha_levy`` runs the Lévy route with a different
    index (a negative control).  Passes when every statistic is below the
    critical value at ``level``.
    """
    if n < 1000:
        raise ValueError("n must be >= 1000")
    ss = as_seed_sequence(seed)
    t_end = 10.0 * t_probe
    a_levy = alpha if alpha_levy is None else alpha_levy
    d = sample_direct(nu, alpha, x0, n, child_seed(ss, 0), t_probe, t_end, backend=backend)
    v = sample_via_levy(nu, a_levy, x0, n, child_seed(ss, 1), t_probe, t_end, backend=backend)
    crit = ks_critical(n, n, level)
    stats = {
        "Y": ks_statistic(d.y_probe, v.y_probe),
        "Z": ks_statistic(d.z_probe, v.z_probe),
        "death_time": ks_statistic(d.censored_death(t_end), v.censored_death(t_end)),
    }
    return {
        "alpha": alpha, "alpha_levy": a_levy, "x0": x0, "t_probe": t_probe, "n": n,
        "level": level, "critical_value": crit,
        "statistics": stats,
        "passed_each": {k: bool(s < crit) for k, s in stats.items()},
        "passed": bool(all(s < crit for s in stats.values())),
        "status_direct": d.status_counts(), "status_levy": v.status_counts(),
    }


def total_dissipation_samples(nu, alpha=0.0, x0=1.0, n=1000, seed=0, horizon=np.inf, backend=None):
    """Samples of ``x int_0^{T(xi)} e^{-xi(s-)} d eta(s)`` via the Lévy route.

    Returns ``(samples, capped)`` where ``capped`` flags paths that did not
    die before ``horizon`` (or hit the mass floor or event cap); for those
    the sample is the dissipation accumulated so far.
    """
    t_end = float(horizon)
    res = sample_via_levy(nu, alpha, x0, n, seed, t_probe=min(1.0, t_end), t_end=t_end, backend=backend)
    return res.dissipated, res.status != DEAD
