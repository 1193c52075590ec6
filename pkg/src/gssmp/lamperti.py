"""Lamperti-type construction of self-similar Markov processes and recovery of their driver.

Given a diffeomorphism ``psi : R^d -> I``, a Lévy driver ``L``, an index
``alpha`` (and ``beta`` in dimension 2) and a start ``y`` with
``u = psi^-1(y)``, the process is

    X_y(t) = psi(u T_beta L(phi_y^-1(t))),   phi_y(t) = int_0^t exp(alpha (u_1 + xi(s))) ds,

where ``u T_beta v = u + v`` in dimension 1 and
``(u1 + v1, u2 + exp(beta u1) v2)`` in dimension 2, and
``L = (xi, int exp(beta xi(s-)) d eta(s))`` for a 2D driver ``(xi, eta)``.
The process is sent to the cemetery at ``phi_y(+inf)`` when that is finite.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .invariance import InvarianceComponents, lamperti_components
from .levy import LevyModel, as_seed_sequence, child_seed, simulate
from .paths import CEMETERY, CadlagPath, from_chords
from .psi import Psi
from .stats import ks_compare
from .timechange import (BeyondLifetime, Lifetime, LifetimeStatus, TimeChange, expm1_ratio, exp_integral_table,
                         segment_integrals)

MAX_DRIVER_HORIZON = 2.0 ** 14


class PreconditionError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class SelfSimilarProcessSpec:
    """``(psi, driver, alpha, beta, start)``; ``beta`` only matters in dimension 2."""

    psi: Psi
    driver: LevyModel
    alpha: float
    beta: float = 1.0
    start: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.driver.dim != self.psi.dim:
            raise ValueError(f"driver dimension {self.driver.dim} does not match psi dimension {self.psi.dim}")
        start = self.psi(np.zeros(self.psi.dim)) if self.start is None else self.start
        start = np.atleast_1d(np.asarray(start, dtype=float)).reshape(self.psi.dim)
        if not bool(self.psi.domain.contains(start)):
            raise ValueError(f"start {start.tolist()} is outside the domain {self.psi.domain.name}")
        object.__setattr__(self, "start", start)
        object.__setattr__(self, "alpha", float(self.alpha))
        object.__setattr__(self, "beta", float(self.beta))

    @property
    def dim(self):
        return self.psi.dim

    @property
    def u(self):
        """``psi^-1(start)``."""
        return np.atleast_1d(self.psi.inv(self.start)).reshape(self.dim)

    def components(self):
        """The invariance components of the process family."""
        return lamperti_components(self.psi, self.alpha, self.beta)

    def with_start(self, start):
        return SelfSimilarProcessSpec(self.psi, self.driver, self.alpha, self.beta, start)


# -- driver values ------------------------------------------------------------------


def driver_values(pair, s, beta):
    """``L(s)`` at driver times ``s`` (vectorized, right-continuous, exact).

    In dimension 1 this is ``xi(s)``; in dimension 2 it is
    ``(xi(s), int_0^s exp(beta xi(r-)) d eta(r))``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    i = np.searchsorted(pair.times, s, side="right") - 1
    ds = s - pair.times[i]
    xi = pair.right[i, 0] + pair.slopes[i, 0] * ds
    if pair.dim == 1:
        return xi[:, None]
    x1, e1 = pair.component(0), pair.component(1)
    _, right, _ = exp_integral_table(x1, e1, beta)
    eslope = pair.slopes[i, 1]
    b = eslope if pair.drift is None else np.full_like(eslope, pair.drift[1])
    v0, m = pair.right[i, 0], pair.slopes[i, 0]
    part = b * segment_integrals(v0, m, ds, beta) + (eslope - b) * ds * np.exp(beta * v0)
    return np.column_stack([xi, right[i] + part])


def _compose(u, v, beta):
    """``u T_beta v`` for a fixed ``u`` and points ``v`` of shape ``(n, d)``."""
    if v.shape[1] == 1:
        return u + v
    with np.errstate(over="ignore", invalid="ignore"):
        return np.column_stack([u[0] + v[:, 0], u[1] + np.exp(beta * u[0]) * v[:, 1]])


def _apply_psi(psi, w, where=""):
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.asarray(psi(w), dtype=float).reshape(w.shape)
    if not np.all(np.isfinite(out)):
        bad = np.argmax(~np.all(np.isfinite(out), axis=1))
        raise OverflowError(f"psi left the floating point range{where}: psi^-1 coordinates {w[bad].tolist()}")
    return out


# -- trajectories --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Trajectory:
    """A trajectory of ``X_y`` with its driver and clock.

    ``path`` holds exact values at the driver breakpoints pushed through
    ``phi_y`` (chords in between).  ``value_at`` is exact everywhere.
    ``status`` is ``"alive"`` (reached the horizon), ``"dead"`` (sent to the
    cemetery at ``lifetime``) or ``"undetermined at horizon"``.
    """

    spec: SelfSimilarProcessSpec
    path: CadlagPath
    driver: CadlagPath
    clock: TimeChange
    lifetime: Lifetime
    status: str

    def value_at(self, t):
        """``X_y(t)``, or ``CEMETERY`` at or after the life time."""
        t = float(t)
        if t < 0:
            raise ValueError("negative time")
        if self.status == "dead" and t >= self.lifetime.value:
            return CEMETERY
        if t > self.path.end:
            raise ValueError(f"t beyond the simulated range [0, {self.path.end}]")
        try:
            s = float(self.clock.invert(t))
        except BeyondLifetime:
            return CEMETERY
        if self.driver.tail_slope is None:
            s = min(s, self.driver.end)
        w = _compose(self.spec.u, driver_values(self.driver, s, self.spec.beta), self.spec.beta)
        return _apply_psi(self.spec.psi, w, f" at t={t}")[0]

    def exhaustion_index(self, ts=None):
        """Running maximum of ``|psi^-1(X)|`` (sup norm), the compact-exhaustion index.

        ``X`` leaves every compact subset of the state space exactly when
        this index diverges.
        """
        if ts is None:
            vals = self.path.right
        else:
            vals = [self.value_at(t) for t in ts]
            vals = np.array([np.full(self.spec.dim, np.nan) if v is CEMETERY else v for v in vals])
        w = np.atleast_2d(self.spec.psi.inv(vals)).reshape(len(vals), self.spec.dim)
        return np.fmax.accumulate(np.max(np.abs(w), axis=1))


def _simulate_driver(spec, horizon, seed, max_driver_horizon):
    """Simulate the driver on a doubling horizon until its clock passes ``horizon``.

    Also stops when the driver is killed, when the clock has a closed form
    tail, or when the driver horizon reaches ``max_driver_horizon``.
    """
    a = spec.alpha
    u1 = float(spec.u[0])
    H = max(1.0, float(horizon)) if a == 0 and np.isfinite(horizon) else 1.0
    while True:
        pair = simulate(spec.driver, H, seed)
        xi = pair.component(0)
        try:
            tc = TimeChange(xi, a, scale=float(np.exp(a * u1)))
        except OverflowError as err:
            raise OverflowError(f"clock overflow for alpha={a}, driver horizon {H}: {err}") from None
        done = pair.killed or tc.total >= horizon or xi.tail_slope is not None
        if done or H >= max_driver_horizon:
            return pair, tc
        H *= 2.0


def _status(tc, horizon):
    life = tc.lifetime()
    if life.status in (LifetimeStatus.KILLED, LifetimeStatus.CONVERGED) and life.value <= horizon:
        return life, "dead"
    if tc.total >= horizon or life.status == LifetimeStatus.CONVERGED:
        return life, "alive"
    return life, "undetermined at horizon"


def build_trajectory(spec, horizon, seed=0, substeps=0, max_driver_horizon=MAX_DRIVER_HORIZON):
    """Forward construction of ``X_y`` on ``[0, horizon]``.

    Parameters
    ----------
    spec : SelfSimilarProcessSpec
    horizon : float
        Real-time horizon.
    seed : int or SeedSequence
        Seed of the driver (as in ``levy.simulate``).
    substeps : int
        Extra points per segment, placed uniformly in driver time, for plotting.

    Returns
    -------
    Trajectory
        The path ends at ``min(horizon, lifetime)``; it is killed (cemetery)
        when the life time is reached before the horizon.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    pair, tc = _simulate_driver(spec, horizon, seed, max_driver_horizon)
    life, status = _status(tc, horizon)
    beta = spec.beta
    if status == "dead":
        t_end = life.value
    elif status == "alive":
        t_end = float(horizon)
    else:
        t_end = float(tc.total)
    # driver time of the end of the path
    if status == "alive":
        s_end = float(tc.invert(t_end))
    else:
        s_end = pair.end if pair.killed or pair.tail_slope is None else np.inf

    knots = pair.times[pair.times <= min(s_end, pair.end)]
    if status != "alive" and pair.killed:
        knots = pair.times
    s_pts = [knots]
    if substeps:
        seg_end = np.append(knots[1:], min(s_end, pair.end))
        frac = np.arange(1, substeps + 1) / (substeps + 1)
        s_pts.append((knots[:, None] + frac[None, :] * (seg_end - knots)[:, None]).ravel())
    s_all = np.unique(np.concatenate(s_pts))
    is_knot = np.isin(s_all, pair.times)

    t_all = tc(np.minimum(s_all, pair.end))
    right = _apply_psi(spec.psi, _compose(spec.u, driver_values(pair, s_all, beta), beta))
    left = right.copy()
    if np.any(is_knot):
        k = np.searchsorted(pair.times, s_all[is_knot])
        L_left = driver_values(pair, s_all[is_knot], beta)
        L_left -= _jump_sizes(pair, k, beta)
        left[is_knot] = _apply_psi(spec.psi, _compose(spec.u, L_left, beta))

    keep = t_all < t_end if status == "dead" else t_all <= t_end
    keep[0] = True
    t_all, left, right = t_all[keep], left[keep], right[keep]
    if status == "alive":
        w_end = _compose(spec.u, driver_values(pair, s_end, beta), beta)
        end_value = _apply_psi(spec.psi, w_end)[0]
    elif status == "dead" and pair.killed:
        # the driver has no breakpoint at its kill time, so this is the left limit
        w_end = _compose(spec.u, driver_values(pair, pair.end, beta), beta)
        end_value = _apply_psi(spec.psi, w_end)[0]
    else:
        end_value = right[-1]
    path = from_chords(t_all, left, right, t_end, status == "dead", end_value=end_value)
    return Trajectory(spec, path, pair, tc, life, status)


def _jump_sizes(pair, k, beta):
    """Jumps of ``L`` at breakpoints ``k``."""
    dxi = pair.right[k, 0] - pair.left[k, 0]
    if pair.dim == 1:
        return dxi[:, None]
    deta = pair.right[k, 1] - pair.left[k, 1]
    return np.column_stack([dxi, np.exp(beta * pair.left[k, 0]) * deta])


# -- recovery ----------------------------------------------------------------------


def recover_driver(trajectory, components, g, normalize=False, method="auto", substeps=16):
    """Recover the driver ``t -> g(X(A^-1(t)))`` with ``A(t) = int_0^t c_{X(u)} du``.

    Parameters
    ----------
    trajectory : Trajectory or CadlagPath
    components : InvarianceComponents
    g : callable
        Canonical map (``CanonicalMap`` or any vectorized callable).
    normalize : bool
        When the trajectory starts at ``y != y0``, replace ``X`` by
        ``y^-1 * X`` (the inverse of ``f_y``) and ``c`` by ``c / c_y`` first.
    method : {"auto", "exact", "trapezoid"}
        ``"exact"`` integrates the clock in closed form on each segment,
        which is exact when ``log c`` is affine in driver time along the
        segment (true for good components driven by a piecewise affine
        driver).  ``"trapezoid"`` uses ``substeps`` sub-steps per segment.
        ``"auto"`` picks ``"exact"`` for a ``Trajectory`` and ``"trapezoid"``
        for a bare path.

    Returns
    -------
    CadlagPath
        Exact at breakpoints, chords in between.
    """
    traj = trajectory if isinstance(trajectory, Trajectory) else None
    P = trajectory.path if traj is not None else trajectory
    d = components.dim
    y0 = components.y0
    start = P.right[0]
    shift = None
    if not np.allclose(start, y0, rtol=1e-12, atol=1e-12):
        if not normalize:
            raise PreconditionError(f"trajectory starts at {start.tolist()}, not at the reference point {y0.tolist()}")
        shift = start

    def to_ref(x):
        x = np.asarray(x, dtype=float).reshape(-1, d)
        return x if shift is None else np.asarray(components.f_inv(shift, x)).reshape(-1, d)

    def cval(x):
        return np.asarray(components.c(to_ref(x)), dtype=float).reshape(-1)

    if method == "auto":
        method = "exact" if traj is not None else "trapezoid"
    seg_end_t = np.append(P.times[1:], P.end)
    dt = seg_end_t - P.times
    nxt_left = np.vstack([P.left[1:], [P.end_value]])
    if method == "exact":
        l0 = np.log(cval(P.right))
        l1 = np.log(cval(nxt_left))
        dA = dt * np.exp(l0) / expm1_ratio(-(l1 - l0))
    elif method == "trapezoid":
        frac = np.linspace(0.0, 1.0, substeps + 1)
        ts = P.times[:, None] + frac[None, :] * dt[:, None]
        if traj is not None:
            vals = np.array([[_value_or_left(traj, t, P) for t in row] for row in ts])
        else:
            vals = P.right[:, None, :] + (nxt_left - P.right)[:, None, :] * frac[None, :, None]
            vals[:, -1] = nxt_left
        vals[:, 0] = P.right
        vals[:, -1] = nxt_left
        cv = cval(vals.reshape(-1, d)).reshape(vals.shape[:2])
        h = dt / substeps
        dA = h * (0.5 * cv[:, 0] + cv[:, 1:-1].sum(axis=1) + 0.5 * cv[:, -1])
    else:
        raise ValueError(f"unknown method {method!r}")
    A = np.concatenate([[0.0], np.cumsum(dA)])
    gr = np.asarray(g(to_ref(P.right)), dtype=float).reshape(-1, d)
    gl = np.asarray(g(to_ref(P.left)), dtype=float).reshape(-1, d)
    ge = np.asarray(g(to_ref(P.end_value)), dtype=float).reshape(d)
    times = A[:-1]
    if not np.all(np.diff(times) > 0):
        keep = np.concatenate([[True], np.diff(times) > 0])
        times, gl, gr = times[keep], gl[keep], gr[keep]
    return from_chords(times, gl, gr, float(A[-1]), P.killed, end_value=ge)


def _value_or_left(traj, t, P):
    v = traj.value_at(min(t, P.end))
    return P.end_value if v is CEMETERY else v


# -- life time -----------------------------------------------------------------------


def lifetime_law_sample(spec, n_paths, seed=0, max_driver_horizon=MAX_DRIVER_HORIZON):
    """I.i.d. samples of ``phi_y(+inf)``.

    Replica ``i`` uses child seed ``i``.  Paths whose life time cannot be
    decided within ``max_driver_horizon`` are excluded and counted.

    Returns
    -------
    samples : ndarray
    n_excluded : int
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    ss = as_seed_sequence(seed)
    out = []
    excluded = 0
    for i in range(n_paths):
        _, tc = _simulate_driver(spec, np.inf, child_seed(ss, i), max_driver_horizon)
        life = tc.lifetime()
        if life.status in (LifetimeStatus.KILLED, LifetimeStatus.CONVERGED):
            out.append(life.value)
        else:
            excluded += 1
    return np.array(out), excluded


# -- self-similarity -----------------------------------------------------------------


def sample_at(spec, t, n_paths, seed=0):
    """``X_y(t)`` over replicas; rows at the cemetery are ``+inf``."""
    ss = as_seed_sequence(seed)
    out = np.full((n_paths, spec.dim), np.inf)
    for i in range(n_paths):
        pair, tc = _simulate_driver(spec, t, child_seed(ss, i), MAX_DRIVER_HORIZON)
        _, status = _status(tc, t)
        if status != "alive":
            continue
        s = float(tc.invert(t))
        if pair.tail_slope is None:
            s = min(s, pair.end)
        out[i] = _apply_psi(spec.psi, _compose(spec.u, driver_values(pair, s, spec.beta), spec.beta))[0]
    return out


def self_similarity_check(spec, y, t, n_paths=10 ** 4, seed=0, components=None, level=0.01):
    """Compare the laws of ``X_y(t)`` and ``f_y(X_{y0}(c_y t))`` by two-sample KS per coordinate.

    Both samples use independent seeds.  Cemetery values are compared as ``+inf``.
    """
    comp = components if components is not None else spec.components()
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ss = as_seed_sequence(seed)
    a = sample_at(spec.with_start(y), t, n_paths, child_seed(ss, 0))
    cy = float(np.asarray(comp.c(y[None, :])).ravel()[0])
    b0 = sample_at(spec.with_start(comp.y0), cy * t, n_paths, child_seed(ss, 1))
    b = np.full_like(b0, np.inf)
    fin = np.all(np.isfinite(b0), axis=1)
    b[fin] = np.asarray(comp.f(np.broadcast_to(y, b0[fin].shape), b0[fin])).reshape(-1, spec.dim)
    per = [ks_compare(a[:, k], b[:, k], level) for k in range(spec.dim)]
    return {"y": y.tolist(), "t": float(t), "c_y": cy, "n": n_paths, "coordinates": per,
            "passed": bool(all(p["passed"] for p in per))}
