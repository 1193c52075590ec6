"""Exponential functionals of piecewise-affine paths and their exact inverses.

For a path xi that is affine on each segment, the functional

    phi(t) = scale * int_0^t exp(alpha * xi(s)) ds

has a closed form on every segment.  On a segment with start value ``v``,
slope ``m`` and length ``d`` the contribution is ``exp(alpha v) d E(alpha m d)``
where ``E(x) = expm1(x) / x``.  The inverse is solved segment by segment with
``log1p``.  The same closed forms give the stochastic exponential integral
``int_0^t exp(beta xi(s-)) d eta(s)`` along a joint path.
"""
import enum
from dataclasses import dataclass

import numpy as np

from .paths import from_chords


class BeyondLifetime(ValueError):
    """Requested clock value at or beyond the life time of the functional."""


class StructureError(ValueError):
    """Paths that should share a time axis do not."""


class LifetimeStatus(str, enum.Enum):
    KILLED = "killed"
    CONVERGED = "converged"
    DIVERGENT = "divergent at horizon"
    UNDETERMINED = "undetermined at horizon"


@dataclass(frozen=True)
class Lifetime:
    value: float
    status: LifetimeStatus

    @property
    def finite(self):
        """True when ``value`` is the actual life time, not a horizon truncation."""
        return self.status in (LifetimeStatus.KILLED, LifetimeStatus.CONVERGED)


def expm1_ratio(x):
    """``expm1(x) / x`` with the removable singularity at 0 filled in."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + 0.5 * x, np.expm1(safe) / safe)


def segment_integrals(v0, slope, dur, alpha):
    """``int_0^dur exp(alpha (v0 + slope s)) ds`` elementwise."""
    with np.errstate(over="raise"):
        try:
            return np.exp(alpha * v0) * dur * expm1_ratio(alpha * slope * dur)
        except FloatingPointError as err:
            raise OverflowError("exponential functional overflows double precision") from err


class TimeChange:
    """``phi(t) = scale * int_0^t exp(alpha * xi(s)) ds`` along a 1D path.

    Parameters
    ----------
    xi : CadlagPath
        One-dimensional driver path.
    alpha : float
    scale : float, optional
        Constant prefactor.  It multiplies the cumulative table after
        summation, so two time changes differing only in ``scale`` are exactly
        proportional.
    """

    def __init__(self, xi, alpha, scale=1.0):
        if xi.dim != 1:
            raise StructureError("time changes are defined for 1D paths")
        self.source = xi
        self.alpha = float(alpha)
        self.scale = float(scale)
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        self._v0 = xi.right[:, 0]
        self._m = xi.slopes[:, 0]
        seg = segment_integrals(self._v0, self._m, xi.durations, self.alpha)
        self._cum = np.concatenate([[0.0], np.cumsum(seg)])
        self.segment_table = np.column_stack([xi.times, self._v0, self._m, self._cum[:-1]])

    @property
    def total(self):
        """``phi(end)``, the value at the horizon or kill time."""
        return self.scale * self._cum[-1]

    @property
    def cumulative(self):
        """``phi`` at each breakpoint, followed by ``phi(end)``."""
        return self.scale * self._cum

    def _tail_rate(self):
        """Slope ``alpha * m`` of the deterministic continuation, if there is one."""
        tail = self.source.tail_slope
        if tail is None or self.source.killed:
            return None
        return self.alpha * float(tail[0])

    def __call__(self, t):
        """Evaluate ``phi`` at times in ``[0, end]`` (vectorized)."""
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        xi = self.source
        if np.any(flat < 0) or np.any(flat > xi.end):
            raise ValueError(f"time outside [0, {xi.end}]")
        i = np.searchsorted(xi.times, flat, side="right") - 1
        part = segment_integrals(self._v0[i], self._m[i], flat - xi.times[i], self.alpha)
        return (self.scale * (self._cum[i] + part)).reshape(t.shape)

    def invert(self, t):
        """Exact ``phi^{-1}(t)`` for ``0 <= t < lifetime``.

        Within the covered range the bracketing segment is found by binary
        search on the cumulative table; a deterministic tail is inverted in
        closed form.  Raises ``BeyondLifetime`` otherwise.
        """
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        if np.any(flat < 0):
            raise ValueError("negative clock value")
        xi = self.source
        target = flat / self.scale
        i = np.searchsorted(self._cum, target, side="right") - 1
        n = len(xi.times)
        out = np.empty_like(flat)
        # the end point itself belongs to the last segment
        i = np.where((i >= n) & (target <= self._cum[-1]), n - 1, i)
        inside = i < n
        beyond = ~inside
        if np.any(beyond):
            rate = self._tail_rate()
            rem = target[beyond] - self._cum[-1]
            base = np.exp(self.alpha * float(xi.end_value[0]))
            if rate is None:
                raise BeyondLifetime("clock value beyond the simulated range")
            arg = rem * rate / base
            if rate < 0 and np.any(arg <= -1):
                raise BeyondLifetime("clock value beyond the life time")
            out[beyond] = xi.end + _solve(rem, base, rate)
        ii = i[inside]
        rem = target[inside] - self._cum[ii]
        base = np.exp(self.alpha * self._v0[ii])
        tau = _solve(rem, base, self.alpha * self._m[ii])
        dur = xi.durations[ii]
        out[inside] = xi.times[ii] + np.minimum(tau, dur)
        return out.reshape(t.shape) if t.ndim else float(out[0])

    def lifetime(self):
        return lifetime(self)


def _solve(rem, base, rate):
    """Solve ``base * int_0^tau exp(rate s) ds = rem`` for ``tau``."""
    rem = np.asarray(rem, dtype=float)
    rate = np.broadcast_to(np.asarray(rate, dtype=float), rem.shape)
    x = rem * rate / base
    lin = np.abs(x) < 1e-12
    safe_rate = np.where(lin, 1.0, rate)
    with np.errstate(invalid="ignore", divide="ignore"):
        tau = np.where(lin, rem / base * (1.0 - 0.5 * x), np.log1p(x) / safe_rate)
    return tau


def build_timechange(xi, alpha, scale=1.0):
    """Exponential functional of ``xi`` with exponent ``alpha``.

    ``alpha = 0`` gives ``phi(t) = scale * t``.
    """
    return TimeChange(xi, alpha, scale)


def invert(tc, t):
    return tc.invert(t)


def lifetime(tc):
    """Life time ``phi(infinity)`` with a status flag.

    A killed path has life time ``phi(kill_time)``.  A path with a
    deterministic continuation converges when ``alpha * slope < 0`` (the tail
    is added in closed form).  With ``alpha = 0`` the integral grows linearly
    and is reported as divergent at the horizon.  Otherwise a finite horizon
    cannot decide, and the horizon value is returned as undetermined.
    """
    xi = tc.source
    if xi.killed:
        return Lifetime(float(tc.total), LifetimeStatus.KILLED)
    if tc.alpha == 0.0:
        return Lifetime(float(tc.total), LifetimeStatus.DIVERGENT)
    rate = tc._tail_rate()
    if rate is None:
        return Lifetime(float(tc.total), LifetimeStatus.UNDETERMINED)
    if rate >= 0:
        return Lifetime(float(tc.total), LifetimeStatus.DIVERGENT)
    tail = np.exp(tc.alpha * float(xi.end_value[0])) / (-rate)
    return Lifetime(float(tc.scale * (tc._cum[-1] + tail)), LifetimeStatus.CONVERGED)


# -- stochastic exponential integral ------------------------------------------------


def _check_axes(xi, eta):
    if xi.dim != 1 or eta.dim != 1:
        raise StructureError("xi and eta must be 1D paths")
    if xi.times.shape != eta.times.shape or not np.array_equal(xi.times, eta.times) or xi.end != eta.end:
        raise StructureError("xi and eta do not share a time axis")


def exp_integral_table(xi, eta, beta):
    """Cumulative ``I = int exp(beta xi(s-)) d eta(s)`` at every breakpoint.

    Returns ``(I_left, I_right, I_end)``: the integral just before and at each
    breakpoint, and its value at ``end`` (the left limit; the kill-coupled jump
    is added by ``exp_integral`` when asked for ``t >= kill_time``).
    """
    _check_axes(xi, eta)
    v0 = xi.right[:, 0]
    m = xi.slopes[:, 0]
    dur = xi.durations
    eslope = eta.slopes[:, 0]
    b = eslope if eta.drift is None else np.full_like(eslope, eta.drift[0])
    weight0 = np.exp(beta * v0)
    seg = b * segment_integrals(v0, m, dur, beta) + (eslope - b) * dur * weight0
    jumps = (eta.right[:, 0] - eta.left[:, 0]) * np.exp(beta * xi.left[:, 0])
    right = np.cumsum(jumps + np.concatenate([[0.0], seg[:-1]]))
    left = right - jumps
    return left, right, right[-1] + seg[-1]


def exp_integral(xi, eta, beta, t):
    """``int_0^t exp(beta xi(s-)) d eta(s)`` along a jointly simulated path.

    Jumps of eta are weighted by the left limit of xi, the drift of eta is
    integrated in closed form and the Brownian remainder uses the value of xi
    at the start of each grid segment.  When the path is killed and
    ``t >= kill_time`` the eta component of the killing jump is included.
    """
    _check_axes(xi, eta)
    t = float(t)
    if t < 0 or t > xi.end:
        raise ValueError(f"t outside [0, {xi.end}]")
    left, right, at_end = exp_integral_table(xi, eta, beta)
    if t == xi.end and (xi.killed or t > xi.times[-1]):
        out = at_end
        if xi.killed and eta.kill_jump is not None:
            out += float(eta.kill_jump[0]) * np.exp(beta * float(xi.end_value[0]))
        return float(out)
    i = int(np.searchsorted(xi.times, t, side="right") - 1)
    ds = t - xi.times[i]
    eslope = eta.slopes[i, 0]
    b = eslope if eta.drift is None else eta.drift[0]
    v0, m = xi.right[i, 0], xi.slopes[i, 0]
    part = b * segment_integrals(v0, m, ds, beta) + (eslope - b) * ds * np.exp(beta * v0)
    return float(right[i] + part)


def exp_integral_pair(pair, beta, t, xi_index=0, eta_index=1):
    """``exp_integral`` on two coordinates of a 2D path."""
    return exp_integral(pair.component(xi_index), pair.component(eta_index), beta, t)


def exp_integral_path(xi, eta, beta, offset=0.0):
    """The running integral ``offset + int_0^. exp(beta xi(s-)) d eta(s)`` as a path.

    Breakpoint values are exact; between breakpoints the path is the chord.
    The kill-coupled jump is stored as ``kill_jump``.
    """
    left, right, at_end = exp_integral_table(xi, eta, beta)
    left, right, at_end = left + offset, right + offset, at_end + offset
    kj = None
    if xi.killed and eta.kill_jump is not None:
        kj = [float(eta.kill_jump[0]) * np.exp(beta * float(xi.end_value[0]))]
    return from_chords(xi.times, left, right, xi.end, xi.killed, end_value=[at_end], kill_jump=kj)
