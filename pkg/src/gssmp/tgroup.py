"""The group (R^2, T), Lévy processes on it, big-jump removal and recentering.

``y T z = (y1 + z1, y2 + exp(y1) z2)``.  A pair ``(xi, eta)`` of real Lévy
processes gives the T-valued Lévy process

    Y(t) = (xi(t), int_0^t exp(xi(s-)) d eta(s)),

whose group jumps ``Y(t-)^-1 T Y(t)`` are exactly ``(dxi, deta)``.
"""
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .kernels import tgroup_functionals
from .levy import event_batch, simulate, child_seed, as_seed_sequence
from .paths import CadlagPath, from_chords
from .timechange import exp_integral_path, segment_integrals


class TPoint(NamedTuple):
    y1: float
    y2: float


def _pts(y):
    return np.asarray(y, dtype=float)


def t_compose(y, z):
    """``y T z``; raises ``OverflowError`` when the result is not finite."""
    y, z = np.broadcast_arrays(_pts(y), _pts(z))
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.stack([y[..., 0] + z[..., 0], y[..., 1] + np.exp(y[..., 0]) * z[..., 1]], axis=-1)
    if not np.all(np.isfinite(out)):
        raise OverflowError("T composition left the floating point range")
    return out


def t_inverse(y):
    """``(-y1, -exp(-y1) y2)``."""
    y = _pts(y)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.stack([-y[..., 0], -np.exp(-y[..., 0]) * y[..., 1]], axis=-1)
    if not np.all(np.isfinite(out)):
        raise OverflowError("T inversion left the floating point range")
    return out


def t_jumps(path):
    """Group jumps ``Y(t-)^-1 T Y(t)`` at every breakpoint of a T-valued path."""
    return t_compose(t_inverse(path.left), path.right)


@dataclass(frozen=True, eq=False)
class TLevyPath:
    """A T-valued path with its generating pair when known.

    ``path`` holds exact values at breakpoints and chords in between.
    ``drift`` is the deterministic slope of the pair (``None`` when the pair
    is deterministic between breakpoints, e.g. pure jump plus drift), which
    lets the pair be recovered exactly from ``path`` alone.
    """

    path: CadlagPath
    pair: Optional[CadlagPath] = None
    drift: Optional[np.ndarray] = None

    @property
    def times(self):
        return self.path.times

    def value_at(self, t):
        """Exact value at ``t``, computed from the pair when available."""
        if self.pair is None:
            return self.path.evaluate(t)
        from .timechange import exp_integral

        xi, eta = self.pair.component(0), self.pair.component(1)
        return np.array([float(xi.evaluate(t)[0]), exp_integral(xi, eta, 1.0, t)])


def levy_on_T(pair):
    """``Y = (xi, int exp(xi(s-)) d eta(s))`` from a joint 2D path."""
    if pair.dim != 2:
        raise ValueError("levy_on_T needs a 2D pair path")
    xi, eta = pair.component(0), pair.component(1)
    integ = exp_integral_path(xi, eta, 1.0)
    left = np.column_stack([xi.left[:, 0], integ.left[:, 0]])
    right = np.column_stack([xi.right[:, 0], integ.right[:, 0]])
    slopes = np.column_stack([xi.slopes[:, 0], integ.slopes[:, 0]])
    path = CadlagPath(pair.times, left, right, slopes, pair.end, pair.killed, kill_jump=pair.kill_jump)
    return TLevyPath(path, pair, pair.drift)


def pair_from_levy_on_T(Y):
    """Recover ``(xi, eta)`` from a T-valued path.

    ``xi = pi_1 Y``.  Jumps of eta are ``exp(-pi_1 Y(t-)) * (jump of pi_2 Y)``;
    on each segment the increment of ``pi_2 Y`` is
    ``b S + (m - b) d exp(xi_start)`` with ``S = int exp(xi)``, which is solved
    for the slope ``m`` of eta given its drift ``b``.
    """
    P = Y.path if isinstance(Y, TLevyPath) else Y
    drift = Y.drift if isinstance(Y, TLevyPath) else None
    b = None if drift is None else float(drift[1])
    xl, xr, xm = P.left[:, 0], P.right[:, 0], P.slopes[:, 0]
    dur = P.durations
    S = segment_integrals(xr, xm, dur, 1.0)
    w0 = np.exp(xr)
    seg_end = np.append(P.left[1:, 1], P.end_value[1])
    dI = seg_end - P.right[:, 1]
    with np.errstate(invalid="ignore", divide="ignore"):
        if b is None:
            m = np.where(S > 0, dI / S, 0.0)
        else:
            m = np.where(dur > 0, (dI - b * S) / (dur * w0) + b, b)
    jumps = np.exp(-xl) * (P.right[:, 1] - P.left[:, 1])
    inc = np.concatenate([[0.0], (m * dur)[:-1]])
    eta_right = np.cumsum(jumps + inc)
    eta_left = eta_right - jumps
    left = np.column_stack([xl, eta_left])
    right = np.column_stack([xr, eta_right])
    slopes = np.column_stack([xm, m])
    return CadlagPath(P.times, left, right, slopes, P.end, P.killed, drift=drift, kill_jump=P.kill_jump)


def remove_big_jumps(Y, M):
    """Splice out every group jump with sup norm ``>= M``.

    With ``G`` the accumulated correction (initially the neutral element),
    ``R(t) = G T Y(t)`` between big jumps and ``G <- G T Y(t-) T Y(t)^-1`` at a
    big jump, so ``R`` is continuous there and keeps all other increments.
    """
    if not M > 0:
        raise ValueError("M must be positive")
    P = Y.path if isinstance(Y, TLevyPath) else Y
    jumps = t_jumps(P)
    big = np.max(np.abs(jumps), axis=1) >= M
    n = len(P.times)
    G = np.zeros((n, 2))
    g = np.zeros(2)
    for i in range(n):
        if big[i]:
            g = t_compose(t_compose(g, P.left[i]), t_inverse(P.right[i]))
        G[i] = g
    G_before = np.vstack([np.zeros((1, 2)), G[:-1]])
    left = t_compose(G_before, P.left)
    right = t_compose(G, P.right)
    slopes = np.column_stack([P.slopes[:, 0], np.exp(G[:, 0]) * P.slopes[:, 1]])
    path = CadlagPath(P.times, left, right, slopes, P.end, P.killed)
    pair = None
    if isinstance(Y, TLevyPath) and Y.pair is not None:
        pr = Y.pair
        pj = pr.right - pr.left
        keep = ~big
        cum = np.cumsum(np.where(keep[:, None], pj, 0.0), axis=0)
        base = pr.right - np.cumsum(pj, axis=0)
        pright = base + cum
        pleft = pright - np.where(keep[:, None], pj, 0.0)
        pair = CadlagPath(pr.times, pleft, pright, pr.slopes, pr.end, pr.killed, pr.drift)
    drift = Y.drift if isinstance(Y, TLevyPath) else None
    return TLevyPath(path, pair, drift)


def _exp_xi_integral(P, t):
    """``int_0^t exp(pi_1 P(u)) du`` exactly (pi_1 is affine between breakpoints)."""
    idx = np.searchsorted(P.times, t, side="right") - 1
    seg = segment_integrals(P.right[:, 0], P.slopes[:, 0], P.durations, 1.0)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return cum[idx] + segment_integrals(P.right[idx, 0], P.slopes[idx, 0], t - P.times[idx], 1.0)


def recentered_W(Y, M, alpha_M, t=None):
    """``W(t) = pi_2 R(t) - alpha_M int_0^t exp(pi_1 R(u-)) du`` with ``R`` the big-jump-free path.

    Returns a 1D path (breakpoint values exact) or, when ``t`` is given, the
    exact value at ``t``.
    """
    if not np.isfinite(alpha_M):
        raise ValueError("alpha_M must be finite")
    R = remove_big_jumps(Y, M)
    P = R.path
    if t is not None:
        if R.pair is not None:
            v = R.value_at(t)[1]
        else:
            v = float(P.evaluate(t)[1])
        return float(v - alpha_M * _exp_xi_integral(P, np.asarray(t, dtype=float)))
    D_knots = _exp_xi_integral(P, P.times)
    D_end = _exp_xi_integral(P, np.asarray(P.end))
    left = P.left[:, 1] - alpha_M * D_knots
    right = P.right[:, 1] - alpha_M * D_knots
    end_val = P.end_value[1] - alpha_M * D_end
    return from_chords(P.times, left, right, P.end, P.killed, end_value=[end_val])


# -- Monte Carlo --------------------------------------------------------------------


def _require_pure_jump(model):
    if model.dim != 2:
        raise ValueError("a T-group model needs a 2D pair (xi, eta)")
    if model.kill_rate > 0:
        raise ValueError("T-group Monte Carlo needs an unkilled pair")


def functionals(model, M, queries, n_paths, seed=0, backend=None):
    """``(pi_1 R(t), pi_2 R(t), int_0^t exp(pi_1 R))`` over replicas, shape ``(n_paths, len(queries))``.

    Pure-jump pairs (plus drift) use the batch kernel on the same random
    streams as ``simulate``; pairs with a Brownian part are simulated path by path.
    """
    _require_pure_jump(model)
    queries = np.asarray(queries, dtype=float)
    horizon = float(queries.max())
    if not model.has_diffusion:
        offsets, times, types, _, _ = event_batch(model, horizon, n_paths, seed)
        _, disp, _ = model.jump_table()
        a = disp[types, 0] if types.size else np.zeros(0)
        b = disp[types, 1] if types.size else np.zeros(0)
        return tgroup_functionals(offsets, times, a, b, model.drift, M, queries, backend)
    ss = as_seed_sequence(seed)
    X = np.zeros((n_paths, queries.size))
    I = np.zeros_like(X)
    D = np.zeros_like(X)
    for i in range(n_paths):
        R = remove_big_jumps(levy_on_T(simulate(model, horizon, child_seed(ss, i))), M)
        for k, q in enumerate(queries):
            X[i, k], I[i, k] = R.value_at(q)
            D[i, k] = _exp_xi_integral(R.path, q)
    return X, I, D


def ratio_estimate(num, den):
    """Ratio of means with its delta-method standard error."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    mn, md = num.mean(), den.mean()
    if not md > 0:
        raise ArithmeticError("denominator estimate is not positive")
    r = mn / md
    cov = np.cov(num, den)
    var = (cov[0, 0] - 2 * r * cov[0, 1] + r * r * cov[1, 1]) / (md * md * n)
    return float(r), float(np.sqrt(max(var, 0.0)))


def estimate_alpha_M(model, M, n_paths, seed=0, backend=None):
    """``E[pi_2 R(1)] / E[int_0^1 exp(pi_1 R(u-)) du]`` with its standard error."""
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100")
    _, I, D = functionals(model, M, [1.0], n_paths, seed, backend)
    return ratio_estimate(I[:, 0], D[:, 0])


def alpha_M_exact(model, M):
    """Closed form for pure-jump pairs: eta drift plus the rate-weighted small eta jumps."""
    rates, disp, _ = model.jump_table()
    small = np.max(np.abs(disp), axis=1) < M if rates.size else np.zeros(0, bool)
    return float(model.drift[1] + np.sum(rates[small] * disp[small, 1]))


def W_samples(model, M, alpha_M, times, n_paths, seed=0, backend=None):
    """Samples of ``W(t)`` at each requested time, shape ``(n_paths, len(times))``."""
    _, I, D = functionals(model, M, times, n_paths, seed, backend)
    return I - alpha_M * D


def recentering_check(model, M, times, n_paths, seed=0, backend=None, n_se=3.0):
    """Estimate ``alpha_M`` on one sample and test ``E[W(t)] = 0`` on an independent one.

    The standard error of the mean of ``W(t) = I(t) - alpha_M D(t)`` includes
    the uncertainty of ``alpha_M``: ``se^2 = var(W) / n + mean(D)^2 se_alpha^2``.
    """
    ss = as_seed_sequence(seed)
    a, se_a = estimate_alpha_M(model, M, n_paths, child_seed(ss, 0), backend)
    _, I, D = functionals(model, M, times, n_paths, child_seed(ss, 1), backend)
    W = I - a * D
    rows = []
    for k, t in enumerate(np.atleast_1d(times)):
        mean = float(W[:, k].mean())
        se = float(np.sqrt(W[:, k].var(ddof=1) / n_paths + (D[:, k].mean() * se_a) ** 2))
        rows.append({"t": float(t), "mean": mean, "std_error": se, "passed": bool(abs(mean) < n_se * se)})
    return {"alpha_M": a, "alpha_M_std_error": se_a, "W": rows, "passed": all(r["passed"] for r in rows)}
