"""Adaptive Clenshaw-Curtis quadrature of differential forms along straight legs.

A leg is the segment ``gamma(s) = a + s (b - a)`` for ``s`` in ``[0, 1]``.
Many legs are integrated at once on a shared set of panels: a panel is split
until the 17-point rule and its nested 9-point rule agree for every leg.
Panels are accepted left to right, which lets the integrand of the second
component depend on the running integral of the first one (needed for the
canonical map onto the group T).
"""
import numpy as np
from numpy.polynomial import chebyshev as C

N_HI = 16  # 17 Chebyshev extrema
MAX_DEPTH = 40


def _cc_tables(n):
    """Nodes, weights and cumulative integration matrix on ``[-1, 1]`` for ``n + 1`` extrema.

    ``cum[i] @ values`` approximates the integral from -1 to ``nodes[i]``.
    """
    nodes = -np.cos(np.pi * np.arange(n + 1) / n)
    V = C.chebvander(nodes, n)
    Vinv = np.linalg.inv(V)
    antider = np.array([C.chebint(np.eye(n + 1)[k], lbnd=-1) for k in range(n + 1)])
    cum = np.array([C.chebval(nodes, a) for a in antider]).T @ Vinv
    weights = cum[-1].copy()
    return nodes, weights, cum


NODES, WEIGHTS, CUM = _cc_tables(N_HI)
_, WEIGHTS_LO, _ = _cc_tables(N_HI // 2)


class QuadratureError(RuntimeError):
    pass


def integrate_legs(a, b, form, tol=1e-10, g1_start=None, max_panels=4096):
    """Integrate ``form(y) . gamma'`` along straight legs from ``a`` to ``b``.

    Parameters
    ----------
    a, b : ndarray, shape (n, d)
        Leg end points.
    form : callable
        ``form(y)`` maps points of shape ``(n, k, d)`` to matrices of shape
        ``(n, k, d, d)``; the integrand is ``form(gamma(s)) @ gamma'``.
    tol : float
        Local error tolerance per unit of the parameter ``s``.
    g1_start : ndarray, shape (n,), optional
        When given, the second component is weighted by ``exp(g1)``, where
        ``g1 = g1_start + (running integral of the first component)``.

    Returns
    -------
    ndarray, shape (n, d)
        The integrals, with the weighted second component when ``g1_start``
        is given.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, d = a.shape
    delta = b - a
    total = np.zeros((n, d))
    g1 = None if g1_start is None else np.asarray(g1_start, dtype=float).copy()
    stack = [(0.0, 1.0, 0)]
    panels = 0
    while stack:
        lo, hi, depth = stack.pop()
        half = 0.5 * (hi - lo)
        s = lo + half * (NODES + 1.0)
        y = a[:, None, :] + s[None, :, None] * delta[:, None, :]
        h = np.einsum("nkij,nj->nki", form(y), delta)
        if g1 is not None:
            run1 = g1[:, None] + half * (h[:, :, 0] @ CUM.T)
            h = h.copy()
            h[:, :, 1] = np.exp(run1) * h[:, :, 1]
        hi_est = half * np.einsum("k,nkd->nd", WEIGHTS, h)
        lo_est = half * np.einsum("k,nkd->nd", WEIGHTS_LO, h[:, ::2])
        err = np.abs(hi_est - lo_est)
        if not np.all(np.isfinite(hi_est)):
            raise QuadratureError("non-finite integrand along the path")
        limit = tol * (hi - lo) + tol * np.abs(hi_est)
        panels += 1
        if np.all(err <= limit) or depth >= MAX_DEPTH or panels >= max_panels:
            total += hi_est
            if g1 is not None:
                g1 = g1 + hi_est[:, 0]
            continue
        mid = lo + half
        stack.append((mid, hi, depth + 1))
        stack.append((lo, mid, depth + 1))
    return total


def segment_inside(domain, a, b, n_check=65):
    """True for legs whose sampled points all lie in ``domain``."""
    s = np.linspace(0.0, 1.0, n_check)
    pts = a[:, None, :] + s[None, :, None] * (b - a)[:, None, :]
    return np.all(domain.contains(pts), axis=1)
