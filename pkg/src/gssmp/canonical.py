"""Canonical maps g from good invariance components onto (R, +), (R^2, +) or (R^2, T).

Dimension 1::

    g(y) = int_{y0}^{y} dz / d_2 f(z, y0),        alpha = -log c(g^-1(1))

Dimension 2, commutative (``Y0`` is the gradient of ``c`` at ``y0``)::

    M = [[Y0_1, Y0_2], [-Y0_2, Y0_1]]  (identity when Y0 = 0)
    g(y) = int M J_2f(gamma, y0)^-1 gamma' ds

Dimension 2, noncommutative (``Y0`` is the Lie bracket of the left-invariant
fields at ``y0``)::

    M = [[Y0_2, -Y0_1], [Y0_1, Y0_2]]
    g1(y) = int pi_1(M J_2f^-1 gamma') ds
    g2(y) = int exp(g1(gamma)) pi_2(M J_2f^-1 gamma') ds

In both planar cases ``alpha = -log c(g^-1(1, 0))``.  Path integrals are
taken along straight segments from ``y0``, with a one-waypoint polyline when
the segment leaves the domain.
"""
import enum

import numpy as np
from scipy.stats import qmc

from .invariance import as_points, halton_points, is_commutative
from .quadrature import integrate_legs, segment_inside

EPS = np.finfo(float).eps
H1 = EPS ** (1.0 / 3.0)
H2 = EPS ** (1.0 / 4.0)
DEFAULT_QUAD_TOL = 1e-10
DEFAULT_TOL_COMM = 1e-5


class Kind(str, enum.Enum):
    LINE = "LINE"
    PLANE_ADD = "PLANE_ADD"
    PLANE_T = "PLANE_T"


class Classification(str, enum.Enum):
    COMMUTATIVE = "COMMUTATIVE"
    NONCOMMUTATIVE = "NONCOMMUTATIVE"


class DegeneracyError(ArithmeticError):
    pass


class ClassificationConflict(RuntimeError):
    pass


class DomainConnectivityError(RuntimeError):
    pass


class InversionError(RuntimeError):
    pass


# -- derivatives --------------------------------------------------------------------


def _fd_steps(x, h):
    return h * np.maximum(1.0, np.abs(x))


def jacobian2_at(components, y, x=None):
    """``J_2 f(y, x)`` for points ``y`` of shape ``(..., d)``; ``x`` defaults to ``y0``.

    Uses the analytic Jacobian when available, central differences otherwise.
    """
    d = components.dim
    y = as_points(y, d)
    x = components.y0 if x is None else as_points(x, d)
    x = np.broadcast_to(x, y.shape)
    if components.jac2 is not None:
        return np.asarray(components.jac2(y, x), dtype=float).reshape(y.shape + (d,))
    out = np.empty(y.shape + (d,))
    for k in range(d):
        h = _fd_steps(x[..., k], H1)
        e = np.zeros(d)
        e[k] = 1.0
        step = h[..., None] * e
        out[..., :, k] = (components.f(y, x + step) - components.f(y, x - step)) / (2 * h[..., None])
    return out


def jacobian2(components, y):
    """``J_2 f(y, y0)``; raises ``DegeneracyError`` when it is (numerically) singular."""
    J = jacobian2_at(components, y)
    _check_regular(J)
    d = components.dim
    return J[..., 0, 0] if (d == 1 and np.ndim(y) == 0) else J


def _check_regular(J):
    det = np.linalg.det(J)
    scale = np.prod(np.linalg.norm(J, axis=-2), axis=-1)
    if np.any(~np.isfinite(det)) or np.any(np.abs(det) < 1e-12 * np.maximum(scale, 1e-300)):
        raise DegeneracyError("J_2 f(y, y0) is singular")


def mixed_derivative(components, a, b):
    """``d/de J_2 f(y0 + e a, y0) . b`` at ``e = 0`` (the bilinear term of the bracket)."""
    y0 = components.y0
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if components.jac2 is not None:
        h = H1 * max(1.0, float(np.abs(y0).max()))
        Jp = jacobian2_at(components, y0 + h * a)
        Jm = jacobian2_at(components, y0 - h * a)
        return (Jp - Jm) @ b / (2 * h)
    h = H2 * max(1.0, float(np.abs(y0).max()))
    f = components.f
    pp = f(y0 + h * a, y0 + h * b)
    pm = f(y0 + h * a, y0 - h * b)
    mp = f(y0 - h * a, y0 + h * b)
    mm = f(y0 - h * a, y0 - h * b)
    return (pp - pm - mp + mm) / (4 * h * h)


def commutator_Y0(components):
    """Lie bracket ``[V(e1), V(e2)]`` at ``y0``, where ``J_2 f(y0, y0) = Id``."""
    if components.dim != 2:
        raise ValueError("the bracket is defined in dimension 2")
    e1, e2 = np.eye(2)
    return mixed_derivative(components, e1, e2) - mixed_derivative(components, e2, e1)


def grad_c(components, y=None):
    """Central-difference gradient of ``c`` at ``y`` (default ``y0``)."""
    y = components.y0 if y is None else np.asarray(y, dtype=float)
    d = components.dim
    out = np.empty(d)
    for k in range(d):
        h = H1 * max(1.0, abs(y[k]))
        e = np.zeros(d)
        e[k] = h
        cp = float(np.asarray(components.c((y + e)[None]))[0])
        cm = float(np.asarray(components.c((y - e)[None]))[0])
        out[k] = (cp - cm) / (2 * h)
    return out


def classify(components, tol_comm=DEFAULT_TOL_COMM, grid_tol=1e-7):
    """COMMUTATIVE iff the bracket vanishes; cross-checked on a grid of pairs."""
    Y0 = commutator_Y0(components)
    by_bracket = float(np.linalg.norm(Y0)) < tol_comm
    by_grid = is_commutative(components, tol=grid_tol)
    if by_bracket != by_grid:
        raise ClassificationConflict(
            f"bracket test says {'commutative' if by_bracket else 'noncommutative'} "
            f"(|Y0| = {np.linalg.norm(Y0):.3g}) but the grid test disagrees")
    return Classification.COMMUTATIVE if by_bracket else Classification.NONCOMMUTATIVE


# -- the map ------------------------------------------------------------------------


def t_compose(y, z):
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    return np.stack([y[..., 0] + z[..., 0], y[..., 1] + np.exp(y[..., 0]) * z[..., 1]], axis=-1)


class CanonicalMap:
    """Canonical diffeomorphism ``g`` with index ``alpha``.

    ``g(y)`` is evaluated by path integrals from ``y0``; ``inverse(z)`` uses a
    damped Newton iteration whose trial steps are integrated from the current
    iterate, so every Newton step costs one short path integral.
    """

    def __init__(self, components, kind, M, quad_tol=DEFAULT_QUAD_TOL,
                 grad_c_Y0=None, commutator_Y0=None, table_size=12):
        self.components = components
        self.kind = Kind(kind)
        self.dim = components.dim
        self.M = np.atleast_2d(np.asarray(M, dtype=float))
        self.quad_tol = float(quad_tol)
        self.grad_c_Y0 = grad_c_Y0
        self.commutator_Y0 = commutator_Y0
        self.y0 = components.y0
        self._table_size = table_size
        self._table = None
        self.alpha = None
        unit = np.zeros(self.dim)
        unit[0] = 1.0
        y1 = self.inverse(unit)
        self.alpha = float(-np.log(float(np.asarray(components.c(np.asarray(y1)[None]))[0])))

    # forms and integrals

    def _form(self, y):
        J = jacobian2_at(self.components, y)
        _check_regular(J)
        return self.M @ np.linalg.inv(J)

    @property
    def weighted(self):
        return self.kind is Kind.PLANE_T

    def _legs(self, a, b, g_start):
        inc = integrate_legs(a, b, self._form, self.quad_tol,
                             g1_start=g_start[:, 0] if self.weighted else None)
        return g_start + inc

    def _route(self, y):
        """Waypoints (or NaN) for targets whose straight segment leaves the domain."""
        dom = self.components.domain
        y0 = np.broadcast_to(self.y0, y.shape)
        ok = segment_inside(dom, y0, y)
        via = np.full(y.shape, np.nan)
        if np.all(ok):
            return via
        cand = halton_points(dom, 256)[:, 0]
        cand = cand[segment_inside(dom, np.broadcast_to(self.y0, cand.shape), cand)]
        for i in np.nonzero(~ok)[0]:
            good = segment_inside(dom, cand, np.broadcast_to(y[i], cand.shape))
            if not np.any(good):
                raise DomainConnectivityError(f"no admissible polyline from y0 to {y[i]}")
            c = cand[good]
            length = np.linalg.norm(c - self.y0, axis=1) + np.linalg.norm(c - y[i], axis=1)
            via[i] = c[np.argmin(length)]
        return via

    def evaluate(self, y, via=None):
        """``g`` at points ``y`` of shape ``(n, d)``, optionally through waypoints ``via``."""
        y = np.asarray(y, dtype=float)
        n = y.shape[0]
        y0 = np.broadcast_to(self.y0, y.shape)
        zero = np.zeros((n, self.dim))
        if not np.all(self.components.domain.contains(y)):
            raise ValueError("points outside the domain")
        if via is None:
            via = self._route(y)
        via = np.broadcast_to(np.asarray(via, dtype=float), y.shape)
        direct = np.any(np.isnan(via), axis=1)
        out = np.empty((n, self.dim))
        if np.any(direct):
            out[direct] = self._legs(y0[direct], y[direct], zero[direct])
        if np.any(~direct):
            w = via[~direct]
            mid = self._legs(y0[~direct], w, zero[~direct])
            out[~direct] = self._legs(w, y[~direct], mid)
        return out

    def __call__(self, y):
        d = self.dim
        scalar = d == 1 and np.ndim(y) == 0
        yp = as_points(y, d)
        out = self.evaluate(yp.reshape(-1, d)).reshape(yp.shape)
        if scalar:
            return float(out[0])
        return out

    def jacobian(self, y):
        """``Jg(y)``; for the T case this includes the ``diag(1, exp(g1))`` factor."""
        yp = as_points(y, self.dim)
        J = self._form(yp)
        if self.weighted:
            g1 = self.evaluate(yp.reshape(-1, 2))[:, 0].reshape(yp.shape[:-1])
            J = J.copy()
            J[..., 1, :] *= np.exp(g1)[..., None]
        return J

    def group_op(self, a, b):
        """``a + b`` for the additive targets, ``a T b`` for the group T."""
        return t_compose(a, b) if self.weighted else np.asarray(a) + np.asarray(b)

    # inverse

    def _forward_table(self):
        if self._table is None:
            dom = self.components.domain
            k = self._table_size
            axes = [np.linspace(lo, hi, k + 2)[1:-1] for lo, hi in zip(dom.sample_lo, dom.sample_hi)]
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)
            pts = pts[dom.contains(pts)]
            pts = np.vstack([self.y0[None], pts])
            self._table = (pts, self.evaluate(pts))
        return self._table

    def inverse(self, z, tol=1e-12, max_iter=100):
        """``g^-1`` by damped Newton, started from the nearest forward-table entry."""
        d = self.dim
        scalar = d == 1 and np.ndim(z) == 0
        zp = as_points(z, d)
        flat = zp.reshape(-1, d)
        out = self._newton(flat, tol, max_iter)
        if scalar:
            return float(out[0, 0])
        return out.reshape(zp.shape)

    def _jac_given_g(self, y, g):
        J = self._form(y)
        if self.weighted:
            J = J.copy()
            J[..., 1, :] *= np.exp(g[..., 0])[..., None]
        return J

    def _newton(self, z, tol, max_iter):
        pts, vals = self._forward_table()
        dist = np.linalg.norm(z[:, None, :] - vals[None, :, :], axis=-1)
        pick = np.argmin(dist, axis=1)
        y, gy = pts[pick].copy(), vals[pick].copy()
        dom = self.components.domain
        scale = np.maximum(1.0, np.abs(z))

        def resid(g, idx):
            return np.linalg.norm((g - z[idx]) / scale[idx], axis=1)

        res = resid(gy, slice(None))
        for _ in range(max_iter):
            act = np.nonzero(res > tol)[0]
            if act.size == 0:
                break
            step = np.linalg.solve(self._jac_given_g(y[act], gy[act]), (z[act] - gy[act])[..., None])[..., 0]
            lam = 1.0
            todo = np.arange(act.size)
            moved = False
            for _half in range(50):
                trial = y[act[todo]] + lam * step[todo]
                inside = dom.contains(trial)
                idx, trial = todo[inside], trial[inside]
                if idx.size:
                    gt = self._legs(y[act[idx]], trial, gy[act[idx]])
                    rt = resid(gt, act[idx])
                    better = rt < res[act[idx]]
                    acc = act[idx[better]]
                    y[acc], gy[acc], res[acc] = trial[better], gt[better], rt[better]
                    moved |= bool(np.any(better))
                    todo = np.setdiff1d(todo, idx[better])
                if todo.size == 0:
                    break
                lam *= 0.5
            if not moved:
                break
        if np.any(res > max(tol, 1e3 * self.quad_tol)):
            raise InversionError(f"Newton did not converge (residual {res.max():.3g})")
        return y


def build_g_1d(components, quad_tol=DEFAULT_QUAD_TOL):
    """Canonical map onto ``(R, +)``; the sign of ``d_2 f(., y0)`` must be constant."""
    if components.dim != 1:
        raise ValueError("build_g_1d needs one-dimensional components")
    dom = components.domain
    probe = np.linspace(dom.sample_lo[0], dom.sample_hi[0], 257)[:, None]
    J = jacobian2_at(components, probe)[:, 0, 0]
    if np.any(J == 0) or np.any(np.sign(J) != np.sign(J[0])):
        raise DegeneracyError("d_2 f(z, y0) changes sign")
    return CanonicalMap(components, Kind.LINE, [[1.0]], quad_tol)


def build_g_2d_commutative(components, quad_tol=DEFAULT_QUAD_TOL):
    Y0 = grad_c(components)
    if np.all(Y0 == 0) or np.linalg.norm(Y0) < 1e-12:
        M = np.eye(2)
    else:
        M = np.array([[Y0[0], Y0[1]], [-Y0[1], Y0[0]]])
    return CanonicalMap(components, Kind.PLANE_ADD, M, quad_tol, grad_c_Y0=Y0,
                        commutator_Y0=commutator_Y0(components))


def build_g_2d_noncommutative(components, quad_tol=DEFAULT_QUAD_TOL):
    Y0 = commutator_Y0(components)
    M = np.array([[Y0[1], -Y0[0]], [Y0[0], Y0[1]]])
    return CanonicalMap(components, Kind.PLANE_T, M, quad_tol, grad_c_Y0=grad_c(components),
                        commutator_Y0=Y0)


def canonicalize(components, quad_tol=DEFAULT_QUAD_TOL, tol_comm=DEFAULT_TOL_COMM):
    """Build the canonical map of the appropriate kind."""
    if components.dim == 1:
        return build_g_1d(components, quad_tol)
    if classify(components, tol_comm) is Classification.COMMUTATIVE:
        return build_g_2d_commutative(components, quad_tol)
    return build_g_2d_noncommutative(components, quad_tol)


def verify_homomorphism(gmap, components=None, grid_size=16):
    """Max relative residual of ``g(f(y, z))`` against ``g(y) + g(z)`` or ``g(y) T g(z)``."""
    comp = gmap.components if components is None else components
    n = grid_size * grid_size if comp.dim == 1 else grid_size * 4
    pts = halton_points(comp.domain, n, copies=2)
    y, z = pts[:, 0], pts[:, 1]
    fyz = comp.f(y, z)
    ok = comp.domain.contains(fyz)
    y, z, fyz = y[ok], z[ok], fyz[ok]
    lhs = gmap.evaluate(fyz)
    rhs = gmap.group_op(gmap.evaluate(y), gmap.evaluate(z))
    return float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(rhs))))


def path_independence(gmap, n=32, seed_points=None):
    """Max deviation between straight-path values and values via a detour waypoint."""
    comp = gmap.components
    dom = comp.domain
    y = halton_points(dom, n)[:, 0] if seed_points is None else np.asarray(seed_points, dtype=float)
    lo, hi = np.asarray(dom.sample_lo), np.asarray(dom.sample_hi)
    raw = qmc.Halton(comp.dim, scramble=False, seed=None).random(n + 7)[7:]
    w = qmc.scale(raw, lo, hi)
    ok = segment_inside(dom, np.broadcast_to(comp.y0, w.shape), w) & segment_inside(dom, w, y)
    if not np.any(ok):
        return 0.0
    a = gmap.evaluate(y[ok])
    b = gmap.evaluate(y[ok], via=w[ok])
    return float(np.max(np.abs(a - b)))


def alpha_consistency(gmap, n=64, radius=1.0):
    """Max of ``|c(g^-1(z)) - exp(-alpha z1)|`` relative, over a grid of targets ``z``."""
    d = gmap.dim
    raw = qmc.Halton(d, scramble=False).random(n + 1)[1:]
    z = (2 * raw - 1) * radius
    y = gmap.inverse(z)
    cz = np.asarray(gmap.components.c(y))
    ref = np.exp(-gmap.alpha * z[:, 0])
    return float(np.max(np.abs(cz - ref) / ref))


def to_report(gmap):
    def vec(v):
        return None if v is None else np.asarray(v, dtype=float).tolist()

    return {
        "kind": gmap.kind.value,
        "alpha": gmap.alpha,
        "M": gmap.M.tolist(),
        "grad_c_Y0": vec(gmap.grad_c_Y0),
        "commutator_Y0": vec(gmap.commutator_Y0),
        "quad_tol": gmap.quad_tol,
    }
