"""Invariance components ((f_y, c_y), y in E) and numerical verification.

Components are vectorized callables on points of shape ``(..., d)``:

* ``f(y, x)``: the space transform ``f_y(x)``; ``y * x := f(y, x)`` is the
  candidate group law;
* ``f_inv(y, x)``: the inverse of ``x -> f(y, x)``;
* ``c(y)``: the positive time-dilation constant.

Verification uses deterministic Halton grids in the sample box of the domain.
Residuals are relative: ``|a - b| / max(1, |b|)``, maximized over the grid.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.stats import qmc

from .domains import HALF_LINE, PLANE, REAL_LINE, Domain, box

DEFAULT_TOL = 1e-7
DEFAULT_GRID = 64


class DomainError(ValueError):
    pass


def as_points(a, dim):
    """View ``a`` as points of shape ``(..., dim)``; scalars are allowed in dimension 1."""
    a = np.asarray(a, dtype=float)
    if dim == 1 and (a.ndim == 0 or a.shape[-1] != 1):
        a = a[..., None]
    if a.shape[-1] != dim:
        raise ValueError(f"points must have trailing dimension {dim}")
    return a


@dataclass(frozen=True, eq=False)
class InvarianceComponents:
    """A family of invariance components with reference point ``y0``.

    ``jac2(y, x)`` optionally gives the Jacobian of ``x -> f(y, x)`` with
    shape ``(..., d, d)``.  ``commutative`` records what the components are
    declared to be, if known.
    """

    f: Callable
    f_inv: Callable
    c: Callable
    y0: np.ndarray
    domain: Domain
    jac2: Optional[Callable] = None
    name: str = ""
    commutative: Optional[bool] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        y0 = as_points(self.y0, self.domain.dim).reshape(self.domain.dim)
        y0.setflags(write=False)
        object.__setattr__(self, "y0", y0)

    @property
    def dim(self):
        return self.domain.dim

    def star(self, y, x):
        return star(self, y, x)

    def to_dict(self):
        return {"name": self.name, "params": self.params, "dim": self.dim,
                "y0": self.y0.tolist(), "domain": self.domain.to_dict()}


def star(components, y, x):
    """Group law ``y * x = f_y(x)``; points outside the domain raise ``DomainError``."""
    d = components.dim
    scalar = d == 1 and np.ndim(y) == 0 and np.ndim(x) == 0
    yp, xp = as_points(y, d), as_points(x, d)
    dom = components.domain
    if not (np.all(dom.contains(yp)) and np.all(dom.contains(xp))):
        raise DomainError("star arguments must lie in the domain")
    out = components.f(yp, xp)
    return float(out[..., 0]) if scalar else out


# -- grids and reports --------------------------------------------------------------


def halton_points(domain, n, copies=1, skip=1):
    """``n`` deterministic Halton points in ``copies`` stacked copies of the sample box.

    Returns an array of shape ``(n, copies, d)``.
    """
    d = domain.dim
    raw = qmc.Halton(d * copies, scramble=False).random(n + skip)[skip:]
    lo = np.tile(domain.sample_lo, copies)
    hi = np.tile(domain.sample_hi, copies)
    return qmc.scale(raw, lo, hi).reshape(n, copies, d)


def _rel(a, b):
    err = np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(1.0, np.abs(np.asarray(b)))
    return err.reshape(err.shape[0], -1).max(axis=1) if err.ndim > 1 else err


@dataclass
class Report:
    """Named residuals against a tolerance."""

    kind: str
    tol: float
    residuals: dict
    skipped: int = 0
    n_points: int = 0
    extra: dict = field(default_factory=dict)

    @property
    def passed(self):
        return all(np.isfinite(v) and v < self.tol for v in self.residuals.values())

    def failures(self):
        return [k for k, v in self.residuals.items() if not (np.isfinite(v) and v < self.tol)]

    def to_dict(self):
        return {"kind": self.kind, "passed": self.passed, "tol": self.tol,
                "residuals": {k: float(v) for k, v in self.residuals.items()},
                "skipped": self.skipped, "n_points": self.n_points, **self.extra}


def _max(v):
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        return 0.0
    return float(np.nanmax(np.where(np.isfinite(v), v, np.inf)))


def check_good(components, grid_size=DEFAULT_GRID, tol=DEFAULT_TOL):
    """Residuals of the good-component axioms on a Halton grid.

    * ``identity``: ``f(y0, x) = x``;
    * ``c_y0``: ``c(y0) = 1``;
    * ``multiplicative``: ``c(f(y, z)) = c(y) c(z)``;
    * ``inverse``: ``f_inv(y, f(y, x)) = x`` (component sanity);
    * ``positive_c``: 0 when ``c > 0`` on the grid, else 1.

    Pairs whose composition leaves the domain are skipped and counted.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    dom = components.domain
    n = grid_size * grid_size if components.dim == 1 else grid_size * 16
    pts = halton_points(dom, n, copies=2)
    y, z = pts[:, 0], pts[:, 1]
    y0 = np.broadcast_to(components.y0, y.shape)
    res = {}
    res["identity"] = _max(_rel(components.f(y0, z), z))
    cy0 = float(np.asarray(components.c(components.y0[None]))[0])
    res["c_y0"] = abs(cy0 - 1.0)
    fyz = components.f(y, z)
    ok = dom.contains(fyz)
    cy, cz = components.c(y), components.c(z)
    res["positive_c"] = 0.0 if np.all(cy > 0) and np.all(cz > 0) else 1.0
    prod = cy[ok] * cz[ok]
    res["multiplicative"] = _max(np.abs(components.c(fyz[ok]) - prod) / np.maximum(1.0, np.abs(prod)))
    res["inverse"] = _max(_rel(components.f_inv(y[ok], fyz[ok]), z[ok]))
    return Report("good", tol, res, skipped=int((~ok).sum()), n_points=n)


def check_group(components, grid_size=DEFAULT_GRID, tol=DEFAULT_TOL):
    """Residuals of the group axioms of ``y * x = f(y, x)`` on a Halton grid.

    ``associativity`` on triples, ``neutral`` for ``f(y, y0) = y`` and
    ``inverse`` for ``f(y, f_inv(y, y0)) = y0``.  The report also carries the
    commutativity residual ``max |f(y, z) - f(z, y)|`` and its flag.
    """
    if grid_size < 2:
        raise ValueError("grid_size must be >= 2")
    dom = components.domain
    f = components.f
    n = grid_size * grid_size if components.dim == 1 else grid_size * 16
    pts = halton_points(dom, n, copies=3)
    y1, y2, y3 = pts[:, 0], pts[:, 1], pts[:, 2]
    y0 = np.broadcast_to(components.y0, y1.shape)
    res = {}
    a12 = f(y1, y2)
    a23 = f(y2, y3)
    ok = dom.contains(a12) & dom.contains(a23)
    lhs, rhs = f(a12[ok], y3[ok]), f(y1[ok], a23[ok])
    ok2 = dom.contains(lhs) & dom.contains(rhs)
    res["associativity"] = _max(_rel(lhs[ok2], rhs[ok2]))
    res["neutral"] = _max(_rel(f(y1, y0), y1))
    inv = components.f_inv(y1, y0)
    inside = dom.contains(inv)
    res["inverse"] = _max(_rel(f(y1[inside], inv[inside]), y0[inside]))
    if not np.all(inside):
        res["inverse_in_domain"] = float((~inside).sum())
    comm = _max(_rel(f(y1, y2), f(y2, y1)))
    extra = {"commutativity_residual": comm, "commutative": bool(comm < tol)}
    if components.commutative is not None:
        extra["declared_commutative"] = components.commutative
    skipped = int((~ok).sum() + (~ok2).sum())
    return Report("group", tol, res, skipped=skipped, n_points=n, extra=extra)


def is_commutative(components, grid_size=DEFAULT_GRID, tol=DEFAULT_TOL):
    """Direct grid test ``max |f(y, z) - f(z, y)| < tol``."""
    pts = halton_points(components.domain, grid_size * 4, copies=2)
    y, z = pts[:, 0], pts[:, 1]
    return _max(_rel(components.f(y, z), components.f(z, y))) < tol


# -- registry -----------------------------------------------------------------------


def _first(a):
    return a[..., 0]


def pssmp(alpha=0.5):
    """Positive self-similar components on (0, inf): ``f_y(x) = y x``, ``c_y = y^-alpha``."""
    alpha = float(alpha)
    return InvarianceComponents(
        f=lambda y, x: y * x,
        f_inv=lambda y, x: x / y,
        c=lambda y: _first(y) ** (-alpha),
        y0=[1.0], domain=HALF_LINE,
        jac2=lambda y, x: np.broadcast_to(y, np.broadcast_shapes(y.shape, x.shape))[..., None].copy(),
        name="pssmp", commutative=True, params={"alpha": alpha})


def pssmp_bad_c(alpha=0.5):
    """Counterexample: ``c_y = y^-alpha + 1`` is not multiplicative."""
    base = pssmp(alpha)
    return InvarianceComponents(base.f, base.f_inv, lambda y: _first(y) ** (-alpha) + 1.0,
                                base.y0, base.domain, base.jac2, "pssmp_bad_c", True, {"alpha": alpha})


def perturbed_product(alpha=0.5, eps=0.01):
    """Counterexample: ``f_y(x) = y x + eps`` is not associative."""
    return InvarianceComponents(
        f=lambda y, x: y * x + eps,
        f_inv=lambda y, x: (x - eps) / y,
        c=lambda y: _first(y) ** (-alpha),
        y0=[1.0], domain=HALF_LINE, name="perturbed_product", params={"alpha": alpha, "eps": eps})


def t_compose_arrays(y, z, beta=1.0):
    """``(y1 + z1, y2 + exp(beta y1) z2)`` on arrays of shape ``(..., 2)``."""
    y, z = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(z, dtype=float))
    return np.stack([y[..., 0] + z[..., 0], y[..., 1] + np.exp(beta * y[..., 0]) * z[..., 1]], axis=-1)


def t_inverse_arrays(y, beta=1.0):
    y = np.asarray(y, dtype=float)
    return np.stack([-y[..., 0], -np.exp(-beta * y[..., 0]) * y[..., 1]], axis=-1)


def t_law(beta=1.0, group_beta=1.0):
    """The group T on the plane with ``c_y = exp(beta y1)``.

    ``group_beta`` generalizes the law to ``(y1 + x1, y2 + exp(group_beta y1) x2)``.
    """
    beta, gb = float(beta), float(group_beta)

    def jac2(y, x):
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(y.shape, np.shape(x))
        out = np.zeros(shape + (2,))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = np.broadcast_to(np.exp(gb * y[..., 0]), shape[:-1])
        return out

    return InvarianceComponents(
        f=lambda y, x: t_compose_arrays(y, x, gb),
        f_inv=lambda y, x: t_compose_arrays(t_inverse_arrays(y, gb), x, gb),
        c=lambda y: np.exp(beta * y[..., 0]),
        y0=[0.0, 0.0], domain=PLANE, jac2=jac2, name="t_law", commutative=(gb == 0.0),
        params={"beta": beta, "group_beta": gb})


def additive(dim=1, rate=None):
    """``f_y(x) = y + x`` with ``c_y = exp(rate . y)`` (``c = 1`` by default)."""
    rate = np.zeros(dim) if rate is None else np.atleast_1d(np.asarray(rate, dtype=float))
    dom = REAL_LINE if dim == 1 else PLANE

    def jac2(y, x):
        shape = np.broadcast_shapes(np.shape(y), np.shape(x))
        return np.broadcast_to(np.eye(dim), shape + (dim,)).copy()

    return InvarianceComponents(
        f=lambda y, x: y + x, f_inv=lambda y, x: x - y,
        c=lambda y: np.exp(np.asarray(y) @ rate),
        y0=np.zeros(dim), domain=dom, jac2=jac2, name="additive", commutative=True,
        params={"dim": dim, "rate": rate.tolist()})


FRAGMENTATION_DOMAIN = box((0.0, -np.inf), (np.inf, np.inf), (0.2, -2.0), (5.0, 2.0), name="(0,inf)xR")


def fragmentation_components(alpha=0.0):
    """Tagged-fragment components: ``f_y(x) = (y1 x1, y2 + y1 x2)``, ``c_y = y1^alpha``."""
    alpha = float(alpha)

    def f(y, x):
        y, x = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(x, dtype=float))
        return np.stack([y[..., 0] * x[..., 0], y[..., 1] + y[..., 0] * x[..., 1]], axis=-1)

    def f_inv(y, x):
        y, x = np.broadcast_arrays(np.asarray(y, dtype=float), np.asarray(x, dtype=float))
        return np.stack([x[..., 0] / y[..., 0], (x[..., 1] - y[..., 1]) / y[..., 0]], axis=-1)

    def jac2(y, x):
        y = np.asarray(y, dtype=float)
        shape = np.broadcast_shapes(y.shape, np.shape(x))
        out = np.zeros(shape + (2,))
        s = np.broadcast_to(y[..., 0], shape[:-1])
        out[..., 0, 0] = s
        out[..., 1, 1] = s
        return out

    return InvarianceComponents(f, f_inv, lambda y: y[..., 0] ** alpha, [1.0, 0.0], FRAGMENTATION_DOMAIN,
                                jac2, "fragmentation", False, {"alpha": alpha})


def pushforward(base, psi):
    """Transport components on R^d through a diffeomorphism ``psi``.

    ``f'(y, x) = psi(f(psi^-1 y, psi^-1 x))``, ``c'(y) = c(psi^-1 y)`` and
    ``y0' = psi(y0)``.  The Jacobian in ``x`` follows from the chain rule when
    both ``base`` and ``psi`` supply Jacobians.
    """
    if base.dim != psi.dim:
        raise ValueError("dimension mismatch between components and psi")
    P, Pi = psi.forward, psi.inverse

    jac2 = None
    if base.jac2 is not None and psi.jac is not None:
        def jac2(y, x):
            u, v = Pi(np.asarray(y, dtype=float)), Pi(np.asarray(x, dtype=float))
            w = base.f(u, v)
            inner = np.linalg.inv(psi.jac(v))
            return psi.jac(w) @ base.jac2(u, v) @ inner

    return InvarianceComponents(
        f=lambda y, x: P(base.f(Pi(np.asarray(y, dtype=float)), Pi(np.asarray(x, dtype=float)))),
        f_inv=lambda y, x: P(base.f_inv(Pi(np.asarray(y, dtype=float)), Pi(np.asarray(x, dtype=float)))),
        c=lambda y: base.c(Pi(np.asarray(y, dtype=float))),
        y0=P(base.y0), domain=psi.domain, jac2=jac2, name=f"{base.name}@{psi.name}",
        commutative=base.commutative, params={**base.params, "psi": psi.name, "psi_params": psi.params})


def lamperti_components(psi, alpha, beta=1.0):
    """Components of the process built from ``psi``, ``alpha`` (and ``beta`` in dimension 2).

    In dimension 1, ``f_y(x) = psi(psi^-1 y + psi^-1 x)``; in dimension 2 the
    law inside ``psi`` is ``(u1 + v1, u2 + exp(beta u1) v2)``.  In both cases
    ``c_y = exp(-alpha pi_1(psi^-1 y))``.
    """
    alpha = float(alpha)
    if psi.dim == 1:
        base = additive(1, rate=[-alpha])
    else:
        base = t_law(beta=-alpha, group_beta=beta)
    comp = pushforward(base, psi)
    comp.params.update({"alpha": alpha, "beta": beta})
    return comp


COMPONENT_REGISTRY = {
    "pssmp": pssmp,
    "pssmp_bad_c": pssmp_bad_c,
    "perturbed_product": perturbed_product,
    "t_law": t_law,
    "additive": additive,
    "fragmentation": fragmentation_components,
}


def get_components(name, **params):
    """Look up components by name; ``"base@psi"`` pushes ``base`` through a registered psi."""
    from .psi import get_psi

    psi_params = params.pop("psi_params", {}) or {}
    if "@" in name:
        base_name, psi_name = name.split("@", 1)
        psi = get_psi(psi_name, **psi_params)
        if base_name == "additive":
            params.setdefault("dim", psi.dim)
        return pushforward(get_components(base_name, **params), psi)
    try:
        factory = COMPONENT_REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown components {name!r}; known: {sorted(COMPONENT_REGISTRY)}") from None
    return factory(**params)
