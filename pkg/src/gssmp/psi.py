"""Diffeomorphisms psi from R^d onto open state spaces, with a small registry.

All callables act on arrays of shape ``(..., d)`` and are vectorized.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .domains import HALF_LINE, PLANE, REAL_LINE, Domain, box, interval


@dataclass(frozen=True, eq=False)
class Psi:
    """A diffeomorphism ``forward: R^d -> domain`` with its inverse.

    ``jac`` is the Jacobian of ``forward``, shape ``(..., d, d)``; when absent
    it is not used by this package (finite differences take over).
    """

    forward: Callable
    inverse: Callable
    dim: int
    domain: Domain
    jac: Optional[Callable] = None
    name: str = ""
    params: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.forward(np.asarray(x, dtype=float))

    def inv(self, y):
        return self.inverse(np.asarray(y, dtype=float))

    def roundtrip_error(self, n=256):
        """Max of ``|inverse(forward(x)) - x|`` and ``|forward(inverse(y)) - y|``, relative to ``max(1, |.|)``."""
        from scipy.stats import qmc

        lo, hi = np.asarray(self.domain.sample_lo), np.asarray(self.domain.sample_hi)
        y = qmc.scale(qmc.Halton(self.dim, scramble=False).random(n + 1)[1:], lo, hi)
        x = self.inv(y)
        e1 = np.abs(self(x) - y) / np.maximum(1.0, np.abs(y))
        e2 = np.abs(self.inv(self(x)) - x) / np.maximum(1.0, np.abs(x))
        return float(max(e1.max(), e2.max()))


def _diag_jac(*derivs):
    def jac(x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (x.shape[-1],))
        for k, d in enumerate(derivs):
            out[..., k, k] = d(x[..., k])
        return out
    return jac


def exp_psi():
    return Psi(np.exp, np.log, 1, HALF_LINE, _diag_jac(np.exp), "exp")


def identity_psi(dim=1):
    dom = REAL_LINE if dim == 1 else PLANE
    return Psi(lambda x: np.array(x, dtype=float), lambda y: np.array(y, dtype=float), dim, dom,
               lambda x: np.broadcast_to(np.eye(dim), np.shape(x) + (dim,)).copy(), "identity", {"dim": dim})


def affine_psi(a=1.0, b=0.0):
    if a == 0:
        raise ValueError("affine map needs a != 0")
    dom = interval(-np.inf, np.inf, b - 3 * abs(a), b + 3 * abs(a), name="R")
    return Psi(lambda x: a * x + b, lambda y: (y - b) / a, 1, dom,
               _diag_jac(lambda x: np.full_like(x, a)), "affine", {"a": a, "b": b})


def tanh_psi(width=1.0, scale=1.0):
    """``x -> width * tanh(x / scale)`` onto ``(-width, width)``."""
    dom = interval(-width, width, -0.9 * width, 0.9 * width, name=f"(-{width},{width})")
    return Psi(lambda x: width * np.tanh(x / scale), lambda y: scale * np.arctanh(y / width), 1, dom,
               _diag_jac(lambda x: width / scale / np.cosh(x / scale) ** 2), "tanh",
               {"width": width, "scale": scale})


def exp_exp_psi():
    dom = box((0.0, 0.0), (np.inf, np.inf), (0.2, 0.2), (5.0, 5.0), name="(0,inf)^2")
    return Psi(np.exp, np.log, 2, dom, _diag_jac(np.exp, np.exp), "exp_exp")


def exp_id_psi():
    dom = box((0.0, -np.inf), (np.inf, np.inf), (0.2, -2.0), (5.0, 2.0), name="(0,inf)xR")

    def fwd(x):
        return np.stack([np.exp(x[..., 0]), x[..., 1]], axis=-1)

    def inv(y):
        return np.stack([np.log(y[..., 0]), y[..., 1]], axis=-1)

    return Psi(fwd, inv, 2, dom, _diag_jac(np.exp, np.ones_like), "exp_id")


def shear_psi():
    """``(x1, x2) -> (x1, x2 + x1**3 / 3)``, a polynomial diffeomorphism of the plane."""

    def fwd(x):
        return np.stack([x[..., 0], x[..., 1] + x[..., 0] ** 3 / 3.0], axis=-1)

    def inv(y):
        return np.stack([y[..., 0], y[..., 1] - y[..., 0] ** 3 / 3.0], axis=-1)

    def jac(x):
        out = np.zeros(np.shape(x) + (2,))
        out[..., 0, 0] = 1.0
        out[..., 1, 1] = 1.0
        out[..., 1, 0] = x[..., 0] ** 2
        return out

    return Psi(fwd, inv, 2, PLANE, jac, "shear")


def tanh_tanh_psi():
    dom = box((-1.0, -1.0), (1.0, 1.0), (-0.8, -0.8), (0.8, 0.8), name="(-1,1)^2")
    sech2 = lambda x: 1.0 / np.cosh(x) ** 2
    return Psi(np.tanh, np.arctanh, 2, dom, _diag_jac(sech2, sech2), "tanh_tanh")


PSI_REGISTRY = {
    "exp": exp_psi,
    "identity": identity_psi,
    "affine": affine_psi,
    "tanh": tanh_psi,
    "exp_exp": exp_exp_psi,
    "exp_id": exp_id_psi,
    "shear": shear_psi,
    "tanh_tanh": tanh_tanh_psi,
}


def get_psi(name, **params):
    try:
        factory = PSI_REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown psi {name!r}; known: {sorted(PSI_REGISTRY)}") from None
    return factory(**params)
