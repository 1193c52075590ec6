"""State-space descriptors: open intervals and open planar regions."""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np


@dataclass(frozen=True)
class Domain:
    """An open subset of R^d (d = 1 or 2).

    ``lo``/``hi`` bound the domain (entries may be infinite).  ``contains`` is
    an optional membership predicate taking points of shape ``(..., d)``;
    without it the domain is the open box ``lo < y < hi``.  ``sample_lo`` and
    ``sample_hi`` give a finite box inside the domain used for verification
    grids and inverse-map initial guesses.
    """

    dim: int
    lo: tuple
    hi: tuple
    sample_lo: tuple
    sample_hi: tuple
    predicate: Optional[Callable] = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        for attr in ("lo", "hi", "sample_lo", "sample_hi"):
            val = tuple(float(v) for v in np.atleast_1d(getattr(self, attr)))
            if len(val) != self.dim:
                raise ValueError(f"{attr} must have {self.dim} entries")
            object.__setattr__(self, attr, val)
        if np.any(np.asarray(self.sample_lo) >= np.asarray(self.sample_hi)):
            raise ValueError("empty sample box")

    def contains(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape[-1] != self.dim:
            y = y[..., None] if self.dim == 1 else y
        inside = np.all((y > np.asarray(self.lo)) & (y < np.asarray(self.hi)), axis=-1)
        inside &= np.all(np.isfinite(y), axis=-1)
        if self.predicate is not None:
            inside &= np.asarray(self.predicate(y), dtype=bool)
        return inside

    @property
    def diameter(self):
        """Diameter of the sample box (used to scale tolerances)."""
        return float(np.linalg.norm(np.subtract(self.sample_hi, self.sample_lo)))

    def to_dict(self):
        return {
            "name": self.name,
            "dim": self.dim,
            "lo": list(self.lo),
            "hi": list(self.hi),
            "sample_lo": list(self.sample_lo),
            "sample_hi": list(self.sample_hi),
        }


def interval(lo, hi, sample_lo=None, sample_hi=None, name=""):
    sample_lo = lo if sample_lo is None else sample_lo
    sample_hi = hi if sample_hi is None else sample_hi
    return Domain(1, (lo,), (hi,), (sample_lo,), (sample_hi,), name=name)


def box(lo, hi, sample_lo=None, sample_hi=None, predicate=None, name=""):
    sample_lo = lo if sample_lo is None else sample_lo
    sample_hi = hi if sample_hi is None else sample_hi
    return Domain(2, tuple(lo), tuple(hi), tuple(sample_lo), tuple(sample_hi), predicate, name)


REAL_LINE = interval(-np.inf, np.inf, -3.0, 3.0, name="R")
HALF_LINE = interval(0.0, np.inf, 0.05, 20.0, name="(0,inf)")
PLANE = box((-np.inf, -np.inf), (np.inf, np.inf), (-2.0, -2.0), (2.0, 2.0), name="R^2")
