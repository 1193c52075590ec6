"""Piecewise-affine càdlàg sample paths with a jump ledger and a cemetery state."""
import csv
from dataclasses import dataclass
from typing import Optional

import numpy as np


class _Cemetery:
    """The absorbing cemetery state Δ."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "CEMETERY"

    def __reduce__(self):
        return (_Cemetery, ())


CEMETERY = _Cemetery()


class PathError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CadlagPath:
    """A càdlàg path, affine between breakpoints.

    ``times[0] == 0`` and times are strictly increasing.  Row ``i`` of
    ``left``/``right`` holds the left limit and value at ``times[i]``;
    ``slopes[i]`` is the slope on ``[times[i], times[i+1])`` (the last segment
    runs to ``end``).  ``end`` is the horizon, or the kill time when
    ``killed`` is set; the path is in the cemetery for ``t >= end`` then.

    ``drift`` is the deterministic part of every segment slope (any excess
    is discretised Brownian motion); ``None`` means the whole slope is
    deterministic.  ``kill_jump`` is the displacement carried by a killing
    jump, which is not applied to the path.  ``tail_slope`` is set when the
    path is known to continue affinely with that slope after ``end``.
    """

    times: np.ndarray
    left: np.ndarray
    right: np.ndarray
    slopes: np.ndarray
    end: float
    killed: bool = False
    drift: Optional[np.ndarray] = None
    kill_jump: Optional[np.ndarray] = None
    tail_slope: Optional[np.ndarray] = None

    def __post_init__(self):
        times = np.ascontiguousarray(self.times, dtype=float)
        n = times.shape[0]
        arrs = {}
        for name in ("left", "right", "slopes"):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.ndim == 1:
                a = a[:, None]
            if a.shape[0] != n:
                raise PathError(f"{name} has {a.shape[0]} rows, expected {n}")
            arrs[name] = np.ascontiguousarray(a)
        if n == 0 or times[0] != 0.0:
            raise PathError("breakpoints must start at t=0")
        if np.any(np.diff(times) <= 0):
            raise PathError("breakpoints must be strictly increasing")
        if times[-1] > self.end:
            raise PathError("breakpoint after the end of the path")
        object.__setattr__(self, "times", times)
        for name, a in arrs.items():
            object.__setattr__(self, name, a)
        object.__setattr__(self, "end", float(self.end))
        object.__setattr__(self, "killed", bool(self.killed))
        for name in ("drift", "kill_jump", "tail_slope"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, np.atleast_1d(np.asarray(val, dtype=float)))
        for a in (self.times, self.left, self.right, self.slopes):
            a.setflags(write=False)

    @property
    def dim(self):
        return self.left.shape[1]

    @property
    def kill_time(self):
        return self.end if self.killed else None

    @property
    def start(self):
        return self.right[0].copy()

    @property
    def durations(self):
        """Length of every segment, the last one ending at ``end``."""
        return np.diff(np.append(self.times, self.end))

    @property
    def end_value(self):
        """Left limit at ``end``."""
        return self.right[-1] + self.slopes[-1] * (self.end - self.times[-1])

    def jump_mask(self):
        return np.any(self.left != self.right, axis=1)

    def component(self, k):
        """The k-th coordinate as a 1D path on the same time axis."""
        pick = lambda a: None if a is None else a[k:k + 1]
        return CadlagPath(
            self.times, self.left[:, k], self.right[:, k], self.slopes[:, k], self.end,
            self.killed, pick(self.drift), pick(self.kill_jump), pick(self.tail_slope),
        )

    def check(self, atol=1e-9):
        """Verify segment continuity; returns the max mismatch."""
        if len(self.times) < 2:
            return 0.0
        pred = self.right[:-1] + self.slopes[:-1] * np.diff(self.times)[:, None]
        err = np.abs(pred - self.left[1:])
        scale = np.maximum(1.0, np.abs(self.left[1:]))
        worst = float(np.max(err / scale))
        if worst > atol:
            raise PathError(f"segment continuity violated by {worst:g}")
        return worst

    def evaluate(self, ts):
        """Right-continuous values at ``ts``; rows in the cemetery are NaN."""
        ts = np.asarray(ts, dtype=float)
        flat = ts.ravel()
        if np.any(flat < 0):
            raise PathError("negative time")
        if not self.killed and np.any(flat > self.end):
            raise PathError(f"time beyond the horizon {self.end}")
        idx = np.searchsorted(self.times, flat, side="right") - 1
        out = self.right[idx] + self.slopes[idx] * (flat - self.times[idx])[:, None]
        if self.killed:
            out[flat >= self.end] = np.nan
        return out.reshape(ts.shape + (self.dim,))

    def evaluate_left(self, ts):
        """Left limits at ``ts`` (0 < t <= end)."""
        ts = np.asarray(ts, dtype=float)
        flat = ts.ravel()
        if np.any(flat <= 0):
            raise PathError("no left limit at t <= 0")
        if np.any(flat > self.end):
            raise PathError(f"time beyond the end {self.end}")
        idx = np.searchsorted(self.times, flat, side="left") - 1
        out = self.right[idx] + self.slopes[idx] * (flat - self.times[idx])[:, None]
        return out.reshape(ts.shape + (self.dim,))


def value_at(path, t):
    """Value of ``path`` at ``t`` (right-continuous), or ``CEMETERY``."""
    t = float(t)
    if path.killed and t >= path.end:
        if t < 0:
            raise PathError("negative time")
        return CEMETERY
    return path.evaluate(t)


def left_value_at(path, t):
    """Left limit of ``path`` at ``t``."""
    return path.evaluate_left(float(t))


def from_chords(times, left, right, end, killed=False, **kw):
    """Build a path whose segments are chords between the given breakpoint values.

    Values between breakpoints are linear interpolations; only breakpoint
    values are exact for paths that are not truly affine.
    """
    times = np.asarray(times, dtype=float)
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    if left.ndim == 1:
        left, right = left[:, None], right[:, None]
    end_value = kw.pop("end_value", None)
    slopes = np.zeros_like(right)
    if len(times) > 1:
        slopes[:-1] = (left[1:] - right[:-1]) / np.diff(times)[:, None]
    if end_value is not None and end > times[-1]:
        slopes[-1] = (np.asarray(end_value, dtype=float) - right[-1]) / (end - times[-1])
    return CadlagPath(times, left, right, slopes, end, killed, **kw)


def _fmt(x):
    return repr(float(x))


def write_csv(path, fh, names=None):
    """Write ``t, x1..xd, is_jump, killed`` rows with round-trip exact floats.

    A jump contributes two rows at the same time: the left limit (is_jump=0)
    followed by the post-jump value (is_jump=1).  The final row is the left
    limit at ``end``; its ``killed`` flag is 1 for a killed path.
    """
    names = names or [f"x{k + 1}" for k in range(path.dim)]
    w = csv.writer(fh)
    w.writerow(["t", *names, "is_jump", "killed"])
    jumps = path.jump_mask()
    for i, t in enumerate(path.times):
        if jumps[i]:
            w.writerow([_fmt(t), *map(_fmt, path.left[i]), 0, 0])
            w.writerow([_fmt(t), *map(_fmt, path.right[i]), 1, 0])
        else:
            w.writerow([_fmt(t), *map(_fmt, path.right[i]), 0, 0])
    if path.end > path.times[-1] or path.killed:
        w.writerow([_fmt(path.end), *map(_fmt, path.end_value), 0, int(path.killed)])


def read_csv(fh):
    """Inverse of ``write_csv`` (drift and tail metadata are not stored).

    The last plain row is read as the value at ``end``, so a trailing
    breakpoint without a jump comes back as the end value, which describes
    the same path.
    """
    rows = [r for r in csv.reader(fh)][1:]
    if not rows:
        raise PathError("empty trajectory file")
    parsed = [(float(r[0]), [float(v) for v in r[1:-2]], int(r[-2]), int(r[-1])) for r in rows]
    t_last, v_last, jump_last, killed = parsed[-1]
    if len(parsed) > 1 and not jump_last:
        body, end, end_value = parsed[:-1], t_last, v_last
    else:
        body, end, end_value = parsed, t_last, None
    times, left, right = [], [], []
    for t, vals, is_jump, _ in body:
        if is_jump:
            right[-1] = vals
        else:
            times.append(t)
            left.append(vals)
            right.append(vals)
    return from_chords(times, left, right, end, bool(killed), end_value=end_value)
