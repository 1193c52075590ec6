"""Lévy models on R and R^2 with finite jump activity, and exact path simulation.

A model is drift + Brownian part + a finite catalogue of jumps, each jump
optionally killing the process.  Paths are event driven: jump times come from
a superposed Poisson clock, the Brownian part is realised on a regular grid
and interpolated affinely, and the base killing time is an independent
exponential.

Random streams
--------------
``simulate`` derives three independent child streams from the seed:
jumps, Brownian increments and the base killing time.  Each jump event
consumes exactly three uniforms ``(u_wait, u_type, u_kill)``.  Because every
stream is consumed sequentially, extending the horizon only appends events:
paths for a shorter horizon are prefixes of longer ones, and changing the base
kill rate does not move any jump.
"""
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .paths import CadlagPath

DEFAULT_GRID_STEP = 2.0 ** -10
_BLOCK = 64


class ModelError(ValueError):
    """Invalid Lévy model data."""


@dataclass(frozen=True)
class JumpSpec:
    """One atom of the Lévy measure: a jump of fixed size at a constant rate."""

    rate: float
    displacement: np.ndarray
    kill_prob: float = 0.0

    def __post_init__(self):
        disp = np.atleast_1d(np.asarray(self.displacement, dtype=float))
        if disp.ndim != 1 or disp.size not in (1, 2):
            raise ModelError("jump displacement must be a vector of length 1 or 2")
        if not np.all(np.isfinite(disp)):
            raise ModelError("jump displacement must be finite")
        if not (np.isfinite(self.rate) and self.rate > 0):
            raise ModelError(f"jump rate must be positive, got {self.rate}")
        if not 0.0 <= self.kill_prob <= 1.0:
            raise ModelError(f"kill_prob must lie in [0, 1], got {self.kill_prob}")
        disp.setflags(write=False)
        object.__setattr__(self, "displacement", disp)
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "kill_prob", float(self.kill_prob))

    def to_dict(self):
        return {"rate": self.rate, "displacement": self.displacement.tolist(), "kill_prob": self.kill_prob}


def _psd_factor(cov, dim):
    """Return ``L`` with ``L @ L.T == cov`` for a PSD matrix, via eigh (handles singular cov)."""
    cov = np.asarray(cov, dtype=float).reshape(dim, dim)
    if not np.allclose(cov, cov.T, rtol=0, atol=1e-12 * max(1.0, np.abs(cov).max())):
        raise ModelError("diffusion matrix must be symmetric")
    w, v = np.linalg.eigh(cov)
    scale = max(1.0, np.abs(w).max())
    if w.min() < -1e-12 * scale:
        raise ModelError(f"diffusion matrix is not positive semidefinite (eigenvalue {w.min():g})")
    return v * np.sqrt(np.clip(w, 0.0, None))


@dataclass(frozen=True, eq=False)
class LevyModel:
    """Characteristics of a killed Lévy process on R^dim (dim 1 or 2).

    ``diffusion`` is the variance rate: a nonnegative scalar in dimension 1
    or a 2x2 covariance matrix in dimension 2.
    """

    dim: int
    drift: np.ndarray = None
    diffusion: np.ndarray = None
    jumps: Sequence[JumpSpec] = field(default_factory=tuple)
    base_kill_rate: float = 0.0
    grid_step: float = DEFAULT_GRID_STEP

    def __post_init__(self):
        d = self.dim
        if d not in (1, 2):
            raise ModelError("dim must be 1 or 2")
        drift = np.zeros(d) if self.drift is None else np.atleast_1d(np.asarray(self.drift, dtype=float))
        if drift.shape != (d,):
            raise ModelError(f"drift must have {d} entries")
        diff = np.zeros((d, d)) if self.diffusion is None else np.asarray(self.diffusion, dtype=float)
        if diff.size != d * d:
            raise ModelError(f"diffusion must have {d * d} entries")
        diff = diff.reshape(d, d)
        factor = _psd_factor(diff, d)
        jumps = tuple(j if isinstance(j, JumpSpec) else JumpSpec(**j) for j in self.jumps)
        for j in jumps:
            if j.displacement.size != d:
                raise ModelError("jump displacement dimension does not match the model")
        if not (np.isfinite(self.base_kill_rate) and self.base_kill_rate >= 0):
            raise ModelError("base_kill_rate must be >= 0")
        if not self.grid_step > 0:
            raise ModelError("grid_step must be positive")
        for a in (drift, diff, factor):
            a.setflags(write=False)
        object.__setattr__(self, "drift", drift)
        object.__setattr__(self, "diffusion", diff)
        object.__setattr__(self, "jumps", jumps)
        object.__setattr__(self, "base_kill_rate", float(self.base_kill_rate))
        object.__setattr__(self, "grid_step", float(self.grid_step))
        object.__setattr__(self, "_factor", factor)

    @property
    def has_diffusion(self):
        return bool(np.any(self.diffusion != 0))

    @property
    def jump_rate(self):
        return float(sum(j.rate for j in self.jumps))

    @property
    def total_rate(self):
        """Rate of the superposed event clock, killing included."""
        return self.jump_rate + self.base_kill_rate

    @property
    def kill_rate(self):
        """Total killing rate: base rate plus kill-coupled jump rates."""
        return self.base_kill_rate + sum(j.rate * j.kill_prob for j in self.jumps)

    def jump_table(self):
        """Arrays ``(rates, displacements, kill_probs)`` of the jump catalogue."""
        n = len(self.jumps)
        rates = np.array([j.rate for j in self.jumps], dtype=float)
        disp = np.array([j.displacement for j in self.jumps], dtype=float).reshape(n, self.dim)
        kp = np.array([j.kill_prob for j in self.jumps], dtype=float)
        return rates, disp, kp

    def mean_increment(self):
        """E[X(1) - X(0)] on survival-free terms: drift plus non-killing jump means."""
        m = self.drift.copy()
        for j in self.jumps:
            m += j.rate * (1.0 - j.kill_prob) * j.displacement
        return m

    def to_dict(self):
        diff = float(self.diffusion[0, 0]) if self.dim == 1 else self.diffusion.tolist()
        return {
            "dim": self.dim,
            "drift": self.drift.tolist(),
            "diffusion": diff,
            "jumps": [j.to_dict() for j in self.jumps],
            "base_kill_rate": self.base_kill_rate,
            "grid_step": self.grid_step,
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("spec_version", None)
        d["jumps"] = tuple(JumpSpec(**j) for j in d.get("jumps", ()))
        return cls(**d)


def as_seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def child_seed(ss, k):
    """The ``k``-th child of a seed sequence, derived without mutating ``ss``.

    Unlike ``SeedSequence.spawn`` this is a pure function of ``(ss, k)``, so
    replica ``k`` gets the same stream however many replicas are run.
    """
    ss = as_seed_sequence(ss)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + (int(k),))


JUMP_STREAM, DIFFUSION_STREAM, KILL_STREAM = 0, 1, 2


def draw_jump_events(rng, total_rate, cum_probs, horizon):
    """Event times, catalogue indices and kill uniforms up to ``horizon``.

    Uniform triples are read in blocks; the block size does not affect the
    result because triples are consumed in order.  Returns arrays for events
    with time <= horizon.
    """
    times, types, kills = [], [], []
    t = 0.0
    if total_rate <= 0:
        return np.empty(0), np.empty(0, dtype=np.int64), np.empty(0)
    ncat = len(cum_probs)
    while True:
        u = rng.random((_BLOCK, 3))
        waits = -np.log1p(-u[:, 0]) / total_rate
        # add.accumulate is sequential, so the times match a scalar running sum
        tt = np.cumsum(np.concatenate([[t], waits]))[1:]
        stop = np.searchsorted(tt, horizon, side="right")
        idx = np.minimum(np.searchsorted(cum_probs, u[:stop, 1] * cum_probs[-1], side="right"), ncat - 1)
        times.append(tt[:stop])
        types.append(idx)
        kills.append(u[:stop, 2])
        if stop < _BLOCK:
            break
        t = tt[-1]
    return np.concatenate(times), np.concatenate(types).astype(np.int64), np.concatenate(kills)


def base_kill_time(rng, rate):
    """Exp(rate) killing time from one uniform; monotone decreasing in ``rate``."""
    e = -np.log1p(-rng.random())
    return np.inf if rate <= 0 else e / rate


def simulate(model, horizon, seed=0, start=None):
    """Simulate one path of ``model`` on ``[0, horizon]``.

    Parameters
    ----------
    model : LevyModel
    horizon : float
        Positive time horizon.
    seed : int or SeedSequence
    start : array_like, optional
        Initial value (default 0).

    Returns
    -------
    CadlagPath
        Killed at the first killing event if it occurs before ``horizon``.
    """
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    d = model.dim
    x0 = np.zeros(d) if start is None else np.atleast_1d(np.asarray(start, dtype=float)).copy()
    ss = as_seed_sequence(seed)
    jump_rng = np.random.default_rng(child_seed(ss, JUMP_STREAM))
    kill_rng = np.random.default_rng(child_seed(ss, KILL_STREAM))

    rates, disp, kp = model.jump_table()
    cum = np.cumsum(rates) if rates.size else np.zeros(0)
    ev_t, ev_k, ev_u = draw_jump_events(jump_rng, model.jump_rate, cum, horizon)

    t_base = base_kill_time(kill_rng, model.base_kill_rate)
    hit = np.nonzero(ev_u < kp[ev_k])[0] if ev_t.size else ()
    t_jump_kill = ev_t[hit[0]] if len(hit) else np.inf
    t_kill = min(t_jump_kill, t_base)
    if t_kill <= horizon:
        end, killed = float(t_kill), True
        kill_jump = disp[ev_k[hit[0]]].copy() if t_jump_kill <= t_base else None
        keep = ev_t < end
        ev_t, ev_k = ev_t[keep], ev_k[keep]
    else:
        end, killed, kill_jump = float(horizon), False, None

    jumps = disp[ev_k] if ev_k.size else np.zeros((0, d))

    if model.has_diffusion:
        h = model.grid_step
        n_cells = int(np.ceil(end / h))
        grid = np.arange(1, n_cells) * h
        grid = grid[grid < end]
        diff_rng = np.random.default_rng(child_seed(ss, DIFFUSION_STREAM))
        z = diff_rng.standard_normal((n_cells, d))
        dB = z @ model._factor.T * np.sqrt(h)
        B_nodes = np.vstack([np.zeros((1, d)), np.cumsum(dB, axis=0)])
    else:
        grid = np.zeros(0)

    times = np.union1d(np.concatenate([[0.0], grid]), ev_t)
    times = times[times < end] if killed else times[times <= end]
    n = times.size
    jump_at = np.zeros((n, d))
    if ev_t.size:
        pos = np.searchsorted(times, ev_t)
        np.add.at(jump_at, pos, jumps)

    def brownian(ts):
        if not model.has_diffusion:
            return np.zeros((len(ts), d))
        cell = np.minimum((ts / model.grid_step).astype(np.int64), B_nodes.shape[0] - 2)
        frac = (ts - cell * model.grid_step) / model.grid_step
        return B_nodes[cell] + frac[:, None] * (B_nodes[cell + 1] - B_nodes[cell])

    cont = x0 + times[:, None] * model.drift + brownian(times)
    cum_jumps = np.cumsum(jump_at, axis=0)
    right = cont + cum_jumps
    left = right - jump_at
    slopes = np.empty((n, d))
    seg_end = np.append(times[1:], end)
    if model.has_diffusion:
        cont_end = x0 + seg_end[:, None] * model.drift + brownian(seg_end)
        dt = seg_end - times
        ok = dt > 0
        slopes[ok] = (cont_end[ok] - cont[ok]) / dt[ok, None]
        slopes[~ok] = model.drift
        drift = model.drift.copy()
        tail = None
    else:
        slopes[:] = model.drift
        drift = None
        pure = not model.jumps and model.base_kill_rate == 0
        tail = model.drift.copy() if pure and not killed else None
    return CadlagPath(times, left, right, slopes, end, killed, drift=drift,
                      kill_jump=kill_jump, tail_slope=tail)


def event_batch(model, horizon, n_paths, seed=0):
    """Jump events of ``n_paths`` replicas, exactly as ``simulate`` would draw them.

    Replica ``i`` uses the jump stream of child ``i`` of ``seed``.  Returns
    ``(offsets, times, types, kill_u, base_kill)`` in compressed row form:
    the events of replica ``i`` are ``offsets[i]:offsets[i + 1]``.
    ``base_kill`` holds the base killing times (``inf`` when the rate is 0).
    """
    ss = as_seed_sequence(seed)
    rates, _, _ = model.jump_table()
    cum = np.cumsum(rates) if rates.size else np.zeros(0)
    times, types, kills = [], [], []
    counts = np.zeros(n_paths, dtype=np.int64)
    base = np.full(n_paths, np.inf)
    for i in range(n_paths):
        child = child_seed(ss, i)
        t, k, u = draw_jump_events(np.random.default_rng(child_seed(child, JUMP_STREAM)),
                                   model.jump_rate, cum, horizon)
        times.append(t)
        types.append(k)
        kills.append(u)
        counts[i] = t.size
        if model.base_kill_rate > 0:
            base[i] = base_kill_time(np.random.default_rng(child_seed(child, KILL_STREAM)), model.base_kill_rate)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    cat = lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt)
    return offsets, cat(times, float), cat(types, np.int64), cat(kills, float), base


def simulate_many(model, horizon, n_paths, seed=0, start=None):
    """Independent paths; replica ``i`` uses child stream ``i`` of ``seed``."""
    ss = as_seed_sequence(seed)
    return [simulate(model, horizon, child_seed(ss, i), start) for i in range(n_paths)]


def values_at(paths, t):
    """Right values of many paths at one time; killed entries are NaN."""
    out = np.full((len(paths), paths[0].dim), np.nan)
    for i, p in enumerate(paths):
        if not (p.killed and t >= p.end):
            out[i] = p.evaluate(t)
    return out
