"""Hot Monte Carlo kernels, with numba and pure-numpy implementations.

Both implementations consume the same pre-drawn random inputs and follow the
same arithmetic, so they agree to rounding.  ``GSSMP_NUMBA=0`` selects the
numpy versions (see ``gssmp._accel``).
"""
import numpy as np

from ._accel import USE_NUMBA, njit

# -- helpers ------------------------------------------------------------------------


@njit
def _expm1_ratio(x):
    if abs(x) < 1e-8:
        return 1.0 + 0.5 * x
    return np.expm1(x) / x


def _expm1_ratio_np(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-8
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + 0.5 * x, np.expm1(safe) / safe)


# -- T-group functionals ------------------------------------------------------------


@njit
def _tgroup_numba(offsets, times, a, b, drift1, drift2, big, queries, out_x, out_i, out_d):
    n = offsets.shape[0] - 1
    nq = queries.shape[0]
    for p in range(n):
        x = 0.0
        integ = 0.0
        dens = 0.0
        t = 0.0
        q = 0
        for e in range(offsets[p], offsets[p + 1] + 1):
            te = times[e] if e < offsets[p + 1] else np.inf
            while q < nq and queries[q] < te:
                dt = queries[q] - t
                w = np.exp(x) * dt * _expm1_ratio(drift1 * dt)
                out_x[p, q] = x + drift1 * dt
                out_i[p, q] = integ + drift2 * w
                out_d[p, q] = dens + w
                q += 1
            if q >= nq:
                break
            dt = te - t
            w = np.exp(x) * dt * _expm1_ratio(drift1 * dt)
            integ += drift2 * w
            dens += w
            x += drift1 * dt
            t = te
            if max(abs(a[e]), abs(b[e])) < big:
                integ += np.exp(x) * b[e]
                x += a[e]


def _tgroup_numpy(offsets, times, a, b, drift1, drift2, big, queries, out_x, out_i, out_d):
    n = offsets.shape[0] - 1
    counts = np.diff(offsets)
    kmax = int(counts.max()) if n else 0
    row = np.repeat(np.arange(n), counts)
    col = np.arange(times.size) - np.repeat(offsets[:-1], counts)
    T = np.full((n, kmax + 1), np.inf)
    A = np.zeros((n, kmax + 1))
    B = np.zeros((n, kmax + 1))
    T[row, col] = times
    keep = np.maximum(np.abs(a), np.abs(b)) < big
    A[row, col] = np.where(keep, a, 0.0)
    B[row, col] = np.where(keep, b, 0.0)
    for qi, qt in enumerate(queries):
        x = np.zeros(n)
        integ = np.zeros(n)
        dens = np.zeros(n)
        t = np.zeros(n)
        for k in range(kmax + 1):
            te = np.minimum(T[:, k], qt)
            dt = te - t
            w = np.exp(x) * dt * _expm1_ratio_np(drift1 * dt)
            integ = integ + drift2 * w
            dens = dens + w
            x = x + drift1 * dt
            t = te
            hit = T[:, k] < qt
            # events at exactly the query time are included (right continuity)
            hit |= T[:, k] == qt
            integ = np.where(hit, integ + np.exp(x) * B[:, k], integ)
            x = np.where(hit, x + A[:, k], x)
        out_x[:, qi] = x
        out_i[:, qi] = integ
        out_d[:, qi] = dens


def tgroup_functionals(offsets, times, a, b, drift, big, queries, backend=None):
    """Pathwise ``(pi_1 R(t), pi_2 R(t), int_0^t exp(pi_1 R(u)) du)`` at sorted query times.

    ``R`` is the T-group process of a compound Poisson pair with drift
    ``drift = (b1, b2)``, started at 0, after removing every jump ``(a, b)``
    with ``max(|a|, |b|) >= big``.
    """
    queries = np.asarray(queries, dtype=float)
    n = offsets.shape[0] - 1
    outs = [np.zeros((n, queries.size)) for _ in range(3)]
    use_numba = USE_NUMBA if backend is None else backend == "numba"
    fn = _tgroup_numba if use_numba else _tgroup_numpy
    fn(np.asarray(offsets, dtype=np.int64), np.asarray(times, dtype=float), np.asarray(a, dtype=float),
       np.asarray(b, dtype=float), float(drift[0]), float(drift[1]), float(big), queries, *outs)
    return tuple(outs)


# -- tagged fragment ----------------------------------------------------------------
#
# Path state is kept in a float array ``S`` of shape (n, 9) and an int array
# ``K`` of shape (n, 3) so both routes can be resumed after their uniform
# blocks are refilled.

RUNNING, DEAD, FLOOR, ALIVE_AT_END, CAPPED = 0, 1, 2, 3, 4
# float state columns
S_T, S_Y, S_Z, S_YP, S_ZP, S_DEATH, S_PHI, S_XI, S_ZEND = range(9)
# int state columns
K_STATUS, K_EVENTS, K_PROBED = range(3)


def new_state(n, x0):
    S = np.zeros((n, 9))
    S[:, S_Y] = x0
    S[:, S_DEATH] = np.nan
    K = np.zeros((n, 3), dtype=np.int64)
    return S, K


@njit
def _clock_solve(rem, base, rate):
    """Solve ``base * int_0^tau exp(rate u) du = rem``."""
    x = rem * rate / base
    if abs(x) < 1e-12:
        return rem / base * (1.0 - 0.5 * x)
    return np.log1p(x) / rate


@njit
def _direct_path(p, U, S, K, alpha, lam, c, cumw, starts, cummass, sums, t_probe, t_end, floor, cap):
    """Advance one path of the direct route through its block of uniforms."""
    rate = lam + c
    for k in range(U.shape[1]):
        if K[p, K_STATUS] != RUNNING:
            return
        t = S[p, S_T]
        y = S[p, S_Y]
        z = S[p, S_Z]
        s = -np.log1p(-U[p, k, 0]) / rate
        ya = y ** (-alpha)
        dt = ya * s * _expm1_ratio(alpha * c * s)
        t_next = t + dt
        if K[p, K_PROBED] == 0 and t_probe < t_next:
            sp = _clock_solve(t_probe - t, ya, alpha * c)
            S[p, S_YP] = y * np.exp(-c * sp)
            S[p, S_ZP] = z - y * np.expm1(-c * sp)
            K[p, K_PROBED] = 1
        if t_end < t_next:
            se = _clock_solve(t_end - t, ya, alpha * c)
            S[p, S_ZEND] = z - y * np.expm1(-c * se)
            S[p, S_Y] = y * np.exp(-c * se)
            S[p, S_DEATH] = t_end
            K[p, K_STATUS] = ALIVE_AT_END
            return
        z = z - y * np.expm1(-c * s)
        y = y * np.exp(-c * s)
        t = t_next
        K[p, K_EVENTS] += 1
        S[p, S_T] = t
        if U[p, k, 1] * rate >= lam:
            # the tagged point is eroded away
            S[p, S_Y] = 0.0
            S[p, S_Z] = z
            S[p, S_DEATH] = t
            K[p, K_STATUS] = DEAD
            return
        v = U[p, k, 2] * cumw[cumw.shape[0] - 1]
        j = 0
        while j < cumw.shape[0] - 1 and cumw[j] <= v:
            j += 1
        z += y * (1.0 - sums[j])
        w = U[p, k, 3]
        i = starts[j]
        found = False
        while i < starts[j + 1]:
            if w < cummass[i]:
                found = True
                break
            i += 1
        if not found:
            S[p, S_Y] = 0.0
            S[p, S_Z] = z
            S[p, S_DEATH] = t
            K[p, K_STATUS] = DEAD
            return
        prev = cummass[i - 1] if i > starts[j] else 0.0
        y = y * (cummass[i] - prev)
        S[p, S_Y] = y
        S[p, S_Z] = z
        if y < floor:
            S[p, S_Y] = 0.0
            S[p, S_DEATH] = t
            K[p, K_STATUS] = FLOOR
            return
        if K[p, K_EVENTS] >= cap:
            S[p, S_DEATH] = t
            K[p, K_STATUS] = CAPPED
            return


@njit
def _direct_numba(rows, U, S, K, alpha, lam, c, cumw, starts, cummass, sums, t_probe, t_end, floor, cap):
    for r in range(rows.shape[0]):
        _direct_path(rows[r], U, S, K, alpha, lam, c, cumw, starts, cummass, sums, t_probe, t_end, floor, cap)


def _direct_numpy(rows, U, S, K, alpha, lam, c, cumw, starts, cummass, sums, t_probe, t_end, floor, cap):
    rate = lam + c
    atoms = cumw.shape[0]
    # fragment masses per atom, padded; cummass is stored flat with offsets ``starts``
    width = int(np.max(np.diff(starts))) if atoms else 0
    CM = np.full((atoms, width), np.inf)
    for j in range(atoms):
        seg = cummass[starts[j]:starts[j + 1]]
        CM[j, :seg.size] = seg
    masses = np.diff(np.concatenate([np.zeros((atoms, 1)), np.where(np.isinf(CM), np.nan, CM)], axis=1), axis=1)
    for k in range(U.shape[1]):
        p = rows[K[rows, K_STATUS] == RUNNING]
        if p.size == 0:
            return
        t, y, z = S[p, S_T], S[p, S_Y], S[p, S_Z]
        s = -np.log1p(-U[p, k, 0]) / rate
        ya = y ** (-alpha)
        dt = ya * s * _expm1_ratio_np(alpha * c * s)
        t_next = t + dt
        probe = (K[p, K_PROBED] == 0) & (t_probe < t_next)
        if np.any(probe):
            q = p[probe]
            sp = _clock_solve_np(t_probe - t[probe], ya[probe], alpha * c)
            S[q, S_YP] = y[probe] * np.exp(-c * sp)
            S[q, S_ZP] = z[probe] - y[probe] * np.expm1(-c * sp)
            K[q, K_PROBED] = 1
        end = t_end < t_next
        if np.any(end):
            q = p[end]
            se = _clock_solve_np(t_end - t[end], ya[end], alpha * c)
            S[q, S_ZEND] = z[end] - y[end] * np.expm1(-c * se)
            S[q, S_Y] = y[end] * np.exp(-c * se)
            S[q, S_DEATH] = t_end
            K[q, K_STATUS] = ALIVE_AT_END
        go = ~end
        p, s, t_next, y, z = p[go], s[go], t_next[go], y[go], z[go]
        z = z - y * np.expm1(-c * s)
        y = y * np.exp(-c * s)
        K[p, K_EVENTS] += 1
        S[p, S_T] = t_next
        eroded = U[p, k, 1] * rate >= lam
        v = U[p, k, 2] * cumw[-1]
        j = np.minimum(np.searchsorted(cumw, v, side="right"), atoms - 1)
        z = np.where(eroded, z, z + y * (1.0 - sums[j]))
        w = U[p, k, 3]
        i = np.sum(CM[j] <= w[:, None], axis=1)
        died = eroded | (i >= (starts[j + 1] - starts[j]))
        frac = masses[j, np.minimum(i, width - 1)]
        y = np.where(died, 0.0, y * np.where(died, 1.0, frac))
        S[p, S_Y] = y
        S[p, S_Z] = z
        S[p[died], S_DEATH] = t_next[died]
        K[p[died], K_STATUS] = DEAD
        low = ~died & (y < floor)
        S[p[low], S_Y] = 0.0
        S[p[low], S_DEATH] = t_next[low]
        K[p[low], K_STATUS] = FLOOR
        capped = ~died & ~low & (K[p, K_EVENTS] >= cap)
        S[p[capped], S_DEATH] = t_next[capped]
        K[p[capped], K_STATUS] = CAPPED


def _clock_solve_np(rem, base, rate):
    rem = np.asarray(rem, dtype=float)
    x = rem * rate / base
    lin = np.abs(x) < 1e-12
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(lin, rem / base * (1.0 - 0.5 * x), np.log1p(x) / (rate if rate != 0 else 1.0))


@njit
def _levy_path(p, U, S, K, base_kill, alpha, scale, x0, lam, drift, cum, da, db, kp, t_probe, t_end, xi_floor, cap):
    """Advance one path of the Lévy route (the same triples as ``levy.simulate``)."""
    ncat = cum.shape[0]
    for k in range(U.shape[1]):
        if K[p, K_STATUS] != RUNNING:
            return
        s = S[p, S_T]
        xi = S[p, S_XI]
        z = S[p, S_Z]
        phi = S[p, S_PHI]
        s_next = s + (-np.log1p(-U[p, k, 0]) / lam)
        tb = base_kill[p]
        seg_end = s_next if s_next <= tb else tb
        d = seg_end - s
        e_a = np.exp(alpha * xi)
        dphi = e_a * d * _expm1_ratio(alpha * drift * d)
        if K[p, K_PROBED] == 0 and t_probe < scale * (phi + dphi):
            tau = _clock_solve(t_probe / scale - phi, e_a, alpha * drift)
            S[p, S_YP] = x0 * np.exp(-(xi + drift * tau))
            S[p, S_ZP] = x0 * (z + drift * np.exp(-xi) * tau * _expm1_ratio(-drift * tau))
            K[p, K_PROBED] = 1
        if t_end < scale * (phi + dphi):
            tau = _clock_solve(t_end / scale - phi, e_a, alpha * drift)
            S[p, S_ZEND] = x0 * (z + drift * np.exp(-xi) * tau * _expm1_ratio(-drift * tau))
            S[p, S_Y] = x0 * np.exp(-(xi + drift * tau))
            S[p, S_DEATH] = t_end
            K[p, K_STATUS] = ALIVE_AT_END
            return
        z = z + drift * np.exp(-xi) * d * _expm1_ratio(-drift * d)
        phi = phi + dphi
        xi = xi + drift * d
        S[p, S_T] = seg_end
        S[p, S_XI] = xi
        S[p, S_Z] = z
        S[p, S_PHI] = phi
        if tb < s_next:
            S[p, S_Y] = 0.0
            S[p, S_DEATH] = scale * phi
            K[p, K_STATUS] = DEAD
            return
        v = U[p, k, 1] * cum[ncat - 1]
        j = 0
        while j < ncat - 1 and cum[j] <= v:
            j += 1
        K[p, K_EVENTS] += 1
        z = z + np.exp(-xi) * db[j]
        S[p, S_Z] = z
        if U[p, k, 2] < kp[j]:
            S[p, S_Y] = 0.0
            S[p, S_DEATH] = scale * phi
            K[p, K_STATUS] = DEAD
            return
        xi = xi + da[j]
        S[p, S_XI] = xi
        S[p, S_Y] = x0 * np.exp(-xi)
        if xi > xi_floor:
            S[p, S_Y] = 0.0
            S[p, S_DEATH] = scale * phi
            K[p, K_STATUS] = FLOOR
            return
        if K[p, K_EVENTS] >= cap:
            S[p, S_DEATH] = scale * phi
            K[p, K_STATUS] = CAPPED
            return


@njit
def _levy_numba(rows, U, S, K, base_kill, alpha, scale, x0, lam, drift, cum, da, db, kp, t_probe, t_end, xi_floor, cap):
    for r in range(rows.shape[0]):
        _levy_path(rows[r], U, S, K, base_kill, alpha, scale, x0, lam, drift, cum, da, db, kp,
                   t_probe, t_end, xi_floor, cap)


def _levy_numpy(rows, U, S, K, base_kill, alpha, scale, x0, lam, drift, cum, da, db, kp, t_probe, t_end, xi_floor, cap):
    ncat = cum.shape[0]
    for k in range(U.shape[1]):
        p = rows[K[rows, K_STATUS] == RUNNING]
        if p.size == 0:
            return
        s, xi, z, phi = S[p, S_T], S[p, S_XI], S[p, S_Z], S[p, S_PHI]
        s_next = s + (-np.log1p(-U[p, k, 0]) / lam)
        tb = base_kill[p]
        seg_end = np.where(s_next <= tb, s_next, tb)
        d = seg_end - s
        e_a = np.exp(alpha * xi)
        dphi = e_a * d * _expm1_ratio_np(alpha * drift * d)
        probe = (K[p, K_PROBED] == 0) & (t_probe < scale * (phi + dphi))
        if np.any(probe):
            q = p[probe]
            tau = _clock_solve_np(t_probe / scale - phi[probe], e_a[probe], alpha * drift)
            S[q, S_YP] = x0 * np.exp(-(xi[probe] + drift * tau))
            S[q, S_ZP] = x0 * (z[probe] + drift * np.exp(-xi[probe]) * tau * _expm1_ratio_np(-drift * tau))
            K[q, K_PROBED] = 1
        end = t_end < scale * (phi + dphi)
        if np.any(end):
            q = p[end]
            tau = _clock_solve_np(t_end / scale - phi[end], e_a[end], alpha * drift)
            S[q, S_ZEND] = x0 * (z[end] + drift * np.exp(-xi[end]) * tau * _expm1_ratio_np(-drift * tau))
            S[q, S_Y] = x0 * np.exp(-(xi[end] + drift * tau))
            S[q, S_DEATH] = t_end
            K[q, K_STATUS] = ALIVE_AT_END
        go = ~end
        p, d, xi, z, phi, dphi = p[go], d[go], xi[go], z[go], phi[go], dphi[go]
        s_next, tb, seg_end = s_next[go], tb[go], seg_end[go]
        z = z + drift * np.exp(-xi) * d * _expm1_ratio_np(-drift * d)
        phi = phi + dphi
        xi = xi + drift * d
        S[p, S_T] = seg_end
        S[p, S_PHI] = phi
        based = tb < s_next
        j = np.minimum(np.searchsorted(cum, U[p, k, 1] * cum[-1], side="right"), ncat - 1)
        z = np.where(based, z, z + np.exp(-xi) * db[j])
        K[p[~based], K_EVENTS] += 1
        killed = ~based & (U[p, k, 2] < kp[j])
        xi = np.where(based | killed, xi, xi + da[j])
        S[p, S_XI] = xi
        S[p, S_Z] = z
        dead = based | killed
        S[p, S_Y] = np.where(dead, 0.0, x0 * np.exp(-xi))
        S[p[dead], S_DEATH] = scale * phi[dead]
        K[p[dead], K_STATUS] = DEAD
        low = ~dead & (xi > xi_floor)
        S[p[low], S_Y] = 0.0
        S[p[low], S_DEATH] = scale * phi[low]
        K[p[low], K_STATUS] = FLOOR
        capped = ~dead & ~low & (K[p, K_EVENTS] >= cap)
        S[p[capped], S_DEATH] = scale * phi[capped]
        K[p[capped], K_STATUS] = CAPPED


def direct_step(rows, U, S, K, params, backend=None):
    use_numba = USE_NUMBA if backend is None else backend == "numba"
    fn = _direct_numba if use_numba else _direct_numpy
    fn(rows, U, S, K, *params)


def levy_step(rows, U, S, K, params, backend=None):
    use_numba = USE_NUMBA if backend is None else backend == "numba"
    fn = _levy_numba if use_numba else _levy_numpy
    fn(rows, U, S, K, *params)
